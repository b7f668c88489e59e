"""
Gradient iteration x_{k+1} = x_k - alpha_k g_k driven by a schedule.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd

from gradfamily.core.logging import get_logger
from gradfamily.models.schedule import Schedule, SolverConfig, parse_schedule
from gradfamily.services.quadratic_model import QuadraticProblem, evaluate, make_diagonal
from gradfamily.services.stepsize_engine import (
    PreviousStep,
    StepState,
    StepsizeError,
    ZeroGradientError,
    compute_moments,
    step_aopt,
    step_bb1,
    step_bb2,
    step_family,
    step_hat,
    step_tilde_family,
    step_tilde_general,
)

logger = get_logger("solver")

Vector = npt.NDArray[np.float64]

CONVERGED = "converged"
ITER_CAP = "iter_cap"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class IterateTrace:
    """Per-iteration scalars of one run, plus optional eigencomponents."""
    schedule: str
    k: List[int] = field(default_factory=list)
    f_gap: List[float] = field(default_factory=list)
    gnorm: List[float] = field(default_factory=list)
    alpha: List[float] = field(default_factory=list)
    rule: List[str] = field(default_factory=list)
    tilde: Optional[List[float]] = None
    bar: Optional[List[float]] = None
    mu: Optional[List[Vector]] = None
    log_mu: Optional[List[Vector]] = None
    sign_mu: Optional[List[Vector]] = None
    status: str = CONVERGED
    iterations: int = 0
    x: Optional[Vector] = field(default=None, repr=False)

    def record(self, k: int, f_gap: float, gnorm: float, alpha: float = math.nan, rule: str = "") -> None:
        self.k.append(k)
        self.f_gap.append(f_gap)
        self.gnorm.append(gnorm)
        self.alpha.append(alpha)
        self.rule.append(rule)

    def set_step(self, alpha: float, rule: str) -> None:
        """Attach the stepsize taken from the latest recorded iterate."""
        self.alpha[-1] = alpha
        self.rule[-1] = rule

    def keep_last(self) -> None:
        for name in ("k", "f_gap", "gnorm", "alpha", "rule", "tilde", "bar", "mu", "log_mu", "sign_mu"):
            values = getattr(self, name)
            if values:
                setattr(self, name, values[-1:])

    @property
    def final_gnorm(self) -> float:
        return self.gnorm[-1]

    @property
    def final_f_gap(self) -> float:
        return self.f_gap[-1]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({
            "k": self.k,
            "f_gap": self.f_gap,
            "gnorm": self.gnorm,
            "alpha": self.alpha,
            "rule": self.rule,
        })
        if self.tilde is not None:
            frame["tilde"] = self.tilde
            frame["bar"] = self.bar
        if self.mu:
            mu = np.vstack(self.mu)
            for i in range(mu.shape[1]):
                frame[f"mu_{i + 1}"] = mu[:, i]
        return frame


def _moment_order(schedule: Schedule) -> int:
    if schedule.variant in ("periodic", "alt") or schedule.rule == "family":
        return schedule.u + 1
    return 2


def _tilde_exponent(schedule: Schedule) -> int:
    """Psi exponent whose moments drive the tracked tilde/bar columns."""
    if schedule.variant in ("periodic", "alt") or schedule.rule in ("family", "mg"):
        return schedule.u
    return 0


def initial_alpha(problem: QuadraticProblem, g0: Vector, policy: str = "exact-sd") -> float:
    """
    Stepsize of the warm-start step.

    Raises:
        ZeroGradientError: g0 = 0 under the exact-sd policy
        ValueError: Unknown policy
    """
    if policy == "exact-sd":
        gg = float(np.dot(g0, g0))
        if gg == 0.0:
            raise ZeroGradientError("zero gradient: converged")
        return gg / float(np.dot(g0, problem.apply(g0)))
    if policy.startswith("fixed:"):
        return float(policy.split(":", 1)[1])
    raise ValueError(f"unknown alpha0 policy '{policy}'")


def schedule_next_alpha(schedule: Schedule, k: int, state: StepState) -> Tuple[float, str]:
    """
    Stepsize and rule tag at schedule index k.
    Frozen phases reuse state.prev.alpha, the stepsize of the previous iteration.
    """
    variant = schedule.variant

    if variant == "plain":
        rule = schedule.rule
        if rule in ("sd", "mg", "family"):
            return step_family(state, schedule.u), str(rule)
        if rule == "bb1":
            return step_bb1(state), "bb1"
        if rule == "bb2":
            return step_bb2(state), "bb2"
        if rule == "yuan":
            return step_tilde_family(state, 0), "yuan"
        return step_aopt(state), "aopt"

    if variant == "dy":
        if k % 4 < 2:
            return step_family(state, 0), "sd"
        return step_tilde_family(state, 0), "yuan"

    if variant in ("sdc", "hat"):
        phase = k % (schedule.h + schedule.s)
        if phase < schedule.h:
            return step_family(state, 0), "sd"
        if phase > schedule.h:
            return state.prev.alpha, f"{'yuan' if variant == 'sdc' else 'hat'}-reused"
        if variant == "sdc":
            return step_tilde_family(state, 0), "yuan"
        sd_prev = state.prev.moments[0] / state.prev.moments[1]
        return step_hat(sd_prev, step_family(state, 0)), "hat"

    if variant == "abbmin2":
        bb1 = step_bb1(state)
        bb2 = step_bb2(state)
        if bb2 < schedule.tau * bb1:
            window = state.bb2_history[-(schedule.memory + 1):] or (bb2,)
            return min(window), "bb2min"
        return bb1, "bb1"

    if variant == "periodic":
        phase = k % (schedule.kb + schedule.km + schedule.ks)
        if phase < schedule.kb:
            rule = step_bb1 if schedule.bb_variant == "bb1" else step_bb2
            return rule(state), "bb"
        if phase < schedule.kb + schedule.km:
            return step_family(state, schedule.u), "family"
        if phase == schedule.kb + schedule.km:
            alpha = step_tilde_family(state, schedule.u)
            logger.debug(f"Short phase entered at schedule index {k}: alpha_tilde={alpha!r}")
            return alpha, "tilde"
        return state.prev.alpha, "tilde-reused"

    if variant == "alt":
        if k % 2 == 0:
            return step_family(state, schedule.u), "family"
        return step_tilde_family(state, schedule.u), "tilde"

    raise StepsizeError(f"unsupported schedule variant '{variant}'")


def _tracked_roots(state: StepState, u: int) -> Tuple[float, float]:
    if state.prev is None:
        return math.nan, math.nan
    a_prev = state.prev.moments[u] / state.prev.moments[u + 1]
    a_cur = state.moments[u] / state.moments[u + 1]
    coupling = state.moments[u] / (a_prev ** 2 * state.prev.moments[u])
    return step_tilde_general(1.0 / a_prev, 1.0 / a_cur, -math.sqrt(coupling))


def run(
    problem: QuadraticProblem,
    schedule: Schedule,
    config: SolverConfig,
    x0: Vector,
    run_id: str = "-",
) -> IterateTrace:
    """
    Iterate until ||g_k|| <= epsilon ||g_0|| or k = max_iter.

    The gradient is updated by g_{k+1} = g_k - alpha_k A g_k, so each
    iteration costs one application of A. Numerical breakdown ends the run
    with status numerical_failure instead of raising.
    """
    eigen = config.trace_level == "eigen"
    if eigen and not problem.is_diagonal:
        raise ValueError("eigencomponent traces need a diagonal problem")

    x = np.array(x0, dtype=np.float64)
    _, g = evaluate(problem, x)
    g0norm = float(np.linalg.norm(g))
    threshold = config.epsilon * g0norm

    order = _moment_order(schedule)
    u_track = _tilde_exponent(schedule)
    if config.track_tilde:
        order = max(order, u_track + 1)

    trace = IterateTrace(schedule=schedule.label)
    if config.track_tilde:
        trace.tilde, trace.bar = [], []
    if eigen:
        trace.mu, trace.log_mu, trace.sign_mu = [], [], []
        with np.errstate(divide="ignore"):
            log_mu, sign_mu = np.log(np.abs(g)), np.sign(g)

    Ag = problem.apply(g)
    state = StepState(g=g, Ag=Ag, moments=compute_moments(problem, g, Ag, order))
    lam = problem.spectrum
    bb2_history: Tuple[float, ...] = ()

    logger.info(f"Starting {schedule.label} n={problem.n} eps={config.epsilon!r} [run_id: {run_id}]")

    k = 0
    while True:
        gnorm = math.sqrt(state.gg)
        trace.record(k, problem.energy_gap(state.g), gnorm)
        if config.track_tilde:
            try:
                small, large = _tracked_roots(state, u_track)
            except (StepsizeError, ZeroDivisionError, ValueError):
                small, large = math.nan, math.nan
            trace.tilde.append(small)
            trace.bar.append(large)
        if eigen:
            trace.mu.append(state.g.copy())
            trace.log_mu.append(log_mu.copy())
            trace.sign_mu.append(sign_mu.copy())

        if gnorm <= threshold:
            trace.status = CONVERGED
            break
        if k >= config.max_iter:
            trace.status = ITER_CAP
            break

        try:
            if schedule.warm_start and k == 0:
                alpha, tag = initial_alpha(problem, state.g, config.alpha0_rule), "alpha0"
            else:
                j = k - 1 if schedule.warm_start else k
                alpha, tag = schedule_next_alpha(schedule, j, state)
        except (StepsizeError, ZeroDivisionError) as e:
            logger.warning(f"Stepsize breakdown at k={k}: {e} [run_id: {run_id}]")
            trace.status = NUMERICAL_FAILURE
            break
        trace.set_step(alpha, tag)

        s = -alpha * state.g
        y = -alpha * state.Ag
        g_new = state.g + y
        if not (math.isfinite(alpha) and np.all(np.isfinite(g_new))):
            logger.warning(f"Non-finite iterate at k={k} [run_id: {run_id}]")
            trace.status = NUMERICAL_FAILURE
            break
        x += s

        if eigen:
            factor = 1.0 - alpha * lam
            with np.errstate(divide="ignore"):
                log_mu = log_mu + np.log(np.abs(factor))
            sign_mu = sign_mu * np.sign(factor)

        if schedule.variant == "abbmin2":
            bb2 = float(np.dot(s, y) / np.dot(y, y))
            bb2_history = (bb2_history + (bb2,))[-(schedule.memory + 1):]

        prev = PreviousStep(g=state.g, moments=state.moments, alpha=alpha, s=s, y=y)
        Ag_new = problem.apply(g_new)
        state = StepState(
            g=g_new, Ag=Ag_new, moments=compute_moments(problem, g_new, Ag_new, order),
            prev=prev, bb2_history=bb2_history,
        )
        k += 1

    trace.iterations = k
    trace.x = x
    if config.trace_level == "summary":
        trace.keep_last()
    logger.info(
        f"Finished {schedule.label}: status={trace.status} iterations={k} [run_id: {run_id}]"
    )
    return trace


def finite_termination_2d(lam: float, n_starts: int, rng: np.random.Generator) -> Tuple[float, float]:
    """
    Mean ||g_3|| and mean f(x_3) of MG, tilde(Psi=A), MG on diag{1, lam}, b=0,
    from n_starts random points in [-1, 1]^2.
    """
    if not lam > 1:
        raise ValueError(f"lambda must exceed 1, got {lam}")
    problem = make_diagonal([1.0, float(lam)], [0.0, 0.0])
    schedule = parse_schedule("alt:mg")
    config = SolverConfig(epsilon=1e-300, max_iter=3, trace_level="summary")
    gnorms, values = [], []
    for _ in range(n_starts):
        trace = run(problem, schedule, config, rng.uniform(-1.0, 1.0, 2))
        gnorms.append(trace.final_gnorm)
        values.append(trace.final_f_gap)
    return float(np.mean(gnorms)), float(np.mean(values))
