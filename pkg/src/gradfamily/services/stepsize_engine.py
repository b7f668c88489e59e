"""
Stepsize rules for gradient methods on quadratics.
Every rule is a pure function of a StepState snapshot.
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt

from gradfamily.core.logging import get_logger
from gradfamily.models.psi import PsiFunction
from gradfamily.services.quadratic_model import QuadraticProblem, apply_matrix_power

logger = get_logger("stepsize_engine")

Vector = npt.NDArray[np.float64]


class StepsizeError(Exception):
    """Raised when a stepsize cannot be computed."""
    pass


class MissingHistoryError(StepsizeError):
    """Raised when a rule needs a previous iterate that does not exist."""
    pass


class ZeroGradientError(StepsizeError):
    """Raised on a zero gradient; the iteration has converged."""
    pass


class PowerNotRepresentableError(StepsizeError):
    """Raised when Psi(A) powers cannot be applied on an implicit problem."""
    pass


@dataclass(frozen=True)
class PreviousStep:
    """Snapshot of iteration k-1."""
    g: Vector = field(repr=False)
    moments: Tuple[float, ...]
    alpha: float
    s: Vector = field(repr=False)
    y: Vector = field(repr=False)


@dataclass(frozen=True)
class StepState:
    """
    Solver state at iteration k.

    moments[j] holds g'A^j g; at least j = 0, 1, 2 are present
    (g'g, g'Ag and g'A^2g = (Ag)'(Ag) come free with Ag).
    """
    g: Vector = field(repr=False)
    Ag: Vector = field(repr=False)
    moments: Tuple[float, ...]
    prev: Optional[PreviousStep] = None
    bb2_history: Tuple[float, ...] = ()

    @property
    def gg(self) -> float:
        return self.moments[0]

    @property
    def gAg(self) -> float:
        return self.moments[1]

    @property
    def gA2g(self) -> float:
        return self.moments[2]

    def moment(self, j: int) -> float:
        if j >= len(self.moments):
            raise MissingHistoryError(f"moment g'A^{j}g was not computed")
        return self.moments[j]


def compute_moments(problem: QuadraticProblem, g: Vector, Ag: Vector, order: int = 2) -> Tuple[float, ...]:
    """
    g'A^j g for j = 0..max(order, 2).
    Uses A^i g for i up to ceil(order/2); orders above 2 cost extra matvecs.
    """
    order = max(order, 2)
    powers = [g, Ag]
    while len(powers) <= (order + 1) // 2:
        powers.append(problem.apply(powers[-1]))
    out = []
    for j in range(order + 1):
        i = j // 2
        out.append(float(np.dot(powers[i], powers[j - i])))
    return tuple(out)


def state_from_gradient(
    problem: QuadraticProblem,
    g: Vector,
    prev: Optional[PreviousStep] = None,
    order: int = 2,
) -> StepState:
    Ag = problem.apply(g)
    return StepState(g=g, Ag=Ag, moments=compute_moments(problem, g, Ag, order), prev=prev)


def _require_prev(state: StepState, what: str) -> PreviousStep:
    if state.prev is None:
        raise MissingHistoryError(f"{what} needs one prior step")
    return state.prev


def _family_from_moments(moments: Tuple[float, ...], u: int) -> float:
    if u + 1 >= len(moments):
        raise MissingHistoryError(f"family step u={u} needs moment g'A^{u + 1}g")
    if moments[0] == 0.0:
        raise ZeroGradientError("zero gradient: converged")
    return moments[u] / moments[u + 1]


def step_family(state: StepState, u: int) -> float:
    """
    alpha = g'A^u g / g'A^{u+1} g; u=0 is steepest descent, u=1 minimal gradient.

    Raises:
        ZeroGradientError: g = 0
        MissingHistoryError: Required moment was not computed
    """
    if u < 0:
        raise StepsizeError(f"family exponent must be nonnegative, got {u}")
    return _family_from_moments(state.moments, u)


def step_sd(state: StepState) -> float:
    return step_family(state, 0)


def step_mg(state: StepState) -> float:
    return step_family(state, 1)


def step_bb1(state: StepState) -> float:
    """BB1 = s's / s'y."""
    prev = _require_prev(state, "BB")
    return float(np.dot(prev.s, prev.s) / np.dot(prev.s, prev.y))


def step_bb2(state: StepState) -> float:
    """BB2 = s'y / y'y."""
    prev = _require_prev(state, "BB")
    return float(np.dot(prev.s, prev.y) / np.dot(prev.y, prev.y))


def step_aopt(state: StepState) -> float:
    """||g|| / ||Ag||."""
    if state.gg == 0.0:
        raise ZeroGradientError("zero gradient: converged")
    return math.sqrt(state.gg / state.gA2g)


def _tilde_from_pair(h11: float, h22: float, h12_sq: float) -> float:
    return 2.0 / (h11 + h22 + math.sqrt((h11 - h22) ** 2 + 4.0 * h12_sq))


def step_tilde_family(state: StepState, u: int) -> float:
    """
    Small root of the finite-termination equation for Psi(A) = A^u with r = 1/2,
    using only g'A^u g and g'A^{u+1} g of two consecutive gradients.
    u=0 gives Yuan's stepsize, u=1 the minimal-gradient variant.
    """
    prev = _require_prev(state, "tilde stepsize")
    a_prev = _family_from_moments(prev.moments, u)
    a_cur = _family_from_moments(state.moments, u)
    coupling = state.moment(u) / (a_prev ** 2 * prev.moments[u])
    return _tilde_from_pair(1.0 / a_prev, 1.0 / a_cur, coupling)


def step_yuan(state: StepState) -> float:
    """Yuan's stepsize from alpha^SD_{k-1}, alpha^SD_k, ||g_k|| and ||g_{k-1}||."""
    return step_tilde_family(state, 0)


def step_tilde_mg(state: StepState) -> float:
    """Minimal-gradient counterpart of Yuan's stepsize."""
    return step_tilde_family(state, 1)


def step_tilde_general(h11: float, h22: float, h12: float) -> Tuple[float, float]:
    """
    Reciprocal eigenvalues (alpha_small, alpha_large) of the SPD matrix [[h11, h12], [h12, h22]].

    Raises:
        StepsizeError: H is not SPD
    """
    det = h11 * h22 - h12 * h12
    if not (h11 > 0 and h22 > 0 and det > 0):
        raise StepsizeError(f"H is not SPD: h11={h11!r}, h22={h22!r}, h12={h12!r}")
    root = math.sqrt((h11 - h22) ** 2 + 4.0 * h12 * h12)
    small = 2.0 / (h11 + h22 + root)
    large = (h11 + h22 + root) / (2.0 * det)
    return small, large


def _quad_moment(problem: QuadraticProblem, v: Vector, p: int) -> float:
    half = p // 2
    left = apply_matrix_power(problem, v, half)
    right = apply_matrix_power(problem, left, p - half)
    return float(np.dot(left, right))


def build_H_k(
    state: StepState,
    psi: PsiFunction,
    r: float,
    problem: QuadraticProblem,
) -> Tuple[float, float, float]:
    """
    Entries (H11, H22, H12) of the 2x2 matrix whose reciprocal eigenvalues
    are the finite-termination stepsizes at iteration k.

    Diagonal problems use Psi's values on the spectrum for any r. Implicit
    problems need Psi(A)^{2r} and Psi(A)^{2(1-r)} to be integer powers of A.

    Raises:
        MissingHistoryError: No previous iterate
        PowerNotRepresentableError: Fractional power on an implicit problem
    """
    prev = _require_prev(state, "H matrix")
    g_old, g = prev.g, state.g

    if problem.is_diagonal:
        lam = problem.spectrum
        w = psi.values(lam)
        w_old = w ** (2.0 * r)
        w_cur = w ** (2.0 * (1.0 - r))
        old_sq, cur_sq = g_old * g_old, g * g
        alpha_old = float(np.sum(w * old_sq) / np.sum(w * lam * old_sq))
        n_old = float(np.sum(w_old * old_sq))
        n_cur = float(np.sum(w_cur * cur_sq))
        h11 = float(np.sum(w_old * lam * old_sq)) / n_old
        h22 = float(np.sum(w_cur * lam * cur_sq)) / n_cur
        h12 = -float(np.sum(w * cur_sq)) / (alpha_old * math.sqrt(n_old) * math.sqrt(n_cur))
        return h11, h22, h12

    p_old = psi.matrix_exponent(2.0 * r)
    p_cur = psi.matrix_exponent(2.0 * (1.0 - r))
    p_one = psi.matrix_exponent(1.0)
    if p_old is None or p_cur is None or p_one is None:
        raise PowerNotRepresentableError(
            f"Psi={psi.label} with r={r} needs fractional powers of an implicit A; "
            "use step_yuan or step_tilde_mg instead"
        )
    # Psi(A)^t = scale(t) * A^p
    s_old, s_cur, s_one = psi.scale(2.0 * r), psi.scale(2.0 * (1.0 - r)), psi.scale(1.0)
    alpha_old = _quad_moment(problem, g_old, p_one) / _quad_moment(problem, g_old, p_one + 1)
    n_old = s_old * _quad_moment(problem, g_old, p_old)
    n_cur = s_cur * _quad_moment(problem, g, p_cur)
    h11 = s_old * _quad_moment(problem, g_old, p_old + 1) / n_old
    h22 = s_cur * _quad_moment(problem, g, p_cur + 1) / n_cur
    h12 = -s_one * _quad_moment(problem, g, p_one) / (alpha_old * math.sqrt(n_old) * math.sqrt(n_cur))
    return h11, h22, h12


def step_hat(alpha_even: float, alpha_odd: float) -> float:
    """(1/alpha_even + 1/alpha_odd)^{-1}."""
    if not (alpha_even > 0 and alpha_odd > 0):
        raise StepsizeError(f"hat stepsize needs positive inputs, got {alpha_even!r}, {alpha_odd!r}")
    return 1.0 / (1.0 / alpha_even + 1.0 / alpha_odd)
