"""
Asymptotic behaviour of the family of gradient methods.

The normalized squared eigencomponents q_k of the gradient evolve on the
probability simplex under (Tq)_i = (lambda_i - gamma(q))^2 q_i / sum(...).
Orbits settle into a two-cycle on the extreme eigenvalues; this module finds
it, predicts the stepsize limits and contraction rates from its constant c,
and estimates c from solver traces.
"""
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd

from gradfamily.core.logging import get_logger
from gradfamily.models.psi import PsiFunction
from gradfamily.services.solver import IterateTrace

logger = get_logger("asymptotics")

SimplexWeights = npt.NDArray[np.float64]

SIMPLEX_TOL = 1e-12
STABLE_STEPS = 5
EXCLUSION_TOL = 1e-14


class DynamicsError(Exception):
    """Raised when the simplex dynamics cannot be evaluated."""
    pass


class TransformUndefinedError(DynamicsError):
    """Raised when T is applied to a single-support vector."""
    pass


class CycleNotReachedError(DynamicsError):
    """Raised when an orbit does not settle within the step budget."""
    pass


class ComponentVanishedError(DynamicsError):
    """Raised when an extreme eigencomponent underflows to zero."""
    pass


@dataclass(frozen=True)
class TwoCycle:
    """Two-point-support pair p* <-> Tp* with T^2 p* = p*."""
    i1: int
    i2: int
    p_star: SimplexWeights
    Tp_star: SimplexWeights
    c: float
    gamma_pair: Tuple[float, float]
    q_even: Optional[SimplexWeights] = None
    q_odd: Optional[SimplexWeights] = None


@dataclass(frozen=True)
class RatePrediction:
    """Limits of the odd/even objective and squared-gradient ratios."""
    r_f1: float
    r_f2: float
    r_g1: float
    r_g2: float
    product: float


@dataclass(frozen=True)
class CEstimate:
    c: float
    c_odd: float
    discrepancy: float
    sign_consistent: bool


@dataclass(frozen=True)
class CBound:
    """Interval [lower, upper] for c^2."""
    lower: float
    upper: float
    sigma: float
    phi_sigma: float
    eta_sigma: float


def _as_simplex(p: npt.ArrayLike) -> SimplexWeights:
    q = np.asarray(p, dtype=np.float64)
    if q.ndim != 1 or np.any(q < 0):
        raise DynamicsError("weights must be a nonnegative vector")
    return q


def simplex_from_mu(mu: npt.ArrayLike) -> SimplexWeights:
    """q_i = mu_i^2 / ||mu||^2."""
    sq = np.asarray(mu, dtype=np.float64) ** 2
    total = sq.sum()
    if total == 0:
        raise DynamicsError("all eigencomponents are zero")
    return sq / total


def simplex_from_log_mu(log_mu: npt.ArrayLike) -> SimplexWeights:
    """q from log|mu|, stable when mu itself has underflowed."""
    logs = 2.0 * np.asarray(log_mu, dtype=np.float64)
    top = np.max(logs)
    if not np.isfinite(top):
        raise DynamicsError("all eigencomponents are zero")
    w = np.exp(logs - top)
    return w / w.sum()


def gamma(p: npt.ArrayLike, psi: PsiFunction, spectrum: npt.ArrayLike) -> float:
    """Psi-weighted mean of the spectrum under p; the reciprocal stepsize."""
    q = _as_simplex(p)
    lam = np.asarray(spectrum, dtype=np.float64)
    w = psi.values(lam) * q
    total = w.sum()
    if total == 0:
        raise DynamicsError("gamma undefined for all-zero weights")
    return float(np.dot(w, lam) / total)


def theta(p: npt.ArrayLike, psi: PsiFunction, spectrum: npt.ArrayLike) -> float:
    """Psi-weighted variance of the spectrum about gamma(p)."""
    q = _as_simplex(p)
    lam = np.asarray(spectrum, dtype=np.float64)
    g = gamma(q, psi, lam)
    w = psi.values(lam) * q
    return float(np.dot(w, (lam - g) ** 2) / w.sum())


def apply_T(p: npt.ArrayLike, psi: PsiFunction, spectrum: npt.ArrayLike) -> SimplexWeights:
    """
    One step of the simplex map.

    Raises:
        TransformUndefinedError: Fewer than two positive weights
    """
    q = _as_simplex(p)
    if np.count_nonzero(q > 0) < 2:
        raise TransformUndefinedError("T undefined: gradient would vanish")
    lam = np.asarray(spectrum, dtype=np.float64)
    v = (lam - gamma(q, psi, lam)) ** 2 * q
    return v / v.sum()


def _two_point(n: int, i1: int, i2: int, a: float, b: float) -> SimplexWeights:
    out = np.zeros(n)
    out[i1], out[i2] = a, b
    return out


def two_cycle_from_c(
    i1: int,
    i2: int,
    c: float,
    psi: PsiFunction,
    spectrum: npt.ArrayLike,
) -> TwoCycle:
    """
    Two-cycle on indices (i1, i2) with limit constant c:
    p* = (1, c^2)/(1+c^2) and Tp* = (c^2 Psi2^2, Psi1^2)/(Psi1^2 + c^2 Psi2^2).
    """
    lam = np.asarray(spectrum, dtype=np.float64)
    if not 0 <= i1 < i2 < lam.size:
        raise DynamicsError(f"need 0 <= i1 < i2 < n, got {i1}, {i2}")
    if lam[i1] == lam[i2]:
        raise DynamicsError("two-cycle needs distinct eigenvalues")
    if c == 0:
        raise DynamicsError("c must be nonzero")
    psi1, psi2 = psi.evaluate(lam[i1]), psi.evaluate(lam[i2])
    c2 = c * c
    p = _two_point(lam.size, i1, i2, 1.0 / (1.0 + c2), c2 / (1.0 + c2))
    d = psi1 ** 2 + c2 * psi2 ** 2
    tp = _two_point(lam.size, i1, i2, c2 * psi2 ** 2 / d, psi1 ** 2 / d)
    return TwoCycle(
        i1=i1, i2=i2, p_star=p, Tp_star=tp, c=c,
        gamma_pair=(gamma(p, psi, lam), gamma(tp, psi, lam)),
    )


def two_cycle_fixed_point(i1: int, i2: int, psi: PsiFunction, spectrum: npt.ArrayLike) -> TwoCycle:
    """The two-cycle with Tp* = p*: p*_{i1} = Psi(lambda_i2)/(Psi(lambda_i1)+Psi(lambda_i2))."""
    lam = np.asarray(spectrum, dtype=np.float64)
    if not 0 <= i1 < i2 < lam.size:
        raise DynamicsError(f"need 0 <= i1 < i2 < n, got {i1}, {i2}")
    c = math.sqrt(psi.evaluate(lam[i1]) / psi.evaluate(lam[i2]))
    return two_cycle_from_c(i1, i2, c, psi, lam)


def iterate_to_cycle(
    q0: npt.ArrayLike,
    psi: PsiFunction,
    spectrum: npt.ArrayLike,
    max_k: int = 100000,
    tol: float = 1e-12,
) -> Tuple[TwoCycle, int]:
    """
    Run T from q0 until the even subsequence is stable, i.e.
    ||q_{2k+2} - q_{2k}||_inf < tol for STABLE_STEPS consecutive even steps.

    Returns the two-cycle fitted to the even limit and the first even k of
    the stable stretch.

    Raises:
        DynamicsError: q0 misses an extreme eigencomponent, or the limit is not supported on {1, n}
        CycleNotReachedError: No stable stretch within max_k steps
    """
    lam = np.asarray(spectrum, dtype=np.float64)
    q = _as_simplex(q0)
    if abs(q.sum() - 1.0) > SIMPLEX_TOL:
        raise DynamicsError(f"q0 must sum to 1, got {q.sum()!r}")
    if not (q[0] > 0 and q[-1] > 0):
        raise DynamicsError("q0 needs positive weight on both extreme eigenvalues")

    stable, start, residual = 0, 0, math.inf
    k = 0
    while k + 2 <= max_k:
        q_odd = apply_T(q, psi, lam)
        q_next = apply_T(q_odd, psi, lam)
        residual = float(np.max(np.abs(q_next - q)))
        if residual < tol:
            if stable == 0:
                start = k
            stable += 1
            if stable >= STABLE_STEPS:
                break
        else:
            stable = 0
        q = q_next
        k += 2
    else:
        raise CycleNotReachedError(
            f"no two-cycle within {max_k} steps, final even residual {residual:.3e}"
        )

    i1, i2 = sorted(int(i) for i in np.argsort(q)[-2:])
    if (i1, i2) != (0, lam.size - 1):
        raise DynamicsError(f"limit supported on indices {i1 + 1}, {i2 + 1} instead of 1, n")
    c = math.sqrt(q[i2] / q[i1])
    cycle = two_cycle_from_c(i1, i2, c, psi, lam)
    logger.debug(f"Two-cycle reached at k={start}, c={c!r}")
    return TwoCycle(
        i1=cycle.i1, i2=cycle.i2, p_star=cycle.p_star, Tp_star=cycle.Tp_star, c=c,
        gamma_pair=cycle.gamma_pair, q_even=q, q_odd=apply_T(q, psi, lam),
    ), start


def predict_alpha_limits(c: float, psi: PsiFunction, lambda1: float, lambdan: float) -> Tuple[float, float]:
    """Limits of alpha_{2k} and alpha_{2k+1}; their reciprocals sum to lambda1 + lambdan."""
    psi1, psin = psi.evaluate(lambda1), psi.evaluate(lambdan)
    kappa = lambdan / lambda1
    c2 = c * c
    num = psi1 + c2 * psin
    even = num / (lambda1 * (psi1 + c2 * kappa * psin))
    odd = num / (lambda1 * (kappa * psi1 + c2 * psin))
    return even, odd


def predict_rates(c: float, kappa: float, psi_l1: float, psi_ln: float) -> RatePrediction:
    """
    r_f1 = lim D_{2k+1}/D_{2k}, r_f2 = lim D_{2k+2}/D_{2k+1} for the objective
    gap D, and r_g1, r_g2 likewise for ||g||^2.
    """
    c2 = c * c
    km1 = (kappa - 1.0) ** 2
    p1, pn = psi_l1, psi_ln
    even_den = (p1 + c2 * kappa * pn) ** 2
    odd_den = (c2 * pn + kappa * p1) ** 2
    r_f1 = c2 * km1 * (p1 ** 2 + c2 * kappa * pn ** 2) / (even_den * (c2 + kappa))
    r_f2 = c2 * km1 * (c2 + kappa) * p1 ** 2 * pn ** 2 / (odd_den * (p1 ** 2 + c2 * kappa * pn ** 2))
    r_g1 = c2 * km1 * (p1 ** 2 + c2 * pn ** 2) / ((1.0 + c2) * even_den)
    r_g2 = c2 * (1.0 + c2) * km1 * p1 ** 2 * pn ** 2 / (odd_den * (p1 ** 2 + c2 * pn ** 2))
    product = c2 * c2 * km1 * km1 * p1 ** 2 * pn ** 2 / (even_den * odd_den)
    return RatePrediction(r_f1=r_f1, r_f2=r_f2, r_g1=r_g1, r_g2=r_g2, product=product)


def worst_rate(kappa: float) -> float:
    """((kappa-1)/(kappa+1))^4, the upper bound on the rate product."""
    return ((kappa - 1.0) / (kappa + 1.0)) ** 4


def _tail_indices(trace: IterateTrace, parity: int, tail: int) -> np.ndarray:
    ks = np.asarray(trace.k)
    idx = np.flatnonzero(ks % 2 == parity)
    if idx.size < tail:
        raise DynamicsError(f"trace has {idx.size} iterates of parity {parity}, need {tail}")
    return idx[-tail:]


def estimate_c(
    trace: IterateTrace,
    psi: PsiFunction,
    spectrum: npt.ArrayLike,
    tail: int = 20,
) -> CEstimate:
    """
    c from the tail of an eigencomponent trace: mean of mu_n/mu_1 over even k,
    and -Psi1/Psin * mu_1/mu_n over odd k. Ratios are formed in the log domain.

    Raises:
        DynamicsError: Trace without eigencomponents or too short
        ComponentVanishedError: mu_1 or mu_n underflowed beyond recovery
    """
    if not trace.log_mu:
        raise DynamicsError("trace has no eigencomponents; run with trace_level='eigen'")
    lam = np.asarray(spectrum, dtype=np.float64)
    log_mu = np.vstack(trace.log_mu)
    sign_mu = np.vstack(trace.sign_mu)
    ends = log_mu[:, [0, -1]]
    even = _tail_indices(trace, 0, tail)
    odd = _tail_indices(trace, 1, tail)
    rows = np.concatenate([even, odd])
    if not np.all(np.isfinite(ends[rows])) or np.any(sign_mu[rows][:, [0, -1]] == 0):
        raise ComponentVanishedError("component vanished: mu_1 or mu_n is zero in the tail")

    ratio_even = sign_mu[even, -1] * sign_mu[even, 0] * np.exp(log_mu[even, -1] - log_mu[even, 0])
    ratio_odd = sign_mu[odd, 0] * sign_mu[odd, -1] * np.exp(log_mu[odd, 0] - log_mu[odd, -1])
    psi1, psin = psi.evaluate(lam[0]), psi.evaluate(lam[-1])

    c = float(np.mean(ratio_even))
    c_odd = float(-psi1 / psin * np.mean(ratio_odd))
    return CEstimate(
        c=c,
        c_odd=c_odd,
        discrepancy=abs(c - c_odd) / abs(c),
        sign_consistent=bool(np.all(np.sign(ratio_even) == np.sign(ratio_even[0]))),
    )


def observed_rates(trace: IterateTrace, tail: int = 20) -> RatePrediction:
    """
    Tail means of D_{2k+1}/D_{2k}, D_{2k+2}/D_{2k+1} and the same ratios of ||g||^2,
    over the last `tail` complete even-odd-even triples of the trace.
    """
    f = np.asarray(trace.f_gap, dtype=np.float64)
    g2 = np.asarray(trace.gnorm, dtype=np.float64) ** 2
    ks = np.asarray(trace.k)
    starts = [i for i in range(len(ks) - 2) if ks[i] % 2 == 0 and ks[i + 2] == ks[i] + 2]
    if len(starts) < tail:
        raise DynamicsError(f"trace has {len(starts)} even-odd-even triples, need {tail}")
    idx = np.asarray(starts[-tail:])
    with np.errstate(divide="ignore", invalid="ignore"):
        r_f1 = float(np.mean(f[idx + 1] / f[idx]))
        r_f2 = float(np.mean(f[idx + 2] / f[idx + 1]))
        r_g1 = float(np.mean(g2[idx + 1] / g2[idx]))
        r_g2 = float(np.mean(g2[idx + 2] / g2[idx + 1]))
    return RatePrediction(r_f1=r_f1, r_f2=r_f2, r_g1=r_g1, r_g2=r_g2, product=r_f1 * r_f2)


def minimum_deviation(spectrum: npt.ArrayLike, index_set: Sequence[int]) -> float:
    lam = np.asarray(spectrum, dtype=np.float64)
    mid, width = lam[0] + lam[-1], lam[-1] - lam[0]
    return float(min(abs(2.0 * lam[i] - mid) / width for i in index_set))


def c_bound(
    spectrum: npt.ArrayLike,
    psi: PsiFunction,
    q0_support: npt.ArrayLike,
    alphas: Optional[Sequence[float]] = None,
    exclusion: str = "reciprocal",
) -> CBound:
    """
    Bounds Psi1/Psin/phi <= c^2 <= Psi1/Psin*phi from the minimum deviation
    sigma of the interior eigenvalues present in q0.

    Index i is excluded when a traced stepsize annihilates it: with
    exclusion="reciprocal" when |1 - alpha_k lambda_i| <= 1e-14, with
    exclusion="literal" when lambda_i == alpha_k.

    Raises:
        DynamicsError: No interior eigenvalues remain
    """
    if exclusion not in ("reciprocal", "literal"):
        raise ValueError(f"unknown exclusion rule '{exclusion}'")
    lam = np.asarray(spectrum, dtype=np.float64)
    support = np.asarray(q0_support, dtype=np.float64) != 0
    steps = np.asarray(alphas if alphas is not None else [], dtype=np.float64)

    index_set = []
    for i in range(1, lam.size - 1):
        if not (lam[0] < lam[i] < lam[-1] and support[i]):
            continue
        if steps.size:
            if exclusion == "reciprocal" and np.any(np.abs(1.0 - steps * lam[i]) <= EXCLUSION_TOL):
                continue
            if exclusion == "literal" and np.any(steps == lam[i]):
                continue
        index_set.append(i)
    if not index_set:
        raise DynamicsError("no interior eigenvalues")

    sigma = minimum_deviation(lam, index_set)
    eta = 4.0 * (1.0 + sigma ** 2) / (1.0 - sigma ** 2)
    phi = (2.0 + eta + math.sqrt(eta ** 2 + 4.0 * eta)) / 2.0
    ratio = psi.evaluate(lam[0]) / psi.evaluate(lam[-1])
    return CBound(lower=ratio / phi, upper=ratio * phi, sigma=sigma, phi_sigma=phi, eta_sigma=eta)


def dynamics_frame(trace: IterateTrace, psi: PsiFunction, spectrum: npt.ArrayLike) -> pd.DataFrame:
    """Per-k simplex weights q_k with gamma(q_k) and theta(q_k) from an eigencomponent trace."""
    if not trace.log_mu:
        raise DynamicsError("trace has no eigencomponents; run with trace_level='eigen'")
    lam = np.asarray(spectrum, dtype=np.float64)
    rows = []
    for k, log_mu in zip(trace.k, trace.log_mu):
        q = simplex_from_log_mu(log_mu)
        row: Dict[str, float] = {"k": k, "gamma": gamma(q, psi, lam), "theta": theta(q, psi, lam)}
        for i, value in enumerate(q):
            row[f"q_{i + 1}"] = value
        rows.append(row)
    return pd.DataFrame(rows)
