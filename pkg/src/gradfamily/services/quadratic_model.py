"""
Quadratic test problems f(x) = 1/2 x'Ax - b'x with a known spectrum.

A is stored as its eigenvalues plus, optionally, three Householder vectors
w1, w2, w3 with A = Q diag(spectrum) Q' and Q = (I-2w3w3')(I-2w2w2')(I-2w1w1').
A is never formed densely outside of materialize().
"""
import hashlib
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from gradfamily.core.logging import get_logger
from gradfamily.models.problem import SpectrumSpec

logger = get_logger("quadratic_model")

Vector = npt.NDArray[np.float64]

RNG_NAME = "numpy.PCG64"
DENSE_LIMIT = 50
LOWER_BLOCK = (1.0, 100.0)


class ProblemConstructionError(Exception):
    """Raised when a quadratic problem cannot be built."""
    pass


def _freeze(arr: npt.ArrayLike) -> Vector:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


def _reflect(w: Vector, v: Vector) -> Vector:
    return v - 2.0 * w * np.dot(w, v)


@dataclass(frozen=True)
class QuadraticProblem:
    """SPD quadratic with cached minimizer and optimal value."""
    spectrum: Vector
    b: Vector
    x_star: Vector = field(repr=False)
    f_star: float
    rotation: Optional[npt.NDArray[np.float64]] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return int(self.spectrum.shape[0])

    @property
    def is_diagonal(self) -> bool:
        return self.rotation is None

    @property
    def kappa(self) -> float:
        return float(self.spectrum[-1] / self.spectrum[0])

    def to_eigenbasis(self, v: Vector) -> Vector:
        """Q'v."""
        if self.rotation is None:
            return np.asarray(v, dtype=np.float64)
        out = np.asarray(v, dtype=np.float64)
        for w in self.rotation[::-1]:
            out = _reflect(w, out)
        return out

    def from_eigenbasis(self, y: Vector) -> Vector:
        """Qy."""
        if self.rotation is None:
            return np.asarray(y, dtype=np.float64)
        out = np.asarray(y, dtype=np.float64)
        for w in self.rotation:
            out = _reflect(w, out)
        return out

    def apply(self, v: Vector) -> Vector:
        """A v."""
        if self.rotation is None:
            return self.spectrum * v
        return self.from_eigenbasis(self.spectrum * self.to_eigenbasis(v))

    def apply_inverse(self, v: Vector) -> Vector:
        """A^{-1} v."""
        if self.rotation is None:
            return v / self.spectrum
        return self.from_eigenbasis(self.to_eigenbasis(v) / self.spectrum)

    def energy_gap(self, g: Vector) -> float:
        """f(x) - f* from the gradient, 1/2 g'A^{-1}g, free of cancellation."""
        return 0.5 * float(np.dot(g, self.apply_inverse(g)))

    def fingerprint(self) -> str:
        """Stable hash identifying the problem data."""
        digest = hashlib.blake2b(digest_size=8)
        digest.update(self.spectrum.tobytes())
        digest.update(self.b.tobytes())
        if self.rotation is not None:
            digest.update(self.rotation.tobytes())
        return digest.hexdigest()

    def materialize(self) -> npt.NDArray[np.float64]:
        """Dense A, for small problems only."""
        if self.n > DENSE_LIMIT:
            raise ProblemConstructionError(
                f"refusing to materialize A with n={self.n} > {DENSE_LIMIT}"
            )
        eye = np.eye(self.n)
        return np.column_stack([self.apply(eye[:, j]) for j in range(self.n)])


def _build(
    spectrum: npt.ArrayLike,
    b: npt.ArrayLike,
    rotation: Optional[npt.ArrayLike] = None,
) -> QuadraticProblem:
    lam = np.asarray(spectrum, dtype=np.float64)
    rhs = np.asarray(b, dtype=np.float64)
    if lam.ndim != 1 or lam.size == 0:
        raise ProblemConstructionError("spectrum must be a nonempty vector")
    if rhs.shape != lam.shape:
        raise ProblemConstructionError(
            f"b has length {rhs.size}, spectrum has length {lam.size}"
        )
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        raise ProblemConstructionError("all eigenvalues must be positive and finite")
    if np.any(np.diff(lam) < 0):
        raise ProblemConstructionError("spectrum must be sorted ascending")

    w = None
    if rotation is not None:
        w = np.asarray(rotation, dtype=np.float64)
        if w.shape != (3, lam.size):
            raise ProblemConstructionError(f"rotation must have shape (3, {lam.size})")
        norms = np.linalg.norm(w, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ProblemConstructionError(f"rotation vectors must have unit norm, got {norms}")

    draft = QuadraticProblem(
        spectrum=_freeze(lam), b=_freeze(rhs), x_star=_freeze(np.zeros_like(lam)),
        f_star=0.0, rotation=None if w is None else _freeze(w),
    )
    x_star = draft.apply_inverse(rhs)
    f_star = -0.5 * float(np.dot(rhs, x_star))

    residual = np.linalg.norm(draft.apply(x_star) - rhs)
    if residual > 1e-8 * np.linalg.norm(rhs):
        raise ProblemConstructionError(f"minimizer residual {residual:.3e} too large")

    return QuadraticProblem(
        spectrum=draft.spectrum, b=draft.b, x_star=_freeze(x_star),
        f_star=f_star, rotation=draft.rotation,
    )


def make_diagonal(spectrum: Sequence[float], b: Sequence[float]) -> QuadraticProblem:
    """
    Diagonal problem A = diag(spectrum).

    Raises:
        ProblemConstructionError: Nonpositive eigenvalue or length mismatch
    """
    return _build(spectrum, b)


def random_unit_vectors(rng: np.random.Generator, n: int, count: int = 3) -> npt.NDArray[np.float64]:
    """Rows of normalized standard-normal draws."""
    w = rng.standard_normal((count, n))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def _open_uniform(rng: np.random.Generator, lo: float, hi: float, size: int) -> Vector:
    values = rng.uniform(lo, hi, size)
    bad = values <= lo
    while np.any(bad):
        values[bad] = rng.uniform(lo, hi, int(bad.sum()))
        bad = values <= lo
    return values


def _set_blocks(set_id: int, n: int, kappa: float) -> list:
    """1-based inclusive index blocks (first, last, lo, hi) of the interior eigenvalues."""
    lo = LOWER_BLOCK
    hi = (kappa / 2.0, kappa)
    if set_id == 1:
        return [(2, n - 1, 1.0, kappa)]
    if set_id == 2:
        return [(2, n // 5, *lo), (n // 5 + 1, n - 1, *hi)]
    if set_id == 3:
        return [(2, n // 2, *lo), (n // 2 + 1, n - 1, *hi)]
    if set_id == 4:
        return [(2, 4 * n // 5, *lo), (4 * n // 5 + 1, n - 1, *hi)]
    if set_id == 5:
        return [
            (2, n // 5, *lo),
            (n // 5 + 1, 4 * n // 5, LOWER_BLOCK[1], kappa / 2.0),
            (4 * n // 5 + 1, n - 1, *hi),
        ]
    if set_id == 6:
        return [(2, 10, *lo), (11, n - 1, *hi)]
    if set_id == 7:
        return [(2, n - 10, *lo), (n - 9, n - 1, *hi)]
    raise ProblemConstructionError(f"unknown spectrum set {set_id}")


def set_spectrum(set_id: int, n: int, kappa: float, rng: np.random.Generator) -> Vector:
    """
    Eigenvalues 1 = v_1 < ... < v_n = kappa with interior values drawn
    uniformly on the open per-set intervals, sorted ascending.

    Raises:
        ProblemConstructionError: Unknown set, kappa <= 1, or n too small for the set's blocks
    """
    if not kappa > 1:
        raise ProblemConstructionError(f"kappa must exceed 1, got {kappa}")
    blocks = _set_blocks(set_id, n, kappa)
    for first, last, lo, hi in blocks:
        if last < first:
            raise ProblemConstructionError(
                f"n={n} too small for set {set_id}: empty index block {first}..{last}"
            )
        if not lo < hi:
            raise ProblemConstructionError(
                f"kappa={kappa} too small for set {set_id}: empty interval ({lo}, {hi})"
            )

    for _ in range(100):
        interior = np.concatenate(
            [_open_uniform(rng, lo, hi, last - first + 1) for first, last, lo, hi in blocks]
        )
        values = np.sort(np.concatenate(([1.0], interior, [kappa])))
        if np.unique(values).size == n:
            return values
    raise ProblemConstructionError("could not draw distinct eigenvalues")


def special_spectrum(
    name: str,
    n: int,
    rng: Optional[np.random.Generator] = None,
    kappa: Optional[float] = None,
) -> Vector:
    """
    Named spectra: "isqrt" (i*sqrt(i)), "uniform1n" (1, uniform interior, n),
    "twodim" ((1, kappa), n must be 2).

    Raises:
        ProblemConstructionError: Unknown name or missing parameters
    """
    if n < 1:
        raise ProblemConstructionError(f"n must be positive, got {n}")
    if name == "isqrt":
        i = np.arange(1, n + 1, dtype=np.float64)
        return i * np.sqrt(i)
    if name == "uniform1n":
        if n < 2:
            raise ProblemConstructionError("uniform1n needs n >= 2")
        if rng is None:
            raise ProblemConstructionError("uniform1n needs a random generator")
        interior = _open_uniform(rng, 1.0, float(n), n - 2)
        return np.sort(np.concatenate(([1.0], interior, [float(n)])))
    if name == "twodim":
        if n != 2 or kappa is None or not kappa >= 1:
            raise ProblemConstructionError("twodim needs n=2 and kappa >= 1")
        return np.array([1.0, float(kappa)])
    raise ProblemConstructionError(f"unknown special spectrum '{name}'")


def spectrum_for(spec: SpectrumSpec, rng: np.random.Generator) -> Vector:
    if spec.set_id is not None:
        return set_spectrum(spec.set_id, spec.n, float(spec.kappa), rng)
    return special_spectrum(str(spec.named), spec.n, rng=rng, kappa=spec.kappa)


def make_problem(
    spec: SpectrumSpec,
    b_range: Optional[Tuple[float, float]] = (-10.0, 10.0),
    representation: str = "rotated",
    rotation: Optional[npt.ArrayLike] = None,
) -> QuadraticProblem:
    """
    Problem generated from a spec: spectrum, then b, then the Householder
    vectors are drawn from one PCG64 stream seeded by spec.seed, so the
    diagonal and rotated representations share spectrum and b.
    b_range=None gives b = 0.
    """
    if representation not in ("rotated", "diagonal"):
        raise ProblemConstructionError(f"unknown representation '{representation}'")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    lam = spectrum_for(spec, rng)
    if b_range is None:
        b = np.zeros(spec.n)
    else:
        b = rng.uniform(b_range[0], b_range[1], spec.n)
    if representation == "diagonal":
        return _build(lam, b)
    w = random_unit_vectors(rng, spec.n) if rotation is None else rotation
    problem = _build(lam, b, w)
    logger.debug(f"Built rotated problem {spec.label} n={spec.n} hash={problem.fingerprint()}")
    return problem


def make_rotated(
    spec: SpectrumSpec,
    b_range: Optional[Tuple[float, float]] = (-10.0, 10.0),
    rotation: Optional[npt.ArrayLike] = None,
) -> QuadraticProblem:
    """A = QVQ' problem; rotation overrides the random Householder vectors."""
    return make_problem(spec, b_range, representation="rotated", rotation=rotation)


def evaluate(problem: QuadraticProblem, x: Vector) -> Tuple[float, Vector]:
    """f(x) and g = Ax - b with one application of A."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != problem.b.shape:
        raise ValueError(f"x has shape {x.shape}, expected {problem.b.shape}")
    ax = problem.apply(x)
    g = ax - problem.b
    f = 0.5 * float(np.dot(x, ax)) - float(np.dot(problem.b, x))
    return f, g


def apply_matrix_power(problem: QuadraticProblem, v: Vector, p: int) -> Vector:
    """A^p v by repeated application; p=0 returns v."""
    if p < 0:
        raise ValueError(f"power must be nonnegative, got {p}")
    out = np.asarray(v, dtype=np.float64)
    for _ in range(p):
        out = problem.apply(out)
    return out


def derive_seed(base_seed: int, set_id: int, kappa: float, epsilon: float, replicate: int) -> int:
    """Per-instance 64-bit seed from the grid key."""
    key = f"{base_seed}|{set_id}|{kappa!r}|{epsilon!r}|{replicate}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
