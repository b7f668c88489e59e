"""
Psi function model: the positive weight function defining the stepsize family
alpha = g'Psi(A)g / g'Psi(A)Ag.
"""
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator


class PsiFunction(BaseModel):
    """Psi represented by its values on the spectrum, or by a closed form."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["monomial", "constant", "table"] = Field(..., description="Representation")
    u: int = Field(0, ge=0, description="Exponent for Psi(A)=A^u")
    constant: float = Field(1.0, gt=0, description="Value for constant Psi")
    table: Tuple[Tuple[float, float], ...] = Field((), description="(lambda_i, Psi(lambda_i)) pairs")

    @model_validator(mode="after")
    def _check_table(self) -> "PsiFunction":
        if self.kind == "table":
            if not self.table:
                raise ValueError("table Psi needs at least one (lambda, value) pair")
            for lam, value in self.table:
                if not (np.isfinite(value) and value > 0):
                    raise ValueError(f"Psi must be positive and finite, got {value} at {lam}")
        return self

    @classmethod
    def monomial(cls, u: int) -> "PsiFunction":
        return cls(kind="monomial", u=u)

    @classmethod
    def constant_fn(cls, value: float = 1.0) -> "PsiFunction":
        return cls(kind="constant", constant=value)

    @classmethod
    def from_table(cls, lambdas: Sequence[float], values: Sequence[float]) -> "PsiFunction":
        if len(lambdas) != len(values):
            raise ValueError("lambdas and values must have the same length")
        return cls(kind="table", table=tuple((float(l), float(v)) for l, v in zip(lambdas, values)))

    @property
    def label(self) -> str:
        if self.kind == "monomial":
            return {0: "I", 1: "A"}.get(self.u, f"A^{self.u}")
        if self.kind == "constant":
            return f"{self.constant!r}I"
        return "table"

    def evaluate(self, lam: float) -> float:
        """Psi at one eigenvalue."""
        return float(self.values(np.array([lam], dtype=float))[0])

    def values(self, spectrum: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Psi(lambda_i) for every entry of the spectrum."""
        lam = np.asarray(spectrum, dtype=float)
        if self.kind == "monomial":
            return lam ** self.u
        if self.kind == "constant":
            return np.full_like(lam, self.constant)
        keys = np.array([k for k, _ in self.table])
        vals = np.array([v for _, v in self.table])
        out = np.empty_like(lam)
        for i, target in enumerate(lam):
            hits = np.flatnonzero(np.isclose(keys, target, rtol=1e-12, atol=0.0))
            if hits.size == 0:
                raise ValueError(f"Psi table has no value for lambda={target!r}")
            out[i] = vals[hits[0]]
        return out

    def matrix_exponent(self, t: float) -> Optional[int]:
        """Integer p with Psi(A)^t = scale * A^p, or None when not representable."""
        if self.kind == "constant":
            return 0
        if self.kind == "monomial":
            p = t * self.u
            if abs(p - round(p)) < 1e-12:
                return int(round(p))
        return None

    def scale(self, t: float) -> float:
        """Scalar factor of Psi(A)^t for closed-form representations."""
        return self.constant ** t if self.kind == "constant" else 1.0
