"""
Problem specification models.
These models describe how a quadratic test problem is generated.
"""
from typing import Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


SpecialName = Literal["isqrt", "uniform1n", "twodim"]


class SpectrumSpec(BaseModel):
    """Eigenvalue distribution of a generated problem: a numbered spectrum set or a named spectrum."""
    model_config = ConfigDict(frozen=True)

    set_id: Optional[int] = Field(None, ge=1, le=7, description="Numbered spectrum set")
    named: Optional[SpecialName] = Field(None, description="Named special spectrum")
    n: int = Field(..., ge=2, description="Problem dimension")
    kappa: Optional[float] = Field(None, gt=1, description="Condition number lambda_n/lambda_1")
    seed: int = Field(0, ge=0, lt=2**64, description="64-bit RNG seed")

    @model_validator(mode="after")
    def _check_family(self) -> "SpectrumSpec":
        if (self.set_id is None) == (self.named is None):
            raise ValueError("exactly one of set_id or named must be given")
        if self.set_id is not None and self.kappa is None:
            raise ValueError("kappa is required for numbered spectrum sets")
        if self.named == "twodim":
            if self.n != 2:
                raise ValueError("twodim spectrum needs n=2")
            if self.kappa is None:
                raise ValueError("twodim spectrum needs kappa (the second eigenvalue)")
        return self

    @property
    def label(self) -> str:
        if self.set_id is not None:
            return f"set{self.set_id}"
        return str(self.named)

    def to_metadata(self, b_range: Optional[Tuple[float, float]] = None) -> Dict[str, str]:
        """Flat key=value view used in CSV `#` metadata rows."""
        meta = {
            "set_id": str(self.set_id) if self.set_id is not None else self.label,
            "n": str(self.n),
            "kappa": repr(self.kappa) if self.kappa is not None else "",
            "seed": str(self.seed),
        }
        if b_range is not None:
            meta["b_range"] = f"{b_range[0]!r}:{b_range[1]!r}"
        return meta
