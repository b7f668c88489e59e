"""
Benchmark grid model.
"""
from typing import List, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from gradfamily.models.schedule import parse_schedule


DEFAULT_METHODS = [
    "bb1", "dy", "sdc:8:6", "abbmin2",
    "alg1:bb1:sd", "alg1:bb2:sd", "alg1:bb1:mg", "alg1:bb2:mg",
]
DEFAULT_KM_KS = [(km, ks) for km in (9, 13, 15) for ks in (9, 13, 15)]


class GridSpec(BaseModel):
    """Instance grid and method list of a benchmark run."""
    model_config = ConfigDict(frozen=True)

    sets: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5, 6, 7], min_length=1)
    kappas: List[float] = Field(default_factory=lambda: [1e4, 1e5, 1e6], min_length=1)
    epsilons: List[float] = Field(default_factory=lambda: [1e-6, 1e-9, 1e-12], min_length=1)
    replicates: int = Field(10, ge=1, description="Instances per (set, kappa, epsilon)")
    n: int = Field(1000, ge=2, description="Problem dimension")
    base_seed: int = Field(0, ge=0, lt=2**64)
    methods: List[str] = Field(default_factory=lambda: list(DEFAULT_METHODS), min_length=1)
    km_ks: List[Tuple[int, int]] = Field(default_factory=lambda: list(DEFAULT_KM_KS), min_length=1)
    kb_policy: Union[int, str] = Field("per-set", description="'per-set' or a fixed Kb")
    b_range: Tuple[float, float] = (-10.0, 10.0)
    max_iter: int = Field(20000, ge=1)
    workers: int = Field(1, ge=1)

    @field_validator("sets")
    @classmethod
    def _check_sets(cls, value: List[int]) -> List[int]:
        bad = [s for s in value if s not in range(1, 8)]
        if bad:
            raise ValueError(f"spectrum sets must be in 1..7, got {bad}")
        return value

    @field_validator("kappas")
    @classmethod
    def _check_kappas(cls, value: List[float]) -> List[float]:
        if any(not k > 1 for k in value):
            raise ValueError("every kappa must exceed 1")
        return value

    @field_validator("epsilons")
    @classmethod
    def _check_epsilons(cls, value: List[float]) -> List[float]:
        if any(not 0 < e < 1 for e in value):
            raise ValueError("every epsilon must lie in (0, 1)")
        return value

    @field_validator("methods")
    @classmethod
    def _check_methods(cls, value: List[str]) -> List[str]:
        for text in value:
            parse_schedule(text)
        return value

    @field_validator("km_ks")
    @classmethod
    def _check_pairs(cls, value: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
        if any(km < 1 or ks < 1 for km, ks in value):
            raise ValueError("Km and Ks must be at least 1")
        return value

    @field_validator("kb_policy")
    @classmethod
    def _check_kb(cls, value: Union[int, str]) -> Union[int, str]:
        if isinstance(value, str) and value != "per-set":
            try:
                value = int(value)
            except ValueError:
                raise ValueError("kb_policy must be 'per-set' or a positive integer")
        if isinstance(value, int) and value < 1:
            raise ValueError("kb_policy must be at least 1")
        return value

    def kb_for(self, set_id: int) -> int:
        """Kb used on a spectrum set: 100 for sets 1 and 5, 30 elsewhere, unless fixed."""
        if self.kb_policy == "per-set":
            return 100 if set_id in (1, 5) else 30
        return int(self.kb_policy)
