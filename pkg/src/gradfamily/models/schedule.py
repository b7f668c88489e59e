"""
Schedule and solver configuration models.
A schedule says which stepsize rule each iteration uses; the string grammar
is the one accepted by the CLI and written to CSV columns.
"""
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator


class ScheduleParseError(ValueError):
    """Raised when a schedule string cannot be parsed."""
    pass


PlainRule = Literal["sd", "mg", "family", "bb1", "bb2", "yuan", "aopt"]
Variant = Literal["plain", "dy", "sdc", "abbmin2", "periodic", "alt", "hat"]

# rules whose first step needs a previous iterate
_HISTORY_RULES = {"bb1", "bb2", "yuan"}


class Schedule(BaseModel):
    """Tagged description of the stepsize used at each iteration."""
    model_config = ConfigDict(frozen=True)

    variant: Variant = Field(..., description="Schedule family")
    rule: Optional[PlainRule] = Field(None, description="Rule for plain schedules")
    u: int = Field(0, ge=0, description="Family exponent, Psi(A)=A^u")
    h: int = Field(8, ge=1, description="SD steps per cycle (sdc, hat)")
    s: int = Field(6, ge=1, description="Frozen short steps per cycle (sdc, hat)")
    tau: float = Field(0.9, gt=0, lt=1, description="ABBmin2 switching threshold")
    memory: int = Field(9, ge=1, description="ABBmin2 BB2 memory")
    bb_variant: Literal["bb1", "bb2"] = Field("bb1", description="BB rule of the periodic method")
    kb: int = Field(30, ge=1, description="BB steps per period")
    km: int = Field(15, ge=1, description="Family steps per period")
    ks: int = Field(15, ge=1, description="Frozen short steps per period")

    @property
    def warm_start(self) -> bool:
        """True when step 0 uses alpha_0 and the schedule index starts at k=1."""
        if self.variant in ("abbmin2", "periodic"):
            return True
        return self.variant == "plain" and self.rule in _HISTORY_RULES

    @property
    def monotone(self) -> bool:
        if self.variant in ("dy", "sdc", "alt", "hat"):
            return True
        return self.variant == "plain" and self.rule in ("sd", "mg", "family")

    @property
    def psi_token(self) -> str:
        return {0: "sd", 1: "mg"}.get(self.u, f"u{self.u}")

    @property
    def method_name(self) -> str:
        """Label without the periodic K parameters (grouping key in reports)."""
        if self.variant == "plain":
            return f"family:{self.u}" if self.rule == "family" else str(self.rule)
        if self.variant == "periodic":
            return f"alg1:{self.bb_variant}:{self.psi_token}"
        if self.variant == "alt":
            return f"alt:{self.psi_token}"
        return self.variant

    @property
    def params(self) -> str:
        """Parameters that distinguish variants in reports; Kb is reported on its own."""
        if self.variant == "periodic":
            return f"Km={self.km};Ks={self.ks}"
        if self.variant in ("sdc", "hat"):
            return f"h={self.h};s={self.s}"
        if self.variant == "abbmin2":
            return f"tau={self.tau!r};m={self.memory}"
        return ""

    @property
    def label(self) -> str:
        """Canonical schedule string; parse_schedule(label) == self."""
        if self.variant == "periodic":
            return f"{self.method_name}:{self.kb}:{self.km}:{self.ks}"
        if self.variant in ("sdc", "hat"):
            return f"{self.variant}:{self.h}:{self.s}"
        if self.variant == "abbmin2":
            return f"abbmin2:{self.tau!r}:{self.memory}"
        return self.method_name


class SolverConfig(BaseModel):
    """Stopping rule, iteration cap and trace detail of one solver run."""
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(1e-6, gt=0, lt=1, description="Relative gradient reduction tolerance")
    max_iter: int = Field(20000, ge=1, description="Iteration cap")
    trace_level: Literal["summary", "scalars", "eigen"] = Field("scalars", description="Trace detail")
    alpha0_rule: str = Field("exact-sd", description="Initial stepsize policy")
    track_tilde: bool = Field(False, description="Record the small and large finite-termination roots")

    @field_validator("alpha0_rule")
    @classmethod
    def _check_alpha0(cls, value: str) -> str:
        if value == "exact-sd":
            return value
        if value.startswith("fixed:"):
            try:
                c = float(value.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"invalid fixed stepsize in '{value}'")
            if not c > 0:
                raise ValueError("fixed initial stepsize must be positive")
            return value
        raise ValueError(f"unknown alpha0 policy '{value}'")


def _int(token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ScheduleParseError(f"{what} must be an integer, got '{token}'")


def _psi_exponent(token: str) -> int:
    if token == "sd":
        return 0
    if token == "mg":
        return 1
    if token.startswith("u"):
        return _int(token[1:], "psi exponent")
    raise ScheduleParseError(f"unknown psi token '{token}' (expected sd, mg or u<int>)")


def parse_schedule(text: str) -> Schedule:
    """
    Parse a schedule string.

    Grammar: sd | mg | family:u | bb1 | bb2 | yuan | aopt | dy | sdc[:h:s]
    | abbmin2[:tau[:m]] | alg1:<bb1|bb2>:<psi>[:Kb:Km:Ks] | alt:<psi> | hat[:h:s]
    where psi is sd, mg or u<int>.

    Raises:
        ScheduleParseError: On unknown tokens or out-of-range parameters
    """
    parts = text.strip().lower().split(":")
    head, args = parts[0], parts[1:]
    try:
        if head in ("sd", "mg", "bb1", "bb2", "yuan", "aopt") and not args:
            u = {"sd": 0, "mg": 1}.get(head, 0)
            return Schedule(variant="plain", rule=head, u=u)
        if head == "family" and len(args) == 1:
            return Schedule(variant="plain", rule="family", u=_int(args[0], "family exponent"))
        if head == "dy" and not args:
            return Schedule(variant="dy")
        if head in ("sdc", "hat") and len(args) in (0, 2):
            if args:
                return Schedule(variant=head, h=_int(args[0], "h"), s=_int(args[1], "s"))
            return Schedule(variant=head)
        if head == "abbmin2" and len(args) <= 2:
            fields = {}
            if args:
                try:
                    fields["tau"] = float(args[0])
                except ValueError:
                    raise ScheduleParseError(f"tau must be a number, got '{args[0]}'")
            if len(args) == 2:
                fields["memory"] = _int(args[1], "memory")
            return Schedule(variant="abbmin2", **fields)
        if head == "alg1" and len(args) in (2, 5):
            if args[0] not in ("bb1", "bb2"):
                raise ScheduleParseError(f"unknown BB variant '{args[0]}'")
            fields = {"bb_variant": args[0], "u": _psi_exponent(args[1])}
            if len(args) == 5:
                fields.update(
                    kb=_int(args[2], "Kb"), km=_int(args[3], "Km"), ks=_int(args[4], "Ks")
                )
            return Schedule(variant="periodic", **fields)
        if head == "alt" and len(args) == 1:
            return Schedule(variant="alt", u=_psi_exponent(args[0]))
    except ValidationError as e:
        raise ScheduleParseError(f"invalid parameters in schedule '{text}': {e.errors()[0]['msg']}")
    raise ScheduleParseError(f"unknown schedule '{text}'")
