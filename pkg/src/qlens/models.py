"""Pydantic models for qlens: parameters, configuration, invariants, reports, file formats."""
from typing import Any, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import InvalidInvariantError


class RepParams(BaseModel):
    """Deformation parameter, weight, character and truncation of the operator models."""
    model_config = ConfigDict(frozen=True)

    q: float = Field(0.5, gt=0.0, lt=1.0)
    l: int = Field(2, ge=1)
    lam: complex = 1 + 0j
    N: int = Field(64, ge=2)
    W: int = Field(16, ge=1)

    @field_validator("lam")
    @classmethod
    def unit_modulus(cls, v: complex) -> complex:
        if abs(abs(v) - 1.0) > 1e-12:
            raise ValueError(f"lambda must have modulus 1, got |{v}| = {abs(v)}")
        return v

    def replace(self, **changes: Any) -> "RepParams":
        """Validated copy with some fields changed."""
        return RepParams(**{**self.model_dump(), **changes})


class RunConfig(BaseModel):
    """Configuration of a CLI run; mirrors the JSON accepted by ``--config``."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    q: float = Field(0.5, gt=0.0, lt=1.0)
    l: int = Field(2, ge=1)
    N: int = Field(64, ge=8)
    W: int = Field(16, ge=4)
    tol: float = Field(1e-9, gt=0.0)
    margin: int = Field(8, ge=0)
    seed: int = 0
    samples: int = Field(100, ge=1)

    def rep_params(self, **changes: Any) -> RepParams:
        base = {"q": self.q, "l": self.l, "N": self.N, "W": self.W}
        return RepParams(**{**base, **changes})


class KInvariant(BaseModel):
    """Complete invariant (rho; t_1..t_l) of a projection over (K^l)^+."""
    model_config = ConfigDict(frozen=True)

    rho: int = Field(ge=0)
    t: tuple[int, ...]

    @model_validator(mode="after")
    def nonnegative_without_scalar_rank(self) -> "KInvariant":
        if self.rho == 0 and any(ts < 0 for ts in self.t):
            raise InvalidInvariantError(f"rho = 0 requires t >= 0, got t = {list(self.t)}")
        return self

    @property
    def l(self) -> int:
        return len(self.t)

    def n_m(self) -> tuple[list[int], list[int]]:
        """The representative parameters n_j = max(-t_j, 0), m_j = max(t_j, 0)."""
        return [max(-ts, 0) for ts in self.t], [max(ts, 0) for ts in self.t]

    def __add__(self, other: "KInvariant") -> "KInvariant":
        if self.l != other.l:
            raise ValueError("Invariants over different numbers of legs")
        return KInvariant(rho=self.rho + other.rho, t=tuple(a + b for a, b in zip(self.t, other.t)))

    def as_list(self) -> list[int]:
        return [self.rho, *self.t]


class ProjectionReport(BaseModel):
    """Result of verify_projection."""
    idempotency_defect: float
    selfadjoint_defect: float
    scalar_defect: float
    tol: float
    passed: bool


class IsoReport(BaseModel):
    """Result of verify_line_bundle_iso."""
    n: int
    l: int
    samples: int
    deviations: dict[str, float] = Field(default_factory=dict)
    max_deviation: float = 0.0
    tol: float
    passed: bool


class CheckResult(BaseModel):
    """One named check inside a suite."""
    name: str
    passed: bool
    max_deviation: float = 0.0
    samples: int = 0
    details: dict[str, Any] = Field(default_factory=dict)


class CheckReport(BaseModel):
    """Machine-readable outcome of a CLI subcommand."""
    command: str
    passed: bool
    config: RunConfig
    checks: list[CheckResult] = Field(default_factory=list)
    result: dict[str, Any] = Field(default_factory=dict)


# Projection file format

ComplexEntry = Union[float, tuple[float, float]]


class CompactLeg(BaseModel):
    """Compact part of one entry on leg s; rows and columns beyond those listed are zero."""
    leg: int = Field(ge=1)
    rows: list[list[ComplexEntry]] = Field(default_factory=list)


class ProjectionEntry(BaseModel):
    scalar: tuple[float, float] = (0.0, 0.0)
    compact: list[CompactLeg] = Field(default_factory=list)


class ProjectionFile(BaseModel):
    """JSON form of a matrix over the truncated unitization (K^l)^+."""
    l: int = Field(ge=1)
    N: int = Field(ge=1)
    r: int = Field(ge=1)
    entries: list[list[ProjectionEntry]]
    note: Optional[str] = None

    @model_validator(mode="after")
    def shapes_fit(self) -> "ProjectionFile":
        if len(self.entries) != self.r or any(len(row) != self.r for row in self.entries):
            raise ValueError(f"entries must be an {self.r}x{self.r} array")
        for row in self.entries:
            for entry in row:
                for leg in entry.compact:
                    if leg.leg > self.l:
                        raise ValueError(f"leg {leg.leg} exceeds l = {self.l}")
                    if len(leg.rows) > self.N or any(len(r) > self.N for r in leg.rows):
                        raise ValueError(f"compact block on leg {leg.leg} exceeds N = {self.N}")
        return self
