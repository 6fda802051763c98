"""Data models describing penalty functions."""
import math
from enum import Enum
from typing import Annotated, Any, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from twinreg.config import get_settings
from twinreg.utils import kernels


class PenaltyKind(str, Enum):
    """Supported penalty families."""
    TWIN_A = "twin-a"
    TWIN_B = "twin-b"
    LASSO = "lasso"
    MCP = "mcp"
    SCAD = "scad"


KERNEL_CODES = {
    PenaltyKind.LASSO.value: kernels.LASSO,
    PenaltyKind.MCP.value: kernels.MCP,
    PenaltyKind.SCAD.value: kernels.SCAD,
    PenaltyKind.TWIN_A.value: kernels.TWIN_A,
    PenaltyKind.TWIN_B.value: kernels.TWIN_B,
}


class _PenaltyBase(BaseModel):
    """Fields shared by every penalty."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(..., gt=0, alias="lambda", description="Penalty level")

    @property
    def is_twin(self) -> bool:
        return self.kind in (PenaltyKind.TWIN_A.value, PenaltyKind.TWIN_B.value)

    def kernel_args(self) -> Tuple[int, float, float, float, float]:
        """Positional ``(kind, lam, tau, h, shape)`` for the compiled kernels."""
        raise NotImplementedError

    def with_lambda(self, lam: float) -> "PenaltySpec":
        """Copy of this spec at a different penalty level."""
        return self.model_copy(update={"lam": float(lam)})

    def scaled(self, factor: float) -> "PenaltySpec":
        """Copy with every length-like parameter (lambda, tau) multiplied by ``factor``."""
        raise NotImplementedError

    def label(self) -> str:
        return self.kind


class TwinAParams(_PenaltyBase):
    """TWIN-a: quadratic rise to the peak at tau, reciprocal decay beyond 4/3 tau."""
    kind: Literal["twin-a"] = "twin-a"
    tau: float = Field(..., gt=0, description="Peak location, in coefficient units")

    @property
    def c(self) -> float:
        return self.tau / 2.0

    @property
    def d1(self) -> float:
        return kernels.TWIN_A_D

    @property
    def m1(self) -> float:
        return kernels.TWIN_A_M

    def kernel_args(self) -> Tuple[int, float, float, float, float]:
        return kernels.TWIN_A, self.lam, self.tau, 0.5, 0.0

    def scaled(self, factor: float) -> "TwinAParams":
        return self.model_copy(update={"lam": self.lam * factor, "tau": self.tau * factor})

    def label(self) -> str:
        return f"twin-a[tau={self.tau:g}]"


class TwinBParams(_PenaltyBase):
    """TWIN-b: like TWIN-a up to the knee, then a quadratic descent onto a flat plateau."""
    kind: Literal["twin-b"] = "twin-b"
    tau: float = Field(..., gt=0, description="Peak location, in coefficient units")
    h: float = Field(default=0.5, gt=0, lt=1, description="Plateau height as a fraction of the peak")

    @property
    def c(self) -> float:
        return self.tau / 2.0

    @property
    def d2(self) -> float:
        return (1.0 + math.sqrt(2.0 * (1.0 - self.h))) * self.tau

    @property
    def m2(self) -> float:
        return 1.0 + math.sqrt((1.0 - self.h) / 2.0)

    def kernel_args(self) -> Tuple[int, float, float, float, float]:
        return kernels.TWIN_B, self.lam, self.tau, self.h, 0.0

    def scaled(self, factor: float) -> "TwinBParams":
        return self.model_copy(update={"lam": self.lam * factor, "tau": self.tau * factor})

    def label(self) -> str:
        return f"twin-b[tau={self.tau:g}]"


class ComparatorParams(_PenaltyBase):
    """Lasso, MCP or SCAD. ``shape`` is gamma for MCP and a for SCAD."""
    kind: Literal["lasso", "mcp", "scad"]
    shape: Optional[float] = Field(
        default=None,
        gt=0,
        description="MCP gamma (default 1.4) or SCAD a (default 3.7); unused for the Lasso",
    )

    @model_validator(mode="before")
    @classmethod
    def _default_shape(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("shape") is None:
            settings = get_settings()
            kind = data.get("kind")
            if kind == PenaltyKind.MCP.value:
                data = {**data, "shape": settings.MCP_GAMMA}
            elif kind == PenaltyKind.SCAD.value:
                data = {**data, "shape": settings.SCAD_A}
        return data

    @model_validator(mode="after")
    def _check_shape(self) -> "ComparatorParams":
        if self.kind == PenaltyKind.MCP.value and not self.shape > 1:
            raise ValueError(f"MCP gamma must exceed 1, got {self.shape}")
        if self.kind == PenaltyKind.SCAD.value and not self.shape > 2:
            raise ValueError(f"SCAD a must exceed 2, got {self.shape}")
        return self

    def kernel_args(self) -> Tuple[int, float, float, float, float]:
        return KERNEL_CODES[self.kind], self.lam, 1.0, 0.5, float(self.shape or 0.0)

    def scaled(self, factor: float) -> "ComparatorParams":
        return self.model_copy(update={"lam": self.lam * factor})


PenaltySpec = Annotated[
    Union[TwinAParams, TwinBParams, ComparatorParams],
    Field(discriminator="kind"),
]

_penalty_adapter: TypeAdapter = TypeAdapter(PenaltySpec)


def parse_penalty(data: Any) -> PenaltySpec:
    """Validate a mapping such as ``{"kind": "twin-b", "lambda": 1, "tau": 0.5}``."""
    return _penalty_adapter.validate_python(data)


class GammaRegion(BaseModel):
    """Where the penalty derivative vanishes (exactly or practically)."""
    model_config = ConfigDict(frozen=True)

    onset: float = Field(..., description="Exact zero-derivative onset; +inf when only reached in the limit")
    limit_only: bool = Field(..., description="True when the derivative reaches zero only asymptotically")
    practical_onset: float = Field(..., description="Point beyond which |P'| <= eps_derivative")
    eps_derivative: Optional[float] = Field(None, description="Derivative tolerance behind practical_onset")
