"""Request/response models for the solver service.

JSON has no literals for infinities or NaN, so boundary fields accept the
strings "inf"/"-inf" on input, and every float field that can carry a
non-finite value serializes as "inf"/"-inf"/null on output.
"""

from __future__ import annotations

import math
from typing import Annotated, Any, Literal

from pydantic import BaseModel, BeforeValidator, Field, PlainSerializer

_INF_STRINGS = {"inf", "+inf", "infinity", "+infinity"}
_NEG_INF_STRINGS = {"-inf", "-infinity"}


def _parse_extended_float(value: Any) -> Any:
    if isinstance(value, str):
        token = value.strip().lower()
        if token in _INF_STRINGS:
            return math.inf
        if token in _NEG_INF_STRINGS:
            return -math.inf
        raise ValueError(f"expected a number or 'inf'/'-inf', got {value!r}")
    if isinstance(value, float) and math.isnan(value):
        raise ValueError("NaN is not an accepted input value")
    return value


def _serialize_extended_float(value: float | None) -> Any:
    if value is None:
        return None
    if math.isnan(value):
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


ExtendedFloat = Annotated[
    float,
    BeforeValidator(_parse_extended_float),
    PlainSerializer(_serialize_extended_float, return_type=Any, when_used="json"),
]


class MarketModel(BaseModel):
    """Black-Scholes market parameters."""

    r: float = Field(description="continuously compounded money-market rate")
    mu: float = Field(description="stock drift under the physical measure")
    sigma: float = Field(gt=0, description="stock volatility")
    s0: float = Field(gt=0, description="initial stock price")
    T: float = Field(gt=0, description="investment horizon in years")


class ProblemModel(BaseModel):
    """Static problem: corridor, initial capital, CVaR level, return target."""

    x_d: float = Field(description="lower payoff bound")
    x_u: ExtendedFloat = Field(description="upper payoff bound; number or 'inf'")
    x_0: float = Field(description="initial capital")
    lam: float = Field(gt=0, lt=1, description="CVaR tail level in (0, 1)")
    z: float | None = Field(default=None, description="expected-return target")


class SolveRequest(BaseModel):
    market: MarketModel
    problem: ProblemModel
    eps: float | None = Field(
        default=None,
        gt=0,
        description="optional gap for an explicit ε-suboptimal payoff in nonexistence cases",
    )


class FrontierRequest(BaseModel):
    market: MarketModel
    problem: ProblemModel
    z_grid: list[float] | None = Field(
        default=None, description="explicit return targets; default is a uniform grid"
    )
    n_points: int = Field(default=101, ge=2, description="size of the default grid")


class SimulateModel(BaseModel):
    n_paths: int = Field(gt=0)
    n_steps: int = Field(gt=0)
    seed: int = Field(description="explicit seed; simulations never self-seed")


class HedgeRequest(BaseModel):
    market: MarketModel
    problem: ProblemModel
    eps: float | None = Field(
        default=None,
        gt=0,
        description="hedge the ε-suboptimal payoff instead when no optimum exists",
    )
    simulate: SimulateModel | None = None


class ValidateRequest(BaseModel):
    market: MarketModel
    problem: ProblemModel
    n: int = Field(default=4096, ge=2, description="number of discretization atoms")
    rel_tol: float = Field(default=0.005, gt=0, description="relative gap tolerance")


class ConfigModel(BaseModel):
    """Wire form of a payoff configuration."""

    kind: Literal["constant", "two_line_low_mid", "two_line_mid_up", "two_line_low_up", "three_line"]
    a: ExtendedFloat | None = None
    b: ExtendedFloat | None = None
    low: ExtendedFloat | None = None
    mid: ExtendedFloat | None = None
    up: ExtendedFloat | None = None
    level: ExtendedFloat | None = None


class DiagnosticsModel(BaseModel):
    a_bar: ExtendedFloat | None = None
    z_bar: ExtendedFloat | None = None
    a_star: ExtendedFloat | None = None
    x_star: ExtendedFloat | None = None
    z_star: ExtendedFloat | None = None
    x_z1: ExtendedFloat | None = None
    x_z2: ExtendedFloat | None = None


class ResidualsModel(BaseModel):
    """Constraint residuals of the reported payoff: capital is an equality
    (should be ~0), return is a slack (should be >= ~0)."""

    capital: float
    return_slack: float


class SolveResponse(BaseModel):
    case: str
    cvar: float
    config: ConfigModel | None = None
    diagnostics: DiagnosticsModel
    residuals: ResidualsModel | None = None
    note: str | None = None
    epsilon_config: ConfigModel | None = None
    epsilon_cvar: float | None = None


class FrontierPointModel(BaseModel):
    z: float
    cvar: ExtendedFloat
    case: str
    x: ExtendedFloat | None = None
    a: ExtendedFloat | None = None
    b: ExtendedFloat | None = None


class FrontierResponse(BaseModel):
    points: list[FrontierPointModel]
    csv: str


class SimResultModel(BaseModel):
    n_paths: int
    n_steps: int
    terminal_abs_error_mean: float
    terminal_abs_error_median: float
    terminal_abs_error_p99: float
    empirical_cvar: float
    empirical_mean: float
    empirical_cvar_se: float
    rng_name: str


class HedgeResponse(BaseModel):
    case: str
    config: ConfigModel
    initial_wealth: float
    price_threshold_a: ExtendedFloat | None = None
    price_threshold_b: ExtendedFloat | None = None
    simulation: SimResultModel | None = None


class ValidateResponse(BaseModel):
    n: int
    case: str
    analytic_cvar: float
    lp_cvar: float
    abs_gap: float
    rel_gap: float
    rel_tol: float
    passed: bool
    lp_plateaus: int
    lp_strays: int


class HealthResponse(BaseModel):
    status: str
    version: str
