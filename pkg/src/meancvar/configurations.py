"""Candidate terminal payoffs and their closed-form risk/return functionals.

A candidate payoff is piecewise constant on threshold events of the
Radon-Nikodým derivative ρ:

    A = {ρ > a},   B = {b ≤ ρ ≤ a},   D = {ρ < b},

with the payoff taking its lowest value on A (expensive states), a middle
value on B and its highest value on D (cheap states).  The tagged union below
covers the Constant, Two-Line and Three-Line shapes; degenerate thresholds
(a = ∞ for an empty A, b = 0 for an empty D) are first-class values.

Levels are stored explicitly rather than implied by the problem bounds: the
ε-suboptimal constructions return payoffs whose middle and upper levels are
strictly inside / above the corridor [x_d, x_u].

Evaluation reduces every functional to a finite sum over (level, P, P̃)
triples.  CVaR at level λ uses the dual form

    CVaR_λ(X) = (1/λ) · inf_c ( E[(c − X)^+] − λ·c ),

whose objective is piecewise-linear convex in c with kinks exactly at the
payoff levels, so a scan over the finitely many kinks is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .market import MarketParams, RNDModel


@dataclass(frozen=True)
class ProblemSpec:
    """Static problem data: corridor bounds, initial capital, CVaR level, target.

    ``x_u`` may be ``math.inf`` (no upper bound).  ``z`` is the expected-return
    target; ``None`` selects the pure CVaR-minimization mode in which the
    return constraint is dropped.
    """

    x_d: float
    x_u: float
    x_0: float
    lam: float
    z: float | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.x_d):
            raise ValueError(f"x_d must be finite, got {self.x_d}")
        if not math.isfinite(self.x_0):
            raise ValueError(f"x_0 must be finite, got {self.x_0}")
        if math.isnan(self.x_u):
            raise ValueError("x_u must be a number or +inf, got nan")
        if not (0.0 < self.lam < 1.0):
            raise ValueError(f"lam must lie in (0, 1), got {self.lam}")
        if self.z is not None and not math.isfinite(self.z):
            raise ValueError(f"z must be finite when given, got {self.z}")

    def x_r(self, market: MarketParams) -> float:
        """Risk-free benchmark x_r = x_0·e^{rT}."""
        return market.grow(self.x_0)

    def validate(self, market: MarketParams) -> None:
        """Check the joint invariants x_d < x_0 ≤ x_r < x_u."""
        x_r = self.x_r(market)
        if not (self.x_d < self.x_0):
            raise ValueError(f"x_d must be < x_0: x_d={self.x_d}, x_0={self.x_0}")
        if not (self.x_0 <= x_r):
            raise ValueError(
                f"x_0 must be <= x_r = x_0*exp(r*T): x_0={self.x_0}, x_r={x_r} (r={market.r})"
            )
        if not (x_r < self.x_u):
            raise ValueError(f"x_u must be > x_r={x_r}: x_u={self.x_u}")


@dataclass(frozen=True)
class ConstantPayoff:
    """X ≡ level."""

    level: float


@dataclass(frozen=True)
class TwoLineLowMid:
    """X = low·1{ρ > a} + mid·1{ρ ≤ a}  (empty D; degenerate b = 0)."""

    a: float
    low: float
    mid: float

    def __post_init__(self) -> None:
        _check_threshold("a", self.a)
        _check_levels(low=self.low, mid=self.mid)


@dataclass(frozen=True)
class TwoLineMidUp:
    """X = mid·1{ρ ≥ b} + up·1{ρ < b}  (empty A; degenerate a = ∞)."""

    b: float
    mid: float
    up: float

    def __post_init__(self) -> None:
        _check_threshold("b", self.b)
        _check_levels(mid=self.mid, up=self.up)


@dataclass(frozen=True)
class TwoLineLowUp:
    """X = low·1{ρ > a} + up·1{ρ < a}  (empty B; the Bar-System shape)."""

    a: float
    low: float
    up: float

    def __post_init__(self) -> None:
        _check_threshold("a", self.a)
        _check_levels(low=self.low, up=self.up)


@dataclass(frozen=True)
class ThreeLine:
    """X = low·1{ρ > a} + mid·1{b ≤ ρ ≤ a} + up·1{ρ < b}."""

    a: float
    b: float
    low: float
    mid: float
    up: float

    def __post_init__(self) -> None:
        _check_threshold("a", self.a)
        _check_threshold("b", self.b)
        if not (self.b <= self.a):
            raise ValueError(f"need b <= a, got b={self.b}, a={self.a}")
        _check_levels(low=self.low, mid=self.mid, up=self.up)


PayoffConfig = Union[ConstantPayoff, TwoLineLowMid, TwoLineMidUp, TwoLineLowUp, ThreeLine]


def _check_threshold(name: str, value: float) -> None:
    if math.isnan(value) or value < 0:
        raise ValueError(f"threshold {name} must be >= 0, got {value}")


def _check_levels(**levels: float) -> None:
    order = [lv for lv in ("low", "mid", "up") if lv in levels]
    for name, value in levels.items():
        if math.isnan(value):
            raise ValueError(f"level {name} must not be nan")
    for lo, hi in zip(order, order[1:]):
        if not (levels[lo] <= levels[hi]):
            raise ValueError(
                f"levels must be ordered {lo} <= {hi}, got {levels[lo]} > {levels[hi]}"
            )


def validate_against(cfg: PayoffConfig, spec: ProblemSpec) -> None:
    """Check that a config's levels respect the corridor [x_d, x_u]."""
    tol = 1e-9 * max(1.0, abs(spec.x_d), min(abs(spec.x_u), 1e6))
    for name, level in _named_levels(cfg):
        if level < spec.x_d - tol:
            raise ValueError(f"level {name}={level} below x_d={spec.x_d}")
        if level > spec.x_u + tol:
            raise ValueError(f"level {name}={level} above x_u={spec.x_u}")


def _named_levels(cfg: PayoffConfig) -> list[tuple[str, float]]:
    if isinstance(cfg, ConstantPayoff):
        return [("level", cfg.level)]
    if isinstance(cfg, TwoLineLowMid):
        return [("low", cfg.low), ("mid", cfg.mid)]
    if isinstance(cfg, TwoLineMidUp):
        return [("mid", cfg.mid), ("up", cfg.up)]
    if isinstance(cfg, TwoLineLowUp):
        return [("low", cfg.low), ("up", cfg.up)]
    if isinstance(cfg, ThreeLine):
        return [("low", cfg.low), ("mid", cfg.mid), ("up", cfg.up)]
    raise TypeError(f"not a PayoffConfig: {cfg!r}")


def level_weights(rnd: RNDModel, cfg: PayoffConfig) -> list[tuple[float, float, float]]:
    """(level, P-weight, P̃-weight) triples for the payoff's level sets."""
    if isinstance(cfg, ConstantPayoff):
        return [(cfg.level, 1.0, 1.0)]
    if isinstance(cfg, TwoLineLowMid):
        pa, qa = rnd.prob_P_above(cfg.a), rnd.prob_Ptilde_above(cfg.a)
        return [(cfg.low, pa, qa), (cfg.mid, 1.0 - pa, 1.0 - qa)]
    if isinstance(cfg, TwoLineMidUp):
        pd, qd = rnd.prob_P_below(cfg.b), rnd.prob_Ptilde_below(cfg.b)
        return [(cfg.mid, 1.0 - pd, 1.0 - qd), (cfg.up, pd, qd)]
    if isinstance(cfg, TwoLineLowUp):
        pa, qa = rnd.prob_P_above(cfg.a), rnd.prob_Ptilde_above(cfg.a)
        return [(cfg.low, pa, qa), (cfg.up, 1.0 - pa, 1.0 - qa)]
    if isinstance(cfg, ThreeLine):
        pa, qa = rnd.prob_P_above(cfg.a), rnd.prob_Ptilde_above(cfg.a)
        pd, qd = rnd.prob_P_below(cfg.b), rnd.prob_Ptilde_below(cfg.b)
        return [
            (cfg.low, pa, qa),
            (cfg.mid, max(1.0 - pa - pd, 0.0), max(1.0 - qa - qd, 0.0)),
            (cfg.up, pd, qd),
        ]
    raise TypeError(f"not a PayoffConfig: {cfg!r}")


def expected_return(rnd: RNDModel, cfg: PayoffConfig) -> float:
    """E[X].  Returns +inf (flagged by value) if an infinite level carries mass."""
    total = 0.0
    for level, p, _ in level_weights(rnd, cfg):
        if p == 0.0:
            continue
        if math.isinf(level):
            return math.inf
        total += level * p
    return total


def capital(rnd: RNDModel, cfg: PayoffConfig) -> float:
    """Ẽ[X], the initial capital the payoff requires (undiscounted, at T)."""
    total = 0.0
    for level, _, pt in level_weights(rnd, cfg):
        if pt == 0.0:
            continue
        if math.isinf(level):
            return math.inf
        total += level * pt
    return total


def expected_shortfall(rnd: RNDModel, cfg: PayoffConfig, x: float) -> float:
    """E[(x − X)^+] over the payoff's finitely many levels."""
    return sum(max(x - level, 0.0) * p for level, p, _ in level_weights(rnd, cfg))


def cvar(rnd: RNDModel, cfg: PayoffConfig, lam: float) -> float:
    """CVaR_λ(X) by exact kink enumeration of the dual objective.

    The dual objective c ↦ E[(c − X)^+] − λc is piecewise-linear convex with
    kinks only at payoff levels; its slope left of the smallest level is −λ,
    so the minimum sits at the smallest level whose cumulative P-mass reaches
    λ.  Scanning all finite levels is therefore exact.  If more than 1 − λ of
    the mass sits at +∞ the infimum is −∞.
    """
    if not (0.0 < lam < 1.0):
        raise ValueError(f"lam must lie in (0, 1), got {lam}")
    triples = level_weights(rnd, cfg)
    finite = [(level, p) for level, p, _ in triples if math.isfinite(level)]
    finite_mass = sum(p for _, p in finite)
    if finite_mass < lam:
        return -math.inf
    best = math.inf
    for c, _ in finite:
        obj = sum(max(c - level, 0.0) * p for level, p in finite) - lam * c
        best = min(best, obj)
    return best / lam


def payoff_at_rho(cfg: PayoffConfig, rho: np.ndarray | float) -> np.ndarray:
    """Evaluate the payoff pointwise at realized values of ρ (vectorized).

    Boundary convention matches the event definitions: A = {ρ > a} strictly,
    D = {ρ < b} strictly, ties belong to the middle set.
    """
    rho = np.asarray(rho, dtype=float)
    if isinstance(cfg, ConstantPayoff):
        return np.full_like(rho, cfg.level)
    if isinstance(cfg, TwoLineLowMid):
        return np.where(rho > cfg.a, cfg.low, cfg.mid)
    if isinstance(cfg, TwoLineMidUp):
        return np.where(rho < cfg.b, cfg.up, cfg.mid)
    if isinstance(cfg, TwoLineLowUp):
        return np.where(rho > cfg.a, cfg.low, cfg.up)
    if isinstance(cfg, ThreeLine):
        return np.where(rho > cfg.a, cfg.low, np.where(rho < cfg.b, cfg.up, cfg.mid))
    raise TypeError(f"not a PayoffConfig: {cfg!r}")
