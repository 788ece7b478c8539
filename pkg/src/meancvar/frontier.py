"""Mean-CVaR efficient frontier sweeps.

A frontier is a grid of return targets z with the optimal CVaR at each
target.  The map z ↦ CVaR*(z) is flat at the one-constraint optimum for
z ≤ z* and strictly increasing on (z*, z̄]; infeasible targets (z > z̄) are
kept as markers with a NaN value so a sweep never aborts mid-grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .configurations import (
    ConstantPayoff,
    PayoffConfig,
    ProblemSpec,
    ThreeLine,
    TwoLineLowMid,
    TwoLineLowUp,
    TwoLineMidUp,
)
from .market import MarketParams
from .static_solver import CaseLabel, MeanCVaRSolver

_csv_header = ("z", "cvar", "case", "x", "a", "b")


@dataclass(frozen=True)
class FrontierPoint:
    """One frontier entry: target, optimal value, case, and config geometry."""

    z: float
    cvar: float
    case_label: CaseLabel
    x: float | None = None
    a: float | None = None
    b: float | None = None


def _geometry(config: PayoffConfig | None) -> tuple[float | None, float | None, float | None]:
    if config is None:
        return None, None, None
    if isinstance(config, ConstantPayoff):
        return config.level, None, None
    if isinstance(config, TwoLineLowMid):
        return config.mid, config.a, None
    if isinstance(config, TwoLineMidUp):
        return config.mid, None, config.b
    if isinstance(config, TwoLineLowUp):
        return None, config.a, config.a
    if isinstance(config, ThreeLine):
        return config.mid, config.a, config.b
    raise TypeError(f"unknown config {type(config).__name__}")


def default_grid(market: MarketParams, spec: ProblemSpec, n_points: int = 101) -> np.ndarray:
    """Uniform grid of return targets from x_r to z̄ (requires finite x_u)."""
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    solver = MeanCVaRSolver(market, replace(spec, z=None))
    z_bar = solver.solve_bar().z_bar
    if math.isinf(z_bar):
        raise ValueError(
            "no finite z_bar with x_u = inf; supply an explicit grid of return targets"
        )
    return np.linspace(solver.x_r, z_bar, n_points)


def sweep(
    market: MarketParams,
    spec: ProblemSpec,
    z_grid=None,
    n_points: int = 101,
) -> list[FrontierPoint]:
    """Compute frontier points for each target in ascending order.

    The z field of ``spec`` is ignored; targets come from ``z_grid`` (or the
    default uniform grid).  Consecutive Double-Star solves reuse the previous
    mid-level root as a warm-start bracket.  Infeasible targets produce
    markers with cvar = NaN; nonexistence cases carry their finite infimum.
    """
    if z_grid is None:
        z_grid = default_grid(market, spec, n_points)
    targets = np.sort(np.asarray(z_grid, dtype=float))
    if targets.size == 0:
        raise ValueError("empty return-target grid")
    solver = MeanCVaRSolver(market, replace(spec, z=None))
    bar = solver.solve_bar()
    degenerate = solver.rnd.degenerate
    star = None if degenerate else solver.solve_star()

    points: list[FrontierPoint] = []
    prev_x: float | None = None
    prev_width = None
    for z in targets:
        z_eff = max(float(z), solver.x_r)
        if z_eff > bar.z_bar:
            points.append(
                FrontierPoint(z=float(z), cvar=math.nan, case_label=CaseLabel.INFEASIBLE_RETURN_TARGET)
            )
            continue
        if degenerate:
            points.append(
                FrontierPoint(
                    z=float(z),
                    cvar=-solver.x_r,
                    case_label=CaseLabel.MONEY_MARKET_OPTIMAL,
                    x=solver.x_r,
                )
            )
            continue
        assert star is not None
        if z_eff <= star.z_star:
            label = CaseLabel.BAR_OPTIMAL if star.bar_dominant else CaseLabel.STAR_OPTIMAL
            x, a, b = _geometry(star.config)
            points.append(FrontierPoint(z=float(z), cvar=star.cvar, case_label=label, x=x, a=a, b=b))
            continue
        if math.isinf(spec.x_u):
            points.append(
                FrontierPoint(
                    z=float(z),
                    cvar=star.cvar,
                    case_label=CaseLabel.NONEXISTENT_AT_STAR_LEVEL,
                )
            )
            continue
        hint = None
        if prev_x is not None:
            width = prev_width if prev_width is not None else 1.0
            hint = (prev_x - width, prev_x + width)
        ds = solver.solve_double_star(z_eff, x_bracket=hint)
        x, a, b = _geometry(ds.config)
        if ds.x is not None:
            if prev_x is not None:
                prev_width = max(4.0 * abs(ds.x - prev_x), 1e-6)
            prev_x = ds.x
        label = CaseLabel.BAR_OPTIMAL if ds.x is None else CaseLabel.DOUBLE_STAR_OPTIMAL
        points.append(
            FrontierPoint(z=float(z), cvar=ds.cvar, case_label=label, x=x, a=a, b=b)
        )
    return points


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    if math.isnan(value):
        return "nan"
    return f"{value:.12g}"


def to_csv(points: list[FrontierPoint]) -> str:
    """Render frontier points as CSV with columns z,cvar,case,x,a,b."""
    lines = [",".join(_csv_header)]
    for pt in points:
        lines.append(
            ",".join(
                (
                    _fmt(pt.z),
                    _fmt(pt.cvar),
                    pt.case_label.value,
                    _fmt(pt.x),
                    _fmt(pt.a),
                    _fmt(pt.b),
                )
            )
        )
    return "\n".join(lines) + "\n"
