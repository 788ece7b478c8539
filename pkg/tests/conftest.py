"""Shared fixtures: the benchmark market and its reference problem instances.

The benchmark market (r=0.05, μ=0.2, σ=0.1, S0=10, T=2, x0=10, x_d=0,
λ=0.05) has θ = 1.5 and m = θ√T ≈ 2.1213; its reference solutions are used
across the unit suites and pinned precisely in the acceptance gate.
"""

from __future__ import annotations

import math

import pytest

from meancvar import MarketParams, MeanCVaRSolver, ProblemSpec

BASE_MARKET = dict(r=0.05, mu=0.2, sigma=0.1, s0=10.0, T=2.0)
BASE_PROBLEM = dict(x_d=0.0, x_0=10.0, lam=0.05)


def make_market(**overrides) -> MarketParams:
    params = {**BASE_MARKET, **overrides}
    return MarketParams(**params)


def make_spec(x_u: float, z: float | None, **overrides) -> ProblemSpec:
    params = {**BASE_PROBLEM, **overrides}
    return ProblemSpec(x_u=x_u, z=z, **params)


def make_solver(x_u: float, z: float | None, **overrides) -> MeanCVaRSolver:
    return MeanCVaRSolver(make_market(), make_spec(x_u, z, **overrides))


@pytest.fixture(scope="session")
def market() -> MarketParams:
    return make_market()


@pytest.fixture(scope="session")
def solver_30_20() -> MeanCVaRSolver:
    return make_solver(30.0, 20.0)


@pytest.fixture(scope="session")
def solver_30_25() -> MeanCVaRSolver:
    return make_solver(30.0, 25.0)


@pytest.fixture(scope="session")
def solver_50_25() -> MeanCVaRSolver:
    return make_solver(50.0, 25.0)


@pytest.fixture(scope="session")
def solver_unbounded_25() -> MeanCVaRSolver:
    return make_solver(math.inf, 25.0)


@pytest.fixture()
def run_config_dict() -> dict:
    """A run-config document for the CLI and service, benchmark (x_u=30, z=20)."""
    return {
        "market": dict(BASE_MARKET),
        "problem": {"x_d": 0.0, "x_u": 30.0, "x_0": 10.0, "lam": 0.05, "z": 20.0},
    }


# One line per acceptance criterion, echoed after the run regardless of
# capture settings so the verdicts always appear in the terminal output.
ACCEPTANCE_REPORT: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)
