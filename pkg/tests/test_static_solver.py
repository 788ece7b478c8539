"""Threshold-system solver tests: residual contracts, dispatch, ε-construction.

Each solved system is checked against its defining equations (capital, return,
Euler) rather than against stored outputs, so these tests are independent of
the root-finding path.  Optimality itself is cross-checked by the LP oracle
in its own suite.
"""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meancvar import (
    BracketError,
    CaseLabel,
    ConstantPayoff,
    InfeasibleReturnError,
    MeanCVaRSolver,
    SolverContractError,
    ThreeLine,
    TwoLineLowMid,
    TwoLineLowUp,
    UsageError,
    capital,
    cvar,
    expected_return,
    two_line_epsilon_config,
)

from conftest import make_market, make_solver, make_spec


def _residuals(solver, config, z):
    rnd = solver.rnd
    cap = capital(rnd, config) - solver.x_r
    ret = expected_return(rnd, config) - z
    return cap, ret


# ----------------------------------------------------------------- Bar-System


def test_bar_system_residual_contract(solver_30_20):
    bar = solver_30_20.solve_bar()
    assert bar.config is not None
    resid = capital(solver_30_20.rnd, bar.config) - solver_30_20.x_r
    assert abs(resid) <= 1e-10 * (30.0 - 0.0)
    assert expected_return(solver_30_20.rnd, bar.config) == pytest.approx(bar.z_bar, abs=1e-10)


def test_bar_system_unbounded_and_degenerate():
    assert make_solver(math.inf, None).solve_bar().z_bar == math.inf
    degenerate = MeanCVaRSolver(make_market(mu=0.05), make_spec(30.0, None))
    assert degenerate.solve_bar().z_bar == pytest.approx(degenerate.x_r)
    assert degenerate.solve_bar().a_bar is None


# ---------------------------------------------------------------- Star-System


def test_star_system_euler_residual(solver_30_20):
    star = solver_30_20.solve_star()
    rnd = solver_30_20.rnd
    p_a = rnd.prob_P_above(star.a_star)
    q_a = rnd.prob_Ptilde_above(star.a_star)
    residual = p_a + (1.0 - q_a) / star.a_star - 0.05
    assert abs(residual) < 1e-12
    cap, ret = _residuals(solver_30_20, star.config, star.z_star)
    assert abs(cap) < 1e-10 and abs(ret) < 1e-10


def test_star_cvar_matches_dual_evaluation(solver_30_20):
    star = solver_30_20.solve_star()
    assert cvar(solver_30_20.rnd, star.config, 0.05) == pytest.approx(star.cvar, abs=1e-12)


def test_star_is_corridor_independent_when_interior():
    """With x* < x_u the Star-System does not depend on the cap."""
    s30, s_inf = make_solver(30.0, None), make_solver(math.inf, None)
    assert s30.solve_star().a_star == pytest.approx(s_inf.solve_star().a_star, rel=1e-12)
    assert s30.solve_star().cvar == pytest.approx(s_inf.solve_star().cvar, rel=1e-12)


def test_bar_dominant_when_cap_binds():
    """A tight cap forces the one-constraint optimum onto the Bar-System."""
    solver = make_solver(12.0, None)
    star = solver.solve_star()
    assert star.bar_dominant
    assert star.x_star >= 12.0
    assert isinstance(star.config, TwoLineLowUp)
    assert star.z_star == pytest.approx(solver.solve_bar().z_bar)
    solution = solver.solve_main()
    assert solution.case_label is CaseLabel.BAR_OPTIMAL


def test_star_requires_nondegenerate_model():
    solver = MeanCVaRSolver(make_market(mu=0.05), make_spec(30.0, None))
    with pytest.raises(UsageError):
        solver.solve_star()


# -------------------------------------------------------- degenerate two-lines


@pytest.mark.parametrize("z", [11.5, 15.0, 20.0, 25.0, 28.0])
def test_x_z_maps_meet_the_return_target(z):
    """x_z1/x_z2 configs satisfy both constraints to 1e-8·max(1,|z|)."""
    solver = make_solver(30.0, None)
    tol = 1e-8 * max(1.0, abs(z))
    x1 = solver.x_z1(z)
    _, config1 = solver.v_of_x(x1 - 1e-6, z)
    cap, ret = _residuals(solver, config1, z)
    assert abs(cap) < tol and abs(ret) < tol

    x2 = solver.x_z2(z)
    _, config2 = solver.v_of_x(x2, z)
    cap, ret = _residuals(solver, config2, z)
    assert abs(cap) < tol and abs(ret) < tol
    assert x1 < x2


def test_x_z_maps_are_monotone_in_z():
    solver = make_solver(30.0, None)
    zs = [11.1, 14.0, 18.0, 22.0, 26.0, 28.5]
    x1s = [solver.x_z1(z) for z in zs]
    x2s = [solver.x_z2(z) for z in zs]
    assert all(a > b for a, b in zip(x1s, x1s[1:]))  # decreasing
    assert all(a < b for a, b in zip(x2s, x2s[1:]))  # increasing


def test_x_z_endpoints():
    solver = make_solver(30.0, None)
    z_bar = solver.solve_bar().z_bar
    assert solver.x_z1(solver.x_r) == pytest.approx(solver.x_r)
    assert solver.x_z1(z_bar) == pytest.approx(0.0, abs=1e-9)
    assert solver.x_z2(z_bar) == pytest.approx(30.0, abs=1e-9)


# ------------------------------------------------------------------ Three-Line


@pytest.mark.parametrize("x", [12.0, 15.0, 19.12575571310381, 20.0])
def test_three_line_given_x_satisfies_both_constraints(x):
    solver = make_solver(30.0, None)
    z = 20.0
    a, b = solver.solve_three_line_given_x(x, z)
    a_bar = solver.solve_bar().a_bar
    assert b <= a_bar <= a
    config = ThreeLine(a=a, b=b, low=0.0, mid=x, up=30.0)
    cap, ret = _residuals(solver, config, z)
    scale = max(1.0, 30.0)
    assert abs(cap) <= 1e-10 * scale and abs(ret) <= 1e-10 * scale


def test_three_line_collapses_to_bar_at_z_bar(solver_30_20):
    z_bar = solver_30_20.solve_bar().z_bar
    a_bar = solver_30_20.solve_bar().a_bar
    a, b = solver_30_20.solve_three_line_given_x(15.0, z_bar)
    assert a == pytest.approx(a_bar, rel=1e-9)
    assert b == pytest.approx(a_bar, rel=1e-9)


def test_three_line_outside_interval_is_a_bracket_error():
    solver = make_solver(30.0, None)
    z = 20.0
    outside = solver.x_z2(z) + 0.5
    with pytest.raises(BracketError):
        solver.solve_three_line_given_x(outside, z)


def test_euler_residual_signs(solver_30_20):
    """Negative near x_z1 (slack tail), positive near x_z2 when z > z*."""
    z = 20.0
    x_lo = solver_30_20.x_z1(z)
    x_hi = solver_30_20.x_z2(z)
    width = x_hi - x_lo
    assert solver_30_20.euler_residual(x_lo + 1e-6 * width, z) < 0.0
    assert solver_30_20.euler_residual(x_hi - 1e-6 * width, z) > 0.0


# ----------------------------------------------------------- Double-Star System


def test_double_star_satisfies_all_three_conditions(solver_30_20):
    ds = solver_30_20.solve_double_star(20.0)
    assert isinstance(ds.config, ThreeLine)
    cap, ret = _residuals(solver_30_20, ds.config, 20.0)
    assert abs(cap) < 1e-9 and abs(ret) < 1e-9
    assert abs(solver_30_20.euler_residual(ds.x, 20.0)) < 1e-9
    assert cvar(solver_30_20.rnd, ds.config, 0.05) == pytest.approx(ds.cvar, abs=1e-10)


def test_double_star_collapse_at_z_bar(solver_30_20):
    z_bar = solver_30_20.solve_bar().z_bar
    ds = solver_30_20.solve_double_star(z_bar)
    assert isinstance(ds.config, TwoLineLowUp)
    assert ds.note is not None and "Bar" in ds.note
    assert ds.a == ds.b == solver_30_20.solve_bar().a_bar


def test_double_star_requires_binding_target(solver_30_20):
    z_star = solver_30_20.solve_star().z_star
    with pytest.raises(UsageError):
        solver_30_20.solve_double_star(z_star - 0.1)


def test_double_star_near_star_boundary(solver_30_20):
    """Just above z* the Double-Star system continues the Star solution."""
    star = solver_30_20.solve_star()
    ds = solver_30_20.solve_double_star(star.z_star + 1e-10)
    assert ds.cvar == pytest.approx(star.cvar, abs=1e-6)
    assert ds.x == pytest.approx(star.x_star, abs=1e-4)


def test_double_star_warm_bracket_agrees_with_cold(solver_30_20):
    cold = solver_30_20.solve_double_star(21.0)
    warm = solver_30_20.solve_double_star(21.0, x_bracket=(cold.x - 0.05, cold.x + 0.05))
    assert warm.x == pytest.approx(cold.x, abs=1e-9)
    assert warm.cvar == pytest.approx(cold.cvar, abs=1e-12)


# ------------------------------------------------------------------- dispatch


def test_dispatch_star_when_target_not_binding():
    solution = make_solver(30.0, 15.0).solve_main()
    assert solution.case_label is CaseLabel.STAR_OPTIMAL
    assert isinstance(solution.config, TwoLineLowMid)


def test_dispatch_double_star_when_binding(solver_30_20):
    solution = solver_30_20.solve_main()
    assert solution.case_label is CaseLabel.DOUBLE_STAR_OPTIMAL
    assert isinstance(solution.config, ThreeLine)
    assert solution.diagnostics.x_z1 is not None and solution.diagnostics.x_z2 is not None


def test_dispatch_z_below_x_r_routes_to_money_market_level():
    low_target = make_solver(30.0, 5.0).solve_main()
    no_target = make_solver(30.0, None).solve_main()
    assert low_target.case_label is no_target.case_label is CaseLabel.STAR_OPTIMAL
    assert low_target.cvar == no_target.cvar


def test_dispatch_exact_z_bar_collapses_to_bar_system():
    solver = make_solver(30.0, None)
    z_bar = solver.solve_bar().z_bar
    solution = MeanCVaRSolver(make_market(), make_spec(30.0, z_bar)).solve_main()
    assert solution.case_label is CaseLabel.BAR_OPTIMAL
    assert isinstance(solution.config, TwoLineLowUp)
    assert solution.note is not None


def test_dispatch_infeasible_is_an_error():
    solver = make_solver(30.0, 29.5)
    with pytest.raises(InfeasibleReturnError) as excinfo:
        solver.solve_main()
    assert excinfo.value.z_bar == pytest.approx(28.886568363647378, abs=1e-9)
    assert excinfo.value.case_label is CaseLabel.INFEASIBLE_RETURN_TARGET


def test_dispatch_nonexistent_with_unbounded_corridor(solver_unbounded_25):
    solution = solver_unbounded_25.solve_main()
    assert solution.case_label is CaseLabel.NONEXISTENT_AT_STAR_LEVEL
    assert solution.config is None
    assert math.isfinite(solution.cvar)
    assert solution.cvar == pytest.approx(solver_unbounded_25.solve_star().cvar)


def test_dispatch_degenerate_money_market():
    solver = MeanCVaRSolver(make_market(mu=0.05), make_spec(30.0, 10.0))
    solution = solver.solve_main()
    assert solution.case_label is CaseLabel.MONEY_MARKET_OPTIMAL
    assert isinstance(solution.config, ConstantPayoff)
    assert solution.cvar == pytest.approx(-solver.x_r)


def test_dispatch_degenerate_binding_target_is_infeasible():
    solver = MeanCVaRSolver(make_market(mu=0.05), make_spec(30.0, 12.0))
    with pytest.raises(InfeasibleReturnError):
        solver.solve_main()


# ---------------------------------------------------------------- step-1 value


def test_v_of_x_piecewise_ranges(solver_30_20):
    z = 20.0
    x_lo, x_hi = solver_30_20.x_z1(z), solver_30_20.x_z2(z)
    v0, _ = solver_30_20.v_of_x(x_lo - 1.0, z)
    assert v0 == 0.0
    v1, config1 = solver_30_20.v_of_x(0.5 * (x_lo + x_hi), z)
    assert v1 > 0.0 and isinstance(config1, ThreeLine)
    v2, config2 = solver_30_20.v_of_x(x_hi + 1.0, z)
    assert isinstance(config2, TwoLineLowMid)
    v3, config3 = solver_30_20.v_of_x(31.0, z)
    assert isinstance(config3, TwoLineLowUp)
    assert v0 <= v1 <= v2 <= v3


def test_v_of_x_is_continuous_at_breakpoints(solver_30_20):
    z = 20.0
    for x_break in (solver_30_20.x_z1(z), solver_30_20.x_z2(z), 30.0):
        below, _ = solver_30_20.v_of_x(x_break - 1e-7, z)
        above, _ = solver_30_20.v_of_x(x_break + 1e-7, z)
        assert below == pytest.approx(above, abs=1e-5)


# ------------------------------------------------------------- ε-construction


def test_epsilon_suboptimal_contract(solver_unbounded_25):
    infimum = solver_unbounded_25.solve_main().cvar
    config = solver_unbounded_25.epsilon_suboptimal(0.01)
    cap, ret = _residuals(solver_unbounded_25, config, 25.0)
    assert abs(cap) < 1e-8 and abs(ret) < 1e-8
    achieved = cvar(solver_unbounded_25.rnd, config, 0.05)
    assert achieved <= infimum + 0.01 + 1e-9
    assert achieved > infimum


@given(eps=st.floats(min_value=1e-6, max_value=50.0))
@settings(max_examples=60, deadline=None)
def test_epsilon_suboptimal_gap_never_exceeds_eps(eps):
    solver = make_solver(math.inf, 25.0)
    infimum = solver.solve_star().cvar
    config = solver.epsilon_suboptimal(eps)
    achieved = cvar(solver.rnd, config, 0.05)
    assert achieved - infimum <= eps * (1 + 1e-9) + 1e-12
    cap, ret = _residuals(solver, config, 25.0)
    assert abs(cap) < 1e-7 and abs(ret) < 1e-7


def test_epsilon_suboptimal_keeps_star_upper_threshold(solver_unbounded_25):
    star = solver_unbounded_25.solve_star()
    config = solver_unbounded_25.epsilon_suboptimal(0.01)
    assert isinstance(config, ThreeLine)
    assert config.a == pytest.approx(star.a_star, rel=1e-12)
    assert config.mid < star.x_star


def test_epsilon_suboptimal_misuse_raises(solver_30_20):
    with pytest.raises(UsageError):
        solver_30_20.epsilon_suboptimal(0.01)  # optimum exists


def test_two_line_epsilon_construction():
    """The money-market-level two-line family: CVaR = −x_r + ε exactly."""
    market = make_market()
    x_r = market.grow(10.0)
    z = 12.0
    for eps in (1e-4, 0.01, 0.5):
        config = two_line_epsilon_config(market, 10.0, z, eps, lam=0.05)
        rnd = market.rnd()
        assert capital(rnd, config) == pytest.approx(x_r, abs=1e-8)
        assert expected_return(rnd, config) == pytest.approx(z, abs=1e-8)
        gap = cvar(rnd, config, 0.05) - (-x_r)
        assert 0.0 < gap <= eps * (1 + 1e-9)


def test_two_line_epsilon_large_eps_is_capped():
    market = make_market()
    config = two_line_epsilon_config(market, 10.0, 12.0, eps=100.0, lam=0.05)
    gap = cvar(market.rnd(), config, 0.05) + market.grow(10.0)
    assert gap <= 100.0


def test_two_line_epsilon_requires_binding_target():
    market = make_market()
    with pytest.raises(UsageError):
        two_line_epsilon_config(market, 10.0, market.grow(10.0) - 1.0, 0.01, lam=0.05)
    with pytest.raises(UsageError):
        two_line_epsilon_config(make_market(mu=0.05), 10.0, 12.0, 0.01, lam=0.05)


# ------------------------------------------------------------------ invariants


@given(z=st.floats(min_value=19.0, max_value=28.8))
@settings(max_examples=40, deadline=None)
def test_optimal_cvar_is_nondecreasing_in_z(z):
    """Tighter return targets can only worsen the optimal CVaR."""
    solver = make_solver(30.0, None)
    ds = solver.solve_double_star(z)
    ds_tighter = solver.solve_double_star(min(z + 0.05, solver.solve_bar().z_bar))
    assert ds_tighter.cvar >= ds.cvar - 1e-12


def test_solution_invariants_config_iff_optimal(solver_30_20, solver_unbounded_25):
    optimal = solver_30_20.solve_main()
    assert optimal.config is not None and math.isfinite(optimal.cvar)
    nonexistent = solver_unbounded_25.solve_main()
    assert nonexistent.config is None and math.isfinite(nonexistent.cvar)


def test_thresholds_ordered_in_all_solved_configs(solver_30_20, solver_30_25, solver_50_25):
    for solver in (solver_30_20, solver_30_25, solver_50_25):
        solution = solver.solve_main()
        config = solution.config
        assert isinstance(config, ThreeLine)
        a_bar = solver.solve_bar().a_bar
        assert config.b <= a_bar <= config.a


def test_solver_contract_error_on_mid_level_outside_corridor(solver_30_20):
    with pytest.raises((UsageError, SolverContractError, BracketError)):
        solver_30_20.solve_three_line_given_x(35.0, 20.0)
