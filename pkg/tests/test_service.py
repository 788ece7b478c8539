"""HTTP service tests: endpoints, serialization, and error mapping.

Runs the FastAPI app in-process via the test client.  Numeric answers are
pinned loosely here (the solver suites own the tight checks); the focus is
the wire format: case labels, "inf" round-tripping, 409 vs 422 mapping, and
the presence/absence of optional response blocks.
"""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from meancvar.service import create_app

MARKET = {"r": 0.05, "mu": 0.2, "sigma": 0.1, "s0": 10.0, "T": 2.0}


def problem(x_u, z, **overrides):
    body = {"x_d": 0.0, "x_u": x_u, "x_0": 10.0, "lam": 0.05, "z": z}
    body.update(overrides)
    return body


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


def test_healthz_reports_version(client):
    resp = client.get("/healthz")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["version"]


def test_solve_double_star_case(client):
    resp = client.post("/solve", json={"market": MARKET, "problem": problem(30.0, 20.0)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["case"] == "DoubleStarOptimal"
    assert body["cvar"] == pytest.approx(-15.206694718733305, abs=1e-9)
    cfg = body["config"]
    assert cfg["kind"] == "three_line"
    assert cfg["mid"] == pytest.approx(19.125755713103782, abs=1e-9)
    assert cfg["a"] == pytest.approx(14.37649648036529, abs=1e-9)
    assert cfg["b"] == pytest.approx(0.006820364933871732, abs=1e-12)
    assert body["epsilon_config"] is None and body["epsilon_cvar"] is None
    diag = body["diagnostics"]
    assert diag["z_star"] == pytest.approx(18.874237765718085, abs=1e-9)
    assert diag["z_bar"] == pytest.approx(28.886568363647378, abs=1e-9)
    # capital is an equality residual; the return constraint binds at z=20
    res = body["residuals"]
    assert res["capital"] == pytest.approx(0.0, abs=1e-8)
    assert res["return_slack"] == pytest.approx(0.0, abs=1e-8)


def test_solve_without_target_returns_star(client):
    resp = client.post("/solve", json={"market": MARKET, "problem": problem(30.0, None)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["case"] == "StarOptimal"
    assert body["config"]["kind"] == "two_line_low_mid"
    assert body["config"]["mid"] == pytest.approx(19.06699774792685, abs=1e-9)
    # without a target the return constraint is slack: E[X*] = z* > x_r
    res = body["residuals"]
    assert res["capital"] == pytest.approx(0.0, abs=1e-8)
    assert res["return_slack"] == pytest.approx(
        18.874237765718085 - 11.051709180756477, abs=1e-6
    )


def test_solve_accepts_inf_string_and_reports_nonexistence(client):
    resp = client.post(
        "/solve", json={"market": MARKET, "problem": problem("inf", 25.0)}
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["case"] == "NonexistentAtStarLevel"
    assert body["cvar"] == pytest.approx(-15.211798103751466, abs=1e-9)
    assert body["config"] is None
    assert body["residuals"] is None
    # infinite diagnostics serialize as the string "inf"
    assert body["diagnostics"]["z_bar"] == "inf"


def test_solve_eps_block_only_when_no_optimum(client):
    resp = client.post(
        "/solve",
        json={"market": MARKET, "problem": problem("inf", 25.0), "eps": 0.01},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["epsilon_config"] is not None
    assert body["epsilon_config"]["kind"] == "three_line"
    assert body["epsilon_cvar"] <= body["cvar"] + 0.01 + 1e-9

    resp = client.post(
        "/solve",
        json={"market": MARKET, "problem": problem(30.0, 20.0), "eps": 0.01},
    )
    assert resp.json()["epsilon_config"] is None


def test_solve_infeasible_target_is_409(client):
    resp = client.post("/solve", json={"market": MARKET, "problem": problem(30.0, 29.0)})
    assert resp.status_code == 409
    body = resp.json()
    assert body["case"] == "InfeasibleReturnTarget"
    assert body["z"] == 29.0
    assert body["z_bar"] == pytest.approx(28.886568363647378, abs=1e-9)


def test_solve_invalid_market_is_422(client):
    bad = dict(MARKET, sigma=-1.0)
    resp = client.post("/solve", json={"market": bad, "problem": problem(30.0, 20.0)})
    assert resp.status_code == 422


def test_solve_rejects_nan(client):
    resp = client.post(
        "/solve", json={"market": MARKET, "problem": problem("nan", 20.0)}
    )
    assert resp.status_code == 422


def test_frontier_returns_points_and_csv(client):
    resp = client.post(
        "/frontier",
        json={"market": MARKET, "problem": problem(30.0, None), "z_grid": [20.0, 25.0]},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert [pt["z"] for pt in body["points"]] == [20.0, 25.0]
    assert body["points"][0]["cvar"] == pytest.approx(-15.206694718733305, abs=1e-9)
    assert body["points"][1]["cvar"] == pytest.approx(-14.840527906099432, abs=1e-9)
    assert body["csv"].startswith("z,cvar,case,x,a,b\n")
    assert body["csv"].count("\n") == 3


def test_frontier_unbounded_needs_explicit_grid(client):
    resp = client.post(
        "/frontier", json={"market": MARKET, "problem": problem("inf", None)}
    )
    assert resp.status_code == 422
    assert "z_bar" in resp.json()["detail"]


def test_hedge_reports_plan_and_price_thresholds(client):
    resp = client.post("/hedge", json={"market": MARKET, "problem": problem(30.0, 20.0)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["case"] == "DoubleStarOptimal"
    assert body["initial_wealth"] == pytest.approx(10.0, abs=1e-9)
    assert body["price_threshold_a"] == pytest.approx(10.642748632890735, abs=1e-9)
    assert body["price_threshold_b"] == pytest.approx(17.727337027307463, abs=1e-9)
    assert body["simulation"] is None


def test_hedge_nonexistent_without_eps_is_409(client):
    resp = client.post("/hedge", json={"market": MARKET, "problem": problem("inf", 25.0)})
    assert resp.status_code == 409
    assert "no optimal payoff" in resp.json()["detail"]


def test_hedge_nonexistent_with_eps_hedges_suboptimal_payoff(client):
    resp = client.post(
        "/hedge",
        json={"market": MARKET, "problem": problem("inf", 25.0), "eps": 0.01},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["case"] == "NonexistentAtStarLevel"
    assert body["config"]["kind"] == "three_line"
    assert body["initial_wealth"] == pytest.approx(10.0, abs=1e-9)


def test_hedge_with_simulation_block(client):
    resp = client.post(
        "/hedge",
        json={
            "market": MARKET,
            "problem": problem(30.0, 20.0),
            "simulate": {"n_paths": 2000, "n_steps": 50, "seed": 7},
        },
    )
    assert resp.status_code == 200
    sim = resp.json()["simulation"]
    assert sim["n_paths"] == 2000 and sim["n_steps"] == 50
    assert sim["rng_name"] == "philox"
    assert sim["empirical_mean"] == pytest.approx(20.25, abs=0.6)
    assert sim["terminal_abs_error_median"] < 1.0


def test_validate_degenerate_market_is_exact(client):
    # mu = r makes the pricing density constant, so the risk-free payoff is
    # optimal and both the analytic solver and the LP land on -x_r exactly.
    degenerate = dict(MARKET, mu=0.05)
    resp = client.post(
        "/validate",
        json={"market": degenerate, "problem": problem(30.0, None), "n": 64},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["case"] == "MoneyMarketOptimal"
    assert body["analytic_cvar"] == pytest.approx(-11.051709180756477, abs=1e-12)
    assert body["lp_cvar"] == pytest.approx(-11.051709180756477, abs=1e-9)
    assert body["passed"] is True


def test_validate_passes_against_lp(client):
    resp = client.post(
        "/validate",
        json={"market": MARKET, "problem": problem(30.0, 20.0), "n": 512},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] is True
    assert body["rel_gap"] <= body["rel_tol"]
    assert body["lp_plateaus"] <= 3
    assert body["analytic_cvar"] == pytest.approx(-15.206694718733305, abs=1e-9)
    assert body["lp_cvar"] == pytest.approx(body["analytic_cvar"], rel=1e-3)
