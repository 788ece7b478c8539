"""HTTP service exposing the Mean-CVaR solver.

Endpoints
---------
POST /solve     optimality dispatch (optionally with an ε-suboptimal payoff)
POST /frontier  efficient-frontier sweep (structured points + CSV)
POST /hedge     replication plan, optionally with a path simulation
POST /validate  cross-check against the LP oracle on a discretized market
GET  /healthz   liveness and version

Error mapping: semantic problems with an otherwise well-formed request
(infeasible return target, hedging a nonexistent optimum) are 409; malformed
or inconsistent inputs are 422; solver-contract violations are 500.
"""

from __future__ import annotations

import math
from dataclasses import asdict

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..configurations import (
    ConstantPayoff,
    PayoffConfig,
    ProblemSpec,
    ThreeLine,
    TwoLineLowMid,
    TwoLineLowUp,
    TwoLineMidUp,
    capital as config_capital,
    cvar as config_cvar,
    expected_return as config_return,
)
from ..dynamics import HedgePlan, simulate_replication
from ..frontier import sweep, to_csv
from ..market import MarketParams, terminal_price_of_rho
from ..oracle import count_level_sets, discretize, lp_mean_cvar
from ..static_solver import (
    Diagnostics,
    InfeasibleReturnError,
    MeanCVaRSolver,
    Solution,
    UsageError,
)
from . import schemas


def _build(market_model: schemas.MarketModel, problem_model: schemas.ProblemModel):
    market = MarketParams(
        r=market_model.r,
        mu=market_model.mu,
        sigma=market_model.sigma,
        s0=market_model.s0,
        T=market_model.T,
    )
    spec = ProblemSpec(
        x_d=problem_model.x_d,
        x_u=problem_model.x_u,
        x_0=problem_model.x_0,
        lam=problem_model.lam,
        z=problem_model.z,
    )
    return market, spec


def _config_model(config: PayoffConfig | None) -> schemas.ConfigModel | None:
    if config is None:
        return None
    if isinstance(config, ConstantPayoff):
        return schemas.ConfigModel(kind="constant", level=config.level)
    if isinstance(config, TwoLineLowMid):
        return schemas.ConfigModel(
            kind="two_line_low_mid", a=config.a, low=config.low, mid=config.mid
        )
    if isinstance(config, TwoLineMidUp):
        return schemas.ConfigModel(
            kind="two_line_mid_up", b=config.b, mid=config.mid, up=config.up
        )
    if isinstance(config, TwoLineLowUp):
        return schemas.ConfigModel(
            kind="two_line_low_up", a=config.a, low=config.low, up=config.up
        )
    if isinstance(config, ThreeLine):
        return schemas.ConfigModel(
            kind="three_line",
            a=config.a,
            b=config.b,
            low=config.low,
            mid=config.mid,
            up=config.up,
        )
    raise TypeError(f"unknown config {type(config).__name__}")


def _diag_model(diag: Diagnostics) -> schemas.DiagnosticsModel:
    return schemas.DiagnosticsModel(**asdict(diag))


def _residuals_model(
    solver: MeanCVaRSolver, config: PayoffConfig | None
) -> schemas.ResidualsModel | None:
    if config is None:
        return None
    spec = solver.spec
    z_eff = solver.x_r if spec.z is None else max(spec.z, solver.x_r)
    return schemas.ResidualsModel(
        capital=config_capital(solver.rnd, config) - solver.x_r,
        return_slack=config_return(solver.rnd, config) - z_eff,
    )


def _solution_response(
    solver: MeanCVaRSolver,
    solution: Solution,
    epsilon_config: PayoffConfig | None = None,
    epsilon_cvar: float | None = None,
) -> schemas.SolveResponse:
    return schemas.SolveResponse(
        case=solution.case_label.value,
        cvar=solution.cvar,
        config=_config_model(solution.config),
        diagnostics=_diag_model(solution.diagnostics),
        residuals=_residuals_model(solver, solution.config),
        note=solution.note,
        epsilon_config=_config_model(epsilon_config),
        epsilon_cvar=epsilon_cvar,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="meancvar", version=__version__)

    @app.exception_handler(InfeasibleReturnError)
    async def _infeasible(request: Request, exc: InfeasibleReturnError) -> JSONResponse:
        z_bar = exc.z_bar if math.isfinite(exc.z_bar) else "inf"
        return JSONResponse(
            status_code=409,
            content={
                "detail": str(exc),
                "case": exc.case_label.value,
                "z": exc.z,
                "z_bar": z_bar,
            },
        )

    @app.exception_handler(UsageError)
    async def _usage(request: Request, exc: UsageError) -> JSONResponse:
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/healthz", response_model=schemas.HealthResponse)
    async def healthz() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/solve", response_model=schemas.SolveResponse)
    async def solve(req: schemas.SolveRequest) -> schemas.SolveResponse:
        market, spec = _build(req.market, req.problem)
        solver = MeanCVaRSolver(market, spec)
        solution = solver.solve_main()
        eps_config = None
        eps_cvar = None
        if req.eps is not None and solution.config is None:
            eps_config = solver.epsilon_suboptimal(req.eps)
            eps_cvar = config_cvar(solver.rnd, eps_config, spec.lam)
        return _solution_response(solver, solution, eps_config, eps_cvar)

    @app.post("/frontier", response_model=schemas.FrontierResponse)
    async def frontier(req: schemas.FrontierRequest) -> schemas.FrontierResponse:
        market, spec = _build(req.market, req.problem)
        points = sweep(market, spec, z_grid=req.z_grid, n_points=req.n_points)
        return schemas.FrontierResponse(
            points=[
                schemas.FrontierPointModel(
                    z=pt.z,
                    cvar=pt.cvar,
                    case=pt.case_label.value,
                    x=pt.x,
                    a=pt.a,
                    b=pt.b,
                )
                for pt in points
            ],
            csv=to_csv(points),
        )

    @app.post("/hedge", response_model=schemas.HedgeResponse)
    async def hedge(req: schemas.HedgeRequest) -> schemas.HedgeResponse:
        market, spec = _build(req.market, req.problem)
        solver = MeanCVaRSolver(market, spec)
        solution = solver.solve_main()
        if solution.config is not None:
            config = solution.config
        elif req.eps is not None:
            config = solver.epsilon_suboptimal(req.eps)
        else:
            raise UsageError(
                f"case {solution.case_label.value}: no optimal payoff exists to hedge; "
                "pass eps to hedge an ε-suboptimal payoff instead"
            )
        plan = HedgePlan(market=market, config=config)
        thresholds: dict[str, float | None] = {"a": None, "b": None}
        if isinstance(config, (TwoLineLowMid, TwoLineLowUp, ThreeLine)):
            thresholds["a"] = terminal_price_of_rho(market, config.a)
        if isinstance(config, (TwoLineMidUp, ThreeLine)):
            thresholds["b"] = terminal_price_of_rho(market, config.b)
        elif isinstance(config, TwoLineLowUp):
            thresholds["b"] = thresholds["a"]
        sim_model = None
        if req.simulate is not None:
            result = simulate_replication(
                plan,
                n_paths=req.simulate.n_paths,
                n_steps=req.simulate.n_steps,
                seed=req.simulate.seed,
                lam=spec.lam,
            )
            sim_model = schemas.SimResultModel(**asdict(result))
        config_model = _config_model(config)
        assert config_model is not None
        return schemas.HedgeResponse(
            case=solution.case_label.value,
            config=config_model,
            initial_wealth=float(plan.value(market.s0, 0.0)),
            price_threshold_a=thresholds["a"],
            price_threshold_b=thresholds["b"],
            simulation=sim_model,
        )

    @app.post("/validate", response_model=schemas.ValidateResponse)
    async def validate(req: schemas.ValidateRequest) -> schemas.ValidateResponse:
        market, spec = _build(req.market, req.problem)
        solver = MeanCVaRSolver(market, spec)
        solution = solver.solve_main()
        dm = discretize(market, req.n)
        lp = lp_mean_cvar(
            dm,
            x_d=spec.x_d,
            x_u=spec.x_u,
            x_r=solver.x_r,
            lam=spec.lam,
            z=spec.z,
        )
        abs_gap = abs(lp.value - solution.cvar)
        rel_gap = abs_gap / max(1.0, abs(solution.cvar))
        scale = max(
            1.0,
            abs(spec.x_d),
            abs(spec.x_u) if math.isfinite(spec.x_u) else abs(solver.x_r),
        )
        plateaus, strays = count_level_sets(lp.payoff, atol=1e-5 * scale)
        return schemas.ValidateResponse(
            n=req.n,
            case=solution.case_label.value,
            analytic_cvar=solution.cvar,
            lp_cvar=lp.value,
            abs_gap=abs_gap,
            rel_gap=rel_gap,
            rel_tol=req.rel_tol,
            passed=bool(rel_gap <= req.rel_tol),
            lp_plateaus=plateaus,
            lp_strays=strays,
        )

    return app
