"""Command-line client for the Mean-CVaR solver service.

Every command builds a JSON request and sends it to the HTTP service — by
default an in-process instance of the application (no network involved), or a
remote server when --server is given.  Run configurations are JSON files with
"market" and "problem" objects; see the README for the schema.

Exit codes:
    0   success (including nonexistence cases, which carry a finite infimum)
    2   infeasible return target, or refusing to hedge a nonexistent optimum
    3   invalid input: config parse failure, request validation, or an
        oracle-validation gap above tolerance
    4   internal error (solver contract violation or server fault)
"""

from __future__ import annotations

import json
import sys
from typing import Any

import click

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_VALIDATION = 3
EXIT_INTERNAL = 4


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


class ServiceClient:
    """POSTs requests either to an in-process app or to a remote server."""

    def __init__(self, server: str | None):
        if server is None:
            from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())
        else:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=600.0)

    def post(self, path: str, body: dict[str, Any]) -> tuple[int, Any]:
        response = self._client.post(path, json=body)
        try:
            payload = response.json()
        except ValueError:
            payload = {"detail": response.text}
        return response.status_code, payload


def _load_run_config(path: str) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        _fail(EXIT_VALIDATION, f"cannot read config file {path}: {exc}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_VALIDATION, f"config file {path} is not valid JSON: {exc}")
    if not isinstance(config, dict) or "market" not in config or "problem" not in config:
        _fail(EXIT_VALIDATION, f"config file {path} must be an object with 'market' and 'problem'")
    return config


def _check_status(status: int, payload: Any) -> None:
    """Exit with the mapped code unless the request succeeded."""
    if status == 200:
        return
    detail = payload.get("detail", payload) if isinstance(payload, dict) else payload
    if status == 409:
        _fail(EXIT_INFEASIBLE, f"{detail}")
    if status in (400, 404, 422):
        _fail(EXIT_VALIDATION, f"{detail}")
    _fail(EXIT_INTERNAL, f"server returned {status}: {detail}")


def _emit(payload: Any, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out is None:
        click.echo(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


_config_option = click.option(
    "--config", "config_path", required=True, type=click.Path(), help="run-config JSON file"
)
_server_option = click.option(
    "--server", default=None, help="base URL of a running service (default: in-process)"
)
_out_option = click.option("--out", default=None, type=click.Path(), help="output file (default: stdout)")


@click.group()
def main() -> None:
    """Dynamic Mean-CVaR portfolio selection: solve, sweep, hedge, validate."""


@main.command()
@_config_option
@click.option("--z", default=None, type=float, help="override the return target")
@click.option("--epsilon", "--eps", "eps", default=None, type=float, help="also build an ε-suboptimal payoff")
@_server_option
@_out_option
def solve(config_path: str, z: float | None, eps: float | None, server: str | None, out: str | None) -> None:
    """Solve the static problem and report the optimal configuration."""
    config = _load_run_config(config_path)
    if z is not None:
        config["problem"]["z"] = z
    body: dict[str, Any] = {"market": config["market"], "problem": config["problem"]}
    if eps is not None:
        body["eps"] = eps
    status, payload = ServiceClient(server).post("/solve", body)
    _check_status(status, payload)
    _emit(payload, out)


@main.command()
@_config_option
@click.option("--z-grid", default=None, help="comma-separated return targets")
@click.option("--points", "--n-points", "n_points", default=101, show_default=True, help="size of the default grid")
@click.option("--json-out", default=None, type=click.Path(), help="also write structured JSON here")
@_server_option
@_out_option
def frontier(
    config_path: str,
    z_grid: str | None,
    n_points: int,
    json_out: str | None,
    server: str | None,
    out: str | None,
) -> None:
    """Sweep the efficient frontier and write it as CSV (columns z,cvar,case,x,a,b)."""
    config = _load_run_config(config_path)
    body: dict[str, Any] = {
        "market": config["market"],
        "problem": config["problem"],
        "n_points": n_points,
    }
    if z_grid is not None:
        try:
            body["z_grid"] = [float(tok) for tok in z_grid.split(",") if tok.strip()]
        except ValueError as exc:
            _fail(EXIT_VALIDATION, f"bad --z-grid: {exc}")
    status, payload = ServiceClient(server).post("/frontier", body)
    _check_status(status, payload)
    csv_text = payload["csv"]
    if out is None:
        click.echo(csv_text, nl=False)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    if json_out is not None:
        with open(json_out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(payload["points"], indent=2) + "\n")


@main.command()
@_config_option
@click.option("--epsilon", "--eps", "eps", default=None, type=float, help="hedge an ε-suboptimal payoff when no optimum exists")
@click.option("--paths", "--n-paths", "n_paths", default=None, type=int, help="simulate replication on this many paths")
@click.option("--steps", "--n-steps", "n_steps", default=None, type=int, help="rebalancing steps per path")
@click.option("--seed", default=None, type=int, help="explicit RNG seed (required for simulation)")
@_server_option
@_out_option
def hedge(
    config_path: str,
    eps: float | None,
    n_paths: int | None,
    n_steps: int | None,
    seed: int | None,
    server: str | None,
    out: str | None,
) -> None:
    """Build the replication plan; optionally simulate its self-financing wealth."""
    config = _load_run_config(config_path)
    body: dict[str, Any] = {"market": config["market"], "problem": config["problem"]}
    if eps is not None:
        body["eps"] = eps
    wants_sim = n_paths is not None or n_steps is not None or seed is not None
    if wants_sim:
        if n_paths is None or n_steps is None:
            _fail(EXIT_VALIDATION, "simulation requires both --paths and --steps")
        if seed is None:
            _fail(EXIT_VALIDATION, "simulation requires an explicit --seed")
        body["simulate"] = {"n_paths": n_paths, "n_steps": n_steps, "seed": seed}
    status, payload = ServiceClient(server).post("/hedge", body)
    _check_status(status, payload)
    _emit(payload, out)


@main.command()
@_config_option
@click.option("--atoms", "--n", "n", default=4096, show_default=True, help="discretization atoms for the LP oracle")
@click.option("--rel-tol", default=0.005, show_default=True, help="relative gap tolerance")
@_server_option
@_out_option
def validate(config_path: str, n: int, rel_tol: float, server: str | None, out: str | None) -> None:
    """Cross-check the analytic optimum against the LP oracle; exit 3 on a gap."""
    config = _load_run_config(config_path)
    body = {
        "market": config["market"],
        "problem": config["problem"],
        "n": n,
        "rel_tol": rel_tol,
    }
    status, payload = ServiceClient(server).post("/validate", body)
    _check_status(status, payload)
    _emit(payload, out)
    if not payload.get("passed", False):
        _fail(EXIT_VALIDATION, f"oracle gap {payload.get('rel_gap')} exceeds tolerance {rel_tol}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
