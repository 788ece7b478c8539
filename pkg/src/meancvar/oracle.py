"""Brute-force linear-programming oracle on a discretized market.

The static problem is approximated on n equal-probability atoms of the
Radon-Nikodým derivative ρ and solved as an explicit LP via the
Rockafellar-Uryasev representation

    CVaR_λ(X) = min_c (1/λ)·E[(c − X)^+] − c,

with decision variables (X_1..X_n, s_1..s_n, c).  The oracle is independent
of the threshold-system solvers and is used to cross-check their optimal
values and the level-set structure of optimal payoffs.

Atoms are conditional means of ρ over equal-probability cells of its driving
normal variable; the partial-expectation identity makes each atom closed form
and their probability-weighted sum telescope to E[ρ] = 1 exactly, so the
discrete market prices the money market without rescaling error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import ndtr, ndtri

from .market import MarketParams


@dataclass(frozen=True)
class DiscreteMarket:
    """Finite market: atoms of ρ in ascending order with physical weights."""

    rho: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=float)
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "p", p)
        if rho.shape != p.shape or rho.ndim != 1 or rho.size == 0:
            raise ValueError("rho and p must be equal-length 1-D arrays")
        if np.any(p <= 0.0) or np.any(rho < 0.0):
            raise ValueError("probabilities must be positive and atoms nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")
        if abs(float(rho @ p) - 1.0) > 1e-10:
            raise ValueError(f"E[rho] = {float(rho @ p)}, not 1")
        if np.any(np.diff(rho) < 0.0):
            raise ValueError("atoms must be ascending")

    @property
    def p_tilde(self) -> np.ndarray:
        return self.rho * self.p

    @property
    def n(self) -> int:
        return int(self.rho.size)


def discretize(market: MarketParams, n: int) -> DiscreteMarket:
    """Discretize the lognormal law of ρ into n equal-probability atoms.

    Cell j of the driving standard normal V has edges ndtri(j/n); the atom is
    the conditional mean E[ρ | V in cell], closed form by the lognormal
    partial-expectation identity.  For θ = 0 every atom is 1.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    m = market.rnd().m
    p = np.full(n, 1.0 / n)
    if m == 0.0:
        return DiscreteMarket(rho=np.ones(n), p=p)
    edges = ndtri(np.arange(n + 1) / n)
    tail = ndtr(edges - m)
    rho = n * np.diff(tail)
    rho = rho / float(rho @ p)
    return DiscreteMarket(rho=np.sort(rho), p=p)


@dataclass(frozen=True)
class LPResult:
    """Solved LP: optimal value, payoff atoms, and the VaR level c."""

    value: float
    payoff: np.ndarray
    c: float
    status: str


def _feasibility_rows(
    dm: DiscreteMarket, x_r: float, z: float | None
) -> tuple[sparse.csr_matrix | None, np.ndarray | None, sparse.csr_matrix, np.ndarray]:
    """Shared return (≥ z) and capital (= x_r) constraint rows on the X block."""
    n = dm.n
    a_ub = None
    b_ub = None
    if z is not None:
        a_ub = sparse.csr_matrix(-dm.p.reshape(1, n))
        b_ub = np.array([-z])
    a_eq = sparse.csr_matrix(dm.p_tilde.reshape(1, n))
    b_eq = np.array([x_r])
    return a_ub, b_ub, a_eq, b_eq


def lp_mean_cvar(
    dm: DiscreteMarket,
    x_d: float,
    x_u: float,
    x_r: float,
    lam: float,
    z: float | None,
) -> LPResult:
    """Minimize CVaR_λ(X) subject to E[X] ≥ z, Ẽ[X] = x_r, x_d ≤ X ≤ x_u.

    Pass z=None to drop the return constraint (the one-constraint problem).
    Raises RuntimeError if the LP does not solve to optimality.
    """
    n = dm.n
    eye = sparse.eye(n, format="csr")
    ones_col = sparse.csr_matrix(np.ones((n, 1)))
    # shortfall rows: -X_i - s_i + c <= 0
    rows_short = sparse.hstack([-eye, -eye, ones_col], format="csr")
    b_short = np.zeros(n)
    ret_row, ret_rhs, a_eq, b_eq = _feasibility_rows(dm, x_r, z)
    if ret_row is not None:
        ret_block = sparse.hstack(
            [ret_row, sparse.csr_matrix((1, n)), sparse.csr_matrix((1, 1))], format="csr"
        )
        a_ub = sparse.vstack([rows_short, ret_block], format="csr")
        b_ub = np.concatenate([b_short, ret_rhs])
    else:
        a_ub, b_ub = rows_short, b_short
    a_eq_full = sparse.hstack(
        [a_eq, sparse.csr_matrix((1, n)), sparse.csr_matrix((1, 1))], format="csr"
    )
    cost = np.concatenate([np.zeros(n), dm.p / lam, [-1.0]])
    bounds = [(x_d, None if math.isinf(x_u) else x_u)] * n
    bounds += [(0.0, None)] * n
    bounds += [(None, None)]
    res = linprog(
        cost,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq_full,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"CVaR LP failed: {res.message}")
    x = np.asarray(res.x[:n])
    return LPResult(value=float(res.fun), payoff=x, c=float(res.x[-1]), status="optimal")


def lp_step1(
    dm: DiscreteMarket,
    x_d: float,
    x_u: float,
    x_r: float,
    z: float,
    x: float,
) -> LPResult:
    """Minimize the expected shortfall E[(x − X)^+] under the same constraints.

    This is the inner (step 1) problem whose value function v(x) the
    threshold solver computes in closed form.
    """
    n = dm.n
    eye = sparse.eye(n, format="csr")
    # shortfall rows: -X_i - t_i <= -x
    rows_short = sparse.hstack([-eye, -eye], format="csr")
    b_short = np.full(n, -x)
    ret_row, ret_rhs, a_eq, b_eq = _feasibility_rows(dm, x_r, z)
    assert ret_row is not None and ret_rhs is not None
    ret_block = sparse.hstack([ret_row, sparse.csr_matrix((1, n))], format="csr")
    a_ub = sparse.vstack([rows_short, ret_block], format="csr")
    b_ub = np.concatenate([b_short, ret_rhs])
    a_eq_full = sparse.hstack([a_eq, sparse.csr_matrix((1, n))], format="csr")
    cost = np.concatenate([np.zeros(n), dm.p])
    bounds = [(x_d, None if math.isinf(x_u) else x_u)] * n
    bounds += [(0.0, None)] * n
    res = linprog(
        cost,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq_full,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"shortfall LP failed: {res.message}")
    return LPResult(
        value=float(res.fun), payoff=np.asarray(res.x[:n]), c=x, status="optimal"
    )


def count_level_sets(payoff: np.ndarray, atol: float = 1e-6) -> tuple[int, int]:
    """Count (plateaus, stray atoms) in an LP payoff.

    Atoms are grouped by value within atol; groups holding at least two atoms
    are plateaus (genuine level-sets), singleton groups are strays.  Basic LP
    solutions of the threshold structure have at most one stray per active
    constraint, so optimal payoffs show few strays and at most three plateaus.
    """
    x = np.sort(np.asarray(payoff, dtype=float))
    if x.size == 0:
        return 0, 0
    groups: list[int] = []
    count = 1
    for i in range(1, x.size):
        if x[i] - x[i - 1] <= atol:
            count += 1
        else:
            groups.append(count)
            count = 1
    groups.append(count)
    plateaus = sum(1 for g in groups if g >= 2)
    strays = sum(1 for g in groups if g == 1)
    return plateaus, strays
