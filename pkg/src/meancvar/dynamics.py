"""Dynamic replication of threshold payoffs in the Black-Scholes market.

A Two-Line/Three-Line payoff is a linear combination of digital options on
threshold events of the Radon-Nikodým derivative ρ_T, which are in turn
digital options on the terminal stock price.  Conditional on S_t = s,

    P̃(ρ_T > c | F_t) = N(d_minus(c, s, t)),
    P(ρ_T > c | F_t)  = N(d_minus(c, s, t) − θ√(T−t)),

so the wealth process (discounted conditional expectation under the pricing
measure) and the replicating stock position (its price-delta) are closed
form.  The formulas below assume θ = (μ − r)/σ > 0, the economically standard
orientation in which ρ_T is decreasing in S_T; the static problem depends on
θ only through |θ| and is unaffected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .configurations import (
    ConstantPayoff,
    PayoffConfig,
    ThreeLine,
    TwoLineLowMid,
    TwoLineLowUp,
    TwoLineMidUp,
    payoff_at_rho,
)
from .market import MarketParams, rho_of_terminal_price

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _canonical_levels(config: PayoffConfig) -> tuple[float, float, float, float, float]:
    """Represent any threshold config as (a, b, low, mid, up) with b ≤ a.

    Degenerate thresholds use the exact limits a = ∞ (empty high-state event)
    and b = 0 (empty low-state event); absent levels are repeated so the
    valuation and delta formulas hold verbatim for every variant.
    """
    if isinstance(config, TwoLineLowMid):
        return config.a, 0.0, config.low, config.mid, config.mid
    if isinstance(config, TwoLineMidUp):
        return math.inf, config.b, config.mid, config.mid, config.up
    if isinstance(config, TwoLineLowUp):
        return config.a, config.a, config.low, 0.5 * (config.low + config.up), config.up
    if isinstance(config, ThreeLine):
        return config.a, config.b, config.low, config.mid, config.up
    raise TypeError(f"no threshold representation for {type(config).__name__}")


def d_minus(market: MarketParams, c: float, s, t: float):
    """d_minus(c, s, t) with N(d_minus) = P̃(ρ_T > c | S_t = s).

    Defined for 0 ≤ c ≤ ∞ and 0 ≤ t < T; vectorized over the price s.
    The degenerate thresholds map to d_minus = ∓∞ exactly (c = ∞ empties the
    event, c = 0 fills it).
    """
    theta, sigma, T = market.theta, market.sigma, market.T
    if theta <= 0.0:
        raise ValueError("hedging formulas require theta = (mu - r)/sigma > 0")
    if not 0.0 <= t < T:
        raise ValueError(f"t must lie in [0, T), got t={t}, T={T}")
    if c < 0.0 or math.isnan(c):
        raise ValueError(f"threshold must be nonnegative (or inf), got {c}")
    s = np.asarray(s, dtype=float)
    tau = T - t
    w_tilde = (np.log(s / market.s0) - (market.r - 0.5 * sigma**2) * t) / sigma
    if math.isinf(c):
        num = np.full_like(w_tilde, -math.inf)
    elif c == 0.0:
        num = np.full_like(w_tilde, math.inf)
    else:
        num = (0.5 * theta**2 * T - math.log(c)) / theta - w_tilde
    return num / math.sqrt(tau)


def d_plus(market: MarketParams, c: float, s, t: float):
    """d_plus = −d_minus, so that N(d_plus) = P̃(ρ_T ≤ c | S_t = s)."""
    return -d_minus(market, c, s, t)


@dataclass(frozen=True)
class HedgePlan:
    """Replicating strategy for a threshold payoff in a Black-Scholes market."""

    market: MarketParams
    config: PayoffConfig

    def __post_init__(self) -> None:
        if not isinstance(self.config, ConstantPayoff) and self.market.theta <= 0.0:
            raise ValueError(
                "replication of non-constant payoffs requires theta = (mu - r)/sigma > 0"
            )

    def value(self, s, t: float):
        """Wealth X_t of the replicating portfolio at price s and time t < T."""
        market = self.market
        tau = market.T - t
        disc = math.exp(-market.r * tau)
        if isinstance(self.config, ConstantPayoff):
            out = np.full_like(np.asarray(s, dtype=float), disc * self.config.level)
            return out if out.ndim else float(out)
        a, b, low, mid, up = _canonical_levels(self.config)
        n_a = ndtr(d_minus(market, a, s, t))
        n_b = ndtr(d_minus(market, b, s, t))
        out = disc * (low * n_a + mid * (n_b - n_a) + up * (1.0 - n_b))
        return out if out.ndim else float(out)

    def shares(self, s, t: float):
        """Stock position ξ_t = ∂X_t/∂s of the replicating portfolio."""
        market = self.market
        if isinstance(self.config, ConstantPayoff):
            out = np.zeros_like(np.asarray(s, dtype=float))
            return out if out.ndim else float(out)
        a, b, low, mid, up = _canonical_levels(self.config)
        tau = market.T - t
        disc = math.exp(-market.r * tau)
        s_arr = np.asarray(s, dtype=float)
        dens = np.zeros_like(s_arr)
        if mid != low and math.isfinite(a):
            d_a = d_minus(market, a, s_arr, t)
            dens = dens + (mid - low) * np.exp(-0.5 * d_a**2)
        if up != mid and b > 0.0:
            d_b = d_minus(market, b, s_arr, t)
            dens = dens + (up - mid) * np.exp(-0.5 * d_b**2)
        out = disc * dens / (market.sigma * s_arr * math.sqrt(2.0 * math.pi * tau))
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class PathSimResult:
    """Summary of a self-financing replication experiment."""

    n_paths: int
    n_steps: int
    terminal_abs_error_mean: float
    terminal_abs_error_median: float
    terminal_abs_error_p99: float
    empirical_cvar: float
    empirical_mean: float
    empirical_cvar_se: float
    rng_name: str


def empirical_cvar(samples: np.ndarray, lam: float) -> tuple[float, float]:
    """Empirical CVaR_λ of a loss −X sample, with a plug-in standard error.

    Uses the order statistic at k = ⌈λn⌉ as the VaR level c, and
    CVaR = E[(c − X)^+]/λ − c; the standard error reflects the averaging
    term only (the c-estimation error is higher order).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empirical CVaR needs at least one sample")
    k = max(1, math.ceil(lam * n))
    c = x[k - 1]
    short = np.maximum(c - x, 0.0)
    cv = float(short.mean() / lam - c)
    se = float(short.std(ddof=1) / (lam * math.sqrt(n))) if n > 1 else math.inf
    return cv, se


def portfolio_value(plan: HedgePlan, t: float, s):
    """Wealth X_t of the replicating portfolio at time t and stock price s."""
    return plan.value(s, t)


def hedge_shares(plan: HedgePlan, t: float, s):
    """Stock position ξ_t of the replicating portfolio at time t and price s."""
    return plan.shares(s, t)


# Paths are organized in fixed logical blocks: block b draws from an
# independently jumped Philox counter regardless of how many paths are
# requested, so path i's trajectory depends only on (seed, i).
_BLOCK = 4096


def simulate_paths(
    plan: HedgePlan,
    n_paths: int,
    n_steps: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Self-financing replication on exact GBM paths under the physical measure.

    Wealth rebalances with the closed-form ξ on a uniform time grid and
    accrues the money-market rate between rebalances.  Returns
    ``(terminal_wealth, terminal_abs_error)``, the second being
    |X_T − H(S_T)| against the target payoff at the simulated terminal price.

    Each fixed-size block of paths draws from its own jumped Philox counter
    keyed by ``seed``, so results are bitwise reproducible and independent of
    worker count or the total number of paths requested.
    """
    if n_paths <= 0 or n_steps <= 0:
        raise ValueError("n_paths and n_steps must be positive")
    market = plan.market
    config = plan.config
    dt = market.T / n_steps
    growth = math.exp(market.r * dt)
    drift = (market.mu - 0.5 * market.sigma**2) * dt
    vol = market.sigma * math.sqrt(dt)
    base = np.random.Philox(key=seed)

    abs_errors = np.empty(n_paths)
    terminal_wealth = np.empty(n_paths)
    x0 = float(plan.value(market.s0, 0.0))

    for block in range(0, -(-n_paths // _BLOCK)):
        start = block * _BLOCK
        size = min(_BLOCK, n_paths - start)
        rng = np.random.Generator(base.jumped(block))
        s = np.full(size, market.s0)
        x = np.full(size, x0)
        for k in range(n_steps):
            xi = plan.shares(s, k * dt)
            # draw the full block so partial blocks see the same stream layout
            z = rng.standard_normal(_BLOCK)[:size]
            s_next = s * np.exp(drift + vol * z)
            x = xi * s_next + (x - xi * s) * growth
            s = s_next
        target = payoff_at_rho(config, rho_of_terminal_price(market, s))
        abs_errors[start : start + size] = np.abs(x - target)
        terminal_wealth[start : start + size] = x

    return terminal_wealth, abs_errors


def simulate_replication(
    plan: HedgePlan,
    n_paths: int,
    n_steps: int,
    seed: int,
    lam: float = 0.05,
) -> PathSimResult:
    """Summary statistics of a :func:`simulate_paths` replication experiment."""
    terminal_wealth, abs_errors = simulate_paths(plan, n_paths, n_steps, seed)
    cv, se = empirical_cvar(terminal_wealth, lam)
    return PathSimResult(
        n_paths=n_paths,
        n_steps=n_steps,
        terminal_abs_error_mean=float(abs_errors.mean()),
        terminal_abs_error_median=float(np.median(abs_errors)),
        terminal_abs_error_p99=float(np.percentile(abs_errors, 99.0)),
        empirical_cvar=cv,
        empirical_mean=float(terminal_wealth.mean()),
        empirical_cvar_se=se,
        rng_name="philox",
    )
