"""Black-Scholes market primitives and the law of the Radon-Nikodým derivative.

In the one-asset Black-Scholes model with drift μ, volatility σ and market
price of risk θ = (μ − r)/σ, the Radon-Nikodým derivative of the risk-neutral
measure P̃ with respect to the physical measure P is

    ρ = dP̃/dP = exp(−θ·W_T − θ²T/2),

so ln ρ ~ N(−m²/2, m²) under P and ln ρ ~ N(+m²/2, m²) under P̃, where
m = |θ|·√T.  Every event the threshold solvers need is of the form
{ρ > a}, {ρ < b} or a band between two thresholds, and all of its P- and
P̃-probabilities reduce to standard normal CDF evaluations:

    P(ρ > a)  = N(−m/2 − ln a / m),
    P̃(ρ > a) = N(+m/2 − ln a / m).

Internally thresholds are carried in the transformed coordinate
u(a) = m/2 − ln(a)/m, which maps (0, ∞) monotonically (decreasing) onto
(−∞, ∞) and keeps all arithmetic stable for thresholds spanning many orders
of magnitude (a → ∞ and b → 0 are routine degenerate limits).  In u-space,

    P̃(ρ > a) = N(u),     P(ρ > a) = N(u − m).

θ = 0 is treated as an explicit degenerate model with ρ ≡ 1, never as a
numerical limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri


@dataclass(frozen=True)
class MarketParams:
    """Black-Scholes market: risk-free rate, drift, volatility, spot, horizon."""

    r: float
    mu: float
    sigma: float
    s0: float
    T: float

    def __post_init__(self) -> None:
        if not (self.sigma > 0):
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not (self.T > 0):
            raise ValueError(f"T must be > 0, got {self.T}")
        if not (self.s0 > 0):
            raise ValueError(f"s0 must be > 0, got {self.s0}")
        for name in ("r", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)}")

    @property
    def theta(self) -> float:
        """Market price of risk θ = (μ − r)/σ."""
        return (self.mu - self.r) / self.sigma

    def grow(self, x0: float) -> float:
        """Risk-free growth of initial capital: x_r = x0·e^{rT}."""
        return x0 * math.exp(self.r * self.T)

    def rnd(self) -> "RNDModel":
        """The law of ρ = dP̃/dP implied by these parameters."""
        return RNDModel(theta_sqrt_T=self.theta * math.sqrt(self.T))


@dataclass(frozen=True)
class RNDModel:
    """Distribution of the Radon-Nikodým derivative ρ = dP̃/dP.

    ``theta_sqrt_T`` is the signed θ√T; only its absolute value ``m`` enters
    the law of ρ.  ``m = 0`` is the degenerate model ρ ≡ 1.
    """

    theta_sqrt_T: float

    @property
    def m(self) -> float:
        return abs(self.theta_sqrt_T)

    @property
    def degenerate(self) -> bool:
        return self.m == 0.0

    # -- threshold <-> u-coordinate ------------------------------------------

    def u_of_threshold(self, a: float) -> float:
        """u(a) = m/2 − ln(a)/m; decreasing bijection from (0,∞] to [−∞,∞)."""
        self._require_positive(a)
        if self.degenerate:
            raise ValueError("u-coordinate undefined for the degenerate model (theta = 0)")
        if math.isinf(a):
            return -math.inf
        return self.m / 2.0 - math.log(a) / self.m

    def threshold_of_u(self, u: float) -> float:
        """Inverse of :meth:`u_of_threshold`: a(u) = exp(m·(m/2 − u))."""
        if self.degenerate:
            raise ValueError("u-coordinate undefined for the degenerate model (theta = 0)")
        return math.exp(self.m * (self.m / 2.0 - u))

    # -- tail probabilities ----------------------------------------------------

    def prob_P_above(self, a: float) -> float:
        """P(ρ > a) = N(−m/2 − ln(a)/m); a = 0 and a = ∞ are exact limits."""
        self._require_nonnegative(a)
        if a == 0.0:
            return 1.0
        if self.degenerate:
            return 1.0 if a < 1.0 else 0.0
        if math.isinf(a):
            return 0.0
        return float(ndtr(-self.m / 2.0 - math.log(a) / self.m))

    def prob_Ptilde_above(self, a: float) -> float:
        """P̃(ρ > a) = E[ρ·1{ρ>a}] = N(+m/2 − ln(a)/m)."""
        self._require_nonnegative(a)
        if a == 0.0:
            return 1.0
        if self.degenerate:
            return 1.0 if a < 1.0 else 0.0
        if math.isinf(a):
            return 0.0
        return float(ndtr(self.m / 2.0 - math.log(a) / self.m))

    def prob_P_below(self, b: float) -> float:
        """P(ρ < b), computed from the complementary tail for full precision."""
        self._require_nonnegative(b)
        if b == 0.0:
            return 0.0
        if self.degenerate:
            return 1.0 if b > 1.0 else 0.0
        if math.isinf(b):
            return 1.0
        return float(ndtr(self.m / 2.0 + math.log(b) / self.m))

    def prob_Ptilde_below(self, b: float) -> float:
        """P̃(ρ < b)."""
        self._require_nonnegative(b)
        if b == 0.0:
            return 0.0
        if self.degenerate:
            return 1.0 if b > 1.0 else 0.0
        if math.isinf(b):
            return 1.0
        return float(ndtr(-self.m / 2.0 + math.log(b) / self.m))

    # -- u-space variants (used heavily by the solvers) ------------------------

    def prob_P_above_u(self, u: float) -> float:
        return float(ndtr(u - self.m))

    def prob_Ptilde_above_u(self, u: float) -> float:
        return float(ndtr(u))

    def prob_P_below_u(self, u: float) -> float:
        return float(ndtr(self.m - u))

    def prob_Ptilde_below_u(self, u: float) -> float:
        return float(ndtr(-u))

    # -- quantiles and extremes -------------------------------------------------

    def p_tail_quantile(self, p: float) -> float:
        """The threshold a with P(ρ > a) = p, inverting the P-tail analytically."""
        if not (0.0 < p < 1.0):
            raise ValueError(f"tail probability must lie in (0,1), got {p}")
        if self.degenerate:
            raise ValueError("tail quantile undefined for the degenerate model (theta = 0)")
        return math.exp(-self.m * (self.m / 2.0 + float(ndtri(p))))

    def ess_sup_rnd(self) -> float:
        """Essential supremum of ρ: +∞ for θ ≠ 0, and 1 for the degenerate model."""
        return 1.0 if self.degenerate else math.inf

    @staticmethod
    def _require_positive(a: float) -> None:
        if not (a > 0):
            raise ValueError(f"threshold must be > 0, got {a}")

    @staticmethod
    def _require_nonnegative(a: float) -> None:
        if not (a >= 0):
            raise ValueError(f"threshold must be >= 0, got {a}")


def rho_of_terminal_price(market: MarketParams, s_T):
    """ρ as a function of the terminal stock price S_T (vectorized).

    With W_T = (ln(S_T/S0) − (μ − σ²/2)T)/σ, this evaluates
    exp(−θ·W_T − θ²T/2).
    """
    theta = market.theta
    w = (
        np.log(np.asarray(s_T, dtype=float) / market.s0)
        - (market.mu - market.sigma**2 / 2.0) * market.T
    ) / market.sigma
    return np.exp(-theta * w - theta**2 * market.T / 2.0)


def terminal_price_of_rho(market: MarketParams, c: float) -> float:
    """The terminal stock price at which ρ equals the threshold c.

    For θ > 0, ρ is decreasing in S_T, so {ρ > c} = {S_T < K(c)} with K the
    value returned here; the degenerate thresholds map to K(∞) = 0 and
    K(0) = ∞.  Requires θ ≠ 0.
    """
    theta = market.theta
    if theta == 0.0:
        raise ValueError("price threshold undefined for theta = 0 (rho is constant)")
    if c < 0.0 or math.isnan(c):
        raise ValueError(f"threshold must be nonnegative (or inf), got {c}")
    if math.isinf(c):
        return 0.0 if theta > 0 else math.inf
    if c == 0.0:
        return math.inf if theta > 0 else 0.0
    w = -(math.log(c) + theta**2 * market.T / 2.0) / theta
    return market.s0 * math.exp(
        (market.mu - market.sigma**2 / 2.0) * market.T + market.sigma * w
    )
