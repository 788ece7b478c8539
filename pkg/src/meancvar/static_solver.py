"""Threshold-system solvers for static Mean-CVaR portfolio selection.

The static problem is

    minimize   CVaR_λ(X)
    subject to E[X] ≥ z,   Ẽ[X] = x_r,   x_d ≤ X ≤ x_u,

over terminal payoffs X in a complete market with Radon-Nikodým derivative ρ.
Optimal payoffs, when they exist, are Two-Line or Three-Line configurations
on threshold events of ρ, characterized by small nonlinear systems:

* Bar-System (ā, z̄): the extreme payoff at the corridor bounds whose capital
  is exactly x_r; z̄ is the highest attainable expected return.
* Star-System (a*, x*, z*): optimum of the one-constraint (pure CVaR)
  problem, from the Euler condition 1/a = (λ − P(A))/(1 − P̃(A)).
* x_z1, x_z2: mid-levels at which the two degenerate Two-Line families meet
  the return target; the genuine Three-Line regime lives on (x_z1, x_z2).
* Double-Star System (a**, b**, x**): solves the return, capital and Euler
  conditions simultaneously for binding return targets z ∈ (z*, z̄].

Root-finding strategy: the outer variable is the mid-level x (Euler residual),
the middle variable is the lower threshold b (return constraint), and the
inner solve for the upper threshold a (capital constraint) is in closed form —
each level is monotone, so every 1-D search starts from a bracket whose sign
change is asserted before iterating.  Thresholds are searched in the u-space
coordinate of :mod:`meancvar.market`, which is exact for the degenerate limits
a → ∞ and b → 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from scipy.optimize import brentq
from scipy.special import log_ndtr, ndtr, ndtri

from . import configurations as cfgmod
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

_MAXITER = 200
_U_XTOL = 1e-13          # threshold tolerance in u-space (log-space scaled by 1/m)
_RESIDUAL_RTOL = 1e-10   # relative tolerance on constraint residuals


class CaseLabel(str, Enum):
    """Branch of the optimality dispatch that produced a Solution."""

    MONEY_MARKET_OPTIMAL = "MoneyMarketOptimal"
    NONEXISTENT_AT_MONEY_MARKET_LEVEL = "NonexistentAtMoneyMarketLevel"
    BAR_OPTIMAL = "BarOptimal"
    STAR_OPTIMAL = "StarOptimal"
    DOUBLE_STAR_OPTIMAL = "DoubleStarOptimal"
    NONEXISTENT_AT_STAR_LEVEL = "NonexistentAtStarLevel"
    INFEASIBLE_RETURN_TARGET = "InfeasibleReturnTarget"


_OPTIMAL_CASES = frozenset(
    {
        CaseLabel.MONEY_MARKET_OPTIMAL,
        CaseLabel.BAR_OPTIMAL,
        CaseLabel.STAR_OPTIMAL,
        CaseLabel.DOUBLE_STAR_OPTIMAL,
    }
)


class BracketError(RuntimeError):
    """A root bracket failed its sign-change assertion."""


class SolverContractError(RuntimeError):
    """A solved system violated its residual contract."""


class UsageError(ValueError):
    """An operation was invoked outside its applicable case."""


@dataclass(frozen=True)
class Diagnostics:
    """Reference quantities of the problem instance (None when not defined)."""

    a_bar: float | None = None
    z_bar: float | None = None
    a_star: float | None = None
    x_star: float | None = None
    z_star: float | None = None
    x_z1: float | None = None
    x_z2: float | None = None


class InfeasibleReturnError(ValueError):
    """The return target exceeds the highest attainable expected return z̄."""

    def __init__(self, z: float, z_bar: float, diagnostics: Diagnostics | None = None):
        super().__init__(
            f"return target z={z} exceeds the maximum attainable expected return z_bar={z_bar}"
        )
        self.z = z
        self.z_bar = z_bar
        self.diagnostics = diagnostics or Diagnostics(z_bar=z_bar)
        self.case_label = CaseLabel.INFEASIBLE_RETURN_TARGET


@dataclass(frozen=True)
class Solution:
    """Outcome of the optimality dispatch.

    ``config`` is present exactly when ``case_label`` is an optimal branch;
    in the nonexistence branches ``cvar`` still carries the (finite) infimum.
    """

    case_label: CaseLabel
    config: PayoffConfig | None
    cvar: float
    diagnostics: Diagnostics
    note: str | None = None

    def __post_init__(self) -> None:
        if (self.config is not None) != (self.case_label in _OPTIMAL_CASES):
            raise ValueError(
                f"config must be present iff the case is optimal, got {self.case_label}"
            )
        if not math.isfinite(self.cvar):
            raise ValueError(f"cvar must be finite, got {self.cvar}")


@dataclass(frozen=True)
class BarSystem:
    a_bar: float | None
    z_bar: float
    config: TwoLineLowUp | None


@dataclass(frozen=True)
class StarSystem:
    a_star: float
    x_star: float
    z_star: float
    cvar: float
    bar_dominant: bool
    config: PayoffConfig


@dataclass(frozen=True)
class DoubleStarSystem:
    a: float
    b: float
    x: float | None
    cvar: float
    config: PayoffConfig
    note: str | None = None


def _bracketed_root(f, lo: float, hi: float, what: str, xtol: float = _U_XTOL) -> float:
    """Brent's method after asserting a sign change on [lo, hi]."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if not (flo * fhi < 0.0):
        raise BracketError(
            f"no sign change bracketing {what}: f({lo!r})={flo!r}, f({hi!r})={fhi!r}"
        )
    return float(brentq(f, lo, hi, xtol=xtol, maxiter=_MAXITER))


class MeanCVaRSolver:
    """Static Mean-CVaR solver bound to a market and problem instance."""

    def __init__(self, market: MarketParams, spec: ProblemSpec):
        spec.validate(market)
        self.market = market
        self.spec = spec
        self.rnd = market.rnd()
        self.x_r = spec.x_r(market)
        self._bar: BarSystem | None = None
        self._star: StarSystem | None = None

    # ------------------------------------------------------------------ basics

    @property
    def _m(self) -> float:
        return self.rnd.m

    def _qbar(self) -> float:
        return (self.spec.x_u - self.x_r) / (self.spec.x_u - self.spec.x_d)

    def _residual_scale(self) -> float:
        x_u_eff = self.spec.x_u if math.isfinite(self.spec.x_u) else abs(self.x_r) + 1.0
        return max(1.0, abs(self.spec.x_d), abs(x_u_eff), abs(self.x_r))

    # ------------------------------------------------------------------ systems

    def solve_bar(self) -> BarSystem:
        """Bar-System (ā, z̄): corridor-bound payoff with capital exactly x_r.

        With x_u = ∞ every return level is attainable and z̄ = +∞ (ā is
        undefined); in the degenerate model ρ ≡ 1 only the constant payoff is
        feasible and z̄ = x_r.
        """
        if self._bar is not None:
            return self._bar
        spec = self.spec
        if math.isinf(spec.x_u):
            self._bar = BarSystem(a_bar=None, z_bar=math.inf, config=None)
            return self._bar
        if self.rnd.degenerate:
            self._bar = BarSystem(a_bar=None, z_bar=self.x_r, config=None)
            return self._bar
        u_bar = float(ndtri(self._qbar()))
        a_bar = self.rnd.threshold_of_u(u_bar)
        p_a = self.rnd.prob_P_above_u(u_bar)
        z_bar = spec.x_d * p_a + spec.x_u * (1.0 - p_a)
        config = TwoLineLowUp(a=a_bar, low=spec.x_d, up=spec.x_u)
        resid = cfgmod.capital(self.rnd, config) - self.x_r
        if abs(resid) > 1e-10 * (spec.x_u - spec.x_d):
            raise SolverContractError(f"Bar-System capital residual {resid} out of tolerance")
        self._bar = BarSystem(a_bar=a_bar, z_bar=z_bar, config=config)
        return self._bar

    def solve_star(self) -> StarSystem:
        """Star-System (a*, x*, z*): one-constraint (pure CVaR) optimum.

        Solves the Euler condition 1/a = (λ − P(A))/(1 − P̃(A)) for a*, then
        x* from the capital constraint.  When the corridor cap binds
        (x* ≥ x_u, equivalently 1/ā ≤ (λ − P(Ā))/(1 − P̃(Ā))), the Bar-System
        is the one-constraint optimum and z* = z̄.
        """
        if self._star is not None:
            return self._star
        if self.rnd.ess_sup_rnd() <= 1.0 / self.spec.lam:
            raise UsageError(
                "Star-System requires ess sup dP̃/dP > 1/λ; "
                "the degenerate model is handled by the money-market branch"
            )
        spec, m, lam = self.spec, self._m, self.spec.lam

        def euler_one_constraint(u: float) -> float:
            # P(A) + (1 - P̃(A))/a - λ, with (1-P̃(A))/a evaluated in log space
            return (
                float(ndtr(u - m))
                + math.exp(float(log_ndtr(-u)) + m * (u - m / 2.0))
                - lam
            )

        u_lo = -(2.0 * math.log(2.0 / lam) / m + m + 40.0)
        u_hi = m + 40.0
        u_star = _bracketed_root(euler_one_constraint, u_lo, u_hi, "Star-System Euler condition")
        a_star = self.rnd.threshold_of_u(u_star)
        q_a = self.rnd.prob_Ptilde_above_u(u_star)
        p_a = self.rnd.prob_P_above_u(u_star)
        x_star = (self.x_r - spec.x_d * q_a) / (1.0 - q_a)

        if math.isfinite(spec.x_u) and x_star >= spec.x_u:
            bar = self.solve_bar()
            assert bar.config is not None
            star_cvar = cfgmod.cvar(self.rnd, bar.config, lam)
            self._star = StarSystem(
                a_star=a_star,
                x_star=x_star,
                z_star=bar.z_bar,
                cvar=star_cvar,
                bar_dominant=True,
                config=bar.config,
            )
            return self._star

        z_star = spec.x_d * p_a + x_star * (1.0 - p_a)
        star_cvar = ((x_star - spec.x_d) * p_a - lam * x_star) / lam
        config = TwoLineLowMid(a=a_star, low=spec.x_d, mid=x_star)
        resid = cfgmod.capital(self.rnd, config) - self.x_r
        if abs(resid) > _RESIDUAL_RTOL * self._residual_scale():
            raise SolverContractError(f"Star-System capital residual {resid} out of tolerance")
        self._star = StarSystem(
            a_star=a_star,
            x_star=x_star,
            z_star=z_star,
            cvar=star_cvar,
            bar_dominant=False,
            config=config,
        )
        return self._star

    # ------------------------------------------------- degenerate two-line maps

    def _require_three_line_setting(self) -> None:
        if self.rnd.degenerate:
            raise UsageError("threshold systems require theta != 0")
        if math.isinf(self.spec.x_u):
            raise UsageError("this operation requires a finite upper bound x_u")

    def _check_z_range(self, z: float) -> None:
        z_bar = self.solve_bar().z_bar
        if z > z_bar:
            raise InfeasibleReturnError(z, z_bar, self._base_diagnostics())
        if z < self.x_r:
            raise UsageError(f"z={z} below x_r={self.x_r}; the return constraint needs z >= x_r")

    def _deg1_return(self, x: float) -> float:
        """Expected return of the mid/up Two-Line with capital x_r, mid-level x."""
        spec = self.spec
        q_b = (spec.x_u - self.x_r) / (spec.x_u - x)
        if q_b >= 1.0:
            return x
        u_b = float(ndtri(q_b))
        p_b = self.rnd.prob_P_above_u(u_b)
        return x * p_b + spec.x_u * (1.0 - p_b)

    def _deg1_u(self, x: float) -> float:
        q_b = (self.spec.x_u - self.x_r) / (self.spec.x_u - x)
        return float(ndtri(min(q_b, 1.0)))

    def _deg2_return(self, x: float) -> float:
        """Expected return of the low/mid Two-Line with capital x_r, mid-level x."""
        spec = self.spec
        if x <= self.x_r:
            return self.x_r
        q_a = (x - self.x_r) / (x - spec.x_d)
        u_a = float(ndtri(q_a))
        p_a = self.rnd.prob_P_above_u(u_a)
        return spec.x_d * p_a + x * (1.0 - p_a)

    def _deg2_u(self, x: float) -> float:
        q_a = (x - self.x_r) / (x - self.spec.x_d)
        return float(ndtri(max(q_a, 0.0)))

    def x_z1(self, z: float) -> float:
        """Mid-level of the mid/up Two-Line meeting E[X] = z; decreasing in z."""
        self._require_three_line_setting()
        self._check_z_range(z)
        spec = self.spec
        if z == self.x_r:
            return self.x_r
        x = _bracketed_root(
            lambda t: self._deg1_return(t) - z, spec.x_d, self.x_r, "x_z1 return equation",
            xtol=1e-12,
        )
        return x

    def x_z2(self, z: float) -> float:
        """Mid-level of the low/mid Two-Line meeting E[X] = z; increasing in z."""
        self._require_three_line_setting()
        self._check_z_range(z)
        spec = self.spec
        if z == self.x_r:
            return self.x_r
        x = _bracketed_root(
            lambda t: self._deg2_return(t) - z, self.x_r, spec.x_u, "x_z2 return equation",
            xtol=1e-12,
        )
        return x

    # -------------------------------------------------------- three-line system

    def _three_line_u(self, x: float, z: float) -> tuple[float, float]:
        """Solve the Three-Line system at fixed mid-level: returns (u_a, u_b).

        The capital constraint pins N(u_a) as a linear function of N(u_b), so
        only the return constraint needs a 1-D search (on u_b).  The search
        domain starts at the Bar collapse u_b = ū (where a = b = ā and the
        return is z̄) and the return decreases continuously in u_b, giving a
        guaranteed bracket for any attainable z.
        """
        spec = self.spec
        if not (spec.x_d < x < spec.x_u):
            raise UsageError(f"mid-level x={x} must lie strictly inside ({spec.x_d}, {spec.x_u})")
        m = self._m
        u_bar = float(ndtri(self._qbar()))

        def q_a_of_q_b(q_b: float) -> float:
            return (x * q_b + spec.x_u * (1.0 - q_b) - self.x_r) / (x - spec.x_d)

        def return_of_ub(u_b: float) -> float:
            q_b = float(ndtr(u_b))
            q_a = q_a_of_q_b(q_b)
            u_a = float(ndtri(q_a)) if q_a > 0.0 else -math.inf
            p_a = float(ndtr(u_a - m))
            p_b = float(ndtr(u_b - m))
            return spec.x_d * p_a + x * (p_b - p_a) + spec.x_u * (1.0 - p_b)

        u_b = _bracketed_root(
            lambda u: return_of_ub(u) - z, u_bar, 40.0, "Three-Line return constraint"
        )
        q_a = q_a_of_q_b(float(ndtr(u_b)))
        if not (0.0 < q_a <= 1.0):
            raise SolverContractError(
                f"Three-Line capital solve left the unit interval: N(u_a)={q_a} at x={x}, z={z}"
            )
        u_a = float(ndtri(q_a))
        if u_a > u_bar + 1e-9:
            raise SolverContractError(f"Three-Line ordering violated: u_a={u_a} > u_bar={u_bar}")
        return u_a, u_b

    def solve_three_line_given_x(self, x: float, z: float) -> tuple[float, float]:
        """Thresholds (a, b) of the Three-Line payoff with mid-level x and E[X] = z.

        Satisfies b ≤ ā ≤ a, with both the capital and return residuals
        checked against the solver contract.
        """
        self._require_three_line_setting()
        self._check_z_range(z)
        u_a, u_b = self._three_line_u(x, z)
        a = self.rnd.threshold_of_u(u_a)
        b = self.rnd.threshold_of_u(u_b)
        config = ThreeLine(a=a, b=b, low=self.spec.x_d, mid=x, up=self.spec.x_u)
        scale = self._residual_scale()
        cap_resid = cfgmod.capital(self.rnd, config) - self.x_r
        ret_resid = cfgmod.expected_return(self.rnd, config) - z
        if abs(cap_resid) > _RESIDUAL_RTOL * scale or abs(ret_resid) > _RESIDUAL_RTOL * scale:
            raise SolverContractError(
                f"Three-Line residuals out of tolerance: capital {cap_resid}, return {ret_resid}"
            )
        return a, b

    def euler_residual(self, x: float, z: float) -> float:
        """P(A) + (P̃(B) − b·P(B))/(a − b) − λ at the Three-Line solution for (x, z).

        Tends to −λ as x approaches x_z1 from above; a sign change on
        (x_z1, x_z2) exists exactly when the return target is binding
        (z > z*).
        """
        u_a, u_b = self._three_line_u(x, z)
        m = self._m
        a = self.rnd.threshold_of_u(u_a)
        b = self.rnd.threshold_of_u(u_b)
        if a == b:
            raise UsageError("Euler residual undefined at the Bar collapse (z = z_bar)")
        p_a = float(ndtr(u_a - m))
        p_b = float(ndtr(u_b - m)) - p_a
        q_b = float(ndtr(u_b)) - float(ndtr(u_a))
        return p_a + (q_b - b * p_b) / (a - b) - self.spec.lam

    def solve_double_star(
        self, z: float, x_bracket: tuple[float, float] | None = None
    ) -> DoubleStarSystem:
        """Double-Star System (a**, b**, x**) for a binding return target.

        Finds the root of the Euler residual in the mid-level x over
        (x_z1, x_z2).  At z = z̄ the Three-Line payoff collapses to the
        Bar-System (detected as a − b below threshold) and the Bar config is
        returned with a note.
        """
        self._require_three_line_setting()
        self._check_z_range(z)
        star = self.solve_star()
        if z <= star.z_star:
            raise UsageError(
                f"z={z} is not binding (z* = {star.z_star}); use the Star/Bar branch"
            )
        bar = self.solve_bar()
        scale = max(1.0, abs(bar.z_bar))
        if z >= bar.z_bar - 1e-9 * scale:
            assert bar.config is not None and bar.a_bar is not None
            return DoubleStarSystem(
                a=bar.a_bar,
                b=bar.a_bar,
                x=None,
                cvar=cfgmod.cvar(self.rnd, bar.config, self.spec.lam),
                config=bar.config,
                note="collapsed to the Bar-System at z = z_bar",
            )

        x_lo_full = self.x_z1(z)
        x_hi_full = self.x_z2(z)
        width = x_hi_full - x_lo_full
        lo = x_lo_full + 1e-9 * width
        hi = x_hi_full - 1e-9 * width
        if x_bracket is not None:
            cand_lo = max(lo, x_bracket[0])
            cand_hi = min(hi, x_bracket[1])
            if cand_lo < cand_hi:
                f_lo = self.euler_residual(cand_lo, z)
                f_hi = self.euler_residual(cand_hi, z)
                if f_lo < 0.0 < f_hi:
                    lo, hi = cand_lo, cand_hi

        f = lambda t: self.euler_residual(t, z)
        f_hi = f(hi)
        if f_hi <= 0.0:
            # Root pinned against x_z2 within bracket padding: the optimum is
            # the low/mid Two-Line limit (b → 0), continuous with the
            # Star-System as z decreases to z*.
            x_opt = x_hi_full
            u_a = self._deg2_u(x_opt)
            a = self.rnd.threshold_of_u(u_a)
            config = TwoLineLowMid(a=a, low=self.spec.x_d, mid=x_opt)
            p_a = self.rnd.prob_P_above_u(u_a)
            cvar_val = ((x_opt - self.spec.x_d) * p_a - self.spec.lam * x_opt) / self.spec.lam
            return DoubleStarSystem(
                a=a, b=0.0, x=x_opt, cvar=cvar_val, config=config,
                note="Euler root at the x_z2 boundary; Two-Line limit returned",
            )
        x_opt = _bracketed_root(f, lo, hi, "Double-Star Euler condition", xtol=1e-11)
        u_a, u_b = self._three_line_u(x_opt, z)
        a = self.rnd.threshold_of_u(u_a)
        b = self.rnd.threshold_of_u(u_b)
        if a - b < 1e-9:
            bar = self.solve_bar()
            assert bar.config is not None and bar.a_bar is not None
            return DoubleStarSystem(
                a=bar.a_bar,
                b=bar.a_bar,
                x=None,
                cvar=cfgmod.cvar(self.rnd, bar.config, self.spec.lam),
                config=bar.config,
                note="collapsed to the Bar-System at z = z_bar",
            )
        p_a = self.rnd.prob_P_above_u(u_a)
        cvar_val = ((x_opt - self.spec.x_d) * p_a - self.spec.lam * x_opt) / self.spec.lam
        config = ThreeLine(a=a, b=b, low=self.spec.x_d, mid=x_opt, up=self.spec.x_u)
        return DoubleStarSystem(a=a, b=b, x=x_opt, cvar=cvar_val, config=config)

    # ------------------------------------------------------------- step 1 value

    def v_of_x(self, x: float, z: float) -> tuple[float, PayoffConfig]:
        """Minimal expected shortfall v(x) = inf E[(x − X)^+] and a minimizer.

        Piecewise in x: zero up to x_z1 (some feasible payoff dominates x),
        the Three-Line solution on (x_z1, x_z2), the low/mid Two-Line on
        [x_z2, x_u], and the Bar-System beyond the corridor cap.  Convex in x.
        """
        self._require_three_line_setting()
        self._check_z_range(z)
        spec = self.spec
        x_lo = self.x_z1(z)
        if x <= x_lo:
            u_b = self._deg1_u(x_lo)
            config = TwoLineMidUp(b=self.rnd.threshold_of_u(u_b), mid=x_lo, up=spec.x_u)
            return 0.0, config
        x_hi = self.x_z2(z)
        if x < x_hi:
            a, b = self.solve_three_line_given_x(x, z)
            p_a = self.rnd.prob_P_above(a)
            return (x - spec.x_d) * p_a, ThreeLine(a=a, b=b, low=spec.x_d, mid=x, up=spec.x_u)
        if x <= spec.x_u:
            u_a = self._deg2_u(x)
            p_a = self.rnd.prob_P_above_u(u_a)
            config = TwoLineLowMid(a=self.rnd.threshold_of_u(u_a), low=spec.x_d, mid=x)
            return (x - spec.x_d) * p_a, config
        bar = self.solve_bar()
        assert bar.config is not None
        p_a = self.rnd.prob_P_above(bar.config.a)
        value = (x - spec.x_d) * p_a + (x - spec.x_u) * (1.0 - p_a)
        return value, bar.config

    # ------------------------------------------------------------------ dispatch

    def _base_diagnostics(self) -> Diagnostics:
        bar = self.solve_bar()
        diag = Diagnostics(a_bar=bar.a_bar, z_bar=bar.z_bar)
        if not self.rnd.degenerate:
            star = self.solve_star()
            diag = replace(
                diag, a_star=star.a_star, x_star=star.x_star, z_star=star.z_star
            )
        return diag

    def solve_main(self) -> Solution:
        """Full optimality dispatch for the bound problem instance.

        Returns a Solution for every solvable or nonexistence case; raises
        :class:`InfeasibleReturnError` when the return target exceeds z̄
        (infeasibility is a first-class error, never a silent clamp).
        """
        spec = self.spec
        z_req = spec.z
        z_eff = self.x_r if z_req is None else max(z_req, self.x_r)
        diag = self._base_diagnostics()

        if self.rnd.degenerate:
            # ρ ≡ 1 makes E ≡ Ẽ: only z ≤ x_r is attainable and the
            # risk-free payoff is optimal.
            if z_eff <= self.x_r:
                return Solution(
                    case_label=CaseLabel.MONEY_MARKET_OPTIMAL,
                    config=ConstantPayoff(level=self.x_r),
                    cvar=-self.x_r,
                    diagnostics=diag,
                )
            raise InfeasibleReturnError(z_eff, self.solve_bar().z_bar, diag)

        bar = self.solve_bar()
        if z_eff > bar.z_bar:
            raise InfeasibleReturnError(z_eff, bar.z_bar, diag)
        star = self.solve_star()

        if z_eff <= star.z_star:
            if star.bar_dominant:
                return Solution(
                    case_label=CaseLabel.BAR_OPTIMAL,
                    config=star.config,
                    cvar=star.cvar,
                    diagnostics=diag,
                )
            return Solution(
                case_label=CaseLabel.STAR_OPTIMAL,
                config=star.config,
                cvar=star.cvar,
                diagnostics=diag,
            )

        if math.isinf(spec.x_u):
            return Solution(
                case_label=CaseLabel.NONEXISTENT_AT_STAR_LEVEL,
                config=None,
                cvar=star.cvar,
                diagnostics=diag,
                note=(
                    "no optimal payoff exists for a binding return target without an "
                    "upper bound; the stated cvar is the unattained infimum"
                ),
            )

        ds = self.solve_double_star(z_eff)
        diag = replace(diag, x_z1=self.x_z1(z_eff), x_z2=self.x_z2(z_eff))
        # x is None only when the Three-Line system collapsed at z = z_bar,
        # where the optimum is the Bar-System payoff.
        label = CaseLabel.BAR_OPTIMAL if ds.x is None else CaseLabel.DOUBLE_STAR_OPTIMAL
        return Solution(
            case_label=label,
            config=ds.config,
            cvar=ds.cvar,
            diagnostics=diag,
            note=ds.note,
        )

    # ---------------------------------------------------------- ε-suboptimality

    def epsilon_suboptimal(self, eps: float) -> PayoffConfig:
        """An explicit payoff within eps of the CVaR infimum in a nonexistence case.

        Only the unbounded-corridor nonexistence case is reachable for this
        market family: the construction keeps the Star-System upper threshold,
        lowers the mid-level to x_ε = x* − δ with δ = λ·ε/(λ − P(A*)), and
        adds a high payoff α_ε on a small cheap-state event D chosen so both
        constraints hold exactly.  The effective ε is capped so the mid-level
        stays above x_d; the achieved gap never exceeds the requested eps.
        """
        if not (eps > 0.0) or not math.isfinite(eps):
            raise ValueError(f"eps must be a positive finite number, got {eps}")
        spec = self.spec
        z_req = spec.z
        z_eff = self.x_r if z_req is None else max(z_req, self.x_r)

        if self.rnd.degenerate:
            if z_eff <= self.x_r:
                raise UsageError("an optimal payoff exists (money-market case)")
            raise InfeasibleReturnError(z_eff, self.solve_bar().z_bar, self._base_diagnostics())
        if math.isfinite(spec.x_u):
            bar = self.solve_bar()
            if z_eff > bar.z_bar:
                raise InfeasibleReturnError(z_eff, bar.z_bar, self._base_diagnostics())
            raise UsageError("an optimal payoff exists for finite x_u; nothing to approximate")
        star = self.solve_star()
        if z_eff <= star.z_star:
            raise UsageError("an optimal payoff exists (Star-System case)")

        m, lam = self._m, spec.lam
        u_a = self.rnd.u_of_threshold(star.a_star)
        p_a = self.rnd.prob_P_above_u(u_a)
        q_a = self.rnd.prob_Ptilde_above_u(u_a)
        p_B = 1.0 - p_a
        q_B = 1.0 - q_a
        gamma = z_eff - star.z_star

        delta_cap = (star.x_star - spec.x_d) * (1.0 - 1e-9)
        # target slightly inside the requested gap so roundoff in the CVaR
        # evaluation can never push the achieved gap over eps
        eps_eff = min(eps * (1.0 - 1e-3), delta_cap * (lam - p_a) / lam)
        delta = lam * eps_eff / (lam - p_a)
        x_eps = star.x_star - delta
        target = q_B / (gamma / delta + p_B)

        def dtail_ratio(u: float) -> float:
            # P̃(D)/P(D) for D = {ρ < b(u)}: E[ρ | ρ < b], decreasing in u.
            return float(ndtr(-u)) / float(ndtr(m - u))

        u_hi = u_a + 1.0
        while dtail_ratio(u_hi) > target:
            u_hi += 1.0
        u_b = _bracketed_root(
            lambda u: dtail_ratio(u) - target, u_a, u_hi, "ε-construction tail-ratio equation"
        )
        q_D = self.rnd.prob_Ptilde_below_u(u_b)
        alpha = x_eps + delta * q_B / q_D
        config = ThreeLine(
            a=star.a_star, b=self.rnd.threshold_of_u(u_b), low=spec.x_d, mid=x_eps, up=alpha
        )
        self._assert_eps_contract(config, z_eff, star.cvar, eps)
        return config

    def _assert_eps_contract(
        self, config: PayoffConfig, z_eff: float, infimum: float, eps: float
    ) -> None:
        scale = max(1.0, abs(self.x_r), abs(z_eff))
        cap_resid = cfgmod.capital(self.rnd, config) - self.x_r
        ret_resid = cfgmod.expected_return(self.rnd, config) - z_eff
        if abs(cap_resid) > 1e-8 * scale or abs(ret_resid) > 1e-8 * scale:
            raise SolverContractError(
                f"ε-construction residuals out of tolerance: capital {cap_resid}, "
                f"return {ret_resid}"
            )
        gap = cfgmod.cvar(self.rnd, config, self.spec.lam) - infimum
        if gap > eps * (1.0 + 1e-9) + 1e-12:
            raise SolverContractError(f"ε-construction gap {gap} exceeds eps={eps}")


def two_line_epsilon_config(
    market: MarketParams, x_0: float, z: float, eps: float, lam: float
) -> TwoLineLowMid:
    """Two-Line payoff within eps of the −x_r CVaR infimum for a binding target.

    This is the explicit construction for the nonexistence case in which the
    essential supremum of ρ is at most 1/λ: lower the payoff to x_ε = x_r − ε
    on the expensive states A and finance a high level α_ε on the rest, with
    the threshold chosen so that P̃(B)/P(B) = ε/(γ + ε), γ = z − x_r.  The
    achieved CVaR is −x_r + ε and both constraints hold exactly.

    The threshold equation requires a non-degenerate ρ, so the function is
    exercised directly with θ ≠ 0 market parameters; the dispatch itself never
    reaches this case for the lognormal family (θ = 0 forces z̄ = x_r, making
    binding targets infeasible rather than approachable).  The effective ε is
    reduced when necessary so that the achieved gap never exceeds eps.
    """
    rnd = market.rnd()
    if rnd.degenerate:
        raise UsageError("the Two-Line ε-construction needs a non-degenerate ρ (theta != 0)")
    if not (eps > 0.0) or not math.isfinite(eps):
        raise ValueError(f"eps must be a positive finite number, got {eps}")
    x_r = market.grow(x_0)
    gamma = z - x_r
    if gamma <= 0.0:
        raise UsageError(f"the construction needs a binding target z > x_r, got z={z}")
    m = rnd.m

    def band_ratio(u: float) -> float:
        # P̃(B)/P(B) for B = {ρ ≤ a(u)}: E[ρ | ρ ≤ a], decreasing in u.
        return float(ndtr(-u)) / float(ndtr(m - u))

    eps_eff = eps
    for _ in range(200):
        target = eps_eff / (gamma + eps_eff)
        u_lo = -1.0
        while band_ratio(u_lo) < target:
            u_lo -= 1.0
        u_hi = 1.0
        while band_ratio(u_hi) > target:
            u_hi += 1.0
        u_a = _bracketed_root(
            lambda u: band_ratio(u) - target, u_lo, u_hi, "ε-construction band-ratio equation"
        )
        x_eps = x_r - eps_eff
        q_a = rnd.prob_Ptilde_above_u(u_a)
        q_B = rnd.prob_Ptilde_below_u(u_a)
        alpha = x_r + eps_eff * q_a / q_B
        config = TwoLineLowMid(a=rnd.threshold_of_u(u_a), low=x_eps, mid=alpha)
        gap = cfgmod.cvar(rnd, config, lam) - (-x_r)
        if gap <= eps * (1.0 + 1e-9):
            scale = max(1.0, abs(x_r), abs(z))
            cap_resid = cfgmod.capital(rnd, config) - x_r
            ret_resid = cfgmod.expected_return(rnd, config) - z
            if abs(cap_resid) > 1e-8 * scale or abs(ret_resid) > 1e-8 * scale:
                raise SolverContractError(
                    f"ε-construction residuals out of tolerance: capital {cap_resid}, "
                    f"return {ret_resid}"
                )
            return config
        eps_eff /= 2.0
    raise SolverContractError("ε-construction failed to meet the gap contract")
