"""Operator coefficients, the decay condition and growth-point extraction.

The operator under study is D_t + a_p(t) D_x^p + sum_j a_j(t, x) D_x^j with
real a_p bounded away from zero; the subprincipal coefficient a_{p-1} is the
one whose imaginary part drives everything here.  The central quantity is
the trajectory integral

    I(x, t, tau, rho) = integral_0^rho Im a_{p-1}(t, x + p a_p(tau) theta) dtheta

whose sup-min behaviour against M log(1 + rho) + N separates well-posed
from ill-posed coefficient families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (DegenerateSeedError, DomainError, OrderError,
                     SeedInvalidError, SeedNotFound)
from .fitting import LineFit, log1p_rho_fit, loglog_slope
from .quadrature import (CachedAntiderivative, QuadratureSpec,
                         cumulative_integral, simpson_integrate)


class Coefficient:
    """A lower-order coefficient a_j(t, x) with declared x-derivatives.

    ``value_fn(t, x)`` must broadcast over x; ``deriv_fn(t, x, k)`` returns
    the k-th x-derivative for k <= d_max.  ``deriv_sup`` certifies sup
    bounds per order (sampled for the built-in families).
    """

    def __init__(self, value_fn, deriv_fn=None, d_max: int = 12,
                 x_independent: bool = False, time_dependent: bool = False,
                 deriv_sup: dict | None = None, label: str = "custom"):
        self._value_fn = value_fn
        self._deriv_fn = deriv_fn
        self.d_max = int(d_max)
        self.x_independent = bool(x_independent)
        self.time_dependent = bool(time_dependent)
        self.label = label
        if deriv_sup is None:
            deriv_sup = self._sample_deriv_sup()
        self.deriv_sup = deriv_sup

    def _sample_deriv_sup(self, half_width: float = 60.0, nodes: int = 4801):
        xs = np.linspace(-half_width, half_width, nodes)
        sup = {}
        for k in range(self.d_max + 1):
            sup[k] = float(np.max(np.abs(self.deriv(0.0, xs, k))))
        return sup

    def value(self, t, x):
        return np.asarray(self._value_fn(t, np.asarray(x, dtype=float)),
                          dtype=complex)

    def deriv(self, t, x, k: int):
        if k == 0:
            return self.value(t, x)
        if k > self.d_max:
            raise OrderError(
                f"x-derivative order {k} exceeds declared d_max={self.d_max}")
        if self._deriv_fn is None:
            raise OrderError(f"coefficient {self.label!r} has no derivatives")
        return np.asarray(self._deriv_fn(t, np.asarray(x, dtype=float), k),
                          dtype=complex)

    def imag_value(self, t, x):
        return self.value(t, x).imag

    # -- built-in families --------------------------------------------------

    @staticmethod
    def zero(d_max: int = 12) -> "Coefficient":
        return Coefficient(lambda t, x: np.zeros_like(x, dtype=complex),
                           deriv_fn=lambda t, x, k: np.zeros_like(x, dtype=complex),
                           d_max=d_max, x_independent=True, label="zero",
                           deriv_sup={k: 0.0 for k in range(d_max + 1)})

    @staticmethod
    def constant(z, d_max: int = 12) -> "Coefficient":
        z = complex(z)
        sup = {k: 0.0 for k in range(d_max + 1)}
        sup[0] = abs(z)
        return Coefficient(lambda t, x: np.full_like(x, z, dtype=complex),
                           deriv_fn=lambda t, x, k: np.zeros_like(x, dtype=complex),
                           d_max=d_max, x_independent=True,
                           label=f"constant({z})", deriv_sup=sup)

    @staticmethod
    def imag_constant(c: float, d_max: int = 12) -> "Coefficient":
        return Coefficient.constant(1j * c, d_max=d_max)

    @staticmethod
    def imag_bump(c: float, d_max: int = 12) -> "Coefficient":
        """i c / (1 + x^2); derivatives from the complex partial fraction
        1/(1+x^2) = Im (x - i)^{-1}."""
        def deriv(t, x, k):
            w = (x - 1j) ** (-(k + 1))
            return 1j * c * (-1.0) ** k * math.factorial(k) * w.imag
        return Coefficient(lambda t, x: 1j * c / (1.0 + x ** 2),
                           deriv_fn=deriv, d_max=d_max,
                           label=f"imag_bump({c})")

    @staticmethod
    def imag_levi(c: float, d_max: int = 12) -> "Coefficient":
        """i c / sqrt(1 + x^2); derivatives from the ODE recurrence
        (1+x^2) f' = -x f."""
        def chain(x, k):
            f = [1.0 / np.sqrt(1.0 + x ** 2)]
            for j in range(k):
                prev2 = f[j - 1] if j >= 1 else np.zeros_like(x)
                nxt = (-(2 * j + 1) * x * f[j] - j * j * prev2) / (1.0 + x ** 2)
                f.append(nxt)
            return f[k]
        return Coefficient(lambda t, x: 1j * c / np.sqrt(1.0 + x ** 2),
                           deriv_fn=lambda t, x, k: 1j * c * chain(x, k),
                           d_max=d_max, label=f"imag_levi({c})")

    @staticmethod
    def from_table(xs, values, d_max: int = 3) -> "Coefficient":
        """Cubic-spline coefficient from tabulated complex values.

        Derivatives are spline derivatives, hence capped at order 3; the
        coefficient is extended by its edge values outside the table.
        """
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=complex)
        sp_re = CubicSpline(xs, values.real, bc_type="clamped")
        sp_im = CubicSpline(xs, values.imag, bc_type="clamped")
        lo, hi = xs[0], xs[-1]

        def val(t, x, k=0):
            xc = np.clip(x, lo, hi)
            out = sp_re(xc, k) + 1j * sp_im(xc, k)
            if k > 0:
                out = np.where((x < lo) | (x > hi), 0.0, out)
            return out

        return Coefficient(lambda t, x: val(t, x),
                           deriv_fn=lambda t, x, k: val(t, x, k),
                           d_max=min(d_max, 3), label="custom_table")


class CoefficientModel:
    """Data of the evolution operator: order p, horizon T, leading a_p(t)
    with lower bound m, and the lower-order coefficients a_0 .. a_{p-1}."""

    def __init__(self, p: int, T: float, ap, m: float, lower: list,
                 family: str = "custom"):
        if p < 2:
            raise DomainError("evolution order p must be >= 2")
        if T <= 0:
            raise DomainError("time horizon T must be positive")
        if len(lower) != p:
            raise DomainError(f"need exactly p={p} lower coefficients")
        self.p = int(p)
        self.T = float(T)
        if np.isscalar(ap):
            c = float(ap)
            self._ap = lambda t: np.full_like(np.asarray(t, dtype=float), c)
        else:
            self._ap = ap
        self.m = float(m)
        self.lower = list(lower)
        self.family = family
        ts = np.linspace(0.0, self.T, 513)
        vals = self.ap(ts)
        if np.min(np.abs(vals)) < self.m - 1e-12:
            raise DomainError(
                f"|a_p| dips to {np.min(np.abs(vals)):.3g} below m={self.m}")
        self.ap_sup = float(np.max(np.abs(vals)))
        self.ap_range = (float(np.min(vals)), float(np.max(vals)))
        self._A_p = None

    def ap(self, t):
        out = np.asarray(self._ap(np.asarray(t, dtype=float)), dtype=float)
        if np.isscalar(t) or np.ndim(t) == 0:
            return float(out)
        return out

    @property
    def subprincipal(self) -> Coefficient:
        return self.lower[self.p - 1]

    def im_sub(self, t, x):
        return self.subprincipal.imag_value(t, x)

    @property
    def A_p(self) -> CachedAntiderivative:
        """Cached antiderivative of a_p on [0, T]."""
        if self._A_p is None:
            self._A_p = CachedAntiderivative(self._ap, self.T)
        return self._A_p

    @property
    def c_p(self) -> float:
        return max(1.0, self.p * 2.0 ** (self.p - 1) * self.ap_sup)

    def with_negated_ap(self) -> "CoefficientModel":
        fn = self._ap
        return CoefficientModel(self.p, self.T, lambda t: -np.asarray(fn(t)),
                                self.m, self.lower, family=self.family)

    @classmethod
    def from_family(cls, family: str, p: int = 2, T: float = 1.0,
                    ap: float = 1.0, c: float = 1.0, m: float | None = None,
                    d_max: int = 12, table=None) -> "CoefficientModel":
        """Built-in coefficient families; only a_{p-1} is nonzero."""
        builders = {
            "zero": lambda: Coefficient.zero(d_max),
            "constant_imag": lambda: Coefficient.imag_constant(c, d_max),
            "decaying_imag": lambda: Coefficient.imag_bump(c, d_max),
            "levi_family": lambda: Coefficient.imag_levi(c, d_max),
        }
        if family == "custom_table":
            if table is None:
                raise DomainError("custom_table needs tabulated values")
            sub = Coefficient.from_table(*table)
        elif family in builders:
            sub = builders[family]()
        else:
            raise DomainError(f"unknown coefficient family {family!r}")
        lower = [Coefficient.zero(d_max) for _ in range(p - 1)] + [sub]
        if m is None:
            m = abs(ap) if np.isscalar(ap) else None
        return cls(p, T, ap, m, lower, family=family)


# ---------------------------------------------------------------------------
# trajectory integrals


def trajectory_integral(model: CoefficientModel, x: float, t: float,
                        tau: float, rho_lo: float, rho_hi: float,
                        quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Composite quadrature of theta -> Im a_{p-1}(t, x + p a_p(tau) theta)."""
    if not 0.0 <= tau <= t <= model.T:
        raise DomainError(f"need 0 <= tau <= t <= T, got tau={tau}, t={t}")
    if rho_lo > rho_hi:
        raise DomainError("rho_lo must not exceed rho_hi")
    if rho_lo == rho_hi:
        return 0.0
    theta = quad.nodes(rho_lo, rho_hi)
    vals = model.im_sub(t, x + model.p * model.ap(tau) * theta)
    return float(simpson_integrate(vals, theta[1] - theta[0]))


class _TriangleTable:
    """Trajectory integrals over an x-set and the (tau, t) triangle.

    Exploits that built-in coefficients are time independent and that a_p
    often takes few distinct values, so the integrand is evaluated once per
    distinct (t, a_p(tau)) pair.
    """

    def __init__(self, model: CoefficientModel, x_nodes, rho: float,
                 t_nodes: int, quad: QuadratureSpec):
        self.t_grid = np.linspace(0.0, model.T, t_nodes)
        ap_vals = model.ap(self.t_grid)
        self.c_vals, self.c_inverse = np.unique(model.p * ap_vals,
                                                return_inverse=True)
        sub = model.subprincipal
        self.t_eval = self.t_grid if sub.time_dependent else np.array([0.0])
        self.t_map = (np.arange(t_nodes) if sub.time_dependent
                      else np.zeros(t_nodes, dtype=int))
        x_nodes = np.atleast_1d(np.asarray(x_nodes, dtype=float))
        self.x_nodes = x_nodes
        theta = quad.nodes(0.0, rho)
        h = theta[1] - theta[0]
        # table[i_t_eval, i_c, i_x]
        self.table = np.empty((self.t_eval.size, self.c_vals.size, x_nodes.size))
        for it, te in enumerate(self.t_eval):
            for ic, cv in enumerate(self.c_vals):
                vals = sub.imag_value(te, x_nodes[:, None] + cv * theta[None, :])
                self.table[it, ic] = simpson_integrate(vals, h)

    def full(self) -> np.ndarray:
        """I[i_t, i_tau, i_x] on the full rectangle of grid indices."""
        return self.table[self.t_map[:, None], self.c_inverse[None, :], :]

    def triangle_min(self, stride: int = 1):
        """Min over {tau <= t} per x, plus the argmin pair (t, tau)."""
        idx = np.arange(self.t_grid.size)[::stride]
        vals = self.table[self.t_map[idx][:, None],
                          self.c_inverse[idx][None, :], :]
        mask = idx[:, None] < idx[None, :]   # tau index > t index: exclude
        vals = np.where(mask[:, :, None], np.inf, vals)
        flat = vals.reshape(-1, vals.shape[2])
        amin = np.argmin(flat, axis=0)
        mins = flat[amin, np.arange(flat.shape[1])]
        it, itau = np.unravel_index(amin, vals.shape[:2])
        return mins, self.t_grid[idx[it]], self.t_grid[idx[itau]]


@dataclass(frozen=True)
class SearchSpec:
    """x-window and (tau, t) triangle sampling for sup-min searches."""

    x_window: float = 100.0
    x_nodes: int = 81
    t_nodes: int = 33
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    fit_rtol: float = 0.1
    slope_threshold: float = 0.5
    sensitivity_rtol: float = 0.05

    def x_grid(self) -> np.ndarray:
        n = self.x_nodes + (1 - self.x_nodes % 2)  # odd, so 0 is a node
        return np.linspace(-self.x_window, self.x_window, n)


@dataclass
class ConditionReport:
    """Outcome of the logarithmic decay check over a radius grid."""

    rho_grid: np.ndarray
    sup_integrals: np.ndarray
    fitted_M: float
    fitted_N: float
    verdict: str                   # holds | violated | inconclusive
    bound_values: np.ndarray
    loglog_slope: float
    window_sensitive: bool
    refinement_delta: float
    fit_rtol: float
    x_window: float

    def residuals(self) -> np.ndarray:
        return self.sup_integrals - self.bound_values


def check_condition(model: CoefficientModel, rho_grid,
                    search: SearchSpec = SearchSpec()) -> ConditionReport:
    """sup over the x-window of the triangle-min trajectory integral per rho,
    fitted against M log(1 + rho) + N.

    Verdict: "violated" when the log-log residual slope of the sup values
    against rho reaches the threshold (superlogarithmic growth),
    "holds" when the fitted logarithmic bound covers every radius within
    tolerance, "inconclusive" otherwise (e.g. window-sensitive sup).
    """
    rho_grid = np.asarray(rho_grid, dtype=float)
    if rho_grid.size < 2 or np.any(np.diff(rho_grid) <= 0):
        raise DomainError("rho_grid must be increasing with >= 2 entries")
    if np.any(rho_grid <= 0):
        raise DomainError("rho_grid must be positive")
    xg = search.x_grid()
    half = np.abs(xg) <= search.x_window / 2.0
    sups = np.empty(rho_grid.size)
    sups_half = np.empty(rho_grid.size)
    refine = 0.0
    for i, rho in enumerate(rho_grid):
        table = _TriangleTable(model, xg, rho, search.t_nodes, search.quad)
        # the (CN2) integral runs over [-rho, rho]; assemble it as the sum of
        # the forward integral from x and the forward integral from the
        # reflected trajectory (change of variables theta -> -theta)
        mins_fwd, _, _ = table.triangle_min()
        table_b = _TriangleTable(model.with_negated_ap(), xg, rho,
                                 search.t_nodes, search.quad)
        mins_bwd, _, _ = table_b.triangle_min()
        full = table.full() + table_b.full()
        mask = np.arange(search.t_nodes)[:, None] < np.arange(search.t_nodes)[None, :]
        full = np.where(mask[:, :, None], np.inf, full)
        mins = np.min(full.reshape(-1, xg.size), axis=0)
        coarse = np.min(full[::2, ::2].reshape(-1, xg.size), axis=0)
        refine = max(refine, float(np.max(np.abs(
            np.max(mins) - np.max(coarse)))))
        sups[i] = float(np.max(mins))
        sups_half[i] = float(np.max(mins[half]))
        del mins_fwd, mins_bwd
    fit = log1p_rho_fit(rho_grid, sups)
    bound = fit.predict(np.log1p(rho_grid))
    slope = loglog_slope(rho_grid, sups)
    scale = max(1.0, float(np.max(np.abs(sups))))
    sensitive = bool(np.any(np.abs(sups - sups_half)
                            > search.sensitivity_rtol * scale))
    if slope >= search.slope_threshold:
        verdict = "violated"
    elif sensitive:
        verdict = "inconclusive"
    elif np.all(sups - bound <= search.fit_rtol * scale):
        verdict = "holds"
    else:
        verdict = "inconclusive"
    return ConditionReport(rho_grid, sups, fit.slope, fit.intercept, verdict,
                           bound, slope, sensitive, refine,
                           search.fit_rtol, search.x_window)


# ---------------------------------------------------------------------------
# violation witnesses and growth points


@dataclass(frozen=True)
class ViolationWitness:
    """A (y, delta) pair whose forward trajectory integral beats the
    logarithmic bound M log(1 + delta) + k on the sampled triangle."""

    y: float
    delta: float
    min_integral: float = math.nan
    bound: float = math.nan

    @property
    def margin(self) -> float:
        return self.min_integral - self.bound


@dataclass(frozen=True)
class SeedSearchSpec:
    delta0: float = 1.0
    delta_max: float = 4096.0
    y_window: float = 100.0
    y_nodes: int = 41
    t_nodes: int = 33
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)


def find_violation_seed(model: CoefficientModel, M_target: float, k: int,
                        search: SeedSearchSpec = SeedSearchSpec()) -> ViolationWitness:
    """Outer doubling loop on delta, inner scan on y; first witness wins."""
    ys = np.linspace(-search.y_window, search.y_window,
                     search.y_nodes + (1 - search.y_nodes % 2))
    delta = search.delta0
    while delta <= search.delta_max:
        bound = M_target * math.log1p(delta) + k
        table = _TriangleTable(model, ys, delta, search.t_nodes, search.quad)
        mins, _, _ = table.triangle_min()
        ok = mins >= bound
        if np.any(ok):
            best = int(np.argmax(np.where(ok, mins - bound, -np.inf)))
            return ViolationWitness(float(ys[best]), float(delta),
                                    float(mins[best]), float(bound))
        delta *= 2.0
    raise SeedNotFound(
        f"no (y, delta) witness up to delta={search.delta_max:g} for "
        f"M={M_target:g}, k={k}")


@dataclass
class GrowthPoint:
    """Point/radius pair from which localized mass growth is guaranteed.

    Extracted by shifting a violation seed past the minimum of the partial
    integral profile F(s); the profile and the verified margins ride along
    as diagnostics.
    """

    k: int
    M_target: float
    x: float
    rho: float
    s_shift: float
    delta: float
    y_seed: float
    t_star: float
    tau_star: float
    margin_lower_bound: float      # min over triangle of I(0, rho) - bound
    margin_positivity: float       # min over triangle and partial radii
    x_tau_spread: float            # residual tau-dependence of x
    F_s: np.ndarray = field(repr=False, default=None)
    F_values: np.ndarray = field(repr=False, default=None)


def extract_growth_point(model: CoefficientModel, M_target: float, k: int,
                         seed: ViolationWitness,
                         t_nodes: int = 33,
                         quad: QuadratureSpec = QuadratureSpec(),
                         tol: float = 1e-6) -> GrowthPoint:
    """Turn a violation witness into a growth point.

    Tabulates F(s) = integral_0^s Im a_{p-1}(t*, y + p a_p(tau*) theta)
    dtheta at the triangle argmin (tau*, t*), shifts past its minimizer and
    verifies the lower-bound and positivity inequalities on the sample grid.
    """
    bound = M_target * math.log1p(seed.delta) + k
    table = _TriangleTable(model, [seed.y], seed.delta, t_nodes, quad)
    mins, t_stars, tau_stars = table.triangle_min()
    if mins[0] < bound - tol:
        raise SeedInvalidError(
            f"seed integral {mins[0]:.6g} misses the bound {bound:.6g}")
    t_star, tau_star = float(t_stars[0]), float(tau_stars[0])

    theta = quad.nodes(0.0, seed.delta)
    h = theta[1] - theta[0]
    c_star = model.p * model.ap(tau_star)
    F = cumulative_integral(
        model.subprincipal.imag_value(t_star, seed.y + c_star * theta), h)
    s_idx = int(np.argmin(F))
    s_k = float(theta[s_idx])
    x_k = seed.y + model.p * s_k * model.ap(tau_star)
    rho_k = seed.delta - s_k
    if rho_k <= 0.0:
        raise DegenerateSeedError(
            f"shift s={s_k:g} consumed the whole radius delta={seed.delta:g}")

    # (ii): the shifted forward integral keeps beating the bound
    table2 = _TriangleTable(model, [x_k], rho_k, t_nodes, quad)
    mins2, _, _ = table2.triangle_min()
    margin_ii = float(mins2[0]) - (M_target * math.log1p(rho_k) + k)

    # (iii): every partial integral from x_k is nonnegative, for every
    # triangle pair (sampled through the distinct integrand combinations)
    theta2 = quad.nodes(0.0, rho_k)
    h2 = theta2[1] - theta2[0]
    margin_iii = math.inf
    for it, te in enumerate(table2.t_eval):
        for cv in table2.c_vals:
            prof = cumulative_integral(
                model.subprincipal.imag_value(te, x_k + cv * theta2), h2)
            margin_iii = min(margin_iii, float(np.min(prof)))

    ap_lo, ap_hi = model.ap_range
    return GrowthPoint(k=k, M_target=M_target, x=x_k, rho=float(rho_k),
                       s_shift=s_k, delta=seed.delta, y_seed=seed.y,
                       t_star=t_star, tau_star=tau_star,
                       margin_lower_bound=margin_ii,
                       margin_positivity=margin_iii,
                       x_tau_spread=model.p * s_k * (ap_hi - ap_lo),
                       F_s=theta, F_values=F)
