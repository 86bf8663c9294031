"""Hamilton-flow localizer symbols and their diagnostics.

The basic object is the two-factor symbol

    w^(a,b)(t, x, xi) = rho^(1/2) h^(a)(rho (x - x0 - p A(t) xi^(p-1)))
                                  h^(b)(rho^mu (xi/n - 1)),

a plateau cutoff transported along the characteristics of a_p(t) xi^p and a
narrow frequency cutoff around xi = n.  The first argument is a polynomial
in xi, so xi-derivatives run through a Bell-polynomial chain rule with the
exact cutoff derivatives; x-derivatives just shift the first factor's order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientModel
from .cutoffs import SmoothCutoff
from .errors import DomainError, OrderError
from .grid import SymbolGrid2D
from .psdo import GridSample, Multiplier, Symbol


def _bell_polynomials(z_derivs: list, m: int) -> list:
    """Partial Bell polynomials B_{m,s}(z1, ..., z_{m-s+1}) as arrays.

    ``z_derivs[j-1]`` holds the j-th derivative of the inner function;
    returns a table bell[mm][s] for mm <= m.
    """
    zero = 0.0
    bell = [[1.0 if (mm == 0) else zero for _ in range(m + 1)]
            for mm in range(m + 1)]
    for mm in range(1, m + 1):
        bell[mm][0] = zero
        for s in range(1, mm + 1):
            acc = None
            for j in range(1, mm - s + 2):
                zj = z_derivs[j - 1]
                if np.isscalar(zj) and zj == 0.0:
                    continue
                term = math.comb(mm - 1, j - 1) * zj * bell[mm - j][s - 1]
                acc = term if acc is None else acc + term
            bell[mm][s] = 0.0 if acc is None else acc
    return bell


class FlowLocalizedSymbol(Symbol):
    """amplitude * h^(alpha)(lam1 (x - x0 - p A(t) xi^(p-1))) and optionally
    * h^(beta)(lam2 (xi - n)); exact mixed derivatives of any declared order."""

    def __init__(self, cutoff: SmoothCutoff, p: int, A_p, x0: float,
                 lam1: float, alpha: int = 0, amplitude: float = 1.0,
                 n: float | None = None, lam2: float | None = None,
                 beta: int = 0, support_pad: float = 0.0):
        self.cutoff = cutoff
        self.p = int(p)
        self.A_p = A_p
        self.x0 = float(x0)
        self.lam1 = float(lam1)
        self.alpha = int(alpha)
        self.amplitude = float(amplitude)
        self.n = None if n is None else float(n)
        self.lam2 = None if lam2 is None else float(lam2)
        self.beta = int(beta)
        self.support_pad = float(support_pad)

    # -- argument helpers ----------------------------------------------------

    def _arg1(self, t, x, xi):
        return self.lam1 * (x - self.x0
                            - self.p * self.A_p(t) * xi ** (self.p - 1))

    def _arg1_xi_derivs(self, t, xi, count: int):
        """j-th xi-derivatives of the first argument, j = 1..count."""
        coeff = -self.lam1 * self.p * self.A_p(t)
        out = []
        for j in range(1, count + 1):
            r = self.p - 1 - j
            if r < 0:
                out.append(0.0)
            else:
                out.append(coeff * math.perm(self.p - 1, j) * xi ** r)
        return out

    def _arg2(self, xi):
        return self.lam2 * (xi - self.n)

    # -- Symbol protocol -----------------------------------------------------

    def value(self, t, x, xi):
        return self.deriv(t, x, xi, 0, 0)

    def deriv(self, t, x, xi, dx=0, dxi=0):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        a_eff = self.alpha + dx
        need1 = a_eff + dxi
        need2 = self.beta + dxi
        if need1 > self.cutoff.d_max or need2 > self.cutoff.d_max:
            raise OrderError(
                f"requested order needs h^({max(need1, need2)}) but "
                f"d_max={self.cutoff.d_max}")
        z = self._arg1(t, x, xi)
        h1 = self.cutoff.deriv_stack(z, need1)
        amp = self.amplitude * self.lam1 ** dx
        if self.lam2 is None:
            if dxi == 0:
                return amp * h1[a_eff]
            zj = self._arg1_xi_derivs(t, xi, dxi)
            bell = _bell_polynomials(zj, dxi)
            acc = 0.0
            for s in range(1, dxi + 1):
                acc = acc + h1[a_eff + s] * bell[dxi][s]
            return amp * acc

        w2 = self._arg2(xi)
        h2 = self.cutoff.deriv_stack(w2, need2)
        if dxi == 0:
            return amp * h1[a_eff] * h2[self.beta]
        zj = self._arg1_xi_derivs(t, xi, dxi)
        bell = _bell_polynomials(zj, dxi)
        out = 0.0
        for g1 in range(dxi + 1):
            g2 = dxi - g1
            if g1 == 0:
                f1 = h1[a_eff]
            else:
                f1 = 0.0
                for s in range(1, g1 + 1):
                    f1 = f1 + h1[a_eff + s] * bell[g1][s]
            f2 = self.lam2 ** g2 * h2[self.beta + g2]
            out = out + math.comb(dxi, g1) * f1 * f2
        return amp * out

    def x_support(self, t):
        if self.lam2 is None:
            return None
        half = 0.5 / abs(self.lam1)
        lo_xi, hi_xi = self.xi_support(t)
        drift = [self.p * self.A_p(t) * lo_xi ** (self.p - 1),
                 self.p * self.A_p(t) * hi_xi ** (self.p - 1)]
        pad = self.support_pad + half * 0.1
        return (self.x0 + min(drift) - half - pad,
                self.x0 + max(drift) + half + pad)

    def xi_support(self, t):
        if self.lam2 is None:
            return None
        half = 0.5 / abs(self.lam2)
        pad = self.support_pad + 0.1 * half
        return (self.n - half - pad, self.n + half + pad)


@dataclass(frozen=True)
class TransportBox:
    """Support box riding the Hamiltonian flow."""

    x_center: float
    x_halfwidth: float
    xi_center: float
    xi_halfwidth: float

    def outside(self, x, xi):
        return ((np.abs(np.asarray(x) - self.x_center) > self.x_halfwidth)
                | (np.abs(np.asarray(xi) - self.xi_center) > self.xi_halfwidth))


class LocalizerFamily:
    """All localizer symbols attached to one growth point.

    Carries (x0, rho) plus the exponents (a, mu); the packet frequency
    defaults to n = rho^a but can be overridden (the scale-substituted
    experiments cap it).  Evaluators share the model's cached antiderivative
    of a_p and the plateau cutoff's exact derivatives.
    """

    def __init__(self, model: CoefficientModel, x0: float, rho: float,
                 a: float, mu: float, cutoff: SmoothCutoff,
                 n: float | None = None, order_cap: int | None = None):
        if rho <= 0:
            raise DomainError("rho must be positive")
        self.model = model
        self.x0 = float(x0)
        self.rho = float(rho)
        self.a = float(a)
        self.mu = float(mu)
        self.cutoff = cutoff
        self.n = float(rho ** a if n is None else n)
        self.order_cap = order_cap
        self.p = model.p
        self.A_p = model.A_p
        self.c_p = model.c_p

    @property
    def t_horizon(self) -> float:
        """rho / n^(p-1), the window on which the support box is guaranteed."""
        return self.rho / self.n ** (self.p - 1)

    def drift_center(self, t) -> float:
        return self.x0 + self.p * self.A_p(t) * self.n ** (self.p - 1)

    def symbol(self, alpha: int = 0, beta: int = 0) -> FlowLocalizedSymbol:
        if self.order_cap is not None and alpha + beta > self.order_cap:
            raise OrderError(
                f"alpha+beta={alpha + beta} beyond order cap {self.order_cap}")
        return FlowLocalizedSymbol(
            self.cutoff, self.p, self.A_p, self.x0,
            lam1=self.rho, alpha=alpha,
            amplitude=math.sqrt(self.rho),
            n=self.n, lam2=self.rho ** self.mu / self.n, beta=beta)

    def box(self, t) -> TransportBox:
        return TransportBox(self.drift_center(t), self.c_p / self.rho,
                            self.n, self.n / (2.0 * self.rho ** self.mu))

    def weight_base(self) -> float:
        """rho^(mu+1)/n, the damping applied per localizer index."""
        return self.rho ** (self.mu + 1.0) / self.n

    # -- cutoffs used by the norm bookkeeping --------------------------------

    def chi1(self) -> Multiplier:
        """Frequency cutoff h(rho^mu (xi/n - 1) / 3), equal to 1 on the
        frequency support of every localizer symbol."""
        lam = self.rho ** self.mu / (3.0 * self.n)

        def fn(xi):
            return self.cutoff(lam * (xi - self.n))

        def dfn(xi, k):
            return lam ** k * self.cutoff.deriv(lam * (xi - self.n), k)

        half = 0.5 / lam
        return Multiplier(fn, dfn, support=(self.n - 1.1 * half,
                                            self.n + 1.1 * half))

    def chi1_complement(self) -> Multiplier:
        inner = self.chi1()

        def fn(xi):
            return 1.0 - inner.value(0.0, 0.0, xi)

        def dfn(xi, k):
            return -inner.deriv(0.0, 0.0, xi, dxi=k)

        return Multiplier(fn, dfn)

    def chi2(self) -> FlowLocalizedSymbol:
        """Space cutoff h(rho (x - x0 - p A(t) xi^(p-1)) / (4 p c_p))."""
        return FlowLocalizedSymbol(
            self.cutoff, self.p, self.A_p, self.x0,
            lam1=self.rho / (4.0 * self.p * self.c_p))

    # -- samples --------------------------------------------------------------

    def sample_box(self, t, nx: int = 161, nxi: int = 161,
                   margin: float = 3.0) -> GridSample:
        """Mesh covering ``margin`` times the transport box at time t,
        for sups and outside-the-box checks."""
        center = self.drift_center(t)
        half_x = margin * max(self.c_p / self.rho, 0.75 / self.rho)
        xs = np.linspace(center - half_x, center + half_x, nx)
        half_xi = margin * self.n / (2.0 * self.rho ** self.mu)
        xis = np.linspace(self.n - half_xi, self.n + half_xi, nxi)
        return GridSample(t=t, x=xs, xi=xis)


@dataclass(frozen=True)
class SupportReport:
    max_outside: float
    max_inside: float
    points_outside: int
    box: TransportBox


def support_check(fam: LocalizerFamily, alpha: int, beta: int, t: float,
                  sample: GridSample) -> SupportReport:
    """Largest |w^(alpha,beta)| attained outside the transport box.

    For t within the family's horizon the contract is an exact zero.
    """
    w = fam.symbol(alpha, beta)
    xg = np.asarray(sample.x, dtype=float)[:, None]
    xig = np.asarray(sample.xi, dtype=float)[None, :]
    vals = np.abs(w.value(t, xg, xig))
    box = fam.box(t)
    outside = box.outside(xg, xig)
    max_out = float(np.max(vals[outside])) if np.any(outside) else 0.0
    max_in = float(np.max(vals[~outside])) if np.any(~outside) else 0.0
    return SupportReport(max_out, max_in, int(np.sum(outside)), box)


def transport_residual(fam: LocalizerFamily, t: float, sample: GridSample,
                       dz_target: float = 3e-4) -> float:
    """Scaled residual of (d_t + p a_p(t) xi^(p-1) d_x) w^(0,0).

    d_x is analytic; d_t is a centered difference whose step keeps the
    flow argument's motion near ``dz_target``.  The residual is scaled by
    the sup of the advection term.
    """
    w = fam.symbol(0, 0)
    xg = np.asarray(sample.x, dtype=float)[:, None]
    xig = np.asarray(sample.xi, dtype=float)[None, :]
    rate = (fam.rho * fam.p * fam.model.ap_sup
            * float(np.max(np.abs(xig))) ** (fam.p - 1))
    dt = dz_target / max(rate, 1e-300)
    t0 = max(t, dt)
    wt = (w.value(t0 + dt, xg, xig) - w.value(t0 - dt, xg, xig)) / (2.0 * dt)
    ap_t = fam.model.ap(t0)
    adv = fam.p * ap_t * xig ** (fam.p - 1) * w.deriv(t0, xg, xig, dx=1)
    scale = float(np.max(np.abs(adv)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(wt + adv))) / scale


def ab1_pointwise_constant(fam: LocalizerFamily, alpha: int, beta: int,
                           t: float, sample: GridSample,
                           gamma: int, sigma: int) -> float:
    """Measured constant in |d_xi^g d_x^s w| <= C rho^(1/2+s) (rho^mu/n)^g."""
    w = fam.symbol(alpha, beta)
    xg = np.asarray(sample.x, dtype=float)[:, None]
    xig = np.asarray(sample.xi, dtype=float)[None, :]
    vals = np.abs(w.deriv(t, xg, xig, dx=sigma, dxi=gamma))
    scale = (fam.rho ** (0.5 + sigma)
             * (fam.rho ** fam.mu / fam.n) ** gamma)
    return float(np.max(vals)) / scale


def ab1_seminorm_constant(fam: LocalizerFamily, alpha: int, beta: int,
                          t: float, sample: GridSample, ell: int) -> float:
    """Measured constant in |w|^0_{ell,ell} <= C rho^(1/2+ell)."""
    from .psdo import sampled_seminorm
    semi = sampled_seminorm(fam.symbol(alpha, beta), ell, ell,
                            GridSample(t, sample.x, sample.xi))
    return semi / fam.rho ** (0.5 + ell)
