"""Discrete Kohn-Nirenberg quantization on the periodic grid.

The quantization convention is op(p)u(x) = integral of
e^{i x xi} p(x, xi) u_hat(xi) dxi / (2 pi), discretized with the Riemann
weight dxi/(2 pi) -> Dxi/(2 pi).  On the grid this collapses to

    v_j = (1/N) sum_m exp(2 pi i j m / N) p(x_j, xi_m) c_m,   c = FFT(u),

so x-independent symbols reduce to exact Fourier multipliers and x-only
symbols to pointwise multiplication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import dft

from .errors import AliasingError, MisuseError, OrderError
from .grid import FieldState, SymbolGrid2D

#: relative spectral mass allowed in the top 10% of the frequency range
ALIAS_TOL = 1e-10


def _intersect(a, b):
    if a is None:
        return b
    if b is None:
        return a
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, hi)


class Symbol:
    """Base protocol for numeric symbols p(t, x, xi).

    Subclasses implement ``value`` (numpy broadcasting over x and xi) and,
    when they can, ``deriv`` for mixed analytic derivatives.  The optional
    support intervals let the quantizer skip rows/columns where the symbol
    vanishes identically; returning None means no restriction.
    """

    is_multiplier = False       # depends on xi only
    is_multiplication = False   # depends on x only

    def value(self, t, x, xi):
        raise NotImplementedError

    def deriv(self, t, x, xi, dx=0, dxi=0):
        if dx == 0 and dxi == 0:
            return self.value(t, x, xi)
        raise OrderError(f"{type(self).__name__} exposes no derivatives")

    def __call__(self, t, x, xi):
        return self.value(t, x, xi)

    def x_support(self, t):
        return None

    def xi_support(self, t):
        return None


class ConstantSymbol(Symbol):
    is_multiplier = True
    is_multiplication = True

    def __init__(self, c=1.0):
        self.c = complex(c)

    def value(self, t, x, xi):
        return np.broadcast_arrays(np.asarray(x, dtype=float),
                                   np.asarray(xi, dtype=float))[0] * 0.0 + self.c

    def deriv(self, t, x, xi, dx=0, dxi=0):
        if dx == 0 and dxi == 0:
            return self.value(t, x, xi)
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(xi)))


class Multiplier(Symbol):
    """xi-only symbol m(xi) with optional derivative evaluators.

    ``fn`` maps xi -> value; ``deriv_fn(xi, k)`` returns the k-th derivative
    when provided.
    """

    is_multiplier = True

    def __init__(self, fn, deriv_fn=None, support=None):
        self._fn = fn
        self._deriv_fn = deriv_fn
        self._support = support

    def value(self, t, x, xi):
        out = self._fn(np.asarray(xi, dtype=float))
        return np.broadcast_to(out, np.broadcast_shapes(np.shape(x), np.shape(xi)))

    def deriv(self, t, x, xi, dx=0, dxi=0):
        shape = np.broadcast_shapes(np.shape(x), np.shape(xi))
        if dx > 0:
            return np.zeros(shape)
        if dxi == 0:
            return self.value(t, x, xi)
        if self._deriv_fn is None:
            raise OrderError("multiplier has no declared xi-derivatives")
        return np.broadcast_to(self._deriv_fn(np.asarray(xi, dtype=float), dxi), shape)

    def xi_support(self, t):
        return self._support


class SpatialFactor(Symbol):
    """x-only symbol a(x) with optional derivative evaluators."""

    is_multiplication = True

    def __init__(self, fn, deriv_fn=None, support=None):
        self._fn = fn
        self._deriv_fn = deriv_fn
        self._support = support

    def value(self, t, x, xi):
        out = self._fn(np.asarray(x, dtype=float))
        return np.broadcast_to(out, np.broadcast_shapes(np.shape(x), np.shape(xi)))

    def deriv(self, t, x, xi, dx=0, dxi=0):
        shape = np.broadcast_shapes(np.shape(x), np.shape(xi))
        if dxi > 0:
            return np.zeros(shape)
        if dx == 0:
            return self.value(t, x, xi)
        if self._deriv_fn is None:
            raise OrderError("spatial factor has no declared x-derivatives")
        return np.broadcast_to(self._deriv_fn(np.asarray(x, dtype=float), dx), shape)

    def x_support(self, t):
        return self._support


class XiPolynomial(Symbol):
    """p(x, xi) = sum_r c_r(x) xi^r with analytic mixed derivatives.

    ``coeffs`` maps the power r to a SpatialFactor (or a scalar for a
    constant coefficient).
    """

    def __init__(self, coeffs: dict):
        self.coeffs = {
            int(r): (c if isinstance(c, Symbol) else ConstantSymbol(c))
            for r, c in coeffs.items()}

    def value(self, t, x, xi):
        return self.deriv(t, x, xi, 0, 0)

    def deriv(self, t, x, xi, dx=0, dxi=0):
        xi_arr = np.asarray(xi, dtype=float)
        shape = np.broadcast_shapes(np.shape(x), np.shape(xi))
        out = np.zeros(shape, dtype=complex)
        for r, c in self.coeffs.items():
            if dxi > r:
                continue
            fall = math.perm(r, dxi)
            out = out + fall * c.deriv(t, x, xi, dx=dx) * xi_arr ** (r - dxi)
        return out


class LambdaSymbol(Symbol):
    """Symbol from a plain callable (t, x, xi) -> value; no derivatives."""

    def __init__(self, fn, x_support_fn=None, xi_support_fn=None):
        self._fn = fn
        self._xsup = x_support_fn
        self._xisup = xi_support_fn

    def value(self, t, x, xi):
        return self._fn(t, np.asarray(x, dtype=float), np.asarray(xi, dtype=float))

    def x_support(self, t):
        return self._xsup(t) if self._xsup is not None else None

    def xi_support(self, t):
        return self._xisup(t) if self._xisup is not None else None


# ---------------------------------------------------------------------------
# quantization


def check_band_limited(u: FieldState, tol: float = ALIAS_TOL):
    """Raise AliasingError when the top 10% of frequencies carry mass."""
    c = u.spectrum()
    total = float(np.sum(np.abs(c) ** 2))
    if total == 0.0:
        return
    top = float(np.sum(np.abs(c[u.grid.alias_check_mask()]) ** 2))
    if math.sqrt(top / total) > tol:
        raise AliasingError(
            f"relative spectral mass {math.sqrt(top / total):.3e} in the top "
            "10% of the frequency range")


def quantize_apply(symbol: Symbol, t: float, u: FieldState,
                   check_aliasing: bool = True,
                   force_general: bool = False,
                   chunk_elements: int = 1 << 22) -> FieldState:
    """Apply op(symbol) at time t to the field u.

    Fast paths cover Fourier multipliers and multiplication operators
    exactly; the general path runs the full Kohn-Nirenberg sum restricted to
    the symbol's declared support rows/columns (exact, since the symbol
    vanishes outside).
    """
    grid = u.grid
    if check_aliasing:
        check_band_limited(u)
    if symbol.is_multiplier and not force_general:
        spec = symbol.value(t, 0.0, grid.xi) * u.spectrum()
        return FieldState.from_spectrum(grid, spec, t=t, log_scale=u.log_scale)
    if symbol.is_multiplication and not force_general:
        vals = symbol.value(t, grid.x, 0.0) * u.values
        return FieldState(grid, vals, t=t, log_scale=u.log_scale)

    c = u.spectrum()
    xs = symbol.x_support(t)
    if xs is None:
        rows = np.arange(grid.N)
    else:
        rows = np.nonzero((grid.x >= xs[0]) & (grid.x <= xs[1]))[0]
    xis = symbol.xi_support(t)
    if xis is None:
        cols = np.arange(grid.N)
    else:
        cols = np.nonzero((grid.xi >= xis[0]) & (grid.xi <= xis[1]))[0]

    out = np.zeros(grid.N, dtype=complex)
    if rows.size and cols.size:
        d = c[cols] / grid.N
        xi_c = grid.xi[cols]
        chunk = max(1, chunk_elements // max(cols.size, 1))
        for lo in range(0, rows.size, chunk):
            rr = rows[lo:lo + chunk]
            P = symbol.value(t, grid.x[rr, None], xi_c[None, :])
            phase = np.exp((2j * math.pi / grid.N)
                           * ((rr[:, None].astype(np.int64) * cols[None, :]) % grid.N))
            out[rr] = np.sum(P * phase * d[None, :], axis=1)
    return FieldState(grid, out, t=t, log_scale=u.log_scale)


def dense_operator_matrix(symbol: Symbol, t: float, grid: SymbolGrid2D,
                          max_n: int = 2048) -> np.ndarray:
    """op(symbol) materialized as an N x N matrix acting on grid values."""
    if grid.N > max_n:
        raise MisuseError(f"dense oracle limited to N <= {max_n}")
    F = dft(grid.N)
    E = np.conj(F)  # E[j,k] = exp(+2 pi i j k / N)
    P = symbol.value(t, grid.x[:, None], grid.xi[None, :])
    return (P * E) @ F / grid.N


def symbol_from_matrix(M: np.ndarray, grid: SymbolGrid2D) -> np.ndarray:
    """Recover the discrete Kohn-Nirenberg symbol table of a matrix.

    Returns P with P[j, m] = p(x_j, xi_m) (fft ordering in m); inverse of
    ``dense_operator_matrix``.
    """
    F = dft(grid.N)
    return (M @ np.conj(F)) * F  # elementwise F = conj(E)


def apply_matrix(M: np.ndarray, u: FieldState) -> FieldState:
    return FieldState(u.grid, M @ u.values, t=u.t, log_scale=u.log_scale)


# ---------------------------------------------------------------------------
# composition with remainder


class TruncatedComposition(Symbol):
    """sum_{a <= nu-1} (1/a!) d_xi^a p1 . D_x^a p2, the expansion without
    its remainder term."""

    def __init__(self, p1: Symbol, p2: Symbol, nu: int):
        if nu < 1:
            raise ValueError("nu must be >= 1")
        self.p1 = p1
        self.p2 = p2
        self.nu = int(nu)

    def value(self, t, x, xi):
        out = None
        for a in range(self.nu):
            term = (self.p1.deriv(t, x, xi, dxi=a)
                    * self.p2.deriv(t, x, xi, dx=a)
                    * ((-1j) ** a / math.factorial(a)))
            out = term if out is None else out + term
        return out

    def x_support(self, t):
        return _intersect(self.p1.x_support(t), self.p2.x_support(t))

    def xi_support(self, t):
        return _intersect(self.p1.xi_support(t), self.p2.xi_support(t))


def compose_expansion(p1: Symbol, p2: Symbol, nu: int) -> TruncatedComposition:
    """Truncated composition symbol of op(p1) op(p2) at order nu."""
    return TruncatedComposition(p1, p2, nu)


def composition_remainder_norm(p1: Symbol, p2: Symbol, nu: int,
                               probes, grid: SymbolGrid2D,
                               t: float = 0.0) -> float:
    """Probe-measured norm of op(p1)op(p2) - op(truncated expansion)."""
    trunc = compose_expansion(p1, p2, nu)
    worst = 0.0
    for u in probes:
        nu_u = u.norm()
        if nu_u == 0.0:
            raise MisuseError("probes must be nonzero")
        w = quantize_apply(p2, t, u, check_aliasing=False)
        lhs = quantize_apply(p1, t, w, check_aliasing=False)
        rhs = quantize_apply(trunc, t, u, check_aliasing=False)
        diff = FieldState(grid, lhs.values - rhs.values, t=t)
        worst = max(worst, diff.norm() / nu_u)
    return worst


# ---------------------------------------------------------------------------
# probes and operator-norm harnesses


def random_band_limited(grid: SymbolGrid2D, rng: np.random.Generator,
                        count: int, band_fraction: float = 0.25) -> list:
    """Unit-norm random fields with spectrum inside |xi| <= band * xi_max."""
    keep = np.abs(grid.xi) <= band_fraction * grid.xi_max
    probes = []
    for _ in range(count):
        spec = np.zeros(grid.N, dtype=complex)
        k = int(np.sum(keep))
        spec[keep] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        u = FieldState.from_spectrum(grid, spec)
        u = FieldState(grid, u.values / u.norm())
        probes.append(u)
    return probes


@dataclass(frozen=True)
class GridSample:
    """Sample nodes for symbol sups; ``t`` rides along for convenience."""

    t: float
    x: np.ndarray
    xi: np.ndarray


def sampled_seminorm(symbol: Symbol, ell: int, ellp: int,
                     sample: GridSample) -> float:
    """Sampled sup over the grid of |d_xi^g d_x^s symbol| for g <= ell,
    s <= ellp; a lower bound on the true seminorm."""
    xg = np.asarray(sample.x, dtype=float)[:, None]
    xig = np.asarray(sample.xi, dtype=float)[None, :]
    worst = 0.0
    for g in range(ell + 1):
        for s in range(ellp + 1):
            vals = symbol.deriv(sample.t, xg, xig, dx=s, dxi=g)
            worst = max(worst, float(np.max(np.abs(vals))))
    return worst


@dataclass(frozen=True)
class CvReport:
    max_op_ratio: float
    seminorm_22: float
    ratio: float
    probe_count: int


def cv_bound_harness(symbol: Symbol, probes, grid: SymbolGrid2D,
                     sample: GridSample, t: float = 0.0) -> CvReport:
    """Measure max ||op(p)u|| / ||u|| against the sampled |p|_{2,2}."""
    if len(probes) < 30:
        raise MisuseError("the harness needs at least 30 probes")
    worst = 0.0
    for u in probes:
        v = quantize_apply(symbol, t, u, check_aliasing=False)
        worst = max(worst, v.norm() / u.norm())
    semi = sampled_seminorm(symbol, 2, 2, sample)
    if semi == 0.0:
        if worst > 1e-14:
            raise MisuseError(
                "sampled seminorm is 0 while the operator norm is not; "
                "the sample misses the symbol's support")
        return CvReport(worst, semi, 0.0, len(probes))
    return CvReport(worst, semi, worst / semi, len(probes))


def discrete_symbol_seminorm(P: np.ndarray, grid: SymbolGrid2D,
                             ell: int, ellp: int) -> float:
    """Seminorm of a tabulated symbol P[j, m] (fft ordering in m).

    x-derivatives are spectral (the table is periodic in x); xi-derivatives
    use centered differences on the sorted frequency axis.  Used by the
    product-symbol seminorm harness where only the table is available.
    """
    order = np.argsort(grid.xi)
    tab = P[:, order]
    dxi = grid.dxi
    worst = 0.0
    cur_x = {0: tab}
    for s in range(ellp + 1):
        if s not in cur_x:
            prev = cur_x[s - 1]
            cur_x[s] = np.fft.ifft(
                (1j * grid.xi)[:, None] * np.fft.fft(prev, axis=0), axis=0)
        base = cur_x[s]
        cur = base
        for g in range(ell + 1):
            if g > 0:
                nxt = np.zeros_like(cur)
                nxt[:, 1:-1] = (cur[:, 2:] - cur[:, :-2]) / (2 * dxi)
                cur = nxt
            interior = cur[:, ell:tab.shape[1] - ell] if ell else cur
            worst = max(worst, float(np.max(np.abs(interior))))
    return worst
