"""Smooth plateau cutoff and the band-limited packet profile.

The cutoff ``h`` equals 1 on |y| <= 1/4 and 0 on |y| >= 1/2, glued with the
standard exponential bump G(u) = g(u) / (g(u) + g(1-u)), g(u) = exp(-1/u).
Derivatives of any order are closed-form compositions: g^(k)(u) =
P_k(1/u) g(u) with the polynomial recurrence P_{k+1}(v) = v^2 (P_k - P_k'),
the denominator handled by a Leibniz quotient recurrence.  No finite
differences are involved.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import OrderError, ResolutionError
from .quadrature import simpson_integrate

PLATEAU_EDGE = 0.25
SUPPORT_EDGE = 0.5
# width of the glue coordinate u in y units
_BAND = SUPPORT_EDGE - PLATEAU_EDGE
# inside this distance from u in {0, 1} the bump factor is exp(-1e6) or
# smaller; snap to the plateau values so no 0 * inf can appear
_EDGE_CLIP = 1e-6


def _glue_polys(order):
    polys = [np.poly1d([1.0])]
    v2 = np.poly1d([1.0, 0.0, 0.0])
    for _ in range(order):
        p = polys[-1]
        polys.append(v2 * (p - p.deriv()))
    return polys


class SmoothCutoff:
    """Even C^infinity plateau cutoff with exact derivative evaluators.

    h(y) = 1 for |y| <= 1/4, h(y) = 0 for |y| >= 1/2, monotone in between,
    values in [0, 1].  ``deriv(y, k)`` evaluates h^(k) for k <= d_max.
    """

    def __init__(self, d_max: int = 12):
        if d_max < 1:
            raise ValueError("d_max must be >= 1")
        self.d_max = int(d_max)
        self._polys = _glue_polys(self.d_max)
        self._binom = [[math.comb(k, j) for j in range(k + 1)]
                       for k in range(self.d_max + 1)]

    # -- glue machinery ----------------------------------------------------

    def _g_derivs(self, u, order):
        """g^(j)(u) for j = 0..order, u > 0 elementwise (array input)."""
        g = np.exp(-1.0 / u)
        inv = 1.0 / u
        return [np.polyval(self._polys[j], inv) * g for j in range(order + 1)]

    def _glue_derivs(self, u, order):
        """G^(j)(u) for j = 0..order on u in (0, 1)."""
        gu = self._g_derivs(u, order)
        gv = self._g_derivs(1.0 - u, order)
        # D = g(u) + g(1-u); D^(j) = g^(j)(u) + (-1)^j g^(j)(1-u)
        D = [gu[j] + (-1.0) ** j * gv[j] for j in range(order + 1)]
        G = [gu[0] / D[0]]
        for k in range(1, order + 1):
            acc = gu[k].copy()
            for j in range(k):
                acc -= self._binom[k][j] * G[j] * D[k - j]
            G.append(acc / D[0])
        return G

    # -- public evaluators -------------------------------------------------

    def __call__(self, y):
        return self.deriv(y, 0)

    def deriv(self, y, k: int):
        """Evaluate h^(k) at y (scalar or array), exactly 0/1 on the plateaus."""
        if k < 0 or k > self.d_max:
            raise OrderError(f"derivative order {k} exceeds declared d_max={self.d_max}")
        y_arr = np.asarray(y, dtype=float)
        ay = np.abs(y_arr)
        u = (SUPPORT_EDGE - ay) / _BAND
        out = np.zeros(y_arr.shape)
        if k == 0:
            out[u >= 1.0 - _EDGE_CLIP] = 1.0
        band = (u > _EDGE_CLIP) & (u < 1.0 - _EDGE_CLIP)
        if np.any(band):
            ub = u[band]
            Gk = self._glue_derivs(ub, k)[k]
            scale = (-1.0 / _BAND) ** k
            vals = scale * Gk
            if k % 2 == 1:
                vals = vals * np.sign(y_arr[band])
            out[band] = vals
        if np.isscalar(y) or np.ndim(y) == 0:
            return float(out)
        return out

    def deriv_stack(self, y, k_max: int):
        """All of h^(0..k_max) at once; cheaper than repeated deriv calls."""
        if k_max < 0 or k_max > self.d_max:
            raise OrderError(f"derivative order {k_max} exceeds declared d_max={self.d_max}")
        y_arr = np.asarray(y, dtype=float)
        scalar = y_arr.ndim == 0
        if scalar:
            y_arr = y_arr.reshape(1)
        ay = np.abs(y_arr)
        u = (SUPPORT_EDGE - ay) / _BAND
        out = np.zeros((k_max + 1,) + y_arr.shape)
        out[0][u >= 1.0 - _EDGE_CLIP] = 1.0
        band = (u > _EDGE_CLIP) & (u < 1.0 - _EDGE_CLIP)
        if np.any(band):
            ub = u[band]
            G = self._glue_derivs(ub, k_max)
            sg = np.sign(y_arr[band])
            for k in range(k_max + 1):
                vals = (-1.0 / _BAND) ** k * G[k]
                if k % 2 == 1:
                    vals = vals * sg
                out[k][band] = vals
        if scalar:
            return out[:, 0]
        return out

    def sup_deriv(self, k: int, samples: int = 20001) -> float:
        """Sampled sup of |h^(k)| (attained on the transition band)."""
        ys = np.linspace(PLATEAU_EDGE, SUPPORT_EDGE, samples)
        return float(np.max(np.abs(self.deriv(ys, k))))

    def l2_norm_squared(self, nodes: int = 20001) -> float:
        """Integral of h^2 over the line (plateau exact, band by Simpson)."""
        nodes += 1 - (nodes % 2)
        ys = np.linspace(PLATEAU_EDGE, SUPPORT_EDGE, nodes)
        band = simpson_integrate(self(ys) ** 2, ys[1] - ys[0])
        return 2.0 * PLATEAU_EDGE + 2.0 * band

    def l2_norm(self) -> float:
        return math.sqrt(self.l2_norm_squared())


def build_cutoff(d_max: int = 12) -> SmoothCutoff:
    """Plateau cutoff with closed-form derivatives up to ``d_max``."""
    return SmoothCutoff(d_max=d_max)


class PacketProfile:
    """Rapidly decreasing profile with band-limited transform.

    The transform is psi_hat(xi) = kappa * h(2 xi), supported exactly in
    |xi| <= 1/4 (inside the plateau {h = 1}); kappa normalizes psi(0) = 2.
    psi itself is computed by Simpson quadrature of the inverse transform
    and is real and even.
    """

    #: frequency nodes used for every inverse-transform quadrature
    _NODES = 8193

    def __init__(self, cutoff: SmoothCutoff):
        self.cutoff = cutoff
        xi = np.linspace(0.0, PLATEAU_EDGE, self._NODES)
        self._xi = xi
        self._h2 = cutoff(2.0 * xi)
        self._dxi = xi[1] - xi[0]
        # psi(0) = kappa / (2 pi) * integral of h(2 xi) = 2
        base = 2.0 * simpson_integrate(self._h2, self._dxi)
        self.kappa = 4.0 * math.pi / base
        self._l2 = math.sqrt(
            self.kappa ** 2 / (2.0 * math.pi)
            * 2.0 * simpson_integrate(self._h2 ** 2, self._dxi))
        self._spline = None

    def spectrum(self, xi):
        """psi_hat(xi); exactly zero for |xi| >= 1/4."""
        return self.kappa * self.cutoff(2.0 * np.asarray(xi, dtype=float))

    def quadrature_value(self, x):
        """psi(x) by direct quadrature of the inverse transform."""
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        # chunked cos-transform against the tabulated spectrum
        out = np.empty(x_arr.shape)
        flat = x_arr.reshape(-1)
        step = max(1, 2_000_000 // self._xi.size)
        for lo in range(0, flat.size, step):
            blk = flat[lo:lo + step, None]
            vals = simpson_integrate(self._h2 * np.cos(blk * self._xi), self._dxi)
            out.reshape(-1)[lo:lo + step] = vals
        out *= self.kappa / math.pi
        if np.isscalar(x) or np.ndim(x) == 0:
            return float(out.reshape(-1)[0])
        return out

    #: table reach and spacing; psi is band-limited to 1/4 so a 0.05-step
    #: cubic spline reproduces it to ~1e-10
    _TABLE_RADIUS = 1500.0
    _TABLE_STEP = 0.05

    def _ensure_spline(self):
        if self._spline is None:
            from scipy.interpolate import CubicSpline
            rs = np.arange(0.0, self._TABLE_RADIUS + self._TABLE_STEP,
                           self._TABLE_STEP)
            self._spline = CubicSpline(rs, self.quadrature_value(rs))
        return self._spline

    def __call__(self, x):
        """psi(x), evaluated from the cached spline of the quadrature values
        (psi is even; beyond the table the profile is below 1e-12)."""
        x_arr = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
        small = x_arr <= self._TABLE_RADIUS
        out = np.zeros(x_arr.shape)
        if np.any(small):
            out[small] = self._ensure_spline()(x_arr[small])
        if np.isscalar(x) or np.ndim(x) == 0:
            return float(out.reshape(-1)[0])
        return out

    @property
    def l2_norm(self) -> float:
        """L2 norm of psi (from its transform, Parseval)."""
        return self._l2

    def effective_radius(self, eps: float = 1e-9, r_max: float = 400.0) -> float:
        """Smallest tabulated radius beyond which |psi| <= eps * psi(0)."""
        rs = np.linspace(0.0, r_max, 2001)
        vals = np.abs(self(rs))
        thresh = eps * 2.0
        above = np.nonzero(vals > thresh)[0]
        if above.size == 0:
            return 0.0
        if above[-1] == rs.size - 1:
            raise ResolutionError(
                f"profile tail above {eps:g} beyond r_max={r_max:g}")
        return float(rs[above[-1] + 1])


def build_packet_profile(cutoff: SmoothCutoff, grid=None) -> PacketProfile:
    """Packet profile for a grid; rejects grids coarser than the transform.

    ``grid`` may be None for grid-free symbolic work; when given, its
    frequency spacing must resolve the transform's support [-1/4, 1/4].
    Profiles are cached per cutoff (they carry a tabulated spline).
    """
    if grid is not None and grid.dxi >= 0.125:
        raise ResolutionError(
            f"frequency spacing {grid.dxi:g} too coarse for the packet "
            "transform (need < 1/8)")
    cached = getattr(cutoff, "_packet_profile", None)
    if cached is None:
        cached = PacketProfile(cutoff)
        cutoff._packet_profile = cached
    return cached
