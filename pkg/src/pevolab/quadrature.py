"""Composite Simpson quadrature and cached antiderivatives.

All 1-D integrals in the package go through these helpers so that node
placement, accuracy and determinism are controlled in one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson


@dataclass(frozen=True)
class QuadratureSpec:
    """Node-placement rule for composite Simpson integrals.

    The spacing is capped both absolutely (``max_spacing``) and relative to
    the interval length (``length * length_fraction``); the subinterval count
    is kept even and at least ``min_intervals``.
    """

    rule: str = "simpson"
    max_spacing: float = 0.01
    length_fraction: float = 1e-3
    min_intervals: int = 8

    def intervals(self, length: float) -> int:
        if self.rule != "simpson":
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if length <= 0.0:
            return self.min_intervals
        target = min(self.max_spacing, length * self.length_fraction)
        n = max(self.min_intervals, math.ceil(length / target))
        return n + (n % 2)

    def nodes(self, lo: float, hi: float) -> np.ndarray:
        return np.linspace(lo, hi, self.intervals(hi - lo) + 1)


def simpson_weights(n_nodes: int, h: float) -> np.ndarray:
    """Composite Simpson weights for an odd number of uniform nodes."""
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise ValueError("composite Simpson needs an odd node count >= 3")
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def simpson_integrate(values: np.ndarray, h: float, axis: int = -1):
    """Integrate uniformly sampled values with composite Simpson weights."""
    n = values.shape[axis]
    w = simpson_weights(n, h)
    shape = [1] * values.ndim
    shape[axis] = n
    return np.sum(values * w.reshape(shape), axis=axis)


def cumulative_integral(values: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral along the last axis, zero at the first node."""
    return cumulative_simpson(values, dx=h, initial=0.0, axis=-1)


class CachedAntiderivative:
    """t -> integral of ``fn`` over [0, t], tabulated once on [0, T].

    The table is dense enough that linear interpolation between nodes stays
    below ``tol * max(T, 1)``; evaluation clamps t into [0, T].  Complex
    integrands are supported.
    """

    def __init__(self, fn, T, tol=1e-10, min_nodes=4097, max_nodes=1 << 21):
        if T <= 0:
            raise ValueError("time horizon must be positive")
        self.T = float(T)
        probe_t = np.linspace(0.0, self.T, 2049)
        probe = np.asarray(fn(probe_t), dtype=complex)
        if probe.shape != probe_t.shape:
            probe = np.broadcast_to(probe, probe_t.shape).copy()
        slope = np.max(np.abs(np.diff(probe))) / (probe_t[1] - probe_t[0])
        # linear interpolation error of the antiderivative is h^2 |fn'| / 8
        h = math.sqrt(8.0 * tol * max(self.T, 1.0) / max(slope, 1e-300))
        n = int(np.clip(math.ceil(self.T / h) + 1, min_nodes, max_nodes))
        n += 1 - (n % 2)
        self._t = np.linspace(0.0, self.T, n)
        vals = np.asarray(fn(self._t), dtype=complex)
        if vals.shape != self._t.shape:
            vals = np.broadcast_to(vals, self._t.shape).copy()
        self._values = vals
        self._table_re = cumulative_simpson(vals.real, x=self._t, initial=0.0)
        self._table_im = cumulative_simpson(vals.imag, x=self._t, initial=0.0)
        self._complex = bool(np.max(np.abs(vals.imag)) > 0.0)

    @property
    def integrand_sup(self) -> float:
        return float(np.max(np.abs(self._values)))

    @property
    def integrand_inf(self) -> float:
        return float(np.min(np.abs(self._values)))

    def integrand_range(self):
        return float(np.min(self._values.real)), float(np.max(self._values.real))

    def __call__(self, t):
        tt = np.clip(np.asarray(t, dtype=float), 0.0, self.T)
        re = np.interp(tt, self._t, self._table_re)
        if not self._complex:
            out = re
        else:
            out = re + 1j * np.interp(tt, self._t, self._table_im)
        if np.isscalar(t) or np.ndim(t) == 0:
            return complex(out) if self._complex else float(out)
        return out
