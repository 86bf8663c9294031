"""Periodic spatial grid, discrete frequencies and complex field states."""

from __future__ import annotations

import math

import numpy as np

from .errors import ResolutionError


class SymbolGrid2D:
    """Periodic grid on [-L, L) paired with its discrete frequency set.

    x_j = -L + 2 L j / N, xi_m = pi m / L for m in [-N/2, N/2); N is a power
    of two.  Frequencies are stored in FFT ordering so spectra line up with
    numpy transforms without shuffling.
    """

    def __init__(self, L: float, N: int, target_frequency: float | None = None,
                 oversampling: float = 1.25, guard_fraction: float = 1.0 / 3.0):
        if L <= 0:
            raise ValueError("half-length L must be positive")
        if N < 4 or (N & (N - 1)) != 0:
            raise ValueError("N must be a power of two >= 4")
        if not 0.0 < guard_fraction < 1.0:
            raise ValueError("guard_fraction must lie in (0, 1)")
        self.L = float(L)
        self.N = int(N)
        self.oversampling = float(oversampling)
        self.guard_fraction = float(guard_fraction)
        self.dx = 2.0 * self.L / self.N
        self.dxi = math.pi / self.L
        self.x = -self.L + self.dx * np.arange(self.N)
        self.xi = 2.0 * math.pi * np.fft.fftfreq(self.N, d=self.dx)
        self.xi_max = math.pi / self.dx  # Nyquist magnitude
        self.target_frequency = target_frequency
        if target_frequency is not None:
            need = self.oversampling * 2.0 * float(target_frequency)
            if self.xi_max < need:
                raise ResolutionError(
                    f"grid resolves |xi| <= {self.xi_max:.3g} but "
                    f"oversampling x 2 x target needs {need:.3g}")

    @classmethod
    def for_frequency(cls, L: float, target_frequency: float,
                      oversampling: float = 1.25,
                      guard_fraction: float = 1.0 / 3.0,
                      max_log2_n: int = 22) -> "SymbolGrid2D":
        """Smallest power-of-two grid resolving ``oversampling * 2 * target``."""
        need = oversampling * 2.0 * target_frequency
        n = 4
        while math.pi * (n // 2) / L * (1.0 - 2.0 / n) < need:
            n *= 2
            if n > 1 << max_log2_n:
                raise ResolutionError(
                    f"frequency {target_frequency:g} on box {L:g} needs more "
                    f"than 2^{max_log2_n} points")
        return cls(L, n, target_frequency=target_frequency,
                   oversampling=oversampling, guard_fraction=guard_fraction)

    @property
    def retained_band(self) -> float:
        """Largest |xi| kept by the dealiasing guard."""
        return (1.0 - self.guard_fraction) * self.xi_max

    def dealias_mask(self) -> np.ndarray:
        return (np.abs(self.xi) <= self.retained_band).astype(float)

    def alias_check_mask(self) -> np.ndarray:
        """Top 10% of the frequency range, monitored for aliasing."""
        return np.abs(self.xi) >= 0.9 * self.xi_max

    def __repr__(self):
        return f"SymbolGrid2D(L={self.L:g}, N={self.N}, dxi={self.dxi:.4g})"


class FieldState:
    """Complex spatial profile at a fixed time.

    ``log_scale`` carries an exponential prefactor so strongly amplified
    fields never overflow: the represented field is values * exp(log_scale).
    """

    __slots__ = ("grid", "values", "t", "log_scale", "_spectrum")

    def __init__(self, grid: SymbolGrid2D, values, t: float = 0.0,
                 log_scale: float = 0.0):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.N,):
            raise ValueError(f"values shape {values.shape} != ({grid.N},)")
        self.grid = grid
        self.values = values
        self.t = float(t)
        self.log_scale = float(log_scale)
        self._spectrum = None

    @classmethod
    def from_spectrum(cls, grid: SymbolGrid2D, spectrum, t: float = 0.0,
                      log_scale: float = 0.0) -> "FieldState":
        state = cls(grid, np.fft.ifft(np.asarray(spectrum, dtype=complex)),
                    t=t, log_scale=log_scale)
        state._spectrum = np.asarray(spectrum, dtype=complex)
        return state

    def spectrum(self) -> np.ndarray:
        """FFT of the stored values (fft ordering, unnormalized)."""
        if self._spectrum is None:
            self._spectrum = np.fft.fft(self.values)
        return self._spectrum

    def norm(self) -> float:
        """L2 norm by spatial quadrature, including the log prefactor."""
        base = math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.grid.dx)
        return base * math.exp(self.log_scale)

    def log_norm(self) -> float:
        base = float(np.sum(np.abs(self.values) ** 2)) * self.grid.dx
        return 0.5 * math.log(base) + self.log_scale

    def spectral_norm(self) -> float:
        """L2 norm through the discrete Parseval identity."""
        c = self.spectrum()
        base = math.sqrt(float(np.sum(np.abs(c) ** 2)) / self.grid.N * self.grid.dx)
        return base * math.exp(self.log_scale)

    def boundary_mass_fraction(self, margin_fraction: float = 0.05) -> float:
        """Squared-mass fraction within ``margin_fraction`` of the boundary."""
        edge = (1.0 - margin_fraction) * self.grid.L
        sel = np.abs(self.grid.x) >= edge
        total = float(np.sum(np.abs(self.values) ** 2))
        if total == 0.0:
            return 0.0
        return float(np.sum(np.abs(self.values[sel]) ** 2)) / total

    def copy(self) -> "FieldState":
        return FieldState(self.grid, self.values.copy(), t=self.t,
                          log_scale=self.log_scale)
