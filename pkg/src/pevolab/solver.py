"""Pseudo-spectral integrating-factor solver for the evolution equation.

The Cauchy problem D_t u + a_p(t) D_x^p u + sum_j a_j(t,x) D_x^j u = 0 is
advanced in frequency space: the x-independent part of the symbol is
integrated exactly through the phase exp(-i Phi(t, xi)), and what remains
(variable-coefficient terms) is stepped with classical RK4 on the
transformed variable.  With x-independent coefficients the scheme is exact
up to the cached-phase quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientModel
from .cutoffs import PacketProfile
from .errors import (DomainError, GuardBandError, InstabilityError,
                     MisuseError, WrapAroundError)
from .grid import FieldState, SymbolGrid2D
from .quadrature import CachedAntiderivative

#: fields are renormalized into log_scale beyond this amplitude
_RENORM_NORM = 1e60


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping knobs.

    ``dt`` = None picks c_step / (sup of the explicit part's rate); the
    integrating factor covers either the full x-independent symbol
    ("full") or only the leading a_p xi^p term ("principal").
    """

    dt: float | None = None
    scheme_order: int = 4
    integrating_factor: str = "full"     # "full" | "principal"
    guard_fraction: float = 1.0 / 3.0
    wrap_threshold: float = 1e-8
    wrap_margin_fraction: float = 0.05
    c_step: float = 0.1
    growth_guard_factor: float = 2.0
    check_wrap: bool = True
    check_growth: bool = True

    def __post_init__(self):
        if self.scheme_order != 4:
            raise DomainError("only the classical 4th-order scheme is built")
        if not 0.25 <= self.guard_fraction <= 0.5:
            raise DomainError("guard fraction must lie in [1/4, 1/2]")
        if self.integrating_factor not in ("full", "principal"):
            raise DomainError("integrating_factor must be 'full' or 'principal'")


@dataclass
class Trajectory:
    """Checkpointed solve: fields, norms and boundary diagnostics."""

    states: list
    times: np.ndarray
    log_norms: np.ndarray
    wrap_fractions: np.ndarray
    dt_used: float
    steps_total: int

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def final(self) -> FieldState:
        return self.states[-1]


class _SymbolSplit:
    """x-independent phase vs explicit variable-coefficient terms."""

    def __init__(self, model: CoefficientModel, grid: SymbolGrid2D,
                 cfg: SolverConfig):
        self.model = model
        self.grid = grid
        xi = grid.xi
        self.phase_parts = [(model.p, model.A_p)]
        self.explicit = []
        for j, coeff in enumerate(model.lower):
            if coeff.deriv_sup.get(0, 0.0) == 0.0 and not coeff.time_dependent:
                if coeff.value(0.0, np.array([0.0]))[0] == 0.0:
                    continue
            if coeff.x_independent and cfg.integrating_factor == "full":
                self.phase_parts.append(
                    (j, CachedAntiderivative(
                        lambda tt, cf=coeff: cf.value(
                            tt, np.zeros_like(np.asarray(tt, dtype=float))),
                        model.T)))
            else:
                self.explicit.append((j, coeff))
        self._xi_pows = {j: xi ** j for j, _ in self.explicit}
        self._mask = grid.dealias_mask()
        self._phase_pows = {j: xi.astype(complex) ** j
                            for j, _ in self.phase_parts}
        self._exp_memo = {}

    def phase(self, t):
        """Phi(t, xi) with u_hat(t) = exp(-i Phi) v_hat."""
        total = np.zeros(self.grid.N, dtype=complex)
        for j, anti in self.phase_parts:
            total = total + anti(t) * self._phase_pows[j]
        return total

    def _exp_phase(self, t):
        """exp(-i Phi(t)), memoized on the handful of RK4 stage times."""
        hit = self._exp_memo.get(t)
        if hit is None:
            hit = np.exp(-1j * self.phase(t))
            if len(self._exp_memo) > 8:
                self._exp_memo.clear()
            self._exp_memo[t] = hit
        return hit

    def explicit_rate_bound(self) -> float:
        """sup over explicit terms of |a_j| xi_max^j, the RK4 rate scale."""
        rate = 0.0
        for j, coeff in self.explicit:
            rate += coeff.deriv_sup.get(0, 0.0) * self.grid.xi_max ** j
        return rate

    def rhs(self, t, v_hat):
        """d/dt v_hat for the transformed variable."""
        if not self.explicit:
            return np.zeros_like(v_hat)
        ep = self._exp_phase(t)
        u_hat = ep * v_hat
        acc = np.zeros_like(v_hat)
        for j, coeff in self.explicit:
            term = np.fft.fft(coeff.value(t, self.grid.x)
                              * np.fft.ifft(self._xi_pows[j] * u_hat))
            acc += term
        return -1j * np.conj(ep) * acc * self._mask


def _checkpoint_times(t_end: float, count: int = 9) -> np.ndarray:
    """0 and t_end (1 - 2^-j): geometric refinement toward the endpoint."""
    js = np.arange(count - 1)
    ts = t_end * (1.0 - 0.5 ** js)
    return np.append(ts, t_end)


def solve_cauchy(model: CoefficientModel, g: FieldState, t_end: float,
                 cfg: SolverConfig = SolverConfig(),
                 checkpoints=None) -> Trajectory:
    """Advance the Cauchy problem from g to t_end, returning checkpoints.

    Raises WrapAroundError when boundary mass exceeds the configured
    threshold and InstabilityError when the norm growth rate exceeds
    2 sup|Im a_{p-1}| xi_max^{p-1} by the guard factor (an under-resolution
    signature -- variable real coefficients cannot amplify faster).
    """
    if t_end > model.T + 1e-12:
        raise DomainError(f"t_end={t_end:g} beyond the horizon T={model.T:g}")
    grid = g.grid
    split = _SymbolSplit(model, grid, cfg)
    if checkpoints is None:
        checkpoints = _checkpoint_times(t_end)
    checkpoints = np.asarray(checkpoints, dtype=float)
    if checkpoints[0] != 0.0 or np.any(np.diff(checkpoints) < 0):
        raise DomainError("checkpoints must start at 0 and be nondecreasing")

    rate = split.explicit_rate_bound()
    dt = cfg.dt if cfg.dt is not None else cfg.c_step / max(rate, 1e-12)
    dt = min(dt, t_end if t_end > 0 else 1.0)

    im_sup = model.subprincipal.deriv_sup.get(0, 0.0)
    growth_bound = (cfg.growth_guard_factor
                    * (2.0 * im_sup * grid.xi_max ** (model.p - 1) + 1.0))

    v_hat = g.spectrum().astype(complex).copy()
    log_scale = g.log_scale
    t_now = 0.0
    states = []
    log_norms = []
    wraps = []
    steps_total = 0
    base_log_norm = None

    def emit(tc):
        nonlocal base_log_norm
        u_hat = split._exp_phase(tc) * v_hat
        state = FieldState.from_spectrum(grid, u_hat, t=tc, log_scale=log_scale)
        states.append(state)
        log_norms.append(state.log_norm())
        wrap = state.boundary_mass_fraction(cfg.wrap_margin_fraction)
        wraps.append(wrap)
        traj = Trajectory(states, np.array([s.t for s in states]),
                          np.array(log_norms), np.array(wraps), dt, steps_total)
        if cfg.check_wrap and wrap > cfg.wrap_threshold:
            raise WrapAroundError(
                f"boundary mass fraction {wrap:.3e} at t={tc:g} exceeds "
                f"{cfg.wrap_threshold:g}", trajectory=traj)
        if base_log_norm is None:
            base_log_norm = log_norms[0]
        elif cfg.check_growth and tc > 0:
            kappa = (log_norms[-1] - base_log_norm) / tc
            if kappa > growth_bound:
                raise InstabilityError(
                    f"growth rate {kappa:.3e} exceeds the admissible "
                    f"{growth_bound:.3e}", trajectory=traj)

    for tc in checkpoints:
        span = tc - t_now
        if span > 0:
            n_steps = max(1, math.ceil(span / dt - 1e-12))
            h = span / n_steps
            for _ in range(n_steps):
                k1 = split.rhs(t_now, v_hat)
                k2 = split.rhs(t_now + 0.5 * h, v_hat + 0.5 * h * k1)
                k3 = split.rhs(t_now + 0.5 * h, v_hat + 0.5 * h * k2)
                k4 = split.rhs(t_now + h, v_hat + h * k3)
                v_hat = v_hat + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                t_now += h
                steps_total += 1
                peak = float(np.max(np.abs(v_hat)))
                if peak > _RENORM_NORM:
                    v_hat /= peak
                    log_scale += math.log(peak)
            t_now = tc
        emit(tc)

    return Trajectory(states, np.array([s.t for s in states]),
                      np.array(log_norms), np.array(wraps), dt, steps_total)


def constant_coefficient_oracle(model: CoefficientModel, g: FieldState,
                                t: float) -> FieldState:
    """Exact multiplier solution for x-independent coefficients.

    u_hat(t, xi) = exp(-i A_p(t) xi^p - i sum_j (integral of a_j) xi^j)
    g_hat(xi); the time integrals reuse the same cached quadrature as A_p.
    """
    for j, coeff in enumerate(model.lower):
        if not coeff.x_independent:
            raise MisuseError(
                f"coefficient a_{j} depends on x; the oracle only covers "
                "x-independent models")
    if t > model.T + 1e-12:
        raise DomainError(f"t={t:g} beyond the horizon T={model.T:g}")
    grid = g.grid
    xi = grid.xi
    phase = model.A_p(t) * xi.astype(complex) ** model.p
    for j, coeff in enumerate(model.lower):
        anti = CachedAntiderivative(
            lambda tt, cf=coeff: cf.value(tt, np.zeros_like(
                np.asarray(tt, dtype=float))), model.T)
        phase = phase + anti(t) * xi ** j
    u_hat = np.exp(-1j * phase) * g.spectrum()
    return FieldState.from_spectrum(grid, u_hat, t=t, log_scale=g.log_scale)


def build_wavepacket(profile: PacketProfile, x_k: float, n: float,
                     grid: SymbolGrid2D, band_pad: float = 0.3) -> FieldState:
    """g(x) = e^{i (x - x_k) n} psi(x - x_k), the packet at frequency n.

    The transform is psi_hat(xi - n) shifted by the phase e^{-i x_k xi}, so
    its support needs n + band_pad inside the dealiasing guard band.
    """
    if n + band_pad > grid.retained_band:
        raise GuardBandError(
            f"packet frequency {n:g} too close to the retained band "
            f"{grid.retained_band:g}")
    if not -grid.L < x_k < grid.L:
        raise DomainError(f"packet center {x_k:g} outside the box")
    offs = grid.x - x_k
    values = np.exp(1j * n * offs) * profile(offs)
    return FieldState(grid, values, t=0.0)
