"""The dichotomy experiment: packets, localized norms and growth fits.

Pipeline per (family, radius): extract a growth point when the family
admits one, launch the packet g(x) = e^{i(x-x0)n} psi(x-x0), solve to the
horizon t = rho / n^(p-1), localize with every w^(alpha,beta), and form

    sigma(t) = sum_{alpha+beta <= s} (rho^(mu+1)/n)^(alpha+beta)
               ||v^(alpha,beta)(t)||.

The asymptotic exponents (a, mu) put n = rho^a beyond any grid, so the
solver leg runs at substituted exponents (a_eff, mu_eff) with a_eff < a;
records carry both regimes explicitly.  The bookkeeping inequalities at
the true exponents are exercised by the symbolic suites, not by solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import calibration
from .coefficients import (CoefficientModel, SeedInvalidError, SeedNotFound,
                           ViolationWitness, extract_growth_point,
                           find_violation_seed)
from .cutoffs import SmoothCutoff, build_packet_profile
from .errors import DomainError
from .fitting import GrowthClassification, classify_growth, line_fit
from .grid import FieldState, SymbolGrid2D
from .localizers import LocalizerFamily
from .psdo import quantize_apply
from .quadrature import simpson_integrate
from .solver import SolverConfig, Trajectory, build_wavepacket, solve_cauchy

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class FamilySpec:
    name: str
    c: float = 1.0
    label: str | None = None

    def build(self, plan: "ExperimentPlan") -> CoefficientModel:
        return CoefficientModel.from_family(self.name, p=plan.p, T=plan.T,
                                            ap=plan.ap, c=self.c,
                                            d_max=plan.d_max)

    @property
    def key(self) -> str:
        return self.label or self.name


@dataclass(frozen=True)
class ExperimentPlan:
    """Parameters of one dichotomy sweep.

    (a, mu) are the bookkeeping exponents and must satisfy mu > p+1 and
    mu+1 < a <= (p mu - 2)/(p-1); (a_eff, mu_eff) drive the actual solves
    and keep the same ordering mu_eff + 1 < a_eff at reachable frequencies.
    """

    families: tuple = (FamilySpec("constant_imag", 0.25),
                       FamilySpec("decaying_imag", 1.0),
                       FamilySpec("zero", 0.0))
    p: int = 2
    T: float = 1.0
    ap: float = 1.0
    M_target: float = 0.05
    rho_targets: tuple = (4.0, 4.0 * _SQRT2, 8.0, 8.0 * _SQRT2, 16.0)
    q_list: tuple = (0, 1, 2)
    a: float = 5.0
    mu: float = 3.5
    a_eff: float = 2.2
    mu_eff: float = 1.1
    s_cap: int = 4
    #: localizer orders entering the solve-regime sigma; at a_eff the
    #: argument-coherence parameter rho^2/n is O(1), so only the underived
    #: symbol tracks the packet amplification cleanly (higher orders are
    #: still measured and reported)
    s_solve: int = 0
    oversampling: float = 1.25
    guard_fraction: float = 1.0 / 3.0
    tail_pad: float = 360.0
    checkpoint_count: int = 9
    d_max: int = 12
    A_s: float = calibration.A_S
    seed: int = 20240801

    def __post_init__(self):
        if not self.mu > self.p + 1:
            raise DomainError(f"need mu > p+1, got mu={self.mu}, p={self.p}")
        hi = (self.p * self.mu - 2.0) / (self.p - 1.0)
        if not self.mu + 1.0 < self.a <= hi:
            raise DomainError(
                f"need mu+1 < a <= (p mu - 2)/(p-1) = {hi:g}, got a={self.a}")
        if not self.mu_eff + 1.0 < self.a_eff:
            raise DomainError("need mu_eff + 1 < a_eff")
        for rho in self.rho_targets:
            tk = rho / rho ** (self.a_eff * (self.p - 1))
            if tk > self.T:
                raise DomainError(
                    f"horizon rho/n^(p-1) = {tk:g} at rho={rho:g} exceeds T")

    def s_required(self, q: int) -> int:
        """Smallest admissible localizer order for probe loss q."""
        val = (self.a * (q + self.p - 2) + self.mu + 2.5) / (self.a - self.mu - 1.0)
        return math.ceil(val)

    def s_used(self) -> int:
        return min(self.s_cap, self.s_required(min(self.q_list)))

    def index_set(self) -> list:
        s = self.s_used()
        return [(al, be) for al in range(s + 1) for be in range(s + 1 - al)]

    def contradiction_threshold(self, q: int) -> float:
        return 0.5 + 2.0 + self.a_eff * q


@dataclass
class GrowthRecord:
    """Everything measured for one (family, radius) run."""

    family: str
    rho: float
    n: float
    n_bookkeeping: float
    k: int | None
    lemma_point: bool
    x_center: float
    times: np.ndarray
    sigma: np.ndarray
    norms: dict
    bk_integrals: np.ndarray
    weight_base: float
    tail_weight: float
    wrap_max: float
    grid_N: int
    grid_L: float
    point_margins: tuple | None = None
    x_tau_spread: float = 0.0

    @property
    def sigma0(self) -> float:
        return float(self.sigma[0])

    @property
    def growth_log(self) -> float:
        return float(math.log(self.sigma[-1] / self.sigma[0]))

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


@dataclass
class FamilyResult:
    family: str
    records: list
    lower_fit_slope: float        # log sigma(t_k) against rho
    upper_fit_slope: float        # log sigma(t_k) against log rho
    m_hat: float                  # log sigma(t_k) against log(1+rho)
    classification: GrowthClassification
    contradiction: dict           # q -> bool

    @property
    def rhos(self):
        return np.array([r.rho for r in self.records])


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    families: dict                # key -> FamilyResult


def localize_solution(fam: LocalizerFamily, traj: Trajectory,
                      alphabeta_set, grid: SymbolGrid2D | None = None) -> dict:
    """||v^(alpha,beta)(t)|| per checkpoint and index.

    The localizer's frequency support already discards anything near the
    top of the band, so the aliasing flag is left to the solver stage.
    """
    out = {}
    for (al, be) in alphabeta_set:
        w = fam.symbol(al, be)
        norms = np.empty(len(traj.states))
        for i, u in enumerate(traj.states):
            v = quantize_apply(w, u.t, u, check_aliasing=False)
            norms[i] = v.norm()
        out[(al, be)] = norms
    return out


def sigma_series(norm_table: dict, weight_base: float,
                 s_used: int | None = None) -> np.ndarray:
    """Weighted sum of localized norms per checkpoint."""
    keys = list(norm_table.keys())
    if s_used is not None:
        keys = [k for k in keys if k[0] + k[1] <= s_used]
    count = len(norm_table[keys[0]])
    sig = np.zeros(count)
    for (al, be) in sorted(keys):
        sig += weight_base ** (al + be) * np.asarray(norm_table[(al, be)])
    return sig


def bk_rate(model: CoefficientModel, fam: LocalizerFamily, A_s: float, t):
    """B(t): drift-line amplification rate minus the frozen constant."""
    tt = np.asarray(t, dtype=float)
    n_pm1 = fam.n ** (model.p - 1)
    centers = fam.x0 + model.p * np.asarray(fam.A_p(tt)) * n_pm1
    vals = np.empty(tt.shape)
    flat_t = tt.reshape(-1)
    flat_c = np.asarray(centers).reshape(-1)
    for i, (ti, ci) in enumerate(zip(flat_t, flat_c)):
        vals.reshape(-1)[i] = model.im_sub(ti, ci)
    return vals * n_pm1 - A_s * (1.0 + n_pm1 / fam.rho)


def bk_integral(model: CoefficientModel, fam: LocalizerFamily, A_s: float,
                t: float, nodes: int = 513) -> float:
    """integral_0^t of the drift-line rate B."""
    if t == 0.0:
        return 0.0
    ts = np.linspace(0.0, t, nodes + (1 - nodes % 2))
    vals = bk_rate(model, fam, A_s, ts)
    return float(simpson_integrate(vals, ts[1] - ts[0]))


def _assign_index(min_integral: float, M_target: float, delta: float,
                  margin: float = 0.01) -> int | None:
    """Largest admissible growth index for a targeted radius."""
    k = math.floor(min_integral - M_target * math.log1p(delta) - margin)
    return k if k >= 0 else None


def run_growth_record(plan: ExperimentPlan, spec: FamilySpec,
                      rho_target: float, cutoff: SmoothCutoff,
                      model: CoefficientModel | None = None) -> GrowthRecord:
    """One packet run at one target radius."""
    if model is None:
        model = spec.build(plan)
    p = plan.p
    n_eff_target = rho_target ** plan.a_eff
    drift = p * model.A_p(rho_target / n_eff_target ** (p - 1)) \
        * n_eff_target ** (p - 1)
    x_start = -drift / 2.0

    # targeted seed; families with bounded integrals simply do not admit one
    point = None
    k_idx = None
    try:
        probe = find_violation_seed(
            model, plan.M_target, 0,
            search=_targeted_seed_search(x_start, rho_target))
        k_idx = _assign_index(probe.min_integral, plan.M_target, rho_target)
        if k_idx is not None:
            point = extract_growth_point(
                model, plan.M_target, k_idx,
                ViolationWitness(probe.y, rho_target))
    except (SeedNotFound, SeedInvalidError):
        point = None
    if point is not None:
        x0, rho = point.x, point.rho
    else:
        x0, rho = x_start, rho_target

    n_eff = rho ** plan.a_eff
    fam = LocalizerFamily(model, x0, rho, a=plan.a_eff, mu=plan.mu_eff,
                          cutoff=cutoff, order_cap=plan.s_used())
    t_k = fam.t_horizon
    span = max(abs(x0), abs(x0 + drift))
    L = span + plan.tail_pad + 4.0
    grid = SymbolGrid2D.for_frequency(L, n_eff,
                                      oversampling=plan.oversampling,
                                      guard_fraction=plan.guard_fraction)
    profile = build_packet_profile(cutoff, grid)
    g = build_wavepacket(profile, x0, n_eff, grid)
    traj = solve_cauchy(model, g, t_k, SolverConfig(
        guard_fraction=plan.guard_fraction))
    norms = localize_solution(fam, traj, plan.index_set(), grid)
    wb = fam.weight_base()
    sigma = sigma_series(norms, wb, s_used=plan.s_solve)
    bks = np.array([bk_integral(model, fam, plan.A_s, t) for t in traj.times])
    return GrowthRecord(
        family=spec.key, rho=rho, n=n_eff, n_bookkeeping=rho ** plan.a,
        k=k_idx if point is not None else None,
        lemma_point=point is not None, x_center=x0,
        times=traj.times, sigma=sigma, norms=norms, bk_integrals=bks,
        weight_base=wb, tail_weight=wb ** (plan.s_used() + 1),
        wrap_max=float(np.max(traj.wrap_fractions)),
        grid_N=grid.N, grid_L=grid.L,
        point_margins=(None if point is None
                       else (point.margin_lower_bound,
                             point.margin_positivity)),
        x_tau_spread=0.0 if point is None else point.x_tau_spread)


def _targeted_seed_search(y: float, delta: float):
    from .coefficients import SeedSearchSpec
    return SeedSearchSpec(delta0=delta, delta_max=delta, y_window=abs(y),
                          y_nodes=3)


def _fit_family(records: list, plan: ExperimentPlan) -> FamilyResult:
    rho = np.array([r.rho for r in records])
    log_sigma_end = np.array([math.log(r.sigma[-1]) for r in records])
    growth = np.array([r.growth_log for r in records])
    lower = line_fit(rho, log_sigma_end)
    upper = line_fit(np.log(rho), log_sigma_end)
    m_fit = line_fit(np.log1p(rho), log_sigma_end)
    cls = classify_growth(rho, growth)
    contradiction = {q: bool(m_fit.slope > plan.contradiction_threshold(q))
                     for q in plan.q_list}
    return FamilyResult(records[0].family, records, lower.slope, upper.slope,
                        m_fit.slope, cls, contradiction)


def run_dichotomy_experiment(plan: ExperimentPlan,
                             parallel: int = 1) -> ExperimentResult:
    """Full sweep over the plan's families and radii.

    Per-radius runs are independent; ``parallel`` > 1 distributes them over
    threads, with aggregation in a fixed (family, radius) order.
    """
    cutoff = SmoothCutoff(plan.d_max)
    jobs = [(spec, rho) for spec in plan.families for rho in plan.rho_targets]
    results = {}
    if parallel > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            futs = {(spec.key, rho): pool.submit(
                run_growth_record, plan, spec, rho, cutoff)
                for spec, rho in jobs}
        for (key, rho), fut in futs.items():
            results[(key, rho)] = fut.result()
    else:
        for spec, rho in jobs:
            results[(spec.key, rho)] = run_growth_record(plan, spec, rho, cutoff)
    families = {}
    for spec in plan.families:
        recs = [results[(spec.key, rho)] for rho in plan.rho_targets]
        families[spec.key] = _fit_family(recs, plan)
    return ExperimentResult(plan, families)
