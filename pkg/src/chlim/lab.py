"""Experiment harness: initial data, full runs, reference solutions and studies."""

from __future__ import annotations

import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    GridSpec,
    ModelParams,
    as_field,
    assemble_A,
    assemble_stabilized_operator,
    discrete_energy,
    epsilon_of_grid,
    total_mass,
)
from .lim import EXPLICIT_MODE_LIMIT
from .pchip import pchip_eval
from .report import ConfigurationError, InstabilityError, NumericalFailure
from .schemes import NewtonConfig, SchemeId, StepContext, ee_step, scheme_step

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

COARSE_N = 64
BLOWUP_LIMIT = 1e6
TAU_CAP = 500.0


_EPS_RULE = re.compile(r"(?P<kind>grid|fixed)(?::(?P<m>\d+)(?:@(?P<n_ref>\d+))?)?")


@dataclass(frozen=True)
class EpsRule:
    """``grid``: eps = eps_m(h).  ``fixed``: eps = eps_m(1/n_ref) on every grid."""

    kind: str = "grid"
    m: int = 4
    n_ref: int = 64

    def __post_init__(self):
        if self.kind not in ("grid", "fixed"):
            raise ConfigurationError(f"unknown eps rule kind {self.kind!r}")
        if self.m < 1 or self.n_ref < 1:
            raise ConfigurationError("eps rule needs m >= 1 and n_ref >= 1")

    @classmethod
    def parse(cls, text):
        """``grid:4`` or ``fixed:4@64``."""
        if isinstance(text, cls):
            return text
        m = _EPS_RULE.fullmatch(str(text).strip())
        if m:
            if m["kind"] == "grid" and m["n_ref"] is None:
                return cls("grid", int(m["m"] or 4))
            if m["kind"] == "fixed":
                return cls("fixed", int(m["m"] or 4), int(m["n_ref"] or 64))
        raise ConfigurationError(f"bad eps rule {text!r}; expected grid:M or fixed:M@N")

    def __str__(self):
        return f"grid:{self.m}" if self.kind == "grid" else f"fixed:{self.m}@{self.n_ref}"

    def epsilon(self, grid: GridSpec):
        h = grid.h if self.kind == "grid" else 1.0 / self.n_ref
        return epsilon_of_grid(h, self.m)


@dataclass(frozen=True)
class ExperimentSpec:
    grid: GridSpec
    scheme: SchemeId
    tau: float
    eps_rule: EpsRule = EpsRule()
    final_time: float = 0.2
    seed: int = 0
    ic_mode: str = "random"
    newton: NewtonConfig = NewtonConfig()
    energy_growth_factor: float = 1.01
    mobility: float = 1.0
    tau_ref: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", SchemeId.parse(self.scheme))
        object.__setattr__(self, "eps_rule", EpsRule.parse(self.eps_rule))
        if self.ic_mode not in ("random", "smoothed"):
            raise ConfigurationError(f"ic_mode must be 'random' or 'smoothed', got {self.ic_mode!r}")
        if not self.tau > 0 or not self.final_time > 0:
            raise ConfigurationError("tau and final_time must be positive")
        step_count(self.final_time, self.tau)

    @property
    def n_final(self):
        return step_count(self.final_time, self.tau)

    def params(self):
        return ModelParams(self.eps_rule.epsilon(self.grid), self.mobility, self.final_time)

    def context(self):
        return StepContext(self.grid, self.params(), newton=self.newton)


def step_count(final_time, tau):
    """``T / tau`` as an integer; rejects step sizes that do not divide ``T``."""
    n = round(final_time / tau)
    if n < 1 or abs(n * tau - final_time) > 1e-9 * final_time:
        raise ConfigurationError(f"tau={tau!r} does not divide T={final_time!r} into whole steps")
    return int(n)


@dataclass
class RunSummary:
    final_field: np.ndarray
    steps: int
    total_matvecs: int = 0
    total_linear_solves: int = 0
    total_newton_iters: int = 0
    energy_trace: list = field(default_factory=list)
    mass_drift: float = 0.0
    gradient_stable: bool = True
    error_vs_reference: float | None = None
    completed: bool = True
    failure: str | None = None


# initial data ---------------------------------------------------------------


def random_ic(grid: GridSpec, seed):
    """Uniform ``[0, 1]`` entries rounded half away from zero to two decimals.

    Philox is counter based, so entry ``i`` depends only on ``(seed, i)``.
    """
    bitgen = np.random.Philox(key=int(seed) & (2**64 - 1))
    u = np.random.Generator(bitgen).random(grid.n_cells)
    return np.floor(u * 100.0 + 0.5) / 100.0


def smoothed_ic(coarse, fine_grid: GridSpec):
    """Interpolate data on the ``N = 64`` cell centres to a finer grid with pchip."""
    coarse = as_field(coarse, COARSE_N)
    if fine_grid.n_cells < COARSE_N:
        raise ConfigurationError(f"fine grid ({fine_grid.n_cells}) is coarser than the source ({COARSE_N})")
    return pchip_eval(GridSpec(COARSE_N).nodes, coarse, fine_grid.nodes)


def initial_condition(spec: ExperimentSpec):
    if spec.ic_mode == "random":
        return random_ic(spec.grid, spec.seed)
    return smoothed_ic(random_ic(GridSpec(COARSE_N), spec.seed), spec.grid)


# runs -----------------------------------------------------------------------


def integrate(spec: ExperimentSpec, ic=None, steps=None, stop_on_energy_growth=False, callback=None):
    """Run ``spec`` from ``ic`` (default: the spec's initial condition).

    ``steps`` overrides ``n_final``.  Numerical blow-up and solver failures end
    the run early and are reported in the summary, not raised.
    """
    ctx = spec.context()
    c = as_field(initial_condition(spec) if ic is None else ic, spec.grid.n_cells).copy()
    n_steps = spec.n_final if steps is None else int(steps)
    params, grid = ctx.params, ctx.grid
    energy = discrete_energy(c, params, grid).total
    mass0 = total_mass(c, grid)
    summary = RunSummary(final_field=c, steps=0, energy_trace=[energy])
    for n in range(1, n_steps + 1):
        try:
            c_next, report = scheme_step(spec.scheme, c, spec.tau, ctx, step=n, energies=False)
        except NumericalFailure as exc:
            summary.completed = False
            summary.gradient_stable = False
            summary.failure = f"{type(exc).__name__}: {exc}"
            break
        summary.total_matvecs += report.matvecs
        summary.total_linear_solves += report.linear_solves
        summary.total_newton_iters += report.newton_iters
        summary.steps += 1
        if np.max(np.abs(c_next)) > BLOWUP_LIMIT:
            summary.energy_trace.append(discrete_energy(c_next, params, grid).total)
            summary.final_field = c_next
            summary.completed = False
            summary.gradient_stable = False
            summary.failure = f"blow-up: max|c| exceeded {BLOWUP_LIMIT:g} at step {n}"
            break
        new_energy = discrete_energy(c_next, params, grid).total
        summary.energy_trace.append(new_energy)
        summary.mass_drift = max(summary.mass_drift, abs(total_mass(c_next, grid) - mass0))
        if new_energy > spec.energy_growth_factor * energy:
            summary.gradient_stable = False
        c, energy = c_next, new_energy
        summary.final_field = c
        if callback is not None:
            callback(n, c, report)
        if stop_on_energy_growth and not summary.gradient_stable:
            break
    return summary


if numba is not None:

    @numba.njit(cache=True)
    def _ee_kernel(c, ab, eps2, dt, n_steps):  # pragma: no cover - compiled
        # Same operation order as BandedOperator.matvec / dF so results agree bitwise.
        n = c.shape[0]
        v = np.empty(n)
        mu = np.empty(n)
        for _ in range(n_steps):
            for i in range(n):
                acc = ab[1, i] * c[i]
                if i < n - 1:
                    acc += ab[0, i + 1] * c[i + 1]
                if i > 0:
                    acc += ab[2, i - 1] * c[i - 1]
                v[i] = acc
            for i in range(n):
                ci = c[i]
                t = 2.0 * ci
                mu[i] = t * (t * ci - 3.0 * ci + 1.0) + eps2 * v[i]
            for i in range(n):
                acc = ab[1, i] * mu[i]
                if i < n - 1:
                    acc += ab[0, i + 1] * mu[i + 1]
                if i > 0:
                    acc += ab[2, i - 1] * mu[i - 1]
                v[i] = acc
            finite = True
            for i in range(n):
                c[i] = c[i] - dt * v[i]
                if not np.isfinite(c[i]):
                    finite = False
            if not finite:
                return False
        return True


def _ee_run(c, grid, params, tau, n_steps, jit=True):
    c = np.array(c, dtype=float)
    A = assemble_A(grid)
    dt = params.mobility * tau
    if jit and numba is not None:
        ab = np.ascontiguousarray(A.bands)
        if not _ee_kernel(c, ab, params.epsilon**2, dt, n_steps):
            raise InstabilityError(f"reference EE run at tau={tau:g} is unstable")
        return c
    ctx = StepContext(grid, params)
    for n in range(n_steps):
        c, _ = ee_step(c, tau, ctx, step=n)
    return c


def default_tau_ref(smallest_tau):
    return min(1e-7, smallest_tau / 100.0)


def reference_solution(spec: ExperimentSpec, ic=None, tau_ref=None):
    """Explicit Euler solution at a tiny step size ``tau_ref``."""
    tau_ref = tau_ref or spec.tau_ref or default_tau_ref(spec.tau)
    ic = initial_condition(spec) if ic is None else ic
    n = step_count(spec.final_time, tau_ref)
    return _ee_run(as_field(ic, spec.grid.n_cells), spec.grid, spec.params(), tau_ref, n)


def relative_error(c, c_ref):
    c = np.asarray(c, dtype=float)
    c_ref = np.asarray(c_ref, dtype=float)
    if c.shape != c_ref.shape:
        raise ValueError("dimension mismatch")
    norm = float(np.linalg.norm(c_ref))
    if norm == 0.0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm(c - c_ref)) / norm


# spectral bound -------------------------------------------------------------


def spectral_bound(grid: GridSpec, eps_rule="grid:4"):
    """``(lambda_inf, tau)`` where ``lambda_inf = ||2A + eps^2 A^2||_1`` and ``tau``
    is the largest step for which the Chebyshev order is 1 (explicit mode)."""
    rule = EpsRule.parse(eps_rule)
    params = ModelParams(rule.epsilon(grid))
    A = assemble_A(grid)
    lam = assemble_stabilized_operator(A, params, "LSS").one_norm
    return lam, EXPLICIT_MODE_LIMIT / lam


# stability scan -------------------------------------------------------------


@dataclass
class StabilityScanResult:
    scheme: SchemeId
    grid: GridSpec
    tau_max: float
    unconditional: bool
    seeds_used: list
    history: list = field(default_factory=list)


def is_gradient_stable(spec: ExperimentSpec, seeds, steps):
    for seed in seeds:
        run = integrate(replace(spec, seed=seed), steps=steps, stop_on_energy_growth=True)
        if not (run.completed and run.gradient_stable):
            return False
    return True


def gradient_stability_scan(
    scheme,
    grid: GridSpec,
    eps_rule="grid:4",
    seeds=(0, 1, 2, 3, 4),
    final_time=0.2,
    steps=50,
    tau_low=1e-9,
    tau_cap=TAU_CAP,
    ratio=1.1,
    sweep=4.0,
    newton=NewtonConfig(),
):
    """Largest ``tau`` such that the energy growth criterion holds for every seed
    at every tested step size up to ``tau``.

    Stability is not monotone in ``tau`` for the Newton-based schemes (a huge
    step can pass while moderate ones fail), so the unstable bracket is the
    first failure of a geometric sweep upward from ``tau_low`` by ``sweep``,
    not ``tau_cap``.  The bracket is then bisected on ``log(tau)`` until its
    ratio is <= ``ratio``.  Each trial runs ``steps`` steps.
    """
    seeds = list(seeds)
    if not seeds:
        raise ConfigurationError("stability scan needs at least one seed")
    if not (0 < tau_low < tau_cap and sweep > 1 and ratio > 1):
        raise ConfigurationError("need 0 < tau_low < tau_cap, sweep > 1 and ratio > 1")
    scheme = SchemeId.parse(scheme)
    base = ExperimentSpec(
        grid=grid, scheme=scheme, tau=tau_cap, eps_rule=eps_rule, final_time=tau_cap, newton=newton
    )

    def trial(tau):
        spec = replace(base, tau=tau, final_time=tau)
        ok = is_gradient_stable(spec, seeds, steps)
        history.append((tau, ok))
        return ok

    history = []
    lo, hi = 0.0, tau_low
    while True:
        if not trial(hi):
            break
        if hi == tau_cap:
            return StabilityScanResult(scheme, grid, tau_cap, True, seeds, history)
        lo, hi = hi, min(hi * sweep, tau_cap)
    if lo == 0.0:
        return StabilityScanResult(scheme, grid, 0.0, False, seeds, history)
    while hi / lo > ratio:
        mid = math.sqrt(lo * hi)
        if trial(mid):
            lo = mid
        else:
            hi = mid
    return StabilityScanResult(scheme, grid, lo, False, seeds, history)


# studies --------------------------------------------------------------------

STUDY_COLUMNS = ("scheme", "N", "tau", "steps", "matvecs", "linear_solves", "newton_iters", "error")


def _study_cell(args):
    spec, ic, c_ref = args
    run = integrate(spec, ic)
    error = relative_error(run.final_field, c_ref) if run.completed else float("nan")
    return {
        "scheme": spec.scheme.value,
        "N": spec.grid.n_cells,
        "tau": spec.tau,
        "steps": run.steps,
        "matvecs": run.total_matvecs,
        "linear_solves": run.total_linear_solves,
        "newton_iters": run.total_newton_iters,
        "error": error,
    }


def run_cells(cells, jobs=1):
    """Evaluate study cells, serially or in a process pool; order follows ``cells``."""
    if jobs <= 1 or len(cells) <= 1:
        return [_study_cell(cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_study_cell, cells))


def fit_slope(taus, errors):
    """Least-squares slope of ``log(error)`` against ``log(tau)``."""
    x, y = np.log(np.asarray(taus, float)), np.log(np.asarray(errors, float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class StudyResult:
    rows: list
    slopes: dict
    reference_floor: float
    tau_ref: float


def _reference(base, ic, tau_ref):
    c_ref = reference_solution(base, ic, tau_ref)
    # the EE reference is first order, so its own error is about |c(tau) - c(2 tau)|
    floor = float("nan")
    try:
        floor = relative_error(reference_solution(base, ic, 2 * tau_ref), c_ref)
    except (InstabilityError, ConfigurationError):
        pass
    return c_ref, floor


def convergence_study(
    schemes,
    grid: GridSpec,
    eps_rule,
    taus,
    ic=None,
    final_time=0.2,
    tau_ref=None,
    seed=0,
    ic_mode="random",
    jobs=1,
):
    """Error and cost of each scheme over a list of step sizes, one shared reference."""
    taus = sorted(taus, reverse=True)
    schemes = [SchemeId.parse(s) for s in schemes]
    tau_ref = tau_ref or default_tau_ref(taus[-1])
    base = ExperimentSpec(grid, SchemeId.EE, taus[-1], eps_rule, final_time, seed, ic_mode)
    ic = initial_condition(base) if ic is None else as_field(ic, grid.n_cells)
    c_ref, floor = _reference(base, ic, tau_ref)
    cells = [(replace(base, scheme=s, tau=t), ic, c_ref) for s in schemes for t in taus]
    rows = run_cells(cells, jobs)
    slopes = {}
    for s in schemes:
        pts = [
            (r["tau"], r["error"])
            for r in rows
            if r["scheme"] == s.value and np.isfinite(r["error"]) and not r["error"] <= 10 * floor
        ]
        slopes[s.value] = fit_slope(*zip(*pts)) if len(pts) >= 2 else float("nan")
    return StudyResult(rows, slopes, floor, tau_ref)


def efficiency_study(
    schemes,
    grid: GridSpec,
    eps_rules=("grid:4", "fixed:4@64"),
    taus=(1e-5,),
    ic_modes=("random", "smoothed"),
    final_time=0.2,
    tau_ref=None,
    seed=0,
    jobs=1,
):
    """Cost/accuracy rows for every (eps rule, IC mode) pair.

    Returns ``{(eps_rule_str, ic_mode): StudyResult}``.  Step sizes a scheme
    cannot run at show up with ``error = nan``.
    """
    out = {}
    for rule in eps_rules:
        rule = EpsRule.parse(rule)
        for mode in ic_modes:
            out[(str(rule), mode)] = convergence_study(
                schemes, grid, rule, taus, None, final_time, tau_ref, seed, mode, jobs
            )
    return out
