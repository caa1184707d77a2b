"""Time steppers for the semi-discrete Cahn-Hilliard system.

Cost convention: one "matvec" is one application of the step's composite
spatial operator (one right-hand side for EE, one source assembly for a
linearly implicit step, one ``op @ y`` per Chebyshev iteration).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import lim
from .banded import BandedLU, BandedOperator
from .core import (
    GridSpec,
    ModelParams,
    as_field,
    assemble_A,
    assemble_stabilized_operator,
    d2F,
    dF,
    discrete_energy,
    total_mass,
)
from .report import ConfigurationError, InstabilityError, NewtonFailure, StepReport


class SchemeId(str, Enum):
    EE = "EE"
    IE = "IE"
    CN = "CN"
    SIE = "SIE"
    NLSS = "NLSS"
    LSS = "LSS"
    LIE = "LIE"
    LIM_LSS = "LIM-LSS"
    LIM_LIE = "LIM-LIE"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("_", "-")
        for scheme in cls:
            if scheme.value == key:
                return scheme
        valid = ", ".join(s.value for s in cls)
        raise ConfigurationError(f"unknown scheme {name!r}; valid names: {valid}")


@dataclass(frozen=True)
class NewtonConfig:
    rel_tol: float = 1e-12
    max_iters: int = 50

    def __post_init__(self):
        if not self.rel_tol > 0 or self.max_iters < 1:
            raise ConfigurationError("Newton needs rel_tol > 0 and max_iters >= 1")


@dataclass
class StepContext:
    """Operators and settings shared by all steps of one run.

    Not thread-safe: it caches factorizations keyed by step size.
    """

    grid: GridSpec
    params: ModelParams
    newton: NewtonConfig = NewtonConfig()
    ordering: object = "leja"
    forced_p: int | None = None
    A: BandedOperator = field(init=False)
    A2: BandedOperator = field(init=False)
    A_hat: BandedOperator = field(init=False)
    _factors: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self):
        self.A = assemble_A(self.grid)
        self.A2 = self.A.compose(self.A)
        self.A_hat = assemble_stabilized_operator(self.A, self.params, "LSS", A2=self.A2)

    @property
    def eps2(self):
        return self.params.epsilon**2

    def dt(self, tau):
        # constant mobility only rescales time
        return self.params.mobility * tau

    def factor(self, kind, dt):
        key = (kind, dt)
        lu = self._factors.get(key)
        if lu is None:
            if kind == "SIE":
                op = self.A2.scaled(dt * self.eps2).shifted(1.0)
            elif kind == "LSS":
                op = self.A_hat.scaled(dt).shifted(1.0)
            else:
                raise KeyError(kind)
            lu = self._factors[key] = BandedLU(op)
        return lu

    def lie_operator(self, c):
        return assemble_stabilized_operator(self.A, self.params, "LIE", state=c, A2=self.A2)


def _check_tau(tau):
    if not tau > 0:
        raise ConfigurationError(f"step size must be positive, got {tau}")


def _finite(y, step, scheme):
    if not np.all(np.isfinite(y)):
        where = "" if step is None else f" at step {step}"
        raise InstabilityError(f"{scheme} produced non-finite values{where}", step=step)
    return y


def ee_step(c, tau, ctx: StepContext, step=None):
    _check_tau(tau)
    c = as_field(c, ctx.grid.n_cells)
    A = ctx.A
    with np.errstate(over="ignore", invalid="ignore"):
        y = c - ctx.dt(tau) * A.matvec(dF(c) + ctx.eps2 * A.matvec(c))
    return _finite(y, step, "EE"), StepReport(matvecs=1)


def sie_step(c, tau, ctx: StepContext, step=None):
    _check_tau(tau)
    c = as_field(c, ctx.grid.n_cells)
    dt = ctx.dt(tau)
    rhs = c - dt * ctx.A.matvec(dF(c))
    y = ctx.factor("SIE", dt).solve(rhs)
    return _finite(y, step, "SIE"), StepReport(matvecs=1, linear_solves=1)


def lss_source(c, ctx):
    """``A (2c - F'(c))``, the explicit rate of the linearly stabilized splitting."""
    return ctx.A.matvec(2.0 * c - dF(c))


def lie_source(c, ctx):
    """``A (J_n c - F'(c))`` with ``J_n = diag(F''(c))``."""
    return ctx.A.matvec(d2F(c) * c - dF(c))


def lss_step(c, tau, ctx: StepContext, step=None):
    _check_tau(tau)
    c = as_field(c, ctx.grid.n_cells)
    dt = ctx.dt(tau)
    y = ctx.factor("LSS", dt).solve(c + dt * lss_source(c, ctx))
    return _finite(y, step, "LSS"), StepReport(matvecs=1, linear_solves=1)


def lie_step(c, tau, ctx: StepContext, step=None):
    _check_tau(tau)
    c = as_field(c, ctx.grid.n_cells)
    dt = ctx.dt(tau)
    op = ctx.lie_operator(c).scaled(dt).shifted(1.0)
    y = BandedLU(op).solve(c + dt * lie_source(c, ctx))
    return _finite(y, step, "LIE"), StepReport(matvecs=1, linear_solves=1)


# (theta, sigma) in the Newton Jacobian I + theta*dt*A (diag(F''(u)) + sigma*I + eps^2 A)
_NEWTON_SHAPES = {SchemeId.IE: (1.0, 0.0), SchemeId.CN: (0.5, 0.0), SchemeId.NLSS: (1.0, 1.0)}


def implicit_step(c, tau, scheme, ctx: StepContext, cfg: NewtonConfig | None = None, step=None):
    """Nonlinear implicit step (IE, CN or NLSS) solved by plain Newton from ``u = c``."""
    _check_tau(tau)
    scheme = SchemeId.parse(scheme)
    if scheme not in _NEWTON_SHAPES:
        raise ConfigurationError(f"{scheme.value} is not a Newton-based scheme")
    cfg = cfg or ctx.newton
    c = as_field(c, ctx.grid.n_cells)
    A, eps2, dt = ctx.A, ctx.eps2, ctx.dt(tau)
    theta, sigma = _NEWTON_SHAPES[scheme]
    explicit = np.zeros_like(c)
    if scheme is SchemeId.CN:
        explicit = dF(c) + eps2 * A.matvec(c)
    elif scheme is SchemeId.NLSS:
        explicit = -c

    def residual(u):
        terms = (dF(u), sigma * u, eps2 * A.matvec(u), explicit)
        potential = terms[0] + terms[1] + terms[2] + terms[3]
        r = u - c + theta * dt * A.matvec(potential)
        # rounding floor of r: the potential is a sum of nearly cancelling O(1) terms
        size = sum(float(np.max(np.abs(t))) for t in terms)
        scale = float(np.max(np.abs(u))) + float(np.max(np.abs(c))) + theta * dt * A.one_norm * size
        return r, 64.0 * np.finfo(float).eps * scale

    # max(., 1) keeps the test meaningful for states that are identically ~0
    tol = cfg.rel_tol * max(float(np.max(np.abs(c))), 1.0)
    u = c.copy()
    report = StepReport()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(cfg.max_iters + 1):
            r, floor = residual(u)
            rnorm = float(np.max(np.abs(r)))
            if not np.isfinite(rnorm):
                raise NewtonFailure(
                    f"{scheme.value}: Newton diverged at iteration {k}", rnorm, k
                )
            if rnorm <= max(tol, floor):
                return u, report
            if k == cfg.max_iters:
                break
            jac = A.column_scaled(d2F(u) + sigma).plus(ctx.A2, eps2).scaled(theta * dt).shifted(1.0)
            u = u - BandedLU(jac).solve(r)
            report.newton_iters += 1
            report.linear_solves += 1
            report.matvecs += 1
    where = "" if step is None else f" at step {step}"
    raise NewtonFailure(
        f"{scheme.value}: Newton did not converge in {cfg.max_iters} iterations{where} "
        f"(residual {rnorm:.3e}, tolerance {tol:.3e})",
        rnorm,
        cfg.max_iters,
    )


def _lim_plan(ctx, dt, op):
    return lim.plan_chebyshev(dt, op.one_norm, ordering=ctx.ordering, p=ctx.forced_p)


def lim_lss_step(c, tau, ctx: StepContext, step=None, iterates=None):
    _check_tau(tau)
    c = as_field(c, ctx.grid.n_cells)
    dt = ctx.dt(tau)
    plan = _lim_plan(ctx, dt, ctx.A_hat)
    try:
        y, report = lim.lim_step(c, dt, ctx.A_hat, lss_source(c, ctx), plan, iterates)
    except InstabilityError as exc:
        exc.step = step
        raise
    return y, report


def lim_lie_step(c, tau, ctx: StepContext, step=None, iterates=None):
    _check_tau(tau)
    c = as_field(c, ctx.grid.n_cells)
    dt = ctx.dt(tau)
    op = ctx.lie_operator(c)
    plan = _lim_plan(ctx, dt, op)
    try:
        y, report = lim.lim_step(c, dt, op, lie_source(c, ctx), plan, iterates)
    except InstabilityError as exc:
        exc.step = step
        raise
    return y, report


_STEPPERS = {
    SchemeId.EE: ee_step,
    SchemeId.SIE: sie_step,
    SchemeId.LSS: lss_step,
    SchemeId.LIE: lie_step,
    SchemeId.LIM_LSS: lim_lss_step,
    SchemeId.LIM_LIE: lim_lie_step,
}


def scheme_step(scheme, c, tau, ctx: StepContext, step=None, energies=True):
    """Advance one step with any scheme; fills energy and mass in the report."""
    scheme = SchemeId.parse(scheme)
    if scheme in _NEWTON_SHAPES:
        y, report = implicit_step(c, tau, scheme, ctx, step=step)
    else:
        y, report = _STEPPERS[scheme](c, tau, ctx, step=step)
    if energies:
        report.energy_before = discrete_energy(c, ctx.params, ctx.grid).total
        report.energy_after = discrete_energy(y, ctx.params, ctx.grid).total
        report.mass = total_mass(y, ctx.grid)
    return y, report
