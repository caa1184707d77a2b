"""Local iteration (LI) and local iteration modified (LIM) Chebyshev steps.

One step approximates the linearly implicit update ``(I + tau*op) y = c + tau*g``
by explicit iterations

    y <- (c + tau*a_m*y + tau*(g - op @ y)) / (1 + tau*a_m)

starting from ``y = c``.  LI runs one sweep over the ``p`` Chebyshev parameters;
LIM runs a second sweep that skips ``a_1 = 0``, for ``2p - 1`` iterations in total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import as_field
from .report import InstabilityError, StepReport

#: Largest ``tau * lambda_inf`` for which a single (explicit Euler) iteration suffices.
EXPLICIT_MODE_LIMIT = (4.0 / math.pi) ** 2 - 1.0

MAX_DENSE_ORACLE = 64


def chebyshev_order(tau, lambda_inf):
    # Nudge down by a few ulps so exact integers are not rounded up past themselves.
    x = 0.25 * math.pi * math.sqrt(tau * lambda_inf + 1.0)
    return max(1, math.ceil(x * (1.0 - 4.0 * np.finfo(float).eps)))


def alternating_order(p):
    """Indices into the descending roots: largest, smallest, 2nd largest, 2nd smallest, ..."""
    order, lo, hi = [], 0, p - 1
    while lo <= hi:
        order.append(lo)
        lo += 1
        if lo <= hi:
            order.append(hi)
            hi -= 1
    return order


def natural_order(p):
    return list(range(p))


@lru_cache(maxsize=64)
def _leja(p):
    roots = np.cos(np.pi * (2.0 * np.arange(1, p + 1) - 1.0) / (2.0 * p))
    order = [0]
    used = np.zeros(p, dtype=bool)
    used[0] = True
    with np.errstate(divide="ignore"):
        log_dist = np.log(np.abs(roots - roots[0]))
    for _ in range(1, p):
        j = int(np.argmax(np.where(used, -np.inf, log_dist)))
        order.append(j)
        used[j] = True
        with np.errstate(divide="ignore"):
            log_dist = log_dist + np.log(np.abs(roots - roots[j]))
    return tuple(order)


def leja_order(p):
    """Leja ordering starting from the largest root.

    Each next root maximizes the product of distances to the roots already
    taken, which keeps partial products of the iteration factors small for
    any ``p``.
    """
    return list(_leja(p))


ORDERINGS = {"leja": leja_order, "alternating": alternating_order, "natural": natural_order}


@dataclass(frozen=True)
class ChebyshevPlan:
    p: int
    tau: float
    lambda_inf: float
    z1: float
    betas: tuple
    a: tuple

    @property
    def iterations(self):
        return 2 * self.p - 1


def plan_chebyshev(tau, lambda_inf, ordering="leja", p=None):
    """Chebyshev order, ordered roots and parameters for one step.

    ``ordering`` is a name from :data:`ORDERINGS`, a callable ``p -> permutation``
    or an explicit permutation of ``range(p)`` (which must start with 0).
    ``p`` overrides the order formula.
    """
    if not tau >= 0 or not lambda_inf >= 0:
        raise ValueError("need tau >= 0 and lambda_inf >= 0")
    if p is None:
        p = chebyshev_order(tau, lambda_inf)
    if p < 1:
        raise ValueError("p must be >= 1")
    roots = np.cos(np.pi * (2.0 * np.arange(1, p + 1) - 1.0) / (2.0 * p))
    if callable(ordering):
        perm = list(ordering(p))
    elif isinstance(ordering, str):
        perm = ORDERINGS[ordering](p)
    else:
        perm = list(ordering)
    if sorted(perm) != list(range(p)) or perm[0] != 0:
        raise ValueError("ordering must be a permutation of range(p) starting with 0")
    betas = roots[perm]
    z1 = float(roots[0])
    a = lambda_inf / (1.0 + z1) * (z1 - betas)
    a[0] = 0.0
    return ChebyshevPlan(int(p), float(tau), float(lambda_inf), z1, tuple(betas), tuple(a))


def _iterate(c, tau, op, source, a_values, keep=None):
    y = c
    rate = c + tau * source
    with np.errstate(over="ignore", invalid="ignore"):
        for k, a in enumerate(a_values, start=1):
            y = (rate + tau * a * y - tau * op.matvec(y)) / (1.0 + tau * a)
            if not np.all(np.isfinite(y)):
                raise InstabilityError(f"non-finite Chebyshev iterate {k}", iteration=k)
            if keep is not None:
                keep.append(y)
    return y


def lim_step(c, tau, op, source, plan: ChebyshevPlan, iterates=None):
    """LIM step: ``2p - 1`` Chebyshev iterations.  Returns ``(y, StepReport)``.

    If ``iterates`` is a list, every intermediate ``y`` is appended to it.
    """
    c = as_field(c, op.n)
    if plan.p == 1:
        with np.errstate(over="ignore", invalid="ignore"):
            y = c + tau * (source - op.matvec(c))
        if not np.all(np.isfinite(y)):
            raise InstabilityError("non-finite Chebyshev iterate 1", iteration=1)
        if iterates is not None:
            iterates.append(y)
    else:
        y = _iterate(c, tau, op, source, plan.a + plan.a[1:], iterates)
    n_it = 2 * plan.p - 1
    return y, StepReport(matvecs=n_it, cheb_iters=n_it)


def li_step(c, tau, op, source, plan: ChebyshevPlan, iterates=None):
    """Regular LI step: a single sweep of ``p`` iterations."""
    c = as_field(c, op.n)
    y = _iterate(c, tau, op, source, plan.a, iterates)
    return y, StepReport(matvecs=plan.p, cheb_iters=plan.p)


def chebyshev_factor(tau, dense_op, plan: ChebyshevPlan):
    """Dense ``F_p = prod_m (I - (I + tau*op) / (1 + tau*a_m))``."""
    n = dense_op.shape[0]
    eye = np.eye(n)
    shifted = eye + tau * dense_op
    f = eye.copy()
    for a in plan.a:
        f = (eye - shifted / (1.0 + tau * a)) @ f
    return f


def lim_operator_oracle(c, tau, dense_op, source, plan: ChebyshevPlan, modified=True):
    """Operator form ``(I - F_p^k) (I + tau*op)^{-1} (c + tau*g)``, ``k = 2`` (LIM) or 1 (LI).

    Dense; for tests only.
    """
    dense_op = np.asarray(dense_op, dtype=float)
    n = dense_op.shape[0]
    if n > MAX_DENSE_ORACLE:
        raise ValueError(f"dense oracle limited to N <= {MAX_DENSE_ORACLE}, got {n}")
    f = chebyshev_factor(tau, dense_op, plan)
    poly = f @ f if modified else f
    implicit = np.linalg.solve(np.eye(n) + tau * dense_op, np.asarray(c) + tau * np.asarray(source))
    return (np.eye(n) - poly) @ implicit


def lim_affine_oracle(c, tau, dense_op, source, plan: ChebyshevPlan, modified=True):
    """Closed form of the iteration started from ``y = c``.

    Every iteration contracts the distance to ``y* = (I + tau*op)^{-1}(c + tau*g)``
    by its factor, so the result is ``y* + P (c - y*)`` with ``P`` the product of
    all applied factors.  Reduces to :func:`lim_operator_oracle` when ``g = 0``
    (LIM case).  Dense; for tests only.
    """
    dense_op = np.asarray(dense_op, dtype=float)
    n = dense_op.shape[0]
    if n > MAX_DENSE_ORACLE:
        raise ValueError(f"dense oracle limited to N <= {MAX_DENSE_ORACLE}, got {n}")
    eye = np.eye(n)
    shifted = eye + tau * dense_op
    a_values = plan.a + plan.a[1:] if modified else plan.a
    poly = eye.copy()
    for a in a_values:
        poly = (eye - shifted / (1.0 + tau * a)) @ poly
    c = np.asarray(c, dtype=float)
    y_star = np.linalg.solve(shifted, c + tau * np.asarray(source))
    return y_star + poly @ (c - y_star)
