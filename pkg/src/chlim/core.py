"""Grid, double-well potential, discrete operators and free energy for 1D Cahn-Hilliard.

The semi-discrete system on ``N`` cells of ``(0, 1)`` with homogeneous Neumann
conditions is ``c' = -M A (F'(c) + eps^2 A c)`` with ``A = -Laplacian_h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .banded import BandedOperator

#: ``atanh(9/10)``; sets the interface width in grid cells.
ATANH_09 = math.atanh(0.9)


@dataclass(frozen=True)
class GridSpec:
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ValueError(f"n_cells must be an integer >= 4, got {self.n_cells}")

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        """Cell centres ``x_i = (i - 1/2) h``, ``i = 1..N``."""
        return (np.arange(self.n_cells) + 0.5) / self.n_cells


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    mobility: float = 1.0
    final_time: float = 0.2

    def __post_init__(self):
        problems = [
            f"{name} must be > 0, got {value}"
            for name, value in (
                ("epsilon", self.epsilon),
                ("mobility", self.mobility),
                ("final_time", self.final_time),
            )
            if not value > 0
        ]
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class EnergyReport:
    dividing_part: float
    gradient_part: float

    @property
    def total(self) -> float:
        return self.dividing_part + self.gradient_part


class StabilizedMode(str, Enum):
    LSS = "LSS"
    LIE = "LIE"


def as_field(c, n=None):
    """Validate a state vector: 1D, finite, optionally of length ``n``."""
    c = np.asarray(c, dtype=float)
    if c.ndim != 1:
        raise ValueError(f"field must be one-dimensional, got shape {c.shape}")
    if n is not None and c.shape[0] != n:
        raise ValueError(f"dimension mismatch: field has {c.shape[0]} entries, grid has {n}")
    if not np.all(np.isfinite(c)):
        raise ValueError("field contains non-finite values")
    return c


def double_well(c):
    """Return ``F(c) = c^2 (1-c)^2`` and its first two derivatives."""
    c = np.asarray(c, dtype=float)
    f = c * c * (1.0 - c) ** 2
    f1 = 2.0 * c * (2.0 * c * c - 3.0 * c + 1.0)
    f2 = 2.0 * (6.0 * c * c - 6.0 * c + 1.0)
    if f.ndim == 0:
        return float(f), float(f1), float(f2)
    return f, f1, f2


def dF(c):
    return 2.0 * c * (2.0 * c * c - 3.0 * c + 1.0)


def d2F(c):
    return 2.0 * (6.0 * c * c - 6.0 * c + 1.0)


def epsilon_of_grid(h, m=4):
    """Interface width spanning about ``m`` cells of size ``h``."""
    if not h > 0 or m < 1:
        raise ValueError("need h > 0 and m >= 1")
    return h * m / (2.0 * math.sqrt(2.0) * ATANH_09)


def assemble_A(grid: GridSpec) -> BandedOperator:
    """Tridiagonal ``-Laplacian_h`` with ghost-cell Neumann rows."""
    n, inv_h2 = grid.n_cells, grid.n_cells**2
    main = np.full(n, 2.0 * inv_h2)
    main[0] = main[-1] = inv_h2
    off = np.full(n - 1, -inv_h2)
    return BandedOperator.from_diagonals({-1: off, 0: main, 1: off}, symmetric=True)


def apply_operator(op: BandedOperator, v, counter=None):
    """``op @ v``; bumps ``counter['matvecs']`` when a counter dict is given."""
    out = op.matvec(as_field(v, op.n))
    if counter is not None:
        counter["matvecs"] = counter.get("matvecs", 0) + 1
    return out


def chemical_potential(c, params: ModelParams, A: BandedOperator):
    c = as_field(c, A.n)
    return dF(c) + params.epsilon**2 * A.matvec(c)


def rhs_eval(c, params: ModelParams, A: BandedOperator):
    """Right-hand side ``-M A (F'(c) + eps^2 A c)`` of the semi-discrete system."""
    return -params.mobility * A.matvec(chemical_potential(c, params, A))


def discrete_energy(c, params: ModelParams, grid: GridSpec, literal=False) -> EnergyReport:
    """Discrete free energy.

    ``literal=True`` evaluates the dividing part with ``F'`` in place of ``F``;
    kept only as a diagnostic, since that variant can be negative.
    """
    c = as_field(c, grid.n_cells)
    h = grid.h
    f, f1, _ = double_well(c)
    dividing = h * float(np.sum(f1 if literal else f))
    jumps = np.diff(c)
    gradient = 0.5 * params.epsilon**2 * h * float(np.dot(jumps, jumps)) / (h * h)
    return EnergyReport(dividing, gradient)


def total_mass(c, grid: GridSpec) -> float:
    return grid.h * float(np.sum(as_field(c, grid.n_cells)))


def assemble_stabilized_operator(
    A: BandedOperator, params: ModelParams, mode="LSS", state=None, A2=None
) -> BandedOperator:
    """Pentadiagonal ``A (2I + eps^2 A)`` (LSS) or ``A (J_n + eps^2 A)`` (LIE).

    ``J_n = diag(F''(state))``.  ``A2`` may pass a precomputed ``A @ A``.
    """
    mode = StabilizedMode(mode)
    if A2 is None:
        A2 = A.compose(A)
    eps2 = params.epsilon**2
    if mode is StabilizedMode.LSS:
        return A.scaled(2.0).plus(A2, eps2)
    if state is None:
        raise ValueError("LIE mode requires the current state")
    state = as_field(state, A.n)
    return A.column_scaled(d2F(state)).plus(A2, eps2)
