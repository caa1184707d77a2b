"""Banded matrices in LAPACK ``ab`` storage and a direct banded LU solver.

Entry ``(i, j)`` of an operator with ``upper`` super-diagonals is stored at
``bands[upper + i - j, j]``, which is the layout expected by
:func:`scipy.linalg.solve_banded` and the ``?gbtrf`` family.  One useful
consequence: column ``j`` of the matrix sits in column ``j`` of ``bands``,
so the 1-norm is a column reduction of the storage array.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack


class SolverFailure(RuntimeError):
    """Raised when a banded factorization hits a (numerically) zero pivot."""


class BandedOperator:
    """Square banded matrix with a cached maximum absolute column sum."""

    def __init__(self, bands, lower, upper, symmetric=False):
        bands = np.array(bands, dtype=float)
        if bands.ndim != 2 or bands.shape[0] != lower + upper + 1:
            raise ValueError(
                f"bands must have shape ({lower + upper + 1}, n), got {bands.shape}"
            )
        self.bands = bands
        self.bands.setflags(write=False)
        self.n = bands.shape[1]
        self.lower = int(lower)
        self.upper = int(upper)
        self.symmetric = bool(symmetric)
        self.one_norm = float(np.abs(bands).sum(axis=0).max()) if self.n else 0.0

    def __repr__(self):
        return (
            f"BandedOperator(n={self.n}, lower={self.lower}, upper={self.upper}, "
            f"symmetric={self.symmetric}, one_norm={self.one_norm:.6g})"
        )

    # construction -------------------------------------------------------

    @classmethod
    def from_diagonals(cls, diagonals, symmetric=False):
        """Build from ``{offset: values}``; ``values[k]`` is row ``k`` of that diagonal.

        For offset ``d`` the diagonal has ``n - |d|`` entries, entry ``k`` being
        ``a[k, k + d]`` for ``d >= 0`` and ``a[k - d, k]`` for ``d < 0``.
        """
        n = len(diagonals[0])
        lower = max([-d for d in diagonals if d < 0], default=0)
        upper = max([d for d in diagonals if d > 0], default=0)
        ab = np.zeros((lower + upper + 1, n))
        for d, vals in diagonals.items():
            vals = np.asarray(vals, dtype=float)
            if len(vals) != n - abs(d):
                raise ValueError(f"diagonal {d} has length {len(vals)}, expected {n - abs(d)}")
            if d >= 0:
                ab[upper - d, d:] = vals
            else:
                ab[upper - d, : n + d] = vals
        return cls(ab, lower, upper, symmetric=symmetric)

    @classmethod
    def from_dense(cls, a, lower, upper, symmetric=False):
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        ab = np.zeros((lower + upper + 1, n))
        # offsets with |d| >= n lie outside the matrix and stay zero
        for d in range(max(-lower, 1 - n), min(upper, n - 1) + 1):
            if d >= 0:
                ab[upper - d, d:] = np.diagonal(a, d)
            else:
                ab[upper - d, : n + d] = np.diagonal(a, d)
        return cls(ab, lower, upper, symmetric=symmetric)

    @classmethod
    def identity(cls, n):
        return cls(np.ones((1, n)), 0, 0, symmetric=True)

    @classmethod
    def diagonal(cls, values):
        values = np.asarray(values, dtype=float)
        return cls(values[None, :], 0, 0, symmetric=True)

    # element access -----------------------------------------------------

    def diag(self, d):
        """Return diagonal at offset ``d`` (length ``n - |d|``)."""
        row = self.upper - d
        if d > self.upper or -d > self.lower or abs(d) >= self.n:
            return np.zeros(max(self.n - abs(d), 0))
        if d >= 0:
            return self.bands[row, d:].copy()
        return self.bands[row, : self.n + d].copy()

    def entry(self, i, j):
        d = j - i
        if d > self.upper or -d > self.lower:
            return 0.0
        return float(self.bands[self.upper + i - j, j])

    def to_dense(self):
        a = np.zeros((self.n, self.n))
        for d in range(-self.lower, self.upper + 1):
            vals = self.diag(d)
            idx = np.arange(len(vals))
            if d >= 0:
                a[idx, idx + d] = vals
            else:
                a[idx - d, idx] = vals
        return a

    # arithmetic ---------------------------------------------------------

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"dimension mismatch: operator is {self.n}, vector is {v.shape}")
        ab, u, n = self.bands, self.upper, self.n
        out = ab[u] * v
        for d in range(1, min(u, n - 1) + 1):
            out[: n - d] += ab[u - d, d:] * v[d:]
        for d in range(1, min(self.lower, n - 1) + 1):
            out[d:] += ab[u + d, : n - d] * v[: n - d]
        return out

    __matmul__ = matvec

    def scaled(self, alpha):
        return BandedOperator(alpha * self.bands, self.lower, self.upper, self.symmetric)

    def column_scaled(self, weights):
        """Return ``self @ diag(weights)``."""
        weights = np.asarray(weights, dtype=float)
        return BandedOperator(self.bands * weights[None, :], self.lower, self.upper)

    def _widened(self, lower, upper):
        ab = np.zeros((lower + upper + 1, self.n))
        ab[upper - self.upper : upper - self.upper + self.bands.shape[0]] = self.bands
        return ab

    def plus(self, other, alpha=1.0):
        """Return ``self + alpha * other``."""
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        lo, up = max(self.lower, other.lower), max(self.upper, other.upper)
        ab = self._widened(lo, up) + alpha * other._widened(lo, up)
        return BandedOperator(ab, lo, up, self.symmetric and other.symmetric)

    def shifted(self, sigma):
        """Return ``sigma * I + self``."""
        ab = self.bands.copy()
        ab[self.upper] += sigma
        return BandedOperator(ab, self.lower, self.upper, self.symmetric)

    def compose(self, other):
        """Return the banded product ``self @ other``."""
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        n = self.n
        lo, up = self.lower + other.lower, self.upper + other.upper
        ab = np.zeros((lo + up + 1, n))
        # c[r, r+d] = sum_{d1+d2=d} a[r, r+d1] * b[r+d1, r+d]
        for d1 in range(-self.lower, self.upper + 1):
            a_col = self.bands[self.upper - d1]  # a[j - d1, j] at index j
            for d2 in range(-other.lower, other.upper + 1):
                d = d1 + d2
                b_col = other.bands[other.upper - d2]  # b[j - d2, j] at index j
                # column j of the product gets a[j-d, j-d2] * b[j-d2, j]
                j = np.arange(max(0, d, d2), min(n, n + d, n + d2))
                if j.size:
                    ab[up - d, j] += a_col[j - d2] * b_col[j]
        symmetric = self.symmetric and other.symmetric and self is other
        return BandedOperator(ab, lo, up, symmetric=symmetric)


class BandedLU:
    """LU factorization with partial pivoting of a banded operator (LAPACK ``dgbtrf``).

    The factorization widens the upper bandwidth to ``lower + upper`` for the
    row interchanges.  A pivot below ``n * eps * ||op||_1`` counts as singular.
    """

    def __init__(self, op):
        self.n, self.lower, self.upper = op.n, op.lower, op.upper
        kl, ku = op.lower, op.upper
        ab = np.zeros((2 * kl + ku + 1, op.n), order="F")
        ab[kl:] = op.bands
        lu, piv, info = lapack.dgbtrf(ab, kl, ku)
        if info < 0:
            raise ValueError(f"dgbtrf: illegal argument {-info}")
        if info > 0:
            raise SolverFailure(f"zero pivot in banded LU at row {info}")
        pivots = np.abs(lu[kl + ku])
        floor = op.n * np.finfo(float).eps * max(op.one_norm, np.finfo(float).tiny)
        if not np.all(np.isfinite(pivots)) or pivots.min() <= floor:
            row = int(np.argmin(pivots)) + 1
            raise SolverFailure(
                f"pivot {pivots.min():.3e} at row {row} is singular to working precision"
            )
        self._lu, self._piv = lu, piv

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.n,):
            raise ValueError(f"dimension mismatch: operator is {self.n}, rhs is {rhs.shape}")
        x, info = lapack.dgbtrs(self._lu, self.lower, self.upper, rhs, self._piv)
        if info != 0:
            raise ValueError(f"dgbtrs: illegal argument {-info}")
        if not np.all(np.isfinite(x)):
            raise SolverFailure("banded solve produced non-finite values")
        return x


def banded_lu_solve(op, rhs):
    """Solve ``op @ x = rhs`` by banded LU with partial pivoting."""
    return BandedLU(op).solve(rhs)
