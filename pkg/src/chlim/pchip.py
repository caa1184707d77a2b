"""Shape-preserving piecewise cubic Hermite interpolation (``pchip``)."""

from __future__ import annotations

import numpy as np


def pchip_slopes(x, y):
    """Fritsch-Carlson derivative estimates at the nodes.

    Interior slopes are the weighted harmonic mean of the neighbouring secants
    (zero at local extrema or sign changes); end slopes use the one-sided
    three-point formula, clipped so the end intervals stay monotone.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("need at least two nodes")
    h = np.diff(x)
    delta = np.diff(y) / h
    d = np.zeros(n)
    if n == 2:
        d[:] = delta[0]
        return d

    hl, hr = h[:-1], h[1:]
    dl, dr = delta[:-1], delta[1:]
    w1 = 2.0 * hr + hl
    w2 = hr + 2.0 * hl
    same_sign = dl * dr > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        hmean = (w1 + w2) / (w1 / dl + w2 / dr)
    d[1:-1] = np.where(same_sign, hmean, 0.0)

    d[0] = _end_slope(h[0], h[1], delta[0], delta[1])
    d[-1] = _end_slope(h[-1], h[-2], delta[-1], delta[-2])
    return d


def _end_slope(h0, h1, m0, m1):
    d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
    if np.sign(d) != np.sign(m0):
        return 0.0
    if np.sign(m0) != np.sign(m1) and abs(d) > abs(3.0 * m0):
        return 3.0 * m0
    return d


def pchip_eval(x, y, xi, extrapolate="constant"):
    """Evaluate the pchip interpolant of ``(x, y)`` at ``xi``.

    Points outside ``[x[0], x[-1]]`` take the nearest end value when
    ``extrapolate="constant"``; ``"cubic"`` continues the end pieces.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise ValueError("nodes must be strictly increasing")
    d = pchip_slopes(x, y)
    k = np.clip(np.searchsorted(x, xi, side="right") - 1, 0, len(x) - 2)
    h = x[k + 1] - x[k]
    t = (xi - x[k]) / h
    t2, t3 = t * t, t * t * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    out = h00 * y[k] + h10 * h * d[k] + h01 * y[k + 1] + h11 * h * d[k + 1]
    # hit nodes exactly so an identical grid reproduces the data bit for bit
    exact = xi == x[k]
    out = np.where(exact, y[k], out)
    exact = xi == x[k + 1]
    out = np.where(exact, y[k + 1], out)
    if extrapolate == "constant":
        out = np.where(xi < x[0], y[0], out)
        out = np.where(xi > x[-1], y[-1], out)
    elif extrapolate != "cubic":
        raise ValueError(f"unknown extrapolate mode {extrapolate!r}")
    return out
