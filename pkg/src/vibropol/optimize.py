"""Small 1-D search helpers shared by peak finding and fitting."""
from __future__ import annotations

import math

import numpy as np

INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section_min(f, a, b, tol=1e-10, max_iter=500):
    """Minimise a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    a, b = min(a, b), max(a, b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def refine_maximum(f, x, i, tol=1e-10):
    """Golden-section refinement of a grid maximum ``x[i]`` of ``f``."""
    lo = x[max(i - 1, 0)]
    hi = x[min(i + 1, len(x) - 1)]
    xm, fm = golden_section_min(lambda t: -f(t), lo, hi, tol=tol)
    return xm, -fm


def local_maxima(y):
    """Indices of strict interior local maxima of a sampled curve."""
    y = np.asarray(y)
    if len(y) < 3:
        return np.zeros(0, dtype=int)
    core = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    return np.nonzero(core)[0] + 1
