"""Gauss-Legendre quadrature with dyadic refinement toward endpoint singularities.

Integrands here are smooth except possibly at interval endpoints, where an
integrable power/log singularity (or a genuine non-integrable blow-up) may
sit.  Smooth stretches get adaptive bisection with a fixed 32-node rule;
flagged endpoints get geometrically shrinking shells so that an integrable
singularity converges to near machine precision while a non-integrable one
is detected by non-decaying shell contributions and certified as +/-inf.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(32)

# Return states for integrate_piece.
OK = 0
DIVERGED_POS = 1
DIVERGED_NEG = -1

_MAX_SHELLS = 48
_SHELL_FLOOR = 1e-16       # shell contribution negligible below this * scale
_DIVERGENCE_RATIO = 0.85   # mean shell ratio above this at max depth => divergent
_VALUE_CAP = 1e15


def gl32(fn: Callable, a: float, b: float) -> float:
    """Single 32-node Gauss-Legendre pass over [a, b]."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    vals = np.asarray(fn(mid + half * _NODES), dtype=float)
    return half * float(np.dot(_WEIGHTS, vals))


def scaled_nodes(a: float, b: float):
    """32-point nodes and weights mapped onto [a, b]."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return mid + half * _NODES, half * _WEIGHTS


def adaptive_gl(fn: Callable, a: float, b: float, tol: float = 1e-12,
                max_depth: int = 30) -> float:
    """Adaptive bisection built on gl32.

    Accepts a subinterval once halving changes its estimate by less than the
    length-prorated share of ``tol``.  Depth is capped; the cap is generous
    enough that only a genuine endpoint singularity (handled elsewhere) would
    hit it.
    """
    if a == b:
        return 0.0
    total_len = b - a
    stack = [(a, b, gl32(fn, a, b), 0)]
    acc = 0.0
    while stack:
        lo, hi, coarse, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = gl32(fn, lo, mid)
        right = gl32(fn, mid, hi)
        fine = left + right
        if not math.isfinite(fine) or not math.isfinite(coarse):
            acc += fine
            continue
        share = tol * (hi - lo) / total_len
        if abs(fine - coarse) <= max(share, 1e-17 * (1.0 + abs(fine))) or depth >= max_depth:
            acc += fine
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
    return acc


def _shells(fn, anchor: float, other: float, tol: float):
    """Integrate from ``other`` toward a singular ``anchor`` in dyadic shells.

    Returns (value, status).  Shell k covers the slice whose distance to the
    anchor lies in [h*2^-(k+1), h*2^-k], h = |anchor - other|.
    """
    h = abs(anchor - other)
    sgn = 1.0 if anchor > other else -1.0  # direction from other toward anchor
    total = 0.0
    contribs = []
    scale = 1.0
    for k in range(_MAX_SHELLS):
        far = anchor - sgn * h * 2.0 ** (-k)
        near = anchor - sgn * h * 2.0 ** (-k - 1)
        lo, hi = (far, near) if far < near else (near, far)
        c = adaptive_gl(fn, lo, hi, tol=tol * 0.25)
        total += c
        contribs.append(c)
        scale = max(scale, abs(total))
        if abs(total) > _VALUE_CAP:
            return math.copysign(math.inf, total), (DIVERGED_POS if total > 0 else DIVERGED_NEG)
        if abs(c) < _SHELL_FLOOR * scale:
            return total, OK
    # Depth exhausted: decide between slow integrable decay and divergence.
    tail = contribs[-6:]
    ratios = [abs(tail[i + 1]) / abs(tail[i]) for i in range(len(tail) - 1)
              if abs(tail[i]) > 0]
    mean_ratio = sum(ratios) / len(ratios) if ratios else 0.0
    last = contribs[-1]
    if mean_ratio >= _DIVERGENCE_RATIO and abs(last) > _SHELL_FLOOR * scale:
        sign = DIVERGED_POS if last > 0 else DIVERGED_NEG
        return math.copysign(math.inf, last), sign
    # Integrable but slow: extrapolate the geometric tail.
    r = min(mean_ratio, 0.8)
    total += last * r / (1.0 - r)
    return total, OK


def integrate_piece(fn: Callable, a: float, b: float,
                    singular_left: bool = False, singular_right: bool = False,
                    tol: float = 1e-12):
    """Integrate fn over [a, b] with optional singular endpoints.

    Returns (value, status) where status is OK, DIVERGED_POS or DIVERGED_NEG.
    ``fn`` must be vectorised and finite strictly inside (a, b).
    """
    if a >= b:
        return 0.0, OK
    if not (singular_left or singular_right):
        return adaptive_gl(fn, a, b, tol=tol), OK
    if singular_left and singular_right:
        mid = 0.5 * (a + b)
        v1, s1 = integrate_piece(fn, a, mid, singular_left=True, tol=tol)
        v2, s2 = integrate_piece(fn, mid, b, singular_right=True, tol=tol)
        if s1 != OK and s2 != OK and s1 != s2:
            # Opposing blow-ups never arise for convex integrands; refuse to guess.
            raise ArithmeticError("conflicting endpoint divergences")
        status = s1 if s1 != OK else s2
        if status != OK:
            return math.inf if status == DIVERGED_POS else -math.inf, status
        return v1 + v2, OK
    if singular_right:
        anchor, other = b, a
    else:
        anchor, other = a, b
    mid = 0.5 * (anchor + other)
    smooth = adaptive_gl(fn, min(other, mid), max(other, mid), tol=tol * 0.5)
    sing, status = _shells(fn, anchor, mid, tol)
    if status != OK:
        return sing, status
    return smooth + sing, OK
