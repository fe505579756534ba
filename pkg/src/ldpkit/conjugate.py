"""Legendre-Fenchel transforms of convex oracles.

The one-dimensional path solves grad g = x by safeguarded Newton inside an
expanding bracket, falls back to bisection whenever a step leaves the
bracket, and handles boundary suprema explicitly: a finite domain endpoint
is evaluated directly, an infinite one is probed along a geometric sequence
until the recession behaviour is certified (finite limit or +inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .cgf import Domain, DomainInterval, FullSpace
from .errors import DomainError, GradientRangeError, NonConvergenceError

_PROBE_CAP = 1e12        # gradient probe beyond this reads as infinite
_VALUE_CAP = 1e14
_MAX_PROBE = 56


@dataclass
class ConvexOracle:
    """Evaluation access to a finite convex function on its domain."""

    domain: Domain
    eval: Callable
    grad: Callable
    hess: Optional[Callable] = None
    strict: bool = True
    # One-sided gradient limits at the domain endpoints, computed lazily or
    # supplied by callers that know them to higher accuracy.
    grad_range: Optional[tuple] = None


@dataclass(frozen=True)
class ConjugateResult:
    value: float
    argmax: Optional[object]   # float (d=1) or ndarray (d>1); None if not attained
    at_boundary: bool


def _probe_limit(fn, points):
    """Follow fn along points; classify the limit as (value, finite?)."""
    vals = []
    for p in points:
        v = float(fn(p))
        if not math.isfinite(v):
            return v, False
        vals.append(v)
        if abs(v) > _PROBE_CAP:
            return math.copysign(math.inf, v), False
        if len(vals) >= 2 and abs(vals[-1] - vals[-2]) <= 1e-13 * max(1.0, abs(v)):
            return v, True
    # Never settled: non-shrinking increments mean divergence.
    diffs = [vals[i + 1] - vals[i] for i in range(len(vals) - 1)]
    tail = diffs[-6:]
    if tail and abs(tail[-1]) > 0.7 * abs(tail[0]) and \
            abs(tail[-1]) > 1e-12 * max(1.0, abs(vals[-1])):
        return math.copysign(math.inf, tail[-1]), False
    return vals[-1], True


def _approach(endpoint: float, inward: float, n: int = _MAX_PROBE):
    """Geometric sequence approaching a finite endpoint from ``inward``."""
    gap = endpoint - inward
    return [endpoint - gap * 2.0 ** (-k) for k in range(1, n + 1)]


def _grad_limits_1d(oracle: ConvexOracle):
    dom = oracle.domain
    # Upper side.
    if math.isfinite(dom.upper):
        pts = _approach(dom.upper, 0.0)
        ghi, finite = _probe_limit(oracle.grad, pts)
        if not finite:
            ghi = math.inf
    else:
        ghi, finite = _probe_limit(oracle.grad, [2.0 ** k for k in range(0, 60)])
        if not finite:
            ghi = math.inf
    if math.isfinite(dom.lower):
        pts = _approach(dom.lower, 0.0)
        glo, finite = _probe_limit(oracle.grad, pts)
        if not finite:
            glo = -math.inf
    else:
        glo, finite = _probe_limit(oracle.grad, [-(2.0 ** k) for k in range(0, 60)])
        if not finite:
            glo = -math.inf
    return glo, ghi


def grad_range_1d(oracle: ConvexOracle):
    if oracle.grad_range is None:
        oracle.grad_range = _grad_limits_1d(oracle)
    return oracle.grad_range


def _solve_grad_1d(oracle: ConvexOracle, x: float, tol: float, max_iter: int) -> float:
    """Root of grad g = x strictly inside the domain (caller checked range)."""
    dom = oracle.domain
    g = oracle.grad
    atol = tol * max(1.0, abs(x))

    # Bracket the root starting from the interior point 0.
    r0 = float(g(0.0)) - x
    if abs(r0) <= atol:
        return 0.0
    if r0 < 0:   # root is to the right
        a, ra = 0.0, r0
        b = None
        if math.isfinite(dom.upper):
            for u in _approach(dom.upper, 0.0):
                r = float(g(u)) - x
                if r >= 0:
                    b, rb = u, r
                    break
                a, ra = u, r
        else:
            step = 1.0
            u = step
            for _ in range(200):
                r = float(g(u)) - x
                if r >= 0:
                    b, rb = u, r
                    break
                a, ra = u, r
                step *= 2.0
                u = a + step
        if b is None:
            raise NonConvergenceError("failed to bracket gradient equation")
    else:
        b, rb = 0.0, r0
        a = None
        if math.isfinite(dom.lower):
            for u in _approach(dom.lower, 0.0):
                r = float(g(u)) - x
                if r <= 0:
                    a, ra = u, r
                    break
                b, rb = u, r
        else:
            step = 1.0
            u = -step
            for _ in range(200):
                r = float(g(u)) - x
                if r <= 0:
                    a, ra = u, r
                    break
                b, rb = u, r
                step *= 2.0
                u = b - step
        if a is None:
            raise NonConvergenceError("failed to bracket gradient equation")

    # Safeguarded Newton: accept Newton steps inside the bracket, bisect
    # otherwise.  The gradient is nondecreasing, so the bracket is valid.
    u = 0.5 * (a + b)
    for _ in range(max_iter):
        r = float(g(u)) - x
        if abs(r) <= atol:
            return u
        if r > 0:
            b, rb = u, r
        else:
            a, ra = u, r
        step = None
        if oracle.hess is not None:
            h = float(oracle.hess(u))
            if math.isfinite(h) and h > 0:
                step = u - r / h
        if step is None or not (a < step < b):
            step = 0.5 * (a + b)
        if b - a <= 1e-17 * max(1.0, abs(a), abs(b)):
            if abs(r) <= math.sqrt(atol):
                return u
            raise NonConvergenceError("gradient equation stalled on an ulp-wide bracket")
        u = step
    raise NonConvergenceError(f"gradient inversion did not meet tol={tol} "
                              f"in {max_iter} iterations")


def _boundary_value(oracle: ConvexOracle, x: float, endpoint: float) -> ConjugateResult:
    gv = float(oracle.eval(endpoint))
    if not math.isfinite(gv):
        raise DomainError("oracle value at its closed boundary is not finite")
    return ConjugateResult(x * endpoint - gv, endpoint, True)


def _edge_value(oracle: ConvexOracle, x: float, sign: float, tol: float,
                max_iter: int) -> ConjugateResult:
    """sup of x*u - g(u) when x sits at the numeric edge of the slope range
    and the domain runs to sign*inf.

    Direct probing of phi(u) = x*u - g(u) at astronomically large u loses all
    precision to cancellation (both terms grow like |x|*|u| while their
    difference stays O(1)), so first try the ordinary stationarity solve.  A
    moderate root means x was genuinely interior and the result is exact.  A
    huge root is checked by doubling: if phi keeps climbing the supremum is
    infinite, otherwise the best probe is a faithful limit value.
    """
    def phi(u):
        return x * float(u) - float(oracle.eval(u))

    try:
        u = _solve_grad_1d(oracle, x, tol, max_iter)
    except NonConvergenceError:
        u = None

    if u is not None:
        if abs(u) <= 2048.0:
            return ConjugateResult(phi(u), u, False)
        p1, p3 = phi(u), phi(4.0 * u)
        if p3 - p1 > 0.05 * max(1.0, abs(p1)):
            return ConjugateResult(math.inf, None, True)
        return ConjugateResult(max(p1, phi(2.0 * u), p3), None, True)

    # No stationary point was reachable: follow phi along the ray.  Beyond
    # 2^45 the cancellation noise swamps O(1) values, so classify by the
    # trend seen while the evaluations are still trustworthy.
    vals = []
    for k in range(11, 46):
        v = phi(sign * 2.0 ** k)
        if not math.isfinite(v):
            return ConjugateResult(math.inf, None, True)
        vals.append(v)
        if len(vals) >= 3 and \
                abs(vals[-1] - vals[-2]) <= 1e-9 * max(1.0, abs(v)) and \
                abs(vals[-2] - vals[-3]) <= 1e-9 * max(1.0, abs(v)):
            return ConjugateResult(v, None, True)
        if v > _VALUE_CAP:
            return ConjugateResult(math.inf, None, True)
    if vals[-1] - vals[-10] > 0.05 * max(1.0, abs(vals[-1])):
        return ConjugateResult(math.inf, None, True)
    return ConjugateResult(vals[-1], None, True)


def legendre(oracle: ConvexOracle, x, tol: float = None,
             max_iter: int = 200) -> ConjugateResult:
    """sup_u { x.u - g(u) } with argmax and boundary/divergence reporting."""
    if not oracle.strict:
        raise ValueError("non-strict convex oracle refused")
    if isinstance(oracle.domain, FullSpace):
        return _legendre_nd(oracle, np.asarray(x, dtype=float),
                            1e-8 if tol is None else tol, max_iter)
    if tol is None:
        tol = 1e-10
    x = float(x)
    dom = oracle.domain
    glo, ghi = grad_range_1d(oracle)

    # The slope limits are themselves numeric, so "at the edge" must be a
    # tolerance test, not an equality test.  The probe limits settle to about
    # 1e-13 relative, so 1e-12 absorbs that error without swallowing points
    # that are genuinely interior by 1e-9 or more.
    near_hi = math.isfinite(ghi) and \
        abs(x - ghi) <= 1e-12 * max(1.0, abs(x), abs(ghi))
    near_lo = math.isfinite(glo) and \
        abs(x - glo) <= 1e-12 * max(1.0, abs(x), abs(glo))

    if x > ghi or near_hi:
        if math.isfinite(dom.upper):
            return _boundary_value(oracle, x, dom.upper)
        if near_hi:
            return _edge_value(oracle, x, +1.0, tol, max_iter)
        return ConjugateResult(math.inf, None, True)
    if x < glo or near_lo:
        if math.isfinite(dom.lower):
            return _boundary_value(oracle, x, dom.lower)
        if near_lo:
            return _edge_value(oracle, x, -1.0, tol, max_iter)
        return ConjugateResult(math.inf, None, True)

    u = _solve_grad_1d(oracle, x, tol, max_iter)
    return ConjugateResult(x * u - float(oracle.eval(u)), u, False)


def _legendre_nd(oracle: ConvexOracle, x: np.ndarray, tol: float,
                 max_iter: int) -> ConjugateResult:
    lam = np.zeros_like(x)
    scale = max(1.0, float(np.linalg.norm(x)))
    phi = float(x @ lam) - float(oracle.eval(lam))
    for _ in range(max_iter):
        grad = x - np.asarray(oracle.grad(lam), dtype=float)
        if np.linalg.norm(grad) <= tol * scale:
            return ConjugateResult(phi, lam, False)
        hess = np.asarray(oracle.hess(lam), dtype=float)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        alpha = 1.0
        for _ in range(60):
            cand = lam + alpha * step
            val = float(x @ cand) - float(oracle.eval(cand))
            if math.isfinite(val) and val > phi:
                lam, phi = cand, val
                break
            alpha *= 0.5
        else:
            raise NonConvergenceError("multivariate conjugate line search stalled")
        if np.linalg.norm(lam) > 1e9 * scale or phi > _VALUE_CAP:
            return ConjugateResult(math.inf, None, True)
    raise NonConvergenceError(f"multivariate conjugate did not meet tol={tol} "
                              f"in {max_iter} iterations")


def grad_inverse(oracle: ConvexOracle, x, tol: float = None, max_iter: int = 200):
    """Solve grad g = x; 1-D raises GradientRangeError naming the violated side."""
    if not oracle.strict:
        raise ValueError("non-strict convex oracle refused")
    if isinstance(oracle.domain, FullSpace):
        res = _legendre_nd(oracle, np.asarray(x, dtype=float),
                           1e-8 if tol is None else tol, max_iter)
        if res.argmax is None:
            raise GradientRangeError("above", "gradient target unreachable")
        return res.argmax
    if tol is None:
        tol = 1e-10
    x = float(x)
    glo, ghi = grad_range_1d(oracle)
    if x >= ghi:
        raise GradientRangeError("above")
    if x <= glo:
        raise GradientRangeError("below")
    return _solve_grad_1d(oracle, x, tol, max_iter)
