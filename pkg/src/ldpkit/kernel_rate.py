"""Kernel-weighted rate functions.

For a model with log-MGF K and a piecewise-linear weight f, the scaled
cumulant E_f(lam) = int_0^1 K(lam f(t)) dt has effective domain
(-M_minus, M_plus) with M_plus = min(sup D / max f_+, -inf D / max f_-)
and the symmetric expression for M_minus (conventions: c/0 = +inf,
0 * inf = 0).  The weighted rate I_f is computed by three routes that
share no value formula:

  * i_f_conjugate: Legendre transform of E_f via the generic solver;
  * i_f_explicit: the closed rate integrated along clamped tilt slopes,
    plus linear M_plus / M_minus terms outside [inf E_f', sup E_f'];
  * variational_rate: direct minimisation of the discretised path action
    under the exact pairing constraint (uses only the rate function and
    its derivatives, never K).

One-sided limits sup E_f' and inf E_f' are improper integrals of
f * K'(lam f) at the clamped tilt; divergence is certified by the shell
quadrature rather than assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import quadrature as quad
from .cgf import CgfModel, DomainInterval, FullSpace
from .conjugate import (ConvexOracle, _approach, _probe_limit, _solve_grad_1d,
                        grad_inverse, legendre)
from .errors import (AmbiguityError, DomainError, GradientRangeError,
                     NonConvergenceError)
from .kernels import Kernel

_TOUCH_RTOL = 5e-13
_BOUNDARY_RTOL = 1e-7     # |x - sup E_f'| below this counts as the boundary
_PROBE_START = 1.0


def _quot(num: float, den: float) -> float:
    """num / den for num in [0, inf], den >= 0, with c/0 := +inf."""
    if den == 0.0:
        return math.inf
    if math.isinf(num):
        return math.inf
    return num / den


def _interval_bounds(model: CgfModel):
    dom = model.domain
    if isinstance(dom, FullSpace):
        return -math.inf, math.inf
    return dom.lower, dom.upper


# ----------------------------------------------------------------------
# Quadrature of t -> g(lam * f(t)) over the kernel pieces
# ----------------------------------------------------------------------

def _piece_plan(model: CgfModel, kernel: Kernel, lam: float):
    """Split kernel pieces for integration of smooth functions of lam*f(t).

    Returns (plan, feasible) where plan is a list of
    (a, b, singular_left, singular_right) and feasible is False when
    lam*f exits the closed domain on a set of positive measure.
    """
    lo, hi = _interval_bounds(model)
    dom = model.domain
    up_closed = getattr(dom, "upper_closed", False)
    low_closed = getattr(dom, "lower_closed", False)
    tol_hi = _TOUCH_RTOL * max(1.0, abs(hi)) if math.isfinite(hi) else 0.0
    tol_lo = _TOUCH_RTOL * max(1.0, abs(lo)) if math.isfinite(lo) else 0.0
    plan = []
    for a, b, va, vb in kernel.pieces():
        ua, ub = lam * va, lam * vb
        # the trace of lam*f on an affine piece exceeds the closed domain on
        # a set of positive measure as soon as one endpoint value does
        if math.isfinite(hi) and max(ua, ub) > hi + tol_hi:
            return [], False
        if math.isfinite(lo) and min(ua, ub) < lo - tol_lo:
            return [], False
        at_hi_a = math.isfinite(hi) and abs(ua - hi) <= tol_hi
        at_hi_b = math.isfinite(hi) and abs(ub - hi) <= tol_hi
        at_lo_a = math.isfinite(lo) and abs(ua - lo) <= tol_lo
        at_lo_b = math.isfinite(lo) and abs(ub - lo) <= tol_lo
        if ua == ub and (at_hi_a or at_lo_a):
            # constant piece pinned to the boundary: positive measure there
            if (at_hi_a and not up_closed) or (at_lo_a and not low_closed):
                return [], False
            plan.append((a, b, False, False))
        else:
            plan.append((a, b, at_hi_a or at_lo_a, at_hi_b or at_lo_b))
    return plan, True


def _integrate_kernel(model: CgfModel, kernel: Kernel, lam: float, integrand,
                      tol: float = 1e-12):
    """(value, status) of int integrand(t) dt with boundary-touch handling."""
    plan, feasible = _piece_plan(model, kernel, lam)
    if not feasible:
        return math.inf, quad.DIVERGED_POS
    total = 0.0
    for a, b, sl, sr in plan:
        val, status = quad.integrate_piece(integrand, a, b, sl, sr, tol=tol)
        if status != quad.OK:
            return math.copysign(math.inf, val), status
        if not math.isfinite(val):
            return math.inf, quad.DIVERGED_POS
        total += val
    return total, quad.OK


def e_f(model: CgfModel, kernel: Kernel, lam, tol: float = 1e-12) -> float:
    """int_0^1 K(lam f(t)) dt, +inf when lam f leaves the domain."""
    if model.dimension > 1:
        lam = np.asarray(lam, dtype=float)

        def fn(ts):
            return model.cgf(kernel.eval(ts)[:, None] * lam)

        return sum(quad.adaptive_gl(fn, a, b, tol=tol)
                   for a, b, _, _ in kernel.pieces())

    lam = float(lam)

    def fn(ts):
        return model.cgf(lam * kernel.eval(ts))

    val, _ = _integrate_kernel(model, kernel, lam, fn, tol=tol)
    return val


def e_f_grad(model: CgfModel, kernel: Kernel, lam, tol: float = 1e-12):
    """int f(t) K'(lam f(t)) dt; +-inf flags an infinite one-sided slope."""
    if model.dimension > 1:
        lam = np.asarray(lam, dtype=float)
        out = np.empty(model.dimension)
        for c in range(model.dimension):
            def fn(ts, c=c):
                fv = kernel.eval(ts)
                return fv * model.cgf_grad(fv[:, None] * lam)[..., c]
            out[c] = sum(quad.adaptive_gl(fn, a, b, tol=tol)
                         for a, b, _, _ in kernel.pieces())
        return out

    lam = float(lam)

    def fn(ts):
        fv = kernel.eval(ts)
        return fv * model.cgf_grad(lam * fv)

    val, _ = _integrate_kernel(model, kernel, lam, fn, tol=tol)
    return val


def _e_f_hess(model: CgfModel, kernel: Kernel, lam, tol: float = 1e-12):
    if model.dimension > 1:
        lam = np.asarray(lam, dtype=float)
        d = model.dimension
        out = np.empty((d, d))
        for r in range(d):
            for c in range(r + 1):
                def fn(ts, r=r, c=c):
                    fv = kernel.eval(ts)
                    return fv * fv * model.cgf_hess(fv[:, None] * lam)[..., r, c]
                val = sum(quad.adaptive_gl(fn, a, b, tol=tol)
                          for a, b, _, _ in kernel.pieces())
                out[r, c] = out[c, r] = val
        return out

    lam = float(lam)

    def fn(ts):
        fv = kernel.eval(ts)
        return fv * fv * model.cgf_hess(lam * fv)

    val, status = _integrate_kernel(model, kernel, lam, fn, tol=tol)
    return val if status == quad.OK else math.inf


# ----------------------------------------------------------------------
# Cached per-(model, kernel) analysis
# ----------------------------------------------------------------------

class KernelRateProblem:
    def __init__(self, model: CgfModel, kernel: Kernel):
        self.model = model
        self.kernel = kernel
        self._cache = {}

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def m_plus_minus(self):
        def compute():
            i_plus = self.model.recession(1.0)
            i_minus = self.model.recession(-1.0)
            k = self.kernel
            m_plus = min(_quot(i_plus, k.max_plus), _quot(i_minus, k.max_minus))
            m_minus = min(_quot(i_plus, k.max_minus), _quot(i_minus, k.max_plus))
            return m_plus, m_minus
        return self._memo("m", compute)

    @property
    def d_f(self):
        def compute():
            model, k = self.model, self.kernel
            if model.dimension > 1:
                if isinstance(model.domain, FullSpace):
                    return FullSpace(model.dimension)
                raise DomainError(
                    "weighted domain is only available for full-space models "
                    "in dimension > 1")
            if isinstance(model.domain, FullSpace):
                return DomainInterval(-math.inf, math.inf)
            m_plus, m_minus = self.m_plus_minus
            dom = model.domain
            up_closed = False
            if math.isfinite(m_plus):
                # closure holds only if every binding side is closed
                up_closed = True
                if k.max_plus > 0 and m_plus == _quot(dom.upper, k.max_plus):
                    up_closed = up_closed and dom.upper_closed
                if k.max_minus > 0 and m_plus == _quot(-dom.lower, k.max_minus):
                    up_closed = up_closed and dom.lower_closed
            low_closed = False
            if math.isfinite(m_minus):
                low_closed = True
                if k.max_minus > 0 and m_minus == _quot(dom.upper, k.max_minus):
                    low_closed = low_closed and dom.upper_closed
                if k.max_plus > 0 and m_minus == _quot(-dom.lower, k.max_plus):
                    low_closed = low_closed and dom.lower_closed
            return DomainInterval(-m_minus, m_plus,
                                  lower_closed=low_closed, upper_closed=up_closed)
        return self._memo("d_f", compute)

    @property
    def sup_ef_prime(self) -> float:
        def compute():
            m_plus, _ = self.m_plus_minus
            if math.isfinite(m_plus):
                val = e_f_grad(self.model, self.kernel, m_plus)
                return val if math.isfinite(val) else math.inf
            probes = [_PROBE_START * 2.0 ** k for k in range(52)]
            val, finite = _probe_limit(
                lambda l: e_f_grad(self.model, self.kernel, l, tol=1e-13), probes)
            return val if finite else math.inf
        return self._memo("sup", compute)

    @property
    def inf_ef_prime(self) -> float:
        def compute():
            _, m_minus = self.m_plus_minus
            if math.isfinite(m_minus):
                val = e_f_grad(self.model, self.kernel, -m_minus)
                return val if math.isfinite(val) else -math.inf
            probes = [-_PROBE_START * 2.0 ** k for k in range(52)]
            val, finite = _probe_limit(
                lambda l: e_f_grad(self.model, self.kernel, l, tol=1e-13), probes)
            return val if finite else -math.inf
        return self._memo("inf", compute)

    @property
    def oracle(self) -> ConvexOracle:
        def compute():
            model, kernel = self.model, self.kernel
            if model.dimension > 1:
                return ConvexOracle(
                    domain=self.d_f,
                    eval=lambda l: e_f(model, kernel, l),
                    grad=lambda l: e_f_grad(model, kernel, l),
                    hess=lambda l: _e_f_hess(model, kernel, l))
            return ConvexOracle(
                domain=self.d_f,
                eval=lambda l: e_f(model, kernel, float(l)),
                grad=lambda l: e_f_grad(model, kernel, float(l)),
                hess=lambda l: _e_f_hess(model, kernel, float(l)),
                grad_range=(self.inf_ef_prime, self.sup_ef_prime))
        return self._memo("oracle", compute)


@lru_cache(maxsize=256)
def _problem(model: CgfModel, kernel: Kernel) -> KernelRateProblem:
    return KernelRateProblem(model, kernel)


def d_f(model: CgfModel, kernel: Kernel):
    return _problem(model, kernel).d_f


def m_plus_minus(model: CgfModel, kernel: Kernel):
    return _problem(model, kernel).m_plus_minus


def ef_prime_range(model: CgfModel, kernel: Kernel):
    prob = _problem(model, kernel)
    return prob.inf_ef_prime, prob.sup_ef_prime


# ----------------------------------------------------------------------
# Rate function results
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class KernelRateResult:
    x: object
    value: float
    branch: str               # interior | singular_plus | singular_minus | infinite
    lambda_star: object
    m_plus: float
    m_minus: float
    sup_ef_prime: float
    inf_ef_prime: float


def _near(x: float, edge: float) -> bool:
    if not math.isfinite(edge):
        return False
    return abs(x - edge) <= _BOUNDARY_RTOL * max(1.0, abs(x), abs(edge))


def _branch_of(x: float, prob: KernelRateProblem) -> str:
    sup_e, inf_e = prob.sup_ef_prime, prob.inf_ef_prime
    if x > sup_e or _near(x, sup_e):
        return "singular_plus"
    if x < inf_e or _near(x, inf_e):
        return "singular_minus"
    return "interior"


def _center_result(model: CgfModel, kernel: Kernel, x, prob):
    """Exact zero of I_f at x = m1 * mean (lam* = 0), or None."""
    center = kernel.m1 * model.mean_vec
    if model.dimension == 1:
        if float(x) != float(center[0]):
            return None
        m_plus, m_minus = prob.m_plus_minus
        return KernelRateResult(float(x), 0.0, "interior", 0.0, m_plus,
                                m_minus, prob.sup_ef_prime, prob.inf_ef_prime)
    xv = np.asarray(x, dtype=float)
    if not np.array_equal(xv, center):
        return None
    return KernelRateResult(xv, 0.0, "interior", np.zeros(model.dimension),
                            math.inf, math.inf, math.inf, -math.inf)


def i_f_conjugate(model: CgfModel, kernel: Kernel, x, tol: float = 1e-9) -> KernelRateResult:
    """I_f(x) as the Legendre transform of E_f."""
    prob = _problem(model, kernel)
    hit = _center_result(model, kernel, x, prob)
    if hit is not None:
        return hit
    m_plus, m_minus = (prob.m_plus_minus if model.dimension == 1
                       else (math.inf, math.inf))
    if model.dimension > 1:
        res = legendre(prob.oracle, np.asarray(x, dtype=float), tol=tol)
        branch = "infinite" if math.isinf(res.value) else "interior"
        return KernelRateResult(np.asarray(x, dtype=float), res.value, branch,
                                res.argmax, m_plus, m_minus, math.inf, -math.inf)

    x = float(x)
    res = legendre(prob.oracle, x, tol=tol)
    if math.isinf(res.value):
        branch = "infinite"
    elif res.at_boundary:
        branch = _branch_of(x, prob)
    else:
        branch = "interior"
    return KernelRateResult(x, res.value, branch, res.argmax, m_plus, m_minus,
                            prob.sup_ef_prime, prob.inf_ef_prime)


def _sign_measures(kernel: Kernel):
    """Exact Lebesgue measures of {f > 0} and {f < 0}."""
    pos = neg = 0.0
    for a, b, va, vb in kernel.pieces():
        length = b - a
        if va >= 0 and vb >= 0:
            pos += length if (va > 0 or vb > 0) else 0.0
        elif va <= 0 and vb <= 0:
            neg += length if (va < 0 or vb < 0) else 0.0
        else:
            root = a + length * (-va) / (vb - va)
            if va > 0:
                pos += root - a
                neg += b - root
            else:
                neg += root - a
                pos += b - root
    return pos, neg


def _grad_limit(model: CgfModel, upper: bool) -> float:
    """One-sided limit of K' at the corresponding domain edge."""
    lo, hi = _interval_bounds(model)
    edge = hi if upper else lo
    if math.isfinite(edge):
        pts = _approach(edge, 0.0)  # 0 is always interior to the domain
    else:
        pts = [(1.0 if upper else -1.0) * 2.0 ** k for k in range(52)]
    val, finite = _probe_limit(lambda u: float(model.cgf_grad(np.asarray([u]))[0]),
                               list(pts))
    if finite:
        return val
    return math.inf if upper else -math.inf


def _clamp_integral(model: CgfModel, kernel: Kernel, lam_bar: float,
                    tol: float = 1e-12) -> float:
    """int_0^1 I(K'(lam_bar f(t))) dt, allowing lam_bar = +-inf as a limit."""
    if math.isfinite(lam_bar):
        def fn(ts):
            return model.closed_rate(model.cgf_grad(lam_bar * kernel.eval(ts)))
        val, status = _integrate_kernel(model, kernel, lam_bar, fn, tol=tol)
        return val if status == quad.OK else math.inf

    pos, neg = _sign_measures(kernel)
    up = lam_bar > 0
    total = 0.0
    for measure, upper in ((pos, up), (neg, not up)):
        if measure == 0.0:
            continue
        v = _grad_limit(model, upper)
        r = float(model.rate(v)) if math.isfinite(v) else math.inf
        if not math.isfinite(r):
            return math.inf
        total += measure * r
    return total


def _edge_explicit(model: CgfModel, kernel: Kernel, prob, x: float, tol: float,
                   done, side: int) -> KernelRateResult:
    """Value at the numeric edge of the slope range when the tilt cap is
    infinite.

    The probed edge is only accurate to its own rounding, so a point inside
    the band can still have a finite tilt solving E_f'(lam) = x; resolve it
    and evaluate the clamped integral there.  When no tilt is reachable the
    value is the limit of the clamped integrals, which the sign-measure form
    computes directly.
    """
    try:
        lam = _solve_grad_1d(prob.oracle, x, min(tol, 1e-10), 200)
    except NonConvergenceError:
        lam = None
    label = "singular_plus" if side > 0 else "singular_minus"
    if lam is not None:
        value = _clamp_integral(model, kernel, lam)
        if not math.isfinite(value):
            return done(math.inf, "infinite", None)
        value += lam * (x - e_f_grad(model, kernel, lam))
        return done(value, "interior" if abs(lam) <= 2048.0 else label, lam)
    value = _clamp_integral(model, kernel, side * math.inf)
    return done(value, label if math.isfinite(value) else "infinite", None)


def i_f_explicit(model: CgfModel, kernel: Kernel, x, tol: float = 1e-9) -> KernelRateResult:
    """I_f(x) from the clamped-tilt rate integral plus linear edge terms."""
    hit = _center_result(model, kernel, x, _problem(model, kernel))
    if hit is not None:
        return hit
    if model.dimension > 1:
        # no explicit formula off the gradient range in d > 1; interior only
        prob = _problem(model, kernel)
        x = np.asarray(x, dtype=float)
        try:
            lam = grad_inverse(prob.oracle, x, tol=tol)
        except NonConvergenceError:
            return KernelRateResult(x, math.inf, "infinite", None, math.inf,
                                    math.inf, math.inf, -math.inf)

        def fn(ts):
            fv = kernel.eval(ts)
            return model.closed_rate(model.cgf_grad(fv[:, None] * lam))

        val = sum(quad.adaptive_gl(fn, a, b, tol=1e-12)
                  for a, b, _, _ in kernel.pieces())
        return KernelRateResult(x, val, "interior", lam, math.inf, math.inf,
                                math.inf, -math.inf)

    x = float(x)
    prob = _problem(model, kernel)
    m_plus, m_minus = prob.m_plus_minus
    sup_e, inf_e = prob.sup_ef_prime, prob.inf_ef_prime

    def done(value, branch, lam):
        return KernelRateResult(x, value, branch, lam, m_plus, m_minus,
                                sup_e, inf_e)

    if x > sup_e and not _near(x, sup_e):
        if math.isinf(m_plus):
            return done(math.inf, "infinite", None)
        value = m_plus * (x - sup_e) + _clamp_integral(model, kernel, m_plus)
        return done(value, "singular_plus", m_plus)
    if x < inf_e and not _near(x, inf_e):
        if math.isinf(m_minus):
            return done(math.inf, "infinite", None)
        value = m_minus * (inf_e - x) + _clamp_integral(model, kernel, -m_minus)
        return done(value, "singular_minus", -m_minus)
    if _near(x, sup_e):
        if math.isfinite(m_plus):
            value = _clamp_integral(model, kernel, m_plus)
            value += m_plus * max(x - sup_e, 0.0)
            branch = "singular_plus" if math.isfinite(value) else "infinite"
            return done(value, branch, m_plus)
        return _edge_explicit(model, kernel, prob, x, tol, done, +1)
    if _near(x, inf_e):
        if math.isfinite(m_minus):
            value = _clamp_integral(model, kernel, -m_minus)
            value += m_minus * max(inf_e - x, 0.0)
            branch = "singular_minus" if math.isfinite(value) else "infinite"
            return done(value, branch, -m_minus)
        return _edge_explicit(model, kernel, prob, x, tol, done, -1)

    lam = grad_inverse(prob.oracle, x, tol=min(tol, 1e-10))
    value = _clamp_integral(model, kernel, lam)
    if math.isfinite(value):
        # correct for the solver residual: without it the integral is the
        # rate at E_f'(lam) rather than at x, which matters when the tilt
        # is large and d I_f / d x = lam amplifies the difference
        value += lam * (x - e_f_grad(model, kernel, lam))
    return done(value, "interior", lam)


# ----------------------------------------------------------------------
# Minimizing trajectory
# ----------------------------------------------------------------------

def _refined_grid(kernel: Kernel, total: int):
    pts = [0.0]
    for a, b, _, _ in kernel.pieces():
        n = max(1, int(round(total * (b - a))))
        pts.extend(a + (b - a) * (i + 1) / n for i in range(n))
    pts[-1] = 1.0
    return pts


def _average_slopes(model: CgfModel, kernel: Kernel, lam: float, grid,
                    improper: bool):
    """Per-interval averages of K'(lam f) (vectors in d > 1)."""
    d = model.dimension
    slopes = np.empty((len(grid) - 1, d))
    lo, hi = _interval_bounds(model)

    def raw(ts):
        fv = kernel.eval(ts)
        if d == 1:
            return model.cgf_grad(lam * fv)
        return model.cgf_grad(fv[:, None] * np.asarray(lam))

    for i, (a, b) in enumerate(zip(grid, grid[1:])):
        if d == 1 and improper:
            ua, ub = lam * kernel.eval(a), lam * kernel.eval(b)
            sl = math.isfinite(hi) and abs(ua - hi) <= _TOUCH_RTOL * max(1, abs(hi)) \
                or math.isfinite(lo) and abs(ua - lo) <= _TOUCH_RTOL * max(1, abs(lo))
            sr = math.isfinite(hi) and abs(ub - hi) <= _TOUCH_RTOL * max(1, abs(hi)) \
                or math.isfinite(lo) and abs(ub - lo) <= _TOUCH_RTOL * max(1, abs(lo))
            if sl or sr:
                val, status = quad.integrate_piece(raw, a, b, sl, sr, tol=1e-13)
                if status != quad.OK or not math.isfinite(val):
                    raise NonConvergenceError(
                        "tilted slope average diverged near the domain edge")
                slopes[i, 0] = val / (b - a)
                continue
        if d == 1:
            slopes[i, 0] = quad.gl32(raw, a, b) / (b - a)
        else:
            nodes, weights = quad.scaled_nodes(a, b)
            vals = raw(nodes)
            slopes[i] = weights @ vals / (b - a)
    return slopes


def minimizer(model: CgfModel, kernel: Kernel, x, tol: float = 1e-8):
    """The path attaining I_f(x): tilted slopes, plus one jump on the
    singular branch placed at the first extremizer of f."""
    from .paths import CadlagPath

    prob = _problem(model, kernel)
    total = int(min(4000, max(400, round(0.5 / math.sqrt(max(tol, 1e-12))))))
    grid = _refined_grid(kernel, total)
    weights = np.asarray([kernel.integral(a, b) for a, b in zip(grid, grid[1:])])

    if model.dimension > 1:
        res = i_f_conjugate(model, kernel, x, tol=tol)
        if not math.isfinite(res.value):
            raise DomainError("rate is infinite at x; no minimizing path")
        slopes = _average_slopes(model, kernel, res.lambda_star, grid, False)
        gap = np.asarray(x, dtype=float) - weights @ slopes
        slopes += np.outer(weights, gap) / float(weights @ weights)
        return CadlagPath(model.dimension, tuple(grid),
                          tuple(tuple(s) for s in slopes), ())

    x = float(x)
    sup_e, inf_e = prob.sup_ef_prime, prob.inf_ef_prime
    if inf_e < x < sup_e:
        try:
            lam = grad_inverse(prob.oracle, x, tol=min(tol, 1e-10))
        except (GradientRangeError, NonConvergenceError):
            lam = None  # boundary-grade x; fall through to the clamped form
        if lam is not None:
            slopes = _average_slopes(model, kernel, lam, grid, False)[:, 0]
            gap = x - float(weights @ slopes)
            slopes = slopes + weights * gap / float(weights @ weights)
            return CadlagPath(1, tuple(grid), tuple(slopes.tolist()), ())

    if x >= sup_e:
        singular_plus = True
    elif x <= inf_e:
        singular_plus = False
    else:
        # interior solve failed at boundary grade; clamp toward the nearer edge
        singular_plus = (sup_e - x) <= (x - inf_e)
    m_plus, m_minus = prob.m_plus_minus
    lam_bar = m_plus if singular_plus else -m_minus
    if not math.isfinite(lam_bar):
        raise DomainError("rate is infinite at x; no minimizing path")

    dom = model.domain
    if singular_plus:
        to_max = kernel.max_plus > 0 and m_plus == _quot(dom.upper, kernel.max_plus)
    else:
        to_max = kernel.max_plus > 0 and m_minus == _quot(-dom.lower, kernel.max_plus)
    intervals = kernel.argmax_intervals if to_max else kernel.argmin_intervals
    a0, b0 = intervals[0]
    if b0 > a0:
        raise AmbiguityError(
            "the extremizer set of f has positive measure; the jump location "
            "is not determined")
    tau = a0
    slopes = _average_slopes(model, kernel, lam_bar, grid, True)[:, 0]
    raw = float(weights @ slopes)
    jump_val = (x - raw) / kernel.eval(tau)
    if jump_val != 0.0 and math.isinf(model.recession(math.copysign(1.0, jump_val))):
        jump_val = 0.0  # residual of boundary-grade x; a priced jump would cost inf
    return CadlagPath(1, tuple(grid), tuple(slopes.tolist()),
                      ((tau, float(jump_val)),))


# ----------------------------------------------------------------------
# Variational oracle: minimise the discrete action directly
# ----------------------------------------------------------------------

def _rate_dom_bounds(model: CgfModel):
    lo, hi = model.rate_dom
    return float(lo), float(hi)


def _slopes_from_rate_grad(model: CgfModel, svals: np.ndarray) -> np.ndarray:
    """Solve I'(v_i) = s_i elementwise (smallest solution); +-inf when the
    target slope is not attained inside the rate domain."""
    rlo, rhi = _rate_dom_bounds(model)
    mean = float(model.mean)
    n = svals.size
    vlo = np.full(n, mean)
    vhi = np.full(n, mean)

    def grad(v):
        with np.errstate(all="ignore"):
            g = np.asarray(model.rate_grad(v), dtype=float)
        return g

    up = svals > 0
    down = svals < 0
    for _ in range(130):
        need = up & (grad(vhi) < svals)
        if not np.any(need):
            break
        if math.isfinite(rhi):
            vhi[need] = rhi - 0.5 * (rhi - vhi[need])
        else:
            vhi[need] = vhi[need] * 2.0 + 1.0
    unreached_hi = up & (grad(vhi) < svals)

    for _ in range(130):
        need = down & (grad(vlo) > svals)
        if not np.any(need):
            break
        if math.isfinite(rlo):
            vlo[need] = rlo + 0.5 * (vlo[need] - rlo)
        else:
            vlo[need] = vlo[need] * 2.0 - 1.0
    unreached_lo = down & (grad(vlo) > svals)

    lo_b = np.where(up, mean, vlo)
    hi_b = np.where(down, mean, vhi)
    for _ in range(110):
        mid = 0.5 * (lo_b + hi_b)
        g = grad(mid)
        take_lo = g < svals
        lo_b = np.where(take_lo, mid, lo_b)
        hi_b = np.where(take_lo, hi_b, mid)
    out = 0.5 * (lo_b + hi_b)
    out[unreached_hi] = math.inf
    out[unreached_lo] = -math.inf
    out[svals == 0.0] = mean
    return out


def _limit_slopes(model: CgfModel, fbar: np.ndarray, positive: bool) -> np.ndarray:
    """Slopes as the tilt runs away to +-infinity."""
    rlo, rhi = _rate_dom_bounds(model)
    mean = float(model.mean)
    edge_hi = rhi if math.isfinite(rhi) else math.inf
    edge_lo = rlo if math.isfinite(rlo) else -math.inf
    out = np.full(fbar.size, mean)
    hi_side = fbar > 0 if positive else fbar < 0
    lo_side = fbar < 0 if positive else fbar > 0
    out[hi_side] = edge_hi
    out[lo_side] = edge_lo
    return out


def _discrete_value(model: CgfModel, lens: np.ndarray, slopes: np.ndarray) -> float:
    if not np.all(np.isfinite(slopes)):
        return math.inf
    with np.errstate(all="ignore"):
        rates = np.asarray(model.rate(slopes), dtype=float)
    if not np.all(np.isfinite(rates)):
        return math.inf
    return float(np.sum(lens * rates))


def variational_rate(model: CgfModel, kernel: Kernel, x, pieces: int = 200,
                     tol: float = 1e-9) -> float:
    """Minimum of the discretised action over paths pairing to x.

    Independent of the conjugate machinery: works purely with the rate
    function I, its derivative, and exact kernel piece integrals.  Jumps
    enter as linear channels priced at the recession constants.
    """
    if pieces < 1:
        raise ValueError("pieces must be >= 1")
    if model.dimension > 1:
        return _variational_nd(model, kernel, np.asarray(x, dtype=float), pieces)

    x = float(x)
    grid = np.asarray(_refined_grid(kernel, pieces))
    lens = np.diff(grid)
    w = np.asarray([kernel.integral(a, b) for a, b in zip(grid, grid[1:])])
    fbar = w / lens

    i_plus = model.recession(1.0)
    i_minus = model.recession(-1.0)
    price_up = min(_quot(i_plus, kernel.max_plus), _quot(i_minus, kernel.max_minus))
    price_down = min(_quot(i_plus, kernel.max_minus), _quot(i_minus, kernel.max_plus))

    def psi_and_slopes(nu):
        slopes = _slopes_from_rate_grad(model, nu * fbar)
        if not np.all(np.isfinite(slopes)):
            return math.inf if nu > 0 else -math.inf, slopes
        return float(w @ slopes), slopes

    center, _ = psi_and_slopes(0.0)
    scale = max(1.0, abs(x), abs(center))
    if abs(x - center) <= 1e-14 * scale:
        return _discrete_value(model, lens, _slopes_from_rate_grad(
            model, np.zeros_like(fbar)))

    upward = x > center
    cap = price_up if upward else price_down
    sgn = 1.0 if upward else -1.0

    # search for a bracketing tilt, stopping at the jump price cap
    nu_in, psi_in = 0.0, center
    nu_out = None
    probe = _PROBE_START
    plateau = None
    for _ in range(200):
        nu = sgn * probe
        if math.isfinite(cap) and probe >= cap:
            nu = sgn * cap
        psi, slopes = psi_and_slopes(nu)
        reached = psi >= x if upward else psi <= x
        if reached:
            nu_out = nu
            break
        nu_in, psi_in = nu, psi
        if math.isfinite(cap) and probe >= cap:
            break
        if plateau is not None and abs(psi - plateau) <= 1e-13 * max(1.0, abs(psi)):
            break
        plateau = psi
        probe *= 2.0

    if nu_out is None:
        # pairing saturated before reaching x: pay for a jump, or report inf
        if math.isfinite(cap):
            base_slopes = _slopes_from_rate_grad(model, sgn * cap * fbar)
            val = _discrete_value(model, lens, base_slopes)
            if not math.isfinite(val):
                return math.inf
            gap = x - float(w @ base_slopes)
            if sgn * gap < -1e-9 * scale:
                raise NonConvergenceError("variational bracket lost the target")
            return val + cap * abs(gap)
        limit = _limit_slopes(model, fbar, positive=upward)
        if np.all(np.isfinite(limit)):
            psi_lim = float(w @ limit)
            if abs(x - psi_lim) <= 1e-9 * max(1.0, abs(x), abs(psi_lim)):
                return _discrete_value(model, lens, limit)
        return math.inf

    # bisect between nu_in and nu_out
    lo_nu, hi_nu = (nu_in, nu_out) if upward else (nu_out, nu_in)
    for _ in range(120):
        mid = 0.5 * (lo_nu + hi_nu)
        psi, _ = psi_and_slopes(mid)
        if psi < x:
            lo_nu = mid
        else:
            hi_nu = mid
    nu = 0.5 * (lo_nu + hi_nu)
    psi, slopes = psi_and_slopes(nu)
    if not np.all(np.isfinite(slopes)):
        _, slopes = psi_and_slopes(lo_nu if upward else hi_nu)
    return _discrete_value(model, lens, slopes)


def _variational_nd(model: CgfModel, kernel: Kernel, x: np.ndarray,
                    pieces: int) -> float:
    d = model.dimension
    grid = np.asarray(_refined_grid(kernel, pieces))
    lens = np.diff(grid)
    w = np.asarray([kernel.integral(a, b) for a, b in zip(grid, grid[1:])])
    fbar = w / lens
    mean = np.asarray(model.mean_vec)

    def slopes_for(nu):
        out = np.empty((len(lens), d))
        for i, fb in enumerate(fbar):
            target = fb * nu
            v = mean.copy()
            for _ in range(80):
                g = np.asarray(model.rate_grad(v), dtype=float) - target
                if np.linalg.norm(g) <= 1e-13 * max(1.0, np.linalg.norm(target)):
                    break
                h = np.asarray(model.rate_hess(v), dtype=float)
                v = v - np.linalg.solve(h, g)
            out[i] = v
        return out

    nu = np.zeros(d)
    for _ in range(80):
        slopes = slopes_for(nu)
        gap = x - w @ slopes
        if np.linalg.norm(gap) <= 1e-12 * max(1.0, float(np.linalg.norm(x))):
            break
        jac = np.zeros((d, d))
        for i, fb in enumerate(fbar):
            h = np.asarray(model.rate_hess(slopes[i]), dtype=float)
            jac += lens[i] * fb * fb * np.linalg.inv(h)
        nu = nu + np.linalg.solve(jac, gap)
    else:
        raise NonConvergenceError("variational solve stalled in d > 1")
    return _discrete_value(model, lens, slopes)


def x_grid(model: CgfModel, kernel: Kernel, count: int = 50, span: float = 3.0):
    """Test grid of x values centered at m1 * mean, clipped to where the
    weighted rate can be finite.

    When the tilt cap is infinite the rate blows up steeply approaching the
    slope-range edge (the local slope of I_f is the tilt itself), so the clip
    backs off by a relative 1e-6: any closer and the value is no longer
    determined to useful accuracy by a double-precision x.
    """
    prob = _problem(model, kernel)
    center = kernel.m1 * float(model.mean)
    m_plus, m_minus = prob.m_plus_minus
    hi = center + span
    if not math.isfinite(m_plus):
        edge = prob.sup_ef_prime
        if math.isfinite(edge):
            hi = min(hi, edge - 1e-6 * max(1.0, abs(edge)))
    lo = center - span
    if not math.isfinite(m_minus):
        edge = prob.inf_ef_prime
        if math.isfinite(edge):
            lo = max(lo, edge + 1e-6 * max(1.0, abs(edge)))
    return np.linspace(lo, hi, count)
