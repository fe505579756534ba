"""Weighted rate function: moment integrals, both evaluation routes, the
variational cross-check and minimizing paths."""

import math

import numpy as np
import pytest
from scipy.integrate import quad as scipy_quad

from ldpkit import (
    AmbiguityError,
    d_f,
    e_f,
    e_f_grad,
    ef_prime_range,
    i_f_conjugate,
    i_f_explicit,
    identity,
    constant,
    i_d,
    m_plus_minus,
    minimizer,
    pair,
    parse_kernel,
    parse_model,
    variational_rate,
    x_grid,
)
from ldpkit.cgf import gaussian

ID = identity()
CONST1 = constant(1.0)
NEGID = parse_kernel("affine:0,-1")
TENT = parse_kernel("pwl:0:0,0.5:1,1:0")
PLATEAU = parse_kernel("pwl:0:0,0.25:1,0.75:1,1:0")

PAIRS = [
    ("gaussian:mu=0,sigma=1", ID),
    ("gaussian:mu=0,sigma=1", parse_kernel("affine:0.5,1")),
    ("gaussian:mu=0.5,sigma=2", parse_kernel("affine:0.5,1")),
    ("gaussian:mu=0,sigma=1", TENT),
    ("cexp", CONST1),
    ("cexp", ID),
    ("rademacher", ID),
    ("poisson:rate=1", CONST1),
    ("synthetic-boundary", ID),
]


# -- weighted cumulant integral ------------------------------------------------


def test_e_f_gaussian_identity():
    m = parse_model("gaussian:mu=0,sigma=1")
    # int (lam t)^2 / 2 dt = lam^2 / 6
    assert e_f(m, ID, 3.0) == pytest.approx(1.5, abs=1e-12)
    assert e_f(m, ID, 0.0) == 0.0


def test_e_f_cexp_constant():
    m = parse_model("cexp")
    want = -math.log(0.5) - 0.5
    assert e_f(m, CONST1, 0.5) == pytest.approx(want, abs=1e-12)
    assert e_f(m, CONST1, 1.5) == math.inf
    assert e_f(m, CONST1, 1.0) == math.inf  # open boundary held on all of [0,1]


def test_e_f_cexp_identity_improper():
    # lam = 1 touches the domain edge only at t = 1; the integral still
    # converges: int_0^1 (-log(1-t) - t) dt = 1/2.
    m = parse_model("cexp")
    assert e_f(m, ID, 1.0) == pytest.approx(0.5, abs=1e-9)
    assert e_f(m, ID, 1.5) == math.inf


def test_e_f_matches_quadrature():
    grids = {"gaussian:mu=0,sigma=1": [-2.0, 0.7, 3.0],
             "cexp": [-1.0, 0.4, 0.9],
             "rademacher": [-2.5, 1.0],
             "poisson:rate=1": [-1.5, 0.8],
             "synthetic-boundary": [-2.0, 0.6]}
    for spec, lams in grids.items():
        m = parse_model(spec)
        for k in (ID, TENT):
            for lam in lams:
                ref, _ = scipy_quad(lambda t: m.k(lam * float(k(t))), 0.0, 1.0,
                                    points=k.breakpoints, limit=200)
                assert e_f(m, k, lam) == pytest.approx(ref, abs=1e-9), \
                    (spec, lam)


def test_e_f_grad_examples():
    g = parse_model("gaussian:mu=0,sigma=1")
    assert e_f_grad(g, ID, 3.0) == pytest.approx(1.0, abs=1e-12)
    # at lam = 0 the slope is m1 * mean for any model
    shifted = parse_model("gaussian:mu=0.5,sigma=1")
    assert e_f_grad(shifted, ID, 0.0) == pytest.approx(0.25, abs=1e-12)
    for spec in ("cexp", "rademacher", "poisson:rate=1", "synthetic-boundary"):
        assert e_f_grad(parse_model(spec), ID, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_e_f_grad_is_derivative():
    h = 1e-6
    for spec, k in PAIRS:
        m = parse_model(spec)
        lam = 0.37 if math.isinf(m_plus_minus(m, k)[0]) else 0.37 * m_plus_minus(m, k)[0]
        fd = (e_f(m, k, lam + h) - e_f(m, k, lam - h)) / (2 * h)
        assert e_f_grad(m, k, lam) == pytest.approx(fd, abs=5e-6), spec


def test_e_f_grad_improper_at_cap():
    # synthetic slope at the domain cap is a convergent improper integral
    m = parse_model("synthetic-boundary")
    assert e_f_grad(m, ID, 1.0) == pytest.approx(7.0 / 30.0, abs=1e-8)


# -- domain analysis -----------------------------------------------------------


def test_m_plus_minus_table():
    g = parse_model("gaussian:mu=0,sigma=1")
    assert m_plus_minus(g, ID) == (math.inf, math.inf)
    c = parse_model("cexp")
    assert m_plus_minus(c, ID) == (1.0, math.inf)
    assert m_plus_minus(c, NEGID) == (math.inf, 1.0)
    assert m_plus_minus(c, CONST1) == (1.0, math.inf)
    s = parse_model("synthetic-boundary")
    assert m_plus_minus(s, ID) == (1.0, math.inf)


def test_d_f_closure_flags():
    c = d_f(parse_model("cexp"), ID)
    assert (c.lower, c.upper) == (-math.inf, 1.0)
    assert not c.upper_closed
    s = d_f(parse_model("synthetic-boundary"), ID)
    assert (s.lower, s.upper) == (-math.inf, 1.0)
    assert s.upper_closed
    s2 = d_f(parse_model("synthetic-boundary"), NEGID)
    assert (s2.lower, s2.upper) == (-1.0, math.inf)
    assert s2.lower_closed


def test_ef_prime_range_table():
    lo, hi = ef_prime_range(parse_model("rademacher"), ID)
    assert lo == pytest.approx(-0.5, abs=1e-12)
    assert hi == pytest.approx(0.5, abs=1e-12)
    lo, hi = ef_prime_range(parse_model("cexp"), ID)
    assert lo == pytest.approx(-0.5, abs=1e-10)
    assert hi == math.inf
    lo, hi = ef_prime_range(parse_model("poisson:rate=1"), ID)
    assert lo == pytest.approx(-0.5, abs=1e-10)
    assert hi == math.inf
    lo, hi = ef_prime_range(parse_model("synthetic-boundary"), ID)
    assert hi == pytest.approx(7.0 / 30.0, abs=1e-10)
    assert lo == -math.inf


# -- the two evaluation routes -------------------------------------------------


@pytest.mark.parametrize("spec,k", PAIRS)
def test_routes_agree(spec, k):
    m = parse_model(spec)
    for x in x_grid(m, k, count=50):
        a = i_f_conjugate(m, k, float(x))
        b = i_f_explicit(m, k, float(x))
        if math.isinf(a.value) or math.isinf(b.value):
            assert a.value == b.value, (spec, x)
        else:
            assert a.value == pytest.approx(
                b.value, abs=1e-6 * max(1.0, abs(a.value))), (spec, x)


@pytest.mark.parametrize("spec,k", PAIRS)
def test_rate_finite_on_grid(spec, k):
    m = parse_model(spec)
    vals = [i_f_conjugate(m, k, float(x)).value for x in x_grid(m, k, count=25)]
    assert all(math.isfinite(v) for v in vals), spec
    assert all(v >= -1e-12 for v in vals)


@pytest.mark.parametrize("spec,k", PAIRS)
def test_rate_convex_on_grid(spec, k):
    m = parse_model(spec)
    xs = x_grid(m, k, count=21)
    vals = np.asarray([i_f_conjugate(m, k, float(x)).value for x in xs])
    mids = np.asarray([i_f_conjugate(m, k, 0.5 * float(xs[i]) + 0.5 * float(xs[i + 2])).value
                       for i in range(len(xs) - 2)])
    assert np.all(mids <= 0.5 * vals[:-2] + 0.5 * vals[2:] + 1e-9), spec


def test_gaussian_identity_closed_form():
    m = parse_model("gaussian:mu=0,sigma=1")
    for x in np.linspace(-3.0, 3.0, 13):
        want = 1.5 * x * x  # x^2 / (2 * int t^2 dt)
        assert i_f_conjugate(m, ID, float(x)).value == pytest.approx(want, abs=1e-8)
        assert i_f_explicit(m, ID, float(x)).value == pytest.approx(want, abs=1e-8)


def test_gaussian_affine_closed_form():
    m = parse_model("gaussian:mu=0.5,sigma=2")
    k = parse_kernel("affine:0.5,1")
    m2 = k.m2
    for x in (-1.0, 0.5, 2.0):
        want = (x - 0.5 * k.m1) ** 2 / (2.0 * 4.0 * m2)
        assert i_f_conjugate(m, k, x).value == pytest.approx(want, abs=1e-8)


def test_constant_kernel_reduces_to_plain_rate():
    probe = {"gaussian:mu=0,sigma=1": (-1.5, 0.3, 2.0),
             "cexp": (-2.0, 0.5, 3.0),
             "rademacher": (-0.8, 0.2, 0.8),
             "poisson:rate=1": (-0.7, 0.5, 2.5),
             "synthetic-boundary": (-0.3, 0.4, 1.0)}
    for spec, xs in probe.items():
        m = parse_model(spec)
        for x in xs:
            res = i_f_conjugate(m, CONST1, x)
            assert res.value == pytest.approx(m.rate(x), abs=1e-8), (spec, x)


def test_exact_zero_at_center():
    for spec, k in PAIRS:
        m = parse_model(spec)
        center = k.m1 * float(m.mean)
        res = i_f_conjugate(m, k, center)
        assert res.value == 0.0
        assert res.lambda_star == 0.0
        assert res.branch == "interior"
        assert i_f_explicit(m, k, center).value == 0.0


def test_synthetic_singular_branch():
    m = parse_model("synthetic-boundary")
    a = i_f_conjugate(m, ID, 1.0)
    b = i_f_explicit(m, ID, 1.0)
    assert a.branch == "singular_plus"
    assert b.branch == "singular_plus"
    assert a.value == pytest.approx(0.9, abs=1e-6)
    assert b.value == pytest.approx(0.9, abs=1e-6)
    # past the slope supremum the rate grows linearly at the cap M+
    h = 1e-4
    fd = (i_f_explicit(m, ID, 1.0 + h).value - b.value) / h
    assert fd == pytest.approx(1.0, abs=1e-8)


def test_synthetic_mirrored_singular_branch():
    m = parse_model("synthetic-boundary")
    res = i_f_explicit(m, NEGID, -1.0)
    assert res.branch == "singular_minus"
    assert res.value == pytest.approx(0.9, abs=1e-6)
    h = 1e-4
    fd = (i_f_explicit(m, NEGID, -1.0 - h).value - res.value) / h
    assert fd == pytest.approx(1.0, abs=1e-8)


def test_rademacher_boundary_of_support():
    # with f(t) = t the weighted sum cannot exceed 1/2; at exactly 1/2 the
    # rate is still finite (log 2, every sign forced)
    m = parse_model("rademacher")
    a = i_f_conjugate(m, ID, 0.5)
    b = i_f_explicit(m, ID, 0.5)
    assert a.value == pytest.approx(math.log(2.0), abs=1e-6)
    assert b.value == pytest.approx(math.log(2.0), abs=1e-6)
    assert i_f_conjugate(m, ID, 0.6).value == math.inf
    assert i_f_conjugate(m, ID, 0.6).branch == "infinite"


def test_infinite_below_slope_floor():
    # the slope of E_f is bounded below by -1/2 while lambda is free to run
    # to -inf, so levels under the floor are unreachable at any linear price
    m = parse_model("cexp")
    for route in (i_f_conjugate, i_f_explicit):
        res = route(m, ID, -1.2)
        assert res.value == math.inf
        assert res.branch == "infinite"


# -- variational cross-check -----------------------------------------------------


def test_variational_matches_conjugate():
    cases = [("gaussian:mu=0,sigma=1", ID, (0.4, 1.0, -0.8)),
             ("cexp", CONST1, (0.5, -0.9, 2.0)),
             ("synthetic-boundary", ID, (0.15, -0.5, 1.0))]
    for spec, k, xs in cases:
        m = parse_model(spec)
        for x in xs:
            want = i_f_conjugate(m, k, x).value
            got = variational_rate(m, k, x, pieces=200)
            assert got == pytest.approx(want, abs=5e-3), (spec, x)


def test_variational_rejects_bad_pieces():
    with pytest.raises(ValueError):
        variational_rate(parse_model("cexp"), CONST1, 0.5, pieces=0)


# -- minimizing paths -------------------------------------------------------------


@pytest.mark.parametrize("spec,k,x", [
    ("gaussian:mu=0,sigma=1", ID, 1.0),
    ("gaussian:mu=0,sigma=1", TENT, -0.6),
    ("cexp", CONST1, 0.5),
    ("rademacher", ID, 0.3),
    ("synthetic-boundary", ID, 0.15),
])
def test_minimizer_interior(spec, k, x):
    m = parse_model(spec)
    path = minimizer(m, k, x)
    want = i_f_conjugate(m, k, x).value
    assert pair(k, path) == pytest.approx(x, abs=1e-8)
    assert i_d(path, m) == pytest.approx(want, abs=1e-6 * max(1.0, want))
    assert path.jumps == ()


def test_minimizer_singular_jump():
    m = parse_model("synthetic-boundary")
    path = minimizer(m, ID, 1.0)
    assert pair(ID, path) == pytest.approx(1.0, abs=1e-10)
    assert i_d(path, m) == pytest.approx(0.9, abs=1e-6)
    assert len(path.jumps) == 1
    tau, val = path.jumps[0]
    assert tau == 1.0  # f takes its maximum at the right endpoint
    assert val == pytest.approx(1.0 - 7.0 / 30.0, abs=1e-8)


def test_minimizer_ambiguous_jump_site():
    m = parse_model("synthetic-boundary")
    hi = ef_prime_range(m, PLATEAU)[1]
    with pytest.raises(AmbiguityError):
        minimizer(m, PLATEAU, hi + 0.5)


def test_minimizer_perturbations_cost_more():
    m = parse_model("gaussian:mu=0,sigma=1")
    x = 0.8
    path = minimizer(m, ID, x)
    base = i_d(path, m)
    rng = np.random.default_rng(5)
    grid = np.asarray(path.grid)
    w = np.asarray([ID.integral(a, b) for a, b in zip(grid, grid[1:])])
    slopes = np.asarray([s[0] if isinstance(s, tuple) else s for s in path.slopes])
    from ldpkit import CadlagPath
    for _ in range(10):
        bump = rng.normal(size=slopes.size)
        bump -= w * float(w @ bump) / float(w @ w)  # keep the pairing fixed
        cand = CadlagPath(1, path.grid, tuple((slopes + 0.3 * bump).tolist()),
                          path.jumps)
        assert pair(ID, cand) == pytest.approx(x, abs=1e-8)
        assert i_d(cand, m) > base + 1e-10


# -- multivariate ------------------------------------------------------------------


def test_vector_gaussian_closed_form():
    m = gaussian(mu=(0.0, 0.0), cov=((1.0, 0.0), (0.0, 1.0)))
    x = np.asarray([1.0, 0.5])
    want = float(x @ x) / (2.0 * ID.m2)  # 1.25 * 1.5 = 1.875
    res = i_f_conjugate(m, ID, x)
    assert res.value == pytest.approx(1.875, abs=1e-7)
    assert res.value == pytest.approx(want, abs=1e-7)
    assert np.allclose(res.lambda_star, 3.0 * x, atol=1e-6)


def test_vector_gaussian_minimizer():
    m = gaussian(mu=(0.0, 0.0), cov=((1.0, 0.0), (0.0, 1.0)))
    x = np.asarray([1.0, 0.5])
    path = minimizer(m, ID, x)
    assert np.allclose(pair(ID, path), x, atol=1e-8)
    assert i_d(path, m) == pytest.approx(1.875, abs=1e-5)


def test_vector_center_is_exact_zero():
    m = gaussian(mu=(0.3, -0.2), cov=((1.0, 0.1), (0.1, 2.0)))
    center = ID.m1 * np.asarray([0.3, -0.2])
    res = i_f_conjugate(m, ID, center)
    assert res.value == 0.0
    assert np.all(np.asarray(res.lambda_star) == 0.0)


def test_vector_variational():
    m = gaussian(mu=(0.0, 0.0), cov=((1.0, 0.0), (0.0, 1.0)))
    x = np.asarray([1.0, 0.5])
    got = variational_rate(m, ID, x, pieces=60)
    assert got == pytest.approx(1.875, abs=5e-3)


# -- x grids -----------------------------------------------------------------------


def test_x_grid_respects_finite_rate_region():
    m = parse_model("rademacher")
    xs = x_grid(m, ID, count=50)
    assert xs[0] >= -0.5 - 1e-12
    assert xs[-1] <= 0.5 + 1e-12
    g = parse_model("gaussian:mu=0,sigma=1")
    xs = x_grid(g, ID, count=7, span=2.0)
    assert xs[0] == pytest.approx(-2.0)
    assert xs[-1] == pytest.approx(2.0)
