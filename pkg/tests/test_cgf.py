"""Catalog models: closed forms, domains, duality, samplers."""

import math

import numpy as np
import pytest

from ldpkit import (DomainError, DomainInterval, NoSamplerError, parse_model)
from ldpkit.cgf import (MODEL_FACTORIES, centered_exponential,
                        centered_poisson, gaussian, rademacher,
                        synthetic_boundary)

ALL_SPECS = ("gaussian:mu=0,sigma=1", "cexp", "rademacher",
             "poisson:rate=1", "synthetic-boundary")


def interior_samples(model, rng, count):
    """Random points well inside the effective domain."""
    lo, hi = model.domain.lower, model.domain.upper
    lo = max(lo, -6.0) + 0.05
    hi = min(hi, 6.0) - 0.05
    return rng.uniform(lo, hi, size=count)


# -- closed-form spot values -----------------------------------------------

def test_gaussian_cgf_value():
    m = parse_model("gaussian:mu=0,sigma=1")
    assert m.k(0.6) == pytest.approx(0.18, abs=1e-15)


def test_cexp_cgf_values():
    m = parse_model("cexp")
    assert m.k(0.5) == pytest.approx(-0.5 - math.log(0.5), abs=1e-14)
    assert m.k(1.2) == math.inf
    assert m.k(1.0) == math.inf  # open endpoint


def test_gradient_spot_values():
    assert parse_model("gaussian:mu=0,sigma=1").grad(0.7) == pytest.approx(0.7)
    assert parse_model("cexp").grad(0.5) == pytest.approx(1.0, abs=1e-12)
    syn = parse_model("synthetic-boundary")
    assert syn.grad(0.75) == pytest.approx(0.5, abs=1e-12)
    assert syn.grad(1.0, one_sided=True) == pytest.approx(1.0, abs=1e-12)


def test_grad_outside_domain_rejected():
    m = parse_model("cexp")
    with pytest.raises(DomainError):
        m.grad(1.0)
    with pytest.raises(DomainError):
        m.grad(1.5)


def test_recession_values():
    cexp = parse_model("cexp")
    assert cexp.recession(1.0) == 1.0
    assert cexp.recession(-1.0) == math.inf
    gauss = parse_model("gaussian:mu=0,sigma=1")
    assert gauss.recession(1.0) == math.inf
    syn = parse_model("synthetic-boundary")
    assert syn.recession(1.0) == 1.0
    assert parse_model("rademacher").recession(-1.0) == math.inf


def test_rate_spot_values():
    assert parse_model("gaussian:mu=0,sigma=1").rate(2.0) == pytest.approx(2.0)
    assert parse_model("cexp").rate(1.0) == pytest.approx(1.0 - math.log(2.0))
    rad = parse_model("rademacher")
    assert rad.rate(1.0) == pytest.approx(math.log(2.0))
    assert rad.rate(-1.0) == pytest.approx(math.log(2.0))
    assert rad.rate(1.1) == math.inf
    assert parse_model("cexp").rate(-1.2) == math.inf


def test_synthetic_boundary_shape():
    syn = parse_model("synthetic-boundary")
    # K(1) = 1 + (2/3)(0 - 1) = 1/3 at the closed endpoint
    assert syn.k(1.0) == pytest.approx(1.0 / 3.0, abs=1e-14)
    assert syn.k(1.0 + 1e-12) == math.inf
    assert syn.domain.upper_closed
    # I(v) = 2/3 - (1 - v) + (1 - v)^3 / 3 on v <= 1
    v = 0.4
    assert syn.rate(v) == pytest.approx(2.0 / 3.0 - 0.6 + 0.6 ** 3 / 3.0,
                                        abs=1e-14)


# -- invariants -------------------------------------------------------------

@pytest.mark.parametrize("spec", ALL_SPECS)
def test_k_zero_and_rate_at_mean(spec):
    m = parse_model(spec)
    assert m.k(0.0) == 0.0
    mean = float(m.mean_vec[0])
    assert m.rate(mean) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_conjugate_identity_random(spec):
    """I(K'(u)) = u K'(u) - K(u) at random interior points."""
    m = parse_model(spec)
    rng = np.random.default_rng(42)
    for u in interior_samples(m, rng, 200):
        v = m.grad(float(u))
        lhs = m.rate(v)
        rhs = u * v - m.k(float(u))
        assert abs(lhs - rhs) <= 1e-8, (spec, u, lhs, rhs)


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_grad_matches_finite_differences(spec):
    m = parse_model(spec)
    rng = np.random.default_rng(7)
    for u in interior_samples(m, rng, 100):
        u = float(u)
        h = 1e-6 * max(1.0, abs(u))
        if not (m.domain.interior_contains(u - h)
                and m.domain.interior_contains(u + h)):
            continue
        fd = (m.k(u + h) - m.k(u - h)) / (2.0 * h)
        g = m.grad(u)
        assert abs(fd - g) <= 1e-6 * max(1.0, abs(g)), (spec, u, fd, g)


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_convexity_midpoint(spec):
    m = parse_model(spec)
    rng = np.random.default_rng(3)
    us = interior_samples(m, rng, 80)
    ws = interior_samples(m, rng, 80)
    for u, w in zip(us, ws):
        mid = m.k(0.5 * (u + w))
        assert mid <= 0.5 * m.k(float(u)) + 0.5 * m.k(float(w)) + 1e-12


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_rate_minorant(spec):
    m = parse_model(spec)
    c1, c2 = m.minorant
    assert c1 > 0
    rng = np.random.default_rng(11)
    for v in rng.uniform(-8.0, 8.0, size=200):
        assert m.rate(float(v)) >= c1 * abs(v) - c2 - 1e-9


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_rate_nonnegative_and_convex(spec):
    m = parse_model(spec)
    rng = np.random.default_rng(5)
    vs = rng.uniform(-3.0, 3.0, size=60)
    for v, w in zip(vs[::2], vs[1::2]):
        rv, rw = m.rate(float(v)), m.rate(float(w))
        assert rv >= 0.0 and rw >= 0.0
        mid = m.rate(0.5 * (float(v) + float(w)))
        if math.isfinite(rv) and math.isfinite(rw):
            assert mid <= 0.5 * rv + 0.5 * rw + 1e-10


# -- samplers ----------------------------------------------------------------

def test_sampler_reproducible():
    m = parse_model("gaussian:mu=0,sigma=1")
    a = m.sample(16, seed=5)
    b = m.sample(16, seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, m.sample(16, seed=6))


def test_rademacher_sample_support():
    xs = parse_model("rademacher").sample(500, seed=1)
    assert set(np.unique(xs)) <= {-1.0, 1.0}


@pytest.mark.parametrize("spec,theta", [
    ("gaussian:mu=0,sigma=1", 1.0),
    ("cexp", 0.5),
    ("rademacher", 0.8),
    ("poisson:rate=1", 0.4),
])
def test_tilted_mean_matches_gradient(spec, theta):
    m = parse_model(spec)
    count = 40_000
    xs = m.tilt_sample(theta, count, seed=9)
    want = m.grad(theta)
    spread = math.sqrt(max(m.hessian(theta), 1e-12) / count)
    assert abs(float(np.mean(xs)) - want) <= 5.0 * spread


def test_tilt_zero_matches_plain_law():
    m = parse_model("cexp")
    a = m.sample(60_000, seed=2)
    b = m.tilt_sample(0.0, 60_000, seed=2)
    assert abs(np.mean(a) - np.mean(b)) <= 0.02
    assert abs(np.var(a) - np.var(b)) <= 0.05


def test_tilt_requires_interior_point():
    m = parse_model("cexp")
    with pytest.raises(DomainError):
        m.tilt_sample(1.0, 10, seed=0)


def test_synthetic_has_no_sampler():
    m = parse_model("synthetic-boundary")
    with pytest.raises(NoSamplerError):
        m.sample(4, seed=0)


# -- multivariate gaussian ---------------------------------------------------

def test_gaussian_vector_model():
    cov = ((1.0, 0.3), (0.3, 2.0))
    m = gaussian(mu=(0.5, -1.0), cov=cov)
    assert m.dimension == 2
    u = np.asarray([0.4, 0.2])
    mu = np.asarray([0.5, -1.0])
    sig = np.asarray(cov)
    want = float(mu @ u + 0.5 * u @ sig @ u)
    assert m.k(u) == pytest.approx(want, abs=1e-14)
    assert np.allclose(m.grad(u), mu + sig @ u)
    xs = m.sample(20_000, seed=3)
    assert xs.shape == (20_000, 2)
    assert np.allclose(np.mean(xs, axis=0), mu, atol=0.05)


def test_gaussian_scalar_requires_positive_sigma():
    with pytest.raises(ValueError):
        gaussian(mu=0.0, sigma=0.0)


# -- parsing and domains -----------------------------------------------------

def test_parse_model_rejects_unknown():
    with pytest.raises(ValueError):
        parse_model("nosuch")
    with pytest.raises(ValueError):
        parse_model("gaussian:nu=1")
    with pytest.raises(ValueError):
        parse_model("cexp:mu=1")


def test_parse_model_parameters():
    m = parse_model("gaussian:mu=0.5,sigma=2")
    assert float(m.mean_vec[0]) == 0.5
    assert m.k(1.0) == pytest.approx(0.5 + 2.0, abs=1e-14)
    p = parse_model("poisson:rate=2.5")
    assert p.hessian(0.0) == pytest.approx(2.5)


def test_domain_interval_validation():
    with pytest.raises(ValueError):
        DomainInterval(0.5, 1.0)       # must straddle 0
    with pytest.raises(ValueError):
        DomainInterval(-math.inf, math.inf, lower_closed=True)
    d = DomainInterval(-1.0, 1.0, upper_closed=True)
    assert d.contains(1.0) and not d.contains(-1.0)
    assert not d.interior_contains(1.0)


def test_catalog_is_complete():
    assert set(MODEL_FACTORIES) == {"gaussian", "cexp", "rademacher",
                                    "poisson", "synthetic-boundary"}
    for factory in (centered_exponential, rademacher, centered_poisson,
                    synthetic_boundary):
        m = factory()
        assert m.k(0.0) == 0.0
