"""Cumulant generating function models and the built-in catalog.

A model packages a cumulant generating function K (extended-real valued,
convex, K(0)=0), its effective domain, gradient, and the pieces the rest of
the toolkit needs: closed-form rate function where available, recession
values, samplers, and exponentially tilted samplers.  Multivariate entries
are restricted to full-space domains; bounded domains are one-dimensional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, NoSamplerError


@dataclass(frozen=True)
class DomainInterval:
    """Effective domain of a one-dimensional CGF, an interval around 0.

    Endpoints may be +-inf; closed flags are only meaningful for finite
    endpoints.  The interval must contain a neighbourhood of the origin.
    """

    lower: float
    upper: float
    lower_closed: bool = False
    upper_closed: bool = False

    def __post_init__(self):
        if not (self.lower < 0.0 < self.upper):
            raise ValueError("domain must contain a neighbourhood of 0")
        if self.lower_closed and not math.isfinite(self.lower):
            raise ValueError("closed endpoint must be finite")
        if self.upper_closed and not math.isfinite(self.upper):
            raise ValueError("closed endpoint must be finite")

    def contains(self, u: float) -> bool:
        if u < self.lower or u > self.upper:
            return False
        if u == self.lower:
            return self.lower_closed
        if u == self.upper:
            return self.upper_closed
        return True

    def interior_contains(self, u: float) -> bool:
        return self.lower < u < self.upper


@dataclass(frozen=True)
class FullSpace:
    """Full-space domain R^d (the only multivariate domain supported)."""

    dimension: int

    def contains(self, u) -> bool:
        return True

    def interior_contains(self, u) -> bool:
        return True


Domain = Union[DomainInterval, FullSpace]


@dataclass(frozen=True)
class CgfModel:
    """A CGF together with the analytic companions the toolkit consumes.

    Callables take scalars or numpy arrays for d=1, and arrays of shape
    (..., d) for d>1.  K returns +inf outside the domain; gradients return
    one-sided limit values on the closed hull boundary.
    """

    id: str
    dimension: int
    domain: Domain
    mean: Union[float, tuple]
    cgf: Callable
    cgf_grad: Callable
    cgf_hess: Optional[Callable] = None
    closed_rate: Optional[Callable] = None
    rate_grad: Optional[Callable] = None
    rate_hess: Optional[Callable] = None
    # Open interval on which rate_grad is usable (d=1 solvers need it).
    rate_dom: Optional[tuple] = None
    sampler: Optional[Callable] = None          # (rng, count) -> draws
    tilted_sampler: Optional[Callable] = None   # (theta, rng, count) -> draws
    minorant: tuple = (0.0, 0.0)                # (c1, c2): I(v) >= c1|v| - c2

    @cached_property
    def mean_vec(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.mean, dtype=float))

    # -- CGF surface ---------------------------------------------------

    def k(self, u):
        """K(u), +inf outside the effective domain."""
        self._check_dim(u)
        return self.cgf(u)

    def grad(self, u, one_sided: bool = False):
        """grad K at an interior point (or closed-boundary limit if one_sided)."""
        self._check_dim(u)
        if self.dimension == 1 and np.ndim(u) == 0:
            uu = float(u)
            dom = self.domain
            if not dom.interior_contains(uu):
                ok = one_sided and dom.contains(uu)
                if not ok:
                    raise DomainError(f"u={uu} not interior to the CGF domain")
        return self.cgf_grad(u)

    def hessian(self, u):
        if self.cgf_hess is None:
            raise DomainError(f"model {self.id} has no Hessian")
        self._check_dim(u)
        return self.cgf_hess(u)

    def rate(self, v):
        """Rate function I(v) (Legendre transform of K), extended-real."""
        self._check_dim(v)
        if self.closed_rate is not None:
            return self.closed_rate(v)
        from .conjugate import ConvexOracle, legendre  # local: avoid cycle

        oracle = ConvexOracle(domain=self.domain, eval=self.cgf,
                              grad=self.cgf_grad, hess=self.cgf_hess)
        if self.dimension == 1:
            arr = np.asarray(v, dtype=float)
            if arr.ndim == 0:
                return legendre(oracle, float(arr)).value
            flat = [legendre(oracle, float(c)).value for c in arr.reshape(-1)]
            return np.asarray(flat).reshape(arr.shape)
        return legendre(oracle, v).value

    def recession(self, direction) -> float:
        """Support function of the domain at a unit direction: the jump price."""
        if self.dimension == 1:
            d = float(np.asarray(direction).reshape(()))
            if abs(abs(d) - 1.0) > 1e-12:
                raise DomainError("direction must be a unit vector")
            return self.domain.upper if d > 0 else -self.domain.lower
        vec = np.asarray(direction, dtype=float)
        if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
            raise DomainError("direction must be a unit vector")
        return math.inf  # full-space domain

    # -- sampling ------------------------------------------------------

    def draw(self, rng: np.random.Generator, count: int):
        if self.sampler is None:
            raise NoSamplerError(f"model {self.id} has no sampler")
        return self.sampler(rng, count)

    def tilt_draw(self, theta, rng: np.random.Generator, count: int):
        if self.tilted_sampler is None:
            raise NoSamplerError(f"model {self.id} has no tilted sampler")
        if self.dimension == 1:
            if not self.domain.interior_contains(float(theta)):
                raise DomainError(f"tilt {theta} not interior to the CGF domain")
        return self.tilted_sampler(theta, rng, count)

    def sample(self, count: int, seed: int):
        return self.draw(np.random.default_rng(seed), count)

    def tilt_sample(self, theta, count: int, seed: int):
        return self.tilt_draw(theta, np.random.default_rng(seed), count)

    # -- helpers -------------------------------------------------------

    def _check_dim(self, u):
        # d=1 callables are vectorised over points, so any shape is a batch.
        if self.dimension > 1 and np.shape(u)[-1:] != (self.dimension,):
            raise DomainError("dimension mismatch")


def _scalarize(arr, template):
    if np.ndim(template) == 0:
        return float(arr)
    return arr


# ----------------------------------------------------------------------
# Catalog entries
# ----------------------------------------------------------------------

def gaussian(mu=0.0, sigma=1.0, cov=None) -> CgfModel:
    """Gaussian model; scalar (mu, sigma) or vector mu with covariance cov."""
    if cov is None and np.ndim(mu) == 0:
        m, s = float(mu), float(sigma)
        if s <= 0:
            raise ValueError("sigma must be positive")
        s2 = s * s

        def k(u):
            u = np.asarray(u, dtype=float)
            return _scalarize(m * u + 0.5 * s2 * u * u, u)

        def kp(u):
            u = np.asarray(u, dtype=float)
            return _scalarize(m + s2 * u, u)

        def kpp(u):
            u = np.asarray(u, dtype=float)
            return _scalarize(np.full_like(u, s2), u)

        def rate(v):
            v = np.asarray(v, dtype=float)
            return _scalarize((v - m) ** 2 / (2.0 * s2), v)

        def rate_g(v):
            v = np.asarray(v, dtype=float)
            return _scalarize((v - m) / s2, v)

        def rate_h(v):
            v = np.asarray(v, dtype=float)
            return _scalarize(np.full_like(v, 1.0 / s2), v)

        def sampler(rng, count):
            return rng.normal(m, s, size=count)

        def tilted(theta, rng, count):
            return rng.normal(m + s2 * float(theta), s, size=count)

        c2 = max(k(1.0), k(-1.0), 0.0)
        return CgfModel(
            id=f"gaussian:mu={m:g},sigma={s:g}",
            dimension=1,
            domain=DomainInterval(-math.inf, math.inf),
            mean=m,
            cgf=k, cgf_grad=kp, cgf_hess=kpp,
            closed_rate=rate, rate_grad=rate_g, rate_hess=rate_h,
            rate_dom=(-math.inf, math.inf),
            sampler=sampler, tilted_sampler=tilted,
            minorant=(1.0, c2),
        )

    mu_vec = np.atleast_1d(np.asarray(mu, dtype=float))
    d = mu_vec.size
    cov_m = np.asarray(cov, dtype=float) if cov is not None else np.eye(d) * float(sigma) ** 2
    if cov_m.shape != (d, d):
        raise ValueError("covariance shape mismatch")
    evals = np.linalg.eigvalsh(cov_m)
    if evals.min() <= 0:
        raise ValueError("covariance must be positive definite")
    chol = np.linalg.cholesky(cov_m)
    prec = np.linalg.inv(cov_m)

    def k(u):
        u = np.asarray(u, dtype=float)
        return u @ mu_vec + 0.5 * np.einsum("...i,ij,...j->...", u, cov_m, u)

    def kp(u):
        u = np.asarray(u, dtype=float)
        return mu_vec + u @ cov_m

    def kpp(u):
        return cov_m.copy()

    def rate(v):
        v = np.asarray(v, dtype=float)
        c = v - mu_vec
        return 0.5 * np.einsum("...i,ij,...j->...", c, prec, c)

    def rate_g(v):
        v = np.asarray(v, dtype=float)
        return (v - mu_vec) @ prec

    def rate_h(v):
        return prec.copy()

    def sampler(rng, count):
        return mu_vec + rng.standard_normal((count, d)) @ chol.T

    def tilted(theta, rng, count):
        shift = cov_m @ np.asarray(theta, dtype=float)
        return (mu_vec + shift) + rng.standard_normal((count, d)) @ chol.T

    c2 = float(np.linalg.norm(mu_vec) + 0.5 * evals.max())
    return CgfModel(
        id=f"gaussian:d={d}",
        dimension=d,
        domain=FullSpace(d),
        mean=tuple(mu_vec),
        cgf=k, cgf_grad=kp, cgf_hess=kpp,
        closed_rate=rate, rate_grad=rate_g, rate_hess=rate_h,
        sampler=sampler, tilted_sampler=tilted,
        minorant=(1.0, c2),
    )


def centered_exponential() -> CgfModel:
    """Unit-mean exponential shifted to mean zero: X = Y - 1, Y ~ Exp(1)."""

    def k(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(all="ignore"):
            safe = np.where(u < 1.0, u, 0.0)
            val = -safe - np.log1p(-safe)
        return _scalarize(np.where(u < 1.0, val, np.inf), u)

    def kp(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(all="ignore"):
            safe = np.where(u < 1.0, u, 0.0)
            val = safe / (1.0 - safe)
        return _scalarize(np.where(u < 1.0, val, np.inf), u)

    def kpp(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(all="ignore"):
            safe = np.where(u < 1.0, u, 0.0)
            val = 1.0 / (1.0 - safe) ** 2
        return _scalarize(np.where(u < 1.0, val, np.inf), u)

    def rate(v):
        v = np.asarray(v, dtype=float)
        with np.errstate(all="ignore"):
            safe = np.where(v > -1.0, v, 0.0)
            val = safe - np.log1p(safe)
        return _scalarize(np.where(v > -1.0, val, np.inf), v)

    def rate_g(v):
        v = np.asarray(v, dtype=float)
        return _scalarize(v / (1.0 + v), v)

    def rate_h(v):
        v = np.asarray(v, dtype=float)
        return _scalarize(1.0 / (1.0 + v) ** 2, v)

    def sampler(rng, count):
        return rng.standard_exponential(count) - 1.0

    def tilted(theta, rng, count):
        return rng.standard_exponential(count) / (1.0 - float(theta)) - 1.0

    # Supporting lines at u = +-1/2: c1 = 1/2, c2 = max K there.
    c2 = max(-0.5 - math.log(0.5), 0.5 - math.log(1.5))
    return CgfModel(
        id="cexp",
        dimension=1,
        domain=DomainInterval(-math.inf, 1.0),
        mean=0.0,
        cgf=k, cgf_grad=kp, cgf_hess=kpp,
        closed_rate=rate, rate_grad=rate_g, rate_hess=rate_h,
        rate_dom=(-1.0, math.inf),
        sampler=sampler, tilted_sampler=tilted,
        minorant=(0.5, c2),
    )


def rademacher() -> CgfModel:
    """Symmetric +-1 variable: K(u) = log cosh u."""

    def k(u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        # log cosh u, overflow-safe
        return _scalarize(a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0), u)

    def kp(u):
        u = np.asarray(u, dtype=float)
        return _scalarize(np.tanh(u), u)

    def kpp(u):
        u = np.asarray(u, dtype=float)
        e = np.exp(-2.0 * np.abs(u))
        sech = 2.0 * np.sqrt(e) / (1.0 + e)
        return _scalarize(sech * sech, u)

    def rate(v):
        v = np.asarray(v, dtype=float)
        with np.errstate(all="ignore"):
            safe = np.clip(v, -1.0, 1.0)
            p, q = 0.5 * (1.0 + safe), 0.5 * (1.0 - safe)
            val = (np.where(p > 0, p * np.log(np.where(p > 0, 2.0 * p, 1.0)), 0.0)
                   + np.where(q > 0, q * np.log(np.where(q > 0, 2.0 * q, 1.0)), 0.0))
        return _scalarize(np.where(np.abs(v) <= 1.0, val, np.inf), v)

    def rate_g(v):
        v = np.asarray(v, dtype=float)
        return _scalarize(np.arctanh(v), v)

    def rate_h(v):
        v = np.asarray(v, dtype=float)
        return _scalarize(1.0 / (1.0 - v * v), v)

    def sampler(rng, count):
        return rng.integers(0, 2, size=count) * 2.0 - 1.0

    def tilted(theta, rng, count):
        p_plus = 1.0 / (1.0 + math.exp(-2.0 * float(theta)))
        return (rng.random(count) < p_plus) * 2.0 - 1.0

    c2 = float(k(1.0))  # supporting lines at u = +-1
    return CgfModel(
        id="rademacher",
        dimension=1,
        domain=DomainInterval(-math.inf, math.inf),
        mean=0.0,
        cgf=k, cgf_grad=kp, cgf_hess=kpp,
        closed_rate=rate, rate_grad=rate_g, rate_hess=rate_h,
        rate_dom=(-1.0, 1.0),
        sampler=sampler, tilted_sampler=tilted,
        minorant=(1.0, c2),
    )


def centered_poisson(rate_param: float = 1.0) -> CgfModel:
    """Poisson(rate) shifted to mean zero."""
    r = float(rate_param)
    if r <= 0:
        raise ValueError("rate must be positive")

    def k(u):
        u = np.asarray(u, dtype=float)
        return _scalarize(r * (np.expm1(u) - u), u)

    def kp(u):
        u = np.asarray(u, dtype=float)
        return _scalarize(r * np.expm1(u), u)

    def kpp(u):
        u = np.asarray(u, dtype=float)
        return _scalarize(r * np.exp(u), u)

    def rate_fn(v):
        v = np.asarray(v, dtype=float)
        with np.errstate(all="ignore"):
            w = np.where(v > -r, v + r, 1.0)
            val = w * np.log(w / r) - v
        val = np.where(v > -r, val, np.inf)
        val = np.where(v == -r, r, val)
        return _scalarize(val, v)

    def rate_g(v):
        v = np.asarray(v, dtype=float)
        return _scalarize(np.log((v + r) / r), v)

    def rate_h(v):
        v = np.asarray(v, dtype=float)
        return _scalarize(1.0 / (v + r), v)

    def sampler(rng, count):
        return rng.poisson(r, size=count) - r

    def tilted(theta, rng, count):
        return rng.poisson(r * math.exp(float(theta)), size=count) - r

    c2 = max(float(k(1.0)), float(k(-1.0)))
    return CgfModel(
        id=f"poisson:rate={r:g}",
        dimension=1,
        domain=DomainInterval(-math.inf, math.inf),
        mean=0.0,
        cgf=k, cgf_grad=kp, cgf_hess=kpp,
        closed_rate=rate_fn, rate_grad=rate_g, rate_hess=rate_h,
        rate_dom=(-r, math.inf),
        sampler=sampler, tilted_sampler=tilted,
        minorant=(1.0, c2),
    )


def synthetic_boundary() -> CgfModel:
    """Analytic test CGF with a finite gradient at a closed domain endpoint.

    K(u) = u + (2/3)((1-u)^{3/2} - 1) on (-inf, 1]; K'(1) = 1 is finite, so
    the conjugate saturates at the boundary for arguments beyond 1.  No
    sampler: this entry exists to exercise boundary branches exactly.
    """

    def k(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(all="ignore"):
            w = np.where(u <= 1.0, 1.0 - u, 0.0)
            val = u + (2.0 / 3.0) * (w ** 1.5 - 1.0)
        return _scalarize(np.where(u <= 1.0, val, np.inf), u)

    def kp(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(all="ignore"):
            w = np.where(u <= 1.0, 1.0 - u, 0.0)
            val = 1.0 - np.sqrt(w)
        return _scalarize(np.where(u <= 1.0, val, np.inf), u)

    def kpp(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(all="ignore"):
            w = np.where(u < 1.0, 1.0 - u, 0.0)
            val = np.where(u < 1.0, 0.5 / np.sqrt(np.where(w > 0, w, 1.0)), np.inf)
        return _scalarize(np.where(u <= 1.0, val, np.inf), u)

    def rate(v):
        # Interior branch for v <= 1, affine with slope 1 beyond.
        v = np.asarray(v, dtype=float)
        w = 1.0 - np.minimum(v, 1.0)
        below = 2.0 / 3.0 - w + w ** 3 / 3.0
        return _scalarize(np.where(v <= 1.0, below, v - 1.0 / 3.0), v)

    def rate_g(v):
        v = np.asarray(v, dtype=float)
        w = 1.0 - np.minimum(v, 1.0)
        return _scalarize(np.where(v <= 1.0, 1.0 - w * w, 1.0), v)

    def rate_h(v):
        v = np.asarray(v, dtype=float)
        w = 1.0 - np.minimum(v, 1.0)
        return _scalarize(np.where(v <= 1.0, 2.0 * w, 0.0), v)

    c2 = max(float(k(0.5)), float(k(-1.0)), 0.0)  # lines at u = 1/2 and u = -1
    return CgfModel(
        id="synthetic-boundary",
        dimension=1,
        domain=DomainInterval(-math.inf, 1.0, upper_closed=True),
        mean=0.0,
        cgf=k, cgf_grad=kp, cgf_hess=kpp,
        closed_rate=rate, rate_grad=rate_g, rate_hess=rate_h,
        rate_dom=(-math.inf, math.inf),
        sampler=None, tilted_sampler=None,
        minorant=(0.5, c2),
    )


# ----------------------------------------------------------------------
# Registry and string specs
# ----------------------------------------------------------------------

MODEL_FACTORIES = {
    "gaussian": gaussian,
    "cexp": centered_exponential,
    "rademacher": rademacher,
    "poisson": centered_poisson,
    "synthetic-boundary": synthetic_boundary,
}

_MODEL_KEYS = {
    "gaussian": {"mu", "sigma"},
    "poisson": {"rate"},
}


def parse_model(spec: str) -> CgfModel:
    """Build a catalog model from a spec string like ``gaussian:mu=0,sigma=1``."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in MODEL_FACTORIES:
        raise ValueError(f"unknown model {name!r}; known: {sorted(MODEL_FACTORIES)}")
    params = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValueError(f"malformed model parameter {item!r}")
            key = key.strip()
            allowed = _MODEL_KEYS.get(name, set())
            if key not in allowed:
                raise ValueError(f"unknown parameter {key!r} for model {name!r}")
            try:
                params[key] = float(val)
            except ValueError:
                raise ValueError(f"non-numeric value for {key!r}: {val!r}") from None
    if name == "gaussian":
        return gaussian(mu=params.get("mu", 0.0), sigma=params.get("sigma", 1.0))
    if name == "poisson":
        return centered_poisson(rate_param=params.get("rate", 1.0))
    if params:
        raise ValueError(f"model {name!r} takes no parameters")
    return MODEL_FACTORIES[name]()
