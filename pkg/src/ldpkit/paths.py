"""Cadlag paths of bounded variation with piecewise-constant slopes and jumps.

A path starts from h(0-) = 0, moves with a constant slope on each grid
interval, and jumps at finitely many times (a jump at 0 encodes h(0) != 0,
a jump at 1 is allowed).  Construction canonicalises: adjacent intervals
with equal slopes merge, same-time jumps add up, zero jumps vanish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .cgf import CgfModel
from .kernels import Kernel


def _vec(x, dimension):
    if dimension == 1:
        return float(x) if np.ndim(x) == 0 else float(np.asarray(x).reshape(()))
    arr = tuple(float(c) for c in np.asarray(x).reshape(-1))
    if len(arr) != dimension:
        raise ValueError("component count does not match dimension")
    return arr


def _norm(x) -> float:
    if np.ndim(x) == 0:
        return abs(float(x))
    return float(np.linalg.norm(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class SphericalMeasure:
    """Finite measure on unit directions, as (direction, mass) atoms."""

    dimension: int
    atoms: tuple

    def __post_init__(self):
        cleaned = []
        for direction, mass in self.atoms:
            mass = float(mass)
            if mass <= 0:
                raise ValueError("atom masses must be positive")
            d = _vec(direction, self.dimension)
            if abs(_norm(d) - 1.0) > 1e-12:
                raise ValueError("directions must be unit vectors")
            cleaned.append((d, mass))
        object.__setattr__(self, "atoms", tuple(cleaned))

    def total(self) -> float:
        return sum(m for _, m in self.atoms)


@dataclass(frozen=True)
class CadlagPath:
    dimension: int
    grid: tuple
    slopes: tuple
    jumps: tuple = ()

    def __post_init__(self):
        d = self.dimension
        if d < 1:
            raise ValueError("dimension must be >= 1")
        grid = tuple(float(t) for t in self.grid)
        if len(grid) < 2 or grid[0] != 0.0 or grid[-1] != 1.0:
            raise ValueError("grid must run from 0 to 1")
        if any(a >= b for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must increase strictly")
        slopes = tuple(_vec(s, d) for s in self.slopes)
        if len(slopes) != len(grid) - 1:
            raise ValueError("need one slope per grid interval")

        # Merge adjacent intervals carrying identical slopes.
        merged_grid = [grid[0]]
        merged_slopes = []
        for i, s in enumerate(slopes):
            if merged_slopes and merged_slopes[-1] == s:
                merged_grid[-1] = grid[i + 1]
            else:
                merged_slopes.append(s)
                merged_grid.append(grid[i + 1])

        # Combine jumps at equal times, drop zero jumps, sort by time.
        acc = {}
        for t, delta in self.jumps:
            t = float(t)
            if not 0.0 <= t <= 1.0:
                raise ValueError("jump times must lie in [0, 1]")
            v = np.atleast_1d(np.asarray(delta, dtype=float))
            if v.size != d:
                raise ValueError("jump component count does not match dimension")
            acc[t] = acc.get(t, np.zeros(d)) + v
        jumps = tuple((t, _vec(v, d)) for t, v in sorted(acc.items())
                      if float(np.max(np.abs(v))) != 0.0)

        object.__setattr__(self, "grid", tuple(merged_grid))
        object.__setattr__(self, "slopes", tuple(merged_slopes))
        object.__setattr__(self, "jumps", jumps)

    # -- cached numeric views -------------------------------------------

    @cached_property
    def _grid(self) -> np.ndarray:
        return np.asarray(self.grid)

    @cached_property
    def _slopes(self) -> np.ndarray:
        arr = np.asarray(self.slopes, dtype=float)
        return arr.reshape(len(self.slopes), self.dimension)

    @cached_property
    def _jump_times(self) -> np.ndarray:
        return np.asarray([t for t, _ in self.jumps])

    @cached_property
    def _jump_vals(self) -> np.ndarray:
        if not self.jumps:
            return np.zeros((0, self.dimension))
        return np.asarray([v for _, v in self.jumps], dtype=float).reshape(
            len(self.jumps), self.dimension)

    @cached_property
    def _ac_nodes(self) -> np.ndarray:
        """Absolutely continuous part evaluated at the grid nodes."""
        inc = self._slopes * np.diff(self._grid)[:, None]
        return np.concatenate([np.zeros((1, self.dimension)), np.cumsum(inc, axis=0)])

    # -- evaluation -------------------------------------------------------

    def _ac_at(self, ts: np.ndarray) -> np.ndarray:
        idx = np.clip(np.searchsorted(self._grid, ts, side="right") - 1,
                      0, len(self.slopes) - 1)
        base = self._ac_nodes[idx]
        return base + self._slopes[idx] * (ts - self._grid[idx])[:, None]

    def values(self, ts, side: str = "right") -> np.ndarray:
        """Path values at times ts; side='left' gives left limits (h(0-) = 0)."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = self._ac_at(ts)
        if self.jumps:
            cmp = "right" if side == "right" else "left"
            counts = np.searchsorted(self._jump_times, ts, side=cmp)
            cum = np.concatenate([np.zeros((1, self.dimension)),
                                  np.cumsum(self._jump_vals, axis=0)])
            out = out + cum[counts]
        return out

    def value(self, t: float, side: str = "right"):
        v = self.values([t], side=side)[0]
        return float(v[0]) if self.dimension == 1 else v

    # -- functionals --------------------------------------------------------

    def var(self) -> float:
        """Total variation, counting h(0) as a jump from h(0-) = 0."""
        dt = np.diff(self._grid)
        ac = float(np.sum(np.linalg.norm(self._slopes, axis=1) * dt))
        return ac + float(np.sum(np.linalg.norm(self._jump_vals, axis=1)))

    def sup_norm(self) -> float:
        """Max of |h(t)| over [0, 1] (exact: linear between events)."""
        best = 0.0
        for t in self._event_times():
            for side in ("left", "right"):
                if t == 0.0 and side == "left":
                    continue
                best = max(best, _norm(self.value(t, side=side)))
        return best

    def _event_times(self):
        return sorted(set(self.grid) | {t for t, _ in self.jumps})

    def lebesgue_split(self):
        """(absolutely continuous part, pure-jump part)."""
        ac = CadlagPath(self.dimension, self.grid, self.slopes, ())
        zero = (0.0,) if self.dimension == 1 else ((0.0,) * self.dimension,)
        sj = CadlagPath(self.dimension, (0.0, 1.0), zero, self.jumps)
        return ac, sj

    def directional(self) -> SphericalMeasure:
        """Image of the singular part: mass |jump| at direction jump/|jump|."""
        acc = {}
        for _, v in self.jumps:
            m = _norm(v)
            if self.dimension == 1:
                d = 1.0 if v > 0 else -1.0
            else:
                d = tuple(c / m for c in v)
            acc[d] = acc.get(d, 0.0) + m
        return SphericalMeasure(self.dimension, tuple(acc.items()))

    def i_d(self, model: CgfModel) -> float:
        """Action of the path: rate of the slopes plus priced jump masses."""
        if model.dimension != self.dimension:
            raise ValueError("model dimension does not match path")
        dt = np.diff(self._grid)
        if self.dimension == 1:
            rates = np.asarray(model.rate(self._slopes[:, 0]), dtype=float)
        else:
            rates = np.asarray(model.rate(self._slopes), dtype=float)
        total = 0.0
        for r, w in zip(np.atleast_1d(rates), dt):
            if not math.isfinite(r):
                return math.inf
            total += float(r) * float(w)
        for direction, mass in self.directional().atoms:
            price = model.recession(direction)
            if not math.isfinite(price):
                return math.inf
            total += price * mass
        return total

    def pair(self, kernel: Kernel) -> object:
        """Pairing integral of f d h: exact on pieces plus f at jump times."""
        ints = np.asarray([kernel.integral(a, b)
                           for a, b in zip(self.grid, self.grid[1:])])
        out = np.zeros(self.dimension)
        out += np.sum(self._slopes * ints[:, None], axis=0)
        if self.jumps:
            f_at = np.asarray(kernel.eval(self._jump_times), dtype=float)
            out = out + np.sum(f_at[:, None] * self._jump_vals, axis=0)
        return float(out[0]) if self.dimension == 1 else out

    def sup_functional(self, direction) -> float:
        """sup over t of <h(t), l>, scanning event left/right values."""
        l = np.atleast_1d(np.asarray(direction, dtype=float))
        best = -math.inf
        for t in self._event_times():
            for side in ("left", "right"):
                if t == 0.0 and side == "left":
                    continue  # h(0-) is a convention, not an attained value
                v = self.values([t], side=side)[0]
                best = max(best, float(v @ l))
        return best

    def shift(self, other: "CadlagPath", sign: float = 1.0) -> "CadlagPath":
        """self + sign * other on the merged grid."""
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch")
        grid = sorted(set(self.grid) | set(other.grid))
        mids = [(a + b) / 2.0 for a, b in zip(grid, grid[1:])]

        def slope_at(path, t):
            i = int(np.searchsorted(path._grid, t, side="right") - 1)
            i = min(max(i, 0), len(path.slopes) - 1)
            return path._slopes[i]

        slopes = [tuple(slope_at(self, m) + sign * slope_at(other, m)) for m in mids]
        if self.dimension == 1:
            slopes = [s[0] for s in slopes]
        jumps = list(self.jumps) + [(t, tuple(sign * c for c in np.atleast_1d(v)))
                                    for t, v in other.jumps]
        if self.dimension == 1:
            jumps = [(t, v if np.ndim(v) == 0 else v[0]) for t, v in jumps]
        return CadlagPath(self.dimension, tuple(grid), tuple(slopes), tuple(jumps))

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        lines = ["grid: " + " ".join(repr(t) for t in self.grid)]
        for i, s in enumerate(self.slopes):
            comps = (s,) if self.dimension == 1 else s
            lines.append(f"slope {i}: " + " ".join(repr(c) for c in comps))
        for t, v in self.jumps:
            comps = (v,) if self.dimension == 1 else v
            lines.append(f"jump {t!r}: " + " ".join(repr(c) for c in comps))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "CadlagPath":
        grid = None
        slopes = {}
        jumps = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            head, _, rest = line.partition(":")
            parts = rest.split()
            if head == "grid":
                grid = tuple(float(p) for p in parts)
            elif head.startswith("slope"):
                idx = int(head.split()[1])
                slopes[idx] = tuple(float(p) for p in parts)
            elif head.startswith("jump"):
                t = float(head.split()[1])
                jumps.append((t, tuple(float(p) for p in parts)))
            else:
                raise ValueError(f"unrecognised path line {line!r}")
        if grid is None or not slopes:
            raise ValueError("path text needs a grid line and slope lines")
        dim = len(slopes[0])
        ordered = []
        for i in range(len(slopes)):
            if i not in slopes:
                raise ValueError("slope indices must be contiguous")
            ordered.append(slopes[i] if dim > 1 else slopes[i][0])
        if dim == 1:
            jumps = [(t, v[0]) for t, v in jumps]
        return CadlagPath(dim, grid, tuple(ordered), tuple(jumps))

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "slopes": [list(s) if self.dimension > 1 else s for s in self.slopes],
            "jumps": [[t, list(v) if self.dimension > 1 else v] for t, v in self.jumps],
        }

    @staticmethod
    def from_dict(data: dict) -> "CadlagPath":
        slopes = data["slopes"]
        dim = len(slopes[0]) if slopes and isinstance(slopes[0], (list, tuple)) else 1
        jumps = tuple((t, tuple(v) if isinstance(v, (list, tuple)) else v)
                      for t, v in data.get("jumps", []))
        return CadlagPath(dim, tuple(data["grid"]),
                          tuple(tuple(s) if dim > 1 else s for s in slopes), jumps)


# ----------------------------------------------------------------------
# Module-level operations (thin wrappers; the methods do the work)
# ----------------------------------------------------------------------

def var(path: CadlagPath) -> float:
    return path.var()


def lebesgue_split(path: CadlagPath):
    return path.lebesgue_split()


def directional(path: CadlagPath) -> SphericalMeasure:
    return path.directional()


def i_d(path: CadlagPath, model: CgfModel) -> float:
    return path.i_d(model)


def pair(kernel: Kernel, path: CadlagPath):
    return path.pair(kernel)


def sup_functional(path: CadlagPath, direction) -> float:
    return path.sup_functional(direction)


def random_path(dimension: int, max_pieces: int, max_jumps: int, seed: int,
                max_var: float = 8.0) -> CadlagPath:
    """Reproducible random path with total variation capped at max_var."""
    rng = np.random.default_rng(seed)
    npieces = int(rng.integers(1, max_pieces + 1))
    interior = np.sort(rng.uniform(0.05, 0.95, size=npieces - 1))
    interior = interior[np.diff(np.concatenate([[0.0], interior])) > 1e-6]
    grid = (0.0, *interior.tolist(), 1.0)
    m = len(grid) - 1
    slopes = rng.normal(0.0, 2.0, size=(m, dimension))

    njumps = int(rng.integers(0, max_jumps + 1))
    times = rng.uniform(0.0, 1.0, size=njumps)
    if njumps and rng.random() < 0.15:
        times[0] = 0.0      # exercise the jump-at-zero convention
    if njumps > 1 and rng.random() < 0.15:
        times[-1] = 1.0     # terminal jumps are allowed
    vals = rng.normal(0.0, 1.5, size=(njumps, dimension))

    def build(slopes, vals):
        s = [tuple(row) if dimension > 1 else row[0] for row in slopes]
        j = [(t, tuple(row) if dimension > 1 else row[0])
             for t, row in zip(times, vals)]
        return CadlagPath(dimension, grid, tuple(s), tuple(j))

    path = build(slopes, vals)
    v = path.var()
    if v > max_var:
        scale = max_var / v
        path = build(slopes * scale, vals * scale)
    return path


# ----------------------------------------------------------------------
# Partition-based evaluation (supremum-form consistency checks)
# ----------------------------------------------------------------------

def variation_on_partition(path: CadlagPath, points) -> float:
    """Variation of the polygonal interpolant through (t, h(t)), h^t(0) = 0."""
    ts = np.asarray(sorted({float(t) for t in points} | {1.0}))
    ts = ts[(ts > 0.0) & (ts <= 1.0)]
    vals = path.values(ts)
    prev = np.zeros(path.dimension)
    total = 0.0
    for v in vals:
        total += _norm(v - prev)
        prev = v
    return total


def action_on_partition(path: CadlagPath, model: CgfModel, points) -> float:
    """Rate-integral of the polygonal interpolant (h^t(0) = 0 convention)."""
    ts = np.asarray(sorted({float(t) for t in points} | {1.0}))
    ts = ts[(ts > 0.0) & (ts <= 1.0)]
    vals = path.values(ts)
    full_t = np.concatenate([[0.0], ts])
    full_v = np.concatenate([np.zeros((1, path.dimension)), vals])
    dt = np.diff(full_t)
    slopes = np.diff(full_v, axis=0) / dt[:, None]
    if path.dimension == 1:
        rates = np.atleast_1d(np.asarray(model.rate(slopes[:, 0]), dtype=float))
    else:
        rates = np.atleast_1d(np.asarray(model.rate(slopes), dtype=float))
    if not np.all(np.isfinite(rates)):
        return math.inf
    return float(np.sum(rates * dt))


def refinement_partition(path: CadlagPath, level: int) -> list:
    """Nested partitions: dyadic points, events, and left approaches to jumps."""
    pts = {i / 2.0 ** level for i in range(1, 2 ** level + 1)}
    pts |= set(path.grid[1:])
    events = sorted(path._event_times())
    for t, _ in path.jumps:
        if t == 0.0:
            continue
        i = events.index(t)
        gap = t - (events[i - 1] if i > 0 else 0.0)
        base = min(t, max(gap, 1e-3))
        for j in range(1, level + 1):
            pts.add(t - base * 8.0 ** (-j))
        pts.add(t)
    return sorted(p for p in pts if 0.0 < p <= 1.0)
