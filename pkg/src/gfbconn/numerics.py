"""Shared numerical services.

Everything downstream (group models, coordinate changes, connection fields)
is validated by the same recipe: draw deterministic sample points from a box,
evaluate an identity at each point, and fold the absolute residuals into
summary statistics that are compared against a tolerance.  This module owns
that recipe: central-difference Jacobians, a splitmix64-based sampler, and
the residual/tolerance bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

Array = np.ndarray

DEFAULT_FD_STEP = 1e-5

__all__ = [
    "NumericalFailure",
    "DomainBox",
    "ToleranceConfig",
    "ResidualStats",
    "ConditionCheck",
    "ValidationReport",
    "SamplePlan",
    "as_plan",
    "fd_jacobian",
    "sample_points",
    "accumulate_residual",
    "merge_stats",
    "map_box",
]


class NumericalFailure(RuntimeError):
    """A numeric evaluation produced a non-finite value."""


def _as_float_vector(value, name: str = "value") -> Array:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class DomainBox:
    """Axis-aligned box of coordinates; the sampling region for validators."""

    lower: Array
    upper: Array

    def __post_init__(self) -> None:
        lo = _as_float_vector(self.lower, "lower")
        hi = _as_float_vector(self.upper, "upper")
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same length")
        if lo.size < 1:
            raise ValueError("box dimension must be >= 1")
        if not np.all(lo < hi):
            raise ValueError("need lower[i] < upper[i] for every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> Array:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> Array:
        return self.upper - self.lower

    def contains(self, point, margin: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p > self.lower + margin) and np.all(p < self.upper - margin))

    def concat(self, other: "DomainBox | None") -> "DomainBox":
        """Product box over the concatenated coordinates."""
        if other is None:
            return self
        return DomainBox(
            np.concatenate([self.lower, other.lower]),
            np.concatenate([self.upper, other.upper]),
        )

    def split(self, *widths: int) -> tuple["DomainBox", ...]:
        """Slice the box into consecutive factors of the given widths."""
        if sum(widths) != self.dim:
            raise ValueError(f"widths {widths} do not sum to dimension {self.dim}")
        out = []
        offset = 0
        for w in widths:
            out.append(DomainBox(self.lower[offset : offset + w], self.upper[offset : offset + w]))
            offset += w
        return tuple(out)

    @staticmethod
    def cube(lo: float, hi: float, dim: int) -> "DomainBox":
        return DomainBox(np.full(dim, float(lo)), np.full(dim, float(hi)))


@dataclass(frozen=True)
class ToleranceConfig:
    """Tolerance policy: a residual passes when it is at most
    ``max(abs_tol, rel_tol * |reference|)``."""

    abs_tol: float = 1e-6
    rel_tol: float = 1e-9
    fd_step: float = DEFAULT_FD_STEP

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.fd_step > 0):
            raise ValueError("tolerances and fd_step must be strictly positive")
        if self.abs_tol > 1.0:
            raise ValueError("abs_tol must be <= 1")
        if self.fd_step > 1e-2:
            raise ValueError("fd_step must be <= 1e-2")

    @staticmethod
    def analytic() -> "ToleranceConfig":
        """Default for comparing analytically evaluated quantities."""
        return ToleranceConfig(abs_tol=1e-6)

    @staticmethod
    def with_fd() -> "ToleranceConfig":
        """Looser default when a finite-difference oracle enters the comparison."""
        return ToleranceConfig(abs_tol=1e-4)

    def threshold(self, ref_scale: float = 0.0) -> float:
        return max(self.abs_tol, self.rel_tol * abs(ref_scale))


def resolve_tolerance(tol: "ToleranceConfig | None", analytic: bool) -> "ToleranceConfig":
    if tol is not None:
        return tol
    return ToleranceConfig.analytic() if analytic else ToleranceConfig.with_fd()


@dataclass(frozen=True)
class ResidualStats:
    """Fold of absolute residuals over sampled points.

    ``ref_scale`` tracks the largest magnitude of the reference quantity seen,
    which feeds the relative part of the tolerance policy.  The mean is derived
    from ``sum_abs`` so that merging two folds stays associative.
    """

    count: int = 0
    max_abs: float = 0.0
    sum_abs: float = 0.0
    worst_point: tuple[float, ...] | None = None
    ref_scale: float = 0.0

    @property
    def mean_abs(self) -> float:
        return self.sum_abs / self.count if self.count else 0.0

    def add(self, value: float, point=None, ref: float = 0.0) -> "ResidualStats":
        v = float(value)
        if not np.isfinite(v):
            raise NumericalFailure(f"non-finite residual {value!r} at point {point!r}")
        v = abs(v)
        pt = None if point is None else tuple(float(c) for c in np.ravel(point))
        if v >= self.max_abs and (v > self.max_abs or self.worst_point is None):
            worst = pt
            max_abs = v
        else:
            worst = self.worst_point
            max_abs = self.max_abs
        return ResidualStats(
            count=self.count + 1,
            max_abs=max_abs,
            sum_abs=self.sum_abs + v,
            worst_point=worst,
            ref_scale=max(self.ref_scale, abs(float(ref))),
        )

    def merge(self, other: "ResidualStats") -> "ResidualStats":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        if other.max_abs > self.max_abs:
            max_abs, worst = other.max_abs, other.worst_point
        else:
            max_abs, worst = self.max_abs, self.worst_point
        return ResidualStats(
            count=self.count + other.count,
            max_abs=max_abs,
            sum_abs=self.sum_abs + other.sum_abs,
            worst_point=worst,
            ref_scale=max(self.ref_scale, other.ref_scale),
        )

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "max_abs": self.max_abs,
            "mean_abs": self.mean_abs,
            "worst_point": list(self.worst_point) if self.worst_point is not None else None,
        }


def accumulate_residual(stats: ResidualStats, value: float, point=None, ref: float = 0.0) -> ResidualStats:
    """Fold one residual into the statistics; see :meth:`ResidualStats.add`."""
    return stats.add(value, point, ref)


def merge_stats(a: ResidualStats, b: ResidualStats) -> ResidualStats:
    """Associative merge of two residual folds (parallel-fold contract)."""
    return a.merge(b)


@dataclass(frozen=True)
class ConditionCheck:
    """Outcome of a single named condition within a validation report."""

    name: str
    stats: ResidualStats
    tolerance: float
    passed: bool
    skipped: int = 0

    def to_dict(self) -> dict:
        d = {"name": self.name, "tolerance": self.tolerance, "passed": self.passed, "skipped": self.skipped}
        d.update(self.stats.to_dict())
        return d


def make_check(name: str, stats: ResidualStats, tol: ToleranceConfig, skipped: int = 0) -> ConditionCheck:
    threshold = tol.threshold(stats.ref_scale)
    return ConditionCheck(name=name, stats=stats, tolerance=threshold, passed=stats.max_abs <= threshold, skipped=skipped)


@dataclass(frozen=True)
class ValidationReport:
    """Per-condition residual statistics with pass/fail against tolerances."""

    name: str
    checks: tuple[ConditionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_abs(self) -> float:
        return max((c.stats.max_abs for c in self.checks), default=0.0)

    def check(self, name: str) -> ConditionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(f"no condition named {name!r} in report {self.name!r}")

    def merged_with(self, other: "ValidationReport", name: str | None = None) -> "ValidationReport":
        return ValidationReport(name or self.name, self.checks + other.checks)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "conditions": [c.to_dict() for c in self.checks],
        }


@dataclass(frozen=True)
class SamplePlan:
    """How many points to draw and from which PRNG stream."""

    count: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be >= 1")


def as_plan(samples: "SamplePlan | int") -> SamplePlan:
    if isinstance(samples, SamplePlan):
        return samples
    return SamplePlan(int(samples))


# --- finite differences -----------------------------------------------------

def fd_jacobian(f: Callable[[Array], Array], point, step: float = DEFAULT_FD_STEP) -> Array:
    """Central-difference Jacobian of ``f`` at ``point``.

    Entry ``(i, j)`` is ``(f_i(p + step*e_j) - f_i(p - step*e_j)) / (2*step)``.
    Raises :class:`NumericalFailure` naming the offending coordinate if the
    probe evaluations are not finite.
    """
    p = _as_float_vector(point, "point")
    cols = []
    for j in range(p.size):
        probe = np.zeros_like(p)
        probe[j] = step
        f_plus = np.asarray(f(p + probe), dtype=float).ravel()
        f_minus = np.asarray(f(p - probe), dtype=float).ravel()
        if not (np.all(np.isfinite(f_plus)) and np.all(np.isfinite(f_minus))):
            raise NumericalFailure(f"non-finite value probing coordinate {j} at step {step} around {p.tolist()}")
        cols.append((f_plus - f_minus) / (2.0 * step))
    return np.stack(cols, axis=1)


# --- deterministic sampling ---------------------------------------------------

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def _splitmix64_next(state: int) -> tuple[int, int]:
    state = (state + _SPLITMIX_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def sample_points(box: DomainBox, count: int, seed: int) -> Array:
    """Deterministic uniform samples, strictly inside ``box``, shape (count, dim).

    Uses a splitmix64 stream so the output is reproducible bit-for-bit for a
    fixed (box, count, seed) triple, independent of platform.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    state = int(seed) & _MASK64
    dim = box.dim
    out = np.empty((count, dim), dtype=float)
    lo, width = box.lower, box.width
    for i in range(count):
        for j in range(dim):
            state, z = _splitmix64_next(state)
            # (z >> 11) is uniform on [0, 2^53); the +0.5 keeps u in (0, 1).
            u = ((z >> 11) + 0.5) * 2.0**-53
            out[i, j] = lo[j] + u * width[j]
    return out


def map_box(fn: Callable[[Array], Array], box: DomainBox, probes: int = 128, margin: float = 0.05, seed: int = 90210) -> DomainBox:
    """Conservative image box of ``box`` under ``fn``.

    Probes deterministic samples, takes the componentwise bounding box of the
    images and shrinks it inward by ``margin`` of the span, so that points
    sampled from the result stay comfortably inside the true image.
    """
    pts = sample_points(box, probes, seed)
    images = np.asarray([np.ravel(fn(p)) for p in pts], dtype=float)
    if not np.all(np.isfinite(images)):
        raise NumericalFailure("non-finite value while probing mapped box")
    lo = images.min(axis=0)
    hi = images.max(axis=0)
    span = hi - lo
    # Degenerate coordinates (constant image) get a hair of width instead.
    lo_out = np.where(span > 0, lo + margin * span, lo - 1e-9)
    hi_out = np.where(span > 0, hi - margin * span, hi + 1e-9)
    return DomainBox(lo_out, hi_out)
