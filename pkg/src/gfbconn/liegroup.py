"""Lie group models in a single global coordinate chart.

A group lives entirely in one chart: multiplication, inverse and identity are
plain maps on coordinate vectors, and the two partial-derivative slots of the
multiplication map (with respect to the first and second factor) are either
supplied analytically or produced by the central-difference oracle.  These
partials are the raw material for every connection-coefficient identity in
the rest of the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import (
    Array,
    DomainBox,
    ResidualStats,
    SamplePlan,
    ToleranceConfig,
    ValidationReport,
    fd_jacobian,
    make_check,
    resolve_tolerance,
    sample_points,
)

__all__ = [
    "ChartExit",
    "LieGroupModel",
    "GroupAxiomReport",
    "multiply",
    "invert",
    "d1_multiply",
    "d2_multiply",
    "adjoint",
    "check_group_axioms",
    "additive_group",
    "heisenberg_group",
    "aff1_group",
    "so2_group",
    "group_from_name",
    "builtin_group_names",
]


class ChartExit(RuntimeError):
    """A computation produced a point outside the group's chart box.

    Carries the offending ``point``; integrators additionally attach the
    ``time`` and partial ``trajectory`` at which the chart was left.
    """

    def __init__(self, message: str, point=None, time: float | None = None, trajectory=None):
        super().__init__(message)
        self.point = point
        self.time = time
        self.trajectory = trajectory


@dataclass(frozen=True, eq=False)
class LieGroupModel:
    """A Lie group presented by coordinate formulas on one chart.

    ``multiply``/``invert`` are raw closures; use the module-level operations
    for chart-checked evaluation.  ``chart_box`` is the validity region of the
    chart, ``sample_box`` a smaller region validators draw elements from so
    that products of a few sampled factors stay inside the chart.
    """

    name: str
    dim: int
    identity: Array
    multiply: Callable[[Array, Array], Array]
    invert: Callable[[Array], Array]
    chart_box: DomainBox
    sample_box: DomainBox
    d1_multiply: Callable[[Array, Array], Array] | None = None
    d2_multiply: Callable[[Array, Array], Array] | None = None

    def __post_init__(self) -> None:
        ident = np.asarray(self.identity, dtype=float).reshape(-1)
        if ident.size != self.dim:
            raise ValueError("identity coordinates must have length dim")
        object.__setattr__(self, "identity", ident)
        if self.chart_box.dim != self.dim or self.sample_box.dim != self.dim:
            raise ValueError("chart_box and sample_box must match the group dimension")

    @property
    def has_analytic_partials(self) -> bool:
        return self.d1_multiply is not None and self.d2_multiply is not None


def multiply(group: LieGroupModel, g, h) -> Array:
    """Chart-checked product g*h; raises :class:`ChartExit` if the result leaves the chart."""
    out = np.asarray(group.multiply(np.asarray(g, float), np.asarray(h, float)), dtype=float)
    if not group.chart_box.contains(out):
        raise ChartExit(f"product left the chart of {group.name}", point=out)
    return out


def invert(group: LieGroupModel, g) -> Array:
    out = np.asarray(group.invert(np.asarray(g, float)), dtype=float)
    if not group.chart_box.contains(out):
        raise ChartExit(f"inverse left the chart of {group.name}", point=out)
    return out


def d1_multiply(group: LieGroupModel, g, h, step: float = 1e-5) -> Array:
    """Partial derivative of the product in its first argument, shape (dim, dim)."""
    g = np.asarray(g, float)
    h = np.asarray(h, float)
    if group.d1_multiply is not None:
        return np.asarray(group.d1_multiply(g, h), dtype=float)
    return fd_jacobian(lambda gg: group.multiply(gg, h), g, step)


def d2_multiply(group: LieGroupModel, g, h, step: float = 1e-5) -> Array:
    """Partial derivative of the product in its second argument, shape (dim, dim)."""
    g = np.asarray(g, float)
    h = np.asarray(h, float)
    if group.d2_multiply is not None:
        return np.asarray(group.d2_multiply(g, h), dtype=float)
    return fd_jacobian(lambda hh: group.multiply(g, hh), h, step)


def adjoint(group: LieGroupModel, g, step: float = 1e-5) -> Array:
    """Derivative at the identity of the conjugation map d -> g*d*g^{-1}."""
    g = np.asarray(g, float)
    g_inv = np.asarray(group.invert(g), dtype=float)
    if group.has_analytic_partials:
        # chain rule through d -> (g*d) -> (g*d)*g^{-1}, evaluated at d = e
        return d1_multiply(group, g, g_inv) @ d2_multiply(group, g, group.identity)
    return fd_jacobian(lambda d: group.multiply(group.multiply(g, d), g_inv), group.identity, step)


@dataclass(frozen=True)
class GroupAxiomReport:
    """Residuals of the algebraic laws a :class:`LieGroupModel` must satisfy."""

    group: str
    associativity: ResidualStats
    identity_law: ResidualStats
    inverse_law: ResidualStats
    assoc_derivative_identity: ResidualStats
    partials_vs_fd: ResidualStats
    adjoint_representation: ResidualStats
    tolerance: float
    skipped: int = 0

    def families(self) -> dict[str, ResidualStats]:
        return {
            "associativity": self.associativity,
            "identity_law": self.identity_law,
            "inverse_law": self.inverse_law,
            "assoc_derivative_identity": self.assoc_derivative_identity,
            "partials_vs_fd": self.partials_vs_fd,
            "adjoint_representation": self.adjoint_representation,
        }

    @property
    def passed(self) -> bool:
        return all(s.max_abs <= self.tolerance for s in self.families().values())

    def to_report(self) -> ValidationReport:
        tol = ToleranceConfig(abs_tol=self.tolerance)
        checks = tuple(make_check(name, stats, tol) for name, stats in self.families().items())
        return ValidationReport(f"group-axioms[{self.group}]", checks)


def _max_abs(a: Array) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def check_group_axioms(
    group: LieGroupModel,
    sample_count: int = 200,
    seed: int = 0,
    tol: ToleranceConfig | None = None,
) -> GroupAxiomReport:
    """Sample triples and fold residuals of six law families.

    Beyond the three group axioms this checks two derivative-level identities
    the connection machinery leans on: the chain-rule consequence of
    associativity, d1(e, g*h) = d1(g, h) . d1(e, g), and the fact that the
    adjoint map is multiplicative, Ad(g*h) = Ad(g) . Ad(h).  When analytic
    partials are present they are cross-checked against the finite-difference
    oracle; failures are reported, never thrown.
    """
    tol = resolve_tolerance(tol, analytic=True)
    box = group.sample_box.concat(group.sample_box).concat(group.sample_box)
    pts = sample_points(box, sample_count, seed)
    l = group.dim
    e = group.identity

    assoc = ResidualStats()
    ident = ResidualStats()
    inv = ResidualStats()
    chain = ResidualStats()
    fd_cmp = ResidualStats()
    ad_rep = ResidualStats()
    skipped = 0

    for row in pts:
        g, h, k = row[:l], row[l : 2 * l], row[2 * l :]
        try:
            gh = multiply(group, g, h)
            hk = multiply(group, h, k)
            lhs = multiply(group, gh, k)
            rhs = multiply(group, g, hk)
            g_inv = invert(group, g)
        except ChartExit:
            skipped += 1
            continue

        point = row
        assoc = assoc.add(_max_abs(lhs - rhs), point, ref=_max_abs(rhs))
        ident = ident.add(
            max(_max_abs(multiply(group, e, g) - g), _max_abs(multiply(group, g, e) - g)),
            point,
            ref=_max_abs(g),
        )
        inv = inv.add(
            max(_max_abs(multiply(group, g, g_inv) - e), _max_abs(multiply(group, g_inv, g) - e)),
            point,
            ref=1.0,
        )

        d1_gh = d1_multiply(group, g, h)
        chain_lhs = d1_multiply(group, e, gh)
        chain_rhs = d1_gh @ d1_multiply(group, e, g)
        chain = chain.add(_max_abs(chain_lhs - chain_rhs), point, ref=_max_abs(chain_rhs))

        if group.has_analytic_partials:
            fd1 = fd_jacobian(lambda gg: group.multiply(gg, h), g, tol.fd_step)
            fd2 = fd_jacobian(lambda hh: group.multiply(g, hh), h, tol.fd_step)
            fd_cmp = fd_cmp.add(
                max(_max_abs(d1_gh - fd1), _max_abs(d2_multiply(group, g, h) - fd2)),
                point,
                ref=max(_max_abs(fd1), _max_abs(fd2)),
            )

        ad_lhs = adjoint(group, gh)
        ad_rhs = adjoint(group, g) @ adjoint(group, h)
        ad_rep = ad_rep.add(_max_abs(ad_lhs - ad_rhs), point, ref=_max_abs(ad_rhs))

    return GroupAxiomReport(
        group=group.name,
        associativity=assoc,
        identity_law=ident,
        inverse_law=inv,
        assoc_derivative_identity=chain,
        partials_vs_fd=fd_cmp,
        adjoint_representation=ad_rep,
        tolerance=tol.threshold(1.0),
        skipped=skipped,
    )


# --- built-in groups ----------------------------------------------------------

_WIDE = 1e6  # chart half-width for groups whose chart is genuinely global


def additive_group(dim: int) -> LieGroupModel:
    """The vector group (R^dim, +)."""
    eye = np.eye(dim)
    return LieGroupModel(
        name=f"additive:{dim}",
        dim=dim,
        identity=np.zeros(dim),
        multiply=lambda g, h: g + h,
        invert=lambda g: -g,
        chart_box=DomainBox.cube(-_WIDE, _WIDE, dim),
        sample_box=DomainBox.cube(-1.5, 1.5, dim),
        d1_multiply=lambda g, h: eye,
        d2_multiply=lambda g, h: eye,
    )


def heisenberg_group() -> LieGroupModel:
    """The Heisenberg group H3 in its polynomial chart:
    (x1,y1,z1)*(x2,y2,z2) = (x1+x2, y1+y2, z1+z2+x1*y2)."""

    def mul(g, h):
        return np.array([g[0] + h[0], g[1] + h[1], g[2] + h[2] + g[0] * h[1]])

    def inv(g):
        return np.array([-g[0], -g[1], -g[2] + g[0] * g[1]])

    def d1(g, h):
        return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [h[1], 0.0, 1.0]])

    def d2(g, h):
        return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, g[0], 1.0]])

    return LieGroupModel(
        name="heisenberg",
        dim=3,
        identity=np.zeros(3),
        multiply=mul,
        invert=inv,
        chart_box=DomainBox.cube(-_WIDE, _WIDE, 3),
        sample_box=DomainBox.cube(-1.2, 1.2, 3),
        d1_multiply=d1,
        d2_multiply=d2,
    )


def aff1_group() -> LieGroupModel:
    """Orientation-preserving affine maps of the line, coordinates (a, b) with a > 0:
    (a1,b1)*(a2,b2) = (a1*a2, a1*b2 + b1)."""

    def mul(g, h):
        return np.array([g[0] * h[0], g[0] * h[1] + g[1]])

    def inv(g):
        return np.array([1.0 / g[0], -g[1] / g[0]])

    def d1(g, h):
        return np.array([[h[0], 0.0], [h[1], 1.0]])

    def d2(g, h):
        return np.array([[g[0], 0.0], [0.0, g[0]]])

    return LieGroupModel(
        name="aff1",
        dim=2,
        identity=np.array([1.0, 0.0]),
        multiply=mul,
        invert=inv,
        chart_box=DomainBox(np.array([1e-8, -_WIDE]), np.array([_WIDE, _WIDE])),
        sample_box=DomainBox(np.array([0.5, -1.5]), np.array([2.0, 1.5])),
        d1_multiply=d1,
        d2_multiply=d2,
    )


def so2_group() -> LieGroupModel:
    """Planar rotations in the angle coordinate; the product adds angles."""
    one = np.ones((1, 1))
    return LieGroupModel(
        name="so2",
        dim=1,
        identity=np.zeros(1),
        multiply=lambda g, h: g + h,
        invert=lambda g: -g,
        chart_box=DomainBox.cube(-_WIDE, _WIDE, 1),
        sample_box=DomainBox.cube(-1.0, 1.0, 1),
        d1_multiply=lambda g, h: one,
        d2_multiply=lambda g, h: one,
    )


def builtin_group_names() -> list[str]:
    return ["additive:l", "heisenberg", "aff1", "so2"]


def group_from_name(name: str) -> LieGroupModel:
    """Resolve a registry name like ``"additive:3"``, ``"heisenberg"``, ``"aff1"`` or ``"so2"``."""
    if name.startswith("additive:"):
        dim = int(name.split(":", 1)[1])
        if dim < 1:
            raise ValueError(f"additive group needs dim >= 1, got {dim}")
        return additive_group(dim)
    if name == "heisenberg":
        return heisenberg_group()
    if name == "aff1":
        return aff1_group()
    if name == "so2":
        return so2_group()
    raise KeyError(f"unknown group name {name!r}; known: {builtin_group_names()}")
