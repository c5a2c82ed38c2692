"""Homogeneous Banach bundles over an interval, sampled on a grid, and their
fiberwise Hilbert renorming by Löwner ellipsoids."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convex import SymmetricBody, hausdorff_distance, sample_directions
from .ellipsoid import bm_bound, john_certificate, loewner
from .errors import UnitarizeError, ValidationError

FAMILY_KINDS = ("explicit", "lp", "interp")
LP_VERTICES = {2: 64, 3: 256}


class DiscretizedBundle:
    """One symmetric body per grid point, all in a single global chart."""

    def __init__(self, grid, fibers, family: "FamilySpec | None" = None):
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or len(grid) == 0:
            raise ValidationError("grid must be a non-empty 1-d array")
        if np.any(np.diff(grid) <= 0):
            raise ValidationError("grid must be strictly increasing")
        fibers = [f if isinstance(f, SymmetricBody) else SymmetricBody(f) for f in fibers]
        if len(fibers) != len(grid):
            raise ValidationError(f"{len(grid)} grid points but {len(fibers)} fibers")
        dims = {f.dim for f in fibers}
        if len(dims) != 1:
            raise ValidationError(f"fibers of different dimensions {sorted(dims)}")
        self.grid = grid
        self.fibers = fibers
        self.family = family

    @property
    def dim(self) -> int:
        return self.fibers[0].dim

    @property
    def spacing(self) -> float:
        return float(np.max(np.diff(self.grid))) if len(self.grid) > 1 else 0.0

    def transformed(self, L) -> "DiscretizedBundle":
        """Same bundle seen through the chart change ``L``."""
        return DiscretizedBundle(self.grid, [f.transformed(L) for f in self.fibers])


def lp_ball_vertices(p: float, dim: int, count: int | None = None, seed: int = 0) -> np.ndarray:
    """Boundary points of the unit ball of the p-norm, along sampled rays.

    The plane uses ``count`` equally spaced angles in [0, pi); higher
    dimensions a seeded sphere sample together with the coordinate axes.
    """
    if not p >= 1:
        raise ValidationError(f"exponent {p} is below 1")
    if count is None:
        count = LP_VERTICES.get(dim, 256)
    if dim == 2:
        t = np.pi * np.arange(count) / count
        D = np.column_stack([np.cos(t), np.sin(t)])
    else:
        D = np.vstack([np.eye(dim), sample_directions(dim, count, seed)[: count - dim]])
    return D / np.linalg.norm(D, ord=p, axis=1, keepdims=True)


@dataclass
class FamilySpec:
    """Refinable generator of discretized bundles over ``interval``.

    kinds:
      ``explicit`` -- ``grid`` and ``fibers`` given directly (not refinable);
      ``lp`` -- p-norm balls with ``p(x)`` piecewise linear through ``p_knots``;
      ``interp`` -- vertex lists ``start`` and ``end`` mixed linearly in x.
    """

    kind: str
    interval: tuple = (0.0, 1.0)
    dim: int = 2
    points: int = 11
    p_knots: list = field(default_factory=list)  # [(x, p), ...]
    vertices: int | None = None
    start: list | None = None
    end: list | None = None
    grid: list | None = None
    fibers: list | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValidationError(f"unknown family kind {self.kind!r}")
        a, b = self.interval
        if not a < b:
            raise ValidationError("interval must satisfy a < b")
        if self.kind == "lp":
            if not self.p_knots:
                raise ValidationError("lp family needs p_knots")
            xs = [x for x, _ in self.p_knots]
            if any(q <= r for r, q in zip(xs, xs[1:])):
                raise ValidationError("p_knots must be strictly increasing in x")
            if any(not (p >= 1 and math.isfinite(p)) for _, p in self.p_knots):
                raise ValidationError("exponents must lie in [1, inf)")
        elif self.kind == "interp":
            if self.start is None or self.end is None:
                raise ValidationError("interp family needs start and end vertex lists")
            if np.shape(self.start) != np.shape(self.end):
                raise ValidationError("start and end vertex lists must have the same shape")
            SymmetricBody(self.start)
            SymmetricBody(self.end)
            self.dim = np.shape(self.start)[1]
        else:
            if self.grid is None or self.fibers is None:
                raise ValidationError("explicit family needs grid and fibers")
            self.points = len(self.grid)
        if self.points < 2 and self.kind != "explicit":
            raise ValidationError("a family needs at least 2 grid points")

    @property
    def refinable(self) -> bool:
        return self.kind != "explicit"

    def exponent(self, x) -> float:
        xs, ps = zip(*self.p_knots)
        return float(np.interp(x, xs, ps))

    def fiber(self, x) -> SymmetricBody:
        a, b = self.interval
        if self.kind == "lp":
            return SymmetricBody(lp_ball_vertices(self.exponent(x), self.dim, self.vertices, self.seed))
        if self.kind == "interp":
            t = (x - a) / (b - a)
            return SymmetricBody((1 - t) * np.asarray(self.start, float) + t * np.asarray(self.end, float))
        raise ValidationError("explicit families have no fiber map")

    def bundle(self, points: int | None = None) -> DiscretizedBundle:
        if self.kind == "explicit":
            if points not in (None, self.points):
                raise ValidationError("explicit bundles cannot be resampled")
            return DiscretizedBundle(self.grid, self.fibers, self)
        grid = np.linspace(*self.interval, points or self.points)
        return DiscretizedBundle(grid, [self.fiber(x) for x in grid], self)


@dataclass
class HilbertRenorming:
    results: list  # LoewnerResult per grid point
    certificates: list
    eps: float

    @property
    def ellipsoids(self):
        return [r.ellipsoid for r in self.results]


def _at_fiber(k, x, exc):
    return type(exc)(f"fiber {k} (x = {x:g}): {exc}")


def renorm(bundle: DiscretizedBundle, eps: float = 1e-8) -> HilbertRenorming:
    """Replace every fiber norm by the Hilbert norm of its Löwner ellipsoid."""
    results, certs = [], []
    for k, (x, body) in enumerate(zip(bundle.grid, bundle.fibers)):
        try:
            r = loewner(body, eps)
            certs.append(john_certificate(r))
        except UnitarizeError as exc:
            raise _at_fiber(k, x, exc) from exc
        results.append(r)
    return HilbertRenorming(results, certs, eps)


def bm_profile(bundle: DiscretizedBundle, renorming: HilbertRenorming,
               sample: int | None = None, seed: int = 0) -> list:
    """Per-fiber :class:`BmBound` of the identity renorming."""
    out = []
    for k, (x, body, r) in enumerate(zip(bundle.grid, bundle.fibers, renorming.results)):
        try:
            out.append(bm_bound(body, r, sample, seed))
        except UnitarizeError as exc:
            raise _at_fiber(k, x, exc) from exc
    return out


def bounded_bm_distance(bundle: DiscretizedBundle, renorming: HilbertRenorming,
                        sample: int | None = None, seed: int = 0, profile=None) -> float:
    """Upper bound on the bounded Banach-Mazur distance to the renormed
    Hilbert bundle: the largest fiberwise ``log ||id|| ||id^{-1}||``.

    This is the value realized by the identity map, not an infimum over
    all renormings.
    """
    if profile is None:
        profile = bm_profile(bundle, renorming, sample, seed)
    return max(b.product_log for b in profile)


def vertex_sensitivity(family: FamilySpec, eps: float = 1e-8) -> list:
    """Hausdorff distance between Löwner ellipsoids of an lp family sampled
    with its vertex count and with twice as many vertices, per grid point."""
    if family.kind != "lp":
        raise ValidationError("vertex sensitivity applies to lp families only")
    base = family.vertices or LP_VERTICES.get(family.dim, 256)
    finer = FamilySpec(**{**family.__dict__, "vertices": 2 * base})
    coarse_b, fine_b = family.bundle(), finer.bundle()
    return [hausdorff_distance(loewner(c, eps).ellipsoid, loewner(f, eps).ellipsoid)
            for c, f in zip(coarse_b.fibers, fine_b.fibers)]


@dataclass(frozen=True)
class ContinuityRow:
    spacing: float
    body_distance: float
    ellipsoid_distance: float


def _adjacent_max(items):
    return max((hausdorff_distance(p, q) for p, q in zip(items, items[1:])), default=0.0)


def continuity_report(source, levels: int = 3, eps: float = 1e-8) -> list:
    """Max adjacent-fiber Hausdorff distances of bodies and of their Löwner
    ellipsoids, at the family's grid and after each of ``levels`` halvings.

    ``source`` is a :class:`FamilySpec` or a :class:`DiscretizedBundle`;
    bundles without a refinable family only support ``levels = 0``.
    """
    if isinstance(source, DiscretizedBundle):
        family, first = source.family, source
    else:
        family, first = source, None
    if levels < 0:
        raise ValueError("levels must be nonnegative")
    if levels > 0 and (family is None or not family.refinable):
        raise ValidationError("explicit bundles support only a single-level report")
    rows = []
    points = len(first.grid) if first is not None else family.points
    for level in range(levels + 1):
        b = first if level == 0 and first is not None else family.bundle(points)
        ells = renorm(b, eps).ellipsoids
        rows.append(ContinuityRow(b.spacing, _adjacent_max(b.fibers), _adjacent_max(ells)))
        points = 2 * (points - 1) + 1
    return rows
