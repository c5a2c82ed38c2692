"""Finite-index expectations for stratified subhomogeneous C*-bundles over an
interval.

The base ``[a, b]`` is cut by finitely many exceptional points into
generic open intervals with a constant multi-matrix fiber. Each
exceptional point carries a smaller fiber and, for every adjacent generic
interval, the Bratteli matrix (germ) of its embedding into that interval's
fiber. An expectation onto ``C([a, b])`` is a continuous field of faithful
states ``x -> phi_x``, and its index is ``sup_x K(phi_x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisError, ValidationError
from .multimatrix import (BratteliMatrix, MultiMatrixAlgebra, State, blend,
                          column_sums, element_norm, extend_state, k_constant,
                          optimal_restriction_by_columns, optimal_state,
                          random_positive, rank, restricted_optimal_weights)

SIDES = ("left", "right")


@dataclass(frozen=True)
class GenericInterval:
    span: tuple  # (l, r), open interval
    algebra: MultiMatrixAlgebra

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.span[0] + self.span[1])

    @property
    def length(self) -> float:
        return self.span[1] - self.span[0]


@dataclass(frozen=True)
class ExceptionalPoint:
    point: float
    algebra: MultiMatrixAlgebra
    germs: dict  # side -> BratteliMatrix into the adjacent generic fiber


class NotOptimalError(Exception):
    """Optimal mode requested on a bundle without an optimal expectation."""

    def __init__(self, witness):
        self.witness = witness
        super().__init__(f"no optimal expectation: {witness.describe()}")


class StratifiedBundle:
    """Interval base with generic fibers on open intervals and smaller
    fibers at exceptional points.

    Exceptional points whose germs are all permutation matrices are not
    exceptional at all; they are removed and their intervals merged.
    """

    def __init__(self, interval, generic, exceptional=()):
        a, b = (float(t) for t in interval)
        if not a < b:
            raise ValidationError("interval must satisfy a < b")
        self.interval = (a, b)
        generic = sorted(generic, key=lambda g: g.span[0])
        exceptional = sorted(exceptional, key=lambda e: e.point)
        generic, exceptional = self._normalize(generic, exceptional)
        self.generic = tuple(generic)
        self.exceptional = tuple(exceptional)
        self._validate()

    @staticmethod
    def _normalize(generic, exceptional):
        kept = []
        for e in exceptional:
            perms = [T.is_permutation() for T in e.germs.values()]
            if perms and all(perms):
                left = [g for g in generic if g.span[1] == e.point]
                right = [g for g in generic if g.span[0] == e.point]
                if left and right:
                    if left[0].algebra != right[0].algebra:
                        raise ValidationError(
                            f"point {e.point}: fibers {left[0].algebra} and {right[0].algebra} "
                            "cannot be merged")
                    merged = GenericInterval((left[0].span[0], right[0].span[1]), left[0].algebra)
                    generic = [g for g in generic if g is not left[0] and g is not right[0]]
                    generic = sorted(generic + [merged], key=lambda g: g.span[0])
                continue
            if any(perms):
                raise ValidationError(
                    f"exceptional point {e.point} has the same fiber as one neighbor only")
            kept.append(e)
        return generic, kept

    def _validate(self):
        a, b = self.interval
        if not self.generic:
            raise ValidationError("at least one generic interval is required")
        if self.generic[0].span[0] != a or self.generic[-1].span[1] != b:
            raise ValidationError("generic intervals must cover the base interval")
        cuts = {e.point: e for e in self.exceptional}
        if len(cuts) != len(self.exceptional):
            raise ValidationError("duplicate exceptional points")
        for g in self.generic:
            if not g.span[0] < g.span[1]:
                raise ValidationError(f"empty generic interval {g.span}")
        for g, h in zip(self.generic, self.generic[1:]):
            if g.span[1] != h.span[0]:
                raise ValidationError(f"gap or overlap between {g.span} and {h.span}")
            if g.span[1] not in cuts:
                raise ValidationError(f"intervals {g.span} and {h.span} meet at a non-exceptional point")
        for e in self.exceptional:
            if not a <= e.point <= b:
                raise ValidationError(f"exceptional point {e.point} outside the base")
            expected = {}
            if e.point > a:
                expected["left"] = self.interval_at(e.point, "left")
            if e.point < b:
                expected["right"] = self.interval_at(e.point, "right")
            if set(e.germs) != set(expected):
                raise ValidationError(
                    f"point {e.point}: germs needed for sides {sorted(expected)}, got {sorted(e.germs)}")
            for side, g in expected.items():
                T = e.germs[side]
                if T.source != e.algebra or T.target != g.algebra:
                    raise ValidationError(
                        f"point {e.point} ({side}): germ maps {T.source} -> {T.target}, "
                        f"expected {e.algebra} -> {g.algebra}")
                if T.is_permutation():
                    raise ValidationError(f"point {e.point} ({side}): fiber is not strictly contained")

    def interval_at(self, point, side) -> GenericInterval:
        for g in self.generic:
            if (side == "left" and g.span[1] == point) or (side == "right" and g.span[0] == point):
                return g
        raise ValidationError(f"no generic interval on the {side} of {point}")

    def exceptional_at(self, x):
        for e in self.exceptional:
            if e.point == x:
                return e
        return None

    def fiber(self, x) -> MultiMatrixAlgebra:
        e = self.exceptional_at(x)
        if e is not None:
            return e.algebra
        for g in self.generic:
            if g.span[0] <= x <= g.span[1]:
                return g.algebra
        raise ValueError(f"{x} is outside the base")

    def germs(self):
        for e in self.exceptional:
            for side in SIDES:
                if side in e.germs:
                    yield e, side, e.germs[side]

    def __repr__(self):
        return (f"StratifiedBundle({self.interval}, generic={[str(g.algebra) for g in self.generic]}, "
                f"exceptional={[(e.point, str(e.algebra)) for e in self.exceptional]})")


def two_sided_bundle(iota0: BratteliMatrix, iota1: BratteliMatrix) -> StratifiedBundle:
    """Bundle over ``[-1, 1]`` glued at 0 from two embeddings of one algebra."""
    return StratifiedBundle(
        (-1.0, 1.0),
        [GenericInterval((-1.0, 0.0), iota0.target), GenericInterval((0.0, 1.0), iota1.target)],
        [ExceptionalPoint(0.0, iota0.source, {"left": iota0, "right": iota1})])


def bundle_rank(B: StratifiedBundle) -> int:
    ranks = [rank(g.algebra) for g in B.generic] + [rank(e.algebra) for e in B.exceptional]
    return max(ranks)


@dataclass(frozen=True)
class Witness:
    point: float
    column_sums: dict  # side -> tuple
    weights: dict  # side -> tuple of Fractions

    def describe(self) -> str:
        parts = [f"{side} column sums {self.column_sums[side]}" for side in self.column_sums]
        return f"at x = {self.point}: " + " vs ".join(parts)


@dataclass(frozen=True)
class OptimalityVerdict:
    optimal: bool
    rank: int
    prescribed: dict = field(default_factory=dict)  # point -> State
    witness: Witness | None = None


def _check_density(B, r):
    low = [g for g in B.generic if rank(g.algebra) != r]
    if low:
        raise HypothesisError(
            "the maximal-rank locus is not dense: generic interval(s) "
            + ", ".join(f"{g.span} ({g.algebra}, rank {rank(g.algebra)})" for g in low)
            + f" fall short of rank {r}")


def check_optimal(B: StratifiedBundle) -> OptimalityVerdict:
    """Decide whether an expectation with index equal to the rank exists.

    The optimal states on the generic fibers are forced; they extend
    across an exceptional point exactly when their restrictions along all
    adjacent germs agree, i.e. when the column-sum tuples scaled by the
    generic rank coincide. Raises :class:`HypothesisError` when the
    maximal-rank locus is not dense.
    """
    r = bundle_rank(B)
    _check_density(B, r)
    prescribed = {}
    for e in B.exceptional:
        sides = [s for s in SIDES if s in e.germs]
        weights = {s: restricted_optimal_weights(e.germs[s]) for s in sides}
        if len(set(weights.values())) > 1:
            w = Witness(e.point, {s: column_sums(e.germs[s]) for s in sides}, weights)
            return OptimalityVerdict(False, r, {}, w)
        prescribed[e.point] = optimal_restriction_by_columns(e.germs[sides[0]])
    return OptimalityVerdict(True, r, prescribed, None)


def check_multiplicity_free(B: StratifiedBundle) -> bool:
    """True when every germ has singleton columns; such bundles always
    admit an optimal expectation."""
    free = all(T.has_singleton_columns() for _, _, T in B.germs())
    if free:
        assert check_optimal(B).optimal, "multiplicity-free bundle without optimal expectation"
    return free


@dataclass(frozen=True)
class PullbackVerdict:
    agree: bool
    restrictions: tuple  # (weights along iota0, weights along iota1)


def check_pullback_cone(iota0: BratteliMatrix, iota1: BratteliMatrix) -> PullbackVerdict:
    """Do the optimal states of the two targets agree on the common source?"""
    if iota0.source != iota1.source:
        raise HypothesisError(f"germs start at different algebras {iota0.source} and {iota1.source}")
    if iota0.target.total != iota1.target.total:
        raise HypothesisError(
            f"ranks differ: {iota0.target.total} vs {iota1.target.total}")
    w0, w1 = restricted_optimal_weights(iota0), restricted_optimal_weights(iota1)
    agree = w0 == w1
    if not (iota0.is_permutation() or iota1.is_permutation()):
        assert check_optimal(two_sided_bundle(iota0, iota1)).optimal == agree
    return PullbackVerdict(agree, (w0, w1))


def fiber_classes(B: StratifiedBundle) -> dict:
    """Place fiber types in classes ``C_k`` by germ containment depth.

    Types containing no other fiber type get class 0; otherwise one more
    than the deepest type they contain.
    """
    types = {g.algebra for g in B.generic} | {e.algebra for e in B.exceptional}
    subs = {t: set() for t in types}
    for e, _, T in B.germs():
        subs[T.target].add(T.source)
    depth = {}

    def visit(t, stack=()):
        if t in depth:
            return depth[t]
        if t in stack:
            raise ValidationError("cyclic fiber containment")
        depth[t] = 1 + max((visit(s, stack + (t,)) for s in subs[t]), default=-1)
        return depth[t]

    for t in sorted(types, key=lambda t: t.blocks):
        visit(t)
    return depth


@dataclass
class Expectation:
    bundle: StratifiedBundle
    grid: np.ndarray
    states: list
    k_value: float
    mode: str = "blend"
    # one-sided limit states at exceptional points: (x, side, State)
    limits: list = field(default_factory=list)

    def k_trace(self) -> np.ndarray:
        return np.array([k_constant(s) for s in self.states])

    def trace_rows(self):
        """``(x, side, K)`` rows: grid points (side ``""``) merged with the
        one-sided limits at exceptional points."""
        rows = [(float(x), "", k_constant(s)) for x, s in zip(self.grid, self.states)]
        rows += [(float(x), side, k_constant(s)) for x, side, s in self.limits]
        order = {"left": 0, "": 1, "right": 2}
        return sorted(rows, key=lambda r: (r[0], order[r[1]]))


def build_grid(B: StratifiedBundle, h: float) -> np.ndarray:
    """Uniform grid on each generic interval with spacing at most ``h``,
    always containing the endpoints and midpoints."""
    if not h > 0:
        raise ValidationError("grid spacing must be positive")
    shortest = min(g.length for g in B.generic)
    if h > shortest:
        raise ValidationError(f"grid spacing {h} exceeds the shortest generic interval ({shortest})")
    pts = []
    for g in B.generic:
        steps = max(2, int(math.ceil(g.length / h - 1e-9)))
        steps += steps % 2
        l, r = g.span
        pts.extend((l * (steps - k) + r * k) / steps for k in range(steps))
        pts.append(r)
    return np.unique(np.array(pts))


def _anchor(B, g, side):
    """State the blend uses at one end of generic interval ``g``."""
    point = g.span[0] if side == "left" else g.span[1]
    e = B.exceptional_at(point)
    if e is None:
        return optimal_state(g.algebra)
    germ = e.germs["right" if side == "left" else "left"]
    return extend_state(optimal_state(e.algebra), germ)


def build_expectation(B: StratifiedBundle, h: float, mode: str = "blend") -> Expectation:
    """Explicit finite-index expectation on a grid of spacing ``h``.

    ``blend``: exceptional points get their fiber's optimal state; along a
    generic interval the state moves linearly from the canonical extension
    of the neighboring exceptional state (at the endpoint) to the generic
    optimal state (at the midpoint). ``optimal``: requires a Yes verdict
    from :func:`check_optimal` and uses optimal states throughout, with
    the prescribed column-sum restrictions at exceptional points.
    """
    if mode not in ("blend", "optimal"):
        raise ValueError(f"unknown mode {mode!r}")
    grid = build_grid(B, h)
    fiber_classes(B)  # rejects cyclic containment
    if mode == "optimal":
        verdict = check_optimal(B)
        if not verdict.optimal:
            raise NotOptimalError(verdict.witness)
    states = []
    for x in grid:
        e = B.exceptional_at(x)
        if e is not None:
            states.append(verdict.prescribed[e.point] if mode == "optimal"
                          else optimal_state(e.algebra))
            continue
        g = next(g for g in B.generic if g.span[0] <= x <= g.span[1])
        opt = optimal_state(g.algebra)
        if mode == "optimal":
            states.append(opt)
            continue
        c = g.midpoint
        if x <= c:
            t = (x - g.span[0]) / (c - g.span[0])
            states.append(blend([_anchor(B, g, "left"), opt], [1 - t, t]))
        else:
            t = (g.span[1] - x) / (g.span[1] - c)
            states.append(blend([_anchor(B, g, "right"), opt], [1 - t, t]))
    limits = []
    for e in B.exceptional:
        for side in SIDES:
            if side in e.germs:
                g = B.interval_at(e.point, side)
                limits.append((e.point, side, optimal_state(g.algebra) if mode == "optimal"
                               else _anchor(B, g, "right" if side == "left" else "left")))
    everything = states + [s for _, _, s in limits]
    ks = [k_constant(s) for s in everything]
    assert all(s.faithful for s in everything) and all(math.isfinite(k) for k in ks), \
        "non-faithful state in the construction"
    # the blend is convex in the state, so sup over the base is attained on
    # grid points or one-sided limits
    return Expectation(B, grid, states, max(ks), mode, limits)


@dataclass
class Section:
    """Grid-indexed algebra elements ``s(x)`` in the fiber over ``x``."""

    grid: np.ndarray
    values: list  # per grid point: list of blocks
    modulus: float = math.inf

    @classmethod
    def from_function(cls, B: StratifiedBundle, grid, fn, modulus=math.inf) -> "Section":
        """``fn(x, algebra)`` must return the section's value over ``x``."""
        grid = np.asarray(grid, dtype=float)
        return cls(grid, [[np.asarray(v, dtype=complex) for v in fn(x, B.fiber(x))] for x in grid],
                   modulus)

    @classmethod
    def constant(cls, B: StratifiedBundle, grid, scalar=1.0) -> "Section":
        return cls.from_function(B, grid, lambda x, A: [scalar * u for u in A.unit()], 0.0)

    def compatibility_residual(self, B: StratifiedBundle) -> float:
        """Largest gap between a neighbor value and the germ image of the
        value at an exceptional point."""
        worst = 0.0
        for k, x in enumerate(self.grid):
            e = B.exceptional_at(x)
            if e is None:
                continue
            for side, step in (("left", -1), ("right", 1)):
                if side not in e.germs or not 0 <= k + step < len(self.grid):
                    continue
                image = e.germs[side].embed(self.values[k])
                gap = max(np.max(np.abs(a - b)) for a, b in zip(image, self.values[k + step]))
                worst = max(worst, float(gap))
        return worst


@dataclass(frozen=True)
class Evaluation:
    grid: np.ndarray
    values: np.ndarray
    modulus: float  # max |f(x_{k+1}) - f(x_k)|


def evaluate_expectation(E: Expectation, s: Section) -> Evaluation:
    """Apply the field of states: ``x -> phi_x(s(x))``."""
    if len(s.grid) != len(E.grid) or not np.allclose(s.grid, E.grid, rtol=0, atol=1e-12):
        raise ValueError("section is not sampled on the expectation's grid")
    for x, v in zip(E.grid, s.values):
        blocks = E.bundle.fiber(x).blocks
        if tuple(np.shape(b)[0] for b in v) != blocks:
            raise ValueError(f"section value at {x} does not lie in the fiber {blocks}")
    residual = s.compatibility_residual(E.bundle)
    if residual > s.modulus:
        raise ValueError(f"section violates the gluing conditions (residual {residual:.3g})")
    vals = np.array([phi(v) for phi, v in zip(E.states, s.values)])
    modulus = float(np.max(np.abs(np.diff(vals)))) if len(vals) > 1 else 0.0
    return Evaluation(E.grid.copy(), vals, modulus)


@dataclass
class VerificationReport:
    k: float
    points: int
    checks: dict  # name -> passed
    witnesses: list

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _spectral_projections(phi: State):
    """Rank-one projections onto eigenvectors of each density block."""
    for i, rho in enumerate(phi.densities):
        _, vecs = np.linalg.eigh(rho)
        for v in vecs.T:
            a = phi.algebra.zero()
            a[i] = np.outer(v, v.conj())
            yield a


def verify_expectation(E: Expectation, samples: int = 20, seed: int = 0,
                       k: float | None = None, tol: float = 1e-12) -> VerificationReport:
    """Check the state field pointwise against the expectation axioms.

    Per grid point: unitality, positivity and scalar-fixing on random
    elements, faithfulness, and the index inequality ``k·phi(a) >= ||a||``
    on random positive elements and on rank-one spectral projections
    (where it is tight). ``k`` defaults to the expectation's ``k_value``.
    """
    rng = np.random.default_rng(seed)
    k = E.k_value if k is None else k
    checks = {"unital": True, "faithful": True, "positive": True, "scalars": True, "index": True}
    witnesses = []

    def fail(name, x, detail):
        checks[name] = False
        witnesses.append({"check": name, "x": float(x), "detail": detail})

    pairs = list(zip(E.grid, E.states)) + [(x, s) for x, _, s in E.limits]
    for x, phi in pairs:
        A = phi.algebra
        one = phi(A.unit())
        if abs(one - 1) > tol:
            fail("unital", x, f"phi(1) = {one}")
        if not phi.faithful:
            fail("faithful", x, f"min eigenvalue {phi.min_eigenvalue():.3g}")
        c = complex(rng.standard_normal(), rng.standard_normal())
        val = phi([c * u for u in A.unit()])
        if abs(val - c) > tol * (1 + abs(c)):
            fail("scalars", x, f"phi({c}·1) = {val}")
        elements = [random_positive(A, rng) for _ in range(samples)]
        elements += list(_spectral_projections(phi))
        for a in elements:
            val = phi(a)
            norm = element_norm(a)
            if val.real < -tol * norm or abs(val.imag) > 1e-9 * norm:
                fail("positive", x, f"phi(a) = {val} for positive a")
                break
            if k * val.real < norm * (1 - 1e-9):
                fail("index", x, f"{k}·phi(a) = {k * val.real:.6g} < ||a|| = {norm:.6g}")
                break
    return VerificationReport(float(k), len(pairs), checks, witnesses)
