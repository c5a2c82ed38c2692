"""Multi-matrix algebras ``M_n = M_{n_1} x ... x M_{n_k}``, their states and
unital embeddings.

A state is stored as one density matrix per block, paired with algebra
elements through ``a -> sum_i Tr(rho_i a_i)``. A unital embedding
``M_m -> M_n`` is stored as its Bratteli matrix ``T`` (``T_ij`` copies of
``M_{m_j}`` sit diagonally inside ``M_{n_i}``) plus the order in which the
copies are laid out along each target block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DimensionError, ValidationError

FAITHFUL_TOL = 1e-10
STATE_TOL = 1e-12


@dataclass(frozen=True)
class MultiMatrixAlgebra:
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(int(b) for b in self.blocks)
        if not blocks or any(b < 1 for b in blocks):
            raise ValidationError(f"invalid block composition {self.blocks!r}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def total(self) -> int:
        return sum(self.blocks)

    def __len__(self):
        return len(self.blocks)

    def unit(self):
        return [np.eye(b, dtype=complex) for b in self.blocks]

    def zero(self):
        return [np.zeros((b, b), dtype=complex) for b in self.blocks]

    def __str__(self):
        return " x ".join("C" if b == 1 else f"M{b}" for b in self.blocks)


def _as_algebra(A) -> MultiMatrixAlgebra:
    return A if isinstance(A, MultiMatrixAlgebra) else MultiMatrixAlgebra(tuple(A))


class State:
    """A state on a multi-matrix algebra, as block density matrices."""

    def __init__(self, densities, check: bool = True):
        rhos = tuple(np.array(np.atleast_2d(r), dtype=complex) for r in densities)
        if not rhos:
            raise ValidationError("a state needs at least one block")
        for r in rhos:
            if r.ndim != 2 or r.shape[0] != r.shape[1]:
                raise ValidationError("density blocks must be square")
            r.setflags(write=False)
        self.densities = rhos
        self.algebra = MultiMatrixAlgebra(tuple(r.shape[0] for r in rhos))
        if check:
            self._validate()

    def _validate(self):
        for r in self.densities:
            if np.max(np.abs(r - r.conj().T)) > STATE_TOL:
                raise ValidationError("density block is not Hermitian")
        if self.min_eigenvalue() < -STATE_TOL:
            raise ValidationError("density block is not positive semidefinite")
        if abs(self.trace() - 1.0) > STATE_TOL:
            raise ValidationError(f"total trace {self.trace()!r} != 1")

    def trace(self) -> float:
        return float(sum(np.trace(r).real for r in self.densities))

    def weights(self) -> np.ndarray:
        """Mass ``Tr(rho_i)`` carried by each block."""
        return np.array([np.trace(r).real for r in self.densities])

    def min_eigenvalue(self) -> float:
        return float(min(np.linalg.eigvalsh(r)[0] for r in self.densities))

    @property
    def faithful(self) -> bool:
        return self.min_eigenvalue() > FAITHFUL_TOL

    def __call__(self, a) -> complex:
        if len(a) != len(self.densities):
            raise DimensionError("element does not match the algebra's blocks")
        total = 0j
        for r, x in zip(self.densities, a):
            x = np.asarray(x)
            if x.shape != r.shape:
                raise DimensionError("element block has the wrong size")
            total += np.sum(r.T * x)  # Tr(r x)
        return complex(total)

    def allclose(self, other: "State", atol: float = 1e-12) -> bool:
        return (self.algebra == other.algebra
                and all(np.allclose(a, b, rtol=0, atol=atol)
                        for a, b in zip(self.densities, other.densities)))

    def __repr__(self):
        return f"State({self.algebra}, weights={np.round(self.weights(), 6).tolist()})"


def blend(states, coefficients) -> State:
    """Convex combination of states on the same algebra."""
    states = list(states)
    algebra = states[0].algebra
    if any(s.algebra != algebra for s in states):
        raise DimensionError("cannot blend states on different algebras")
    rhos = [sum(c * s.densities[i] for c, s in zip(coefficients, states))
            for i in range(len(algebra))]
    return State(rhos)


class BratteliMatrix:
    """Bratteli matrix of a unital embedding ``M_source -> M_target``.

    ``layout[i]`` lists, in order along the diagonal of target block
    ``i``, the source block index of each copy. The default is the
    standard form: ``T_i1`` copies of block 1, then ``T_i2`` of block 2, ...
    """

    def __init__(self, matrix, source, target, layout=None):
        T = np.array(matrix, dtype=np.int64)
        self.source = _as_algebra(source)
        self.target = _as_algebra(target)
        if T.ndim != 2 or T.shape != (len(self.target), len(self.source)):
            raise ValidationError(
                f"Bratteli matrix must be {len(self.target)}x{len(self.source)}, got {T.shape}")
        if np.any(T < 0):
            raise ValidationError("Bratteli matrix entries must be nonnegative")
        m = np.array(self.source.blocks)
        if not np.array_equal(T @ m, np.array(self.target.blocks)):
            raise ValidationError(
                f"embedding is not unital: T·m = {(T @ m).tolist()} but target is {list(self.target.blocks)}")
        if np.any(T.sum(axis=0) == 0):
            raise ValidationError("embedding is not injective: a source block has no copies")
        if layout is None:
            layout = tuple(tuple(j for j in range(T.shape[1]) for _ in range(T[i, j]))
                           for i in range(T.shape[0]))
        else:
            layout = tuple(tuple(int(j) for j in row) for row in layout)
            if len(layout) != T.shape[0] or any(
                    sorted(row) != sorted(j for j in range(T.shape[1]) for _ in range(T[i, j]))
                    for i, row in enumerate(layout)):
                raise ValidationError("layout does not match the Bratteli matrix")
        T.setflags(write=False)
        self.matrix = T
        self.layout = layout

    @classmethod
    def identity(cls, algebra) -> "BratteliMatrix":
        algebra = _as_algebra(algebra)
        return cls(np.eye(len(algebra), dtype=int), algebra, algebra)

    def copies(self):
        """Yield ``(target block, offset, source block)`` for each diagonal copy."""
        m = self.source.blocks
        for i, row in enumerate(self.layout):
            offset = 0
            for j in row:
                yield i, offset, j
                offset += m[j]

    def is_permutation(self) -> bool:
        T = self.matrix
        return T.shape[0] == T.shape[1] and bool(np.all(T.sum(axis=0) == 1)) \
            and bool(np.all(T.sum(axis=1) == 1))

    def has_singleton_columns(self) -> bool:
        T = self.matrix
        return bool(np.all((T == 0) | (T == 1))) and bool(np.all(T.sum(axis=0) == 1))

    def embed(self, b):
        """Image of a source element (list of blocks) in the target algebra."""
        out = self.target.zero()
        m = self.source.blocks
        for i, off, j in self.copies():
            out[i][off:off + m[j], off:off + m[j]] = b[j]
        return out

    def __eq__(self, other):
        return (isinstance(other, BratteliMatrix) and self.source == other.source
                and self.target == other.target
                and np.array_equal(self.matrix, other.matrix))

    def __hash__(self):
        return hash((self.source, self.target, self.matrix.tobytes()))

    def __repr__(self):
        return f"BratteliMatrix({self.matrix.tolist()}, {self.source.blocks} -> {self.target.blocks})"


def rank(A) -> int:
    """Sum of the dimensions of the irreducible representations."""
    return _as_algebra(A).total


def optimal_state(A) -> State:
    """``sum_i (n_i/|n|)`` times the normalized trace of block ``i``."""
    A = _as_algebra(A)
    return State([np.eye(b) / A.total for b in A.blocks])


def k_constant(phi: State) -> float:
    """Least ``K`` with ``K·phi(a) >= ||a||`` for all positive ``a``.

    Equals ``1/lambda_min`` over all density blocks; infinite for
    non-faithful states.
    """
    lam = phi.min_eigenvalue()
    if lam <= FAITHFUL_TOL:
        return math.inf
    return 1.0 / lam


def column_sums(T: BratteliMatrix) -> tuple:
    return tuple(int(s) for s in T.matrix.sum(axis=0))


def restrict_state(psi: State, T: BratteliMatrix) -> State:
    """Pull ``psi`` back along the embedding: sum the diagonal sub-blocks
    of each copy of a source block."""
    if psi.algebra != T.target:
        raise DimensionError(f"state lives on {psi.algebra}, embedding targets {T.target}")
    m = T.source.blocks
    out = [np.zeros((b, b), dtype=complex) for b in m]
    for i, off, j in T.copies():
        out[j] += psi.densities[i][off:off + m[j], off:off + m[j]]
    return State(out)


def extend_state(phi: State, T: BratteliMatrix) -> State:
    """Spread a faithful state over the copies, each copy of source block
    ``j`` receiving ``rho_j / (column sum j)``."""
    if phi.algebra != T.source:
        raise DimensionError(f"state lives on {phi.algebra}, embedding starts at {T.source}")
    if not phi.faithful:
        raise ValidationError("only faithful states can be extended")
    m = T.source.blocks
    colsum = column_sums(T)
    out = T.target.zero()
    for i, off, j in T.copies():
        out[i][off:off + m[j], off:off + m[j]] = phi.densities[j] / colsum[j]
    return State(out)


def compose_bratteli(T2: BratteliMatrix, T1: BratteliMatrix) -> BratteliMatrix:
    """Bratteli matrix of ``T2 ∘ T1`` (first ``T1``, then ``T2``).

    The layout records where the copies of the composite actually sit.
    """
    if T1.target != T2.source:
        raise DimensionError(f"cannot chain {T1.target} into {T2.source}")
    layout = tuple(tuple(j for jp in row for j in T1.layout[jp]) for row in T2.layout)
    return BratteliMatrix(T2.matrix @ T1.matrix, T1.source, T2.target, layout)


def restricted_optimal_weights(T: BratteliMatrix) -> tuple:
    """Exact per-block factors ``colsum_j/|n|`` of the restricted optimal state."""
    total = T.target.total
    return tuple(Fraction(s, total) for s in column_sums(T))


def optimal_restriction_by_columns(T: BratteliMatrix, target=None) -> State:
    """``sum_j (colsum_j/|n|)`` times the un-normalized trace on ``M_{m_j}``."""
    if target is not None and _as_algebra(target) != T.target:
        raise DimensionError("target composition does not match the embedding")
    factors = restricted_optimal_weights(T)
    return State([float(f) * np.eye(b) for f, b in zip(factors, T.source.blocks)])


def random_state(A, rng, faithful: bool = True) -> State:
    """Random state: Wishart-like blocks with random block masses."""
    A = _as_algebra(A)
    rhos = []
    for b in A.blocks:
        G = rng.standard_normal((b, b)) + 1j * rng.standard_normal((b, b))
        R = G @ G.conj().T
        if faithful:
            R += 0.05 * np.trace(R).real * np.eye(b)
        rhos.append(R)
    total = sum(np.trace(R).real for R in rhos)
    return State([0.5 * ((R + R.conj().T) / total) for R in rhos])


def random_positive(A, rng):
    """Random nonzero positive element ``B B^*`` of the algebra."""
    A = _as_algebra(A)
    out = []
    for b in A.blocks:
        G = rng.standard_normal((b, b)) + 1j * rng.standard_normal((b, b))
        G *= rng.random((b, 1)) ** 2  # vary the rank profile
        out.append(G @ G.conj().T)
    return out


def element_norm(a) -> float:
    """C*-norm: largest block operator norm."""
    return float(max(np.linalg.norm(np.asarray(x), 2) for x in a))
