"""Origin-symmetric convex bodies and centered ellipsoids.

A finite-dimensional real normed space is represented by its unit ball.
Polytopal unit balls are stored as a vertex list ``V`` and stand for
``conv(V ∪ -V)``; Hilbert norms are stored as a shape matrix ``A`` and
stand for ``{x : x^T A x <= 1}``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import DegenerateBodyError, DimensionError

#: relative singular-value / eigenvalue floor for full-dimensionality
DEGENERACY_TOL = 1e-10
SYMMETRY_TOL = 1e-12
UNIT_TOL = 1e-12

DISC_DIRECTIONS = 4096
SPHERE_DIRECTIONS = 16384


def _as_vector(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise DimensionError(f"expected a vector of length {dim}, got shape {x.shape}")
    return x


class SymmetricBody:
    """The body ``conv(V ∪ -V)`` for a spanning vertex list ``V``.

    Zero vectors are rejected; of each antipodal pair only the first
    occurrence is kept.
    """

    def __init__(self, vertices):
        V = np.array(vertices, dtype=float)
        if V.ndim != 2 or V.shape[0] == 0 or V.shape[1] == 0:
            raise DimensionError("vertices must be a non-empty 2-d array (count x dim)")
        if not np.all(np.isfinite(V)):
            raise DegenerateBodyError("vertices must be finite")
        if np.any(np.all(V == 0.0, axis=1)):
            raise DegenerateBodyError("zero vector among vertices")
        keep = []
        seen = set()
        for row in V:
            key = tuple(row)
            if key in seen or tuple(-row) in seen:
                continue
            seen.add(key)
            keep.append(row)
        V = np.array(keep)
        sv = np.linalg.svd(V, compute_uv=False)
        if len(sv) < V.shape[1] or sv[-1] < DEGENERACY_TOL * sv[0]:
            raise DegenerateBodyError(
                "vertices do not span R^%d (smallest singular value %.3g)"
                % (V.shape[1], sv[-1] if len(sv) == V.shape[1] else 0.0))
        V.setflags(write=False)
        self._vertices = V

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    @property
    def dim(self) -> int:
        return self._vertices.shape[1]

    def all_points(self) -> np.ndarray:
        """Vertices together with their antipodes."""
        return np.vstack([self._vertices, -self._vertices])

    def transformed(self, L) -> "SymmetricBody":
        """Image ``L·K`` under an invertible linear map."""
        L = np.asarray(L, dtype=float)
        return SymmetricBody(self._vertices @ L.T)

    def __repr__(self):
        return f"SymmetricBody(dim={self.dim}, vertices={len(self._vertices)})"


class Ellipsoid:
    """Centered ellipsoid ``{x : x^T A x <= 1}``."""

    def __init__(self, shape):
        A = np.array(shape, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise DimensionError("shape matrix must be square")
        if np.max(np.abs(A - A.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(A))):
            raise DegenerateBodyError("shape matrix is not symmetric")
        A = 0.5 * (A + A.T)
        w, Q = np.linalg.eigh(A)
        if w[0] <= DEGENERACY_TOL * max(w[-1], 0.0) or w[-1] <= 0.0:
            raise DegenerateBodyError("shape matrix is not positive definite")
        A.setflags(write=False)
        self._shape = A
        self._eig = (w, Q)

    @property
    def shape(self) -> np.ndarray:
        return self._shape

    @property
    def dim(self) -> int:
        return self._shape.shape[0]

    def inverse_shape(self) -> np.ndarray:
        w, Q = self._eig
        return (Q / w) @ Q.T

    def sqrt_shape(self) -> np.ndarray:
        """Symmetric square root of ``A``: the map to orthonormalizing coordinates."""
        w, Q = self._eig
        return (Q * np.sqrt(w)) @ Q.T

    def inverse_sqrt_shape(self) -> np.ndarray:
        w, Q = self._eig
        return (Q / np.sqrt(w)) @ Q.T

    def boundary_points(self, directions) -> np.ndarray:
        """Map unit vectors (rows) onto the ellipsoid's boundary."""
        return np.asarray(directions, dtype=float) @ self.inverse_sqrt_shape()

    def transformed(self, L) -> "Ellipsoid":
        Li = np.linalg.inv(np.asarray(L, dtype=float))
        return Ellipsoid(Li.T @ self._shape @ Li)

    def polar(self) -> "Ellipsoid":
        return Ellipsoid(self.inverse_shape())

    @classmethod
    def ball(cls, dim, radius=1.0) -> "Ellipsoid":
        return cls(np.eye(dim) / radius ** 2)

    def __repr__(self):
        return f"Ellipsoid(dim={self.dim})"


def gauge(body: SymmetricBody, x) -> float:
    """Minkowski functional of ``body`` at ``x``.

    Solves ``min sum|λ_i|`` subject to ``sum λ_i v_i = x``, written with
    split nonnegative variables.
    """
    x = _as_vector(x, body.dim)
    scale = float(np.linalg.norm(x))
    if scale == 0.0:
        return 0.0
    V = body.vertices
    k = len(V)
    # solve at unit length: the LP tolerances are absolute
    res = linprog(np.ones(2 * k), A_eq=np.hstack([V.T, -V.T]), b_eq=x / scale,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        # spanning vertex sets always make the LP feasible and bounded
        raise DegenerateBodyError(f"gauge LP failed: {res.message}")
    return scale * float(res.fun)


def ellipsoid_gauge(E: Ellipsoid, x) -> float:
    x = _as_vector(x, E.dim)
    return float(np.sqrt(max(x @ E.shape @ x, 0.0)))


def ellipsoid_gauges(E: Ellipsoid, X) -> np.ndarray:
    """Row-wise Hilbert norms ``sqrt(x^T A x)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != E.dim:
        raise DimensionError("dimension mismatch")
    return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", X, E.shape, X), 0.0))


def _check_directions(U, dim):
    U = np.asarray(U, dtype=float)
    single = U.ndim == 1
    U = np.atleast_2d(U)
    if U.shape[1] != dim:
        raise DimensionError(f"directions must have length {dim}")
    if np.max(np.abs(np.linalg.norm(U, axis=1) - 1.0)) > UNIT_TOL:
        raise ValueError("directions must be unit vectors")
    return U, single


def support(K, u):
    """Support function ``h_K(u)`` for a body or ellipsoid.

    ``u`` is a unit vector or an array of unit row vectors; the result
    has matching shape (float or 1-d array).
    """
    U, single = _check_directions(u, K.dim)
    if isinstance(K, SymmetricBody):
        h = np.max(np.abs(U @ K.vertices.T), axis=1)
    elif isinstance(K, Ellipsoid):
        h = np.sqrt(np.einsum("ij,jk,ik->i", U, K.inverse_shape(), U))
    else:
        raise TypeError(f"no support function for {type(K).__name__}")
    return float(h[0]) if single else h


@lru_cache(maxsize=16)
def _directions(dim, count, seed):
    if dim == 1:
        U = np.array([[1.0], [-1.0]])
    elif dim == 2:
        t = 2 * np.pi * np.arange(count) / count
        U = np.column_stack([np.cos(t), np.sin(t)])
    else:
        m = int(np.ceil(np.log2(count)))
        pts = qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(m)[:count]
        Z = ndtri(np.clip(pts, 1e-12, 1 - 1e-12))
        U = Z / np.linalg.norm(Z, axis=1, keepdims=True)
    U.setflags(write=False)
    return U


def sample_directions(dim: int, count: int | None = None, seed: int = 0) -> np.ndarray:
    """Deterministic unit-direction sample.

    Equally spaced angles in the plane; a scrambled Sobol sequence pushed
    through the normal quantile function in higher dimensions.
    """
    if count is None:
        count = DISC_DIRECTIONS if dim == 2 else SPHERE_DIRECTIONS
    return _directions(int(dim), int(count), int(seed))


def hausdorff_distance(P, Q, directions=None, seed: int = 0) -> float:
    """Sampled Hausdorff distance ``max_u |h_P(u) - h_Q(u)|``.

    ``directions`` is either an explicit array of unit vectors or a
    sample count. The sampled value never exceeds the true distance.
    """
    if P.dim != Q.dim:
        raise DimensionError(f"dimension mismatch: {P.dim} vs {Q.dim}")
    if directions is None or np.isscalar(directions):
        U = sample_directions(P.dim, directions, seed)
    else:
        U = np.asarray(directions, dtype=float)
    return float(np.max(np.abs(support(P, U) - support(Q, U))))
