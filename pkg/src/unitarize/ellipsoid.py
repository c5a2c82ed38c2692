"""Löwner and John ellipsoids of symmetric bodies, with certificates.

The Löwner ellipsoid of ``conv(±V)`` is found by the Khachiyan ascent on
the weights ``u`` of ``M(u) = sum u_i v_i v_i^T``, with Todd-Yildirim
away steps so that inactive vertices are dropped exactly. At the optimum
``A = M(u)^{-1} / n`` and the rescaled weights ``c_i = n u_i`` give a John
decomposition ``sum c_i w_i w_i^T = I`` with ``w_i = A^{1/2} v_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .convex import (Ellipsoid, SymmetricBody, ellipsoid_gauges, gauge,
                     sample_directions)
from .errors import CertificateError, DegenerateBodyError, NonConvergenceError

WEIGHT_FLOOR = 1e-8  # times n
RESIDUAL_TOL = 1e-5
WEIGHT_SUM_TOL = 1e-6
MAX_ITER = 10 ** 6


@dataclass(frozen=True)
class LoewnerResult:
    ellipsoid: Ellipsoid
    weights: tuple  # ((index into points, c_i), ...)
    contact_residual: float
    iterations: int
    points: np.ndarray  # vertex set the optimizer ran on
    eps: float
    polar: bool = False  # True for john_inscribed: weights live on the polar body

    @property
    def contact_points(self) -> np.ndarray:
        return self.points[[i for i, _ in self.weights]]

    @property
    def weight_sum(self) -> float:
        return float(sum(c for _, c in self.weights))

    def optimizer_ellipsoid(self) -> Ellipsoid:
        """The enclosing ellipsoid the weights certify."""
        return self.ellipsoid.polar() if self.polar else self.ellipsoid


@dataclass(frozen=True)
class JohnCertificate:
    residual: float
    weight_sum: float
    contact_count: int
    max_contact_deviation: float
    dim: int


@dataclass(frozen=True)
class BmBound:
    norm_into_hilbert: float
    norm_back: float  # certified upper bound on ||T^{-1}||
    norm_back_sampled: float  # lower estimate of ||T^{-1}||
    john_bound: float  # ||T^{-1}|| bound through the inscribed John ellipsoid
    product_log: float

    @property
    def sampled_product_log(self) -> float:
        return math.log(self.norm_into_hilbert * self.norm_back_sampled)


def _khachiyan(V, eps, max_iter):
    k, n = V.shape
    u = np.full(k, 1.0 / k)
    for it in range(max_iter + 1):
        M = (V.T * u) @ V
        g = np.einsum("ij,ij->i", V @ np.linalg.inv(M), V)
        jp = int(np.argmax(g))
        jm = int(np.argmin(np.where(u > 0, g, np.inf)))
        if g[jp] <= n * (1 + eps) and g[jm] >= n * (1 - eps):
            return u, it
        if g[jp] - n >= n - g[jm]:
            j, gj = jp, g[jp]
            step = (gj - n) / (n * (gj - 1))
        else:
            j, gj = jm, g[jm]
            drop = -u[j] / (1 - u[j])
            step = drop if gj <= 1 else max((gj - n) / (n * (gj - 1)), drop)
        u = (1 - step) * u
        u[j] += step
        if step < 0 and u[j] <= 1e-15:
            u[j] = 0.0
    raise NonConvergenceError(f"Khachiyan ascent did not reach eps={eps} in {max_iter} steps")


def _sym_vec(V):
    n = V.shape[1]
    iu = np.triu_indices(n)
    return np.einsum("ki,kj->kij", V, V)[:, iu[0], iu[1]]


def _caratheodory(V, u):
    """Shrink the support of ``u`` to at most n(n+1)/2 while keeping M(u)."""
    n = V.shape[1]
    limit = n * (n + 1) // 2
    u = u.copy()
    idx = list(np.flatnonzero(u > 0))
    while len(idx) > limit:
        S = np.array(idx[:limit + 1])
        B = _sym_vec(V[S]).T
        z = np.linalg.svd(B)[2][-1]
        if z.max() <= 0:
            z = -z
        pos = z > 0
        ratios = np.where(pos, u[S] / np.where(pos, z, 1.0), np.inf)
        r = int(np.argmin(ratios))
        u[S] = u[S] - ratios[r] * z
        u[S[r]] = 0.0
        u[u < 0] = 0.0
        idx = list(np.flatnonzero(u > 0))
    return u


def _solve(points, eps, max_iter, polar):
    V = np.asarray(points, dtype=float)
    k, n = V.shape
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    if max_iter is None:
        max_iter = min(int(math.ceil(100 * n / eps)), MAX_ITER)
    u, iterations = _khachiyan(V, eps, max_iter)
    u[n * u < WEIGHT_FLOOR * n] = 0.0
    u = _caratheodory(V, u)
    M = (V.T * u) @ V
    E = Ellipsoid(np.linalg.inv(M) / n)
    support = np.flatnonzero(u > 0)
    c = n * u[support] / u[support].sum()
    weights = tuple((int(i), float(ci)) for i, ci in zip(support, c))
    W = V[support] @ E.sqrt_shape()
    residual = float(np.linalg.norm((W.T * c) @ W - np.eye(n)))
    shown = E.polar() if polar else E
    return LoewnerResult(shown, weights, residual, iterations, V, eps, polar)


def loewner(body: SymmetricBody, eps: float = 1e-8, max_iter: int | None = None) -> LoewnerResult:
    """Minimal-volume centered ellipsoid containing ``body``.

    Every vertex ends up with Hilbert norm at most ``sqrt(1 + eps)``.
    """
    return _solve(body.vertices, eps, max_iter, polar=False)


def polar_vertices(body: SymmetricBody) -> np.ndarray:
    """Vertices (one per antipodal pair) of the polar body ``{y : |<v_i, y>| <= 1}``.

    These are the facet normals of ``body`` scaled by the inverse facet
    offsets.
    """
    V = body.vertices
    if body.dim == 1:
        return np.array([[1.0 / np.max(np.abs(V))]])
    hull = ConvexHull(body.all_points())
    P = hull.equations[:, :-1] / -hull.equations[:, -1:]
    # orient each antipodal pair the same way before deduplicating
    lead = np.argmax(np.abs(P) > 1e-12, axis=1)
    sign = np.sign(P[np.arange(len(P)), lead])
    P = P * sign[:, None]
    _, first = np.unique(np.round(P, 9), axis=0, return_index=True)
    P = P[np.sort(first)]
    if np.max(np.abs(P @ V.T)) > 1 + 1e-9:
        raise DegenerateBodyError("facet computation is inconsistent with the vertex set")
    return P


def john_inscribed(body: SymmetricBody, eps: float = 1e-8, max_iter: int | None = None) -> LoewnerResult:
    """Maximal-volume centered ellipsoid inside ``body``, via polarity.

    The Löwner ellipsoid of the polar body is computed on its vertices;
    its polar is the John ellipsoid. The returned weights and contact
    points refer to the polar vertices.
    """
    return _solve(polar_vertices(body), eps, max_iter, polar=True)


def john_certificate(result: LoewnerResult, residual_tol: float = RESIDUAL_TOL,
                     weight_sum_tol: float = WEIGHT_SUM_TOL,
                     contact_tol: float | None = None) -> JohnCertificate:
    """Recompute and check the John decomposition carried by ``result``.

    Raises :class:`CertificateError` when the residual, the weight sum,
    the contact count bound ``n <= N <= n(n+1)/2`` or the boundary
    condition on the contact points fails.
    """
    E = result.optimizer_ellipsoid()
    n = E.dim
    if contact_tol is None:
        contact_tol = result.eps + 1e-12
    idx = [i for i, c in result.weights if c >= WEIGHT_FLOOR * n]
    c = np.array([c for _, c in result.weights if c >= WEIGHT_FLOOR * n])
    W = result.points[idx] @ E.sqrt_shape()
    residual = float(np.linalg.norm((W.T * c) @ W - np.eye(n)))
    deviation = float(np.max(np.abs(np.linalg.norm(W, axis=1) - 1.0))) if len(idx) else math.inf
    cert = JohnCertificate(residual, float(c.sum()), len(idx), deviation, n)
    problems = []
    if residual > residual_tol:
        problems.append(f"residual {residual:.3g} > {residual_tol:.3g}")
    if abs(cert.weight_sum - n) > weight_sum_tol:
        problems.append(f"weight sum {cert.weight_sum:.12g} != {n}")
    if not (n <= cert.contact_count <= n * (n + 1) // 2):
        problems.append(f"contact count {cert.contact_count} outside [{n}, {n * (n + 1) // 2}]")
    if deviation > contact_tol:
        problems.append(f"contact points off the boundary by {deviation:.3g}")
    if problems:
        raise CertificateError("; ".join(problems))
    return cert


def _sampled_norm_back(body, E, sample, seed):
    n = body.dim
    if sample is None:
        sample = 64 if n == 2 else 256
    U = sample_directions(n, sample, seed)
    if n == 2:
        U = U[: max(1, len(U) // 2)]  # the gauge is even
    return max(gauge(body, x) for x in E.boundary_points(U))


def bm_bound(body: SymmetricBody, result: LoewnerResult, sample: int | None = None,
             seed: int = 0, john: LoewnerResult | None = None) -> BmBound:
    """Norms of the identity between ``body``'s norm and its Löwner Hilbert norm.

    ``norm_back`` is the smaller of the John-theorem bound ``sqrt(n)``
    (valid once the certificate passes) and the bound obtained through
    the inscribed John ellipsoid; ``norm_back_sampled`` is the largest
    body gauge found on sampled boundary points of the Löwner ellipsoid,
    or NaN when ``sample`` is 0.
    """
    john_certificate(result)
    E = result.ellipsoid
    n = body.dim
    into = float(np.max(ellipsoid_gauges(E, body.vertices)))
    if john is None:
        john = john_inscribed(body, result.eps)
    # shrink the John ellipsoid so it sits inside the body exactly
    gamma = float(np.max(ellipsoid_gauges(john.optimizer_ellipsoid(), john.points)))
    inner = john.ellipsoid.shape * gamma ** 2
    Ei = E.inverse_sqrt_shape()
    john_bound = float(np.sqrt(np.max(np.linalg.eigvalsh(Ei @ inner @ Ei))))
    back = min(math.sqrt(n), john_bound)
    sampled = math.nan if sample == 0 else _sampled_norm_back(body, E, sample, seed)
    return BmBound(into, back, sampled, john_bound, math.log(into * back))
