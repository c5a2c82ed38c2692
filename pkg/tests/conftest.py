import itertools
from functools import lru_cache

import numpy as np
import pytest
from scipy.optimize import minimize

from unitarize.convex import SymmetricBody
from unitarize.multimatrix import BratteliMatrix

ACCEPTANCE_LINES = []


def random_body(rng, n, count=None):
    """Full-dimensional symmetric body with Gaussian vertices."""
    if count is None:
        count = int(rng.integers(n + 1, 4 * n + 1))
    return SymmetricBody(rng.standard_normal((count, n)))


def random_chart(rng, n, cond_max=50.0):
    while True:
        L = rng.standard_normal((n, n))
        if np.linalg.cond(L) < cond_max:
            return L


def compositions(total):
    """All ordered block-size tuples summing to ``total``."""
    for cuts in itertools.product((0, 1), repeat=total - 1):
        parts, size = [], 1
        for c in cuts:
            if c:
                parts.append(size)
                size = 1
            else:
                size += 1
        yield tuple(parts + [size])


def partitions(total):
    """Non-increasing block-size tuples: compositions up to relabelling blocks."""
    return sorted({tuple(sorted(c, reverse=True)) for c in compositions(total)})


def rows_for(m, target):
    """Nonnegative integer rows r with r . m == target."""
    ranges = [range(target // mj + 1) for mj in m]
    return [r for r in itertools.product(*ranges) if np.dot(r, m) == target]


def unital_embeddings(max_total):
    """Every unital embedding between algebras of rank <= ``max_total``, up
    to relabelling the blocks of source and target."""
    for nt in range(1, max_total + 1):
        for n in partitions(nt):
            for mt in range(1, nt + 1):
                for m in partitions(mt):
                    for rows in itertools.product(*(rows_for(m, ni) for ni in n)):
                        T = np.array(rows, dtype=int).reshape(len(n), len(m))
                        if np.all(T.sum(axis=0) > 0):
                            yield BratteliMatrix(T, m, n)


def oracle_k(phi, rng, starts=2):
    """sup ||a||/phi(a) by minimizing the Rayleigh quotient of each block
    over unit vectors with a generic optimizer (positive elements reduce
    to rank-one projections)."""
    best = np.inf
    for rho in phi.densities:
        b = rho.shape[0]
        R = np.block([[rho.real, -rho.imag], [rho.imag, rho.real]])

        def f(z):
            n = z @ z
            q = z @ R @ z / n
            return q, 2 * (R @ z - q * z) / n

        for _ in range(starts):
            res = minimize(f, rng.standard_normal(2 * b), jac=True, method="BFGS",
                           options={"gtol": 1e-14, "maxiter": 10000})
            best = min(best, res.fun)
    return 1 / best


@lru_cache(maxsize=None)
def all_unital_embeddings(max_total):
    return tuple(unital_embeddings(max_total))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
