"""Independent reference computations used only by the test suite.

None of these import heavycov: they are the second route against which
the package's own routines are compared.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def jacobi_eigvalsh(A, sweeps: int = 60, tol: float = 1e-15) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by parallel cyclic Jacobi rotations.

    Each round pairs all indices with a round-robin schedule and applies the
    n/2 disjoint rotations at once as one orthogonal matrix.
    """
    M = np.array(A, dtype=float)
    n = M.shape[0]
    if n == 1:
        return M.diagonal().copy()
    idx = list(range(n)) + ([-1] if n % 2 else [])
    size = len(idx)
    scale = np.linalg.norm(M)
    if scale == 0:
        return np.zeros(n)
    for _ in range(sweeps):
        off = np.linalg.norm(M - np.diag(M.diagonal()))
        if off <= tol * scale:
            break
        order = idx[:]
        for _round in range(size - 1):
            Jm = np.eye(n)
            for k in range(size // 2):
                p, q = order[k], order[size - 1 - k]
                if p < 0 or q < 0:
                    continue
                apq = M[p, q]
                if apq == 0.0:
                    continue
                tau = (M[q, q] - M[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                Jm[p, p] = c
                Jm[q, q] = c
                Jm[p, q] = s
                Jm[q, p] = -s
            M = Jm.T @ M @ Jm
            M = 0.5 * (M + M.T)
            order = [order[0]] + [order[-1]] + order[1:-1]
    return np.sort(M.diagonal())


def grid_min_norm(points, coarse: int = 40, refine_top: int = 8) -> float:
    """Smallest norm over the hull, by brute force over all supports of size <= 3.

    Each support's simplex is searched on a grid and the best cells refined;
    in R^n with m points the true minimiser is attained on some support,
    and in low dimension three points usually suffice for the tests here.
    """
    U = np.asarray(points, dtype=float)
    m = U.shape[0]
    best = min(float(np.linalg.norm(u)) for u in U)
    w = np.linspace(0.0, 1.0, coarse + 1)
    cands = []
    for i, j in itertools.combinations(range(m), 2):
        V = np.outer(w, U[i]) + np.outer(1 - w, U[j])
        nr = np.linalg.norm(V, axis=1)
        k = int(np.argmin(nr))
        cands.append((float(nr[k]), (i, j), (w[k],)))
    A, B = np.meshgrid(w, w, indexing="ij")
    mask = A + B <= 1.0 + 1e-12
    a_flat, b_flat = A[mask], B[mask]
    for i, j, k in itertools.combinations(range(m), 3):
        V = np.outer(a_flat, U[i]) + np.outer(b_flat, U[j]) + np.outer(1 - a_flat - b_flat, U[k])
        nr = np.linalg.norm(V, axis=1)
        t = int(np.argmin(nr))
        cands.append((float(nr[t]), (i, j, k), (a_flat[t], b_flat[t])))
    cands.sort(key=lambda c: c[0])
    best = min(best, cands[0][0])
    for _, sup, start in cands[:refine_top]:
        best = min(best, _refine(U[list(sup)], start))
    return best


def _refine(P, start) -> float:
    # shrinking-box pattern search on the barycentric coordinates
    x = np.array(start, dtype=float)
    h = 0.05
    def value(z):
        if np.any(z < -1e-15) or z.sum() > 1 + 1e-15:
            return np.inf
        lam = np.append(z, 1.0 - z.sum())
        return float(np.linalg.norm(lam @ P))
    fx = value(x)
    while h > 1e-9:
        moved = False
        for d in itertools.product((-1, 0, 1), repeat=x.size):
            if not any(d):
                continue
            y = x + h * np.array(d, dtype=float)
            fy = value(y)
            if fy < fx:
                x, fx, moved = y, fy, True
        if not moved:
            h *= 0.5
    return fx


def missing_coupon_probability(n: int, N: int) -> float:
    """Exact P(some of n equally likely coupons is unseen after N draws).

    Inclusion-exclusion in exact rational arithmetic.
    """
    total = Fraction(0)
    for k in range(1, n + 1):
        total += (-1) ** (k + 1) * math.comb(n, k) * Fraction(n - k, n) ** N
    return float(total)


def coupon_union_bound(n: int, N: int) -> float:
    return n * (1.0 - 1.0 / n) ** N


def max_count_tail(n: int, N: int, threshold: int) -> float:
    """Union bound on P(some coupon is drawn >= threshold times in N draws)."""
    p = Fraction(1, n)
    tail = sum(math.comb(N, k) * p**k * (1 - p) ** (N - k) for k in range(threshold, N + 1))
    return min(1.0, float(n * tail))


def l1_ball_second_moment(n: int) -> float:
    """E x_1^2 for x uniform on the unit l1 ball of R^n."""
    return 2.0 / ((n + 1) * (n + 2))
