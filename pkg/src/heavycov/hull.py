"""Minimum-norm point of the convex hull of finitely many vectors."""

from __future__ import annotations

import numpy as np

from .errors import ContractError, ConvergenceError

_REFRESH = 200


def min_norm_point(points, tol: float = 1e-10, max_iter: int = 200_000):
    """Pairwise Frank-Wolfe with exact line search.

    Works entirely with the Gram matrix, so each step costs O(m). Stops when
    the Frank-Wolfe gap ||v||^2 - min_i <u_i, v> drops to ``tol``, which is
    precisely the optimality certificate <u_i, v> >= ||v||^2 - tol.

    Returns (v, weights).
    """
    U = np.asarray(points, dtype=float)
    if U.ndim == 1:
        U = U[None, :]
    if U.shape[0] == 0:
        raise ContractError("need at least one point")
    if tol <= 0:
        raise ContractError("tol must be positive")
    m = U.shape[0]
    G = U @ U.T
    lam = np.zeros(m)
    lam[int(np.argmin(np.diag(G)))] = 1.0
    g = G @ lam
    fresh = True
    for it in range(max_iter):
        if it % _REFRESH == 0 and not fresh:
            g = G @ lam
            fresh = True
        vv = float(lam @ g)
        s = int(np.argmin(g))
        if vv - float(g[s]) <= tol:
            if fresh:
                break
            g = G @ lam  # confirm against drift before stopping
            fresh = True
            continue
        fresh = False
        active = np.flatnonzero(lam > 0)
        a = int(active[np.argmax(g[active])])
        d2 = G[s, s] + G[a, a] - 2.0 * G[s, a]
        if d2 <= 0.0:
            break  # u_s == u_a numerically; nothing left to move
        step = min(float(lam[a]), float(g[a] - g[s]) / d2)
        lam[s] += step
        if step == lam[a]:
            lam[a] = 0.0
        else:
            lam[a] -= step
        g += step * (G[:, s] - G[:, a])
    v = lam @ U
    gap = float(v @ v - np.min(U @ v))
    if gap > tol:
        raise ConvergenceError(
            f"min-norm point gap {gap:.3g} above tol after {max_iter} iterations",
            best=(v, lam), achieved=gap,
        )
    return v, lam
