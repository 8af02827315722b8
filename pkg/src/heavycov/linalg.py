"""Operator norm and extreme eigenvalues of dense symmetric matrices.

Power iteration is the workhorse. When the Rayleigh residual stops
shrinking (two eigenvalues of equal modulus and opposite sign, or a tiny
spectral gap) we switch to repeated squaring of A², which converges to the
projector onto the dominant eigenspace of A² regardless of sign ties.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, ConvergenceError
from .rng import stream

SYMMETRY_RTOL = 1e-12
_STAGNATION_WINDOW = 25


def as_symmetric(A) -> np.ndarray:
    M = np.array(A, dtype=float, copy=True)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ContractError(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ContractError("matrix has non-finite entries")
    scale = float(np.abs(M).max())
    if scale > 0 and float(np.abs(M - M.T).max()) > SYMMETRY_RTOL * scale:
        raise ContractError("matrix is not symmetric")
    return M


def _power(A: np.ndarray, v: np.ndarray, tol: float, max_iter: int):
    """Plain power iteration.

    Returns (|theta|, converged). Gives up early (converged=False) when the
    residual fails to halve over a window of iterations.
    """
    theta = 0.0
    window_res = np.inf
    for it in range(max_iter):
        w = A @ v
        theta = float(v @ w)
        res = float(np.linalg.norm(w - theta * v))
        if res <= tol * abs(theta):
            return abs(theta), True
        if it % _STAGNATION_WINDOW == 0:
            if res > 0.5 * window_res:
                break
            window_res = res
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            break
        v = w / nw
    return abs(theta), False


def _squaring(A: np.ndarray, rng: np.random.Generator, tol: float, max_squarings: int = 80):
    """Dominant |eigenvalue| via S <- S^2 / ||S^2||_F starting from S = A^2."""
    S = A @ A
    S = 0.5 * (S + S.T)
    S /= np.linalg.norm(S)
    for _ in range(max_squarings):
        S2 = S @ S
        S2 = 0.5 * (S2 + S2.T)
        S2 /= np.linalg.norm(S2)
        done = np.linalg.norm(S2 - S) <= 1e-14
        S = S2
        if done:
            break
    v = S @ rng.standard_normal(A.shape[0])
    if np.linalg.norm(v) < 1e-8:
        v = S[:, int(np.argmax(np.linalg.norm(S, axis=0)))].copy()
    v /= np.linalg.norm(v)
    # a few steps on A^2 polish the vector and give a residual to judge by
    mu, res = 0.0, np.inf
    for _ in range(60):
        Av = A @ v
        w = A @ Av
        mu = float(Av @ Av)
        res = float(np.linalg.norm(w - mu * v))
        if res <= tol * mu:
            return float(np.sqrt(mu)), res / mu, True
        v = w / np.linalg.norm(w)
    return float(np.sqrt(mu)), res / mu if mu > 0 else np.inf, False


def _dominant_abs(A: np.ndarray, tol: float, max_iter: int, seed: int) -> float:
    if not A.any():
        return 0.0
    if A.shape[0] == 1:
        return abs(float(A[0, 0]))
    rng = stream(seed)
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    est, ok = _power(A, v, tol, max_iter)
    if ok:
        return est
    est2, rel, ok = _squaring(A, rng, max(tol, 1e-13))
    if ok:
        return est2
    raise ConvergenceError(
        "power iteration did not converge", best=max(est, est2), achieved=rel
    )


def op_norm(A, tol: float = 1e-10, max_iter: int = 5000, seed: int = 0) -> float:
    """Largest |eigenvalue| of a symmetric matrix, to relative accuracy ~tol."""
    if tol <= 0:
        raise ContractError("tol must be positive")
    return _dominant_abs(as_symmetric(A), tol, max_iter, seed)


def extreme_eigs(A, tol: float = 1e-10, max_iter: int = 5000, seed: int = 0) -> tuple[float, float]:
    """(lambda_max, lambda_min) of a symmetric matrix.

    Both come from power iteration on positive shifts A + cI and cI - A with
    c = op_norm(A), so the dominant eigenvalue of each shift is the one we want.
    """
    M = as_symmetric(A)
    if tol <= 0:
        raise ContractError("tol must be positive")
    n = M.shape[0]
    if n == 1:
        return float(M[0, 0]), float(M[0, 0])
    c = _dominant_abs(M, tol, max_iter, seed)
    if c == 0.0:
        return 0.0, 0.0
    eye = np.eye(n)
    top = _dominant_abs(M + c * eye, tol, max_iter, seed + 1) - c
    bottom = c - _dominant_abs(c * eye - M, tol, max_iter, seed + 2)
    # the shifts can push either end a hair past the other for rank-one-like spectra
    return max(top, bottom), min(top, bottom)
