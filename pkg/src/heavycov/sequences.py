"""Finite coefficient sequences: rearrangement, lp and weak-lp norms."""

from __future__ import annotations

import numpy as np

from .errors import ContractError

_SIMPLEX_SLACK = 1e-12


def _vector(a) -> np.ndarray:
    v = np.asarray(a, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ContractError("sequence has non-finite entries")
    return v


def rearrange_desc(a) -> tuple[np.ndarray, np.ndarray]:
    """Sorted |a|, largest first, with the permutation that produced it.

    Ties keep their original order, so ``abs(a)[perm]`` equals the result.
    """
    v = np.abs(_vector(a))
    perm = np.argsort(-v, kind="stable")
    return v[perm], perm


def lp_norm(a, p: float) -> float:
    v = np.abs(_vector(a))
    if p == np.inf:
        return float(v.max(initial=0.0))
    if p < 1:
        raise ContractError("p must be >= 1")
    return float(np.sum(v**p) ** (1.0 / p))


def weak_lp_norm(a, p: float) -> float:
    """max_i a*_i i^(1/p); for a finite sequence this is the exact infimum."""
    if p < 1:
        raise ContractError("p must be >= 1")
    s, _ = rearrange_desc(a)
    if s.size == 0:
        return 0.0
    ranks = np.arange(1, s.size + 1, dtype=float)
    return float(np.max(s * ranks ** (1.0 / p)))


def order_stat_bound(lam, a, K: int) -> tuple[float, float]:
    """(sum lam_i a_i, mean of the K largest |a_i|).

    Under ||lam||_1 <= 1 and ||lam||_inf <= 1/K the first never exceeds the
    second: the extreme points of that polytope put weight +-1/K on K entries.
    """
    lam_v, a_v = _vector(lam), _vector(a)
    if lam_v.shape != a_v.shape:
        raise ContractError("lambda and a must have equal lengths")
    if int(K) != K or K < 1:
        raise ContractError("K must be an integer >= 1")
    K = int(K)
    if np.abs(lam_v).sum() > 1 + _SIMPLEX_SLACK:
        raise ContractError("||lambda||_1 exceeds 1")
    if np.abs(lam_v).max(initial=0.0) > 1.0 / K + _SIMPLEX_SLACK:
        raise ContractError("||lambda||_inf exceeds 1/K")
    top, _ = rearrange_desc(a_v)
    return float(lam_v @ a_v), float(top[:K].sum() / K)
