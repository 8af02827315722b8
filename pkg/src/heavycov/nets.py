"""Greedy packings of the unit sphere used as eps-nets.

A random candidate is kept when it lies farther than eps from every kept
point. A maximal packing is automatically an eps-cover, but random
candidates only approximate maximality; in dimensions 1 to 3 we finish the
packing over a deterministic grid and can then verify coverage on that
grid. Elsewhere the cover is a heuristic and the net is only trusted for
lower bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ContractError
from .linalg import as_symmetric
from .rng import stream


@dataclass(frozen=True)
class EpsNet:
    eps: float
    points: np.ndarray  # (k, n), unit rows
    ambient_dim: int
    incomplete: bool
    rejection_streak: int
    verified_cover: bool
    grid_cover_radius: float | None = None

    def __len__(self) -> int:
        return self.points.shape[0]


class NetEstimate(NamedTuple):
    lower: float
    certified_upper: float
    heuristic: bool


def sphere_grid(n: int, resolution: float) -> np.ndarray:
    """Roughly uniform unit vectors with spacing about ``resolution`` (n <= 3)."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        k = int(np.ceil(2 * np.pi / resolution))
        t = np.arange(k) * (2 * np.pi / k)
        return np.column_stack([np.cos(t), np.sin(t)])
    if n == 3:
        # Fibonacci lattice; area per point ~ resolution^2
        k = int(np.ceil(4 * np.pi / resolution**2))
        i = np.arange(k) + 0.5
        z = 1 - 2 * i / k
        r = np.sqrt(1 - z * z)
        phi = np.pi * (1 + 5**0.5) * i
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    raise ContractError("grids are only built for n <= 3")


def _grid_resolution(n: int) -> float:
    return {1: 1.0, 2: 1e-3, 3: 2e-2}[n]


def epsilon_net(n: int, eps: float, seed: int, max_points: int = 10_000,
                streak_factor: int = 50, max_candidates: int = 2_000_000) -> EpsNet:
    if n < 1:
        raise ContractError("n must be >= 1")
    if not 0 < eps < 1:
        raise ContractError("eps must lie in (0, 1)")
    rng = stream(seed)
    # |p - c| > eps  <=>  <p, c> < 1 - eps^2 / 2 for unit vectors
    cos_cut = 1.0 - 0.5 * eps * eps
    pts = np.empty((max_points, n))
    k = 0
    streak = 0
    drawn = 0
    stopped_by_streak = False
    batch = 1024
    while k < max_points and drawn < max_candidates:
        cand = rng.standard_normal((batch, n))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        drawn += batch
        start = k
        blocked = (cand @ pts[:k].T).max(axis=1) >= cos_cut if k else np.zeros(batch, bool)
        for i, c in enumerate(cand):
            # earlier candidates of this batch may have joined the net meanwhile
            if not blocked[i] and (k == start or float(np.max(pts[start:k] @ c)) < cos_cut):
                pts[k] = c
                k += 1
                streak = 0
                if k == max_points:
                    break
            else:
                streak += 1
                if streak >= streak_factor * k:
                    stopped_by_streak = True
                    break
        if stopped_by_streak:
            break

    verified = False
    radius = None
    if n <= 3 and k < max_points:
        grid = sphere_grid(n, _grid_resolution(n))
        for g in grid:
            if float(np.max(pts[:k] @ g)) < cos_cut:
                pts[k] = g
                k += 1
                if k == max_points:
                    break
        if k < max_points:
            near = np.max(grid @ pts[:k].T, axis=1)
            radius = float(np.sqrt(max(0.0, 2.0 - 2.0 * near.min())))
            verified = radius <= eps
    incomplete = not stopped_by_streak and not verified
    return EpsNet(eps=float(eps), points=pts[:k].copy(), ambient_dim=n,
                  incomplete=incomplete, rejection_streak=streak,
                  verified_cover=verified, grid_cover_radius=radius)


def net_norm_estimate(A, net: EpsNet) -> NetEstimate:
    """max over the net of |<Ax, x>| and the (1 - 2 eps)^-1 inflation of it.

    The lower value never exceeds the operator norm. The upper value is a
    bound only when the net really covers the sphere; otherwise ``heuristic``
    is set.
    """
    if net.eps >= 0.5:
        raise ContractError("net eps must be below 1/2")
    M = as_symmetric(A)
    if M.shape[0] != net.ambient_dim:
        raise ContractError("matrix and net dimensions differ")
    P = net.points
    quad = np.einsum("ij,jk,ik->i", P, M, P)
    lower = float(np.max(np.abs(quad)))
    return NetEstimate(lower, lower / (1.0 - 2.0 * net.eps), not net.verified_cover)
