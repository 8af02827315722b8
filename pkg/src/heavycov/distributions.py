"""Isotropic random-vector models, moment certificates and tight frames."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np

from .errors import ContractError
from .linalg import op_norm
from .rng import stream

KINDS = ("gaussian", "cube", "cross_polytope", "simplex", "discrete_frame", "pareto_product")

# Monte-Carlo calibration of isotropic scales: seed and size are part of the
# contract so cached constants are reproducible.
SCALE_SEED = 20_240_611
SCALE_SAMPLES = 1_000_000
_CHUNK = 50_000


@dataclass(frozen=True)
class VectorModel:
    kind: str
    n: int
    q: float | None = None
    K: float | None = None
    L: float | None = None
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if int(self.n) != self.n or self.n < 1:
            raise ContractError("n must be a positive integer")
        if self.kind == "discrete_frame":
            pts = self.params.get("frame")
            if pts is None:
                raise ContractError("discrete_frame model needs params['frame']")
            arr = np.asarray(pts, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != self.n:
                raise ContractError("frame points must be an (M, n) array")
            if self.truncated:
                raise ContractError("truncation is not supported for discrete_frame")
        if self.truncated and (self.K is None or self.K <= 0):
            raise ContractError("truncation requires a positive K")

    @property
    def truncated(self) -> bool:
        return bool(self.params.get("truncate", False))

    def to_dict(self) -> dict:
        params = {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v)
                  for k, v in self.params.items()}
        return {"kind": self.kind, "n": self.n, "q": self.q, "K": self.K, "L": self.L,
                "params": params, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "VectorModel":
        unknown = set(d) - {"kind", "n", "q", "K", "L", "params", "seed"}
        if unknown:
            raise ContractError(f"unknown model fields {sorted(unknown)}")
        if "kind" not in d or "n" not in d:
            raise ContractError("model needs 'kind' and 'n'")
        return cls(kind=d["kind"], n=int(d["n"]), q=d.get("q"), K=d.get("K"), L=d.get("L"),
                   params=dict(d.get("params") or {}), seed=d.get("seed"))

    @classmethod
    def from_json(cls, text: str) -> "VectorModel":
        return cls.from_dict(json.loads(text))


def basis_frame_model(n: int) -> VectorModel:
    """Uniform draw from the n coordinate vectors scaled to length sqrt(n)."""
    return VectorModel("discrete_frame", n, K=1.0, params={"frame": np.eye(n)})


# ---- raw samplers (before isotropic scaling and truncation) ----

def _pareto_coords(rng, shape, q_tail: float) -> np.ndarray:
    # |Y| = t0 U^{-1/q}: density ~ t^{-(q+1)} on [t0, inf); t0 makes E Y^2 = 1
    t0 = np.sqrt((q_tail - 2.0) / q_tail)
    mag = t0 * rng.random(shape) ** (-1.0 / q_tail)
    return np.where(rng.random(shape) < 0.5, -mag, mag)


def _l1_ball(rng, N: int, n: int) -> np.ndarray:
    # (E_1..E_n)/(E_1+..+E_{n+1}) is uniform on the positive part of the l1 ball
    E = rng.standard_exponential((N, n + 1))
    x = E[:, :n] / E.sum(axis=1, keepdims=True)
    return x * rng.choice((-1.0, 1.0), size=(N, n))


@lru_cache(maxsize=None)
def _simplex_vertices(n: int) -> np.ndarray:
    # n+1 unit vectors in R^n summing to zero: centre the standard basis of
    # R^{n+1} and express it in an orthonormal basis of the hyperplane
    E = np.eye(n + 1) - 1.0 / (n + 1)
    U, _, _ = np.linalg.svd(E)
    V = E @ U[:, :n]
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def _simplex_body(rng, N: int, n: int) -> np.ndarray:
    w = rng.dirichlet(np.ones(n + 1), size=N)
    return w @ _simplex_vertices(n)


def _raw(kind: str, rng, N: int, n: int, params: dict) -> np.ndarray:
    if kind == "gaussian":
        return rng.standard_normal((N, n))
    if kind == "cube":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(N, n))
    if kind == "cross_polytope":
        return _l1_ball(rng, N, n) / np.sqrt(_second_moment("cross_polytope", n))
    if kind == "simplex":
        return _simplex_body(rng, N, n) / np.sqrt(_second_moment("simplex", n))
    if kind == "pareto_product":
        return _pareto_coords(rng, (N, n), float(params.get("q_tail", 6.0)))
    if kind == "discrete_frame":
        F = _scaled_frame(np.asarray(params["frame"], dtype=float))
        X = F[rng.integers(0, F.shape[0], size=N)]
        # a random sign makes the law symmetric, hence mean zero, without
        # changing x x^T
        return X * rng.choice((-1.0, 1.0), size=(N, 1))
    raise ContractError(f"unknown model kind {kind!r}")


def _scaled_frame(F: np.ndarray) -> np.ndarray:
    """Rescale a frame so (1/M) sum x x^T = I.

    Point lengths keep their ratios; for a frame of equal-norm points every
    point ends up with length sqrt(n).
    """
    S = F.T @ F / F.shape[0]
    lam = np.linalg.eigvalsh(S)
    if lam[0] <= 1e-12 * max(lam[-1], 1e-300) or np.ptp(lam) > 1e-8 * lam[-1]:
        raise ContractError("frame points are not a tight frame; use make_tight_frame first")
    return F / np.sqrt(lam.mean())


@lru_cache(maxsize=None)
def _second_moment(kind: str, n: int) -> float:
    """E||x||^2 / n for the unscaled body, estimated once by Monte Carlo."""
    rng = stream(SCALE_SEED, n, KINDS.index(kind))
    body = _l1_ball if kind == "cross_polytope" else _simplex_body
    total = 0.0
    done = 0
    while done < SCALE_SAMPLES:
        k = min(_CHUNK, SCALE_SAMPLES - done)
        X = body(rng, k, n)
        total += float(np.einsum("ij,ij->", X, X))
        done += k
    return total / (SCALE_SAMPLES * n)


def isotropic_scale(kind: str, n: int) -> float:
    """Factor by which the unit l1 ball / regular simplex is divided to be isotropic."""
    if kind not in ("cross_polytope", "simplex"):
        raise ContractError("only cross_polytope and simplex are rescaled numerically")
    return float(np.sqrt(_second_moment(kind, n)))


def _project(X: np.ndarray, radius: float) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    over = norms > radius
    if np.any(over):
        X = X.copy()
        X[over] *= (radius / norms[over])[:, None]
        # rounding can leave the norm one ulp above the radius
        still = np.linalg.norm(X, axis=1) > radius
        while np.any(still):
            X[still] *= np.nextafter(1.0, 0.0)
            still = np.linalg.norm(X, axis=1) > radius
    return X


def sample(model: VectorModel, N: int, seed: int) -> np.ndarray:
    """N independent draws as an (N, n) array; bit-identical for a fixed seed."""
    if int(N) != N or N < 1:
        raise ContractError("N must be a positive integer")
    rng = stream(seed)
    X = _raw(model.kind, rng, int(N), model.n, model.params)
    if model.truncated:
        X = _project(X, model.K * np.sqrt(model.n))
    return X


@lru_cache(maxsize=None)
def _truncated_variance(model_json: str) -> float:
    model = VectorModel.from_json(model_json)
    total = 0.0
    for c in range(SCALE_SAMPLES // _CHUNK):
        X = sample(model, _CHUNK, seed=SCALE_SEED + c)
        total += float(np.einsum("ij,ij->", X, X))
    return total / (SCALE_SAMPLES * model.n)


def model_covariance(model: VectorModel) -> np.ndarray:
    """The true covariance E XX^T.

    Every built-in law is isotropic. Radial truncation keeps the law
    invariant under coordinate permutations and sign flips, so it stays a
    multiple of the identity; the multiple is calibrated by Monte Carlo.
    """
    if not model.truncated:
        return np.eye(model.n)
    return _truncated_variance(model.to_json()) * np.eye(model.n)


@dataclass(frozen=True)
class MomentCertificate:
    K_hat: float
    L_hat: float
    q: float
    n_samples: int
    n_directions: int
    seed: int
    truncated: bool


def certify_moments(model: VectorModel, q: float, n_samples: int = 100_000,
                    n_directions: int = 64, seed: int = 0) -> MomentCertificate:
    """Empirical K and L. L_hat is a maximum over finitely many probes, not the true sup."""
    if q <= 2:
        raise ContractError("q must exceed 2")
    X = sample(model, n_samples, seed)
    dirs = stream(seed, 1).standard_normal((n_directions, model.n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    K_hat = float(np.max(np.linalg.norm(X, axis=1)) / np.sqrt(model.n))
    moments = np.mean(np.abs(X @ dirs.T) ** q, axis=0)
    L_hat = float(np.max(moments) ** (1.0 / q))
    return MomentCertificate(K_hat, L_hat, float(q), int(n_samples), int(n_directions),
                             int(seed), model.truncated)


@dataclass(frozen=True)
class Frame:
    points: np.ndarray  # (M, n)

    @property
    def M(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def defect(self) -> float:
        return parseval_defect(self.points, self.M)


def make_tight_frame(raw_points) -> Frame:
    """Whiten raw points by S^{-1/2}, S = (1/M) sum x x^T, giving a tight frame."""
    P = np.asarray(raw_points, dtype=float)
    if P.ndim != 2:
        raise ContractError("raw points must form an (M, n) array")
    M, n = P.shape
    if M < n:
        raise ContractError(f"need at least n={n} points, got {M}")
    S = P.T @ P / M
    w, V = np.linalg.eigh(S)
    cutoff = 1e-12 * max(float(w[-1]), 1e-300)
    rank = int(np.sum(w > cutoff))
    if rank < n:
        raise ContractError(f"raw points span a subspace of rank {rank} < n={n}")
    W = (V / np.sqrt(w)) @ V.T
    out = P @ W
    # a second whitening pass removes the rounding left by the first
    S2 = out.T @ out / M
    w2, V2 = np.linalg.eigh(S2)
    out = out @ ((V2 / np.sqrt(w2)) @ V2.T)
    return Frame(out)


def parseval_defect(frame_subset, M_effective: int) -> float:
    """|| (1/M_effective) sum x x^T - I || for the given points."""
    P = np.asarray(frame_subset, dtype=float)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ContractError("need a non-empty (k, n) array of points")
    if M_effective <= 0:
        raise ContractError("M_effective must be positive")
    D = P.T @ P / M_effective - np.eye(P.shape[1])
    return op_norm(0.5 * (D + D.T))
