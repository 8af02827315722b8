"""Sample covariance, its error, and empirical probes of the inequalities
that control it for heavy-tailed vectors."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import VectorModel, model_covariance, sample
from .errors import ContractError
from .linalg import as_symmetric, op_norm
from .rng import stream
from .sequences import rearrange_desc

_MAGIC = b"HCSAMP01"


@dataclass(frozen=True)
class SampleSet:
    samples: np.ndarray  # (N, n)
    model: VectorModel | None = None
    seed: int | None = None

    def __post_init__(self):
        X = np.asarray(self.samples, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ContractError("samples must be a non-empty (N, n) array")
        if not np.all(np.isfinite(X)):
            raise ContractError("samples must be finite")
        object.__setattr__(self, "samples", X)

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @classmethod
    def draw(cls, model: VectorModel, N: int, seed: int) -> "SampleSet":
        return cls(sample(model, N, seed), model, seed)


def save_samples(s: SampleSet, path) -> None:
    """Binary layout: magic, u64 header length, JSON header, then N*n float64 (LE, row-major)."""
    header = json.dumps({"n": s.n, "N": s.N, "seed": s.seed,
                         "model": s.model.to_dict() if s.model else None},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(s.samples, dtype="<f8").tobytes())


def load_samples(path) -> SampleSet:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise ContractError("not a sample-set file")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    data = np.frombuffer(raw[16 + hlen:], dtype="<f8")
    if data.size != header["N"] * header["n"]:
        raise ContractError("sample-set payload has the wrong length")
    model = VectorModel.from_dict(header["model"]) if header["model"] else None
    return SampleSet(data.reshape(header["N"], header["n"]).astype(float), model, header["seed"])


def _rows(s) -> np.ndarray:
    return s.samples if isinstance(s, SampleSet) else np.asarray(s, dtype=float)


def sample_covariance(s) -> np.ndarray:
    X = _rows(s)
    C = X.T @ X / X.shape[0]
    return 0.5 * (C + C.T)


def estimation_error(sigma_N, sigma) -> float:
    A, B = np.asarray(sigma_N, dtype=float), np.asarray(sigma, dtype=float)
    if A.shape != B.shape:
        raise ContractError(f"shape mismatch {A.shape} vs {B.shape}")
    as_symmetric(A)
    as_symmetric(B)
    D = A - B
    return op_norm(0.5 * (D + D.T))


def subgaussian_predicted_error(n: int, N: int, delta: float, c_bernstein: float = 0.25) -> float:
    """sqrt((4/c) log2(2/delta) n/N): the net-plus-Bernstein deviation level."""
    if not 1 <= n <= N:
        raise ContractError("need 1 <= n <= N")
    if not 0 < delta <= 1:
        raise ContractError("delta must lie in (0, 1]")
    return math.sqrt((4.0 / c_bernstein) * math.log2(2.0 / delta) * n / N)


def _unit_rows(rng, k: int, n: int) -> np.ndarray:
    D = rng.standard_normal((k, n))
    return D / np.linalg.norm(D, axis=1, keepdims=True)


def _top_directions(M: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    return np.stack([V[:, -1], V[:, 0]])


@dataclass
class ProfileReport:
    rows: list = field(default_factory=list)

    @property
    def constant(self) -> float:
        return max((r["ratio"] for r in self.rows), default=0.0)

    def to_dict(self) -> dict:
        return {"constant": self.constant, "rows": self.rows}


def weak_l2_profile(s, subset_sizes, n_directions: int = 64, t: float = 1.0,
                    q: float = 8.0, seed: int = 0, n_subsets: int = 8) -> ProfileReport:
    """Probe max over x of ||(<X_i, x>)_{i in E}||_{2,inf}^2 against n + t^2 (N/|E|)^{4/q} |E|.

    Directions are random plus the extreme eigenvectors of sum_{E} X_i X_i^T.
    The maximum over probes is a lower estimate of the true supremum.
    """
    if q <= 4:
        raise ContractError("q must exceed 4")
    X = _rows(s)
    N, n = X.shape
    rng = stream(seed)
    rep = ProfileReport()
    for size in subset_sizes:
        size = int(size)
        if not 1 <= size <= N:
            raise ContractError(f"subset size {size} outside [1, {N}]")
        worst = 0.0
        for _ in range(n_subsets):
            E = rng.choice(N, size=size, replace=False)
            XE = X[E]
            D = np.vstack([_unit_rows(rng, n_directions, n), _top_directions(XE.T @ XE)])
            for x in D:
                top, _ = rearrange_desc(XE @ x)
                worst = max(worst, float(np.max(top**2 * np.arange(1, size + 1))))
        bound = n + t * t * (N / size) ** (4.0 / q) * size
        rep.rows.append({"size": size, "lhs": worst, "bound": bound, "ratio": worst / bound,
                         "subsets": n_subsets, "directions": n_directions + 2})
    return rep


def orthogonality_profile(s, subset_sizes, t: float = 1.0, q: float = 8.0, seed: int = 0,
                          n_subsets: int = 8) -> ProfileReport:
    """max over sampled E and all k of (1/|E|) sum_{i in E, i != k} <X_i, X_k>^2,
    against t^2 (N/|E|)^{4/q} n."""
    if q <= 4:
        raise ContractError("q must exceed 4")
    X = _rows(s)
    N, n = X.shape
    G2 = (X @ X.T) ** 2
    diag = np.diag(G2).copy()
    rng = stream(seed)
    rep = ProfileReport()
    for size in subset_sizes:
        size = int(size)
        if not 1 <= size <= N:
            raise ContractError(f"subset size {size} outside [1, {N}]")
        worst = 0.0
        for _ in range(n_subsets if size < N else 1):
            E = np.arange(N) if size == N else rng.choice(N, size=size, replace=False)
            col = G2[E].sum(axis=0)
            inE = np.zeros(N, bool)
            inE[E] = True
            col = col - np.where(inE, diag, 0.0)
            worst = max(worst, float(col.max()) / size)
        bound = t * t * (N / size) ** (4.0 / q) * n
        rep.rows.append({"size": size, "lhs": worst, "bound": bound, "ratio": worst / bound,
                         "subsets": n_subsets})
    return rep


def large_coeff_set(s, x, B: float) -> np.ndarray:
    """Indices i with |<X_i, x>| >= B."""
    if B <= 0:
        raise ContractError("B must be positive")
    return np.flatnonzero(np.abs(_rows(s) @ np.asarray(x, dtype=float)) >= B)


@dataclass(frozen=True)
class TruncationReport:
    B: float
    I1_term: float
    I2_term: float
    I3_term: float
    I3_bound: float
    E_B_sizes: dict
    E_B_shape: float  # n / B^2 + N (t / B)^{q/2}
    t: float
    n_directions: int

    @property
    def total(self) -> float:
        return self.I1_term + self.I2_term + self.I3_term

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["E_B_sizes"] = {str(k): v for k, v in self.E_B_sizes.items()}
        d["total"] = self.total
        return d


def truncation_level(n: int, N: int, q: float) -> float:
    return (N / n) ** (2.0 / q)


def _probe_directions(X: np.ndarray, sigma: np.ndarray, rng, k: int) -> np.ndarray:
    C = sample_covariance(X) - sigma
    return np.vstack([_unit_rows(rng, k, X.shape[1]), _top_directions(C)])


def large_part(X: np.ndarray, D: np.ndarray, B: float) -> np.ndarray:
    """(1/N) sum over |<X_i, x>| >= B of <X_i, x>^2, one value per row x of D."""
    P = X @ D.T
    return np.where(np.abs(P) >= B, P * P, 0.0).sum(axis=0) / X.shape[0]


def truncation_split(s: SampleSet, q: float, t: float = 1.0, n_directions: int = 32,
                     seed: int = 0, n_resample: int = 100_000, B: float | None = None,
                     model: VectorModel | None = None) -> TruncationReport:
    """Evaluate the three terms of the truncation bound at level B = (N/n)^{2/q}.

    The third term needs the law itself; it is estimated from a fresh sample
    of ``n_resample`` vectors of the model, shared by all probe directions.
    """
    if q <= 4:
        raise ContractError("q must exceed 4")
    X = _rows(s)
    N, n = X.shape
    if not 4 <= n <= N:
        raise ContractError("need N >= n >= 4")
    model = model or (s.model if isinstance(s, SampleSet) else None)
    if model is None:
        raise ContractError("truncation_split needs the model to estimate the third term")
    sigma = model_covariance(model)
    level = truncation_level(n, N, q) if B is None else float(B)
    rng = stream(seed)
    D = _probe_directions(X, sigma, rng, n_directions)
    I2 = float(np.max(large_part(X, D, level)))
    P = np.abs(X @ D.T)
    sizes = {i: int(np.sum(P[:, i] >= level)) for i in range(D.shape[0])}
    fresh = sample(model, n_resample, int(rng.integers(0, 2**62)))
    I3 = float(np.max(large_part(fresh, D, level)))
    return TruncationReport(B=level, I1_term=level * math.sqrt(n / N), I2_term=I2, I3_term=I3,
                            I3_bound=level ** (2.0 - q), E_B_sizes=sizes,
                            E_B_shape=n / level**2 + N * (t / level) ** (q / 2.0),
                            t=float(t), n_directions=int(D.shape[0]))


def subset_norm_sweep(s, sizes, trials: int = 8, p: float = 6.0, q: float = 8.0,
                      t: float = 1.0, seed: int = 0) -> ProfileReport:
    """||sum_{i in E} X_i X_i^T|| over random E, divided by
    t^2 (log2 log2 |E|)^2 [n + (N/|E|)^{4/p} |E|]."""
    if not 4 < p < q:
        raise ContractError("need 4 < p < q")
    X = _rows(s)
    N, n = X.shape
    rng = stream(seed)
    rep = ProfileReport()
    for size in sizes:
        size = int(size)
        if not 4 <= size <= N:
            raise ContractError(f"subset size {size} outside [4, {N}]")
        shape = t * t * math.log2(math.log2(size)) ** 2 * (n + (N / size) ** (4.0 / p) * size)
        worst = 0.0
        for _ in range(trials):
            E = rng.choice(N, size=size, replace=False)
            XE = X[E]
            worst = max(worst, op_norm(XE.T @ XE))
        rep.rows.append({"size": size, "lhs": worst, "bound": shape, "ratio": worst / shape,
                         "subsets": trials})
    return rep
