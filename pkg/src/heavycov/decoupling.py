"""Decoupling certificates.

Given vectors X_1..X_m and a direction x with many large |<X_i, x>|, find
disjoint index sets I, J and a unit y in span{X_j : j in J} such that every
X_i with i in I still has a large inner product with y. The construction:

1. b_i = <X_i, x>^2 / nbar and its dyadic structure give a set I1.
2. The min-norm point of {X_i / a_i : i in I1} gives a convex combination
   xbar = sum lam_i X_i / a_i with <X_i / a_i, xbar> >= 1 on I1.
3. A light block of lam inside I1 gives I2.
4. Maurey sampling replaces xbar by an average ybar of a few draws; indices
   of I2 that were never drawn and still see <X_k / a_k, ybar> >= 1/4 form I,
   the drawn indices (plus the heavy part of lam) form J.

Nothing is trusted: every certificate is re-verified by ``check_decoupling``
before it is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ContractError, ConvergenceError, DecouplingFailure, StructureError
from .hull import min_norm_point
from .rng import stream
from .structure import StructureConstants, extract_structure, loglog, refine_structure

NORM_TOL = 1e-10
SPAN_TOL = 1e-8
PERTURB = 1e-12


@dataclass(frozen=True)
class DecouplingParams:
    r: float = 1.0
    r_prime: float = 2.0
    r_double_prime: float = 2.0
    delta: float = 0.5
    alpha: float = 0.5
    C_alpha: float = 1.0
    K1: float = 1.0
    K2: float = 1.0
    K3: float = 1.0
    N: int | None = None  # ambient sample count; None means m
    tol: float = 1e-8
    structure_K: float | None = None  # None means 8 log log m
    norm_multiple: float | None = None  # None means 16 / alpha
    max_retries: int = 10
    structure: StructureConstants = field(default_factory=StructureConstants)

    def __post_init__(self):
        if not 1 <= self.r < min(self.r_prime, self.r_double_prime):
            raise ContractError("need 1 <= r < min(r', r'')")
        if not 0 < self.delta < 1 or not 0 < self.alpha < 1:
            raise ContractError("delta and alpha must lie in (0, 1)")
        if min(self.C_alpha, self.K1, self.K2, self.K3, self.tol) <= 0:
            raise ContractError("constants must be positive")
        if self.max_retries < 1:
            raise ContractError("max_retries must be >= 1")

    @property
    def C_alpha_prime(self) -> float:
        return self.C_alpha / self.alpha

    @property
    def ybar_multiple(self) -> float:
        return 16.0 / self.alpha if self.norm_multiple is None else self.norm_multiple

    def ambient_N(self, m: int) -> int:
        return m if self.N is None else int(self.N)

    def threshold(self, m: int, size_I: int) -> float:
        return self.K3**2 * (self.ambient_N(m) / size_I) ** (1.0 / self.r_double_prime)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["structure"] = asdict(self.structure)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DecouplingParams":
        d = dict(d)
        s = d.pop("structure", None)
        if s is not None:
            d["structure"] = StructureConstants(**s)
        return cls(**d)


@dataclass(frozen=True)
class DecouplingCertificate:
    I: np.ndarray
    J: np.ndarray
    y: np.ndarray
    threshold: float
    selection_record: np.ndarray  # drawn index per Maurey draw, -1 for the zero atom
    diagnostics: dict

    def to_dict(self) -> dict:
        return {"I": self.I.tolist(), "J": self.J.tolist(), "y": self.y.tolist(),
                "threshold": self.threshold,
                "selection_record": self.selection_record.tolist(),
                "diagnostics": self.diagnostics}


def _distinct(X: np.ndarray) -> np.ndarray:
    """Nudge exact duplicate rows apart by a tiny index-keyed amount."""
    _, counts = np.unique(X, axis=0, return_counts=True)
    if np.all(counts == 1):
        return X
    Y = X.copy()
    n = X.shape[1]
    seen = {}
    for i in range(X.shape[0]):
        key = X[i].tobytes()
        if key in seen:
            scale = max(float(np.linalg.norm(X[i])), 1.0)
            Y[i, i % n] += PERTURB * scale * (1 + (i // n) % 7)
        else:
            seen[key] = i
    return Y


def separation_witness(X, a, tol: float = 1e-8):
    """Unit xbar in conv{X_i/a_i} (scaled) with <X_i/a_i, xbar> >= 1 - tol for all i.

    Returns (xbar, lam) with xbar = sum lam_i X_i / a_i and sum lam_i <= 1.
    If the hull comes within 1 - tol of the origin no unit vector can have
    all inner products near 1, and ContractError is raised.
    """
    U = np.asarray(X, dtype=float)
    av = np.asarray(a, dtype=float).reshape(-1)
    if np.any(av == 0):
        raise ContractError("a_i must be non-zero")
    P = U / av[:, None]
    v, weights = min_norm_point(P, tol=tol / 4)
    nv = float(np.linalg.norm(v))
    if nv < 1 - tol:
        raise ContractError(f"no separation witness: hull distance {nv:.6g} < 1 - tol")
    xbar = v / nv
    lam = weights / nv
    worst = float(np.min(P @ xbar))
    if worst < 1 - tol:
        raise ContractError(f"no separation witness: min inner product {worst:.6g}")
    return xbar, lam


def maurey_select(X, lam, a, draws: int, residual_sum, seed):
    """Average of ``draws`` i.i.d. copies of V + residual_sum.

    V equals X_i / a_i with probability lam_i and 0 with the leftover mass.
    ``seed`` may be an int or a numpy Generator. Returns (ybar, record) where
    record[j] is the index drawn at step j or -1 for the zero atom.
    """
    U = np.asarray(X, dtype=float)
    lv = np.asarray(lam, dtype=float).reshape(-1)
    av = np.asarray(a, dtype=float).reshape(-1)
    if draws < 1:
        raise ContractError("draws must be >= 1")
    if np.any(lv < 0):
        raise ContractError("lambda must be non-negative")
    total = float(lv.sum())
    if total > 1 + 1e-12:
        raise ContractError("sum of lambda exceeds 1")
    rng = seed if isinstance(seed, np.random.Generator) else stream(int(seed))
    m = lv.size
    p = np.append(lv, max(0.0, 1.0 - total))
    p /= p.sum()
    picks = rng.choice(m + 1, size=int(draws), p=p)
    record = np.where(picks == m, -1, picks)
    hits = np.bincount(record[record >= 0], minlength=m)
    nz = np.flatnonzero(hits)
    ybar = np.asarray(residual_sum, dtype=float).copy()
    if nz.size:
        ybar = ybar + (hits[nz] / draws) @ (U[nz] / av[nz, None])
    return ybar, record


@dataclass
class DecouplingReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def text(self) -> str:
        lines = []
        for c in self.checks:
            mark = "PASS" if c["passed"] else "FAIL"
            lines.append(f"{mark}  {c['name']:<22} slack={c['slack']:.6g}")
        return "\n".join(lines)


def check_decoupling(cert: DecouplingCertificate, X, params: DecouplingParams) -> DecouplingReport:
    U = np.asarray(X, dtype=float)
    m = U.shape[0]
    I = np.asarray(cert.I, dtype=np.int64)
    J = np.asarray(cert.J, dtype=np.int64)
    y = np.asarray(cert.y, dtype=float)
    checks = []

    def add(name, slack, passed=None):
        checks.append({"name": name, "slack": float(slack),
                       "passed": bool(slack >= 0 if passed is None else passed)})

    add("I_nonempty", I.size - 1)
    add("J_nonempty", J.size - 1)
    valid = (I.size == 0 or (I.min() >= 0 and I.max() < m)) and (J.size == 0 or (J.min() >= 0 and J.max() < m))
    add("indices_in_range", 0.0 if valid else -1.0)
    overlap = np.intersect1d(I, J).size
    add("disjoint", -overlap)
    add("J_at_most_delta_I", params.delta * I.size - J.size)
    add("unit_norm", NORM_TOL - abs(float(np.linalg.norm(y)) - 1.0))
    if J.size and valid:
        B = U[J].T
        coef, *_ = np.linalg.lstsq(B, y, rcond=None)
        resid = float(np.linalg.norm(B @ coef - y))
    else:
        resid = np.inf
    add("y_in_span_of_J", SPAN_TOL - resid)
    if I.size and valid:
        thr = params.threshold(m, I.size)
        add("threshold_on_I", float(np.min((U[I] @ y) ** 2)) - thr)
    else:
        add("threshold_on_I", -np.inf)
    return DecouplingReport(checks)


def _attempt(U, a, b, nbar, params, rng, m):
    K = params.structure_K if params.structure_K is not None else 8.0 * loglog(m)
    try:
        cert = extract_structure(b, params.alpha, K, params.structure)
    except (StructureError, ContractError) as exc:
        raise DecouplingFailure("precondition-largeness", str(exc)) from exc
    I1 = cert.I1
    try:
        _, lam1 = separation_witness(U[I1], a[I1], params.tol)
    except (ContractError, ConvergenceError) as exc:
        raise DecouplingFailure("no-witness", str(exc)) from exc
    lam = np.zeros(m)
    lam[I1] = lam1
    try:
        refined = refine_structure(cert, lam)
    except StructureError as exc:
        raise DecouplingFailure("precondition-largeness", str(exc)) from exc
    n1, n2 = I1.size, refined.I2.size
    cap = params.C_alpha / n2
    light = lam <= cap
    I1p = I1[light[I1]]
    heavy = I1[~light[I1]]
    I2p = refined.I2[light[refined.I2]]
    draws = max(1, math.ceil(n2 / params.C_alpha_prime))
    P = U / np.where(a == 0, 1.0, a)[:, None]
    residual = lam[heavy] @ P[heavy] if heavy.size else np.zeros(U.shape[1])
    lam_light = np.zeros(m)
    lam_light[I1p] = lam[I1p]
    ybar, record = maurey_select(U, lam_light, np.where(a == 0, 1.0, a), draws, residual, rng)
    hits = np.bincount(record[record >= 0], minlength=m)

    Z = {}
    chosen = []
    for k in I2p:
        # drop the draws that landed on k itself before measuring
        yk = ybar - (hits[k] / draws) * P[k]
        Z[int(k)] = float(P[k] @ yk)
        if hits[k] == 0 and Z[int(k)] >= 0.25:
            chosen.append(int(k))
    I = np.array(sorted(chosen), dtype=np.int64)
    J = np.union1d(np.flatnonzero(hits), heavy).astype(np.int64)
    ybar_sq = float(ybar @ ybar)
    norm_cap = params.ybar_multiple * cert.l * n1 / n2
    diag = {"l": cert.l, "n1": int(n1), "n2": int(n2), "j0": refined.j0, "draws": draws,
            "ybar_norm_sq": ybar_sq, "ybar_norm_cap": norm_cap,
            "Z": {str(k): v for k, v in Z.items()}, "nbar": nbar,
            "structure_warnings": list(cert.warnings)}
    if I.size == 0:
        raise DecouplingFailure("selection-failed", "no index survived selection", diagnostics=diag)
    if J.size > params.delta * I.size:
        raise DecouplingFailure("selection-failed", f"|J|={J.size} > delta |I|", diagnostics=diag)
    if ybar_sq > norm_cap:
        raise DecouplingFailure("selection-failed", "||ybar||^2 above cap", diagnostics=diag)
    if ybar_sq == 0:
        raise DecouplingFailure("selection-failed", "ybar vanished", diagnostics=diag)
    y = ybar / math.sqrt(ybar_sq)
    thr = params.threshold(m, I.size)
    # in the caller's units: <X_k, y>^2 >= K3^2 (N/|I|)^(1/r'')
    if float(np.min((U[I] @ y) ** 2)) * params.K3**2 < thr:
        raise DecouplingFailure("selection-failed", "inner-product threshold missed", diagnostics=diag)
    return DecouplingCertificate(I=I, J=J, y=y, threshold=thr, selection_record=record,
                                 diagnostics=diag)


def decouple(X, x, params: DecouplingParams | None = None, seed: int = 0) -> DecouplingCertificate:
    """Run the construction, retrying the random selection on fresh substreams.

    Raises DecouplingFailure with the reason of the last attempt when every
    retry fails. Structural failures (no divergent structure, no witness)
    are deterministic and are not retried.
    """
    params = params or DecouplingParams()
    X0 = np.asarray(X, dtype=float)
    if X0.ndim != 2:
        raise ContractError("X must be an (m, n) array")
    m, n = X0.shape
    if m < 4:
        raise ContractError("need m >= 4")
    xv = np.asarray(x, dtype=float).reshape(-1)
    if xv.size != n or abs(np.linalg.norm(xv) - 1) > 1e-8:
        raise ContractError("x must be a unit vector in R^n")
    # the construction runs with K3 = 1; thresholds are rescaled at the end
    U = _distinct(X0) / params.K3
    a = U @ xv
    Nm = params.ambient_N(m)
    nbar = n + (Nm / m) ** (1.0 / params.r) * m
    b = a * a / nbar
    last = None
    for attempt in range(params.max_retries):
        try:
            cert = _attempt(U, a, b, nbar, params, stream(seed, attempt), m)
        except DecouplingFailure as exc:
            exc.attempts = attempt + 1
            if exc.reason != "selection-failed":
                raise
            last = exc
            continue
        cert.diagnostics["attempts"] = attempt + 1
        cert.diagnostics["ybar_multiple"] = params.ybar_multiple
        report = check_decoupling(cert, X0, params)
        if not report.ok:
            raise AssertionError("decouple produced a certificate that fails its audit:\n"
                                 + report.text())
        return cert
    raise last
