"""Dyadic structure of sequences with large l1 norm but weak-l1 norm at most 1.

Pipeline:
    block_decompose  -> dyadic blocks Omega_j = {i : 2^-j < b_i <= 2^-j+1}
    extract_structure -> level l, heavy blocks, a regular window of them, I1
    refine_structure -> one block j0 of small lambda-mass and I2 inside it
    check_structure  -> re-derives every promised inequality from raw inputs

``regularize`` is the combinatorial step choosing the window: a range
[j1, j2] with j2 <= (1 + alpha) j1 that still holds a fixed fraction of J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import ContractError, StructureError
from .sequences import weak_lp_norm

SLACK = 1e-12


# ---------------------------------------------------------------- regularize

class Regularization(NamedTuple):
    j1: int
    j2: int
    count: int  # |J ∩ [j1, j2]|
    k_steps: int
    l: int  # |J|

    @property
    def density_bound(self) -> Fraction:
        """Guaranteed lower bound l / (3 k_steps) on ``count``."""
        return Fraction(self.l, 3 * self.k_steps)


def _progression(j0: int, alpha: Fraction, L: int) -> list[Fraction]:
    pts = [Fraction(j0)]
    while len(pts) == 1 or pts[-1] < L:
        pts.append(pts[-1] * (1 + alpha))
    return pts


def regularize(J, L: int, alpha) -> Regularization:
    """Pick j1 <= j2 in J with l/2 <= j1 and j2 <= (1 + alpha) j1 holding many of J.

    The geometric progression j0 (1 + alpha)^k, started at the median-ish
    element j0 (the ceil(l/2)-th smallest), reaches L after k_steps steps;
    one of those closed intervals contains at least l/(3 k_steps) points of
    J. The first such interval wins and its ends are pulled in to members
    of J. All arithmetic is exact in rationals (alpha is converted with
    ``Fraction``, so a float alpha means its exact binary value).
    """
    Js = sorted({int(j) for j in J})
    if not Js:
        raise ContractError("J must be non-empty")
    if Js[0] < 1 or Js[-1] > L:
        raise ContractError(f"J must lie in [1, {L}]")
    a = Fraction(alpha)
    if not 0 < a <= 1:
        raise ContractError("alpha must lie in (0, 1]")
    l = len(Js)
    j0 = Js[math.ceil(l / 2) - 1]
    prog = _progression(j0, a, L)
    k_steps = len(prog) - 1
    for k in range(1, k_steps + 1):
        lo, hi = prog[k - 1], prog[k]
        inside = [j for j in Js if lo <= j <= hi]
        if 3 * k_steps * len(inside) >= l:
            return Regularization(inside[0], inside[-1], len(inside), k_steps, l)
    # the pigeonhole argument rules this out; reaching here is a bug
    raise AssertionError(f"regularize found no dense interval for J={Js}, L={L}, alpha={alpha}")


def regularization_violations(J, L: int, alpha, r: Regularization) -> list[str]:
    """Postconditions of ``regularize`` re-checked from scratch; empty list means valid."""
    Js = sorted({int(j) for j in J})
    l = len(Js)
    a = Fraction(alpha)
    out = []
    if r.j1 not in Js or r.j2 not in Js:
        out.append("endpoints not in J")
    if not Fraction(l, 2) <= r.j1:
        out.append("j1 < l/2")
    if not r.j1 <= r.j2:
        out.append("j1 > j2")
    if not r.j2 <= (1 + a) * r.j1:
        out.append("j2 > (1 + alpha) j1")
    count = sum(1 for j in Js if r.j1 <= j <= r.j2)
    if count != r.count:
        out.append("reported count wrong")
    # recompute K_steps independently from the definition
    pos = [j for j in range(1, L + 1) if sum(1 for x in Js if x <= j) == math.ceil(l / 2)]
    j0 = Fraction(pos[0]) if pos else None
    if j0 is None:
        out.append("no start point")
        return out
    k, cur = 0, j0
    while k == 0 or cur < L:
        cur *= 1 + a
        k += 1
    if k != r.k_steps:
        out.append(f"k_steps {r.k_steps} != {k}")
    if 3 * k * count < l:
        out.append("density below l/(3 K)")
    return out


# ---------------------------------------------------------------- blocks

@dataclass(frozen=True)
class BlockDecomposition:
    m: int
    blocks: dict  # j -> sorted index array
    dropped: np.ndarray
    values: np.ndarray  # |b|

    @property
    def sizes(self) -> dict:
        return {j: int(idx.size) for j, idx in self.blocks.items()}

    @property
    def contributions(self) -> dict:
        return {j: float(self.values[idx].sum()) for j, idx in self.blocks.items()}

    def contribution(self, j: int) -> float:
        idx = self.blocks.get(j)
        return 0.0 if idx is None else float(self.values[idx].sum())


def dyadic_level(v: np.ndarray) -> np.ndarray:
    """The j with 2^-j < v <= 2^-j+1 for each positive v, exact at powers of two."""
    j = np.floor(-np.log2(v)).astype(np.int64) + 1
    # log2 rounding can be off by one near powers of two; fix with exact ldexp
    j = np.where(v > np.ldexp(1.0, -j + 1), j - 1, j)
    j = np.where(v <= np.ldexp(1.0, -j), j + 1, j)
    # values within rounding of 1 (allowed by the weak-l1 slack) belong to level 1
    return np.maximum(j, 1)


def block_decompose(b) -> BlockDecomposition:
    v = np.abs(np.asarray(b, dtype=float).reshape(-1))
    m = v.size
    if m == 0:
        raise ContractError("empty sequence")
    w = weak_lp_norm(v, 1)
    if w > 1 + SLACK:
        raise ContractError(f"weak-l1 norm {w:.6g} exceeds 1")
    keep = v > 1.0 / m
    idx = np.flatnonzero(keep)
    levels = dyadic_level(v[idx]) if idx.size else np.array([], dtype=np.int64)
    blocks = {}
    for j in np.unique(levels):
        blocks[int(j)] = idx[levels == j]
    return BlockDecomposition(m=m, blocks=blocks, dropped=np.flatnonzero(~keep), values=v)


# ---------------------------------------------------------------- extraction

@dataclass(frozen=True)
class StructureConstants:
    """Constants the argument leaves implicit.

    c_alpha: the divergence requirement is ||b||_1 >= c_alpha K log log m;
        None means 10/alpha.
    k_loglog_factor: require K >= k_loglog_factor * log log m.
    l_large_factor: the level must satisfy l >= l_large_factor K log log m.
    strict: when False the three requirements above and the |J| >= 8l/K
        guarantee are recorded as warnings instead of raising. Used only to
        exercise the machinery on sequences too short to meet them.
    """

    c_alpha: float | None = None
    k_loglog_factor: float = 8.0
    l_large_factor: float = 0.2
    strict: bool = True

    def divergence_constant(self, alpha: float) -> float:
        return 10.0 / alpha if self.c_alpha is None else self.c_alpha


@dataclass(frozen=True)
class StructureCertificate:
    m: int
    alpha: float
    K: float
    l: int
    J_bar: tuple
    J: tuple
    j_prime: int
    j_double_prime: int
    I1: np.ndarray
    blocks: BlockDecomposition
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "m": self.m, "alpha": self.alpha, "K": self.K, "l": self.l,
            "J_bar": list(self.J_bar), "J": list(self.J),
            "j_prime": self.j_prime, "j_double_prime": self.j_double_prime,
            "I1": self.I1.tolist(),
            "blocks": {str(j): {"indices": idx.tolist(), "size": int(idx.size),
                                "contribution": self.blocks.contribution(j)}
                       for j, idx in sorted(self.blocks.blocks.items())},
            "dropped": int(self.blocks.dropped.size),
            "warnings": list(self.warnings),
        }


def loglog(m: int) -> float:
    return math.log2(math.log2(m))


def dominant_level(blocks: BlockDecomposition, K: float) -> int:
    """Largest j such that the j-th largest block contribution is >= K/j (0 if none)."""
    Lmax = math.ceil(math.log2(blocks.m))
    contrib = sorted((blocks.contribution(j) for j in range(1, Lmax + 1)), reverse=True)
    best = 0
    for j, B in enumerate(contrib, start=1):
        if B >= K / j:
            best = j
    return best


def extract_structure(b, alpha: float, K: float,
                      constants: StructureConstants | None = None) -> StructureCertificate:
    c = constants or StructureConstants()
    v = np.abs(np.asarray(b, dtype=float).reshape(-1))
    m = v.size
    if m < 4:
        raise ContractError("need m >= 4")
    if not 0 < alpha < 1:
        raise ContractError("alpha must lie in (0, 1)")
    blocks = block_decompose(v)
    LL = loglog(m)
    warnings = []

    def require(ok: bool, reason: str, msg: str, achieved=None, required=None):
        if ok:
            return
        if c.strict:
            raise StructureError(msg, reason, achieved, required)
        warnings.append(msg)

    require(K >= c.k_loglog_factor * LL, "K-small",
            f"K={K:.6g} below {c.k_loglog_factor:g} log log m = {c.k_loglog_factor * LL:.6g}",
            K, c.k_loglog_factor * LL)
    need = c.divergence_constant(alpha) * K * LL
    total = float(v.sum())
    require(total >= need, "divergence",
            f"||b||_1 = {total:.6g} is below the required {need:.6g}", total, need)

    l = dominant_level(blocks, K)
    if l == 0:
        raise StructureError("no dominant block", "no-dominant-block")
    require(l >= c.l_large_factor * K * LL - SLACK, "level-small",
            f"level l={l} below {c.l_large_factor:g} K log log m = {c.l_large_factor * K * LL:.6g}",
            l, c.l_large_factor * K * LL)

    J_bar = tuple(j for j in sorted(blocks.blocks) if blocks.contribution(j) >= K / l)
    top = int(math.floor(math.log2(m)))
    # work with t = floor(log m) - j so that small t means large blocks
    T = [top - j for j in J_bar if top - j >= 1]
    if not T:
        raise StructureError("all heavy blocks sit at the bottom scale", "no-dominant-block")
    reg = regularize(T, top - 1, alpha / 2)
    j_prime, j_double_prime = top - reg.j1, top - reg.j2
    J = tuple(j for j in J_bar if j_double_prime <= j <= j_prime)
    require(len(J) * K >= 8 * l, "J-small",
            f"|J|={len(J)} below 8 l / K = {8 * l / K:.6g}", len(J), 8 * l / K)
    I1 = np.sort(np.concatenate([blocks.blocks[j] for j in J]))
    return StructureCertificate(m=m, alpha=float(alpha), K=float(K), l=l, J_bar=J_bar, J=J,
                                j_prime=j_prime, j_double_prime=j_double_prime, I1=I1,
                                blocks=blocks, warnings=tuple(warnings))


# ---------------------------------------------------------------- refinement

@dataclass(frozen=True)
class RefinedSet:
    j0: int
    I2: np.ndarray
    lam: np.ndarray  # full length-m, non-negative, zero off I1

    def to_dict(self) -> dict:
        return {"j0": self.j0, "I2": self.I2.tolist()}


def _full_lambda(cert: StructureCertificate, lam) -> np.ndarray:
    lv = np.abs(np.asarray(lam, dtype=float).reshape(-1))
    if lv.size == cert.m:
        full = np.zeros(cert.m)
        full[cert.I1] = lv[cert.I1]
        return full
    if lv.size == cert.I1.size:
        full = np.zeros(cert.m)
        full[cert.I1] = lv
        return full
    raise ContractError("lambda must have length m or |I1|")


def refine_structure(cert: StructureCertificate, lam) -> RefinedSet:
    """Choose the first block of J whose lambda-mass is at most K/(8l), then
    keep its indices with lambda_i <= K/(4 l m_j0)."""
    full = _full_lambda(cert, lam)
    if full.sum() > 1 + SLACK:
        raise ContractError("||lambda||_1 exceeds 1")
    cap = cert.K / (8 * cert.l)
    for j in cert.J:
        idx = cert.blocks.blocks[j]
        if full[idx].sum() <= cap + SLACK:
            mj = idx.size
            I2 = idx[full[idx] <= cert.K / (4 * cert.l * mj)]
            return RefinedSet(j0=j, I2=np.sort(I2), lam=full)
    raise StructureError(
        f"no block of J has lambda-mass <= K/(8l) = {cap:.6g}; |J|={len(cert.J)}, 8l/K={8 * cert.l / cert.K:.6g}",
        "no-light-block")


# ---------------------------------------------------------------- checker

class Check(NamedTuple):
    name: str
    passed: bool
    slack: float  # >= 0 when passed; distance by which the inequality holds


@dataclass
class StructureReport:
    checks: list = field(default_factory=list)

    def add(self, name: str, lhs: float, rhs: float, strict_ok: bool | None = None):
        """Record lhs >= rhs (within SLACK)."""
        slack = float(lhs - rhs)
        ok = slack >= -SLACK if strict_ok is None else strict_ok
        self.checks.append(Check(name, bool(ok), slack))

    def flag(self, name: str, ok: bool):
        self.checks.append(Check(name, bool(ok), 0.0 if ok else -1.0))

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    # the strict I2 largeness bound is informative only
    OPTIONAL = ("largeness_I2_strict",)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.name not in self.OPTIONAL)

    @property
    def strict_ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "strict_ok": self.strict_ok,
                "checks": [c._asdict() for c in self.checks]}


def check_structure(cert: StructureCertificate, refined: RefinedSet, b, lam,
                    alpha: float, K: float) -> StructureReport:
    """Evaluate every promised inequality from b and lambda directly.

    Block membership is recomputed from b rather than read from ``cert``, so
    a tampered certificate shows up as a failed check.
    """
    v = np.abs(np.asarray(b, dtype=float).reshape(-1))
    m = v.size
    rep = StructureReport()
    I1 = np.asarray(cert.I1, dtype=np.int64)
    I2 = np.asarray(refined.I2, dtype=np.int64)
    lv = np.abs(np.asarray(lam, dtype=float).reshape(-1))
    full = np.zeros(m)
    if lv.size == m:
        full = lv.copy()
    elif lv.size == I1.size:
        full[I1] = lv
    l = cert.l
    n1, n2 = I1.size, I2.size
    rep.flag("I1_nonempty", n1 > 0)
    rep.flag("I2_nonempty", n2 > 0)
    if n1 == 0 or n2 == 0:
        return rep

    rep.add("level_at_most_log_m", math.log2(m), l)
    rep.flag("J_subset_J_bar", set(cert.J) <= set(cert.J_bar))
    rep.add("J_large", len(cert.J) * K, 8 * l)
    levels = np.zeros(m, dtype=np.int64)
    pos = v > 1.0 / m
    levels[pos] = dyadic_level(v[pos])
    expected_I1 = np.flatnonzero(pos & np.isin(levels, list(cert.J)))
    rep.flag("I1_is_union_of_J_blocks", np.array_equal(np.sort(I1), expected_I1))
    rep.flag("I2_subset_I1", bool(np.isin(I2, I1).all()))
    in_j0 = pos & (levels == refined.j0)
    mj0 = int(in_j0.sum())
    rep.flag("I2_inside_block_j0", bool(in_j0[I2].all()))
    rep.add("I2_at_least_half_block", n2, mj0 / 2)
    rep.add("I2_at_most_block", mj0, n2)

    # regularity: 2^{l/2} <= m/n1 <= m/n2 <= (m/n1)^{1+alpha}, compared in log2
    rep.add("regularity_lower", math.log2(m / n1), l / 2)
    rep.add("regularity_middle", math.log2(m / n2), math.log2(m / n1))
    rep.add("regularity_upper", (1 + alpha) * math.log2(m / n1), math.log2(m / n2))

    rep.add("largeness_I1", float(v[I1].min()), K / (2 * l * n1))
    rep.add("largeness_I2_strict", float(v[I2].min()), K / (2 * l * n2))
    rep.add("largeness_I2_block", float(v[I2].min()), K / (2 * l * mj0))
    rep.add("domination_I2", float(np.min(v[I2] - 2 * full[I2])), 0.0)
    rep.add("lambda_cap_I2", K / (4 * l * mj0), float(full[I2].max()))
    return rep
