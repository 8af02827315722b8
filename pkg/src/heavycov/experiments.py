"""Seeded sweeps producing flat result rows.

Each trial draws its randomness from ``trial_seed(master, experiment, n, N,
trial)``, so a trial's numbers do not depend on the grid it sits in, on
the number of worker processes, or on the order in which trials finish.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .covariance import (SampleSet, estimation_error, sample_covariance, truncation_split)
from .decoupling import DecouplingParams, decouple
from .distributions import (VectorModel, basis_frame_model, make_tight_frame, model_covariance,
                            parseval_defect, sample)
from .errors import ContractError, DecouplingFailure, StructureError
from .linalg import extreme_eigs
from .rng import stable_seed, stream
from .structure import (StructureConstants, check_structure, extract_structure,
                        refine_structure)

EXPERIMENTS = ("scaling", "frame", "coupon", "baiyin", "structure_demo", "decouple_demo",
               "truncation")
CSV_HEADER = ("experiment", "n", "N", "trial", "seed", "metric", "value")
SUMMARY_TRIAL = -1  # rows aggregating over trials carry this trial index


class ResultRow(NamedTuple):
    experiment: str
    n: int
    N: int
    trial: int
    seed: int
    metric: str
    value: float


@dataclass
class ExperimentConfig:
    experiment: str
    grid: dict
    trials: int = 10
    model: dict | None = None
    master_seed: int = 0
    output_path: str | None = None
    jobs: int = 1
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ContractError(f"unknown experiment {self.experiment!r}")
        if not isinstance(self.grid, dict) or not self.grid:
            raise ContractError("grid must be a non-empty mapping")
        for key, values in self.grid.items():
            if not isinstance(values, (list, tuple)) or len(values) == 0:
                raise ContractError(f"grid entry {key!r} must be a non-empty list")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ContractError("trials must be a positive integer")
        if self.jobs < 1:
            raise ContractError("jobs must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"experiment", "grid", "trials", "model", "master_seed", "output_path",
                 "jobs", "options"}
        extra = set(d) - known
        if extra:
            raise ContractError(f"unknown config keys {sorted(extra)}")
        if "experiment" not in d or "grid" not in d:
            raise ContractError("config needs 'experiment' and 'grid'")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ContractError(f"config is not valid JSON: {exc}") from exc

    def model_for(self, n: int) -> VectorModel:
        fields = dict(self.model or {"kind": "gaussian"})
        fields["n"] = n
        return VectorModel.from_dict(fields)


def trial_seed(master_seed: int, experiment: str, n: int, N: int, trial: int, *extra) -> int:
    return stable_seed(master_seed, experiment, n, N, trial, *extra)


def _run(func: Callable, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _flatten(chunks: Iterable[list]) -> list:
    rows = [r for chunk in chunks for r in chunk]
    # stable sort keeps the per-trial metric order intact
    return sorted(rows, key=lambda r: (r.n, r.N, r.trial))


def _median_rows(rows: list, experiment: str, metric: str, out_metric: str) -> list:
    groups: dict = {}
    for r in rows:
        if r.metric == metric:
            groups.setdefault((r.n, r.N), []).append(r.value)
    return [ResultRow(experiment, n, N, SUMMARY_TRIAL, 0, out_metric, float(np.median(v)))
            for (n, N), v in sorted(groups.items())]


# ------------------------------------------------------------------ fitting

class ExponentFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


def _field(row, f):
    if callable(f):
        return float(f(row))
    if isinstance(row, dict):
        return float(row[f])
    return float(getattr(row, f))


def fit_exponent(rows, x_field, y_field) -> ExponentFit:
    """Least squares of log2(median y) on log2(x), one point per distinct x.

    Fields are attribute/key names or callables. Rows with y <= 0 are
    dropped with a warning.
    """
    groups: dict = {}
    dropped = 0
    for row in rows:
        x, y = _field(row, x_field), _field(row, y_field)
        if y <= 0 or x <= 0:
            dropped += 1
            continue
        groups.setdefault(x, []).append(y)
    if dropped:
        warnings.warn(f"fit_exponent dropped {dropped} non-positive rows", stacklevel=2)
    if len(groups) < 2:
        raise ContractError("need at least two distinct x values to fit an exponent")
    xs = np.log2(np.array(sorted(groups)))
    ys = np.log2(np.array([np.median(groups[x]) for x in sorted(groups)]))
    A = np.column_stack([xs, np.ones_like(xs)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ys, rcond=None)
    resid = ys - A @ np.array([slope, intercept])
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(float(slope), float(intercept), r2)


# ------------------------------------------------------------------ scaling

def _sizes(cfg: ExperimentConfig) -> list[tuple[int, int]]:
    g = cfg.grid
    ns = [int(n) for n in g["n"]]
    if "N" in g:
        pairs = [(n, int(N)) for n in ns for N in g["N"]]
    elif "N_over_n" in g:
        pairs = [(n, int(round(r * n))) for n in ns for r in g["N_over_n"]]
    else:
        raise ContractError("grid needs 'N' or 'N_over_n'")
    kept = []
    for n, N in pairs:
        if N < n:
            warnings.warn(f"skipping n={n}, N={N}: need N >= n", stacklevel=3)
            continue
        kept.append((n, N))
    return kept


def _scaling_trial(task) -> list:
    exp, model_json, n, N, trial, seed = task
    model = VectorModel.from_json(model_json)
    X = sample(model, N, seed)
    err = estimation_error(sample_covariance(X), model_covariance(model))
    return [ResultRow(exp, n, N, trial, seed, "estimation_error", err)]


def run_scaling_sweep(cfg: ExperimentConfig):
    """Rows of estimation errors plus an exponent fit of median error vs n/N."""
    tasks = []
    for n, N in _sizes(cfg):
        mj = cfg.model_for(n).to_json()
        for t in range(cfg.trials):
            tasks.append((cfg.experiment, mj, n, N, t, trial_seed(cfg.master_seed, cfg.experiment, n, N, t)))
    rows = _flatten(_run(_scaling_trial, tasks, cfg.jobs))
    errors = [r for r in rows if r.metric == "estimation_error"]
    fit = fit_exponent(errors, lambda r: r.n / r.N, "value")
    summary = _median_rows(rows, cfg.experiment, "estimation_error", "median_error")
    q = (cfg.model or {}).get("q")
    if q and q > 4:
        # sample size of the form (log log n)^p n with 1/p + 1/q = 1/4
        p = 4.0 * q / (q - 4.0)
        for n in sorted({r.n for r in summary}):
            ll = math.log2(math.log2(n)) if n > 2 else 0.0
            summary.append(ResultRow(cfg.experiment, n, 0, SUMMARY_TRIAL, 0,
                                     "loglog_sample_size", ll**p * n))
    return _flatten([rows, summary]), fit


# ------------------------------------------------------------------ frames

def _frame(n: int, M: int, master_seed: int):
    raw = stream(stable_seed(master_seed, "frame-raw", n, M)).standard_normal((M, n))
    return make_tight_frame(raw)


def _frame_trial(task) -> list:
    exp, n, N, M, trial, seed, master = task
    F = _frame(n, M, master)
    idx = stream(seed).integers(0, M, size=N)
    return [ResultRow(exp, n, N, trial, seed, f"parseval_defect@M={M}",
                      parseval_defect(F.points[idx], N))]


def run_frame_subsample(cfg: ExperimentConfig) -> list:
    g = cfg.grid
    Ms = g.get("M")
    tasks = []
    for n, N in _sizes(cfg):
        M_list = [int(m) for m in Ms] if Ms else [int(round(r * n)) for r in g["M_over_n"]]
        for M in M_list:
            if M < n:
                raise ContractError(f"frame size M={M} below n={n}")
            for t in range(cfg.trials):
                seed = trial_seed(cfg.master_seed, cfg.experiment, n, N, t, M)
                tasks.append((cfg.experiment, n, N, M, t, seed, cfg.master_seed))
    rows = _flatten(_run(_frame_trial, tasks, cfg.jobs))
    summary = []
    for metric in sorted({r.metric for r in rows}, key=lambda s: int(s.split("=")[1])):
        summary += _median_rows(rows, cfg.experiment, metric, "median_" + metric)
    return _flatten([rows, summary])


# ------------------------------------------------------------------ coupons

def _coupon_trial(task) -> list:
    exp, n, N, trial, seed = task
    X = sample(basis_frame_model(n), N, seed)
    err = estimation_error(sample_covariance(X), np.eye(n))
    seen = np.unique(np.argmax(np.abs(X), axis=1)).size
    return [ResultRow(exp, n, N, trial, seed, "estimation_error", err),
            ResultRow(exp, n, N, trial, seed, "missing_coupon", float(seen < n))]


def run_coupon(cfg: ExperimentConfig) -> list:
    tasks = [(cfg.experiment, n, N, t, trial_seed(cfg.master_seed, cfg.experiment, n, N, t))
             for n, N in _sizes(cfg) for t in range(cfg.trials)]
    rows = _flatten(_run(_coupon_trial, tasks, cfg.jobs))
    summary = _median_rows(rows, cfg.experiment, "estimation_error", "median_error")
    groups: dict = {}
    for r in rows:
        if r.metric == "estimation_error":
            groups.setdefault((r.n, r.N), []).append(r.value >= 1.0)
    summary += [ResultRow(cfg.experiment, n, N, SUMMARY_TRIAL, 0, "frac_error_ge_1",
                          float(np.mean(v))) for (n, N), v in sorted(groups.items())]
    return _flatten([rows, summary])


# ------------------------------------------------------------------ Bai-Yin

def _baiyin_trial(task) -> list:
    exp, model_json, n, N, trial, seed = task
    model = VectorModel.from_json(model_json)
    X = sample(model, N, seed)
    top, bottom = extreme_eigs(sample_covariance(X))
    return [ResultRow(exp, n, N, trial, seed, "lambda_max", top),
            ResultRow(exp, n, N, trial, seed, "lambda_min", bottom)]


def run_baiyin(cfg: ExperimentConfig) -> list:
    g = cfg.grid
    tasks, shapes = [], []
    for beta in g["beta"]:
        if not 0 < beta <= 1:
            raise ContractError("beta must lie in (0, 1]")
        for N in g["N"]:
            n = math.ceil(beta * N)
            shapes.append((beta, n, int(N)))
            mj = cfg.model_for(n).to_json()
            for t in range(cfg.trials):
                tasks.append((cfg.experiment, mj, n, int(N), t,
                              trial_seed(cfg.master_seed, cfg.experiment, n, N, t)))
    rows = _flatten(_run(_baiyin_trial, tasks, cfg.jobs))
    summary = []
    q = (cfg.model or {}).get("q")
    for beta, n, N in shapes:
        summary.append(ResultRow(cfg.experiment, n, N, SUMMARY_TRIAL, 0, "edge_max_limit",
                                 (1 + math.sqrt(beta)) ** 2))
        summary.append(ResultRow(cfg.experiment, n, N, SUMMARY_TRIAL, 0, "edge_min_limit",
                                 (1 - math.sqrt(beta)) ** 2))
        if q and q > 4 and n > 2:
            shape = math.log2(math.log2(n)) * beta ** (0.5 - 2.0 / q)
            dev = [abs(r.value - 1.0) for r in rows
                   if r.n == n and r.N == N and r.metric in ("lambda_max", "lambda_min")]
            summary.append(ResultRow(cfg.experiment, n, N, SUMMARY_TRIAL, 0,
                                     "envelope_constant", max(dev) / shape))
    return _flatten([rows, summary])


# ------------------------------------------------------------------ structure / decoupling demos

def harmonic_sequence(m: int) -> np.ndarray:
    """b_i = 1/i: the extremal sequence with weak-l1 norm 1 and the largest l1 norm."""
    return 1.0 / np.arange(1, m + 1)


def _structure_trial(task) -> list:
    exp, m, trial, seed, alpha, K, relaxed = task
    rng = stream(seed)
    b = fuzz_weak_l1(rng, m)
    rows = []
    consts = StructureConstants(strict=not relaxed, c_alpha=0.0 if relaxed else None,
                                k_loglog_factor=0.0 if relaxed else 8.0)
    try:
        cert = extract_structure(b, alpha, K, consts)
        lam = rng.dirichlet(np.ones(cert.I1.size)) * rng.random()
        ref = refine_structure(cert, lam)
        rep = check_structure(cert, ref, b, lam, alpha, K)
        rows.append(ResultRow(exp, 0, m, trial, seed, "certified", 1.0))
        rows.append(ResultRow(exp, 0, m, trial, seed, "checker_ok", float(rep.ok)))
        rows.append(ResultRow(exp, 0, m, trial, seed, "checker_strict_ok", float(rep.strict_ok)))
    except StructureError:
        rows.append(ResultRow(exp, 0, m, trial, seed, "certified", 0.0))
    rows.append(ResultRow(exp, 0, m, trial, seed, "l1_norm", float(np.sum(b))))
    return rows


def fuzz_weak_l1(rng: np.random.Generator, m: int) -> np.ndarray:
    """A random sequence with weak-l1 norm at most 1 and a heavy tail.

    Mixes the harmonic profile with random thinning, plateaus and shuffling,
    then rescales so the weak-l1 norm is exactly 1.
    """
    i = np.arange(1, m + 1, dtype=float)
    kind = int(rng.integers(0, 4))
    if kind == 0:
        b = 1.0 / i
    elif kind == 1:
        b = i ** -rng.uniform(0.8, 1.0)
    elif kind == 2:
        b = (1.0 / i) * rng.uniform(0.5, 1.0, m)
    else:
        # plateaus: constant on runs, each run valued 1/(index of its last entry)
        cuts = np.sort(rng.choice(np.arange(1, m), size=min(8, m - 1), replace=False))
        edges = np.concatenate([[0], cuts, [m]])
        b = 1.0 / np.repeat(edges[1:], np.diff(edges))
    b = b[rng.permutation(m)]
    s = np.sort(b)[::-1]
    return b / float(np.max(s * i))


def run_structure_demo(cfg: ExperimentConfig) -> list:
    opts = cfg.options
    alpha = float(opts.get("alpha", 0.5))
    relaxed = bool(opts.get("relaxed", False))
    tasks = []
    for m in cfg.grid["m"]:
        m = int(m)
        K = float(opts.get("K", 8.0 * math.log2(math.log2(m))))
        for t in range(cfg.trials):
            tasks.append((cfg.experiment, m, t, trial_seed(cfg.master_seed, cfg.experiment, 0, m, t),
                          alpha, K, relaxed))
    return _flatten(_run(_structure_trial, tasks, cfg.jobs))


def near_duplicate_instance(n: int, m: int, seed: int, n_dup: int | None = None,
                            spread: float = 0.05):
    """n_dup vectors close to sqrt(n) u plus m - n_dup vectors of length sqrt(n)
    orthogonal to u; returns (X, u)."""
    rng = stream(seed)
    n_dup = m // 2 if n_dup is None else n_dup
    u = rng.standard_normal(n)
    u /= np.linalg.norm(u)
    proj = np.eye(n) - np.outer(u, u)
    W = rng.standard_normal((m, n)) @ proj
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    X = np.sqrt(n) * W
    c = np.sqrt(1.0 - spread**2)
    X[:n_dup] = np.sqrt(n) * (c * u + spread * W[:n_dup])
    return X[rng.permutation(m)], u


def _decouple_trial(task) -> list:
    exp, n, m, trial, seed, params_dict = task
    X, u = near_duplicate_instance(n, m, seed)
    params = DecouplingParams.from_dict(params_dict) if params_dict else DecouplingParams()
    try:
        cert = decouple(X, u, params, seed=seed)
        return [ResultRow(exp, n, m, trial, seed, "success", 1.0),
                ResultRow(exp, n, m, trial, seed, "attempts", float(cert.diagnostics["attempts"]))]
    except DecouplingFailure as exc:
        code = {"precondition-largeness": 1.0, "no-witness": 2.0, "selection-failed": 3.0}[exc.reason]
        return [ResultRow(exp, n, m, trial, seed, "success", 0.0),
                ResultRow(exp, n, m, trial, seed, "failure_code", code)]


def run_decouple_demo(cfg: ExperimentConfig) -> list:
    params = cfg.options.get("params")
    tasks = [(cfg.experiment, int(n), int(m), t,
              trial_seed(cfg.master_seed, cfg.experiment, n, m, t), params)
             for n in cfg.grid["n"] for m in cfg.grid["m"] for t in range(cfg.trials)]
    rows = _flatten(_run(_decouple_trial, tasks, cfg.jobs))
    return _flatten([rows, _median_rows(rows, cfg.experiment, "success", "median_success")])


# ------------------------------------------------------------------ truncation

def _truncation_trial(task) -> list:
    exp, model_json, n, N, trial, seed, q, t_param, n_resample = task
    model = VectorModel.from_json(model_json)
    s = SampleSet.draw(model, N, seed)
    rep = truncation_split(s, q, t_param, seed=seed, n_resample=n_resample)
    err = estimation_error(sample_covariance(s), model_covariance(model))
    return [ResultRow(exp, n, N, trial, seed, name, float(v)) for name, v in (
        ("B", rep.B), ("I1_term", rep.I1_term), ("I2_term", rep.I2_term),
        ("I3_term", rep.I3_term), ("I3_bound", rep.I3_bound), ("estimation_error", err))]


def run_truncation(cfg: ExperimentConfig) -> list:
    q = float(cfg.options.get("q", 8.0))
    t_param = float(cfg.options.get("t", 1.0))
    n_resample = int(cfg.options.get("n_resample", 100_000))
    tasks = []
    for n, N in _sizes(cfg):
        mj = cfg.model_for(n).to_json()
        for t in range(cfg.trials):
            tasks.append((cfg.experiment, mj, n, N, t,
                          trial_seed(cfg.master_seed, cfg.experiment, n, N, t), q, t_param, n_resample))
    return _flatten(_run(_truncation_trial, tasks, cfg.jobs))


# ------------------------------------------------------------------ output

def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.experiment, r.n, r.N, r.trial, r.seed, r.metric, f"{r.value:.17g}"])
    return buf.getvalue()


def write_csv(rows: Iterable[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def read_csv(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != CSV_HEADER:
            raise ContractError("unexpected CSV header")
        return [ResultRow(e, int(n), int(N), int(t), int(s), m, float(v))
                for e, n, N, t, s, m, v in rd]


RUNNERS = {
    "scaling": run_scaling_sweep,
    "frame": run_frame_subsample,
    "coupon": run_coupon,
    "baiyin": run_baiyin,
    "structure_demo": run_structure_demo,
    "decouple_demo": run_decouple_demo,
    "truncation": run_truncation,
}
