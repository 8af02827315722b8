"""Command line entry point: ``heavycov <subcommand> --config cfg.json``.

Exit codes: 0 success, 2 bad configuration, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .covariance import SampleSet, truncation_split
from .decoupling import DecouplingParams, check_decoupling, decouple
from .distributions import VectorModel
from .errors import ContractError, ConvergenceError, DecouplingFailure, StructureError
from .experiments import RUNNERS, ExperimentConfig, rows_to_csv
from .structure import (StructureConstants, check_structure, extract_structure, loglog,
                        refine_structure)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

SWEEPS = {"sweep": "scaling", "frame": "frame", "coupon": "coupon", "baiyin": "baiyin"}


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ContractError(f"cannot read {path}: {exc}") from exc


def _sweep(args, experiment: str) -> int:
    raw = _load_json(args.config) if args.config else {"experiment": experiment, "grid": {}}
    raw.setdefault("experiment", experiment)
    if raw["experiment"] != experiment:
        raise ContractError(f"config is for {raw['experiment']!r}, not {experiment!r}")
    cfg = ExperimentConfig.from_dict(raw)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    cfg = replace(cfg, **overrides)
    result = RUNNERS[experiment](cfg)
    if experiment == "scaling":
        rows, fit = result
        print(f"slope={fit.slope:.6f} intercept={fit.intercept:.6f} r2={fit.r_squared:.6f}",
              file=sys.stderr)
    else:
        rows = result
    _emit(rows_to_csv(rows), args.out or cfg.output_path)
    return EXIT_OK


def _structure(args) -> int:
    """Config: {"b": [...]} or {"harmonic_m": m}, plus alpha, K, optional lambda/constants."""
    raw = _load_json(args.config)
    if "b" in raw:
        b = np.asarray(raw["b"], dtype=float)
    elif "harmonic_m" in raw:
        b = 1.0 / np.arange(1, int(raw["harmonic_m"]) + 1)
    else:
        raise ContractError("structure config needs 'b' or 'harmonic_m'")
    alpha = float(raw.get("alpha", 0.5))
    K = float(raw["K"]) if "K" in raw else None
    consts = StructureConstants(**raw.get("constants", {}))
    if K is None:
        K = 8.0 * loglog(b.size)
    out = {"alpha": alpha, "K": K}
    try:
        cert = extract_structure(b, alpha, K, consts)
    except StructureError as exc:
        out.update(status="failed", reason=exc.reason, message=str(exc),
                   achieved=exc.achieved, required=exc.required)
        _emit(json.dumps(out, indent=2) + "\n", args.out)
        return EXIT_OK
    lam = np.asarray(raw["lambda"], dtype=float) if "lambda" in raw else np.zeros(b.size)
    refined = refine_structure(cert, lam)
    report = check_structure(cert, refined, b, lam, alpha, K)
    out.update(status="ok", certificate=cert.to_dict(), refined=refined.to_dict(),
               report=report.to_dict())
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return EXIT_OK


def _decouple(args) -> int:
    """Instance file: {"X": [[...], ...], "x": [...], "params": {...}}."""
    raw = _load_json(args.config)
    if "X" not in raw or "x" not in raw:
        raise ContractError("instance needs 'X' and 'x'")
    X = np.asarray(raw["X"], dtype=float)
    x = np.asarray(raw["x"], dtype=float)
    params = DecouplingParams.from_dict(raw.get("params", {}))
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    try:
        cert = decouple(X, x, params, seed=seed)
    except DecouplingFailure as exc:
        _emit(json.dumps({"status": "failed", "reason": exc.reason, "detail": exc.detail,
                          "attempts": exc.attempts}, indent=2) + "\n", args.out)
        print(f"decoupling failed: {exc}", file=sys.stderr)
        return EXIT_OK
    report = check_decoupling(cert, X, params)
    _emit(json.dumps({"status": "ok", "certificate": cert.to_dict(),
                      "checks": report.checks}, indent=2) + "\n", args.out)
    print(report.text(), file=sys.stderr)
    return EXIT_OK


def _truncation(args) -> int:
    """Config: {"model": {...}, "N": int, "q": float, "t": float, ...}."""
    raw = _load_json(args.config)
    model = VectorModel.from_dict(raw["model"])
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    s = SampleSet.draw(model, int(raw["N"]), seed)
    rep = truncation_split(s, float(raw.get("q", 8.0)), float(raw.get("t", 1.0)),
                           n_directions=int(raw.get("n_directions", 32)), seed=seed,
                           n_resample=int(raw.get("n_resample", 100_000)))
    _emit(json.dumps(rep.to_dict(), indent=2) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heavycov", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("sweep", "frame", "coupon", "baiyin", "structure", "decouple", "truncation"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name in ("structure", "decouple", "truncation"),
                        help="JSON configuration or instance file")
        sp.add_argument("--seed", type=int, default=None, help="master seed override")
        sp.add_argument("--out", default=None, help="output path (default: stdout)")
        sp.add_argument("--trials", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=None, help="worker processes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in SWEEPS:
            return _sweep(args, SWEEPS[args.command])
        return {"structure": _structure, "decouple": _decouple,
                "truncation": _truncation}[args.command](args)
    except (ContractError, KeyError, TypeError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"numerical non-convergence: {exc} (best estimate {exc.best})", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
