"""Command line entry point: ``reprocs {generate,track,theory,experiment}``.

Exit codes: 0 success, 2 configuration error, 3 runtime or convergence error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import harness
from .datagen import generate, read_sequence, write_sequence
from .errors import ConfigError, ReprocsError
from .presets import PRESETS
from .theory import Measurements, check_conditions, params_for_preset
from .tracker import Tracker, estimate_initial_subspace

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("reprocs")


def _config(args) -> harness.ExperimentConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"{args.config}: {err}") from err
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
    for key in ("preset", "seed", "out", "jobs", "trials"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return harness.ExperimentConfig.from_dict(data)


def _out_dir(cfg: harness.ExperimentConfig) -> Path:
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    cfg = _config(args)
    pr = cfg.build_preset()
    seq = generate(pr.model, pr.coeffs, pr.support, pr.t_max, cfg.seed)
    path = _out_dir(cfg) / f"sequence-{pr.name}-{cfg.seed}.bin"
    write_sequence(seq, path)
    print(path)
    return EXIT_OK


def cmd_track(args) -> int:
    cfg = _config(args)
    pr = cfg.build_preset()
    algo = args.algorithm
    if args.input is None:
        result = harness.run_experiment(replace(cfg, trials=1, algorithms=[algo]), pr)
        rows = result.rows
    else:
        # no ground-truth basis in the file, so the se column stays empty
        M, S, L = read_sequence(args.input)
        if M.shape[0] != pr.model.n:
            raise ConfigError(f"{args.input}: n={M.shape[0]} does not match preset n={pr.model.n}")
        t0 = pr.support.t_train
        rng = np.random.default_rng(cfg.seed)
        block = L[:, :t0] + rng.uniform(-pr.noise_amplitude, pr.noise_amplitude, size=(M.shape[0], t0))
        P0 = estimate_initial_subspace(block, pr.model.r0).basis
        tcfg = replace(pr.tracker, deletion_enabled=(algo == "reprocs-cpca"))
        tracker = Tracker(P0, tcfg, last_training_frame=block[:, -1])
        rows = []
        for t in range(t0 + 1, M.shape[1] + 1):
            rec = tracker.step(M[:, t - 1])
            S_t = S[:, t - 1]
            T = np.flatnonzero(S_t)
            norm = np.linalg.norm(S_t)
            err = float(np.linalg.norm(rec.S_hat - S_t) / norm) if norm > 0 else float("nan")
            prec, recall = harness.support_scores(T, rec.T_hat)
            rows.append(harness.MetricsRow(t, algo, 0, float("nan"), err, prec, recall, None, rec.phase))
    path = harness.emit_csv(rows, _out_dir(cfg) / f"track-{algo}.csv")
    print(path)
    return EXIT_OK


def cmd_theory(args) -> int:
    cfg = _config(args)
    pr = cfg.build_preset()
    try:
        params = params_for_preset(pr, zeta=args.zeta)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    tc = pr.tracker
    gaps = np.diff(tc.change_times)
    meas = Measurements(
        alpha=tc.alpha,
        alpha_tilde=tc.alpha_tilde,
        K=tc.K,
        change_gap_min=int(gaps.min()) if gaps.size else None,
    )
    report = check_conditions(params, meas)
    print(report.format())
    record = {"params": asdict(params), "report": report.to_dict()}
    text = json.dumps(record, indent=2, default=float)
    if cfg.out:
        path = _out_dir(cfg) / "theory.json"
        path.write_text(text + "\n")
        print(path)
    else:
        print(text)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _config(args)
    result = harness.run_experiment(cfg)
    paths = harness.write_result(result, _out_dir(cfg))
    for path in paths.values():
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="reprocs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write a sequence binary").set_defaults(func=cmd_generate)
    track = sub.add_parser("track", parents=[common], help="run one tracker")
    track.add_argument("--input", help="sequence binary (default: generate from the preset)")
    track.add_argument("--algorithm", choices=harness.ALGORITHMS, default="reprocs-cpca")
    track.set_defaults(func=cmd_track)
    theory = sub.add_parser("theory", parents=[common], help="print the bound report")
    theory.add_argument("--zeta", type=float, help="accuracy level (default: largest admissible)")
    theory.set_defaults(func=cmd_theory)
    exp = sub.add_parser("experiment", parents=[common], help="Monte Carlo comparison")
    exp.add_argument("--trials", type=int)
    exp.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReprocsError, ArithmeticError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
