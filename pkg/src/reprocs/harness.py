"""Seeded Monte Carlo runs of ReProCS and ReProCS-cPCA on generated data.

Each trial draws one sequence (seed ``seed + trial``), estimates the
initial subspace from its noisy training block, and runs every requested
algorithm over the remaining frames. Per-frame metrics land in a long-format
table; a mean-over-trials table and a summary are derived from it.
"""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .datagen import (
    CoefficientSchedule,
    GeneratedSequence,
    SubspaceChangeModel,
    SupportSchedule,
    generate,
    training_block,
)
from .errors import ConfigError
from .linalg import subspace_error
from .presets import Preset, get_preset
from .tracker import Tracker, TrackerConfig, estimate_initial_subspace

ALGORITHMS = ("reprocs-cpca", "reprocs")
CSV_HEADER = ("t", "algo", "trial", "se", "err_s_rel", "precision", "recall", "kappa_proxy", "phase")
MEAN_HEADER = ("t", "algo", "trials", "se", "err_s_rel", "precision", "recall", "kappa_proxy", "phase")
DEGENERATE_NORM = 1e-12

_SECTIONS = {
    "model": SubspaceChangeModel,
    "coefficients": CoefficientSchedule,
    "support": SupportSchedule,
    "tracker": TrackerConfig,
}


def _check_keys(section: str, given: dict, cls) -> None:
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown keys {unknown}")


@dataclass
class ExperimentConfig:
    """What to run. Section dicts (``model``, ``coefficients``, ``support``,
    ``tracker``) override fields of the named preset, so a full inline setup
    is a preset with every field overridden."""

    preset: str = "desk"
    trials: int = 1
    seed: int = 0
    out: str | None = None
    cadence: int = 1
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    jobs: int = 1
    t_max: int | None = None
    noise_amplitude: float | None = None
    model: dict = field(default_factory=dict)
    coefficients: dict = field(default_factory=dict)
    support: dict = field(default_factory=dict)
    tracker: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.cadence < 1:
            raise ConfigError("cadence must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if not self.algorithms:
            raise ConfigError("algorithms must be nonempty")
        bad = sorted(set(self.algorithms) - set(ALGORITHMS))
        if bad:
            raise ConfigError(f"unknown algorithms {bad}; choose from {list(ALGORITHMS)}")
        for name, cls in _SECTIONS.items():
            _check_keys(name, getattr(self, name), cls)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
        _check_keys("config", data, cls)
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"{path}: {err}") from err
        return cls.from_dict(data)

    def build_preset(self) -> Preset:
        try:
            pr = get_preset(self.preset)
        except KeyError as err:
            raise ConfigError(str(err)) from None
        try:
            model = replace(pr.model, **self.model)
            coeffs = replace(pr.coeffs, **self.coefficients)
            support = replace(pr.support, **self.support)
            tracker_over = dict(self.tracker)
            # keep the tracker's model knowledge in step with model overrides
            for key in ("change_times", "c_new"):
                if key in self.model and key not in tracker_over:
                    tracker_over[key] = list(self.model[key])
            if "t_train" in self.support and "t_train" not in tracker_over:
                tracker_over["t_train"] = self.support["t_train"]
            tracker = replace(pr.tracker, **tracker_over)
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err)) from err
        out = replace(pr, model=model, coeffs=coeffs, support=support, tracker=tracker)
        if self.t_max is not None:
            out = replace(out, t_max=self.t_max)
        if self.noise_amplitude is not None:
            out = replace(out, noise_amplitude=self.noise_amplitude)
        out.tracker.validate(r0=out.model.r0)
        return out


@dataclass
class MetricsRow:
    t: int
    algo: str
    trial: int
    se: float
    err_s_rel: float
    precision: float
    recall: float
    kappa_proxy: float | None
    phase: str


@dataclass
class ProbePoint:
    t: int
    j: int
    k: int
    value: float
    degenerate: bool
    algo: str = ""
    trial: int = 0


@dataclass
class ExperimentResult:
    rows: list[MetricsRow]
    mean: list[dict]
    probes: list[ProbePoint]
    summary: dict


def support_scores(T, T_hat) -> tuple[float, float]:
    """``(precision, recall)``; an empty estimate or truth scores 1."""
    T, T_hat = set(map(int, T)), set(map(int, T_hat))
    hit = len(T & T_hat)
    precision = hit / len(T_hat) if T_hat else 1.0
    recall = hit / len(T) if T else 1.0
    return precision, recall


def probe_value(P_hat: np.ndarray, P_new: np.ndarray, T) -> tuple[float, bool]:
    """``||D[T]|| / ||D||`` for ``D = (I - P_hat P_hat') P_new``; NaN and a
    degenerate flag when ``D`` vanishes."""
    D = P_new - P_hat @ (P_hat.T @ P_new) if P_hat.shape[1] else P_new.copy()
    norm = np.linalg.norm(D, 2)
    if norm <= DEGENERATE_NORM:
        return math.nan, True
    T = np.asarray(T, dtype=int)
    if T.size == 0:
        return 0.0, False
    return float(min(np.linalg.norm(D[T], 2) / norm, 1.0)), False


def kappa_probe(seq: GeneratedSequence, trace, K: int, alpha: int) -> list[ProbePoint]:
    """Probe ratio at ``t = t_j + k*alpha - 1`` for each change ``j`` and
    ``k = 0..K`` (``k = 0`` is the frame before the change).

    ``trace`` maps frame times to the subspace estimate in force after that
    frame; a sequence of frame records is accepted too. Frames missing from
    the trace are skipped.
    """
    if not isinstance(trace, dict):
        trace = {rec.t: rec.P_hat for rec in trace}
    out = []
    for j, t_j in enumerate(seq.model.change_times, start=1):
        P_new = seq.P_new(j)
        for k in range(K + 1):
            t = t_j + k * alpha - 1
            if t not in trace:
                continue
            value, degenerate = probe_value(trace[t], P_new, seq.support(t))
            out.append(ProbePoint(t, j, k, value, degenerate))
    return out


def probe_times(preset: Preset) -> set[int]:
    cfg = preset.tracker
    return {t_j + k * cfg.alpha - 1 for t_j in cfg.change_times for k in range(cfg.K + 1)}


def run_trial(preset: Preset, trial: int, seed: int, algorithms, cadence: int = 1):
    """Rows and probe points of one trial for every algorithm."""
    seq = generate(preset.model, preset.coeffs, preset.support, preset.t_max, seed)
    block = training_block(seq, preset.noise_amplitude)
    P0 = estimate_initial_subspace(block, preset.model.r0).basis
    t0 = preset.support.t_train
    wanted = probe_times(preset)
    rows, probes = [], []
    for algo in algorithms:
        cfg = replace(preset.tracker, deletion_enabled=(algo == "reprocs-cpca"))
        tracker = Tracker(P0, cfg, last_training_frame=block[:, -1])
        trace = {}
        for t in range(t0 + 1, preset.t_max + 1):
            rec = tracker.step(seq.frame(t))
            if t in wanted:
                trace[t] = rec.P_hat
            kappa = None
            if rec.event and rec.event.startswith("addition"):
                kappa, _ = probe_value(rec.P_hat, seq.P_new(seq.model.epoch_at(t)), seq.support(t))
                kappa = None if math.isnan(kappa) else kappa
            if (t - t0 - 1) % cadence and rec.event is None:
                continue
            S_t = seq.S[:, t - 1]
            s_norm = np.linalg.norm(S_t)
            err = np.linalg.norm(rec.S_hat - S_t) / s_norm if s_norm > 0 else math.nan
            precision, recall = support_scores(seq.support(t), rec.T_hat)
            se = subspace_error(rec.P_hat, seq.P_at(t))
            rows.append(MetricsRow(t, algo, trial, se, float(err), precision, recall, kappa, rec.phase))
        for p in kappa_probe(seq, trace, cfg.K, cfg.alpha):
            p.algo, p.trial = algo, trial
            probes.append(p)
    return rows, probes


def _run_trial_args(args):
    return run_trial(*args)


def mean_table(rows: list[MetricsRow]) -> list[dict]:
    """Mean over trials per ``(algo, t)``, summed exactly so trial order is irrelevant."""
    groups = defaultdict(list)
    for row in rows:
        groups[(row.algo, row.t)].append(row)
    out = []
    for (algo, t), grp in sorted(groups.items()):
        entry = {"t": t, "algo": algo, "trials": len(grp)}
        for name in ("se", "err_s_rel", "precision", "recall", "kappa_proxy"):
            vals = [getattr(r, name) for r in grp]
            vals = [v for v in vals if v is not None and not math.isnan(v)]
            entry[name] = math.fsum(vals) / len(vals) if vals else None
        phases = sorted({r.phase for r in grp})
        entry["phase"] = phases[0] if len(phases) == 1 else "/".join(phases)
        out.append(entry)
    return out


def summarize(preset: Preset, mean: list[dict], probes: list[ProbePoint]) -> dict:
    """Headline numbers per algorithm: support scores after the first
    ``alpha`` tracked frames, mean SE around each subspace update, relative
    sparse error after each K-th addition step, and the probe mean."""
    cfg = preset.tracker
    by_key = {(m["algo"], m["t"]): m for m in mean}
    algos = sorted({m["algo"] for m in mean})
    start = cfg.t_train + cfg.alpha
    summary = {"preset": preset.name, "Delta": preset.support.Delta, "algorithms": {}}
    for algo in algos:
        late = [m for m in mean if m["algo"] == algo and m["t"] > start]
        info = {
            "precision": math.fsum(m["precision"] for m in late) / len(late) if late else None,
            "recall": math.fsum(m["recall"] for m in late) / len(late) if late else None,
            "epochs": [],
        }
        for j, t_j in enumerate(cfg.change_times, start=1):
            at = lambda t: by_key.get((algo, t), {}).get("se")  # noqa: E731
            add_frames = [t_j + k * cfg.alpha - 1 for k in range(cfg.K + 1)]
            err_t = t_j + cfg.K * cfg.alpha - 1
            epoch = {
                "j": j,
                "addition_frames": add_frames,
                "addition_se": [at(t) for t in add_frames],
                "err_s_after_K": by_key.get((algo, err_t), {}).get("err_s_rel"),
            }
            if cfg.clusters is not None:
                t_del = t_j + cfg.K * cfg.alpha + len(cfg.clusters[j - 1]) * cfg.alpha_tilde - 1
                epoch["deletion_frame"] = t_del
                epoch["deletion_se"] = at(t_del)
            info["epochs"].append(epoch)
        vals = [p.value for p in probes if p.algo == algo and not p.degenerate]
        info["kappa_probe_mean"] = math.fsum(vals) / len(vals) if vals else None
        info["kappa_probe_max"] = max(vals) if vals else None
        summary["algorithms"][algo] = info
    return summary


def run_experiment(config: ExperimentConfig, preset: Preset | None = None) -> ExperimentResult:
    """Run ``config.trials`` trials (trial ``i`` uses seed ``config.seed + i``)."""
    preset = preset or config.build_preset()
    algos = [a for a in ALGORITHMS if a in config.algorithms]
    tasks = [(preset, i, config.seed + i, algos, config.cadence) for i in range(config.trials)]
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_run_trial_args, tasks))
    else:
        results = [_run_trial_args(task) for task in tasks]
    rows = [row for r, _ in results for row in r]
    probes = [p for _, ps in results for p in ps]
    rows.sort(key=lambda r: (r.trial, r.algo, r.t))
    probes.sort(key=lambda p: (p.trial, p.algo, p.t))
    mean = mean_table(rows)
    return ExperimentResult(rows, mean, probes, summarize(preset, mean, probes))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else format(value, ".17g")
    return str(value)


def emit_csv(table, path, header=CSV_HEADER) -> Path:
    """Write rows (dataclasses or dicts) as CSV; floats get 17 significant digits."""
    table = list(table)
    if not table:
        raise ValueError("refusing to write an empty table")
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in table:
                rec = row if isinstance(row, dict) else asdict(row)
                writer.writerow([_fmt(rec[h]) for h in header])
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_result(result: ExperimentResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": emit_csv(result.rows, out / "metrics.csv"),
        "mean": emit_csv(result.mean, out / "mean.csv", MEAN_HEADER),
    }
    if result.probes:
        paths["probes"] = emit_csv(
            result.probes, out / "probes.csv", ("t", "algo", "trial", "j", "k", "value", "degenerate")
        )
    paths["summary"] = out / "summary.json"
    paths["summary"].write_text(json.dumps(result.summary, indent=2, allow_nan=False, default=str) + "\n")
    return paths
