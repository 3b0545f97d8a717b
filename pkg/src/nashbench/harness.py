"""Experiment harness: seeded multi-trial runs, trace files, and summaries.

Traces are one CSV per run with a fixed header (17-significant-digit floats,
so reruns with the same seed reproduce files byte for byte when timing
recording is off), plus one metadata JSON per experiment.  `summarize` turns
a trace set into per-algorithm mean/standard-error curves; `verify_traces`
re-checks the invariants and certificate inequalities from the files alone.
"""

from __future__ import annotations

import csv
import json
import math
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import solver
from .config import ExperimentConfig
from .games import make_oracle
from .solver import AlgorithmSpec, RunResult, TraceRecord, certificate_values
from .space import ConfigurationError

_FIXED_COLUMNS_LEFT = ["trial", "algo", "iter", "candidate_id"]
_FIXED_COLUMNS_RIGHT = [
    "f_exact", "min_f_exact", "roi_size", "ci_width", "info_gain_total",
    "beta", "wall_ms", "warnings",
]


def trace_header(dim):
    """The documented trace CSV header for a joint space of dimension `dim`."""
    coords = [f"coord_{i}" for i in range(dim)]
    return ",".join(_FIXED_COLUMNS_LEFT + coords + _FIXED_COLUMNS_RIGHT)


def _fmt(x):
    return format(float(x), ".17g")


@dataclass
class TraceSet:
    """All runs of one experiment, keyed by (algorithm label, trial)."""

    config: ExperimentConfig
    beta: float
    labels: list
    results: dict
    failures: list
    dim: int
    n_candidates: int

    def runs_for(self, label):
        return [self.results[(label, t)] for t in range(self.config.trials)
                if (label, t) in self.results]


def _algo_labels(algorithms):
    labels = []
    seen = {}
    for spec in algorithms:
        base = spec.label
        if base in seen:
            seen[base] += 1
            labels.append(f"{base}-{seen[base]}")
        else:
            seen[base] = 1
            labels.append(base)
    return labels


def run_experiment(config, progress=None):
    """Run trials x algorithms; failures are recorded, not fatal.

    Every (algorithm, trial) pair gets the seed base_seed + trial, so the
    algorithms face identical initial designs and noise streams trial by
    trial.  With workers > 1 trials execute in a thread pool; results are
    keyed, so collection order never affects the output.
    """
    oracle = make_oracle(config.game)
    beta = config.resolve_beta(len(oracle.space))
    run_cfg = config.run_config(beta)
    labels = _algo_labels(config.algorithms)

    jobs = []
    for label, spec in zip(labels, config.algorithms):
        for trial in range(config.trials):
            jobs.append((label, spec, trial, config.base_seed + trial))

    results, failures = {}, []

    def execute(job):
        label, spec, trial, seed = job
        rng = np.random.default_rng(seed)
        return label, trial, seed, solver.run(oracle, spec, run_cfg, rng)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(execute, job): job for job in jobs}
            for fut, job in futures.items():
                label, spec, trial, seed = job
                try:
                    _, _, _, result = fut.result()
                    results[(label, trial)] = result
                except Exception:
                    failures.append((label, trial, traceback.format_exc()))
    else:
        for job in jobs:
            label, spec, trial, seed = job
            try:
                _, _, _, result = execute(job)
                results[(label, trial)] = result
            except Exception:
                failures.append((label, trial, traceback.format_exc()))
            if progress is not None:
                progress(label, trial)

    return TraceSet(
        config=config,
        beta=beta,
        labels=labels,
        results=results,
        failures=failures,
        dim=oracle.space.dim,
        n_candidates=len(oracle.space),
    )


def _run_filename(label, trial):
    safe = label.replace("/", "-")
    return f"{safe}_trial{trial:03d}.csv"


def write_traces(ts, out_dir):
    """One CSV per run plus metadata.json; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = trace_header(ts.dim)
    written = []
    runs_meta = []
    for label in ts.labels:
        for trial in range(ts.config.trials):
            key = (label, trial)
            if key not in ts.results:
                continue
            result = ts.results[key]
            path = out / _run_filename(label, trial)
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header.split(","))
                for rec in result.records:
                    row = (
                        [str(trial), label, str(rec.iteration), str(rec.candidate_id)]
                        + [_fmt(c) for c in rec.coords]
                        + [
                            _fmt(rec.f_exact),
                            _fmt(rec.min_f_exact),
                            str(rec.roi_size),
                            _fmt(rec.ci_width),
                            _fmt(rec.info_gain_total),
                            _fmt(rec.beta),
                            _fmt(rec.wall_ms),
                            rec.notes,
                        ]
                    )
                    writer.writerow(row)
            written.append(path)
            runs_meta.append(
                {
                    "file": path.name,
                    "algo": label,
                    "kind": result.algorithm.kind,
                    "epsilon": result.algorithm.epsilon,
                    "tau": result.algorithm.tau,
                    "trial": trial,
                    "seed": ts.config.base_seed + trial,
                    "init_ids": [int(i) for i in result.init_ids],
                    "report_id": int(result.report_id),
                    "report_coords": list(result.report_coords),
                    "warnings": list(result.warnings),
                }
            )
    from . import __version__

    metadata = {
        "version": __version__,
        "schema_header": header,
        "beta": ts.beta,
        "dim": ts.dim,
        "n_candidates": ts.n_candidates,
        "labels": ts.labels,
        "config": _config_dict(ts.config),
        "failures": [
            {"algo": label, "trial": trial, "error": err}
            for label, trial, err in ts.failures
        ],
        "runs": runs_meta,
    }
    meta_path = out / "metadata.json"
    with open(meta_path, "w") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(meta_path)
    return written


def _config_dict(config):
    d = asdict(config)
    d["algorithms"] = [asdict(a) for a in config.algorithms]
    d["game"]["candidate_cap"] = int(d["game"]["candidate_cap"])
    return d


@dataclass
class LoadedRun:
    label: str
    kind: str
    epsilon: float
    tau: float
    trial: int
    seed: int
    records: list
    report_id: int
    warnings: list


@dataclass
class LoadedTraces:
    metadata: dict
    runs: list

    @property
    def init_count(self):
        return int(self.metadata["config"]["init_count"])

    @property
    def labels(self):
        return list(self.metadata["labels"])


def load_traces(trace_dir):
    """Read back an experiment directory written by `write_traces`."""
    root = Path(trace_dir)
    meta_path = root / "metadata.json"
    if not meta_path.exists():
        raise ConfigurationError(f"no metadata.json under {root}")
    with open(meta_path) as fh:
        metadata = json.load(fh)
    dim = int(metadata["dim"])
    expected_header = metadata["schema_header"]
    runs = []
    for entry in metadata["runs"]:
        path = root / entry["file"]
        if not path.exists():
            raise ConfigurationError(f"trace file missing: {path}")
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = ",".join(next(reader))
            if header != expected_header:
                raise ConfigurationError(
                    f"{path}: header does not match the documented schema"
                )
            records = []
            for row in reader:
                it = int(row[2])
                coords = tuple(float(c) for c in row[4 : 4 + dim])
                base = 4 + dim
                records.append(
                    TraceRecord(
                        iteration=it,
                        candidate_id=int(row[3]),
                        coords=coords,
                        f_exact=float(row[base]),
                        min_f_exact=float(row[base + 1]),
                        roi_size=int(row[base + 2]),
                        ci_width=float(row[base + 3]),
                        info_gain=(),
                        info_gain_total=float(row[base + 4]),
                        beta=float(row[base + 5]),
                        wall_ms=float(row[base + 6]),
                        notes=row[base + 7],
                    )
                )
        runs.append(
            LoadedRun(
                label=entry["algo"],
                kind=entry["kind"],
                epsilon=float(entry.get("epsilon", 0.1)),
                tau=float(entry.get("tau", 1.0)),
                trial=int(entry["trial"]),
                seed=int(entry["seed"]),
                records=records,
                report_id=int(entry["report_id"]),
                warnings=list(entry.get("warnings", [])),
            )
        )
    return LoadedTraces(metadata=metadata, runs=runs)


@dataclass
class AlgoSummary:
    """Per-iteration aggregates for one algorithm across trials."""

    label: str
    trials: int
    iterations: np.ndarray
    fevals: np.ndarray
    mean_f: np.ndarray
    stderr_f: np.ndarray
    mean_min_f: np.ndarray
    stderr_min_f: np.ndarray
    final_f_median: float
    final_min_f_median: float


def _stderr(matrix):
    k = matrix.shape[0]
    if k < 2:
        return np.zeros(matrix.shape[1])
    return matrix.std(axis=0, ddof=1) / math.sqrt(k)


def summarize(ts):
    """Per-algorithm per-iteration mean and standard error of the exact loss
    (and of the running best), plus final-round medians."""
    if isinstance(ts, LoadedTraces):
        init_count = ts.init_count
        groups = {}
        for run_ in ts.runs:
            groups.setdefault(run_.label, []).append(run_.records)
        ordered = [(label, groups[label]) for label in ts.labels if label in groups]
    else:
        init_count = ts.config.init_count
        ordered = []
        for label in ts.labels:
            recs = [r.records for r in ts.runs_for(label)]
            if recs:
                ordered.append((label, recs))

    out = {}
    for label, all_records in ordered:
        lengths = {len(r) for r in all_records}
        if len(lengths) != 1:
            raise ValueError(f"{label}: trials have unequal trace lengths {lengths}")
        horizon = lengths.pop()
        f = np.array([[rec.f_exact for rec in records] for records in all_records])
        best = np.array([[rec.min_f_exact for rec in records] for records in all_records])
        iters = np.arange(1, horizon + 1)
        out[label] = AlgoSummary(
            label=label,
            trials=f.shape[0],
            iterations=iters,
            fevals=iters + init_count,
            mean_f=f.mean(axis=0),
            stderr_f=_stderr(f),
            mean_min_f=best.mean(axis=0),
            stderr_min_f=_stderr(best),
            final_f_median=float(np.median(f[:, -1])),
            final_min_f_median=float(np.median(best[:, -1])),
        )
    return out


def _parse_notes(notes):
    out = {}
    for token in notes.split(";"):
        if "=" in token:
            key, val = token.split("=", 1)
            out[key] = val
    return out


@dataclass
class VerifyReport:
    ok: bool
    lines: list

    def __str__(self):
        return "\n".join(self.lines)


def verify_traces(loaded):
    """Re-check run invariants and certificates from trace files alone.

    Hard failures: broken iteration numbering, a rising running minimum, a
    growing active region (with envelopes on), a beta drift, an
    epsilon-greedy exploration on a draw >= epsilon, or a violated
    deterministic certificate inequality on a widest-interval global run.
    The cumulative-loss certificate is statistical and only reported.
    """
    meta = loaded.metadata
    envelopes = bool(meta["config"]["envelopes"])
    n_agents = int(meta["config"]["game"]["n"])
    noise_variance = float(meta["config"]["game"]["noise_variance"])
    beta = float(meta["beta"])
    lines = []
    ok = True

    def fail(msg):
        nonlocal ok
        ok = False
        lines.append(f"FAIL {msg}")

    for run_ in loaded.runs:
        tag = f"{run_.label} trial {run_.trial}"
        recs = run_.records
        if [r.iteration for r in recs] != list(range(1, len(recs) + 1)):
            fail(f"{tag}: iterations are not 1..T")
            continue
        running = math.inf
        min_ok = True
        for r in recs:
            running = min(running, r.f_exact)
            if r.min_f_exact != running:
                min_ok = False
                break
        if not min_ok:
            fail(f"{tag}: running minimum column is inconsistent")
        if envelopes:
            sizes = [r.roi_size for r in recs]
            if any(b > a for a, b in zip(sizes, sizes[1:])):
                fail(f"{tag}: active region grew between rounds")
        if any(r.beta != beta for r in recs):
            fail(f"{tag}: beta drifted inside a run")
        if run_.kind == "epsilon-greedy":
            for r in recs:
                tokens = _parse_notes(r.notes)
                if "explore_draw" in tokens:
                    draw = float(tokens["explore_draw"])
                    explored = tokens.get("explored") == "1"
                    if explored != (draw < run_.epsilon):
                        fail(f"{tag}: exploration flag contradicts the logged draw "
                             f"at iteration {r.iteration}")
        if run_.kind == "arise-global" and envelopes:
            alphas = []
            complete = True
            for r in recs:
                tokens = _parse_notes(r.notes)
                if "alpha" not in tokens:
                    complete = False
                    break
                alphas.append(float(tokens["alpha"]))
            if not complete:
                fail(f"{tag}: missing per-round acquisition widths for certificates")
                continue
            cert = certificate_values(
                n_agents, noise_variance, beta, alphas,
                recs[-1].ci_width, recs[-1].info_gain_total,
                [r.f_exact for r in recs],
            )
            lines.append(
                f"INFO {tag}: interval energy {cert.sum_alpha_sq:.6g} "
                f"<= {cert.bound_alpha_sq:.6g}: {'ok' if cert.alpha_sq_ok else 'VIOLATED'}"
            )
            lines.append(
                f"INFO {tag}: final width {cert.final_ci_width:.6g} "
                f"<= {cert.bound_ci_width:.6g}: {'ok' if cert.ci_width_ok else 'VIOLATED'}"
            )
            lines.append(
                f"INFO {tag}: cumulative loss {cert.cumulative_loss:.6g} "
                f"<= {cert.bound_cumulative:.6g} (statistical): "
                f"{'ok' if cert.cumulative_ok else 'exceeded'}"
            )
            if not cert.all_ok:
                fail(f"{tag}: certificate inequality violated")
    lines.append("verification " + ("PASSED" if ok else "FAILED"))
    return VerifyReport(ok=ok, lines=lines)
