"""Run-directory outputs: CSV tables, PGM heatmaps, episode records, checkpoints.

Layout of a run directory::

    manifest.json         resolved config, seed, map, backend (no timestamps)
    episodes.csv          one row per episode
    summary.csv           one matrix-style row for the experiment
    coverage.csv          episode, action_ordinal, coverage
    time_evolution.csv    episode, et_seconds, solved, sim_steps
    action_fractions.csv  per-UAV valid-action fractions, per episode and cumulative
    records.json          full episode records without wall-clock fields
    timings.csv           episode, te0, te1 (the only wall-clock data besides et columns)
    network_<i>.ckpt      one checkpoint per network

Columns holding wall-clock values are listed in ``TIMESTAMP_COLUMNS``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import metrics, neural
from .errors import FormatError
from .experiment import EpisodeRecord, ExperimentSummary

EPISODE_COLUMNS = ["episode", "epsilon", "total_actions", "valid_actions", "pa", "solved",
                   "sim_steps", "et_seconds", "final_coverage"]
MATRIX_COLUMNS = ["map_size", "controller", "uavs", "solutions_found", "episodes",
                  "min_solution_et_seconds", "min_solution_sim_steps"]
COVERAGE_COLUMNS = ["episode", "action_ordinal", "coverage"]
TIMESTAMP_COLUMNS = frozenset({"et_seconds", "min_solution_et_seconds", "te0", "te1"})
RECORDS_VERSION = 1


def fmt(x) -> str:
    """Six-decimal fixed point; empty for None."""
    return "" if x is None else f"{x:.6f}"


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def episode_row(rec: EpisodeRecord) -> list[str]:
    pa = metrics.valid_action_fraction(rec) if rec.total_actions else None
    return [str(rec.episode), fmt(rec.epsilon), str(rec.total_actions), str(rec.valid_actions),
            fmt(pa), "true" if rec.solved else "false", str(rec.sim_steps),
            fmt(metrics.execution_time(rec)), fmt(rec.final_coverage)]


def write_episodes_csv(records, path) -> None:
    _write_csv(Path(path), EPISODE_COLUMNS, [episode_row(r) for r in records])


def solutions_text(found: int, episodes: int) -> str:
    return f"{found} out of {episodes}"


def matrix_row(size_label: str, controller: str, uavs: int, summary: ExperimentSummary | None) -> list[str]:
    if summary is None:
        return [size_label, controller, str(uavs), "", "", "", ""]
    steps = summary.min_solution_sim_steps
    return [size_label, controller, str(uavs), solutions_text(summary.solutions_found, summary.episodes),
            str(summary.episodes), fmt(summary.min_solution_et),
            "" if steps is None else str(steps)]


def write_coverage_csv(records, path) -> None:
    rows = []
    for rec in records:
        if rec.coverage_trajectory:
            rows += [[str(rec.episode), str(k), fmt(c)] for k, c in metrics.coverage_curve(rec)]
    _write_csv(Path(path), COVERAGE_COLUMNS, rows)


def write_time_evolution_csv(records, path) -> None:
    rows = [[str(r.episode), fmt(metrics.execution_time(r)), "true" if r.solved else "false",
             str(r.sim_steps)] for r in records]
    _write_csv(Path(path), ["episode", "et_seconds", "solved", "sim_steps"], rows)


def write_action_fractions_csv(records, path) -> None:
    cumulative = metrics.cumulative_valid_fraction(records)
    rows = []
    for rec, cum in zip(records, cumulative):
        ta, va = rec.uav_actions, rec.uav_valid_actions
        for u in range(rec.uav_count):
            frac = va[u] / ta[u] if ta[u] else None
            rows.append([str(rec.episode), str(u), str(ta[u]), str(va[u]), fmt(frac), fmt(cum[u])])
    _write_csv(Path(path), ["episode", "uav", "total_actions", "valid_actions", "pa", "cumulative_pa"], rows)


# ---- PGM heatmaps -----------------------------------------------------------

def write_pgm(counts, path, comment: str | None = None) -> None:
    """Plain (P2) PGM with maxval = largest count (at least 1)."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 2 or (counts < 0).any():
        raise ValueError("heatmap must be a 2-D array of non-negative counts")
    maxval = max(1, int(counts.max()))
    if maxval > 65535:
        raise ValueError("PGM cannot hold counts above 65535")
    lines = ["P2"]
    if comment:
        lines.append(f"# {comment}")
    lines += [f"{counts.shape[1]} {counts.shape[0]}", str(maxval)]
    lines += [" ".join(str(v) for v in row) for row in counts]
    Path(path).write_text("\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens += line.split("#", 1)[0].split()
    if not tokens or tokens[0] != "P2":
        raise FormatError(f"{path}: not a plain PGM (P2) file")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        values = [int(t) for t in tokens[4:]]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed PGM header or data") from exc
    if len(values) != width * height or any(v > maxval for v in values):
        raise FormatError(f"{path}: pixel data does not match the header")
    return np.array(values, dtype=np.int64).reshape(height, width)


# ---- episode records --------------------------------------------------------

def record_to_dict(rec: EpisodeRecord) -> dict:
    return {
        "episode": rec.episode,
        "epsilon": rec.epsilon,
        "uav_count": rec.uav_count,
        "initial_coverage": rec.initial_coverage,
        "coverage_trajectory": rec.coverage_trajectory,
        "sim_steps": rec.sim_steps,
        "solved": rec.solved,
        "visit_counts": rec.visit_counts.tolist(),
        "log_uav": rec.log_uav,
        "log_action": rec.log_action,
        "log_class": rec.log_class,
    }


def record_from_dict(d: dict, te0: float = 0.0, te1: float = 0.0) -> EpisodeRecord:
    return EpisodeRecord(
        episode=d["episode"], epsilon=d["epsilon"], uav_count=d["uav_count"],
        initial_coverage=d["initial_coverage"], coverage_trajectory=d["coverage_trajectory"],
        te0=te0, te1=te1, sim_steps=d["sim_steps"], solved=d["solved"],
        visit_counts=np.array(d["visit_counts"], dtype=np.int64),
        log_uav=d["log_uav"], log_action=d["log_action"], log_class=d["log_class"],
    )


def write_records(records, run_dir: Path) -> None:
    doc = {"version": RECORDS_VERSION, "records": [record_to_dict(r) for r in records]}
    (run_dir / "records.json").write_text(json.dumps(doc, separators=(",", ":")))
    _write_csv(run_dir / "timings.csv", ["episode", "te0", "te1"],
               [[str(r.episode), repr(r.te0), repr(r.te1)] for r in records])


def load_records(run_dir) -> list[EpisodeRecord]:
    run_dir = Path(run_dir)
    try:
        doc = json.loads((run_dir / "records.json").read_text())
    except FileNotFoundError:
        raise FormatError(f"{run_dir}: no records.json; is this a run directory?") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{run_dir}/records.json: {exc.msg}") from exc
    if doc.get("version") != RECORDS_VERSION:
        raise FormatError(f"{run_dir}/records.json: unsupported version {doc.get('version')!r}")
    timings = {}
    tpath = run_dir / "timings.csv"
    if tpath.exists():
        timings = {int(r["episode"]): (float(r["te0"]), float(r["te1"])) for r in read_csv(tpath)}
    return [record_from_dict(d, *timings.get(d["episode"], (0.0, 0.0))) for d in doc["records"]]


# ---- whole runs -------------------------------------------------------------

def write_derived(records, run_dir) -> list[Path]:
    """Coverage curves, time evolution and action fractions."""
    run_dir = Path(run_dir)
    out = [run_dir / "coverage.csv", run_dir / "time_evolution.csv", run_dir / "action_fractions.csv"]
    write_coverage_csv(records, out[0])
    write_time_evolution_csv(records, out[1])
    write_action_fractions_csv(records, out[2])
    return out


def write_heatmap(records, run_dir, episode: int, path=None) -> Path:
    rec = next((r for r in records if r.episode == episode), None)
    if rec is None:
        raise KeyError(f"no episode {episode} in this run")
    path = Path(path) if path is not None else Path(run_dir) / f"heatmap_ep{episode}.pgm"
    write_pgm(metrics.visit_heatmap(rec), path, comment=f"visit counts, episode {episode}")
    return path


def write_manifest(manifest: dict, run_dir) -> None:
    Path(run_dir, "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def write_run(summary: ExperimentSummary, run_dir, manifest: dict | None = None) -> Path:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    records = summary.records
    write_episodes_csv(records, run_dir / "episodes.csv")
    spec = summary.spec
    if spec is not None:
        label = f"{spec.grid.rows}x{spec.grid.cols}"
        ctl = "baseline" if spec.uav_count == 1 else spec.controller.mode
        _write_csv(run_dir / "summary.csv", MATRIX_COLUMNS,
                   [matrix_row(label, ctl, spec.uav_count, summary)])
    write_records(records, run_dir)
    write_derived(records, run_dir)
    if summary.controller is not None:
        for i, net in enumerate(summary.controller.networks):
            neural.save(net, run_dir / f"network_{i}.ckpt")
    if manifest is not None:
        write_manifest(manifest, run_dir)
    return run_dir


def write_matrix_report(results, path) -> None:
    rows = [matrix_row(f"{r.cell.size}x{r.cell.size}", r.cell.approach, r.cell.uavs, r.summary)
            for r in results]
    _write_csv(Path(path), MATRIX_COLUMNS, rows)
