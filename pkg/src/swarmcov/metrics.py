"""Performance measures computed from episode records."""

from __future__ import annotations

import numpy as np

from .errors import CorruptRecord, UndefinedForEmptyEpisode


def execution_time(record) -> float:
    """Seconds between loop entry and exit."""
    return record.te1 - record.te0


def valid_action_fraction(record) -> float:
    """PA = VA / TA, where a valid action discovers a new cell."""
    if record.total_actions == 0:
        raise UndefinedForEmptyEpisode(f"episode {record.episode} took no actions")
    return record.valid_actions / record.total_actions


def per_uav_valid_fraction(record) -> list[float]:
    ta, va = record.uav_actions, record.uav_valid_actions
    idle = [i for i, n in enumerate(ta) if n == 0]
    if idle:
        raise UndefinedForEmptyEpisode(f"episode {record.episode}: UAV(s) {idle} took no actions")
    return [v / t for v, t in zip(va, ta)]


def cumulative_valid_fraction(records) -> list[list[float | None]]:
    """Per-UAV VA/TA accumulated over episodes; None while a UAV has no actions yet."""
    out = []
    va = ta = None
    for rec in records:
        if ta is None:
            va = np.zeros(rec.uav_count, dtype=np.int64)
            ta = np.zeros(rec.uav_count, dtype=np.int64)
        va += rec.uav_valid_actions
        ta += rec.uav_actions
        out.append([float(v / t) if t else None for v, t in zip(va, ta)])
    return out


def coverage_curve(record) -> list[tuple[int, float]]:
    """(action ordinal from 1, coverage after that action)."""
    traj = record.coverage_trajectory
    if not traj:
        raise UndefinedForEmptyEpisode(f"episode {record.episode} has no coverage trajectory")
    prev = record.initial_coverage
    for i, c in enumerate(traj):
        if c < prev:
            raise CorruptRecord(f"coverage decreases at action {i + 1}: {prev} -> {c}")
        prev = c
    return [(i + 1, c) for i, c in enumerate(traj)]


def visit_heatmap(record) -> np.ndarray:
    """Cell entry counts; each UAV's initial placement counts once."""
    return np.array(record.visit_counts, dtype=np.int64)


def time_evolution(summary) -> list[tuple[int, float]]:
    return [(r.episode, execution_time(r)) for r in summary.records]
