"""Map and configuration file formats.

Grid maps are character rasters, one line per row (row 0 = north)::

    grid v1        <- optional header
    S..#
    ....

``.`` visitable, ``#`` non-visitable, ``S`` visitable start (row-major order
gives the UAV order). Polygon maps are JSON::

    {"format": "polygon", "version": 1,
     "vertices": [[x, y], ...], "rows": R, "cols": C,   (or "cell_size": meters)
     "starts": [[row, col], ...]}                          (optional)

Run configs are ``key = value`` lines; ``#`` starts a comment.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConstraintError, ParseError, PolygonError, RangeError
from .geometry import Polygon, rasterize
from .gridworld import DENOMINATOR_MODES, GridMap

GRID_HEADER = "grid v1"
POLYGON_VERSION = 1
_GRID_CHARS = {".": True, "#": False, "S": True}


def parse_grid_text(text: str) -> GridMap:
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    first = 1
    if lines and lines[0].strip().lower().startswith("grid"):
        header = lines[0].strip().lower()
        if header != GRID_HEADER:
            raise ParseError(f"unsupported grid header {lines[0].strip()!r}", line=1)
        lines = lines[1:]
        first = 2
    if not lines:
        raise ParseError("grid map has no rows")
    width = len(lines[0])
    mask, starts = [], []
    for r, line in enumerate(lines):
        if len(line) != width:
            raise ParseError(f"row has {len(line)} cells, expected {width}", line=r + first)
        row = []
        for c, ch in enumerate(line):
            if ch not in _GRID_CHARS:
                raise ParseError(f"unexpected character {ch!r}", line=r + first, column=c + 1)
            row.append(_GRID_CHARS[ch])
            if ch == "S":
                starts.append((r, c))
        mask.append(row)
    if width == 0:
        raise ParseError("grid rows are empty", line=first)
    if not starts:
        raise ConstraintError("grid map has no start cell 'S'")
    return GridMap(np.array(mask, dtype=bool), starts)


def serialize_grid(grid: GridMap, header: bool = True) -> str:
    starts = set(grid.starts)
    rows = []
    for r in range(grid.rows):
        rows.append("".join(
            "S" if (r, c) in starts else ("." if grid.visitable[r, c] else "#")
            for c in range(grid.cols)))
    return "\n".join(([GRID_HEADER] if header else []) + rows) + "\n"


def parse_polygon_doc(doc) -> tuple[GridMap, Polygon]:
    if not isinstance(doc, dict):
        raise ParseError("polygon map must be a JSON object")
    if doc.get("version", POLYGON_VERSION) != POLYGON_VERSION:
        raise ParseError(f"unsupported polygon map version {doc.get('version')!r}")
    if "vertices" not in doc:
        raise ParseError("polygon map needs 'vertices'")
    try:
        polygon = Polygon(doc["vertices"])
    except PolygonError as exc:
        raise ConstraintError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad vertices: {exc}") from exc
    has_dims = "rows" in doc or "cols" in doc
    if has_dims == ("cell_size" in doc):
        raise ParseError("give exactly one of rows/cols or cell_size")
    starts = doc.get("starts")
    if starts is not None:
        starts = [tuple(int(v) for v in s) for s in starts]
    if has_dims:
        rows, cols = doc.get("rows"), doc.get("cols")
        if not (isinstance(rows, int) and isinstance(cols, int)):
            raise ParseError("rows and cols must both be integers")
        if rows < 1 or cols < 1:
            raise ConstraintError("rows and cols must be >= 1")
        grid = rasterize(polygon, rows, cols, starts=starts)
    else:
        size = doc["cell_size"]
        if not isinstance(size, (int, float)) or not size > 0:
            raise ConstraintError("cell_size must be a positive number")
        grid = rasterize(polygon, starts=starts, cell_size=float(size))
    return grid, polygon


def parse_map(path) -> tuple[GridMap, Polygon | None]:
    """Read a grid or polygon map. Returns the grid and, in polygon mode, the polygon."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
        return parse_polygon_doc(doc)
    return parse_grid_text(text), None


# ---- run configuration -------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    gamma: float = 0.91
    epsilon: float = 0.47
    epsilon_factor: float = 0.93
    epsilon_floor: float = 0.05
    memory: int = 60
    hidden: int = 167
    episodes: int = 30
    reward_new: float = 358.74
    reward_visited: float = -31.14
    reward_blocked: float = -225.17
    head: str = "linear"
    reward_denominator: str = "remaining"
    step_budget: int | None = None  # None: 40 x visitable cells
    time_budget: float | None = 1800.0  # seconds; None disables
    seed: int = 0
    minibatch: int = 16
    learning_rate: float = 0.1
    rho: float = 0.9
    rms_eps: float = 1e-8

    def validate(self) -> "RunConfig":
        def need(ok, key, what):
            if not ok:
                raise RangeError(f"{key} = {getattr(self, key)!r}: {what}")
        need(0 <= self.gamma <= 1, "gamma", "must be in [0, 1]")
        need(0 <= self.epsilon <= 1, "epsilon", "must be in [0, 1]")
        need(0 < self.epsilon_factor <= 1, "epsilon_factor", "must be in (0, 1]")
        need(0 <= self.epsilon_floor <= self.epsilon, "epsilon_floor", "must be in [0, epsilon]")
        need(self.memory >= 1, "memory", "must be >= 1")
        need(self.hidden >= 1, "hidden", "must be >= 1")
        need(self.episodes >= 1, "episodes", "must be >= 1")
        for key in ("reward_new", "reward_visited", "reward_blocked", "learning_rate", "rho", "rms_eps"):
            need(math.isfinite(getattr(self, key)), key, "must be finite")
        need(self.head in ("linear", "softmax"), "head", "must be linear or softmax")
        need(self.reward_denominator in DENOMINATOR_MODES, "reward_denominator",
             f"must be one of {DENOMINATOR_MODES}")
        need(self.step_budget is None or self.step_budget >= 0, "step_budget", "must be >= 0")
        need(self.time_budget is None or self.time_budget >= 0, "time_budget", "must be >= 0")
        need(self.seed >= 0, "seed", "must be >= 0")
        need(self.minibatch >= 1, "minibatch", "must be >= 1")
        need(self.learning_rate > 0, "learning_rate", "must be > 0")
        need(0 <= self.rho < 1, "rho", "must be in [0, 1)")
        need(self.rms_eps > 0, "rms_eps", "must be > 0")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_NULLABLE = {"step_budget", "time_budget"}


def _coerce(key: str, raw: str, line=None):
    if key not in _FIELD_TYPES:
        raise ParseError(f"unknown config key {key!r}", line=line)
    raw = raw.strip()
    if key in _NULLABLE and raw.lower() in ("none", "auto", ""):
        return None
    kind = _FIELD_TYPES[key].split(" ")[0]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ParseError(f"{key}: expected {kind}, got {raw!r}", line=line) from None
    return raw


def parse_config_text(text: str, overrides: dict | None = None) -> RunConfig:
    values = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=n)
        key, raw = line.split("=", 1)
        key = key.strip()
        if key in values:
            raise ParseError(f"duplicate key {key!r}", line=n)
        values[key] = _coerce(key, raw, line=n)
    for key, raw in (overrides or {}).items():
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ParseError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw) if isinstance(raw, str) else raw
    return RunConfig(**values).validate()


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Config file (optional) plus overrides; everything else takes the defaults."""
    text = Path(path).read_text() if path is not None else ""
    return parse_config_text(text, overrides)


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for key, value in cfg.to_dict().items():
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"
