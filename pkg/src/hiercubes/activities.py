"""Activity models z: blocks -> R+ and their truncations.

All evaluation happens in log domain (see logreal); a block with zero weight
has log activity -inf.  Models are immutable after construction and safe for
concurrent reads.

JSON schema (consumed by every CLI command via --model FILE):

    {"kind": "homogeneous", "d": 1, "M": 2,
     "table": {"0": 1.0, "-1": 1.0},
     "tail_down": {"kind": "geometric", "ratio": 0.25},   # optional
     "tail_up": {"kind": "zero"}}                          # optional
    {"kind": "parametric", "d": 1, "M": 2, "mu": -1.0, "J": 1.0, "alpha": 0.5}
    {"kind": "explicit", "d": 1, "M": 2,
     "entries": {"0:(0)": 1.0, "-1:(1)": 0.5}, "default": 0.0}
    {"kind": "effective", "d": 1, "M": 2,
     "zhat_table": {"0": 1.0}, "zhat_tail_up": {"kind": "geometric", "ratio": 1.0}}
    {"kind": "volume_truncated", "window": "0:(0)", "inner": {...}}
    {"kind": "scale_truncated", "depth": 2, "inner": {...}}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .blocks import Block, Geometry, contains, format_block, parse_block
from .logreal import LogReal, log1p_exp


@dataclass(frozen=True)
class TailRule:
    """Analytic continuation of a homogeneous table beyond its explicit range.

    kind "zero": activity vanishes outside the table.
    kind "geometric": each further scale step multiplies the boundary value
    by `ratio` (ratio in log domain below).
    """

    kind: str = "zero"
    ratio: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "geometric"):
            raise ValueError(f"unknown tail rule {self.kind!r}")
        if self.kind == "geometric" and self.ratio <= 0:
            raise ValueError("geometric tail needs ratio > 0")

    @property
    def log_ratio(self) -> float:
        return math.log(self.ratio) if self.kind == "geometric" else -math.inf

    def to_json_obj(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        return {"kind": "geometric", "ratio": self.ratio}

    @staticmethod
    def from_json_obj(obj: Optional[dict]) -> "TailRule":
        if obj is None:
            return TailRule()
        if obj["kind"] == "zero":
            return TailRule()
        return TailRule("geometric", float(obj["ratio"]))


class ActivityModel:
    """Base class.  Subclasses provide log_activity(block)."""

    geometry: Geometry

    def log_activity(self, b: Block) -> float:
        raise NotImplementedError

    def activity(self, b: Block) -> LogReal:
        """The activity of a block as a LogReal (total function)."""
        return LogReal.from_log(self.log_activity(b))

    @property
    def is_homogeneous(self) -> bool:
        """Scale-wise constant (possibly after unwrapping a scale truncation)."""
        return False

    def log_activity_at_scale(self, j: int) -> float:
        raise NotImplementedError(f"{type(self).__name__} is not scale-wise constant")

    def homogeneous_within(self, window: Block) -> bool:
        """Scale-wise constant on the subtree below `window`."""
        return self.is_homogeneous

    def min_active_scale(self) -> Optional[int]:
        """Lowest scale with non-zero activity, or None if unbounded below."""
        raise NotImplementedError

    def to_json_obj(self) -> dict:
        raise NotImplementedError


def _check_nonneg(values, what: str):
    for v in values:
        if v < 0 or math.isnan(v) or math.isinf(v):
            raise ValueError(f"{what} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class Homogeneous(ActivityModel):
    """Scale-wise constant activity given by a finite table plus tail rules."""

    geometry: Geometry
    log_table: dict[int, float] = field(default_factory=dict)
    tail_down: TailRule = field(default_factory=TailRule)
    tail_up: TailRule = field(default_factory=TailRule)

    @staticmethod
    def from_values(geometry: Geometry, table: dict[int, float],
                    tail_down: TailRule = TailRule(),
                    tail_up: TailRule = TailRule()) -> "Homogeneous":
        _check_nonneg(table.values(), "activity")
        log_table = {j: (math.log(v) if v > 0 else -math.inf) for j, v in table.items()}
        return Homogeneous(geometry, log_table, tail_down, tail_up)

    @staticmethod
    def constant(geometry: Geometry, value: float, scales) -> "Homogeneous":
        return Homogeneous.from_values(geometry, {j: value for j in scales})

    @property
    def is_homogeneous(self) -> bool:
        return True

    def log_activity_at_scale(self, j: int) -> float:
        if not self.log_table:
            return -math.inf
        lo, hi = min(self.log_table), max(self.log_table)
        if j < lo:
            return self.log_table[lo] + (lo - j) * self.tail_down.log_ratio
        if j > hi:
            return self.log_table[hi] + (j - hi) * self.tail_up.log_ratio
        return self.log_table.get(j, -math.inf)

    def log_activity(self, b: Block) -> float:
        return self.log_activity_at_scale(b.scale)

    def min_active_scale(self) -> Optional[int]:
        active = [j for j, lv in self.log_table.items() if lv > -math.inf]
        if self.tail_down.kind == "geometric" and self.log_table:
            return None
        return min(active) if active else 0

    def to_json_obj(self) -> dict:
        return {
            "kind": "homogeneous",
            "d": self.geometry.d,
            "M": self.geometry.M,
            "table": {str(j): math.exp(lv) if lv > -math.inf else 0.0
                      for j, lv in self.log_table.items()},
            "tail_down": self.tail_down.to_json_obj(),
            "tail_up": self.tail_up.to_json_obj(),
        }


@dataclass(frozen=True)
class Parametric(ActivityModel):
    """z_j = exp(M**(d j) mu - M**(alpha d j) J) for j >= 0, zero below scale 0."""

    geometry: Geometry
    mu: float
    J: float
    alpha: float

    def __post_init__(self):
        if not (0 < self.alpha < 1):
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")

    @property
    def is_homogeneous(self) -> bool:
        return True

    def log_activity_at_scale(self, j: int) -> float:
        if j < 0:
            return -math.inf
        d, M = self.geometry.d, self.geometry.M
        return M ** (d * j) * self.mu - M ** (self.alpha * d * j) * self.J

    def log_activity(self, b: Block) -> float:
        return self.log_activity_at_scale(b.scale)

    def min_active_scale(self) -> Optional[int]:
        return 0

    def to_json_obj(self) -> dict:
        return {"kind": "parametric", "d": self.geometry.d, "M": self.geometry.M,
                "mu": self.mu, "J": self.J, "alpha": self.alpha}


@dataclass(frozen=True)
class Explicit(ActivityModel):
    """Per-block activity map with a default for unlisted blocks."""

    geometry: Geometry
    log_entries: dict[Block, float] = field(default_factory=dict)
    log_default: float = -math.inf

    @staticmethod
    def from_values(geometry: Geometry, entries: dict[Block, float],
                    default: float = 0.0) -> "Explicit":
        _check_nonneg(entries.values(), "activity")
        _check_nonneg([default], "default activity")
        log_entries = {b: (math.log(v) if v > 0 else -math.inf) for b, v in entries.items()}
        log_default = math.log(default) if default > 0 else -math.inf
        return Explicit(geometry, log_entries, log_default)

    def log_activity(self, b: Block) -> float:
        return self.log_entries.get(b, self.log_default)

    def min_active_scale(self) -> Optional[int]:
        if self.log_default > -math.inf:
            return None
        active = [b.scale for b, lv in self.log_entries.items() if lv > -math.inf]
        return min(active) if active else 0

    def to_json_obj(self) -> dict:
        return {
            "kind": "explicit",
            "d": self.geometry.d,
            "M": self.geometry.M,
            "entries": {format_block(b): math.exp(lv) if lv > -math.inf else 0.0
                        for b, lv in self.log_entries.items()},
            "default": math.exp(self.log_default) if self.log_default > -math.inf else 0.0,
        }


@dataclass(frozen=True)
class EffectiveDesign(ActivityModel):
    """Homogeneous activity reconstructed from prescribed effective activities.

    Stores the target per-scale effective activities and derives the plain
    activity on demand via z_j = zhat_j * exp(M**(d j) p_{j-1}) with
    p_j = sum_{k <= j} M**(-d k) log(1 + zhat_k) -- the inversion of the
    partition-function recurrence, carried entirely in log domain.
    """

    geometry: Geometry
    log_zhat_table: dict[int, float] = field(default_factory=dict)
    zhat_tail_up: TailRule = field(default_factory=TailRule)

    @staticmethod
    def from_values(geometry: Geometry, zhat_table: dict[int, float],
                    zhat_tail_up: TailRule = TailRule()) -> "EffectiveDesign":
        _check_nonneg(zhat_table.values(), "effective activity")
        log_table = {j: (math.log(v) if v > 0 else -math.inf) for j, v in zhat_table.items()}
        return EffectiveDesign(geometry, log_table, zhat_tail_up)

    @property
    def is_homogeneous(self) -> bool:
        return True

    def log_zhat_at_scale(self, j: int) -> float:
        if not self.log_zhat_table:
            return -math.inf
        hi = max(self.log_zhat_table)
        if j > hi:
            return self.log_zhat_table[hi] + (j - hi) * self.zhat_tail_up.log_ratio
        return self.log_zhat_table.get(j, -math.inf)

    def min_active_scale(self) -> Optional[int]:
        active = [j for j, lv in self.log_zhat_table.items() if lv > -math.inf]
        return min(active) if active else 0

    def log_activity_at_scale(self, j: int) -> float:
        lz_hat = self.log_zhat_at_scale(j)
        if lz_hat == -math.inf:
            return -math.inf
        lo = self.min_active_scale()
        d, M = self.geometry.d, self.geometry.M
        # p_{j-1} accumulated from the lowest designed scale upwards
        p = 0.0
        for k in range(lo, j):
            lz_k = self.log_zhat_at_scale(k)
            if lz_k > -math.inf:
                p += M ** (-d * k) * log1p_exp(lz_k)
        return lz_hat + M ** (d * j) * p

    def log_activity(self, b: Block) -> float:
        return self.log_activity_at_scale(b.scale)

    def to_json_obj(self) -> dict:
        return {
            "kind": "effective",
            "d": self.geometry.d,
            "M": self.geometry.M,
            "zhat_table": {str(j): math.exp(lv) if lv > -math.inf else 0.0
                           for j, lv in self.log_zhat_table.items()},
            "zhat_tail_up": self.zhat_tail_up.to_json_obj(),
        }


@dataclass(frozen=True)
class Formula(ActivityModel):
    """Activity given by an arbitrary callable block -> value (Python API only).

    Used for inhomogeneous constructions that have no finite table, e.g. one
    marked block per scale.  Not JSON-serializable.
    """

    geometry: Geometry
    fn: Callable[[Block], float]
    lowest_scale: Optional[int] = None

    def log_activity(self, b: Block) -> float:
        v = self.fn(b)
        if v < 0:
            raise ValueError(f"activity formula returned {v} < 0 for {b}")
        return math.log(v) if v > 0 else -math.inf

    def min_active_scale(self) -> Optional[int]:
        return self.lowest_scale

    def to_json_obj(self) -> dict:
        raise TypeError("formula activities have no JSON form")


@dataclass(frozen=True)
class VolumeTruncated(ActivityModel):
    """z_window(B) = z(B) 1{B inside window}."""

    inner: ActivityModel
    window: Block

    @property
    def geometry(self) -> Geometry:  # type: ignore[override]
        return self.inner.geometry

    def log_activity(self, b: Block) -> float:
        if not contains(self.window, b, self.geometry):
            return -math.inf
        return self.inner.log_activity(b)

    def homogeneous_within(self, window: Block) -> bool:
        if not contains(self.window, window, self.geometry):
            return False
        return self.inner.homogeneous_within(window)

    def log_activity_at_scale(self, j: int) -> float:
        # valid only on the subtree below self.window; guarded by callers
        # via homogeneous_within
        if j > self.window.scale:
            return -math.inf
        return self.inner.log_activity_at_scale(j)

    def min_active_scale(self) -> Optional[int]:
        return self.inner.min_active_scale()

    def to_json_obj(self) -> dict:
        return {"kind": "volume_truncated", "window": format_block(self.window),
                "inner": self.inner.to_json_obj()}


@dataclass(frozen=True)
class ScaleTruncated(ActivityModel):
    """z^(n)(B) = z(B) 1{scale(B) >= -depth}."""

    inner: ActivityModel
    depth: int

    @property
    def geometry(self) -> Geometry:  # type: ignore[override]
        return self.inner.geometry

    @property
    def is_homogeneous(self) -> bool:
        return self.inner.is_homogeneous

    def homogeneous_within(self, window: Block) -> bool:
        return self.inner.homogeneous_within(window)

    def log_activity(self, b: Block) -> float:
        if b.scale < -self.depth:
            return -math.inf
        return self.inner.log_activity(b)

    def log_activity_at_scale(self, j: int) -> float:
        if j < -self.depth:
            return -math.inf
        return self.inner.log_activity_at_scale(j)

    def min_active_scale(self) -> Optional[int]:
        lo = self.inner.min_active_scale()
        return -self.depth if lo is None else max(lo, -self.depth)

    def to_json_obj(self) -> dict:
        return {"kind": "scale_truncated", "depth": self.depth,
                "inner": self.inner.to_json_obj()}


def truncate_volume(model: ActivityModel, window: Block) -> ActivityModel:
    return VolumeTruncated(model, window)


def truncate_scale(model: ActivityModel, depth: int) -> ActivityModel:
    return ScaleTruncated(model, depth)


def activity_from_effective(target: dict[int, float], geometry: Geometry,
                            tail_up: TailRule = TailRule()) -> EffectiveDesign:
    """Homogeneous activity whose effective activities equal `target`.

    `target` gives zhat_j for finitely many scales; scales below the table are
    zero, scales above follow `tail_up` applied to the topmost value.
    """
    for v in target.values():
        if v < 0:
            raise ValueError(f"effective activities must be >= 0, got {v}")
    return EffectiveDesign.from_values(geometry, target, tail_up)


_KINDS = {}


def model_from_json_obj(obj: dict) -> ActivityModel:
    kind = obj.get("kind")
    if kind in ("volume_truncated", "scale_truncated"):
        inner = model_from_json_obj(obj["inner"])
        if kind == "volume_truncated":
            return VolumeTruncated(inner, parse_block(obj["window"]))
        return ScaleTruncated(inner, int(obj["depth"]))
    geo = Geometry(int(obj["d"]), int(obj.get("M", 2)))
    if kind == "homogeneous":
        table = {int(j): float(v) for j, v in obj.get("table", {}).items()}
        return Homogeneous.from_values(
            geo, table,
            TailRule.from_json_obj(obj.get("tail_down")),
            TailRule.from_json_obj(obj.get("tail_up")))
    if kind == "parametric":
        return Parametric(geo, float(obj["mu"]), float(obj["J"]), float(obj["alpha"]))
    if kind == "explicit":
        entries = {parse_block(k): float(v) for k, v in obj.get("entries", {}).items()}
        return Explicit.from_values(geo, entries, float(obj.get("default", 0.0)))
    if kind == "effective":
        table = {int(j): float(v) for j, v in obj.get("zhat_table", {}).items()}
        return EffectiveDesign.from_values(
            geo, table, TailRule.from_json_obj(obj.get("zhat_tail_up")))
    raise ValueError(f"unknown activity model kind {kind!r}")


def load_model(path: str) -> ActivityModel:
    with open(path) as fh:
        return model_from_json_obj(json.load(fh))
