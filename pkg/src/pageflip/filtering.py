"""Reading-order filtering of raw tracker predictions.

A score tracker emits bounding-box centers with confidence scores many
times per second and may predict anywhere on the page. This module snaps
each prediction onto the detected systems and enforces how a human reads
a score: start top left, move left to right and top to bottom, never skip
a system, and only move backward on confident evidence.

``filter_step`` is a pure transition function ``(state, prediction) ->
(state', outcome)``; a session owns exactly one state.
"""

from __future__ import annotations

import dataclasses
import math
import statistics
from dataclasses import dataclass
from enum import Enum

from .errors import BadConfig
from .layout import PageLayout, System, _checked_keys


@dataclass(frozen=True)
class TrackerPrediction:
    """One raw tracker output.

    Attributes:
        t: Seconds since session start.
        u, v: Bounding-box center in pixels.
        w, h: Bounding-box size in pixels.
        conf: Confidence in [0, 1].
    """

    t: float
    u: float
    v: float
    w: float = 0.0
    h: float = 0.0
    conf: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise ValueError(f"t must be finite, got {self.t}")
        if not 0.0 <= self.conf <= 1.0:
            raise ValueError(f"conf must be in [0, 1], got {self.conf}")
        if self.w < 0 or self.h < 0:
            raise ValueError("bbox size must be non-negative")


@dataclass(frozen=True)
class ReadingPosition:
    """A filtered musical position on a page."""

    page_index: int
    system_index: int
    x: float
    frac_in_system: float
    frac_page: float
    t: float


class RejectReason(str, Enum):
    OFF_SYSTEM = "off_system"
    NON_ADJACENT_JUMP = "non_adjacent_jump"
    LOW_CONFIDENCE_BACKWARD = "low_confidence_backward"
    LOW_CONFIDENCE = "low_confidence"
    NON_MONOTONIC_TIME = "non_monotonic_time"


@dataclass(frozen=True)
class Accept:
    position: ReadingPosition


@dataclass(frozen=True)
class Reject:
    reason: RejectReason


FilterOutcome = Accept | Reject


@dataclass(frozen=True)
class FilterConfig:
    """Reading-order rule parameters.

    Attributes:
        backward_conf: Minimum confidence for any backward move.
        backtrack_eps: Within-system x hysteresis in pixels; smaller
            regressions are not considered backward (tracker jitter).
        max_snap: Maximum vertical distance (px) from a system's row band
            for an outside prediction to snap onto it. None = half the
            page's median system height, computed per page.
        min_conf: General confidence gate; 0 disables it.
    """

    backward_conf: float = 0.5
    backtrack_eps: float = 10.0
    max_snap: float | None = None
    min_conf: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.backward_conf <= 1.0:
            raise BadConfig(f"backward_conf must be in [0, 1], got {self.backward_conf}")
        if self.backtrack_eps < 0:
            raise BadConfig("backtrack_eps must be >= 0")
        if self.max_snap is not None and self.max_snap < 0:
            raise BadConfig("max_snap must be >= 0")
        if not 0.0 <= self.min_conf <= 1.0:
            raise BadConfig(f"min_conf must be in [0, 1], got {self.min_conf}")

    @classmethod
    def from_dict(cls, d: dict) -> "FilterConfig":
        return cls(**_checked_keys(cls, d))


@dataclass(frozen=True)
class FilterState:
    """Where the filter believes the reader is on the current page."""

    page_index: int
    current_system: int
    current_x: float
    accepted_count: int = 0
    rejected_count: int = 0
    last_t: float = -math.inf


def effective_max_snap(layout: PageLayout, cfg: FilterConfig) -> float:
    """Resolve the snap radius, defaulting to half the median system height."""
    if cfg.max_snap is not None:
        return cfg.max_snap
    return 0.5 * statistics.median(s.height for s in layout.systems)


def snap_to_system(
    pred: TrackerPrediction,
    layout: PageLayout,
    cfg: FilterConfig = FilterConfig(),
) -> tuple[int, float] | None:
    """Map a bbox center onto a system, or None when it is off-system.

    A prediction inside some system's row band belongs to it; otherwise
    the system with the nearest band center is chosen and accepted only
    if the vertical distance to its band is within the snap radius. The
    x coordinate is clamped to the chosen system's ink extent.
    """
    chosen: System | None = None
    for system in layout.systems:
        if system.y_top <= pred.v <= system.y_bottom:
            chosen = system
            break
    if chosen is None:
        chosen = min(layout.systems, key=lambda s: abs(pred.v - s.y_center))
        edge_distance = max(chosen.y_top - pred.v, pred.v - chosen.y_bottom)
        if edge_distance > effective_max_snap(layout, cfg):
            return None
    x = min(max(pred.u, float(chosen.x_left)), float(chosen.x_right))
    return chosen.index, x


def fraction_in_system(system: System, x: float) -> float:
    """Fraction of the system's ink extent covered at x, clamped to [0, 1]."""
    return min(max((x - system.x_left) / system.width, 0.0), 1.0)


def reading_fraction(system_index: int, x: float, layout: PageLayout) -> float:
    """Scalar reading progress through the page in [0, 1].

    Systems are laid end to end by their ink widths; the fraction is the
    distance covered so far over the total. This is the coordinate tempo
    estimation runs on.
    """
    widths = [s.width for s in layout.systems]
    before = sum(widths[:system_index])
    covered = before + (x - layout.systems[system_index].x_left)
    return min(max(covered / sum(widths), 0.0), 1.0)


def position_for_fraction(frac: float, layout: PageLayout) -> tuple[int, float]:
    """Inverse of :func:`reading_fraction`: fraction -> (system_index, x)."""
    widths = [s.width for s in layout.systems]
    target = min(max(frac, 0.0), 1.0) * sum(widths)
    covered = 0.0
    for system, width in zip(layout.systems, widths):
        if target < covered + width or system.index == layout.last_index:
            return system.index, system.x_left + (target - covered)
        covered += width
    raise AssertionError("unreachable: layout has no systems")


def reset_for_page(page_index: int, layout: PageLayout) -> FilterState:
    """Fresh state at the top left of a page: first system, left edge."""
    return FilterState(
        page_index=page_index,
        current_system=0,
        current_x=float(layout.systems[0].x_left),
    )


def filter_step(
    state: FilterState,
    pred: TrackerPrediction,
    layout: PageLayout,
    cfg: FilterConfig = FilterConfig(),
) -> tuple[FilterState, FilterOutcome]:
    """Apply the reading-order rules to one prediction.

    Rejects, in order: non-monotonic timestamps, off-system predictions,
    below the general confidence gate, jumps of two or more systems
    (regardless of confidence), and backward moves below
    ``cfg.backward_conf``. A move is backward when the system index
    decreases, or the x position within the same system decreases by more
    than ``cfg.backtrack_eps``. Rejections never change the positional
    state; accepts advance it and stamp ``last_t``.
    """

    def rejected(reason: RejectReason) -> tuple[FilterState, Reject]:
        bumped = dataclasses.replace(state, rejected_count=state.rejected_count + 1)
        return bumped, Reject(reason)

    if pred.t < state.last_t:
        return rejected(RejectReason.NON_MONOTONIC_TIME)
    snapped = snap_to_system(pred, layout, cfg)
    if snapped is None:
        return rejected(RejectReason.OFF_SYSTEM)
    system_index, x = snapped
    if pred.conf < cfg.min_conf:
        return rejected(RejectReason.LOW_CONFIDENCE)
    if abs(system_index - state.current_system) >= 2:
        return rejected(RejectReason.NON_ADJACENT_JUMP)
    backward = system_index < state.current_system or (
        system_index == state.current_system and x < state.current_x - cfg.backtrack_eps
    )
    if backward and pred.conf < cfg.backward_conf:
        return rejected(RejectReason.LOW_CONFIDENCE_BACKWARD)

    system = layout.systems[system_index]
    position = ReadingPosition(
        page_index=state.page_index,
        system_index=system_index,
        x=x,
        frac_in_system=fraction_in_system(system, x),
        frac_page=reading_fraction(system_index, x, layout),
        t=pred.t,
    )
    advanced = dataclasses.replace(
        state,
        current_system=system_index,
        current_x=x,
        accepted_count=state.accepted_count + 1,
        last_t=pred.t,
    )
    return advanced, Accept(position)
