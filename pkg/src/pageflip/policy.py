"""Page-turn trigger policies over the stream of accepted positions.

Two strategies:

* ``halfway`` — turn once the reader has been a configurable fraction of
  the way into the page's last system for ``confirm_count`` consecutive
  accepts (debounced against tracker jitter).
* ``tempo`` — estimate reading speed from recent page fractions and turn
  when the projected time to the end of the page drops below a lead time.

Both are pure transition functions ``(state, position) -> (state',
decision)`` and emit at most one turn per page per state.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import BadConfig
from .filtering import ReadingPosition
from .layout import PageLayout, _checked_keys

POLICY_KINDS = ("halfway", "tempo")


@dataclass(frozen=True)
class PolicyConfig:
    """Trigger parameters for both policies.

    Attributes:
        kind: "halfway" or "tempo".
        turn_fraction: In-system fraction that arms the halfway trigger.
        confirm_count: Consecutive in-region accepts required to fire;
            1 reproduces an undebounced single-sample trigger.
        window_sec: Trailing window for tempo estimation.
        min_samples: Minimum samples in the window for a tempo estimate.
        min_velocity: Slopes at or below this (page fraction per second)
            count as "no estimate" — a pause, not an infinite ETA.
        lead_time_sec: Tempo policy fires when the estimated time left on
            the page drops to this value.
    """

    kind: str = "halfway"
    turn_fraction: float = 0.5
    confirm_count: int = 3
    window_sec: float = 3.0
    min_samples: int = 5
    min_velocity: float = 1e-4
    lead_time_sec: float = 1.0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise BadConfig(f"kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        if not 0.0 < self.turn_fraction <= 1.0:
            raise BadConfig(f"turn_fraction must be in (0, 1], got {self.turn_fraction}")
        if self.confirm_count < 1:
            raise BadConfig("confirm_count must be >= 1")
        if self.window_sec <= 0:
            raise BadConfig("window_sec must be > 0")
        if self.min_samples < 2:
            raise BadConfig("min_samples must be >= 2")
        if self.lead_time_sec <= 0:
            raise BadConfig("lead_time_sec must be > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        return cls(**_checked_keys(cls, d))


@dataclass(frozen=True)
class PolicyState:
    """Per-page trigger state; create a fresh one after every turn."""

    turned: bool = False
    streak: int = 0
    history: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class Turn:
    """Decision to turn the page now, carrying the triggering position."""

    trigger: ReadingPosition


TurnDecision = Turn | None


def halfway_step(
    ps: PolicyState,
    pos: ReadingPosition,
    layout: PageLayout,
    cfg: PolicyConfig = PolicyConfig(),
) -> tuple[PolicyState, TurnDecision]:
    """Debounced fixed-location trigger.

    The streak counts consecutive accepted positions that are in the last
    system at or past ``turn_fraction``; any other accept resets it. The
    turn fires when the streak reaches ``confirm_count``, once per state.
    """
    in_region = (
        pos.system_index == layout.last_index
        and pos.frac_in_system >= cfg.turn_fraction
    )
    streak = ps.streak + 1 if in_region else 0
    if in_region and streak >= cfg.confirm_count and not ps.turned:
        return dataclasses.replace(ps, streak=streak, turned=True), Turn(pos)
    return dataclasses.replace(ps, streak=streak), None


def tempo_estimate(
    history: tuple[tuple[float, float], ...],
    cfg: PolicyConfig = PolicyConfig(),
) -> float | None:
    """Least-squares reading velocity (page fraction per second).

    Fits a line to the (t, frac_page) samples inside the trailing
    ``window_sec``. Returns None when there are fewer than
    ``min_samples`` samples or the slope is at or below ``min_velocity``
    (stalled or regressing reader).
    """
    if not history:
        return None
    t_last = history[-1][0]
    points = [(t, f) for t, f in history if t >= t_last - cfg.window_sec]
    if len(points) < cfg.min_samples:
        return None
    n = len(points)
    mean_t = sum(t for t, _ in points) / n
    mean_f = sum(f for _, f in points) / n
    var_t = sum((t - mean_t) ** 2 for t, _ in points)
    if var_t == 0.0:
        return None
    cov = sum((t - mean_t) * (f - mean_f) for t, f in points)
    slope = cov / var_t
    if slope <= cfg.min_velocity:
        return None
    return slope


def tempo_step(
    ps: PolicyState,
    pos: ReadingPosition,
    layout: PageLayout,
    cfg: PolicyConfig = PolicyConfig(),
) -> tuple[PolicyState, TurnDecision]:
    """Tempo-extrapolation trigger.

    Appends the position to the history ring, estimates the reading
    velocity, and fires once the estimated time to the end of the page
    is at most ``lead_time_sec`` — but only while the position is in the
    last system, so an overestimated velocity cannot turn early.
    """
    history = ps.history
    if history and pos.t <= history[-1][0]:
        history = history[:-1]  # duplicate timestamp: keep the latest sample
    history = history + ((pos.t, pos.frac_page),)
    history = tuple((t, f) for t, f in history if t >= pos.t - cfg.window_sec)

    decision: TurnDecision = None
    turned = ps.turned
    if not ps.turned and pos.system_index == layout.last_index:
        velocity = tempo_estimate(history, cfg)
        if velocity is not None:
            eta = (1.0 - pos.frac_page) / velocity
            if eta <= cfg.lead_time_sec:
                turned = True
                decision = Turn(pos)
    return PolicyState(turned=turned, streak=0, history=history), decision


def policy_step(
    ps: PolicyState,
    pos: ReadingPosition,
    layout: PageLayout,
    cfg: PolicyConfig,
) -> tuple[PolicyState, TurnDecision]:
    """Dispatch to the configured policy."""
    if cfg.kind == "halfway":
        return halfway_step(ps, pos, layout, cfg)
    return tempo_step(ps, pos, layout, cfg)
