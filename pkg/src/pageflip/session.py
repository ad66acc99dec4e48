"""Session loop: tracker source -> filter -> policy -> device -> log.

The loop is single-threaded and driven by prediction timestamps (logical
time), never the wall clock, so replays of the same inputs produce
byte-identical logs. After each physical turn a blackout window swallows
predictions while the page flips and the camera settles. Device failures
are logged and the session stays on the current page; the policy's
turned flag is cleared so the turn is retried on the next qualifying
trigger.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .device import DEFAULT_TIMEOUT_MS
from .errors import BadConfig, DeviceIo, DeviceTimeout, LogMismatch
from .filtering import (
    Accept,
    FilterConfig,
    ReadingPosition,
    TrackerPrediction,
    filter_step,
    reset_for_page,
)
from .layout import PageLayout, _checked_keys
from .policy import PolicyConfig, PolicyState, policy_step


@dataclass(frozen=True)
class SessionConfig:
    """Loop parameters plus the nested filter and policy configs."""

    rate_hz: float = 20.0
    blackout_sec: float = 1.0
    device_timeout_ms: float = DEFAULT_TIMEOUT_MS
    filter: FilterConfig = field(default_factory=FilterConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise BadConfig("rate_hz must be > 0")
        if self.blackout_sec <= 0:
            raise BadConfig("blackout_sec must be > 0")
        if self.device_timeout_ms <= 0:
            raise BadConfig("device_timeout_ms must be > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        d = _checked_keys(cls, d)
        if isinstance(d.get("filter"), dict):
            d["filter"] = FilterConfig.from_dict(d["filter"])
        if isinstance(d.get("policy"), dict):
            d["policy"] = PolicyConfig.from_dict(d["policy"])
        return cls(**d)


@dataclass(frozen=True)
class PageTurnEvent:
    """One logged physical page turn (always forward by one page)."""

    t: float
    from_page: int
    to_page: int
    policy_kind: str
    trigger: ReadingPosition
    device_latency_ms: float


@dataclass
class SessionLog:
    """Ordered session events, serializable as JSONL (one event per line)."""

    events: list[dict] = field(default_factory=list)

    def append(self, event: dict) -> None:
        self.events.append(event)

    def turns(self) -> list[PageTurnEvent]:
        out = []
        for e in self.events:
            if e["kind"] != "turn":
                continue
            trig = e["trigger"]
            out.append(
                PageTurnEvent(
                    t=e["t"],
                    from_page=e["from_page"],
                    to_page=e["to_page"],
                    policy_kind=e["policy"],
                    trigger=ReadingPosition(
                        page_index=trig["page"],
                        system_index=trig["system"],
                        x=trig["x"],
                        frac_in_system=trig["frac_in_system"],
                        frac_page=trig["frac_page"],
                        t=trig["t"],
                    ),
                    device_latency_ms=e["device_latency_ms"],
                )
            )
        return out

    @property
    def accepted_count(self) -> int:
        return sum(1 for e in self.events if e["kind"] == "accept")

    @property
    def rejected_count(self) -> int:
        return sum(1 for e in self.events if e["kind"] == "reject")

    def to_lines(self) -> list[str]:
        return [json.dumps(e) for e in self.events]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.to_lines():
                fh.write(line)
                fh.write("\n")

    @classmethod
    def load(cls, path) -> "SessionLog":
        events = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    events.append(json.loads(line))
        return cls(events=events)


def _position_dict(pos: ReadingPosition) -> dict:
    return {
        "page": pos.page_index,
        "system": pos.system_index,
        "x": pos.x,
        "frac_in_system": pos.frac_in_system,
        "frac_page": pos.frac_page,
        "t": pos.t,
    }


def run_session(
    layouts: list[PageLayout],
    source: Iterable[TrackerPrediction],
    cfg: SessionConfig,
    device,
) -> SessionLog:
    """Run one session over an ordered prediction source.

    Per prediction: skip it inside a blackout window; otherwise filter
    it, feed accepts to the policy, and on a turn decision drive the
    device, advance the page, and reset the filter and policy for the
    new page. A trigger on the final page is suppressed with a
    ``no_next_page`` warning (the device cannot turn back, so there is
    nothing to turn to). Terminates when the source is exhausted.
    """
    if not layouts:
        raise ValueError("need at least one layout")
    for layout in layouts:
        if not layout.systems:
            raise ValueError(f"layout for page {layout.page_index} has no systems")
    log = SessionLog()
    page = 0
    filter_state = reset_for_page(page, layouts[page])
    policy_state = PolicyState()
    blackout_until = -float("inf")
    log.append({"t": 0.0, "kind": "page_reset", "page": page})

    for pred in source:
        if pred.t < blackout_until:
            log.append({"t": pred.t, "kind": "reject", "reason": "blackout", "page": page})
            continue
        filter_state, outcome = filter_step(filter_state, pred, layouts[page], cfg.filter)
        if not isinstance(outcome, Accept):
            log.append(
                {
                    "t": pred.t,
                    "kind": "reject",
                    "reason": outcome.reason.value,
                    "page": page,
                }
            )
            continue
        position = outcome.position
        log.append({"t": pred.t, "kind": "accept", **_position_dict(position)})
        policy_state, decision = policy_step(policy_state, position, layouts[page], cfg.policy)
        if decision is None:
            continue
        if page == len(layouts) - 1:
            log.append({"t": pred.t, "kind": "warning", "message": "no_next_page"})
            continue
        try:
            ack = device.turn_page()
        except DeviceTimeout:
            log.append({"t": pred.t, "kind": "device_timeout"})
            # retry on the next qualifying trigger
            policy_state = dataclasses.replace(policy_state, turned=False)
            continue
        except DeviceIo as exc:
            log.append({"t": pred.t, "kind": "warning", "message": f"device_io: {exc}"})
            policy_state = dataclasses.replace(policy_state, turned=False)
            continue
        log.append({"t": pred.t, "kind": "device_ack", "latency_ms": ack.latency_ms})
        log.append(
            {
                "t": pred.t,
                "kind": "turn",
                "from_page": page,
                "to_page": page + 1,
                "policy": cfg.policy.kind,
                "trigger": _position_dict(decision.trigger),
                "device_latency_ms": ack.latency_ms,
            }
        )
        page += 1
        filter_state = reset_for_page(page, layouts[page])
        policy_state = PolicyState()
        blackout_until = pred.t + cfg.blackout_sec
        log.append({"t": pred.t, "kind": "page_reset", "page": page})
    return log


@dataclass(frozen=True)
class TurnMetrics:
    """Per-page turn timing offsets against an oracle, plus tallies."""

    offsets: dict[int, float]
    missed_pages: int
    accepted: int
    rejected: int

    def to_dict(self) -> dict:
        return {
            "offsets": {str(k): v for k, v in sorted(self.offsets.items())},
            "missed_pages": self.missed_pages,
            "accepted": self.accepted,
            "rejected": self.rejected,
        }


def evaluate_turns(log: SessionLog, oracle_times: Mapping[int, float]) -> TurnMetrics:
    """Score a session log against per-page oracle turn times.

    ``oracle_times`` maps each non-final page index to its ground-truth
    turn time (seconds). Each logged turn contributes a signed offset
    ``actual - oracle``; oracle pages without a logged turn count as
    missed.

    Raises:
        LogMismatch: the log contains a turn for a page the oracle does
            not cover.
    """
    offsets: dict[int, float] = {}
    for turn in log.turns():
        if turn.from_page not in oracle_times:
            raise LogMismatch(
                f"log has a turn for page {turn.from_page} but the oracle does not"
            )
        offsets[turn.from_page] = turn.t - oracle_times[turn.from_page]
    missed = sum(1 for page in oracle_times if page not in offsets)
    return TurnMetrics(
        offsets=offsets,
        missed_pages=missed,
        accepted=log.accepted_count,
        rejected=log.rejected_count,
    )
