"""Tracker stand-ins: trace replay, synthetic trajectories, timing oracles.

The real score follower is replaced by two sources: JSONL trace files
recorded elsewhere, and a seeded synthetic generator that walks the
reading path of a layout at constant speed with Gaussian jitter and
occasional low-confidence outliers. ``oracle_turn_time`` computes the
ground-truth trigger time for the noiseless path by dense scanning, for
scoring actual turn timing offline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import BadConfig, NonMonotonicTrace, ParseError
from .filtering import TrackerPrediction, position_for_fraction
from .layout import PageLayout
from .policy import PolicyConfig

TRACE_FIELDS = ("t", "u", "v", "w", "h", "conf")


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of the synthetic tracker.

    Attributes:
        seconds_per_page: How long the reader spends on each page.
        rate_hz: Predictions per second.
        noise_px: Gaussian sigma added to the true (u, v), in pixels.
        outlier_prob: Per-sample probability of a tracker-lost outlier,
            emitted uniformly over the page with low confidence.
        outlier_conf_range: Confidence range [lo, hi] for outliers.
        inlier_conf_range: Confidence range [lo, hi] for inliers.
        seed: 64-bit seed; pages draw from split substreams, so earlier
            pages' samples do not depend on the page count.
    """

    seconds_per_page: float
    rate_hz: float = 20.0
    noise_px: float = 3.0
    outlier_prob: float = 0.05
    outlier_conf_range: tuple[float, float] = (0.0, 0.4)
    inlier_conf_range: tuple[float, float] = (0.6, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.seconds_per_page <= 0:
            raise BadConfig("seconds_per_page must be > 0")
        if self.rate_hz <= 0:
            raise BadConfig("rate_hz must be > 0")
        if self.noise_px < 0:
            raise BadConfig("noise_px must be >= 0")
        if not 0.0 <= self.outlier_prob < 1.0:
            raise BadConfig(f"outlier_prob must be in [0, 1), got {self.outlier_prob}")
        for name in ("outlier_conf_range", "inlier_conf_range"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi <= 1.0:
                raise BadConfig(f"{name} must satisfy 0 <= lo <= hi <= 1")


def load_trace(path) -> list[TrackerPrediction]:
    """Read a JSONL prediction trace; timestamps must strictly increase.

    Each line is an object with keys t, u, v, w, h, conf.

    Raises:
        ParseError: malformed JSON or missing/invalid fields (with the
            1-based line number).
        NonMonotonicTrace: a timestamp not greater than its predecessor.
    """
    predictions: list[TrackerPrediction] = []
    last_t: float | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip() == "":
                continue
            try:
                record = json.loads(line)
                pred = TrackerPrediction(
                    **{k: float(record[k]) for k in TRACE_FIELDS}
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(line_no, str(exc)) from exc
            if last_t is not None and pred.t <= last_t:
                raise NonMonotonicTrace(line_no)
            last_t = pred.t
            predictions.append(pred)
    return predictions


def save_trace(predictions, path) -> None:
    """Write predictions as UTF-8 JSONL with LF line endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pred in predictions:
            fh.write(json.dumps({k: getattr(pred, k) for k in TRACE_FIELDS}))
            fh.write("\n")


def _page_sample_indices(page: int, cfg: SyntheticConfig) -> range:
    """Global tick indices whose times fall within the page's interval."""
    start = math.ceil(page * cfg.seconds_per_page * cfg.rate_hz - 1e-9)
    end = math.ceil((page + 1) * cfg.seconds_per_page * cfg.rate_hz - 1e-9)
    return range(start, end)


def synth_trajectory(
    layouts: list[PageLayout],
    cfg: SyntheticConfig,
) -> list[tuple[int, TrackerPrediction]]:
    """Generate a deterministic prediction stream over the given pages.

    The ground-truth reader advances linearly from page fraction 0 to 1
    over ``seconds_per_page`` on each page; the fraction maps back to a
    (system, x) position with v at the system's vertical center. Samples
    are taken at global times k / rate_hz. Inliers get Gaussian jitter on
    (u, v) and a confidence from the inlier range; with probability
    ``outlier_prob`` the sample is replaced by a uniform point on the
    page with a confidence from the outlier range.

    Returns (true_page_index, prediction) pairs; the page index is
    generation-side ground truth, useful for evaluation. Identical
    configs produce identical streams.
    """
    if not layouts:
        raise ValueError("need at least one layout")
    for layout in layouts:
        if not layout.systems:
            raise ValueError(f"layout for page {layout.page_index} has no systems")
    substreams = np.random.SeedSequence(cfg.seed).spawn(len(layouts))
    samples: list[tuple[int, TrackerPrediction]] = []
    for page, layout in enumerate(layouts):
        rng = np.random.default_rng(substreams[page])
        for k in _page_sample_indices(page, cfg):
            t = k / cfg.rate_hz
            frac = (t - page * cfg.seconds_per_page) / cfg.seconds_per_page
            system_index, x = position_for_fraction(frac, layout)
            system = layout.systems[system_index]
            if rng.random() < cfg.outlier_prob:
                u = rng.uniform(0.0, layout.width)
                v = rng.uniform(0.0, layout.height)
                conf = rng.uniform(*cfg.outlier_conf_range)
            else:
                u = x + rng.normal(0.0, cfg.noise_px)
                v = system.y_center + rng.normal(0.0, cfg.noise_px)
                conf = rng.uniform(*cfg.inlier_conf_range)
            samples.append(
                (
                    page,
                    TrackerPrediction(
                        t=t,
                        u=float(u),
                        v=float(v),
                        w=60.0,
                        h=float(system.height),
                        conf=float(conf),
                    ),
                )
            )
    return samples


def oracle_turn_time(
    layout: PageLayout,
    cfg: SyntheticConfig,
    policy_cfg: PolicyConfig = PolicyConfig(),
) -> float:
    """Ground-truth halfway trigger time for the noiseless path, in seconds
    from the start of the page.

    Scans the analytic constant-speed path at 1 ms resolution and returns
    the smallest t at which it sits in the last system at or past
    ``policy_cfg.turn_fraction``. Deliberately avoids the policy and
    filter code paths: the fraction -> system mapping is recomputed here
    from cumulative widths.
    """
    spp = cfg.seconds_per_page
    widths = np.array([s.width for s in layout.systems], dtype=np.float64)
    cum = np.concatenate(([0.0], np.cumsum(widths)))
    total = cum[-1]
    last = len(widths) - 1

    n = int(round(spp * 1000)) + 1
    t = np.linspace(0.0, spp, n)
    target = (t / spp) * total
    idx = np.clip(np.searchsorted(cum[1:], target, side="right"), 0, last)
    frac_in_system = (target - cum[idx]) / widths[idx]
    hit = (idx == last) & (frac_in_system >= policy_cfg.turn_fraction)
    if not hit.any():
        return float(spp)
    return float(t[int(np.argmax(hit))])
