"""Sheet-image layout analysis: locate the systems on a score page.

Pipeline:
    1. Grayscale conversion (BT.601 luma weights).
    2. Adaptive binarization: each pixel is ink if it is darker than a
       Gaussian-weighted local mean minus a fixed offset.
    3. Row projection: count ink pixels per row.
    4. Threshold the profile to get staff-line bands (maximal runs of
       high-ink rows).
    5. Group bands into staves at unusually large center-to-center gaps.
    6. Group staves into systems (fixed group size, with a gap-based
       fallback) and measure each system's ink x-extent.

Images are plain numpy arrays: uint8 ``(H, W)`` grayscale, uint8
``(H, W, 3)`` RGB, and bool ``(H, W)`` ink masks (True = ink). All
functions are pure; safe to run concurrently on different pages.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import BadConfig, NoInk


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayoutConfig:
    """Tuning knobs for page analysis. Defaults suit ~1000 px wide scans.

    Attributes:
        window: Side of the Gaussian averaging window, odd and >= 3.
        offset: Intensity subtracted from the local mean; larger values
            binarize more conservatively (less ink).
        line_threshold_rel: Profile threshold as a fraction of the profile
            maximum; rows at or above it count as staff-line rows.
        staff_gap_factor: A band gap larger than this multiple of the
            median band gap starts a new staff.
        staves_per_system: Fixed staves per system (2 = grand staff).
            0 groups staves by gaps instead; non-divisible staff counts
            also fall back to gap grouping.
        system_gap_factor: Gap-grouping threshold, as a multiple of the
            median staff-center gap.
        col_threshold_rel: A column belongs to a system's x-extent when
            its in-band ink count reaches this fraction of the system's
            band count.
    """

    window: int = 51
    offset: float = 10.0
    line_threshold_rel: float = 0.5
    staff_gap_factor: float = 2.0
    staves_per_system: int = 2
    system_gap_factor: float = 1.5
    col_threshold_rel: float = 0.5

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise BadConfig(f"window must be odd and >= 3, got {self.window}")
        if self.staff_gap_factor <= 0 or self.system_gap_factor <= 0:
            raise BadConfig("gap factors must be > 0")
        for name in ("line_threshold_rel", "col_threshold_rel"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise BadConfig(f"{name} must be in (0, 1], got {value}")
        if self.staves_per_system < 0:
            raise BadConfig("staves_per_system must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "LayoutConfig":
        return cls(**_checked_keys(cls, d))


def _checked_keys(cls, d: dict) -> dict:
    """Reject unknown config keys instead of silently ignoring them."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise BadConfig(f"unknown {cls.__name__} keys: {unknown}")
    return dict(d)


# ---------------------------------------------------------------------------
# Geometry types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LineBand:
    """One staff line as an inclusive run of rows [y_start, y_end]."""

    y_start: int
    y_end: int

    @property
    def center(self) -> float:
        return (self.y_start + self.y_end) / 2.0


@dataclass(frozen=True)
class Staff:
    """A group of consecutive line bands (nominally the 5 staff lines)."""

    bands: tuple[LineBand, ...]

    @property
    def y_top(self) -> int:
        return self.bands[0].y_start

    @property
    def y_bottom(self) -> int:
        return self.bands[-1].y_end

    @property
    def center(self) -> float:
        return (self.y_top + self.y_bottom) / 2.0


@dataclass(frozen=True)
class System:
    """One horizontal block of music, top-to-bottom index order."""

    index: int
    y_top: int
    y_bottom: int
    x_left: int
    x_right: int
    x_fallback: bool = False
    band_count: int = 0

    @property
    def width(self) -> int:
        return self.x_right - self.x_left

    @property
    def y_center(self) -> float:
        return (self.y_top + self.y_bottom) / 2.0

    @property
    def height(self) -> int:
        return self.y_bottom - self.y_top + 1

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "y_top": self.y_top,
            "y_bottom": self.y_bottom,
            "x_left": self.x_left,
            "x_right": self.x_right,
            "x_fallback": self.x_fallback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "System":
        return cls(
            index=int(d["index"]),
            y_top=int(d["y_top"]),
            y_bottom=int(d["y_bottom"]),
            x_left=int(d["x_left"]),
            x_right=int(d["x_right"]),
            x_fallback=bool(d.get("x_fallback", False)),
        )


@dataclass(frozen=True)
class PageLayout:
    """Detected geometry of one page: ordered, y-disjoint systems."""

    page_index: int
    width: int
    height: int
    systems: tuple[System, ...]
    warnings: tuple[str, ...] = ()

    @property
    def last_index(self) -> int:
        return len(self.systems) - 1

    @property
    def last_system(self) -> System:
        return self.systems[-1]

    def to_dict(self) -> dict:
        return {
            "page": self.page_index,
            "width": self.width,
            "height": self.height,
            "systems": [s.to_dict() for s in self.systems],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PageLayout":
        return cls(
            page_index=int(d["page"]),
            width=int(d["width"]),
            height=int(d["height"]),
            systems=tuple(System.from_dict(s) for s in d["systems"]),
            warnings=tuple(d.get("warnings", ())),
        )


# ---------------------------------------------------------------------------
# Step 1 — Grayscale
# ---------------------------------------------------------------------------

def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Convert an RGB image to 8-bit grayscale.

    Uses BT.601 luma weights: round(0.299 R + 0.587 G + 0.114 B), rounding
    half away from zero, clamped to [0, 255].
    """
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB array, got shape {img.shape}")
    rgb = img.astype(np.float64)
    luma = rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114
    # floor(x + 0.5) rounds half away from zero for non-negative x
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Step 2 — Adaptive binarization
# ---------------------------------------------------------------------------

def gaussian_kernel(window: int) -> np.ndarray:
    """Normalized 1-D Gaussian of the given odd length.

    sigma = 0.3 * ((window - 1) / 2 - 1) + 0.8, so the kernel widens with
    the window.
    """
    if window < 3 or window % 2 == 0:
        raise BadConfig(f"window must be odd and >= 3, got {window}")
    sigma = 0.3 * ((window - 1) / 2.0 - 1.0) + 0.8
    r = np.arange(window, dtype=np.float64) - (window - 1) / 2.0
    k = np.exp(-(r**2) / (2.0 * sigma**2))
    return k / k.sum()


def binarize_adaptive_gaussian(img: np.ndarray, cfg: LayoutConfig = LayoutConfig()) -> np.ndarray:
    """Binarize a grayscale image with a Gaussian-weighted local threshold.

    A pixel is ink when its intensity is strictly below the Gaussian
    local mean (window x window, separable kernel, reflect padding that
    duplicates the edge pixel) minus ``cfg.offset``. Uneven lighting is
    absorbed by the local mean, so camera frames binarize cleanly.

    Returns a bool mask of the input's shape (True = ink).
    """
    if img.ndim != 2:
        raise ValueError(f"expected (H, W) grayscale array, got shape {img.shape}")
    kernel = gaussian_kernel(cfg.window)
    f = img.astype(np.float64)
    local = correlate1d(f, kernel, axis=0, mode="reflect")
    local = correlate1d(local, kernel, axis=1, mode="reflect")
    return f < (local - cfg.offset)


# ---------------------------------------------------------------------------
# Step 3 — Row projection
# ---------------------------------------------------------------------------

def row_ink_profile(ink: np.ndarray) -> np.ndarray:
    """Count ink pixels in each row. Returns an int64 array of length H."""
    if ink.ndim != 2:
        raise ValueError(f"expected (H, W) ink mask, got shape {ink.shape}")
    return ink.sum(axis=1, dtype=np.int64)


# ---------------------------------------------------------------------------
# Step 4 — Staff-line bands
# ---------------------------------------------------------------------------

def detect_line_bands(counts: np.ndarray, cfg: LayoutConfig = LayoutConfig()) -> list[LineBand]:
    """Threshold the row profile into maximal runs of staff-line rows.

    The threshold is ``cfg.line_threshold_rel * max(counts)``, so it is
    invariant to page width and scan darkness. Rows at or above the
    threshold form bands; each band is a maximal run.

    Raises:
        NoInk: if the profile is all zeros (blank page).
    """
    counts = np.asarray(counts)
    if counts.size == 0:
        raise ValueError("empty profile")
    peak = int(counts.max())
    if peak <= 0:
        raise NoInk("row profile contains no ink")
    mask = counts >= cfg.line_threshold_rel * peak
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts, ends = edges[0::2], edges[1::2] - 1
    return [LineBand(int(s), int(e)) for s, e in zip(starts, ends)]


# ---------------------------------------------------------------------------
# Step 5 — Bands -> staves
# ---------------------------------------------------------------------------

def group_bands_into_staves(bands: list[LineBand], cfg: LayoutConfig = LayoutConfig()) -> list[Staff]:
    """Split line bands into staves at unusually large gaps.

    A staff break is inserted wherever the center-to-center gap exceeds
    ``cfg.staff_gap_factor`` times the median gap. The median is dominated
    by the within-staff line spacing, so cross-staff gaps split reliably.
    """
    if not bands:
        raise ValueError("need at least one band")
    if len(bands) == 1:
        return [Staff(bands=(bands[0],))]
    centers = np.array([b.center for b in bands])
    gaps = np.diff(centers)
    cutoff = cfg.staff_gap_factor * float(np.median(gaps))
    staves: list[Staff] = []
    group = [bands[0]]
    for band, gap in zip(bands[1:], gaps):
        if gap > cutoff:
            staves.append(Staff(bands=tuple(group)))
            group = [band]
        else:
            group.append(band)
    staves.append(Staff(bands=tuple(group)))
    return staves


# ---------------------------------------------------------------------------
# Step 6 — Staves -> systems
# ---------------------------------------------------------------------------

def system_x_extent(
    ink: np.ndarray,
    y_top: int,
    y_bottom: int,
    band_count: int,
    cfg: LayoutConfig = LayoutConfig(),
) -> tuple[int, int, bool]:
    """Measure a system's horizontal ink extent from its column profile.

    Within rows [y_top, y_bottom], a column qualifies when its ink count
    reaches ``cfg.col_threshold_rel * band_count``; staff lines cross most
    bands, so qualifying columns trace the drawn staff width. Returns
    (x_left, x_right, fallback); when fewer than two distinct columns
    qualify the extent defaults to the full page width with fallback=True.
    """
    height, width = ink.shape
    if not 0 <= y_top <= y_bottom < height:
        raise ValueError(f"band [{y_top}, {y_bottom}] outside image of height {height}")
    col_counts = ink[y_top : y_bottom + 1].sum(axis=0)
    qualifying = np.flatnonzero(col_counts >= cfg.col_threshold_rel * band_count)
    if qualifying.size == 0 or qualifying[0] == qualifying[-1]:
        return 0, width - 1, True
    return int(qualifying[0]), int(qualifying[-1]), False


def group_staves_into_systems(
    staves: list[Staff],
    ink: np.ndarray,
    cfg: LayoutConfig = LayoutConfig(),
) -> tuple[list[System], list[str]]:
    """Combine staves into systems with y- and x-extents.

    When ``cfg.staves_per_system`` is positive and divides the staff
    count, staves are chunked sequentially (2 = grand-staff piano pages).
    Otherwise staves are clustered by center-to-center gaps, breaking
    where a gap exceeds ``cfg.system_gap_factor`` times the median gap; a
    warning is recorded when a positive ``staves_per_system`` had to fall
    back to gap grouping.

    Returns (systems, warnings).
    """
    if not staves:
        raise ValueError("need at least one staff")
    warnings: list[str] = []
    sps = cfg.staves_per_system
    if sps > 0 and len(staves) % sps == 0:
        groups = [staves[i : i + sps] for i in range(0, len(staves), sps)]
    else:
        if sps > 0:
            warnings.append(
                f"staff count {len(staves)} not divisible by "
                f"staves_per_system={sps}; grouped by gaps instead"
            )
        groups = _group_staves_by_gap(staves, cfg)

    systems: list[System] = []
    for index, group in enumerate(groups):
        y_top = group[0].y_top
        y_bottom = group[-1].y_bottom
        band_count = sum(len(s.bands) for s in group)
        x_left, x_right, fallback = system_x_extent(ink, y_top, y_bottom, band_count, cfg)
        systems.append(
            System(
                index=index,
                y_top=y_top,
                y_bottom=y_bottom,
                x_left=x_left,
                x_right=x_right,
                x_fallback=fallback,
                band_count=band_count,
            )
        )
    return systems, warnings


def _group_staves_by_gap(staves: list[Staff], cfg: LayoutConfig) -> list[list[Staff]]:
    """Cluster staves where the center gap exceeds factor x median gap."""
    if len(staves) == 1:
        return [list(staves)]
    centers = np.array([s.center for s in staves])
    gaps = np.diff(centers)
    cutoff = cfg.system_gap_factor * float(np.median(gaps))
    groups: list[list[Staff]] = []
    group = [staves[0]]
    for staff, gap in zip(staves[1:], gaps):
        if gap > cutoff:
            groups.append(group)
            group = [staff]
        else:
            group.append(staff)
    groups.append(group)
    return groups


def _merge_overlapping_systems(systems: list[System]) -> tuple[list[System], list[str]]:
    """Merge systems whose y-intervals overlap; PageLayout requires disjoint rows."""
    warnings: list[str] = []
    merged: list[System] = []
    for s in sorted(systems, key=lambda s: s.y_top):
        if merged and s.y_top <= merged[-1].y_bottom:
            prev = merged[-1]
            warnings.append(
                f"systems at y={prev.y_top} and y={s.y_top} overlap; merged"
            )
            merged[-1] = System(
                index=prev.index,
                y_top=prev.y_top,
                y_bottom=max(prev.y_bottom, s.y_bottom),
                x_left=min(prev.x_left, s.x_left),
                x_right=max(prev.x_right, s.x_right),
                x_fallback=prev.x_fallback or s.x_fallback,
                band_count=prev.band_count + s.band_count,
            )
        else:
            merged.append(s)
    reindexed = [dataclasses.replace(s, index=i) for i, s in enumerate(merged)]
    return reindexed, warnings


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

def analyze_page(
    img: np.ndarray,
    page_index: int = 0,
    cfg: LayoutConfig = LayoutConfig(),
) -> PageLayout:
    """Run the full layout pipeline on a grayscale or RGB page image.

    Args:
        img: uint8 array, (H, W) grayscale or (H, W, 3) RGB.
        page_index: 0-based page number recorded in the layout.
        cfg: analysis parameters.

    Returns:
        A PageLayout with systems sorted top to bottom, y-disjoint, and
        indexed from 0. Degenerate pages (fewer than 5 line bands) still
        produce a layout plus a warning.

    Raises:
        NoInk: if binarization yields no foreground at all.
    """
    gray = to_grayscale(img) if img.ndim == 3 else img
    ink = binarize_adaptive_gaussian(gray, cfg)
    profile = row_ink_profile(ink)
    bands = detect_line_bands(profile, cfg)
    warnings: list[str] = []
    if len(bands) < 5:
        warnings.append(
            f"only {len(bands)} line bands detected; layout may be a rough estimate"
        )
    staves = group_bands_into_staves(bands, cfg)
    systems, group_warnings = group_staves_into_systems(staves, ink, cfg)
    warnings.extend(group_warnings)
    systems, merge_warnings = _merge_overlapping_systems(systems)
    warnings.extend(merge_warnings)
    height, width = gray.shape
    return PageLayout(
        page_index=page_index,
        width=int(width),
        height=int(height),
        systems=tuple(systems),
        warnings=tuple(warnings),
    )
