import numpy as np
import pytest

from pageflip.errors import BadConfig, NoInk
from pageflip.layout import (
    LayoutConfig,
    LineBand,
    PageLayout,
    Staff,
    System,
    _merge_overlapping_systems,
    analyze_page,
    binarize_adaptive_gaussian,
    detect_line_bands,
    gaussian_kernel,
    group_bands_into_staves,
    group_staves_into_systems,
    row_ink_profile,
    system_x_extent,
    to_grayscale,
)
from pagegen import draw_page


def dense_adaptive_oracle(img, window, offset):
    """Independent dense-convolution reference for the adaptive threshold."""
    sigma = 0.3 * ((window - 1) / 2.0 - 1.0) + 0.8
    r = np.arange(window, dtype=np.float64) - (window - 1) / 2.0
    k = np.exp(-(r**2) / (2.0 * sigma**2))
    k /= k.sum()
    weights = np.outer(k, k)
    pad = window // 2
    padded = np.pad(img.astype(np.float64), pad, mode="symmetric")
    h, w = img.shape
    out = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            local = (padded[y : y + window, x : x + window] * weights).sum()
            out[y, x] = img[y, x] < local - offset
    return out


# ---------------------------------------------------------------------------
# Grayscale
# ---------------------------------------------------------------------------

class TestToGrayscale:
    def test_white_maps_to_white(self):
        img = np.full((1, 1, 3), 255, dtype=np.uint8)
        assert to_grayscale(img)[0, 0] == 255

    def test_black_maps_to_black(self):
        img = np.zeros((1, 1, 3), dtype=np.uint8)
        assert to_grayscale(img)[0, 0] == 0

    def test_weighted_sum(self):
        # 0.299*100 + 0.587*150 + 0.114*200 = 140.75 -> 141
        img = np.array([[[100, 150, 200]]], dtype=np.uint8)
        assert to_grayscale(img)[0, 0] == 141

    def test_rounds_half_away_from_zero(self):
        # 0.114*250 = 28.5 -> rounds away from zero to 29
        img = np.array([[[0, 0, 250]]], dtype=np.uint8)
        assert to_grayscale(img)[0, 0] == 29

    def test_preserves_shape(self):
        img = np.random.default_rng(0).integers(0, 256, (7, 5, 3), dtype=np.uint8)
        assert to_grayscale(img).shape == (7, 5)

    def test_rejects_gray_input(self):
        with pytest.raises(ValueError):
            to_grayscale(np.zeros((4, 4), dtype=np.uint8))


# ---------------------------------------------------------------------------
# Binarization
# ---------------------------------------------------------------------------

class TestBinarize:
    def test_uniform_image_is_all_background(self):
        for value in (0, 100, 255):
            img = np.full((40, 40), value, dtype=np.uint8)
            assert not binarize_adaptive_gaussian(img).any()

    def test_single_line_on_white(self):
        img = np.full((64, 64), 255, dtype=np.uint8)
        img[32, :] = 0
        ink = binarize_adaptive_gaussian(img)
        assert ink[32].all()
        assert not ink[0].any() and not ink[63].any()
        np.testing.assert_array_equal(ink, dense_adaptive_oracle(img, 51, 10.0))

    def test_matches_dense_oracle_on_random_images(self):
        rng = np.random.default_rng(7)
        for window in (3, 11, 51):
            img = rng.integers(0, 256, (48, 32), dtype=np.uint8)
            cfg = LayoutConfig(window=window)
            np.testing.assert_array_equal(
                binarize_adaptive_gaussian(img, cfg),
                dense_adaptive_oracle(img, window, cfg.offset),
            )

    def test_ink_count_non_increasing_in_offset(self):
        rng = np.random.default_rng(3)
        img, _ = draw_page(rng, n_systems=2, width=300, height=500)
        counts = [
            int(binarize_adaptive_gaussian(img, LayoutConfig(offset=off)).sum())
            for off in range(0, 51, 5)
        ]
        assert counts == sorted(counts, reverse=True)
        assert counts[0] > 0

    def test_even_window_rejected(self):
        with pytest.raises(BadConfig):
            LayoutConfig(window=50)
        with pytest.raises(BadConfig):
            LayoutConfig(window=1)
        with pytest.raises(BadConfig):
            gaussian_kernel(4)

    def test_kernel_normalized(self):
        k = gaussian_kernel(51)
        assert k.shape == (51,)
        assert k.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(k, k[::-1])


# ---------------------------------------------------------------------------
# Row profile
# ---------------------------------------------------------------------------

class TestRowProfile:
    def test_all_ink(self):
        ink = np.ones((3, 10), dtype=bool)
        np.testing.assert_array_equal(row_ink_profile(ink), [10, 10, 10])

    def test_all_background(self):
        ink = np.zeros((3, 10), dtype=bool)
        np.testing.assert_array_equal(row_ink_profile(ink), [0, 0, 0])

    def test_partial_row(self):
        ink = np.zeros((3, 10), dtype=bool)
        ink[1, 2:6] = True
        np.testing.assert_array_equal(row_ink_profile(ink), [0, 4, 0])

    def test_conserves_total_ink(self):
        rng = np.random.default_rng(11)
        ink = rng.random((60, 80)) < 0.3
        assert row_ink_profile(ink).sum() == ink.sum()


# ---------------------------------------------------------------------------
# Line bands
# ---------------------------------------------------------------------------

class TestDetectLineBands:
    def test_runs_above_threshold(self):
        counts = np.array([0, 0, 10, 10, 0, 10, 0])
        bands = detect_line_bands(counts, LayoutConfig(line_threshold_rel=0.5))
        assert bands == [LineBand(2, 3), LineBand(5, 5)]

    def test_single_row(self):
        assert detect_line_bands(np.array([7])) == [LineBand(0, 0)]

    def test_blank_page_raises(self):
        with pytest.raises(NoInk):
            detect_line_bands(np.array([0, 0, 0]))

    def test_bands_are_exactly_threshold_rows(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            counts = rng.integers(0, 100, size=200)
            cfg = LayoutConfig(line_threshold_rel=0.5)
            bands = detect_line_bands(counts, cfg)
            tau = 0.5 * counts.max()
            in_band = np.zeros(len(counts), dtype=bool)
            for b in bands:
                assert b.y_start <= b.y_end
                in_band[b.y_start : b.y_end + 1] = True
            np.testing.assert_array_equal(in_band, counts >= tau)
            # maximal runs: consecutive bands never touch
            for a, b in zip(bands, bands[1:]):
                assert b.y_start > a.y_end + 1


# ---------------------------------------------------------------------------
# Bands -> staves
# ---------------------------------------------------------------------------

def bands_at(*starts, thickness=1):
    return [LineBand(s, s + thickness - 1) for s in starts]


class TestGroupStaves:
    def test_breaks_at_large_gap(self):
        bands = bands_at(100, 110, 120, 130, 140, 180, 190, 200, 210, 220)
        staves = group_bands_into_staves(bands)
        assert len(staves) == 2
        assert (staves[0].y_top, staves[0].y_bottom) == (100, 140)
        assert (staves[1].y_top, staves[1].y_bottom) == (180, 220)

    def test_single_band(self):
        staves = group_bands_into_staves(bands_at(42))
        assert len(staves) == 1 and len(staves[0].bands) == 1

    def test_equal_gaps_stay_together(self):
        staves = group_bands_into_staves(bands_at(0, 10, 20, 30, 40))
        assert len(staves) == 1


# ---------------------------------------------------------------------------
# Staves -> systems
# ---------------------------------------------------------------------------

def ink_with_lines(height, width, rows, x0=0, x1=None):
    ink = np.zeros((height, width), dtype=bool)
    x1 = width - 1 if x1 is None else x1
    for r in rows:
        ink[r, x0 : x1 + 1] = True
    return ink


class TestGroupSystems:
    def two_staff_geometry(self, offset=0):
        return bands_at(*(y + offset for y in (100, 110, 120, 130, 140, 180, 190, 200, 210, 220)))

    def test_chunked_by_staves_per_system(self):
        bands = self.two_staff_geometry() + self.two_staff_geometry(offset=300)
        staves = group_bands_into_staves(bands)
        assert len(staves) == 4
        rows = [b.y_start for b in bands]
        ink = ink_with_lines(600, 400, rows)
        systems, warnings = group_staves_into_systems(staves, ink)
        assert warnings == []
        assert [(s.y_top, s.y_bottom) for s in systems] == [(100, 220), (400, 520)]
        assert [s.index for s in systems] == [0, 1]
        assert all(s.band_count == 10 for s in systems)

    def test_non_divisible_falls_back_with_warning(self):
        staves = [Staff(bands=(LineBand(100, 140),))]
        ink = ink_with_lines(300, 200, [100])
        systems, warnings = group_staves_into_systems(staves, ink)
        assert len(systems) == 1
        assert len(warnings) == 1 and "staves_per_system" in warnings[0]

    def test_gap_mode_keeps_equal_gap_staves_together(self):
        staves = group_bands_into_staves(
            bands_at(0, 10, 20, 30, 40, 100, 110, 120, 130, 140, 200, 210, 220, 230, 240)
        )
        assert len(staves) == 3
        ink = ink_with_lines(300, 200, [0, 100, 200])
        systems, warnings = group_staves_into_systems(
            staves, ink, LayoutConfig(staves_per_system=0)
        )
        assert len(systems) == 1
        assert warnings == []


class TestSystemXExtent:
    def test_full_width_lines(self):
        ink = ink_with_lines(50, 80, [10, 18, 26, 34, 42])
        assert system_x_extent(ink, 10, 42, 5) == (0, 79, False)

    def test_partial_width_lines(self):
        ink = ink_with_lines(100, 600, [10, 18, 26, 34, 42], x0=30, x1=570)
        assert system_x_extent(ink, 10, 42, 5) == (30, 570, False)

    def test_empty_band_falls_back(self):
        ink = np.zeros((50, 80), dtype=bool)
        assert system_x_extent(ink, 10, 42, 5) == (0, 79, True)


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

class TestAnalyzePage:
    def test_recovers_drawn_systems(self):
        rng = np.random.default_rng(21)
        img, truth = draw_page(rng, n_systems=3)
        layout = analyze_page(img, page_index=4)
        assert layout.page_index == 4
        assert len(layout.systems) == 3
        for system, expected in zip(layout.systems, truth):
            assert abs(system.y_top - expected["y_top"]) <= 2
            assert abs(system.y_bottom - expected["y_bottom"]) <= 2
            assert abs(system.x_left - expected["x_left"]) <= 2
            assert abs(system.x_right - expected["x_right"]) <= 2
            assert not system.x_fallback

    def test_accepts_rgb_input(self):
        rng = np.random.default_rng(22)
        img, truth = draw_page(rng, n_systems=2)
        rgb = np.stack([img, img, img], axis=-1)
        layout = analyze_page(rgb)
        assert len(layout.systems) == len(truth)

    def test_blank_page_raises(self):
        blank = np.full((200, 300), 255, dtype=np.uint8)
        with pytest.raises(NoInk):
            analyze_page(blank)

    def test_single_system_page(self):
        rng = np.random.default_rng(23)
        img, truth = draw_page(rng, n_systems=1)
        layout = analyze_page(img)
        assert len(layout.systems) == 1
        assert layout.last_system is layout.systems[0]
        assert abs(layout.systems[0].y_top - truth[0]["y_top"]) <= 2

    def test_degenerate_page_warns_but_returns(self):
        img = np.full((200, 300), 255, dtype=np.uint8)
        img[100, 20:280] = 0
        layout = analyze_page(img)
        assert len(layout.systems) == 1
        assert any("rough estimate" in w for w in layout.warnings)
        assert any("staves_per_system" in w for w in layout.warnings)

    def test_layout_ordering_invariants(self):
        rng = np.random.default_rng(24)
        img, _ = draw_page(rng, n_systems=5)
        layout = analyze_page(img)
        tops = [s.y_top for s in layout.systems]
        assert tops == sorted(tops)
        assert [s.index for s in layout.systems] == list(range(len(layout.systems)))
        for a, b in zip(layout.systems, layout.systems[1:]):
            assert a.y_bottom < b.y_top


class TestMergeOverlapping:
    def test_merges_and_warns(self):
        systems = [
            System(index=0, y_top=10, y_bottom=50, x_left=5, x_right=90, band_count=5),
            System(index=1, y_top=40, y_bottom=80, x_left=10, x_right=95, band_count=5),
            System(index=2, y_top=100, y_bottom=140, x_left=5, x_right=90, band_count=5),
        ]
        merged, warnings = _merge_overlapping_systems(systems)
        assert len(merged) == 2
        assert merged[0].y_top == 10 and merged[0].y_bottom == 80
        assert merged[0].x_left == 5 and merged[0].x_right == 95
        assert merged[0].band_count == 10
        assert [s.index for s in merged] == [0, 1]
        assert len(warnings) == 1

    def test_disjoint_untouched(self):
        systems = [
            System(index=0, y_top=10, y_bottom=50, x_left=5, x_right=90),
            System(index=1, y_top=60, y_bottom=90, x_left=5, x_right=90),
        ]
        merged, warnings = _merge_overlapping_systems(systems)
        assert merged == systems and warnings == []


class TestLayoutJson:
    def test_round_trip(self):
        rng = np.random.default_rng(25)
        img, _ = draw_page(rng, n_systems=2)
        layout = analyze_page(img, page_index=3)
        doc = layout.to_dict()
        assert set(doc) == {"page", "width", "height", "systems", "warnings"}
        assert set(doc["systems"][0]) == {
            "index", "y_top", "y_bottom", "x_left", "x_right", "x_fallback",
        }
        restored = PageLayout.from_dict(doc)
        assert restored.page_index == 3
        assert [s.to_dict() for s in restored.systems] == doc["systems"]
