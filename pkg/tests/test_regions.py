from __future__ import annotations

import numpy as np
import pytest

import squidbell as sb


# ------------------------------------------------------------ closed surface

def test_surface_at_origin():
    assert sb.spatial_delta_p(0.0, 0.0) == pytest.approx(-2.0, abs=1e-15)


def test_surface_at_known_maximum():
    v = sb.spatial_delta_p(2 * np.pi / 3, 2 * np.pi / 3)
    assert v == pytest.approx(0.25, abs=1e-12)


def test_surface_zero_point():
    assert sb.spatial_delta_p(0.0, np.pi) == pytest.approx(0.0, abs=1e-15)


def test_surface_matches_half_angle_expansion():
    # independent evaluation through double-angle identities
    rng = np.random.default_rng(5)
    th = rng.uniform(-10, 10, 200)
    ph = rng.uniform(-10, 10, 200)
    expansion = -(1 + np.cos(th) + np.cos(ph) + np.cos(th + ph)) / 2
    assert np.max(np.abs(sb.spatial_delta_p(th, ph) - expansion)) < 1e-15


def test_surface_range_and_periodicity():
    axis = np.linspace(0, 4 * np.pi, 401)
    vals = sb.spatial_delta_p(axis[:, None], axis[None, :])
    assert vals.min() >= -2 - 1e-12
    assert vals.max() <= 1 + 1e-12
    shifted = sb.spatial_delta_p(axis[:, None] + 4 * np.pi, axis[None, :])
    assert np.max(np.abs(vals - shifted)) < 1e-12


def test_surface_grid_helper():
    theta, phi, values = sb.spatial_surface(181)
    assert values.shape == (181, 181)
    i, j = np.unravel_index(np.argmax(values), values.shape)
    assert values[i, j] == pytest.approx(0.25, abs=1e-3)
    assert theta[i] == pytest.approx(2 * np.pi / 3, abs=theta[1] - theta[0])
    assert phi[j] == pytest.approx(2 * np.pi / 3, abs=phi[1] - phi[0])


# ------------------------------------------------------------------ labeling

def test_empty_mask_has_no_regions():
    assert sb.extract_regions(np.zeros((10, 10), dtype=bool)) == []


def test_two_disjoint_blocks():
    mask = np.zeros((12, 12), dtype=bool)
    mask[1:3, 1:3] = True
    mask[8:10, 6:8] = True
    regions = sb.extract_regions(mask)
    assert len(regions) == 2
    assert sorted(r.area for r in regions) == [4, 4]


def test_diagonal_band_orientation():
    n = 48
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    mask = np.abs(ii + jj - 20) <= 1
    regions = sb.extract_regions(mask)
    assert len(regions) == 1
    # oracle: least-squares slope of the member cells in (row, col) axes
    rows, cols = np.nonzero(mask)
    slope = np.polyfit(rows, cols, 1)[0]
    assert abs(slope + 1) < 0.2
    assert regions[0].orientation == "diagonal"


def test_vertical_band_orientation():
    mask = np.zeros((30, 30), dtype=bool)
    mask[:, 10:12] = True
    regions = sb.extract_regions(mask)
    assert len(regions) == 1
    assert regions[0].orientation == "axis-aligned"


def test_square_blob_orientation():
    mask = np.zeros((20, 20), dtype=bool)
    mask[5:12, 5:12] = True
    regions = sb.extract_regions(mask)
    assert regions[0].orientation == "blob"


def test_corner_touching_cells_stay_separate():
    mask = np.zeros((4, 4), dtype=bool)
    mask[0, 0] = mask[1, 1] = True  # 8-connected, 4-disconnected
    assert len(sb.extract_regions(mask)) == 2


def test_areas_sum_to_mask_cardinality():
    rng = np.random.default_rng(9)
    mask = rng.random((40, 40)) < 0.3
    regions = sb.extract_regions(mask)
    assert sum(r.area for r in regions) == int(mask.sum())


def test_transposing_mask_transposes_bounding_boxes():
    rng = np.random.default_rng(13)
    mask = rng.random((25, 35)) < 0.25
    boxes = {(r.bbox[1], r.bbox[0], r.bbox[3], r.bbox[2])
             for r in sb.extract_regions(mask)}
    boxes_t = {r.bbox for r in sb.extract_regions(mask.T)}
    assert boxes == boxes_t


def test_extract_rejects_non_2d():
    with pytest.raises(sb.ConfigError):
        sb.extract_regions(np.zeros(5, dtype=bool))


# -------------------------------------------------------------- intersection

def test_disjoint_masks_report():
    a = np.zeros((6, 6), dtype=bool)
    b = np.zeros((6, 6), dtype=bool)
    a[0, 0] = True
    b[5, 5] = True
    report = sb.intersection_report(a, b)
    assert report.intersection_cells == 0
    assert report.verdict == "disjoint"


def test_identical_masks_report_full_overlap():
    mask = np.zeros((6, 6), dtype=bool)
    mask[2:4, 2:4] = True
    report = sb.intersection_report(mask, mask.copy())
    assert report.intersection_cells == 4
    assert report.verdict == "overlap"


def test_verdict_no_violations_wins_over_empty_distinguishability():
    empty = np.zeros((4, 4), dtype=bool)
    assert sb.intersection_report(empty, empty).verdict == "no_violations"


def test_verdict_no_distinguishability():
    viol = np.zeros((4, 4), dtype=bool)
    viol[1, 1] = True
    assert sb.intersection_report(viol, np.zeros((4, 4), dtype=bool)).verdict \
        == "no_distinguishability"


def test_shape_mismatch_rejected():
    with pytest.raises(sb.ConfigError):
        sb.intersection_report(np.zeros((3, 3), dtype=bool), np.zeros((4, 4), dtype=bool))


def test_report_serializes():
    mask = np.zeros((5, 5), dtype=bool)
    mask[1, 1] = True
    doc = sb.intersection_report(mask, np.zeros((5, 5), dtype=bool)).to_dict()
    assert set(doc) == {"violation_regions", "distinguishable_regions",
                        "intersection_cells", "verdict"}
    assert doc["violation_regions"][0]["area"] == 1
