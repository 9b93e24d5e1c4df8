"""Mask analysis (connected regions, orientation, intersections) and the
closed-form two-angle reference surface."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigError

#: 4-connectivity: corner-touching cells stay separate components
_STRUCTURE = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

#: |slope| within this window of 0 / infinity counts as axis-aligned,
#: within it of 1 as diagonal
_SLOPE_TOL = 0.2

#: eigenvalue ratio above which the cell cloud has no usable principal axis
_ISOTROPY_RATIO = 0.8


def spatial_delta_p(theta: float, phi_angle: float):
    """sin^2(theta/2) - cos^2(phi/2) - cos^2((theta+phi)/2), the closed-form
    two-polarimeter violation surface; maximum 1/4 at (2pi/3, 2pi/3)."""
    theta = np.asarray(theta, dtype=float)
    phi_angle = np.asarray(phi_angle, dtype=float)
    return (np.sin(theta / 2.0) ** 2
            - np.cos(phi_angle / 2.0) ** 2
            - np.cos((theta + phi_angle) / 2.0) ** 2)


def spatial_surface(n_points: int = 181):
    """Reference surface sampled on an n x n grid over [0, 2pi]^2.

    Returns (theta_axis, phi_axis, values) with values[i, j] at
    (theta_axis[i], phi_axis[j]).
    """
    if n_points < 2:
        raise ConfigError(f"spatial grid: need >= 2 points, got {n_points}")
    axis = np.linspace(0.0, 2.0 * np.pi, n_points)
    return axis, axis.copy(), spatial_delta_p(axis[:, None], axis[None, :])


@dataclass(frozen=True)
class Region:
    """One connected component of a boolean mask (4-connectivity)."""

    label: int
    area: int
    bbox: tuple  # (row_min, col_min, row_max, col_max), inclusive
    orientation: str  # axis-aligned | diagonal | blob


@dataclass(frozen=True)
class RegionReport:
    violation_regions: tuple = ()
    distinguishable_regions: tuple = ()
    intersection_cells: int = 0
    verdict: str = "no_violations"

    def to_dict(self) -> dict:
        def rows(regions):
            return [
                {
                    "label": r.label,
                    "area": r.area,
                    "bbox": list(r.bbox),
                    "orientation": r.orientation,
                }
                for r in regions
            ]

        return {
            "violation_regions": rows(self.violation_regions),
            "distinguishable_regions": rows(self.distinguishable_regions),
            "intersection_cells": self.intersection_cells,
            "verdict": self.verdict,
        }


def _classify_orientation(rows: np.ndarray, cols: np.ndarray) -> str:
    """Principal-axis slope of the member cells, in (row, col) axes."""
    if rows.size < 2:
        return "blob"
    pts = np.stack([rows.astype(float), cols.astype(float)])
    cov = np.cov(pts)
    evals, evecs = np.linalg.eigh(cov)
    major, minor = evals[1], evals[0]
    if major <= 0 or minor / major > _ISOTROPY_RATIO:
        return "blob"
    d_row, d_col = evecs[:, 1]
    if abs(d_row) < 1e-12 or abs(d_col / d_row) > 1.0 / _SLOPE_TOL:
        return "axis-aligned"
    slope = d_col / d_row
    if abs(slope) < _SLOPE_TOL:
        return "axis-aligned"
    if abs(abs(slope) - 1.0) < _SLOPE_TOL:
        return "diagonal"
    return "blob"


def extract_regions(mask: np.ndarray):
    """Deterministic 4-connected labeling with per-region geometry."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ConfigError(f"mask: expected a 2-D array, got ndim={mask.ndim}")
    labels, count = ndimage.label(mask, structure=_STRUCTURE)
    regions = []
    for lab in range(1, count + 1):
        rows, cols = np.nonzero(labels == lab)
        regions.append(
            Region(
                label=lab,
                area=int(rows.size),
                bbox=(int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max())),
                orientation=_classify_orientation(rows, cols),
            )
        )
    return regions


def intersection_report(violation_mask: np.ndarray, distinguishable_mask: np.ndarray) -> RegionReport:
    """Overlay the two mask families and count shared cells."""
    violation_mask = np.asarray(violation_mask, dtype=bool)
    distinguishable_mask = np.asarray(distinguishable_mask, dtype=bool)
    if violation_mask.shape != distinguishable_mask.shape:
        raise ConfigError(
            f"mask shapes differ: {violation_mask.shape} vs {distinguishable_mask.shape}"
        )
    shared = int(np.sum(violation_mask & distinguishable_mask))
    if not violation_mask.any():
        verdict = "no_violations"
    elif not distinguishable_mask.any():
        verdict = "no_distinguishability"
    elif shared == 0:
        verdict = "disjoint"
    else:
        verdict = "overlap"
    return RegionReport(
        violation_regions=tuple(extract_regions(violation_mask)),
        distinguishable_regions=tuple(extract_regions(distinguishable_mask)),
        intersection_cells=shared,
        verdict=verdict,
    )
