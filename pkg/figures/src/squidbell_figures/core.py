"""Render images from squidbell scan artifacts.

A job description file (JSON) names the figure kind, the input artifacts and
the output image:

    {"kind": "overlay", "grid_csv": "scan.csv",
     "regions_json": "regions.json", "out": "overlay.png"}

Kinds: delta_p_map (violation-witness heatmap), uncertainty_map (the three
uncertainty surfaces with their threshold contour), overlay (violation cells
shaded over outlined distinguishable cells, shared-cell count echoed from
the regions report), spatial_reference (the closed-form two-angle surface).

Quiescent-time axes are expressed in units of the period T read from the
CSV header; axis ranges always come from the data.  Inputs are never
modified.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SCAN_COLUMNS = ("t_ab", "t_bc", "delta_p", "u_bc", "u_ab", "u_ac",
                "violation", "distinguishable")
SPATIAL_COLUMNS = ("theta", "phi", "delta_p")

KINDS = ("delta_p_map", "uncertainty_map", "overlay", "spatial_reference")

_DPI = 130
_FIGSIZES = {
    "delta_p_map": (5.4, 4.4),
    "uncertainty_map": (11.0, 3.8),
    "overlay": (5.4, 4.4),
    "spatial_reference": (5.4, 4.4),
}


class JobError(Exception):
    """Invalid job description or input artifact."""


@dataclass(frozen=True)
class FigureJob:
    kind: str
    out: str
    grid_csv: str | None = None
    spatial_csv: str | None = None
    regions_json: str | None = None
    title: str | None = None


def load_job(path: str) -> FigureJob:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise JobError(f"cannot read job file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise JobError(f"job file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise JobError("job file must hold a JSON object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise JobError(f"kind: must be one of {KINDS}, got {kind!r}")
    out = doc.get("out")
    if not isinstance(out, str) or not out:
        raise JobError("out: required output image path")
    job = FigureJob(
        kind=kind,
        out=out,
        grid_csv=doc.get("grid_csv"),
        spatial_csv=doc.get("spatial_csv"),
        regions_json=doc.get("regions_json"),
        title=doc.get("title"),
    )
    if kind == "spatial_reference":
        if not job.spatial_csv:
            raise JobError("spatial_csv: required for spatial_reference jobs")
    elif not job.grid_csv:
        raise JobError(f"grid_csv: required for {kind} jobs")
    if kind == "overlay" and not job.regions_json:
        raise JobError("regions_json: required for overlay jobs")
    return job


def _read_table(path: str, required_columns):
    header_meta = {}
    columns = None
    rows = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if " = " in body:
                        key, value = body.split(" = ", 1)
                        header_meta[key.strip()] = value.strip()
                    continue
                if columns is None:
                    columns = line.split(",")
                    continue
                rows.append(line.split(","))
    except OSError as exc:
        raise JobError(f"cannot read {path}: {exc}") from exc
    if columns is None or not rows:
        raise JobError(f"{path}: no tabular data")
    for name in required_columns:
        if name not in columns:
            raise JobError(f"{path}: missing column {name!r}")
    try:
        data = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise JobError(f"{path}: non-numeric cell ({exc})") from exc
    if data.shape[1] != len(columns):
        raise JobError(f"{path}: ragged rows")
    return header_meta, {name: data[:, k] for k, name in enumerate(columns)}


def _pivot(cols, value_name):
    """Reshape long-form (x, y, value) columns to axes plus a 2-D array."""
    x_name, y_name = ("t_ab", "t_bc") if "t_ab" in cols else ("theta", "phi")
    xs = np.unique(cols[x_name])
    ys = np.unique(cols[y_name])
    if xs.size * ys.size != cols[value_name].size:
        raise JobError(f"rows do not tile a {xs.size} x {ys.size} grid")
    order = np.lexsort((cols[y_name], cols[x_name]))
    grid = cols[value_name][order].reshape(xs.size, ys.size)
    return xs, ys, grid


def _scan_axes_in_periods(meta, cols):
    try:
        period = float(meta["T"])
    except (KeyError, ValueError) as exc:
        raise JobError("grid csv: header lacks a parsable '# T = ...' line") from exc
    xs, ys, _ = _pivot(cols, "delta_p")
    return xs / period, ys / period, period


def _extent(xs, ys):
    dx = xs[1] - xs[0] if xs.size > 1 else 1.0
    dy = ys[1] - ys[0] if ys.size > 1 else 1.0
    # imshow draws row index along the vertical axis; surfaces are indexed
    # [t_ab, t_bc], so transpose and put t_ab on x
    return (xs[0] - dx / 2, xs[-1] + dx / 2, ys[0] - dy / 2, ys[-1] + dy / 2)


def _render_delta_p(job: FigureJob):
    meta, cols = _read_table(job.grid_csv, SCAN_COLUMNS)
    xs, ys, period = _scan_axes_in_periods(meta, cols)
    _, _, values = _pivot(cols, "delta_p")
    fig, ax = plt.subplots(figsize=_FIGSIZES[job.kind], dpi=_DPI)
    im = ax.imshow(values.T, origin="lower", extent=_extent(xs, ys),
                   aspect="auto", cmap="RdBu_r",
                   vmin=-np.abs(values).max(), vmax=np.abs(values).max())
    ax.contour(xs, ys, values.T, levels=[0.0], colors="k", linewidths=0.8)
    fig.colorbar(im, ax=ax, label="delta P")
    ax.set_xlabel("t_ab / T")
    ax.set_ylabel("t_bc / T")
    ax.set_title(job.title or f"violation witness (max {values.max():.4f})")
    return fig


def _render_uncertainty(job: FigureJob):
    meta, cols = _read_table(job.grid_csv, SCAN_COLUMNS)
    xs, ys, period = _scan_axes_in_periods(meta, cols)
    threshold = float(meta["delta_l"]) if "delta_l" in meta else None
    fig, axes = plt.subplots(1, 3, figsize=_FIGSIZES[job.kind], dpi=_DPI,
                             sharey=True)
    surfaces = [("u_bc", "sequence I (+,-)"), ("u_ab", "sequence II (+,+)"),
                ("u_ac", "sequence III (-,-)")]
    vmax = max(cols[name].max() for name, _ in surfaces)
    vmin = min(cols[name].min() for name, _ in surfaces)
    im = None
    for ax, (name, label) in zip(axes, surfaces):
        _, _, values = _pivot(cols, name)
        im = ax.imshow(values.T, origin="lower", extent=_extent(xs, ys),
                       aspect="auto", cmap="viridis", vmin=vmin, vmax=vmax)
        if threshold is not None and vmin < threshold < vmax:
            ax.contour(xs, ys, values.T, levels=[threshold], colors="w",
                       linewidths=1.0)
        ax.set_title(label, fontsize=10)
        ax.set_xlabel("t_ab / T")
    axes[0].set_ylabel("t_bc / T")
    fig.colorbar(im, ax=axes, label="effective uncertainty", fraction=0.025)
    fig.suptitle(job.title or "measurement-induced flux uncertainties")
    return fig


def _render_overlay(job: FigureJob):
    meta, cols = _read_table(job.grid_csv, SCAN_COLUMNS)
    xs, ys, period = _scan_axes_in_periods(meta, cols)
    _, _, violation = _pivot(cols, "violation")
    _, _, distinguishable = _pivot(cols, "distinguishable")
    try:
        with open(job.regions_json, encoding="utf-8") as fh:
            report = json.load(fh)
        shared = int(report["intersection_cells"])
        verdict = str(report.get("verdict", "?"))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise JobError(f"regions json {job.regions_json}: {exc}") from exc

    fig, ax = plt.subplots(figsize=_FIGSIZES[job.kind], dpi=_DPI)
    shade = np.ma.masked_where(violation.T < 0.5, violation.T)
    ax.imshow(shade, origin="lower", extent=_extent(xs, ys), aspect="auto",
              cmap="Reds", vmin=0, vmax=1.6, alpha=0.8)
    if distinguishable.max() > 0.5:
        ax.contour(xs, ys, distinguishable.T, levels=[0.5], colors="C0",
                   linewidths=1.2)
    ax.plot([], [], color="C0", label="flux distinguishable")
    ax.plot([], [], color="firebrick", marker="s", linestyle="none",
            label="inequality violated")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("t_ab / T")
    ax.set_ylabel("t_bc / T")
    ax.set_title(job.title or "violation vs distinguishability islands")
    fig.text(0.5, 0.005,
             f"shared cells: {shared} (verdict: {verdict})",
             ha="center", fontsize=9)
    return fig


def _render_spatial(job: FigureJob):
    _, cols = _read_table(job.spatial_csv, SPATIAL_COLUMNS)
    xs, ys, values = _pivot(cols, "delta_p")
    fig, ax = plt.subplots(figsize=_FIGSIZES[job.kind], dpi=_DPI)
    im = ax.imshow(values.T, origin="lower", extent=_extent(xs, ys),
                   aspect="auto", cmap="RdBu_r",
                   vmin=-np.abs(values).max(), vmax=np.abs(values).max())
    i, j = np.unravel_index(np.argmax(values), values.shape)
    ax.plot(xs[i], ys[j], "k+", markersize=10)
    ax.annotate(f"max = {values[i, j]:.3f}", (xs[i], ys[j]),
                textcoords="offset points", xytext=(6, 6), fontsize=9)
    fig.colorbar(im, ax=ax, label="delta P")
    ax.set_xlabel("theta")
    ax.set_ylabel("phi")
    ax.set_title(job.title or "two-angle reference surface")
    return fig


_RENDERERS = {
    "delta_p_map": _render_delta_p,
    "uncertainty_map": _render_uncertainty,
    "overlay": _render_overlay,
    "spatial_reference": _render_spatial,
}


def render(job: FigureJob) -> str:
    """Render the job to its output path; returns the path written."""
    fig = _RENDERERS[job.kind](job)
    try:
        fig.savefig(job.out)
    finally:
        plt.close(fig)
    return job.out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="squidbell-figures",
        description="Render images from squidbell scan artifacts")
    parser.add_argument("job", help="JSON job-description file")
    args = parser.parse_args(argv)
    try:
        out = render(load_job(args.job))
    except JobError as exc:
        print(f"squidbell-figures: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
