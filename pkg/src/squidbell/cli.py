"""Configuration, command entry points and persistent CSV/JSON artifacts.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 input-format error.  All files are UTF-8 with LF line endings; floats are
printed with 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, FormatError, SquidBellError
from .measurement import FilterSpec, OutcomeGrid
from .protocol import InitialStateSpec, prepare_state, scan
from .regions import intersection_report, spatial_surface
from .spectral import (
    GridSpec,
    PotentialParams,
    build_basis_with_doublet_check,
    tunneling_period,
)

SCAN_COLUMNS = ("t_ab", "t_bc", "delta_p", "u_bc", "u_ab", "u_ac",
                "violation", "distinguishable")

_SPATIAL_POINTS = 181


@dataclass(frozen=True)
class RunConfig:
    """Flat key-value configuration; see KEY_MAP for the document keys."""

    mu: float = 9.6
    lam: float = 1.536
    grid_half_width: float = 8.0
    grid_points: int = 2049
    basis_size: int = 40
    filter_kind: str = "gaussian"
    filter_delta_phi: float = 2.0
    outcome_half_width: float = 10.0
    outcome_points: int = 161
    prep_count: int = 16
    prep_result: float | None = None
    prep_offset_a: float = 1.0  # units of the tunneling period
    scan_t_max_in_t: float = 2.0
    scan_steps: int = 48
    representative_outcome: bool = False
    output_path: str | None = None

    def potential(self) -> PotentialParams:
        return PotentialParams(mu=self.mu, lam=self.lam)

    def grid(self) -> GridSpec:
        return GridSpec(half_width=self.grid_half_width, n_points=self.grid_points)

    def filter(self) -> FilterSpec:
        return FilterSpec(kind=self.filter_kind, delta_phi=self.filter_delta_phi)

    def outcome_grid(self) -> OutcomeGrid:
        return OutcomeGrid(half_width=self.outcome_half_width,
                           n_points=self.outcome_points)

    def resolved_prep_result(self) -> float:
        if self.prep_result is None:
            return -self.potential().phi_min
        return self.prep_result

    def describe(self):
        """(document key, effective value) pairs for header echoes."""
        return (
            ("mu", self.mu),
            ("lambda", self.lam),
            ("grid.half_width", self.grid_half_width),
            ("grid.points", self.grid_points),
            ("basis.size", self.basis_size),
            ("filter.kind", self.filter_kind),
            ("filter.delta_phi", self.filter_delta_phi),
            ("outcome.half_width", self.outcome_half_width),
            ("outcome.points", self.outcome_points),
            ("prep.count", self.prep_count),
            ("prep.result", self.resolved_prep_result()),
            ("prep.offset_a", self.prep_offset_a),
            ("scan.t_max_in_T", self.scan_t_max_in_t),
            ("scan.steps", self.scan_steps),
            ("mode.representative_outcome", self.representative_outcome),
        )


KEY_MAP = {
    "mu": ("mu", float),
    "lambda": ("lam", float),
    "grid.half_width": ("grid_half_width", float),
    "grid.points": ("grid_points", int),
    "basis.size": ("basis_size", int),
    "filter.kind": ("filter_kind", str),
    "filter.delta_phi": ("filter_delta_phi", float),
    "outcome.half_width": ("outcome_half_width", float),
    "outcome.points": ("outcome_points", int),
    "prep.count": ("prep_count", int),
    "prep.result": ("prep_result", float),
    "prep.offset_a": ("prep_offset_a", float),
    "scan.t_max_in_T": ("scan_t_max_in_t", float),
    "scan.steps": ("scan_steps", int),
    "mode.representative_outcome": ("representative_outcome", bool),
    "output.path": ("output_path", str),
}


def _coerce(key: str, value, target):
    if target is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if target is str:
        if isinstance(value, str):
            return value
        raise ConfigError(f"{key}: expected a string, got {value!r}")
    if target is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        if float(value) != int(value):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    return float(value)


def load_config(path: str | None) -> RunConfig:
    """Parse the flat JSON key-value document, rejecting unknown keys."""
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"config: {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"config: {path} must hold a JSON object")
    updates = {}
    for key, value in doc.items():
        if key not in KEY_MAP:
            raise ConfigError(f"{key}: unknown configuration key")
        attr, target = KEY_MAP[key]
        updates[attr] = _coerce(key, value, target)
    cfg = RunConfig(**updates)
    # touch every constructor so out-of-domain values fail now, by field
    cfg.potential()
    cfg.grid()
    cfg.filter()
    cfg.outcome_grid()
    if cfg.prep_count < 0:
        raise ConfigError(f"prep.count: must be >= 0, got {cfg.prep_count}")
    if cfg.prep_offset_a < 0:
        raise ConfigError(f"prep.offset_a: must be >= 0, got {cfg.prep_offset_a}")
    if not (0 < cfg.scan_t_max_in_t <= 4):
        raise ConfigError(
            f"scan.t_max_in_T: must lie in (0, 4], got {cfg.scan_t_max_in_t}")
    if cfg.scan_steps < 2:
        raise ConfigError(f"scan.steps: must be >= 2, got {cfg.scan_steps}")
    return cfg


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.17g}"


def _write_lines(path: str, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _header(cfg: RunConfig, extra=()):
    lines = [f"# {key} = {_fmt(value)}" for key, value in cfg.describe()]
    lines.extend(f"# {key} = {_fmt(value)}" for key, value in extra)
    return lines


def _built_basis(cfg: RunConfig):
    basis = build_basis_with_doublet_check(cfg.potential(), cfg.grid(), cfg.basis_size)
    return basis, tunneling_period(basis)


def cmd_spectrum(cfg: RunConfig, out_path: str) -> None:
    basis, period = _built_basis(cfg)
    lines = _header(cfg, extra=(("T", period),))
    lines.append("n,E_n,converged")
    for n in range(basis.truncation):
        lines.append(
            f"{n + 1},{_fmt(basis.energies[n])},{1 if basis.converged[n] else 0}")
    _write_lines(out_path, lines)


def cmd_prepare(cfg: RunConfig, out_path: str) -> None:
    basis, period = _built_basis(cfg)
    _state, trace = prepare_state(
        basis,
        cfg.filter(),
        InitialStateSpec(),
        cfg.prep_count,
        period,
        cfg.resolved_prep_result(),
        cfg.outcome_grid(),
    )
    lines = _header(cfg, extra=(("T", period),))
    lines.append("step,delta_phi_eff,success_norm2")
    for record in trace:
        lines.append(
            f"{record.step},{_fmt(record.delta_phi_eff)},{_fmt(record.success_norm2)}")
    _write_lines(out_path, lines)


def cmd_scan(cfg: RunConfig, out_path: str, threads: int = 1) -> None:
    basis, period = _built_basis(cfg)
    grid = scan(
        basis,
        cfg.filter(),
        InitialStateSpec(),
        cfg.prep_count,
        cfg.scan_t_max_in_t * period,
        cfg.scan_steps,
        cfg.prep_offset_a * period,
        cfg.outcome_grid(),
        representative=cfg.representative_outcome,
        threads=threads,
        prep_result=cfg.resolved_prep_result(),
    )
    lines = _header(cfg, extra=(("T", period), ("delta_l", cfg.potential().delta_l)))
    lines.append(",".join(SCAN_COLUMNS))
    for i, t_ab in enumerate(grid.t_ab_axis):
        for j, t_bc in enumerate(grid.t_bc_axis):
            lines.append(",".join((
                _fmt(t_ab),
                _fmt(t_bc),
                _fmt(grid.delta_p_values[i, j]),
                _fmt(grid.delta_phi_eff_bc[i, j]),
                _fmt(grid.delta_phi_eff_ab[i, j]),
                _fmt(grid.delta_phi_eff_ac[i, j]),
                "1" if grid.violation_mask[i, j] else "0",
                "1" if grid.distinguishable_mask[i, j] else "0",
            )))
    _write_lines(out_path, lines)


def read_scan_csv(path: str):
    """Parse a scan CSV back into axes, surfaces and masks."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = [line.rstrip("\n") for line in fh]
    except OSError as exc:
        raise FormatError(f"grid csv: cannot read {path}: {exc}") from exc
    rows = []
    header_seen = False
    for line in raw:
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line.split(",") != list(SCAN_COLUMNS):
                raise FormatError(
                    f"grid csv: expected header {','.join(SCAN_COLUMNS)!r}, "
                    f"got {line!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != len(SCAN_COLUMNS):
            raise FormatError(f"grid csv: malformed row {line!r}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"grid csv: non-numeric value in row {line!r}") from exc
    if not header_seen or not rows:
        raise FormatError("grid csv: no data rows")
    data = np.array(rows)
    t_ab_axis = np.unique(data[:, 0])
    t_bc_axis = np.unique(data[:, 1])
    steps_ab, steps_bc = t_ab_axis.size, t_bc_axis.size
    if steps_ab * steps_bc != data.shape[0]:
        raise FormatError(
            f"grid csv: {data.shape[0]} rows do not tile a "
            f"{steps_ab} x {steps_bc} grid")
    order = np.lexsort((data[:, 1], data[:, 0]))
    data = data[order]
    surfaces = {
        name: data[:, k].reshape(steps_ab, steps_bc)
        for k, name in enumerate(SCAN_COLUMNS)
        if k >= 2
    }
    return t_ab_axis, t_bc_axis, surfaces


def cmd_regions(grid_csv: str, out_path: str) -> None:
    _ta, _tb, surfaces = read_scan_csv(grid_csv)
    report = intersection_report(
        surfaces["violation"] > 0.5, surfaces["distinguishable"] > 0.5)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


def cmd_spatial(out_path: str, n_points: int = _SPATIAL_POINTS) -> None:
    theta_axis, phi_axis, values = spatial_surface(n_points)
    lines = [f"# grid = {n_points}x{n_points} over [0, 2pi]^2"]
    lines.append("theta,phi,delta_p")
    for i, th in enumerate(theta_axis):
        for j, ph in enumerate(phi_axis):
            lines.append(f"{_fmt(th)},{_fmt(ph)},{_fmt(values[i, j])}")
    _write_lines(out_path, lines)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "dphi", None) is not None:
        if not (args.dphi > 0):
            raise ConfigError(f"filter.delta_phi: must be > 0, got {args.dphi}")
        cfg = replace(cfg, filter_delta_phi=args.dphi)
    if getattr(args, "mode", None) is not None:
        cfg = replace(cfg, representative_outcome=(args.mode == "representative"))
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squidbell",
        description="Double-well flux simulator: temporal inequality maps and "
                    "measurement-induced uncertainties",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", default=None, help="output path")
        p.add_argument("--dphi", type=float, help="override filter.delta_phi")
        p.add_argument("--mode", choices=("representative", "integrated"),
                       help="override the outcome mode")

    common(sub.add_parser("spectrum", help="eigenvalue table"))
    common(sub.add_parser("prepare", help="preparation trace"))
    p_scan = sub.add_parser("scan", help="quiescent-time scan grid")
    common(p_scan)
    p_scan.add_argument("--threads", type=int, default=1,
                        help="worker threads for scan rows")
    p_regions = sub.add_parser("regions", help="region report from a scan CSV")
    p_regions.add_argument("grid_csv", help="scan CSV to analyze")
    p_regions.add_argument("--out", default="regions.json", help="output path")
    p_spatial = sub.add_parser("spatial", help="closed-form reference surface")
    p_spatial.add_argument("--out", default="spatial.csv", help="output path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "regions":
            cmd_regions(args.grid_csv, args.out)
            return 0
        if args.command == "spatial":
            cmd_spatial(args.out)
            return 0
        cfg = _apply_overrides(load_config(args.config), args)
        default_out = {"spectrum": "spectrum.csv", "prepare": "prepare.csv",
                       "scan": "scan.csv"}[args.command]
        out = args.out or cfg.output_path or default_out
        if args.command == "spectrum":
            cmd_spectrum(cfg, out)
        elif args.command == "prepare":
            cmd_prepare(cfg, out)
        else:
            cmd_scan(cfg, out, threads=args.threads)
        return 0
    except SquidBellError as exc:
        print(f"squidbell: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", 2)


if __name__ == "__main__":
    sys.exit(main())
