"""Command-line entry point.

``toroton <subcommand> --config FILE --out DIR [--set section.key=value]...
[--seed N] [--format csv|json]``

Exit status is 0 on success, 1 when the computation fails (an
``error.json`` report is written to the output directory) and 2 on usage
or configuration errors.  ``manifest.json`` is written last, so its presence
marks a completed run.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import bpm, experiments, torus
from .config import RunConfig, fmt_float, parse_config
from .errors import ConfigError
from .gridio import dump_grid
from .radial import critical_power, solve_profile, townes_norm
from .svg import render_heatmap, render_series

SUBCOMMANDS = ("profile", "propagate", "stability", "pair", "young", "curvature", "torus", "sweep")
EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2
MANIFEST = "manifest.json"
ERROR_REPORT = "error.json"


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__
        return __version__


def _clean(obj):
    """JSON-ready copy: numpy scalars to Python, tuples to lists, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


class Outputs:
    """Tracks every file a run emits for the manifest inventory."""

    def __init__(self, out_dir: Path, fmt: str = "csv"):
        self.dir = out_dir
        self.fmt = fmt
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        if name not in self.files:
            self.files.append(name)
        return self.dir / name

    def json(self, name: str, obj) -> None:
        write_json(self.path(name), obj)

    def csv(self, name: str, columns, rows) -> None:
        with open(self.path(name), "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(columns)
            for row in rows:
                wr.writerow([_cell(v) for v in row])

    def table(self, stem: str, columns, rows) -> None:
        """A trace or scan in the requested ``--format``."""
        rows = [list(r) for r in rows]
        if self.fmt == "json":
            self.json(f"{stem}.json", {c: [r[i] for r in rows] for i, c in enumerate(columns)})
        else:
            self.csv(f"{stem}.csv", columns, rows)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(cfg: RunConfig, subcommand: str, out: Outputs, wall_clock: float) -> dict:
    return {
        "subcommand": subcommand,
        "config_sha256": cfg.digest(),
        "seed": cfg["run"]["seed"],
        "version": tool_version(),
        "wall_clock_s": wall_clock,
        "files": [
            {"name": name, "bytes": (out.dir / name).stat().st_size, "sha256": _sha256(out.dir / name)}
            for name in sorted(out.files)
        ],
    }


# -- pipelines -------------------------------------------------------------------

def _profile(cfg: RunConfig, out: Outputs) -> None:
    p, w = cfg.medium(), cfg.wave()
    prof = solve_profile(cfg["run"]["e0"], p, w)
    out.csv("profile.csv", ("r", "e_t"), zip(prof.r_grid, prof.e_t))
    info = {"e0": prof.e0, "beta": prof.beta, "kappa": prof.kappa, "power": prof.power}
    if p.pure_kerr and p.d_eps > 0:
        info["townes_norm"] = townes_norm(prof, p, w)
    amps = cfg["run"]["amplitudes"]
    if amps:
        curve = critical_power(p, w, amps)
        info["power_curve"] = {"e0": curve.peak_amplitudes, "power": curve.powers, "beta": curve.betas,
                               "critical_power": curve.critical_power}
    out.json("profile.json", info)
    cut = prof.r_grid <= prof.core_radius(1e-4)
    render_series({"E_t": (prof.r_grid[cut], prof.e_t[cut])}, out.path("profile.svg"),
                  title="radial profile", xlabel="r", ylabel="E_t")


def _initial_field(cfg: RunConfig):
    g, r = cfg["grid"], cfg["run"]
    if r["initial"] == "soliton":
        prof = solve_profile(r["e0"], cfg.medium(), cfg.wave())
        return bpm.embed_profile(prof, g["nx"], g["ny"], g["dx"])
    return bpm.gaussian(g["nx"], g["ny"], g["dx"], r["w0"], amplitude=r["e0"])


def _propagate(cfg: RunConfig, out: Outputs) -> None:
    p, w, r = cfg.medium(), cfg.wave(), cfg["run"]
    f0 = _initial_field(cfg)
    z_end = r["n_diffraction"] * experiments.diffraction_length(bpm.width(f0), w.k_lin(p))
    trace = bpm.propagate(f0, z_end, r["dz"] or w.lambda_med / 10, p, w,
                          record_every=r["record_every"], absorber=r["absorber"])
    out.table("trace", trace.COLUMNS, trace.rows())
    dump_grid(trace.final, out.path("final.solgrid"))
    g = cfg["grid"]
    half_x, half_y = g["nx"] * g["dx"] / 2, g["ny"] * g["dx"] / 2
    render_heatmap(np.abs(trace.final.amp) ** 2, out.path("intensity.svg"), title=f"|E|^2 at z = {z_end:.6g}",
                   extent=(-half_x, half_x, -half_y, half_y))
    render_series({"width": (trace.column("z"), trace.column("width"))}, out.path("width.svg"),
                  title="beam width", xlabel="z", ylabel="width")
    pw = trace.column("power")
    wd = trace.column("width")
    out.json("propagate.json", {
        "z_end": z_end, "power_drift": float(abs(pw[-1] / pw[0] - 1)),
        "width_drift": float(np.max(np.abs(wd / wd[0] - 1))), "contaminated": trace.contaminated,
    })


def _stability(cfg: RunConfig, out: Outputs) -> None:
    g, r = cfg["grid"], cfg["run"]
    sc = experiments.StabilityConfig(
        medium=cfg.medium(), k0=cfg["wave"]["k0"], e0=r["e0"], nx=g["nx"], ny=g["ny"], dx=g["dx"],
        n_diffraction=r["n_diffraction"], dz=r["dz"] or None, record_every=r["record_every"],
        seed=r["seed"], absorber=r["absorber"])
    res = experiments.run_stability(r["kind"], r["level"], sc)
    out.table("trace", res.trace.COLUMNS, res.trace.rows())
    out.json("stability.json", {
        "kind": res.kind, "level": res.level, "verdict": res.verdict, "centroid_drift": res.centroid_drift,
        "width_drift": res.width_drift, "core_fraction": res.core_fraction, "monotone": res.monotone,
        "tracked_x": res.tracked_x,
    })
    render_series({"tracked x": (res.trace.column("z"), res.tracked_x)}, out.path("centroid.svg"),
                  title=f"{res.kind} level {res.level:g}", xlabel="z", ylabel="x")


def _pair(cfg: RunConfig, out: Outputs) -> None:
    g, r = cfg["grid"], cfg["run"]
    pc = experiments.PairConfig(
        medium=cfg.medium(), k0=cfg["wave"]["k0"], e0=r["e0"], nx=g["nx"], ny=g["ny"], dx=g["dx"],
        n_diffraction=r["n_diffraction"], dz=r["dz"] or None, record_every=r["record_every"],
        absorber=r["absorber"])
    prof = solve_profile(r["e0"], pc.medium, pc.wave())
    sep = r["separation"]
    if sep == 0:
        sep = 4 * bpm.width(experiments.soliton_field(prof, g["nx"], g["ny"], g["dx"]))
    res = experiments.run_pair(sep, r["relative_phase"], pc, profile=prof)
    out.table("pair", ("z", "separation", "center_of_mass"), zip(res.z, res.separations, res.center_of_mass))
    out.json("pair.json", {"separation": res.separation, "relative_phase": res.relative_phase,
                           "verdict": res.verdict, "merged": res.merged})
    render_series({"separation": (res.z, res.separations)}, out.path("separation.svg"),
                  title="pair separation", xlabel="z", ylabel="separation")


def young_config(cfg: RunConfig) -> experiments.YoungConfig:
    g, r, m = cfg["grid"], cfg["run"], cfg["mask"]
    nx, ny, dx = (m["nx"], 1, m["dx"]) if m["mode"] == "1d" else (g["nx"], g["ny"], g["dx"])
    return experiments.YoungConfig(
        medium=cfg.medium(), k0=cfg["wave"]["k0"], mode=m["mode"], kappa=m["kappa"], e0=r["e0"],
        nx=nx, ny=ny, dx=dx, filament_x=m["filament_x"], hole1_size=m["hole1_size"],
        side_offsets=tuple(m["side_offsets"]), hole2_size=m["hole2_size"], z_screen=m["z_screen"],
        n_aperture_lengths=m["n_aperture_lengths"], dz=r["dz"] or None, edge=m["edge"] or None,
        track_half_width=m["track_half_width"], significance=m["significance"],
        randomize_side_phase=m["randomize_side_phase"], n_realizations=m["n_realizations"],
        seed=r["seed"], record_every=r["record_every"])


def _young(cfg: RunConfig, out: Outputs) -> None:
    rep = experiments.run_young(young_config(cfg))
    out.table("young_trace", ("z", "control_x", "test_x"), zip(rep.z, rep.control_x, rep.test_x))
    out.json("young.json", rep.to_dict())
    render_series({"control": (rep.z, rep.control_x), "test": (rep.z, rep.test_x)}, out.path("young.svg"),
                  title="filament centroid", xlabel="z", ylabel="x")


def _scan(cfg: RunConfig):
    p, w, g, s = cfg.medium(), cfg.wave(), cfg["grid"], cfg["scan"]
    prof = solve_profile(cfg["run"]["e0"], p, w)
    grid = torus.PolarGrid(prof.core_radius(g["core_fraction"]), g["nr"], g["ntheta"])
    scan = torus.find_fixed_point(prof, p, w, (s["c_min"], s["c_max"]), s["n_scan"], grid)
    return prof, scan


def _scan_outputs(scan, out: Outputs) -> None:
    out.table("curvature", ("c", "gamma"), scan.rows())
    render_series({"gamma": (scan.c_values, scan.gamma_values),
                   "1": ([scan.c_values[0], scan.c_values[-1]], [1.0, 1.0])},
                  out.path("gamma.svg"), title="gamma(C)", xlabel="C", ylabel="gamma")


def _curvature(cfg: RunConfig, out: Outputs) -> None:
    _, scan = _scan(cfg)
    _scan_outputs(scan, out)
    out.json("curvature.json", {
        "c0": scan.c0, "r0": scan.r0, "stable": scan.stability,
        "crossings": [{"c": c.c, "gamma": c.gamma, "stable": c.stable} for c in scan.crossings],
    })


def _torus(cfg: RunConfig, out: Outputs) -> None:
    prof, scan = _scan(cfg)
    _scan_outputs(scan, out)
    r = cfg["run"]
    if scan.c0 is not None:
        c0, stable = scan.c0, True
    elif r["allow_unstable"] and scan.crossings:
        c0, stable = scan.crossings[0].c, False
    else:
        found = f"{len(scan.crossings)} unstable crossing(s)" if scan.crossings else "no crossing"
        raise torus.NoTorusError(f"no stable fixed point in the scanned range ({found}); "
                                 "set run.allow_unstable = true to use an unstable crossing")
    w = cfg.wave()
    sols = torus.quantize(1.0 / c0, w, r["m_policy"], r["delta"])
    eps_lin = cfg["medium"]["eps_lin"]
    sols = [torus.TorusSolution(s.r0, s.m, s.lambda_adj, torus.torus_energy(prof.power, s, eps_lin), s.freq_shift)
            for s in sols]
    out.json("torus.json", {
        "c0": c0, "r0": 1.0 / c0, "stable": stable, "flux": prof.power,
        "m": [s.m for s in sols], "energies": [s.energy for s in sols],
        "solutions": [s.to_dict() for s in sols],
    })


def _sweep(cfg: RunConfig, out: Outputs) -> None:
    grid = cfg.sweep_grid()
    if not grid:
        raise ConfigError("sweep needs at least one non-empty scan.vary_* list")
    g, s, r = cfg["grid"], cfg["scan"], cfg["run"]
    workers = r["workers"]
    cap = os.environ.get("TOROTON_THREADS")
    if cap and cap.isdigit() and int(cap) > 0:
        workers = min(workers, int(cap))
    cells = torus.sweep_gamma(grid, (s["c_min"], s["c_max"]), cfg.medium(), k0=cfg["wave"]["k0"],
                              e0=r["e0"], n_scan=s["n_scan"], grid_fraction=g["core_fraction"],
                              nr=g["nr"], ntheta=g["ntheta"], workers=workers)
    keys = list(grid)
    cols = (*keys, "has_crossing", "stable", "c0", "gamma_min", "gamma_max", "error")
    out.table("sweep", cols, ([c.params[k] for k in keys] + [c.has_crossing, c.stable, c.c0,
                                                             c.gamma_min, c.gamma_max, c.error]
                              for c in cells))


PIPELINES = {
    "profile": _profile, "propagate": _propagate, "stability": _stability, "pair": _pair,
    "young": _young, "curvature": _curvature, "torus": _torus, "sweep": _sweep,
}


def dispatch(subcommand: str, cfg: RunConfig, out_dir, fmt: str = "csv") -> dict:
    """Run one pipeline into ``out_dir`` and return the manifest (written last)."""
    if subcommand not in PIPELINES:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for stale in (MANIFEST, ERROR_REPORT):
        (out_dir / stale).unlink(missing_ok=True)
    out = Outputs(out_dir, fmt)
    t0 = time.perf_counter()
    PIPELINES[subcommand](cfg, out)
    out.path("config.ini").write_text(cfg.serialize(), encoding="utf-8")
    manifest = build_manifest(cfg, subcommand, out, time.perf_counter() - t0)
    write_json(out_dir / MANIFEST, manifest)
    return manifest


def _error_report(out_dir, subcommand, status, exc, cfg=None) -> None:
    report = {
        "subcommand": subcommand,
        "exit_status": status,
        "error_type": type(exc).__name__,
        "message": str(exc),
        "problems": list(getattr(exc, "problems", [])),
        "config_sha256": cfg.digest() if cfg is not None else None,
    }
    if hasattr(exc, "z"):
        report["z"] = exc.z
    if hasattr(exc, "radius"):
        report["radius"] = exc.radius
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / MANIFEST).unlink(missing_ok=True)
        write_json(Path(out_dir) / ERROR_REPORT, report)
    except OSError as err:
        print(f"toroton: could not write error report: {err}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toroton", description="Filament and torus soliton runs.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="INI run configuration (omit for all defaults)")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one config value (repeatable)")
    ap.add_argument("--seed", type=int, help="shorthand for --set run.seed=N")
    ap.add_argument("--format", choices=("csv", "json"), default="csv", help="format of traces and scans")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)  # exits with status 2 on usage errors
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    cfg = None
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, overrides)
    except (OSError, UnicodeDecodeError, ConfigError) as exc:
        for line in getattr(exc, "problems", [str(exc)]):
            print(f"toroton: config: {line}", file=sys.stderr)
        _error_report(args.out, args.subcommand, EXIT_USAGE, exc)
        return EXIT_USAGE
    try:
        dispatch(args.subcommand, cfg, args.out, args.format)
    except Exception as exc:  # noqa: BLE001 - every module error becomes a report
        print(f"toroton: {args.subcommand} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        _error_report(args.out, args.subcommand, EXIT_COMPUTE, exc, cfg)
        return EXIT_COMPUTE
    return EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
