"""Command-line interface.

Subcommands: trace, paraxial, psf, psf-grid, degrade, compare, mtf,
pipeline, plot. Exit codes: 0 success, 2 configuration/usage error,
3 numeric failure (TIR, degenerate bundle, no optical power, no edge),
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ChartError,
    ConfigError,
    DimensionMismatchError,
    EdgeError,
    EmptyPupilError,
    NoCrossingError,
    OptiblurError,
    PrescriptionParseError,
    PrescriptionValidationError,
    PSFFormatError,
    TraceError,
    ZeroPowerError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_CONFIG_ERRORS = (ConfigError, PrescriptionParseError, PrescriptionValidationError,
                  ChartError, DimensionMismatchError)
_NUMERIC_ERRORS = (TraceError, ZeroPowerError, EmptyPupilError, EdgeError,
                   NoCrossingError)
_IO_ERRORS = (PSFFormatError, OSError)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        return args.func(args)
    except _CONFIG_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except _IO_ERRORS as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except OptiblurError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optiblur",
        description="Lens ray tracing, PSF grids, image degradation and MTF metrology",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    def prescription_args(p, with_focus=True):
        p.add_argument("--prescription", required=True, help="lens prescription file")
        p.add_argument("--wavelength", type=float, default=531.0, metavar="NM")
        if with_focus:
            p.add_argument("--focus", action=argparse.BooleanOptionalAction, default=True,
                           help="move the image plane to the paraxial focus first")
            p.add_argument("--focus-wavelength", type=float, default=588.0, metavar="NM")

    p = sub.add_parser("trace", help="trace a field bundle, emit a per-ray CSV")
    prescription_args(p)
    p.add_argument("--theta-y", type=float, default=0.0, metavar="DEG")
    p.add_argument("--theta-x", type=float, default=0.0, metavar="DEG")
    p.add_argument("--grid", type=int, default=16, help="N for an N x N bundle")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("paraxial", help="first-order summary (EFL, BFD, NA)")
    p.add_argument("--prescription", required=True)
    p.add_argument("--wavelength", type=float, default=588.0, metavar="NM")
    p.set_defaults(func=cmd_paraxial)

    p = sub.add_parser("psf", help="single-field PSF, exported as raw+json+png")
    prescription_args(p)
    p.add_argument("--theta-y", type=float, default=0.0, metavar="DEG")
    p.add_argument("--theta-x", type=float, default=0.0, metavar="DEG")
    p.add_argument("--pupil-samples", type=int, default=128)
    p.add_argument("--pad", type=int, default=4)
    p.add_argument("--size", type=int, default=160)
    p.add_argument("--pitch", type=float, default=None, metavar="UM")
    p.add_argument("--out", required=True, help="output path stem")
    p.set_defaults(func=cmd_psf)

    p = sub.add_parser("psf-grid", help="render a field grid of PSFs into a directory")
    prescription_args(p)
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--fov", type=float, default=2.0, metavar="DEG")
    p.add_argument("--cell", type=int, default=160)
    p.add_argument("--pupil-samples", type=int, default=128)
    p.add_argument("--pad", type=int, default=4)
    p.add_argument("--pitch", type=float, default=None, metavar="UM")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_psf_grid)

    p = sub.add_parser("degrade", help="apply channel PSF grids to an RGB image")
    p.add_argument("--image", required=True)
    p.add_argument("--grid-dir", required=True,
                   help="directory holding three channel grid subdirectories")
    p.add_argument("--regions", required=True, metavar="RxC",
                   help="tiling as ROWSxCOLS, e.g. 6x8")
    p.add_argument("--blend", default="hard", metavar="hard|feather:N")
    p.add_argument("--boundary", default="mirror", choices=["mirror", "clamp", "zero"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("compare", help="RMSE between two exported PSFs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--norm", default="peak", choices=["peak", "sum"])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("mtf", help="slanted-edge MTF50 report over ROI list")
    p.add_argument("--image", required=True)
    p.add_argument("--rois", required=True, help="JSON list of {x, y, w, h}")
    p.add_argument("--annuli", default=None, metavar="R1,R2",
                   help="annulus radii in px (default 0.35/0.72 of half-diagonal)")
    p.add_argument("--baseline", default=None,
                   help="optional reference image for before/after deltas")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--plot", default=None, help="optional SFR plot PNG")
    p.set_defaults(func=cmd_mtf)

    p = sub.add_parser("pipeline", help="run the full degradation pipeline from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None, help="override config out_dir")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("plot", help="render PSF / SFR / report plots")
    p.add_argument("--psf", nargs="*", default=None, help="PSF stems for a panel")
    p.add_argument("--report", default=None, help="report JSON for region bars")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def _load_prescription(args):
    from .paraxial import refocus
    from .prescription import load_prescription

    p = load_prescription(args.prescription)
    if getattr(args, "focus", False):
        p = refocus(p, args.focus_wavelength)
    return p


def cmd_trace(args) -> int:
    from .raytrace import STATUS_NAMES, trace_bundle

    p = _load_prescription(args)
    bundle = trace_bundle(p, args.theta_y, args.wavelength, args.grid,
                          theta_x_deg=args.theta_x)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ray", "surface", "x_mm", "y_mm", "z_mm",
                         "L", "M", "N", "opl_mm", "status"])
        for i in range(len(bundle)):
            status = STATUS_NAMES[int(bundle.status[i])]
            for k in range(bundle.hits.shape[0]):
                if not np.isfinite(bundle.hits[k, i, 0]):
                    break
                x, y, z = bundle.hits[k, i]
                L, M, N = bundle.dirs_after[k, i]
                writer.writerow([i, k + 1, f"{x:.9f}", f"{y:.9f}", f"{z:.9f}",
                                 f"{L:.12f}", f"{M:.12f}", f"{N:.12f}",
                                 f"{bundle.opl_at[k, i]:.9f}", status])
    survivors = bundle.n_alive
    print(f"traced {len(bundle)} rays, {survivors} reached the image; CSV: {args.out}")
    return EXIT_OK


def cmd_paraxial(args) -> int:
    from .paraxial import paraxial_solve
    from .prescription import load_prescription

    p = load_prescription(args.prescription)
    s = paraxial_solve(p, args.wavelength)
    print(f"wavelength        : {args.wavelength:.1f} nm")
    print(f"EFL               : {s.effective_focal_length_mm:.6f} mm")
    print(f"BFD               : {s.back_focal_distance_mm:.6f} mm")
    print(f"paraxial focus z  : {s.focus_z_mm:.6f} mm")
    print(f"image defocus     : {s.image_defocus_mm:+.6f} mm")
    print(f"marginal angle    : {s.image_space_marginal_angle_rad:.6f} rad "
          f"(NA {s.numerical_aperture:.4f})")
    return EXIT_OK


def cmd_psf(args) -> int:
    from .psf import build_pupil, fraunhofer_psf
    from .psfio import export_psf

    p = _load_prescription(args)
    pupil = build_pupil(p, args.theta_x, args.theta_y, args.wavelength,
                        args.pupil_samples)
    psf = fraunhofer_psf(pupil, args.pad, args.size, args.pitch)
    paths = export_psf(psf, args.out)
    print(f"PSF {psf.size}x{psf.size}, pitch {psf.pixel_pitch_um:.4f} um/px -> "
          + ", ".join(str(x) for x in paths))
    return EXIT_OK


def cmd_psf_grid(args) -> int:
    from .psfgrid import render_psf_grid
    from .psfio import export_grid

    p = _load_prescription(args)
    grid = render_psf_grid(p, args.rows, args.cols, args.fov, args.wavelength,
                           cell_size_px=args.cell, pupil_samples=args.pupil_samples,
                           pad_factor=args.pad, pixel_pitch_um=args.pitch,
                           workers=args.threads)
    export_grid(grid, args.out)
    print(f"{args.rows}x{args.cols} grid at {args.wavelength:.0f} nm -> {args.out}")
    return EXIT_OK


def _parse_blend(text: str) -> tuple[str, int]:
    if text == "hard":
        return "hard", 8
    if text.startswith("feather"):
        width = 8
        if ":" in text:
            try:
                width = int(text.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"bad feather width in {text!r}") from None
        return "feather", width
    raise ConfigError(f"blend must be 'hard' or 'feather:N', got {text!r}")


def cmd_degrade(args) -> int:
    from .degrade import degrade_image, plan_for_image
    from .image import load_png, save_png
    from .psfio import load_grid
    from .psfgrid import resize_grid

    try:
        rows_s, cols_s = args.regions.lower().split("x")
        rows, cols = int(rows_s), int(cols_s)
    except ValueError:
        raise ConfigError(f"--regions expects ROWSxCOLS, got {args.regions!r}") from None
    blend, feather = _parse_blend(args.blend)

    root = Path(args.grid_dir)
    grid_dirs = sorted(d for d in root.iterdir() if (d / "manifest.json").exists())
    if len(grid_dirs) != 3:
        raise ConfigError(
            f"{root} must hold exactly 3 channel grid directories, found {len(grid_dirs)}"
        )
    grids = sorted((load_grid(d) for d in grid_dirs),
                   key=lambda g: -g.wavelength_nm)

    img = load_png(args.image)
    plan = plan_for_image(img, rows, cols, args.boundary, blend, feather)
    grids = tuple(resize_grid(g, rows, cols) for g in grids)
    out = degrade_image(img, grids, plan)
    save_png(out, args.out)
    print(f"degraded {args.image} with {rows}x{cols} regions -> {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .metrology import rmse
    from .psfio import load_psf

    a = load_psf(args.a)
    b = load_psf(args.b)
    value = rmse(a, b, normalization=args.norm)
    print(f"RMSE ({args.norm}-normalized): {value:.6f}")
    return EXIT_OK


def cmd_mtf(args) -> int:
    from .image import load_png
    from .metrology import default_annuli, AnnulusPartition, region_report, partition_rois
    from .pipeline import load_roi_file
    from .sfr import esfr, mtf50

    img = load_png(args.image)
    rois = load_roi_file(args.rois)
    if args.annuli:
        try:
            r1, r2 = (float(v) for v in args.annuli.split(","))
        except ValueError:
            raise ConfigError(f"--annuli expects R1,R2 got {args.annuli!r}") from None
        part = AnnulusPartition((img.width / 2.0, img.height / 2.0), r1, r2)
    else:
        part = default_annuli(img.width, img.height)

    curves = []
    if args.baseline:
        base = load_png(args.baseline)
        report = region_report(base, img, rois, part)
        payload = report.to_dict()
        for m in report.measurements:
            if m.error is None:
                curves.append((f"({m.roi.x},{m.roi.y}) {m.region}",
                               esfr(img.luminance(), m.roi)))
    else:
        labeled = partition_rois(rois, part)
        luma = img.luminance()
        entries = []
        means: dict[str, list[float]] = {}
        for roi in labeled:
            entry = {"x": roi.x, "y": roi.y, "w": roi.w, "h": roi.h, "region": roi.region}
            try:
                curve = esfr(luma, roi)
                entry["mtf50_cypx"] = mtf50(curve)
                means.setdefault(roi.region, []).append(entry["mtf50_cypx"])
                curves.append((f"({roi.x},{roi.y}) {roi.region}", curve))
            except (EdgeError, NoCrossingError) as e:
                entry["error"] = str(e)
            entries.append(entry)
        payload = {
            "rois": entries,
            "region_means_cypx": {k: float(np.mean(v)) for k, v in means.items()},
        }

    Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"MTF report -> {args.out}")
    if args.plot:
        from .plotting import plot_sfr_curves

        plot_sfr_curves(curves, args.plot)
        print(f"SFR plot -> {args.plot}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    from .pipeline import PipelineConfig, run_pipeline

    cfg = PipelineConfig.from_json(args.config)
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    if args.threads is not None:
        cfg.threads = args.threads
    manifest = run_pipeline(cfg)
    print(f"pipeline complete: {len(manifest['artifacts'])} artifacts in {cfg.out_dir}")
    return EXIT_OK


def cmd_plot(args) -> int:
    if args.psf:
        from .plotting import plot_psf_panel
        from .psfio import load_psf

        plot_psf_panel([load_psf(p) for p in args.psf], args.out)
    elif args.report:
        from .metrology import MTFReport, RoiMeasurement
        from .plotting import plot_region_bars
        from .sfr import EdgeROI

        raw = json.loads(Path(args.report).read_text())
        measurements = [
            RoiMeasurement(
                EdgeROI(r["x"], r["y"], r["w"], r["h"]),
                r.get("region", "center"),
                r.get("mtf50_before_cypx"),
                r.get("mtf50_after_cypx"),
                r.get("error"),
            )
            for r in raw.get("rois", [])
        ]
        report = MTFReport(
            measurements,
            raw.get("region_means_before_cypx", {}),
            raw.get("region_means_after_cypx", {}),
        )
        plot_region_bars(report, args.out)
    else:
        raise ConfigError("plot needs --psf stems or --report JSON")
    print(f"plot -> {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
