"""Command-line entry point: ``satabs {simulate,synth,calibrate,fit,verify}``.

Exit codes: 0 success, 1 invalid input or failed verification, 2 numerical
non-convergence. Failures print a one-line JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import io
from .calibration import (PixelCalibration, T_MIN, binned_alpha, calibrate_stack,
                          fit_line, linear_fit_alpha_b, transmission)
from .errors import ConvergenceError, SatAbsError, ValidationError
from .model import ALPHA_ISO, ProbeGeometry
from .transport import DensityProfile, TransportParams, sweep_alpha_vs_b

EXIT_OK, EXIT_INVALID, EXIT_CONVERGENCE = 0, 1, 2

SIMULATE_COLUMNS = ("b", "s0", "T_c", "T_tot", "alpha_coh", "alpha_tot")
CALIBRATE_COLUMNS = ("row", "col", "alpha", "b", "residual_std", "n_used", "quality")


class _Parser(argparse.ArgumentParser):
    # argparse would exit with status 2, which is reserved for non-convergence
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _stem(out: str) -> Path:
    p = Path(out)
    return p.with_suffix("") if p.suffix == ".aimg" else p


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.b_steps < 1:
        raise ValidationError("--b-steps must be >= 1")
    if not 0 < args.b_min <= args.b_max:
        raise ValidationError("need 0 < b-min <= b-max")
    if not args.sc or min(args.sc) <= 0:
        raise ValidationError("--sc needs positive saturations")
    b_list = np.linspace(args.b_min, args.b_max, args.b_steps)
    geom = ProbeGeometry(alpha_iso=args.alpha_iso, solid_angle=args.omega)
    params = TransportParams(geometry=geom, alpha_sa=args.alpha_sa)
    rows = sweep_alpha_vs_b(b_list, args.sc, params, DensityProfile(n_grid=args.n_grid))
    io.write_csv(args.out, SIMULATE_COLUMNS,
                 ([getattr(r, c) for c in SIMULATE_COLUMNS] for r in rows))
    key = "alpha_tot" if args.use_total else "alpha_coh"
    for s0 in args.sc:
        pts = [(r.b, getattr(r, key)) for r in rows if r.s0 == s0]
        if len(pts) >= 2:
            slope = fit_line(*zip(*pts)).slope
            print(f"s0={s0:g}: {key} slope {slope:.4f} over b in [{args.b_min:g}, {args.b_max:g}]")
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import render_sweep

    doc = io.load_run_config(args.config)
    scene_cfg, noise = io.build_run(doc)
    if args.seed is not None:
        noise = replace(noise, seed=args.seed)
    out = args.out if args.out is not None else doc.get("output", {}).get("path")
    if out is None:
        raise ValidationError("no output path: pass --out or set output.path")
    stem = _stem(out)
    stem.parent.mkdir(parents=True, exist_ok=True)

    entries = []
    for i, trip in enumerate(render_sweep(scene_cfg, noise)):
        name = f"{stem.name}_{i:03d}.aimg"
        io.write_aimg(stem.parent / name, trip.frames, trip.meta)
        entries.append({"file": name, "index": i, "s0": trip.meta["s0"]})
    manifest = stem.parent / f"{stem.name}.manifest.json"
    config = {"scene": scene_cfg.to_dict(), "noise": asdict(noise)}
    io.write_manifest(manifest, config, entries)
    print(f"wrote {len(entries)} containers and {manifest}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    from .synth import SceneConfig, synth_scene

    _, paths = io.read_manifest(args.inp)
    scenes = {}
    stacks = []
    for path in paths:
        frames, meta = io.read_aimg(path)
        if frames.shape[0] != 3:
            raise ValidationError(f"{path}: expected 3 frames, got {frames.shape[0]}")
        try:
            key = json.dumps(meta["scene"], sort_keys=True)
            s0 = float(meta["s0"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: missing scene metadata") from exc
        if key not in scenes:
            scenes[key] = synth_scene(SceneConfig.from_dict(meta["scene"]))
        stacks.append((scenes[key].s_c(s0), transmission(*frames)))
    cmap = calibrate_stack(stacks, t_min=args.t_min)
    io.write_csv(args.out, CALIBRATE_COLUMNS,
                 ((r, c, p.alpha, p.b, p.residual_std, p.n_used, p.quality)
                  for r, c, p in cmap.records()))
    counts = {str(q): int((cmap.quality == q).sum()) for q in np.unique(cmap.quality)}
    print(f"calibrated {cmap.alpha.size} pixels: {counts}")
    return EXIT_OK


def _read_pixels(path) -> list[PixelCalibration]:
    rows = io.read_csv(path)
    missing = set(CALIBRATE_COLUMNS) - set(rows[0] if rows else CALIBRATE_COLUMNS)
    if missing:
        raise ValidationError(f"{path}: missing columns {sorted(missing)}")
    try:
        return [PixelCalibration(float(r["alpha"]), float(r["b"]), float(r["residual_std"]),
                                 int(r["n_used"]), r["quality"]) for r in rows]
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def cmd_fit(args) -> int:
    pixels = _read_pixels(args.inp)
    quality = tuple(q.strip() for q in args.quality.split(",") if q.strip())
    fit = linear_fit_alpha_b(pixels, quality, b_min=args.b_min, b_max=args.b_max)
    result = asdict(fit)
    result["quality"] = list(quality)
    result["b_min"] = args.b_min
    result["b_max"] = args.b_max
    if args.bin_width is not None:
        if not args.bin_width > 0:
            raise ValidationError("--bin-width must be > 0")
        sel = [p for p in pixels if p.quality in quality]
        b = np.array([p.b for p in sel])
        edges = np.arange(0.0, b.max() + args.bin_width, args.bin_width)
        centers, mean, counts = binned_alpha(b, [p.alpha for p in sel], edges)
        result["bins"] = [{"b": float(c), "alpha": None if np.isnan(m) else float(m),
                           "count": int(n)} for c, m, n in zip(centers, mean, counts)]
    io.write_json(args.out, result)
    print(f"alpha = {fit.offset:.4f}({fit.offset_err:.1g}) + "
          f"{fit.slope:.4f}({fit.slope_err:.1g}) b over {fit.n_points} pixels")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks

    failed = 0
    for name, ok, detail in run_checks():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += not ok
    return EXIT_OK if failed == 0 else EXIT_INVALID


# -- wiring ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="satabs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="transport-model alpha over a (b, s0) grid")
    p.add_argument("--b-min", type=float, required=True)
    p.add_argument("--b-max", type=float, required=True)
    p.add_argument("--b-steps", type=int, required=True)
    p.add_argument("--sc", type=_floats, required=True, help="comma-separated saturations")
    p.add_argument("--alpha-iso", type=float, default=ALPHA_ISO)
    p.add_argument("--alpha-sa", type=float, default=1.0)
    p.add_argument("--omega", type=float, default=ProbeGeometry().solid_angle,
                   help="collection solid angle (sr)")
    p.add_argument("--use-total", type=_bool, default=False,
                   help="report the slope of alpha_tot instead of alpha_coh")
    p.add_argument("--n-grid", type=int, default=2000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", help="render a noisy saturation sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output .aimg path stem")
    p.add_argument("--seed", type=int, help="override noise.seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("calibrate", help="per-pixel (alpha, b) from a synth manifest")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--t-min", type=float, default=T_MIN)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit", help="linear alpha(b) law from a calibration CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--quality", default="ok", help="comma-separated qualities to keep")
    p.add_argument("--b-min", type=float)
    p.add_argument("--b-max", type=float)
    p.add_argument("--bin-width", type=float, help="also report mean alpha per b bin")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", help="run the built-in oracle checks")
    p.set_defaults(func=cmd_verify)
    return parser


def _fail(exc: Exception, code: int) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    residual = getattr(exc, "residual", None)
    if residual is not None:
        err["residual"] = float(residual)
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConvergenceError as exc:
        return _fail(exc, EXIT_CONVERGENCE)
    except (SatAbsError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        return _fail(exc, EXIT_INVALID)


if __name__ == "__main__":
    sys.exit(main())
