"""Command-line interface: config validation, media generation, write runs,
sweeps with a resumable worker pool, and plot-ready CSV emission.

Exit codes: 0 success, 2 configuration error, 3 simulation error, 4 I/O
error.  All CSV output is comma-separated with a header row, '.' decimals,
and LF line endings.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, analysis, config as config_mod, fields, protocol, rng
from .errors import ConfigError, Hamr3dError
from .media import build_stack, load_media, save_media

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_IO = 4


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.10g}" if isinstance(v, float) else v
                        for v in row])


def _manifest(out_dir: Path, cfg, extra: dict):
    doc = {"hamr3d_version": __version__, "config": cfg.to_dict(), **extra}
    with open(out_dir / "manifest.json", "w", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _build_arrays(cfg, laser_on=True, delta_d=None):
    heads = []
    for i, h in enumerate(cfg.heads):
        dd = h.delta_d if delta_d is None or i == 0 else delta_d
        heads.append(fields.HeadSpec(
            Tw=h.Tw, Hw=h.Hw, fwhm_T=h.fwhm_T, fwhm_H=h.fwhm_H,
            head_width=h.head_width, u_hat=h.u_hat, d=h.d, delta_d=dd,
            ramp_time=h.ramp_time))
    return fields.HeadArray(heads=heads, velocity=cfg.run.velocity,
                            t_env=cfg.llb_params.t_env, laser_on=laser_on)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_validate_config(args) -> int:
    cfg = config_mod.load_config(args.config) if args.config \
        else config_mod.default_config()
    config_mod.validate(cfg)
    print("config OK")
    if args.dump:
        sys.stdout.write(config_mod.dump_config(cfg))
    return EXIT_OK


def cmd_generate_media(args) -> int:
    cfg = config_mod.load_config(args.config) if args.config \
        else config_mod.default_config()
    seed = args.seed if args.seed is not None else cfg.run.seed
    stack = build_stack([replace(s) for s in cfg.media.layers],
                        cfg.media.track_length, cfg.media.track_width, seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_media(stack, out)
    print(f"wrote {out}")
    for li in range(stack.n_layers):
        grains = stack.grains(li)
        d_eq = [2.0 * np.sqrt(g.area / np.pi) for g in grains]
        tcs = [g.Tc for g in grains]
        kus = [g.Ku0 for g in grains]
        print(f"layer {li}: {len(grains)} grains, "
              f"d_eq = {np.mean(d_eq):.2f} +- {np.std(d_eq):.2f} nm, "
              f"Tc median {np.median(tcs):.1f} K "
              f"(sigma_ln {np.std(np.log(tcs)):.4f}), "
              f"Ku median {np.median(kus):.3g} erg/cc "
              f"(sigma_ln {np.std(np.log(kus)):.4f})")
    return EXIT_OK


def _run_from_config(cfg, media_path, seed, laser_on, traj_ids):
    stack = load_media(media_path)
    if stack.n_layers != len(cfg.media.layers):
        raise ConfigError(
            f"media file has {stack.n_layers} layers, config expects "
            f"{len(cfg.media.layers)}")
    array = _build_arrays(cfg, laser_on=laser_on)
    n_cells = int(np.ceil(stack.track_length / cfg.run.bit_length))
    heads = [replace(h, bits=protocol.square_wave_bits(n_cells))
             for h in array.heads]
    array = fields.HeadArray(heads=heads, velocity=array.velocity,
                             t_env=array.t_env, laser_on=array.laser_on)
    return protocol.RecordingRun(
        media=stack, array=array, bit_length=cfg.run.bit_length, seed=seed,
        params=replace(cfg.llb_params, dt=cfg.run.dt),
        equilibration_time=cfg.run.equilibration_time,
        cooldown_time=cfg.run.cooldown_time,
        trajectory_grain_ids=traj_ids)


def cmd_write(args) -> int:
    cfg = config_mod.load_config(args.config) if args.config \
        else config_mod.default_config()
    seed = args.seed if args.seed is not None else cfg.run.seed
    traj = list(cfg.output.trajectory_grain_ids)
    if args.track_grains:
        for part in args.track_grains.split(","):
            layer, gid = part.split(":")
            traj.append((int(layer), int(gid)))
    run = _run_from_config(cfg, args.media, seed, not args.laser_off, traj)
    result = protocol.run_recording(run)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _manifest(out, cfg, {
        "command": "write", "seed": seed, "media": str(args.media),
        "laser_off": bool(args.laser_off),
        "snapshot_times": result.snapshot_times,
    })
    final = run.media.copy()
    final.state = result.final_state
    save_media(final, out / "final_state.json", include_state=True)
    for pi, snap in enumerate(result.snapshots):
        snap_stack = run.media.copy()
        snap_stack.state = snap
        save_media(snap_stack, out / f"snapshot_pass{pi + 1}.json",
                   include_state=True)
    for (layer, gid), rows in result.trajectories.items():
        _write_csv(out / f"trajectory_L{layer}_G{gid}.csv",
                   ["t_ns", "m_x", "m_y", "m_z", "T_K"],
                   [tuple(map(float, r)) for r in rows])
    for li in range(run.media.n_layers):
        prof = analysis.track_profile(run.media, li,
                                      state=result.final_state[li],
                                      dx=cfg.analysis.grid_spacing)
        _write_csv(out / f"profile_layer{li}.csv", ["x_nm", "mz_mean"],
                   list(zip(map(float, prof.x_grid), map(float, prof.mz_mean))))
    print(f"run complete; outputs in {out}")
    return EXIT_OK


def _sweep_out_dirs(out: Path, axis: str, value: float):
    pdir = out / "points" / f"{axis}={value:g}"
    return pdir, pdir / "done.json"


def _hw_point(cfg_dict, layer_name, hw, repeats, base_seed):
    cfg = config_mod.from_dict(cfg_dict)
    layer = 0 if layer_name == "top" else len(cfg.media.layers) - 1
    head_idx = len(cfg.heads) - 1 - layer
    h = cfg.heads[head_idx]
    setup = analysis.SingleLayerWriteSetup(
        layer_stats=replace(cfg.media.layers[layer]),
        head=fields.HeadSpec(Tw=h.Tw, Hw=hw, fwhm_T=h.fwhm_T, fwhm_H=h.fwhm_H,
                             head_width=h.head_width, u_hat=h.u_hat, d=h.d,
                             ramp_time=h.ramp_time),
        track_length=cfg.media.track_length,
        track_width=cfg.media.track_width,
        bit_length=cfg.run.bit_length,
        velocity=cfg.run.velocity,
        segment_cells=cfg.analysis.segment_cells,
        params=replace(cfg.llb_params, dt=cfg.run.dt),
        window_mode=cfg.analysis.window_mode,
        normalize=cfg.analysis.normalize_mz,
        grid_dx=cfg.analysis.grid_spacing)
    curve, _ = analysis.field_sweep_sp(setup, [hw], repeats=repeats,
                                       base_seed=base_seed)
    return {"Hw": hw, "sp_eff": curve[0][1], "sp_std": curve[0][2]}


def _dd_point(cfg_dict, dd, repeats, base_seed):
    cfg = config_mod.from_dict(cfg_dict)
    heads = [fields.HeadSpec(Tw=h.Tw, Hw=h.Hw, fwhm_T=h.fwhm_T,
                             fwhm_H=h.fwhm_H, head_width=h.head_width,
                             u_hat=h.u_hat, d=h.d, ramp_time=h.ramp_time)
             for h in cfg.heads]
    setup = analysis.DualLayerWriteSetup(
        layer_stats=[replace(s) for s in cfg.media.layers],
        heads=heads,
        track_length=cfg.media.track_length,
        track_width=cfg.media.track_width,
        bit_length=cfg.run.bit_length,
        velocity=cfg.run.velocity,
        params=replace(cfg.llb_params, dt=cfg.run.dt),
        grid_dx=cfg.analysis.grid_spacing)
    snrs, system = analysis.run_delta_d_point(setup, dd, repeats, base_seed)
    return {"delta_d": dd, "snr_top": snrs[0][0], "snr_bottom": snrs[-1][0],
            "snr_system": system[0],
            "clamped": bool(any(c for _, c in snrs) or system[1])}


def cmd_sweep(args) -> int:
    cfg = config_mod.load_config(args.config) if args.config \
        else config_mod.default_config()
    values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    if not values:
        raise ConfigError("sweep needs at least one value")
    repeats = args.repeats or cfg.analysis.repeats
    base_seed = args.seed if args.seed is not None else cfg.run.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _manifest(out, cfg, {"command": "sweep", "axis": args.axis,
                         "values": values, "repeats": repeats,
                         "seed": base_seed, "layer": args.layer})

    cfg_dict = cfg.to_dict()
    jobs = []
    for v in values:
        pdir, marker = _sweep_out_dirs(out, args.axis, v)
        if marker.exists():
            continue
        jobs.append(v)

    def _submit(pool, v):
        if args.axis == "Hw":
            return pool.submit(_hw_point, cfg_dict, args.layer, v,
                               repeats, base_seed)
        return pool.submit(_dd_point, cfg_dict, v, repeats, base_seed)

    failures = []
    workers = max(1, args.threads or os.cpu_count() or 1)
    if jobs:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            futs = {_submit(pool, v): v for v in jobs}
            for fut in as_completed(futs):
                v = futs[fut]
                pdir, marker = _sweep_out_dirs(out, args.axis, v)
                try:
                    point = fut.result()
                except Exception as exc:  # noqa: BLE001
                    failures.append((v, repr(exc)))
                    continue
                pdir.mkdir(parents=True, exist_ok=True)
                with open(marker, "w", newline="\n") as fh:
                    json.dump(point, fh, indent=1, sort_keys=True)
                    fh.write("\n")
                print(f"{args.axis} = {v:g} done")
    if failures:
        for v, msg in failures:
            print(f"FAILED {args.axis} = {v:g}: {msg}", file=sys.stderr)
        return EXIT_SIMULATION

    points = []
    for v in values:
        _, marker = _sweep_out_dirs(out, args.axis, v)
        with open(marker) as fh:
            points.append(json.load(fh))
    if args.axis == "Hw":
        _write_csv(out / "sp_eff_curve.csv", ["Hw_Oe", "sp_eff", "sp_std"],
                   [(p["Hw"], p["sp_eff"], p["sp_std"]) for p in points])
        best = max(points, key=lambda p: p["sp_eff"])
        _write_csv(out / "summary.csv",
                   ["layer", "Hw_opt_Oe", "sp_eff_max"],
                   [(args.layer, best["Hw"], best["sp_eff"])])
    else:
        _write_csv(out / "snr_curve.csv",
                   ["delta_d_nm", "snr_top_db", "snr_bottom_db",
                    "snr_system_db"],
                   [(p["delta_d"], p["snr_top"], p["snr_bottom"],
                     p["snr_system"]) for p in points])
        best = max(points, key=lambda p: p["snr_system"])
        _write_csv(out / "summary.csv",
                   ["v_mps", "bit_length_nm", "delta_d_opt_nm", "snr_max_db"],
                   [(cfg.run.velocity, cfg.run.bit_length, best["delta_d"],
                     best["snr_system"])])
    print(f"sweep complete; outputs in {out}")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    src = Path(args.run)
    out = Path(args.out or (src / "plotdata"))
    if not src.exists():
        raise FileNotFoundError(f"run directory {src} does not exist")
    out.mkdir(parents=True, exist_ok=True)
    emitted = 0
    for f in sorted(src.glob("profile_layer*.csv")):
        (out / f.name).write_bytes(f.read_bytes())
        emitted += 1
    for f in sorted(src.glob("trajectory_*.csv")):
        (out / f.name).write_bytes(f.read_bytes())
        emitted += 1
    for name in ("sp_eff_curve.csv", "snr_curve.csv", "summary.csv"):
        f = src / name
        if f.exists():
            (out / name).write_bytes(f.read_bytes())
            emitted += 1
    for f in sorted(src.glob("*state*.json")) + sorted(src.glob("snapshot*.json")):
        stack = load_media(f)
        for li in range(stack.n_layers):
            prof = analysis.track_profile(stack, li)
            _write_csv(out / f"{f.stem}_profile_layer{li}.csv",
                       ["x_nm", "mz_mean"],
                       list(zip(map(float, prof.x_grid),
                                map(float, prof.mz_mean))))
            emitted += 1
    if emitted == 0:
        raise FileNotFoundError(f"no plottable outputs found under {src}")
    print(f"emitted {emitted} plot files to {out}")
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg = config_mod.load_config(args.config) if args.config \
        else config_mod.default_config()
    array = _build_arrays(cfg, laser_on=not args.laser_off)
    n_cells = int(np.ceil(cfg.media.track_length / cfg.run.bit_length))
    heads = [replace(h, bits=protocol.square_wave_bits(n_cells))
             for h in array.heads]
    array = fields.HeadArray(heads=heads, velocity=array.velocity,
                             t_env=array.t_env, laser_on=array.laser_on)
    x = np.arange(0.0, cfg.media.track_length + 0.25, 0.5)
    table = fields.profile_table(array, args.time, x)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["x_nm", "T_K", "Hx_Oe", "Hy_Oe", "Hz_Oe"],
               [tuple(map(float, row)) for row in table])
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hamr3d",
        description="Granular LLB simulator for hierarchical multi-head "
                    "heat-assisted recording")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-config", help="check a config file")
    p.add_argument("--config", help="YAML config path (default: built-in)")
    p.add_argument("--dump", action="store_true",
                   help="print the resolved config")
    p.set_defaults(fn=cmd_validate_config)

    p = sub.add_parser("generate-media", help="generate and save a medium")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate_media)

    p = sub.add_parser("write", help="run a recording simulation")
    p.add_argument("--config")
    p.add_argument("--media", required=True, help="media file from generate-media")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--laser-off", action="store_true",
                   help="disable heating (field-only sweep)")
    p.add_argument("--track-grains",
                   help="comma list of layer:grain_id to dump trajectories")
    p.set_defaults(fn=cmd_write)

    p = sub.add_parser("sweep", help="field or head-spacing sweep")
    p.add_argument("--config")
    p.add_argument("--axis", choices=["Hw", "delta-d"], required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--layer", choices=["top", "bottom"], default="bottom",
                   help="layer for Hw sweeps")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("HAMR3D_THREADS", "0")) or None,
                   help="worker processes (default: all cores)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("plot-data", help="emit plot-ready CSVs from outputs")
    p.add_argument("--run", required=True, help="run or sweep output directory")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_plotdata)

    p = sub.add_parser("profile", help="dump T(x) and H(x) at a given time")
    p.add_argument("--config")
    p.add_argument("--time", type=float, default=0.0, help="ns")
    p.add_argument("--laser-off", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_profile)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    axis = getattr(args, "axis", None)
    if axis == "delta-d":
        args.axis = "delta_d"
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FileNotFoundError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Hamr3dError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
