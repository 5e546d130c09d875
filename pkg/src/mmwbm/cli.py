"""Command-line entry points.

Errors are reported on stderr as a single ``error: <kind>: <message>`` line
with exit status 1; usage errors exit with status 2.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

from . import __version__
from .beam_mgmt import sweep_sequence
from .channel import channel_to_dict, draw_channel
from .codebook import azimuth_grid_deg, beam_gain_db, codebook_to_dict, export_codebook, import_codebook
from .config import SimConfig, config_to_dict, load_config
from .harness import run_monte_carlo
from .report import emit_results


def _config(args) -> SimConfig:
    path = getattr(args, "config", None)
    return load_config(path) if path else SimConfig()


def _codebook(args):
    if getattr(args, "codebook", None):
        return import_codebook(args.codebook)
    return _config(args).build_codebook()


def cmd_codebook_build(args) -> int:
    cb = _codebook(args)
    for level in range(1, cb.n_levels + 1):
        angles = " ".join(f"{a:g}" for a in cb.angles_deg(level))
        print(f"level {level}: {cb.count(level)} beams at {angles}")
    print(f"total: {cb.size} beams")
    if args.out:
        export_codebook(cb, args.out)
    return 0


def cmd_codebook_export(args) -> int:
    cb = _codebook(args)
    if args.out:
        export_codebook(cb, args.out)
    else:
        print(json.dumps(codebook_to_dict(cb), indent=1))
    return 0


def cmd_codebook_inspect(args) -> int:
    cb = _codebook(args)
    psi = azimuth_grid_deg(args.step)
    out = sys.stdout
    out.write("level,index,azimuth_deg,gain_db\n")
    for beam in cb.beams():
        gain = beam_gain_db(beam.weights, cb.geom, psi)
        for p, g in zip(psi, gain):
            out.write(f"{beam.level},{beam.index},{p:.6f},{g:.6f}\n")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if args.trials is not None:
        cfg = dataclasses.replace(cfg, n_trials=args.trials)
    start = time.perf_counter()
    records = run_monte_carlo(cfg, workers=args.workers)
    runtime = time.perf_counter() - start
    manifest = emit_results(records, args.out, config=config_to_dict(cfg),
                            master_seed=cfg.master_seed, runtime_s=runtime)
    for name in manifest.files:
        print(f"{args.out}/{name}")
    return 0


def cmd_sweep_trace(args) -> int:
    print(" ".join(str(k) for k in sweep_sequence(args.card, args.nu)))
    return 0


def cmd_channel_draw(args) -> int:
    cfg = _config(args)
    rng = np.random.default_rng(args.seed)
    arr = cfg.array
    real = draw_channel(cfg.channel, arr.aip, arr.ue, rng, arr.n_aips)
    text = json.dumps(channel_to_dict(real), indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmwbm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")

    cb = sub.add_parser("codebook", help="build, export or inspect the hierarchical codebook")
    cb_sub = cb.add_subparsers(dest="action")
    for name, fn, help_text in (
        ("build", cmd_codebook_build, "build and summarize the codebook"),
        ("export", cmd_codebook_export, "write the codebook as JSON"),
        ("inspect", cmd_codebook_inspect, "dump beam patterns as CSV"),
    ):
        p = cb_sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML simulation config")
        p.add_argument("--codebook", help="previously exported codebook JSON")
        if name == "inspect":
            p.add_argument("--step", type=float, default=1.0, help="azimuth step in degrees")
        else:
            p.add_argument("--out", help="output JSON path")
        p.set_defaults(func=fn)

    sim = sub.add_parser("simulate", help="run the Monte Carlo sweep")
    sim.add_argument("--config", help="YAML simulation config")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--workers", type=int, default=None, help="worker processes")
    sim.add_argument("--trials", type=int, default=None, help="override n_trials")
    sim.set_defaults(func=cmd_simulate)

    tr = sub.add_parser("sweep-trace", help="print the neighbour sweep order")
    tr.add_argument("--nu", type=int, required=True)
    tr.add_argument("--card", type=int, required=True)
    tr.set_defaults(func=cmd_sweep_trace)

    ch = sub.add_parser("channel", help="channel utilities")
    ch_sub = ch.add_subparsers(dest="action")
    draw = ch_sub.add_parser("draw", help="draw one realization and dump it as JSON")
    draw.add_argument("--seed", type=int, required=True)
    draw.add_argument("--config", help="YAML simulation config")
    draw.add_argument("--out", help="output JSON path")
    draw.set_defaults(func=cmd_channel_draw)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
