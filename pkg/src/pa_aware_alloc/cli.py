"""Command-line entry point: ``pa-alloc <subcommand> [options]``.

Powers are given in dBm under a 1-ohm convention, i.e. ``P[V**2] =
1e-3 * 10**(dBm / 10)``. Options may also come from a flat ``key=value``
file passed with ``--config``; keys are the long option names with dashes
replaced by underscores. Command-line flags override the file.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .allocators import PgdOptions, pgd_optimize
from .channels import ChannelFormatError, read_channel
from .experiments import (
    ExperimentConfig,
    capacity_vs_noise,
    pa_curve,
    timeslot_sim,
    utilization_heatmap,
    write_csv,
)
from .mimo import NumericalError
from .regimes import DEFAULT_BAND, classify, noise_threshold
from .units import dbm_to_watt, watt_to_dbm

logger = logging.getLogger("pa_aware_alloc")

EXIT_USAGE = 2
EXIT_NUMERICAL = 3

OUTPUT_NAMES = {
    "pa-curve": "pa_curve.csv",
    "utilization-heatmap": "utilization_heatmap.csv",
    "capacity-vs-noise": "capacity_vs_noise.csv",
    "timeslot-sim": "timeslot_sim.csv",
    "allocate": "allocate.csv",
}


def parse_grid(text: str) -> list[float]:
    """``"a,b,c"`` or inclusive ``"start:stop:step"``."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(n)]
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}") from None
    if not values or not all(np.isfinite(values)):
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}")
    return values


def read_config(path: str) -> dict:
    """Parse a flat ``key=value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _shared(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("shared options")
    g.add_argument("--gain", type=float, default=10.0, help="small-signal gain G (default 10)")
    g.add_argument("--vcc", type=float, default=1.0, help="supply voltage V_CC in volts (default 1)")
    g.add_argument("--clipping", choices=("quadrature", "envelope"), default="quadrature",
                   help="clipping geometry of the amplifier model")
    g.add_argument("--nt", type=int, default=32, help="transmit antennas (default 32)")
    g.add_argument("--nr", type=int, default=32, help="receive antennas (default 32)")
    g.add_argument("--seed", type=int, default=0, help="base seed for channel draws")
    g.add_argument("--out", default=".", help="output directory for the CSV file")
    g.add_argument("--config", help="flat key=value file with option defaults")
    g.add_argument("--channel-file", help="channel CSV ('# rows=R cols=C', entries re:im)")
    g.add_argument("--jobs", type=int, default=1, help="worker processes for grid sweeps")
    g.add_argument("--max-iters", type=int, default=PgdOptions.max_iters,
                   help="iteration cap per gradient ascent run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pa-alloc",
        description="Amplifier-aware MIMO power allocation experiments.",
        epilog="All powers and noise variances are in dBm with a 1-ohm load "
               "(P[V^2] = 1e-3 * 10^(dBm/10)).",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pa-curve", help="alpha and distortion variance versus input power")
    _shared(p)
    p.add_argument("--vcc-list", type=parse_grid, default="0.5,1.0,1.5")
    p.add_argument("--p-dbm", type=parse_grid, default="-30:30:0.5",
                   help="input power grid in dBm, list or start:stop:step")

    p = sub.add_parser("utilization-heatmap", help="budget utilization over (P_total, noise)")
    _shared(p)
    p.add_argument("--ptotal-dbm-grid", type=parse_grid, default="-20:40:5")
    p.add_argument("--sigma-dbm-grid", type=parse_grid, default="-90:30:10")
    p.add_argument("--band", type=float, default=DEFAULT_BAND)

    p = sub.add_parser("capacity-vs-noise", help="PGD and water-filling capacity versus noise")
    _shared(p)
    p.add_argument("--ptotal-dbm", type=float, default=40.0)
    p.add_argument("--sigma-dbm-grid", type=parse_grid, default="-90:60:5")
    p.add_argument("--band", type=float, default=DEFAULT_BAND)

    p = sub.add_parser("timeslot-sim", help="capacity over time slots with random channels")
    _shared(p)
    p.add_argument("--slots", type=int, default=200)
    p.add_argument("--ptotal-dbm", type=float, default=40.0)
    p.add_argument("--sigma-n2-dbm", type=float, default=-60.0)
    p.add_argument("--channel", choices=("rayleigh", "multipath", "mixed"), default="multipath")

    p = sub.add_parser("allocate", help="solve one allocation for a channel file")
    _shared(p)
    p.add_argument("--ptotal-dbm", type=float, required=True)
    p.add_argument("--sigma-n2-dbm", type=float, required=True)
    p.add_argument("--band", type=float, default=DEFAULT_BAND)
    p.add_argument("--csv", action="store_true", help="also write allocate.csv to --out")
    return parser


GRID_FLAGS = ("--vcc-list", "--p-dbm", "--ptotal-dbm-grid", "--sigma-dbm-grid")


def _bind_grid_values(argv: list[str]) -> list[str]:
    # argparse reads "-80,20" as an option, so glue grid values to their flag
    out = []
    it = iter(argv)
    for token in it:
        if token in GRID_FLAGS:
            value = next(it, None)
            out.append(token if value is None else f"{token}={value}")
        else:
            out.append(token)
    return out


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    argv = _bind_grid_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            values = read_config(known.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        # string defaults go through each option's type converter
        for action in parser._subparsers._group_actions:  # noqa: SLF001
            for subparser in action.choices.values():
                dests = {a.dest for a in subparser._actions}  # noqa: SLF001
                subparser.set_defaults(**{k: v for k, v in values.items() if k in dests})
    args = parser.parse_args(argv)
    for name in ("vcc_list", "p_dbm", "ptotal_dbm_grid", "sigma_dbm_grid"):
        if isinstance(getattr(args, name, None), str):
            setattr(args, name, parse_grid(getattr(args, name)))
    return args


def _config(args) -> ExperimentConfig:
    kw = dict(
        n_t=args.nt, n_r=args.nr, gain=args.gain, v_cc=args.vcc, clipping=args.clipping,
        base_seed=args.seed, jobs=args.jobs, pgd=PgdOptions(max_iters=args.max_iters),
    )
    if hasattr(args, "ptotal_dbm_grid"):
        kw["p_total_dbm_grid"] = args.ptotal_dbm_grid
    if hasattr(args, "sigma_dbm_grid"):
        kw["sigma_n2_dbm_grid"] = args.sigma_dbm_grid
    for src, dst in (("ptotal_dbm", "p_total_dbm"), ("sigma_n2_dbm", "sigma_n2_dbm"),
                     ("slots", "n_slots"), ("channel", "channel"), ("band", "band")):
        if getattr(args, src, None) is not None:
            kw[dst] = getattr(args, src)
    return ExperimentConfig(**kw)


def _load_channel(args) -> Optional[np.ndarray]:
    if not args.channel_file:
        return None
    return read_channel(args.channel_file)


def _output_path(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, OUTPUT_NAMES[args.command])


def _cmd_allocate(args, H) -> int:
    from .allocators import waterfill_baseline
    from .mimo import capacity

    cfg = _config(args)
    pa = cfg.pa
    p_total = float(dbm_to_watt(args.ptotal_dbm))
    sigma_n2 = float(dbm_to_watt(args.sigma_n2_dbm))
    rep = pgd_optimize(H, p_total, pa, sigma_n2, cfg.pgd)
    wf = waterfill_baseline(H, p_total, sigma_n2, pa.gain).allocation
    c_wf = capacity(H, wf, pa, sigma_n2)
    threshold = noise_threshold(H, pa, p_total / H.shape[1])
    regime = classify(sigma_n2, threshold, args.band)

    powers = rep.allocation.powers
    print(f"channel          : {H.shape[0]} x {H.shape[1]}")
    print(f"budget           : {args.ptotal_dbm:g} dBm ({p_total:.6g} V^2)")
    print(f"noise variance   : {args.sigma_n2_dbm:g} dBm ({sigma_n2:.6g} V^2)")
    print("allocation [V^2] : " + " ".join(f"{x:.6g}" for x in powers))
    print(f"capacity         : {rep.capacity:.6f} bit/s/Hz (water-filling {c_wf:.6f})")
    print(f"utilization      : {100 * rep.utilization:.4f} %")
    print(f"noise threshold  : {float(watt_to_dbm(threshold)):.4f} dBm ({threshold:.6g} V^2)")
    print(f"regime           : {regime.regime.value} (sigma_n2/threshold = {regime.ratio:.6g})")
    print(f"iterations       : {rep.iterations} (converged={rep.converged})")
    if args.csv:
        rows = [(i, float(x), float(watt_to_dbm(x)), float(y))
                for i, (x, y) in enumerate(zip(powers, wf.powers))]
        write_csv(("antenna", "power", "power_dbm", "power_wf"), rows, _output_path(args))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        H = _load_channel(args)
        if args.command == "pa-curve":
            cols, rows = pa_curve(args.vcc_list, args.p_dbm, args.gain, args.clipping)
        elif args.command == "utilization-heatmap":
            cols, rows = utilization_heatmap(_config(args))
        elif args.command == "capacity-vs-noise":
            cols, rows = capacity_vs_noise(_config(args), H)
        elif args.command == "timeslot-sim":
            cols, rows = timeslot_sim(_config(args))
        else:
            if H is None:
                print("error: allocate requires --channel-file", file=sys.stderr)
                return EXIT_USAGE
            return _cmd_allocate(args, H)
    except (ChannelFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    path = _output_path(args)
    write_csv(cols, rows, path)
    logger.info("wrote %d rows to %s", len(rows), path)
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
