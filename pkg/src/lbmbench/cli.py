"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 verification failure.
"""

import argparse
import csv
import json
import logging
import os
import sys

from . import perfmodel
from .errors import ConfigurationError, DomainError, NumericalFailure
from .geometry import KINDS, GeometrySpec, build_geometry
from .harness import BenchConfig, ria_stats, run_benchmark
from .kernels import KERNEL_NAMES, get_kernel
from .verification import PoiseuilleCase, verify_kernel
from .d3q19 import TrtParams

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY = 3

CSV_COLUMNS = (
    "schema_version", "timestamp", "kernel", "geometry", "nx", "ny", "nz", "blk",
    "padding_mode", "threads", "iterations", "n_fluid", "seconds", "mflups",
    "bl_theoretical", "pmax_mflups", "v_fraction", "nt_streams_effective", "affinity_applied",
)


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so errors map to exit code 1."""

    def error(self, message):
        raise ConfigurationError(message)


def parse_dims(text):
    try:
        dims = tuple(int(v) for v in text.lower().split("x"))
    except ValueError:
        dims = ()
    if len(dims) != 3 or min(dims) < 1:
        raise ConfigurationError(f"--dims must look like NXxNYxNZ, e.g. --dims 500x100x100; got {text!r}")
    return dims


def parse_pin(text):
    try:
        cores = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        cores = []
    if not cores or min(cores) < 0:
        raise ConfigurationError(f"--pin must be a comma-separated core list, e.g. --pin 0,1,2,3; got {text!r}")
    return cores


def csv_record(result):
    """Flatten a BenchResult into the fixed CSV column set."""
    d = result.to_dict()
    row = {c: d.get(c) for c in CSV_COLUMNS}
    row["affinity_applied"] = ";".join("1" if a else "0" for a in result.affinity_applied)
    return {k: ("" if v is None else v) for k, v in row.items()}


def append_csv(path, result):
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            writer.writeheader()
        writer.writerow(csv_record(result))


def _geometry_spec(args):
    return GeometrySpec(args.kind, parse_dims(args.dims), args.block, args.spacing)


def cmd_list_kernels(args):
    for name in KERNEL_NAMES:
        print(name)
    return EXIT_OK


def cmd_geometry(args):
    ff = build_geometry(_geometry_spec(args))
    print(json.dumps(ff.stats(), sort_keys=True))
    return EXIT_OK


def cmd_bench(args):
    bandwidths = perfmodel.load_bandwidths(args.bandwidths) if args.bandwidths else None
    cfg = BenchConfig(
        kernel=args.kernel,
        geometry=GeometrySpec(args.geometry, parse_dims(args.dims), args.block, args.spacing),
        iterations=args.iterations, warmup=args.warmup, workers=args.threads,
        affinity=parse_pin(args.pin) if args.pin else None,
        padding=args.padding, blk=args.blk, pad=args.pad, seed=args.seed,
        tau=args.tau, bandwidths=bandwidths,
    )
    result = run_benchmark(cfg)
    if args.format == "json":
        text = result.to_json()
        if args.out:
            with open(args.out, "a") as fh:
                fh.write(text + "\n")
        else:
            print(text)
    else:
        if args.out:
            append_csv(args.out, result)
        else:
            writer = csv.DictWriter(sys.stdout, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            writer.writerow(csv_record(result))
    return EXIT_OK


def cmd_verify(args):
    nx, ny, nz = parse_dims(args.dims)
    case = PoiseuilleCase(nx, ny, nz, args.g, TrtParams.from_tau(args.tau))
    names = KERNEL_NAMES if args.kernel == "all" else [args.kernel]
    ok = True
    reports = []
    for name in names:
        rep = verify_kernel(get_kernel(name), case)
        reports.append(json.loads(rep.to_json()))
        if not rep.converged and rep.message.startswith("simulation diverged"):
            print(json.dumps(reports if len(reports) > 1 else reports[0], indent=2))
            raise NumericalFailure(rep.message, step=rep.steps)
        ok &= rep.passed
    print(json.dumps(reports if len(reports) > 1 else reports[0], indent=2))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_microbench(args):
    which = perfmodel.MICROBENCHMARKS if args.which == "all" else [args.which]
    results = {}
    for w in which:
        m = perfmodel.microbench(w, args.size, args.threads)
        results[w] = m
        print(json.dumps(m.to_dict(), sort_keys=True))
    if args.save:
        perfmodel.save_bandwidths(args.save, results)
    return EXIT_OK


def cmd_model(args):
    bandwidths = perfmodel.load_bandwidths(args.bandwidths) if args.bandwidths else {}
    stats = None
    if args.geometry:
        ff = build_geometry(GeometrySpec(args.geometry, parse_dims(args.dims), args.block, args.spacing))
        stats = ria_stats(ff, args.blk)
    rows = perfmodel.model_report(bandwidths, geom_stats=stats)
    print(perfmodel.report_json(rows) if args.format == "json" else perfmodel.format_report(rows))
    return EXIT_OK


def build_parser():
    p = _Parser(prog="lbmbench", description="D3Q19 TRT lattice Boltzmann kernel benchmarks")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("list-kernels", help="print the kernel names")
    s.set_defaults(func=cmd_list_kernels)

    def geometry_opts(s, kind_flag, default_kind):
        s.add_argument(kind_flag, default=default_kind, choices=KINDS, dest="kind" if kind_flag == "--kind" else "geometry")
        s.add_argument("--dims", default="500x100x100", help="NXxNYxNZ")
        s.add_argument("--block", type=int, default=4, help="obstacle edge for blocks")
        s.add_argument("--spacing", type=int, default=4, help="obstacle spacing for blocks")

    s = sub.add_parser("geometry", help="flag-field statistics as JSON")
    geometry_opts(s, "--kind", "channel")
    s.add_argument("--stats", action="store_true", help="print statistics (default)")
    s.set_defaults(func=cmd_geometry)

    s = sub.add_parser("bench", help="run one benchmark")
    s.add_argument("--kernel", required=True)
    geometry_opts(s, "--geometry", "channel")
    s.add_argument("--iterations", type=int, default=100)
    s.add_argument("--warmup", type=int, default=10)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--blk", type=int, default=0)
    s.add_argument("--padding", default="auto", help="auto|none|thrash|o0,...,o18")
    s.add_argument("--pad", type=int, default=0, help="per-direction pad of full-array SoA storage")
    s.add_argument("--pin", help="core list, e.g. 0,1,2,3")
    s.add_argument("--seed", type=int)
    s.add_argument("--tau", type=float, default=0.9)
    s.add_argument("--bandwidths", help="JSON file of micro-benchmark GB/s, for P_max")
    s.add_argument("--out")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("verify", help="Poiseuille verification, JSON report")
    s.add_argument("--kernel", default="all", help="kernel name or 'all'")
    s.add_argument("--dims", default="8x8x34")
    s.add_argument("--g", type=float, default=1e-6)
    s.add_argument("--tau", type=float, default=0.9)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("microbench", help="bandwidth micro-benchmarks")
    s.add_argument("--which", default="all", choices=perfmodel.MICROBENCHMARKS + ("all",))
    s.add_argument("--size", type=int, default=None, help="working set in bytes (>= 4x LLC)")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--save", help="write the bandwidths as JSON for `model`/`bench`")
    s.set_defaults(func=cmd_microbench)

    s = sub.add_parser("model", help="loop balance and Roofline table")
    s.add_argument("--bandwidths")
    s.add_argument("--geometry", choices=KINDS)
    s.add_argument("--dims", default="500x100x100")
    s.add_argument("--block", type=int, default=4)
    s.add_argument("--spacing", type=int, default=4)
    s.add_argument("--blk", type=int, default=0)
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_model)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
