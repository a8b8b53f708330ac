"""Command line entry point ``ks``.

Exit codes: 0 success, 2 invalid spec, 3 numerical abort (collision, CFL),
1 anything else.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from ..errors import ConfigError, FileFormatError, KSError, NumericalAbort

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_ABORT = 3


def _read_spec(path):
    from .config import validate_config

    try:
        with open(path, "rb") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read spec file: {exc}", "") from exc
    return validate_config(text)


def cmd_validate(args):
    spec = _read_spec(args.spec)
    json.dump(spec.document, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_run(args):
    from .runner import run_experiment

    spec = _read_spec(args.spec)
    m = run_experiment(spec, out_dir=args.out, jobs=args.jobs, resume=args.resume)
    print(f"wrote {len(m.data['artifacts'])} artifacts and {m.path}")
    return EXIT_OK


def _inspect_grid(path):
    from ..meanfield.gridio import read_grid

    f = read_grid(path)
    return {
        "format": "KSGRID1",
        "nx": f.grid.nx,
        "ny": f.grid.ny,
        "h": f.h,
        "origin": list(f.grid.origin),
        "time": f.time,
        "mass": f.mass,
        "max": float(f.values.max()),
    }


def _inspect_trajectory(path):
    from ..trajio import read_trajectory

    st = read_trajectory(path)
    h = st.header
    out = {
        "format": "KSTRAJ1",
        "version": h["version"],
        "n_particles": h["n"],
        "records": h["count"],
        "dt": h["dt"],
        "config": h["config"],
        "events": [e.to_dict() for e in st.events],
    }
    if h["count"]:
        out["time_range"] = [float(st.times[0]), float(st.times[-1])]
        out["min_distance"] = float(np.min(st.interval_min_dist))
    return out


def cmd_inspect(args):
    with open(args.file, "rb") as fh:
        magic = fh.read(8)
    if magic.startswith(b"KSGRID1"):
        info = _inspect_grid(args.file)
    elif magic.startswith(b"KSTRAJ1"):
        info = _inspect_trajectory(args.file)
    else:
        raise FileFormatError(f"{args.file}: neither a KSTRAJ1 trajectory nor a KSGRID1 snapshot")
    json.dump(info, sys.stdout, indent=1)
    sys.stdout.write("\n")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="ks", description="Keller-Segel particle / mean-field experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment spec")
    r.add_argument("spec")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
    r.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    r.add_argument("--resume", action="store_true", help="reuse finished runs and checkpoints")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a spec and print it with defaults filled in")
    v.add_argument("spec")
    v.set_defaults(func=cmd_validate)
    i = sub.add_parser("inspect", help="summarize a trajectory or density snapshot file")
    i.add_argument("file")
    i.set_defaults(func=cmd_inspect)
    return ap


def main(argv=None):
    logging.basicConfig(level=os.environ.get("KS_LOG", "WARNING"), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (KSError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
