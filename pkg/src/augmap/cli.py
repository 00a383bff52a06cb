"""Command-line entry point: ``augmap {analyze,portrait,verify,simulate} <config>``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .config import ConfigError, build_map, load_config
from .models import orbit
from .report import analyze, dumps, trace_config, verify
from .svg import render_portrait

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _pair(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}") from None
    return x, y


def _orbit_spec(text: str) -> tuple[float, float, int]:
    parts = text.split(",")
    try:
        if len(parts) != 3:
            raise ValueError
        x, y, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,n, got {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError("orbit length must be >= 0")
    return x, y, n


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="augmap", description="Augmented phase portraits of planar maps.")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="write the JSON analysis of a model")
    a.add_argument("config")
    a.add_argument("-o", "--output")
    a.add_argument("--convergence", action="store_true", help="also attribute random orbits to attractors")

    p = sub.add_parser("portrait", help="render an SVG portrait")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--orbits", nargs="*", type=_orbit_spec, default=[], metavar="X,Y,N")
    p.add_argument("--title")

    v = sub.add_parser("verify", help="run the checks that apply to the model")
    v.add_argument("config")
    v.add_argument("--json", action="store_true", help="print the full report as JSON")
    v.add_argument("-o", "--output", help="also write the JSON report here")

    s = sub.add_parser("simulate", help="iterate one orbit and write t,x,y as CSV")
    s.add_argument("config")
    s.add_argument("--start", type=_pair, required=True, metavar="X,Y")
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("-o", "--output")
    return ap


def _simulate(args, cfg) -> int:
    if args.steps < 0:
        print("augmap: --steps must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    ob = orbit(build_map(cfg), args.start, args.steps)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "y"])
    for t, (x, y) in enumerate(ob.points):
        w.writerow([t, repr(float(x)), repr(float(y))])
    _emit(buf.getvalue(), args.output)
    if not ob.complete:
        print(f"augmap: orbit became non-finite after step {ob.failed_at}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"augmap: {args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "analyze":
        _emit(dumps(analyze(cfg, convergence=args.convergence)), args.output)
        return EXIT_OK
    if args.command == "portrait":
        m = build_map(cfg)
        _emit(render_portrait(m, trace_config(cfg, m), args.orbits, title=args.title), args.output)
        return EXIT_OK
    if args.command == "verify":
        rep = verify(cfg)
        if args.output:
            Path(args.output).write_text(dumps(rep))
        if args.json:
            sys.stdout.write(dumps(rep))
        else:
            for c in rep["checks"]:
                print(f"{'ok  ' if c['ok'] else 'FAIL'} {c['name']}: {c['detail']}")
            print(rep["summary"])
        return EXIT_OK if rep["ok"] else EXIT_FAIL
    return _simulate(args, cfg)


if __name__ == "__main__":
    sys.exit(main())
