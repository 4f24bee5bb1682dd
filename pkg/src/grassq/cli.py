"""Command line entry point: ``grassq <subcommand> ...``.

Every table starts with one ``#`` comment line recording the version, the
subcommand, all result-affecting arguments and the seed. Output is a pure
function of those, so repeated runs are byte-identical regardless of
``--workers``.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings

import numpy as np

from . import __version__
from .bounds import drf_lower, drf_upper, gv_bound, hamming_bound
from .codebook import design_maxmin, mean_distortion, random_codebook, save_codebook
from .core import FieldTag, GrassmannError, check_dimensions
from .mimo import cache_dir, mimo_sweep
from .volume import (
    ExtrapolationWarning,
    ball_volume,
    ball_volume_model,
    barg_volume,
    empirical_volumes,
    is_extrapolated,
)

EXIT_NUMERICAL = 1
EXIT_USAGE = 2

# Arguments that cannot change the numbers in a table.
_UNRECORDED = {"out", "workers", "func", "command"}


class UsageError(Exception):
    pass


# --- argument types ----------------------------------------------------------


def _grid(conv):
    def parse(text: str):
        items = [tok.strip() for tok in text.split(",") if tok.strip()]
        if not items:
            raise argparse.ArgumentTypeError("grid must contain at least one value")
        try:
            values = sorted(set(conv(tok) for tok in items))
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid grid {text!r}") from None
        return values

    return parse


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _field(text: str) -> FieldTag:
    try:
        return FieldTag.parse(text)
    except GrassmannError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# --- output ------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, FieldTag):
        return value.value
    return str(value)


def _jsonable(value):
    if isinstance(value, FieldTag):
        return value.value
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, (np.integer, np.bool_)):
        return int(value)
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    return value


def run_header(args: argparse.Namespace) -> dict:
    recorded = {k: v for k, v in sorted(vars(args).items()) if k not in _UNRECORDED}
    return {"version": __version__, "command": args.command, "args": recorded, "seed": args.seed}


def _header_comment(header: dict) -> str:
    parts = []
    for k, v in header["args"].items():
        if isinstance(v, list):
            v = ",".join(_fmt(x) for x in v)
        parts.append(f"{k}={_fmt(v)}")
    return f"# grassq {header['version']} command={header['command']} " + " ".join(parts)


def render(args: argparse.Namespace, columns: list[str], rows: list[list], notes: dict | None = None) -> str:
    header = run_header(args)
    if notes:
        header["notes"] = notes
    if args.format == "json":
        doc = {
            "header": _jsonable_dict(header),
            "columns": columns,
            "rows": [[_jsonable(v) for v in row] for row in rows],
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(_header_comment(header) + "\n")
    for k, v in (notes or {}).items():
        buf.write(f"# {k}={_fmt(v) if not isinstance(v, list) else ','.join(map(_fmt, v))}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable_dict(d: dict) -> dict:
    return {k: (_jsonable_dict(v) if isinstance(v, dict) else _jsonable(v)) for k, v in d.items()}


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _child_seed(seed: int, *tags: int) -> np.random.SeedSequence:
    """Independent stream for one (purpose, grid point) of a run."""
    return np.random.SeedSequence([seed, *tags])


def _model(args, tag: int = 0):
    check_dimensions(args.n, args.p)
    return ball_volume_model(
        args.n, args.p, args.field, samples=args.constant_samples, rng=_child_seed(args.seed, tag), workers=args.workers
    )


# --- subcommands ---------------------------------------------------------------


def cmd_volume_sweep(args) -> str:
    model = _model(args, 0)
    est = empirical_volumes(
        args.n, args.p, args.field, args.delta_grid, args.samples, _child_seed(args.seed, 1), args.workers
    )
    rows = []
    for delta, e in zip(args.delta_grid, est):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ExtrapolationWarning)
            power_law = ball_volume(model, delta)
        barg = barg_volume(args.n, args.p, args.field, delta) if delta > 0 else 0.0
        rows.append([delta, e.value, e.std_error, power_law, barg, is_extrapolated(model, delta)])
    cols = ["delta", "empirical_volume", "std_error", "theorem1_volume", "barg_volume", "extrapolation_flag"]
    return render(args, cols, rows, {"c": model.c, "c_std_error": model.c_std_error, "t": model.t})


def cmd_drf_sweep(args) -> str:
    model = _model(args, 0)
    rows = []
    for K in args.k_grid:
        if K >= 2:
            designed = design_maxmin(
                args.n, args.p, args.field, K, args.iterations, args.restarts, rng=_child_seed(args.seed, 2, K)
            )
        else:
            designed = random_codebook(args.n, args.p, args.field, 1, rng=_child_seed(args.seed, 2, K))
        rand = random_codebook(args.n, args.p, args.field, K, rng=_child_seed(args.seed, 3, K))
        dm = mean_distortion(designed, args.samples, _child_seed(args.seed, 4, K), args.workers)
        dr = mean_distortion(rand, args.samples, _child_seed(args.seed, 5, K), args.workers)
        rows.append([K, drf_lower(model, K), drf_upper(model, K), dm.mean, dm.std_error, dr.mean, dr.std_error])
    cols = ["K", "drf_lower", "drf_upper", "distortion_maxmin", "se_maxmin", "distortion_random", "se_random"]
    return render(args, cols, rows, {"c": model.c, "t": model.t})


def cmd_mimo_sweep(args) -> str:
    sweep = mimo_sweep(
        args.lt,
        args.lr,
        args.rho,
        args.rfb_grid,
        s=args.s,
        samples=args.samples,
        seed=args.seed,
        source=args.codebook,
        iterations=args.iterations,
        restarts=args.restarts,
        max_K=args.max_k,
        cache=cache_dir(),
        workers=args.workers,
    )
    scale = 1.0 / math.log(2.0) if args.bits else 1.0
    m = sweep.config.m
    cols = ["R_fb", "R_fb_over_m2", "rate_sim", "se_sim", "rate_pred_lo", "rate_pred_hi", "rate_pred_measuredD",
            "rate_opt"]
    if sweep.partial:
        cols.append("partial")
    rows = []
    for r in sweep.rows:
        row = [r.R_fb, r.R_fb / m**2, r.rate_sim * scale, r.se_sim * scale, r.rate_pred_lo * scale,
               r.rate_pred_hi * scale, r.rate_pred_measured * scale, r.rate_opt * scale]
        if sweep.partial:
            row.append(True)
        rows.append(row)
    notes = {"unit": "bits" if args.bits else "nats", "s": sweep.config.s}
    if sweep.partial:
        notes["skipped_R_fb"] = sweep.skipped
    return render(args, cols, rows, notes)


def cmd_design(args) -> str:
    C = design_maxmin(args.n, args.p, args.field, args.k, args.iterations, args.restarts, rng=args.seed)
    if args.codebook_out:
        save_codebook(C, args.codebook_out)
    cols = ["K", "mindist", "iterations", "init_only"]
    return render(args, cols, [[C.K, C.meta.mindist, C.meta.iterations, C.meta.init_only]])


def cmd_constant(args) -> str:
    model = _model(args, 0)
    return render(args, ["n", "p", "field", "t", "c", "std_error", "log_c"],
                  [[args.n, args.p, args.field, model.t, model.c, model.c_std_error, model.log_c]])


def cmd_bounds(args) -> str:
    wanted = [name for name in ("gv", "hamming", "drf_lower", "drf_upper") if getattr(args, name)]
    if not wanted:
        raise UsageError("choose at least one of --gv, --hamming, --drf-lower, --drf-upper")
    if ({"gv", "hamming"} & set(wanted)) and args.delta is None:
        raise UsageError("--gv/--hamming need --delta")
    if ({"drf_lower", "drf_upper"} & set(wanted)) and args.k is None:
        raise UsageError("--drf-lower/--drf-upper need --k")
    model = _model(args, 0)
    funcs = {
        "gv": lambda: gv_bound(model, args.delta),
        "hamming": lambda: hamming_bound(model, args.delta),
        "drf_lower": lambda: drf_lower(model, args.k),
        "drf_upper": lambda: drf_upper(model, args.k),
    }
    return render(args, ["bound", "value"], [[name, funcs[name]()] for name in wanted])


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grassq", description="Quantization on Grassmann manifolds.")
    parser.add_argument("--version", action="version", version=f"grassq {__version__}")

    manifold = argparse.ArgumentParser(add_help=False)
    manifold.add_argument("--n", type=_positive_int, required=True)
    manifold.add_argument("--p", type=_positive_int, required=True)
    manifold.add_argument("--field", type=_field, default=FieldTag.COMPLEX, help="R or C")
    manifold.add_argument("--constant-samples", type=_positive_int, default=10**6,
                          help="draws for the Monte Carlo real-field constant")

    design = argparse.ArgumentParser(add_help=False)
    design.add_argument("--iterations", type=int, default=5000)
    design.add_argument("--restarts", type=_positive_int, default=16)

    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, parents, samples=10**5, **kw):
        p = sub.add_parser(name, parents=parents, **kw)
        # Added per subcommand: shared parent actions would share their defaults.
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--samples", type=_positive_int, default=samples, help="Monte Carlo draws per estimate")
        p.add_argument("--out", default=None, help="write the table here instead of stdout")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--workers", type=_positive_int, default=1)
        return p

    p = add("volume-sweep", [manifold], help="ball volume vs radius")
    p.add_argument("--delta-grid", type=_grid(float), required=True)
    p.set_defaults(func=cmd_volume_sweep)

    p = add("drf-sweep", [manifold, design], help="distortion vs code size")
    p.add_argument("--k-grid", type=_grid(_positive_int), required=True)
    p.set_defaults(func=cmd_drf_sweep)

    p = add("mimo-sweep", [design], samples=10**4, help="finite-feedback MIMO rates")
    p.add_argument("--lt", type=_positive_int, required=True, help="transmit antennas")
    p.add_argument("--lr", type=_positive_int, required=True, help="receive antennas")
    p.add_argument("--s", type=_positive_int, default=None, help="on-beams (default min(lt, lr))")
    p.add_argument("--rho", type=float, required=True, help="average received SNR (linear)")
    p.add_argument("--rfb-grid", type=_grid(int), required=True, help="feedback bits per channel use")
    p.add_argument("--codebook", choices=("maxmin", "random"), default="maxmin")
    p.add_argument("--max-k", type=_positive_int, default=2**14, help="skip rates needing more codewords")
    p.add_argument("--bits", action="store_true", help="report rates in bits instead of nats")
    p.set_defaults(func=cmd_mimo_sweep)

    p = add("design", [manifold, design], help="max-min codebook design")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--codebook-out", default=None, help="codebook file to write")
    p.set_defaults(func=cmd_design)

    p = add("constant", [manifold], help="ball volume constant c")
    p.set_defaults(func=cmd_constant)

    p = add("bounds", [manifold], help="packing and distortion bounds")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--k", type=_positive_int, default=None)
    p.add_argument("--gv", action="store_true")
    p.add_argument("--hamming", action="store_true")
    p.add_argument("--drf-lower", action="store_true")
    p.add_argument("--drf-upper", action="store_true")
    p.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        text = args.func(args)
    except (UsageError, GrassmannError) as exc:
        print(f"grassq {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"grassq {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _emit(args, text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
