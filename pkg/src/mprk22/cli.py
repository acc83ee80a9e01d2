"""Command-line interface.

Exit status: 0 success, 1 numerical failure, 2 usage or validation error.
Every CSV starts with a ``#`` line recording the invocation; the output path
and thread count are left out so reruns produce identical bytes.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np

from . import experiments as ex
from .core import MPRKParams, integrate
from .errors import DomainError, MPRKError, StepError, ValidationError
from .pds import TwoSpeciesSystem, linear_as_general, load_rate_matrix
from .stability import stability_function, stability_report, z_star

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
_PROVENANCE_SKIP = {"out", "threads", "func", "command"}
_FLAG_NAMES = {"lam": "lambda"}


def fmt(x) -> str:
    """Shortest round-trip decimal (at most 17 significant digits)."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def provenance(args: argparse.Namespace) -> str:
    parts = ["mprk22", args.command]
    for key, value in sorted(vars(args).items()):
        if key in _PROVENANCE_SKIP or value is None or value is False:
            continue
        flag = "--" + _FLAG_NAMES.get(key, key).replace("_", "-")
        if value is True:
            parts.append(flag)
        elif isinstance(value, list):
            parts.append(f"{flag} {','.join(fmt(v) for v in value)}")
        else:
            parts.append(f"{flag} {fmt(value) if isinstance(value, (int, float)) else value}")
    return "# " + " ".join(parts)


@contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_csv(args, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with _output(args.out) as fh:
        fh.write(provenance(args) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")


def _threads(args) -> int | None:
    env = os.environ.get("MPRK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"MPRK_THREADS must be an integer, got {env!r}") from None
    return args.threads


# subcommands -------------------------------------------------------------------


def cmd_integrate(args) -> int:
    test_group = any(v is not None for v in (args.a, args.b, args.delta))
    matrix_group = any(v is not None for v in (args.matrix, args.y0))
    if test_group == matrix_group:
        raise ValidationError("give exactly one of the groups (--a/--b/--delta) "
                              "or (--matrix/--y0)")
    if matrix_group:
        if args.matrix is None or args.y0 is None:
            raise ValidationError("--matrix and --y0 must be given together")
        sys_ = load_rate_matrix(args.matrix)
        y0 = np.array(args.y0, dtype=float)
        if y0.shape != (sys_.n_species,):
            raise ValidationError(f"--y0 has {y0.size} entries, matrix is "
                                  f"{sys_.n_species}x{sys_.n_species}")
    else:
        if args.a is None:
            raise ValidationError("--a is required with --b/--delta")
        b = args.a if args.b is None else args.b
        sys_ = TwoSpeciesSystem(args.a, b).as_linear()
        y0 = ex.initial_value(0.0 if args.delta is None else args.delta)
    if not np.all(y0 > 0):
        raise ValidationError("initial state must be strictly positive")
    if args.steps < 0:
        raise ValidationError("--steps must be nonnegative")
    pds = linear_as_general(sys_)
    traj = integrate(pds, y0, args.dt, args.steps, MPRKParams(args.alpha))
    n = y0.size
    header = ["step", "t", *(f"y_{i + 1}" for i in range(n)), "mass"]
    rows = ([k, traj.t[k], *traj.y[k], traj.y[k].sum()] for k in range(len(traj)))
    _write_csv(args, header, rows)
    return EXIT_OK


def cmd_scan_delta(args) -> int:
    if args.samples < 2:
        raise ValidationError("--samples must be at least 2")
    res = ex.scan_delta(args.alpha, a=args.a, dt=args.dt, steps=args.steps,
                        n_samples=args.samples, threads=_threads(args))
    cls = res.classes()[0]
    rows = ([d, v, c] for d, v, c in zip(res.delta_axis, res.d_values[0], cls))
    _write_csv(args, ["delta", "d", "class"], rows)
    for lo, hi in res.transitions():
        print(f"stable->unstable between delta={fmt(lo)} and delta={fmt(hi)}", file=sys.stderr)
    _warn_ambiguous(res)
    return EXIT_OK


def cmd_scan_alpha_delta(args) -> int:
    if args.delta_samples < 2:
        raise ValidationError("--delta-samples must be at least 2")
    alphas = ex.alpha_grid(args.alpha_min, args.alpha_max, args.alpha_samples)
    res = ex.scan_alpha_delta(alphas, ex.delta_grid(args.delta_samples), a=args.a,
                              dt=args.dt, steps=args.steps, threads=_threads(args))
    cls = res.classes()

    def rows():
        for p, alpha in enumerate(res.alpha_axis):
            for q, delta in enumerate(res.delta_axis):
                yield alpha, delta, res.d_values[p, q], cls[p, q]

    _write_csv(args, ["alpha", "delta", "d", "class"], rows())
    star = res.alpha_star()
    if star is not None:
        print(f"alpha* = {star[0]:.6g} +/- {star[1]:.2g}", file=sys.stderr)
    _warn_ambiguous(res)
    return EXIT_OK


def _warn_ambiguous(res: ex.ScanResult) -> None:
    cells = res.ambiguous_cells()
    if cells:
        print(f"warning: {len(cells)} cell(s) with {ex.STABLE_BELOW:g} <= d <= "
              f"{ex.UNSTABLE_ABOVE:g} need review", file=sys.stderr)


def cmd_stability(args) -> int:
    MPRKParams(args.alpha)
    sweep = [args.zmin, args.zmax, args.n]
    if any(v is not None for v in sweep):
        if any(v is None for v in sweep):
            raise ValidationError("sweep mode needs --zmin, --zmax and --n")
        if args.n < 2 or not args.zmax > args.zmin:
            raise ValidationError("sweep needs --n >= 2 and --zmax > --zmin")

        def rows():
            for z in np.linspace(args.zmin, args.zmax, args.n):
                try:
                    yield z, stability_function(args.alpha, z)
                except DomainError as exc:
                    yield z, "pole" if "pole" in str(exc) else "undefined"

        _write_csv(args, ["z", "R"], rows())
        return EXIT_OK

    if args.z is not None and (args.dt is not None or args.lam is not None):
        raise ValidationError("give either --z or --dt/--lambda, not both")
    if args.z is None and (args.dt is None) != (args.lam is None):
        raise ValidationError("--dt and --lambda must be given together")
    if args.z is None and args.dt is None:
        zs = ""
        if 0 < args.alpha < 0.5 or -0.5 < args.alpha < 0:
            zs = fmt(z_star(args.alpha))
        regime = MPRKParams(args.alpha).regime.value
        _write_csv(args, ["alpha", "regime", "z_star"], [[args.alpha, regime, zs]])
        return EXIT_OK
    if args.z is not None:
        z = args.z
    else:
        if not args.dt > 0 or args.lam > 0:
            raise ValidationError("need --dt > 0 and --lambda <= 0")
        z = args.dt * args.lam
    rep = stability_report(args.alpha, z)
    zs = "" if rep.z_star is None else fmt(rep.z_star)
    _write_csv(args, ["R", "|R|", "class", "z_star"],
               [[rep.r_value, rep.modulus, rep.classification.value, zs]])
    return EXIT_OK


def cmd_convergence(args) -> int:
    rows = ex.convergence_order(args.alpha, a=args.a, delta=args.delta,
                                dt_list=args.dt_list, T=args.T)
    out = []
    for r in rows:
        if r.failed:
            print(f"warning: integration failed for dt={fmt(r.dt)}", file=sys.stderr)
        out.append([r.dt, "failed" if r.failed else r.error,
                    "" if r.order is None else r.order])
    _write_csv(args, ["dt", "error", "order"], out)
    return EXIT_OK


# parser --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    fmt_cls = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="mprk22", description="MPRK22(alpha) integrators, stability "
                     "functions and spurious-fixed-point experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *, alpha_required=True):
        p.add_argument("--alpha", type=float, required=alpha_required,
                       help="scheme parameter alpha (dimensionless, nonzero)")
        p.add_argument("--out", default=None, help="output CSV path (default: stdout)")

    def run_flags(p, a_default):
        p.add_argument("--a", type=float, default=a_default,
                       help="rate a of the test problem [1/time]")
        p.add_argument("--dt", type=float, default=1.0, help="time step [time]")
        p.add_argument("--steps", type=int, default=ex.DEFAULT_STEPS,
                       help="number of steps M [count]")
        p.add_argument("--threads", type=_positive_int, default=None,
                       help="worker threads [count] (default: available CPUs; "
                            "MPRK_THREADS overrides)")

    p = sub.add_parser("integrate", formatter_class=fmt_cls,
                       help="integrate a linear PDS and write the trajectory")
    common(p)
    p.add_argument("--dt", type=float, default=1.0, help="time step [time]")
    p.add_argument("--steps", type=int, default=ex.DEFAULT_STEPS,
                   help="number of steps [count]")
    p.add_argument("--a", type=float, default=None,
                   help="rate a of [[-a, b], [a, -b]] [1/time]")
    p.add_argument("--b", type=float, default=None, help="rate b [1/time] (default: a)")
    p.add_argument("--delta", type=float, default=None,
                   help="initial offset, y0 = (0.5 + delta, 0.5 - delta) (default: 0)")
    p.add_argument("--matrix", default=None, help="N x N rate-matrix CSV file [1/time]")
    p.add_argument("--y0", type=_float_list, default=None,
                   help="comma-separated positive initial state (with --matrix)")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("scan-delta", formatter_class=fmt_cls,
                       help="d(alpha, delta) over equidistant delta samples")
    common(p)
    run_flags(p, 20.0)
    p.add_argument("--samples", type=int, default=200, help="number of delta samples [count]")
    p.set_defaults(func=cmd_scan_delta)

    p = sub.add_parser("scan-alpha-delta", formatter_class=fmt_cls,
                       help="d(alpha, delta) on an alpha x delta grid")
    p.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    run_flags(p, 200.0)
    p.add_argument("--alpha-min", type=float, default=-2.0,
                   help="open lower end of the alpha range (dimensionless)")
    p.add_argument("--alpha-max", type=float, default=2.0,
                   help="closed upper end of the alpha range (dimensionless)")
    p.add_argument("--alpha-samples", type=_positive_int, default=241,
                   help="number of alpha samples [count]")
    p.add_argument("--delta-samples", type=int, default=160,
                   help="number of delta samples [count]")
    p.set_defaults(func=cmd_scan_alpha_delta)

    p = sub.add_parser("stability", formatter_class=fmt_cls,
                       help="evaluate R(z), classify a mode, or sweep R over z")
    common(p)
    p.add_argument("--z", type=float, default=None, help="argument z = dt*lambda (dimensionless)")
    p.add_argument("--dt", type=float, default=None, help="time step [time]")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="eigenvalue lambda <= 0 [1/time]")
    p.add_argument("--zmin", type=float, default=None, help="sweep start (dimensionless)")
    p.add_argument("--zmax", type=float, default=None, help="sweep end (dimensionless)")
    p.add_argument("--n", type=int, default=None, help="sweep points [count]")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("convergence", formatter_class=fmt_cls,
                       help="errors and observed orders on the test problem")
    common(p)
    p.add_argument("--a", type=float, default=1.0, help="rate a [1/time]")
    p.add_argument("--delta", type=float, default=0.25, help="initial offset delta")
    p.add_argument("--dt-list", type=_float_list,
                   default=[2.0 ** -k for k in range(3, 11)],
                   help="comma-separated decreasing step sizes [time]")
    p.add_argument("--T", type=float, default=1.0, help="final time [time]")
    p.set_defaults(func=cmd_convergence)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, DomainError) as exc:
        print(f"mprk22 {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StepError, MPRKError, ArithmeticError) as exc:
        print(f"mprk22 {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"mprk22 {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
