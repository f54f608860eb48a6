"""Command-line front end: ``fockdiff evolve | mean-curve | verify``.

Exit codes: 0 success, 1 verification failure, 2 invalid input, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys
import time
from typing import Optional, Sequence

from threadpoolctl import threadpool_limits

from . import verify as verify_mod
from .diffusion import (
    DEFAULT_DEFICIT_TARGET,
    METHODS,
    EvolutionResult,
    IntegrationError,
    evolve_spec,
    plan_dim,
)
from .states import STATE_KINDS, StateSpec

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_IO = 0, 1, 2, 3
THREADS_ENV = "FOCKDIFF_THREADS"


class InputError(ValueError):
    pass


def fmt(x: float) -> str:
    """17 significant digits, scientific notation."""
    return f"{float(x):.16e}"


def parse_times(text: str) -> list[float]:
    """``"0,0.5,2"`` or inclusive ``"start:stop:step"``."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if not step > 0:
                raise InputError(f"time step must be > 0 in {text!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            times = [start + i * step for i in range(max(count, 0))]
        else:
            times = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"cannot parse --times {text!r}") from None
    if any(not math.isfinite(t) or t < 0 for t in times):
        raise InputError("times must be finite and >= 0")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise InputError("times must be strictly ascending")
    return times


def _spec_from_args(args) -> StateSpec:
    try:
        return StateSpec(args.state, s=args.s, gamma=args.gamma, l=args.l, lam=args.lam)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _methods(args, spec: StateSpec) -> list[str]:
    methods = list(METHODS) if args.method == "all" else [args.method]
    if "analytic" in methods and spec.kind == "lwcs":
        raise InputError(
            "method/state mismatch: analytic method is only available for states "
            "nbs, chaotic and number"
        )
    return methods


def _resolve_dim(args, spec: StateSpec, times: list[float], methods: list[str]) -> Optional[int]:
    if methods == ["analytic"]:
        return None
    if args.dim == "auto":
        return plan_dim(spec, args.kappa * times[-1], args.deficit_target)
    try:
        dim = int(args.dim)
    except ValueError:
        raise InputError(f"--dim must be a positive integer or 'auto', got {args.dim!r}") from None
    if dim < 2:
        raise InputError(f"--dim must be >= 2, got {dim}")
    return dim


def _run(args) -> tuple[dict, list[EvolutionResult]]:
    spec = _spec_from_args(args)
    if not (math.isfinite(args.kappa) and args.kappa >= 0):
        raise InputError(f"kappa must be >= 0, got {args.kappa}")
    if not args.deficit_target > 0:
        raise InputError(f"--deficit-target must be > 0, got {args.deficit_target}")
    if args.n_report < 1:
        raise InputError(f"--n-report must be >= 1, got {args.n_report}")
    times = parse_times(args.times)
    methods = _methods(args, spec)
    dim = _resolve_dim(args, spec, times, methods) if times else None
    results = []
    for method in methods:
        results.extend(
            evolve_spec(spec, args.kappa, times, method, dim, args.deficit_target, min_levels=args.n_report)
        )
    # time-major, methods in fixed order
    order = {m: i for i, m in enumerate(METHODS)}
    results.sort(key=lambda r: (r.t, order[r.method]))
    config = {
        **spec.as_dict(),
        "kappa": args.kappa,
        "times": times,
        "dim": dim,
        "method": args.method,
        "n_report": args.n_report,
        "deficit_target": args.deficit_target,
    }
    return config, results


def _distribution(r: EvolutionResult, n: int) -> list[float]:
    vals = [float(v) for v in r.distribution[:n]]
    return vals + [0.0] * (n - len(vals))


def _json(obj) -> str:
    if isinstance(obj, bool) or obj is None:
        return {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{_json(k)}: {_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def render_evolve_json(config: dict, results: list[EvolutionResult]) -> str:
    payload = {
        "config": config,
        "results": [
            {
                "t": r.t,
                "method": r.method,
                "mean": r.mean,
                "trace": r.trace,
                "trace_deficit": r.trace_deficit,
                "distribution": _distribution(r, config["n_report"]),
            }
            for r in results
        ],
    }
    return _json(payload) + "\n"


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def render_evolve_csv(config: dict, results: list[EvolutionResult]) -> str:
    n = config["n_report"]
    header = ["t", "method", "mean", "trace", "trace_deficit"] + [f"p_{i}" for i in range(n)]
    rows = [
        [fmt(r.t), r.method, fmt(r.mean), fmt(r.trace), fmt(r.trace_deficit)]
        + [fmt(v) for v in _distribution(r, n)]
        for r in results
    ]
    return _csv_text(header, rows)


def render_mean_curve_csv(config: dict, results: list[EvolutionResult]) -> str:
    with_spread = config["method"] == "all"
    header = ["t", "mean", "trace", "trace_deficit", "method"] + (["spread"] if with_spread else [])
    spread = {}
    for r in results:
        lo, hi = spread.get(r.t, (r.mean, r.mean))
        spread[r.t] = (min(lo, r.mean), max(hi, r.mean))
    rows = []
    for r in results:
        row = [fmt(r.t), fmt(r.mean), fmt(r.trace), fmt(r.trace_deficit), r.method]
        if with_spread:
            lo, hi = spread[r.t]
            row.append(fmt(hi - lo))
        rows.append(row)
    return _csv_text(header, rows)


def _write(text: str, out: Optional[str]):
    if out is None or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc.strerror or exc}") from None


def cmd_evolve(args) -> int:
    config, results = _run(args)
    if args.format == "csv":
        _write(render_evolve_csv(config, results), args.out)
    else:
        _write(render_evolve_json(config, results), args.out)
    return EXIT_OK


def cmd_mean_curve(args) -> int:
    if len(parse_times(args.times)) < 2:
        raise InputError("mean-curve needs at least 2 time points")
    config, results = _run(args)
    _write(render_mean_curve_csv(config, results), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    start = time.perf_counter()
    checks = verify_mod.run(args.suite)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(
        f"{len(checks) - len(failed)}/{len(checks)} properties passed "
        f"in {time.perf_counter() - start:.1f} s"
    )
    return EXIT_VERIFY if failed else EXIT_OK


def _add_run_flags(p: argparse.ArgumentParser, method_default: str):
    p.add_argument("--state", required=True, choices=STATE_KINDS)
    p.add_argument("--s", type=int, help="subtracted photons (nbs)")
    p.add_argument("--gamma", type=float, help="0 < gamma < 1 (nbs, chaotic)")
    p.add_argument("--l", type=int, help="number-state index (number, lwcs)")
    p.add_argument("--lambda", dest="lam", type=float, help="0 < lambda <= 1 (lwcs)")
    p.add_argument("--kappa", type=float, required=True, help="diffusion rate")
    p.add_argument("--times", required=True, help="comma list or inclusive start:stop:step")
    p.add_argument("--dim", default="auto", help="Fock dimension or 'auto'")
    p.add_argument("--method", default=method_default, choices=METHODS + ("all",))
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--n-report", type=int, default=16, help="levels of the distribution to report")
    p.add_argument("--deficit-target", type=float, default=DEFAULT_DEFICIT_TARGET)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fockdiff",
        description="Diffusion-channel evolution of optical-field states in a truncated Fock space.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evolve", help="evolve a state and write distributions")
    _add_run_flags(ev, "kraus")
    ev.add_argument("--format", choices=("json", "csv"), default="json")
    ev.set_defaults(func=cmd_evolve)

    mc = sub.add_parser("mean-curve", help="tabulate the mean photon number over time (CSV)")
    _add_run_flags(mc, "analytic")
    mc.add_argument("--format", choices=("csv",), default="csv")
    mc.set_defaults(func=cmd_mean_curve)

    vf = sub.add_parser("verify", help="run invariant suites")
    vf.add_argument("suite", nargs="?", default="all", choices=verify_mod.SUITES + ("all",))
    vf.set_defaults(func=cmd_verify)
    return parser


def _thread_limit():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return threadpool_limits(limits=n)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _thread_limit():
            return args.func(args)
    except (ValueError, IntegrationError) as exc:
        # InputError, TruncationError and DensityError are ValueErrors
        print(f"fockdiff: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"fockdiff: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
