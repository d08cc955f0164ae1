"""Command-line interface: stats, pdf, sweep, and mc subcommands.

Emits JSON records or CSV tables (plot-ready data, no rendering).  Exit
codes: 0 success, 1 numerical failure, 2 unsupported configuration or bad
parameters, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

import numpy as np

from . import analysis, builders, closedforms, lumping, montecarlo
from .chain import (
    AbsorbingChain,
    SchemeTree,
    SizeCapError,
    SolveError,
    UnsupportedSchemeError,
)

SCHEMES = (
    "fixed-tree",
    "doubling",
    "dynamical",
    "deterministic",
    "asymmetric",
    "two-seg-cutoff",
    "finite-memory",
    "cc-doubling",
)

GRID_POINT_CAP = 10_000


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UnsupportedSchemeError, SizeCapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolveError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrwt",
        description="Waiting-time statistics of quantum repeater chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, scheme=True):
        if scheme:
            sp.add_argument("--scheme", choices=SCHEMES, required=True)
            sp.add_argument("--n", type=int, help="segment count")
            sp.add_argument("--d", type=int, help="doubling level (n = 2**d)")
            sp.add_argument("--m", type=int, help="memory cutoff in time units")
        sp.add_argument("--p", help="distribution success probability (comma list for asymmetric)")
        sp.add_argument("--a", type=float, help="swap success probability")
        sp.add_argument(
            "--L0",
            type=float,
            help=f"segment length in km; sets p = exp(-L0/{closedforms.ATTENUATION_KM:g})",
        )
        sp.add_argument("--out", help="output file path (default: stdout)")

    st = sub.add_parser("stats", help="waiting-time statistics of one configuration")
    common(st)
    st.add_argument("--eps", type=float, default=analysis.PDF_EPS_DEFAULT)
    st.add_argument("--format", choices=("json", "csv"), default="json")
    st.set_defaults(func=cmd_stats)

    pd = sub.add_parser("pdf", help="truncated waiting-time distribution as CSV")
    common(pd)
    pd.add_argument("--eps", type=float, default=analysis.PDF_EPS_DEFAULT)
    pd.set_defaults(func=cmd_pdf)

    sw = sub.add_parser("sweep", help="metric over a (p, a) grid as CSV")
    common(sw)
    sw.add_argument("--grid", required=True, help="pmin:pmax:steps,amin:amax:steps")
    sw.add_argument(
        "--metric",
        choices=("mean", "ratio-to", "rel-error-vs-schedule"),
        default="mean",
    )
    sw.add_argument("--ratio-scheme", choices=SCHEMES, help="denominator scheme for ratio-to")
    sw.add_argument("--schedule", help="nested schedule, e.g. 8|2 (innermost first)")
    sw.set_defaults(func=cmd_sweep)

    mc = sub.add_parser("mc", help="Monte Carlo estimate for the doubling scheme")
    common(mc, scheme=False)
    mc.add_argument("--d", type=int, required=True)
    mc.add_argument("--cc", action="store_true", help="include classical communication")
    mc.add_argument("--trials", type=int, default=100_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.set_defaults(func=cmd_mc)
    return parser


def _resolve_p(args) -> float:
    if args.L0 is not None:
        if args.p is not None:
            raise ValueError("give either --p or --L0, not both")
        return closedforms.transmission_probability(args.L0)
    if args.p is None:
        raise ValueError("--p or --L0 is required")
    return float(args.p)


def _resolve_level(args) -> int:
    if args.d is not None:
        return args.d
    if args.n is None:
        raise ValueError("--n or --d is required for doubling schemes")
    d = args.n.bit_length() - 1
    if 2 ** d != args.n:
        raise UnsupportedSchemeError(f"doubling needs a power-of-two n, got {args.n}")
    return d


def _need(args, *names) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            raise ValueError(f"--{name} is required for scheme {args.scheme}")


def _build_chain(args) -> AbsorbingChain:
    """Chain for the requested scheme; raises UnsupportedSchemeError otherwise."""
    scheme = args.scheme
    if scheme == "fixed-tree":
        _need(args, "n", "a")
        return builders.build_fixed_scheme(SchemeTree.balanced(args.n), _resolve_p(args), args.a)
    if scheme == "doubling":
        _need(args, "a")
        d = _resolve_level(args)
        if d > lumping.DOUBLING_LEVEL_MAX:
            raise UnsupportedSchemeError(f"doubling supported up to d={lumping.DOUBLING_LEVEL_MAX}")
        if d == lumping.DOUBLING_LEVEL_MAX:
            raise UnsupportedSchemeError(
                "n=32 statistics come from the implicit solver; chain not materialized"
            )
        if d == 0:
            return builders.build_single_segment(_resolve_p(args))
        return lumping.doubling_lumped(d, _resolve_p(args), args.a)
    if scheme == "dynamical":
        _need(args, "n", "a")
        return builders.build_dynamical(args.n, _resolve_p(args), args.a)
    if scheme == "deterministic":
        _need(args, "n")
        return lumping.deterministic_lumped(args.n, _resolve_p(args))
    if scheme == "asymmetric":
        if args.p is None or "," not in args.p:
            raise ValueError("asymmetric needs --p as a comma-separated list")
        p_list = [float(x) for x in args.p.split(",")]
        return builders.build_asymmetric_deterministic(p_list)
    if scheme == "two-seg-cutoff":
        _need(args, "a", "m")
        return builders.build_two_segment_cutoff(_resolve_p(args), args.a, args.m)
    if scheme == "finite-memory":
        _need(args, "n", "m")
        if args.a is not None and args.a != 1.0:
            raise UnsupportedSchemeError("cutoff with a<1 supported only for n=2 (two-seg-cutoff)")
        return builders.build_finite_memory_deterministic(args.n, _resolve_p(args), args.m)
    if scheme == "cc-doubling":
        _need(args, "a")
        return builders.doubling_with_cc(_resolve_level(args), _resolve_p(args), args.a)
    raise UnsupportedSchemeError(f"unknown scheme {scheme}")


def _scheme_record(args) -> dict:
    rec = {"scheme": args.scheme}
    for name in ("n", "d", "m"):
        value = getattr(args, name, None)
        if value is not None:
            rec[name] = value
    if args.a is not None:
        rec["a"] = args.a
    if args.p is not None or args.L0 is not None:
        rec["p"] = args.p if (args.p and "," in str(args.p)) else _resolve_p(args)
    return rec


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_stats(args) -> int:
    if args.scheme == "doubling" and (args.n == 32 or args.d == 5):
        moments = lumping.doubling_stats(5, _resolve_p(args), args.a)
        record = _scheme_record(args)
        record.update(
            mean=moments.mean,
            second_moment=moments.second_moment,
            variance=moments.variance,
            std=moments.std,
        )
    else:
        chain = _build_chain(args)
        stats = analysis.waiting_stats(chain, eps=args.eps)
        record = _scheme_record(args)
        record["states"] = chain.n_states
        record.update(stats.to_record())
    if args.format == "csv":
        buf = []
        keys = list(record)
        buf.append(",".join(keys))
        buf.append(",".join(str(record[k]) for k in keys))
        _emit("\n".join(buf) + "\n", args.out)
    else:
        _emit(json.dumps(record, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_pdf(args) -> int:
    chain = _build_chain(args)
    ks, ps = analysis.waiting_pdf(chain, eps=args.eps)
    lam, c1, resid = analysis.geometric_tail(chain, pdf=(ks, ps))
    rows = ["k,probability,cumulative"]
    cum = np.cumsum(ps)
    for k, pk, ck in zip(ks, ps, cum):
        rows.append(f"{k},{pk:.17g},{ck:.17g}")
    _emit("\n".join(rows) + "\n", args.out)
    summary = {
        "points": int(len(ks)),
        "cumulative_mass": float(cum[-1]),
        "tail_lambda": lam,
        "tail_c": c1,
        "tail_residual": resid,
    }
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return 0


def _parse_grid(spec: str):
    try:
        p_part, a_part = spec.split(",")
        p_lo, p_hi, p_n = p_part.split(":")
        a_lo, a_hi, a_n = a_part.split(":")
        ps = np.linspace(float(p_lo), float(p_hi), int(p_n))
        as_ = np.linspace(float(a_lo), float(a_hi), int(a_n))
    except Exception as exc:
        raise ValueError(f"bad grid spec {spec!r}: {exc}") from exc
    if len(ps) * len(as_) > GRID_POINT_CAP:
        raise ValueError(f"grid has {len(ps) * len(as_)} points (cap {GRID_POINT_CAP})")
    return ps, as_


def _mean_for(args, scheme: str, p: float, a: float) -> float:
    sub = argparse.Namespace(**vars(args))
    sub.scheme = scheme
    sub.p = str(p)
    sub.a = a
    sub.L0 = None
    if scheme == "doubling":
        return lumping.doubling_stats(_resolve_level(sub), p, a).mean
    return float(analysis.mean_absorption(_build_chain(sub))[0])


def cmd_sweep(args) -> int:
    ps, as_ = _parse_grid(args.grid)
    rows = []
    if args.metric == "mean":
        rows.append("p,a,mean")
        for p in ps:
            for a in as_:
                rows.append(f"{p:.17g},{a:.17g},{_mean_for(args, args.scheme, p, a):.17g}")
    elif args.metric == "ratio-to":
        if not args.ratio_scheme:
            raise ValueError("--ratio-scheme is required for metric ratio-to")
        rows.append("p,a,mean,mean_ref,ratio")
        for p in ps:
            for a in as_:
                num = _mean_for(args, args.scheme, p, a)
                den = _mean_for(args, args.ratio_scheme, p, a)
                rows.append(f"{p:.17g},{a:.17g},{num:.17g},{den:.17g},{num / den:.17g}")
    else:
        if not args.schedule:
            raise ValueError("--schedule is required for metric rel-error-vs-schedule")
        schedule = [int(x) for x in args.schedule.split("|")]
        rows.append("p,a,exact,approx,rel_error_percent")
        for p in ps:
            for a in as_:
                exact = _mean_for(args, args.scheme, p, a)
                approx = closedforms.nested_approx(schedule, p, a)
                err = closedforms.relative_error(approx, exact)
                rows.append(f"{p:.17g},{a:.17g},{exact:.17g},{approx:.17g},{err:.17g}")
    _emit("\n".join(rows) + "\n", args.out)
    return 0


def cmd_mc(args) -> int:
    if args.a is None:
        raise ValueError("--a is required for mc")
    est = montecarlo.estimate(
        args.d, _resolve_p(args), args.a, cc=args.cc, trials=args.trials, seed=args.seed
    )
    record = {"d": args.d, "p": _resolve_p(args), "a": args.a, "cc": args.cc, "seed": args.seed}
    record.update(est.to_record())
    print(json.dumps(record, indent=2, sort_keys=True))
    if args.out:
        rows = ["steps,count"]
        for k, c in zip(est.hist_steps, est.hist_counts):
            rows.append(f"{k},{c}")
        _emit("\n".join(rows) + "\n", args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
