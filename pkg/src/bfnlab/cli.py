"""Command line entry point: ``bfnlab {run,figure1,verify,bn-growth,colehopf-check}``.

Exit codes: 0 success, 2 unsupported regime, 1 any other failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import math
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .bfn import FIGURE1_T, figure1_rates, run_bfn
from .burgers import bn_sequence, growth_verdict, k0_wellposedness_check
from .cli_io import (
    ConfigError,
    fmt,
    load_config,
    rate_column,
    write_csv,
    write_gnuplot,
    write_json,
    write_profile_csv,
)
from .core import (
    BC,
    BfnError,
    CrossingError,
    Grid1D,
    NamedProfile,
    PositivityError,
    StabilityError,
    TruncationError,
    UnsupportedRegime,
)

# Why a run is refused, by error type.
ANCHORS = {
    CrossingError: "Theorems 4 and 6 assume characteristics that do not cross on [0, T]",
    TruncationError: "Proposition 3: the backward heat division exceeds the amplification cap",
    PositivityError: "Proposition 3: the Cole-Hopf inverse needs a positive heat field",
    StabilityError: "the viscous Burgers step violates its CFL guard",
}


def _fail(exc: Exception) -> int:
    if isinstance(exc, UnsupportedRegime):
        print(f"bfnlab: unsupported regime: {exc}", file=sys.stderr)
        return 2
    anchor = next((a for t, a in ANCHORS.items() if isinstance(exc, t)), None)
    msg = f"bfnlab: {exc}" if anchor is None else f"bfnlab: {exc} ({anchor})"
    print(msg, file=sys.stderr)
    return 1


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    report = run_bfn(cfg)
    out = _outdir(args.out)
    payload = report.to_dict()
    payload["config"] = Path(args.config).name
    write_json(out / "report.json", payload)
    write_profile_csv(out / "profile.csv", report.grid.x, report.w0, report.wtilde0, report.rate)
    print(f"wrote {out / 'report.json'} and {out / 'profile.csv'}")
    return 0


def cmd_figure1(args) -> int:
    Ts = tuple(args.T) if args.T else FIGURE1_T
    x, rates, alpha = figure1_rates(args.variant, Ts, args.alpha, args.grid_n, args.nt)
    out = _outdir(args.out)
    name = f"figure1_{args.variant}"
    write_csv(out / f"{name}.csv", ["x"] + [rate_column(T) for T in Ts], [x] + [rates[T] for T in Ts])
    write_gnuplot(out / f"{name}.plt", f"{name}.csv", Ts, f"{args.variant}, alpha = {fmt(alpha)}")
    print(f"alpha = {fmt(alpha)}; wrote {out / (name + '.csv')}")
    return 0


def cmd_verify(args) -> int:
    results = acceptance.run_all(args.mutate, echo=print)
    out = _outdir(args.out)
    payload = {
        "all_passed": all(r.passed for r in results),
        "mutation": args.mutate,
        "criteria": [
            {"id": r.key, "title": r.title, "passed": r.passed, "measured": r.measured,
             "tolerance": r.tolerance, "error": r.error}
            for r in results
        ],
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    write_json(out / "verify.json", payload)
    write_json(out / "verify_timing.json", {r.key: r.seconds for r in results})
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"bfnlab: criterion {failed[0].key} failed: {failed[0].title}", file=sys.stderr)
        return 1
    return 0


def cmd_bn_growth(args) -> int:
    if not 2 <= args.N <= 256:
        raise ValueError("N must lie in [2, 256]")
    a = np.arange(1, args.N + 1, dtype=float) ** -2.0
    seq = bn_sequence(a, args.K, args.Kp, args.nu, args.T)
    out = _outdir(args.out)
    log10 = seq.log_b / math.log(10)
    write_csv(out / "bn.csv", ["n", "log10_abs_b", "g"], [seq.n, log10, seq.g])
    verdict = growth_verdict(seq)
    growth = fmt(seq.max_growth) or "none"
    line = f"{verdict}: max tail g_n = {growth}, threshold 0.4*nu*T = {fmt(0.4 * args.nu * args.T)}"
    (out / "bn_summary.txt").write_text(line + "\n", encoding="utf-8")
    print(line)
    return 0


def cmd_colehopf_check(args) -> int:
    grid = Grid1D(args.grid_n, BC.DIRICHLET)
    ic = NamedProfile("sinpi", args.amplitude).field(grid)
    disc = k0_wellposedness_check(ic, args.nu, args.T, args.n_modes, args.cap)
    print(f"max relative discrepancy {fmt(disc)}")
    if args.out:
        write_json(_outdir(args.out) / "colehopf.json",
                   {"discrepancy": disc, "nu": args.nu, "T": args.T, "n_modes": args.n_modes,
                    "cap": args.cap, "amplitude": args.amplitude, "grid_n": args.grid_n})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bfnlab", description="Back-and-forth nudging laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run BFN from a configuration file")
    r.add_argument("config")
    r.add_argument("--out", default="out")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("figure1", help="decrease-rate profiles for a ladder of horizons")
    f.add_argument("variant", choices=["linear", "burgers"])
    f.add_argument("--T", type=float, nargs="+")
    f.add_argument("--alpha", type=float)
    f.add_argument("--grid-n", type=int, default=512)
    f.add_argument("--nt", type=int, default=1024)
    f.add_argument("--out", default="out")
    f.set_defaults(func=cmd_figure1)

    v = sub.add_parser("verify", help="run the acceptance criteria")
    v.add_argument("--out", default="out")
    v.add_argument("--mutate", choices=sorted(acceptance.MUTATIONS),
                   help="tamper with one oracle constant (the run must fail)")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bn-growth", help="growth of the backward Fourier coefficients")
    b.add_argument("--K", type=float, default=1.0)
    b.add_argument("--Kp", type=float, default=1.0)
    b.add_argument("--nu", type=float, default=1.0)
    b.add_argument("--T", type=float, default=1.0)
    b.add_argument("--N", type=int, default=128)
    b.add_argument("--out", default="out")
    b.set_defaults(func=cmd_bn_growth)

    c = sub.add_parser("colehopf-check", help="unnudged viscous Burgers forward/backward round trip")
    c.add_argument("--nu", type=float, default=0.05)
    c.add_argument("--T", type=float, default=0.5)
    c.add_argument("--amplitude", type=float, default=0.2)
    c.add_argument("--n-modes", type=int, default=32)
    c.add_argument("--cap", type=float, default=300.0)
    c.add_argument("--grid-n", type=int, default=513)
    c.add_argument("--out")
    c.set_defaults(func=cmd_colehopf_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BfnError, ConfigError, ValueError, OSError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
