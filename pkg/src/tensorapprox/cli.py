"""Command-line entry point for the benchmark harness."""

from __future__ import annotations

import argparse
import logging
import sys

from .amm import StopRule
from .bench import ALGORITHMS, BenchConfig, best222_core_rank, generate, rank222_experiment, run_bench
from .errors import ConfigError, DimensionError
from .io import load
from .newton import NewtonStop

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _seeds(text):
    # "0-9" or "0,3,7"
    if "-" in text and "," not in text:
        lo, hi = text.split("-", 1)
        try:
            return list(range(int(lo), int(hi) + 1))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed range {text!r}")
    return _int_list(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tensorapprox-bench",
        description="Run low-rank tensor approximation algorithms and write a CSV report.",
    )
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", metavar="PATH", help="tensor file (TNSR text or binary)")
    src.add_argument("--generate", metavar="SPEC",
                     help="synthetic tensor, e.g. gaussian:8x8x8:seed=0 or "
                          "lowrank:6x6x6:ranks=2,2,2:noise=0.01:seed=1")
    p.add_argument("--algos", default="amm,mamm,2ammv,hybrid",
                   help="comma-separated list from: " + ", ".join(ALGORITHMS))
    p.add_argument("--ranks", type=_int_list, help="r1,r2,...,rd")
    p.add_argument("--seeds", type=_seeds, default=list(range(10)), help="list like 0,1,2 or range 0-9")
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--fit-tol", type=float, default=1e-4)
    p.add_argument("--newton-tol", type=float, default=4.53999e-5)
    p.add_argument("--out", metavar="PATH", help="CSV output (stdout if omitted)")
    p.add_argument("--trace-dir", metavar="PATH", help="write per-run objective traces here")
    p.add_argument("--rank222", type=int, metavar="N",
                   help="run the 2x2x2 rank experiment with N samples instead of a benchmark")
    p.add_argument("--core-rank", action="store_true",
                   help="report the tensor rank of the best (2,2,2) core of the input")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.rank222 is not None:
            for seed in args.seeds or [None]:
                p, se = rank222_experiment(args.rank222, seed)
                print(f"seed {seed}: rank<=2 fraction {p:.4f} +- {se:.4f} (n={args.rank222})")
            return EXIT_OK
        if args.input is None and args.generate is None:
            raise ConfigError("one of --input or --generate is required")
        stop = StopRule(max_iters=args.max_iters, fit_tol=args.fit_tol)
        nstop = NewtonStop(max_iters=args.max_iters, change_tol=args.newton_tol)
        if args.core_rank:
            T = load(args.input) if args.input else generate(args.generate)
            core, rank = best222_core_rank(T, nstop)
            print(f"core rank {rank}")
            return EXIT_OK
        if not args.ranks:
            raise ConfigError("--ranks is required")
        config = BenchConfig(
            algorithms=[a.strip() for a in args.algos.split(",") if a.strip()],
            ranks=args.ranks, seeds=args.seeds, input_path=args.input, generator=args.generate,
            stop=stop, newton_stop=nstop, out=args.out, trace_dir=args.trace_dir,
        )
        records = run_bench(config)
    except (ConfigError, DimensionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.out:
        import csv

        w = csv.writer(sys.stdout)
        w.writerow(("algorithm", "seed", "iters", "seconds", "hs_norm", "residual", "stop_reason"))
        for r in records:
            w.writerow(r.row())
    cells = [r for r in records if r.seed != "mean"]
    if cells and all(r.stop_reason.startswith("failed") for r in cells):
        print("error: every run failed", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
