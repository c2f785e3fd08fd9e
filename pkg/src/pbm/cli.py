"""Command-line front end.

Subcommands: dme (mean-estimation benchmark), sgd (federated training
simulation), rdp-curve (privacy curves to CSV), kashin-check (frame
certification), select-params (budget to (theta, m)).

Exit codes: 0 success, 2 bad usage or config, 3 infeasible parameters,
4 numerical failure. Outputs are byte-deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import accounting, kashin
from .accounting import InfeasibleBudget
from .benchmark import run_tradeoff, write_records_csv, write_series_json
from .config import ConfigError, load_dme_config, load_sgd_config
from .kashin import ConvergenceError
from .sgd import run as run_sgd
from .sgd import write_trajectory_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


def _default_threads() -> int:
    env = os.environ.get("PBM_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _cmd_dme(args) -> int:
    cfg = load_dme_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.clipping:
        cfg = replace(cfg, clipping=True)
    if args.all_k:
        cfg = replace(cfg, k_mode="all")
    cfg = replace(cfg, threads=args.threads)
    records = run_tradeoff(cfg)
    write_records_csv(records, args.out)
    if args.json:
        write_series_json(records, args.json)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _cmd_sgd(args) -> int:
    cfg = load_sgd_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    result = run_sgd(cfg)
    write_trajectory_csv(result, args.out)
    final_eps = result.ledger.epsilons
    idx = int(np.argmin(np.abs(result.alphas - 2.0)))
    print(
        f"wrote {len(result.rounds)} rounds to {args.out}; final loss "
        f"{result.losses[-1]:.6g}, ledger eps({result.alphas[idx]:g}) = "
        f"{final_eps[idx]:.6g}"
    )
    return EXIT_OK


def _parse_alphas(raw: str | None) -> tuple[float, ...]:
    if raw is None:
        return accounting.DEFAULT_ALPHAS
    vals = tuple(float(tok) for tok in raw.split(",") if tok.strip())
    if not vals:
        raise ValueError("empty alpha list")
    return vals


def _cmd_rdp_curve(args) -> int:
    alphas = _parse_alphas(args.alphas)
    if args.mode == "exact":
        k_set = accounting.ALL_K if args.k_mode == "all" else None
        curve = accounting.pbm_exact_curve(args.n, args.m, args.theta, alphas, k_set)
    elif args.mode == "bound":
        curve = accounting.pbm_asymptotic_curve(
            args.n, args.m, args.theta, alphas, args.c0
        )
    else:
        if args.sigma is None:
            raise ValueError("--sigma is required for gaussian mode")
        curve = accounting.gaussian_curve(args.c, args.n, args.sigma, alphas)
    accounting.write_curve_csv(curve, args.out)
    print(f"wrote {len(curve.alphas)} orders ({curve.kind}) to {args.out}")
    return EXIT_OK


def _cmd_kashin_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    frame = kashin.build_frame(
        args.d, args.redundancy, rng, iters=args.iters, probes=args.probes
    )
    gram = frame.u @ frame.u.T
    parseval = float(np.abs(gram - np.eye(frame.d)).max())
    probe = rng.standard_normal((frame.d, 100))
    y = kashin.represent_batch(probe, frame, iters=args.iters)
    err = np.linalg.norm(frame.u @ y - probe, axis=0) / np.linalg.norm(probe, axis=0)
    print(f"d={frame.d} D={frame.big_d} level_k={frame.level_k:.6g}")
    print(f"parseval_residual={parseval:.3e} max_roundtrip_rel={err.max():.3e}")
    if args.save:
        kashin.save_frame(frame, args.save)
        print(f"saved frame to {args.save}")
    return EXIT_OK


def _cmd_select_params(args) -> int:
    rdp_mode = args.eps_budget is not None
    approx_mode = args.eps_dp is not None
    if rdp_mode == approx_mode:
        raise ValueError("pass exactly one of --eps-budget/--alpha or --eps-dp/--delta")
    if rdp_mode:
        theta, m = accounting.select_params(
            args.n, args.d, args.alpha, args.eps_budget, args.c0
        )
        bound = args.d * accounting.pbm_asymptotic_rdp(
            args.n, m, theta, args.alpha, args.c0
        )
        print(f"theta={theta!r}")
        print(f"m={m}")
        print(f"bound_total={bound!r}")
    else:
        theta, m = accounting.select_params_approx_dp(
            args.n, args.d, args.eps_dp, args.delta
        )
        print(f"theta={theta!r}")
        print(f"m={m}")
        if args.verify:
            achieved = accounting.achieved_approx_dp(
                args.n, args.d, theta, m, args.delta
            )
            print(f"achieved_eps_dp={achieved!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbm",
        description="Distributed mean estimation with binomial noise: "
        "benchmarks, training simulation, and privacy accounting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dme", help="run the mean-estimation benchmark sweep")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--json", help="also write a plotting JSON series file")
    p.add_argument("--clipping", action="store_true", help="add reduced-modulus rows")
    p.add_argument("--all-k", action="store_true", help="exhaustive accountant search")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument(
        "--threads", type=int, default=_default_threads(),
        help="parameter-point parallelism (default: PBM_THREADS or cores)",
    )
    p.set_defaults(func=_cmd_dme)

    p = sub.add_parser("sgd", help="run the federated training simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="trajectory CSV path")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=_cmd_sgd)

    p = sub.add_parser("rdp-curve", help="write a privacy curve CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--theta", type=float, default=0.25)
    p.add_argument("--mode", choices=("exact", "bound", "gaussian"), default="exact")
    p.add_argument("--alphas", help="comma-separated orders (default grid)")
    p.add_argument("--k-mode", choices=("reduced", "all"), default="reduced")
    p.add_argument("--c", type=float, default=1.0, help="gaussian sensitivity")
    p.add_argument("--sigma", type=float, help="gaussian noise scale")
    p.add_argument("--c0", type=float, default=accounting.DEFAULT_C0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rdp_curve)

    p = sub.add_parser("kashin-check", help="build and certify a spreading frame")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--redundancy", type=float, default=kashin.DEFAULT_REDUNDANCY)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probes", type=int, default=kashin.DEFAULT_PROBES)
    p.add_argument("--iters", type=int, default=kashin.DEFAULT_ITERS)
    p.add_argument("--save", help="serialize the frame to this .npz path")
    p.set_defaults(func=_cmd_kashin_check)

    p = sub.add_parser("select-params", help="pick (theta, m) for a privacy budget")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--eps-budget", type=float, help="Renyi budget at --alpha")
    p.add_argument("--eps-dp", type=float, help="approximate-DP epsilon target")
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--c0", type=float, default=accounting.DEFAULT_C0)
    p.add_argument(
        "--verify", action="store_true",
        help="report the epsilon the exact accountant certifies (approx mode)",
    )
    p.set_defaults(func=_cmd_select_params)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleBudget as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
