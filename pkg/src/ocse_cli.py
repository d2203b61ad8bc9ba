#!/usr/bin/env python3
"""
Command line front door: generate networks, simulate series, infer and
compare networks, run sweeps and print oracle tables.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
from dotenv import dotenv_values, load_dotenv

from covariance import estimate_covariances
from inference import (
    InferenceMethod,
    SignificanceConfig,
    infer_network,
    write_inferred_network,
)
from network_model import (
    binary_tree,
    chain_network,
    error_ratios,
    generate_er_signed,
    loop_network,
    random_tree,
    read_edge_list,
    tree_network,
    write_edge_list,
)
from ocse_errors import InvalidParameterError, OcseError
from oracles import oracle_table
from process import (
    GaussianProcessSpec,
    embed_markov_order,
    read_time_series,
    simulate_gaussian,
    write_time_series,
)
from sweep import SweepSpec, run_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

DEFAULT_METHODS = "ocse,te,granger"


class UsageError(Exception):
    """Bad command line or config file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _method_list(text: str) -> List[InferenceMethod]:
    return [InferenceMethod(part.strip()) for part in text.split(",") if part.strip()]


def _default_jobs() -> int:
    raw = os.getenv("OCSE_JOBS", "1")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"OCSE_JOBS must be an integer, got {raw!r}")


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="Seed for all randomness")
    sub.add_argument("--out", help="Output path")
    sub.add_argument("--config", help="key=value file whose entries act as flag defaults")
    sub.add_argument("--log-level", help="Logging level (default: OCSE_LOG_LEVEL or INFO)")
    sub.add_argument(
        "--jobs", type=int, default=_default_jobs(), help="Parallel worker bound (default: OCSE_JOBS or 1)"
    )


def _add_significance(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--r", type=int, default=100, help="Number of permutations")
    sub.add_argument("--theta", type=float, default=0.99, help="Significance level")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ocse", description="Causal network inference with optimal causation entropy")
    subparsers = parser.add_subparsers(dest="command")

    generate = subparsers.add_parser("generate", help="Generate a network edge list")
    _add_common(generate)
    generate.add_argument("--topology", choices=["er", "chain", "loop", "tree"], default="er")
    generate.add_argument("--n", type=int, help="Number of nodes")
    generate.add_argument("--p", type=float, help="ER link probability")
    generate.add_argument("--degree", type=float, help="ER mean degree n p")
    generate.add_argument("--rho", type=float, default=0.8, help="ER target spectral radius")
    generate.add_argument("--w", type=float, default=0.5, help="Loop weight")
    generate.add_argument("--depth", type=int, help="Binary tree depth")

    simulate = subparsers.add_parser("simulate", help="Simulate the Gaussian process on a network")
    _add_common(simulate)
    simulate.add_argument("--network", help="Edge list file")
    simulate.add_argument("--T", type=int, help="Number of samples")
    simulate.add_argument("--noise-std", type=float, default=1.0)

    infer = subparsers.add_parser("infer", help="Infer a network from a time series")
    _add_common(infer)
    _add_significance(infer)
    infer.add_argument("--input", help="Time series CSV")
    infer.add_argument("--method", type=InferenceMethod, default=InferenceMethod.OCSE)
    infer.add_argument("--truth", help="Ground-truth edge list for error ratios")
    infer.add_argument("--embed-order", type=int, default=1, help="Delay-embed the series first")
    infer.add_argument("--covariance-out", help="Directory for the estimated Phi(0), Phi(1)")

    compare = subparsers.add_parser("compare", help="Compare methods on one series")
    _add_common(compare)
    _add_significance(compare)
    compare.add_argument("--input", help="Time series CSV")
    compare.add_argument("--truth", help="Ground-truth edge list")
    compare.add_argument("--methods", type=_method_list, default=_method_list(DEFAULT_METHODS))

    sweep = subparsers.add_parser("sweep", help="Run an error-ratio parameter sweep")
    _add_common(sweep)
    sweep.add_argument("--n", type=_int_list)
    sweep.add_argument("--p", type=_float_list)
    sweep.add_argument("--degree", type=_float_list)
    sweep.add_argument("--rho", type=_float_list, default=[0.8])
    sweep.add_argument("--T", type=_int_list)
    sweep.add_argument("--methods", type=_method_list, default=[InferenceMethod.OCSE])
    sweep.add_argument("--r", type=_int_list, default=[100])
    sweep.add_argument("--theta", type=_float_list, default=[0.99])
    sweep.add_argument("--realizations", type=int, default=1)
    sweep.add_argument("--noise-std", type=float, default=1.0)

    oracle = subparsers.add_parser("oracle", help="Closed-form vs pipeline causation entropies")
    _add_common(oracle)
    oracle.add_argument("--topology", choices=["chain", "loop", "tree"], default="chain")
    oracle.add_argument("--n", type=int)
    oracle.add_argument("--w", type=float, default=0.5)
    oracle.add_argument("--depth", type=int)

    parser.subcommands = subparsers.choices
    return parser


def _config_defaults(sub: argparse.ArgumentParser, path: str) -> Dict:
    """Convert a key=value config file into typed defaults for one subparser."""
    if not Path(path).is_file():
        raise UsageError(f"Config file not found: {path}")
    actions = {action.dest: action for action in sub._actions if action.dest != "help"}
    defaults = {}
    for key, raw in dotenv_values(path).items():
        dest = key.strip().lstrip("-").replace("-", "_")
        if dest not in actions or dest == "config":
            raise UsageError(f"{path}: unknown key {key!r}")
        action = actions[dest]
        if raw is None:
            raise UsageError(f"{path}: key {key!r} has no value")
        try:
            value = action.type(raw) if action.type else raw
        except ValueError as e:
            raise UsageError(f"{path}: bad value for {key!r}: {e}") from e
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"{path}: {key!r} must be one of {list(action.choices)}")
        defaults[dest] = value
    return defaults


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse argv, letting a --config file fill in flags that were not given."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required: " + ", ".join(parser.subcommands))
    if args.config:
        sub = parser.subcommands[args.command]
        sub.set_defaults(**_config_defaults(sub, args.config))
        args = parser.parse_args(argv)
    return args


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(args, name) is None]
    if missing:
        raise UsageError(f"{args.command}: missing required {', '.join(missing)}")


def _significance(args: argparse.Namespace) -> SignificanceConfig:
    try:
        return SignificanceConfig(r=args.r, theta=args.theta, seed=args.seed)
    except ValueError as e:
        raise UsageError(f"Bad significance settings: {e}") from e


def _print_ratios(label: str, ratios) -> None:
    def fmt(value):
        return "undefined" if value is None else f"{value:.6g}"

    print(f"{label}: eps- = {fmt(ratios.false_negative)}, eps+ = {fmt(ratios.false_positive)}")


def cmd_generate(args: argparse.Namespace) -> int:
    _require(args, "out")
    if args.topology == "tree":
        if args.depth is not None:
            spec = binary_tree(args.depth)
        else:
            _require(args, "n")
            spec = random_tree(args.n, args.seed)
        net = tree_network(spec)
    else:
        _require(args, "n")
        if args.topology == "chain":
            net = chain_network(args.n)
        elif args.topology == "loop":
            net = loop_network(args.n, args.w)
        else:
            if (args.p is None) == (args.degree is None):
                raise UsageError("generate --topology er needs exactly one of --p and --degree")
            p = args.p if args.p is not None else args.degree / args.n
            net = generate_er_signed(args.n, p, args.rho, args.seed)
    write_edge_list(net, args.out)
    print(f"Wrote {args.topology} network with {net.n} nodes and {net.link_count} links to {args.out}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    _require(args, "network", "T", "out")
    net = read_edge_list(args.network)
    ts = simulate_gaussian(GaussianProcessSpec(net, args.noise_std, seed=args.seed), args.T)
    write_time_series(ts, args.out)
    print(f"Wrote {ts.T} samples of {ts.n} nodes to {args.out}")
    return EXIT_OK


def _write_covariances(ts, directory: str) -> None:
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    cov = estimate_covariances(ts)
    for name, matrix in (("phi0", cov.phi0), ("phi1", cov.phi1)):
        frame = pd.DataFrame(matrix, index=ts.labels, columns=ts.labels)
        frame.to_csv(out_dir / f"{name}.csv", float_format="%.17g")
    logger.info(f"Wrote estimated covariances to {out_dir}")


def cmd_infer(args: argparse.Namespace) -> int:
    _require(args, "input")
    cfg = _significance(args)
    ts = read_time_series(args.input)
    if args.embed_order != 1:
        ts = embed_markov_order(ts, args.embed_order)
    if args.covariance_out:
        _write_covariances(ts, args.covariance_out)

    result = infer_network(ts, args.method, cfg, n_jobs=args.jobs)
    if args.out:
        write_inferred_network(result, args.out)
    else:
        print(result.model_dump_json(indent=2))
    print(f"{result.method.value}: {len(result.edges)} links inferred on {result.n} nodes")
    if result.degenerate_nodes:
        print(f"Degenerate nodes: {result.degenerate_nodes}")

    if args.truth:
        truth = read_edge_list(args.truth)
        if truth.n != result.n:
            raise InvalidParameterError(f"Truth has {truth.n} nodes, inferred network has {result.n}")
        _print_ratios(result.method.value, error_ratios(truth, result.to_network()))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    _require(args, "input", "truth")
    cfg = _significance(args)
    ts = read_time_series(args.input)
    truth = read_edge_list(args.truth)
    if truth.n != ts.n:
        raise InvalidParameterError(f"Truth has {truth.n} nodes, series has {ts.n}")

    rows = []
    for method in args.methods:
        started = time.perf_counter()
        result = infer_network(ts, method, cfg, n_jobs=args.jobs, keep_traces=False)
        runtime = time.perf_counter() - started
        ratios = error_ratios(truth, result.to_network())
        rows.append({
            "method": method.value,
            "eps_minus": ratios.false_negative,
            "eps_plus": ratios.false_positive,
            "links": len(result.edges),
            "degenerate_nodes": len(result.degenerate_nodes),
            "runtime": runtime,
        })
    table = pd.DataFrame(rows)
    print(table.to_string(index=False))
    if args.out:
        table.to_csv(args.out, index=False, float_format="%.12g")
        logger.info(f"Wrote comparison table to {args.out}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    _require(args, "n", "T", "out")
    try:
        spec = SweepSpec(
            n=args.n,
            p=args.p,
            degree=args.degree,
            rho=args.rho,
            T=args.T,
            method=args.methods,
            r=args.r,
            theta=args.theta,
            realizations=args.realizations,
            master_seed=args.seed,
            noise_std=args.noise_std,
            n_jobs=args.jobs,
        )
    except ValueError as e:
        raise UsageError(f"Bad sweep grid: {e}") from e
    result = run_sweep(spec)
    result.write_csv(args.out)
    print(f"Wrote {len(result.cells)} sweep cells to {args.out}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    table = oracle_table(args.topology, n=args.n, w=args.w, depth=args.depth, seed=args.seed)
    if args.out:
        table.to_csv(args.out, index=False, float_format="%.12g")
        print(f"Wrote {len(table)} oracle rows to {args.out} (max abs_diff {table['abs_diff'].max():.3g})")
    else:
        print(table.to_csv(index=False, float_format="%.12g"), end="")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "infer": cmd_infer,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    try:
        args = parse_arguments(argv)
        level = (args.log_level or os.getenv("OCSE_LOG_LEVEL", "INFO")).upper()
        if not isinstance(logging.getLevelName(level), int):
            raise UsageError(f"Unknown log level {level!r}")
        logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e} (see ocse_cli.py --help)", file=sys.stderr)
        return EXIT_USAGE
    except (OcseError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
