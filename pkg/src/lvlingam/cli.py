"""Command-line entry point: ``lvlingam {certify,generate,simulate,estimate,bench}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import bench, oracle
from .certify import IdQuery, Kind, Setting, certify
from .graph import (CanonicalDag, GraphError, canonicalize, dag_from_json, dumps_graph, is_canonical,
                    model_from_json, model_to_json, validate)
from .grica import CumulantMatch, EstimatorConfig, LogCosh, SmoothL1, estimate
from .sem import (Dataset, DimensionMismatch, InvalidDimensions, NoiseSpec, random_canonical_dag,
                  sample_weights, simulate_linear, simulate_misspecified)

log = logging.getLogger("lvlingam")

EXIT_USAGE = 2
EXIT_ORACLE_CAP = 3


class UsageError(Exception):
    pass


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def load_canonical(obj: dict, extra_keys=()) -> CanonicalDag:
    dag = dag_from_json(obj, extra_keys=extra_keys)
    if is_canonical(dag):
        return validate(dag)
    cdag = canonicalize(dag)
    log.warning("input graph is not canonical; reduced it")
    for line in cdag.reduction_log:
        log.warning("  %s", line)
    return cdag


def _resolve(dag: CanonicalDag, ref: str) -> int:
    """Node by name, or by id in the input graph (mapped through any reduction)."""
    if dag.names is not None and ref in dag.names:
        return dag.names.index(ref)
    try:
        original = int(ref)
    except ValueError:
        raise UsageError(f"unknown node {ref!r}") from None
    if original not in dag.original_ids:
        raise UsageError(f"node {ref!r} does not survive canonicalization")
    return dag.original_ids.index(original)


def cmd_certify(args) -> int:
    dag = load_canonical(_read_json(args.graph), extra_keys=("weights",))
    kind, setting = Kind(args.kind), Setting(args.setting)
    if kind is Kind.MATRIX:
        query = IdQuery(kind, setting)
    else:
        if args.source is None or args.target is None:
            raise UsageError("--source and --target are required for tce/dce")
        query = IdQuery(kind, setting, _resolve(dag, args.source), _resolve(dag, args.target))
    verdict = certify(dag, query)
    out = verdict.to_json(dag)
    if args.oracle:
        try:
            ov = oracle.bruteforce_identifiable(dag, query, draws=args.draws, seed=args.seed, cap=args.cap)
        except oracle.GraphTooLargeForEnumeration as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ORACLE_CAP
        out["oracle"] = ov.to_json(dag)
        out["oracle_agrees"] = ov.identifiable == verdict.identifiable
    _emit(_dumps(out), args.output)
    return 0


def cmd_generate(args) -> int:
    dag = random_canonical_dag(args.po, args.pl, args.prob, args.seed)
    model = sample_weights(dag, args.seed + 1, low=args.low, high=args.high)
    _emit(dumps_graph(model_to_json(model)), args.output)
    return 0


def _noise_spec(args) -> NoiseSpec:
    scales = {}
    for item in args.scale or []:
        node, _, mult = item.partition("=")
        try:
            scales[int(node)] = float(mult)
        except ValueError:
            raise UsageError(f"--scale expects NODE=MULT, got {item!r}") from None
    family = {"laplace": NoiseSpec.laplace, "exponential": NoiseSpec.exponential,
              "uniform": NoiseSpec.uniform}[args.noise]
    return family(scales=scales)


def cmd_simulate(args) -> int:
    model = model_from_json(_read_json(args.model))
    noise = _noise_spec(args)
    if args.tanh_target:
        try:
            u, v = (int(x) for x in args.tanh_target.split(","))
        except ValueError:
            raise UsageError("--tanh-target expects FROM,TO") from None
        data = simulate_misspecified(model, noise, (u, v), args.n, args.seed)
    else:
        data = simulate_linear(model, noise, args.n, args.seed)
    _emit(data.to_csv(), args.output)
    return 0


def cmd_estimate(args) -> int:
    dag = load_canonical(_read_json(args.graph), extra_keys=("weights",))
    data = Dataset.from_csv(args.data)
    contrast = {"cumulant": CumulantMatch(), "smoothl1": SmoothL1(args.beta),
                "logcosh": LogCosh(scale=args.logcosh_scale)}[args.contrast]
    warm = None
    if args.warm:
        warm = model_from_json(_read_json(args.warm)).weights
    cfg = EstimatorConfig(contrast=contrast, optimizer=args.optimizer, step_size=args.step_size,
                          max_iter=args.max_iter, tol=args.tol, restarts=args.restarts,
                          init_scale=args.init_scale, warm=warm, standardize=args.standardize,
                          seed=args.seed)
    report = estimate(dag, data, cfg)
    _emit(_dumps(report.to_json()), args.output)
    return 0


def cmd_bench(args) -> int:
    bp = bench.BenchProtocol.load(args.config)
    workers = args.workers if args.workers is not None else bench.default_workers()
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w")
    try:
        bench.write(bench.run(bp, workers), out, timing=not args.no_timing)
    except KeyboardInterrupt:
        print("interrupted; partial results written", file=sys.stderr)
        return 130
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lvlingam", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="certify identifiability of an effect")
    p.add_argument("graph", help="graph JSON file")
    p.add_argument("--kind", choices=[k.value for k in Kind], default="tce")
    p.add_argument("--source", help="source node (name or id)")
    p.add_argument("--target", help="target node (name or id)")
    p.add_argument("--setting", choices=[s.value for s in Setting], default="known")
    p.add_argument("--oracle", action="store_true", help="cross-check by brute force")
    p.add_argument("--draws", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=oracle.DEFAULT_CAP)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("generate", help="random canonical model")
    p.add_argument("--po", type=int, required=True)
    p.add_argument("--pl", type=int, required=True)
    p.add_argument("--prob", type=float, required=True)
    p.add_argument("--low", type=float, default=0.5)
    p.add_argument("--high", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="sample observed data from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--noise", choices=["laplace", "exponential", "uniform"], default="laplace")
    p.add_argument("--scale", action="append", metavar="NODE=MULT")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tanh-target", metavar="FROM,TO", help="use the tanh mechanism")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate edge weights from data")
    p.add_argument("--graph", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--contrast", choices=["cumulant", "smoothl1", "logcosh"], default="cumulant")
    p.add_argument("--beta", type=float, default=10.0)
    p.add_argument("--logcosh-scale", type=float, default=1.0)
    p.add_argument("--optimizer", choices=["lbfgs", "adam"], default="lbfgs")
    p.add_argument("--step-size", type=float, default=0.01)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--init-scale", type=float, default=0.1)
    p.add_argument("--warm", help="model JSON with starting weights")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="run a benchmark protocol")
    p.add_argument("config", help="protocol config (.json or .toml)")
    p.add_argument("--workers", type=int)
    p.add_argument("--no-timing", action="store_true", help="leave the seconds column empty")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, GraphError, DimensionMismatch, InvalidDimensions, bench.ConfigError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
