"""Cross-check the graphical certificates against the brute-force oracle.

Exhaustive over all canonical graphs of a given size (up to relabeling),
then over random graphs. Prints every disagreement with both witnesses.

    python scripts/oracle_sweep.py --max-po 4 --max-pl 2 --random 200
    python scripts/oracle_sweep.py --po 4 --pl 3 --kinds dce --random 0
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

import numpy as np

from lvlingam.certify import certify
from lvlingam.oracle import bruteforce_verdicts, enumerate_canonical_dags, in_scope_queries
from lvlingam.sem import random_canonical_dag


@dataclass
class SweepConfig:
    sizes: tuple[tuple[int, int], ...] = ((2, 1), (3, 1), (3, 2), (4, 1), (4, 2))
    random_graphs: int = 200
    max_p: int = 10
    draws: int = 5
    kinds: tuple[str, ...] = ("tce", "dce")
    seed: int = 0


def _check(dag, cfg: SweepConfig, seed: int) -> tuple[int, int]:
    qs = [q for q in in_scope_queries(dag) if q.kind.value in cfg.kinds]
    bad = 0
    for q, ov in zip(qs, bruteforce_verdicts(dag, qs, draws=cfg.draws, seed=seed)):
        cv = certify(dag, q)
        if cv.identifiable != ov.identifiable:
            bad += 1
            print(f"DISAGREE {dag!r} {q}: certify witness={cv.witness_dict(dag)} "
                  f"oracle witness={ov.witness_dict(dag)}")
    return len(qs), bad


def sweep(cfg: SweepConfig) -> int:
    total_bad = 0
    for p_o, p_l in cfg.sizes:
        start, graphs, queries, bad = time.perf_counter(), 0, 0, 0
        for dag in enumerate_canonical_dags(p_o, p_l):
            q, b = _check(dag, cfg, cfg.seed)
            graphs, queries, bad = graphs + 1, queries + q, bad + b
        total_bad += bad
        print(f"p_o={p_o} p_l={p_l}: {graphs} graphs, {queries} queries, {bad} disagreements "
              f"({time.perf_counter() - start:.1f}s)")
    rng = np.random.default_rng(cfg.seed)
    queries = bad = 0
    for _ in range(cfg.random_graphs):
        p = int(rng.integers(3, cfg.max_p + 1))
        p_o = int(rng.integers(2, p + 1))
        dag = random_canonical_dag(p_o, p - p_o, float(rng.uniform(0.2, 0.8)), rng)
        q, b = _check(dag, cfg, int(rng.integers(2**31)))
        queries, bad = queries + q, bad + b
    if cfg.random_graphs:
        print(f"random: {cfg.random_graphs} graphs, {queries} queries, {bad} disagreements")
    return total_bad + bad


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--max-po", type=int)
    ap.add_argument("--max-pl", type=int)
    ap.add_argument("--po", type=int)
    ap.add_argument("--pl", type=int)
    ap.add_argument("--random", type=int, default=SweepConfig.random_graphs)
    ap.add_argument("--draws", type=int, default=SweepConfig.draws)
    ap.add_argument("--kinds", nargs="+", choices=["tce", "dce"], default=["tce", "dce"])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = SweepConfig(random_graphs=args.random, draws=args.draws, kinds=tuple(args.kinds), seed=args.seed)
    if args.po is not None and args.pl is not None:
        cfg.sizes = ((args.po, args.pl),)
    elif args.max_po is not None or args.max_pl is not None:
        mo, ml = args.max_po or 4, args.max_pl or 2
        cfg.sizes = tuple((o, l) for o in range(1, mo + 1) for l in range(ml + 1) if not (l and o < 2))
    raise SystemExit(1 if sweep(cfg) else 0)


if __name__ == "__main__":
    main()
