"""Run benchmark protocol configs and print per-grid-point summaries.

    python scripts/run_experiments.py                      # every config in scripts/configs
    python scripts/run_experiments.py configs/runtime.toml --workers 4
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lvlingam import bench

HERE = Path(__file__).resolve().parent


@dataclass
class ExperimentConfig:
    configs: list[Path] = field(default_factory=lambda: sorted((HERE / "configs").glob("*.toml")))
    out_dir: Path = HERE.parent / "results"
    workers: int = 1
    timing: bool = True


def summarize(records: list[bench.BenchRecord]) -> list[str]:
    groups: dict[tuple[str, float], list[float]] = {}
    for r in records:
        groups.setdefault((r.metric, r.grid_value), []).append(r.value)
    lines = [f"{'metric':<18}{'grid':>10}{'mean':>12}{'median':>12}{'n':>6}"]
    for (metric, g), vals in sorted(groups.items()):
        lines.append(f"{metric:<18}{g:>10g}{np.mean(vals):>12.4f}{np.median(vals):>12.4f}{len(vals):>6}")
    return lines


def run(cfg: ExperimentConfig) -> None:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    for path in cfg.configs:
        bp = bench.BenchProtocol.load(path)
        out = cfg.out_dir / f"{Path(path).stem}.csv"
        records = []
        with out.open("w") as fh:
            bench.write(_tee(bench.run(bp, cfg.workers), records), fh, timing=cfg.timing)
        print(f"== {Path(path).name} -> {out}")
        print("\n".join(summarize(records)))


def _tee(it, sink):
    for rec in it:
        sink.append(rec)
        yield rec


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--out-dir", type=Path)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--no-timing", action="store_true")
    args = ap.parse_args()
    cfg = ExperimentConfig(workers=args.workers, timing=not args.no_timing)
    if args.configs:
        cfg.configs = args.configs
    if args.out_dir:
        cfg.out_dir = args.out_dir
    run(cfg)


if __name__ == "__main__":
    main()
