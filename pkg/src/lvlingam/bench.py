"""Seeded benchmark protocols producing long-form result records."""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping, TextIO

import numpy as np

from . import catalog
from .certify import dce_known, dce_unknown, tce_known, tce_unknown
from .graph import validate
from .grica import CumulantMatch, EstimatorConfig, LogCosh, SmoothL1, estimate, frobenius_loss, relative_error
from .mixing import build_mixing
from .sem import NoiseSpec, random_canonical_dag, sample_weights, simulate_linear, simulate_misspecified

HEADER = ("protocol", "grid_param", "grid_value", "trial", "metric", "value", "seconds")
WORKERS_ENV = "LVLINGAM_WORKERS"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BenchRecord:
    protocol: str
    grid_param: str
    grid_value: float
    trial: int
    metric: str
    value: float
    seconds: float

    def row(self, timing: bool = True) -> str:
        secs = f"{self.seconds:.6f}" if timing else ""
        return ",".join([self.protocol, self.grid_param, _fmt(self.grid_value), str(self.trial),
                         self.metric, _fmt(self.value), secs])


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


@dataclass(frozen=True)
class BenchProtocol:
    """One protocol run: a grid of values, a trial count per grid point and extra parameters."""

    protocol: str
    grid: tuple[float, ...]
    trials: int
    seed: int = 0
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}; choose from {sorted(PROTOCOLS)}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not self.grid:
            raise ConfigError("grid must not be empty")
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        object.__setattr__(self, "params", dict(self.params))
        unknown = set(self.params) - set(DEFAULTS[self.protocol])
        if unknown:
            raise ConfigError(f"unknown parameters for {self.protocol}: {sorted(unknown)}")

    def param(self, key: str):
        return self.params.get(key, DEFAULTS[self.protocol][key])

    @classmethod
    def from_mapping(cls, obj: Mapping[str, Any]) -> "BenchProtocol":
        obj = dict(obj)
        try:
            protocol = obj.pop("protocol")
        except KeyError:
            raise ConfigError("config needs a 'protocol' key") from None
        if protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {protocol!r}; choose from {sorted(PROTOCOLS)}")
        grid = obj.pop("grid", DEFAULT_GRIDS[protocol])
        trials = obj.pop("trials", 10)
        seed = obj.pop("seed", 0)
        return cls(protocol, tuple(grid), trials, seed, obj)

    @classmethod
    def load(cls, path: str | Path) -> "BenchProtocol":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            try:
                obj = tomllib.loads(text)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"invalid TOML: {exc}") from None
        else:
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise ConfigError("config must be a table/object")
        return cls.from_mapping(obj)


def trial_rng(seed: int, grid_index: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, grid_index, trial]))


def _noise(family: str, scales=None) -> NoiseSpec:
    return {"laplace": NoiseSpec.laplace, "exponential": NoiseSpec.exponential,
            "uniform": NoiseSpec.uniform}[family](scales=scales)


def _estimator(params) -> EstimatorConfig:
    contrast = {"cumulant": CumulantMatch(), "smoothl1": SmoothL1(), "logcosh": LogCosh()}[params("contrast")]
    return EstimatorConfig(contrast=contrast, restarts=params("restarts"))


def _target(dag, params):
    u, v = params("target")
    return dag.node(u), dag.node(v)


# Each runner takes (protocol, grid value, rng) and returns [(metric, value)].

def identifiability_instance(p: int, observed_fraction: float, prob: float, rng):
    """Random canonical graph with at least one observed edge, and one such edge ``(j, i)``."""
    p_o = max(2, round(p * observed_fraction))
    while True:
        dag = random_canonical_dag(p_o, p - p_o, prob, rng)
        edges = sorted((u, v) for u, v in dag.edges if dag.is_observed(u))
        if edges:
            break
    j, i = edges[rng.integers(len(edges))]
    return dag, j, i


def _identifiability(bp: BenchProtocol, prob: float, rng) -> list[tuple[str, float]]:
    dag, j, i = identifiability_instance(bp.param("p"), bp.param("observed_fraction"), prob, rng)
    return [("tce_known", float(tce_known(dag, j, i).identifiable)),
            ("dce_known", float(dce_known(dag, j, i).identifiable)),
            ("tce_unknown", float(tce_unknown(dag, j, i).identifiable)),
            ("dce_unknown", float(dce_unknown(dag, j, i).identifiable))]


def _runtime(bp: BenchProtocol, size: float, rng) -> list[tuple[str, float]]:
    p = int(size)
    p_o = max(2, round(p * bp.param("observed_fraction")))
    dag = random_canonical_dag(p_o, p - p_o, bp.param("edge_prob"), rng)
    edges = sorted((u, v) for u, v in dag.edges if dag.is_observed(u))
    j, i = edges[rng.integers(len(edges))] if edges else (0, 1)
    fresh = type(dag)(dag.observed, dag.latent, dag.edges)
    start = time.perf_counter()
    tce_known(fresh, j, i)
    return [("certify_seconds", time.perf_counter() - start)]


def _error_vs_samples(bp: BenchProtocol, n: float, rng) -> list[tuple[str, float]]:
    dag = validate(catalog.get(bp.param("graph")))
    model = sample_weights(dag, rng)
    data = simulate_linear(model, _noise(bp.param("noise")), int(n), rng)
    rep = estimate(dag, data, _estimator(bp.param))
    e = _target(dag, bp.param)
    return [("relative_error", relative_error(rep.model.weights[e], model.weights[e]))]


def _error_vs_noise_scale(bp: BenchProtocol, ratio: float, rng) -> list[tuple[str, float]]:
    dag = validate(catalog.get(bp.param("graph")))
    model = sample_weights(dag, rng)
    scales = {dag.node(v): ratio for v in bp.param("scaled")}
    scales.update({dag.node(v): 1.0 / ratio for v in bp.param("inverse_scaled")})
    data = simulate_linear(model, _noise(bp.param("noise"), scales), bp.param("n"), rng)
    rep = estimate(dag, data, _estimator(bp.param))
    e = _target(dag, bp.param)
    return [("relative_error", relative_error(rep.model.weights[e], model.weights[e]))]


def _random_graph_frobenius(bp: BenchProtocol, n: float, rng) -> list[tuple[str, float]]:
    dag = random_canonical_dag(bp.param("p_o"), bp.param("p_l"), bp.param("edge_prob"), rng)
    model = sample_weights(dag, rng)
    data = simulate_linear(model, _noise(bp.param("noise")), int(n), rng)
    rep = estimate(dag, data, _estimator(bp.param))
    return [("frobenius_loss", frobenius_loss(rep.bprime, build_mixing(model)))]


def _misspecification(bp: BenchProtocol, n: float, rng) -> list[tuple[str, float]]:
    dag = validate(catalog.get(bp.param("graph")))
    low, high = bp.param("weight_range")
    model = sample_weights(dag, rng, low=low, high=high)
    e = _target(dag, bp.param)
    data = simulate_misspecified(model, _noise(bp.param("noise")), e, int(n), rng)
    rep = estimate(dag, data, _estimator(bp.param))
    return [("relative_error", relative_error(rep.model.weights[e], model.weights[e]))]


_EST = {"noise": "laplace", "contrast": "cumulant", "restarts": 5}

PROTOCOLS: dict[str, tuple[str, Callable]] = {
    "IdentifiabilityCurve": ("edge_prob", _identifiability),
    "RuntimeCurve": ("p", _runtime),
    "ErrorVsSamples": ("n", _error_vs_samples),
    "ErrorVsNoiseScale": ("ratio", _error_vs_noise_scale),
    "RandomGraphFrobenius": ("n", _random_graph_frobenius),
    "Misspecification": ("n", _misspecification),
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "IdentifiabilityCurve": {"p": 10, "observed_fraction": 0.5},
    "RuntimeCurve": {"observed_fraction": 0.5, "edge_prob": 0.5},
    "ErrorVsSamples": {"graph": "g1", "target": ["T", "Y"], **_EST},
    "ErrorVsNoiseScale": {"graph": "g1", "target": ["T", "Y"], "scaled": ["W"],
                          "inverse_scaled": [], "n": 10000, **_EST},
    "RandomGraphFrobenius": {"p_o": 5, "p_l": 1, "edge_prob": 0.5, **_EST},
    "Misspecification": {"graph": "g1", "target": ["T", "Y"], "weight_range": [0.3, 0.6], **_EST},
}

DEFAULT_GRIDS: dict[str, list[float]] = {
    "IdentifiabilityCurve": [round(0.1 * k, 1) for k in range(1, 10)],
    "RuntimeCurve": [125, 250, 500, 1000],
    "ErrorVsSamples": [500, 1000, 5000, 10000, 50000],
    "ErrorVsNoiseScale": [0.25, 0.5, 1.0, 2.0, 4.0],
    "RandomGraphFrobenius": [1000, 5000, 10000, 50000],
    "Misspecification": [1000, 5000, 10000, 50000],
}


def _run_task(args) -> list[BenchRecord]:
    bp, gi, trial = args
    param, runner = PROTOCOLS[bp.protocol]
    value = bp.grid[gi]
    start = time.perf_counter()
    out = runner(bp, value, trial_rng(bp.seed, gi, trial))
    secs = time.perf_counter() - start
    return [BenchRecord(bp.protocol, param, value, trial, m, float(v), secs) for m, v in out]


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def run(bp: BenchProtocol, workers: int | None = None) -> Iterator[BenchRecord]:
    """Yield records in (grid point, trial) order; results never depend on ``workers``."""
    workers = default_workers() if workers is None else max(1, workers)
    tasks = [(bp, gi, t) for gi in range(len(bp.grid)) for t in range(bp.trials)]
    if workers == 1:
        for task in tasks:
            yield from _run_task(task)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for recs in pool.map(_run_task, tasks):
            yield from recs


def write(records, out: TextIO, timing: bool = True) -> int:
    """Stream records as CSV, flushing each row; returns the row count."""
    out.write(",".join(HEADER) + "\n")
    count = 0
    for rec in records:
        out.write(rec.row(timing) + "\n")
        out.flush()
        count += 1
    return count


def summarize(records) -> dict[tuple[str, float], float]:
    """Mean value per (metric, grid value)."""
    acc: dict[tuple[str, float], list[float]] = {}
    for r in records:
        acc.setdefault((r.metric, r.grid_value), []).append(r.value)
    return {k: float(np.mean(v)) for k, v in acc.items()}
