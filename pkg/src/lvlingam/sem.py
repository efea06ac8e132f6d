"""Random canonical graphs, weight sampling and synthetic data."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .graph import CanonicalDag, Edge, GraphError, LvDag, WeightedModel, validate
from .mixing import build_mixing

SeedLike = int | np.random.Generator | np.random.SeedSequence | None


class InvalidDimensions(ValueError):
    pass


class UnknownEdge(GraphError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"edge {edge} is not an observed-to-observed edge of the model")


class DimensionMismatch(ValueError):
    pass


FAMILIES = ("laplace", "exponential", "uniform")


@dataclass(frozen=True)
class NoiseSpec:
    """Exogenous noise law shared by all nodes, with optional per-node scale multipliers.

    ``params`` holds ``(loc, scale)`` for Laplace, ``(scale,)`` for
    Exponential and ``(low, high)`` for Uniform.
    """

    family: str = "laplace"
    params: tuple[float, ...] = (0.0, 1.0)
    scales: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}; choose from {FAMILIES}")
        expected = {"laplace": 2, "exponential": 1, "uniform": 2}[self.family]
        params = tuple(float(x) for x in self.params)
        if len(params) != expected:
            raise ValueError(f"{self.family} noise takes {expected} parameter(s)")
        if self.family == "laplace" and params[1] <= 0:
            raise ValueError("Laplace scale must be positive")
        if self.family == "exponential" and params[0] <= 0:
            raise ValueError("Exponential scale must be positive")
        if self.family == "uniform" and params[1] <= params[0]:
            raise ValueError("Uniform needs low < high")
        scales = {int(k): float(v) for k, v in dict(self.scales).items()}
        if any(v <= 0 for v in scales.values()):
            raise ValueError("scale multipliers must be positive")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "scales", scales)

    @classmethod
    def laplace(cls, loc: float = 0.0, scale: float = 1.0, scales=None) -> "NoiseSpec":
        return cls("laplace", (loc, scale), scales or {})

    @classmethod
    def exponential(cls, scale: float = 1.0, scales=None) -> "NoiseSpec":
        return cls("exponential", (scale,), scales or {})

    @classmethod
    def uniform(cls, low: float = -1.0, high: float = 1.0, scales=None) -> "NoiseSpec":
        return cls("uniform", (low, high), scales or {})

    def with_scales(self, scales: Mapping[int, float]) -> "NoiseSpec":
        return NoiseSpec(self.family, self.params, {**self.scales, **scales})

    def draw(self, n: int, p: int, rng: np.random.Generator) -> np.ndarray:
        """``n x p`` matrix of independent draws, column ``v`` scaled by node ``v``'s multiplier."""
        if self.family == "laplace":
            out = rng.laplace(self.params[0], self.params[1], size=(n, p))
        elif self.family == "exponential":
            out = rng.exponential(self.params[0], size=(n, p))
        else:
            out = rng.uniform(self.params[0], self.params[1], size=(n, p))
        for v, s in self.scales.items():
            if not 0 <= v < p:
                raise InvalidDimensions(f"scale multiplier for unknown node {v}")
            out[:, v] *= s
        return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n x p_o`` samples; ``columns[c]`` is the observed node behind column ``c``."""

    values: np.ndarray
    columns: tuple[int, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != len(self.columns):
            raise DimensionMismatch(f"values of shape {v.shape} for {len(self.columns)} columns")
        if len(set(self.columns)) != len(self.columns):
            raise DimensionMismatch("duplicate column binding")
        if not np.all(np.isfinite(v)):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def aligned(self, dag: LvDag) -> np.ndarray:
        """Samples with columns reordered to ``dag.observed``."""
        if sorted(self.columns) != sorted(dag.observed):
            raise DimensionMismatch(f"dataset columns {sorted(self.columns)} do not match "
                                    f"observed nodes {list(dag.observed)}")
        idx = {v: c for c, v in enumerate(self.columns)}
        return self.values[:, [idx[v] for v in dag.observed]]

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.values:
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path: str | Path) -> "Dataset":
        return cls.from_csv_text(Path(path).read_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "Dataset":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows:
            raise DimensionMismatch("empty CSV")
        try:
            header = tuple(int(h) for h in rows[0])
            values = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
        except ValueError as exc:
            raise DimensionMismatch(f"malformed CSV: {exc}") from None
        return cls(values.reshape(len(rows) - 1, len(header)), header)


def _rng(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_canonical_dag(p_o: int, p_l: int, edge_prob: float, seed: SeedLike = None) -> CanonicalDag:
    """Erdos-Renyi canonical graph.

    Observed nodes get ids ``0..p_o-1`` and latents ``p_o..p-1``. A random
    order of the observed nodes is fixed and every forward observed pair and
    every latent-observed pair becomes an edge with probability ``edge_prob``.
    Latents left with fewer than two children receive extra children drawn
    uniformly from the observed nodes they miss.
    """
    if p_o < 1 or p_l < 0:
        raise InvalidDimensions(f"need p_o >= 1 and p_l >= 0, got {p_o}, {p_l}")
    if p_l > 0 and p_o < 2:
        raise InvalidDimensions("latent nodes need at least two observed nodes")
    if not 0 < edge_prob <= 1:
        raise InvalidDimensions(f"edge_prob must lie in (0, 1], got {edge_prob}")
    rng = _rng(seed)
    order = rng.permutation(p_o)
    upper = np.triu(rng.random((p_o, p_o)) < edge_prob, k=1)
    src, dst = np.nonzero(upper)
    edges = list(zip(order[src].tolist(), order[dst].tolist()))
    lat = rng.random((p_l, p_o)) < edge_prob
    for r in range(p_l):
        missing = 2 - int(lat[r].sum())
        if missing > 0:
            free = np.flatnonzero(~lat[r])
            lat[r, rng.choice(free, size=missing, replace=False)] = True
        edges += [(p_o + r, int(c)) for c in np.flatnonzero(lat[r])]
    return CanonicalDag(tuple(range(p_o)), tuple(range(p_o, p_o + p_l)), frozenset(edges))


def sample_weights(dag: LvDag, seed: SeedLike = None, low: float = 0.5, high: float = 1.0) -> WeightedModel:
    """Weights uniform on ``[-high, -low] U [low, high]``; latent scaling edges fixed to 1."""
    dag = validate(dag)
    rng = _rng(seed)
    edges = sorted(dag.edges)
    w = dict(zip(edges, rng.uniform(low, high, len(edges)) * rng.choice([-1.0, 1.0], len(edges))))
    for l in dag.latent:
        w[(l, dag.first_child(l))] = 1.0
    return WeightedModel(dag, w)


def draw_noise(model: WeightedModel, noise: NoiseSpec, n: int, seed: SeedLike = None) -> np.ndarray:
    """``n x p`` exogenous noise, column ``v`` for node ``v``."""
    if n < 1:
        raise InvalidDimensions("n must be positive")
    return noise.draw(n, model.dag.p, _rng(seed))


def propagate(model: WeightedModel, noise_values: np.ndarray) -> Dataset:
    """Observed samples ``N B'^T`` for a noise matrix indexed by node id."""
    dag = model.dag
    b = build_mixing(model)
    cols = list(b.columns)
    x = noise_values[:, cols] @ b.values.T
    return Dataset(x, dag.observed)


def simulate_linear(model: WeightedModel, noise: NoiseSpec | None = None, n: int = 1000,
                    seed: SeedLike = None) -> Dataset:
    noise = noise or NoiseSpec()
    return propagate(model, draw_noise(model, noise, n, seed))


def simulate_misspecified(model: WeightedModel, noise: NoiseSpec | None, target_edge: Edge,
                          n: int, seed: SeedLike = None) -> Dataset:
    """Samples from a near-linear model where each node applies ``tanh`` to its parent sum.

    The head of ``target_edge`` is the outcome: its parents other than the
    tail pass through ``tanh`` while the tail enters linearly, so the target
    weight keeps its meaning as a direct effect.
    """
    dag = model.dag
    k, y = target_edge
    if (k, y) not in dag.edges or not (dag.is_observed(k) and dag.is_observed(y)):
        raise UnknownEdge(target_edge)
    noise = noise or NoiseSpec()
    e = draw_noise(model, noise, n, seed)
    a = model.adjacency()
    v = np.zeros_like(e)
    for node in dag.topological_order:
        pa = list(dag.parents(node))
        if node == y:
            rest = [u for u in pa if u != k]
            v[:, node] = np.tanh(v[:, rest] @ a[node, rest]) + a[y, k] * v[:, k] + e[:, node]
        else:
            v[:, node] = np.tanh(v[:, pa] @ a[node, pa]) + e[:, node]
    return Dataset(v[:, list(dag.observed)], dag.observed)
