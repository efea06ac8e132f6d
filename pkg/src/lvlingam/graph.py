"""Latent-variable DAGs, canonical form, and descendant-set primitives.

Nodes are dense integers ``0..p-1`` split into observed and latent sets.
Descendant and child sets are returned as :class:`NodeSet` bitsets so that
equality tests between sets (the heart of every identifiability condition)
cost a single big-integer comparison.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

Edge = tuple[int, int]


class GraphError(ValueError):
    pass


class CycleDetected(GraphError):
    def __init__(self, nodes: Sequence[int]):
        self.nodes = tuple(nodes)
        super().__init__(f"graph has a cycle through nodes {list(self.nodes)}")


class UnknownNode(GraphError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"unknown node {node!r}")


class LatentWithParent(GraphError):
    def __init__(self, node: int):
        self.node = node
        super().__init__(f"latent node {node} has parents")


class LatentWithFewChildren(GraphError):
    def __init__(self, node: int):
        self.node = node
        super().__init__(f"latent node {node} has fewer than two children")


class NotCanonical(GraphError):
    """Raised by :func:`validate`; carries every violation found."""

    def __init__(self, violations: Sequence[GraphError]):
        self.violations = list(violations)
        super().__init__("graph is not canonical: " + "; ".join(map(str, self.violations)))


class GraphFormatError(GraphError):
    pass


class NodeSet:
    """Immutable set of node ids stored as an integer bitmask."""

    __slots__ = ("bits",)

    def __init__(self, bits: int = 0):
        self.bits = bits

    @classmethod
    def of(cls, nodes: Iterable[int]) -> "NodeSet":
        bits = 0
        for v in nodes:
            bits |= 1 << v
        return cls(bits)

    def __contains__(self, v: int) -> bool:
        return v >= 0 and (self.bits >> v) & 1 == 1

    def __iter__(self) -> Iterator[int]:
        bits, v = self.bits, 0
        while bits:
            low = bits & -bits
            v = low.bit_length() - 1
            yield v
            bits ^= low

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def __bool__(self) -> bool:
        return self.bits != 0

    def __eq__(self, other) -> bool:
        if isinstance(other, NodeSet):
            return self.bits == other.bits
        if isinstance(other, (set, frozenset)):
            return self.bits == NodeSet.of(other).bits
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.bits)

    def __le__(self, other: "NodeSet") -> bool:
        return self.bits & ~other.bits == 0

    def __or__(self, other: "NodeSet") -> "NodeSet":
        return NodeSet(self.bits | other.bits)

    def __and__(self, other: "NodeSet") -> "NodeSet":
        return NodeSet(self.bits & other.bits)

    def __sub__(self, other: "NodeSet") -> "NodeSet":
        return NodeSet(self.bits & ~other.bits)

    def __repr__(self) -> str:
        return f"NodeSet({sorted(self)})"


@dataclass(frozen=True, eq=False)
class LvDag:
    """A DAG whose nodes are partitioned into observed and latent ones.

    ``observed`` and ``latent`` together must cover ``0..p-1`` exactly once.
    Construction rejects cycles, so every instance is acyclic.
    """

    observed: tuple[int, ...]
    latent: tuple[int, ...]
    edges: frozenset[Edge]
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "observed", tuple(sorted(self.observed)))
        object.__setattr__(self, "latent", tuple(sorted(self.latent)))
        object.__setattr__(self, "edges", frozenset((int(u), int(v)) for u, v in self.edges))
        p = len(self.observed) + len(self.latent)
        if sorted(self.observed + self.latent) != list(range(p)):
            raise GraphFormatError("observed and latent ids must partition 0..p-1")
        for u, v in self.edges:
            if not (0 <= u < p and 0 <= v < p):
                raise UnknownNode((u, v))
            if u == v:
                raise CycleDetected([u])
        if self.names is not None:
            names = tuple(str(n) for n in self.names)
            if len(names) != p or len(set(names)) != p:
                raise GraphFormatError("names must be unique and one per node")
            object.__setattr__(self, "names", names)
        self.topological_order  # raises CycleDetected

    @classmethod
    def from_names(cls, observed: Sequence[str], latent: Sequence[str],
                   edges: Iterable[tuple[str, str]], **kwargs) -> "LvDag":
        """Build a graph from node labels; ids follow the order given."""
        names = list(observed) + list(latent)
        idx = {n: i for i, n in enumerate(names)}
        try:
            e = [(idx[a], idx[b]) for a, b in edges]
        except KeyError as exc:
            raise UnknownNode(exc.args[0]) from None
        return cls(observed=tuple(range(len(observed))),
                   latent=tuple(range(len(observed), len(names))),
                   edges=frozenset(e), names=tuple(names), **kwargs)

    @property
    def p(self) -> int:
        return len(self.observed) + len(self.latent)

    @property
    def p_o(self) -> int:
        return len(self.observed)

    @property
    def p_l(self) -> int:
        return len(self.latent)

    def is_latent(self, v: int) -> bool:
        return v in self.latent_set

    def is_observed(self, v: int) -> bool:
        return 0 <= v < self.p and v not in self.latent_set

    def name(self, v: int) -> str:
        return self.names[v] if self.names is not None else str(v)

    def node(self, ref) -> int:
        """Resolve a node given as an id or a name."""
        if isinstance(ref, (int, np.integer)):
            if 0 <= ref < self.p:
                return int(ref)
            raise UnknownNode(ref)
        if self.names is not None and ref in self.names:
            return self.names.index(ref)
        try:
            v = int(ref)
        except (TypeError, ValueError):
            raise UnknownNode(ref) from None
        return self.node(v)

    def _check(self, v: int) -> None:
        if not (isinstance(v, (int, np.integer)) and 0 <= v < self.p):
            raise UnknownNode(v)

    @cached_property
    def latent_set(self) -> frozenset[int]:
        return frozenset(self.latent)

    @cached_property
    def observed_mask(self) -> int:
        return NodeSet.of(self.observed).bits

    @cached_property
    def _children(self) -> tuple[tuple[int, ...], ...]:
        ch: list[list[int]] = [[] for _ in range(self.p)]
        for u, v in self.edges:
            ch[u].append(v)
        return tuple(tuple(sorted(c)) for c in ch)

    @cached_property
    def _parents(self) -> tuple[tuple[int, ...], ...]:
        pa: list[list[int]] = [[] for _ in range(self.p)]
        for u, v in self.edges:
            pa[v].append(u)
        return tuple(tuple(sorted(c)) for c in pa)

    @cached_property
    def _children_bits(self) -> tuple[int, ...]:
        return tuple(NodeSet.of(c).bits for c in self._children)

    def children(self, v: int) -> tuple[int, ...]:
        self._check(v)
        return self._children[v]

    def parents(self, v: int) -> tuple[int, ...]:
        self._check(v)
        return self._parents[v]

    def children_set(self, v: int) -> NodeSet:
        self._check(v)
        return NodeSet(self._children_bits[v])

    @cached_property
    def topological_order(self) -> tuple[int, ...]:
        # Kahn's algorithm; the heap breaks ties by ascending id.
        indeg = [len(pa) for pa in self._parents]
        heap = [v for v in range(self.p) if indeg[v] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            u = heapq.heappop(heap)
            order.append(u)
            for v in self._children[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(heap, v)
        if len(order) != self.p:
            raise CycleDetected(sorted(v for v in range(self.p) if indeg[v] > 0))
        return tuple(order)

    @cached_property
    def position(self) -> tuple[int, ...]:
        pos = [0] * self.p
        for k, v in enumerate(self.topological_order):
            pos[v] = k
        return tuple(pos)

    def sorted_children(self, v: int) -> tuple[int, ...]:
        """Children of ``v`` in topological order."""
        return tuple(sorted(self.children(v), key=self.position.__getitem__))

    def first_child(self, v: int) -> int | None:
        ch = self.children(v)
        return min(ch, key=self.position.__getitem__) if ch else None

    @cached_property
    def _de_o_bits(self) -> tuple[int, ...]:
        # One reverse-topological sweep fills the table for every node.
        obs = self.observed_mask
        table = [0] * self.p
        for v in reversed(self.topological_order):
            bits = (1 << v) & obs
            for c in self._children[v]:
                bits |= table[c]
            table[v] = bits
        return tuple(table)

    def observed_descendants(self, v: int) -> NodeSet:
        """Observed members of ``{v}`` together with the descendants of ``v``."""
        self._check(v)
        return NodeSet(self._de_o_bits[v])

    def observed_descendants_cut(self, l: int, j: int) -> NodeSet:
        """Observed descendants of ``l`` once every edge into ``j`` is removed."""
        self._check(l)
        self._check(j)
        seen = 1 << l
        stack = [l]
        children = self._children
        while stack:
            u = stack.pop()
            for c in children[u]:
                if c == j or (seen >> c) & 1:
                    continue
                seen |= 1 << c
                stack.append(c)
        return NodeSet(seen & self.observed_mask)

    def descendants(self, v: int) -> NodeSet:
        """All descendants of ``v`` (excluding ``v``), observed or latent."""
        self._check(v)
        seen = 0
        stack = [v]
        while stack:
            u = stack.pop()
            for c in self._children[u]:
                if not (seen >> c) & 1:
                    seen |= 1 << c
                    stack.append(c)
        return NodeSet(seen)

    def __repr__(self) -> str:
        edges = sorted(self.edges)
        if self.names is not None:
            shown = ", ".join(f"{self.name(u)}->{self.name(v)}" for u, v in edges)
        else:
            shown = ", ".join(f"{u}->{v}" for u, v in edges)
        return (f"{type(self).__name__}(observed={list(self.observed)}, "
                f"latent={list(self.latent)}, edges=[{shown}])")


@dataclass(frozen=True, eq=False, repr=False)
class CanonicalDag(LvDag):
    """An :class:`LvDag` known to be in canonical form.

    ``original_ids[v]`` is the id node ``v`` had in the graph this one was
    reduced from; ``reduction_log`` lists what the reduction changed.
    """

    original_ids: tuple[int, ...] | None = None
    reduction_log: tuple[str, ...] = field(default=())

    def __post_init__(self):
        super().__post_init__()
        if self.original_ids is None:
            object.__setattr__(self, "original_ids", tuple(range(self.p)))


def _canonical_violations(dag: LvDag) -> list[GraphError]:
    out: list[GraphError] = []
    for l in dag.latent:
        if dag.parents(l):
            out.append(LatentWithParent(l))
        if len(dag.children(l)) < 2:
            out.append(LatentWithFewChildren(l))
    return out


def validate(dag: LvDag) -> CanonicalDag:
    """Return ``dag`` tagged canonical, or raise :class:`NotCanonical`."""
    if isinstance(dag, CanonicalDag):
        return dag
    dag.topological_order
    violations = _canonical_violations(dag)
    if violations:
        raise NotCanonical(violations)
    return CanonicalDag(observed=dag.observed, latent=dag.latent, edges=dag.edges,
                        names=dag.names)


def is_canonical(dag: LvDag) -> bool:
    return not _canonical_violations(dag)


def topological_order(dag: LvDag) -> tuple[int, ...]:
    return dag.topological_order


def observed_descendants(dag: LvDag, v: int) -> NodeSet:
    return dag.observed_descendants(v)


def observed_descendants_cut(dag: LvDag, l: int, j: int) -> NodeSet:
    return dag.observed_descendants_cut(l, j)


def _latent_only_reach(dag: LvDag, v: int) -> list[int]:
    """Observed nodes reachable from ``v`` through latent intermediates only."""
    out, seen, stack = set(), {v}, [v]
    while stack:
        u = stack.pop()
        for c in dag.children(u):
            if dag.is_latent(c):
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
            else:
                out.add(c)
    out.discard(v)
    return sorted(out)


def _reduction(dag: LvDag):
    """Edges of the reduced graph (original ids), surviving latents, log."""
    edges = set()
    log = []
    for o in dag.observed:
        for x in _latent_only_reach(dag, o):
            edges.add((o, x))
    kept = []
    for l in dag.latent:
        ch = _latent_only_reach(dag, l)
        if len(ch) >= 2:
            kept.append(l)
            edges.update((l, x) for x in ch)
        else:
            log.append(f"latent {dag.name(l)} deleted: {len(ch)} observed child(ren), "
                       "absorbed into exogenous noise")
    for u, v in sorted(dag.edges):
        if dag.is_latent(v):
            log.append(f"edge {dag.name(u)}->{dag.name(v)} removed (into latent)")
    for u, v in sorted(edges - dag.edges):
        log.append(f"edge {dag.name(u)}->{dag.name(v)} added (path through latents)")
    return edges, kept, log


def canonicalize(dag: LvDag) -> CanonicalDag:
    """Graphical part of the reduction to an observationally equivalent canonical model.

    Each latent is connected to every observed node it reaches through latent
    nodes only; observed nodes are likewise connected across latent paths.
    Latents left with fewer than two observed children are deleted. Surviving
    nodes keep their relative order; ids are compacted only if a latent is
    deleted, and ``original_ids`` records the mapping.
    """
    if isinstance(dag, CanonicalDag):
        return dag
    edges, kept, log = _reduction(dag)
    keep = sorted(list(dag.observed) + kept)
    new_id = {v: k for k, v in enumerate(keep)}
    return CanonicalDag(
        observed=tuple(new_id[o] for o in dag.observed),
        latent=tuple(new_id[l] for l in kept),
        edges=frozenset((new_id[u], new_id[v]) for u, v in edges),
        names=None if dag.names is None else tuple(dag.names[v] for v in keep),
        original_ids=tuple(keep),
        reduction_log=tuple(log),
    )


@dataclass(frozen=True, eq=False)
class WeightedModel:
    """An lvLiNGAM: a graph plus one real weight per edge.

    On canonical graphs the edge from each latent to its topologically first
    child must carry weight exactly 1, which fixes the latent column scaling.
    """

    dag: LvDag
    weights: Mapping[Edge, float]

    def __post_init__(self):
        w = {(int(u), int(v)): float(x) for (u, v), x in dict(self.weights).items()}
        if set(w) != set(self.dag.edges):
            missing = sorted(set(self.dag.edges) - set(w))
            extra = sorted(set(w) - set(self.dag.edges))
            raise GraphError(f"weights must match edges (missing {missing}, extra {extra})")
        object.__setattr__(self, "weights", w)
        if isinstance(self.dag, CanonicalDag):
            for e in self.scaling_edges:
                if w[e] != 1.0:
                    raise GraphError(f"scaling edge {e} must have weight 1, got {w[e]}")

    @cached_property
    def scaling_edges(self) -> tuple[Edge, ...]:
        if not isinstance(self.dag, CanonicalDag):
            return ()
        return tuple((l, self.dag.first_child(l)) for l in self.dag.latent)

    @cached_property
    def free_edges(self) -> tuple[Edge, ...]:
        fixed = set(self.scaling_edges)
        return tuple(e for e in sorted(self.dag.edges) if e not in fixed)

    def adjacency(self) -> np.ndarray:
        """The ``p x p`` matrix ``A`` with ``A[v, u]`` the weight of ``u -> v``."""
        a = np.zeros((self.dag.p, self.dag.p))
        for (u, v), x in self.weights.items():
            a[v, u] = x
        return a

    def with_free(self, theta: Sequence[float]) -> "WeightedModel":
        w = dict(self.weights)
        for e, x in zip(self.free_edges, theta):
            w[e] = float(x)
        return WeightedModel(self.dag, w)

    def free_vector(self) -> np.ndarray:
        return np.array([self.weights[e] for e in self.free_edges])


def unit_free_model(dag: LvDag, theta: Sequence[float] | None = None) -> WeightedModel:
    """Model on ``dag`` with scaling edges at 1 and free weights from ``theta`` (default 0)."""
    w = {e: 0.0 for e in dag.edges}
    m = WeightedModel(dag, {**w, **{e: 1.0 for e in _scaling(dag)}})
    return m if theta is None else m.with_free(theta)


def _scaling(dag: LvDag) -> list[Edge]:
    if not isinstance(dag, CanonicalDag):
        return []
    return [(l, dag.first_child(l)) for l in dag.latent]


def reduce_weights_to_canonical(model: WeightedModel) -> tuple[CanonicalDag, np.ndarray]:
    """Canonical graph and mixing matrix of the observationally equivalent canonical model.

    Returns ``(cdag, bprime)`` where the rows of ``bprime`` are the observed
    nodes and its columns are the observed nodes followed by the surviving
    latents, all in ascending id order of ``cdag``.
    """
    dag = model.dag
    cdag = canonicalize(dag)
    a = model.adjacency()
    o, lat = list(dag.observed), list(dag.latent)
    a_oo, a_ol = a[np.ix_(o, o)], a[np.ix_(o, lat)]
    a_lo, a_ll = a[np.ix_(lat, o)], a[np.ix_(lat, lat)]
    inv_ll = np.linalg.inv(np.eye(len(lat)) - a_ll) if lat else np.zeros((0, 0))
    d = a_oo + a_ol @ inv_ll @ a_lo
    b_o = np.linalg.inv(np.eye(len(o)) - d)
    b_l = b_o @ a_ol @ inv_ll
    kept = [cdag.original_ids[v] for v in cdag.latent]
    cols = [lat.index(l) for l in kept]
    return cdag, np.hstack([b_o, b_l[:, cols]])


_GRAPH_KEYS = {"p_o", "p_l", "observed", "latent", "edges", "names"}


def dumps_graph(obj: Mapping) -> str:
    """JSON text with one top-level key per line and compact values."""
    body = ",\n".join(f"  {json.dumps(k)}: {json.dumps(v)}" for k, v in obj.items())
    return "{\n" + body + "\n}\n"


def dag_to_json(dag: LvDag) -> dict:
    out = {
        "p_o": dag.p_o,
        "p_l": dag.p_l,
        "observed": list(dag.observed),
        "latent": list(dag.latent),
        "edges": [list(e) for e in sorted(dag.edges)],
    }
    if dag.names is not None:
        out["names"] = list(dag.names)
    return out


def dag_from_json(obj: Mapping, extra_keys: Iterable[str] = ()) -> LvDag:
    if not isinstance(obj, Mapping):
        raise GraphFormatError("graph JSON must be an object")
    unknown = set(obj) - _GRAPH_KEYS - set(extra_keys)
    if unknown:
        raise GraphFormatError(f"unknown keys {sorted(unknown)}")
    for key in ("p_o", "p_l", "observed", "latent", "edges"):
        if key not in obj:
            raise GraphFormatError(f"missing key {key!r}")
    try:
        observed = [int(v) for v in obj["observed"]]
        latent = [int(v) for v in obj["latent"]]
        edges = [(int(u), int(v)) for u, v in obj["edges"]]
    except (TypeError, ValueError) as exc:
        raise GraphFormatError(f"malformed ids: {exc}") from None
    if len(observed) != obj["p_o"] or len(latent) != obj["p_l"]:
        raise GraphFormatError("p_o/p_l disagree with the observed/latent lists")
    if len(set(edges)) != len(edges):
        raise GraphFormatError("duplicate edges")
    return LvDag(observed=tuple(observed), latent=tuple(latent), edges=frozenset(edges),
                 names=obj.get("names"))


def model_to_json(model: WeightedModel) -> dict:
    out = dag_to_json(model.dag)
    out["weights"] = [[u, v, model.weights[(u, v)]] for u, v in sorted(model.dag.edges)]
    return out


def model_from_json(obj: Mapping, canonical: bool = True) -> WeightedModel:
    dag = dag_from_json(obj, extra_keys=("weights",))
    if "weights" not in obj:
        raise GraphFormatError("missing key 'weights'")
    if canonical:
        dag = validate(dag)
    try:
        w = {(int(u), int(v)): float(x) for u, v, x in obj["weights"]}
    except (TypeError, ValueError) as exc:
        raise GraphFormatError(f"malformed weights: {exc}") from None
    return WeightedModel(dag, w)
