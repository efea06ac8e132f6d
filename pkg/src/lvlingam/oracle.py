"""Brute-force numeric checks of identifiability and of the path-sum identities.

Nothing here is meant for production use: enumeration is exponential and is
guarded by a node cap. The functions exist to cross-examine :mod:`certify`.

Generic instances are drawn with edge weights of magnitude uniform on
``[0.5, 1]`` and a random sign, latent scaling edges fixed to 1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .certify import IdQuery, IdVerdict, Kind, NotObserved, Setting
from .graph import CanonicalDag, Edge, LvDag, WeightedModel, validate
from .mixing import MixingMatrix, build_mixing
from .sem import sample_weights

DEFAULT_CAP = 12
SUPPORT_TOL = 1e-7
COMPARE_RTOL = 1e-6


class GraphTooLargeForEnumeration(ValueError):
    def __init__(self, p: int, cap: int):
        self.p, self.cap = p, cap
        super().__init__(f"graph has {p} nodes, enumeration cap is {cap}")


class SingularObservedBlock(ValueError):
    pass


class PreconditionViolated(ValueError):
    pass


def _require_cap(dag: LvDag, cap: int) -> None:
    if dag.p > cap:
        raise GraphTooLargeForEnumeration(dag.p, cap)


# ---------------------------------------------------------------------------
# Path sums

def _paths(children: Sequence[Sequence[int]], src: int, dst: int,
           blocked: frozenset[int] = frozenset()) -> Iterator[tuple[int, ...]]:
    """Every directed path from ``src`` to ``dst`` avoiding ``blocked`` interior/end nodes."""
    stack = [(src, (src,))]
    while stack:
        u, path = stack.pop()
        if u == dst:
            yield path
            continue
        for c in children[u]:
            if c not in blocked:
                stack.append((c, path + (c,)))


def _path_weight(a: np.ndarray, path: Sequence[int]) -> float:
    w = 1.0
    for u, v in zip(path, path[1:]):
        w *= a[v, u]
    return w


def path_sum_total_effect(model: WeightedModel, j: int, i: int, cap: int = DEFAULT_CAP) -> float:
    """Sum over directed paths ``j -> ... -> i`` of the product of edge weights."""
    dag = model.dag
    _require_cap(dag, cap)
    dag._check(j)
    dag._check(i)
    a = model.adjacency()
    return float(sum(_path_weight(a, p) for p in _paths(dag._children, j, i)))


def path_systems(dag: LvDag, sources: Sequence[int], sinks: Sequence[int],
                 cap: int = DEFAULT_CAP) -> Iterator[tuple[tuple[int, ...], tuple[tuple[int, ...], ...]]]:
    """Vertex-disjoint path systems joining ``sources`` to a permutation of ``sinks``.

    Yields ``(perm, paths)`` where ``paths[r]`` runs from ``sources[r]`` to
    ``sinks[perm[r]]``.
    """
    _require_cap(dag, cap)
    k = len(sources)
    for perm in itertools.permutations(range(k)):
        choices = [list(_paths(dag._children, s, sinks[perm[r]])) for r, s in enumerate(sources)]
        for combo in itertools.product(*choices):
            used = [v for path in combo for v in path]
            if len(used) == len(set(used)):
                yield perm, combo


def _sign(perm: Sequence[int]) -> int:
    sign, seen = 1, [False] * len(perm)
    for s in range(len(perm)):
        if seen[s]:
            continue
        length, t = 0, s
        while not seen[t]:
            seen[t] = True
            t = perm[t]
            length += 1
        sign *= -1 if length % 2 == 0 else 1
    return sign


def gessel_viennot_minor(model: WeightedModel, rows: Sequence[int], cols: Sequence[int],
                         cap: int = DEFAULT_CAP) -> float:
    """Signed sum over non-intersecting path systems from ``cols`` to ``rows``.

    Equals ``det(B[rows, cols])`` for ``B = (I - A)^-1`` on acyclic models.
    """
    a = model.adjacency()
    total = 0.0
    for perm, paths in path_systems(model.dag, cols, rows, cap):
        w = _sign(perm)
        for p in paths:
            w *= _path_weight(a, p)
        total += w
    return total


# ---------------------------------------------------------------------------
# Permutations and recovery

@dataclass(frozen=True)
class ColumnPermutation:
    """Column permutation of a mixing matrix.

    ``mapping[v]`` is the node whose column is moved into the slot of node
    ``v``; nodes absent from ``mapping`` stay put.
    """

    mapping: tuple[tuple[int, int], ...] = ()

    @classmethod
    def from_dict(cls, d: dict[int, int]) -> "ColumnPermutation":
        moved = tuple(sorted((k, v) for k, v in d.items() if k != v))
        if sorted(k for k, _ in moved) != sorted(v for _, v in moved):
            raise ValueError("not a permutation")
        return cls(moved)

    def __call__(self, v: int) -> int:
        return dict(self.mapping).get(v, v)

    @property
    def is_identity(self) -> bool:
        return not self.mapping

    def cycles(self) -> list[tuple[int, ...]]:
        d = dict(self.mapping)
        out, seen = [], set()
        for start in sorted(d):
            if start in seen:
                continue
            cyc, v = [], start
            while v not in seen:
                seen.add(v)
                cyc.append(v)
                v = d[v]
            out.append(tuple(cyc))
        return out

    def apply(self, mix: MixingMatrix) -> MixingMatrix:
        idx = {v: c for c, v in enumerate(mix.columns)}
        order = [idx[self(v)] for v in mix.columns]
        return MixingMatrix(mix.values[:, order], mix.rows, mix.columns)

    def __repr__(self) -> str:
        return "ColumnPermutation(" + "".join(str(c) for c in self.cycles()) + ")"


@dataclass(frozen=True, eq=False)
class RecoveredModel:
    """Adjacency blocks read back from a (possibly permuted) mixing matrix."""

    a_oo: np.ndarray
    a_ol: np.ndarray
    rows: tuple[int, ...]
    latent: tuple[int, ...]
    edges: frozenset[Edge]
    acyclic: bool
    canonical: bool
    b_o: np.ndarray = field(repr=False)

    def as_dag(self) -> LvDag:
        return LvDag(self.rows, self.latent, self.edges)


def _support_order(a_oo: np.ndarray, tol: float) -> list[int] | None:
    """Topological order (positions) of the support of ``a_oo``, or None if cyclic."""
    n = a_oo.shape[0]
    sup = np.abs(a_oo) > tol
    indeg = sup.sum(axis=1)
    ready = sorted(np.flatnonzero(indeg == 0).tolist())
    order = []
    while ready:
        u = ready.pop(0)
        order.append(u)
        for v in np.flatnonzero(sup[:, u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(int(v))
                ready.sort()
    return order if len(order) == n else None


def recover_model(bprime: MixingMatrix, tol: float = SUPPORT_TOL) -> RecoveredModel:
    """Invert the mixing relations, rescaling columns to unit leading entries.

    Observed columns are scaled to a unit diagonal. Latent columns are scaled
    so that their first nonzero entry, in a topological order of the recovered
    observed graph, is 1.
    """
    p_o = bprime.p_o
    b_o = bprime.observed_block.copy()
    b_l = bprime.latent_block.copy()
    diag = np.diag(b_o)
    if np.any(np.abs(diag) <= tol):
        raise SingularObservedBlock("zero diagonal entry in the observed block")
    b_o = b_o / diag
    try:
        inv = np.linalg.inv(b_o)
    except np.linalg.LinAlgError:
        raise SingularObservedBlock("observed block is singular") from None
    if not np.all(np.isfinite(inv)) or np.linalg.cond(b_o) > 1e12:
        raise SingularObservedBlock("observed block is numerically singular")
    a_oo = np.eye(p_o) - inv
    np.fill_diagonal(a_oo, 0.0)
    order = _support_order(a_oo, tol)
    scan = order if order is not None else list(range(p_o))
    for c in range(b_l.shape[1]):
        nz = [r for r in scan if abs(b_l[r, c]) > tol]
        if nz:
            b_l[:, c] /= b_l[nz[0], c]
    a_ol = inv @ b_l
    a_oo[np.abs(a_oo) <= tol] = 0.0
    a_ol[np.abs(a_ol) <= tol] = 0.0
    rows = bprime.rows
    latent = bprime.columns[p_o:]
    edges = {(rows[k], rows[r]) for r, k in zip(*np.nonzero(a_oo))}
    edges |= {(latent[k], rows[r]) for r, k in zip(*np.nonzero(a_ol))}
    acyclic = order is not None
    children_per_latent = (np.abs(a_ol) > 0).sum(axis=0)
    canonical = acyclic and bool(np.all(children_per_latent >= 2))
    return RecoveredModel(a_oo, a_ol, rows, latent, frozenset(edges), acyclic, canonical, b_o)


def generic_weights(dag: LvDag, rng: np.random.Generator) -> WeightedModel:
    """Weights with magnitudes uniform on [0.5, 1] and random signs; scaling edges at 1."""
    return sample_weights(dag, rng)


def candidate_permutations(dag: LvDag, cap: int = DEFAULT_CAP) -> list[ColumnPermutation]:
    """All permutations moving nodes only within classes of equal observed descendants."""
    _require_cap(dag, cap)
    groups = _class_groups(dag)
    out = []
    for images in itertools.product(*(itertools.permutations(g) for g in groups)):
        d = {}
        for g, img in zip(groups, images):
            d.update(zip(g, img))
        out.append(ColumnPermutation.from_dict(d))
    out.sort(key=lambda s: (not s.is_identity, s.mapping))
    return out


def _class_groups(dag: LvDag) -> list[list[int]]:
    classes: dict[int, list[int]] = {}
    for v in range(dag.p):
        classes.setdefault(dag._de_o_bits[v], []).append(v)
    return [g for g in classes.values() if len(g) > 1]


def _observed_representatives(dag: LvDag, cap: int = DEFAULT_CAP) -> list[ColumnPermutation]:
    """One candidate per assignment of columns to observed slots.

    Candidates that agree on the observed slots recover the same observed
    block, so only the arrangement of latent columns differs between them;
    :func:`_arrange_latents` settles that part directly.
    """
    _require_cap(dag, cap)
    per_group = []
    for g in _class_groups(dag):
        obs_slots = [v for v in g if dag.is_observed(v)]
        lat_slots = [v for v in g if dag.is_latent(v)]
        options = []
        for chosen in itertools.permutations(g, len(obs_slots)):
            rest = sorted(set(g) - set(chosen))
            options.append(dict(zip(obs_slots + lat_slots, list(chosen) + rest)))
        per_group.append(options)
    out = []
    for combo in itertools.product(*per_group):
        d = {}
        for part in combo:
            d.update(part)
        out.append(ColumnPermutation.from_dict(d))
    out.sort(key=lambda s: (not s.is_identity, s.mapping))
    return out


def _arrange_latents(sigma: ColumnPermutation, rec: RecoveredModel, dag: LvDag
                     ) -> ColumnPermutation | None:
    """Rearrange latent columns of ``sigma`` so the recovered graph is ``dag``, if possible."""
    latent = set(rec.latent)
    if {e for e in rec.edges if e[0] not in latent} != {e for e in dag.edges if dag.is_observed(e[0])}:
        return None
    slots: dict[frozenset[int], list[int]] = {}
    for l in dag.latent:
        slots.setdefault(frozenset(dag.children(l)), []).append(l)
    support: dict[int, set[int]] = {s: set() for s in rec.latent}
    for u, v in rec.edges:
        if u in latent:
            support[u].add(v)
    d = {v: sigma(v) for v in dag.observed}
    for s in rec.latent:
        free = slots.get(frozenset(support[s]))
        if not free:
            return None
        d[free.pop(0)] = sigma(s)
    return ColumnPermutation.from_dict(d)


def _is_valid(rec: RecoveredModel | None, dag: LvDag, setting: Setting) -> bool:
    if rec is None or not rec.canonical:
        return False
    return setting is Setting.UNKNOWN or rec.edges == dag.edges


def _alternatives(model: WeightedModel, cap: int, candidates=None):
    """``(sigma, recovered)`` for every candidate whose observed block is invertible."""
    mix = build_mixing(model)
    for sigma in candidates if candidates is not None else candidate_permutations(model.dag, cap):
        try:
            yield sigma, recover_model(sigma.apply(mix))
        except SingularObservedBlock:
            continue


def valid_permutations(dag: CanonicalDag, setting: Setting, seed: int = 0,
                       cap: int = DEFAULT_CAP) -> list[ColumnPermutation]:
    """Permutations whose recovered model is admissible in ``setting`` on a generic draw."""
    dag = validate(dag)
    model = generic_weights(dag, np.random.default_rng(seed))
    setting = Setting(setting)
    return [s for s, rec in _alternatives(model, cap) if _is_valid(rec, dag, setting)]


@dataclass(frozen=True)
class OracleVerdict(IdVerdict):
    """Brute-force verdict; the witness is the offending column permutation."""

    permutation: ColumnPermutation | None = None

    def witness_dict(self, dag: LvDag | None = None) -> dict | None:
        if self.permutation is None:
            return None
        name = (lambda v: v) if dag is None or dag.names is None else dag.name
        return {"permutation": [[name(v) for v in c] for c in self.permutation.cycles()]}


def _quantity(kind: Kind, j, i, b_o: np.ndarray, a_oo: np.ndarray, pos: dict[int, int]):
    if kind is Kind.MATRIX:
        return b_o
    if kind is Kind.TOTAL:
        return b_o[pos[i], pos[j]]
    return a_oo[pos[i], pos[j]]


def _differs(x, y) -> bool:
    x, y = np.asarray(x), np.asarray(y)
    return bool(np.any(np.abs(x - y) > COMPARE_RTOL * np.maximum(1.0, np.abs(y))))


def bruteforce_verdicts(dag: CanonicalDag, queries: Iterable[IdQuery], draws: int = 5,
                        seed: int = 0, cap: int = DEFAULT_CAP) -> list[OracleVerdict]:
    """Brute-force verdicts for many queries on one graph, sharing the enumeration."""
    dag = validate(dag)
    queries = list(queries)
    for q in queries:
        if q.kind is not Kind.MATRIX:
            for v in (q.source, q.target):
                dag._check(v)
                if dag.is_latent(v):
                    raise NotObserved(v)
    _require_cap(dag, cap)
    pos = {v: r for r, v in enumerate(dag.observed)}
    offending: list[ColumnPermutation | None] = [None] * len(queries)
    reps = [s for s in _observed_representatives(dag, cap) if not s.is_identity]
    rng = np.random.default_rng(seed)
    for _ in range(draws):
        model = generic_weights(dag, rng)
        truth = recover_model(build_mixing(model))
        alts = []
        for sigma, rec in _alternatives(model, cap, reps):
            if not rec.canonical:
                continue
            arranged = _arrange_latents(sigma, rec, dag)
            if arranged is not None and arranged.is_identity:
                arranged = None
            alts.append((sigma, arranged, rec))
        for qi, q in enumerate(queries):
            if offending[qi] is not None:
                continue
            ref = _quantity(q.kind, q.source, q.target, truth.b_o, truth.a_oo, pos)
            for sigma, arranged, rec in alts:
                witness = sigma if q.setting is Setting.UNKNOWN else arranged
                if witness is None:
                    continue
                alt = _quantity(q.kind, q.source, q.target, rec.b_o, rec.a_oo, pos)
                if _differs(alt, ref):
                    offending[qi] = witness
                    break
    out = []
    for q, sigma in zip(queries, offending):
        if q.kind is Kind.TOTAL:
            zero = q.target not in dag.observed_descendants(q.source)
        elif q.kind is Kind.DIRECT:
            zero = (q.source, q.target) not in dag.edges
        else:
            zero = False
        moved = None if sigma is None else tuple(v for c in sigma.cycles() for v in c)
        out.append(OracleVerdict(sigma is None, q.kind, q.setting, witness=moved,
                                 structurally_zero=zero, permutation=sigma))
    return out


def bruteforce_identifiable(dag: CanonicalDag, query: IdQuery, draws: int = 5, seed: int = 0,
                            cap: int = DEFAULT_CAP) -> OracleVerdict:
    """Declare non-identifiable iff some admissible permutation moves the queried quantity."""
    return bruteforce_verdicts(dag, [query], draws, seed, cap)[0]


# ---------------------------------------------------------------------------
# Column swap of an observed node and a latent with the same observed descendants

def swapped_adjacency_prediction(model: WeightedModel, j: int, l: int) -> np.ndarray:
    """Predicted observed adjacency after swapping the columns of ``j`` and ``l``.

    The change at ``(i, k)`` is ``c_i * [I - A_oo]_{j,k}`` for ``i`` a child of
    ``l``, where ``c = (I - A_oo) u`` and ``u`` holds the path sums from ``l``
    in the graph with every edge into ``j`` removed.
    """
    dag = model.dag
    a = model.adjacency()
    obs = list(dag.observed)
    pos = {v: r for r, v in enumerate(obs)}
    blocked = frozenset({j})
    u = np.array([sum(_path_weight(a, p) for p in _paths(dag._children, l, v, blocked))
                  if v != j else 0.0 for v in obs])
    a_oo = a[np.ix_(obs, obs)]
    ima = np.eye(len(obs)) - a_oo
    c = ima @ u
    ind = np.array([1.0 if v in dag.children_set(l) else 0.0 for v in obs])
    return a_oo + np.outer(ind * c, ima[pos[j]])


def swapped_adjacency_check(model: WeightedModel, j: int, l: int, tol: float = 1e-8,
                            cap: int = DEFAULT_CAP) -> bool:
    """Compare the recovered adjacency after swapping ``j`` and ``l`` to the closed form.

    Also checks that entries outside rows ``ch(l)`` and columns ``pa(j) | {j}``
    are untouched.
    """
    dag = model.dag
    _require_cap(dag, cap)
    if not dag.is_observed(j) or not dag.is_latent(l):
        raise PreconditionViolated("j must be observed and l latent")
    if dag.observed_descendants(j) != dag.observed_descendants(l):
        raise PreconditionViolated(f"observed descendants of {j} and {l} differ")
    sigma = ColumnPermutation.from_dict({j: l, l: j})
    rec = recover_model(sigma.apply(build_mixing(model)), tol=0.0)
    obs = list(dag.observed)
    a_oo = model.adjacency()[np.ix_(obs, obs)]
    predicted = swapped_adjacency_prediction(model, j, l)
    scale = np.maximum(1.0, np.abs(predicted))
    if np.any(np.abs(rec.a_oo - predicted) > tol * scale):
        return False
    rows = np.array([v in dag.children_set(l) for v in obs])
    cols = np.array([v == j or v in dag.parents(j) for v in obs])
    outside = ~np.outer(rows, cols)
    return bool(np.all(np.abs(rec.a_oo - a_oo)[outside] <= tol * np.maximum(1.0, np.abs(a_oo))[outside]))


# ---------------------------------------------------------------------------
# Exhaustive small-graph enumeration

def enumerate_canonical_dags(p_o: int, p_l: int) -> Iterator[CanonicalDag]:
    """Canonical graphs on ``p_o`` observed and ``p_l`` latent nodes, one per labeling class.

    Observed edges only run from lower to higher id (every DAG has such a
    labeling) and latent child sets are taken as a multiset, so every graph
    is covered up to relabeling.
    """
    obs = list(range(p_o))
    pairs = list(itertools.combinations(obs, 2))
    subsets = [s for r in range(2, p_o + 1) for s in itertools.combinations(obs, r)]
    for mask in range(1 << len(pairs)):
        oe = [pairs[b] for b in range(len(pairs)) if (mask >> b) & 1]
        for chsets in itertools.combinations_with_replacement(subsets, p_l):
            edges = list(oe)
            for k, ch in enumerate(chsets):
                edges += [(p_o + k, c) for c in ch]
            yield CanonicalDag(tuple(obs), tuple(range(p_o, p_o + p_l)), frozenset(edges))


def in_scope_queries(dag: LvDag) -> list[IdQuery]:
    """TCE queries with ``i`` a strict observed descendant of ``j``, DCE queries on edges, both settings."""
    out = []
    for j in dag.observed:
        for i in dag.observed:
            if i == j:
                continue
            for s in Setting:
                if i in dag.observed_descendants(j):
                    out.append(IdQuery(Kind.TOTAL, s, j, i))
                if (j, i) in dag.edges:
                    out.append(IdQuery(Kind.DIRECT, s, j, i))
    return out


__all__ = [
    "ColumnPermutation", "GraphTooLargeForEnumeration", "OracleVerdict", "PreconditionViolated",
    "RecoveredModel", "SingularObservedBlock", "bruteforce_identifiable", "bruteforce_verdicts",
    "candidate_permutations", "enumerate_canonical_dags", "generic_weights",
    "gessel_viennot_minor", "in_scope_queries", "path_sum_total_effect",
    "path_systems", "recover_model", "swapped_adjacency_check", "swapped_adjacency_prediction",
    "valid_permutations",
]
