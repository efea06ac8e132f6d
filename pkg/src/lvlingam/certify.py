"""Graphical certificates for generic identifiability of causal effects.

Each check scans latent nodes in topological order and stops at the first one
that satisfies the relevant non-identifiability conditions; that node (or the
pair/triple around it) is returned as the witness.

Only a latent whose topologically first child is ``k`` can share its observed
descendant set with ``k``: every other child of such a latent is a descendant
of ``k`` and hence comes later. All scans use this to skip most latents.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

from .graph import CanonicalDag, GraphError, LvDag, validate


class Kind(enum.Enum):
    TOTAL = "tce"
    DIRECT = "dce"
    MATRIX = "matrix"


class Setting(enum.Enum):
    KNOWN = "known"
    UNKNOWN = "unknown"


class NotObserved(GraphError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"node {node!r} is not observed")


class SameNode(GraphError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"source and target are the same node {node!r}")


@dataclass(frozen=True)
class IdQuery:
    kind: Kind
    setting: Setting
    source: int | None = None
    target: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "setting", Setting(self.setting))
        if self.kind is not Kind.MATRIX:
            if self.source is None or self.target is None:
                raise ValueError("pairwise queries need a source and a target")
            if self.source == self.target:
                raise SameNode(self.source)


@dataclass(frozen=True)
class IdVerdict:
    """Answer to an :class:`IdQuery`.

    ``witness`` is ``None`` when identifiable. Otherwise it is ``(l,)`` for a
    total effect, ``(k, l)`` for a direct effect and ``(i, j, l)`` for the
    full matrix. A direct-effect witness found through several composed
    column swaps also lists every ``(k, l)`` pair in ``chain``.
    """

    identifiable: bool
    kind: Kind
    setting: Setting
    witness: tuple[int, ...] | None = None
    structurally_zero: bool = False
    chain: tuple[tuple[int, int], ...] | None = None

    def witness_dict(self, dag: LvDag | None = None) -> dict | None:
        if self.witness is None:
            return None
        keys = {Kind.TOTAL: ("latent",), Kind.DIRECT: ("observed", "latent"),
                Kind.MATRIX: ("target", "source", "latent")}[self.kind]
        name = (lambda v: v) if dag is None or dag.names is None else dag.name
        out = {k: name(v) for k, v in zip(keys, self.witness)}
        if self.chain is not None and len(self.chain) > 1:
            out["chain"] = [[name(k), name(l)] for k, l in self.chain]
        return out

    def to_json(self, dag: LvDag | None = None) -> dict:
        return {
            "identifiable": self.identifiable,
            "witness": self.witness_dict(dag),
            "structurally_zero": self.structurally_zero,
            "setting": self.setting.value,
            "kind": self.kind.value,
        }


def _check_pair(dag: LvDag, j: int, i: int) -> None:
    for v in (j, i):
        dag._check(v)
        if dag.is_latent(v):
            raise NotObserved(v)
    if i == j:
        raise SameNode(i)


def _latents_first_child(dag: CanonicalDag, k: int):
    """Latents ``l`` with first child ``k`` and equal observed descendants, in topological order."""
    de = dag._de_o_bits
    for l in _latents_by_position(dag):
        if dag.first_child(l) == k and de[l] == de[k]:
            yield l


def _latents_by_position(dag: CanonicalDag) -> list[int]:
    pos = dag.position
    return sorted(dag.latent, key=pos.__getitem__)


def _covered(dag: CanonicalDag, l: int, k: int) -> bool:
    """Whether every child of ``l`` other than ``k`` is a child of each of ``pa(k) | {k}``."""
    rest = dag._children_bits[l] & ~(1 << k)
    chb = dag._children_bits
    return all(rest & ~chb[m] == 0 for m in (*dag._parents[k], k))


def _total(dag: CanonicalDag, j: int, i: int, known: bool) -> IdVerdict:
    _check_pair(dag, j, i)
    setting = Setting.KNOWN if known else Setting.UNKNOWN
    zero = i not in dag.observed_descendants(j)
    for l in _latents_first_child(dag, j):
        if i not in dag.observed_descendants_cut(l, j):
            continue
        if known and not _covered(dag, l, j):
            continue
        return IdVerdict(False, Kind.TOTAL, setting, (l,), zero)
    return IdVerdict(True, Kind.TOTAL, setting, None, zero)


def _swap_pairs(dag: CanonicalDag) -> dict[int, list[int]]:
    """Observed ``k`` -> latents with first child ``k`` and equal observed descendants."""
    pairs: dict[int, list[int]] = {}
    de = dag._de_o_bits
    for l in _latents_by_position(dag):
        k = dag.first_child(l)
        if de[l] == de[k]:
            pairs.setdefault(k, []).append(l)
    return pairs


def _direct(dag: CanonicalDag, j: int, i: int, known: bool) -> IdVerdict:
    _check_pair(dag, j, i)
    setting = Setting.KNOWN if known else Setting.UNKNOWN
    zero = (j, i) not in dag.edges
    pairs = _swap_pairs(dag)
    starts = [(k, l) for k in sorted({j, *dag.children(j)}, key=dag.position.__getitem__)
              for l in pairs.get(k, ())]
    if known:
        for k, l in starts:
            if i != k and i in dag.children_set(l) and _covered(dag, l, k):
                return IdVerdict(False, Kind.DIRECT, setting, (k, l), zero)
        return IdVerdict(True, Kind.DIRECT, setting, None, zero)
    # Without the graph, swaps compose: swapping (k, l) makes every parent of
    # k a parent of each other child of l, which a later swap at that child
    # can carry further. Search the chains breadth first.
    prev: dict[tuple[int, int], tuple[int, int] | None] = {s: None for s in starts}
    queue = deque(starts)
    while queue:
        k, l = queue.popleft()
        if i != k and i in dag.children_set(l):
            chain = [(k, l)]
            while prev[chain[-1]] is not None:
                chain.append(prev[chain[-1]])
            return IdVerdict(False, Kind.DIRECT, setting, (k, l), zero, tuple(reversed(chain)))
        for c in dag.sorted_children(l):
            if c == k:
                continue
            for nl in pairs.get(c, ()):
                if (c, nl) not in prev:
                    prev[(c, nl)] = (k, l)
                    queue.append((c, nl))
    return IdVerdict(True, Kind.DIRECT, setting, None, zero)


def _matrix(dag: CanonicalDag, known: bool) -> IdVerdict:
    setting = Setting.KNOWN if known else Setting.UNKNOWN
    for l in _latents_by_position(dag):
        j = dag.first_child(l)
        if dag._de_o_bits[l] != dag._de_o_bits[j]:
            continue
        if known and not _covered(dag, l, j):
            continue
        i = next(c for c in dag.sorted_children(l) if c != j)
        return IdVerdict(False, Kind.MATRIX, setting, (i, j, l))
    return IdVerdict(True, Kind.MATRIX, setting)


def tce_unknown(dag: CanonicalDag, j: int, i: int) -> IdVerdict:
    """Total effect of ``j`` on ``i`` when the graph is not available."""
    return _total(validate(dag), j, i, known=False)


def tce_known(dag: CanonicalDag, j: int, i: int) -> IdVerdict:
    """Total effect of ``j`` on ``i`` when the graph is available."""
    return _total(validate(dag), j, i, known=True)


def dce_unknown(dag: CanonicalDag, j: int, i: int) -> IdVerdict:
    """Direct effect of ``j`` on ``i`` when the graph is not available."""
    return _direct(validate(dag), j, i, known=False)


def dce_known(dag: CanonicalDag, j: int, i: int) -> IdVerdict:
    """Direct effect of ``j`` on ``i`` when the graph is available."""
    return _direct(validate(dag), j, i, known=True)


def matrix_unknown(dag: CanonicalDag) -> IdVerdict:
    """Whole observed block of the mixing matrix, graph not available."""
    return _matrix(validate(dag), known=False)


def matrix_known(dag: CanonicalDag) -> IdVerdict:
    """Whole observed block of the mixing matrix, graph available."""
    return _matrix(validate(dag), known=True)


def certify(dag: CanonicalDag, query: IdQuery) -> IdVerdict:
    known = query.setting is Setting.KNOWN
    if query.kind is Kind.MATRIX:
        return _matrix(validate(dag), known)
    if query.kind is Kind.TOTAL:
        return _total(validate(dag), query.source, query.target, known)
    return _direct(validate(dag), query.source, query.target, known)
