"""Mixing matrices of canonical models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import LvDag, WeightedModel


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """The ``p_o x p`` matrix taking all exogenous noises to observed variables.

    ``rows`` lists the observed node behind each row; ``columns`` lists the node
    behind each column, observed nodes first (same order as ``rows``) then
    latent nodes.
    """

    values: np.ndarray
    rows: tuple[int, ...]
    columns: tuple[int, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.rows), len(self.columns)):
            raise ValueError(f"shape {v.shape} does not match roles "
                             f"({len(self.rows)}, {len(self.columns)})")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "columns", tuple(self.columns))

    @classmethod
    def for_dag(cls, dag: LvDag, values: np.ndarray) -> "MixingMatrix":
        return cls(values, dag.observed, dag.observed + dag.latent)

    @property
    def p_o(self) -> int:
        return len(self.rows)

    @property
    def observed_block(self) -> np.ndarray:
        return self.values[:, : self.p_o]

    @property
    def latent_block(self) -> np.ndarray:
        return self.values[:, self.p_o:]

    def entry(self, i: int, j: int) -> float:
        """Total effect of node ``j`` on observed node ``i``."""
        return float(self.values[self.rows.index(i), self.columns.index(j)])


def split_adjacency(model: WeightedModel) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(A_oo, A_ol)`` with rows/columns in ascending id order."""
    dag = model.dag
    a = model.adjacency()
    o, lat = list(dag.observed), list(dag.latent)
    return a[np.ix_(o, o)], a[np.ix_(o, lat)]


def mixing_from_blocks(a_oo: np.ndarray, a_ol: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b_o = np.linalg.solve(np.eye(a_oo.shape[0]) - a_oo, np.eye(a_oo.shape[0]))
    return b_o, b_o @ a_ol


def build_mixing(model: WeightedModel) -> MixingMatrix:
    """``[B_o, B_l]`` with ``B_o = (I - A_oo)^-1`` and ``B_l = B_o A_ol``."""
    b_o, b_l = mixing_from_blocks(*split_adjacency(model))
    return MixingMatrix.for_dag(model.dag, np.hstack([b_o, b_l]))
