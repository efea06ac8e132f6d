"""Graph-constrained contrast minimization over the free edge weights of a canonical model.

The search space is the set of weightings of a fixed canonical graph, so the
number of free parameters is the edge count minus one scaling edge per latent.
Two families of contrasts are available:

* componentwise contrasts (:class:`SmoothL1`, :class:`LogCosh`) averaged over
  the demixed samples ``B'^T x``;
* :class:`CumulantMatch`, a least-squares fit of the sample cumulant tensors of
  orders 2-4 by the cumulants implied by ``B'``. This is the default for
  :func:`estimate` because it is consistent: the componentwise contrasts are
  minimized away from the true weights whenever ``B'`` is not square.

Gradients are exact and use ``dB_o = B_o dA_oo B_o`` and
``dB_l = B_o dA_oo B_l + B_o dA_ol``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np
from scipy.optimize import minimize

from .graph import CanonicalDag, Edge, WeightedModel, model_to_json, unit_free_model, validate
from .mixing import MixingMatrix, build_mixing, mixing_from_blocks
from .sem import Dataset, DimensionMismatch

log = logging.getLogger(__name__)


class NonFiniteObjective(RuntimeError):
    pass


class ZeroTrueValue(ZeroDivisionError):
    pass


# ---------------------------------------------------------------------------
# Contrasts

class Contrast(Protocol):
    def prepare(self, x: np.ndarray): ...

    def value_grad(self, state, bprime: np.ndarray) -> tuple[float, np.ndarray]:
        """Objective and its gradient with respect to ``B'`` (shape ``p_o x p``)."""


@dataclass(frozen=True)
class SmoothL1:
    """``g(u) = log(cosh(beta u)) / beta``, a smooth stand-in for ``|u|``."""

    beta: float = 10.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    def g(self, u: np.ndarray) -> np.ndarray:
        z = self.beta * np.abs(u)
        return (z + np.log1p(np.exp(-2 * z)) - math.log(2)) / self.beta

    def dg(self, u: np.ndarray) -> np.ndarray:
        return np.tanh(self.beta * u)

    def prepare(self, x: np.ndarray) -> np.ndarray:
        return x

    def value_grad(self, x: np.ndarray, bprime: np.ndarray) -> tuple[float, np.ndarray]:
        s = x @ bprime
        n = max(x.shape[0], 1)
        return float(self.g(s).sum() / n), x.T @ self.dg(s) / n


@dataclass(frozen=True)
class LogCosh(SmoothL1):
    """``g(u) = scale * log(cosh(u / scale))``."""

    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "beta", 1.0 / self.scale)


@dataclass(frozen=True)
class CumulantMatch:
    """Least-squares match of sample cumulant tensors.

    For each order ``r`` the residual ``C_r - sum_c k_rc b_c^{(x)r}`` is
    minimized over the per-column cumulants ``k_rc`` in closed form, leaving
    a function of ``B'`` alone. Data are centered and divided by one common
    scalar, which leaves ``B'`` unchanged.
    """

    orders: tuple[int, ...] = (2, 3, 4)

    def __post_init__(self):
        if not self.orders or any(r not in (2, 3, 4) for r in self.orders):
            raise ValueError("orders must be drawn from 2, 3, 4")

    def prepare(self, x: np.ndarray) -> list[tuple[int, np.ndarray]]:
        n, d = x.shape
        xc = x - x.mean(axis=0)
        scale = math.sqrt(float(np.mean(xc.var(axis=0)))) or 1.0
        xc = xc / scale
        out = []
        c2 = xc.T @ xc / n
        for r in self.orders:
            if r == 2:
                t = c2
            elif r == 3:
                z = (xc[:, :, None] * xc[:, None, :]).reshape(n, d * d)
                t = (z.T @ xc / n).reshape(d, d, d)
            else:
                z = (xc[:, :, None] * xc[:, None, :]).reshape(n, d * d)
                m4 = (z.T @ z / n).reshape(d, d, d, d)
                t = (m4 - np.einsum("ij,kl->ijkl", c2, c2) - np.einsum("ik,jl->ijkl", c2, c2)
                     - np.einsum("il,jk->ijkl", c2, c2))
            out.append((r, t))
        return out

    def value_grad(self, state, bprime: np.ndarray) -> tuple[float, np.ndarray]:
        total = 0.0
        grad = np.zeros_like(bprime)
        gram = bprime.T @ bprime
        for r, t in state:
            proj = _contract_all(t, bprime, r)
            kappa = np.linalg.lstsq(gram ** r, proj, rcond=None)[0]
            resid = t - _outer_sum(bprime, kappa, r)
            total += float(np.sum(resid * resid))
            grad -= 2 * r * _contract_but_one(resid, bprime, r) * kappa
        return total, grad


def _contract_all(t: np.ndarray, b: np.ndarray, r: int) -> np.ndarray:
    """``<T, b_c^{(x)r}>`` for every column ``c``."""
    return np.einsum(_SPEC_ALL[r], t, *([b] * r))


def _contract_but_one(t: np.ndarray, b: np.ndarray, r: int) -> np.ndarray:
    """Column ``c`` holds ``T`` contracted with ``b_c`` in all but the first slot."""
    return np.einsum(_SPEC_BUT_ONE[r], t, *([b] * (r - 1)))


def _outer_sum(b: np.ndarray, kappa: np.ndarray, r: int) -> np.ndarray:
    return np.einsum(_SPEC_OUTER[r], kappa, *([b] * r))


_SPEC_ALL = {2: "ij,ic,jc->c", 3: "ijk,ic,jc,kc->c", 4: "ijkl,ic,jc,kc,lc->c"}
_SPEC_BUT_ONE = {2: "ij,jc->ic", 3: "ijk,jc,kc->ic", 4: "ijkl,jc,kc,lc->ic"}
_SPEC_OUTER = {2: "c,ic,jc->ij", 3: "c,ic,jc,kc->ijk", 4: "c,ic,jc,kc,lc->ijkl"}


# ---------------------------------------------------------------------------
# Objective and gradient over free edges

class _Problem:
    """Maps free weights to ``B'`` and pulls ``B'`` gradients back to the weights."""

    def __init__(self, dag: CanonicalDag, contrast, x: np.ndarray):
        self.dag = validate(dag)
        self.contrast = contrast
        self.base = unit_free_model(self.dag)
        self.free = self.base.free_edges
        obs, lat = self.dag.observed, self.dag.latent
        pos = {v: r for r, v in enumerate(obs)}
        lpos = {v: r for r, v in enumerate(lat)}
        self.a_oo0 = np.zeros((len(obs), len(obs)))
        self.a_ol0 = np.zeros((len(obs), len(lat)))
        for l, c in self.base.scaling_edges:
            self.a_ol0[pos[c], lpos[l]] = 1.0
        self.oo_idx = [(k, pos[v], pos[u]) for k, (u, v) in enumerate(self.free) if u in pos]
        self.ol_idx = [(k, pos[v], lpos[u]) for k, (u, v) in enumerate(self.free) if u in lpos]
        self.state = contrast.prepare(x)

    def blocks(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a_oo, a_ol = self.a_oo0.copy(), self.a_ol0.copy()
        for k, r, c in self.oo_idx:
            a_oo[r, c] = theta[k]
        for k, r, c in self.ol_idx:
            a_ol[r, c] = theta[k]
        return a_oo, a_ol

    def bprime(self, theta: np.ndarray) -> np.ndarray:
        return np.hstack(mixing_from_blocks(*self.blocks(theta)))

    def value_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        b_o, b_l = mixing_from_blocks(*self.blocks(theta))
        f, gb = self.contrast.value_grad(self.state, np.hstack([b_o, b_l]))
        p_o = b_o.shape[0]
        m, m_l = gb[:, :p_o], gb[:, p_o:]
        g_oo = b_o.T @ m @ b_o.T + b_o.T @ m_l @ b_l.T
        g_ol = b_o.T @ m_l
        grad = np.zeros(len(self.free))
        for k, r, c in self.oo_idx:
            grad[k] = g_oo[r, c]
        for k, r, c in self.ol_idx:
            grad[k] = g_ol[r, c]
        return f, grad


def _data_matrix(model_dag, data: Dataset | np.ndarray) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.aligned(model_dag)
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[1] != model_dag.p_o:
        raise DimensionMismatch(f"expected {model_dag.p_o} columns, got shape {x.shape}")
    return x


def objective(model: WeightedModel, data: Dataset | np.ndarray, contrast=None) -> float:
    """Contrast of ``data`` under the mixing matrix of ``model``.

    For componentwise contrasts this is ``mean_i sum_c g((B'^T x_i)_c)``.
    """
    contrast = contrast if contrast is not None else SmoothL1()
    prob = _Problem(model.dag, contrast, _data_matrix(model.dag, data))
    return prob.value_grad(model.free_vector())[0]


def gradient(model: WeightedModel, data: Dataset | np.ndarray, contrast=None) -> np.ndarray:
    """Gradient of :func:`objective` with respect to ``model.free_edges``."""
    contrast = contrast if contrast is not None else SmoothL1()
    prob = _Problem(model.dag, contrast, _data_matrix(model.dag, data))
    return prob.value_grad(model.free_vector())[1]


# ---------------------------------------------------------------------------
# Estimation

@dataclass(frozen=True)
class EstimatorConfig:
    """Settings for :func:`estimate`.

    Restart 0 starts from ``warm`` (or zeros); later restarts add Gaussian
    noise of standard deviation ``init_scale`` to that point.
    """

    contrast: object = field(default_factory=CumulantMatch)
    optimizer: str = "lbfgs"
    step_size: float = 0.01
    max_iter: int = 2000
    tol: float = 1e-7
    restarts: int = 5
    init_scale: float = 0.1
    warm: Mapping[Edge, float] | None = None
    standardize: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("lbfgs", "adam"):
            raise ValueError("optimizer must be 'lbfgs' or 'adam'")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.step_size <= 0 or self.init_scale < 0 or self.max_iter < 1 or self.tol <= 0:
            raise ValueError("step_size, max_iter and tol must be positive")


@dataclass(frozen=True)
class RestartRecord:
    start: tuple[float, ...]
    objective: float
    iterations: int
    grad_norm: float
    converged: bool
    message: str


@dataclass(frozen=True, eq=False)
class EstimateReport:
    model: WeightedModel
    bprime: MixingMatrix
    restarts: tuple[RestartRecord, ...]
    chosen: int

    @property
    def objective(self) -> float:
        return self.restarts[self.chosen].objective

    def weight(self, u: int, v: int) -> float:
        return self.model.weights[(u, v)]

    def to_json(self) -> dict:
        return {
            "model": model_to_json(self.model),
            "bprime": {"rows": list(self.bprime.rows), "columns": list(self.bprime.columns),
                       "values": self.bprime.values.tolist()},
            "restarts": [{"start": list(r.start), "objective": r.objective,
                          "iterations": r.iterations, "grad_norm": r.grad_norm,
                          "converged": r.converged, "message": r.message}
                         for r in self.restarts],
            "chosen": self.chosen,
        }


def _lbfgs(prob: _Problem, x0: np.ndarray, cfg: EstimatorConfig):
    res = minimize(prob.value_grad, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": cfg.max_iter, "gtol": cfg.tol, "ftol": 1e-15})
    return res.x, float(res.fun), int(res.nit), bool(res.success), str(res.message)


def _adam(prob: _Problem, x0: np.ndarray, cfg: EstimatorConfig):
    x = x0.copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2, eps = 0.9, 0.999, 1e-12
    f = float("nan")
    for t in range(1, cfg.max_iter + 1):
        f, g = prob.value_grad(x)
        if not np.isfinite(f):
            return x, f, t, False, "non-finite objective"
        if np.max(np.abs(g), initial=0.0) < cfg.tol:
            return x, f, t, True, "gradient below tolerance"
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x = x - cfg.step_size * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    f = prob.value_grad(x)[0]
    return x, f, cfg.max_iter, False, "iteration limit reached"


def _unstandardize(model: WeightedModel, sd: np.ndarray) -> WeightedModel:
    """Map weights fitted on column-standardized data back to the original scale."""
    dag = model.dag
    s = {v: sd[r] for r, v in enumerate(dag.observed)}
    for l in dag.latent:
        s[l] = s[dag.first_child(l)]
    return WeightedModel(dag, {(u, v): w * s[v] / s[u] for (u, v), w in model.weights.items()})


def estimate(dag: CanonicalDag, data: Dataset | np.ndarray, config: EstimatorConfig | None = None
             ) -> EstimateReport:
    """Minimize the configured contrast over the free weights of ``dag``; keep the best restart."""
    cfg = config or EstimatorConfig()
    dag = validate(dag)
    x = _data_matrix(dag, data)
    if x.shape[0] < dag.p:
        raise DimensionMismatch(f"need at least {dag.p} samples, got {x.shape[0]}")
    sd = None
    if cfg.standardize:
        sd = x.std(axis=0)
        sd[sd == 0] = 1.0
        x = x / sd
    prob = _Problem(dag, cfg.contrast, x)
    base = np.zeros(len(prob.free))
    if cfg.warm is not None:
        warm = {(int(u), int(v)): float(w) for (u, v), w in dict(cfg.warm).items()}
        base = np.array([warm.get(e, 0.0) for e in prob.free])
        if sd is not None:
            scaled = _unstandardize(prob.base.with_free(base), 1.0 / sd)
            base = scaled.free_vector()
    rng = np.random.default_rng(cfg.seed)
    run = _lbfgs if cfg.optimizer == "lbfgs" else _adam
    records, thetas = [], []
    for r in range(cfg.restarts):
        x0 = base if r == 0 else base + rng.normal(0.0, cfg.init_scale, len(base))
        try:
            theta, f, nit, ok, msg = run(prob, x0, cfg)
            g = prob.value_grad(theta)[1] if np.isfinite(f) else np.full(len(theta), np.nan)
        except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            theta, f, nit, ok, msg, g = x0, float("nan"), 0, False, str(exc), np.full(len(x0), np.nan)
        if not np.isfinite(f):
            log.warning("restart %d diverged: %s", r, msg)
        gn = float(np.max(np.abs(g), initial=0.0)) if np.all(np.isfinite(g)) else float("nan")
        records.append(RestartRecord(tuple(map(float, x0)), float(f), nit, gn, ok, msg))
        thetas.append(theta)
    finite = [r for r, rec in enumerate(records) if np.isfinite(rec.objective)]
    if not finite:
        raise NonFiniteObjective("every restart diverged")
    best = min(finite, key=lambda r: records[r].objective)
    model = prob.base.with_free(thetas[best])
    if sd is not None:
        model = _unstandardize(model, sd)
    return EstimateReport(model, build_mixing(model), tuple(records), best)


# ---------------------------------------------------------------------------
# Metrics

def relative_error(estimated: float, truth: float) -> float:
    """``|estimated - truth| / |truth|``."""
    if truth == 0:
        raise ZeroTrueValue("relative error of a zero true value")
    return abs(estimated - truth) / abs(truth)


def frobenius_loss(estimated: np.ndarray | MixingMatrix, truth: np.ndarray | MixingMatrix) -> float:
    """``||B_est - B||_F / ||B||_F``."""
    e = estimated.values if isinstance(estimated, MixingMatrix) else np.asarray(estimated)
    t = truth.values if isinstance(truth, MixingMatrix) else np.asarray(truth)
    if e.shape != t.shape:
        raise DimensionMismatch(f"shapes {e.shape} and {t.shape} differ")
    norm = np.linalg.norm(t)
    if norm == 0:
        raise ZeroTrueValue("Frobenius loss against a zero matrix")
    return float(np.linalg.norm(e - t) / norm)


@dataclass(frozen=True)
class MetricReport:
    edge_errors: dict[Edge, float]
    frobenius: float


def metrics(estimated: WeightedModel | MixingMatrix, truth: WeightedModel | MixingMatrix,
            edges: Sequence[Edge] = ()) -> MetricReport:
    """Relative error of each edge in ``edges`` and Frobenius loss of the mixing matrices."""
    errs = {}
    if edges:
        if not isinstance(estimated, WeightedModel) or not isinstance(truth, WeightedModel):
            raise TypeError("edge errors need weighted models")
        errs = {e: relative_error(estimated.weights[e], truth.weights[e]) for e in edges}
    be = build_mixing(estimated) if isinstance(estimated, WeightedModel) else estimated
    bt = build_mixing(truth) if isinstance(truth, WeightedModel) else truth
    return MetricReport(errs, frobenius_loss(be, bt))
