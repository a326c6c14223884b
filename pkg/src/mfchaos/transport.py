"""Empirical measures and exact optimal-transport distances.

The exact path solves the dense transportation program with the
network simplex in :mod:`mfchaos._netsimplex`.  Two special cases keep
the common workloads fast without giving up exactness: equal-size
uniform clouds on the line use the sorted pairing, and equal-size
uniform clouds in any dimension may use an exact assignment solve (the
transport polytope with uniform marginals has permutation optima).
Instances above the configured exact limit require the explicit
entropic approximation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from ._netsimplex import solve_dense

__all__ = [
    "EmpiricalMeasure",
    "MeasurePath",
    "TransportResult",
    "solve_transport",
    "w1",
    "w2",
    "path_distance",
    "shift_stability",
    "certificate_residuals",
    "sinkhorn_cost",
]

DEFAULT_EXACT_LIMIT = 4096


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted point cloud with unit total mass and finite first moment."""

    points: np.ndarray           # (n, d)
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a (n >= 1, d) matrix")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite (first moment must exist)")
        if self.weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.ascontiguousarray(self.weights, dtype=np.float64)
            if w.shape != (pts.shape[0],):
                raise ValueError("weights must have one entry per point")
            if np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be positive and finite")
            total = w.sum()
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"weights must sum to 1 (got {total!r})")
            if abs(total - 1.0) > 1e-12:  # keep construction idempotent
                w = w / total
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        pts.setflags(write=False)
        w.setflags(write=False)

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def is_uniform(self) -> bool:
        w = self.weights
        return bool(np.all(w == w[0]))

    def first_moment(self) -> float:
        return float(self.weights @ np.sqrt(np.sum(self.points**2, axis=1)))

    def translated(self, c: np.ndarray) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.points + np.asarray(c, dtype=float), self.weights.copy())


@dataclass(frozen=True)
class MeasurePath:
    """One empirical measure per time on a strictly increasing grid."""

    times: np.ndarray
    measures: tuple

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.shape[0] != len(self.measures):
            raise ValueError("need one measure per time point")
        if times.shape[0] > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "measures", tuple(self.measures))

    @staticmethod
    def from_clouds(times, clouds) -> "MeasurePath":
        return MeasurePath(np.asarray(times, dtype=float),
                           tuple(EmpiricalMeasure(c) for c in clouds))

    def __len__(self) -> int:
        return len(self.measures)


@dataclass(frozen=True)
class TransportResult:
    """Optimal (or entropically approximate) coupling summary."""

    cost: float               # optimal sum of flow * cost entries
    value: float              # the distance (cost for p=1, sqrt(cost) for p=2)
    p: int
    method: str
    plan_i: np.ndarray | None = None
    plan_j: np.ndarray | None = None
    plan_flow: np.ndarray | None = None
    dual_source: np.ndarray | None = None
    dual_target: np.ndarray | None = None
    exact: bool = True


def _cost_matrix(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: int) -> np.ndarray:
    metric = "euclidean" if p == 1 else "sqeuclidean"
    return cdist(mu.points, nu.points, metric=metric)


def _sorted_line(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: int) -> TransportResult:
    x = np.sort(mu.points[:, 0])
    y = np.sort(nu.points[:, 0])
    diffs = np.abs(x - y)
    cost = float(np.mean(diffs if p == 1 else diffs**2))
    order_x = np.argsort(mu.points[:, 0], kind="stable")
    order_y = np.argsort(nu.points[:, 0], kind="stable")
    n = mu.num_points
    return TransportResult(
        cost=cost,
        value=cost if p == 1 else float(np.sqrt(max(cost, 0.0))),
        p=p,
        method="sorted",
        plan_i=order_x,
        plan_j=order_y,
        plan_flow=np.full(n, 1.0 / n),
    )


def _assignment(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: int) -> TransportResult:
    C = _cost_matrix(mu, nu, p)
    rows, cols = linear_sum_assignment(C)
    n = mu.num_points
    cost = float(C[rows, cols].mean())
    return TransportResult(
        cost=cost,
        value=cost if p == 1 else float(np.sqrt(max(cost, 0.0))),
        p=p,
        method="assignment",
        plan_i=rows,
        plan_j=cols,
        plan_flow=np.full(n, 1.0 / n),
    )


def _network_simplex(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: int) -> TransportResult:
    C = _cost_matrix(mu, nu, p)
    bi, bj, bf, u, v, cost = solve_dense(
        mu.weights, nu.weights, C, row_key=mu.points[:, 0], col_key=nu.points[:, 0]
    )
    keep = bf > 0.0
    return TransportResult(
        cost=cost,
        value=cost if p == 1 else float(np.sqrt(max(cost, 0.0))),
        p=p,
        method="network_simplex",
        plan_i=bi[keep],
        plan_j=bj[keep],
        plan_flow=bf[keep],
        dual_source=u,
        dual_target=v,
    )


def sinkhorn_cost(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    p: int = 1,
    epsilon: float = 0.01,
    max_iter: int = 5000,
    tol: float = 1e-9,
) -> TransportResult:
    """Entropic approximation (log-domain); reported as non-exact."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    C = _cost_matrix(mu, nu, p)
    la = np.log(mu.weights)
    lb = np.log(nu.weights)
    f = np.zeros(mu.num_points)
    g = np.zeros(nu.num_points)
    for _ in range(max_iter):
        M = (f[:, None] + g[None, :] - C) / epsilon
        f = f + epsilon * (la - _logsumexp_rows(M))
        M = (f[:, None] + g[None, :] - C) / epsilon
        g = g + epsilon * (lb - _logsumexp_rows(M.T))
        M = (f[:, None] + g[None, :] - C) / epsilon
        P = np.exp(M)
        err = max(np.abs(P.sum(axis=1) - mu.weights).max(), np.abs(P.sum(axis=0) - nu.weights).max())
        if err < tol:
            break
    cost = float(np.sum(P * C))
    return TransportResult(
        cost=cost,
        value=cost if p == 1 else float(np.sqrt(max(cost, 0.0))),
        p=p,
        method="sinkhorn",
        dual_source=f,
        dual_target=g,
        exact=False,
    )


def _logsumexp_rows(M: np.ndarray) -> np.ndarray:
    mx = M.max(axis=1)
    return mx + np.log(np.sum(np.exp(M - mx[:, None]), axis=1))


def solve_transport(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    p: int = 1,
    method: str = "auto",
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    epsilon: float | None = None,
) -> TransportResult:
    """Optimal transport between two empirical measures with cost |x-y|^p."""
    if p not in (1, 2):
        raise ValueError("only p in {1, 2} is supported")
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    uniform_pair = (
        mu.num_points == nu.num_points and mu.is_uniform and nu.is_uniform
    )
    if method == "auto":
        if epsilon is not None:
            method = "sinkhorn"
        elif mu.num_points > exact_limit or nu.num_points > exact_limit:
            raise ValueError(
                f"instance size ({mu.num_points} x {nu.num_points}) exceeds the exact-solver "
                f"limit {exact_limit}; raise the limit or pass an entropic epsilon"
            )
        elif mu.dim == 1 and uniform_pair:
            method = "sorted"
        elif uniform_pair:
            method = "assignment"
        else:
            method = "network_simplex"
    if method == "sorted":
        if not (mu.dim == 1 and uniform_pair):
            raise ValueError("sorted method needs 1-d equal-size uniform clouds")
        return _sorted_line(mu, nu, p)
    if method == "assignment":
        if not uniform_pair:
            raise ValueError("assignment method needs equal-size uniform clouds")
        return _assignment(mu, nu, p)
    if method == "network_simplex":
        return _network_simplex(mu, nu, p)
    if method == "sinkhorn":
        return sinkhorn_cost(mu, nu, p, epsilon if epsilon is not None else 0.01)
    raise ValueError(f"unknown method {method!r}")


def w1(mu: EmpiricalMeasure, nu: EmpiricalMeasure, **kwargs) -> float:
    """Exact first-order transport distance (optimal coupling cost)."""
    return solve_transport(mu, nu, p=1, **kwargs).value


def w2(mu: EmpiricalMeasure, nu: EmpiricalMeasure, **kwargs) -> float:
    """Exact second-order transport distance (root of optimal squared cost)."""
    return solve_transport(mu, nu, p=2, **kwargs).value


def path_distance(mu_path: MeasurePath, nu_path: MeasurePath, p: int = 1, **kwargs) -> float:
    """Largest transport distance over a shared time grid."""
    if len(mu_path) != len(nu_path) or not np.allclose(
        mu_path.times, nu_path.times, rtol=0.0, atol=1e-12
    ):
        raise ValueError("paths must share the same time grid")
    worst = 0.0
    for m, n in zip(mu_path.measures, nu_path.measures):
        worst = max(worst, solve_transport(m, n, p=p, **kwargs).value)
    return worst


def shift_stability(
    mu: EmpiricalMeasure, nu: EmpiricalMeasure, c: np.ndarray, **kwargs
) -> tuple[float, float]:
    """Distance before and after translating both clouds by c."""
    base = w1(mu, nu, **kwargs)
    shifted = w1(mu.translated(c), nu.translated(c), **kwargs)
    return base, shifted


def certificate_residuals(
    mu: EmpiricalMeasure, nu: EmpiricalMeasure, result: TransportResult
) -> dict:
    """Optimality certificate from the dual potentials.

    Returns dual feasibility violation, complementary-slackness residual
    on the support, marginal defects of the plan, and the duality gap.
    All four vanish (to rounding) at an exact optimum.
    """
    if result.dual_source is None or result.plan_i is None:
        raise ValueError("result carries no dual potentials / plan")
    C = _cost_matrix(mu, nu, result.p)
    u, v = result.dual_source, result.dual_target
    red = C - u[:, None] - v[None, :]
    dual_violation = float(max(0.0, -red.min()))
    slack = float(np.abs(red[result.plan_i, result.plan_j]).max())
    row = np.zeros(mu.num_points)
    col = np.zeros(nu.num_points)
    np.add.at(row, result.plan_i, result.plan_flow)
    np.add.at(col, result.plan_j, result.plan_flow)
    marginal = float(
        max(np.abs(row - mu.weights).max(), np.abs(col - nu.weights).max())
    )
    gap = float(abs(result.cost - (mu.weights @ u + nu.weights @ v)))
    return {
        "dual_feasibility": dual_violation,
        "complementary_slackness": slack,
        "marginal_residual": marginal,
        "duality_gap": gap,
    }
