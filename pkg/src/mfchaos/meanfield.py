"""Limit measure construction by iterating the frozen-drift update map.

A candidate measure path freezes the drift; integrating the flow of a
reference cloud under that drift and the shared noise, and pushing the
initial cloud forward, produces the next candidate.  On subintervals
short enough for the update to contract, the iteration converges
geometrically to the unique fixed point, which also solves the limit
equation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .brownian import BrownianPath
from .dynamics import COMMON, Trajectory, _advance, _check_path, _guard
from .kernels import InteractionKernel, interaction_drift
from .noise import NoiseModel
from .transport import EmpiricalMeasure, MeasurePath, solve_transport

__all__ = [
    "PicardState",
    "PicardNoConvergence",
    "frozen_drift_flow",
    "picard_fixed_point",
    "limit_sde_solve",
    "contraction_interval",
]


class PicardNoConvergence(RuntimeError):
    """The iteration failed to reach the tolerance within max_iter."""

    def __init__(self, last_gap: float, gamma_star: float, max_iter: int):
        super().__init__(
            f"no convergence after {max_iter} iterations: last gap {last_gap:.3e}, "
            f"computed contraction factor {gamma_star:.3f}"
        )
        self.last_gap = last_gap
        self.gamma_star = gamma_star


@dataclass
class PicardState:
    """Progress record of the fixed-point iteration."""

    iteration: int
    measure_path: MeasurePath
    successive_gap: float
    gap_history: list = field(default_factory=list)   # flat, for logging
    gap_blocks: list = field(default_factory=list)    # one list per subinterval
    t_star: float = 0.0
    gamma_star: float = 0.0
    subinterval_steps: int = 0


def _measure_index(times: np.ndarray, t: float) -> int:
    # piecewise-constant-in-time drift: active measure at time t
    idx = int(np.searchsorted(times, t + 1e-12, side="right") - 1)
    return max(idx, 0)


def frozen_drift_flow(
    measure_path: MeasurePath,
    kernel: InteractionKernel,
    noise: NoiseModel,
    path: BrownianPath,
    initial_cloud: np.ndarray,
    step_offset: int = 0,
    num_steps: int | None = None,
    blowup_bound: float = 1e6,
) -> Trajectory:
    """Integrate a cloud under the drift of a frozen measure path.

    The drift at a step uses the measure active at the step's left
    endpoint; the noise increments are the shared-path rows starting at
    ``step_offset``, so flows over subintervals compose exactly.
    """
    X = np.ascontiguousarray(initial_cloud, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("initial cloud must be a (M, d) matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("initial cloud must be finite")
    n, d = X.shape
    _check_path(COMMON, n, d, noise, path)
    if num_steps is None:
        num_steps = path.num_steps - step_offset
    if step_offset < 0 or step_offset + num_steps > path.num_steps:
        raise ValueError("step range outside the path horizon")
    t0 = step_offset * path.dt
    grid_t1 = float(measure_path.times[-1])
    if grid_t1 + 1e-9 < t0 + (num_steps - 1) * path.dt:
        raise ValueError("measure path grid does not cover the requested steps")

    table = path.table() if num_steps > 0 else None
    dt = path.dt
    snaps = [X.copy()]
    times = [t0]
    for s in range(num_steps):
        t = t0 + s * dt
        mu = measure_path.measures[_measure_index(measure_path.times, t)]
        drift = interaction_drift(X, mu.points, mu.weights, kernel)
        X = _advance(X, t, dt, drift, COMMON, noise, table[step_offset + s], None)
        _guard(X, step_offset + s, blowup_bound)
        snaps.append(X.copy())
        times.append(t0 + (s + 1) * dt)
    return Trajectory(
        times=np.asarray(times),
        positions=np.asarray(snaps),
        noise_mode=COMMON,
        dt=dt,
        snapshot_stride=1,
    )


def contraction_interval(
    T: float,
    num_steps: int,
    L_K: float,
    L_sigma: float,
    L_b: float | None = None,
    C_1: float = bounds.DEFAULT_C1,
    target: float = 0.5,
) -> tuple[float, int, float]:
    """Largest dyadic fraction t* = T / 2^k with contraction factor <= target.

    Returns (t_star, steps_per_subinterval, gamma_star).  The subinterval
    must align with the step grid, so num_steps % 2^k == 0 is required.
    """
    if L_b is None:
        L_b = L_K
    k = 0
    while True:
        t_star = T / 2**k
        gamma = bounds.contraction_factor(t_star, L_K, L_sigma, L_b, C_1)
        if gamma <= target and num_steps % 2**k == 0:
            return t_star, num_steps // 2**k, gamma
        k += 1
        if 2**k > num_steps:
            raise ValueError(
                f"cannot reach contraction factor {target} on the step grid: "
                f"needs more than {num_steps} steps"
            )


def _path_gap(
    times: np.ndarray,
    clouds_a: np.ndarray,
    clouds_b: np.ndarray,
    gap_stride: int,
    w1_kwargs: dict,
) -> float:
    S = times.shape[0]
    idx = list(range(0, S, gap_stride))
    if idx[-1] != S - 1:
        idx.append(S - 1)
    worst = 0.0
    for s in idx:
        if np.array_equal(clouds_a[s], clouds_b[s]):
            continue
        r = solve_transport(
            EmpiricalMeasure(clouds_a[s]), EmpiricalMeasure(clouds_b[s]), p=1, **w1_kwargs
        )
        worst = max(worst, r.value)
    return worst


def picard_fixed_point(
    mu0_cloud: np.ndarray,
    kernel: InteractionKernel,
    noise: NoiseModel,
    path: BrownianPath,
    tol: float = 1e-4,
    max_iter: int = 50,
    target_gamma: float = 0.5,
    gap_stride: int = 1,
    C_1: float = bounds.DEFAULT_C1,
    blowup_bound: float = 1e6,
    **w1_kwargs,
) -> tuple[MeasurePath, PicardState]:
    """Fixed point of the frozen-drift update map on the full horizon.

    Starting from the constant-in-time path, each sweep replaces the
    candidate with the push-forward of the (sub)interval's initial cloud
    under the frozen drift.  Subintervals of length t* (chosen so the
    update contracts with factor <= ``target_gamma``) are chained, the
    terminal cloud of one serving as initial data for the next.
    """
    mu0_cloud = np.ascontiguousarray(mu0_cloud, dtype=np.float64)
    if mu0_cloud.ndim != 2 or mu0_cloud.shape[0] < 1:
        raise ValueError("mu0_cloud must be a (M >= 1, d) matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    num_steps = path.num_steps
    T = num_steps * path.dt
    t_star, sub_steps, gamma_star = contraction_interval(
        T, num_steps, kernel.lipschitz_constant, noise.lipschitz_bound,
        C_1=C_1, target=target_gamma,
    )
    num_sub = num_steps // sub_steps

    all_times: list[float] = []
    all_clouds: list[np.ndarray] = []
    gap_history: list[float] = []
    gap_blocks: list[list[float]] = []
    total_iterations = 0
    current = mu0_cloud
    last_gap = 0.0

    for block in range(num_sub):
        s0 = block * sub_steps
        seg_times = (s0 + np.arange(sub_steps + 1)) * path.dt
        candidate = np.repeat(current[None, :, :], sub_steps + 1, axis=0)
        converged = False
        block_gaps: list[float] = []
        for it in range(max_iter):
            mp = MeasurePath.from_clouds(seg_times, candidate)
            traj = frozen_drift_flow(
                mp, kernel, noise, path, current,
                step_offset=s0, num_steps=sub_steps, blowup_bound=blowup_bound,
            )
            total_iterations += 1
            gap = _path_gap(seg_times, traj.positions, candidate, gap_stride, w1_kwargs)
            gap_history.append(gap)
            block_gaps.append(gap)
            last_gap = gap
            candidate = traj.positions
            # a zero kernel makes the update constant in its argument, so
            # one application already lands on the fixed point
            if gap < tol or kernel.kind == "zero":
                converged = True
                break
        if not converged:
            raise PicardNoConvergence(last_gap, gamma_star, max_iter)
        gap_blocks.append(block_gaps)
        start = 0 if block == 0 else 1  # junction time already recorded
        all_times.extend(seg_times[start:])
        all_clouds.extend(candidate[start:])
        current = candidate[-1]

    measure_path = MeasurePath.from_clouds(np.asarray(all_times), all_clouds)
    state = PicardState(
        iteration=total_iterations,
        measure_path=measure_path,
        successive_gap=last_gap,
        gap_history=gap_history,
        gap_blocks=gap_blocks,
        t_star=t_star,
        gamma_star=gamma_star,
        subinterval_steps=sub_steps,
    )
    return measure_path, state


def limit_sde_solve(
    mu_path: MeasurePath,
    kernel: InteractionKernel,
    noise: NoiseModel,
    path: BrownianPath,
    x0: np.ndarray,
    **kwargs,
) -> Trajectory:
    """Single trajectory driven by a frozen limit measure and the shared noise."""
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.ndim != 1:
        raise ValueError("x0 must be a d-vector")
    return frozen_drift_flow(mu_path, kernel, noise, path, x0[None, :], **kwargs)
