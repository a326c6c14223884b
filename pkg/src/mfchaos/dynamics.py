"""Time integration of the interacting particle systems.

Three noise regimes share one explicit update rule: a shared
space-dependent field (every particle sees the same mode increments),
independent per-particle motions with identity diffusion, or a
deterministic environment velocity.  All reductions are order-free, so
trajectories are bit-reproducible across worker counts and equivariant
under particle relabeling.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .brownian import PER_MODE, PER_PARTICLE, BrownianPath
from .kernels import InteractionKernel, interaction_drift
from .noise import NoiseModel, apply_common_increments

__all__ = [
    "COMMON",
    "INDEPENDENT",
    "DETERMINISTIC_ENV",
    "NONE",
    "ParticleEnsemble",
    "EnvFlow",
    "env_flow_from_config",
    "SimulationDiverged",
    "Trajectory",
    "pairwise_drift",
    "step",
    "simulate",
    "weak_form_residual",
]

COMMON = "common"
INDEPENDENT = "independent"
DETERMINISTIC_ENV = "deterministic_env"
NONE = "none"
_MODES = (COMMON, INDEPENDENT, DETERMINISTIC_ENV, NONE)


class SimulationDiverged(RuntimeError):
    """A particle left the configured safety box: the run is unstable."""

    def __init__(self, step_index: int, particle: int, value: float):
        super().__init__(
            f"particle {particle} diverged at step {step_index} (|X| ~ {value:.3g}); "
            "check dt, kernel parameters and the blowup bound"
        )
        self.step_index = step_index
        self.particle = particle


@dataclass(frozen=True)
class ParticleEnsemble:
    """Positions of N particles at one time point."""

    positions: np.ndarray  # (N, d)
    time: float = 0.0
    noise_mode: str = COMMON

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[0] < 1:
            raise ValueError("positions must be a (N >= 1, d) matrix")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if self.noise_mode not in _MODES:
            raise ValueError(f"unknown noise mode {self.noise_mode!r}")
        object.__setattr__(self, "positions", pos)
        pos.setflags(write=False)

    @property
    def num_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class EnvFlow:
    """Named deterministic environment velocity field v(t, x).

    ``shear``: (amplitude * x_2, 0, ...); ``cellular``: the d=2 cellular
    flow with stream function (A/pi) sin(pi x_1) sin(pi x_2);
    ``uniform``: constant velocity along the first axis.
    """

    name: str = "shear"
    amplitude: float = 1.0

    def __post_init__(self):
        if self.name not in ("shear", "cellular", "uniform"):
            raise ValueError(f"unknown environment flow {self.name!r}")

    def __call__(self, t: float, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        v = np.zeros_like(X)
        if self.name == "shear":
            if X.shape[1] < 2:
                raise ValueError("shear flow needs d >= 2")
            v[:, 0] = self.amplitude * X[:, 1]
        elif self.name == "cellular":
            if X.shape[1] != 2:
                raise ValueError("cellular flow is defined for d = 2")
            pi = np.pi
            v[:, 0] = self.amplitude * np.sin(pi * X[:, 0]) * np.cos(pi * X[:, 1])
            v[:, 1] = -self.amplitude * np.cos(pi * X[:, 0]) * np.sin(pi * X[:, 1])
        else:
            v[:, 0] = self.amplitude
        return v


def env_flow_from_config(cfg: dict | str | EnvFlow | None) -> EnvFlow | None:
    if cfg is None or isinstance(cfg, EnvFlow):
        return cfg
    if isinstance(cfg, str):
        return EnvFlow(name=cfg)
    return EnvFlow(**cfg)


def pairwise_drift(positions: np.ndarray, kernel: InteractionKernel) -> np.ndarray:
    """Self-interaction drift rows (1/N) sum_j K(X_i - X_j).

    The self term j = i is included; built-in kernels are odd so it
    contributes K(0) = 0.
    """
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    weights = np.full(n, 1.0 / n)
    return interaction_drift(positions, positions, weights, kernel)


def _check_path(noise_mode: str, ensemble_n: int, dim: int, noise, path) -> None:
    if noise_mode == COMMON:
        if noise is None or path is None:
            raise ValueError("common noise needs a noise model and a Brownian path")
        if path.layout != PER_MODE:
            raise ValueError(f"common noise needs a {PER_MODE} path, got {path.layout}")
        if path.num_streams != noise.num_modes:
            raise ValueError(
                f"path has {path.num_streams} streams but the model has {noise.num_modes} modes"
            )
        if noise.dim != dim:
            raise ValueError(f"noise dimension {noise.dim} != ensemble dimension {dim}")
    elif noise_mode == INDEPENDENT:
        if path is None:
            raise ValueError("independent noise needs a Brownian path")
        if path.layout != PER_PARTICLE:
            raise ValueError(f"independent noise needs a {PER_PARTICLE} path, got {path.layout}")
        if path.num_streams != ensemble_n * dim:
            raise ValueError(
                f"path has {path.num_streams} streams, need N*d = {ensemble_n * dim}"
            )


def _advance(
    X: np.ndarray,
    t: float,
    dt: float,
    drift: np.ndarray,
    noise_mode: str,
    noise: NoiseModel | None,
    increments: np.ndarray | None,
    env_flow: EnvFlow | None,
) -> np.ndarray:
    if noise_mode == COMMON:
        return X + drift * dt + apply_common_increments(noise, X, increments)
    if noise_mode == INDEPENDENT:
        return X + drift * dt + increments.reshape(X.shape)
    if noise_mode == DETERMINISTIC_ENV:
        return X + (drift + env_flow(t, X)) * dt
    return X + drift * dt


def _guard(X: np.ndarray, step_index: int, bound: float) -> None:
    mags = np.abs(X).max(axis=1)
    bad = ~np.isfinite(mags) | (mags > bound)
    if bad.any():
        i = int(np.argmax(bad))
        raise SimulationDiverged(step_index, i, float(mags[i]))


def step(
    ensemble: ParticleEnsemble,
    kernel: InteractionKernel,
    noise: NoiseModel | None,
    path: BrownianPath | None,
    step_index: int,
    env_flow: EnvFlow | None = None,
    blowup_bound: float = 1e6,
    dt: float | None = None,
) -> ParticleEnsemble:
    """One explicit update of the ensemble over [t, t + dt]."""
    mode = ensemble.noise_mode
    _check_path(mode, ensemble.num_particles, ensemble.dim, noise, path)
    if mode == DETERMINISTIC_ENV and env_flow is None:
        raise ValueError("deterministic_env mode needs an environment flow")
    if mode in (COMMON, INDEPENDENT):
        if step_index >= path.num_steps:
            raise IndexError(f"step {step_index} beyond path horizon {path.num_steps}")
        dt = path.dt
        inc = path.increments(step_index)
    else:
        if path is not None:
            dt = path.dt
        elif dt is None:
            raise ValueError("drift-only modes need a path or an explicit dt")
        inc = None
    X = ensemble.positions
    drift = pairwise_drift(X, kernel)
    new = _advance(X, ensemble.time, dt, drift, mode, noise, inc, env_flow)
    _guard(new, step_index, blowup_bound)
    return replace(ensemble, positions=new, time=ensemble.time + dt)


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of a simulated ensemble on a uniform step grid."""

    times: np.ndarray      # (S,)
    positions: np.ndarray  # (S, N, d)
    noise_mode: str
    dt: float
    snapshot_stride: int

    @property
    def num_snapshots(self) -> int:
        return self.times.shape[0]

    def ensemble(self, s: int) -> ParticleEnsemble:
        return ParticleEnsemble(self.positions[s].copy(), float(self.times[s]), self.noise_mode)

    @property
    def final_positions(self) -> np.ndarray:
        return self.positions[-1]


def simulate(
    initial: np.ndarray,
    kernel: InteractionKernel,
    noise: NoiseModel | None,
    path: BrownianPath | None,
    noise_mode: str = COMMON,
    num_steps: int | None = None,
    snapshot_stride: int = 1,
    env_flow: EnvFlow | None = None,
    blowup_bound: float = 1e6,
    dt: float | None = None,
    t0: float = 0.0,
) -> Trajectory:
    """Integrate the system and return snapshots every ``snapshot_stride`` steps.

    The result is a deterministic function of its arguments; the final
    step is always included among the snapshots.
    """
    X = np.ascontiguousarray(initial, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("initial must be a (N >= 1, d) matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("initial positions must be finite")
    n, d = X.shape
    if noise_mode not in _MODES:
        raise ValueError(f"unknown noise mode {noise_mode!r}")
    _check_path(noise_mode, n, d, noise, path)
    if noise_mode == DETERMINISTIC_ENV and env_flow is None:
        raise ValueError("deterministic_env mode needs an environment flow")
    if snapshot_stride < 1:
        raise ValueError("snapshot_stride must be >= 1")
    if num_steps is None:
        if path is None:
            raise ValueError("num_steps is required when no path is given")
        num_steps = path.num_steps
    if path is not None:
        if num_steps > path.num_steps:
            raise ValueError(f"num_steps {num_steps} exceeds path horizon {path.num_steps}")
        dt = path.dt
    elif dt is None:
        raise ValueError("dt is required when no path is given")

    table = None
    if noise_mode in (COMMON, INDEPENDENT) and num_steps > 0:
        table = path.table()

    snaps = [X.copy()]
    times = [t0]
    for s in range(num_steps):
        t = t0 + s * dt
        drift = interaction_drift(X, X, np.full(n, 1.0 / n), kernel)
        inc = table[s] if table is not None else None
        X = _advance(X, t, dt, drift, noise_mode, noise, inc, env_flow)
        _guard(X, s, blowup_bound)
        if (s + 1) % snapshot_stride == 0 or s + 1 == num_steps:
            snaps.append(X.copy())
            times.append(t0 + (s + 1) * dt)
    return Trajectory(
        times=np.asarray(times),
        positions=np.asarray(snaps),
        noise_mode=noise_mode,
        dt=float(dt),
        snapshot_stride=snapshot_stride,
    )


def weak_form_residual(
    trajectory: Trajectory,
    kernel: InteractionKernel,
    noise: NoiseModel,
    path: BrownianPath,
    test_function,
) -> float:
    """Defect of the empirical measure in the weak form of the limit equation.

    Accumulates, with the simulation's own increments,

        <S_t, phi> - <S_0, phi>
          - sum_steps [ <S, grad phi . b> + 1/2 <S, lap phi> ] dt
          - sum_steps sum_k <S, grad phi . sigma_k> dB_k

    and returns the largest absolute defect over snapshot times.  The
    trajectory must come from the shared-noise system at stride 1; a
    drift-only trajectory (noise mode ``none``) is checked against the
    pure-transport form, which has neither the Laplacian nor the
    stochastic term.
    """
    for attr in ("gradient", "laplacian"):
        if not hasattr(test_function, attr):
            raise TypeError(f"test function lacks required derivative {attr!r}")
    if trajectory.noise_mode not in (COMMON, NONE):
        raise ValueError("the weak form applies to shared-noise or drift-only runs")
    if trajectory.snapshot_stride != 1:
        raise ValueError("weak_form_residual needs every step (snapshot_stride=1)")

    with_noise = trajectory.noise_mode == COMMON
    S = trajectory.num_snapshots
    dt = trajectory.dt
    if with_noise:
        table = path.table()
        amp = np.sqrt(2.0 * noise.weights)
        Y = noise.wavevectors
        E = noise.polarizations
        cos_mask = noise.phases == 0

    phi0 = float(np.mean(test_function(trajectory.positions[0])))
    integral = 0.0
    worst = 0.0
    for s in range(S):
        X = trajectory.positions[s]
        if s > 0:
            defect = abs(float(np.mean(test_function(X))) - phi0 - integral)
            worst = max(worst, defect)
        if s == S - 1:
            break
        n = X.shape[0]
        drift = interaction_drift(X, X, np.full(n, 1.0 / n), kernel)
        grad = test_function.gradient(X)
        a = float(np.mean(np.sum(grad * drift, axis=1)))
        if with_noise:
            l = 0.5 * float(np.mean(test_function.laplacian(X)))
            phases = X @ Y.T
            trig = np.where(cos_mask, np.cos(phases), np.sin(phases))
            proj = (grad @ E.T) * trig * amp
            mode_means = proj.mean(axis=0)
            integral += (a + l) * dt + float(mode_means @ table[s])
        else:
            integral += a * dt
    return worst
