"""Experiment configuration: typed blocks, JSON round-trip, builders."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .brownian import BrownianPath
from .dynamics import EnvFlow, env_flow_from_config
from .kernels import InteractionKernel, kernel_from_config
from .noise import NoiseModel, build_isotropic_noise, constant_noise

__all__ = [
    "NoiseConfig",
    "InitialConfig",
    "SimConfig",
    "ExperimentConfig",
    "load_config",
    "dump_config",
]


@dataclass
class NoiseConfig:
    """Spectral-noise block: dim, spectrum {name, scale}, p, shells, seed."""

    dim: int = 2
    spectrum: dict = field(default_factory=lambda: {"name": "gaussian", "scale": 1.0})
    p: float = 0.0
    num_shells: int = 2
    modes_per_shell: int = 8
    seed: int = 0
    allow_compressible: bool = False

    def build(self) -> NoiseModel:
        if self.dim == 1:
            return constant_noise(1)
        return build_isotropic_noise(
            dim=self.dim,
            spectrum=self.spectrum,
            p=self.p,
            num_shells=self.num_shells,
            modes_per_shell=self.modes_per_shell,
            seed=self.seed,
            allow_compressible=self.allow_compressible,
        )

    @property
    def num_modes(self) -> int:
        # flat mode count of the built model, needed to size shared paths
        return self.build().num_modes


@dataclass
class InitialConfig:
    """Initial distribution of particle positions."""

    name: str = "gaussian"
    scale: float = 1.0
    separation: float = 3.0  # two_gaussians only

    def sample(self, n: int, d: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        if self.name == "gaussian":
            return self.scale * rng.standard_normal((n, d))
        if self.name == "uniform":
            return rng.uniform(-self.scale, self.scale, size=(n, d))
        if self.name == "two_gaussians":
            pts = self.scale * rng.standard_normal((n, d))
            signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
            pts[:, 0] += signs * self.separation / 2.0
            return pts
        raise ValueError(f"unknown initial distribution {self.name!r}")


@dataclass
class SimConfig:
    """Single-simulation block."""

    N: int = 128
    d: int = 2
    T: float = 1.0
    dt: float = 1.0 / 256
    kernel: dict | str = "linear"
    noise_mode: str = "common"
    snapshot_stride: int = 1
    seed_noise: int = 1
    seed_initial: int = 2
    env_flow: dict | str | None = None
    blowup_bound: float = 1e6

    def __post_init__(self):
        if self.N < 1 or self.d < 1:
            raise ValueError("N and d must be >= 1")
        if self.T < 0 or self.dt <= 0:
            raise ValueError("need T >= 0 and dt > 0")
        steps = round(self.T / self.dt) if self.T > 0 else 0
        if abs(steps * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise ValueError("T must be an integer multiple of dt")

    @property
    def num_steps(self) -> int:
        return round(self.T / self.dt) if self.T > 0 else 0

    def build_kernel(self) -> InteractionKernel:
        return kernel_from_config(self.kernel)

    def build_env_flow(self) -> EnvFlow | None:
        return env_flow_from_config(self.env_flow)

    def build_path(self, noise: NoiseModel | None, seed: int | None = None) -> BrownianPath:
        seed = self.seed_noise if seed is None else seed
        if self.noise_mode == "common":
            if noise is None:
                raise ValueError("common mode needs a noise model")
            return BrownianPath.for_common_noise(seed, self.dt, self.num_steps, noise.num_modes)
        if self.noise_mode == "independent":
            return BrownianPath.for_independent_noise(
                seed, self.dt, self.num_steps, self.N, self.d
            )
        return BrownianPath.for_common_noise(seed, self.dt, self.num_steps, 0)


@dataclass
class ExperimentConfig:
    """Driver block for the statistical experiments."""

    sim: SimConfig = field(default_factory=SimConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    N_grid: list = field(default_factory=lambda: [64, 128, 256, 512, 1024])
    M_ref: int = 8192
    replicas: int = 16
    seed_noise: int = 1
    seed_initial_base: int = 1000
    observables: list = field(default_factory=lambda: ["tanh_x1", "gauss_bump", "cos_x1"])
    snapshot_stride: int = 128
    exact_limit: int = 8192
    entropic_epsilon: float | None = None
    reference_mode: str = "direct"  # direct M-cloud run or the slower fixed-point build
    picard_tol: float = 1e-4
    workers: int = 2
    out_dir: str = "out"
    dichotomy_factor: float = 5.0
    dichotomy_noise_seeds: int = 32

    def __post_init__(self):
        if self.replicas < 2:
            raise ValueError("need at least 2 replicas for standard errors")
        if not self.N_grid:
            raise ValueError("N_grid must be nonempty")
        if any(n < 1 for n in self.N_grid):
            raise ValueError("all N in N_grid must be >= 1")
        if max(self.N_grid) > self.M_ref:
            raise ValueError("every N in N_grid must be <= M_ref")
        if self.M_ref < 4 * max(self.N_grid):
            raise ValueError("M_ref must be at least 4x the largest N")
        if self.noise.dim != self.sim.d:
            raise ValueError("noise dim and sim d must agree")
        if self.reference_mode not in ("direct", "picard"):
            raise ValueError("reference_mode must be 'direct' or 'picard'")


def _from_dict(cls, data: dict):
    fields = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - fields
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read an experiment configuration from JSON."""
    data = json.loads(Path(path).read_text())
    for key, sub in (("sim", SimConfig), ("noise", NoiseConfig), ("initial", InitialConfig)):
        if key in data and isinstance(data[key], dict):
            data[key] = _from_dict(sub, data[key])
    return _from_dict(ExperimentConfig, data)


def dump_config(cfg: ExperimentConfig, path: str | Path | None = None) -> str:
    """Serialize a configuration to JSON (written to ``path`` if given)."""
    text = json.dumps(asdict(cfg), indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
