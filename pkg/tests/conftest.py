import os

os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")  # quiet old-TBB warning

import numpy as np
import pytest

from mfchaos.config import ExperimentConfig, InitialConfig, NoiseConfig, SimConfig
from mfchaos.kernels import InteractionKernel
from mfchaos.noise import build_isotropic_noise


@pytest.fixture(scope="session")
def small_noise():
    return build_isotropic_noise(
        2, {"name": "gaussian", "scale": 1.0}, num_shells=2, modes_per_shell=8, seed=11
    )


@pytest.fixture(scope="session")
def shell_noise():
    return build_isotropic_noise(
        2, {"name": "shell", "radius": 1.0}, num_shells=1, modes_per_shell=8, seed=5
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def linear_kernel():
    return InteractionKernel(kind="linear")


@pytest.fixture
def zero_kernel():
    return InteractionKernel(kind="zero")


def tiny_experiment_config(**overrides) -> ExperimentConfig:
    base = dict(
        sim=SimConfig(N=16, d=2, T=0.25, dt=1.0 / 32, kernel="linear"),
        noise=NoiseConfig(dim=2, num_shells=1, modes_per_shell=4, seed=3),
        initial=InitialConfig(name="gaussian", scale=1.0),
        N_grid=[8, 16],
        M_ref=64,
        replicas=3,
        seed_noise=7,
        seed_initial_base=100,
        snapshot_stride=8,
        exact_limit=512,
        workers=1,
        dichotomy_noise_seeds=8,
    )
    base.update(overrides)
    return ExperimentConfig(**base)
