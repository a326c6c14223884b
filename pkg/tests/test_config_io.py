import json

import numpy as np
import pytest

from conftest import tiny_experiment_config
from mfchaos.config import (
    InitialConfig,
    NoiseConfig,
    SimConfig,
    dump_config,
    load_config,
)
from mfchaos.dynamics import NONE, simulate
from mfchaos.kernels import InteractionKernel
from mfchaos.trajio import MAGIC, read_binary, read_csv, write_binary, write_csv


def test_config_round_trip(tmp_path):
    cfg = tiny_experiment_config()
    path = tmp_path / "exp.json"
    dump_config(cfg, path)
    loaded = load_config(path)
    assert loaded == cfg


def test_config_validation():
    with pytest.raises(ValueError, match="4x"):
        tiny_experiment_config(M_ref=20)
    with pytest.raises(ValueError, match="replicas"):
        tiny_experiment_config(replicas=1)
    with pytest.raises(ValueError, match="<= M_ref"):
        tiny_experiment_config(N_grid=[128], M_ref=64)
    with pytest.raises(ValueError, match="agree"):
        tiny_experiment_config(noise=NoiseConfig(dim=3))
    with pytest.raises(ValueError, match="multiple"):
        SimConfig(T=1.0, dt=0.3)
    with pytest.raises(ValueError, match="unknown"):
        load_config_from_dict({"bogus_key": 1})


def load_config_from_dict(d, tmp_path=None):
    import tempfile, pathlib

    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(d, fh)
        name = fh.name
    try:
        return load_config(name)
    finally:
        pathlib.Path(name).unlink()


def test_initial_distributions():
    for name in ("gaussian", "uniform", "two_gaussians"):
        cfg = InitialConfig(name=name, scale=0.5)
        pts = cfg.sample(200, 2, seed=4)
        assert pts.shape == (200, 2)
        np.testing.assert_array_equal(pts, cfg.sample(200, 2, seed=4))
    with pytest.raises(ValueError):
        InitialConfig(name="cauchy").sample(5, 2, 0)
    two = InitialConfig(name="two_gaussians", scale=0.2, separation=6.0).sample(500, 2, 1)
    assert (two[:, 0] > 1).any() and (two[:, 0] < -1).any()


def test_sim_config_builders(small_noise):
    sim = SimConfig(N=8, d=2, T=0.5, dt=1 / 32, kernel="zero", noise_mode="common")
    assert sim.num_steps == 16
    k = sim.build_kernel()
    assert isinstance(k, InteractionKernel) and k.kind == "zero"
    path = sim.build_path(small_noise)
    assert path.num_steps == 16 and path.num_streams == small_noise.num_modes
    ipath = SimConfig(N=8, d=2, T=0.5, dt=1 / 32, noise_mode="independent").build_path(None)
    assert ipath.num_streams == 16
    with pytest.raises(ValueError):
        SimConfig(noise_mode="common").build_path(None)


def _small_traj():
    rng = np.random.default_rng(3)
    X0 = rng.standard_normal((5, 2))
    return simulate(X0, InteractionKernel(kind="linear"), None, None, NONE,
                    num_steps=8, dt=0.125, snapshot_stride=2)


def test_csv_round_trip(tmp_path):
    traj = _small_traj()
    dest = tmp_path / "traj.csv"
    write_csv(traj, dest)
    times, positions = read_csv(dest)
    np.testing.assert_array_equal(times, traj.times)
    np.testing.assert_array_equal(positions, traj.positions)


def test_binary_round_trip(tmp_path):
    traj = _small_traj()
    dest = tmp_path / "traj.bin"
    write_binary(traj, dest)
    with dest.open("rb") as fh:
        assert fh.read(8) == MAGIC
    times, positions, dt = read_binary(dest)
    np.testing.assert_array_equal(times, traj.times)
    np.testing.assert_array_equal(positions, traj.positions)
    assert dt == traj.dt
    with pytest.raises(ValueError, match="magic"):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
        read_binary(bad)
