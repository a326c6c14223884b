import numpy as np
import pytest

from mfchaos import bounds
from mfchaos.brownian import BrownianPath
from mfchaos.dynamics import COMMON, simulate
from mfchaos.meanfield import (
    PicardNoConvergence,
    contraction_interval,
    frozen_drift_flow,
    limit_sde_solve,
    picard_fixed_point,
)
from mfchaos.transport import EmpiricalMeasure, MeasurePath, solve_transport


def common_path(noise, seed=21, dt=1.0 / 64, steps=64):
    return BrownianPath.for_common_noise(seed, dt, steps, noise.num_modes)


def w1_clouds(a, b):
    return solve_transport(EmpiricalMeasure(a), EmpiricalMeasure(b), p=1).value


def test_zero_kernel_flow_equals_plain_simulation(small_noise, zero_kernel, rng):
    X0 = rng.standard_normal((8, 2))
    path = common_path(small_noise)
    times = np.arange(path.num_steps + 1) * path.dt
    mp = MeasurePath.from_clouds(times, [X0] * (path.num_steps + 1))
    flow = frozen_drift_flow(mp, zero_kernel, small_noise, path, X0)
    plain = simulate(X0, zero_kernel, small_noise, path, COMMON)
    np.testing.assert_array_equal(flow.positions, plain.positions)


def test_self_consistent_drift_reproduces_simulation(small_noise, linear_kernel, rng):
    """Feeding a run's own empirical path back as frozen drift is a no-op."""
    X0 = rng.standard_normal((10, 2))
    path = common_path(small_noise)
    plain = simulate(X0, linear_kernel, small_noise, path, COMMON)
    mp = MeasurePath.from_clouds(plain.times, list(plain.positions))
    flow = frozen_drift_flow(mp, linear_kernel, small_noise, path, X0)
    np.testing.assert_array_equal(flow.positions, plain.positions)


def test_flow_subinterval_composition(small_noise, linear_kernel, rng):
    X0 = rng.standard_normal((6, 2))
    path = common_path(small_noise, steps=32)
    times = np.arange(33) * path.dt
    ref = simulate(X0, linear_kernel, small_noise, path, COMMON)
    mp = MeasurePath.from_clouds(times, list(ref.positions))
    first = frozen_drift_flow(mp, linear_kernel, small_noise, path, X0, 0, 16)
    second = frozen_drift_flow(
        mp, linear_kernel, small_noise, path, first.positions[-1], 16, 16
    )
    np.testing.assert_array_equal(second.positions[-1], ref.positions[-1])


def test_contraction_interval_selection(small_noise):
    t_star, sub_steps, gamma = contraction_interval(
        1.0, 256, 1.0, small_noise.lipschitz_bound
    )
    assert gamma <= 0.5
    assert 256 % (256 // sub_steps) == 0
    ref = bounds.contraction_factor(t_star, 1.0, small_noise.lipschitz_bound, 1.0)
    assert gamma == pytest.approx(ref)
    with pytest.raises(ValueError, match="contraction"):
        contraction_interval(1.0, 2, 50.0, 10.0)


def test_picard_zero_kernel_single_sweep(small_noise, zero_kernel, rng):
    X0 = rng.standard_normal((12, 2))
    path = common_path(small_noise, steps=32)
    mp, state = picard_fixed_point(X0, zero_kernel, small_noise, path, tol=1e-6)
    # one flow per contraction subinterval, no further sweeps
    assert state.iteration == 32 // state.subinterval_steps
    plain = simulate(X0, zero_kernel, small_noise, path, COMMON)
    for s in (0, 16, 32):
        assert w1_clouds(mp.measures[s].points, plain.positions[s]) < 1e-12


def test_picard_matches_direct_simulation(small_noise, linear_kernel, rng):
    X0 = rng.standard_normal((64, 2))
    path = common_path(small_noise, steps=64)
    tol = 1e-5
    mp, state = picard_fixed_point(X0, linear_kernel, small_noise, path, tol=tol)
    assert state.successive_gap < tol
    direct = simulate(X0, linear_kernel, small_noise, path, COMMON)
    worst = max(
        w1_clouds(mp.measures[s].points, direct.positions[s]) for s in range(len(mp))
    )
    assert worst < 20 * tol
    assert mp.times[-1] == pytest.approx(1.0)


def test_fixed_point_residual_small(small_noise, linear_kernel, rng):
    """Applying the update map once more moves the returned path < 2 tol."""
    X0 = rng.standard_normal((48, 2))
    path = common_path(small_noise, steps=64)
    tol = 1e-5
    mp, _ = picard_fixed_point(X0, linear_kernel, small_noise, path, tol=tol)
    reflow = frozen_drift_flow(mp, linear_kernel, small_noise, path, X0)
    residual = max(
        w1_clouds(reflow.positions[s], mp.measures[s].points) for s in range(len(mp))
    )
    assert residual < 2 * tol


def test_picard_gap_contracts(small_noise, linear_kernel, rng):
    X0 = rng.standard_normal((48, 2))
    path = common_path(small_noise, steps=64)
    _, state = picard_fixed_point(X0, linear_kernel, small_noise, path, tol=1e-8,
                                  max_iter=12)
    gaps = state.gap_history
    assert len(gaps) >= 2
    ratios = [b / a for a, b in zip(gaps, gaps[1:]) if a > 1e-12 and b < a]
    # within a contraction block the decay should beat the certified factor
    assert min(ratios) <= state.gamma_star * 1.2


def test_picard_non_convergence_raises(small_noise, linear_kernel, rng):
    X0 = rng.standard_normal((16, 2))
    path = common_path(small_noise, steps=32)
    with pytest.raises(PicardNoConvergence):
        picard_fixed_point(X0, linear_kernel, small_noise, path, tol=1e-15, max_iter=1)


def test_limit_solution_zero_kernel_bit_exact(small_noise, zero_kernel, rng):
    X0 = rng.standard_normal((5, 2))
    path = common_path(small_noise, steps=32)
    times = np.arange(33) * path.dt
    mp = MeasurePath.from_clouds(times, [X0] * 33)
    single = limit_sde_solve(mp, zero_kernel, small_noise, path, X0[2])
    plain = simulate(X0, zero_kernel, small_noise, path, COMMON)
    np.testing.assert_array_equal(single.positions[:, 0], plain.positions[:, 2])


def test_limit_solution_tracks_reference_point(small_noise, linear_kernel, rng):
    X0 = rng.standard_normal((32, 2))
    path = common_path(small_noise, steps=32)
    mp, _ = picard_fixed_point(X0, linear_kernel, small_noise, path, tol=1e-6)
    single = limit_sde_solve(mp, linear_kernel, small_noise, path, X0[4])
    ref = np.array([m.points[4] for m in mp.measures])
    assert np.linalg.norm(single.positions[:, 0] - ref, axis=1).max() < 1e-4
    rerun = limit_sde_solve(mp, linear_kernel, small_noise, path, X0[4])
    np.testing.assert_array_equal(single.positions, rerun.positions)


def test_flow_start_stability_constant(small_noise, linear_kernel, rng):
    # average over noise seeds of the sup separation of two nearby starts
    x, xp = np.array([0.1, -0.3]), np.array([0.55, 0.2])
    cloud = rng.standard_normal((32, 2))
    seps = []
    for seed in range(8):
        path = common_path(small_noise, seed=seed, steps=32)
        base = simulate(cloud, linear_kernel, small_noise, path, COMMON)
        mp = MeasurePath.from_clouds(base.times, list(base.positions))
        two = frozen_drift_flow(mp, linear_kernel, small_noise, path, np.vstack([x, xp]))
        seps.append(np.linalg.norm(two.positions[:, 0] - two.positions[:, 1], axis=1).max())
    c = bounds.compute_constants(
        L_K=1.0, L_sigma=small_noise.lipschitz_bound, T=0.5, p=1.0
    )
    assert np.mean(seps) <= c.C_pT * np.linalg.norm(x - xp)


def test_frozen_flow_validation(small_noise, linear_kernel, rng):
    X0 = rng.standard_normal((4, 2))
    path = common_path(small_noise, steps=8)
    times = np.arange(9) * path.dt
    mp = MeasurePath.from_clouds(times, [X0] * 9)
    with pytest.raises(ValueError, match="horizon"):
        frozen_drift_flow(mp, linear_kernel, small_noise, path, X0, 4, 8)
    short = MeasurePath.from_clouds(times[:3], [X0] * 3)
    with pytest.raises(ValueError, match="cover"):
        frozen_drift_flow(short, linear_kernel, small_noise, path, X0)
