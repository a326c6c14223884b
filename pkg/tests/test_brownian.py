import numpy as np
import pytest

from mfchaos.brownian import PER_MODE, PER_PARTICLE, BrownianPath


def test_increments_are_pure_functions_of_seed_index_step():
    a = BrownianPath(42, 0.01, 50, PER_MODE, 6)
    b = BrownianPath(42, 0.01, 50, PER_MODE, 6)
    np.testing.assert_array_equal(a.table(), b.table())
    assert a.increment(3, 17) == b.increment(3, 17)


def test_out_of_order_and_extension_stability():
    p = BrownianPath(7, 0.02, 20, PER_MODE, 4)
    late = p.increment(2, 19)
    early = p.increment(2, 0)
    again = BrownianPath(7, 0.02, 20, PER_MODE, 4)
    assert again.increment(2, 0) == early
    assert again.increment(2, 19) == late
    longer = p.extended(200)
    np.testing.assert_array_equal(longer.table()[:20], p.table())


def test_different_seeds_and_streams_differ():
    p = BrownianPath(1, 0.01, 30, PER_MODE, 3)
    q = BrownianPath(2, 0.01, 30, PER_MODE, 3)
    assert not np.array_equal(p.table(), q.table())
    t = p.table()
    assert not np.array_equal(t[:, 0], t[:, 1])


def test_layouts_use_disjoint_key_spaces():
    p = BrownianPath(9, 0.01, 30, PER_MODE, 4)
    q = BrownianPath(9, 0.01, 30, PER_PARTICLE, 4)
    assert not np.array_equal(p.table(), q.table())


def test_moment_sanity():
    dt = 1.0 / 128
    p = BrownianPath(123, dt, 100, PER_MODE, 128)
    draws = p.table().ravel()  # 12800 draws
    n = draws.size
    assert n >= 10**4
    assert abs(draws.mean()) < 5.0 * np.sqrt(dt / n)
    assert abs(draws.var() - dt) < 0.1 * dt


def test_factories_and_validation():
    c = BrownianPath.for_common_noise(5, 0.1, 10, 8)
    assert c.layout == PER_MODE and c.num_streams == 8
    w = BrownianPath.for_independent_noise(5, 0.1, 10, 7, 3)
    assert w.layout == PER_PARTICLE and w.num_streams == 21
    with pytest.raises(ValueError):
        BrownianPath(0, -0.1, 10, PER_MODE, 2)
    with pytest.raises(ValueError):
        BrownianPath(0, 0.1, 10, "weird", 2)
    with pytest.raises(IndexError):
        c.increment(8, 0)
    with pytest.raises(IndexError):
        c.increment(0, 10)
