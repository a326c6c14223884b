import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog
from scipy.sparse import lil_matrix
from scipy.spatial.distance import cdist

from mfchaos.kernels import InteractionKernel, interaction_drift
from mfchaos.transport import (
    EmpiricalMeasure,
    MeasurePath,
    certificate_residuals,
    path_distance,
    shift_stability,
    sinkhorn_cost,
    solve_transport,
    w1,
    w2,
)


def hungarian_brute_force(x, y, p=1):
    """Minimum over all pairings, by full enumeration (n <= 8)."""
    C = cdist(x, y) if p == 1 else cdist(x, y, "sqeuclidean")
    n = len(x)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, sum(C[i, perm[i]] for i in range(n)) / n)
    return best


def linprog_transport(a, b, C):
    n, m = C.shape
    A = lil_matrix((n + m, n * m))
    for i in range(n):
        A[i, i * m : (i + 1) * m] = 1
    for j in range(m):
        A[n + j, j::m] = 1
    r = linprog(C.ravel(), A_eq=A.tocsr(), b_eq=np.concatenate([a, b]), method="highs")
    assert r.status == 0
    return r.fun


def random_measure(rng, n, d, weighted=False):
    pts = rng.normal(size=(n, d))
    if weighted:
        w = rng.random(n) + 0.1
        return EmpiricalMeasure(pts, w / w.sum())
    return EmpiricalMeasure(pts)


def test_point_mass_distances():
    a = EmpiricalMeasure(np.array([[1.0, 2.0]]))
    b = EmpiricalMeasure(np.array([[4.0, 6.0]]))
    assert w1(a, b) == pytest.approx(5.0, abs=1e-12)
    assert w2(a, b) == pytest.approx(5.0, abs=1e-12)
    assert w2(a, a) == 0.0


def test_split_mass_example():
    mu = EmpiricalMeasure(np.array([[0.0], [2.0]]), np.array([0.5, 0.5]))
    nu = EmpiricalMeasure(np.array([[1.0]]), np.array([1.0]))
    # only one admissible coupling: both atoms travel distance 1
    assert w1(mu, nu) == pytest.approx(1.0, abs=1e-12)


def test_brute_force_pairings_match_lp(rng):
    for _ in range(50):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(1, 4))
        x = rng.normal(size=(n, d))
        y = rng.normal(size=(n, d))
        mu, nu = EmpiricalMeasure(x), EmpiricalMeasure(y)
        got = solve_transport(mu, nu, p=1, method="network_simplex").cost
        assert got == pytest.approx(hungarian_brute_force(x, y, 1), abs=1e-12)


def test_network_simplex_matches_linprog_weighted(rng):
    for _ in range(15):
        n, m = int(rng.integers(2, 20)), int(rng.integers(2, 20))
        mu = random_measure(rng, n, 2, weighted=True)
        nu = random_measure(rng, m, 2, weighted=True)
        C = cdist(mu.points, nu.points)
        got = solve_transport(mu, nu, p=1, method="network_simplex").cost
        assert got == pytest.approx(linprog_transport(mu.weights, nu.weights, C), abs=1e-9)


def test_sorted_line_equals_lp(rng):
    for _ in range(20):
        mu = random_measure(rng, 64, 1)
        nu = random_measure(rng, 64, 1)
        fast = solve_transport(mu, nu, p=1, method="sorted").value
        lp = solve_transport(mu, nu, p=1, method="network_simplex").value
        assert abs(fast - lp) < 1e-9
        fast2 = solve_transport(mu, nu, p=2, method="sorted").value
        lp2 = solve_transport(mu, nu, p=2, method="network_simplex").value
        assert abs(fast2 - lp2) < 1e-9


def test_assignment_equals_network_simplex(rng):
    for d in (1, 2, 3):
        mu = random_measure(rng, 40, d)
        nu = random_measure(rng, 40, d)
        a = solve_transport(mu, nu, p=1, method="assignment").value
        b = solve_transport(mu, nu, p=1, method="network_simplex").value
        assert abs(a - b) < 1e-10


def test_projection_bracket(rng):
    # 1-d projection cost is a lower bound; any pairing is an upper bound
    mu = random_measure(rng, 64, 2)
    nu = random_measure(rng, 64, 2)
    val = w1(mu, nu)
    proj = w1(
        EmpiricalMeasure(mu.points[:, :1]), EmpiricalMeasure(nu.points[:, :1])
    )
    upper = float(np.linalg.norm(mu.points - nu.points, axis=1).mean())
    assert proj - 1e-12 <= val <= upper + 1e-12


def test_metric_axioms(rng):
    for _ in range(20):
        mu = random_measure(rng, 12, 2, weighted=True)
        nu = random_measure(rng, 9, 2, weighted=True)
        rho = random_measure(rng, 15, 2, weighted=True)
        dmn, dnm = w1(mu, nu), w1(nu, mu)
        assert abs(dmn - dnm) < 1e-10
        assert w1(mu, mu) < 1e-12
        assert w1(mu, rho) <= w1(mu, nu) + w1(nu, rho) + 1e-9


def test_w1_below_w2(rng):
    for _ in range(100):
        mu = random_measure(rng, int(rng.integers(2, 12)), 2)
        nu = random_measure(rng, int(rng.integers(2, 12)), 2)
        assert w1(mu, nu) <= w2(mu, nu) + 1e-10


def test_translation_and_scaling_invariance(rng):
    mu = random_measure(rng, 20, 2)
    nu = random_measure(rng, 25, 2, weighted=True)
    base, shifted = shift_stability(mu, nu, np.array([3.0, -1.5]))
    assert abs(base - shifted) < 1e-10
    base0, shifted0 = shift_stability(mu, nu, np.zeros(2))
    assert base0 == shifted0
    lam = 2.75
    scaled = w1(EmpiricalMeasure(lam * mu.points, mu.weights),
                EmpiricalMeasure(lam * nu.points, nu.weights))
    assert abs(scaled - lam * base) < 1e-10


def test_path_distance(rng):
    times = np.array([0.0, 0.5, 1.0])
    clouds = [rng.normal(size=(10, 2)) for _ in range(3)]
    pa = MeasurePath.from_clouds(times, clouds)
    assert path_distance(pa, pa) == 0.0
    shift = np.array([0.7, 0.0])
    pb = MeasurePath.from_clouds(times, [clouds[0] + shift, clouds[1], clouds[2]])
    d = path_distance(pa, pb)
    assert d == pytest.approx(np.linalg.norm(shift), abs=1e-10)
    for s in range(3):
        assert d >= w1(pa.measures[s], pb.measures[s]) - 1e-12
    with pytest.raises(ValueError):
        path_distance(pa, MeasurePath.from_clouds(times + 0.1, clouds))


def test_dual_certificate(rng):
    for weighted in (False, True):
        mu = random_measure(rng, 30, 2, weighted)
        nu = random_measure(rng, 22, 2, weighted)
        res = solve_transport(mu, nu, p=1, method="network_simplex")
        cert = certificate_residuals(mu, nu, res)
        assert cert["dual_feasibility"] < 1e-9
        assert cert["complementary_slackness"] < 1e-9
        assert cert["marginal_residual"] < 1e-9
        assert cert["duality_gap"] < 1e-9


def test_drift_comparison_bound(rng):
    # frozen drifts of two measures differ by at most L_K times their distance
    kernel = InteractionKernel(kind="gaussian", amplitude=1.7, length=0.9)
    mu = random_measure(rng, 24, 2)
    nu = random_measure(rng, 18, 2, weighted=True)
    dist = w1(mu, nu)
    xs = rng.normal(size=(50, 2)) * 2
    bmu = interaction_drift(xs, mu.points, mu.weights, kernel)
    bnu = interaction_drift(xs, nu.points, nu.weights, kernel)
    gaps = np.linalg.norm(bmu - bnu, axis=1)
    assert gaps.max() <= kernel.lipschitz_constant * dist + 1e-9


def test_exact_limit_and_entropic_path(rng):
    mu = random_measure(rng, 40, 2)
    nu = random_measure(rng, 40, 2)
    with pytest.raises(ValueError, match="entropic"):
        solve_transport(mu, nu, p=1, exact_limit=16)
    exact = w1(mu, nu)
    approx = solve_transport(mu, nu, p=1, exact_limit=16, epsilon=0.005)
    assert not approx.exact
    assert approx.cost >= exact - 1e-9
    assert approx.cost == pytest.approx(exact, rel=0.05)


def test_sinkhorn_close_to_exact(rng):
    mu = random_measure(rng, 25, 2, weighted=True)
    nu = random_measure(rng, 30, 2, weighted=True)
    exact = w1(mu, nu)
    ent = sinkhorn_cost(mu, nu, p=1, epsilon=0.002).cost
    assert ent == pytest.approx(exact, rel=0.03)
    with pytest.raises(ValueError):
        sinkhorn_cost(mu, nu, epsilon=0.0)


def test_measure_validation(rng):
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.array([[np.nan, 0.0]]))
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 2)), np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 2)), np.array([1.2, -0.2]))
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 2)), np.array([1.0]))
    mu = random_measure(rng, 5, 2)
    nu = random_measure(rng, 5, 3)
    with pytest.raises(ValueError, match="dimension"):
        w1(mu, nu)
    with pytest.raises(ValueError):
        solve_transport(mu, mu, p=3)
    with pytest.raises(ValueError, match="unknown method"):
        solve_transport(mu, mu, method="magic")
    # 1-d fast path refuses unequal or weighted clouds
    a = EmpiricalMeasure(rng.normal(size=(6, 1)))
    b = EmpiricalMeasure(rng.normal(size=(6, 1)), np.full(6, 1 / 6) + np.array([0.01, -0.01, 0, 0, 0, 0]))
    with pytest.raises(ValueError):
        solve_transport(a, b, method="sorted")


def test_first_moment_and_translate(rng):
    mu = random_measure(rng, 10, 2)
    assert np.isfinite(mu.first_moment())
    shifted = mu.translated([1.0, 0.0])
    np.testing.assert_allclose(shifted.points, mu.points + [1.0, 0.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 10**6))
def test_property_triangle_inequality(n, m, seed):
    r = np.random.default_rng(seed)
    mu = EmpiricalMeasure(r.normal(size=(n, 2)))
    nu = EmpiricalMeasure(r.normal(size=(m, 2)))
    rho = EmpiricalMeasure(r.normal(size=(n + m, 2)))
    assert w1(mu, nu) <= w1(mu, rho) + w1(rho, nu) + 1e-9
