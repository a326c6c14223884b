import math

import numpy as np
import pytest

from mfchaos import bounds


def independent_eval(L_K, L_s, L_b, T, p, C_p, C_1, C_2):
    """Line-by-line re-implementation of every constant, kept separate on purpose."""
    coeff = lambda pp, t, Cc: Cc * t ** (1.0 / (2 * pp)) * L_s + t ** (1.0 / pp) * L_b
    powneg = lambda base, e: (
        math.inf if -e * math.log(base) > 709.0 else math.exp(-e * math.log(base))
    )
    n = 1
    while coeff(p, T / n, C_p) >= 1.0:
        n += 1
    c_pt = powneg(1.0 - coeff(p, T / n, C_p), n * p)
    n1 = 1
    while coeff(1.0, T / n1, C_1) >= 1.0:
        n1 += 1
    c_1t = powneg(1.0 - coeff(1.0, T / n1, C_1), n1)
    gamma = L_K * T * c_1t

    def gamma_t(t):
        k = 1
        while coeff(1.0, t / k, C_1) >= 1.0:
            k += 1
        return L_K * t * powneg(1.0 - coeff(1.0, t / k, C_1), k)

    nt = 1
    while not (gamma_t(T / nt) < 1.0 and coeff(1.0, T / nt, C_1) < 1.0):
        nt += 1
    c_tilde = powneg((1.0 - gamma_t(T / nt)) * (1.0 - coeff(1.0, T / nt, C_1)), nt)
    return dict(n_star=n, C_pT=c_pt, C_1T=c_1t, gamma_T=gamma, n_tilde=nt, C_tilde_T=c_tilde)


def test_zero_noise_and_drift_coefficients():
    c = bounds.compute_constants(L_K=0.7, L_sigma=0.0, L_b=0.0, T=2.0, p=1.0)
    assert c.C_of_p_T == 0.0
    assert c.n_star == 1
    assert c.C_pT == 1.0
    assert c.gamma_T == pytest.approx(0.7 * 2.0)
    # minimal n with L_K * (T/n) * 1 < 1, then ((1 - g))^(-n)
    n = 1
    while 0.7 * 2.0 / n >= 1.0:
        n += 1
    g = 0.7 * 2.0 / n
    assert c.n_tilde == n
    assert c.C_tilde_T == pytest.approx((1.0 / (1.0 - g)) ** n)


def test_zero_kernel_gives_zero_contraction():
    c = bounds.compute_constants(L_K=0.0, L_sigma=1.2, L_b=0.4, T=1.0)
    assert c.gamma_T == 0.0
    assert c.C_tilde_T >= 1.0


@pytest.mark.parametrize(
    "L_K,L_s,L_b,T,p",
    [
        (1.0, 1.4, 1.0, 1.0, 1.0),
        (0.5, 0.8, 0.5, 2.0, 2.0),
        (2.0, 0.3, 2.0, 0.5, 1.0),
        (1.0, 0.0, 0.0, 3.0, 2.0),
    ],
)
def test_dual_coding_agreement(L_K, L_s, L_b, T, p):
    c = bounds.compute_constants(L_K=L_K, L_sigma=L_s, L_b=L_b, T=T, p=p)
    ref = independent_eval(L_K, L_s, L_b, T, p, c.C_p, c.C_1, c.C_2)
    assert c.n_star == ref["n_star"]
    assert c.C_pT == pytest.approx(ref["C_pT"], rel=1e-12)
    assert c.C_1T == pytest.approx(ref["C_1T"], rel=1e-12)
    assert c.gamma_T == pytest.approx(ref["gamma_T"], rel=1e-12)
    assert c.n_tilde == ref["n_tilde"]
    assert c.C_tilde_T == pytest.approx(ref["C_tilde_T"], rel=1e-12)


def test_subdivision_minimality():
    for T in (0.5, 1.0, 4.0):
        c = bounds.compute_constants(L_K=1.0, L_sigma=1.5, L_b=1.0, T=T, p=1.0)
        if c.n_star > 1:
            over = bounds.flow_coefficient(1.0, T / (c.n_star - 1), 1.5, 1.0, c.C_p)
            assert over >= 1.0
        assert bounds.flow_coefficient(1.0, T / c.n_star, 1.5, 1.0, c.C_p) < 1.0


def test_initial_stability_monotone_in_horizon():
    vals = [
        bounds.compute_constants(L_K=1.0, L_sigma=1.0, L_b=1.0, T=T).C_tilde_T
        for T in (0.25, 0.5, 1.0, 2.0)
    ]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(vals, vals[1:]))


def test_w2_growth_factor():
    c = bounds.compute_constants(L_K=1.0, L_sigma=1.4, L_b=1.0, T=1.0, p=2.0)
    assert bounds.w2_bound(c, 0.0, 3.0) == pytest.approx(4.0 * 3.0)
    assert bounds.w2_bound(c, 0.5, 0.0) == 0.0
    ts = np.linspace(0.0, 1.0, 9)
    factors = [c.w2_factor(t) for t in ts]
    assert all(b >= a for a, b in zip(factors, factors[1:]))
    assert c.w2_factor(1.0) == pytest.approx(
        4.0 * math.exp(4.0 * (2.0 * 1.0 + c.C_2 * 1.4**2))
    )
    with pytest.raises(ValueError):
        c.w2_factor(2.0)


def test_rate_moment_family():
    r = bounds.theoretical_rate(2, math.inf, "hauray_mischler")
    assert r.exponent == pytest.approx(1.0 / 3.0)
    r = bounds.theoretical_rate(3, 2.0, "hauray_mischler")
    assert r.exponent == pytest.approx(1.0 / (3 + 1 + 1.5))
    with pytest.raises(ValueError):
        bounds.theoretical_rate(0, 2.0, "hauray_mischler")


def test_rate_iid_family():
    r = bounds.theoretical_rate(3, 2.0, "fournier_guillin")
    N = np.array([10.0, 1000.0])
    np.testing.assert_allclose(r.overlay(N), N ** (-1 / 3) + N ** (-1 / 2))
    r2 = bounds.theoretical_rate(2, 4.0, "fournier_guillin")
    np.testing.assert_allclose(r2.overlay(N), N**-0.5 * np.log1p(N) + N**-0.75)
    with pytest.raises(ValueError):
        bounds.theoretical_rate(2, 2.0, "fournier_guillin")
    with pytest.raises(ValueError):
        bounds.theoretical_rate(3, 1.5, "fournier_guillin")
    with pytest.raises(ValueError):
        bounds.theoretical_rate(2, 1.0, "fournier_guillin")
    with pytest.raises(ValueError):
        bounds.theoretical_rate(1, 3.0, "fournier_guillin")


def test_extreme_data_overflow_to_inf_without_raising():
    c = bounds.compute_constants(L_K=0.5, L_sigma=2.0, L_b=0.5, T=2.0, p=2.0)
    assert c.C_pT == float("inf")
    assert np.isfinite(c.gamma_T) or c.gamma_T == float("inf")


def test_unknown_family_and_bad_inputs():
    with pytest.raises(ValueError):
        bounds.theoretical_rate(2, 2.0, "nope")
    with pytest.raises(ValueError):
        bounds.compute_constants(L_K=1.0, L_sigma=1.0, L_b=1.0, T=0.0)
    with pytest.raises(ValueError):
        bounds.compute_constants(L_K=1.0, L_sigma=1.0, L_b=1.0, T=1.0, p=0.5)
