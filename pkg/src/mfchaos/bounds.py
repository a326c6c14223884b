"""Explicit stability constants for the flow and measure estimates.

All quantities derive from the Lipschitz data (L_K, L_sigma, L_b), the
horizon T and a maximal-inequality constant C_p.  They are deliberately
conservative: they certify inequalities, they do not try to be sharp.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "flow_coefficient",
    "minimal_subdivision",
    "flow_stability_constant",
    "contraction_factor",
    "initial_stability_constant",
    "StabilityConstants",
    "compute_constants",
    "w2_bound",
    "RateDescriptor",
    "theoretical_rate",
]

# Default maximal-inequality constants.  The p=1 value is conservative;
# the p=2 value is the Doob L2 constant.  Both are overridable and are
# echoed in every report that uses them.
DEFAULT_C1 = 3.0
DEFAULT_C2 = 4.0

_MAX_SUBDIVISION = 10**9


def flow_coefficient(p: float, t: float, L_sigma: float, L_b: float, C_p: float) -> float:
    """Per-subinterval coefficient C_p * t^(1/2p) * L_sigma + t^(1/p) * L_b."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return 0.0
    return C_p * t ** (1.0 / (2.0 * p)) * L_sigma + t ** (1.0 / p) * L_b


def minimal_subdivision(p: float, T: float, L_sigma: float, L_b: float, C_p: float) -> int:
    """Smallest n >= 1 with flow_coefficient(p, T/n) < 1.

    Always exists since the coefficient vanishes as t -> 0.
    """
    n = 1
    while flow_coefficient(p, T / n, L_sigma, L_b, C_p) >= 1.0:
        n += 1 if n < 64 else n // 8  # accelerate for extreme Lipschitz data
        if n > _MAX_SUBDIVISION:
            raise ValueError("subdivision count exceeds limit; Lipschitz data too large")
    if n == 1:
        return 1
    # the accelerated search may overshoot; walk back to the minimum
    while n > 1 and flow_coefficient(p, T / (n - 1), L_sigma, L_b, C_p) < 1.0:
        n -= 1
    return n


def _neg_power(base: float, expo: float) -> float:
    """base^(-expo) for base in (0, 1], overflowing to +inf instead of raising."""
    log_val = -expo * math.log(base)
    return math.inf if log_val > 709.0 else math.exp(log_val)


def flow_stability_constant(
    p: float, T: float, L_sigma: float, L_b: float, C_p: float
) -> tuple[int, float]:
    """Moment bound for flows from nearby starts: (n, (1 - C(p, T/n))^(-n p)).

    For extreme Lipschitz data the literal value exceeds float range;
    it is then reported as +inf (a vacuous but valid certificate).
    """
    if T == 0.0:
        return 1, 1.0
    n = minimal_subdivision(p, T, L_sigma, L_b, C_p)
    c = flow_coefficient(p, T / n, L_sigma, L_b, C_p)
    return n, _neg_power(1.0 - c, n * p)


def contraction_factor(
    t: float, L_K: float, L_sigma: float, L_b: float, C_1: float = DEFAULT_C1
) -> float:
    """Contraction factor L_K * t * C_{1,t} of the frozen-drift update map."""
    if t == 0.0:
        return 0.0
    _, c1t = flow_stability_constant(1.0, t, L_sigma, L_b, C_1)
    return L_K * t * c1t


def initial_stability_constant(
    T: float, L_K: float, L_sigma: float, L_b: float, C_1: float = DEFAULT_C1
) -> tuple[int, float]:
    """Constant relating solution distance to initial-measure distance.

    Returns (n, ((1 - g) (1 - c))^(-n)) where n is the smallest integer
    such that both the contraction factor g on horizon T/n and the flow
    coefficient c = C(1, T/n) are below 1.
    """
    if T == 0.0:
        return 1, 1.0
    n = 1
    while True:
        g = contraction_factor(T / n, L_K, L_sigma, L_b, C_1)
        c = flow_coefficient(1.0, T / n, L_sigma, L_b, C_1)
        if g < 1.0 and c < 1.0:
            return n, _neg_power((1.0 - g) * (1.0 - c), n)
        n += 1
        if n > _MAX_SUBDIVISION:
            raise ValueError("subdivision count exceeds limit; Lipschitz data too large")


@dataclass(frozen=True)
class StabilityConstants:
    """Bundle of every constant the quantitative checks need.

    ``C_p`` is the maximal-inequality constant at exponent ``p``; ``C_2``
    the one at exponent 2, used only by the W2 growth factor.
    """

    L_K: float
    L_sigma: float
    L_b: float
    T: float
    p: float
    C_p: float
    C_1: float
    C_2: float
    C_of_p_T: float      # flow coefficient at the full horizon
    n_star: int          # minimal subdivision for the p-moment bound
    C_pT: float          # flow stability constant at exponent p
    C_1T: float          # flow stability constant at exponent 1
    gamma_T: float       # contraction factor of the update map
    n_tilde: int         # subdivision used by the initial-stability constant
    C_tilde_T: float     # initial-stability constant

    def w2_factor(self, t: float) -> float:
        """Growth factor 4 exp(4 t (2 t L_K^2 + C_2 L_sigma^2))."""
        if not 0.0 <= t <= self.T:
            raise ValueError(f"t={t} outside [0, {self.T}]")
        return 4.0 * math.exp(4.0 * t * (2.0 * t * self.L_K**2 + self.C_2 * self.L_sigma**2))

    def as_dict(self) -> dict:
        return {
            "L_K": self.L_K,
            "L_sigma": self.L_sigma,
            "L_b": self.L_b,
            "T": self.T,
            "p": self.p,
            "C_p": self.C_p,
            "C_1": self.C_1,
            "C_2": self.C_2,
            "C_of_p_T": self.C_of_p_T,
            "n_star": self.n_star,
            "C_pT": self.C_pT,
            "C_1T": self.C_1T,
            "gamma_T": self.gamma_T,
            "n_tilde": self.n_tilde,
            "C_tilde_T": self.C_tilde_T,
            "w2_factor_at_T": self.w2_factor(self.T),
        }


def compute_constants(
    L_K: float,
    L_sigma: float,
    L_b: float | None = None,
    T: float = 1.0,
    p: float = 1.0,
    C_p: float | None = None,
    C_1: float = DEFAULT_C1,
    C_2: float = DEFAULT_C2,
) -> StabilityConstants:
    """Evaluate every constant literally from the Lipschitz data.

    ``L_b`` defaults to ``L_K``: the frozen drift of a unit-mass measure
    inherits the kernel's Lipschitz constant.  ``C_1`` feeds the
    contraction chain whatever ``p`` is; ``C_p`` is used for the p-moment
    flow bound and defaults to the matching maximal-inequality constant.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if p < 1:
        raise ValueError("p must be >= 1")
    if L_b is None:
        L_b = L_K
    if C_p is None:
        C_p = C_1 if p == 1.0 else C_2
    if C_p <= 0 or C_1 <= 0 or C_2 <= 0:
        raise ValueError("maximal-inequality constants must be positive")
    n_star, c_pt = flow_stability_constant(p, T, L_sigma, L_b, C_p)
    _, c_1t = flow_stability_constant(1.0, T, L_sigma, L_b, C_1)
    gamma = L_K * T * c_1t
    n_tilde, c_tilde = initial_stability_constant(T, L_K, L_sigma, L_b, C_1)
    return StabilityConstants(
        L_K=L_K,
        L_sigma=L_sigma,
        L_b=L_b,
        T=T,
        p=p,
        C_p=C_p,
        C_1=C_1,
        C_2=C_2,
        C_of_p_T=flow_coefficient(p, T, L_sigma, L_b, C_p),
        n_star=n_star,
        C_pT=c_pt,
        C_1T=c_1t,
        gamma_T=gamma,
        n_tilde=n_tilde,
        C_tilde_T=c_tilde,
    )


def w2_bound(constants: StabilityConstants, t: float, initial_w2_sq: float) -> float:
    """Upper bound for the expected squared W2 distance at time t."""
    return constants.w2_factor(t) * initial_w2_sq


@dataclass(frozen=True)
class RateDescriptor:
    """Reference decay rate of the initial-sampling error, as overlay for plots."""

    family: str
    d: int
    p: float
    exponent: float | None   # supremum of admissible exponents (moment-based family)
    label: str

    def overlay(self, N) -> "object":
        """Evaluate the reference curve at particle counts N."""
        import numpy as np

        N = np.asarray(N, dtype=float)
        if self.family == "hauray_mischler":
            return N ** (-self.exponent)
        if self.d == 2:
            return N ** -0.5 * np.log1p(N) + N ** (-(self.p - 1.0) / self.p)
        return N ** (-1.0 / self.d) + N ** (-(self.p - 1.0) / self.p)


def theoretical_rate(d: int, p: float, which: str) -> RateDescriptor:
    """Reference convergence rate of empirical measures in W1.

    ``hauray_mischler`` returns the supremum exponent (any smaller one is
    admissible); ``fournier_guillin`` returns the two-term i.i.d. rate and
    rejects its excluded parameter pairs.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if which == "hauray_mischler":
        if p <= 0:
            raise ValueError("p must be positive")
        sup_exp = 1.0 / (d + 1.0 + (0.0 if math.isinf(p) else d / p))
        return RateDescriptor(
            family="hauray_mischler",
            d=d,
            p=p,
            exponent=sup_exp,
            label=f"N^-g, g<{sup_exp:.4g}",
        )
    if which == "fournier_guillin":
        if p <= 1:
            raise ValueError("fournier_guillin requires p > 1")
        if d == 1:
            raise ValueError("fournier_guillin rate is stated for d >= 2 only")
        if d == 2:
            if p == 2:
                raise ValueError("excluded case: d=2 with p=2")
            return RateDescriptor(
                family="fournier_guillin",
                d=2,
                p=p,
                exponent=None,
                label=f"N^-1/2 log(1+N) + N^-{(p - 1) / p:.4g}",
            )
        if p == d / (d - 1.0):
            raise ValueError(f"excluded case: d={d} with p=d/(d-1)")
        return RateDescriptor(
            family="fournier_guillin",
            d=d,
            p=p,
            exponent=None,
            label=f"N^-1/{d} + N^-{(p - 1) / p:.4g}",
        )
    raise ValueError(f"unknown rate family: {which!r}")
