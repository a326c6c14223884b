"""Divergence-free environmental noise fields with a finite spectral form.

The field is a finite sum of trigonometric modes: every wavevector y
carries one or more unit polarizations e, and each (y, e) pair appears
with both a cosine and a sine phase sharing the same weight.  That
pairing makes the covariance a function of the displacement only,

    Q(z) = sum_k w_k cos(y_k . z) e_k e_k^T,

with Q(0) normalized to the identity.  With zero compressibility every
polarization is orthogonal to its wavevector, so each mode is
divergence free and the drift correction between the two stochastic
integration conventions vanishes identically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from scipy.stats import chi

__all__ = [
    "NoiseModel",
    "build_isotropic_noise",
    "constant_noise",
    "evaluate_sigma",
    "evaluate_Q",
    "trace_Q",
    "stratonovich_correction",
    "divergence_sigma",
    "estimate_lipschitz_sigma",
    "noise_invariant_residuals",
    "apply_common_increments",
]

PHASE_COS = 0
PHASE_SIN = 1


@dataclass(frozen=True)
class NoiseModel:
    """Immutable spectral representation of the environmental field.

    Arrays are indexed by the flat mode index k (length 2J): consecutive
    entries (2t, 2t+1) form a cosine/sine pair sharing wavevector,
    weight and polarization.  ``longitudinal[k]`` caches y_k . e_k; it
    is exactly 0.0 for transverse entries by construction.
    """

    dim: int
    wavevectors: np.ndarray    # (2J, d)
    weights: np.ndarray        # (2J,)
    polarizations: np.ndarray  # (2J, d) unit vectors
    phases: np.ndarray         # (2J,) PHASE_COS / PHASE_SIN
    longitudinal: np.ndarray   # (2J,) y_k . e_k
    compressibility: float = 0.0

    def __post_init__(self):
        for name in ("wavevectors", "weights", "polarizations", "phases", "longitudinal"):
            arr = getattr(self, name)
            arr.setflags(write=False)
        if self.num_modes and self.weights.min() <= 0:
            raise ValueError("weights must be positive")

    @property
    def num_modes(self) -> int:
        return self.weights.shape[0]

    @property
    def lipschitz_bound(self) -> float:
        """Analytic field Lipschitz constant sqrt(sum_k w_k |y_k|^2)."""
        return float(np.sqrt(np.sum(self.weights * np.sum(self.wavevectors**2, axis=1))))

    @property
    def is_divergence_free(self) -> bool:
        return bool(np.all(self.longitudinal == 0.0))


def _direction_set(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Symmetric unit directions whose second moment is exactly isotropic.

    d = 2 uses equally spaced angles (count must be even so that u and -u
    are both present); d >= 3 stacks sign-paired columns of random
    orthogonal frames, rounding the count up to a multiple of 2d.
    """
    if dim == 2:
        if count < 2 or count % 2 != 0:
            raise ValueError("modes_per_shell must be even and >= 2 for dim=2")
        offset = rng.uniform(0.0, 2.0 * np.pi)
        theta = offset + 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    frames = max(1, math.ceil(count / (2 * dim)))
    dirs = np.empty((2 * dim * frames, dim))
    for f in range(frames):
        g = rng.standard_normal((dim, dim))
        q, r = np.linalg.qr(g)
        q = q * np.sign(np.diag(r))
        dirs[f * 2 * dim : f * 2 * dim + dim] = q.T
        dirs[f * 2 * dim + dim : (f + 1) * 2 * dim] = -q.T
    return dirs


def _transverse_basis(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to unit vector u."""
    d = u.shape[0]
    if d == 2:
        return np.array([[-u[1], u[0]]])
    # Householder reflection mapping e_1 to u: remaining columns span u-perp.
    v = u.copy()
    v[0] += 1.0 if u[0] >= 0 else -1.0
    h = np.eye(d) - 2.0 * np.outer(v, v) / np.dot(v, v)
    basis = (-h if u[0] >= 0 else h)[:, 1:].T
    return basis


def _shell_radii(name: str, params: dict, dim: int, num_shells: int) -> np.ndarray:
    """Quantile-midpoint radii of the radial measure r^(d-1) f(r) dr."""
    q = (np.arange(num_shells) + 0.5) / num_shells
    if name == "gaussian":
        scale = float(params.get("scale", 1.0))
        if scale <= 0:
            raise ValueError("gaussian spectrum needs scale > 0")
        return scale * chi.ppf(q, df=dim)
    if name == "shell":
        radius = float(params.get("radius", params.get("scale", 1.0)))
        if radius <= 0:
            raise ValueError("shell spectrum needs radius > 0")
        return np.full(num_shells, radius)
    if name == "tophat":
        radius = float(params.get("radius", params.get("scale", 1.0)))
        width = float(params.get("width", 0.5))
        if radius <= 0 or not 0 <= width < 2:
            raise ValueError("tophat spectrum needs radius > 0 and width in [0, 2)")
        lo, hi = radius * (1 - width / 2), radius * (1 + width / 2)
        return (lo**dim + q * (hi**dim - lo**dim)) ** (1.0 / dim)
    if name == "powerlaw":
        scale = float(params.get("scale", 1.0))
        a = float(params.get("exponent", 0.0))
        if a <= dim + 2:
            raise ValueError(
                f"powerlaw exponent {a} gives an infinite second moment in "
                f"dimension {dim} (needs exponent > {dim + 2})"
            )
        r = np.geomspace(1e-4 * scale, 1e3 * scale, 20000)
        pdf = r ** (dim - 1) * (1.0 + r / scale) ** (-a)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(r))])
        cdf /= cdf[-1]
        return np.interp(q, cdf, np.concatenate([[r[0]], r[1:]]))
    raise ValueError(f"unknown spectrum {name!r}")


def build_isotropic_noise(
    dim: int,
    spectrum: str | dict = "gaussian",
    p: float = 0.0,
    num_shells: int = 2,
    modes_per_shell: int = 8,
    seed: int = 0,
    allow_compressible: bool = False,
) -> NoiseModel:
    """Synthesize an isotropic field from quantized spectral shells.

    Wavevectors sit on deterministic quantile shells of the radial
    density, with sign-symmetric direction sets; each wavevector carries
    its transverse polarizations (weight factor 1 - p) and, when p > 0,
    the longitudinal one (factor p (d - 1)).  Weights are rescaled so
    the synthesized covariance at zero displacement is the identity.

    Compressible fields (p != 0) are not divergence free and must be
    requested explicitly via ``allow_compressible``.
    """
    if dim < 2:
        raise ValueError("isotropic synthesis needs dim >= 2 (use constant_noise for dim=1)")
    if not 0.0 <= p <= 1.0:
        raise ValueError("compressibility p must lie in [0, 1]")
    if p != 0.0 and not allow_compressible:
        raise ValueError(
            "p != 0 breaks the divergence-free requirement; "
            "pass allow_compressible=True to build a non-compliant model"
        )
    if num_shells < 1 or modes_per_shell < 1:
        raise ValueError("num_shells and modes_per_shell must be >= 1")
    if isinstance(spectrum, str):
        name, params = spectrum, {}
    else:
        params = dict(spectrum)
        name = params.pop("name")
    radii = _shell_radii(name, params, dim, num_shells)

    rng = np.random.default_rng(seed)
    ys, es, ws, longs = [], [], [], []

    def add_pair(y, e, w, y_dot_e):
        ys.extend([y, y])
        es.extend([e, e])
        ws.extend([w, w])
        longs.extend([y_dot_e, y_dot_e])

    for r in radii:
        dirs = _direction_set(dim, modes_per_shell, rng)
        dir_w = 1.0 / (num_shells * dirs.shape[0])
        for u in dirs:
            y = r * u
            if p < 1.0:
                for e in _transverse_basis(u):
                    add_pair(y, e, dir_w * (1.0 - p), 0.0)
            if p > 0.0:
                add_pair(y, u.copy(), dir_w * p * (dim - 1.0), r)

    weights = np.asarray(ws)
    weights *= dim / weights.sum()  # trace of Q(0) becomes exactly d
    phases = np.tile([PHASE_COS, PHASE_SIN], len(ws) // 2).astype(np.uint8)
    model = NoiseModel(
        dim=dim,
        wavevectors=np.asarray(ys),
        weights=weights,
        polarizations=np.asarray(es),
        phases=phases,
        longitudinal=np.asarray(longs),
        compressibility=p,
    )
    q0 = evaluate_Q(model, np.zeros(dim))
    if np.abs(q0 - np.eye(dim)).max() > 1e-12:
        raise AssertionError("direction set failed to synthesize an isotropic covariance")
    return model


def constant_noise(dim: int) -> NoiseModel:
    """Spatially constant unit field: one zero-wavevector pair per axis.

    The one-dimensional case is only supported through this model; it is
    divergence free vacuously and its covariance is the identity at all
    displacements.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    eye = np.eye(dim)
    ys = np.zeros((2 * dim, dim))
    es = np.repeat(eye, 2, axis=0)
    ws = np.full(2 * dim, 0.5)
    phases = np.tile([PHASE_COS, PHASE_SIN], dim).astype(np.uint8)
    return NoiseModel(
        dim=dim,
        wavevectors=ys,
        weights=ws,
        polarizations=es,
        phases=phases,
        longitudinal=np.zeros(2 * dim),
    )


def _check_finite(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} must be finite")
    return x


def evaluate_sigma(model: NoiseModel, x: np.ndarray) -> np.ndarray:
    """Matrix of shape (d, 2J) whose column k is the field of mode k at x."""
    x = _check_finite(x, "position")
    phase = model.wavevectors @ x
    trig = np.where(model.phases == PHASE_COS, np.cos(phase), np.sin(phase))
    return (np.sqrt(2.0 * model.weights) * trig) * model.polarizations.T


def evaluate_Q(model: NoiseModel, z: np.ndarray) -> np.ndarray:
    """Covariance matrix at displacement z (closed finite sum).

    Valid for models whose phases come in cosine/sine pairs (all built
    models do); only then is the covariance displacement-homogeneous.
    """
    z = _check_finite(z, "displacement")
    c = model.weights * np.cos(model.wavevectors @ z)
    return (model.polarizations.T * c) @ model.polarizations


def trace_Q(model: NoiseModel, z: np.ndarray) -> float:
    """Trace of the covariance at displacement z."""
    z = _check_finite(z, "displacement")
    return float(np.sum(model.weights * np.cos(model.wavevectors @ z)))


def stratonovich_correction(model: NoiseModel, x: np.ndarray) -> np.ndarray:
    """Drift correction sum_k (D sigma_k . sigma_k)(x), from analytic derivatives.

    Each mode contributes 2 w g'(y.x) g(y.x) (y.e) e; it vanishes
    identically for transverse polarizations.
    """
    x = _check_finite(x, "position")
    phase = model.wavevectors @ x
    # g g' is -cos*sin for cosine modes and +sin*cos for sine modes
    gg = np.where(model.phases == PHASE_COS, -1.0, 1.0) * np.cos(phase) * np.sin(phase)
    coeff = 2.0 * model.weights * gg * model.longitudinal
    return coeff @ model.polarizations


def divergence_sigma(model: NoiseModel, x: np.ndarray) -> np.ndarray:
    """Analytic divergence of every mode at x, shape (2J,)."""
    x = _check_finite(x, "position")
    phase = model.wavevectors @ x
    dg = np.where(model.phases == PHASE_COS, -np.sin(phase), np.cos(phase))
    return np.sqrt(2.0 * model.weights) * dg * model.longitudinal


def estimate_lipschitz_sigma(
    model: NoiseModel, num_samples: int = 10000, seed: int = 0, box: float = 3.0
) -> tuple[float, float]:
    """Sampled and analytic Lipschitz constants of the mode family.

    Returns (sampled, bound): the sampled value maximizes
    sqrt((2 tr Q(0) - 2 tr Q(x - y)) / |x - y|^2) over random pairs
    (coincident pairs are skipped); the bound is sqrt(sum_k w_k |y_k|^2)
    and always dominates the sampled value.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    rng = np.random.default_rng(seed)
    x = box * rng.standard_normal((num_samples, model.dim))
    y = box * rng.standard_normal((num_samples, model.dim))
    z = x - y
    sq = np.sum(z**2, axis=1)
    keep = sq > 0
    z, sq = z[keep], sq[keep]
    tr0 = float(np.sum(model.weights))
    trz = np.cos(z @ model.wavevectors.T) @ model.weights
    ratio = np.maximum(2.0 * tr0 - 2.0 * trz, 0.0) / sq
    sampled = float(np.sqrt(ratio.max(initial=0.0)))
    return sampled, model.lipschitz_bound


def noise_invariant_residuals(model: NoiseModel, num_points: int = 100, seed: int = 0) -> dict:
    """Residuals of every structural identity, for the compliance report."""
    rng = np.random.default_rng(seed)
    d = model.dim
    xs = 3.0 * rng.standard_normal((num_points, d))
    ys = 3.0 * rng.standard_normal((num_points, d))

    q0_residual = float(np.abs(evaluate_Q(model, np.zeros(d)) - np.eye(d)).max())

    cov_residual = 0.0
    lip_residual = 0.0
    corr_max = 0.0
    div_analytic = 0.0
    div_fd = 0.0
    h = 1e-5
    tr0 = float(np.sum(model.weights))
    for x, y in zip(xs, ys):
        sx, sy = evaluate_sigma(model, x), evaluate_sigma(model, y)
        cov_residual = max(cov_residual, float(np.abs(sx @ sy.T - evaluate_Q(model, x - y)).max()))
        ssum = float(np.sum((sx - sy) ** 2))
        lip_residual = max(lip_residual, abs(ssum - (2.0 * tr0 - 2.0 * trace_Q(model, x - y))))
        corr_max = max(corr_max, float(np.linalg.norm(stratonovich_correction(model, x))))
        div_analytic = max(div_analytic, float(np.abs(divergence_sigma(model, x)).max()))
        fd = np.zeros(model.num_modes)
        for axis in range(d):
            step = np.zeros(d)
            step[axis] = h
            fd += (evaluate_sigma(model, x + step) - evaluate_sigma(model, x - step))[axis] / (2 * h)
        div_fd = max(div_fd, float(np.abs(fd).max()))

    sampled_lip, bound_lip = estimate_lipschitz_sigma(model, 2000, seed=seed + 1)
    return {
        "q0_identity": q0_residual,
        "covariance_identity": cov_residual,
        "lipschitz_identity": lip_residual,
        "stratonovich_correction": corr_max,
        "divergence_analytic": div_analytic,
        "divergence_central_difference": div_fd,
        "lipschitz_sampled": sampled_lip,
        "lipschitz_bound": bound_lip,
        "trace_q0": tr0,
    }


@njit(cache=True, parallel=True)
def _apply_common(X, Y, A, E, PH, dB, out):  # pragma: no cover - numba
    n, d = X.shape
    m = A.shape[0]
    for i in prange(n):
        for k in range(m):
            ph = 0.0
            for c in range(d):
                ph += Y[k, c] * X[i, c]
            g = math.cos(ph) if PH[k] == 0 else math.sin(ph)
            coeff = A[k] * g * dB[k]
            for c in range(d):
                out[i, c] += coeff * E[k, c]


def apply_common_increments(model: NoiseModel, X: np.ndarray, dB: np.ndarray) -> np.ndarray:
    """Shared-noise displacement sum_k sigma_k(X_i) dB_k for every row of X.

    The accumulation order is fixed per particle (mode-ascending), so the
    result row for a given position is identical wherever that row sits.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    out = np.zeros_like(X)
    amp = np.sqrt(2.0 * model.weights)
    _apply_common(
        X,
        np.ascontiguousarray(model.wavevectors),
        amp,
        np.ascontiguousarray(model.polarizations),
        model.phases,
        np.ascontiguousarray(dB, dtype=np.float64),
        out,
    )
    return out
