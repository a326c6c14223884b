"""Bounded scalar observables with analytic gradient and Laplacian."""
from __future__ import annotations

import numpy as np

__all__ = ["Observable", "make_observable", "OBSERVABLES"]


class Observable:
    """Smooth bounded field phi with exact first and second derivatives."""

    name: str
    bound: float  # sup |phi|

    def __call__(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def laplacian(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class TanhFirst(Observable):
    """phi(x) = tanh(x_1)."""

    name = "tanh_x1"
    bound = 1.0

    def __call__(self, X):
        return np.tanh(np.atleast_2d(X)[:, 0])

    def gradient(self, X):
        X = np.atleast_2d(X)
        g = np.zeros_like(X)
        g[:, 0] = 1.0 - np.tanh(X[:, 0]) ** 2
        return g

    def laplacian(self, X):
        t = np.tanh(np.atleast_2d(X)[:, 0])
        return -2.0 * t * (1.0 - t**2)


class GaussBump(Observable):
    """phi(x) = exp(-|x|^2 / 2)."""

    name = "gauss_bump"
    bound = 1.0

    def __call__(self, X):
        X = np.atleast_2d(X)
        return np.exp(-0.5 * np.sum(X**2, axis=1))

    def gradient(self, X):
        X = np.atleast_2d(X)
        return -X * self(X)[:, None]

    def laplacian(self, X):
        X = np.atleast_2d(X)
        r2 = np.sum(X**2, axis=1)
        return (r2 - X.shape[1]) * np.exp(-0.5 * r2)


class CosFirst(Observable):
    """phi(x) = cos(x_1)."""

    name = "cos_x1"
    bound = 1.0

    def __call__(self, X):
        return np.cos(np.atleast_2d(X)[:, 0])

    def gradient(self, X):
        X = np.atleast_2d(X)
        g = np.zeros_like(X)
        g[:, 0] = -np.sin(X[:, 0])
        return g

    def laplacian(self, X):
        return -np.cos(np.atleast_2d(X)[:, 0])


class CompactBump(Observable):
    """Smooth bump exp(1 - 1/(1 - |x/R|^2)) supported in |x| < R."""

    name = "bump"
    bound = 1.0

    def __init__(self, radius: float = 4.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = radius

    def _parts(self, X):
        X = np.atleast_2d(X)
        s = np.sum(X**2, axis=1) / self.radius**2
        inside = s < 1.0 - 1e-9
        one_minus = np.where(inside, 1.0 - s, 1.0)
        val = np.where(inside, np.exp(1.0 - 1.0 / one_minus), 0.0)
        return X, s, inside, one_minus, val

    def __call__(self, X):
        return self._parts(X)[4]

    def gradient(self, X):
        X, s, inside, om, val = self._parts(X)
        # d/ds exp(1 - 1/(1-s)) = -val / (1-s)^2; chain rule with s = |x|^2/R^2
        coeff = np.where(inside, -val / om**2, 0.0) * (2.0 / self.radius**2)
        return X * coeff[:, None]

    def laplacian(self, X):
        X, s, inside, om, val = self._parts(X)
        d = X.shape[1]
        g1 = np.where(inside, -val / om**2, 0.0)
        g2 = np.where(inside, val * (1.0 - 2.0 * om) / om**4, 0.0)
        return (2.0 / self.radius**2) * d * g1 + (4.0 * s / self.radius**2) * g2


class ConstantOne(Observable):
    """phi(x) = 1 (degenerate observable for factorization edge cases)."""

    name = "one"
    bound = 1.0

    def __call__(self, X):
        return np.ones(np.atleast_2d(X).shape[0])

    def gradient(self, X):
        return np.zeros_like(np.atleast_2d(X))

    def laplacian(self, X):
        return np.zeros(np.atleast_2d(X).shape[0])


def make_observable(name: str, **params) -> Observable:
    if name == "tanh_x1":
        return TanhFirst()
    if name == "gauss_bump":
        return GaussBump()
    if name == "cos_x1":
        return CosFirst()
    if name == "bump":
        return CompactBump(**params)
    if name == "one":
        return ConstantOne()
    raise ValueError(f"unknown observable {name!r}")


OBSERVABLES = ("tanh_x1", "gauss_bump", "cos_x1", "bump", "one")
