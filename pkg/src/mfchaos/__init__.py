"""Interacting particles in a shared environmental flow, with verification tooling.

Subpackages cover the noise field synthesis, the particle integrators,
exact transport distances, the fixed-point construction of the limit
measure, the explicit stability constants, and the experiment harness.
"""

__version__ = "0.1.0"

from . import bounds, brownian, config, dynamics, kernels, meanfield, noise, transport  # noqa: F401
