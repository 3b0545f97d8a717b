"""Stationary covariance functions for the utility surrogates."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

KERNEL_FAMILIES = ("squared-exponential", "matern52")


@dataclass(frozen=True)
class KernelParams:
    """Kernel hyperparameters.

    `lengthscales` may be a scalar (isotropic) or a per-dimension vector.
    `noise_variance` is the observation noise attached to the model; it is
    carried here so one object fully determines the Gram matrix used for
    inference.
    """

    family: str = "squared-exponential"
    lengthscales: object = 0.5
    signal_variance: float = 1.0
    noise_variance: float = 0.01

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; expected one of {KERNEL_FAMILIES}"
            )
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if np.any(ls <= 0):
            raise ValueError(f"lengthscales must be positive, got {ls}")
        if self.signal_variance <= 0:
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")
        if self.noise_variance < 0:
            raise ValueError(f"noise_variance must be >= 0, got {self.noise_variance}")
        object.__setattr__(self, "lengthscales", ls)

    def with_values(self, **kw):
        return replace(self, **kw)


def _scaled_sqdist(params, A, B):
    inv = 1.0 / params.lengthscales
    A = np.atleast_2d(A) * inv
    B = np.atleast_2d(B) * inv
    # |a - b|^2 = |a|^2 + |b|^2 - 2 a.b, clipped against round-off negatives
    aa = (A**2).sum(axis=1)[:, None]
    bb = (B**2).sum(axis=1)[None, :]
    d2 = aa + bb - 2.0 * (A @ B.T)
    return np.maximum(d2, 0.0)


def kernel_matrix(params, A, B=None):
    """Cross-covariance matrix k(A, B); symmetric Gram matrix when B is None."""
    if B is None:
        B = A
    d2 = _scaled_sqdist(params, A, B)
    if params.family == "squared-exponential":
        return params.signal_variance * np.exp(-0.5 * d2)
    # Matern 5/2 in terms of u = sqrt(5) * r / lengthscale
    u = np.sqrt(5.0 * d2)
    return params.signal_variance * (1.0 + u + u**2 / 3.0) * np.exp(-u)


def kernel_diag(params, A):
    """k(x, x) for each row of A (constant for stationary kernels)."""
    return np.full(np.atleast_2d(A).shape[0], params.signal_variance)
