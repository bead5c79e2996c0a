"""i.i.d. zero-mean noise with prescribed covariance, in several shapes.

All shapes share the first two moments (0, Sigma); the limiting scaled
stationary law depends on the noise only through Sigma, so swapping shapes
exercises that universality empirically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, as_square_matrix, require_spd

_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class NoiseModel:
    """Noise distribution: shape in {gaussian, uniform, rademacher, noiseless}.

    ``cholesky`` is the cached lower factor of Sigma; draws are
    cholesky @ z with z made of i.i.d. unit-variance zero-mean entries of
    the chosen shape.  Immutable; sampling needs an exclusively owned rng.
    """

    shape: str
    sigma: np.ndarray
    cholesky: np.ndarray

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]


def make_noise(shape: str, sigma) -> NoiseModel:
    """Build a noise model, enforcing symmetric positive definite Sigma.

    Sigma = 0 is allowed only for the special "noiseless" debug shape, which
    bypasses all stationary analysis.
    """
    if shape == "noiseless":
        sigma = as_square_matrix(sigma, "noise sigma")
        return NoiseModel(shape=shape, sigma=np.zeros_like(sigma),
                          cholesky=np.zeros_like(sigma))
    if shape not in ("gaussian", "uniform", "rademacher"):
        raise ConfigError(f"unknown noise shape {shape!r}")
    sigma = require_spd(sigma, "noise sigma")
    chol = np.linalg.cholesky(sigma)
    return NoiseModel(shape=shape, sigma=sigma, cholesky=chol)


def _unit_variance_block(shape: str, rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """(n, d) block of i.i.d. zero-mean unit-variance entries."""
    if shape == "gaussian":
        return rng.standard_normal((n, d))
    if shape == "uniform":
        return rng.uniform(-_SQRT3, _SQRT3, size=(n, d))
    if shape == "rademacher":
        # one raw 64-bit word feeds 64 sign draws; much cheaper than floats
        n_words = (n * d + 63) // 64
        words = rng.integers(0, 1 << 64, size=n_words, dtype=np.uint64, endpoint=False)
        bits = (words[:, None] >> np.arange(64, dtype=np.uint64)) & np.uint64(1)
        flat = bits.astype(np.float64).ravel()[: n * d]
        return (2.0 * flat - 1.0).reshape(n, d)
    if shape == "noiseless":
        return np.zeros((n, d))
    raise ConfigError(f"unknown noise shape {shape!r}")


def sample_block(nm: NoiseModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n noise vectors with covariance Sigma, shape (n, dim)."""
    z = _unit_variance_block(nm.shape, rng, n, nm.dim)
    if nm.shape == "noiseless":
        return z
    return z @ nm.cholesky.T


def sample_noise(nm: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Draw a single noise vector, shape (dim,)."""
    return sample_block(nm, rng, 1)[0]
