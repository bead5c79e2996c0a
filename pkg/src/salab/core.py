"""Shared vocabulary: RNG streams, scaling functions, experiment configuration.

Conventions used throughout the package:

* state vectors are 1-D float64 arrays of length d >= 1,
* square matrices are (d, d) float64 arrays,
* every random draw comes from an explicitly seeded counter-based stream,
  so that a fixed (seed, stream) pair reproduces the same bytes on disk
  regardless of scheduling or thread count.
"""

from __future__ import annotations

import ast
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

_MASK64 = (1 << 64) - 1

#: numerical tolerance for "the drift vanishes at the root"
ROOT_TOL = 1e-12


class ConfigError(ValueError):
    """A configuration failed validation; ``errors`` lists every problem found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NumericalError(RuntimeError):
    """A numerical routine could not produce a trustworthy result."""


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

def seed_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent reproducible stream keyed by (seed, stream).

    Uses the counter-based Philox generator, so distinct stream ids give
    statistically independent sequences and the same pair always yields the
    identical sequence, independent of how work is scheduled.
    """
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def stream_id(*labels: Any) -> int:
    """Stable 64-bit stream id derived from a tuple of printable labels."""
    digest = hashlib.blake2b(repr(labels).encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


# ---------------------------------------------------------------------------
# array helpers
# ---------------------------------------------------------------------------

def as_vector(x, name: str = "vector") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1 or arr.size < 1:
        raise ConfigError(f"{name} must be a 1-D array of length >= 1")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must have finite entries")
    return arr


def as_square_matrix(m, name: str = "matrix") -> np.ndarray:
    arr = np.atleast_2d(np.asarray(m, dtype=float))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"{name} must be square")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must have finite entries")
    return arr


def require_spd(m, name: str = "matrix") -> np.ndarray:
    """Validate symmetric positive definiteness, returning the symmetrized matrix."""
    arr = as_square_matrix(m, name)
    if not np.allclose(arr, arr.T, atol=1e-12 * max(1.0, float(np.abs(arr).max()))):
        raise ConfigError(f"{name} not symmetric")
    arr = 0.5 * (arr + arr.T)
    eigs = np.linalg.eigvalsh(arr)
    if eigs.min() <= 1e-14 * max(1.0, eigs.max()):
        raise ConfigError(f"{name} not positive definite")
    return arr


# ---------------------------------------------------------------------------
# scaling functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerScaling:
    """Power-law normalization g(alpha) = coeff * alpha**exponent.

    Exponents in (0, 1) guarantee both g(alpha) -> 0 and alpha/g(alpha) -> 0
    as alpha -> 0; exponent 1.0 is representable only so that it can be
    examined and rejected by the scaling search.
    """

    exponent: float
    coeff: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.exponent <= 1.0):
            raise ConfigError("scaling exponent must lie in (0, 1]")
        if self.coeff <= 0.0:
            raise ConfigError("scaling coefficient must be positive")

    def __call__(self, alpha: float) -> float:
        return self.coeff * float(alpha) ** self.exponent


# ---------------------------------------------------------------------------
# experiment configuration
# ---------------------------------------------------------------------------

#: drift identifiers accepted in configuration files
DRIFT_IDS = (
    "grad_quadratic",
    "linear",
    "contractive_tanh",
    "quartic",
    "exp_square",
    "quartic_sine",
    "custom",
)

NOISE_SHAPES = ("gaussian", "uniform", "rademacher", "noiseless")


@dataclass
class ExperimentConfig:
    """Raw experiment description, as read from a config file."""

    drift: str = "grad_quadratic"
    drift_params: dict = field(default_factory=dict)
    noise_shape: str = "gaussian"
    noise_sigma: Any = ((1.0,),)
    alphas: tuple = (0.01,)
    scaling: Any = "auto"          # exponent in (0, 1] or "auto"
    n_chains: int = 64
    burn_in: Any = "auto"          # steps, or "auto" -> ceil(10 / alpha)
    thin: Any = "auto"             # steps between records, or "auto" -> ceil(1 / alpha)
    samples_per_chain: int = 4096
    seed: int = 0
    out_dir: str = "out"
    alpha_max: Any = None          # stability threshold override


@dataclass(frozen=True)
class ValidatedConfig:
    """Resolved, immutable configuration; safe to share across threads."""

    op: Any                        # drift.DriftOperator
    noise: Any                     # noise.NoiseModel
    alphas: tuple
    scaling: Any                   # PowerScaling or "auto"
    n_chains: int
    burn_in: Any
    thin: Any
    samples_per_chain: int
    seed: int
    out_dir: str
    alpha_max: float


def validate_config(cfg: ExperimentConfig) -> ValidatedConfig:
    """Check every invariant and resolve drift/noise identifiers.

    Raises ConfigError carrying the full list of problems found.
    """
    from . import drift as drift_mod
    from . import noise as noise_mod

    errors = []
    op = None
    if cfg.drift not in DRIFT_IDS:
        errors.append(f"unknown drift id {cfg.drift!r}")
    else:
        try:
            op = drift_mod.from_config(cfg.drift, cfg.drift_params)
        except (ConfigError, KeyError, ValueError) as exc:
            errors.append(f"drift: {exc}")

    nm = None
    if cfg.noise_shape not in NOISE_SHAPES:
        errors.append(f"unknown noise shape {cfg.noise_shape!r}")
    else:
        try:
            nm = noise_mod.make_noise(cfg.noise_shape, cfg.noise_sigma)
        except ConfigError as exc:
            errors.append(str(exc))

    if op is not None and nm is not None and nm.dim != op.dim:
        errors.append(
            f"noise dimension {nm.dim} does not match drift dimension {op.dim}"
        )

    alphas = tuple(float(a) for a in np.atleast_1d(np.asarray(cfg.alphas, dtype=float)))
    if any(a <= 0 for a in alphas):
        errors.append("alpha must be positive")
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        errors.append("alpha list must be strictly decreasing")

    alpha_max = None
    if cfg.alpha_max is not None:
        alpha_max = float(cfg.alpha_max)
        if alpha_max <= 0:
            errors.append("alpha_max must be positive")
    elif op is not None:
        alpha_max = op.stability_limit
    if alpha_max is not None and all(a > 0 for a in alphas):
        too_big = [a for a in alphas if a > alpha_max]
        if too_big:
            errors.append(
                f"alpha {max(too_big):g} above stability threshold {alpha_max:g}"
            )

    scaling = cfg.scaling
    if scaling != "auto":
        try:
            scaling = PowerScaling(float(scaling))
        except (TypeError, ValueError, ConfigError) as exc:
            errors.append(f"scaling: {exc}")

    if int(cfg.n_chains) < 1:
        errors.append("n_chains must be >= 1")
    if cfg.burn_in != "auto" and int(cfg.burn_in) < 0:
        errors.append("burn_in must be >= 0")
    if cfg.thin != "auto" and int(cfg.thin) < 1:
        errors.append("thin must be >= 1")
    if int(cfg.samples_per_chain) < 1:
        errors.append("samples_per_chain must be >= 1")

    if errors:
        raise ConfigError(errors)

    return ValidatedConfig(
        op=op,
        noise=nm,
        alphas=alphas,
        scaling=scaling,
        n_chains=int(cfg.n_chains),
        burn_in=cfg.burn_in if cfg.burn_in == "auto" else int(cfg.burn_in),
        thin=cfg.thin if cfg.thin == "auto" else int(cfg.thin),
        samples_per_chain=int(cfg.samples_per_chain),
        seed=int(cfg.seed),
        out_dir=str(cfg.out_dir),
        alpha_max=float(alpha_max),
    )


# ---------------------------------------------------------------------------
# config file format: flat `key = value` lines, `#` comments, UTF-8
# ---------------------------------------------------------------------------

_SCALAR_KEYS = {
    "drift": str,
    "noise.shape": str,
    "scaling": None,
    "n_chains": int,
    "burn_in": None,
    "thin": None,
    "samples_per_chain": int,
    "seed": int,
    "out_dir": str,
    "alpha_max": float,
}


def _parse_value(text: str):
    """Parse a config value: literal (number/list/nested list) or bare string."""
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        pass
    if "," in text:
        # bare comma list such as `0.1, 0.01`
        try:
            return ast.literal_eval(f"[{text}]")
        except (ValueError, SyntaxError):
            pass
    return text


def parse_config_file(path) -> ExperimentConfig:
    """Read a `key = value` config file into an ExperimentConfig."""
    cfg = ExperimentConfig()
    errors = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected `key = value`")
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        parsed = _parse_value(value)
        if key == "alphas":
            cfg.alphas = tuple(np.atleast_1d(parsed).astype(float))
        elif key == "noise.sigma":
            cfg.noise_sigma = parsed
        elif key.startswith("drift."):
            cfg.drift_params[key[len("drift."):]] = parsed
        elif key in _SCALAR_KEYS:
            attr = key.replace("noise.shape", "noise_shape").replace(".", "_")
            caster = _SCALAR_KEYS[key]
            try:
                cfg.__setattr__(attr, caster(parsed) if caster else parsed)
            except (TypeError, ValueError):
                errors.append(f"line {lineno}: bad value for {key}: {value.strip()!r}")
        else:
            errors.append(f"line {lineno}: unknown key {key!r}")
    if errors:
        raise ConfigError(errors)
    return cfg
