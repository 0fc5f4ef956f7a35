"""Uncorrelated flat Rayleigh fading channel Y = A*X + Z.

The gain A has the normalized Rayleigh pdf 2a*exp(-a^2) (E[A^2] = 1), the
noise Z is Gaussian with variance sigma^2 per real dimension.  Gains,
noise and inputs are i.i.d. across channel uses.

All sampling is driven by explicitly passed numpy Generators so parallel
Monte Carlo stays reproducible; use `stream(seed, *key)` to derive a
deterministic per-worker / per-frame stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    sigma: float
    csi_at_rx: bool = False

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def stream(seed, *key) -> np.random.Generator:
    """Deterministic generator keyed by (seed, *key), e.g. (seed, snr index,
    frame index)."""
    return np.random.default_rng([int(seed), *[int(k) for k in key]])


def sample_gain(rng: np.random.Generator, size=None) -> np.ndarray:
    """Normalized Rayleigh gains via the inverse CDF sqrt(-ln U)."""
    u = rng.random(size)
    return np.sqrt(-np.log1p(-u))


def transmit(x, p: ChannelParams, rng: np.random.Generator, two_dim=None):
    """Passes symbols through the fading channel.

    For 1-D constellations the output is real with noise variance sigma^2;
    for 2-D ones the noise is complex with variance sigma^2 per real
    dimension.  `two_dim` selects the mode explicitly; by default it is
    inferred from the input dtype/values.  Returns (y, a); a is the
    realized gain vector (only meaningful to the caller when csi_at_rx is
    set, but always returned).
    """
    x = np.asarray(x)
    if two_dim is None:
        two_dim = bool(np.iscomplexobj(x) and np.any(x.imag != 0))
    a = sample_gain(rng, x.shape if x.shape else None)
    if two_dim:
        z = p.sigma * (rng.standard_normal(x.shape)
                       + 1j * rng.standard_normal(x.shape))
        y = a * x + z
    else:
        z = p.sigma * rng.standard_normal(x.shape if x.shape else None)
        y = a * np.real(x) + z
    return y, a
