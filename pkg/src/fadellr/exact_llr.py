"""Exact channel LLRs for known and unknown CSI on the normalized Rayleigh
fading channel.

Everything runs in the log domain through the scaled complementary error
function, so the e^(z^2)*erfc terms that appear in the unknown-CSI
formulas never overflow.  The key primitive is

    log_phi(z) = log(1 + sqrt(pi) * z * exp(z^2) * erfc(-z)),

finite for any |z| (tested up to 40 and beyond).  The conditional pdfs of
the channel output given a transmitted point collapse, for both PAM and
QAM, to

    p(y|x) = C(sigma_hat) * exp(-|y|^2 / (2 sigma^2)) * Phi(s),

with sigma_hat^2 = |x|^2 + 2 sigma^2 and s = <x, y> / (sqrt(2) sigma
sigma_hat); that is the form evaluated here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, logsumexp

from .constellation import Constellation

_SQRT_PI = np.sqrt(np.pi)
_LOG_PI = np.log(np.pi)


def log_phi(z):
    """log of Phi(z) = 1 + sqrt(pi)*z*exp(z^2)*erfc(-z), overflow-free.

    For z <= 0, Phi(z) = 1 - sqrt(pi)*|z|*erfcx(|z|) lies in (0, 1].  For
    z > 0 we use the exact reflection Phi(z) = 2*sqrt(pi)*z*exp(z^2)
    + Phi(-z) and return z^2 + log(2*sqrt(pi)*z + exp(-z^2)*Phi(-z)).
    """
    z = np.asarray(z, dtype=float)
    az = np.abs(z)
    # Phi(-|z|) in (0, 1]; erfcx keeps this stable at any magnitude.
    phi_neg = 1.0 - _SQRT_PI * az * erfcx(az)
    phi_neg = np.maximum(phi_neg, np.finfo(float).tiny)
    with np.errstate(under="ignore"):
        pos = az * az + np.log(2.0 * _SQRT_PI * az + np.exp(-az * az) * phi_neg)
    out = np.where(z > 0, pos, np.log(phi_neg))
    return out if out.ndim else float(out)


def phi_stable(z):
    """Phi(z) itself; inf only where the true value exceeds float range
    (use log_phi in that regime)."""
    with np.errstate(over="ignore"):
        out = np.exp(log_phi(z))
    return out


def log_theta(z):
    """log of Theta(z) = exp(-z^2) + sqrt(pi)*z*erfc(-z) = exp(-z^2)*Phi(z)."""
    z = np.asarray(z, dtype=float)
    return log_phi(z) - z * z


def llr_bpsk_known_csi(y, a, sigma):
    """BPSK LLR with the gain known at the receiver: 2*a*y/sigma^2."""
    return 2.0 * np.asarray(a) * np.asarray(y) / sigma**2


def llr_bpsk_unknown_csi(y, sigma):
    """BPSK LLR without CSI: log Phi(u) - log Phi(-u),
    u = y / sqrt(2 sigma^2 (1 + 2 sigma^2)).  Odd in y, finite everywhere.
    """
    u = np.asarray(y, dtype=float) / np.sqrt(2.0 * sigma**2 * (1.0 + 2.0 * sigma**2))
    return log_phi(u) - log_phi(-u)


def log_pdf_pam(y, x, sigma):
    """log p(y|x) for a real point x on the 1-D no-CSI Rayleigh channel."""
    y = np.asarray(y, dtype=float)
    sh2 = x * x + 2.0 * sigma**2
    s = x * y / (np.sqrt(2.0 * sh2) * sigma)
    return (np.log(sigma) + 0.5 * np.log(2.0 / np.pi) - np.log(sh2)
            - y * y / (2.0 * sigma**2) + log_phi(s))


def pam_cond_pdf(y, x, sigma):
    """p(y|x) for M-ary PAM, unknown CSI (normalized Rayleigh gain)."""
    with np.errstate(under="ignore"):
        return np.exp(log_pdf_pam(y, x, sigma))


def log_pdf_qam(yr, yi, x, sigma):
    """log p(y|x) for a complex point x on the 2-D no-CSI Rayleigh channel."""
    yr = np.asarray(yr, dtype=float)
    yi = np.asarray(yi, dtype=float)
    xr, xi = float(np.real(x)), float(np.imag(x))
    sh2 = xr * xr + xi * xi + 2.0 * sigma**2
    s = (xr * yr + xi * yi) / (np.sqrt(2.0 * sh2) * sigma)
    return (-_LOG_PI - np.log(sh2)
            - (yr * yr + yi * yi) / (2.0 * sigma**2) + log_phi(s))


def qam_cond_pdf(y, x, sigma):
    """p(y|x) for M-ary QAM, unknown CSI; y complex or (yr, yi) pair."""
    y = np.asarray(y)
    with np.errstate(under="ignore"):
        return np.exp(log_pdf_qam(np.real(y), np.imag(y), x, sigma))


@dataclass(frozen=True)
class LlrQuery:
    constellation: Constellation
    bit: int
    sigma: float
    y: complex
    a: float | None = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 1 <= self.bit <= self.constellation.m:
            raise ValueError(f"bit index {self.bit} out of range")


def _log_pdf_matrix(c: Constellation, y, sigma, a=None):
    """(num_points, ...) stack of log p(y|x) over all constellation points.

    With a gain `a` the known-CSI Gaussian kernels are used (additive
    constants dropped; they cancel in every LLR)."""
    y = np.asarray(y)
    if a is not None:
        if c.is_2d:
            d2 = [np.abs(y - a * x) ** 2 for x in c.points]
        else:
            d2 = [(np.real(y) - a * np.real(x)) ** 2 for x in c.points]
        return np.stack([-d / (2.0 * sigma**2) for d in d2])
    if c.is_2d:
        return np.stack([log_pdf_qam(np.real(y), np.imag(y), x, sigma)
                         for x in c.points])
    return np.stack([log_pdf_pam(np.real(y), np.real(x), sigma)
                     for x in c.points])


def bit_llr_grid(c: Constellation, y, sigma, a=None):
    """All m bit LLRs at once: (m, ...) array for array-shaped y.

    Unknown CSI by default; pass the realized gain `a` for the known-CSI
    Gaussian path.  Computed with log-sum-exp over the bit subsets, so the
    result is finite for any finite y.
    """
    logp = _log_pdf_matrix(c, y, sigma, a)
    out = []
    for i in range(1, c.m + 1):
        mask0 = c.labels[:, i - 1] == 0
        out.append(logsumexp(logp[mask0], axis=0)
                   - logsumexp(logp[~mask0], axis=0))
    return np.stack(out)


def bit_llr(q: LlrQuery):
    """LLR of bit i given channel output y (scalar convenience wrapper)."""
    val = bit_llr_grid(q.constellation, np.asarray(q.y), q.sigma, q.a)[q.bit - 1]
    return float(val)
