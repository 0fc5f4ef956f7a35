"""Signal constellations (BPSK, Gray-labeled 8-PAM and 16-QAM) and SNR
conversions.

Bit index 1 is the most significant label bit.  Bit polarities are fixed so
that the fitted LLR approximation coefficients come out with the
conventional signs: for 8-PAM, bit 1 is positive for y > 0; for 16-QAM,
bit 1 is positive for y_r < 0 and bit 3 for y_i > 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("bpsk", "pam8", "qam16")


@dataclass(frozen=True)
class Constellation:
    """A signal set with its Gray bit labeling.

    Attributes:
        kind: one of 'bpsk', 'pam8', 'qam16'.
        points: complex signal points (imaginary part zero for 1-D sets).
        labels: (M, m) array of {0,1}, row k labels points[k].
        m: bits per symbol.
        avg_energy: mean squared point magnitude.
    """

    kind: str
    points: np.ndarray
    labels: np.ndarray
    m: int
    avg_energy: float

    @property
    def is_2d(self) -> bool:
        return self.kind == "qam16"

    def bit_subset(self, i: int, w: int) -> np.ndarray:
        """Points x with b^i(x) = w, for bit index i in 1..m."""
        if not 1 <= i <= self.m:
            raise ValueError(f"bit index {i} out of range 1..{self.m}")
        if w not in (0, 1):
            raise ValueError(f"bit value must be 0 or 1, got {w}")
        return self.points[self.labels[:, i - 1] == w]

    def label_of(self, point: complex) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.points - point)))
        if abs(self.points[idx] - point) > 1e-9:
            raise ValueError(f"{point} is not a constellation point")
        return self.labels[idx]


def _pam8() -> tuple[np.ndarray, np.ndarray]:
    levels = np.array([-7, -5, -3, -1, 1, 3, 5, 7], dtype=float)
    labels = np.zeros((8, 3), dtype=np.int8)
    for k, x in enumerate(levels):
        labels[k, 0] = 0 if x > 0 else 1
        labels[k, 1] = 0 if abs(x) in (1.0, 3.0) else 1
        labels[k, 2] = 0 if abs(x) in (3.0, 5.0) else 1
    return levels.astype(complex), labels


def _qam16() -> tuple[np.ndarray, np.ndarray]:
    axis = np.array([-3, -1, 1, 3], dtype=float)
    points = []
    labels = []
    for xr in axis:
        for xi in axis:
            points.append(xr + 1j * xi)
            labels.append([
                0 if xr < 0 else 1,
                0 if abs(xr) == 3.0 else 1,
                0 if xi > 0 else 1,
                0 if abs(xi) == 3.0 else 1,
            ])
    return np.array(points), np.array(labels, dtype=np.int8)


def build_constellation(kind: str) -> Constellation:
    """Builds one of the supported constellations.

    8-PAM levels are the odd integers {±1,...,±7} (avg energy 21); 16-QAM
    points are {±1,±3} x {±1,±3} (avg energy 10).  No normalization is
    applied: the noise std sigma carries all SNR scaling.
    """
    kind = kind.lower()
    if kind == "bpsk":
        points = np.array([1.0, -1.0], dtype=complex)
        labels = np.array([[0], [1]], dtype=np.int8)
    elif kind == "pam8":
        points, labels = _pam8()
    elif kind == "qam16":
        points, labels = _qam16()
    else:
        raise ValueError(f"unknown constellation kind {kind!r}")
    m = labels.shape[1]
    avg_energy = float(np.mean(np.abs(points) ** 2))
    return Constellation(kind=kind, points=points, labels=labels, m=m,
                         avg_energy=avg_energy)


@dataclass(frozen=True)
class SnrSpec:
    """SNR in dB with its convention: 'ebn0' (BPSK, needs the code rate R)
    or 'esn0' (8-PAM / 16-QAM)."""

    value_db: float
    convention: str = "esn0"
    rate: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.value_db):
            raise ValueError("SNR must be finite")
        if self.convention not in ("ebn0", "esn0"):
            raise ValueError(f"unknown SNR convention {self.convention!r}")
        if self.convention == "ebn0" and not 0 < self.rate <= 1:
            raise ValueError(f"rate must be in (0, 1], got {self.rate}")


def snr_to_sigma(c: Constellation, snr: SnrSpec) -> float:
    """Noise std per real dimension for the given SNR.

    BPSK uses Eb/N0 = 1/(2 R sigma^2); 8-PAM and 16-QAM use
    Es/N0 = avg_energy/(2 sigma^2).
    """
    lin = 10.0 ** (snr.value_db / 10.0)
    if snr.convention == "ebn0":
        if c.kind != "bpsk":
            raise ValueError("Eb/N0 convention is only supported for BPSK")
        return float(np.sqrt(1.0 / (2.0 * snr.rate * lin)))
    if c.kind == "bpsk":
        raise ValueError("BPSK SNRs use the Eb/N0 convention")
    return float(np.sqrt(c.avg_energy / (2.0 * lin)))


def sigma_to_snr(c: Constellation, sigma: float, convention: str = "esn0",
                 rate: float = 1.0) -> SnrSpec:
    """Inverse of snr_to_sigma (round-trips to ~1e-12 relative)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if convention == "ebn0":
        if c.kind != "bpsk":
            raise ValueError("Eb/N0 convention is only supported for BPSK")
        lin = 1.0 / (2.0 * rate * sigma**2)
    else:
        if c.kind == "bpsk":
            raise ValueError("BPSK SNRs use the Eb/N0 convention")
        lin = c.avg_energy / (2.0 * sigma**2)
    return SnrSpec(float(10.0 * np.log10(lin)), convention, rate)
