"""Densities of true and approximate LLRs, quantization onto the DE grid,
and channel-adapter symmetrization.

The DE message grid mirrors an 11-bit belief-propagation decoder: LLRs are
rounded to the 2^bits - 1 levels k*delta, k in [-K, K], K = 2^(bits-1) - 1,
with delta = l_max / K; mass falling outside saturates at the +-l_max
bins.  l_max is 25 by default and 35 for runs whose approximation carries
terms beyond degree one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx, logsumexp

from .approx_llr import ApproxLlr, eval_approx, taylor_bpsk_cubic
from .channel import sample_gain
from .constellation import Constellation
from .exact_llr import bit_llr_grid, log_pdf_pam, log_pdf_qam, log_theta

L_MAX_DEFAULT = 25.0
L_MAX_NONLINEAR = 35.0


@dataclass(frozen=True)
class LlrGrid:
    """Uniform symmetric LLR grid with a bin centered at zero."""

    l_max: float = L_MAX_DEFAULT
    bits: int = 11

    @property
    def half(self) -> int:
        return 2 ** (self.bits - 1) - 1

    @property
    def delta(self) -> float:
        return self.l_max / self.half

    @property
    def size(self) -> int:
        return 2 * self.half + 1

    def values(self) -> np.ndarray:
        k = np.arange(-self.half, self.half + 1)
        return k * self.delta

    def quantize(self, values, masses) -> np.ndarray:
        """Accumulates point masses onto the grid by rounding to the
        nearest level, saturating outside [-l_max, l_max].  The output
        total equals sum(masses) up to roundoff."""
        idx = np.rint(np.asarray(values, dtype=float) / self.delta).astype(np.int64)
        np.clip(idx, -self.half, self.half, out=idx)
        return np.bincount(idx + self.half, weights=masses,
                           minlength=self.size)

    def deposit(self, values, masses) -> np.ndarray:
        """Accumulates a finely sampled continuous density onto the grid,
        splitting each sample linearly between its two nearest levels.

        This estimates the same per-bin integrals as `quantize` but is
        free of the sample-grid aliasing ripple, so it is what the
        channel-density builders use."""
        x = np.asarray(values, dtype=float) / self.delta + self.half
        np.clip(x, 0.0, 2.0 * self.half, out=x)
        i0 = np.floor(x).astype(np.int64)
        np.minimum(i0, 2 * self.half - 1, out=i0)
        frac = x - i0
        masses = np.asarray(masses, dtype=float)
        out = np.bincount(i0, weights=masses * (1.0 - frac),
                          minlength=self.size)
        out += np.bincount(i0 + 1, weights=masses * frac,
                           minlength=self.size)
        return out


@dataclass
class QuantizedDensity:
    grid: LlrGrid
    mass: np.ndarray

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=float)
        if self.mass.shape != (self.grid.size,):
            raise ValueError("mass length does not match grid")

    def error_probability(self) -> float:
        """Negative mass plus half the zero bin."""
        k = self.grid.half
        return float(self.mass[:k].sum() + 0.5 * self.mass[k])

    def mean(self) -> float:
        return float(np.dot(self.grid.values(), self.mass))

    def total(self) -> float:
        return float(self.mass.sum())


def grid_for(approx=None, bits: int = 11, l_max: float | None = None) -> LlrGrid:
    """Default DE grid: l_max 25, widened to 35 when the approximation has
    nonlinear terms."""
    if l_max is None:
        nonlin = isinstance(approx, ApproxLlr) and approx.nonlinear
        l_max = L_MAX_NONLINEAR if nonlin else L_MAX_DEFAULT
    return LlrGrid(l_max=l_max, bits=bits)


# ----------------------------------------------------------------------
# analytic densities (BPSK, X = +1 transmitted)

def pdf_y_given_plus1(y, sigma: float):
    """Channel-output pdf for BPSK x=+1 over the no-CSI Rayleigh channel."""
    y = np.asarray(y, dtype=float)
    u = y / math.sqrt(2.0 * sigma**2 * (1.0 + 2.0 * sigma**2))
    pref = math.sqrt(2.0 / math.pi) * sigma / (1.0 + 2.0 * sigma**2)
    with np.errstate(under="ignore"):
        return pref * np.exp(-y * y / (1.0 + 2.0 * sigma**2) + log_theta(u))


def pdf_llr_linear(lhat, sigma: float):
    """Closed-form pdf of alpha_T * Y given X = +1."""
    l = np.asarray(lhat, dtype=float)
    pref = sigma**2 / (math.pi * math.sqrt(1.0 + 2.0 * sigma**2))
    t = l / (2.0 * math.sqrt(math.pi))
    with np.errstate(under="ignore"):
        g = np.exp(-(1.0 + 2.0 * sigma**2) * l * l / (4.0 * math.pi))
        # 0.5*l*exp(-sigma^2 l^2/(2 pi))*erfc(-t), stable on both tails
        direct = np.exp(-sigma**2 * l * l / (2.0 * math.pi)) * erfc(-t)
        scaled = erfcx(np.abs(t)) * np.exp(-sigma**2 * l * l / (2.0 * math.pi)
                                           - t * t)
        tail = np.where(t < -1.0, scaled, direct)
    return pref * (g + 0.5 * l * tail)


def cubic_inverse(lhat, alpha: float, beta: float):
    """Closed-form inverse of g(y) = alpha*y + beta*y^3 (alpha, beta > 0)."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("g is only invertible in closed form for alpha, beta > 0")
    l = np.asarray(lhat, dtype=float)
    la = np.abs(l)
    # evaluated on |l| and reflected; the radical is then cancellation-free
    phi = np.cbrt(12.0 * beta**2 * (9.0 * la + np.sqrt(12.0 * alpha**3 / beta
                                                       + 81.0 * la * la)))
    y = phi / (6.0 * beta) - 2.0 * alpha / phi
    return np.sign(l) * y


def pdf_llr_cubic(lhat, sigma: float):
    """Pdf of alpha_T*Y + beta_T*Y^3 given X = +1 (change of variables
    through the closed-form cubic inverse)."""
    alpha, beta = taylor_bpsk_cubic(sigma)
    y = cubic_inverse(lhat, alpha, beta)
    return pdf_y_given_plus1(y, sigma) / (alpha + 3.0 * beta * y * y)


# ----------------------------------------------------------------------
# bit-channel densities

def _llr_fn_1d(c: Constellation, bit: int, sigma: float, llr):
    if llr == "exact":
        return lambda y: bit_llr_grid(c, y + 0j, sigma)[bit - 1]
    return lambda y: eval_approx(llr, bit, y)


def bit_channel_density_1d(c: Constellation, bit: int, w: int, sigma: float,
                           grid: LlrGrid, llr="exact",
                           n_points: int = 1 << 17) -> QuantizedDensity:
    """Density of the bit LLR given transmitted bit w, by deterministic
    transform of a fine output grid (1-D constellations).

    The conditioning signal is uniform over the bit subset chi_w^i; llr is
    'exact' or a fitted ApproxLlr."""
    if c.is_2d:
        raise ValueError("use bit_channel_density_2d for 2-D constellations")
    xs = np.real(c.bit_subset(bit, w))
    if xs.size == 0:
        raise ValueError("empty bit subset")
    y_hi = float(np.max(np.abs(c.points))) * 6.5 + 9.0 * sigma
    h = 2.0 * y_hi / n_points
    y = -y_hi + (np.arange(n_points) + 0.5) * h
    pdf = np.zeros_like(y)
    for x in xs:
        with np.errstate(under="ignore"):
            pdf += np.exp(log_pdf_pam(y, float(x), sigma))
    pdf *= h / xs.size
    lv = _llr_fn_1d(c, bit, sigma, llr)(y)
    mass = grid.deposit(lv, pdf)
    mass /= mass.sum()
    return QuantizedDensity(grid, mass)


def bit_channel_densities_2d(c: Constellation, sigma: float, grid: LlrGrid,
                             llr="exact", n_axis: int = 1024,
                             chunk_rows: int = 64):
    """Densities of all (bit, w) pairs for a 2-D constellation by
    deterministic transform of a midpoint grid over the output plane.

    Returns a dict {(bit, w): QuantizedDensity}.  One pass evaluates the
    16 conditional log-pdfs chunk by chunk, so memory stays flat.
    """
    if not c.is_2d:
        raise ValueError("2-D constellations only")
    r_hi = float(np.max(np.abs(c.points.real))) * 6.5 + 9.0 * sigma
    h = 2.0 * r_hi / n_axis
    axis = -r_hi + (np.arange(n_axis) + 0.5) * h
    masks0 = [c.labels[:, i] == 0 for i in range(c.m)]
    acc = {(i + 1, w): np.zeros(grid.size) for i in range(c.m) for w in (0, 1)}
    exact_needed = llr == "exact"
    for lo in range(0, n_axis, chunk_rows):
        rows = axis[lo:lo + chunk_rows]
        yr, yi = np.meshgrid(rows, axis, indexing="ij")
        logp = np.stack([log_pdf_qam(yr, yi, x, sigma) for x in c.points])
        with np.errstate(under="ignore"):
            px = np.exp(logp)
        yflat = (yr + 1j * yi).ravel()
        for i in range(c.m):
            m0 = masks0[i]
            if exact_needed:
                lv = (logsumexp(logp[m0], axis=0)
                      - logsumexp(logp[~m0], axis=0)).ravel()
            else:
                lv = eval_approx(llr, i + 1, yflat)
            for w, mk in ((0, m0), (1, ~m0)):
                cond = px[mk].mean(axis=0).ravel() * h * h
                acc[(i + 1, w)] += grid.deposit(lv, cond)
    out = {}
    for key, mass in acc.items():
        out[key] = QuantizedDensity(grid, mass / mass.sum())
    return out


def bit_channel_density_mc(c: Constellation, bit: int, w: int, sigma: float,
                           grid: LlrGrid, llr="exact",
                           n_samples: int = 10**7,
                           rng=None) -> QuantizedDensity:
    """Monte Carlo estimate of a bit-channel LLR density (any dimension)."""
    if n_samples < 10**5:
        raise ValueError("use at least 1e5 samples")
    rng = np.random.default_rng(0) if rng is None else rng
    xs = c.bit_subset(bit, w)
    mass = np.zeros(grid.size)
    chunk = 1 << 20
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        x = xs[rng.integers(0, xs.size, n)]
        a = sample_gain(rng, n)
        if c.is_2d:
            y = a * x + sigma * (rng.standard_normal(n)
                                 + 1j * rng.standard_normal(n))
            lv = (bit_llr_grid(c, y, sigma)[bit - 1] if llr == "exact"
                  else eval_approx(llr, bit, y))
        else:
            y = a * np.real(x) + sigma * rng.standard_normal(n)
            lv = _llr_fn_1d(c, bit, sigma, llr)(y)
        mass += grid.quantize(lv, np.full(n, 1.0))
        done += n
    return QuantizedDensity(grid, mass / mass.sum())


def symmetrize(d0: QuantizedDensity, d1: QuantizedDensity) -> QuantizedDensity:
    """Channel-adapter symmetrization: p(l) = (p(l|0) + p(-l|1)) / 2."""
    if d0.grid != d1.grid:
        raise ValueError("densities live on different grids")
    return QuantizedDensity(d0.grid, 0.5 * (d0.mass + d1.mass[::-1]))


def bpsk_llr_density(sigma: float, grid: LlrGrid, llr,
                     n_points: int = 1 << 18) -> QuantizedDensity:
    """BPSK channel-LLR density under x = +1 (already output-symmetric).

    llr: 'exact' or an ApproxLlr; linear/cubic Taylor and the linear
    baselines go through the closed-form output pdf."""
    y_hi = 1.0 * 6.5 + 9.0 * sigma + 2.0
    h = 2.0 * y_hi / n_points
    y = -y_hi + (np.arange(n_points) + 0.5) * h
    pdf = pdf_y_given_plus1(y, sigma) * h
    if llr == "exact":
        from .exact_llr import llr_bpsk_unknown_csi
        lv = llr_bpsk_unknown_csi(y, sigma)
    else:
        lv = eval_approx(llr, 1, y)
    mass = grid.deposit(lv, pdf)
    mass /= mass.sum()
    return QuantizedDensity(grid, mass)


def bicm_channel_density(c: Constellation, sigma: float, grid: LlrGrid,
                         llr="exact", source: str = "transform",
                         n_points: int = 1 << 17, n_axis: int = 1024,
                         mc_samples: int = 10**7, seed: int = 0) -> QuantizedDensity:
    """Adapter-symmetrized channel density for density evolution: the
    uniform mixture of the m symmetrized bit-channel densities."""
    if c.kind == "bpsk":
        return bpsk_llr_density(sigma, grid, llr)
    total = np.zeros(grid.size)
    if c.is_2d and source == "transform":
        dens = bit_channel_densities_2d(c, sigma, grid, llr, n_axis=n_axis)
        for i in range(1, c.m + 1):
            total += symmetrize(dens[(i, 0)], dens[(i, 1)]).mass
    else:
        rng = np.random.default_rng(seed)
        for i in range(1, c.m + 1):
            if source == "mc" or c.is_2d:
                d0 = bit_channel_density_mc(c, i, 0, sigma, grid, llr,
                                            mc_samples, rng)
                d1 = bit_channel_density_mc(c, i, 1, sigma, grid, llr,
                                            mc_samples, rng)
            else:
                d0 = bit_channel_density_1d(c, i, 0, sigma, grid, llr, n_points)
                d1 = bit_channel_density_1d(c, i, 1, sigma, grid, llr, n_points)
            total += symmetrize(d0, d1).mass
    return QuantizedDensity(grid, total / c.m)


def quantize_analytic_pdf(pdf_fn, support: tuple, grid: LlrGrid,
                          n_points: int = 1 << 18) -> QuantizedDensity:
    """Quantizes a closed-form LLR pdf onto the grid (midpoint masses on a
    fine grid over `support`, saturated and renormalized)."""
    lo, hi = support
    h = (hi - lo) / n_points
    x = lo + (np.arange(n_points) + 0.5) * h
    mass = grid.deposit(x, pdf_fn(x) * h)
    mass /= mass.sum()
    return QuantizedDensity(grid, mass)
