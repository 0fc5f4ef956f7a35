"""Quantized density evolution for irregular LDPC ensembles, SNR-threshold
bisection, and the alternating fit/threshold fixed-point iteration for
Taylor-approximated BICM demappers.

The message densities live on the uniform LLR grid of llr_density.  The
variable-node update is an exact grid convolution: incoming messages sum
on an extended grid (one FFT pass per iteration) and saturate once at
+-l_max.  The check-node update combines messages pairwise through a
precomputed quantized box-plus table, which is exact up to the output
rounding; the saturation bins act as perfect (infinite) messages there.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft

from .constellation import Constellation, SnrSpec, snr_to_sigma
from .llr_density import LlrGrid, QuantizedDensity

log = logging.getLogger(__name__)

try:
    from numba import njit

    _NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f
        return wrap


# ----------------------------------------------------------------------
# ensembles

@dataclass(frozen=True)
class Ensemble:
    """Edge-perspective degree distributions lambda(x), rho(x)."""

    lam: tuple  # ((degree, fraction), ...)
    rho: tuple

    def __post_init__(self):
        for side in (self.lam, self.rho):
            degs = [d for d, _ in side]
            fracs = [f for _, f in side]
            if not side or any(d < 2 for d in degs):
                raise ValueError("degrees must be >= 2")
            if len(set(degs)) != len(degs):
                raise ValueError("duplicate degrees")
            if any(not 0 < f <= 1 for f in fracs):
                raise ValueError("fractions must lie in (0, 1]")
            if abs(sum(fracs) - 1.0) > 1e-6:
                raise ValueError(f"fractions sum to {sum(fracs)}, not 1")
        if not 0.0 < self.rate < 1.0:
            raise ValueError(f"design rate {self.rate} outside (0, 1)")

    @property
    def rate(self) -> float:
        lv = sum(f / d for d, f in self.lam)
        cv = sum(f / d for d, f in self.rho)
        return 1.0 - cv / lv

    @classmethod
    def regular(cls, dv: int, dc: int) -> "Ensemble":
        return cls(((dv, 1.0),), ((dc, 1.0),))

    @classmethod
    def from_dicts(cls, lam: dict, rho: dict) -> "Ensemble":
        return cls(tuple(sorted(lam.items())), tuple(sorted(rho.items())))


def load_ensemble(path) -> Ensemble:
    """Reads an ensemble file: lines 'v <degree> <fraction>' and
    'c <degree> <fraction>'; '#' starts a comment."""
    lam: dict = {}
    rho: dict = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] not in ("v", "c"):
                raise ValueError(f"{path}:{ln}: expected 'v|c degree fraction'")
            side = lam if parts[0] == "v" else rho
            side[int(parts[1])] = side.get(int(parts[1]), 0.0) + float(parts[2])
    return Ensemble.from_dicts(lam, rho)


def save_ensemble(ens: Ensemble, path) -> None:
    with open(path, "w") as fh:
        for d, f in ens.lam:
            fh.write(f"v {d} {f!r}\n")
        for d, f in ens.rho:
            fh.write(f"c {d} {f!r}\n")


# ----------------------------------------------------------------------
# check-node update: quantized pairwise box-plus

_MAG_TABLE_CACHE: dict = {}


def _boxplus_mag(u, v):
    """Exact box-plus of two nonnegative LLR magnitudes."""
    return (np.minimum(u, v) + np.log1p(np.exp(-(u + v)))
            - np.log1p(np.exp(-np.abs(u - v))))


def _mag_table(grid: LlrGrid) -> np.ndarray:
    """(half+1)^2 table of quantized |boxplus| bin indices.

    Row/column `half` (the saturation level) is overridden to behave as a
    perfect message: boxplus(+-l_max, b) passes b through unchanged."""
    key = (grid.bits, grid.l_max)
    tab = _MAG_TABLE_CACHE.get(key)
    if tab is not None:
        return tab
    k = grid.half
    u = np.arange(k + 1) * grid.delta
    mag = _boxplus_mag(u[:, None], u[None, :])
    tab = np.rint(mag / grid.delta).astype(np.int32)
    tab[k, :] = np.arange(k + 1, dtype=np.int32)
    tab[:, k] = np.arange(k + 1, dtype=np.int32)
    np.clip(tab, 0, k, out=tab)
    _MAG_TABLE_CACHE[key] = tab
    return tab


@njit(cache=True)
def _pairwise_check(p, q, mag, half):  # pragma: no cover - jitted
    out = np.zeros(p.shape[0])
    n = 2 * half + 1
    for i in range(n):
        pi = p[i]
        if pi == 0.0:
            continue
        ii = i - half
        ai = ii if ii >= 0 else -ii
        ni = ii < 0
        row = mag[ai]
        for j in range(n):
            qj = q[j]
            if qj == 0.0:
                continue
            jj = j - half
            aj = jj if jj >= 0 else -jj
            m = row[aj]
            if ni != (jj < 0):
                out[half - m] += pi * qj
            else:
                out[half + m] += pi * qj
    return out


def _pairwise_check_numpy(p, q, mag, half):
    """Vectorized fallback when numba is unavailable."""
    n = 2 * half + 1
    kk = np.arange(n) - half
    sgn = np.sign(kk)
    idx = np.where(sgn[:, None] * sgn[None, :] < 0,
                   half - mag[np.abs(kk)][:, np.abs(kk)],
                   half + mag[np.abs(kk)][:, np.abs(kk)])
    w = np.outer(p, q)
    return np.bincount(idx.ravel(), weights=w.ravel(), minlength=n)


def check_combine(p: np.ndarray, q: np.ndarray, grid: LlrGrid) -> np.ndarray:
    mag = _mag_table(grid)
    if _NUMBA:
        return _pairwise_check(p, q, mag, grid.half)
    return _pairwise_check_numpy(p, q, mag, grid.half)


def de_check_update(v: QuantizedDensity, rho) -> QuantizedDensity:
    """Density of the check-to-variable message: pairwise quantized
    box-plus over d-1 inputs, mixed over the edge fractions rho."""
    grid = v.grid
    rho = tuple(rho) if not isinstance(rho, dict) else tuple(sorted(rho.items()))
    dmax = max(d for d, _ in rho)
    frac = dict(rho)
    out = np.zeros(grid.size)
    w = v.mass
    for d in range(2, dmax + 1):
        if d > 2:
            w = check_combine(w, v.mass, grid)
        if d in frac:
            out += frac[d] * w
    total = out.sum()
    if abs(total - 1.0) > 1e-9:
        log.warning("check update mass drift %.3e, renormalizing", total - 1.0)
    return QuantizedDensity(grid, out / total)


# ----------------------------------------------------------------------
# variable-node update: exact sum on an extended grid, one saturation

def de_variable_update(channel: QuantizedDensity, check: QuantizedDensity,
                       lam) -> QuantizedDensity:
    """Density of channel LLR plus d-1 i.i.d. check messages, mixed over
    the edge fractions lambda.  Messages add exactly on an extended grid
    (FFT convolution) and saturate once at +-l_max."""
    grid = channel.grid
    if check.grid != grid:
        raise ValueError("grid mismatch")
    lam = tuple(lam) if not isinstance(lam, dict) else tuple(sorted(lam.items()))
    dmax = max(d for d, _ in lam)
    if dmax < 2:
        raise ValueError("lambda has no degrees >= 2")
    frac = dict(lam)
    n = grid.size
    half = grid.half
    ext_len = dmax * (n - 1) + 1
    nfft = next_fast_len(ext_len)
    ch_f = rfft(channel.mass, nfft)
    ck_f = rfft(check.mass, nfft)
    freqs = np.arange(ch_f.shape[0])
    acc = np.zeros_like(ch_f)
    pw = np.ones_like(ck_f)
    for d in range(2, dmax + 1):
        pw = pw * ck_f
        if d in frac:
            # align value-origin of ck^(d-1) with that of ck^(dmax-1)
            shift = (dmax - d) * half
            acc = acc + frac[d] * pw * np.exp(-2j * np.pi * freqs * shift / nfft)
    ext = irfft(acc * ch_f, nfft)[:ext_len]
    np.maximum(ext, 0.0, out=ext)
    # fold: extended index 0 corresponds to value -dmax*half*delta
    c0 = dmax * half
    mass = ext[c0 - half:c0 + half + 1].copy()
    mass[0] += ext[:c0 - half].sum()
    mass[-1] += ext[c0 + half + 1:].sum()
    total = mass.sum()
    if abs(total - 1.0) > 1e-9:
        log.warning("variable update mass drift %.3e, renormalizing", total - 1.0)
    return QuantizedDensity(grid, mass / total)


# ----------------------------------------------------------------------
# DE runs and thresholds

@dataclass(frozen=True)
class DeParams:
    max_iter: int = 1000
    target_error: float = 1e-7
    bits: int = 11
    l_max: float | None = None  # None: 25, or 35 for nonlinear approximations
    stall_window: int = 30
    stall_rtol: float = 1e-12


@dataclass
class DeResult:
    converged: bool
    iterations: int
    trajectory: np.ndarray


def de_run(channel: QuantizedDensity, ens: Ensemble,
           params: DeParams = DeParams()) -> DeResult:
    """Runs density evolution from the (adapter-symmetrized) channel
    density.  The error functional is the negative mass plus half the
    zero-bin mass of the variable-to-check density.  Stops at the target,
    at max_iter, or when the trajectory stalls above target."""
    v = channel
    errs = [v.error_probability()]
    best = errs[0]
    last_improve = 0
    for it in range(1, params.max_iter + 1):
        cv = de_check_update(v, ens.rho)
        v = de_variable_update(channel, cv, ens.lam)
        err = v.error_probability()
        errs.append(err)
        if err < params.target_error:
            return DeResult(True, it, np.array(errs))
        # below threshold the quantized map settles into a fixed point or a
        # small cycle: stop once the running minimum stops improving
        if err < best * (1.0 - params.stall_rtol):
            best, last_improve = err, it
        elif it - last_improve >= params.stall_window:
            return DeResult(False, it, np.array(errs))
    return DeResult(False, params.max_iter, np.array(errs))


@dataclass
class ThresholdResult:
    snr_db: float
    sigma: float
    iterations: int
    converged: bool
    bracket: tuple = ()


class BracketError(ValueError):
    """The bisection bracket does not straddle the threshold."""


@dataclass(frozen=True)
class SnrAxis:
    """Maps an SNR in dB to the noise std for one constellation."""

    constellation: Constellation
    convention: str = "esn0"
    rate: float = 1.0

    def sigma(self, snr_db: float) -> float:
        return snr_to_sigma(self.constellation,
                            SnrSpec(snr_db, self.convention, self.rate))


def de_threshold(ens: Ensemble, density_builder, axis: SnrAxis,
                 bracket: tuple, params: DeParams = DeParams(),
                 resolution_db: float = 0.01) -> ThresholdResult:
    """Bisects the SNR threshold of an ensemble/demapper pair.

    density_builder(sigma, grid) must return the symmetrized channel
    density at that noise level; it is reinvoked at every probe, so
    per-sigma refitting (or holding a fitted approximation fixed) is the
    builder's choice.  bracket = (snr_lo, snr_hi) must fail at lo and
    succeed at hi.
    """
    lo, hi = bracket
    if not lo < hi:
        raise BracketError(f"bracket {bracket} is not increasing")
    grid = LlrGrid(l_max=params.l_max or 25.0, bits=params.bits)

    def probe(snr_db: float) -> DeResult:
        return de_run(density_builder(axis.sigma(snr_db), grid), ens, params)

    r_lo = probe(lo)
    if r_lo.converged:
        raise BracketError(f"lower bracket {lo} dB already succeeds")
    r_hi = probe(hi)
    if not r_hi.converged:
        raise BracketError(f"upper bracket {hi} dB fails")
    iters_hi = r_hi.iterations
    while hi - lo > resolution_db:
        mid = 0.5 * (lo + hi)
        r = probe(mid)
        if r.converged:
            hi, iters_hi = mid, r.iterations
        else:
            lo = mid
    snr = 0.5 * (lo + hi)
    return ThresholdResult(snr_db=snr, sigma=axis.sigma(snr),
                           iterations=iters_hi, converged=True,
                           bracket=(lo, hi))


def auto_bracket(ens: Ensemble, density_builder, axis: SnrAxis,
                 start: float, params: DeParams = DeParams(),
                 step: float = 0.4, max_steps: int = 12) -> tuple:
    """Expands outward from `start` until (fail, succeed) endpoints are
    found."""
    grid = LlrGrid(l_max=params.l_max or 25.0, bits=params.bits)

    def ok(snr):
        return de_run(density_builder(axis.sigma(snr), grid), ens,
                      params).converged

    lo = hi = start
    if ok(start):
        for _ in range(max_steps):
            lo -= step
            if not ok(lo):
                return lo, min(lo + step, hi)
        raise BracketError(f"no failing SNR found down to {lo} dB")
    for _ in range(max_steps):
        hi += step
        if ok(hi):
            return max(hi - step, lo), hi
    raise BracketError(f"no succeeding SNR found up to {hi} dB")


def fixed_point_taylor_threshold(ens: Ensemble, c: Constellation, orders,
                                 axis: SnrAxis | None = None,
                                 params: DeParams | None = None,
                                 start_snr: float | None = None,
                                 density_kwargs: dict | None = None,
                                 max_rounds: int = 10):
    """Alternates (fit Taylor coefficients at the current SNR) with
    (compute the DE threshold under those fixed coefficients) until the
    SNR moves by < 0.01 dB between rounds.

    Returns (ThresholdResult, ApproxLlr, trajectory).  trajectory[0] is
    the starting SNR (the exact-LLR threshold unless start_snr is given).
    """
    from .approx_llr import fit_constellation
    from .llr_density import bicm_channel_density, grid_for

    axis = axis or SnrAxis(c)
    density_kwargs = density_kwargs or {}
    if params is None:
        orders_t = (orders,) * c.m if isinstance(orders, int) else tuple(orders)
        l_max = 35.0 if any(o > 1 for o in orders_t) else 25.0
        params = DeParams(l_max=l_max)

    def exact_builder(sigma, grid):
        return bicm_channel_density(c, sigma, grid, "exact", **density_kwargs)

    if start_snr is None:
        p0 = DeParams(max_iter=params.max_iter,
                      target_error=params.target_error, bits=params.bits)
        br = auto_bracket(ens, exact_builder, axis, 8.0, p0)
        start_snr = de_threshold(ens, exact_builder, axis, br, p0).snr_db

    trajectory = [start_snr]
    snr = start_snr
    approx = None
    result = None
    for _ in range(max_rounds):
        approx = fit_constellation(c, axis.sigma(snr), orders)

        def builder(sigma, grid, _a=approx):
            return bicm_channel_density(c, sigma, grid, _a, **density_kwargs)

        br = auto_bracket(ens, builder, axis, snr, params)
        result = de_threshold(ens, builder, axis, br, params)
        trajectory.append(result.snr_db)
        if abs(result.snr_db - snr) < 0.01:
            return result, approx, trajectory
        snr = result.snr_db
    log.warning("fixed point did not settle after %d rounds: %s",
                max_rounds, trajectory)
    result.converged = False
    return result, approx, trajectory
