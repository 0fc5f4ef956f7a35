"""LLR approximations: the moment-matched linear baseline, the
capacity-optimized linear baseline, closed-form BPSK Taylor forms, generic
piece-wise Taylor fits for 1-D constellations, and 2-D Taylor polynomials
for 16-QAM.

Taylor centers are the roots of the exact LLR.  Derivatives at the centers
come from high-order central finite differences on the exact LLR (step
1e-2, one Richardson extrapolation); for BPSK they agree with the closed
forms to ~1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .constellation import Constellation, build_constellation
from .exact_llr import bit_llr_grid, log_theta

SQRT_2PI = math.sqrt(2.0 * math.pi)


# ----------------------------------------------------------------------
# closed-form BPSK coefficients

def alpha_hou(sigma: float) -> float:
    """Moment-matched linear coefficient 2*E[A]/sigma^2 = sqrt(pi)/sigma^2."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return math.sqrt(math.pi) / sigma**2


def alpha_taylor_bpsk(sigma: float) -> float:
    """First Taylor coefficient of the BPSK no-CSI LLR at y = 0."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return math.sqrt(2.0 * math.pi / (1.0 + 2.0 * sigma**2)) / sigma


def taylor_bpsk_cubic(sigma: float) -> tuple[float, float]:
    """(alpha, beta) of the cubic BPSK approximation alpha*y + beta*y^3."""
    alpha = alpha_taylor_bpsk(sigma)
    beta = SQRT_2PI * (math.pi - 3.0) / (6.0 * (1.0 + 2.0 * sigma**2) ** 1.5
                                         * sigma**3)
    return alpha, beta


def fit_optimized_linear(sigma: float, tol: float = 1e-8) -> float:
    """Capacity-maximizing linear coefficient for BPSK without CSI.

    Maximizes J(alpha) = 1 - E[log2(1 + exp(-alpha*Y)) | X=+1] over alpha,
    where Y = A + Z.  The expectation is a fixed-grid quadrature against
    the closed-form output pdf.  Raises RuntimeError if the optimizer does
    not converge or the stationary point fails the concavity check.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    y = np.linspace(-8.0 * sigma, 1.0 + 10.0 * sigma + 5.0, 120001)
    u = y / math.sqrt(2.0 * sigma**2 * (1.0 + 2.0 * sigma**2))
    pref = math.sqrt(2.0 / math.pi) * sigma / (1.0 + 2.0 * sigma**2)
    w = pref * np.exp(-y * y / (1.0 + 2.0 * sigma**2) + log_theta(u))
    w *= y[1] - y[0]

    def neg_j(alpha):
        return np.sum(np.logaddexp(0.0, -alpha * y) * w) / math.log(2.0) - 1.0

    hi = 8.0 * alpha_taylor_bpsk(sigma)
    res = minimize_scalar(neg_j, bounds=(1e-3, hi), method="bounded",
                          options={"xatol": tol, "maxiter": 500})
    if not res.success:
        raise RuntimeError(f"optimizer did not converge in bracket (1e-3, {hi}): {res}")
    a = float(res.x)
    h = 1e-3 * max(a, 1.0)
    j2 = (neg_j(a - h) - 2.0 * neg_j(a) + neg_j(a + h)) / h**2
    if j2 <= 0:  # neg_j must be convex at the max of J
        raise RuntimeError(f"stationary point at alpha={a} is not a maximum")
    return a


# ----------------------------------------------------------------------
# finite differences (central, O(h^4), one Richardson step)

_STENCILS = {
    1: (np.array([-2., -1., 1., 2.]), np.array([1., -8., 8., -1.]) / 12.0),
    2: (np.array([-2., -1., 0., 1., 2.]),
        np.array([-1., 16., -30., 16., -1.]) / 12.0),
    3: (np.array([-3., -2., -1., 1., 2., 3.]),
        np.array([1., -8., 13., -13., 8., -1.]) / 8.0),
}


def _fd(fun, x0: float, order: int, h: float) -> float:
    off, w = _STENCILS[order]
    return float(np.dot(w, fun(x0 + off * h))) / h**order


def derivative(fun, x0: float, order: int, h: float = 1e-2) -> float:
    """order-th derivative of fun at x0 (fun maps arrays to arrays)."""
    d_h = _fd(fun, x0, order, h)
    d_h2 = _fd(fun, x0, order, h / 2.0)
    return (16.0 * d_h2 - d_h) / 15.0


def partial_2d(fun, u0: float, v0: float, lu: int, lv: int,
               h: float = 1e-2) -> float:
    """Mixed partial d^(lu+lv) f / du^lu dv^lv at (u0, v0).

    fun(u, v) must broadcast over same-shaped arrays.  Pure partials fall
    back to the 1-D stencils; mixed ones use their tensor product.
    """
    if lu == 0 and lv == 0:
        return float(fun(np.array([u0]), np.array([v0]))[0])
    if lv == 0:
        return derivative(lambda u: fun(u, np.full_like(u, v0)), u0, lu, h)
    if lu == 0:
        return derivative(lambda v: fun(np.full_like(v, u0), v), v0, lv, h)

    def tensor(step):
        ou, wu = _STENCILS[lu]
        ov, wv = _STENCILS[lv]
        uu, vv = np.meshgrid(u0 + ou * step, v0 + ov * step, indexing="ij")
        vals = fun(uu, vv)
        return float(wu @ vals @ wv) / step ** (lu + lv)

    return (16.0 * tensor(h / 2.0) - tensor(h)) / 15.0


# ----------------------------------------------------------------------
# root finding

def find_roots(fun, lo: float, hi: float, n_grid: int = 4001,
               tol: float = 1e-10) -> np.ndarray:
    """All roots of a continuous scalar function on [lo, hi].

    Sign changes on a dense grid are refined by Brent bisection; grid
    points where the function is exactly zero count as roots.  Returns a
    sorted array (possibly empty).
    """
    xs = np.linspace(lo, hi, n_grid)
    vs = fun(xs)
    roots = list(xs[vs == 0.0])
    idx = np.where(vs[:-1] * vs[1:] < 0)[0]
    g = lambda t: float(fun(np.array([t]))[0])
    for i in idx:
        roots.append(brentq(g, xs[i], xs[i + 1], xtol=tol))
    roots = sorted(roots)
    out = []
    for r in roots:
        if not out or r - out[-1] > 1e-8:
            out.append(r)
    return np.array(out)


def exact_llr_fn(c: Constellation, bit: int, sigma: float):
    """Vectorized y -> exact LLR of the given bit (1-D constellations)."""
    def f(y):
        return bit_llr_grid(c, np.asarray(y, dtype=float) + 0j, sigma)[bit - 1]
    return f


def exact_llr_fn_2d(c: Constellation, bit: int, sigma: float):
    """Vectorized (yr, yi) -> exact LLR of the given bit (2-D)."""
    def f(yr, yi):
        y = np.asarray(yr, dtype=float) + 1j * np.asarray(yi, dtype=float)
        return bit_llr_grid(c, y, sigma)[bit - 1]
    return f


def find_llr_roots(bit: int, c: Constellation, sigma: float,
                   interval=None) -> np.ndarray:
    """Roots of the exact bit LLR.  For 2-D constellations the search runs
    along the bit's own axis (the v = 0 cut)."""
    if interval is None:
        r = 1.6 * float(np.max(np.abs(c.points))) + 8.0 * sigma
        interval = (-r, r)
    if c.is_2d:
        axis_re = bit in (1, 2)
        f2 = exact_llr_fn_2d(c, bit, sigma)
        fun = (lambda t: f2(t, np.zeros_like(t))) if axis_re else \
              (lambda t: f2(np.zeros_like(t), t))
    else:
        fun = exact_llr_fn(c, bit, sigma)
    return find_roots(fun, interval[0], interval[1])


# ----------------------------------------------------------------------
# fitted-approximation containers

@dataclass(frozen=True)
class Poly1D:
    """Polynomial sum_k coeffs[k] * (y - center)^k valid on (lo, hi]."""

    center: float
    coeffs: tuple
    lo: float
    hi: float

    def __call__(self, y):
        dy = np.asarray(y, dtype=float) - self.center
        out = np.zeros_like(dy)
        for ck in reversed(self.coeffs):
            out = out * dy + ck
        return out


@dataclass(frozen=True)
class Poly2D:
    """Bivariate polynomial sum c[(l, m)] * u^l * v^m.

    `pre` names the coordinate pre-transform: 're' means (u, v) =
    (y_r, y_i), 'im' swaps them, 'abs_re'/'abs_im' fold the first
    coordinate through |.| (the even-bit form).  `center` records the
    Taylor expansion point in (u, v) used for the fit.
    """

    center: tuple
    coeffs: dict
    pre: str

    def __call__(self, yr, yi):
        yr = np.asarray(yr, dtype=float)
        yi = np.asarray(yi, dtype=float)
        if self.pre == "re":
            u, v = yr, yi
        elif self.pre == "im":
            u, v = yi, yr
        elif self.pre == "abs_re":
            u, v = np.abs(yr), yi
        elif self.pre == "abs_im":
            u, v = np.abs(yi), yr
        else:
            raise ValueError(f"unknown pre-transform {self.pre!r}")
        out = np.zeros(np.broadcast(u, v).shape)
        for (l, m), cc in self.coeffs.items():
            out += cc * u**l * v**m
        return out


@dataclass(frozen=True)
class ApproxLlr:
    """A fitted LLR approximation for one constellation at one sigma.

    kind is one of 'hou', 'optlinear', 'taylor_bpsk_linear',
    'taylor_bpsk_cubic', 'piecewise1d', 'taylor2d'.  payload holds one
    entry per bit: a coefficient tuple for the scalar BPSK kinds, a
    (pieces, breakpoints) pair for piecewise fits, or a Poly2D.
    """

    kind: str
    constellation_kind: str
    sigma_fit: float
    payload: tuple
    orders: tuple = field(default=())

    @property
    def is_2d(self) -> bool:
        return self.kind == "taylor2d"

    @property
    def nonlinear(self) -> bool:
        """True when any piece carries terms beyond degree one (these runs
        use the wider decoder clip, see llr_density)."""
        if self.kind in ("hou", "optlinear", "taylor_bpsk_linear"):
            return False
        if self.kind == "taylor_bpsk_cubic":
            return True
        return any(o > 1 for o in self.orders)

    def __call__(self, bit: int, y):
        return eval_approx(self, bit, y)


def eval_approx(a: ApproxLlr, bit: int, y):
    """Evaluates the approximation for one bit on channel outputs y.

    y is real for 1-D kinds and complex (or a (yr, yi) pair) for 2-D.
    Piece selection sends boundary ties to the left piece.
    """
    pay = a.payload[bit - 1]
    if a.kind in ("hou", "optlinear", "taylor_bpsk_linear"):
        return pay[0] * np.asarray(y, dtype=float)
    if a.kind == "taylor_bpsk_cubic":
        yv = np.asarray(y, dtype=float)
        return pay[0] * yv + pay[1] * yv**3
    if a.kind == "piecewise1d":
        pieces, breaks = pay
        yv = np.asarray(y, dtype=float)
        idx = np.searchsorted(breaks, yv, side="left")
        out = np.empty_like(yv)
        for k, p in enumerate(pieces):
            sel = idx == k
            if np.any(sel):
                out[sel] = p(yv[sel])
        return out
    if a.kind == "taylor2d":
        yc = np.asarray(y)
        if np.iscomplexobj(yc):
            return pay(yc.real, yc.imag)
        return pay(yc[0], yc[1])
    raise ValueError(f"unknown approximation kind {a.kind!r}")


# ----------------------------------------------------------------------
# 1-D piece-wise Taylor fitting

def _bit_symmetry(bit: int) -> str:
    # bit 1 is odd under y -> -y, the remaining bits are even
    return "odd" if bit == 1 else "even"


def _reflect(p: Poly1D, symmetry: str) -> Poly1D:
    sgn = -1.0 if symmetry == "odd" else 1.0
    coeffs = tuple(sgn * ck * (-1.0) ** k for k, ck in enumerate(p.coeffs))
    return Poly1D(center=-p.center, coeffs=coeffs, lo=-p.hi, hi=-p.lo)


def fit_piecewise_taylor(bit: int, c: Constellation, sigma: float,
                         order: int):
    """Piece-wise Taylor approximation of one bit LLR (1-D constellations).

    One piece per root in the y >= 0 half, reflected to y < 0 per the
    bit's symmetry.  Breakpoints between adjacent pieces sit where the two
    first-order polynomials intersect (midpoint fallback); third-order
    fits reuse the first-order breakpoints.  Pieces keep only the odd
    Taylor terms about each root: the even derivatives vanish by symmetry
    at y = 0 and are negligibly small at the other roots.

    Returns (pieces, breakpoints) covering the real line.
    """
    if order not in (1, 3):
        raise ValueError("order must be 1 or 3")
    if c.is_2d:
        raise ValueError("use fit_taylor_2d for 2-D constellations")
    f = exact_llr_fn(c, bit, sigma)
    roots = find_llr_roots(bit, c, sigma)
    pos = [r for r in roots if r > 1e-9]
    has_zero = any(abs(r) <= 1e-9 for r in roots)
    sym = _bit_symmetry(bit)
    centers = ([0.0] if has_zero else []) + pos
    if not centers:
        raise ValueError(f"bit {bit} LLR has no roots to expand around")

    polys = []
    slopes = []
    for y0 in centers:
        c1 = derivative(f, y0, 1)
        if not np.isfinite(c1):
            raise FloatingPointError(f"derivative estimate failed at y0={y0}")
        coeffs = [0.0, c1]
        if order == 3:
            c3 = derivative(f, y0, 3) / 6.0
            if not np.isfinite(c3):
                raise FloatingPointError(f"derivative estimate failed at y0={y0}")
            coeffs += [0.0, c3]
        polys.append(tuple(coeffs))
        slopes.append(c1)

    # breakpoints between adjacent positive-half pieces, from the linear fits
    breaks_pos = []
    for k in range(len(centers) - 1):
        a0, a1 = centers[k], centers[k + 1]
        s0, s1 = slopes[k], slopes[k + 1]
        lin = lambda t, cen, s: s * (t - cen)
        diff = lambda t: lin(t, a0, s0) - lin(t, a1, s1)
        if diff(a0) * diff(a1) < 0:
            bp = brentq(diff, a0, a1, xtol=1e-12)
        else:
            bp = 0.5 * (a0 + a1)
        breaks_pos.append(bp)

    # assemble pieces on y >= 0 with their validity windows
    edges = [0.0] + breaks_pos + [np.inf]
    pieces_pos = [Poly1D(center=centers[k], coeffs=polys[k],
                         lo=edges[k], hi=edges[k + 1])
                  for k in range(len(centers))]

    if has_zero and len(centers) == 1:
        # single symmetric piece through the origin covers the whole line
        p = pieces_pos[0]
        pieces = [Poly1D(p.center, p.coeffs, -np.inf, np.inf)]
        breaks = np.array([])
    else:
        neg = [_reflect(p, sym) for p in reversed(pieces_pos)]
        if has_zero:
            # center piece spans (-first breakpoint, +first breakpoint]
            mid = pieces_pos[0]
            neg = neg[:-1]
            pieces_pos = pieces_pos[1:]
            mid = Poly1D(mid.center, mid.coeffs, -mid.hi, mid.hi)
            pieces = neg + [mid] + pieces_pos
        else:
            pieces = neg + pieces_pos
        breaks = np.array([p.hi for p in pieces[:-1]])
    return tuple(pieces), breaks


# ----------------------------------------------------------------------
# 2-D Taylor fitting (16-QAM)

_PRE_BY_BIT = {1: "re", 2: "abs_re", 3: "im", 4: "abs_im"}


def _shift_poly_u(coeffs: dict, xi: float) -> dict:
    """Rewrites sum c[(l,m)] (u - xi)^l v^m as a polynomial in u, v."""
    out: dict = {}
    for (l, m), cc in coeffs.items():
        for a in range(l + 1):
            w = cc * math.comb(l, a) * (-xi) ** (l - a)
            out[(a, m)] = out.get((a, m), 0.0) + w
    return out


def fit_taylor_2d(bit: int, c: Constellation, sigma: float, order: int,
                  drop_tol: float = 1e-4) -> Poly2D:
    """2-D Taylor polynomial of one 16-QAM bit LLR.

    Bits 1/3 expand about the origin (odd order); bits 2/4 expand about
    (xi, 0), the LLR root on the bit's axis, and are folded to a single
    polynomial in |y_r| (resp. |y_i|).  Terms killed by the exact
    reflection symmetries are skipped; computed terms smaller than
    drop_tol are dropped to match the published compact forms.
    """
    if not c.is_2d:
        raise ValueError("fit_taylor_2d needs a 2-D constellation")
    pre = _PRE_BY_BIT[bit]
    odd_bit = bit in (1, 3)
    if odd_bit and order % 2 == 0:
        raise ValueError(f"bit {bit} is odd-symmetric; order must be odd")
    if pre == "re":
        fun = exact_llr_fn_2d(c, bit, sigma)
    elif pre == "im":
        f0 = exact_llr_fn_2d(c, bit, sigma)
        fun = lambda u, v: f0(v, u)
    elif pre == "abs_re":
        fun = exact_llr_fn_2d(c, bit, sigma)
    else:
        f0 = exact_llr_fn_2d(c, bit, sigma)
        fun = lambda u, v: f0(v, u)

    if odd_bit:
        u0 = 0.0
    else:
        roots = find_roots(lambda t: fun(t, np.zeros_like(t)), 0.05,
                           1.6 * float(np.max(np.abs(c.points.real))) + 8.0 * sigma)
        if len(roots) != 1:
            raise ValueError(f"expected one positive axis root, got {roots}")
        u0 = float(roots[0])
    val0 = float(fun(np.array([u0]), np.array([0.0]))[0])
    if abs(val0) > 1e-3:
        raise ValueError(f"center ({u0}, 0) is not an LLR root: l={val0}")

    taylor: dict = {}
    for l in range(order + 1):
        for m in range(order + 1 - l):
            if m % 2 == 1:
                continue  # even in v, exactly
            if odd_bit and l % 2 == 0:
                continue  # odd in u, exactly
            d = partial_2d(fun, u0, 0.0, l, m)
            taylor[(l, m)] = d / (math.factorial(l) * math.factorial(m))

    coeffs = _shift_poly_u(taylor, u0) if u0 != 0.0 else dict(taylor)
    coeffs = {k: v for k, v in coeffs.items() if abs(v) >= drop_tol}
    return Poly2D(center=(u0, 0.0), coeffs=coeffs, pre=pre)


# ----------------------------------------------------------------------
# whole-constellation fits

def fit_constellation(c: Constellation, sigma: float, orders) -> ApproxLlr:
    """Fits every bit of a PAM/QAM constellation; orders is one int per
    bit (or a single int applied to all bits)."""
    if isinstance(orders, int):
        orders = (orders,) * c.m
    orders = tuple(int(o) for o in orders)
    if len(orders) != c.m:
        raise ValueError(f"need {c.m} orders, got {len(orders)}")
    if c.is_2d:
        payload = tuple(fit_taylor_2d(i + 1, c, sigma, orders[i])
                        for i in range(c.m))
        return ApproxLlr("taylor2d", c.kind, sigma, payload, orders)
    payload = tuple(fit_piecewise_taylor(i + 1, c, sigma, orders[i])
                    for i in range(c.m))
    return ApproxLlr("piecewise1d", c.kind, sigma, payload, orders)


def make_bpsk_approx(kind: str, sigma: float) -> ApproxLlr:
    """BPSK approximations: 'hou', 'optlinear', 'taylor:1', 'taylor:3'."""
    if kind == "hou":
        return ApproxLlr("hou", "bpsk", sigma, ((alpha_hou(sigma),),))
    if kind == "optlinear":
        return ApproxLlr("optlinear", "bpsk", sigma,
                         ((fit_optimized_linear(sigma),),))
    if kind in ("taylor:1", "taylor1"):
        return ApproxLlr("taylor_bpsk_linear", "bpsk", sigma,
                         ((alpha_taylor_bpsk(sigma),),), (1,))
    if kind in ("taylor:3", "taylor3"):
        return ApproxLlr("taylor_bpsk_cubic", "bpsk", sigma,
                         (taylor_bpsk_cubic(sigma),), (3,))
    raise ValueError(f"unknown BPSK approximation {kind!r}")
