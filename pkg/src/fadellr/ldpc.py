"""Finite-length LDPC codes: random construction with girth >= 6,
GF(2) encoding, and flooding sum-product decoding with LLR clipping.

The decoder works on edge arrays (variable index, check index) and runs
through a numba kernel; the check update uses the exact pairwise box-plus
identity min + log1p terms, which stays accurate at clipped magnitudes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

try:
    from numba import njit

    _NUMBA = True
except ImportError:  # pragma: no cover
    _NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f
        return wrap


@dataclass
class ParityCheckMatrix:
    """Sparse parity-check matrix as per-row column indices."""

    n: int
    rows: list  # list of np.ndarray of column indices
    girth_at_least: int = 2
    _enc: tuple | None = field(default=None, repr=False)

    @property
    def m_rows(self) -> int:
        return len(self.rows)

    def column_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for r in self.rows:
            deg[r] += 1
        return deg

    def row_degrees(self) -> np.ndarray:
        return np.array([len(r) for r in self.rows])

    def edges(self):
        """(var_of_edge, chk_of_edge) arrays, sorted by check."""
        var = np.concatenate(self.rows)
        chk = np.repeat(np.arange(self.m_rows), self.row_degrees())
        return var.astype(np.int64), chk.astype(np.int64)

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        var, chk = self.edges()
        acc = np.bincount(chk, weights=np.asarray(bits, dtype=float)[var],
                          minlength=self.m_rows)
        return (acc.astype(np.int64) & 1).astype(np.int8)

    def dense(self) -> np.ndarray:
        h = np.zeros((self.m_rows, self.n), dtype=np.uint8)
        for j, r in enumerate(self.rows):
            h[j, r] = 1
        return h


def _degree_counts(fractions, n_nodes: int, n_edges: int) -> dict:
    """Node counts per degree from edge-perspective fractions; residues are
    balanced by +-1 adjustments so counts and edges match exactly."""
    items = sorted(fractions)
    node_w = {d: f / d for d, f in items}
    tot = sum(node_w.values())
    counts = {d: int(round(n_nodes * w / tot)) for d, w in node_w.items()}
    degs = sorted(counts)
    # fix node total
    while sum(counts.values()) != n_nodes:
        d = degs[0] if sum(counts.values()) < n_nodes else max(
            dd for dd in degs if counts[dd] > 0)
        counts[d] += 1 if sum(counts.values()) < n_nodes else -1
    # fix edge total by moving nodes between adjacent degrees
    diff = n_edges - sum(d * c for d, c in counts.items())
    guard = 0
    while diff != 0 and guard < 10 * n_nodes:
        guard += 1
        if diff > 0:
            d = min(dd for dd in degs if counts[dd] > 0)
            dn = min((x for x in degs if x > d), default=None)
            if dn is None:
                counts[d + 1] = counts.get(d + 1, 0)
                if d + 1 not in degs:
                    degs.append(d + 1)
                    degs.sort()
                dn = d + 1
            counts[d] -= 1
            counts[dn] += 1
            diff -= dn - d
        else:
            d = max(dd for dd in degs if counts[dd] > 0)
            dn = max((x for x in degs if x < d and counts[x] >= 0), default=None)
            if dn is None:
                raise ValueError("cannot balance degree residues")
            counts[d] -= 1
            counts[dn] += 1
            diff += d - dn
    if diff != 0:
        raise ValueError("cannot balance degree residues")
    return {d: c for d, c in counts.items() if c > 0}


def sample_code(profile, n: int, seed: int = 0,
                max_swaps: int | None = None) -> ParityCheckMatrix:
    """Randomly constructs an LDPC code with no 2- or 4-cycles.

    profile: (d_v, d_c) for a regular code, or an Ensemble.  Edge stubs
    are permuted uniformly, then offending edges are swapped with random
    partners until the Tanner graph has girth >= 6.  Deterministic under
    the seed.
    """
    rng = np.random.default_rng(seed)
    if hasattr(profile, "lam"):
        lam, rho = dict(profile.lam), dict(profile.rho)
        lv = sum(f / d for d, f in lam.items())
        n_edges = int(round(n / lv))
        m_rows = int(round(n_edges * sum(f / d for d, f in rho.items())))
        var_counts = _degree_counts(lam.items(), n, n_edges)
        n_edges = sum(d * c for d, c in var_counts.items())
        chk_counts = _degree_counts(rho.items(), m_rows, n_edges)
    else:
        dv, dc = profile
        if (n * dv) % dc:
            raise ValueError(f"n*{dv} must be divisible by {dc}")
        n_edges = n * dv
        m_rows = n_edges // dc
        var_counts = {dv: n}
        chk_counts = {dc: m_rows}

    var_deg = np.repeat(
        [d for d in sorted(var_counts)], [var_counts[d] for d in sorted(var_counts)])
    chk_deg = np.repeat(
        [d for d in sorted(chk_counts)], [chk_counts[d] for d in sorted(chk_counts)])
    rng.shuffle(var_deg)
    rng.shuffle(chk_deg)
    var_stub = np.repeat(np.arange(n), var_deg)
    chk_stub = np.repeat(np.arange(m_rows), chk_deg)
    perm = rng.permutation(n_edges)
    evar = var_stub[perm]
    echk = chk_stub

    if max_swaps is None:
        max_swaps = 200 * n_edges

    swaps = 0
    while True:
        bad = _find_bad_edges(evar, echk, n, m_rows)
        if bad.size == 0:
            break
        for e in bad:
            if swaps >= max_swaps:
                raise RuntimeError(
                    f"girth-6 construction failed after {swaps} swaps; "
                    f"{bad.size} offending edges remain")
            other = int(rng.integers(n_edges))
            evar[e], evar[other] = evar[other], evar[e]
            swaps += 1

    rows = [evar[echk == j] for j in range(m_rows)]
    rows = [np.sort(r) for r in rows]
    code = ParityCheckMatrix(n=n, rows=rows, girth_at_least=6)
    return code


def _find_bad_edges(evar, echk, n, m_rows) -> np.ndarray:
    """Edge indices involved in a parallel edge or a 4-cycle."""
    # parallel edges: same (var, chk) pair twice
    key = evar.astype(np.int64) * m_rows + echk
    order = np.argsort(key, kind="stable")
    ks = key[order]
    dup = np.zeros(len(key), dtype=bool)
    same = ks[1:] == ks[:-1]
    dup[order[1:][same]] = True
    bad = set(np.nonzero(dup)[0].tolist())
    # 4-cycles: two checks sharing two variables
    order_c = np.argsort(echk, kind="stable")
    ev = evar[order_c]
    bounds = np.searchsorted(echk[order_c], np.arange(m_rows + 1))
    pair_seen: dict = {}
    for j in range(m_rows):
        vs = ev[bounds[j]:bounds[j + 1]]
        es = order_c[bounds[j]:bounds[j + 1]]
        srt = np.argsort(vs, kind="stable")
        vs, es = vs[srt], es[srt]
        for a in range(len(vs)):
            for b in range(a + 1, len(vs)):
                if vs[a] == vs[b]:
                    bad.add(int(es[b]))
                    continue
                pk = (int(vs[a]), int(vs[b]))
                if pk in pair_seen:
                    bad.add(int(es[b]))
                else:
                    pair_seen[pk] = j
    return np.fromiter(bad, dtype=np.int64) if bad else np.array([], dtype=np.int64)


# ----------------------------------------------------------------------
# encoding

def _gf2_row_reduce(h: np.ndarray):
    """Row-reduces h over GF(2); returns (reduced, pivot columns)."""
    h = h.copy()
    m, n = h.shape
    pivots = []
    r = 0
    for col in range(n):
        if r >= m:
            break
        hit = np.nonzero(h[r:, col])[0]
        if hit.size == 0:
            continue
        p = r + hit[0]
        if p != r:
            h[[r, p]] = h[[p, r]]
        sel = np.nonzero(h[:, col])[0]
        sel = sel[sel != r]
        h[sel] ^= h[r]
        pivots.append(col)
        r += 1
    return h[:r], pivots


class Encoder:
    """Systematic GF(2) encoder derived from a parity-check matrix.

    Dependent rows are discarded; the pivot columns carry parity and the
    remaining (info) columns are systematic."""

    def __init__(self, code: ParityCheckMatrix):
        h = code.dense()
        red, pivots = _gf2_row_reduce(h)
        self.rank = red.shape[0]
        self.parity_cols = np.array(pivots, dtype=np.int64)
        mask = np.ones(code.n, dtype=bool)
        mask[self.parity_cols] = False
        self.info_cols = np.nonzero(mask)[0]
        self.k = code.n - self.rank
        self.n = code.n
        # parity = P @ info  (mod 2), P = reduced[:, info_cols]
        self._p = red[:, self.info_cols]

    def encode(self, info_bits: np.ndarray) -> np.ndarray:
        info_bits = np.asarray(info_bits, dtype=np.uint8)
        if info_bits.shape != (self.k,):
            raise ValueError(f"need {self.k} info bits")
        cw = np.zeros(self.n, dtype=np.uint8)
        cw[self.info_cols] = info_bits
        cw[self.parity_cols] = (self._p @ info_bits) & 1
        return cw


def encode(code: ParityCheckMatrix, info_bits: np.ndarray) -> np.ndarray:
    """One-shot systematic encoding (builds and caches the encoder)."""
    if code._enc is None or code._enc[0] is not code:
        code._enc = (code, Encoder(code))
    return code._enc[1].encode(info_bits)


# ----------------------------------------------------------------------
# belief propagation

@dataclass
class DecodeResult:
    bits: np.ndarray
    iterations: int
    converged: bool


@njit(cache=True)
def _bp_kernel(chan, var_of_edge, chk_start, chk_edges, max_iter,
               clip):  # pragma: no cover - jitted
    n = chan.shape[0]
    ne = var_of_edge.shape[0]
    mc = len(chk_start) - 1
    c2v = np.zeros(ne)
    post = chan.copy()
    hard = np.zeros(n, dtype=np.uint8)
    fwd = np.empty(ne)
    bwd = np.empty(ne)
    for it in range(1, max_iter + 1):
        # variable -> check, clipped
        v2c = np.empty(ne)
        for e in range(ne):
            t = post[var_of_edge[e]] - c2v[e]
            if t > clip:
                t = clip
            elif t < -clip:
                t = -clip
            v2c[e] = t
        # check -> variable via prefix/suffix box-plus
        for j in range(mc):
            s, t = chk_start[j], chk_start[j + 1]
            acc = 0.0
            first = True
            for idx in range(s, t):
                e = chk_edges[idx]
                fwd[idx] = acc
                if first:
                    acc = v2c[e]
                    first = False
                else:
                    acc = _boxplus(acc, v2c[e])
            acc = 0.0
            first = True
            for idx in range(t - 1, s - 1, -1):
                e = chk_edges[idx]
                bwd[idx] = acc
                if first:
                    acc = v2c[e]
                    first = False
                else:
                    acc = _boxplus(acc, v2c[e])
            for idx in range(s, t):
                e = chk_edges[idx]
                if idx == s:
                    out = bwd[idx]
                elif idx == t - 1:
                    out = fwd[idx]
                else:
                    out = _boxplus(fwd[idx], bwd[idx])
                if out > clip:
                    out = clip
                elif out < -clip:
                    out = -clip
                c2v[e] = out
        # posteriors and hard decision
        for v in range(n):
            post[v] = chan[v]
        for e in range(ne):
            post[var_of_edge[e]] += c2v[e]
        for v in range(n):
            if post[v] > clip:
                post[v] = clip
            elif post[v] < -clip:
                post[v] = -clip
            hard[v] = 1 if post[v] < 0 else 0
        # syndrome check
        ok = True
        for j in range(mc):
            s, t = chk_start[j], chk_start[j + 1]
            par = 0
            for idx in range(s, t):
                par ^= hard[var_of_edge[chk_edges[idx]]]
            if par:
                ok = False
                break
        if ok:
            return hard, it, True
    return hard, max_iter, False


@njit(cache=True, inline="always")
def _boxplus(a, b):  # pragma: no cover - jitted
    sa = 1.0 if a >= 0 else -1.0
    sb = 1.0 if b >= 0 else -1.0
    aa = a if a >= 0 else -a
    ab = b if b >= 0 else -b
    mn = aa if aa < ab else ab
    return sa * sb * (mn + np.log1p(np.exp(-(aa + ab)))
                      - np.log1p(np.exp(-abs(aa - ab))))


def bp_decode(code: ParityCheckMatrix, llrs: np.ndarray, max_iter: int = 100,
              clip: float = 25.0) -> DecodeResult:
    """Flooding sum-product decoding in the LLR domain.

    Messages and posteriors are clipped to [-clip, clip]; decoding stops
    early on a zero syndrome.  Positive LLR means bit 0."""
    llrs = np.asarray(llrs, dtype=float)
    if llrs.shape != (code.n,):
        raise ValueError(f"need {code.n} LLRs")
    if not np.all(np.isfinite(llrs)):
        raise ValueError("LLRs must be finite")
    var, chk = code.edges()
    order = np.argsort(chk, kind="stable")
    chk_edges = order.astype(np.int64)
    chk_start = np.searchsorted(chk[order], np.arange(code.m_rows + 1)).astype(np.int64)
    # zero-syndrome input needs no iterations
    hard0 = (llrs < 0).astype(np.uint8)
    if not code.syndrome(hard0).any():
        return DecodeResult(hard0, 0, True)
    bits, iters, conv = _bp_kernel(np.clip(llrs, -clip, clip), var,
                                   chk_start, chk_edges, max_iter, clip)
    return DecodeResult(np.asarray(bits), int(iters), bool(conv))


# ----------------------------------------------------------------------
# code file I/O: header 'n m_rows', then one line of column indices per row

def save_code(code: ParityCheckMatrix, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{code.n} {code.m_rows}\n")
        for r in code.rows:
            fh.write(" ".join(str(int(v)) for v in r) + "\n")


def load_code(path) -> ParityCheckMatrix:
    with open(path) as fh:
        first = fh.readline().split()
        n, m_rows = int(first[0]), int(first[1])
        rows = []
        for _ in range(m_rows):
            rows.append(np.array([int(t) for t in fh.readline().split()],
                                 dtype=np.int64))
    code = ParityCheckMatrix(n=n, rows=rows)
    code.girth_at_least = 6 if not has_4cycles(code) else 2
    return code


def has_4cycles(code: ParityCheckMatrix) -> bool:
    seen = set()
    for r in code.rows:
        rl = np.sort(r)
        for a in range(len(rl)):
            for b in range(a + 1, len(rl)):
                if rl[a] == rl[b]:
                    return True
                pk = (int(rl[a]), int(rl[b]))
                if pk in seen:
                    return True
                seen.add(pk)
    return False
