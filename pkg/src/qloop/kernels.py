"""Modular hot loops: batched Laurent evaluation and sparse CSR products mod p.

Two interchangeable backends.  The default compiles Montgomery arithmetic with
numba for odd primes below 2^63.  Setting ``QLOOP_KERNELS=numpy`` selects a
plain numpy/Python-int fallback, which also serves as a cross-check.
"""
import os

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f


def backend_name():
    choice = os.environ.get("QLOOP_KERNELS", "numba").strip().lower()
    if choice == "numpy" or not HAVE_NUMBA:
        return "numpy"
    return "numba"


_U32 = np.uint64(32)
_MASK32 = np.uint64(0xFFFFFFFF)
_ZERO = np.uint64(0)
_ONE = np.uint64(1)


class MontCtx:
    """Per-prime constants for Montgomery arithmetic with R = 2^64."""

    def __init__(self, p):
        p = int(p)
        if p % 2 == 0 or p >= 2 ** 63:
            raise ValueError("Montgomery kernels need an odd prime below 2^63")
        self.p = p
        self.pinv = (-pow(p, -1, 2 ** 64)) % 2 ** 64
        self.r2 = pow(2, 128, p)
        self.p64 = np.uint64(p)
        self.pinv64 = np.uint64(self.pinv)
        self.r2_64 = np.uint64(self.r2)


_ctx_cache: dict = {}


def mont_ctx(p):
    ctx = _ctx_cache.get(p)
    if ctx is None:
        ctx = MontCtx(p)
        _ctx_cache[p] = ctx
    return ctx


# ------------------------------------------------------------ numba kernels

@njit(cache=True, inline="always")
def _mulhi(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _U32
    b_lo = b & _MASK32
    b_hi = b >> _U32
    p0 = a_lo * b_lo
    p1 = a_lo * b_hi
    p2 = a_hi * b_lo
    p3 = a_hi * b_hi
    mid = (p0 >> _U32) + (p1 & _MASK32) + (p2 & _MASK32)
    return p3 + (p1 >> _U32) + (p2 >> _U32) + (mid >> _U32)


@njit(cache=True, inline="always")
def _mmul(a, b, p, pinv):
    hi = _mulhi(a, b)
    lo = a * b
    m = lo * pinv
    t = hi + _mulhi(m, p)
    if lo != _ZERO:
        t += _ONE
    if t >= p:
        t -= p
    return t


@njit(cache=True, inline="always")
def _madd(a, b, p):
    t = a + b
    if t >= p:
        t -= p
    return t


@njit(cache=True)
def _mpow(base, e, one_m, p, pinv):
    out = one_m
    while e > 0:
        if e & 1:
            out = _mmul(out, base, p, pinv)
        base = _mmul(base, base, p, pinv)
        e >>= 1
    return out


@njit(cache=True)
def _to_mont_nb(x, r2, p, pinv):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = _mmul(x[i], r2, p, pinv)
    return out


@njit(cache=True)
def _from_mont_nb(x, p, pinv):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = _mmul(x[i], _ONE, p, pinv)
    return out


@njit(cache=True)
def _poly_eval_nb(exps, coeffs, offsets, pt, ptinv, one_m, p, pinv):
    npoly = offsets.shape[0] - 1
    nv = exps.shape[1]
    out = np.zeros(npoly, dtype=np.uint64)
    for j in range(npoly):
        acc = _ZERO
        for t in range(offsets[j], offsets[j + 1]):
            term = coeffs[t]
            for k in range(nv):
                e = exps[t, k]
                if e > 0:
                    term = _mmul(term, _mpow(pt[k], e, one_m, p, pinv), p, pinv)
                elif e < 0:
                    term = _mmul(term, _mpow(ptinv[k], -e, one_m, p, pinv), p, pinv)
            acc = _madd(acc, term, p)
        out[j] = acc
    return out


@njit(cache=True)
def _spgemm_nb(nrows, ncols, ap, ai, ax, bp, bi, bx, p, pinv):
    mark = np.full(ncols, -1, dtype=np.int64)
    acc = np.zeros(ncols, dtype=np.uint64)
    # symbolic pass bounds the output size
    cap = 0
    for i in range(nrows):
        cnt = 0
        for ka in range(ap[i], ap[i + 1]):
            a_col = ai[ka]
            for kb in range(bp[a_col], bp[a_col + 1]):
                c = bi[kb]
                if mark[c] != i:
                    mark[c] = i
                    cnt += 1
        cap += cnt
    mark[:] = -1
    cp = np.zeros(nrows + 1, dtype=np.int64)
    ci = np.empty(cap, dtype=np.int64)
    cx = np.empty(cap, dtype=np.uint64)
    row_cols = np.empty(ncols, dtype=np.int64)
    nnz = 0
    for i in range(nrows):
        nr = 0
        for ka in range(ap[i], ap[i + 1]):
            a_col = ai[ka]
            av = ax[ka]
            for kb in range(bp[a_col], bp[a_col + 1]):
                c = bi[kb]
                prod = _mmul(av, bx[kb], p, pinv)
                if mark[c] != i:
                    mark[c] = i
                    acc[c] = prod
                    row_cols[nr] = c
                    nr += 1
                else:
                    acc[c] = _madd(acc[c], prod, p)
        cols = np.sort(row_cols[:nr])
        for k in range(nr):
            c = cols[k]
            if acc[c] != _ZERO:
                ci[nnz] = c
                cx[nnz] = acc[c]
                nnz += 1
        cp[i + 1] = nnz
    return cp, ci[:nnz].copy(), cx[:nnz].copy()


@njit(cache=True)
def _spmv_nb(nrows, ap, ai, ax, x, p, pinv):
    y = np.zeros(nrows, dtype=np.uint64)
    for i in range(nrows):
        acc = _ZERO
        for k in range(ap[i], ap[i + 1]):
            acc = _madd(acc, _mmul(ax[k], x[ai[k]], p, pinv), p)
        y[i] = acc
    return y


# -------------------------------------------------------- numpy fallbacks

def _poly_eval_np(exps, coeffs, offsets, point, inv, p):
    """Vectorised over terms with object arrays of Python ints."""
    npoly = len(offsets) - 1
    out = np.zeros(npoly, dtype=object)
    if exps.shape[0] == 0:
        return out
    powfn = np.frompyfunc(lambda b, e: pow(b, e, p), 2, 1)
    bases = np.where(exps < 0, np.asarray(inv, dtype=object)[None, :],
                     np.asarray(point, dtype=object)[None, :])
    factors = powfn(bases, np.abs(exps).astype(object))
    terms = np.asarray([int(c) % p for c in coeffs], dtype=object)
    for k in range(exps.shape[1]):
        terms = terms * factors[:, k] % p
    for j in range(npoly):
        out[j] = int(terms[offsets[j]:offsets[j + 1]].sum()) % p
    return out


def _spgemm_np(nrows, ap, ai, ax, bp, bi, bx, p):
    cp = [0]
    ci = []
    cx = []
    for i in range(nrows):
        row = {}
        for ka in range(ap[i], ap[i + 1]):
            a_col = ai[ka]
            av = int(ax[ka])
            for kb in range(bp[a_col], bp[a_col + 1]):
                c = int(bi[kb])
                row[c] = (row.get(c, 0) + av * int(bx[kb])) % p
        for c in sorted(row):
            if row[c]:
                ci.append(c)
                cx.append(row[c])
        cp.append(len(ci))
    return (np.asarray(cp, dtype=np.int64), np.asarray(ci, dtype=np.int64),
            np.asarray(cx, dtype=object))


def _spmv_np(nrows, ap, ai, ax, x, p):
    y = np.zeros(nrows, dtype=object)
    for i in range(nrows):
        acc = 0
        for k in range(ap[i], ap[i + 1]):
            acc += int(ax[k]) * int(x[ai[k]])
        y[i] = acc % p
    return y


# ------------------------------------------------------------ public API
# All public functions take and return standard residues in [0, p).

def _u64(values):
    return np.asarray([int(v) for v in values], dtype=np.uint64)


def poly_eval(exps, coeffs, offsets, point, p):
    """Evaluate a batch of Laurent polynomials mod p.

    exps: int64 (terms, nvars); coeffs: residues per term; offsets: poly
    boundaries; point: one nonzero residue per variable used with a negative
    exponent.  Returns a list of residues, one per polynomial.
    """
    exps = np.asarray(exps, dtype=np.int64).reshape(-1, len(point))
    offsets = np.asarray(offsets, dtype=np.int64)
    point = [int(x) % p for x in point]
    inv = [pow(x, -1, p) if x else 0 for x in point]
    if backend_name() == "numpy":
        return [int(x) for x in _poly_eval_np(exps, coeffs, offsets, point, inv, p)]
    ctx = mont_ctx(p)
    pt_m = _to_mont_nb(_u64(point), ctx.r2_64, ctx.p64, ctx.pinv64)
    inv_m = _to_mont_nb(_u64(inv), ctx.r2_64, ctx.p64, ctx.pinv64)
    co_m = _to_mont_nb(_u64([int(c) % p for c in coeffs]), ctx.r2_64, ctx.p64, ctx.pinv64)
    one_m = np.uint64(pow(2, 64, p))
    out = _poly_eval_nb(exps, co_m, offsets, pt_m, inv_m, one_m, ctx.p64, ctx.pinv64)
    return [int(x) for x in _from_mont_nb(out, ctx.p64, ctx.pinv64)]


def spgemm(nrows, ncols, a, b, p):
    """CSR product mod p; a and b are (indptr, indices, data) triples."""
    ap, ai, ax = a
    bp, bi, bx = b
    if backend_name() == "numpy":
        cp, ci, cx = _spgemm_np(nrows, ap, ai, ax, bp, bi, bx, p)
        return cp, ci, [int(x) for x in cx]
    ctx = mont_ctx(p)
    ax_m = _to_mont_nb(_u64(ax), ctx.r2_64, ctx.p64, ctx.pinv64)
    bx_m = _to_mont_nb(_u64(bx), ctx.r2_64, ctx.p64, ctx.pinv64)
    cp, ci, cx = _spgemm_nb(nrows, ncols, np.asarray(ap, dtype=np.int64),
                            np.asarray(ai, dtype=np.int64), ax_m,
                            np.asarray(bp, dtype=np.int64),
                            np.asarray(bi, dtype=np.int64), bx_m, ctx.p64, ctx.pinv64)
    return cp, ci, [int(x) for x in _from_mont_nb(cx, ctx.p64, ctx.pinv64)]


def spmv(nrows, a, x, p):
    ap, ai, ax = a
    if backend_name() == "numpy":
        return [int(v) for v in _spmv_np(nrows, ap, ai, ax, x, p)]
    ctx = mont_ctx(p)
    ax_m = _to_mont_nb(_u64(ax), ctx.r2_64, ctx.p64, ctx.pinv64)
    x_m = _to_mont_nb(_u64(x), ctx.r2_64, ctx.p64, ctx.pinv64)
    y = _spmv_nb(nrows, np.asarray(ap, dtype=np.int64), np.asarray(ai, dtype=np.int64),
                 ax_m, x_m, ctx.p64, ctx.pinv64)
    return [int(v) for v in _from_mont_nb(y, ctx.p64, ctx.pinv64)]
