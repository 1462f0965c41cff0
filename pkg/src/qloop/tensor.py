"""Sparse exact matrices on tensor powers of C^N, plus their mod-p images.

Indices are 0-based internally.  A basis vector |i_1,...,i_k> with 1-based
digits sits at index sum (i_m - 1) N^(k-m).
"""
import json

import numpy as np

from . import kernels
from .scalars import (CTX, ONE, ZERO, PrimePoint, RatScalar, _coerce,
                      _poly_parts, parse)


class IndexOutOfRange(IndexError):
    pass


class LegMismatch(ValueError):
    pass


class DimMismatch(ValueError):
    pass


class SingularMatrix(ArithmeticError):
    pass


def flat_index(digits, N):
    """1-based digits -> 0-based flat index."""
    idx = 0
    for d in digits:
        if not 1 <= d <= N:
            raise IndexOutOfRange(f"digit {d} outside 1..{N}")
        idx = idx * N + (d - 1)
    return idx


def digits_of(idx, N, legs):
    out = []
    for _ in range(legs):
        idx, r = divmod(idx, N)
        out.append(r + 1)
    return tuple(reversed(out))


def _check_legs(N, legs):
    if N < 1 or legs < 1:
        raise LegMismatch("need N >= 1 and at least one leg")


# Shape-only helpers shared by the exact and modular containers.  They act on
# plain dicts {(r, c): value}.

def _embed_entries(entries, N, m, target, k):
    if len(set(target)) != len(target) or len(target) != m:
        raise LegMismatch(f"target legs {target} do not match an operator on {m} legs")
    if any(not 1 <= t <= k for t in target):
        raise LegMismatch(f"target legs {target} outside 1..{k}")
    rest = [leg for leg in range(1, k + 1) if leg not in target]
    weights = [N ** (k - leg) for leg in range(1, k + 1)]
    # offsets of the untouched legs
    spectator = [0]
    for leg in rest:
        w = weights[leg - 1]
        spectator = [base + d * w for base in spectator for d in range(N)]
    cache = {}

    def place(idx):
        hit = cache.get(idx)
        if hit is None:
            hit = 0
            for pos, d in enumerate(digits_of(idx, N, m)):
                hit += (d - 1) * weights[target[pos] - 1]
            cache[idx] = hit
        return hit

    out = {}
    for (r, c), val in entries.items():
        pr, pc = place(r), place(c)
        for base in spectator:
            out[(base + pr, base + pc)] = val
    return out


def _transpose_entries(entries, N, k, legs, anti):
    legs = sorted(set(legs))
    if any(not 1 <= leg <= k for leg in legs):
        raise LegMismatch(f"legs {legs} outside 1..{k}")
    out = {}
    for (r, c), val in entries.items():
        rd = list(digits_of(r, N, k))
        cd = list(digits_of(c, N, k))
        for leg in legs:
            a, b = rd[leg - 1], cd[leg - 1]
            if anti:
                rd[leg - 1], cd[leg - 1] = N + 1 - b, N + 1 - a
            else:
                rd[leg - 1], cd[leg - 1] = b, a
        out[(flat_index(rd, N), flat_index(cd, N))] = val
    return out


def _kron_entries(a, b, dim_b):
    out = {}
    for (r1, c1), x in a.items():
        for (r2, c2), y in b.items():
            out[(r1 * dim_b + r2, c1 * dim_b + c2)] = x * y
    return out


class SparseVec:
    __slots__ = ("N", "legs", "dim", "_entries")

    def __init__(self, N, legs, entries=None):
        _check_legs(N, legs)
        self.N, self.legs, self.dim = N, legs, N ** legs
        self._entries = {}
        for idx, val in (entries or {}).items():
            if not 0 <= idx < self.dim:
                raise IndexOutOfRange(idx)
            val = _coerce(val)
            if not val.is_zero():
                self._entries[idx] = val

    @classmethod
    def basis(cls, digits, N):
        return cls(N, len(digits), {flat_index(digits, N): ONE})

    def items(self):
        return sorted(self._entries.items())

    def __getitem__(self, idx):
        return self._entries.get(idx, ZERO)

    def component(self, digits):
        return self[flat_index(digits, self.N)]

    def __add__(self, other):
        self._same(other)
        out = dict(self._entries)
        for idx, val in other._entries.items():
            out[idx] = out.get(idx, ZERO) + val
        return SparseVec(self.N, self.legs, out)

    def __sub__(self, other):
        return self + other * -1

    def __mul__(self, scalar):
        scalar = _coerce(scalar)
        return SparseVec(self.N, self.legs, {i: v * scalar for i, v in self._entries.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        return (isinstance(other, SparseVec) and self.dim == other.dim
                and self._entries == other._entries)

    def _same(self, other):
        if (self.N, self.legs) != (other.N, other.legs):
            raise DimMismatch("vector shapes differ")

    def is_zero(self):
        return not self._entries

    def nnz(self):
        return len(self._entries)


class SparseMat:
    """Exact sparse matrix on (C^N)^{legs} with RatScalar entries."""

    __slots__ = ("N", "legs", "dim", "_rows")

    def __init__(self, N, legs, entries=None):
        _check_legs(N, legs)
        self.N, self.legs, self.dim = N, legs, N ** legs
        rows = {}
        for (r, c), val in (entries or {}).items():
            if not (0 <= r < self.dim and 0 <= c < self.dim):
                raise IndexOutOfRange((r, c))
            val = _coerce(val)
            if not val.is_zero():
                rows.setdefault(r, {})[c] = val
        self._rows = rows

    @classmethod
    def _from_rows(cls, N, legs, rows):
        obj = cls.__new__(cls)
        obj.N, obj.legs, obj.dim = N, legs, N ** legs
        obj._rows = {r: row for r, row in rows.items() if row}
        return obj

    # -- constructors
    @classmethod
    def identity(cls, N, legs=1):
        return cls(N, legs, {(i, i): ONE for i in range(N ** legs)})

    @classmethod
    def zero(cls, N, legs=1):
        return cls(N, legs)

    @classmethod
    def unit(cls, i, j, N):
        if not (1 <= i <= N and 1 <= j <= N):
            raise IndexOutOfRange(f"unit({i},{j}) outside 1..{N}")
        return cls(N, 1, {(i - 1, j - 1): ONE})

    @classmethod
    def permutation(cls, N):
        return cls(N, 2, {(a * N + b, b * N + a): ONE for a in range(N) for b in range(N)})

    @classmethod
    def diagonal(cls, values, N=None, legs=1):
        values = list(values)
        N = N or len(values)
        if N ** legs != len(values):
            raise DimMismatch("diagonal length must be N^legs")
        return cls(N, legs, {(i, i): v for i, v in enumerate(values)})

    # -- access
    def entries(self):
        return {(r, c): v for r, row in self._rows.items() for c, v in row.items()}

    def items(self):
        return [((r, c), self._rows[r][c]) for r in sorted(self._rows) for c in sorted(self._rows[r])]

    def nnz(self):
        return sum(len(row) for row in self._rows.values())

    def __getitem__(self, rc):
        r, c = rc
        return self._rows.get(r, {}).get(c, ZERO)

    def entry(self, row_digits, col_digits):
        return self[flat_index(row_digits, self.N), flat_index(col_digits, self.N)]

    def row(self, r):
        return dict(self._rows.get(r, {}))

    def column(self, c):
        return SparseVec(self.N, self.legs, {r: row[c] for r, row in self._rows.items() if c in row})

    # -- algebra
    def _same(self, other):
        if not isinstance(other, SparseMat) or (self.N, self.legs) != (other.N, other.legs):
            raise DimMismatch("matrix shapes differ")

    def __add__(self, other):
        self._same(other)
        rows = {r: dict(row) for r, row in self._rows.items()}
        for r, row in other._rows.items():
            tgt = rows.setdefault(r, {})
            for c, v in row.items():
                s = tgt.get(c, ZERO) + v
                if s.is_zero():
                    tgt.pop(c, None)
                else:
                    tgt[c] = s
        return SparseMat._from_rows(self.N, self.legs, rows)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, scalar):
        scalar = _coerce(scalar)
        if scalar.is_zero():
            return SparseMat(self.N, self.legs)
        return SparseMat._from_rows(self.N, self.legs, {
            r: {c: v * scalar for c, v in row.items()} for r, row in self._rows.items()})

    def __mul__(self, other):
        if isinstance(other, SparseMat):
            return self.matmul(other)
        if isinstance(other, SparseVec):
            return self.mat_vec(other)
        return self.scale(other)

    def __rmul__(self, scalar):
        return self.scale(scalar)

    def __matmul__(self, other):
        return self * other

    def matmul(self, other):
        self._same(other)
        rows = {}
        orows = other._rows
        for r, row in self._rows.items():
            acc = {}
            for k, a in row.items():
                brow = orows.get(k)
                if not brow:
                    continue
                for c, b in brow.items():
                    prev = acc.get(c)
                    acc[c] = a * b if prev is None else prev + a * b
            rows[r] = {c: v for c, v in acc.items() if not v.is_zero()}
        return SparseMat._from_rows(self.N, self.legs, rows)

    def mat_vec(self, vec):
        if (vec.N, vec.legs) != (self.N, self.legs):
            raise DimMismatch("vector shape differs from matrix")
        out = {}
        for r, row in self._rows.items():
            acc = ZERO
            for c, a in row.items():
                x = vec._entries.get(c)
                if x is not None:
                    acc = acc + a * x
            if not acc.is_zero():
                out[r] = acc
        return SparseVec(self.N, self.legs, out)

    def kron(self, other):
        if self.N != other.N:
            raise DimMismatch("leg dimensions differ")
        return SparseMat(self.N, self.legs + other.legs,
                         _kron_entries(self.entries(), other.entries(), other.dim))

    def embed(self, target_legs, total_legs):
        target_legs = list(target_legs)
        return SparseMat(self.N, total_legs,
                         _embed_entries(self.entries(), self.N, self.legs, target_legs, total_legs))

    def anti_transpose(self, legs=None):
        legs = range(1, self.legs + 1) if legs is None else legs
        return SparseMat(self.N, self.legs,
                         _transpose_entries(self.entries(), self.N, self.legs, legs, True))

    def transpose(self, legs=None):
        """Ordinary (partial) transposition."""
        legs = range(1, self.legs + 1) if legs is None else legs
        return SparseMat(self.N, self.legs,
                         _transpose_entries(self.entries(), self.N, self.legs, legs, False))

    def map(self, fn):
        return SparseMat(self.N, self.legs, {rc: fn(v) for rc, v in self.entries().items()})

    def subs(self, bindings):
        return self.map(lambda v: v.subs(bindings))

    def __eq__(self, other):
        if not isinstance(other, SparseMat):
            return NotImplemented
        return (self.N, self.legs) == (other.N, other.legs) and self._rows == other._rows

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    __hash__ = None

    def is_zero(self):
        return not self._rows

    def is_identity(self):
        return self == SparseMat.identity(self.N, self.legs)

    def is_scalar(self):
        """Return the scalar lambda if self = lambda*I, else None."""
        if self.nnz() != self.dim:
            return None
        lam = self[0, 0]
        for i in range(self.dim):
            if self._rows.get(i, {}).get(i) != lam or len(self._rows[i]) != 1:
                return None
        return lam

    def __repr__(self):
        return f"SparseMat(N={self.N}, legs={self.legs}, nnz={self.nnz()})"

    # -- inversion
    def invert(self):
        """Exact inverse over the fraction field.

        Rows and columns are split into independent blocks first, then each
        block goes through fraction-free Gauss-Jordan on polynomials.
        """
        out = {}
        for rows, cols in self._blocks():
            if len(rows) != len(cols):
                raise SingularMatrix("block with unequal row and column support")
            out.update(self._invert_block(rows, cols))
        if len(out) == 0 or len({r for r, _ in out}) != self.dim:
            raise SingularMatrix("matrix is singular")
        return SparseMat(self.N, self.legs, out)

    def _blocks(self):
        parent = list(range(2 * self.dim))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for r, row in self._rows.items():
            for c in row:
                a, b = find(r), find(self.dim + c)
                if a != b:
                    parent[a] = b
        groups = {}
        for x in range(2 * self.dim):
            groups.setdefault(find(x), ([], []))
            if x < self.dim:
                groups[find(x)][0].append(x)
            else:
                groups[find(x)][1].append(x - self.dim)
        return [g for g in groups.values()]

    def _invert_block(self, rows, cols):
        n = len(rows)
        cpos = {c: k for k, c in enumerate(cols)}
        # clear denominators row by row: row_i of A is scaled by lam_i
        lam = []
        mat = []
        for r in rows:
            row = self._rows.get(r, {})
            den = CTX.constant(1)
            parts = {}
            for c, v in row.items():
                num, d = _poly_parts(v)
                parts[cpos[c]] = (num, d)
                den = den * d / den.gcd(d)
            line = [CTX.constant(0)] * (2 * n)
            for k, (num, d) in parts.items():
                line[k] = num * (den / d)
            lam.append(RatScalar.from_polys(den))
            mat.append(line)
        for i in range(n):
            mat[i][n + i] = CTX.constant(1)
        prev = CTX.constant(1)
        for k in range(n):
            piv = None
            for i in range(k, n):
                if not mat[i][k].is_zero():
                    if piv is None or len(mat[i][k]) < len(mat[piv][k]):
                        piv = i
            if piv is None:
                raise SingularMatrix("zero pivot column")
            mat[k], mat[piv] = mat[piv], mat[k]
            pk = mat[k][k]
            assert not pk.is_zero()
            for i in range(n):
                if i == k:
                    continue
                a_ik = mat[i][k]
                line = mat[i]
                pivrow = mat[k]
                if a_ik.is_zero():
                    mat[i] = [x if x.is_zero() else (pk * x) / prev for x in line]
                else:
                    mat[i] = [(pk * x - a_ik * y) / prev if not (x.is_zero() and y.is_zero())
                              else x for x, y in zip(line, pivrow)]
            prev = pk
        det = prev
        out = {}
        for i in range(n):
            for j in range(n):
                x = mat[i][n + j]
                if not x.is_zero():
                    # A^-1 = (Lam A)^-1 Lam: column j carries lam_j
                    out[(cols[i], rows[j])] = RatScalar.from_polys(x, det) * lam[j]
        return out

    # -- modular image
    def eval_mod(self, point: PrimePoint):
        items = self.items()
        vals = eval_many([v for _, v in items], point)
        return ModMat(self.N, self.legs, point.p, {rc: x for (rc, _), x in zip(items, vals)})

    # -- JSON
    def to_json(self):
        return {"N": self.N, "legs": self.legs,
                "entries": [{"r": r, "c": c, **v.to_json()} for (r, c), v in self.items()]}

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        entries = {}
        for e in obj["entries"]:
            num = parse(e["num"])
            den = parse(e.get("den", "1"))
            entries[(int(e["r"]), int(e["c"]))] = num / den
        return cls(int(obj["N"]), int(obj["legs"]), entries)


def eval_many(scalars, point: PrimePoint):
    """Evaluate many RatScalars mod p in two batched kernel calls."""
    from .scalars import PoleAtPoint, NV
    p = point.p
    nums, dens = [], []
    for v in scalars:
        nt, dt = v.term_arrays()
        nums.append(nt)
        dens.append(dt)

    def batch(groups):
        exps, coeffs, offsets = [], [], [0]
        for terms in groups:
            for e, a, b in terms:
                exps.append(e)
                coeffs.append(a * pow(b, -1, p) % p)
            offsets.append(len(exps))
        arr = np.asarray(exps, dtype=np.int64).reshape(-1, NV)
        if (arr < 0).any():
            bad = [k for k in range(NV) if (arr[:, k] < 0).any() and point.residues[k] == 0]
            if bad:
                raise PoleAtPoint("negative power of a variable that vanishes mod p")
        return kernels.poly_eval(arr, coeffs, offsets, point.residues, p)

    nv, dv = batch(nums), batch(dens)
    out = []
    for a, b in zip(nv, dv):
        if b == 0:
            raise PoleAtPoint("denominator vanishes mod p")
        out.append(a * pow(b, -1, p) % p)
    return out


class ModMat:
    """Sparse matrix of residues mod p, stored as CSR."""

    __slots__ = ("N", "legs", "dim", "p", "indptr", "indices", "data")

    def __init__(self, N, legs, p, entries=None):
        self.N, self.legs, self.dim, self.p = N, legs, N ** legs, p
        rows = {}
        for (r, c), v in (entries or {}).items():
            v = int(v) % p
            if v:
                rows.setdefault(r, {})[c] = v
        self._set_rows(rows)

    def _set_rows(self, rows):
        indptr = [0]
        indices, data = [], []
        for r in range(self.dim):
            row = rows.get(r)
            if row:
                for c in sorted(row):
                    indices.append(c)
                    data.append(row[c])
            indptr.append(len(indices))
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = data

    @classmethod
    def _from_csr(cls, N, legs, p, indptr, indices, data):
        obj = cls.__new__(cls)
        obj.N, obj.legs, obj.dim, obj.p = N, legs, N ** legs, p
        obj.indptr = np.asarray(indptr, dtype=np.int64)
        obj.indices = np.asarray(indices, dtype=np.int64)
        obj.data = list(data)
        return obj

    @classmethod
    def identity(cls, N, legs, p):
        return cls(N, legs, p, {(i, i): 1 for i in range(N ** legs)})

    def entries(self):
        out = {}
        for r in range(self.dim):
            for k in range(self.indptr[r], self.indptr[r + 1]):
                out[(r, int(self.indices[k]))] = self.data[k]
        return out

    def nnz(self):
        return len(self.data)

    def __getitem__(self, rc):
        r, c = rc
        lo, hi = self.indptr[r], self.indptr[r + 1]
        k = lo + int(np.searchsorted(self.indices[lo:hi], c))
        if k < hi and self.indices[k] == c:
            return self.data[k]
        return 0

    def _same(self, other):
        if (self.N, self.legs, self.p) != (other.N, other.legs, other.p):
            raise DimMismatch("modular matrix shapes or primes differ")

    def __matmul__(self, other):
        if isinstance(other, ModMat):
            self._same(other)
            cp, ci, cx = kernels.spgemm(self.dim, self.dim,
                                        (self.indptr, self.indices, self.data),
                                        (other.indptr, other.indices, other.data), self.p)
            return ModMat._from_csr(self.N, self.legs, self.p, cp, ci, cx)
        return self.mat_vec(other)

    __mul__ = __matmul__

    def mat_vec(self, x):
        x = [int(v) % self.p for v in x]
        if len(x) != self.dim:
            raise DimMismatch("vector length differs")
        return kernels.spmv(self.dim, (self.indptr, self.indices, self.data), x, self.p)

    def __add__(self, other):
        self._same(other)
        out = self.entries()
        for rc, v in other.entries().items():
            out[rc] = (out.get(rc, 0) + v) % self.p
        return ModMat(self.N, self.legs, self.p, out)

    def scale(self, k):
        k = int(k) % self.p
        return ModMat(self.N, self.legs, self.p, {rc: v * k for rc, v in self.entries().items()})

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def embed(self, target_legs, total_legs):
        return ModMat(self.N, total_legs, self.p,
                      _embed_entries(self.entries(), self.N, self.legs, list(target_legs), total_legs))

    def anti_transpose(self, legs=None):
        legs = range(1, self.legs + 1) if legs is None else legs
        return ModMat(self.N, self.legs, self.p,
                      _transpose_entries(self.entries(), self.N, self.legs, legs, True))

    def transpose(self, legs=None):
        legs = range(1, self.legs + 1) if legs is None else legs
        return ModMat(self.N, self.legs, self.p,
                      _transpose_entries(self.entries(), self.N, self.legs, legs, False))

    def kron(self, other):
        self._same_prime(other)
        return ModMat(self.N, self.legs + other.legs, self.p,
                      _kron_entries(self.entries(), other.entries(), other.dim))

    def _same_prime(self, other):
        if (self.N, self.p) != (other.N, other.p):
            raise DimMismatch("leg dimension or prime differs")

    def invert(self):
        """Gauss-Jordan mod p (rows kept as dicts)."""
        p, n = self.p, self.dim
        rows = [dict() for _ in range(n)]
        for (r, c), v in self.entries().items():
            rows[r][c] = v
        inv = [{i: 1} for i in range(n)]
        for k in range(n):
            piv = next((i for i in range(k, n) if rows[i].get(k)), None)
            if piv is None:
                raise SingularMatrix("singular mod p")
            rows[k], rows[piv] = rows[piv], rows[k]
            inv[k], inv[piv] = inv[piv], inv[k]
            t = pow(rows[k][k], -1, p)
            rows[k] = {c: v * t % p for c, v in rows[k].items()}
            inv[k] = {c: v * t % p for c, v in inv[k].items()}
            for i in range(n):
                if i != k and rows[i].get(k):
                    f = rows[i][k]
                    for src, dst in ((rows[k], rows[i]), (inv[k], inv[i])):
                        for c, v in src.items():
                            x = (dst.get(c, 0) - f * v) % p
                            if x:
                                dst[c] = x
                            else:
                                dst.pop(c, None)
        return ModMat(self.N, self.legs, p,
                      {(r, c): v for r in range(n) for c, v in inv[r].items()})

    def __eq__(self, other):
        if not isinstance(other, ModMat):
            return NotImplemented
        return ((self.N, self.legs, self.p) == (other.N, other.legs, other.p)
                and self.entries() == other.entries())

    __hash__ = None

    def is_zero(self):
        return not self.data

    def is_identity(self):
        return self == ModMat.identity(self.N, self.legs, self.p)

    def is_scalar(self):
        if self.nnz() != self.dim:
            return None
        lam = self.data[0]
        for r in range(self.dim):
            if self.indptr[r + 1] - self.indptr[r] != 1 or self.indices[self.indptr[r]] != r \
                    or self.data[self.indptr[r]] != lam:
                return None
        return lam

    def first_difference(self, other):
        """First (row, col, lhs, rhs) where self and other differ, or None."""
        a, b = self.entries(), other.entries()
        for rc in sorted(set(a) | set(b)):
            if a.get(rc, 0) != b.get(rc, 0):
                return rc, a.get(rc, 0), b.get(rc, 0)
        return None

    def __repr__(self):
        return f"ModMat(N={self.N}, legs={self.legs}, p={self.p}, nnz={self.nnz()})"
