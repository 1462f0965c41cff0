"""Scalar functions and R-matrices for the twisted D-type loop algebra.

Everything lives in the Laurent field over s = q^(1/4).  The square root of
xi is the variable y in generic mode, or the power s^(2(1-n)) once
xi = q^(1-n) is imposed.
"""
from fractions import Fraction
from functools import lru_cache

from .scalars import ONE, ZERO, RatScalar, _coerce, var
from .tensor import IndexOutOfRange, SparseMat

S = var("s")
Q = S ** 4
U_, V_, W_ = var("u"), var("v"), var("w")


# Plain rational functions with q passed in, usable with any q.

def f(u, v, q=Q):
    u, v, q = _coerce(u), _coerce(v), _coerce(q)
    return (u * q - v / q) / (u - v)


def g(u, v, q=Q):
    u, v, q = _coerce(u), _coerce(v), _coerce(q)
    return (q - 1 / q) * u / (u - v)


def gt(u, v, q=Q):
    u, v, q = _coerce(u), _coerce(v), _coerce(q)
    return (q - 1 / q) * v / (u - v)


def half_f(u, v, s=S):
    """(q^(1/2) u - q^(-1/2) v)/(u - v); the f of the rank-one diagonal R."""
    u, v, s = _coerce(u), _coerce(v), _coerce(s)
    return (s ** 2 * u - v / s ** 2) / (u - v)


def half_g(u, v, s=S):
    u, v, s = _coerce(u), _coerce(v), _coerce(s)
    return (s ** 2 - s ** -2) * u / (u - v)


def half_gt(u, v, s=S):
    u, v, s = _coerce(u), _coerce(v), _coerce(s)
    return (s ** 2 - s ** -2) * v / (u - v)


def q_int(k):
    """[k]_q as a Laurent polynomial in s, symmetric form q^(k-1)+...+q^(1-k)."""
    return sum((Q ** (k - 1 - 2 * a) for a in range(k)), ZERO)


class Model:
    """All scalar data and matrices at rank n.

    xi_mode is "specialized" (xi = q^(1-n)) or "generic" (sqrt(xi) = y free).
    Matrix builders take spectral arguments as RatScalars, so R(v*xi, u) is
    built directly rather than by substitution.
    """

    def __init__(self, n, xi_mode="specialized"):
        if n < 1:
            raise ValueError("rank n must be >= 1")
        if xi_mode not in ("specialized", "generic"):
            raise ValueError(f"unknown xi mode {xi_mode!r}")
        self.n = n
        self.N = 2 * n
        self.xi_mode = xi_mode
        self.s = S
        self.q = Q
        self.y = S ** (2 * (1 - n)) if xi_mode == "specialized" else var("y")
        self.xi = self.y ** 2
        self.gamma = Q - 1 / Q
        self.alpha = Q - 2 + 1 / Q
        self.kappa = n - 1

    def __repr__(self):
        return f"Model(n={self.n}, xi_mode={self.xi_mode!r})"

    # -- indices
    def _check(self, *idx):
        for i in idx:
            if not 1 <= i <= self.N:
                raise IndexOutOfRange(f"index {i} outside 1..{self.N}")

    def prime(self, i):
        self._check(i)
        return self.N + 1 - i

    def bar2(self, i):
        """Twice the bar map, always an integer."""
        self._check(i)
        n = self.n
        if i < n:
            return 2 * n - 1 - 2 * i
        if i in (n, n + 1):
            return 0
        return 2 * n + 3 - 2 * i

    def bar(self, i):
        return Fraction(self.bar2(i), 2)

    def qbar(self, i, sign=1):
        """q^(sign * bar(i)) = s^(2 * sign * bar2(i))."""
        return S ** (2 * sign * self.bar2(i))

    def middle(self, i):
        return i in (self.n, self.n + 1)

    # -- scalar functions
    def f(self, u, v):
        return f(u, v)

    def g(self, u, v):
        return g(u, v)

    def gt(self, u, v):
        return gt(u, v)

    def p(self, i, j, u, v):
        self._check(i, j)
        if i == j:
            return f(u, v) - 1
        return gt(u, v) if i < j else g(u, v)

    def qf(self, i, j, u, v, xi=None):
        """q_ij(u, v | xi); xi defaults to the model's xi."""
        xi = self.xi if xi is None else _coerce(xi)
        val = self.qbar(i) * self.qbar(j, -1) * self.p(j, i, _coerce(v) * xi, u)
        if i == j and self.middle(i):
            val = val - self.alpha
        return val

    def Q1(self, u, v, xi=None):
        xi = self.xi if xi is None else _coerce(xi)
        u, v = _coerce(u), _coerce(v)
        return self.gamma * (v * xi ** 2 + u) * (v + u) / (v ** 2 * xi ** 2 - u ** 2)

    def Q2(self, u, v, xi=None):
        xi = self.xi if xi is None else _coerce(xi)
        u, v = _coerce(u), _coerce(v)
        return self.gamma * (xi ** 2 - 1) * v * u / (v ** 2 * xi ** 2 - u ** 2)

    def a_fn(self, i, j, u, v):
        u, v = _coerce(u), _coerce(v)
        x, z = v ** 2 * self.xi ** 2, u ** 2
        if i == j:
            return f(x, z)
        w = self.qbar(i) * self.qbar(j, -1)
        return w * (g(x, z) if i < j else gt(x, z))

    def b_fn(self, sign, i, u, v):
        u, v = _coerce(u), _coerce(v)
        w = self.qbar(self.n) * self.qbar(i, -1)
        if i < self.n:
            return -w * g(u * sign, v * self.xi)
        return -w * gt(u * sign, v * self.xi)

    def c_fn(self, sign, u, v):
        u, v = _coerce(u), _coerce(v)
        return 1 + Fraction(1, 2) * (1 + self.xi) / self.gamma \
            * gt(u * -sign, v) * g(u * sign, v * self.xi)

    def d_fn(self, sign, u, v):
        u, v = _coerce(u), _coerce(v)
        return Fraction(1, 2) * (1 - self.xi) / self.gamma \
            * gt(u * sign, v) * g(u * sign, v * self.xi)

    # -- structural matrices
    def _e(self, i, j):
        return SparseMat.unit(i, j, self.N)

    def D(self, power=1):
        return SparseMat.diagonal([self.qbar(i, power) for i in range(1, self.N + 1)])

    def Dinv(self):
        return self.D(-1)

    def U(self):
        n, N = self.n, self.N
        ent = {}
        for i in range(1, N + 1):
            j = self.prime(i) if self.middle(i) else i
            ent[(i - 1, j - 1)] = ONE
        return SparseMat(N, 1, ent)

    def _middle_block(self, diag, off):
        n, N = self.n, self.N
        ent = {(i - 1, i - 1): ONE for i in range(1, N + 1) if not self.middle(i)}
        ent[(n - 1, n - 1)] = diag
        ent[(n, n)] = diag
        ent[(n - 1, n)] = off
        ent[(n, n - 1)] = off
        return SparseMat(N, 1, ent)

    def UU(self):
        a_plus = (1 + 1 / self.y) / (2 * S)
        a_minus = (1 - 1 / self.y) / (2 * S)
        return self._middle_block(a_plus, a_minus)

    def UUinv(self):
        return self._middle_block((1 + self.y) * S / 2, (1 - self.y) * S / 2)

    def Dt(self):
        uu = self.UU()
        return self.D() * uu * uu

    # -- two-leg blocks
    def _two_leg(self, terms):
        """terms: iterable of (coeff, (i, j), (k, l)) meaning coeff e_ij (x) e_kl."""
        N = self.N
        acc = {}
        for coeff, (i, j), (k, l) in terms:
            key = ((i - 1) * N + (k - 1), (j - 1) * N + (l - 1))
            prev = acc.get(key)
            acc[key] = coeff if prev is None else prev + coeff
        return SparseMat(N, 2, acc)

    def I2(self):
        return SparseMat.identity(self.N, 2)

    def perm(self):
        return SparseMat.permutation(self.N)

    def U1(self):
        return self.U().kron(SparseMat.identity(self.N))

    def on1(self, A):
        return A.kron(SparseMat.identity(self.N))

    def on2(self, A):
        return SparseMat.identity(self.N).kron(A)

    @lru_cache(maxsize=None)
    def P(self, u, v):
        rng = range(1, self.N + 1)
        return self._two_leg((self.p(i, j, u, v), (j, i), (i, j)) for i in rng for j in rng)

    @lru_cache(maxsize=None)
    def QJ(self, u, v, xi=None):
        rng = range(1, self.N + 1)
        pr = self.prime
        return self._two_leg((self.qf(i, j, u, v, xi), (pr(i), pr(j)), (i, j))
                             for i in rng for j in rng)

    def middle_diag(self):
        """sum over i = n, n+1 of e_ii (x) e_ii."""
        n = self.n
        return self._two_leg([(ONE, (n, n), (n, n)), (ONE, (n + 1, n + 1), (n + 1, n + 1))])

    def QJ_from_P(self, u, v):
        """Q^J assembled from P(v xi, u) by the partial-transpose identity."""
        u, v = _coerce(u), _coerce(v)
        Pm = self.perm()
        D2, D2i = self.on2(self.D()), self.on2(self.Dinv())
        inner = self.P(v * self.xi, u).anti_transpose([1])
        return D2 * Pm * inner * Pm * D2i - self.middle_diag().scale(self.alpha)

    def X(self):
        n = self.n
        y, xi = self.y, self.xi
        c = self.gamma / (8 * y)
        left = [(n, n + 1), (n + 1, n)]
        right = [((xi - 1), (n, n)), (-(xi - 1), (n + 1, n + 1)),
                 ((y - 1) ** 2, (n + 1, n)), (-(y - 1) ** 2, (n, n + 1))]
        return self._two_leg((c * cr, lft, rt) for lft in left for cr, rt in right)

    def _uu2(self):
        return self.UU().kron(self.UU()), self.UUinv().kron(self.UUinv())

    @lru_cache(maxsize=None)
    def Qmat(self, u, v):
        """Q(u, v | xi) via U-conjugation of the partial-transpose form."""
        u, v = _coerce(u), _coerce(v)
        A, Ai = self._uu2()
        core = self.QJ_from_P(u, v) + self.middle_diag().scale(self.alpha)
        return A * core * Ai - self.middle_diag().scale(self.alpha) + self.X()

    @lru_cache(maxsize=None)
    def Qtilde(self, u, v, literal=False):
        """Even-in-xi replacement for Q.

        literal=True uses 1/4 on both the Q1 and Q2 middle terms; those
        weights do not reproduce R.  The default weights 1/2 and 1/8 do.
        """
        u, v = _coerce(u), _coerce(v)
        n, N = self.n, self.N
        xi, pr = self.xi, self.prime
        half = Fraction(1, 2)
        terms = []
        for i in range(1, N + 1):
            for j in range(1, N + 1):
                mi, mj = self.middle(i), self.middle(j)
                if mi and mj:
                    continue
                qp, qm = self.qf(i, j, u, v, xi), self.qf(i, j, u, v, -xi)
                if not mi and not mj:
                    c = half * (qp + qm)
                elif mi:
                    c = ((1 + 1 / xi) * qp + (1 - 1 / xi) * qm) / (2 * S ** 2)
                else:
                    c = ((1 + xi) * qp + (1 - xi) * qm) * S ** 2 / 2
                terms.append((c, (pr(i), pr(j)), (i, j)))
        if literal:
            q1, q2 = self.Q1(u, v) / 4, self.Q2(u, v) / 4
        else:
            q1, q2 = self.Q1(u, v) / 2, self.Q2(u, v) / 8
        for i in (n, n + 1):
            for j in (n, n + 1):
                terms.append((q1, (pr(i), pr(j)), (i, j)))
                # (e_ij - e_i'j') (x) (e_ij' - e_i'j)
                for c1, a in ((ONE, (i, j)), (-ONE, (pr(i), pr(j)))):
                    for c2, b in ((ONE, (i, pr(j))), (-ONE, (pr(i), j))):
                        terms.append((q2 * c1 * c2, a, b))
        mid = [(n, n), (n + 1, n + 1)]
        for a in mid:
            for b in mid:
                terms.append((-self.alpha / 4, a, b))
        for a in ((n, n + 1), (n + 1, n)):
            terms.append((-self.gamma / 4, a, (n + 1, n)))
            terms.append((self.gamma / 4, a, (n, n + 1)))
        return self._two_leg(terms)

    def symmetrize(self, block_fn, u, v):
        """1/2 (B(u, v) + (U x I) B(-u, v) (U x I))."""
        u = _coerce(u)
        U1 = self.U1()
        return (block_fn(u, v) + U1 * block_fn(-u, v) * U1).scale(Fraction(1, 2))

    def calP(self, u, v):
        return self.symmetrize(self.P, u, v)

    def calQJ(self, u, v):
        return self.symmetrize(self.QJ, u, v)

    def calQ(self, u, v):
        return self.symmetrize(self.Qmat, u, v)

    # -- R-matrices
    @lru_cache(maxsize=None)
    def RJ(self, u=U_, v=V_, form="compact"):
        u, v = _coerce(u), _coerce(v)
        if form == "compact":
            return self.I2() + self.calP(u, v) + self.calQJ(u, v)
        if form == "structured":
            return self._rj_structured(u, v)
        raise ValueError(f"unknown form {form!r}")

    def _rj_structured(self, u, v):
        n, N, pr = self.n, self.N, self.prime
        half = Fraction(1, 2)
        outer = [i for i in range(1, N + 1) if not self.middle(i)]
        mids = (n, n + 1)
        u2, v2 = u ** 2, v ** 2
        terms = []
        for i in outer:
            terms.append((f(u2, v2), (i, i), (i, i)))
        for i in range(1, N + 1):
            for j in range(1, N + 1):
                if j in (i, pr(i)) or (self.middle(i) and self.middle(j)):
                    continue
                terms.append((ONE, (i, i), (j, j)))
        for i in outer:
            for j in outer:
                if i < j:
                    terms.append((g(u2, v2), (i, j), (j, i)))
                    terms.append((gt(u2, v2), (j, i), (i, j)))
                terms.append((self.a_fn(i, j, u, v), (pr(i), pr(j)), (i, j)))
        for i in range(1, n):
            ip = pr(i)
            for j in mids:
                jp = pr(j)
                for c, a, b in (
                        (g(u, v), (i, j), (j, i)), (g(u, v), (j, ip), (ip, j)),
                        (gt(u, v), (j, i), (i, j)), (gt(u, v), (ip, j), (j, ip)),
                        (g(-u, v), (i, j), (jp, i)), (g(-u, v), (j, ip), (ip, jp)),
                        (gt(-u, v), (j, i), (i, jp)), (gt(-u, v), (ip, j), (jp, ip))):
                    terms.append((half * c, a, b))
        for i in outer:
            ip = pr(i)
            for j in mids:
                jp = pr(j)
                bp, bm = self.b_fn(1, i, u, v), self.b_fn(-1, i, u, v)
                terms.append((half * bp, (i, j), (ip, jp)))
                terms.append((half * bp, (jp, ip), (j, i)))
                terms.append((half * bm, (i, j), (ip, j)))
                terms.append((half * bm, (j, ip), (j, i)))
        for i in mids:
            ip = pr(i)
            terms.append((self.c_fn(1, u, v), (i, i), (ip, ip)))
            terms.append((self.c_fn(-1, u, v), (i, i), (i, i)))
            terms.append((self.d_fn(1, u, v), (ip, i), (i, ip)))
            terms.append((self.d_fn(-1, u, v), (i, ip), (i, ip)))
        return self._two_leg(terms)

    @lru_cache(maxsize=None)
    def R(self, u=U_, v=V_, variant="q"):
        """Twisted R-matrix; variant "q", "qtilde", "qtilde-literal" or "conj"."""
        u, v = _coerce(u), _coerce(v)
        if variant == "conj":
            A, Ai = self._uu2()
            return A * self.RJ(u, v) * Ai
        if variant == "q":
            return self.I2() + self.calP(u, v) + self.calQ(u, v)
        if variant in ("qtilde", "qtilde-literal"):
            lit = variant == "qtilde-literal"
            qt = lambda a, b: self.Qtilde(a, b, lit)
            return self.I2() + self.calP(u, v) + self.symmetrize(qt, u, v)
        raise ValueError(f"unknown variant {variant!r}")

    def R21(self, u=U_, v=V_, variant="q"):
        Pm = self.perm()
        return Pm * self.R(u, v, variant) * Pm

    def R_rank_one(self, u=U_, v=V_):
        """The diagonal closed form valid at n = 1."""
        if self.n != 1:
            raise ValueError("closed diagonal form exists only for n = 1")
        same = half_f(u, v) * half_f(v, -_coerce(u))
        cross = half_f(u, -_coerce(v)) * half_f(v, u)
        return SparseMat.diagonal([same, cross, cross, same], N=2, legs=2)

    # -- rank-indexed helpers used by the rational identities
    def alpha_n(self, sign, rank=None, inverse=False):
        """(1 +- q^(rank-1)) / (2 q^(1/2)), with q -> 1/q when inverse."""
        rank = self.n if rank is None else rank
        qq = 1 / Q if inverse else Q
        half = S ** -2 if not inverse else S ** 2
        return (1 + sign * qq ** (rank - 1)) * half / 2

    def phi(self, i, j, u, v, xi=None, rank=None, dual=False):
        u = _coerce(u)
        return (self.alpha_n(1, rank, dual) * self.qf(i, j, u, v, xi)
                + self.alpha_n(-1, rank, dual) * self.qf(i, j, -u, v, xi))


def rational_R(n):
    """I + c/(u-v) P - c/(u-v+c kappa) Qr with Qr = sum e_ij (x) e_i'j'."""
    N = 2 * n
    c, u, v = var("c"), U_, V_
    kappa = n - 1
    Pm = SparseMat.permutation(N)
    Qr = rational_Q(n)
    return (SparseMat.identity(N, 2) + Pm.scale(c / (u - v))
            - Qr.scale(c / (u - v + c * kappa)))


def rational_Q(n):
    N = 2 * n
    ent = {}
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            ent[((i - 1) * N + N - i, (j - 1) * N + N - j)] = ONE
    return SparseMat(N, 2, ent)


@lru_cache(maxsize=None)
def model(n, xi_mode="specialized"):
    return Model(n, xi_mode)
