"""Exchange relations of L-operators as words in a free algebra.

A relation is the matrix element <a,c| R(u,v) L1(u) L2(v) - L2(v) L1(u) R(u,v) |b,d>
written as a linear combination of two-letter words with coefficients in
Q(s, u, v).  Words are never reordered.
"""
import hashlib
import json
import re
from dataclasses import dataclass
from fractions import Fraction

from .builders import Q, U_, V_, model
from .scalars import (ONE, ZERO, RatScalar, ResidualPole, SubstitutionPole, eval_mod_p,
                      limit_with_factor, substitute, var)
from .tensor import IndexOutOfRange
from .verifier import SpecializationPole, point_rng, prime_table, r_at_one_q, random_point

MAX_QPOW = 4
_ARG_RE = re.compile(r"^(-)?(?:q(?:\^(-?\d+))?\*)?([uv])$")


@dataclass(frozen=True, order=True)
class Arg:
    """A spectral argument sign * q^k * var with var in {u, v} and |k| <= MAX_QPOW."""

    var: str
    k: int = 0
    neg: bool = False

    def __post_init__(self):
        if self.var not in ("u", "v") or abs(self.k) > MAX_QPOW:
            raise ValueError(f"spectral argument outside the registered set: {self}")

    @classmethod
    def parse(cls, text):
        mt = _ARG_RE.match(text.replace(" ", ""))
        if not mt:
            raise ValueError(f"bad spectral argument {text!r}")
        neg, k, v = mt.groups()
        if k is None:
            k = 1 if "q" in text else 0
        return cls(v, int(k), bool(neg))

    def __str__(self):
        q = "" if self.k == 0 else ("q*" if self.k == 1 else f"q^{self.k}*")
        return ("-" if self.neg else "") + q + self.var

    def value(self):
        x = (U_ if self.var == "u" else V_) * Q ** self.k
        return -x if self.neg else x

    def sub_v(self, k):
        """Image under v -> q^k u."""
        if self.var == "u":
            return self
        return Arg("u", self.k + k, self.neg)


U_ARG, V_ARG = Arg("u"), Arg("v")


@dataclass(frozen=True, order=True)
class GenSym:
    """L^sign_{i,j}(arg)."""

    sign: str
    i: int
    j: int
    arg: Arg

    def check(self, N):
        if self.sign not in "+-" or not (1 <= self.i <= N and 1 <= self.j <= N):
            raise IndexOutOfRange(f"generator {self} outside 1..{N}")
        return self

    def __str__(self):
        return f"L{self.sign}[{self.i},{self.j}]({self.arg})"

    def to_json(self):
        return {"sign": self.sign, "i": self.i, "j": self.j, "arg": str(self.arg)}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["sign"], int(obj["i"]), int(obj["j"]), Arg.parse(obj["arg"]))


class NCExpr:
    """Finite sum of coeff * word, word a tuple of GenSym of length <= 4."""

    __slots__ = ("_terms",)

    def __init__(self, terms=None):
        acc = {}
        for word, c in (terms.items() if isinstance(terms, dict) else (terms or ())):
            word = tuple(word)
            if len(word) > 4:
                raise ValueError("words are limited to four letters")
            c = acc.get(word, ZERO) + c
            if c.is_zero():
                acc.pop(word, None)
            else:
                acc[word] = c
        self._terms = acc

    @classmethod
    def word(cls, *letters, coeff=ONE):
        return cls({tuple(letters): RatScalar(coeff)})

    def terms(self):
        return sorted(self._terms.items())

    def coeff(self, word):
        return self._terms.get(tuple(word), ZERO)

    def __len__(self):
        return len(self._terms)

    def is_zero(self):
        return not self._terms

    def __add__(self, other):
        return NCExpr(list(self._terms.items()) + list(other._terms.items()))

    def __neg__(self):
        return NCExpr({w: -c for w, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, x):
        x = RatScalar(x) if not isinstance(x, RatScalar) else x
        return NCExpr({w: c * x for w, c in self._terms.items()})

    def __mul__(self, other):
        out = []
        for w1, c1 in self._terms.items():
            for w2, c2 in other._terms.items():
                out.append((w1 + w2, c1 * c2))
        return NCExpr(out)

    def __eq__(self, other):
        return isinstance(other, NCExpr) and self._terms == other._terms

    __hash__ = None

    def map_words(self, fn):
        return NCExpr([(tuple(fn(g) for g in w), c) for w, c in self._terms.items()])

    def specialize_v(self, k=1):
        """v -> q^k u in both coefficients and arguments."""
        out = []
        for w, c in self._terms.items():
            try:
                c2 = substitute(c, {"v": U_ * Q ** k})
            except SubstitutionPole as exc:
                raise SpecializationPole(f"coefficient of {_wstr(w)} is singular at v = q^{k} u") from exc
            out.append((_shift_word(w, k), c2))
        return NCExpr(out)

    def leading_at_v(self, k=1, max_order=3):
        """Leading part lim eps^m * expr along v = q^k u + eps, m the pole order.

        Returns (expr, m); m = 0 is plain specialization.
        """
        eps = var("eps")
        moved = {w: substitute(c, {"v": U_ * Q ** k + eps}) for w, c in self._terms.items()}
        for m in range(max_order + 1):
            try:
                out = [(_shift_word(w, k), limit_with_factor(c, eps ** m, "eps", 0))
                       for w, c in moved.items()]
            except ResidualPole:
                continue
            return NCExpr(out), m
        raise SpecializationPole(f"pole of order above {max_order} at v = q^{k} u")

    def eval_mod(self, point):
        return {w: eval_mod_p(c, point) for w, c in self._terms.items()}

    def to_json(self):
        return [{"coeff": c.to_json(), "word": [g.to_json() for g in w]} for w, c in self.terms()]

    @classmethod
    def from_json(cls, items):
        return cls([(tuple(GenSym.from_json(g) for g in t["word"]), RatScalar.from_json(t["coeff"]))
                    for t in items])

    def __str__(self):
        if not self._terms:
            return "0"
        return " + ".join(f"({c})*{_wstr(w)}" for w, c in self.terms())


def _shift_word(word, k):
    return tuple(GenSym(g.sign, g.i, g.j, g.arg.sub_v(k)) for g in word)


def _wstr(word):
    return "".join(str(g) for g in word)


# ------------------------------------------------------------ extraction

def _rows(M):
    rows = {}
    for (r, c), v in M.items():
        rows.setdefault(r, []).append((c, v))
    return rows


def _cols(M):
    cols = {}
    for (r, c), v in M.items():
        cols.setdefault(c, []).append((r, v))
    return cols


def _split(idx, N):
    return idx // N + 1, idx % N + 1


def rll_component(Rm, N, mu, rho, comp, arg1=U_ARG, arg2=V_ARG, rows=None, cols=None):
    """<a,c| R L1^mu(arg1) L2^rho(arg2) - L2^rho(arg2) L1^mu(arg1) R |b,d> for a given R."""
    a, b, c, d = comp
    for x in comp:
        if not 1 <= x <= N:
            raise IndexOutOfRange(f"component index {x} outside 1..{N}")
    rows = _rows(Rm) if rows is None else rows
    cols = _cols(Rm) if cols is None else cols
    terms = []
    for col, val in rows.get((a - 1) * N + c - 1, ()):
        x, y = _split(col, N)
        terms.append(((GenSym(mu, x, b, arg1), GenSym(rho, y, d, arg2)), val))
    for row, val in cols.get((b - 1) * N + d - 1, ()):
        x, y = _split(row, N)
        terms.append(((GenSym(rho, c, y, arg2), GenSym(mu, a, x, arg1)), -val))
    return NCExpr(terms)


class _Cache:
    R = {}


def _r_data(n):
    if n not in _Cache.R:
        Rm = model(n).R()
        _Cache.R[n] = (Rm, _rows(Rm), _cols(Rm))
    return _Cache.R[n]


def extract_rll(n, mu, rho, comp):
    """One exchange relation with R(u, v) in specialized mode."""
    if mu not in "+-" or rho not in "+-" or len(mu) != 1 or len(rho) != 1:
        raise ValueError("signs must be '+' or '-'")
    Rm, rows, cols = _r_data(n)
    return rll_component(Rm, 2 * n, mu, rho, tuple(comp), rows=rows, cols=cols)


def components(n):
    N = 2 * n
    rng = range(1, N + 1)
    return [(a, b, c, d) for a in rng for b in rng for c in rng for d in rng]


def all_relations(n, mu="+", rho="+"):
    return [(comp, extract_rll(n, mu, rho, comp)) for comp in components(n)]


def brute_force_mod(n, mu, rho, comp, point):
    """The same relation expanded densely with R evaluated mod p first."""
    N = 2 * n
    a, b, c, d = comp
    Rp = model(n).R().eval_mod(point)
    p = point.p
    acc = {}
    for x in range(1, N + 1):
        for y in range(1, N + 1):
            r1 = Rp[(a - 1) * N + c - 1, (x - 1) * N + y - 1]
            if r1:
                w = (GenSym(mu, x, b, U_ARG), GenSym(rho, y, d, V_ARG))
                acc[w] = (acc.get(w, 0) + r1) % p
            r2 = Rp[(x - 1) * N + y - 1, (b - 1) * N + d - 1]
            if r2:
                w = (GenSym(rho, c, y, V_ARG), GenSym(mu, a, x, U_ARG))
                acc[w] = (acc.get(w, 0) - r2) % p
    return {w: v for w, v in acc.items() if v}


def oracle_agreement(n, points=10, seed=0, mu="+", rho="+"):
    """First disagreement between the exact extraction and the modular expansion."""
    p = prime_table()[0]
    rels = all_relations(n, mu, rho)
    for k in range(points):
        pt = random_point(point_rng(seed, "rll-oracle", n, k), p)
        for comp, expr in rels:
            got = {w: v for w, v in expr.eval_mod(pt).items() if v}
            want = brute_force_mod(n, mu, rho, comp, pt)
            if got != want:
                return {"component": list(comp), "point": k}
    return None


def twist_invariance(n, power=1):
    """Conjugating R by D (x) D leaves every component's coefficients unchanged."""
    m = model(n)
    N = 2 * n
    D = m.D(power)
    DD, DDi = D.kron(D), m.D(-power).kron(m.D(-power))
    Rt = DD * m.R() * DDi
    rows, cols = _rows(Rt), _cols(Rt)
    for comp in components(n):
        if rll_component(Rt, N, "+", "+", comp, rows=rows, cols=cols) != extract_rll(n, "+", "+", comp):
            return list(comp)
    return None


# ------------------------------------------------------------ fused operator

def _L(i, j, arg, sign="+"):
    return GenSym(sign, i, j, arg)


QU = Arg("u", 1)


def fused_component(n, i, j):
    """<i,1| R12(1,q) L1(u) L2(qu) |j,1> and <i,1| L2(qu) L1(u) R12(1,q) |j,1>."""
    N = 2 * n
    if not (1 < i < N and 1 < j < N):
        raise IndexOutOfRange("fused components need 1 < i, j < 2n")
    part = r_at_one_q(model(n))
    R1q = part.mat
    row, col = (i - 1) * N, (j - 1) * N
    left, right = [], []
    for x in range(1, N + 1):
        for y in range(1, N + 1):
            idx = (x - 1) * N + y - 1
            if (row, idx) in part.singular or (idx, col) in part.singular:
                raise SpecializationPole(f"R(1,q) is infinite at the entry used by ({i},{j})")
            v1 = R1q[row, idx]
            if not v1.is_zero():
                left.append(((_L(x, j, U_ARG), _L(y, 1, QU)), v1))
            v2 = R1q[idx, col]
            if not v2.is_zero():
                right.append(((_L(1, y, QU), _L(i, x, U_ARG)), v2))
    return NCExpr(left), NCExpr(right)


def e2_closed_form(n, i, j, ordering):
    """The closed form of the fused component; ordering 'RLL' or 'LLR'."""
    q = Q
    N = 2 * n
    ip, jp = N + 1 - i, N + 1 - j
    mid = (n, n + 1)
    half = Fraction(1, 2)
    if ordering == "RLL":
        base = NCExpr.word(_L(i, j, U_ARG), _L(1, 1, QU))
        if i not in mid:
            return base - NCExpr.word(_L(1, j, U_ARG), _L(i, 1, QU), coeff=q)
        return (base - NCExpr.word(_L(1, j, U_ARG), _L(i, 1, QU), coeff=(q + 1) * half)
                - NCExpr.word(_L(1, j, U_ARG), _L(ip, 1, QU), coeff=(q - 1) * half))
    base = NCExpr.word(_L(1, 1, QU), _L(i, j, U_ARG))
    if j not in mid:
        return base - NCExpr.word(_L(1, j, QU), _L(i, 1, U_ARG), coeff=1 / q)
    return (base - NCExpr.word(_L(1, j, QU), _L(i, 1, U_ARG), coeff=(1 / q + 1) * half)
            - NCExpr.word(_L(1, jp, QU), _L(i, 1, U_ARG), coeff=(1 / q - 1) * half))


def e2_results(n):
    """(label, witness or None) for every 1 < i, j < 2n."""
    N = 2 * n
    out = []
    for i in range(2, N):
        for j in range(2, N):
            left, right = fused_component(n, i, j)
            want = e2_closed_form(n, i, j, "RLL")
            out.append((f"fused ({i},{j}) R L L form", None if left == want else _diff(left, want)))
            want = e2_closed_form(n, i, j, "LLR")
            out.append((f"fused ({i},{j}) L L R form", None if right == want else _diff(right, want)))
            comp = extract_rll(n, "+", "+", (i, j, 1, 1)).specialize_v(1)
            out.append((f"fused ({i},{j}) orderings differ by the exchange relation",
                        None if left - right == comp else _diff(left - right, comp)))
    return out


def _diff(a, b):
    d = a - b
    w, c = d.terms()[0]
    return {"word": _wstr(w), "difference": c.to_string()}


def e3_expected(n, i):
    """<i,1| relation at v = qu in normalized form, up to a scalar."""
    N = 2 * n
    ip = N + 1 - i
    half = Fraction(1, 2)
    lhs = NCExpr.word(_L(i, 1, U_ARG), _L(1, 1, QU))
    if i not in (n, n + 1):
        return lhs - NCExpr.word(_L(1, 1, U_ARG), _L(i, 1, QU), coeff=Q)
    return (lhs - NCExpr.word(_L(1, 1, U_ARG), _L(i, 1, QU), coeff=(Q + 1) * half)
            - NCExpr.word(_L(1, 1, U_ARG), _L(ip, 1, QU), coeff=(Q - 1) * half))


def e3_expected_row(n, j):
    """<1,1| ... |j,1> at v = qu: the mirrored relation for the first row."""
    N = 2 * n
    jp = N + 1 - j
    half = Fraction(1, 2)
    lhs = NCExpr.word(_L(1, 1, QU), _L(1, j, U_ARG))
    if j not in (n, n + 1):
        return lhs - NCExpr.word(_L(1, j, QU), _L(1, 1, U_ARG), coeff=1 / Q)
    return (lhs - NCExpr.word(_L(1, j, QU), _L(1, 1, U_ARG), coeff=(1 / Q + 1) * half)
            - NCExpr.word(_L(1, jp, QU), _L(1, 1, U_ARG), coeff=(1 / Q - 1) * half))


def proportional(expr, want):
    """True if expr = c * want for a nonzero scalar c."""
    if len(expr) != len(want) or want.is_zero():
        return False
    w0, c0 = want.terms()[0]
    c = expr.coeff(w0)
    if c.is_zero():
        return False
    return expr == want.scale(c / c0)


def e3_results(n):
    N = 2 * n
    out = []
    for i in range(2, N + 1):
        got, _ = extract_rll(n, "+", "+", (i, 1, 1, 1)).leading_at_v(1)
        want = e3_expected(n, i)
        out.append((f"column relation i={i}", None if proportional(got, want) else
                    {"got": str(got)[:400]}))
    for j in range(2, N + 1):
        got, _ = extract_rll(n, "+", "+", (1, j, 1, 1)).leading_at_v(1)
        want = e3_expected_row(n, j)
        out.append((f"row relation j={j}", None if proportional(got, want) else
                    {"got": str(got)[:400]}))
    return out


def specialized_span_contains(n, target, seed=0, k=1):
    """Whether target lies in the span of all relations at v = q^k u, mod p.

    Singular components contribute their leading part.  The rank test runs at
    one random point: False is conclusive unless the point hits a pole of the
    combining coefficients, True can be wrong only if the rank drops there.
    """
    import flint
    pt = random_point(point_rng(seed, "span", n), prime_table()[0])
    rows = []
    for _, expr in all_relations(n):
        try:
            spec = expr.specialize_v(k)
        except SpecializationPole:
            spec = expr.leading_at_v(k)[0]
        if not spec.is_zero():
            rows.append(spec.eval_mod(pt))
    want = target.eval_mod(pt)
    words = sorted({w for r in rows for w in r} | set(want), key=_wstr)
    index = {w: c for c, w in enumerate(words)}

    def vec(r):
        v = [0] * len(words)
        for w, x in r.items():
            v[index[w]] = int(x) % pt.p
        return v

    M = flint.nmod_mat([vec(r) for r in rows], pt.p)
    return flint.nmod_mat([vec(r) for r in rows] + [vec(want)], pt.p).rank() == M.rank()


def verify_e2(n):
    from .gauss import make_report
    return make_report("fused_components", {"n": n}, e2_results(n))


def verify_e3(n):
    from .gauss import make_report
    return make_report("first_row_column_relations", {"n": n}, e3_results(n))


def verify_oracle(n, points=10, seed=0):
    from .gauss import make_report
    w = oracle_agreement(n, points, seed)
    return make_report("relation_oracle", {"n": n, "points": points, "seed": seed},
                       [("exact coefficients = modular expansion", w)])


def verify_twist(n):
    from .gauss import make_report
    w = twist_invariance(n)
    return make_report("relation_twist", {"n": n},
                       [("D x D conjugation", None if w is None else {"component": w})])


# ------------------------------------------------------------ export

def relation_records(n, mu="+", rho="+"):
    return [{"component": list(comp), "mu": mu, "rho": rho, "terms": expr.to_json()}
            for comp, expr in all_relations(n, mu, rho)]


def dumps_relations(n, mu="+", rho="+"):
    return json.dumps(relation_records(n, mu, rho), sort_keys=True, indent=1)


def export_relations(n, path, fmt="json", mu="+", rho="+"):
    if fmt == "json":
        text = dumps_relations(n, mu, rho)
    elif fmt == "text":
        text = "".join(f"{comp}: {expr}\n" for comp, expr in all_relations(n, mu, rho))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)
    return hashlib.sha256(text.encode()).hexdigest()


def load_relations(path):
    with open(path) as fh:
        records = json.load(fh)
    return [(tuple(r["component"]), r["mu"], r["rho"], NCExpr.from_json(r["terms"]))
            for r in records]
