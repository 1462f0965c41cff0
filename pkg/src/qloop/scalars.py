"""Exact rational functions over Q in a fixed registry of variables.

Values are stored as ``x^shift * num / den`` where ``num`` and ``den`` are
flint polynomials with no monomial factor, ``gcd(num, den) = 1`` and ``den``
monic under the graded-lex order.  The Laurent numerator seen from outside is
``x^shift * num``.
"""
from __future__ import annotations

import re
from fractions import Fraction
from math import factorial

import flint

# s = q^(1/4), y = xi^(1/2) in generic mode, c is the scaling-limit parameter,
# beta is a free scale used by the scaling-invariance check
VARS = ("s", "y", "u", "v", "w", "eps", "c", "beta")
NV = len(VARS)
INDEX = {name: k for k, name in enumerate(VARS)}
CTX = flint.fmpq_mpoly_ctx.get(VARS, "deglex")
_GENS = CTX.gens()
_ZERO_VEC = (0,) * NV
GRAMMAR_VERSION = "1"


class ScalarError(ArithmeticError):
    pass


class DivisionByZero(ScalarError, ZeroDivisionError):
    pass


class SubstitutionPole(ScalarError):
    pass


class PoleAtPoint(ScalarError):
    pass


class ResidualPole(ScalarError):
    pass


class TruncationUnstable(ScalarError):
    pass


class NegativeOrderLimit(ScalarError):
    pass


_mono_cache: dict = {}


def _mono(exps):
    m = _mono_cache.get(exps)
    if m is None:
        m = CTX.term(exp_vec=exps, coeff=1)
        _mono_cache[exps] = m
    return m


def _vadd(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _vsub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _split_monomial(p):
    """Return (p / x^e, e) where x^e is the monomial content of p."""
    e = p.term_content().monoms()[0]
    if any(e):
        return p / _mono(e), tuple(e)
    return p, _ZERO_VEC


def _canon(num, den, shift):
    if den.is_zero():
        raise DivisionByZero("zero denominator")
    if num.is_zero():
        return ZERO
    if not den.is_constant() and not num.is_constant():
        g = num.gcd(den)
        if not g.is_constant():
            num = num / g
            den = den / g
    num, e1 = _split_monomial(num)
    den, e2 = _split_monomial(den)
    shift = _vadd(shift, _vsub(e1, e2))
    lc = den.leading_coefficient()
    if lc != 1:
        num = num / lc
        den = den / lc
    return RatScalar._raw(num, den, shift)


def _poly_parts(r):
    """Numerator and denominator of r as honest polynomials."""
    pos = tuple(max(e, 0) for e in r._shift)
    neg = tuple(max(-e, 0) for e in r._shift)
    num = r._num * _mono(pos) if any(pos) else r._num
    den = r._den * _mono(neg) if any(neg) else r._den
    return num, den


class RatScalar:
    __slots__ = ("_num", "_den", "_shift", "_hash", "_arrays")

    def __init__(self, value=0):
        if isinstance(value, str):
            src = parse(value)
        elif isinstance(value, RatScalar):
            src = value
        else:
            frac = Fraction(value)
            src = RatScalar._raw(CTX.constant(flint.fmpq(frac.numerator, frac.denominator)),
                                 CTX.constant(1), _ZERO_VEC)
        self._num, self._den, self._shift = src._num, src._den, src._shift
        self._hash = None
        self._arrays = None

    @classmethod
    def _raw(cls, num, den, shift):
        obj = object.__new__(cls)
        obj._num = num
        obj._den = den
        obj._shift = shift
        obj._hash = None
        obj._arrays = None
        return obj

    @classmethod
    def from_polys(cls, num, den=None):
        """Build from flint polynomials (den defaults to 1), canonicalizing."""
        if den is None:
            den = CTX.constant(1)
        return _canon(num, den, _ZERO_VEC)

    @classmethod
    def monomial(cls, exps, coeff=1):
        exps = tuple(exps)
        if coeff == 0:
            return ZERO
        frac = Fraction(coeff)
        return cls._raw(CTX.constant(flint.fmpq(frac.numerator, frac.denominator)),
                        CTX.constant(1), exps)

    # structure

    @property
    def shift(self):
        return self._shift

    @property
    def num_poly(self):
        return self._num

    @property
    def den_poly(self):
        return self._den

    def num_terms(self):
        """Laurent numerator as {exponent vector: Fraction}."""
        return {_vadd(e, self._shift): Fraction(int(c.p), int(c.q))
                for e, c in self._num.terms()}

    def den_terms(self):
        return {tuple(e): Fraction(int(c.p), int(c.q)) for e, c in self._den.terms()}

    def is_zero(self):
        return self._num.is_zero()

    def is_one(self):
        return self._num.is_one() and self._den.is_one() and not any(self._shift)

    def is_constant(self):
        return self._num.is_constant() and self._den.is_constant() and not any(self._shift)

    def is_polynomial(self):
        return self._den.is_constant()

    def variables(self):
        degs_n = self._num.degrees()
        degs_d = self._den.degrees()
        return tuple(VARS[k] for k in range(NV)
                     if degs_n[k] > 0 or degs_d[k] > 0 or self._shift[k] != 0)

    def total_degree(self):
        num, den = _poly_parts(self)
        return max(num.total_degree(), 0) + max(den.total_degree(), 0)

    def constant_value(self):
        if not self.is_constant():
            raise ValueError("not a constant")
        c = self._num.leading_coefficient() if not self.is_zero() else flint.fmpq(0)
        return Fraction(int(c.p), int(c.q))

    # arithmetic

    def __add__(self, other):
        b = _coerce(other)
        if b is NotImplemented:
            return b
        a = self
        if a.is_zero():
            return b
        if b.is_zero():
            return a
        m = tuple(min(x, y) for x, y in zip(a._shift, b._shift))
        da, db = _vsub(a._shift, m), _vsub(b._shift, m)
        na = a._num * _mono(da) if any(da) else a._num
        nb = b._num * _mono(db) if any(db) else b._num
        if a._den == b._den:
            return _canon(na + nb, a._den, m)
        if a._den.is_constant() or b._den.is_constant():
            return _canon(na * b._den + nb * a._den, a._den * b._den, m)
        g = a._den.gcd(b._den)
        if g.is_constant():
            return _canon(na * b._den + nb * a._den, a._den * b._den, m)
        ca = b._den / g
        cb = a._den / g
        return _canon(na * ca + nb * cb, a._den * ca, m)

    __radd__ = __add__

    def __neg__(self):
        return RatScalar._raw(-self._num, self._den, self._shift)

    def __sub__(self, other):
        b = _coerce(other)
        if b is NotImplemented:
            return b
        return self + (-b)

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        b = _coerce(other)
        if b is NotImplemented:
            return b
        a = self
        if a.is_zero() or b.is_zero():
            return ZERO
        shift = _vadd(a._shift, b._shift)
        an, ad, bn, bd = a._num, a._den, b._num, b._den
        if not bd.is_constant() and not an.is_constant():
            g = an.gcd(bd)
            if not g.is_constant():
                an, bd = an / g, bd / g
        if not ad.is_constant() and not bn.is_constant():
            g = bn.gcd(ad)
            if not g.is_constant():
                bn, ad = bn / g, ad / g
        num = an * bn
        den = ad * bd
        lc = den.leading_coefficient()
        if lc != 1:
            num, den = num / lc, den / lc
        return RatScalar._raw(num, den, shift)

    __rmul__ = __mul__

    def inv(self):
        if self.is_zero():
            raise DivisionByZero("inverse of zero")
        num, den = self._den, self._num
        lc = den.leading_coefficient()
        if lc != 1:
            num, den = num / lc, den / lc
        return RatScalar._raw(num, den, tuple(-e for e in self._shift))

    def __truediv__(self, other):
        b = _coerce(other)
        if b is NotImplemented:
            return b
        return self * b.inv()

    def __rtruediv__(self, other):
        return _coerce(other) * self.inv()

    def __pow__(self, k):
        k = int(k)
        if k < 0:
            return self.inv() ** (-k)
        if k == 0:
            return ONE
        return RatScalar._raw(self._num ** k, self._den ** k,
                              tuple(e * k for e in self._shift))

    def __eq__(self, other):
        b = _coerce(other)
        if b is NotImplemented:
            return False
        return (self._shift == b._shift and self._num == b._num
                and self._den == b._den)

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._shift, str(self._num), str(self._den)))
        return self._hash

    def __repr__(self):
        return f"RatScalar({self.to_string()!r})"

    def __str__(self):
        return self.to_string()

    # conversions

    def to_string(self):
        n = format_laurent(self.num_terms())
        if self._den.is_one():
            return n
        return f"({n})/({format_laurent(self.den_terms())})"

    def to_json(self):
        return {"num": format_laurent(self.num_terms()),
                "den": format_laurent(self.den_terms())}

    @classmethod
    def from_json(cls, obj):
        return parse(obj["num"]) / parse(obj["den"])

    def subs(self, bindings):
        return substitute(self, bindings)

    def term_arrays(self):
        """Cached (num_terms, den_terms) as lists of (exps, numer, denom)."""
        if self._arrays is None:
            nt = [(_vadd(tuple(e), self._shift), int(c.p), int(c.q))
                  for e, c in self._num.terms()]
            dt = [(tuple(e), int(c.p), int(c.q)) for e, c in self._den.terms()]
            self._arrays = (nt, dt)
        return self._arrays


def _coerce(x):
    if isinstance(x, RatScalar):
        return x
    if isinstance(x, (int, Fraction)):
        return RatScalar(x)
    return NotImplemented


ZERO = RatScalar._raw(CTX.constant(0), CTX.constant(1), _ZERO_VEC)
ONE = RatScalar._raw(CTX.constant(1), CTX.constant(1), _ZERO_VEC)


def var(name):
    k = INDEX[name]
    e = [0] * NV
    e[k] = 1
    return RatScalar.monomial(e)


def const(value):
    return RatScalar(value)


def rat(value):
    """Coerce ints, Fractions, strings and RatScalars."""
    return RatScalar(value)


# ---------------------------------------------------------------- strings

def _format_coeff(c: Fraction):
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def _deglex_key(e):
    return (sum(e), e)


def format_laurent(terms):
    """Canonical string for {exponent vector: Fraction} in graded-lex order."""
    if not terms:
        return "0"
    parts = []
    for e in sorted(terms, key=_deglex_key, reverse=True):
        c = terms[e]
        factors = []
        for k, x in enumerate(e):
            if x == 1:
                factors.append(VARS[k])
            elif x != 0:
                factors.append(f"{VARS[k]}^{x}")
        sign = "-" if c < 0 else "+"
        a = abs(c)
        if factors:
            body = "*".join(factors) if a == 1 else _format_coeff(a) + "*" + "*".join(factors)
        else:
            body = _format_coeff(a)
        parts.append((sign, body))
    out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


_TERM_RE = re.compile(r"\s*([+-])?\s*([^+\-\s][^+]*?)\s*(?=(?<![\^])[+-]|$)")
_FACTOR_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)(?:\^(-?\d+))?$")
_COEFF_RE = re.compile(r"^\d+(?:/\d+)?$")


class GrammarError(ValueError):
    pass


def _tokenize_terms(text):
    """Split a polynomial string into signed term bodies, respecting ^-k."""
    terms = []
    i, n = 0, len(text)
    sign = 1
    cur = ""
    while i < n:
        ch = text[i]
        if ch in "+-" and not (cur.rstrip().endswith("^")):
            if cur.strip():
                terms.append((sign, cur.strip()))
                cur = ""
                sign = 1 if ch == "+" else -1
            else:
                sign = sign * (1 if ch == "+" else -1)
        else:
            cur += ch
        i += 1
    if cur.strip():
        terms.append((sign, cur.strip()))
    return terms


def parse_laurent(text):
    """Parse the canonical grammar into {exponent vector: Fraction}."""
    text = text.strip()
    if not text:
        raise GrammarError("empty polynomial string")
    out: dict = {}
    for sign, body in _tokenize_terms(text):
        coeff = Fraction(sign)
        e = [0] * NV
        for factor in body.split("*"):
            factor = factor.strip()
            if _COEFF_RE.match(factor):
                coeff *= Fraction(factor)
                continue
            m = _FACTOR_RE.match(factor)
            if not m:
                raise GrammarError(f"bad factor {factor!r}")
            name = m.group(1)
            if name not in INDEX:
                raise GrammarError(f"unknown variable {name!r}")
            e[INDEX[name]] += int(m.group(2) or 1)
        key = tuple(e)
        out[key] = out.get(key, Fraction(0)) + coeff
        if out[key] == 0:
            del out[key]
    return out


def from_laurent(terms):
    if not terms:
        return ZERO
    shift = tuple(min(e[k] for e in terms) for k in range(NV))
    d = {_vsub(e, shift): flint.fmpq(c.numerator, c.denominator) for e, c in terms.items()}
    return _canon(CTX.from_dict(d), CTX.constant(1), shift)


def parse(text):
    """Parse either a bare Laurent polynomial or '(num)/(den)'."""
    text = text.strip()
    m = re.match(r"^\((.*)\)\s*/\s*\((.*)\)$", text)
    if m:
        return from_laurent(parse_laurent(m.group(1))) / from_laurent(parse_laurent(m.group(2)))
    return from_laurent(parse_laurent(text))


# ---------------------------------------------------------- substitution

def _as_pair(value):
    r = _coerce(value)
    if r is NotImplemented:
        raise TypeError(f"cannot bind {value!r}")
    return _poly_parts(r)


def _subs_poly(p, pairs):
    """p(x_i -> a_i/b_i) returned as (numer, denom) polynomials."""
    if all(b.is_one() for _, b in pairs.values()):
        args = [pairs[k][0] if k in pairs else _GENS[k] for k in range(NV)]
        return p.compose(*args), CTX.constant(1)
    degs = p.degrees()
    pa: dict = {}
    pb: dict = {}

    def power(cache, k, base, e):
        key = (k, e)
        if key not in cache:
            cache[key] = base ** e
        return cache[key]

    numer = CTX.constant(0)
    for exps, coeff in p.terms():
        term = CTX.constant(coeff)
        rest = [0] * NV
        for k, e in enumerate(exps):
            if k in pairs:
                a, b = pairs[k]
                if e:
                    term = term * power(pa, k, a, e)
                if degs[k] - e:
                    term = term * power(pb, k, b, degs[k] - e)
            else:
                rest[k] = e
        if any(rest):
            term = term * _mono(tuple(rest))
        numer = numer + term
    denom = CTX.constant(1)
    for k, (a, b) in pairs.items():
        if degs[k]:
            denom = denom * power(pb, k, b, degs[k])
    return numer, denom


def substitute(r, bindings):
    """Simultaneous substitution {variable name: value}; raises SubstitutionPole."""
    r = _coerce(r)
    if r.is_zero() or not bindings:
        return r
    pairs = {}
    for name, value in bindings.items():
        if name not in INDEX:
            raise KeyError(f"unknown variable {name!r}")
        pairs[INDEX[name]] = _as_pair(value)
    num, den = _poly_parts(r)
    n1, n2 = _subs_poly(num, pairs)
    d1, d2 = _subs_poly(den, pairs)
    if d1.is_zero():
        raise SubstitutionPole(f"denominator vanishes under {sorted(bindings)}")
    return _canon(n1 * d2, n2 * d1, _ZERO_VEC)


# ------------------------------------------------------------ evaluation

def eval_exact(r, point):
    """Evaluate at {name: rational}; raises PoleAtPoint."""
    r = _coerce(r)
    if r.is_zero():
        return Fraction(0)
    used = r.variables()
    missing = [x for x in used if x not in point]
    if missing:
        raise KeyError(f"no value for {missing}")
    vals = [flint.fmpq(Fraction(point.get(name, 0)).numerator,
                       Fraction(point.get(name, 0)).denominator) for name in VARS]
    dv = r._den(*vals)
    if dv == 0:
        raise PoleAtPoint(f"denominator vanishes at {point}")
    scale = flint.fmpq(1)
    for k, e in enumerate(r._shift):
        if e:
            if vals[k] == 0:
                if e < 0:
                    raise PoleAtPoint(f"{VARS[k]} = 0 with negative exponent")
                return Fraction(0)
            scale *= vals[k] ** e
    out = r._num(*vals) * scale / dv
    return Fraction(int(out.p), int(out.q))


class PrimePoint:
    """A prime p > 2^60 with one residue per registered variable."""

    __slots__ = ("p", "residues")

    def __init__(self, p, residues):
        p = int(p)
        if p <= 2 ** 60:
            raise ValueError("prime must exceed 2^60")
        if isinstance(residues, dict):
            residues = [residues.get(name, 0) for name in VARS]
        residues = tuple(int(x) % p for x in residues)
        if len(residues) != NV:
            raise ValueError("one residue per variable required")
        self.p = p
        self.residues = residues

    def with_values(self, **kw):
        res = list(self.residues)
        for name, value in kw.items():
            res[INDEX[name]] = int(value) % self.p
        return PrimePoint(self.p, res)

    def __repr__(self):
        return f"PrimePoint({self.p}, {dict(zip(VARS, self.residues))})"


def _eval_terms_mod(terms, p, res):
    acc = 0
    for exps, a, b in terms:
        t = a * pow(b, -1, p) % p
        for k, e in enumerate(exps):
            if e:
                x = res[k]
                if x == 0:
                    if e < 0:
                        raise PoleAtPoint(f"{VARS[k]} = 0 mod p with negative exponent")
                    t = 0
                    break
                t = t * pow(x, e, p) % p
        acc += t
    return acc % p


def eval_mod_p(r, point: PrimePoint):
    r = _coerce(r)
    nt, dt = r.term_arrays()
    den = _eval_terms_mod(dt, point.p, point.residues)
    if den == 0:
        raise PoleAtPoint("denominator vanishes mod p")
    return _eval_terms_mod(nt, point.p, point.residues) * pow(den, -1, point.p) % point.p


# ------------------------------------------------------- limits and series

def limit_with_factor(r, factor, variable, value):
    """lim_{variable -> value} factor * r, exact."""
    t = _coerce(r) * _coerce(factor)
    try:
        return substitute(t, {variable: value})
    except SubstitutionPole as exc:
        raise ResidualPole(f"pole at {variable} = {value} not cancelled") from exc


_SCALED = {"s": ("c", Fraction(1, 4)), "u": ("u", Fraction(1)),
           "v": ("v", Fraction(1)), "w": ("w", Fraction(1))}


def _exp_trunc(x, order):
    eps = _GENS[INDEX["eps"]]
    out = CTX.constant(1)
    term = CTX.constant(1)
    for k in range(1, order + 1):
        term = term * x * eps
        out = out + term / factorial(k)
    return out


def _check_scalable(r):
    for name in r.variables():
        if name in ("eps", "c"):
            raise ValueError(f"{name} already present; cannot rescale")


def scaling_substitute(r, order):
    """Substitute u,v,w -> exp(eps*x) and q -> exp(eps*c) truncated at `order`."""
    if order < 2:
        raise ValueError("order must be >= 2")
    r = _coerce(r)
    _check_scalable(r)
    if r.is_zero():
        return r
    num, den = _poly_parts(r)
    args = list(_GENS)
    for name, (target, scale) in _SCALED.items():
        args[INDEX[name]] = _exp_trunc(_GENS[INDEX[target]] * flint.fmpq(scale.numerator, scale.denominator), order)
    return _canon(num.compose(*args), den.compose(*args), _ZERO_VEC)


def _eps_coefficients(p):
    """Group a polynomial by powers of eps -> {k: poly}."""
    k_eps = INDEX["eps"]
    groups: dict = {}
    for exps, coeff in p.terms():
        k = exps[k_eps]
        rest = list(exps)
        rest[k_eps] = 0
        groups.setdefault(k, {})[tuple(rest)] = coeff
    return {k: CTX.from_dict(d) for k, d in groups.items()}


def eps_limit(r):
    """eps -> 0 as the ratio of the lowest eps-order coefficients."""
    r = _coerce(r)
    if r.is_zero():
        return r
    num, den = _poly_parts(r)
    cn, cd = _eps_coefficients(num), _eps_coefficients(den)
    kn, kd = min(cn), min(cd)
    if kn < kd:
        raise NegativeOrderLimit(f"numerator order {kn} below denominator order {kd}")
    if kn > kd:
        return ZERO
    return _canon(cn[kn], cd[kd], _ZERO_VEC)


def _jets(p, order):
    """eps-coefficients 0..order of p after u -> exp(eps u), q -> exp(eps c)."""
    lin = {}
    for name, (target, scale) in _SCALED.items():
        lin[INDEX[name]] = _GENS[INDEX[target]] * flint.fmpq(scale.numerator, scale.denominator)
    jets = [CTX.constant(0) for _ in range(order + 1)]
    for exps, coeff in p.terms():
        form = CTX.constant(0)
        rest = [0] * NV
        for k, e in enumerate(exps):
            if k in lin:
                if e:
                    form = form + lin[k] * e
            else:
                rest[k] = e
        base = CTX.constant(coeff)
        if any(rest):
            base = base * _mono(tuple(rest))
        power = CTX.constant(1)
        for j in range(order + 1):
            jets[j] = jets[j] + base * power / factorial(j)
            power = power * form
    return jets


def _jet_limit(num, den, order):
    jn, jd = _jets(num, order), _jets(den, order)
    kn = next((k for k, x in enumerate(jn) if not x.is_zero()), None)
    kd = next((k for k, x in enumerate(jd) if not x.is_zero()), None)
    if kd is None:
        raise TruncationUnstable(f"denominator vanishes through order {order}")
    if kn is None:
        return ZERO
    if kn < kd:
        raise NegativeOrderLimit(f"numerator order {kn} below denominator order {kd}")
    if kn > kd:
        return ZERO
    return _canon(jn[kn], jd[kd], _ZERO_VEC)


def scaling_limit(r, order=2):
    """eps -> 0 limit of the scaling substitution, re-checked at order + 1."""
    if order < 2:
        raise ValueError("order must be >= 2")
    r = _coerce(r)
    _check_scalable(r)
    if r.is_zero():
        return r
    num, den = _poly_parts(r)
    first = _jet_limit(num, den, order)
    second = _jet_limit(num, den, order + 1)
    if first != second:
        raise TruncationUnstable(f"orders {order} and {order + 1} disagree")
    return first
