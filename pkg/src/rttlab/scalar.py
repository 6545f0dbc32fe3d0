"""Exact coefficients: rational functions in q, the extension by w (w^2 = -q),
and truncated series in a formal spectral variable u."""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Mapping

from flint import fmpz_poly

_P0 = fmpz_poly([])
_P1 = fmpz_poly([1])


def _valuation(p: fmpz_poly) -> int:
    k = 0
    while p[k] == 0:
        k += 1
    return k


def _key(p: fmpz_poly) -> tuple:
    return tuple(int(c) for c in p.coeffs())


class RatQ:
    """Value q^v * n(q)/d(q) + w * (plain RatQ).

    n and d are integer polynomials, neither divisible by q, coprime, with d
    having a positive leading coefficient.  Zero is n = 0, v = 0, d = 1.
    """

    __slots__ = ("n", "d", "v", "w", "_h")

    def __init__(self, value=0):
        if isinstance(value, RatQ):
            self.n, self.d, self.v, self.w, self._h = value.n, value.d, value.v, value.w, value._h
            return
        if isinstance(value, Fraction):
            r = _make(fmpz_poly([value.numerator]), fmpz_poly([value.denominator]), 0)
        elif isinstance(value, int):
            r = _make(fmpz_poly([value]), _P1, 0) if value else ZERO
        else:
            raise TypeError(f"cannot build RatQ from {type(value).__name__}")
        self.n, self.d, self.v, self.w, self._h = r.n, r.d, r.v, None, None

    # construction helpers -------------------------------------------------

    @staticmethod
    def qpow(k: int, c: int = 1) -> "RatQ":
        if c == 0:
            return ZERO
        return _raw(fmpz_poly([c]), _P1, k, None)

    @staticmethod
    def laurent(coeffs: Mapping[int, int]) -> "RatQ":
        """Laurent polynomial sum c_e q^e."""
        items = [(e, c) for e, c in coeffs.items() if c]
        if not items:
            return ZERO
        lo = min(e for e, _ in items)
        arr = [0] * (max(e for e, _ in items) - lo + 1)
        for e, c in items:
            arr[e - lo] += c
        return _make(fmpz_poly(arr), _P1, lo)

    @staticmethod
    def ratio(num: Mapping[int, int], den: Mapping[int, int]) -> "RatQ":
        return RatQ.laurent(num) / RatQ.laurent(den)

    # predicates -----------------------------------------------------------

    def is_zero(self) -> bool:
        return self.n.is_zero() and self.w is None

    def __bool__(self) -> bool:
        return not self.is_zero()

    def is_plain(self) -> bool:
        return self.w is None

    def is_one(self) -> bool:
        return self.w is None and self.v == 0 and self.d.is_one() and self.n.is_one()

    def plain(self) -> "RatQ":
        """The w-free part; raises if a w-component is present."""
        if self.w is not None:
            raise ValueError(f"value {self} has a nonzero w-component")
        return self

    def parts(self) -> tuple["RatQ", "RatQ"]:
        a = _raw(self.n, self.d, self.v, None) if not self.n.is_zero() else ZERO
        return a, (self.w if self.w is not None else ZERO)

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if self.n.is_zero() and self.w is None:
            return other
        if other.n.is_zero() and other.w is None:
            return self
        a = _add_plain(self, other)
        if self.w is None and other.w is None:
            return a
        return _with_w(a, _sum_w(self.w, other.w))

    __radd__ = __add__

    def __neg__(self):
        if self.is_zero():
            return self
        return _raw(-self.n, self.d, self.v, -self.w if self.w is not None else None)

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if self.w is None and other.w is None:
            return _mul_plain(self, other)
        a1, b1 = self.parts()
        a2, b2 = other.parts()
        a = _mul_plain(a1, a2) - Q * _mul_plain(b1, b2)
        b = _mul_plain(a1, b2) + _mul_plain(a2, b1)
        return _with_w(a.plain(), b)

    __rmul__ = __mul__

    def inverse(self) -> "RatQ":
        if self.is_zero():
            raise ZeroDivisionError("RatQ division by zero")
        if self.w is None:
            n, d = self.n, self.d
            if n.leading_coefficient() < 0:
                n, d = -n, -d
            return _raw(d, n, -self.v, None)
        # (a + wb)^-1 = (a - wb) / (a^2 + q b^2)
        a, b = self.parts()
        norm = a * a + Q * b * b
        ninv = norm.inverse()
        return _with_w(a * ninv, -(b * ninv))

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return other * self.inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        if self.w is None and self.d.is_one():
            return _raw(self.n ** k, _P1, self.v * k, None)
        out, base = ONE, self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # transformations ------------------------------------------------------

    def invert_q(self) -> "RatQ":
        """Substitute q -> q^{-1}.  Only defined on plain values."""
        self.plain()
        if self.n.is_zero():
            return self
        dn, dd = self.n.degree(), self.d.degree()
        n = fmpz_poly(list(reversed(self.n.coeffs())))
        d = fmpz_poly(list(reversed(self.d.coeffs())))
        return _make(n, d, -self.v - dn + dd)

    def evaluate(self, qv: Fraction) -> Fraction:
        self.plain()
        qv = Fraction(qv)
        num = sum((Fraction(int(c)) * qv ** i for i, c in enumerate(self.n.coeffs())), Fraction(0))
        den = sum((Fraction(int(c)) * qv ** i for i, c in enumerate(self.d.coeffs())), Fraction(0))
        return num / den * qv ** self.v

    # comparison / hashing -------------------------------------------------

    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return False
        return (self.v == other.v and self.n == other.n and self.d == other.d
                and self.w == other.w)

    def __hash__(self):
        if self._h is None:
            self._h = hash((_key(self.n), _key(self.d), self.v, self.w))
        return self._h

    # printing -------------------------------------------------------------

    def __str__(self):
        a = _fmt_plain(self.n, self.d, self.v)
        if self.w is None:
            return a
        b = str(self.w)
        if self.n.is_zero():
            return f"w*({b})"
        return f"{a} + w*({b})"

    def __repr__(self):
        return f"RatQ({self})"


def _raw(n, d, v, w) -> RatQ:
    r = object.__new__(RatQ)
    r.n, r.d, r.v, r.w, r._h = n, d, v, w, None
    return r


def _make(n: fmpz_poly, d: fmpz_poly, v: int) -> RatQ:
    if n.is_zero():
        return ZERO
    if d.is_zero():
        raise ZeroDivisionError("RatQ division by zero")
    k = _valuation(n)
    if k:
        n = n.right_shift(k)
        v += k
    if not d.is_one():
        k = _valuation(d)
        if k:
            d = d.right_shift(k)
            v -= k
        g = n.gcd(d)
        if not g.is_one():
            n = n // g
            d = d // g
        if d.leading_coefficient() < 0:
            n, d = -n, -d
    return _raw(n, d, v, None)


def _coerce(x):
    if isinstance(x, RatQ):
        return x
    if isinstance(x, int):
        return _INTS.get(x) or RatQ(x)
    if isinstance(x, Fraction):
        return RatQ(x)
    return NotImplemented


def _add_plain(a: RatQ, b: RatQ) -> RatQ:
    if a.n.is_zero():
        return _raw(b.n, b.d, b.v, None) if not b.n.is_zero() else ZERO
    if b.n.is_zero():
        return _raw(a.n, a.d, a.v, None)
    m = min(a.v, b.v)
    an = a.n if a.v == m else a.n.left_shift(a.v - m)
    bn = b.n if b.v == m else b.n.left_shift(b.v - m)
    if a.d.is_one() and b.d.is_one():
        n = an + bn
        if n.is_zero():
            return ZERO
        if n[0] == 0:
            return _make(n, _P1, m)
        return _raw(n, _P1, m, None)
    if a.d == b.d:
        return _make(an + bn, a.d, m)
    return _make(an * b.d + bn * a.d, a.d * b.d, m)


def _mul_plain(a: RatQ, b: RatQ) -> RatQ:
    if a.n.is_zero() or b.n.is_zero():
        return ZERO
    if a.d.is_one() and b.d.is_one():
        return _raw(a.n * b.n, _P1, a.v + b.v, None)
    # cross-cancel before multiplying to keep sizes down
    n1, d2 = a.n, b.d
    n2, d1 = b.n, a.d
    if not d2.is_one():
        g = n1.gcd(d2)
        if not g.is_one():
            n1, d2 = n1 // g, d2 // g
    if not d1.is_one():
        g = n2.gcd(d1)
        if not g.is_one():
            n2, d1 = n2 // g, d1 // g
    n, d = n1 * n2, d1 * d2
    if d.leading_coefficient() < 0:
        n, d = -n, -d
    return _raw(n, d, a.v + b.v, None)


def _sum_w(x, y):
    if x is None:
        return y
    if y is None:
        return x
    return x + y


def _with_w(a: RatQ, b) -> RatQ:
    if b is None or b.is_zero():
        return a
    return _raw(a.n, a.d, a.v, b)


def _fmt_laurent(p: fmpz_poly, v: int) -> str:
    parts = []
    for i, c in enumerate(p.coeffs()):
        c = int(c)
        if c == 0:
            continue
        e = i + v
        mono = "" if e == 0 else ("q" if e == 1 else f"q^{e}")
        if not mono:
            body = str(abs(c))
        elif abs(c) == 1:
            body = mono
        else:
            body = f"{abs(c)}*{mono}"
        parts.append(("-" if c < 0 else "+", body))
    if not parts:
        return "0"
    out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


def _fmt_plain(n, d, v) -> str:
    if n.is_zero():
        return "0"
    if d.is_one():
        return _fmt_laurent(n, v)
    return f"({_fmt_laurent(n, v)})/({_fmt_laurent(d, 0)})"


_TERM = re.compile(r"\s*([+-]?)\s*(\d+)?\s*\*?\s*(q(?:\^(-?\d+))?)?")


def _parse_laurent(s: str) -> RatQ:
    s = s.strip()
    if s == "0":
        return ZERO
    coeffs: dict[int, int] = {}
    pos = 0
    while pos < len(s):
        m = _TERM.match(s, pos)
        if not m or m.end() == pos:
            raise ValueError(f"bad polynomial text: {s!r}")
        sign, num, qpart, exp = m.groups()
        if num is None and qpart is None:
            raise ValueError(f"bad polynomial text: {s!r}")
        c = int(num) if num else 1
        if sign == "-":
            c = -c
        e = 0 if qpart is None else (int(exp) if exp is not None else 1)
        coeffs[e] = coeffs.get(e, 0) + c
        pos = m.end()
    return RatQ.laurent(coeffs)


def parse_ratq(s: str) -> RatQ:
    """Inverse of str() for RatQ values."""
    s = s.strip()
    wpart = None
    if "w*(" in s:
        head, _, tail = s.partition("w*(")
        if not tail.endswith(")"):
            raise ValueError(f"bad RatQ text: {s!r}")
        wpart = parse_ratq(tail[:-1])
        head = head.strip()
        if head.endswith("+"):
            head = head[:-1].strip()
        a = parse_ratq(head) if head else ZERO
        return _with_w(a, wpart)
    if s.startswith("(") and ")/(" in s:
        num, den = s[1:-1].split(")/(")
        return _parse_laurent(num) / _parse_laurent(den)
    return _parse_laurent(s)


ZERO = _raw(_P0, _P1, 0, None)
ONE = _raw(_P1, _P1, 0, None)
_INTS = {0: ZERO, 1: ONE}
_INTS.update({k: _raw(fmpz_poly([k]), _P1, 0, None) for k in range(-8, 9) if k not in (0, 1)})
Q = RatQ.qpow(1)
QINV = RatQ.qpow(-1)
W = _raw(_P0, _P1, 0, ONE)


def mq(k: int) -> RatQ:
    """(-q)^k."""
    return RatQ.qpow(k, -1 if k % 2 else 1)


# ---------------------------------------------------------------------------
# truncated series in u


class GradedCoeff:
    """Truncated series sum_d c_d u^d with degrees confined to window [lo, hi]."""

    __slots__ = ("terms", "lo", "hi")

    def __init__(self, terms: Mapping[int, RatQ] | None = None, window: tuple[int, int] = (-2, 0)):
        lo, hi = window
        if lo > hi:
            raise ValueError(f"empty window {window}")
        self.lo, self.hi = lo, hi
        self.terms = {}
        if terms:
            for d, c in terms.items():
                c = _coerce(c)
                if lo <= d <= hi and not c.is_zero():
                    self.terms[d] = c

    @property
    def window(self) -> tuple[int, int]:
        return (self.lo, self.hi)

    @staticmethod
    def const(c, window=(-2, 0)) -> "GradedCoeff":
        return GradedCoeff({0: c}, window)

    @staticmethod
    def mono(c, d: int, window=(-2, 0)) -> "GradedCoeff":
        return GradedCoeff({d: c}, window)

    def is_zero(self) -> bool:
        return not self.terms

    def __getitem__(self, d: int) -> RatQ:
        return self.terms.get(d, ZERO)

    def _win(self, other: "GradedCoeff") -> tuple[int, int]:
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise ValueError(f"incompatible windows {self.window} and {other.window}")
        return lo, hi

    def __add__(self, other):
        if not isinstance(other, GradedCoeff):
            other = _coerce(other)
            if other is NotImplemented:
                return other
            other = GradedCoeff.const(other, self.window)
        win = self._win(other)
        out = dict(self.terms)
        for d, c in other.terms.items():
            out[d] = out[d] + c if d in out else c
        return GradedCoeff(out, win)

    __radd__ = __add__

    def __neg__(self):
        return GradedCoeff({d: -c for d, c in self.terms.items()}, self.window)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, GradedCoeff):
            other = _coerce(other)
            if other is NotImplemented:
                return other
            return GradedCoeff({d: c * other for d, c in self.terms.items()}, self.window)
        lo, hi = self._win(other)
        out: dict[int, RatQ] = {}
        for d1, c1 in self.terms.items():
            for d2, c2 in other.terms.items():
                d = d1 + d2
                if lo <= d <= hi:
                    p = c1 * c2
                    out[d] = out[d] + p if d in out else p
        return GradedCoeff(out, (lo, hi))

    __rmul__ = __mul__

    def direction(self) -> int:
        """-1 for a series in u^{-1} (window above capped at 0), +1 for a series in u."""
        if self.hi <= 0:
            return -1
        if self.lo >= 0:
            return 1
        degs = list(self.terms)
        if len(degs) <= 1:
            return -1
        raise ValueError(f"two-sided window {self.window} has no expansion direction")

    def invert(self) -> "GradedCoeff":
        if not self.terms:
            raise ZeroDivisionError("inverting the zero series")
        sgn = self.direction()
        lo, hi = self.lo, self.hi
        lead = max(self.terms) if sgn < 0 else min(self.terms)
        a0inv = self.terms[lead].inverse()
        # a = u^lead * sum_k a_k u^{sgn k};  a^{-1} = u^{-lead} * sum_k b_k u^{sgn k}
        a = {sgn * (d - lead): c for d, c in self.terms.items()}
        top = -lead
        if not (lo <= top <= hi):
            raise ValueError(f"inverse leading degree {top} falls outside window {self.window}")
        span = (top - lo) if sgn < 0 else (hi - top)
        b = [a0inv]
        for k in range(1, span + 1):
            acc = ZERO
            for j in range(1, k + 1):
                aj = a.get(j)
                if aj is not None and not b[k - j].is_zero():
                    acc = acc + aj * b[k - j]
            b.append(-(a0inv * acc))
        return GradedCoeff({top + sgn * k: c for k, c in enumerate(b)}, self.window)

    def subs_u(self, c: int, e: int = 1) -> "GradedCoeff":
        """Substitute u -> q^c u^e (e = +-1)."""
        if e not in (1, -1):
            raise ValueError("only u -> q^c u^{+-1} is supported")
        win = (self.lo, self.hi) if e == 1 else (-self.hi, -self.lo)
        return GradedCoeff({e * d: v * RatQ.qpow(c * d) for d, v in self.terms.items()}, win)

    def with_window(self, window: tuple[int, int]) -> "GradedCoeff":
        return GradedCoeff(self.terms, window)

    def invert_q(self) -> "GradedCoeff":
        return GradedCoeff({d: c.invert_q() for d, c in self.terms.items()}, self.window)

    def __eq__(self, other):
        if isinstance(other, GradedCoeff):
            return self.terms == other.terms
        other = _coerce(other)
        if other is NotImplemented:
            return False
        return self.terms == ({0: other} if not other.is_zero() else {})

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def __str__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"({c})*u^{d}" if d else f"({c})" for d, c in sorted(self.terms.items(), reverse=True))

    def __repr__(self):
        return f"GradedCoeff({self}, window={self.window})"


def graded_mul(a: GradedCoeff, b: GradedCoeff) -> GradedCoeff:
    return a * b


def graded_invert(a: GradedCoeff) -> GradedCoeff:
    return a.invert()


def ratq_arith(a, b, op: str) -> RatQ:
    a, b = _coerce(a), _coerce(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown op {op!r}")


def linear_combination(items: Iterable[tuple[RatQ, RatQ]]) -> RatQ:
    acc = ZERO
    for c, x in items:
        acc = acc + c * x
    return acc
