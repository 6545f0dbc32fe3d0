"""Free associative algebra on leveled generators with a rewriting engine.

Words are tuples of generator ranks (ints); a word is *ordered* when its ranks
are non-decreasing.  Rules send a disordered length-2 word (and, for inverse
pairs, one ordered pair) to a combination of normal words; optional unary
rules eliminate single generators.
"""

from __future__ import annotations

import os
import sys
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from .scalar import ONE, GradedCoeff, RatQ, _coerce

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

DEFAULT_BUDGET = 10 ** 6


def step_budget() -> int:
    env = os.environ.get("RTTLAB_STEP_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


class NonTermination(RuntimeError):
    """Rewriting ran out of its step budget."""


class RuleError(ValueError):
    """A relation could not be turned into a rewriting rule."""


class GenId(NamedTuple):
    family: str  # Lplus, Lminus, S, Sinv0
    level: int
    i: int
    j: int

    def name(self) -> str:
        if self.family == "Lplus":
            return f"l+{self.i}{self.j}({self.level})"
        if self.family == "Lminus":
            return f"l-{self.i}{self.j}({self.level})"
        if self.family == "S":
            return f"s{self.i}{self.j}({self.level})"
        if self.family == "Sinv0":
            return f"s{self.i}{self.j}({self.level})^-1"
        return f"{self.family}{self.i}{self.j}({self.level})"


Word = tuple
Poly = dict  # word -> RatQ


def padd(acc: Poly, p: Mapping, c: RatQ = ONE) -> Poly:
    """acc += c * p, in place."""
    one = c.is_one()
    for w, v in p.items():
        t = v if one else c * v
        if w in acc:
            s = acc[w] + t
            if s.is_zero():
                del acc[w]
            else:
                acc[w] = s
        elif not t.is_zero():
            acc[w] = t
    return acc


class RuleSet:
    """Frozen rewriting rules over generator ranks."""

    def __init__(self, pair: Mapping[tuple[int, int], Poly], unary: Mapping[int, Poly] | None = None,
                 description: str = ""):
        self.pair = dict(pair)
        self.unary = dict(unary or {})
        self.description = description

    def lhs_words(self) -> list[Word]:
        return sorted([(a,) for a in self.unary] + [tuple(k) for k in self.pair])

    def mutated(self, lhs: Word, target: Word, factor: RatQ) -> "RuleSet":
        """Copy with one right-hand-side coefficient multiplied by factor."""
        pair, unary = dict(self.pair), dict(self.unary)
        book = unary if len(lhs) == 1 else pair
        key = lhs[0] if len(lhs) == 1 else tuple(lhs)
        rhs = dict(book[key])
        rhs[target] = rhs[target] * factor
        book[key] = rhs
        return RuleSet(pair, unary, self.description + f" [mutated {lhs}->{target}]")


class Rewriter:
    """Memoized normal forms: words are normalized by inserting letters one at a time."""

    def __init__(self, rules: RuleSet, budget: int | None = None):
        self.rules = rules
        self.budget = budget if budget is not None else step_budget()
        self._word: dict[Word, Poly] = {(): {(): ONE}}
        self._ins: dict[tuple[Word, int], Poly] = {}
        self.steps = 0
        self._limit = 0

    def _tick(self):
        self.steps += 1
        if self.steps > self._limit:
            raise NonTermination(f"rewriting exceeded its budget of {self.budget} steps")

    def start(self):
        self._limit = self.steps + self.budget

    def letter(self, x: int) -> Poly:
        rhs = self.rules.unary.get(x)
        if rhs is None:
            return {(x,): ONE}
        w = (x,)
        if w not in self._word:
            self._tick()
            out: Poly = {}
            for t, c in rhs.items():
                padd(out, self.word(t), c)
            self._word[w] = out
        return self._word[w]

    def word(self, w: Word) -> Poly:
        got = self._word.get(w)
        if got is not None:
            return got
        if len(w) == 1:
            return self.letter(w[0])
        prefix = self.word(w[:-1])
        last = self.letter(w[-1])
        out: Poly = {}
        for v, c in prefix.items():
            for t, c2 in last.items():
                padd(out, self.concat(v, t), c * c2)
        self._word[w] = out
        return out

    def concat(self, v: Word, t: Word) -> Poly:
        """Normal form of v*t with v and t both normal."""
        cur: Poly = {v: ONE}
        for x in t:
            nxt: Poly = {}
            for w, c in cur.items():
                padd(nxt, self.insert(w, x), c)
            cur = nxt
        return cur

    def insert(self, v: Word, x: int) -> Poly:
        if not v:
            return {(x,): ONE}
        key = (v, x)
        got = self._ins.get(key)
        if got is not None:
            return got
        rule = self.rules.pair.get((v[-1], x))
        if rule is None:
            out = {v + (x,): ONE}
        else:
            self._tick()
            out = {}
            head = v[:-1]
            for t, c in rule.items():
                padd(out, self.concat(head, t), c)
        self._ins[key] = out
        return out

    def reduce(self, p: Mapping[Word, RatQ]) -> Poly:
        self.start()
        out: Poly = {}
        for w, c in p.items():
            padd(out, self.word(w), c)
        return out


# ---------------------------------------------------------------------------
# elements


class NCPoly:
    """Sum of c * u^d * word over one presentation, with degrees confined to window.

    Words whose total generator level exceeds the presentation's max level are
    dropped on multiplication.
    """

    __slots__ = ("pres", "terms", "window")

    def __init__(self, pres, terms: Mapping | None = None, window: tuple[int, int] | None = None):
        self.pres = pres
        self.window = window
        out = {}
        if terms:
            lo, hi = window if window is not None else (None, None)
            for (d, w), c in terms.items():
                if window is not None and not (lo <= d <= hi):
                    continue
                if not c.is_zero():
                    out[(d, w)] = c
        self.terms = out

    @staticmethod
    def _raw(pres, terms, window):
        p = object.__new__(NCPoly)
        p.pres, p.terms, p.window = pres, terms, window
        return p

    @staticmethod
    def const(pres, c, window=None, d: int = 0) -> "NCPoly":
        c = _coerce(c)
        return NCPoly(pres, {(d, ()): c}, window)

    @staticmethod
    def from_poly(pres, poly: Mapping[Word, RatQ], d: int = 0, window=None) -> "NCPoly":
        return NCPoly(pres, {(d, w): c for w, c in poly.items()}, window)

    @staticmethod
    def series(pres, modes: Mapping[int, Mapping[Word, RatQ]], window=None) -> "NCPoly":
        """Build sum_d u^d * poly_d."""
        terms = {}
        for d, poly in modes.items():
            for w, c in poly.items():
                terms[(d, w)] = c
        return NCPoly(pres, terms, window)

    def is_zero(self) -> bool:
        return not self.terms

    def _win(self, other: "NCPoly"):
        a, b = self.window, other.window
        if a is None:
            return b
        if b is None:
            return a
        lo, hi = max(a[0], b[0]), min(a[1], b[1])
        if lo > hi:
            raise ValueError(f"incompatible windows {a} and {b}")
        return (lo, hi)

    def _same(self, other: "NCPoly"):
        if self.pres is not other.pres and self.pres is not None and other.pres is not None:
            raise ValueError("elements of different presentations")
        return self.pres if self.pres is not None else other.pres

    def __add__(self, other):
        if not isinstance(other, NCPoly):
            if isinstance(other, GradedCoeff):
                other = NCPoly(self.pres, {(d, ()): c for d, c in other.terms.items()}, other.window)
            else:
                c = _coerce(other)
                if c is NotImplemented:
                    return NotImplemented
                other = NCPoly.const(self.pres, c, self.window)
        pres = self._same(other)
        win = self._win(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            if k in out:
                s = out[k] + v
                if s.is_zero():
                    del out[k]
                else:
                    out[k] = s
            else:
                out[k] = v
        if win == self.window and win == other.window:
            return NCPoly._raw(pres, out, win)
        return NCPoly(pres, out, win)

    __radd__ = __add__

    def __neg__(self):
        return NCPoly._raw(self.pres, {k: -v for k, v in self.terms.items()}, self.window)

    def __sub__(self, other):
        if isinstance(other, NCPoly):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, NCPoly):
            return self._mul(other)
        if isinstance(other, GradedCoeff):
            return self._scale_graded(other)
        c = _coerce(other)
        if c is NotImplemented:
            return NotImplemented
        if c.is_zero():
            return NCPoly._raw(self.pres, {}, self.window)
        return NCPoly._raw(self.pres, {k: v * c for k, v in self.terms.items()}, self.window)

    def __rmul__(self, other):
        if isinstance(other, GradedCoeff):
            return self._scale_graded(other)
        return self.__mul__(other)

    def _scale_graded(self, g: GradedCoeff) -> "NCPoly":
        win = self.window
        if win is None:
            win = g.window
        else:
            win = (max(win[0], g.lo), min(win[1], g.hi))
        lo, hi = win
        out: dict = {}
        for (d, w), c in self.terms.items():
            for e, gc in g.terms.items():
                k = d + e
                if lo <= k <= hi:
                    key = (k, w)
                    p = c * gc
                    out[key] = out[key] + p if key in out else p
        return NCPoly(self.pres, out, win)

    def _mul(self, other: "NCPoly") -> "NCPoly":
        pres = self._same(other)
        win = self._win(other)
        lo, hi = win if win is not None else (None, None)
        cap = pres.max_level if pres is not None else None
        lev = pres.word_level if (pres is not None and cap is not None) else None
        out: dict = {}
        for (d1, w1), c1 in self.terms.items():
            l1 = lev(w1) if lev else 0
            for (d2, w2), c2 in other.terms.items():
                d = d1 + d2
                if win is not None and not (lo <= d <= hi):
                    continue
                if lev and l1 + lev(w2) > cap:
                    continue
                key = (d, w1 + w2)
                p = c1 * c2
                if key in out:
                    out[key] = out[key] + p
                else:
                    out[key] = p
        return NCPoly(pres, out, win)

    def degree_part(self, d: int) -> dict:
        return {w: c for (e, w), c in self.terms.items() if e == d}

    def degrees(self) -> list[int]:
        return sorted({d for d, _ in self.terms})

    def restrict(self, lo: int, hi: int) -> "NCPoly":
        return NCPoly(self.pres, self.terms, (lo, hi) if self.window is None else
                      (max(lo, self.window[0]), min(hi, self.window[1])))

    def with_window(self, window) -> "NCPoly":
        return NCPoly(self.pres, self.terms, window)

    def subs_u(self, c: int, e: int = 1) -> "NCPoly":
        """u -> q^c u^e, e = +-1."""
        if e not in (1, -1):
            raise ValueError("only u -> q^c u^{+-1} is supported")
        win = self.window
        if win is not None and e == -1:
            win = (-win[1], -win[0])
        return NCPoly._raw(self.pres, {(e * d, w): v * RatQ.qpow(c * d) if c and d else v
                                       for (d, w), v in self.terms.items()}, win)

    def invert_q(self) -> "NCPoly":
        return NCPoly._raw(self.pres, {k: v.invert_q() for k, v in self.terms.items()}, self.window)

    def map_words(self, f: Callable[[Word], "NCPoly"], target_pres) -> "NCPoly":
        """Apply an algebra map given on words (f returns an NCPoly over target_pres)."""
        acc = NCPoly(target_pres, {}, self.window)
        for (d, w), c in self.terms.items():
            img = f(w)
            acc = acc + NCPoly(target_pres, {(d + e, v): c * x for (e, v), x in img.terms.items()}, self.window)
        return acc

    def nf(self) -> "NCPoly":
        if self.pres is None:
            return self
        return self.pres.normal_form(self)

    def scalar_part(self) -> GradedCoeff | None:
        """The series of empty-word coefficients, or None if any nonempty word is present."""
        if any(w for _, w in self.terms):
            return None
        win = self.window or (min(self.degrees() or [0]), max(self.degrees() or [0]))
        return GradedCoeff({d: c for (d, _), c in self.terms.items()}, win)

    def __eq__(self, other):
        if isinstance(other, NCPoly):
            return self.terms == other.terms
        if isinstance(other, int) and other == 0:
            return not self.terms
        c = _coerce(other)
        if c is NotImplemented:
            return False
        return self.terms == ({(0, ()): c} if not c.is_zero() else {})

    __hash__ = None

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (-kv[0][0], len(kv[0][1]), kv[0][1]))

    def word_names(self, w: Word) -> list[str]:
        return [self.pres.gens[x].name() for x in w] if self.pres is not None else []

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (d, w), c in self.sorted_terms():
            mono = "*".join(self.word_names(w))
            u = "" if d == 0 else f"u^{d}"
            body = "*".join(x for x in (mono, u) if x)
            cs = str(c)
            parts.append(f"({cs})" + (f"*{body}" if body else ""))
        return " + ".join(parts)

    def __repr__(self):
        return f"NCPoly({self})"


# ---------------------------------------------------------------------------
# rule derivation


def _eliminate(rows: list[Poly], pivot_key: Callable[[Word], tuple], pivotable: Callable[[Word], bool]):
    """Reduced row echelon form; returns ({pivot word: row with pivot coefficient 1}, bad rows)."""
    pivots: dict[Word, Poly] = {}
    bad: list[Poly] = []
    for row in rows:
        row = dict(row)
        for pw in [w for w in row if w in pivots]:
            if pw in row:
                c = row[pw]
                padd(row, pivots[pw], -c)
        # repeatedly clear pivots introduced by reduction
        changed = True
        while changed:
            changed = False
            for w in list(row):
                if w in pivots:
                    padd(row, pivots[w], -row[w])
                    changed = True
                    break
        if not row:
            continue
        lead = max(row, key=pivot_key)
        if not pivotable(lead):
            bad.append(row)
            continue
        inv = row[lead].inverse()
        row = {w: c * inv for w, c in row.items()}
        for pw, prow in pivots.items():
            if lead in prow:
                padd(prow, row, -prow[lead])
        pivots[lead] = row
    return pivots, bad


def derive_pair_rules(batches: Sequence[Sequence[Poly]], word_level: Callable[[Word], int],
                      allowed_ordered: set, required: Iterable[tuple[int, int]],
                      unary: Mapping[int, Poly] | None = None,
                      describe: Callable[[Word], str] = str) -> RuleSet:
    """Turn batches of relations (in increasing top level) into pair rules.

    Within a batch, the pivot of a relation is its highest-level disordered
    length-2 word (inverse pairs listed in allowed_ordered also qualify).
    Lower-level parts are normalized by the rules of earlier batches.
    """
    pair: dict[tuple[int, int], Poly] = {}
    unary = dict(unary or {})

    def disordered(w: Word) -> bool:
        return len(w) == 2 and (w[0] > w[1] or w in allowed_ordered)

    def pivot_key(w: Word):
        return (word_level(w), disordered(w), len(w), w)

    for batch in batches:
        rw = Rewriter(RuleSet(pair, unary))
        rows = [rw.reduce(r) for r in batch]
        rows = [r for r in rows if r]
        if not rows:
            continue
        top = max(word_level(w) for r in rows for w in r)
        pivots, bad = _eliminate(rows, pivot_key, disordered)
        for row in bad:
            lead = max(row, key=pivot_key)
            if word_level(lead) >= top:
                raise RuleError(f"relation with leading word {describe(lead)} has no disordered pivot")
            # a relation living entirely below the top level must already vanish
            raise RuleError(f"unexpected lower-level relation led by {describe(lead)}")
        for lead, row in pivots.items():
            pair[lead] = {w: -c for w, c in row.items() if w != lead}
    missing = [p for p in required if tuple(p) not in pair]
    if missing:
        a = missing[0]
        raise RuleError(f"no rule could be solved for the pair {describe(tuple(a))}")
    return RuleSet(pair, unary)


# ---------------------------------------------------------------------------
# PBW enumeration


def normal_words(rules: RuleSet, ngens: int, length: int, allowed: Iterable[int] | None = None) -> list[Word]:
    """All words of the given length containing no left-hand side as a subword."""
    letters = [x for x in (allowed if allowed is not None else range(ngens)) if x not in rules.unary]
    out: list[Word] = [()]
    for _ in range(length):
        nxt = []
        for w in out:
            for x in letters:
                if w and (w[-1], x) in rules.pair:
                    continue
                nxt.append(w + (x,))
        out = nxt
    return out


def pbw_count(pres, degree: int) -> int:
    """Number of irreducible monomials with the given number of letters."""
    return len(normal_words(pres.rules, len(pres.gens), degree, pres.pbw_letters()))
