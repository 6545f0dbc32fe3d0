"""Presentations of U_q(gl_N), its twisted coideals, the quantum affine algebra at
level 0 and the twisted q-Yangians, together with generator matrices and maps."""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

from .ncalg import (GenId, NCPoly, Poly, RatQ, RuleError, RuleSet, Rewriter, Word,
                    derive_pair_rules, padd)
from .scalar import ONE, Q, QINV, ZERO, GradedCoeff
from .tensor import SparseOp, make_const

KINDS = ("uqgl", "uqtw_o", "uqtw_sp", "uqaffine", "yqtw_o", "yqtw_sp")


def prime(i: int) -> int:
    """The symplectic pairing 2k-1 <-> 2k."""
    return i + 1 if i % 2 else i - 1


def pmul(a: Mapping[Word, RatQ], b: Mapping[Word, RatQ]) -> Poly:
    out: Poly = {}
    for w1, c1 in a.items():
        for w2, c2 in b.items():
            padd(out, {w1 + w2: c1 * c2})
    return out


class Presentation:
    """A frozen algebra definition: generators in monomial order, entry rules for the
    generator matrices, and the derived rewriting rules."""

    def __init__(self, kind: str, N: int, K: int | None, gens: Sequence[GenId]):
        self.kind, self.N, self.K = kind, N, K
        self.gens = list(gens)
        self.rank = {g: r for r, g in enumerate(self.gens)}
        self.level = [g.level for g in self.gens]
        self.max_level = K
        self.rules: RuleSet | None = None
        self.rewriter: Rewriter | None = None
        self.host: Presentation | None = None
        self.image: dict[int, Poly] = {}
        self._wl: dict[Word, int] = {}
        self.steps = 0

    # generators ------------------------------------------------------------

    @property
    def twisted(self) -> bool:
        return self.kind in ("uqtw_o", "uqtw_sp", "yqtw_o", "yqtw_sp")

    @property
    def affine(self) -> bool:
        return self.kind in ("uqaffine", "yqtw_o", "yqtw_sp")

    @property
    def symplectic(self) -> bool:
        return self.kind in ("uqtw_sp", "yqtw_sp")

    def word_level(self, w: Word) -> int:
        got = self._wl.get(w)
        if got is None:
            got = sum(self.level[x] for x in w)
            self._wl[w] = got
        return got

    def gen(self, family: str, level: int, i: int, j: int) -> int:
        return self.rank[GenId(family, level, i, j)]

    def entry(self, family: str, level: int, i: int, j: int) -> Poly:
        """Matrix entry of the generator matrix mode as a polynomial (constants and
        vanishing entries resolved)."""
        if level < 0 or (self.K is not None and level > self.K):
            return {}
        if not self.affine and level > 0:
            return {}
        g = GenId(family, level, i, j)
        r = self.rank.get(g)
        if r is not None:
            return {(r,): ONE}
        if level == 0:
            if family == "S" and i == j and not self.symplectic:
                return {(): ONE}
            return {}
        raise KeyError(f"no generator {g.name()} in {self.kind}")

    def pbw_letters(self) -> list[int]:
        return [r for r in range(len(self.gens)) if r not in self.rules.unary]

    def name(self) -> str:
        k = f", K={self.K}" if self.K is not None else ""
        return f"{self.kind}(N={self.N}{k})"

    def __repr__(self):
        return f"Presentation({self.name()}, {len(self.gens)} generators)"

    # rewriting -------------------------------------------------------------

    def set_rules(self, rules: RuleSet):
        self.rules = rules
        self.rewriter = Rewriter(rules)

    def with_rules(self, rules: RuleSet) -> "Presentation":
        """A copy sharing generators but using different rules (for mutation tests)."""
        p = Presentation(self.kind, self.N, self.K, self.gens)
        p.host, p.image = self.host, self.image
        p.set_rules(rules)
        return p

    def reduce(self, poly: Mapping[Word, RatQ]) -> Poly:
        before = self.rewriter.steps
        out = self.rewriter.reduce(poly)
        self.steps += self.rewriter.steps - before
        return out

    def normal_form(self, p: NCPoly) -> NCPoly:
        by_d: dict[int, Poly] = {}
        for (d, w), c in p.terms.items():
            by_d.setdefault(d, {})[w] = c
        out = {}
        for d, poly in by_d.items():
            for w, c in self.reduce(poly).items():
                out[(d, w)] = c
        return NCPoly(self, out, p.window)

    def mul_nf(self, a: NCPoly, b: NCPoly) -> NCPoly:
        return (a * b).nf()

    # element helpers -------------------------------------------------------

    def zero(self, window=None) -> NCPoly:
        return NCPoly(self, {}, window)

    def one(self, window=None) -> NCPoly:
        return NCPoly.const(self, ONE, window)

    def element(self, family: str, level: int, i: int, j: int, window=None, d: int = 0) -> NCPoly:
        return NCPoly.from_poly(self, self.entry(family, level, i, j), d, window)

    def series(self, family: str, i: int, j: int, window) -> NCPoly:
        """Generator series: l+(u) = sum l+(r) u^r, l-(u) and s(u) = sum x(r) u^-r."""
        sign = 1 if family == "Lplus" else -1
        K = self.K if self.affine else 0
        modes = {sign * r: self.entry(family, r, i, j) for r in range(K + 1)}
        return NCPoly.series(self, modes, window)


# ---------------------------------------------------------------------------
# component expansion of matrix relations


def expand_product(N: int, factors: Sequence) -> dict:
    """Expand a product of 2-slot factors componentwise.

    factors: ("c", SparseOp on 2 slots with RatQ entries) or
             ("g", slot, entry) with entry(i, j) -> Poly.
    Returns {((i1, i2), (j1, j2)): Poly} for 1-based indices.
    """
    rng = range(1, N + 1)
    state: dict = {((a, b), (a, b)): {(): ONE} for a in rng for b in rng}
    for f in factors:
        new: dict = {}
        if f[0] == "c":
            op = f[1]
            cols: dict = {}
            for r, c, v in op.items():
                cols.setdefault(r, []).append((c, v))
            for (row, mid), p in state.items():
                for col, v in cols.get(mid, ()):
                    padd(new.setdefault((row, col), {}), p, v)
        else:
            _, slot, ent = f
            for (row, mid), p in state.items():
                for k in rng:
                    e = ent(mid[slot - 1], k)
                    if not e:
                        continue
                    col = (k, mid[1]) if slot == 1 else (mid[0], k)
                    padd(new.setdefault((row, col), {}), pmul(p, e))
        state = {k: v for k, v in new.items() if v}
    return state


def relation_components(N: int, lhs: Sequence[tuple[RatQ, Sequence]], rhs: Sequence[tuple[RatQ, Sequence]]) -> list[Poly]:
    """Components of sum(c * product) over lhs minus the same over rhs."""
    acc: dict = {}
    for sign, side in ((ONE, lhs), (-ONE, rhs)):
        for c, factors in side:
            for k, p in expand_product(N, factors).items():
                padd(acc.setdefault(k, {}), p, c * sign)
    return [acc[k] for k in sorted(acc) if acc[k]]


def _consts(N: int):
    A = make_const("PRinvP", N)
    B = make_const("R", N)
    return A, B, A.partial_transpose(1), B.partial_transpose(1)


# ---------------------------------------------------------------------------
# builders


def _gl_gens(N: int, levels: Iterable[int] = (0,)) -> list[GenId]:
    levels = sorted(levels)
    lower = [GenId("Lminus", 0, i, j) for i in range(1, N + 1) for j in range(1, i)]
    diag = []
    for i in range(1, N + 1):
        diag += [GenId("Lminus", 0, i, i), GenId("Lplus", 0, i, i)]
    upper = [GenId("Lplus", 0, i, j) for i in range(1, N + 1) for j in range(i + 1, N + 1)]
    minus_hi = [GenId("Lminus", r, i, j) for r in reversed(levels) if r > 0
                for i in range(1, N + 1) for j in range(1, N + 1)]
    plus_hi = [GenId("Lplus", r, i, j) for r in levels if r > 0
               for i in range(1, N + 1) for j in range(1, N + 1)]
    return minus_hi + lower + diag + upper + plus_hi


def _inverse_pairs(pres: Presentation) -> list[Poly]:
    rels = []
    for i in range(1, pres.N + 1):
        a, b = pres.gen("Lplus", 0, i, i), pres.gen("Lminus", 0, i, i)
        rels.append({(a, b): ONE, (): -ONE})
        rels.append({(b, a): ONE, (): -ONE})
    return rels


def _disordered_pairs(pres: Presentation, letters: Iterable[int] | None = None) -> list[tuple[int, int]]:
    letters = list(letters) if letters is not None else list(range(len(pres.gens)))
    out = []
    for a in letters:
        for b in letters:
            if a > b and (pres.K is None or pres.level[a] + pres.level[b] <= pres.K):
                out.append((a, b))
    return out


def gl_relations(pres: Presentation) -> list[list[Poly]]:
    """Component relations of U_q(gl_N) or the affine algebra, batched by top level."""
    N = pres.N
    A, B, _, _ = _consts(N)
    K = pres.K if pres.affine else 0
    batches: list[list[Poly]] = [[] for _ in range(K + 1)]

    def L(fam, r, slot):
        return ("g", slot, lambda i, j: pres.entry(fam, r, i, j))

    if not pres.affine:
        for fam in ("Lplus", "Lminus"):
            batches[0] += relation_components(N, [(ONE, [("c", B), L(fam, 0, 1), L(fam, 0, 2)])],
                                              [(ONE, [L(fam, 0, 2), L(fam, 0, 1), ("c", B)])])
        batches[0] += relation_components(N, [(ONE, [("c", B), L("Lplus", 0, 1), L("Lminus", 0, 2)])],
                                          [(ONE, [L("Lminus", 0, 2), L("Lplus", 0, 1), ("c", B)])])
        batches[0] += _inverse_pairs(pres)
        return batches

    for top in range(K + 1):
        for a in range(-1, top + 2):
            b = top - a
            # L+ : A L1(a) L2(b) - B L1(a+1) L2(b-1) = L2(b) L1(a) A - L2(b-1) L1(a+1) B
            batches[top] += relation_components(
                N,
                [(ONE, [("c", A), L("Lplus", a, 1), L("Lplus", b, 2)]),
                 (-ONE, [("c", B), L("Lplus", a + 1, 1), L("Lplus", b - 1, 2)])],
                [(ONE, [L("Lplus", b, 2), L("Lplus", a, 1), ("c", A)]),
                 (-ONE, [L("Lplus", b - 1, 2), L("Lplus", a + 1, 1), ("c", B)])])
            # L- : A L1(a) L2(b) - B L1(a-1) L2(b+1) = L2(b) L1(a) A - L2(b+1) L1(a-1) B
            batches[top] += relation_components(
                N,
                [(ONE, [("c", A), L("Lminus", a, 1), L("Lminus", b, 2)]),
                 (-ONE, [("c", B), L("Lminus", a - 1, 1), L("Lminus", b + 1, 2)])],
                [(ONE, [L("Lminus", b, 2), L("Lminus", a, 1), ("c", A)]),
                 (-ONE, [L("Lminus", b + 1, 2), L("Lminus", a - 1, 1), ("c", B)])])
        # mixed: A L+1(a) L-2(b) - B L+1(a+1) L-2(b+1) = L-2(b) L+1(a) A - L-2(b+1) L+1(a+1) B
        for a in range(-1, top):
            b = top - 2 - a
            batches[top] += relation_components(
                N,
                [(ONE, [("c", A), L("Lplus", a, 1), L("Lminus", b, 2)]),
                 (-ONE, [("c", B), L("Lplus", a + 1, 1), L("Lminus", b + 1, 2)])],
                [(ONE, [L("Lminus", b, 2), L("Lplus", a, 1), ("c", A)]),
                 (-ONE, [L("Lminus", b + 1, 2), L("Lplus", a + 1, 1), ("c", B)])])
    batches[0] += _inverse_pairs(pres)
    return batches


def twisted_relations(pres: Presentation) -> list[list[Poly]]:
    """Reflection-relation components, batched by top level."""
    N = pres.N
    A, B, At, Bt = _consts(N)
    K = pres.K if pres.affine else 0
    batches: list[list[Poly]] = [[] for _ in range(K + 1)]

    def S(r, slot):
        return ("g", slot, lambda i, j: pres.entry("S", r, i, j))

    if not pres.affine:
        batches[0] += relation_components(N, [(ONE, [("c", B), S(0, 1), ("c", Bt), S(0, 2)])],
                                          [(ONE, [S(0, 2), ("c", Bt), S(0, 1), ("c", B)])])
        return batches
    # R(u,v) S1(u) R^t(1,uv) S2(v) = S2(v) R^t(1,uv) S1(u) R(u,v),
    # R(u,v) = uA - vB,  R^t(1,uv) = A^t - uv B^t, coefficient of u^{1-r0} v^{1-s0}.
    for top in range(K + 1):
        for r0 in range(-1, top + 2):
            s0 = top - 1 - r0
            if s0 < -1:
                continue
            combos = [(ONE, A, At, r0, s0 - 1), (-ONE, A, Bt, r0 + 1, s0),
                      (-ONE, B, At, r0 - 1, s0), (ONE, B, Bt, r0, s0 + 1)]
            lhs = [(c, [("c", X), S(r, 1), ("c", Y), S(s, 2)]) for c, X, Y, r, s in combos]
            rhs = [(c, [S(s, 2), ("c", Y), S(r, 1), ("c", X)]) for c, X, Y, r, s in combos]
            batches[top] += relation_components(N, lhs, rhs)
    return batches


def _describe(pres: Presentation) -> Callable[[Word], str]:
    return lambda w: "*".join(pres.gens[x].name() for x in w)


def _finalize(pres: Presentation, batches, allowed=(), unary=None, letters=None):
    rules = derive_pair_rules(batches, pres.word_level, set(allowed),
                              _disordered_pairs(pres, letters) + list(allowed), unary=unary,
                              describe=_describe(pres))
    rules.description = f"rules of {pres.name()}"
    pres.set_rules(rules)
    pres.relations = batches
    return pres


def _build_uqgl(N: int) -> Presentation:
    pres = Presentation("uqgl", N, None, _gl_gens(N))
    allowed = [(pres.gen("Lminus", 0, i, i), pres.gen("Lplus", 0, i, i)) for i in range(1, N + 1)]
    return _finalize(pres, gl_relations(pres), allowed)


def _build_uqaffine(N: int, K: int) -> Presentation:
    pres = Presentation("uqaffine", N, K, _gl_gens(N, range(K + 1)))
    allowed = [(pres.gen("Lminus", 0, i, i), pres.gen("Lplus", 0, i, i)) for i in range(1, N + 1)]
    return _finalize(pres, gl_relations(pres), allowed)


def _orth_gens(N: int, K: int) -> list[GenId]:
    gens = [GenId("S", 0, i, j) for i in range(1, N + 1) for j in range(1, i)]
    for r in range(1, K + 1):
        gens += [GenId("S", r, i, j) for i in range(1, N + 1) for j in range(1, N + 1)]
    return gens


def _build_uqtw_o(N: int) -> Presentation:
    pres = Presentation("uqtw_o", N, None, _orth_gens(N, 0))
    return _finalize(pres, twisted_relations(pres))


def _build_yqtw_o(N: int, K: int) -> Presentation:
    pres = Presentation("yqtw_o", N, K, _orth_gens(N, K))
    return _finalize(pres, twisted_relations(pres))


# -- symplectic ------------------------------------------------------------


def _sp_gens(N: int, K: int) -> list[GenId]:
    """Level-0 generators in the interleaved basis order, inverses next to s_{ii'},
    higher levels by (level, i, j), eliminated s_{i'i} last."""
    gens: list[GenId] = []
    for i in range(1, N, 2):
        ip = i + 1
        gens += [GenId("S", 0, i, j) for j in range(1, i + 1)]
        gens += [GenId("S", 0, i, ip), GenId("Sinv0", 0, i, ip)]
        gens += [GenId("S", 0, ip, ip)]
        gens += [GenId("S", 0, ip, j) for j in range(1, i)]
    for r in range(1, K + 1):
        gens += [GenId("S", r, i, j) for i in range(1, N + 1) for j in range(1, N + 1)]
    gens += [GenId("S", 0, i + 1, i) for i in range(1, N, 2)]
    return gens


def sp_unit_relations(pres: Presentation) -> list[Poly]:
    """s_{i'i'} s_{ii} - q^2 s_{i'i} s_{ii'} = q^3 and the inverse relations."""
    rels = []
    for i in range(1, pres.N, 2):
        ip = i + 1
        a = pres.gen("S", 0, ip, ip)
        b = pres.gen("S", 0, i, i)
        c = pres.gen("S", 0, ip, i)
        d = pres.gen("S", 0, i, ip)
        e = pres.gen("Sinv0", 0, i, ip)
        rels.append({(a, b): ONE, (c, d): -Q ** 2, (): -Q ** 3})
        rels.append({(d, e): ONE, (): -ONE})
        rels.append({(e, d): ONE, (): -ONE})
    return rels


def _solve_in_host(target: Poly, cands: Sequence[Word], images: Mapping[Word, Poly]) -> Poly | None:
    """Find coefficients c_w with sum c_w images[w] = target (exact elimination)."""
    pivots: dict[Word, tuple[Poly, Poly]] = {}  # host word -> (row, combo)
    for w in cands:
        row, combo = dict(images[w]), {w: ONE}
        for hw in list(row):
            pass
        changed = True
        while changed and row:
            changed = False
            for hw in row:
                if hw in pivots:
                    prow, pcombo = pivots[hw]
                    f = row[hw]
                    padd(row, prow, -f)
                    padd(combo, pcombo, -f)
                    changed = True
                    break
        if not row:
            continue
        lead = max(row)
        inv = row[lead].inverse()
        row = {k: v * inv for k, v in row.items()}
        combo = {k: v * inv for k, v in combo.items()}
        pivots[lead] = (row, combo)
    rest, sol = dict(target), {}
    changed = True
    while changed and rest:
        changed = False
        for hw in rest:
            if hw in pivots:
                prow, pcombo = pivots[hw]
                f = rest[hw]
                padd(rest, prow, -f)
                padd(sol, pcombo, f)
                changed = True
                break
    return None if rest else sol


def _build_sp(kind: str, N: int, K: int) -> Presentation:
    if N % 2:
        raise ValueError(f"symplectic presentations need even N, got {N}")
    host = build("uqaffine", N, K) if kind == "yqtw_sp" else build("uqgl", N)
    pres = Presentation(kind, N, K if kind == "yqtw_sp" else None, _sp_gens(N, K if kind == "yqtw_sp" else 0))
    pres.host = host
    images = embedding_images(pres, host)
    pres.image = images
    eliminated = [pres.gen("S", 0, i + 1, i) for i in range(1, N, 2)]
    letters = [r for r in range(len(pres.gens)) if r not in eliminated]
    inv_pairs = []
    for i in range(1, N, 2):
        d, e = pres.gen("S", 0, i, i + 1), pres.gen("Sinv0", 0, i, i + 1)
        inv_pairs.append((d, e))
    Kmax = pres.K or 0

    def img(w: Word) -> Poly:
        acc: Poly = {(): ONE}
        for x in w:
            acc = host.reduce(pmul(acc, images[x]))
        return acc

    n = N // 2

    def gweight(x: int) -> tuple:
        g = pres.gens[x]
        v = [0] * n
        for k in (g.i, g.j):
            v[(k - 1) // 2] += 1 if k % 2 else -1
        if g.family == "Sinv0":
            v = [-a for a in v]
        return tuple(v)

    def wweight(w: Word) -> tuple:
        v = [0] * n
        for x in w:
            for k, a in enumerate(gweight(x)):
                v[k] += a
        return tuple(v)

    def ordered_words(maxlen: int, maxlevel: int, weight=None) -> list[Word]:
        out = []
        stack = [((), 0)]
        while stack:
            w, lev = stack.pop()
            if weight is None or wweight(w) == weight:
                out.append(w)
            if len(w) == maxlen:
                continue
            for x in letters:
                if w and (x < w[-1] or (w[-1], x) in inv_pairs):
                    continue
                nl = lev + pres.level[x]
                if nl <= maxlevel:
                    stack.append((w + (x,), nl))
        return sorted(out, key=lambda w: (len(w), w))

    cache: dict[Word, Poly] = {}

    def image_of(w: Word) -> Poly:
        if w not in cache:
            cache[w] = img(w)
        return cache[w]

    pair: dict = {}
    targets = [(a, b) for a in letters for b in letters
               if (a > b or (a, b) in inv_pairs) and pres.word_level((a, b)) <= Kmax]
    unary: dict = {}
    for x in eliminated:
        cands = ordered_words(3, 0, gweight(x))
        sol = _solve_in_host(images[x], cands, {w: image_of(w) for w in cands})
        if sol is None:
            raise RuleError(f"cannot express {pres.gens[x].name()} through the basis generators")
        unary[x] = sol
    for t in sorted(targets, key=lambda t: (pres.word_level(t), t)):
        lev, wt = pres.word_level(t), wweight(t)
        for maxlen in range(2, 7):
            cands = ordered_words(maxlen, lev, wt)
            sol = _solve_in_host(image_of(t), cands, {w: image_of(w) for w in cands})
            if sol is not None:
                pair[t] = sol
                break
        else:
            raise RuleError(f"no rule could be solved for the pair {_describe(pres)(t)}")
    rules = RuleSet(pair, unary, f"rules of {pres.name()}")
    pres.set_rules(rules)
    batches = twisted_relations(pres)
    batches[0] = batches[0] + sp_unit_relations(pres)
    pres.relations = batches
    return pres


# ---------------------------------------------------------------------------
# public construction


@lru_cache(maxsize=None)
def build(kind: str, N: int, K: int = 2) -> Presentation:
    if kind not in KINDS:
        raise ValueError(f"unknown presentation kind {kind!r}")
    if N < 1:
        raise ValueError("N must be positive")
    if kind == "uqgl":
        return _build_uqgl(N)
    if kind == "uqaffine":
        return _build_uqaffine(N, K)
    if kind == "uqtw_o":
        return _build_uqtw_o(N)
    if kind == "yqtw_o":
        return _build_yqtw_o(N, K)
    return _build_sp(kind, N, K)


# ---------------------------------------------------------------------------
# generator matrices


class NCMatrix:
    """N x N matrix of NCPoly entries over one presentation.

    tag records the substitution u -> q^c u^e applied to the underlying series.
    """

    def __init__(self, pres: Presentation, rows: Sequence[Sequence[NCPoly]], tag=(0, 1)):
        self.pres, self.N = pres, len(rows)
        self.rows = [list(r) for r in rows]
        self.tag = tag

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i - 1][j - 1]

    @property
    def window(self):
        return self.rows[0][0].window

    def shift(self, c: int, e: int = 1) -> "NCMatrix":
        """Substitute u -> q^c u^e; tags compose."""
        c0, e0 = self.tag
        return NCMatrix(self.pres, [[x.subs_u(c, e) for x in r] for r in self.rows], (c0 * e + c, e0 * e))

    def transpose(self) -> "NCMatrix":
        return NCMatrix(self.pres, [[self.rows[j][i] for j in range(self.N)] for i in range(self.N)], self.tag)

    def map(self, f) -> "NCMatrix":
        return NCMatrix(self.pres, [[f(x) for x in r] for r in self.rows], self.tag)

    def nf(self) -> "NCMatrix":
        return self.map(lambda x: x.nf())

    def __matmul__(self, other: "NCMatrix") -> "NCMatrix":
        N = self.N
        out = []
        for i in range(N):
            row = []
            for j in range(N):
                acc = self.pres.zero(self._win(other))
                for k in range(N):
                    a, b = self.rows[i][k], other.rows[k][j]
                    if a.terms and b.terms:
                        acc = acc + a * b
                row.append(acc)
            out.append(row)
        return NCMatrix(self.pres, out)

    def _win(self, other):
        a, b = self.window, other.window
        if a is None or b is None:
            return a or b
        return (max(a[0], b[0]), min(a[1], b[1]))

    def __add__(self, other: "NCMatrix") -> "NCMatrix":
        return NCMatrix(self.pres, [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)])

    def __sub__(self, other: "NCMatrix") -> "NCMatrix":
        return NCMatrix(self.pres, [[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)])

    def scale(self, c) -> "NCMatrix":
        return self.map(lambda x: x * c)

    def conj_diag(self, left: Sequence[RatQ], right: Sequence[RatQ]) -> "NCMatrix":
        """diag(left) * M * diag(right)."""
        return NCMatrix(self.pres, [[self.rows[i][j] * (left[i] * right[j]) for j in range(self.N)]
                                    for i in range(self.N)], self.tag)

    def op(self) -> SparseOp:
        """As a 1-slot SparseOp with NCPoly entries."""
        ent = {}
        for i in range(self.N):
            for j in range(self.N):
                if not self.rows[i][j].is_zero():
                    ent[(i, j)] = self.rows[i][j]
        return SparseOp(self.N, 1, ent)

    def is_zero(self) -> bool:
        return all(x.is_zero() for r in self.rows for x in r)

    @staticmethod
    def identity(pres: Presentation, N: int, window=None) -> "NCMatrix":
        return NCMatrix(pres, [[pres.one(window) if i == j else pres.zero(window) for j in range(N)]
                               for i in range(N)])

    @staticmethod
    def from_op(pres: Presentation, op: SparseOp, window=None) -> "NCMatrix":
        rows = [[pres.zero(window) for _ in range(op.N)] for _ in range(op.N)]
        for (r, c), v in op.entries.items():
            rows[r][c] = v if isinstance(v, NCPoly) else NCPoly.const(pres, v, window) if not isinstance(v, GradedCoeff) \
                else pres.zero(window) + v
        return NCMatrix(pres, rows)

    def __str__(self):
        return "\n".join(" | ".join(str(x) for x in r) for r in self.rows)


def default_window(pres: Presentation, which: str):
    if not pres.affine:
        return None
    K = pres.K
    if which in ("Lplus", "Sbar"):
        return (0, K)
    return (-K, 0)


def gen_matrix(pres: Presentation, which: str, shift: tuple[int, int] = (0, 1), window=None) -> NCMatrix:
    """L+(u), L-(u), S(u) or Sbar(u) with u -> q^c u^e applied."""
    N = pres.N
    if which == "Sbar":
        return sbar_matrix(pres, window).shift(*shift) if shift != (0, 1) else sbar_matrix(pres, window)
    if which in ("Lplus", "Lminus") and pres.kind not in ("uqgl", "uqaffine"):
        raise ValueError(f"{which} is not defined for {pres.kind}")
    if which == "S" and not pres.twisted:
        raise ValueError(f"S is not defined for {pres.kind}")
    if window is None:
        window = default_window(pres, which)
    M = NCMatrix(pres, [[pres.series(which, i, j, window) for j in range(1, N + 1)] for i in range(1, N + 1)])
    if shift != (0, 1):
        M = M.shift(*shift)
    return M


def g_matrix(N: int, symplectic: bool) -> list[list[RatQ]]:
    if not symplectic:
        return [[ONE if i == j else ZERO for j in range(N)] for i in range(N)]
    G = make_const("G", N)
    return [[G.get((i + 1,), (j + 1,)) for j in range(N)] for i in range(N)]


def _host_product(host: Presentation, A: NCMatrix, G: list[list[RatQ]], B: NCMatrix) -> NCMatrix:
    """A * G * B^t with entries reduced in the host."""
    N = A.N
    rows = []
    for i in range(N):
        row = []
        for j in range(N):
            acc = host.zero(A._win(B))
            for k in range(N):
                for l in range(N):
                    g = G[k][l]
                    if g.is_zero():
                        continue
                    a, b = A.rows[i][k], B.rows[j][l]
                    if a.terms and b.terms:
                        acc = acc + (a * b) * g
            row.append(acc.nf())
        rows.append(row)
    return NCMatrix(host, rows)


def embed_matrix(pres_tw: Presentation, host: Presentation) -> NCMatrix:
    """Image of S(u) (resp. S) in the host: L-(u) G L+(u^-1)^t."""
    sym = pres_tw.symplectic
    G = g_matrix(pres_tw.N, sym)
    if host.affine:
        Lm = gen_matrix(host, "Lminus")
        Lp = gen_matrix(host, "Lplus").shift(0, -1)
    else:
        Lm, Lp = gen_matrix(host, "Lminus"), gen_matrix(host, "Lplus")
    return _host_product(host, Lm, G, Lp)


def sbar_host(pres_tw: Presentation, host: Presentation) -> NCMatrix:
    """L+(u) G L-(u^-1)^t in the host."""
    G = g_matrix(pres_tw.N, pres_tw.symplectic)
    if host.affine:
        Lp = gen_matrix(host, "Lplus")
        Lm = gen_matrix(host, "Lminus").shift(0, -1)
    else:
        Lp, Lm = gen_matrix(host, "Lplus"), gen_matrix(host, "Lminus")
    return _host_product(host, Lp, G, Lm)


def embedding_images(pres_tw: Presentation, host: Presentation) -> dict[int, Poly]:
    """Host images of each twisted generator (normal forms)."""
    M = embed_matrix(pres_tw, host)
    out: dict[int, Poly] = {}
    for r, g in enumerate(pres_tw.gens):
        if g.family == "S":
            out[r] = M[g.i, g.j].degree_part(-g.level)
    for r, g in enumerate(pres_tw.gens):
        if g.family == "Sinv0":
            # (q l-_ii l+_i'i')^{-1} = q^-1 l-_i'i' l+_ii
            i, ip = g.i, g.j
            w = (host.gen("Lminus", 0, ip, ip), host.gen("Lplus", 0, i, i))
            out[r] = host.reduce({w: QINV})
    return out


class Embedding:
    """Algebra map from a twisted presentation into its host (finite or affine)."""

    def __init__(self, pres_tw: Presentation, host: Presentation):
        if pres_tw.N != host.N or (pres_tw.affine != host.affine) or (host.affine and pres_tw.K != host.K):
            raise ValueError("twisted presentation and host do not match")
        self.src, self.dst = pres_tw, host
        self.images = embedding_images(pres_tw, host) if pres_tw.host is not host or not pres_tw.image \
            else pres_tw.image
        self._cache: dict[Word, Poly] = {(): {(): ONE}}

    def word(self, w: Word) -> Poly:
        got = self._cache.get(w)
        if got is None:
            got = self.dst.reduce(pmul(self.word(w[:-1]), self.images[w[-1]]))
            self._cache[w] = got
        return got

    def __call__(self, p: NCPoly) -> NCPoly:
        out: dict = {}
        for (d, w), c in p.terms.items():
            for v, x in self.word(w).items():
                key = (d, v)
                out[key] = out[key] + c * x if key in out else c * x
        return NCPoly(self.dst, out, p.window)

    def matrix(self, M: NCMatrix) -> NCMatrix:
        return NCMatrix(self.dst, [[self(x) for x in r] for r in M.rows], M.tag)


def embed_twisted(pres_tw: Presentation, pres_affine: Presentation) -> Embedding:
    return Embedding(pres_tw, pres_affine)


def sbar_matrix(pres: Presentation, window=None) -> NCMatrix:
    """S-bar expressed in the presentation's own generators.

    Finite twisted types use the closed formulas; hosts compute L+ G L-^t.
    """
    N = pres.N
    if pres.kind in ("uqgl", "uqaffine"):
        raise ValueError("Sbar needs a twisted presentation; use sbar_host for the host side")
    if pres.affine:
        raise ValueError("affine S-bar is formed in the host algebra (sbar_host)")
    s = lambda i, j: pres.element("S", 0, i, j)
    rows = [[pres.zero() for _ in range(N)] for _ in range(N)]
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            if not pres.symplectic:
                # S-bar = 1 - q + q S^t
                v = s(j, i) * Q
                if i == j:
                    v = v + (ONE - Q)
            else:
                if i == j:
                    v = s(i, i) * (-Q ** -2)
                elif i % 2 == 1 and j == i + 1:
                    v = s(j, i) * (-QINV) + s(i, j) * (ONE - Q ** -2)
                elif j % 2 == 1 and i == j + 1:
                    v = s(j, i) * (-QINV)
                else:
                    v = s(j, i) * (-QINV)
            rows[i - 1][j - 1] = v.nf()
    return NCMatrix(pres, rows)


# ---------------------------------------------------------------------------
# evaluation maps


def evaluation_hom(p: NCPoly, target: Presentation | None = None) -> NCPoly:
    """U_q(affine gl_N) -> U_q(gl_N): L+(u) -> L+ - u L-, L-(u) -> L- - u^-1 L+.

    Mode r of a series carries u^{+-r}; the image keeps the spectral degree d.
    """
    src = p.pres
    if src.kind != "uqaffine":
        raise ValueError("evaluation_hom expects an element of the affine algebra")
    tgt = target or build("uqgl", src.N)

    def gimg(x: int) -> Poly:
        g = src.gens[x]
        if g.level == 0:
            return tgt.entry(g.family, 0, g.i, g.j)
        if g.level == 1:
            other = "Lminus" if g.family == "Lplus" else "Lplus"
            return {w: -c for w, c in tgt.entry(other, 0, g.i, g.j).items()}
        return {}

    out: dict = {}
    for (d, w), c in p.terms.items():
        acc: Poly = {(): ONE}
        for x in w:
            acc = pmul(acc, gimg(x))
            if not acc:
                break
        for v, x in tgt.reduce(acc).items():
            key = (d, v)
            out[key] = out[key] + c * x if key in out else c * x
    return NCPoly(tgt, out, p.window)


def twisted_evaluation(p: NCPoly, target: Presentation | None = None) -> NCPoly:
    """Y_q^tw -> U_q^tw: S(u) -> S + q^{-1} u^{-1} S-bar (o), S + q u^{-1} S-bar (sp).

    s(r) maps to the u^{-r} coefficient: s(0) -> s, s(1) -> q^{-+1} s-bar, s(r>=2) -> 0.
    """
    src = p.pres
    if src.kind not in ("yqtw_o", "yqtw_sp"):
        raise ValueError("twisted_evaluation expects a twisted q-Yangian element")
    kind = "uqtw_sp" if src.symplectic else "uqtw_o"
    tgt = target or build(kind, src.N)
    Sb = sbar_matrix(tgt)
    fac = Q if src.symplectic else QINV

    def gimg(x: int) -> Poly:
        g = src.gens[x]
        if g.family == "Sinv0":
            return {(tgt.gen("Sinv0", 0, g.i, g.j),): ONE}
        if g.level == 0:
            return tgt.entry("S", 0, g.i, g.j)
        if g.level == 1:
            return {w: c * fac for w, c in Sb[g.i, g.j].degree_part(0).items()}
        return {}

    out: dict = {}
    for (d, w), c in p.terms.items():
        acc: Poly = {(): ONE}
        for x in w:
            acc = pmul(acc, gimg(x))
            if not acc:
                break
        for v, x in tgt.reduce(acc).items():
            key = (d, v)
            out[key] = out[key] + c * x if key in out else c * x
    return NCPoly(tgt, out, p.window)


# ---------------------------------------------------------------------------
# self-consistency of the rules against the matrix relations


def _packed(pres: Presentation, family: str, scale: int, window) -> dict:
    """{(i, j): series with mode r placed at degree scale * r}, 1-based."""
    K = pres.K if pres.affine else 0
    out = {}
    for i in range(1, pres.N + 1):
        for j in range(1, pres.N + 1):
            p = NCPoly.series(pres, {scale * r: pres.entry(family, r, i, j) for r in range(K + 1)}, window)
            if not p.is_zero():
                out[(i, j)] = p
    return out


def _in_slot(N: int, mat: Mapping, slot: int) -> SparseOp:
    """mat (1-based entries) acting in one slot of a 2-slot operator."""
    terms = []
    for (i, j), v in mat.items():
        for k in range(1, N + 1):
            terms.append(((i, k), (j, k), v) if slot == 1 else ((k, i), (k, j), v))
    return SparseOp.from_unit(N, terms)


def _graded_op(N: int, parts: Sequence[tuple[int, SparseOp]], window) -> SparseOp:
    """sum t^d * op as an operator with GradedCoeff entries."""
    ent: dict = {}
    for d, op in parts:
        for key, c in op.entries.items():
            ent.setdefault(key, {})
            ent[key][d] = ent[key].get(d, ZERO) + c
    return SparseOp(N, 2, {k: GradedCoeff(v, window) for k, v in ent.items()})


def relation_residuals(pres: Presentation) -> list[tuple[str, NCPoly]]:
    """Substitute the generator matrices into every defining relation and reduce.

    Affine relations carry two spectral parameters; they are packed into one
    variable as u = t, v = t^M, and only coefficients whose words all stay within
    the truncation are compared.  Returns the nonzero residuals (empty when the
    rules are consistent).
    """
    N = pres.N
    K = pres.K if pres.affine else 0
    M = 2 * K + 7
    win = (-(M + 1) * (K + 3), (M + 1) * (K + 3))
    A, B, At, Bt = _consts(N)
    out: list[tuple[str, NCPoly]] = []

    def decode(D: int) -> tuple[int, int]:
        a = (D + M // 2) % M - M // 2
        return a, (D - a) // M

    def compare(name, lhs: SparseOp, rhs: SparseOp, top):
        for key, v in (lhs - rhs).entries.items():
            if not isinstance(v, NCPoly):
                v = NCPoly(pres, {}, win) + v
            r = v.nf()
            if pres.affine:
                r = NCPoly(pres, {(d, w): c for (d, w), c in r.terms.items() if top(*decode(d)) <= K}, win)
            if not r.is_zero():
                out.append((f"{name}{key}", r))

    if not pres.twisted:
        pairs = (("Lplus", "Lplus"), ("Lminus", "Lminus"), ("Lplus", "Lminus"))
        tops = {("Lplus", "Lplus"): lambda a, b: a + b - 1,
                ("Lminus", "Lminus"): lambda a, b: 1 - a - b,
                ("Lplus", "Lminus"): lambda a, b: a - b + 1}
        for f1, f2 in pairs:
            s1 = 1 if f1 == "Lplus" else -1
            s2 = 1 if f2 == "Lplus" else -1
            L1 = _in_slot(N, _packed(pres, f1, s1, win), 1)
            L2 = _in_slot(N, _packed(pres, f2, s2 * M, win), 2)
            R = _graded_op(N, [(1, A), (M, -B)], win) if pres.affine else B
            compare(f"RLL[{f1},{f2}]", R @ L1 @ L2, L2 @ L1 @ R, tops[(f1, f2)])
        for i in range(1, N + 1):
            a = pres.element("Lplus", 0, i, i)
            b = pres.element("Lminus", 0, i, i)
            for r in ((a * b - 1).nf(), (b * a - 1).nf()):
                if not r.is_zero():
                    out.append((f"inverse[{i}]", r))
        return out

    modes = {(i, j): {r: pres.entry("S", r, i, j) for r in range(K + 1)}
             for i in range(1, N + 1) for j in range(1, N + 1)}
    out += reflection_residuals(pres, modes, K)
    if pres.symplectic:
        for k, rel in enumerate(sp_unit_relations(pres)):
            r = NCPoly.from_poly(pres, pres.reduce(rel))
            if not r.is_zero():
                out.append((f"unit[{k}]", r))
    return out


# ---------------------------------------------------------------------------
# inversion of generator-type matrices


def _letter_inverses(pres: Presentation) -> dict[int, int]:
    inv: dict[int, int] = {}
    for r, g in enumerate(pres.gens):
        if g.level != 0:
            continue
        if g.family == "Lplus" and g.i == g.j:
            inv[r] = pres.gen("Lminus", 0, g.i, g.i)
            inv[inv[r]] = r
        elif g.family == "Sinv0":
            inv[r] = pres.gen("S", 0, g.i, g.j)
            inv[inv[r]] = r
    return inv


def _blocks(pres: Presentation, N: int) -> list[list[int]]:
    if pres.symplectic and N == pres.N:
        return [[i, i + 1] for i in range(0, N, 2)]
    return [[i] for i in range(N)]


def _sub(rows, I, J):
    return [[rows[i][j] for j in J] for i in I]


def _mm(A, B, zero):
    n, k, m = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = zero
            for t in range(k):
                if A[i][t].terms and B[t][j].terms:
                    acc = acc + A[i][t] * B[t][j]
            row.append(acc.nf())
        out.append(row)
    return out


def _is_identity(A) -> bool:
    return all((A[i][j] - (1 if i == j else 0)).is_zero() for i in range(len(A)) for j in range(len(A)))


def _invert_block(pres: Presentation, blk, inverses):
    """Inverse of a diagonal block of a degree-0 matrix: invertible monomials, or the
    symplectic 2x2 formula q^-3 [[d, -q^2 b], [(q - q^-1) b - c, a]]."""
    zero = blk[0][0] * 0
    if len(blk) == 1:
        x = blk[0][0]
        if len(x.terms) != 1:
            raise ValueError(f"diagonal entry {x} is not an invertible monomial")
        (d, w), c = next(iter(x.terms.items()))
        if any(y not in inverses for y in w):
            raise ValueError(f"diagonal entry {x} is not invertible in the degree-0 subalgebra")
        inv = NCPoly(pres, {(-d, tuple(inverses[y] for y in reversed(w))): c.inverse()}, x.window)
        cand = [[inv]]
    else:
        (a, b), (c, d) = blk
        k = Q ** -3
        cand = [[d * k, b * (-QINV)], [(b * (Q - QINV) - c) * k, a * k]]
        cand = [[y.nf() for y in r] for r in cand]
    if not (_is_identity(_mm(blk, cand, zero)) and _is_identity(_mm(cand, blk, zero))):
        raise ValueError("constant term of the matrix is not invertible")
    return cand


def _invert_degree0(pres: Presentation, rows):
    N = len(rows)
    zero = rows[0][0] * 0
    blocks = _blocks(pres, N)
    inverses = _letter_inverses(pres)
    lower = all(rows[i][j].is_zero() for bi, B in enumerate(blocks) for C in blocks[bi + 1:]
                for i in B for j in C)
    upper = all(rows[i][j].is_zero() for bi, B in enumerate(blocks) for C in blocks[:bi]
                for i in B for j in C)
    if not (lower or upper):
        raise ValueError("constant term is not block triangular")
    Dinv = [[zero for _ in range(N)] for _ in range(N)]
    for B in blocks:
        inv = _invert_block(pres, _sub(rows, B, B), inverses)
        for a, i in enumerate(B):
            for b, j in enumerate(B):
                Dinv[i][j] = inv[a][b]
    # off-diagonal-block part is nilpotent: M0^-1 = sum_k (-Dinv Nl)^k Dinv
    blk_of = {i: bi for bi, B in enumerate(blocks) for i in B}
    Nl = [[rows[i][j] if blk_of[i] != blk_of[j] else zero for j in range(N)] for i in range(N)]
    T = [[-x for x in r] for r in _mm(Dinv, Nl, zero)]
    acc, term = Dinv, Dinv
    for _ in range(len(blocks)):
        term = _mm(T, term, zero)
        acc = [[(x + y) for x, y in zip(r1, r2)] for r1, r2 in zip(acc, term)]
    return acc


def nc_matrix_invert(M: NCMatrix) -> NCMatrix:
    """Two-sided inverse: exact inverse of the degree-0 term, then a Neumann series
    in the remaining part, which moves degrees away from 0 and stops at the window."""
    pres, N = M.pres, M.N
    win = M.window
    rows0 = [[NCPoly.from_poly(pres, x.degree_part(0), 0, win) for x in r] for r in M.rows]
    inv0 = _invert_degree0(pres, rows0)
    zero = pres.zero(win)
    rest = [[M.rows[i][j] - rows0[i][j] for j in range(N)] for i in range(N)]
    if all(x.is_zero() for r in rest for x in r):
        return NCMatrix(pres, inv0, M.tag)
    span = (win[1] - win[0]) if win is not None else 0
    T = [[-x for x in r] for r in _mm(inv0, rest, zero)]
    acc, term = inv0, inv0
    for _ in range(span):
        term = _mm(T, term, zero)
        if all(x.is_zero() for r in term for x in r):
            break
        acc = [[(x + y) for x, y in zip(r1, r2)] for r1, r2 in zip(acc, term)]
    return NCMatrix(pres, acc, M.tag)


def reflection_residuals(pres: Presentation, modes: Mapping, K: int, qinv: bool = False,
                         name: str = "reflection") -> list[tuple[str, NCPoly]]:
    """Residuals of R(u/v) S_1(u) R^t(1/uv) S_2(v) = S_2(v) R^t(1/uv) S_1(u) R(u/v) for a
    matrix given by its modes {(i, j): {r: poly}} (mode r at u^-r), reduced in pres.

    qinv uses the R-matrices with q replaced by q^-1.  With K = 0 the relation is the
    constant one.  Packing and level filtering are as in relation_residuals.
    """
    N = pres.N if not modes else max(i for i, _ in modes)
    M = 2 * K + 7
    win = (-(M + 1) * (K + 3), (M + 1) * (K + 3))
    A, B, At, Bt = _consts(N)
    if qinv:
        A, B, At, Bt = (x.map(lambda c: c.invert_q()) for x in (A, B, At, Bt))

    def packed(scale):
        out = {}
        for ij, md in modes.items():
            p = NCPoly.series(pres, {scale * r: poly for r, poly in md.items() if r <= K}, win)
            if not p.is_zero():
                out[ij] = p
        return out

    def decode(D: int) -> tuple[int, int]:
        a = (D + M // 2) % M - M // 2
        return a, (D - a) // M

    S1 = _in_slot(N, packed(-1), 1)
    S2 = _in_slot(N, packed(-M), 2)
    if K > 0:
        R = _graded_op(N, [(1, A), (M, -B)], win)
        Rt = _graded_op(N, [(0, At), (1 + M, -Bt)], win)
    else:
        R, Rt = B, Bt
    out = []
    for key, v in (R @ S1 @ Rt @ S2 - S2 @ Rt @ S1 @ R).entries.items():
        if not isinstance(v, NCPoly):
            v = NCPoly(pres, {}, win) + v
        r = v.nf()
        if K > 0:
            r = NCPoly(pres, {(d, w): c for (d, w), c in r.terms.items() if 3 - sum(decode(d)) <= K}, win)
        if not r.is_zero():
            out.append((f"{name}{key}", r))
    return out


def matrix_modes(M: NCMatrix) -> dict:
    """{(i, j): {r: poly}} for a u^-1 series matrix (mode r at degree -r)."""
    out = {}
    for i in range(1, M.N + 1):
        for j in range(1, M.N + 1):
            x = M[i, j]
            md: dict = {}
            for (d, w), c in x.terms.items():
                if d > 0:
                    raise ValueError("matrix_modes expects series in u^-1")
                md.setdefault(-d, {})[w] = c
            out[(i, j)] = md
    return out


def embedding_residuals(pres_tw: Presentation, host: Presentation | None = None) -> list[tuple[str, NCPoly]]:
    """The host images of the twisted generators satisfy the reflection relation
    (and, for sp, the unit relation)."""
    if host is None:
        host = build("uqaffine", pres_tw.N, pres_tw.K) if pres_tw.affine else build("uqgl", pres_tw.N)
    E = Embedding(pres_tw, host)
    K = pres_tw.K if pres_tw.affine else 0
    modes = {(i, j): {r: E.word((pres_tw.gen("S", r, i, j),)) if GenId("S", r, i, j) in pres_tw.rank
                      else {w: c for w, c in pres_tw.entry("S", r, i, j).items()}
                      for r in range(K + 1)}
             for i in range(1, pres_tw.N + 1) for j in range(1, pres_tw.N + 1)}
    out = reflection_residuals(host, modes, K, name="embedded reflection")
    if pres_tw.symplectic:
        for k, rel in enumerate(sp_unit_relations(pres_tw)):
            img = E(NCPoly.from_poly(pres_tw, rel))
            if not img.nf().is_zero():
                out.append((f"embedded unit[{k}]", img.nf()))
    return out


def sbar_relation_residuals(pres_tw: Presentation, variant: str | None = None) -> list[tuple[str, NCPoly]]:
    """The relation expressing s-bar_ij(u) through s(u^-1), checked in the host.

    variant "o": (uq - u^-1 q^-1) sbar_ij(u) = (u q^{d_ij} - u^-1 q^{-d_ij}) s_ji(u^-1)
                  + (q - q^-1)(u [j<i] + u^-1 [i<j]) s_ij(u^-1)
    variant "sp": the same with prefactor (u^-1 q - u q^-1) on the left.
    The default variant matches the presentation type.
    """
    variant = variant or ("sp" if pres_tw.symplectic else "o")
    if not pres_tw.affine:
        raise ValueError("the spectral S-bar relation lives in the twisted q-Yangian")
    host = build("uqaffine", pres_tw.N, pres_tw.K)
    K = pres_tw.K
    win = (-1, K + 1)
    Sbar = sbar_host(pres_tw, host)
    Sinv = embed_matrix(pres_tw, host).shift(0, -1)
    N = pres_tw.N
    g = lambda terms: GradedCoeff(terms, win)
    out = []
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            dij = 1 if i == j else 0
            if variant == "o":
                pre = g({1: Q, -1: -QINV})
            else:
                pre = g({-1: Q, 1: -QINV})
            lo_, hi_ = (1 if j < i else 0), (1 if i < j else 0)
            lhs = Sbar[i, j].with_window(win) * pre
            rhs = Sinv[j, i].with_window(win) * g({1: RatQ.qpow(dij), -1: -RatQ.qpow(-dij)})
            rhs = rhs + Sinv[i, j].with_window(win) * g({1: (Q - QINV) * lo_, -1: (Q - QINV) * hi_})
            r = (lhs - rhs).nf().restrict(-1, K - 1)
            if not r.is_zero():
                out.append((f"sbar[{i},{j}]", r))
    return out


def finite_sbar_residuals(pres: Presentation) -> list[tuple[str, NCPoly]]:
    """The closed formulas for S-bar in a finite twisted algebra agree with
    L+ G L-^t in U_q(gl_N) under the embedding."""
    host = build("uqgl", pres.N)
    E = Embedding(pres, host)
    mine = E.matrix(sbar_matrix(pres))
    ref = sbar_host(pres, host)
    out = []
    for i in range(1, pres.N + 1):
        for j in range(1, pres.N + 1):
            r = (mine[i, j] - ref[i, j]).nf()
            if not r.is_zero():
                out.append((f"sbar[{i},{j}]", r))
    return out


# ---------------------------------------------------------------------------
# representation oracle


class RepOracle:
    """A finite-dimensional representation of U_q(gl_N) or the truncated affine
    algebra, used as a cheap falsifier.

    L+ goes to the blocks of R and L- to the blocks of P R^-1 P on one copy of C^N.
    In the affine case each anchor q^c contributes an evaluation factor
    L+(u) -> L+ - u q^-c L-, L-(u) -> L- - u^-1 q^c L+, and the factors are combined
    with the coproduct l_ij -> sum_k l_ik (x) l_kj.  Every rewriting rule is checked
    on construction.  Equal normal forms always give equal images; unequal images
    prove that two elements differ.
    """

    def __init__(self, pres: Presentation, anchors: Sequence[int] = (0,), validate: bool = True):
        if pres.kind not in ("uqgl", "uqaffine"):
            raise ValueError(f"no representation oracle for {pres.kind}")
        if pres.kind == "uqgl":
            anchors = anchors[:1]
        self.pres, self.anchors = pres, tuple(anchors)
        N, t = pres.N, len(self.anchors)
        self.dim_slots = t
        X = self._blocks(make_const("R", N))
        Y = self._blocks(make_const("PRinvP", N))
        zero = SparseOp(N, 1)

        def site(family: str, r: int, i: int, j: int, c: int) -> SparseOp:
            if r == 0:
                return (X if family == "Lplus" else Y).get((i, j), zero)
            if r == 1 and pres.kind == "uqaffine":
                other = Y if family == "Lplus" else X
                a = RatQ.qpow(-c if family == "Lplus" else c)
                return other.get((i, j), zero).scale(-a)
            return zero

        self.images: dict[int, SparseOp] = {}
        for rank, g in enumerate(pres.gens):
            if g.family not in ("Lplus", "Lminus"):
                raise ValueError(f"unexpected generator {g.name()}")
            self.images[rank] = self._coproduct(g.family, g.level, g.i, g.j, site)
        if validate:
            bad = self.validate()
            if bad:
                raise ValueError(f"representation violates {len(bad)} rule(s), first {bad[0]}")

    @staticmethod
    def _blocks(op: SparseOp) -> dict[tuple[int, int], SparseOp]:
        """Split a two-slot operator sum E_ij (x) X_ij into its slot-2 blocks X_ij."""
        parts: dict = {}
        for (i, k), (j, l), v in op.items():
            parts.setdefault((i, j), []).append(((k,), (l,), v))
        return {ij: SparseOp.from_unit(op.N, terms) for ij, terms in parts.items()}

    def _coproduct(self, family, level, i, j, site) -> SparseOp:
        N, t = self.pres.N, self.dim_slots
        total = SparseOp(N, t)
        for modes in itertools.product(range(level + 1), repeat=t):
            if sum(modes) != level:
                continue
            for path in itertools.product(range(1, N + 1), repeat=t - 1):
                idx = (i,) + path + (j,)
                op = None
                for s in range(t):
                    f = site(family, modes[s], idx[s], idx[s + 1], self.anchors[s])
                    if f.is_zero():
                        op = None
                        break
                    op = f if op is None else op.kron(f)
                if op is not None:
                    total = total + op
        return total

    def word(self, w: Word) -> SparseOp:
        N, t = self.pres.N, self.dim_slots
        out = SparseOp.identity(N, t)
        for x in w:
            out = out @ self.images[x]
        return out

    def poly(self, p: Mapping[Word, RatQ]) -> SparseOp:
        out = SparseOp(self.pres.N, self.dim_slots)
        for w, c in p.items():
            out = out + self.word(w).scale(c)
        return out

    def __call__(self, p: NCPoly) -> dict[int, SparseOp]:
        by_d: dict[int, dict] = {}
        for (d, w), c in p.terms.items():
            by_d.setdefault(d, {})[w] = c
        out = {d: self.poly(poly) for d, poly in by_d.items()}
        return {d: v for d, v in out.items() if not v.is_zero()}

    def validate(self) -> list[str]:
        bad = []
        rules = self.pres.rules
        for (a, b), rhs in rules.pair.items():
            if not (self.word((a, b)) - self.poly(rhs)).is_zero():
                bad.append(f"{self.pres.gens[a].name()} {self.pres.gens[b].name()}")
        for a, rhs in rules.unary.items():
            if not (self.word((a,)) - self.poly(rhs)).is_zero():
                bad.append(self.pres.gens[a].name())
        return bad

    def distinguishes(self, a: NCPoly, b: NCPoly) -> bool:
        """True when the images differ, which proves a != b."""
        return bool(self(a - b))


def rep_oracle(pres: Presentation, anchors: Sequence[int] = (0, 3)) -> RepOracle:
    return RepOracle(pres, anchors)
