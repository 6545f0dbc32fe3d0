"""Quantum minors and determinants, comatrices, Sklyanin minors and determinants,
auxiliary minors, the permutation map of the explicit Sklyanin determinant, and the
scalar factors and central series built from them."""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Mapping, Sequence

from .algebras import NCMatrix, Presentation, gen_matrix, nc_matrix_invert
from .ncalg import NCPoly
from .scalar import ONE, Q, QINV, ZERO, GradedCoeff, RatQ
from .tensor import fused_projector, perm_length, rbar


def _mq(k: int, qinv: bool = False) -> RatQ:
    """(-q)^k, or (-q^-1)^k."""
    base = -QINV if qinv else -Q
    return base ** k


def _nf_prod(factors: Sequence[NCPoly]) -> NCPoly:
    acc = factors[0]
    for f in factors[1:]:
        if acc.is_zero():
            return acc
        acc = (acc * f).nf()
    return acc


def sort_with_length(idx: Sequence[int]) -> tuple[tuple[int, ...], int]:
    """Sorted copy and the number of inversions of idx."""
    return tuple(sorted(idx)), perm_length([sorted(idx).index(i) + 1 for i in idx])


def _check_square(I, J):
    if len(I) != len(J):
        raise ValueError("row and column index lists differ in length")


def _shifted(L: NCMatrix, m: int, qinv: bool) -> list[NCMatrix]:
    step = 2 if qinv else -2
    return [L.shift(step * a) if a else L for a in range(m)]


# ---------------------------------------------------------------------------
# quantum minors


def quantum_minor(L: NCMatrix, I: Sequence[int], J: Sequence[int], form: str = "row",
                  qinv: bool = False) -> NCPoly:
    """The quantum minor l^I_J(u) with arguments u, q^-2 u, ..., q^{2-2m} u.

    form: "row" (sum over row permutations), "column" (reversed product over column
    permutations) or "operator" (entry of m! A_m L_1 ... L_m).  qinv replaces q by
    q^-1 everywhere, including the argument shifts.  Unsorted index lists are
    brought to increasing order with the (-q)^{+-l} antisymmetry factors.
    """
    _check_square(I, J)
    m = len(I)
    zero = L.pres.zero(L.window)
    if m == 0:
        return L.pres.one(L.window)
    if len(set(I)) < m or len(set(J)) < m:
        return zero
    if form == "operator":
        return _operator_minor(L, I, J, qinv)
    Is, li = sort_with_length(I)
    Js, lj = sort_with_length(J)
    scale = _mq(li - lj, qinv)
    Ls = _shifted(L, m, qinv)
    acc = zero
    for sigma in itertools.permutations(range(m)):
        ls = perm_length([s + 1 for s in sigma])
        if form == "row":
            c = _mq(-ls, qinv)
            fac = [Ls[a][Is[sigma[a]], Js[a]] for a in range(m)]
        elif form == "column":
            c = _mq(ls, qinv)
            fac = [Ls[a][Is[a], Js[sigma[a]]] for a in reversed(range(m))]
        else:
            raise ValueError(f"unknown minor form {form!r}")
        if any(f.is_zero() for f in fac):
            continue
        acc = acc + _nf_prod(fac) * c
    return (acc * scale).nf()


@lru_cache(maxsize=None)
def _antisym_rows(N: int, m: int, qinv: bool = False) -> dict:
    """Rows of m! A_m as {row multi-index: [(col multi-index, coeff)]}, 1-based."""
    A = fused_projector("antisym", N, m)
    fac = RatQ(math.factorial(m))
    rows: dict = {}
    for r, c, v in A.items():
        v = v * fac
        rows.setdefault(r, []).append((c, v.invert_q() if qinv else v))
    return rows


def _operator_minor(L: NCMatrix, I, J, qinv: bool) -> NCPoly:
    m = len(I)
    Ls = _shifted(L, m, qinv)
    acc = L.pres.zero(L.window)
    for K, a in _antisym_rows(L.N, m, qinv).get(tuple(I), []):
        fac = [Ls[t][K[t], J[t]] for t in range(m)]
        if any(f.is_zero() for f in fac):
            continue
        acc = acc + _nf_prod(fac) * a
    return acc.nf()


def qdet(L: NCMatrix, form: str = "row", qinv: bool = False) -> NCPoly:
    full = tuple(range(1, L.N + 1))
    return quantum_minor(L, full, full, form, qinv)


def qdet_comatrix(L: NCMatrix, qinv: bool = False) -> NCMatrix:
    """H-hat with entries (-q)^{j-i} l^{1..j^..N}_{1..i^..N}(u)."""
    N = L.N
    rows = []
    for i in range(1, N + 1):
        row = []
        for j in range(1, N + 1):
            I = [k for k in range(1, N + 1) if k != j]
            J = [k for k in range(1, N + 1) if k != i]
            row.append(quantum_minor(L, I, J, qinv=qinv) * _mq(j - i, qinv))
        rows.append(row)
    return NCMatrix(L.pres, rows, L.tag)


def submatrix(M: NCMatrix, I: Sequence[int], J: Sequence[int]) -> NCMatrix:
    return NCMatrix(M.pres, [[M[i, j] for j in J] for i in I], M.tag)


# ---------------------------------------------------------------------------
# rational functions of u expanded as series


def rational_series(num: Mapping[int, RatQ], den: Mapping[int, RatQ], window, direction: int = -1) -> GradedCoeff:
    """Expand num(u)/den(u) (Laurent polynomials as {degree: coeff}) in u^-1
    (direction -1) or in u (direction +1), keeping degrees in window."""
    den = {d: c for d, c in den.items() if not c.is_zero()}
    if not den:
        raise ZeroDivisionError("zero denominator")
    lead = max(den) if direction < 0 else min(den)
    cl = den[lead].inverse()
    rem = {d: c for d, c in num.items() if not c.is_zero()}
    lo, hi = window
    out: dict[int, RatQ] = {}
    while rem:
        top = max(rem) if direction < 0 else min(rem)
        k = top - lead
        if (direction < 0 and k < lo) or (direction > 0 and k > hi):
            break
        c = rem[top] * cl
        out[k] = c
        for d, x in den.items():
            e = d + k
            v = rem.get(e, ZERO) - c * x
            if v.is_zero():
                rem.pop(e, None)
            else:
                rem[e] = v
    return GradedCoeff(out, window)


class RationalU:
    """A rational function num(u)/den(u) with Q(q) coefficients, kept exact."""

    def __init__(self, num: Mapping[int, RatQ], den: Mapping[int, RatQ] | None = None):
        self.num = {d: RatQ(c) if not isinstance(c, RatQ) else c for d, c in num.items()}
        self.den = {d: RatQ(c) if not isinstance(c, RatQ) else c for d, c in (den or {0: ONE}).items()}

    @staticmethod
    def _mul(a, b):
        out: dict[int, RatQ] = {}
        for d1, c1 in a.items():
            for d2, c2 in b.items():
                out[d1 + d2] = out.get(d1 + d2, ZERO) + c1 * c2
        return {d: c for d, c in out.items() if not c.is_zero()}

    def __mul__(self, other: "RationalU") -> "RationalU":
        return RationalU(self._mul(self.num, other.num), self._mul(self.den, other.den))

    def __truediv__(self, other: "RationalU") -> "RationalU":
        return RationalU(self._mul(self.num, other.den), self._mul(self.den, other.num))

    def subs(self, c: int) -> "RationalU":
        """u -> q^c u."""
        return RationalU({d: x * RatQ.qpow(c * d) for d, x in self.num.items()},
                         {d: x * RatQ.qpow(c * d) for d, x in self.den.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalU):
            return NotImplemented
        return self._mul(self.num, other.den) == self._mul(other.num, self.den)

    __hash__ = None

    def series(self, window, direction: int = -1) -> GradedCoeff:
        return rational_series(self.num, self.den, window, direction)

    def __str__(self):
        f = lambda p: " + ".join(f"({c})u^{d}" for d, c in sorted(p.items(), reverse=True)) or "0"
        return f"[{f(self.num)}] / [{f(self.den)}]"


def scalar_factor(tag: str, symplectic: bool, N: int) -> RationalU:
    """gamma_N, alpha_N or beta_N as an exact rational function of u."""
    if not symplectic:
        return RationalU({0: ONE})
    n = N // 2
    if tag == "gamma":
        return RationalU({0: RatQ.qpow(n - 2), 2: -RatQ.qpow(n)}, {0: RatQ.qpow(2 * n - 2), 2: -RatQ.qpow(-2 * n)})
    if tag == "alpha":
        return RationalU({2: RatQ.qpow(2), 0: -ONE}, {0: RatQ.qpow(2), 2: -ONE})
    if tag == "beta":
        return RationalU({2: RatQ.qpow(2), 0: -RatQ.qpow(2 * N)}, {0: RatQ.qpow(2 * N + 2), 2: -ONE})
    raise ValueError(f"unknown scalar factor {tag!r}")


def _window_of(S: NCMatrix):
    win = S.window
    if win is None:
        raise ValueError("this construction needs a truncated spectral window")
    return win


def _direction(win) -> int:
    return -1 if win[1] <= 0 else 1


def _base_window(S: NCMatrix):
    """Window of S before its argument substitution."""
    win = _window_of(S)
    return win if S.tag[1] == 1 else (-win[1], -win[0])


# ---------------------------------------------------------------------------
# Sklyanin brackets and minors


def s_sharp(S: NCMatrix, i: int, j: int) -> NCPoly:
    """s#_ij(u): s_ii(u) on the diagonal, otherwise
    ((u^-1 - u) s_ij(u) + (q - q^-1) u^{-+1} s_ji(u)) / (q u^-1 - q^-1 u)."""
    if i == j:
        return S[i, i]
    base = _base_window(S)
    d = _direction(base)
    den = {-1: Q, 1: -QINV}
    a = RationalU({-1: ONE, 1: -ONE}, den).series(base, d)
    b = RationalU({-1 if i < j else 1: Q - QINV}, den).series(base, d)
    c, e = S.tag
    if (c, e) != (0, 1):
        a, b = a.subs_u(c, e), b.subs_u(c, e)
    return (S[i, j] * a + S[j, i] * b).nf()


def _apply_matrix(vec: dict, M: NCMatrix, slot: int) -> dict:
    out: dict = {}
    N = M.N
    for K, x in vec.items():
        k = K[slot]
        for r in range(N):
            e = M.rows[r][k]
            if not e.terms:
                continue
            K2 = K[:slot] + (r,) + K[slot + 1:]
            p = e * x
            out[K2] = out[K2] + p if K2 in out else p
    return {k: v.nf() for k, v in out.items() if not v.is_zero()}


@lru_cache(maxsize=None)
def _rbar_t_cols(N: int, c: int, window: tuple[int, int], qinv: bool) -> dict:
    """R-bar(q^c u^-2) transposed in its first slot, as {col (a, b): [(row (a, b), coeff)]}."""
    op = rbar(N, c, -2, window, invert_q=qinv).partial_transpose(1)
    cols: dict = {}
    for r, col, v in op.items():
        cols.setdefault((col[0] - 1, col[1] - 1), []).append(((r[0] - 1, r[1] - 1), v))
    return cols


def _apply_rbar(vec: dict, N: int, a: int, b: int, window, qinv: bool, base: int = 0) -> dict:
    """Apply R-bar^t_{ab}(u_a^-1 u_b^-1) with u_k = q^base u q^{-+2(k-1)} (1-based slots)."""
    c = 2 * a + 2 * b - 4
    cols = _rbar_t_cols(N, (-c if qinv else c) - 2 * base, tuple(window), qinv)
    out: dict = {}
    for K, x in vec.items():
        for (ra, rb), v in cols.get((K[a - 1], K[b - 1]), ()):
            K2 = list(K)
            K2[a - 1], K2[b - 1] = ra, rb
            K2 = tuple(K2)
            p = x * v
            out[K2] = out[K2] + p if K2 in out else p
    return {k: v for k, v in out.items() if not v.is_zero()}


def _tag_base(S: NCMatrix) -> int:
    """The q-exponent c of the argument q^c u carried by S."""
    c, e = S.tag
    if e != 1:
        raise ValueError("Sklyanin brackets need a matrix in the argument q^c u")
    return c


def _bracket_apply(vec: dict, Ss: Sequence[NCMatrix], mb: int, window, qinv: bool, base: int = 0) -> dict:
    """Apply <S_1, ..., S_mb> (acting on the first mb slots) to vec."""
    N = Ss[0].N
    vec = _apply_matrix(vec, Ss[mb - 1], mb - 1)
    for a in range(mb - 1, 0, -1):
        for b in range(mb, a, -1):
            vec = _apply_rbar(vec, N, a, b, window, qinv, base)
        vec = _apply_matrix(vec, Ss[a - 1], a - 1)
    return vec


def _antisym_contract(vec: dict, N: int, m: int, I: Sequence[int], qinv: bool, zero: NCPoly) -> NCPoly:
    acc = zero
    for K, a in _antisym_rows(N, m, qinv).get(tuple(I), []):
        x = vec.get(tuple(k - 1 for k in K))
        if x is not None:
            acc = acc + x * a
    return acc.nf()


def sklyanin_vector(S: NCMatrix, J: Sequence[int], qinv: bool = False) -> dict:
    """<S_1, ..., S_m> e_J as {0-based row multi-index: NCPoly}."""
    m = len(J)
    win = _window_of(S)
    Ss = _shifted(S, m, qinv)
    return _bracket_apply({tuple(j - 1 for j in J): S.pres.one(win)}, Ss, m, win, qinv, _tag_base(S))


def sklyanin_bracket(S: NCMatrix, m: int, qinv: bool = False) -> dict:
    """The entries of m! A_m <S_1, ..., S_m> as {(I, J): NCPoly} (nonzero, 1-based)."""
    N = S.N
    out = {}
    zero = S.pres.zero(S.window)
    for J in itertools.product(range(1, N + 1), repeat=m):
        vec = sklyanin_vector(S, J, qinv)
        for I in itertools.product(range(1, N + 1), repeat=m):
            x = _antisym_contract(vec, N, m, I, qinv, zero)
            if not x.is_zero():
                out[(I, J)] = x
    return out


def sklyanin_minor(S: NCMatrix, I: Sequence[int], J: Sequence[int], qinv: bool = False) -> NCPoly:
    """s^I_J(u), read off m! A_m <S_1, ..., S_m> with u_k = u q^{-2k+2}."""
    _check_square(I, J)
    m = len(I)
    if m == 0:
        return S.pres.one(S.window)
    vec = sklyanin_vector(S, J, qinv)
    return _antisym_contract(vec, S.N, m, I, qinv, S.pres.zero(S.window))


def aux_minor(S: NCMatrix, I: Sequence[int], J: Sequence[int], c: int, qinv: bool = False) -> NCPoly:
    """Auxiliary minor: entry (I, (J, c)) of m! A_m <S_1..S_{m-1}> R^t_1m ... R^t_{m-1,m}."""
    m = len(I)
    if len(J) != m - 1:
        raise ValueError("auxiliary minors take one column index fewer than rows")
    win = _window_of(S)
    N = S.N
    base = _tag_base(S)
    vec = {tuple(j - 1 for j in (*J, c)): S.pres.one(win)}
    for a in range(m - 1, 0, -1):
        vec = _apply_rbar(vec, N, a, m, win, qinv, base)
    if m > 1:
        vec = _bracket_apply(vec, _shifted(S, m - 1, qinv), m - 1, win, qinv, base)
    return _antisym_contract(vec, N, m, I, qinv, S.pres.zero(win))


def pi_map(p: Sequence[int], N: int | None = None, identity_base: bool = True) -> tuple[int, ...]:
    """The permutation map p -> p' used by the explicit Sklyanin determinant.

    p' ends with the largest value; the pairs (p'_i, p'_{N-i}) are images of
    (p_i, p_{N+1-i}) under the pair rule on the values not yet consumed, and a
    middle position left over for even N takes the remaining value.  For N = 2
    the map is the identity unless identity_base is False, in which case the
    same recipe applies (p' = (1, 2)); only the latter makes the explicit
    formula agree with the bracket at N = 2.
    """
    p = tuple(p)
    N = N or len(p)
    if sorted(p) != list(range(1, N + 1)):
        raise ValueError(f"{p} is not a permutation of 1..{N}")
    if N == 1 or (N == 2 and identity_base):
        return p
    out = [0] * N
    out[N - 1] = N
    avail = list(range(1, N + 1))
    i = 1
    while i < N - i:
        a, b = p[i - 1], p[N - i]
        x, y = _pair_rule(avail, a, b)
        out[i - 1], out[N - i - 1] = x, y
        avail = [v for v in avail if v not in (a, b)]
        i += 1
    if i == N - i:
        used = set(out)
        (rest,) = [v for v in range(1, N + 1) if v not in used]
        out[i - 1] = rest
    return tuple(out)


def _pair_rule(omega: Sequence[int], a: int, b: int) -> tuple[int, int]:
    n = len(omega)
    k, l = omega.index(a) + 1, omega.index(b) + 1
    w = lambda t: omega[t - 1]
    if n == 2:
        return a, b
    if k < n and l < n:
        return b, a
    if l == n and k < n - 1:
        return w(n - 1), a
    if k == n and l < n - 1:
        return b, w(n - 1)
    return w(n - 1), w(n - 2)


def sdet(S: NCMatrix, method: str = "bracket", qinv: bool = False) -> NCPoly:
    """Sklyanin determinant: bracket read-off, or the explicit s#/s sum over S_N."""
    N = S.N
    full = tuple(range(1, N + 1))
    if method == "bracket":
        return sklyanin_minor(S, full, full, qinv)
    if method != "explicit":
        raise ValueError(f"unknown sdet method {method!r}")
    if qinv:
        raise ValueError("the explicit formula is implemented for q only")
    n = N // 2
    Ss = _shifted(S, N, False)
    sharp = {}
    acc = S.pres.zero(S.window)
    for p in itertools.permutations(full):
        pp = pi_map(p, N, identity_base=False)
        fac = []
        for k in range(N):
            if k < n:
                key = (k, p[k], pp[k])
                if key not in sharp:
                    x = s_sharp(S, p[k], pp[k])
                    sharp[key] = x.subs_u(-2 * k) if k else x
                fac.append(sharp[key])
            else:
                fac.append(Ss[k][p[k], pp[k]])
        if any(f.is_zero() for f in fac):
            continue
        acc = acc + _nf_prod(fac) * _mq(perm_length(pp) - perm_length(p))
    return acc.nf()


def sklyanin_comatrix(S: NCMatrix) -> NCMatrix:
    """S-hat: s^{1..i^..N}_{1..i^..N}(u) on the diagonal, (-q)^{N-i} aux minors off it."""
    N = S.N
    full = list(range(1, N + 1))
    rows = []
    for i in range(1, N + 1):
        row = []
        rest = [k for k in full if k != i]
        for j in range(1, N + 1):
            if i == j:
                row.append(sklyanin_minor(S, rest, rest))
            else:
                row.append(aux_minor(S, full, rest, j) * _mq(N - i))
        rows.append(row)
    return NCMatrix(S.pres, rows, S.tag)


# ---------------------------------------------------------------------------
# central series


def central_series(kind: str, pres: Presentation, which: str = "Lminus") -> NCPoly:
    """z_plus / z_minus: det_q L(u) / det_q L(q^-2 u) over the affine algebra;
    c_series: gamma_N(u)^-1 sdet S(u); y_series: sdet S(q^-2 u) / sdet S(u)."""
    if kind in ("z_plus", "z_minus"):
        L = gen_matrix(pres, "Lplus" if kind == "z_plus" else "Lminus")
        d0 = qdet(L)
        d1 = d0.subs_u(-2)
        return (d0 * series_inverse(d1)).nf()
    S = gen_matrix(pres, "S")
    sd = sdet(S)
    if kind == "c_series":
        g = scalar_factor("gamma", pres.symplectic, pres.N).series(S.window, -1)
        return (sd * g.invert()).nf()
    if kind == "y_series":
        return (sd.subs_u(-2) * series_inverse(sd)).nf()
    raise ValueError(f"unknown central series {kind!r}")


def series_inverse(x: NCPoly) -> NCPoly:
    """Inverse of a series whose degree-0 term is an invertible monomial."""
    return nc_matrix_invert(NCMatrix(x.pres, [[x]]))[1, 1]


def matrix_inverse(M: NCMatrix) -> NCMatrix:
    return nc_matrix_invert(M)
