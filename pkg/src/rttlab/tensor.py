"""Sparse operators on (C^N)^{(x)m} and the constant and spectral R-matrices."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Iterable, Sequence

from .scalar import ONE, Q, QINV, W, ZERO, GradedCoeff, RatQ, mq

CONST_KINDS = ("P", "Pq", "Q", "D", "C", "G", "R", "Rinv", "PRinvP")
SPECTRAL_KINDS = ("Ruv", "Rt_uv", "Rbar_x", "Rtilde_x", "Rprime")


@lru_cache(maxsize=None)
def _digits(N: int, m: int) -> tuple[tuple[int, ...], ...]:
    """Key -> 0-based multi-index, row-major."""
    return tuple(itertools.product(range(N), repeat=m))


def pack(idx: Sequence[int], N: int) -> int:
    k = 0
    for i in idx:
        k = k * N + i
    return k


def _is_zero(c) -> bool:
    return c.is_zero() if hasattr(c, "is_zero") else c == 0


class SparseOp:
    """Operator with entries[(row_key, col_key)] = coefficient.

    Keys pack 0-based multi-indices of length m row-major.  Coefficients may
    be RatQ, GradedCoeff or NCPoly; products keep the left factor on the left.
    """

    __slots__ = ("N", "m", "entries", "_rows")

    def __init__(self, N: int, m: int, entries: dict | None = None, clean: bool = True):
        self.N, self.m = N, m
        if entries is None:
            entries = {}
        elif clean:
            entries = {k: v for k, v in entries.items() if not _is_zero(v)}
        self.entries = entries
        self._rows = None

    # construction ---------------------------------------------------------

    @staticmethod
    def identity(N: int, m: int = 1, one: Any = ONE) -> "SparseOp":
        return SparseOp(N, m, {(k, k): one for k in range(N ** m)}, clean=False)

    @staticmethod
    def from_unit(N: int, terms: Iterable[tuple[Sequence[int], Sequence[int], Any]]) -> "SparseOp":
        """Build from (row multi-index, col multi-index, coeff) with 1-based indices."""
        out: dict = {}
        m = None
        for r, c, v in terms:
            m = len(r) if m is None else m
            if len(r) != m or len(c) != m:
                raise ValueError("inconsistent multi-index lengths")
            for i in (*r, *c):
                if not 1 <= i <= N:
                    raise ValueError(f"index {i} outside [1, {N}]")
            key = (pack([i - 1 for i in r], N), pack([i - 1 for i in c], N))
            out[key] = out[key] + v if key in out else v
        return SparseOp(N, m or 1, out)

    def index(self, key: int) -> tuple[int, ...]:
        return tuple(i + 1 for i in _digits(self.N, self.m)[key])

    def get(self, row: Sequence[int], col: Sequence[int], default=ZERO):
        key = (pack([i - 1 for i in row], self.N), pack([i - 1 for i in col], self.N))
        return self.entries.get(key, default)

    def items(self):
        """Yield (row multi-index, col multi-index, coeff), 1-based, sorted."""
        for (r, c) in sorted(self.entries):
            yield self.index(r), self.index(c), self.entries[(r, c)]

    # algebra --------------------------------------------------------------

    def _check(self, other: "SparseOp"):
        if (self.N, self.m) != (other.N, other.m):
            raise ValueError(f"shape mismatch: ({self.N},{self.m}) vs ({other.N},{other.m})")

    def rows(self) -> dict:
        if self._rows is None:
            rows: dict = {}
            for (r, c), v in self.entries.items():
                rows.setdefault(r, []).append((c, v))
            self._rows = rows
        return self._rows

    def __matmul__(self, other: "SparseOp") -> "SparseOp":
        self._check(other)
        brows = other.rows()
        out: dict = {}
        for (r, k), a in self.entries.items():
            row = brows.get(k)
            if not row:
                continue
            for c, b in row:
                p = a * b
                key = (r, c)
                if key in out:
                    out[key] = out[key] + p
                else:
                    out[key] = p
        return SparseOp(self.N, self.m, out)

    def __add__(self, other: "SparseOp") -> "SparseOp":
        self._check(other)
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = out[k] + v if k in out else v
        return SparseOp(self.N, self.m, out)

    def __neg__(self) -> "SparseOp":
        return SparseOp(self.N, self.m, {k: -v for k, v in self.entries.items()}, clean=False)

    def __sub__(self, other: "SparseOp") -> "SparseOp":
        return self + (-other)

    def scale(self, c, left: bool = True) -> "SparseOp":
        if left:
            return SparseOp(self.N, self.m, {k: c * v for k, v in self.entries.items()})
        return SparseOp(self.N, self.m, {k: v * c for k, v in self.entries.items()})

    def map(self, f: Callable) -> "SparseOp":
        return SparseOp(self.N, self.m, {k: f(v) for k, v in self.entries.items()})

    def is_zero(self) -> bool:
        return not self.entries

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseOp):
            return NotImplemented
        return (self.N, self.m) == (other.N, other.m) and (self - other).is_zero()

    __hash__ = None

    def apply(self, vec: dict) -> dict:
        """Apply to a vector {key: coeff}; coefficients multiply as entry * vector."""
        out: dict = {}
        rows_by_col: dict = {}
        for (r, c), v in self.entries.items():
            rows_by_col.setdefault(c, []).append((r, v))
        for c, x in vec.items():
            for r, v in rows_by_col.get(c, ()):
                p = v * x
                out[r] = out[r] + p if r in out else p
        return {k: v for k, v in out.items() if not _is_zero(v)}

    def __repr__(self):
        return f"SparseOp(N={self.N}, m={self.m}, nnz={len(self.entries)})"

    # slot maps ------------------------------------------------------------

    def _slot_check(self, slots: Iterable[int]):
        for s in slots:
            if not 1 <= s <= self.m:
                raise ValueError(f"slot {s} outside [1, {self.m}]")

    def partial_transpose(self, slot: int) -> "SparseOp":
        self._slot_check([slot])
        D = _digits(self.N, self.m)
        s = slot - 1
        out = {}
        for (r, c), v in self.entries.items():
            ri, ci = list(D[r]), list(D[c])
            ri[s], ci[s] = ci[s], ri[s]
            out[(pack(ri, self.N), pack(ci, self.N))] = v
        return SparseOp(self.N, self.m, out, clean=False)

    def transpose(self) -> "SparseOp":
        return SparseOp(self.N, self.m, {(c, r): v for (r, c), v in self.entries.items()}, clean=False)

    def partial_trace(self, slots: Iterable[int]):
        """Trace over the given slots; tracing every slot returns the scalar coefficient."""
        slots = sorted(set(slots))
        self._slot_check(slots)
        D = _digits(self.N, self.m)
        keep = [i for i in range(self.m) if i + 1 not in slots]
        drop = [s - 1 for s in slots]
        out: dict = {}
        for (r, c), v in self.entries.items():
            ri, ci = D[r], D[c]
            if any(ri[i] != ci[i] for i in drop):
                continue
            key = (pack([ri[i] for i in keep], self.N), pack([ci[i] for i in keep], self.N))
            out[key] = out[key] + v if key in out else v
        if not keep:
            return out.get((0, 0), ZERO)
        return SparseOp(self.N, len(keep), out)

    def embed(self, target: Sequence[int], m: int, one: Any = ONE) -> "SparseOp":
        """Place this operator on the given slots of an m-slot identity."""
        if len(target) != self.m or len(set(target)) != self.m:
            raise ValueError(f"need {self.m} distinct target slots, got {target}")
        for s in target:
            if not 1 <= s <= m:
                raise ValueError(f"slot {s} outside [1, {m}]")
        N = self.N
        rest = [i for i in range(m) if i + 1 not in target]
        tgt = [s - 1 for s in target]
        Dm = _digits(N, self.m)
        out = {}
        for other in itertools.product(range(N), repeat=len(rest)):
            for (r, c), v in self.entries.items():
                ri, ci = [0] * m, [0] * m
                for pos, i in zip(rest, other):
                    ri[pos] = ci[pos] = i
                for pos, a, b in zip(tgt, Dm[r], Dm[c]):
                    ri[pos], ci[pos] = a, b
                out[(pack(ri, N), pack(ci, N))] = v
        return SparseOp(N, m, out, clean=False)

    def permute(self, perm: Sequence[int]) -> "SparseOp":
        """Move the content of slot k to slot perm[k-1] (1-based permutation)."""
        if sorted(perm) != list(range(1, self.m + 1)):
            raise ValueError(f"not a permutation of 1..{self.m}: {perm}")
        D = _digits(self.N, self.m)
        out = {}
        for (r, c), v in self.entries.items():
            ri, ci = [0] * self.m, [0] * self.m
            for k, p in enumerate(perm):
                ri[p - 1] = D[r][k]
                ci[p - 1] = D[c][k]
            out[(pack(ri, self.N), pack(ci, self.N))] = v
        return SparseOp(self.N, self.m, out, clean=False)

    def kron(self, other: "SparseOp") -> "SparseOp":
        """self (x) other; coefficient products are self-entry * other-entry."""
        if self.N != other.N:
            raise ValueError("site dimension mismatch")
        shift = self.N ** other.m
        out = {}
        for (r1, c1), a in self.entries.items():
            for (r2, c2), b in other.entries.items():
                out[(r1 * shift + r2, c1 * shift + c2)] = a * b
        return SparseOp(self.N, self.m + other.m, out)


def slot_map(op: SparseOp, action: str, *args) -> SparseOp:
    if action == "partial_transpose":
        return op.partial_transpose(*args)
    if action == "partial_trace":
        return op.partial_trace(*args)
    if action == "embed":
        return op.embed(*args)
    if action == "permute":
        return op.permute(*args)
    raise ValueError(f"unknown slot action {action!r}")


# ---------------------------------------------------------------------------
# constant matrices


def _c_entry(N: int, i: int) -> RatQ:
    """(-q)^{(N+1-2i)/2} with w = (-q)^{1/2}."""
    e2 = N + 1 - 2 * i
    if e2 % 2 == 0:
        return mq(e2 // 2)
    return W * mq((e2 - 1) // 2)


def make_const(kind: str, N: int) -> SparseOp:
    if N < 1:
        raise ValueError("N must be positive")
    rng = range(1, N + 1)
    if kind == "P":
        return SparseOp.from_unit(N, [((i, j), (j, i), ONE) for i in rng for j in rng])
    if kind == "Q":
        return make_const("P", N).partial_transpose(1)
    if kind == "Pq":
        t = []
        for i in rng:
            for j in rng:
                c = ONE if i == j else (Q if i > j else QINV)
                # E_ij (x) E_ji
                t.append(((i, j), (j, i), c))
        return SparseOp.from_unit(N, t)
    if kind == "D":
        return SparseOp.from_unit(N, [((i,), (i,), RatQ.qpow(N + 1 - 2 * i)) for i in rng])
    if kind == "C":
        return SparseOp.from_unit(N, [((i,), (i,), _c_entry(N, i)) for i in rng])
    if kind == "G":
        if N % 2:
            raise ValueError(f"G requires even N, got {N}")
        t = []
        for k in range(1, N // 2 + 1):
            t.append(((2 * k - 1,), (2 * k,), Q))
            t.append(((2 * k,), (2 * k - 1,), RatQ(-1)))
        return SparseOp.from_unit(N, t)
    if kind in ("R", "Rinv", "PRinvP"):
        qq = Q - QINV
        diag = Q if kind == "R" else QINV
        t = []
        for i in rng:
            for j in rng:
                t.append(((i, j), (i, j), diag if i == j else ONE))
                if kind == "R" and i < j:
                    t.append(((i, j), (j, i), qq))  # E_ij (x) E_ji
                if kind == "PRinvP" and i > j:
                    t.append(((i, j), (j, i), -qq))
                if kind == "Rinv" and i < j:
                    t.append(((i, j), (j, i), -qq))
        return SparseOp.from_unit(N, t)
    raise ValueError(f"unknown constant kind {kind!r}")


# ---------------------------------------------------------------------------
# spectral matrices


def xval(c: int, d: int, window: tuple[int, int]):
    """The argument q^c u^d as a coefficient (RatQ when d = 0)."""
    if d == 0:
        return RatQ.qpow(c)
    return GradedCoeff({d: RatQ.qpow(c)}, window)


def _default_window(d: int, K: int = 2) -> tuple[int, int]:
    return (-K * max(1, abs(d)), 0) if d <= 0 else (0, K * d)


def r_poly(N: int, x, y=ONE, invert_q: bool = False) -> SparseOp:
    """R(x, y) = x PR^{-1}P - y R with coefficients x, y (RatQ or GradedCoeff)."""
    qq = QINV - Q
    qm, qp = (Q, QINV) if invert_q else (QINV, Q)
    if invert_q:
        qq = -qq
    t = []
    rng = range(1, N + 1)
    for i in rng:
        for j in rng:
            if i == j:
                t.append(((i, i), (i, i), qm * x - qp * y))
            else:
                t.append(((i, j), (i, j), x - y))
                # E_ij (x) E_ji maps e_j (x) e_i to e_i (x) e_j
                t.append(((i, j), (j, i), (qq * x) if i > j else (qq * y)))
    return SparseOp.from_unit(N, t)


def make_spectral(kind: str, N: int, arg: tuple[int, int], window: tuple[int, int] | None = None) -> SparseOp:
    """Spectral R-matrices at x = q^c u^d, with coefficient series truncated to window."""
    c, d = arg
    if window is None:
        window = _default_window(d)
    x = xval(c, d, window)
    if kind == "Ruv":
        return r_poly(N, x)
    if kind == "Rt_uv":
        return r_poly(N, x).partial_transpose(1)
    if kind == "Rprime":
        return r_poly(N, x, invert_q=True)
    if kind in ("Rbar_x", "Rtilde_x"):
        den = (x - 1) if kind == "Rbar_x" else (QINV * x - Q)
        if isinstance(den, RatQ):
            if den.is_zero():
                raise ValueError(f"argument q^{c} u^{d} is a pole of {kind}")
            inv = den.inverse()
        else:
            inv = den.invert()
        return r_poly(N, x).scale(inv)
    raise ValueError(f"unknown spectral kind {kind!r}")


def rbar(N: int, c: int, d: int, window, invert_q: bool = False) -> SparseOp:
    """R-bar(x) = R(x,1)/(x-1) at x = q^c u^d (q -> q^{-1} throughout when invert_q)."""
    x = xval(c, d, window)
    den = x - 1
    if isinstance(den, RatQ):
        if den.is_zero():
            raise ValueError(f"argument q^{c} u^{d} is a pole of R-bar")
        inv = den.inverse()
    else:
        inv = den.invert()
    return r_poly(N, x, invert_q=invert_q).scale(inv)


def f_coeffs(N: int, count: int, window: tuple[int, int] | None = None) -> list[RatQ]:
    """Coefficients f_0..f_count of the series f(x) fixed by its q^{2N} functional equation."""
    if count < 0:
        raise ValueError("count must be non-negative")
    q2N = RatQ.qpow(2 * N)
    f = [ONE]
    for k in range(1, count + 1):
        # f_k (q^{2Nk} - 1) = f_{k-1}(q^{2N(k-1)}(1+q^{2N}) - q^2 - q^{2N-2}) - f_{k-2} q^{2N}(q^{2N(k-2)} - 1)
        rhs = f[k - 1] * (RatQ.qpow(2 * N * (k - 1)) * (1 + q2N) - RatQ.qpow(2) - RatQ.qpow(2 * N - 2))
        if k >= 2:
            rhs = rhs - f[k - 2] * q2N * (RatQ.qpow(2 * N * (k - 2)) - 1)
        f.append(rhs / (RatQ.qpow(2 * N * k) - 1))
    return f


def f_series(N: int, c: int, d: int, window: tuple[int, int]) -> GradedCoeff:
    """f(x) at x = q^c u^d (d < 0), truncated to window."""
    if d >= 0:
        raise ValueError("f(x) is expanded only for x = q^c u^d with d < 0")
    lo = window[0]
    count = (-lo) // (-d)
    fs = f_coeffs(N, count)
    return GradedCoeff({d * k: fk * RatQ.qpow(c * k) for k, fk in enumerate(fs)}, window)


def r_normalized(N: int, c: int, d: int, window: tuple[int, int]) -> SparseOp:
    """R(x) = f(x) R(x,1)/(q^{-1}x - q) at x = q^c u^d, d < 0."""
    return make_spectral("Rtilde_x", N, (c, d), window).scale(f_series(N, c, d, window))


# ---------------------------------------------------------------------------
# permutations and fused projectors


def perm_length(p: Sequence[int]) -> int:
    return sum(1 for a in range(len(p)) for b in range(a + 1, len(p)) if p[a] > p[b])


def reduced_word(p: Sequence[int]) -> list[int]:
    """Simple transpositions s_i (1-based i) with p = s_{i1} ... s_{il}, via bubble sort."""
    p = list(p)
    word = []
    changed = True
    while changed:
        changed = False
        for i in range(len(p) - 1):
            if p[i] > p[i + 1]:
                p[i], p[i + 1] = p[i + 1], p[i]
                word.append(i + 1)
                changed = True
    return word[::-1]


@lru_cache(maxsize=None)
def pq_slot(N: int, m: int, i: int) -> SparseOp:
    return make_const("Pq", N).embed([i, i + 1], m)


def pq_perm(N: int, p: Sequence[int]) -> SparseOp:
    m = len(p)
    op = SparseOp.identity(N, m)
    for i in reduced_word(p):
        op = op @ pq_slot(N, m, i)
    return op


@lru_cache(maxsize=None)
def fused_projector(kind: str, N: int, m: int) -> SparseOp:
    if m < 1:
        raise ValueError("m must be positive")
    if kind not in ("antisym", "sym"):
        raise ValueError(f"unknown projector kind {kind!r}")
    acc = SparseOp(N, m)
    for p in itertools.permutations(range(1, m + 1)):
        term = pq_perm(N, p)
        if kind == "antisym" and perm_length(p) % 2:
            term = -term
        acc = acc + term
    return acc.scale(RatQ(Fraction(1, math.factorial(m))))


def antisym_on(N: int, m: int, slots: Sequence[int]) -> SparseOp:
    """A^q over a run of consecutive slots, as an m-slot operator."""
    slots = list(slots)
    if slots != list(range(slots[0], slots[0] + len(slots))):
        raise ValueError("slots must be consecutive")
    return fused_projector("antisym", N, len(slots)).embed(slots, m)


def fused_r(N: int, exps: Sequence[int]) -> SparseOp:
    """Ordered product of R_ij(u_i, u_j) over pairs i<j, u_i = q^{exps[i]}."""
    m = len(exps)
    op = SparseOp.identity(N, m)
    for i in range(m):
        for j in range(i + 1, m):
            r = r_poly(N, RatQ.qpow(exps[i]), RatQ.qpow(exps[j]))
            op = op @ r.embed([i + 1, j + 1], m)
    return op


def fused_scalar(m: int) -> RatQ:
    out = RatQ(math.factorial(m))
    for i in range(m):
        for j in range(i + 1, m):
            out = out * (RatQ.qpow(-2 * i) - RatQ.qpow(-2 * j))
    return out


# ---------------------------------------------------------------------------
# inversion


def invert_const(op: SparseOp) -> SparseOp:
    """Exact inverse of an operator with RatQ entries (Gauss-Jordan)."""
    n = op.N ** op.m
    A = [[ZERO] * n for _ in range(n)]
    for (r, c), v in op.entries.items():
        A[r][c] = v
    B = [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if not A[r][col].is_zero()), None)
        if piv is None:
            raise ZeroDivisionError("singular operator")
        A[col], A[piv] = A[piv], A[col]
        B[col], B[piv] = B[piv], B[col]
        inv = A[col][col].inverse()
        A[col] = [x * inv for x in A[col]]
        B[col] = [x * inv for x in B[col]]
        for r in range(n):
            if r != col and not A[r][col].is_zero():
                f = A[r][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
                B[r] = [a - f * b for a, b in zip(B[r], B[col])]
    return SparseOp(op.N, op.m, {(r, c): B[r][c] for r in range(n) for c in range(n)})


def degree_part(op: SparseOp, d: int) -> SparseOp:
    out = {}
    for k, v in op.entries.items():
        if isinstance(v, GradedCoeff):
            c = v[d]
        else:
            c = v if d == 0 else ZERO
        if not c.is_zero():
            out[k] = c
    return SparseOp(op.N, op.m, out, clean=False)


def invert_graded(op: SparseOp, window: tuple[int, int]) -> SparseOp:
    """Inverse of an operator with series entries in u^{-1} (window with hi <= 0 and
    an invertible degree-0 part), truncated to window."""
    lo, hi = window
    if hi != 0:
        raise ValueError("invert_graded expects windows of the form [lo, 0]")
    parts = {d: degree_part(op, d) for d in range(lo, 1)}
    inv0 = invert_const(parts[0])
    # B_k = -inv0 * sum_{j>=1} A_{-j} B_{k-j}; inverse = sum_k B_k u^{-k}
    B = [inv0]
    for k in range(1, -lo + 1):
        acc = SparseOp(op.N, op.m)
        for j in range(1, k + 1):
            if parts[-j].entries:
                acc = acc + parts[-j] @ B[k - j]
        B.append(-(inv0 @ acc))
    out: dict = {}
    for k, Bk in enumerate(B):
        for key, v in Bk.entries.items():
            out.setdefault(key, {})[-k] = v
    return SparseOp(op.N, op.m, {k: GradedCoeff(t, window) for k, t in out.items()})
