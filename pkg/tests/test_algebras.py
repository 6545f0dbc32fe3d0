import random

import pytest

from rttlab import algebras as alg
from rttlab.algebras import (NCMatrix, RepOracle, embed_matrix, evaluation_hom, gen_matrix,
                             nc_matrix_invert, rep_oracle, sbar_matrix, twisted_evaluation)
from rttlab.minors import qdet
from rttlab.ncalg import NCPoly
from rttlab.scalar import ONE, Q, QINV, RatQ
from rttlab.tensor import SparseOp


def names(P):
    return [g.name() for g in P.gens]


def test_finite_orthogonal_generators():
    assert names(alg.build("uqtw_o", 2)) == ["s21(0)"]
    assert sorted(names(alg.build("uqtw_o", 3))) == ["s21(0)", "s31(0)", "s32(0)"]
    P = alg.build("uqtw_o", 2)
    assert P.entry("S", 0, 1, 2) == {} and P.entry("S", 0, 1, 1) == {(): ONE}


def test_yangian_orthogonal_generators():
    P = alg.build("yqtw_o", 2, 1)
    assert sorted(names(P)) == ["s11(1)", "s12(1)", "s21(0)", "s21(1)", "s22(1)"]


def test_symplectic_unit_relation():
    P = alg.build("uqtw_sp", 2)
    s = lambda i, j: P.element("S", 0, i, j)
    unit = (s(2, 2) * s(1, 1) - (s(2, 1) * s(1, 2)) * RatQ.qpow(2)).nf()
    assert unit == P.one() * RatQ.qpow(3)
    # without the s11 factor the relation does not hold
    assert not (s(2, 2) - (s(2, 1) * s(1, 2)) * RatQ.qpow(2) - P.one() * RatQ.qpow(3)).nf().is_zero()


def test_s_matrix_yangian_o2():
    P = alg.build("yqtw_o", 2, 1)
    S = gen_matrix(P, "S")
    s = lambda r, i, j: NCPoly(P, {(-r, (P.gen("S", r, i, j),)): ONE}, (-1, 0))
    one = P.one((-1, 0))
    assert S[1, 1] == one + s(1, 1, 1)
    assert S[1, 2] == s(1, 1, 2)
    assert S[2, 1] == NCPoly(P, {(0, (P.gen("S", 0, 2, 1),)): ONE}, (-1, 0)) + s(1, 2, 1)
    assert S[2, 2] == one + s(1, 2, 2)


@pytest.mark.parametrize("N", [2, 3])
def test_sbar_finite_orthogonal(N):
    P = alg.build("uqtw_o", N)
    Sb = sbar_matrix(P)
    for i in range(1, N + 1):
        for j in range(i + 1, N + 1):
            assert Sb[i, j] == P.element("S", 0, j, i) * Q


def test_embedding_entry_orthogonal():
    P, H = alg.build("yqtw_o", 2, 2), alg.build("uqaffine", 2, 2)
    Lm, Lp = gen_matrix(H, "Lminus"), gen_matrix(H, "Lplus").shift(0, -1)
    expect = (Lm[1, 1] * Lp[1, 1] + Lm[1, 2] * Lp[1, 2]).nf()
    assert embed_matrix(P, H)[1, 1].nf() == expect
    E = alg.Embedding(P, H)
    assert E(gen_matrix(P, "S")[1, 1]).nf() == expect


@pytest.mark.parametrize("kind", ["yqtw_o", "yqtw_sp"])
def test_embedding_constant_term_matches_constraints(kind):
    P, H = alg.build(kind, 2, 1), alg.build("uqaffine", 2, 1)
    E = alg.Embedding(P, H)
    S, M = gen_matrix(P, "S"), embed_matrix(P, H)
    for i in (1, 2):
        for j in (1, 2):
            assert E(S[i, j]).nf().restrict(0, 0) == M[i, j].nf().restrict(0, 0)
    if kind == "yqtw_o":
        assert M[1, 1].nf().restrict(0, 0) == H.one((0, 0))
        assert M[1, 2].nf().restrict(0, 0).is_zero()


def test_embedding_symplectic_has_g_factor():
    P, H = alg.build("yqtw_sp", 2, 1), alg.build("uqaffine", 2, 1)
    Lm, Lp = gen_matrix(H, "Lminus"), gen_matrix(H, "Lplus").shift(0, -1)
    # (L- G L+^t)_12 with G = q E12 - E21
    expect = sum((Lm[1, a] * Lp[2, b] * c for a, b, c in ((1, 2, Q), (2, 1, RatQ(-1)))), H.zero((-1, 0)))
    assert embed_matrix(P, H)[1, 2].nf() == expect.nf()


def test_evaluation_examples():
    A = alg.build("uqaffine", 2, 1)
    G = alg.build("uqgl", 2)
    Lp = gen_matrix(A, "Lplus")
    assert evaluation_hom(Lp[1, 2]).nf() == G.element("Lplus", 0, 1, 2).with_window(Lp[1, 2].window)


def test_evaluation_respects_relations():
    A, G = alg.build("uqaffine", 2, 1), alg.build("uqgl", 2)
    for (a, b), rhs in A.rules.pair.items():
        rel = NCPoly(A, {(0, (a, b)): ONE}) - NCPoly.from_poly(A, rhs)
        assert evaluation_hom(rel, G).nf().is_zero(), (A.gens[a].name(), A.gens[b].name())


def test_twisted_evaluation_respects_relations():
    Y, U = alg.build("yqtw_o", 2, 1), alg.build("uqtw_o", 2)
    for (a, b), rhs in Y.rules.pair.items():
        rel = NCPoly(Y, {(0, (a, b)): ONE}) - NCPoly.from_poly(Y, rhs)
        assert twisted_evaluation(rel, U).nf().is_zero()


def _identity(P, N, window):
    return NCMatrix(P, [[P.one(window) if i == j else P.zero(window) for j in range(N)] for i in range(N)])


@pytest.mark.parametrize("kind,N,K", [("yqtw_o", 2, 1), ("yqtw_o", 2, 2), ("yqtw_o", 3, 1),
                                      ("uqaffine", 2, 1), ("yqtw_sp", 2, 1)])
def test_matrix_inverse_two_sided(kind, N, K):
    P = alg.build(kind, N, K)
    M = gen_matrix(P, "Lminus" if kind == "uqaffine" else "S")
    Minv = nc_matrix_invert(M)
    I = _identity(P, N, M[1, 1].window)
    assert (M @ Minv).nf().rows == I.rows
    assert (Minv @ M).nf().rows == I.rows


def test_inverse_constant_term_orthogonal():
    P = alg.build("yqtw_o", 2, 1)
    Minv = nc_matrix_invert(gen_matrix(P, "S"))
    c = lambda i, j: Minv[i, j].restrict(0, 0)
    assert c(1, 1) == P.one((0, 0)) and c(2, 2) == P.one((0, 0))
    assert c(1, 2).is_zero()
    assert c(2, 1) == -P.element("S", 0, 2, 1).with_window((0, 0))


def test_symplectic_block_inverse():
    P = alg.build("uqtw_sp", 2)
    S = gen_matrix(P, "S")
    Sinv = nc_matrix_invert(S)
    s = lambda i, j: P.element("S", 0, i, j)
    inv12 = NCPoly(P, {(0, (P.gen("Sinv0", 0, 1, 2),)): ONE})
    q3 = RatQ.qpow(-3)
    assert Sinv[1, 1] == (s(2, 2) * q3).nf()
    assert Sinv[1, 2] == (s(1, 2) * (-RatQ.qpow(2) * q3)).nf()
    assert Sinv[2, 1] == ((s(1, 2) * (Q - QINV) - s(2, 1)) * q3).nf()
    assert Sinv[2, 2] == (s(1, 1) * q3).nf()
    assert (s(1, 2) * inv12).nf() == P.one()


def test_rep_oracle_examples():
    P = alg.build("uqgl", 2)
    R = RepOracle(P, (0,))
    assert R.validate() == []
    l11 = R.word((P.gen("Lplus", 0, 1, 1),))
    assert l11 == SparseOp.from_unit(2, [((1,), (1,), Q), ((2,), (2,), ONE)])
    l12 = R.word((P.gen("Lplus", 0, 1, 2),))
    assert l12 == SparseOp.from_unit(2, [((2,), (1,), Q - QINV)])


@pytest.mark.parametrize("kind,N,K", [("uqgl", 2, None), ("uqgl", 3, None), ("uqaffine", 2, 1)])
def test_qdet_acts_as_scalar(kind, N, K):
    P = alg.build(kind, N) if K is None else alg.build(kind, N, K)
    R = RepOracle(P, (0,))
    for which in ("Lplus", "Lminus"):
        img = R(qdet(gen_matrix(P, which)))
        for d, op in img.items():
            diag = op.get((1,), (1,))
            assert op == SparseOp.identity(N, 1).scale(diag)


def random_element(P, rng, length=2, terms=2):
    n = len(P.gens)
    return NCPoly(P, {(0, tuple(rng.randrange(n) for _ in range(rng.randint(1, length)))): RatQ.qpow(rng.randint(-2, 2))
                      for _ in range(terms)})


@pytest.mark.parametrize("kind,N,K", [("uqgl", 2, None), ("uqgl", 3, None), ("uqaffine", 2, 2)])
def test_rep_oracle_agrees_with_normal_form(kind, N, K):
    """The oracle is a falsifier: it never separates elements with equal normal forms.
    It is not faithful (some higher modes act as 0), so it may miss differences."""
    P = alg.build(kind, N) if K is None else alg.build(kind, N, K)
    R = rep_oracle(P)
    assert R.validate() == []
    rng = random.Random(7)
    detected = 0
    for n in range(100):
        x = random_element(P, rng)
        y = x.nf() if n % 2 == 0 else x.nf() + random_element(P, rng, 1, 1)
        same = (x.nf() - y.nf()).is_zero()
        if same:
            assert not R.distinguishes(x, y)
            assert R(x) == R(y.nf())
        detected += R.distinguishes(x, y)
    assert detected >= 25


@pytest.mark.parametrize("kind,N,K", [("uqgl", 2, None), ("uqgl", 3, None), ("uqtw_o", 2, None), ("uqtw_o", 3, None),
                                      ("uqtw_sp", 2, None), ("uqaffine", 2, 1), ("yqtw_o", 2, 1), ("yqtw_sp", 2, 1)])
def test_defining_relations_reduce_to_zero(kind, N, K):
    P = alg.build(kind, N) if K is None else alg.build(kind, N, K)
    assert alg.relation_residuals(P) == []
