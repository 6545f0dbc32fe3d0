import itertools

import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from conftest import q, to_sympy
from rttlab import algebras as alg
from rttlab.algebras import gen_matrix
from rttlab.minors import (_pair_rule, aux_minor, central_series, pi_map, qdet, qdet_comatrix, quantum_minor,
                           s_sharp, scalar_factor, sdet, sklyanin_bracket, sklyanin_comatrix, sklyanin_minor)
from rttlab.scalar import ONE, Q, QINV, GradedCoeff, RatQ
from rttlab.tensor import fused_projector, perm_length

u = sympy.Symbol("u")


@pytest.fixture(scope="module")
def affine2():
    return alg.build("uqaffine", 2, 1)


def test_two_by_two_minor(affine2):
    L = gen_matrix(affine2, "Lminus")
    Ls = L.shift(-2)
    expect = (L[1, 1] * Ls[2, 2] - L[2, 1] * Ls[1, 2] * QINV).nf()
    assert qdet(L) == expect
    assert quantum_minor(L, (1, 2), (1, 2)) == expect


def test_row_swap_scaling(affine2):
    L = gen_matrix(affine2, "Lminus")
    assert quantum_minor(L, (2, 1), (1, 2)) == (quantum_minor(L, (1, 2), (1, 2)) * -Q).nf()


@pytest.mark.parametrize("kind,N,K", [("uqaffine", 2, 1), ("uqaffine", 3, 1), ("uqgl", 3, None)])
def test_row_and_column_forms_agree(kind, N, K):
    P = alg.build(kind, N) if K is None else alg.build(kind, N, K)
    for which in ("Lplus", "Lminus"):
        L = gen_matrix(P, which)
        assert qdet(L, "row") == qdet(L, "column")


def _mq(k):
    return RatQ.qpow(k) * (RatQ(-1) if k % 2 else ONE)


@given(st.permutations((1, 2, 3)), st.permutations((1, 2, 3)))
def test_antisymmetry_of_minors(I, J):
    P = alg.build("uqgl", 3)
    L = gen_matrix(P, "Lplus")
    got = quantum_minor(L, I, J)
    assert got == (qdet(L) * _mq(perm_length(I) - perm_length(J))).nf()


def test_qdet_comatrix(affine2):
    L = gen_matrix(affine2, "Lminus")
    H = qdet_comatrix(L)
    # off-diagonal entry: (-q)^{2-1} times the minor deleting row 2 and column 1
    assert H[1, 2] == (quantum_minor(L, (1,), (2,)) * -Q).nf()
    prod = (H @ L.shift(-2)).nf()
    d = qdet(L)
    for i in (1, 2):
        for j in (1, 2):
            assert prod[i, j] == (d if i == j else d * 0)


@pytest.fixture(scope="module")
def yo2():
    return alg.build("yqtw_o", 2, 1)


def test_bracket_degree_one(yo2):
    S = gen_matrix(yo2, "S")
    for i, j in itertools.product((1, 2), repeat=2):
        assert sklyanin_minor(S, (i,), (j,)) == S[i, j]


def test_bracket_intertwines_antisymmetrizer(yo2):
    S = gen_matrix(yo2, "S")
    zero = yo2.zero(S.window)
    B = sklyanin_bracket(S, 2)
    A = fused_projector("antisym", 2, 2)
    keys = list(itertools.product((1, 2), repeat=2))
    for I in keys:
        for J in keys:
            lhs = sum((B.get((K, J), zero) * A.get(I, K) for K in keys), zero).nf()
            rhs = sum((B.get((I, K), zero) * A.get(K, J) for K in keys), zero).nf()
            assert lhs == rhs


@pytest.mark.parametrize("kind,N,m", [("yqtw_o", 2, 2), ("yqtw_o", 3, 2), ("yqtw_o", 3, 3), ("yqtw_sp", 2, 2)])
def test_bracket_antisymmetry(kind, N, m):
    """Rows pick up (-q)^{l(sigma)} and columns (-q)^{-l(tau)}."""
    S = gen_matrix(alg.build(kind, N, 1), "S")
    for I in itertools.combinations(range(1, N + 1), m):
        for J in itertools.combinations(range(1, N + 1), m):
            base = sklyanin_minor(S, I, J)
            for sig in itertools.permutations(range(m)):
                for tau in itertools.permutations(range(m)):
                    got = sklyanin_minor(S, [I[k] for k in sig], [J[k] for k in tau])
                    assert got == (base * _mq(perm_length(sig) - perm_length(tau))).nf()


@pytest.mark.parametrize("kind,N,K", [("yqtw_o", 2, 1), ("yqtw_o", 2, 2), ("yqtw_o", 3, 1), ("yqtw_sp", 2, 1)])
def test_bracket_and_explicit_sdet(kind, N, K):
    S = gen_matrix(alg.build(kind, N, K), "S")
    assert sdet(S) == sdet(S, "explicit")


def test_sdet_constant_term():
    S = gen_matrix(alg.build("yqtw_o", 2, 0), "S")
    d = sdet(S)
    assert d == S.pres.one((0, 0))
    S = gen_matrix(alg.build("yqtw_o", 3, 1), "S")
    assert sdet(S).restrict(0, 0) == S.pres.one((0, 0))


def test_sklyanin_comatrix(yo2):
    S = gen_matrix(yo2, "S")
    H = sklyanin_comatrix(S)
    assert H[1, 1] == sklyanin_minor(S, (2,), (2,)) == S[2, 2]
    prod = (H @ S.shift(-2)).nf()
    d = sdet(S)
    for i, j in itertools.product((1, 2), repeat=2):
        assert prod[i, j] == (d if i == j else d * 0)


def test_s_sharp(yo2):
    S = gen_matrix(yo2, "S")
    assert s_sharp(S, 1, 1) == S[1, 1]
    assert s_sharp(S, 2, 2) == S[2, 2]


def _u_inverse_series(expr, K):
    """Coefficients of expr in powers of u^-1, degrees 0..-K, from sympy."""
    t = sympy.Symbol("t")
    ser = sympy.series(expr.subs(u, 1 / t), t, 0, K + 1).removeO()
    return {-k: sympy.simplify(ser.coeff(t, k)) for k in range(K + 1)}


@pytest.mark.parametrize("K", [1, 2, 3])
def test_s_sharp_coefficients(K):
    P = alg.build("yqtw_o", 2, K)
    S = gen_matrix(P, "S")
    a = _u_inverse_series((1 / u - u) / (q / u - u / q), K)
    b = _u_inverse_series((q - 1 / q) / u / (q / u - u / q), K)
    ga = GradedCoeff({d: sympy_to_ratq(c) for d, c in a.items()}, (-K, 0))
    gb = GradedCoeff({d: sympy_to_ratq(c) for d, c in b.items()}, (-K, 0))
    assert s_sharp(S, 1, 2) == (S[1, 2] * ga + S[2, 1] * gb).nf()


def sympy_to_ratq(c):
    num, den = sympy.fraction(sympy.together(c))
    conv = lambda p: RatQ.laurent({int(e[0]): int(v) for e, v in sympy.Poly(sympy.expand(p * q ** 12), q).terms()}) \
        / RatQ.qpow(12)
    return conv(num) / conv(den)


def test_aux_minor_vanishing(yo2):
    S = gen_matrix(alg.build("yqtw_o", 3, 1), "S")
    assert aux_minor(S, (1, 2), (1,), 3).is_zero()


def test_pi_map_examples():
    assert pi_map((2, 1)) == (2, 1)
    assert pi_map((1, 2)) == (1, 2)
    assert pi_map((2, 1), identity_base=False) == (1, 2)
    assert pi_map((2, 1, 3, 4)) == (3, 1, 2, 4)
    assert _pair_rule([1, 2, 3, 4], 3, 4) == (3, 2)


@given(st.integers(3, 6).flatmap(lambda n: st.permutations(range(1, n + 1))))
def test_pi_map_image_is_a_permutation_ending_in_n(p):
    out = pi_map(p)
    assert sorted(out) == list(range(1, len(p) + 1))
    assert out[-1] == len(p)


def _sym(r):
    num = sum(to_sympy(c) * u ** d for d, c in r.num.items())
    den = sum(to_sympy(c) * u ** d for d, c in r.den.items())
    return num / den


@pytest.mark.parametrize("N", [2, 4])
def test_scalar_factors(N):
    n = N // 2
    g = _sym(scalar_factor("gamma", True, N))
    assert sympy.simplify(g - (q ** (n - 2) - q ** n * u ** 2) / (q ** (2 * n - 2) - q ** (-2 * n) * u ** 2)) == 0
    a = _sym(scalar_factor("alpha", True, N))
    assert sympy.simplify(a - (q**2 * u**2 - 1) / (q**2 - u**2)) == 0
    b = _sym(scalar_factor("beta", True, N))
    assert sympy.simplify(b - (q**2 * u**2 - q**(2 * N)) / (q**(2 * N + 2) - u**2)) == 0
    for tag in ("gamma", "alpha", "beta"):
        assert _sym(scalar_factor(tag, False, N)) == 1


@pytest.mark.parametrize("N", [2, 4, 6])
def test_gamma_alpha_beta_consistency(N):
    g = scalar_factor("gamma", True, N)
    a, b = scalar_factor("alpha", True, N), scalar_factor("beta", True, N)
    assert b / a == g.subs(-2) / g


def test_central_series_leading_terms():
    P = alg.build("yqtw_o", 2, 2)
    c = central_series("c_series", P)
    assert c.restrict(0, 0) == P.one((0, 0))
    A = alg.build("uqaffine", 2, 1)
    z = central_series("z_minus", A)
    d = qdet(gen_matrix(A, "Lminus"))
    assert (z * d.subs_u(-2)).nf() == d
