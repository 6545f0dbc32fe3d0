import itertools

import sympy
from hypothesis import settings
from hypothesis import strategies as st

from rttlab.scalar import RatQ

q = sympy.Symbol("q")

# exact arithmetic and sympy simplification have uneven run times
settings.register_profile("exact", deadline=None, max_examples=50)
settings.load_profile("exact")


def to_sympy(c: RatQ):
    """Independent reading of a coefficient through its canonical string."""
    s = str(c)
    assert "w" not in s, "square-root extension has no plain sympy reading"
    return sympy.sympify(s.replace("^", "**"), locals={"q": q})


def dense(op, N: int, m: int):
    """Dense sympy matrix of a SparseOp with RatQ entries, basis in lexicographic order."""
    keys = list(itertools.product(range(1, N + 1), repeat=m))
    pos = {k: n for n, k in enumerate(keys)}
    M = sympy.zeros(len(keys), len(keys))
    for r, c, v in op.items():
        M[pos[tuple(r)], pos[tuple(c)]] = to_sympy(v)
    return M


laurent = st.dictionaries(st.integers(-4, 4), st.integers(-5, 5), max_size=4).map(RatQ.laurent)
nonzero_laurent = laurent.filter(lambda x: not x.is_zero())
ratq = st.builds(lambda a, b: a / b, laurent, nonzero_laurent)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
