import json

import pytest

from rttlab import algebras as alg
from rttlab.verify import (REGISTRY, Report, default_plan, mutate, mutation_suite, override, run_identity,
                           run_suite, suite_ok)

# every identity the suite is expected to cover
REQUIRED_IDS = """
ybe r_unitarity crossing fused_antisym rtt_selfcheck jacobi_qdet inv_qdet schur_qdet cayley_qdet
muir_qdet sylvester_qdet macmahon_qdet liouville_qdet qdet_comatrix embed_twisted sbar_rel pbw_basis
sdet_factor central_ck central_finite aux_expand sdet_explicit skl_comatrix x_automorphism jacobi_sdet
inv_sdet jacobi_comatrix schur_sdet cayley_sdet muir_sdet ah_lemma macmahon_sdet sylvester_sdet
liouville_sdet
""".split()


def test_registry_audit():
    for id_ in REQUIRED_IDS:
        assert id_ in REGISTRY, id_
        ident = REGISTRY[id_]
        assert ident.anchor.strip()
        assert ident.check is not None or ident.out_of_scope
    for id_, ident in REGISTRY.items():
        assert ident.check is not None or ident.out_of_scope, id_
        assert ident.group in ("tensor", "algebra", "qdet", "sdet", "none")


def test_out_of_scope_entries_are_skipped_with_reason():
    out = [i for i, x in REGISTRY.items() if x.check is None]
    assert out
    for id_ in out:
        rep = run_identity(id_)
        assert rep.verdict == "skipped"
        assert rep.reason.startswith("out of scope")


def test_spec_examples():
    assert run_identity("jacobi_qdet", {"N": 2, "K": 1, "I": (1,), "J": (1,)}).verdict == "pass"
    assert run_identity("fused_antisym", {"N": 2, "m": 2}).verdict == "pass"


def test_default_plan_passes():
    reports = run_suite(default_plan())
    assert suite_ok(reports)
    for r in reports:
        assert (r.verdict == "skipped") == (REGISTRY[r.id].check is None), r.id


def test_pass_iff_no_residual():
    for r in run_suite(default_plan(["*qdet*", "sdet*", "ybe"])):
        assert (r.verdict == "pass") == (r.residual_terms == [] and r.verdict != "skipped")


def test_report_schema_and_determinism():
    plan = default_plan(["ybe", "jacobi_sdet", "macmahon_qdet"])
    a = [r.to_json(timing=False) for r in run_suite(plan)]
    b = [r.to_json(timing=False) for r in run_suite(plan, width=3)]
    assert a == b
    d = run_identity("ybe").to_dict()
    assert set(d) == {"id", "params", "verdict", "residual_terms", "failures", "steps", "millis"}
    assert json.loads(json.dumps(d, sort_keys=True)) == d


def test_suite_order_is_plan_order():
    plan = default_plan(["*sdet*"])
    reports = run_suite(plan, width=4)
    assert [r.id for r in reports] == [i for i, _ in plan]


def test_unknown_identity():
    with pytest.raises(ValueError):
        run_identity("no_such_identity")


def test_guards_skip():
    rep = run_identity("jacobi_qdet", {"N": 5})
    assert rep.verdict == "skipped" and "guard" in rep.reason
    rep = run_identity("sdet_explicit", {"K": 7})
    assert rep.verdict == "skipped"
    rep = run_identity("schur_sdet", {"algebra": "sp", "N": 1, "M": 1})
    assert rep.verdict == "skipped" and "symplectic" in rep.reason
    assert suite_ok([rep])


def test_budget_exhaustion_is_a_failure(monkeypatch):
    monkeypatch.setenv("RTTLAB_STEP_BUDGET", "2")
    base = alg.build("yqtw_o", 2, 2)
    fresh = base.with_rules(base.rules)
    with override(fresh):
        rep = run_identity("rtt_selfcheck", {"kind": "yqtw_o", "N": 2, "K": 2})
    assert rep.verdict == "fail"
    assert "budget" in rep.reason
    assert rep.to_dict()["failures"] == ["rewriting budget exhausted"]


def test_mutant_failure_report_has_residual_terms():
    base = alg.build("uqgl", 2)
    mutant, desc = mutate(base, 0)
    assert "times q" in desc
    with override(mutant):
        rep = run_identity("rtt_selfcheck", {"kind": "uqgl", "N": 2})
    assert rep.verdict == "fail"
    terms = rep.residual_terms
    assert terms and all(isinstance(d, int) and isinstance(w, str) and isinstance(c, str) for d, w, c in terms)
    # the override is scoped
    assert run_identity("rtt_selfcheck", {"kind": "uqgl", "N": 2}).verdict == "pass"


def test_mutations_are_detected():
    results = mutation_suite(10, seed=3)
    assert len(results) == 10
    assert all(r.detected for r in results), [r.rule for r in results if not r.detected]


def test_negative_controls_fail():
    """Readings of the statements that do not hold are registered as failing forms."""
    assert run_identity("ah_lemma", {"N": 2, "m": 3, "form": "literal"}).verdict == "fail"
    assert run_identity("schur_sdet", {"N": 1, "M": 1, "K": 1, "form": "second_literal"}).verdict == "fail"


def test_report_dataclass_round_trip():
    r = Report("x", {"N": 2, "I": (1, 2)}, "pass")
    d = r.to_dict(timing=False)
    assert d["params"] == {"I": [1, 2], "N": 2}
    assert "steps" not in d
    assert json.loads(r.to_json(False)) == d
