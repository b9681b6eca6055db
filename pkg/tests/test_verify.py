import io

import pytest

from useanet import blocks, verify


@pytest.mark.parametrize("name", sorted(verify.CHECKS))
def test_check_passes(name):
    (result,) = verify.run(seed=0, names=[name])
    assert result.passed, result.line()


def test_checks_pass_on_other_seeds():
    for seed in (1, 2):
        failed = [r.line() for r in verify.run(seed) if not r.passed]
        assert not failed


def test_oracle_suites_use_at_least_100_cases():
    assert verify.ORACLE_CASES >= 100 and verify.ORACLE_TOL == 1e-5


def test_injected_stencil_fault_is_named():
    with verify.inject_fault("laplacian-stencil"):
        results = {r.name: r for r in verify.run(0)}
    assert not results["laplacian-stencil"].passed
    assert results["oracle-conv2d"].passed
    assert blocks.laplacian_kernel(2).sum() == 0  # restored afterwards


def test_unknown_fault_rejected():
    with pytest.raises(ValueError):
        with verify.inject_fault("nope"):
            pass


def test_report_summary_line():
    out = io.StringIO()
    verify.report([verify.CheckResult("a", True, "ok", 0.0), verify.CheckResult("b", False, "bad", 0.0)], out)
    assert out.getvalue().strip().endswith("1/2 checks passed; failing: b")


def test_crashing_check_counts_as_failure(monkeypatch):
    def boom(rng):
        raise RuntimeError("kaput")
    monkeypatch.setitem(verify.CHECKS, "zz-boom", boom)
    (r,) = verify.run(0, ["zz-boom"])
    assert not r.passed and "kaput" in r.detail
