import numpy as np
import pytest

from mpflearn import verify
from mpflearn.verify import CHECKS, CheckResult, run_checks


class TestCheckResult:
    def test_line_format(self):
        r = CheckResult("demo", True, "x < 1", {"x": 0.123456, "ys": [1.0, 2.5]})
        assert r.line() == "[PASS] demo: x=0.123, ys=[1, 2.5] (tolerance: x < 1)"

    def test_failure_tag(self):
        assert CheckResult("demo", False, "t").line().startswith("[FAIL] demo")

    def test_to_dict(self):
        d = CheckResult("demo", True, "t", {"a": 1}, 0.5).to_dict()
        assert d == {"name": "demo", "passed": True, "tolerance": "t", "observed": {"a": 1},
                     "seconds": 0.5}


class TestRegistry:
    def test_order(self):
        assert list(CHECKS)[:3] == ["gradients", "kl-flow", "convexity"]
        assert len(CHECKS) == 12

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            run_checks(["nope"])

    def test_single(self):
        (r,) = run_checks(["specialization"])
        assert r.name == "specialization" and r.passed


class TestMutation:
    def test_missing_half_factor_detected(self, monkeypatch):
        original = verify.mpf_objective

        def tampered(*args, **kwargs):
            K, g = original(*args, **kwargs)
            return K, 2.0 * g

        monkeypatch.setattr(verify, "mpf_objective", tampered)
        result = verify.check_gradients(0)
        assert not result.passed
        assert result.observed["mpf_objective"] > 0.1

    def test_untampered_passes(self):
        assert verify.check_gradients(0).passed

    def test_gradient_errors_cover_all_objectives(self):
        worst = verify.gradient_errors(seed=1, instances=3)
        assert set(worst) == {"mpf_objective", "ising_mpf", "rbm_mpf", "hopfield_mpf_objective",
                              "pl_objective", "ica_loglik", "pmpf_objective"}
        assert max(worst.values()) < 1e-6
        assert all(np.isfinite(v) for v in worst.values())
