"""
Tests for the numerical self-check suites
"""
import pytest

from lpt.errors import ValidationError
from lpt.verify import (
    check_gradient_identity,
    check_gradient_scaling,
    check_gradients,
    check_guidance_sharpening,
    check_langevin,
    check_posterior_oracle,
    run_suite,
)


def test_gradcheck_suite_passes():
    """Every building block agrees with central differences"""
    results = check_gradients(seed=0)
    failed = [(r.name, r.value) for r in results if not r.passed]
    assert not failed, f"failed gradient checks: {failed}"
    names = {r.name for r in results}
    assert {"logpdf_normal", "posterior_score", "plan_score", "parameters[prior]"} <= names
    print(f"✓ {len(results)} gradient checks passed")


@pytest.mark.parametrize("op", ["logpdf_normal", "prior_transform", "parameters[generator]"])
def test_corrupted_operation_is_caught(op):
    """A perturbed analytic gradient fails exactly the checks of that operation"""
    results = check_gradients(seed=0, corrupt_op=op)
    failed = {r.name for r in results if not r.passed}
    assert failed, f"corrupting {op} went unnoticed"
    assert all(name == op or name.split("[")[0] == op for name in failed), failed


def test_corrupted_gradient_identity_is_caught():
    results = check_gradient_identity(seed=0, instances=1, n_samples=2000, corrupt_op="gradient_identity")
    assert not results[0].passed


@pytest.mark.slow
def test_langevin_checks():
    """ULA variance, w=0 stationarity and the w=1 identity"""
    results = check_langevin(seed=0)
    failed = [(r.name, r.value) for r in results if not r.passed]
    assert not failed, failed


@pytest.mark.slow
def test_posterior_matches_oracle():
    """Langevin moments agree with the exact posterior on five random instances"""
    results = check_posterior_oracle(seed=0, instances=5)
    failed = [(r.name, r.value) for r in results if not r.passed]
    assert not failed, failed
    assert len(results) == 10


@pytest.mark.slow
def test_guidance_sharpens_the_plan():
    """Plan variance along the return direction follows the tempered oracle and shrinks as w grows"""
    results = check_guidance_sharpening(seed=0, weights=(0.5, 1.0, 2.0, 4.0, 8.0), chains=5000)
    failed = [(r.name, r.value) for r in results if not r.passed]
    assert not failed, failed
    assert results[-1].name == "guidance_monotone"


@pytest.mark.slow
def test_gradient_error_shrinks_with_samples():
    """Quadrupling the sample count roughly halves the learning-gradient error"""
    result = check_gradient_scaling(seed=0)
    assert result.passed, f"error ratio {result.value:.3f}"


def test_unknown_suite():
    with pytest.raises(ValidationError):
        run_suite("everything")


def test_results_serialize():
    result = run_suite("gradcheck")[0]
    payload = result.to_dict()
    assert set(payload) == {"name", "passed", "value", "threshold", "seconds"}
