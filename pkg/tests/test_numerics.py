"""
Tests for random streams, Gaussian log-densities and gradient checks
"""
import math

import pytest
import torch
import torch.nn as nn

from lpt.errors import DomainError, GradientError, NonFiniteError, ValidationError
from lpt.numerics import (
    RngStream,
    ensure_finite,
    finite_diff_check,
    gaussian_sample,
    grad,
    logpdf_normal,
    numeric_grad,
)


def test_gaussian_sample_determinism():
    """Same seed and stream give identical draws; distinct streams differ"""
    a = gaussian_sample([3], RngStream(42, 1))
    b = gaussian_sample([3], RngStream(42, 1))
    c = gaussian_sample([3], RngStream(42, 2))
    assert torch.equal(a, b)
    assert not torch.equal(a, c)
    assert a.dtype == torch.float64
    print("✓ Stream determinism test passed")


def test_gaussian_sample_rejects_empty_shape():
    with pytest.raises(ValidationError):
        gaussian_sample([], RngStream(0))
    with pytest.raises(ValidationError):
        gaussian_sample([0, 3], RngStream(0))


def test_gaussian_sample_moments():
    """10^6 draws have mean within 0.01 of 0 and variance within 0.01 of 1"""
    x = gaussian_sample([1_000_000], RngStream(0, 5))
    assert abs(float(x.mean())) < 0.01
    assert abs(float(x.var()) - 1.0) < 0.01


def test_derived_streams():
    assert RngStream.derive(3, "shuffle", 1).stream_id == RngStream.derive(3, "shuffle", 1).stream_id
    assert RngStream.derive(3, "shuffle", 1).stream_id != RngStream.derive(3, "shuffle", 2).stream_id
    assert RngStream.derive(3, "a").numpy.random() == RngStream.derive(3, "a").numpy.random()


def test_logpdf_normal_values():
    """Analytic values of the Gaussian log-density"""
    zero = torch.tensor(0.0, dtype=torch.float64)
    assert float(logpdf_normal(zero, zero, 1.0 / (2.0 * math.pi))) == pytest.approx(0.0, abs=1e-12)
    assert float(logpdf_normal(zero, zero, 1.0)) == pytest.approx(-0.9189385, abs=1e-7)
    x = torch.tensor([1.0, 0.0], dtype=torch.float64)
    assert float(logpdf_normal(x, torch.zeros(2, dtype=torch.float64), 1.0)) == pytest.approx(
        -math.log(2 * math.pi) - 0.5, abs=1e-12
    )
    print("✓ Log-density values test passed")


def test_logpdf_normal_rejects_bad_input():
    with pytest.raises(DomainError):
        logpdf_normal(torch.zeros(2, dtype=torch.float64), torch.zeros(2, dtype=torch.float64), 0.0)
    with pytest.raises(ValidationError):
        logpdf_normal(torch.zeros(2, dtype=torch.float64), torch.zeros(3, dtype=torch.float64), 1.0)


def test_grad_examples():
    """grad of x'x is 2x; the standard normal score at 3 is -3"""
    x = torch.tensor([1.0, 2.0], dtype=torch.float64)
    (g,) = grad(lambda v: (v * v).sum(), x)
    assert torch.allclose(g, torch.tensor([2.0, 4.0], dtype=torch.float64))
    (g,) = grad(lambda v: logpdf_normal(v, torch.zeros_like(v), 1.0), torch.tensor([3.0], dtype=torch.float64))
    assert float(g) == pytest.approx(-3.0)


def test_grad_requires_differentiable_scalar():
    x = torch.ones(3, dtype=torch.float64)
    with pytest.raises(GradientError):
        grad(lambda v: v * 2, x)
    with pytest.raises(GradientError):
        grad(lambda v: torch.tensor(1.0), x)


def test_mlp_gradient_matches_finite_differences():
    """A random 3-layer MLP passes the central-difference check at 1e-6"""
    torch.manual_seed(0)
    mlp = nn.Sequential(nn.Linear(4, 8), nn.Tanh(), nn.Linear(8, 8), nn.GELU(), nn.Linear(8, 1)).double()
    x = torch.randn(4, dtype=torch.float64)
    assert finite_diff_check(lambda v: mlp(v).sum(), [x]) <= 1e-6
    print("✓ MLP gradient check passed")


def test_finite_diff_check_sanity():
    """Exact for linear functions, tight for sin, and catches a corrupted gradient"""
    x = torch.tensor([0.5, -1.0, 2.0], dtype=torch.float64)
    w = torch.tensor([1.5, -2.0, 0.25], dtype=torch.float64)
    assert finite_diff_check(lambda v: (w * v).sum(), [x]) <= 1e-10

    p = torch.tensor([0.3], dtype=torch.float64)
    assert finite_diff_check(lambda v: torch.sin(v).sum(), [p], epsilon=1e-5) <= 1e-8

    (g,) = grad(lambda v: (v**3).sum(), x)
    g = g.clone()
    g[0] += 0.1
    assert finite_diff_check(lambda v: (v**3).sum(), [x], analytic=[g]) >= 0.05
    print("✓ Finite-difference detector test passed")


def test_numeric_grad_epsilon_range():
    x = torch.zeros(2, dtype=torch.float64)
    with pytest.raises(DomainError):
        numeric_grad(lambda v: v.sum(), [x], epsilon=1e-2)
    with pytest.raises(DomainError):
        finite_diff_check(lambda v: v.sum(), [x], epsilon=1e-9)


def test_ensure_finite():
    t = torch.tensor([1.0, float("nan")])
    with pytest.raises(NonFiniteError) as info:
        ensure_finite(t, "chain state")
    assert "chain state" in str(info.value)
    assert info.value.diagnostics["count"] == 1
