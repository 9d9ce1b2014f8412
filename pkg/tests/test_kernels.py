"""Kernel closed forms against quadrature and finite-difference oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from streamkde.kernels import GAUSSIAN, Kernel, KernelConstants

# Frozen oracle values, computed independently from the closed forms
# (2*pi)^(-1/2) and (2*pi)^(-1/2) e^(-1/2).
K_AT_0 = 0.3989422804014327
K_AT_1 = 0.24197072451914337
R_K = 0.28209479177387814  # 1 / (2 sqrt(pi))


def test_eval_at_zero():
    assert GAUSSIAN.eval(0.0) == pytest.approx(K_AT_0, abs=1e-12)


def test_eval_at_one():
    assert GAUSSIAN.eval(1.0) == pytest.approx(K_AT_1, abs=1e-12)


@given(st.floats(-30, 30))
def test_eval_symmetry(u):
    assert GAUSSIAN.eval(u) == GAUSSIAN.eval(-u)


@given(st.floats(-30, 30))
def test_eval_nonnegative(u):
    assert GAUSSIAN.eval(u) >= 0.0


def test_eval_rejects_non_finite():
    with pytest.raises(ValueError):
        GAUSSIAN.eval(float("nan"))
    with pytest.raises(ValueError):
        GAUSSIAN.eval(float("inf"))
    with pytest.raises(ValueError):
        GAUSSIAN.eval_second_derivative(float("nan"))


def test_second_derivative_at_one_is_zero():
    assert GAUSSIAN.eval_second_derivative(1.0) == 0.0


def test_second_derivative_at_zero():
    assert GAUSSIAN.eval_second_derivative(0.0) == pytest.approx(-K_AT_0,
                                                                 abs=1e-12)


def test_second_derivative_integrates_to_zero():
    total, _ = integrate.quad(GAUSSIAN.eval_second_derivative, -12, 12)
    assert abs(total) < 1e-8


def test_constants_r_k():
    c = GAUSSIAN.constants()
    assert c.r_k == pytest.approx(R_K, abs=1e-12)
    quad, _ = integrate.quad(lambda u: GAUSSIAN.eval(u) ** 2, -12, 12)
    assert c.r_k == pytest.approx(quad, abs=1e-8)


def test_constants_mu2():
    c = GAUSSIAN.constants()
    assert c.mu2 == 1.0
    quad, _ = integrate.quad(lambda u: u * u * GAUSSIAN.eval(u), -12, 12)
    assert c.mu2 == pytest.approx(quad, abs=1e-8)


def test_constants_theta():
    c = GAUSSIAN.constants()
    assert c.theta == pytest.approx(R_K ** 0.8, abs=1e-12)
    assert c.theta == pytest.approx(0.3633423781348724, abs=1e-12)
    # theta is defined from the stored pair, exactly
    assert c.theta == c.r_k ** 0.8 * c.mu2 ** 0.4


def test_kernel_moment_quadratures():
    mass, _ = integrate.quad(GAUSSIAN.eval, -12, 12)
    first, _ = integrate.quad(lambda u: u * GAUSSIAN.eval(u), -12, 12)
    assert mass == pytest.approx(1.0, abs=1e-8)
    assert abs(first) < 1e-8


def test_second_derivative_matches_finite_difference():
    rng = np.random.default_rng(1234)
    pts = rng.uniform(-5, 5, size=100)
    eps = 1e-4
    for u in pts:
        fd = (GAUSSIAN.eval(u + eps) - 2 * GAUSSIAN.eval(u)
              + GAUSSIAN.eval(u - eps)) / eps ** 2
        assert GAUSSIAN.eval_second_derivative(u) == pytest.approx(fd,
                                                                   abs=1e-6)


def test_constants_reject_nonpositive():
    with pytest.raises(ValueError):
        KernelConstants(r_k=0.0, mu2=1.0)
    with pytest.raises(ValueError):
        KernelConstants(r_k=0.3, mu2=-1.0)


def test_array_evaluation():
    u = np.array([0.0, 1.0, -1.0])
    vals = GAUSSIAN.eval(u)
    assert vals.shape == (3,)
    assert vals[1] == vals[2]
