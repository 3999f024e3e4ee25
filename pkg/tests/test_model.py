import math

import numpy as np
import pytest

from lbpadapt.errors import ConfigError, ModelError
from lbpadapt.model import (
    MutationKernel,
    SelectionCoefficients,
    TwoTypeRates,
    constant_model,
    eval_rates,
    grad_b,
    grad_c1,
    grad_c2,
    parse_model,
    reconstruct_rates,
    selection_coefficients,
)


# --- configuration parsing --------------------------------------------------

def test_parse_constant_model():
    m = parse_model("k=1; b = 2.0; c = 1.0")
    assert m.b([0.0]) == 2.0
    assert m.c([0.3], [0.7]) == 1.0
    assert m.mu([0.0]) == 0.0  # default


def test_parse_expression_model():
    m = parse_model("k=1; b = 1 + exp(-x1^2); c = 0.5")
    assert m.b([0.0]) == pytest.approx(2.0)
    assert m.theta([0.0]) == pytest.approx(4.0)


def test_parse_sections_and_comments():
    text = """
    # scenario with gaussian competition
    [model]
    k = 2
    b = 1 + 0.1*x1          # slope along the first coordinate
    c = exp(-(x1-y1)^2 - (x2-y2)^2) + 0.5
    mu = 0.25
    c_min = 1e-6

    [mutation]
    kind = diagonal-gaussian
    sigma = 0.1, 0.2
    """
    m = parse_model(text)
    assert m.k == 2
    assert m.c_min == 1e-6
    assert m.mu([0.0, 0.0]) == 0.25
    sig = m.kernel.sigma_matrix(np.zeros(2))
    assert np.allclose(sig, np.diag([0.1, 0.2]))


def test_parse_full_gaussian_rows():
    text = "k=2; b=1; c=1\n[mutation]\nkind = full-gaussian\nsigma = 0.1 0.05\nsigma = 0.0 0.2"
    m = parse_model(text)
    assert np.allclose(m.kernel.sigma_matrix(np.zeros(2)), [[0.1, 0.05], [0.0, 0.2]])


def test_parse_malformed_expression_reports_position():
    with pytest.raises(ConfigError) as exc:
        parse_model("k=1; b = 1; c = exp((x1-y1")
    assert "column" in str(exc.value)


@pytest.mark.parametrize("text", [
    "b = 1; c = 1",                       # missing k
    "k=1; b=1",                           # missing c
    "k=1; b=1; c=1; q=2",                 # unknown key
    "k=1; b=1; c=1\n[weird]\nkind=x",     # unknown section
    "k=1; k=2; b=1; c=1",                 # duplicate key
    "k=0; b=1; c=1",                      # bad dimension
    "k=1; b=y1; c=1",                     # y in b
    "k=1; b=1; c=1; c_min = -1",          # bad c_min
    "k=1; b=1; c=1\n[mutation]\nkind = triangle",
    "k=2; b=1; c=1\n[mutation]\nkind = diagonal-gaussian\nsigma = 0.1",
])
def test_parse_rejections(text):
    with pytest.raises(ConfigError):
        parse_model(text)


# --- rate evaluation ---------------------------------------------------------

def test_eval_rates_constant():
    m = constant_model(b=2.0, c=1.0)
    r = eval_rates(m, [0.2], [-0.4])
    assert r.as_tuple() == (2.0, 2.0, 1.0, 1.0, 1.0, 1.0)


def test_eval_rates_exchangeable_at_equal_traits():
    m = parse_model("k=1; b = 1 + 0.3*x1; c = 0.6 + exp(-(x1-y1)^2)")
    r = eval_rates(m, [0.4], [0.4])
    assert r.b_x == r.b_y
    assert r.c_xx == r.c_xy == r.c_yx == r.c_yy


def test_eval_rates_linear_birth():
    m = parse_model("k=1; b = 1 + x1; c = 1")
    r = eval_rates(m, [0.0], [0.1])
    assert r.b_x == 1.0
    assert r.b_y == pytest.approx(1.1)


def test_eval_rates_c_min_violation():
    m = parse_model("k=1; b=1; c = x1 + 0.001; c_min = 0.01")
    assert eval_rates(m, [0.1], [0.1]).c_xx == pytest.approx(0.101)
    with pytest.raises(ModelError):
        eval_rates(m, [0.0], [0.0])  # c = 0.001 < c_min


def test_rates_must_be_positive():
    with pytest.raises(ModelError):
        TwoTypeRates(1, 1, 1, -0.5, 1, 1)
    with pytest.raises(ModelError):
        TwoTypeRates(1, 0, 1, 1, 1, 1)


# --- trait gradients ---------------------------------------------------------

def test_gradients_constant_model():
    m = constant_model(b=2.0, c=1.0)
    assert np.allclose(grad_b(m, [0.7]), 0.0)
    assert np.allclose(grad_c1(m, [0.7]), 0.0)
    assert np.allclose(grad_c2(m, [0.7]), 0.0)


def test_grad_b_linear():
    m = parse_model("k=1; b = 1 + x1; c = 1")
    assert grad_b(m, [0.0])[0] == pytest.approx(1.0, abs=1e-8)


def test_grad_c_symmetric_kernel_is_stationary():
    m = parse_model("k=1; b = 1; c = exp(-(x1-y1)^2) + 0.2")
    assert grad_c1(m, [0.0])[0] == pytest.approx(0.0, abs=1e-8)
    assert grad_c2(m, [0.0])[0] == pytest.approx(0.0, abs=1e-8)


def test_grad_b_quadratic_matches_analytic():
    m = parse_model("k=2; b = 1 + 0.5*x1^2 + 0.3*x1*x2; c = 1")
    x = np.array([0.8, -0.4])
    expect = np.array([0.5 * 2 * x[0] + 0.3 * x[1], 0.3 * x[0]])
    got = grad_b(m, x)
    assert np.allclose(got, expect, rtol=1e-8)


# --- selection-coefficient decomposition --------------------------------------

def test_neutral_rates_give_zero_coefficients():
    s = selection_coefficients(TwoTypeRates(1, 1, 1, 1, 1, 1))
    assert (s.lam, s.delta, s.alpha, s.epsilon) == (0.0, 0.0, 0.0, 0.0)


def test_lambda_only():
    s = selection_coefficients(TwoTypeRates(1, 1.1, 1, 1, 1, 1))
    assert s.lam == pytest.approx(0.1)
    assert s.delta == s.alpha == s.epsilon == 0.0


def test_delta_reconstruction():
    r = reconstruct_rates(SelectionCoefficients(base_b=1, base_c=1, delta=0.1))
    assert r.c_yx == pytest.approx(0.9)
    assert r.c_yy == pytest.approx(0.9)
    assert r.c_xy == 1.0
    assert r.c_xx == 1.0


def test_reconstruct_positivity_violation():
    with pytest.raises(ModelError):
        reconstruct_rates(SelectionCoefficients(base_b=1, base_c=0.05, delta=0.2))


def test_round_trip_random_rates():
    rng = np.random.default_rng(42)
    for _ in range(300):
        vals = rng.uniform(0.1, 3.0, size=6)
        r = TwoTypeRates(*vals)
        back = reconstruct_rates(selection_coefficients(r))
        assert np.allclose(r.as_tuple(), back.as_tuple(), rtol=0, atol=1e-14)


def test_coefficient_gradients_chain_rule():
    # d lambda = grad b, d delta = -grad_1 c, d alpha = grad_2 c, d eps = 0 at y = x
    m = parse_model("k=1; b = 1 + 0.2*x1; c = 1 + 0.3*x1 - 0.1*y1 + 0.05*x1*y1")
    x = np.array([0.4])
    h = 1e-6

    def coeffs_at(y):
        return selection_coefficients(eval_rates(m, x, y)).as_array()

    fd = (coeffs_at(x + h) - coeffs_at(x - h)) / (2 * h)
    expect = np.array([grad_b(m, x)[0], -grad_c1(m, x)[0], grad_c2(m, x)[0], 0.0])
    assert np.allclose(fd, expect, rtol=1e-6, atol=1e-6)


# --- mutation kernel -----------------------------------------------------------

def test_kernel_zero_mean_and_covariance():
    sig = np.array([[0.2, 0.05], [0.0, 0.1]])
    kern = MutationKernel.gaussian(2, sig)
    rng = np.random.default_rng(7)
    draws = kern.sample(np.zeros(2), rng, size=200_000)
    assert np.allclose(draws.mean(axis=0), 0.0, atol=5e-3)
    assert np.allclose(np.cov(draws.T), sig @ sig.T, atol=5e-3)


def test_kernel_kinds():
    assert MutationKernel.gaussian(2, 0.3).kind == "isotropic-gaussian"
    assert MutationKernel.gaussian(2, [0.3, 0.1]).kind == "diagonal-gaussian"
    assert MutationKernel.gaussian(2, np.eye(2)).kind == "full-gaussian"
    with pytest.raises(ModelError):
        MutationKernel.gaussian(2, [0.3, 0.1, 0.2])


def test_mu_range_enforced():
    m = parse_model("k=1; b=1; c=1; mu = 1 + x1")
    assert m.mu([0.0]) == 1.0
    with pytest.raises(ModelError):
        m.mu([0.5])
