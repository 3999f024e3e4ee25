import math

import numpy as np
import pytest

from lbpadapt.diffusion import (
    DiffusionConfig,
    cead_rhs,
    classical_fitness,
    classical_limit,
    drift_diffusion_coeffs,
    ensemble_summary_csv,
    euler_maruyama,
    large_k_drift,
    run_diffusion,
    run_ensemble,
)
from lbpadapt.errors import SolverError, TableRangeError
from lbpadapt.fixation import chi_neutral
from lbpadapt.invasibility import default_ahat_table
from lbpadapt.model import constant_model, grad_b, parse_model
from lbpadapt.tss import beta

CONST = constant_model(b=1.0, c=1.0, mu=1.0, sigma=0.3)


def test_config_validation():
    with pytest.raises(SolverError):
        DiffusionConfig(dt=2.0, t_end=1.0, seed=0)
    with pytest.raises(SolverError):
        DiffusionConfig(dt=0.0, t_end=1.0, seed=0)
    with pytest.raises(SolverError):
        DiffusionConfig(dt=0.1, t_end=1.0, seed=0, coeff_source="oracle")


def test_constant_model_pure_drift_free_noise():
    drift, noise = drift_diffusion_coeffs(CONST, [0.0])
    assert drift[0] == 0.0
    expect_noise = math.sqrt(beta(CONST, [0.0]) * chi_neutral(1.0)) * 0.3
    assert noise[0, 0] == pytest.approx(expect_noise, rel=1e-12)


def test_table_and_direct_sources_agree():
    m = parse_model("k=1; b = 1 + 0.1*x1; c = 1; mu = 1\n[mutation]\nsigma=0.3")
    d_tab, n_tab = drift_diffusion_coeffs(m, [0.0], source="interp-table")
    d_dir, n_dir = drift_diffusion_coeffs(m, [0.0], source="direct-solve")
    assert d_tab[0] == pytest.approx(d_dir[0], rel=1e-3)
    assert np.allclose(n_tab, n_dir, rtol=1e-12)


def test_drift_assembles_beta_covariance_gradient():
    from lbpadapt.invasibility import default_ahat_table, fitness_gradient

    m = parse_model("k=2; b = 1 + 0.1*x1 - 0.05*x2; c = 1; mu = 0.5\n"
                    "[mutation]\nkind = diagonal-gaussian\nsigma = 0.3, 0.2")
    z = np.array([0.1, -0.2])
    drift, noise = drift_diffusion_coeffs(m, z)
    sig = m.kernel.sigma_matrix(z)
    expect = beta(m, z) * (sig @ sig.T) @ fitness_gradient(m, z, table=default_ahat_table())
    assert np.allclose(drift, expect, rtol=0, atol=0)
    # noise has full rank wherever sigma does
    assert np.linalg.matrix_rank(noise) == 2


def test_theta_outside_table_range_errors():
    m = constant_model(b=100.0, c=1.0, mu=1.0)  # theta = 100 > 40
    with pytest.raises(TableRangeError):
        drift_diffusion_coeffs(m, [0.0], source="interp-table")


def test_zero_noise_kernel_freezes_path():
    m = constant_model(b=1.0, c=1.0, mu=1.0, sigma=0.0)
    cfg = DiffusionConfig(dt=0.1, t_end=1.0, seed=1)
    path = run_diffusion(m, [0.7], cfg)
    assert np.all(path.states == 0.7)


def test_seed_determinism():
    cfg = DiffusionConfig(dt=0.05, t_end=1.0, seed=77)
    p1 = run_diffusion(CONST, [0.0], cfg)
    p2 = run_diffusion(CONST, [0.0], cfg)
    assert np.array_equal(p1.states, p2.states)
    assert p1.times == pytest.approx(np.arange(0.0, 1.05, 0.05))


def test_martingale_under_zero_gradient():
    cfg = DiffusionConfig(dt=0.02, t_end=1.0, seed=7)
    paths = run_ensemble(CONST, [0.0], cfg, 300)
    ends = np.array([p.states[-1, 0] for p in paths])
    half = 2.5758 * ends.std(ddof=1) / math.sqrt(ends.size)
    assert abs(ends.mean()) <= half
    # endpoint variance matches beta * chi * sigma^2 * T
    theory = beta(CONST, [0.0]) * chi_neutral(1.0) * 0.09
    assert ends.var(ddof=1) == pytest.approx(theory, rel=0.25)


def test_euler_maruyama_coupled_refinement():
    m = parse_model("k=1; b = 1 + 0.2*x1^2; c = 1; mu = 1\n[mutation]\nsigma=0.3")

    def coeffs(z):
        return drift_diffusion_coeffs(m, z)

    steps, dt = 20, 0.05
    rng = np.random.default_rng(4)
    d1 = np.empty(200)
    d2 = np.empty(200)
    for i in range(200):
        w4 = rng.standard_normal((4 * steps, 1))
        w2 = (w4[0::2] + w4[1::2]) / math.sqrt(2.0)
        w1 = (w2[0::2] + w2[1::2]) / math.sqrt(2.0)
        z1 = euler_maruyama(coeffs, [0.0], dt, steps, w1)[-1, 0]
        z2 = euler_maruyama(coeffs, [0.0], dt / 2, 2 * steps, w2)[-1, 0]
        z4 = euler_maruyama(coeffs, [0.0], dt / 4, 4 * steps, w4)[-1, 0]
        d1[i] = abs(z1 - z2)
        d2[i] = abs(z2 - z4)
    assert 1.1 <= d1.mean() / d2.mean() <= 1.8  # strong order 1/2


def test_large_k_drift_values():
    assert np.allclose(large_k_drift(CONST, [0.0]), 0.0)
    m = parse_model("k=1; b = 1 + 0.1*x1; c = 2")
    # (1/2b)(grad b - theta grad_1 c) with constant c: 0.1 / 2
    assert large_k_drift(m, [0.0])[0] == pytest.approx(0.05, abs=1e-8)


def test_chi_resident_vanishes_at_large_theta():
    vals = [chi_neutral(th) for th in (1.0, 10.0, 100.0, 1000.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-3


def test_classical_fitness_zero_on_diagonal():
    m = parse_model("k=1; b = 1 + 0.2*exp(-x1^2); c = 0.8 + 0.5*exp(-(x1-y1)^2)")
    for x in (-0.5, 0.0, 0.8):
        assert classical_fitness(m, [x], [x]) == pytest.approx(0.0, abs=1e-12)


def test_classical_fitness_slope_equals_twice_b_times_limit_drift():
    m = parse_model("k=1; b = 1 + 0.1*x1; c = 1.5 + 0.2*exp(-(x1-y1)^2)")
    x = np.array([0.2])
    h = 1e-6
    fd = (classical_fitness(m, x, x + h) - classical_fitness(m, x, x - h)) / (2 * h)
    assert fd == pytest.approx(2.0 * m.b(x) * large_k_drift(m, x)[0], rel=1e-5)


def test_cead_rhs():
    assert cead_rhs(CONST, [0.0])[0] == 0.0
    m = parse_model("k=1; b = 1 + 0.1*x1; c = 2; mu = 0.5\n[mutation]\nsigma=0.3")
    x = np.array([0.0])
    expect = 0.5 * 0.09 * 0.5 * m.theta(x) * grad_b(m, x)[0]
    assert cead_rhs(m, x)[0] == pytest.approx(expect, rel=1e-8)
    lim = classical_limit(m)
    assert lim.n_bar(x) == pytest.approx(0.5)
    assert lim.rhs(x)[0] == pytest.approx(expect, rel=1e-8)
    assert lim.f(x, x) == pytest.approx(0.0, abs=1e-12)


def test_path_and_ensemble_csv(tmp_path):
    cfg = DiffusionConfig(dt=0.1, t_end=0.5, seed=3)
    paths = run_ensemble(CONST, [0.2], cfg, 4)
    p_out = tmp_path / "path.csv"
    paths[0].to_csv(p_out)
    lines = p_out.read_text().splitlines()
    assert lines[0] == "time,x1"
    assert len(lines) == 7
    e_out = tmp_path / "ens.csv"
    ensemble_summary_csv(paths, e_out)
    header = e_out.read_text().splitlines()[0]
    assert header == "time,mean_x1,var_x1"
    data = np.loadtxt(e_out, delimiter=",", skiprows=1)
    assert data.shape == (6, 3)
    assert data[0, 1] == pytest.approx(0.2)
    assert data[0, 2] == 0.0
