import numpy as np
import pytest

from lbpadapt.errors import ModelError, SolverError
from lbpadapt.fixation import solve_fixation, stationary_pmf
from lbpadapt.ibm import (
    PopulationState,
    SimConfig,
    empirical_size_histogram,
    run_ibm,
    single_type_state,
    two_type_mc_fixation,
    two_type_state,
    wilson_interval,
)
from lbpadapt.model import TwoTypeRates, constant_model, parse_model


def test_sim_config_validation():
    with pytest.raises(ModelError):
        SimConfig(gamma=0.0, t_end=1.0, seed=0)
    with pytest.raises(ModelError):
        SimConfig(gamma=0.5, t_end=-1.0, seed=0)
    with pytest.raises(ModelError):
        SimConfig(gamma=0.5, t_end=1.0, seed=0, record="everything")


def test_determinism_same_seed_same_path():
    m = parse_model("k=1; b=1; c=1; mu=0.5\n[mutation]\nsigma=0.1")
    cfg = SimConfig(gamma=1.0, t_end=30.0, seed=123, record="full")
    p1 = run_ibm(m, cfg, single_type_state(0.0, 3))
    p2 = run_ibm(m, cfg, single_type_state(0.0, 3))
    assert len(p1) == len(p2)
    for a, b in zip(p1, p2):
        assert a.time == b.time
        assert a.groups == b.groups


def test_population_never_extinct():
    # death rate is zero at size one, so N >= 1 along every path
    m = constant_model(b=0.2, c=5.0)
    cfg = SimConfig(gamma=1.0, t_end=300.0, seed=7, record="full")
    path = run_ibm(m, cfg, single_type_state(0.0, 1))
    assert min(s.total_size() for s in path) == 1


def test_singleton_excludes_self_competition():
    from lbpadapt.ibm import _Groups

    m = constant_model(b=1.0, c=7.0)
    groups = _Groups(m, single_type_state(0.0, 1))
    assert groups.death_rates() == [0.0]


def test_two_types_absorb_without_mutation():
    m = constant_model(b=1.0, c=1.0, mu=0.0)
    cfg = SimConfig(gamma=1.0, t_end=500.0, seed=3, record="final")
    path = run_ibm(m, cfg, two_type_state(0.0, 3, 1.0, 2))
    assert path[-1].num_types() == 1


def test_mutation_creates_new_types():
    m = parse_model("k=1; b=2; c=0.5; mu=1\n[mutation]\nsigma=0.05")
    cfg = SimConfig(gamma=1.0, t_end=10.0, seed=11, record="full")
    path = run_ibm(m, cfg, single_type_state(0.0, 3))
    assert max(s.num_types() for s in path) >= 2


def test_debug_rate_bookkeeping():
    m = parse_model("k=1; b=1.5; c=0.7; mu=0.8\n[mutation]\nsigma=0.2")
    cfg = SimConfig(gamma=1.0, t_end=40.0, seed=5, record="final", debug_rates=True)
    run_ibm(m, cfg, single_type_state(0.0, 2))  # raises if totals drift


def test_sampled_recording_grid():
    m = constant_model(b=1.0, c=1.0)
    cfg = SimConfig(gamma=1.0, t_end=10.0, seed=1, record="sampled", record_dt=1.0)
    path = run_ibm(m, cfg, single_type_state(0.0, 2))
    times = [s.time for s in path]
    assert times == pytest.approx(list(np.arange(0.0, 11.0)))


def test_stationary_occupancy_matches_conditioned_poisson():
    m = constant_model(b=1.0, c=1.0)
    cfg = SimConfig(gamma=1.0, t_end=3000.0, seed=42, record="sampled", record_dt=1.0)
    path = run_ibm(m, cfg, single_type_state(0.0, 2))
    hist = empirical_size_histogram(path, burn_in=300.0)
    tv = 0.5 * sum(abs(hist.get(n, 0.0) - stationary_pmf(1.0, n)) for n in range(1, 40))
    assert tv <= 0.04


def test_histogram_point_mass_and_errors():
    states = [PopulationState(t, {(0.0,): 3}) for t in (0.0, 1.0, 2.0, 5.0)]
    hist = empirical_size_histogram(states, burn_in=0.5)
    assert hist == {3: pytest.approx(1.0)}
    with pytest.raises(SolverError):
        empirical_size_histogram(states, burn_in=5.0)
    with pytest.raises(SolverError):
        empirical_size_histogram(states[:1], burn_in=0.0)


def test_explosion_guard():
    m = constant_model(b=5.0, c=1e-9, c_min=1e-12)
    cfg = SimConfig(gamma=1.0, t_end=1e9, seed=0, record="final")
    with pytest.raises(SolverError):
        run_ibm(m, cfg, single_type_state(0.0, 1_000_000))


# --- two-type Monte Carlo ------------------------------------------------------

def test_mc_degenerate_inputs():
    r = TwoTypeRates(1, 1, 1, 1, 1, 1)
    assert two_type_mc_fixation(r, 0, 5, 10, seed=0) == (1.0, (1.0, 1.0))
    assert two_type_mc_fixation(r, 5, 0, 10, seed=0) == (0.0, (0.0, 0.0))
    with pytest.raises(ModelError):
        two_type_mc_fixation(r, 1, 1, 0, seed=0)


def test_mc_neutral_covers_half():
    r = TwoTypeRates(1, 1, 1, 1, 1, 1)
    est, (lo, hi) = two_type_mc_fixation(r, 1, 1, 20_000, seed=9)
    assert lo <= 0.5 <= hi
    est2, (lo2, hi2) = two_type_mc_fixation(r, 3, 1, 20_000, seed=10)
    assert lo2 <= 0.25 <= hi2


def test_mc_agrees_with_solver():
    r = TwoTypeRates(1, 1.1, 1, 1, 1, 1)
    u = solve_fixation(r).prob(1, 1)
    est, (lo, hi) = two_type_mc_fixation(r, 1, 1, 50_000, seed=21)
    assert lo <= u <= hi


def test_mc_deterministic_and_chunk_invariant():
    r = TwoTypeRates(1, 1, 1, 1, 1, 1)
    a = two_type_mc_fixation(r, 2, 3, 25_000, seed=4)
    b = two_type_mc_fixation(r, 2, 3, 25_000, seed=4)
    assert a == b


def test_wilson_interval_basics():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    lo0, hi0 = wilson_interval(0, 100)
    assert lo0 == 0.0 and hi0 > 0.0
    lo1, hi1 = wilson_interval(100, 100)
    assert hi1 == 1.0 and lo1 < 1.0
