"""Acceptance suite: one callable check per release criterion.

Each criterion returns a :class:`CriterionResult` with the measured
numbers in ``detail``; both the ``verify`` CLI subcommand and the pytest
acceptance module drive these functions and report one line per
criterion.  Tolerances are pinned here, not configurable.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .diffusion import DiffusionConfig, drift_diffusion_coeffs, euler_maruyama, large_k_drift, run_ensemble
from .fixation import chi_for_rates, chi_neutral, solve_fixation, stationary_pmf
from .ibm import SimConfig, empirical_size_histogram, run_ibm, single_type_state, two_type_mc_fixation, wilson_interval, Z99
from .invasibility import _g_table, _solve_grids, a_coeffs, curve_sweep, fitness_gradient, invasibility_g
from .model import TwoTypeRates, constant_model, parse_model
from .tss import run_tss
from .fixation import invasion_fitness


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{self.cid:>2}] {status}  {self.seconds:7.1f}s  {self.name}: {self.detail}"


def _result(cid, name, t0, passed, detail, budget):
    seconds = time.time() - t0
    if seconds > budget:
        passed = False
        detail += f" [exceeded {budget:.0f}s budget]"
    return CriterionResult(cid=cid, name=name, passed=passed, detail=detail, seconds=seconds)


def criterion_1(ctx=None, jobs=1):
    """Neutral fixation equals the initial mutant frequency on n+m <= 20."""
    t0 = time.time()
    table = solve_fixation(TwoTypeRates(1, 1, 1, 1, 1, 1))
    worst = 0.0
    for total in range(2, 21):
        for n in range(1, total):
            worst = max(worst, abs(table.prob(n, total - n) - (total - n) / total))
    return _result(1, "neutral fixation exactness", t0, worst <= 1e-7,
                   f"max |u - m/(n+m)| = {worst:.2e} (tol 1e-7)", budget=10)


def criterion_2(ctx=None, jobs=1):
    """Size-biased sum over neutral solves reproduces the closed chi(x,x) form."""
    t0 = time.time()
    worst = 0.0
    for theta in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0):
        val, _ = chi_for_rates(TwoTypeRates(theta, theta, 1, 1, 1, 1))
        worst = max(worst, abs(val - chi_neutral(theta)))
    return _result(2, "chi sum vs closed neutral form", t0, worst <= 1e-8,
                   f"max |chi - chi_neutral| = {worst:.2e} over theta in 0.1..10 (tol 1e-8)",
                   budget=30)


def criterion_3(ctx=None, jobs=1):
    """Linear solver agrees with the Monte-Carlo oracle at u(1,1) for 5 rate sets."""
    t0 = time.time()
    cases = [
        ("neutral", TwoTypeRates(1, 1, 1, 1, 1, 1)),
        ("lambda=+0.1", TwoTypeRates(1, 1.1, 1, 1, 1, 1)),
        ("lambda=-0.1", TwoTypeRates(1, 0.9, 1, 1, 1, 1)),
        ("delta=+0.1", TwoTypeRates(1, 1, 1, 1, 0.9, 0.9)),
        ("alpha=+0.1", TwoTypeRates(1, 1, 1, 1.1, 1, 1.1)),
    ]
    fails = []
    details = []
    for i, (label, rates) in enumerate(cases):
        u = solve_fixation(rates).prob(1, 1)
        est, (lo, hi) = two_type_mc_fixation(rates, 1, 1, 100_000, seed=101 + i)
        ok = lo <= u <= hi
        if not ok:
            fails.append(label)
        details.append(f"{label}: u={u:.4f} mc=[{lo:.4f},{hi:.4f}]")
    return _result(3, "solver vs Monte-Carlo oracle", t0, not fails,
                   "; ".join(details), budget=120)


def criterion_4(ctx=None, jobs=1):
    """Theorem factorization: per-split g agreement and the (1-2p) structure of epsilon."""
    t0 = time.time()
    grids = _solve_grids(1.0, 1.0, min_size=11)
    table, spreads = _g_table(grids, 10)
    worst_spread = max(float(spreads[i][total]) for i in ("lambda", "delta", "alpha")
                       for total in range(3, 11))
    worst_eps_diag = max(abs(grids.v_at("epsilon", n, n)) for n in range(2, 6))
    worst_eps_spread = max(float(spreads["epsilon"][total]) for total in range(3, 11))
    ok = worst_spread <= 1e-3 and worst_eps_diag <= 1e-6 and worst_eps_spread <= 1e-2
    return _result(4, "invasibility factorization", t0, ok,
                   f"g spread = {worst_spread:.2e} (tol 1e-3), |v_eps(n,n)| = {worst_eps_diag:.2e} "
                   f"(tol 1e-6), eps spread = {worst_eps_spread:.2e} (tol 1e-2), N in 3..10",
                   budget=300)


def _sweep(ctx, jobs):
    if ctx is not None and "curve" in ctx:
        return ctx["curve"]
    curve = curve_sweep(np.geomspace(0.5, 40.0, 20), jobs=jobs)
    if ctx is not None:
        ctx["curve"] = curve
    return curve


def criterion_5(ctx=None, jobs=1):
    """a_hat_delta > a_hat_alpha > a_hat_lambda across the whole theta grid."""
    t0 = time.time()
    curve = _sweep(ctx, jobs)
    ok = bool(np.all(curve.a_hat_delta > curve.a_hat_alpha)
              and np.all(curve.a_hat_alpha > curve.a_hat_lambda))
    margins = np.minimum(curve.a_hat_delta - curve.a_hat_alpha,
                         curve.a_hat_alpha - curve.a_hat_lambda)
    return _result(5, "coefficient ordering over theta", t0, ok,
                   f"delta > alpha > lambda at all 20 points of [0.5, 40]; "
                   f"min margin = {margins.min():.3e}", budget=1200)


def criterion_6(ctx=None, jobs=1):
    """Large-theta plateaus read off the reference figures (loose bands)."""
    t0 = time.time()
    curve = _sweep(ctx, jobs)
    ad40 = float(curve.a_hat_delta[-1])
    tl40 = float(40.0 * curve.a_hat_lambda[-1])
    ta40 = float(40.0 * curve.a_hat_alpha[-1])
    ok = 0.42 <= ad40 <= 0.55 and 0.35 <= tl40 <= 0.65 and 0.35 <= ta40 <= 0.65
    return _result(6, "large-theta asymptotics", t0, ok,
                   f"ahat_delta(40) = {ad40:.4f} in [0.42, 0.55]; "
                   f"40*ahat_lambda = {tl40:.4f}, 40*ahat_alpha = {ta40:.4f} in [0.35, 0.65]",
                   budget=1200)


def criterion_7(ctx=None, jobs=1):
    """c * a_iota at fixed theta = 2 is independent of c."""
    t0 = time.time()
    rows = np.array([c * a_coeffs(2.0 * c, c) for c in (0.5, 1.0, 2.0)])
    spread = float(np.max((rows.max(axis=0) - rows.min(axis=0)) / np.abs(rows.mean(axis=0))))
    return _result(7, "dimensional collapse", t0, spread <= 1e-6,
                   f"relative spread of c*a_iota over c in {{0.5, 1, 2}} = {spread:.2e} (tol 1e-6)",
                   budget=120)


def criterion_8(ctx=None, jobs=1):
    """Long single-type run reproduces the conditioned-Poisson stationary law."""
    t0 = time.time()
    m = constant_model(b=1.0, c=1.0, mu=0.0)
    cfg = SimConfig(gamma=1.0, t_end=10_000.0, seed=2024, record="sampled", record_dt=1.0)
    path = run_ibm(m, cfg, single_type_state(0.0, 2))
    hist = empirical_size_histogram(path, burn_in=1000.0)
    support = range(1, max(max(hist), 40) + 1)
    tv = 0.5 * sum(abs(hist.get(n, 0.0) - stationary_pmf(1.0, n)) for n in support)
    return _result(8, "stationary size law (TV)", t0, tv <= 0.02,
                   f"TV distance = {tv:.4f} at theta = 1, horizon 1e4 (tol 0.02)", budget=60)


def criterion_9(ctx=None, jobs=1):
    """Thinning acceptance matches chi; symmetric kernel gives unbiased steps."""
    t0 = time.time()
    # fixed candidate: a zero-variance kernel pins y = x, acceptance = chi(x, x)
    m = parse_model("k=1; b=1; c=1; mu=1\n[mutation]\nkind = isotropic-gaussian\nsigma = 0")
    t_end = 11_000.0 / 1.5819767068693265  # ~11000 expected candidates
    path = run_tss(m, [0.0], t_end=t_end, seed=77)
    trials = path.n_candidates
    accepted = path.n_jumps()
    chi_val = invasion_fitness(m, [0.0], [0.0])
    lo, hi = wilson_interval(accepted, trials)
    ok_fixed = trials >= 10_000 and lo <= chi_val <= hi

    # symmetric competition kernel: accepted steps have zero mean
    m2 = parse_model(
        "k=1; b=1; c = 0.8 + 0.5*exp(-(x1-y1)^2); mu=1\n[mutation]\nsigma = 0.05"
    )
    path2 = run_tss(m2, [0.0], t_end=700.0, seed=78)
    steps = np.diff([s[0] for s in path2.states])
    z_stat = abs(steps.mean()) / (steps.std(ddof=1) / math.sqrt(steps.size))
    ok_sym = z_stat < Z99 and steps.size >= 100
    return _result(9, "TSS thinning correctness", t0, ok_fixed and ok_sym,
                   f"acceptance {accepted}/{trials} = {accepted/trials:.4f}, chi = {chi_val:.4f} "
                   f"in CI [{lo:.4f}, {hi:.4f}]; symmetric-model step mean z = {z_stat:.2f} "
                   f"(99% crit {Z99:.2f}, {steps.size} jumps)", budget=300)


def criterion_10(ctx=None, jobs=1):
    """Driftless ensemble is a martingale; coupled dt-halving shows order 1/2."""
    t0 = time.time()
    m = constant_model(b=1.0, c=1.0, mu=1.0, sigma=0.3)
    cfg = DiffusionConfig(dt=0.01, t_end=1.0, seed=500)
    paths = run_ensemble(m, [0.0], cfg, 1000)
    ends = np.array([p.states[-1, 0] for p in paths])
    half = Z99 * ends.std(ddof=1) / math.sqrt(ends.size)
    ok_mart = abs(ends.mean()) <= half

    # state-dependent coefficients (exact for constant ones, so EM error
    # needs a model whose theta varies along the path)
    m2 = parse_model("k=1; b = 1 + 0.2*x1^2; c = 1; mu = 1\n[mutation]\nsigma = 0.3")

    def coeffs(z):
        return drift_diffusion_coeffs(m2, z)

    n_paths, dt, steps = 400, 0.04, 25
    diffs_coarse = np.empty(n_paths)
    diffs_fine = np.empty(n_paths)
    for i in range(n_paths):
        rng = np.random.default_rng(np.random.SeedSequence((9000, i)))
        w4 = rng.standard_normal((4 * steps, 1))  # finest increments (dt/4)
        w2 = (w4[0::2] + w4[1::2]) / math.sqrt(2.0)
        w1 = (w2[0::2] + w2[1::2]) / math.sqrt(2.0)
        z1 = euler_maruyama(coeffs, [0.0], dt, steps, w1)[-1, 0]
        z2 = euler_maruyama(coeffs, [0.0], dt / 2, 2 * steps, w2)[-1, 0]
        z4 = euler_maruyama(coeffs, [0.0], dt / 4, 4 * steps, w4)[-1, 0]
        diffs_coarse[i] = abs(z1 - z2)
        diffs_fine[i] = abs(z2 - z4)
    ratio = diffs_coarse.mean() / diffs_fine.mean()
    ok_order = 1.2 <= ratio <= 1.7
    return _result(10, "diffusion martingale and order", t0, ok_mart and ok_order,
                   f"endpoint mean {ends.mean():+.4f} within ±{half:.4f}; "
                   f"dt-halving ratio = {ratio:.3f} in [1.2, 1.7]", budget=120)


def criterion_11(ctx=None, jobs=1):
    """Scaled-competition fitness gradients approach the classical limit."""
    t0 = time.time()
    base = parse_model("k=1; b = 1 + 0.1*x1; c = 1.25; mu = 1")
    limit = large_k_drift(base, [0.0])
    errors = []
    for k_div in (1, 10, 100):
        scaled = parse_model(f"k=1; b = 1 + 0.1*x1; c = {1.25 / k_div!r}; mu = 1")
        grad = fitness_gradient(scaled, [0.0])
        errors.append(float(np.linalg.norm(grad - limit) / np.linalg.norm(limit)))
    ok = errors[0] > errors[1] > errors[2] and errors[2] <= 0.05
    return _result(11, "large-K classical limit", t0, ok,
                   f"rel errors over K in {{1, 10, 100}}: "
                   + ", ".join(f"{e:.3%}" for e in errors) + " (final tol 5%)", budget=600)


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
    9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run_criteria(ids=None, jobs=1, quiet=False):
    """Run the requested criteria (all by default), printing one line each."""
    ids = sorted(CRITERIA) if ids is None else ids
    ctx = {}
    results = []
    for cid in ids:
        if cid not in CRITERIA:
            raise ValueError(f"unknown criterion {cid}")
        res = CRITERIA[cid](ctx=ctx, jobs=jobs)
        results.append(res)
        if not quiet:
            print(res.line(), flush=True)
    return results
