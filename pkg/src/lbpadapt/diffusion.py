"""Canonical diffusion of the dominant trait, and its large-population limit.

In the small-mutation limit the trait substitution sequence converges to
the diffusion

    dZ_t = beta(Z) sigma^2(Z) . grad_2 chi(Z, Z) dt
           + sqrt(beta(Z) chi(Z, Z)) sigma(Z) . dB_t,

whose drift follows the fitness gradient and whose noise term is the
residual genetic drift.  The integrator is Euler-Maruyama (the acceptance
tests only need strong order 1/2; Milstein would be the swap point if the
state-dependent diffusion coefficient ever warranted it).  Fitness-gradient
coefficients come either from the precomputed a_hat interpolation table
(fast, bounded theta range) or from fresh fixation solves.

Dividing the competition kernel by K and letting K grow recovers the
classical canonical equation: the drift gradient tends to

    (1 / 2 b(x)) (grad b(x) - theta(x) grad_1 c(x, x)),

chi(x, x) tends to 0, and with invasion fitness f(x, y) = b(y) - c(y, x)
theta(x) the limiting ODE is dx/dt = 1/2 sigma^2 mu n_bar d_2 f(x, x).
The equilibrium size n_bar(x) is identified with theta(x), the scaled
deterministic equilibrium (see the repo notes; the source material leaves
n_bar without a formula).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .fixation import chi_neutral
from .invasibility import AhatTable, default_ahat_table, fitness_gradient
from .model import ModelSpec, as_trait, grad_b, grad_c1
from .tss import beta

COEFF_SOURCES = ("interp-table", "direct-solve")


@dataclass(frozen=True)
class DiffusionConfig:
    """Euler-Maruyama controls on the rescaled TSS clock."""

    dt: float
    t_end: float
    seed: int
    coeff_source: str = "interp-table"

    def __post_init__(self):
        if not 0.0 < self.dt <= self.t_end:
            raise SolverError(f"need 0 < dt <= t_end, got dt={self.dt}, t_end={self.t_end}")
        if self.coeff_source not in COEFF_SOURCES:
            raise SolverError(f"coeff_source must be one of {COEFF_SOURCES}")

    def n_steps(self):
        return int(round(self.t_end / self.dt))


@dataclass
class DiffusionPath:
    times: np.ndarray
    states: np.ndarray  # (n_steps + 1, k)

    def to_csv(self, out_path):
        k = self.states.shape[1]
        lines = ["time," + ",".join(f"x{i+1}" for i in range(k))]
        for t, z in zip(self.times, self.states):
            lines.append(f"{t:.17g}," + ",".join(f"{c:.17g}" for c in z))
        with open(out_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def drift_diffusion_coeffs(m: ModelSpec, z, source="interp-table", table: AhatTable | None = None):
    """(drift vector, noise scale matrix) of the canonical diffusion at z.

    drift = beta sigma sigma^T grad_2 chi(z, z); noise scale =
    sqrt(beta chi(z, z)) sigma(z) with the neutral closed form for chi.
    """
    z = as_trait(z, m.k)
    if source not in COEFF_SOURCES:
        raise SolverError(f"coeff source must be one of {COEFF_SOURCES}")
    if source == "interp-table":
        tab = table if table is not None else default_ahat_table()
        grad_chi = fitness_gradient(m, z, table=tab)
    else:
        grad_chi = fitness_gradient(m, z)
    b_rate = beta(m, z)
    sig = m.kernel.sigma_matrix(z)
    drift = b_rate * (sig @ sig.T) @ grad_chi
    noise = np.sqrt(b_rate * chi_neutral(m.theta(z))) * sig
    return drift, noise


def euler_maruyama(coeff_fn, z0, dt, n_steps, increments):
    """Generic EM sweep; ``increments`` are standard normals, shape (n_steps, k).

    Exposed separately so coupled-noise refinement studies can reuse the
    same Brownian path at several step sizes.
    """
    z = np.array(z0, dtype=float)
    out = np.empty((n_steps + 1, z.size))
    out[0] = z
    sqdt = np.sqrt(dt)
    for step in range(n_steps):
        try:
            drift, noise = coeff_fn(z)
        except SolverError as exc:
            raise SolverError(f"coefficients failed at t={step * dt}: {exc}") from exc
        z = z + drift * dt + sqdt * (noise @ increments[step])
        out[step + 1] = z
    return out


def run_diffusion(m: ModelSpec, z0, cfg: DiffusionConfig, table: AhatTable | None = None):
    """Integrate the canonical diffusion; reproducible from cfg.seed."""
    z0 = as_trait(z0, m.k)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_steps()
    increments = rng.standard_normal((n, m.k))

    def coeffs(z):
        return drift_diffusion_coeffs(m, z, source=cfg.coeff_source, table=table)

    states = euler_maruyama(coeffs, z0, cfg.dt, n, increments)
    return DiffusionPath(times=np.arange(n + 1) * cfg.dt, states=states)


def run_ensemble(m: ModelSpec, z0, cfg: DiffusionConfig, n_paths, table: AhatTable | None = None):
    """Independent paths on per-path substreams SeedSequence((seed, i))."""
    z0 = as_trait(z0, m.k)
    n = cfg.n_steps()
    times = np.arange(n + 1) * cfg.dt

    def coeffs(z):
        return drift_diffusion_coeffs(m, z, source=cfg.coeff_source, table=table)

    paths = []
    for i in range(n_paths):
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, i)))
        states = euler_maruyama(coeffs, z0, cfg.dt, n, rng.standard_normal((n, m.k)))
        paths.append(DiffusionPath(times=times, states=states))
    return paths


def ensemble_summary_csv(paths, out_path):
    """`time,mean...,var...` across an ensemble of equally timed paths."""
    times = paths[0].times
    stack = np.stack([p.states for p in paths])  # (paths, steps+1, k)
    mean = stack.mean(axis=0)
    var = stack.var(axis=0, ddof=1)
    k = mean.shape[1]
    header = (
        "time,"
        + ",".join(f"mean_x{i+1}" for i in range(k))
        + ","
        + ",".join(f"var_x{i+1}" for i in range(k))
    )
    lines = [header]
    for j, t in enumerate(times):
        lines.append(
            f"{t:.17g},"
            + ",".join(f"{v:.17g}" for v in mean[j])
            + ","
            + ",".join(f"{v:.17g}" for v in var[j])
        )
    with open(out_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def large_k_drift(m: ModelSpec, x):
    """Limit of grad_2 chi_K(x, x) as the competition kernel is divided by K.

    Uses the unscaled model's theta(x) = b(x)/c(x, x):
    (1 / 2b) (grad b - theta grad_1 c).
    """
    x = as_trait(x, m.k)
    b = m.b(x)
    return (grad_b(m, x) - m.theta(x) * grad_c1(m, x)) / (2.0 * b)


def classical_fitness(m: ModelSpec, x, y):
    """Invasion exponent of the classical canonical equation: b(y) - c(y, x) theta(x)."""
    x = as_trait(x, m.k)
    y = as_trait(y, m.k)
    return m.b(y) - m.c(y, x) * m.theta(x)


def cead_rhs(m: ModelSpec, x):
    """Right-hand side of the classical canonical equation at x.

    1/2 sigma sigma^T mu(x) n_bar(x) d_2 f(x, x) with n_bar(x) := theta(x)
    and d_2 f(x, x) = grad b(x) - theta(x) grad_1 c(x, x).
    """
    x = as_trait(x, m.k)
    sig = m.kernel.sigma_matrix(x)
    d2f = grad_b(m, x) - m.theta(x) * grad_c1(m, x)
    return 0.5 * (sig @ sig.T) @ (m.mu(x) * m.theta(x) * d2f)


@dataclass(frozen=True)
class ClassicalLimit:
    """The K -> infinity degeneration: fitness f, equation right-hand side, n_bar."""

    model: ModelSpec

    def f(self, x, y):
        return classical_fitness(self.model, x, y)

    def rhs(self, x):
        return cead_rhs(self.model, x)

    def n_bar(self, x):
        return self.model.theta(x)


def classical_limit(m: ModelSpec) -> ClassicalLimit:
    return ClassicalLimit(model=m)
