"""Trait substitution sequence: the rare-mutation jump process on trait space.

On the mutation timescale the population is monomorphic and the dominant
trait jumps from x to x + h at rate

    q(x, dh) = beta(x) chi(x, x + h) M(x, dh),

where beta(x) = mu(x) b(x) theta(x) / (1 - e^{-theta(x)}) is the mean
mutant production rate of a stationary x-population and chi the invasion
fitness.  ``run_tss`` simulates this by thinning: candidate mutations
arrive at rate beta(x), each proposes a kernel step h (scaled by ``eps``)
and survives with probability chi(x, x + h) obtained from an exact
fixation solve.  Every chi is positive, so evolution can move in any
direction; directional selection enters only through the acceptance
probabilities.

chi evaluations are cached per run on trait pairs quantized to 1e-9 per
coordinate: candidates near a slow-moving state repeat structure, and a
sub-1e-9 trait identification is far below solver tolerances.

The process runs on the limit object's own clock; the small-mutation
rescaling (time x 1/eps^2) is applied by callers that want it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .fixation import StationaryLaw, invasion_fitness, stationary_mean
from .model import ModelSpec, as_trait


@dataclass
class TSSPath:
    """Jump times and visited traits; optional stationary size samples.

    ``states[0]`` is the initial condition at time 0; ``states[i]`` for
    i >= 1 is the trait fixed at ``jump_times[i-1]``.  ``n_candidates``
    counts proposed mutants including rejected ones.
    """

    jump_times: np.ndarray
    states: list
    sizes: np.ndarray | None
    n_candidates: int

    def n_jumps(self):
        return len(self.jump_times)


def beta(m: ModelSpec, x):
    """Mean mutant production rate mu(x) b(x) E(xi(x)) of a stationary population."""
    x = as_trait(x, m.k)
    mu = m.mu(x)
    if mu == 0.0:
        return 0.0
    return mu * m.b(x) * stationary_mean(m.theta(x))


def _quantize(x):
    return tuple(np.round(np.asarray(x, dtype=float), 9))


def run_tss(
    m: ModelSpec,
    x0,
    t_end,
    seed,
    eps=1.0,
    emit_sizes=False,
    tol_trunc=1e-8,
    tol_resid=1e-12,
) -> TSSPath:
    """Simulate the trait substitution sequence over [0, t_end] by thinning.

    ``eps`` scales the kernel steps h -> eps h (the small-mutation knob);
    the default 1 is the un-rescaled process.  With ``emit_sizes`` each
    fixed trait also carries an independent stationary size sample.
    """
    if t_end <= 0.0:
        raise SolverError(f"t_end must be > 0, got {t_end}")
    if eps <= 0.0:
        raise SolverError(f"eps must be > 0, got {eps}")
    rng = np.random.default_rng(seed)
    x = as_trait(x0, m.k)
    t = 0.0
    jump_times = []
    states = [x.copy()]
    sizes = []
    n_candidates = 0
    chi_cache = {}

    while True:
        rate = beta(m, x)
        if rate <= 0.0:
            break  # mu == 0: no mutants are ever produced
        t += rng.exponential(1.0 / rate)
        if t > t_end:
            break
        n_candidates += 1
        h = eps * m.kernel.sample(x, rng)
        y = x + h
        key = (_quantize(x), _quantize(y))
        chi_val = chi_cache.get(key)
        if chi_val is None:
            try:
                chi_val = invasion_fitness(m, x, y, tol_trunc=tol_trunc, tol_resid=tol_resid)
            except SolverError as exc:
                raise SolverError(f"fixation solve failed at candidate y={tuple(y)}: {exc}") from exc
            chi_cache[key] = chi_val
        if chi_val <= 0.0:
            raise SolverError(
                f"chi(x, y) = {chi_val} at y={tuple(y)}; every mutant must have "
                "positive invasion probability"
            )
        if rng.random() < chi_val:
            x = y
            jump_times.append(t)
            states.append(x.copy())
            if emit_sizes:
                sizes.append(int(StationaryLaw(m.theta(x)).sample(rng)))

    return TSSPath(
        jump_times=np.array(jump_times),
        states=states,
        sizes=np.array(sizes, dtype=int) if emit_sizes else None,
        n_candidates=n_candidates,
    )


def write_tss_csv(path: TSSPath, k, out_path):
    """`jump_time,trait coords...,size(optional)` rows, initial state at time 0."""
    coord_cols = ",".join(f"x{i+1}" for i in range(k))
    header = f"jump_time,{coord_cols}"
    if path.sizes is not None:
        header += ",size"
    lines = [header]
    times = np.concatenate([[0.0], path.jump_times])
    for i, (t, state) in enumerate(zip(times, path.states)):
        row = f"{t:.17g}," + ",".join(f"{c:.17g}" for c in state)
        if path.sizes is not None:
            row += f",{path.sizes[i-1] if i >= 1 else ''}"
        lines.append(row)
    with open(out_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
