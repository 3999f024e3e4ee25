"""Individual-based simulation of the multitype logistic branching process.

Exact event-by-event simulation (direct SSA, no tau-leaping): every
individual of trait x gives birth at rate b(x) and dies at rate
sum_y c(x, y) (nu(dy) - delta_x), i.e. competition with everyone but
itself.  A birth from x is a mutant with probability gamma * mu(x), in
which case the offspring trait is x + h with h drawn from the mutation
kernel; mutant traits are almost surely distinct reals, so grouping by
exact trait value is safe.  Populations stay small under the quadratic
competition control, which keeps exactness cheap; the specialized
two-type Monte Carlo below doubles as an unbiased oracle for the linear
fixation solver.

Replicated runs derive the stream of replicate (or chunk) i from
``SeedSequence((seed, i))``, so results are reproducible from the seed and
independent of how replicates are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ModelError, SolverError
from .model import ModelSpec, TwoTypeRates, as_trait

POPULATION_CAP = 1_000_000  # explosion guard, unreachable under logistic control
MC_CHUNK = 10_000  # replicates per RNG substream in two_type_mc_fixation
Z99 = 2.5758293035489004  # standard normal 99.5% quantile (two-sided 99%)


@dataclass
class PopulationState:
    """Counting measure at one instant: trait tuple -> multiplicity."""

    time: float
    groups: dict

    def total_size(self):
        return sum(self.groups.values())

    def num_types(self):
        return len(self.groups)

    def copy(self):
        return PopulationState(time=self.time, groups=dict(self.groups))


def single_type_state(x, n, k=1, time=0.0):
    """A pure population of n individuals at trait x."""
    return PopulationState(time=time, groups={tuple(as_trait(x, k)): int(n)})


def two_type_state(x, n, y, m, k=1, time=0.0):
    return PopulationState(
        time=time,
        groups={tuple(as_trait(x, k)): int(n), tuple(as_trait(y, k)): int(m)},
    )


@dataclass(frozen=True)
class SimConfig:
    """Run controls: mutation-frequency scale gamma in (0, 1], horizon, seed, recording."""

    gamma: float
    t_end: float
    seed: int
    record: str = "sampled"  # 'full' | 'sampled' | 'final'
    record_dt: float = 1.0
    debug_rates: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ModelError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.t_end <= 0.0:
            raise ModelError(f"t_end must be > 0, got {self.t_end}")
        if self.record not in ("full", "sampled", "final"):
            raise ModelError(f"unknown record mode {self.record!r}")


class _Groups:
    """Mutable per-type bookkeeping with incrementally maintained totals.

    ``press[i] = sum_j c(x_i, x_j) n_j`` so the death rate of type i is
    n_i * (press[i] - c_ii); press is updated in O(K) per event.
    """

    def __init__(self, m: ModelSpec, state: PopulationState):
        self.m = m
        self.traits = [np.array(t) for t in state.groups]
        self.counts = [int(c) for c in state.groups.values()]
        if any(c <= 0 for c in self.counts):
            raise ModelError("initial counts must be strictly positive")
        self.b = [m.b(x) for x in self.traits]
        self.mu = [m.mu(x) for x in self.traits]
        k = len(self.traits)
        self.cmat = [[m.c(self.traits[i], self.traits[j]) for j in range(k)] for i in range(k)]
        self.press = [
            sum(self.cmat[i][j] * self.counts[j] for j in range(k)) for i in range(k)
        ]

    def birth_rates(self):
        return [n * b for n, b in zip(self.counts, self.b)]

    def death_rates(self):
        return [
            n * (p - self.cmat[i][i])
            for i, (n, p) in enumerate(zip(self.counts, self.press))
        ]

    def add_individual(self, i):
        self.counts[i] += 1
        for j in range(len(self.traits)):
            self.press[j] += self.cmat[j][i]

    def remove_individual(self, i):
        self.counts[i] -= 1
        for j in range(len(self.traits)):
            self.press[j] -= self.cmat[j][i]
        if self.counts[i] == 0:
            for row in self.cmat:
                del row[i]
            del self.cmat[i]
            del self.traits[i]
            del self.counts[i]
            del self.b[i]
            del self.mu[i]
            del self.press[i]

    def add_type(self, x):
        m = self.m
        row = [m.c(x, t) for t in self.traits]
        col = [m.c(t, x) for t in self.traits]
        self_c = m.c(x, x)
        for i, r in enumerate(self.cmat):
            r.append(col[i])
            self.press[i] += col[i]
        row.append(self_c)
        self.cmat.append(row)
        self.traits.append(x)
        self.counts.append(1)
        self.b.append(m.b(x))
        self.mu.append(m.mu(x))
        self.press.append(sum(r * n for r, n in zip(row, self.counts)))

    def check_rates(self):
        k = len(self.traits)
        for i in range(k):
            fresh = sum(self.cmat[i][j] * self.counts[j] for j in range(k))
            if abs(fresh - self.press[i]) > 1e-9 * max(1.0, abs(fresh)):
                raise SolverError(
                    f"rate bookkeeping drifted: press[{i}]={self.press[i]} vs {fresh}"
                )

    def snapshot(self, time):
        return PopulationState(
            time=time,
            groups={tuple(x): n for x, n in zip(self.traits, self.counts)},
        )


def run_ibm(m: ModelSpec, cfg: SimConfig, init: PopulationState):
    """Simulate the population over [init.time, t_end]; returns the recorded path.

    The path always ends with a state stamped exactly at t_end, so holding
    times (and time-weighted histograms) are well defined.
    """
    rng = np.random.default_rng(cfg.seed)
    groups = _Groups(m, init)
    t = init.time
    path = []

    def record_event(state):
        path.append(state)

    if cfg.record == "full":
        record_event(groups.snapshot(t))
    next_sample = t if cfg.record == "sampled" else math.inf

    while True:
        births = groups.birth_rates()
        deaths = groups.death_rates()
        total = sum(births) + sum(deaths)
        if total <= 0.0:
            t_next = cfg.t_end  # a lone immortal individual; nothing ever happens
        else:
            t_next = t + rng.exponential(1.0 / total)

        while next_sample <= min(t_next, cfg.t_end):
            record_event(groups.snapshot(next_sample))
            next_sample += cfg.record_dt

        if t_next >= cfg.t_end:
            break
        t = t_next

        pick = rng.random() * total
        k = len(births)
        event = None
        for i in range(k):
            if pick < births[i]:
                event = ("birth", i)
                break
            pick -= births[i]
        if event is None:
            for i in range(k):
                if pick < deaths[i]:
                    event = ("death", i)
                    break
                pick -= deaths[i]
        if event is None:
            event = ("death", k - 1)  # rounding at the top of the cumulative sum

        kind, i = event
        if kind == "birth":
            if cfg.gamma * groups.mu[i] > 0.0 and rng.random() < cfg.gamma * groups.mu[i]:
                h = m.kernel.sample(groups.traits[i], rng)
                groups.add_type(groups.traits[i] + h)
            else:
                groups.add_individual(i)
        else:
            groups.remove_individual(i)

        if cfg.debug_rates:
            groups.check_rates()
        if sum(groups.counts) > POPULATION_CAP:
            raise SolverError(f"population exceeded {POPULATION_CAP} individuals")
        if cfg.record == "full":
            record_event(groups.snapshot(t))

    if not path or path[-1].time != cfg.t_end:
        path.append(groups.snapshot(cfg.t_end))
    return path


def empirical_size_histogram(path, burn_in):
    """Time-weighted occupancy of total population size after the burn-in.

    Each recorded state holds until the next record; the final record marks
    the horizon and holds no time.
    """
    if len(path) < 2:
        raise SolverError("path too short for a histogram")
    times = np.array([s.time for s in path])
    sizes = np.array([s.total_size() for s in path])
    horizon = times[-1]
    if burn_in >= horizon:
        raise SolverError(f"burn_in {burn_in} leaves no effective window before {horizon}")
    starts = np.maximum(times[:-1], burn_in)
    ends = np.minimum(times[1:], horizon)
    weights = np.clip(ends - starts, 0.0, None)
    total = weights.sum()
    if total <= 0.0:
        raise SolverError("empty effective window")
    hist = {}
    for s, w in zip(sizes[:-1], weights):
        if w > 0.0:
            hist[int(s)] = hist.get(int(s), 0.0) + w / total
    return hist


def wilson_interval(successes, trials, z=Z99):
    """Wilson score interval; well behaved at the 0/1 boundaries."""
    if trials == 0:
        raise ModelError("no trials")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def _mc_chunk(r: TwoTypeRates, n0, m0, reps, rng):
    """Vectorized embedded-chain replicates; waiting times play no role in fixation."""
    n = np.full(reps, n0, dtype=np.int64)
    m = np.full(reps, m0, dtype=np.int64)
    fixed = 0
    while n.size:
        bx = n * r.b_x
        by = m * r.b_y
        dx = n * (r.c_xx * (n - 1) + r.c_xy * m)
        dy = m * (r.c_yx * n + r.c_yy * (m - 1))
        total = bx + by + dx + dy
        pick = rng.random(n.size) * total
        is_bx = pick < bx
        is_by = ~is_bx & (pick < bx + by)
        is_dx = ~is_bx & ~is_by & (pick < bx + by + dx)
        is_dy = ~is_bx & ~is_by & ~is_dx
        n += is_bx.astype(np.int64) - is_dx.astype(np.int64)
        m += is_by.astype(np.int64) - is_dy.astype(np.int64)
        done_fix = n == 0
        done_loss = m == 0
        fixed += int(done_fix.sum())
        alive = ~done_fix & ~done_loss
        n = n[alive]
        m = m[alive]
    return fixed


def two_type_mc_fixation(r: TwoTypeRates, n, m, reps, seed):
    """Monte-Carlo fixation probability from (n, m) with a 99% Wilson interval.

    Replicates are partitioned into fixed-size chunks, each on its own
    ``SeedSequence((seed, chunk))`` stream, so the estimate is identical
    however the chunks are scheduled.
    """
    if reps < 1:
        raise ModelError("reps must be >= 1")
    if n < 0 or m < 0 or n + m < 1:
        raise ModelError(f"invalid initial counts ({n}, {m})")
    if n == 0:
        return 1.0, (1.0, 1.0)
    if m == 0:
        return 0.0, (0.0, 0.0)
    fixed = 0
    for chunk, start in enumerate(range(0, reps, MC_CHUNK)):
        size = min(MC_CHUNK, reps - start)
        rng = np.random.default_rng(np.random.SeedSequence((seed, chunk)))
        fixed += _mc_chunk(r, n, m, size, rng)
    return fixed / reps, wilson_interval(fixed, reps)
