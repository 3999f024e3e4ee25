"""Single-type population size settles on a Poisson law conditioned positive.

A pure population with per-capita birth rate b and pairwise competition
rate c fluctuates around theta = b/c forever (it cannot die out: the death
rate vanishes at size one).  This script runs the exact event-by-event
simulator at a few values of theta and compares the time-weighted
occupancy of the total size against the closed-form stationary law.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lbpadapt import (
    SimConfig,
    constant_model,
    empirical_size_histogram,
    run_ibm,
    single_type_state,
    stationary_pmf,
)

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

fig, axes = plt.subplots(1, 3, figsize=(12, 3.5), sharey=False)

for ax, theta in zip(axes, [0.5, 1.0, 4.0]):
    model = constant_model(b=theta, c=1.0, mu=0.0)
    cfg = SimConfig(gamma=1.0, t_end=5000.0, seed=int(10 * theta), record="sampled", record_dt=0.5)
    path = run_ibm(model, cfg, single_type_state(0.0, 2))
    hist = empirical_size_histogram(path, burn_in=500.0)

    sizes = np.arange(1, max(hist) + 3)
    law = stationary_pmf(theta, sizes)
    emp = [hist.get(int(n), 0.0) for n in sizes]
    tv = 0.5 * np.abs(np.array(emp) - law).sum()

    ax.bar(sizes, emp, width=0.8, alpha=0.5, label="occupancy")
    ax.plot(sizes, law, "ko-", ms=4, label="conditioned Poisson")
    ax.set_title(f"theta = {theta}   (TV = {tv:.3f})")
    ax.set_xlabel("population size")
    ax.legend(frameon=False, fontsize=8)

axes[0].set_ylabel("probability")
fig.tight_layout()
fig.savefig(OUT / "stationary_law.png", dpi=150)
print(f"wrote {OUT / 'stationary_law.png'}")

# a glance at one trajectory: the logistic tug between birth and crowding
model = constant_model(b=4.0, c=1.0, mu=0.0)
cfg = SimConfig(gamma=1.0, t_end=60.0, seed=1, record="full")
path = run_ibm(model, cfg, single_type_state(0.0, 1))
times = [s.time for s in path]
sizes = [s.total_size() for s in path]

fig, ax = plt.subplots(figsize=(8, 3))
ax.step(times, sizes, where="post", lw=0.8)
ax.axhline(4.0, color="k", ls="--", lw=0.8, label="theta")
ax.set_xlabel("time")
ax.set_ylabel("population size")
ax.legend(frameon=False)
fig.tight_layout()
fig.savefig(OUT / "single_path.png", dpi=150)
print(f"wrote {OUT / 'single_path.png'}")
