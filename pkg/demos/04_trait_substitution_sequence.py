"""Evolution as a sequence of mutant fixations, drift included.

On the mutation timescale the population is monomorphic; its trait jumps
whenever a mutant fixes.  Unlike the classical large-population picture,
every mutant (even a deleterious one) has a positive fixation probability
here, so trajectories wander against the fitness gradient now and then.
The script follows several paths on a birth-rate hill and records the
stationary population sizes carried along.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lbpadapt import parse_model, run_tss
from lbpadapt.tss import write_tss_csv

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

# birth rate peaks at x = 1.5; competition is flat, so the classical
# prediction is a steady climb toward the peak
MODEL = """
[model]
k = 1
b = 1 + 0.8*exp(-(x1 - 1.5)^2)
c = 1.0
mu = 1

[mutation]
kind = isotropic-gaussian
sigma = 0.12
"""

model = parse_model(MODEL)

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))

last = None
for seed in range(6):
    path = run_tss(model, [-1.0], t_end=250.0, seed=seed, emit_sizes=True)
    times = np.concatenate([[0.0], path.jump_times, [250.0]])
    traits = np.array([s[0] for s in path.states] + [path.states[-1][0]])
    ax1.step(times, traits, where="post", lw=1.0, alpha=0.8)
    last = path
    print(f"seed {seed}: {path.n_jumps()} fixations out of {path.n_candidates} mutants")

ax1.axhline(1.5, color="k", ls="--", lw=0.8, label="birth-rate peak")
ax1.set_xlabel("time (mutation timescale)")
ax1.set_ylabel("dominant trait")
ax1.set_title("trait substitution sequences")
ax1.legend(frameon=False)

sizes = last.sizes
ax2.plot(last.jump_times, sizes, ".", ms=5)
ax2.set_xlabel("time (mutation timescale)")
ax2.set_ylabel("population size at fixation")
ax2.set_title("stationary sizes carried by the jump process")

fig.tight_layout()
fig.savefig(OUT / "tss_paths.png", dpi=150)
write_tss_csv(last, model.k, OUT / "tss_path.csv")
print(f"wrote {OUT / 'tss_paths.png'} and tss_path.csv")
