"""The three invasibility channels: defence beats aggressiveness beats fertility.

Near neutrality the fixation probability responds linearly to the four
selection coefficients, and the response collapses onto dimensionless
curves a_hat_iota(theta).  This script draws them from the packaged
200-point tabulation, overlays a freshly computed coarse sweep as a
cross-check, and shows the large-theta behaviour: a_hat_delta levels off
near 1/2 while theta * a_hat_lambda and theta * a_hat_alpha do.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lbpadapt import curve_sweep, default_ahat_table

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

table = default_ahat_table()
curve = table.curve

fresh = curve_sweep(np.geomspace(0.5, 36.0, 7))

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))

ax1.plot(curve.theta_grid, curve.a_hat_delta, label=r"$\hat a_\delta$ (defence)")
ax1.plot(curve.theta_grid, curve.a_hat_alpha, label=r"$\hat a_\alpha$ (aggressiveness)")
ax1.plot(curve.theta_grid, curve.a_hat_lambda, label=r"$\hat a_\lambda$ (fertility)")
for vals, marker in [(fresh.a_hat_delta, "^"), (fresh.a_hat_alpha, "s"), (fresh.a_hat_lambda, "o")]:
    ax1.plot(fresh.theta_grid, vals, marker, color="k", ms=4, mfc="none")
ax1.set_xlim(0, 40)
ax1.set_ylim(0, 0.6)
ax1.set_xlabel(r"$\theta$")
ax1.set_title("sensitivity of invasion to each channel")
ax1.legend(frameon=False)

ax2.plot(curve.theta_grid, curve.theta_grid * curve.a_hat_alpha,
         label=r"$\theta\,\hat a_\alpha$")
ax2.plot(curve.theta_grid, curve.theta_grid * curve.a_hat_lambda,
         label=r"$\theta\,\hat a_\lambda$")
ax2.axhline(0.5, color="k", ls="--", lw=0.8)
ax2.set_xlim(0, 40)
ax2.set_ylim(0, 0.6)
ax2.set_xlabel(r"$\theta$")
ax2.set_title("both approach 1/(2$\\theta$) at large $\\theta$")
ax2.legend(frameon=False)

fig.tight_layout()
fig.savefig(OUT / "invasibility_curves.png", dpi=150)
curve.to_csv(OUT / "ahat_curves.csv")
print(f"wrote {OUT / 'invasibility_curves.png'} and ahat_curves.csv")
print(f"ordering delta > alpha > lambda on all {len(curve.theta_grid)} grid points:",
      bool(np.all(curve.a_hat_delta > curve.a_hat_alpha)
           and np.all(curve.a_hat_alpha > curve.a_hat_lambda)))
