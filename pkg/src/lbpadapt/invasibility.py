"""Invasibility coefficients and the fitness gradient near neutrality.

Close to selective neutrality the fixation probability expands as
u = p + v . s + o(s) with p = m/(n+m) the initial mutant frequency and
s = (lambda, delta, alpha, epsilon).  The selection gradient factorizes as

    v^iota_{n,m} = p (1-p) g^iota_{n+m}            iota != epsilon
    v^eps_{n,m}  = p (1-p) (1-2p) g^eps_{n+m}

where the invasibility coefficients g depend only on (b, c) and the total
initial size.  This module extracts v by central differences of exact
fixation solves (one solve yields u at every lattice state, so all splits
of every total size come from the same eight solves), uses the
factorization's split-agreement as a correctness monitor, and assembles

    a_iota = e^{-theta} sum_{n>=1} n g^iota_{n+1} theta^{n-1} / ((n+1)^2 (n-1)!)

for iota in {lambda, delta, alpha}, the coefficients of the fitness
gradient

    grad_2 chi(x, x) = a_lambda grad b - a_delta grad_1 c + a_alpha grad_2 c.

The dimensionless forms a_hat_iota(theta) = c * a_iota(b = theta c, c)
depend on theta alone; ``curve_sweep`` tabulates them and ``AhatTable``
interpolates the tabulation for the diffusion integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import poisson

from .errors import SolverError, TableRangeError
from .fixation import solve_fixation
from .model import ModelSpec, SelectionCoefficients, as_trait, grad_b, grad_c1, grad_c2, reconstruct_rates

IOTAS = ("lambda", "delta", "alpha", "epsilon")
H_S_FACTOR = 1e-4  # differentiation step relative to the base competition rate
RICHARDSON_SPREAD = 1e-4  # split disagreement that triggers the h/2 refinement
SERIES_REL_TOL = 1e-10
SPREAD_FAIL = 1e-2  # the factorization is a theorem; worse means broken numerics
THETA_MAX_SUPPORTED = 40.0


@dataclass(frozen=True)
class SelectionGradient:
    """Partial derivatives of u_{n,m} at neutrality, per unit selection coefficient."""

    n: int
    m: int
    v_lambda: float
    v_delta: float
    v_alpha: float
    v_epsilon: float


@dataclass(frozen=True)
class InvasibilityCoefficients:
    """Per-total-size factors g^iota with their split-agreement diagnostics.

    ``g_epsilon`` is None for total_size 2, where the single split (1,1)
    has 1 - 2p = 0.  ``spread`` is the max relative disagreement across
    splits for iota != epsilon; ``spread_epsilon`` the same for epsilon.
    """

    total_size: int
    g_lambda: float
    g_delta: float
    g_alpha: float
    g_epsilon: float | None
    spread: float
    spread_epsilon: float | None


def _coeff(iota, value):
    return SelectionCoefficients(base_b=1.0, base_c=1.0, **{
        "lambda": {"lam": value},
        "delta": {"delta": value},
        "alpha": {"alpha": value},
        "epsilon": {"epsilon": value},
    }[iota])


def _perturbed_rates(b, c, iota, value):
    kw = {"lambda": "lam", "delta": "delta", "alpha": "alpha", "epsilon": "epsilon"}[iota]
    return reconstruct_rates(SelectionCoefficients(base_b=b, base_c=c, **{kw: value}))


class _VGrids:
    """Central-difference grids v^iota(n, m) from eight (or sixteen) solves."""

    def __init__(self, b, c, h_s, min_size, tol_trunc, tol_resid, method):
        if not 0.0 < h_s < c / 2.0:
            raise SolverError(f"step h_s={h_s} too large for base competition rate c={c}")
        self.b = b
        self.c = c
        self.h_s = h_s
        self.grids = {}
        n_trust = None
        for iota in IOTAS:
            tab_p = solve_fixation(
                _perturbed_rates(b, c, iota, +h_s),
                tol_trunc=tol_trunc, tol_resid=tol_resid, method=method, min_size=min_size,
            )
            tab_m = solve_fixation(
                _perturbed_rates(b, c, iota, -h_s),
                tol_trunc=tol_trunc, tol_resid=tol_resid, method=method, min_size=min_size,
            )
            n_common = min(tab_p.n_max, tab_m.n_max)
            v = (tab_p.u[: n_common + 1, : n_common + 1]
                 - tab_m.u[: n_common + 1, : n_common + 1]) / (2.0 * h_s)
            self.grids[iota] = v
            trust = n_common // 2
            n_trust = trust if n_trust is None else min(n_trust, trust)
        self.n_trust = n_trust

    def richardson(self, other):
        """Combine steps h and h/2 into the fourth-order estimate (4 v_half - v) / 3."""
        merged = object.__new__(_VGrids)
        merged.b, merged.c, merged.h_s = self.b, self.c, other.h_s
        merged.n_trust = min(self.n_trust, other.n_trust)
        merged.grids = {}
        for iota in IOTAS:
            lim = merged.n_trust * 2 + 1
            coarse = self.grids[iota][:lim, :lim]
            fine = other.grids[iota][:lim, :lim]
            merged.grids[iota] = (4.0 * fine - coarse) / 3.0
        return merged

    def v_at(self, iota, n, m):
        return float(self.grids[iota][n, m])


def _g_splits(grids: _VGrids, total, iota):
    """g values per split (n, m) with n + m = total."""
    n = np.arange(1, total)
    m = total - n
    p = m / total
    v = grids.grids[iota][n, m]
    if iota == "epsilon":
        keep = n != m
        return v[keep] / (p[keep] * (1.0 - p[keep]) * (1.0 - 2.0 * p[keep]))
    return v / (p * (1.0 - p))


def _rel_spread(values):
    scale = max(float(np.max(np.abs(values))), 1e-300)
    return float((np.max(values) - np.min(values)) / scale)


def _g_table(grids: _VGrids, n_top):
    """Mean g^iota and split spreads for every total size 2 .. n_top."""
    out = {iota: np.full(n_top + 1, np.nan) for iota in IOTAS}
    spreads = {iota: np.full(n_top + 1, np.nan) for iota in IOTAS}
    if n_top > grids.n_trust:
        raise SolverError(
            f"g requested up to total size {n_top} but solves trust only {grids.n_trust}"
        )
    for total in range(2, n_top + 1):
        for iota in IOTAS:
            if iota == "epsilon" and total == 2:
                continue
            vals = _g_splits(grids, total, iota)
            out[iota][total] = float(np.mean(vals))
            spreads[iota][total] = _rel_spread(vals)
    return out, spreads


def _solve_grids(b, c, min_size, h_s=None, tol_trunc=1e-8, tol_resid=1e-12,
                 method="direct", richardson="auto"):
    """v grids at step h, refined with h/2 when split spreads warrant it."""
    if h_s is None:
        h_s = H_S_FACTOR * c
    grids = _VGrids(b, c, h_s, min_size, tol_trunc, tol_resid, method)
    if richardson == "never":
        return grids
    n_top = min(grids.n_trust, max(min_size, 2))
    _, spreads = _g_table(grids, n_top)
    worst = np.nanmax([np.nanmax(spreads[i]) if np.any(np.isfinite(spreads[i])) else 0.0
                       for i in ("lambda", "delta", "alpha")])
    if richardson == "always" or worst > RICHARDSON_SPREAD:
        fine = _VGrids(b, c, h_s / 2.0, min_size, tol_trunc, tol_resid, method)
        grids = grids.richardson(fine)
    return grids


def gradient_v(b, c, n, m, h_s=None, tol_trunc=1e-8, tol_resid=1e-12, method="direct"):
    """Selection gradient of u_{n,m} at neutrality by plain central differences."""
    if n < 1 or m < 1:
        raise SolverError("gradient_v needs n >= 1 and m >= 1")
    if h_s is None:
        h_s = H_S_FACTOR * c
    grids = _VGrids(b, c, h_s, min_size=n + m, tol_trunc=tol_trunc,
                    tol_resid=tol_resid, method=method)
    return SelectionGradient(
        n=n, m=m,
        v_lambda=grids.v_at("lambda", n, m),
        v_delta=grids.v_at("delta", n, m),
        v_alpha=grids.v_at("alpha", n, m),
        v_epsilon=grids.v_at("epsilon", n, m),
    )


def invasibility_g(b, c, total_size, h_s=None, **kwargs) -> InvasibilityCoefficients:
    """Invasibility coefficients g^iota at one total initial size N >= 2.

    Averages v^iota / (p(1-p)) (and /(1-2p) for epsilon) over all splits
    n + m = N; the relative spread across splits is returned and must stay
    below 1e-2, since the factorization is exact and disagreement can only
    come from broken numerics.
    """
    if total_size < 2:
        raise SolverError("total_size must be >= 2")
    grids = _solve_grids(b, c, min_size=total_size + 1, h_s=h_s, **kwargs)
    table, spreads = _g_table(grids, total_size)
    return _coeffs_from_table(table, spreads, total_size)


def _coeffs_from_table(table, spreads, total) -> InvasibilityCoefficients:
    spread = float(np.nanmax([spreads[i][total] for i in ("lambda", "delta", "alpha")]))
    if spread > SPREAD_FAIL:
        raise SolverError(
            f"split disagreement {spread:.2e} at N={total}: differentiation step or "
            "truncation failure (the p(1-p) factorization is exact)"
        )
    g_eps = table["epsilon"][total]
    sp_eps = spreads["epsilon"][total]
    return InvasibilityCoefficients(
        total_size=total,
        g_lambda=float(table["lambda"][total]),
        g_delta=float(table["delta"][total]),
        g_alpha=float(table["alpha"][total]),
        g_epsilon=None if math.isnan(g_eps) else float(g_eps),
        spread=spread,
        spread_epsilon=None if g_eps is None or math.isnan(sp_eps) else float(sp_eps),
    )


def series_cap(theta):
    """Hard cap on the a_iota series length; covers the Poisson envelope up to theta = 40."""
    return int(theta + 12.0 * math.sqrt(theta) + 30.0)


def _a_series(b, c, h_s=None, tol_trunc=1e-8, tol_resid=1e-12, method="direct",
              richardson="auto"):
    """All three a_iota(b, c) from one shared set of solves.

    Stops once a provable bound on the remaining Poisson-weighted tail
    drops below SERIES_REL_TOL of the partial sums; the growth of g with
    total size is bounded empirically by its observed slope (times a
    safety factor), which the cap protects against misjudging.
    """
    theta = b / c
    cap = series_cap(theta)
    # initial reach: Poisson mass to ~1e-13 absolute, refined below
    reach = int(poisson.isf(1e-13, theta)) + 4
    reach = min(reach, cap)

    while True:
        grids = _solve_grids(b, c, min_size=reach + 2, h_s=h_s, tol_trunc=tol_trunc,
                             tol_resid=tol_resid, method=method, richardson=richardson)
        n_top = min(grids.n_trust, cap + 1)
        table, spreads = _g_table(grids, n_top)
        for total in range(2, n_top + 1):
            _coeffs_from_table(table, spreads, total)  # raises on broken numerics

        sums = {i: 0.0 for i in ("lambda", "delta", "alpha")}
        slope = 0.0
        n = 1
        done = False
        while n + 1 <= n_top:
            w = poisson.pmf(n - 1, theta) * n / (n + 1) ** 2
            for iota in sums:
                g = table[iota][n + 1]
                sums[iota] += w * g
                slope = max(slope, abs(g) / (n + 1))
            # remaining tail: sum_{k>n} pois(k-1) k g_{k+1} / (k+1)^2 with
            # g_{k+1} <= 2 slope (k+1) gives 2 slope [theta sf(n-3) + sf(n-2)] / (n+1)
            if n >= 3:
                tail = 2.0 * slope * (theta * poisson.sf(n - 3, theta)
                                      + poisson.sf(n - 2, theta)) / (n + 1)
                scale = min(abs(v) for v in sums.values())
                if scale > 0.0 and tail < SERIES_REL_TOL * scale:
                    done = True
                    break
            n += 1
        if done:
            return {i: sums[i] for i in sums}, table, spreads
        if n_top >= cap + 1:
            raise SolverError(
                f"a_iota series cap {cap} reached before tail tolerance at theta={theta}"
            )
        reach = min(2 * reach, cap)


def a_coeff(b, c, iota, **kwargs):
    """Fitness-gradient coefficient a_iota(b, c) for iota in {lambda, delta, alpha}."""
    if iota not in ("lambda", "delta", "alpha"):
        raise SolverError(f"a_coeff is defined for lambda/delta/alpha, not {iota!r}")
    sums, _, _ = _a_series(b, c, **kwargs)
    return sums[iota]


def a_coeffs(b, c, **kwargs):
    """(a_lambda, a_delta, a_alpha) sharing one set of solves."""
    sums, _, _ = _a_series(b, c, **kwargs)
    return np.array([sums["lambda"], sums["delta"], sums["alpha"]])


@dataclass(frozen=True)
class InvasibilityCurve:
    """a_hat_iota over a theta grid; the data behind the reference curves."""

    theta_grid: np.ndarray
    a_hat_lambda: np.ndarray
    a_hat_delta: np.ndarray
    a_hat_alpha: np.ndarray
    tol_trunc: float = 1e-8
    tol_resid: float = 1e-12

    def to_csv(self, path):
        lines = [
            f"# tol_trunc={self.tol_trunc:.3g} tol_resid={self.tol_resid:.3g}",
            "theta,a_hat_lambda,a_hat_delta,a_hat_alpha,theta_a_hat_lambda,theta_a_hat_alpha",
        ]
        for i, th in enumerate(self.theta_grid):
            lines.append(
                f"{th:.17g},{self.a_hat_lambda[i]:.17g},{self.a_hat_delta[i]:.17g},"
                f"{self.a_hat_alpha[i]:.17g},{th * self.a_hat_lambda[i]:.17g},"
                f"{th * self.a_hat_alpha[i]:.17g}"
            )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _sweep_point(args):
    theta, base_c, kwargs = args
    a = a_coeffs(theta * base_c, base_c, **kwargs)
    return base_c * a  # a_hat = c * a depends on theta alone


def curve_sweep(theta_grid, base_c=1.0, jobs=1, **kwargs) -> InvasibilityCurve:
    """Tabulate a_hat_iota(theta) over an increasing positive grid (max 40).

    Grid points are independent; ``jobs`` > 1 distributes them over
    processes without affecting the numbers.
    """
    grid = np.asarray(theta_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise SolverError("theta_grid must be a nonempty 1-D array")
    if np.any(np.diff(grid) <= 0.0) or grid[0] <= 0.0:
        raise SolverError("theta_grid must be strictly increasing and positive")
    if grid[-1] > THETA_MAX_SUPPORTED:
        raise SolverError(f"theta above {THETA_MAX_SUPPORTED} is outside the supported range")

    tasks = [(float(th), float(base_c), kwargs) for th in grid]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = []
        for task in tasks:
            try:
                rows.append(_sweep_point(task))
            except SolverError as exc:
                raise SolverError(f"theta={task[0]}: {exc}") from exc
    rows = np.asarray(rows)
    return InvasibilityCurve(
        theta_grid=grid,
        a_hat_lambda=rows[:, 0],
        a_hat_delta=rows[:, 1],
        a_hat_alpha=rows[:, 2],
        tol_trunc=kwargs.get("tol_trunc", 1e-8),
        tol_resid=kwargs.get("tol_resid", 1e-12),
    )


class AhatTable:
    """Monotone-cubic interpolation of a_hat_iota over a log-spaced theta grid.

    Built once from ``curve_sweep`` and reused by the diffusion integrator;
    per-step re-solves would make SDE integration intractable.  Requests
    outside the tabulated range raise TableRangeError, never extrapolate.
    """

    def __init__(self, curve: InvasibilityCurve):
        self.curve = curve
        log_t = np.log(curve.theta_grid)
        self._interp = {
            "lambda": PchipInterpolator(log_t, curve.a_hat_lambda),
            "delta": PchipInterpolator(log_t, curve.a_hat_delta),
            "alpha": PchipInterpolator(log_t, curve.a_hat_alpha),
        }
        self.theta_min = float(curve.theta_grid[0])
        self.theta_max = float(curve.theta_grid[-1])

    def a_hat(self, theta):
        """(a_hat_lambda, a_hat_delta, a_hat_alpha) at theta."""
        if not self.theta_min <= theta <= self.theta_max:
            raise TableRangeError(
                f"theta={theta} outside table range [{self.theta_min}, {self.theta_max}]"
            )
        lt = math.log(theta)
        return np.array([float(self._interp[i](lt)) for i in ("lambda", "delta", "alpha")])

    def a_coeffs(self, b, c):
        """(a_lambda, a_delta, a_alpha) at base rates (b, c) via a_iota = a_hat/c."""
        return self.a_hat(b / c) / c

    def save_csv(self, path):
        self.curve.to_csv(path)

    @classmethod
    def load_csv(cls, path_or_file):
        data = np.loadtxt(path_or_file, delimiter=",", skiprows=2)
        curve = InvasibilityCurve(
            theta_grid=data[:, 0],
            a_hat_lambda=data[:, 1],
            a_hat_delta=data[:, 2],
            a_hat_alpha=data[:, 3],
        )
        return cls(curve)


def build_ahat_table(theta_min=0.05, theta_max=40.0, points=200, jobs=1, **kwargs):
    """Build the reference table on a log-spaced grid (the diffusion default)."""
    grid = np.geomspace(theta_min, theta_max, points)
    return AhatTable(curve_sweep(grid, jobs=jobs, **kwargs))


_DEFAULT_TABLE = None


def default_ahat_table() -> AhatTable:
    """The packaged 200-point table over theta in [0.05, 40], loaded lazily."""
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        from importlib.resources import files

        with files("lbpadapt").joinpath("data/ahat_table.csv").open("r") as fh:
            _DEFAULT_TABLE = AhatTable.load_csv(fh)
    return _DEFAULT_TABLE


def fitness_gradient(m: ModelSpec, x, table: AhatTable | None = None, **kwargs):
    """grad_2 chi(x, x) assembled from trait gradients and a_iota coefficients.

    With ``table`` the coefficients come from the interpolated tabulation;
    otherwise from fresh solves at (b(x), c(x,x)).  epsilon contributes
    nothing: its derivative along y vanishes at y = x.
    """
    x = as_trait(x, m.k)
    b = m.b(x)
    c = m.c(x, x)
    if table is not None:
        a_lam, a_del, a_alp = table.a_coeffs(b, c)
    else:
        a_lam, a_del, a_alp = a_coeffs(b, c, **kwargs)
    return a_lam * grad_b(m, x) - a_del * grad_c1(m, x) + a_alp * grad_c2(m, x)
