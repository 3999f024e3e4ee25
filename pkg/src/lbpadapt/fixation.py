"""Stationary size law and exact two-type fixation probabilities.

A pure resident population with rates (b, c) has stationary size
distributed as Poisson(theta), theta = b/c, conditioned on being nonzero.
For a resident/mutant pair the bivariate chain (X_t, Y_t) jumps by one
individual at a time, so ordering states by total size N = n + m makes the
first-step (harmonic) system for the mutant fixation probabilities

    u(n, m) = P(X hits 0 before Y | X_0 = n, Y_0 = m)

block-tridiagonal: births couple level N to N+1, competition deaths to
N-1, and no transition stays within a level.  ``solve_fixation`` truncates
the lattice at n + m = n_max (births out of the outer shell suppressed;
the quadratic death rate makes the resulting error decay super-exponentially
below the shell), solves the system, and quantifies the truncation error by
comparing against the half-size solve.

Two solver backends share the level data structures: an exact level-by-level
elimination ("direct", the default) and damped-free Gauss-Seidel sweeps
ordered by total size ("gauss-seidel").  The contract is the achieved
residual, not the method; both are kept and cross-checked in the tests.

The invasion fitness chi(x, y) is the fixation probability of a single
mutant entering a resident population of size-biased stationary size:

    chi = sum_{n >= 1} e^{-theta} theta^(n-1) / (n-1)!  *  u(n, 1)

with the closed neutral form chi(x, x) = (e^{-theta} - 1 + theta) / theta^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.stats import poisson

from .errors import ModelError, SolverError
from .model import ModelSpec, TwoTypeRates, as_trait, eval_rates

DEFAULT_TOL_TRUNC = 1e-8
DEFAULT_TOL_RESID = 1e-12
DEFAULT_N_MAX_START = 64
DEFAULT_N_MAX_CAP = 4096
CHI_TAIL_TOL = 1e-12


# --- single-type stationary law ------------------------------------------

def stationary_pmf(theta, n):
    """P(xi = n): Poisson(theta) conditioned on being nonzero, n >= 1."""
    if theta <= 0.0:
        raise ModelError(f"theta must be > 0, got {theta}")
    n = np.asarray(n)
    if np.any(n < 1):
        raise ModelError("stationary law is supported on n >= 1")
    val = poisson.pmf(n, theta) / -math.expm1(-theta)
    return float(val) if val.ndim == 0 else val


def stationary_mean(theta):
    """E(xi) = theta / (1 - e^{-theta})."""
    if theta <= 0.0:
        raise ModelError(f"theta must be > 0, got {theta}")
    return theta / -math.expm1(-theta)


def size_biased_pmf(theta, n):
    """Size-biased stationary law: n P(xi = n) / E(xi) = P(Poisson(theta) = n - 1).

    This is the distribution of the population size right after a birth
    event in the stationary population, i.e. the resident count seen by a
    newborn mutant.
    """
    if theta <= 0.0:
        raise ModelError(f"theta must be > 0, got {theta}")
    n = np.asarray(n)
    if np.any(n < 1):
        raise ModelError("size-biased law is supported on n >= 1")
    val = poisson.pmf(n - 1, theta)
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class StationaryLaw:
    """Poisson(theta) conditioned positive; the single-type equilibrium size."""

    theta: float

    def pmf(self, n):
        return stationary_pmf(self.theta, n)

    def mean(self):
        return stationary_mean(self.theta)

    def sample(self, rng, size=None):
        # inverse transform through the unconditioned Poisson cdf
        f0 = poisson.cdf(0, self.theta)
        u = rng.random(size)
        return poisson.ppf(f0 + u * (1.0 - f0), self.theta).astype(int)


# --- two-type lattice ------------------------------------------------------

def _level_rates(r: TwoTypeRates, level, n_max):
    """Per-state rates at total size ``level``; births zero on the outer shell."""
    n = np.arange(1.0, level)
    m = level - n
    bx = n * r.b_x
    by = m * r.b_y
    dx = n * (r.c_xx * (n - 1.0) + r.c_xy * m)
    dy = m * (r.c_yx * n + r.c_yy * (m - 1.0))
    if level == n_max:
        bx = np.zeros_like(bx)
        by = np.zeros_like(by)
    return bx, by, dx, dy


def _interior_index(n_max):
    """Flat index arrays for interior states ordered by total size then n.

    State (n, m), total T = n + m, sits at offset(T) + n - 1 with
    offset(T) = (T - 1)(T - 2) / 2.
    """
    totals = np.concatenate(
        [np.full(t - 1, t, dtype=np.int64) for t in range(2, n_max + 1)]
    )
    ns = np.concatenate([np.arange(1, t, dtype=np.int64) for t in range(2, n_max + 1)])
    return totals, ns


def _solve_direct(r: TwoTypeRates, n_max):
    """Sparse LU factorization of the first-step system (SuperLU).

    With level ordering the matrix is banded (bandwidth ~ n_max); the
    fill-reducing ordering keeps the factorization near O(n_max^3) on this
    2-D lattice, far below per-level dense elimination.
    """
    totals, ns = _interior_index(n_max)
    ms = totals - ns
    dim = totals.size
    offsets = (totals - 1) * (totals - 2) // 2
    idx = offsets + ns - 1

    bx = ns * r.b_x
    by = ms * r.b_y
    dx = ns * (r.c_xx * (ns - 1) + r.c_xy * ms)
    dy = ms * (r.c_yx * ns + r.c_yy * (ms - 1))
    shell = totals == n_max
    bx = np.where(shell, 0.0, bx)
    by = np.where(shell, 0.0, by)

    up_off = totals * (totals - 1) // 2  # offset(T + 1)
    down_off = (totals - 2) * (totals - 3) // 2  # offset(T - 1)

    rows = [idx]
    cols = [idx]
    vals = [bx + by + dx + dy]

    keep = ~shell
    rows += [idx[keep], idx[keep]]
    cols += [up_off[keep] + ns[keep], up_off[keep] + ns[keep] - 1]
    vals += [-bx[keep], -by[keep]]

    keep = ns > 1
    rows.append(idx[keep])
    cols.append(down_off[keep] + ns[keep] - 2)
    vals.append(-dx[keep])

    keep = ms > 1
    rows.append(idx[keep])
    cols.append(down_off[keep] + ns[keep] - 1)
    vals.append(-dy[keep])

    rhs = np.zeros(dim)
    rhs[idx[ns == 1]] = dx[ns == 1]  # last resident dies -> mutant fixed, u = 1

    mat = sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )
    u = splu(mat).solve(rhs)
    return [u[(t - 1) * (t - 2) // 2 : t * (t - 1) // 2] for t in range(2, n_max + 1)]


def _solve_gauss_seidel(r: TwoTypeRates, n_max, tol_resid, max_sweeps=50_000):
    """Level-ordered Gauss-Seidel sweeps (forward then backward).

    Within a level no states couple, so each level update is a single
    vectorized assignment using the freshest neighbour levels.
    """
    levels = [np.full(level - 1, 0.5) for level in range(2, n_max + 1)]
    rates = [_level_rates(r, level, n_max) for level in range(2, n_max + 1)]

    def update(idx):
        level = idx + 2
        bx, by, dx, dy = rates[idx]
        size = level - 1
        acc = np.zeros(size)
        acc[0] += dx[0]
        if idx > 0:
            lower = levels[idx - 1]
            acc[1:] += dx[1:] * lower
            acc[: size - 1] += dy[: size - 1] * lower
        if level < n_max:
            upper = levels[idx + 1]
            acc += by * upper[:size] + bx * upper[1 : size + 1]
        levels[idx] = acc / (bx + by + dx + dy)

    order = list(range(n_max - 1))
    for sweep in range(max_sweeps):
        for idx in order:
            update(idx)
        for idx in reversed(order):
            update(idx)
        if sweep % 8 == 7 or sweep < 4:
            if _levels_residual(r, levels, n_max) <= tol_resid:
                return levels
    raise SolverError(
        f"Gauss-Seidel did not reach residual {tol_resid} within {max_sweeps} sweeps"
    )


def _levels_residual(r: TwoTypeRates, levels, n_max):
    """Max normalized first-step residual over all interior states."""
    worst = 0.0
    for idx, u in enumerate(levels):
        level = idx + 2
        bx, by, dx, dy = _level_rates(r, level, n_max)
        size = level - 1
        acc = np.zeros(size)
        acc[0] += dx[0]
        if idx > 0:
            lower = levels[idx - 1]
            acc[1:] += dx[1:] * lower
            acc[: size - 1] += dy[: size - 1] * lower
        if level < n_max:
            upper = levels[idx + 1]
            acc += by * upper[:size] + bx * upper[1 : size + 1]
        res = np.abs(u - acc / (bx + by + dx + dy))
        worst = max(worst, float(res.max()))
    return worst


def _levels_to_grid(levels, n_max):
    """Dense (n_max+1)^2 grid with absorbing boundaries and NaN off-lattice."""
    grid = np.full((n_max + 1, n_max + 1), np.nan)
    grid[0, 1:] = 1.0
    grid[1:, 0] = 0.0
    for idx, u in enumerate(levels):
        level = idx + 2
        n = np.arange(1, level)
        grid[n, level - n] = u
    return grid


@dataclass(frozen=True)
class FixationTable:
    """Solved fixation probabilities u(n, m) on the truncated lattice.

    ``u`` is indexed [n, m] for 0 <= n + m <= n_max (NaN outside);
    ``residual`` is the achieved max first-step residual and
    ``trunc_error`` the sup-difference against the half-size solve on the
    inner quarter lattice.  Immutable and safe to share.
    """

    rates: TwoTypeRates
    n_max: int
    u: np.ndarray
    residual: float
    trunc_error: float

    def prob(self, n, m):
        if n < 0 or m < 0 or n + m < 1 or n + m > self.n_max:
            raise SolverError(f"state ({n}, {m}) outside solved lattice (n_max={self.n_max})")
        return float(self.u[n, m])

    def mutant_column(self):
        """u(n, 1) for n = 1 .. n_max - 1, the column entering chi."""
        n = np.arange(1, self.n_max)
        return self.u[n, 1]

    def to_csv(self, path):
        """Write `n,m,u` rows; table metadata as '#' comment lines."""
        r = self.rates
        lines = [
            f"# rates b_x={r.b_x:.17g} b_y={r.b_y:.17g} c_xx={r.c_xx:.17g}"
            f" c_xy={r.c_xy:.17g} c_yx={r.c_yx:.17g} c_yy={r.c_yy:.17g}",
            f"# n_max={self.n_max} residual={self.residual:.3e} trunc_error={self.trunc_error:.3e}",
            "n,m,u",
        ]
        for total in range(1, self.n_max + 1):
            for n in range(total + 1):
                m = total - n
                lines.append(f"{n},{m},{self.u[n, m]:.17g}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _solve_at(r, n_max, tol_resid, method):
    if method == "direct":
        levels = _solve_direct(r, n_max)
    elif method == "gauss-seidel":
        levels = _solve_gauss_seidel(r, n_max, tol_resid)
    else:
        raise SolverError(f"unknown solver method {method!r}")
    residual = _levels_residual(r, levels, n_max)
    if residual > tol_resid:
        raise SolverError(f"solver residual {residual:.3e} exceeds tol_resid {tol_resid:.3e}")
    lo = min(float(u.min()) for u in levels)
    hi = max(float(u.max()) for u in levels)
    if lo < -1e-9 or hi > 1.0 + 1e-9:
        raise SolverError(f"solution left [0,1]: min={lo}, max={hi}")
    levels = [np.clip(u, 0.0, 1.0) for u in levels]
    return levels, residual


def solve_fixation(
    r: TwoTypeRates,
    tol_trunc=DEFAULT_TOL_TRUNC,
    tol_resid=DEFAULT_TOL_RESID,
    n_max_start=DEFAULT_N_MAX_START,
    n_max_cap=DEFAULT_N_MAX_CAP,
    method="direct",
    min_size=None,
) -> FixationTable:
    """Solve the two-type fixation system on a self-sized truncated lattice.

    Doubles n_max from ``n_max_start`` until the solution changes by at
    most ``tol_trunc`` (sup-norm) on the inner quarter lattice.  When
    ``min_size`` is given, truncation starts high enough that states of
    total size min_size sit within the trusted inner half.

    Parameters
    ----------
    r : TwoTypeRates
    tol_trunc, tol_resid : truncation / linear-system tolerances in (0, 1)
    n_max_start, n_max_cap : doubling start and hard cap on n_max
    method : 'direct' (level elimination) or 'gauss-seidel'
    min_size : minimum total size that must be trusted, or None
    """
    if not (0.0 < tol_trunc < 1.0 and 0.0 < tol_resid < 1.0):
        raise SolverError("tolerances must lie in (0, 1)")
    n_max = max(n_max_start, 8)
    if min_size is not None:
        # the accepted lattice is at least one doubling above the start, so
        # starting at min_size puts it inside the trusted inner half
        while n_max < min_size:
            n_max *= 2
    if n_max > n_max_cap:
        raise SolverError(f"required n_max {n_max} exceeds cap {n_max_cap}")

    prev_levels, _ = _solve_at(r, n_max, tol_resid, method)
    while True:
        n_max *= 2
        if n_max > n_max_cap:
            raise SolverError(
                f"truncation tolerance {tol_trunc} not met before n_max cap {n_max_cap}"
            )
        levels, residual = _solve_at(r, n_max, tol_resid, method)
        quarter = n_max // 4
        diff = 0.0
        for idx in range(0, quarter - 1):  # levels 2 .. quarter
            diff = max(diff, float(np.abs(levels[idx] - prev_levels[idx]).max()))
        if diff <= tol_trunc:
            return FixationTable(
                rates=r,
                n_max=n_max,
                u=_levels_to_grid(levels, n_max),
                residual=residual,
                trunc_error=diff,
            )
        prev_levels = levels


# --- invasion fitness ------------------------------------------------------

def chi_neutral(theta):
    """chi(x, x) = (e^{-theta} - 1 + theta) / theta^2, Taylor branch below 1e-4."""
    if theta <= 0.0:
        raise ModelError(f"theta must be > 0, got {theta}")
    if theta < 1e-4:
        return 0.5 - theta / 6.0 + theta * theta / 24.0
    return (math.exp(-theta) - 1.0 + theta) / (theta * theta)


def _chi_terms(theta, tail_tol):
    """Number of terms so the remaining size-biased (Poisson) tail is < tail_tol."""
    n_end = int(poisson.isf(tail_tol, theta)) + 1
    while poisson.sf(n_end - 1, theta) >= tail_tol:
        n_end += 1
    return n_end


def chi(table: FixationTable, theta=None, tail_tol=CHI_TAIL_TOL):
    """Invasion fitness from a solved table: sum of size-biased weights times u(n, 1).

    ``theta`` defaults to the resident scale b_x / c_xx of the table's
    rates.  Raises SolverError when the table is too small for the required
    Poisson mass (the caller should re-solve with min_size).
    """
    if theta is None:
        theta = table.rates.theta
    if theta <= 0.0:
        raise ModelError(f"theta must be > 0, got {theta}")
    n_end = _chi_terms(theta, tail_tol)
    if n_end + 1 > table.n_max // 2:
        raise SolverError(
            f"n_max={table.n_max} too small for Poisson mass up to n={n_end}; "
            f"re-solve with min_size >= {n_end + 1}"
        )
    n = np.arange(1, n_end + 1)
    val = float(np.sum(size_biased_pmf(theta, n) * table.u[n, 1]))
    return min(max(val, 0.0), 1.0)


def chi_for_rates(
    r: TwoTypeRates,
    tol_trunc=DEFAULT_TOL_TRUNC,
    tol_resid=DEFAULT_TOL_RESID,
    method="direct",
    tail_tol=CHI_TAIL_TOL,
):
    """Solve and sum in one step, sizing the lattice for the Poisson mass."""
    n_end = _chi_terms(r.theta, tail_tol)
    table = solve_fixation(
        r, tol_trunc=tol_trunc, tol_resid=tol_resid, method=method, min_size=n_end + 1
    )
    return chi(table, tail_tol=tail_tol), table


def invasion_fitness(m: ModelSpec, x, y, **kwargs):
    """chi(x, y) for a model and a resident/mutant trait pair."""
    x = as_trait(x, m.k)
    y = as_trait(y, m.k)
    value, _ = chi_for_rates(eval_rates(m, x, y), **kwargs)
    return value
