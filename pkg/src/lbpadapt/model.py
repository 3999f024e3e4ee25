"""Model definition: trait space, rate functions and the selection-coefficient basis.

A scenario is a :class:`ModelSpec`: trait dimension k, birth rate b(x),
competition kernel c(x, y), mutation probability mu(x) and a Gaussian
mutation kernel.  Any resident/mutant pair maps to a six-rate
:class:`TwoTypeRates`, and deviations from selective neutrality decompose
into the four signed coefficients (lambda, delta, alpha, epsilon):

    b_x  = b           c_xx = c
    b_y  = b + lambda  c_xy = c + alpha - epsilon
                       c_yx = c - delta - epsilon
                       c_yy = c - delta + alpha

The decomposition is a linear bijection; ``selection_coefficients`` and
``reconstruct_rates`` invert each other exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, ExpressionError, ModelError
from .expr import RateExpression, parse_expression

DEFAULT_C_MIN = 1e-12
GRAD_STEP = 1e-5  # relative central-difference step for trait gradients

KERNEL_KINDS = ("isotropic-gaussian", "diagonal-gaussian", "full-gaussian")


def as_trait(x, k):
    """Coerce ``x`` to a finite float vector of length k."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (k,):
        raise ModelError(f"trait point has shape {arr.shape}, expected ({k},)")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"trait point contains non-finite entries: {arr}")
    return arr


@dataclass(frozen=True)
class MutationKernel:
    """Zero-mean Gaussian law of the mutant trait step h = y - x.

    ``sigma(x)`` is the k x k square-root matrix of the covariance;
    sampled steps are sigma(x) @ z with z standard normal.
    """

    kind: str
    sigma: Callable[[np.ndarray], np.ndarray]
    k: int

    def sigma_matrix(self, x):
        s = np.asarray(self.sigma(x), dtype=float)
        if s.shape != (self.k, self.k):
            raise ModelError(f"sigma(x) has shape {s.shape}, expected ({self.k},{self.k})")
        return s

    def sample(self, x, rng, size=None):
        """Draw mutation steps at resident trait ``x``."""
        s = self.sigma_matrix(x)
        if size is None:
            return s @ rng.standard_normal(self.k)
        z = rng.standard_normal((size, self.k))
        return z @ s.T

    @staticmethod
    def gaussian(k, sigma):
        """Build a constant kernel from a scalar, length-k vector or k x k matrix."""
        arr = np.atleast_1d(np.asarray(sigma, dtype=float))
        if arr.ndim == 1 and arr.size == 1:
            mat = float(arr[0]) * np.eye(k)
            kind = "isotropic-gaussian"
        elif arr.ndim == 1 and arr.size == k:
            mat = np.diag(arr)
            kind = "diagonal-gaussian"
        elif arr.shape == (k, k):
            mat = arr.copy()
            kind = "full-gaussian"
        else:
            raise ModelError(f"sigma of shape {arr.shape} incompatible with k={k}")
        return MutationKernel(kind=kind, sigma=lambda x, _m=mat: _m, k=k)


@dataclass(frozen=True)
class ModelSpec:
    """Complete scenario definition; the single source of truth for all modules."""

    k: int
    birth: RateExpression
    comp: RateExpression
    mut_prob: RateExpression
    kernel: MutationKernel
    c_min: float = DEFAULT_C_MIN

    def b(self, x):
        val = self.birth(as_trait(x, self.k))
        if val <= 0.0:
            raise ModelError(f"b(x) = {val} <= 0 at x={x}")
        return val

    def c(self, x, y):
        val = self.comp(as_trait(x, self.k), as_trait(y, self.k))
        if val < self.c_min:
            raise ModelError(f"c(x,y) = {val} below c_min = {self.c_min}")
        return val

    def mu(self, x):
        val = self.mut_prob(as_trait(x, self.k))
        if not 0.0 <= val <= 1.0:
            raise ModelError(f"mu(x) = {val} outside [0, 1]")
        return val

    def theta(self, x):
        """Stationary-law scale b(x)/c(x,x)."""
        return self.b(x) / self.c(x, x)


@dataclass(frozen=True)
class TwoTypeRates:
    """The six rates of the resident/mutant bivariate chain.

    ``c_xy`` is the death rate of an x-individual per y-individual present.
    """

    b_x: float
    b_y: float
    c_xx: float
    c_xy: float
    c_yx: float
    c_yy: float

    def __post_init__(self):
        for name, val in self.__dict__.items():
            if not math.isfinite(val) or val <= 0.0:
                raise ModelError(f"rate {name} = {val} must be strictly positive and finite")

    def as_tuple(self):
        return (self.b_x, self.b_y, self.c_xx, self.c_xy, self.c_yx, self.c_yy)

    @property
    def theta(self):
        """Resident stationary-law scale b_x / c_xx."""
        return self.b_x / self.c_xx


@dataclass(frozen=True)
class SelectionCoefficients:
    """Deviation of a two-type rate set from selective neutrality.

    Signs follow the convention that a positive coefficient advantages the
    mutant: lambda (fertility), delta (defence), alpha (aggressiveness),
    epsilon (isolation).
    """

    base_b: float
    base_c: float
    lam: float = 0.0
    delta: float = 0.0
    alpha: float = 0.0
    epsilon: float = 0.0

    def as_array(self):
        return np.array([self.lam, self.delta, self.alpha, self.epsilon])


def eval_rates(m: ModelSpec, x, y) -> TwoTypeRates:
    """Evaluate the six two-type rates of resident x against mutant y."""
    x = as_trait(x, m.k)
    y = as_trait(y, m.k)
    return TwoTypeRates(
        b_x=m.b(x),
        b_y=m.b(y),
        c_xx=m.c(x, x),
        c_xy=m.c(x, y),
        c_yx=m.c(y, x),
        c_yy=m.c(y, y),
    )


def selection_coefficients(r: TwoTypeRates) -> SelectionCoefficients:
    """Decompose a rate set into base rates plus (lambda, delta, alpha, epsilon).

    Inverse of :func:`reconstruct_rates`; the linear system
    c_xy = c + alpha - epsilon, c_yx = c - delta - epsilon,
    c_yy = c - delta + alpha has the unique solution below (checked by the
    round-trip property tests).
    """
    lam = r.b_y - r.b_x
    alpha = (r.c_xy - r.c_xx + r.c_yy - r.c_yx) / 2.0
    epsilon = (r.c_xx - r.c_xy + r.c_yy - r.c_yx) / 2.0
    delta = (r.c_xx - r.c_yy + r.c_xy - r.c_yx) / 2.0
    return SelectionCoefficients(
        base_b=r.b_x, base_c=r.c_xx,
        lam=lam, delta=delta, alpha=alpha, epsilon=epsilon,
    )


def reconstruct_rates(s: SelectionCoefficients) -> TwoTypeRates:
    """Rebuild the six rates from base rates and selection coefficients.

    Raises :class:`ModelError` when a reconstructed rate is non-positive
    (coefficients too large for the base rates).
    """
    return TwoTypeRates(
        b_x=s.base_b,
        b_y=s.base_b + s.lam,
        c_xx=s.base_c,
        c_xy=s.base_c + s.alpha - s.epsilon,
        c_yx=s.base_c - s.delta - s.epsilon,
        c_yy=s.base_c - s.delta + s.alpha,
    )


def _central_gradient(f, x, k):
    """Componentwise central difference with step GRAD_STEP * max(1, |x_i|)."""
    g = np.empty(k)
    for i in range(k):
        h = GRAD_STEP * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def grad_b(m: ModelSpec, x):
    """Gradient of b at x."""
    x = as_trait(x, m.k)
    return _central_gradient(lambda z: m.b(z), x, m.k)


def grad_c1(m: ModelSpec, x):
    """Gradient of c(., .) in its first argument, evaluated at (x, x)."""
    x = as_trait(x, m.k)
    return _central_gradient(lambda z: m.c(z, x), x, m.k)


def grad_c2(m: ModelSpec, x):
    """Gradient of c(., .) in its second argument, evaluated at (x, x)."""
    x = as_trait(x, m.k)
    return _central_gradient(lambda z: m.c(x, z), x, m.k)


# --- configuration text -------------------------------------------------
#
# key = value lines (';' also separates statements), '#' comments,
# sections [model] and [mutation].  Keys before any section header belong
# to [model].  [model]: k, b, c, mu, c_min.  [mutation]: kind, sigma.
# A repeated `sigma` key appends one matrix row per occurrence.

_MODEL_KEYS = {"k", "b", "c", "mu", "c_min"}
_MUTATION_KEYS = {"kind", "sigma"}


def _split_statements(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for stmt in line.split(";"):
            stmt = stmt.strip()
            if stmt:
                yield lineno, stmt


def _parse_numbers(value, key, lineno):
    parts = [p for p in re.split(r"[,\s]+", value.strip()) if p]
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} expects numbers, got {value!r}") from None


def parse_model(config_text: str) -> ModelSpec:
    """Parse configuration text into a ModelSpec.

    Unknown keys or sections are rejected; expression errors carry the
    offending column.  Defaults: mu = 0, c_min = 1e-12, and an isotropic
    unit-variance mutation kernel when no [mutation] section is given.
    """
    section = "model"
    values = {"model": {}, "mutation": {}}
    sigma_rows = []

    for lineno, stmt in _split_statements(config_text):
        header = re.fullmatch(r"\[(\w+)\]", stmt)
        if header:
            section = header.group(1)
            if section not in values:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in stmt:
            raise ConfigError(f"line {lineno}: expected key = value, got {stmt!r}")
        key, _, value = stmt.partition("=")
        key = key.strip()
        value = value.strip()
        allowed = _MODEL_KEYS if section == "model" else _MUTATION_KEYS
        if key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in section [{section}]")
        if section == "mutation" and key == "sigma":
            sigma_rows.append(_parse_numbers(value, "sigma", lineno))
            continue
        if key in values[section]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[section][key] = (lineno, value)

    model = values["model"]
    if "k" not in model:
        raise ConfigError("missing required key 'k'")
    try:
        k = int(model["k"][1])
    except ValueError:
        raise ConfigError(f"k must be an integer, got {model['k'][1]!r}") from None
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    for required in ("b", "c"):
        if required not in model:
            raise ConfigError(f"missing required key {required!r}")

    def compile_expr(key, allow_y, default=None):
        if key not in model:
            return parse_expression(default, k, allow_y=allow_y)
        lineno, text = model[key]
        try:
            return parse_expression(text, k, allow_y=allow_y)
        except ExpressionError as exc:
            raise ConfigError(f"line {lineno}: in {key!r}: {exc}") from exc

    birth = compile_expr("b", allow_y=False)
    comp = compile_expr("c", allow_y=True)
    mut = compile_expr("mu", allow_y=False, default="0")

    c_min = DEFAULT_C_MIN
    if "c_min" in model:
        c_min = _parse_numbers(model["c_min"][1], "c_min", model["c_min"][0])[0]
        if c_min <= 0.0:
            raise ConfigError(f"c_min must be > 0, got {c_min}")

    mutation = values["mutation"]
    kind = mutation.get("kind", (0, "isotropic-gaussian"))[1]
    if kind not in KERNEL_KINDS:
        raise ConfigError(f"unknown mutation kind {kind!r}; expected one of {KERNEL_KINDS}")
    if not sigma_rows:
        sigma_rows = [[1.0]]
    if kind == "isotropic-gaussian":
        if len(sigma_rows) != 1 or len(sigma_rows[0]) != 1:
            raise ConfigError("isotropic-gaussian expects a single scalar sigma")
        kernel = MutationKernel.gaussian(k, sigma_rows[0][0])
    elif kind == "diagonal-gaussian":
        if len(sigma_rows) != 1 or len(sigma_rows[0]) != k:
            raise ConfigError(f"diagonal-gaussian expects one row of {k} sigma values")
        kernel = MutationKernel.gaussian(k, np.array(sigma_rows[0]))
    else:
        if len(sigma_rows) != k or any(len(row) != k for row in sigma_rows):
            raise ConfigError(f"full-gaussian expects {k} sigma rows of {k} values")
        kernel = MutationKernel.gaussian(k, np.array(sigma_rows))

    return ModelSpec(k=k, birth=birth, comp=comp, mut_prob=mut, kernel=kernel, c_min=c_min)


def constant_model(b, c, mu=0.0, k=1, sigma=1.0, c_min=DEFAULT_C_MIN):
    """Convenience constructor for a model with constant rates."""
    return ModelSpec(
        k=k,
        birth=parse_expression(repr(float(b)), k),
        comp=parse_expression(repr(float(c)), k, allow_y=True),
        mut_prob=parse_expression(repr(float(mu)), k),
        kernel=MutationKernel.gaussian(k, sigma),
        c_min=c_min,
    )
