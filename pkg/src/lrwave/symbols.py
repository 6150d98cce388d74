"""Hamiltonian data: metric coefficients, potentials and their closed-form derivatives.

Every field is evaluated batched: a point array of shape ``(..., n)`` gives values
of shape ``(...)`` and derivative tensors with ``n`` trailing axes per order.
The symbols are

    k(x, xi) = 1/2 sum_jk a_jk(x) xi_j xi_k,      p(x, xi) = k(x, xi) + V(x),

with a_jk - delta_jk = O(<x>^-mu) and V = O(<x>^(2-mu)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, PreconditionError, UnsupportedOrderError

__all__ = [
    "ScalarField", "Zero", "JapanesePower", "MonomialTimes", "SineField",
    "CoefficientField", "PotentialField", "HamiltonianSpec",
    "flat", "long_range", "anisotropic", "get_spec", "CATALOG",
    "japanese", "eval_kinetic", "eval_total", "eval_virial",
    "ValidationReport", "validate_decay_assumptions", "log_grid",
    "LipschitzReport", "check_decay_lipschitz",
]


def japanese(x):
    """<x> = (1 + |x|^2)^(1/2) over the last axis."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + np.sum(x * x, axis=-1))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DomainError("non-finite input")


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------

class ScalarField:
    """Smooth real function on R^n with analytic partials up to ``max_order``."""

    max_order = 3

    def derivative(self, x, order: int):
        if order > self.max_order:
            raise UnsupportedOrderError(
                f"{type(self).__name__} provides derivatives up to order {self.max_order}, "
                f"order {order} requested")
        return (self.value, self.grad, self.hess, self.third)[order](x)

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hess(self, x):
        raise NotImplementedError

    def third(self, x):
        raise NotImplementedError


class Zero(ScalarField):
    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1])

    def grad(self, x):
        return np.zeros(np.shape(x))

    def hess(self, x):
        x = np.asarray(x)
        return np.zeros(x.shape + x.shape[-1:])

    def third(self, x):
        x = np.asarray(x)
        return np.zeros(x.shape + x.shape[-1:] * 2)


class JapanesePower(ScalarField):
    """coef * <x>^exponent, written as coef * q^s with q = 1 + |x|^2, s = exponent/2."""

    def __init__(self, coef: float, exponent: float):
        self.coef = float(coef)
        self.exponent = float(exponent)

    def _q(self, x):
        x = np.asarray(x, dtype=float)
        return x, 1.0 + np.sum(x * x, axis=-1)

    def _F(self, q, k):
        # k-th derivative of coef * q^s with respect to q
        s = self.exponent / 2.0
        c = self.coef
        for j in range(k):
            c = c * (s - j)
        return c * q ** (s - k)

    def value(self, x):
        _, q = self._q(x)
        return self._F(q, 0)

    def grad(self, x):
        x, q = self._q(x)
        return (2.0 * self._F(q, 1))[..., None] * x

    def hess(self, x):
        x, q = self._q(x)
        n = x.shape[-1]
        F1 = self._F(q, 1)[..., None, None]
        F2 = self._F(q, 2)[..., None, None]
        return 4.0 * F2 * x[..., :, None] * x[..., None, :] + 2.0 * F1 * np.eye(n)

    def third(self, x):
        x, q = self._q(x)
        n = x.shape[-1]
        F2 = self._F(q, 2)[..., None, None, None]
        F3 = self._F(q, 3)[..., None, None, None]
        I = np.eye(n)
        xi = x[..., :, None, None]
        xj = x[..., None, :, None]
        xk = x[..., None, None, :]
        sym = (I[:, :, None] * xk + I[:, None, :] * xj + I[None, :, :] * xi)
        return 8.0 * F3 * xi * xj * xk + 4.0 * F2 * sym


class MonomialTimes(ScalarField):
    """x_i * x_j * g(x) for a radial factor ``g`` (Leibniz rule on closed forms)."""

    def __init__(self, g: ScalarField, i: int, j: int):
        self.g = g
        self.i = i
        self.j = j

    def _P(self, x):
        n = x.shape[-1]
        i, j = self.i, self.j
        P0 = x[..., i] * x[..., j]
        P1 = np.zeros(x.shape)
        P1[..., i] += x[..., j]
        P1[..., j] += x[..., i]
        P2 = np.zeros((n, n))
        P2[i, j] += 1.0
        P2[j, i] += 1.0
        return P0, P1, P2

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self._P(x)[0] * self.g.value(x)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        P0, P1, _ = self._P(x)
        return P1 * self.g.value(x)[..., None] + P0[..., None] * self.g.grad(x)

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        P0, P1, P2 = self._P(x)
        G0, G1, G2 = self.g.value(x), self.g.grad(x), self.g.hess(x)
        cross = P1[..., :, None] * G1[..., None, :]
        return P2 * G0[..., None, None] + cross + np.swapaxes(cross, -1, -2) + P0[..., None, None] * G2

    def third(self, x):
        x = np.asarray(x, dtype=float)
        P0, P1, P2 = self._P(x)
        G1, G2, G3 = self.g.grad(x), self.g.hess(x), self.g.third(x)
        out = P0[..., None, None, None] * G3
        # terms P_a G_bc over the three placements of the P index
        out = out + P1[..., :, None, None] * G2[..., None, :, :]
        out = out + P1[..., None, :, None] * G2[..., :, None, :]
        out = out + P1[..., None, None, :] * G2[..., :, :, None]
        # terms P_ab G_c
        out = out + P2[:, :, None] * G1[..., None, None, :]
        out = out + P2[:, None, :] * G1[..., None, :, None]
        out = out + P2[None, :, :] * G1[..., :, None, None]
        return out


class SineField(ScalarField):
    """amp * sin(x_axis); bounded but not decaying (violates the decay hypothesis)."""

    def __init__(self, amp: float = 1.0, axis: int = 0):
        self.amp = amp
        self.axis = axis

    def _e(self, x):
        e = np.zeros(x.shape[-1])
        e[self.axis] = 1.0
        return e

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.amp * np.sin(x[..., self.axis])

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return (self.amp * np.cos(x[..., self.axis]))[..., None] * self._e(x)

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        e = self._e(x)
        return (-self.amp * np.sin(x[..., self.axis]))[..., None, None] * np.multiply.outer(e, e)

    def third(self, x):
        x = np.asarray(x, dtype=float)
        e = self._e(x)
        eee = np.multiply.outer(np.multiply.outer(e, e), e)
        return (-self.amp * np.cos(x[..., self.axis]))[..., None, None, None] * eee


# ---------------------------------------------------------------------------
# metric / potential / Hamiltonian
# ---------------------------------------------------------------------------

@dataclass
class CoefficientField:
    """a_jk(x) = delta_jk + perturbation[(j, k)](x).

    Entries missing from ``perturbation`` are zero; an entry given only as (j, k)
    is mirrored to (k, j).
    """

    n: int
    perturbation: dict
    mu: float
    c_low: float
    c_high: float

    def __post_init__(self):
        full = {}
        for (j, k), f in self.perturbation.items():
            full[(j, k)] = f
            full.setdefault((k, j), f)
        self._entries = full

    def entry(self, j, k) -> ScalarField | None:
        return self._entries.get((j, k))

    def _stack(self, x, order):
        x = np.asarray(x, dtype=float)
        n = self.n
        if x.shape[-1] != n:
            raise PreconditionError(f"expected points of dimension {n}, got {x.shape[-1]}")
        out = np.zeros(x.shape[:-1] + (n, n) + (n,) * order)
        for (j, k), f in self._entries.items():
            idx = (Ellipsis, j, k) + (slice(None),) * order
            out[idx] = f.derivative(x, order)
        return out

    def a(self, x):
        return self._stack(x, 0) + np.eye(self.n)

    def perturb(self, x, order=0):
        """Derivative tensor of a_jk - delta_jk; axes (..., j, k, l1, ..., l_order)."""
        return self._stack(x, order)

    def da(self, x):
        return self._stack(x, 1)

    def d2a(self, x):
        return self._stack(x, 2)

    def d3a(self, x):
        return self._stack(x, 3)


@dataclass
class PotentialField:
    V: ScalarField
    max_order: int = 2

    def derivative(self, x, order):
        if order > self.max_order:
            raise UnsupportedOrderError(f"potential derivatives available up to order {self.max_order}")
        return self.V.derivative(x, order)

    def value(self, x):
        return self.V.value(x)

    def grad(self, x):
        return self.V.grad(x)

    def hess(self, x):
        return self.V.hess(x)


@dataclass
class HamiltonianSpec:
    name: str
    metric: CoefficientField
    potential: PotentialField
    mu: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.metric.mu - self.mu) > 0:
            raise PreconditionError("metric decay exponent differs from the spec exponent")
        if self.mu <= 0:
            raise PreconditionError("mu must be positive")

    @property
    def n(self) -> int:
        return self.metric.n

    @property
    def has_potential(self) -> bool:
        return not isinstance(self.potential.V, Zero)

    def with_potential(self, potential: PotentialField, name=None) -> "HamiltonianSpec":
        return HamiltonianSpec(name or self.name, self.metric, potential, self.mu, dict(self.params))

    def without_potential(self) -> "HamiltonianSpec":
        return HamiltonianSpec(self.name + "[V=0]", self.metric, PotentialField(Zero()), self.mu,
                               dict(self.params))

    def describe(self) -> dict:
        return {"name": self.name, "n": self.n, "mu": self.mu, **self.params}

    # Hamilton vector field pieces -------------------------------------------------
    def dp_dxi(self, x, xi):
        """grad_xi k = a(x) xi."""
        return np.einsum("...jk,...k->...j", self.metric.a(x), xi)

    def dk_dx(self, x, xi):
        """grad_x k: 1/2 sum_kl d_j a_kl xi_k xi_l."""
        return 0.5 * np.einsum("...klj,...k,...l->...j", self.metric.da(x), xi, xi)

    def dp_dx(self, x, xi, v_scale=1.0):
        g = self.dk_dx(x, xi)
        if v_scale != 0.0 and self.has_potential:
            g = g + v_scale * self.potential.grad(x)
        return g


def eval_kinetic(spec: HamiltonianSpec, x, xi):
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    _check_finite(x, xi)
    return 0.5 * np.einsum("...jk,...j,...k->...", spec.metric.a(x), xi, xi)


def eval_total(spec: HamiltonianSpec, x, xi):
    x = np.asarray(x, dtype=float)
    return eval_kinetic(spec, x, xi) + spec.potential.value(x)


def eval_virial(spec: HamiltonianSpec, x, xi):
    """Correction U in d^2/dt^2 |y|^2 = 4k + U along the kinetic flow."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    _check_finite(x, xi)
    a = spec.metric.a(x)
    P = spec.metric.perturb(x)
    da = spec.metric.da(x)
    t1 = 2.0 * np.einsum("...jk,...jl,...l,...k->...", a, P, xi, xi)
    t2 = np.einsum("...jk,...lmk,...j,...l,...m->...", a, da, x, xi, xi)
    t3 = 2.0 * np.einsum("...jkl,...lm,...j,...k,...m->...", da, a, x, xi, xi)
    return t1 - t2 + t3


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def flat(n: int = 1) -> HamiltonianSpec:
    metric = CoefficientField(n, {}, mu=1.0, c_low=1.0, c_high=1.0)
    return HamiltonianSpec("FLAT", metric, PotentialField(Zero()), 1.0, {})


def _potential(kind, v0, mu):
    if kind in (None, "none") or v0 == 0.0:
        return PotentialField(Zero())
    if kind == "bounded":
        return PotentialField(JapanesePower(v0, -mu))
    if kind == "growing":
        return PotentialField(JapanesePower(v0, 2.0 - mu))
    raise PreconditionError(f"unknown potential kind {kind!r}")


def long_range(c: float = 0.5, mu: float = 0.8, n: int = 1, v0: float = 0.0,
               potential: str = "bounded") -> HamiltonianSpec:
    """LR(c, mu): a_jk = delta_jk (1 + c <x>^-mu), optional V = v0 <x>^-mu or v0 <x>^(2-mu)."""
    if c <= -1.0:
        raise PreconditionError("LR metric requires c > -1 for ellipticity")
    g = JapanesePower(c, -mu)
    metric = CoefficientField(n, {(j, j): g for j in range(n)}, mu=mu,
                              c_low=1.0 + min(c, 0.0), c_high=1.0 + max(c, 0.0))
    params = {"c": c, "mu": mu}
    if v0:
        params.update(v0=v0, potential=potential)
    return HamiltonianSpec("LR", metric, _potential(potential, v0, mu), mu, params)


def anisotropic(c: float = 0.5, d: float = 0.4, mu: float = 0.8, v0: float = 0.0,
                potential: str = "bounded") -> HamiltonianSpec:
    """2D metric with an off-diagonal entry d * x1 x2 <x>^(-2-mu)."""
    if 1.0 + min(c, 0.0) - abs(d) / 2.0 <= 0.0:
        raise PreconditionError("anisotropic parameters violate ellipticity")
    g = JapanesePower(c, -mu)
    off = MonomialTimes(JapanesePower(d, -2.0 - mu), 0, 1)
    metric = CoefficientField(2, {(0, 0): g, (1, 1): g, (0, 1): off}, mu=mu,
                              c_low=1.0 + min(c, 0.0) - abs(d) / 2.0,
                              c_high=1.0 + max(c, 0.0) + abs(d) / 2.0)
    params = {"c": c, "d": d, "mu": mu}
    if v0:
        params.update(v0=v0, potential=potential)
    return HamiltonianSpec("ANISO", metric, _potential(potential, v0, mu), mu, params)


CATALOG: dict[str, Callable[..., HamiltonianSpec]] = {
    "FLAT": flat,
    "LR": long_range,
    "ANISO": anisotropic,
}


def get_spec(name: str, **params) -> HamiltonianSpec:
    try:
        factory = CATALOG[name.upper()]
    except KeyError:
        raise PreconditionError(f"unknown spec {name!r}; choose from {sorted(CATALOG)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def log_grid(n: int, r_max: float = 1e3, r_min: float = 1e-2, n_radii: int = 160,
             n_dirs: int = 8, seed: int = 0) -> np.ndarray:
    """Origin plus logarithmically spaced radii along a fixed set of directions."""
    radii = np.geomspace(r_min, r_max, n_radii)
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        rng = np.random.default_rng(seed)
        axes = np.vstack([np.eye(n), -np.eye(n)])
        diag = np.ones((1, n)) / math.sqrt(n)
        rand = rng.normal(size=(n_dirs, n))
        rand /= np.linalg.norm(rand, axis=1, keepdims=True)
        dirs = np.vstack([axes, diag, -diag, rand])
    pts = (radii[None, :, None] * dirs[:, None, :]).reshape(-1, n)
    return np.vstack([np.zeros((1, n)), pts])


@dataclass
class ValidationReport:
    constants: dict          # "metric/0", "potential/1", ... -> smallest C on the grid
    passed: dict             # same keys -> bool
    symmetry_error: float
    ellipticity: tuple       # (min, max) eigenvalue observed
    ellipticity_ok: bool
    virial_constant: float
    ok: bool

    def as_dict(self):
        return {
            "constants": self.constants, "passed": self.passed,
            "symmetry_error": self.symmetry_error,
            "ellipticity": list(self.ellipticity), "ellipticity_ok": self.ellipticity_ok,
            "virial_constant": self.virial_constant, "ok": self.ok,
        }


def _decay_constant(q, radius, growth_tol):
    """Smallest C with q <= C on the grid, and whether q stays bounded at large radius."""
    C = float(np.max(q))
    if C == 0.0:
        return 0.0, True
    lr = np.log(np.maximum(radius, 1e-300))
    mid = 0.5 * (lr.max() + np.log(1.0))
    inner = q[lr <= mid]
    outer = q[lr > mid]
    bounded = outer.size == 0 or float(outer.max()) <= growth_tol * max(float(inner.max(initial=0.0)), 1e-300)
    return C, bool(bounded)


def validate_decay_assumptions(spec: HamiltonianSpec, grid=None, max_order: int = 3,
                               growth_tol: float = 2.0, n_xi: int = 16) -> ValidationReport:
    """Grid check of symmetry, ellipticity and the symbol-type decay bounds.

    For each order k the reported constant is max_x max_alpha |d^alpha (a - I)(x)| <x>^(mu+k)
    (metric) or max |d^alpha V| <x>^(k+mu-2) (potential); an order passes when this
    normalised quantity does not grow between the inner and outer halves of the
    (logarithmic) radial range.
    """
    if max_order > 3:
        raise UnsupportedOrderError("closed-form derivatives are provided up to order 3")
    n = spec.n
    X = log_grid(n) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    if X.size == 0:
        raise PreconditionError("validation grid is empty")
    _check_finite(X)
    jx = japanese(X)
    radius = np.linalg.norm(X, axis=-1)
    mu = spec.mu
    constants, passed = {}, {}
    for k in range(max_order + 1):
        T = spec.metric.perturb(X, k)
        q = np.abs(T).reshape(len(X), -1).max(axis=1) * jx ** (mu + k)
        constants[f"metric/{k}"], passed[f"metric/{k}"] = _decay_constant(q, radius, growth_tol)
    for k in range(min(max_order, spec.potential.max_order) + 1):
        D = np.asarray(spec.potential.derivative(X, k))
        q = np.abs(D).reshape(len(X), -1).max(axis=1) * jx ** (k + mu - 2.0)
        constants[f"potential/{k}"], passed[f"potential/{k}"] = _decay_constant(q, radius, growth_tol)

    A = spec.metric.a(X)
    sym = float(np.max(np.abs(A - np.swapaxes(A, -1, -2))))
    eig = np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2)))
    lo, hi = float(eig.min()), float(eig.max())
    ell_ok = lo >= spec.metric.c_low * (1 - 1e-12) and hi <= spec.metric.c_high * (1 + 1e-12) and lo > 0

    # virial constant: |U| <x>^mu / |xi|^2 over unit covectors
    rng = np.random.default_rng(1)
    dirs = rng.normal(size=(n_xi, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    U = eval_virial(spec, X[:, None, :], dirs[None, :, :])
    virial_C = float(np.max(np.abs(U) * jx[:, None] ** mu))

    ok = all(passed.values()) and sym == 0.0 and ell_ok
    return ValidationReport(constants, passed, sym, (lo, hi), bool(ell_ok), virial_C, bool(ok))


@dataclass
class LipschitzReport:
    max_ratio: float
    n_pairs: int
    passed: bool


def check_decay_lipschitz(f, C: float, beta: float, X, Y) -> LipschitzReport:
    """Check |f(x) - f(y)| <= (pi/2) C max(<x>^beta, <y>^beta) |x - y| on sample pairs.

    ``f`` maps points ``(..., n)`` to values and must satisfy |grad f| <= C <x>^beta.
    In one dimension the pairs must lie on the same side of the origin.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape != Y.shape:
        raise PreconditionError("pair arrays must have equal shapes")
    if X.shape[-1] == 1 and np.any(np.sum(X * Y, axis=-1) <= 0):
        raise PreconditionError("in one dimension every pair needs x*y > 0")
    num = np.abs(np.asarray(f(X)) - np.asarray(f(Y)))
    dist = np.linalg.norm(X - Y, axis=-1)
    bound = 0.5 * np.pi * C * np.maximum(japanese(X) ** beta, japanese(Y) ** beta) * dist
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, num / bound, np.where(num > 0, np.inf, 0.0))
    m = float(ratio.max()) if ratio.size else 0.0
    return LipschitzReport(m, len(X), bool(m <= 1.0))
