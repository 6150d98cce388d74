"""Hamilton flows of p, k and the scaled symbol k + lambda^-2 V, with variational blocks.

All integrations go through :func:`flow_batch`, which advances a batch of starts
at once with a single vectorized right-hand side. The state of one trajectory is

    (y, eta, action[, M])

where ``action`` accumulates p(y, eta) + y . d(eta)/dt and ``M`` is the 2n x 2n
derivative of (y, eta) with respect to the start (x, xi).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DivergenceError, DomainError, IntegrationError, PreconditionError
from .symbols import HamiltonianSpec, eval_kinetic

__all__ = [
    "PhasePoint", "FlowKind", "FlowOptions", "Trajectory", "FlowBatch",
    "flow_batch", "integrate_flow", "integrate_variational", "flow_energy",
    "scaled_flow_limit_check", "kinetic_homogeneity_check", "a_priori_bounds",
    "symplectic_defect",
]


@dataclass(frozen=True)
class PhasePoint:
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if x.shape != xi.shape or x.ndim != 1:
            raise PreconditionError("x and xi must be vectors of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
            raise DomainError("phase point has non-finite components")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)

    @property
    def n(self):
        return self.x.size


@dataclass(frozen=True)
class FlowKind:
    """Which Hamiltonian generates the flow: p ("full"), k ("kinetic") or k + lam^-2 V ("scaled")."""

    name: str = "full"
    lam: float = 1.0

    def __post_init__(self):
        if self.name not in ("full", "kinetic", "scaled"):
            raise PreconditionError(f"unknown flow kind {self.name!r}")
        if self.name == "scaled" and not self.lam > 0:
            raise PreconditionError("scaled flow needs lam > 0")

    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def kinetic(cls):
        return cls("kinetic")

    @classmethod
    def scaled(cls, lam):
        return cls("scaled", float(lam))

    @property
    def v_scale(self) -> float:
        if self.name == "full":
            return 1.0
        if self.name == "kinetic":
            return 0.0
        return self.lam ** -2


# scipy refuses relative tolerances below 100 machine epsilons
_RTOL_FLOOR = 100.0 * np.finfo(float).eps * 1.01


@dataclass
class FlowOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = "RK45"
    max_step: float = np.inf
    energy_tol: float | None = None


def flow_energy(spec: HamiltonianSpec, kind: FlowKind, y, eta):
    e = eval_kinetic(spec, y, eta)
    s = kind.v_scale
    if s != 0.0 and spec.has_potential:
        e = e + s * spec.potential.value(y)
    return e


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------

def _rhs_factory(spec: HamiltonianSpec, kind: FlowKind, B: int, variational: bool):
    n = spec.n
    s = kind.v_scale
    use_v = s != 0.0 and spec.has_potential
    width = 2 * n + 1 + (4 * n * n if variational else 0)

    def rhs(t, u):
        U = u.reshape(B, width)
        y = U[:, :n]
        eta = U[:, n:2 * n]
        a = spec.metric.a(y)
        da = spec.metric.da(y)
        ydot = np.einsum("bjk,bk->bj", a, eta)
        etadot = -0.5 * np.einsum("bklj,bk,bl->bj", da, eta, eta)
        if use_v:
            etadot = etadot - s * spec.potential.grad(y)
        energy = 0.5 * np.einsum("bj,bj->b", ydot, eta)
        if use_v:
            energy = energy + s * spec.potential.value(y)
        out = np.empty_like(U)
        out[:, :n] = ydot
        out[:, n:2 * n] = etadot
        out[:, 2 * n] = energy + np.einsum("bj,bj->b", y, etadot)
        if variational:
            M = U[:, 2 * n + 1:].reshape(B, 2 * n, 2 * n)
            A = np.empty((B, 2 * n, 2 * n))
            A[:, :n, :n] = np.einsum("bjkl,bk->bjl", da, eta)
            A[:, :n, n:] = a
            A21 = -0.5 * np.einsum("bkljm,bk,bl->bjm", spec.metric.d2a(y), eta, eta)
            if use_v:
                A21 = A21 - s * spec.potential.hess(y)
            A[:, n:, :n] = A21
            A[:, n:, n:] = -np.einsum("bklj,bk->bjl", da, eta)
            out[:, 2 * n + 1:] = np.matmul(A, M).reshape(B, -1)
        return out.ravel()

    return rhs, width


@dataclass
class FlowBatch:
    """Endpoints (or samples) of a batch of flows.

    Arrays are indexed ``[b, ...]`` for endpoints; when ``times`` has more than one
    entry the sampled arrays carry an extra time axis ``[b, k, ...]``.
    """

    times: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    action: np.ndarray
    M: np.ndarray | None
    energy_drift: np.ndarray
    nfev: int


def flow_batch(spec: HamiltonianSpec, kind: FlowKind, x, xi, t_span, *, t_eval=None,
               variational: bool = False, opts: FlowOptions | None = None) -> FlowBatch:
    """Integrate many starts simultaneously.

    ``x`` and ``xi`` have shape (B, n). The local error test of the underlying
    Runge-Kutta pair uses an RMS norm over the whole state vector; tolerances are
    divided by sqrt(B) so each trajectory individually meets the requested ones.
    """
    opts = opts or FlowOptions()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if x.shape != xi.shape or x.shape[1] != spec.n:
        raise PreconditionError("start arrays must have shape (B, n) matching the spec")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
        raise DomainError("non-finite start")
    B, n = x.shape
    t0, t1 = map(float, t_span)
    rhs, width = _rhs_factory(spec, kind, B, variational)
    U0 = np.zeros((B, width))
    U0[:, :n] = x
    U0[:, n:2 * n] = xi
    if variational:
        U0[:, 2 * n + 1:] = np.eye(2 * n).ravel()[None, :]
    if t_eval is None:
        times = np.array([t0, t1]) if t1 != t0 else np.array([t0])
    else:
        times = np.asarray(t_eval, dtype=float)
        lo, hi = min(t0, t1), max(t0, t1)
        if np.any(times < lo - 1e-14) or np.any(times > hi + 1e-14):
            raise PreconditionError("t_eval outside t_span")

    if t1 == t0:
        samples = np.repeat(U0[:, None, :], len(times), axis=1)
        nfev = 0
    else:
        scale = 1.0 / math.sqrt(B)
        rtol = max(opts.rtol * scale, _RTOL_FLOOR)
        sol = solve_ivp(rhs, (t0, t1), U0.ravel(), method=opts.method,
                        rtol=rtol, atol=opts.atol * scale,
                        max_step=opts.max_step, dense_output=t_eval is not None)
        if sol.status < 0 or not sol.success:
            last = float(sol.t[-1]) if sol.t.size else t0
            if not np.all(np.isfinite(sol.y)):
                raise DivergenceError(f"flow diverged: {sol.message}", last_time=last)
            raise IntegrationError(f"integration failed: {sol.message}", last_time=last)
        if not np.all(np.isfinite(sol.y[:, -1])):
            raise DivergenceError("non-finite state", last_time=float(sol.t[-1]))
        if t_eval is None:
            ends = sol.y[:, [0, -1]]
        else:
            ends = sol.sol(times)
            # dense output at the exact endpoints can differ from the step values
            ends[:, np.isclose(times, t1, rtol=0, atol=0)] = sol.y[:, [-1]]
            ends[:, times == t0] = U0.ravel()[:, None]
        samples = ends.reshape(B, width, len(times)).transpose(0, 2, 1)
        nfev = int(sol.nfev)

    y = samples[:, :, :n]
    eta = samples[:, :, n:2 * n]
    act = samples[:, :, 2 * n]
    M = samples[:, :, 2 * n + 1:].reshape(B, len(times), 2 * n, 2 * n) if variational else None
    E = flow_energy(spec, kind, y, eta)
    drift = np.max(np.abs(E - E[:, :1]), axis=1) / np.maximum(1.0, np.abs(E[:, 0]))
    if opts.energy_tol is not None and np.any(drift > opts.energy_tol):
        raise IntegrationError(f"energy drift {drift.max():.3e} exceeds {opts.energy_tol:.1e}",
                               last_time=t1)
    if t_eval is None:
        y, eta, act = y[:, -1], eta[:, -1], act[:, -1]
        M = M[:, -1] if M is not None else None
    return FlowBatch(times, y, eta, act, M, drift, nfev)


# ---------------------------------------------------------------------------
# single-trajectory API
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    action: np.ndarray
    energy: np.ndarray
    energy_drift: float
    derivative_blocks: np.ndarray | None = None
    kind: FlowKind = field(default_factory=FlowKind)

    @property
    def states(self):
        return [PhasePoint(a, b) for a, b in zip(self.y, self.eta)]

    @property
    def end(self) -> PhasePoint:
        return PhasePoint(self.y[-1], self.eta[-1])

    def to_rows(self):
        """Rows (t, y..., eta..., action, energy_drift) with the running drift."""
        E0 = self.energy[0]
        run = np.maximum.accumulate(np.abs(self.energy - E0) / max(1.0, abs(E0)))
        return np.column_stack([self.times, self.y, self.eta, self.action, run])


def _default_samples(t_span, n_samples):
    return np.linspace(t_span[0], t_span[1], n_samples)


def _trajectory(spec, kind, start, t_span, opts, t_eval, n_samples, variational):
    if not isinstance(start, PhasePoint):
        start = PhasePoint(*start)
    if start.n != spec.n:
        raise PreconditionError("start dimension differs from spec dimension")
    if t_eval is None:
        t_eval = _default_samples(t_span, n_samples)
    fb = flow_batch(spec, kind, start.x[None], start.xi[None], t_span, t_eval=t_eval,
                    variational=variational, opts=opts)
    E = flow_energy(spec, kind, fb.y[0], fb.eta[0])
    return Trajectory(fb.times, fb.y[0], fb.eta[0], fb.action[0], E, float(fb.energy_drift[0]),
                      fb.M[0] if variational else None, kind)


def integrate_flow(spec, kind: FlowKind, start, t_span, opts: FlowOptions | None = None, *,
                   t_eval=None, n_samples: int = 101) -> Trajectory:
    """Solve dy/dt = dH/dxi, deta/dt = -dH/dx for H selected by ``kind``."""
    return _trajectory(spec, kind, start, t_span, opts, t_eval, n_samples, False)


def integrate_variational(spec, kind: FlowKind, start, t_span, opts: FlowOptions | None = None, *,
                          t_eval=None, n_samples: int = 101) -> Trajectory:
    """As :func:`integrate_flow`, also returning d(y, eta)/d(x, xi) at each sample."""
    return _trajectory(spec, kind, start, t_span, opts, t_eval, n_samples, True)


def symplectic_defect(M) -> float:
    """max |M^T J M - J| over a stack of 2n x 2n matrices."""
    M = np.asarray(M)
    n2 = M.shape[-1]
    n = n2 // 2
    J = np.zeros((n2, n2))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return float(np.max(np.abs(np.swapaxes(M, -1, -2) @ J @ M - J)))


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def scaled_flow_limit_check(spec, start, lambdas, t_span, opts=None, n_samples: int = 201):
    """sup_t |(y^lam, eta^lam)(t) - (y~, eta~)(t)| for each lam in an increasing ladder."""
    lambdas = [float(v) for v in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise PreconditionError("lambda ladder must be increasing")
    t_eval = _default_samples(t_span, n_samples)
    ref = integrate_flow(spec, FlowKind.kinetic(), start, t_span, opts, t_eval=t_eval)
    rows = []
    for lam in lambdas:
        tr = integrate_flow(spec, FlowKind.scaled(lam), start, t_span, opts, t_eval=t_eval)
        dev = np.max(np.hypot(np.linalg.norm(tr.y - ref.y, axis=1),
                              np.linalg.norm(tr.eta - ref.eta, axis=1)))
        rows.append({"lam": lam, "deviation": float(dev)})
    return rows


def kinetic_homogeneity_check(spec, start, lam: float, t: float, opts=None) -> float:
    """|y~(t; x, lam xi) - y~(lam t; x, xi)| + |eta~(t; x, lam xi) - lam eta~(lam t; x, xi)|."""
    if not isinstance(start, PhasePoint):
        start = PhasePoint(*start)
    if lam == 1.0:
        return 0.0
    K = FlowKind.kinetic()
    a = flow_batch(spec, K, start.x[None], (lam * start.xi)[None], (0.0, t), opts=opts)
    b = flow_batch(spec, K, start.x[None], start.xi[None], (0.0, lam * t), opts=opts)
    return float(np.linalg.norm(a.y[0] - b.y[0]) + np.linalg.norm(a.eta[0] - lam * b.eta[0]))


def a_priori_bounds(spec, xi_norms, T: float = 1.0, gamma: float = 0.5, n_starts: int = 16,
                    seed: int = 0, opts=None, n_samples: int = 41):
    """Estimate alpha, beta with |y(t)| <= alpha |xi|, |eta(t)| <= beta |xi| on [-T, T].

    Starts satisfy |x| <= gamma |xi|. Returns one row per |xi| value.
    """
    rng = np.random.default_rng(seed)
    n = spec.n
    rows = []
    for r in xi_norms:
        if r <= 1:
            raise PreconditionError("a priori bounds are stated for |xi| > 1")
        d = rng.normal(size=(n_starts, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        xd = rng.normal(size=(n_starts, n))
        xd /= np.linalg.norm(xd, axis=1, keepdims=True)
        x = xd * (gamma * r * rng.uniform(size=(n_starts, 1)))
        xi = r * d
        alpha = beta = 0.0
        for span in ((0.0, -T), (0.0, T)):
            fb = flow_batch(spec, FlowKind.full(), x, xi, span,
                            t_eval=np.linspace(*span, n_samples), opts=opts)
            alpha = max(alpha, float(np.max(np.linalg.norm(fb.y, axis=-1))) / r)
            beta = max(beta, float(np.max(np.linalg.norm(fb.eta, axis=-1))) / r)
        rows.append({"xi_norm": float(r), "alpha": alpha, "beta": beta})
    return rows
