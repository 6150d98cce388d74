"""Momentum-space Hamilton-Jacobi phase W(t, xi) for t in [t_min, 0].

High frequencies (|xi| >= c4R + 1) use the characteristics issued from the sphere
of radius R:

    Lambda_t(zeta) = eta(t; -R zeta/|zeta|, zeta),     zeta = Lambda_t^{-1}(xi),
    W(t, xi) = int_0^t (p + y . d(eta)/ds) ds - R |zeta|,
    d_xi W = y(t; -R zeta/|zeta|, zeta),     d_t W = p(d_xi W, xi).

Low frequencies (|xi| <= c4R) use W = -R|xi| + t|xi|^2/2, and the band in between
is a smooth blend. The module also provides the modified flows S_t = T_t o exp(tH_p)
with T_t(x, xi) = (x - d_xi W(t, xi), xi), and the flow of the effective symbol

    l(t; x, xi) = p(x + d_xi W(t, xi), xi) - d_t W(t, xi).
"""
from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError, InversionError, PreconditionError, RangeError
from .flows import FlowKind, FlowOptions, flow_batch
from .symbols import HamiltonianSpec, eval_total

__all__ = [
    "smooth_step", "HJOptions", "HJSolution", "HJValues", "lambda_map", "invert_lambda",
    "calibrate", "build_hj", "build_W", "eval_effective_symbol", "modified_flow",
    "modified_flow_composed", "S_t", "S_t_inverse", "transport_pushforward",
    "hj_residual_fd", "w_table_csv", "R_CANDIDATES",
]

R_CANDIDATES = (10.0, 20.0, 40.0, 80.0)


# ---------------------------------------------------------------------------
# smooth step built from exp(-1/s)
# ---------------------------------------------------------------------------

def _f(s):
    out = np.zeros_like(s)
    m = s > 0
    out[m] = np.exp(-1.0 / s[m])
    return out


_EDGE = 0.0025


def smooth_step(s):
    """Return (step, step', step'') for step(s) = f(s) / (f(s) + f(1 - s)), f = exp(-1/s)."""
    s = np.asarray(s, dtype=float)
    # within EDGE of 0 or 1 the step is flat to below 1e-160; skip it to avoid 0/0
    st = np.where(s >= 1.0 - _EDGE, 1.0, 0.0)
    d1 = np.zeros_like(s)
    d2 = np.zeros_like(s)
    m = (s > _EDGE) & (s < 1.0 - _EDGE)
    if np.any(m):
        u = s[m]
        v = 1.0 - u
        f = np.exp(-1.0 / u)
        g = np.exp(-1.0 / v)
        f1 = f / u ** 2
        f2 = f * (1.0 / u ** 4 - 2.0 / u ** 3)
        g1 = -g / v ** 2
        g2 = g * (1.0 / v ** 4 - 2.0 / v ** 3)
        D = f + g
        N = f1 * g - f * g1
        N1 = f2 * g - f * g2
        st[m] = f / D
        d1[m] = N / D ** 2
        d2[m] = N1 / D ** 2 - 2.0 * N * (f1 + g1) / D ** 3
    return st, d1, d2


# ---------------------------------------------------------------------------
# Lambda map and its inversion
# ---------------------------------------------------------------------------

@dataclass
class HJOptions:
    rtol: float = 1e-12
    atol: float = 1e-12
    method: str = "DOP853"
    newton_tol: float = 1e-10
    max_iter: int = 20
    chunk: int = 64

    def flow_opts(self):
        return FlowOptions(rtol=self.rtol, atol=self.atol, method=self.method)


def _unit(xi):
    r = np.linalg.norm(xi, axis=-1, keepdims=True)
    return xi / r, r[..., 0]


def _proj_perp(u):
    n = u.shape[-1]
    return np.eye(n) - u[..., :, None] * u[..., None, :]


def _anchor_flow(spec, t, zeta, R, opts: HJOptions, variational=True):
    """Full flow from (-R zeta^, zeta) to time t, chunked. Returns y, eta, action, M."""
    zeta = np.atleast_2d(zeta)
    zhat, _ = _unit(zeta)
    x0 = -R * zhat
    B, n = zeta.shape
    y = np.empty((B, n))
    eta = np.empty((B, n))
    act = np.empty(B)
    M = np.empty((B, 2 * n, 2 * n)) if variational else None
    for s in range(0, B, opts.chunk):
        sl = slice(s, min(B, s + opts.chunk))
        fb = flow_batch(spec, FlowKind.full(), x0[sl], zeta[sl], (0.0, t),
                        variational=variational, opts=opts.flow_opts())
        y[sl], eta[sl], act[sl] = fb.y, fb.eta, fb.action
        if variational:
            M[sl] = fb.M
    return y, eta, act, M


def _dx0_dzeta(zeta, R):
    zhat, r = _unit(zeta)
    return -R * _proj_perp(zhat) / r[:, None, None]


def lambda_map(spec: HamiltonianSpec, t: float, xi, R: float, opts: HJOptions | None = None,
               c0: float = 1.0):
    """Lambda_t(xi) = eta(t; -R xi/|xi|, xi) for a batch of covectors ``xi`` (B, n).

    Returns (values, warnings) where ``warnings`` flags entries with |xi| < c0 R.
    """
    opts = opts or HJOptions()
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if t > 0:
        raise RangeError("the Lambda map is used for t <= 0")
    _, eta, _, _ = _anchor_flow(spec, t, xi, R, opts, variational=False)
    low = np.linalg.norm(xi, axis=-1) < c0 * R
    return eta, low


def _lambda_jac(M, zeta, R):
    n = zeta.shape[-1]
    dx0 = _dx0_dzeta(zeta, R)
    return np.matmul(M[:, n:, :n], dx0) + M[:, n:, n:]


def invert_lambda(spec, t, xi_target, R, opts: HJOptions | None = None, zeta0=None,
                  return_info: bool = False):
    """Newton solve of Lambda_t(zeta) = xi_target with the variational Jacobian.

    Iterations count evaluations of Lambda (each one gives the Jacobian too); an
    already-solved start costs one.
    """
    opts = opts or HJOptions()
    xt = np.atleast_2d(np.asarray(xi_target, dtype=float))
    zeta = xt.copy() if zeta0 is None else np.atleast_2d(np.asarray(zeta0, dtype=float)).copy()
    B, n = xt.shape
    active = np.ones(B, dtype=bool)
    iters = np.zeros(B, dtype=int)
    history = []
    out = {"y": np.empty((B, n)), "eta": np.empty((B, n)), "action": np.empty(B),
           "M": np.empty((B, 2 * n, 2 * n)), "DL": np.empty((B, n, n))}
    for _ in range(opts.max_iter):
        idx = np.flatnonzero(active)
        y, eta, act, M = _anchor_flow(spec, t, zeta[idx], R, opts)
        DL = _lambda_jac(M, zeta[idx], R)
        res = eta - xt[idx]
        rn = np.linalg.norm(res, axis=-1)
        history.append(float(rn.max()))
        iters[idx] += 1
        done = rn <= opts.newton_tol
        d_idx = idx[done]
        out["y"][d_idx], out["eta"][d_idx], out["action"][d_idx] = y[done], eta[done], act[done]
        out["M"][d_idx], out["DL"][d_idx] = M[done], DL[done]
        active[d_idx] = False
        if not active.any():
            break
        nd = ~done
        step = np.linalg.solve(DL[nd], res[nd][..., None])[..., 0]
        zeta[idx[nd]] -= step
    else:
        raise InversionError(f"Newton did not converge in {opts.max_iter} iterations "
                             f"(t={t}, worst residual {history[-1]:.3e})", history)
    if return_info:
        out.update(zeta=zeta, iterations=iters, history=history)
        return out
    return zeta


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def _probe_dirs(n, k=6, seed=0):
    if n == 1:
        return np.array([[1.0], [-1.0]])
    rng = np.random.default_rng(seed)
    d = np.vstack([np.eye(n), -np.eye(n), rng.normal(size=(k, n))])
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def calibrate(spec, t_min: float, candidates=R_CANDIDATES, c0: float = 1.0, n_radii: int = 12,
              opts: HJOptions | None = None):
    """Pick R and c4 from a monotone search.

    R is the first candidate with ||dLambda/dxi - I|| <= 0.5 over |xi| in [c0 R, 100 R]
    (times t_min and t_min/2), and c4 = 2 (max |Lambda(xi) - xi|/|xi| + 1).
    """
    opts = opts or HJOptions()
    dirs = _probe_dirs(spec.n)
    report = []
    for R in candidates:
        radii = np.geomspace(c0 * R, 100.0 * R, n_radii)
        xi = (radii[:, None, None] * dirs[None]).reshape(-1, spec.n)
        worst_jac = 0.0
        worst_rel = 0.0
        for t in (t_min, 0.5 * t_min):
            _, eta, _, M = _anchor_flow(spec, t, xi, R, opts)
            DL = _lambda_jac(M, xi, R)
            worst_jac = max(worst_jac, float(np.max(np.linalg.norm(DL - np.eye(spec.n), ord=2, axis=(1, 2)))))
            worst_rel = max(worst_rel, float(np.max(np.linalg.norm(eta - xi, axis=-1) / radii.repeat(len(dirs)))))
        report.append({"R": R, "jacobian_defect": worst_jac, "relative_shift": worst_rel})
        if worst_jac <= 0.5:
            return R, 2.0 * (worst_rel + 1.0), report
    raise PreconditionError(f"no R in {list(candidates)} passed the Lambda-map calibration")


# ---------------------------------------------------------------------------
# W
# ---------------------------------------------------------------------------

@dataclass
class HJValues:
    W: np.ndarray
    dW: np.ndarray        # d_xi W, (B, n)
    dtW: np.ndarray
    d2W: np.ndarray | None = None   # d_xi^2 W, (B, n, n)
    dtdW: np.ndarray | None = None  # d_t d_xi W, (B, n)
    branch: np.ndarray | None = None
    zeta: np.ndarray | None = None


@dataclass
class HJSolution:
    spec: HamiltonianSpec
    R: float
    c4: float
    t_min: float
    opts: HJOptions = field(default_factory=HJOptions)
    use_cache: bool = True
    calibration: list = field(default_factory=list)

    def __post_init__(self):
        if self.t_min > 0:
            raise PreconditionError("t_min must be <= 0")
        self._cache = {}
        self._lock = threading.Lock()

    @property
    def c4R(self) -> float:
        return self.c4 * self.R

    @property
    def band(self):
        return (self.c4R, self.c4R + 1.0)

    @property
    def t_range(self):
        return (self.t_min, 0.0)

    def describe(self):
        return {"R": self.R, "c4": self.c4, "c4R": self.c4R, "band": list(self.band),
                "t_range": list(self.t_range)}

    def _check_t(self, t):
        if not (self.t_min - 1e-14 <= t <= 0.0):
            raise RangeError(f"t={t} outside the constructed range [{self.t_min}, 0]")

    # -- branches -------------------------------------------------------------
    def _low(self, t, xi):
        u, r = _unit(xi)
        n = xi.shape[-1]
        W = -self.R * r + 0.5 * t * r ** 2
        dW = -self.R * u + t * xi
        dtW = 0.5 * r ** 2
        d2W = -self.R * _proj_perp(u) / r[:, None, None] + t * np.eye(n)
        dtdW = xi.copy()
        return W, dW, dtW, d2W, dtdW

    def _high_uncached(self, t, xi):
        spec = self.spec
        n = spec.n
        if t == 0.0:
            # zero-time flow: zeta = xi and the action vanishes
            u, r = _unit(xi)
            y = -self.R * u
            d2W = -self.R * _proj_perp(u) / r[:, None, None]
            return self._assemble_high(t, xi, -self.R * r, y, d2W, xi.copy())
        info = invert_lambda(spec, t, xi, self.R, self.opts, return_info=True)
        zeta = info["zeta"]
        _, rz = _unit(zeta)
        W = info["action"] - self.R * rz
        y = info["y"]
        M = info["M"]
        dy = np.matmul(M[:, :n, :n], _dx0_dzeta(zeta, self.R)) + M[:, :n, n:]
        d2W = np.matmul(dy, np.linalg.inv(info["DL"]))
        d2W = 0.5 * (d2W + np.swapaxes(d2W, -1, -2))
        return self._assemble_high(t, xi, W, y, d2W, zeta)

    def _assemble_high(self, t, xi, W, y, d2W, zeta):
        spec = self.spec
        dtW = eval_total(spec, y, xi)
        px = spec.dp_dx(y, xi)
        pxi = spec.dp_dxi(y, xi)
        dtdW = np.einsum("bjk,bk->bj", d2W, px) + pxi
        return W, y, dtW, d2W, dtdW, zeta

    def _high(self, t, xi):
        if not self.use_cache:
            return self._high_uncached(t, xi)
        keys = [(float(t),) + tuple(np.round(row, 12)) for row in xi]
        with self._lock:
            hits = [self._cache.get(k) for k in keys]
        miss = [i for i, h in enumerate(hits) if h is None]
        if miss:
            vals = self._high_uncached(t, xi[miss])
            with self._lock:
                for j, i in enumerate(miss):
                    entry = tuple(v[j] for v in vals)
                    self._cache[keys[i]] = entry
                    hits[i] = entry
        return tuple(np.array([h[c] for h in hits]) for c in range(6))

    def clear_cache(self):
        with self._lock:
            self._cache.clear()

    # -- public evaluation -------------------------------------------------------
    def evaluate(self, t: float, xi, second: bool = True) -> HJValues:
        """W and derivatives at time ``t`` for covectors ``xi`` of shape (B, n)."""
        self._check_t(t)
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        B, n = xi.shape
        if xi.shape[1] != self.spec.n:
            raise PreconditionError("covector dimension differs from spec dimension")
        r = np.linalg.norm(xi, axis=-1)
        lo, hi = self.band
        branch = np.where(r <= lo, "low", np.where(r >= hi, "high", "band")).astype(object)
        W = np.zeros(B)
        dW = np.zeros((B, n))
        dtW = np.zeros(B)
        d2W = np.zeros((B, n, n))
        dtdW = np.zeros((B, n))
        zeta = np.full((B, n), np.nan)

        zero = r == 0
        nz = ~zero
        need_low = nz & (r < hi)
        need_high = r > lo
        if np.any(zero):
            # W is -R|xi| + t|xi|^2/2 near 0; its gradient is direction-dependent there
            d2W[zero] = t * np.eye(n)
        if np.any(need_low):
            Lv = self._low(t, xi[need_low])
        if np.any(need_high):
            Hv = self._high(t, xi[need_high])
        il = np.flatnonzero(need_low)
        ih = np.flatnonzero(need_high)
        pos_l = {i: k for k, i in enumerate(il)}
        pos_h = {i: k for k, i in enumerate(ih)}

        low_only = np.flatnonzero(branch == "low")
        low_only = low_only[nz[low_only]]
        if low_only.size:
            k = [pos_l[i] for i in low_only]
            W[low_only], dW[low_only], dtW[low_only] = Lv[0][k], Lv[1][k], Lv[2][k]
            d2W[low_only], dtdW[low_only] = Lv[3][k], Lv[4][k]
        high_only = np.flatnonzero(branch == "high")
        if high_only.size:
            k = [pos_h[i] for i in high_only]
            W[high_only], dW[high_only], dtW[high_only] = Hv[0][k], Hv[1][k], Hv[2][k]
            d2W[high_only], dtdW[high_only], zeta[high_only] = Hv[3][k], Hv[4][k], Hv[5][k]
        band = np.flatnonzero(branch == "band")
        if band.size:
            kl = [pos_l[i] for i in band]
            kh = [pos_h[i] for i in band]
            WL, gL, tL, hL, tgL = (v[kl] for v in Lv)
            WH, gH, tH, hH, tgH = (v[kh] for v in Hv[:5])
            u, rb = _unit(xi[band])
            c, c1, c2 = smooth_step(rb - lo)
            gc = c1[:, None] * u
            hc = c2[:, None, None] * u[:, :, None] * u[:, None, :] \
                + (c1 / rb)[:, None, None] * _proj_perp(u)
            dWv = gH - gL
            W[band] = c * WH + (1 - c) * WL
            dW[band] = c[:, None] * gH + (1 - c)[:, None] * gL + (WH - WL)[:, None] * gc
            dtW[band] = c * tH + (1 - c) * tL
            d2W[band] = (c[:, None, None] * hH + (1 - c)[:, None, None] * hL
                         + gc[:, :, None] * dWv[:, None, :] + dWv[:, :, None] * gc[:, None, :]
                         + (WH - WL)[:, None, None] * hc)
            dtdW[band] = c[:, None] * tgH + (1 - c)[:, None] * tgL + (tH - tL)[:, None] * gc
            zeta[band] = Hv[5][kh]
        if second:
            return HJValues(W, dW, dtW, d2W, dtdW, branch, zeta)
        return HJValues(W, dW, dtW, None, None, branch, zeta)

    def __call__(self, t, xi):
        return self.evaluate(t, xi).W


def build_hj(spec: HamiltonianSpec, t_min: float = -2.0, R: float | None = None,
             c4: float | None = None, opts: HJOptions | None = None, use_cache: bool = True,
             candidates=R_CANDIDATES, c0: float = 1.0) -> HJSolution:
    """Construct an :class:`HJSolution`, calibrating R and c4 unless both are given."""
    opts = opts or HJOptions()
    report = []
    if R is None or c4 is None:
        cands = candidates if R is None else (R,)
        R_cal, c4_cal, report = calibrate(spec, t_min, cands, c0=c0, opts=opts)
        R = R if R is not None else R_cal
        c4 = c4 if c4 is not None else c4_cal
    return HJSolution(spec, float(R), float(c4), float(t_min), opts, use_cache, report)


def build_W(hj: HJSolution, t: float, xi):
    """(W, d_xi W, d_t W) at time ``t``; ``xi`` may be one covector or a batch."""
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    v = hj.evaluate(t, np.atleast_2d(xi), second=False)
    if single:
        return float(v.W[0]), v.dW[0], float(v.dtW[0])
    return v.W, v.dW, v.dtW


# ---------------------------------------------------------------------------
# effective symbol and modified flows
# ---------------------------------------------------------------------------

def eval_effective_symbol(spec, hj: HJSolution, t, x, xi):
    """l(t; x, xi) = p(x + d_xi W(t, xi), xi) - d_t W(t, xi)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    v = hj.evaluate(t, xi, second=False)
    return eval_total(spec, x + v.dW, xi) - v.dtW


def S_t(spec, hj: HJSolution, t, x, xi, opts: FlowOptions | None = None):
    """S_t = T_t o exp(t H_p): (x, xi) -> (y - d_xi W(t, eta), eta)."""
    hj._check_t(t)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    fb = flow_batch(spec, FlowKind.full(), x, xi, (0.0, t), opts=opts)
    v = hj.evaluate(t, fb.eta, second=False)
    return fb.y - v.dW, fb.eta


def S_t_inverse(spec, hj: HJSolution, t, z, xi, opts: FlowOptions | None = None):
    """S_t^{-1}(z, xi) = exp(-t H_p)(z + d_xi W(t, xi), xi)."""
    hj._check_t(t)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    v = hj.evaluate(t, xi, second=False)
    fb = flow_batch(spec, FlowKind.full(), z + v.dW, xi, (0.0, -t), opts=opts)
    return fb.y, fb.eta


def modified_flow_composed(spec, hj, start, t, opts=None):
    """Endpoint of the modified flow at time t through S_t = T_t o exp(tH_p)."""
    x, xi = start
    z, eta = S_t(spec, hj, t, x, xi, opts)
    return z, eta


@dataclass
class ModifiedFlowResult:
    times: np.ndarray
    z: np.ndarray     # (B, K, n)
    eta: np.ndarray


def modified_flow(spec, hj: HJSolution, x, xi, t_end: float, t_eval=None,
                  rtol: float = 1e-10, atol: float = 1e-10) -> ModifiedFlowResult:
    """Integrate the Hamilton system of l directly, starting from z(0) = x + R xi/|xi|.

    dz/dt = p_xi(z + W_xi, eta) + W_xixi p_x(z + W_xi, eta) - W_txi,
    deta/dt = -p_x(z + W_xi, eta).
    """
    hj._check_t(t_end)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    B, n = x.shape
    u, _ = _unit(xi)
    z0 = x + hj.R * u
    times = np.array([0.0, t_end]) if t_eval is None else np.asarray(t_eval, dtype=float)
    if t_end == 0.0:
        return ModifiedFlowResult(times, np.repeat(z0[:, None], len(times), 1),
                                  np.repeat(xi[:, None], len(times), 1))
    local = HJSolution(spec, hj.R, hj.c4, hj.t_min, hj.opts, use_cache=False)

    def rhs(t, s):
        S = s.reshape(B, 2 * n)
        z, eta = S[:, :n], S[:, n:]
        v = local.evaluate(min(t, 0.0), eta)
        xx = z + v.dW
        px = spec.dp_dx(xx, eta)
        pxi = spec.dp_dxi(xx, eta)
        dz = pxi + np.einsum("bjk,bk->bj", v.d2W, px) - v.dtdW
        return np.concatenate([dz, -px], axis=1).ravel()

    sol = solve_ivp(rhs, (0.0, t_end), np.concatenate([z0, xi], axis=1).ravel(),
                    method="RK45", rtol=rtol, atol=atol, dense_output=t_eval is not None)
    if not sol.success:
        raise IntegrationError(f"modified flow failed: {sol.message}", last_time=float(sol.t[-1]))
    Y = sol.y[:, [0, -1]] if t_eval is None else sol.sol(times)
    if t_eval is None:
        Y[:, 0] = np.concatenate([z0, xi], axis=1).ravel()
    Y = Y.reshape(B, 2 * n, len(times)).transpose(0, 2, 1)
    return ModifiedFlowResult(times, Y[:, :, :n], Y[:, :, n:])


def transport_pushforward(f0, hj: HJSolution, spec, t, z, xi, opts=None):
    """Values of f0 o S_t^{-1} at query points (z, xi); ``f0`` maps (x, xi) batches to values."""
    x0, xi0 = S_t_inverse(spec, hj, t, z, xi, opts)
    return np.asarray(f0(x0, xi0))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

_FD1 = (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, np.array([-2, -1, 0, 1, 2]))


def hj_residual_fd(hj: HJSolution, t_grid, xi_grid, dt: float = 1e-3, dxi: float = 1e-3):
    """HJ residual with d_t W from fourth-order finite differences of W.

    Returns a dict with the sup of |d_t W - p(d_xi W, xi)| (finite-difference d_t W),
    the sup of |d_xi W - FD| and the sup of |d_t W (closed) - FD|.
    Time stencils are shifted inward so every node stays in [t_min, 0].
    """
    spec = hj.spec
    n = spec.n
    xi_grid = np.atleast_2d(np.asarray(xi_grid, dtype=float))
    w, off = _FD1
    res_hj = res_grad = res_t = 0.0
    for t in t_grid:
        base = hj.evaluate(t, xi_grid, second=False)
        # time derivative, one-sided shift if near the ends
        shift = 0.0
        lo_t, hi_t = t + off.min() * dt, t + off.max() * dt
        if hi_t > 0:
            shift = -hi_t
        if lo_t < hj.t_min:
            shift = hj.t_min - lo_t
        ts = t + shift + off * dt
        Ws = np.array([hj.evaluate(float(s), xi_grid, second=False).W for s in ts])
        if shift == 0.0:
            dtW_fd = np.tensordot(w, Ws, axes=1) / dt
        else:
            # differentiate the quartic interpolant at t
            V = np.vander(ts - t, 5, increasing=True)
            coef = np.linalg.solve(V, Ws)
            dtW_fd = coef[1]
        p_val = eval_total(spec, base.dW, xi_grid)
        res_hj = max(res_hj, float(np.max(np.abs(dtW_fd - p_val))))
        res_t = max(res_t, float(np.max(np.abs(dtW_fd - base.dtW))))
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            Wj = np.array([hj.evaluate(t, xi_grid + o * dxi * e, second=False).W for o in off])
            g_fd = np.tensordot(w, Wj, axes=1) / dxi
            res_grad = max(res_grad, float(np.max(np.abs(g_fd - base.dW[:, j]))))
    return {"hj_residual": res_hj, "grad_residual": res_grad, "dt_residual": res_t}


def w_table_csv(hj: HJSolution, t_grid, xi_grid) -> str:
    """CSV table with columns t, xi..., W, dW..., dtW, branch."""
    n = hj.spec.n
    xi_grid = np.atleast_2d(np.asarray(xi_grid, dtype=float))
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["t"] + [f"xi{j}" for j in range(n)] + ["W"] + [f"dW{j}" for j in range(n)]
                + ["dtW", "branch"])
    for t in t_grid:
        v = hj.evaluate(float(t), xi_grid, second=False)
        for i in range(len(xi_grid)):
            wr.writerow([repr(float(t))] + [repr(float(c)) for c in xi_grid[i]]
                        + [repr(float(v.W[i]))] + [repr(float(c)) for c in v.dW[i]]
                        + [repr(float(v.dtW[i])), v.branch[i]])
    return buf.getvalue()
