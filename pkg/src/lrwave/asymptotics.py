"""Backward escape, high-energy limits and the scattering map S_-(x, xi) = (z_-, xi_-).

The limits are computed on finite ladders and extrapolated with a generalized
Richardson scheme: the values v(lam) are fitted by

    v(lam) = L + sum_j c_j lam^(-q_j)

with exponents q_j drawn from the expansion of the long-range tails
(mu, 2 mu, 1 + mu, 2, 2 + mu, 3 mu, ...). The fitted rate q of the successive
differences is reported as a diagnostic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, IntegrationError, PreconditionError, RangeError
from .flows import FlowKind, FlowOptions, PhasePoint, flow_batch
from .hj import HJSolution
from .symbols import HamiltonianSpec, eval_kinetic, eval_virial

__all__ = [
    "NontrappingVerdict", "classify_backward_nontrapping", "RegionSpec", "region_escape_check",
    "sample_region", "ScatteringData", "richardson", "tail_exponents", "default_ladder",
    "compute_xi_minus", "compute_z_minus", "fit_high_energy_rates", "jacobian_S_minus",
    "scattering_map",
]

PRECISE = FlowOptions(rtol=1e-13, atol=1e-13, method="DOP853")


def _as_point(start):
    return start if isinstance(start, PhasePoint) else PhasePoint(*start)


# ---------------------------------------------------------------------------
# nontrapping
# ---------------------------------------------------------------------------

@dataclass
class NontrappingVerdict:
    is_backward_nontrapping: bool
    escape_constant: float
    onset_time: float
    min_radius_reached: float
    horizon: float
    escape_speed: float = 0.0
    status: str = "ok"
    message: str = ""

    def as_dict(self):
        return dict(self.__dict__)


def classify_backward_nontrapping(spec: HamiltonianSpec, start, T_max: float = 100.0,
                                  min_speed: float = 1e-3, n_samples: int = 2001,
                                  opts: FlowOptions | None = None) -> NontrappingVerdict:
    """Finite-horizon test of backward escape along the kinetic flow.

    The escape speed v is the least-squares slope of |y~(t)| against |t| over the
    last half of the horizon. The start is declared nontrapping when v > min_speed,
    d^2|y~|^2/dt^2 = 4k + U > 0 for every sampled t before the radius minimum, and
    the barrier |y~(t)| >= |t|/C - C then holds with C = max(1/v, max(|t| v - |y~|)).
    """
    if not T_max > 0:
        raise PreconditionError("T_max must be positive")
    start = _as_point(start)
    if np.linalg.norm(start.xi) == 0.0:
        return NontrappingVerdict(False, np.inf, 0.0, float(np.linalg.norm(start.x)), T_max, 0.0,
                                  "trapped", "zero covector: the point is stationary")
    ts = np.linspace(0.0, -T_max, n_samples)
    try:
        fb = flow_batch(spec, FlowKind.kinetic(), start.x[None], start.xi[None], (0.0, -T_max),
                        t_eval=ts, opts=opts)
    except IntegrationError as exc:
        return NontrappingVerdict(False, np.nan, np.nan, np.nan, T_max, 0.0, "indeterminate", str(exc))
    y, eta = fb.y[0], fb.eta[0]
    r = np.linalg.norm(y, axis=1)
    at = np.abs(ts)
    tail = at >= 0.5 * T_max
    v = float(np.polyfit(at[tail], r[tail], 1)[0])
    k_min = int(np.argmin(r))
    onset = float(ts[k_min])
    if v <= min_speed:
        return NontrappingVerdict(False, np.inf, onset, float(r[k_min]), T_max, v, "trapped",
                                  "no linear escape within the horizon")
    accel = 4.0 * eval_kinetic(spec, y, eta) + eval_virial(spec, y, eta)
    past = ts <= onset
    if np.any(accel[past] <= 0):
        return NontrappingVerdict(False, np.inf, onset, float(r[k_min]), T_max, v, "trapped",
                                  "radial convexity fails after the radius minimum")
    C = max(1.0 / v, float(np.max(at * v - r)), 0.0)
    ok = bool(np.all(r >= at / C - C - 1e-12))
    return NontrappingVerdict(ok, C, onset, float(r[k_min]), T_max, v, "ok" if ok else "trapped")


@dataclass
class RegionSpec:
    """Incoming region R-1 < |x| < R+1, x.xi <= -delta1 |x||xi|, with a frequency band.

    Kinetic variant: 1/2 < |xi| < 2. Full-flow variant: |xi| >= lambda0.
    """

    R: float
    delta1: float
    lambda0: float | None = None
    delta2: float | None = None

    def __post_init__(self):
        if not 0 < self.delta1 < 1:
            raise PreconditionError("delta1 must lie in (0, 1)")

    def contains(self, x, xi):
        x = np.atleast_2d(x)
        xi = np.atleast_2d(xi)
        rx = np.linalg.norm(x, axis=1)
        rxi = np.linalg.norm(xi, axis=1)
        ok = (self.R - 1 < rx) & (rx < self.R + 1)
        ok &= np.einsum("bj,bj->b", x, xi) <= -self.delta1 * rx * rxi + 1e-12 * rx * rxi
        if self.lambda0 is None:
            ok &= (0.5 < rxi) & (rxi < 2.0)
        else:
            ok &= rxi >= self.lambda0
        return ok


def sample_region(region: RegionSpec, n: int, count: int, seed: int = 0):
    """Random points of the region (rejection sampling)."""
    rng = np.random.default_rng(seed)
    xs, xis = [], []
    while sum(len(a) for a in xs) < count:
        m = 4 * count
        d = rng.normal(size=(m, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        x = d * rng.uniform(region.R - 1, region.R + 1, size=(m, 1))
        e = rng.normal(size=(m, n))
        e /= np.linalg.norm(e, axis=1, keepdims=True)
        if region.lambda0 is None:
            rxi = rng.uniform(0.5, 2.0, size=(m, 1))
        else:
            rxi = region.lambda0 * rng.uniform(1.0, 4.0, size=(m, 1))
        xi = e * rxi
        keep = region.contains(x, xi)
        xs.append(x[keep])
        xis.append(xi[keep])
    return np.vstack(xs)[:count], np.vstack(xis)[:count]


def region_escape_check(spec, region: RegionSpec, x, xi, T: float = 10.0, variant: str = "kinetic",
                        n_samples: int = 201, opts=None):
    """Largest delta2 with |y(t)| >= |x| + delta2 |t| (kinetic) or + delta2 |t||xi| (full) on [-T, 0]."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if x.size == 0:
        raise PreconditionError("empty sample set")
    if not np.all(region.contains(x, xi)):
        raise PreconditionError("some samples lie outside the region")
    kind = FlowKind.kinetic() if variant == "kinetic" else FlowKind.full()
    ts = np.linspace(0.0, -T, n_samples)
    fb = flow_batch(spec, kind, x, xi, (0.0, -T), t_eval=ts, opts=opts)
    r = np.linalg.norm(fb.y, axis=-1)
    rx = np.linalg.norm(x, axis=1)[:, None]
    at = np.abs(ts[1:])[None, :]
    gain = (r[:, 1:] - rx) / at
    if variant != "kinetic":
        gain = gain / np.linalg.norm(xi, axis=1)[:, None]
    d2 = float(np.min(gain))
    passed = d2 > 0 and (region.delta2 is None or d2 >= region.delta2)
    return {"delta2": d2, "passed": bool(passed), "n_samples": int(len(x)), "variant": variant}


# ---------------------------------------------------------------------------
# extrapolation
# ---------------------------------------------------------------------------

def tail_exponents(mu: float, count: int):
    """Candidate decay exponents of long-range tails, ascending and distinct."""
    cand = sorted({round(q, 12) for q in (mu, 2 * mu, 1 + mu, 2.0, 2 + mu, 3 * mu, 1 + 2 * mu,
                                          4 * mu, 3.0, 2 + 2 * mu)})
    return cand[:count]


def richardson(lams, values, exponents):
    """Least-squares fit of v(lam) = L + sum c_j lam^-q_j; returns L (array-valued ok)."""
    lams = np.asarray(lams, dtype=float)
    vals = np.asarray(values, dtype=float)
    A = np.column_stack([np.ones_like(lams)] + [lams ** -q for q in exponents])
    shape = vals.shape[1:]
    sol = np.linalg.lstsq(A, vals.reshape(len(lams), -1), rcond=None)[0]
    return sol[0].reshape(shape)


def _rate_fit(lams, values):
    d = np.linalg.norm(np.diff(np.asarray(values).reshape(len(lams), -1), axis=0), axis=1)
    lam = np.asarray(lams[:-1], dtype=float)
    if np.all(d == 0):
        return np.inf, d
    m = d > 0
    if m.sum() < 2:
        return np.inf, d
    q = -np.polyfit(np.log(lam[m]), np.log(d[m]), 1)[0]
    return float(q), d


def _extrapolate(lams, values, mu, check=True, what="iterates"):
    lams = np.asarray(lams, dtype=float)
    values = np.asarray(values, dtype=float)
    q, d = _rate_fit(lams, values)
    if check and len(d) > 1:
        floor = 1e-12 * max(1.0, float(np.max(np.abs(values))))
        if np.any(d[1:] > d[:-1] + floor):
            raise ConvergenceError(f"{what} are not Cauchy along the ladder",
                                   {"differences": d.tolist(), "lambdas": lams.tolist()})
    if np.all(d <= 1e-14 * max(1.0, float(np.max(np.abs(values))))):
        return values[-1], 0.0, q, d
    K = len(lams)
    lim = richardson(lams, values, tail_exponents(mu, K - 1))
    if K >= 3:
        lim2 = richardson(lams[1:], values[1:], tail_exponents(mu, K - 2))
        err = float(np.max(np.abs(lim - lim2)))
    else:
        err = float(np.max(np.abs(lim - values[-1])))
    return lim, err, q, d


def default_ladder(k: int = 5, base: float = 8.0):
    return base * 2.0 ** np.arange(k)


# ---------------------------------------------------------------------------
# scattering data
# ---------------------------------------------------------------------------

@dataclass
class ScatteringData:
    xi_minus: np.ndarray
    z_minus: np.ndarray | None = None
    jacobian_S: np.ndarray | None = None
    det_S: float | None = None
    lambda_ladder: list = field(default_factory=list)
    xi_iterates: list = field(default_factory=list)
    z_iterates: list = field(default_factory=list)
    extrapolation_error: float = 0.0
    rate_fit: dict = field(default_factory=dict)
    method: str = ""
    t0: float | None = None
    warnings: list = field(default_factory=list)

    def as_dict(self):
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, list):
                return [conv(u) for u in v]
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v
        return {k: conv(v) for k, v in self.__dict__.items()}


def _nontrapping_guard(spec, start, T_max=100.0):
    v = classify_backward_nontrapping(spec, start, T_max=T_max)
    if not v.is_backward_nontrapping:
        raise DomainError(f"start is not backward nontrapping ({v.status}: {v.message})")
    return v


def compute_xi_minus(spec: HamiltonianSpec, start, method: str = "lambda_ladder", *, t0: float = -1.0,
                     ladder=None, T: float = 1000.0, levels: int = 5, opts: FlowOptions | None = None,
                     check_nontrapping: bool = True) -> ScatteringData:
    """Asymptotic momentum xi_- of the backward kinetic flow.

    ``long_time`` extrapolates eta~(-T 2^k), k < levels, in the time variable.
    ``lambda_ladder`` extrapolates lam^-1 eta(t0; x, lam xi) of the full flow.
    """
    start = _as_point(start)
    opts = opts or PRECISE
    if check_nontrapping:
        _nontrapping_guard(spec, start)
    if method == "long_time":
        Ts = T * 2.0 ** np.arange(levels)
        fb = flow_batch(spec, FlowKind.kinetic(), start.x[None], start.xi[None], (0.0, -Ts[-1]),
                        t_eval=-Ts, opts=opts)
        its = fb.eta[0]
        lim, err, q, d = _extrapolate(Ts, its, spec.mu, what="kinetic momenta")
        return ScatteringData(np.asarray(lim), lambda_ladder=Ts.tolist(), xi_iterates=its.tolist(),
                              extrapolation_error=err, rate_fit={"xi": q}, method=method)
    if method != "lambda_ladder":
        raise PreconditionError(f"unknown method {method!r}")
    lams = default_ladder() if ladder is None else np.asarray(ladder, dtype=float)
    if np.any(np.diff(lams) <= 0):
        raise PreconditionError("lambda ladder must be increasing")
    X = np.repeat(start.x[None], len(lams), 0)
    XI = lams[:, None] * start.xi[None]
    fb = flow_batch(spec, FlowKind.full(), X, XI, (0.0, t0), opts=opts)
    its = fb.eta / lams[:, None]
    lim, err, q, d = _extrapolate(lams, its, spec.mu, what="xi iterates")
    return ScatteringData(np.asarray(lim), lambda_ladder=lams.tolist(), xi_iterates=its.tolist(),
                          extrapolation_error=err, rate_fit={"xi": q}, method=method, t0=t0)


def z_ladder(hj: HJSolution, xi, t0: float | None = None, base: float = 8.0, k: int = 5,
             reach: float = 6.0):
    """Smallest ladder base * 2^j (j >= 0) whose lowest frequency clears the glued band.

    With ``t0`` given, the lowest rung must also travel at least ``reach`` in time |t0|
    (lam |xi| |t0| >= reach), so short times do not start inside the interaction region.
    """
    r = float(np.linalg.norm(xi))
    lam0 = base
    while lam0 * r < hj.c4R + 1.0 or (t0 is not None and lam0 * r * abs(t0) < reach):
        lam0 *= 2.0
    return lam0 * 2.0 ** np.arange(k)


def scattering_map(spec: HamiltonianSpec, hj: HJSolution, x, xi, t0: float, ladder,
                   opts: FlowOptions | None = None, check: bool = True):
    """Batched (z_-, xi_-) for starts (B, n) on a common ladder.

    Returns (z, xi_minus, diagnostics) with per-start iterates of shape (B, K, n).
    """
    opts = opts or PRECISE
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    lams = np.asarray(ladder, dtype=float)
    B, n = x.shape
    K = len(lams)
    if not (hj.t_min - 1e-14 <= t0 < 0):
        raise RangeError(f"t0={t0} outside the HJ time range [{hj.t_min}, 0)")
    low = lams[None, :] * np.linalg.norm(xi, axis=1)[:, None] < hj.c4R + 1.0
    if np.any(low):
        raise RangeError("ladder frequencies below the high-frequency range of the HJ solution "
                         f"(need lam |xi| >= {hj.c4R + 1.0:.3f})")
    X = np.repeat(x[:, None], K, 1).reshape(-1, n)
    XI = (lams[None, :, None] * xi[:, None, :]).reshape(-1, n)
    fb = flow_batch(spec, FlowKind.full(), X, XI, (0.0, t0), opts=opts)
    dW = hj.evaluate(t0, fb.eta, second=False).dW
    zi = (fb.y - dW).reshape(B, K, n)
    xii = fb.eta.reshape(B, K, n) / lams[None, :, None]
    z = np.empty((B, n))
    xm = np.empty((B, n))
    zerr = np.empty(B)
    xerr = np.empty(B)
    qz = np.empty(B)
    qx = np.empty(B)
    for b in range(B):
        z[b], zerr[b], qz[b], _ = _extrapolate(lams, zi[b], spec.mu, check=check, what="z iterates")
        xm[b], xerr[b], qx[b], _ = _extrapolate(lams, xii[b], spec.mu, check=check, what="xi iterates")
    return z, xm, {"z_iterates": zi, "xi_iterates": xii, "z_error": zerr, "xi_error": xerr,
                   "z_rate": qz, "xi_rate": qx}


def compute_z_minus(spec: HamiltonianSpec, hj: HJSolution, start, t0: float = -1.0, ladder=None,
                    opts: FlowOptions | None = None, check_nontrapping: bool = True) -> ScatteringData:
    """z_- = lim [y(t0; x, lam xi) - d_xi W(t0, eta(t0; x, lam xi))] with xi_- alongside."""
    start = _as_point(start)
    if check_nontrapping:
        _nontrapping_guard(spec, start)
    lams = z_ladder(hj, start.xi, t0) if ladder is None else np.asarray(ladder, dtype=float)
    z, xm, diag = scattering_map(spec, hj, start.x[None], start.xi[None], t0, lams, opts)
    return ScatteringData(xm[0], z[0], lambda_ladder=lams.tolist(),
                          xi_iterates=diag["xi_iterates"][0].tolist(),
                          z_iterates=diag["z_iterates"][0].tolist(),
                          extrapolation_error=float(max(diag["z_error"][0], diag["xi_error"][0])),
                          rate_fit={"z": float(diag["z_rate"][0]), "xi": float(diag["xi_rate"][0])},
                          method="lambda_ladder", t0=t0)


def jacobian_S_minus(spec, hj, start, t0: float = -1.0, ladder=None, fd_step: float = 1e-4,
                     opts=None, noise_ratio: float = 1e-3) -> ScatteringData:
    """Central finite differences of (z_-, xi_-) in (x, xi) on a fixed ladder."""
    start = _as_point(start)
    n = start.n
    lams = z_ladder(hj, start.xi * (1 - 2 * fd_step), t0) if ladder is None else np.asarray(ladder, float)
    base = np.concatenate([start.x, start.xi])
    pts = []
    for j in range(2 * n):
        for sgn in (1.0, -1.0):
            p = base.copy()
            p[j] += sgn * fd_step
            pts.append(p)
    pts = np.array(pts + [base])
    z, xm, diag = scattering_map(spec, hj, pts[:, :n], pts[:, n:], t0, lams, opts)
    F = np.concatenate([z, xm], axis=1)
    J = np.empty((2 * n, 2 * n))
    for j in range(2 * n):
        J[:, j] = (F[2 * j] - F[2 * j + 1]) / (2 * fd_step)
    warnings = []
    # rounding level of the iterates, amplified by the extrapolation weights
    opts_used = opts or PRECISE
    scale = float(np.max(np.abs(diag["z_iterates"])))
    noise = 10.0 * opts_used.rtol * scale
    if noise / fd_step > noise_ratio * max(1.0, float(np.max(np.abs(J)))):
        warnings.append(f"finite-difference step {fd_step:g} is noise dominated "
                        f"(iterate rounding level {noise:.2e})")
    err = float(max(diag["z_error"].max(), diag["xi_error"].max()))
    return ScatteringData(F[-1, n:], F[-1, :n], J, float(np.linalg.det(J)), lams.tolist(),
                          extrapolation_error=err, method="finite_difference", t0=t0,
                          warnings=warnings)


# ---------------------------------------------------------------------------
# high-energy comparison of full and kinetic flows
# ---------------------------------------------------------------------------

def fit_high_energy_rates(spec, start, ladder=None, t_min: float = -2.0, n_t: int = 60,
                          opts: FlowOptions | None = None):
    """Normalized full-vs-kinetic differences along a lambda ladder.

    For each lam, over t in [t_min, -1/lam] (log-spaced):
        Q_eta = |eta - eta~| lam^-(1-mu) |t|^-(2-mu),  Q_y = |y - y~| lam^-(1-mu) |t|^-(3-mu)
    evaluated at frequency lam xi. Reports the per-lam maxima and their spread.
    """
    start = _as_point(start)
    opts = opts or FlowOptions(rtol=1e-12, atol=1e-12, method="DOP853")
    lams = default_ladder(4) if ladder is None else np.asarray(ladder, dtype=float)
    if np.any(-1.0 / lams < t_min):
        raise PreconditionError("t grid [t_min, -1/lam] is empty for some ladder value")
    mu = spec.mu
    rows = []
    for lam in lams:
        ts = -np.geomspace(1.0 / lam, -t_min, n_t)
        xi = lam * start.xi[None]
        full = flow_batch(spec, FlowKind.full(), start.x[None], xi, (0.0, t_min), t_eval=ts, opts=opts)
        kin = flow_batch(spec, FlowKind.kinetic(), start.x[None], xi, (0.0, t_min), t_eval=ts, opts=opts)
        de = np.linalg.norm(full.eta[0] - kin.eta[0], axis=1)
        dy = np.linalg.norm(full.y[0] - kin.y[0], axis=1)
        at = np.abs(ts)
        qe = de * lam ** -(1 - mu) * at ** -(2 - mu)
        qy = dy * lam ** -(1 - mu) * at ** -(3 - mu)
        rows.append({"lam": float(lam), "eta_max": float(qe.max()), "y_max": float(qy.max())})

    def spread(key):
        v = np.array([r[key] for r in rows])
        if np.all(v == 0):
            return 1.0, 0.0
        if np.any(v == 0):
            return np.inf, np.inf
        growth = float(np.max(v[1:] / v[:-1] - 1.0)) if len(v) > 1 else 0.0
        return float(v.max() / v.min()), growth

    se, ge = spread("eta_max")
    sy, gy = spread("y_max")
    return {"rows": rows, "eta_ratio": se, "y_ratio": sy, "eta_growth": ge, "y_growth": gy}
