"""h-ladder wavefront probes, pushed-forward windows and the two equivalence harnesses.

A probe is a tensor window a(x, xi) around (x0, xi0). For each h of the ladder the
norm ||a_h(x, D) u|| with a_h(x, xi) = a(x, h xi) is computed; the slope s of
log-norm against log-h decides the verdict:

    s <= s_sing -> "singular",   s >= s_reg -> "regular",   otherwise "inconclusive".

The user-facing time t0 of the harnesses is positive; the classical and HJ
machinery runs at the internal time -t0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.special import roots_jacobi

from .asymptotics import compute_z_minus
from .errors import PreconditionError, RangeError
from .flows import FlowKind, FlowOptions, flow_batch
from .hj import HJSolution, smooth_step
from .quantum import (DiscreteH, GridSpec, WaveState, apply_fourier_multiplier, apply_weyl,
                      discretize_H, gaussian_packet, lattice_phase, propagate)
from .symbols import HamiltonianSpec
from .windows import Box, SymbolWindow, TensorWindow

__all__ = [
    "DEFAULT_LADDER", "WavefrontProbe", "DecayReport", "fit_slope", "probe_wavefront",
    "window_norms", "pushforward_window", "flow_conjugation_check", "egorov_window", "egorov_decay_check", "singular_datum",
    "WavefrontCase", "pushforward_harness", "modified_harness", "agreement",
]

DEFAULT_LADDER = (1 / 8, 1 / 16, 1 / 32, 1 / 64)
WINDOW_FLOW = FlowOptions(rtol=1e-9, atol=1e-9, method="DOP853")


@dataclass(frozen=True)
class WavefrontProbe:
    window: TensorWindow
    h_ladder: tuple = DEFAULT_LADDER
    s_sing: float = 1.0
    s_reg: float = 3.0
    floor_rel: float = 1e-11

    def __post_init__(self):
        if self.window(self.window.x0, self.window.xi0) == 0:
            raise PreconditionError("window must not vanish at its center")
        hs = list(self.h_ladder)
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise PreconditionError("h ladder must be decreasing")
        if not self.s_sing < self.s_reg:
            raise PreconditionError("s_sing must be below s_reg")

    @property
    def center(self):
        return (self.window.x0, self.window.xi0)

    def moved(self, x0: float, xi0: float) -> "WavefrontProbe":
        w = TensorWindow(x0, xi0, self.window.rx, self.window.rxi)
        return WavefrontProbe(w, self.h_ladder, self.s_sing, self.s_reg, self.floor_rel)


@dataclass
class DecayReport:
    center: tuple
    ladder: list
    norms: list
    slope: float
    verdict: str
    thresholds: dict
    floor_flag: bool = False
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {"center": [float(c) for c in self.center], "ladder": [float(h) for h in self.ladder],
                "norms": [float(v) for v in self.norms], "slope": float(self.slope),
                "verdict": self.verdict, "thresholds": self.thresholds,
                "floor_flag": self.floor_flag, "notes": list(self.notes)}

    def csv_rows(self):
        return [(float(h), float(v), float(self.slope)) for h, v in zip(self.ladder, self.norms)]


def fit_slope(hs, norms, floor: float = 0.0) -> float:
    """Least-squares slope of log(max(norm, floor)) against log(h)."""
    v = np.maximum(np.asarray(norms, dtype=float), max(floor, 1e-300))
    return float(np.polyfit(np.log(np.asarray(hs, dtype=float)), np.log(v), 1)[0])


def _report(probe: WavefrontProbe, norms, unorm, center=None, notes=()):
    floor = probe.floor_rel * unorm
    norms = [float(v) for v in norms]
    thresholds = {"s_sing": probe.s_sing, "s_reg": probe.s_reg, "floor": floor}
    at_floor = norms[-1] <= floor
    slope = fit_slope(probe.h_ladder, norms, floor)
    notes = list(notes)
    if at_floor:
        verdict = "regular"
    elif notes:
        verdict = "inconclusive"
    elif slope <= probe.s_sing:
        verdict = "singular"
    elif slope >= probe.s_reg:
        verdict = "regular"
    else:
        verdict = "inconclusive"
    return DecayReport(center or probe.center, list(probe.h_ladder), norms, slope, verdict,
                       thresholds, bool(at_floor), notes)


def _l2(v, grid):
    return float(np.sqrt(np.sum(np.abs(v) ** 2) * grid.dx))


def window_norms(windows, u: WaveState):
    """||w(x, D) u|| for a list of (window, h) pairs."""
    return [_l2(apply_weyl(w, h, u.samples, u.grid), u.grid) for w, h in windows]


def probe_wavefront(u: WaveState, probe: WavefrontProbe, notes=()) -> DecayReport:
    norms = window_norms([(probe.window, h) for h in probe.h_ladder], u)
    return _report(probe, norms, _l2(u.samples, u.grid), notes=notes)


# ---------------------------------------------------------------------------
# classical pushforwards of windows
# ---------------------------------------------------------------------------

def _boundary_samples(box: Box, m: int = 24):
    s = np.linspace(0.0, 1.0, m)
    xs = np.concatenate([box.x_lo + (box.x_hi - box.x_lo) * s, np.full(m, box.x_hi),
                         box.x_lo + (box.x_hi - box.x_lo) * s, np.full(m, box.x_lo)])
    ks = np.concatenate([np.full(m, box.xi_lo), box.xi_lo + (box.xi_hi - box.xi_lo) * s,
                         np.full(m, box.xi_hi), box.xi_lo + (box.xi_hi - box.xi_lo) * s])
    # interior points guard against folds of the image
    g = np.linspace(0.0, 1.0, 7)
    gx, gk = np.meshgrid(box.x_lo + (box.x_hi - box.x_lo) * g, box.xi_lo + (box.xi_hi - box.xi_lo) * g)
    return np.concatenate([xs, gx.ravel()]), np.concatenate([ks, gk.ravel()])


def _image_box(x, k, margin: float) -> Box:
    """Bounding box of image samples padded by ``margin`` in x and by that fraction of its width in xi."""
    mk = margin * float(k.max() - k.min())
    return Box(float(x.min()) - margin, float(x.max()) + margin, float(k.min()) - mk, float(k.max()) + mk)


def _chunked_flow(spec, x, k, t, opts, chunk=4096):
    X = np.empty_like(x)
    K = np.empty_like(k)
    for s in range(0, len(x), chunk):
        sl = slice(s, s + chunk)
        fb = flow_batch(spec, FlowKind.full(), x[sl, None], k[sl, None], (0.0, t), opts=opts)
        X[sl], K[sl] = fb.y[:, 0], fb.eta[:, 0]
    return X, K


def pushforward_window(spec: HamiltonianSpec, window: TensorWindow, t: float, h: float,
                       opts: FlowOptions | None = None, margin: float = 0.25,
                       mesh=(160, 160)) -> SymbolWindow:
    """(a_h o exp tH_p)(x, xi) = a(y(t; x, xi), h eta(t; x, xi)) in actual frequencies.

    Its support is exp(-tH_p)[supp a_h]; the box is obtained by mapping samples of the
    support box of a_h and padding it (see ``_image_box``). The flow map is computed on a
    ``mesh`` over the box and evaluated through bicubic splines; ``mesh=None`` integrates
    the flow at every evaluation point instead.
    """
    if spec.n != 1:
        raise PreconditionError("windows are one-dimensional")
    opts = opts or WINDOW_FLOW
    sb = window.support.scaled_frequency(h)
    if t == 0.0:
        return SymbolWindow(lambda x, xi: window(x, h * np.asarray(xi)), sb)
    bx, bk = _boundary_samples(sb)
    ix, ik = _chunked_flow(spec, bx, bk, -t, opts)
    box = _image_box(ix, ik, margin)

    if mesh is None:
        def flow_map(x, xi):
            return _chunked_flow(spec, x, xi, t, opts)
    else:
        xs = np.linspace(box.x_lo, box.x_hi, mesh[0])
        ks = np.linspace(box.xi_lo, box.xi_hi, mesh[1])
        gx, gk = np.meshgrid(xs, ks, indexing="ij")
        Y, E = _chunked_flow(spec, gx.ravel(), gk.ravel(), t, opts)
        sy = RectBivariateSpline(xs, ks, Y.reshape(gx.shape))
        se = RectBivariateSpline(xs, ks, E.reshape(gx.shape))

        def flow_map(x, xi):
            return sy(x, xi, grid=False), se(x, xi, grid=False)

    def func(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        y, eta = flow_map(x.ravel(), xi.ravel())
        return window(y, h * eta).reshape(x.shape)

    return SymbolWindow(func, box)


def flow_conjugation_check(spec: HamiltonianSpec, window: TensorWindow, t: float, h: float, states,
                           grid: GridSpec | None = None, H: DiscreteH | None = None, mesh=None) -> float:
    """max_psi ||[e^{itH} a_h(x,D) e^{-itH} - (a_h o exp tH_p)(x,D)] psi|| / ||psi||."""
    grid = grid or GridSpec()
    H = H or discretize_H(spec, grid)
    psi = np.array([p.samples if isinstance(p, WaveState) else p for p in states])
    b = pushforward_window(spec, window, t, h, mesh=mesh)
    v = propagate(H, psi, t)
    v = apply_weyl(window, h, v, grid)
    v = propagate(H, v, -t)
    diff = v - apply_weyl(b, 1.0, psi, grid)
    ratios = np.sqrt(np.sum(np.abs(diff) ** 2, axis=-1) / np.sum(np.abs(psi) ** 2, axis=-1))
    return float(ratios.max())


def egorov_window(spec: HamiltonianSpec, hj: HJSolution, window: TensorWindow, t: float, h: float,
                  opts: FlowOptions | None = None, margin: float = 0.25) -> SymbolWindow:
    """g_h = a_h o S_t^{-1}: g_h(z, xi) = a(x', h xi') with (x', xi') = exp(-tH_p)(z + W_xi(t, xi), xi)."""
    opts = opts or WINDOW_FLOW
    sb = window.support.scaled_frequency(h)
    bx, bk = _boundary_samples(sb)
    fy, fk = _chunked_flow(spec, bx, bk, t, opts)
    dW = hj.evaluate(t, fk[:, None], second=False).dW[:, 0]
    box = _image_box(fy - dW, fk, margin)

    def func(z, xi):
        z, xi = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(xi, dtype=float))
        fz, fxi = z.ravel(), xi.ravel()
        uniq, inv = np.unique(fxi, return_inverse=True)
        dw = hj.evaluate(t, uniq[:, None], second=False).dW[:, 0][inv]
        x0, k0 = _chunked_flow(spec, fz + dw, fxi, -t, opts)
        return window(x0, h * k0).reshape(z.shape)

    return SymbolWindow(func, box)


def egorov_decay_check(spec: HamiltonianSpec, hj: HJSolution, window: TensorWindow, t: float,
                       h_ladder=DEFAULT_LADDER, grid: GridSpec | None = None, states=None,
                       H: DiscreteH | None = None):
    """d(h) = max_psi ||[Omega(t) a_h Omega(t)^-1 - g_h(x, D)] psi|| / ||psi||, g_h = a_h o S_t^-1.

    ``states`` maps h to a list of test states; by default three packets placed on the
    image S_t[supp a_h]. Returns per-h discrepancies and the fitted slope.
    """
    grid = grid or GridSpec()
    H = H or discretize_H(spec, grid)
    phase = lattice_phase(hj, t, grid)
    rows = []
    for h in h_ladder:
        g = egorov_window(spec, hj, window, t, h)
        if states is None:
            # widths keep the packets' spectra clear of xi = 0, where W may be singular
            b = g.support
            zc = 0.5 * (b.x_lo + b.x_hi)
            kc = 0.5 * (b.xi_lo + b.xi_hi)
            sig = max(6.0 / abs(kc), np.sqrt((b.x_hi - b.x_lo) / (b.xi_hi - b.xi_lo)))
            psis = [gaussian_packet(grid, zc, kc, sig).samples,
                    gaussian_packet(grid, zc - 0.5, kc, 1.25 * sig).samples,
                    gaussian_packet(grid, zc + 0.5, kc * 1.05, 1.5 * sig).samples]
        else:
            psis = [p.samples if isinstance(p, WaveState) else p for p in states(h)]
        # all states go through each operator as one batch
        psi = np.array(psis)
        # Omega(t)^-1 = e^{itH} e^{-iW(t,D)}
        v = apply_fourier_multiplier(psi, -phase, grid)
        v = propagate(H, v, -t)
        v = apply_weyl(window, h, v, grid)
        v = propagate(H, v, t)
        v = apply_fourier_multiplier(v, phase, grid)
        diff = v - apply_weyl(g, 1.0, psi, grid)
        ratios = np.sqrt(np.sum(np.abs(diff) ** 2, axis=-1) / np.sum(np.abs(psi) ** 2, axis=-1))
        worst = float(ratios.max())
        rows.append({"h": float(h), "d": worst})
    hs = [r["h"] for r in rows]
    ds = [r["d"] for r in rows]
    return {"rows": rows, "slope": fit_slope(hs, ds, 1e-300)}


# ---------------------------------------------------------------------------
# singular test datum
# ---------------------------------------------------------------------------

def _cusp_transform(kappa, gamma, nodes=600):
    """c^(kappa) = int (1-|s|)_+^gamma e^{-i kappa s} ds = 2 Re[e^{i kappa} int_0^1 u^gamma e^{-i kappa u} du]."""
    z, w = roots_jacobi(nodes, 0.0, gamma)
    u = 0.5 * (z + 1.0)
    w = w * 0.5 ** (1.0 + gamma)
    I = np.exp(-1j * np.multiply.outer(kappa, u)) @ w
    return 2.0 * np.real(np.exp(1j * kappa) * I)


def singular_datum(grid: GridSpec, xc: float = 0.0, gamma: float = 0.25, q: float = 0.0,
                   roll=(0.5, 0.7)) -> WaveState:
    """e^{iqx} (1 - |x - xc|)_+^gamma, band-limited to the grid from its exact Fourier transform.

    The spectrum is kept exact below roll[0] times the Nyquist frequency and removed by a
    C-infinity step above roll[1]: modes close to Nyquist are coupled across the spectrum
    by variable coefficients and would carry mass to the grid edge.
    """
    if not (xc - 1 > -grid.L and xc + 1 < grid.L):
        raise RangeError("datum support leaves the grid")
    lo, hi = roll
    if not 0 < lo < hi <= 1:
        raise PreconditionError("roll must satisfy 0 < lo < hi <= 1")
    k = grid.xi
    kappa = k - q
    nodes = int(max(600, 1.5 * np.max(np.abs(kappa)) + 100))
    hat = np.exp(-1j * kappa * xc) * _cusp_transform(kappa, gamma, nodes)
    keep = 1.0 - smooth_step((np.abs(k) / grid.xi_max - lo) / (hi - lo))[0]
    samples = np.fft.ifft(hat * keep * np.exp(-1j * k * grid.L)) / grid.dx
    return WaveState(samples, grid, meta={"datum": "cusp", "xc": xc, "gamma": gamma, "q": q,
                                          "roll": [lo, hi]})


# ---------------------------------------------------------------------------
# equivalence harnesses
# ---------------------------------------------------------------------------

@dataclass
class WavefrontCase:
    """Data of one equivalence test.

    ``u_t0`` is the state at the user-facing time t0 > 0; the initial datum is
    u0 = e^{i t0 H} u_t0, so singularities placed in ``u_t0`` are known exactly.
    """

    spec: HamiltonianSpec
    hj: HJSolution
    t0: float
    u_t0: WaveState
    probes: list
    name: str = ""
    H: DiscreteH | None = None
    _u0: WaveState | None = None
    _classical: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.t0 > 0:
            raise PreconditionError("t0 must be positive (user-facing forward time)")
        if self.hj.t_min > -self.t0:
            raise RangeError("HJ solution does not cover the internal time -t0")
        if self.H is None:
            self.H = discretize_H(self.spec, self.u_t0.grid)

    @property
    def grid(self):
        return self.u_t0.grid

    @property
    def u0(self) -> WaveState:
        if self._u0 is None:
            self._u0 = propagate(self.H, self.u_t0, -self.t0)
        return self._u0

    def u_at_t0(self) -> WaveState:
        return propagate(self.H, self.u0, self.t0)

    def classical(self, probe: WavefrontProbe):
        key = probe.center
        if key not in self._classical:
            sd = compute_z_minus(self.spec, self.hj, probe.center, -self.t0)
            self._classical[key] = (float(sd.z_minus[0]), float(sd.xi_minus[0]))
        return self._classical[key]


def agreement(r1: DecayReport, r2: DecayReport) -> str:
    if "inconclusive" in (r1.verdict, r2.verdict):
        return "inconclusive"
    return "pass" if r1.verdict == r2.verdict else "fail"


def _band_notes(case: WavefrontCase, probe: WavefrontProbe):
    """Flag probes whose frequencies reach the glued band where the branches differ."""
    hj = case.hj
    lo_b, hi_b = hj.band
    xi = np.array([[lo_b], [0.5 * (lo_b + hi_b)], [hi_b]])
    if np.max(np.abs(hj._high(-case.t0, xi)[0] - hj._low(-case.t0, xi)[0])) <= 1e-9:
        return []
    w = probe.window
    notes = []
    for h in probe.h_ladder:
        if (abs(w.xi0) - w.rxi) / h < hj.c4R + 1.0:
            notes.append(f"frequencies at h={h:g} reach below c4R+1={hj.c4R + 1:.3f}")
    return notes


def modified_harness(case: WavefrontCase):
    """Report A on u(t0) at (x0, xi0) and report B on e^{iW(-t0,D)} u0 at (z_-, xi_-)."""
    ut0 = case.u_at_t0()
    v = apply_fourier_multiplier(case.u0, lattice_phase(case.hj, -case.t0, case.grid))
    out = []
    for probe in case.probes:
        A = probe_wavefront(ut0, probe)
        z, k = case.classical(probe)
        pB = probe.moved(z, k)
        B = probe_wavefront(v, pB, notes=_band_notes(case, pB))
        out.append({"probe": list(probe.center), "mapped": [z, k], "A": A, "B": B,
                    "agreement": agreement(A, B)})
    return out


def pushforward_harness(case: WavefrontCase):
    """Report A on u(t0) at (x0, xi0) and report C with the pushed-forward window on u0."""
    ut0 = case.u_at_t0()
    out = []
    for probe in case.probes:
        A = probe_wavefront(ut0, probe)
        wins = [(pushforward_window(case.spec, probe.window, case.t0, h), 1.0) for h in probe.h_ladder]
        norms = window_norms(wins, case.u0)
        C = _report(probe, norms, _l2(case.u0.samples, case.grid))
        out.append({"probe": list(probe.center), "A": A, "C": C, "agreement": agreement(A, C)})
    return out
