"""One-dimensional periodic grid: H = -1/2 d a(x) d + V, e^{-itH}, e^{iW(t,D)} and Weyl operators."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import jv

from .errors import BoundaryMassError, DomainError, PreconditionError, RangeError, UnsupportedDimensionError
from .symbols import HamiltonianSpec
from .windows import Box

__all__ = [
    "GridSpec", "WaveState", "DiscreteH", "discretize_H", "propagate", "apply_fourier_multiplier",
    "lattice_phase", "modified_evolution", "apply_weyl", "conjugation_check", "gaussian_packet",
]


@dataclass(frozen=True)
class GridSpec:
    N: int = 4096
    L: float = 40.0

    def __post_init__(self):
        if self.N < 4 or self.N & (self.N - 1):
            raise PreconditionError("N must be a power of two")
        if not self.L > 0:
            raise PreconditionError("L must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.N)

    @property
    def xi(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    @property
    def xi_max(self) -> float:
        return np.pi / self.dx

    def as_dict(self):
        return {"N": self.N, "L": self.L}


@dataclass
class WaveState:
    samples: np.ndarray
    grid: GridSpec
    t: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.shape[-1] != self.grid.N:
            raise PreconditionError("sample length differs from grid size")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("wave state has non-finite samples")

    def norm(self):
        return np.sqrt(np.sum(np.abs(self.samples) ** 2, axis=-1) * self.grid.dx)

    def normalized(self) -> "WaveState":
        return WaveState(self.samples / self.norm()[..., None], self.grid, self.t, dict(self.meta))

    def replace(self, samples, t=None) -> "WaveState":
        return WaveState(samples, self.grid, self.t if t is None else t, dict(self.meta))

    def to_bytes(self) -> bytes:
        """Little-endian interleaved (re, im) doubles."""
        inter = np.empty(self.samples.shape[:-1] + (2 * self.grid.N,), dtype="<f8")
        inter[..., 0::2] = self.samples.real
        inter[..., 1::2] = self.samples.imag
        return inter.tobytes()

    def sidecar(self, spec_name: str = "") -> str:
        return json.dumps({"N": self.grid.N, "L": self.grid.L, "t": self.t, "spec": spec_name,
                           "shape": list(self.samples.shape)}, sort_keys=True)

    @classmethod
    def from_bytes(cls, data: bytes, sidecar: str) -> "WaveState":
        info = json.loads(sidecar)
        grid = GridSpec(info["N"], info["L"])
        arr = np.frombuffer(data, dtype="<f8")
        shape = tuple(info.get("shape", [grid.N]))
        arr = arr.reshape(shape[:-1] + (2 * grid.N,))
        return cls(arr[..., 0::2] + 1j * arr[..., 1::2], grid, info.get("t", 0.0),
                   {"spec": info.get("spec", "")})

    def density_csv(self) -> str:
        rho = np.abs(self.samples) ** 2
        lines = ["x,density"] + [f"{x!r},{r!r}" for x, r in zip(self.grid.x.tolist(), np.ravel(rho).tolist())]
        return "\n".join(lines) + "\n"


def gaussian_packet(grid: GridSpec, x0: float, xi0: float, sigma: float) -> WaveState:
    """L2-normalized packet exp(-(x-x0)^2/(2 sigma^2) + i xi0 x)."""
    x = grid.x
    u = np.exp(-0.5 * ((x - x0) / sigma) ** 2 + 1j * xi0 * x)
    return WaveState(u, grid).normalized()


# ---------------------------------------------------------------------------
# Hamiltonian and propagator
# ---------------------------------------------------------------------------

@dataclass
class DiscreteH:
    spec: HamiltonianSpec
    grid: GridSpec
    a: np.ndarray
    V: np.ndarray
    ik: np.ndarray
    e_min: float
    e_max: float

    def apply(self, u):
        """-1/2 D a D u + V u for arrays of shape (..., N)."""
        du = np.fft.ifft(self.ik * np.fft.fft(u, axis=-1), axis=-1)
        return -0.5 * np.fft.ifft(self.ik * np.fft.fft(self.a * du, axis=-1), axis=-1) + self.V * u

    def __call__(self, u):
        return self.apply(u)

    def expectation(self, u):
        return np.sum(np.conj(u) * self.apply(u), axis=-1) * self.grid.dx


def discretize_H(spec: HamiltonianSpec, grid: GridSpec | None = None) -> DiscreteH:
    """Spectral discretization of -1/2 d a d + V (symmetric; the Nyquist derivative is zeroed)."""
    if spec.n != 1:
        raise UnsupportedDimensionError("the quantum grid is one-dimensional")
    grid = grid or GridSpec()
    x = grid.x[:, None]
    a = spec.metric.a(x)[:, 0, 0]
    V = spec.potential.value(x)
    V = np.broadcast_to(np.asarray(V, dtype=float), (grid.N,)).copy()
    ik = 1j * grid.xi
    ik[grid.N // 2] = 0.0
    kmax = float(np.max(np.abs(ik)))
    e_max = 0.5 * float(a.max()) * kmax ** 2 + float(V.max())
    e_min = min(0.0, float(V.min()))
    return DiscreteH(spec, grid, a, V, ik, e_min, e_max)


def _edge_mass(u, grid: GridSpec, edge: float):
    x = grid.x
    m = np.abs(x) >= (1.0 - edge) * grid.L
    tot = np.sum(np.abs(u) ** 2, axis=-1)
    return np.max(np.sum(np.abs(u[..., m]) ** 2, axis=-1) / np.where(tot > 0, tot, 1.0))


def propagate(H: DiscreteH, u, t: float, tol: float = 1e-10, boundary_threshold: float = 1e-10,
              edge: float = 0.05, max_chunk: float = 2000.0, monitor: bool = True):
    """e^{-itH} u by Chebyshev expansion on the spectral interval [e_min, e_max].

    ``u`` is a WaveState or an array (..., N). Long times are split so each chunk has
    r t <= max_chunk (r the spectral half-width); the mass fraction in the outer
    ``edge`` part of the domain is checked after every chunk.
    """
    state = u if isinstance(u, WaveState) else None
    v = state.samples if state is not None else np.asarray(u, dtype=complex)
    grid = H.grid
    if monitor and _edge_mass(v, grid, edge) > boundary_threshold:
        raise BoundaryMassError("initial state already has mass near the grid edge")
    if t != 0.0:
        c = 0.5 * (H.e_max + H.e_min)
        r = 0.5 * (H.e_max - H.e_min) * 1.01 + 1e-12
        nchunk = max(1, math.ceil(r * abs(t) / max_chunk))
        dt = t / nchunk
        for _ in range(nchunk):
            v = _cheb_step(H, v, dt, c, r, tol)
            if monitor and _edge_mass(v, grid, edge) > boundary_threshold:
                raise BoundaryMassError("wave mass reached the grid edge; enlarge L")
    if state is not None:
        return state.replace(v, state.t + t)
    return v


def _cheb_step(H, v, dt, c, r, tol):
    z = r * dt
    K = int(abs(z) + 10.0 * abs(z) ** (1.0 / 3.0) + 40)
    k = np.arange(K)
    J = jv(k, abs(z))
    while abs(J[-1]) > tol * 1e-3:
        K = int(K * 1.2) + 10
        k = np.arange(K)
        J = jv(k, abs(z))
    keep = np.flatnonzero(np.abs(J) > tol * 1e-3)
    K = int(keep[-1]) + 2 if keep.size else 2
    sgn = 1.0 if dt >= 0 else -1.0
    coef = 2.0 * ((-1j * sgn) ** k[:K]) * J[:K]
    coef[0] *= 0.5

    def Hn(w):
        return (H.apply(w) - c * w) / r

    t0 = v
    t1 = Hn(v)
    acc = coef[0] * t0 + coef[1] * t1
    for j in range(2, K):
        t2 = 2.0 * Hn(t1) - t0
        acc = acc + coef[j] * t2
        t0, t1 = t1, t2
    return np.exp(-1j * c * dt) * acc


# ---------------------------------------------------------------------------
# Fourier multipliers and the modified evolution
# ---------------------------------------------------------------------------

def apply_fourier_multiplier(u, phase, grid: GridSpec | None = None):
    """F^{-1} e^{i phase(xi)} F u; ``phase`` is a callable on the lattice or an array."""
    state = u if isinstance(u, WaveState) else None
    v = state.samples if state is not None else np.asarray(u, dtype=complex)
    grid = state.grid if state is not None else grid
    if grid is None:
        raise PreconditionError("grid required for raw arrays")
    ph = phase(grid.xi) if callable(phase) else np.asarray(phase, dtype=float)
    if not np.all(np.isfinite(ph)):
        raise DomainError("non-finite phase on the dual lattice")
    out = np.fft.ifft(np.exp(1j * ph) * np.fft.fft(v, axis=-1), axis=-1)
    return state.replace(out) if state is not None else out


def lattice_phase(hj, t: float, grid: GridSpec):
    """W(t, xi_k) on the dual lattice, evaluated directly by the HJ solution."""
    return hj.evaluate(t, grid.xi[:, None], second=False).W


def modified_evolution(H: DiscreteH, hj, u0, t: float, **prop_kw):
    """Omega(t) u0 = e^{iW(t,D)} e^{-itH} u0."""
    grid = H.grid
    v = propagate(H, u0, t, **prop_kw)
    return apply_fourier_multiplier(v, lattice_phase(hj, t, grid), grid)


# ---------------------------------------------------------------------------
# Weyl quantization
# ---------------------------------------------------------------------------

def _weyl_kernel_rows(a, h, grid: GridSpec, box: Box):
    """Midpoint indices P and rows ifft_xi a(X_P, h xi) for X_P = -L + P dx/2 in the x-support."""
    dx = grid.dx
    P_lo = math.floor((box.x_lo + grid.L) / (0.5 * dx))
    P_hi = math.ceil((box.x_hi + grid.L) / (0.5 * dx))
    P = np.arange(P_lo, P_hi + 1)
    X = -grid.L + 0.5 * dx * P
    xi = grid.xi
    fbox = box.scaled_frequency(h) if h != 1.0 else box
    cols = np.flatnonzero(fbox.contains_frequency(xi))
    S = np.zeros((len(P), grid.N), dtype=complex)
    if cols.size:
        vals = a(X[:, None], h * xi[None, cols])
        S[:, cols] = vals
    return P, np.fft.ifft(S, axis=1)


def apply_weyl(a, h: float, u, grid: GridSpec | None = None):
    """Weyl quantization of a(x, h xi) applied to u by midpoint quadrature.

    (Au)_j = sum_l K(P, l) u_{j-l} with P = 2j - l, K(P, .) the inverse FFT in xi of
    a(X_P, h xi_k), restricted to |l| < N/2 and to X_P inside the x-support of a.
    ``a`` needs a ``support`` Box in its own coordinates and a vectorized call a(x, xi).
    """
    state = u if isinstance(u, WaveState) else None
    v = state.samples if state is not None else np.asarray(u, dtype=complex)
    grid = state.grid if state is not None else grid
    if not 0 < h <= 1:
        raise PreconditionError("h must lie in (0, 1]")
    box = a.support
    fbox = box.scaled_frequency(h)
    if box.x_lo < -grid.L or box.x_hi >= grid.L:
        raise RangeError("window x-support exceeds the grid")
    # an infinite frequency bound means "no frequency localization" (e.g. a = a(x))
    finite = [abs(b) for b in (fbox.xi_lo, fbox.xi_hi) if np.isfinite(b)]
    if finite and max(finite) >= grid.xi_max:
        raise RangeError("window frequency support exceeds the grid Nyquist frequency")
    N = grid.N
    P, K = _weyl_kernel_rows(a, h, grid, box)
    out = np.zeros(v.shape, dtype=complex)
    half = N // 2
    flat = v.reshape(-1, N)
    res = out.reshape(-1, N)
    for p, row in zip(P, K):
        # j with l = 2j - p in (-N/2, N/2)
        j_lo = math.floor((p - half) / 2) + 1
        j_hi = math.ceil((p + half) / 2) - 1
        j = np.arange(max(j_lo, 0), min(j_hi, N - 1) + 1)
        if j.size == 0:
            continue
        ell = 2 * j - p
        ok = np.abs(ell) < half
        j, ell = j[ok], ell[ok]
        res[:, j] += row[ell % N][None, :] * flat[:, (p - j) % N]
    out = res.reshape(v.shape)
    return state.replace(out) if state is not None else out


def conjugation_check(hj, t: float, a, h: float, states, grid: GridSpec):
    """max ||[e^{iW} a_h(x,D) e^{-iW} - b_h(x,D)] psi|| / ||psi|| with b(x,xi) = a(x + W_xi(t,xi), h xi)."""
    from .windows import SymbolWindow

    phase = lattice_phase(hj, t, grid)
    box = a.support.scaled_frequency(h)
    xi_in = grid.xi[box.contains_frequency(grid.xi)]
    dW = hj.evaluate(t, xi_in[:, None], second=False).dW[:, 0]
    shift_lo = -float(dW.max())
    shift_hi = -float(dW.min())
    lookup = dict(zip(np.round(xi_in, 9), dW))

    def b(x, xi):
        dw = np.vectorize(lambda q: lookup.get(round(float(q), 9), np.nan))(xi)
        return a(x + dw, h * xi)

    bwin = SymbolWindow(b, Box(box.x_lo + shift_lo, box.x_hi + shift_hi, box.xi_lo, box.xi_hi))
    worst = 0.0
    for psi in states:
        psi = psi.samples if isinstance(psi, WaveState) else np.asarray(psi, dtype=complex)
        lhs = apply_fourier_multiplier(psi, -phase, grid)
        lhs = apply_weyl(a, h, lhs, grid)
        lhs = apply_fourier_multiplier(lhs, phase, grid)
        rhs = apply_weyl(bwin, 1.0, psi, grid)
        nrm = np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
        worst = max(worst, float(np.sqrt(np.sum(np.abs(lhs - rhs) ** 2) * grid.dx) / nrm))
    return worst
