"""Compactly supported phase-space windows used as probe symbols."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["bump", "TensorWindow", "SymbolWindow", "Box"]


def bump(s):
    """Canonical bump e * exp(-1/(1 - s^2)) on |s| < 1 (value 1 at 0), zero elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = np.abs(s) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 2))
    return out


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [x_lo, x_hi] x [xi_lo, xi_hi] in one-dimensional phase space."""

    x_lo: float
    x_hi: float
    xi_lo: float
    xi_hi: float

    def scaled_frequency(self, h: float) -> "Box":
        lo, hi = sorted((self.xi_lo / h, self.xi_hi / h))
        return Box(self.x_lo, self.x_hi, lo, hi)

    def contains_frequency(self, xi):
        xi = np.asarray(xi)
        return (xi >= self.xi_lo) & (xi <= self.xi_hi)


@dataclass(frozen=True)
class TensorWindow:
    """a(x, xi) = bump((x - x0)/rx) * bump((xi - xi0)/rxi) in one dimension."""

    x0: float
    xi0: float
    rx: float = 1.0
    rxi: float | None = None

    def __post_init__(self):
        rxi = 0.5 * abs(self.xi0) if self.rxi is None else self.rxi
        if not (self.rx > 0 and rxi > 0):
            raise ValueError("window radii must be positive")
        object.__setattr__(self, "rxi", float(rxi))

    @property
    def support(self) -> Box:
        return Box(self.x0 - self.rx, self.x0 + self.rx, self.xi0 - self.rxi, self.xi0 + self.rxi)

    def __call__(self, x, xi):
        return bump((np.asarray(x) - self.x0) / self.rx) * bump((np.asarray(xi) - self.xi0) / self.rxi)

    def shrink(self, factor: float) -> "TensorWindow":
        return TensorWindow(self.x0, self.xi0, self.rx * factor, self.rxi * factor)

    def translate(self, dx: float = 0.0, dxi: float = 0.0) -> "TensorWindow":
        return TensorWindow(self.x0 + dx, self.xi0 + dxi, self.rx, self.rxi)

    def as_dict(self):
        return {"x0": self.x0, "xi0": self.xi0, "rx": self.rx, "rxi": self.rxi}


@dataclass(frozen=True)
class SymbolWindow:
    """A symbol given by a vectorized callable f(x, xi) and a box containing its support.

    The frequencies of ``support`` and of ``f`` are the actual ones (no h rescaling).
    """

    func: Callable
    support: Box

    def __call__(self, x, xi):
        return self.func(x, xi)
