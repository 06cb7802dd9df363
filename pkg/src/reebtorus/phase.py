"""Points of R^{2n+1} in Cartesian layout (x_1, y_1, ..., x_n, y_n, z)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def split_cartesian(cart):
    """x, y of shape ``(..., n)`` and z of shape ``(...)``."""
    cart = np.asarray(cart, dtype=float)
    return cart[..., 0:-1:2], cart[..., 1:-1:2], cart[..., -1]


def to_polar(cart):
    x, y, z = split_cartesian(cart)
    return np.hypot(x, y), np.arctan2(y, x), z


def from_polar(r, theta, z):
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)
    out = np.empty(r.shape[:-1] + (2 * r.shape[-1] + 1,))
    out[..., 0:-1:2] = r * np.cos(theta)
    out[..., 1:-1:2] = r * np.sin(theta)
    out[..., -1] = z
    return out


@dataclass(frozen=True)
class PhasePoint:
    """One point (or a batch along leading axes) with an on-demand polar view."""

    cartesian: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.cartesian, dtype=float)
        if arr.shape[-1] % 2 != 1:
            raise ValueError("Cartesian layout needs 2n+1 components")
        object.__setattr__(self, "cartesian", arr)

    @classmethod
    def from_polar(cls, r, theta, z) -> "PhasePoint":
        return cls(from_polar(r, theta, z))

    @property
    def n(self) -> int:
        return (self.cartesian.shape[-1] - 1) // 2

    @property
    def r(self):
        return to_polar(self.cartesian)[0]

    @property
    def theta(self):
        return to_polar(self.cartesian)[1]

    @property
    def z(self):
        return self.cartesian[..., -1]

    def __array__(self, dtype=None, copy=None):
        return self.cartesian if dtype is None else self.cartesian.astype(dtype)


def as_cartesian(p) -> np.ndarray:
    if isinstance(p, PhasePoint):
        return p.cartesian
    return np.asarray(p, dtype=float)
