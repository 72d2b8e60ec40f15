"""Green's function for cut points of a chord with boundary arcs, and its exponents."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def alpha0(kappa):
    return 3.0 * kappa / 8.0 - 1.0


def beta0(kappa):
    return 1.0 - 8.0 / (5.0 * kappa)


@dataclass(frozen=True)
class BoundaryConfig:
    """Arguments of a1, b1, a2, b2 on the unit circle."""

    w1: float
    v1: float
    w2: float
    v2: float

    def __post_init__(self):
        if not (self.w1 > self.v1 > self.w2 > self.v2 > self.w1 - TWO_PI):
            raise ValueError("need w1 > v1 > w2 > v2 > w1 - 2pi")

    def rotate(self, c):
        return BoundaryConfig(self.w1 + c, self.v1 + c, self.w2 + c, self.v2 + c)

    def as_tuple(self):
        return (self.w1, self.v1, self.w2, self.v2)


def _sin2(x):
    return np.abs(np.sin(0.5 * np.asarray(x, dtype=float)))


def tilde_G_raw(kappa, w1, v1, w2, v2):
    """Vectorized G~ without validation."""
    a = 8.0 / kappa - 1.0
    b = (kappa - 4.0) ** 2 / (2.0 * kappa)
    c = 1.0 - 4.0 / kappa
    mixed = _sin2(w1 - v1) * _sin2(w1 - v2) * _sin2(w2 - v1) * _sin2(w2 - v2)
    return _sin2(w1 - w2) ** a * _sin2(v1 - v2) ** b * mixed ** c


def tilde_G(kappa, cfg) -> float:
    if not isinstance(cfg, BoundaryConfig):
        cfg = BoundaryConfig(*cfg)
    w1, v1, w2, v2 = cfg.as_tuple()
    for x, y in ((w1, v1), (w1, v2), (w2, v1), (w2, v2), (w1, w2), (v1, v2)):
        if _sin2(x - y) < 1e-15:
            raise ValueError("coinciding boundary points")
    return float(tilde_G_raw(kappa, w1, v1, w2, v2))


def tilde_G_u(kappa, z1, z2):
    """G~(pi + z1, pi, z2, 0)."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    out = tilde_G_raw(kappa, math.pi + z1, math.pi, z2, 0.0)
    return float(out) if out.ndim == 0 else out


def tilde_G_u_closed(kappa, z1, z2):
    """Same function written as cos((z1-z2)/2)^{8/k-1} (sin z1 sin z2 / 4)^{1-4/k}."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    return (np.abs(np.cos(0.5 * (z1 - z2))) ** (8.0 / kappa - 1.0)
            * (0.25 * np.sin(z1) * np.sin(z2)) ** (1.0 - 4.0 / kappa))


def disk_automorphism(z0):
    """f(z) = (z - z0)/(1 - conj(z0) z) and |f'(z0)| = 1/(1 - |z0|^2)."""
    z0 = complex(z0)
    return (lambda z: (z - z0) / (1 - z0.conjugate() * z)), 1.0 / (1.0 - abs(z0) ** 2)


def green_disk(kappa, cfg, z0) -> float:
    if not isinstance(cfg, BoundaryConfig):
        cfg = BoundaryConfig(*cfg)
    if abs(z0) >= 1.0:
        raise ValueError("z0 must lie in the open unit disk")
    f, df = disk_automorphism(z0)
    ang = [np.angle(f(np.exp(1j * a))) for a in cfg.as_tuple()]
    # G~ sees only |sin| of half-differences, so no lift is needed
    for x, y in ((ang[0], ang[1]), (ang[0], ang[3]), (ang[2], ang[1]), (ang[2], ang[3]),
                 (ang[0], ang[2]), (ang[1], ang[3])):
        if _sin2(x - y) < 1e-15:
            raise ValueError("coinciding boundary points")
    return float(df ** alpha0(kappa) * tilde_G_raw(kappa, *ang))


def green_general(kappa, boundary_images, fprime_abs):
    """Jordan domain reduced by a caller-supplied map f with f(z0) = 0: pass the arguments of
    f(a1), f(b1), f(a2), f(b2) and |f'(z0)|."""
    return float(fprime_abs ** alpha0(kappa) * tilde_G_raw(kappa, *boundary_images))


@dataclass(frozen=True)
class Prediction:
    value: float
    band: float        # (r/R)^{beta0}: relative size of the correction term
    R: float


def predicted_prob(kappa, cfg, z0, r, C0) -> Prediction:
    R = 1.0 - abs(z0)
    if not (0.0 < r < R):
        raise ValueError("need 0 < r < dist(z0, boundary)")
    g = green_disk(kappa, cfg, z0)
    return Prediction(C0 * g * r ** alpha0(kappa), (r / R) ** beta0(kappa), R)
