"""Chordal and radial Loewner solvers.

Conventions: the chordal equation is dg = 2/(g - w) dt, so time is half the
half-plane capacity (a vertical slit of height h has time h^2/4).  The radial
equation is dg = g (e^{iw} + g)/(e^{iw} - g) dt with g'(0) = e^t, and its
covering lift is dg~ = cot((g~ - w)/2) dt.

Traces are built with the zipper: step k is an elementary slit map driven by
the right-endpoint value w_k with capacity t_k - t_{k-1}, and the tip at t_k
is pulled back through the previous steps.  Cost is O(n^2) per trace.
"""

from __future__ import annotations

import csv
import math
import cmath
from dataclasses import dataclass, field

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DrivingFunction:
    t: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if t.ndim != 1 or t.shape != w.shape:
            raise ValueError("grid and values must be 1-d of equal length")
        if t.size == 0 or t[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(w))):
            raise ValueError("non-finite driver")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    def __len__(self):
        return self.t.size

    @classmethod
    def uniform(cls, values, dt):
        values = np.asarray(values, dtype=float)
        return cls(dt * np.arange(values.size), values)

    def at(self, s):
        """Linear interpolation of the sampled driver."""
        return np.interp(s, self.t, self.w)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "w"])
            for a, b in zip(self.t, self.w):
                wr.writerow([repr(float(a)), repr(float(b))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["t"]) for r in rows]),
                   np.array([float(r["w"]) for r in rows]))


@dataclass(frozen=True)
class Trace:
    """Sampled Loewner curve; kind is 'chordal' (upper half-plane) or 'radial' (disk)."""

    points: np.ndarray
    driver: DrivingFunction
    kind: str

    @property
    def t(self):
        return self.driver.t

    def to_csv(self, path):
        write_trace_csv(path, self.t, self.points)


def write_trace_csv(path, t, points):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "re", "im"])
        for s, z in zip(t, points):
            wr.writerow([repr(float(s)), repr(float(z.real)), repr(float(z.imag))])


@dataclass
class EvolveResult:
    """Map values g_{t_i}(z) (NaN after blow-up) and blow-up times (inf if none)."""

    values: np.ndarray
    tau: np.ndarray
    derivative: np.ndarray | None = None


@dataclass
class CoveringState:
    values: np.ndarray          # (n_t, n_v) lifted images, NaN after blow-up
    blown_up: np.ndarray        # bool per point
    tau: np.ndarray             # blow-up time per point, inf if none


@dataclass
class CapacityEstimate:
    value: float
    error: float
    flagged: bool = False
    halves: tuple = field(default=())


# ---------------------------------------------------------------------------
# ODE evolution (RK4 on the linearly interpolated driver)

def _rk4_evolve(driver, z0, rhs, near, deriv_rhs=None):
    t, w = driver.t, driver.w
    z = np.array(z0, dtype=complex, ndmin=1).copy()
    n, m = t.size, z.size
    out = np.full((n, m), np.nan + 0j)
    der = np.ones(m, dtype=complex) if deriv_rhs is not None else None
    dout = np.full((n, m), np.nan + 0j) if deriv_rhs is not None else None
    tau = np.full(m, np.inf)
    alive = ~near(z, w[0], 1.0e-14)
    tau[~alive] = 0.0
    out[0, alive] = z[alive]
    if dout is not None:
        dout[0, alive] = 1.0
    for i in range(n - 1):
        h = t[i + 1] - t[i]
        cut = 4.0 * math.sqrt(h)
        wa, wb = w[i], w[i + 1]
        wm = 0.5 * (wa + wb)
        a = alive & ~near(z, wa, cut)      # already within the cutoff: lost in this step
        tau[alive & ~a] = t[i + 1]
        y = z[a]
        k1 = rhs(y, wa)
        k2 = rhs(y + 0.5 * h * k1, wm)
        k3 = rhs(y + 0.5 * h * k2, wm)
        k4 = rhs(y + h * k3, wb)
        if der is not None:
            d = der[a]
            l1 = deriv_rhs(y, wa) * d
            l2 = deriv_rhs(y + 0.5 * h * k1, wm) * (d + 0.5 * h * l1)
            l3 = deriv_rhs(y + 0.5 * h * k2, wm) * (d + 0.5 * h * l2)
            l4 = deriv_rhs(y + h * k3, wb) * (d + h * l3)
            der[a] = d + h / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4)
        with np.errstate(all="ignore"):
            y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        z[a] = y
        bad = ~np.isfinite(z) | near(z, wb, cut)
        died = a & bad
        tau[died] = t[i + 1]
        alive = a & ~bad
        out[i + 1, alive] = z[alive]
        if dout is not None:
            dout[i + 1, alive] = der[alive]
    return EvolveResult(out, tau, dout)


def _chordal_rhs(z, w):
    return 2.0 / (z - w)


def _chordal_near(z, w, cut):
    return np.abs(z - w) < cut


def chordal_evolve(driver: DrivingFunction, z0) -> EvolveResult:
    """Solve dg = 2/(g - w) for each starting point; swallowed points get NaN."""
    z = np.array(z0, dtype=complex, ndmin=1)
    if np.any(z.imag < 0):
        raise ValueError("points must lie in the closed upper half-plane")
    return _rk4_evolve(driver, z, _chordal_rhs, _chordal_near)


def _radial_rhs(z, w):
    e = np.exp(1j * w)
    return z * (e + z) / (e - z)


def _radial_drhs(z, w):
    e = np.exp(1j * w)
    return (e * e + 2 * e * z - z * z) / (e - z) ** 2


def _radial_near(z, w, cut):
    return np.abs(z - np.exp(1j * w)) < cut


def radial_evolve(driver: DrivingFunction, z0, derivative=False) -> EvolveResult:
    """Solve the radial equation; with derivative=True also track g_t'(z)."""
    z = np.array(z0, dtype=complex, ndmin=1)
    if np.any(np.abs(z) > 1 + 1e-12):
        raise ValueError("points must lie in the closed unit disk")
    return _rk4_evolve(driver, z, _radial_rhs, _radial_near,
                       _radial_drhs if derivative else None)


def cot2(x):
    return 1.0 / np.tan(0.5 * x)


def _cov_rhs(v, w):
    return cot2(v - w)


def _cov_near(v, w, cut):
    d = np.mod(np.real(v) - w, TWO_PI)
    return np.minimum(d, TWO_PI - d) < cut


def covering_evolve(driver: DrivingFunction, v0) -> CoveringState:
    """Evolve real covering coordinates by dv = cot((v - w)/2) dt."""
    v = np.array(v0, dtype=float, ndmin=1)
    res = _rk4_evolve(driver, v.astype(complex), _cov_rhs, _cov_near)
    return CoveringState(res.values.real, np.isfinite(res.tau), res.tau)


# ---------------------------------------------------------------------------
# Elementary slit maps

@njit(cache=True)
def _csqrt_up(a, ref):
    s = cmath.sqrt(a)
    if s.imag < 0.0 or (s.imag == 0.0 and s.real * ref < 0.0):
        s = -s
    return s


@njit(cache=True)
def chordal_slit_inverse(z, w, c):
    """Inverse of the vertical slit map of capacity c at w (lands in the closed upper half-plane)."""
    d = z - w
    return w + _csqrt_up(d * d - 4.0 * c, d.real)


@njit(cache=True)
def chordal_slit_forward(z, w, c):
    d = z - w
    return w + _csqrt_up(d * d + 4.0 * c, d.real)


@njit(cache=True)
def _acos_up(u):
    a = cmath.acos(u)
    return complex(a.real, abs(a.imag))


@njit(cache=True)
def radial_slit_forward(z, w, c):
    """Covering form of the radial slit map: w + 2 acos(e^{-c/2} cos((z - w)/2))."""
    d = z - w
    k = math.floor(d.real / TWO_PI)
    d = d - k * TWO_PI
    return w + k * TWO_PI + 2.0 * _acos_up(math.exp(-0.5 * c) * cmath.cos(0.5 * d))


@njit(cache=True)
def radial_slit_inverse(z, w, c):
    d = z - w
    k = math.floor(d.real / TWO_PI)
    d = d - k * TWO_PI
    return w + k * TWO_PI + 2.0 * _acos_up(math.exp(0.5 * c) * cmath.cos(0.5 * d))


@njit(cache=True)
def radial_tip_height(c):
    """Height of the covering slit of capacity c: 2 acosh(e^{c/2})."""
    return 2.0 * math.acosh(math.exp(0.5 * c))


@njit(cache=True)
def _chordal_zipper(t, w):
    n = t.size
    out = np.empty(n, dtype=np.complex128)
    out[0] = complex(w[0], 0.0)
    for k in range(1, n):
        c = t[k] - t[k - 1]
        z = complex(w[k], 2.0 * math.sqrt(c))
        for m in range(k - 1, 0, -1):
            z = chordal_slit_inverse(z, w[m], t[m] - t[m - 1])
        out[k] = z
    return out


@njit(cache=True)
def _radial_zipper(t, w):
    n = t.size
    out = np.empty(n, dtype=np.complex128)
    out[0] = cmath.exp(1j * w[0])
    for k in range(1, n):
        c = t[k] - t[k - 1]
        z = complex(w[k], radial_tip_height(c))
        for m in range(k - 1, 0, -1):
            z = radial_slit_inverse(z, w[m], t[m] - t[m - 1])
        out[k] = cmath.exp(1j * z)
    return out


def chordal_trace(driver: DrivingFunction) -> Trace:
    return Trace(_chordal_zipper(driver.t, driver.w), driver, "chordal")


def radial_trace(driver: DrivingFunction) -> Trace:
    return Trace(_radial_zipper(driver.t, driver.w), driver, "radial")


# ---------------------------------------------------------------------------
# Capacity re-extraction by unzipping

@njit(cache=True)
def _unzip_chordal(pts):
    n = pts.size
    base = np.empty(n, dtype=np.float64)
    cap = np.zeros(n, dtype=np.float64)
    total = 0.0
    for k in range(1, n):
        z = pts[k]
        for m in range(1, k):
            z = chordal_slit_forward(z, base[m], cap[m])
        base[k] = z.real
        h = max(z.imag, 0.0)
        cap[k] = 0.25 * h * h
        total += cap[k]
    return total, base, cap


@njit(cache=True)
def _unzip_radial(pts):
    n = pts.size
    base = np.empty(n, dtype=np.float64)
    cap = np.zeros(n, dtype=np.float64)
    total = 0.0
    for k in range(1, n):
        p = pts[k]
        z = complex(cmath.phase(p), -math.log(abs(p)))
        for m in range(1, k):
            z = radial_slit_forward(z, base[m], cap[m])
        base[k] = z.real
        h = max(z.imag, 0.0)
        cap[k] = 2.0 * math.log(math.cosh(0.5 * h))
        total += cap[k]
    return total, base, cap


def unzip(points, kind):
    """Driver and capacity increments recovered from curve points by straight/radial slits."""
    pts = np.asarray(points, dtype=complex)
    if pts.size < 2:
        return 0.0, pts.real.copy(), np.zeros(pts.size)
    f = _unzip_chordal if kind == "chordal" else _unzip_radial
    return f(pts)


def hull_capacity(trace, tol=1e-2) -> CapacityEstimate:
    """Capacity of Hull(trace) by unzipping; the error is the gap to the half-resolution unzip."""
    if isinstance(trace, Trace):
        pts, kind = trace.points, trace.kind
    else:
        pts, kind = trace
    pts = np.asarray(pts, dtype=complex)
    if pts.size < 2:
        return CapacityEstimate(0.0, 0.0)
    full = unzip(pts, kind)[0]
    coarse_pts = pts[::2] if (pts.size - 1) % 2 == 0 else np.append(pts[::2], pts[-1])
    coarse = unzip(coarse_pts, kind)[0]
    err = abs(full - coarse)
    return CapacityEstimate(float(full), float(err), bool(err > tol), (float(full), float(coarse)))
