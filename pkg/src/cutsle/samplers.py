"""Driving-function samplers: chordal SLE, radial SLE(rho), chords in the disk.

All randomness comes from `normals(seed, path, start, n)`, a counter-based
stream: draw s of path p under seed is a fixed function of (seed, p, s), so
results never depend on how paths are scheduled across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import ndtri

from .loewner import DrivingFunction, Trace, TWO_PI, chordal_slit_inverse, radial_trace

_MASK64 = (1 << 64) - 1


def _key(seed, path, stream):
    if path < 0 or path >= 1 << 48 or stream < 0 or stream >= 1 << 16:
        raise ValueError("path or stream index out of range")
    return [int(seed) & _MASK64, (int(stream) << 48) | int(path)]


def normals(seed, path, start, n, stream=0):
    """Standard normals number start..start+n-1 of stream (seed, path, stream)."""
    bg = np.random.Philox(key=_key(seed, path, stream))
    bg.advance(start // 4)
    raw = bg.random_raw(start % 4 + n)[start % 4:]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


def normal_block(seed, paths, start, n, stream=0):
    """Array (n, len(paths)) of normals, column p from path paths[p]."""
    paths = np.asarray(paths, dtype=np.int64)
    out = np.empty((n, paths.size))
    for c, p in enumerate(paths):
        out[:, c] = normals(seed, int(p), start, n, stream)
    return out


@dataclass(frozen=True)
class SleConfig:
    kappa: float
    seed: int
    dt: float = 1e-4
    horizon: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.kappa <= 8.0):
            raise ValueError("kappa must lie in [0, 8]")
        if self.dt <= 0 or self.horizon < 0:
            raise ValueError("dt must be positive and horizon non-negative")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class RadialRhoConfig:
    base: SleConfig
    w0: float
    forces: tuple = field(default=())
    stop_on: tuple | None = None     # indices whose blow-up ends the run; None means all

    def __post_init__(self):
        for v, _ in self.forces:
            d = (v - self.w0) % TWO_PI
            if min(d, TWO_PI - d) < 1e-12:
                raise ValueError("force point coincides with the start point")


def sample_chordal_driver(cfg: SleConfig, path=0, flip=False) -> DrivingFunction:
    n = cfg.n_steps
    dB = normals(cfg.seed, path, 0, n) * math.sqrt(cfg.dt)
    if flip:
        dB = -dB
    w = np.concatenate([[0.0], np.cumsum(math.sqrt(cfg.kappa) * dB)])
    return DrivingFunction(cfg.dt * np.arange(n + 1), w)


@njit(cache=True)
def _cov_step(v, w, c):
    # real covering slit map: x -> 2 acos(e^{-c/2} cos(x/2)) on x = (v - w) mod 2pi
    d = v - w
    k = math.floor(d / TWO_PI)
    x = d - k * TWO_PI
    return w + k * TWO_PI + 2.0 * math.acos(math.exp(-0.5 * c) * math.cos(0.5 * x))


@njit(cache=True)
def _gap(v, w):
    x = (v - w) % TWO_PI
    return min(x, TWO_PI - x)


@njit(cache=True)
def _drift(w, v, rhos):
    d = 0.0
    for s in range(v.size):
        if rhos[s] != 0.0:
            d += 0.5 * rhos[s] / math.tan(0.5 * (w - v[s]))
    return d


@njit(cache=True)
def _substeps(w, v, rhos, cuts, sqk, dB, dt, t0, nsub, tw, tt):
    # nsub equal substeps sharing one Brownian increment; False if the driver jumps across a
    # repelling point (cuts == 0)
    h = dt / nsub
    noise = sqk * dB / nsub
    for sub in range(nsub):
        drift = _drift(w, v, rhos)
        w_new = w + drift * h + noise
        for s in range(v.size):
            if cuts[s] == 0.0 and math.isfinite(v[s]):
                if abs(((v[s] - w_new) % TWO_PI) - ((v[s] - w) % TWO_PI)) > math.pi:
                    return False, w
        w = w_new
        for s in range(v.size):
            if math.isfinite(v[s]):
                v[s] = _cov_step(v[s], w, h)
        tw[sub] = w
        tt[sub] = dt * (t0 + 1) if sub == nsub - 1 else dt * t0 + h * (sub + 1)
    return True, w


@njit(cache=True)
def _radial_rho_kernel(w0, vs, rhos, stops, cuts, sqk, dt, dB, max_halvings):
    # returns (times, driver, force-point history at grid steps, code, swallowed index)
    # Substeps: halve while |drift| h > 0.1 sqrt(k h), and keep halving while the step would
    # carry the driver across a repelling point.  cuts[s] = 0 marks such points; others are
    # lost when they come within cuts[s] of the driver.
    n = dB.size
    ts = np.empty(n + 1)
    ws = np.empty(n + 1)
    m = vs.size
    hist = np.empty((n + 1, m))
    ts[0] = 0.0
    ws[0] = w0
    hist[0, :] = vs
    v = vs.copy()
    w = w0
    cnt = 1
    big = 1 << max_halvings
    tw = np.empty(big)
    tt = np.empty(big)
    for i in range(n):
        drift = _drift(w, v, rhos)
        h = dt
        halv = 0
        while abs(drift) * h > 0.1 * sqk * math.sqrt(h) and halv < max_halvings:
            h *= 0.5
            halv += 1
        nsub = 1 << halv
        while True:
            tv = v.copy()
            ok, tw_end = _substeps(w, tv, rhos, cuts, sqk, dB[i], dt, i, nsub, tw, tt)
            if ok or nsub >= big:
                break
            nsub *= 2
        if not ok:
            # crossing persists at the finest level: the point is swallowed
            for s in range(m):
                if cuts[s] == 0.0 and math.isfinite(v[s]):
                    if abs(((v[s] - w - sqk * dB[i]) % TWO_PI) - ((v[s] - w) % TWO_PI)) > math.pi:
                        tv[s] = np.nan
            ok2, tw_end = _substeps(w, tv, rhos, cuts * 0.0 + 1.0, sqk, dB[i], dt, i, nsub, tw, tt)
        v = tv
        w = tw_end
        while cnt + nsub > ts.size:
            ts2 = np.empty(2 * ts.size)
            ws2 = np.empty(2 * ws.size)
            ts2[:cnt] = ts[:cnt]
            ws2[:cnt] = ws[:cnt]
            ts = ts2
            ws = ws2
        ts[cnt:cnt + nsub] = tt[:nsub]
        ws[cnt:cnt + nsub] = tw[:nsub]
        cnt += nsub
        for s in range(m):
            if math.isfinite(v[s]) and not stops[s] and _gap(v[s], w) < cuts[s]:
                v[s] = np.nan
        hist[i + 1, :] = v
        for s in range(m):
            if stops[s] and (not math.isfinite(v[s]) or _gap(v[s], w) < cuts[s]):
                return ts[:cnt], ws[:cnt], hist[:i + 2], 1, s
    return ts[:cnt], ws[:cnt], hist, 0, -1


@dataclass
class RadialRhoSample:
    driver: DrivingFunction
    forces: np.ndarray       # covering images of the force points at grid steps
    reason: str              # 'horizon' or 'swallowed:<index>'


def sample_radial_rho_driver(cfg: RadialRhoConfig, path=0, flip=False) -> RadialRhoSample:
    """Euler-Maruyama for dw = sqrt(k) dB + sum rho/2 cot((w - g~(v))/2) dt with force points
    moved by exact covering slit maps; stops at the horizon or the first swallowed force point."""
    b = cfg.base
    n = b.n_steps
    dB = normals(b.seed, path, 0, n) * math.sqrt(b.dt)
    if flip:
        dB = -dB
    vs = np.array([f[0] for f in cfg.forces], dtype=float)
    rhos = np.array([f[1] for f in cfg.forces], dtype=float)
    stops = np.ones(vs.size, dtype=np.bool_)
    if cfg.stop_on is not None:
        stops[:] = False
        stops[list(cfg.stop_on)] = True
        if np.any(rhos[~stops] != 0):
            raise ValueError("force points with nonzero weight must stop the run")
    # points repelling enough never meet the driver in continuum; a 4 sqrt(dt) cutoff would
    # only record near approaches as collisions
    cuts = np.where(rhos >= b.kappa / 2.0 - 2.0, 0.0, 4.0 * math.sqrt(b.dt)) if b.kappa > 0 else \
        np.full(vs.size, 4.0 * math.sqrt(b.dt))
    ts, ws, hist, code, idx = _radial_rho_kernel(float(cfg.w0), vs, rhos, stops, cuts, math.sqrt(b.kappa),
                                                  b.dt, dB, 20)
    drv = DrivingFunction(ts.copy(), ws.copy())
    reason = "horizon" if code == 0 else f"swallowed:{idx}"
    return RadialRhoSample(drv, hist, reason)


def sample_disk_chord(kappa, a1, a2, cfg: SleConfig, arcs=None, path=0, flip=False):
    """Chordal SLE in the disk from e^{ia1} to e^{ia2}, as radial SLE_k(k-6) viewed from 0.

    `arcs` optionally adds the arc endpoints (v1, v2) as weight-0 tracked points; their
    images become NaN once swallowed.  Only separation from e^{ia2} stops the curve.
    Returns (Trace, RadialRhoSample)."""
    if abs(((a1 - a2) + math.pi) % TWO_PI - math.pi) < 1e-12:
        raise ValueError("a1 and a2 must differ")
    base = SleConfig(kappa, cfg.seed, cfg.dt, cfg.horizon)
    forces = [(a2, kappa - 6.0)]
    if arcs is not None:
        forces += [(arcs[0], 0.0), (arcs[1], 0.0)]
    s = sample_radial_rho_driver(RadialRhoConfig(base, a1, tuple(forces), stop_on=(0,)), path, flip)
    return radial_trace(s.driver), s


# ---------------------------------------------------------------------------
# Whole chords with spacing proportional to the distance from 0

@njit(cache=True)
def _to_disk(x, zeta, rot):
    # H -> D with 0 -> e^{i w1}, infinity -> rot, zeta -> 0; written to stay accurate for large x
    return rot * (1.0 - (zeta - zeta.conjugate()) / (x - zeta.conjugate()))


@njit(cache=True)
def _pull_back(x, ws, ts, n):
    for m in range(n - 1, 0, -1):
        x = chordal_slit_inverse(x, ws[m], ts[m] - ts[m - 1])
    return x


@njit(cache=True)
def _full_chord_kernel(zeta, rot, sqk, z, h0, rfloor, t_end, dt0, max_steps, look=1.0, frac=0.5):
    # Each step size is fixed before its increment is drawn: dt is halved until the tips for
    # driver moves of 0 and +-look sigma all land within frac * the spacing target.  The driver is then
    # Brownian motion sampled at stopping times.  Refining a step after seeing its increment
    # would instead favour small increments on coarse steps and smooth the curve.
    ts = np.empty(max_steps)
    ws = np.empty(max_steps)
    pts = np.empty(max_steps, dtype=np.complex128)
    ts[0] = 0.0
    ws[0] = 0.0
    pts[0] = _to_disk(0j, zeta, rot)
    n = 1
    dt = dt0
    wide = 0
    while ts[n - 1] < t_end:
        if n - 1 >= z.size:
            return ts[:n], ws[:n], pts[:n], -1, wide
        if n >= max_steps:
            return ts[:n], ws[:n], pts[:n], -2, wide
        q = pts[n - 1]
        floor_dt = 1e-12 * (1.0 + ts[n - 1])
        dt = 2.0 * dt
        while True:
            ok = True
            sd = math.sqrt(dt)
            for a in (-look, 0.0, look):
                x = _pull_back(complex(ws[n - 1] + a * sqk * sd, 2.0 * sd), ws, ts, n)
                p = _to_disk(x, zeta, rot)
                if abs(p - q) > frac * h0 * max(min(abs(p), abs(q)), rfloor):
                    ok = False
                    break
            if ok or dt <= floor_dt:
                break
            dt = 0.5 * dt
        dt = max(dt, floor_dt)
        dw = sqk * math.sqrt(dt) * z[n - 1]
        x = _pull_back(complex(ws[n - 1] + dw, 2.0 * math.sqrt(dt)), ws, ts, n)
        p = _to_disk(x, zeta, rot)
        if abs(p - q) > h0 * max(min(abs(p), abs(q)), rfloor):
            wide += 1
        ts[n] = ts[n - 1] + dt
        ws[n] = ws[n - 1] + dw
        pts[n] = p
        n += 1
    return ts[:n], ws[:n], pts[:n], 0, wide


@dataclass
class FullChord:
    points: np.ndarray      # trace in the disk, from e^{i a1} towards e^{i a2}
    driver: DrivingFunction  # half-plane driver at the accepted (adaptive) times
    wide: int               # steps whose spacing exceeded the target


def sample_full_chord(kappa, a1, a2, seed, path=0, resolution=0.05, rfloor=1e-3,
                      horizon=1e10, max_steps=400_000, stream=1, look=1.5, frac=1.0):
    """Whole chordal SLE_kappa in the disk from e^{i a1} to e^{i a2}.

    The chord is run in the half-plane (0 to infinity) up to half-plane capacity `horizon`
    and mapped so that 0 goes to the disk centre.  Each step is sized before its increment is
    drawn, so that driver moves of 0 and +-look standard deviations keep the new point within
    frac * resolution * max(|z|, rfloor) of the last one.  Every scale around 0 is then resolved
    alike.  `wide` counts the steps that still overshot resolution * max(|z|, rfloor)."""
    if abs(((a1 - a2) + math.pi) % TWO_PI - math.pi) < 1e-12:
        raise ValueError("a1 and a2 must differ")
    if not (resolution > 0 and rfloor > 0 and horizon > 0):
        raise ValueError("resolution, rfloor and horizon must be positive")
    phi = (0.5 * (a1 - a2)) % math.pi
    zeta = complex(math.cos(phi), math.sin(phi))
    rot = complex(math.cos(a2), math.sin(a2))
    m = 1 << 14
    while True:
        z = normals(seed, path, 0, m, stream)
        ts, ws, pts, code, wide = _full_chord_kernel(zeta, rot, math.sqrt(kappa), z, resolution,
                                                       rfloor, horizon, 1e-3, max_steps, look, frac)
        if code == 0:
            return FullChord(pts.copy(), DrivingFunction(ts.copy(), ws.copy()), int(wide))
        if code == -2 or m >= 1 << 24:
            raise ValueError("chord needs more steps than max_steps")
        m *= 4
