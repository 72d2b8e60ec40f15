"""Two-curve ensemble in the disk: state evolution, martingales, time curve, Z diffusion.

Angles live in covering coordinates.  A step of capacity time dt in direction j
acts on every other tracked boundary point X by the exact covering slit map
placed at the tip W_j with capacity W_{j,1}^2 dt:

    x = X - W_j (mod 2pi),  cos(x'/2) = e^{-c/2} cos(x/2),  dX'/dX = e^{-c/2} sin(x/2)/sin(x'/2)

which integrates the cot_2 drift of each coordinate and the cot_2' drift of
its log-derivative in closed form.  Quantities of the growing curve itself
(W_j, W_{j,1}, W_{j,S}) come from the caller.

For the independent-Brownian law the full field over a (t1, t2) lattice is
built by `ensemble_lattice`: each curve's tip on its own axis is the driver
and every other node follows from one slit step in either direction, so no
second or third derivatives are ever needed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .green import alpha0, tilde_G_raw, tilde_G_u
from .samplers import normal_block, normals
from .loewner import TWO_PI

COLLISION = 1e-3


def bb(kappa):
    """Boundary scaling exponent b."""
    return (6.0 - kappa) / (2.0 * kappa)


def cc(kappa):
    """Central charge c."""
    return (3.0 * kappa - 8.0) * (6.0 - kappa) / (2.0 * kappa)


def cot2(x):
    return 1.0 / np.tan(0.5 * x)


def cot2_d1(x):
    s = np.sin(0.5 * x)
    return -0.5 / (s * s)


def cot2_d3(x):
    s2 = 1.0 / np.sin(0.5 * x) ** 2
    c = 1.0 / np.tan(0.5 * x)
    return -0.5 * s2 * c * c - 0.25 * s2 * s2


@dataclass(frozen=True)
class EnsembleState:
    t1: float
    t2: float
    W1: float
    W2: float
    V1: float
    V2: float
    W11: float
    W21: float
    V11: float
    V21: float
    mA: float
    haA: float
    Iacc: float
    WS1: float = 0.0      # row integrals of the I integrand: d_j log I = WS_j dt_j
    WS2: float = 0.0
    inD: bool = True
    reason: str = ""

    def angles(self):
        return (self.W1, self.V1, self.W2, self.V2)


def init_ensemble(w1, v1, w2, v2) -> EnsembleState:
    if not (w1 > v1 > w2 > v2 > w1 - TWO_PI):
        raise ValueError("need w1 > v1 > w2 > v2 > w1 - 2pi")
    return EnsembleState(0.0, 0.0, float(w1), float(w2), float(v1), float(v2),
                         1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0)


@njit(cache=True)
def _slit(X, W, c):
    d = X - W
    k = math.floor(d / TWO_PI)
    x0 = d - k * TWO_PI
    x = 2.0 * math.acos(math.exp(-0.5 * c) * math.cos(0.5 * x0))
    return X + (x - x0), math.exp(-0.5 * c) * math.sin(0.5 * x0) / math.sin(0.5 * x)


def _gap(a, b):
    x = (a - b) % TWO_PI
    return min(x, TWO_PI - x)


def _check_D(s: EnsembleState):
    pairs = (("W1-W2", s.W1, s.W2), ("W1-V1", s.W1, s.V1), ("W1-V2", s.W1, s.V2),
             ("W2-V1", s.W2, s.V1), ("W2-V2", s.W2, s.V2))
    for name, a, b in pairs:
        if not (math.isfinite(a) and math.isfinite(b)) or _gap(a, b) < COLLISION:
            return name
    return ""


def step_direction(state: EnsembleState, j, dtj, tip=None, scheme="left") -> EnsembleState:
    """Grow curve j by capacity time dtj.

    tip = (W_j, W_{j,1}, W_{j,S}) after the step, as supplied by the caller (any entry may be
    None to keep the current value).  The slit sits at the old tip (scheme 'left') or at the
    mean of old and new tips (scheme 'mid').
    """
    if not state.inD:
        raise ValueError("state has left the time region: " + state.reason)
    if j not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    if dtj < 0:
        raise ValueError("dtj must be non-negative")
    if dtj == 0:
        return state
    tip = tip or (None, None, None)
    if j == 1:
        Wj, Wj1, WSj, Wk, Wk1, WSk = state.W1, state.W11, state.WS1, state.W2, state.W21, state.WS2
    else:
        Wj, Wj1, WSj, Wk, Wk1, WSk = state.W2, state.W21, state.WS2, state.W1, state.W11, state.WS1
    nWj = Wj if tip[0] is None else float(tip[0])
    nWj1 = Wj1 if tip[1] is None else float(tip[1])
    nWSj = WSj if tip[2] is None else float(tip[2])
    if scheme == "left":
        at, cap = Wj, Wj1 * Wj1 * dtj
    elif scheme == "mid":
        at, cap = 0.5 * (Wj + nWj), 0.5 * (Wj1 * Wj1 + nWj1 * nWj1) * dtj
    else:
        raise ValueError("unknown scheme")
    # I increment and cross-row integral use the pre-step values
    Iacc = state.Iacc + WSj * dtj
    nWSk = WSk + Wj1 * Wj1 * Wk1 * Wk1 * float(cot2_d3(Wk - Wj)) * dtj
    nWk, fk = _slit(Wk, at, cap)
    nV1, f1 = _slit(state.V1, at, cap)
    nV2, f2 = _slit(state.V2, at, cap)
    mA = state.mA + cap
    t1 = state.t1 + (dtj if j == 1 else 0.0)
    t2 = state.t2 + (dtj if j == 2 else 0.0)
    fields = dict(t1=t1, t2=t2, V1=nV1, V2=nV2, V11=state.V11 * f1, V21=state.V21 * f2,
                  mA=mA, haA=mA - t1 - t2, Iacc=Iacc)
    if j == 1:
        fields.update(W1=nWj, W11=nWj1, WS1=nWSj, W2=nWk, W21=Wk1 * fk, WS2=nWSk)
    else:
        fields.update(W2=nWj, W21=nWj1, WS2=nWSj, W1=nWk, W11=Wk1 * fk, WS1=nWSk)
    new = replace(state, **fields)
    why = _check_D(new)
    if why:
        return replace(state, inD=False, reason="collision " + why)
    return new


# ---------------------------------------------------------------------------
# Martingales

def _factors_star(kappa, W1, W2, V1, V2, W11, W21, V11, V21, mA, haA, Iacc):
    rho = kappa - 4.0
    rs = 2.0 * rho
    b, c = bb(kappa), cc(kappa)
    s = lambda x: np.abs(np.sin(0.5 * x))
    return {
        "exp(mA)": (rs + 2.0) * (rs + 6.0) / (8.0 * kappa) * mA,
        "exp(haA)": b / 6.0 * haA,
        "W11^b": b * np.log(W11),
        "W21^b": b * np.log(W21),
        "I^(-c/6)": -c / 6.0 * Iacc,
        "sin(W1-W2)": 2.0 / kappa * np.log(s(W1 - W2)),
        "sin(V1-V2)": rho * rho / (2.0 * kappa) * np.log(s(V1 - V2)),
        "V11": rho * (rho + 4.0 - kappa) / (4.0 * kappa) * np.log(V11),
        "V21": rho * (rho + 4.0 - kappa) / (4.0 * kappa) * np.log(V21),
        "sin(W-V)": rho / kappa * np.log(s(W1 - V1) * s(W1 - V2) * s(W2 - V1) * s(W2 - V2)),
    }


def _factors_c(kappa, W1, W2, V1, V2, W11, W21, V11, V21, mA, haA, Iacc):
    b, c = bb(kappa), cc(kappa)
    return {
        "exp(mA)": (kappa - 6.0) * (kappa - 2.0) / (8.0 * kappa) * mA,
        "exp(haA)": b / 6.0 * haA,
        "W11^b": b * np.log(W11),
        "W21^b": b * np.log(W21),
        "I^(-c/6)": -c / 6.0 * Iacc,
        "sin(W1-W2)": (kappa - 6.0) / kappa * np.log(np.abs(np.sin(0.5 * (W1 - W2)))),
    }


def _state_args(s: EnsembleState):
    return (s.W1, s.W2, s.V1, s.V2, s.W11, s.W21, s.V11, s.V21, s.mA, s.haA, s.Iacc)


def _evaluate(factors):
    total = 0.0
    for name, val in factors.items():
        if not np.isfinite(val):
            raise FloatingPointError(f"non-finite factor {name}")
        total += val
    return math.exp(total)


def mart_Mstar(state: EnsembleState, kappa) -> float:
    if not state.inD:
        raise ValueError("state has left the time region")
    with np.errstate(all="ignore"):
        return _evaluate(_factors_star(kappa, *_state_args(state)))


def mart_Mc(state: EnsembleState, kappa) -> float:
    if not state.inD:
        raise ValueError("state has left the time region")
    with np.errstate(all="ignore"):
        return _evaluate(_factors_c(kappa, *_state_args(state)))


def log_Mstar(kappa, *args):
    return sum(_factors_star(kappa, *args).values())


def log_Mc(kappa, *args):
    return sum(_factors_c(kappa, *args).values())


def rn_deriv(state: EnsembleState, kappa) -> float:
    """M_{*->c} = e^{-alpha0 mA} / G~(W1, V1, W2, V2)."""
    if not state.inD:
        raise ValueError("state has left the time region")
    g = tilde_G_raw(kappa, state.W1, state.V1, state.W2, state.V2)
    val = math.exp(-alpha0(kappa) * state.mA) / g
    if not math.isfinite(val):
        raise FloatingPointError("non-finite factor G~")
    return val


# ---------------------------------------------------------------------------
# Lattice field under independent drivers

@njit(cache=True)
def _lattice(w1, w2, v1, v2, delta, n1max, n2max):
    n1 = min(n1max, w1.size - 1)
    n2 = min(n2max, w2.size - 1)
    shp = (n1 + 1, n2 + 1)
    W1 = np.full(shp, np.nan)
    W2 = np.full(shp, np.nan)
    W11 = np.full(shp, np.nan)
    W21 = np.full(shp, np.nan)
    V1 = np.full(shp, np.nan)
    V2 = np.full(shp, np.nan)
    V11 = np.full(shp, np.nan)
    V21 = np.full(shp, np.nan)
    mA = np.full(shp, np.nan)
    Iacc = np.full(shp, np.nan)
    ok = np.zeros(shp, dtype=np.bool_)
    for a in range(n1 + 1):
        W1[a, 0] = w1[a]
        W11[a, 0] = 1.0
        mA[a, 0] = a * delta
        Iacc[a, 0] = 0.0
    W2[0, 0] = w2[0]
    W21[0, 0] = 1.0
    V1[0, 0] = v1
    V2[0, 0] = v2
    V11[0, 0] = 1.0
    V21[0, 0] = 1.0
    for a in range(1, n1 + 1):
        x, f = _slit(W2[a - 1, 0], W1[a - 1, 0], delta)
        W2[a, 0] = x
        W21[a, 0] = W21[a - 1, 0] * f
        x, f = _slit(V1[a - 1, 0], W1[a - 1, 0], delta)
        V1[a, 0] = x
        V11[a, 0] = V11[a - 1, 0] * f
        x, f = _slit(V2[a - 1, 0], W1[a - 1, 0], delta)
        V2[a, 0] = x
        V21[a, 0] = V21[a - 1, 0] * f
    for b in range(1, n2 + 1):
        rowcum = 0.0
        for a in range(n1 + 1):
            cap = W21[a, b - 1] ** 2 * delta
            at = W2[a, b - 1]
            x, f = _slit(W1[a, b - 1], at, cap)
            W1[a, b] = x
            W11[a, b] = W11[a, b - 1] * f
            x, f = _slit(V1[a, b - 1], at, cap)
            V1[a, b] = x
            V11[a, b] = V11[a, b - 1] * f
            x, f = _slit(V2[a, b - 1], at, cap)
            V2[a, b] = x
            V21[a, b] = V21[a, b - 1] * f
            mA[a, b] = mA[a, b - 1] + cap
            Iacc[a, b] = Iacc[a, b - 1] + delta * delta * rowcum
            d = W1[a, b - 1] - W2[a, b - 1]
            s = math.sin(0.5 * d)
            s2 = 1.0 / (s * s)
            ct = math.cos(0.5 * d) / s
            rowcum += W11[a, b - 1] ** 2 * W21[a, b - 1] ** 2 * (-0.5 * s2 * ct * ct - 0.25 * s2 * s2)
        W2[0, b] = w2[b]
        W21[0, b] = 1.0
        for a in range(1, n1 + 1):
            x, f = _slit(W2[a - 1, b], W1[a - 1, b], W11[a - 1, b] ** 2 * delta)
            W2[a, b] = x
            W21[a, b] = W21[a - 1, b] * f
    for a in range(n1 + 1):
        for b in range(n2 + 1):
            good = True
            for p in range(4):
                if p == 0:
                    d = W1[a, b] - W2[a, b]
                elif p == 1:
                    d = W1[a, b] - V1[a, b]
                elif p == 2:
                    d = W2[a, b] - V1[a, b]
                else:
                    d = W2[a, b] - V2[a, b]
                g = d % TWO_PI
                g = min(g, TWO_PI - g)
                if not (g >= 1e-3):
                    good = False
            d = W1[a, b] - V2[a, b]
            g = d % TWO_PI
            if not (min(g, TWO_PI - g) >= 1e-3):
                good = False
            ok[a, b] = good
    return W1, W2, W11, W21, V1, V2, V11, V21, mA, Iacc, ok


@dataclass
class EnsembleLattice:
    delta: float
    W1: np.ndarray
    W2: np.ndarray
    W11: np.ndarray
    W21: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    V11: np.ndarray
    V21: np.ndarray
    mA: np.ndarray
    Iacc: np.ndarray
    ok: np.ndarray

    def haA(self):
        a = np.arange(self.mA.shape[0])[:, None]
        b = np.arange(self.mA.shape[1])[None, :]
        return self.mA - (a + b) * self.delta

    def args(self, a, b):
        h = self.mA[a, b] - (a + b) * self.delta
        return (self.W1[a, b], self.W2[a, b], self.V1[a, b], self.V2[a, b], self.W11[a, b],
                self.W21[a, b], self.V11[a, b], self.V21[a, b], self.mA[a, b], h, self.Iacc[a, b])

    def state(self, a, b) -> EnsembleState:
        W1, W2, V1, V2, W11, W21, V11, V21, mA, h, I = (float(x) for x in self.args(a, b))
        return EnsembleState(a * self.delta, b * self.delta, W1, W2, V1, V2, W11, W21, V11, V21,
                             mA, h, I, inD=bool(self.ok[a, b]))


def ensemble_lattice(w1_path, w2_path, v1, v2, delta, n1=None, n2=None) -> EnsembleLattice:
    """Field over nodes (a delta, b delta) from the two drivers sampled on step delta."""
    w1_path = np.asarray(w1_path, dtype=float)
    w2_path = np.asarray(w2_path, dtype=float)
    n1 = w1_path.size - 1 if n1 is None else n1
    n2 = w2_path.size - 1 if n2 is None else n2
    return EnsembleLattice(delta, *_lattice(w1_path, w2_path, float(v1), float(v2), float(delta),
                                            int(n1), int(n2)))


def ball_exit_index(driver_values, delta, radius):
    """First index k with |eta(k delta) - eta(0)| >= radius for the radial trace of the driver."""
    from .loewner import DrivingFunction, radial_trace
    w = np.asarray(driver_values, dtype=float)
    tr = radial_trace(DrivingFunction(delta * np.arange(w.size), w))
    far = np.nonzero(np.abs(tr.points - tr.points[0]) >= radius)[0]
    return int(far[0]) if far.size else w.size - 1, tr


@dataclass
class MartingaleRun:
    times: np.ndarray
    Mstar: np.ndarray     # (n_paths, n_times)
    Mc: np.ndarray
    ratio_err: np.ndarray  # pathwise |M_c/M_* - rn_deriv| relative
    M0star: float
    M0c: float
    stopped: np.ndarray   # fraction of paths stopped before each time


def martingale_experiment(kappa, cfg, times, n_paths, seed, delta=2e-3, radius=0.9,
                          paths=None) -> MartingaleRun:
    """Sample M_* and M_c at (t ^ tau1, t ^ tau2) under independent Brownian drivers, where
    tau_j is the first exit of curve j from the ball of the given radius about its start."""
    w1, v1, w2, v2 = cfg
    times = np.asarray(times, dtype=float)
    n = int(round(times.max() / delta))
    idx = np.rint(times / delta).astype(int)
    paths = np.arange(n_paths) if paths is None else np.asarray(paths)
    sk = math.sqrt(kappa * delta)
    Ms = np.empty((paths.size, times.size))
    Mc = np.empty_like(Ms)
    rerr = np.empty(paths.size)
    stopped = np.zeros(times.size)
    for r, p in enumerate(paths):
        p = int(p)
        d1 = w1 + np.concatenate([[0.0], np.cumsum(sk * normals(seed, p, 0, n, stream=1))])
        d2 = w2 + np.concatenate([[0.0], np.cumsum(sk * normals(seed, p, 0, n, stream=2))])
        k1, _ = ball_exit_index(d1, delta, radius)
        k2, _ = ball_exit_index(d2, delta, radius)
        lat = ensemble_lattice(d1, d2, v1, v2, delta, min(k1, n), min(k2, n))
        worst = 0.0
        for q, i in enumerate(idx):
            a, b = min(i, k1), min(i, k2)
            stopped[q] += (i > k1) or (i > k2)
            if not lat.ok[a, b]:
                raise RuntimeError("stopped ensemble left the time region; shrink the ball")
            args = lat.args(a, b)
            Ms[r, q] = math.exp(log_Mstar(kappa, *args))
            Mc[r, q] = math.exp(log_Mc(kappa, *args))
            rn = math.exp(-alpha0(kappa) * args[8]) / tilde_G_raw(kappa, args[0], args[2],
                                                                  args[1], args[3])
            worst = max(worst, abs(Mc[r, q] / Ms[r, q] - rn) / rn)
        rerr[r] = worst
    s0 = init_ensemble(w1, v1, w2, v2)
    return MartingaleRun(times, Ms, Mc, rerr, mart_Mstar(s0, kappa), mart_Mc(s0, kappa),
                         stopped / paths.size)


def dump_lattice_diagonal(path, lat: EnsembleLattice, kappa):
    """CSV t, W1, W2, V1, V2, W11, W21, mA, Mstar, Mc along t1 = t2 = t."""
    n = min(lat.mA.shape)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "W1", "W2", "V1", "V2", "W11", "W21", "mA", "Mstar", "Mc"])
        for i in range(n):
            if not lat.ok[i, i]:
                break
            args = lat.args(i, i)
            wr.writerow([repr(float(x)) for x in (
                i * lat.delta, args[0], args[1], args[2], args[3], args[4], args[5], args[8],
                math.exp(log_Mstar(kappa, *args)), math.exp(log_Mc(kappa, *args)))])


# ---------------------------------------------------------------------------
# Time curve u and the Z diffusion

def u_speeds(z1, z2):
    """q_j = W_{j,1}^2 u_j' = sin Z_j / (sin Z_1 + sin Z_2)."""
    s1, s2 = np.sin(z1), np.sin(z2)
    return s1 / (s1 + s2), s2 / (s1 + s2)


def z_drift(kappa, z1, z2):
    den = np.sin(z1) + np.sin(z2)
    return (kappa - 2.0) * np.cos(z1) / den, (kappa - 2.0) * np.cos(z2) / den


def z_diffusion(kappa, z1, z2):
    q1, q2 = u_speeds(z1, z2)
    return np.sqrt(kappa * q1), np.sqrt(kappa * q2)


def advance_u(state: EnsembleState, kappa, dt, noise=(0.0, 0.0)) -> tuple[EnsembleState, dict]:
    """One Euler step of length dt along the time curve u.

    Z_j = W_j - V_j moves by the Z SDE with the supplied standard normals; V_s moves by its
    drift sum_j q_j cot_2(V_s - W_j) dt; mA advances by (q1 + q2) dt = dt.  The θ = π constraint
    is restored by splitting the residual between V1 and V2.  Own-direction derivatives are not
    determined by these equations, so W11, W21, t1, t2, haA, Iacc become NaN.
    """
    if not state.inD:
        raise ValueError("state has left the time region")
    z1, z2 = state.W1 - state.V1, state.W2 - state.V2
    q1, q2 = u_speeds(z1, z2)
    m1, m2 = z_drift(kappa, z1, z2)
    s1, s2 = math.sqrt(kappa * q1), math.sqrt(kappa * q2)
    rt = math.sqrt(dt)
    nz1 = z1 + m1 * dt + s1 * rt * noise[0]
    nz2 = z2 + m2 * dt + s2 * rt * noise[1]
    dV1 = (q1 * cot2(state.V1 - state.W1) + q2 * cot2(state.V1 - state.W2)) * dt
    dV2 = (q1 * cot2(state.V2 - state.W1) + q2 * cot2(state.V2 - state.W2)) * dt
    V1, V2 = state.V1 + dV1, state.V2 + dV2
    resid = (V1 - V2) - math.pi
    V1 -= 0.5 * resid
    V2 += 0.5 * resid
    nan = float("nan")
    new = replace(state, W1=V1 + nz1, W2=V2 + nz2, V1=V1, V2=V2, mA=state.mA + (q1 + q2) * dt,
                  W11=nan, W21=nan, V11=nan, V21=nan, t1=nan, t2=nan, haA=nan, Iacc=nan,
                  WS1=nan, WS2=nan)
    info = {"q": (float(q1), float(q2)), "theta_correction": float(resid)}
    if not (0.0 < nz1 < math.pi and 0.0 < nz2 < math.pi):
        new = replace(new, inD=False, reason="Z left (0, pi)^2")
    return new, info


@dataclass
class ZSamples:
    z1: np.ndarray
    z2: np.ndarray
    weight: np.ndarray
    t: float
    reflected: np.ndarray   # per path: number of reflecting substeps used

    @property
    def exit_rate(self):
        return float(np.mean(self.reflected > 0))

    def to_csv(self, path, path_ids=None):
        ids = np.arange(self.z1.size) if path_ids is None else path_ids
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["path", "z1", "z2", "weight"])
            for i, a, b, w in zip(ids, self.z1, self.z2, self.weight):
                wr.writerow([int(i), repr(float(a)), repr(float(b)), repr(float(w))])


@njit(cache=True)
def _z_sub(a, b, kappa, h, e1, e2):
    sa, sb = math.sin(a), math.sin(b)
    den = sa + sb
    return (a + (kappa - 2.0) * math.cos(a) / den * h + math.sqrt(kappa * sa / den) * e1,
            b + (kappa - 2.0) * math.cos(b) / den * h + math.sqrt(kappa * sb / den) * e2)


@njit(cache=True)
def _reflect(x):
    if x <= 0.0:
        x = -x
    elif x >= math.pi:
        x = 2.0 * math.pi - x
    return min(max(x, 1e-12), math.pi - 1e-12)


@njit(cache=True)
def _z_em(z1, z2, dB1, dB2, kappa, dt, refl):
    # A step that would leave (0, pi)^2 is redone with 2, 4, ... equal substeps sharing the
    # same Brownian increment; only a crossing at the finest level is reflected and counted.
    n, m = dB1.shape
    sq = math.sqrt(dt)
    for i in range(n):
        for p in range(m):
            a, b = z1[p], z2[p]
            e1, e2 = sq * dB1[i, p], sq * dB2[i, p]
            k = 1
            while True:
                x, y = a, b
                out = False
                for _ in range(k):
                    x, y = _z_sub(x, y, kappa, dt / k, e1 / k, e2 / k)
                    if x <= 0.0 or x >= math.pi or y <= 0.0 or y >= math.pi:
                        out = True
                        if k < 1024:
                            break
                        x, y = _reflect(x), _reflect(y)
                if not out or k >= 1024:
                    break
                k *= 2
            if out:
                refl[p] += 1
            z1[p] = x
            z2[p] = y


def simulate_Z(kappa, z0, t_end, dt, n_paths, law="star", seed=0, paths=None,
               batch=4096, chunk=1024, t_grid=None):
    """Euler-Maruyama for the Z diffusion from z0.

    law 'star' returns unit weights; law 'c' attaches e^{-alpha0 t} G~u(z0)/G~u(Z_t).  With
    t_grid, a list of ZSamples is returned, one per grid time (multiples of dt)."""
    if law not in ("star", "c"):
        raise ValueError("law must be 'star' or 'c'")
    z0 = (float(z0[0]), float(z0[1]))
    if not all(0.0 < z < math.pi for z in z0):
        raise ValueError("z0 must lie in (0, pi)^2")
    paths = np.arange(n_paths) if paths is None else np.asarray(paths, dtype=np.int64)
    grid = [t_end] if t_grid is None else list(t_grid)
    marks = [int(round(t / dt)) for t in grid]
    if any(np.diff(marks) < 0) or marks[0] < 0:
        raise ValueError("time grid must be non-decreasing and non-negative")
    n = marks[-1]
    outs = [(np.empty(paths.size), np.empty(paths.size)) for _ in marks]
    refl_at = [np.empty(paths.size, dtype=np.int64) for _ in marks]
    for s in range(0, paths.size, batch):
        pb = paths[s:s + batch]
        z1 = np.full(pb.size, z0[0])
        z2 = np.full(pb.size, z0[1])
        refl = np.zeros(pb.size, dtype=np.int64)
        done = 0
        for q, mk in enumerate(marks):
            while done < mk:
                k = min(chunk, mk - done)
                dB1 = normal_block(int(seed), pb, done, k, stream=1)
                dB2 = normal_block(int(seed), pb, done, k, stream=2)
                _z_em(z1, z2, dB1, dB2, float(kappa), float(dt), refl)
                done += k
            outs[q][0][s:s + pb.size] = z1
            outs[q][1][s:s + pb.size] = z2
            refl_at[q][s:s + pb.size] = refl
    res = []
    g0 = tilde_G_u(kappa, *z0)
    for q, mk in enumerate(marks):
        a, b = outs[q]
        t = mk * dt
        if law == "star":
            wgt = np.ones(paths.size)
        else:
            wgt = math.exp(-alpha0(kappa) * t) * g0 / tilde_G_u(kappa, a, b)
        res.append(ZSamples(a, b, wgt, t, refl_at[q]))
    return res[0] if t_grid is None else res

