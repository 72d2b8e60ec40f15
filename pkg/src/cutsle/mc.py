"""Monte Carlo estimation of the cut-point probability P(r), power-law fits, C0 and survival."""

from __future__ import annotations

import math
import multiprocessing as mp
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import __version__
from ._estimator import BaseModel, check_is_fitted
from .cutpoints import make_scene, verdicts_for_radii
from .green import BoundaryConfig, alpha0, disk_automorphism, green_disk, tilde_G, tilde_G_u
from .samplers import sample_full_chord

EXCLUSION_LIMIT = 0.01


@dataclass(frozen=True)
class McPlan:
    kappa: float
    cfg: BoundaryConfig
    radii: tuple
    n_paths: int
    seed: int
    z0: complex = 0j
    resolution: float = 0.2          # trace spacing / distance from z0
    epsilon: float | None = None     # proximity scale / distance from z0; None: 1.5 * resolution
    workers: int = 1
    horizon: float = 1e10            # half-plane capacity at which the chord is cut
    rfloor: float | None = None      # None: r_min / 4

    def __post_init__(self):
        if not isinstance(self.cfg, BoundaryConfig):
            object.__setattr__(self, "cfg", BoundaryConfig(*self.cfg))
        r = tuple(float(x) for x in self.radii)
        object.__setattr__(self, "radii", r)
        R = 1.0 - abs(self.z0)
        if not r or any(b >= a for a, b in zip(r, r[1:])):
            raise ValueError("radii must be strictly decreasing")
        if r[0] >= R or r[-1] <= 0:
            raise ValueError("radii must lie in (0, dist(z0, boundary))")
        if self.n_paths < 100:
            raise ValueError("n_paths must be at least 100")
        if self.workers < 1 or not self.resolution > 0 or not self.horizon > 0:
            raise ValueError("workers >= 1, resolution > 0 and horizon > 0 required")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.rfloor is not None and not self.rfloor > 0:
            raise ValueError("rfloor must be positive")

    @property
    def eps(self):
        return self.epsilon if self.epsilon is not None else 1.5 * self.resolution

    @property
    def floor(self):
        """Distance from z0 below which spacing and proximity stop shrinking."""
        return self.rfloor if self.rfloor is not None else self.radii[-1] / 4.0

    def mapped(self):
        """Boundary angles seen from z0 (mapped to 0), and |f'(z0)|."""
        f, df = disk_automorphism(self.z0)
        raw = [float(np.angle(f(np.exp(1j * a)))) for a in self.cfg.as_tuple()]
        ang = [raw[0]]
        for a in raw[1:]:
            ang.append(ang[-1] - (ang[-1] - a) % (2 * math.pi))
        return tuple(ang), df

    def chord(self, i):
        """Whole chord of path i in the original coordinates, and its driver times."""
        (w1, _, w2, _), df = self.mapped()
        c = sample_full_chord(self.kappa, w1, w2, self.seed, int(i), self.resolution,
                              self.floor * df, self.horizon)
        pts = c.points
        if self.z0 != 0:
            z0 = complex(self.z0)
            pts = (pts + z0) / (1 + np.conj(z0) * pts)
        return pts, c.driver.t

    def scene(self, pts, eps=None):
        return make_scene(pts, *self.cfg.as_tuple(), self.eps if eps is None else eps,
                          center=complex(self.z0), floor=self.floor)


def wilson(k, n, level=0.95):
    if n == 0:
        return (0.0, 1.0)
    z = norm.ppf(0.5 + level / 2)
    p = k / n
    den = 1 + z * z / n
    c = (p + z * z / (2 * n)) / den
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, c - h)
    hi = 1.0 if k == n else min(1.0, c + h)
    return (lo, hi)


def path_verdicts(plan: McPlan, i):
    """Verdict rows for path i: (hits per radius, hits with the chord cut at 1e-4 of the horizon,
    hits at eps/2).  Returns None when the path could not be simulated."""
    try:
        pts, ts = plan.chord(i)
    except (FloatingPointError, ValueError, ZeroDivisionError):
        return None
    if pts.size < 2 or not np.all(np.isfinite(pts)):
        return None
    main = verdicts_for_radii(plan.scene(pts), plan.z0, plan.radii)
    short = pts[ts <= 1e-4 * plan.horizon]
    hshort = verdicts_for_radii(plan.scene(short), plan.z0, plan.radii) if short.size >= 2 else main
    half = verdicts_for_radii(plan.scene(pts, plan.eps / 2), plan.z0, plan.radii)
    return (np.array([v.verdict for v in main]), np.array([v.verdict for v in hshort]),
            np.array([v.verdict for v in half]))


def _worker(args):
    plan, idx = args
    return [(int(i), path_verdicts(plan, i)) for i in idx]


class PowerLawFit(BaseModel):
    """Weighted least squares of log p against log r."""

    def __init__(self, min_points=3):
        self.min_points = min_points
        self.slope_ = None

    def fit(self, r, p, n=None, weights=None):
        r = np.asarray(r, dtype=float)
        p = np.asarray(p, dtype=float)
        if r.shape != p.shape:
            raise ValueError("r and p must have the same shape")
        keep = p > 0
        if not np.all(keep):
            warnings.warn(f"dropping {int(np.sum(~keep))} radii with zero estimate")
        if weights is None:
            if n is None:
                weights = np.ones_like(p)
            else:
                n = np.broadcast_to(np.asarray(n, dtype=float), p.shape)
                # delta method: var(log p^) ~ (1 - p) / (n p)
                # p^ clamped inside [1/2n, 1 - 1/2n] so that p^ = 1 keeps a finite weight
                pc = np.clip(p[keep], 0.5 / n[keep], 1 - 0.5 / n[keep])
                var = (1 - pc) / (n[keep] * pc)
                weights = np.ones_like(p)
                weights[keep] = 1.0 / np.maximum(var, 1e-300)
        weights = np.asarray(weights, dtype=float)
        r, p, wt = r[keep], p[keep], weights[keep]
        if r.size < self.min_points:
            raise ValueError(f"need at least {self.min_points} radii with positive estimate")
        X = np.stack([np.ones_like(r), np.log(r)], axis=1)
        y = np.log(p)
        W = wt / wt.sum()
        A = X.T @ (W[:, None] * X)
        beta = np.linalg.solve(A, X.T @ (W * y))
        res = y - X @ beta
        dof = r.size - 2
        s2 = float(np.sum(W * res ** 2) / dof) if dof > 0 else 0.0
        cov = s2 * np.linalg.inv(A)
        if n is not None:
            # absolute weights known: use them directly
            cov = np.linalg.inv(X.T @ (wt[:, None] * X))
        self.intercept_, self.slope_ = float(beta[0]), float(beta[1])
        self.stderr_ = float(math.sqrt(max(cov[1, 1], 0.0)))
        self.residual_ = float(np.max(np.abs(res))) if res.size else 0.0
        return self

    def predict(self, r):
        check_is_fitted(self, "slope_")
        return np.exp(self.intercept_) * np.asarray(r, dtype=float) ** self.slope_


def fit_power_law(radii, p, n=None, weights=None):
    f = PowerLawFit().fit(radii, p, n=n, weights=weights)
    return f.slope_, f.intercept_, f.stderr_


@dataclass
class McRunResult:
    plan: McPlan
    radii: np.ndarray
    hits: np.ndarray
    n: int
    excluded: int
    p: np.ndarray
    ci: np.ndarray               # (len(radii), 2)
    fit: tuple | None            # (slope, intercept, stderr)
    horizon_changed: np.ndarray  # fraction of paths whose verdict changes when the chord is cut early
    resolution_agree: np.ndarray  # fraction agreeing between eps and eps/2
    manifest: dict = field(default_factory=dict)

    @property
    def exclusion_rate(self):
        return self.excluded / (self.n + self.excluded)

    def Q(self):
        return self.p * self.radii ** (-alpha0(self.plan.kappa))

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["r", "p_hat", "ci_low", "ci_high", "n", "hits", "Q",
                         "horizon_changed", "resolution_agree"])
            for k, r in enumerate(self.radii):
                wr.writerow([repr(float(r)), repr(float(self.p[k])), repr(float(self.ci[k, 0])),
                             repr(float(self.ci[k, 1])), self.n, int(self.hits[k]),
                             repr(float(self.Q()[k])), repr(float(self.horizon_changed[k])),
                             repr(float(self.resolution_agree[k]))])


def estimate_P(plan: McPlan, chunk=8) -> McRunResult:
    t0 = time.time()
    idx = np.arange(plan.n_paths)
    jobs = [(plan, idx[s:s + chunk]) for s in range(0, idx.size, chunk)]
    if plan.workers == 1:
        parts = [_worker(j) for j in jobs]
    else:
        with mp.get_context("fork").Pool(plan.workers) as pool:
            parts = list(pool.imap_unordered(_worker, jobs))
    rows = sorted((r for part in parts for r in part), key=lambda x: x[0])
    m = len(plan.radii)
    hits = np.zeros(m, dtype=np.int64)
    changed = np.zeros(m, dtype=np.int64)
    agree = np.zeros(m, dtype=np.int64)
    excluded = 0
    for _, res in rows:
        if res is None:
            excluded += 1
            continue
        a, b, c = res
        hits += a
        changed += a != b
        agree += a == c
    if excluded / plan.n_paths > EXCLUSION_LIMIT:
        raise RuntimeError(f"{excluded} of {plan.n_paths} paths failed; above the 1% limit")
    n = plan.n_paths - excluded
    p = hits / n
    ci = np.array([wilson(int(k), n) for k in hits])
    radii = np.array(plan.radii)
    fit = None
    if np.count_nonzero(p > 0) >= 3:
        fit = fit_power_law(radii, p, n=n)
    manifest = {"kappa": plan.kappa, "cfg": list(plan.cfg.as_tuple()), "z0": [plan.z0.real, plan.z0.imag]
                if isinstance(plan.z0, complex) else [float(plan.z0), 0.0],
                "radii": list(plan.radii), "n_paths": plan.n_paths, "seed": plan.seed,
                "resolution": plan.resolution, "epsilon": plan.eps, "horizon": plan.horizon, "workers": plan.workers,
                "version": __version__, "wall_time": time.time() - t0}
    return McRunResult(plan, radii, hits, n, excluded, p, ci, fit, changed / n, agree / n, manifest)


def estimate_C0(runs, min_hits=30):
    """Per run: C0_i = p(r)/(r^alpha0 G), at the smallest radius with at least min_hits hits."""
    if len(runs) < 3:
        raise ValueError("need runs over at least 3 configurations")
    vals = []
    for run in runs:
        ok = np.nonzero(run.hits >= min_hits)[0]
        if ok.size == 0:
            raise ValueError("a run has no reliable radius")
        k = ok[-1]
        G = green_disk(run.plan.kappa, run.plan.cfg, run.plan.z0)
        vals.append(run.p[k] / (run.radii[k] ** alpha0(run.plan.kappa) * G))
    vals = np.array(vals)
    mean = float(vals.mean())
    return mean, float(vals.std() / mean), vals


def C0_from_values(kappa, cfgs, p, r):
    """Same estimate from raw numbers (one radius per configuration)."""
    vals = np.array([pi / (r ** alpha0(kappa) * tilde_G(kappa, c)) for c, pi in zip(cfgs, p)])
    if vals.size < 3:
        raise ValueError("need at least 3 configurations")
    return float(vals.mean()), float(vals.std() / vals.mean())


@dataclass
class SurvivalResult:
    t: np.ndarray
    survival: np.ndarray
    stderr: np.ndarray
    ess: np.ndarray
    level_ratio: np.ndarray
    slope: float | None
    slope_stderr: float | None
    reflect_rate: float


def survival_experiment(kappa, z0, t_grid, n_paths, seed, dt=1e-3, fit_window=(1.0, 4.0),
                        calZ=None):
    """Weighted survival curve P_c[T > t] from star-law paths, its log-slope over fit_window
    and the level ratio against calZ * G~u(z0) * e^{-alpha0 t}."""
    from .ensemble import simulate_Z
    from . import density
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise ValueError("t grid must be strictly increasing and non-negative")
    if not 4.0 < kappa < 8.0:
        raise ValueError("kappa must lie in (4, 8)")
    samples = simulate_Z(kappa, z0, t_grid[-1], dt, n_paths, law="c", seed=seed, t_grid=t_grid)
    S, se, ess = [], [], []
    for s in samples:
        w = s.weight
        S.append(float(w.mean()))
        se.append(float(w.std(ddof=1) / math.sqrt(w.size)) if w.size > 1 else 0.0)
        ess.append(float(w.sum() ** 2 / np.sum(w * w)))
    ess = np.array(ess)
    if np.any(ess < 0.01 * n_paths):
        raise RuntimeError("effective sample size below 1% of paths; reweighting has degenerated")
    S, se = np.array(S), np.array(se)
    if calZ is None:
        calZ = density.calZ(density.DensityModel(kappa, N=20).fit())
    level = S / (calZ * tilde_G_u(kappa, *z0) * np.exp(-alpha0(kappa) * t_grid))
    win = (t_grid >= fit_window[0]) & (t_grid <= fit_window[1]) & (S > 0)
    slope = slope_se = None
    if np.count_nonzero(win) >= 2:
        X = np.stack([np.ones(win.sum()), t_grid[win]], axis=1)
        wt = (S[win] / np.maximum(se[win], 1e-300)) ** 2
        A = X.T @ (wt[:, None] * X)
        beta = np.linalg.solve(A, X.T @ (wt * np.log(S[win])))
        slope = float(beta[1])
        slope_se = float(math.sqrt(np.linalg.inv(A)[1, 1]))
    refl = float(np.mean([s.exit_rate for s in samples]))
    return SurvivalResult(t_grid, S, se, ess, level, slope, slope_se, refl)
