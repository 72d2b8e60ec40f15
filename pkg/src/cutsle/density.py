"""Spectral transition densities of the (X, Y) = (cos Z+, sin Z-) diffusion on the disk.

The generator

    L = k/8 (1-x^2) d_xx + k/8 (1-y^2) d_yy - k/4 xy d_xy - ((k-2)/2 + k/8)(x d_x + y d_y)

is symmetric for the weight Psi = (1 - x^2 - y^2)^{1-4/k}, with eigenfunctions

    v_{n,j,1|2} = h_{n,j} P_j^{(1-4/k, n-2j)}(2r^2 - 1) r^{n-2j} cos|sin((n-2j) theta)

and eigenvalue lambda_n = -k/8 n (n + 4 - 8/k).  Densities are Psi(b) times the
kernel K_t(a, b) = sum v(a) v(b) e^{lambda t}.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln, roots_jacobi

from ._estimator import BaseModel, check_disk_points, check_is_fitted, check_kappa, check_z_points
from .green import alpha0, tilde_G_u

CACHE_VERSION = 1


# ---------------------------------------------------------------------------
# Jacobi polynomials

def _check_jacobi(j, alpha, beta):
    if int(j) != j or j < 0:
        raise ValueError("degree must be a non-negative integer")
    if alpha <= -1 or beta <= -1:
        raise ValueError("need alpha, beta > -1")


def jacobi_all(jmax, alpha, beta, x):
    """Values P_0..P_jmax at x by the three-term recurrence; shape (jmax+1,) + x.shape."""
    _check_jacobi(jmax, alpha, beta)
    x = np.asarray(x, dtype=float)
    out = np.empty((jmax + 1,) + x.shape)
    out[0] = 1.0
    if jmax >= 1:
        out[1] = (alpha + 1.0) + (alpha + beta + 2.0) * 0.5 * (x - 1.0)
    ab = alpha + beta
    for n in range(2, jmax + 1):
        a1 = 2.0 * n * (n + ab) * (2.0 * n + ab - 2.0)
        a2 = (2.0 * n + ab - 1.0) * (alpha * alpha - beta * beta)
        a3 = (2.0 * n + ab - 2.0) * (2.0 * n + ab - 1.0) * (2.0 * n + ab)
        a4 = 2.0 * (n + alpha - 1.0) * (n + beta - 1.0) * (2.0 * n + ab)
        out[n] = ((a2 + a3 * x) * out[n - 1] - a4 * out[n - 2]) / a1
    return out


def jacobi(j, alpha, beta, x):
    return jacobi_all(int(j), alpha, beta, x)[int(j)]


def jacobi_norm(j, alpha, beta):
    """Squared norm of P_j under (1-x)^alpha (1+x)^beta on [-1, 1]."""
    _check_jacobi(j, alpha, beta)
    if j == 0:
        # the closed form has a removable 0/0 at alpha + beta = -1
        return math.exp((alpha + beta + 1) * math.log(2) + gammaln(alpha + 1) + gammaln(beta + 1)
                        - gammaln(alpha + beta + 2))
    lg = ((alpha + beta + 1) * math.log(2) + gammaln(j + alpha + 1) + gammaln(j + beta + 1)
          - gammaln(j + 1) - math.log(2 * j + alpha + beta + 1) - gammaln(j + alpha + beta + 1))
    return math.exp(lg)


def jacobi_sup(j, alpha, beta):
    """sup over [-1, 1] of |P_j|, valid when max(alpha, beta) >= -1/2."""
    q = max(alpha, beta)
    return math.exp(gammaln(q + j + 1) - gammaln(j + 1) - gammaln(q + 1))


# ---------------------------------------------------------------------------
# Spectral data

def lambda_n(kappa, s):
    if s < 0:
        raise ValueError("s must be non-negative")
    return -kappa / 8.0 * s * (s + 4.0 - 8.0 / kappa)


def h_norm(kappa, n, j):
    if not (0 <= 2 * j <= n):
        raise ValueError("need 0 <= 2j <= n")
    a = 2.0 - 4.0 / kappa
    lg = (gammaln(j + 1) + math.log(n + a) + gammaln(n - j + a)
          - gammaln(j + a) - gammaln(n - j + 1))
    pref = (2.0 if n != 2 * j else 1.0) / math.pi
    return math.sqrt(pref * math.exp(lg))


def v_sup(kappa, n, j):
    a = 1.0 - 4.0 / kappa
    m = n - 2 * j
    p1 = math.exp(gammaln(a + 1 + j) - gammaln(j + 1) - gammaln(a + 1))
    p2 = math.exp(gammaln(n - j + 1) - gammaln(j + 1) - gammaln(m + 1))
    return h_norm(kappa, n, j) * max(p1, p2)


def Psi(kappa, x, y):
    r2 = np.asarray(x, dtype=float) ** 2 + np.asarray(y, dtype=float) ** 2
    return np.clip(1.0 - r2, 0.0, None) ** (1.0 - 4.0 / kappa)


def p_inf(kappa, x, y):
    return (2.0 - 4.0 / kappa) / math.pi * Psi(kappa, x, y)


def basis_index(N):
    """Rows (n, j, i, m) ordered by n, then j, then i."""
    rows = []
    for n in range(N + 1):
        for j in range(n // 2 + 1):
            m = n - 2 * j
            rows.append((n, j, 1, m))
            if m >= 1:
                rows.append((n, j, 2, m))
    return np.array(rows, dtype=np.int64).reshape(-1, 4)


def tail_bound_factor(kappa, N, t, nmax=None):
    """sum_{n > N} e^{lambda_n t} sum_{j,i} ||v_{n,j,i}||_inf^2."""
    total = 0.0
    n = N + 1
    nmax = nmax or N + 400
    while n <= nmax:
        lam = lambda_n(kappa, n)
        s = 0.0
        for j in range(n // 2 + 1):
            mult = 2 if n - 2 * j >= 1 else 1
            s += mult * v_sup(kappa, n, j) ** 2
        term = math.exp(lam * t) * s
        total += term
        if term < 1e-300 or (term < 1e-18 * max(total, 1e-300) and n > N + 5):
            break
        n += 1
    return total


# ---------------------------------------------------------------------------
# Model

class DensityModel(BaseModel):
    """Truncated eigenbasis for a given kappa.

    fit() tabulates indices, eigenvalues and normalizations; transform(XY) returns the basis
    matrix at points XY of shape (n_points, 2).
    """

    def __init__(self, kappa=6.0, N=40):
        self.kappa = kappa
        self.N = N

    def fit(self, X=None, y=None):
        check_kappa(self.kappa)
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        self.N = int(self.N)
        idx = basis_index(self.N)
        self.index_ = idx
        self.lambdas_ = np.array([lambda_n(self.kappa, n) for n in range(self.N + 1)])
        self.hs_ = np.array([h_norm(self.kappa, n, j) for n, j, _, _ in idx])
        self.lam_ = self.lambdas_[idx[:, 0]]
        self.alpha_ = 1.0 - 4.0 / self.kappa
        self.calZ_ = None
        return self

    @property
    def n_basis(self):
        check_is_fitted(self, "index_")
        return self.index_.shape[0]

    def transform(self, XY):
        XY = np.asarray(XY, dtype=float)
        return self.basis_matrix(XY[..., 0], XY[..., 1])

    def basis_matrix(self, x, y):
        check_is_fitted(self, "index_")
        x, y = check_disk_points(x, y)
        shape = x.shape
        x, y = x.ravel(), y.ravel()
        s = 2.0 * (x * x + y * y) - 1.0
        zeta = x + 1j * y
        out = np.empty((x.size, self.n_basis))
        N, a = self.N, self.alpha_
        pos = {(n, j, i): k for k, (n, j, i, _) in enumerate(self.index_)}
        zm = np.ones_like(zeta)
        for m in range(N + 1):
            jmax = (N - m) // 2
            P = jacobi_all(jmax, a, float(m), s)
            for j in range(jmax + 1):
                n = m + 2 * j
                k1 = pos[(n, j, 1)]
                out[:, k1] = self.hs_[k1] * P[j] * zm.real
                if m >= 1:
                    k2 = pos[(n, j, 2)]
                    out[:, k2] = self.hs_[k2] * P[j] * zm.imag
            zm = zm * zeta
        return out.reshape(shape + (self.n_basis,))

    def basis_v(self, n, j, i, x, y):
        if i == 2 and n - 2 * j < 1:
            raise ValueError("i = 2 needs n - 2j >= 1")
        if not (0 <= 2 * j <= n) or i not in (1, 2):
            raise ValueError("invalid basis index")
        check_is_fitted(self, "index_")
        x, y = check_disk_points(x, y)
        m = n - 2 * j
        s = 2.0 * (x * x + y * y) - 1.0
        zm = (x + 1j * y) ** m
        ang = zm.real if i == 1 else zm.imag
        return h_norm(self.kappa, n, j) * jacobi(j, self.alpha_, float(m), s) * ang

    # -- kernels and densities ------------------------------------------------

    def kernel(self, t, a, b):
        """K_t(a, b) for point arrays a (..., 2) and b (..., 2), broadcast over leading axes."""
        Va = self.transform(a)
        Vb = self.transform(b)
        return np.sum(Va * Vb * np.exp(self.lam_ * t), axis=-1)

    def kernel_matrix(self, t, A, B):
        """K_t between point sets A (n, 2) and B (m, 2), shape (n, m)."""
        Va = self.transform(A)
        Vb = self.transform(B)
        return (Va * np.exp(self.lam_ * t)) @ Vb.T

    def tail_bound(self, t):
        return tail_bound_factor(self.kappa, self.N, t)

    def save_cache(self, path):
        check_is_fitted(self, "index_")
        with open(path, "w", newline="") as fh:
            fh.write(f"# cutsle-density-cache version={CACHE_VERSION} kappa={self.kappa!r} N={self.N}\n")
            wr = csv.writer(fh)
            wr.writerow(["n", "j", "i", "m", "lambda", "h"])
            for (n, j, i, m), lam, h in zip(self.index_, self.lam_, self.hs_):
                wr.writerow([n, j, i, m, repr(float(lam)), repr(float(h))])

    @classmethod
    def load_cache(cls, path):
        with open(path, newline="") as fh:
            head = fh.readline().split()
            meta = dict(tok.split("=", 1) for tok in head[2:])
            if int(meta["version"]) != CACHE_VERSION:
                raise ValueError("unsupported cache version")
            rows = list(csv.DictReader(fh))
        model = cls(kappa=float(meta["kappa"]), N=int(meta["N"])).fit()
        h = np.array([float(r["h"]) for r in rows])
        if h.size != model.n_basis or np.max(np.abs(h - model.hs_)) > 1e-12 * np.max(h):
            raise ValueError("cache does not match the recomputed basis")
        return model


@dataclass
class DensityValue:
    value: np.ndarray
    tail: float
    clamped: int


def p_t(model: DensityModel, t, a, b, tol=None, max_N=200):
    """Transition density p_t(a, b) = Psi(b) K_t(a, b), clamped at 0, with its tail bound.

    With tol, the truncation degree is raised until the tail bound is below tol."""
    if t <= 0:
        raise ValueError("t must be positive")
    check_is_fitted(model, "index_")
    tail_f = model.tail_bound(t)
    if tol is not None and tail_f > tol:
        N = model.N
        while tail_f > tol:
            N = int(N * 1.5) + 1
            if N > max_N:
                raise ValueError(f"t = {t:g} is too small for tolerance {tol:g}; raise N beyond {max_N}")
            tail_f = tail_bound_factor(model.kappa, N, t)
        model = DensityModel(model.kappa, N).fit()
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    psi = Psi(model.kappa, b[..., 0], b[..., 1])
    raw = psi * model.kernel(t, a, b)
    tail = float(np.max(psi) * tail_f) if np.size(psi) else 0.0
    neg = raw < 0
    return DensityValue(np.where(neg, 0.0, raw), tail, int(np.count_nonzero(neg)))


# ---------------------------------------------------------------------------
# Quadrature on the disk

def disk_quadrature(kappa, n_s=64, n_theta=128, weighted=True):
    """Nodes (n, 2) and weights so that sum w f(node) ~ integral of f Psi over the disk
    (or of f alone with weighted=False)."""
    a = 1.0 - 4.0 / kappa if weighted else 0.0
    s, ws = roots_jacobi(n_s, a, 0.0)
    th = 2.0 * math.pi * np.arange(n_theta) / n_theta
    r = np.sqrt(0.5 * (1.0 + s))
    x = (r[:, None] * np.cos(th)[None, :]).ravel()
    y = (r[:, None] * np.sin(th)[None, :]).ravel()
    w = (0.25 * 2.0 ** (-a) * ws[:, None] * np.full(n_theta, 2.0 * math.pi / n_theta)[None, :]).ravel()
    return np.stack([x, y], axis=-1), w


# ---------------------------------------------------------------------------
# The operator L

def apply_L_fd(kappa, f, x, y, h=1e-3):
    """Fourth-order central-difference application of L to a callable f(x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    off = np.arange(-2, 3)
    fx = sum(c1[k] * f(x + off[k] * h, y) for k in range(5)) / h
    fy = sum(c1[k] * f(x, y + off[k] * h) for k in range(5)) / h
    fxx = sum(c2[k] * f(x + off[k] * h, y) for k in range(5)) / (h * h)
    fyy = sum(c2[k] * f(x, y + off[k] * h) for k in range(5)) / (h * h)
    fxy = sum(c1[k] * c1[l] * f(x + off[k] * h, y + off[l] * h)
              for k in range(5) for l in range(5) if c1[k] and c1[l]) / (h * h)
    drift = (kappa - 2.0) / 2.0 + kappa / 8.0
    return (kappa / 8.0 * (1 - x * x) * fxx + kappa / 8.0 * (1 - y * y) * fyy
            - kappa / 4.0 * x * y * fxy - drift * (x * fx + y * fy))


def apply_L_poly(kappa, c):
    """L applied to the polynomial with coefficients c[i, j] of x^i y^j (exact)."""
    from numpy.polynomial import polynomial as P
    c = np.asarray(c, dtype=float)
    p, q = c.shape
    out = np.zeros((p + 1, q + 1))

    def add(arr, dx, dy):
        out[dx:dx + arr.shape[0], dy:dy + arr.shape[1]] += arr

    fx = P.polyder(c, axis=0) if p > 1 else np.zeros((1, q))
    fy = P.polyder(c, axis=1) if q > 1 else np.zeros((p, 1))
    fxx = P.polyder(c, 2, axis=0) if p > 2 else np.zeros((1, q))
    fyy = P.polyder(c, 2, axis=1) if q > 2 else np.zeros((p, 1))
    fxy = P.polyder(P.polyder(c, axis=0), axis=1) if (p > 1 and q > 1) else np.zeros((1, 1))
    drift = (kappa - 2.0) / 2.0 + kappa / 8.0
    add(kappa / 8.0 * fxx, 0, 0)
    add(-kappa / 8.0 * fxx, 2, 0)
    add(kappa / 8.0 * fyy, 0, 0)
    add(-kappa / 8.0 * fyy, 0, 2)
    add(-kappa / 4.0 * fxy, 1, 1)
    add(-drift * fx, 1, 0)
    add(-drift * fy, 0, 1)
    return out


# ---------------------------------------------------------------------------
# Densities of Z = (Z1, Z2)

def z_to_xy(z1, z2):
    return np.cos(0.5 * (z1 + z2)), np.sin(0.5 * (z1 - z2))


def xy_to_z(x, y):
    zp = np.arccos(x)
    zm = np.arcsin(y)
    return zp + zm, zp - zm


def z_jacobian(z1, z2):
    """dx dy = (sin z1 + sin z2)/4 dz1 dz2."""
    return 0.25 * (np.sin(z1) + np.sin(z2))


def _zpts(z):
    z = np.asarray(z, dtype=float)
    z1, z2 = check_z_points(z[..., 0], z[..., 1])
    x, y = z_to_xy(z1, z2)
    return z1, z2, np.stack([x, y], axis=-1)


def pZ_t(model, t, z, zs):
    _, _, a = _zpts(z)
    s1, s2, b = _zpts(zs)
    return p_t(model, t, a, b).value * z_jacobian(s1, s2)


def pZ_inf(model, zs):
    s1, s2, b = _zpts(zs)
    return p_inf(model.kappa, b[..., 0], b[..., 1]) * z_jacobian(s1, s2)


def tilde_pZ_t(model, t, z, zs):
    z = np.asarray(z, dtype=float)
    zs = np.asarray(zs, dtype=float)
    k = model.kappa
    return (math.exp(-alpha0(k) * t) * pZ_t(model, t, z, zs)
            * tilde_G_u(k, z[..., 0], z[..., 1]) / tilde_G_u(k, zs[..., 0], zs[..., 1]))


def _calZ_integrand(kappa, z2, z1):
    x, y = z_to_xy(z1, z2)
    return (p_inf(kappa, x, y) * z_jacobian(z1, z2)) / tilde_G_u(kappa, z1, z2)


def calZ(model, epsabs=1e-11, epsrel=1e-11):
    """Integral over (0, pi)^2 of pZ_inf / G~u, by adaptive quadrature."""
    check_is_fitted(model, "index_")
    if model.calZ_ is None:
        k = model.kappa
        val, _ = integrate.dblquad(lambda z2, z1: _calZ_integrand(k, z2, z1), 0.0, math.pi,
                                   0.0, math.pi, epsabs=epsabs, epsrel=epsrel)
        model.calZ_ = val
    return model.calZ_


def tilde_pZ_inf(model, zs):
    zs = np.asarray(zs, dtype=float)
    return pZ_inf(model, zs) / (calZ(model) * tilde_G_u(model.kappa, zs[..., 0], zs[..., 1]))


def closed_shape(kappa, z1, z2):
    """Shape cos((z1-z2)/2)^{2-8/k} sin((z1+z2)/2) of pZ_inf / G~u (up to a constant)."""
    return np.abs(np.cos(0.5 * (z1 - z2))) ** (2.0 - 8.0 / kappa) * np.sin(0.5 * (z1 + z2))


def write_grid_csv(path, z1, z2, values):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["z1", "z2", "value"])
        for a, b, v in zip(np.ravel(z1), np.ravel(z2), np.ravel(values)):
            wr.writerow([repr(float(a)), repr(float(b)), repr(float(v))])


# ---------------------------------------------------------------------------
# Self-checks

def _check(value, tol):
    return {"value": float(value), "tol": float(tol), "pass": bool(value <= tol)}


def spectral_gap_rate(model, a=(0.3, 0.2), t_grid=None, n_s=40, n_theta=64):
    """Fitted log-slope of sup_b |p_t(a, b) - p_inf(b)| / p_inf(b) over t_grid."""
    t_grid = np.linspace(1.0, 4.0, 7) if t_grid is None else np.asarray(t_grid, dtype=float)
    B, _ = disk_quadrature(model.kappa, n_s, n_theta)
    h0sq = model.hs_[0] ** 2
    dev = np.array([np.max(np.abs(model.kernel(t, np.asarray(a, dtype=float), B) / h0sq - 1.0))
                    for t in t_grid])
    slope = np.polyfit(t_grid, np.log(dev), 1)[0]
    return float(slope), dev


def density_report(model, rng_seed=0):
    """Numerical checks of the spectral objects; each entry has value, tol and pass."""
    k = model.kappa
    rep = {}
    # Jacobi norms against Gauss-Jacobi quadrature
    al = 1.0 - 4.0 / k
    worst = 0.0
    for beta in (0.0, 1.0, 3.0):
        x, w = roots_jacobi(40, al, beta)
        P = jacobi_all(10, al, beta, x)
        for j in range(11):
            worst = max(worst, abs(np.sum(w * P[j] ** 2) / jacobi_norm(j, al, beta) - 1.0))
    rep["jacobi_norm"] = _check(worst, 1e-10)
    # orthonormality for n <= 6
    small = DensityModel(k, 6).fit()
    X, W = disk_quadrature(k)
    V = small.transform(X)
    G = (V * W[:, None]).T @ V
    rep["orthonormality"] = _check(np.max(np.abs(G - np.eye(G.shape[0]))), 1e-6)
    # eigenrelation with finite differences on a 50x50 interior grid
    g = np.linspace(-0.6, 0.6, 50)
    gx, gy = np.meshgrid(g, g)
    worst = 0.0
    for kk, (n, j, i, _) in enumerate(small.index_):
        f = lambda x, y, n=n, j=j, i=i: small.basis_v(n, j, i, x, y)
        r = apply_L_fd(k, f, gx, gy, h=5e-4) - lambda_n(k, n) * f(gx, gy)
        worst = max(worst, float(np.max(np.abs(r))))
    rep["eigenrelation"] = _check(worst, 1e-7)
    # self-adjointness on random cubic polynomials
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for _ in range(5):
        cf, cg = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
        from numpy.polynomial.polynomial import polyval2d
        x, y = X[:, 0], X[:, 1]
        lf = polyval2d(x, y, apply_L_poly(k, cf))
        lg = polyval2d(x, y, apply_L_poly(k, cg))
        worst = max(worst, abs(np.sum(W * lf * polyval2d(x, y, cg))
                               - np.sum(W * polyval2d(x, y, cf) * lg)))
    rep["self_adjoint"] = _check(worst, 1e-6)
    # mass, stationarity and Chapman-Kolmogorov with the model's truncation
    Xu, Wu = disk_quadrature(k, weighted=False)
    a = np.array([0.3, -0.2])
    pa = Psi(k, Xu[:, 0], Xu[:, 1]) * model.kernel(0.5, a, Xu)
    rep["mass"] = _check(abs(np.sum(Wu * pa) - 1.0), 1e-4)
    B = np.array([[0.1, 0.4], [-0.5, 0.2], [0.0, -0.7]])
    K = model.kernel_matrix(0.5, X, B)     # Psi in W: integral of p_inf(a) K_t(a, b) Psi(b)
    pinf_b = p_inf(k, B[:, 0], B[:, 1])
    stat = (W * model.hs_[0] ** 2) @ K * Psi(k, B[:, 0], B[:, 1])
    rep["stationarity"] = _check(np.max(np.abs(stat - pinf_b)), 1e-4)
    Ka = model.kernel(0.5, a, X)
    comp = (W * Ka) @ K * Psi(k, B[:, 0], B[:, 1])
    direct = Psi(k, B[:, 0], B[:, 1]) * model.kernel(1.0, a, B)
    rep["chapman_kolmogorov"] = _check(np.max(np.abs(comp / direct - 1.0)), 1e-3)
    # quasi-invariance of the tilted densities at t = 1 (in z coordinates through the disk)
    zs = np.array([[1.2, 2.0], [0.7, 0.9], [2.5, 1.5]])
    t = 1.0
    worst = 0.0
    for z in zs:
        ker = model.kernel(t, X, np.stack(z_to_xy(*z)))
        # p~inf(z) p~_t(z, z*) dz = e^{-a0 t} p_inf(x) K_t(x, x*) Psi(x*) J(z*) / (calZ G~u(z*)) dxdy
        lhs = (math.exp(-alpha0(k) * t) * model.hs_[0] ** 2 * np.sum(W * ker)
               * Psi(k, *z_to_xy(*z)) * z_jacobian(*z) / (calZ(model) * tilde_G_u(k, *z)))
        rhs = tilde_pZ_inf(model, z) * math.exp(-alpha0(k) * t)
        worst = max(worst, abs(lhs / rhs - 1.0))
    rep["quasi_invariance"] = _check(worst, 1e-3)
    # spectral gap and long-time shape
    lam1 = lambda_n(k, 1)
    slope, dev = spectral_gap_rate(model, t_grid=[1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0])
    rep["spectral_gap"] = _check(abs(slope / lam1 - 1.0), 0.05)
    _, d23 = spectral_gap_rate(model, t_grid=[2.0, 3.0])
    C = d23[0] / math.exp(lam1 * 2.0)
    rep["long_time_shape"] = _check(d23[1] / (C * math.exp(lam1 * 3.0)), 1.0 + 1e-2)
    return rep
