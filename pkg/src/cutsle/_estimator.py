"""Minimal estimator base (get_params / set_params) and input validation helpers."""

from __future__ import annotations

import inspect

import numpy as np


class BaseModel:
    """Parameters are the keyword arguments of __init__, stored under the same names."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return sorted(p.name for p in sig.parameters.values()
                      if p.name != "self" and p.kind != p.VAR_KEYWORD)

    def get_params(self, deep=True):
        return {k: getattr(self, k) for k in self._param_names()}

    def set_params(self, **params):
        valid = self._param_names()
        for k, v in params.items():
            if k not in valid:
                raise ValueError(f"invalid parameter {k!r} for {type(self).__name__}")
            setattr(self, k, v)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class NotFittedError(RuntimeError):
    pass


def check_is_fitted(model, attr):
    if getattr(model, attr, None) is None:
        raise NotFittedError(f"{type(model).__name__} is not fitted; call fit() first")


def check_kappa(kappa, lo=4.0, hi=8.0):
    kappa = float(kappa)
    if not (lo < kappa < hi):
        raise ValueError(f"kappa must lie in ({lo:g}, {hi:g}), got {kappa:g}")
    return kappa


def check_disk_points(x, y, closed=True):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    r2 = x * x + y * y
    bad = r2 > 1.0 + 1e-12 if closed else r2 >= 1.0
    if np.any(bad) or not np.all(np.isfinite(r2)):
        raise ValueError("points must lie in the unit disk")
    return x, y


def check_z_points(z1, z2):
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    z1, z2 = np.broadcast_arrays(z1, z2)
    if np.any((z1 <= 0) | (z1 >= np.pi) | (z2 <= 0) | (z2 >= np.pi)):
        raise ValueError("z points must lie in (0, pi)^2")
    return z1, z2
