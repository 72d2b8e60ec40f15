"""Command-line interface: density-eval, mc-cutpoint, survival, green-eval, simulate.

Parameters come from flags and, optionally, a config file (INI style, one section per
command, ``key = value``).  Flags override the file.  Every command writes manifest.json
next to its outputs.  Exit codes: 0 success, 1 failed check, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import json
import math
import operator
import os
import platform
import sys
import time

import numpy as np

from . import __version__

SYMMETRIC = "3*pi/2, pi, pi/2, 0"

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg,
        ast.UAdd: operator.pos}


def number(text) -> float:
    """A float, allowing arithmetic with pi (e.g. 3*pi/2)."""
    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"not a number: {text!r}")
    try:
        return ev(ast.parse(str(text).strip(), mode="eval").body)
    except SyntaxError:
        raise ValueError(f"not a number: {text!r}") from None


def numbers(text, count=None):
    vals = [number(s) for s in str(text).split(",") if s.strip()]
    if count is not None and len(vals) != count:
        raise ValueError(f"expected {count} comma-separated numbers, got {text!r}")
    return vals


def boundary(text):
    from .green import BoundaryConfig
    return BoundaryConfig(*numbers(SYMMETRIC if text == "symmetric" else text, 4))


# name: (type, default, help); default None means required unless noted
COMMANDS = {
    "density-eval": {
        "kappa": (float, None, "kappa in (4, 8)"),
        "N": (int, 40, "truncation degree"),
        "t": (float, 1.0, "time of the transition-density grid"),
        "z0": (str, "pi/2, pi/2", "start point z1, z2 of the density grid"),
        "grid": (int, 41, "grid points per axis on (0, pi)"),
        "out": (str, None, "output directory"),
    },
    "mc-cutpoint": {
        "kappa": (float, None, "kappa in (4, 8)"),
        "config": (str, "symmetric", "boundary angles w1, v1, w2, v2 or 'symmetric'"),
        "z0": (str, "0, 0", "interior point (re, im)"),
        "radii": (str, "0.4, 0.2, 0.1", "radii, comma separated"),
        "paths": (int, None, "number of paths"),
        "seed": (int, None, "random seed"),
        "workers": (int, 1, "worker processes"),
        "resolution": (float, 0.2, "trace spacing relative to the distance from z0"),
        "epsilon": (float, 0.0, "proximity scale relative to the distance from z0 (0: 1.5 resolution)"),
        "horizon": (float, 1e10, "half-plane capacity at which the chord is cut"),
        "save_scenes": (int, 0, "archive the scenes of the first K paths"),
        "out": (str, None, "output directory"),
    },
    "survival": {
        "kappa": (float, None, "kappa in (4, 8)"),
        "z0": (str, "pi/2, pi/2", "start point z1, z2"),
        "t_grid": (str, "0, 1, 1.5, 2, 2.5, 3, 3.5, 4", "increasing times"),
        "paths": (int, None, "number of paths"),
        "seed": (int, None, "random seed"),
        "dt": (float, 1e-3, "time step"),
        "out": (str, None, "output directory"),
    },
    "green-eval": {
        "kappa": (float, None, "kappa in (4, 8)"),
        "config": (str, "symmetric", "boundary angles w1, v1, w2, v2 or 'symmetric'"),
        "z0": (str, "0, 0", "interior point (re, im)"),
        "out": (str, "", "optional output directory"),
    },
    "simulate": {
        "kind": (str, "chord", "chordal | radial | chord | ensemble | z"),
        "kappa": (float, None, "kappa"),
        "dt": (float, 1e-3, "capacity (or time) step"),
        "horizon": (float, 1.0, "final capacity (or time)"),
        "seed": (int, None, "random seed"),
        "config": (str, "symmetric", "boundary angles for chord and ensemble"),
        "z0": (str, "pi/2, pi/2", "start point for kind z"),
        "paths": (int, 1000, "paths for kind z"),
        "path": (int, 0, "path index for single-path kinds"),
        "out": (str, None, "output directory"),
    },
}


def build_parser():
    p = argparse.ArgumentParser(prog="cutsle", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, spec in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config-file", default=None, help="INI file with a [%s] section" % name)
        for key, (typ, _, hlp) in spec.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None, help=hlp)
    rr = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    rr.add_argument("--manifest", required=True)
    rr.add_argument("--out", required=True)
    return p


def rerun_argv(manifest_path, out):
    """Flags reproducing the run recorded in manifest_path, writing into out."""
    with open(manifest_path) as fh:
        m = json.load(fh)
    cmd = m["command"]
    if cmd not in COMMANDS:
        raise ValueError(f"unknown command {cmd!r} in manifest")
    argv = [cmd]
    for k, v in m["params"].items():
        if k not in COMMANDS[cmd]:
            raise ValueError(f"unknown key {k!r} in manifest")
        if k != "out" and v is not None:
            argv += ["--" + k.replace("_", "-"), str(v)]
    return argv + ["--out", out]


def resolve(parser, args):
    """Defaults < config file < flags.  Missing required keys are a usage error."""
    spec = COMMANDS[args.command]
    params = {k: d for k, (_, d, _) in spec.items()}
    if args.config_file:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        if not cp.read(args.config_file):
            raise ValueError(f"cannot read config file {args.config_file}")
        if cp.has_section(args.command):
            for k, v in cp.items(args.command):
                key = k.replace("-", "_")
                if key not in spec:
                    raise ValueError(f"unknown key {k!r} in [{args.command}]")
                params[key] = spec[key][0](v) if spec[key][0] is not str else v
    for k in spec:
        v = getattr(args, k)
        if v is not None:
            params[k] = v
    missing = [k for k, v in params.items() if v is None]
    if missing:
        sub = f"cutsle {args.command}"
        sys.stderr.write(f"usage: {sub} " + " ".join(f"--{k.replace('_', '-')} ..."
                                                      for k in spec) + "\n")
        sys.stderr.write(f"{sub}: error: missing required "
                         + ", ".join("--" + k.replace("_", "-") for k in missing) + "\n")
        raise SystemExit(2)
    return params


def _prepare_out(path):
    if not path:
        return None
    if os.path.exists(path) and not os.path.isdir(path):
        raise ValueError(f"output path {path} is not a directory")
    os.makedirs(path, exist_ok=True)
    return path


def write_manifest(out, command, params, outputs, wall, extra=None):
    import scipy
    m = {"command": command, "params": params, "seed": params.get("seed"),
         "version": __version__, "python": platform.python_version(),
         "numpy": np.__version__, "scipy": scipy.__version__,
         "wall_time_s": round(wall, 3), "outputs": sorted(outputs)}
    if extra:
        m.update(extra)
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(m, fh, sort_keys=True, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------

def cmd_density_eval(p):
    from . import density as D
    from ._estimator import check_kappa
    check_kappa(p["kappa"])
    if p["N"] < 1 or p["grid"] < 2 or p["t"] <= 0:
        raise ValueError("need N >= 1, grid >= 2 and t > 0")
    z0 = numbers(p["z0"], 2)
    out = _prepare_out(p["out"])
    model = D.DensityModel(p["kappa"], p["N"]).fit()
    report = D.density_report(model)
    g = (np.arange(p["grid"]) + 0.5) * math.pi / p["grid"]
    Z1, Z2 = np.meshgrid(g, g, indexing="ij")
    zs = np.stack([Z1, Z2], axis=-1)
    model.save_cache(os.path.join(out, "spectral.csv"))
    D.write_grid_csv(os.path.join(out, "pZ_t.csv"), Z1, Z2, D.pZ_t(model, p["t"], np.array(z0), zs))
    D.write_grid_csv(os.path.join(out, "pZ_inf.csv"), Z1, Z2, D.pZ_inf(model, zs))
    D.write_grid_csv(os.path.join(out, "tilde_pZ_inf.csv"), Z1, Z2, D.tilde_pZ_inf(model, zs))
    report["calZ"] = D.calZ(model)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    ok = all(v["pass"] for v in report.values() if isinstance(v, dict))
    return 0 if ok else 1, out, ["spectral.csv", "pZ_t.csv", "pZ_inf.csv", "tilde_pZ_inf.csv",
                                 "report.json"], {"all_checks_pass": ok}


def cmd_mc_cutpoint(p):
    from ._estimator import check_kappa
    from .mc import McPlan, estimate_P, path_verdicts
    check_kappa(p["kappa"])
    zr, zi = numbers(p["z0"], 2)
    radii = sorted(numbers(p["radii"]), reverse=True)
    plan = McPlan(p["kappa"], boundary(p["config"]), tuple(radii), p["paths"], p["seed"],
                  complex(zr, zi), p["resolution"], p["epsilon"] or None, p["workers"], p["horizon"])
    out = _prepare_out(p["out"])
    res = estimate_P(plan)
    res.to_csv(os.path.join(out, "results.csv"))
    outputs = ["results.csv"]
    if p["save_scenes"] > 0:
        outputs += _save_scenes(plan, p["save_scenes"], out)
    extra = {"fit": None if res.fit is None else dict(zip(("slope", "intercept", "stderr"), res.fit)),
             "excluded": res.excluded, "epsilon_used": plan.eps, "floor": plan.floor}
    return 0, out, outputs, extra


def _save_scenes(plan, k, out):
    names = []
    for i in range(min(k, plan.n_paths)):
        pts, _ = plan.chord(i)
        name = f"scene_{i:05d}.csv"
        plan.scene(pts).to_csv(os.path.join(out, name))
        names.append(name)
    return names


def cmd_survival(p):
    from .mc import survival_experiment
    z0 = numbers(p["z0"], 2)
    tg = numbers(p["t_grid"])
    if p["paths"] < 1:
        raise ValueError("paths must be positive")
    out = _prepare_out(p["out"])
    res = survival_experiment(p["kappa"], tuple(z0), tg, p["paths"], p["seed"], dt=p["dt"])
    import csv
    with open(os.path.join(out, "survival.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "survival", "stderr", "ess", "level_ratio"])
        for row in zip(res.t, res.survival, res.stderr, res.ess, res.level_ratio):
            wr.writerow([repr(float(x)) for x in row])
    extra = {"slope": res.slope, "slope_stderr": res.slope_stderr, "reflect_rate": res.reflect_rate}
    return 0, out, ["survival.csv"], extra


def cmd_green_eval(p):
    from ._estimator import check_kappa
    from .green import alpha0, beta0, green_disk, tilde_G
    k = check_kappa(p["kappa"])
    cfg = boundary(p["config"])
    zr, zi = numbers(p["z0"], 2)
    res = {"kappa": k, "config": list(cfg.as_tuple()), "z0": [zr, zi], "alpha0": alpha0(k),
           "beta0": beta0(k), "tildeG": tilde_G(k, cfg), "G_D": green_disk(k, cfg, complex(zr, zi))}
    text = json.dumps(res, sort_keys=True, indent=2)
    print(text)
    out = _prepare_out(p["out"])
    if out:
        with open(os.path.join(out, "green.json"), "w") as fh:
            fh.write(text + "\n")
    return 0, out, ["green.json"], None


def cmd_simulate(p):
    from .ensemble import dump_lattice_diagonal, ensemble_lattice, simulate_Z
    from .loewner import DrivingFunction, chordal_trace, radial_trace, write_trace_csv
    from .samplers import SleConfig, normals, sample_chordal_driver, sample_disk_chord
    kind = p["kind"]
    if kind not in ("chordal", "radial", "chord", "ensemble", "z"):
        raise ValueError(f"unknown kind {kind!r}")
    cfg = SleConfig(p["kappa"], p["seed"], p["dt"], p["horizon"])
    out = _prepare_out(p["out"])
    outputs = []
    if kind in ("chordal", "radial", "chord"):
        if cfg.n_steps == 0:
            write_trace_csv(os.path.join(out, "trace.csv"), [], [])
            DrivingFunction(np.zeros(1), np.zeros(1)).to_csv(os.path.join(out, "driver.csv"))
            return 0, out, ["trace.csv", "driver.csv"], None
        if kind == "chordal":
            drv = sample_chordal_driver(cfg, p["path"])
            tr = chordal_trace(drv)
        elif kind == "radial":
            drv = sample_chordal_driver(cfg, p["path"])
            tr = radial_trace(drv)
        else:
            b = boundary(p["config"])
            tr, _ = sample_disk_chord(p["kappa"], b.w1, b.w2, cfg, arcs=(b.v1, b.v2), path=p["path"])
            drv = tr.driver
        tr.to_csv(os.path.join(out, "trace.csv"))
        drv.to_csv(os.path.join(out, "driver.csv"))
        outputs = ["trace.csv", "driver.csv"]
    elif kind == "ensemble":
        b = boundary(p["config"])
        n = cfg.n_steps
        sk = math.sqrt(p["kappa"] * p["dt"])
        d1 = b.w1 + np.concatenate([[0.0], np.cumsum(sk * normals(p["seed"], p["path"], 0, n, 1))])
        d2 = b.w2 + np.concatenate([[0.0], np.cumsum(sk * normals(p["seed"], p["path"], 0, n, 2))])
        lat = ensemble_lattice(d1, d2, b.v1, b.v2, p["dt"])
        dump_lattice_diagonal(os.path.join(out, "ensemble.csv"), lat, p["kappa"])
        outputs = ["ensemble.csv"]
    else:
        z0 = numbers(p["z0"], 2)
        zs = simulate_Z(p["kappa"], z0, p["horizon"], p["dt"], p["paths"], seed=p["seed"])
        zs.to_csv(os.path.join(out, "z_samples.csv"))
        outputs = ["z_samples.csv"]
    return 0, out, outputs, None


HANDLERS = {"density-eval": cmd_density_eval, "mc-cutpoint": cmd_mc_cutpoint,
            "survival": cmd_survival, "green-eval": cmd_green_eval, "simulate": cmd_simulate}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "rerun":
        try:
            return main(rerun_argv(args.manifest, args.out))
        except (ValueError, OSError, KeyError) as e:
            sys.stderr.write(f"error: {e}\n")
            return 2
    try:
        params = resolve(parser, args)
    except ValueError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    t0 = time.time()
    try:
        code, out, outputs, extra = HANDLERS[args.command](params)
    except (ValueError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except RuntimeError as e:
        sys.stderr.write(f"failed: {e}\n")
        return 1
    if out:
        write_manifest(out, args.command, params, outputs, time.time() - t0, extra)
    return code


if __name__ == "__main__":
    sys.exit(main())
