import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutsle.ensemble import (advance_u, bb, cc, ensemble_lattice, init_ensemble, mart_Mc,
                             mart_Mstar, martingale_experiment, rn_deriv, simulate_Z, step_direction,
                             u_speeds, z_diffusion, z_drift)
from cutsle.green import tilde_G
from cutsle.loewner import DrivingFunction, covering_evolve

SYM = (1.5 * math.pi, math.pi, 0.5 * math.pi, 0.0)


def s2(x):
    return abs(math.sin(0.5 * x))


def test_init():
    s = init_ensemble(*SYM)
    assert (s.W11, s.W21, s.V11, s.V21) == (1.0, 1.0, 1.0, 1.0)
    assert s.mA == 0 and s.t1 == 0 and s.Iacc == 0 and s.inD
    with pytest.raises(ValueError):
        init_ensemble(0.0, 1.0, 2.0, 3.0)
    with pytest.raises(ValueError):
        init_ensemble(7.0, 3.0, 2.0, 0.5)     # v2 <= w1 - 2pi


def test_exponent_constants():
    assert bb(6) == 0 and cc(6) == 0
    assert cc(8 / 3) == pytest.approx(0, abs=1e-15)


ordered = st.lists(st.floats(0.05, 2 * math.pi - 0.05), min_size=3, max_size=3, unique=True).filter(
    lambda xs: min(np.diff(sorted([0.0] + xs + [2 * math.pi]))) > 0.02)


def _cfg(xs, shift=0.0):
    a, b, c = sorted(xs, reverse=True)
    return (a + shift, b + shift, c + shift, shift)


@settings(max_examples=50, deadline=None)
@given(ordered, st.floats(-5, 5))
def test_init_martingales_at_six(xs, c):
    w1, v1, w2, v2 = _cfg(xs)
    s = init_ensemble(w1, v1, w2, v2)
    want = (s2(w1 - w2) * s2(w1 - v1) * s2(w1 - v2) * s2(w2 - v1) * s2(w2 - v2) * s2(v1 - v2)) ** (1 / 3)
    assert mart_Mstar(s, 6) == pytest.approx(want, rel=1e-12)
    assert mart_Mc(s, 6) == 1.0
    assert rn_deriv(s, 6) == pytest.approx(1 / tilde_G(6, (w1, v1, w2, v2)), rel=1e-12)
    r = init_ensemble(*_cfg(xs, c))
    assert mart_Mstar(r, 6) == pytest.approx(mart_Mstar(s, 6), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(ordered, st.floats(4.2, 7.8))
def test_init_Mc_and_rn(xs, k):
    w1, v1, w2, v2 = _cfg(xs)
    s = init_ensemble(w1, v1, w2, v2)
    assert mart_Mc(s, k) == pytest.approx(s2(w1 - w2) ** ((k - 6) / k), rel=1e-12)
    assert rn_deriv(s, k) == pytest.approx(1 / tilde_G(k, (w1, v1, w2, v2)), rel=1e-12)


def test_symmetric_values():
    s = init_ensemble(*SYM)
    assert rn_deriv(s, 6) == pytest.approx(2 ** (2 / 3), rel=1e-14)
    assert rn_deriv(s, 6) == pytest.approx(1.587, abs=1e-3)
    assert mart_Mc(s, 5) == pytest.approx(1.0, abs=1e-15)


def test_step_zero_and_validation():
    s = init_ensemble(*SYM)
    assert step_direction(s, 1, 0.0) is s
    with pytest.raises(ValueError):
        step_direction(s, 3, 0.1)
    with pytest.raises(ValueError):
        step_direction(s, 1, -0.1)


def test_single_direction_matches_covering_flow():
    n, dt = 2000, 2.5e-4
    t = dt * np.arange(n + 1)
    w = 1.5 * math.pi + 0.4 * np.sin(3 * t)
    s = init_ensemble(*SYM)
    for i in range(n):
        s = step_direction(s, 1, dt, tip=(w[i + 1], None, None), scheme="mid")
    ref = covering_evolve(DrivingFunction(t, w), [SYM[1], SYM[2], SYM[3]]).values[-1]
    assert s.t2 == 0 and s.W11 == 1.0
    np.testing.assert_allclose([s.V1, s.W2, s.V2], ref, atol=1e-6)
    assert s.mA == pytest.approx(n * dt)


def test_collision_freezes_state():
    s = init_ensemble(1.0, 0.9, 0.5, 0.0)
    moved = step_direction(s, 1, 0.05)
    out = step_direction(s, 1, 0.05, tip=(moved.V1 + 1e-4, None, None))
    assert not out.inD and "collision" in out.reason
    assert out.W1 == s.W1
    with pytest.raises(ValueError):
        step_direction(out, 1, 0.1)


def test_swap_symmetry_of_steps():
    # mirror start: rotate by pi and swap indices; equal increments in both directions
    a = init_ensemble(*SYM)
    b = init_ensemble(*SYM)
    inc = [0.05, -0.02, 0.03, 0.01]
    for d in inc:
        a = step_direction(a, 1, 1e-3, tip=(a.W1 + d, 1.0, None))
        a = step_direction(a, 2, 1e-3, tip=(a.W2 + d, 1.0, None))
        b = step_direction(b, 2, 1e-3, tip=(b.W2 + d, 1.0, None))
        b = step_direction(b, 1, 1e-3, tip=(b.W1 + d, 1.0, None))
    wrap = lambda x: (x + math.pi) % (2 * math.pi) - math.pi
    assert wrap(a.W1 - b.W2 - math.pi) == pytest.approx(0, abs=1e-12)
    assert wrap(a.V1 - b.V2 - math.pi) == pytest.approx(0, abs=1e-12)
    assert a.W21 == pytest.approx(b.W11, rel=1e-12)
    assert a.V11 == pytest.approx(b.V21, rel=1e-12)
    assert a.mA == pytest.approx(b.mA, rel=1e-12)


def test_swap_symmetry_on_lattice():
    # curve 2 is curve 1 rotated by pi with the same driver increments.  The lattice fills
    # nodes in a fixed order, so the mirror defect is first order in the step and must halve
    # with it; the tips themselves are exact.
    defects = []
    for d in (2e-3, 1e-3, 5e-4):
        n = int(round(0.12 / d))
        f = 0.3 * np.sin(50 * d * np.arange(n + 1))
        lat = ensemble_lattice(1.5 * math.pi + f, 0.5 * math.pi + f, math.pi, 0.0, d)
        a, b = n // 2, n
        assert lat.W1[a, b] - lat.W2[b, a] == pytest.approx(math.pi, abs=1e-12)
        assert lat.mA[a, b] == pytest.approx(lat.mA[b, a], rel=1e-4)
        defects.append(abs(lat.V1[a, b] - lat.V2[b, a] - math.pi))
    assert defects[0] / defects[1] == pytest.approx(2, rel=0.05)
    assert defects[1] / defects[2] == pytest.approx(2, rel=0.05)


def test_theta_monotone_in_t2():
    rng = np.random.default_rng(5)
    dt = 1e-3
    s = init_ensemble(*SYM)
    w2 = s.W2
    for _ in range(300):
        w2 += math.sqrt(6 * dt) * rng.standard_normal()
        new = step_direction(s, 2, dt, tip=(w2, None, None))
        if not new.inD:
            break
        th0, th1 = s.V1 - s.V2, new.V1 - new.V2
        assert th1 >= th0
        assert th1 - th0 >= 2 / math.tan(th0 / 4) * (new.mA - s.mA) - 1e-3
        s = new


def test_ratio_identity_on_random_states():
    run = martingale_experiment(6.0, SYM, [0.02, 0.05], 6, seed=3, delta=2e-3)
    assert run.ratio_err.max() < 1e-8
    run5 = martingale_experiment(5.0, SYM, [0.02, 0.05], 6, seed=4, delta=2e-3)
    assert run5.ratio_err.max() < 1e-8
    assert np.allclose(run.Mc, 1.0, atol=1e-12)


def test_u_speeds_and_z_coefficients():
    z = np.random.default_rng(1).uniform(0.01, math.pi - 0.01, (500, 2))
    q1, q2 = u_speeds(z[:, 0], z[:, 1])
    assert np.max(np.abs(q1 + q2 - 1)) < 1e-12
    assert u_speeds(1.1, 1.1) == (0.5, 0.5)
    assert z_drift(6, math.pi / 2, math.pi / 2) == pytest.approx((0, 0), abs=1e-15)
    assert z_diffusion(6, 0.7, 0.7) == pytest.approx((math.sqrt(3), math.sqrt(3)))


def test_advance_u_keeps_clock_and_theta():
    rng = np.random.default_rng(2)
    s = init_ensemble(*SYM)
    dt = 1e-3
    worst = 0.0
    for i in range(1000):
        s, info = advance_u(s, 6.0, dt, tuple(rng.standard_normal(2)))
        assert sum(info["q"]) == pytest.approx(1, abs=1e-12)
        worst = max(worst, abs(info["theta_correction"]))
        if not s.inD:
            break
        assert abs(s.V1 - s.V2 - math.pi) < 1e-4
        assert abs(s.mA - (i + 1) * dt) < 1e-6 * (i + 1) * dt + 1e-12
    assert worst < 1e-2 * dt ** 0.5
    first, info = advance_u(init_ensemble(*SYM), 6.0, dt)
    assert info["q"] == (0.5, 0.5)


def test_simulate_Z_deterministic_and_schedulable():
    a = simulate_Z(6, (1.0, 2.0), 0.2, 1e-3, 64, seed=9)
    b = simulate_Z(6, (1.0, 2.0), 0.2, 1e-3, 64, seed=9, batch=7)
    c = simulate_Z(6, (1.0, 2.0), 0.2, 1e-3, 0, seed=9, paths=np.arange(10, 20))
    np.testing.assert_array_equal(a.z1, b.z1)
    np.testing.assert_array_equal(a.z1[10:20], c.z1)
    assert np.all((a.z1 > 0) & (a.z1 < math.pi) & (a.z2 > 0) & (a.z2 < math.pi))
    w = simulate_Z(6, (1.0, 2.0), 0.2, 1e-3, 64, law="c", seed=9)
    np.testing.assert_array_equal(w.z1, a.z1)
    with pytest.raises(ValueError):
        simulate_Z(6, (0.0, 1.0), 0.2, 1e-3, 4)
    with pytest.raises(ValueError):
        simulate_Z(6, (1.0, 1.0), 0.2, 1e-3, 4, law="x")
