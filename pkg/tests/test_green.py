import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutsle.green import (BoundaryConfig, alpha0, beta0, disk_automorphism, green_disk,
                          green_general, predicted_prob, tilde_G, tilde_G_u, tilde_G_u_closed)

SYM = (1.5 * math.pi, math.pi, 0.5 * math.pi, 0.0)
G6 = 2.0 ** (-2.0 / 3.0)


def test_exponents_at_six():
    assert alpha0(6) == pytest.approx(1.25, abs=1e-15)
    assert beta0(6) == pytest.approx(11 / 15, abs=1e-15)


def test_alpha0_is_two_minus_cut_dimension():
    for k in np.linspace(4.1, 7.9, 20):
        assert alpha0(k) == pytest.approx(2 - (3 - 3 * k / 8), abs=1e-14)


def test_alpha0_increasing_from_half():
    ks = np.linspace(4, 8, 50)
    assert alpha0(4) == pytest.approx(0.5)
    assert np.all(np.diff(alpha0(ks)) > 0)


def test_symmetric_value():
    assert tilde_G(6, SYM) == pytest.approx(G6, rel=1e-14)
    assert G6 == pytest.approx(0.62996, abs=1e-5)


def test_ordering_and_coincidence_rejected():
    with pytest.raises(ValueError):
        tilde_G(6, (0.0, 1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        BoundaryConfig(1.0, 1.0, 0.5, 0.0)


ordered = st.lists(st.floats(0.05, 2 * math.pi - 0.05), min_size=3, max_size=3, unique=True).filter(
    lambda xs: min(np.diff(sorted([0.0] + xs + [2 * math.pi]))) > 0.02)


def _cfg(xs):
    a, b, c = sorted(xs, reverse=True)
    return BoundaryConfig(a, b, c, 0.0)


@settings(max_examples=60, deadline=None)
@given(ordered, st.floats(-10, 10), st.floats(4.2, 7.8))
def test_rotation_invariance(xs, c, k):
    cfg = _cfg(xs)
    assert tilde_G(k, cfg.rotate(c)) == pytest.approx(tilde_G(k, cfg), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(ordered, st.floats(4.2, 7.8))
def test_swap_symmetry(xs, k):
    cfg = _cfg(xs)
    w1, v1, w2, v2 = cfg.as_tuple()
    swapped = BoundaryConfig(w2 + 2 * math.pi, v2 + 2 * math.pi, w1, v1)
    assert tilde_G(k, swapped) == pytest.approx(tilde_G(k, cfg), rel=1e-9)
    assert tilde_G(k, cfg) > 0


def test_limits():
    # w meets v: vanishing factor; w1 meets w2 or v1 meets v2 also gives 0 for 4 < k < 8
    for k in (5.0, 6.0, 7.0):
        near = [tilde_G(k, (1.5 * math.pi, math.pi + e, math.pi, 0.0)) for e in (1e-2, 1e-4, 1e-6)]
        assert near[0] > near[1] > near[2]
        # decay like e^{1 - 4/k}
        assert near[1] / near[2] == pytest.approx(100 ** (1 - 4 / k), rel=1e-3)


def test_u_form_and_closed_form():
    assert tilde_G_u(6, math.pi / 2, math.pi / 2) == pytest.approx(G6, rel=1e-14)
    z = np.random.default_rng(3).uniform(0.01, math.pi - 0.01, (200, 2))
    for k in (4.5, 6.0, 7.5):
        a = tilde_G_u(k, z[:, 0], z[:, 1])
        b = tilde_G_u_closed(k, z[:, 0], z[:, 1])
        np.testing.assert_allclose(a, b, rtol=1e-12)
        np.testing.assert_allclose(a, tilde_G_u(k, z[:, 1], z[:, 0]), rtol=1e-12)
    assert tilde_G_u(6, 1e-8, 1.0) < 1e-2


def test_green_disk_at_origin():
    for k in (5.0, 6.0):
        assert green_disk(k, SYM, 0.0) == pytest.approx(tilde_G(k, SYM), rel=1e-14)


def test_green_disk_half():
    # z0 on the real axis: mapped angles computed by hand, |f'(z0)| = 4/3
    z0 = 0.5
    f, df = disk_automorphism(z0)
    assert df == pytest.approx(4 / 3)
    ang = [np.angle(f(np.exp(1j * a))) for a in SYM]
    # images of i and -i are (i - 1/2)/(1 - i/2) = (-4 + 3i)/5 and its conjugate
    assert ang[2] == pytest.approx(np.angle(-0.8 + 0.6j))
    want = (4 / 3) ** 1.25 * tilde_G(6, _order(np.unwrap(ang)))
    assert green_disk(6, SYM, z0) == pytest.approx(want, rel=1e-12)


def _order(lifted):
    # lift so that the order w1 > v1 > w2 > v2 > w1 - 2pi holds
    out = [lifted[0]]
    for a in lifted[1:]:
        while a >= out[-1]:
            a -= 2 * math.pi
        out.append(a)
    return tuple(out)


@settings(max_examples=40, deadline=None)
@given(ordered, st.floats(0, 0.8), st.floats(0, 2 * math.pi), st.floats(0, 0.8), st.floats(0, 2 * math.pi))
def test_mobius_covariance(xs, r0, t0, r1, t1):
    # G_D(cfg, z0) computed directly equals the value after first moving everything by an
    # automorphism phi: G(phi(cfg), phi(z0)) |phi'(z0)|^alpha0
    cfg = _cfg(xs)
    z0 = r0 * np.exp(1j * t0)
    a = r1 * np.exp(1j * t1)
    phi = lambda z: (z - a) / (1 - np.conj(a) * z)
    dphi = lambda z: (1 - abs(a) ** 2) / abs(1 - np.conj(a) * z) ** 2
    img = _order(np.unwrap([np.angle(phi(np.exp(1j * x))) for x in cfg.as_tuple()]))
    direct = green_disk(6, cfg, z0)
    moved = green_disk(6, img, phi(z0)) * dphi(z0) ** alpha0(6)
    assert moved == pytest.approx(direct, rel=1e-10)


def test_green_general_matches_disk():
    z0 = 0.3 - 0.2j
    f, df = disk_automorphism(z0)
    img = [np.angle(f(np.exp(1j * a))) for a in SYM]
    assert green_general(6, img, df) == pytest.approx(green_disk(6, SYM, z0), rel=1e-14)


def test_green_disk_rejects_outside():
    with pytest.raises(ValueError):
        green_disk(6, SYM, 1.0)


def test_prediction():
    p = predicted_prob(6, SYM, 0.0, 0.05, 1.0)
    assert p.value == pytest.approx(G6 * 0.05 ** 1.25, rel=1e-12)
    assert p.value == pytest.approx(0.01487, abs=5e-5)
    q = predicted_prob(6, SYM, 0.0, 0.1, 1.0)
    assert q.value / p.value == pytest.approx(2 ** 1.25, rel=1e-12)
    assert predicted_prob(6, SYM, 0.0, 1e-9, 1.0).value < 1e-10
    for r in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            predicted_prob(6, SYM, 0.0, r, 1.0)
