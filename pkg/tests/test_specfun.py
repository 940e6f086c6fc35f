import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from nbilliard.errors import ModulusOutOfRange, PoleProximity
from nbilliard.specfun import amplitude, complete_K, elliptic_F, jacobi, jacobi_many

mpmath.mp.dps = 30


def m_of(k):
    # square in extended precision: 1 - k^2 matters as k -> 1
    return mpmath.mpf(k) ** 2


def F_ref(phi, k):
    return float(mpmath.ellipf(phi, m_of(k)))


def test_trivial_values():
    for k in (0.0, 0.3, 0.99, 1.0):
        assert elliptic_F(0.0, k) == 0.0
    for phi in (-3.0, 0.4, 7.5):
        assert elliptic_F(phi, 0.0) == phi
    assert elliptic_F(0.5, 1.0) == pytest.approx(math.asinh(math.tan(0.5)), rel=1e-15)
    for u in np.linspace(-6, 6, 25):
        sn, cn, dn, _ = jacobi(u, 0.0, pole_tol=0.0)
        assert sn == pytest.approx(math.sin(u), abs=1e-15)
        assert cn == pytest.approx(math.cos(u), abs=1e-15)
        assert jacobi(u, 1.0)[0] == pytest.approx(math.tanh(u), abs=1e-15)


def test_modulus_range():
    with pytest.raises(ModulusOutOfRange):
        elliptic_F(0.3, 1.5)
    with pytest.raises(ModulusOutOfRange):
        jacobi(0.3, -1.01)


def test_tn_pole():
    K = complete_K(0.6)
    with pytest.raises(PoleProximity):
        jacobi(K, 0.6)
    sn, cn, _, tn = jacobi(0.4, 0.6)
    assert tn == pytest.approx(sn / cn, rel=1e-15)


def test_F_against_quadrature_and_mpmath(rng):
    phis = rng.uniform(-4 * math.pi, 4 * math.pi, 1000)
    ks = np.concatenate([rng.uniform(0, 0.999, 990), 1 - np.logspace(-3, -9, 10)])
    for phi, k in zip(phis, ks):
        ref = F_ref(phi, k)
        assert abs(elliptic_F(phi, k) - ref) <= 1e-12 * max(1.0, abs(ref))
    for phi, k in zip(phis[:50], ks[:50]):
        q = quad(lambda t: 1.0 / math.sqrt(1 - (k * math.sin(t)) ** 2), 0, phi,
                 epsabs=0.0, epsrel=1e-13, limit=200)[0]
        assert abs(elliptic_F(phi, k) - q) <= 1e-12 * max(1.0, abs(q))


def test_complete_K():
    for k in (0.0, 0.5, 0.9, 0.999999):
        assert complete_K(k) == pytest.approx(float(mpmath.ellipk(m_of(k))), rel=1e-14)
    assert complete_K(1.0) == math.inf


def test_jacobi_against_mpmath(rng):
    for u, k in zip(rng.uniform(-20, 20, 300), rng.uniform(0, 0.999, 300)):
        m = m_of(k)
        sn, cn, dn = jacobi_many(np.array([u]), k)[:3]
        assert abs(sn[0] - float(mpmath.ellipfun("sn", u, m=m))) < 1e-12
        assert abs(cn[0] - float(mpmath.ellipfun("cn", u, m=m))) < 1e-12
        assert abs(dn[0] - float(mpmath.ellipfun("dn", u, m=m))) < 1e-12


def test_inversion_and_identities(rng):
    for phi, k in zip(rng.uniform(-1.5, 1.5, 1000), rng.uniform(0, 0.9999, 1000)):
        sn, cn, dn, _ = jacobi(elliptic_F(phi, k), k, pole_tol=0.0)
        assert abs(sn - math.sin(phi)) <= 1e-12
        assert abs(sn * sn + cn * cn - 1.0) <= 1e-13
        assert abs(dn * dn + k * k * sn * sn - 1.0) <= 1e-13


def test_amplitude_inverts_F(rng):
    # amplitude is the inverse of F on the whole real line
    for phi, k in zip(rng.uniform(-12, 12, 300), rng.uniform(0, 0.999, 300)):
        assert amplitude(elliptic_F(phi, k), k) == pytest.approx(phi, abs=1e-11)


def test_F_strictly_increasing():
    for k in (0.1, 0.7, 0.9999):
        vals = [elliptic_F(p, k) for p in np.linspace(-7, 7, 2001)]
        assert np.all(np.diff(vals) > 0)
