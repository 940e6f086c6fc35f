"""Incomplete elliptic integral of the first kind and Jacobi elliptic functions.

Both use the arithmetic-geometric mean (descending Landen) recursion, which
keeps full accuracy as the modulus approaches 1.
"""
import math

import numpy as np

from .errors import ModulusOutOfRange, PoleProximity

_MAXIT = 64


def _check_k(k):
    k = float(k)
    if not (0.0 <= abs(k) <= 1.0):
        raise ModulusOutOfRange(f"modulus {k!r} outside [-1, 1]")
    return abs(k)


def _agm_sequence(k):
    a, b, c = 1.0, math.sqrt((1.0 - k) * (1.0 + k)), k
    seq = [(a, b, c)]
    for _ in range(_MAXIT):
        if abs(c) <= 1e-17 * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        seq.append((a, b, c))
    return seq


def complete_K(k):
    k = _check_k(k)
    if k == 1.0:
        return math.inf
    return math.pi / (2.0 * _agm_sequence(k)[-1][0])


def elliptic_F(phi, k):
    """F(phi, k) = int_0^phi dt / sqrt(1 - k^2 sin^2 t), any real phi."""
    k = _check_k(k)
    phi = float(phi)
    if k == 1.0:
        if abs(phi) >= 0.5 * math.pi:
            return math.copysign(math.inf, phi)
        return math.asinh(math.tan(phi))
    if k == 0.0 or phi == 0.0:
        return phi
    seq = _agm_sequence(k)
    p = phi
    for n in range(len(seq) - 1):
        a, b, _ = seq[n]
        # continuous branch of atan((b/a) tan p), staying within pi/2 of p
        q = math.atan2(b * math.sin(p), a * math.cos(p))
        q += 2.0 * math.pi * round((p - q) / (2.0 * math.pi))
        p = p + q
    return p / (2 ** (len(seq) - 1) * seq[-1][0])


def amplitude(u, k):
    """Jacobi amplitude am(u, k), continuous in u."""
    k = _check_k(k)
    u = float(u)
    if k == 0.0:
        return u
    if k == 1.0:
        return 2.0 * math.atan(math.exp(u)) - 0.5 * math.pi
    seq = _agm_sequence(k)
    n = len(seq) - 1
    p = 2 ** n * seq[-1][0] * u
    for j in range(n, 0, -1):
        a, _, c = seq[j]
        p = 0.5 * (p + math.asin(c / a * math.sin(p)))
    return p


def jacobi(u, k, pole_tol=1e-14):
    """(sn, cn, dn, tn) at real u; tn = sn/cn."""
    k = _check_k(k)
    if k == 1.0:
        sn, cn = math.tanh(u), 1.0 / math.cosh(u)
        return sn, cn, cn, math.sinh(u)
    phi = amplitude(u, k)
    sn, cn = math.sin(phi), math.cos(phi)
    dn = math.sqrt(max(0.0, 1.0 - k * k * sn * sn))
    if abs(cn) < pole_tol:
        raise PoleProximity(f"tn has a pole near u={u!r}")
    return sn, cn, dn, sn / cn


def jacobi_many(u, k):
    """Vectorized (sn, cn, dn, am) arrays; no pole checks."""
    phi = np.array([amplitude(x, k) for x in np.ravel(u)]).reshape(np.shape(u))
    sn, cn = np.sin(phi), np.cos(phi)
    return sn, cn, np.sqrt(np.maximum(0.0, 1.0 - k * k * sn * sn)), phi
