"""Pure-Python/numpy implementation of the hot kernels.

Mirrors the compiled ``_ckernels`` module function for function; used when the
extension is not built or ``NBILLIARD_PURE=1`` is set.

Conventions: ``C`` is an (n, 2) array of centres, ``M`` masses, ``A`` exponents.
V = sum m |x-c|^-a > 0 and the motion equation is x'' = grad V.
"""
import math

import numpy as np

# terminal codes of integrate()
WALL, ESCAPED, COLLISION, STEP_LIMIT, NONFINITE, TIME_LIMIT = range(6)

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
# energy local-error budget as a fraction of rtol * |h|
ENERGY_TOL = 0.01

_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                                -17253 / 339200, 22 / 525, -1 / 40)


def potential(C, M, A, x, y):
    v = 0.0
    for i in range(len(M)):
        dx = x - C[i, 0]
        dy = y - C[i, 1]
        r = math.sqrt(dx * dx + dy * dy)
        v += M[i] * r ** (-A[i])
    return v


def gradient(C, M, A, x, y):
    gx = gy = 0.0
    for i in range(len(M)):
        dx = x - C[i, 0]
        dy = y - C[i, 1]
        r2 = dx * dx + dy * dy
        f = -A[i] * M[i] * r2 ** (-(A[i] + 2.0) / 2.0)
        gx += f * dx
        gy += f * dy
    return gx, gy


def laplacian(C, M, A, x, y):
    s = 0.0
    for i in range(len(M)):
        dx = x - C[i, 0]
        dy = y - C[i, 1]
        r2 = dx * dx + dy * dy
        s += M[i] * A[i] * A[i] * r2 ** (-(A[i] + 2.0) / 2.0)
    return s


def hessian(C, M, A, x, y):
    hxx = hxy = hyy = 0.0
    for i in range(len(M)):
        dx = x - C[i, 0]
        dy = y - C[i, 1]
        r2 = dx * dx + dy * dy
        p = A[i] * M[i] * r2 ** (-(A[i] + 2.0) / 2.0)
        q = p * (A[i] + 2.0) / r2
        hxx += q * dx * dx - p
        hxy += q * dx * dy
        hyy += q * dy * dy - p
    return hxx, hxy, hyy


def potential_many(C, M, A, P):
    P = np.asarray(P, dtype=float)
    d = P[:, None, :] - C[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    return np.sum(M[None, :] * r ** (-A[None, :]), axis=1)


def gradient_many(C, M, A, P):
    P = np.asarray(P, dtype=float)
    d = P[:, None, :] - C[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    f = -A[None, :] * M[None, :] * r2 ** (-(A[None, :] + 2.0) / 2.0)
    return np.einsum("ij,ijk->ik", f, d)


def hessian_many(C, M, A, P):
    P = np.asarray(P, dtype=float)
    d = P[:, None, :] - C[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    p = A[None, :] * M[None, :] * r2 ** (-(A[None, :] + 2.0) / 2.0)
    q = p * (A[None, :] + 2.0) / r2
    out = np.empty((P.shape[0], 3))
    out[:, 0] = np.sum(q * d[:, :, 0] ** 2 - p, axis=1)
    out[:, 1] = np.sum(q * d[:, :, 0] * d[:, :, 1], axis=1)
    out[:, 2] = np.sum(q * d[:, :, 1] ** 2 - p, axis=1)
    return out


def min_centre_distance(C, P):
    P = np.asarray(P, dtype=float)
    d = P[:, None, :] - C[None, :, :]
    return float(np.sqrt(np.min(np.einsum("ijk,ijk->ij", d, d))))


def path_length(C, M, A, h, nodes):
    """Midpoint-rule JM length sum sqrt(2(h+V(mid))) |dx|."""
    nodes = np.asarray(nodes, dtype=float)
    if len(nodes) < 2:
        return 0.0
    seg = np.diff(nodes, axis=0)
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    g = 2.0 * (h + potential_many(C, M, A, mid))
    return float(np.sum(np.sqrt(g) * np.sqrt(np.einsum("ij,ij->i", seg, seg))))


def _rhs(C, M, A, y):
    gx, gy = gradient(C, M, A, y[0], y[1])
    return [y[2], y[3], gx, gy]


def _step(C, M, A, y, hs, k1, comp=(0.0, 0.0, 0.0, 0.0)):
    k2 = _rhs(C, M, A, [y[i] + hs * _A21 * k1[i] for i in range(4)])
    k3 = _rhs(C, M, A, [y[i] + hs * (_A31 * k1[i] + _A32 * k2[i]) for i in range(4)])
    k4 = _rhs(C, M, A, [y[i] + hs * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
                        for i in range(4)])
    k5 = _rhs(C, M, A, [y[i] + hs * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i]
                                     + _A54 * k4[i]) for i in range(4)])
    k6 = _rhs(C, M, A, [y[i] + hs * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                     + _A64 * k4[i] + _A65 * k5[i]) for i in range(4)])
    # compensated update: the rounding of y + dy is carried to the next step
    yn, cn = [0.0] * 4, [0.0] * 4
    for i in range(4):
        dy = hs * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]) + comp[i]
        yn[i] = y[i] + dy
        cn[i] = dy - (yn[i] - y[i])
    k7 = _rhs(C, M, A, yn)
    err = [hs * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                 + _E6 * k6[i] + _E7 * k7[i]) for i in range(4)]
    return yn, err, k7, cn


def _err_norm(y, yn, err, rtol, atol, k7=None, etol=0.0):
    s = 0.0
    for i in range(4):
        sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
        s += (err[i] / sc) ** 2
    s = math.sqrt(s / 4.0)
    if etol > 0.0:
        # local error of the energy, <u, du> - <grad V, dx>
        eh = abs(yn[2] * err[2] + yn[3] * err[3] - k7[2] * err[0] - k7[3] * err[1]) / etol
        s = max(s, eh)
    return s


def _mind(C, x, y):
    best = math.inf
    for i in range(C.shape[0]):
        best = min(best, math.hypot(x - C[i, 0], y - C[i, 1]))
    return best


def integrate(C, M, A, y0, wall_w, wall_d, origin, r_esc, t_max, rtol, atol,
              max_steps, eps_coll, record=True):
    """Adaptive DP5(4) integration of x'' = grad V.

    Stops on the first crossing of <w,x> = -d from inside (located with true
    RK steps to 1e-12 in time), on certified escape (|x-origin| > r_esc moving
    outward), on approach within eps_coll of a centre, or at t_max.
    Pass wall_d = inf for free flow.

    Returns (times, states, code, n_steps).
    """
    C = np.ascontiguousarray(C, dtype=float)
    y = [float(v) for v in y0]
    t = 0.0
    ts = [t]
    ys = [list(y)]
    k1 = _rhs(C, M, A, y)
    comp = [0.0] * 4
    etol = ENERGY_TOL * rtol * abs(0.5 * (y[2] ** 2 + y[3] ** 2) - potential(C, M, A, y[0], y[1]))
    wx, wy = float(wall_w[0]), float(wall_w[1])
    ox, oy = float(origin[0]), float(origin[1])
    use_wall = math.isfinite(wall_d)
    speed = math.hypot(y[2], y[3])
    scale = max(_mind(C, y[0], y[1]), 1e-3)
    hs = min(0.01 * scale / max(speed, 1e-300), t_max)
    n = 0
    code = TIME_LIMIT
    while True:
        if n >= max_steps:
            code = STEP_LIMIT
            break
        if t + hs > t_max:
            hs = t_max - t
        yn, err, k7, cn = _step(C, M, A, y, hs, k1, comp)
        en = _err_norm(y, yn, err, rtol, atol, k7, etol)
        if not math.isfinite(en):
            hs *= 0.25
            if hs < 1e-14 * max(1.0, abs(t)):
                code = COLLISION if _mind(C, y[0], y[1]) < 1e3 * eps_coll else NONFINITE
                break
            continue
        if en > 1.0:
            hs *= max(0.2, 0.9 * en ** -0.2)
            if hs < 1e-14 * max(1.0, abs(t)):
                code = COLLISION if _mind(C, y[0], y[1]) < 1e3 * eps_coll else NONFINITE
                break
            continue
        n += 1
        if use_wall:
            g0 = wx * y[0] + wy * y[1] + wall_d
            g1 = wx * yn[0] + wy * yn[1] + wall_d
            if g0 > 0.0 and g1 <= 0.0:
                dt, ye = _locate(C, M, A, y, k1, comp, hs, wx, wy, wall_d, g0, g1)
                t += dt
                ts.append(t)
                ys.append(ye)
                code = WALL
                break
        t += hs
        y = yn
        k1 = k7
        comp = cn
        if record:
            ts.append(t)
            ys.append(list(y))
        if not all(math.isfinite(v) for v in y):
            code = NONFINITE
            break
        if _mind(C, y[0], y[1]) < eps_coll:
            code = COLLISION
            break
        rx, ry = y[0] - ox, y[1] - oy
        if rx * rx + ry * ry > r_esc * r_esc and rx * y[2] + ry * y[3] > 0.0:
            code = ESCAPED
            break
        if t >= t_max:
            code = TIME_LIMIT
            break
        hs *= min(5.0, 0.9 * max(en, 1e-10) ** -0.2)
    if not record and (not ts or ts[-1] != t):
        ts.append(t)
        ys.append(list(y))
    return np.array(ts), np.array(ys), code, n


def _locate(C, M, A, y, k1, comp, hs, wx, wy, d, g0, g1):
    # Illinois regula falsi on the step size, each trial an actual RK step
    a, b = 0.0, hs
    ga, gb = g0, g1
    yb = None
    side = 0
    for _ in range(200):
        if b - a <= 1e-12:
            break
        c = (a * gb - b * ga) / (gb - ga)
        if not (a < c < b):
            c = 0.5 * (a + b)
        yc = _step(C, M, A, y, c, k1, comp)[0]
        gc = wx * yc[0] + wy * yc[1] + d
        if gc > 0.0:
            a, ga = c, gc
            if side == -1:
                gb *= 0.5
            side = -1
        else:
            b, gb, yb = c, gc, yc
            if side == 1:
                ga *= 0.5
            side = 1
            if gc == 0.0:
                break
    if yb is None:
        yb = _step(C, M, A, y, b, k1, comp)[0]
    return b, yb
