# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same API and semantics as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs, hypot, isfinite, INFINITY

cnp.import_array()

WALL, ESCAPED, COLLISION, STEP_LIMIT, NONFINITE, TIME_LIMIT = range(6)

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40
# energy local-error budget as a fraction of rtol * |h|
cdef double ENERGY_TOL = 0.01


cdef inline double _pot(const double[:, ::1] C, const double[::1] M, const double[::1] A,
                        double x, double y) nogil:
    cdef Py_ssize_t i
    cdef double v = 0.0, dx, dy
    for i in range(M.shape[0]):
        dx = x - C[i, 0]
        dy = y - C[i, 1]
        v += M[i] * pow(dx * dx + dy * dy, -0.5 * A[i])
    return v


cdef inline void _grad(const double[:, ::1] C, const double[::1] M, const double[::1] A,
                       double x, double y, double* gx, double* gy) nogil:
    cdef Py_ssize_t i
    cdef double dx, dy, f
    gx[0] = 0.0
    gy[0] = 0.0
    for i in range(M.shape[0]):
        dx = x - C[i, 0]
        dy = y - C[i, 1]
        f = -A[i] * M[i] * pow(dx * dx + dy * dy, -0.5 * (A[i] + 2.0))
        gx[0] += f * dx
        gy[0] += f * dy


cdef inline void _hess(const double[:, ::1] C, const double[::1] M, const double[::1] A,
                       double x, double y, double* hxx, double* hxy, double* hyy) nogil:
    cdef Py_ssize_t i
    cdef double dx, dy, r2, p, q
    hxx[0] = 0.0
    hxy[0] = 0.0
    hyy[0] = 0.0
    for i in range(M.shape[0]):
        dx = x - C[i, 0]
        dy = y - C[i, 1]
        r2 = dx * dx + dy * dy
        p = A[i] * M[i] * pow(r2, -0.5 * (A[i] + 2.0))
        q = p * (A[i] + 2.0) / r2
        hxx[0] += q * dx * dx - p
        hxy[0] += q * dx * dy
        hyy[0] += q * dy * dy - p


def potential(const double[:, ::1] C, const double[::1] M, const double[::1] A, double x, double y):
    return _pot(C, M, A, x, y)


def gradient(const double[:, ::1] C, const double[::1] M, const double[::1] A, double x, double y):
    cdef double gx, gy
    _grad(C, M, A, x, y, &gx, &gy)
    return gx, gy


def laplacian(const double[:, ::1] C, const double[::1] M, const double[::1] A, double x, double y):
    cdef Py_ssize_t i
    cdef double s = 0.0, dx, dy
    for i in range(M.shape[0]):
        dx = x - C[i, 0]
        dy = y - C[i, 1]
        s += M[i] * A[i] * A[i] * pow(dx * dx + dy * dy, -0.5 * (A[i] + 2.0))
    return s


def hessian(const double[:, ::1] C, const double[::1] M, const double[::1] A, double x, double y):
    cdef double a, b, c
    _hess(C, M, A, x, y, &a, &b, &c)
    return a, b, c


def potential_many(const double[:, ::1] C, const double[::1] M, const double[::1] A, P):
    cdef const double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = Pv.shape[0], j
    out = np.empty(n)
    cdef double[::1] o = out
    for j in range(n):
        o[j] = _pot(C, M, A, Pv[j, 0], Pv[j, 1])
    return out


def gradient_many(const double[:, ::1] C, const double[::1] M, const double[::1] A, P):
    cdef const double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = Pv.shape[0], j
    out = np.empty((n, 2))
    cdef double[:, ::1] o = out
    for j in range(n):
        _grad(C, M, A, Pv[j, 0], Pv[j, 1], &o[j, 0], &o[j, 1])
    return out


def hessian_many(const double[:, ::1] C, const double[::1] M, const double[::1] A, P):
    cdef const double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = Pv.shape[0], j
    out = np.empty((n, 3))
    cdef double[:, ::1] o = out
    for j in range(n):
        _hess(C, M, A, Pv[j, 0], Pv[j, 1], &o[j, 0], &o[j, 1], &o[j, 2])
    return out


cdef inline double _mind(const double[:, ::1] C, double x, double y) nogil:
    cdef Py_ssize_t i
    cdef double best = INFINITY, r
    for i in range(C.shape[0]):
        r = hypot(x - C[i, 0], y - C[i, 1])
        if r < best:
            best = r
    return best


def min_centre_distance(const double[:, ::1] C, P):
    cdef const double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t j
    cdef double best = INFINITY, r
    for j in range(Pv.shape[0]):
        r = _mind(C, Pv[j, 0], Pv[j, 1])
        if r < best:
            best = r
    return best


def path_length(const double[:, ::1] C, const double[::1] M, const double[::1] A, double h, nodes):
    cdef const double[:, ::1] X = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef Py_ssize_t j, n = X.shape[0] - 1
    cdef double L = 0.0, sx, sy, mx, my
    for j in range(n):
        sx = X[j + 1, 0] - X[j, 0]
        sy = X[j + 1, 1] - X[j, 1]
        mx = 0.5 * (X[j + 1, 0] + X[j, 0])
        my = 0.5 * (X[j + 1, 1] + X[j, 1])
        L += sqrt(2.0 * (h + _pot(C, M, A, mx, my))) * sqrt(sx * sx + sy * sy)
    return L


cdef inline void _rhs(const double[:, ::1] C, const double[::1] M, const double[::1] A,
                      double* y, double* f) nogil:
    f[0] = y[2]
    f[1] = y[3]
    _grad(C, M, A, y[0], y[1], &f[2], &f[3])


cdef double _step(const double[:, ::1] C, const double[::1] M, const double[::1] A, double* y,
                  double hs, double* k1, double* yn, double* k7,
                  double rtol, double atol, double etol, double* comp, double* cn) nogil:
    """One DP5(4) step; returns the scaled error norm (yn, k7 filled).

    Besides the componentwise test, the local error of the energy
    <u, du> - <grad V, dx> must stay below etol.
    """
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double k5[4]
    cdef double k6[4]
    cdef double tmp[4]
    cdef double err, sc, s = 0.0, a, b, eh = 0.0
    cdef double e[4]
    cdef int i
    for i in range(4):
        tmp[i] = y[i] + hs * A21 * k1[i]
    _rhs(C, M, A, tmp, k2)
    for i in range(4):
        tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i])
    _rhs(C, M, A, tmp, k3)
    for i in range(4):
        tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    _rhs(C, M, A, tmp, k4)
    for i in range(4):
        tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    _rhs(C, M, A, tmp, k5)
    for i in range(4):
        tmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                              + A65 * k5[i])
    _rhs(C, M, A, tmp, k6)
    # compensated update: the rounding of y + dy is carried to the next step
    for i in range(4):
        a = hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]) + comp[i]
        yn[i] = y[i] + a
        cn[i] = a - (yn[i] - y[i])
    _rhs(C, M, A, yn, k7)
    for i in range(4):
        err = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                    + E7 * k7[i])
        e[i] = err
        a = fabs(y[i])
        b = fabs(yn[i])
        sc = atol + rtol * (a if a > b else b)
        s += (err / sc) * (err / sc)
    s = sqrt(s / 4.0)
    if etol > 0.0:
        eh = fabs(yn[2] * e[2] + yn[3] * e[3] - k7[2] * e[0] - k7[3] * e[1]) / etol
        if eh > s:
            return eh
    return s


def integrate(C, M, A, y0, wall_w, double wall_d, origin, double r_esc,
              double t_max, double rtol, double atol, long max_steps,
              double eps_coll, bint record=True):
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef const double[::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef const double[::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef double y[4]
    cdef double yn[4]
    cdef double k1[4]
    cdef double k7[4]
    cdef double yc[4]
    cdef double kc[4]
    cdef double comp[4]
    cdef double cn[4]
    cdef double cc[4]
    cdef double wx = wall_w[0], wy = wall_w[1], ox = origin[0], oy = origin[1]
    cdef bint use_wall = isfinite(wall_d)
    cdef double t = 0.0, hs, en, g0, g1, rx, ry, scale, speed, etol
    cdef double a, b, c, ga, gb, gc
    cdef long n = 0, cap = 1024, cnt = 0
    cdef int code = TIME_LIMIT, i, side, it
    cdef bint found
    for i in range(4):
        y[i] = y0[i]
        comp[i] = 0.0
    ts_arr = np.empty(cap)
    ys_arr = np.empty((cap, 4))
    cdef double[::1] tv = ts_arr
    cdef double[:, ::1] yv = ys_arr
    tv[0] = 0.0
    for i in range(4):
        yv[0, i] = y[i]
    cnt = 1
    _rhs(Cv, Mv, Av, y, k1)
    etol = ENERGY_TOL * rtol * fabs(0.5 * (y[2] * y[2] + y[3] * y[3]) - _pot(Cv, Mv, Av, y[0], y[1]))
    speed = hypot(y[2], y[3])
    scale = _mind(Cv, y[0], y[1])
    if scale < 1e-3:
        scale = 1e-3
    hs = 0.01 * scale / (speed if speed > 1e-300 else 1e-300)
    if hs > t_max:
        hs = t_max
    while True:
        if n >= max_steps:
            code = STEP_LIMIT
            break
        if t + hs > t_max:
            hs = t_max - t
        en = _step(Cv, Mv, Av, y, hs, k1, yn, k7, rtol, atol, etol, comp, cn)
        if not isfinite(en) or en > 1.0:
            if isfinite(en):
                hs *= max(0.2, 0.9 * pow(en, -0.2))
            else:
                hs *= 0.25
            if hs < 1e-14 * max(1.0, fabs(t)):
                code = COLLISION if _mind(Cv, y[0], y[1]) < 1e3 * eps_coll else NONFINITE
                break
            continue
        n += 1
        if use_wall:
            g0 = wx * y[0] + wy * y[1] + wall_d
            g1 = wx * yn[0] + wy * yn[1] + wall_d
            if g0 > 0.0 and g1 <= 0.0:
                a = 0.0
                b = hs
                ga = g0
                gb = g1
                side = 0
                found = False
                for it in range(200):
                    if b - a <= 1e-12:
                        break
                    c = (a * gb - b * ga) / (gb - ga)
                    if not (a < c < b):
                        c = 0.5 * (a + b)
                    _step(Cv, Mv, Av, y, c, k1, yc, kc, rtol, atol, 0.0, comp, cc)
                    gc = wx * yc[0] + wy * yc[1] + wall_d
                    if gc > 0.0:
                        a = c
                        ga = gc
                        if side == -1:
                            gb *= 0.5
                        side = -1
                    else:
                        b = c
                        gb = gc
                        found = True
                        for i in range(4):
                            yn[i] = yc[i]
                        if side == 1:
                            ga *= 0.5
                        side = 1
                        if gc == 0.0:
                            break
                if not found:
                    _step(Cv, Mv, Av, y, b, k1, yn, kc, rtol, atol, 0.0, comp, cc)
                t += b
                if cnt >= cap:
                    cap *= 2
                    ts_arr = np.resize(ts_arr, cap)
                    ys_arr = np.resize(ys_arr, (cap, 4))
                    tv = ts_arr
                    yv = ys_arr
                tv[cnt] = t
                for i in range(4):
                    yv[cnt, i] = yn[i]
                cnt += 1
                code = WALL
                break
        t += hs
        for i in range(4):
            y[i] = yn[i]
            k1[i] = k7[i]
            comp[i] = cn[i]
        if record:
            if cnt >= cap:
                cap *= 2
                ts_arr = np.resize(ts_arr, cap)
                ys_arr = np.resize(ys_arr, (cap, 4))
                tv = ts_arr
                yv = ys_arr
            tv[cnt] = t
            for i in range(4):
                yv[cnt, i] = y[i]
            cnt += 1
        if not (isfinite(y[0]) and isfinite(y[1]) and isfinite(y[2]) and isfinite(y[3])):
            code = NONFINITE
            break
        if _mind(Cv, y[0], y[1]) < eps_coll:
            code = COLLISION
            break
        rx = y[0] - ox
        ry = y[1] - oy
        if rx * rx + ry * ry > r_esc * r_esc and rx * y[2] + ry * y[3] > 0.0:
            code = ESCAPED
            break
        if t >= t_max:
            code = TIME_LIMIT
            break
        en = 0.9 * pow(en if en > 1e-10 else 1e-10, -0.2)
        hs *= en if en < 5.0 else 5.0
    if not record and tv[cnt - 1] != t:
        if cnt >= cap:
            cap *= 2
            ts_arr = np.resize(ts_arr, cap)
            ys_arr = np.resize(ys_arr, (cap, 4))
            tv = ts_arr
            yv = ys_arr
        tv[cnt] = t
        for i in range(4):
            yv[cnt, i] = y[i]
        cnt += 1
    return ts_arr[:cnt].copy(), ys_arr[:cnt].copy(), code, n
