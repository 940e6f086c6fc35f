"""Elliptic chart about a designated pair of centres.

With M the midpoint, s the half-separation and R the rotation taking e1 to
(c_i - M)/s, the map q = (xi, eta) -> x = M + s R (cosh xi cos eta, sinh xi sin eta)
covers the plane minus the segment [c_i, c_j] once for xi > 0, eta mod 2 pi.
Pulled back, the JM metric is G(q) |dq|^2 with

    G = 2 s^2 (h + V) A B,   A = cosh xi + cos eta,   B = cosh xi - cos eta,

where |x - c_i| = s B and |x - c_j| = s A. For Newtonian pair centres the terms
m s^2 A B / |x - c| reduce to m s A or m s B, so G is smooth through the
collisions and the K-time flow q'' = grad G / 2 is regular there; physical
time is recovered from dt = s^2 A B dtau.
"""
import math

import numpy as np

from . import _kernels as K
from .errors import ValidationError


def _AB(Q):
    xi, eta = Q[:, 0], Q[:, 1]
    sh2 = 2.0 * np.sinh(0.5 * xi) ** 2
    A = sh2 + 2.0 * np.cos(0.5 * eta) ** 2
    B = sh2 + 2.0 * np.sin(0.5 * eta) ** 2
    return A, B


class PairChart:
    def __init__(self, sys, h, pair=(0, 1)):
        i, j = pair
        ci, cj = sys.centres[i], sys.centres[j]
        d = cj - ci
        self.s = 0.5 * float(math.hypot(d[0], d[1]))
        if self.s == 0:
            raise ValidationError("designated centres coincide")
        self.M = 0.5 * (ci + cj)
        e = (ci - self.M) / self.s
        self.R = np.array([[e[0], -e[1]], [e[1], e[0]]])
        self.h = float(h)
        self.sys = sys
        self.pair = (i, j)
        self.mi, self.ai = float(sys.masses[i]), float(sys.exponents[i])
        self.mj, self.aj = float(sys.masses[j]), float(sys.exponents[j])
        others = [k for k in range(sys.n) if k not in pair]
        self.others = others
        if others:
            self.oC = np.ascontiguousarray(sys.centres[others])
            self.oM = np.ascontiguousarray(sys.masses[others])
            self.oA = np.ascontiguousarray(sys.exponents[others])

    # coordinates
    def to_x(self, Q):
        Q = np.atleast_2d(Q)
        z = np.column_stack([np.cosh(Q[:, 0]) * np.cos(Q[:, 1]),
                             np.sinh(Q[:, 0]) * np.sin(Q[:, 1])])
        return self.M + self.s * z @ self.R.T

    def to_q(self, x, eta_ref=None):
        y = (np.asarray(x, float) - self.M) @ self.R / self.s
        z = np.arccosh(complex(y[0], y[1]))
        xi, eta = z.real, z.imag
        if xi < 0:
            xi, eta = -xi, -eta
        if eta_ref is not None:
            eta = eta_ref + (eta - eta_ref + math.pi) % (2 * math.pi) - math.pi
        return np.array([xi, eta])

    def jac(self, Q):
        """dx/dq, shape (n, 2, 2)."""
        Q = np.atleast_2d(Q)
        a = np.sinh(Q[:, 0]) * np.cos(Q[:, 1])
        b = np.cosh(Q[:, 0]) * np.sin(Q[:, 1])
        J = np.empty((len(Q), 2, 2))
        J[:, 0, 0], J[:, 0, 1], J[:, 1, 0], J[:, 1, 1] = a, -b, b, a
        return self.s * np.einsum("ij,njk->nik", self.R, J)

    def conformal(self, Q):
        """s^2 A B = |dx/dq|^2 per unit |dq|^2."""
        A, B = _AB(np.atleast_2d(Q))
        return self.s ** 2 * A * B

    def pair_distances(self, Q):
        A, B = _AB(np.atleast_2d(Q))
        return self.s * B, self.s * A

    def velocity(self, Q, P):
        """Physical velocity from chart position and K-time momentum."""
        J = self.jac(Q)
        return np.einsum("nij,nj->ni", J, np.atleast_2d(P)) / self.conformal(Q)[:, None]

    def momentum(self, Q, U):
        J = self.jac(Q)
        return np.einsum("nji,nj->ni", J, np.atleast_2d(U))

    # metric factor and derivatives
    @staticmethod
    def _pow1(A, dA, hA, p, need):
        # A^p with derivatives; exact powers keep the collision (A = 0) regular
        if p == 0:
            n = len(A)
            return np.ones_like(A), np.zeros((n, 2)), np.zeros((n, 2, 2))
        if p == 1:
            return A, dA, hA
        f = A ** p
        if need == 0:
            return f, None, None
        g1 = p * A ** (p - 1)
        df = g1[:, None] * dA
        if need == 1:
            return f, df, None
        g2 = p * (p - 1) * A ** (p - 2)
        hf = g2[:, None, None] * np.einsum("ni,nj->nij", dA, dA) + g1[:, None, None] * hA
        return f, df, hf

    def _power(self, A, B, dA, dB, hA, hB, p, r, need):
        # f = A^p B^r with first and second q-derivatives
        fa, da, ha = self._pow1(A, dA, hA, p, need)
        fb, db, hb = self._pow1(B, dB, hB, r, need)
        f = fa * fb
        if need == 0:
            return f, None, None
        df = da * fb[:, None] + fa[:, None] * db
        if need == 1:
            return f, df, None
        hf = (ha * fb[:, None, None] + fa[:, None, None] * hb
              + np.einsum("ni,nj->nij", da, db) + np.einsum("ni,nj->nij", db, da))
        return f, df, hf

    def G(self, Q, need=0):
        """G(q) and, for need >= 1 / 2, its gradient (n,2) and Hessian (n,2,2)."""
        Q = np.atleast_2d(np.asarray(Q, float))
        n = len(Q)
        xi, eta = Q[:, 0], Q[:, 1]
        A, B = _AB(Q)
        sh, ch = np.sinh(xi), np.cosh(xi)
        se, ce = np.sin(eta), np.cos(eta)
        dA = np.column_stack([sh, -se])
        dB = np.column_stack([sh, se])
        hA = np.zeros((n, 2, 2))
        hB = np.zeros((n, 2, 2))
        hA[:, 0, 0], hA[:, 1, 1] = ch, -ce
        hB[:, 0, 0], hB[:, 1, 1] = ch, ce
        s = self.s
        terms = [(self.h * s * s, 1, 1),
                 (self.mi * s ** (2 - self.ai), 1, 1 - self.ai),
                 (self.mj * s ** (2 - self.aj), 1 - self.aj, 1)]
        G = np.zeros(n)
        dG = np.zeros((n, 2)) if need >= 1 else None
        hG = np.zeros((n, 2, 2)) if need >= 2 else None
        for c, p, r in terms:
            f, df, hf = self._power(A, B, dA, dB, hA, hB, p, r, need)
            G += c * f
            if need >= 1:
                dG += c * df
            if need >= 2:
                hG += c * hf
        if self.others:
            X = self.to_x(Q)
            phi = K.potential_many(self.oC, self.oM, self.oA, X)
            P = s * s * A * B
            G += P * phi
            if need >= 1:
                J = self.jac(Q)
                gx = K.gradient_many(self.oC, self.oM, self.oA, X)
                dphi = np.einsum("nji,nj->ni", J, gx)
                dP = s * s * (dA * B[:, None] + A[:, None] * dB)
                dG += dP * phi[:, None] + P[:, None] * dphi
            if need >= 2:
                hx = K.hessian_many(self.oC, self.oM, self.oA, X)
                Hx = np.empty((n, 2, 2))
                Hx[:, 0, 0], Hx[:, 0, 1], Hx[:, 1, 0], Hx[:, 1, 1] = hx[:, 0], hx[:, 1], hx[:, 1], hx[:, 2]
                hphi = np.einsum("nki,nkl,nlj->nij", J, Hx, J)
                # second derivatives of x(q): x_xx = -x_ee = z, x_xe = i z (z = s R cosh q)
                z = np.column_stack([ch * ce, sh * se]) @ self.R.T * s
                iz = np.column_stack([-sh * se, ch * ce]) @ self.R.T * s
                gz = np.einsum("nk,nk->n", gx, z)
                giz = np.einsum("nk,nk->n", gx, iz)
                hphi[:, 0, 0] += gz
                hphi[:, 1, 1] -= gz
                hphi[:, 0, 1] += giz
                hphi[:, 1, 0] += giz
                hP = s * s * (hA * B[:, None, None] + hB * A[:, None, None]
                              + np.einsum("ni,nj->nij", dA, dB) + np.einsum("ni,nj->nij", dB, dA))
                hG += (hP * phi[:, None, None] + np.einsum("ni,nj->nij", dP, dphi)
                       + np.einsum("ni,nj->nij", dphi, dP) + P[:, None, None] * hphi)
        G *= 2.0
        if need >= 1:
            dG *= 2.0
        if need >= 2:
            hG *= 2.0
        return G, dG, hG
