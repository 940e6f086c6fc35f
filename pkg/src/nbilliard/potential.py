"""n-centre potential, Jacobi-Maupertuis geometry and escape diagnostics.

Sign convention, fixed for the whole package::

    V(x) = sum_i m_i |x - c_i|^(-a_i) > 0
    H(u, x) = |u|^2 / 2 - V(x)
    x'' = +grad V(x)

so the JM conformal factor at energy h > 0 is 2(h + V).
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import CollisionPoint, DegenerateFoot, NotFound, ValidationError

EPS_COLL = 1e-12
EPS_GEOM = 1e-9


@dataclass(frozen=True, eq=False)
class CentreSystem:
    """Centres c_i with masses m_i > 0 and exponents a_i >= 1.

    Duplicate centre positions are allowed.
    """

    centres: np.ndarray
    masses: np.ndarray
    exponents: np.ndarray
    eps_coll: float = EPS_COLL

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.centres, dtype=float).reshape(-1, 2))
        m = np.ascontiguousarray(np.asarray(self.masses, dtype=float).ravel())
        a = np.ascontiguousarray(np.asarray(self.exponents, dtype=float).ravel())
        if len(c) == 0 or not (len(c) == len(m) == len(a)):
            raise ValidationError("centres, masses and exponents need equal nonzero length")
        if np.any(m <= 0):
            raise ValidationError("masses must be positive")
        if np.any(a < 1):
            raise ValidationError("exponents must be >= 1")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(m)) and np.all(np.isfinite(a))):
            raise ValidationError("non-finite system data")
        for arr in (c, m, a):
            arr.flags.writeable = False
        object.__setattr__(self, "centres", c)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "exponents", a)

    @classmethod
    def symmetric_pair(cls, m=1.0, alpha=1.0):
        return cls([[1.0, 0.0], [-1.0, 0.0]], [m, m], [alpha, alpha])

    @property
    def n(self):
        return len(self.masses)

    @property
    def kargs(self):
        return self.centres, self.masses, self.exponents

    @property
    def barycentre(self):
        # unweighted centroid of the centre positions
        return self.centres.mean(axis=0)

    def check_point(self, x, eps=None):
        eps = self.eps_coll if eps is None else eps
        d = np.hypot(self.centres[:, 0] - x[0], self.centres[:, 1] - x[1]).min()
        if not d >= eps:
            raise CollisionPoint(f"point {tuple(x)} within {eps:g} of a centre")

    def __repr__(self):
        return (f"CentreSystem(centres={self.centres.tolist()}, "
                f"masses={self.masses.tolist()}, exponents={self.exponents.tolist()})")


@dataclass(frozen=True)
class Wall:
    """The line {s v - d w} with w = v rotated by +90 degrees.

    The admissible half-plane is <w, x> >= -d.
    """

    v: tuple
    d: float
    w: tuple = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        nv = math.hypot(v[0], v[1])
        if not nv > 0:
            raise ValidationError("wall direction must be nonzero")
        v = v / nv
        if not self.d > 0:
            raise ValidationError("wall distance d must be positive")
        object.__setattr__(self, "v", (float(v[0]), float(v[1])))
        object.__setattr__(self, "w", (-float(v[1]), float(v[0])))
        object.__setattr__(self, "d", float(self.d))

    @classmethod
    def from_angle(cls, angle, d):
        return cls((math.cos(angle), math.sin(angle)), d)

    @property
    def angle(self):
        return math.atan2(self.v[1], self.v[0])

    @property
    def foot(self):
        return np.array([-self.d * self.w[0], -self.d * self.w[1]])

    def point(self, s):
        return np.array([s * self.v[0] - self.d * self.w[0],
                         s * self.v[1] - self.d * self.w[1]])

    def coord(self, x):
        return x[0] * self.v[0] + x[1] * self.v[1]

    def height(self, x):
        """Signed distance <w, x> + d from the wall; positive inside."""
        x = np.asarray(x, dtype=float)
        return x[..., 0] * self.w[0] + x[..., 1] * self.w[1] + self.d

    def velocity(self, angle, speed):
        """Velocity cos(angle) v + sin(angle) w scaled to ``speed``."""
        c, s = math.cos(angle), math.sin(angle)
        return np.array([speed * (c * self.v[0] + s * self.w[0]),
                         speed * (c * self.v[1] + s * self.w[1])])

    def angle_of(self, u):
        return math.atan2(u[0] * self.w[0] + u[1] * self.w[1],
                          u[0] * self.v[0] + u[1] * self.v[1])

    def validate(self, sys):
        """Raise unless every centre lies strictly inside the half-plane."""
        hts = self.height(sys.centres)
        if np.any(hts <= 0):
            raise ValidationError(
                "a centre lies outside the open half-plane <w,x> > -d of the wall "
                f"(heights {hts.tolist()})")
        return self


@dataclass(frozen=True)
class EnergyLevel:
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValidationError("energy must be positive")


def _xy(x):
    return float(x[0]), float(x[1])


def eval_potential(sys, x):
    sys.check_point(x)
    return K.potential(*sys.kargs, *_xy(x))


def eval_gradient(sys, x):
    sys.check_point(x)
    return np.array(K.gradient(*sys.kargs, *_xy(x)))


def eval_laplacian(sys, x):
    sys.check_point(x)
    return K.laplacian(*sys.kargs, *_xy(x))


def eval_hessian(sys, x):
    sys.check_point(x)
    a, b, c = K.hessian(*sys.kargs, *_xy(x))
    return np.array([[a, b], [b, c]])


def jm_factor(sys, h, x):
    return 2.0 * h + 2.0 * eval_potential(sys, x)


def jm_curvature(sys, h, x):
    """Gaussian curvature of 2(h+V)|dx|^2 via K = -lap(phi)/g, phi = log(g)/2."""
    g = jm_factor(sys, h, x)
    lap = eval_laplacian(sys, x)
    gv = eval_gradient(sys, x)
    return -lap / g ** 2 + 2.0 * float(gv @ gv) / g ** 3


def wall_curvature(sys, h, wall, t):
    x = wall.point(t)
    g = jm_factor(sys, h, x)
    gv = eval_gradient(sys, x)
    return -(gv[0] * wall.w[0] + gv[1] * wall.w[1]) / g ** 1.5


def lagrange_jacobi(sys, h, x):
    """h + V + <grad V, x - b>/2 with b the barycentre of the centres."""
    x = np.asarray(x, dtype=float)
    gv = eval_gradient(sys, x)
    return h + eval_potential(sys, x) + 0.5 * float(gv @ (x - sys.barycentre))


def convexity_radius(sys, h, n_angles=720, radius_cap=1e6):
    """Radius R0 about the barycentre outside which lagrange_jacobi > 0."""
    rel = sys.centres - sys.barycentre
    norms = np.hypot(rel[:, 0], rel[:, 1])
    a = sys.exponents
    if np.all(a < 2):
        return float(np.max(2.0 * norms / (2.0 - a)))
    b = sys.barycentre
    C, M, A = sys.kargs
    scale = max(float(norms.max()), 1.0)
    radii = np.geomspace(1e-6 * scale, radius_cap, 4000)
    th = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)

    def lj(pts):
        gv = K.gradient_many(C, M, A, pts)
        return h + K.potential_many(C, M, A, pts) + 0.5 * np.einsum("ij,ij->i", gv, pts - b)

    worst = 0.0
    for t in th:
        d = np.array([math.cos(t), math.sin(t)])
        pts = b + radii[:, None] * d
        vals = lj(pts)
        bad = np.nonzero(~(vals > 0))[0]
        if len(bad) == 0:
            continue
        j = bad[-1]
        if j == len(radii) - 1:
            raise NotFound("Lagrange-Jacobi quantity not positive below the radius cap")
        lo, hi = radii[j], radii[j + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if lj((b + mid * d)[None, :])[0] > 0:
                hi = mid
            else:
                lo = mid
        worst = max(worst, hi)
    return float(worst * (1 + 1e-9))


def escape_cone(wall, x, origin=(0.0, 0.0), eps_geom=EPS_GEOM):
    """Directions at wall point x whose orbits move towards the origin.

    Angles are measured from v (u = cos(t) v + sin(t) w, inward for t in (0, pi)).
    The returned open interval (lo, hi) is the set with <x - origin, u> < 0; its
    complement in (0, pi) are the directions moving away from ``origin``, which
    escape once the wall lies outside the convexity radius.
    """
    o = np.asarray(origin, dtype=float)
    x = np.asarray(x, dtype=float)
    x0 = wall.point(wall.coord(o))
    s = wall.coord(x - x0)
    if abs(s) < eps_geom:
        raise DegenerateFoot("cone undefined at the projection of the origin")
    rho = np.linalg.norm(x0 - o) / np.linalg.norm(x - o)
    # the boundary direction is orthogonal to x - origin
    a = math.acos(min(1.0, rho))
    if s <= 0:
        return 0.0, math.pi - a
    return a, math.pi
