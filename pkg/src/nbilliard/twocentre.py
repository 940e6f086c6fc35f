"""Integrable structure of the Newtonian two-centre problem.

Normalized frame: c1 = e1 = (1, 0) carries m1, c2 = -e1 carries m2, m1 >= m2
(a system given with m1 < m2 is rotated by pi, see ``TwoCentreParams.flipped``).
Elliptic coordinates x = (cosh xi cos eta, sinh xi sin eta) give

    |x - e1| = cosh xi - cos eta,   |x + e1| = cosh xi + cos eta,

and at energy h the flow is a time change (dt = (cosh^2 xi - cos^2 eta) dtau)
of the zero level of K = K1(xi, p_xi) + K2(eta, p_eta) with

    K1 = p_xi^2/2 - (mu1 + h cosh xi) cosh xi
    K2 = p_eta^2/2 - (mu2 - h cos eta) cos eta,     mu1 = m1 + m2, mu2 = m1 - m2.

Closed-form separatrix solutions are only trusted after they have been checked
against direct integration of the separated flows for the given parameters.
"""
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .errors import (DegenerateCoordinates, DomainError, EnergyMismatch,
                     InvalidWall, NotFound, ValidationError)
from .potential import CentreSystem, Wall
from .specfun import amplitude, elliptic_F

E1 = np.array([1.0, 0.0])


@dataclass(frozen=True)
class TwoCentreParams:
    m1: float
    m2: float
    h: float
    flipped: bool = field(default=False)

    def __post_init__(self):
        if not (self.m1 > 0 and self.m2 > 0 and self.h > 0):
            raise ValidationError("masses and energy must be positive")
        if self.m1 < self.m2:
            m1, m2 = self.m2, self.m1
            object.__setattr__(self, "m1", float(m1))
            object.__setattr__(self, "m2", float(m2))
            object.__setattr__(self, "flipped", not self.flipped)
        object.__setattr__(self, "m1", float(self.m1))
        object.__setattr__(self, "m2", float(self.m2))
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def from_system(cls, sys, h, tol=1e-12):
        """Parameters of a CentreSystem already placed at (+-1, 0)."""
        c = sys.centres
        if sys.n != 2 or np.any(np.abs(sys.exponents - 1) > 0):
            raise ValidationError("two Newtonian centres required")
        if np.allclose(c, [[1, 0], [-1, 0]], atol=tol):
            return cls(sys.masses[0], sys.masses[1], h)
        if np.allclose(c, [[-1, 0], [1, 0]], atol=tol):
            return cls(sys.masses[1], sys.masses[0], h)
        raise ValidationError("centres must be normalized to (1,0) and (-1,0)")

    @property
    def mu1(self):
        return self.m1 + self.m2

    @property
    def mu2(self):
        return self.m1 - self.m2

    @property
    def mb1(self):
        return self.mu1 / self.h

    @property
    def mb2(self):
        return self.mu2 / self.h

    @property
    def Delta(self):
        return 4.0 + 4.0 * self.mb1 + self.mb2 ** 2

    def system(self):
        """CentreSystem in the user frame."""
        if self.flipped:
            return CentreSystem([[1.0, 0.0], [-1.0, 0.0]], [self.m2, self.m1], [1.0, 1.0])
        return CentreSystem([[1.0, 0.0], [-1.0, 0.0]], [self.m1, self.m2], [1.0, 1.0])

    def to_frame(self, x):
        x = np.asarray(x, dtype=float)
        return -x if self.flipped else x

    from_frame = to_frame

    def wall_to_frame(self, wall):
        if not self.flipped:
            return wall
        return Wall((-wall.v[0], -wall.v[1]), wall.d)


# --- coordinates -----------------------------------------------------------

def to_elliptic(x, tol=1e-14):
    """(xi, eta) with xi >= 0, eta in (-pi, pi]."""
    x = np.asarray(x, dtype=float)
    if abs(x[1]) <= tol and abs(x[0]) <= 1.0:
        raise DegenerateCoordinates("point on the collision segment [-e1, e1]")
    z = np.arccosh(complex(x[0], x[1]))
    xi, eta = z.real, z.imag
    if xi < 0:
        xi, eta = -xi, -eta
    return float(xi), float(eta)


def from_elliptic(xi, eta):
    return np.array([np.cosh(xi) * np.cos(eta), np.sinh(xi) * np.sin(eta)])


def ellipse_f(x):
    x = np.asarray(x, dtype=float)
    return float(math.hypot(x[0] - 1.0, x[1]) + math.hypot(x[0] + 1.0, x[1]) - 2.0)


def _jac(xi, eta):
    return np.array([[np.sinh(xi) * np.cos(eta), -np.cosh(xi) * np.sin(eta)],
                     [np.cosh(xi) * np.sin(eta), np.sinh(xi) * np.cos(eta)]])


@dataclass(frozen=True)
class EllipticState:
    xi: float
    eta: float
    p_xi: float
    p_eta: float

    @classmethod
    def from_cartesian(cls, x, u):
        xi, eta = to_elliptic(x)
        p = _jac(xi, eta).T @ np.asarray(u, dtype=float)
        return cls(xi, eta, float(p[0]), float(p[1]))

    def to_cartesian(self):
        J = _jac(self.xi, self.eta)
        D = math.cosh(self.xi) ** 2 - math.cos(self.eta) ** 2
        return from_elliptic(self.xi, self.eta), J @ np.array([self.p_xi, self.p_eta]) / D


def separated_K(state, params):
    c, ce = math.cosh(state.xi), math.cos(state.eta)
    K1 = 0.5 * state.p_xi ** 2 - (params.mu1 + params.h * c) * c
    K2 = 0.5 * state.p_eta ** 2 - (params.mu2 - params.h * ce) * ce
    return K1, K2


def conserved_I(state, params, tol=1e-10, surface_tol=1e-8):
    """I in its xi-form; on the K = 0 surface the eta-form is checked against it."""
    c, ce = math.cosh(state.xi), math.cos(state.eta)
    i_xi = 0.5 * state.p_xi ** 2 - params.mu1 * c - params.h * c * c
    i_eta = -0.5 * state.p_eta ** 2 + params.mu2 * ce - params.h * ce * ce
    scale = max(1.0, abs(i_xi), params.mu1 * c + params.h * c * c)
    K = i_xi - i_eta
    if abs(K) <= surface_tol * scale and abs(i_xi - i_eta) > tol * scale:
        raise EnergyMismatch(f"xi- and eta-forms of I differ by {i_xi - i_eta:g}")
    return i_xi


def critical_points_K2(params, n_periods=1):
    """Critical points of K2 in [0, 2 pi n): saddles at multiples of pi, minima at
    cos(eta) = mu2/(2h) when that lies in (-1, 1)."""
    pts = {"saddle": [], "minimum": []}
    for k in range(2 * n_periods):
        pts["saddle"].append(k * math.pi)
    q = params.mu2 / (2.0 * params.h)
    if abs(q) < 1.0:
        ch = math.acos(q)
        for k in range(n_periods):
            pts["minimum"].extend([ch + 2 * math.pi * k, 2 * math.pi * (k + 1) - ch])
    return {k: sorted(v) for k, v in pts.items()}


# --- separatrix closed forms -----------------------------------------------

def _a(p):
    return 2.0 + p.mb1


def _sigma_of_xi(xi, p):
    c = np.cosh(xi)
    z2 = _a(p) * (1.0 + c) / (2.0 * (1.0 + p.mb1 + c))
    return np.arctanh(1.0 / np.sqrt(z2))


def _xi_of_sigma(sigma, p):
    a = _a(p)
    q = p.mb1 * np.cosh(sigma) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        c = (q + a) / (q - a)
        out = np.arccosh(c)
    # cosh is even: only sigma > sigma_min > 0 lies on the branch
    return np.where((q > a) & (np.asarray(sigma) > 0), out, np.nan)


def _sigma_min(p):
    return math.atanh(math.sqrt(2.0 / _a(p)))


def _xi_derived(tau, xi0, p):
    sig = _sigma_of_xi(xi0, p) + math.sqrt(_a(p) * p.h) * np.asarray(tau, dtype=float)
    return _xi_of_sigma(sig, p)


def _xi_printed(tau, xi0, p):
    a = _a(p)
    c0 = math.cosh(xi0)
    z0 = math.sqrt(a * (1.0 + c0) / (2.0 * (1.0 + p.mb1 + c0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        sig = math.sqrt(a * p.h) * np.asarray(tau, dtype=float) - np.arctanh(z0)
        arg = (p.mb1 * np.cosh(sig) ** 2 + 2.0) / a
        return np.arccosh(1.0 / arg)


def _eta_consts(p):
    sD = math.sqrt(p.Delta)
    r1 = 0.5 * (p.mb2 + sD)
    r2 = 0.5 * (p.mb2 - sD)
    BC = 2.0 + p.mb1 + sD
    k = math.sqrt(2.0 * sD / BC)
    if k > 1.0 + 1e-14:
        raise DomainError(f"elliptic modulus {k} exceeds 1")
    k = min(k, 1.0)
    ratio = math.sqrt((r1 - 1.0) / (r1 + 1.0))  # tan(eta/2) = ratio * tan(phi)
    return k, ratio, math.sqrt(BC * p.h / 2.0)


def _lift(base, ref):
    return base + 2.0 * math.pi * round((ref - base) / (2.0 * math.pi))


def _phi_of_eta(eta, ratio):
    half = 0.5 * eta
    return _lift(math.atan2(math.sin(half), ratio * math.cos(half)), half)


def _eta_of_phi(phi, ratio):
    return 2.0 * _lift(math.atan2(ratio * math.sin(phi), math.cos(phi)), phi)


def _eta_derived(tau, eta0, p, direction=1):
    k, ratio, rate = _eta_consts(p)
    u0 = elliptic_F(_phi_of_eta(eta0, ratio), k)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.array([_eta_of_phi(amplitude(u0 + direction * rate * t, k), ratio) for t in tau])
    return out


def _eta_printed(tau, eta0, p, direction=1):
    # printed form, written for the centre labelling with cos(eta) -> -cos(eta);
    # converted here by eta -> eta + pi
    from .specfun import jacobi
    sD = math.sqrt(p.Delta)
    k = math.sqrt(2.0 * sD / (2.0 + p.mb1 + sD))
    s = math.sqrt(2.0 + p.mb1 - sD)
    e0 = eta0 - math.pi
    w0 = elliptic_F(math.atan(math.tan(0.5 * e0) / s), k)
    rate = math.sqrt((2.0 + p.mb1 + sD) * p.h / 2.0)
    out = []
    for t in np.atleast_1d(tau):
        om = direction * rate * t - w0
        try:
            tn = jacobi(om, k)[3]
        except Exception:
            out.append(np.nan)
            continue
        out.append(2.0 * math.atan(s * tn) + math.pi)
    return np.array(out)


_XI_FORMS = {"printed": _xi_printed, "derived": _xi_derived}
_ETA_FORMS = {"printed": _eta_printed, "derived": _eta_derived}


def _xi_oracle(tau_grid, xi0, p):
    def rhs(t, y):
        return [y[1], p.mu1 * math.sinh(y[0]) + 2.0 * p.h * math.cosh(y[0]) * math.sinh(y[0])]
    c0 = math.cosh(xi0)
    p0 = -math.sqrt(2.0 * (p.mu1 * c0 + p.h * c0 * c0 - p.mu1 - p.h))
    sol = solve_ivp(rhs, (0.0, tau_grid[-1]), [xi0, p0], method="DOP853",
                    t_eval=tau_grid, rtol=1e-13, atol=1e-14)
    return sol.y[0]


def _eta_oracle(tau_grid, eta0, p, direction=1):
    def rhs(t, y):
        s, c = math.sin(y[0]), math.cos(y[0])
        return [y[1], -p.mu2 * s + 2.0 * p.h * c * s]
    ce = math.cos(eta0)
    p0 = direction * math.sqrt(2.0 * (p.mu1 + p.h + p.mu2 * ce - p.h * ce * ce))
    sol = solve_ivp(rhs, (0.0, tau_grid[-1]), [eta0, p0], method="DOP853",
                    t_eval=tau_grid, rtol=1e-13, atol=1e-14)
    return sol.y[0]


def oracle_span(p):
    """K-time spans used to check the closed forms: ~12 e-folds for xi,
    ~10 revolutions for eta."""
    lam = math.sqrt(_a(p) * p.h)
    k, _, rate = _eta_consts(p)
    from .specfun import complete_K
    period = 4.0 * complete_K(k) / rate
    return 12.0 / lam, 10.0 * period


@functools.lru_cache(maxsize=64)
def closed_form_report(p, tol=1e-6):
    """Check every candidate closed form against the separated ODE flows.

    Returns {"xi": (chosen, {name: max_err}), "eta": (chosen, {...})}.
    """
    span_xi, span_eta = oracle_span(p)
    report = {}
    grid = np.linspace(0.0, span_xi, 400)
    ref = _xi_oracle(grid, 1.0, p)
    errs = {}
    for name, f in _XI_FORMS.items():
        v = f(grid, 1.0, p)
        errs[name] = float(np.max(np.abs(v - ref))) if np.all(np.isfinite(v)) else math.inf
    report["xi"] = (next((n for n, e in errs.items() if e <= tol), None), errs)
    grid = np.linspace(0.0, span_eta, 400)
    errs = {}
    for name, f in _ETA_FORMS.items():
        e = 0.0
        for eta0, dr in ((0.3, 1), (2.0, -1)):
            v = f(grid, eta0, p, dr)
            refe = _eta_oracle(grid, eta0, p, dr)
            e = max(e, float(np.max(np.abs(v - refe))) if np.all(np.isfinite(v)) else math.inf)
        errs[name] = e
    report["eta"] = (next((n for n, e in errs.items() if e <= tol), None), errs)
    return report


def _verified(p, which):
    name = closed_form_report(p)[which][0]
    if name is None:
        raise DomainError(f"no closed form for {which} agrees with the ODE oracle")
    return (_XI_FORMS if which == "xi" else _ETA_FORMS)[name]


def separatrix_xi(t, xi0, params):
    """xi(tau) on the decreasing separatrix branch K1 = -(mu1 + h), xi(0) = xi0."""
    if not xi0 > 0:
        raise DomainError("xi0 must be positive")
    out = _verified(params, "xi")(t, xi0, params)
    if np.any(~np.isfinite(out)):
        raise DomainError("K-time outside the domain of the separatrix (xi -> infinity)")
    return out


def separatrix_eta(t, eta0, params, direction=1):
    """eta(tau) at eta-energy mu1 + h, eta(0) = eta0, increasing for direction=+1."""
    return _verified(params, "eta")(t, eta0, params, direction)


# --- spirals ---------------------------------------------------------------

XI_REF = 1.0  # K-time origin: tau = 0 where xi = XI_REF


class SpiralSolution:
    """Separatrix solution s_{sign}(., theta0) asymptotic to [-e1, e1].

    Parametrized by K-time tau in (tau_min, inf); xi -> inf as tau -> tau_min
    with direction angle -> theta0, and xi -> 0 as tau -> inf. ``sign`` = +1 winds
    counter-clockwise (eta increasing). Points are in the normalized frame;
    ``__call__`` takes physical time (t = 0 at tau = 0) and returns user-frame points.
    """

    def __init__(self, params, theta0, sign):
        if sign not in (1, -1):
            raise ValidationError("sign must be +1 or -1")
        _verified(params, "xi")
        _verified(params, "eta")
        self.params = params
        self.theta0 = float(theta0)
        self.sign = sign
        p = params
        self._lam = math.sqrt(_a(p) * p.h)
        self._sig_ref = float(_sigma_of_xi(XI_REF, p))
        self.tau_min = (_sigma_min(p) - self._sig_ref) / self._lam
        self._k, self._ratio, self._rate = _eta_consts(p)
        self._u_min = elliptic_F(_phi_of_eta(self.theta0, self._ratio), self._k)
        self._fwd = None
        self._bwd = None

    # K-time evaluation
    def xi(self, tau):
        return _xi_of_sigma(self._sig_ref + self._lam * np.asarray(tau, dtype=float), self.params)

    def eta(self, tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        u = self._u_min + self.sign * self._rate * (tau - self.tau_min)
        return np.array([_eta_of_phi(amplitude(x, self._k), self._ratio) for x in u])

    def point_tau(self, tau):
        """Normalized-frame points, shape (n, 2)."""
        xi = np.atleast_1d(self.xi(tau))
        eta = self.eta(tau)
        return np.column_stack([np.cosh(xi) * np.cos(eta), np.sinh(xi) * np.sin(eta)])

    def velocity_tau(self, tau):
        """Physical velocity (normalized frame) at K-time tau."""
        p = self.params
        xi = np.atleast_1d(self.xi(tau))
        eta = self.eta(tau)
        c, ce = np.cosh(xi), np.cos(eta)
        dxi = -np.sqrt(np.maximum(0.0, 2.0 * p.h * (c - 1.0) * (c + 1.0 + p.mb1)))
        deta = self.sign * np.sqrt(2.0 * (p.mu1 + p.h + p.mu2 * ce - p.h * ce * ce))
        D = c * c - ce * ce
        sx, cx = np.sinh(xi), c
        se = np.sin(eta)
        vx = (sx * ce * dxi - cx * se * deta) / D
        vy = (cx * se * dxi + sx * ce * deta) / D
        return np.column_stack([vx, vy])

    def _D(self, tau):
        xi = self.xi(tau)
        eta = self.eta(tau)
        return np.cosh(xi) ** 2 - np.cos(eta) ** 2

    # physical time
    def _build_fwd(self, tau_hi):
        f = lambda s, y: [float(self._D(s)[0])]  # noqa: E731
        self._fwd = (tau_hi, solve_ivp(f, (0.0, tau_hi), [0.0], method="DOP853",
                                       dense_output=True, rtol=1e-12, atol=1e-12))

    def _build_bwd(self, q_hi):
        # tau = tau_min + exp(-q), q0 <-> tau = 0; t -> -inf as q -> inf
        q0 = -math.log(-self.tau_min)

        def f(q, y):
            dt = math.exp(-q)
            return [-float(self._D(self.tau_min + dt)[0]) * dt]
        self._bwd = (q_hi, q0, solve_ivp(f, (q0, q_hi), [0.0], method="DOP853",
                                         dense_output=True, rtol=1e-12, atol=1e-12))

    def time_of_tau(self, tau):
        tau = float(tau)
        if tau >= 0:
            if self._fwd is None or self._fwd[0] < tau:
                self._build_fwd(max(2.0 * tau, 1.0))
            return float(self._fwd[1].sol(tau)[0])
        if tau <= self.tau_min:
            raise DomainError("K-time before the asymptotic start of the spiral")
        q = -math.log(tau - self.tau_min)
        if self._bwd is None or self._bwd[0] < q:
            self._build_bwd(max(q + 1.0, 5.0))
        return float(self._bwd[2].sol(q)[0])

    def tau_of_time(self, t):
        t = float(t)
        if t >= 0:
            hi = 1.0
            while self.time_of_tau(hi) < t:
                hi *= 2.0
            return brentq(lambda s: self.time_of_tau(s) - t, 0.0, hi, xtol=1e-14, rtol=1e-15)
        q0 = -math.log(-self.tau_min)
        q = q0 + 1.0
        while self.time_of_tau(self.tau_min + math.exp(-q)) > t:
            q += 2.0
        qs = brentq(lambda qq: self.time_of_tau(self.tau_min + math.exp(-qq)) - t, q0, q,
                    xtol=1e-14, rtol=1e-15)
        return self.tau_min + math.exp(-qs)

    def __call__(self, t):
        """User-frame point at physical time t."""
        return self.params.from_frame(self.point_tau(self.tau_of_time(t))[0])

    def velocity(self, t):
        return self.params.from_frame(self.velocity_tau(self.tau_of_time(t))[0])

    def tau_of_f(self, fval):
        """K-time at which ellipse_f along the spiral equals fval (> 0)."""
        p = self.params
        c = 1.0 + 0.25 * fval
        ch2 = _a(p) * (c + 1.0) / (p.mb1 * (c - 1.0))
        sig = math.acosh(math.sqrt(ch2))
        return (sig - self._sig_ref) / self._lam


def spiral(t, theta0, sign, params):
    return SpiralSolution(params, theta0, sign)(t)


def spiral_through(x, sign, params):
    """(tau_x, SpiralSolution) of the unique separatrix spiral through user-frame x."""
    xn = params.to_frame(x)
    xi, eta = to_elliptic(xn)
    p = params
    lam = math.sqrt(_a(p) * p.h)
    tau = float((_sigma_of_xi(xi, p) - _sigma_of_xi(XI_REF, p)) / lam)
    k, ratio, rate = _eta_consts(p)
    tau_min = (_sigma_min(p) - float(_sigma_of_xi(XI_REF, p))) / lam
    u_x = elliptic_F(_phi_of_eta(eta, ratio), k)
    u_min = u_x - sign * rate * (tau - tau_min)
    theta0 = _eta_of_phi(amplitude(u_min, k), ratio)
    return tau, SpiralSolution(p, theta0, sign)


def _check_wall(wall, params):
    wn = params.wall_to_frame(wall)
    h1, h2 = wn.height(E1), wn.height(-E1)
    if h1 * h2 <= 0:
        raise InvalidWall("wall meets the segment [-e1, e1]")
    if h1 < 0:
        raise InvalidWall("centres lie outside the wall's half-plane")
    return wn


def _direction_residual(s, wn, sign, p):
    x = wn.point(s)
    xi, eta = to_elliptic(x)
    c, ce = math.cosh(xi), math.cos(eta)
    dxi = -math.sqrt(max(0.0, 2.0 * p.h * (c - 1.0) * (c + 1.0 + p.mb1)))
    deta = sign * math.sqrt(2.0 * (p.mu1 + p.h + p.mu2 * ce - p.h * ce * ce))
    d = _jac(xi, eta) @ np.array([dxi, deta])
    d /= np.linalg.norm(d)
    return float(d @ wn.v), float(d @ wn.w)


@dataclass
class OrthogonalSpiral:
    t0: float
    theta0: float
    spiral: SpiralSolution
    s: float  # wall coordinate (normalized frame) of the foot point
    tau0: float
    residual: float
    roots: list


def spiral_orthogonal_to_wall(wall, sign, params, span=None, n_scan=4001):
    """Unique spiral leaving the wall orthogonally towards the centres."""
    wn = _check_wall(wall, params)
    p = params
    span = span if span is not None else 40.0 * (1.0 + wn.d)
    s0 = wn.coord(np.zeros(2))
    grid = s0 + np.linspace(-span, span, n_scan)
    vals = np.array([_direction_residual(s, wn, sign, p)[0] for s in grid])
    roots = []
    for j in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
        r = brentq(lambda s: _direction_residual(s, wn, sign, p)[0], grid[j], grid[j + 1],
                   xtol=1e-14, rtol=1e-15)
        if _direction_residual(r, wn, sign, p)[1] > 0:
            roots.append(r)
    if not roots:
        raise NotFound("no wall point where the spiral is orthogonal to the wall")
    s = roots[0]
    res = abs(_direction_residual(s, wn, sign, p)[0])
    tau0, sp = spiral_through(p.from_frame(wn.point(s)), sign, p)
    return OrthogonalSpiral(sp.time_of_tau(tau0), sp.theta0, sp, s, tau0, res, roots)


def wall_f_min(wn):
    """Minimum of ellipse_f on the (normalized-frame) wall line."""
    s0 = wn.coord(np.zeros(2))
    r = minimize_scalar(lambda s: ellipse_f(wn.point(s)), bracket=(s0 - 1.0, s0 + 1.0),
                        tol=1e-12)
    return float(r.fun)


@dataclass
class AdmissibilityReport:
    admissible: bool
    margin: float
    margins: dict
    tail_gap: float
    f_min: float
    feet: dict


def _ellipse_wall_gap(wn, fval):
    # distance from the ellipse {f = fval} (semi-axes A, B) to the line
    A = 1.0 + 0.5 * fval
    B = math.sqrt(A * A - 1.0)
    reach = math.hypot(A * wn.w[0], B * wn.w[1])
    return wn.d - reach


def is_admissible(wall, params, samples_per_turn=400):
    """Both wall-orthogonal spirals stay strictly inside the half-plane for t > 0.

    Finite sampling up to the K-time where ellipse_f drops to half its minimum on
    the wall; beyond that ellipse_f keeps decreasing, so the spiral stays inside
    an ellipse whose distance to the wall is ``tail_gap``.
    """
    wn = _check_wall(wall, params)
    fmin = wall_f_min(wn)
    tail_gap = _ellipse_wall_gap(wn, 0.5 * fmin)
    margins, feet = {}, {}
    for sign in (1, -1):
        o = spiral_orthogonal_to_wall(wall, sign, params)
        sp = o.spiral
        tau_end = max(sp.tau_of_f(0.5 * fmin), o.tau0 + 1e-6)
        turns = abs(float(sp.eta(tau_end)[0] - sp.eta(o.tau0)[0])) / (2 * math.pi)
        n = int(max(2000, samples_per_turn * (turns + 1)))
        taus = np.linspace(o.tau0, tau_end, n)
        hts = wn.height(sp.point_tau(taus))
        # skip the initial climb away from the wall
        inc = np.nonzero(np.diff(hts) < 0)[0]
        if len(inc) == 0:
            m = float(hts[-1])
        else:
            start = inc[0]
            j = start + int(np.argmin(hts[start:]))
            m = float(hts[j])
            if 0 < j < n - 1:
                r = minimize_scalar(lambda s: float(wn.height(sp.point_tau(s)[0])),
                                    bounds=(taus[j - 1], taus[j + 1]), method="bounded",
                                    options={"xatol": 1e-12})
                m = min(m, float(r.fun))
        margins[sign] = m
        feet[sign] = o
    margin = min(min(margins.values()), tail_gap)
    return AdmissibilityReport(margin > 0, margin, margins, tail_gap, fmin, feet)


def heteroclinic_distance(sys, h, wall, x, y, k_list, T=None, opts=None):
    """Sup-distance on [0, T] between minimizers gamma_k^{x,y} and the spiral
    through x winding in the direction of k. x, y are wall coordinates."""
    from .variational import MinimizerOptions, minimize_arc
    opts = opts or MinimizerOptions()
    params = TwoCentreParams.from_system(sys, h)
    arcs = {k: minimize_arc(sys, h, wall, x, y, k, opts) for k in k_list}
    if T is None:
        T = 0.5 * min(a.times[-1] for a in arcs.values())
    rows = []
    xp = wall.point(x)
    ts = np.linspace(0.0, T, 201)
    for k in k_list:
        arc = arcs[k]
        tau_x, sp = spiral_through(xp, 1 if k > 0 else -1, params)
        t_x = sp.time_of_tau(tau_x)
        spts = np.array([sp(t_x + t) for t in ts])
        apts = arc.sample(ts)
        rows.append((k, float(np.max(np.hypot(*(spts - apts).T))), arc))
    return {"T": T, "rows": [(k, d) for k, d, _ in rows], "arcs": [a for _, _, a in rows]}
