"""Jacobi-Maupertuis length minimizers in prescribed winding classes.

Paths are represented in the elliptic chart of the designated pair of centres
(see ``chart``), where the JM metric is G(q)|dq|^2 with G smooth through the
pair's collisions. This matters: minimizers winding k times approach the
collision segment roughly geometrically in k, far below what Cartesian
polylines can resolve. The class C_k is the lift of eta: an arc from wall point
x to wall point y winds k times when it ends at eta_wall(y) + 2 pi k.

Each arc contributes the discrete energy E = N sum_j G(m_j)|q_{j+1} - q_j|^2
(m_j the chart midpoints). Its minimizers equidistribute JM length and have
E = L^2, so sum_a sqrt(E_a) is the total discrete JM length at stationary points
and no separate node redistribution is needed. A damped Newton iteration (sparse
banded Hessian plus a low-rank correction) rejects every trial step that leaves
the chart (xi <= 0, i.e. crosses the collision segment) or changes the winding
about the remaining centres.

Converged polylines are polished as a boundary-value problem for the regular
K-time flow q' = p, p' = grad G / 2 with |p|^2 = G on the energy shell.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_bvp, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu

from . import _kernels as K
from .chart import PairChart
from .dynamics import (IntegratorOptions, WindingWord, generator_word,
                       ray_crossings, reduce_word)
from .errors import (AmbiguousClass, BilliardError, ClassCollapse, CollisionPoint,
                     NoConvergence, NotFound, ValidationError, WallTooClose)
from .potential import CentreSystem, Wall, convexity_radius, escape_cone

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MinimizerOptions:
    nodes_per_turn: int = 64
    min_nodes: int = 128
    seed_radius: float = 1.5  # in units of |c1 - c2|
    gtol: float = 1e-8
    max_iter: int = 600
    eps_coll: float = 1e-6  # distance to non-designated centres
    pair: tuple = (0, 1)
    polish: bool = True
    bvp_tol: float = 1e-9
    bvp_max_nodes: int = 200000
    jitter: float = 0.0  # random seed deformation amplitude
    seed: int | None = None


DEFAULT_MIN = MinimizerOptions()


@dataclass
class DiscretizedPath:
    """Polyline x_0..x_N at energy h, optionally carrying its polished geodesic.

    ``nodes`` (Cartesian) and ``qnodes`` (chart) hold the discrete stationary
    point. ``taus``/``qstates``/``states``/``times`` sample the polished solution
    at normalized K-time: chart (q, p), Cartesian (x, u) and physical time.
    """

    nodes: np.ndarray
    h: float
    endpoint_mode: str  # fixed | on_wall | closed
    class_word: WindingWord | None = None
    grad_norm: float = math.nan
    iterations: int = 0
    qnodes: np.ndarray | None = field(default=None, repr=False)
    discrete_length: float = math.nan
    length: float = math.nan  # JM length of the polished geodesic
    taus: np.ndarray | None = field(default=None, repr=False)
    qstates: np.ndarray | None = field(default=None, repr=False)
    states: np.ndarray | None = field(default=None, repr=False)
    times: np.ndarray | None = field(default=None, repr=False)
    collision_margin: float = math.nan
    shooting_defect: float = math.nan
    chart: PairChart | None = field(default=None, repr=False)
    _sol: object = field(default=None, repr=False)

    @property
    def polished(self):
        return self.states is not None

    @property
    def duration(self):
        return float(self.times[-1])

    @property
    def x_start(self):
        return (self.states[0, :2] if self.polished else self.nodes[0]).copy()

    @property
    def x_end(self):
        return (self.states[-1, :2] if self.polished else self.nodes[-1]).copy()

    @property
    def u_start(self):
        return self.states[0, 2:].copy()

    @property
    def u_end(self):
        return self.states[-1, 2:].copy()

    def sample(self, t, velocities=False):
        """Polished positions (and velocities) at physical times in [0, duration]."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tau = np.interp(t, self.times, self.taus)
        if self._sol is not None:
            for _ in range(4):
                y = self._sol(tau)
                dt = y[6] * self.chart.conformal(y[:2].T)
                tau = np.clip(tau - (y[4] - t) / dt, 0.0, 1.0)
            y = self._sol(tau)
            Q, P = y[:2].T, y[2:4].T
            X = self.chart.to_x(Q)
            return (X, self.chart.velocity(Q, P)) if velocities else X
        X = np.column_stack([np.interp(tau, self.taus, self.states[:, i]) for i in range(4)])
        return (X[:, :2], X[:, 2:]) if velocities else X[:, :2]


def jm_length(path, sys):
    """Midpoint-rule JM length of the Cartesian polyline."""
    nodes = np.asarray(path.nodes, dtype=float)
    if K.min_centre_distance(sys.centres, nodes) < sys.eps_coll:
        raise CollisionPoint("path node within eps_coll of a centre")
    return K.path_length(*sys.kargs, float(path.h), nodes)


# --- discrete energy in the chart -------------------------------------------

def _energy(chart, X, need=1):
    n = len(X) - 1
    D = np.diff(X, axis=0)
    mid = 0.5 * (X[1:] + X[:-1])
    G, dG, hG = chart.G(mid, need=need)
    s2 = np.einsum("ij,ij->i", D, D)
    E = n * float(np.sum(G * s2))
    half = 0.5 * dG * s2[:, None]
    tw = 2.0 * G[:, None] * D
    grad = np.zeros_like(X)
    grad[:-1] += half - tw
    grad[1:] += half + tw
    if need < 2:
        return E, n * grad
    gD = np.einsum("ni,nj->nij", dG, D)
    Dg = np.einsum("ni,nj->nij", D, dG)
    I2 = np.eye(2)[None]
    quarter = 0.25 * s2[:, None, None] * hG
    gI = 2.0 * G[:, None, None] * I2
    diag = np.zeros((n + 1, 2, 2))
    diag[:-1] += quarter - gD - Dg + gI
    diag[1:] += quarter + gD + Dg + gI
    return E, n * grad, n * diag, n * (quarter + gD - Dg - gI)


class _WallMap:
    """Wall coordinate s -> chart point with a continuous eta lift."""

    def __init__(self, chart, wall):
        self.chart, self.wall = chart, wall
        self.eta_ref = float(chart.to_q(wall.foot if wall.d < 1e300 else chart.M)[1])

    def q(self, s):
        return self.chart.to_q(self.wall.point(s), eta_ref=self.eta_ref)

    def dq(self, s):
        q = self.q(s)
        return np.linalg.solve(self.chart.jac(q)[0], np.asarray(self.wall.v))

    def d2q(self, s, eps=1e-5):
        return (self.dq(s + eps) - self.dq(s - eps)) / (2 * eps)

    def s_of(self, q):
        return float(self.wall.coord(self.chart.to_x(q)[0]))


class _Chain:
    """Arcs in the chart joined at fixed points or wall points.

    ends[a] = (start, end), each ("fixed", q) or ("var", j, m): wall coordinate
    variable s_j with eta lift offset 2 pi m.
    """

    def __init__(self, chart, wall, seeds, ends, opts, others_word=True):
        self.chart, self.wall, self.opts = chart, wall, opts
        self.wm = _WallMap(chart, wall)
        self.sizes = [len(s) - 1 for s in seeds]
        self.ends = ends
        self.nvar_s = 1 + max([e[1] for se in ends for e in se if e[0] == "var"], default=-1)
        self.base = np.concatenate([[0], np.cumsum([n + 1 for n in self.sizes])]).astype(int)
        self.voff = np.concatenate([[0], np.cumsum([2 * (n - 1) for n in self.sizes])]).astype(int)
        self.n_int = int(self.voff[-1])
        self.n_var = self.n_int + self.nvar_s
        z0 = np.zeros(self.n_var)
        for a, X in enumerate(seeds):
            z0[self.voff[a]:self.voff[a + 1]] = X[1:-1].ravel()
            for i, e in ((0, ends[a][0]), (-1, ends[a][1])):
                if e[0] == "var":
                    z0[self.n_int + e[1]] = self.wm.s_of(X[i])
        self.z0 = z0
        self.sub = None
        if chart.others:
            sys = chart.sys
            self.sub = CentreSystem(sys.centres[chart.others], sys.masses[chart.others],
                                    sys.exponents[chart.others])
        self.check_others = others_word
        self.target = None

    def _end_q(self, e, z):
        if e[0] == "fixed":
            return np.asarray(e[1], float)
        q = self.wm.q(z[self.n_int + e[1]])
        q[1] += TWO_PI * e[2]
        return q

    def nodes(self, z):
        out = []
        for a, n in enumerate(self.sizes):
            X = np.empty((n + 1, 2))
            X[1:-1] = z[self.voff[a]:self.voff[a + 1]].reshape(-1, 2)
            X[0] = self._end_q(self.ends[a][0], z)
            X[-1] = self._end_q(self.ends[a][1], z)
            out.append(X)
        return out

    def other_words(self, Xs):
        if self.sub is None:
            return ()
        out = []
        for X in Xs:
            P = self.chart.to_x(X)
            if K.min_centre_distance(self.sub.centres, P) < self.opts.eps_coll:
                raise CollisionPoint("path too close to a centre")
            out.append(reduce_word(ray_crossings(self.sub, self.wall, P)))
        return tuple(out)

    def valid(self, Xs):
        for X in Xs:
            if not np.all(X[:, 0] > 0) or not np.all(np.isfinite(X)):
                return False
        if self.sub is None:
            return True
        try:
            return self.other_words(Xs) == self.target
        except (AmbiguousClass, CollisionPoint):
            return False

    def _lin(self, z):
        """d(node coordinates)/dz as a sparse matrix."""
        rows, cols, vals = [], [], []
        for a, n in enumerate(self.sizes):
            b = 2 * self.base[a]
            k = np.arange(2 * (n - 1))
            rows.append(b + 2 + k)
            cols.append(self.voff[a] + k)
            vals.append(np.ones_like(k, dtype=float))
            for i, e in ((0, self.ends[a][0]), (n, self.ends[a][1])):
                if e[0] == "var":
                    j = self.n_int + e[1]
                    d = self.wm.dq(z[j])
                    rows.append(np.array([b + 2 * i, b + 2 * i + 1]))
                    cols.append(np.array([j, j]))
                    vals.append(d)
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(2 * int(self.base[-1]), self.n_var))

    def value_grad(self, z, need=1):
        Xs = self.nodes(z)
        F = 0.0
        gn = np.zeros(2 * int(self.base[-1]))
        parts = []
        for a, X in enumerate(Xs):
            res = _energy(self.chart, X, need=need)
            E = max(res[0], 1e-300)
            F += math.sqrt(E)
            gn[2 * self.base[a]:2 * self.base[a + 1]] = res[1].ravel() / (2.0 * math.sqrt(E))
            parts.append(res)
        Pm = self._lin(z)
        return F, Pm.T @ gn, Xs, parts, Pm, gn

    def newton_system(self, z, parts, Pm, gn):
        rows, cols, vals = [], [], []
        N = 2 * int(self.base[-1])
        Q = np.zeros((N, len(parts)))
        for a, (E, G, diag, off) in enumerate(parts):
            s = 1.0 / (2.0 * math.sqrt(E))
            b = 2 * self.base[a]
            n = len(diag)
            idx = b + 2 * np.arange(n)
            for p in range(2):
                for q in range(2):
                    rows += [idx + p, idx[:-1] + p, idx[1:] + q]
                    cols += [idx + q, idx[1:] + q, idx[:-1] + p]
                    vals += [s * diag[:, p, q], s * off[:, p, q], s * off[:, p, q]]
            Q[b:b + 2 * n, a] = G.ravel() / (2.0 * E ** 0.75)
        M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N, N))
        H = (Pm.T @ M @ Pm).tolil()
        # curvature of the wall map enters the s_j diagonal
        for a, n in enumerate(self.sizes):
            b = 2 * self.base[a]
            for i, e in ((0, self.ends[a][0]), (n, self.ends[a][1])):
                if e[0] == "var":
                    j = self.n_int + e[1]
                    H[j, j] += float(gn[b + 2 * i:b + 2 * i + 2] @ self.wm.d2q(z[j]))
        return H.tocsc(), Pm.T @ Q

    def minimize(self):
        opts = self.opts
        z = self.z0.copy()
        Xs = self.nodes(z)
        if self.sub is not None:
            try:
                self.target = self.other_words(Xs)
            except AmbiguousClass:
                # symmetric seeds can put a node exactly on a cut ray: nudge along eta
                z[1:self.n_int:2] += 1e-6
                Xs = self.nodes(z)
                try:
                    self.target = self.other_words(Xs)
                except AmbiguousClass as e:
                    raise ValidationError(f"seed path has an ambiguous class: {e}")
        if not self.valid(Xs):
            raise ValidationError("seed path leaves the chart or collides")
        F, g, Xs, parts, Pm, gn = self.value_grad(z, need=2)
        H, Q = self.newton_system(z, parts, Pm, gn)
        scale = float(np.abs(H.diagonal()).mean())
        mu = 1e-3 * scale
        eye = sp.identity(self.n_var, format="csc")
        it, stalls = 0, 0
        for it in range(1, opts.max_iter + 1):
            gmax = float(np.abs(g).max())
            if gmax <= opts.gtol:
                break
            H, Q = self.newton_system(z, parts, Pm, gn)
            accepted = False
            for _ in range(60):
                try:
                    p = _woodbury_solve(H + mu * eye, Q, -g)
                except (RuntimeError, np.linalg.LinAlgError):
                    mu = max(4.0 * mu, 1e-12 * scale)
                    continue
                slope = float(g @ p)
                if not slope < 0 or not np.all(np.isfinite(p)):
                    mu = max(4.0 * mu, 1e-12 * scale)
                    continue
                zt = z + p
                if not self.valid(self.nodes(zt)):
                    mu = max(4.0 * mu, 1e-12 * scale)
                    continue
                Ft, gt, Xt, pt, Pt, gnt = self.value_grad(zt, need=2)
                ok = Ft <= F + 1e-4 * slope
                if not ok and abs(Ft - F) <= 1e-13 * abs(F):
                    ok = float(np.abs(gt).max()) < gmax
                if ok:
                    z, F, g, Xs, parts, Pm, gn = zt, Ft, gt, Xt, pt, Pt, gnt
                    mu = max(mu / 5.0, 1e-14 * scale)
                    accepted = True
                    break
                mu = max(4.0 * mu, 1e-12 * scale)
            if not accepted:
                stalls += 1
                if stalls > 2:
                    break
        gmax = float(np.abs(g).max())
        self.z, self.F, self.grad_norm, self.iterations = z, F, gmax, it
        self.Xs = Xs
        self.lengths = [math.sqrt(p[0]) for p in parts]
        if gmax > opts.gtol:
            raise NoConvergence(
                f"discrete gradient {gmax:.3g} above tolerance after {it} iterations")
        return Xs


def _woodbury_solve(A, Q, b):
    lu = splu(A)
    y = lu.solve(b)
    if Q.shape[1] == 0:
        return y
    Z = np.column_stack([lu.solve(np.ascontiguousarray(Q[:, j])) for j in range(Q.shape[1])])
    S = np.eye(Q.shape[1]) - Q.T @ Z
    return y + Z @ np.linalg.solve(S, Q.T @ y)


# --- seeding -----------------------------------------------------------------

def _resample(poly, n):
    d = np.hypot(*np.diff(poly, axis=0).T)
    poly = poly[np.concatenate([[True], d > 0])]
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(poly, axis=0).T))])
    t = np.linspace(0.0, s[-1], n + 1)
    return np.column_stack([np.interp(t, s, poly[:, 0]), np.interp(t, s, poly[:, 1])])


def _n_nodes(k, opts):
    return max(opts.min_nodes, opts.nodes_per_turn * abs(int(k)))


def _seed_q(qa, qb, xi_ring, n, rng=None, jitter=0.0):
    """Chart polyline qa -> ring xi = xi_ring -> |k| turns -> qb.

    The ring is the ellipse of semi-major axis seed_radius * |c1 - c2| about the
    pair; its winding is fixed by the eta lift of qb.
    """
    poly = np.array([qa, [xi_ring, qa[1]], [xi_ring, qb[1]], qb])
    X = _resample(poly, n)
    if rng is not None and jitter > 0:
        f = np.linspace(0.0, 1.0, n + 1)
        bump = np.sin(math.pi * f)
        logxi = np.zeros(n + 1)
        for j in range(1, 4):
            logxi += jitter * rng.uniform(-1, 1) / j * np.sin(j * math.pi * f)
        X[:, 0] *= np.exp(logxi)
        X[:, 1] += jitter * rng.uniform(-1, 1) * bump
    return X


def _ring(chart, opts):
    # seed_radius * |c1 - c2| as semi-major axis, shrunk so that no other centre
    # is enclosed
    xi = math.acosh(max(opts.seed_radius * 2.0, 1.0 + 1e-9))
    for c in chart.sys.centres[chart.others]:
        xi = min(xi, 0.5 * float(chart.to_q(c)[0]))
    return xi


def _rng(opts, salt=0):
    if opts.jitter <= 0:
        return None
    return np.random.default_rng(None if opts.seed is None else opts.seed + salt)


# --- boundary-value polish ---------------------------------------------------

def _bvp_guess(chart, X, mesh):
    D = np.diff(X, axis=0)
    mid = 0.5 * (X[1:] + X[:-1])
    G = chart.G(mid)[0]
    dq = np.hypot(D[:, 0], D[:, 1])
    dtau = dq / np.sqrt(G)
    T = float(dtau.sum())
    tau = np.concatenate([[0.0], np.cumsum(dtau)]) / T
    keep = np.concatenate([[True], np.diff(tau) > 1e-15])
    cs = CubicSpline(tau[keep], X[keep])
    Q = cs(mesh)
    dQ = cs(mesh, 1)
    Gm = chart.G(Q)[0]
    P = dQ / np.hypot(dQ[:, 0], dQ[:, 1])[:, None] * np.sqrt(Gm)[:, None]
    conf = chart.conformal(mid)
    t = np.concatenate([[0.0], np.cumsum(conf * dtau)])
    ell = np.concatenate([[0.0], np.cumsum(np.sqrt(G) * dq)])
    Y = np.vstack([Q.T, P.T, np.interp(mesh, tau[keep], t[keep])[None],
                   np.interp(mesh, tau[keep], ell[keep])[None]])
    return Y, T


NC = 6  # BVP components: xi, eta, p_xi, p_eta, t, JM length


def _node_mesh(chart, X):
    D = np.diff(X, axis=0)
    mid = 0.5 * (X[1:] + X[:-1])
    dtau = np.hypot(D[:, 0], D[:, 1]) / np.sqrt(chart.G(mid)[0])
    mesh = np.concatenate([[0.0], np.cumsum(dtau)]) / dtau.sum()
    mesh = mesh[np.concatenate([[True], np.diff(mesh) > 1e-12])]
    mesh[-1] = 1.0
    return mesh


def _bvp(chart, wall, mode, ends=None, opts=DEFAULT_MIN, X=None, warm=None):
    """Polish one arc as an exact K-time solution on normalized time [0, 1].

    mode "fixed": between the chart points ends = (qa, qb).
    mode "on_wall": ends slide on the wall and the arc meets it orthogonally.
    The guess comes from the polyline X or from a previous solution ``warm``.
    """
    if warm is not None:
        mesh = warm.x
        Y0, T0 = warm.y, float(warm.p[0])
    else:
        mesh = _node_mesh(chart, X)
        Y0, T0 = _bvp_guess(chart, X, mesh)
    v = np.asarray(wall.v)

    def fun(_, Y, p):
        Q = Y[:2].T
        G, dG, _ = chart.G(Q, need=1)
        return np.vstack([p[0] * Y[2:4], 0.5 * p[0] * dG.T,
                          p[0] * chart.conformal(Q)[None], p[0] * G[None]])

    def jac(_, Y, p):
        n = Y.shape[1]
        Q = Y[:2].T
        G, dG, hG = chart.G(Q, need=2)
        dconf = chart.s ** 2 * np.vstack([np.sinh(2 * Q[:, 0]), np.sin(2 * Q[:, 1])])
        T = p[0]
        J = np.zeros((NC, NC, n))
        Jp = np.empty((NC, 1, n))
        for i in range(2):
            J[i, 2 + i] = T
            for j in range(2):
                J[2 + i, j] = 0.5 * T * hG[:, i, j]
            J[4, i] = T * dconf[i]
            J[5, i] = T * dG[:, i]
        Jp[:2, 0] = Y[2:4]
        Jp[2:4, 0] = 0.5 * dG.T
        Jp[4, 0] = chart.conformal(Q)
        Jp[5, 0] = G
        return J, Jp

    def bc(ya, yb, p):
        res = [0.5 * (ya[2] ** 2 + ya[3] ** 2) - 0.5 * chart.G(ya[:2])[0][0], ya[4], ya[5]]
        if mode == "fixed":
            res.extend(ya[0:2] - ends[0])
            res.extend(yb[0:2] - ends[1])
        else:
            for y in (ya, yb):
                res.append(float(wall.height(chart.to_x(y[:2])[0])))
                res.append(float(chart.jac(y[:2])[0] @ y[2:4] @ v))
        return np.array(res)

    sol = solve_bvp(fun, bc, mesh, Y0, p=np.array([T0]), fun_jac=jac, tol=opts.bvp_tol,
                    max_nodes=opts.bvp_max_nodes, bc_tol=1e-10)
    if sol.status != 0:
        raise NoConvergence(f"boundary-value polish failed: {sol.message}")
    return sol


def _polish_periodic(chart, wall, Xs, lifts, opts, tol=1e-10, max_iter=20, ds=1e-6):
    """Polish a closed bounce chain: each arc is a fixed-end BVP, and Newton on
    the bounce coordinates removes the jumps in tangential velocity."""
    wm = _WallMap(chart, wall)
    r = len(Xs)
    v = np.asarray(wall.v)

    def ends(s, j):
        qb = wm.q(s[(j + 1) % r])
        qb[1] += TWO_PI * lifts[j]
        return wm.q(s[j]), qb

    def tang(sol, end):
        y = sol.y[:, end]
        return float(chart.velocity(y[:2], y[2:4])[0] @ v)

    def residual(sols):
        return np.array([tang(sols[(j - 1) % r], -1) - tang(sols[j], 0) for j in range(r)])

    s = np.array([wm.s_of(X[0]) for X in Xs])
    sols = [_bvp(chart, wall, "fixed", ends(s, j), opts, X=Xs[j]) for j in range(r)]
    R = residual(sols)
    # s_j only moves arcs j-1 and j, so indices 3 apart can be perturbed together
    m = r if r < 3 else 3
    colours = [list(range(c, r - r % 3 if r >= 3 else r, m)) for c in range(m)]
    colours += [[j] for j in range(r - r % 3, r)] if r >= 3 else []
    for _ in range(max_iter):
        if np.abs(R).max() <= tol:
            break
        Jm = np.zeros((r, r))
        for group in colours:
            sp_ = s.copy()
            sp_[group] += ds
            touched = sorted({(j - 1) % r for j in group} | set(group))
            trial = list(sols)
            for a in touched:
                trial[a] = _bvp(chart, wall, "fixed", ends(sp_, a), opts, warm=sols[a])
            dR = (residual(trial) - R) / ds
            for j in group:
                for i in ((j - 1) % r, j, (j + 1) % r):
                    Jm[i, j] = dR[i]
        step = np.linalg.solve(Jm, -R)
        lam = 1.0
        while True:
            st = s + lam * step
            try:
                trial = [_bvp(chart, wall, "fixed", ends(st, j), opts, warm=sols[j])
                         for j in range(r)]
                Rt = residual(trial)
                if np.abs(Rt).max() < np.abs(R).max() or lam < 1e-3:
                    break
            except NoConvergence:
                if lam < 1e-3:
                    raise
            lam *= 0.5
        s, sols, R = st, trial, Rt
    if np.abs(R).max() > 1e3 * tol:
        raise NoConvergence(f"bounce-point Newton stalled (tangential jump {np.abs(R).max():.3g})")
    return sols


def _kflow_defect(chart, sol, n_check=64):
    """Max mismatch between the polished arc and K-flow shots over short spans.

    Shooting across a whole multi-turn arc would mostly measure the flow's
    exponential sensitivity, so the arc is cut into n_check pieces.
    """
    def rhs(_, y):
        dG = chart.G(y[:2], need=1)[1][0]
        return [y[2], y[3], 0.5 * dG[0], 0.5 * dG[1]]
    T = float(sol.p[0])
    taus = np.linspace(0.0, 1.0, n_check + 1)
    Y = sol.sol(taus)[:4]
    worst = 0.0
    for i in range(n_check):
        r = solve_ivp(rhs, (0.0, T / n_check), Y[:, i], method="DOP853", rtol=1e-12, atol=1e-13)
        worst = max(worst, float(np.abs(r.y[:, -1] - Y[:, i + 1]).max()))
    return worst


def _make_paths(chart, sys, h, wall, ch, sols, mode, k_list, other_words):
    gen = generator_word(sys, wall, chart.pair)
    out = []
    for a, X in enumerate(ch.Xs):
        n = len(X) - 1
        k = k_list[a]
        letters = tuple(gen) * k if k > 0 else tuple((i, -s) for i, s in reversed(gen)) * (-k)
        extra = other_words[a] if other_words else ()
        extra = tuple((chart.others[i], sgn) for i, sgn in extra)
        path = DiscretizedPath(
            nodes=chart.to_x(X), h=float(h), endpoint_mode=mode,
            class_word=WindingWord(letters + extra, k), grad_norm=ch.grad_norm,
            iterations=ch.iterations, qnodes=X, discrete_length=ch.lengths[a], chart=chart)
        if sols is not None:
            sol = sols[a]
            taus = np.linspace(0.0, 1.0, 8 * n + 1)
            Y = sol.sol(taus)
            Q, P = Y[:2].T, Y[2:4].T
            T = float(sol.p[0])
            path.taus = taus
            path.qstates = Y[:4].T.copy()
            path.states = np.column_stack([chart.to_x(Q), chart.velocity(Q, P)])
            path.times = Y[4].copy()
            path.length = float(Y[5, -1])
            path._sol = (lambda tau, sol=sol, T=T:
                         np.vstack([sol.sol(tau), np.full(np.size(tau), T)]))
            path.shooting_defect = _kflow_defect(chart, sol)
            d1, d2 = chart.pair_distances(Q)
            path.collision_margin = float(min(d1.min(), d2.min()))
            if not np.all(Q[:, 0] > 0):
                raise ClassCollapse("polished arc crosses the collision segment")
        else:
            d1, d2 = chart.pair_distances(X)
            path.collision_margin = float(min(d1.min(), d2.min()))
        if chart.others:
            path.collision_margin = min(path.collision_margin, K.min_centre_distance(
                sys.centres[chart.others], path.states[:, :2] if path.polished else path.nodes))
        out.append(path)
    if sols is not None and ch.sub is not None:
        words = ch.other_words([p.qstates[:, :2] for p in out])
        if words != ch.target:
            raise ClassCollapse("polishing changed the winding about the other centres")
    return out


# --- public minimizers -------------------------------------------------------

def _setup(sys, h, wall, opts):
    if not h > 0:
        raise ValidationError("energy must be positive")
    wall.validate(sys)
    if max(opts.pair) >= sys.n:
        raise ValidationError("designated pair refers to a missing centre")
    return PairChart(sys, h, opts.pair)


def _wall_coord(wall, x):
    if np.ndim(x) == 0:
        return float(x)
    x = np.asarray(x, dtype=float)
    if abs(wall.height(x)) > 1e-9:
        raise ValidationError(f"point {x.tolist()} is not on the wall")
    return float(wall.coord(x))


def _check_k(k):
    if not (isinstance(k, (int, np.integer)) and k != 0):
        raise ValidationError("k must be a nonzero integer")
    return int(k)


def minimize_arc(sys, h, wall, x, y, k, opts=DEFAULT_MIN):
    """gamma_k^{x,y}: JM minimizer from wall point x to wall point y winding k times.

    x, y are wall coordinates or points on the wall.
    """
    k = _check_k(k)
    chart = _setup(sys, h, wall, opts)
    wm = _WallMap(chart, wall)
    qa = wm.q(_wall_coord(wall, x))
    qb = wm.q(_wall_coord(wall, y))
    qb[1] += TWO_PI * k
    seed = _seed_q(qa, qb, _ring(chart, opts), _n_nodes(k, opts), _rng(opts), opts.jitter)
    ch = _Chain(chart, wall, [seed], [(("fixed", qa), ("fixed", qb))], opts)
    ch.minimize()
    sols = [_bvp(chart, wall, "fixed", (qa, qb), opts, X=ch.Xs[0])] if opts.polish else None
    return _make_paths(chart, sys, h, wall, ch, sols, "fixed", [k], ch.target)[0]


def minimize_free(sys, h, wall, k, opts=DEFAULT_MIN):
    """gamma_k: JM minimizer winding k times with both endpoints sliding on the wall."""
    k = _check_k(k)
    chart = _setup(sys, h, wall, opts)
    wm = _WallMap(chart, wall)
    s_m = wall.coord(chart.M)
    sg = 1.0 if k > 0 else -1.0
    qa = wm.q(s_m + chart.s * sg)
    qb = wm.q(s_m - chart.s * sg)
    qb[1] += TWO_PI * k
    seed = _seed_q(qa, qb, _ring(chart, opts), _n_nodes(k, opts), _rng(opts), opts.jitter)
    ch = _Chain(chart, wall, [seed], [(("var", 0, 0), ("var", 1, k))], opts)
    ch.minimize()
    sols = [_bvp(chart, wall, "on_wall", None, opts, X=ch.Xs[0])] if opts.polish else None
    return _make_paths(chart, sys, h, wall, ch, sols, "on_wall", [k], ch.target)[0]


def orthogonality_residual(path, wall):
    """Angles (rad) between the end velocities and the wall normal."""
    v, w = np.asarray(wall.v), np.asarray(wall.w)
    return tuple(abs(math.atan2(abs(u @ v), abs(u @ w))) for u in (path.u_start, path.u_end))


def minimize_loop(sys, h, base, winding=1, opts=DEFAULT_MIN, n=None):
    """Closed discrete JM minimizer based at ``base`` winding about the pair's segment."""
    opts = replace(opts, polish=False)
    if not h > 0:
        raise ValidationError("energy must be positive")
    chart = PairChart(sys, h, opts.pair)
    wall = Wall((1.0, 0.0), 1e300)  # only its direction is used, for cut rays
    qa = chart.to_q(np.asarray(base, float))
    qb = qa + [0.0, TWO_PI * winding]
    n = n or max(opts.min_nodes, 2 * opts.nodes_per_turn)
    seed = _resample(np.array([qa, qb]), n)
    ch = _Chain(chart, wall, [seed], [(("fixed", qa), ("fixed", qb))], opts)
    ch.minimize()
    return _make_paths(chart, sys, h, wall, ch, None, "closed", [winding], ch.target)[0]


# --- periodic orbits ---------------------------------------------------------

@dataclass(frozen=True)
class BounceSequence:
    classes: tuple

    def __post_init__(self):
        try:
            c = tuple(int(i) for i in self.classes)
        except (TypeError, ValueError):
            raise ValidationError("bounce classes must be integers")
        if len(c) == 0 or any(i == 0 for i in c):
            raise ValidationError("bounce classes must be a nonempty list of nonzero integers")
        object.__setattr__(self, "classes", c)

    def check_alternating(self, k0):
        c = self.classes
        if len(c) % 2:
            raise ValidationError("alternating sequences need even length")
        for j in range(len(c)):
            if np.sign(c[j]) == np.sign(c[(j + 1) % len(c)]):
                raise ValidationError("alternating mode needs sign(i_j) = -sign(i_{j+1})")
            if abs(c[j]) < k0:
                raise ValidationError(f"|i_j| must be at least k0={k0}")

    def __len__(self):
        return len(self.classes)


@dataclass
class PeriodicOrbit:
    bounce_points: np.ndarray  # wall coordinates
    arcs: list
    total_length: float
    sequence: BounceSequence
    h: float
    containment_margin: float = math.nan
    reflection: dict | None = None

    @property
    def r(self):
        return len(self.arcs)

    def section_point(self, j):
        from .dynamics import SectionPoint
        return SectionPoint(float(self.bounce_points[j]), self.arcs[j].u_start, self.h)


def bounce_window(sys, h, wall):
    """Wall segment inside the ball about the foot of the barycentre that reaches
    up to <w, x - b> = R0; bounce points of periodic minimizers lie in it."""
    b = sys.barycentre
    R = float(wall.height(b)) + convexity_radius(sys, h)
    s0 = wall.coord(b)
    return s0 - R, s0 + R


def _seed_bounces(sys, h, wall, seq, chart, mode):
    if mode == "alternating":
        from .twocentre import TwoCentreParams, spiral_orthogonal_to_wall
        params = TwoCentreParams.from_system(sys, h)
        wn = params.wall_to_frame(wall)
        feet = {}
        for sg in (1, -1):
            o = spiral_orthogonal_to_wall(wall, sg, params)
            feet[sg] = wall.coord(params.from_frame(wn.point(o.s)))
        return np.array([feet[1 if i > 0 else -1] for i in seq.classes])
    s_m = wall.coord(chart.M)
    return np.array([s_m + chart.s * (1 if i > 0 else -1) for i in seq.classes])


def periodic_orbit(sys, h, wall, seq, opts=DEFAULT_MIN, mode="perturbative", k0=None,
                   bounce_seed=None):
    """Periodic billiard trajectory whose consecutive arcs realize the classes of seq.

    mode "perturbative" seeds bounce points near the pair; "alternating" (two
    Newtonian centres) seeds them at the feet of the wall-orthogonal spirals.
    """
    if not isinstance(seq, BounceSequence):
        seq = BounceSequence(tuple(seq))
    if mode == "alternating" and k0 is not None:
        seq.check_alternating(k0)
    elif mode not in ("perturbative", "alternating"):
        raise ValidationError(f"unknown mode {mode!r}")
    chart = _setup(sys, h, wall, opts)
    r = len(seq)
    s = np.asarray(bounce_seed, float) if bounce_seed is not None else \
        _seed_bounces(sys, h, wall, seq, chart, mode)
    wm = _WallMap(chart, wall)
    rng = _rng(opts)
    seeds, ends = [], []
    for j, k in enumerate(seq.classes):
        qa = wm.q(s[j])
        qb = wm.q(s[(j + 1) % r])
        qb[1] += TWO_PI * k
        seeds.append(_seed_q(qa, qb, _ring(chart, opts), _n_nodes(k, opts), rng, opts.jitter))
        ends.append((("var", j, 0), ("var", (j + 1) % r, k)))
    ch = _Chain(chart, wall, seeds, ends, opts)
    ch.minimize()
    sols = _polish_periodic(chart, wall, ch.Xs, seq.classes, opts) if opts.polish else None
    arcs = _make_paths(chart, sys, h, wall, ch, sols, "on_wall", list(seq.classes), ch.target)
    margin = min(_interior_height(a, wall) for a in arcs)
    orbit = PeriodicOrbit(np.array([wall.coord(a.x_start) for a in arcs]), arcs,
                          float(sum(a.length if a.polished else a.discrete_length for a in arcs)),
                          seq, float(h), margin)
    if margin < -1e-9:
        raise WallTooClose(f"periodic minimizer leaves the half-plane (min height {margin:.3g})")
    if sols is not None:
        orbit.reflection = check_reflection_law(orbit, wall, sys)
    return orbit


def _interior_height(arc, wall):
    pts = arc.states[1:-1, :2] if arc.polished else arc.nodes[1:-1]
    return float(wall.height(pts).min()) if len(pts) else math.inf


def check_reflection_law(orbit, wall, sys=None):
    """Per-bounce residual |R(u-) - u+| of the reflection law and cone membership.

    The cone test checks that the outgoing velocity and the reversed incoming
    one both lie in the non-escaping cone at the bounce point (about the
    barycentre of ``sys`` when given).
    """
    v, w = np.asarray(wall.v), np.asarray(wall.w)
    origin = sys.barycentre if sys is not None else np.zeros(2)
    rows = []
    r = len(orbit.arcs)
    for j in range(r):
        um = orbit.arcs[(j - 1) % r].u_end
        up = orbit.arcs[j].u_start
        x = orbit.arcs[j].x_start
        refl = um - 2.0 * float(um @ w) * w
        in_cone = None
        try:
            lo, hi = escape_cone(wall, x, origin)
            a_out = math.atan2(up @ w, up @ v)
            a_in = math.atan2(-um @ w, -um @ v)
            in_cone = bool(lo < a_out < hi and lo < a_in < hi)
        except BilliardError:
            pass
        rows.append({"bounce": j, "s": float(wall.coord(x)),
                     "tangential": abs(float((um - up) @ v)),
                     "residual": float(np.hypot(*(refl - up))),
                     "in_cone": in_cone,
                     "position_gap": float(np.hypot(*(orbit.arcs[(j - 1) % r].x_end - x)))})
    return {"bounces": rows, "max_residual": max(b["residual"] for b in rows)}


# --- shadowing ---------------------------------------------------------------

def padded_sequence(window, n_pad):
    """window extended periodically by n_pad symbols on each side."""
    window = tuple(int(i) for i in window)
    m = len(window)
    left = tuple(window[(m - n_pad + j) % m] for j in range(n_pad))
    right = tuple(window[j % m] for j in range(n_pad))
    return left + window + right


@dataclass
class ShadowResult:
    window: tuple
    n_pad: int
    orbit: PeriodicOrbit
    central: list
    trajectory: list
    energy_drift: float


def shadow_window(sys, h, wall, window, n_pad, opts=DEFAULT_MIN, integrate=True):
    """Central arcs of the periodic minimizer for the periodically padded window;
    with ``integrate`` the window is also re-integrated from its first bounce."""
    if n_pad < 0:
        raise ValidationError("padding must be nonnegative")
    seq = padded_sequence(window, n_pad)
    orbit = periodic_orbit(sys, h, wall, seq, opts)
    central = orbit.arcs[n_pad:n_pad + len(window)]
    traj, drift = [], 0.0
    if integrate:
        from .dynamics import SectionPoint, billiard_step
        p = orbit.section_point(n_pad)
        io = IntegratorOptions(rtol=1e-12, atol=1e-14)
        for _ in range(len(window)):
            p, seg = billiard_step(sys, wall, p, io)
            traj.append(seg)
            drift = max(drift, seg.energy_drift)
            if not isinstance(p, SectionPoint):
                break
    return ShadowResult(tuple(window), n_pad, orbit, central, traj, drift)


def arc_distance(a, b, n=2001):
    """Sup-distance between two polished arcs after normalizing time to [0, 1]."""
    s = np.linspace(0.0, 1.0, n)
    pa = a.sample(s * a.duration)
    pb = b.sample(s * b.duration)
    return float(np.hypot(*(pa - pb).T).max())


def shadow_convergence(sys, h, wall, window, pads=(2, 4, 6), opts=DEFAULT_MIN):
    """Sup-distance of the central arcs between successive paddings."""
    res = [shadow_window(sys, h, wall, window, n, opts, integrate=False) for n in pads]
    out = []
    for r0, r1 in zip(res[:-1], res[1:]):
        out.append(((r0.n_pad, r1.n_pad),
                    max(arc_distance(a, b) for a, b in zip(r0.central, r1.central))))
    return out, res


# --- d0 heuristic ------------------------------------------------------------

@dataclass
class D0Estimate:
    d0: float
    heuristic: bool
    R0: float
    loop_clearance: float
    grid: list


def estimate_d0(sys, h, wall_angle=0.0, opts=DEFAULT_MIN, growth=1.25, max_steps=12):
    """Heuristic wall distance above which the (1,-1) periodic minimizer is contained.

    Grid search from the larger of the convexity radius (measured from the
    barycentre) and the depth of the enclosing loop minimizer below the barycentre.
    """
    if sys.n < 2 or float(np.ptp(sys.centres, axis=0).max()) == 0:
        raise ValidationError("at least two distinct centres required")
    R0 = convexity_radius(sys, h)
    w = np.asarray(Wall.from_angle(wall_angle, 1.0).w)
    b = sys.barycentre
    spread = float(np.hypot(*(sys.centres - b).T).max())
    r = max(2.0 * R0, 2.0 * spread, 1.0)
    loop = minimize_loop(sys, h, b + r * w, 1, opts)
    clear = -float((loop.nodes @ w).min())
    d = max(R0 - float(b @ w), clear * (1.0 + 1e-6))
    grid = []
    for _ in range(max_steps):
        wall = Wall.from_angle(wall_angle, d)
        try:
            periodic_orbit(sys, h, wall, BounceSequence((1, -1)), opts)
            grid.append((d, "ok"))
            return D0Estimate(d, True, R0, clear, grid)
        except (WallTooClose, ClassCollapse, NoConvergence, ValidationError) as e:
            grid.append((d, type(e).__name__))
        d *= growth
    raise NotFound("no wall distance on the grid admits a contained (1,-1) orbit")
