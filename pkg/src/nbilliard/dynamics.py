"""Flow between wall impacts, elastic reflection and the billiard map.

Trajectories are integrated with an adaptive Dormand-Prince 5(4) pair (compiled
kernel, pure-Python fallback). Wall impacts are located with genuine RK steps,
so impact states carry the integrator's accuracy rather than an interpolant's.
"""
import csv
import functools
import io
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import (AmbiguousClass, CollisionPoint, NonfiniteState,
                     StepLimitExceeded, TangentialImpact, ValidationError)
from .potential import EPS_GEOM, convexity_radius


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 1_000_000
    eps_coll: float = 1e-6
    t_max: float = math.inf
    r_esc: float | None = None  # default: escape_radius()


DEFAULT_OPTIONS = IntegratorOptions()


@dataclass(frozen=True)
class PhaseState:
    x: np.ndarray
    u: np.ndarray

    @property
    def y(self):
        return np.array([self.x[0], self.x[1], self.u[0], self.u[1]], dtype=float)


@dataclass(frozen=True)
class SectionPoint:
    """Wall coordinate s and outgoing velocity u (<u, w> > 0) at energy h."""

    s: float
    u: np.ndarray
    h: float

    @classmethod
    def from_angle(cls, sys, wall, h, s, angle):
        x = wall.point(s)
        speed = math.sqrt(2.0 * (h + K.potential(*sys.kargs, float(x[0]), float(x[1]))))
        return cls(float(s), wall.velocity(angle, speed), float(h))

    def position(self, wall):
        return wall.point(self.s)

    def angle(self, wall):
        return wall.angle_of(self.u)

    def state(self, wall):
        return PhaseState(self.position(wall), np.asarray(self.u, dtype=float))

    def validate(self, sys, wall, tol=1e-10):
        if not self.u[0] * wall.w[0] + self.u[1] * wall.w[1] > 0:
            raise ValidationError("section point velocity must point into the half-plane")
        e = energy_of(sys, self.state(wall))
        if abs(e - self.h) > tol * max(1.0, abs(self.h)):
            raise ValidationError(f"section point energy {e!r} differs from h={self.h!r}")
        return self


@dataclass(frozen=True)
class Escaped:
    segment: "TrajectorySegment" = field(repr=False)


@dataclass(frozen=True)
class Collision:
    segment: "TrajectorySegment" = field(repr=False)


@dataclass
class TrajectorySegment:
    times: np.ndarray
    states: np.ndarray  # rows (x1, x2, u1, u2)
    terminal: str  # "wall" | "escaped" | "collision" | "time"
    energy: float
    energy_drift: float = 0.0

    @property
    def positions(self):
        return self.states[:, :2]

    @property
    def end(self):
        return PhaseState(self.states[-1, :2].copy(), self.states[-1, 2:].copy())

    def to_csv(self, path):
        write_csv(path, ["t", "x1", "x2", "u1", "u2"],
                  np.column_stack([self.times, self.states]))


def atomic_write(path, text):
    """Write text to path through a temporary file and a rename."""
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    # repr() gives the shortest round-trip decimal form; integers stay integers
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([v if isinstance(v, (int, np.integer, str)) else repr(float(v)) for v in row])
    atomic_write(path, buf.getvalue())


def energy_of(sys, state):
    x, u = state.x, state.u
    sys.check_point(x)
    return 0.5 * float(u[0] ** 2 + u[1] ** 2) - K.potential(*sys.kargs, float(x[0]), float(x[1]))


def energies(sys, states):
    states = np.asarray(states)
    return 0.5 * np.einsum("ij,ij->i", states[:, 2:], states[:, 2:]) - \
        K.potential_many(*sys.kargs, states[:, :2])


@functools.lru_cache(maxsize=256)
def _convexity_radius_cached(sys, h):
    return convexity_radius(sys, h)


def escape_radius(sys, h, wall=None):
    """max(2 R0, 10 max|c_i - b|, 10 d) about the barycentre b."""
    rel = sys.centres - sys.barycentre
    r = max(2.0 * _convexity_radius_cached(sys, float(h)),
            10.0 * float(np.hypot(rel[:, 0], rel[:, 1]).max()), 1.0)
    if wall is not None:
        r = max(r, 10.0 * wall.d)
    return r


def integrate_to_wall(sys, wall, state, opts=DEFAULT_OPTIONS, record=True):
    """Integrate from ``state`` until wall impact, certified escape or collision.

    ``wall=None`` integrates the free flow (no reflecting line) up to opts.t_max.
    """
    y0 = state.y
    h = energy_of(sys, state)
    if not h > 0:
        raise ValidationError("only positive energies are supported")
    if wall is not None:
        if wall.height(state.x) < -1e-12:
            raise ValidationError("initial point outside the half-plane")
        if abs(wall.height(state.x)) <= 1e-12 and \
                state.u[0] * wall.w[0] + state.u[1] * wall.w[1] <= 0:
            raise ValidationError("initial velocity on the wall must point inward")
    r_esc = opts.r_esc if opts.r_esc is not None else escape_radius(sys, h, wall)
    wd = wall.d if wall is not None else math.inf
    ww = wall.w if wall is not None else (0.0, 1.0)
    ts, ys, code, _ = K.integrate(*sys.kargs, y0, ww, wd, sys.barycentre, r_esc,
                                  opts.t_max, opts.rtol, opts.atol, opts.max_steps,
                                  opts.eps_coll, record)
    if code == K.STEP_LIMIT:
        raise StepLimitExceeded(f"no terminal event within {opts.max_steps} steps")
    if code == K.NONFINITE:
        raise NonfiniteState("integration produced a non-finite state")
    terminal = {K.WALL: "wall", K.ESCAPED: "escaped", K.COLLISION: "collision",
                K.TIME_LIMIT: "time"}[code]
    drift = 0.0
    if terminal != "collision":
        drift = float(np.max(np.abs(energies(sys, ys) - h))) / max(abs(h), 1e-300)
    return TrajectorySegment(ts, ys, terminal, h, drift)


def reflect(u, wall, eps_geom=EPS_GEOM):
    un = u[0] * wall.w[0] + u[1] * wall.w[1]
    if abs(un) < eps_geom:
        raise TangentialImpact("grazing impact: normal velocity component vanishes")
    return np.array([u[0] - 2.0 * un * wall.w[0], u[1] - 2.0 * un * wall.w[1]])


def reverse(p, wall):
    """Time reversal on the section: flips the tangential velocity component."""
    ut = p.u[0] * wall.v[0] + p.u[1] * wall.v[1]
    return SectionPoint(p.s, np.array([p.u[0] - 2 * ut * wall.v[0],
                                       p.u[1] - 2 * ut * wall.v[1]]), p.h)


def billiard_step(sys, wall, p, opts=DEFAULT_OPTIONS, record=True):
    """One application of the billiard map, returning (image, segment)."""
    seg = integrate_to_wall(sys, wall, p.state(wall), opts, record=record)
    if seg.terminal == "escaped":
        return Escaped(seg), seg
    if seg.terminal == "collision":
        return Collision(seg), seg
    if seg.terminal != "wall":
        raise StepLimitExceeded("integration stopped before a terminal event")
    x, u = seg.states[-1, :2], seg.states[-1, 2:]
    return SectionPoint(wall.coord(x), reflect(u, wall), p.h), seg


def billiard_map(sys, wall, p, opts=DEFAULT_OPTIONS):
    return billiard_step(sys, wall, p, opts, record=False)[0]


# --- winding classes -------------------------------------------------------

@dataclass(frozen=True)
class WindingWord:
    """Reduced word of signed crossings of the rays c_i + t w (t >= 0).

    Letters are (centre index, +1 | -1); +1 is a counter-clockwise crossing.
    ``k`` is the power of the designated pair's generator, or None.
    """

    letters: tuple
    k: int | None


def _centre_order(sys, wall):
    c = sys.centres
    a = c @ np.asarray(wall.v)
    b = c @ np.asarray(wall.w)
    return sorted(range(sys.n), key=lambda i: (-a[i], -b[i], i))


def ray_crossings(sys, wall, nodes, eps_geom=EPS_GEOM):
    """Unreduced signed ray crossings of a polyline, in path order."""
    nodes = np.asarray(nodes, dtype=float)
    v = np.asarray(wall.v)
    w = np.asarray(wall.w)
    order = _centre_order(sys, wall)
    rank = {c: r for r, c in enumerate(order)}
    per_seg = [[] for _ in range(len(nodes) - 1)]
    for i in range(sys.n):
        rel = nodes - sys.centres[i]
        a = rel @ v
        b = rel @ w
        near = (np.abs(a) < eps_geom) & (b >= -eps_geom)
        if np.any(near):
            raise AmbiguousClass(f"path sample within {eps_geom:g} of the cut ray of centre {i}")
        sgn = np.sign(a)
        idx = np.nonzero(sgn[:-1] != sgn[1:])[0]
        for j in idx:
            lam = a[j] / (a[j] - a[j + 1])
            bc = b[j] + lam * (b[j + 1] - b[j])
            if bc >= 0:
                per_seg[j].append((lam, i, 1 if a[j] > 0 else -1))
    out = []
    for evs in per_seg:
        if len(evs) > 1:
            evs.sort(key=lambda e: (e[0], rank[e[1]] * e[2]))
        out.extend((i, s) for _, i, s in evs)
    return out


def reduce_word(letters):
    stack = []
    for l in letters:
        if stack and stack[-1][0] == l[0] and stack[-1][1] == -l[1]:
            stack.pop()
        else:
            stack.append(tuple(l))
    return tuple(stack)


def generator_word(sys, wall, pair=(0, 1)):
    """Word of one counter-clockwise turn around the designated pair."""
    order = [i for i in _centre_order(sys, wall) if i in pair]
    return tuple((i, 1) for i in order)


def class_power(word, gen):
    if not word:
        return 0
    inv = tuple((i, -s) for i, s in reversed(gen))
    for g, sign in ((gen, 1), (inv, -1)):
        m = len(g)
        if len(word) % m == 0 and all(word[j] == g[j % m] for j in range(len(word))):
            return sign * len(word) // m
    return None


def winding_word(path, sys, wall, pair=(0, 1), eps_geom=EPS_GEOM):
    """Winding word of a TrajectorySegment or an (N, 2) node array."""
    nodes = path.positions if isinstance(path, TrajectorySegment) else path
    word = reduce_word(ray_crossings(sys, wall, nodes, eps_geom))
    return WindingWord(word, class_power(word, generator_word(sys, wall, pair)))


def winding_numbers(nodes, points):
    """Winding number of a closed polyline about each point."""
    nodes = np.asarray(nodes, dtype=float)
    if np.any(nodes[0] != nodes[-1]):
        nodes = np.vstack([nodes, nodes[:1]])
    out = []
    for p in np.atleast_2d(points):
        ang = np.arctan2(nodes[:, 1] - p[1], nodes[:, 0] - p[0])
        d = np.diff(ang)
        d = (d + np.pi) % (2 * np.pi) - np.pi
        out.append(int(round(d.sum() / (2 * np.pi))))
    return out
