"""Symbolic itineraries from crossings of a section ray.

The section sigma is the ray from c_1 pointing away from c_2. Every turn of
a trajectory around the pair crosses it once: counter-clockwise crossings are
recorded as 0 and clockwise ones as 1.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dynamics import (DEFAULT_OPTIONS, IntegratorOptions, SectionPoint,
                       billiard_step, escape_radius, reverse)
from .errors import AmbiguousClass, BilliardError, NotFound, ValidationError, WallTooClose
from .potential import EPS_GEOM


@dataclass(frozen=True)
class SectionCurve:
    base: np.ndarray
    direction: np.ndarray
    length: float = math.inf

    @classmethod
    def for_system(cls, sys, pair=(0, 1), r_max=math.inf):
        c1, c2 = sys.centres[pair[0]], sys.centres[pair[1]]
        e = c1 - c2
        n = math.hypot(e[0], e[1])
        if n == 0:
            raise ValidationError("section needs two distinct centres")
        return cls(np.array(c1, float), e / n, float(r_max))

    @property
    def normal(self):
        # crossing along +normal is counter-clockwise about the base point
        return np.array([-self.direction[1], self.direction[0]])

    def crossings(self, times, states, eps_geom=EPS_GEOM):
        """Symbols of the transversal crossings along a sampled trajectory.

        Between samples the path is the cubic Hermite interpolant of positions
        and velocities, which is what locates each crossing.
        """
        X, U = states[:, :2] - self.base, states[:, 2:]
        nrm, e = self.normal, self.direction
        a, da = X @ nrm, U @ nrm
        out = []
        for j in np.nonzero(np.sign(a[:-1]) * np.sign(a[1:]) <= 0)[0]:
            if a[j] == 0 and j > 0:
                continue  # counted on the previous interval
            dt = times[j + 1] - times[j]
            if dt <= 0:
                continue

            def herm(s, j=j, dt=dt):
                p0, p1, m0, m1 = a[j], a[j + 1], da[j] * dt, da[j + 1] * dt
                return ((2 * s**3 - 3 * s**2 + 1) * p0 + (s**3 - 2 * s**2 + s) * m0
                        + (-2 * s**3 + 3 * s**2) * p1 + (s**3 - s**2) * m1)
            s = 0.0 if a[j] == 0 else (1.0 if a[j + 1] == 0 else brentq(herm, 0.0, 1.0, xtol=1e-15))
            x = (1 - s) * X[j] + s * X[j + 1]
            u = (1 - s) * U[j] + s * U[j + 1]
            along = float(x @ e)
            if along <= 0 or along > self.length:
                continue
            un = float(u @ nrm)
            if abs(un) < eps_geom * max(1.0, math.hypot(*u)):
                raise AmbiguousClass("tangential crossing of the section ray")
            out.append(0 if un > 0 else 1)
        return out


@dataclass
class Itinerary:
    """Symbols before (negative indices) and after the origin section point.

    ``segments`` lists the symbols contributed by each inter-bounce segment,
    keyed by segment index (0 is the segment leaving the origin point).
    """

    forward: list = field(default_factory=list)
    backward: list = field(default_factory=list)  # nearest to the origin first
    escaped_forward: bool = False
    escaped_backward: bool = False
    segments: dict = field(default_factory=dict)

    @property
    def symbols(self):
        return tuple(reversed(self.backward)) + tuple(self.forward)

    @property
    def origin(self):
        return len(self.backward)

    def __str__(self):
        b = "".join(map(str, reversed(self.backward)))
        f = "".join(map(str, self.forward))
        return ("<" if self.escaped_backward else "") + b + "." + f + (">" if self.escaped_forward else "")


def itinerary(sys, wall, p, n_fwd, n_bwd=0, opts=DEFAULT_OPTIONS, pair=(0, 1)):
    """Itinerary of the section point p over n_fwd forward and n_bwd backward bounces."""
    if n_fwd < 0 or n_bwd < 0:
        raise ValidationError("iteration counts must be nonnegative")
    p.validate(sys, wall, tol=1e-8)
    sigma = SectionCurve.for_system(sys, pair, escape_radius(sys, p.h, wall))
    it = Itinerary()

    def run(q, n, sign):
        for j in range(n):
            nxt, seg = billiard_step(sys, wall, q, opts)
            sym = sigma.crossings(seg.times, seg.states)
            if sign < 0:
                sym = [1 - c for c in reversed(sym)]
            it.segments[j if sign > 0 else -j - 1] = tuple(sym)
            # crossings made before an escape or collision still count
            (it.forward if sign > 0 else it.backward).extend(sym if sign > 0 else sym[::-1])
            if not isinstance(nxt, SectionPoint):
                return True
            q = nxt
        return False

    it.escaped_forward = run(p, n_fwd, 1)
    it.escaped_backward = run(reverse(p, wall), n_bwd, -1)
    return it


def _is_window_of_periodic(symbols, word):
    m = len(word)
    if m == 0:
        return len(symbols) == 0
    return any(all(symbols[i] == word[(i + sh) % m] for i in range(len(symbols)))
               for sh in range(m))


TIGHT = IntegratorOptions(rtol=1e-13, atol=1e-15)


def verify_semiconjugacy(orbit, expected, sys, wall, n_periods=1, opts=TIGHT):
    """Itinerary of the orbit's first bounce against the periodic word ``expected``.

    True iff the symbols over n_periods periods in each time direction read a
    window of expected^Z, and the itinerary of the image point is the shift of
    the original one on their common window. Periodic minimizers are hyperbolic,
    so errors grow by a large factor per bounce (about 1e5 for (2,-2) near the
    pair) and long windows are out of reach in double precision.
    """
    expected = tuple(int(c) for c in expected)
    n = n_periods * orbit.r
    try:
        p = orbit.section_point(0)
        it = itinerary(sys, wall, p, n, n, opts)
        if it.escaped_forward or it.escaped_backward:
            return False
        if not _is_window_of_periodic(it.symbols, expected):
            return False
        img, _ = billiard_step(sys, wall, p, opts)
        if not isinstance(img, SectionPoint):
            return False
        it1 = itinerary(sys, wall, img, max(n - 1, 1), 1, opts)
    except BilliardError:
        return False
    return shift_equivariant(it, it1)


def shift_equivariant(it, it1):
    """Whether it1 (itinerary of the image point) is the shift of it by the first segment."""
    k = len(it.segments.get(0, ()))
    a = it.symbols
    b = it1.symbols
    # position of the image origin inside it's symbol sequence
    off = it.origin + k - it1.origin
    lo, hi = max(0, -off), min(len(b), len(a) - off)
    if hi - lo <= 0:
        return False
    return all(b[i] == a[i + off] for i in range(lo, hi))


@dataclass(frozen=True)
class SubshiftSpec:
    mode: str = "full"  # "full" | "min-block"
    k0: int = 1
    boundary_exempt: bool = True

    def __post_init__(self):
        if self.mode not in ("full", "min-block"):
            raise ValidationError(f"unknown subshift mode {self.mode!r}")
        if self.mode == "min-block" and int(self.k0) < 1:
            raise ValidationError("k0 must be at least 1")


def blocks(word):
    """Lengths of the maximal constant blocks of word."""
    out = []
    for i, c in enumerate(word):
        if i and c == word[i - 1]:
            out[-1] += 1
        else:
            out.append(1)
    return out


def subshift_member(word, spec):
    if spec.mode == "full":
        return True
    b = blocks(tuple(word))
    if spec.boundary_exempt:
        b = b[1:-1]
    return all(n >= spec.k0 for n in b)


def estimate_k0(params, wall, opts=None, k_max=8):
    """Smallest k for which the (k,-k) and (k+1,-k-1) alternating periodic orbits
    exist, stay inside the half-plane and reflect inside the non-escaping cone.

    A heuristic for the threshold of the alternating construction.
    """
    from .twocentre import is_admissible
    from .variational import DEFAULT_MIN, NoConvergence, ClassCollapse, periodic_orbit
    opts = opts or DEFAULT_MIN
    rep = is_admissible(wall, params)
    if not rep.admissible:
        raise NotFound("wall is not admissible")
    sys = params.system()

    def ok(k):
        try:
            o = periodic_orbit(sys, params.h, wall, (k, -k), opts, mode="alternating")
        except (WallTooClose, NoConvergence, ClassCollapse):
            return False
        return all(b["in_cone"] for b in o.reflection["bounces"]) and \
            o.reflection["max_residual"] <= 1e-6
    prev = ok(1)
    for k in range(1, k_max + 1):
        nxt = ok(k + 1)
        if prev and nxt:
            return k
        prev = nxt
    raise NotFound(f"no k <= {k_max} passes the construction checks")
