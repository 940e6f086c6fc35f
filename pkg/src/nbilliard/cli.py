"""Command-line front end: ``nbilliard COMMAND CONFIG [--out DIR]``.

The config is an INI file with sections [system], [wall], [run] and an
optional [tolerances]. Every run writes CSV data, an SVG figure where one
makes sense, and manifest.json recording the normalized inputs, tolerances,
results and library versions. Failures write error.json and exit with the
error's code (2 bad input, 3 numerical failure, 4 hypothesis violated).
"""
import argparse
import configparser
import json
import math
import os
import platform
import sys as _sys
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dynamics import (IntegratorOptions, SectionPoint, atomic_write, billiard_step,
                       escape_radius, write_csv)
from .errors import BilliardError, ParseError, ValidationError
from .potential import CentreSystem, Wall, convexity_radius
from .svg import Figure

COLOUR_TRAJ = "#1f77b4"
COMMANDS = ("simulate", "map", "minimize", "periodic", "shadow", "spiral", "admissible",
            "itinerary", "report")

# key -> (kind, default); None marks a required key
SCHEMA = {
    "system": {
        "centres": ("pairs", "1 0; -1 0"),
        "masses": ("floats", None),
        "exponents": ("floats", ""),
        "h": ("float", None),
    },
    "wall": {
        "angle": ("float", "0.0"),
        "d": ("float", None),
    },
    "run": {
        "s": ("float", "0.0"),
        "angle": ("float", repr(math.pi / 2)),
        "bounces": ("int", "10"),
        "x": ("float", "0.0"),
        "y": ("float", "0.0"),
        "k": ("int", "1"),
        "free": ("bool", "false"),
        "seq": ("ints", "1 -1"),
        "mode": ("str", "perturbative"),
        "k0": ("int", "1"),
        "window": ("ints", "1 -1 1"),
        "pads": ("ints", "2 4 6"),
        "theta0": ("float", "0.0"),
        "f_end": ("float", "1e-3"),
        "n_fwd": ("int", "4"),
        "n_bwd": ("int", "0"),
        "pair": ("ints", "0 1"),
        "jitter": ("float", "0.0"),
        "seed": ("int", "0"),
    },
    "tolerances": {
        "rtol": ("float", "1e-10"),
        "atol": ("float", "1e-12"),
        "eps_coll": ("float", "1e-06"),
        "gtol": ("float", "1e-08"),
        "bvp_tol": ("float", "1e-09"),
        "max_iter": ("int", "600"),
        "nodes_per_turn": ("int", "64"),
        "min_nodes": ("int", "128"),
    },
}


def _convert(kind, text):
    text = text.strip()
    if kind == "float":
        return float(text)
    if kind == "int":
        return int(text)
    if kind == "str":
        return text
    if kind == "bool":
        low = text.lower()
        if low in configparser.ConfigParser.BOOLEAN_STATES:
            return configparser.ConfigParser.BOOLEAN_STATES[low]
        raise ValueError(f"not a boolean: {text!r}")
    if kind == "floats":
        return tuple(float(t) for t in text.replace(",", " ").split())
    if kind == "ints":
        return tuple(int(t) for t in text.replace(",", " ").split())
    if kind == "pairs":
        out = []
        for chunk in text.split(";"):
            if chunk.strip():
                v = [float(t) for t in chunk.replace(",", " ").split()]
                if len(v) != 2:
                    raise ValueError(f"expected two coordinates, got {chunk.strip()!r}")
                out.append(tuple(v))
        return tuple(out)
    raise AssertionError(kind)


def _format(kind, value):
    if kind == "float":
        return repr(float(value))
    if kind in ("int", "str"):
        return str(value)
    if kind == "bool":
        return "true" if value else "false"
    if kind == "floats":
        return " ".join(repr(float(v)) for v in value)
    if kind == "ints":
        return " ".join(str(int(v)) for v in value)
    return "; ".join(f"{float(a)!r} {float(b)!r}" for a, b in value)


def _line_of(text, section, key=None):
    cur = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1].strip()
            if key is None and cur == section:
                return n
        elif key is not None and cur == section and s.split("=")[0].split(":")[0].strip().lower() == key:
            return n
    return None


@dataclass
class ExperimentConfig:
    values: dict
    system: CentreSystem = field(repr=False)
    wall: Wall = field(repr=False)

    @property
    def h(self):
        return self.values["system"]["h"]

    @property
    def run(self):
        return self.values["run"]

    @property
    def tol(self):
        return self.values["tolerances"]

    def integrator(self):
        return IntegratorOptions(rtol=self.tol["rtol"], atol=self.tol["atol"],
                                 eps_coll=self.tol["eps_coll"])

    def minimizer(self):
        from .variational import MinimizerOptions
        return MinimizerOptions(nodes_per_turn=self.tol["nodes_per_turn"],
                                min_nodes=self.tol["min_nodes"], gtol=self.tol["gtol"],
                                max_iter=self.tol["max_iter"], eps_coll=self.tol["eps_coll"],
                                bvp_tol=self.tol["bvp_tol"], pair=tuple(self.run["pair"]),
                                jitter=self.run["jitter"], seed=self.run["seed"])


def parse_config(text):
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ParseError("text before the first [section] header", e.lineno)
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as e:
        raise ParseError(e.message.split(": ", 1)[-1] if hasattr(e, "message") else str(e),
                         getattr(e, "lineno", None))
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ParseError("malformed line (expected key = value)", line)
    values = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ParseError(f"unknown section [{sec}]", _line_of(text, sec))
    for sec, keys in SCHEMA.items():
        got = cp[sec] if cp.has_section(sec) else {}
        for key in got:
            if key not in keys:
                raise ParseError(f"unknown key {key!r} in [{sec}]", _line_of(text, sec, key))
        out = {}
        for key, (kind, default) in keys.items():
            if key in got:
                raw = got[key]
            elif default is None:
                raise ParseError(f"missing required key {key!r} in [{sec}]",
                                 _line_of(text, sec))
            else:
                raw = default
            try:
                out[key] = _convert(kind, raw)
            except ValueError as e:
                raise ParseError(f"bad value for {sec}.{key}: {e}", _line_of(text, sec, key))
        values[sec] = out
    s = values["system"]
    exps = s["exponents"] or tuple(1.0 for _ in s["masses"])
    s["exponents"] = exps
    if not (len(s["centres"]) == len(s["masses"]) == len(exps)):
        raise ValidationError("centres, masses and exponents must have equal lengths")
    system = CentreSystem(np.array(s["centres"], float), np.array(s["masses"], float),
                          np.array(exps, float))
    if not s["h"] > 0:
        raise ValidationError("energy h must be positive")
    w = values["wall"]
    wall = Wall.from_angle(w["angle"], w["d"]).validate(system)
    return ExperimentConfig(values, system, wall)


def serialize(cfg):
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        for key, (kind, _) in keys.items():
            lines.append(f"{key} = {_format(kind, cfg.values[sec][key])}")
        lines.append("")
    return "\n".join(lines)


# --- commands ----------------------------------------------------------------

def _versions():
    import scipy
    try:
        from importlib.metadata import version
        own = version("artifact")
    except Exception:
        own = "unknown"
    return {"nbilliard": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "backend": _kernels.BACKEND}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


class _Run:
    def __init__(self, cfg, out):
        self.cfg, self.out = cfg, out
        self.files, self.results = [], {}

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)

    def csv(self, name, header, rows):
        write_csv(self.path(name), header, rows)

    def svg(self, name, fig):
        atomic_write(self.path(name), fig.render())


def _start_point(cfg):
    r = cfg.run
    return SectionPoint.from_angle(cfg.system, cfg.wall, cfg.h, r["s"], r["angle"])


def _figure_base(cfg, title):
    fig = Figure(title=title)
    fig.wall(cfg.wall)
    fig.points(cfg.system.centres, "#000000", 4.0)
    return fig


def cmd_simulate(run):
    cfg = run.cfg
    p = _start_point(cfg)
    rows, bounces = [], []
    t0 = 0.0
    fig = _figure_base(cfg, "trajectory")
    terminal = "wall"
    for j in range(cfg.run["bounces"]):
        nxt, seg = billiard_step(cfg.system, cfg.wall, p, cfg.integrator())
        rows.extend(np.column_stack([seg.times + t0, seg.states]))
        fig.polyline(seg.positions, COLOUR_TRAJ, 1.0)
        t0 += seg.times[-1]
        terminal = seg.terminal
        if not isinstance(nxt, SectionPoint):
            break
        bounces.append((j + 1, t0, nxt.s, nxt.angle(cfg.wall)))
        p = nxt
    run.csv("trajectory.csv", ["t", "x1", "x2", "u1", "u2"], rows)
    run.csv("bounces.csv", ["bounce", "t", "s", "angle"], bounces)
    run.svg("trajectory.svg", fig)
    run.results.update(n_bounces=len(bounces), terminal=terminal, duration=t0)


def cmd_map(run):
    cfg = run.cfg
    p = _start_point(cfg)
    rows = [(0, p.s, p.angle(cfg.wall))]
    escaped = False
    for j in range(cfg.run["bounces"]):
        nxt, _ = billiard_step(cfg.system, cfg.wall, p, cfg.integrator(), record=False)
        if not isinstance(nxt, SectionPoint):
            escaped = True
            break
        p = nxt
        rows.append((j + 1, p.s, p.angle(cfg.wall)))
    run.csv("section.csv", ["n", "s", "angle"], rows)
    fig = Figure(title="section points (s, angle)")
    fig.points(np.array([(r[1], r[2]) for r in rows]), COLOUR_TRAJ, 2.5)
    run.svg("section.svg", fig)
    run.results.update(n_points=len(rows), escaped=escaped)


def _path_rows(path):
    pts = path.states[:, :2] if path.polished else path.nodes
    return [(i, x, y) for i, (x, y) in enumerate(pts)]


def cmd_minimize(run):
    from .variational import minimize_arc, minimize_free, orthogonality_residual
    cfg = run.cfg
    r = cfg.run
    opts = cfg.minimizer()
    if r["free"]:
        path = minimize_free(cfg.system, cfg.h, cfg.wall, r["k"], opts)
        run.results["orthogonality"] = orthogonality_residual(path, cfg.wall)
    else:
        path = minimize_arc(cfg.system, cfg.h, cfg.wall, r["x"], r["y"], r["k"], opts)
    run.csv("path.csv", ["index", "x1", "x2"], _path_rows(path))
    if path.polished:
        run.csv("arc.csv", ["t", "x1", "x2", "u1", "u2"], np.column_stack([path.times, path.states]))
    fig = _figure_base(cfg, f"minimizer k={r['k']}")
    fig.polyline(path.states[:, :2] if path.polished else path.nodes, COLOUR_TRAJ)
    run.svg("path.svg", fig)
    run.results.update(k=r["k"], jm_length=path.length, discrete_length=path.discrete_length,
                       grad_norm=path.grad_norm, iterations=path.iterations,
                       shooting_defect=path.shooting_defect,
                       collision_margin=path.collision_margin,
                       word=[list(l) for l in path.class_word.letters])


def _orbit_outputs(run, orbit, stem):
    cfg = run.cfg
    rows = []
    t0 = 0.0
    fig = _figure_base(cfg, stem)
    for j, a in enumerate(orbit.arcs):
        rows.extend((j, t + t0, *st) for t, st in zip(a.times, a.states))
        t0 += a.duration
        fig.polyline(a.states[:, :2])
    fig.points(np.array([a.x_start for a in orbit.arcs]), "#000000", 3.0)
    run.csv(f"{stem}.csv", ["arc", "t", "x1", "x2", "u1", "u2"], rows)
    refl = orbit.reflection or {"bounces": []}
    run.csv(f"{stem}_bounces.csv", ["bounce", "s", "residual", "tangential", "in_cone"],
            [(b["bounce"], b["s"], b["residual"], b["tangential"],
              "" if b["in_cone"] is None else str(b["in_cone"]).lower()) for b in refl["bounces"]])
    run.svg(f"{stem}.svg", fig)


def cmd_periodic(run):
    from .variational import periodic_orbit
    cfg = run.cfg
    r = cfg.run
    orbit = periodic_orbit(cfg.system, cfg.h, cfg.wall, tuple(r["seq"]), cfg.minimizer(),
                           mode=r["mode"], k0=r["k0"] if r["mode"] == "alternating" else None)
    _orbit_outputs(run, orbit, "orbit")
    run.results.update(seq=list(r["seq"]), bounce_points=orbit.bounce_points,
                       total_length=orbit.total_length,
                       max_reflection_residual=orbit.reflection["max_residual"],
                       containment_margin=orbit.containment_margin,
                       shooting_defect=max(a.shooting_defect for a in orbit.arcs))


def cmd_shadow(run):
    from .variational import shadow_convergence
    cfg = run.cfg
    r = cfg.run
    dist, res = shadow_convergence(cfg.system, cfg.h, cfg.wall, tuple(r["window"]),
                                   tuple(r["pads"]), cfg.minimizer())
    run.csv("shadow.csv", ["pad_a", "pad_b", "distance"], [(a, b, d) for (a, b), d in dist])
    last = res[-1]
    fig = _figure_base(cfg, f"window {tuple(r['window'])}")
    rows = []
    for j, a in enumerate(last.central):
        fig.polyline(a.states[:, :2])
        rows.extend((j, t, *st) for t, st in zip(a.times, a.states))
    run.csv("central.csv", ["arc", "t", "x1", "x2", "u1", "u2"], rows)
    run.svg("shadow.svg", fig)
    run.results.update(window=list(r["window"]), distances=[[a, b, d] for (a, b), d in dist],
                       decreasing=all(d1 > d2 for (_, d1), (_, d2) in zip(dist[:-1], dist[1:])))


def _spiral_samples(sp, f_end, n=1500):
    """Positions/velocities/time along a spiral from far away down to ellipse_f = f_end."""
    tau_hi = sp.tau_of_f(f_end)
    # geometric spacing near the far end, where the spiral comes in from infinity
    q = np.linspace(0.0, 12.0, n // 3)
    far = sp.tau_min + np.exp(-q)[::-1]
    near = np.linspace(far[-1], tau_hi, n - len(far) + 1)[1:]
    taus = np.concatenate([far[far < near[0]], near])
    X = sp.params.from_frame(sp.point_tau(taus))
    U = sp.params.from_frame(sp.velocity_tau(taus))
    t = np.array([sp.time_of_tau(x) for x in taus])
    return t, X, U


def _two_centre(cfg):
    from .twocentre import TwoCentreParams
    return TwoCentreParams.from_system(cfg.system, cfg.h)


def cmd_spiral(run):
    from .twocentre import SpiralSolution
    cfg = run.cfg
    params = _two_centre(cfg)
    fig = Figure(title="separatrix spirals")
    fig.points(cfg.system.centres, "#000000", 4.0)
    rows = []
    for sign in (1, -1):
        sp = SpiralSolution(params, cfg.run["theta0"], sign)
        t, X, U = _spiral_samples(sp, cfg.run["f_end"])
        keep = np.hypot(X[:, 0], X[:, 1]) < 12.0
        rows.extend((sign, *row) for row in np.column_stack([t, X, U]))
        fig.polyline(X[keep], "#1f77b4" if sign > 0 else "#d62728")
    run.csv("spiral.csv", ["sign", "t", "x1", "x2", "u1", "u2"], rows)
    run.svg("spiral.svg", fig)
    run.results.update(theta0=cfg.run["theta0"], m1=params.m1, m2=params.m2, h=params.h)


def cmd_admissible(run):
    from .twocentre import is_admissible
    cfg = run.cfg
    params = _two_centre(cfg)
    rep = is_admissible(cfg.wall, params)
    fig = _figure_base(cfg, "admissibility")
    rows = []
    for sign, o in rep.feet.items():
        sp = o.spiral
        tau_end = sp.tau_of_f(0.25 * rep.f_min)
        taus = np.linspace(o.tau0, max(tau_end, o.tau0 + 1e-6), 1500)
        X = params.from_frame(sp.point_tau(taus))
        fig.polyline(X, "#1f77b4" if sign > 0 else "#d62728")
        rows.extend((sign, tau, x, y) for tau, (x, y) in zip(taus, X))
    run.csv("spirals.csv", ["sign", "tau", "x1", "x2"], rows)
    run.svg("admissible.svg", fig)
    verdict = "admissible" if rep.admissible else "not admissible"
    run.results.update(verdict=verdict, margin=rep.margin,
                       margins={str(k): v for k, v in rep.margins.items()},
                       tail_gap=rep.tail_gap)
    print(verdict)


def cmd_itinerary(run):
    from .symbolic import itinerary
    cfg = run.cfg
    it = itinerary(cfg.system, cfg.wall, _start_point(cfg), cfg.run["n_fwd"], cfg.run["n_bwd"],
                   cfg.integrator(), tuple(cfg.run["pair"]))
    rows = [(i - it.origin, c) for i, c in enumerate(it.symbols)]
    run.csv("itinerary.csv", ["index", "symbol"], rows)
    run.results.update(itinerary=str(it), escaped_forward=it.escaped_forward,
                       escaped_backward=it.escaped_backward)
    print(str(it))


def cmd_report(run):
    cfg = run.cfg
    sys_, h, wall = cfg.system, cfg.h, cfg.wall
    R0 = convexity_radius(sys_, h)
    rows = [("convexity_radius", R0), ("escape_radius", escape_radius(sys_, h, wall)),
            ("wall_height_of_barycentre", float(wall.height(sys_.barycentre)))]
    try:
        params = _two_centre(cfg)
    except ValidationError:
        params = None
    if params is not None:
        from .twocentre import closed_form_report, is_admissible
        cf = closed_form_report(params)
        rows += [("closed_form_xi_error", min(cf["xi"][1].values())),
                 ("closed_form_eta_error", min(cf["eta"][1].values()))]
        try:
            rep = is_admissible(wall, params)
            rows += [("admissible", float(rep.admissible)), ("admissibility_margin", rep.margin)]
        except BilliardError as e:
            rows.append(("admissibility_error", type(e).__name__))
    if sys_.n >= 2:
        from .variational import estimate_d0
        try:
            est = estimate_d0(sys_, h, wall.angle, cfg.minimizer())
            rows.append(("d0_estimate", est.d0))
        except BilliardError as e:
            rows.append(("d0_error", type(e).__name__))
    run.csv("report.csv", ["quantity", "value"],
            [(k, v if isinstance(v, str) else repr(float(v))) for k, v in rows])
    run.results.update({k: v for k, v in rows})


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def run_command(name, cfg, out):
    """Run a command and write its artifacts plus manifest.json into ``out``."""
    if name not in HANDLERS:
        raise ValidationError(f"unknown command {name!r}")
    os.makedirs(out, exist_ok=True)
    run = _Run(cfg, out)
    HANDLERS[name](run)
    manifest = {"command": name, "config": serialize(cfg), "inputs": cfg.values,
                "tolerances": cfg.tol, "results": run.results, "artifacts": run.files,
                "versions": _versions()}
    atomic_write(os.path.join(out, "manifest.json"),
                 json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return run.results


def main(argv=None):
    ap = argparse.ArgumentParser(prog="nbilliard", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help="INI configuration file")
    ap.add_argument("--out", default=None, help="artifact directory (default: out/COMMAND)")
    args = ap.parse_args(argv)
    out = args.out or os.path.join("out", args.command)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        cfg = parse_config(text)
        run_command(args.command, cfg, out)
    except (BilliardError, OSError) as e:
        code = getattr(e, "exit_code", 2)
        record = {"error": type(e).__name__, "message": str(e), "exit_code": code}
        try:
            os.makedirs(out, exist_ok=True)
            atomic_write(os.path.join(out, "error.json"), json.dumps(record, indent=2) + "\n")
        except OSError:
            pass
        print(json.dumps(record), file=_sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
