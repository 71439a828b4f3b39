"""Command line batch runner ``lmcf``.

Each subcommand builds a configuration from defaults, an optional JSON
config file and inline flags (flags win), validates it, runs its probes
and writes ``report.json``, one or more CSV files and ``summary.txt`` into
the output directory.  Exit status: 0 success, 1 invalid configuration,
2 numerical failure, 3 an asserted invariant failed (files still written).
"""

import argparse
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from lmcf import __version__, ambient, curves, diagnostics, io, solitons
from lmcf import surface as sf
from lmcf.errors import DomainError, LmcfError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3

FAMILIES = ("plane", "grim-reaper", "jlt", "product", "expander")
PRESETS = ("circle", "grim-reaper", "example-1.1", "expander")

DEFAULTS = {
    "flow-curve": {
        "preset": "example-1.1",
        "radius": 1.0,
        "n": None,
        "t_end": None,
        "record_every": 20,
        "blowup": curves.BLOWUP_CURVATURE,
        "tolerance": None,
    },
    "make-soliton": {"family": "jlt", "alpha": 0.0, "shoot": 1.0, "t": 0.0, "window": None, "tolerance": 1e-3},
    "verify": {"family": "grim-reaper", "alpha": 0.0, "shoot": 1.0, "window": None, "tolerance": 1e-3, "min_ratio": 3.5},
    "blowdown": {
        "family": "jlt",
        "alpha": 0.0,
        "shoot": 1.0,
        "scales": list(diagnostics.DEFAULT_SCALES),
        "s_values": list(diagnostics.DEFAULT_S_VALUES),
        "radius": 3.0,
        "angle_tolerance": 2e-2,
        "plane_tolerance": 1e-2,
    },
    "density": {
        "family": "grim-reaper",
        "alpha": 0.0,
        "shoot": 1.0,
        "x0": [0.0, 0.0, 0.0, 0.0],
        "T": 1.0,
        "t_values": [-1.0, -0.75, -0.5, -0.25, 0.0],
        "window": None,
        "tolerance": 1e-8,
        "slack": 1e-4,
    },
    "levelsets": {"family": "grim-reaper", "alpha": 0.0, "shoot": 1.0, "window": None, "n_levels": 200, "tolerance": 2e-2},
    "barrier": {
        "family": "grim-reaper",
        "shoot": 1.0,
        "alpha": 0.3,
        "delta": 0.0,
        "B": 1.0,
        "r_min": 0.1,
        "window": None,
        "tolerance": 5e-2,
    },
}

DEFAULT_H = {
    "flow-curve": 0.02,
    "make-soliton": 0.02,
    "verify": 0.01,
    "blowdown": 0.05,
    "density": 0.05,
    "levelsets": 0.01,
    "barrier": 0.01,
}

# density windows must reach past the truncation radius
DENSITY_WINDOWS = {
    "grim_reaper": {"sigma": [-14.0, 14.0], "x2": [-14.0, 14.0]},
    "plane": {"u": [-10.0, 10.0], "v": [-10.0, 10.0]},
    "jlt_translator": {"x": [-6.0, 6.0], "y": [-8.0, 8.0]},
    "expander": {"u": [-10.0, 10.0], "sigma": [-10.0, 10.0]},
    "product": {"x2": [-10.0, 10.0]},
}


class ValidationError(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, probe, error):
        super().__init__(f"{probe}: {type(error).__name__}: {error}")
        self.probe = probe


# -- parsing helpers -----------------------------------------------------------------

_SCI = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+)[eE]([-+]?[0-9]*\.?[0-9]+)\s*$")


def parse_number(tok):
    """Float parser that also accepts fractional exponents such as ``1e-1.5``."""
    if isinstance(tok, (int, float)):
        return float(tok)
    try:
        return float(tok)
    except ValueError:
        m = _SCI.match(tok)
        if not m:
            raise ValidationError(f"cannot parse number {tok!r}")
        return float(m.group(1)) * 10.0 ** float(m.group(2))


def parse_list(value):
    if isinstance(value, (list, tuple)):
        return [parse_number(v) for v in value]
    return [parse_number(v) for v in str(value).split(",") if v.strip()]


def parse_window(value):
    if value is None or isinstance(value, dict):
        return value
    try:
        w = json.loads(value)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"--window must be a JSON object: {exc}")
    if not isinstance(w, dict):
        raise ValidationError("--window must be a JSON object")
    return w


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not argparse's exit 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


LIST_OPTIONS = ("--scales", "--s-values", "--t-values", "--x0")
_NEGATIVE = re.compile(r"^-[0-9.]")


def join_negative_lists(argv):
    """Turn ``--t-values -1,0`` into ``--t-values=-1,0`` so argparse does not read a flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in LIST_OPTIONS:
            nxt = next(it, None)
            if nxt is not None and _NEGATIVE.match(nxt):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(tok)
    return out


def build_parser():
    parser = _Parser(prog="lmcf", description="Numerical lab for translating solutions of Lagrangian mean curvature flow.")
    parser.add_argument("--version", action="version", version=f"lmcf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON config file (flags override it)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--h", type=float, help="grid spacing")
        p.add_argument("--seed", type=int, help="seed for randomized sampling (default 42)")
        p.add_argument("--tolerance", type=float)

    def family(p):
        p.add_argument("--family", choices=FAMILIES)
        p.add_argument("--alpha", type=float, help="plane angle (plane family) or barrier exponent")
        p.add_argument("--shoot", type=float, help="expander shooting parameter")
        p.add_argument("--window", help='parameter window as JSON, e.g. \'{"y1": [-1.4, 1.4], "x2": [-1, 1]}\'')

    p = sub.add_parser("flow-curve", help="curve-shortening flow of a preset curve")
    common(p)
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--radius", type=float)
    p.add_argument("--n", type=int, help="number of curve points")
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--blowup", type=float, help="curvature halt threshold")

    p = sub.add_parser("make-soliton", help="sample a soliton family and write its patches")
    common(p)
    family(p)
    p.add_argument("--t", type=float, help="time (s for expanders)")

    p = sub.add_parser("verify", help="translator/expander identity residuals at h and h/2")
    common(p)
    family(p)
    p.add_argument("--min-ratio", dest="min_ratio", type=float)

    p = sub.add_parser("blowdown", help="blow-down limits and the static verdict")
    common(p)
    family(p)
    p.add_argument("--scales", help="comma-separated scales, e.g. 1e-1,1e-1.5,1e-2")
    p.add_argument("--s-values", dest="s_values", help="comma-separated times, e.g. -1,1")
    p.add_argument("--radius", type=float, help="detection radius")

    p = sub.add_parser("density", help="Gaussian density along the flow")
    common(p)
    family(p)
    p.add_argument("--x0", help="center as x1,y1,x2,y2")
    p.add_argument("--T", type=float)
    p.add_argument("--t-values", dest="t_values", help="comma-separated sample times")
    p.add_argument("--slack", type=float)

    p = sub.add_parser("levelsets", help="level sets of the Lagrangian angle and the coarea check")
    common(p)
    family(p)
    p.add_argument("--n-levels", dest="n_levels", type=int)

    p = sub.add_parser("barrier", help="barrier residual sign scan")
    common(p)
    family(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--B", type=float)
    p.add_argument("--r-min", dest="r_min", type=float)
    return parser


def resolve_config(args):
    """Defaults < config file < flags.  Returns the flat config dict."""
    cmd = args.command
    cfg = dict(DEFAULTS[cmd])
    cfg.update({"experiment": cmd, "h": DEFAULT_H[cmd], "seed": 42, "out": f"lmcf-{cmd}"})
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}")
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
        fam = data.pop("family", None)
        if isinstance(fam, dict):
            for k in ("alpha", "shoot", "window"):
                if k in fam:
                    data.setdefault(k, fam[k])
            fam = fam.get("kind")
        if fam is not None:
            data["family"] = {"grim_reaper": "grim-reaper", "jlt_translator": "jlt"}.get(fam, fam)
        grid = data.pop("grid", None)
        if isinstance(grid, dict):
            data.update(grid)
        probes = data.pop("probes", None)
        if isinstance(probes, dict):
            data.update(probes)
        unknown = set(data) - set(cfg)
        if unknown:
            raise ValidationError(f"unknown config keys for {cmd}: {sorted(unknown)}")
        cfg.update(data)
    for k, v in vars(args).items():
        if k in ("command", "config") or v is None:
            continue
        cfg[k] = v
    return validate(cmd, cfg)


def validate(cmd, cfg):
    """Type conversion and precondition checks, before any computation."""
    cfg["h"] = parse_number(cfg["h"])
    if not cfg["h"] > 0:
        raise ValidationError("h must be positive")
    cfg["seed"] = int(cfg["seed"])
    for key in ("tolerance", "slack", "angle_tolerance", "plane_tolerance", "min_ratio"):
        if cfg.get(key) is not None:
            cfg[key] = parse_number(cfg[key])
            if not cfg[key] > 0:
                raise ValidationError(f"{key} must be positive")
    if "family" in cfg and cfg["family"] not in FAMILIES:
        raise ValidationError(f"family must be one of {FAMILIES}")
    if "window" in cfg:
        cfg["window"] = parse_window(cfg["window"])
        if cfg["window"] is not None:
            for k, v in cfg["window"].items():
                if not (isinstance(v, (list, tuple)) and len(v) == 2 and parse_number(v[0]) < parse_number(v[1])):
                    raise ValidationError(f"window range {k} must be [lo, hi] with lo < hi")
            if cfg["family"] == "grim-reaper" and "y1" in cfg["window"]:
                lo, hi = cfg["window"]["y1"]
                if not (-math.pi / 2 < lo and hi < math.pi / 2):
                    raise ValidationError("grim reaper window needs -pi/2 < y1 < pi/2")
    if cfg.get("shoot") is not None and not parse_number(cfg["shoot"]) > 0:
        raise ValidationError("shoot must be positive")
    if cmd == "flow-curve":
        if cfg["preset"] not in PRESETS:
            raise ValidationError(f"preset must be one of {PRESETS}")
        if cfg["n"] is not None and int(cfg["n"]) < curves.MIN_POINTS:
            raise ValidationError(f"n must be at least {curves.MIN_POINTS}")
        if not parse_number(cfg["blowup"]) > 0 or int(cfg["record_every"]) < 1:
            raise ValidationError("blowup must be positive and record_every at least 1")
    if cmd == "blowdown":
        cfg["scales"] = parse_list(cfg["scales"])
        cfg["s_values"] = parse_list(cfg["s_values"])
        if not cfg["scales"] or min(cfg["scales"]) <= 0:
            raise ValidationError("scales must be positive")
        if not (min(cfg["s_values"]) <= 0 < max(cfg["s_values"])):
            raise ValidationError("s_values must include non-positive and positive entries")
        if cfg["family"] in ("product", "expander"):
            # expanders exist only for s > 0, but the probe needs non-positive times too
            raise ValidationError("blowdown supports the plane, grim-reaper and jlt families")
    if cmd == "density":
        cfg["x0"] = parse_list(cfg["x0"])
        cfg["t_values"] = sorted(parse_list(cfg["t_values"]))
        cfg["T"] = parse_number(cfg["T"])
        if len(cfg["x0"]) != 4:
            raise ValidationError("x0 needs four coordinates")
        if max(cfg["t_values"]) >= cfg["T"]:
            raise ValidationError("all sample times must lie below T")
        if cfg["family"] == "expander" and min(cfg["t_values"]) <= 0:
            raise ValidationError("expander times must be positive")
    if cmd == "barrier":
        if not parse_number(cfg["alpha"]) < 1.0 / 3.0:
            raise ValidationError("barrier needs alpha < 1/3")
        if cfg["family"] not in ("grim-reaper", "jlt"):
            raise ValidationError("barrier supports the translating families grim-reaper and jlt")
    if cmd == "verify" and cfg["family"] == "product":
        raise ValidationError("verify supports plane, grim-reaper, jlt and expander families")
    if cmd == "levelsets" and int(cfg["n_levels"]) < 2:
        raise ValidationError("n_levels must be at least 2")
    return cfg


# -- family construction --------------------------------------------------------------


def make_family(cfg, h):
    name = cfg["family"]
    if name == "plane":
        return solitons.make_plane(parse_number(cfg.get("alpha", 0.0)))
    if name == "grim-reaper":
        return solitons.make_grim_reaper()
    if name == "jlt":
        return solitons.make_jlt(shoot=parse_number(cfg["shoot"]), h=h)
    if name == "expander":
        return solitons.make_expander(shoot=parse_number(cfg["shoot"]), h=h)
    return solitons.make_product(curves.circle(1.0, 128), spec={"shape": "circle", "radius": 1.0, "n": 128})


def _run(probe, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except DomainError as exc:
        raise ValidationError(f"{probe}: {exc}")
    except (LmcfError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise NumericalFailure(probe, exc)


class Result:
    """Collects report entries, CSV files and invariant outcomes."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.report = {}
        self.files = {}
        self.invariants = []

    def check(self, name, passed, value, limit):
        self.invariants.append({"name": name, "passed": bool(passed), "value": value, "limit": limit})

    @property
    def ok(self):
        return all(i["passed"] for i in self.invariants)


# -- subcommands ---------------------------------------------------------------------


def _flow_table(rec):
    return {
        "time": rec.times,
        "length": rec.lengths,
        "max_curvature": rec.max_curvatures,
        "area": rec.areas,
    }


def cmd_flow_curve(cfg, res):
    preset, h = cfg["preset"], cfg["h"]
    blowup = parse_number(cfg["blowup"])
    every = int(cfg["record_every"])
    if preset == "circle":
        R = parse_number(cfg["radius"])
        n = int(cfg["n"] or 64)
        c = curves.circle(R, n)
        state = curves.CurveFlowState(c, blowup=blowup)
        rec = _run("flow", curves.run_flow, state, t_end=cfg["t_end"] or math.inf, record_every=every)
        T = rec.final.time
        err = abs(T - R * R / 2) / (R * R / 2)
        tol = cfg["tolerance"] or 1e-2
        res.report["halt_time"] = T
        res.report["extinction_exact"] = R * R / 2
        res.check("extinction_time_relative_error", rec.halted and err <= tol, err, tol)
        lengths = np.asarray(rec.lengths)
        res.check("length_nonincreasing", bool(np.all(np.diff(lengths) <= 1e-10)), float(np.max(np.diff(lengths), initial=0.0)), 1e-10)
    elif preset == "grim-reaper":
        t_end = cfg["t_end"] or 0.5
        c = curves.grim_reaper_profile(-1.4, 1.4, h)
        state = curves.CurveFlowState(c, end_velocity=lambda t, ends: np.array([[1.0, 0.0], [1.0, 0.0]]), blowup=blowup)
        rec = _run("flow", curves.run_flow, state, t_end=t_end, record_every=every, track_area=False)
        back = rec.final.curve.translated((-rec.final.time, 0.0))
        err = curves.hausdorff(back, c) / 2.8
        tol = cfg["tolerance"] or 2e-2
        res.report["translation_error_over_width"] = err
        res.check("self_translation_error", err <= tol, err, tol)
        res.files["curve_translated_back.csv"] = io.curves_to_csv(back)
    elif preset == "expander":
        w = _run("expander", curves.expander_curve, 1.0, 8.0, max(h, 0.02))
        ends = w.points[[0, -1]]
        state = curves.CurveFlowState(w.scaled(math.sqrt(2.0)), time=1.0, end_velocity=lambda t, e: ends / math.sqrt(2 * t), blowup=blowup)
        t_end = cfg["t_end"] or 1.2
        rec = _run("flow", curves.run_flow, state, t_end=t_end, record_every=every, track_area=False)
        target = w.scaled(math.sqrt(2 * t_end))
        err = curves.hausdorff(rec.final.curve, target) / target.diameter
        tol = cfg["tolerance"] or 2e-2
        res.report["hausdorff_over_diameter"] = err
        res.check("expander_scaling", err <= tol, err, tol)
        c = state.curve
    else:
        n = int(cfg["n"] or 200)
        c = curves.example_loop_curve(n=n)
        state = curves.CurveFlowState(curves.redistribute(c, 1.0), curvature_weight=1.0, blowup=blowup)
        c = state.curve
        rec = _run("flow", curves.run_flow, state, t_end=cfg["t_end"] or math.inf, record_every=every)
        areas = np.asarray(rec.areas)
        tol = cfg["tolerance"] or 1e-2
        with_loop = areas[areas > 0]
        ratio = float(with_loop[-1] / with_loop[0]) if len(with_loop) else math.nan
        res.report["loop_area_initial"] = float(areas[0])
        res.report["loop_area_final"] = float(with_loop[-1]) if len(with_loop) else 0.0
        res.report["halt_time"] = rec.final.time
        res.check("halted_at_blowup", rec.halted, rec.final.max_curvature, blowup)
        res.check("loop_area_monotone", bool(np.all(np.diff(with_loop) <= 0)), float(np.max(np.diff(with_loop), initial=-math.inf)), 0.0)
        res.check("loop_area_below_fraction", ratio < tol, ratio, tol)
    res.report["halted"] = rec.halted
    res.report["final_time"] = rec.final.time
    res.report["max_curvature"] = rec.final.max_curvature
    res.report["steps_recorded"] = len(rec.times)
    res.files["flow.csv"] = io.table_to_csv(_flow_table(rec))
    res.files["curve_initial.csv"] = io.curves_to_csv(c)
    res.files["curve_final.csv"] = io.curves_to_csv(rec.final.curve)


def _fields(p):
    th = sf.lagrangian_angle(p)
    return {
        "theta": th,
        "abs_H": ambient.norm(p.mean_curvature),
        "lagrangian_residual": sf.lagrangian_residual(p),
    }


def cmd_make_soliton(cfg, res):
    fam = make_family(cfg, cfg["h"])
    t = parse_number(cfg["t"])
    if fam.kind == "expander" and t <= 0:
        t = 0.5
    window = cfg["window"]
    ps = _run("make-soliton", fam.patches, t, window, cfg["h"])
    res.report["family"] = fam.descriptor(window)
    worst = 0.0
    summaries = []
    for k, p in enumerate(ps):
        fields = _run("fields", _fields, p)
        lag = float(np.abs(fields["lagrangian_residual"]).max())
        worst = max(worst, lag)
        summaries.append({"index": k, "shape": list(p.shape), "lagrangian_residual": lag, "area": sf.integrate(p, np.ones(p.shape))})
        res.files[f"patch_{k}.csv"] = io.patch_to_csv(p, fields)
    res.report["patches"] = summaries
    res.check("lagrangian_residual", worst <= cfg["tolerance"], worst, cfg["tolerance"])


def _verify_rows(fam, cfg, h):
    if fam.kind == "expander":
        rows = {}
        for s in (0.5, 1.0, 2.0):
            vals = []
            for hh in (h, h / 2):
                f = solitons.make_expander(shoot=fam.params["shoot"], h=hh)
                ps = f.patches(s, cfg["window"], hh)
                vals.append(max(float(diagnostics.expander_fields([p], s, math.inf)[1]) for p in ps))
            rows[f"expander_s{s:g}"] = vals
        return rows
    tables = []
    for hh in (h, h / 2):
        f = make_family(cfg, hh)
        tables.append(diagnostics.residual_table(f.patch(0.0, cfg["window"], hh)))
    return {k: [tables[0][k], tables[1][k]] for k in tables[0]}


def cmd_verify(cfg, res):
    h = cfg["h"]
    fam = make_family(cfg, h)
    rows = _run("verify", _verify_rows, fam, cfg, h)
    floor = 1e-10
    table = {"identity": [], "residual_h": [], "residual_h2": [], "ratio": [], "constant": []}
    out = {}
    for name, (a, b) in rows.items():
        ratio = a / b if b > 0 else math.inf
        table["identity"].append(name)
        table["residual_h"].append(a)
        table["residual_h2"].append(b)
        table["ratio"].append(ratio)
        table["constant"].append(a / h**2)
        out[name] = {"residual_h": a, "residual_h2": b, "ratio": ratio, "constant": a / h**2}
        res.check(f"{name}_max", a <= cfg["tolerance"], a, cfg["tolerance"])
        if a > floor:
            res.check(f"{name}_ratio", ratio >= cfg["min_ratio"], ratio, cfg["min_ratio"])
    res.report["family"] = fam.descriptor(cfg["window"])
    res.report["h"] = [h, h / 2]
    res.report["residuals"] = out
    res.files["residuals.csv"] = io.table_to_csv(table)


def cmd_blowdown(cfg, res):
    fam = make_family(cfg, 0.01)
    probe = _run(
        "static_probe",
        diagnostics.static_probe,
        fam,
        scales=cfg["scales"],
        s_values=cfg["s_values"],
        R=parse_number(cfg["radius"]),
        h=cfg["h"],
        plane_tol=cfg["plane_tolerance"],
        angle_tol=cfg["angle_tolerance"],
    )
    res.report["family"] = fam.descriptor()
    res.report.update(probe.to_dict())
    detected = [e.configuration for e in probe.entries if e.configuration is not None]
    res.report["planes"] = detected[-1].to_dict()["planes"] if detected else []
    table = {"scale": [], "s": [], "tag": [], "n_planes": [], "angles": [], "multiplicities": [], "max_H": []}
    for e in probe.entries:
        table["scale"].append(e.scale)
        table["s"].append(e.s)
        table["tag"].append(e.tag)
        conf = e.configuration
        table["n_planes"].append(len(conf.planes) if conf else 0)
        table["angles"].append(" ".join(io.fmt(a) for a in conf.angles) if conf else "")
        table["multiplicities"].append(" ".join(str(m) for m in conf.multiplicities) if conf else "")
        table["max_H"].append(e.max_H)
    res.files["blowdown.csv"] = io.table_to_csv(table)


def cmd_density(cfg, res):
    fam = make_family(cfg, cfg["h"])
    window = cfg["window"] or DENSITY_WINDOWS[fam.kind]
    if fam.kind == "grim_reaper":
        fam = solitons.make_grim_reaper("arclength" if "sigma" in window else "y")
    x0 = np.asarray(cfg["x0"], float)
    rows = {"t": [], "density": [], "tail_bound": [], "truncated": []}
    reports = []
    for t in cfg["t_values"]:
        ps = _run("density", fam.patches, t, window, cfg["h"])
        rep = _run("density", diagnostics.gaussian_density, ps, x0, cfg["T"], t, tol=cfg["tolerance"])
        reports.append(rep.to_dict())
        rows["t"].append(t)
        rows["density"].append(rep.value)
        rows["tail_bound"].append(rep.tail_bound)
        rows["truncated"].append(int(rep.truncated))
    dens = np.asarray(rows["density"])
    res.report["family"] = fam.descriptor(window)
    res.report["samples"] = reports
    res.report["density"] = rows["density"]
    res.report["tail_bound"] = max(rows["tail_bound"])
    if fam.translating or fam.kind == "product":
        inc = float(np.max(np.diff(dens), initial=-math.inf))
        res.check("density_nonincreasing", inc <= cfg["slack"], inc, cfg["slack"])
    res.files["density.csv"] = io.table_to_csv(rows)


def cmd_levelsets(cfg, res):
    fam = make_family(cfg, cfg["h"])
    p = _run("levelsets", fam.patch, 0.5 if fam.kind == "expander" else 0.0, cfg["window"], cfg["h"])
    th = _run("lagrangian_angle", sf.lagrangian_angle, p)
    n = int(cfg["n_levels"])
    grad = sf.intrinsic_gradient(p, th)
    lo, hi = float(th.min()), float(th.max())
    ds = (hi - lo) / n
    rows = {"level": [], "length": [], "extent": [], "components": []}
    for a in lo + ds * (np.arange(n) + 0.5):
        ls = _run("level_set", sf.level_set, p, th, a, grad=grad)
        rows["level"].append(ls.level)
        rows["length"].append(ls.length)
        rows["extent"].append(ls.extent)
        rows["components"].append(len(ls.loops))
    level_int = float(np.sum(rows["length"]) * ds)
    area_int = sf.integrate(p, ambient.norm(p.mean_curvature))
    grad_int = sf.integrate(p, ambient.norm(grad))
    rel = abs(level_int - area_int) / area_int if area_int > 0 else 0.0
    res.report["family"] = fam.descriptor(cfg["window"])
    res.report["coarea"] = {"level_integral": level_int, "abs_H_integral": area_int, "grad_theta_integral": grad_int, "relative_difference": rel}
    res.check("coarea_relative_difference", rel <= cfg["tolerance"], rel, cfg["tolerance"])
    res.files["levelsets.csv"] = io.table_to_csv(rows)


def cmd_barrier(cfg, res):
    h = cfg["h"]
    out = []
    reps = []
    for hh in (h, h / 2):
        fam = make_family(cfg, hh)
        p = _run("barrier", fam.patch, 0.0, cfg["window"], hh)
        rep = _run(
            "barrier",
            diagnostics.barrier_residual,
            p,
            parse_number(cfg["alpha"]),
            parse_number(cfg["delta"]),
            parse_number(cfg["B"]),
            r_min=parse_number(cfg["r_min"]),
        )
        reps.append((p, rep))
        out.append(rep.to_dict())
    R0a, R0b = reps[0][1].R0, reps[1][1].R0
    rel = abs(R0a - R0b) / max(R0a, R0b) if max(R0a, R0b) > 0 else 0.0
    res.report["family"] = make_family(cfg, h).descriptor(cfg["window"])
    res.report["R0"] = R0a
    res.report["R0_half"] = R0b
    res.report["grids"] = out
    res.check("R0_grid_stable", rel <= cfg["tolerance"], rel, cfg["tolerance"])
    for (p, rep), hh in zip(reps, (h, h / 2)):
        far = rep.mask & (rep.radius >= 1.1 * max(R0a, R0b))
        worst = float(np.max(rep.residual[far], initial=-math.inf))
        res.check(f"residual_nonpositive_beyond_R0_h{hh:g}", worst <= 0.0, worst, 0.0)
    p, rep = reps[0]
    res.files["barrier.csv"] = io.patch_to_csv(p, {"radius": rep.radius, "residual": np.nan_to_num(rep.residual, nan=0.0), "counted": rep.mask.astype(float)})


COMMANDS = {
    "flow-curve": cmd_flow_curve,
    "make-soliton": cmd_make_soliton,
    "verify": cmd_verify,
    "blowdown": cmd_blowdown,
    "density": cmd_density,
    "levelsets": cmd_levelsets,
    "barrier": cmd_barrier,
}


def summary_text(cmd, res, status, error=None):
    lines = [f"lmcf {cmd} ({res.cfg.get('experiment', cmd)})", f"status: {status}"]
    if error:
        lines.append(f"error: {error}")
    for k in ("verdict", "R0", "halt_time", "halted"):
        if k in res.report:
            lines.append(f"{k}: {res.report[k]}")
    for inv in res.invariants:
        mark = "PASS" if inv["passed"] else "FAIL"
        lines.append(f"{mark} {inv['name']}: value={inv['value']!r} limit={inv['limit']!r}")
    return "\n".join(lines) + "\n"


def write_outputs(out, cmd, res, status, error=None):
    out = Path(out)
    # the output location is not part of the experiment, so re-runs elsewhere stay identical
    config = {k: v for k, v in res.cfg.items() if k != "out"}
    report = {"command": cmd, "config": config, "status": status, "invariants": res.invariants, "version": __version__}
    report.update(res.report)
    if error:
        report["error"] = error
    io.write_json(out / "report.json", report)
    for name, text in sorted(res.files.items()):
        io.write_text(out / name, text)
    io.write_text(out / "summary.txt", summary_text(cmd, res, status, error))


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(join_negative_lists(argv))
    try:
        cfg = resolve_config(args)
    except ValidationError as exc:
        print(f"lmcf: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    res = Result(cfg)
    try:
        with np.errstate(over="ignore"):
            COMMANDS[args.command](cfg, res)
    except ValidationError as exc:
        print(f"lmcf: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalFailure as exc:
        write_outputs(cfg["out"], args.command, res, "numerical_failure", str(exc))
        print(f"lmcf: numerical failure in {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    status = "ok" if res.ok else "invariant_violation"
    write_outputs(cfg["out"], args.command, res, status)
    sys.stdout.write(summary_text(args.command, res, status))
    return EXIT_OK if res.ok else EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
