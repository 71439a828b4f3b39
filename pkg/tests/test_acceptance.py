"""Acceptance criteria 1-13, each at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line (printed directly and again in
the terminal summary) before asserting.
"""

import math
import time
from functools import lru_cache

import numpy as np

from conftest import ACCEPTANCE_LINES
from lmcf import ambient, cli, curves, diagnostics as D, solitons
from lmcf import surface as S

PROP_KEYS = ("theta_const", "norm_H", "laplace_x1", "laplace_theta")


def record(n, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {n:2d}: {title} ({detail})"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert passed, line


@lru_cache(maxsize=None)
def translator_tables(kind):
    """Residual tables at h = 0.01 and 0.005 and the wall time for both."""
    t0 = time.perf_counter()
    tables = []
    for h in (0.01, 0.005):
        fam = solitons.make_grim_reaper() if kind == "grim" else solitons.make_jlt(shoot=1.0, h=h)
        tables.append(D.residual_table(fam.patch(0.0, h=h)))
    return tables, time.perf_counter() - t0


def test_criterion_01_translator_identities():
    ok, parts = True, []
    for kind in ("grim", "jlt"):
        (a, b), secs = translator_tables(kind)
        for k in PROP_KEYS:
            ratio = a[k] / b[k]
            ok &= a[k] <= 1e-3 and ratio >= 3.5
            parts.append(f"{kind}.{k}={a[k]:.2e} x{ratio:.2f}")
        ok &= secs <= 30.0
        parts.append(f"{kind} {secs:.1f}s")
    record(1, "translator identity residuals <= 1e-3, ratio >= 3.5, <= 30 s", ok, "; ".join(parts))


def test_criterion_02_translator_residual():
    ok, parts = True, []
    for kind in ("grim", "jlt"):
        (a, b), _ = translator_tables(kind)
        ratio = a["translator"] / b["translator"]
        ok &= a["translator"] <= 1e-3 and ratio >= 3.5
        parts.append(f"{kind}={a['translator']:.2e} x{ratio:.2f}")
    record(2, "max|H - e1_perp| <= 1e-3, ratio >= 3.5", ok, "; ".join(parts))


def test_criterion_03_expander_residual():
    fam = solitons.make_expander(shoot=1.0, h=0.01)
    vals = {s: D.expander_fields(fam.patches(s, h=0.01), s, math.inf)[1] for s in (0.5, 1.0, 2.0)}
    ok = all(v <= 1e-3 for v in vals.values())
    record(3, "max|H - x_perp/(2s)| <= 1e-3", ok, ", ".join(f"s={s:g}: {v:.2e}" for s, v in vals.items()))


def test_criterion_04_curve_shortening():
    R = 1.0
    rec = curves.run_flow(curves.CurveFlowState(curves.circle(R, 128)), record_every=10**6, track_area=False)
    ext_err = abs(rec.final.time - R * R / 2) / (R * R / 2)

    c = curves.grim_reaper_profile(-1.4, 1.4, 0.02)
    st = curves.CurveFlowState(c, end_velocity=lambda t, e: np.array([[1.0, 0.0], [1.0, 0.0]]))
    fin = curves.run_flow(st, t_end=0.5, record_every=10**6, track_area=False).final
    width = 2.8
    trans_err = curves.hausdorff(fin.curve.translated((-0.5, 0.0)), c) / width
    ok = rec.halted and ext_err <= 1e-2 and trans_err <= 2e-2
    record(4, "circle extinction within 1%, grim reaper translation <= 2% of width", ok,
           f"extinction rel err {ext_err:.2e}, translation {trans_err:.2e}")


def test_criterion_05_jlt_blowdown():
    fam = solitons.make_jlt(shoot=1.0)
    conf = D.detect_planes(D.blow_down(fam, 1e-2, -1.0))
    # an independent integration (finer step, longer span) of the generating curve
    ends = curves.asymptotic_angles(curves.expander_curve(1.0, 300.0, 0.01))
    dist = []
    if len(conf.planes) == 2:
        for a in ends:
            dist.append(min(abs(math.remainder(a - b, 2 * math.pi)) for b in conf.angles))
    jlt = D.static_probe(fam).verdict
    plane = D.static_probe(solitons.make_plane(0.7)).verdict
    ok = (
        len(conf.planes) == 2
        and conf.multiplicities == [1, 1]
        and max(dist) <= 2e-2
        and jlt == "non_static"
        and plane == "static"
    )
    record(5, "JLT blow-down: two planes of multiplicity 1 at the asymptotic angles; verdicts", ok,
           f"angles {[round(a, 4) for a in conf.angles]} vs {[round(a, 4) for a in ends]}, "
           f"max dev {max(dist, default=math.nan):.2e}, JLT {jlt}, plane {plane}")


def test_criterion_06_gaussian_density():
    big = {"u": [-10.0, 10.0], "v": [-10.0, 10.0]}
    pl = solitons.make_plane(0.3).patch(0.0, big, h=0.1)
    through = D.gaussian_density(pl, np.zeros(4), 1.0, 0.0).value
    d = 0.7
    offset = D.gaussian_density(pl, d * ambient.apply_J(ambient.E1), 1.0, 0.0).value
    ts = np.linspace(-1.0, 0.0, 5)
    grim = solitons.make_grim_reaper("arclength")
    jlt = solitons.make_jlt(shoot=1.0)
    g_vals = [D.gaussian_density(grim.patches(t, {"sigma": [-14, 14], "x2": [-14, 14]}, 0.05), np.zeros(4), 1.0, t).value for t in ts]
    j_vals = [D.gaussian_density(jlt.patches(t, {"x": [-6, 6], "y": [-8, 8]}, 0.05), np.zeros(4), 1.0, t).value for t in ts]
    inc = max(np.max(np.diff(g_vals)), np.max(np.diff(j_vals)))
    ok = abs(through - 1) <= 1e-6 and abs(offset - math.exp(-d * d / 4)) <= 1e-6 and inc <= 1e-4
    record(6, "density of planes to 1e-6, nonincreasing on translators", ok,
           f"|through-1|={abs(through - 1):.1e}, |offset-exact|={abs(offset - math.exp(-d * d / 4)):.1e}, max increase {inc:.2e}")


def test_criterion_07_barrier():
    ok, parts = True, []
    fams = {"grim": solitons.make_grim_reaper(), "jlt": solitons.make_jlt(shoot=1.0)}
    for name, fam in fams.items():
        reps = [D.barrier_residual(fam.patch(0.0, h=h), 0.3, 0.0, 1.0) for h in (0.01, 0.005)]
        r0 = [r.R0 for r in reps]
        rel = abs(r0[0] - r0[1]) / max(r0) if max(r0) > 0 else 0.0
        worst = max(float(np.max(r.residual[r.mask & (r.radius >= 1.1 * max(r0))], initial=-math.inf)) for r in reps)
        ok &= rel <= 5e-2 and worst <= 0.0
        parts.append(f"{name} R0 {r0[0]:.4f}/{r0[1]:.4f} (rel {rel:.1e}), max residual beyond 1.1 R0 {worst:.2e}")
    record(7, "barrier R0 stable within 5%, residual <= 0 beyond 1.1 R0", ok, "; ".join(parts))


def test_criterion_08_flux_identity():
    g = solitons.make_grim_reaper().patch(0.0, h=0.01)
    H2 = ambient.inner(g.mean_curvature, g.mean_curvature)
    nu, nv = g.shape
    errs = []
    for k in (10, 40, 80):
        box = (k, nu - 1 - k, k, nv - 1 - k)
        flux = S.flux_integral(g, S.rectangle_loops(g, *box))
        area = S.region_integral(g, H2, *box)
        errs.append(abs(flux - area) / area)
    record(8, "flux identity within 2% on three nested regions", max(errs) <= 2e-2,
           ", ".join(f"{e:.1e}" for e in errs))


def test_criterion_09_coarea():
    errs = {}
    for name, fam in (("grim", solitons.make_grim_reaper()), ("jlt", solitons.make_jlt(shoot=1.0))):
        p = fam.patch(0.0, h=0.01)
        level, _ = S.coarea_check(p, S.lagrangian_angle(p))
        absH = S.integrate(p, ambient.norm(p.mean_curvature))
        errs[name] = abs(level - absH) / absH
    record(9, "coarea integral vs int|H| within 2%", max(errs.values()) <= 2e-2,
           ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))


def test_criterion_10_laplace_integral():
    scaled = math.sqrt(100.0) * D.laplace_integral(100.0)
    rel = abs(scaled - math.sqrt(2 * math.pi)) / math.sqrt(2 * math.pi)
    zero = abs(D.laplace_integral(0.0) - 2 * math.pi)
    record(10, "sqrt(100) I(100) within 1% of sqrt(2 pi), I(0) = 2 pi", rel <= 1e-2 and zero <= 1e-10,
           f"rel {rel:.2e}, |I(0)-2pi| {zero:.1e}")


def test_criterion_11_graph_equation():
    fam = solitons.make_jlt(shoot=1.0)
    lo, hi = fam.angle_range()
    worst = 0.0
    for window, alpha in (({"x": [-3, 3], "y": [0, 3]}, lo), ({"x": [-3, 3], "y": [-3, 0]}, hi)):
        worst = max(worst, float(np.abs(S.graph_equation_residual(fam.patch(0.0, window, h=0.01), alpha)).max()))
    record(11, "graph equation residual <= 1e-3 over the asymptotic planes", worst <= 1e-3, f"max {worst:.2e}")


def test_criterion_12_exactness():
    jlt = S.liouville_primitive(solitons.make_jlt(shoot=1.0).patch(0.0, h=0.01))
    per_len = float(np.max(np.abs(jlt.cell_holonomy) / jlt.cell_length))
    R = 1.0
    circ = S.liouville_primitive(solitons.make_product(curves.circle(R, 128)).patch(0.0, h=0.05))
    rel = float(np.max(np.abs(circ.row_holonomy / (2 * math.pi * R**2) - 1)))
    record(12, "JLT holonomy <= 1e-6 x length, circle holonomy 2 pi R^2 within 0.5%", per_len <= 1e-6 and rel <= 5e-3,
           f"JLT {per_len:.1e}, circle rel {rel:.1e}")


def test_criterion_13_determinism(tmp_path):
    runs = [
        ["make-soliton", "--family", "jlt", "--h", "0.05"],
        ["flow-curve", "--preset", "circle", "--n", "64"],
        ["density", "--family", "grim-reaper", "--h", "0.1"],
        ["blowdown", "--family", "plane", "--alpha", "0.5", "--scales", "1e-1,1e-1.5"],
    ]
    same, checked = True, 0
    for k, argv in enumerate(runs):
        dirs = [tmp_path / f"{k}-{i}" for i in range(2)]
        codes = [cli.main(argv + ["--out", str(d)]) for d in dirs]
        same &= codes[0] == codes[1] == 0
        for f in sorted(dirs[0].iterdir()):
            checked += 1
            same &= f.read_bytes() == (dirs[1] / f.name).read_bytes()
    record(13, "byte-identical re-runs", same, f"{checked} files compared over {len(runs)} commands")
