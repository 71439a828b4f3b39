import json
import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from lmcf import ambient, curves, diagnostics, solitons
from lmcf import surface as S
from lmcf.errors import DomainError


def test_plane_examples():
    p = solitons.make_plane(0.0).patch(0.0, h=0.25)
    # alpha = 0 is the (x1, x2) plane
    assert np.all(p.positions[..., 1] == 0) and np.all(p.positions[..., 3] == 0)
    q = solitons.make_plane(0.7).patch(0.0, h=0.1)
    np.testing.assert_allclose(S.lagrangian_angle(q), 0.7, atol=1e-12)
    assert ambient.norm(S.e1_perp(q)).max() < 1e-12


def test_grim_reaper_examples():
    fam = solitons.make_grim_reaper()
    p = fam.patch(0.0, {"y1": [-1.0, 1.0], "x2": [-1.0, 1.0]}, h=0.1)
    np.testing.assert_allclose(p.positions[10, 10], [0, 0, 0, 0], atol=1e-15)
    errs = [diagnostics.residual_table(fam.patch(0.0, h=h))["translator"] for h in (0.01, 0.005)]
    assert errs[1] <= 1e-3 and errs[0] / errs[1] >= 3.5


def test_grim_reaper_is_not_almost_calibrated():
    fam = solitons.make_grim_reaper()
    ymax = 1.2
    p = fam.patch(0.0, {"y1": [-ymax, ymax], "x2": [-1, 1]}, h=0.01)
    c = np.cos(S.lagrangian_angle(p))
    assert c.min() == pytest.approx(-math.sin(ymax), abs=1e-4)
    ok, osc = diagnostics.almost_calibrated(fam)
    assert not ok and osc == pytest.approx(math.pi)


def test_grim_reaper_window_errors():
    fam = solitons.make_grim_reaper()
    with pytest.raises(DomainError):
        fam.patch(0.0, {"y1": [-1.6, 1.0], "x2": [-1, 1]})
    with pytest.raises(DomainError):
        fam.patch(0.0, {"y1": [1.0, -1.0], "x2": [-1, 1]})
    with pytest.raises(DomainError):
        solitons.make_grim_reaper("polar")


def test_grim_reaper_parametrizations_agree():
    a = solitons.make_grim_reaper().patch(0.3, {"y1": [-1.0, 1.0], "x2": [0, 1]}, h=0.05)
    b = solitons.make_grim_reaper("arclength").patch(0.3, {"sigma": [-1.0, 1.0], "x2": [0, 1]}, h=0.05)
    # same surface: every sigma-node lies on the y-parametrised sheet
    x1 = -np.log(np.cos(b.positions[..., 1])) + 0.3
    np.testing.assert_allclose(b.positions[..., 0], x1, atol=1e-12)
    assert a.positions[..., 0].min() == pytest.approx(0.3)


@pytest.mark.parametrize("kind", ["grim", "jlt"])
def test_translating_families_move_exactly(kind):
    fam = solitons.make_grim_reaper() if kind == "grim" else solitons.make_jlt(shoot=1.0)
    p0 = fam.patch(0.0, h=0.05)
    for t in (-2.0, 0.5, 3.0):
        pt = fam.patch(t, h=0.05)
        np.testing.assert_array_equal(pt.positions, p0.positions + t * ambient.E1)


def test_jlt_examples():
    fam = solitons.make_jlt(shoot=1.0)
    lag, trans = [], []
    for h in (0.02, 0.01):
        p = fam.patch(0.0, h=h)
        lag.append(np.abs(S.lagrangian_residual(p)).max())
        trans.append(diagnostics.residual_table(p)["translator"])
    w = fam.curve
    assert lag[1] <= 1e-3 + curves.expander_residual(w)
    assert trans[1] <= 1e-3 and trans[0] / trans[1] >= 3.5


def test_jlt_construction_errors():
    with pytest.raises(DomainError):
        solitons.make_jlt()
    with pytest.raises(DomainError):
        solitons.make_jlt(curves.line((0, 0), (1, 1), 20))


def test_product_examples():
    line = solitons.make_product(curves.line((-1, 0), (1, 0), 41)).patch(0.0, h=0.05)
    assert ambient.norm(line.mean_curvature).max() < 1e-12
    np.testing.assert_allclose(S.lagrangian_angle(line), 0.0, atol=1e-12)

    R = 2.0
    circ = solitons.make_product(curves.circle(R, 256)).patch(0.0, h=0.05)
    np.testing.assert_allclose(ambient.norm(circ.mean_curvature), 1 / R, rtol=1e-3)

    gamma = curves.grim_reaper_profile(-1.0, 1.0, 0.01)
    p = solitons.make_product(gamma).patch(0.0, h=0.05)
    th = S.lagrangian_angle(p)
    tangent = curves.tangent_angles(gamma)
    assert np.abs(th[1:-1, 0] - tangent[1:-1]).max() < 1e-3


def test_product_flows_with_csf():
    fam = solitons.make_product(curves.circle(1.0, 64))
    p = fam.patch(0.2, h=0.1)
    r = np.hypot(p.positions[..., 0], p.positions[..., 1])
    assert r.mean() == pytest.approx(math.sqrt(1 - 2 * 0.2), rel=1e-2)
    with pytest.raises(DomainError):
        fam.patch(-0.1)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_expander_residual(s):
    fam = solitons.make_expander(shoot=1.0)
    errs = []
    for h in (0.02, 0.01):
        _, res = diagnostics.expander_fields(fam.patches(s, h=h), s, R=1e9)
        errs.append(res)
    assert errs[1] <= 1e-3 and errs[0] / errs[1] >= 3.5


def test_expander_self_similarity_is_exact():
    fam = solitons.make_expander(shoot=1.0)
    for a, b in zip(fam.patches(2.0, h=0.05), fam.patches(1.0, h=0.05)):
        # same nodes; only the rounding of sqrt(4) w versus sqrt(2) sqrt(2) w differs
        np.testing.assert_allclose(a.positions, math.sqrt(2.0) * b.positions, rtol=0, atol=1e-14)
    # at s = 1/2 the curve factor is w itself
    w = fam.curve
    p = fam.patch(0.5, {"u": [0, 1], "sigma": [-1, 1]}, h=0.01)
    i0 = int(np.searchsorted(w.param, -1 - 0.005))
    np.testing.assert_allclose(p.positions[0, :, 2:], w.points[i0 : i0 + p.shape[1]], atol=1e-15)


def test_expander_domain():
    fam = solitons.make_expander(shoot=1.0)
    for s in (0.0, -1.0):
        with pytest.raises(DomainError):
            fam.patches(s)


def test_expander_tends_to_two_planes():
    fam = solitons.make_expander(shoot=1.0)
    lo, hi = fam.angle_range()
    dirs = [(math.cos(a), math.sin(a)) for a in (fam.curve.angle[0], fam.curve.angle[-1])]
    t = np.linspace(-1, 1, 801)[:, None]
    line_pts = np.vstack([t * d for d in dirs])
    dists = []
    for s in (1e-1, 1e-2, 1e-3):
        pts = np.vstack([p.positions[..., 2:].reshape(-1, 2) for p in fam.ball_patches(s, 1.0, 0.01)])
        pts = pts[np.hypot(*pts.T) <= 1.0]
        d1 = cKDTree(line_pts).query(pts)[0].max()
        d2 = cKDTree(pts).query(line_pts)[0].max()
        dists.append(max(d1, d2))
    assert dists[0] > dists[1] > dists[2]
    assert dists[2] < 0.05
    assert lo < hi


def test_descriptors_round_trip():
    fams = [
        solitons.make_plane(0.4),
        solitons.make_grim_reaper(),
        solitons.make_jlt(shoot=0.8),
        solitons.make_expander(shoot=0.8),
        solitons.make_product(curves.circle(1.0, 64), spec={"shape": "circle", "radius": 1.0, "n": 64}),
    ]
    for f in fams:
        d = json.loads(json.dumps(f.descriptor()))
        g = solitons.family_from_descriptor(d)
        assert g.kind == f.kind
        assert g.descriptor() == f.descriptor()
    assert solitons.make_jlt(shoot=1.0).descriptor()["shoot"] == 1.0


def test_unknown_kind():
    with pytest.raises(DomainError):
        solitons.family_from_descriptor({"kind": "shrinker"})
