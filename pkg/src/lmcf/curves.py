"""Planar curves, curve-shortening flow and the special curves of the soliton constructions.

Points are stored as ``(N, 2)`` float arrays.  Open curves keep their end
points clamped during the flow unless an end-point velocity is prescribed
(used for Dirichlet data taken from an exact solution).
"""

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial.distance import directed_hausdorff

from lmcf.errors import (
    DomainError,
    FlowHalted,
    IntegrationDiverged,
    MalformedCurveError,
    StabilityError,
)

MIN_POINTS = 16
CFL = 0.4
BLOWUP_CURVATURE = 1e3


@dataclass(frozen=True, eq=False)
class PlanarCurve:
    """Discretised curve in C = R^2.

    ``angle`` is an optional tangent-angle field (one value per point) and
    ``param`` an optional parameter value per point (arc length for curves
    produced by :func:`expander_curve`).
    """

    points: np.ndarray
    closed: bool = False
    angle: Optional[np.ndarray] = None
    param: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise MalformedCurveError("points must have shape (N, 2)")
        if len(pts) < MIN_POINTS:
            raise MalformedCurveError(f"curve needs at least {MIN_POINTS} points, got {len(pts)}")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def segments(self):
        nxt = np.roll(self.points, -1, axis=0) if self.closed else self.points[1:]
        cur = self.points if self.closed else self.points[:-1]
        return nxt - cur

    @property
    def segment_lengths(self):
        return np.hypot(*self.segments.T)

    @property
    def length(self):
        return float(self.segment_lengths.sum())

    @property
    def h_min(self):
        return float(self.segment_lengths.min())

    @property
    def area(self):
        """Signed shoelace area (closed curves)."""
        x, y = self.points.T
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def scaled(self, c):
        return replace(self, points=c * self.points, param=None if self.param is None else c * self.param)

    def translated(self, v):
        return replace(self, points=self.points + np.asarray(v, float))

    @property
    def diameter(self):
        p = self.points
        return float(np.hypot(*(p.max(axis=0) - p.min(axis=0))))


def curvature_vectors(c):
    """Discrete curvature vectors at every point (zero at open-curve end points).

    ``k_i = 2 (T_{i+1/2} - T_{i-1/2}) / (h_{i-1/2} + h_{i+1/2})`` with unit
    chord directions ``T``; exact on a regular polygon inscribed in a circle
    and second order on smoothly spaced samples.
    """
    seg = c.segments
    lens = np.hypot(*seg.T)
    if np.any(lens <= 0.0):
        raise MalformedCurveError("coincident consecutive points")
    T = seg / lens[:, None]
    k = np.zeros_like(c.points)
    if c.closed:
        k = 2.0 * (T - np.roll(T, 1, axis=0)) / (lens + np.roll(lens, 1))[:, None]
    else:
        k[1:-1] = 2.0 * (T[1:] - T[:-1]) / (lens[1:] + lens[:-1])[:, None]
    return k


def curvature_vector(c, i):
    """Curvature vector at point ``i``."""
    if not c.closed and not 0 < i < len(c) - 1:
        raise DomainError("curvature is only defined at interior points of an open curve")
    return curvature_vectors(c)[i % len(c)]


def tangent_angles(c):
    """Continuous tangent angle per point (central chord direction)."""
    seg = c.segments
    if c.closed:
        t = seg + np.roll(seg, 1, axis=0)
    else:
        t = np.empty_like(c.points)
        t[1:-1] = seg[1:] + seg[:-1]
        t[0], t[-1] = seg[0], seg[-1]
    return np.unwrap(np.arctan2(t[:, 1], t[:, 0]))


# -- loops ------------------------------------------------------------------


def _segment_intersections(p, closed, idx=None):
    """All pairs ``(a, b)`` with ``a < b`` of non-adjacent intersecting segments.

    Returns ``(a, b, point)`` triples; ``idx`` restricts the scan to a
    sorted subset of segment indices.
    """
    q = np.roll(p, -1, axis=0) if closed else p[1:]
    p0 = p if closed else p[:-1]
    n = len(p0)
    idx = np.arange(n) if idx is None else idx
    A0, A1 = p0[idx], q[idx]
    mn = np.minimum(A0, A1)
    mx = np.maximum(A0, A1)
    ia, ib = np.triu_indices(len(idx), k=1)
    gap = idx[ib] - idx[ia]
    keep = gap >= 2
    if closed:
        keep &= gap != n - 1
    ia, ib = ia[keep], ib[keep]
    box = np.all(mn[ia] <= mx[ib], axis=1) & np.all(mn[ib] <= mx[ia], axis=1)
    ia, ib = ia[box], ib[box]
    if len(ia) == 0:
        return []
    P, R = A0[ia], A1[ia] - A0[ia]
    Q, S = A0[ib], A1[ib] - A0[ib]
    den = R[:, 0] * S[:, 1] - R[:, 1] * S[:, 0]
    qp = Q - P
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (qp[:, 0] * S[:, 1] - qp[:, 1] * S[:, 0]) / den
        u = (qp[:, 0] * R[:, 1] - qp[:, 1] * R[:, 0]) / den
    ok = (den != 0) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
    return [
        (int(idx[a]), int(idx[b]), P[k] + t[k] * R[k])
        for k, (a, b) in enumerate(zip(ia, ib))
        if ok[k]
    ]


def find_loop(c, hint=None, window=40):
    """Smallest self-intersection loop as ``(a, b, crossing_point)`` or ``None``.

    With ``hint=(a, b)`` from a previous call only a window around those
    indices is scanned first.
    """
    hits = []
    if hint is not None:
        n = len(c.segments)
        a, b = hint
        idx = np.union1d(np.arange(a - window, a + window + 1), np.arange(b - window, b + window + 1))
        idx = idx[(idx >= 0) & (idx < n)]
        hits = _segment_intersections(c.points, c.closed, idx)
    if not hits:
        hits = _segment_intersections(c.points, c.closed)
    if not hits:
        return None
    return min(hits, key=lambda h: h[1] - h[0])


def loop_area(c, loop):
    """Shoelace area of the sub-polygon cut out by a self-intersection."""
    a, b, x = loop
    poly = np.vstack([x[None, :], c.points[a + 1 : b + 1]])
    px, py = poly.T
    return 0.5 * abs(float(np.sum(px * np.roll(py, -1) - np.roll(px, -1) * py)))


# -- redistribution -----------------------------------------------------------------


def _monitor_lengths(c, curvature_weight, kappa=None):
    lens = c.segment_lengths
    if curvature_weight <= 0.0:
        return lens
    kap = np.hypot(*curvature_vectors(c).T) if kappa is None else kappa
    kn = np.roll(kap, -1) if c.closed else kap[1:]
    kc = kap if c.closed else kap[:-1]
    return lens * (1.0 + curvature_weight * 0.5 * (kc + kn))


def redistribute(c, curvature_weight=0.0, kappa=None):
    """Re-space the points of ``c`` by equidistributing ``ds (1 + w |k|)``.

    ``w = 0`` gives uniform arc-length spacing.  The new points are taken
    from a cubic spline through the old ones (periodic for closed curves),
    keeping point 0 (and, for open curves, the last point) fixed.
    """
    p = c.points
    s = np.concatenate([[0.0], np.cumsum(c.segment_lengths)])
    m = np.concatenate([[0.0], np.cumsum(_monitor_lengths(c, curvature_weight, kappa))])
    n = len(p)
    if c.closed:
        targets = m[-1] * np.arange(n) / n
        spline = CubicSpline(s, np.vstack([p, p[:1]]), bc_type="periodic")
    else:
        targets = m[-1] * np.arange(n) / (n - 1)
        spline = CubicSpline(s, p)
    new = spline(np.interp(targets, m, s))
    if not c.closed:
        new[0], new[-1] = p[0], p[-1]
    return replace(c, points=new, angle=None, param=None)


def spacing_ratio(c, curvature_weight=0.0, kappa=None):
    """Max/min ratio of segment lengths measured with the redistribution monitor."""
    lens = _monitor_lengths(c, curvature_weight, kappa)
    return float(lens.max() / lens.min())


# -- flow ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CurveFlowState:
    """Immutable state of a curve-shortening flow.

    ``end_velocity(t, endpoints) -> (2, 2)`` prescribes the motion of the
    two end points of an open curve; ``None`` clamps them.
    ``curvature_weight`` selects the redistribution monitor (see
    :func:`redistribute`); ``loop_hint`` seeds the self-intersection search.
    """

    curve: PlanarCurve
    time: float = 0.0
    end_velocity: Optional[Callable] = None
    curvature_weight: float = 0.0
    redistribute_tol: float = 1.05
    blowup: float = BLOWUP_CURVATURE
    loop_hint: Optional[tuple] = None

    @cached_property
    def curvature(self):
        return curvature_vectors(self.curve)

    @cached_property
    def max_curvature(self):
        k = np.hypot(*self.curvature.T)
        return float(k.max())

    @cached_property
    def loop(self):
        return find_loop(self.curve, self.loop_hint)

    @property
    def area(self):
        """Enclosed area for a closed curve, loop area for a curve with a detected loop."""
        if self.curve.closed and self.loop is None:
            return abs(self.curve.area)
        return loop_area(self.curve, self.loop) if self.loop is not None else 0.0

    def stable_dt(self):
        return CFL * self.curve.h_min**2


def csf_step(state, dt):
    """One explicit Euler step of curve-shortening flow followed by redistribution.

    Raises :class:`StabilityError` when ``dt > 0.4 h_min^2`` and
    :class:`FlowHalted` (carrying the new state) once the maximal curvature
    exceeds ``state.blowup``.
    """
    c = state.curve
    limit = state.stable_dt()
    if dt > limit * (1 + 1e-12):
        raise StabilityError(f"dt={dt:.3e} exceeds stability bound {limit:.3e}", limit)
    new = c.points + dt * state.curvature
    if not c.closed:
        if state.end_velocity is None:
            new[0], new[-1] = c.points[0], c.points[-1]
        else:
            v = np.asarray(state.end_velocity(state.time, c.points[[0, -1]]), float)
            new[0] = c.points[0] + dt * v[0]
            new[-1] = c.points[-1] + dt * v[1]
    curve = replace(c, points=new, angle=None, param=None)
    kap = np.hypot(*curvature_vectors(curve).T) if state.curvature_weight > 0 else None
    if spacing_ratio(curve, state.curvature_weight, kap) > state.redistribute_tol:
        curve = redistribute(curve, state.curvature_weight, kap)
    out = replace(state, curve=curve, time=state.time + dt)
    if out.max_curvature > state.blowup:
        raise FlowHalted(
            f"max curvature {out.max_curvature:.3e} exceeded {state.blowup:.3e} at t={out.time:.6g}",
            out,
        )
    return out


@dataclass
class FlowRecord:
    times: list
    lengths: list
    max_curvatures: list
    areas: list
    final: CurveFlowState
    halted: bool


def run_flow(state, t_end=math.inf, max_steps=10**7, safety=0.9, record_every=1, track_area=True):
    """Integrate until ``t_end`` or a blow-up halt, recording diagnostics.

    The time step is ``safety * 0.4 h_min^2`` (clipped to land on ``t_end``).
    """
    rec = FlowRecord([], [], [], [], state, False)
    hint = state.loop_hint

    def record(s):
        nonlocal hint
        rec.times.append(s.time)
        rec.lengths.append(s.curve.length)
        rec.max_curvatures.append(s.max_curvature)
        if track_area:
            s = replace(s, loop_hint=hint)
            rec.areas.append(s.area)
            hint = s.loop[:2] if s.loop is not None else None
        else:
            rec.areas.append(float("nan"))

    record(state)
    step = 0
    while state.time < t_end and step < max_steps:
        dt = min(safety * state.stable_dt(), t_end - state.time)
        try:
            state = csf_step(state, dt)
        except FlowHalted as halt:
            state = halt.state
            rec.halted = True
            record(state)
            break
        step += 1
        if step % record_every == 0 or state.time >= t_end:
            record(state)
    rec.final = state
    return rec


# -- special curves ----------------------------------------------------------------------


def _expander_rhs(u):
    w1, w2, phi = u
    c, s = math.cos(phi), math.sin(phi)
    return np.array([c, s, w2 * c - w1 * s])


def _rk4(u, h, n):
    """Classical RK4 for the expander system.

    Far out the angle relaxes like ``exp(-r^2/2)`` and the system becomes
    stiff (rate ``r``); once ``r > max(10, 1/|h|)`` the deviation from a
    straight ray is below double precision, so the remaining steps follow
    the ray exactly instead of stepping an unstable scheme.
    """
    out = np.empty((n + 1, 3))
    out[0] = u
    r_flat = max(10.0, 1.0 / abs(h))
    for k in range(n):
        if math.hypot(u[0], u[1]) > r_flat:
            steps = h * np.arange(1, n - k + 1)
            out[k + 1 :, 0] = u[0] + steps * math.cos(u[2])
            out[k + 1 :, 1] = u[1] + steps * math.sin(u[2])
            out[k + 1 :, 2] = u[2]
            return out
        k1 = _expander_rhs(u)
        k2 = _expander_rhs(u + 0.5 * h * k1)
        k3 = _expander_rhs(u + 0.5 * h * k2)
        k4 = _expander_rhs(u + h * k3)
        u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)):
            raise IntegrationDiverged(f"non-finite state after {k + 1} steps")
        out[k + 1] = u
    return out


def expander_curve(shoot, arclength_span, h):
    """Arc-length expander with ``k = w^perp`` through ``(shoot, 0)`` with vertical tangent.

    Integrates ``w1' = cos phi, w2' = sin phi, phi' = w2 cos phi - w1 sin phi``
    with classical RK4 in both directions from ``s = 0``.  The returned
    curve carries the tangent angle ``phi`` and the arc-length parameter.
    """
    if not shoot > 0:
        raise DomainError("shoot must be positive")
    if h > arclength_span / 100:
        raise DomainError("h must be at most arclength_span/100")
    n = int(round(0.5 * arclength_span / h))
    u0 = np.array([shoot, 0.0, math.pi / 2])
    fwd = _rk4(u0, h, n)
    bwd = _rk4(u0, -h, n)
    sol = np.vstack([bwd[:0:-1], fwd])
    s = h * np.arange(-n, n + 1)
    return PlanarCurve(
        sol[:, :2],
        closed=False,
        angle=sol[:, 2],
        param=s,
        meta={"kind": "expander", "shoot": float(shoot), "h": float(h)},
    )


def expander_residual(c):
    """Max over interior points of ``|k - w^perp|`` using discrete curvature."""
    k = curvature_vectors(c)[1:-1]
    w = c.points[1:-1]
    T = np.gradient(c.points, axis=0)[1:-1]
    T /= np.hypot(*T.T)[:, None]
    N = np.stack([-T[:, 1], T[:, 0]], axis=1)
    wperp = np.sum(w * N, axis=1)[:, None] * N
    return float(np.hypot(*(k - wperp).T).max())


def asymptotic_angles(c):
    """Tangent angles at the two ends of an open curve (end chord directions)."""
    if c.angle is not None:
        return float(c.angle[0]), float(c.angle[-1])
    a = tangent_angles(c)
    return float(a[0]), float(a[-1])


def grim_reaper_profile(y_min, y_max, h):
    """Samples ``(-log cos y, y)`` on ``[y_min, y_max]`` at spacing about ``h``."""
    if not (-math.pi / 2 < y_min < y_max < math.pi / 2):
        raise DomainError("grim reaper profile needs -pi/2 < y_min < y_max < pi/2")
    n = int(round((y_max - y_min) / h)) + 1
    y = np.linspace(y_min, y_max, n)
    pts = np.stack([-np.log(np.cos(y)), y], axis=1)
    return PlanarCurve(pts, closed=False, angle=np.pi / 2 - y, param=y, meta={"kind": "grim_reaper"})


def circle(radius, n, center=(0.0, 0.0)):
    t = 2 * np.pi * np.arange(n) / n
    pts = np.stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], axis=1)
    return PlanarCurve(pts, closed=True, angle=t + np.pi / 2, param=radius * t, meta={"kind": "circle"})


def line(p0, p1, n):
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = (1 - t) * np.asarray(p0, float) + t * np.asarray(p1, float)
    return PlanarCurve(pts, closed=False, meta={"kind": "line"})


def example_loop_curve(n=400, excess=0.6, turn_length=2.0, span=12.0):
    """Open curve with one small loop that collapses under the flow (the ``example-1.1`` preset).

    Its tangent angle rises smoothly from 0 to ``pi + excess`` over an arc of
    length about ``turn_length``; the outgoing ray therefore crosses the
    incoming one and cuts out a loop.  The total oscillation of the tangent
    angle is ``pi + excess``.  The particular profile is a design choice;
    only the single loop and the straight ends matter.
    """
    s = np.linspace(-span / 2, span / 2, 20 * n)
    phi = (math.pi + excess) * 0.5 * (1 + np.tanh(2.0 * s / turn_length))
    ds = s[1] - s[0]
    x = np.concatenate([[0.0], np.cumsum(0.5 * (np.cos(phi[1:]) + np.cos(phi[:-1])) * ds)])
    y = np.concatenate([[0.0], np.cumsum(0.5 * (np.sin(phi[1:]) + np.sin(phi[:-1])) * ds)])
    dense = PlanarCurve(np.stack([x, y], axis=1), closed=False)
    idx = np.linspace(0, len(s) - 1, n).round().astype(int)
    c = PlanarCurve(dense.points[idx], closed=False, meta={"kind": "example-1.1", "excess": excess})
    return c


def double_curve(w):
    """``w`` together with its point reflection ``-w`` (a two-component curve set)."""
    if w.closed:
        raise DomainError("double_curve expects an open curve")
    minus = replace(
        w,
        points=-w.points,
        angle=None if w.angle is None else w.angle + math.pi,
        meta={**w.meta, "component": "minus"},
    )
    return [w, minus]


# -- comparison -----------------------------------------------------------------------


def densify(points, closed=False, spacing=None):
    p = np.asarray(points, float)
    if closed:
        p = np.vstack([p, p[:1]])
    seg = np.diff(p, axis=0)
    lens = np.hypot(*seg.T)
    spacing = spacing or max(lens.min(), 1e-12)
    out = [p[:1]]
    for a, d, L in zip(p[:-1], seg, lens):
        m = max(int(math.ceil(L / spacing)), 1)
        t = (np.arange(1, m + 1) / m)[:, None]
        out.append(a + t * d)
    return np.vstack(out)


def hausdorff(a, b, spacing=None):
    """Hausdorff distance between two polylines (``PlanarCurve`` or point arrays)."""
    pa = densify(a.points, a.closed, spacing) if isinstance(a, PlanarCurve) else np.asarray(a, float)
    pb = densify(b.points, b.closed, spacing) if isinstance(b, PlanarCurve) else np.asarray(b, float)
    return max(directed_hausdorff(pa, pb)[0], directed_hausdorff(pb, pa)[0])
