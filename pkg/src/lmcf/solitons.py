"""Explicit solutions of Lagrangian mean curvature flow as patch families.

A :class:`SolitonFamily` turns ``(t, window, h)`` into one or more
:class:`~lmcf.surface.SurfacePatch` objects.  Translating kinds obey
``L_t = L_0 + t e1`` and the expander kind obeys ``L_s = sqrt(2 s) L_{1/2}``
exactly, because both are applied to the sampled positions directly.

Windows are dictionaries of parameter ranges, e.g. ``{"y1": [-1.4, 1.4],
"x2": [-1, 1]}`` for the grim reaper.  ``ball_patches`` instead picks the
parameter windows itself so that the result covers the ambient ball of a
given radius; blow-downs use it.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from lmcf import ambient
from lmcf.curves import (
    CurveFlowState,
    PlanarCurve,
    double_curve,
    expander_curve,
    run_flow,
    tangent_angles,
)
from lmcf.errors import DomainError
from lmcf.surface import SurfacePatch

KINDS = ("plane", "grim_reaper", "jlt_translator", "product", "expander")
TRANSLATING = ("grim_reaper", "jlt_translator")

DEFAULT_WINDOWS = {
    "plane": {"u": [-1.0, 1.0], "v": [-1.0, 1.0]},
    "grim_reaper": {"y1": [-1.4, 1.4], "x2": [-1.0, 1.0]},
    "jlt_translator": {"x": [-3.0, 3.0], "y": [-3.0, 3.0]},
    "product": {"x2": [-1.0, 1.0]},
    "expander": {"u": [-1.0, 1.0], "sigma": [-3.0, 3.0]},
}


def _range(window, key):
    a, b = window[key]
    if not a < b:
        raise DomainError(f"window range {key}={window[key]} is empty")
    return float(a), float(b)


def _axis(a, b, h):
    n = max(int(round((b - a) / h)), 3) + 1
    return np.linspace(a, b, n)


@dataclass(frozen=True, eq=False)
class SolitonFamily:
    """A time-parametrised family of Lagrangian patches.

    ``params`` holds the generator data (``alpha``, ``shoot``, ...) and
    ``curve`` the profile curve for curve-based kinds.  Evaluation is pure:
    results depend only on ``(t, window, h)``; internal caches only store
    integrated curves and flowed states.
    """

    kind: str
    params: dict = field(default_factory=dict)
    curve: Optional[object] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown family kind {self.kind!r}")

    @property
    def translating(self):
        return self.kind in TRANSLATING

    @property
    def direction(self):
        """Translation direction (e1) for translating kinds, else ``None``."""
        return ambient.E1.copy() if self.translating else None

    def check_time(self, t):
        if self.kind == "expander" and not t > 0:
            raise DomainError("expander families are defined for s > 0 only")
        if not math.isfinite(t):
            raise DomainError("time must be finite")

    def descriptor(self, window=None):
        d = {"kind": self.kind, "window": dict(window or DEFAULT_WINDOWS[self.kind])}
        for key in ("alpha", "shoot", "parametrization", "curve"):
            if key in self.params:
                d[key] = self.params[key]
        return d

    def angle_range(self):
        """Infimum and supremum of the Lagrangian angle over the whole solution.

        Exact for planes and the grim reaper; for curve-based kinds the range
        of the tangent angle of the (long) generating curve, whose ends are
        asymptotically straight.
        """
        if self.kind == "plane":
            a = self.params["alpha"]
            return a, a
        if self.kind == "grim_reaper":
            return 0.0, math.pi
        if self.kind == "product":
            c = self.curve
            th = tangent_angles(c)
            if c.closed:
                wind = th[-1] - th[0] + np.angle(np.exp(1j * (th[0] - th[-1])))
                if abs(wind) > 1.0:
                    return -math.inf, math.inf
            return float(th.min()), float(th.max())
        w = self._expander_curve(40.0, 0.01)
        return float(w.angle.min()), float(w.angle.max())

    def oscillation(self):
        lo, hi = self.angle_range()
        return hi - lo

    # -- evaluation -------------------------------------------------------------
    def patches(self, t=0.0, window=None, h=None):
        """Patches of ``L_t`` over ``window`` with parameter spacing ``h``."""
        self.check_time(t)
        window = dict(window or DEFAULT_WINDOWS[self.kind])
        h = self.params.get("h", 0.05) if h is None else h
        if not h > 0:
            raise DomainError("spacing h must be positive")
        build = _BUILDERS[self.kind]
        return build(self, t, window, h)

    def patch(self, t=0.0, window=None, h=None):
        """First patch of :meth:`patches` (the only one for single-sheet kinds)."""
        return self.patches(t, window, h)[0]

    def ball_patches(self, t, radius, h):
        """Patches of ``L_t`` covering the ball ``B_radius(0)`` with ambient spacing about ``h``.

        Nodes outside the ball are kept (windows are rectangles in parameter
        space); callers restrict to the ball themselves.
        """
        self.check_time(t)
        return _BALL[self.kind](self, t, float(radius), float(h))

    # -- curve helpers ------------------------------------------------------------
    def _expander_curve(self, span, h):
        """Expander curve with arc-length span at least ``span`` at step ``h`` (cached)."""
        w = self.curve if isinstance(self.curve, PlanarCurve) else None
        if w is not None and w.param is not None and abs(w.meta.get("h", -1) - h) < 1e-15:
            if w.param[-1] >= span / 2 and -w.param[0] >= span / 2:
                return w
        span = 10.0 * math.ceil(span / 10.0)
        key = ("w", span, h)
        if key not in self._cache:
            self._cache[key] = expander_curve(self.params["shoot"], span, h)
        return self._cache[key]

    def _flowed(self, t):
        """CSF-evolved profile at time ``t`` (product kind)."""
        if t == 0:
            return self.curve
        if t < 0:
            raise DomainError("product families only flow forward in time")
        key = ("flow", t)
        if key not in self._cache:
            done = [k[1] for k in self._cache if k[0] == "flow" and k[1] < t]
            if done:
                state = self._cache[("flow", max(done))]
            else:
                state = CurveFlowState(self.curve, curvature_weight=self.params.get("curvature_weight", 0.0))
            rec = run_flow(state, t_end=t, record_every=10**9, track_area=False)
            if rec.halted:
                raise DomainError(f"profile curve became singular before t={t}")
            self._cache[key] = rec.final
        return self._cache[key].curve


# -- plane ------------------------------------------------------------------------------


def make_plane(alpha=0.0):
    """Static family ``P_alpha = {(u, 0, v cos alpha, v sin alpha)}``."""
    return SolitonFamily("plane", {"alpha": float(alpha)})


def _plane_map(alpha):
    a, b = ambient.plane_frame(alpha)
    return lambda U, V: U[..., None] * a + V[..., None] * b


def _build_plane(f, t, window, h):
    u, v = _range(window, "u"), _range(window, "v")
    p = SurfacePatch.from_function(_plane_map(f.params["alpha"]), u, v, h, tag="plane")
    return [p]


def _ball_plane(f, t, radius, h):
    r = radius * (1 + 1e-9)
    return [SurfacePatch.from_function(_plane_map(f.params["alpha"]), (-r, r), (-r, r), h, tag="plane")]


# -- grim reaper ------------------------------------------------------------------------


def make_grim_reaper(parametrization="y"):
    """Translating family ``(-log cos y1 + t, y1, x2, 0)``.

    ``parametrization="arclength"`` uses the profile arc length ``sigma``
    instead of ``y1`` (``-log cos y1 = log cosh sigma``,
    ``y1 = atan(sinh sigma)``), which samples the far ends evenly.
    """
    if parametrization not in ("y", "arclength"):
        raise DomainError("parametrization must be 'y' or 'arclength'")
    return SolitonFamily("grim_reaper", {"parametrization": parametrization})


def _grim_y(t):
    def fn(Y, X2):
        z = np.zeros_like(Y)
        return np.stack([-np.log(np.cos(Y)) + t, Y, X2, z], axis=-1)

    return fn


def _grim_sigma(t):
    def fn(S, X2):
        z = np.zeros_like(S)
        return np.stack([np.logaddexp(S, -S) - math.log(2.0) + t, np.arctan(np.sinh(S)), X2, z], axis=-1)

    return fn


def _build_grim(f, t, window, h):
    x2 = _range(window, "x2")
    if "sigma" in window:
        s = _range(window, "sigma")
        p = SurfacePatch.from_function(_grim_sigma(t), s, x2, h, tag="grim_reaper")
    else:
        y = _range(window, "y1")
        if not (-math.pi / 2 < y[0] and y[1] < math.pi / 2):
            raise DomainError("grim reaper window needs -pi/2 < y1 < pi/2")
        p = SurfacePatch.from_function(_grim_y(t), y, x2, h, tag="grim_reaper")
    p.meta["t"] = t
    return [p]


def _ball_grim(f, t, radius, h):
    # log cosh(sigma) + t <= radius bounds the profile parameter.
    if radius - t <= 0:
        return []
    smax = math.acosh(min(math.exp(radius - t), 1e300))
    return [SurfacePatch.from_function(_grim_sigma(t), (-smax, smax), (-radius, radius), h, tag="grim_reaper")]


# -- JLT translator ------------------------------------------------------------------


def make_jlt(w=None, shoot=None, h=0.01):
    """Translating family built from an expander curve ``w`` with angle field ``theta``.

    ``F(x, y) = ((|w|^2 - x^2)/2 + t, -theta(y), x w(y))``, ``y`` the arc
    length of ``w``.  Either pass a curve from :func:`expander_curve` or a
    shooting parameter; windows wider than the curve, or a different ``h``,
    re-integrate the same curve.
    """
    if w is None:
        if shoot is None:
            raise DomainError("make_jlt needs an expander curve or a shooting parameter")
        w = expander_curve(shoot, 20.0, h)
    if w.angle is None or w.param is None:
        raise DomainError("JLT construction needs a curve carrying its angle field and arc length")
    s = w.meta.get("shoot")
    if s is None:
        raise DomainError("JLT construction needs an expander curve (meta['shoot'] missing)")
    return SolitonFamily("jlt_translator", {"shoot": float(s), "h": float(w.meta["h"])}, curve=w)


def _jlt_positions(w_pts, theta, x, t):
    X = x[None, :, None]
    r2 = np.sum(w_pts**2, axis=1)[:, None]
    F1 = 0.5 * (r2 - x[None, :] ** 2) + t
    F2 = np.broadcast_to(-theta[:, None], F1.shape)
    F34 = X * w_pts[:, None, :]
    return np.concatenate([np.stack([F1, F2], axis=-1), F34], axis=-1)


def _jlt_patch(w, i0, i1, stride, x, t):
    sl = slice(i0, i1, stride)
    pos = _jlt_positions(w.points[sl], w.angle[sl], x, t)
    hy = float(w.param[1] - w.param[0]) * stride
    p = SurfacePatch(pos, hy, float(x[1] - x[0]), u0=float(w.param[i0]), v0=float(x[0]), tag="jlt_translator")
    p.meta["t"] = t
    return p


def _build_jlt(f, t, window, h):
    # u = y (curve parameter), v = x: this orientation makes the angle equal theta(y).
    ya, yb = _range(window, "y")
    xa, xb = _range(window, "x")
    span = 2 * max(abs(ya), abs(yb)) + 10 * h
    w = f._expander_curve(span, h)
    hc = float(w.param[1] - w.param[0])
    i0 = int(np.searchsorted(w.param, ya - 0.5 * hc))
    i1 = int(np.searchsorted(w.param, yb + 0.5 * hc))
    x = _axis(xa, xb, h)
    return [_jlt_patch(w, i0, i1, 1, x, t)]


def _component_windows(mask):
    lab, n = ndimage.label(mask)
    return [sl for sl in ndimage.find_objects(lab) if sl is not None]


def _ball_jlt(f, t, radius, h):
    shoot = f.params["shoot"]
    a = 2 * radius + 2 * abs(t)
    wmax = math.sqrt(0.5 * (a + math.sqrt(a * a + 4 * radius**2)))
    hc = f.params.get("ball_curve_h", 0.02)
    w = f._expander_curve(2 * (wmax + shoot + 2.0), hc)
    r = np.hypot(*w.points.T)
    X = min(radius / shoot, math.sqrt(wmax**2 + 2 * radius + 2 * abs(t))) + 1.0
    xs = np.linspace(-X, X, 4001)
    # Coarse membership test on (y, x); windows are padded bounding boxes of its components.
    F1 = 0.5 * (r[:, None] ** 2 - xs[None, :] ** 2) + t
    rho2 = F1**2 + w.angle[:, None] ** 2 + (xs[None, :] * r[:, None]) ** 2
    mask = rho2 <= radius**2
    out = []
    for sy, sx in _component_windows(mask):
        i0, i1 = max(sy.start - 2, 0), min(sy.stop + 2, len(r))
        j0, j1 = max(sx.start - 2, 0), min(sx.stop + 2, len(xs) - 1)
        speed = max(float(np.max(np.hypot(r[i0:i1], np.abs(xs[[j0, j1]]).max()))), 1e-12)
        stride = max(int(h / (speed * hc)), 1)
        x = _axis(xs[j0], xs[j1], h / speed)
        out.append(_jlt_patch(w, i0, i1, stride, x, t))
    return out


# -- products ---------------------------------------------------------------------------


def make_product(gamma, curvature_weight=0.0, spec=None):
    """Family ``gamma_t x R``: patch ``(s, x2) -> (gamma_t(s), x2, 0)``.

    ``gamma_t`` is the curve-shortening evolution of ``gamma`` (numerical).
    ``spec`` is the JSON description of ``gamma`` carried in descriptors.
    """
    params = {"curvature_weight": float(curvature_weight)}
    if spec is not None:
        params["curve"] = dict(spec)
    return SolitonFamily("product", params, curve=gamma)


def _product_patch(c, x2, h, t):
    pts = c.points
    n = len(pts)
    hu = c.length / (n if c.closed else n - 1)
    x = _axis(x2[0], x2[1], h)
    pos = np.zeros((n, len(x), 4))
    pos[..., 0] = pts[:, 0][:, None]
    pos[..., 1] = pts[:, 1][:, None]
    pos[..., 2] = x[None, :]
    p = SurfacePatch(pos, hu, float(x[1] - x[0]), v0=float(x[0]), periodic_u=c.closed, tag="product")
    p.meta["t"] = t
    return p


def _build_product(f, t, window, h):
    return [_product_patch(f._flowed(t), _range(window, "x2"), h, t)]


def _ball_product(f, t, radius, h):
    return [_product_patch(f._flowed(t), (-radius, radius), h, t)]


# -- expanders --------------------------------------------------------------------------


def make_expander(w_tilde=None, shoot=None, h=0.01):
    """Expanding family ``R x sqrt(2 s) w~`` for ``s > 0``, ``w~ = w u (-w)``.

    Each component of ``w~`` gives one patch
    ``(u, sigma) -> sqrt(2s) (u, 0, w(sigma))``, so that ``L_s = sqrt(2 s) L_{1/2}``
    holds node by node; windows are parameter ranges of ``L_{1/2}``.
    """
    if w_tilde is None:
        if shoot is None:
            raise DomainError("make_expander needs a doubled expander curve or a shooting parameter")
        w_tilde = double_curve(expander_curve(shoot, 20.0, h))
    if isinstance(w_tilde, PlanarCurve):
        w_tilde = double_curve(w_tilde)
    w = w_tilde[0]
    if w.meta.get("shoot") is None or w.param is None:
        raise DomainError("make_expander needs curves produced by expander_curve")
    return SolitonFamily("expander", {"shoot": float(w.meta["shoot"]), "h": float(w.meta["h"])}, curve=w)


def _expander_patch(w, sign, i0, i1, stride, u, s):
    sl = slice(i0, i1, stride)
    scale = math.sqrt(2.0 * s)
    c = scale * sign * w.points[sl]
    n = c.shape[0]
    pos = np.zeros((len(u), n, 4))
    pos[..., 0] = scale * u[:, None]
    pos[..., 2] = c[:, 0][None, :]
    pos[..., 3] = c[:, 1][None, :]
    hs = float(w.param[1] - w.param[0]) * stride
    p = SurfacePatch(pos, float(u[1] - u[0]), hs, u0=float(u[0]), v0=float(w.param[i0]), tag="expander")
    p.meta.update(s=s, component="plus" if sign > 0 else "minus")
    return p


def _build_expander(f, s, window, h):
    ua, ub = _range(window, "u")
    sa, sb = _range(window, "sigma")
    w = f._expander_curve(2 * max(abs(sa), abs(sb)) + 10 * h, h)
    hc = float(w.param[1] - w.param[0])
    i0 = int(np.searchsorted(w.param, sa - 0.5 * hc))
    i1 = int(np.searchsorted(w.param, sb + 0.5 * hc))
    u = _axis(ua, ub, h)
    return [_expander_patch(w, sign, i0, i1, 1, u, s) for sign in (1.0, -1.0)]


def _ball_expander(f, s, radius, h):
    scale = math.sqrt(2.0 * s)
    shoot = f.params["shoot"]
    if scale * shoot >= radius:
        return []
    hc = f.params.get("ball_curve_h", 0.02)
    w = f._expander_curve(2 * (radius / scale + shoot + 2.0), hc)
    inside = np.flatnonzero(scale * np.hypot(*w.points.T) <= radius)
    i0, i1 = max(inside[0] - 2, 0), min(inside[-1] + 3, len(w.points))
    stride = max(int(h / (scale * hc)), 1)
    u = _axis(-radius / scale, radius / scale, h / scale)
    return [_expander_patch(w, sign, i0, i1, stride, u, s) for sign in (1.0, -1.0)]


_BUILDERS = {
    "plane": _build_plane,
    "grim_reaper": _build_grim,
    "jlt_translator": _build_jlt,
    "product": _build_product,
    "expander": _build_expander,
}

_BALL = {
    "plane": _ball_plane,
    "grim_reaper": _ball_grim,
    "jlt_translator": _ball_jlt,
    "product": _ball_product,
    "expander": _ball_expander,
}


# -- descriptors ------------------------------------------------------------------------


def curve_from_spec(spec):
    """Planar curve from a JSON description such as ``{"shape": "circle", "radius": 1, "n": 128}``."""
    from lmcf import curves

    shape = spec.get("shape")
    if shape == "circle":
        return curves.circle(float(spec.get("radius", 1.0)), int(spec.get("n", 128)))
    if shape == "line":
        return curves.line(spec.get("p0", [-1.0, 0.0]), spec.get("p1", [1.0, 0.0]), int(spec.get("n", 64)))
    if shape == "example-1.1":
        return curves.example_loop_curve(n=int(spec.get("n", 200)), excess=float(spec.get("excess", 0.6)))
    if shape == "grim-reaper":
        lim = float(spec.get("y_max", 1.4))
        return curves.grim_reaper_profile(-lim, lim, float(spec.get("h", 0.02)))
    raise DomainError(f"unknown curve shape {shape!r}")


def family_from_descriptor(d, h=None):
    """Inverse of :meth:`SolitonFamily.descriptor` (the window is ignored)."""
    kind = d.get("kind", "").replace("-", "_")
    if kind == "jlt":
        kind = "jlt_translator"
    if kind == "plane":
        return make_plane(float(d.get("alpha", 0.0)))
    if kind == "grim_reaper":
        return make_grim_reaper(d.get("parametrization", "y"))
    if kind == "jlt_translator":
        return make_jlt(shoot=float(d.get("shoot", 1.0)), h=h or 0.01)
    if kind == "expander":
        return make_expander(shoot=float(d.get("shoot", 1.0)), h=h or 0.01)
    if kind == "product":
        spec = d.get("curve", {"shape": "circle", "radius": 1.0, "n": 128})
        return make_product(curve_from_spec(spec), spec=spec)
    raise DomainError(f"unknown family kind {d.get('kind')!r}")
