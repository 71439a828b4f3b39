"""Parametric surface patches in R^4 and their intrinsic calculus.

A patch is an immersion sampled on a rectangular ``(u, v)`` lattice.  All
derivatives are second-order finite differences (central in the interior,
one-sided second order on non-periodic edges).  Scalar fields are plain
``(nu, nv)`` arrays aligned with the lattice; vector fields are
``(nu, nv, 4)`` arrays.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from skimage import measure

from lmcf import ambient
from lmcf.errors import (
    NotACoveringError,
    NotGraphicalError,
    SingularMetricError,
    TopologyError,
    UnwrapError,
)

DET_MIN = 1e-10


def _d1(a, h, axis, periodic=False):
    if periodic:
        return (np.roll(a, -1, axis=axis) - np.roll(a, 1, axis=axis)) / (2.0 * h)
    return np.gradient(a, h, axis=axis, edge_order=2)


def _d2(a, h, axis, periodic=False):
    a = np.moveaxis(a, axis, 0)
    if periodic:
        out = (np.roll(a, -1, axis=0) - 2.0 * a + np.roll(a, 1, axis=0)) / h**2
    else:
        if a.shape[0] < 4:
            raise ValueError("need at least 4 nodes along each non-periodic axis")
        out = np.empty_like(a)
        out[1:-1] = (a[2:] - 2.0 * a[1:-1] + a[:-2]) / h**2
        out[0] = (2.0 * a[0] - 5.0 * a[1] + 4.0 * a[2] - a[3]) / h**2
        out[-1] = (2.0 * a[-1] - 5.0 * a[-2] + 4.0 * a[-3] - a[-4]) / h**2
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True, eq=False)
class SurfacePatch:
    """Immersion ``F(u, v)`` sampled at ``u0 + i*hu``, ``v0 + j*hv``.

    ``positions`` has shape ``(nu, nv, 4)``.  When ``periodic_u`` is set the
    ``u`` direction closes up (node ``nu`` coincides with node ``0``).
    ``r0`` is the radius of simply connected intrinsic balls; it is pure
    configuration and never inferred.
    """

    positions: np.ndarray
    hu: float
    hv: float
    u0: float = 0.0
    v0: float = 0.0
    periodic_u: bool = False
    tag: Optional[str] = None
    r0: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 3 or pos.shape[2] != 4:
            raise ValueError("positions must have shape (nu, nv, 4)")
        object.__setattr__(self, "positions", pos)

    @property
    def shape(self):
        return self.positions.shape[:2]

    @property
    def u(self):
        return self.u0 + self.hu * np.arange(self.shape[0])

    @property
    def v(self):
        return self.v0 + self.hv * np.arange(self.shape[1])

    # -- derivatives -----------------------------------------------------
    def du(self, a):
        return _d1(a, self.hu, 0, self.periodic_u)

    def dv(self, a):
        return _d1(a, self.hv, 1)

    def duu(self, a):
        return _d2(a, self.hu, 0, self.periodic_u)

    def dvv(self, a):
        return _d2(a, self.hv, 1)

    def duv(self, a):
        return self.dv(self.du(a))

    @cached_property
    def Fu(self):
        return self.du(self.positions)

    @cached_property
    def Fv(self):
        return self.dv(self.positions)

    @cached_property
    def metric(self):
        """``(E, F, G)`` components of the first fundamental form."""
        Fu, Fv = self.Fu, self.Fv
        return ambient.inner(Fu, Fu), ambient.inner(Fu, Fv), ambient.inner(Fv, Fv)

    @cached_property
    def det_g(self):
        E, F, G = self.metric
        return E * G - F * F

    def check_immersion(self):
        det = self.det_g
        bad = np.argwhere(~(det >= DET_MIN))
        if len(bad):
            node = tuple(int(i) for i in bad[0])
            raise SingularMetricError(
                f"first fundamental form degenerate at node {node} (det={det[node]:.3e})",
                node,
            )

    @cached_property
    def inverse_metric(self):
        self.check_immersion()
        E, F, G = self.metric
        det = self.det_g
        return G / det, -F / det, E / det

    @cached_property
    def area_element(self):
        return np.sqrt(self.det_g)

    @cached_property
    def area_weights(self):
        """Trapezoid quadrature weights times the area element."""
        wu = np.full(self.shape[0], self.hu)
        if not self.periodic_u:
            wu[0] = wu[-1] = 0.5 * self.hu
        wv = np.full(self.shape[1], self.hv)
        wv[0] = wv[-1] = 0.5 * self.hv
        return np.outer(wu, wv) * self.area_element

    def interior_mask(self, band=3):
        """Nodes at least ``band`` nodes away from every non-periodic edge."""
        mask = np.zeros(self.shape, dtype=bool)
        if self.periodic_u:
            mask[:, band : self.shape[1] - band] = True
        else:
            mask[band : self.shape[0] - band, band : self.shape[1] - band] = True
        return mask

    # -- projections -------------------------------------------------------
    def tangential(self, V):
        """Tangential part of an ambient vector field (or a constant vector)."""
        V = np.broadcast_to(np.asarray(V, dtype=float), self.positions.shape)
        guu, guv, gvv = self.inverse_metric
        a = ambient.inner(V, self.Fu)
        b = ambient.inner(V, self.Fv)
        cu = guu * a + guv * b
        cv = guv * a + gvv * b
        return cu[..., None] * self.Fu + cv[..., None] * self.Fv

    def normal(self, V):
        V = np.broadcast_to(np.asarray(V, dtype=float), self.positions.shape)
        return V - self.tangential(V)

    @cached_property
    def _hessian_trace(self):
        guu, guv, gvv = self.inverse_metric
        P = self.positions
        return (
            guu[..., None] * self.duu(P)
            + 2.0 * guv[..., None] * self.duv(P)
            + gvv[..., None] * self.dvv(P)
        )

    @cached_property
    def mean_curvature(self):
        """Mean curvature vector ``H`` per node."""
        return self.normal(self._hessian_trace)

    @cached_property
    def tangent_frame(self):
        """Orthonormal tangent frame ``(t1, t2)`` by Gram-Schmidt on ``(Fu, Fv)``."""
        t1 = self.Fu / ambient.norm(self.Fu)[..., None]
        t2 = self.Fv - ambient.inner(self.Fv, t1)[..., None] * t1
        t2 = t2 / ambient.norm(t2)[..., None]
        return t1, t2

    # -- transforms --------------------------------------------------------
    def scaled(self, c):
        return replace(self, positions=c * self.positions, meta=dict(self.meta))

    def translated(self, v):
        return replace(self, positions=self.positions + np.asarray(v, float), meta=dict(self.meta))

    def sub(self, i0, i1, j0, j1):
        """Sub-patch on node ranges ``[i0, i1) x [j0, j1)`` (never periodic)."""
        return SurfacePatch(
            self.positions[i0:i1, j0:j1].copy(),
            self.hu,
            self.hv,
            u0=self.u0 + i0 * self.hu,
            v0=self.v0 + j0 * self.hv,
            tag=self.tag,
            r0=self.r0,
            meta=dict(self.meta),
        )

    @classmethod
    def from_function(cls, fn, u_range, v_range, hu, hv=None, periodic_u=False, **kw):
        """Sample ``fn(U, V) -> (..., 4)`` on a lattice.

        For periodic patches ``u_range`` is one period and the end point is
        not repeated.
        """
        hv = hu if hv is None else hv
        nu = int(round((u_range[1] - u_range[0]) / hu))
        if not periodic_u:
            nu += 1
        nv = int(round((v_range[1] - v_range[0]) / hv)) + 1
        hu = (u_range[1] - u_range[0]) / (nu if periodic_u else nu - 1)
        hv = (v_range[1] - v_range[0]) / (nv - 1)
        u = u_range[0] + hu * np.arange(nu)
        v = v_range[0] + hv * np.arange(nv)
        U, V = np.meshgrid(u, v, indexing="ij")
        return cls(fn(U, V), hu, hv, u0=u_range[0], v0=v_range[0], periodic_u=periodic_u, **kw)


def lagrangian_residual(p):
    """Per-node ``omega(Fu, Fv)`` normalised by the area element."""
    return ambient.symplectic_form(p.Fu, p.Fv) / p.area_element


def mean_curvature(p):
    """Mean curvature vector field (``H = Delta_g F``)."""
    return p.mean_curvature


def lagrangian_angle(p):
    """Lagrangian angle from ``Omega(Fu, Fv) = e^{i theta} |Fu ^ Fv|``.

    The raw phase is unwrapped along a spanning tree rooted at node
    ``(0, 0)`` (first column, then each row), with the root value in
    ``(-pi, pi]``.  Every grid edge is then checked; a jump above pi/2, or
    a non-zero winding across a periodic seam, raises :class:`UnwrapError`.
    """
    raw = np.angle(ambient.holomorphic_volume(p.Fu, p.Fv))
    col = np.unwrap(raw[:, 0])
    theta = np.unwrap(np.concatenate([col[:, None], raw[:, 1:]], axis=1), axis=1)
    jumps = [np.abs(np.diff(theta, axis=0)), np.abs(np.diff(theta, axis=1))]
    if p.periodic_u:
        jumps.append(np.abs(theta[0] - theta[-1]))
    worst = max(float(j.max()) if j.size else 0.0 for j in jumps)
    if worst > np.pi / 2:
        raise UnwrapError(
            f"Lagrangian angle jumps by {worst:.3f} across one cell: "
            "non-zero Maslov class or under-resolved patch"
        )
    return theta


def intrinsic_gradient(p, f):
    """Gradient of a scalar field in the induced metric, as an ambient vector field."""
    guu, guv, gvv = p.inverse_metric
    fu, fv = p.du(f), p.dv(f)
    cu = guu * fu + guv * fv
    cv = guv * fu + gvv * fv
    return cu[..., None] * p.Fu + cv[..., None] * p.Fv


def laplace_beltrami(p, f):
    """Laplace-Beltrami operator ``g^{ij}(f_ij - Gamma^k_ij f_k)``."""
    guu, guv, gvv = p.inverse_metric
    hess_trace = guu * p.duu(f) + 2.0 * guv * p.duv(f) + gvv * p.dvv(f)
    return hess_trace - ambient.inner(p._hessian_trace, intrinsic_gradient(p, f))


def e1_perp(p):
    return p.normal(ambient.E1)


def position_perp(p):
    return p.normal(p.positions)


def integrate(p, f):
    """Area integral of a scalar field (trapezoid rule)."""
    return float(np.sum(p.area_weights * f))


# -- graphs over Lagrangian planes ---------------------------------------------


@dataclass
class GraphEigen:
    """Hessian eigenvalues of the local potential over a plane ``P_alpha``."""

    lam1: np.ndarray
    lam2: np.ndarray
    orientation: np.ndarray  # +1 or -1: sign of the projection Jacobian
    asymmetry: np.ndarray  # |H_12 - H_21|, zero for an exact Lagrangian graph
    star_omega: np.ndarray  # signed Hodge dual of the plane's volume form


def _graph_coordinates(p, alpha):
    M = ambient.unitary_frame(alpha)
    c = p.positions @ M
    return c[..., :2], c[..., 2:]


def star_omega(p, alpha):
    """``*omega_alpha``: volume form of ``P_alpha`` evaluated on the oriented tangent plane."""
    a1, a2 = ambient.plane_frame(alpha)
    det = ambient.inner(p.Fu, a1) * ambient.inner(p.Fv, a2) - ambient.inner(p.Fu, a2) * ambient.inner(
        p.Fv, a1
    )
    return det / p.area_element


def second_fundamental_eigen(p, alpha, min_star=1e-8):
    """Eigenvalues of ``Hess f`` where the patch is the gradient graph of ``f`` over ``P_alpha``.

    In the unitary frame ``(a1, a2, J a1, J a2)`` adapted to ``P_alpha`` a
    point is ``(x_P, q)`` and the graph map is ``q = grad f(x_P)``, so
    ``Hess f = Dq (Dx_P)^{-1}`` by the chain rule.
    """
    xp, q = _graph_coordinates(p, alpha)
    a, b = p.du(xp), p.dv(xp)
    c, d = p.du(q), p.dv(q)
    # Dp = [[a0, b0], [a1, b1]], Dq = [[c0, d0], [c1, d1]]
    det = a[..., 0] * b[..., 1] - b[..., 0] * a[..., 1]
    star = det / p.area_element
    bad = np.argwhere(np.abs(star) < min_star)
    if len(bad):
        node = tuple(int(i) for i in bad[0])
        raise NotGraphicalError(f"projection onto P_alpha degenerate at node {node}")
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.stack(
            [np.stack([b[..., 1], -b[..., 0]], -1), np.stack([-a[..., 1], a[..., 0]], -1)], -2
        ) / det[..., None, None]
        Dq = np.stack([np.stack([c[..., 0], d[..., 0]], -1), np.stack([c[..., 1], d[..., 1]], -1)], -2)
        hess = Dq @ inv
    asym = np.abs(hess[..., 0, 1] - hess[..., 1, 0])
    sym = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    ev = np.linalg.eigvalsh(np.nan_to_num(sym))
    return GraphEigen(ev[..., 0], ev[..., 1], np.sign(det), asym, star)


def graph_equation_residual(p, alpha, theta=None):
    """``theta - alpha - (arctan lam1 + arctan lam2)`` wrapped to ``(-pi, pi]``.

    A reversed projection orientation shifts the angle by pi, which is
    accounted for.
    """
    theta = lagrangian_angle(p) if theta is None else theta
    ge = second_fundamental_eigen(p, alpha)
    r = theta - alpha - np.arctan(ge.lam1) - np.arctan(ge.lam2)
    r = np.where(ge.orientation < 0, r - np.pi, r)
    return np.angle(np.exp(1j * r))


# -- loops and flux ----------------------------------------------------------


@dataclass
class BoundaryLoop:
    """Polygonal path on a patch with its outward unit conormal.

    Segment ``k`` joins vertices ``k`` and ``k+1`` (cyclically when
    ``closed``).  ``nu_start[k]``/``nu_end[k]`` are the conormals used at
    the two ends of segment ``k``; they differ from vertex values only at
    corners.
    """

    params: np.ndarray  # (M, 2) fractional (i, j) lattice coordinates
    positions: np.ndarray  # (M, 4)
    nu_start: np.ndarray  # (S, 4)
    nu_end: np.ndarray  # (S, 4)
    closed: bool

    @property
    def segment_lengths(self):
        pos = self.positions
        nxt = np.roll(pos, -1, axis=0) if self.closed else pos[1:]
        cur = pos if self.closed else pos[:-1]
        return ambient.norm(nxt - cur)

    @property
    def length(self):
        return float(np.sum(self.segment_lengths))

    @property
    def extent(self):
        return float(ambient.norm(self.positions).max()) if len(self.positions) else 0.0


def _conormal(Fu, Fv, du, dv):
    """Unit tangent vector orthogonal to ``du Fu + dv Fv``, on its parameter-right side."""
    T = du[..., None] * Fu + dv[..., None] * Fv
    n = dv[..., None] * Fu - du[..., None] * Fv
    T = T / ambient.norm(T)[..., None]
    n = n - ambient.inner(n, T)[..., None] * T
    return n / ambient.norm(n)[..., None]


def rectangle_loops(p, i0, i1, j0, j1):
    """Boundary of the lattice region ``[i0, i1] x [j0, j1]`` (inclusive node indices).

    Returns a list of closed loops oriented so that the conormal points out
    of the region.  On a periodic patch a region spanning every ``u`` index
    (``i0 == 0`` and ``i1 == nu``) is an annulus bounded by two row loops.
    """
    Fu, Fv = p.Fu, p.Fv
    if p.periodic_u and i0 == 0 and i1 == p.shape[0]:
        loops = []
        for j, sgn in ((j0, 1.0), (j1, -1.0)):
            ii = np.arange(p.shape[0]) if sgn > 0 else np.arange(p.shape[0])[::-1]
            du = np.full(len(ii), sgn)
            nu = _conormal(Fu[ii, j], Fv[ii, j], du, np.zeros_like(du))
            params = np.stack([ii, np.full(len(ii), j)], axis=1).astype(float)
            loops.append(BoundaryLoop(params, p.positions[ii, j], nu, np.roll(nu, -1, axis=0), True))
        return loops

    edges = [
        (np.arange(i0, i1 + 1), np.full(i1 - i0 + 1, j0), 1.0, 0.0),
        (np.full(j1 - j0 + 1, i1), np.arange(j0, j1 + 1), 0.0, 1.0),
        (np.arange(i1, i0 - 1, -1), np.full(i1 - i0 + 1, j1), -1.0, 0.0),
        (np.full(j1 - j0 + 1, i0), np.arange(j1, j0 - 1, -1), 0.0, -1.0),
    ]
    params, positions, nu_s, nu_e = [], [], [], []
    for ii, jj, du, dv in edges:
        nu = _conormal(Fu[ii, jj], Fv[ii, jj], np.full(len(ii), du), np.full(len(ii), dv))
        params.append(np.stack([ii, jj], axis=1)[:-1])
        positions.append(p.positions[ii, jj][:-1])
        nu_s.append(nu[:-1])
        nu_e.append(nu[1:])
    return [
        BoundaryLoop(
            np.concatenate(params).astype(float),
            np.concatenate(positions),
            np.concatenate(nu_s),
            np.concatenate(nu_e),
            True,
        )
    ]


def flux_integral(p, loop, direction=ambient.E1):
    """Trapezoid-rule line integral of ``<nu, direction>`` along a closed loop (or loops)."""
    if isinstance(loop, (list, tuple)):
        return sum(flux_integral(p, lp, direction) for lp in loop)
    if not loop.closed:
        raise TopologyError("flux_integral needs a closed loop")
    d = np.asarray(direction, float)
    g = 0.5 * (ambient.inner(loop.nu_start, d) + ambient.inner(loop.nu_end, d))
    return float(np.sum(g * loop.segment_lengths))


def region_integral(p, f, i0, i1, j0, j1):
    """Trapezoid integral of ``f`` over the lattice region ``[i0, i1] x [j0, j1]``."""
    if p.periodic_u and i0 == 0 and i1 == p.shape[0]:
        wu = np.full(p.shape[0], p.hu)
        rows = slice(None)
    else:
        wu = np.full(i1 - i0 + 1, p.hu)
        wu[0] = wu[-1] = 0.5 * p.hu
        rows = slice(i0, i1 + 1)
    wv = np.full(j1 - j0 + 1, p.hv)
    wv[0] = wv[-1] = 0.5 * p.hv
    w = np.outer(wu, wv) * p.area_element[rows, j0 : j1 + 1]
    return float(np.sum(w * f[rows, j0 : j1 + 1]))


# -- level sets ----------------------------------------------------------------


@dataclass
class LevelSet:
    level: float
    loops: list
    length: float
    extent: float


def _interp(arr, params, periodic_u=False):
    mode = "grid-wrap" if periodic_u else "nearest"
    coords = params.T
    if arr.ndim == 2:
        return ndimage.map_coordinates(arr, coords, order=1, mode=mode)
    return np.stack(
        [ndimage.map_coordinates(arr[..., k], coords, order=1, mode=mode) for k in range(arr.shape[-1])],
        axis=-1,
    )


def level_set(p, f, a, grad=None):
    """Marching-squares extraction of ``{f = a}`` mapped into R^4.

    If ``a`` coincides with a node value it is shifted by ``1e-12 * range(f)``.
    Conormals point along ``grad f`` (out of ``{f <= a}``).
    """
    f = np.asarray(f, float)
    lo, hi = float(f.min()), float(f.max())
    if np.any(f == a):
        a = a + 1e-12 * max(hi - lo, 1.0)
    if not (lo < a < hi):
        return LevelSet(a, [], 0.0, 0.0)
    work = np.concatenate([f, f[:1]], axis=0) if p.periodic_u else f
    grad = intrinsic_gradient(p, f) if grad is None else grad
    loops = []
    for c in measure.find_contours(work, a):
        closed = len(c) > 2 and np.allclose(c[0], c[-1])
        if closed:
            c = c[:-1]
        if len(c) < 2:
            continue
        pos = _interp(p.positions, c, p.periodic_u)
        gr = _interp(grad, c, p.periodic_u)
        nu = gr / np.maximum(ambient.norm(gr), 1e-300)[..., None]
        if closed:
            loops.append(BoundaryLoop(c, pos, nu, np.roll(nu, -1, axis=0), True))
        else:
            loops.append(BoundaryLoop(c, pos, nu[:-1], nu[1:], False))
    length = float(sum(lp.length for lp in loops))
    extent = max((lp.extent for lp in loops), default=0.0)
    return LevelSet(a, loops, length, extent)


def coarea_check(p, f, n_levels=200, grad=None):
    """Compare ``int H^1({f = s}) ds`` with ``int |grad f| dmu``.

    Levels are the midpoints of ``n_levels`` equal sub-intervals of the
    range of ``f``.  Returns ``(level_integral, area_integral)``.
    """
    f = np.asarray(f, float)
    grad = intrinsic_gradient(p, f) if grad is None else grad
    lo, hi = float(f.min()), float(f.max())
    ds = (hi - lo) / n_levels
    levels = lo + ds * (np.arange(n_levels) + 0.5)
    total = sum(level_set(p, f, s, grad=grad).length for s in levels) * ds
    return total, integrate(p, ambient.norm(grad))


# -- Liouville primitive -------------------------------------------------------


@dataclass
class PrimitiveReport:
    beta: np.ndarray
    cell_holonomy: np.ndarray
    cell_length: np.ndarray
    row_holonomy: np.ndarray  # only for periodic patches (loops u -> u + period)
    row_length: np.ndarray
    exact: bool


def _edge_integral(A, B):
    # exact line integral of lambda along the chord from A to B
    return ambient.symplectic_form(A, B)


def liouville_primitive(p, exact_tol=1.0):
    """Integrate ``lambda`` along a spanning tree rooted at node ``(0, 0)``.

    Edges are the chords between neighbouring nodes; the line integral of
    ``lambda`` along a chord from ``A`` to ``B`` is exactly ``omega(A, B)``.
    Holonomies are reported for every lattice cell (a cycle basis of a
    simply connected lattice) and, on periodic patches, for every row loop.
    The patch is declared exact when each holonomy is at most
    ``exact_tol * h^2 * loop length``.
    """
    P = p.positions
    col = np.concatenate([[0.0], np.cumsum(_edge_integral(P[:-1, 0], P[1:, 0]))])
    rows = np.cumsum(_edge_integral(P[:, :-1], P[:, 1:]), axis=1)
    beta = np.concatenate([col[:, None], col[:, None] + rows], axis=1)

    Pn = np.roll(P, -1, axis=0) if p.periodic_u else P[1:]
    Pc = P if p.periodic_u else P[:-1]
    A, B, C, D = Pc[:, :-1], Pn[:, :-1], Pn[:, 1:], Pc[:, 1:]
    hol = _edge_integral(A, B) + _edge_integral(B, C) + _edge_integral(C, D) + _edge_integral(D, A)
    clen = ambient.norm(B - A) + ambient.norm(C - B) + ambient.norm(D - C) + ambient.norm(A - D)
    if p.periodic_u:
        row_hol = np.sum(_edge_integral(P, np.roll(P, -1, axis=0)), axis=0)
        row_len = np.sum(ambient.norm(np.roll(P, -1, axis=0) - P), axis=0)
    else:
        row_hol = np.zeros(0)
        row_len = np.zeros(0)
    h2 = max(p.hu, p.hv) ** 2
    exact = bool(
        np.all(np.abs(hol) <= exact_tol * h2 * clen)
        and np.all(np.abs(row_hol) <= exact_tol * h2 * row_len)
    )
    return PrimitiveReport(beta, hol, clen, row_hol, row_len, exact)


# -- graphical decomposition ----------------------------------------------------


@dataclass
class Component:
    patch_index: int  # -1 when several patches were merged
    alpha: float
    degree: int
    radius: float
    derivative_bound: float
    n_nodes: int


@dataclass
class DecompositionReport:
    components: list
    alphas: list
    radius: float
    eps: float


def _as_patch_list(patches):
    return [patches] if isinstance(patches, SurfacePatch) else list(patches)


def _cell_triangles(p, mask, xp):
    """Projected triangles (two per lattice cell whose corners all lie in ``mask``)."""
    m = mask[:-1, :-1] & mask[1:, :-1] & mask[1:, 1:] & mask[:-1, 1:]
    A, B, C, D = xp[:-1, :-1][m], xp[1:, :-1][m], xp[1:, 1:][m], xp[:-1, 1:][m]
    return np.concatenate([A, A]), np.concatenate([B, C]), np.concatenate([C, D])


def _count_in_triangles(pt, tris):
    A, B, C = tris
    if len(A) == 0:
        return 0

    def cross(o, a, b):
        return (a[:, 0] - o[:, 0]) * (b[:, 1] - o[:, 1]) - (a[:, 1] - o[:, 1]) * (b[:, 0] - o[:, 0])

    P = np.broadcast_to(pt, A.shape)
    s1, s2, s3 = cross(A, B, P), cross(B, C, P), cross(C, A, P)
    inside = ((s1 >= 0) & (s2 >= 0) & (s3 >= 0)) | ((s1 <= 0) & (s2 <= 0) & (s3 <= 0))
    nondeg = np.abs(cross(A, B, C)) > 0
    return int(np.count_nonzero(inside & nondeg))


def _sample_points(p, mask, xp, n, rng):
    """Interior points of ``n`` cells well inside ``mask``, projected to the plane."""
    inner = ndimage.binary_erosion(mask, iterations=3)
    cells = np.argwhere(inner[:-1, :-1] & inner[1:, 1:] & inner[1:, :-1] & inner[:-1, 1:])
    if len(cells) == 0:
        return np.zeros((0, 2))
    pick = cells[np.sort(rng.choice(len(cells), size=min(n, len(cells)), replace=False))]
    s, t = 0.31, 0.57  # generic position inside a cell, off the triangle diagonal
    i, j = pick[:, 0], pick[:, 1]
    return (
        (1 - s) * (1 - t) * xp[i, j]
        + s * (1 - t) * xp[i + 1, j]
        + s * t * xp[i + 1, j + 1]
        + (1 - s) * t * xp[i, j + 1]
    )


def graphical_decomposition(patches, alphas, R, eps=0.5, merge=False, n_samples=16, seed=42):
    """Split the nodes projecting outside ``B_R`` into covering components over planes ``P_alpha``.

    A node is eligible for ``alpha`` when its projection to ``P_alpha`` lies
    outside ``B_R(0)`` and ``|*omega_alpha| >= eps``; with several angles the
    node goes to the one with the largest ``|*omega_alpha|``.  Connected
    components (4-neighbour lattice connectivity, per patch unless
    ``merge``) get a covering degree by counting preimage triangles over
    ``n_samples`` sample points.  A non-constant count raises
    :class:`NotACoveringError`.
    """
    plist = _as_patch_list(patches)
    alphas = [float(alphas)] if np.isscalar(alphas) else [float(a) for a in alphas]
    rng = np.random.default_rng(seed)
    stars = [[np.abs(star_omega(p, a)) for a in alphas] for p in plist]
    masks = []
    for p, st in zip(plist, stars):
        best = np.argmax(np.stack(st), axis=0)
        per_alpha = []
        for k, a in enumerate(alphas):
            xp, _ = _graph_coordinates(p, a)
            outside = np.hypot(xp[..., 0], xp[..., 1]) > R
            per_alpha.append((best == k) & outside & (st[k] >= eps))
        masks.append(per_alpha)

    components = []
    for k, a in enumerate(alphas):
        xps = [_graph_coordinates(p, a)[0] for p in plist]
        groups = []
        if merge:
            groups.append([(pi, masks[pi][k]) for pi in range(len(plist)) if masks[pi][k].any()])
        else:
            for pi in range(len(plist)):
                labels, n = ndimage.label(masks[pi][k])
                for lab in range(1, n + 1):
                    groups.append([(pi, labels == lab)])
        for group in groups:
            if not group:
                continue
            tris = [_cell_triangles(plist[pi], m, xps[pi]) for pi, m in group]
            tris = tuple(np.concatenate([t[c] for t in tris]) for c in range(3))
            samples = np.concatenate(
                [_sample_points(plist[pi], m, xps[pi], n_samples, rng) for pi, m in group]
            )
            if len(samples) > n_samples:
                samples = samples[np.sort(rng.choice(len(samples), n_samples, replace=False))]
            counts = [_count_in_triangles(s, tris) for s in samples]
            if not counts:
                continue
            if len(set(counts)) != 1:
                raise NotACoveringError(
                    f"preimage counts {sorted(set(counts))} over P_alpha with alpha={a:.4f}",
                    [(tuple(s), c) for s, c in zip(samples, counts)],
                )
            bound = 0.0
            for pi, m in group:
                ge = second_fundamental_eigen(plist[pi], a, min_star=0.0)
                lam = np.maximum(np.abs(ge.lam1), np.abs(ge.lam2))[m]
                bound = max(bound, float(lam.max()))
            components.append(
                Component(
                    group[0][0] if len(group) == 1 else -1,
                    a,
                    counts[0],
                    float(R),
                    bound,
                    int(sum(np.count_nonzero(m) for _, m in group)),
                )
            )
    return DecompositionReport(components, alphas, float(R), float(eps))
