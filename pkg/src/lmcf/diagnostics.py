"""Numerical probes: Gaussian densities, blow-downs, plane detection, barriers.

The probes act on lists of :class:`~lmcf.surface.SurfacePatch` (a single
patch is accepted everywhere a list is) and on soliton families.  Every
probe is a pure function of its inputs; randomness is not used.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import integrate as spi
from scipy import ndimage
from scipy.cluster import hierarchy
from scipy.spatial import cKDTree

from lmcf import ambient
from lmcf import surface as sf
from lmcf.errors import AmbiguousMultiplicityError, DomainError

DEFAULT_SCALES = (1e-1, 10**-1.5, 1e-2)
DEFAULT_S_VALUES = (-1.0, 1.0)
MAX_PLANES = 8


def _patches(p):
    return [p] if isinstance(p, sf.SurfacePatch) else list(p)


# -- heat kernel and density ----------------------------------------------------------


def heat_kernel(x0, T, x, t):
    """Backwards heat kernel ``exp(-|x - x0|^2 / (4 (T - t))) / (4 pi (T - t))`` in dimension two."""
    tau = T - t
    if not tau > 0:
        raise DomainError("heat kernel needs t < T")
    d2 = np.sum((np.asarray(x, float) - np.asarray(x0, float)) ** 2, axis=-1)
    return np.exp(-d2 / (4.0 * tau)) / (4.0 * math.pi * tau)


@dataclass
class DensityReport:
    center: np.ndarray
    tau: float
    value: float
    truncation_radius: float
    tail_bound: float
    truncated: bool
    coverage_radius: float
    area_constant: float
    tol: float

    def to_dict(self):
        return {
            "center": self.center,
            "scale": self.tau,
            "density": self.value,
            "truncation_radius": self.truncation_radius,
            "tail_bound": self.tail_bound,
            "truncated": self.truncated,
            "coverage_radius": self.coverage_radius,
            "area_constant": self.area_constant,
        }


def _boundary_positions(p):
    P = p.positions
    rows = [P[:, 0], P[:, -1]]
    if not p.periodic_u:
        rows += [P[0], P[-1]]
    return np.concatenate(rows)


def gaussian_tail(C1, rho, tau):
    """Bound on the kernel mass outside ``B_rho(x0)`` given ``area(B_r) <= C1 r^2``.

    Integrating the kernel against the area bound shell by shell gives
    ``(C1 / pi) (q + 1) exp(-q)`` with ``q = rho^2 / (4 tau)``.
    """
    q = rho**2 / (4.0 * tau)
    return C1 / math.pi * (q + 1.0) * math.exp(-q)


def area_constant(patches, x0, radii):
    """Measured ``max_r area(L cap B_r(x0)) / r^2`` over the given radii."""
    best = 0.0
    for r in radii:
        a = sum(float(np.sum(p.area_weights[ambient.norm(p.positions - x0) <= r])) for p in patches)
        best = max(best, a / r**2)
    return best


def gaussian_density(patches, x0, T, t, tol=1e-8, C1=None):
    """Area-weighted quadrature of the backwards heat kernel over the patches.

    The patches are assumed to contain every point of the surface inside
    the coverage radius (distance from ``x0`` to the nearest patch boundary
    node).  The tail bound estimates the missing mass beyond it from the
    quadratic area bound with constant ``C1`` (measured when not given).
    The report is flagged ``truncated`` when the coverage radius is below
    ``sqrt(4 tau ln(1/tol)) + |x0|``.
    """
    tau = T - t
    if not tau > 0:
        raise DomainError("density needs t < T")
    patches = _patches(patches)
    x0 = np.asarray(x0, float)
    value = sum(float(np.sum(p.area_weights * heat_kernel(x0, T, p.positions, t))) for p in patches)
    rho = min(float(ambient.norm(_boundary_positions(p) - x0).min()) for p in patches)
    r_trunc = math.sqrt(4.0 * tau * math.log(1.0 / tol)) + float(ambient.norm(x0))
    if C1 is None:
        C1 = area_constant(patches, x0, np.linspace(0.25, 1.0, 4) * rho)
    tail = gaussian_tail(C1, rho, tau)
    return DensityReport(x0, tau, value, r_trunc, tail, rho < r_trunc, rho, C1, tol)


# -- blow-downs ---------------------------------------------------------------------


class Rescaled:
    """The family ``s -> lam * L_{s / lam^2}`` as a family object of its own."""

    def __init__(self, family, lam):
        if not lam > 0:
            raise DomainError("scale must be positive")
        self.family = family
        self.lam = float(lam)
        self.kind = family.kind
        self.params = family.params

    @property
    def translating(self):
        return False

    def check_time(self, t):
        self.family.check_time(t / self.lam**2)

    def angle_range(self):
        return self.family.angle_range()

    def oscillation(self):
        return self.family.oscillation()

    def descriptor(self, window=None):
        d = self.family.descriptor(window)
        d["scale"] = d.get("scale", 1.0) * self.lam
        return d

    def patches(self, t=0.0, window=None, h=None):
        return [p.scaled(self.lam) for p in self.family.patches(t / self.lam**2, window, h)]

    def patch(self, t=0.0, window=None, h=None):
        return self.patches(t, window, h)[0]

    def ball_patches(self, t, radius, h):
        ps = self.family.ball_patches(t / self.lam**2, radius / self.lam, h / self.lam)
        return [p.scaled(self.lam) for p in ps]


def blow_down(family, lam, s, R=3.0, h=0.05, window=None, param_h=None):
    """Patches of ``lam * L_{s / lam^2}``.

    Without ``window`` the patches cover the ball ``B_R(0)`` with ambient
    node spacing about ``h``.  With ``window`` the family is evaluated on that
    parameter window at parameter spacing ``param_h`` and then scaled.
    """
    if not lam > 0:
        raise DomainError("scale must be positive")
    t = s / lam**2
    family.check_time(t)
    if window is not None:
        return [p.scaled(lam) for p in family.patches(t, window, param_h)]
    return [p.scaled(lam) for p in family.ball_patches(t, R / lam, h / lam)]


# -- plane detection -----------------------------------------------------------------

_IU = np.triu_indices(4)
_W = np.where(_IU[0] == _IU[1], 1.0, math.sqrt(2.0))


def _projection_coords(t1, t2):
    """Upper-triangle coordinates of the tangent projector (Frobenius isometry)."""
    P = t1[..., :, None] * t1[..., None, :] + t2[..., :, None] * t2[..., None, :]
    return P[..., _IU[0], _IU[1]] * _W


def principal_angles(A, B):
    """Principal angles between the planes spanned by the columns of 4x2 matrices."""
    qa, _ = np.linalg.qr(A)
    qb, _ = np.linalg.qr(B)
    sv = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return np.arccos(np.clip(sv, -1.0, 1.0))


@dataclass
class DetectedPlane:
    angle: float
    multiplicity: int
    frame: ambient.TwoFrame
    density: float
    residual: float
    n_nodes: int

    def to_dict(self):
        return {
            "angle": self.angle,
            "multiplicity": self.multiplicity,
            "residual": self.residual,
            "density": self.density,
        }


@dataclass
class PlaneConfiguration:
    planes: List[DetectedPlane]
    residual: float
    radius: float
    capped: bool = False
    dropped_density: float = 0.0

    @property
    def angles(self):
        return [q.angle for q in self.planes]

    @property
    def multiplicities(self):
        return [q.multiplicity for q in self.planes]

    def to_dict(self):
        return {
            "planes": [q.to_dict() for q in self.planes],
            "residual": self.residual,
            "radius": self.radius,
            "capped": self.capped,
            "dropped_density": self.dropped_density,
        }

    def matches(self, other, tol=2e-2):
        """Same number of planes with equal multiplicities and angles within ``tol`` (mod 2 pi)."""
        if len(self.planes) != len(other.planes):
            return False
        left = sorted(self.planes, key=lambda q: q.angle % (2 * math.pi))
        used = set()
        for q in left:
            hit = None
            for k, r in enumerate(other.planes):
                if k in used:
                    continue
                d = abs(math.remainder(q.angle - r.angle, 2 * math.pi))
                if d <= tol and q.multiplicity == r.multiplicity:
                    hit = k
                    break
            if hit is None:
                return False
            used.add(hit)
        return True


def detect_planes(patches, R=3.0, tol=1e-2, band=0.2, max_sample=3000, max_planes=MAX_PLANES):
    """Cluster the nodes inside ``B_R(0)`` by tangent plane and read off multiplicities.

    Tangent planes are compared with the chordal metric (root sum of squared
    sines of the principal angles) and grouped by single linkage at
    threshold ``tol``.  Each cluster's multiplicity is its Gaussian density
    at the origin with ``T - t = R^2 / 16``, restricted to ``B_R`` and
    divided by the plane value ``1 - e^{-4}``; clusters whose density
    rounds to zero are dropped (their total is reported).  Its angle is the
    circular mean of the Lagrangian angle over the cluster.
    """
    patches = _patches(patches)
    tau = R**2 / 16.0
    norm = 1.0 - math.exp(-4.0)
    X, Pc, TH, Wt, T1, T2 = [], [], [], [], [], []
    for p in patches:
        inside = ambient.norm(p.positions) <= R
        if not inside.any():
            continue
        t1, t2 = p.tangent_frame
        theta = sf.lagrangian_angle(p)
        X.append(p.positions[inside])
        Pc.append(_projection_coords(t1[inside], t2[inside]))
        TH.append(theta[inside])
        Wt.append((p.area_weights * heat_kernel(np.zeros(4), tau, p.positions, 0.0))[inside])
        T1.append(t1[inside])
        T2.append(t2[inside])
    if not X:
        raise DomainError("no patch node lies inside the detection ball")
    X, Pc, TH, Wt = map(np.concatenate, (X, Pc, TH, Wt))
    T1, T2 = np.concatenate(T1), np.concatenate(T2)

    n = len(X)
    step = max(1, int(math.ceil(n / max_sample)))
    sub = np.arange(0, n, step)
    if len(sub) > 1:
        Z = hierarchy.linkage(Pc[sub], method="single")
        lab_sub = hierarchy.fcluster(Z, t=math.sqrt(2.0) * tol, criterion="distance")
    else:
        lab_sub = np.ones(1, dtype=int)
    _, nearest = cKDTree(Pc[sub]).query(Pc)
    labels = lab_sub[nearest]

    found, dropped = [], 0.0
    for lab in np.unique(labels):
        m = labels == lab
        density = float(Wt[m].sum()) / norm
        Pm = np.zeros((4, 4))
        Pm[_IU] = np.average(Pc[m], axis=0, weights=Wt[m] + 1e-300) / _W
        Pm = Pm + np.triu(Pm, 1).T
        vals, vecs = np.linalg.eigh(Pm)
        frame = ambient.TwoFrame(vecs[:, 3], vecs[:, 2])
        angle = float(np.angle(np.sum(Wt[m] * np.exp(1j * TH[m]))))
        found.append((density, angle, frame, int(m.sum())))
    found.sort(key=lambda q: -q[0])
    capped = len(found) > max_planes
    keep, planes_out = [], []
    for density, angle, frame, count in found:
        mult = int(round(density))
        if abs(density - mult) > band:
            raise AmbiguousMultiplicityError(
                f"cluster density {density:.4f} is not within {band} of an integer", density
            )
        if mult == 0:
            dropped += density
            continue
        keep.append((density, angle, frame, count, mult))
    keep = keep[:max_planes]
    if not keep:
        raise AmbiguousMultiplicityError("no cluster carries positive multiplicity", 0.0)

    frames = [np.stack(q[2], axis=1) for q in keep]
    dists = np.stack([ambient.norm(X - (X @ F) @ F.T) for F in frames], axis=1)
    which = dists.argmin(axis=1)
    for k, (density, angle, frame, count, mult) in enumerate(keep):
        sel = which == k
        res = float(dists[sel, k].max()) if sel.any() else 0.0
        planes_out.append(DetectedPlane(angle, mult, frame, density, res, count))
    residual = float(dists.min(axis=1).max())
    return PlaneConfiguration(planes_out, residual, R, capped, dropped)


# -- static probe ---------------------------------------------------------------------


@dataclass
class BlowdownEntry:
    scale: float
    s: float
    tag: str
    configuration: Optional[PlaneConfiguration] = None
    max_H: float = 0.0
    expander_residual: float = math.nan

    def to_dict(self):
        d = {"scale": self.scale, "s": self.s, "tag": self.tag, "max_H": self.max_H}
        if self.configuration is not None:
            d.update(self.configuration.to_dict())
        if not math.isnan(self.expander_residual):
            d["expander_residual"] = self.expander_residual
        return d


@dataclass
class BlowdownProbe:
    scales: list
    s_values: list
    entries: List[BlowdownEntry]
    verdict: str
    almost_calibrated: bool
    oscillation: float
    flags: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "scales": self.scales,
            "s_values": self.s_values,
            "verdict": self.verdict,
            "almost_calibrated": self.almost_calibrated,
            "oscillation": self.oscillation,
            "flags": self.flags,
            "entries": [e.to_dict() for e in self.entries],
        }


def almost_calibrated(family, margin=1e-9):
    """Whether some phase ``c`` gives ``inf cos(theta - c) > 0`` on the whole solution.

    Equivalent to an angle oscillation strictly below pi; returns
    ``(flag, oscillation)``.
    """
    osc = family.oscillation()
    return bool(osc < math.pi - margin), osc


def expander_fields(patches, s, R):
    """``max |H|`` and ``max |H - x^perp / (2 s)|`` over interior nodes inside ``B_R``."""
    hmax, res = 0.0, 0.0
    for p in _patches(patches):
        m = p.interior_mask() & (ambient.norm(p.positions) <= R)
        if not m.any():
            continue
        H = p.mean_curvature
        hmax = max(hmax, float(ambient.norm(H)[m].max()))
        res = max(res, float(ambient.norm(H - sf.position_perp(p) / (2.0 * s))[m].max()))
    return hmax, res


def static_probe(
    family,
    scales=DEFAULT_SCALES,
    s_values=DEFAULT_S_VALUES,
    R=3.0,
    h=0.05,
    plane_tol=1e-2,
    H_tol=5e-2,
    angle_tol=2e-2,
):
    """Blow the family down at each scale and time and compare the limits.

    ``s <= 0`` runs :func:`detect_planes`; ``s > 0`` first measures ``|H|``:
    below ``H_tol`` the blow-down is treated as planar and detected, above
    it the entry is tagged ``expander`` (with its residual) and the verdict
    becomes ``non_static``.  A family that is not almost-calibrated is
    flagged and returns ``inconclusive`` without blowing down.
    """
    scales = sorted((float(x) for x in scales), reverse=True)
    s_values = [float(x) for x in s_values]
    if not (min(s_values) <= 0 < max(s_values)):
        raise DomainError("s_values must include negative (or zero) and positive entries")
    ok, osc = almost_calibrated(family)
    if not ok:
        return BlowdownProbe(scales, s_values, [], "inconclusive", False, osc, {"non_almost_calibrated": True})
    entries = []
    for lam in scales:
        for s in s_values:
            ps = blow_down(family, lam, s, R=R, h=h)
            if s > 0:
                hmax, res = expander_fields(ps, s, R)
                if hmax > H_tol:
                    entries.append(BlowdownEntry(lam, s, "expander", None, hmax, res))
                    continue
            else:
                hmax = 0.0
            conf = detect_planes(ps, R=R, tol=plane_tol)
            entries.append(BlowdownEntry(lam, s, "planes", conf, hmax))
    if any(e.tag != "planes" for e in entries):
        verdict = "non_static"
    else:
        ref = entries[0].configuration
        same = all(e.configuration.matches(ref, angle_tol) for e in entries)
        verdict = "static" if same else "non_static"
    return BlowdownProbe(scales, s_values, entries, verdict, True, osc, {"non_almost_calibrated": False})


# -- barrier and decay -------------------------------------------------------------


def barrier_value(x, alpha, delta, B):
    """``B |x|^{-alpha} exp(-|x|/2) + delta exp(x1/2)``."""
    x = np.asarray(x, float)
    r = ambient.norm(x)
    with np.errstate(divide="ignore"):
        return B * r ** (-alpha) * np.exp(-0.5 * r) + delta * np.exp(0.5 * x[..., 0])


@dataclass
class BarrierReport:
    residual: np.ndarray
    radius: np.ndarray
    mask: np.ndarray
    excluded: int
    R0: float
    alpha: float
    delta: float
    B: float

    def to_dict(self):
        vals = self.residual[self.mask]
        return {
            "R0": self.R0,
            "alpha": self.alpha,
            "delta": self.delta,
            "B": self.B,
            "excluded": self.excluded,
            "max_residual": float(vals.max()) if vals.size else None,
            "nodes": int(self.mask.sum()),
        }


def barrier_residual(p, alpha, delta, B, r_min=0.1, band=3):
    """``Delta V - V (|H|^2 + 1) / 4`` for ``V = barrier_value``, per node.

    Nodes with ``|x| < r_min`` are excluded (``nan``) and counted, together
    with the nodes whose difference stencils reach them.  ``R0`` is the
    largest ``|x|`` among interior nodes with positive residual (0 if none),
    the scanned radius beyond which the residual is non-positive.
    """
    if not alpha < 1.0 / 3.0:
        raise DomainError("barrier needs alpha < 1/3")
    r = ambient.norm(p.positions)
    inner = r < r_min
    close = ndimage.binary_dilation(inner, structure=np.ones((3, 3), bool), iterations=2) if inner.any() else inner
    V = barrier_value(p.positions, alpha, delta, B)
    V = np.where(inner, 0.0, V)
    H2 = ambient.inner(p.mean_curvature, p.mean_curvature)
    res = sf.laplace_beltrami(p, V) - V * (H2 + 1.0) / 4.0
    res = np.where(close, np.nan, res)
    mask = p.interior_mask(band) & ~close
    pos = mask & (res > 0)
    R0 = float(r[pos].max()) if pos.any() else 0.0
    return BarrierReport(res, r, mask, int(close.sum()), R0, float(alpha), float(delta), float(B))


def decay_envelope(p, theta_bar, alpha, B, theta=None):
    """Margin ``B |x|^{-alpha} exp(-|x|/2 - x1/2) - (|theta - theta_bar| + |grad theta|)`` per node."""
    if not alpha < 1.0 / 3.0:
        raise DomainError("decay envelope needs alpha < 1/3")
    theta = sf.lagrangian_angle(p) if theta is None else theta
    x = p.positions
    r = ambient.norm(x)
    with np.errstate(divide="ignore"):
        env = B * r ** (-alpha) * np.exp(-0.5 * r - 0.5 * x[..., 0])
    lhs = np.abs(theta - theta_bar) + ambient.norm(sf.intrinsic_gradient(p, theta))
    return env - lhs


# -- Laplace integral -------------------------------------------------------------------


def laplace_integral(r):
    """``int_0^{2 pi} exp(-r - r cos t) dt`` by adaptive quadrature (absolute tolerance 1e-10)."""
    if r < 0:
        raise DomainError("r must be non-negative")
    if r == 0:
        return 2.0 * math.pi
    val, _ = spi.quad(lambda t: math.exp(-r - r * math.cos(t)), 0.0, 2.0 * math.pi, points=[math.pi], epsabs=1e-10, epsrel=1e-12, limit=200)
    return val


# -- translator identities -----------------------------------------------------------


def translator_residuals(p, direction=ambient.E1, band=3, theta_bar=0.0):
    """Residual fields of the translator identities on one patch.

    Keys: ``translator`` (|H - e^perp|), ``theta_const`` (theta + <J e, x>,
    spread taken by the caller), ``norm_H`` (||H| - |e^perp||), ``laplace_x1``
    (Delta x1 - |H|^2), ``laplace_theta`` (Delta theta + <grad theta, e>),
    ``cos_theta`` and ``eigen`` (the cosine and exponential-weight identities).
    """
    e = np.asarray(direction, float)
    x = p.positions
    H = p.mean_curvature
    ep = p.normal(e)
    th = sf.lagrangian_angle(p)
    H2 = ambient.inner(H, H)
    x1 = ambient.inner(x, e)
    grad_th = sf.intrinsic_gradient(p, th)
    c = np.cos(th)
    u = (th - theta_bar) * np.exp(0.5 * x1)
    return {
        "translator": ambient.norm(H - ep),
        "theta_const": th + ambient.inner(ambient.apply_J(e), x),
        "norm_H": np.abs(ambient.norm(H) - ambient.norm(ep)),
        "laplace_x1": sf.laplace_beltrami(p, x1) - H2,
        "laplace_theta": sf.laplace_beltrami(p, th) + ambient.inner(grad_th, e),
        "cos_theta": sf.laplace_beltrami(p, c) + ambient.inner(sf.intrinsic_gradient(p, c), e) + c * H2,
        "eigen": sf.laplace_beltrami(p, u) - u * (H2 + 1.0) / 4.0,
    }


def residual_table(p, band=3, theta_bar=0.0):
    """Max-norm of each translator identity over interior nodes (spread for ``theta_const``)."""
    fields = translator_residuals(p, band=band, theta_bar=theta_bar)
    m = p.interior_mask(band)
    out = {}
    for k, v in fields.items():
        vals = v[m]
        out[k] = float(np.ptp(vals)) if k == "theta_const" else float(np.abs(vals).max())
    return out
