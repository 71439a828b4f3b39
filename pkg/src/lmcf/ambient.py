"""Linear structures of C^2 = R^4.

Vectors are numpy arrays whose last axis has length 4 and holds the
coordinates in the fixed order ``(x1, y1, x2, y2)``, so that
``z_j = x_j + i y_j``.  Every function broadcasts over leading axes.
"""

from typing import NamedTuple

import numpy as np

E1 = np.array([1.0, 0.0, 0.0, 0.0])

# Matrix of the complex structure: J(x1, y1, x2, y2) = (-y1, x1, -y2, x2).
J_MATRIX = np.array(
    [
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
)


class TwoFrame(NamedTuple):
    """Ordered pair of ambient vectors spanning a 2-plane."""

    a: np.ndarray
    b: np.ndarray


def vec(x1, y1, x2, y2):
    """Build an ambient vector from its four coordinates."""
    return np.array([x1, y1, x2, y2], dtype=float)


def apply_J(v):
    """Apply the standard complex structure."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    out[..., 2] = -v[..., 3]
    out[..., 3] = v[..., 2]
    return out


def symplectic_form(a, b):
    """omega(a, b) = dx1^dy1(a, b) + dx2^dy2(a, b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (
        a[..., 0] * b[..., 1]
        - a[..., 1] * b[..., 0]
        + a[..., 2] * b[..., 3]
        - a[..., 3] * b[..., 2]
    )


def to_complex(v):
    """Return ``(z1, z2)`` for ambient vector(s) ``v``."""
    v = np.asarray(v, dtype=float)
    return v[..., 0] + 1j * v[..., 1], v[..., 2] + 1j * v[..., 3]


def holomorphic_volume(a, b):
    """Omega(a, b) = dz1^dz2(a, b) as a complex number."""
    a1, a2 = to_complex(a)
    b1, b2 = to_complex(b)
    return a1 * b2 - a2 * b1


def liouville_form(base, v):
    """lambda_base(v) = sum_j x_j dy_j(v) - y_j dx_j(v)."""
    # lambda is the contraction of omega with the position vector.
    return symplectic_form(base, v)


def inner(a, b):
    """Euclidean inner product along the last axis."""
    return np.einsum("...i,...i->...", np.asarray(a, float), np.asarray(b, float))


def norm(a):
    return np.sqrt(inner(a, a))


def parallelogram_area(a, b):
    """Area of the parallelogram spanned by ``a`` and ``b``.

    Uses the 2x2 minors (Lagrange's identity) rather than the Gram
    determinant, which cancels badly for nearly parallel vectors.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    total = 0.0
    for i in range(4):
        for j in range(i + 1, 4):
            total = total + (a[..., i] * b[..., j] - a[..., j] * b[..., i]) ** 2
    return np.sqrt(total)


def plane_frame(alpha):
    """Orthonormal frame of the Lagrangian plane P_alpha = {(u, 0, v cos a, v sin a)}.

    The plane contains e1, has Lagrangian angle ``alpha`` and satisfies
    ``e1^perp = 0``.
    """
    return TwoFrame(E1.copy(), vec(0.0, 0.0, np.cos(alpha), np.sin(alpha)))


def unitary_frame(alpha):
    """Columns ``(a1, a2, J a1, J a2)`` adapted to P_alpha, as a 4x4 matrix."""
    a1, a2 = plane_frame(alpha)
    return np.stack([a1, a2, apply_J(a1), apply_J(a2)], axis=1)
