"""Bilinear (Q1) reference element on [0,1]^2 and tensor Gauss rules."""

from __future__ import annotations

import numpy as np

__all__ = [
    "gauss_rule_1d",
    "gauss_points_2d",
    "shape_functions",
    "shape_gradients",
    "invert_bilinear",
]

# Local node order matches counterclockwise cell connectivity:
# (0,0), (1,0), (1,1), (0,1) in reference coordinates.


def gauss_rule_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [0, 1]."""
    pts, wts = np.polynomial.legendre.leggauss(n)
    return 0.5 * (pts + 1.0), 0.5 * wts


def gauss_points_2d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule: points (n*n, 2) and weights (n*n,) on [0,1]^2."""
    p, w = gauss_rule_1d(n)
    xi, eta = np.meshgrid(p, p, indexing="ij")
    wts = np.outer(w, w)
    return np.column_stack([xi.ravel(), eta.ravel()]), wts.ravel()


def shape_functions(xi, eta) -> np.ndarray:
    """Q1 basis values; shape (4,) for scalars, (4, ...) for arrays."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return np.stack([
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ])


def shape_gradients(xi, eta) -> np.ndarray:
    """Q1 reference gradients; shape (4, 2) for scalar (xi, eta)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    dxi = np.stack([-(1.0 - eta), 1.0 - eta, eta, -eta])
    deta = np.stack([-(1.0 - xi), -xi, xi, 1.0 - xi])
    return np.stack([dxi, deta], axis=-1)


def invert_bilinear(quads: np.ndarray, points: np.ndarray,
                    tol: float = 1e-14, maxit: int = 40) -> np.ndarray:
    """Reference coordinates of ``points`` under each quad's bilinear map.

    ``quads`` has shape (m, 4, 2) and ``points`` (m, 2); one point per quad.
    Newton iteration started at the cell center; results may fall outside
    [0,1]^2, which callers use for extrapolation near curved boundaries.
    """
    quads = np.asarray(quads, dtype=float)
    points = np.asarray(points, dtype=float)
    m = quads.shape[0]
    ref = np.full((m, 2), 0.5)
    scale = np.maximum(np.ptp(quads[:, :, 0], axis=1),
                       np.ptp(quads[:, :, 1], axis=1))
    for _ in range(maxit):
        n4 = shape_functions(ref[:, 0], ref[:, 1])          # (4, m)
        pos = np.einsum("am,mad->md", n4, quads)
        res = pos - points
        if np.all(np.abs(res) <= tol * scale[:, None]):
            break
        dn = shape_gradients(ref[:, 0], ref[:, 1])          # (4, m, 2)
        jac = np.einsum("mad,amj->mdj", quads, dn)          # d pos_d / d ref_j
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        dxi = (jac[:, 1, 1] * res[:, 0] - jac[:, 0, 1] * res[:, 1]) / det
        deta = (-jac[:, 1, 0] * res[:, 0] + jac[:, 0, 0] * res[:, 1]) / det
        ref[:, 0] -= dxi
        ref[:, 1] -= deta
    # Snap to exact corners so coincident nodes interpolate with a single 1.
    for v in (0.0, 1.0):
        ref[np.abs(ref - v) < 1e-12] = v
    return ref
