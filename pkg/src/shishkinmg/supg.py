"""SUPG assembly of convection-diffusion operators on quadrilateral meshes.

The operator form is ``-eps*lap(u) + beta . grad(u) + c*u = f`` with
streamline-diffusion test functions ``v + tau * beta . grad(v)``.  The
second-order term inside the stabilization sum is dropped: it vanishes
identically for Q1 elements on axis-aligned rectangles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import CsrMatrix
from .mesh import QuadMesh, cell_diameters
from .q1 import gauss_rule_1d, shape_functions, shape_gradients

__all__ = [
    "TauRule",
    "ProblemSpec",
    "AssemblyError",
    "cell_peclet",
    "stabilization_tau",
    "assemble_supg",
    "dirichlet_values",
    "dirichlet_nodes",
    "apply_dirichlet",
]


class AssemblyError(RuntimeError):
    pass


@dataclass
class TauRule:
    """Per-cell stabilization parameter from (region tag, h_T, Pe_T)."""

    classifier: callable
    name: str = "custom"

    def __call__(self, tag: str, h: float, pe: float) -> float:
        tau = float(self.classifier(tag, h, pe))
        if tau < 0.0:
            raise ValueError(f"negative stabilization {tau} on tag {tag!r}")
        return tau


@dataclass
class ProblemSpec:
    """Coefficients, boundary data and stabilization rule of one problem.

    ``convection``, ``reaction`` and ``rhs`` must accept numpy arrays
    (they are evaluated at all quadrature points of all cells at once);
    ``dirichlet(tag, x, y)`` is evaluated per boundary node.
    """

    eps: float
    convection: callable
    reaction: callable
    rhs: callable
    dirichlet: callable
    neumann_tags: frozenset = frozenset()
    tau_rule: TauRule = field(default_factory=lambda: TauRule(lambda t, h, p: 0.0, "galerkin"))

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ValueError("eps must lie in (0, 1]")
        self.neumann_tags = frozenset(self.neumann_tags)


def cell_peclet(cell_coords: np.ndarray, beta_at_center, eps: float) -> float:
    """Mesh Peclet number |beta| h_T / (2 eps) of a single cell."""
    X = np.asarray(cell_coords, dtype=float)
    h = 0.0
    for a in range(4):
        for b in range(a + 1, 4):
            h = max(h, float(np.hypot(*(X[a] - X[b]))))
    bnorm = float(np.hypot(float(beta_at_center[0]), float(beta_at_center[1])))
    return bnorm * h / (2.0 * eps)


def stabilization_tau(rule: TauRule, region_tag: str, h: float, pe: float) -> float:
    """Nonnegative stabilization parameter for one cell."""
    return rule(region_tag, h, pe)


def _cell_taus(mesh: QuadMesh, spec: ProblemSpec) -> np.ndarray:
    X = mesh.nodes[mesh.cells]
    h = cell_diameters(mesh)
    n4 = shape_functions(0.5, 0.5)
    xc = X[:, :, 0] @ n4
    yc = X[:, :, 1] @ n4
    bx, by = spec.convection(xc, yc)
    bx = np.broadcast_to(np.asarray(bx, float), xc.shape)
    by = np.broadcast_to(np.asarray(by, float), yc.shape)
    pe = np.hypot(bx, by) * h / (2.0 * spec.eps)
    return np.array([spec.tau_rule(tag, float(ht), float(pt))
                     for tag, ht, pt in zip(mesh.region_tags, h, pe)])


def assemble_supg(mesh: QuadMesh, spec: ProblemSpec,
                  nquad: int = 2) -> tuple[CsrMatrix, np.ndarray]:
    """Assemble the SUPG stiffness matrix and load vector (no BCs applied).

    Entry (i, j) is the bilinear form applied to (trial phi_j, test phi_i),
    integrated cell by cell with an ``nquad`` x ``nquad`` Gauss rule.
    """
    X = mesh.nodes[mesh.cells]                     # (m, 4, 2)
    m = mesh.n_cells
    tau = _cell_taus(mesh, spec)
    pts, wts = gauss_rule_1d(nquad)

    Ke = np.zeros((m, 4, 4))
    Fe = np.zeros((m, 4))
    for xi, wx in zip(pts, wts):
        for eta, wy in zip(pts, wts):
            n4 = shape_functions(xi, eta)          # (4,)
            dn = shape_gradients(xi, eta)          # (4, 2)
            jac = np.einsum("mad,aj->mdj", X, dn)  # d x_d / d ref_j
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            if np.any(det <= 0.0):
                bad = int(np.flatnonzero(det <= 0.0)[0])
                raise AssemblyError(
                    f"cell {bad} has nonpositive jacobian {det[bad]:.3e}")
            inv = np.empty_like(jac)               # inverse, [m, j, d]
            inv[:, 0, 0] = jac[:, 1, 1] / det
            inv[:, 0, 1] = -jac[:, 0, 1] / det
            inv[:, 1, 0] = -jac[:, 1, 0] / det
            inv[:, 1, 1] = jac[:, 0, 0] / det
            grad = np.einsum("aj,mjd->mad", dn, inv)   # physical gradients

            xq = X[:, :, 0] @ n4
            yq = X[:, :, 1] @ n4
            bx, by = spec.convection(xq, yq)
            bx = np.broadcast_to(np.asarray(bx, float), xq.shape)
            by = np.broadcast_to(np.asarray(by, float), xq.shape)
            c = np.broadcast_to(np.asarray(spec.reaction(xq, yq), float), xq.shape)
            if np.any(c < 0.0):
                raise AssemblyError("reaction coefficient is negative")
            f = np.broadcast_to(np.asarray(spec.rhs(xq, yq), float), xq.shape)

            bgrad = bx[:, None] * grad[:, :, 0] + by[:, None] * grad[:, :, 1]
            w = (wx * wy) * det
            diff = np.einsum("mid,mjd->mij", grad, grad)
            conv = np.einsum("i,mj->mij", n4, bgrad)
            mass = c[:, None, None] * np.einsum("i,j->ij", n4, n4)[None, :, :]
            trial = bgrad + c[:, None] * n4[None, :]
            stab = tau[:, None, None] * np.einsum("mi,mj->mij", bgrad, trial)
            Ke += w[:, None, None] * (spec.eps * diff + conv + mass + stab)
            Fe += (w * f)[:, None] * (n4[None, :] + tau[:, None] * bgrad)

    rows = np.repeat(mesh.cells, 4, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 4)).ravel()
    A = CsrMatrix.from_coo(rows, cols, Ke.ravel(),
                           (mesh.n_nodes, mesh.n_nodes))
    b = np.zeros(mesh.n_nodes)
    np.add.at(b, mesh.cells.ravel(), Fe.ravel())
    return A, b


def _node_tags(mesh: QuadMesh, node: int):
    tags = mesh.boundary_tags[node]
    return (tags,) if isinstance(tags, str) else tuple(tags)


def dirichlet_values(mesh: QuadMesh, spec: ProblemSpec) -> dict[int, float]:
    """Boundary node -> value map; rejects conflicting Dirichlet data."""
    out: dict[int, float] = {}
    for node in mesh.boundary_tags:
        x, y = mesh.nodes[node]
        vals = [spec.dirichlet(tag, x, y) for tag in _node_tags(mesh, node)
                if tag not in spec.neumann_tags]
        if not vals:
            continue
        if max(vals) - min(vals) > 1e-12 * max(1.0, abs(vals[0])):
            raise ValueError(f"node {node} carries conflicting Dirichlet values {vals}")
        out[int(node)] = float(vals[0])
    return out


def dirichlet_nodes(mesh: QuadMesh, spec: ProblemSpec) -> np.ndarray:
    return np.array(sorted(dirichlet_values(mesh, spec)), dtype=np.int64)


def apply_dirichlet(A: CsrMatrix, b: np.ndarray, mesh: QuadMesh,
                    spec: ProblemSpec) -> tuple[CsrMatrix, np.ndarray]:
    """Replace Dirichlet rows with identity rows; columns stay untouched."""
    values = dirichlet_values(mesh, spec)
    sp = A.to_scipy().tolil()  # row surgery is simplest in LIL form
    bnew = np.asarray(b, dtype=float).copy()
    for node, val in values.items():
        sp.rows[node] = [node]
        sp.data[node] = [1.0]
        bnew[node] = val
    return CsrMatrix.from_scipy(sp.tocsr()), bnew
