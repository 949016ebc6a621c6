"""Logically structured quadrilateral meshes with layer-region tags."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .partition import Partition1D
from .q1 import gauss_points_2d, shape_gradients

__all__ = [
    "QuadMesh",
    "TensorStructure",
    "tensor_product_mesh",
    "cell_diameters",
    "cell_jacobians",
    "check_positive_jacobians",
    "boundary_node_set",
    "write_vtk",
]


@dataclass
class TensorStructure:
    """Logical layout of a tensor-product mesh (node id = j*(nx+1) + i)."""

    px: Partition1D
    py: Partition1D

    @property
    def nx(self) -> int:
        return self.px.n_cells

    @property
    def ny(self) -> int:
        return self.py.n_cells

    def node_id(self, i, j):
        return np.asarray(j) * (self.nx + 1) + np.asarray(i)

    def cell_id(self, i, j):
        return np.asarray(j) * self.nx + np.asarray(i)


@dataclass
class QuadMesh:
    """Quadrilateral mesh: nodes, counterclockwise cells, boundary/region tags.

    ``boundary_tags`` maps boundary node index to a tag string (or a tuple of
    tags when several boundary pieces meet at the node).  ``region_tags``
    holds one layer-region label per cell.  ``structure`` carries optional
    logical-layout metadata used for refinement and line-block construction.
    """

    nodes: np.ndarray
    cells: np.ndarray
    boundary_tags: dict = field(default_factory=dict)
    region_tags: np.ndarray = None
    structure: object = None

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.cells = np.asarray(self.cells, dtype=np.int64)
        if self.region_tags is None:
            self.region_tags = np.full(len(self.cells), "untagged", dtype=object)
        else:
            self.region_tags = np.asarray(self.region_tags, dtype=object)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_cells(self) -> int:
        return len(self.cells)


def _combined_region_tag(x_label: str, y_label: str) -> str:
    parts = [lab for lab in (x_label, y_label) if lab.endswith("layer")]
    return "+".join(parts) if parts else "interior"


def tensor_product_mesh(px: Partition1D, py: Partition1D,
                        boundary_tag: str = "boundary") -> QuadMesh:
    """Tensor mesh of [a,b] x [c,d] from two 1D partitions.

    Cells are tagged by the pieces their (x, y) intervals fall in, so an
    exp-by-parab pair yields the standard layer dissection of the unit
    square.  All four outer edges are tagged with ``boundary_tag``.
    """
    bx, by = px.breakpoints, py.breakpoints
    nx, ny = px.n_cells, py.n_cells
    X, Y = np.meshgrid(bx, by)                      # row-major: Y varies slowly
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii, jj = ii.ravel(), jj.ravel()
    n0 = jj * (nx + 1) + ii
    cells = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1])

    xp = px.cell_pieces()
    yp = py.cell_pieces()
    tags = np.empty(nx * ny, dtype=object)
    for p in range(px.n_pieces):
        for q in range(py.n_pieces):
            mask = (xp[ii] == p) & (yp[jj] == q)
            tags[mask] = _combined_region_tag(px.piece_labels[p],
                                              py.piece_labels[q])

    boundary = {}
    edge = np.zeros((ny + 1, nx + 1), dtype=bool)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    for nid in np.flatnonzero(edge.ravel()):
        boundary[int(nid)] = boundary_tag

    return QuadMesh(nodes, cells, boundary, tags, TensorStructure(px, py))


def cell_diameters(mesh: QuadMesh) -> np.ndarray:
    """Cell diameter h_T: the longest distance between any two corners."""
    X = mesh.nodes[mesh.cells]                      # (m, 4, 2)
    h2 = np.zeros(mesh.n_cells)
    for a in range(4):
        for b in range(a + 1, 4):
            d = X[:, a, :] - X[:, b, :]
            h2 = np.maximum(h2, np.einsum("md,md->m", d, d))
    return np.sqrt(h2)


def cell_jacobians(mesh: QuadMesh, nquad: int = 2) -> np.ndarray:
    """Jacobian determinants at the tensor Gauss points, shape (m, nq)."""
    X = mesh.nodes[mesh.cells]
    pts, _ = gauss_points_2d(nquad)
    out = np.empty((mesh.n_cells, len(pts)))
    for q, (xi, eta) in enumerate(pts):
        dn = shape_gradients(xi, eta)               # (4, 2)
        jac = np.einsum("mad,aj->mdj", X, dn)
        out[:, q] = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    return out


def check_positive_jacobians(mesh: QuadMesh, nquad: int = 2) -> None:
    det = cell_jacobians(mesh, nquad)
    if np.any(det <= 0.0):
        bad = int(np.argwhere(np.any(det <= 0.0, axis=1))[0, 0])
        raise ValueError(f"cell {bad} has a nonpositive jacobian")


def boundary_node_set(mesh: QuadMesh) -> np.ndarray:
    """Node indices that lie on the mesh boundary (edges used by one cell)."""
    edges = {}
    for cell in mesh.cells:
        for a in range(4):
            key = tuple(sorted((int(cell[a]), int(cell[(a + 1) % 4]))))
            edges[key] = edges.get(key, 0) + 1
    nodes = set()
    for (i, j), count in edges.items():
        if count == 1:
            nodes.update((i, j))
    return np.array(sorted(nodes), dtype=np.int64)


def write_vtk(mesh: QuadMesh, path, point_data: dict | None = None,
              title: str = "quad mesh") -> None:
    """Export in legacy ASCII VTK (unstructured grid, cell type 9)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_nodes} double\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.16g} {y:.16g} 0.0\n")
        fh.write(f"CELLS {mesh.n_cells} {5 * mesh.n_cells}\n")
        for cell in mesh.cells:
            fh.write("4 " + " ".join(str(int(v)) for v in cell) + "\n")
        fh.write(f"CELL_TYPES {mesh.n_cells}\n")
        fh.write("9\n" * mesh.n_cells)
        tag_ids = {tag: k for k, tag in
                   enumerate(sorted(set(mesh.region_tags)))}
        fh.write(f"CELL_DATA {mesh.n_cells}\n")
        fh.write("SCALARS region int 1\nLOOKUP_TABLE default\n")
        for tag in mesh.region_tags:
            fh.write(f"{tag_ids[tag]}\n")
        if point_data:
            fh.write(f"POINT_DATA {mesh.n_nodes}\n")
            for name, values in point_data.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in np.asarray(values, dtype=float):
                    fh.write(f"{v:.16g}\n")
