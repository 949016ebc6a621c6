"""Nested mesh hierarchies for geometric multigrid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hemker import HemkerStructure, hemker_mesh
from .mesh import QuadMesh, TensorStructure, tensor_product_mesh
from .partition import exp_partition, parab_partition, uniform_partition
from .q1 import invert_bilinear

__all__ = ["ParentMap", "MeshHierarchy", "square_hierarchy", "hemker_hierarchy"]


@dataclass
class ParentMap:
    """For every fine node: the containing coarse cell and reference coords.

    Reference coordinates may fall slightly outside [0,1]^2 for nodes snapped
    to curved geometry; interpolation then extrapolates the bilinear map of
    the assigned cell.
    """

    cells: np.ndarray   # (n_fine,) coarse cell index
    ref: np.ndarray     # (n_fine, 2)


@dataclass
class MeshHierarchy:
    """Meshes ordered finest first (level 1) to coarsest (level C).

    ``parent_maps[l]`` relates the nodes of ``meshes[l]`` to the cells of the
    next coarser mesh ``meshes[l+1]``.
    """

    meshes: list
    parent_maps: list

    @property
    def n_levels(self) -> int:
        return len(self.meshes)

    @property
    def finest(self) -> QuadMesh:
        return self.meshes[0]

    @property
    def coarsest(self) -> QuadMesh:
        return self.meshes[-1]


def _level_sizes(N_fine: int, levels: int, coarse_min: int, multiple: int) -> list[int]:
    if levels < 1:
        raise ValueError("levels must be at least 1")
    if N_fine % (1 << (levels - 1)) != 0:
        raise ValueError("N_fine must be divisible by 2**(levels-1)")
    sizes = [N_fine >> l for l in range(levels)]
    for n in sizes:
        if n < coarse_min or n % multiple != 0:
            raise ValueError(
                f"level size {n} invalid: need multiples of {multiple} "
                f"no smaller than {coarse_min}")
    return sizes


def _tensor_parent_map(fine: QuadMesh, coarse: QuadMesh) -> ParentMap:
    fs: TensorStructure = fine.structure
    cs: TensorStructure = coarse.structure
    ii, jj = np.meshgrid(np.arange(fs.nx + 1), np.arange(fs.ny + 1),
                         indexing="xy")
    ci = np.minimum(ii.ravel() // 2, cs.nx - 1)
    cj = np.minimum(jj.ravel() // 2, cs.ny - 1)
    cells = cs.cell_id(ci, cj)
    quads = coarse.nodes[coarse.cells[cells]]
    ref = invert_bilinear(quads, fine.nodes)
    return ParentMap(cells.astype(np.int64), ref)


def _hemker_parent_map(fine: QuadMesh, coarse: QuadMesh) -> ParentMap:
    fs: HemkerStructure = fine.structure
    cs: HemkerStructure = coarse.structure
    owner, row, col = fs.node_ownership(fine.n_nodes)
    cells = np.empty(fine.n_nodes, dtype=np.int64)
    for b, grid in enumerate(cs.block_cells):
        sel = owner == b
        ck = np.minimum(row[sel] // 2, grid.shape[0] - 1)
        cj = np.minimum(col[sel] // 2, grid.shape[1] - 1)
        cells[sel] = grid[ck, cj]
    quads = coarse.nodes[coarse.cells[cells]]
    ref = invert_bilinear(quads, fine.nodes)
    return ParentMap(cells, ref)


def square_hierarchy(N_fine: int, eps: float, layout: str, levels: int,
                     sigma: float = 2.5) -> MeshHierarchy:
    """Unit-square hierarchy with transition points fixed by the finest grid.

    ``layout`` selects the 1D partitions: ``"exp-and-parab"`` pairs an
    exponential-layer x-partition with a parabolic-layer y-partition;
    ``"parab-only"`` uses a uniform x-partition instead.  Every level is
    built directly from the same transition points, so coarse breakpoints
    coincide bitwise with fine ones.
    """
    if layout not in ("exp-and-parab", "parab-only"):
        raise ValueError(f"unknown layout {layout!r}")
    sizes = _level_sizes(N_fine, levels, coarse_min=8, multiple=4)
    meshes = []
    for n in sizes:
        if layout == "exp-and-parab":
            px = exp_partition(n, eps, sigma, transition_n=N_fine)
        else:
            px = uniform_partition(n)
        py = parab_partition(n, eps, sigma, transition_n=N_fine)
        meshes.append(tensor_product_mesh(px, py, boundary_tag="boundary"))
    maps = [_tensor_parent_map(meshes[l], meshes[l + 1])
            for l in range(levels - 1)]
    return MeshHierarchy(meshes, maps)


def hemker_hierarchy(N_fine: int, eps: float, levels: int) -> MeshHierarchy:
    """Hemker-domain hierarchy; every level snaps to the exact geometry.

    Coarser levels reuse the finest level's transition widths, so block
    parameterizations nest and coarse nodes coincide with fine ones.
    """
    sizes = _level_sizes(N_fine, levels, coarse_min=8, multiple=4)
    meshes = [hemker_mesh(n, eps, transition_n=N_fine) for n in sizes]
    maps = [_hemker_parent_map(meshes[l], meshes[l + 1])
            for l in range(levels - 1)]
    return MeshHierarchy(meshes, maps)
