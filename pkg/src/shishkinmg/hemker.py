"""Layer-fitted multi-block mesh for flow past a cylinder in a channel.

The domain is the exterior of the unit circle inside the channel
``{-4 <= y <= 4, x <= 4}``, bounded on the left by the circle of radius 4.
Four logically rectangular blocks cover it:

* a polar block for the left half (``pi/2 <= theta <= 3*pi/2``), radially
  graded by three nested transition points near ``r = 1``;
* a wake block right of the circle (``|y| <= 1``), horizontally uniform and
  vertically graded towards ``y = +-1``;
* two channel blocks (``1 <= |y| <= 4``) continuing the radial grading.

Horizontal grid lines in the wake block are exactly straight; interface
nodes between blocks are shared, so the mesh is conforming.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import QuadMesh
from .partition import Partition1D, from_pieces, uniform_partition

__all__ = ["hemker_sigmas", "hemker_mesh", "HemkerStructure"]


def hemker_sigmas(N: int, eps: float) -> tuple[float, float, float]:
    """Nested radial transition widths for the boundary layers at r = 1."""
    ln = math.log(N)
    s1 = min(0.25, eps * ln)
    s2 = min(0.30, eps ** (2.0 / 3.0) * ln)
    s3 = min(0.35, math.sqrt(eps) * ln)
    return s1, s2, s3


@dataclass
class HemkerStructure:
    """Logical block layout: node-id and cell-id grids plus 1D partitions."""

    N: int
    eps: float
    sigmas: tuple[float, float, float]
    radial: Partition1D        # [1, 4], graded near 1
    theta: Partition1D         # [pi/2, 3*pi/2], uniform
    tmid: Partition1D          # [-1, 1], graded near +-1
    pxr: Partition1D           # [0, 4], uniform, right-half horizontal
    polar: np.ndarray          # (R+1, N+1) node ids, [radial, angular]
    top: np.ndarray            # (R+1, nx+1) node ids, [vertical, horizontal]
    bottom: np.ndarray         # (R+1, nx+1)
    mid: np.ndarray            # (nt+1, nx+1) node ids, [vertical, horizontal]
    polar_cells: np.ndarray    # (R, N) cell ids
    top_cells: np.ndarray
    bottom_cells: np.ndarray
    mid_cells: np.ndarray

    @property
    def block_nodes(self) -> list[np.ndarray]:
        return [self.polar, self.top, self.bottom, self.mid]

    @property
    def block_cells(self) -> list[np.ndarray]:
        return [self.polar_cells, self.top_cells,
                self.bottom_cells, self.mid_cells]

    def node_ownership(self, n_nodes: int):
        """First-block ownership of every node: (block, row, col) arrays."""
        owner = np.full(n_nodes, -1, dtype=np.int64)
        row = np.zeros(n_nodes, dtype=np.int64)
        col = np.zeros(n_nodes, dtype=np.int64)
        for b, grid in enumerate(self.block_nodes):
            kk, jj = np.indices(grid.shape)
            flat, kk, jj = grid.ravel(), kk.ravel(), jj.ravel()
            new = owner[flat] == -1
            owner[flat[new]] = b
            row[flat[new]] = kk[new]
            col[flat[new]] = jj[new]
        return owner, row, col


def _radial_partition(N: int, sigmas) -> Partition1D:
    s1, s2, s3 = sigmas
    return from_pieces(
        [1.0, 1.0 + s1, 1.0 + s2, 1.0 + s3, 4.0],
        [N // 4, N // 4, N // 4, N // 2],
        ("hemker-radial-layer-0", "hemker-radial-layer-1",
         "hemker-radial-layer-2", "hemker-outer"),
    )


def hemker_mesh(N: int, eps: float, transition_n: int | None = None) -> QuadMesh:
    """Conforming multi-block mesh with N angular intervals on the half circle.

    ``transition_n`` pins the transition widths to a finer target resolution
    so that coarsened meshes nest inside the finest one.
    """
    if N < 8 or N % 4 != 0:
        raise ValueError("N must be a multiple of 4 and at least 8")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    nt_ref = N if transition_n is None else int(transition_n)
    sigmas = hemker_sigmas(nt_ref, eps)
    s3 = sigmas[2]

    radial = _radial_partition(N, sigmas)
    theta = uniform_partition(N, math.pi / 2.0, 3.0 * math.pi / 2.0)
    tmid = from_pieces([-1.0, -(1.0 - s3), 1.0 - s3, 1.0],
                       [N // 2, N // 2, N // 2],
                       ("wake-band", "wake-core", "wake-band"))
    pxr = uniform_partition(N // 2, 0.0, 4.0)

    R = radial.n_cells            # 5N/4 radial intervals
    nx = pxr.n_cells              # N/2 horizontal intervals on the right
    ntv = tmid.n_cells            # 3N/2 vertical intervals in the wake

    r = radial.breakpoints
    th = theta.breakpoints
    ct, st = np.cos(th), np.sin(th)
    ct[0], st[0] = 0.0, 1.0       # exact verticals on the x = 0 rays
    ct[-1], st[-1] = 0.0, -1.0
    xh = pxr.breakpoints
    t = tmid.breakpoints
    circ = np.sqrt(np.clip(1.0 - t * t, 0.0, None))   # circle abscissa at height t

    coords: list[np.ndarray] = []
    count = 0

    def alloc(xs, ys):
        nonlocal count
        n = xs.size
        coords.append(np.column_stack([xs.ravel(), ys.ravel()]))
        ids = np.arange(count, count + n).reshape(xs.shape)
        count += n
        return ids

    polar = alloc(np.outer(r, ct), np.outer(r, st))

    top = np.empty((R + 1, nx + 1), dtype=np.int64)
    top[:, 0] = polar[:, 0]                            # shared ray x = 0, y > 0
    top[:, 1:] = alloc(np.broadcast_to(xh[1:], (R + 1, nx)).copy(),
                       np.broadcast_to(r[:, None], (R + 1, nx)).copy())

    bottom = np.empty((R + 1, nx + 1), dtype=np.int64)
    bottom[:, 0] = polar[:, -1]                        # shared ray x = 0, y < 0
    bottom[:, 1:] = alloc(np.broadcast_to(xh[1:], (R + 1, nx)).copy(),
                          np.broadcast_to(-r[:, None], (R + 1, nx)).copy())

    mid = np.empty((ntv + 1, nx + 1), dtype=np.int64)
    mid[0, :] = bottom[0, :]                           # shared row y = -1
    mid[-1, :] = top[0, :]                             # shared row y = +1
    s_frac = xh / 4.0
    xm = circ[1:-1, None] + (4.0 - circ[1:-1, None]) * s_frac[None, :]
    ym = np.broadcast_to(t[1:-1, None], xm.shape).copy()
    mid[1:-1, :] = alloc(xm, ym)

    nodes = np.concatenate(coords, axis=0)

    cells: list[np.ndarray] = []
    tags: list[np.ndarray] = []
    ccount = 0

    def add_cells(v00, v10, v11, v01, tag_per_cell):
        nonlocal ccount
        quads = np.column_stack([v00.ravel(), v10.ravel(),
                                 v11.ravel(), v01.ravel()])
        cells.append(quads)
        tags.append(np.asarray(tag_per_cell, dtype=object).ravel())
        ids = np.arange(ccount, ccount + len(quads)).reshape(v00.shape)
        ccount += len(quads)
        return ids

    rad_labels = np.array([radial.piece_labels[p] for p in radial.cell_pieces()],
                          dtype=object)
    polar_cells = add_cells(polar[:-1, :-1], polar[1:, :-1],
                            polar[1:, 1:], polar[:-1, 1:],
                            np.broadcast_to(rad_labels[:, None], (R, N)))
    top_cells = add_cells(top[:-1, :-1], top[:-1, 1:],
                          top[1:, 1:], top[1:, :-1],
                          np.full((R, nx), "hemker-channel", dtype=object))
    bottom_cells = add_cells(bottom[1:, :-1], bottom[1:, 1:],
                             bottom[:-1, 1:], bottom[:-1, :-1],
                             np.full((R, nx), "hemker-channel", dtype=object))
    mid_cells = add_cells(mid[:-1, :-1], mid[:-1, 1:],
                          mid[1:, 1:], mid[1:, :-1],
                          np.full((ntv, nx), "hemker-wake", dtype=object))

    boundary: dict[int, str] = {}

    def tag_nodes(ids, tag):
        for nid in np.asarray(ids).ravel():
            boundary.setdefault(int(nid), tag)

    tag_nodes(polar[0, :], "circle")
    tag_nodes(mid[:, 0], "circle")
    tag_nodes(polar[-1, :], "outer-arc")
    tag_nodes(top[-1, :], "cap")
    tag_nodes(bottom[-1, :], "cap")
    tag_nodes(top[:, -1], "outflow")
    tag_nodes(bottom[:, -1], "outflow")
    tag_nodes(mid[:, -1], "outflow")

    structure = HemkerStructure(
        N=N, eps=eps, sigmas=sigmas,
        radial=radial, theta=theta, tmid=tmid, pxr=pxr,
        polar=polar, top=top, bottom=bottom, mid=mid,
        polar_cells=polar_cells, top_cells=top_cells,
        bottom_cells=bottom_cells, mid_cells=mid_cells,
    )
    return QuadMesh(nodes, np.concatenate(cells, axis=0), boundary,
                    np.concatenate(tags), structure)
