"""Piecewise-uniform 1D partitions with layer transition points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Partition1D",
    "uniform_partition",
    "exp_partition",
    "parab_partition",
    "dump_partition",
]

_UNIFORMITY_RTOL = 1e-12


@dataclass
class Partition1D:
    """Strictly increasing breakpoints on [a, b], uniform within each piece.

    Pieces are delimited by ``transition_indices``, which index into
    ``breakpoints`` (endpoints excluded).  ``piece_labels`` names each piece
    and is used downstream to tag mesh cells by layer region.
    """

    breakpoints: np.ndarray
    transition_indices: tuple[int, ...] = ()
    piece_labels: tuple[str, ...] = ()

    def __post_init__(self):
        self.breakpoints = np.asarray(self.breakpoints, dtype=float)
        if self.breakpoints.ndim != 1 or self.breakpoints.size < 2:
            raise ValueError("a partition needs at least two breakpoints")
        if not np.all(np.diff(self.breakpoints) > 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        self.transition_indices = tuple(int(t) for t in self.transition_indices)
        for t in self.transition_indices:
            if not 0 < t < self.breakpoints.size - 1:
                raise ValueError(f"transition index {t} out of range")
        if list(self.transition_indices) != sorted(set(self.transition_indices)):
            raise ValueError("transition indices must be sorted and unique")
        if not self.piece_labels:
            self.piece_labels = tuple(f"piece-{k}" for k in range(self.n_pieces))
        self.piece_labels = tuple(self.piece_labels)
        if len(self.piece_labels) != self.n_pieces:
            raise ValueError("need exactly one label per piece")
        self._check_uniform_pieces()

    @property
    def a(self) -> float:
        return float(self.breakpoints[0])

    @property
    def b(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n_cells(self) -> int:
        return self.breakpoints.size - 1

    @property
    def n_pieces(self) -> int:
        return len(self.transition_indices) + 1

    def piece_index_ranges(self) -> list[tuple[int, int]]:
        """Breakpoint index range (i0, i1) of each piece, inclusive ends."""
        edges = [0, *self.transition_indices, self.n_cells]
        return [(edges[k], edges[k + 1]) for k in range(self.n_pieces)]

    def cell_pieces(self) -> np.ndarray:
        """Piece index of every cell, shape (n_cells,)."""
        out = np.empty(self.n_cells, dtype=np.int64)
        for p, (i0, i1) in enumerate(self.piece_index_ranges()):
            out[i0:i1] = p
        return out

    def spacings(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def bisect(self) -> "Partition1D":
        """Partition with every cell split in two (same pieces and labels)."""
        edges = [self.breakpoints[i] for i, _ in self.piece_index_ranges()]
        edges.append(self.breakpoints[-1])
        counts = [2 * (i1 - i0) for i0, i1 in self.piece_index_ranges()]
        return from_pieces(edges, counts, self.piece_labels)

    def _check_uniform_pieces(self):
        h = self.spacings()
        scale = self.b - self.a
        for i0, i1 in self.piece_index_ranges():
            piece = h[i0:i1]
            if piece.max() - piece.min() > _UNIFORMITY_RTOL * scale:
                raise ValueError("spacing within a piece must be uniform")


def from_pieces(edges, counts, labels=None) -> Partition1D:
    """Build a partition from piece edges and per-piece cell counts.

    Breakpoints are computed as ``lo + (hi - lo) * k / n`` so that bisected
    partitions reproduce the parent breakpoints bitwise.
    """
    edges = [float(e) for e in edges]
    counts = [int(n) for n in counts]
    if len(edges) != len(counts) + 1:
        raise ValueError("need one more edge than piece count")
    bps = [edges[0]]
    transitions = []
    for p, n in enumerate(counts):
        if n < 1:
            raise ValueError("each piece needs at least one cell")
        lo, hi = edges[p], edges[p + 1]
        for k in range(1, n):
            bps.append(lo + (hi - lo) * k / n)
        bps.append(hi)
        if p < len(counts) - 1:
            transitions.append(len(bps) - 1)
    return Partition1D(np.array(bps), tuple(transitions), tuple(labels or ()))


def uniform_partition(N: int, a: float = 0.0, b: float = 1.0,
                      label: str = "uniform") -> Partition1D:
    if N < 1:
        raise ValueError("N must be positive")
    return from_pieces([a, b], [N], (label,))


def exp_partition(N: int, eps: float, sigma: float = 2.5,
                  transition_n: int | None = None) -> Partition1D:
    """Two-piece layer partition of [0, 1] for an exponential layer at 0.

    The transition point is ``min(1/2, sigma * eps * ln(Nt))`` and each of
    the two pieces receives N/2 cells.  ``transition_n`` lets a coarsened
    partition keep the transition point of a finer target resolution.
    """
    if N < 4 or N % 2 != 0:
        raise ValueError("N must be even and at least 4")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    nt = N if transition_n is None else int(transition_n)
    lam = min(0.5, sigma * eps * math.log(nt))
    return from_pieces([0.0, lam, 1.0], [N // 2, N // 2], ("exp-layer", "outer"))


def parab_partition(N: int, eps: float, sigma: float = 2.5,
                    transition_n: int | None = None) -> Partition1D:
    """Three-piece partition of [0, 1] for parabolic layers at both ends.

    Transition points at ``lam`` and ``1 - lam`` with
    ``lam = min(1/4, sigma * sqrt(eps) * ln(Nt))``; the boundary pieces get
    N/4 cells each and the middle piece N/2.
    """
    if N < 8 or N % 4 != 0:
        raise ValueError("N must be a multiple of 4 and at least 8")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    nt = N if transition_n is None else int(transition_n)
    lam = min(0.25, sigma * math.sqrt(eps) * math.log(nt))
    return from_pieces(
        [0.0, lam, 1.0 - lam, 1.0],
        [N // 4, N // 2, N // 4],
        ("parab-layer", "mid", "parab-layer"),
    )


def dump_partition(part: Partition1D, path) -> None:
    """Write one breakpoint per line as plain text."""
    with open(path, "w", encoding="ascii") as fh:
        for x in part.breakpoints:
            fh.write(f"{x!r}\n")
