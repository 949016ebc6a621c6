"""Geometric multigrid: rediscretized operators, transfers and cycles.

Restriction is the transpose of prolongation applied to residuals; coarse
operators are assembled on each level's own mesh with the same stabilization
rule and boundary conditions.  A cycle is used as a (possibly nonlinear,
when GMRES-weighted relaxation is selected) right preconditioner for FGMRES.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockRelaxer, BlockSet
from .hierarchy import MeshHierarchy, ParentMap
from .linalg import (CsrMatrix, FgmresResult, LuFactorization,
                     chebyshev_apply, estimate_max_eig, fgmres, lu_factor)
from .mesh import QuadMesh
from .q1 import shape_functions
from .supg import ProblemSpec, apply_dirichlet, assemble_supg, dirichlet_nodes

__all__ = [
    "build_prolongation",
    "RelaxConfig",
    "MgLevel",
    "MgSolver",
    "mg_setup",
    "mg_cycle",
    "solve_fgmres",
]

log = logging.getLogger(__name__)


def build_prolongation(coarse: QuadMesh, fine: QuadMesh,
                       parent_map: ParentMap) -> CsrMatrix:
    """Q1 interpolation matrix (n_fine x n_coarse) from a parent map.

    Row i holds the coarse parent cell's basis values at fine node i's
    reference coordinates; each row sums to 1 even when the reference
    coordinates fall outside [0,1]^2 (extrapolated nodes near curved
    boundaries).
    """
    cells = np.asarray(parent_map.cells)
    if cells.min() < 0 or cells.max() >= coarse.n_cells:
        raise ValueError("parent map references a missing coarse cell")
    corners = coarse.cells[cells]                       # (nf, 4)
    weights = shape_functions(parent_map.ref[:, 0],
                              parent_map.ref[:, 1]).T   # (nf, 4)
    keep = np.abs(weights) > 1e-14
    rows = np.repeat(np.arange(fine.n_nodes), 4).reshape(-1, 4)[keep]
    cols = corners[keep]
    vals = weights[keep]
    return CsrMatrix.from_coo(rows, cols, vals,
                              (fine.n_nodes, coarse.n_nodes))


@dataclass
class RelaxConfig:
    """Relaxation recipe: weighting mode plus per-mesh block construction.

    ``mode`` is ``"chebyshev"`` (interval from an Arnoldi estimate of the
    relaxation-preconditioned spectrum) or ``"gmres"`` (right-preconditioned
    GMRES steps).  ``block_builder(mesh, active)`` returns the line blocks
    for one level, excluding constrained DoFs flagged by ``active``.
    """

    mode: str
    block_builder: callable
    eig_steps: int = 10

    def __post_init__(self):
        if self.mode not in ("chebyshev", "gmres"):
            raise ValueError(f"unknown relaxation mode {self.mode!r}")


@dataclass
class MgLevel:
    mesh: QuadMesh
    A: CsrMatrix
    rhs: np.ndarray
    dirichlet: np.ndarray
    relaxer: BlockRelaxer | None = None
    cheb_interval: tuple | None = None
    prolongation: CsrMatrix | None = None    # from the next coarser level
    coarse_lu: LuFactorization | None = None

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass
class MgSolver:
    levels: list
    nu1: int
    nu2: int
    gamma1: int
    gamma2: int
    mode: str
    seed: int = 0
    verbose: bool = False
    stats: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def A(self) -> CsrMatrix:
        return self.levels[0].A

    @property
    def rhs(self) -> np.ndarray:
        return self.levels[0].rhs

    def reset_stats(self):
        self.stats = {}


def mg_setup(hierarchy: MeshHierarchy, spec: ProblemSpec, relax: RelaxConfig,
             nu1: int = 2, nu2: int = 2, gamma1: int = 1, gamma2: int = 1,
             nquad: int = 2, seed: int = 0) -> MgSolver:
    """Assemble every level, build transfers, factor blocks and coarse grid."""
    if hierarchy.n_levels < 1:
        raise ValueError("hierarchy needs at least one level")
    if min(gamma1, gamma2) < 1 or min(nu1, nu2) < 0:
        raise ValueError("invalid cycle parameters")
    levels: list[MgLevel] = []
    for l, mesh in enumerate(hierarchy.meshes):
        A0, b0 = assemble_supg(mesh, spec, nquad=nquad)
        A, b = apply_dirichlet(A0, b0, mesh, spec)
        levels.append(MgLevel(mesh, A, b, dirichlet_nodes(mesh, spec)))

    C = len(levels)
    for l, st in enumerate(levels):
        if l < C - 1:
            st.prolongation = build_prolongation(
                hierarchy.meshes[l + 1], hierarchy.meshes[l],
                hierarchy.parent_maps[l])
            active = np.ones(st.n, dtype=bool)
            active[st.dirichlet] = False
            st.relaxer = BlockRelaxer(st.A, relax.block_builder(st.mesh, active))
            if relax.mode == "chebyshev":
                m_est = estimate_max_eig(st.A, st.relaxer,
                                         k=relax.eig_steps, seed=seed + l)
                if not m_est > 0.0:
                    raise RuntimeError(
                        f"nonpositive eigenvalue estimate {m_est} on level {l + 1}")
                st.cheb_interval = (1.1 * m_est / 4.0, 1.1 * m_est)
        else:
            st.coarse_lu = lu_factor(st.A)
    return MgSolver(levels, nu1, nu2, gamma1, gamma2, relax.mode, seed)


def _relax(solver: MgSolver, idx: int, u: np.ndarray, b: np.ndarray,
           nu: int) -> np.ndarray:
    if nu == 0:
        return u
    st = solver.levels[idx]
    if solver.mode == "chebyshev":
        return chebyshev_apply(st.A, st.relaxer, st.cheb_interval, nu, b, x0=u)
    return fgmres(st.A, st.relaxer, b, tol_abs=0.0, max_it=nu, x0=u).x


def mg_cycle(solver: MgSolver, l: int, u: np.ndarray, b: np.ndarray,
             gammas: tuple | None = None) -> np.ndarray:
    """One multigrid cycle on level ``l`` (1 = finest, C = coarsest).

    With (gamma1, gamma2) = (1, 1) this is a V-cycle, (2, 2) a W-cycle and
    (1, 2) an F-cycle; inner recursions after the first swap the two cycle
    counts, exactly as the defect-recursion schedule prescribes.
    """
    solver.stats[l] = solver.stats.get(l, 0) + 1
    idx = l - 1
    st = solver.levels[idx]
    if l == solver.n_levels:
        return st.coarse_lu.solve(b)

    u = _relax(solver, idx, np.asarray(u, dtype=float), b, solver.nu1)
    r = b - st.A @ u
    r[st.dirichlet] = 0.0
    if solver.verbose:
        log.info("level %d pre-relaxed residual %.3e", l, np.linalg.norm(r))

    rc = st.prolongation.transpose_matvec(r)
    coarse = solver.levels[idx + 1]
    rc[coarse.dirichlet] = 0.0
    if l + 1 == solver.n_levels:
        solver.stats[l + 1] = solver.stats.get(l + 1, 0) + 1
        e = coarse.coarse_lu.solve(rc)
    else:
        g1, g2 = gammas if gammas is not None else (solver.gamma1, solver.gamma2)
        e = np.zeros(coarse.n)
        for i in range(g2):
            e = mg_cycle(solver, l + 1, e, rc,
                         (g1, g2) if i == 0 else (g2, g1))
    ef = st.prolongation @ e
    ef[st.dirichlet] = 0.0
    u = u + ef

    u = _relax(solver, idx, u, b, solver.nu2)
    if solver.verbose:
        rpost = b - st.A @ u
        rpost[st.dirichlet] = 0.0
        log.info("level %d post-relaxed residual %.3e", l, np.linalg.norm(rpost))
    return u


def solve_fgmres(solver: MgSolver, b: np.ndarray | None = None,
                 tol_abs: float = 1e-8, max_it: int = 100) -> FgmresResult:
    """FGMRES on the finest level preconditioned by one cycle per application.

    The initial guess carries the Dirichlet values (zero elsewhere), so the
    Krylov iteration acts on the unconstrained DoFs only.
    """
    st = solver.levels[0]
    if b is None:
        b = st.rhs
    x0 = np.zeros(st.n)
    x0[st.dirichlet] = b[st.dirichlet]

    def precond(r):
        return mg_cycle(solver, 1, np.zeros(st.n), r)

    return fgmres(st.A, precond, b, tol_abs=tol_abs, max_it=max_it, x0=x0)
