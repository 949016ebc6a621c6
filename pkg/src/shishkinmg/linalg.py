"""Sparse storage and Krylov machinery: CSR, LU, FGMRES, Chebyshev, Arnoldi."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

__all__ = [
    "CsrMatrix",
    "SingularMatrixError",
    "spmv",
    "LuFactorization",
    "lu_factor",
    "lu_solve",
    "FgmresResult",
    "fgmres",
    "estimate_max_eig",
    "chebyshev_apply",
    "write_matrix_market",
    "read_matrix_market",
]


class SingularMatrixError(RuntimeError):
    pass


@dataclass
class CsrMatrix:
    """Compressed sparse row matrix (canonical: sorted, deduplicated rows)."""

    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    shape: tuple[int, int]

    @classmethod
    def from_scipy(cls, mat) -> "CsrMatrix":
        m = scipy.sparse.csr_matrix(mat)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.indptr.copy(), m.indices.copy(), m.data.copy(), m.shape)

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "CsrMatrix":
        return cls.from_scipy(
            scipy.sparse.coo_matrix((vals, (rows, cols)), shape=shape))

    @classmethod
    def from_dense(cls, arr) -> "CsrMatrix":
        return cls.from_scipy(scipy.sparse.csr_matrix(np.asarray(arr, float)))

    def to_scipy(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.csr_matrix(
            (self.values, self.col_indices, self.row_offsets), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    @property
    def n_rows(self) -> int:
        return self.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return spmv(self, x)

    def __matmul__(self, x):
        return spmv(self, x)

    def transpose_matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.shape[0]:
            raise ValueError("dimension mismatch in transpose matvec")
        return self.to_scipy().T @ x


def spmv(A: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """y = A x with an explicit dimension check."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A.to_scipy() @ x


@dataclass
class LuFactorization:
    """LU factors of a square matrix; ``variant`` is dense, banded or sparse."""

    variant: str
    n: int
    _solve: callable = field(repr=False)
    pivots: np.ndarray | None = None

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError("right-hand side has wrong length")
        return self._solve(b)


def _bandwidth(dense: np.ndarray) -> tuple[int, int]:
    n = dense.shape[0]
    lower = upper = 0
    rows, cols = np.nonzero(dense)
    if rows.size:
        lower = int(np.max(rows - cols, initial=0))
        upper = int(np.max(cols - rows, initial=0))
    return lower, upper


def lu_factor(A, variant: str = "auto") -> LuFactorization:
    """Factor a square matrix; raises :class:`SingularMatrixError` on failure.

    Dense inputs use LAPACK getrf, narrow-banded dense inputs gbtrf, and
    CSR inputs SuperLU with partial pivoting.
    """
    if isinstance(A, CsrMatrix):
        sp = A.to_scipy()
    elif scipy.sparse.issparse(A):
        sp = scipy.sparse.csr_matrix(A)
    else:
        sp = None

    if sp is not None:
        n = sp.shape[0]
        if sp.shape[0] != sp.shape[1]:
            raise ValueError("matrix must be square")
        try:
            lu = scipy.sparse.linalg.splu(sp.tocsc())
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc
        fact = LuFactorization("sparse", n, lu.solve, lu.perm_r)
        _check_pivots(lu)
        return fact

    dense = np.asarray(A, dtype=float)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise ValueError("matrix must be square")
    n = dense.shape[0]
    if variant == "auto":
        lo, up = _bandwidth(dense)
        variant = "banded" if n >= 8 and lo + up + 1 <= n // 4 else "dense"

    if variant == "banded":
        lo, up = _bandwidth(dense)
        ab = np.zeros((2 * lo + up + 1, n))
        for j in range(n):
            i0, i1 = max(0, j - up), min(n, j + lo + 1)
            ab[lo + up + np.arange(i0, i1) - j, j] = dense[i0:i1, j]
        gbtrf = scipy.linalg.get_lapack_funcs("gbtrf", (ab,))
        lu_band, piv, info = gbtrf(ab, lo, up)
        if info != 0:
            raise SingularMatrixError(f"zero pivot at position {info}")
        gbtrs = scipy.linalg.get_lapack_funcs("gbtrs", (lu_band,))

        def solve(b, _lu=lu_band, _piv=piv):
            x, info = gbtrs(_lu, lo, up, b, _piv)
            if info != 0:
                raise SingularMatrixError("banded solve failed")
            return x

        return LuFactorization("banded", n, solve, piv)

    try:
        lu, piv = scipy.linalg.lu_factor(dense)
    except (ValueError, scipy.linalg.LinAlgError) as exc:
        raise SingularMatrixError(str(exc)) from exc
    if np.any(np.diag(lu) == 0.0):
        raise SingularMatrixError("matrix is singular (zero pivot)")
    return LuFactorization(
        "dense", n, lambda b: scipy.linalg.lu_solve((lu, piv), b), piv)


def _check_pivots(superlu) -> None:
    diag = superlu.U.diagonal()
    if np.any(diag == 0.0) or not np.all(np.isfinite(diag)):
        raise SingularMatrixError("matrix is singular (zero pivot in U)")


def lu_solve(fact: LuFactorization, b: np.ndarray) -> np.ndarray:
    return fact.solve(b)


def _as_operator(op):
    if op is None:
        return lambda x: x
    if isinstance(op, CsrMatrix):
        return op.matvec
    if scipy.sparse.issparse(op):
        return lambda x: op @ x
    if isinstance(op, np.ndarray):
        return lambda x: op @ x
    if callable(op):
        return op
    raise TypeError(f"cannot interpret {type(op)!r} as a linear operator")


@dataclass
class FgmresResult:
    x: np.ndarray
    iterations: int
    residual_history: list
    converged: bool


def fgmres(op, precond, b, tol_abs: float, max_it: int = 200,
           restart: int | None = None, x0: np.ndarray | None = None) -> FgmresResult:
    """Flexible GMRES with right preconditioning.

    The preconditioner may change between iterations (each preconditioned
    Arnoldi vector is stored).  Terminates once the true residual 2-norm
    drops to ``tol_abs``; the returned history is nonincreasing.
    """
    apply_op = _as_operator(op)
    apply_m = _as_operator(precond)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()

    r = b - apply_op(x)
    beta = float(np.linalg.norm(r))
    history = [beta]
    if beta <= tol_abs:
        return FgmresResult(x, 0, history, True)

    cycle = max_it if restart is None else min(restart, max_it)
    total = 0
    converged = False
    while total < max_it and not converged:
        m = min(cycle, max_it - total)
        V = np.zeros((n, m + 1))
        Z = np.zeros((n, m))
        H = np.zeros((m + 1, m))
        givens = []
        g = np.zeros(m + 1)
        g[0] = beta
        V[:, 0] = r / beta
        k_used = 0
        for k in range(m):
            Z[:, k] = apply_m(V[:, k])
            w = apply_op(Z[:, k])
            for i in range(k + 1):           # modified Gram-Schmidt
                H[i, k] = V[:, i] @ w
                w -= H[i, k] * V[:, i]
            H[k + 1, k] = np.linalg.norm(w)
            breakdown = H[k + 1, k] <= 1e-14 * max(beta, 1.0)
            if not breakdown:
                V[:, k + 1] = w / H[k + 1, k]
            for i, (c, s) in enumerate(givens):
                hi, hj = H[i, k], H[i + 1, k]
                H[i, k] = c * hi + s * hj
                H[i + 1, k] = -s * hi + c * hj
            denom = float(np.hypot(H[k, k], H[k + 1, k]))
            c, s = (1.0, 0.0) if denom == 0.0 else (H[k, k] / denom,
                                                    H[k + 1, k] / denom)
            givens.append((c, s))
            H[k, k] = c * H[k, k] + s * H[k + 1, k]
            H[k + 1, k] = 0.0
            g[k + 1] = -s * g[k]
            g[k] = c * g[k]
            k_used = k + 1
            history.append(min(history[-1], abs(float(g[k + 1]))))
            if abs(g[k + 1]) <= tol_abs or breakdown:
                break
        y = scipy.linalg.solve_triangular(H[:k_used, :k_used], g[:k_used])
        x = x + Z[:, :k_used] @ y
        total += k_used
        r = b - apply_op(x)
        true_res = float(np.linalg.norm(r))
        history[-1] = min(history[-2] if len(history) > 1 else true_res,
                          true_res)
        beta = true_res
        converged = true_res <= tol_abs
    return FgmresResult(x, total, history, converged)


def _operator_dim(op):
    if isinstance(op, CsrMatrix):
        return op.shape[0]
    if scipy.sparse.issparse(op) or isinstance(op, np.ndarray):
        return op.shape[0]
    return None


def estimate_max_eig(op, precond, k: int = 10, seed: int = 0,
                     n: int | None = None) -> float:
    """Largest-magnitude Ritz value (real part) of the preconditioned operator.

    Runs a k-step Arnoldi process on ``precond o op`` from a seeded
    uniform-random start vector; an early breakdown uses the Ritz values of
    the completed subspace.  ``n`` is required when ``op`` is a bare callable.
    """
    if k < 1:
        raise ValueError("need at least one Arnoldi step")
    apply_op = _as_operator(op)
    apply_m = _as_operator(precond)
    if n is None:
        n = _operator_dim(op)
    if n is None:
        raise ValueError("pass n= for callable operators")
    k = min(k, n)
    rng = np.random.default_rng(seed)
    v = rng.random(n)
    v /= np.linalg.norm(v)
    V = np.zeros((n, k + 1))
    H = np.zeros((k + 1, k))
    V[:, 0] = v
    steps = 0
    for j in range(k):
        w = apply_m(apply_op(V[:, j]))
        for i in range(j + 1):
            H[i, j] = V[:, i] @ w
            w -= H[i, j] * V[:, i]
        H[j + 1, j] = np.linalg.norm(w)
        steps = j + 1
        if H[j + 1, j] <= 1e-14 * max(1.0, abs(H[:j + 1, j]).max()):
            break
        V[:, j + 1] = w / H[j + 1, j]
    ritz = np.linalg.eigvals(H[:steps, :steps])
    return float(ritz[np.argmax(np.abs(ritz))].real)


def chebyshev_apply(op, precond, interval, degree: int, b, x0=None) -> np.ndarray:
    """Degree-``degree`` preconditioned Chebyshev iteration on [a, b] > 0."""
    a_c, b_c = float(interval[0]), float(interval[1])
    if not 0.0 < a_c < b_c:
        raise ValueError("Chebyshev interval must satisfy 0 < a < b")
    if degree < 1:
        raise ValueError("degree must be at least 1")
    apply_op = _as_operator(op)
    apply_m = _as_operator(precond)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float).copy()

    theta = 0.5 * (b_c + a_c)
    delta = 0.5 * (b_c - a_c)
    sigma1 = theta / delta
    rho = 1.0 / sigma1
    z = apply_m(b - apply_op(x))
    d = z / theta
    x = x + d
    for _ in range(degree - 1):
        z = apply_m(b - apply_op(x))
        rho_next = 1.0 / (2.0 * sigma1 - rho)
        d = rho_next * rho * d + (2.0 * rho_next / delta) * z
        x = x + d
        rho = rho_next
    return x


def write_matrix_market(path, A: CsrMatrix) -> None:
    scipy.io.mmwrite(str(path), A.to_scipy())


def read_matrix_market(path) -> CsrMatrix:
    return CsrMatrix.from_scipy(scipy.io.mmread(str(path)))
