"""Sparse solvers: right-preconditioned BiCGStab, direct factorization wrappers,
stationary smoothers, and a shift-invert subspace eigensolver."""

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SolveStats",
    "bicgstab",
    "sparse_lu",
    "jacobi_apply",
    "gauss_seidel_apply",
    "generalized_eig_smallest",
    "export_matrix_market",
    "SingularMatrixError",
]


class SingularMatrixError(Exception):
    pass


@dataclass
class SolveStats:
    iterations: int = 0
    relres: float = 0.0
    converged: bool = False
    breakdown: bool = False


def _as_operator(op):
    if sp.issparse(op) or isinstance(op, np.ndarray):
        return lambda x: op @ x
    if callable(op):
        return op
    raise TypeError("operator must be a matrix or a callable")


def bicgstab(op, b, x0=None, prec=None, tol=1e-8, maxit=1000):
    """BiCGStab with right preconditioning; convergence in the true relative
    residual ||b - Ax|| / ||b||. Returns (x, SolveStats)."""
    A = _as_operator(op)
    M = _as_operator(prec) if prec is not None else (lambda x: x)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveStats(0, 0.0, True)
    r = b - A(x)
    if np.linalg.norm(r) / bnorm <= tol:
        return x, SolveStats(0, np.linalg.norm(r) / bnorm, True)
    rhat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    stats = SolveStats()
    for it in range(1, maxit + 1):
        rho_new = rhat @ r
        if rho_new == 0.0 or (it > 1 and omega == 0.0):
            stats.breakdown = True
            break
        if it == 1:
            p = r.copy()
        else:
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
        rho = rho_new
        phat = M(p)
        v = A(phat)
        denom = rhat @ v
        if denom == 0.0:
            stats.breakdown = True
            break
        alpha = rho / denom
        s = r - alpha * v
        if np.linalg.norm(s) / bnorm <= tol:
            x = x + alpha * phat
            stats.iterations = it
            stats.relres = np.linalg.norm(b - A(x)) / bnorm
            stats.converged = stats.relres <= tol * 10
            return x, stats
        shat = M(s)
        t = A(shat)
        tt = t @ t
        if tt == 0.0:
            stats.breakdown = True
            break
        omega = (t @ s) / tt
        x = x + alpha * phat + omega * shat
        r = s - omega * t
        stats.iterations = it
        if np.linalg.norm(r) / bnorm <= tol:
            stats.relres = np.linalg.norm(b - A(x)) / bnorm
            stats.converged = stats.relres <= tol * 10
            return x, stats
    stats.relres = np.linalg.norm(b - A(x)) / bnorm
    stats.converged = stats.relres <= tol
    return x, stats


def sparse_lu(A):
    """Sparse LU factorization with partial pivoting; raises on singularity."""
    A = sp.csc_matrix(A)
    try:
        return spla.splu(A)
    except RuntimeError as e:
        raise SingularMatrixError(str(e)) from e


def _check_diag(A):
    d = A.diagonal()
    bad = np.where(d == 0.0)[0]
    if len(bad):
        raise SingularMatrixError(f"zero diagonal entry in row {bad[0]}")
    return d


def jacobi_apply(A, r, n_sweeps=1):
    """n Jacobi sweeps on Az = r from a zero initial guess."""
    d = _check_diag(A)
    z = r / d
    for _ in range(n_sweeps - 1):
        z = z + (r - A @ z) / d
    return z


def gauss_seidel_apply(A, r, n_sweeps=1):
    """n forward Gauss-Seidel sweeps on Az = r from a zero initial guess."""
    A = sp.csr_matrix(A)
    _check_diag(A)
    z = np.zeros_like(np.asarray(r, dtype=float))
    L = sp.tril(A, 0).tocsr()
    U = sp.triu(A, 1).tocsr()
    for _ in range(n_sweeps):
        z = spla.spsolve_triangular(L, r - U @ z, lower=True)
    return z


def generalized_eig_smallest(S, M, k, tol=1e-8, maxit=200, seed=0):
    """k smallest eigenpairs of S x = lambda M x by shift-invert subspace
    iteration (M SPD, S symmetric), ascending eigenvalues."""
    n = S.shape[0]
    nev = min(n, k + max(4, k))
    # small negative shift keeps the factorization nonsingular for SPSD S
    shift = -1e-8 * abs(S.diagonal()).max()
    lu = sparse_lu((S - shift * sp.identity(n, format="csr") @ M).tocsc())
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n, nev))
    lam = np.zeros(nev)
    for _ in range(maxit):
        W = np.column_stack([lu.solve(M @ V[:, j]) for j in range(nev)])
        # M-orthonormalize
        G = W.T @ (M @ W)
        L = np.linalg.cholesky(G)
        W = np.linalg.solve(L, W.T).T
        Sr = W.T @ (S @ W)
        Sr = 0.5 * (Sr + Sr.T)
        lam, Q = np.linalg.eigh(Sr)
        V = W @ Q
        res = max(
            np.linalg.norm(S @ V[:, j] - lam[j] * (M @ V[:, j]))
            / (np.linalg.norm(V[:, j]) * max(1.0, abs(lam[j])))
            for j in range(k)
        )
        if res <= tol:
            break
    pairs = []
    for j in range(k):
        x = V[:, j]
        res = np.linalg.norm(S @ x - lam[j] * (M @ x)) / np.linalg.norm(x)
        if res > tol * max(1.0, abs(lam[j])):
            raise RuntimeError(
                f"eigensolver did not converge: pair {j} residual {res:.2e}"
            )
        pairs.append((float(lam[j]), x))
    return pairs


def export_matrix_market(path, A):
    scipy.io.mmwrite(path, sp.coo_matrix(A))
