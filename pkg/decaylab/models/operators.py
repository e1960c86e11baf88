import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from decaylab.core.errors import DomainError, SizeError
from decaylab.core.settings import get_settings


def laplacian_1d(n: int, dx: float, bc: str = "dirichlet") -> sp.csr_matrix:
    """Second-difference Laplacian; symmetric negative semidefinite."""
    if n < 2:
        raise SizeError(f"laplacian_1d needs n >= 2 (got {n})")
    if not dx > 0:
        raise DomainError(f"laplacian_1d needs dx > 0 (got {dx})")
    inv = 1.0 / dx ** 2
    off = np.full(n - 1, inv)
    lap = sp.diags([off, np.full(n, -2.0 * inv), off], [-1, 0, 1], format="lil")
    if bc == "periodic":
        lap[0, n - 1] += inv
        lap[n - 1, 0] += inv
    elif bc != "dirichlet":
        raise DomainError(f"unknown boundary condition '{bc}'")
    return lap.tocsr()


def central_difference_1d(n: int, dx: float) -> sp.csr_matrix:
    """Periodic (u[i+1] - u[i-1]) / (2 dx); exactly antisymmetric."""
    if n < 3:
        raise SizeError(f"central_difference_1d needs n >= 3 (got {n})")
    half = 0.5 / dx
    d = sp.diags([np.full(n - 1, half), np.full(n - 1, -half)], [1, -1], format="lil")
    d[0, n - 1] = -half
    d[n - 1, 0] = half
    return d.tocsr()


def m_adjoint(A: sp.spmatrix, M: sp.spmatrix) -> np.ndarray:
    """A* = M^{-1} A^T M, dense."""
    return la.solve(M.toarray(), (A.T @ M).toarray(), assume_a="pos")


def viscosity_sqrtAA(A: sp.spmatrix, M: sp.spmatrix, eps: float = 0.0) -> sp.csr_matrix:
    """
    M-symmetric square root of A*A plus eps I.

    With M = C C^T, C^{-1} (A^T M A) C^{-T} is symmetric PSD; its square root S
    maps back as C^{-T} S C^T.
    """
    n = A.shape[0]
    limit = get_settings().dense_limit
    if n > limit:
        raise SizeError(f"sqrtAA viscosity is dense; n={n} exceeds {limit}, use viscosity=laplacian_block")
    if eps < 0:
        raise DomainError(f"eps must be nonnegative (got {eps})")

    Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    C = la.cholesky(Md, lower=True)
    gram = Ad.T @ Md @ Ad
    sym = la.solve_triangular(C, la.solve_triangular(C, gram, lower=True).T, lower=True).T
    sym = 0.5 * (sym + sym.T)
    w, Q = la.eigh(sym)
    root = (Q * np.sqrt(np.clip(w, 0.0, None))) @ Q.T
    V = la.solve_triangular(C.T, root @ C.T, lower=False) + eps * np.eye(n)
    return sp.csr_matrix(V)


def extreme_generalized_eigenvalue(K: sp.spmatrix, M: sp.spmatrix, largest: bool = True) -> float:
    """Largest (or smallest) lambda with K x = lambda M x, K symmetrized first."""
    Ks = 0.5 * (K + K.T)
    n = Ks.shape[0]
    if n <= get_settings().dense_limit:
        w = la.eigh(Ks.toarray(), M.toarray(), eigvals_only=True)
        return float(w[-1] if largest else w[0])
    w = eigsh(Ks.tocsc(), k=1, M=M.tocsc(), which="LA" if largest else "SA", return_eigenvectors=False)
    return float(w[0])
