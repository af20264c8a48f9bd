"""Interference alignment solvers and the subspace-feedback receive filter.

Both solvers operate on a *surrogate* channel grid: a (K, K, N, M) complex
array whose off-diagonal blocks play the role of cross channels.  The grid
may hold the true channels, the transposed quantized subspace points of the
proposed feedback scheme, or the reconstructed matrices of the
normalized-channel baseline; the solvers do not care.  Diagonal blocks are
never touched.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel import RowSpaceFactorization, SystemDims
from .rng import as_rng

__all__ = [
    "IASolverError",
    "IASolution",
    "dof_feasible",
    "surrogate_residual",
    "solve_ia_closed_form",
    "solve_ia_altmin",
    "solve_ia",
    "build_receive_filter",
]


class IASolverError(RuntimeError):
    """Solver could not produce a usable solution (singular blocks, ...)."""


@dataclass
class IASolution:
    """Precoders, receive subspaces and convergence metadata of one solve.

    ``residual`` is the total surrogate leakage
    sum_i ||U_i^H A_i Bdiag_{j != i}(V_j)||_F^2 and ``rel_residual`` the
    same quantity normalized by the total cross-block energy of the
    surrogate grid.
    """

    V: list
    U: list
    residual: float
    rel_residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def dof_feasible(dims: SystemDims) -> bool:
    """Necessary (not sufficient) stream-count condition d <= (M+N)/(K+1)."""
    return dims.d <= (dims.M + dims.N) / (dims.K + 1)


def _cross_energy(A: np.ndarray, K: int) -> float:
    total = 0.0
    for i in range(K):
        for j in range(K):
            if i != j:
                total += float(np.linalg.norm(A[i, j]) ** 2)
    return total


def surrogate_residual(A: np.ndarray, V: list, U: list) -> float:
    """Total post-filter interference power on the surrogate grid."""
    K = len(V)
    total = 0.0
    for i in range(K):
        for j in range(K):
            if j != i:
                total += float(np.linalg.norm(
                    U[i].conj().T @ A[i, j] @ V[j]) ** 2)
    return total


def _fix_phases(Q: np.ndarray) -> np.ndarray:
    """Scale each column so its first significant entry is real positive."""
    Q = np.array(Q, copy=True)
    for j in range(Q.shape[1]):
        col = Q[:, j]
        mags = np.abs(col)
        i0 = int(np.argmax(mags > 1e-9 * mags.max())) if mags.max() > 0 else 0
        ph = col[i0]
        if np.abs(ph) > 0:
            Q[:, j] = col * (ph.conj() / np.abs(ph))
    return Q


def _orthonormal_columns(X: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(X)
    phases = np.diag(R).copy()
    mags = np.abs(phases)
    phases = np.where(mags > 0, phases / np.where(mags > 0, mags, 1.0), 1.0)
    return Q * phases[np.newaxis, :]


def _least_eigvecs(Qmat: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal eigenvectors of a Hermitian matrix for the d smallest
    eigenvalues, phase-fixed for determinism."""
    Qmat = 0.5 * (Qmat + Qmat.conj().T)
    _, vecs = np.linalg.eigh(Qmat)
    return _fix_phases(vecs[:, :d])


def _interference_cov(A: np.ndarray, V: list, i: int) -> np.ndarray:
    K = len(V)
    N = A.shape[2]
    Q = np.zeros((N, N), dtype=complex)
    for j in range(K):
        if j != i:
            W = A[i, j] @ V[j]
            Q += W @ W.conj().T
    return Q


def _reciprocal_cov(A: np.ndarray, U: list, j: int) -> np.ndarray:
    K = len(U)
    M = A.shape[3]
    Q = np.zeros((M, M), dtype=complex)
    for i in range(K):
        if i != j:
            W = A[i, j].conj().T @ U[i]
            Q += W @ W.conj().T
    return Q


def solve_ia_closed_form(A: np.ndarray, dims: SystemDims,
                         tol: float = 1e-9) -> IASolution:
    """Closed-form alignment for the 3-user square channel.

    Requires K=3, M=N and d <= M/2.  The first precoder spans d
    eigenvectors (ordered by eigenvalue magnitude) of the chained product
    of cross blocks

        E = A_31^{-1} A_32 A_12^{-1} A_13 A_23^{-1} A_21,

    the remaining precoders follow by forward substitution, and each
    receive subspace is an orthonormal basis of the orthogonal complement
    of the received interference.  All outputs are orthonormalized and
    phase-fixed so the solution is deterministic.

    Raises
    ------
    IASolverError
        On singular cross blocks or non-finite eigenvectors.
    """
    if dims.K != 3:
        raise ValueError("closed form is specific to K=3")
    if dims.M != dims.N:
        raise ValueError("closed form requires square blocks (M=N)")
    if 2 * dims.d > dims.M:
        raise ValueError("closed form requires d <= M/2")
    try:
        E = (np.linalg.solve(A[2, 0], A[2, 1])
             @ np.linalg.solve(A[0, 1], A[0, 2])
             @ np.linalg.solve(A[1, 2], A[1, 0]))
        w, vecs = np.linalg.eig(E)
    except np.linalg.LinAlgError as exc:
        raise IASolverError(f"singular cross block: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(vecs))):
        raise IASolverError("non-finite eigendecomposition of the chained product")
    order = np.argsort(-np.abs(w), kind="stable")
    V1 = _fix_phases(vecs[:, order[:dims.d]])
    try:
        V2 = np.linalg.solve(A[2, 1], A[2, 0] @ V1)
        V3 = np.linalg.solve(A[1, 2], A[1, 0] @ V1)
    except np.linalg.LinAlgError as exc:
        raise IASolverError(f"singular cross block: {exc}") from exc
    V = [_orthonormal_columns(X) for X in (V1, V2, V3)]
    U = [_least_eigvecs(_interference_cov(A, V, i), dims.d) for i in range(3)]
    res = surrogate_residual(A, V, U)
    denom = _cross_energy(A, 3)
    rel = res / denom if denom > 0 else res
    return IASolution(V=V, U=U, residual=res, rel_residual=rel,
                      iterations=1, converged=bool(rel <= tol))


def solve_ia_altmin(A: np.ndarray, dims: SystemDims, seed=0,
                    tol: float = 1e-9, max_iter: int = 5000,
                    track_history: bool = False) -> IASolution:
    """Alternating interference-leakage minimization.

    Alternates between setting each receive subspace U_i to the d least
    dominant eigenvectors of the interference covariance at receiver i and
    each precoder V_j to the d least dominant eigenvectors of the
    reciprocal-direction covariance at transmitter j.  Both half-steps are
    exact minimizers, so the residual never increases.  Stops once the
    relative residual drops below ``tol`` or after ``max_iter`` iterations;
    non-convergence is flagged, not fatal.
    """
    if not dof_feasible(dims):
        warnings.warn(
            f"stream count d={dims.d} violates the necessary feasibility "
            f"condition d <= (M+N)/(K+1) = {(dims.M + dims.N) / (dims.K + 1):.3g}; "
            "alignment will generally not converge",
            stacklevel=2,
        )
    rng = as_rng(seed)
    K, d = dims.K, dims.d
    denom = _cross_energy(A, K)
    if denom <= 0:
        raise IASolverError("surrogate grid has no cross-channel energy")

    # Haar-random precoder start, one draw per user from the trial's stream.
    from .grassmann import haar_points

    V = list(haar_points(dims.M, d, K, rng))
    U = [_least_eigvecs(_interference_cov(A, V, i), d) for i in range(K)]
    res = surrogate_residual(A, V, U)
    history = [res] if track_history else []
    it = 0
    converged = res / denom <= tol
    while not converged and it < max_iter:
        it += 1
        V = [_least_eigvecs(_reciprocal_cov(A, U, j), d) for j in range(K)]
        U = [_least_eigvecs(_interference_cov(A, V, i), d) for i in range(K)]
        res = surrogate_residual(A, V, U)
        if track_history:
            history.append(res)
        converged = res / denom <= tol
    return IASolution(V=V, U=U, residual=res, rel_residual=res / denom,
                      iterations=it, converged=bool(converged),
                      history=history)


def solve_ia(A: np.ndarray, dims: SystemDims, solver: str = "auto",
             seed=0, tol: float = 1e-9, max_iter: int = 5000) -> IASolution:
    """Dispatch to the closed form when applicable, else alternating min."""
    if solver == "auto":
        closed_ok = dims.K == 3 and dims.M == dims.N and 2 * dims.d <= dims.M
        solver = "closed_form" if closed_ok else "altmin"
    if solver == "closed_form":
        return solve_ia_closed_form(A, dims, tol=tol)
    if solver == "altmin":
        return solve_ia_altmin(A, dims, seed=seed, tol=tol, max_iter=max_iter)
    raise ValueError(f"unknown solver {solver!r}")


def build_receive_filter(fac: RowSpaceFactorization, Fhat: np.ndarray,
                         Utilde: np.ndarray) -> np.ndarray:
    """Receive filter G = C^{-1} F^H Fhat Utilde of the subspace scheme.

    ``fac`` is the receiver-side factorization of its stacked cross
    channels, ``Fhat`` the quantized subspace point it reported, and
    ``Utilde`` the solver's receive subspace on the quantized surrogate.
    G has shape N x d and is generally not orthonormal.
    """
    T = fac.F.conj().T @ Fhat @ Utilde
    try:
        return np.linalg.solve(fac.C, T)
    except np.linalg.LinAlgError as exc:
        raise IASolverError(f"singular triangular factor: {exc}") from exc
