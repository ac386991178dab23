"""Least-squares machinery for FIR, Hammerstein and Volterra regressions."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular, toeplitz

from .errors import ConditioningError, ParameterError

RANK_TOL = 1e-10


def linear_design(x, taps):
    """Lagged-window design: row ``n`` is ``[x(n), x(n-1), ..., x(n-L+1)]``.

    Samples before index 0 are zero.
    """
    x = np.asarray(x, dtype=float)
    L = int(taps)
    if L < 1:
        raise ParameterError("taps must be >= 1")
    if L > x.size:
        raise ParameterError(f"taps={L} exceeds signal length {x.size}")
    first_row = np.zeros(L)
    first_row[0] = x[0]
    return toeplitz(x, first_row)


def odd_orders(order):
    K = int(order)
    if K < 1 or K % 2 == 0:
        raise ParameterError(f"polynomial order must be odd and >= 1, got {order}")
    return list(range(1, K + 1, 2))


def hammerstein_design(u, taps, order):
    """Columns are lagged windows of ``u, u^3, ..., u^K`` (odd powers, k-major)."""
    u = np.asarray(u, dtype=float)
    return np.hstack([linear_design(u**k, taps) for k in odd_orders(order)])


@dataclass
class LstsqResult:
    coef: np.ndarray
    condition: float
    residual_norm: float
    rank: int


def solve(design, target, ridge=None, rank_tol=RANK_TOL):
    """Minimize ``||X c - w||^2`` with a QR factorization.

    Columns are scaled to unit norm before factoring; the condition estimate
    is the ratio of extreme singular values of the scaled design.

    Parameters
    ----------
    design : (N, P) array
    target : (N,) array
    ridge : float, optional
        Tikhonov weight on the scaled coefficients. When given, rank
        deficiency no longer raises.
    rank_tol : float
        Singular values below ``rank_tol * s_max`` count as zero.

    Raises
    ------
    ConditioningError
        If the scaled design is numerically rank deficient and ``ridge`` is
        not set.
    """
    X = np.asarray(design, dtype=float)
    w = np.asarray(target, dtype=float)
    if X.ndim != 2 or w.shape != (X.shape[0],):
        raise ParameterError("design must be (N, P) and target (N,)")
    N, P = X.shape
    scale = np.linalg.norm(X, axis=0)
    scale[scale == 0.0] = 1.0
    Xs = X / scale

    if ridge is None:
        if N < P:
            raise ConditioningError(
                f"underdetermined system: {N} rows for {P} unknowns", np.inf
            )
        Q, R = qr(Xs, mode="economic")
        sv = np.linalg.svd(R, compute_uv=False)
        condition = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        rank = int(np.sum(sv > rank_tol * sv[0]))
        if rank < P:
            raise ConditioningError(
                f"rank-deficient design (rank {rank} < {P}, condition {condition:.3g})",
                condition,
            )
        coef_s = solve_triangular(R, Q.T @ w)
    else:
        aug = np.vstack([Xs, np.sqrt(ridge) * np.eye(P)])
        Q, R = qr(aug, mode="economic")
        sv = np.linalg.svd(Xs, compute_uv=False)
        condition = float(sv[0] / sv[-1]) if sv[-1] > 0 and N >= P else np.inf
        rank = int(np.sum(sv > rank_tol * sv[0]))
        coef_s = solve_triangular(R, Q.T @ np.concatenate([w, np.zeros(P)]))

    coef = coef_s / scale
    residual = float(np.linalg.norm(X @ coef - w))
    return LstsqResult(coef, condition, residual, rank)
