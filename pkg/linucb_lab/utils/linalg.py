"""
Weighted Gram matrices with Sherman-Morrison updates
Caches the inverse and the log-determinant so that elliptical potentials and
determinant-doubling tests stay O(d^2) per step
"""

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from linucb_lab.core.exceptions import InvalidArgumentError, NumericFailureError

# Refresh the cached inverse by factorization at this cadence
REFRESH_INTERVAL = 64
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class GramState:
    """Regularized weighted Gram matrix λI + Σ w_i x_i x_iᵀ"""
    dim: int
    lam: float
    matrix: np.ndarray
    inverse: np.ndarray
    log_det: float
    updates_since_refresh: int = 0
    num_updates: int = 0

    def residual(self) -> float:
        """Max-abs deviation of matrix · inverse from the identity"""
        return float(np.max(np.abs(self.matrix @ self.inverse - np.eye(self.dim))))

    def __repr__(self):
        return f"<GramState(dim={self.dim}, lam={self.lam:g}, log_det={self.log_det:.6g}, updates={self.num_updates})>"


def _as_vector(x, dim: int, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != dim:
        raise InvalidArgumentError(f"{name} must have shape ({dim},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return v


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.setflags(write=False)


def _factorized_inverse(matrix: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix through its Cholesky factor"""
    try:
        chol = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as e:
        raise NumericFailureError(f"Gram matrix lost positive definiteness: {e}") from e
    chol_inv = np.linalg.inv(chol)
    inverse = chol_inv.T @ chol_inv
    return 0.5 * (inverse + inverse.T)


def gram_init(d: int, lam: float) -> GramState:
    """
    Create the regularizer-only Gram state λI

    Args:
        d: Feature dimension (≥ 1)
        lam: Regularizer λ (> 0)

    Returns:
        GramState with matrix λI, inverse I/λ and log_det d·log λ
    """
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or d < 1:
        raise InvalidArgumentError(f"Gram dimension must be a positive integer, got {d!r}")
    lam = float(lam)
    if not math.isfinite(lam) or lam <= 0:
        raise InvalidArgumentError(f"Regularizer lambda must be positive, got {lam}")

    matrix = lam * np.eye(d)
    inverse = np.eye(d) / lam
    _freeze(matrix, inverse)
    return GramState(dim=int(d), lam=lam, matrix=matrix, inverse=inverse, log_det=d * math.log(lam))


def gram_rank1_update(g: GramState, x, w: float) -> GramState:
    """
    Add w·x xᵀ to the Gram matrix

    The inverse follows Sherman-Morrison and is refreshed by factorization every
    REFRESH_INTERVAL updates, or early when M·(M⁻¹x) drifts from x by more than
    RESIDUAL_TOL. The full identity residual is only checked after a refresh.
    The log-determinant follows the matrix determinant lemma.

    Args:
        g: Current state
        x: Vector of length g.dim
        w: Positive weight (plays the role of σ⁻²)

    Returns:
        A fresh GramState
    """
    v = _as_vector(x, g.dim)
    w = float(w)
    if not math.isfinite(w) or w <= 0:
        raise InvalidArgumentError(f"Update weight must be positive and finite, got {w}")

    u = g.inverse @ v
    quad = float(v @ u)
    denom = 1.0 + w * quad

    matrix = g.matrix + w * np.outer(v, v)
    inverse = g.inverse - (w / denom) * np.outer(u, u)
    inverse = 0.5 * (inverse + inverse.T)
    log_det = g.log_det + math.log1p(w * quad)

    since_refresh = g.updates_since_refresh + 1
    # O(d²) per-step check along the update direction; the full residual waits for the refresh
    drift = float(np.max(np.abs(matrix @ (inverse @ v) - v))) / max(1.0, float(np.max(np.abs(v))))
    if since_refresh >= REFRESH_INTERVAL or not math.isfinite(drift) or drift > RESIDUAL_TOL:
        inverse = _factorized_inverse(matrix)
        since_refresh = 0
        if _residual(matrix, inverse) > RESIDUAL_TOL:
            raise NumericFailureError(
                f"Gram inverse residual {_residual(matrix, inverse):.3e} above {RESIDUAL_TOL} after refresh"
            )

    _freeze(matrix, inverse)
    return GramState(
        dim=g.dim,
        lam=g.lam,
        matrix=matrix,
        inverse=inverse,
        log_det=log_det,
        updates_since_refresh=since_refresh,
        num_updates=g.num_updates + 1,
    )


def _residual(matrix: np.ndarray, inverse: np.ndarray) -> float:
    return float(np.max(np.abs(matrix @ inverse - np.eye(matrix.shape[0]))))


def gram_from_samples(d: int, lam: float, xs: Iterable, ws: Optional[Iterable[float]] = None) -> GramState:
    """
    Build λI + Σ w_i x_i x_iᵀ in one shot (used to replay a history)

    Args:
        d: Feature dimension
        lam: Regularizer λ
        xs: Sequence of vectors of length d
        ws: Matching positive weights, all ones when omitted

    Returns:
        GramState with a factorized inverse and a direct log-determinant
    """
    base = gram_init(d, lam)
    rows = [_as_vector(x, d) for x in xs]
    if not rows:
        return base
    X = np.vstack(rows)
    weights = np.ones(len(rows)) if ws is None else np.asarray(list(ws), dtype=np.float64)
    if weights.shape != (len(rows),) or np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise InvalidArgumentError("Replay weights must be positive, finite and match the samples")

    matrix = base.matrix + (X * weights[:, None]).T @ X
    inverse = _factorized_inverse(matrix)
    sign, log_det = np.linalg.slogdet(matrix)
    if sign <= 0:
        raise NumericFailureError("Replayed Gram matrix is not positive definite")
    _freeze(matrix, inverse)
    return GramState(dim=d, lam=base.lam, matrix=matrix, inverse=inverse, log_det=float(log_det),
                     num_updates=len(rows))


def elliptical_potential(g: GramState, x) -> float:
    """Elliptical potential ‖x‖_{Λ⁻¹} = √(xᵀ Λ⁻¹ x)"""
    v = _as_vector(x, g.dim)
    return math.sqrt(max(float(v @ g.inverse @ v), 0.0))


def elliptical_potentials(g: GramState, X) -> np.ndarray:
    """
    Potentials for every row of a (n, d) matrix

    Args:
        g: Gram state
        X: Array of shape (n, g.dim)

    Returns:
        Array of shape (n,) with √(x_iᵀ Λ⁻¹ x_i)
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != g.dim:
        raise InvalidArgumentError(f"Feature matrix must have shape (n, {g.dim}), got {X.shape}")
    quad = np.einsum('ij,jk,ik->i', X, g.inverse, X)
    return np.sqrt(np.maximum(quad, 0.0))


def gram_solve(g: GramState, b) -> np.ndarray:
    """Apply the cached inverse: returns Λ⁻¹ b"""
    v = _as_vector(b, g.dim, name="b")
    return g.inverse @ v


def weighted_norm(A: np.ndarray, x) -> float:
    """‖x‖_A = √(xᵀ A x) for a symmetric PSD matrix A"""
    A = np.asarray(A, dtype=np.float64)
    v = _as_vector(x, A.shape[0])
    return math.sqrt(max(float(v @ A @ v), 0.0))


def det_ratio_norm_bound(A: np.ndarray, B: np.ndarray, x) -> float:
    """
    Right-hand side ‖x‖_B · √(det A / det B) of the det-ratio norm inequality

    For A ⪰ B ≻ 0 this upper-bounds ‖x‖_A.
    """
    sign_a, logdet_a = np.linalg.slogdet(np.asarray(A, dtype=np.float64))
    sign_b, logdet_b = np.linalg.slogdet(np.asarray(B, dtype=np.float64))
    if sign_a <= 0 or sign_b <= 0:
        raise InvalidArgumentError("Both matrices must be positive definite")
    return weighted_norm(B, x) * math.exp(0.5 * (logdet_a - logdet_b))
