"""
Preconditioned Conjugate Gradients

PCG from a zero initial guess with the stopping rule ||B r||_2 <= rel_tol * ||b||_2, together with
||r||_2 <= residual_rel_tol * ||b||_2 on the recursive residual, and
the condition number estimate read off the Lanczos tridiagonal matrix that CG builds
implicitly through its step lengths.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union
import logging
import time

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.linalg import eigvalsh_tridiagonal

from plate_obstacle.config import settings
from plate_obstacle.exceptions import NumericError, ParameterError

logger = logging.getLogger(__name__)

Operator = Union[Callable[[np.ndarray], np.ndarray], object]


@dataclass
class PcgResult:
    solution: np.ndarray
    iterations: int
    kappa_estimate: float
    converged: bool
    residual_history: List[float] = field(default_factory=list)
    alphas: List[float] = field(default_factory=list)
    betas: List[float] = field(default_factory=list)
    timed_out: bool = False

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'iteration': np.arange(len(self.residual_history)),
            'preconditioned_residual': self.residual_history,
        })


def as_operator(op: Operator) -> Callable[[np.ndarray], np.ndarray]:
    """Callables pass through; matrices and SparseSym become x -> op @ x."""
    if callable(op):
        return op
    return lambda x: op @ x


def lanczos_kappa(alphas: Sequence[float], betas: Sequence[float],
                  zero_for_single_step: Optional[bool] = None) -> float:
    """
    lambda_max / lambda_min of the k x k Lanczos matrix assembled from CG coefficients.

    Diagonal 1/alpha_i + beta_{i-1}/alpha_{i-1}, off-diagonal sqrt(beta_i)/alpha_i.
    Returns 0 for k <= 1 (or 1 for k == 1 when the zero convention is switched off).
    """
    if zero_for_single_step is None:
        zero_for_single_step = settings.zero_kappa_for_single_step
    k = len(alphas)
    if k == 0:
        return 0.0
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas[:k - 1], dtype=float)
    if not (np.all(np.isfinite(alphas)) and np.all(np.isfinite(betas))):
        raise NumericError("non-finite CG coefficients")
    if k == 1:
        return 0.0 if zero_for_single_step else 1.0
    if betas.size != k - 1:
        raise ParameterError(f"{k} step lengths need {k - 1} direction updates, got {betas.size}")

    diag = 1.0 / alphas
    diag[1:] += betas / alphas[:-1]
    off = np.sqrt(betas) / alphas[:-1]
    lam_min = eigvalsh_tridiagonal(diag, off, select='i', select_range=(0, 0))[0]
    lam_max = eigvalsh_tridiagonal(diag, off, select='i', select_range=(k - 1, k - 1))[0]
    if not lam_min > 0.0:
        raise NumericError(f"Lanczos matrix is not positive definite (lambda_min = {lam_min})")
    return float(lam_max / lam_min)


def pcg(apply_a: Operator, apply_b: Operator, b: np.ndarray,
        rel_tol: Optional[float] = None, max_iter: Optional[int] = None,
        residual_rel_tol: Optional[float] = None,
        deadline: Optional[float] = None) -> PcgResult:
    """
    Preconditioned conjugate gradients from x0 = 0.

    Args:
        apply_a: SPD operator (callable or matrix)
        apply_b: SPD preconditioner action (callable or matrix)
        b: right-hand side
        rel_tol: stop when ||B r||_2 <= rel_tol * ||b||_2
        max_iter: iteration cap; hitting it returns converged=False
        residual_rel_tol: also require ||r||_2 <= residual_rel_tol * ||b||_2 for the
            recursive residual (defaults to settings.pcg_residual_rel_tol, falling back to
            rel_tol when that is unset; 0 switches the check off)
        deadline: time.perf_counter() value; passing it stops the iteration with
            converged=False and timed_out=True

    Returns:
        PcgResult with the Lanczos condition estimate of B*A
    """
    rel_tol = settings.pcg_rel_tol if rel_tol is None else rel_tol
    if residual_rel_tol is None:
        residual_rel_tol = settings.pcg_residual_rel_tol
    if residual_rel_tol is None:
        residual_rel_tol = rel_tol
    b = np.asarray(b, dtype=float)
    n = b.size
    if max_iter is None:
        max_iter = settings.pcg_max_iter_factor * max(n, 1)
    mat_a, mat_b = as_operator(apply_a), as_operator(apply_b)

    x = np.zeros(n)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return PcgResult(x, 0, 0.0, True, [0.0])

    def small_enough(r, z) -> bool:
        if np.linalg.norm(z) > rel_tol * b_norm:
            return False
        return residual_rel_tol <= 0.0 or np.linalg.norm(r) <= residual_rel_tol * b_norm

    r = b.copy()
    z = mat_b(r)
    history = [float(np.linalg.norm(z))]
    alphas: List[float] = []
    betas: List[float] = []
    converged = small_enough(r, z)
    timed_out = False
    p = z.copy()
    rz = float(r @ z)

    while not converged and len(alphas) < max_iter:
        q = mat_a(p)
        pq = float(p @ q)
        if not np.isfinite(pq) or pq <= 0.0:
            logger.warning(f"PCG breakdown at iteration {len(alphas)}: p^T A p = {pq}")
            break
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        z = mat_b(r)
        alphas.append(alpha)
        history.append(float(np.linalg.norm(z)))
        if small_enough(r, z):
            converged = True
            break
        if deadline is not None and time.perf_counter() > deadline:
            timed_out = True
            logger.warning(f"PCG stopped at iteration {len(alphas)}: deadline passed")
            break
        rz_next = float(r @ z)
        if rz_next <= 0.0:
            logger.warning(f"PCG breakdown at iteration {len(alphas)}: r^T B r = {rz_next}")
            break
        beta = rz_next / rz
        betas.append(beta)
        p = z + beta * p
        rz = rz_next

    kappa = lanczos_kappa(alphas, betas)
    return PcgResult(x, len(alphas), kappa, converged, history, alphas, betas, timed_out)


def dense_condition_number(matrix: np.ndarray, preconditioner: np.ndarray) -> float:
    """Exact kappa(B A) for small dense SPD A and B, via the congruent matrix L^T A L with B = L L^T."""
    lower = scipy.linalg.cholesky(preconditioner, lower=True)
    eigenvalues = scipy.linalg.eigvalsh(lower.T @ matrix @ lower)
    return float(eigenvalues[-1] / eigenvalues[0])


def dump_residual_history(result: PcgResult, path):
    result.history_frame().to_csv(path, index=False)
