"""Weighted nonnegative least squares by an active-set method.

Solves ``min || diag(sqrt(w)) (A x - b) ||**2`` subject to ``x >= 0`` and,
optionally, ``sum(x) == total``. Weights are rescaled to unit mean before
solving; this leaves the minimizer unchanged and keeps the gradient on a
fixed scale, so that the KKT conditions can be checked with an absolute
tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SolverError

__all__ = ["NnlsResult", "nnls_solve", "kkt_violation"]

KKT_TOL = 1e-10


@dataclass(frozen=True)
class NnlsResult:
    """Solution of a weighted NNLS problem.

    ``gradient`` is the gradient of ``0.5 * ||sqrt(w) (A x - b)||**2`` with
    the weights rescaled to unit mean. With a sum constraint,
    ``multiplier`` is the Lagrange multiplier ``nu`` such that
    ``gradient + nu`` vanishes on the support and is nonnegative elsewhere.
    """

    x: np.ndarray
    residual_norm: float
    gradient: np.ndarray
    multiplier: float
    iterations: int
    kkt_violation: float
    sum_to: float | None

    @property
    def support(self) -> np.ndarray:
        return self.x > 0


def _prepare(design, target, weights):
    a = np.atleast_2d(np.asarray(design, dtype=float))
    b = np.asarray(target, dtype=float).ravel()
    if a.shape[0] != b.size:
        raise DomainError(f"design has {a.shape[0]} rows but target has {b.size} entries")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DomainError("empty least-squares problem")
    if weights is None:
        w = np.ones(b.size)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.size != b.size:
            raise DomainError("weights must have one entry per row")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be positive and finite")
    sw = np.sqrt(w / w.mean())
    return a * sw[:, None], b * sw


def _violation(grad, x, sum_to):
    free = x > 0
    if sum_to is None:
        nu = 0.0
    else:
        nu = -float(grad[free].mean()) if free.any() else -float(grad.min())
    reduced = grad + nu
    worst_free = np.abs(reduced[free]).max(initial=0.0)
    worst_bound = np.maximum(-reduced[~free], 0.0).max(initial=0.0)
    return max(worst_free, worst_bound), nu


def kkt_violation(design, target, weights, x, sum_to=None) -> float:
    """Largest violation of the KKT conditions at ``x``.

    Independent of the solver: recomputes the gradient from the problem data.
    """
    aw, bw = _prepare(design, target, weights)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        return float(-x.min())
    grad = aw.T @ (aw @ x - bw)
    viol, _ = _violation(grad, x, sum_to)
    if sum_to is not None:
        viol = max(viol, abs(x.sum() - sum_to))
    return float(viol)


def _subproblem(aw, bw, passive, sum_to):
    """Least squares on the passive columns (with the sum constraint if set)."""
    z = np.zeros(aw.shape[1])
    cols = np.flatnonzero(passive)
    ap = aw[:, cols]
    if sum_to is None:
        z[cols] = np.linalg.lstsq(ap, bw, rcond=None)[0]
        return z
    p = cols.size
    base = np.full(p, sum_to / p)
    if p == 1:
        z[cols] = base
        return z
    # orthonormal basis of the directions keeping the sum fixed
    q, _ = np.linalg.qr(np.ones((p, 1)), mode="complete")
    basis = q[:, 1:]
    y = np.linalg.lstsq(ap @ basis, bw - ap @ base, rcond=None)[0]
    z[cols] = base + basis @ y
    return z


def nnls_solve(design, target, weights=None, sum_to=None, max_iter=None) -> NnlsResult:
    """Weighted nonnegative least squares.

    Parameters
    ----------
    design : array_like, shape (J, K)
    target : array_like, shape (J,)
    weights : array_like, shape (J,), optional
        Positive row weights (inverse variances); uniform when omitted.
    sum_to : float, optional
        If given, also require ``sum(x) == sum_to``.
    max_iter : int, optional
        Cap on outer iterations, default ``10 * K``.

    Returns
    -------
    NnlsResult

    Raises
    ------
    SolverError
        If the iteration cap is reached; the last iterate is attached.
    """
    aw, bw = _prepare(design, target, weights)
    n = aw.shape[1]
    if sum_to is not None and sum_to <= 0:
        raise DomainError("sum_to must be positive")
    max_iter = 10 * n if max_iter is None else int(max_iter)
    scale = np.linalg.norm(aw, 2) * max(1.0, np.abs(bw).max())
    tol = min(0.1 * KKT_TOL, 10 * np.finfo(float).eps * max(aw.shape) * scale)

    # an interior optimum is the plain least-squares solution; taking it
    # directly keeps QR accuracy on ill-conditioned designs, where the
    # gradient test below cannot see small interior components
    full = _subproblem(aw, bw, np.ones(n, dtype=bool), sum_to)
    if np.all(full > 0):
        grad = aw.T @ (aw @ full - bw)
        viol, nu = _violation(grad, full, sum_to)
        if viol <= KKT_TOL:
            resid = float(np.linalg.norm(aw @ full - bw))
            return NnlsResult(full, resid, grad, nu, 0, float(viol), sum_to)

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    if sum_to is not None:
        # feasible start at the best single vertex of the scaled simplex
        resid = np.linalg.norm(aw * sum_to - bw[:, None], axis=0)
        start = int(np.argmin(resid))
        passive[start] = True
        x[start] = sum_to

    iterations = 0
    stuck = np.zeros(n, dtype=bool)
    while True:
        grad = aw.T @ (aw @ x - bw)
        nu = 0.0 if sum_to is None else -float(grad[passive].mean())
        reduced = grad + nu
        candidates = np.where(passive | stuck, np.inf, reduced)
        if (passive | stuck).all() or candidates.min() >= -tol:
            break
        if iterations >= max_iter:
            raise SolverError(f"NNLS did not converge in {max_iter} iterations", last_iterate=x)
        iterations += 1
        entering = int(np.argmin(candidates))
        passive[entering] = True

        while True:
            z = _subproblem(aw, bw, passive, sum_to)
            if np.all(z[passive] > 0):
                x = z
                stuck[:] = False
                break
            # step back to the boundary of the feasible set
            blocking = passive & (z <= 0)
            ratios = x[blocking] / (x[blocking] - z[blocking])
            alpha = float(ratios.min()) if ratios.size else 0.0
            x = x + alpha * (z - x)
            leaving = passive & (x <= 10 * np.finfo(float).eps * max(1.0, np.abs(x).max()))
            if entering in np.flatnonzero(leaving) and alpha == 0.0:
                # the entering column cannot move; drop it to avoid cycling
                passive[entering] = False
                x[entering] = 0.0
                stuck[entering] = True
                break
            passive &= ~leaving
            x[~passive] = 0.0
            if not passive.any():
                break

    x = np.where(passive, x, 0.0)
    grad = aw.T @ (aw @ x - bw)
    viol, nu = _violation(grad, x, sum_to)
    resid = float(np.linalg.norm(aw @ x - bw))
    return NnlsResult(x, resid, grad, nu, iterations, float(viol), sum_to)
