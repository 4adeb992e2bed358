"""Active-set nonnegative least squares (Lawson and Hanson)."""
from __future__ import annotations

import numpy as np

from ..errors import EstimationError, ValidationError

DEFAULT_TOL = 1e-10


def nnls(A, b, tol: float = DEFAULT_TOL, max_iter: int | None = None):
    """Solve ``min ||A x - b||`` subject to ``x >= 0``.

    ``tol`` is relative: a variable enters the active set only while its
    gradient exceeds ``tol * ||A||_1 * ||b||_inf``. Returns ``(x, residual_norm)``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise ValidationError(f"nnls shape mismatch: A {A.shape}, b {b.shape}")
    m, n = A.shape
    max_iter = 3 * n + 30 if max_iter is None else max_iter
    thresh = tol * max(np.abs(A).sum(axis=0).max(initial=0.0) * np.abs(b).max(initial=0.0), 1e-300)
    passive = np.zeros(n, dtype=bool)
    x = np.zeros(n)
    w = A.T @ (b - A @ x)
    it = 0
    while (~passive).any() and w[~passive].max() > thresh:
        j = int(np.argmax(np.where(passive, -np.inf, w)))
        passive[j] = True
        while True:
            it += 1
            if it > max_iter:
                raise EstimationError("nnls did not converge")
            z = np.zeros(n)
            if not passive.any():
                break
            z[passive] = np.linalg.lstsq(A[:, passive], b, rcond=None)[0]
            if z[passive].min() > 0:
                break
            neg = passive & (z <= 0)
            step = np.min(x[neg] / (x[neg] - z[neg]))
            x = x + step * (z - x)
            passive &= x > np.finfo(float).eps * np.abs(x).max()
            x[~passive] = 0.0
        x = z
        w = A.T @ (b - A @ x)
    assert np.all(x >= 0)
    return x, float(np.linalg.norm(A @ x - b))
