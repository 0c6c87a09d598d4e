"""Dense solvers used by the baseline estimators.

All solvers are deterministic: cyclic coordinate order, zero
initialization, fixed step-size rules.  No external optimizer is used so
that the optimality conditions asserted in tests refer to exactly the
objective written here.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalError, ValidationError


def _spectral_bound(x: np.ndarray, iters: int = 40) -> float:
    """Largest eigenvalue of X^T X by deterministic power iteration."""
    k = x.shape[1]
    v = np.full(k, 1.0 / math.sqrt(k))
    lam = 0.0
    for _ in range(iters):
        w = x.T @ (x @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam * 1.01  # slack for unconverged iteration


def precompute_lasso_gram(x: np.ndarray, fit_intercept: bool = True):
    """Shared covariance terms for repeated lasso fits on one design matrix."""
    x = np.asarray(x, dtype=np.float64)
    n, k = x.shape
    x_mean = x.mean(axis=0) if fit_intercept else np.zeros(k)
    xc = x - x_mean
    return {
        "xc": xc,
        "x_mean": x_mean,
        "gram": (xc.T @ xc) / n,
        "col_sq": (xc**2).sum(axis=0) / n,
        "fit_intercept": fit_intercept,
    }


def lasso_cd(
    x: np.ndarray,
    y: np.ndarray,
    alpha: float,
    max_sweeps: int = 10_000,
    tol: float = 1e-8,
    fit_intercept: bool = True,
    precomputed: dict | None = None,
) -> tuple[np.ndarray, float, dict]:
    """Coordinate-descent lasso on (1 / 2N) ||y - Xw - b||^2 + alpha ||w||_1.

    Covariance updates with a deterministic cyclic order.  Columns with zero
    norm keep a coefficient of exactly 0.  Returns (w, intercept, info).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, k = x.shape
    if precomputed is None:
        precomputed = precompute_lasso_gram(x, fit_intercept)
    fit_intercept = precomputed["fit_intercept"]
    x_mean = precomputed["x_mean"]
    xc = precomputed["xc"]
    gram = precomputed["gram"]
    col_sq = precomputed["col_sq"]
    y_mean = float(y.mean()) if fit_intercept else 0.0
    yc = y - y_mean
    xty = (xc.T @ yc) / n

    w = np.zeros(k)
    grad_cache = xty.copy()  # (1/N) Xc^T (yc - Xc w), maintained incrementally

    def sweep(indices):
        nonlocal grad_cache
        max_delta = 0.0
        for j in indices:
            if col_sq[j] == 0.0:
                continue
            rho = grad_cache[j] + col_sq[j] * w[j]
            new_w = np.sign(rho) * max(abs(rho) - alpha, 0.0) / col_sq[j]
            delta = new_w - w[j]
            if delta != 0.0:
                grad_cache -= gram[:, j] * delta
                w[j] = new_w
                max_delta = max(max_delta, abs(delta))
        return max_delta

    # full passes establish the active set; inner passes over the nonzero
    # coefficients do the bulk of the work, which is much cheaper when the
    # solution is sparse.  Convergence is always certified by a full pass.
    all_idx = range(k)
    sweeps = 0
    converged = False
    while sweeps < max_sweeps and not converged:
        sweeps += 1
        full_delta = sweep(all_idx)
        if full_delta <= tol * max(1.0, np.abs(w).max()):
            converged = True
            break
        active = np.nonzero(w)[0]
        while sweeps < max_sweeps and active.size:
            sweeps += 1
            if sweep(active) <= tol * max(1.0, np.abs(w).max()):
                break
    if not np.isfinite(w).all():
        raise NumericalError("lasso coordinate descent diverged")
    intercept = y_mean - float(x_mean @ w)
    return w, intercept, {"sweeps": sweeps, "alpha": alpha, "tol": tol}


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def multinomial_logistic_gd(
    x: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    l2: float = 1.0,
    max_iter: int = 2000,
    grad_tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Full-batch gradient descent on sum cross-entropy + (l2 / 2) ||W||^2.

    The intercept is unpenalized, matching the common convention.  The step
    size comes from a Lipschitz bound on the softmax loss and is halved on
    any objective increase, so the iteration is monotone and deterministic.

    Returns (weights L x K, intercept L, info).
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    n, k = x.shape
    if len(np.unique(labels)) < 2:
        raise ValidationError("logistic regression needs at least two classes")
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0

    w = np.zeros((n_classes, k))
    b = np.zeros(n_classes)
    # softmax Hessian bounded by 0.5 lambda_max of the intercept-augmented Gram
    aug = np.concatenate([x, np.ones((n, 1))], axis=1)
    lip = 0.5 * _spectral_bound(aug) + l2
    step0 = 1.0 / max(lip, 1e-12)
    step = step0

    def objective(w, b):
        p = _softmax(x @ w.T + b)
        ce = -float(np.sum(onehot * np.log(np.maximum(p, 1e-300))))
        return ce + 0.5 * l2 * float((w**2).sum())

    obj = objective(w, b)
    grad_norm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        p = _softmax(x @ w.T + b)
        diff = p - onehot
        gw = diff.T @ x + l2 * w
        gb = diff.sum(axis=0)
        grad_norm = max(np.abs(gw).max(), np.abs(gb).max())
        if grad_norm < grad_tol:
            break
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            obj_new = objective(w_new, b_new)
            if obj_new <= obj or step < 1e-18:
                break
            step *= 0.5
        w, b, obj = w_new, b_new, obj_new
        step = min(step * 1.25, 8.0 * step0)
    if not np.isfinite(w).all():
        raise NumericalError("logistic gradient descent diverged")
    return w, b, {"iterations": it, "grad_norm": float(grad_norm), "l2": l2}


def binary_logistic_probe_batch(
    x: np.ndarray,
    targets: np.ndarray,
    l2: float = 1e-2,
    max_iter: int = 500,
    grad_tol: float = 1e-7,
) -> tuple[np.ndarray, np.ndarray]:
    """Fit independent binary logistic probes for every target column at once.

    targets is N x K in {0, 1}.  Returns (weights K x d, intercepts K).
    The problems are independent; batching them keeps the arithmetic
    vectorized without changing any individual solution.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    n, d = x.shape
    k = t.shape[1]
    w = np.zeros((k, d))
    b = np.zeros(k)
    aug = np.concatenate([x, np.ones((n, 1))], axis=1)
    lip = 0.25 * _spectral_bound(aug) + l2
    step = 1.0 / max(lip, 1e-12)
    for _ in range(max_iter):
        p = 1.0 / (1.0 + np.exp(-(x @ w.T + b)))
        diff = p - t
        gw = diff.T @ x + l2 * w
        gb = diff.sum(axis=0)
        if max(np.abs(gw).max(), np.abs(gb).max()) < grad_tol:
            break
        w -= step * gw
        b -= step * gb
    if not np.isfinite(w).all():
        raise NumericalError("logistic probe fitting diverged")
    return w, b


def ridge_solve(x: np.ndarray, y: np.ndarray, jitter_rel: float) -> np.ndarray:
    """Least squares of y on x via normal equations with relative ridge jitter."""
    gram = x.T @ x
    scale = float(np.trace(gram)) / max(gram.shape[0], 1)
    gram = gram + jitter_rel * max(scale, 1e-300) * np.eye(gram.shape[0])
    try:
        return np.linalg.solve(gram, x.T @ y)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"ridge solve failed: {exc}") from exc
