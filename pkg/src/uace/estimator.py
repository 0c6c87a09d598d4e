"""Bayesian concept-weight estimator with a noise-aware prior.

Per label y, the weight row w over concepts gets a zero-mean Gaussian
prior whose precision on concept k scales with epsilon_k^2, the squared
average noise of that concept's activations.  With observation precision
beta, the posterior is Gaussian with

    Sigma^{-1} = beta C_X C_X^T + (1 / lambda) diag(epsilon o epsilon)
    mu         = beta Sigma C_X Y

where C_X is the K x N matrix of mean activations.  Noisy concepts are
shrunk toward zero; their posterior variance stays large, so the reported
importance mu / sqrt(diag(Sigma)) is a signed z-score of relevance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .activations import ActivationStats, compute_stats
from .bundle import ProbeBundle
from .errors import NumericalError, ValidationError

LAMBDA_BOUNDS = (1e-8, 1e8)
BETA_BOUNDS = (1e-4, 1e6)
_FD_STEP = 1e-4
_GRAD_CLIP = 10.0


@dataclass
class BayesConfig:
    lam: float = 1.0            # prior scale lambda; larger means weaker prior
    beta: float = 1.0           # observation precision
    tune: bool = False
    tune_steps: int = 200
    tune_lr: float = 0.05
    tune_noise_samples: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.lam <= 0 or self.beta <= 0:
            raise ValidationError("lambda and beta must be positive")
        if min(self.tune_steps, self.tune_noise_samples) < 1:
            raise ValidationError("tuning counts must be at least 1")


@dataclass
class SparsifyConfig:
    kappa: float = 0.0  # allowed drop in probe-set argmax accuracy

    def __post_init__(self):
        if not 0.0 <= self.kappa < 1.0:
            raise ValidationError("kappa must lie in [0, 1)")


@dataclass
class PosteriorExplanation:
    mu: np.ndarray          # L x K posterior means
    sigma_diag: np.ndarray  # L x K posterior variances
    w_sparse: np.ndarray    # L x K thresholded means
    importance: np.ndarray  # L x K mu / sqrt(sigma_diag)
    lambda_used: float
    beta_used: float
    config: BayesConfig = field(default_factory=BayesConfig)
    sparsify_config: SparsifyConfig = field(default_factory=SparsifyConfig)


def _floored_eps_sq(epsilon: np.ndarray) -> np.ndarray:
    # Zero-noise concepts would make the prior degenerate; the floor keeps
    # Sigma^{-1} positive definite while being numerically negligible.
    eps_sq = np.asarray(epsilon, dtype=np.float64) ** 2
    floor = 1e-12 * float(eps_sq.mean()) + 1e-30
    return np.maximum(eps_sq, floor)


def _posterior_chol(m: np.ndarray, epsilon: np.ndarray, lam: float, beta: float):
    c_x = m.T  # K x N
    a = beta * (c_x @ c_x.T) + np.diag(_floored_eps_sq(epsilon) / lam)
    try:
        return scipy.linalg.cholesky(a, lower=True), c_x
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"posterior precision not positive definite: {exc}") from exc


def _mean_from_chol(chol, c_x, y, beta):
    rhs = beta * (c_x @ y)
    half = scipy.linalg.solve_triangular(chol, rhs, lower=True)
    return scipy.linalg.solve_triangular(chol, half, lower=True, trans="T")


def _diag_from_chol(chol):
    inv_l = scipy.linalg.solve_triangular(
        chol, np.eye(chol.shape[0]), lower=True
    )
    return (inv_l**2).sum(axis=0)


def posterior(
    stats: ActivationStats, y_logits: np.ndarray, config: BayesConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance diagonal for one label's logit vector."""
    y = np.asarray(y_logits, dtype=np.float64)
    if not (np.isfinite(stats.m).all() and np.isfinite(y).all()):
        raise ValidationError("non-finite inputs to posterior")
    chol, c_x = _posterior_chol(stats.m, stats.epsilon, config.lam, config.beta)
    mu = _mean_from_chol(chol, c_x, y, config.beta)
    return mu, _diag_from_chol(chol)


def _tune_objective(
    m: np.ndarray,
    epsilon: np.ndarray,
    y: np.ndarray,
    noise: np.ndarray,
    log_lam: float,
    log_beta: float,
) -> float:
    """Noise-marginalized log-likelihood surrogate.

    For each fixed noise draw Z the weights are re-solved from the perturbed
    activations, then the residual is scored at precision beta.  y may hold
    several label columns; their objectives are summed.
    """
    lam = float(np.exp(np.clip(log_lam, *np.log(LAMBDA_BOUNDS))))
    beta = float(np.exp(np.clip(log_beta, *np.log(BETA_BOUNDS))))
    n_labels = y.shape[1]
    total = 0.0
    for z in noise:
        chol, c_x = _posterior_chol(m + z, epsilon, lam, beta)
        for col in range(n_labels):
            w = _mean_from_chol(chol, c_x, y[:, col], beta)
            resid = y[:, col] - c_x.T @ w
            total += -0.5 * beta**2 * float(resid @ resid)
    return total / noise.shape[0] + n_labels * np.log(beta)


def tune_hyperparams(
    stats: ActivationStats, y_logits: np.ndarray, config: BayesConfig
) -> tuple[float, float]:
    """Gradient-ascent MLE for (lambda, beta) in log space.

    The expectation over activation noise uses tune_noise_samples draws,
    uniform in [-s, s] per entry, fixed from the seed, so results are
    bit-identical across runs.  Gradients are central finite differences;
    components are clipped for stability and iterates clamped to the
    documented bounds.
    """
    y = np.asarray(y_logits, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    rng = np.random.default_rng(config.seed)
    noise = rng.uniform(-1.0, 1.0, size=(config.tune_noise_samples,) + stats.s.shape)
    noise *= stats.s[None, :, :]

    p = np.array([np.log(config.lam), np.log(config.beta)])

    def f(q):
        return _tune_objective(stats.m, stats.epsilon, y, noise, q[0], q[1])

    if not np.isfinite(f(p)):
        raise NumericalError(
            "tuning objective non-finite at initialization; consider rescaling logits"
        )
    lo = np.log([LAMBDA_BOUNDS[0], BETA_BOUNDS[0]])
    hi = np.log([LAMBDA_BOUNDS[1], BETA_BOUNDS[1]])
    for _ in range(config.tune_steps):
        grad = np.zeros(2)
        for i in range(2):
            h = _FD_STEP * max(1.0, abs(p[i]))
            up, down = p.copy(), p.copy()
            up[i] += h
            down[i] -= h
            grad[i] = (f(up) - f(down)) / (2.0 * h)
        grad = np.clip(grad, -_GRAD_CLIP, _GRAD_CLIP)
        p = np.clip(p + config.tune_lr * grad, lo, hi)
    return float(np.exp(p[0])), float(np.exp(p[1]))


def _argmax_accuracy(scores: np.ndarray, reference_pred: np.ndarray) -> float:
    return float((scores.argmax(axis=1) == reference_pred).mean())


def sparsify(
    mu: np.ndarray,
    stats: ActivationStats,
    bundle: ProbeBundle,
    kappa: float,
) -> np.ndarray:
    """Zero all |mu| entries below the largest threshold that keeps probe
    argmax accuracy within kappa of the dense fit.

    Accuracy compares argmax over labels of W m(x) against argmax of the
    bundle logits.  Candidate thresholds are the distinct |mu| values plus
    infinity (all-zero weights score label 0 at every example).  Equal |mu|
    entries share a threshold, so ties keep more weights by construction.
    """
    mu = np.asarray(mu, dtype=np.float64)
    reference = bundle.logits.argmax(axis=1)
    scores = stats.m @ mu.T  # N x L
    base_acc = _argmax_accuracy(scores, reference)

    flat = np.abs(mu).ravel()
    order = np.argsort(flat, kind="stable")
    best_t = 0.0
    current = scores.copy()
    i = 0
    while i < order.size:
        t = flat[order[i]]
        # zero every entry with |mu| < next distinct value, i.e. <= t
        j = i
        while j < order.size and flat[order[j]] == t:
            li, ki = np.unravel_index(order[j], mu.shape)
            current[:, li] -= stats.m[:, ki] * mu[li, ki]
            j += 1
        i = j
        next_t = flat[order[i]] if i < order.size else np.inf
        if _argmax_accuracy(current, reference) >= base_acc - kappa:
            best_t = next_t
    w_sparse = np.where(np.abs(mu) < best_t, 0.0, mu)
    return w_sparse


def explain(
    bundle: ProbeBundle,
    config: BayesConfig | None = None,
    sparsify_cfg: SparsifyConfig | None = None,
    stats: ActivationStats | None = None,
) -> PosteriorExplanation:
    """Full pipeline: stats, optional tuning, per-label posterior, sparsify.

    A single (lambda, beta) pair is shared across labels; when tuning is
    requested it maximizes the summed objective over label columns.  The
    posterior precision does not depend on Y, so its factorization is
    computed once and reused for every label.
    """
    config = config or BayesConfig()
    sparsify_cfg = sparsify_cfg or SparsifyConfig()
    if stats is None:
        stats = compute_stats(bundle)

    lam, beta = config.lam, config.beta
    if config.tune:
        lam, beta = tune_hyperparams(stats, bundle.logits, config)

    chol, c_x = _posterior_chol(stats.m, stats.epsilon, lam, beta)
    sigma_diag_row = _diag_from_chol(chol)
    mu = np.empty((bundle.n_labels, bundle.n_concepts))
    for y in range(bundle.n_labels):
        mu[y] = _mean_from_chol(chol, c_x, bundle.logits[:, y], beta)
    sigma_diag = np.tile(sigma_diag_row, (bundle.n_labels, 1))

    w_sparse = sparsify(mu, stats, bundle, sparsify_cfg.kappa)
    importance = mu / np.sqrt(sigma_diag)
    if not np.isfinite(importance).all():
        raise NumericalError("non-finite importance scores")
    return PosteriorExplanation(
        mu=mu,
        sigma_diag=sigma_diag,
        w_sparse=w_sparse,
        importance=importance,
        lambda_used=lam,
        beta_used=beta,
        config=replace(config, lam=lam, beta=beta),
        sparsify_config=sparsify_cfg,
    )
