"""Alternative per-concept uncertainty estimators.

Two competitors to the closed-form noise scale: a Monte-Carlo estimate
from repeated projection fits on data splits, and a learned heteroscedastic
model that regresses activation mean and spread from the representation.
Both emit a K-vector comparable to the epsilon of ActivationStats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import _fit_alpha_arrays, _normalize_rows
from .bundle import ProbeBundle
from .errors import NumericalError, ValidationError
from .metrics import jaccard_topk, uncertainty_cos_sim
from .solvers import binary_logistic_probe_batch

_SIGMA_FLOOR = 1e-4


@dataclass
class VariantConfig:
    n_samples: int = 20            # MC repetitions S
    subsample_fraction: float = 0.8
    df_steps: int = 400
    df_lr: float = 1e-2
    df_beta: float = 0.0           # KL trade-off weight of the distribution fit
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValidationError("n_samples must be at least 2")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValidationError("subsample_fraction must lie in (0, 1]")
        if self.df_beta < 0.0:
            raise ValidationError("df_beta must be non-negative")


def mc_uncertainty(bundle: ProbeBundle, config: VariantConfig) -> np.ndarray:
    """Spread of activations across repeated projection fits.

    Each repetition refits the concept directions on a random subsample
    (without replacement), normalizes them to unit length, and scores every
    example by the raw dot product with its representation.  The returned
    value per concept is the mean over examples of the unbiased sample
    variance across repetitions.

    Unlike the cosine-based noise model this estimate is scale sensitive:
    doubling the representation doubles the activations and quadruples the
    variance.
    """
    rng_children = np.random.SeedSequence(config.seed).spawn(config.n_samples)
    rn = _normalize_rows(bundle.repr, "repr")
    targets = _normalize_rows(bundle.mm_image, "mm_image") @ bundle.concept_text.T
    n = bundle.n_examples
    size = max(2, int(round(config.subsample_fraction * n)))

    acts_sum = np.zeros((n, bundle.n_concepts))
    acts_sq = np.zeros_like(acts_sum)
    for child in rng_children:
        rng = np.random.default_rng(child)
        idx = np.sort(rng.choice(n, size=size, replace=False))
        _, cav = _fit_alpha_arrays(rn[idx], targets[idx], bundle.concept_names)
        norms = np.linalg.norm(cav, axis=1)
        unit = np.divide(
            cav, norms[:, None], out=np.zeros_like(cav), where=norms[:, None] > 0
        )
        acts = bundle.repr @ unit.T
        acts_sum += acts
        acts_sq += acts**2
    s = config.n_samples
    var = (acts_sq - acts_sum**2 / s) / (s - 1)
    return np.maximum(var, 0.0).mean(axis=0)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def distribution_fit(
    bundle: ProbeBundle, config: VariantConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[float]]:
    """Fit activation mean and spread as linear functions of the representation.

    Observations are the raw image/text embedding dot products o_ik.  The
    model is o_ik ~ Normal(p_k . f(x_i), sigma_k(x_i)^2) with
    sigma_k(x) = softplus(q_k . f(x)) + floor; the raw linear spread could go
    negative, hence the softplus.  Training minimizes the Gaussian negative
    log-likelihood plus df_beta times the mean KL(Normal(0,1) || Normal(mu,
    sigma)), by plain gradient descent.

    Returns (epsilon_df, p, q, loss_trace).
    """
    f = bundle.repr
    obs = bundle.mm_image @ bundle.concept_text.T  # N x K
    n, k = obs.shape
    d = f.shape[1]
    rng = np.random.default_rng(config.seed)
    p = rng.normal(scale=1e-3, size=(k, d))
    q = rng.normal(scale=1e-3, size=(k, d))

    def loss_and_grads(p, q):
        mu = f @ p.T
        raw = f @ q.T
        sig = _softplus(raw) + _SIGMA_FLOOR
        resid = obs - mu
        nll = 0.5 * np.log(2.0 * np.pi) + np.log(sig) + resid**2 / (2.0 * sig**2)
        kl = np.log(sig) + (1.0 + mu**2) / (2.0 * sig**2) - 0.5
        loss = float(nll.mean() + config.df_beta * kl.mean())
        scale = 1.0 / (n * k)
        d_mu = scale * (-resid / sig**2 + config.df_beta * mu / sig**2)
        d_sig = scale * (
            (1.0 / sig - resid**2 / sig**3)
            + config.df_beta * (1.0 / sig - (1.0 + mu**2) / sig**3)
        )
        d_raw = d_sig / (1.0 + np.exp(-raw))  # softplus'(x) = sigmoid(x)
        return loss, d_mu.T @ f, d_raw.T @ f

    trace: list[float] = []
    record_every = max(1, config.df_steps // 20)
    lr = config.df_lr
    loss, gp, gq = loss_and_grads(p, q)
    if not np.isfinite(loss):
        raise NumericalError(
            f"distribution fit diverged at initialization; loss {loss}"
        )
    converged = False
    for step in range(config.df_steps):
        if step % record_every == 0:
            trace.append(loss)
        if converged:
            continue
        # halve the step on any increase (keeps the recorded trace monotone),
        # let it recover afterwards up to the configured rate
        while True:
            loss_new, gp_new, gq_new = loss_and_grads(p - lr * gp, q - lr * gq)
            if not np.isfinite(loss_new):
                lr *= 0.5
                if lr < 1e-16:
                    raise NumericalError(
                        f"distribution fit diverged at step {step}; "
                        f"last finite loss {loss:.6g}"
                    )
                continue
            if loss_new <= loss:
                break
            lr *= 0.5
            if lr < 1e-16:
                # no descent direction at float resolution: converged
                converged = True
                break
        if converged:
            continue
        p, q = p - lr * gp, q - lr * gq
        loss, gp, gq = loss_new, gp_new, gq_new
        lr = min(lr * 1.25, config.df_lr)
    trace.append(loss)

    sig = _softplus(f @ q.T) + _SIGMA_FLOOR
    return sig.mean(axis=0), p, q, trace


def concept_error_rates(
    bundle: ProbeBundle, holdout_fraction: float = 0.3, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Held-out error of a linear probe per concept; the reference uncertainty.

    Concepts with fewer than two positive or two negative annotations are
    excluded.  The error is one minus balanced accuracy on the held-out
    split, so class imbalance does not mask hard concepts.

    Returns (error_rates over scored concepts, scored mask of length K).
    """
    if bundle.annotations is None:
        raise ValidationError("concept_error_rates requires annotations")
    ann = bundle.annotations.astype(np.float64)
    n = bundle.n_examples
    pos = ann.sum(axis=0)
    scored = (pos >= 2) & (n - pos >= 2)
    if not scored.any():
        raise ValidationError("no concept has two positive and two negative examples")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = max(1, int(round(holdout_fraction * n)))
    test, train = perm[:n_test], perm[n_test:]

    sub = ann[:, scored]
    # guarantee both classes appear on both sides of the split
    usable = (
        (sub[train].sum(axis=0) >= 1)
        & ((1 - sub[train]).sum(axis=0) >= 1)
        & (sub[test].sum(axis=0) >= 1)
        & ((1 - sub[test]).sum(axis=0) >= 1)
    )
    scored_idx = np.nonzero(scored)[0][usable]
    mask = np.zeros_like(scored)
    mask[scored_idx] = True
    sub = ann[:, mask]

    w, b = binary_logistic_probe_batch(bundle.repr[train], sub[train])
    pred = (bundle.repr[test] @ w.T + b) > 0
    truth = sub[test] > 0.5
    tpr = (pred & truth).sum(axis=0) / np.maximum(truth.sum(axis=0), 1)
    tnr = (~pred & ~truth).sum(axis=0) / np.maximum((~truth).sum(axis=0), 1)
    error = 1.0 - 0.5 * (tpr + tnr)
    return error, mask


def evaluate_uncertainty(
    epsilon_est: np.ndarray,
    bundle: ProbeBundle,
    ks=(10, 40, 80),
    holdout_fraction: float = 0.3,
    seed: int = 0,
) -> dict:
    """Score an uncertainty vector against probe-based error rates.

    Reports cosine similarity with the error-rate vector and Jaccard overlap
    of the top-k least-uncertain concepts (negated vectors, so smaller means
    better-known) at each k clipped to the number of scored concepts.
    """
    error, mask = concept_error_rates(bundle, holdout_fraction, seed)
    est = np.asarray(epsilon_est, dtype=np.float64)[mask]
    result = {
        "cos_sim": uncertainty_cos_sim(est, error),
        "n_scored": int(mask.sum()),
        "jaccard": {},
    }
    for k in ks:
        kk = min(k, est.shape[0])
        result["jaccard"][k] = jaccard_topk(-est, -error, kk)
    return result
