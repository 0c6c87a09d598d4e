"""Reference estimators for head-to-head comparisons.

Five methods: plain least squares on mean activations, a lasso fit from
ground-truth annotations (the closest available proxy for true importance),
two label-free linear fits on multimodal-derived activations, and a
CAV-score method based on logit directional derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationStats, _normalize_rows, fit_alpha
from .bundle import ProbeBundle
from .errors import ValidationError
from .solvers import (
    binary_logistic_probe_batch,
    lasso_cd,
    multinomial_logistic_gd,
    precompute_lasso_gram,
    ridge_solve,
)

OLS_JITTER = 1e-10
DEFAULT_L1 = 1e-3
DEFAULT_L2 = 1.0


@dataclass
class BaselineReport:
    method: str                    # one of ols, oracle, ycbm, ocbm, tcav
    scores: np.ndarray             # L x K, finite on scored concepts
    metadata: dict = field(default_factory=dict)
    scored: np.ndarray | None = None  # K bools; None means all scored

    def __post_init__(self):
        if self.scored is None:
            self.scored = np.ones(self.scores.shape[1], dtype=bool)
        if not np.isfinite(self.scores[:, self.scored]).all():
            raise ValidationError("baseline scores contain non-finite values")


def ols_explain(stats: ActivationStats, logits: np.ndarray) -> BaselineReport:
    """Unregularized least squares of each logit column on mean activations."""
    logits = np.asarray(logits, dtype=np.float64)
    coefs = ridge_solve(stats.m, logits, OLS_JITTER)  # K x L
    return BaselineReport(
        method="ols",
        scores=coefs.T,
        metadata={"jitter": OLS_JITTER},
    )


def _lasso_per_label(x: np.ndarray, logits: np.ndarray, alpha: float) -> tuple:
    n_labels = logits.shape[1]
    scores = np.zeros((n_labels, x.shape[1]))
    sweeps = []
    shared = precompute_lasso_gram(x)
    for y in range(n_labels):
        w, _, info = lasso_cd(x, logits[:, y], alpha, precomputed=shared)
        scores[y] = w
        sweeps.append(info["sweeps"])
    return scores, sweeps


def oracle_explain(bundle: ProbeBundle, l1_strength: float = DEFAULT_L1) -> BaselineReport:
    """Lasso from binary concept annotations to logits."""
    if bundle.annotations is None:
        raise ValidationError("oracle baseline requires annotations")
    x = bundle.annotations.astype(np.float64)
    scores, sweeps = _lasso_per_label(x, bundle.logits, l1_strength)
    return BaselineReport(
        method="oracle",
        scores=scores,
        metadata={"l1_strength": l1_strength, "sweeps": sweeps},
    )


def ycbm_explain(bundle: ProbeBundle, l1_strength: float = DEFAULT_L1) -> BaselineReport:
    """Lasso from raw image/text cosine activations to logits.

    Activations come straight from the multimodal embeddings without the
    representation-side projection, so this is the regression-to-logits
    variant of a label-free concept bottleneck.
    """
    img = _normalize_rows(bundle.mm_image, "mm_image")
    txt = _normalize_rows(bundle.concept_text, "concept_text")
    cos_theta = np.clip(img @ txt.T, -1.0, 1.0)
    scores, sweeps = _lasso_per_label(cos_theta, bundle.logits, l1_strength)
    return BaselineReport(
        method="ycbm",
        scores=scores,
        metadata={"l1_strength": l1_strength, "sweeps": sweeps},
    )


def ocbm_explain(bundle: ProbeBundle, l2_strength: float = DEFAULT_L2) -> BaselineReport:
    """Projection-fit activations, then multinomial logistic regression.

    Step 1 fits concept directions in representation space; step 2 trains a
    linear classifier from the projected activations to the argmax labels of
    the bundle logits and returns its weight matrix.
    """
    _, cav = fit_alpha(bundle)
    acts = _normalize_rows(bundle.repr, "repr") @ cav.T  # N x K
    labels = bundle.logits.argmax(axis=1)
    if len(np.unique(labels)) < 2:
        raise ValidationError("single-class probe labels; cannot fit classifier")
    weights, _, info = multinomial_logistic_gd(
        acts, labels, bundle.n_labels, l2=l2_strength
    )
    return BaselineReport(
        method="ocbm",
        scores=weights,
        metadata={"l2_strength": l2_strength, **info},
    )


def tcav_explain(bundle: ProbeBundle, probe_l2: float = 1e-2) -> BaselineReport:
    """Fraction of probe examples whose logit directional derivative along
    each concept activation vector is positive.

    CAVs are logistic-probe weight vectors on representations predicting the
    annotation columns.  The directional derivative of logit y with respect
    to the representation is taken from the least-squares linear map from
    representations to logits; this is exact when the representation is the
    last layer under a linear head, and an approximation otherwise.
    Concepts with fewer than two positive or two negative annotations are
    left unscored.
    """
    if bundle.annotations is None:
        raise ValidationError("tcav requires annotations to learn CAVs")
    ann = bundle.annotations.astype(np.float64)
    pos = ann.sum(axis=0)
    scored = (pos >= 2) & (bundle.n_examples - pos >= 2)

    k = bundle.n_concepts
    scores = np.full((bundle.n_labels, k), np.nan)
    if scored.any():
        cavs, _ = binary_logistic_probe_batch(
            bundle.repr, ann[:, scored], l2=probe_l2
        )
        grad_map = ridge_solve(bundle.repr, bundle.logits, OLS_JITTER)  # d_f x L
        # The fitted gradient is constant across examples, so the positive
        # fraction is 0 or 1 per (label, concept); kept as a fraction to
        # match the score's definition.
        dots = cavs @ grad_map  # n_scored x L
        frac = (dots > 0).astype(np.float64).T
        scores[:, scored] = frac
    return BaselineReport(
        method="tcav",
        scores=np.where(np.isnan(scores), 0.0, scores),
        metadata={
            "probe_l2": probe_l2,
            "n_unscored": int((~scored).sum()),
        },
        scored=scored,
    )
