"""Concept activations and their uncertainty.

For each example x and concept k the activation is summarized by a mean
m(x)_k = cos(theta_k) * cos(alpha_k) and a noise scale
s(x)_k = |sin(theta_k)| * sin(alpha_k), where theta_k is the angle between
the multimodal image embedding and the concept text embedding, and alpha_k
measures how well the concept's response is linearly encoded in the task
model's representation layer.

Everything here is cosine-based: rows of repr and mm_image are direction
vectors, so scaling any row by a positive constant leaves all outputs
unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bundle import ProbeBundle
from .errors import NumericalError, ValidationError

_JITTER = 1e-8


@dataclass
class ActivationStats:
    """Per-example activation means/noise and per-concept fit quality."""

    m: np.ndarray          # N x K mean activations in [-1, 1]
    s: np.ndarray          # N x K noise scales in [0, 1]
    cos_alpha: np.ndarray  # K   fit quality in [0, 1]
    cos_theta: np.ndarray  # N x K image/text cosines
    epsilon: np.ndarray    # K   column means of s


def _normalize_rows(arr: np.ndarray, name: str) -> np.ndarray:
    norms = np.linalg.norm(arr, axis=1)
    if (norms == 0.0).any():
        row = int(np.nonzero(norms == 0.0)[0][0])
        raise ValidationError(f"all-zero row in {name}[{row}]")
    return arr / norms[:, None]


def _solve_normal_equations(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Cholesky solve with a trace-scaled ridge retry for rank deficiency.

    The jitter perturbs the projection by O(1e-8) relative, which is far
    below every tolerance used downstream.
    """
    scale = float(np.trace(gram)) / gram.shape[0]
    if scale <= 0.0 or not np.isfinite(scale):
        raise NumericalError("degenerate Gram matrix in least-squares fit")
    for jitter in (0.0, _JITTER, _JITTER * 100.0):
        try:
            chol = scipy.linalg.cholesky(
                gram + jitter * scale * np.eye(gram.shape[0]), lower=True
            )
        except scipy.linalg.LinAlgError:
            continue
        half = scipy.linalg.solve_triangular(chol, rhs, lower=True)
        return scipy.linalg.solve_triangular(chol, half, lower=True, trans="T")
    raise NumericalError("Cholesky factorization failed even with ridge jitter")


def fit_alpha(bundle: ProbeBundle) -> tuple[np.ndarray, np.ndarray]:
    """Fit per-concept directions in representation space.

    For concept k the target is the response vector t_k whose i-th entry is
    the cosine of example i's multimodal embedding with the concept text
    direction.  We want the v maximizing cos-sim(R v, t_k) where R holds
    row-normalized representations.  R v ranges over the column span of R,
    and the cosine between a fixed vector t_k and a linear subspace is
    maximized by the orthogonal projection of t_k onto that subspace; the
    least-squares solution v*_k of R v ~= t_k realizes the projection, so
    cos(alpha_k) = ||R v*_k|| / ||t_k||, clamped to [0, 1] against rounding.

    Returns (cos_alpha of shape K, cav of shape K x d_f) where cav rows are
    the fitted v*_k in row-normalized representation coordinates.
    """
    if bundle.n_examples < 2:
        raise ValidationError("fit_alpha needs at least 2 examples")
    if not np.isfinite(bundle.repr).all():
        raise ValidationError("non-finite values in repr")
    rn = _normalize_rows(bundle.repr, "repr")
    targets = _normalize_rows(bundle.mm_image, "mm_image") @ bundle.concept_text.T
    return _fit_alpha_arrays(rn, targets, bundle.concept_names)


def _fit_alpha_arrays(
    rn: np.ndarray, targets: np.ndarray, names=None
) -> tuple[np.ndarray, np.ndarray]:
    """Core of fit_alpha on a row-normalized repr and raw N x K targets."""
    t_norms = np.linalg.norm(targets, axis=0)
    if (t_norms == 0.0).any():
        k = int(np.nonzero(t_norms == 0.0)[0][0])
        label = f" ({names[k]})" if names else ""
        raise ValidationError(f"concept response degenerate for concept {k}{label}")
    gram = rn.T @ rn
    v = _solve_normal_equations(gram, rn.T @ targets)  # d_f x K
    proj = rn @ v
    cos_alpha = np.clip(np.linalg.norm(proj, axis=0) / t_norms, 0.0, 1.0)
    return cos_alpha, v.T


def compute_stats(bundle: ProbeBundle) -> ActivationStats:
    """Compute mean activations, noise scales and the average noise vector.

    Angles follow the convention theta in [0, pi], alpha in [0, pi/2], so
    both sine terms are the non-negative branch sqrt(max(0, 1 - cos^2)).
    """
    cos_alpha, _ = fit_alpha(bundle)
    img = _normalize_rows(bundle.mm_image, "mm_image")
    txt = _normalize_rows(bundle.concept_text, "concept_text")
    cos_theta = np.clip(img @ txt.T, -1.0, 1.0)
    sin_theta = np.sqrt(np.maximum(0.0, 1.0 - cos_theta**2))
    sin_alpha = np.sqrt(np.maximum(0.0, 1.0 - cos_alpha**2))
    m = cos_theta * cos_alpha[None, :]
    s = sin_theta * sin_alpha[None, :]
    return ActivationStats(
        m=m,
        s=s,
        cos_alpha=cos_alpha,
        cos_theta=cos_theta,
        epsilon=s.mean(axis=0),
    )


def stats_matrices(stats: ActivationStats) -> dict[str, np.ndarray]:
    """Matrices to dump for the `stats` CLI subcommand."""
    return {
        "m": stats.m,
        "s": stats.s,
        "cos_alpha": stats.cos_alpha[None, :],
        "cos_theta": stats.cos_theta,
        "epsilon": stats.epsilon[None, :],
    }
