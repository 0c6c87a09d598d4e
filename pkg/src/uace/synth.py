"""Synthetic scenario generators and analytic oracles.

Every generator emits a full ProbeBundle so the whole pipeline (stats,
estimators, ranking, metrics) is exercised end to end, plus a ground-truth
dict describing exactly what was injected.  Two families:

* Theory scenarios (overcomplete, undercomplete).  The label response and
  the concept responses are laid out on an orthonormal frame inside the
  span of the example matrix.  Concept columns are built so that the joint
  least-squares coefficients of the logit on the cosine activations equal
  prescribed values v*_k drawn from the target sampling law; this removes
  the finite-sample cross-coupling that the closed forms neglect, so the
  estimators can be compared against those forms at tight tolerances.
  Per-concept noise levels are encoded in the representation matrix: the
  fit angle alpha_k is placed so that tan(alpha_k) is proportional to
  sigma_k, which makes the average-noise prior proportional to
  sigma_k^2 exactly as the closed forms assume.

* Structured scenarios (four_color, spurious_tag).  Direction-plus-noise
  data with a trained-model stand-in: a fixed linear map whose row space
  contains the label direction (a full-rank map would make every concept
  response perfectly representable and the noise vector identically zero).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .activations import ActivationStats, compute_stats
from .baselines import ocbm_explain, ols_explain, oracle_explain, tcav_explain, ycbm_explain
from .bundle import ProbeBundle, make_bundle
from .errors import NumericalError, ValidationError
from .estimator import BayesConfig, SparsifyConfig, explain
from .metrics import to_ranked

_COL_SCALE = 0.04      # cosine-unit column norm factor, times sqrt(N)
_MAX_TAN_ALPHA = 0.05  # keeps cos(alpha) within 0.12% of 1 in theory scenarios
_REPR_DIM = 128
FOUR_COLOR_NAMES = ("red", "green", "blue", "white")
COMPOUND_NAMES = ("red or blue", "blue or red", "green or blue", "blue or green")
TRIAL_TUNE_CONFIG = dict(tune=True, tune_steps=60, tune_lr=0.05, tune_noise_samples=8)


@dataclass
class SyntheticScenario:
    kind: str                      # overcomplete | undercomplete | four_color | spurious_tag
    dim: int
    n: int
    k: int
    seed: int
    w: np.ndarray | None = None        # D, true label direction
    u: np.ndarray | None = None        # K x D concept means
    sigma: np.ndarray | None = None    # K concept noise levels
    b1: float = 0.0
    b2: float = 0.0
    sigma2: float = 0.0
    populations: np.ndarray | None = None
    tag_prob: float = 0.5
    reg_lambda: float = 1.0            # theory-side regularization strength

    def __post_init__(self):
        if self.sigma is not None and (np.asarray(self.sigma) < 0).any():
            raise ValidationError("sigma must be non-negative")
        if not 0.0 <= self.tag_prob <= 1.0:
            raise ValidationError("tag_prob must lie in [0, 1]")
        if self.populations is not None:
            p = np.asarray(self.populations, dtype=np.float64)
            if (p < 0).any():
                raise ValidationError("populations must be non-negative")


def norm_cdf(x: float) -> float:
    """Standard normal CDF via the error function; |error| well below 1e-7."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


# ---------------------------------------------------------------------------
# scenario factories
# ---------------------------------------------------------------------------

def _orthonormal_rows(rng, count, dim, anchor=None):
    """Random orthonormal rows, optionally orthogonalized against anchor rows."""
    g = rng.standard_normal((dim, count))
    if anchor is not None:
        a = np.atleast_2d(anchor)
        a_q, _ = np.linalg.qr(a.T)  # orthonormalize so the projector is exact
        g -= a_q @ (a_q.T @ g)
    q, _ = np.linalg.qr(g)
    return q.T[:count]


def _balancing_columns(rng, partial, forbid):
    """Two columns that pin every row of [partial | columns] to one common
    norm while staying orthogonal to the given orthonormal directions.

    Needed because the activation model normalizes representation rows, and
    row scaling would otherwise tilt the column span away from the encoded
    angles.  Two columns give each row a full circle of admissible values,
    so alternating projections between the per-row magnitude constraint and
    the orthogonality subspace converge; a single column would only offer a
    sign choice per row, which generically cannot meet the subspace.
    """
    row_sq = (partial**2).sum(axis=1)
    # generous headroom keeps every row's admissible circle large relative
    # to the orthogonalization correction, which the iteration needs
    r_sq = float(row_sq.max()) * 2.0 + 1e-12
    delta = np.sqrt(r_sq - row_sq)
    scale = np.linalg.norm(delta)
    g = rng.standard_normal((partial.shape[0], 2))
    norms = np.linalg.norm(g, axis=1)
    g *= (delta / np.maximum(norms, 1e-300))[:, None]
    for _ in range(2000):
        g = g - forbid @ (forbid.T @ g)
        norms = np.linalg.norm(g, axis=1)
        if np.abs(norms - delta).max() < 1e-13 * scale:
            break
        g *= (delta / np.maximum(norms, 1e-300))[:, None]
    g = g - forbid @ (forbid.T @ g)
    # the iteration can settle on a nearby limit cycle instead of an exact
    # intersection; a relative row-norm residual of 1e-4 perturbs the fitted
    # angles only at second order (~1e-8), far below every tolerance used
    if (np.abs(np.linalg.norm(g, axis=1) - delta) / delta).max() > 1e-4:
        raise NumericalError("balancing column iteration did not converge")
    return g, math.sqrt(r_sq)


def _random_rotation(rng, dim):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))[None, :]


def _span_basis(mat):
    """Orthonormal basis of the numerically meaningful column space.

    Plain QR of a rank-deficient matrix pads the basis with arbitrary
    directions, which would over-constrain the balancing columns; truncating
    at the singular-value floor avoids that.
    """
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    keep = s > 1e-10 * max(s[0], 1e-300)
    return u[:, keep]


def overcomplete_scenario(
    dim=512, n=2000, k=20, seed=0, align=0.8, sigma_range=(0.001, 0.002),
    reg_lambda=1.5e6,
) -> SyntheticScenario:
    """Orthonormal concept means, all with a fixed-magnitude overlap with w."""
    rng = np.random.default_rng(seed)
    u = _orthonormal_rows(rng, k, dim)
    signs = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
    gamma = align * signs * np.linspace(1.0, 0.75, k)
    w = gamma @ u
    sigma = np.geomspace(sigma_range[0], sigma_range[1], k)
    return SyntheticScenario(
        kind="overcomplete", dim=dim, n=n, k=k, seed=seed,
        w=w, u=u, sigma=sigma, reg_lambda=reg_lambda,
    )


def corollary_scenario(
    k, dim=128, n=128, seed=0, w_norm=80.0, sigma_c=0.005, reg_lambda=None,
) -> SyntheticScenario:
    """First concept mean equals w with zero noise; the rest orthogonal to w."""
    rng = np.random.default_rng(seed)
    basis = _orthonormal_rows(rng, k, dim)
    w = w_norm * basis[0]
    u = np.vstack([w, basis[1:]])
    sigma = np.full(k, sigma_c)
    sigma[0] = 0.0
    if reg_lambda is None:
        reg_lambda = 8.0 / sigma_c**2  # prior-to-signal ratio 8 on noisy concepts
    return SyntheticScenario(
        kind="overcomplete", dim=dim, n=n, k=k, seed=seed,
        w=w, u=u, sigma=sigma, reg_lambda=reg_lambda,
    )


def undercomplete_scenario(
    b1=0.05, b2=0.03, sigma2=0.1, dim=16, n=512, seed=0, reg_lambda=10.0,
) -> SyntheticScenario:
    return SyntheticScenario(
        kind="undercomplete", dim=dim, n=n, k=2, seed=seed,
        b1=b1, b2=b2, sigma2=sigma2, reg_lambda=reg_lambda,
    )


def four_color_scenario(
    populations=(0.25, 0.25, 0.25, 0.25), k=4, dim=32, n=400, seed=0,
) -> SyntheticScenario:
    if k not in (4, 8, 16):
        raise ValidationError("four_color supports k in {4, 8, 16}")
    return SyntheticScenario(
        kind="four_color", dim=dim, n=n, k=k, seed=seed,
        populations=np.asarray(populations, dtype=np.float64),
    )


def spurious_tag_scenario(
    tag_prob, n_nuisance=0, dim=64, n=400, seed=0,
) -> SyntheticScenario:
    k = 3 + n_nuisance
    if k + 1 > dim:
        raise ValidationError("dim too small for the requested nuisance count")
    return SyntheticScenario(
        kind="spurious_tag", dim=dim, n=n, k=k, seed=seed, tag_prob=tag_prob,
        populations=np.array([0.5, 0.5]),
    )


# ---------------------------------------------------------------------------
# theory-scenario machinery
# ---------------------------------------------------------------------------

def _f32(a):
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def _solve_frame_offset(y_over_s: float, v_star: np.ndarray) -> float:
    """Scalar tau with tau + sum_j (sqrt(tau^2 + 4 v_j^2) - tau) / 2 = Y'.

    Monotone in tau on the relevant range, solved by bisection to machine
    precision.  Feasibility requires Y'^2 > 4 sum v_j^2 approximately; the
    column scale is chosen small enough that this always holds.
    """
    def f(tau):
        return tau + 0.5 * np.sum(np.sqrt(tau**2 + 4.0 * v_star**2) - tau) - y_over_s

    lo, hi = 1e-12, float(y_over_s)
    if f(hi) < 0:
        raise NumericalError("frame construction infeasible; column scale too large")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _coefficient_targeted_columns(rng, y, v_star, n):
    """Columns c_k with joint least squares of y on them equal to v_star.

    Each column is s (beta_k y_hat + sqrt(1 - beta_k^2) q_k) with the q_k an
    orthonormal set perpendicular to y.  The beta_k solve the normal
    equations exactly for the prescribed coefficients.  Returns (columns
    N x K, noise carriers N x K for the alpha encoding, col scale, and the
    orthonormal directions spanning every column's response).
    """
    k = v_star.shape[0]
    y_hat = y / np.linalg.norm(y)
    frame = _orthonormal_rows(rng, 2 * k, n, anchor=y_hat[None, :])  # 2K x N
    q = frame[:k].T
    carriers = frame[k:].T

    s_bar = _COL_SCALE * math.sqrt(n)
    tau = _solve_frame_offset(np.linalg.norm(y) / s_bar, v_star)
    beta = np.zeros(k)
    nz = v_star != 0.0
    beta[nz] = (np.sqrt(tau**2 + 4.0 * v_star[nz] ** 2) - tau) / (2.0 * v_star[nz])
    if np.abs(beta).max() >= 0.5:
        raise NumericalError("frame construction produced extreme mixing weights")
    cols = s_bar * (y_hat[:, None] * beta[None, :] + q * np.sqrt(1.0 - beta**2)[None, :])
    response_span = np.concatenate([y_hat[:, None], q], axis=1)
    return cols, carriers, s_bar, response_span


def _embed_columns_as_cosines(cols):
    """mm_image / concept_text pair whose cosine matrix equals cols exactly.

    Concept texts are coordinate axes; image rows carry the target cosines
    plus one fill coordinate that pins the row norm to 1.
    """
    n, k = cols.shape
    row_ss = (cols**2).sum(axis=1)
    if row_ss.max() >= 0.8:
        raise NumericalError("cosine targets too large for unit-norm embedding")
    mm = np.concatenate([cols, np.sqrt(1.0 - row_ss)[:, None]], axis=1)
    ct = np.eye(k, k + 1)
    return mm, ct


def _alpha_encoded_repr(rng, cols, carriers, col_norms, tan_alpha, response_span):
    """Representation whose projection fit yields the requested angles.

    Basis vectors cos(a_k) t_hat_k + sin(a_k) n_hat_k span the column space.
    Balancing columns pin every row to one common norm so that the
    activation model's row normalization reduces to a global rescale; they
    are orthogonal to every concept response and therefore do not move the
    projections.  A random rotation then hides the basis without changing
    row norms or the span.
    """
    cos_a = 1.0 / np.sqrt(1.0 + tan_alpha**2)
    sin_a = tan_alpha * cos_a
    t_hat = cols / col_norms[None, :]
    basis = t_hat * cos_a[None, :] + carriers * sin_a[None, :]
    filler, _ = _balancing_columns(rng, basis, response_span)
    full = np.concatenate([basis, filler], axis=1)
    return full @ _random_rotation(rng, full.shape[1]), cos_a


def rho_targets(scenario: SyntheticScenario) -> np.ndarray:
    """Per-concept prior-to-signal ratios lambda sigma_k^2 / ||u_k||^2."""
    norms_sq = (scenario.u**2).sum(axis=1)
    return scenario.reg_lambda * scenario.sigma**2 / norms_sq


def lambda_eq_for_targets(
    stats: ActivationStats, rho: np.ndarray, beta: float = 1.0
) -> float:
    """Map prior-to-signal ratios onto the estimator's prior scale.

    In the ridge normal equations the penalty on coefficient k, relative
    to the data Gram diagonal, is eps_k^2 / (lambda beta cos^2(alpha_k)
    ||cos_theta col k||^2); solving for lambda at the requested ratio and
    averaging over the noisy concepts gives a single shared value.
    """
    col_sq = (stats.cos_theta**2).sum(axis=0)
    mask = rho > 0
    if not mask.any():
        raise ValidationError("no noisy concept to anchor the prior scale")
    vals = stats.epsilon[mask] ** 2 / (
        np.maximum(stats.cos_alpha[mask], 1e-12) ** 2 * col_sq[mask] * rho[mask]
    )
    return float(vals.mean() / beta)


def gen_overcomplete(scenario: SyntheticScenario) -> tuple[ProbeBundle, dict]:
    """Over-complete concept set: many concepts, arbitrary overlaps with w.

    Per trial, coefficient targets are drawn from the standard-estimator
    sampling law Normal(u_k.w / ||u_k||^2, sigma_k^2 ||w||^2 / ||u_k||^2)
    and realized exactly as the least-squares solution on the generated
    activations; noise levels enter the bundle through the alpha angles.
    """
    if scenario.u is None or scenario.w is None or scenario.sigma is None:
        raise ValidationError("overcomplete scenario requires w, u, sigma")
    k, n, d = scenario.k, scenario.n, scenario.dim
    if 2 * k + 1 > min(n, d):
        raise ValidationError(
            f"concept count {k} exceeds ambient capacity: need 2K+1 <= min(N={n}, D={d})"
        )
    rng = np.random.default_rng(scenario.seed)

    norms_u = np.linalg.norm(scenario.u, axis=1)
    w_norm = float(np.linalg.norm(scenario.w))
    mean_v = scenario.u @ scenario.w / norms_u**2
    std_v = scenario.sigma * w_norm / norms_u
    v_star = rng.normal(mean_v, std_v)

    x = _orthonormal_rows(rng, d, n).T * math.sqrt(n)  # N x D with X^T X = N I
    y = x @ scenario.w  # logit RMS is exactly ||w||

    cols, carriers, s_bar, span = _coefficient_targeted_columns(rng, y, v_star, n)
    mm, ct = _embed_columns_as_cosines(cols)
    tan_alpha = _MAX_TAN_ALPHA * (scenario.sigma / norms_u) / max(
        (scenario.sigma / norms_u).max(), 1e-300
    )
    reprs, cos_a = _alpha_encoded_repr(
        rng, cols, carriers, np.full(k, s_bar), tan_alpha, span
    )

    names = [f"concept_{i:03d}" for i in range(k)]
    bundle = make_bundle(
        repr=_f32(reprs),
        logits=_f32(np.column_stack([y, -y])),
        mm_image=_f32(mm),
        concept_text=_f32(ct),
        concept_names=names,
        label_names=["positive", "negative"],
        metadata={"scenario": "overcomplete", "seed": scenario.seed},
    )
    truth = {
        "v_star": v_star,
        "mean_v": mean_v,
        "std_v": std_v,
        "cos_theta": cols,
        "cos_alpha": cos_a,
        "col_scale": s_bar,
        "rho": rho_targets(scenario),
    }
    return bundle, truth


def predict_corollary(scenario: SyntheticScenario, k_range=None) -> np.ndarray:
    """Probability that plain least squares keeps concept 1 top-ranked.

    The first concept scores exactly 1; each other concept independently
    stays below 1 with probability Phi(||u_k|| / (sigma_k ||w||)), so the
    joint probability is the product over k >= 2.  For K beyond the
    scenario's concept count the last concept's factor is repeated.
    """
    if scenario.u is None or scenario.w is None or scenario.sigma is None:
        raise ValidationError("predict_corollary requires w, u, sigma")
    w_norm = float(np.linalg.norm(scenario.w))
    norms_u = np.linalg.norm(scenario.u, axis=1)

    def factor(idx):
        if scenario.sigma[idx] == 0.0:
            return 1.0
        return norm_cdf(norms_u[idx] / (scenario.sigma[idx] * w_norm))

    if k_range is None:
        k_range = [scenario.k]
    out = []
    for k in k_range:
        prob = 1.0
        for j in range(1, k):
            prob *= factor(min(j, scenario.k - 1))
        out.append(prob)
    return np.asarray(out)


def gen_undercomplete(scenario: SyntheticScenario) -> tuple[ProbeBundle, dict]:
    """Two near-collinear concepts, both nearly orthogonal to the label rule.

    Concept activation vectors are beta_i u + (1 - beta_i) v on orthogonal
    unit u, v with beta_i drawn from Normal(b_i, sigma2^2) (or fixed at b_i
    when sigma2 is zero).  The label response and the shared v response are
    realized as exactly orthogonal example-space vectors, so population
    identities (zero overlap at beta = 0, the exact two-concept
    least-squares weights) hold without sampling error.
    """
    rng = np.random.default_rng(scenario.seed)
    n, d = scenario.n, scenario.dim
    if d < 2 or n < 8:
        raise ValidationError("undercomplete needs dim >= 2 and n >= 8")
    frame = _orthonormal_rows(rng, 2, n)  # responses of u and v on the examples
    s_resp = math.sqrt(n / d)             # response scale of a unit direction
    y_resp = frame[0] * s_resp
    v_resp = frame[1] * s_resp

    if scenario.sigma2 == 0.0:
        betas = np.array([scenario.b1, scenario.b2])
    else:
        betas = rng.normal([scenario.b1, scenario.b2], scenario.sigma2)
    acts = np.column_stack(
        [betas[i] * y_resp + (1.0 - betas[i]) * v_resp for i in range(2)]
    )

    # cosine-range rescale; uniform across concepts so activation units are
    # recovered by one factor
    s_c = 0.5 / max(np.abs(acts).max(), np.abs(y_resp).max(), 1e-300)
    cols = s_c * acts
    mm, ct = _embed_columns_as_cosines(cols)

    noise_sd = math.sqrt(2.0) * scenario.sigma2  # vector-level spread of w_i
    col_norms = np.linalg.norm(cols, axis=0)
    t_span = _span_basis(cols)
    if noise_sd == 0.0:
        tan_alpha = np.zeros(2)
        carriers = np.zeros_like(cols)
    else:
        tan_alpha = np.full(2, _MAX_TAN_ALPHA)
        carriers = _orthonormal_rows(rng, 2, n, anchor=t_span.T).T
    reprs, cos_a = _alpha_encoded_repr(
        rng, cols, carriers, col_norms, tan_alpha, t_span
    )

    bundle = make_bundle(
        repr=_f32(reprs),
        logits=_f32(np.column_stack([y_resp, -y_resp])),
        mm_image=_f32(mm),
        concept_text=_f32(ct),
        concept_names=["concept_one", "concept_two"],
        label_names=["positive", "negative"],
        metadata={"scenario": "undercomplete", "seed": scenario.seed},
    )
    wbar_sq = betas**2 + (1.0 - betas) ** 2  # squared concept-vector norms
    rho = scenario.reg_lambda * noise_sd**2 / wbar_sq
    truth = {
        "betas": betas,
        "noise_sd": noise_sd,
        "rho": rho,
        "cos_theta": cols,
        "cos_alpha": cos_a,
        "col_scale": s_c,
        # reported coefficients act on m columns; multiplying by
        # cos(alpha) * s_c converts them to activation units
        "to_activation_units": cos_a * s_c,
    }
    return bundle, truth


def undercomplete_ols_weights(b1: float, b2: float) -> np.ndarray:
    """Exact least-squares weights for the noiseless two-concept instance."""
    return np.array([(1.0 - b2) / (b1 - b2), -(1.0 - b1) / (b1 - b2)])


# ---------------------------------------------------------------------------
# structured scenarios
# ---------------------------------------------------------------------------

def _counts_from_populations(populations, n):
    p = np.asarray(populations, dtype=np.float64)
    total = p.sum()
    if total <= 0:
        raise ValidationError("populations must sum to a positive value")
    raw = p / total * n
    counts = np.floor(raw).astype(int)
    rem = n - counts.sum()
    order = np.argsort(-(raw - counts))
    for i in range(rem):
        counts[order[i % len(counts)]] += 1
    return counts


def gen_four_color(scenario: SyntheticScenario) -> tuple[ProbeBundle, dict]:
    """Solid-color stand-in: four latent directions plus pixel noise.

    Labels: red and green map to class_a, blue and white to class_b.  The
    trained-model stand-in is a fixed orthonormal map whose first row is the
    label direction; k = 8 adds the compound color concepts, k = 16 also
    adds eight nuisance directions orthogonal to every color.
    """
    if scenario.populations is None or len(scenario.populations) != 4:
        raise ValidationError("four_color needs a 4-entry populations vector")
    rng = np.random.default_rng(scenario.seed)
    n, d = scenario.n, scenario.dim
    dirs = _orthonormal_rows(rng, 4, d)  # rows follow FOUR_COLOR_NAMES order

    counts = _counts_from_populations(scenario.populations, n)
    colors = np.repeat(np.arange(4), counts)
    x = dirs[colors] + 0.05 * rng.standard_normal((n, d))

    label_dir = (dirs[0] + dirs[1] - dirs[2] - dirs[3]) / 2.0
    w_rows = _orthonormal_rows(rng, 8, d, anchor=label_dir[None, :])
    w_f = np.vstack([label_dir, w_rows[:7]])
    reprs = x @ w_f.T
    score = 4.0 * (x @ label_dir)
    logits = np.column_stack([score, -score])

    names = list(FOUR_COLOR_NAMES)
    ct_rows = [dirs[i] for i in range(4)]
    ann_cols = [colors == i for i in range(4)]
    if scenario.k >= 8:
        pair_idx = {"red or blue": (0, 2), "blue or red": (2, 0),
                    "green or blue": (1, 2), "blue or green": (2, 1)}
        for name in COMPOUND_NAMES:
            a, b = pair_idx[name]
            ct_rows.append((dirs[a] + dirs[b]) / math.sqrt(2.0))
            ann_cols.append((colors == a) | (colors == b))
            names.append(name)
    if scenario.k >= 16:
        # tinted variants of each color: related but distinct phrasings
        # whose importance is clearly signed, so the compound concepts are
        # the only near-zero group in the ranking
        tilt = _orthonormal_rows(rng, 8, d, anchor=dirs)
        for i, prefix in enumerate(("dark", "pale")):
            for c in range(4):
                v = dirs[c] + 0.5 * tilt[4 * i + c]
                ct_rows.append(v / np.linalg.norm(v))
                ann_cols.append(colors == c)
                names.append(f"{prefix} {FOUR_COLOR_NAMES[c]}")

    bundle = make_bundle(
        repr=_f32(reprs),
        logits=_f32(logits),
        mm_image=_f32(x),
        concept_text=_f32(np.vstack(ct_rows)),
        concept_names=names,
        label_names=["class_a", "class_b"],
        annotations=np.column_stack(ann_cols).astype(np.uint8),
        metadata={"scenario": "four_color", "seed": scenario.seed},
    )
    truth = {
        "colors": colors,
        "directions": dirs,
        "label_dir": label_dir,
        "counts": counts,
    }
    return bundle, truth


def gen_spurious_tag(scenario: SyntheticScenario) -> tuple[ProbeBundle, dict]:
    """Two classes with a corner-tag direction of controllable correlation.

    The tag appears with probability p on class A examples and 1 - p on
    class B.  The stand-in model emulates training on that distribution: its
    scoring direction picks up the tag with weight 0.8 (2p - 1), so a
    p = 1 model relies on the tag positively and a p = 0 model negatively.
    Nuisance concepts are orthogonal to everything and never appear.

    The two encoders see independently perturbed percepts, so the cosine
    activations explain the logits only approximately; the residual is what
    an unregularized fit spreads over the weak nuisance columns.
    """
    rng = np.random.default_rng(scenario.seed)
    n, d, p = scenario.n, scenario.dim, scenario.tag_prob
    n_nuis = scenario.k - 3
    frame = _orthonormal_rows(rng, 3 + n_nuis, d)
    c_a, c_b, tag = frame[0], frame[1], frame[2]
    nuis = frame[3:]

    counts = _counts_from_populations(scenario.populations, n)
    cls = np.repeat(np.arange(2), counts)
    tag_p = np.where(cls == 0, p, 1.0 - p)
    has_tag = rng.random(n) < tag_p
    x = (
        np.where(cls[:, None] == 0, c_a[None, :], c_b[None, :])
        + has_tag[:, None] * tag[None, :]
        + 0.05 * rng.standard_normal((n, d))
    )
    x_mm = x + 0.25 * rng.standard_normal((n, d))

    head = (c_a - c_b) + 0.8 * (2.0 * p - 1.0) * tag
    head = head / np.linalg.norm(head)
    extra = _orthonormal_rows(rng, 8, d, anchor=np.vstack([head, tag]))
    w_f = np.vstack([head, tag, extra[:6]])
    reprs = x @ w_f.T
    score = 4.0 * (x @ head)

    names = ["class_a_shape", "class_b_shape", "corner_tag"] + [
        f"nuisance_{i:02d}" for i in range(n_nuis)
    ]
    ct = np.vstack([c_a, c_b, tag] + list(nuis))
    ann = np.column_stack(
        [cls == 0, cls == 1, has_tag] + [np.zeros(n, dtype=bool)] * n_nuis
    ).astype(np.uint8)

    bundle = make_bundle(
        repr=_f32(reprs),
        logits=_f32(np.column_stack([score, -score])),
        mm_image=_f32(x_mm),
        concept_text=_f32(ct),
        concept_names=names,
        label_names=["class_a", "class_b"],
        annotations=ann,
        metadata={"scenario": "spurious_tag", "seed": scenario.seed,
                  "tag_prob": p},
    )
    truth = {"cls": cls, "has_tag": has_tag, "head": head, "tag_index": 2}
    return bundle, truth


GENERATORS = {
    "overcomplete": gen_overcomplete,
    "undercomplete": gen_undercomplete,
    "four_color": gen_four_color,
    "spurious_tag": gen_spurious_tag,
}


def generate(scenario: SyntheticScenario) -> tuple[ProbeBundle, dict]:
    try:
        gen = GENERATORS[scenario.kind]
    except KeyError as exc:
        raise ValidationError(f"unknown scenario kind: {scenario.kind}") from exc
    return gen(scenario)


def gen_random_bundle(
    n, k, l, d_f=64, d_g=64, seed=0, with_annotations=True
) -> ProbeBundle:
    """Valid bundle of a given shape for pipeline stress runs.

    Logits carry a planted sparse dependence on the annotations so that
    annotation-based estimators have sensible targets (and tractable fits)
    rather than pure-noise interpolation problems.
    """
    rng = np.random.default_rng(seed)
    ann = None
    logits = rng.standard_normal((n, l))
    if with_annotations:
        ann = rng.binomial(1, 0.05, size=(n, k)).astype(np.uint8)
        ann[:3, :] = 1   # guarantee two positives ...
        ann[3:6, :] = 0  # ... and two negatives per concept
        coef = np.zeros((k, l))
        for col in range(l):
            support = rng.choice(k, size=min(5, k), replace=False)
            vals = rng.normal(scale=2.0, size=support.size)
            if (vals <= 0).all():
                vals[0] = abs(vals[0])  # keep each label's top list informative
            coef[support, col] = vals
        logits = ann @ coef + 0.3 * logits
    return make_bundle(
        repr=_f32(rng.standard_normal((n, d_f))),
        logits=_f32(logits),
        mm_image=_f32(rng.standard_normal((n, d_g))),
        concept_text=_f32(rng.standard_normal((k, d_g))),
        concept_names=[f"concept_{i:04d}" for i in range(k)],
        label_names=[f"label_{i:03d}" for i in range(l)],
        annotations=ann,
        metadata={"scenario": "random", "seed": seed},
    )


# ---------------------------------------------------------------------------
# trial suite
# ---------------------------------------------------------------------------

def trial_seeds(seed: int, n_trials: int) -> list[int]:
    """Per-trial seeds from a splittable root; independent of scheduling."""
    return [
        int(child.generate_state(1, dtype=np.uint64)[0]) & 0x7FFFFFFFFFFFFFFF
        for child in np.random.SeedSequence(seed).spawn(n_trials)
    ]


def _uace_theory_config(stats, truth) -> BayesConfig:
    lam = lambda_eq_for_targets(stats, truth["rho"], beta=1.0)
    return BayesConfig(lam=lam, beta=1.0)


def run_single_trial(scenario: SyntheticScenario, estimators, trial_seed: int):
    """One generate / explain / rank pass; returns {estimator: score row}."""
    bundle, truth = generate(replace(scenario, seed=trial_seed))
    stats = compute_stats(bundle)
    out = {}
    for name in estimators:
        if name == "uace":
            if scenario.kind in ("overcomplete", "undercomplete"):
                cfg = _uace_theory_config(stats, truth)
            else:
                cfg = BayesConfig(seed=trial_seed, **TRIAL_TUNE_CONFIG)
            expl = explain(bundle, cfg, SparsifyConfig(0.0), stats=stats)
            out[name] = expl.importance[0]
        elif name == "ols":
            out[name] = ols_explain(stats, bundle.logits).scores[0]
        elif name == "ycbm":
            out[name] = ycbm_explain(bundle).scores[0]
        elif name == "ocbm":
            out[name] = ocbm_explain(bundle).scores[0]
        elif name == "oracle":
            out[name] = oracle_explain(bundle).scores[0]
        elif name == "tcav":
            out[name] = tcav_explain(bundle).scores[0]
        else:
            raise ValidationError(f"unknown estimator: {name}")
    return out, bundle.concept_names


def run_trial_suite(
    scenario: SyntheticScenario,
    estimators,
    n_trials: int,
    seed: int,
    threads: int = 1,
) -> dict:
    """Repeat generate-explain-rank over independent seeds and aggregate.

    Deterministic for a given seed regardless of thread count: per-trial
    seeds are pre-spawned and results land in position-indexed arrays.
    """
    estimators = list(estimators)
    seeds = trial_seeds(seed, n_trials)
    first_scores, names = run_single_trial(scenario, estimators, seeds[0])
    k = len(names)
    scores = {e: np.empty((n_trials, k)) for e in estimators}
    for e in estimators:
        scores[e][0] = first_scores[e]

    def work(i):
        row, _ = run_single_trial(scenario, estimators, seeds[i])
        for e in estimators:
            scores[e][i] = row[e]

    if threads > 1 and n_trials > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(1, n_trials)))
    else:
        for i in range(1, n_trials):
            work(i)

    report = {
        "kind": scenario.kind,
        "n_trials": n_trials,
        "seed": seed,
        "threads": threads,
        "concept_names": list(names),
        "estimators": {},
    }
    for e in estimators:
        positions = np.empty((n_trials, k), dtype=np.int64)
        for i in range(n_trials):
            positions[i] = to_ranked(names, scores[e][i]).positions
        denom = math.sqrt(n_trials) if n_trials > 1 else 1.0
        report["estimators"][e] = {
            "scores": scores[e],
            "positions": positions,
            "rank_scores": positions / k,
            "mean_score": scores[e].mean(axis=0),
            "se_score": scores[e].std(axis=0, ddof=1) / denom if n_trials > 1
            else np.zeros(k),
            "mean_rank": (positions / k).mean(axis=0),
            "top1_freq": float((positions[:, 0] == 0).mean()),
        }
    return report
