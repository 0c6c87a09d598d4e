import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uace.activations import compute_stats, fit_alpha
from uace.bundle import make_bundle
from uace.errors import ValidationError


def unit_rows(arr):
    return arr / np.linalg.norm(arr, axis=1)[:, None]


def bundle_from(repr_, mm, ct, n_labels=2):
    n = repr_.shape[0]
    logits = np.column_stack(
        [np.arange(n, dtype=float), -np.arange(n, dtype=float) + 1]
    )
    return make_bundle(
        repr=repr_,
        logits=logits[:, :n_labels],
        mm_image=mm,
        concept_text=ct,
        concept_names=[f"c{i}" for i in range(ct.shape[0])],
        label_names=["a", "b"][:n_labels],
    )


def embed_targets(targets):
    """mm/ct pair whose image/text cosines equal the given columns exactly.

    Rows are padded to one shared norm so that row normalization inside the
    activation model is a global rescale and cannot tilt the targets.
    """
    targets = np.atleast_2d(targets.T).T
    row_sq = (targets**2).sum(axis=1)
    r = np.sqrt(row_sq.max()) * 1.1 + 1e-9
    fill = np.sqrt(r**2 - row_sq)
    mm = np.concatenate([targets, fill[:, None]], axis=1)
    ct = np.eye(targets.shape[1], targets.shape[1] + 1)
    return mm, ct


def make_inspan_bundle(rng, n=40, d_f=6, k=3):
    """Concept responses lying exactly in the span of unit-row representations."""
    reprs = unit_rows(rng.standard_normal((n, d_f)))
    coef = rng.standard_normal((d_f, k))
    targets = reprs @ coef
    targets *= 0.3 / np.abs(targets).max()
    mm, ct = embed_targets(targets)
    return bundle_from(reprs, mm, ct)


def make_orthogonal_bundle(rng, n=40, d_f=6):
    """One concept whose response is orthogonal to the design's column span."""
    base = np.linalg.qr(rng.standard_normal((n, d_f + 2)))[0]
    rn = unit_rows(base[:, :d_f])
    q, _ = np.linalg.qr(rn)
    t = base[:, d_f]
    t_perp = t - q @ (q.T @ t)
    mm, ct = embed_targets(t_perp[:, None])
    return bundle_from(rn, mm, ct)


def test_in_span_response_has_cos_alpha_one(rng):
    cos_alpha, _ = fit_alpha(make_inspan_bundle(rng))
    assert np.all(np.abs(cos_alpha - 1.0) <= 1e-6)


def test_orthogonal_response_has_cos_alpha_zero(rng):
    cos_alpha, _ = fit_alpha(make_orthogonal_bundle(rng))
    assert abs(cos_alpha[0]) <= 1e-6


def test_degenerate_concept_response_raises(rng):
    reprs = unit_rows(rng.standard_normal((10, 3)))
    mm = np.column_stack([np.ones(10), np.zeros(10), np.ones(10)])
    ct = np.array([[0.0, 1.0, 0.0]])  # response identically zero
    with pytest.raises(ValidationError, match="degenerate for concept 0"):
        fit_alpha(bundle_from(reprs, mm, ct))


def test_gradient_ascent_oracle_agrees(rng):
    """Closed-form fit equals a direct maximizer of the cosine objective."""
    n, d_f = 50, 8
    reprs = rng.standard_normal((n, d_f))
    mm = rng.standard_normal((n, 5))
    ct = rng.standard_normal((3, 5))
    bundle = bundle_from(reprs, mm, ct)
    cos_alpha, _ = fit_alpha(bundle)

    rn = unit_rows(reprs)
    targets = unit_rows(mm) @ ct.T
    for k in range(3):
        t = targets[:, k]

        def cos_obj(v):
            rv = rn @ v
            return float(rv @ t / (np.linalg.norm(rv) * np.linalg.norm(t)))

        v = rng.standard_normal(d_f)
        v /= np.linalg.norm(v)
        step = 0.5
        for _ in range(5000):
            rv = rn @ v
            nrv = np.linalg.norm(rv)
            grad = (rn.T @ t) / (nrv * np.linalg.norm(t)) - (
                cos_obj(v) / nrv**2
            ) * (rn.T @ rv)
            v_new = v + step * grad
            if cos_obj(v_new) >= cos_obj(v):
                v = v_new / np.linalg.norm(v_new)
            else:
                step *= 0.5
        assert abs(cos_obj(v) - cos_alpha[k]) < 1e-4


def test_prop_arithmetic_identity():
    # cos(theta)=0.8 and cos(alpha)=0.6 force m=0.48 and s=0.48
    cos_theta, cos_alpha = 0.8, 0.6
    m = cos_theta * cos_alpha
    s = np.sqrt(1 - cos_theta**2) * np.sqrt(1 - cos_alpha**2)
    assert m == pytest.approx(0.48)
    assert s == pytest.approx(0.48)


def test_stats_identities_and_epsilon(rng):
    reprs = rng.standard_normal((30, 5))
    mm = rng.standard_normal((30, 6))
    ct = rng.standard_normal((4, 6))
    stats = compute_stats(bundle_from(reprs, mm, ct))
    sin_theta = np.sqrt(np.maximum(0, 1 - stats.cos_theta**2))
    sin_alpha = np.sqrt(np.maximum(0, 1 - stats.cos_alpha**2))
    assert np.allclose(stats.m, stats.cos_theta * stats.cos_alpha[None, :])
    assert np.allclose(stats.s, sin_theta * sin_alpha[None, :])
    assert np.all(stats.m**2 + stats.s**2 <= 1 + 1e-6)
    assert np.allclose(stats.epsilon, stats.s.mean(axis=0), atol=1e-6)
    assert np.all(stats.s >= 0)
    assert np.all(stats.m >= -1) and np.all(stats.m <= 1)


def test_perfect_fit_means_zero_noise_column(rng):
    stats = compute_stats(make_inspan_bundle(rng))
    assert np.all(np.abs(stats.cos_alpha - 1.0) <= 1e-6)
    assert np.abs(stats.s).max() <= 2e-3  # sin of a ~sqrt(eps) angle


def test_zero_fit_means_zero_mean_column(rng):
    stats = compute_stats(make_orthogonal_bundle(rng))
    assert np.abs(stats.m[:, 0]).max() <= 1e-6
    sin_theta = np.sqrt(np.maximum(0, 1 - stats.cos_theta[:, 0] ** 2))
    assert np.allclose(stats.s[:, 0], sin_theta, atol=1e-6)


def test_repr_equal_to_mm_gives_perfect_fit(rng):
    mm = rng.standard_normal((30, 7))
    ct = rng.standard_normal((4, 7))
    stats = compute_stats(bundle_from(mm.copy(), mm, ct))
    assert np.all(stats.cos_alpha >= 1 - 1e-9)
    assert np.abs(stats.s).max() <= 1e-3


@given(
    row=st.integers(min_value=0, max_value=29),
    scale=st.floats(min_value=0.05, max_value=20.0),
    which=st.sampled_from(["repr", "mm_image", "concept_text"]),
)
def test_scale_invariance(row, scale, which):
    rng = np.random.default_rng(777)
    reprs = rng.standard_normal((30, 5))
    mm = rng.standard_normal((30, 6))
    ct = rng.standard_normal((3, 6))
    base = compute_stats(bundle_from(reprs, mm, ct))

    arrays = dict(repr=reprs.copy(), mm_image=mm.copy(), concept_text=ct.copy())
    idx = row % arrays[which].shape[0]
    arrays[which][idx] *= scale
    scaled = compute_stats(
        bundle_from(arrays["repr"], arrays["mm_image"], arrays["concept_text"])
    )
    for field in ("m", "s", "cos_alpha", "cos_theta", "epsilon"):
        assert np.allclose(
            getattr(base, field), getattr(scaled, field), atol=1e-6
        ), field


def test_concept_permutation_equivariance(rng):
    reprs = rng.standard_normal((25, 5))
    mm = rng.standard_normal((25, 6))
    ct = rng.standard_normal((4, 6))
    stats = compute_stats(bundle_from(reprs, mm, ct))
    perm = np.array([2, 0, 3, 1])
    stats_p = compute_stats(bundle_from(reprs, mm, ct[perm]))
    assert np.allclose(stats_p.cos_alpha, stats.cos_alpha[perm], atol=1e-9)
    assert np.allclose(stats_p.m, stats.m[:, perm], atol=1e-9)


def test_example_order_invariance(rng):
    reprs = rng.standard_normal((25, 5))
    mm = rng.standard_normal((25, 6))
    ct = rng.standard_normal((4, 6))
    stats = compute_stats(bundle_from(reprs, mm, ct))
    perm = rng.permutation(25)
    stats_p = compute_stats(bundle_from(reprs[perm], mm[perm], ct))
    assert np.allclose(stats_p.cos_alpha, stats.cos_alpha, atol=1e-9)
    assert np.allclose(stats_p.epsilon, stats.epsilon, atol=1e-9)
