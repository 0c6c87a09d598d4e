import numpy as np
import pytest

from uace.activations import ActivationStats, compute_stats
from uace.errors import ValidationError
from uace.estimator import (
    BayesConfig,
    SparsifyConfig,
    explain,
    posterior,
    sparsify,
    tune_hyperparams,
)
from uace.synth import four_color_scenario, gen_four_color


def stats_from_m(m, epsilon, s=None):
    m = np.asarray(m, dtype=np.float64)
    if s is None:
        s = np.zeros_like(m)
    return ActivationStats(
        m=m,
        s=s,
        cos_alpha=np.ones(m.shape[1]),
        cos_theta=m.copy(),
        epsilon=np.asarray(epsilon, dtype=np.float64),
    )


def random_instance(rng, n=12, k=3, eps_range=(0.3, 1.5)):
    m = rng.standard_normal((n, k)) * 0.4
    eps = rng.uniform(*eps_range, size=k)
    y = rng.standard_normal(n)
    return stats_from_m(m, eps), y


def posterior_gd_oracle(m, eps, y, lam, beta, iters=50_000):
    """Exact-line-search gradient descent on the quadratic posterior objective.

    Minimizes beta/2 ||y - m w||^2 + 1/2 w^T diag(eps^2 / lam) w, which is the
    negative log of the Gaussian posterior kernel.  Independent of the
    Cholesky path used by the estimator.
    """
    c = m.T
    a = beta * (c @ c.T) + np.diag(eps**2 / lam)
    b = beta * (c @ y)
    w = np.zeros(c.shape[0])
    for _ in range(iters):
        g = a @ w - b
        gn = float(g @ g)
        if gn < 1e-30:
            break
        w = w - (gn / float(g @ (a @ g))) * g
    return w


def test_posterior_matches_gradient_descent(rng):
    for _ in range(20):
        stats, y = random_instance(rng)
        lam = float(rng.uniform(0.5, 5.0))
        beta = float(rng.uniform(0.5, 5.0))
        mu, sd = posterior(stats, y, BayesConfig(lam=lam, beta=beta))
        w = posterior_gd_oracle(stats.m, stats.epsilon, y, lam, beta)
        assert np.abs(mu - w).max() < 1e-6
        assert np.all(sd > 0)


def test_posterior_variance_matches_direct_inverse(rng):
    for _ in range(10):
        stats, y = random_instance(rng, n=25, k=6)
        lam = float(rng.uniform(0.5, 5.0))
        beta = float(rng.uniform(0.5, 5.0))
        _, sd = posterior(stats, y, BayesConfig(lam=lam, beta=beta))
        c = stats.m.T
        a = beta * (c @ c.T) + np.diag(stats.epsilon**2 / lam)
        direct = np.diag(np.linalg.inv(a))
        assert np.abs(sd - direct).max() <= 1e-10 * max(1.0, direct.max())


def test_posterior_identity(rng):
    stats, y = random_instance(rng, n=30, k=6)
    cfg = BayesConfig(lam=2.0, beta=3.0)
    mu, _ = posterior(stats, y, cfg)
    c = stats.m.T
    a = cfg.beta * (c @ c.T) + np.diag(stats.epsilon**2 / cfg.lam)
    lhs = a @ mu
    rhs = cfg.beta * (c @ y)
    assert np.abs(lhs - rhs).max() <= 1e-8 * max(1.0, np.abs(rhs).max())


def test_vanishing_prior_recovers_least_squares(rng):
    m = rng.standard_normal((40, 4))
    w_true = rng.standard_normal(4)
    y = m @ w_true
    stats = stats_from_m(m, np.zeros(4))
    mu, _ = posterior(stats, y, BayesConfig(lam=1.0, beta=1e4))
    assert np.abs(mu - w_true).max() < 1e-4


def test_huge_noise_shrinks_concept_to_zero(rng):
    m = rng.standard_normal((40, 3))
    y = m @ np.array([1.0, -2.0, 0.5])
    eps = np.array([1.0, 1.0, 1e6])
    stats = stats_from_m(m, eps)
    mu, sd = posterior(stats, y, BayesConfig(lam=1.0, beta=1.0))
    assert abs(mu[2]) < 1e-6
    assert abs(mu[2] / np.sqrt(sd[2])) < 1e-3


def test_noise_monotonicity(rng):
    """Raising one concept's average noise never raises |mu| for it."""
    for _ in range(5):
        stats, y = random_instance(rng, n=20, k=4)
        k = int(rng.integers(0, 4))
        last = np.inf
        for eps_k in np.linspace(0.1, 5.0, 12):
            eps = stats.epsilon.copy()
            eps[k] = eps_k
            mu, _ = posterior(stats_from_m(stats.m, eps, stats.s), y,
                              BayesConfig(lam=1.0, beta=1.0))
            assert abs(mu[k]) <= last + 1e-12
            last = abs(mu[k])


def test_ridge_oracle_equivalence(rng):
    """The posterior mean is the weighted ridge solution, restated."""
    stats, y = random_instance(rng, n=25, k=5)
    lam, beta = 1.7, 2.3
    mu, _ = posterior(stats, y, BayesConfig(lam=lam, beta=beta))
    c = stats.m.T
    ridge = np.linalg.solve(
        c @ c.T + np.diag(stats.epsilon**2) / (lam * beta), c @ y
    )
    assert np.abs(mu - ridge).max() <= 1e-8 * max(1.0, np.abs(ridge).max())


def test_nonfinite_inputs_rejected(rng):
    stats, y = random_instance(rng)
    y[0] = np.nan
    with pytest.raises(ValidationError):
        posterior(stats, y, BayesConfig())


def test_config_validation():
    with pytest.raises(ValidationError):
        BayesConfig(lam=0.0)
    with pytest.raises(ValidationError):
        BayesConfig(beta=-1.0)
    with pytest.raises(ValidationError):
        SparsifyConfig(kappa=1.0)


# ---------------------------------------------------------------------------
# tuning
# ---------------------------------------------------------------------------

def test_tune_deterministic_bit_identical(rng):
    stats, y = random_instance(rng, n=16, k=3)
    stats.s[:] = 0.2
    cfg = BayesConfig(tune=True, tune_steps=25, tune_noise_samples=4, seed=99)
    assert tune_hyperparams(stats, y, cfg) == tune_hyperparams(stats, y, cfg)


def test_tune_zero_noise_drives_beta_to_upper_bound(rng):
    """With no activation noise and a perfectly fittable target the
    objective grows with beta, so beta climbs to the documented clamp while
    lambda has no gradient and stays at its initialization."""
    m = rng.standard_normal((20, 6))
    w_true = rng.standard_normal(6)
    y = m @ w_true
    stats = stats_from_m(m, np.zeros(6))  # s is zero as well
    cfg = BayesConfig(
        lam=3.7, beta=1.0, tune=True, tune_steps=400, tune_lr=0.05,
        tune_noise_samples=2, seed=1,
    )
    lam, beta = tune_hyperparams(stats, y, cfg)
    assert beta == pytest.approx(1e6, rel=1e-6)
    assert lam == pytest.approx(3.7, rel=1e-9)


# ---------------------------------------------------------------------------
# sparsify
# ---------------------------------------------------------------------------

def make_simple_bundle_and_stats(rng, n=60):
    """Label argmax depends on concept 0 only; concepts 1, 2 are noise."""
    m = np.column_stack(
        [
            np.where(np.arange(n) % 2 == 0, 0.8, -0.8),
            0.05 * rng.standard_normal(n),
            0.05 * rng.standard_normal(n),
        ]
    )
    logits = np.column_stack([m[:, 0], -m[:, 0]])
    from uace.bundle import make_bundle

    mm = np.concatenate([m, np.sqrt(1.0 - (m**2).sum(1, keepdims=True))], axis=1)
    bundle = make_bundle(
        repr=np.eye(n)[:, :4] + 0.01,
        logits=logits,
        mm_image=mm,
        concept_text=np.eye(3, 4),
        concept_names=["main", "junk_a", "junk_b"],
        label_names=["even", "odd"],
    )
    stats = stats_from_m(m, np.full(3, 0.1))
    return bundle, stats


def test_sparsify_kappa_zero_keeps_weights_when_fragile(rng):
    bundle, stats = make_simple_bundle_and_stats(rng)
    # every weight matters for at least one prediction: make mu follow m
    mu = np.array([[1.0, 0.3, -0.2], [-1.0, -0.3, 0.2]])
    w = sparsify(mu, stats, bundle, kappa=0.0)
    base_pred = bundle.logits.argmax(axis=1)
    acc = lambda W: float(((stats.m @ W.T).argmax(axis=1) == base_pred).mean())
    assert acc(w) >= acc(mu)
    # all zeroed entries are below the realized threshold
    thresh = np.abs(mu)[w == 0].max() if (w == 0).any() else 0.0
    assert np.all((w != 0) | (np.abs(mu) <= thresh + 1e-15))


def test_sparsify_single_useful_concept(rng):
    bundle, stats = make_simple_bundle_and_stats(rng)
    mu = np.array([[1.0, 0.02, -0.015], [-1.0, -0.02, 0.015]])
    w = sparsify(mu, stats, bundle, kappa=0.02)
    # exhaustive sweep oracle: the largest feasible threshold kills the junk
    assert np.count_nonzero(w) == 2
    assert w[0, 0] == mu[0, 0] and w[1, 0] == mu[1, 0]


def test_sparsify_sweep_matches_bruteforce(rng):
    bundle, stats = make_simple_bundle_and_stats(rng)
    mu = rng.standard_normal((2, 3))
    kappa = 0.1
    w = sparsify(mu, stats, bundle, kappa)
    base_pred = bundle.logits.argmax(axis=1)

    def acc(W):
        return float(((stats.m @ W.T).argmax(axis=1) == base_pred).mean())

    base_acc = acc(mu)
    best_t = 0.0
    for t in sorted(set(np.abs(mu).ravel())) + [np.inf]:
        cand = np.where(np.abs(mu) < t, 0.0, mu)
        if acc(cand) >= base_acc - kappa:
            best_t = t
    assert np.array_equal(w, np.where(np.abs(mu) < best_t, 0.0, mu))


def test_sparsify_huge_kappa_zeroes_everything(rng):
    bundle, stats = make_simple_bundle_and_stats(rng)
    mu = np.array([[1.0, 0.3, -0.2], [-1.0, -0.3, 0.2]])
    w = sparsify(mu, stats, bundle, kappa=0.99)
    assert np.all(w == 0.0)


def test_sparsify_never_drops_accuracy_beyond_kappa(rng):
    bundle, stats = make_simple_bundle_and_stats(rng)
    base_pred = bundle.logits.argmax(axis=1)
    for kappa in (0.0, 0.05, 0.2, 0.5):
        mu = rng.standard_normal((2, 3))
        w = sparsify(mu, stats, bundle, kappa)
        acc = lambda W: float(((stats.m @ W.T).argmax(axis=1) == base_pred).mean())
        assert acc(w) >= acc(mu) - kappa - 1e-12


# ---------------------------------------------------------------------------
# explain
# ---------------------------------------------------------------------------

def test_explain_antisymmetric_logits(rng):
    bundle, _ = gen_four_color(four_color_scenario(seed=21, n=120))
    expl = explain(bundle, BayesConfig(lam=0.5, beta=1.0), SparsifyConfig(0.0))
    # logits column 2 is the negative of column 1
    assert np.abs(expl.mu[0] + expl.mu[1]).max() < 1e-6
    assert expl.importance.shape == (2, 4)
    assert np.isfinite(expl.importance).all()
    assert np.all(expl.sigma_diag > 0)


def test_explain_runs_stats_once_and_reports_config(rng):
    bundle, _ = gen_four_color(four_color_scenario(seed=22, n=100))
    stats = compute_stats(bundle)
    expl = explain(bundle, BayesConfig(lam=2.0, beta=3.0), SparsifyConfig(0.0),
                   stats=stats)
    assert expl.lambda_used == 2.0
    assert expl.beta_used == 3.0
    assert expl.config.lam == 2.0
