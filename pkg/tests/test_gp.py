"""GP posterior tests: hand-evaluated small cases, finite-difference
consistency of gradient posteriors, sampling statistics and immutability.
"""

import math
import threading

import numpy as np
import pytest

from stablebo.mathcore import DomainError
from stablebo.kernels import KernelSpec, kernel_eval
from stablebo.gp import (
    Dataset,
    GradientGP,
    Posterior,
    fit,
    grad_mean_var_1d,
    grad_posterior,
    predict,
    predict_batch,
    sample_grad,
)

RBF1 = KernelSpec("rbf", 1.0)
M52 = KernelSpec("matern52", 1.0)


def _fit(points, targets, noise_var=0.0, kernel=RBF1):
    return fit(Dataset(points=np.atleast_2d(points).T if np.ndim(points) == 1 else points,
                       targets=targets, noise_var=noise_var), kernel)


def test_fit_single_point_interpolates():
    post = _fit([0.0], [1.0])
    np.testing.assert_allclose(post.weights, [1.0], atol=1e-8)
    for x in (-1.0, 0.0, 0.7, 2.0):
        mean, _ = predict(post, [x])
        assert mean == pytest.approx(math.exp(-0.5 * x * x), abs=1e-8)


def test_fit_noise_shrinks_mean():
    post = _fit([0.0], [2.0], noise_var=1.0)
    mean, _ = predict(post, [0.0])
    assert mean == pytest.approx(1.0, abs=1e-8)


def test_fit_duplicate_points_resolved_by_jitter():
    post = _fit([0.3, 0.3], [1.0, 1.0])
    mean, _ = predict(post, [0.3])
    assert mean == pytest.approx(1.0, abs=1e-4)


def test_fit_rejects_rational_quadratic():
    with pytest.raises(DomainError):
        _fit([0.0], [1.0], kernel=KernelSpec("rationalquadratic", 1.0))


def test_predict_far_field_recovers_prior():
    post = _fit([0.0], [1.0])
    mean, var = predict(post, [50.0])
    assert abs(mean) < 1e-12
    assert var == pytest.approx(1.0, abs=1e-12)


def test_predict_training_point_noiseless():
    rng = np.random.default_rng(0)
    xs = np.array([0.05, 0.3, 0.55, 0.75, 0.95])
    ys = rng.uniform(-1, 1, size=5)
    post = _fit(xs, ys, kernel=KernelSpec("rbf", 0.15))
    for x, y in zip(xs, ys):
        mean, var = predict(post, [x])
        assert mean == pytest.approx(y, abs=1e-6)
        assert var <= 1e-6


def test_predict_hand_evaluated_case():
    post = _fit([0.0], [1.0])
    mean, var = predict(post, [1.0])
    assert mean == pytest.approx(math.exp(-0.5), abs=1e-10)
    assert var == pytest.approx(1.0 - math.exp(-1.0), abs=1e-10)


def test_predict_variance_non_increasing_with_data():
    x_query = np.array([[0.4]])
    points = [0.0, 0.2, 0.9, 0.5, 0.7]
    prev = None
    for k in range(1, len(points) + 1):
        post = _fit(points[:k], [1.0] * k, noise_var=0.1)
        _, var = predict_batch(post, x_query)
        if prev is not None:
            assert var[0] <= prev + 1e-12
        prev = var[0]


def test_prior_posterior_predictions():
    post = Posterior.prior(RBF1, 1)
    mean, var = predict(post, [0.3])
    assert mean == 0.0
    assert var == pytest.approx(1.0)


def test_grad_posterior_prior_variance():
    post = Posterior.prior(RBF1, 1)
    gp1 = grad_posterior(post, [0.2], 1)
    assert gp1.mean[0] == 0.0
    assert gp1.cov[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_grad_posterior_symmetric_datum():
    post = _fit([0.0], [1.0])
    gp1 = grad_posterior(post, [0.0], 1)
    assert gp1.mean[0] == pytest.approx(0.0, abs=1e-12)


def test_grad_posterior_mean_matches_prediction_slope():
    post = _fit([0.0], [1.0])
    gp1 = grad_posterior(post, [1.0], 1)
    assert gp1.mean[0] == pytest.approx(-math.exp(-0.5), abs=1e-9)
    h = 1e-5
    fd = (predict(post, [1.0 + h])[0] - predict(post, [1.0 - h])[0]) / (2 * h)
    assert gp1.mean[0] == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("kernel", [RBF1, M52])
def test_grad_mean_finite_difference_2d(kernel):
    rng = np.random.default_rng(21)
    pts = rng.uniform(0, 1, size=(8, 2))
    ys = np.sin(3 * pts[:, 0]) + pts[:, 1] ** 2
    post = fit(Dataset(points=pts, targets=ys, noise_var=1e-6), kernel)
    h = 1e-4
    for _ in range(10):
        x = rng.uniform(0.1, 0.9, size=2)
        g = grad_posterior(post, x, 1).mean
        for d in range(2):
            xp = x.copy()
            xp[d] += h
            xm = x.copy()
            xm[d] -= h
            fd = (predict(post, xp)[0] - predict(post, xm)[0]) / (2 * h)
            assert g[d] == pytest.approx(fd, rel=1e-3, abs=1e-8)


def test_grad_cov_matches_mixed_finite_difference():
    rng = np.random.default_rng(4)
    xs = rng.uniform(0, 1, size=6)
    ys = np.cos(2 * xs)
    post = _fit(xs, ys, noise_var=1e-4)

    def lam(a, b):
        ka = np.array([kernel_eval(RBF1, [a], [p]) for p in xs])
        kb = np.array([kernel_eval(RBF1, [b], [p]) for p in xs])
        from scipy.linalg import cho_solve

        return kernel_eval(RBF1, [a], [b]) - ka @ cho_solve((post.chol, True), kb)

    h = 1e-3
    for x in (0.2, 0.5, 0.8):
        mixed = (lam(x + h, x + h) - lam(x + h, x - h) - lam(x - h, x + h) + lam(x - h, x - h)) / (
            4 * h * h
        )
        got = grad_posterior(post, [x], 1).cov[0, 0]
        assert got == pytest.approx(mixed, rel=1e-2, abs=1e-8)


def test_grad_posterior_matern52_second_order_is_psd():
    rng = np.random.default_rng(9)
    xs = rng.uniform(0, 1, size=6)
    post = _fit(xs, np.sin(xs), noise_var=1e-6, kernel=M52)
    gp2 = grad_posterior(post, [0.5], 2)
    vals = np.linalg.eigvalsh(gp2.cov)
    assert np.all(vals >= 0.0)


def test_grad_mean_var_1d_matches_pointwise():
    rng = np.random.default_rng(2)
    xs = rng.uniform(0, 1, size=7)
    post = _fit(xs, np.sin(5 * xs), noise_var=1e-6)
    grid = np.linspace(0, 1, 9)[:, None]
    for q in (1, 2, 3):
        means, variances = grad_mean_var_1d(post, grid, q)
        for i, x in enumerate(grid):
            gp_q = grad_posterior(post, x, q)
            assert means[i] == pytest.approx(gp_q.mean[0], rel=1e-10, abs=1e-10)
            assert variances[i] == pytest.approx(gp_q.cov[0, 0], rel=1e-8, abs=1e-8)


def test_sample_grad_degenerate_cov():
    from stablebo.gp import GradPosterior

    gp_q = GradPosterior(order=1, dim=2, mean=np.array([1.0, -2.0]), cov=np.zeros((2, 2)))
    samples = sample_grad(gp_q, 16, np.random.default_rng(0))
    np.testing.assert_array_equal(samples, np.tile([1.0, -2.0], (16, 1)))


def test_sample_grad_standard_normal_statistics():
    from stablebo.gp import GradPosterior

    gp_q = GradPosterior(order=1, dim=1, mean=np.zeros(1), cov=np.eye(1))
    samples = sample_grad(gp_q, 100_000, np.random.default_rng(123))[:, 0]
    assert abs(samples.mean()) < 0.01
    assert abs(samples.var() - 1.0) < 0.05


def test_sample_grad_deterministic_per_seed():
    post = _fit([0.1, 0.9], [1.0, 0.5])
    gp1 = grad_posterior(post, [0.4], 1)
    a = sample_grad(gp1, 32, np.random.default_rng(7))
    b = sample_grad(gp1, 32, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


def test_concurrent_predictions_identical():
    rng = np.random.default_rng(5)
    xs = rng.uniform(0, 1, size=10)
    post = _fit(xs, np.sin(xs), noise_var=1e-4)
    grid = np.linspace(0, 1, 101)[:, None]
    baseline = predict_batch(post, grid)
    results = [None] * 4

    def work(k):
        results[k] = predict_batch(post, grid)

    threads = [threading.Thread(target=work, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for got in results:
        np.testing.assert_array_equal(got[0], baseline[0])
        np.testing.assert_array_equal(got[1], baseline[1])


def test_dataset_json_round_trip():
    ds = Dataset(points=np.array([[0.1], [0.9]]), targets=np.array([1.0, 2.0]), noise_var=0.01)
    again = Dataset.from_json(ds.to_json())
    np.testing.assert_array_equal(again.points, ds.points)
    np.testing.assert_array_equal(again.targets, ds.targets)
    assert again.noise_var == ds.noise_var


def test_estimator_interface():
    model = GradientGP(kernel_family="rbf", kernel_param=0.2, noise_var=1e-8)
    params = model.get_params()
    assert params["kernel_family"] == "rbf"
    X = np.linspace(0, 1, 12)[:, None]
    y = np.sin(4 * X[:, 0])
    model.fit(X, y)
    preds, variances = model.predict(X, return_var=True)
    np.testing.assert_allclose(preds, y, atol=1e-4)
    assert np.all(variances >= 0.0)
    g = model.grad_posterior([0.5], 1)
    assert g.mean.shape == (1,)

    from sklearn.base import clone

    clone(model)  # sklearn-compatible constructor contract
