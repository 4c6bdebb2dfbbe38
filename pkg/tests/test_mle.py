import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btl_uq.core import ComparisonDataset, DisconnectedGraphError, DomainError, center, psi
from btl_uq.mle import MleOptions, fit_mle, gradient, hessian, neg_log_likelihood
from btl_uq.sim import noiseless_dataset

from conftest import connected_datasets, random_connected_edges, random_dataset
from oracles import grid_mle_n3, nll_mpmath


def one_edge(ybar):
    return ComparisonDataset(n=2, i=[0], j=[1], ybar=[ybar], count=[1])


def complete(n, ybar=0.5):
    i, j = np.triu_indices(n, 1)
    return ComparisonDataset(n=n, i=i, j=j, ybar=np.full(i.size, ybar), count=np.ones(i.size))


def test_nll_single_edge_examples():
    # Half of log 2 from each side of a balanced edge.
    assert neg_log_likelihood(np.zeros(2), one_edge(0.5)) == pytest.approx(math.log(2), abs=1e-15)
    assert neg_log_likelihood(np.zeros(2), one_edge(1.0)) == pytest.approx(math.log(2), abs=1e-15)


def test_nll_zero_times_log_zero_is_zero():
    # ybar = 1 with theta_1 - theta_2 = -800 keeps the surviving term finite.
    val = neg_log_likelihood(np.array([-400.0, 400.0]), one_edge(0.0))
    assert val == pytest.approx(0.0, abs=1e-300)


@given(connected_datasets(max_n=8), st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_nll_matches_extended_precision(data, seed):
    theta = np.random.default_rng(seed).normal(size=data.n)
    got = neg_log_likelihood(theta, data)
    ref = float(nll_mpmath(theta, data))
    assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref))


def test_gradient_zero_at_noiseless_truth(rng):
    theta = rng.uniform(0, 2, 7)
    i, j = np.triu_indices(7, 1)
    data = noiseless_dataset((i, j), theta)
    assert np.max(np.abs(gradient(theta, data))) < 1e-14


@given(connected_datasets(max_n=10), st.integers(0, 2**32 - 1))
def test_gradient_matches_finite_differences(data, seed):
    theta = np.random.default_rng(seed).normal(size=data.n)
    g = gradient(theta, data)
    h = 1e-6
    fd = np.empty(data.n)
    for k in range(data.n):
        e = np.zeros(data.n)
        e[k] = h
        fd[k] = (neg_log_likelihood(theta + e, data) - neg_log_likelihood(theta - e, data)) / (2 * h)
    assert np.max(np.abs(g - fd)) < 1e-6
    assert abs(g.sum()) < 1e-10


@given(connected_datasets(max_n=10), st.integers(0, 2**32 - 1))
def test_hessian_laplacian_structure(data, seed):
    theta = np.random.default_rng(seed).normal(size=data.n)
    H = hessian(theta, data)
    assert np.allclose(H, H.T, atol=0)
    assert np.max(np.abs(H.sum(axis=1))) < 1e-12
    h = 1e-6
    fd = np.empty_like(H)
    for k in range(data.n):
        e = np.zeros(data.n)
        e[k] = h
        fd[:, k] = (gradient(theta + e, data) - gradient(theta - e, data)) / (2 * h)
    assert np.max(np.abs(H - fd)) < 1e-5


def test_hessian_complete_graph_at_zero():
    H = hessian(np.zeros(3), complete(3))
    assert np.allclose(np.diag(H), 0.5)
    assert np.allclose(H[~np.eye(3, dtype=bool)], -0.25)


@pytest.mark.parametrize("n", [3, 8, 20])
def test_hessian_positive_on_centered_subspace(rng, n):
    data = random_dataset(rng, n, extra_prob=0.2)
    H = hessian(rng.normal(size=n), data)
    # Eigenvalues restricted to the orthogonal complement of the ones vector.
    Q = np.linalg.qr(np.column_stack([np.ones(n), rng.normal(size=(n, n - 1))]))[0][:, 1:]
    assert np.linalg.eigvalsh(Q.T @ H @ Q).min() > 0


def test_fit_symmetric_pair():
    rep = fit_mle(one_edge(0.5))
    assert rep.converged
    assert np.allclose(rep.theta_hat, [0, 0], atol=1e-12)


def test_fit_pair_closed_form():
    # theta_1 - theta_2 = logit(ybar) = 1, centered.
    rep = fit_mle(one_edge(math.e / (1 + math.e)))
    assert rep.converged and rep.final_grad_norm <= 1e-10
    assert np.allclose(rep.theta_hat, [0.5, -0.5], atol=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_fit_matches_grid_search_n3(seed):
    rng = np.random.default_rng(seed)
    data = random_dataset(rng, 3, extra_prob=0.5)
    rep = fit_mle(data)
    assert np.max(np.abs(rep.theta_hat - grid_mle_n3(data))) < 1e-5


def test_fit_refuses_disconnected():
    data = ComparisonDataset(n=4, i=[0, 2], j=[1, 3], ybar=[0.5, 0.5], count=[1, 1])
    with pytest.raises(DisconnectedGraphError):
        fit_mle(data)


def test_fit_reports_divergence_without_raising():
    rep = fit_mle(one_edge(1.0))
    assert not rep.converged
    assert rep.final_grad_norm > 0
    assert "diverg" in rep.message


def test_fit_max_iters():
    data = random_dataset(np.random.default_rng(1), 10)
    rep = fit_mle(data, MleOptions(max_iters=1, grad_tol=1e-15))
    assert rep.iterations == 1 and not rep.converged


def test_options_validation():
    with pytest.raises(DomainError):
        MleOptions(grad_tol=0)
    with pytest.raises(DomainError):
        MleOptions(max_iters=0)


@given(connected_datasets(min_n=3, max_n=12))
def test_fit_invariants(data):
    rep = fit_mle(data)
    assert rep.converged
    assert np.max(np.abs(gradient(rep.theta_hat, data))) <= 1e-10
    assert abs(rep.theta_hat.sum()) < 1e-9
    hist = np.array(rep.history)
    steps = np.diff(hist)
    # Decrease is strict until the objective is resolved to rounding level.
    assert np.all((steps < 0) | (np.abs(steps) <= 64 * np.finfo(float).eps * abs(hist[0])))


@given(connected_datasets(min_n=3, max_n=12), st.randoms())
def test_fit_permutation_equivariant(data, rnd):
    perm = list(range(data.n))
    rnd.shuffle(perm)
    perm = np.array(perm)
    a = fit_mle(data).theta_hat
    b = fit_mle(data.permuted(perm)).theta_hat
    assert np.allclose(b[perm], a, atol=1e-9)


@pytest.mark.parametrize("n", [5, 30, 100])
def test_fit_noiseless_recovery(rng, n):
    theta = rng.uniform(0, 2, n)
    data = noiseless_dataset(random_connected_edges(rng, n, extra_prob=0.1), theta)
    rep = fit_mle(data)
    assert np.max(np.abs(rep.theta_hat - center(theta))) < 1e-8


def test_fit_arbitrary_initial_point():
    data = random_dataset(np.random.default_rng(4), 12)
    a = fit_mle(data).theta_hat
    b = fit_mle(data, MleOptions(initial=np.linspace(-3, 3, 12))).theta_hat
    assert np.allclose(a, b, atol=1e-9)


def test_fit_large_gaps_stay_finite():
    # Strongly separated but non-degenerate data still converges.
    theta = np.array([0.0, 6.0, 12.0])
    i, j = np.triu_indices(3, 1)
    data = ComparisonDataset(n=3, i=i, j=j, ybar=psi(theta[i] - theta[j]), count=np.ones(3))
    rep = fit_mle(data)
    assert rep.converged
    assert np.allclose(rep.theta_hat, center(theta), atol=1e-7)
