import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activity_hmm import ActivityProfile, ImpossibleObservation, ModelParams, ModelSpec, forward_backward, log_likelihood
from activity_hmm.experiment import ExperimentConfig, study_truth
from activity_hmm.inference import forward_backward_unscaled
from activity_hmm.simulate import simulate

from conftest import constant_spec, enumerate_posteriors, random_instance


def _hand_instance():
    f = np.array([[0.9, 0.4, 1.0, 0.2], [0.5, 1.0, 0.3, 0.7]])
    g = np.array([[1.0, 0.6, 0.8, 0.9], [0.7, 0.5, 1.0, 1.0]])
    spec = ModelSpec(2, 2, 4, ActivityProfile(f, g))
    params = ModelParams([0.6, 0.4], [[0.0, 0.35], [0.5, 0.0]], [[0.4, 0.1], [0.2, 0.5]])
    return spec, params, np.array([1, 0, 0, 2])


def test_matches_enumeration_hand_instance():
    spec, params, y = _hand_instance()
    post = forward_backward(spec, params, y)
    gamma, xi, ll = enumerate_posteriors(spec, params, y)
    np.testing.assert_allclose(post.gamma, gamma, atol=1e-12)
    np.testing.assert_allclose(post.xi, xi, atol=1e-12)
    assert post.log_likelihood == pytest.approx(ll, abs=1e-12)
    assert log_likelihood(spec, params, y) == pytest.approx(ll, abs=1e-12)


def test_single_state():
    spec = constant_spec(1, 2, 6, g=0.8)
    params = ModelParams([1.0], [[0.0]], [[0.3], [0.5]])
    y = np.array([0, 1, 2, 0, 2, 1])
    post = forward_backward(spec, params, y)
    np.testing.assert_array_equal(post.gamma, np.ones((1, 6)))
    np.testing.assert_allclose(post.xi, np.ones((1, 1, 5)))
    b = {0: 1 - 0.8 * 0.8, 1: 0.8 * 0.3, 2: 0.8 * 0.5}
    assert post.log_likelihood == pytest.approx(sum(np.log(b[s]) for s in y), abs=1e-12)


def test_certain_emissions_loglik_zero():
    spec = constant_spec(1, 1, 10)
    params = ModelParams([1.0], [[0.0]], [[1.0]])
    assert log_likelihood(spec, params, np.ones(10, int)) == 0.0


def test_revealed_states_are_certain():
    spec = ExperimentConfig(weeks=1, case="e").build_spec()
    _, y = simulate(spec, study_truth(), 77)
    post = forward_backward(spec, study_truth(), y)
    nz = np.flatnonzero(y)
    np.testing.assert_allclose(post.gamma[y[nz] - 1, nz], 1.0, atol=1e-12)


def test_halving_generating_epsilon_lowers_likelihood():
    spec = ExperimentConfig(weeks=2, case="b").build_spec()
    truth = study_truth()
    _, y = simulate(spec, truth, 31)
    eps = truth.epsilon.copy()
    eps[0, 0] *= 0.5
    halved = ModelParams(truth.pi, truth.tau, eps)
    assert log_likelihood(spec, halved, y) < log_likelihood(spec, truth, y)


def test_impossible_observation_reports_time():
    g = np.ones((1, 5))
    g[0, 3] = 0.0
    spec = ModelSpec(1, 1, 5, ActivityProfile(np.ones((1, 5)), g))
    params = ModelParams([1.0], [[0.0]], [[0.5]])
    with pytest.raises(ImpossibleObservation) as info:
        forward_backward(spec, params, np.array([0, 1, 0, 1, 0]))
    assert info.value.t == 3


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_posterior_identities(seed):
    rng = np.random.default_rng(seed)
    spec, params, y = random_instance(rng, T=int(rng.integers(2, 30)))
    post = forward_backward(spec, params, y)
    np.testing.assert_allclose(post.gamma.sum(axis=0), 1.0, atol=1e-10)
    np.testing.assert_allclose(post.xi.sum(axis=(0, 1)), 1.0, atol=1e-10)
    np.testing.assert_allclose(post.xi.sum(axis=0), post.gamma[:, :-1], atol=1e-10)
    np.testing.assert_allclose(post.xi.sum(axis=1), post.gamma[:, 1:], atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_scaled_matches_unscaled(seed):
    rng = np.random.default_rng(seed)
    spec, params, y = random_instance(rng, T=int(rng.integers(2, 51)))
    a = forward_backward(spec, params, y)
    b = forward_backward_unscaled(spec, params, y)
    np.testing.assert_allclose(a.gamma, b.gamma, atol=1e-8)
    np.testing.assert_allclose(a.xi, b.xi, atol=1e-8)
    assert a.log_likelihood == pytest.approx(b.log_likelihood, rel=1e-10)


def test_long_sequence_no_underflow():
    spec = ExperimentConfig(weeks=200, case="d").build_spec()
    _, y = simulate(spec, study_truth(), 5)
    post = forward_backward(spec, study_truth(), y)
    assert np.isfinite(post.log_likelihood)
    assert post.log_likelihood < -1e4
    np.testing.assert_allclose(post.gamma.sum(axis=0), 1.0, atol=1e-10)
