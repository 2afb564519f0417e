import numpy as np
import pytest
from scipy import stats

from activity_hmm import ModelParams, simulate
from activity_hmm.experiment import ExperimentConfig, study_truth
from activity_hmm.model import transition_matrix
from activity_hmm.simulate import read_sequence, write_sequence

from conftest import constant_spec


def test_single_state_path():
    spec = constant_spec(1, 2, 50)
    x, y = simulate(spec, ModelParams([1.0], [[0.0]], [[0.2], [0.3]]), 5)
    assert np.all(x == 0)
    assert len(y) == 50 and y.min() >= 0 and y.max() <= 2


def test_no_activity_no_moves(study_tau):
    spec = constant_spec(3, 3, 200, f=0.0)
    x, _ = simulate(spec, ModelParams([0.2, 0.5, 0.3], study_tau, np.eye(3) * 0.5), 11)
    assert np.all(x == x[0])


def test_reproducible():
    spec = ExperimentConfig(weeks=1, case="e").build_spec()
    a = simulate(spec, study_truth(), 123)
    b = simulate(spec, study_truth(), 123)
    c = simulate(spec, study_truth(), 124)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert not np.array_equal(a[0], c[0])


def test_diagonal_emissions_reveal_state():
    spec = ExperimentConfig(weeks=1, case="a").build_spec()
    x, y = simulate(spec, study_truth(), 9)
    nz = y != 0
    np.testing.assert_array_equal(y[nz] - 1, x[nz])


@pytest.fixture(scope="module")
def long_run():
    spec = ExperimentConfig(weeks=200, case="c").build_spec()
    x, y = simulate(spec, study_truth(), 2024)
    return spec, x, y


def test_exit_split_from_state_two(long_run, study_tau):
    _, x, _ = long_run
    src, dst = x[:-1], x[1:]
    leaving = (src == 1) & (dst != 1)
    n = leaving.sum()
    k = (leaving & (dst == 0)).sum()
    p = study_tau[0, 1] / (study_tau[0, 1] + study_tau[2, 1])
    assert p == pytest.approx(0.621, abs=1e-3)
    se = np.sqrt(p * (1 - p) / n)
    assert abs(k / n - p) <= 3 * se


def test_transition_frequencies_chi_square(long_run):
    spec, x, _ = long_run
    A = transition_matrix(spec, study_truth(), 0)
    src, dst = x[:-1], x[1:]
    for j in range(3):
        observed = np.bincount(dst[src == j], minlength=3)
        expected = A[:, j] * observed.sum()
        _, pval = stats.chisquare(observed, expected)
        assert pval > 0.001


def test_emission_frequencies_chi_square(long_run):
    _, x, y = long_run
    eps = [0.770347, 0.579213, 0.0821789]
    for j in range(3):
        emitted = y[x == j]
        observed = np.array([(emitted == 0).sum(), (emitted == j + 1).sum()])
        expected = np.array([1 - eps[j], eps[j]]) * emitted.size
        assert stats.chisquare(observed, expected)[1] > 0.001
        assert np.all((emitted == 0) | (emitted == j + 1))


def test_sequence_file_roundtrip(tmp_path):
    seq = np.array([0, 3, 0, 1, 2])
    write_sequence(tmp_path / "y.txt", seq)
    assert (tmp_path / "y.txt").read_text() == "0\n3\n0\n1\n2\n"
    np.testing.assert_array_equal(read_sequence(tmp_path / "y.txt", 3), seq)
    with pytest.raises(ValueError):
        read_sequence(tmp_path / "y.txt", 2)
