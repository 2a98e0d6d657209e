import itertools

import numpy as np
import pytest

from metaset.dpp import (NotPSDError, diversity_score, dpp_likelihood, exhaustive_map,
                         greedy_select, joint_kernel, normalization_by_enumeration,
                         random_baseline, sweep)


def random_psd(n, rank=None, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, rank or n))
    return x @ x.T / (rank or n)


def test_normalization_identity():
    L = random_psd(6, seed=1)
    assert normalization_by_enumeration(L) == pytest.approx(np.linalg.det(L + np.eye(6)), rel=1e-10)


def test_likelihood_sums_to_one():
    L = random_psd(5, seed=2)
    total = sum(dpp_likelihood(L, c) for r in range(6) for c in itertools.combinations(range(5), r))
    assert total == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(ValueError):
        dpp_likelihood(np.eye(21), [0])


def test_diversity_score_values():
    assert diversity_score(np.eye(4), [0, 2], jitter=0) == 0.0
    assert diversity_score(np.diag([2.0, 3.0]), [0, 1], jitter=0) == pytest.approx(np.log(6))
    assert diversity_score(np.ones((2, 2)), [0, 1], jitter=0) == float("-inf")


def test_greedy_on_diagonal_kernel():
    L = np.diag([1.0, 5.0, 3.0, 4.0])
    res = greedy_select(L, 3)
    assert res.indices == [1, 3, 2]
    assert res.gains == sorted(res.gains, reverse=True)


def test_greedy_ties_lowest_index():
    assert greedy_select(np.eye(5), 2).indices == [0, 1]


def test_greedy_score_matches_logdet():
    L = random_psd(12, seed=3)
    res = greedy_select(L, 5)
    assert res.score == pytest.approx(sum(res.gains), abs=1e-8)


def test_greedy_avoids_duplicates():
    L = random_psd(6, seed=4)
    L = np.block([[L, L], [L, L]])  # items i and i+6 are identical
    idx = greedy_select(L + 1e-12 * np.eye(12), 6).indices
    assert len({i % 6 for i in idx}) == 6


def test_greedy_rank_deficient_floors_gain():
    L = random_psd(6, rank=2, seed=5)
    res = greedy_select(L, 4)
    assert len(set(res.indices)) == 4
    # the third pick has only jitter-sized residual variance left
    assert res.gains[2] < np.log(1e-8) and res.gains[-1] < np.log(1e-8)


def test_greedy_input_errors():
    with pytest.raises(ValueError):
        greedy_select(np.eye(3), 4)
    with pytest.raises(ValueError):
        greedy_select(np.ones((2, 3)), 1)
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotPSDError):
        greedy_select(bad, 2)


def test_joint_kernel():
    LP, LS = random_psd(5, seed=6), random_psd(5, seed=7)
    assert np.array_equal(joint_kernel(LP, LS, 0.0), LP)
    assert np.array_equal(joint_kernel(LP, LS, 1.0), LS)
    assert np.allclose(joint_kernel(LP, LS, 0.25), 0.75 * LP + 0.25 * LS)
    with pytest.raises(ValueError):
        joint_kernel(LP, LS, 1.5)
    with pytest.raises(NotPSDError):
        joint_kernel(LP, -np.eye(5), 0.5)


def test_exhaustive_map_small():
    L = random_psd(7, seed=8)
    best, score = exhaustive_map(L, 3)
    assert greedy_select(L, 3).score <= score + 1e-12


def test_sweep_scores():
    LP, LS = random_psd(8, seed=9), random_psd(8, seed=10)
    res = sweep(LP, LS, [0.0, 1.0], 3)
    assert res[0].indices == greedy_select(LP, 3).indices
    assert res[1].score_shape == pytest.approx(greedy_select(LS, 3).score)


def test_random_baseline_reproducible():
    L = random_psd(10, seed=11)
    a = random_baseline(L, 4, 50, seed=3)
    b = random_baseline(L, 4, 50, seed=3)
    assert np.array_equal(a.scores, b.scores)
    assert a.rank_of(np.inf) == 1.0 and a.rank_of(-np.inf) == 0.0
