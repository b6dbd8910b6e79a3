import numpy as np
import pytest

from core.exceptions import TooSmallSystemError
from solver.services import arrowhead
from solver.services.fast_poisson import TridiagonalSystem, thomas_solve


def _second_difference(n):
    return TridiagonalSystem(lower=np.full(n, -1.0), diag=np.full(n, 2.0), upper=np.full(n, -1.0))


def _dominant_system(rng, n, batch=()):
    lower = rng.uniform(-1.0, 1.0, (n,) + batch)
    upper = rng.uniform(-1.0, 1.0, (n,) + batch)
    diag = np.abs(lower) + np.abs(upper) + rng.uniform(0.5, 1.5, (n,) + batch)
    return TridiagonalSystem(lower=lower, diag=diag, upper=upper)


def test_two_blocks_of_five():
    partition, _ = arrowhead.decompose(_second_difference(5), 2)
    assert partition.blocks == ((0, 2), (3, 5))
    assert partition.separators == (2,)
    np.testing.assert_array_equal(partition.permutation(), [0, 1, 3, 4, 2])


def test_balanced_block_sizes():
    partition = arrowhead.partition_map(1000, 8)
    sizes = partition.block_sizes()
    assert max(sizes) - min(sizes) <= 1
    assert sum(sizes) + len(partition.separators) == 1000


def test_single_block_is_the_whole_system():
    partition = arrowhead.partition_map(5, 1)
    assert partition.blocks == ((0, 5),)
    assert partition.separators == ()


def test_reordered_blocks_reassemble_the_matrix(rng):
    system = _dominant_system(rng, 11)
    partition, decomposed = arrowhead.decompose(system, 3)
    S, WR, WL, H = decomposed.reordered_blocks()
    permuted = np.block([[S, WR], [WL, H]])
    order = partition.permutation()
    restored = np.empty_like(permuted)
    restored[np.ix_(order, order)] = permuted
    np.testing.assert_array_equal(restored, system.to_dense())


def test_interior_block_is_block_diagonal(rng):
    system = _dominant_system(rng, 11)
    partition, decomposed = arrowhead.decompose(system, 3)
    S, _, _, _ = decomposed.reordered_blocks()
    sizes = np.cumsum([0] + partition.block_sizes())
    for k in range(partition.count):
        for other in range(partition.count):
            if other != k:
                assert not S[sizes[k] : sizes[k + 1], sizes[other] : sizes[other + 1]].any()


def _dense_schur(decomposed):
    S, WR, WL, H = decomposed.reordered_blocks()
    return H - WL @ np.linalg.solve(S, WR)


def test_schur_complement_of_second_difference():
    _, decomposed = arrowhead.decompose(_second_difference(5), 2)
    decomposed.precompute_schur()
    np.testing.assert_allclose(decomposed.schur, _dense_schur(decomposed), atol=1e-14)


def test_schur_complement_matches_dense(rng):
    system = _dominant_system(rng, 200)
    _, decomposed = arrowhead.decompose(system, 4)
    decomposed.precompute_schur()
    expected = _dense_schur(decomposed)
    assert np.abs(decomposed.schur - expected).max() <= 1e-12 * np.abs(expected).max()


def test_second_difference_solution():
    _, decomposed = arrowhead.decompose(_second_difference(5), 2)
    u = arrowhead.solve(decomposed, np.array([1.0, 0.0, 0.0, 0.0, 1.0]))
    np.testing.assert_allclose(u, np.ones(5), atol=1e-14)


@pytest.mark.parametrize("count", [2, 4, 8])
def test_solution_matches_thomas(rng, count):
    system = _dominant_system(rng, 1000)
    rhs = rng.standard_normal(1000)
    expected = thomas_solve(system.with_rhs(rhs))
    _, decomposed = arrowhead.decompose(system, count)
    actual = arrowhead.solve(decomposed, rhs)
    assert np.linalg.norm(actual - expected) <= 1e-12 * np.linalg.norm(expected)


def test_batched_solution_matches_thomas(rng):
    system = _dominant_system(rng, 60, batch=(5,))
    rhs = rng.standard_normal((60, 5))
    _, decomposed = arrowhead.decompose(system, 3)
    actual = arrowhead.solve(decomposed, rhs)
    expected = thomas_solve(system.with_rhs(rhs))
    np.testing.assert_allclose(actual, expected, rtol=1e-12, atol=1e-12)


def test_zero_rhs_gives_zero(rng):
    _, decomposed = arrowhead.decompose(_dominant_system(rng, 30), 3)
    assert not arrowhead.solve(decomposed, np.zeros(30)).any()


def test_single_block_solve(rng):
    system = _dominant_system(rng, 20)
    rhs = rng.standard_normal(20)
    _, decomposed = arrowhead.decompose(system, 1)
    np.testing.assert_array_equal(
        arrowhead.solve(decomposed, rhs), thomas_solve(system.with_rhs(rhs))
    )


def test_too_small_system():
    with pytest.raises(TooSmallSystemError):
        arrowhead.decompose(_second_difference(4), 2)


def test_explicit_block_sizes():
    partition = arrowhead.partition_map(10, 3, block_sizes=[3, 2, 3])
    assert partition.blocks == ((0, 3), (4, 6), (7, 10))
    assert partition.separators == (3, 6)
    with pytest.raises(TooSmallSystemError):
        arrowhead.partition_map(10, 3, block_sizes=[4, 1, 3])
