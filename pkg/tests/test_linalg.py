import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from tracefem.linalg import SolverError, SolverOptions, block_system, project_zero_mean, solve


def test_identity():
    b = np.arange(5.0)
    np.testing.assert_array_equal(solve(sp.eye(5), b), b)


def test_two_by_two():
    np.testing.assert_allclose(solve(sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]]), np.array([3.0, 3.0])), [1, 1])


def test_zero_rhs():
    np.testing.assert_array_equal(solve(sp.eye(3), np.zeros(3)), 0.0)


def test_singular_system_raises():
    with pytest.raises(SolverError) as exc:
        solve(sp.csr_matrix(np.ones((3, 3))), np.array([1.0, 0.0, 0.0]))
    assert np.isnan(exc.value.residual) or exc.value.residual > 0


def test_iterative_branch():
    n = 300
    A = sp.diags([-1.0, 2.5, -1.0], [-1, 0, 1], shape=(n, n), format="csr")
    b = np.ones(n)
    x, info = solve(A, b, SolverOptions(direct_threshold=10), return_info=True)
    assert info.method == "gmres+ilu"
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_repeat_solve_bitwise():
    rng = np.random.default_rng(3)
    A = sp.random(60, 60, density=0.1, random_state=4) + 10 * sp.eye(60)
    b = rng.random(60)
    assert np.array_equal(solve(A, b), solve(A, b))


def test_block_system():
    K = block_system([[sp.eye(2), None], [None, 2 * sp.eye(1)]])
    assert K.shape == (3, 3) and K.has_sorted_indices


def test_project_zero_mean_examples():
    m = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(project_zero_mean(np.full(3, 4.2), m), 0.0, atol=1e-15)
    p = np.array([3.0, 0.0, -1.0])  # m @ p = 0
    np.testing.assert_allclose(project_zero_mean(p, m), p, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20), st.integers(0, 100))
def test_projection_properties(vals, seed):
    p = np.array(vals)
    m = np.random.default_rng(seed).random(len(p)) + 0.1
    q = project_zero_mean(p, m)
    assert abs(m @ q) <= 1e-10 * (1 + np.abs(p).max()) * m.sum()
    np.testing.assert_allclose(project_zero_mean(q, m), q, atol=1e-9 * (1 + np.abs(p).max()))
