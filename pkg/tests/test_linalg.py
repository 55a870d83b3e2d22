import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asode.exceptions import SingularD
from asode.linalg import JacobianApprox, factorize_D, finite_difference_jacobian, solve_D


@pytest.mark.parametrize("kind", ["dense", "diagonal"])
def test_zero_B_is_identity_solve(kind):
    F = factorize_D(JacobianApprox.zeros(3, kind), 0.43, 0.7)
    rhs = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(solve_D(F, rhs), rhs)


def test_diagonal_solve_divides():
    B = JacobianApprox("diagonal", np.array([-1.0, -4.0]))
    F = factorize_D(B, 0.5, 1.0)
    assert np.allclose(solve_D(F, np.array([3.0, 6.0])), [3.0 / 1.5, 6.0 / 3.0])


def test_example1_diagonal_zero_entry():
    # b22 = -2500*y3 vanishes at y3 = 0, so D is the identity on that component
    B = JacobianApprox("diagonal", np.array([-0.013, 0.0, -3500.0]))
    F = factorize_D(B, 0.43586652150846, 1e-3)
    x = solve_D(F, np.array([1.0, 2.0, 3.0]))
    assert x[1] == 2.0


def test_dense_2x2_hand_inverse():
    B = JacobianApprox("dense", np.array([[0.0, 1.0], [-1.0, 0.0]]))
    F = factorize_D(B, 1.0, 1.0)  # D = [[1,-1],[1,1]]
    assert np.allclose(solve_D(F, np.array([1.0, 1.0])), [1.0, 0.0], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 50), st.integers(0, 2 ** 32 - 1))
def test_random_dense_residual(n, seed):
    rng = np.random.default_rng(seed)
    Bv = rng.normal(size=(n, n)) / np.sqrt(n)
    a, h = 0.43586652150846, 0.5
    D = np.eye(n) - a * h * Bv
    if np.linalg.cond(D) > 1e6:
        return
    F = factorize_D(JacobianApprox("dense", Bv), a, h)
    rhs = rng.normal(size=n)
    x = solve_D(F, rhs)
    assert np.max(np.abs(D @ x - rhs)) / np.max(np.abs(rhs)) < 1e-12


def test_diagonal_and_dense_paths_agree(rng):
    d = -rng.uniform(0, 100, size=6)
    rhs = rng.normal(size=6)
    x1 = solve_D(factorize_D(JacobianApprox("diagonal", d), 0.4, 0.3), rhs)
    x2 = solve_D(factorize_D(JacobianApprox("dense", np.diag(d)), 0.4, 0.3), rhs)
    assert np.allclose(x1, x2, rtol=1e-12, atol=0)


def test_factorization_is_reusable(rng):
    Bv = rng.normal(size=(4, 4))
    F = factorize_D(JacobianApprox("dense", Bv), 0.4, 0.1)
    r1, r2 = rng.normal(size=4), rng.normal(size=4)
    x1 = solve_D(F, r1)
    solve_D(F, r2)
    assert np.array_equal(solve_D(F, r1), x1)


def test_singular_diagonal():
    B = JacobianApprox("diagonal", np.array([2.0, -1.0]))
    with pytest.raises(SingularD):
        factorize_D(B, 0.5, 1.0)


def test_singular_dense():
    B = JacobianApprox("dense", np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularD):
        factorize_D(B, 0.5, 1.0)  # D = [[0.5,-0.5],[-0.5,0.5]]


def test_nonpositive_h_rejected():
    with pytest.raises(ValueError):
        factorize_D(JacobianApprox.zeros(2), 0.4, 0.0)


def test_rhs_shape_checked():
    F = factorize_D(JacobianApprox.zeros(3), 0.4, 0.1)
    with pytest.raises(ValueError):
        solve_D(F, np.ones(2))


def test_jacobian_validation():
    with pytest.raises(ValueError):
        JacobianApprox("sparse", np.zeros(2))
    with pytest.raises(ValueError):
        JacobianApprox("dense", np.zeros((2, 3)))
    with pytest.raises(ValueError):
        JacobianApprox("diagonal", np.zeros((2, 2)))
    with pytest.raises(ValueError):
        JacobianApprox("diagonal", np.zeros(2), age=-1)


def test_jacobian_is_immutable_and_ages():
    B = JacobianApprox("diagonal", np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        B.values[0] = 5.0
    assert B.aged().aged().age == 2
    assert np.array_equal(B.to_dense(), np.diag([1.0, 2.0]))


def test_fd_linear_recovers_matrix(rng):
    Bv = rng.normal(size=(4, 4))
    # O(1) state: forward-difference rounding error is about sqrt(eps)*|g|/|y_j|
    J = finite_difference_jacobian(lambda y: Bv @ y, rng.uniform(0.5, 2.0, size=4), "dense")
    assert np.max(np.abs(J.values - Bv)) < 1e-6 * np.max(np.abs(Bv))
    assert J.n_evals == 5


def test_fd_quadratic():
    J = finite_difference_jacobian(lambda y: np.array([y[0] ** 2, 0.0]), np.array([1.0, 3.0]), "dense")
    assert np.allclose(J.values, [[2.0, 0.0], [0.0, 0.0]], atol=1e-6)


def test_fd_zero_and_diagonal():
    J = finite_difference_jacobian(lambda y: np.zeros(3), np.ones(3), "dense")
    assert np.array_equal(J.values, np.zeros((3, 3)))
    Jd = finite_difference_jacobian(lambda y: np.array([y[0] * y[1], y[1] ** 3]), np.array([2.0, 1.0]), "diagonal")
    assert np.allclose(Jd.values, [1.0, 3.0], atol=1e-6)


def test_fd_reuses_g0():
    J = finite_difference_jacobian(lambda y: -y, np.ones(3), "diagonal", g0=-np.ones(3))
    assert J.n_evals == 3
