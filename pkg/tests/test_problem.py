import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asode.controller import integrate
from asode.problem import (
    JacobianStrategy,
    SplitOdeProblem,
    ToleranceSpec,
    autonomize,
    split_by_matrix,
)


def f1(y):
    return np.array([
        -0.013 * y[0] - 1000 * y[0] * y[2],
        -2500 * y[1] * y[2],
        -0.013 * y[0] - 1000 * y[0] * y[2] - 2500 * y[1] * y[2],
    ])


def diag1(y):
    return np.array([-0.013 - 1000 * y[2], -2500 * y[2], -1000 * y[0] - 2500 * y[1]])


def test_strategy_parsing_and_validation():
    s = JacobianStrategy.from_cli("analytic-diag", 5)
    assert s.source == "analytic_diagonal" and s.kind == "diagonal" and s.analytic and s.max_age == 5
    assert JacobianStrategy.from_cli("fd-dense").kind == "dense"
    with pytest.raises(ValueError):
        JacobianStrategy("exact")
    with pytest.raises(ValueError):
        JacobianStrategy(max_age=0)


def test_tolerance_broadcast_and_validation():
    tol = ToleranceSpec.scalar(1e-4, 3)
    assert tol.atol.shape == (3,) and np.all(tol.rtol == 1e-4)
    assert ToleranceSpec(1e-3, 0.0).for_size(2).atol.tolist() == [1e-3, 1e-3]
    with pytest.raises(ValueError):
        ToleranceSpec([0.0, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        ToleranceSpec(-1.0, 1.0)
    with pytest.raises(ValueError):
        ToleranceSpec([1.0, 1.0], 1.0).for_size(3)
    with pytest.raises(ValueError):
        tol.atol[0] = 1.0


def test_zero_B_reduces_to_explicit():
    s = split_by_matrix(f1, lambda y: np.zeros(3))
    y = np.array([0.3, 0.7, 0.1])
    s.refresh(y)
    assert np.array_equal(s.phi(y), f1(y)) and np.array_equal(s.g(y), np.zeros(3))


def test_example1_B_at_initial_state():
    s = split_by_matrix(f1, diag1)
    B = s.refresh(np.array([1.0, 1.0, 0.0]))
    assert B.kind == "diagonal"
    assert np.array_equal(B.values, [-0.013, 0.0, -3500.0])


def test_linear_f_full_concentration(rng):
    A = rng.normal(size=(3, 3))
    s = split_by_matrix(lambda y: A @ y, lambda y: A)
    y = rng.normal(size=3)
    s.refresh(y)
    assert np.allclose(s.phi(y), 0.0, atol=1e-14)
    assert np.allclose(s.g(y), A @ y)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_split_reproduces_f(y_ref, y):
    s = split_by_matrix(f1, diag1)
    s.refresh(np.array(y_ref))
    y = np.array(y)
    assert np.allclose(s.phi(y) + s.g(y), f1(y), rtol=1e-14, atol=1e-9)


def test_phi_needs_refresh():
    with pytest.raises(RuntimeError):
        split_by_matrix(f1, diag1).phi(np.ones(3))


def test_fd_splitting_counts_evaluations():
    s = split_by_matrix(f1, kind="dense")
    B = s.refresh(np.array([1.0, 1.0, 0.1]))
    assert B.n_evals == 4 and s.fd_counter == "phi"


def test_problem_validation():
    with pytest.raises(ValueError):
        SplitOdeProblem([1.0], 1.0, 0.0, 0.1, f=lambda y: y)
    with pytest.raises(ValueError):
        SplitOdeProblem([1.0], 0.0, 1.0, 2.0, f=lambda y: y)
    with pytest.raises(ValueError):
        SplitOdeProblem([1.0], 0.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        SplitOdeProblem([1.0], 0.0, 1.0, 0.1, phi=lambda y: y, g=lambda y: y, f=lambda y: y)
    with pytest.raises(ValueError):
        SplitOdeProblem([1.0], 0.0, 1.0, 0.1, f=lambda y: y)  # analytic strategy without B_builder
    p = SplitOdeProblem([1.0, 2.0], 0.0, 1.0, 0.1, f=lambda y: -y, jacobian=JacobianStrategy("fd_diagonal"))
    assert p.N == 2 and p.split_by_matrix
    assert p.with_options(h0=0.2).h0 == 0.2


def test_direct_splitting_needs_jac_for_analytic():
    p = SplitOdeProblem([1.0], 0.0, 1.0, 0.1, phi=lambda y: -y, g=lambda y: -y)
    with pytest.raises(ValueError):
        p.make_system()


def test_autonomize_quadrature():
    phi, g = autonomize(lambda t, y: np.array([t]))
    p = SplitOdeProblem([0.0, 0.0], 0.0, 2.0, 0.01, phi=phi, g=g, jacobian=JacobianStrategy("fd_diagonal"))
    rep = integrate(p, 1e-8)
    assert rep.y_end[0] == pytest.approx(2.0, abs=1e-12)  # t^2/2, integrated exactly
    assert rep.y_end[1] == pytest.approx(2.0, abs=1e-12)


def test_autonomize_time_independent():
    phi, g = autonomize(lambda t, y: -y, lambda t, y: -2 * y)
    Y = np.array([1.5, 7.0])
    assert np.array_equal(phi(Y), [-1.5, 1.0]) and np.array_equal(g(Y), [-3.0, 0.0])


def test_autonomize_forced_against_oracle():
    from scipy.integrate import solve_ivp

    phi, g = autonomize(lambda t, y: np.sin(t) - 0.0 * y, lambda t, y: -y)
    p = SplitOdeProblem([1.0, 0.0], 0.0, 5.0, 0.01, phi=phi, g=g, jacobian=JacobianStrategy("fd_dense"))
    rep = integrate(p, 1e-7)
    ref = solve_ivp(lambda t, y: -y + np.sin(t), (0, 5), [1.0], rtol=1e-12, atol=1e-12).y[0, -1]
    assert rep.y_end[0] == pytest.approx(ref, abs=1e-5)
