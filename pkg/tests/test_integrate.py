import numpy as np
import pytest
from scipy.integrate._ivp.rk import RK45
from scipy.linalg import expm

from ringwalk.errors import IntegrationError
from ringwalk.integrate import A, B, C, DOPRI5, E, P


def test_tableau_matches_reference():
    np.testing.assert_allclose(C[:6], RK45.C, atol=0)
    np.testing.assert_allclose(B[:6], RK45.B, atol=0)
    # scipy stores the error weights with the opposite sign; only the norm is used
    np.testing.assert_allclose(E, -RK45.E, atol=1e-18)
    np.testing.assert_allclose(P, RK45.P, atol=1e-15)
    for i in range(1, 6):
        np.testing.assert_allclose(A[i][:i], RK45.A[i, :i], atol=0)


def _rotation_problem():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(5, 5))
    G = 1j * (M + M.T) - 0.1 * np.eye(5)
    y0 = rng.normal(size=5) + 0j
    return G, y0


def test_linear_system_against_matrix_exponential():
    G, y0 = _rotation_problem()
    solver = DOPRI5(lambda t, y: G @ y, 0.0, y0, t_bound=3.0)
    while solver.t < 3.0:
        solver.step()
    assert solver.t == 3.0
    np.testing.assert_allclose(solver.y, expm(3.0 * G) @ y0, atol=1e-7)


def test_dense_output_between_steps():
    G, y0 = _rotation_problem()
    solver = DOPRI5(lambda t, y: G @ y, 0.0, y0, t_bound=2.0)
    worst = 0.0
    while solver.t < 2.0:
        step = solver.step()
        np.testing.assert_array_equal(step(step.t_old), step.y_old)
        for t in np.linspace(step.t_old, step.t_new, 5):
            worst = max(worst, np.max(np.abs(step(t) - expm(t * G) @ y0)))
    assert worst < 1e-7


def test_deterministic_step_sequence():
    G, y0 = _rotation_problem()

    def run():
        s = DOPRI5(lambda t, y: G @ y, 0.0, y0, t_bound=1.0)
        ts = []
        while s.t < 1.0:
            ts.append(s.step().t_new)
        return ts

    assert run() == run()


def test_max_step_respected():
    solver = DOPRI5(lambda t, y: -y, 0.0, np.ones(2), max_step=0.01, t_bound=0.1)
    while solver.t < 0.1:
        step = solver.step()
        assert step.h <= 0.01 + 1e-15


def test_projection_applied():
    calls = []

    def project(y):
        calls.append(1)
        return y / np.linalg.norm(y)

    solver = DOPRI5(lambda t, y: 0.5 * y, 0.0, np.ones(1), project=project, t_bound=1.0)
    while solver.t < 1.0:
        solver.step()
    assert calls and abs(solver.y[0]) == pytest.approx(1.0)


def test_underflow_reports_time():
    # blow-up at t = 1: step size collapses as the solution diverges
    solver = DOPRI5(lambda t, y: y**2, 0.0, np.ones(1), t_bound=2.0)
    with pytest.raises(IntegrationError) as info:
        with np.errstate(all="ignore"):
            while solver.t < 2.0:
                solver.step()
    assert 0.9 < info.value.t <= 1.0


def test_step_after_end_rejected():
    solver = DOPRI5(lambda t, y: -y, 0.0, np.ones(1), t_bound=0.0)
    with pytest.raises(IntegrationError):
        solver.step()
