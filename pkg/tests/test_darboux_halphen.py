"""Tests for halphen.darboux_halphen module."""

import io
import itertools
import logging
import math

import numpy as np
import pytest
from scipy.special import gamma

from halphen.darboux_halphen import (
    TRAJECTORY_CSV_HEADER,
    ClosedFormTriad,
    ConstantTriad,
    IsotropicTriad,
    PerturbedTriad,
    ScaledTriad,
    TaubNutTriad,
    TrajectoryTriad,
    TriadState,
    closed_form_residual,
    dh_integrate,
    dh_jacobian,
    dh_residual,
    dh_rhs,
    dh_third_derivative,
    gamma_closed_form,
    gamma_dh_residual,
    halphen_identities,
    sum_dynamics_residual,
    theta_real_asymptotic,
    theta_real_jet,
    theta_real_solution,
    trajectory_to_csv,
)
from halphen.errors import FiniteTimeSingularityError, ParameterError
from halphen.modular_forms import eval_eisenstein

THETA3_FOURTH_AT_I = (math.pi**0.25 / gamma(0.75)) ** 4


def test_rhs_isotropic():
    np.testing.assert_allclose(dh_rhs((2.0, 2.0, 2.0)), [-4.0, -4.0, -4.0])


def test_rhs_cyclic_structure():
    d = dh_rhs((1.0, 2.0, 3.0))
    # Theta1' = Theta2 Theta3 - Theta1 (Theta2 + Theta3)
    assert d[0] == pytest.approx(6.0 - 5.0)
    assert d[1] == pytest.approx(3.0 - 8.0)
    assert d[2] == pytest.approx(2.0 - 9.0)


def test_jacobian_matches_finite_difference():
    x = np.array([0.3, -1.2, 0.7])
    h = 1e-6
    fd = np.column_stack([
        (dh_rhs(x + h * e) - dh_rhs(x - h * e)) / (2 * h) for e in np.eye(3)
    ])
    np.testing.assert_allclose(dh_jacobian(x), fd, atol=1e-8)


def test_triad_state_validation():
    with pytest.raises(ValueError):
        TriadState(0.0, (1.0, 2.0))
    with pytest.raises(ValueError):
        TriadState(0.0, (1.0, float("inf"), 0.0))


def test_closed_form_at_one():
    th = theta_real_solution(1.0).as_array()
    expected = [0.5 - math.pi / 4 * THETA3_FOURTH_AT_I, 0.5 + math.pi / 4 * THETA3_FOURTH_AT_I, 0.5]
    np.testing.assert_allclose(th, expected, atol=1e-13)
    assert th[0] < 0 < th[2] < th[1]


def test_closed_form_sum_is_e2():
    for t in (0.5, 1.0, 2.5):
        total = np.sum(theta_real_solution(t).as_array())
        assert total == pytest.approx(math.pi / 2 * eval_eisenstein("E2", 1j * t).value.real)


def test_closed_form_solves_dh():
    for t in np.linspace(0.3, 5.0, 25):
        assert closed_form_residual(t) < 1e-8


def test_complex_closed_form_solves_dh():
    for z in (0.3 + 1.1j, -0.4 + 0.8j, 2.0j):
        assert gamma_dh_residual(z) < 1e-8


def test_gamma_closed_form_reports_tail_bound():
    triad = gamma_closed_form(0.2 + 1.0j)
    assert len(triad.gamma) == 3
    assert 0 <= triad.tail_bound < 1e-13


def test_asymptotic_form():
    np.testing.assert_allclose(
        theta_real_solution(5.0).as_array(), theta_real_asymptotic(5.0), atol=1e-10
    )


def test_jet_consistent_with_vector_field():
    for t in (0.6, 1.0, 2.0):
        th, d1, d2 = theta_real_jet(t)
        np.testing.assert_allclose(th, theta_real_solution(t).as_array(), atol=1e-13)
        np.testing.assert_allclose(d1, dh_rhs(th), atol=1e-11)
        np.testing.assert_allclose(d2, dh_jacobian(th) @ d1, atol=1e-10)


def test_small_t_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="halphen.darboux_halphen"):
        theta_real_solution(0.2)
    assert "0.2" in caplog.text


def test_small_t_threshold_ignores_rounding(caplog):
    with caplog.at_level(logging.WARNING, logger="halphen.darboux_halphen"):
        theta_real_solution(0.3 * (1 - 1e-12))
        theta_real_solution(0.3)
    assert not caplog.records


def test_small_components_keep_relative_accuracy():
    for t in (3.0, 4.5, 6.0):
        p = math.exp(-math.pi * t)
        th = theta_real_solution(t).as_array()
        expected1 = -4 * math.pi * p * (1 - 4 * p**3) / (1 - 2 * p + 2 * p**4)
        expected3 = 4 * math.pi * p * (1 + 4 * p**3) / (1 + 2 * p + 2 * p**4)
        assert th[0] == pytest.approx(expected1, rel=1e-12)
        assert th[2] == pytest.approx(expected3, rel=1e-12)


def test_jet_solves_dh_componentwise_at_large_t():
    for t in (3.0, 4.5, 6.0):
        th, d1, d2 = theta_real_jet(t)
        np.testing.assert_allclose(d1, dh_rhs(th), rtol=1e-10, atol=1e-20)
        assert closed_form_residual(t) < 1e-12


def test_halphen_identities():
    res = halphen_identities(0.1 + 1.2j)
    assert res.y_sum < 1e-10
    assert res.y_second < 1e-8
    assert res.y_prime < 1e-8
    assert abs(res.y_prime_constant + math.pi**2 / 6) < 1e-8
    assert abs(res.jacobian) > 1e-6
    assert max(res.lambda_chain) < 1e-7
    assert max(res.gamma_from_lambda) < 1e-7


def test_integrate_isotropic_exact():
    traj = dh_integrate(TriadState(0.0, (1.0, 1.0, 1.0)), 2.0, tol=1e-11)
    np.testing.assert_allclose(traj(2.0), [1 / 3] * 3, rtol=1e-9)
    np.testing.assert_allclose(traj(0.5), [2 / 3] * 3, rtol=1e-9)
    assert traj.steps > 0
    assert traj.nfev > traj.steps


def test_integrate_backward():
    traj = dh_integrate(TriadState(1.0, (0.5, 0.5, 0.5)), 0.0, tol=1e-11)
    np.testing.assert_allclose(traj(0.0), [1.0] * 3, rtol=1e-9)


def test_integrate_tracks_closed_form():
    traj = dh_integrate(theta_real_solution(0.5), 3.0, tol=1e-10)
    for t in np.linspace(0.5, 3.0, 11):
        np.testing.assert_allclose(traj(t), theta_real_solution(t).as_array(), atol=1e-8)


@pytest.mark.parametrize("perm", list(itertools.permutations(range(3))))
def test_integration_commutes_with_permutations(perm):
    perm = list(perm)
    start = theta_real_solution(0.5).as_array()
    ts = np.linspace(0.5, 2.5, 9)
    reference = dh_integrate(TriadState(0.5, start), 2.5)(ts)
    permuted = dh_integrate(TriadState(0.5, start[perm]), 2.5)(ts)
    np.testing.assert_allclose(permuted, reference[:, perm], rtol=1e-10, atol=1e-12)


def test_integration_error_shrinks_with_tol():
    start = theta_real_solution(0.5)
    exact = theta_real_solution(2.5).as_array()
    errors = [
        float(np.max(np.abs(dh_integrate(start, 2.5, tol=tol)(2.5) - exact)))
        for tol in (1e-5, 1e-11)
    ]
    assert errors[1] < errors[0]
    assert errors[1] < 1e-8


def test_integrate_finite_time_blowup():
    with pytest.raises(FiniteTimeSingularityError) as exc_info:
        dh_integrate(TriadState(0.0, (-1.0, -1.0, -1.0)), 2.0)
    assert exc_info.value.escape_time == pytest.approx(1.0, abs=1e-3)


def test_integrate_parameter_errors():
    state = TriadState(0.0, (1.0, 1.0, 1.0))
    with pytest.raises(ParameterError):
        dh_integrate(state, 1.0, tol=0.0)
    with pytest.raises(ParameterError):
        dh_integrate(state, 0.0)


def test_trajectory_out_of_range():
    traj = dh_integrate(TriadState(0.0, (1.0, 1.0, 1.0)), 1.0)
    with pytest.raises(ParameterError):
        traj(1.5)
    assert traj.state(0.5).t == 0.5


def test_sum_dynamics_conserved():
    traj = dh_integrate(theta_real_solution(0.5), 3.0, tol=1e-10)
    assert sum_dynamics_residual(traj) < 1e-8


def test_trajectory_csv():
    traj = dh_integrate(TriadState(0.0, (1.0, 1.0, 1.0)), 1.0)
    buf = io.StringIO()
    trajectory_to_csv(traj, [1.0, 0.0, 0.5], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(TRAJECTORY_CSV_HEADER)
    assert len(lines) == 4
    assert [float(line.split(",")[0]) for line in lines[1:]] == [0.0, 0.5, 1.0]


def test_dh_residual_detects_non_solution():
    assert dh_residual(ConstantTriad((1.0, 1.0, 1.0)).theta, 1.0) == pytest.approx(1.0)
    assert dh_residual(IsotropicTriad(2.0).theta, 0.7) < 1e-8


def test_providers():
    iso = IsotropicTriad(1.0)
    th, d1, d2 = iso.jet(1.0)
    np.testing.assert_allclose(th, [0.5] * 3)
    np.testing.assert_allclose(d1, dh_rhs(th))

    bent = PerturbedTriad(iso, (0.1, 0.0, 0.0))
    np.testing.assert_allclose(bent.theta(1.0), [0.6, 0.5, 0.5])
    np.testing.assert_allclose(bent.jet(1.0)[1], d1)

    scaled = ScaledTriad(iso, 2.0)
    np.testing.assert_allclose(scaled.theta(1.0), [1.0] * 3)
    assert "isotropic" in scaled.label

    assert ClosedFormTriad().label == "closed-form"


def test_taub_nut_triad_solves_dh():
    tn = TaubNutTriad(k=1.5, t0=0.2)
    for t in (0.5, 1.0, 3.0):
        th, d1, d2 = tn.jet(t)
        assert th[0] == th[1] != th[2]
        np.testing.assert_allclose(d1, dh_rhs(th), rtol=1e-13)
        np.testing.assert_allclose(d2, dh_jacobian(th) @ d1, rtol=1e-12)
        np.testing.assert_allclose(tn.third(t), dh_third_derivative(th, d1, d2), rtol=1e-12)
        assert dh_residual(tn.theta, t) < 1e-8
    assert tn.label == "taub-nut(k=1.5)"
    np.testing.assert_allclose(
        TaubNutTriad(k=0.0, t0=1.0).theta(1.0), IsotropicTriad(1.0).theta(1.0)
    )


def test_third_derivatives_match_finite_difference():
    h = 1e-4
    providers = (
        ClosedFormTriad(), IsotropicTriad(2.0), TaubNutTriad(), ScaledTriad(TaubNutTriad(), 3.0),
    )
    for provider in providers:
        for t in (0.8, 2.0):
            fd = (provider.jet(t + h)[2] - provider.jet(t - h)[2]) / (2 * h)
            np.testing.assert_allclose(provider.third(t), fd, rtol=1e-6, atol=1e-9)


def test_trajectory_triad_jet():
    traj = dh_integrate(TriadState(0.0, (1.0, 1.0, 1.0)), 2.0, tol=1e-11)
    th, d1, d2 = TrajectoryTriad(traj).jet(1.0)
    e_th, e_d1, e_d2 = IsotropicTriad(1.0).jet(1.0)
    np.testing.assert_allclose(th, e_th, rtol=1e-9)
    np.testing.assert_allclose(d1, e_d1, rtol=1e-8)
    np.testing.assert_allclose(d2, e_d2, rtol=1e-8)
