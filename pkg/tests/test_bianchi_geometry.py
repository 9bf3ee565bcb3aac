"""Tests for halphen.bianchi_geometry module."""

import io
import math

import numpy as np
import pytest

from halphen.bianchi_geometry import (
    GEOMETRY_CSV_HEADER,
    EulerPoint,
    asd_report,
    asd_residual,
    build_coframe_metric,
    connection_bracket,
    curvature,
    first_bianchi_residual,
    geometry_sweep,
    index_dual,
    levi_civita,
    literal_coefficients,
    maurer_cartan_at,
    ricci,
    riemann_at,
    sd_decompose,
    second_bianchi_residual,
    sigma_components,
    solve_connection,
    write_geometry_csv,
)
from halphen.darboux_halphen import (
    ClosedFormTriad,
    ConstantTriad,
    IsotropicTriad,
    PerturbedTriad,
    ScaledTriad,
    TaubNutTriad,
    TrajectoryTriad,
    dh_integrate,
    theta_real_jet,
    theta_real_solution,
)
from halphen.errors import DomainError, EmptyDomainError


@pytest.fixture(scope="module")
def ah_metric():
    return build_coframe_metric(ClosedFormTriad(), (0.5, 3.0))


def test_levi_civita():
    eps = levi_civita(3)
    assert eps[0, 1, 2] == 1
    assert eps[1, 0, 2] == -1
    assert eps[0, 0, 2] == 0
    assert levi_civita(4)[3, 2, 1, 0] == 1


def test_euler_point_validation():
    with pytest.raises(DomainError):
        EulerPoint(4.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        EulerPoint(1.0, 7.0, 0.0)
    with pytest.raises(DomainError):
        EulerPoint(1.0, 0.0, 13.0)


def test_maurer_cartan_structure_equations():
    mc = maurer_cartan_at(EulerPoint(1.0, 0.5, 0.7))
    assert mc.structure_residual < 1e-8
    assert mc.volume == pytest.approx(math.sin(1.0))


def test_maurer_cartan_rejects_pole():
    with pytest.raises(DomainError):
        maurer_cartan_at(EulerPoint(0.0, 0.5, 0.7))


def test_sigma_components_ignore_beta():
    np.testing.assert_array_equal(sigma_components(0.3, 1.0)[2], [0.0, math.cos(0.3), 1.0])


def test_literal_coefficients():
    np.testing.assert_allclose(literal_coefficients((1.0, 2.0, 4.0)), [8.0, 8.0, 2.0, 0.5])


def test_ah_metric_sign_and_domain(ah_metric):
    assert ah_metric.sign == -1.0
    assert ah_metric.domain == (0.5, 3.0)
    assert np.all(ah_metric.coefficients(1.0) > 0)
    assert np.all(ah_metric.literal_coefficients(1.0) < 0)


def test_isotropic_metric_positive():
    m = build_coframe_metric(IsotropicTriad(1.0))
    assert m.sign == 1.0
    assert m.label.startswith("isotropic")


def test_empty_domain():
    with pytest.raises(EmptyDomainError):
        build_coframe_metric(ConstantTriad((0.0, 1.0, 1.0)))
    with pytest.raises(EmptyDomainError):
        build_coframe_metric(ConstantTriad((-1.0, 1.0, 1.0)), normalize_sign=False)


def test_frame_outside_domain(ah_metric):
    with pytest.raises(DomainError):
        ah_metric.frame(3.5)


def test_torsion_free(ah_metric):
    assert solve_connection(ah_metric, 1.2).torsion_residual < 1e-12


def test_ah_ricci_flat(ah_metric):
    for t in np.linspace(0.5, 3.0, 11):
        assert np.max(np.abs(ricci(ah_metric, t))) < 1e-6


def test_isotropic_ricci_flat():
    m = build_coframe_metric(IsotropicTriad(1.0))
    assert np.max(np.abs(ricci(m, 1.3))) < 1e-9


def test_constant_triad_is_curved():
    m = build_coframe_metric(ConstantTriad((1.0, 1.0, 1.0)))
    ric = ricci(m, 1.0)
    assert np.max(np.abs(ric)) == pytest.approx(0.5)
    assert ric[0, 0] == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(np.abs(np.diag(ric)[1:]), [0.5] * 3)


def test_first_bianchi(ah_metric):
    for t in np.linspace(0.5, 3.0, 11):
        assert first_bianchi_residual(riemann_at(ah_metric, t)) < 1e-8
    curved = build_coframe_metric(ConstantTriad((1.0, 2.0, 3.0)))
    assert first_bianchi_residual(riemann_at(curved, 1.0)) < 1e-12


def test_second_bianchi(ah_metric):
    for t in np.linspace(0.5, 3.0, 11):
        assert second_bianchi_residual(ah_metric, t) < 1e-7
    curved = build_coframe_metric(ConstantTriad((1.0, 2.0, 3.0)))
    assert second_bianchi_residual(curved, 1.0) < 1e-8
    with pytest.raises(DomainError):
        second_bianchi_residual(ah_metric, 3.5)


def test_index_dual_is_involution():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(4, 4))
    X = X - X.T
    np.testing.assert_allclose(index_dual(index_dual(X)), X, atol=1e-14)


def test_connection_bracket_on_dh_solution():
    th, d1, _ = theta_real_jet(1.3)
    np.testing.assert_allclose(connection_bracket(th, d1), 2 * th, atol=1e-10)


def test_ah_anti_self_dual(ah_metric):
    for t in np.linspace(0.5, 3.0, 11):
        rep = asd_report(ah_metric, t)
        assert rep.asd < 1e-7
        assert rep.a_half_sigma < 1e-7
        assert rep.bracket < 1e-7
        assert rep.torsion < 1e-12
        assert rep.structure < 1e-8
        assert rep.duality < 1e-12
    assert asd_report(ah_metric, 1.0).selfdual > 1e-4


def test_orientation_flip_swaps_self_dual_parts(ah_metric):
    conn = solve_connection(ah_metric, 1.0)
    curv = curvature(conn)
    plus, minus = sd_decompose(conn, curv, 1.0), sd_decompose(conn, curv, -1.0)
    np.testing.assert_array_equal(minus.S, plus.A)
    np.testing.assert_array_equal(minus.A, plus.S)
    np.testing.assert_array_equal(minus.s, plus.a)
    flipped = asd_report(ah_metric, 1.0, orientation=-1.0)
    assert flipped.selfdual < 1e-7
    assert flipped.asd > 1e-4


def test_scaled_triad_rescales_connection(ah_metric):
    c = 2.0
    scaled = build_coframe_metric(ScaledTriad(ClosedFormTriad(), c), (0.5, 3.0))
    base = solve_connection(ah_metric, 1.3).gamma
    conn = solve_connection(scaled, 1.3)
    # lapse scales like c^(3/2) and the sphere widths like c^(1/2)
    temporal = np.any(np.indices(base.shape) == 0, axis=0)
    expected = np.where(temporal, base * c**-1.5, base * c**-0.5)
    np.testing.assert_allclose(conn.gamma, expected, rtol=1e-12, atol=1e-14)
    assert conn.torsion_residual < 1e-12


def test_scaled_constant_triad_is_homothetic():
    base = build_coframe_metric(ConstantTriad((1.0, 2.0, 3.0)))
    scaled = build_coframe_metric(ScaledTriad(ConstantTriad((1.0, 2.0, 3.0)), 4.0))
    np.testing.assert_allclose(
        solve_connection(scaled, 1.0).gamma, solve_connection(base, 1.0).gamma / 2, atol=1e-14
    )
    np.testing.assert_allclose(riemann_at(scaled, 1.0), riemann_at(base, 1.0) / 4, atol=1e-14)


def test_taub_nut_geometry():
    m = build_coframe_metric(TaubNutTriad(1.0))
    assert m.sign == 1.0
    assert m.domain == (0.5, 3.0)
    f = m.coefficients(1.0)
    assert f[1] == f[2] != f[3]
    rows = geometry_sweep(m, np.linspace(0.5, 3.0, 6))
    assert all(r[1] < 1e-9 and r[2] < 1e-9 for r in rows)
    for t in (0.5, 1.75, 3.0):
        rep = asd_report(m, t)
        assert rep.selfdual > 1e-6
        assert rep.a_half_sigma < 1e-9
        assert second_bianchi_residual(m, t) < 1e-9


def test_perturbed_triad_not_anti_self_dual():
    m = build_coframe_metric(PerturbedTriad(ClosedFormTriad(), (1e-2,) * 3))
    assert asd_residual(m, 0.8) > 1e-4


def test_integrated_triad_geometry():
    traj = dh_integrate(theta_real_solution(0.5), 3.0, tol=1e-11)
    m = build_coframe_metric(TrajectoryTriad(traj), (0.5, 3.0))
    assert asd_residual(m, 1.5) < 1e-6
    assert np.max(np.abs(ricci(m, 1.5))) < 1e-5


def test_geometry_sweep_and_csv(ah_metric):
    rows = geometry_sweep(ah_metric, [2.0, 1.0, 1.5])
    assert [r[0] for r in rows] == [1.0, 1.5, 2.0]
    assert all(r[1] < 1e-7 for r in rows)
    buf = io.StringIO()
    write_geometry_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(GEOMETRY_CSV_HEADER)
    assert len(lines) == 4
    assert len(lines[1].split(",")) == len(GEOMETRY_CSV_HEADER)
