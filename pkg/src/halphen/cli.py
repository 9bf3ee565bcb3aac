"""CLI entry point: verification suites, sweeps and data exports."""

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from halphen.bianchi_geometry import (
    asd_report,
    build_coframe_metric,
    first_bianchi_residual,
    geometry_sweep,
    ricci,
    riemann_at,
    second_bianchi_residual,
    write_geometry_csv,
)
from halphen.bps_monopole import (
    PROFILE_CSV_HEADER,
    GridSpec,
    MonopoleConfig,
    SquaredKProfile,
    abelian_projection,
    bogomolny_bound,
    bogomolny_residual,
    bogomolny_residual_at,
    dirac_field,
    dirac_flux,
    dirac_gradient_residual,
    energy_and_charge,
    fd_convergence,
    magnetic_charge_in_ball,
    profile_table,
    total_energy,
    write_rows_csv,
)
from halphen.config import get_db_path
from halphen.darboux_halphen import (
    ClosedFormTriad,
    ConstantTriad,
    IsotropicTriad,
    PerturbedTriad,
    TaubNutTriad,
    closed_form_residual,
    dh_integrate,
    halphen_identities,
    sum_dynamics_residual,
    theta_real_solution,
    trajectory_to_csv,
)
from halphen.db import (
    delete_run,
    get_checks,
    get_connection,
    get_meta,
    get_run,
    get_runs,
    init_schema,
    record_run,
)
from halphen.errors import DegenerateMapError, HalphenError, ModeError
from halphen.modular_forms import (
    default_series_params,
    eisenstein_theta_residuals,
    sample_tau,
    theta_log_derivative_residuals,
    transform_residuals,
)
from halphen.moduli_space import (
    GeodesicState,
    ah_problem,
    constant_problem,
    geodesic_integrate,
    hedgehog_field_fn,
    k2_resultant_closed_form,
    planted_shared_root,
    rational_map_new,
    resultant_agreement,
    scatter_fit,
    solve_radial_schrodinger,
    unit_speed_state,
    vacuum_field_fn,
    weighted_gram,
    write_geodesic_csv,
    write_scatter_csv,
    write_spectrum_csv,
)

logger = logging.getLogger(__name__)

# namespace entries that are plumbing rather than run parameters
_NON_PARAMS = {"func", "format", "out", "record", "verbose", "command", "action"}


@dataclass
class Check:
    name: str
    measured: object
    tolerance: float | None
    passed: bool


@dataclass
class Report:
    command: str
    params: dict
    checks: list = field(default_factory=list)
    data: list | None = None
    table: Callable | None = None

    def below(self, name: str, measured: float, tolerance: float) -> None:
        """Passes when measured < tolerance."""
        self.checks.append(Check(name, float(measured), tolerance, bool(measured < tolerance)))

    def above(self, name: str, measured: float, threshold: float) -> None:
        """Passes when measured > threshold (discriminative checks)."""
        self.checks.append(Check(name, float(measured), threshold, bool(measured > threshold)))

    def expect(self, name: str, measured, passed: bool) -> None:
        self.checks.append(Check(name, measured, None, bool(passed)))

    def fail(self, name: str, exc: Exception) -> None:
        self.checks.append(Check(name, f"{type(exc).__name__}: {exc}", None, False))

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def envelope(self, wall_time: float) -> dict:
        return {
            "command": self.command,
            "params": self.params,
            "checks": [
                {"name": c.name, "measured": c.measured, "tolerance": c.tolerance, "pass": c.passed}
                for c in self.checks
            ],
            "pass": self.passed,
            "wall_time": round(wall_time, 6),
            **({"data": self.data} if self.data is not None else {}),
        }


@contextmanager
def guarded(report: Report, name: str):
    """Turn a library error inside the block into a failed check."""
    try:
        yield
    except HalphenError as exc:
        logger.info("%s failed: %s", name, exc)
        report.fail(name, exc)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, complex):
        return [_jsonable(value.real), _jsonable(value.imag)]
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def _provider(name: str):
    if name == "closed-form":
        return ClosedFormTriad()
    if name == "isotropic":
        return IsotropicTriad(1.0)
    if name == "taub-nut":
        return TaubNutTriad(1.0)
    return ConstantTriad((1.0, 1.0, 1.0))


def _linspace(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n) if n > 1 else np.array([lo])


# -- verify ------------------------------------------------------------------------------------


def cmd_verify_forms(args: argparse.Namespace, report: Report) -> None:
    """Modular identities over seeded tau samples."""
    params = default_series_params()
    taus = sample_tau(args.samples, args.im_min, args.im_max, args.seed)
    with guarded(report, "modular_identities"):
        ident = [eisenstein_theta_residuals(t, params) for t in taus]
        trans = [transform_residuals(t, params) for t in taus]
        logs = [theta_log_derivative_residuals(t, params) for t in taus]
        report.below("jacobi_quartic_max", max(r.jacobi for r in ident), 1e-12)
        report.below("e4_theta_max", max(r.e4_theta for r in ident), 1e-11)
        report.below("e6_theta_max", max(r.e6_theta for r in ident), 1e-10)
        report.below("e2_s_law_max", max(r.e2 for r in trans), 1e-10)
        report.below("e4_s_law_max", max(r.e4 for r in trans), 1e-9)
        report.below("e6_s_law_max", max(r.e6 for r in trans), 1e-9)
        worst = max(max(r.theta2, r.theta3, r.theta4) for r in logs)
        report.below("theta_log_derivative_max", worst, 1e-9)


def cmd_verify_dh(args: argparse.Namespace, report: Report) -> None:
    """Closed-form DH residual, integrator tracking and the Halphen identities."""
    ts = _linspace(args.t_min, args.t_max, args.samples)
    with guarded(report, "closed_form_dh_residual"):
        report.below(
            "closed_form_dh_residual", max(closed_form_residual(t) for t in ts), args.tol,
        )
    with guarded(report, "integrator_tracking"):
        traj = dh_integrate(theta_real_solution(args.t_min), args.t_max, tol=args.int_tol)
        drift = max(
            float(np.max(np.abs(traj(t) - theta_real_solution(t).as_array()))) for t in ts
        )
        report.below("integrator_tracking", drift, 100 * args.int_tol)
        report.below("sum_dynamics_residual", sum_dynamics_residual(traj), 1e-8)
    with guarded(report, "halphen_identities"):
        res = [halphen_identities(z) for z in sample_tau(20, 0.5, 3.0, args.seed)]
        report.below("y_sum_max", max(r.y_sum for r in res), 1e-9)
        report.below("y_second_max", max(r.y_second for r in res), 1e-8)
        report.below("y_prime_max", max(r.y_prime for r in res), 1e-8)
        report.below(
            "y_prime_constant_error",
            max(abs(r.y_prime_constant + math.pi**2 / 6) for r in res),
            1e-7,
        )
        report.above("jacobian_min", min(abs(r.jacobian) for r in res), 1e-6)
        report.below("lambda_chain_max", max(max(r.lambda_chain) for r in res), 1e-7)


def cmd_verify_asd(args: argparse.Namespace, report: Report) -> None:
    """Anti-self-duality of the AH and Taub-NUT metrics; a perturbed triad fails it."""
    with guarded(report, "ah_self_duality"):
        m = build_coframe_metric(ClosedFormTriad(), (args.t_min, args.t_max), samples=101)
        rows = [asd_report(m, t) for t in _linspace(*m.domain, args.samples)]
        report.below("asd_residual_max", max(r.asd for r in rows), 1e-7)
        report.below("a_half_sigma_max", max(r.a_half_sigma for r in rows), 1e-7)
        report.below("bracket_max", max(r.bracket for r in rows), 1e-7)
        report.below("torsion_max", max(r.torsion for r in rows), 1e-9)
        report.below("structure_max", max(r.structure for r in rows), 1e-8)
        report.below("duality_max", max(r.duality for r in rows), 1e-12)
        ric = max(float(np.max(np.abs(ricci(m, t)))) for t in _linspace(*m.domain, args.samples))
        report.below("ricci_max", ric, 1e-6)
    with guarded(report, "taub_nut_self_duality"):
        tn = build_coframe_metric(TaubNutTriad(1.0), (args.t_min, args.t_max))
        rows = [asd_report(tn, t) for t in _linspace(*tn.domain, args.samples)]
        report.below("taub_nut_asd_max", max(r.asd for r in rows), 1e-9)
        report.above("taub_nut_selfdual_min", min(r.selfdual for r in rows), 1e-6)
    with guarded(report, "perturbed_triad"):
        bent = PerturbedTriad(ClosedFormTriad(), (args.delta,) * 3)
        mp = build_coframe_metric(bent, (args.t_min, args.t_max), samples=101)
        worst = max(asd_report(mp, t).asd for t in _linspace(*mp.domain, args.samples))
        report.above("perturbed_asd_max", worst, 1e-4)


def cmd_verify_ricci(args: argparse.Namespace, report: Report) -> None:
    """Ricci flatness and Bianchi identities; a constant triad is not flat."""
    with guarded(report, "ah_ricci"):
        m = build_coframe_metric(ClosedFormTriad(), (args.t_min, args.t_max), samples=101)
        ts = _linspace(*m.domain, args.samples)
        report.below("ricci_max", max(float(np.max(np.abs(ricci(m, t)))) for t in ts), 1e-6)
        report.below(
            "first_bianchi_max", max(first_bianchi_residual(riemann_at(m, t)) for t in ts), 1e-8,
        )
        report.below("second_bianchi_max", max(second_bianchi_residual(m, t) for t in ts), 1e-7)
    with guarded(report, "isotropic_ricci"):
        iso = build_coframe_metric(IsotropicTriad(1.0), (args.t_min, args.t_max))
        ts = _linspace(*iso.domain, args.samples)
        worst = max(float(np.max(np.abs(ricci(iso, t)))) for t in ts)
        report.below("isotropic_ricci_max", worst, 1e-9)
    with guarded(report, "taub_nut_ricci"):
        tn = build_coframe_metric(TaubNutTriad(1.0), (args.t_min, args.t_max))
        ts = _linspace(*tn.domain, args.samples)
        worst = max(float(np.max(np.abs(ricci(tn, t)))) for t in ts)
        report.below("taub_nut_ricci_max", worst, 1e-9)
        bianchi = max(second_bianchi_residual(tn, t) for t in ts)
        report.below("taub_nut_second_bianchi_max", bianchi, 1e-9)
    with guarded(report, "constant_triad_ricci"):
        flat = build_coframe_metric(ConstantTriad((1.0, 1.0, 1.0)), (args.t_min, args.t_max))
        curved = float(np.max(np.abs(ricci(flat, flat.domain[0]))))
        report.above("constant_triad_ricci", curved, 1e-2)


def _radial_points(cfg: MonopoleConfig, xi_min: float, xi_max: float, n: int) -> np.ndarray:
    directions = np.array([[1.0, 2.0, 2.0], [0.0, 0.0, 1.0], [-3.0, 1.0, 0.5]])
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    xi = np.linspace(xi_min, xi_max, n)
    r = xi / (cfg.v * cfg.e)
    pts = (r[None, :, None] * directions[:, None, :]).reshape(-1, 3)
    return pts + np.asarray(cfg.center)


def cmd_verify_bogomolny(args: argparse.Namespace, report: Report) -> None:
    """Bogomolny residuals, finite-difference convergence, energy and charge."""
    cfg = MonopoleConfig(e=args.e, v=args.v)
    with guarded(report, "bogomolny_analytic"):
        radial = bogomolny_residual_at(cfg, _radial_points(cfg, 0.1, 40.0, 400))
        report.below("radial_residual_max", float(np.max(radial)), 1e-10)
        grid = bogomolny_residual(cfg, GridSpec(n=args.grid, half_width=5.0 / (cfg.v * cfg.e)))
        report.below("grid_residual_max", grid.residual_max, 1e-10)
        report.expect("sign_branch", grid.branch, grid.branch == 1)
    with guarded(report, "fd_convergence"):
        rows = fd_convergence(cfg, _radial_points(cfg, 0.5, 3.0, 6))
        ratio = rows[0][1] / rows[1][1]
        report.expect("fd_ratio", ratio, 3.5 <= ratio <= 4.5)
    with guarded(report, "energy_and_charge"):
        charge = energy_and_charge(cfg, args.rmax)
        target = 4 * math.pi * cfg.v / cfg.e
        report.below("energy_rel_error", abs(charge.M / target - 1), 0.005)
        report.below("flux_rel_error", abs(charge.g * cfg.e / (4 * math.pi) - 1), 0.01)
        bound = bogomolny_bound(cfg.v, charge.g, charge.q)
        report.below("bound_rel_error", abs(charge.M / bound - 1), 0.005)
    with guarded(report, "non_bps_profile"):
        bent = MonopoleConfig(e=args.e, v=args.v, profile=SquaredKProfile())
        worst = float(np.max(bogomolny_residual_at(bent, _radial_points(bent, 0.5, 5.0, 20))))
        report.above("squared_k_residual_max", worst, 1e-2)
    try:
        bogomolny_residual(MonopoleConfig(e=args.e, v=args.v, lambda_h=0.5))
        report.expect("non_bps_mode_rejected", "accepted", False)
    except ModeError as exc:
        report.expect("non_bps_mode_rejected", str(exc), True)


def cmd_verify_charge(args: argparse.Namespace, report: Report) -> None:
    """Topological charge, magnetic current integral and abelian far field."""
    cfg = MonopoleConfig(e=args.e, v=args.v)
    with guarded(report, "surface_charge"):
        charge = energy_and_charge(cfg, args.rmax)
        report.expect("charge_k", charge.k, charge.k == 1)
        report.below("charge_k_distance", charge.k_distance, 0.01)
    with guarded(report, "magnetic_current"):
        ball = magnetic_charge_in_ball(cfg, 400.0 / (cfg.v * cfg.e))
        report.below("current_ratio_error", abs(ball.ratio - 1), 0.02)
    with guarded(report, "abelian_far_field"):
        r = 30.0 / (cfg.v * cfg.e)
        x = r * np.array([1.0, 2.0, 2.0]) / 3.0
        proj = abelian_projection(cfg, x)
        radial = float(proj.B @ x / r) * cfg.e * r * r
        report.below("far_field_rel_error", abs(radial - 1), 0.01)


# -- sweeps ------------------------------------------------------------------------------------


def cmd_sweep_dh(args: argparse.Namespace, report: Report) -> None:
    """Integrated DH trajectory from the closed-form initial condition."""
    ts = _linspace(args.t_min, args.t_max, args.samples)
    with guarded(report, "dh_trajectory"):
        traj = dh_integrate(theta_real_solution(args.t_min), args.t_max, tol=args.int_tol)
        report.below("sum_dynamics_residual", sum_dynamics_residual(traj), 1e-8)
        report.data = [[float(t), *map(float, traj(t))] for t in ts]
        report.table = lambda stream: trajectory_to_csv(traj, ts, stream)


def cmd_sweep_metric(args: argparse.Namespace, report: Report) -> None:
    """Geometry sweep of the coframe metric of a triad provider."""
    with guarded(report, "metric_sweep"):
        m = build_coframe_metric(_provider(args.provider), (args.t_min, args.t_max), samples=101)
        rows = geometry_sweep(m, _linspace(*m.domain, args.samples))
        report.expect("positivity_domain", list(m.domain), True)
        report.data = [list(r) for r in rows]
        report.table = lambda stream: write_geometry_csv(rows, stream)


# -- monopole ----------------------------------------------------------------------------------


def cmd_monopole_energy(args: argparse.Namespace, report: Report) -> None:
    """Energy, flux and profile table of a hedgehog configuration."""
    with guarded(report, "energy"):
        cfg = MonopoleConfig(e=args.e, v=args.v, lambda_h=args.lambda_h)
        rows = profile_table(cfg, _linspace(0.0, args.rmax, args.samples))
        report.data = [list(r) for r in rows]
        report.table = lambda stream: write_rows_csv(PROFILE_CSV_HEADER, rows, stream)
        if cfg.is_bps:
            charge = energy_and_charge(cfg, args.rmax)
            target = bogomolny_bound(cfg.v, charge.g, charge.q)
            report.below("energy_vs_bound", abs(charge.M / target - 1), 0.005)
            report.expect("energy", charge.M, True)
        else:
            energy, err, _ = total_energy(cfg, args.rmax)
            report.expect("energy", energy, True)
            report.expect("quadrature_error", err, True)


def cmd_monopole_project(args: argparse.Namespace, report: Report) -> None:
    """Abelian projection against the Dirac field on the z-axis."""
    cfg = MonopoleConfig(e=args.e, v=args.v)
    with guarded(report, "dirac_comparison"):
        worst = 0.0
        for r in (5.0, 10.0, 20.0):
            r = r / (cfg.v * cfg.e)
            x = np.asarray(cfg.center) + np.array([0.0, 0.0, r])
            proj = abelian_projection(cfg, x)
            dirac = dirac_field(-2.0 / cfg.e, x - np.asarray(cfg.center)).B
            worst = max(worst, abs(proj.F[0, 1] - dirac[2]) / abs(dirac[2]))
        report.below("projected_vs_dirac_rel", worst, 0.01)
    with guarded(report, "magnetic_current"):
        ball = magnetic_charge_in_ball(cfg, 400.0 / (cfg.v * cfg.e))
        report.below("current_ratio_error", abs(ball.ratio - 1), 0.02)


def cmd_monopole_dirac(args: argparse.Namespace, report: Report) -> None:
    """Dirac monopole: flux, gradient form and the singular origin."""
    report.below("flux_error", abs(dirac_flux(args.k) + 2 * math.pi * args.k), 1e-10)
    report.below("gradient_residual", dirac_gradient_residual(args.k, (0.3, -0.4, 0.5)), 1e-6)
    try:
        dirac_field(args.k, (0.0, 0.0, 0.0))
        report.expect("origin_rejected", "accepted", False)
    except HalphenError as exc:
        report.expect("origin_rejected", str(exc), True)


# -- moduli ------------------------------------------------------------------------------------


def cmd_moduli_resultant(args: argparse.Namespace, report: Report) -> None:
    """Sylvester resultant against the k = 2 closed form; planted shared roots."""
    report.below("sylvester_vs_closed_form", resultant_agreement(args.samples, args.seed), 1e-12)
    rng = np.random.default_rng(args.seed + 1)
    rejected = 0
    trials = 10
    for _ in range(trials):
        root, other, scale = rng.normal(size=3) + 1j * rng.normal(size=3)
        a, b = planted_shared_root(root, other, scale)
        try:
            rational_map_new(2, a, b)
        except DegenerateMapError:
            rejected += 1
    report.expect("planted_roots_rejected", rejected, rejected == trials)
    with guarded(report, "examples"):
        unit = rational_map_new(2, (1, 0), (5, 0))
        report.below("example_unit_delta", abs(unit.delta - 1), 1e-12)
        other = rational_map_new(2, (1, 2), (3, 0))
        report.below("example_13_delta", abs(other.delta - 13), 1e-12)
        report.below(
            "example_13_closed_form", abs(k2_resultant_closed_form((1, 2), (3, 0)) - 13), 1e-12,
        )


def cmd_moduli_geodesic(args: argparse.Namespace, report: Report) -> None:
    """Geodesic on the AH metric with conservation diagnostics."""
    with guarded(report, "geodesic"):
        m = build_coframe_metric(_provider(args.provider), (args.t_min, args.t_max), samples=101)
        t0 = 0.5 * (m.domain[0] + m.domain[1])
        coords = (t0, 1.1, 0.5, 0.7)
        rng = np.random.default_rng(args.seed)
        direction = rng.normal(size=4)
        direction[0] *= 0.1
        run = geodesic_integrate(m, unit_speed_state(m, coords, direction), args.arc, args.tol)
        report.below("norm2_drift", run.norm2_drift, 1e-8)
        report.below("p_beta_drift", run.p_beta_drift, 1e-8)
        report.expect("status", run.status, True)
        report.expect("arc_reached", float(run.s[-1]), True)
        still = geodesic_integrate(m, GeodesicState(coords, (0.0,) * 4), 1.0, args.tol)
        moved = float(np.max(np.abs(still.y - still.y[0])))
        report.expect("zero_velocity_fixed_point", moved, moved == 0.0)
        report.data = [
            [float(s), *map(float, row[:4]), float(n2), float(pb)]
            for s, row, n2, pb in zip(run.s, run.y, run.norm2, run.p_beta)
        ]
        report.table = lambda stream: write_geodesic_csv(run, stream)


def cmd_moduli_scatter(args: argparse.Namespace, report: Report) -> None:
    """Line scattering of a translated hedgehog and of the vacuum."""
    z0 = complex(args.z0_re, args.z0_im)
    cfg = MonopoleConfig(e=args.e, v=args.v, center=(z0.real, z0.imag, 0.0))
    with guarded(report, "hedgehog_scattering"):
        fit = scatter_fit(
            hedgehog_field_fn(cfg), cfg.e, cfg.v, n=args.grid, half_length=args.half_length,
            tol=args.tol,
        )
        report.expect("map_degree", fit.rational_map.k, fit.rational_map.k == 1)
        report.below("pole_error", abs(fit.pole - z0), 0.05)
        report.expect("fit_residual", fit.residual, True)
        report.data = [
            [ln.z.real, ln.z.imag, abs(ln.a), abs(ln.b), float(abs(mv - ln.b))]
            for ln, mv in zip(fit.lines, fit.fit_values)
        ]
        report.table = lambda stream: write_scatter_csv(fit, stream)
    with guarded(report, "vacuum_scattering"):
        vac = scatter_fit(
            vacuum_field_fn(cfg.v), cfg.e, cfg.v, n=3, refine=(), half_length=args.half_length,
            tol=args.tol,
        )
        report.expect("vacuum_degree_zero", vac.rational_map is None, vac.rational_map is None)


def cmd_moduli_spectrum(args: argparse.Namespace, report: Report) -> None:
    """Radial Schroedinger spectrum of a preset."""
    with guarded(report, "spectrum"):
        if args.preset == "constant":
            prob = constant_problem(args.length, args.n, args.hbar)
        else:
            prob = ah_problem(ClosedFormTriad(), args.r0, args.r1, args.n, args.hbar)
        levels = solve_radial_schrodinger(prob, args.n_eigs)
        report.expect("ordered", True, bool(np.all(np.diff(levels.energies) > 0)))
        ground = levels.vectors[:, 0]
        report.expect("ground_nodeless", True, bool(np.all(ground > 0) or np.all(ground < 0)))
        gram = weighted_gram(levels)
        report.below("orthonormality", float(np.max(np.abs(gram - np.eye(len(gram))))), 1e-10)
        if args.preset == "constant":
            n = np.arange(1, args.n_eigs + 1)
            exact = args.hbar**2 * n**2 * math.pi / args.length**2
            rel = float(np.max(np.abs(levels.energies / exact - 1)))
            report.below("energy_rel_error", rel, 1e-3)
            coarse = solve_radial_schrodinger(
                constant_problem(args.length, args.n // 2, args.hbar), 1
            )
            ratio = (coarse.energies[0] - exact[0]) / (levels.energies[0] - exact[0])
            report.expect("refinement_ratio", float(ratio), 3.5 <= ratio <= 4.5)
        report.data = [[i + 1, float(e)] for i, e in enumerate(levels.energies)]
        report.table = lambda stream: write_spectrum_csv(levels, stream)


# -- history -----------------------------------------------------------------------------------


def _row_to_dict(row) -> dict:
    """Convert a sqlite3.Row to a plain dict."""
    return {k: row[k] for k in row.keys()}


def cmd_history_list(args: argparse.Namespace) -> int:
    conn = get_connection()
    init_schema(conn)
    rows = get_runs(conn, command_filter=args.filter_command, failed_only=args.failed)
    conn.close()
    if args.json:
        print(json.dumps([_row_to_dict(r) for r in rows], indent=2))
        return 0
    if not rows:
        print("No runs recorded.", file=sys.stderr)
        return 0
    print(f"  {'RUN':<6} {'COMMAND':<22} {'PASS':<6} {'WALL':>9}  CREATED")
    for row in rows:
        status = "yes" if row["passed"] else "no"
        print(
            f"  {row['run_id']:<6} {row['command']:<22} {status:<6} "
            f"{row['wall_time']:>8.2f}s  {row['created_at']}"
        )
    print(f"\n  {len(rows)} run(s)")
    return 0


def _resolve_run_id(conn, ref: int | str) -> int | None:
    """A run id, or the most recently recorded one for "last"."""
    if ref != "last":
        return ref
    last = get_meta(conn, "last_run_id")
    return int(last) if last is not None else None


def cmd_history_show(args: argparse.Namespace) -> int:
    conn = get_connection()
    init_schema(conn)
    run_id = _resolve_run_id(conn, args.run_id)
    run = get_run(conn, run_id) if run_id is not None else None
    checks = get_checks(conn, run_id) if run else []
    conn.close()
    if run is None:
        print(f"No run with id {args.run_id}", file=sys.stderr)
        return 1
    d = _row_to_dict(run)
    d["params"] = json.loads(d.pop("params_json"))
    d["checks"] = [
        {**_row_to_dict(c), "measured": json.loads(c["measured_json"])} for c in checks
    ]
    for c in d["checks"]:
        c.pop("measured_json")
    if args.json:
        print(json.dumps(d, indent=2, sort_keys=True))
        return 0
    print(f"  Run:       {d['run_id']}")
    print(f"  Command:   {d['command']}")
    print(f"  Passed:    {'yes' if d['passed'] else 'no'}")
    print(f"  Wall time: {d['wall_time']:.2f}s")
    print(f"  Created:   {d['created_at']}")
    for c in d["checks"]:
        mark = "ok " if c["passed"] else "FAIL"
        print(f"    {mark} {c['name']:<28} {c['measured']}  (tol {c['tolerance']})")
    return 0


def cmd_history_delete(args: argparse.Namespace) -> int:
    conn = get_connection()
    init_schema(conn)
    run_id = _resolve_run_id(conn, args.run_id)
    if run_id is None or get_run(conn, run_id) is None:
        conn.close()
        print(f"No run with id {args.run_id}", file=sys.stderr)
        return 1
    delete_run(conn, run_id)
    conn.close()
    print(f"Deleted run {run_id}", file=sys.stderr)
    return 0


def cmd_history_db(_args: argparse.Namespace) -> int:
    """Print the database path."""
    print(get_db_path())
    return 0


# -- parser ------------------------------------------------------------------------------------


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _run_ref(text: str) -> int | str:
    if text == "last":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a run id or 'last', got {text!r}") from None


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--format", choices=["csv", "json"], default=default("json"),
                        help="Report format (default: json)")
    parser.add_argument("--out", default=default(None), help="Output path (default: stdout)")
    parser.add_argument("--seed", type=int, default=default(0), help="Random seed (default: 0)")
    parser.add_argument("--record", action="store_true", default=default(False),
                        help="Store the report in the run archive")
    parser.add_argument("-v", "--verbose", action="count", default=default(0),
                        help="-v for INFO, -vv for DEBUG logging on stderr")


def _t_range(p: argparse.ArgumentParser, t_min: float, t_max: float, samples: int) -> None:
    p.add_argument("--t-min", type=float, default=t_min)
    p.add_argument("--t-max", type=float, default=t_max)
    p.add_argument("--samples", type=_positive_int, default=samples)


def _couplings(p: argparse.ArgumentParser) -> None:
    p.add_argument("--v", type=_positive_float, default=1.0, help="Higgs vev")
    p.add_argument("--e", type=_positive_float, default=1.0, help="Gauge coupling")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halphen",
        description="Quasi-modular forms, Darboux-Halphen flows, the Atiyah-Hitchin metric "
                    "and BPS monopoles: numerical cross-checks",
    )
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    commands = parser.add_subparsers(dest="command")

    def group(name, help_text):
        p = commands.add_parser(name, help=help_text)
        sub = p.add_subparsers(dest="action")
        p.set_defaults(group_parser=p)
        return sub

    # verify
    verify = group("verify", "Run a verification suite")
    p = verify.add_parser("forms", parents=[common], help="Modular identities")
    p.add_argument("--samples", type=_positive_int, default=50)
    p.add_argument("--im-min", type=_positive_float, default=0.5)
    p.add_argument("--im-max", type=_positive_float, default=3.0)
    p.set_defaults(func=cmd_verify_forms)

    p = verify.add_parser("dh", parents=[common], help="DH closed form and Halphen identities")
    _t_range(p, 0.3, 5.0, 200)
    p.add_argument("--tol", type=_positive_float, default=1e-8)
    p.add_argument("--int-tol", type=_positive_float, default=1e-10)
    p.set_defaults(func=cmd_verify_dh)

    p = verify.add_parser("asd", parents=[common], help="Anti-self-duality of the AH metric")
    _t_range(p, 0.5, 3.0, 26)
    p.add_argument("--delta", type=float, default=1e-2, help="Triad perturbation")
    p.set_defaults(func=cmd_verify_asd)

    p = verify.add_parser("ricci", parents=[common], help="Ricci flatness and Bianchi identities")
    _t_range(p, 0.5, 3.0, 11)
    p.set_defaults(func=cmd_verify_ricci)

    p = verify.add_parser("bogomolny", parents=[common], help="BPS monopole checks")
    _couplings(p)
    p.add_argument("--rmax", type=_positive_float, default=40.0)
    p.add_argument("--grid", type=_positive_int, default=20)
    p.set_defaults(func=cmd_verify_bogomolny)

    p = verify.add_parser("charge", parents=[common], help="Magnetic charge checks")
    _couplings(p)
    p.add_argument("--rmax", type=_positive_float, default=40.0)
    p.set_defaults(func=cmd_verify_charge)

    # sweep
    sweep = group("sweep", "Export a parameter sweep")
    p = sweep.add_parser("dh", parents=[common], help="DH trajectory samples")
    _t_range(p, 0.5, 3.0, 51)
    p.add_argument("--int-tol", type=_positive_float, default=1e-10)
    p.set_defaults(func=cmd_sweep_dh)

    p = sweep.add_parser("metric", parents=[common], help="Coframe metric sweep")
    _t_range(p, 0.5, 3.0, 26)
    p.add_argument("--provider", choices=["closed-form", "isotropic", "taub-nut", "constant"],
                   default="closed-form")
    p.set_defaults(func=cmd_sweep_metric)

    # monopole
    monopole = group("monopole", "Monopole field computations")
    p = monopole.add_parser("energy", parents=[common], help="Energy and profile table")
    _couplings(p)
    p.add_argument("--rmax", type=_positive_float, default=40.0)
    p.add_argument("--lambda", dest="lambda_h", type=float, default=0.0)
    p.add_argument("--samples", type=_positive_int, default=41)
    p.set_defaults(func=cmd_monopole_energy)

    p = monopole.add_parser("project", parents=[common], help="Abelian projection")
    _couplings(p)
    p.set_defaults(func=cmd_monopole_project)

    p = monopole.add_parser("dirac", parents=[common], help="Dirac monopole")
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=cmd_monopole_dirac)

    # moduli
    moduli = group("moduli", "Moduli-space computations")
    p = moduli.add_parser("resultant", parents=[common], help="Resultant agreement")
    p.add_argument("--samples", type=_positive_int, default=100)
    p.set_defaults(func=cmd_moduli_resultant)

    p = moduli.add_parser("geodesic", parents=[common], help="Geodesic conservation")
    p.add_argument("--t-min", type=float, default=0.5)
    p.add_argument("--t-max", type=float, default=3.0)
    p.add_argument("--arc", type=_positive_float, default=10.0)
    p.add_argument("--tol", type=_positive_float, default=1e-10)
    p.add_argument("--provider", choices=["closed-form", "isotropic", "taub-nut"],
                   default="closed-form")
    p.set_defaults(func=cmd_moduli_geodesic)

    p = moduli.add_parser("scatter", parents=[common], help="k = 1 line scattering")
    _couplings(p)
    p.add_argument("--z0-re", type=float, default=0.5)
    p.add_argument("--z0-im", type=float, default=0.0)
    p.add_argument("--grid", type=_positive_int, default=5)
    p.add_argument("--half-length", type=_positive_float, default=16.0)
    p.add_argument("--tol", type=_positive_float, default=1e-9)
    p.set_defaults(func=cmd_moduli_scatter)

    p = moduli.add_parser("spectrum", parents=[common], help="Radial Schroedinger spectrum")
    p.add_argument("--preset", choices=["constant", "ah"], default="constant")
    p.add_argument("--n", type=_positive_int, default=2000)
    p.add_argument("--n-eigs", type=_positive_int, default=5)
    p.add_argument("--length", type=_positive_float, default=math.pi)
    p.add_argument("--r0", type=_positive_float, default=0.5)
    p.add_argument("--r1", type=_positive_float, default=3.0)
    p.add_argument("--hbar", type=_positive_float, default=1.0)
    p.set_defaults(func=cmd_moduli_spectrum)

    # history
    history = group("history", "Inspect the run archive")
    p = history.add_parser("list", help="List recorded runs")
    p.add_argument("--command", dest="filter_command", help="Filter by command prefix")
    p.add_argument("--failed", action="store_true", help="Only failed runs")
    p.add_argument("--json", action="store_true", help="JSON output")
    p.set_defaults(func=cmd_history_list, history=True)

    p = history.add_parser("show", help="Show one run with its checks")
    p.add_argument("run_id", type=_run_ref, help="Run id or 'last'")
    p.add_argument("--json", action="store_true", help="JSON output")
    p.set_defaults(func=cmd_history_show, history=True)

    p = history.add_parser("delete", help="Delete a run and its checks")
    p.add_argument("run_id", type=_run_ref, help="Run id or 'last'")
    p.set_defaults(func=cmd_history_delete, history=True)

    p = history.add_parser("db", help="Print the database path")
    p.set_defaults(func=cmd_history_db, history=True)

    return parser


def parse(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse and validate argv; usage errors exit with status 2."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a command is required")
    if not hasattr(args, "func"):
        args.group_parser.error(f"'{args.command}' needs a subcommand")
    if hasattr(args, "t_min") and hasattr(args, "t_max") and not args.t_min < args.t_max:
        parser.error(f"empty range: --t-min {args.t_min} >= --t-max {args.t_max}")
    return args


def _params(args: argparse.Namespace) -> dict:
    return {
        k: v for k, v in sorted(vars(args).items())
        if k not in _NON_PARAMS and k != "group_parser"
    }


def run(args: argparse.Namespace) -> tuple:
    """Dispatch to the command handler; returns (report, envelope)."""
    report = Report(f"{args.command} {args.action}", _params(args))
    start = time.perf_counter()
    with guarded(report, args.action):
        args.func(args, report)
    wall = time.perf_counter() - start
    return report, _jsonable(report.envelope(wall))


def render(report: Report, envelope: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(envelope, sort_keys=True, indent=2) + "\n"
    stream = io.StringIO()
    if report.table is not None:
        report.table(stream)
        return stream.getvalue()
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("name", "measured", "tolerance", "pass"))
    for c in envelope["checks"]:
        writer.writerow((c["name"], c["measured"], c["tolerance"], c["pass"]))
    return stream.getvalue()


def main(argv: list[str] | None = None) -> int:
    args = parse(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )

    if getattr(args, "history", False):
        return args.func(args)

    report, envelope = run(args)
    text = render(report, envelope, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)

    if args.record:
        conn = get_connection()
        init_schema(conn)
        run_id = record_run(conn, envelope)
        conn.close()
        logger.info("recorded run %d", run_id)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
