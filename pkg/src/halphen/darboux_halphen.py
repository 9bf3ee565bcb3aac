"""The Darboux-Halphen system, its integrator and its quasi-modular closed form."""

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Protocol

import numpy as np
from scipy.integrate import quad, solve_ivp

from halphen.config import BLOWUP_GUARD
from halphen.errors import ConsistencyError, FiniteTimeSingularityError, ParameterError
from halphen.modular_forms import (
    SeriesParams,
    central_difference,
    default_series_params,
    eisenstein_derivative,
    eisenstein_second_derivative_e2,
    eval_eisenstein,
    half_plane_point,
    lambda_function,
    theta_fourth_powers,
    theta_log_jet,
)

logger = logging.getLogger(__name__)

TRAJECTORY_CSV_HEADER = ("t", "theta1", "theta2", "theta3")


@dataclass(frozen=True)
class TriadState:
    t: float
    theta: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.theta)
        if len(values) != 3:
            raise ValueError(f"a triad has three components, got {len(values)}")
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"triad components must be finite, got {values}")
        object.__setattr__(self, "theta", values)
        object.__setattr__(self, "t", float(self.t))

    def as_array(self) -> np.ndarray:
        return np.array(self.theta)


@dataclass(frozen=True)
class ComplexTriad:
    z: complex
    gamma: tuple
    tail_bound: float = 0.0


def _components(s) -> np.ndarray:
    if isinstance(s, TriadState):
        return s.as_array()
    return np.asarray(s, dtype=float)


def dh_rhs(s) -> np.ndarray:
    """dTheta^1/dt = Theta^2 Theta^3 - Theta^1 (Theta^2 + Theta^3), and cyclic."""
    a, b, c = _components(s)
    return np.array([b * c - a * (b + c), c * a - b * (c + a), a * b - c * (a + b)])


def dh_jacobian(s) -> np.ndarray:
    """Partial derivatives of dh_rhs with respect to (Theta^1, Theta^2, Theta^3)."""
    a, b, c = _components(s)
    return np.array([
        [-(b + c), c - a, b - a],
        [c - b, -(c + a), a - b],
        [b - c, a - c, -(a + b)],
    ])


def _dh_rhs_complex(g: np.ndarray) -> np.ndarray:
    a, b, c = g
    return np.array([b * c - a * (b + c), c * a - b * (c + a), a * b - c * (a + b)])


@dataclass(frozen=True)
class Trajectory:
    """Integrated DH solution with dense output over [t_start, t_end]."""

    t: np.ndarray
    theta: np.ndarray
    tol: float
    steps: int
    nfev: int
    _dense: object = field(repr=False, compare=False)

    @property
    def t_start(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def __call__(self, t):
        lo, hi = sorted((self.t_start, self.t_end))
        tt = np.asarray(t, dtype=float)
        if np.any(tt < lo - 1e-12) or np.any(tt > hi + 1e-12):
            raise ParameterError(f"t outside trajectory range [{lo}, {hi}]")
        values = self._dense(tt)
        return values.T if values.ndim == 2 else values

    def state(self, t: float) -> TriadState:
        return TriadState(t, self(t))


def dh_integrate(
    initial: TriadState, t_end: float, tol: float = 1e-10, method: str = "DOP853",
) -> Trajectory:
    """Adaptive embedded Runge-Kutta integration with dense output."""
    if not tol > 0:
        raise ParameterError(f"tol must be > 0, got {tol}")
    if t_end == initial.t:
        raise ParameterError("t_end must differ from the initial time")

    def blowup(_t, y):
        return BLOWUP_GUARD - np.max(np.abs(y))

    blowup.terminal = True

    sol = solve_ivp(
        lambda _t, y: dh_rhs(y),
        (initial.t, t_end),
        initial.as_array(),
        method=method,
        rtol=tol,
        atol=tol * 1e-2,
        dense_output=True,
        events=blowup,
    )
    if sol.t_events[0].size:
        escape = float(sol.t_events[0][0])
        raise FiniteTimeSingularityError(
            f"|Theta| exceeded {BLOWUP_GUARD:.0e} at t = {escape:.12g}", escape_time=escape
        )
    if sol.status != 0:
        escape = float(sol.t[-1])
        raise FiniteTimeSingularityError(
            f"integration stopped at t = {escape:.12g}: {sol.message}", escape_time=escape
        )
    logger.debug(
        "DH integration %s -> %s: %d steps, %d evaluations", initial.t, t_end, len(sol.t) - 1,
        sol.nfev,
    )
    return Trajectory(
        t=sol.t, theta=sol.y.T, tol=tol, steps=len(sol.t) - 1, nfev=int(sol.nfev), _dense=sol.sol,
    )


def trajectory_to_csv(traj: Trajectory, samples: Iterable[float], stream: IO[str]) -> None:
    """Write dense-output samples with header t,theta1,theta2,theta3."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRAJECTORY_CSV_HEADER)
    for t in sorted(samples):
        writer.writerow([repr(float(t)), *(repr(float(v)) for v in traj(t))])


def sum_dynamics_residual(traj: Trajectory) -> float:
    """|S(t1) - S(t0) + int Sigma_pairs dt| for S = Theta^1 + Theta^2 + Theta^3."""

    def pairs(t):
        a, b, c = traj(t)
        return a * b + b * c + c * a

    integral, err = quad(pairs, traj.t_start, traj.t_end, epsabs=1e-13, epsrel=1e-12, limit=200)
    delta = np.sum(traj(traj.t_end)) - np.sum(traj(traj.t_start))
    return float(abs(delta + integral))


# gamma^i = -2 d/dz log of these nullwerte, in component order
GAMMA_THETA_KINDS = ("theta4", "theta2", "theta3")

# closed-form evaluations below this t come with degraded tail bounds
SMALL_T = 0.3


def _gamma_jets(pt, params: SeriesParams) -> tuple:
    """(gamma, dgamma/dz, d2gamma/dz2, tail bound) from the theta log-derivatives."""
    jets = [theta_log_jet(kind, pt, params) for kind in GAMMA_THETA_KINDS]
    gamma = np.array([-2 * j.value for j in jets])
    d1 = np.array([-2 * j.d1 for j in jets])
    d2 = np.array([-2 * j.d2 for j in jets])
    return gamma, d1, d2, 2 * max(j.tail_bound for j in jets)


def gamma_closed_form(z: complex, params: SeriesParams | None = None) -> ComplexTriad:
    """Fully anisotropic DH solution gamma^i = -2 d/dz log(theta_4, theta_2, theta_3)."""
    params = params or default_series_params()
    pt = half_plane_point(z)
    gamma, _, _, bound = _gamma_jets(pt, params)
    return ComplexTriad(pt.tau, tuple(complex(g) for g in gamma), bound)


def gamma_dh_residual(z: complex, params: SeriesParams | None = None) -> float:
    """Cyclic DH residual of the closed form, derivative from the series."""
    params = params or default_series_params()
    gamma, d1, _, _ = _gamma_jets(half_plane_point(z), params)
    return float(np.max(np.abs(d1 - _dh_rhs_complex(gamma))))


def _check_small_t(t: float) -> None:
    if t < SMALL_T * (1 - 1e-9):
        logger.warning("closed form at t = %.6g < %g: series tail bounds degrade", t, SMALL_T)


def _real_values(t: float, values) -> np.ndarray:
    for v in values:
        if abs(v.imag) > 1e-10 * max(1.0, abs(v.real)):
            raise ConsistencyError(f"closed form is not real at t = {t}: {list(values)}")
    return np.array([v.real for v in values])


def theta_real_solution(t: float, params: SeriesParams | None = None) -> TriadState:
    """Real-line solution Theta^k(t) = i gamma^k(i t)."""
    params = params or default_series_params()
    _check_small_t(t)
    triad = gamma_closed_form(1j * t, params)
    return TriadState(t, tuple(_real_values(t, [1j * g for g in triad.gamma])))


def theta_real_jet(t: float, params: SeriesParams | None = None) -> tuple:
    """(Theta, dTheta/dt, d2Theta/dt2) of the closed form from the series derivatives."""
    params = params or default_series_params()
    _check_small_t(t)
    gamma, d1, d2, _ = _gamma_jets(half_plane_point(1j * t), params)
    # Theta(t) = i gamma(i t): each t-derivative brings another factor i
    return (
        _real_values(t, 1j * gamma),
        _real_values(t, -d1),
        _real_values(t, -1j * d2),
    )


def theta_real_asymptotic(t: float) -> np.ndarray:
    """Leading q-expansion of the real solution: (-4 pi e^(-pi t), pi/2, 4 pi e^(-pi t))."""
    p = math.exp(-math.pi * t)
    return np.array([-4 * math.pi * p, math.pi / 2, 4 * math.pi * p])


def dh_residual(theta_fn, t: float, h: float | None = None) -> float:
    """max |dTheta/dt - dh_rhs(Theta)| with a fourth-order central difference in t."""
    if h is None:
        h = 1e-3 * max(abs(t), 1e-3)
    f = [np.asarray(theta_fn(t + k * h)) for k in (-2, -1, 1, 2)]
    deriv = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
    return float(np.max(np.abs(deriv - dh_rhs(theta_fn(t)))))


def closed_form_residual(t: float, params: SeriesParams | None = None) -> float:
    """max |dTheta/dt - dh_rhs(Theta)| for the closed form, derivative from the series."""
    theta, d1, _ = theta_real_jet(t, params)
    return float(np.max(np.abs(d1 - dh_rhs(theta))))


@dataclass(frozen=True)
class HalphenResiduals:
    """Residuals of the symmetric-function identities of the DH closed form.

    ``y_prime_constant`` is the measured c in 2 sum(w_i w_j) = c (E2^2 - E4); its exact
    value is -pi^2/6.
    """

    y_sum: float
    y_second: float
    y_prime: float
    y_prime_constant: complex
    jacobian: complex
    lambda_value: complex
    lambda_chain: tuple
    gamma_from_lambda: tuple


def halphen_identities(z: complex, params: SeriesParams | None = None) -> HalphenResiduals:
    """y = i pi E2 against the closed-form triad, plus the lambda chain."""
    params = params or default_series_params()
    pt = half_plane_point(z)
    w = np.array(gamma_closed_form(pt, params).gamma)
    e2 = eval_eisenstein("E2", pt, params).value
    e4 = eval_eisenstein("E4", pt, params).value
    y = 1j * math.pi * e2
    y1 = 1j * math.pi * eisenstein_derivative("E2", pt, params).value
    y2 = 1j * math.pi * eisenstein_second_derivative_e2(pt, params).value
    pairs = w[0] * w[1] + w[1] * w[2] + w[2] * w[0]
    jac = (w[0] - w[1]) * (w[1] - w[2]) * (w[2] - w[0])

    t2, t3, t4 = (v.value for v in theta_fourth_powers(pt, params))
    lam = lambda_function(pt, params).value
    dlam = central_difference(lambda s: lambda_function(s, params).value, pt.tau)
    expected = (1j * math.pi * t4, -1j * math.pi * t2, -1j * math.pi * t3)
    measured = (dlam / lam, dlam / (lam - 1), dlam / (lam * (lam - 1)))
    chain = tuple(float(abs(m - e)) for m, e in zip(measured, expected))

    def e_funcs(s):
        a, b, c = (v.value for v in theta_fourth_powers(s, params))
        return np.array([1j * math.pi * c, -1j * math.pi * a, -1j * math.pi * b])

    de = central_difference(e_funcs, pt.tau)
    from_lambda = -0.5 * de / e_funcs(pt.tau)
    gamma_res = tuple(float(abs(v)) for v in from_lambda - w)

    return HalphenResiduals(
        y_sum=float(abs(y + 2 * np.sum(w))),
        y_second=float(abs(y2 + 12 * w[0] * w[1] * w[2])),
        y_prime=float(abs(2 * pairs - y1)),
        y_prime_constant=complex(2 * pairs / (e2 * e2 - e4)),
        jacobian=complex(jac),
        lambda_value=complex(lam),
        lambda_chain=chain,
        gamma_from_lambda=gamma_res,
    )


class TriadProvider(Protocol):
    """Source of a triad Theta(t) together with its first three t-derivatives."""

    label: str

    def theta(self, t: float) -> np.ndarray: ...

    def jet(self, t: float) -> tuple: ...

    def third(self, t: float) -> np.ndarray: ...


def dh_third_derivative(s, d1, d2) -> np.ndarray:
    """Theta''' along a DH solution; the Jacobian is linear in Theta."""
    d1, d2 = np.asarray(d1, dtype=float), np.asarray(d2, dtype=float)
    return dh_jacobian(s) @ d2 + dh_jacobian(d1) @ d1


class ClosedFormTriad:
    """The Atiyah-Hitchin triad from the quasi-modular closed form."""

    label = "closed-form"

    def __init__(self, params: SeriesParams | None = None):
        self.params = params or default_series_params()

    def theta(self, t: float) -> np.ndarray:
        return theta_real_solution(t, self.params).as_array()

    def jet(self, t: float) -> tuple:
        return theta_real_jet(t, self.params)

    def third(self, t: float) -> np.ndarray:
        return dh_third_derivative(*self.jet(t))


class IsotropicTriad:
    """Theta^i = c / (1 + c t), the isotropic DH solution."""

    def __init__(self, c: float = 1.0):
        self.c = float(c)
        self.label = f"isotropic(c={self.c:g})"

    def theta(self, t: float) -> np.ndarray:
        return np.full(3, self.c / (1 + self.c * t))

    def jet(self, t: float) -> tuple:
        u = 1 + self.c * t
        c = self.c
        return np.full(3, c / u), np.full(3, -c * c / u**2), np.full(3, 2 * c**3 / u**3)

    def third(self, t: float) -> np.ndarray:
        return np.full(3, -6 * self.c**4 / (1 + self.c * t) ** 4)


class TaubNutTriad:
    """Theta^1 = Theta^2 = 1/s, Theta^3 = 1/s + k/s^2 with s = t + t0.

    The DH solutions with two equal components; k = 0 is the isotropic solution and k > 0
    gives the Taub-NUT metric with the nut at s -> infinity.
    """

    def __init__(self, k: float = 1.0, t0: float = 0.0):
        self.k = float(k)
        self.t0 = float(t0)
        self.label = f"taub-nut(k={self.k:g})"

    def _s(self, t: float) -> np.float64:
        # the pole s = 0 evaluates to inf, which the positivity scan drops
        return np.float64(t) + self.t0

    def theta(self, t: float) -> np.ndarray:
        s = self._s(t)
        return np.array([1 / s, 1 / s, 1 / s + self.k / s**2])

    def jet(self, t: float) -> tuple:
        s, k = self._s(t), self.k
        th = np.array([1 / s, 1 / s, 1 / s + k / s**2])
        d1 = np.array([-1 / s**2, -1 / s**2, -1 / s**2 - 2 * k / s**3])
        d2 = np.array([2 / s**3, 2 / s**3, 2 / s**3 + 6 * k / s**4])
        return th, d1, d2

    def third(self, t: float) -> np.ndarray:
        s, k = self._s(t), self.k
        return np.array([-6 / s**4, -6 / s**4, -6 / s**4 - 24 * k / s**5])


class ConstantTriad:
    """A constant triad; not a DH solution unless it vanishes."""

    def __init__(self, values=(1.0, 1.0, 1.0)):
        self.values = np.asarray(values, dtype=float)
        self.label = "constant" + str(tuple(float(v) for v in self.values))

    def theta(self, t: float) -> np.ndarray:
        return self.values.copy()

    def jet(self, t: float) -> tuple:
        zero = np.zeros(3)
        return self.values.copy(), zero, zero.copy()

    def third(self, t: float) -> np.ndarray:
        return np.zeros(3)


class PerturbedTriad:
    """Base triad shifted by a constant delta; derivatives are the base ones."""

    def __init__(self, base: TriadProvider, delta):
        self.base = base
        self.delta = np.asarray(delta, dtype=float)
        self.label = f"{base.label}+delta"

    def theta(self, t: float) -> np.ndarray:
        return self.base.theta(t) + self.delta

    def jet(self, t: float) -> tuple:
        th, d1, d2 = self.base.jet(t)
        return th + self.delta, d1, d2

    def third(self, t: float) -> np.ndarray:
        return self.base.third(t)


class ScaledTriad:
    """c * Theta(t); widths scale like sqrt(c), the lapse like c^(3/2)."""

    def __init__(self, base: TriadProvider, c: float):
        self.base = base
        self.c = float(c)
        self.label = f"{self.c:g}*{base.label}"

    def theta(self, t: float) -> np.ndarray:
        return self.c * self.base.theta(t)

    def jet(self, t: float) -> tuple:
        return tuple(self.c * v for v in self.base.jet(t))

    def third(self, t: float) -> np.ndarray:
        return self.c * self.base.third(t)


class TrajectoryTriad:
    """Dense output of an integrated trajectory, derivatives from the DH vector field."""

    def __init__(self, traj: Trajectory):
        self.traj = traj
        self.label = "trajectory"

    def theta(self, t: float) -> np.ndarray:
        return np.asarray(self.traj(t), dtype=float)

    def jet(self, t: float) -> tuple:
        th = self.theta(t)
        d1 = dh_rhs(th)
        return th, d1, dh_jacobian(th) @ d1

    def third(self, t: float) -> np.ndarray:
        return dh_third_derivative(*self.jet(t))
