"""Two-monopole moduli space: rational maps, the AH metric in coordinates, geodesics,
line scattering and the radial Schroedinger operator."""

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import IO, Callable

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.optimize import brentq

from halphen.bianchi_geometry import CoframeMetric, sigma_components
from halphen.bps_monopole import MonopoleConfig, hedgehog_arrays
from halphen.config import MAX_GEODESIC_EVALS, MIN_LAPSE_SQUARED, SIN_ALPHA_BAND
from halphen.darboux_halphen import TriadProvider
from halphen.errors import (
    ConditioningError,
    DegenerateMapError,
    DomainError,
    NumericalError,
    ParameterError,
)

logger = logging.getLogger(__name__)

GEODESIC_CSV_HEADER = ("s", "t", "alpha", "beta", "psi", "norm2", "p_beta")
SPECTRUM_CSV_HEADER = ("n", "E_n")
SCATTER_CSV_HEADER = ("re_z", "im_z", "a_fit", "b_fit", "residual")

RESULTANT_RTOL = 1e-12
MAX_CONDITION = 1e12


# -- rational maps -----------------------------------------------------------------------------


def sylvester_matrix(a, b) -> np.ndarray:
    """Sylvester matrix of D = z^k + sum b_i z^i (k - 1 rows) and N = sum a_i z^i (k rows)."""
    k = len(b)
    den = np.concatenate(([1.0 + 0j], np.asarray(b, dtype=complex)[::-1]))
    num = np.asarray(a, dtype=complex)[::-1]
    size = 2 * k - 1
    S = np.zeros((size, size), dtype=complex)
    for row in range(k - 1):
        S[row, row:row + k + 1] = den
    for row in range(k):
        S[k - 1 + row, row:row + k] = num
    return S


def sylvester_resultant(a, b) -> complex:
    """Res(D, N) = prod N(r) over the roots r of the monic denominator."""
    if len(a) != len(b) or len(b) < 1:
        raise ValueError("numerator and denominator need k >= 1 coefficients each")
    return complex(np.linalg.det(sylvester_matrix(a, b)))


def k2_resultant_closed_form(a, b) -> complex:
    """a0^2 - a0 a1 b1 + a1^2 b0; equals a0^2 + b0 a1^2 for centered maps."""
    a0, a1 = (complex(v) for v in a)
    b0, b1 = (complex(v) for v in b)
    return a0 * a0 - a0 * a1 * b1 + a1 * a1 * b0


@dataclass(frozen=True)
class RationalMap:
    """S(z) = (a_0 + ... + a_{k-1} z^{k-1}) / (z^k + b_{k-1} z^{k-1} + ... + b_0)."""

    k: int
    a: tuple
    b: tuple
    delta: complex

    def __call__(self, z):
        return evaluate(self, z)


def rational_map_new(k: int, a_coeffs, b_coeffs) -> RationalMap:
    """Build a based rational map, rejecting numerator and denominator with a common root."""
    if k < 1:
        raise ValueError(f"degree must be >= 1, got {k}")
    a = tuple(complex(v) for v in a_coeffs)
    b = tuple(complex(v) for v in b_coeffs)
    if len(a) != k or len(b) != k:
        raise ValueError(f"degree {k} needs {k} numerator and {k} denominator coefficients")
    delta = sylvester_resultant(a, b)
    bound = float(np.prod(np.linalg.norm(sylvester_matrix(a, b), axis=1)))
    if abs(delta) <= RESULTANT_RTOL * bound:
        raise DegenerateMapError(
            f"resultant {delta:.3e} vanishes: numerator and denominator share a root", delta
        )
    return RationalMap(k, a, b, delta)


def evaluate(rm: RationalMap, z):
    z = np.asarray(z, dtype=complex)
    num = np.polyval(np.asarray(rm.a[::-1]), z)
    den = np.polyval(np.concatenate(([1.0], np.asarray(rm.b[::-1]))), z)
    return num / den


def poles(rm: RationalMap) -> np.ndarray:
    return np.roots(np.concatenate(([1.0], np.asarray(rm.b[::-1]))))


@dataclass(frozen=True)
class SurfacePoint:
    residual: float
    on_surface: bool
    representative: tuple


def k2_surface(x: float, y: float, z: float, rtol: float = 1e-12) -> SurfacePoint:
    """Membership in x^2 - z y^2 = 1 and the orbit representative under (x, y) -> (-x, -y)."""
    residual = abs(x * x - z * y * y - 1)
    scale = max(1.0, abs(x * x), abs(z * y * y))
    rep = max((x, y, z), (-x, -y, z))
    return SurfacePoint(float(residual), residual <= rtol * scale, rep)


def k2_surface_point(rm: RationalMap, normalize: bool = False) -> tuple:
    """(x, y, z) = (a0, a1, -b0) of a centered k = 2 map, so that x^2 - z y^2 = delta.

    With ``normalize`` the numerator is divided by sqrt(delta) and the point lies on
    x^2 - z y^2 = 1.
    """
    if rm.k != 2:
        raise DomainError(f"surface coordinates need a degree-2 map, got k = {rm.k}")
    if abs(rm.b[1]) > 1e-12 * max(1.0, abs(rm.b[0])):
        raise DomainError("map is not centered: b1 != 0")
    a0, a1 = rm.a
    if normalize:
        root = np.sqrt(complex(rm.delta))
        a0, a1 = a0 / root, a1 / root
    return complex(a0), complex(a1), -complex(rm.b[0])


def random_k2_coefficients(n: int, seed: int = 0) -> np.ndarray:
    """n rows of complex (a0, a1, b0) drawn from a seeded generator."""
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))


def resultant_agreement(n: int = 100, seed: int = 0) -> float:
    """Max relative difference between Sylvester and closed form on centered k = 2 maps."""
    worst = 0.0
    for a0, a1, b0 in random_k2_coefficients(n, seed):
        syl = sylvester_resultant((a0, a1), (b0, 0.0))
        closed = k2_resultant_closed_form((a0, a1), (b0, 0.0))
        worst = max(worst, abs(syl - closed) / max(abs(closed), 1e-300))
    return float(worst)


def planted_shared_root(root: complex, other: complex, scale: complex = 1.0) -> tuple:
    """Coefficients of scale (z - root) / ((z - root)(z - other)) in normal form."""
    return (-scale * root, scale), (root * other, -(root + other))


# -- metric in coordinates ---------------------------------------------------------------------


def _coordinate_metric(coeffs: np.ndarray, alpha: float, psi: float) -> np.ndarray:
    sig = sigma_components(alpha, psi)
    g = np.zeros((4, 4))
    g[0, 0] = coeffs[0]
    g[1:, 1:] = np.einsum("i,im,in->mn", coeffs[1:], sig, sig)
    return g


def ah_metric_at(m: CoframeMetric, p) -> np.ndarray:
    """Coordinate metric in (t, alpha, beta, psi): c0 dt^2 + sum c_i (sigma^i)^2."""
    t, alpha, _beta, psi = (float(v) for v in p)
    if not m.contains(t):
        raise DomainError(f"t = {t} outside positivity domain {m.domain}")
    if abs(math.sin(alpha)) < SIN_ALPHA_BAND:
        raise DomainError(f"alpha = {alpha} inside the coordinate singularity band")
    return _coordinate_metric(m.coefficients(t), alpha, psi)


def radial_arc_length(provider: TriadProvider, t0: float, t1: float) -> float:
    """Proper radial distance int sqrt|P| dt."""

    def lapse(t):
        return math.sqrt(abs(float(np.prod(provider.theta(t)))))

    value, _ = quad(lapse, t0, t1, epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(value)


def radial_parameter(m: CoframeMetric, distance: float, t_ref: float | None = None) -> float:
    """Invert the proper radial distance measured from t_ref (default: domain start)."""
    lo, hi = m.domain
    t_ref = lo if t_ref is None else t_ref
    total = radial_arc_length(m.provider, t_ref, hi)
    if not 0.0 <= distance <= total:
        raise DomainError(f"radial distance {distance} outside [0, {total}]")
    if distance == 0.0:
        return t_ref
    return brentq(
        lambda t: radial_arc_length(m.provider, t_ref, t) - distance, t_ref, hi, xtol=1e-14,
    )


def unit_lapse_metric_at(m: CoframeMetric, p) -> tuple:
    """Metric dt'^2 + a sigma1^2 + b sigma2^2 + c sigma3^2 with proper radial coordinate t'.

    Returns the 4x4 matrix and the DH parameter t corresponding to t'.
    """
    distance, alpha, _beta, psi = (float(v) for v in p)
    t = radial_parameter(m, distance)
    g = ah_metric_at(m, (t, alpha, 0.0, psi))
    g[0, 0] = 1.0
    return g, t


# -- geodesics ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicState:
    coords: tuple
    velocity: tuple

    def __post_init__(self):
        coords = tuple(float(v) for v in self.coords)
        velocity = tuple(float(v) for v in self.velocity)
        if len(coords) != 4 or len(velocity) != 4:
            raise ValueError("geodesic states have four coordinates and four velocities")
        if not 0.0 <= coords[1] <= math.pi:
            raise DomainError(f"alpha = {coords[1]} outside [0, pi]")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "velocity", velocity)

    def as_array(self) -> np.ndarray:
        return np.array(self.coords + self.velocity)


@dataclass(frozen=True)
class GeodesicRun:
    s: np.ndarray
    y: np.ndarray
    status: str
    norm2: np.ndarray
    p_beta: np.ndarray
    norm2_drift: float
    p_beta_drift: float
    steps: int

    @property
    def final(self) -> GeodesicState:
        return GeodesicState(tuple(self.y[-1, :4]), tuple(self.y[-1, 4:]))


class GeodesicFlow:
    """Geodesic equations of a coordinate metric with Christoffels from central differences."""

    def __init__(self, m: CoframeMetric, h: float = 1e-5, max_evals: int = MAX_GEODESIC_EVALS):
        self.m = m
        self.h = h
        self.max_evals = max_evals
        self.evals = 0

    def metric(self, x: np.ndarray) -> np.ndarray:
        return _coordinate_metric(self.m.coefficients(x[0]), x[1], x[3])

    def christoffel(self, x: np.ndarray) -> np.ndarray:
        """Gamma[mu, nu, rho] from central differences of the coordinate metric."""
        dg = np.zeros((4, 4, 4))
        # beta is cyclic, its derivative row stays zero
        for lam in (0, 1, 3):
            step = self.h * max(1.0, abs(x[lam]))
            xp, xm = x.copy(), x.copy()
            xp[lam] += step
            xm[lam] -= step
            dg[lam] = (self.metric(xp) - self.metric(xm)) / (2 * step)
        lowered = 0.5 * (
            np.einsum("nsr->snr", dg) + np.einsum("rsn->snr", dg) - dg
        )
        return np.linalg.solve(self.metric(x), lowered.reshape(4, 16)).reshape(4, 4, 4)

    def rhs(self, _s, y):
        self.evals += 1
        if self.evals > self.max_evals:
            raise NumericalError(
                f"geodesic exceeded {self.max_evals} right-hand-side evaluations at t = {y[0]:.6g}"
            )
        x, u = y[:4], y[4:]
        if not np.any(u):
            return np.zeros(8)
        return np.concatenate((u, -np.einsum("mnr,n,r->m", self.christoffel(x), u, u)))

    def conserved(self, y: np.ndarray) -> tuple:
        g = self.metric(y[:4])
        u = y[4:]
        return float(u @ g @ u), float(g[2] @ u)


def _relative_drift(values: np.ndarray) -> float:
    ref = values[0]
    scale = abs(ref) if ref != 0 else 1.0
    return float(np.max(np.abs(values - ref)) / scale)


def geodesic_integrate(
    m: CoframeMetric,
    initial: GeodesicState,
    arc: float,
    tol: float = 1e-10,
    max_evals: int = MAX_GEODESIC_EVALS,
) -> GeodesicRun:
    """Integrate a geodesic over affine length ``arc``; leaving the chart ends the run early."""
    if not tol > 0:
        raise ParameterError(f"tol must be > 0, got {tol}")
    if not m.contains(initial.coords[0]):
        raise DomainError(f"t = {initial.coords[0]} outside positivity domain {m.domain}")
    if abs(math.sin(initial.coords[1])) < SIN_ALPHA_BAND:
        raise DomainError("initial alpha inside the coordinate singularity band")
    lapse2 = float(m.coefficients(initial.coords[0])[0])
    if lapse2 < MIN_LAPSE_SQUARED:
        raise DomainError(
            f"dt^2 coefficient {lapse2:.3g} at t = {initial.coords[0]} is below "
            f"{MIN_LAPSE_SQUARED:g}; the metric is too close to degenerate"
        )
    flow = GeodesicFlow(m, max_evals=max_evals)
    lo, hi = m.domain

    def below(_s, y):
        return y[0] - lo

    def above(_s, y):
        return hi - y[0]

    def band(_s, y):
        return abs(math.sin(y[1])) - SIN_ALPHA_BAND

    for event in (below, above, band):
        event.terminal = True

    sol = solve_ivp(
        flow.rhs, (0.0, arc), initial.as_array(), method="DOP853",
        rtol=tol, atol=tol * 1e-2, events=(below, above, band),
    )
    if sol.status == -1:
        raise NumericalError(f"geodesic integration failed: {sol.message}")
    status = "boundary-exit" if sol.status == 1 else "completed"
    y = sol.y.T
    pairs = np.array([flow.conserved(row) for row in y])
    logger.debug("geodesic: %d steps, %d evaluations, %s", len(sol.t) - 1, sol.nfev, status)
    return GeodesicRun(
        s=sol.t,
        y=y,
        status=status,
        norm2=pairs[:, 0],
        p_beta=pairs[:, 1],
        norm2_drift=_relative_drift(pairs[:, 0]),
        p_beta_drift=_relative_drift(pairs[:, 1]),
        steps=len(sol.t) - 1,
    )


def unit_speed_state(m: CoframeMetric, coords, direction) -> GeodesicState:
    """Scale ``direction`` to unit metric norm at ``coords``."""
    x = np.asarray(coords, dtype=float)
    u = np.asarray(direction, dtype=float)
    norm2 = float(u @ ah_metric_at(m, x) @ u)
    if norm2 <= 0:
        raise ParameterError("direction must be non-zero")
    return GeodesicState(tuple(x), tuple(u / math.sqrt(norm2)))


def write_geodesic_csv(run: GeodesicRun, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(GEODESIC_CSV_HEADER)
    for s, row, n2, pb in zip(run.s, run.y, run.norm2, run.p_beta):
        writer.writerow([repr(float(v)) for v in (s, *row[:4], n2, pb)])


# -- line scattering ---------------------------------------------------------------------------

FieldFn = Callable[[np.ndarray], tuple]


def hedgehog_field_fn(cfg: MonopoleConfig) -> FieldFn:
    return lambda X: hedgehog_arrays(cfg, X)


def vacuum_field_fn(v: float, direction=(0.0, 0.0, 1.0)) -> FieldFn:
    """A = 0 and a constant Higgs field v * direction."""
    n = np.asarray(direction, dtype=float)
    n = v * n / np.linalg.norm(n)

    def fields(X):
        X = np.atleast_2d(X)
        return np.zeros((X.shape[0], 3, 3)), np.tile(n, (X.shape[0], 1))

    return fields


PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


def _line_vector(fields: FieldFn, e: float, z: complex, tau: float) -> np.ndarray:
    """m^a with M = m . sigma = -(e/2)(i A_3^a + phi^a) sigma^a on the line through z."""
    A, phi = fields(np.array([[z.real, z.imag, tau]]))
    return -0.5 * e * (1j * A[0, 2] + phi[0])


def _eigenvectors(m: np.ndarray) -> tuple:
    """Eigenvectors of m . sigma for +lambda and -lambda (Re lambda > 0), smooth in m."""
    lam = np.sqrt(complex(m @ m))
    if lam.real < 0:
        lam = -lam
    m1, m2, m3 = m
    if m3.real < 0:
        up = np.array([(m1 - 1j * m2) / (lam - m3), 1.0])
        down = np.array([1.0, (m1 + 1j * m2) / (m3 - lam)])
    else:
        up = np.array([1.0, (m1 + 1j * m2) / (m3 + lam)])
        down = np.array([-(m1 - 1j * m2) / (m3 + lam), 1.0])
    return lam, up, down


@dataclass(frozen=True)
class LineData:
    z: complex
    a: complex
    b: complex
    condition: float


def line_scattering(
    fields: FieldFn, z: complex, e: float = 1.0, v: float = 1.0, half_length: float = 16.0,
    tol: float = 1e-9,
) -> LineData:
    """Scattering coefficients of D s = 0 along x(tau) = (Re z, Im z, tau).

    The solution decaying at -infinity is written at tau = 0 as a s0 + b s1 with s0 decaying
    and s1 growing at +infinity; a line meets a monopole where b vanishes. Each flow is
    integrated as w = s exp(-mu tau) with mu = +/- e v / 2.
    """
    z = complex(z)
    L = half_length
    rate = 0.5 * e * v

    def flow(mu):
        def rhs(tau, w):
            m = _line_vector(fields, e, z, tau)
            return np.einsum("a,aij,j->i", m, PAULI, w) - mu * w

        return rhs

    def run(mu, start, stop, w0):
        sol = solve_ivp(flow(mu), (start, stop), w0.astype(complex), method="DOP853",
                        rtol=tol, atol=tol * 1e-3)
        if sol.status != 0:
            raise NumericalError(f"line integration failed at z = {z}: {sol.message}")
        return sol.y[:, -1]

    _, up_minus, _ = _eigenvectors(_line_vector(fields, e, z, -L))
    _, up_plus, down_plus = _eigenvectors(_line_vector(fields, e, z, L))
    left = run(rate, -L, 0.0, up_minus)
    s0 = run(-rate, L, 0.0, down_plus)
    s1 = run(rate, L, 0.0, up_plus)
    basis = np.column_stack((s0, s1))
    cond = float(np.linalg.cond(basis))
    if not math.isfinite(cond) or cond > MAX_CONDITION:
        raise ConditioningError(
            f"decaying and growing solutions are numerically dependent at z = {z}",
            cond,
            {"z": z, "s0": s0.tolist(), "s1": s1.tolist()},
        )
    a, b = np.linalg.solve(basis, left)
    return LineData(z, complex(a), complex(b), cond)


@dataclass(frozen=True)
class ScatterFit:
    rational_map: RationalMap | None
    pole: complex | None
    residual: float
    lines: list = field(repr=False)
    fit_values: list = field(repr=False)


def _grid(center: complex, radius: float, n: int) -> list:
    axis = np.linspace(-radius, radius, n)
    return [center + complex(x, y) for x in axis for y in axis]


def _fit_zero(lines: list, center: complex) -> tuple:
    """Least-squares b ~ beta0 + beta1 d + beta2 conj(d), d = z - center; returns zero and fit."""
    d = np.array([ln.z - center for ln in lines])
    b = np.array([ln.b for ln in lines])
    design = np.column_stack((np.ones_like(d), d, d.conj()))
    beta, *_ = np.linalg.lstsq(design, b, rcond=None)
    model = design @ beta
    scale = float(np.sqrt(np.mean(np.abs(b) ** 2)))
    residual = float(np.sqrt(np.mean(np.abs(model - b) ** 2))) / max(scale, 1e-300)
    b0, b1, b2 = beta
    # beta1 w + beta2 conj(w) = -beta0 as a real 2x2 system in w = u + i v
    system = np.array([[(b1 + b2).real, (-(b1 - b2)).imag], [(b1 + b2).imag, (b1 - b2).real]])
    rhs = np.array([-b0.real, -b0.imag])
    try:
        u, w = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        return None, beta, residual, model
    return center + complex(u, w), beta, residual, model


def scatter_fit(
    fields: FieldFn, e: float = 1.0, v: float = 1.0, center_guess: complex = 0.0,
    radius: float = 1.0, n: int = 5, refine: tuple = (0.2, 0.05), half_length: float = 16.0,
    tol: float = 1e-9,
) -> ScatterFit:
    """Fit the k = 1 scattering map S(z) = a / (z - p) from a coarse grid and shrinking refinements.

    A configuration whose lines never meet a bound state (vacuum) gives S = 0 and no map.
    """

    def lines_on(center, r):
        return [line_scattering(fields, z, e, v, half_length, tol) for z in _grid(center, r, n)]

    lines = lines_on(complex(center_guess), radius)
    a_scale = max(abs(ln.a) for ln in lines)
    b_scale = max(abs(ln.b) for ln in lines)
    if a_scale <= 1e-8 * b_scale:
        logger.info("scattering numerator vanishes on every line: degree-0 map")
        return ScatterFit(None, None, 0.0, lines, [0j] * len(lines))

    pole, beta, residual, model = _fit_zero(lines, complex(center_guess))
    if pole is None:
        raise NumericalError("scattering data has no isolated zero on the grid")
    refined = pole
    for r in refine:
        lines = lines_on(refined, r)
        refined, beta, residual, model = _fit_zero(lines, refined)
        if refined is None:
            raise NumericalError("refined scattering fit is singular")
    at_pole = line_scattering(fields, refined, e, v, half_length, tol)
    rm = rational_map_new(1, [at_pole.a / beta[1]], [-refined])
    logger.debug("scatter fit: pole %s, residual %.2e", refined, residual)
    return ScatterFit(rm, refined, residual, lines, list(model))


def scattering_values(fit: ScatterFit) -> np.ndarray:
    """S = a / b on the fitted lines."""
    return np.array([ln.a / ln.b for ln in fit.lines])


def write_scatter_csv(fit: ScatterFit, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SCATTER_CSV_HEADER)
    rows = sorted(zip(fit.lines, fit.fit_values), key=lambda r: (r[0].z.real, r[0].z.imag))
    for ln, model in rows:
        writer.writerow([
            repr(ln.z.real), repr(ln.z.imag), repr(abs(ln.a)), repr(abs(ln.b)),
            repr(float(abs(model - ln.b))),
        ])


# -- radial Schroedinger -----------------------------------------------------------------------


@dataclass(frozen=True)
class SchrodingerProblem:
    """-(1/(P f)) (P/f Psi')' = (pi E / hbar^2) Psi on (r0, r1), Dirichlet, j = 0 sector.

    ``n`` counts interior grid points; P and f are vectorized callables.
    """

    r0: float
    r1: float
    n: int
    P: Callable = field(repr=False)
    f: Callable = field(repr=False)
    hbar: float = 1.0
    label: str = "custom"

    def __post_init__(self):
        if not self.r1 > self.r0:
            raise ParameterError(f"empty radial interval [{self.r0}, {self.r1}]")
        if self.n < 3:
            raise ParameterError(f"need at least 3 interior points, got {self.n}")
        if not self.hbar > 0:
            raise ParameterError(f"hbar must be > 0, got {self.hbar}")

    @property
    def step(self) -> float:
        return (self.r1 - self.r0) / (self.n + 1)

    def grid(self) -> np.ndarray:
        return self.r0 + self.step * np.arange(1, self.n + 1)


def constant_problem(length: float = math.pi, n: int = 2000, hbar: float = 1.0):
    """P/f = P f = 1 on [0, length]: E_n = hbar^2 n^2 pi / length^2."""

    def one(r):
        return np.ones_like(np.asarray(r, dtype=float))

    return SchrodingerProblem(0.0, length, n, one, one, hbar, "constant")


def ah_problem(provider: TriadProvider, r0: float, r1: float, n: int = 2000, hbar: float = 1.0):
    """P = Theta^1 Theta^2 Theta^3 and f = |Theta^2(r)| / r on [r0, r1], r0 > 0."""
    if not r0 > 0:
        raise DomainError(f"radial interval must start above 0, got {r0}")

    def P(r):
        return np.array([abs(float(np.prod(provider.theta(x)))) for x in np.atleast_1d(r)])

    def f(r):
        r = np.atleast_1d(r)
        return np.array([abs(float(provider.theta(x)[1])) / x for x in r])

    return SchrodingerProblem(r0, r1, n, P, f, hbar, provider.label)


@dataclass(frozen=True)
class Spectrum:
    energies: np.ndarray
    eigenvalues: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray
    grid: np.ndarray


def solve_radial_schrodinger(prob: SchrodingerProblem, n_eigs: int = 5) -> Spectrum:
    """Lowest eigenpairs of the symmetrized finite-difference Sturm-Liouville operator.

    Eigenvectors are orthonormal in the weighted inner product sum w_i psi_i psi_j h.
    """
    if not 1 <= n_eigs < prob.n:
        raise ParameterError(f"n_eigs must lie in [1, {prob.n - 1}], got {n_eigs}")
    h = prob.step
    r = prob.grid()
    half = prob.r0 + h * (np.arange(prob.n + 1) + 0.5)
    P_half, f_half = (np.asarray(fn(half), dtype=float) for fn in (prob.P, prob.f))
    P_grid, f_grid = (np.asarray(fn(r), dtype=float) for fn in (prob.P, prob.f))
    if np.all(P_half < 0) and np.all(P_grid < 0):
        # an overall sign of P cancels in the operator
        P_half, P_grid = -P_half, -P_grid
    for name, values in (("P", P_half), ("P", P_grid), ("f", f_half), ("f", f_grid)):
        if not np.all(values > 0):
            raise DomainError(f"{prob.label}: {name} not positive on the grid")
    p_half = P_half / f_half
    w = P_grid * f_grid
    diag = (p_half[:-1] + p_half[1:]) / (h * h)
    off = -p_half[1:-1] / (h * h)
    inv_sqrt = 1 / np.sqrt(w)
    try:
        lam, y = eigh_tridiagonal(
            diag * inv_sqrt**2, off * inv_sqrt[:-1] * inv_sqrt[1:],
            select="i", select_range=(0, n_eigs - 1),
        )
    except LinAlgError as exc:
        raise NumericalError(f"tridiagonal eigen-solver failed: {exc}") from exc
    psi = y * inv_sqrt[:, None] / math.sqrt(h)
    energies = prob.hbar**2 * lam / math.pi
    logger.debug("%s: lowest eigenvalues %s", prob.label, lam[:3])
    return Spectrum(energies, lam, psi, w, r)


def weighted_gram(levels: Spectrum) -> np.ndarray:
    """psi^T W psi h, the identity for orthonormal eigenvectors."""
    h = levels.grid[1] - levels.grid[0]
    return levels.vectors.T @ (levels.weights[:, None] * levels.vectors) * h


def write_spectrum_csv(levels: Spectrum, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SPECTRUM_CSV_HEADER)
    for n, energy in enumerate(levels.energies, start=1):
        writer.writerow([n, repr(float(energy))])
