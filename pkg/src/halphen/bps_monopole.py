"""SU(2) Yang-Mills-Higgs monopoles: hedgehog fields, strengths, Bogomolny checks and charges.

Fields are stored by components: A[i, a] = A_i^a (space index i, su(2) index a) and
phi[a]. The coupling enters through

    D_i phi^a = d_i phi^a - e eps_abc A_i^b phi^c,
    F_ij^a    = d_i A_j^a - d_j A_i^a - e eps_abc A_i^b A_j^c,

which, with the ansatz A_n^a = eps_amn x^m (1 - K) / (e r^2), phi^a = x^a H / (e r^2), makes
D phi decay at infinity and puts the BPS solution on the B = +D phi branch.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import IO, NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_legendre

from halphen.errors import (
    AccuracyError,
    DomainError,
    ModeError,
    ParameterError,
    ProjectionSingularError,
)

logger = logging.getLogger(__name__)

EPS = np.zeros((3, 3, 3))
EPS[0, 1, 2] = EPS[1, 2, 0] = EPS[2, 0, 1] = 1.0
EPS[0, 2, 1] = EPS[2, 1, 0] = EPS[1, 0, 2] = -1.0

# below this xi the profiles are evaluated from their Taylor series
SERIES_XI = 0.05
PROFILE_SERIES_XI = 1e-4
MIN_FD_STEP = 1e-12
PROFILE_CSV_HEADER = ("r", "H", "K", "phi_norm", "energy_density")
CONVERGENCE_CSV_HEADER = ("h", "residual_max", "residual_l2")
DEFAULT_DIRECTION = np.array([1.0, 2.0, 2.0]) / 3.0


def bps_profiles(xi):
    """(H, K) = (xi coth xi - 1, xi / sinh xi), by series for xi < 1e-4."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise DomainError("xi must be >= 0")
    small = xi < PROFILE_SERIES_XI
    x = np.where(small, 1.0, xi)
    em2 = np.exp(-2 * x)
    H = x * (1 + em2) / (1 - em2) - 1
    K = 2 * x * np.exp(-x) / (1 - em2)
    x2 = xi * xi
    H = np.where(small, x2 / 3 - x2 * x2 / 45, H)
    K = np.where(small, 1 - x2 / 6 + 7 * x2 * x2 / 360, K)
    if H.ndim == 0:
        return float(H), float(K)
    return H, K


class Reduced(NamedTuple):
    """eta = H/xi^2, G = (1 - K)/xi^2 and their derivatives divided by xi."""

    eta: np.ndarray
    eta1: np.ndarray
    G: np.ndarray
    G1: np.ndarray
    K: np.ndarray
    dK_over_xi: np.ndarray


def _bps_reduced(xi: np.ndarray) -> Reduced:
    xi = np.asarray(xi, dtype=float)
    small = xi < SERIES_XI
    x = np.where(small, 1.0, xi)
    em2 = np.exp(-2 * x)
    coth = (1 + em2) / (1 - em2)
    csch = 2 * np.exp(-x) / (1 - em2)
    H = x * coth - 1
    K = x * csch
    dH = coth - x * csch**2
    dK = -H * csch
    eta = H / x**2
    eta1 = dH / x**3 - 2 * H / x**4
    G = (1 - K) / x**2
    G1 = -dK / x**3 - 2 * (1 - K) / x**4
    dKx = dK / x

    s2 = xi * xi
    s4 = s2 * s2
    s6 = s4 * s2
    eta = np.where(small, 1 / 3 - s2 / 45 + 2 * s4 / 945 - s6 / 4725, eta)
    eta1 = np.where(small, -2 / 45 + 8 * s2 / 945 - 6 * s4 / 4725, eta1)
    G = np.where(small, 1 / 6 - 7 * s2 / 360 + 31 * s4 / 15120 - 127 * s6 / 604800, G)
    G1 = np.where(small, -7 / 180 + 31 * s2 / 3780 - 127 * s4 / 100800, G1)
    K = np.where(small, 1 - s2 / 6 + 7 * s4 / 360, K)
    dKx = np.where(small, -1 / 3 + 7 * s2 / 90, dKx)
    return Reduced(eta, eta1, G, G1, K, dKx)


class BPSProfile:
    """Prasad-Sommerfield profile."""

    name = "bps"

    def hk(self, xi):
        return bps_profiles(xi)

    def reduced(self, xi) -> Reduced:
        return _bps_reduced(xi)


class SquaredKProfile:
    """(H, K^2): not a Bogomolny solution, used as a discriminating input."""

    name = "bps-k-squared"

    def hk(self, xi):
        H, K = bps_profiles(xi)
        return H, K * K

    def reduced(self, xi) -> Reduced:
        r = _bps_reduced(xi)
        # 1 - K^2 = (1 - K)(1 + K)
        G = r.G * (1 + r.K)
        G1 = r.G1 * (1 + r.K) + r.G * r.dK_over_xi
        return Reduced(r.eta, r.eta1, G, G1, r.K * r.K, 2 * r.K * r.dK_over_xi)


BPS_PROFILE = BPSProfile()
PROFILES = {p.name: p for p in (BPS_PROFILE, SquaredKProfile())}


@dataclass(frozen=True)
class MonopoleConfig:
    e: float = 1.0
    v: float = 1.0
    lambda_h: float = 0.0
    profile: object = BPS_PROFILE
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.e > 0:
            raise ParameterError(f"gauge coupling e must be > 0, got {self.e}")
        if not self.v >= 0:
            raise ParameterError(f"Higgs vev v must be >= 0, got {self.v}")
        if not self.lambda_h >= 0:
            raise ParameterError(f"lambda_H must be >= 0, got {self.lambda_h}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def is_bps(self) -> bool:
        return self.lambda_h == 0.0

    def translated(self, shift) -> "MonopoleConfig":
        c = np.asarray(self.center) + np.asarray(shift, dtype=float)
        return MonopoleConfig(self.e, self.v, self.lambda_h, self.profile, tuple(c))


@dataclass(frozen=True)
class FieldSample:
    x: np.ndarray
    A: np.ndarray
    phi: np.ndarray
    F: np.ndarray | None = field(default=None, repr=False)
    Dphi: np.ndarray | None = field(default=None, repr=False)

    @property
    def B(self) -> np.ndarray:
        """B_k^a = 1/2 eps_kij F_ij^a."""
        if self.F is None:
            raise ValueError("sample carries no field strength")
        return 0.5 * np.einsum("kij,ija->ka", EPS, self.F)


def _points(x) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    return X.reshape(1, 3) if X.ndim == 1 else X


def hedgehog_arrays(cfg: MonopoleConfig, X: np.ndarray) -> tuple:
    """A (N, 3, 3) and phi (N, 3) at the rows of X."""
    Y = _points(X) - np.asarray(cfg.center)
    ve = cfg.v * cfg.e
    pref = cfg.v * ve
    red = cfg.profile.reduced(ve * np.linalg.norm(Y, axis=1))
    phi = Y * (pref * red.eta)[:, None]
    A = np.einsum("ami,nm->nia", EPS, Y) * (pref * red.G)[:, None, None]
    return A, phi


def hedgehog_derivatives(cfg: MonopoleConfig, X: np.ndarray) -> tuple:
    """Analytic dA[n, j, i, a] = d_j A_i^a and dphi[n, i, a] = d_i phi^a."""
    Y = _points(X) - np.asarray(cfg.center)
    ve = cfg.v * cfg.e
    pref = cfg.v * ve
    red = cfg.profile.reduced(ve * np.linalg.norm(Y, axis=1))
    eye = np.eye(3)
    dphi = pref * (
        eye[None] * red.eta[:, None, None]
        + np.einsum("na,ni->nia", Y, Y) * (ve**2 * red.eta1)[:, None, None]
    )
    dA = pref * (
        np.einsum("aji->jia", EPS)[None] * red.G[:, None, None, None]
        + np.einsum("ami,nm,nj->njia", EPS, Y, Y) * (ve**2 * red.G1)[:, None, None, None]
    )
    return dA, dphi


def hedgehog_fields(cfg: MonopoleConfig, x) -> FieldSample:
    """Hedgehog gauge and Higgs fields at a single point (regular at the center)."""
    A, phi = hedgehog_arrays(cfg, x)
    return FieldSample(np.asarray(x, dtype=float), A[0], phi[0])


def field_strengths(A, dA, phi, dphi, e: float) -> tuple:
    """F (N, 3, 3, 3)[i, j, a] and D phi (N, 3, 3)[i, a] from fields and first derivatives."""
    curl = np.einsum("nija->nija", dA) - np.einsum("njia->nija", dA)
    F = curl - e * np.einsum("abc,nib,njc->nija", EPS, A, A)
    Dphi = dphi - e * np.einsum("abc,nib,nc->nia", EPS, A, phi)
    return F, Dphi


def _fd_derivatives(cfg: MonopoleConfig, X: np.ndarray, h: float) -> tuple:
    if h < MIN_FD_STEP:
        raise ParameterError(f"finite-difference step {h} below {MIN_FD_STEP}")
    X = _points(X)
    n = X.shape[0]
    dA = np.empty((n, 3, 3, 3))
    dphi = np.empty((n, 3, 3))
    for j in range(3):
        step = np.zeros(3)
        step[j] = h
        Ap, php = hedgehog_arrays(cfg, X + step)
        Am, phm = hedgehog_arrays(cfg, X - step)
        dA[:, j] = (Ap - Am) / (2 * h)
        dphi[:, j] = (php - phm) / (2 * h)
    return dA, dphi


def strength_arrays(cfg: MonopoleConfig, X, mode: str = "analytic", h: float = 1e-4) -> tuple:
    """A, phi, F, D phi at the rows of X; mode is "analytic" or "fd"."""
    X = _points(X)
    A, phi = hedgehog_arrays(cfg, X)
    if mode == "analytic":
        dA, dphi = hedgehog_derivatives(cfg, X)
    elif mode == "fd":
        dA, dphi = _fd_derivatives(cfg, X, h)
    else:
        raise ValueError(f"unknown derivative mode {mode!r}")
    F, Dphi = field_strengths(A, dA, phi, dphi, cfg.e)
    return A, phi, F, Dphi


def strengths(cfg: MonopoleConfig, x, mode: str = "analytic", h: float = 1e-4) -> FieldSample:
    A, phi, F, Dphi = strength_arrays(cfg, x, mode, h)
    return FieldSample(np.asarray(x, dtype=float), A[0], phi[0], F[0], Dphi[0])


def magnetic_field(F: np.ndarray) -> np.ndarray:
    return 0.5 * np.einsum("kij,nija->nka", EPS, F)


def gauge_rotate(sample: FieldSample, R: np.ndarray) -> FieldSample:
    """Constant gauge rotation acting on the su(2) index of every field."""
    R = np.asarray(R, dtype=float)
    F = None if sample.F is None else np.einsum("ab,ijb->ija", R, sample.F)
    Dphi = None if sample.Dphi is None else sample.Dphi @ R.T
    return FieldSample(sample.x, sample.A @ R.T, R @ sample.phi, F, Dphi)


@dataclass(frozen=True)
class GaugeInvariants:
    phi_norm: float
    tr_f2: float
    energy_density: float


def gauge_invariants(sample: FieldSample, lambda_h: float = 0.0, v: float = 0.0) -> GaugeInvariants:
    """|phi|, Tr F_ij F_ij with Tr(T^a T^b) = delta_ab / 2, and the static energy density."""
    phi2 = float(sample.phi @ sample.phi)
    tr_f2 = 0.5 * float(np.sum(sample.F**2))
    density = 0.5 * (float(np.sum(sample.B**2)) + float(np.sum(sample.Dphi**2)))
    density += 0.25 * lambda_h * (phi2 - v * v) ** 2
    return GaugeInvariants(math.sqrt(phi2), tr_f2, density)


@dataclass(frozen=True)
class GridSpec:
    n: int = 20
    half_width: float = 5.0
    r_min: float = 0.1

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"grid needs at least 2 points per axis, got {self.n}")
        if not self.half_width > 0:
            raise ParameterError(f"half_width must be > 0, got {self.half_width}")

    def points(self) -> np.ndarray:
        axis = np.linspace(-self.half_width, self.half_width, self.n)
        X = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
        return X[np.linalg.norm(X, axis=1) >= self.r_min]

    @property
    def cell_volume(self) -> float:
        return (2 * self.half_width / (self.n - 1)) ** 3


@dataclass(frozen=True)
class BogomolnyResidual:
    residual_max: float
    residual_l2: float
    branch: int
    other_branch_max: float
    points: int


def bogomolny_residual_at(
    cfg: MonopoleConfig, X, mode: str = "analytic", h: float = 1e-4, branch: int = 1,
) -> np.ndarray:
    """Pointwise max_{i,a} |B_i^a - branch * D_i phi^a|."""
    if not cfg.is_bps:
        raise ModeError("Bogomolny equation requires the BPS limit lambda_H = 0")
    _, _, F, Dphi = strength_arrays(cfg, X, mode, h)
    res = magnetic_field(F) - branch * Dphi
    return np.max(np.abs(res), axis=(1, 2))


def bogomolny_residual(
    cfg: MonopoleConfig, grid: GridSpec | None = None, mode: str = "analytic", h: float = 1e-4,
) -> BogomolnyResidual:
    """Residual of (1/2) eps_ijk F_jk^a = +/- D_i phi^a over a Cartesian grid."""
    if not cfg.is_bps:
        raise ModeError("Bogomolny equation requires the BPS limit lambda_H = 0")
    grid = grid or GridSpec()
    X = grid.points() + np.asarray(cfg.center)
    _, _, F, Dphi = strength_arrays(cfg, X, mode, h)
    B = magnetic_field(F)
    plus, minus = B - Dphi, B + Dphi
    best, other = (plus, minus) if np.max(np.abs(plus)) <= np.max(np.abs(minus)) else (minus, plus)
    branch = 1 if best is plus else -1
    l2 = math.sqrt(float(np.sum(best**2)) * grid.cell_volume)
    return BogomolnyResidual(
        residual_max=float(np.max(np.abs(best))),
        residual_l2=l2,
        branch=branch,
        other_branch_max=float(np.max(np.abs(other))),
        points=X.shape[0],
    )


def fd_convergence(cfg: MonopoleConfig, X, steps=(1e-2, 5e-3)) -> list:
    """Rows of (h, residual_max, residual_l2) for finite-difference strengths."""
    rows = []
    for h in steps:
        res = bogomolny_residual_at(cfg, X, mode="fd", h=h)
        rows.append((float(h), float(np.max(res)), float(math.sqrt(np.mean(res**2)))))
    return rows


def energy_density(cfg: MonopoleConfig, r, direction=DEFAULT_DIRECTION) -> np.ndarray:
    """Static energy density 1/2 (|B|^2 + |D phi|^2) (+ Higgs potential) at radius r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    X = np.asarray(cfg.center) + r[:, None] * np.asarray(direction)[None, :]
    A, phi, F, Dphi = strength_arrays(cfg, X)
    B = magnetic_field(F)
    dens = 0.5 * (np.sum(B**2, axis=(1, 2)) + np.sum(Dphi**2, axis=(1, 2)))
    if cfg.lambda_h:
        dens = dens + 0.25 * cfg.lambda_h * (np.sum(phi**2, axis=1) - cfg.v**2) ** 2
    return dens


def profile_table(cfg: MonopoleConfig, r_values) -> list:
    """Rows r, H, K, |phi|, energy density sorted by r."""
    r = np.sort(np.asarray(r_values, dtype=float))
    H, K = cfg.profile.hk(cfg.v * cfg.e * r)
    X = np.asarray(cfg.center) + r[:, None] * DEFAULT_DIRECTION[None, :]
    _, phi = hedgehog_arrays(cfg, X)
    dens = energy_density(cfg, r)
    norms = np.linalg.norm(phi, axis=1)
    return [
        (float(a), float(b), float(c), float(d), float(f))
        for a, b, c, d, f in zip(r, np.atleast_1d(H), np.atleast_1d(K), norms, dens)
    ]


def write_rows_csv(header, rows, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class ChargeReport:
    g: float
    q: float
    M: float
    k: int
    k_distance: float
    energy_error: float
    coulomb_tail: float


def total_energy(cfg: MonopoleConfig, r_max: float) -> tuple:
    """(E, quadrature error, tail) with the Coulomb tail 4 pi / (e^2 r_max) added in BPS mode."""

    def integrand(r):
        return 4 * math.pi * r * r * float(energy_density(cfg, r)[0])

    ve = cfg.v * cfg.e
    breaks = [p / ve for p in (1.0, 5.0, 20.0) if p / ve < r_max] if ve > 0 else []
    value, err = quad(integrand, 0.0, r_max, points=breaks or None, limit=400,
                      epsabs=1e-11, epsrel=1e-11)
    tail = 4 * math.pi / (cfg.e**2 * r_max) if cfg.is_bps else 0.0
    total = value + tail
    if err > 1e-6 * max(1.0, abs(total)):
        raise AccuracyError(f"energy quadrature error {err:.2e} above tolerance")
    logger.debug("energy quadrature: %.12g +/- %.2e, tail %.6g", value, err, tail)
    return total, err, tail


def surface_flux(cfg: MonopoleConfig, radius: float, n_theta: int = 48, n_phi: int = 96) -> float:
    """Flux of the Higgs-projected magnetic field, sum_a phi_hat^a B_i^a n_i, through a sphere."""
    nodes, weights = roots_legendre(n_theta)
    phis = (np.arange(n_phi) + 0.5) * (2 * math.pi / n_phi)
    ct = np.repeat(nodes, n_phi)
    st = np.sqrt(1 - ct**2)
    ph = np.tile(phis, n_theta)
    normals = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
    X = np.asarray(cfg.center) + radius * normals
    _, phi, F, _ = strength_arrays(cfg, X)
    B = magnetic_field(F)
    phi_hat = phi / np.linalg.norm(phi, axis=1)[:, None]
    integrand = np.einsum("na,nia,ni->n", phi_hat, B, normals) * radius**2
    w = np.repeat(weights, n_phi) * (2 * math.pi / n_phi)
    return float(np.sum(w * integrand))


def energy_and_charge(cfg: MonopoleConfig, r_max: float = 40.0, flux_radius: float | None = None):
    """Energy by radial quadrature and magnetic charge from the surface flux."""
    if r_max * cfg.v * cfg.e < 20:
        raise ParameterError(f"r_max * v * e = {r_max * cfg.v * cfg.e:g} must be >= 20")
    energy, err, tail = total_energy(cfg, r_max)
    g = surface_flux(cfg, flux_radius or r_max)
    k_real = cfg.e * g / (4 * math.pi)
    k = int(round(k_real))
    return ChargeReport(
        g=g, q=0.0, M=energy, k=k, k_distance=abs(k_real - k), energy_error=err, coulomb_tail=tail,
    )


def bogomolny_bound(v: float, g: float, q: float) -> float:
    """M = v sqrt(g^2 + q^2)."""
    if v < 0:
        raise ParameterError(f"v must be >= 0, got {v}")
    return v * math.hypot(g, q)


@dataclass(frozen=True)
class ProjectedField:
    F: np.ndarray
    B: np.ndarray
    k0: float
    phi_norm: float


def abelian_projection(
    cfg: MonopoleConfig, x, h: float = 1e-5, normalization: str = "vev", threshold: float = 1e-6,
) -> ProjectedField:
    """'t Hooft field strength along the Higgs direction and the static magnetic charge density.

    The charge density uses 1 / (2 a^3 e) with a the asymptotic vev ("vev") or the local
    |phi| ("pointwise").
    """
    x = np.asarray(x, dtype=float)
    _, phi = hedgehog_arrays(cfg, x)
    a = float(np.linalg.norm(phi[0]))
    if a < threshold * max(cfg.v, 1.0):
        raise ProjectionSingularError(f"|phi| = {a:.3e} too small at {x.tolist()}")
    h = h * max(1.0, float(np.linalg.norm(x - np.asarray(cfg.center))))

    def abelian_potential(X):
        A, ph = hedgehog_arrays(cfg, X)
        return np.einsum("nia,na->ni", A, ph) / np.linalg.norm(ph, axis=1)[:, None]

    stencil = np.concatenate([x + h * np.eye(3), x - h * np.eye(3)])
    Ae = abelian_potential(stencil)
    _, ph = hedgehog_arrays(cfg, stencil)
    dAe = (Ae[:3] - Ae[3:]) / (2 * h)
    dphi = (ph[:3] - ph[3:]) / (2 * h)
    hooft = np.einsum("abc,a,ib,jc->ij", EPS, phi[0], dphi, dphi) / (a**3 * cfg.e)
    F = dAe - dAe.T + hooft
    B = 0.5 * np.einsum("kij,ij->k", EPS, F)
    scale = cfg.v if normalization == "vev" else a
    if normalization not in ("vev", "pointwise"):
        raise ValueError(f"unknown normalization {normalization!r}")
    k0 = 3.0 * float(np.linalg.det(dphi)) / (scale**3 * cfg.e)
    return ProjectedField(F, B, k0, a)


@dataclass(frozen=True)
class CurrentReport:
    total: float
    expected: float
    ratio: float
    excluded: float


def magnetic_charge_in_ball(
    cfg: MonopoleConfig, radius: float, normalization: str = "vev", direction=DEFAULT_DIRECTION,
) -> CurrentReport:
    """Volume integral of k0 over |x| < radius; the origin shell is added back analytically."""
    ve = cfg.v * cfg.e
    r_ex = 0.1 / ve
    direction = np.asarray(direction, dtype=float)
    center = np.asarray(cfg.center)

    def integrand(r):
        k0 = abelian_projection(cfg, center + r * direction, normalization=normalization).k0
        return 4 * math.pi * r * r * k0

    breaks = [p / ve for p in (1.0, 10.0, 100.0) if r_ex < p / ve < radius]
    value, err = quad(integrand, r_ex, radius, points=breaks or None, limit=400,
                      epsabs=1e-10, epsrel=1e-9)
    # inside the shell the image of phi is a ball of radius |phi(r_ex)|
    _, phi_ex = hedgehog_arrays(cfg, center + r_ex * direction)
    excluded = 0.0
    if normalization == "vev":
        excluded = 4 * math.pi / cfg.e * (float(np.linalg.norm(phi_ex)) / cfg.v) ** 3
    total = value + excluded
    expected = 4 * math.pi / cfg.e
    logger.debug("magnetic current integral %.10g +/- %.2e", value, err)
    return CurrentReport(total, expected, total / expected, excluded)


@dataclass(frozen=True)
class DiracSample:
    potential: float
    B: np.ndarray


def dirac_field(k: int, x) -> DiracSample:
    """Abelian Bogomolny reduction: B = grad phi with phi = k / (2 r)."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r == 0:
        raise DomainError("Dirac monopole field is singular at r = 0")
    return DiracSample(k / (2 * r), -k * x / (2 * r**3))


def dirac_flux(k: int, radius: float = 1.0, n_theta: int = 24, n_phi: int = 48) -> float:
    nodes, weights = roots_legendre(n_theta)
    total = 0.0
    for ct, w in zip(nodes, weights):
        st = math.sqrt(1 - ct * ct)
        for j in range(n_phi):
            p = (j + 0.5) * 2 * math.pi / n_phi
            n = np.array([st * math.cos(p), st * math.sin(p), ct])
            total += w * (2 * math.pi / n_phi) * float(dirac_field(k, radius * n).B @ n) * radius**2
    return total


def dirac_gradient_residual(k: int, x, h: float = 1e-5) -> float:
    """max |B - grad phi| with central differences."""
    x = np.asarray(x, dtype=float)
    grad = np.empty(3)
    for i in range(3):
        step = np.zeros(3)
        step[i] = h
        up, down = dirac_field(k, x + step), dirac_field(k, x - step)
        grad[i] = (up.potential - down.potential) / (2 * h)
    return float(np.max(np.abs(dirac_field(k, x).B - grad)))


@dataclass(frozen=True)
class BumpGenerator:
    """epsilon^a(x) = amplitude^a exp(-1 / (1 - s^2)) with s = |x - center| / radius."""

    center: tuple = (1.5, 0.5, 0.3)
    radius: float = 1.0
    amplitude: tuple = (0.3, -0.2, 0.5)

    def values(self, X: np.ndarray) -> np.ndarray:
        s2 = np.sum((X - np.asarray(self.center)) ** 2, axis=1) / self.radius**2
        inside = s2 < 1
        b = np.zeros_like(s2)
        b[inside] = np.exp(-1 / (1 - s2[inside]))
        return b[:, None] * np.asarray(self.amplitude)[None, :]

    def gradient(self, X: np.ndarray) -> np.ndarray:
        """d_i eps^a as (N, 3, 3)[i, a]."""
        Y = X - np.asarray(self.center)
        s2 = np.sum(Y**2, axis=1) / self.radius**2
        inside = s2 < 1
        db = np.zeros_like(s2)
        u = 1 - s2[inside]
        db[inside] = np.exp(-1 / u) * (-2 / u**2) / self.radius**2
        # d/dx_i b(s^2) = b'(s^2) * 2 Y_i / radius^2 folded into db
        return (db[:, None] * Y)[:, :, None] * np.asarray(self.amplitude)[None, None, :]


@dataclass(frozen=True)
class LinearizedReport:
    linearized: float
    orthogonality: float
    norm: float


def _cross(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.einsum("abc,...b,...c->...a", EPS, u, w)


def linearized_residuals(
    cfg: MonopoleConfig, eps: BumpGenerator, h: float = 1e-4, n: int = 9,
) -> LinearizedReport:
    """Linearized Bogomolny and gauge-orthogonality residuals of the gauge direction of eps.

    The tangent is a_i = D_i eps, psi = e eps x phi; derivatives of (a, psi) use a
    fourth-order stencil with step h.
    """
    c = np.asarray(eps.center, dtype=float)
    r_ex = 0.1 / (cfg.v * cfg.e)
    if np.linalg.norm(c - np.asarray(cfg.center)) - eps.radius <= r_ex:
        raise DomainError("support of the gauge generator touches the origin exclusion ball")
    e = cfg.e

    def tangent(X):
        A, phi = hedgehog_arrays(cfg, X)
        ev = eps.values(X)
        a = eps.gradient(X) - e * _cross(A, ev[:, None, :])
        psi = e * _cross(ev, phi)
        return a, psi

    # the outer shell of the support is skipped, bump derivatives blow up there
    axis = np.linspace(-0.9, 0.9, n) * eps.radius
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    grid = grid[np.linalg.norm(grid, axis=1) <= 0.9 * eps.radius] + c
    A, phi = hedgehog_arrays(cfg, grid)
    a, psi = tangent(grid)

    # d_j a_k^b -> da[n, j, k, b]; d_j psi^b -> dpsi[n, j, b]
    da = np.empty((grid.shape[0], 3, 3, 3))
    dpsi = np.empty((grid.shape[0], 3, 3))
    for j in range(3):
        step = np.zeros(3)
        step[j] = h
        vals = [tangent(grid + m * step) for m in (-2, -1, 1, 2)]
        da[:, j] = (vals[0][0] - 8 * vals[1][0] + 8 * vals[2][0] - vals[3][0]) / (12 * h)
        dpsi[:, j] = (vals[0][1] - 8 * vals[1][1] + 8 * vals[2][1] - vals[3][1]) / (12 * h)

    # covariant derivatives D_j X = d_j X - e A_j x X
    Da = da - e * _cross(A[:, :, None, :], a[:, None, :, :])
    Dpsi = dpsi - e * _cross(A, psi[:, None, :])
    curl = 0.5 * np.einsum("ijk,njka->nia", EPS, Da - np.einsum("njka->nkja", Da))
    lin = curl - Dpsi + e * _cross(a, phi[:, None, :])
    orth = np.einsum("niia->na", Da) - e * _cross(phi, psi)

    cell = (axis[1] - axis[0]) ** 3
    norm = math.sqrt(float(np.sum(a**2) + np.sum(psi**2)) * cell)
    return LinearizedReport(float(np.max(np.abs(lin))), float(np.max(np.abs(orth))), norm)
