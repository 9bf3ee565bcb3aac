"""Cartan-frame geometry of diagonal Bianchi IX metrics built from a DH triad.

Everything is computed in the orthonormal coframe

    theta^0 = sqrt|P| dt,    theta^i = (sqrt|P| / Theta^i) sigma^i,    P = Theta^1 Theta^2 Theta^3,

whose exterior derivatives are algebraic: d theta^a = -1/2 C^a_bc theta^b ^ theta^c with
structure functions C depending on t only. A p-form is stored as its antisymmetric frame
components (F = 1/2 F_bc theta^b ^ theta^c for 2-forms).
"""

import csv
import itertools
import logging
import math
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from halphen.config import SIN_ALPHA_BAND
from halphen.darboux_halphen import TriadProvider
from halphen.errors import DomainError, EmptyDomainError

logger = logging.getLogger(__name__)

# d sigma^i = MC_SIGN * 1/2 eps_ijk sigma^j ^ sigma^k, fixed by the finite-difference check.
MC_SIGN = -1.0

GEOMETRY_CSV_HEADER = ("t", "asd_residual", "ricci_maxabs", "f0sq", "f1sq", "f2sq", "f3sq")

CYCLIC = ((1, 2, 3), (2, 3, 1), (3, 1, 2))
# imaginary step for derivatives of the frame curvature
COMPLEX_STEP = 1e-30


def levi_civita(n: int) -> np.ndarray:
    """Totally antisymmetric symbol with eps[0, 1, ..., n-1] = +1."""
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        eps[perm] = _parity(perm)
    return eps


def _parity(perm) -> float:
    perm = list(perm)
    sign = 1.0
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


EPS3 = levi_civita(3)
EPS4 = levi_civita(4)


@dataclass(frozen=True)
class EulerPoint:
    alpha: float
    beta: float
    psi: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= math.pi:
            raise DomainError(f"alpha = {self.alpha} outside [0, pi]")
        if not 0.0 <= self.beta <= 2 * math.pi:
            raise DomainError(f"beta = {self.beta} outside [0, 2 pi]")
        if not 0.0 <= self.psi <= 4 * math.pi:
            raise DomainError(f"psi = {self.psi} outside [0, 4 pi]")


def sigma_components(alpha: float, psi: float) -> np.ndarray:
    """Rows sigma^1..3, columns (d alpha, d beta, d psi); no beta dependence."""
    sa, ca = math.sin(alpha), math.cos(alpha)
    sp, cp = math.sin(psi), math.cos(psi)
    return np.array([
        [cp, sa * sp, 0.0],
        [-sp, sa * cp, 0.0],
        [0.0, ca, 1.0],
    ])


@dataclass(frozen=True)
class MaurerCartan:
    components: np.ndarray
    structure_residual: float
    volume: float


def maurer_cartan_at(
    p: EulerPoint, h: float = 1e-5, band: float = SIN_ALPHA_BAND,
) -> MaurerCartan:
    """Left-invariant forms at p and the finite-difference structure-equation residual."""
    if abs(math.sin(p.alpha)) < band:
        raise DomainError(f"|sin alpha| = {abs(math.sin(p.alpha)):.2e} inside exclusion band")
    coords = np.array([p.alpha, p.beta, p.psi])

    def comps(x):
        return sigma_components(x[0], x[2])

    sig = comps(coords)
    # partial[mu, i, nu] = d sigma^i_nu / d x^mu
    partial = np.empty((3, 3, 3))
    for mu in range(3):
        step = np.zeros(3)
        step[mu] = h
        partial[mu] = (comps(coords + step) - comps(coords - step)) / (2 * h)
    d_sigma = np.einsum("mkn->kmn", partial) - np.einsum("nkm->kmn", partial)
    wedge = np.einsum("jm,kn->jkmn", sig, sig) - np.einsum("jn,km->jkmn", sig, sig)
    quad = 0.5 * np.einsum("ijk,jkmn->imn", EPS3, wedge)
    residual = float(np.max(np.abs(d_sigma - MC_SIGN * quad)))
    return MaurerCartan(sig, residual, float(np.linalg.det(sig)))


@dataclass(frozen=True)
class FrameData:
    """Coframe scale factors at t and everything needed for algebraic exterior derivatives."""

    t: float
    theta: np.ndarray
    lapse: float
    widths: np.ndarray
    C: np.ndarray
    C_dot: np.ndarray


@dataclass
class CoframeMetric:
    """Diagonal Bianchi IX metric of a triad provider.

    ``sign`` is the overall factor applied to the literal coefficients P, Theta^j Theta^k /
    Theta^i; it is sgn(P) on the positivity domain when ``normalize_sign`` is set.
    """

    provider: TriadProvider
    domain: tuple
    sign: float
    normalize_sign: bool

    @property
    def label(self) -> str:
        return self.provider.label

    def literal_coefficients(self, t: float) -> np.ndarray:
        return literal_coefficients(self.provider.theta(t))

    def coefficients(self, t: float) -> np.ndarray:
        return self.sign * self.literal_coefficients(t)

    def contains(self, t: float) -> bool:
        lo, hi = self.domain
        return lo <= t <= hi

    def frame(self, t: float) -> FrameData:
        if not self.contains(t):
            raise DomainError(f"t = {t} outside positivity domain {self.domain}")
        th, d1, d2 = (np.asarray(v, dtype=float) for v in self.provider.jet(t))
        return _frame_data(t, th, d1, d2)


def literal_coefficients(theta) -> np.ndarray:
    """(f0^2, f1^2, f2^2, f3^2) = (P, Theta^2 Theta^3 / Theta^1, ...)."""
    a, b, c = theta
    return np.array([a * b * c, b * c / a, c * a / b, a * b / c])


def _frame_data(t: float, th: np.ndarray, d1: np.ndarray, d2: np.ndarray) -> FrameData:
    """Structure functions from the jet; complex jets are carried through for complex steps."""
    P = np.prod(th)
    lapse = np.sqrt(np.sign(np.real(P)) * P)
    widths = lapse / th
    r1 = d1 / th
    r1_dot = d2 / th - r1**2
    s1 = np.sum(r1)
    s1_dot = np.sum(r1_dot)
    ell0 = 0.5 * s1
    ell = 0.5 * s1 - r1
    ell_dot = 0.5 * s1_dot - r1_dot

    dtype = np.result_type(th, d1, d2)
    C = np.zeros((4, 4, 4), dtype=dtype)
    C_dot = np.zeros((4, 4, 4), dtype=dtype)
    for i, j, k in CYCLIC:
        m = i - 1
        C[i, 0, i] = -ell[m] / lapse
        C[i, i, 0] = ell[m] / lapse
        C_dot[i, 0, i] = -(ell_dot[m] - ell[m] * ell0) / lapse
        C_dot[i, i, 0] = -C_dot[i, 0, i]
        mu = widths[i - 1] / (widths[j - 1] * widths[k - 1])
        mu_dot = mu * (ell[i - 1] - ell[j - 1] - ell[k - 1])
        C[i, j, k], C[i, k, j] = mu, -mu
        C_dot[i, j, k], C_dot[i, k, j] = mu_dot, -mu_dot
    return FrameData(t, th, lapse, widths, C, C_dot)


def _positive_runs(mask: np.ndarray) -> tuple:
    best, start, best_len = None, None, 0
    for idx, ok in enumerate(list(mask) + [False]):
        if ok and start is None:
            start = idx
        elif not ok and start is not None:
            if idx - start > best_len:
                best, best_len = (start, idx - 1), idx - start
            start = None
    return best


def build_coframe_metric(
    provider: TriadProvider,
    interval: tuple = (0.5, 3.0),
    samples: int = 101,
    normalize_sign: bool = True,
) -> CoframeMetric:
    """Scan the provider and record the longest positivity run of the coefficients."""
    ts = np.linspace(interval[0], interval[1], samples)
    coeffs = []
    for t in ts:
        with np.errstate(divide="ignore", invalid="ignore"):
            coeffs.append(literal_coefficients(provider.theta(t)))
    coeffs = np.array(coeffs)
    finite = np.all(np.isfinite(coeffs), axis=1)
    signs = np.sign(coeffs[:, 0])
    if normalize_sign:
        sign_candidates = (1.0, -1.0)
    else:
        sign_candidates = (1.0,)
    best = None
    for s in sign_candidates:
        mask = finite & np.all(s * coeffs > 0, axis=1)
        if normalize_sign:
            mask &= signs == s
        run = _positive_runs(mask)
        if run and (best is None or run[1] - run[0] > best[1][1] - best[1][0]):
            best = (s, run)
    if best is None:
        raise EmptyDomainError(
            f"{provider.label}: no subinterval of [{interval[0]}, {interval[1]}] with all "
            "metric coefficients positive"
        )
    sign, (i0, i1) = best
    domain = (float(ts[i0]), float(ts[i1]))
    logger.debug("%s: positivity domain %s with sign %+.0f", provider.label, domain, sign)
    return CoframeMetric(provider, domain, sign, normalize_sign)


@dataclass(frozen=True)
class Connection:
    """Levi-Civita connection: omega_ab = gamma[a, b, c] theta^c."""

    frame: FrameData
    gamma: np.ndarray
    gamma_dot: np.ndarray
    torsion_residual: float

    @property
    def t(self) -> float:
        return self.frame.t


def _christoffel(C: np.ndarray) -> np.ndarray:
    # Gamma_abc = 1/2 (-C_abc - C_bca + C_cab)
    return 0.5 * (-C - np.einsum("bca->abc", C) + np.einsum("cab->abc", C))


def torsion(frame: FrameData, gamma: np.ndarray) -> np.ndarray:
    """T^a_bc of d theta^a + omega_ab ^ theta^b."""
    return -frame.C + np.einsum("acb->abc", gamma) - gamma


def solve_connection(m: CoframeMetric, t: float) -> Connection:
    """Solve Cartan's first structure equation algebraically in the frame."""
    frame = m.frame(t)
    gamma = _christoffel(frame.C)
    gamma_dot = _christoffel(frame.C_dot)
    residual = float(np.max(np.abs(torsion(frame, gamma))))
    return Connection(frame, gamma, gamma_dot, residual)


def d_one_form(alpha: np.ndarray, alpha_dot: np.ndarray, frame: FrameData) -> np.ndarray:
    """Exterior derivative of alpha_a theta^a whose components depend on t only.

    Works on stacked forms: the frame index is the last axis of ``alpha``.
    """
    out = -np.einsum("...e,ebc->...bc", alpha, frame.C)
    e0 = alpha_dot / frame.lapse
    out[..., 0, :] += e0
    out[..., :, 0] -= e0
    return out


def wedge11(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return np.einsum("...b,...c->...bc", alpha, beta) - np.einsum("...c,...b->...bc", alpha, beta)


@dataclass(frozen=True)
class Curvature:
    """Riemann tensor R[a, b, c, d]: the curvature 2-form R_ab has components R[a, b, :, :]."""

    t: float
    riemann: np.ndarray

    @property
    def two_forms(self) -> np.ndarray:
        return self.riemann


def _riemann(frame: FrameData, g: np.ndarray, g_dot: np.ndarray) -> np.ndarray:
    d_omega = d_one_form(g, g_dot, frame)
    quad = np.einsum("amc,mbd->abcd", g, g) - np.einsum("amd,mbc->abcd", g, g)
    return d_omega + quad


def curvature(conn: Connection) -> Curvature:
    """R_ab = d omega_ab + omega_ac ^ omega_cb."""
    return Curvature(conn.t, _riemann(conn.frame, conn.gamma, conn.gamma_dot))


def riemann_at(m: CoframeMetric, t: float) -> np.ndarray:
    return curvature(solve_connection(m, t)).riemann


def ricci_tensor(R: np.ndarray) -> np.ndarray:
    return np.einsum("abad->bd", R)


def ricci(m: CoframeMetric, t: float) -> np.ndarray:
    """Frame Ricci tensor R_bd = R^a_bad."""
    return ricci_tensor(riemann_at(m, t))


def first_bianchi_residual(R: np.ndarray) -> float:
    """max |R_abcd + R_acdb + R_adbc| (R_ab ^ theta^b = 0)."""
    cyc = R + np.einsum("acdb->abcd", R) + np.einsum("adbc->abcd", R)
    return float(np.max(np.abs(cyc)))


def _d_two_form(F: np.ndarray, F_dot: np.ndarray, frame: FrameData) -> np.ndarray:
    """(dF)_abc = cyclic[e_a(F_bc) - C^d_ab F_dc] for t-dependent frame components."""
    e = np.zeros(F.shape[:-2] + (4,) + F.shape[-2:])
    e[..., 0, :, :] = F_dot / frame.lapse
    term = e - np.einsum("dab,...dc->...abc", frame.C, F)
    return (
        term
        + np.einsum("...bca->...abc", term)
        + np.einsum("...cab->...abc", term)
    )


def second_bianchi_residual(m: CoframeMetric, t: float) -> float:
    """max |d R_ab + omega_ac ^ R_cb - R_ac ^ omega_cb| relative to its largest term.

    dR/dt is a complex step through the jet (Theta, Theta', Theta'', Theta'''). The residual
    is scaled by the largest of dR, omega ^ R and R ^ omega, since near the bolt the frame
    curvature is a small difference of large products.
    """
    if not m.contains(t):
        raise DomainError(f"t = {t} outside positivity domain {m.domain}")
    th, d1, d2 = (np.asarray(v, dtype=float) for v in m.provider.jet(t))
    d3 = np.asarray(m.provider.third(t), dtype=float)
    eps = COMPLEX_STEP
    stepped = _frame_data(t, th + 1j * eps * d1, d1 + 1j * eps * d2, d2 + 1j * eps * d3)
    R_dot = _riemann(stepped, _christoffel(stepped.C), _christoffel(stepped.C_dot)).imag / eps
    conn = solve_connection(m, t)
    R = curvature(conn).riemann
    dR = _d_two_form(R, R_dot, conn.frame)
    g = conn.gamma
    # omega_ac ^ R_cb: 1-form components g[a, c, :], 2-form R[c, b, :, :]
    w_R = (
        np.einsum("acx,cbyz->abxyz", g, R)
        + np.einsum("acy,cbzx->abxyz", g, R)
        + np.einsum("acz,cbxy->abxyz", g, R)
    )
    R_w = (
        np.einsum("cbx,acyz->abxyz", g, R)
        + np.einsum("cby,aczx->abxyz", g, R)
        + np.einsum("cbz,acxy->abxyz", g, R)
    )
    scale = max(1.0, *(float(np.max(np.abs(x))) for x in (dR, w_R, R_w)))
    return float(np.max(np.abs(dR + w_R - R_w))) / scale


def index_dual(X: np.ndarray, orientation: float = 1.0) -> np.ndarray:
    """X~_ab = 1/2 eps_abcd X_cd on the leading index pair."""
    return 0.5 * orientation * np.einsum("abcd,cd...->ab...", EPS4, X)


@dataclass(frozen=True)
class SDDecomposition:
    """s_i, a_i (rows of 1-form components) and S_i, A_i (2-form components)."""

    s: np.ndarray
    a: np.ndarray
    S: np.ndarray
    A: np.ndarray
    duality_residual: float
    structure_residual: float
    orientation: float


def _split(X: np.ndarray, orientation: float) -> tuple:
    plus = np.stack([0.5 * (X[0, i] + orientation * X[j, k]) for i, j, k in CYCLIC])
    minus = np.stack([0.5 * (X[0, i] - orientation * X[j, k]) for i, j, k in CYCLIC])
    return plus, minus


def sd_decompose(conn: Connection, curv: Curvature, orientation: float = 1.0) -> SDDecomposition:
    """Split connection and curvature into self-dual and anti-self-dual parts."""
    s, a = _split(conn.gamma, orientation)
    s_dot, a_dot = _split(conn.gamma_dot, orientation)
    S, A = _split(curv.riemann, orientation)

    # duality map: s, S are +1 eigenvectors, a, A are -1 eigenvectors
    gt, Rt = index_dual(conn.gamma, orientation), index_dual(curv.riemann, orientation)
    st, at = _split(gt, orientation)
    St, At = _split(Rt, orientation)
    duality = max(
        np.max(np.abs(st - s)), np.max(np.abs(at + a)),
        np.max(np.abs(St - S)), np.max(np.abs(At + A)),
    )

    ds, da = d_one_form(s, s_dot, conn.frame), d_one_form(a, a_dot, conn.frame)
    structure = 0.0
    for n, (i, j, k) in enumerate(CYCLIC):
        jj, kk = j - 1, k - 1
        S_rhs = ds[n] - 2 * orientation * wedge11(s[jj], s[kk])
        A_rhs = da[n] + 2 * orientation * wedge11(a[jj], a[kk])
        structure = max(
            structure, np.max(np.abs(S_rhs - S[n])), np.max(np.abs(A_rhs - A[n]))
        )
    return SDDecomposition(s, a, S, A, float(duality), float(structure), orientation)


def to_sigma_basis(alpha: np.ndarray, frame: FrameData) -> np.ndarray:
    """Express alpha_a theta^a over the invariant basis (dt, sigma^1, sigma^2, sigma^3)."""
    scale = np.concatenate(([frame.lapse], frame.widths))
    return alpha * scale


def connection_bracket(theta: np.ndarray, dtheta: np.ndarray) -> np.ndarray:
    """The bracket B_i with a_i = B_i / (4 sqrt|P|) theta^i; B_i = 2 Theta^i on DH solutions."""
    out = np.empty(3)
    for i, j, k in CYCLIC:
        a, b, c = i - 1, j - 1, k - 1
        out[a] = (
            (dtheta[a] - theta[b] * theta[c]) / theta[a]
            - (dtheta[b] - theta[c] * theta[a]) / theta[b]
            - (dtheta[c] - theta[a] * theta[b]) / theta[c]
        )
    return out


@dataclass(frozen=True)
class ASDReport:
    t: float
    asd: float
    selfdual: float
    a_half_sigma: float
    bracket: float
    torsion: float
    structure: float
    duality: float


def asd_report(m: CoframeMetric, t: float, orientation: float = 1.0) -> ASDReport:
    """Anti-self-duality diagnostics at t.

    ``a_half_sigma`` is max_i |a_i - 1/2 sigma^i| over the invariant basis and ``bracket``
    compares the connection a_i with the closed bracket expression.
    """
    conn = solve_connection(m, t)
    curv = curvature(conn)
    dec = sd_decompose(conn, curv, orientation)
    half = 0.0
    bracket = 0.0
    B = connection_bracket(conn.frame.theta, np.asarray(m.provider.jet(t)[1], dtype=float))
    for n, (i, _, _) in enumerate(CYCLIC):
        comps = to_sigma_basis(dec.a[n], conn.frame)
        target = np.zeros(4)
        target[i] = 0.5
        half = max(half, float(np.max(np.abs(comps - target))))
        a_bracket = B[i - 1] / (4 * conn.frame.lapse)
        bracket = max(bracket, abs(dec.a[n][i] - a_bracket))
    return ASDReport(
        t=t,
        asd=float(np.max(np.abs(dec.A))),
        selfdual=float(np.max(np.abs(dec.S))),
        a_half_sigma=half,
        bracket=float(bracket),
        torsion=conn.torsion_residual,
        structure=dec.structure_residual,
        duality=dec.duality_residual,
    )


def asd_residual(m: CoframeMetric, t: float) -> float:
    """max norm over i of the components of the 2-forms A_i."""
    return asd_report(m, t).asd


def geometry_sweep(m: CoframeMetric, t_values: Iterable[float]) -> list:
    """Rows of t, asd_residual, ricci_maxabs, f0sq..f3sq sorted by t."""
    rows = []
    for t in sorted(float(v) for v in t_values):
        f = m.coefficients(t)
        rows.append((
            t, asd_residual(m, t), float(np.max(np.abs(ricci(m, t)))), *(float(v) for v in f),
        ))
    return rows


def write_geometry_csv(rows: list, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(GEOMETRY_CSV_HEADER)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
