"""Eisenstein series and Jacobi theta nullwerte with rigorous truncation bounds."""

import cmath
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import zeta

from halphen.config import DEFAULT_MAX_TERMS, DEFAULT_TAIL_TOLERANCE, MIN_IM_TAU, get_max_terms
from halphen.errors import DomainError, ParameterError, TruncationError

logger = logging.getLogger(__name__)

EISENSTEIN_KINDS = ("E2", "E4", "E6")
THETA_KINDS = ("theta2", "theta3", "theta4")

# (coefficient c, divisor power k) in E_k = 1 + c * sum sigma_{k-1}(n) q^n
_EISENSTEIN = {"E2": (-24.0, 1), "E4": (240.0, 3), "E6": (-504.0, 5)}

_THETA_ALIASES = {
    "theta2": "theta2", "ϑ2": "theta2", "t2": "theta2",
    "theta3": "theta3", "ϑ3": "theta3", "t3": "theta3",
    "theta4": "theta4", "ϑ4": "theta4", "t4": "theta4",
}


@dataclass(frozen=True)
class SeriesParams:
    max_terms: int = DEFAULT_MAX_TERMS
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE

    def __post_init__(self):
        if self.max_terms < 1:
            raise ParameterError(f"max_terms must be >= 1, got {self.max_terms}")
        if not self.tail_tolerance > 0:
            raise ParameterError(f"tail_tolerance must be > 0, got {self.tail_tolerance}")


def default_series_params() -> SeriesParams:
    """SeriesParams honouring the HALPHEN_MAX_TERMS override."""
    return SeriesParams(max_terms=get_max_terms())


@dataclass(frozen=True)
class HalfPlanePoint:
    """A point tau of the upper half-plane with its cached nomes.

    ``q = exp(2 pi i tau)`` drives the Eisenstein series; the theta nullwerte are
    expanded in ``p = exp(i pi tau)`` so that theta3(i) = pi^(1/4) / Gamma(3/4).
    """

    tau: complex
    q: complex = field(init=False)
    p: complex = field(init=False)

    def __post_init__(self):
        tau = complex(self.tau)
        if not math.isfinite(tau.real) or not math.isfinite(tau.imag):
            raise DomainError(f"tau must be finite, got {tau}")
        if tau.imag < MIN_IM_TAU:
            raise DomainError(
                f"Im(tau) = {tau.imag:.6g} is below the evaluation floor {MIN_IM_TAU}"
            )
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "q", cmath.exp(2j * math.pi * tau))
        object.__setattr__(self, "p", cmath.exp(1j * math.pi * tau))


def half_plane_point(tau: complex | HalfPlanePoint) -> HalfPlanePoint:
    if isinstance(tau, HalfPlanePoint):
        return tau
    return HalfPlanePoint(complex(tau))


@dataclass(frozen=True)
class SeriesValue:
    value: complex
    tail_bound: float
    terms: int = 0


@lru_cache(maxsize=None)
def divisor_sigma(k: int, n_max: int) -> np.ndarray:
    """Return sigma_k(n) for n = 0..n_max by sieve (entry 0 is unused)."""
    sig = np.zeros(n_max + 1, dtype=np.float64)
    for d in range(1, n_max + 1):
        sig[d::d] += float(d) ** k
    sig.setflags(write=False)
    return sig


def _truncate(first_omitted: np.ndarray, ratio: np.ndarray, tol: float, what: str) -> tuple:
    """Smallest kept-term count whose geometric tail majorant is below tol.

    ``first_omitted[n]`` bounds the magnitude of the first dropped term when n terms are
    kept and ``ratio[n]`` bounds every later term-to-term ratio.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        bounds = np.where(ratio < 1.0, first_omitted / (1.0 - ratio), np.inf)
    ok = np.flatnonzero(bounds <= tol)
    if ok.size == 0:
        best = float(np.min(bounds))
        raise TruncationError(
            f"{what}: tail bound {best:.3e} exceeds tolerance {tol:.3e} "
            f"within {len(bounds) - 1} terms",
            tail_bound=best,
            terms=len(bounds) - 1,
        )
    n = int(ok[0])
    return n, float(bounds[n])


def _eisenstein_series(kind: str, pt: HalfPlanePoint, params: SeriesParams) -> SeriesValue:
    c, k = _EISENSTEIN[kind]
    r = abs(pt.q)
    n_max = params.max_terms
    kept = np.arange(0, n_max + 1, dtype=np.float64)
    # sigma_1(n) <= n^2 and sigma_m(n) <= zeta(m) n^m for m >= 2
    m, scale = (2, 1.0) if k == 1 else (k, float(zeta(k)))
    with np.errstate(under="ignore"):
        first = abs(c) * scale * (kept + 1.0) ** m * r ** (kept + 1.0)
    ratio = ((kept + 2.0) / (kept + 1.0)) ** m * r
    n, bound = _truncate(first, ratio, params.tail_tolerance, kind)
    if n == 0:
        return SeriesValue(1.0 + 0j, bound, 0)
    idx = np.arange(1, n + 1)
    sig = divisor_sigma(k, n_max)[1 : n + 1]
    value = 1.0 + c * np.sum(sig * pt.q ** idx)
    logger.debug("%s at tau=%s: %d terms, tail bound %.3e", kind, pt.tau, n, bound)
    return SeriesValue(complex(value), bound, n)


def eval_eisenstein(kind: str, p, params: SeriesParams | None = None) -> SeriesValue:
    """Evaluate E2, E4 or E6 by its truncated q-expansion."""
    if kind not in _EISENSTEIN:
        raise ValueError(f"unknown Eisenstein series {kind!r}; expected one of {EISENSTEIN_KINDS}")
    return _eisenstein_series(kind, half_plane_point(p), params or default_series_params())


def _theta_exponents(kind: str, count: int) -> np.ndarray:
    n = np.arange(count, dtype=np.float64)
    if kind == "theta2":
        return (n + 0.5) ** 2
    return (n + 1.0) ** 2


def _theta_series(kind: str, pt: HalfPlanePoint, params: SeriesParams, order: int) -> SeriesValue:
    """Term-wise tau-derivative of order ``order`` (0, 1, 2) of a theta nullwert."""
    rho = abs(pt.p)
    n_max = params.max_terms
    # exponents x_1, x_2, ... of the non-constant terms, one spare for the tail
    x = _theta_exponents(kind, n_max + 2)
    weight = (math.pi * x) ** order
    with np.errstate(under="ignore"):
        mags = 2.0 * weight * rho ** x
        # term ratios decrease monotonically in n for every order used here
        ratio = (x[1:] / x[:-1]) ** order * rho ** (x[1:] - x[:-1])
    n, bound = _truncate(mags[: n_max + 1], ratio[: n_max + 1], params.tail_tolerance, kind)
    constant = 1.0 if (kind != "theta2" and order == 0) else 0.0
    if n == 0:
        return SeriesValue(complex(constant), bound, 0)
    xs = x[:n]
    if kind == "theta2":
        # p^((j + 1/2)^2) = p^(1/4) p^(j (j + 1))
        j = np.arange(n)
        powers = cmath.exp(0.25j * math.pi * pt.tau) * pt.p ** (j * (j + 1))
    else:
        j = np.arange(1, n + 1)
        powers = pt.p ** (j * j)
        if kind == "theta4":
            powers = powers * np.where(j % 2 == 1, -1.0, 1.0)
    terms = (1j * math.pi * xs) ** order * powers
    value = constant + 2.0 * np.sum(terms)
    logger.debug("%s^(%d) at tau=%s: %d terms, tail bound %.3e", kind, order, pt.tau, n, bound)
    return SeriesValue(complex(value), bound, n)


def _theta_kind(kind: str) -> str:
    try:
        return _THETA_ALIASES[kind]
    except KeyError:
        raise ValueError(f"unknown theta kind {kind!r}; expected one of {THETA_KINDS}") from None


def eval_theta(kind: str, p, params: SeriesParams | None = None) -> SeriesValue:
    """Evaluate theta2, theta3 or theta4 at z = 0."""
    params = params or default_series_params()
    return _theta_series(_theta_kind(kind), half_plane_point(p), params, 0)


def theta_derivative(
    kind: str, p, params: SeriesParams | None = None, order: int = 1,
) -> SeriesValue:
    """d^order/dtau^order of a theta nullwert by term-wise differentiation."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    return _theta_series(
        _theta_kind(kind), half_plane_point(p), params or default_series_params(), order
    )


def _reduced_theta_sums(kind: str, pt: HalfPlanePoint, params: SeriesParams) -> tuple:
    """S, S', S'', S''' of theta = c p^a S(p), with S = 1 + sum_j s_j p^(e_j).

    Only the non-constant terms are differentiated, so every derivative is a sum of
    small terms and nothing cancels when p is small.
    """
    rho = abs(pt.p)
    n_max = params.max_terms
    j = np.arange(1, n_max + 3, dtype=np.float64)
    x = j * (j + 1) if kind == "theta2" else j * j
    coef = 1.0 if kind == "theta2" else 2.0
    n, bound = 0, 0.0
    for order in range(4):
        with np.errstate(under="ignore"):
            mags = coef * (math.pi * x) ** order * rho**x
            ratio = (x[1:] / x[:-1]) ** order * rho ** (x[1:] - x[:-1])
        k, b = _truncate(mags[: n_max + 1], ratio[: n_max + 1], params.tail_tolerance, kind)
        n, bound = max(n, k), max(bound, b)
    xs = x[:n]
    signs = np.where(np.arange(1, n + 1) % 2 == 1, -1.0, 1.0) if kind == "theta4" else 1.0
    terms = coef * signs * pt.p ** xs.astype(np.int64)
    sums = [1.0 + np.sum(terms)]
    sums += [np.sum((1j * math.pi * xs) ** order * terms) for order in (1, 2, 3)]
    return tuple(complex(s) for s in sums), bound, n


@dataclass(frozen=True)
class ThetaLogJet:
    """d/dtau log theta and its next two tau-derivatives."""

    value: complex
    d1: complex
    d2: complex
    tail_bound: float
    terms: int = 0


def theta_log_jet(kind: str, p, params: SeriesParams | None = None) -> ThetaLogJet:
    """Logarithmic derivative of a theta nullwert with two more tau-derivatives.

    Evaluated from the normalized series, so it keeps full relative accuracy where the
    log-derivative is exponentially close to its constant part.
    """
    kind = _theta_kind(kind)
    params = params or default_series_params()
    pt = half_plane_point(p)
    (s0, s1, s2, s3), bound, n = _reduced_theta_sums(kind, pt, params)
    r1, r2, r3 = s1 / s0, s2 / s0, s3 / s0
    shift = 0.25j * math.pi if kind == "theta2" else 0.0
    return ThetaLogJet(
        value=shift + r1,
        d1=r2 - r1 * r1,
        d2=r3 - 3 * r2 * r1 + 2 * r1**3,
        tail_bound=float(bound / abs(s0)),
        terms=n,
    )


def eisenstein_derivative(kind: str, p, params: SeriesParams | None = None) -> SeriesValue:
    """dE/dtau through Ramanujan's differential system."""
    params = params or default_series_params()
    pt = half_plane_point(p)
    e2 = eval_eisenstein("E2", pt, params)
    e4 = eval_eisenstein("E4", pt, params)
    a2, a4, d2, d4 = e2.value, e4.value, e2.tail_bound, e4.tail_bound
    if kind == "E2":
        value = (math.pi * 1j / 6.0) * (a2 * a2 - a4)
        bound = (math.pi / 6.0) * (2 * abs(a2) * d2 + d4)
    elif kind == "E4":
        e6 = eval_eisenstein("E6", pt, params)
        value = (2j * math.pi / 3.0) * (a2 * a4 - e6.value)
        bound = (2 * math.pi / 3.0) * (abs(a2) * d4 + abs(a4) * d2 + e6.tail_bound)
    elif kind == "E6":
        e6 = eval_eisenstein("E6", pt, params)
        value = 1j * math.pi * (a2 * e6.value - a4 * a4)
        bound = math.pi * (abs(a2) * e6.tail_bound + abs(e6.value) * d2 + 2 * abs(a4) * d4)
    else:
        raise ValueError(f"unknown Eisenstein series {kind!r}; expected one of {EISENSTEIN_KINDS}")
    return SeriesValue(complex(value), float(bound), max(e2.terms, e4.terms))


def eisenstein_second_derivative_e2(p, params: SeriesParams | None = None) -> SeriesValue:
    """d^2 E2 / dtau^2 = (pi i / 6)(2 E2 E2' - E4')."""
    params = params or default_series_params()
    pt = half_plane_point(p)
    e2 = eval_eisenstein("E2", pt, params)
    d_e2 = eisenstein_derivative("E2", pt, params)
    d_e4 = eisenstein_derivative("E4", pt, params)
    value = (math.pi * 1j / 6.0) * (2 * e2.value * d_e2.value - d_e4.value)
    bound = (math.pi / 6.0) * (
        2 * abs(e2.value) * d_e2.tail_bound + 2 * abs(d_e2.value) * e2.tail_bound + d_e4.tail_bound
    )
    return SeriesValue(complex(value), float(bound), d_e2.terms)


def theta_fourth_powers(p, params: SeriesParams | None = None) -> tuple:
    """(theta2^4, theta3^4, theta4^4) as SeriesValues with first-order bounds."""
    params = params or default_series_params()
    pt = half_plane_point(p)
    out = []
    for kind in THETA_KINDS:
        th = eval_theta(kind, pt, params)
        out.append(SeriesValue(th.value**4, 4 * abs(th.value) ** 3 * th.tail_bound, th.terms))
    return tuple(out)


def lambda_function(p, params: SeriesParams | None = None) -> SeriesValue:
    """Modular lambda = theta2^4 / theta3^4."""
    t2, t3, _ = theta_fourth_powers(p, params)
    value = t2.value / t3.value
    bound = (t2.tail_bound + abs(value) * t3.tail_bound) / abs(t3.value)
    return SeriesValue(value, bound, max(t2.terms, t3.terms))


def central_difference(f, z: complex, h: float | None = None) -> complex:
    """Central difference of a holomorphic function along the real direction."""
    if h is None:
        h = 1e-5 * max(1.0, abs(z))
    return (f(z + h) - f(z - h)) / (2.0 * h)


@dataclass(frozen=True)
class TransformResiduals:
    e2: float
    e4: float
    e6: float
    bound: float


def transform_residuals(p, params: SeriesParams | None = None) -> TransformResiduals:
    """Residuals of the S-transformation laws of E2 (quasi-modular), E4 and E6."""
    params = params or default_series_params()
    pt = half_plane_point(p)
    tau = pt.tau
    st = half_plane_point(-1.0 / tau)
    lhs = {k: eval_eisenstein(k, st, params) for k in EISENSTEIN_KINDS}
    rhs = {k: eval_eisenstein(k, pt, params) for k in EISENSTEIN_KINDS}
    r2 = abs(lhs["E2"].value - (tau**2 * rhs["E2"].value + 12.0 * tau / (2j * math.pi)))
    r4 = abs(lhs["E4"].value - tau**4 * rhs["E4"].value)
    r6 = abs(lhs["E6"].value - tau**6 * rhs["E6"].value)
    weights = {"E2": 2, "E4": 4, "E6": 6}
    bound = max(
        lhs[k].tail_bound + abs(tau) ** weights[k] * rhs[k].tail_bound for k in EISENSTEIN_KINDS
    )
    return TransformResiduals(float(r2), float(r4), float(r6), float(bound))


@dataclass(frozen=True)
class ThetaIdentityResiduals:
    jacobi: float
    e4_theta: float
    e6_theta: float


def eisenstein_theta_residuals(p, params: SeriesParams | None = None) -> ThetaIdentityResiduals:
    """Jacobi's quartic identity and the theta expressions of E4 and E6."""
    params = params or default_series_params()
    pt = half_plane_point(p)
    t2, t3, t4 = (v.value for v in theta_fourth_powers(pt, params))
    e4 = eval_eisenstein("E4", pt, params).value
    e6 = eval_eisenstein("E6", pt, params).value
    return ThetaIdentityResiduals(
        jacobi=float(abs(t3 - t2 - t4)),
        e4_theta=float(abs(e4 - (t2 * t2 + t3 * t3 + t4 * t4) / 2.0)),
        e6_theta=float(abs(e6 - 0.5 * (t2 + t3) * (t3 + t4) * (t4 - t2))),
    )


@dataclass(frozen=True)
class LogDerivativeResiduals:
    theta2: float
    theta3: float
    theta4: float


def theta_log_derivative_residuals(
    p, params: SeriesParams | None = None, h: float | None = None,
) -> LogDerivativeResiduals:
    """Check (1/pi i) d log theta_j / dtau against the E2/theta expressions.

    The derivative is a central difference, independent of the series derivatives.
    """
    params = params or default_series_params()
    pt = half_plane_point(p)
    tau = pt.tau
    e2 = eval_eisenstein("E2", pt, params).value
    t2, t3, t4 = (v.value for v in theta_fourth_powers(pt, params))
    expected = {
        "theta2": (e2 + t3 + t4) / 12.0,
        "theta3": (e2 + t2 - t4) / 12.0,
        "theta4": (e2 - t2 - t3) / 12.0,
    }
    out = {}
    for kind, target in expected.items():
        centre = eval_theta(kind, pt, params).value
        deriv = central_difference(lambda z, k=kind: eval_theta(k, z, params).value, tau, h)
        out[kind] = float(abs(deriv / centre / (math.pi * 1j) - target))
    return LogDerivativeResiduals(**out)


def sample_tau(n: int, im_min: float, im_max: float, seed: int = 0) -> np.ndarray:
    """Seeded sample of tau with Re(tau) in [-1/2, 1/2] and Im(tau) in [im_min, im_max]."""
    if n < 1:
        raise ParameterError(f"sample count must be >= 1, got {n}")
    if not 0 < im_min <= im_max:
        raise ParameterError(f"need 0 < im_min <= im_max, got [{im_min}, {im_max}]")
    rng = np.random.default_rng(seed)
    re = rng.uniform(-0.5, 0.5, size=n)
    im = rng.uniform(im_min, im_max, size=n)
    return re + 1j * im
