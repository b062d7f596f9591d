"""Closed-form and semi-analytical BER and outage for the ZF and JML receivers.

Every closed form here has an independent numerical counterpart (grid
integration over Voronoi cells, or half-line quadrature of its defining
integral) so the two routes can be checked against each other.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special as _special

from .constellation import decision_geometry, default_constellation, distance_sets, nearest_indices
from .errors import DomainError, GeometryError
from .specfun import DEFAULT_QUADRATURE, QuadratureSettings, gauss_2f1, integrate, q_function, regularized_gamma

__all__ = [
    "SYMBOL_ENERGY",
    "InverseGammaParams",
    "ErlangParams",
    "GammaParams",
    "RateThreshold",
    "BoundValue",
    "AnalyticCurvePoint",
    "inverse_gamma_params",
    "gamma_params",
    "rate_threshold",
    "inverse_gamma_pdf",
    "erlang_pdf",
    "conditional_ber_zf",
    "conditional_ber_oracle",
    "semi_analytic_ber_zf",
    "zf_union_term",
    "zf_union_term_quadrature",
    "jml_union_term",
    "jml_union_term_quadrature",
    "jml_eta_table",
    "upper_ber_zf",
    "upper_ber_jml",
    "outage_zf",
    "outage_jml",
    "analytic_point",
]

log = logging.getLogger(__name__)

# ensemble mean of |x'|^2 for two unit-energy periods
SYMBOL_ENERGY = 2.0

# Gaussian kernel is below 1e-347 beyond this many standard deviations
_KERNEL_SPAN = 40.0
_SQRT2 = math.sqrt(2.0)


def _q(x):
    return 0.5 * math.erfc(x / _SQRT2)


def _phi(t):
    return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Distribution parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InverseGammaParams:
    """Law of the ZF noise-enhancement factor ``[(H^H H)^-1]_kk``."""

    alpha_zf: float
    beta_zf: float


@dataclass(frozen=True)
class ErlangParams:
    shape: int
    eta: float


@dataclass(frozen=True)
class GammaParams:
    """Law of the channel norm ``||h_k||^2`` (shape, rate)."""

    alpha_jml: float
    beta_jml: float


@dataclass(frozen=True)
class RateThreshold:
    C: float
    R_zf: float
    R_jml: float


def inverse_gamma_params(params, ue):
    return InverseGammaParams(alpha_zf=params.M - params.K + 1, beta_zf=1.0 / params.gain(ue))


def gamma_params(params, ue):
    return GammaParams(alpha_jml=params.M, beta_jml=1.0 / params.gain(ue))


def rate_threshold(params, ue, C, symbol_energy=SYMBOL_ENERGY):
    """Thresholds turning ``rate < C`` into conditions on the channel statistic."""
    p = params.power(ue) * symbol_energy
    n = (2.0**C - 1.0) * 2.0 * params.noise_var
    r_zf = math.inf if n == 0 else p / n
    r_jml = math.inf if p == 0 else n / p
    return RateThreshold(C=C, R_zf=r_zf, R_jml=r_jml)


def inverse_gamma_pdf(x, shape, scale):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(shape * np.log(scale) - _special.gammaln(shape) - (shape + 1) * np.log(x) - scale / x)
    return np.where(x > 0, out, 0.0)


def erlang_pdf(x, shape, eta):
    """Erlang density with integer ``shape`` and scale ``eta`` (mean shape * eta)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp((shape - 1) * np.log(x) - x / eta - _special.gammaln(shape) - shape * math.log(eta))
    return np.where(x > 0, out, 0.0 if shape > 1 else np.where(x == 0, 1.0 / eta, 0.0))


# ---------------------------------------------------------------------------
# Conditional ZF bit error probability
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def _default_geometry():
    c = default_constellation()
    return c, decision_geometry(c)


def _kernel_integral(g, lo, hi, centre, rho, settings):
    """``int_lo^hi g(x) exp(-(x-centre)^2 / (2 rho^2)) dx / (sqrt(2 pi) rho)``.

    Integrated in the standardised variable and clipped to where the
    Gaussian kernel is representable, so the kernel is always resolved.
    """
    t_lo = max((lo - centre) / rho, -_KERNEL_SPAN)
    t_hi = min((hi - centre) / rho, _KERNEL_SPAN)
    if t_hi <= t_lo:
        return 0.0
    pts = (0.0,) if t_lo < 0.0 < t_hi else ()
    return integrate(
        lambda t: g(centre + rho * t) * _phi(t), t_lo, t_hi, settings, breakpoints=pts
    )


def conditional_ber_zf(P_N, geometry=None, constellation=None, settings=None):
    """MSB error probability of one ZF branch given its noise power ``P_N``.

    ``P_N`` is the total complex noise power after ZF and power
    normalisation (per-dimension variance ``P_N / 2``). The result is the
    average over the eight MSB = '0' symbols of the Gaussian mass in the
    MSB = '1' decision region, written as closed Q-products minus five 1-D
    integrals over the vertex coordinates ``a_B, b_B, a_D`` and slope
    ``k_AC`` of ``geometry``.
    """
    if not P_N > 0:
        raise DomainError(f"noise power must be positive, got {P_N}")
    if constellation is None and geometry is None:
        constellation, geometry = _default_geometry()
    elif constellation is None or geometry is None:
        if constellation is None or not constellation.is_default:
            raise GeometryError("geometry and constellation must be supplied together")
        _, geometry = _default_geometry()
    if not constellation.is_default:
        raise GeometryError("conditional_ber_zf needs the default constellation geometry")
    settings = settings or DEFAULT_QUADRATURE

    aB, bB = geometry.vertices["B"]
    aD = geometry.vertices["D"][0]
    k = geometry.slopes["AC"]
    rho = math.sqrt(P_N / 2.0)
    ds = distance_sets(constellation, bit=1)

    total = 0.0
    for n in ds.correct:
        s = constellation.points[n - 1]
        an, bn = s.real, s.imag
        closed = (
            1.0
            + _q(-bn / rho) * (-_q((aD + an) / rho) - _q((aD - an) / rho))
            + _q(-(bB + bn) / rho) * (_q(-(aB + an) / rho) - _q((aB - an) / rho))
        )
        i1 = _kernel_integral(
            lambda b: _q(-(b + bB) / (rho * k) - (aB + an) / rho)
            - _q((b + bB) / (rho * k) + (aB - an) / rho),
            -bB, 0.0, bn, rho, settings,
        )
        i2 = _kernel_integral(
            lambda a: _q((k * (a + aD) - bn) / rho), -aD, -aB, an, rho, settings
        )
        i3 = _kernel_integral(
            lambda a: _q(-(a + bn) / rho) + _q((a - bn) / rho), -aB, 0.0, an, rho, settings
        )
        i4 = _kernel_integral(
            lambda a: _q((a - bn) / rho) + _q(-(a + bn) / rho), 0.0, aB, an, rho, settings
        )
        i5 = _kernel_integral(
            lambda a: _q((-k * (a - aD) - bn) / rho), aB, aD, an, rho, settings
        )
        total += closed - (i1 + i2 + i3 + i4 + i5)
    return min(max(total / len(ds.correct), 0.0), 1.0)


def conditional_ber_oracle(P_N, constellation=None, bit=1, steps_per_sigma=200, half_width=8.0):
    """Grid-integration reference for the conditional per-bit error probability.

    For each correct symbol the plane is cut into horizontal rows of height
    ``sigma / steps_per_sigma`` spanning ``+-half_width`` sigma. Along a
    row the nearest-symbol map is piecewise constant with breakpoints on
    the perpendicular bisectors, so the Gaussian mass of the wrong-bit
    pieces is exact in the horizontal direction. Rows are combined with
    the midpoint rule, panel by panel between horizontal bisectors where
    the row probability jumps. The neglected vertical tail is below
    ``2 Q(half_width)``.
    """
    if not P_N > 0:
        raise DomainError(f"noise power must be positive, got {P_N}")
    constellation = constellation or default_constellation()
    sigma = math.sqrt(P_N / 2.0)
    pts = constellation.points
    col = constellation.bits[:, bit - 1]

    ii, jj = np.triu_indices(len(pts), k=1)
    da = pts[jj].real - pts[ii].real
    vertical = np.abs(da) <= 1e-14
    # horizontal bisectors make the row probability jump, so rows are
    # laid out panel-wise between them
    levels = np.unique(np.round((pts[ii].imag + pts[jj].imag)[vertical] / 2.0, 12))
    ii, jj, da = ii[~vertical], jj[~vertical], da[~vertical]
    db = pts[jj].imag - pts[ii].imag
    rhs = (np.abs(pts[jj]) ** 2 - np.abs(pts[ii]) ** 2) / 2.0

    h = sigma / steps_per_sigma
    correct = np.flatnonzero(col == 0)
    total = 0.0
    for c in correct:
        ac, bc = pts[c].real, pts[c].imag
        lo_b, hi_b = bc - half_width * sigma, bc + half_width * sigma
        edges = [lo_b, *[v for v in levels if lo_b < v < hi_b], hi_b]
        rows, widths = [], []
        for e0, e1 in zip(edges[:-1], edges[1:]):
            n = max(1, math.ceil((e1 - e0) / h))
            step = (e1 - e0) / n
            rows.append(e0 + (np.arange(n) + 0.5) * step)
            widths.append(np.full(n, step))
        rows = np.concatenate(rows)
        widths = np.concatenate(widths)
        # crossing abscissa of every bisector with every row
        cuts = (rhs[None, :] - rows[:, None] * db[None, :]) / da[None, :]
        cuts.sort(axis=1)
        lo = np.concatenate([np.full((len(rows), 1), -np.inf), cuts], axis=1)
        hi = np.concatenate([cuts, np.full((len(rows), 1), np.inf)], axis=1)
        mid = np.where(np.isinf(lo), hi - 1.0, np.where(np.isinf(hi), lo + 1.0, 0.5 * (lo + hi)))
        idx = nearest_indices(constellation, mid + 1j * rows[:, None])
        wrong = col[idx] != 0
        mass = _special.ndtr((hi - ac) / sigma) - _special.ndtr((lo - ac) / sigma)
        row_prob = np.sum(np.where(wrong, mass, 0.0), axis=1)
        weights = np.exp(-0.5 * ((rows - bc) / sigma) ** 2) / math.sqrt(2 * math.pi) * (widths / sigma)
        total += float(np.dot(weights, row_prob))
    return total / len(correct)


def _ue_snr(params, ue):
    """``P_k beta_k / (2 sigma_n^2)``: inverse of the ZF noise power at chi = 1/beta_k."""
    num = params.power(ue) * params.gain(ue)
    den = 2.0 * params.noise_var
    if den == 0:
        return math.inf
    return num / den


def semi_analytic_ber_zf(params, ue, settings=None):
    """ZF bit error rate averaged over the inverse-Gamma noise-enhancement law.

    With ``u = beta_ZF / chi ~ Gamma(M - K + 1, 1)`` the post-ZF noise power
    is ``P_N = 1 / (snr * u)``, ``snr = P_k beta_k / (2 sigma_n^2)``, and the
    half-line integral over ``u`` is split at decades of ``1 / snr`` so the
    adaptive rule sees the region where the conditional BER falls off.
    """
    settings = settings or DEFAULT_QUADRATURE
    ig = inverse_gamma_params(params, ue)
    shape = ig.alpha_zf
    if shape < 1:
        raise DomainError("need M > K - 1")
    snr = _ue_snr(params, ue)
    if snr == math.inf:
        return 0.0
    if snr == 0:
        return 0.5
    log_norm = math.lgamma(shape)

    def integrand(u):
        if u <= 0:
            return 0.0
        w = math.exp((shape - 1) * math.log(u) - u - log_norm)
        if w == 0.0:
            return 0.0
        return conditional_ber_zf(1.0 / (snr * u), settings=settings) * w

    scale = 1.0 / snr
    marks = [scale * 10.0**e for e in range(-2, 5)] + [shape, shape + 10.0, shape + 40.0]
    marks = sorted(m for m in marks if m < shape + 60.0)
    return integrate(integrand, 0.0, shape + 80.0, settings, breakpoints=marks)


# ---------------------------------------------------------------------------
# Union-bound terms
# ---------------------------------------------------------------------------

def _zf_term_finite_sum(x, alpha):
    # E[Q(sqrt(2 v))], v ~ Gamma(alpha, x): cancellation-free for integer alpha
    sq = math.sqrt(1.0 + x)
    one_minus_mu = 1.0 / (sq * (sq + math.sqrt(x)))
    one_plus_mu = 2.0 - one_minus_mu
    acc = math.fsum(
        math.comb(alpha - 1 + k, k) * (one_plus_mu / 2.0) ** k for k in range(alpha)
    )
    return (one_minus_mu / 2.0) ** alpha * acc


def zf_union_term(A, alpha, beta):
    """``E[Q(A / sqrt(chi))]`` for ``chi ~ InvGamma(alpha, beta)``.

    Evaluated with the 2F1 closed form. When the result drops below 1e-3
    the ``0.5 - (...)`` difference loses digits, and for integer ``alpha``
    the equivalent terminating sum is used instead.
    """
    if A < 0:
        raise DomainError("A must be >= 0")
    if A == 0:
        return 0.5
    if math.isinf(A):
        return 0.0
    x = A * A / (2.0 * beta)
    ratio = math.exp(math.lgamma(0.5 + alpha) - math.lgamma(alpha))
    value = 0.5 - A * ratio * gauss_2f1(0.5, 0.5 + alpha, 1.5, -x) / math.sqrt(2.0 * math.pi * beta)
    if value < 1e-3 and float(alpha).is_integer():
        return _zf_term_finite_sum(x, int(alpha))
    return value


# the references resolve values far below the default absolute tolerance
_REFERENCE_QUADRATURE = QuadratureSettings(abs_tol=1e-14, rel_tol=1e-10, max_subdivisions=500)


def _gamma_marks(shape, scale):
    # decades around the integrand's own scale plus the Gamma(shape, 1) body;
    # panels beyond the body would be too wide to resolve its tail
    body = [shape / 4.0, float(shape), shape + 10.0, shape + 25.0, shape + 50.0, shape + 100.0]
    decades = [scale * 10.0**e for e in range(-2, 4)]
    return sorted(m for m in body + decades if m <= shape + 100.0)


def zf_union_term_quadrature(A, alpha, beta, settings=None):
    """Reference for :func:`zf_union_term` by direct half-line quadrature."""
    if A == 0:
        return 0.5
    settings = settings or _REFERENCE_QUADRATURE

    # integrate over u = beta / chi ~ Gamma(alpha, 1) to keep the weight O(1)
    def f(u):
        if u <= 0:
            return 0.0
        return _q(A * math.sqrt(u / beta)) * math.exp((alpha - 1) * math.log(u) - u - math.lgamma(alpha))

    return integrate(f, 0.0, math.inf, settings, breakpoints=_gamma_marks(alpha, beta / (A * A)))


def jml_union_term(eta, M):
    """``E[Q(sqrt(delta))]`` for ``delta ~ Erlang(M, eta)``.

    ``Gamma(M + 1/2) (2/eta)^M 2F1(M, M + 1/2; M + 1; -2/eta) / (2 sqrt(pi) M!)``.
    ``eta = 0`` returns the point-mass limit 0.5.
    """
    if eta < 0:
        raise DomainError("eta must be >= 0")
    if eta == 0 or eta < 1e-200:
        return 0.5
    if math.isinf(eta):
        return 0.0
    log_pref = (
        math.lgamma(M + 0.5) - math.log(2.0 * math.sqrt(math.pi)) - math.lgamma(M + 1.0)
        + M * math.log(2.0 / eta)
    )
    return math.exp(log_pref) * gauss_2f1(M, M + 0.5, M + 1.0, -2.0 / eta)


def jml_union_term_printed(eta, M):
    """Unnormalised JML term, ``Gamma(2M) 2F1(...) / (2^M eta^M Gamma(M))``.

    Kept for comparison only: it exceeds :func:`jml_union_term` by ``M!``.
    """
    return (
        math.gamma(2 * M) * gauss_2f1(M, M + 0.5, M + 1.0, -2.0 / eta)
        / (2.0**M * eta**M * math.gamma(M))
    )


def jml_union_term_quadrature(eta, M, settings=None):
    """Reference for :func:`jml_union_term` by half-line quadrature over the Erlang law."""
    if eta == 0:
        return 0.5

    # delta = eta * u with u ~ Gamma(M, 1)
    def f(u):
        if u <= 0:
            return 0.0
        return _q(math.sqrt(eta * u)) * math.exp((M - 1) * math.log(u) - u - math.lgamma(M))

    return integrate(f, 0.0, math.inf, settings or _REFERENCE_QUADRATURE, breakpoints=_gamma_marks(M, 1.0 / eta))


@dataclass(frozen=True)
class BoundValue:
    """Union-bound value and its copy clamped to a probability."""

    value: float
    clamped: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "clamped", min(self.value, 1.0))


def upper_ber_zf(params, ue, constellation=None):
    """Unconditional ZF union bound for UE ``ue`` (1 or 2).

    Sums the pairwise terms over the correct (MSB 0) and wrong (MSB 1)
    index sets, weighted by 1/8.
    """
    constellation = constellation or default_constellation()
    ig = inverse_gamma_params(params, ue)
    ds = distance_sets(constellation, bit=1)
    pk = params.power(ue)
    nv = params.noise_var
    terms = []
    for d in ds.distances.ravel():
        A = math.inf if nv == 0 else math.sqrt(pk * d * d / (4.0 * nv))
        terms.append(zf_union_term(A, ig.alpha_zf, ig.beta_zf))
    return BoundValue(math.fsum(terms) / len(ds.correct))


def jml_eta_table(params, ue, constellation=None, decimals=12):
    """Distinct ``eta`` values of the JML union bound with their multiplicities.

    ``eta = (P_k beta_k |s_c - s_w|^2 + P_j beta_j |s_p - s_q|^2) / (4 sigma^2)``
    over ``c`` correct, ``w`` wrong, and all 16 x 16 interferer pairs.
    """
    constellation = constellation or default_constellation()
    ds = distance_sets(constellation, bit=1)
    other = 2 if ue == 1 else 1
    pts = constellation.points
    own = np.round(ds.distances.ravel() ** 2, decimals)
    cross = np.round((np.abs(pts[:, None] - pts[None, :]) ** 2).ravel(), decimals)
    own_vals, own_counts = np.unique(own, return_counts=True)
    cross_vals, cross_counts = np.unique(cross, return_counts=True)
    a = params.power(ue) * params.gain(ue)
    b = params.power(other) * params.gain(other)
    nv = params.noise_var
    table = []
    for dv, dc in zip(own_vals, own_counts):
        for xv, xc in zip(cross_vals, cross_counts):
            num = a * dv + b * xv
            eta = math.inf if nv == 0 else num / (4.0 * nv)
            table.append((eta, int(dc) * int(xc)))
    return table


def upper_ber_jml(params, ue, mode="as_printed", constellation=None):
    """Unconditional JML union bound for UE ``ue``.

    ``mode="as_printed"`` weights the quadruple sum by 1/8 only;
    ``mode="averaged"`` also averages over the interferer's true symbol
    (weight 1/128).
    """
    if mode not in ("as_printed", "averaged"):
        raise ValueError(f"unknown JML bound mode {mode!r}")
    M = params.M
    table = jml_eta_table(params, ue, constellation)
    total = math.fsum(count * jml_union_term(eta, M) for eta, count in table)
    weight = 1.0 / 8.0 if mode == "as_printed" else 1.0 / 128.0
    return BoundValue(total * weight)


# ---------------------------------------------------------------------------
# Outage
# ---------------------------------------------------------------------------

def _outage_argument(params, ue, C):
    # beta_ZF / R_ZF == beta_JML * R_JML == (2^C - 1) 2 sigma^2 / (P_k |x'|^2 beta_k)
    th = rate_threshold(params, ue, C)
    return (1.0 / params.gain(ue)) * th.R_jml


def outage_zf(params, ue, C):
    """ZF outage ``1 - Q(M - K + 1, beta_ZF / R_ZF)``.

    The complement of the regularized upper gamma is returned as the lower
    regularized gamma, which keeps relative accuracy at small outage.
    """
    if C <= 0:
        log.info("outage_zf: C=%s <= 0, returning the limit 0", C)
        return 0.0
    x = _outage_argument(params, ue, C)
    return regularized_gamma(params.M - params.K + 1, x, "lower")


def outage_jml(params, ue, C):
    """JML outage ``gamma(M, beta_JML R_JML) / Gamma(M)``."""
    if C <= 0:
        log.info("outage_jml: C=%s <= 0, returning the limit 0", C)
        return 0.0
    x = _outage_argument(params, ue, C)
    return regularized_gamma(params.M, x, "lower")


@dataclass
class AnalyticCurvePoint:
    p_com_dbm: float
    ue: int
    semi_ber_zf: float = math.nan
    upper_zf: BoundValue | None = None
    upper_jml: BoundValue | None = None
    outage_zf: dict = field(default_factory=dict)
    outage_jml: dict = field(default_factory=dict)


def analytic_point(params, ue, p_com_dbm, analyses=("semi_ber", "upper_zf", "upper_jml"),
                   C_list=(), jml_mode="as_printed", settings=None):
    """Evaluate the requested closed forms at one power point."""
    pt = AnalyticCurvePoint(p_com_dbm=p_com_dbm, ue=ue)
    if "semi_ber" in analyses:
        pt.semi_ber_zf = semi_analytic_ber_zf(params, ue, settings)
    if "upper_zf" in analyses:
        pt.upper_zf = upper_ber_zf(params, ue)
    if "upper_jml" in analyses:
        pt.upper_jml = upper_ber_jml(params, ue, jml_mode)
    for C in C_list:
        if "outage_zf" in analyses:
            pt.outage_zf[C] = outage_zf(params, ue, C)
        if "outage_jml" in analyses:
            pt.outage_jml[C] = outage_jml(params, ue, C)
    return pt
