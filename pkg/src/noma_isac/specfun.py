"""Special functions and quadrature used by the analytical BER and outage formulas.

The Gauss hypergeometric function and the regularized incomplete gamma
function are evaluated with their own series/continued-fraction code; the
Gaussian tail and adaptive quadrature sit on top of scipy.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _integrate
from scipy import special as _special

from .errors import ConvergenceError, DomainError, IntegrationError

__all__ = [
    "QuadratureSettings",
    "DEFAULT_QUADRATURE",
    "q_function",
    "regularized_gamma",
    "gauss_2f1",
    "integrate",
    "gamma_average",
]

_EPS = np.finfo(float).eps
_SERIES_MAX_TERMS = 200_000
_CF_MAX_ITER = 2000
# beyond this the unit-interval series is replaced by the 1 - z connection formula
_DIRECT_SERIES_LIMIT = 0.9


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances and limits for :func:`integrate` and :func:`gamma_average`."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 200
    semi_infinite_nodes: int = 64

    def __post_init__(self):
        if not self.abs_tol > 0 or not self.rel_tol > 0:
            raise DomainError("abs_tol and rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")
        if self.semi_infinite_nodes < 8:
            raise DomainError("semi_infinite_nodes must be >= 8")


DEFAULT_QUADRATURE = QuadratureSettings()


def q_function(x):
    """Gaussian tail probability ``Q(x) = P(N(0, 1) > x)``.

    Accepts scalars or arrays. Evaluated through ``erfc`` so the upper tail
    keeps full relative accuracy down to the underflow threshold.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("q_function requires finite input")
    out = 0.5 * _special.erfc(arr / math.sqrt(2.0))
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Regularized incomplete gamma
# ---------------------------------------------------------------------------

def _gamma_prefactor(a, x):
    # x**a * exp(-x) / Gamma(a), in log space
    return math.exp(a * math.log(x) - x - math.lgamma(a))


def _lower_series(a, x):
    term = 1.0 / a
    total = term
    for n in range(1, _SERIES_MAX_TERMS):
        term *= x / (a + n)
        total += term
        if abs(term) < abs(total) * _EPS * 0.5:
            return total * _gamma_prefactor(a, x)
    raise ConvergenceError(
        f"incomplete gamma series did not converge for a={a}, x={x}",
        estimate=total * _gamma_prefactor(a, x),
        iterations=_SERIES_MAX_TERMS,
    )


def _upper_continued_fraction(a, x):
    # modified Lentz evaluation of the Legendre continued fraction
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * _gamma_prefactor(a, x)
    raise ConvergenceError(
        f"incomplete gamma continued fraction did not converge for a={a}, x={x}",
        estimate=h * _gamma_prefactor(a, x),
        iterations=_CF_MAX_ITER,
    )


def regularized_gamma(a, x, tail="lower"):
    """Regularized incomplete gamma function.

    ``tail="lower"`` gives ``P(a, x) = gamma(a, x) / Gamma(a)`` and
    ``tail="upper"`` gives ``Q(a, x) = 1 - P(a, x)``. Whichever tail is
    small is computed directly (series for ``x < a + 1``, continued
    fraction otherwise) and the other one by complement.
    """
    if tail not in ("lower", "upper"):
        raise DomainError(f"tail must be 'lower' or 'upper', got {tail!r}")
    a = float(a)
    x = float(x)
    if not (a > 0 and math.isfinite(a)):
        raise DomainError(f"shape must be positive and finite, got {a}")
    if math.isnan(x) or x < 0:
        raise DomainError(f"argument must be >= 0, got {x}")
    if x == 0:
        lower = 0.0
        upper = 1.0
    elif math.isinf(x):
        lower = 1.0
        upper = 0.0
    elif x < a + 1.0:
        lower = _lower_series(a, x)
        upper = 1.0 - lower
    else:
        upper = _upper_continued_fraction(a, x)
        lower = 1.0 - upper
    return lower if tail == "lower" else upper


# ---------------------------------------------------------------------------
# Gauss hypergeometric 2F1
# ---------------------------------------------------------------------------

def _nonpositive_integer(v):
    return v <= 0 and float(v).is_integer()


def _hyp_series(a, b, c, z, max_terms=_SERIES_MAX_TERMS):
    term = 1.0
    total = 1.0
    small = 0
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if term == 0.0:
            return total
        if abs(term) <= abs(total) * _EPS * 0.25:
            small += 1
            # two consecutive negligible terms guards against a lucky near-zero
            if small >= 2:
                return total
        else:
            small = 0
    raise ConvergenceError(
        f"2F1({a}, {b}; {c}; {z}) series did not converge in {max_terms} terms",
        estimate=total,
        error=abs(term),
        iterations=max_terms,
    )


def _hyp_unit(a, b, c, z):
    """2F1 on 0 <= z < 1 with positive-direction series or the 1 - z formula."""
    if z <= _DIRECT_SERIES_LIMIT or _nonpositive_integer(a) or _nonpositive_integer(b):
        return _hyp_series(a, b, c, z)
    s = c - a - b
    if float(s).is_integer():
        # connection coefficients are singular; fall back to the slow series
        return _hyp_series(a, b, c, z)
    y = 1.0 - z
    g = _special.gamma
    first = g(c) * g(s) / (g(c - a) * g(c - b)) * _hyp_series(a, b, 1.0 - s, y)
    second = (
        y**s * g(c) * g(-s) / (g(a) * g(b)) * _hyp_series(c - a, c - b, 1.0 + s, y)
    )
    return float(first + second)


def gauss_2f1(a, b, c, z):
    """Gauss hypergeometric function ``2F1(a, b; c; z)`` for real ``z < 1``.

    Negative arguments are mapped into ``(0, 1)`` with the Pfaff
    transformation; arguments close to 1 use the ``1 - z`` connection
    formula. Terminating series are summed exactly.

    Raises
    ------
    DomainError
        ``c`` is a non-positive integer or ``z`` is not finite or ``>= 1``.
    ConvergenceError
        The series failed to converge (only possible for the degenerate
        integer ``c - a - b`` case with ``z`` very close to 1).
    """
    a, b, c, z = float(a), float(b), float(c), float(z)
    if _nonpositive_integer(c):
        raise DomainError(f"c must not be a non-positive integer, got {c}")
    if not math.isfinite(z) or z >= 1.0:
        raise DomainError(f"z must be finite and < 1, got {z}")
    if z == 0.0:
        return 1.0
    if _nonpositive_integer(a) or _nonpositive_integer(b):
        return _hyp_series(a, b, c, z)
    if z > 0.0:
        return _hyp_unit(a, b, c, z)
    w = z / (z - 1.0)
    # Pfaff: prefer the variant whose series terminates
    if _nonpositive_integer(c - a) and not _nonpositive_integer(c - b):
        return (1.0 - z) ** (-b) * _hyp_series(c - a, b, c, w)
    return (1.0 - z) ** (-a) * _hyp_unit(a, c - b, c, w)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def _quad_piece(f, lo, hi, settings, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _integrate.IntegrationWarning)
        value, err = _integrate.quad(
            f,
            lo,
            hi,
            epsabs=settings.abs_tol,
            epsrel=settings.rel_tol,
            limit=settings.max_subdivisions,
            points=points,
        )
    return value, err


def integrate(f, lower=0.0, upper=math.inf, settings=None, breakpoints=()):
    """Integrate a scalar function over ``[lower, upper]``.

    ``upper`` may be ``inf`` for half-line integrals. ``breakpoints`` mark
    kinks or scale changes; on a half-line they split the range into finite
    panels followed by an infinite tail, which keeps adaptive refinement
    from missing mass concentrated near the origin.

    Raises
    ------
    IntegrationError
        The estimated error exceeds ``max(abs_tol, rel_tol * |result|)``.
    """
    settings = settings or DEFAULT_QUADRATURE
    if not math.isfinite(lower):
        raise DomainError("lower limit must be finite")
    if upper < lower:
        raise DomainError("upper limit must not be below lower limit")
    if upper == lower:
        return 0.0
    inner = sorted(p for p in breakpoints if lower < p < upper)
    if math.isfinite(upper):
        value, err = _quad_piece(f, lower, upper, settings, points=inner or None)
    else:
        edges = [lower, *inner]
        value = err = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            v, e = _quad_piece(f, lo, hi, settings)
            value += v
            err += e
        v, e = _quad_piece(f, edges[-1], math.inf, settings)
        value += v
        err += e
    if not math.isfinite(value) or err > max(settings.abs_tol, settings.rel_tol * abs(value)):
        raise IntegrationError(
            f"quadrature tolerance not met on [{lower}, {upper}]: estimate {value}, error {err}",
            estimate=value,
            error=err,
            iterations=settings.max_subdivisions,
        )
    return value


def gamma_average(f, shape, settings=None, max_nodes=256):
    """Expectation ``E[f(U)]`` for ``U ~ Gamma(shape, 1)`` by Gauss-Laguerre.

    Starts from ``settings.semi_infinite_nodes`` generalized Laguerre nodes
    and doubles until successive estimates agree to ``1e-8`` relative.
    Suited to smooth ``f``; integrands concentrated near zero should go
    through :func:`integrate` with breakpoints instead. Node generation
    overflows beyond a few hundred nodes, hence the default cap.
    """
    settings = settings or DEFAULT_QUADRATURE
    if not shape > 0:
        raise DomainError("shape must be positive")
    n = settings.semi_infinite_nodes
    prev = None
    while n <= max_nodes:
        with np.errstate(all="ignore"):
            nodes, weights = _special.roots_genlaguerre(n, shape - 1.0)
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
            break
        vals = np.array([f(u) for u in nodes], dtype=float)
        est = float(np.dot(weights, vals) / _special.gamma(shape))
        if prev is not None and abs(est - prev) <= 1e-8 * max(abs(est), settings.abs_tol):
            return est
        prev = est
        n *= 2
    raise IntegrationError(
        "Gauss-Laguerre refinement did not settle", estimate=prev, iterations=max_nodes
    )
