"""Counting-process probabilities and the improper survival integral."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .dist import DistributionSpec

ANALYTIC_FAMILIES = ("gamma", "exponential", "dirac", "empty")


class UnsupportedFamilyError(ValueError):
    """No closed form for the convolution powers of this inter-arrival law."""


class IntegrationError(ArithmeticError):
    def __init__(self, message, value, error):
        super().__init__(message)
        self.value = value
        self.error = error


@dataclass(frozen=True)
class CountingProcess:
    """Renewal counting process N(t) with i.i.d. inter-arrival times.

    The first arrival happens after one full inter-arrival time (N(0) = 0).
    """

    interarrival: DistributionSpec
    truncation_tol: float = 1e-12

    def _require_analytic(self):
        if self.interarrival.family not in ANALYTIC_FAMILIES:
            raise UnsupportedFamilyError(
                f"counting probabilities for {self.interarrival.family} inter-arrivals "
                "have no closed form; use the simulator"
            )
        if self.interarrival.family == "dirac" and self.interarrival.p1 <= 0:
            raise UnsupportedFamilyError("zero inter-arrival time gives infinitely many arrivals")


def count_pmf(cp: CountingProcess, m: int, t: float) -> float:
    """P(N(t) = m) = G^{*m}(t) - G^{*(m+1)}(t)."""
    cp._require_analytic()
    if t < 0:
        raise ValueError("t must be >= 0")
    if m < 0:
        return 0.0
    return float(K.count_pmf_kernel(*cp.interarrival.triple, int(m), float(t)))


def count_pgf(cp: CountingProcess, s: float, t: float) -> float:
    """E[s^N(t)], truncated once the remaining arrival mass drops below tol."""
    cp._require_analytic()
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if t < 0:
        raise ValueError("t must be >= 0")
    return float(K.count_pgf_kernel(*cp.interarrival.triple, float(s), float(t), cp.truncation_tol))


def count_pgf_grid(cp: CountingProcess, s: float, ts) -> np.ndarray:
    cp._require_analytic()
    fam, p1, p2 = cp.interarrival.triple
    rows = np.array([[0, K.ROW_PGF, fam, p1, p2, s, 1.0]], dtype=float)
    return K.mixture_survival_grid(np.asarray(ts, dtype=float), rows, cp.truncation_tol)


def nbu_pgf_lower_bound(cp: CountingProcess, s: float, t: float) -> float:
    """[sf_Y(t)]^(1-s): the pgf of the dominating nonhomogeneous Poisson process.

    Only a lower bound on :func:`count_pgf` when the inter-arrival law is
    NBU; callers validate that with :func:`shockmetrics.dist.check_nbu`.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    return float(K.nbu_pgf_bound_kernel(*cp.interarrival.triple, float(s), float(t)))


def integrate_survival(
    f,
    abs_tol: float = 1e-8,
    scale: float = 1.0,
    max_intervals: int = 4000,
    cutoff: float = 1e-13,
    strict: bool = True,
):
    """Integral of a survival-type function over [0, inf).

    Maps t = scale * u / (1 - u) onto [0, 1) and runs adaptive
    Gauss-Kronrod. Returns ``(value, error_estimate)``; raises
    :class:`IntegrationError` carrying the partial value when the estimate
    stays above ``abs_tol`` (unless ``strict=False``).
    """
    global _PY_INTEGRATOR
    if _PY_INTEGRATOR is None:
        _PY_INTEGRATOR = K.make_survival_integrator(lambda t, g: g(t), use_jit=False)
    value, err, ok = _PY_INTEGRATOR(f, float(scale), abs_tol, max_intervals, cutoff)
    if not ok and strict:
        raise IntegrationError(
            f"quadrature did not reach {abs_tol:g} (estimate {err:.3g})", value, err
        )
    return float(value), float(err)


_PY_INTEGRATOR = None


def integrate_mixture_survival(rows: np.ndarray, abs_tol: float = 1e-8, scale: float = 1.0,
                               max_intervals: int = 4000, strict: bool = True):
    """Compiled counterpart of :func:`integrate_survival` for pgf mixtures."""
    if not math.isfinite(scale) or scale <= 0:
        scale = 1.0
    value, err, ok = K.mixture_integrator()(rows, float(scale), abs_tol, max_intervals, 1e-13)
    if not ok and strict:
        raise IntegrationError(
            f"quadrature did not reach {abs_tol:g} (estimate {err:.3g})", value, err
        )
    return float(value), float(err)
