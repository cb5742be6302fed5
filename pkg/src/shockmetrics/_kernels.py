"""Scalar numeric kernels shared by every module.

Everything here is written in the numba-compatible subset of Python and
wrapped with :func:`shockmetrics._accel.jit`. Distributions are passed around
as ``(family_code, p1, p2)`` triples; see ``dist.py`` for the parameter
meaning of each family.
"""

import cmath
import math

import numpy as np

from ._accel import jit

WEIBULL = 0
GAMMA = 1
EXPONENTIAL = 2
UNIFORM = 3
BINOMIAL = 4
DIRAC = 5
EMPTY = 6

LINK_NONE = 0
LINK_SCALE_TIMES_ENV = 1
LINK_SCALE_INVERSE_ENV = 2
LINK_RATE_TIMES_ENV = 3

ROW_PGF = 0
ROW_NBU_BOUND = 1

# Gauss-Kronrod 7/15 nodes on [-1, 1] (positive half; index 0 is the centre)
_GK_NODES = np.array(
    [
        0.000000000000000000000000000000000,
        0.207784955007898467600689403773245,
        0.405845151377397166906606412076961,
        0.586087235467691130294144845693013,
        0.741531185599394439863864773280788,
        0.864864423359769072789712788640926,
        0.949107912342758524526189684047851,
        0.991455371120812639206854697526329,
    ]
)
_GK_WK = np.array(
    [
        0.209482141084727828012999174891714,
        0.204432940075298892414161999234649,
        0.190350578064785409913256402421014,
        0.169004726639267902826583426598550,
        0.140653259715525918745189590510238,
        0.104790010322250183839876322541518,
        0.063092092629978553290700663189204,
        0.022935322010529224963732008058970,
    ]
)
# Gauss weights for the 7-point rule, aligned with nodes 0, 2, 4, 6
_GK_WG = np.array(
    [
        0.417959183673469387755102040816327,
        0.0,
        0.381830050505118944950369775488975,
        0.0,
        0.279705391489276667901467771423780,
        0.0,
        0.129484966168869693270611432679082,
        0.0,
    ]
)

_EPS = 2.220446049250313e-16
_FPMIN = 1e-300


# ---------------------------------------------------------------------------
# special functions


@jit
def gammainc_pq(a, x):
    """Regularized incomplete gamma ``(P(a, x), Q(a, x))`` with ``P + Q == 1``.

    Series for ``x < a + 1``, modified Lentz continued fraction otherwise.
    """
    if x <= 0.0:
        return 0.0, 1.0
    log_pref = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        for _ in range(100000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-17:
                break
        p = total * math.exp(log_pref)
        if p > 1.0:
            p = 1.0
        return p, 1.0 - p
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    q = math.exp(log_pref) * h
    if q > 1.0:
        q = 1.0
    return 1.0 - q, q


@jit
def binom_logpmf(k, n, p):
    if k < 0 or k > n:
        return -np.inf
    if p == 0.0:
        return 0.0 if k == 0 else -np.inf
    if p == 1.0:
        return 0.0 if k == n else -np.inf
    return (
        math.lgamma(n + 1.0)
        - math.lgamma(k + 1.0)
        - math.lgamma(n - k + 1.0)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )


# ---------------------------------------------------------------------------
# distribution primitives


@jit
def dist_cdf(fam, p1, p2, x):
    if x < 0.0:
        return 0.0
    if fam == WEIBULL:
        return -math.expm1(-((x / p2) ** p1))
    if fam == GAMMA:
        return gammainc_pq(p1, p2 * x)[0]
    if fam == EXPONENTIAL:
        return -math.expm1(-p1 * x)
    if fam == UNIFORM:
        if x <= p1:
            return 0.0
        if x >= p2:
            return 1.0
        return (x - p1) / (p2 - p1)
    if fam == BINOMIAL:
        n = int(p1)
        top = int(math.floor(x))
        if top >= n:
            return 1.0
        total = 0.0
        for k in range(top + 1):
            total += math.exp(binom_logpmf(k, n, p2))
        return min(total, 1.0)
    if fam == DIRAC:
        return 1.0 if x >= p1 else 0.0
    return 0.0


@jit
def dist_sf(fam, p1, p2, x):
    if x < 0.0:
        return 1.0
    if fam == WEIBULL:
        return math.exp(-((x / p2) ** p1))
    if fam == GAMMA:
        return gammainc_pq(p1, p2 * x)[1]
    if fam == EXPONENTIAL:
        return math.exp(-p1 * x)
    return 1.0 - dist_cdf(fam, p1, p2, x)


@jit
def dist_mean(fam, p1, p2):
    if fam == WEIBULL:
        return p2 * math.gamma(1.0 + 1.0 / p1)
    if fam == GAMMA:
        return p1 / p2 if p2 > 0.0 else np.inf
    if fam == EXPONENTIAL:
        return 1.0 / p1 if p1 > 0.0 else np.inf
    if fam == UNIFORM:
        return 0.5 * (p1 + p2)
    if fam == BINOMIAL:
        return p1 * p2
    if fam == DIRAC:
        return p1
    return np.inf


@jit
def dist_sample(fam, p1, p2):
    if fam == WEIBULL:
        return p2 * (-math.log(1.0 - np.random.random())) ** (1.0 / p1)
    if fam == GAMMA:
        return np.random.gamma(p1, 1.0 / p2)
    if fam == EXPONENTIAL:
        return -math.log(1.0 - np.random.random()) / p1
    if fam == UNIFORM:
        return p1 + (p2 - p1) * np.random.random()
    if fam == BINOMIAL:
        return float(np.random.binomial(int(p1), p2))
    if fam == DIRAC:
        return p1
    return np.inf


@jit
def scale_params(fam, p1, p2, factor):
    """Multiply the distribution's scale by ``factor``."""
    if fam == WEIBULL:
        return p1, p2 * factor
    if fam == GAMMA:
        return p1, p2 / factor
    if fam == EXPONENTIAL:
        return p1 / factor, p2
    if fam == UNIFORM:
        return p1 * factor, p2 * factor
    if fam == DIRAC:
        return p1 * factor, p2
    return p1, p2


@jit
def instantiate(fam, p1, p2, link, e, interarrival):
    """Environment-indexed law: returns ``(fam, p1, p2)`` for value ``e``."""
    if e <= 0.0:
        if interarrival:
            return EMPTY, 0.0, 0.0
        return DIRAC, 0.0, 0.0
    if link == LINK_SCALE_TIMES_ENV:
        q1, q2 = scale_params(fam, p1, p2, e)
    elif link == LINK_SCALE_INVERSE_ENV or link == LINK_RATE_TIMES_ENV:
        q1, q2 = scale_params(fam, p1, p2, 1.0 / e)
    else:
        q1, q2 = p1, p2
    mu = dist_mean(fam, q1, q2)
    if not mu < np.inf:
        # scaling overflowed for a vanishing environment: same limit as e = 0
        if interarrival:
            return EMPTY, 0.0, 0.0
        return DIRAC, 0.0, 0.0
    if mu == 0.0 and not interarrival:
        return DIRAC, 0.0, 0.0
    return fam, q1, q2


# ---------------------------------------------------------------------------
# counting process


# beyond this many mean gaps the residue sum is exact to double precision
POLE_SWITCH = 60.0


@jit
def gamma_count_pgf_poles(shape, s, x):
    """Residue sum for E[s^N] at x = rate * t, s in (0, 1).

    The Laplace transform (1 - g)/(u (1 - s g)), g = (1 + u)^-shape, has
    simple poles at w_k - 1 with w_k = s^(1/shape) exp(2 pi i k / shape) on
    the principal branch. For non-integer shape the branch cut on
    (-inf, -1] adds a term of order exp(-x), dropped here.
    """
    q = 1.0 - s
    rm1 = math.expm1(math.log1p(-q) / shape)  # s^(1/shape) - 1 without cancellation
    r = 1.0 + rm1
    integer = shape == math.floor(shape)
    kmax = int(math.ceil(shape / 2.0))
    c = -q / (s * shape)
    total = 0.0
    for k in range(-kmax, kmax + 1):
        phi = 2.0 * math.pi * k / shape
        if integer:
            if phi <= -math.pi or phi > math.pi:
                continue
        elif abs(phi) >= math.pi:
            continue
        e = complex(math.cos(phi), math.sin(phi))
        h = math.sin(0.5 * phi)
        wm1 = rm1 * e + complex(-2.0 * h * h, math.sin(phi))
        total += (c * r * e / wm1 * cmath.exp(wm1 * x)).real
    return total


@jit
def gamma_count_pgf(shape, rate, s, t, tol):
    """E[s^N(t)] for a renewal process with Gamma(shape, rate) gaps.

    For small rate*t uses pgf = 1 - (1 - s) * sum_{m>=1} s^(m-1) P(m*shape, rate*t),
    taking every P(m*shape, .) with the Gamma mean 12 sd below the horizon as
    1; for large rate*t switches to the residue sum.
    """
    if t <= 0.0 or s >= 1.0:
        return 1.0
    x = rate * t
    if s <= 0.0:
        return gammainc_pq(shape, x)[1]
    if x >= POLE_SWITCH:
        val = gamma_count_pgf_poles(shape, s, x)
        return min(max(val, 0.0), 1.0)
    m0 = int((x - 12.0 * math.sqrt(x) - 12.0) / shape)
    if m0 < 1:
        m0 = 1
    total = 0.0
    w = 1.0
    if m0 > 1:
        w = s ** (m0 - 1)
        total = (1.0 - w) / (1.0 - s)
    m = m0
    while True:
        p = gammainc_pq(m * shape, x)[0]
        total += w * p
        # remaining terms are bounded by w*p*s/(1-s), weighted by (1-s)
        if w * p < tol or w == 0.0:
            break
        m += 1
        w *= s
    val = 1.0 - (1.0 - s) * total
    if val < 0.0:
        val = 0.0
    return val


@jit
def count_pgf_kernel(fam, p1, p2, s, t, tol):
    if fam == EMPTY or t <= 0.0 or s >= 1.0:
        return 1.0
    if fam == GAMMA:
        return gamma_count_pgf(p1, p2, s, t, tol)
    if fam == EXPONENTIAL:
        return gamma_count_pgf(1.0, p1, s, t, tol)
    if fam == DIRAC:
        if p1 <= 0.0:
            return 0.0
        n = math.floor(t / p1)
        if s == 0.0:
            return 1.0 if n == 0 else 0.0
        return s**n
    return np.nan


@jit
def count_pmf_kernel(fam, p1, p2, m, t):
    if fam == EMPTY or t <= 0.0:
        return 1.0 if m == 0 else 0.0
    if fam == DIRAC:
        if p1 <= 0.0:
            return 0.0
        return 1.0 if m == math.floor(t / p1) else 0.0
    if fam == EXPONENTIAL:
        shape, rate = 1.0, p1
    elif fam == GAMMA:
        shape, rate = p1, p2
    else:
        return np.nan
    x = rate * t
    lo = 1.0 if m == 0 else gammainc_pq(m * shape, x)[0]
    hi = gammainc_pq((m + 1) * shape, x)[0]
    return max(lo - hi, 0.0)


@jit
def nbu_pgf_bound_kernel(fam, p1, p2, s, t):
    if fam == EMPTY or t <= 0.0 or s >= 1.0:
        return 1.0
    sf = dist_sf(fam, p1, p2, t)
    if sf <= 0.0:
        return 0.0
    return sf ** (1.0 - s)


@jit
def mixture_survival(t, rows, tol):
    """Product over groups of weighted sums of per-stream survival factors.

    ``rows`` columns: group, kind, fam, p1, p2, s, weight. ``kind`` selects
    the exact pgf or its NBU lower bound.
    """
    a = 0.0
    b = 0.0
    has_b = False
    for i in range(rows.shape[0]):
        kind = int(rows[i, 1])
        fam = int(rows[i, 2])
        if kind == ROW_PGF:
            v = count_pgf_kernel(fam, rows[i, 3], rows[i, 4], rows[i, 5], t, tol)
        else:
            v = nbu_pgf_bound_kernel(fam, rows[i, 3], rows[i, 4], rows[i, 5], t)
        if rows[i, 0] == 0.0:
            a += rows[i, 6] * v
        else:
            b += rows[i, 6] * v
            has_b = True
    if has_b:
        return a * b
    return a


@jit
def mixture_survival_grid(ts, rows, tol):
    out = np.empty(ts.shape[0])
    for i in range(ts.shape[0]):
        out[i] = mixture_survival(ts[i], rows, tol)
    return out


@jit
def group_pgf_grid(ts, rows, tol):
    """Per-group mixtures evaluated on a grid: shape (2, len(ts))."""
    out = np.zeros((2, ts.shape[0]))
    for j in range(ts.shape[0]):
        for i in range(rows.shape[0]):
            kind = int(rows[i, 1])
            fam = int(rows[i, 2])
            if kind == ROW_PGF:
                v = count_pgf_kernel(fam, rows[i, 3], rows[i, 4], rows[i, 5], ts[j], tol)
            else:
                v = nbu_pgf_bound_kernel(fam, rows[i, 3], rows[i, 4], rows[i, 5], ts[j])
            out[int(rows[i, 0]), j] += rows[i, 6] * v
    return out


# ---------------------------------------------------------------------------
# adaptive quadrature on [0, inf) via t = scale * u / (1 - u)


def make_survival_integrator(f, use_jit=True):
    """Build ``integrate(params, scale, abs_tol, max_intervals, cutoff)``.

    ``f(t, params)`` is the survival-type integrand. Global adaptive
    Gauss-Kronrod 7/15 on the compactified axis; the range beyond the first
    doubling point where ``f < cutoff`` is replaced by an exponential tail
    estimate that is also added to the error estimate.
    Returns ``(value, error_estimate, converged)``.
    """
    from ._accel import NUMBA_ENABLED

    if use_jit and NUMBA_ENABLED:
        import numba

        deco = numba.njit(nogil=True)
    else:

        def deco(fn):
            return fn

    nodes = _GK_NODES
    wk = _GK_WK
    wg = _GK_WG

    @deco
    def integrand(params, scale, u):
        one_m = 1.0 - u
        return f(scale * u / one_m, params) * scale / (one_m * one_m)

    @deco
    def gk15(params, scale, a, b):
        half = 0.5 * (b - a)
        centre = 0.5 * (a + b)
        g0 = integrand(params, scale, centre)
        res_k = wk[0] * g0
        res_g = wg[0] * g0
        for j in range(1, 8):
            dx = half * nodes[j]
            s = integrand(params, scale, centre - dx) + integrand(params, scale, centre + dx)
            res_k += wk[j] * s
            res_g += wg[j] * s
        return res_k * half, abs(res_k - res_g) * half

    @deco
    def integrate(params, scale, abs_tol, max_intervals, cutoff):
        t_cut = scale
        f_cut = f(t_cut, params)
        n_doubling = 0
        while f_cut >= cutoff and n_doubling < 200:
            t_cut *= 2.0
            f_cut = f(t_cut, params)
            n_doubling += 1
        tail = 0.0
        u_hi = 1.0
        if f_cut < cutoff:
            u_hi = t_cut / (scale + t_cut)
            if f_cut > 0.0:
                f_half = f(0.5 * t_cut, params)
                if f_half > f_cut:
                    tail = f_cut * 0.5 * t_cut / math.log(f_half / f_cut)
                else:
                    tail = f_cut * t_cut
        n_max = max(max_intervals, 8)
        lo = np.empty(n_max)
        hi = np.empty(n_max)
        val = np.empty(n_max)
        err = np.empty(n_max)
        for k in range(8):
            lo[k] = u_hi * k / 8.0
            hi[k] = u_hi * (k + 1) / 8.0
            val[k], err[k] = gk15(params, scale, lo[k], hi[k])
        n = 8
        while True:
            total = 0.0
            total_err = 0.0
            worst = 0
            for k in range(n):
                total += val[k]
                total_err += err[k]
                if err[k] > err[worst]:
                    worst = k
            if total_err <= abs_tol or n >= n_max:
                break
            a = lo[worst]
            b = hi[worst]
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            hi[worst] = mid
            val[worst], err[worst] = gk15(params, scale, a, mid)
            lo[n] = mid
            hi[n] = b
            val[n], err[n] = gk15(params, scale, mid, b)
            n += 1
        total_err += abs(tail)
        return total + tail, total_err, total_err <= abs_tol

    return integrate


_MIXTURE_INTEGRATOR = None


def mixture_integrator():
    """Lazily compiled integrator of :func:`mixture_survival`."""
    global _MIXTURE_INTEGRATOR
    if _MIXTURE_INTEGRATOR is None:
        tol = 1e-14

        @jit(cache=False)
        def f(t, params):
            return mixture_survival(t, params, tol)

        _MIXTURE_INTEGRATOR = make_survival_integrator(f)
    return _MIXTURE_INTEGRATOR
