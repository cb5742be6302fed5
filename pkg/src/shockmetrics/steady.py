"""Mean-field steady-state compromise probabilities and their bounds."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .model import AttackDefenseModel, validate_assumptions
from .presets import weibull_gamma_families
from .ttc import _aging_ok, env_rows, expected_from_rows

STEP_TOL = 1e-7
RESIDUAL_TOL = 1e-6
MAX_ITER = 500


class BracketError(ArithmeticError):
    def __init__(self, lo, hi, g_lo, g_hi):
        super().__init__(
            f"residual has the same sign at both ends: g({lo:.6g})={g_lo:.3g}, g({hi:.6g})={g_hi:.3g}"
        )
        self.lo, self.hi, self.g_lo, self.g_hi = lo, hi, g_lo, g_hi


def default_threads() -> int:
    raw = os.environ.get("SHOCKMETRICS_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _renewal_ratio(recovery_mean, ettc):
    if math.isinf(ettc):
        return 0.0
    return recovery_mean / (recovery_mean + ettc)


def mean_field_expected_ttc(m: AttackDefenseModel, v, p) -> float:
    """E[T_v] with both environments replaced by their means.

    The push environment is the expected number of compromised in-neighbours
    (a real number), the pull environment the mean of ``global_env``.
    """
    i = v if isinstance(v, (int, np.integer)) else m.graph.index[v]
    p = np.asarray(p, dtype=float)
    e_push = float(p[m.graph.in_neighbors[i]].sum())
    return expected_from_rows(env_rows(m, i, e_push, m.spec(i).theta_bar))


class _Phi:
    """The renewal-reward map p -> E[R] / (E[R] + E[T](p)) with memoization."""

    def __init__(self, m: AttackDefenseModel, threads: int = 1):
        self.m = m
        self.threads = threads
        self.cache = {}
        self.evaluations = 0

    def node_key(self, i, e_push):
        s = self.m.spec(i)
        return (e_push, s.c1, s.c2, s.theta_bar)

    def ettc(self, i, e_push):
        key = self.node_key(i, e_push)
        hit = self.cache.get(key)
        if hit is None:
            self.evaluations += 1
            hit = expected_from_rows(env_rows(self.m, i, e_push, self.m.spec(i).theta_bar))
            self.cache[key] = hit
        return hit

    def __call__(self, p):
        g = self.m.graph
        e = np.array([p[nb].sum() for nb in g.in_neighbors])
        todo = {}
        for i in range(g.n):
            key = self.node_key(i, float(e[i]))
            if key not in self.cache:
                todo.setdefault(key, i)
        if todo and self.threads > 1 and len(todo) > 1:
            items = list(todo.items())
            with ThreadPoolExecutor(self.threads) as pool:
                vals = list(pool.map(lambda kv: self.ettc(kv[1], kv[0][0]), items))
            del vals
        out = np.empty(g.n)
        for i in range(g.n):
            out[i] = _renewal_ratio(self.m.spec(i).recovery_mean, self.ettc(i, float(e[i])))
        return out


@dataclass
class IterationTrace:
    p: np.ndarray
    iterations: int
    converged: bool
    monotone: bool


def _iterate(phi, start, step_tol, max_iter, ascending):
    p = start.copy()
    monotone = True
    for it in range(1, max_iter + 1):
        nxt = phi(p)
        step = nxt - p
        if ascending and step.min() < -1e-12:
            monotone = False
        if not ascending and step.max() > 1e-12:
            monotone = False
        p = nxt
        if np.abs(step).max() < step_tol:
            return IterationTrace(p, it, True, monotone)
    return IterationTrace(p, max_iter, False, monotone)


@dataclass
class SteadyStateBounds:
    p_lower: np.ndarray
    p_upper: np.ndarray
    p_upper_integral: np.ndarray
    p_upper_nbue: np.ndarray
    nbue_ok: np.ndarray
    a4_ok: bool

    @property
    def unverified(self) -> bool:
        return not self.a4_ok


@dataclass
class SteadyStateResult:
    nodes: tuple
    p: np.ndarray
    converged: bool
    iterations: int
    residual: float
    bracket: tuple
    eq_residual: float = math.nan
    monotone: bool = True
    bounds: SteadyStateBounds | None = None
    diagnostics: list = field(default_factory=list)

    @property
    def p_lower(self):
        return None if self.bounds is None else self.bounds.p_lower

    @property
    def p_upper(self):
        return None if self.bounds is None else self.bounds.p_upper

    def as_dict(self):
        return dict(zip(self.nodes, self.p))

    def write_csv(self, fh, bounds: bool = True):
        if not self.converged:
            lo, hi = self.bracket
            fh.write(f"# not converged after {self.iterations} iterations, residual {self.residual:.3g}\n")
            for i, v in enumerate(self.nodes):
                fh.write(f"# bracket node={v} from_zero={lo[i]!r} from_one={hi[i]!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        header = ["node", "p", "p_lower", "p_upper", "converged"]
        with_bounds = bounds and self.bounds is not None
        if with_bounds:
            header.append("unverified")
        w.writerow(header)
        for i, v in enumerate(self.nodes):
            row = [v, repr(float(self.p[i]))]
            if with_bounds:
                row += [repr(float(self.bounds.p_lower[i])), repr(float(self.bounds.p_upper[i]))]
            else:
                row += ["", ""]
            row.append(int(self.converged))
            if with_bounds:
                row.append(int(self.bounds.unverified))
            w.writerow(row)


def steady_state_bounds(m: AttackDefenseModel, check_a4: bool = True) -> SteadyStateBounds:
    """Bounds that need no fixed-point solve.

    Lower: pull attacks alone. Upper: every in-neighbour compromised, as the
    exact integral and (when both waiting-time laws are NBUE) as the
    closed-form harmonic combination; the smaller upper bound is reported.
    """
    n = m.graph.n
    lower = np.empty(n)
    up_int = np.empty(n)
    up_nbue = np.full(n, np.inf)
    nbue_ok = np.zeros(n, dtype=bool)
    cache = {}
    for i in range(n):
        s = m.spec(i)
        deg = m.graph.degree(i)
        th = s.theta_bar
        key = (deg, s.c1, s.c2, th, s.recovery_mean)
        if key not in cache:
            er = s.recovery_mean
            pm = m.families["pull_magnitude"].instantiate_triple(th)
            pg = m.families["pull_interarrival"].instantiate_triple(th)
            sf2 = K.dist_sf(*pm, s.c2)
            ey2 = K.dist_mean(*pg)
            pull_rate = sf2 / ey2 if ey2 > 0 and math.isfinite(ey2) else 0.0
            lo = 1.0 / (1.0 + 1.0 / (pull_rate * er)) if pull_rate > 0 else 0.0
            hi_int = _renewal_ratio(er, expected_from_rows(env_rows(m, i, float(deg), th)))
            qm = m.families["push_magnitude"].instantiate_triple(float(deg))
            qg = m.families["push_interarrival"].instantiate_triple(float(deg))
            ey1 = K.dist_mean(*qg)
            push_rate = K.dist_sf(*qm, s.c1) / ey1 if ey1 > 0 and math.isfinite(ey1) else 0.0
            tot = (push_rate + pull_rate) * er
            hi_nbue = 1.0 / (1.0 + 1.0 / tot) if tot > 0 else 0.0
            ok = all(
                law[0] == K.EMPTY or _aging_ok(*law, "NBUE") for law in (qg, pg)
            )
            cache[key] = (lo, hi_int, hi_nbue, ok)
        lower[i], up_int[i], up_nbue[i], nbue_ok[i] = cache[key]
    upper = np.where(nbue_ok, np.minimum(up_int, up_nbue), up_int)
    a4 = validate_assumptions(m, "A4").passed if check_a4 else True
    return SteadyStateBounds(lower, upper, up_int, up_nbue, nbue_ok, a4)


def solve_steady_state(m: AttackDefenseModel, step_tol: float = STEP_TOL, residual_tol: float = RESIDUAL_TOL,
                       max_iter: int = MAX_ITER, threads: int | None = None,
                       with_bounds: bool = True) -> SteadyStateResult:
    """Fixed point of the renewal-reward map by two-sided monotone iteration.

    The map is monotone on [0, 1]^n, so iterating from all-zeros climbs to
    the least fixed point and from all-ones descends to the greatest. When
    the two limits agree within ``residual_tol`` their midpoint is reported;
    otherwise both are kept in ``bracket`` and ``converged`` is False.
    """
    phi = _Phi(m, threads or default_threads())
    n = m.graph.n
    up = _iterate(phi, np.zeros(n), step_tol, max_iter, ascending=True)
    down = _iterate(phi, np.ones(n), step_tol, max_iter, ascending=False)
    gap = float(np.abs(down.p - up.p).max()) if n else 0.0
    p = 0.5 * (up.p + down.p)
    fp = phi(p)
    residual = float(np.abs(fp - p).max()) if n else 0.0
    converged = up.converged and down.converged and gap <= residual_tol and residual <= residual_tol
    diag = []
    if not converged:
        diag.append(f"gap between extremal iterates {gap:.3g}, residual {residual:.3g}")
    # the unknown-multiplies-integral form of the same balance equation
    eq = 0.0
    for i in range(n):
        et = phi.ettc(i, float(p[m.graph.in_neighbors[i]].sum()))
        er = m.spec(i).recovery_mean
        if math.isfinite(et):
            eq = max(eq, abs(p[i] * et - (1.0 - p[i]) * er))
    res = SteadyStateResult(
        nodes=m.graph.nodes,
        p=p,
        converged=converged,
        iterations=max(up.iterations, down.iterations),
        residual=residual,
        bracket=(up.p, down.p),
        eq_residual=eq,
        monotone=up.monotone and down.monotone,
        diagnostics=diag,
    )
    if with_bounds:
        res.bounds = steady_state_bounds(m)
    return res


# ---------------------------------------------------------------------------
# regular graphs with the Weibull/Gamma example families


@dataclass(frozen=True)
class RegularParams:
    alpha: float = 2.0
    beta: float = 3.5
    gamma: float = 1.0
    lam: float = 1.5
    theta: float = 4.0
    recovery_mean: float = 4.0
    c1: float = 2.0
    c2: float = 2.0

    def with_c(self, c1, c2=None):
        from dataclasses import replace

        return replace(self, c1=c1, c2=c1 if c2 is None else c2)


def regular_bounds(k: int, params: RegularParams):
    """Closed-form (p_lower, p_upper) for a k-regular graph."""
    a = params
    er = a.recovery_mean
    pull = math.exp(-((a.c2 / a.theta) ** a.gamma)) * a.theta * er / a.lam
    push = math.exp(-((a.c1 / k) ** a.alpha)) * k * er / a.beta
    lower = 1.0 / (1.0 + 1.0 / pull) if pull > 0 else 0.0
    upper = 1.0 / (1.0 + 1.0 / (push + pull)) if push + pull > 0 else 0.0
    return lower, upper


def _regular_rows(k, p, params):
    a = params
    fams = weibull_gamma_families(a.alpha, a.beta, a.gamma, a.lam)
    rows = []
    for group, mag, gap, e, c in (
        (0, fams["push_magnitude"], fams["push_interarrival"], k * p, a.c1),
        (1, fams["pull_magnitude"], fams["pull_interarrival"], a.theta, a.c2),
    ):
        mc = mag.instantiate_triple(e)
        gc = gap.instantiate_triple(e)
        rows.append((group, K.ROW_PGF, gc[0], gc[1], gc[2], K.dist_cdf(*mc, c), 1.0))
    return np.array(rows, dtype=float)


def regular_phi(k: int, p: float, params: RegularParams) -> float:
    return _renewal_ratio(params.recovery_mean, expected_from_rows(_regular_rows(k, p, params)))


@dataclass
class RegularResult:
    k: int
    c1: float
    c2: float
    p: float
    p_lower: float
    p_upper: float
    eq_residual: float


def regular_graph_steady_state(k: int, params: RegularParams, xtol: float = 1e-10) -> RegularResult:
    """Scalar fixed point p = Phi(p) on a k-regular graph, by bisection on [p-, p+]."""
    if k < 1:
        raise ValueError("k must be >= 1")
    lo_b, hi_b = regular_bounds(k, params)

    def g(p):
        return p - regular_phi(k, p, params)

    lo, hi = lo_b, hi_b
    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0:
        hi = lo
    elif g_hi == 0.0:
        lo = hi
    elif (g_lo > 0) == (g_hi > 0):
        raise BracketError(lo, hi, g_lo, g_hi)
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if (g_mid > 0) == (g_hi > 0):
            hi, g_hi = mid, g_mid
        else:
            lo, g_lo = mid, g_mid
    p = 0.5 * (lo + hi)
    et = expected_from_rows(_regular_rows(k, p, params))
    eq = p * et - (1.0 - p) * params.recovery_mean
    return RegularResult(k, params.c1, params.c2, p, lo_b, hi_b, eq)


def write_regular_csv(fh, results):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["c", "k", "p", "p_lower", "p_upper"])
    for r in results:
        c = r.c1 if r.c1 == r.c2 else f"{r.c1:g}/{r.c2:g}"
        w.writerow([c, r.k, repr(r.p), repr(r.p_lower), repr(r.p_upper)])
