"""Time-to-compromise distribution, its bounds, and its asymptotic form."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .dist import DistributionSpec, check_nbu, check_nbue, default_aging_grid, pmf_support
from .model import AttackDefenseModel
from .renewal import integrate_mixture_survival

GL_ORDER = 64
PGF_TOL = 1e-14


class PreconditionError(ValueError):
    """A bound was requested but its aging/order precondition fails."""


class SeriesTailError(ArithmeticError):
    pass


@lru_cache(maxsize=None)
def _gauss_legendre(order):
    return np.polynomial.legendre.leggauss(order)


def pull_env_nodes(global_env: DistributionSpec):
    """Quadrature nodes/weights for integrals against the pull environment."""
    if global_env.family == "uniform":
        x, w = _gauss_legendre(GL_ORDER)
        a, b = global_env.p1, global_env.p2
        return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * w
    if global_env.family in ("dirac", "binomial"):
        return pmf_support(global_env)
    raise PreconditionError(
        f"pull environment {global_env.family} is not supported "
        "(use uniform, dirac or binomial)"
    )


def _rows_for(m: AttackDefenseModel, v, r_values, r_weights, th_values, th_weights, kind=K.ROW_PGF):
    spec = m.spec(v)
    rows = []
    for group, values, weights, mag_kind, gap_kind, c in (
        (0, r_values, r_weights, "push_magnitude", "push_interarrival", spec.c1),
        (1, th_values, th_weights, "pull_magnitude", "pull_interarrival", spec.c2),
    ):
        mag = m.families[mag_kind]
        gap = m.families[gap_kind]
        for e, w in zip(values, weights):
            if w <= 0:
                continue
            mc, m1, m2 = mag.instantiate_triple(e)
            s = K.dist_cdf(mc, m1, m2, c)
            gc, g1, g2 = gap.instantiate_triple(e)
            rows.append((group, kind, gc, g1, g2, s, w))
    return np.array(rows, dtype=float).reshape(-1, 7)


def node_rows(m: AttackDefenseModel, v, kind=K.ROW_PGF) -> np.ndarray:
    """Stream table for node ``v`` mixed over its local and pull environments."""
    spec = m.spec(v)
    rv, rw = pmf_support(spec.local_env)
    tv, tw = pull_env_nodes(spec.global_env)
    return _rows_for(m, v, rv, rw, tv, tw, kind)


def env_rows(m: AttackDefenseModel, v, r: float, theta: float, kind=K.ROW_PGF) -> np.ndarray:
    """Stream table with frozen environments (J_v = r, Theta_v = theta)."""
    return _rows_for(m, v, [r], [1.0], [theta], [1.0], kind)


def _check_rows(rows):
    for fam in rows[:, 2].astype(int):
        if fam not in (K.GAMMA, K.EXPONENTIAL, K.DIRAC, K.EMPTY):
            from .renewal import UnsupportedFamilyError

            raise UnsupportedFamilyError(
                f"{K_NAMES[fam]} inter-arrivals need the simulator for counting probabilities"
            )


K_NAMES = {K.WEIBULL: "weibull", K.GAMMA: "gamma", K.EXPONENTIAL: "exponential",
           K.UNIFORM: "uniform", K.BINOMIAL: "binomial", K.DIRAC: "dirac", K.EMPTY: "empty"}


def _survival_grid(rows, t_grid):
    return K.mixture_survival_grid(np.asarray(t_grid, dtype=float), rows, PGF_TOL)


# ---------------------------------------------------------------------------
# distribution of the time to compromise


def ttc_survival_given_env(m: AttackDefenseModel, v, r: float, theta: float, t: float) -> float:
    """P(T_c(r, theta) > t): product of the push and pull pgf factors."""
    rows = env_rows(m, v, r, theta)
    _check_rows(rows)
    return float(K.mixture_survival(float(t), rows, PGF_TOL))


def ttc_cdf(m: AttackDefenseModel, v, t_grid) -> np.ndarray:
    rows = node_rows(m, v)
    _check_rows(rows)
    return np.clip(1.0 - _survival_grid(rows, t_grid), 0.0, 1.0)


def _interarrival_laws(m: AttackDefenseModel, v):
    rows = node_rows(m, v)
    laws = set()
    for row in rows:
        code = int(row[2])
        if code != K.EMPTY:
            laws.add((code, float(row[3]), float(row[4])))
    return sorted(laws)


@lru_cache(maxsize=4096)
def _aging_ok(code, p1, p2, which):
    d = DistributionSpec(K_NAMES[code], p1, p2)
    if d.family == "dirac":
        return True
    grid = default_aging_grid(d)
    return (check_nbu(d, grid) if which == "NBU" else check_nbue(d, grid)).holds


def aging_holds(m: AttackDefenseModel, v, which: str) -> bool:
    """NBU/NBUE for every inter-arrival law node ``v`` can face."""
    return all(_aging_ok(*law, which) for law in _interarrival_laws(m, v))


def ttc_cdf_upper(m: AttackDefenseModel, v, t_grid, check: bool = True) -> np.ndarray:
    """Upper bound on q(t) valid for NBU waiting times."""
    if check and not aging_holds(m, v, "NBU"):
        raise PreconditionError(f"node {m.node_id(v)}: inter-arrival times are not NBU")
    rows = node_rows(m, v, K.ROW_NBU_BOUND)
    return np.clip(1.0 - _survival_grid(rows, t_grid), 0.0, 1.0)


def ttc_cdf_asymptotic(m: AttackDefenseModel, v, t_grid, push_mean=None, pull_mean=None) -> np.ndarray:
    """Large-threshold approximation built from the waiting-time means only.

    ``push_mean(r)`` and ``pull_mean(theta)`` default to the means of the
    model's inter-arrival laws. The raw value is returned; it is a sum of two
    mixture terms and may exceed 1.
    """
    spec = m.spec(v)
    t = np.asarray(t_grid, dtype=float)
    out = np.zeros_like(t)
    rv, rw = pmf_support(spec.local_env)
    tv, tw = pull_env_nodes(spec.global_env)
    for values, weights, mag_kind, gap_kind, c, mean_fn in (
        (rv, rw, "push_magnitude", "push_interarrival", spec.c1, push_mean),
        (tv, tw, "pull_magnitude", "pull_interarrival", spec.c2, pull_mean),
    ):
        mag = m.families[mag_kind]
        gap = m.families[gap_kind]
        for e, w in zip(values, weights):
            if e <= 0 or w <= 0:
                continue
            mu = mean_fn(e) if mean_fn is not None else K.dist_mean(*gap.instantiate_triple(e))
            if not math.isfinite(mu):
                raise PreconditionError(f"infinite mean waiting time at environment {e:g}")
            sf_c = K.dist_sf(*mag.instantiate_triple(e), c)
            out += w * -np.expm1(-sf_c * t / mu)
    return out


# ---------------------------------------------------------------------------
# expectations


def _can_fire(rows):
    # a stream fires eventually iff it has arrivals and a positive success chance
    return (rows[:, 2] != K.EMPTY) & (rows[:, 5] < 1.0)


def _never_fires_mass(rows):
    mass = 1.0
    for g in (0, 1):
        sel = rows[:, 0] == g
        if not sel.any():
            continue
        mass *= float(rows[sel & ~_can_fire(rows), 6].sum())
    return mass


def _lower_bound_rows(rows):
    """Harmonic lower bound on E[T] computed from a stream table."""
    rate = np.zeros(rows.shape[0])
    for i, row in enumerate(rows):
        mu = K.dist_mean(int(row[2]), row[3], row[4])
        rate[i] = (1.0 - row[5]) / mu if math.isfinite(mu) and mu > 0 else 0.0
    push = rows[:, 0] == 0
    pull = ~push
    total = 0.0
    for i in np.nonzero(push)[0]:
        for j in np.nonzero(pull)[0]:
            lam = rate[i] + rate[j]
            w = rows[i, 6] * rows[j, 6]
            if w == 0:
                continue
            if lam <= 0:
                return math.inf
            total += float(w / lam)
    return total


def expected_from_rows(rows, abs_tol=1e-6):
    _check_rows(rows)
    if _never_fires_mass(rows) > 0:
        return math.inf
    scale = _lower_bound_rows(rows)
    value, _ = integrate_mixture_survival(rows, abs_tol=abs_tol, scale=scale)
    return value


def expected_ttc(m: AttackDefenseModel, v, abs_tol: float = 1e-6) -> float:
    """E[T] as the integral of 1 - q(t); ``inf`` when compromise can fail forever."""
    return expected_from_rows(node_rows(m, v), abs_tol)


def integrated_upper_survival(m: AttackDefenseModel, v, abs_tol: float = 1e-6) -> float:
    """Integral of 1 - q_upper(t), the middle term of the ordering chain."""
    rows = node_rows(m, v, K.ROW_NBU_BOUND)
    if _never_fires_mass(rows) > 0:
        return math.inf
    value, _ = integrate_mixture_survival(rows, abs_tol=abs_tol, scale=_lower_bound_rows(rows))
    return value


def expected_ttc_lower_iid(m: AttackDefenseModel, v, check: bool = True) -> float:
    """Closed-form lower bound on E[T] for NBUE waiting times."""
    if check and not aging_holds(m, v, "NBUE"):
        raise PreconditionError(f"node {m.node_id(v)}: inter-arrival times are not NBUE")
    return _lower_bound_rows(node_rows(m, v))


@dataclass
class StreamSequence:
    """Non-identical attack sequence i = 1..I of one stream at a fixed environment."""

    magnitudes: list
    interarrival_means: list

    def __post_init__(self):
        if len(self.magnitudes) != len(self.interarrival_means) or not self.magnitudes:
            raise ValueError("need equally long, nonempty magnitude and mean sequences")


def sequence_expected_ttc(seq: StreamSequence, c: float, tail_tol: float = 1e-10) -> float:
    """E[T] of one stream: sum_m prod_{i<=m} F_i(c) E[Y_{m+1}]."""
    total = 0.0
    prod = 1.0
    for mag, mu in zip(seq.magnitudes, seq.interarrival_means):
        total += prod * mu
        prod *= float(mag.cdf(c))
        if prod == 0.0:
            return total
    if prod > tail_tol:
        raise SeriesTailError(
            f"remaining mass {prod:.3g} after {len(seq.magnitudes)} attacks exceeds {tail_tol:g}"
        )
    return total


def check_sequence_assumptions(seq: StreamSequence, c: float, grid=None) -> list:
    """Magnitudes stochastically increasing in i, waiting-time means decreasing."""
    problems = []
    if grid is None:
        grid = np.linspace(0.0, 4.0 * c, 41)
    prev = None
    for i, mag in enumerate(seq.magnitudes):
        sf = np.asarray(mag.sf(grid))
        if prev is not None and np.any(sf < prev - 1e-12):
            problems.append(f"magnitude {i + 1} is not stochastically larger than {i}")
        prev = sf
    means = np.asarray(seq.interarrival_means, dtype=float)
    if np.any(np.diff(means) > 1e-15):
        problems.append("waiting-time means are not decreasing in i")
    return problems


def expected_ttc_lower_seq(push, pull, local_env: DistributionSpec, global_env: DistributionSpec,
                           c1: float, c2: float, check: bool = True) -> float:
    """Lower bound on E[T] for non-identical attack sequences.

    ``push(r)`` and ``pull(theta)`` return a :class:`StreamSequence` (or
    ``None`` for a stream that never attacks). Single-stream expectations
    are combined harmonically and mixed over both environments.
    """
    rv, rw = pmf_support(local_env)
    tv, tw = pull_env_nodes(global_env)

    def rate(seq, c):
        if seq is None:
            return 0.0
        if check:
            problems = check_sequence_assumptions(seq, c)
            if problems:
                raise PreconditionError("; ".join(problems))
        return 1.0 / sequence_expected_ttc(seq, c)

    pull_rates = [rate(pull(th), c2) for th in tv]
    total = 0.0
    for r, wr in zip(rv, rw):
        if wr <= 0:
            continue
        push_rate = rate(push(r), c1) if r > 0 else 0.0
        for pr, wt in zip(pull_rates, tw):
            lam = push_rate + pr
            if lam <= 0:
                return math.inf
            total += wr * wt / lam
    return total


def iid_sequences(m: AttackDefenseModel, horizon: int = 2000):
    """``(push, pull)`` callables repeating the model's i.i.d. laws ``horizon`` times."""

    def make(mag_kind, gap_kind):
        mag = m.families[mag_kind]
        gap = m.families[gap_kind]

        def seq(e):
            if e <= 0:
                return None
            mu = K.dist_mean(*gap.instantiate_triple(e))
            return StreamSequence([mag.instantiate(e)] * horizon, [mu] * horizon)

        return seq

    return make("push_magnitude", "push_interarrival"), make("pull_magnitude", "pull_interarrival")


# ---------------------------------------------------------------------------
# result bundle


def default_t_grid(m: AttackDefenseModel, v, points: int = 201, target: float = 0.01) -> np.ndarray:
    """Uniform grid on [0, T_max] with 1 - q(T_max) below ``target``."""
    rows = node_rows(m, v)
    _check_rows(rows)
    if _never_fires_mass(rows) > 1.0 - target:
        raise PreconditionError("compromise probability never reaches the grid target")
    t_max = _lower_bound_rows(rows)
    if not math.isfinite(t_max) or t_max <= 0:
        t_max = 1.0
    for _ in range(200):
        if K.mixture_survival(t_max, rows, PGF_TOL) < target:
            break
        t_max *= 2.0
    return np.linspace(0.0, t_max, points)


@dataclass
class TtcResult:
    node: str
    t_grid: np.ndarray
    q: np.ndarray
    q_upper: np.ndarray | None = None
    q_asymptotic_raw: np.ndarray | None = None
    expected_ttc: float = math.nan
    expected_ttc_lower: float = math.nan
    provenance: dict = field(default_factory=dict)

    @property
    def q_asymptotic(self):
        if self.q_asymptotic_raw is None:
            return None
        return np.clip(self.q_asymptotic_raw, 0.0, 1.0)

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "q", "q_upper", "q_asymptotic"])
        qa = self.q_asymptotic
        for i, t in enumerate(self.t_grid):
            w.writerow([
                _fmt(t),
                _fmt(self.q[i]),
                "" if self.q_upper is None else _fmt(self.q_upper[i]),
                "" if qa is None else _fmt(qa[i]),
            ])

    def write_metrics_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        w.writerow(["expected_ttc", _fmt(self.expected_ttc)])
        w.writerow(["expected_ttc_lower", _fmt(self.expected_ttc_lower)])
        for k, v in sorted(self.provenance.items()):
            w.writerow([f"assumption_{k}", int(bool(v))])


def _fmt(x):
    x = float(x)
    if math.isinf(x):
        return "inf"
    if math.isnan(x):
        return "nan"
    return repr(x)


def ttc_metrics(m: AttackDefenseModel, v, t_grid=None, points: int = 201, t_max: float | None = None,
                bounds: bool = False, asymptotic: bool = False) -> TtcResult:
    """Everything the time-to-compromise metric reports for one node."""
    v = m.node_id(v)
    if t_grid is None:
        if t_max is not None:
            if not t_max > 0:
                raise ValueError("t_max must be > 0")
            t_grid = np.linspace(0.0, t_max, points)
        else:
            t_grid = default_t_grid(m, v, points)
    t_grid = np.asarray(t_grid, dtype=float)
    nbu = aging_holds(m, v, "NBU")
    nbue = aging_holds(m, v, "NBUE")
    res = TtcResult(v, t_grid, ttc_cdf(m, v, t_grid), provenance={"NBU": nbu, "NBUE": nbue})
    res.expected_ttc = expected_ttc(m, v)
    if bounds:
        res.q_upper = ttc_cdf_upper(m, v, t_grid, check=False)
        res.expected_ttc_lower = expected_ttc_lower_iid(m, v, check=False) if nbue else math.nan
    if asymptotic:
        res.q_asymptotic_raw = ttc_cdf_asymptotic(m, v, t_grid)
    return res
