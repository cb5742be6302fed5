"""Monte Carlo oracles for the time to compromise and the network occupancy."""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels as K
from ._accel import NUMBA_ENABLED, jit
from .dist import DistributionSpec
from .model import AttackDefenseModel

ARRIVAL_CAP = 10**9
BLOCK = 4096
FAMILY_ORDER = ("push_magnitude", "push_interarrival", "pull_magnitude", "pull_interarrival")


class SimMode(str, enum.Enum):
    NODE_FROZEN = "node-frozen"
    NODE_MIXED = "node-mixed"
    NETWORK = "network"


class EnvRefresh(str, enum.Enum):
    AT_RECOVERY = "at-recovery"
    DYNAMIC = "dynamic"


class CapHitError(RuntimeError):
    """An attack stream never exceeded its threshold within the arrival cap."""


class EventLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    replications: int = 10_000
    seed: int = 0
    mode: SimMode = SimMode.NODE_MIXED
    horizon: float = 2000.0
    warmup_fraction: float = 0.25
    env_refresh: EnvRefresh = EnvRefresh.AT_RECOVERY
    max_events: int = 50_000_000
    arrival_cap: int = ARRIVAL_CAP
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", SimMode(self.mode))
        object.__setattr__(self, "env_refresh", EnvRefresh(self.env_refresh))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.mode is SimMode.NETWORK and not self.horizon > 0:
            raise ValueError("horizon must be > 0 in network mode")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass
class SimResult:
    mode: SimMode
    seed: int
    replications: int
    samples: np.ndarray | None = None
    nodes: tuple = ()
    occupancy: np.ndarray | None = None
    occupancy_stderr: float = math.nan
    series_time: np.ndarray | None = None
    series_fraction: np.ndarray | None = None
    events: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def empirical_cdf(self) -> np.ndarray:
        return np.sort(self.samples)

    @property
    def mean_T(self) -> float:
        return float(np.mean(self.samples))

    @property
    def stderr_T(self) -> float:
        n = len(self.samples)
        return float(np.std(self.samples, ddof=1) / math.sqrt(n)) if n > 1 else math.nan

    @property
    def mean_occupancy(self) -> float:
        return float(np.mean(self.occupancy))

    def ecdf(self, t) -> np.ndarray:
        xs = self.empirical_cdf
        return np.searchsorted(xs, np.asarray(t, dtype=float), side="right") / len(xs)

    def _header(self, fh):
        fh.write(f"# mode={self.mode.value}\n# seed={self.seed}\n# replications={self.replications}\n")
        for k, v in self.meta.items():
            fh.write(f"# {k}={v}\n")

    def write_csv(self, fh):
        self._header(fh)
        w = csv.writer(fh, lineterminator="\n")
        if self.mode is SimMode.NETWORK:
            fh.write(f"# mean_occupancy={self.mean_occupancy!r}\n# occupancy_stderr={self.occupancy_stderr!r}\n")
            w.writerow(["node", "occupancy"])
            for v, occ in zip(self.nodes, self.occupancy):
                w.writerow([v, repr(float(occ))])
        else:
            fh.write(f"# mean_T={self.mean_T!r}\n# stderr_T={self.stderr_T!r}\n")
            w.writerow(["replication", "T"])
            for i, t in enumerate(self.samples):
                w.writerow([i, repr(float(t))])

    def write_series_csv(self, fh):
        self._header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "fraction"])
        for t, f in zip(self.series_time, self.series_fraction):
            w.writerow([repr(float(t)), repr(float(f))])


def derive_seed(seed: int, index: int) -> int:
    """splitmix64 of (seed, index), folded to 32 bits for the generator."""
    mask = 0xFFFFFFFFFFFFFFFF
    z = (seed + 0x9E3779B97F4A7C15 * (index + 1)) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    z ^= z >> 31
    return (z ^ (z >> 32)) & 0xFFFFFFFF


# ---------------------------------------------------------------------------
# kernels


@jit
def _seed(s):
    np.random.seed(s)


@jit
def _stream_time(fams, k, e, c, cap, limit):
    """First time a magnitude of stream ``k`` exceeds ``c``; gives up past ``limit``.

    Returns (time, status) with status 0 ok, 1 cap hit. A stream that can
    never fire returns inf immediately.
    """
    mf, m1, m2 = K.instantiate(int(fams[k, 0]), fams[k, 1], fams[k, 2], int(fams[k, 3]), e, False)
    gf, g1, g2 = K.instantiate(int(fams[k + 1, 0]), fams[k + 1, 1], fams[k + 1, 2],
                               int(fams[k + 1, 3]), e, True)
    sf = K.dist_sf(mf, m1, m2, c)
    if gf == K.EMPTY or sf <= 0.0:
        return np.inf, 0
    if gf == K.GAMMA or gf == K.EXPONENTIAL or gf == K.DIRAC:
        # arrivals up to the first success are geometric and the summed
        # waiting time has a closed law, so skip the individual draws
        n_arr = 1.0
        if sf < 1.0:
            n_arr = math.floor(math.log(1.0 - np.random.random()) / math.log1p(-sf)) + 1.0
        hit = n_arr > cap
        if hit:
            n_arr = float(cap)
        if gf == K.GAMMA:
            t = np.random.gamma(n_arr * g1, 1.0 / g2)
        elif gf == K.EXPONENTIAL:
            t = np.random.gamma(n_arr, 1.0 / g1)
        else:
            t = n_arr * g1
        if t > limit:
            return np.inf, 0
        if hit:
            return np.inf, 1
        return t, 0
    t = 0.0
    n = 0
    while n < cap:
        t += K.dist_sample(gf, g1, g2)
        if t > limit:
            return np.inf, 0
        if K.dist_sample(mf, m1, m2) > c:
            return t, 0
        n += 1
    return np.inf, 1


@jit
def _stream_rate(fams, k, e, c):
    # long-run rate of successful attacks; decides which stream runs first
    mf, m1, m2 = K.instantiate(int(fams[k, 0]), fams[k, 1], fams[k, 2], int(fams[k, 3]), e, False)
    gf, g1, g2 = K.instantiate(int(fams[k + 1, 0]), fams[k + 1, 1], fams[k + 1, 2],
                               int(fams[k + 1, 3]), e, True)
    if gf == K.EMPTY:
        return 0.0
    mu = K.dist_mean(gf, g1, g2)
    if mu <= 0.0:
        return np.inf
    return K.dist_sf(mf, m1, m2, c) / mu


@jit
def _first_passage(fams, r, th, c1, c2, cap):
    """Both streams' first passage times; the slower one stops once it cannot win."""
    if _stream_rate(fams, 0, r, c1) >= _stream_rate(fams, 2, th, c2):
        t1, h1 = _stream_time(fams, 0, r, c1, cap, np.inf)
        t2, h2 = _stream_time(fams, 2, th, c2, cap, t1)
    else:
        t2, h2 = _stream_time(fams, 2, th, c2, cap, np.inf)
        t1, h1 = _stream_time(fams, 0, r, c1, cap, t2)
    return t1, t2, h1 + h2


@jit
def _node_block(fams, local, glob, c1, c2, seed, cap, out):
    _seed(seed)
    hits = 0
    impossible = 0
    for i in range(out.shape[0]):
        r = K.dist_sample(int(local[0]), local[1], local[2])
        th = K.dist_sample(int(glob[0]), glob[1], glob[2])
        t1, t2, h = _first_passage(fams, r, th, c1, c2, cap)
        hits += h
        t = min(t1, t2)
        if h == 0 and t == np.inf:
            impossible += 1
        out[i] = t
    return hits, impossible


@jit
def _network_run(fams, c1, c2, glob, rec, out_ptr, out_idx, horizon, warm, dynamic,
                 seed, max_events, cap, n_batches, sample_times):
    _seed(seed)
    n = c1.shape[0]
    state = np.ones(n, dtype=np.int8)  # 1 compromised, 0 secure
    n_in = np.zeros(n, dtype=np.int64)
    for u in range(n):
        for j in range(out_ptr[u], out_ptr[u + 1]):
            n_in[out_idx[j]] += 1
    t_next = np.empty(n)
    t_pull = np.full(n, np.inf)
    t_push = np.full(n, np.inf)
    theta = np.zeros(n)
    for v in range(n):
        t_next[v] = K.dist_sample(int(rec[v, 0]), rec[v, 1], rec[v, 2])
    occ = np.zeros(n)
    last = np.zeros(n)
    batch = np.zeros(n_batches)
    span = (horizon - warm) / n_batches
    frac = np.zeros(sample_times.shape[0])
    n_comp = n
    si = 0
    now = 0.0
    events = 0
    status = 0
    while True:
        v = int(np.argmin(t_next))
        t_ev = t_next[v]
        if t_ev > horizon:
            break
        while si < sample_times.shape[0] and sample_times[si] <= t_ev:
            frac[si] = n_comp / n
            si += 1
        now = t_ev
        events += 1
        if events > max_events:
            status = 2
            break
        if state[v] == 1:
            # recovery: credit compromised time then start a secure period
            _credit(occ, batch, v, last[v], now, warm, span, n_batches)
            state[v] = 0
            n_comp -= 1
            theta[v] = K.dist_sample(int(glob[v, 0]), glob[v, 1], glob[v, 2])
            if dynamic:
                # push may restart later, so the pull time must be exact
                tp, h2 = _stream_time(fams, 2, theta[v], c2[v], cap, np.inf)
                ts, h1 = _stream_time(fams, 0, float(n_in[v]), c1[v], cap, tp)
                h = h1 + h2
            else:
                ts, tp, h = _first_passage(fams, float(n_in[v]), theta[v], c1[v], c2[v], cap)
            if h > 0:
                status = 1
                break
            t_pull[v] = now + tp
            t_push[v] = now + ts
            t_next[v] = min(t_pull[v], t_push[v])
        else:
            state[v] = 1
            n_comp += 1
            last[v] = now
            t_next[v] = now + K.dist_sample(int(rec[v, 0]), rec[v, 1], rec[v, 2])
        delta = 1 if state[v] == 1 else -1
        for j in range(out_ptr[v], out_ptr[v + 1]):
            w = out_idx[j]
            n_in[w] += delta
            if dynamic and state[w] == 0:
                # push stream restarts with the new neighbour count
                ts, h1 = _stream_time(fams, 0, float(n_in[w]), c1[w], cap, t_pull[w] - now)
                if h1 > 0:
                    status = 1
                t_push[w] = now + ts
                t_next[w] = min(t_pull[w], t_push[w])
        if status != 0:
            break
    while si < sample_times.shape[0]:
        frac[si] = n_comp / n
        si += 1
    for v in range(n):
        if state[v] == 1:
            _credit(occ, batch, v, last[v], horizon, warm, span, n_batches)
    occ /= horizon - warm
    batch /= span * n
    return occ, batch, frac, status, events


@jit
def _credit(occ, batch, v, t0, t1, warm, span, n_batches):
    a = max(t0, warm)
    if t1 <= a:
        return
    occ[v] += t1 - a
    b = int((a - warm) / span)
    while a < t1 and b < n_batches:
        edge = warm + (b + 1) * span
        stop = min(edge, t1)
        batch[b] += stop - a
        a = stop
        b += 1


# ---------------------------------------------------------------------------
# drivers


def _packed_families(m: AttackDefenseModel) -> np.ndarray:
    return np.array([m.families[k].packed for k in FAMILY_ORDER], dtype=float)


def _triple(d: DistributionSpec) -> np.ndarray:
    return np.array(d.triple, dtype=float)


def _run_blocks(fams, local, glob, c1, c2, cfg: SimConfig):
    n = cfg.replications
    out = np.empty(n)
    starts = list(range(0, n, BLOCK))

    def work(b):
        s = starts[b]
        return _node_block(fams, local, glob, float(c1), float(c2), derive_seed(cfg.seed, b),
                           cfg.arrival_cap, out[s:s + BLOCK])

    if NUMBA_ENABLED and cfg.threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            res = list(pool.map(work, range(len(starts))))
    else:
        res = [work(b) for b in range(len(starts))]
    hits = sum(int(h) for h, _ in res)
    impossible = sum(int(i) for _, i in res)
    if hits:
        raise CapHitError(f"{hits} stream(s) reached {cfg.arrival_cap} arrivals without exceeding the threshold")
    if impossible:
        raise CapHitError(
            f"compromise is impossible in {impossible} of {n} replications "
            "(no stream can exceed its threshold)"
        )
    return out


def simulate_ttc_frozen(m: AttackDefenseModel, v, r: float, theta: float, cfg: SimConfig) -> SimResult:
    """Samples of T_c(r, theta): both environments held at fixed values.

    ``r = 0`` switches the push stream off.
    """
    if cfg.mode is not SimMode.NODE_FROZEN:
        raise ValueError("simulate_ttc_frozen needs mode node-frozen")
    if r < 0 or theta < 0:
        raise ValueError("environment values must be >= 0")
    s = m.spec(v)
    out = _run_blocks(_packed_families(m), np.array([K.DIRAC, r, 0.0]), np.array([K.DIRAC, theta, 0.0]),
                      s.c1, s.c2, cfg)
    return SimResult(cfg.mode, cfg.seed, cfg.replications, samples=out,
                     meta={"node": m.node_id(v), "r": r, "theta": theta})


def simulate_ttc_mixed(m: AttackDefenseModel, v, cfg: SimConfig) -> SimResult:
    """Samples of T_{v,c} with J_v and Theta_v drawn independently per replication."""
    if cfg.mode is not SimMode.NODE_MIXED:
        raise ValueError("simulate_ttc_mixed needs mode node-mixed")
    s = m.spec(v)
    out = _run_blocks(_packed_families(m), _triple(s.local_env), _triple(s.global_env), s.c1, s.c2, cfg)
    return SimResult(cfg.mode, cfg.seed, cfg.replications, samples=out, meta={"node": m.node_id(v)})


def default_recovery_laws(m: AttackDefenseModel) -> list:
    return [DistributionSpec.exponential(1.0 / m.spec(i).recovery_mean) for i in range(m.graph.n)]


def simulate_network(m: AttackDefenseModel, recovery_law=None, cfg: SimConfig = SimConfig(mode=SimMode.NETWORK),
                     n_batches: int = 20, series_points: int = 401) -> SimResult:
    """Alternating secure/compromised process on the whole graph.

    Every node starts compromised. A node entering the secure state freezes
    its compromised in-neighbour count (or, with ``env_refresh=dynamic``,
    restarts its push stream whenever that count changes) and draws its pull
    environment. Occupancy is the fraction of [warmup, horizon] spent
    compromised; ``occupancy_stderr`` is the standard error of the
    network-mean occupancy from batch means (or across replications).
    """
    if cfg.mode is not SimMode.NETWORK:
        raise ValueError("simulate_network needs mode network")
    g = m.graph
    n = g.n
    if recovery_law is None:
        laws = default_recovery_laws(m)
    elif isinstance(recovery_law, DistributionSpec):
        laws = [recovery_law] * n
    else:
        laws = list(recovery_law)
    if len(laws) != n:
        raise ValueError("one recovery law per node is required")
    for i, law in enumerate(laws):
        mu = law.mean()
        want = m.spec(i).recovery_mean
        if not math.isclose(mu, want, rel_tol=1e-9):
            raise ValueError(f"node {g.nodes[i]}: recovery law mean {mu} differs from recovery_mean {want}")
    rec = np.array([law.triple for law in laws], dtype=float)
    glob = np.array([m.spec(i).global_env.triple for i in range(n)], dtype=float)
    c1 = np.array([m.spec(i).c1 for i in range(n)], dtype=float)
    c2 = np.array([m.spec(i).c2 for i in range(n)], dtype=float)
    out_ptr = np.zeros(n + 1, dtype=np.int64)
    for u in range(n):
        out_ptr[u + 1] = out_ptr[u] + len(g.out_neighbors[u])
    out_idx = np.concatenate([np.asarray(x, dtype=np.int64) for x in g.out_neighbors]) if n else np.zeros(0, np.int64)
    warm = cfg.warmup_fraction * cfg.horizon
    times = np.linspace(0.0, cfg.horizon, series_points)
    fams = _packed_families(m)
    dynamic = cfg.env_refresh is EnvRefresh.DYNAMIC

    occs, batches, fracs, events = [], [], [], 0
    for rep in range(cfg.replications):
        occ, batch, frac, status, ev = _network_run(
            fams, c1, c2, glob, rec, out_ptr, out_idx, float(cfg.horizon), float(warm), dynamic,
            derive_seed(cfg.seed, rep), cfg.max_events, cfg.arrival_cap, n_batches, times,
        )
        if status == 1:
            raise CapHitError("an attack stream reached the arrival cap")
        if status == 2:
            raise EventLimitError(f"more than {cfg.max_events} events in one replication")
        occs.append(occ)
        batches.append(batch)
        fracs.append(frac)
        events += int(ev)
    occ = np.mean(occs, axis=0)
    if cfg.replications > 1:
        means = [o.mean() for o in occs]
        se = float(np.std(means, ddof=1) / math.sqrt(len(means)))
    else:
        se = float(np.std(batches[0], ddof=1) / math.sqrt(n_batches))
    return SimResult(
        cfg.mode, cfg.seed, cfg.replications, nodes=g.nodes, occupancy=occ, occupancy_stderr=se,
        series_time=times, series_fraction=np.mean(fracs, axis=0), events=events,
        meta={"horizon": cfg.horizon, "warmup_fraction": cfg.warmup_fraction,
              "env_refresh": cfg.env_refresh.value},
    )


# ---------------------------------------------------------------------------
# comparisons against the analytic path


@dataclass(frozen=True)
class KsReport:
    statistic: float
    pvalue: float
    n: int
    alpha: float

    @property
    def passed(self) -> bool:
        return self.pvalue >= self.alpha


def ks_against(samples, cdf, alpha: float = 0.01) -> KsReport:
    """One-sample KS test of ``samples`` against a vectorized ``cdf``."""
    res = stats.kstest(np.asarray(samples, dtype=float), cdf)
    return KsReport(float(res.statistic), float(res.pvalue), len(samples), alpha)


def ks_two_sample(a, b, alpha: float = 0.01) -> KsReport:
    res = stats.ks_2samp(a, b)
    return KsReport(float(res.statistic), float(res.pvalue), len(a), alpha)


def compare_mixed(m: AttackDefenseModel, v, result: SimResult, alpha: float = 0.01):
    """KS report and z-score of the simulated mean against E[T]."""
    from .ttc import expected_ttc, ttc_cdf

    ks = ks_against(result.samples, lambda x: ttc_cdf(m, v, x), alpha)
    et = expected_ttc(m, v)
    z = (result.mean_T - et) / result.stderr_T
    return ks, et, z


def compare_frozen(m: AttackDefenseModel, v, r, theta, result: SimResult, alpha: float = 0.01):
    from .ttc import env_rows, expected_from_rows

    rows = env_rows(m, v, r, theta)
    ks = ks_against(result.samples, lambda x: 1.0 - K.mixture_survival_grid(np.asarray(x, float), rows, 1e-14),
                    alpha)
    et = expected_from_rows(rows)
    z = (result.mean_T - et) / result.stderr_T
    return ks, et, z
