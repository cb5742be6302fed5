"""Attack-defense structure, environment-indexed attack laws, and file formats."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .dist import (
    DistributionSpec,
    InvalidParameterError,
    check_nbu,
    check_nbue,
    default_aging_grid,
)


class ModelError(ValueError):
    """Base class for malformed graphs and configs."""


class ParseError(ModelError):
    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


class ValidationError(ModelError):
    pass


# ---------------------------------------------------------------------------
# graph


class AttackDefenseGraph:
    """Directed graph; an edge (u, v) means u can attack v directly."""

    def __init__(self, nodes, edges):
        self.nodes = tuple(str(n) for n in nodes)
        self.index = {n: i for i, n in enumerate(self.nodes)}
        if len(self.index) != len(self.nodes):
            raise ValidationError("duplicate node ids")
        seen = set()
        in_nb = [[] for _ in self.nodes]
        out_nb = [[] for _ in self.nodes]
        for u, v in edges:
            u, v = str(u), str(v)
            if u == v:
                raise ValidationError(f"self-loop at node {u!r}")
            if u not in self.index or v not in self.index:
                raise ValidationError(f"edge ({u}, {v}) references an unknown node")
            if (u, v) in seen:
                continue
            seen.add((u, v))
            in_nb[self.index[v]].append(self.index[u])
            out_nb[self.index[u]].append(self.index[v])
        self.edges = tuple(sorted(seen, key=lambda e: (self.index[e[0]], self.index[e[1]])))
        self.in_neighbors = tuple(np.array(sorted(x), dtype=np.int64) for x in in_nb)
        self.out_neighbors = tuple(np.array(sorted(x), dtype=np.int64) for x in out_nb)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def degree(self, v) -> int:
        """In-degree of node ``v`` (id or index)."""
        i = v if isinstance(v, (int, np.integer)) else self.index[v]
        return int(self.in_neighbors[i].size)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([a.size for a in self.in_neighbors], dtype=np.int64)

    @property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int8)
        for u, v in self.edges:
            a[self.index[u], self.index[v]] = 1
        return a

    def __repr__(self):
        return f"AttackDefenseGraph(n={self.n}, edges={len(self.edges)})"


_REGULAR_RE = re.compile(r"^regular:(.*)$")


def regular_graph(k: int, n: int) -> AttackDefenseGraph:
    """Circulant k-regular graph on nodes "0".."n-1", edges in both directions.

    Each node links to its k nearest neighbours by index. Odd k needs even
    n (the antipodal node is added) unless k = n - 1.
    """
    if n < 2 or not 1 <= k <= n - 1:
        raise ValidationError(f"need 1 <= k <= n-1 (k={k}, n={n})")
    nodes = [str(i) for i in range(n)]
    if k == n - 1:
        offsets = range(1, n)
    else:
        if k % 2 and n % 2:
            raise ValidationError("odd k needs even n for a circulant regular graph")
        offsets = [d for j in range(1, k // 2 + 1) for d in (j, n - j)]
        if k % 2:
            offsets.append(n // 2)
    edges = [(str(i), str((i + d) % n)) for i in range(n) for d in offsets]
    g = AttackDefenseGraph(nodes, edges)
    assert all(g.degrees == k)
    return g


def parse_graph_text(text: str) -> AttackDefenseGraph:
    """Edge-list grammar: ``u v`` per line, ``#`` comments, blank lines.

    A line holding a single id declares an isolated node.
    """
    nodes = {}
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 1:
            nodes.setdefault(parts[0], None)
        elif len(parts) == 2:
            u, v = parts
            if u == v:
                raise ParseError(f"self-loop {u!r}", line=lineno)
            nodes.setdefault(u, None)
            nodes.setdefault(v, None)
            edges.append((u, v))
        else:
            raise ParseError(f"expected 'u v', got {raw.strip()!r}", line=lineno)
    return AttackDefenseGraph(list(nodes), edges)


def load_graph(path) -> AttackDefenseGraph:
    """Read an edge-list file, or build ``regular:k=K,n=N``."""
    spec = str(path)
    m = _REGULAR_RE.match(spec)
    if m:
        try:
            kv = dict(part.split("=", 1) for part in m.group(1).split(","))
            return regular_graph(int(kv["k"]), int(kv["n"]))
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ParseError(f"bad synthetic graph spec {spec!r}") from None
    return parse_graph_text(Path(path).read_text(encoding="utf-8"))


def graph_to_text(g: AttackDefenseGraph) -> str:
    lines = []
    touched = {u for e in g.edges for u in e}
    lines += [n for n in g.nodes if n not in touched]
    lines += [f"{u} {v}" for u, v in g.edges]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# environment-indexed attack laws

KINDS = ("push_magnitude", "push_interarrival", "pull_magnitude", "pull_interarrival")

LINKS = {
    "none": K.LINK_NONE,
    "scale_times_env": K.LINK_SCALE_TIMES_ENV,
    "scale_inverse_env": K.LINK_SCALE_INVERSE_ENV,
    "rate_times_env": K.LINK_RATE_TIMES_ENV,
}


@dataclass(frozen=True)
class EnvFamily:
    """Maps an environment value e to a distribution.

    ``scale_times_env`` multiplies the base scale by e, ``scale_inverse_env``
    divides it by e, ``rate_times_env`` multiplies the base rate by e (the
    same law as dividing the scale). e = 0 gives ``Empty`` for inter-arrival
    kinds and ``Dirac(0)`` for magnitudes.
    """

    kind: str
    base: DistributionSpec
    env_link: str = "none"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown family kind {self.kind!r}")
        if self.env_link not in LINKS:
            raise ValidationError(f"unknown env_link {self.env_link!r}")
        if self.interarrival and self.base.family not in ("gamma", "exponential", "dirac", "weibull", "uniform"):
            raise ValidationError(f"{self.kind}: {self.base.family} is not a waiting-time law")

    @property
    def interarrival(self) -> bool:
        return self.kind.endswith("interarrival")

    @property
    def link_code(self) -> int:
        return LINKS[self.env_link]

    @property
    def packed(self):
        return (self.base.code, self.base.p1, self.base.p2, self.link_code)

    def instantiate_triple(self, e: float):
        return K.instantiate(self.base.code, self.base.p1, self.base.p2, self.link_code,
                             float(e), self.interarrival)

    def instantiate(self, e: float) -> DistributionSpec:
        code, p1, p2 = self.instantiate_triple(e)
        from .dist import FAMILY_NAMES

        return DistributionSpec(FAMILY_NAMES[code], p1, p2)

    def to_dict(self) -> dict:
        out = self.base.to_dict()
        out["env_link"] = self.env_link
        return out

    @classmethod
    def from_dict(cls, kind: str, data: dict) -> "EnvFamily":
        data = dict(data)
        link = data.pop("env_link", "none")
        return cls(kind, DistributionSpec.from_dict(data), link)


@dataclass(frozen=True)
class NodeSpec:
    c1: float
    c2: float
    recovery_mean: float
    local_env: DistributionSpec
    global_env: DistributionSpec

    def __post_init__(self):
        for name in ("c1", "c2", "recovery_mean"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise ValidationError(f"{name} must be a positive finite number, got {value!r}")

    @property
    def theta_bar(self) -> float:
        return self.global_env.mean()


@dataclass(frozen=True)
class AttackDefenseModel:
    graph: AttackDefenseGraph
    node_specs: dict
    families: dict
    # the raw local_env templates, kept for canonical serialization
    _templates: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        missing = [n for n in self.graph.nodes if n not in self.node_specs]
        if missing:
            raise ValidationError(f"no spec for node(s) {', '.join(missing[:5])}")
        if set(self.families) != set(KINDS):
            raise ValidationError("families must cover " + ", ".join(KINDS))
        for kind, fam in self.families.items():
            if fam.kind != kind:
                raise ValidationError(f"family under {kind!r} declares kind {fam.kind!r}")
        for v in self.graph.nodes:
            _check_local_env(v, self.node_specs[v].local_env, self.graph.degree(v))

    def spec(self, v) -> NodeSpec:
        if isinstance(v, (int, np.integer)):
            v = self.graph.nodes[v]
        return self.node_specs[v]

    def node_id(self, v) -> str:
        if isinstance(v, (int, np.integer)):
            return self.graph.nodes[v]
        if v not in self.graph.index:
            raise KeyError(f"unknown node {v!r}")
        return v

    def __getitem__(self, kind) -> EnvFamily:
        return self.families[kind]


def _check_local_env(v, d: DistributionSpec, degree: int):
    if d.family == "binomial":
        if int(d.p1) > degree:
            raise ValidationError(
                f"node {v}: local_env support {{0..{int(d.p1)}}} exceeds degree {degree}"
            )
    elif d.family == "dirac":
        if d.p1 != int(d.p1) or d.p1 > degree:
            raise ValidationError(f"node {v}: local_env atom {d.p1} not in {{0..{degree}}}")
    else:
        raise ValidationError(f"node {v}: local_env must be binomial or dirac, got {d.family}")


# ---------------------------------------------------------------------------
# config document

_TOP_KEYS = {"graph_ref", "families", "node_defaults", "node_overrides"}
_NODE_KEYS = {"c1", "c2", "recovery_mean", "local_env", "global_env"}


def _node_spec(v, fields: dict, degree: int) -> NodeSpec:
    try:
        local = dict(fields["local_env"])
        if local.get("family") == "binomial":
            local_spec = DistributionSpec.from_dict(local, n=degree)
        else:
            local_spec = DistributionSpec.from_dict(local)
        return NodeSpec(
            c1=_number(fields["c1"], "c1"),
            c2=_number(fields["c2"], "c2"),
            recovery_mean=_number(fields["recovery_mean"], "recovery_mean"),
            local_env=local_spec,
            global_env=DistributionSpec.from_dict(fields["global_env"]),
        )
    except KeyError as exc:
        raise ParseError(f"node {v}: missing", field=exc.args[0]) from None
    except InvalidParameterError as exc:
        raise ValidationError(f"node {v}: {exc}") from None


def _number(x, name):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError("expected a number", field=name)
    return float(x)


def model_from_config(graph: AttackDefenseGraph, config: dict) -> AttackDefenseModel:
    if not isinstance(config, dict):
        raise ParseError("config must be a JSON object")
    unknown = set(config) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    fams_raw = config.get("families")
    if not isinstance(fams_raw, dict):
        raise ParseError("missing section", field="families")
    if set(fams_raw) != set(KINDS):
        extra = set(fams_raw) - set(KINDS)
        if extra:
            raise ValidationError(f"unknown family kinds: {', '.join(sorted(extra))}")
        raise ParseError("families must define " + ", ".join(KINDS), field="families")
    try:
        families = {k: EnvFamily.from_dict(k, fams_raw[k]) for k in KINDS}
    except InvalidParameterError as exc:
        raise ValidationError(f"families: {exc}") from None
    defaults = config.get("node_defaults", {})
    overrides = config.get("node_overrides", {})
    for where, block in [("node_defaults", defaults)] + [
        (f"node_overrides.{k}", v) for k, v in overrides.items()
    ]:
        if not isinstance(block, dict):
            raise ParseError("expected an object", field=where)
        bad = set(block) - _NODE_KEYS
        if bad:
            raise ValidationError(f"{where}: unknown keys {', '.join(sorted(bad))}")
    stray = set(overrides) - set(graph.nodes)
    if stray:
        raise ValidationError(f"node_overrides for unknown node(s): {', '.join(sorted(stray))}")
    specs = {}
    for v in graph.nodes:
        merged = dict(defaults)
        merged.update(overrides.get(v, {}))
        specs[v] = _node_spec(v, merged, graph.degree(v))
    return AttackDefenseModel(graph, specs, families, _templates={"config": config})


def load_model(graph_path, config_path) -> AttackDefenseModel:
    """Load and eagerly validate a model from an edge list and a JSON config.

    ``graph_path`` may be ``None`` when the config carries a ``graph_ref``
    reference (a path relative to the config, or ``regular:k=..,n=..``).
    """
    config_path = Path(config_path)
    text = config_path.read_text(encoding="utf-8")
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    if graph_path is None:
        ref = config.get("graph_ref") if isinstance(config, dict) else None
        if ref is None:
            raise ParseError("no graph given and config has no 'graph_ref' entry")
        graph_path = ref if _REGULAR_RE.match(str(ref)) else config_path.parent / ref
    graph = load_graph(graph_path)
    return model_from_config(graph, config)


def model_to_config(m: AttackDefenseModel) -> dict:
    """Canonical config: every node's fields written out under overrides."""
    overrides = {}
    for v in m.graph.nodes:
        s = m.node_specs[v]
        overrides[v] = {
            "c1": s.c1,
            "c2": s.c2,
            "recovery_mean": s.recovery_mean,
            "local_env": s.local_env.to_dict(),
            "global_env": s.global_env.to_dict(),
        }
    return {
        "families": {k: m.families[k].to_dict() for k in KINDS},
        "node_defaults": {},
        "node_overrides": overrides,
    }


def save_model(m: AttackDefenseModel, graph_path, config_path):
    Path(graph_path).write_text(graph_to_text(m.graph), encoding="utf-8")
    Path(config_path).write_text(canonical_json(model_to_config(m)), encoding="utf-8")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def uniform_model(graph: AttackDefenseGraph, families: dict, node: NodeSpec | dict) -> AttackDefenseModel:
    """Every node shares one spec; a binomial local env takes n = degree."""
    specs = {}
    for v in graph.nodes:
        if isinstance(node, dict):
            specs[v] = _node_spec(v, node, graph.degree(v))
        else:
            local = node.local_env
            if local.family == "binomial":
                local = DistributionSpec.binomial(graph.degree(v), local.p2)
            specs[v] = NodeSpec(node.c1, node.c2, node.recovery_mean, local, node.global_env)
    return AttackDefenseModel(graph, specs, families)


# ---------------------------------------------------------------------------
# assumption checks


@dataclass
class AssumptionReport:
    name: str
    passed: bool
    details: list = field(default_factory=list)
    counterexample: tuple | None = None

    def __bool__(self):
        return self.passed


def push_env_grid(m: AttackDefenseModel, n: int = 41) -> np.ndarray:
    top = max(int(m.graph.degrees.max(initial=0)), 1)
    return np.unique(np.concatenate([np.linspace(0.0, top, n), np.arange(top + 1.0)]))


def pull_env_grid(m: AttackDefenseModel, n: int = 21) -> np.ndarray:
    pts = []
    for v in m.graph.nodes:
        g = m.node_specs[v].global_env
        if g.family == "uniform":
            pts.append(np.linspace(g.p1, g.p2, n))
        elif g.family == "dirac":
            pts.append(np.array([g.p1]))
        elif g.family == "binomial":
            pts.append(np.arange(int(g.p1) + 1.0))
        else:
            mu = g.mean()
            pts.append(np.linspace(mu / 4, mu * 4, n))
        pts.append(np.array([g.mean()]))
    return np.unique(np.concatenate(pts))


def _x_grid(m: AttackDefenseModel, n: int = 81) -> np.ndarray:
    top = max(max(max(s.c1, s.c2) for s in m.node_specs.values()) * 4.0, 1.0)
    return np.linspace(0.0, top, n)


def _stochastic_order(fam: EnvFamily, env: np.ndarray, xs: np.ndarray, increasing: bool, tol=1e-12):
    """Check sf(instantiate(e)) monotone in e pointwise; first violation or None."""
    code, p1, p2, link = fam.packed
    prev = None
    prev_e = None
    for e in env:
        c, q1, q2 = K.instantiate(code, p1, p2, link, float(e), fam.interarrival)
        sf = np.array([K.dist_sf(c, q1, q2, float(x)) for x in xs])
        if prev is not None:
            diff = sf - prev if increasing else prev - sf
            bad = np.nonzero(diff < -tol)[0]
            if bad.size:
                return (float(prev_e), float(e), float(xs[bad[0]]))
        prev, prev_e = sf, e
    return None


def validate_assumptions(m: AttackDefenseModel, which: str) -> AssumptionReport:
    """Check one of the preconditions ``A2``, ``A4``, ``NBU``, ``NBUE``.

    A2 holds by construction (one i.i.d. law per environment value). A4 is a
    grid check of the usual stochastic order: magnitudes increasing and
    inter-arrival times decreasing in the environment value. NBU/NBUE run
    the aging checks on every instantiated inter-arrival law.
    """
    which = which.upper()
    if which == "A2":
        return AssumptionReport("A2", True, ["i.i.d. per environment value by construction"])
    if which == "A4":
        xs = _x_grid(m)
        details = []
        first = None
        for kind, env in (
            ("push_magnitude", push_env_grid(m)),
            ("pull_magnitude", pull_env_grid(m)),
            ("push_interarrival", push_env_grid(m)),
            ("pull_interarrival", pull_env_grid(m)),
        ):
            fam = m.families[kind]
            xs_k = xs
            if fam.interarrival:
                top = 0.0
                for e in env[env > 0]:
                    c, q1, q2 = fam.instantiate_triple(e)
                    mu = K.dist_mean(c, q1, q2)
                    if math.isfinite(mu):
                        top = max(top, 5 * mu)
                xs_k = np.linspace(0.0, max(top, 1.0), 81)
            # magnitudes: sf increasing in e; waiting times: sf decreasing in e
            bad = _stochastic_order(fam, env, xs_k, increasing=not fam.interarrival)
            if bad is not None:
                details.append(f"{kind}: order violated at e={bad[0]:g} -> e'={bad[1]:g}, x={bad[2]:g}")
                first = first or (kind,) + bad
        return AssumptionReport("A4", not details, details, first)
    if which in ("NBU", "NBUE"):
        details = []
        first = None
        for kind, env in (("push_interarrival", push_env_grid(m, 11)), ("pull_interarrival", pull_env_grid(m, 5))):
            fam = m.families[kind]
            for e in env:
                if e <= 0:
                    continue
                d = fam.instantiate(e)
                grid = default_aging_grid(d)
                res = check_nbu(d, grid) if which == "NBU" else check_nbue(d, grid)
                if not res.holds:
                    details.append(f"{kind} at e={e:g}: {d} worst violation {res.worst_violation:.3g}")
                    first = first or (kind, float(e))
        return AssumptionReport(which, not details, details, first)
    raise ValueError(f"unknown assumption {which!r}")
