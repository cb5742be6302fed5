"""Parameter sets of the worked examples (time-to-compromise curves and the regular-graph table)."""

from __future__ import annotations

from .dist import DistributionSpec
from .model import EnvFamily, NodeSpec, regular_graph, uniform_model

FIGURE_PARAMS = dict(alpha=2.0, beta=2.0, gamma=1.0, lam=2.5, a=1.0, b=2.0)
TABLE1_PARAMS = dict(alpha=2.0, beta=3.5, gamma=1.0, lam=1.5, theta=4.0, recovery_mean=4.0)
TABLE1_K = (5, 8, 10, 12, 15, 20, 25, 30)
TABLE1_C = (2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0)


def weibull_gamma_families(alpha, beta, gamma, lam) -> dict:
    """Weibull magnitudes with scale e, Gamma waiting times with rate e.

    Push magnitudes have survival exp(-(x/r)^alpha) and push gaps are
    Gamma(beta, rate r); the pull side uses (gamma, theta) and (lam, theta).
    """
    return {
        "push_magnitude": EnvFamily("push_magnitude", DistributionSpec.weibull(alpha, 1.0), "scale_times_env"),
        "push_interarrival": EnvFamily("push_interarrival", DistributionSpec.gamma(beta, 1.0), "rate_times_env"),
        "pull_magnitude": EnvFamily("pull_magnitude", DistributionSpec.weibull(gamma, 1.0), "scale_times_env"),
        "pull_interarrival": EnvFamily("pull_interarrival", DistributionSpec.gamma(lam, 1.0), "rate_times_env"),
    }


def figure_model(deg=8, p=0.5, c=2.0, alpha=2.0, beta=2.0, gamma=1.0, lam=2.5, a=1.0, b=2.0,
                 recovery_mean=1.0, c2=None):
    """Complete graph on deg+1 nodes (every node has in-degree ``deg``)."""
    graph = regular_graph(deg, deg + 1)
    node = NodeSpec(
        c1=c,
        c2=c if c2 is None else c2,
        recovery_mean=recovery_mean,
        local_env=DistributionSpec.binomial(deg, p),
        global_env=DistributionSpec.uniform(a, b),
    )
    return uniform_model(graph, weibull_gamma_families(alpha, beta, gamma, lam), node)


def table1_model(k=5, c=2.0, n=None, alpha=2.0, beta=3.5, gamma=1.0, lam=1.5, theta=4.0,
                 recovery_mean=4.0, p_local=0.5):
    """k-regular circulant graph with the steady-state table's parameters.

    ``p_local`` only feeds the local-environment pmf used by the
    time-to-compromise metrics; the mean-field solver ignores it.
    """
    if n is None:
        n = k + 1 if k % 2 else max(2 * k, k + 1)
    graph = regular_graph(k, n)
    node = NodeSpec(
        c1=c,
        c2=c,
        recovery_mean=recovery_mean,
        local_env=DistributionSpec.binomial(k, p_local),
        global_env=DistributionSpec.dirac(theta),
    )
    return uniform_model(graph, weibull_gamma_families(alpha, beta, gamma, lam), node)


def config_dict(families: dict, node: dict, graph: str | None = None) -> dict:
    out = {
        "families": {k: f.to_dict() for k, f in families.items()},
        "node_defaults": node,
    }
    if graph is not None:
        out["graph_ref"] = graph
    return out


def table1_config(k=5, c=2.0, n=200) -> dict:
    p = TABLE1_PARAMS
    return config_dict(
        weibull_gamma_families(p["alpha"], p["beta"], p["gamma"], p["lam"]),
        {
            "c1": c,
            "c2": c,
            "recovery_mean": p["recovery_mean"],
            "local_env": {"family": "binomial", "p": 0.5},
            "global_env": {"family": "dirac", "x": p["theta"]},
        },
        graph=f"regular:k={k},n={n}",
    )


def figure_config(p=0.5, c=2.0, deg=8) -> dict:
    f = FIGURE_PARAMS
    return config_dict(
        weibull_gamma_families(f["alpha"], f["beta"], f["gamma"], f["lam"]),
        {
            "c1": c,
            "c2": c,
            "recovery_mean": 1.0,
            "local_env": {"family": "binomial", "p": p},
            "global_env": {"family": "uniform", "a": f["a"], "b": f["b"]},
        },
        graph=f"regular:k={deg},n={deg + 1}",
    )
