import io
import math

import numpy as np
import pytest

from shockmetrics.dist import DistributionSpec
from shockmetrics.model import model_from_config, parse_graph_text
from shockmetrics.presets import figure_model, table1_model
from shockmetrics.sim import (
    CapHitError,
    EventLimitError,
    SimConfig,
    compare_frozen,
    derive_seed,
    ks_two_sample,
    simulate_network,
    simulate_ttc_frozen,
    simulate_ttc_mixed,
)
from shockmetrics.steady import solve_steady_state
from shockmetrics.ttc import expected_ttc


def pull_only(mag, gap, graph="a\n", theta=None, c=2.0, recovery_mean=1.0):
    fams = {
        "push_magnitude": {"family": "weibull", "shape": 2.0, "scale": 1.0, "env_link": "scale_times_env"},
        "push_interarrival": {"family": "exponential", "rate": 1.0, "env_link": "rate_times_env"},
        "pull_magnitude": mag,
        "pull_interarrival": gap,
    }
    node = {
        "c1": c, "c2": c, "recovery_mean": recovery_mean,
        "local_env": {"family": "dirac", "x": 0.0},
        "global_env": theta or {"family": "dirac", "x": 1.0},
    }
    return model_from_config(parse_graph_text(graph), {"families": fams, "node_defaults": node})


MIXED = SimConfig(replications=20_000, seed=1, mode="node-mixed")


def test_dirac_attack_lands_on_schedule():
    m = pull_only({"family": "dirac", "x": 5.0}, {"family": "dirac", "x": 1.0})
    res = simulate_ttc_mixed(m, "a", MIXED)
    assert np.all(res.samples == 1.0)


def test_dirac_magnitudes_below_threshold_are_impossible():
    m = pull_only({"family": "dirac", "x": 1.0}, {"family": "exponential", "rate": 1.0})
    with pytest.raises(CapHitError, match="impossible"):
        simulate_ttc_mixed(m, "a", MIXED)


def test_arrival_cap():
    # success chance 1e-9 per arrival, cap 1000 arrivals
    m = pull_only({"family": "uniform", "a": 0.0, "b": 1.0}, {"family": "exponential", "rate": 1.0},
                  c=1.0 - 1e-9)
    cfg = SimConfig(replications=100, seed=2, mode="node-mixed", arrival_cap=1000)
    with pytest.raises(CapHitError, match="arrivals"):
        simulate_ttc_mixed(m, "a", cfg)


@pytest.mark.parametrize("gap", [
    {"family": "exponential", "rate": 1.0},
    {"family": "gamma", "shape": 1.0, "rate": 1.0},
    {"family": "weibull", "shape": 1.0, "scale": 1.0},
])
def test_uniform_magnitudes_exponential_mean(gap):
    # P(X > c) = 1/2 and unit mean waits: T is a geometric number of unit-mean gaps
    m = pull_only({"family": "uniform", "a": 0.0, "b": 4.0}, gap)
    res = simulate_ttc_mixed(m, "a", SimConfig(replications=100_000, seed=4, mode="node-mixed"))
    assert abs(res.mean_T - 2.0) < 3 * res.stderr_T
    # the sum is Exponential(1/2)
    assert abs(np.mean(res.samples > 2.0) - math.exp(-1.0)) < 0.005


def test_determinism_and_seed_sensitivity():
    m = figure_model(4, 0.5, 2.0)
    a = simulate_ttc_mixed(m, 0, MIXED).samples
    b = simulate_ttc_mixed(m, 0, MIXED).samples
    c = simulate_ttc_mixed(m, 0, SimConfig(replications=20_000, seed=2, mode="node-mixed")).samples
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_threads_do_not_change_results():
    m = figure_model(4, 0.5, 2.0)
    one = simulate_ttc_mixed(m, 0, SimConfig(replications=20_000, seed=9, mode="node-mixed")).samples
    four = simulate_ttc_mixed(m, 0, SimConfig(replications=20_000, seed=9, mode="node-mixed", threads=4)).samples
    np.testing.assert_array_equal(one, four)


def test_derive_seed():
    assert derive_seed(1, 0) == derive_seed(1, 0)
    assert len({derive_seed(1, i) for i in range(1000)}) == 1000
    assert derive_seed(1, 0) != derive_seed(2, 0)


def test_frozen_equals_mixed_with_point_masses():
    m = figure_model(6, 0.5, 2.0)
    spec = m.spec(0)
    pinned = type(spec)(spec.c1, spec.c2, spec.recovery_mean, DistributionSpec.dirac(3),
                        DistributionSpec.dirac(1.4))
    m2 = type(m)(m.graph, {v: pinned for v in m.graph.nodes}, m.families)
    mixed = simulate_ttc_mixed(m2, 0, SimConfig(replications=50_000, seed=5, mode="node-mixed"))
    frozen = simulate_ttc_frozen(m, 0, 3.0, 1.4, SimConfig(replications=50_000, seed=6, mode="node-frozen"))
    assert ks_two_sample(mixed.samples, frozen.samples).passed


@pytest.mark.parametrize("r, theta", [(0.0, 1.5), (2.0, 1.0), (7.5, 2.0)])
def test_frozen_against_analytic(r, theta):
    m = figure_model(8, 0.5, 2.0)
    res = simulate_ttc_frozen(m, 0, r, theta, SimConfig(replications=50_000, seed=11, mode="node-frozen"))
    ks, et, z = compare_frozen(m, 0, r, theta, res)
    assert ks.passed and abs(z) < 4.0


def test_mode_checks():
    m = figure_model(4, 0.5, 2.0)
    with pytest.raises(ValueError):
        simulate_ttc_frozen(m, 0, 1.0, 1.0, MIXED)
    with pytest.raises(ValueError):
        simulate_ttc_mixed(m, 0, SimConfig(mode="node-frozen"))
    with pytest.raises(ValueError):
        simulate_ttc_frozen(m, 0, -1.0, 1.0, SimConfig(mode="node-frozen"))
    with pytest.raises(ValueError):
        SimConfig(replications=0)
    with pytest.raises(ValueError):
        SimConfig(warmup_fraction=1.0)
    with pytest.raises(ValueError):
        SimConfig(mode="sideways")


NETWORK = SimConfig(replications=1, seed=3, mode="network", horizon=20_000.0)


def test_isolated_node_occupancy_is_renewal_reward():
    m = pull_only({"family": "uniform", "a": 0.0, "b": 4.0}, {"family": "exponential", "rate": 1.0},
                  graph="a\nb\n", recovery_mean=3.0)
    res = simulate_network(m, cfg=NETWORK)
    want = 3.0 / (3.0 + expected_ttc(m, "a"))
    assert abs(res.mean_occupancy - want) < 4 * res.occupancy_stderr + 1e-3
    assert res.occupancy_stderr < 0.01


def test_no_attack_network_recovers_for_good():
    m = pull_only({"family": "uniform", "a": 0.0, "b": 4.0}, {"family": "exponential", "rate": 1.0},
                  graph="a\nb\n", theta={"family": "dirac", "x": 0.0})
    res = simulate_network(m, cfg=SimConfig(replications=1, seed=3, mode="network", horizon=200.0))
    assert res.mean_occupancy == 0.0
    assert res.series_fraction[0] == 1.0 and res.series_fraction[-1] == 0.0


def test_network_matches_fixed_point_on_small_graph():
    m = table1_model(5, 2.0, n=10)
    res = simulate_network(m, cfg=SimConfig(replications=1, seed=8, mode="network", horizon=5000.0))
    p = solve_steady_state(m, with_bounds=False).p.mean()
    assert abs(res.mean_occupancy - p) < 0.05


def test_dynamic_refresh_runs_and_is_deterministic():
    m = table1_model(5, 2.0, n=10)
    cfg = SimConfig(replications=2, seed=8, mode="network", horizon=1000.0, env_refresh="dynamic")
    a, b = simulate_network(m, cfg=cfg), simulate_network(m, cfg=cfg)
    np.testing.assert_array_equal(a.occupancy, b.occupancy)
    assert 0.5 < a.mean_occupancy < 1.0
    assert a.meta["env_refresh"] == "dynamic"


def test_event_limit():
    m = table1_model(5, 2.0, n=10)
    with pytest.raises(EventLimitError):
        simulate_network(m, cfg=SimConfig(replications=1, seed=1, mode="network", horizon=1e4, max_events=100))


def test_recovery_law_mean_must_match():
    m = table1_model(5, 2.0, n=10)
    with pytest.raises(ValueError, match="recovery"):
        simulate_network(m, DistributionSpec.exponential(1.0), cfg=NETWORK)
    ok = simulate_network(m, DistributionSpec.dirac(4.0), cfg=SimConfig(replications=1, seed=1, mode="network",
                                                                         horizon=500.0))
    assert 0.0 < ok.mean_occupancy < 1.0


def test_csv_outputs():
    m = figure_model(4, 0.5, 2.0)
    res = simulate_ttc_mixed(m, 0, SimConfig(replications=10, seed=1, mode="node-mixed"))
    buf = io.StringIO()
    res.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# mode=node-mixed" and "replication,T" in lines
    assert len(lines) - lines.index("replication,T") - 1 == 10
    net = simulate_network(table1_model(5, 2.0, n=10),
                           cfg=SimConfig(replications=1, seed=1, mode="network", horizon=100.0))
    buf = io.StringIO()
    net.write_csv(buf)
    assert "node,occupancy" in buf.getvalue().splitlines()
    buf = io.StringIO()
    net.write_series_csv(buf)
    assert "time,fraction" in buf.getvalue().splitlines()
