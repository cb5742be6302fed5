import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockmetrics.dist import DistributionSpec
from shockmetrics.model import NodeSpec, parse_graph_text, regular_graph, uniform_model
from shockmetrics.presets import TABLE1_C, TABLE1_K, TABLE1_PARAMS, table1_model, weibull_gamma_families
from shockmetrics.reference import TABLE1_REFERENCE
from shockmetrics.sim import SimConfig, compare_frozen, simulate_ttc_frozen
from shockmetrics.steady import (
    BracketError,
    RegularParams,
    mean_field_expected_ttc,
    regular_bounds,
    regular_graph_steady_state,
    regular_phi,
    solve_steady_state,
    steady_state_bounds,
    write_regular_csv,
)

PARAMS = RegularParams(**TABLE1_PARAMS)


def table_model(graph, c=2.0, theta=4.0, recovery_mean=4.0):
    p = TABLE1_PARAMS
    fams = weibull_gamma_families(p["alpha"], p["beta"], p["gamma"], p["lam"])
    node = NodeSpec(c, c, recovery_mean, DistributionSpec.binomial(1, 0.5), DistributionSpec.dirac(theta))
    return uniform_model(graph, fams, node)


def test_isolated_nodes_sit_at_pull_only_value():
    m = table_model(parse_graph_text("a\nb\n"))
    res = solve_steady_state(m)
    assert res.converged
    # one Gamma(lam, theta) stream: E[T] = (lam / theta) / sf(c)
    want = 1.0 / (1.0 + (1.5 / 4.0) / (math.exp(-0.5) * 4.0))
    np.testing.assert_allclose(res.p, want, atol=1e-9)
    np.testing.assert_allclose(res.bounds.p_lower, want, atol=1e-12)


def test_without_pull_zero_is_a_fixed_point():
    m = table_model(regular_graph(5, 10), theta=0.0)
    res = solve_steady_state(m, with_bounds=False)
    lo, hi = res.bracket
    assert np.all(lo == 0.0)
    # an attack-free network stays clean, but a fully compromised one sustains itself
    assert np.all(hi > 0.5)
    assert not res.converged
    assert "gap" in res.diagnostics[0]


def test_no_attack_at_all():
    m = table_model(parse_graph_text("a\n"), theta=0.0)
    res = solve_steady_state(m)
    assert res.converged and res.p[0] == 0.0


@pytest.mark.parametrize("k", [5, 8, 10])
@pytest.mark.parametrize("c", [2.0, 5.0, 9.0])
def test_network_solver_matches_scalar(k, c):
    m = table1_model(k, c, n=2 * k if k % 2 == 0 else 2 * k)
    res = solve_steady_state(m, with_bounds=False)
    scalar = regular_graph_steady_state(k, PARAMS.with_c(c))
    assert res.converged and res.monotone
    np.testing.assert_allclose(res.p, scalar.p, atol=1e-6)
    assert abs(res.eq_residual) < 1e-4
    assert abs(scalar.eq_residual) < 1e-6


def test_bounds_sandwich_network():
    m = table1_model(8, 4.0, n=16)
    res = solve_steady_state(m)
    assert np.all(res.p_lower <= res.p + 1e-9) and np.all(res.p <= res.p_upper + 1e-9)
    assert not res.bounds.unverified
    lo, hi = regular_bounds(8, PARAMS.with_c(4.0))
    np.testing.assert_allclose(res.p_lower, lo, atol=1e-12)
    np.testing.assert_allclose(res.bounds.p_upper_nbue, hi, atol=1e-12)


def test_bounds_sandwich_table():
    for k in TABLE1_K:
        for c in TABLE1_C:
            r = regular_graph_steady_state(k, PARAMS.with_c(c))
            assert r.p_lower - 1e-9 <= r.p <= r.p_upper + 1e-9


def test_reported_upper_bound_is_the_tighter_one():
    b = steady_state_bounds(table1_model(5, 2.0, n=10))
    assert np.all(b.nbue_ok)
    # the closed form rests on a lower bound for E[T], so it can only be looser
    assert np.all(b.p_upper_integral <= b.p_upper_nbue + 1e-12)
    np.testing.assert_array_equal(b.p_upper, np.minimum(b.p_upper_integral, b.p_upper_nbue))
    assert round(float(b.p_lower[0]), 2) == 0.87 and round(float(b.p_upper_nbue[0]), 2) == 0.92


def test_non_nbue_waiting_times_use_the_integral_bound():
    p = TABLE1_PARAMS
    fams = weibull_gamma_families(p["alpha"], 0.5, p["gamma"], p["lam"])
    node = NodeSpec(2.0, 2.0, 4.0, DistributionSpec.binomial(1, 0.5), DistributionSpec.dirac(4.0))
    m = uniform_model(regular_graph(5, 10), fams, node)
    b = steady_state_bounds(m)
    assert not b.nbue_ok.any()
    np.testing.assert_array_equal(b.p_upper, b.p_upper_integral)
    res = solve_steady_state(m)
    assert np.all(res.p <= res.p_upper + 1e-9)


@settings(max_examples=25)
@given(st.sampled_from([5, 10, 20]), st.floats(2.0, 9.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_phi_is_monotone(k, c, p1, p2):
    lo, hi = sorted((p1, p2))
    params = PARAMS.with_c(c)
    assert regular_phi(k, lo, params) <= regular_phi(k, hi, params) + 1e-9


def test_iteration_monotone_per_step():
    m = table1_model(5, 8.0, n=10)
    res = solve_steady_state(m, with_bounds=False)
    assert res.monotone and res.converged


def test_not_converged_after_one_step():
    m = table1_model(5, 2.0, n=10)
    res = solve_steady_state(m, max_iter=1, with_bounds=False)
    assert not res.converged
    buf = io.StringIO()
    res.write_csv(buf, bounds=False)
    text = buf.getvalue()
    assert text.startswith("# not converged")
    assert "# bracket node=0" in text


def test_csv_format():
    m = table1_model(5, 2.0, n=10)
    res = solve_steady_state(m)
    buf = io.StringIO()
    res.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "node,p,p_lower,p_upper,converged,unverified"
    assert len(lines) == 11 and lines[1].startswith("0,")
    buf = io.StringIO()
    res.write_csv(buf, bounds=False)
    assert buf.getvalue().splitlines()[1].split(",")[2:4] == ["", ""]
    buf = io.StringIO()
    write_regular_csv(buf, [regular_graph_steady_state(5, PARAMS)])
    assert buf.getvalue().splitlines()[0] == "c,k,p,p_lower,p_upper"


def test_bracket_error():
    with pytest.raises(BracketError):
        # Gamma(0.3) waits are not NBUE, so the closed-form upper end undershoots the root
        regular_graph_steady_state(5, RegularParams(beta=0.3, lam=0.5))
    assert regular_bounds(5, RegularParams(theta=1e-9, c1=50.0, c2=50.0))[0] == 0.0


def _gaps():
    return {(k, c): (r.p_upper - r.p) for k in TABLE1_K for c in TABLE1_C
            for r in [regular_graph_steady_state(k, PARAMS.with_c(c))]}


def test_gap_shrinks_with_degree():
    gaps = _gaps()
    for c in TABLE1_C:
        for k1, k2 in zip(TABLE1_K, TABLE1_K[1:]):
            if c >= 8.0 and k1 == 5:
                continue
            assert gaps[k2, c] <= gaps[k1, c] + 1e-12, (c, k1, k2)
    # the reference values carry the same exception: the gap jumps from k=5 to k=8 at c >= 8
    for c in (8.0, 9.0):
        ref = {k: TABLE1_REFERENCE[k, c][2] - TABLE1_REFERENCE[k, c][0] for k in (5, 8)}
        assert ref[8] > ref[5] + 0.05
        assert gaps[8, c] > gaps[5, c]


def test_gap_shrinks_as_threshold_decreases_for_small_degree():
    gaps = _gaps()
    for k in (5, 8, 10):
        cs = [c for c in TABLE1_C if k != 5 or c <= 7.0]
        for c1, c2 in zip(cs, cs[1:]):
            assert gaps[k, c1] <= gaps[k, c2] + 1e-12, (k, c1, c2)


def test_mean_field_ettc_against_frozen_simulation():
    # at the fixed point every node sees k p compromised neighbours on average
    k, c = 5, 2.0
    m = table1_model(k, c, n=10)
    p = regular_graph_steady_state(k, PARAMS.with_c(c)).p
    r = k * p
    res = simulate_ttc_frozen(m, 0, r, 4.0, SimConfig(replications=100_000, seed=3, mode="node-frozen"))
    ks, et, z = compare_frozen(m, 0, r, 4.0, res)
    assert et == pytest.approx(mean_field_expected_ttc(m, 0, np.full(m.graph.n, p)), rel=1e-9)
    assert ks.passed and abs(z) < 4.0
