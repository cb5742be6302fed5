"""Command-line front end: ``shockmetrics <verb> [flags]``."""

from __future__ import annotations

import argparse
import contextlib
import csv
import math
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_NONCONVERGED = 3
EXIT_KS = 4
EXIT_USAGE = 64

FIG_T_MAX = 10.0
FIG4_T_MAX = 20.0
FIG_POINTS = 201


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(text):
        try:
            x = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not x > 0 or (isinstance(x, float) and not math.isfinite(x)):
            raise argparse.ArgumentTypeError(f"must be > 0: {text!r}")
        return x

    return conv


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}") from None


def _seed(text):
    try:
        x = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= x < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return x


def resolve_threads(flag):
    if flag is not None:
        return flag
    raw = os.environ.get("SHOCKMETRICS_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise UsageError(f"SHOCKMETRICS_THREADS must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise UsageError(f"SHOCKMETRICS_THREADS must be a positive integer, got {raw!r}")
        return n
    return 1


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _sibling(path, suffix):
    p = Path(path)
    return p.with_name(f"{p.stem}_{suffix}{p.suffix or '.csv'}")


def _load(args):
    from .model import load_model

    return load_model(args.graph, args.config)


def _node(m, node):
    from .model import ValidationError

    if node is None:
        if m.graph.n == 0:
            raise ValidationError("graph has no nodes")
        return m.graph.nodes[0]
    if node not in m.graph.index:
        raise ValidationError(f"unknown node {node!r}")
    return node


def _say(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# verbs


def run_ttc(args):
    from .ttc import aging_holds, ttc_metrics

    m = _load(args)
    v = _node(m, args.node)
    if args.bounds and not aging_holds(m, v, "NBU"):
        _say(f"assumption NBU failed for node {v}: inter-arrival laws are not new-better-than-used")
        return EXIT_VALIDATION
    res = ttc_metrics(m, v, points=args.points, t_max=args.t_max, bounds=args.bounds,
                      asymptotic=args.asymptotic)
    with _output(args.out) as fh:
        res.write_csv(fh)
    if args.out and args.out != "-":
        with open(_sibling(args.out, "metrics"), "w", newline="", encoding="utf-8") as fh:
            res.write_metrics_csv(fh)
    _say(f"node {v}: E[T] = {res.expected_ttc:.6g}")
    return EXIT_OK


def run_steady(args):
    from .steady import solve_steady_state

    m = _load(args)
    res = solve_steady_state(m, threads=args.threads, with_bounds=args.bounds)
    with _output(args.out) as fh:
        res.write_csv(fh, bounds=args.bounds)
    if args.bounds and res.bounds.unverified:
        _say("warning: stochastic-order precondition failed; bounds are unverified")
    if not res.converged:
        for line in res.diagnostics:
            _say(f"not converged: {line}")
        return EXIT_NONCONVERGED
    _say(f"converged in {res.iterations} iterations, residual {res.residual:.3g}")
    return EXIT_OK


def _regular_params(args):
    from .presets import TABLE1_PARAMS
    from .steady import RegularParams

    base = dict(TABLE1_PARAMS)
    for key in ("alpha", "beta", "gamma", "lam", "theta", "recovery_mean"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    return RegularParams(**base)


def run_regular(args):
    from .presets import TABLE1_C, TABLE1_K
    from .steady import regular_graph_steady_state, write_regular_csv

    params = _regular_params(args)
    ks = args.k or list(TABLE1_K)
    cs = args.c or list(TABLE1_C)
    results = [
        regular_graph_steady_state(k, params.with_c(c, args.c2)) for c in cs for k in ks
    ]
    with _output(args.out) as fh:
        write_regular_csv(fh, results)
    return EXIT_OK


def run_validate(args):
    from .model import validate_assumptions

    m = _load(args)
    which = ["A2", "A4", "NBU", "NBUE"] if args.which == "all" else [args.which]
    reports = [validate_assumptions(m, w) for w in which]
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["assumption", "passed", "detail"])
        for r in reports:
            w.writerow([r.name, int(r.passed), "; ".join(r.details)])
    failed = [r.name for r in reports if not r.passed]
    if failed:
        _say("failed: " + ", ".join(failed))
        return EXIT_VALIDATION
    return EXIT_OK


def run_simulate(args):
    from .sim import SimConfig, compare_frozen, compare_mixed, simulate_network, simulate_ttc_frozen, \
        simulate_ttc_mixed

    m = _load(args)
    cfg = SimConfig(
        replications=args.reps,
        seed=args.seed,
        mode=args.mode,
        horizon=args.horizon,
        warmup_fraction=args.warmup,
        env_refresh=args.env_refresh,
        threads=args.threads,
    )
    code = EXIT_OK
    if args.mode == "network":
        res = simulate_network(m, cfg=cfg)
        if args.compare:
            from .steady import solve_steady_state

            ss = solve_steady_state(m, with_bounds=False)
            gap = res.mean_occupancy - float(np.mean(ss.p))
            res.meta["mean_field_p"] = repr(float(np.mean(ss.p)))
            res.meta["occupancy_minus_mean_field"] = repr(gap)
            _say(f"mean occupancy {res.mean_occupancy:.4f} vs mean-field {np.mean(ss.p):.4f}")
        with _output(args.out) as fh:
            res.write_csv(fh)
        if args.out and args.out != "-":
            with open(_sibling(args.out, "series"), "w", newline="", encoding="utf-8") as fh:
                res.write_series_csv(fh)
        return code
    v = _node(m, args.node)
    if args.mode == "node-frozen":
        if args.r is None or args.theta is None:
            raise UsageError("node-frozen mode needs --r and --theta")
        res = simulate_ttc_frozen(m, v, args.r, args.theta, cfg)
        report = compare_frozen(m, v, args.r, args.theta, res) if args.compare else None
    else:
        res = simulate_ttc_mixed(m, v, cfg)
        report = compare_mixed(m, v, res) if args.compare else None
    if report is not None:
        ks, et, z = report
        res.meta.update(ks_statistic=repr(ks.statistic), ks_pvalue=repr(ks.pvalue), ks_alpha=ks.alpha,
                        expected_ttc=repr(et), mean_z=repr(z))
        _say(f"KS D={ks.statistic:.5f} p={ks.pvalue:.4f} (alpha {ks.alpha}); mean z-score {z:+.2f}")
        if not ks.passed:
            code = EXIT_KS
    with _output(args.out) as fh:
        res.write_csv(fh)
    return code


def run_reproduce(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = ["table1", "fig2", "fig3", "fig4"] if args.artifact == "all" else [args.artifact]
    for a in artifacts:
        written = REPRODUCERS[a](out)
        for path in written:
            _say(f"wrote {path}")
    return EXIT_OK


def _reproduce_table1(out: Path):
    from .presets import TABLE1_C, TABLE1_K, TABLE1_PARAMS
    from .reference import TABLE1_REFERENCE
    from .steady import RegularParams, regular_graph_steady_state, write_regular_csv

    params = RegularParams(**TABLE1_PARAMS)
    results = [regular_graph_steady_state(k, params.with_c(c)) for c in TABLE1_C for k in TABLE1_K]
    table = out / "table1.csv"
    with open(table, "w", newline="", encoding="utf-8") as fh:
        write_regular_csv(fh, results)
    diff = out / "table1_diff.csv"
    tol = {"p": 0.02, "p_lower": 0.01, "p_upper": 0.01}
    misses = 0
    with open(diff, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c", "k", "quantity", "computed", "reference", "delta", "tolerance", "within"])
        for r in results:
            ref = dict(zip(("p", "p_lower", "p_upper"), TABLE1_REFERENCE[(r.k, r.c1)]))
            for q in ("p", "p_lower", "p_upper"):
                got = getattr(r, q)
                d = got - ref[q]
                ok = abs(d) <= tol[q] + 1e-12
                misses += not ok
                w.writerow([f"{r.c1:g}", r.k, q, f"{got:.6f}", f"{ref[q]:.2f}", f"{d:+.6f}", tol[q], int(ok)])
    _say(f"table1: {3 * len(results) - misses}/{3 * len(results)} cells within tolerance")
    return [table, diff]


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _curve_rows(label_values, m, t_grid, bounds=False):
    from .ttc import ttc_cdf, ttc_cdf_upper

    q = ttc_cdf(m, 0, t_grid)
    qu = ttc_cdf_upper(m, 0, t_grid) if bounds else None
    for i, t in enumerate(t_grid):
        row = list(label_values) + [repr(float(t)), repr(float(q[i]))]
        if bounds:
            row.append(repr(float(qu[i])))
        yield row


def _reproduce_fig2(out: Path):
    from .presets import figure_model

    t = np.linspace(0.0, FIG_T_MAX, FIG_POINTS)
    files = []
    path = out / "fig2a.csv"
    rows = [r for p in (0.2, 0.5, 0.8) for r in _curve_rows([p], figure_model(8, p, 2.0), t)]
    _write_rows(path, ["p", "t", "q"], rows)
    files.append(path)
    path = out / "fig2b.csv"
    rows = [r for deg in (4, 8, 12) for r in _curve_rows([deg], figure_model(deg, 0.5, 2.0), t)]
    _write_rows(path, ["deg", "t", "q"], rows)
    files.append(path)
    path = out / "fig2c.csv"
    rows = [r for c in (1.0, 2.0, 3.0, 5.0) for r in _curve_rows([c], figure_model(8, 0.5, c), t, bounds=True)]
    _write_rows(path, ["c", "t", "q", "q_upper"], rows)
    files.append(path)
    return files


def _reproduce_fig3(out: Path):
    from .presets import figure_model
    from .ttc import expected_ttc, expected_ttc_lower_iid, integrated_upper_survival

    rows = []
    for p in (0.2, 0.8):
        for c in np.arange(1.0, 10.01, 0.5):
            m = figure_model(8, p, float(c))
            rows.append([p, f"{c:g}", repr(expected_ttc(m, 0)), repr(integrated_upper_survival(m, 0)),
                         repr(expected_ttc_lower_iid(m, 0))])
    path = out / "fig3.csv"
    _write_rows(path, ["p", "c", "expected_ttc", "integrated_upper_survival", "expected_ttc_lower"], rows)
    return [path]


def fig4_curves(t_grid=None):
    """(c, t, q, q_asymptotic_raw) on the common window for c in 2, 5, 8, 12."""
    from .presets import figure_model
    from .ttc import ttc_cdf, ttc_cdf_asymptotic

    t = np.linspace(0.0, FIG4_T_MAX, FIG_POINTS) if t_grid is None else np.asarray(t_grid, float)
    out = {}
    for c in (2.0, 5.0, 8.0, 12.0):
        m = figure_model(8, 0.5, c)
        out[c] = (t, ttc_cdf(m, 0, t), ttc_cdf_asymptotic(m, 0, t))
    return out


def _reproduce_fig4(out: Path):
    curves = fig4_curves()
    rows, summary = [], []
    for c, (t, q, qa) in curves.items():
        for i in range(len(t)):
            rows.append([f"{c:g}", repr(float(t[i])), repr(float(q[i])), repr(float(min(max(qa[i], 0.0), 1.0))),
                         repr(float(qa[i]))])
        summary.append([f"{c:g}", repr(float(np.max(np.abs(qa - q))))])
    path = out / "fig4.csv"
    _write_rows(path, ["c", "t", "q", "q_asymptotic", "q_asymptotic_raw"], rows)
    spath = out / "fig4_sup_error.csv"
    _write_rows(spath, ["c", "sup_abs_error"], summary)
    return [path, spath]


REPRODUCERS = {
    "table1": _reproduce_table1,
    "fig2": _reproduce_fig2,
    "fig3": _reproduce_fig3,
    "fig4": _reproduce_fig4,
}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="shockmetrics", description=__doc__)
    p.add_argument("--threads", type=_positive(int), default=None,
                   help="worker cap (falls back to SHOCKMETRICS_THREADS, then 1)")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def model_flags(sp, node=False):
        sp.add_argument("--config", required=True, help="JSON model config")
        sp.add_argument("--graph", default=None, help="edge list path or regular:k=K,n=N")
        if node:
            sp.add_argument("--node", default=None, help="node id (default: first node)")
        sp.add_argument("--out", default=None, help="output CSV (default stdout)")

    sp = sub.add_parser("ttc", help="time-to-compromise distribution of one node")
    model_flags(sp, node=True)
    sp.add_argument("--t-max", type=_positive(float), default=None)
    sp.add_argument("--points", type=_positive(int), default=201)
    sp.add_argument("--bounds", action="store_true")
    sp.add_argument("--asymptotic", action="store_true")
    sp.set_defaults(func=run_ttc)

    sp = sub.add_parser("steady", help="mean-field steady-state compromise probabilities")
    model_flags(sp)
    sp.add_argument("--bounds", action="store_true")
    sp.set_defaults(func=run_steady)

    sp = sub.add_parser("regular", help="closed forms on k-regular graphs")
    sp.add_argument("--k", type=_int_list, default=None, help="degrees, comma separated")
    sp.add_argument("--c", type=_float_list, default=None, help="thresholds c1 = c2, comma separated")
    sp.add_argument("--c2", type=float, default=None, help="separate pull threshold")
    for name in ("alpha", "beta", "gamma", "lam", "theta"):
        sp.add_argument(f"--{name}", type=_positive(float), default=None)
    sp.add_argument("--recovery-mean", type=_positive(float), default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=run_regular)

    sp = sub.add_parser("simulate", help="Monte Carlo oracles")
    model_flags(sp, node=True)
    sp.add_argument("--mode", choices=["node-frozen", "node-mixed", "network"], default="node-mixed")
    sp.add_argument("--reps", type=_positive(int), default=10_000)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--horizon", type=_positive(float), default=2000.0)
    sp.add_argument("--warmup", type=float, default=0.25)
    sp.add_argument("--env-refresh", choices=["at-recovery", "dynamic"], default="at-recovery")
    sp.add_argument("--r", type=float, default=None, help="frozen push environment")
    sp.add_argument("--theta", type=float, default=None, help="frozen pull environment")
    sp.add_argument("--compare", action="store_true")
    sp.set_defaults(func=run_simulate)

    sp = sub.add_parser("validate", help="check model preconditions")
    model_flags(sp)
    sp.add_argument("--which", choices=["A2", "A4", "NBU", "NBUE", "all"], default="all")
    sp.set_defaults(func=run_validate)

    sp = sub.add_parser("reproduce", help="regenerate the worked-example tables and curves")
    sp.add_argument("--artifact", choices=["table1", "fig2", "fig3", "fig4", "all"], required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=run_reproduce)
    return p


def main(argv=None) -> int:
    from .dist import DomainError, InvalidParameterError
    from .model import ModelError
    from .renewal import IntegrationError, UnsupportedFamilyError
    from .sim import CapHitError, EventLimitError
    from .steady import BracketError
    from .ttc import PreconditionError, SeriesTailError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.threads = resolve_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        _say(f"shockmetrics: error: {exc}")
        return EXIT_USAGE
    except (ModelError, PreconditionError, InvalidParameterError, DomainError, UnsupportedFamilyError) as exc:
        _say(f"validation error: {exc}")
        return EXIT_VALIDATION
    except (IntegrationError, BracketError, SeriesTailError, CapHitError, EventLimitError) as exc:
        _say(f"did not converge: {exc}")
        return EXIT_NONCONVERGED
    except ValueError as exc:
        _say(f"validation error: {exc}")
        return EXIT_VALIDATION
    except OSError as exc:
        _say(f"i/o error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
