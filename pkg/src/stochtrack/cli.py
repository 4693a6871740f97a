"""Command-line front end: ``stochtrack {track,compare,verify,fixtures}``.

Exit codes: 0 on success (a detected bifurcation is a result, not an
error), 1 on a failed run or check, 2 on bad arguments.
"""

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import verify as V
from .linalg import norm_inf
from .problems import BRANCH_NAMES, PROBLEMS, build_fixtures, get_problem
from .stochastic import track_stochastic
from .tables import to_csv, to_text, write_csv
from .tracker import Status, TrackerConfig, track_traditional

DEFAULT_STEP = {"toy": 0.1, "example1": 0.1, "example2": -1.0, "example3": -1.0}

# flag dest -> TrackerConfig field
_CFG_FLAGS = {
    "tol": "tol",
    "newton_tol": "newton_tol",
    "newton_max_iter": "newton_max_iter",
    "min_step": "min_step",
    "m_max": "m_max",
    "mask_retries": "mask_retries",
    "adaptive_tol": "adaptive_tol",
    "tol_growth": "tol_growth",
    "contraction_max": "contraction_max",
}


class UsageError(Exception):
    pass


def _default_seed():
    env = os.environ.get("STOCHTRACK_SEED")
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"STOCHTRACK_SEED must be an integer, got {env!r}") from None


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config(path):
    """Parse a flat ``key = value`` file into TrackerConfig overrides."""
    fields = {f.name: f for f in dataclasses.fields(TrackerConfig)}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip().replace("-", "_"), val.strip()
        if not sep or key not in fields:
            raise UsageError(f"{path}:{lineno}: unknown or malformed entry {raw!r}")
        try:
            if key in ("newton_max_iter", "mask_retries", "seed"):
                out[key] = int(val)
            elif key in ("m_max", "contraction_max"):
                out[key] = None if val.lower() in ("none", "") else (int(val) if key == "m_max" else float(val))
            elif key == "adaptive_tol":
                out[key] = _parse_bool(val)
            else:
                out[key] = float(val)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None
    return out


def build_config(args, problem):
    values = {"delta_p": DEFAULT_STEP[problem]}
    if args.config:
        values.update(read_config(args.config))
    if args.dp is not None:
        values["delta_p"] = args.dp
    for dest, key in _CFG_FLAGS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[key] = v
    values["seed"] = args.seed if args.seed is not None else values.get("seed", _default_seed())
    try:
        return TrackerConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def _run(method, spec, branch, cfg, p_end=None):
    b = spec.branch(branch)
    if method == "traditional":
        return track_traditional(spec.system, b.u0, cfg, p_end=p_end)
    return track_stochastic(spec.system, b.u0, cfg, p_end=p_end)


def trace_rows(report):
    rows = []
    for k, pt in enumerate(report.trace):
        rows.append([k, pt.p, *pt.u, pt.residual, pt.m_used, pt.newton_iters])
    if report.reanchored is not None:
        pt = report.reanchored
        rows.append(["reanchor", pt.p, *pt.u, pt.residual, 0, pt.newton_iters])
    return rows


def trace_header(n):
    return ["k", "p", *[f"u_{i}" for i in range(1, n + 1)], "residual_original", "m_used", "newton_iters"]


def _summary_line(report):
    s = report.summary()
    return (
        f"status={s['status']} steps={s['steps']} accepted={s['accepted']} rejected={s['rejected']} "
        f"final_p={s['final_p']:.17g} wall_time={s['wall_time']:.4f}"
    )


def _spec(args):
    try:
        return get_problem(args.problem, getattr(args, "n", None))
    except (ValueError, RuntimeError) as exc:
        raise UsageError(str(exc)) from None


def cmd_track(args):
    spec = _spec(args)
    if args.list_branches:
        a = spec.system.param_range[0]
        for i, b in enumerate(spec.branches):
            res = norm_inf(spec.system.eval_F(b.u0, a))
            print(f"{i}\t{b.name}\tresidual={res:.3e}\tsource={b.source}")
        return 0
    cfg = build_config(args, args.problem)
    if not 0 <= args.branch < len(spec.branches):
        raise UsageError(f"--branch must be in [0, {len(spec.branches) - 1}]")
    try:
        report = _run(args.method, spec, args.branch, cfg, p_end=args.p_end)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = to_csv(trace_header(spec.system.n), trace_rows(report))
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="") as fh:
            fh.write(text)
        print(_summary_line(report))
    else:
        sys.stdout.write(text)
        print(_summary_line(report), file=sys.stderr)
    return 1 if report.status is Status.FAILED else 0


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_compare(args):
    ns = args.n if args.n else [None]
    header = ["problem", "n", "branch", "trad_status", "trad_steps", "trad_rejected", "trad_final_p",
              "trad_time", "stoch_status", "stoch_steps", "stoch_max_m", "stoch_time"]
    rows = []
    failed = False
    for n in ns:
        args_n = argparse.Namespace(**{**vars(args), "n": n})
        spec = _spec(args_n)
        cfg = build_config(args, args.problem)
        branches = [args.branch] if args.branch is not None else (
            range(len(spec.branches)) if args.problem == "example1" else [0])
        for bi in branches:
            try:
                tr = _run("traditional", spec, bi, cfg)
                st = _run("stochastic", spec, bi, cfg)
            except (ValueError, IndexError) as exc:
                raise UsageError(str(exc)) from None
            failed |= Status.FAILED in (tr.status, st.status)
            mmax = max((pt.m_used for pt in st.trace), default=0)
            rows.append([args.problem, spec.system.n if n is None else n, spec.branches[bi].name,
                         str(tr.status), tr.steps, tr.steps_rejected, tr.last.p, tr.wall_time,
                         str(st.status), st.steps, mmax, st.wall_time])
    sys.stdout.write(to_text(header, rows))
    if args.out:
        write_csv(args.out, header, rows)
    return 1 if failed else 0


def cmd_verify(args):
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    if args.demo_fig1:
        demo = V.fig1_demo(args.sigma, args.samples, rng=args.seed if args.seed is not None else _default_seed())
        header = ["p"] + [f"x{sgn}{s + 1}" for s in range(args.samples) for sgn in ("+", "-")]
        rows = [[p, *demo.curves[:, i]] for i, p in enumerate(demo.p)]
        text = to_csv(header, rows)
        if out_dir:
            (out_dir / "fig1_demo.csv").write_text(text, encoding="ascii", newline="")
        else:
            sys.stdout.write(text)
        return 0

    ok = True
    checks = []
    rng = np.random.default_rng(0)
    for name in PROBLEMS:
        spec = get_problem(name)
        rep = V.check_jacobians(spec.system, 20, rng, center=spec.branches[0].u0)
        checks.append(["jacobian", spec.system.name, max(rep.max_err_u, rep.max_err_p), "< 1e-5", rep.passed])
    roots = V.ex1_target_roots()
    checks.append(["ex1_roots", "substitution", 0.0, "< 1e-14", len(roots) == 4])
    if not args.no_grid:
        found = V.ex1_grid_search(1.0)
        extra = [w for w in found if min(np.max(np.abs(w - r)) for r in roots) > 1e-6]
        checks.append(["ex1_roots", "grid search t=1", float(len(extra)), "= 0 new", not extra and len(found) == 4])
    ex1 = get_problem("example1").system
    for r in roots[:2]:
        q = V.newton_order_probe(ex1, r, 1.0, rng=1).q
        checks.append(["newton_order", "example1", q, "in [1.7, 2.3]", 1.7 <= q <= 2.3])
    ex3 = get_problem("example3")
    for b in ex3.branches:
        q = V.newton_order_probe(ex3.system, b.u0, ex3.system.param_range[0], rng=1).q
        checks.append(["newton_order", f"example3 {b.name}", q, "in [1.7, 2.3]", 1.7 <= q <= 2.3])
    if args.scaling:
        res = V.scaling_experiment(num_seeds=args.seeds, base_seed=args.seed or 0)
        table = [[n, d, f] for n, d, f in res.rows()]
        sys.stdout.write(to_text(["n", "D", "failed_seeds"], table))
        if out_dir:
            write_csv(out_dir / "scaling.csv", ["n", "D", "failed_seeds"], table)
        checks.append(["scaling", "D non-increasing", float(res.nonincreasing), "true", res.nonincreasing])
        checks.append(["scaling", "log-log slope", res.slope, "<= -1", res.slope <= -1])
    header = ["check", "target", "value", "criterion", "passed"]
    sys.stdout.write(to_text(header, checks))
    if out_dir:
        write_csv(out_dir / "verify.csv", header, checks)
    ok = all(c[-1] for c in checks)
    return 0 if ok else 1


def cmd_fixtures(args):
    for path in build_fixtures(args.out_dir):
        print(path)
    return 0


def _add_config_flags(p):
    p.add_argument("--dp", "--dt", "--dd", dest="dp", type=float, default=None,
                   help="signed nominal step in the tracked parameter")
    p.add_argument("--seed", type=int, default=None, help="mask RNG seed (default $STOCHTRACK_SEED or 0)")
    p.add_argument("--config", help="flat key=value file of tracker settings")
    p.add_argument("--tol", type=float, help="stochastic accept threshold (default 1e-6)")
    p.add_argument("--newton-tol", type=float, help="corrector residual tolerance (default 1e-10)")
    p.add_argument("--newton-max-iter", type=int, help="corrector iteration budget (default 20)")
    p.add_argument("--min-step", type=float, help="step floor signalling a bifurcation (default 1e-7)")
    p.add_argument("--m-max", type=int, help="cap on replaced equations (default n-1)")
    p.add_argument("--mask-retries", type=int, help="distinct masks per m level (default 10)")
    p.add_argument("--adaptive-tol", action="store_true", default=None, help="relax tol when every m fails")
    p.add_argument("--tol-growth", type=float, help="tol multiplier in adaptive mode (default 10)")
    p.add_argument("--contraction-max", type=float, help="Newton contraction limit (default 0.2)")


def build_parser():
    parser = argparse.ArgumentParser(prog="stochtrack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track one branch")
    p.add_argument("--problem", required=True, choices=PROBLEMS)
    p.add_argument("--method", choices=("traditional", "stochastic"), default="stochastic")
    p.add_argument("--branch", type=int, default=0)
    p.add_argument("--n", type=int, default=None, help="grid count (example2/example3)")
    p.add_argument("--p-end", type=float, default=None, help="stop before the default end parameter")
    p.add_argument("--out", help="trace CSV path (default stdout)")
    p.add_argument("--list-branches", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("compare", help="run both trackers side by side")
    p.add_argument("--problem", required=True, choices=PROBLEMS)
    p.add_argument("--n", type=_int_list, default=None, help="comma-separated grid counts")
    p.add_argument("--branch", type=int, default=None)
    p.add_argument("--out", help="CSV path for the table")
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="derivative, root, order and scaling checks")
    p.add_argument("--scaling", action="store_true")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-grid", action="store_true", help="skip the brute-force root search")
    p.add_argument("--demo-fig1", action="store_true", help="emit the additive-noise toy curves and exit")
    p.add_argument("--sigma", type=float, default=0.1, help="noise standard deviation for the demo")
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fixtures", help="rebuild cached start solutions")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"stochtrack: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
