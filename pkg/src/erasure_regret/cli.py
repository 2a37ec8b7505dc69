"""Command-line front end.

    erasure-regret bounds   --delta 0.3 --n 100 --grid 0:1:0.01
    erasure-regret ett-eval --delta 0.5 --T 10000 --Te 100 --backoff 0
    erasure-regret sweep te --T 10000 --eeff 0.5
    erasure-regret window   --schedule geometric:10 --eeff 0.5 --trials 10000
    erasure-regret simulate --strategy ett --T 250 --Te 50 --backoff 0.05 --trials 100000

Output is CSV (default) or JSON, to stdout or ``--out``. Fitted slopes are
reported on stderr (and inside the JSON document). Exit codes: 0 ok,
64 usage, 2 I/O, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import ett, mc, windowing
from .fbl import Channel, CodePoint, eps_bounds, oracle_N, regret
from .numerics import ConvergenceError, DomainError, fit_loglog_slope

EXIT_OK = 0
EXIT_IO = 2
EXIT_SOLVER = 3
EXIT_USAGE = 64

SEED_ENV = "ERASURE_REGRET_SEED"
STRATEGIES = ("ett_opt", "geometric", "arithmetic")
SWEEP_KINDS = ("te", "backoff", "te_opt_vs_T", "regret_curve")

# hard defaults, applied after the --config file
DEFAULTS = {
    "delta": 0.5,
    "n": 100,
    "T": 10000,
    "Te": None,
    "backoff": None,
    "eeff": None,
    "M": None,
    "schedule": None,
    "strategy": "ett",
    "strategies": ",".join(STRATEGIES),
    "values": None,
    "trials": None,
    "seed": None,
    "workers": 1,
    "error_model": "step",
    "grid": None,
    "out": None,
    "format": "csv",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x):
    """Render a cell: ints as-is, floats at 12 significant digits."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r} in output")
        return float(format(x, ".12g"))
    return x


def parse_grid(spec: str) -> list[float]:
    """``lo:hi:step`` (inclusive) or a single number."""
    parts = spec.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        bad = next(p for p in parts if not _is_float(p))
        raise UsageError(f"bad grid token {bad!r} in {spec!r}") from None
    if len(nums) == 1:
        return nums
    if len(nums) != 3 or nums[2] <= 0 or nums[1] < nums[0]:
        raise UsageError(f"grid must be lo:hi:step with step > 0 and hi >= lo, got {spec!r}")
    lo, hi, step = nums
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def parse_int_list(spec: str) -> list[int]:
    out = []
    for tok in spec.split(","):
        try:
            out.append(int(float(tok)) if "e" in tok.lower() else int(tok))
        except ValueError:
            raise UsageError(f"bad integer token {tok!r} in {spec!r}") from None
    return out


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def parse_schedule(spec: str) -> windowing.Schedule:
    kind, sep, body = spec.partition(":")
    if not sep or not body:
        raise UsageError(f"schedule must look like kind:args, got {spec!r}")
    args = parse_int_list(body)
    try:
        if kind == "geometric":
            if len(args) != 1:
                raise UsageError(f"geometric takes one argument M, got {body!r}")
            return windowing.make_geometric(args[0])
        if kind == "arithmetic":
            if len(args) != 2:
                raise UsageError(f"arithmetic takes T,M, got {body!r}")
            return windowing.make_arithmetic(*args)
        if kind == "custom":
            return windowing.make_custom(args)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"unknown schedule kind {kind!r} in {spec!r}")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--config", metavar="PATH", help="JSON file of flag values; flags win")
    g.add_argument("--delta", type=float)
    g.add_argument("--T", type=int)
    g.add_argument("--Te", type=int)
    g.add_argument("--backoff", type=float)
    g.add_argument("--eeff", type=float)
    g.add_argument("--M", type=int)
    g.add_argument("--n", type=int, help="blocklength for `bounds`")
    g.add_argument("--schedule", help="geometric:M | arithmetic:T,M | custom:1,2,4,...")
    g.add_argument("--trials", type=int)
    g.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")
    g.add_argument("--workers", type=int)
    g.add_argument("--error-model", dest="error_model", choices=[m.value for m in ett.ErrorModel])
    g.add_argument("--grid", metavar="LO:HI:STEP")
    g.add_argument("--values", metavar="T1,T2,...", help="horizons for T sweeps")
    g.add_argument("--strategies", help=f"comma list from {','.join(STRATEGIES)}")
    g.add_argument("--strategy", help="`ett` or a schedule spec, for `simulate`")
    g.add_argument("--out", metavar="PATH")
    g.add_argument("--format", choices=["csv", "json"])

    p = _Parser(prog="erasure-regret", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("bounds", parents=[common], help="error bounds vs rate")
    sub.add_parser("ett-eval", parents=[common], help="evaluate one Estimate-then-Transmit config")
    sw = sub.add_parser("sweep", parents=[common], help="figure-style sweeps")
    sw.add_argument("kind", choices=SWEEP_KINDS)
    sub.add_parser("window", parents=[common], help="evaluate a windowing schedule")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo vs exact evaluator")
    return p


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge --config file values and defaults under the explicit flags."""
    config = {}
    if args.config:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
        unknown = set(config) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, default))
    if args.seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            args.seed = int(env) if env else 0
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from None
    return args


# -- commands ----------------------------------------------------------------


def cmd_bounds(args):
    ch = Channel(args.delta)
    rates = parse_grid(args.grid or "0:1:0.01")
    rows = []
    for r in rates:
        bp = eps_bounds(ch, CodePoint(args.n, r))
        rows.append({"rate": r, "eps_lower": bp.lower, "eps_upper": bp.upper})
    return rows, {}


def _ett_config(args) -> tuple[ett.EttConfig, float]:
    if args.Te is None:
        raise UsageError("--Te is required")
    if (args.backoff is None) == (args.eeff is None):
        raise UsageError("give exactly one of --backoff or --eeff")
    ch = Channel(args.delta)
    if args.backoff is not None:
        b = args.backoff
        eeff = ett.eeff_step_gauss(ch, args.Te, b)
    else:
        eeff = args.eeff
        b = ett.backoff_for_eeff(ch, args.Te, eeff)
    return ett.EttConfig(args.T, args.Te, b), eeff


def cmd_ett_eval(args):
    ch = Channel(args.delta)
    cfg, eeff = _ett_config(args)
    rep = ett.ett_report(ch, cfg)
    row = {"delta": args.delta, "T": cfg.T, "Te": cfg.Te, "Tt": cfg.Tt, "b": cfg.b, "eeff": eeff}
    row.update(vars(rep))
    row["N_oracle"] = oracle_N(ch, cfg.T, max(rep.eeff_gauss, 1e-300))
    return [row], {}


def _nearest_index(values, target) -> int:
    return min(range(len(values)), key=lambda i: (abs(values[i] - target), i))


def sweep_te(args):
    ch = Channel(args.delta)
    eeff = 0.5 if args.eeff is None else args.eeff
    grid = [int(v) for v in parse_grid(args.grid or f"10:{min(args.T - 1, 2000)}:10")]
    if not grid or grid[0] < 1 or grid[-1] >= args.T:
        raise UsageError(f"Te grid must lie in [1, T-1], got {grid[0]}..{grid[-1]}")
    te_star = ett.opt_Te(ch, args.T, eeff)
    star = _nearest_index(grid, te_star)
    rows = []
    for i, te in enumerate(grid):
        cfg = ett.EttConfig(args.T, te, ett.backoff_for_eeff(ch, te, eeff))
        rows.append({
            "Te": te,
            "b": cfg.b,
            "N_thm5": ett.N_thm5(ch, cfg),
            "N_exact_step": ett.N_exact_step(ch, cfg),
            "is_opt": int(i == star),
        })
    return rows, {"Te_opt": te_star}


def sweep_backoff(args):
    ch = Channel(args.delta)
    Te = args.Te if args.Te is not None else ett.opt_Te(ch, args.T, 0.5)
    grid = parse_grid(args.grid or "0:0.1:0.001")
    b_star = ett.backoff_for_eeff(ch, Te, ett.opt_eeff(ch, Te).eeff)
    star = _nearest_index(grid, b_star)
    rows = []
    for i, b in enumerate(grid):
        cfg = ett.EttConfig(args.T, Te, b)
        rows.append({
            "b": b,
            "eeff_gauss": ett.eeff_step_gauss(ch, Te, b),
            "N_thm5": ett.N_thm5(ch, cfg),
            "N_exact_step": ett.N_exact_step(ch, cfg),
            "is_opt": int(i == star),
        })
    return rows, {"b_opt": b_star}


def sweep_te_opt_vs_T(args):
    ch = Channel(args.delta)
    eeff = 0.5 if args.eeff is None else args.eeff
    Ts = parse_int_list(args.values) if args.values else [10**3, 10**4, 10**5, 10**6]
    rows = []
    for T in Ts:
        te = ett.opt_Te(ch, T, eeff)
        rows.append({"T": T, "Te_opt": te, "N_thm5": ett.N_thm5_at_eeff(ch, T, te, eeff)})
    slope = fit_loglog_slope([(r["T"], r["Te_opt"]) for r in rows]) if len(rows) > 1 else None
    return rows, {"slope_Te_opt": slope}


def regret_curve_rows(ch: Channel, eeff: float, Ts, strategies) -> list[dict]:
    """Regret against the oracle for each strategy and horizon.

    Geometric windowing needs T = 2^M - 1, so it runs at M = floor(log2(T+1))
    and reports its own horizon. Arithmetic uses the same M (same number of
    queries) at the full horizon T.
    """
    rows = []
    for name in strategies:
        for T in Ts:
            M = int(math.floor(math.log2(T + 1)))
            if name == "ett_opt":
                te = ett.opt_Te(ch, T, eeff)
                cfg = ett.EttConfig(T, te, ett.backoff_for_eeff(ch, te, eeff))
                horizon, queries = T, 1
                n_exact, n_thm5 = ett.N_exact_step(ch, cfg), ett.N_thm5(ch, cfg)
            else:
                s = windowing.make_geometric(M) if name == "geometric" else windowing.make_arithmetic(T, M)
                horizon, queries = s.T, s.M - 1
                n_exact = windowing.window_N_exact(ch, s, eeff).N_total
                n_thm5 = windowing.window_N_thm5(ch, s, eeff).N_total
            n_o = oracle_N(ch, horizon, eeff)
            rows.append({
                "strategy": name,
                "T": horizon,
                "queries": queries,
                "N_exact": n_exact,
                "N_thm5": n_thm5,
                "N_oracle": n_o,
                "regret": regret(n_exact, n_o),
                "regret_thm5": regret(n_thm5, n_o),
            })
    return rows


def regret_slopes(rows, column="regret") -> dict:
    slopes = {}
    for name in dict.fromkeys(r["strategy"] for r in rows):
        pts = [(r["T"], r[column]) for r in rows if r["strategy"] == name]
        if len(pts) > 1 and all(y > 0 for _, y in pts):
            slopes[name] = fit_loglog_slope(pts)
        else:
            slopes[name] = None
    return slopes


def sweep_regret_curve(args):
    ch = Channel(args.delta)
    eeff = 0.5 if args.eeff is None else args.eeff
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    unknown = [s for s in strategies if s not in STRATEGIES]
    if unknown:
        raise UsageError(f"unknown strategy {unknown[0]!r}; choose from {', '.join(STRATEGIES)}")
    Ts = parse_int_list(args.values) if args.values else [2**m for m in range(10, 21)]
    rows = regret_curve_rows(ch, eeff, Ts, strategies)
    meta = {f"slope_{k}": v for k, v in regret_slopes(rows).items()}
    meta.update({f"slope_thm5_{k}": v for k, v in regret_slopes(rows, "regret_thm5").items()})
    return rows, meta


def cmd_sweep(args):
    return {
        "te": sweep_te,
        "backoff": sweep_backoff,
        "te_opt_vs_T": sweep_te_opt_vs_T,
        "regret_curve": sweep_regret_curve,
    }[args.kind](args)


def _sim_config(args) -> mc.SimConfig:
    if args.trials is None or args.trials < 1:
        raise UsageError("--trials must be a positive integer")
    return mc.SimConfig(args.trials, args.seed, args.error_model)


def _sim_columns(rep: mc.SimReport, exact_n: float, exact_eeff: float) -> dict:
    diff = rep.mean_N - exact_n
    if rep.stderr_N > 0:
        z = diff / rep.stderr_N
    else:
        z = 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(exact_n)) else math.copysign(1e300, diff)
    return {
        "mc_trials": rep.trials,
        "mc_mean_N": rep.mean_N,
        "mc_stderr_N": rep.stderr_N,
        "exact_N": exact_n,
        "z": z,
        "mc_eeff": rep.empirical_eeff,
        "mc_stderr_eeff": rep.stderr_eeff,
        "exact_eeff": exact_eeff,
    }


def cmd_window(args):
    if not args.schedule:
        raise UsageError("--schedule is required")
    ch = Channel(args.delta)
    s = parse_schedule(args.schedule)
    eeff = 0.5 if args.eeff is None else args.eeff
    exact = windowing.window_N_exact(ch, s, eeff)
    thm5 = windowing.window_N_thm5(ch, s, eeff)
    n_o = oracle_N(ch, s.T, eeff)
    row = {
        "schedule": args.schedule,
        "blocks": " ".join(map(str, s.blocks)),
        "M": s.M,
        "T": s.T,
        "queries": exact.queries,
        "N_exact": exact.N_total,
        "N_thm5": thm5.N_total,
        "N_oracle": n_o,
        "regret": regret(exact.N_total, n_o),
        "bound_lower": None,
        "bound_upper": None,
    }
    if s.kind == windowing.GEOMETRIC:
        bp = windowing.geom_N_bounds(ch, s.M, eeff)
        row["bound_lower"], row["bound_upper"] = bp.lower, bp.upper
    if args.trials is not None:
        sim = _sim_config(args)
        rep = mc.simulate_window(ch, s, eeff, sim, workers=args.workers)
        model = sim.error_model
        row.update(_sim_columns(
            rep,
            windowing.window_N_exact(ch, s, eeff, model).N_total,
            windowing.window_eeff_exact(ch, s, eeff, model),
        ))
    return [row], {}


def cmd_simulate(args):
    ch = Channel(args.delta)
    sim = _sim_config(args)
    model = sim.error_model
    if args.strategy == "ett":
        cfg, eeff = _ett_config(args)
        rep = mc.simulate_ett(ch, cfg, sim, workers=args.workers)
        if model is ett.ErrorModel.STEP:
            exact_n = ett.N_exact_step(ch, cfg)
        else:
            exact_n = ett.N_exact_ppv(ch, cfg, model)
        exact_e = ett.eeff_exact(ch, cfg, model)
    else:
        s = parse_schedule(args.strategy)
        eeff = 0.5 if args.eeff is None else args.eeff
        rep = mc.simulate_window(ch, s, eeff, sim, workers=args.workers)
        exact_n = windowing.window_N_exact(ch, s, eeff, model).N_total
        exact_e = windowing.window_eeff_exact(ch, s, eeff, model)
    row = {"strategy": args.strategy, "error_model": model.value, "seed": sim.master_seed, "eeff": eeff}
    row.update(_sim_columns(rep, exact_n, exact_e))
    return [row], {}


COMMANDS = {
    "bounds": cmd_bounds,
    "ett-eval": cmd_ett_eval,
    "sweep": cmd_sweep,
    "window": cmd_window,
    "simulate": cmd_simulate,
}


def render(rows, meta, fmt_name: str) -> str:
    if fmt_name == "json":
        doc = {"rows": [{k: fmt(v) for k, v in r.items()} for r in rows]}
        if meta:
            doc["summary"] = {k: fmt(v) for k, v in meta.items()}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if rows:
        writer.writerow(rows[0].keys())
        for r in rows:
            writer.writerow([fmt(v) for v in r.values()])
    return buf.getvalue()


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args = resolve(args)
        rows, meta = COMMANDS[args.command](args)
        text = render(rows, meta, args.format)
    except (UsageError, DomainError) as exc:
        print(f"erasure-regret: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ett.NoSolutionError, ConvergenceError) as exc:
        print(f"erasure-regret: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"erasure-regret: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    for key, val in meta.items():
        shown = "n/a" if val is None else format(val, ".12g") if isinstance(val, float) else val
        print(f"# {key} = {shown}", file=sys.stderr)
    try:
        if args.out:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"erasure-regret: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
