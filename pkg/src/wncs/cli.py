"""Command line entry point: ``wncs <solve|evaluate|stability|simulate|fig2|fig3|config>``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

from . import kernels
from .config import ExperimentConfig, load_config, reference_defaults, _int_list
from .errors import ConfigError, ConvergenceError, DivergenceError, PreconditionError, WncsError
from .oracle import analytic_fixed_cost
from .sim import estimate_cost
from .smdp import Policy, evaluate_policy, solve_rvi, transform
from .stability import stability_report, variable_length_stable

log = logging.getLogger("wncs")

EXIT_CODES = {"config": 2, "convergence": 3, "divergence": 4}


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}" if math.isfinite(x) else str(x)
    return str(x)


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(text)
    return p


def _verdict(cfg: ExperimentConfig):
    try:
        return variable_length_stable(cfg.system_model(), cfg.channel_model(), cfg.solver.M)
    except PreconditionError:
        return None


def _stability_note(cfg: ExperimentConfig) -> str:
    v = _verdict(cfg)
    if v is None:
        return "stability verdict unavailable: controllability/observability hypotheses fail"
    scope = "over all lengths" if v.exact else f"over lengths 1..{cfg.channel_model().max_length}"
    if v.stable:
        return f"min_l g(l)rho^2l = {v.min_product:.6g} at l={v.argmin}: stabilizable {scope}"
    return (f"min_l g(l)rho^2l = {v.min_product:.6g} >= 1 {scope}: no stationary policy "
            f"stabilizes the plant, the average cost is unbounded")


def cmd_solve(cfg: ExperimentConfig, out: Path | None = None, N: int | None = None):
    spec = cfg.smdp_spec(N=N)
    v = _verdict(cfg)
    if v is not None and not v.stable:
        # every truncation has a finite gain, but it grows without bound in N
        raise ConvergenceError("average cost is unbounded, no truncation converges",
                               diagnostic=_stability_note(cfg))
    try:
        res = solve_rvi(transform(spec, cfg.solver.tau), cfg.solver.epsilon, cfg.solver.max_iters)
    except ConvergenceError as exc:
        exc.diagnostic = _stability_note(cfg)
        raise
    summary = {
        "gain": res.gain,
        "iterations": res.iterations,
        "span": res.span,
        "N": spec.N,
        "M": spec.M,
        "epsilon": cfg.solver.epsilon,
        "backend": res.backend,
        "stability": _stability_note(cfg),
    }
    if out is not None:
        _write(out, "policy.csv", res.policy.to_csv())
        _write(out, "solve.json", json.dumps(summary, indent=2) + "\n")
    return res, summary


def cmd_evaluate(cfg: ExperimentConfig, policy: Policy, out: Path | None = None, N: int | None = None):
    spec = cfg.smdp_spec(N=N or policy.N)
    if policy.N != spec.N:
        policy = Policy(tuple(policy.action(d) for d in range(1, spec.N + 1)))
    J = evaluate_policy(spec, policy)
    summary = {"N": spec.N, "stationary_J": J}
    if len(set(policy.lengths)) == 1:
        l0 = policy.lengths[0]
        try:
            fc = analytic_fixed_cost(spec.system, spec.channel, l0)
            summary.update(analytic_J=fc.J, oracle_method=fc.method)
        except DivergenceError as exc:
            summary.update(analytic_J="divergent", note=str(exc))
    if out is not None:
        _write(out, "evaluate.json", json.dumps(summary, indent=2) + "\n")
    return summary


def cmd_stability(cfg: ExperimentConfig, out: Path | None = None):
    rep = stability_report(cfg.system_model(), cfg.channel_model(), cfg.solver.M)
    if out is not None:
        _write(out, "stability.csv", rep.to_csv())
    return rep


def cmd_simulate(cfg: ExperimentConfig, policy: Policy | int, out: Path | None = None):
    rep = estimate_cost(cfg.sim_config(policy))
    if out is not None:
        _write(out, "sim_seeds.csv", rep.to_csv())
        _write(out, "sim_summary.json", rep.summary_json() + "\n")
        _write(out, "aoi_hist.csv", rep.aoi_csv())
    return rep


def cmd_fig2(cfg: ExperimentConfig, out: Path | None = None, N_values=None, all_rows: bool = False):
    """Optimal policy per truncation; rows ``d = 1..min(N)`` (``all_rows``: up to max N)."""
    N_values = list(N_values or cfg.solver.N_values)
    cols = {}
    for N in N_values:
        res, _ = cmd_solve(cfg, None, N=N)
        cols[N] = res.policy
    last = max(N_values) if all_rows else min(N_values)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d"] + [f"N={N}" for N in N_values])
    for d in range(1, last + 1):
        w.writerow([d] + [cols[N].lengths[d - 1] if d <= N else "" for N in N_values])
    text = buf.getvalue()
    if out is not None:
        _write(out, "fig2.csv", text)
    return cols, text


def cmd_fig3(cfg: ExperimentConfig, out: Path | None = None, monte_carlo: bool = True):
    """Fixed-length costs for l = 1..M next to the optimal variable-length policy."""
    system, channel = cfg.system_model(), cfg.channel_model()
    spec_eval = cfg.smdp_spec(N=cfg.solver.eval_N)
    rows = []
    for l in range(1, cfg.solver.M + 1):
        row = {"policy": "fixed", "l": l}
        stable = channel.error_prob(l) * system.rho ** (2 * l) < 1.0
        if stable:
            try:
                row["analytic_J"] = analytic_fixed_cost(system, channel, l).J
            except DivergenceError:
                row["analytic_J"] = math.inf
            row["stationary_J"] = evaluate_policy(spec_eval, Policy.fixed(spec_eval.N, l))
        else:
            row["analytic_J"] = row["stationary_J"] = math.inf
        if monte_carlo:
            rep = estimate_cost(cfg.sim_config(l))
            row["mc_J"], row["mc_stderr"] = rep.pooled_mean, rep.stderr
            mc_div = rep.diverged
        else:
            mc_div = False
        row["status"] = "stable" if stable and not mc_div else "divergent"
        rows.append(row)

    res, _ = cmd_solve(cfg, None)
    var = {"policy": "variable", "l": "", "analytic_J": "", "stationary_J": res.gain, "status": "stable"}
    if monte_carlo:
        rep = estimate_cost(cfg.sim_config(res.policy))
        var["mc_J"], var["mc_stderr"] = rep.pooled_mean, rep.stderr
    rows.append(var)

    stable_rows = [r for r in rows[:-1] if r["status"] == "stable"]
    summary = {"variable_J": res.gain}
    if stable_rows:
        # the closed form is exact where it exists; the truncated chain is the fallback
        ref = "analytic_J" if all(math.isfinite(r["analytic_J"]) for r in stable_rows) else "stationary_J"
        best = min(stable_rows, key=lambda r: r[ref])
        summary.update(best_fixed_l=best["l"], best_fixed_J=best[ref],
                       saving=1.0 - res.gain / best[ref])
        if monte_carlo:
            best_mc = min(stable_rows, key=lambda r: r["mc_J"])
            summary.update(best_fixed_l_mc=best_mc["l"], saving_mc=1.0 - var["mc_J"] / best_mc["mc_J"])

    buf = io.StringIO()
    fields = ["policy", "l", "analytic_J", "stationary_J", "mc_J", "mc_stderr", "status"]
    w = csv.DictWriter(buf, fields, lineterminator="\n", restval="")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    text = buf.getvalue()
    if out is not None:
        _write(out, "fig3.csv", text)
        _write(out, "fig3_summary.json", json.dumps(summary, indent=2, default=_fmt) + "\n")
    return rows, summary, text


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML config (defaults to the scalar A=1.2 setup)")
    common.add_argument("-o", "--out", help="output directory (overrides config 'output')")
    common.add_argument("--seeds", help="seed list override: 'a-b' or comma separated")
    common.add_argument("--N", type=int, help="state truncation override")
    common.add_argument("--M", type=int, help="action truncation override")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="wncs", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="optimal variable-length policy by RVI")
    ev = sub.add_parser("evaluate", parents=[common], help="average cost of a policy")
    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo closed-loop cost")
    for sp in (ev, sim):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--policy", help="policy CSV (d,l)")
        g.add_argument("--fixed", type=int, help="fixed packet length")
    sub.add_parser("stability", parents=[common], help="stability table per packet length")
    f2 = sub.add_parser("fig2", parents=[common], help="optimal policy for several truncations")
    f2.add_argument("--N-values", help="comma separated truncations, e.g. 30,50,70")
    f2.add_argument("--all-rows", action="store_true", help="list states up to the largest N")
    f3 = sub.add_parser("fig3", parents=[common], help="fixed vs variable-length costs")
    f3.add_argument("--no-mc", action="store_true", help="skip the Monte Carlo columns")
    sub.add_parser("config", parents=[common], help="print the effective config as YAML")
    return p


def _effective_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else reference_defaults()
    if args.seeds:
        text = args.seeds
        cfg.sim.seeds = [int(s) for s in text.split(",")] if "," in text else _int_list(text, "--seeds")
    if args.N is not None:
        cfg.solver.N = args.N
    if args.M is not None:
        cfg.solver.M = args.M
    if not cfg.solver.N >= cfg.solver.M >= 1:
        raise ConfigError("solver.N", f"need N >= M >= 1, got N={cfg.solver.N}, M={cfg.solver.M}")
    if args.out:
        cfg.output = args.out
    return cfg


def _policy_arg(args, cfg):
    if getattr(args, "fixed", None) is not None:
        return args.fixed
    if getattr(args, "policy", None):
        return Policy.from_csv(args.policy)
    return None


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _effective_config(args)
        out = Path(cfg.output)
        log.info("backend: %s", kernels.BACKEND)
        if args.command == "config":
            sys.stdout.write(cfg.dump())
        elif args.command == "solve":
            res, summary = cmd_solve(cfg, out)
            print(f"gain={_fmt(res.gain)} iterations={res.iterations} N={summary['N']} M={summary['M']}")
            print(f"wrote {out / 'policy.csv'}")
        elif args.command == "evaluate":
            pol = _policy_arg(args, cfg)
            if pol is None:
                pol = cmd_solve(cfg, None)[0].policy
            elif isinstance(pol, int):
                pol = Policy.fixed(cfg.solver.N, pol)
            print(json.dumps(cmd_evaluate(cfg, pol, out, N=args.N), default=_fmt))
        elif args.command == "stability":
            rep = cmd_stability(cfg, out)
            sys.stdout.write(rep.to_csv())
            print(rep.verdict_line())
        elif args.command == "simulate":
            pol = _policy_arg(args, cfg)
            if pol is None:
                pol = cmd_solve(cfg, None)[0].policy
            rep = cmd_simulate(cfg, pol, out)
            print(rep.summary_json())
        elif args.command == "fig2":
            nv = [int(v) for v in args.N_values.split(",")] if args.N_values else None
            _, text = cmd_fig2(cfg, out, nv, args.all_rows)
            sys.stdout.write(text)
        elif args.command == "fig3":
            _, summary, text = cmd_fig3(cfg, out, monte_carlo=not args.no_mc)
            sys.stdout.write(text)
            if "saving" in summary:
                line = f"saving vs best fixed (l={summary['best_fixed_l']}): {summary['saving']:.4f}"
                if "saving_mc" in summary:
                    line += f"; Monte Carlo: {summary['saving_mc']:.4f}"
                print(line)
        return 0
    except WncsError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 5)


if __name__ == "__main__":
    sys.exit(main())
