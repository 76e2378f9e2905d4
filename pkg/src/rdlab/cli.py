"""Command-line front end.

    rdlab SUBCOMMAND --config run.cfg [--out DIR] [--seed N] [--jobs N] [--emit-plots]

Exit status: 0 when every verdict passes, 1 on any fail verdict, 2 on an
execution error (bad config, unordered data, blow-up).
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import eigsh

from . import plotting
from .config import EXPERIMENTS, RunConfig, parse_config
from .errors import ConfigError, RdlabError
from .grid import field_norm, principal_eigenvalue
from .harness import (
    STUDY_CSV_HEADER, check_linf_domination, check_max_principle, regularization_convergence_study,
    run_comparison, run_shifted_comparison,
)
from .reaction import (
    SamplePlan, check_cooperative, check_dissipation, check_growth, check_one_sided_lipschitz,
    check_positivity_compat, dominates,
)
from .regularize import check_aux_bounds, constants_stable, regularize_pipeline, sup_deviation
from .reports import (
    COMPARISON_CSV_HEADER, CONDITION_CSV_HEADER, NONUNIQUENESS_NOTE, fmt,
)
from .solver import check_energy_inequality, integrate


@dataclass
class Context:
    cfg: RunConfig
    out: Path
    seed: int
    jobs: int
    plots: bool
    lines: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)

    def say(self, line: str):
        self.lines.append(line)
        print(line)

    def verdict(self, ok: bool, line: str):
        self.verdicts.append(bool(ok))
        self.say(line)

    def write_csv(self, name: str, header, rows):
        path = self.out / name
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        return path


def _plan(ctx: Context, times=(0.0,)) -> SamplePlan:
    R0 = float(ctx.cfg.get("experiment", "R0", 2.0))
    return SamplePlan(seed=ctx.seed, R0=R0, times=tuple(times))


def cmd_simulate(ctx: Context):
    cfg = ctx.cfg
    grid, model, sc = cfg.grid(), cfg.model(), cfg.solve_config()
    traj = integrate(grid, model, cfg.initial(grid, model.d), sc)
    ctx.write_csv("trajectory.csv", traj.trajectory_header(), traj.trajectory_rows())
    ctx.write_csv("energy.csv", traj.energy_header(), traj.energy_rows())
    ctx.say(f"simulate {model.name} on {grid.summary()}, dt={fmt(traj.dt)}, "
            f"{len(traj.times)} frames, min value={fmt(traj.min_value)}")
    ctx.say(f"# {NONUNIQUENESS_NOTE}")
    forced_ok = not traj.has_forcing or grid.bc == "dirichlet"
    if model.alpha is not None and model.C2 is not None and forced_ok:
        rep = check_energy_inequality(traj, model.alpha, min(model.diffusion), model.C2)
        ctx.verdict(rep.ok, rep.to_line())
    if ctx.plots:
        plotting.emit(ctx.out, "energy", "energy.csv", traj.times, {"l2_sq": traj.l2_sq},
                      [(2, "l2_sq")], "t", "||u||^2", f"energy, {model.name}")


def _pair_data(ctx: Context):
    cfg = ctx.cfg
    grid, sys1, sys2 = cfg.grid(), cfg.model("model"), cfg.model("model2")
    u01 = cfg.initial(grid, sys1.d)
    u02 = cfg.initial(grid, sys2.d, second=True)
    return grid, sys1, sys2, u01, u02, cfg.solve_config()


def _comparison_outputs(ctx: Context, rep):
    ctx.write_csv("comparison.csv", COMPARISON_CSV_HEADER, rep.csv_rows())
    for line in rep.header().splitlines():
        ctx.say(line)
    if ctx.plots:
        plotting.emit(ctx.out, "comparison", "comparison.csv", rep.times,
                      {"positive part": rep.positive_part, "envelope": rep.envelope},
                      [(2, "positive part"), (3, "envelope")], "t", "L2 norm",
                      f"{rep.pair[0]} vs {rep.pair[1]}")


def cmd_compare(ctx: Context):
    grid, sys1, sys2, u01, u02, sc = _pair_data(ctx)
    rep = run_comparison(sys1, sys2, u01, u02, grid, sc, plan=_plan(ctx, (sc.tau, sc.T)))
    _comparison_outputs(ctx, rep)
    ctx.verdict(rep.ok, rep.to_line())
    ctx.say(f"positivity: min value={fmt(rep.min_value)}; dt*={fmt(rep.extra['dt_star'])}")


def cmd_compare_shifted(ctx: Context):
    grid, sys1, sys2, u01, u02, sc = _pair_data(ctx)
    beta = float(ctx.cfg.require("experiment", "beta"))
    rep = run_shifted_comparison(sys1, sys2, beta, u01, u02, grid, sc, plan=_plan(ctx, (sc.tau, sc.T)))
    _comparison_outputs(ctx, rep)
    ctx.verdict(rep.ok, rep.to_line())
    ctx.verdict(rep.extra["agrees"],
                f"direct run verdict={rep.extra['direct_verdict']} agrees={rep.extra['agrees']} "
                f"back-map relative difference={fmt(rep.extra['back_map_rel_diff'])}")


def cmd_check_conditions(ctx: Context):
    cfg = ctx.cfg
    sys1 = cfg.model()
    plan = _plan(ctx)
    x = cfg.grid().nodes if cfg.has("grid") else None
    R0 = float(cfg.get("experiment", "R0", 2.0))
    eps = float(cfg.get("experiment", "epsilon", 0.0))
    reports = [
        check_growth(sys1, plan), check_dissipation(sys1, plan), check_one_sided_lipschitz(sys1, plan),
        check_cooperative(sys1, R0, eps, plan), check_positivity_compat(sys1, plan, x),
    ]
    if cfg.has("model2"):
        reports.append(dominates(sys1, cfg.model("model2"), plan, x))
    rows = [row for rep in reports for row in rep.csv_rows()]
    ctx.write_csv("conditions.csv", CONDITION_CSV_HEADER, rows)
    for rep in reports:
        ctx.verdict(rep.ok, rep.to_line())


def cmd_regularize(ctx: Context):
    cfg = ctx.cfg
    sys1 = cfg.model()
    ks = [float(k) for k in np.atleast_1d(cfg.get("experiment", "ks", [5, 10, 20]))]
    A = float(cfg.get("experiment", "A", 3.0))
    n = float(cfg.get("experiment", "n", A))
    plan = _plan(ctx)

    def one(k):
        pipe = regularize_pipeline(sys1, k)
        dev = sup_deviation(sys1, pipe.system, A)
        delta = sup_deviation(pipe.system, pipe.truncated, n + 2.0)
        return pipe, dev, delta, check_aux_bounds(sys1, pipe.system, plan)

    if ctx.jobs > 1:
        with ThreadPoolExecutor(max_workers=ctx.jobs) as pool:
            results = list(pool.map(one, ks))
    else:
        results = [one(k) for k in ks]
    header = ["k", "epsilon_k", "delta_nk", "sup_deviation", "D1", "D2", "gamma", "D3"]
    rows = []
    for k, (pipe, dev, delta, aux) in zip(ks, results):
        c = aux.constants
        rows.append([fmt(k), fmt(pipe.epsilon), fmt(delta), fmt(dev), fmt(c["D1"]), fmt(c["D2"]),
                     fmt(c["gamma"]), fmt(c["D3"])])
        if k >= A:
            ctx.verdict(dev <= 1.0 / k + 1e-6,
                        f"k={fmt(k)}: sup deviation on |u|<={fmt(A)} = {fmt(dev)} (bound {fmt(1.0 / k + 1e-6)})")
        ctx.verdict(aux.ok, f"k={fmt(k)}: {aux.to_line()}")
    ctx.write_csv("regularize.csv", header, rows)
    devs = [r[1] for r in results]
    ctx.verdict(all(b <= a for a, b in zip(devs, devs[1:])), "sup deviation non-increasing in k")
    for key, (spread, ok) in constants_stable([r[3] for r in results]).items():
        ctx.verdict(ok, f"{key} relative spread across k = {fmt(spread)} (limit 0.05)")
    if cfg.has("grid") and cfg.has("time") and cfg.has("initial"):
        grid, sc = cfg.grid(), cfg.solve_config()
        table = regularization_convergence_study(sys1, ks, A, grid, sc, cfg.initial(grid, sys1.d),
                                                 jobs=ctx.jobs)
        ctx.write_csv("study.csv", STUDY_CSV_HEADER, (r.cells() for r in table.rows))
        ctx.verdict(table.ok, f"convergence study: deviation monotone={table.deviation_monotone} "
                              f"distance monotone={table.distance_monotone}")
    if ctx.plots:
        plotting.emit(ctx.out, "regularize", "regularize.csv", ks, {"sup deviation": devs},
                      [(4, "sup deviation")], "k", "sup |f^k - f|", f"regularization, {sys1.name}",
                      logy=True)


def _rates(model):
    params = model.meta.get("params")
    if params is None or not hasattr(params, "rates"):
        raise ConfigError(f"model {model.name} has no growth rates a_i (use lv or linear3)")
    if not params.autonomous:
        raise ConfigError("this experiment needs constant coefficients")
    return params.rates(0.0)


def cmd_maxprinciple(ctx: Context):
    cfg = ctx.cfg
    grid, model, sc = cfg.grid(), cfg.model(), cfg.solve_config()
    a = _rates(model)
    u0 = cfg.initial(grid, model.d)
    traj = integrate(grid, model, u0, sc)
    rep = check_max_principle(traj, a, u0)
    s = traj.times - traj.times[0]
    sup0 = u0.max(axis=1)
    rows = ([fmt(t), i, fmt(traj.frames[k, i].max()), fmt(np.exp(a[i] * s[k]) * sup0[i])]
            for k, t in enumerate(traj.times) for i in range(model.d))
    ctx.write_csv("maxprinciple.csv", ["t", "component", "max_value", "bound"], rows)
    ctx.verdict(rep.ok, rep.to_line())


def cmd_linf(ctx: Context):
    cfg = ctx.cfg
    grid, lv, lin, u0, _, sc = _pair_data(ctx)
    if cfg.get("model", "name") != "lv" or cfg.get("model2", "name") != "linear3":
        raise ConfigError("linf needs model.name = lv and model2.name = linear3")
    a = float(np.max(_rates(lv)))
    D = float(min(lv.diffusion))
    tr_lv, tr_lin = integrate(grid, lv, u0, sc), integrate(grid, lin, u0, sc)
    lam1 = principal_eigenvalue(grid)
    rep = check_linf_domination(tr_lv, tr_lin, lam1, a, D)
    c = rep.constants
    s = tr_lv.times - tr_lv.times[0]
    u0n = field_norm(grid, tr_lv.frames[0], "L2")
    t_min = 5.0 * tr_lv.dt
    env = [c["C_hat"] * si**-0.75 * np.exp(c["rate"] * si) * u0n if si >= t_min - 1e-12 else None for si in s]
    rows = ([fmt(t), fmt(x), fmt(y), fmt(e)]
            for t, x, y, e in zip(tr_lv.times, tr_lv.sup_norms(), tr_lin.sup_norms(), env))
    ctx.write_csv("linf.csv", ["t", "sup_lv", "sup_lin", "envelope"], rows)
    ctx.verdict(rep.ok, rep.to_line())
    if ctx.plots:
        plotting.emit(ctx.out, "linf", "linf.csv", tr_lv.times,
                      {"sup lv": tr_lv.sup_norms(), "sup linear": tr_lin.sup_norms()},
                      [(2, "sup_lv"), (3, "sup_lin"), (4, "envelope")], "t", "sup norm",
                      "L-infinity domination", logy=True)


def cmd_eig(ctx: Context):
    grid = ctx.cfg.grid()
    exact = principal_eigenvalue(grid)
    A = -grid.laplacian
    vals = eigsh(A.tocsc(), k=1, sigma=-1.0, which="LM", v0=np.ones(grid.n_nodes),
                 return_eigenvectors=False)
    discrete = float(np.real(vals[0]))
    ctx.write_csv("eig.csv", ["bc", "lambda1_exact", "lambda1_discrete"],
                  [[grid.bc, fmt(exact), fmt(discrete)]])
    ctx.say(f"principal eigenvalue on {grid.summary()}: exact={fmt(exact)} discrete={fmt(discrete)}")


HANDLERS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "compare-shifted": cmd_compare_shifted,
    "check-conditions": cmd_check_conditions,
    "regularize": cmd_regularize,
    "maxprinciple": cmd_maxprinciple,
    "linf": cmd_linf,
    "eig": cmd_eig,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (section.key = value lines)")
    common.add_argument("--out", default=None, help="output directory (default: output.dir or ./out)")
    common.add_argument("--seed", type=int, default=None, help="sampling seed for the certifiers")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for multi-k studies")
    common.add_argument("--emit-plots", action="store_true", help="write gnuplot scripts and SVG figures")
    parser = argparse.ArgumentParser(prog="rdlab", description="reaction-diffusion comparison lab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__name__.replace("cmd_", ""))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config).validate_for(args.command)
        out = Path(args.out) if args.out else cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        seed = cfg.seed if args.seed is None else args.seed
        ctx = Context(cfg, out, seed, max(1, args.jobs), args.emit_plots or cfg.emit_plots)
        HANDLERS[args.command](ctx)
        (out / "report.txt").write_text("\n".join(ctx.lines) + "\n")
    except (RdlabError, ValueError, ArithmeticError, OSError) as exc:
        print(f"rdlab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0 if all(ctx.verdicts) else 1


if __name__ == "__main__":
    sys.exit(main())
