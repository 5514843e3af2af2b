"""``tooldesign`` command line: design, eval, sweep, benchmark, study,
simulate and export-mesh.

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config, resolve_out
from .design import design_tool, rollout_tool
from .errors import ConfigError, ToolDesignError
from .evaluation import VARIANTS, comparative_study, evaluate_robustness
from .geometry import ToolParams, build_shape, export_mesh, load_tool, save_tool, turning_angle
from .objective import free_energy
from .optimizers import OPTIMIZERS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path: Path, data) -> None:
    _write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _mass_tag(m: float) -> str:
    return f"m{float(m):g}"


def _read_tool(path) -> ToolParams:
    try:
        return load_tool(path)
    except OSError as exc:
        raise ConfigError(f"cannot read tool file {path}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid tool file {path}: {exc}") from exc


def _with_px(cfg: RunConfig, px) -> RunConfig:
    if px is None:
        return cfg
    return replace(cfg, objective=replace(cfg.objective, p_x=float(px)))


def _design_into(cfg: RunConfig, out: Path):
    """Design one tool with ``cfg`` and persist its artifacts under ``out``."""
    run = design_tool(cfg.plan, cfg.world, cfg.objective, cfg.optimizer, cfg.geometry, cfg.method)
    tool = cfg.geometry.params(run.best_x)
    shape = build_shape(tool, cfg.geometry.density, cfg.geometry.spacing)
    rollout = rollout_tool(tool, cfg.plan, cfg.world, cfg.geometry)
    report = free_energy(rollout, cfg.objective, per_step=True)
    _write(out / "config.json", replace(cfg, out=str(out)).to_json())
    _write(out / "history.jsonl", run.history_jsonl())
    save_tool(tool, out / "best_tool.json")
    _write(out / "best_tool.obj", export_mesh(shape, cfg.geometry.thickness, cfg.geometry.height))
    _write(out / "rollout.csv", rollout.to_csv())
    _write(out / "fitness_decomposition.csv", report.decomposition_csv())
    _write_json(out / "summary.json", {
        "method": run.method,
        "best_fitness": run.best_fitness,
        "best_coeffs": [float(c) for c in run.best_x],
        "evals": run.evals,
        "turning_angle": turning_angle(shape),
        "goal_error_total": report.goal_error_total,
        "confidence_total": report.confidence_total,
    })
    return run, tool, rollout


def cmd_design(args, cfg: RunConfig, out: Path) -> int:
    cfg = _with_px(cfg, args.px)
    if args.method:
        cfg = replace(cfg, method=args.method)
    run, _, _ = _design_into(cfg, out)
    print(f"best fitness {run.best_fitness!r} after {run.evals} evaluations -> {out}")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig, out: Path) -> int:
    tool = _read_tool(args.tool)
    spec = cfg.perturbation
    if args.masses is not None:
        spec = replace(spec, perturbed_masses=tuple(args.masses))
    report = evaluate_robustness(tool, cfg.plan, cfg.world, spec, cfg.geometry)
    _write(out / "config.json", replace(cfg, perturbation=spec, out=str(out)).to_json())
    _write_json(out / "report.json", {"tool": tool.to_dict(), **report.to_dict()})
    for mass, rollout in report.rollouts.items():
        _write(out / f"rollout_{_mass_tag(mass)}.csv", rollout.to_csv())
    print(f"robustness {report.robustness!r} accuracy {report.accuracy!r} "
          f"control_deviation {report.control_deviation!r} -> {out}")
    return EXIT_OK


SWEEP_HEADER = ["p_x", "repeat", "seed", "c1", "c2", "c3", "best_fitness", "turning_angle",
                "goal_error", "robustness", "accuracy", "control_deviation"]


def cmd_sweep(args, cfg: RunConfig, out: Path) -> int:
    rows = []
    for px in args.px:
        for r in range(args.repeats):
            cell_cfg = _with_px(cfg.with_seed(cfg.seed + r), px)
            cell = out / f"px{float(px):g}_r{r}"
            run, tool, rollout = _design_into(cell_cfg, cell)
            rep = evaluate_robustness(tool, cell_cfg.plan, cell_cfg.world,
                                      cell_cfg.perturbation, cell_cfg.geometry)
            _write_json(cell / "report.json", rep.to_dict())
            goal_err = float(np.linalg.norm(rollout.X - np.asarray(cell_cfg.world.goal), axis=1).sum())
            rows.append([float(px), r, cell_cfg.seed, *[float(c) for c in run.best_x],
                         float(run.best_fitness), turning_angle(build_shape(tool)), goal_err,
                         rep.robustness, rep.accuracy, rep.control_deviation])
    _write(out / "config.json", replace(cfg, out=str(out)).to_json())
    _write(out / "sweep.csv", _csv_text(SWEEP_HEADER, rows))
    print(f"{len(rows)} designs -> {out / 'sweep.csv'}")
    return EXIT_OK


def benchmark_curves(cfg: RunConfig, optimizers, trials: int) -> dict:
    """Best-so-far fitness per iteration for every optimizer and trial."""
    runs = {}
    for name in optimizers:
        runs[name] = [design_tool(cfg.plan, cfg.world, cfg.objective,
                                  replace(cfg.optimizer, seed=cfg.seed + k), cfg.geometry, name)
                      for k in range(trials)]
    return runs


def cmd_benchmark(args, cfg: RunConfig, out: Path) -> int:
    cfg = _with_px(cfg, args.px)
    runs = benchmark_curves(cfg, args.optimizers, args.trials)
    rows = []
    for name, trial_runs in runs.items():
        curves = np.array([r.best_curve for r in trial_runs])
        evals = trial_runs[0].history
        for i in range(curves.shape[1]):
            rows.append([name, i, evals[i].evals, float(curves[:, i].mean()),
                         float(curves[:, i].std()), len(trial_runs)])
        for k, r in enumerate(trial_runs):
            _write(out / name / f"trial{k}.jsonl", r.history_jsonl())
    _write(out / "config.json", replace(cfg, out=str(out)).to_json())
    _write(out / "benchmark.csv", _csv_text(
        ["optimizer", "iter", "evals", "mean_best_fitness", "std_best_fitness", "trials"], rows))
    print(f"{len(runs)} optimizers x {args.trials} trials -> {out / 'benchmark.csv'}")
    return EXIT_OK


def cmd_study(args, cfg: RunConfig, out: Path) -> int:
    variants = VARIANTS if args.px is None else {f"px={float(p):g}": float(p) for p in args.px}
    goals = cfg.study.resolved_goals()
    result = comparative_study(goals, variants, args.repeats, cfg.plan, cfg.world,
                               cfg.optimizer, cfg.objective, cfg.perturbation,
                               cfg.geometry, cfg.method)
    _write(out / "config.json", replace(cfg, out=str(out)).to_json())
    _write_json(out / "results.json", {"goals": [list(g) for g in goals], **result})
    keys = ["variant", "p_x", "n", "robustness", "accuracy", "control_deviation"]
    _write(out / "table.csv", _csv_text(keys, [[row[k] for k in keys] for row in result["table"]]))
    print(f"{len(result['cells'])} cells -> {out / 'table.csv'}")
    return EXIT_OK


def cmd_simulate(args, cfg: RunConfig, out: Path) -> int:
    tool = _read_tool(args.tool) if args.tool else cfg.geometry.params((0.0, 0.0, 0.0))
    cfg = _with_px(cfg, args.px)
    rollout = rollout_tool(tool, cfg.plan, cfg.world, cfg.geometry)
    report = free_energy(rollout, cfg.objective, per_step=True)
    _write(out / "rollout.csv", rollout.to_csv())
    _write(out / "fitness_decomposition.csv", report.decomposition_csv())
    print(f"{len(rollout)} samples, free energy {report.free_energy!r} -> {out}")
    return EXIT_OK


def cmd_export_mesh(args, cfg: RunConfig, out: Path) -> int:
    tool = _read_tool(args.tool)
    shape = build_shape(tool, cfg.geometry.density, cfg.geometry.spacing)
    path = out / (Path(args.tool).stem + ".obj")
    _write(path, export_mesh(shape, cfg.geometry.thickness, cfg.geometry.height))
    print(f"mesh -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config JSON (defaults if omitted)")
    common.add_argument("--out", help="output directory (overrides $TOOLDESIGN_OUT and config)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")

    parser = argparse.ArgumentParser(prog="tooldesign", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", parents=[common], help="optimize one tool")
    p.add_argument("--px", type=float, help="goal-error weight")
    p.add_argument("--method", choices=sorted(OPTIMIZERS), help="optimizer")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("eval", parents=[common], help="mass-perturbation robustness of a tool")
    p.add_argument("--tool", required=True, help="tool JSON")
    p.add_argument("--masses", type=float, nargs="*", help="perturbed box masses (kg)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="design + eval over a p_x grid")
    p.add_argument("--px", type=float, nargs="+", default=[0.0, 20.0, 50.0])
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("benchmark", parents=[common], help="optimizers at equal budget")
    p.add_argument("--optimizers", nargs="+", choices=sorted(OPTIMIZERS),
                   default=["cmaes", "pso", "rs", "bo"])
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--px", type=float, default=20.0)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("study", parents=[common], help="goals x variants comparative study")
    p.add_argument("--px", type=float, nargs="+", help="variant weights (default 0, 20, 50)")
    p.add_argument("--repeats", type=int, default=1, help="design seeds per cell")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("simulate", parents=[common], help="one rollout to CSV")
    p.add_argument("--tool", help="tool JSON (default: straight tool)")
    p.add_argument("--px", type=float, help="goal-error weight for the decomposition")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export-mesh", parents=[common], help="tool JSON to OBJ")
    p.add_argument("--tool", required=True, help="tool JSON")
    p.set_defaults(func=cmd_export_mesh)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        for name in ("repeats", "trials"):
            if getattr(args, name, 1) < 1:
                raise ConfigError(f"--{name} must be >= 1")
        return args.func(args, cfg, resolve_out(cfg, args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ToolDesignError, ValueError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
