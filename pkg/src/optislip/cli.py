"""Command-line entry point: ``optislip <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .control import make_controller
from .dataset import DatasetError, build_dataset, load_dataset, reference_split, save_dataset
from .experiments import (
    ScenarioError,
    check_bands,
    find_brake_torque,
    parse_scenario,
    run_closed_loop_suite,
    run_open_loop_suite,
    swept_torques,
    write_suite_csv,
)
from .friction import reference_surface
from .mlp import (
    ModelFormatError,
    TrainingError,
    TrainReport,
    evaluate_rmse,
    init_model,
    load_model,
    predict,
    save_model,
    train,
)
from .sensing import NoiseConfig
from .svgplot import line_chart
from .vehicle import run_maneuver

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_BANDS = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _slug(name: str) -> str:
    return name.replace("→", "-")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _torques(cfg: RunConfig, tags, out: Path) -> dict:
    """Swept open-loop torque per surface tag, cached in the output directory."""
    cache_path = out / "torques.json"
    cache = json.loads(cache_path.read_text()) if cache_path.exists() else {}
    settings = cfg.suite_settings()
    key = json.dumps([cfg.vehicle.__dict__, cfg.maneuver.v0, cfg.maneuver.dt], sort_keys=True)
    if cache.get("key") != key:
        cache = {"key": key, "torques": {}}
    torques = swept_torques(tags, settings, cache["torques"])
    cache_path.write_text(json.dumps(cache, indent=1, sort_keys=True) + "\n")
    return torques


def cmd_gen_data(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    d = cfg.dataset
    splits = build_dataset(cfg.cube(), d.n_diag, d.n_hyp, d.window, d.stride, cfg.noise(),
                           tuple(d.split_ratios), cfg.seed, d.n_points)
    path = out / "dataset.csv"
    save_dataset(splits, path)
    print(f"wrote {path} ({len(splits.curves)} curves)")
    for name in ("train", "validation", "test"):
        print(f"  {name:<10} {len(splits.split(name)):>7} samples")
    return EXIT_OK


def _dataset_path(cfg, args) -> Path:
    return Path(args.dataset) if args.dataset else Path(cfg.out) / "dataset.csv"


def _model_path(cfg, args) -> Path:
    return Path(args.model) if args.model else Path(cfg.out) / "model.json"


def cmd_train(cfg: RunConfig, args) -> int:
    splits = load_dataset(_dataset_path(cfg, args))
    out = _out_dir(cfg)
    if 2 * splits.window != cfg.model_dims()[0]:
        raise ModelFormatError(f"dataset window {splits.window} does not match configured window {cfg.dataset.window}")
    model = init_model(cfg.model_dims(), cfg.seed)
    start = time.perf_counter()

    def progress(epoch, mse, val):
        print(f"epoch {epoch:>3}  train mse {mse:.6f}  val rmse {val:.5f}  ({time.perf_counter() - start:.0f} s)", flush=True)

    if cfg.train.learning_rate == 0:
        # a zero step leaves every parameter at its initial value
        report = TrainReport(model, float(np.mean((predict(model, splits.train.features) - splits.train.labels) ** 2)))
    else:
        report = train(model, splits.train, splits.validation, cfg.train_config(), progress)
    save_model(report.model, out / "model.json")
    _write_rows(
        out / "train_metrics.csv", ("epoch", "train_mse", "val_rmse"),
        [(0, repr(report.initial_train_mse), "")]
        + [(i + 1, repr(m), repr(v)) for i, (m, v) in enumerate(zip(report.train_mse, report.val_rmse))],
    )
    print(f"best epoch {report.best_epoch}; model written to {out / 'model.json'}")
    if len(splits.test):
        print(f"held-out test rmse {evaluate_rmse(report.model, splits.test):.5f}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    model = load_model(_model_path(cfg, args))
    splits = load_dataset(_dataset_path(cfg, args))
    if model.dims[0] != 2 * splits.window:
        raise ModelFormatError(f"model expects {model.dims[0]} features, dataset has {2 * splits.window}")
    ref = reference_split(splits.window, 1, NoiseConfig(cfg.dataset.noise_sigma, cfg.seed), cfg.dataset.n_points)
    rows = []
    for name, data in (("train", splits.train), ("validation", splits.validation), ("test", splits.test), ("reference", ref)):
        rmse = evaluate_rmse(model, data) if len(data) else float("nan")
        rows.append((name, repr(rmse)))
        print(f"{name:<10} rmse {rmse:.5f}")
    _write_rows(_out_dir(cfg) / "eval.csv", ("split", "rmse"), rows)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    scenario = parse_scenario(args.scenario, cfg.maneuver.v0)
    out = _out_dir(cfg)
    settings = cfg.suite_settings()
    controller = make_controller(args.controller, settings.smc, settings.pi)
    tb = args.torque
    if tb is None:
        tb = _torques(cfg, scenario.tags[:1], out)[scenario.tags[0]]
        if controller is not None:
            tb *= settings.closed_loop_factor
    model = None
    if args.estimator == "mlp" or (args.estimator is None and Path(_model_path(cfg, args)).exists()):
        model = load_model(_model_path(cfg, args))
    estimator = None
    observers = {"RLS": settings.rls()}
    if args.estimator == "rls":
        estimator, observers = settings.rls(), {}
    elif model is not None:
        estimator = settings.mlp(model)
    log = run_maneuver(settings.config(scenario, tb), controller=controller, estimator=estimator, observers=observers)
    stem = f"sim_{_slug(scenario.name)}_{args.controller}"
    log.to_csv(out / f"{stem}.csv")
    series = {"λ* ground truth": (log.t, log.lambda_gt), "slip λ": (log.t, log.lam)}
    if estimator is not None:
        series[f"λ* {estimator.name}"] = (log.t, log.lambda_est)
    for name, values in log.observers.items():
        series[f"λ* {name}"] = (log.t, values)
    line_chart(series, out / f"{stem}.svg", title=f"{scenario.name}, controller {args.controller}",
               xlabel="time [s]", ylabel="slip")
    print(f"{scenario.name}: Tb {tb:.1f} N m, distance {log.stop_distance:.2f} m, time {log.stop_time:.2f} s")
    print(f"wrote {out / (stem + '.csv')} and {out / (stem + '.svg')}")
    return EXIT_OK


def cmd_suite(cfg: RunConfig, args) -> int:
    model = load_model(_model_path(cfg, args))
    out = _out_dir(cfg)
    names = args.scenarios.split(",") if args.scenarios else cfg.scenarios
    scenarios = [parse_scenario(n, cfg.maneuver.v0) for n in names]
    settings = cfg.suite_settings()
    torques = _torques(cfg, sorted({s.tags[0] for s in scenarios}), out)

    plot_dir = out / "plots" if args.plots else None
    if plot_dir is not None:
        plot_dir.mkdir(exist_ok=True)

    def on_log(key, log):
        if plot_dir is None:
            return
        scenario, est, ctl = key
        series = {"λ* ground truth": (log.t, log.lambda_gt)}
        if est in ("both", "MLP"):
            series["λ* MLP"] = (log.t, log.lambda_est)
        if est == "RLS":
            series["λ* RLS"] = (log.t, log.lambda_est)
        for name, values in log.observers.items():
            series[f"λ* {name}"] = (log.t, values)
        stem = f"{_slug(scenario)}_{est}_{ctl}"
        line_chart(series, plot_dir / f"{stem}.svg", title=f"{scenario} {est} {ctl}", xlabel="time [s]", ylabel="slip")

    open_res = closed_res = None
    if not args.closed_only:
        open_res = run_open_loop_suite(scenarios, model, torques, settings, on_log)
        write_suite_csv(open_res, out / "open_loop.csv")
    if not args.open_only:
        closed_res = run_closed_loop_suite(scenarios, model, torques, settings, on_log=on_log)
        write_suite_csv(closed_res, out / "closed_loop.csv")

    failed = [r for res in (open_res, closed_res) if res for r in res.rows if not r.ok]
    for r in failed:
        print(f"FAILED {r.scenario}/{r.estimator}/{r.controller}: {r.error}")
    checks = check_bands(open_res, closed_res, settings)
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    _write_rows(out / "bands.csv", ("check", "passed", "detail"), [(c.name, c.passed, c.detail) for c in checks])
    return EXIT_BANDS if failed or not all(c.passed for c in checks) else EXIT_OK


def cmd_sweep_torque(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    tags = list(args.surface.upper()) if args.surface else ["D", "W", "S"]
    for tag in tags:
        res = find_brake_torque(reference_surface(tag), cfg.vehicle_params(), v0=cfg.maneuver.v0,
                                dt=cfg.maneuver.dt, max_time=cfg.maneuver.max_time)
        _write_rows(out / f"sweep_{tag}.csv", ("torque_nm", "distance_m"),
                    [(repr(float(t)), "" if np.isnan(d) else repr(float(d))) for t, d in zip(res.torques, res.distances)])
        print(f"{tag}: best Tb {res.best_torque:.2f} N m, distance {res.best_distance:.2f} m")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "simulate": cmd_simulate,
    "suite": cmd_suite,
    "sweep-torque": cmd_sweep_torque,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="global random seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    parser = _Parser(prog="optislip", description="Optimal-slip estimation and braking experiments.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", parents=[common], help="generate the synthetic window dataset")
    p.add_argument("--n-diag", type=int)
    p.add_argument("--n-hyp", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--sigma", type=float, help="friction measurement noise")

    p = sub.add_parser("train", parents=[common], help="train the network on a dataset")
    p.add_argument("--dataset", help="dataset CSV (default OUT/dataset.csv)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)

    p = sub.add_parser("eval", parents=[common], help="RMSE on every split and on the reference roads")
    p.add_argument("--model")
    p.add_argument("--dataset")

    p = sub.add_parser("simulate", parents=[common], help="run one braking maneuver")
    p.add_argument("scenario", help="e.g. D, W→D→S or W-D-S")
    p.add_argument("--controller", choices=["none", "pi", "smc"], default="none")
    p.add_argument("--estimator", choices=["mlp", "rls"], help="set-point source (default MLP when a model exists)")
    p.add_argument("--model")
    p.add_argument("--torque", type=float, help="pilot brake request Tb in N m (default: swept)")

    p = sub.add_parser("suite", parents=[common], help="open- and closed-loop comparison tables")
    p.add_argument("--model")
    p.add_argument("--scenarios", help="comma-separated subset, e.g. D,W-D-S")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--open-only", action="store_true")
    group.add_argument("--closed-only", action="store_true")
    p.add_argument("--plots", action="store_true", help="write one SVG per maneuver")

    p = sub.add_parser("sweep-torque", parents=[common], help="open-loop brake torque sweep")
    p.add_argument("--surface", help="surface tags to sweep, e.g. D or DWS")
    return parser


def _overrides(args) -> dict:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    return {
        "seed": get("seed"),
        "out": get("out"),
        "dataset.n_diag": get("n_diag"),
        "dataset.n_hyp": get("n_hyp"),
        "dataset.window": get("window"),
        "dataset.stride": get("stride"),
        "dataset.noise_sigma": get("sigma"),
        "train.epochs": get("epochs"),
        "train.learning_rate": get("lr"),
        "train.batch_size": get("batch_size"),
    }


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(getattr(args, "config", None), _overrides(args))
        out = _out_dir(cfg)
        cfg.save(out / f"{args.command}.config.json")
        return COMMANDS[args.command](cfg, args)
    except (UsageError, ConfigError, ScenarioError) as exc:
        print(f"optislip: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DatasetError, ModelFormatError) as exc:
        print(f"optislip: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TrainingError, RuntimeError) as exc:
        print(f"optislip: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
