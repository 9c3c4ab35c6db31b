"""Command-line entry point for the experiment pipeline.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
from pathlib import Path

from .data import load_dataset, split_aux_honest
from .errors import ConfigError, GridleakError, StageError
from .forecast import (DEFAULT_SIZES, ForecastHyperparams, LSTM_BASE_NODES,
                       load_forecaster, random_search, size_sweep, sweep_csv)
from .pipeline import ExperimentConfig, Runner, load_config

log = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser, config_required: bool = True) -> None:
    parser.add_argument("--config", required=config_required,
                        help="experiment config (JSON)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default="out", help="output root directory")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridleak",
        description="Property-inference attack experiments on load forecasters")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    stage_commands = {
        "gen-data": ("data", "generate the synthetic dataset"),
        "ingest": ("data", "ingest CSV meter/label files"),
        "train-shadows": ("forecasters", "train per-household forecasters "
                                         "(shadow farm + honest targets)"),
        "signatures": ("signatures", "generate shadow model signatures"),
        "train-meta": ("meta", "train per-property meta-classifiers"),
        "train-baseline": ("baseline", "train raw-data baseline classifiers"),
        "attack": ("attack", "run the active stage against honest oracles"),
        "evaluate": ("report", "compute metrics and write the report"),
        "report": ("report", "compute (or reuse) the report and print it"),
        "run": ("report", "run the full pipeline end to end"),
    }
    for name, (_, help_text) in stage_commands.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "ingest":
            p.add_argument("--meters", required=True, help="meters.csv path")
            p.add_argument("--labels", required=True, help="labels.csv path")
        if name == "attack":
            p.add_argument("--remote", action="append", default=[],
                           metavar="METER=HOST:PORT",
                           help="attack a served oracle instead of the local model")

    p = sub.add_parser("tune", help="random-search forecaster hyperparameters")
    _add_common(p)
    p.add_argument("--budget", type=int, default=20, help="search trials")

    p = sub.add_parser("serve", help="serve a trained forecaster as an oracle")
    p.add_argument("--model", required=True, help="model base path (no extension)")
    p.add_argument("--endpoint", default="127.0.0.1:7029", help="host:port")
    p.add_argument("--stats-out", default=None, help="write query stats here on shutdown")

    p = sub.add_parser("sweep", help="model-size vs MAE sweep on one meter")
    _add_common(p)
    p.add_argument("--meter", type=int, default=None,
                   help="meter id (default: first honest meter)")

    return parser


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        raw = cfg.to_dict()
        raw["seed"] = args.seed
        if raw["data"]["source"] == "synthetic":
            raw["data"]["synth"]["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(raw)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except StageError as exc:
        log.error("%s", exc)
        return 3
    except GridleakError as exc:
        log.error("%s", exc)
        return 3


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "serve":
        return _cmd_serve(args)

    cfg = _resolve_config(args)
    if cmd == "ingest":
        raw = cfg.to_dict()
        raw["data"] = {"source": "csv", "meters": args.meters, "labels": args.labels}
        cfg = ExperimentConfig.from_dict(raw)
    if cmd == "gen-data" and cfg.data["source"] != "synthetic":
        raise ConfigError("gen-data needs a synthetic data source")

    runner = Runner(cfg, args.out, workers=args.workers)
    if cmd == "tune":
        return _cmd_tune(args, cfg, runner)
    if cmd == "sweep":
        return _cmd_sweep(args, cfg, runner)
    if cmd == "attack" and args.remote:
        runner.remote_oracles = _parse_remotes(args.remote)

    stage = {"gen-data": "data", "ingest": "data", "train-shadows": "forecasters",
             "signatures": "signatures", "train-meta": "meta",
             "train-baseline": "baseline", "attack": "attack",
             "evaluate": "report", "report": "report", "run": "report"}[cmd]
    manifest = runner.run_until(stage)
    print(f"run directory: {runner.run_dir}")
    if stage == "report":
        report_txt = Path(manifest["stages"]["report"]["path"]) / "report.txt"
        print(report_txt.read_text())
    return 0


def _parse_remotes(entries: list[str]) -> dict[int, tuple[str, int]]:
    remotes = {}
    for entry in entries:
        try:
            meter, endpoint = entry.split("=", 1)
            host, port = endpoint.rsplit(":", 1)
            remotes[int(meter)] = (host, int(port))
        except ValueError as exc:
            raise ConfigError(f"bad --remote value {entry!r} "
                              f"(expected METER=HOST:PORT)") from exc
    return remotes


def _cmd_tune(args, cfg: ExperimentConfig, runner: Runner) -> int:
    runner.run_until("data")
    ds = load_dataset(runner.stage_dir("data") / "dataset")
    aux, _ = split_aux_honest(ds, cfg.split["aux_fraction"])
    n_val = min(cfg.forecaster["val_meters"], len(aux))
    records = [rec for rec, _ in aux.households[:n_val]]
    base = ForecastHyperparams(**cfg.forecaster["hyperparams"])
    best = random_search(records, args.budget, cfg.seed, base=base)
    blob = json.dumps(best.to_kwargs(), indent=2, sort_keys=True)
    (runner.run_dir / "tune.json").write_text(blob)
    print(blob)
    return 0


def _cmd_sweep(args, cfg: ExperimentConfig, runner: Runner) -> int:
    runner.run_until("data")
    ds = load_dataset(runner.stage_dir("data") / "dataset")
    _, honest = split_aux_honest(ds, cfg.split["aux_fraction"])
    meter = args.meter if args.meter is not None else honest.meter_ids()[0]
    rec, _ = ds.get(meter)
    rec = rec.tail_days(cfg.forecaster["train_days"])
    hp = ForecastHyperparams(**cfg.forecaster["hyperparams"])
    sizes = list(DEFAULT_SIZES) + [LSTM_BASE_NODES]
    rows = size_sweep(rec, sizes, hp, seed=cfg.seed)
    out = runner.run_dir / "sweep" / f"sweep_{meter}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(sweep_csv(rows))
    print(sweep_csv(rows))
    print(f"sweep written to {out}")
    return 0


def _cmd_serve(args) -> int:
    from .blackbox import serve

    try:
        model = load_forecaster(args.model)
    except OSError as exc:
        log.error("cannot load model %s: %s", args.model, exc)
        return 2
    server = serve(model, args.endpoint)
    print(f"serving {args.model} on {server.host}:{server.port} "
          f"(w={model.window}); SIGTERM or Ctrl-C stops", flush=True)

    stop = {"flag": False}

    def _stop(signum, frame):
        stop["flag"] = True

    signal.signal(signal.SIGTERM, _stop)
    signal.signal(signal.SIGINT, _stop)
    try:
        while not stop["flag"]:
            signal.pause()
    finally:
        server.shutdown()
        snapshot = server.stats.snapshot()
        log.info("oracle stats: %s", snapshot)
        if args.stats_out:
            Path(args.stats_out).write_text(json.dumps(snapshot, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
