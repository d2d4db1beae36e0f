"""Command-line harness: per-stage subcommands plus the full pipeline.

Exit codes: 0 success, 1 config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import analysis, attacker, data, experiment, models, serialize, victim


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _config_for(args) -> experiment.ExperimentConfig:
    raw = _load_config(args.config)
    if args.seed is not None:
        raw.setdefault("evaluation", {})["seeds"] = [args.seed]
    return experiment.parse_config(raw)


def _emit_or_print(doc: dict, args) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2, default=str) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    cfg = _config_for(args)
    seed = cfg.seeds[0]
    source, target, _ = experiment._build_datasets(cfg, seed)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    data.save_vector_csv(os.path.join(out_dir, "source.csv"), source)
    data.save_vector_csv(os.path.join(out_dir, "target.csv"), target)
    print(f"wrote source.csv ({len(source)}) and target.csv ({len(target)}) "
          f"to {out_dir}")
    return 0


def _train_victims(cfg, seed):
    source, target, _ = experiment._build_datasets(cfg, seed)
    trained = []
    for k, vc in enumerate(cfg.victims):
        train_ds = experiment._source_slice(source, vc.source_range, seed + 2)
        tcfg = models.TrainConfig(
            learning_rate=vc.train.learning_rate, batch_size=vc.train.batch_size,
            epochs=vc.train.epochs, seed=1000 * (k + 1) + seed, label_mode="hard")
        trained.append(models.train_model(vc.kind, source.dim, source.num_classes,
                                          train_ds.X, train_ds.y, tcfg,
                                          hidden_dim=vc.hidden_dim))
    return source, target, trained


def cmd_train_victim(args) -> int:
    cfg = _config_for(args)
    seed = cfg.seeds[0]
    _, _, trained = _train_victims(cfg, seed)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    for k, model in enumerate(trained):
        serialize.save_model(model, os.path.join(out_dir, f"victim_{k}.model"))
    print(f"wrote {len(trained)} victim model(s) to {out_dir}")
    return 0


def cmd_attack(args) -> int:
    cfg = _config_for(args)
    seed = cfg.seeds[0]
    source, target, trained = _train_victims(cfg, seed)
    if args.models_dir:
        trained = [serialize.load_model(os.path.join(args.models_dir,
                                                     f"victim_{k}.model"))
                   for k in range(len(cfg.victims))]
    endpoints = [victim.VictimEndpoint(m, vc.defense, vc.price_per_query,
                                       seed=2000 * (k + 1) + seed)
                 for k, (m, vc) in enumerate(zip(trained, cfg.victims))]
    f = cfg.target_eval_fraction
    harvest_part, _, _ = data.split(target, (1.0 - f, 0.0, f), seed + 1)
    harvested = attacker.harvest(endpoints, harvest_part.X)
    strategy = (cfg.attacker.strategy if len(endpoints) >= 2 else "single:0")
    imitation = attacker.assemble(harvested, strategy, cfg.attacker.label_mode)
    tcfg = models.TrainConfig(
        learning_rate=cfg.attacker.train.learning_rate,
        batch_size=cfg.attacker.train.batch_size,
        epochs=cfg.attacker.train.epochs, seed=9000 + seed,
        label_mode=cfg.attacker.label_mode)
    model = attacker.imitate(imitation, cfg.attacker.kind, tcfg,
                             hidden_dim=cfg.attacker.hidden_dim)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    serialize.save_model(model, os.path.join(out_dir, "attacker.model"))
    attacker.export_imitation_csv(imitation,
                                  os.path.join(out_dir, "imitation.csv"))
    usage = {f"victim_{k}": {"query_count": e.usage().query_count,
                             "total_cost": str(e.usage().total_cost)}
             for k, e in enumerate(endpoints)}
    print(json.dumps({"strategy": strategy, "usage": usage}, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config_for(args)
    seed = cfg.seeds[0]
    model = serialize.load_model(args.model)
    _, target, _ = experiment._build_datasets(cfg, seed)
    f = cfg.target_eval_fraction
    _, _, test_part = data.split(target, (1.0 - f, 0.0, f), seed + 1)
    _emit_or_print({"model": args.model, "eval_split": "target_test",
                    "target_accuracy": models.accuracy(model, test_part)}, args)
    return 0


def cmd_bound(args) -> int:
    raw = _load_config(args.config)
    raw.setdefault("evaluation", {})["metrics"] = ["accuracy", "risks", "bound"]
    if args.seed is not None:
        raw["evaluation"]["seeds"] = [args.seed]
    cfg = experiment.parse_config(raw)
    report = experiment.run(cfg)
    if report["errors"] and not report["per_seed"]:
        print(json.dumps(report["errors"]), file=sys.stderr)
        return 2
    _emit_or_print(report, args)
    return 0


def cmd_cost(args) -> int:
    raw = _load_config(args.config)
    cfg = experiment.parse_config(raw)
    reports = {}
    for k, vc in enumerate(cfg.victims):
        reports[f"victim_{k}"] = analysis.cost_report(
            args.n_queries, vc.price_per_query,
            cfg.human_price_per_label).to_dict()
    _emit_or_print(reports, args)
    return 0


def cmd_run(args) -> int:
    cfg = _config_for(args)
    report = experiment.run(cfg)
    if report["errors"] and not report["per_seed"]:
        print(json.dumps(report["errors"]), file=sys.stderr)
        return 2
    out = args.out or ("report." + args.format)
    experiment.emit(report, args.format, out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imalab",
        description="Desk-scale imitation-attack laboratory")
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--seed", type=int, default=None,
                        help="replace the configured seed list with one seed")
    parser.add_argument("--out", default=None, help="output file or directory")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", help="generate datasets").set_defaults(func=cmd_gen)
    sub.add_parser("train-victim",
                   help="train and save victim models").set_defaults(
        func=cmd_train_victim)
    p_attack = sub.add_parser("attack", help="harvest labels and train attacker")
    p_attack.add_argument("--models-dir", default=None,
                          help="load victim models instead of retraining")
    p_attack.set_defaults(func=cmd_attack)
    p_eval = sub.add_parser("evaluate", help="accuracy of a saved model on "
                                             "the target test split")
    p_eval.add_argument("--model", required=True)
    p_eval.set_defaults(func=cmd_evaluate)
    sub.add_parser("bound", help="risk/bound report").set_defaults(func=cmd_bound)
    p_cost = sub.add_parser("cost", help="API vs human annotation cost")
    p_cost.add_argument("--n-queries", type=int, required=True)
    p_cost.set_defaults(func=cmd_cost)
    sub.add_parser("run", help="full pipeline").set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg_check = args.func
    except AttributeError:
        parser.error("no subcommand given")
    try:
        return cfg_check(args)
    except (experiment.ConfigError, json.JSONDecodeError, FileNotFoundError,
            KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
