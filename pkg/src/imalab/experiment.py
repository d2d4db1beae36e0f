"""Config-driven experiment runner: train victims, attack, report.

A config fully determines the report: every stage derives its RNG seed
from the experiment seed, so repeating a run yields byte-identical output
files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from . import analysis, attacker, data, models, victim

ALL_METRICS = ("accuracy", "risks", "bound", "diversity", "cost")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class VictimConfig:
    kind: str
    hidden_dim: int
    train: models.TrainConfig
    defense: victim.DefensePolicy
    price_per_query: Decimal
    source_range: tuple[float, float]


@dataclass(frozen=True)
class AttackerConfig:
    kind: str
    hidden_dim: int
    train: models.TrainConfig
    label_mode: str
    strategy: str


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    data: dict
    victims: tuple[VictimConfig, ...]
    attacker: AttackerConfig
    seeds: tuple[int, ...]
    metrics: tuple[str, ...]
    in_domain: bool
    human_price_per_label: Decimal
    target_eval_fraction: float


def _train_config(block: dict | None, label_mode: str = "soft") -> models.TrainConfig:
    block = dict(block or {})
    block.setdefault("label_mode", label_mode)
    try:
        return models.TrainConfig(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad train config: {exc}") from exc


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate and normalize a raw config document."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    for key in ("data", "victims", "attacker", "evaluation"):
        if key not in raw:
            raise ConfigError(f"missing config section {key!r}")
    data_block = dict(raw["data"])
    if data_block.get("generator") not in ("gaussian", "tabular", "csv"):
        raise ConfigError("data.generator must be gaussian, tabular or csv")

    victims_raw = raw["victims"]
    if not victims_raw:
        raise ConfigError("need at least one victim")
    victims = []
    for i, block in enumerate(victims_raw):
        try:
            policy = victim.DefensePolicy(**(block.get("defense") or {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"victims[{i}].defense: {exc}") from exc
        rng = block.get("source_range", [0.0, 1.0])
        if not (0.0 <= rng[0] < rng[1] <= 1.0):
            raise ConfigError(f"victims[{i}].source_range must be an increasing "
                              "pair inside [0, 1]")
        victims.append(VictimConfig(
            kind=block.get("kind", "linear"),
            hidden_dim=int(block.get("hidden_dim", 16)),
            train=_train_config(block.get("train"), "hard"),
            defense=policy,
            price_per_query=Decimal(str(block.get("price_per_query", "0"))),
            source_range=(float(rng[0]), float(rng[1])),
        ))

    att = raw["attacker"]
    label_mode = att.get("label_mode", "soft")
    strategy = att.get("strategy", "concat")
    if strategy == "average" and label_mode == "hard":
        raise ConfigError("average ensembling requires soft labels")
    attacker_cfg = AttackerConfig(
        kind=att.get("kind", "linear"),
        hidden_dim=int(att.get("hidden_dim", 16)),
        train=_train_config(att.get("train"), label_mode),
        label_mode=label_mode,
        strategy=strategy,
    )

    ev = raw["evaluation"]
    seeds = tuple(int(s) for s in ev.get("seeds", []))
    if not seeds:
        raise ConfigError("evaluation.seeds must be nonempty")
    metrics = tuple(ev.get("metrics", list(ALL_METRICS)))
    for m in metrics:
        if m not in ALL_METRICS:
            raise ConfigError(f"unknown metric {m!r}")
    return ExperimentConfig(
        raw=raw,
        data=data_block,
        victims=tuple(victims),
        attacker=attacker_cfg,
        seeds=seeds,
        metrics=metrics,
        in_domain=bool(ev.get("in_domain", False)),
        human_price_per_label=Decimal(str(raw.get("human_price_per_label", "0"))),
        target_eval_fraction=float(data_block.get("target_eval_fraction", 0.2)),
    )


def _build_datasets(cfg: ExperimentConfig, seed: int):
    """Returns (source_ds, target_ds, tabular_spec_or_None)."""
    block = cfg.data
    kind = block["generator"]
    if kind == "tabular":
        spec = data.TabularDomainSpec(
            p_source=np.asarray(block["p_source"], dtype=np.float64),
            p_target=np.asarray(block["p_target"], dtype=np.float64),
            oracle_rule=np.asarray(block["oracle_rule"], dtype=np.int64),
            n_source=int(block["n_source"]),
            n_target=int(block["n_target"]),
            num_classes=int(block["num_classes"]),
        )
        source, target = data.generate_tabular_pair(spec, seed)
        return source, target, spec
    if kind == "gaussian":
        spec = data.GaussianDomainSpec(
            dim=int(block["dim"]),
            num_classes=int(block["num_classes"]),
            class_means_source=np.asarray(block["class_means_source"], dtype=np.float64),
            class_means_target=np.asarray(block["class_means_target"], dtype=np.float64),
            noise_std=float(block["noise_std"]),
            n_source=int(block["n_source"]),
            n_target=int(block["n_target"]),
            label_noise_rate=float(block.get("label_noise_rate", 0.0)),
        )
        source, target = data.generate_gaussian_pair(spec, seed)
        return source, target, None
    # csv
    fmt = block.get("format", "vector")
    num_classes = block.get("num_classes")
    if fmt == "text":
        feat = block.get("featurizer", {})
        dim = int(feat.get("dim", 256))
        lowercase = bool(feat.get("lowercase", True))
        source = data.load_text_csv(block["source_csv"], dim, lowercase,
                                    num_classes, "source")
        target = data.load_text_csv(block["target_csv"], dim, lowercase,
                                    source.num_classes, "target")
    else:
        source = data.load_vector_csv(block["source_csv"], num_classes, "source")
        target = data.load_vector_csv(block["target_csv"], source.num_classes,
                                      "target")
    return source, target, None


def _source_slice(source: data.LabeledDataset, rng_range, seed: int):
    n = len(source)
    order = np.random.default_rng(seed).permutation(n)
    lo, hi = int(math.floor(rng_range[0] * n)), int(math.floor(rng_range[1] * n))
    idx = order[lo:hi]
    return data.LabeledDataset(source.X[idx], source.y[idx],
                               source.num_classes, source.domain_tag)


def _defended_accuracy(model, policy, ds, seed: int) -> float:
    """Victim accuracy after the defense, on a dedicated noise stream."""
    rng = np.random.default_rng(seed)
    probs = model.predict_proba(ds.X)
    hard = np.array([np.argmax(victim.apply_defense(policy, p, rng))
                     for p in probs])
    return float(np.mean(hard == ds.y))


class _MeanTeacher:
    """Prediction source that averages the victims' probability outputs."""

    def __init__(self, victim_models):
        self._models = victim_models

    def predict_proba(self, X):
        return np.mean([m.predict_proba(X) for m in self._models], axis=0)


def _run_seed(cfg: ExperimentConfig, seed: int) -> dict:
    source, target, tab_spec = _build_datasets(cfg, seed)
    f = cfg.target_eval_fraction
    harvest_part, _, test_part = data.split(target, (1.0 - f, 0.0, f), seed + 1)
    if len(test_part) == 0 or len(harvest_part) == 0:
        raise ValueError("target split left an empty part")

    victim_models, endpoints = [], []
    for k, vc in enumerate(cfg.victims):
        train_ds = _source_slice(source, vc.source_range, seed + 2)
        tcfg = models.TrainConfig(
            learning_rate=vc.train.learning_rate, batch_size=vc.train.batch_size,
            epochs=vc.train.epochs, seed=1000 * (k + 1) + seed, label_mode="hard")
        model = models.train_model(vc.kind, source.dim, source.num_classes,
                                   train_ds.X, train_ds.y, tcfg,
                                   hidden_dim=vc.hidden_dim)
        victim_models.append(model)
        endpoints.append(victim.VictimEndpoint(
            model, vc.defense, vc.price_per_query, seed=2000 * (k + 1) + seed))

    rows = []
    if cfg.in_domain:
        tcfg = models.TrainConfig(
            learning_rate=cfg.attacker.train.learning_rate,
            batch_size=cfg.attacker.train.batch_size,
            epochs=cfg.attacker.train.epochs, seed=8000 + seed, label_mode="hard")
        ref = models.train_model(cfg.attacker.kind, target.dim, target.num_classes,
                                 harvest_part.X, harvest_part.y, tcfg,
                                 hidden_dim=cfg.attacker.hidden_dim)
        rows.append({"model": "In_Domain",
                     "role": "in_domain_reference (uses target oracle labels)",
                     "target_accuracy": models.accuracy(ref, test_part)})

    harvested = attacker.harvest(endpoints, harvest_part.X)

    want = set(cfg.metrics)
    tv_value, tv_kind = None, None
    if "risks" in want or "bound" in want:
        if tab_spec is not None:
            tv_value, tv_kind = analysis.tv_exact(tab_spec), "exact"
        else:
            tv_value = analysis.tv_discriminator(
                source, target,
                models.TrainConfig(epochs=20, seed=seed + 17))
            tv_kind = "estimated"

    def risk_dict(attack_model, teacher):
        if tab_spec is not None:
            src_eval = data.support_dataset(tab_spec, "source")
            tgt_eval = data.support_dataset(tab_spec, "target")
        else:
            src_eval, tgt_eval = source, test_part
        report = analysis.da_bound_report(teacher, attack_model, src_eval,
                                          tgt_eval, tv_value,
                                          cfg.attacker.label_mode)
        out = report.to_dict()
        out["tv_kind"] = tv_kind
        if tv_kind == "estimated":
            # lower-bound TV estimate cannot certify the inequality
            out["bound_holds"] = "not_evaluable"
        return out

    for k, (vc, model) in enumerate(zip(cfg.victims, victim_models)):
        row = {"model": f"Victim{k + 1}", "role": "victim",
               "target_accuracy": models.accuracy(model, test_part)}
        if vc.defense.mode != "none":
            row["defended_target_accuracy"] = _defended_accuracy(
                model, vc.defense, test_part, 3000 * (k + 1) + seed)
        rows.append(row)

    human_price = cfg.human_price_per_label
    strategies = [(f"Attack_s{k + 1}", f"single:{k}") for k in range(len(cfg.victims))]
    if len(cfg.victims) >= 2 and cfg.attacker.strategy in ("concat", "average"):
        strategies.append(("Attack_m", cfg.attacker.strategy))

    for j, (name, strategy) in enumerate(strategies):
        imitation = attacker.assemble(harvested, strategy, cfg.attacker.label_mode)
        tcfg = models.TrainConfig(
            learning_rate=cfg.attacker.train.learning_rate,
            batch_size=cfg.attacker.train.batch_size,
            epochs=cfg.attacker.train.epochs, seed=9000 + 100 * j + seed,
            label_mode=cfg.attacker.label_mode)
        attack_model = attacker.imitate(imitation, cfg.attacker.kind, tcfg,
                                        hidden_dim=cfg.attacker.hidden_dim)
        row = {"model": name,
               "role": "attacker_single" if strategy.startswith("single")
               else "attacker_ensemble",
               "target_accuracy": models.accuracy(attack_model, test_part)}
        if "risks" in want or "bound" in want:
            if strategy.startswith("single:"):
                teacher = victim_models[int(strategy.split(":")[1])]
            else:
                teacher = _MeanTeacher(victim_models)
            row["risk"] = risk_dict(attack_model, teacher)
        if "cost" in want:
            if strategy.startswith("single:"):
                k = int(strategy.split(":")[1])
                meter = endpoints[k].usage()
                report = analysis.cost_report(meter.query_count,
                                              cfg.victims[k].price_per_query,
                                              human_price)
            else:
                total = sum((e.usage().total_cost for e in endpoints), Decimal(0))
                n = len(harvested.inputs)
                report = analysis.CostReport(
                    n_queries=n, api_cost=total, human_cost=n * human_price,
                    ratio=float("inf") if total == 0
                    else float((n * human_price) / total))
            row["cost"] = report.to_dict()
        rows.append(row)

    result = {"seed": seed, "rows": rows}
    if "diversity" in want and len(cfg.victims) >= 2:
        result["diversity"] = analysis.ensemble_diversity(
            harvested, cfg.attacker.label_mode)
    return result


def _summary(per_seed: list[dict]) -> dict:
    by_model: dict[str, list[float]] = {}
    for entry in per_seed:
        for row in entry.get("rows", []):
            by_model.setdefault(row["model"], []).append(row["target_accuracy"])
    out = {}
    for name, values in by_model.items():
        arr = np.asarray(values)
        out[name] = {
            "target_accuracy_mean": float(arr.mean()),
            "target_accuracy_std": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
            "n_seeds": len(arr),
        }
    return out


def run(config: dict | ExperimentConfig) -> dict:
    """Execute the full pipeline for every configured seed."""
    cfg = config if isinstance(config, ExperimentConfig) else parse_config(config)
    per_seed, errors = [], []
    for seed in cfg.seeds:
        try:
            per_seed.append(_run_seed(cfg, seed))
        except Exception as exc:  # noqa: BLE001 - seed failures are reported
            errors.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}"})
    report = {
        "config": cfg.raw,
        "eval_split": "target_test",
        "seeds": list(cfg.seeds),
        "per_seed": per_seed,
        "errors": errors,
        "summary": _summary(per_seed),
    }
    return report


def _risk_field(row: dict, key: str):
    risk = row.get("risk") or {}
    return risk.get(key, "")


def emit(report: dict, fmt: str, path) -> None:
    """Write the report as JSON (nested) or CSV (one row per seed, model)."""
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, sort_keys=True, indent=2, default=str)
            fh.write("\n")
        return
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    header = ["seed", "model", "role", "target_accuracy", "epsilon_v",
              "epsilon_a", "imitation_gap", "tv", "bound_rhs", "bound_holds",
              "api_cost", "human_cost"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for entry in report["per_seed"]:
            for row in entry["rows"]:
                cost = row.get("cost") or {}
                writer.writerow([
                    entry["seed"], row["model"], row["role"],
                    row["target_accuracy"],
                    _risk_field(row, "epsilon_v"), _risk_field(row, "epsilon_a"),
                    _risk_field(row, "imitation_gap"), _risk_field(row, "tv"),
                    _risk_field(row, "bound_rhs"), _risk_field(row, "bound_holds"),
                    cost.get("api_cost", ""), cost.get("human_cost", ""),
                ])
