"""Experiment orchestration: configs, stage hashing, resumable runs.

Stages run in dependency order (data, forecasters, signatures, meta,
baseline, attack, report). Every stage gets a content hash derived from
the slice of config it reads plus its parents' hashes; completed stage
directories are indexed by that hash and reused, so an edited config
recomputes only what actually changed. All randomness derives from the
config seed, which makes reports byte-reproducible.
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from .attack import (SignatureSpec, gen_signature_set, load_meta,
                     load_signature_manifest, load_signature_set, run_attack,
                     sample_signature_dates, save_meta,
                     save_signature_manifest, save_signature_set,
                     train_meta, train_shadow_farm)
from .attack.shadows import HONEST_ROLE, SHADOW_ROLE
from .baseline import baseline_scores, load_baseline, save_baseline, train_baseline
from .blackbox import LocalOracle
from .data import (PROPERTY_NAMES, SynthConfig, generate_dataset, load_csv,
                   load_dataset, save_dataset, split_aux_honest)
from .errors import ConfigError, StageError
from .forecast import ForecastHyperparams, load_forecaster
from .metrics import build_report, metric_row, random_reference
from datetime import datetime

log = logging.getLogger(__name__)

STAGE_ORDER = ("data", "forecasters", "signatures", "meta", "baseline",
               "attack", "report")
STAGE_PARENTS = {
    "data": (),
    "forecasters": ("data",),
    "signatures": ("forecasters",),
    "meta": ("signatures",),
    "baseline": ("data",),
    "attack": ("forecasters", "signatures", "meta"),
    "report": ("attack", "baseline"),
}
STAGE_CONFIG_KEYS = {
    "data": ("data", "seed"),
    "forecasters": ("split", "forecaster", "seed"),
    "signatures": ("signature", "seed"),
    "meta": ("classifier", "properties", "seed"),
    "baseline": ("split", "classifier", "baseline", "properties", "seed"),
    "attack": ("properties", "seed"),
    "report": ("metrics", "seed"),
}


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description; hashable canonically."""

    data: dict
    split: dict
    forecaster: dict
    signature: dict
    properties: list[str]
    classifier: dict
    baseline: dict
    metrics: dict
    seed: int

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = copy.deepcopy(raw)
        known = {"data", "split", "forecaster", "signature", "properties",
                 "classifier", "baseline", "metrics", "seed"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        data = raw.get("data") or {"source": "synthetic", "synth": {}}
        source = data.get("source")
        if source == "synthetic":
            synth = dict(data.get("synth") or {})
            synth.setdefault("n_households", 100)
            synth.setdefault("days", 120)
            synth.setdefault("seed", raw.get("seed", 0))
            data = {"source": "synthetic", "synth": synth}
        elif source == "csv":
            if "meters" not in data or "labels" not in data:
                raise ConfigError("csv data source needs 'meters' and 'labels' paths")
            data = {"source": "csv", "meters": str(data["meters"]),
                    "labels": str(data["labels"])}
        else:
            raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {source!r}")

        split = dict(raw.get("split") or {})
        split.setdefault("aux_fraction", 0.8)

        fc = dict(raw.get("forecaster") or {})
        hp = ForecastHyperparams(**(fc.get("hyperparams") or {})).validate()
        fc = {"hyperparams": hp.to_kwargs(),
              "search_budget": fc.get("search_budget"),
              "val_meters": int(fc.get("val_meters", 10)),
              "train_days": fc.get("train_days")}

        signature = dict(raw.get("signature") or {})
        signature.setdefault("k", 100)
        signature.setdefault("tau", 48)
        if signature["k"] < 1 or signature["tau"] < 1:
            raise ConfigError("signature.k and signature.tau must be >= 1")

        properties = list(raw.get("properties") or PROPERTY_NAMES)
        bad = [p for p in properties if p not in PROPERTY_NAMES]
        if bad:
            raise ConfigError(f"unknown properties {bad}")

        classifier = dict(raw.get("classifier") or {})
        classifier.setdefault("channels", [6, 12, 24])
        classifier.setdefault("epochs", 30)
        classifier.setdefault("batch_size", 40)
        classifier.setdefault("learning_rate", 3e-3)
        classifier.setdefault("folds", 5)

        baseline_cfg = dict(raw.get("baseline") or {})
        baseline_cfg.setdefault("max_days", 60)

        metrics = dict(raw.get("metrics") or {})
        metrics.setdefault("random_trials", 200)

        return cls(data=data, split=split, forecaster=fc, signature=signature,
                   properties=properties, classifier=classifier,
                   baseline=baseline_cfg, metrics=metrics,
                   seed=int(raw.get("seed", 0)))

    def to_dict(self) -> dict:
        return {"data": self.data, "split": self.split, "forecaster": self.forecaster,
                "signature": self.signature, "properties": self.properties,
                "classifier": self.classifier, "baseline": self.baseline,
                "metrics": self.metrics, "seed": self.seed}

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]

    def classifier_params(self) -> dict:
        params = dict(self.classifier)
        params["channels"] = tuple(params["channels"])
        return params

    def synth_config(self) -> SynthConfig:
        synth = dict(self.data["synth"])
        if "start" in synth:
            synth["start"] = datetime.fromisoformat(synth["start"])
        return SynthConfig(**synth)


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


class Runner:
    """Executes stages for one config under ``out_root``."""

    def __init__(self, config: ExperimentConfig, out_root, workers: int = 1):
        self.config = config
        self.workers = max(1, int(workers))
        self.out_root = Path(out_root)
        self.run_dir = self.out_root / config.config_hash()
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._index_path = self.out_root / "stage_index.json"
        self._stage_hashes: dict[str, str] = {}
        self._stage_paths: dict[str, Path] = {}
        # meter_id -> (host, port); attack those honest users over the wire
        self.remote_oracles: dict[int, tuple[str, int]] = {}
        self.manifest = {
            "config_hash": config.config_hash(),
            "config": config.to_dict(),
            "stages": {},
            "query_counts": {},
        }

    # -- hashing / caching --------------------------------------------------
    def stage_hash(self, stage: str) -> str:
        if stage in self._stage_hashes:
            return self._stage_hashes[stage]
        payload = {
            "stage": stage,
            "config": {k: getattr(self.config, k) for k in STAGE_CONFIG_KEYS[stage]},
            "parents": [self.stage_hash(p) for p in STAGE_PARENTS[stage]],
        }
        digest = hashlib.sha256(
            json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()[:16]
        self._stage_hashes[stage] = digest
        return digest

    def _load_index(self) -> dict:
        if self._index_path.exists():
            return json.loads(self._index_path.read_text())
        return {}

    def _register(self, stage_hash: str, path: Path) -> None:
        index = self._load_index()
        index[stage_hash] = str(path.relative_to(self.out_root))
        self._index_path.write_text(json.dumps(index, indent=2, sort_keys=True))

    def _find_completed(self, stage: str) -> Path | None:
        index = self._load_index()
        rel = index.get(self.stage_hash(stage))
        if rel is None:
            return None
        path = self.out_root / rel
        marker = path / "stage.json"
        if marker.exists():
            meta = json.loads(marker.read_text())
            if meta.get("hash") == self.stage_hash(stage) and meta.get("completed"):
                return path
        return None

    def stage_dir(self, stage: str) -> Path:
        return self._stage_paths[stage]

    # -- execution ---------------------------------------------------------
    def run_until(self, last_stage: str = "report") -> dict:
        if last_stage not in STAGE_ORDER:
            raise ConfigError(f"unknown stage {last_stage!r}")
        wanted = STAGE_ORDER[:STAGE_ORDER.index(last_stage) + 1]
        needed: list[str] = []

        def need(stage: str) -> None:
            for parent in STAGE_PARENTS[stage]:
                need(parent)
            if stage not in needed:
                needed.append(stage)

        for stage in wanted:
            need(stage)

        with threadpool_limits(limits=1, user_api="blas"):
            for stage in needed:
                self._run_stage(stage)
        self._write_manifest()
        return self.manifest

    def _run_stage(self, stage: str) -> None:
        digest = self.stage_hash(stage)
        live = stage == "attack" and bool(self.remote_oracles)
        cached = None if live else self._find_completed(stage)
        if cached is not None:
            self._stage_paths[stage] = cached
            meta = json.loads((cached / "stage.json").read_text())
            self.manifest["stages"][stage] = {
                "hash": digest, "path": str(cached), "completed": True,
                "reused": True, "seconds": meta.get("seconds"),
                "extra": meta.get("extra", {}),
            }
            if stage == "attack":
                self.manifest["query_counts"] = meta.get("extra", {}).get("query_counts", {})
            log.info("stage %s: reused %s", stage, cached)
            return

        path = self.run_dir / stage
        path.mkdir(parents=True, exist_ok=True)
        self._stage_paths[stage] = path
        log.info("stage %s: running into %s", stage, path)
        t0 = time.perf_counter()
        try:
            extra = getattr(self, f"_stage_{stage}")(path) or {}
        except Exception as exc:
            self.manifest["stages"][stage] = {
                "hash": digest, "path": str(path), "completed": False,
                "reused": False, "error": str(exc),
            }
            self._write_manifest()
            raise StageError(f"stage {stage} failed: {exc}") from exc
        seconds = round(time.perf_counter() - t0, 3)
        (path / "stage.json").write_text(json.dumps(
            {"stage": stage, "hash": digest, "completed": True,
             "seconds": seconds, "extra": extra}, indent=2, sort_keys=True))
        if not live:
            self._register(digest, path)
        self.manifest["stages"][stage] = {
            "hash": digest, "path": str(path), "completed": True,
            "reused": False, "seconds": seconds, "extra": extra,
        }
        if stage == "attack":
            self.manifest["query_counts"] = extra.get("query_counts", {})
        self._write_manifest()

    def _write_manifest(self) -> None:
        (self.run_dir / "manifest.json").write_text(
            json.dumps(self.manifest, indent=2, sort_keys=True))

    # -- datasets ------------------------------------------------------------
    def _dataset(self):
        return load_dataset(self.stage_dir("data") / "dataset")

    def _split(self):
        ds = self._dataset()
        return split_aux_honest(ds, self.config.split["aux_fraction"])

    def _hyperparams(self) -> tuple[ForecastHyperparams, ForecastHyperparams]:
        hp_file = self.stage_dir("forecasters") / "hp.json"
        blob = json.loads(hp_file.read_text())
        return (ForecastHyperparams(**blob["aux"]),
                ForecastHyperparams(**blob["honest"]))

    # -- stage bodies -----------------------------------------------------------
    def _stage_data(self, path: Path) -> dict:
        if self.config.data["source"] == "synthetic":
            ds = generate_dataset(self.config.synth_config())
        else:
            ds = load_csv(self.config.data["meters"], self.config.data["labels"],
                          min_readings=self.config.forecaster["hyperparams"]["window"] + 1)
        save_dataset(ds, path / "dataset")
        return {"households": len(ds), "provenance": ds.provenance}

    def _stage_forecasters(self, path: Path) -> dict:
        from .forecast import random_search

        aux, honest = self._split()
        base_hp = ForecastHyperparams(**self.config.forecaster["hyperparams"])
        budget = self.config.forecaster["search_budget"]
        if budget:
            n_val = min(self.config.forecaster["val_meters"], len(aux), len(honest))
            aux_hp = random_search([rec for rec, _ in aux.households[:n_val]],
                                   budget, self.config.seed, base=base_hp)
            honest_hp = random_search([rec for rec, _ in honest.households[:n_val]],
                                      budget, self.config.seed + 1, base=base_hp)
        else:
            aux_hp = honest_hp = base_hp
        (path / "hp.json").write_text(json.dumps(
            {"aux": aux_hp.to_kwargs(), "honest": honest_hp.to_kwargs()},
            indent=2, sort_keys=True))

        train_days = self.config.forecaster["train_days"]
        shadow = train_shadow_farm(aux, aux_hp, self.config.seed, path / "shadows",
                                   workers=self.workers, train_days=train_days,
                                   role=SHADOW_ROLE)
        honest_models = train_shadow_farm(honest, honest_hp, self.config.seed,
                                          path / "honest", workers=self.workers,
                                          train_days=train_days, role=HONEST_ROLE)
        return {"shadow_models": len(shadow), "honest_models": len(honest_models)}

    def _signature_spec(self) -> SignatureSpec:
        return load_signature_manifest(self.stage_dir("signatures") / "manifest.json")

    def _stage_signatures(self, path: Path) -> dict:
        aux, _ = self._split()
        starts, ends = [], []
        for rec, _ in aux.households:
            ts = rec.timestamps_minutes()
            starts.append(int(ts[0]))
            ends.append(int(ts[-1]))
        aux_hp, _ = self._hyperparams()
        dates = sample_signature_dates(max(starts), min(ends),
                                       self.config.signature["k"], self.config.seed)
        spec = SignatureSpec(w=aux_hp.window, tau=self.config.signature["tau"],
                             dates_minutes=dates, x0_seed=self.config.seed)
        save_signature_manifest(spec, path / "manifest.json")

        shadows_dir = self.stage_dir("forecasters") / "shadows"
        meters = sorted(int(p.stem) for p in shadows_dir.glob("*.sglk"))
        sig_dir = path / "signatures"
        jobs = [(shadows_dir / str(m), sig_dir / f"{m}.csv", m) for m in meters]
        if self.workers <= 1:
            for model_path, out_path, m in jobs:
                _signature_job(model_path, out_path, m, spec)
        else:
            Parallel(n_jobs=self.workers, inner_max_num_threads=1)(
                delayed(_signature_job)(mp, op, m, spec) for mp, op, m in jobs)
        return {"signature_sets": len(meters),
                "queries_per_model": spec.tau * spec.k}

    def _stage_meta(self, path: Path) -> dict:
        aux, _ = self._split()
        spec = self._signature_spec()
        sig_dir = self.stage_dir("signatures") / "signatures"
        sig_sets = {int(p.stem): load_signature_set(p, source=p.stem)
                    for p in sorted(sig_dir.glob("*.csv"))}
        labels = {rec.meter_id: props for rec, props in aux.households}
        params = self.config.classifier_params()
        jobs = [(prop,) for prop in self.config.properties]
        if self.workers <= 1:
            results = [_meta_job(prop, sig_sets, labels, self.config.seed,
                                 spec.dates_hash(), params, path)
                       for (prop,) in jobs]
        else:
            results = Parallel(n_jobs=self.workers, inner_max_num_threads=1)(
                delayed(_meta_job)(prop, sig_sets, labels, self.config.seed,
                                   spec.dates_hash(), params, path)
                for (prop,) in jobs)
        return {"cv_auc": {prop: auc for prop, auc in results}}

    def _stage_baseline(self, path: Path) -> dict:
        aux, _ = self._split()
        params = self.config.classifier_params()
        max_days = self.config.baseline["max_days"]
        jobs = list(self.config.properties)
        if self.workers <= 1:
            results = [_baseline_job(prop, aux, self.config.seed, max_days, params, path)
                       for prop in jobs]
        else:
            results = Parallel(n_jobs=self.workers, inner_max_num_threads=1)(
                delayed(_baseline_job)(prop, aux, self.config.seed, max_days,
                                       params, path) for prop in jobs)
        return {"cv_auc": {prop: auc for prop, auc in results}}

    def _stage_attack(self, path: Path) -> dict:
        from .blackbox import RemoteOracle

        spec = self._signature_spec()
        honest_dir = self.stage_dir("forecasters") / "honest"
        meters = sorted(int(p.stem) for p in honest_dir.glob("*.sglk"))
        oracles = {}
        for m in meters:
            if m in self.remote_oracles:
                host, port = self.remote_oracles[m]
                oracles[m] = RemoteOracle(host, port)
            else:
                oracles[m] = LocalOracle(load_forecaster(honest_dir / str(m)),
                                         client=str(m))
        metas = {prop: load_meta(self.stage_dir("meta") / prop)
                 for prop in self.config.properties}
        matrix, sig_sets = run_attack(oracles, metas, spec,
                                      properties=self.config.properties)
        matrix.to_csv(path / "probabilities.csv", index_label="meter_id",
                      float_format="%.17g")
        for m, sig_set in sig_sets.items():
            save_signature_set(sig_set, path / "signatures" / f"{m}.csv")
        total = sum(o.stats.total if hasattr(o, "stats") else spec.tau * spec.k
                    for o in oracles.values())
        return {"query_counts": {
            "per_honest_oracle": spec.tau * spec.k,
            "honest_oracles": len(meters),
            "total": total,
        }}

    def _stage_report(self, path: Path) -> dict:
        _, honest = self._split()
        probs = pd.read_csv(self.stage_dir("attack") / "probabilities.csv",
                            index_col="meter_id", float_precision="round_trip")
        baselines = {prop: load_baseline(self.stage_dir("baseline") / prop)
                     for prop in self.config.properties}
        b_scores = baseline_scores(baselines, honest)
        b_scores.to_csv(path / "baseline_scores.csv", index_label="meter_id",
                        float_format="%.17g")

        honest_sorted = honest.sorted_by_meter_id()
        rows = []
        for prop in self.config.properties:
            y = honest_sorted.labels_for(prop)
            if y.min() == y.max():
                log.warning("honest labels for %r are single-class; metrics "
                            "undefined, emitting blank rows", prop)
                continue
            rows.append(metric_row(prop, "Baseline", b_scores[prop].to_numpy(), y))
            rows.append(random_reference(prop, y, seed=self.config.seed,
                                         trials=self.config.metrics["random_trials"]))
            rows.append(metric_row(prop, "Adversary", probs[prop].to_numpy(), y))
        if not rows:
            raise StageError("no property had both label classes among honest users")
        queries = self.manifest["query_counts"].get("per_honest_oracle")
        notes = [f"adversary query budget: {queries} queries per honest oracle "
                 f"(tau x K)"] if queries else []
        report = build_report(rows, notes=notes)
        (path / "report.csv").write_text(report.to_csv())
        (path / "report.txt").write_text(report.render())
        return {"properties": list(self.config.properties)}


# -- parallel worker bodies (top level so joblib can ship them) ---------------

def _signature_job(model_path, out_path, meter: int, spec: SignatureSpec) -> None:
    oracle = LocalOracle(load_forecaster(model_path), client=str(meter))
    sig_set = gen_signature_set(oracle, spec, source=str(meter))
    save_signature_set(sig_set, out_path)


def _meta_job(prop: str, sig_sets, labels, seed: int, dates_hash: str,
              params: dict, out_dir: Path) -> tuple[str, float]:
    cm = train_meta(sig_sets, labels, prop, seed, dates_hash, classifier_params=params)
    save_meta(cm, Path(out_dir) / prop)
    return prop, cm.cv_auc


def _baseline_job(prop: str, aux, seed: int, max_days: int, params: dict,
                  out_dir: Path) -> tuple[str, float]:
    bc = train_baseline(aux, prop, seed, max_days=max_days, classifier_params=params)
    save_baseline(bc, Path(out_dir) / prop)
    return prop, bc.cv_auc


def run_experiment(config: ExperimentConfig, out_root, workers: int = 1,
                   until: str = "report") -> dict:
    """Run (or resume) the pipeline; returns the run manifest."""
    return Runner(config, out_root, workers=workers).run_until(until)
