"""Experiment drivers behind the CLI.

Run configuration is one flat mapping (see ``RUN_DEFAULTS``). Resolution
order: defaults, then the named preset, then the config file, then flags.
"""
from __future__ import annotations

import json
import logging
import os
import shutil
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from irn.checkpoint import load_checkpoint, save_checkpoint
from irn.errors import ConfigError, DataError, IrnError
from irn.model import IrnModel, ModelConfig, config_fingerprint, score_average
from irn.reporting import ReportBundle, confusion_matrix, format_table, write_table
from irn.skeleton import folds as fold_tables
from irn.skeleton.folds import SBU_FOLDS, make_folds
from irn.skeleton.loaders import (
    SBU_CLASSES, NTU_MUTUAL_ACTIONS, load_ntu_dir, load_pose_stream, load_sbu, read_manifest,
    write_manifest, write_record,
)
from irn.skeleton.objects import make_samples, subsample_joints
from irn.skeleton.synthetic import ARCHETYPES, synthesize_corpus
from irn.skeleton.tracking import assign_bodies
from irn.skeleton.types import FoldSplit, InteractionSample, SkeletonSequence
from irn.training import (
    DESK_MODEL, DESK_TRAIN, TrainConfig, evaluate, init_model, pretrain_and_fuse, train, write_history,
)

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
DATASETS = ("sbu", "pose-stream", "ntu", "synthetic")

RUN_DEFAULTS = {
    "config_version": CONFIG_VERSION,
    "preset": "full",
    # model
    "variant": "inter", "use_h": True, "lstm": False, "fusion_layer": 1, "n_classes": None,
    "T": 8, "dilation": 1, "g_widths": [1000, 1000, 1000, 500], "f_widths": [500, 250, 250],
    "lstm_units": 256, "dropout": 0.25, "one_hot": False,
    # optimisation
    "lr": 1e-4, "init_std": 0.045, "batch_size": 32, "epochs": 100, "seed": 0,
    "swap_augment": True, "swap_prob": 0.5, "val_fraction": 0.1, "select_best": True, "freeze": [],
    # evaluation protocol
    "protocol": "kfold", "k": 5, "fold_source": "auto", "train_ids": None, "fold": None,
    # fusion stages
    "pretrain": False, "pretrained_inter": None, "pretrained_intra": None, "random_init": False,
    # ablation
    "ablation_rows": None,
}

PRESETS = {
    "full": {},
    "desk": {**{k: list(v) if isinstance(v, tuple) else v for k, v in DESK_MODEL.items()}, **DESK_TRAIN},
}

_MODEL_KEYS = {f.name for f in fields(ModelConfig)} - {"n_joints", "d", "n_classes"}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"eval_batch_size"}


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML/JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a flat mapping")
    return data


def resolve_config(file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then preset, then file, then flags; every key materialised."""
    user = {**(file_values or {}), **(overrides or {})}
    unknown = sorted(set(user) - set(RUN_DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    if user.get("config_version", CONFIG_VERSION) != CONFIG_VERSION:
        raise ConfigError(f"config_version {user['config_version']} unsupported (expected {CONFIG_VERSION})")
    preset = user.get("preset", RUN_DEFAULTS["preset"])
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    out = {**RUN_DEFAULTS, **PRESETS[preset], **user}
    for key in ("g_widths", "f_widths", "freeze"):
        out[key] = list(out[key])
    if out["protocol"] not in fold_tables.PROTOCOLS:
        raise ConfigError(f"unknown protocol {out['protocol']!r}; choose from {fold_tables.PROTOCOLS}")
    if out["fold_source"] not in ("auto", "explicit", "grouped"):
        raise ConfigError("fold_source must be auto, explicit or grouped")
    if int(out["dilation"]) < 1:
        raise ConfigError("dilation must be at least 1")
    return out


def run_fingerprint(cfg: dict) -> str:
    return config_fingerprint({k: v for k, v in cfg.items() if k != "epochs"})


def model_config(cfg: dict, n_classes: int, n_joints: int, d: int) -> ModelConfig:
    kw = {k: cfg[k] for k in _MODEL_KEYS}
    return ModelConfig(n_classes=int(cfg["n_classes"] or n_classes), n_joints=n_joints, d=d, **kw)


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(**{k: cfg[k] for k in _TRAIN_KEYS})


# data

def _safe_name(seq_id: str) -> str:
    return seq_id.replace("/", "__").replace("\\", "__")


def _load_pose_streams(root: Path) -> list[SkeletonSequence]:
    labels_file = root / "labels.json"
    meta = json.loads(labels_file.read_text()) if labels_file.exists() else {}
    dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not dirs:
        dirs = [root]
    seqs = []
    for d in dirs:
        info = meta.get(d.name, {})
        if isinstance(info, int):
            info = {"label": info}
        seq = assign_bodies(load_pose_stream(d))
        if seq.n_joints == 25:
            seq = subsample_joints(seq, "openpose25")
        seqs.append(seq.replace(seq_id=d.name, label=info.get("label"), group=info.get("group")))
    return seqs


def prepare_dataset(dataset: str, out_dir, input_path=None, n: int = 1000, seed: int = 0,
                    noise: float = 0.02, n_frames: int = 16) -> dict:
    """Load, convert and write canonical records plus ``manifest.json``.

    Anything written is removed again if the conversion fails.
    """
    if dataset not in DATASETS:
        raise ConfigError(f"unknown dataset {dataset!r}; choose from {DATASETS}")
    if dataset != "synthetic":
        if input_path is None:
            raise ConfigError(f"prepare {dataset} needs an input path")
        input_path = Path(input_path)
        if not input_path.exists():
            raise DataError(f"input path does not exist: {input_path}")
    out = Path(out_dir)
    existed = out.exists()
    written: list[Path] = []
    try:
        classes, split = None, None
        if dataset == "synthetic":
            seqs = synthesize_corpus(n, seed=seed, noise=noise, n_frames=n_frames)
            classes = list(ARCHETYPES)
        elif dataset == "sbu":
            seqs = load_sbu(input_path)
            classes = list(SBU_CLASSES)
            split = {"protocol": "kfold", "folds": [list(f) for f in SBU_FOLDS]}
        elif dataset == "ntu":
            seqs = [subsample_joints(s, "ntu25") for s in load_ntu_dir(input_path)]
            classes = [f"A{a:03d}" for a in NTU_MUTUAL_ACTIONS]
        else:
            seqs = _load_pose_streams(input_path)
            labels = sorted({s.label for s in seqs if s.label is not None})
            classes = [str(c) for c in range(max(labels) + 1)] if labels else None
        if not seqs:
            raise DataError(f"no sequences found for dataset {dataset}")
        (out / "records").mkdir(parents=True, exist_ok=True)
        files = []
        for s in seqs:
            rel = f"records/{_safe_name(s.seq_id)}.json"
            write_record(s, out / rel)
            written.append(out / rel)
            files.append(rel)
        written.append(out / "manifest.json")
        manifest = write_manifest(seqs, files, out / "manifest.json", dataset, classes)
        if split is not None:
            manifest["split"] = split
            (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
        return manifest
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        if not existed:
            shutil.rmtree(out, ignore_errors=True)
        else:
            rec = out / "records"
            if rec.exists() and not any(rec.iterdir()):
                rec.rmdir()
        raise


@dataclass
class Dataset:
    manifest: dict
    seqs: list[SkeletonSequence]

    @property
    def classes(self) -> list[str]:
        if self.manifest.get("classes"):
            return list(self.manifest["classes"])
        top = max(s.label for s in self.seqs)
        return [str(c) for c in range(top + 1)]

    @property
    def name(self) -> str:
        return self.manifest.get("dataset", "unknown")

    def by_id(self) -> dict[str, SkeletonSequence]:
        return {s.seq_id: s for s in self.seqs}


def load_dataset(manifest_path) -> Dataset:
    try:
        manifest, seqs = read_manifest(manifest_path)
    except FileNotFoundError as e:
        raise DataError(str(e)) from None
    if not seqs:
        raise DataError(f"{manifest_path}: manifest lists no sequences")
    missing = [s.seq_id for s in seqs if s.label is None]
    if missing:
        raise DataError(f"unlabelled sequences in manifest: {missing[:5]}")
    return Dataset(manifest, seqs)


def build_samples(seqs: Sequence[SkeletonSequence], cfg: dict) -> list[InteractionSample]:
    return make_samples(seqs, int(cfg["T"]), int(cfg["dilation"]), sequential=bool(cfg["lstm"]))


def _default_train_ids(dataset: str, protocol: str, n_classes: int):
    ntu120 = n_classes > 11
    if protocol == "cross-subject":
        return fold_tables.NTU120_CS_TRAIN_SUBJECTS if ntu120 else fold_tables.NTU_CS_TRAIN_SUBJECTS
    if protocol == "cross-view":
        return fold_tables.NTU_CV_TRAIN_CAMERAS
    return fold_tables.NTU120_CSET_TRAIN_SETUPS


def splits_for(data: Dataset, cfg: dict) -> tuple[list[FoldSplit], str]:
    """Fold splits plus a note on where they came from."""
    protocol = cfg["protocol"]
    if protocol == "kfold":
        explicit = (data.manifest.get("split") or {}).get("folds")
        source = cfg["fold_source"]
        if source == "explicit" and not explicit:
            raise ConfigError("fold_source=explicit but the manifest carries no split lists")
        if explicit and source in ("auto", "explicit"):
            splits, note = make_folds(data.seqs, fold_groups=explicit), "explicit split lists"
        else:
            splits = make_folds(data.seqs, "kfold", k=int(cfg["k"]), seed=int(cfg["seed"]))
            note = f"seeded pair-grouped {cfg['k']}-fold"
    else:
        ids = cfg["train_ids"] or _default_train_ids(data.name, protocol, len(data.classes))
        splits, note = make_folds(data.seqs, protocol, train_ids=ids), f"{protocol} id lists"
    for s in splits:
        if not s.test:
            raise DataError(f"fold {s.fold} of protocol {protocol} has no test samples")
        if not s.train:
            raise DataError(f"fold {s.fold} of protocol {protocol} has no training samples")
    return splits, note


# training

def _n_joints_d(samples: Sequence[InteractionSample]) -> tuple[int, int]:
    return samples[0].p1.n_joints, samples[0].p1.d


def train_model(samples: Sequence[InteractionSample], cfg: dict, n_classes: int, out_dir=None,
                resume: bool = False, pretrained: dict[str, IrnModel] | None = None) -> tuple[IrnModel, list[dict]]:
    """Dispatch on the variant: plain training, or the staged fusion procedure."""
    if not samples:
        raise DataError("no training samples")
    N, d = _n_joints_d(samples)
    mcfg = model_config(cfg, n_classes, N, d)
    tcfg = train_config(cfg)
    out = Path(out_dir) if out_dir is not None else None
    if mcfg.variant in ("fused", "fc1_fused"):
        if pretrained is None and (cfg["pretrained_inter"] or cfg["pretrained_intra"]):
            if not (cfg["pretrained_inter"] and cfg["pretrained_intra"]):
                raise ConfigError("give both pretrained_inter and pretrained_intra")
            pretrained = {"inter": load_checkpoint(cfg["pretrained_inter"]).model,
                          "intra": load_checkpoint(cfg["pretrained_intra"]).model}
        if pretrained is None and not cfg["pretrain"] and not cfg["random_init"]:
            raise ConfigError(
                f"variant {mcfg.variant} needs pretrained_inter/pretrained_intra, pretrain: true, or random_init: true"
            )
        res = pretrain_and_fuse(samples, mcfg, tcfg, pretrained, bool(cfg["random_init"]), out, resume)
        model, history = res.model, res.histories["fused"]
    else:
        model = init_model(mcfg, tcfg.init_std, np.random.default_rng([tcfg.seed, 0]))
        res = train(model, samples, tcfg, out, resume)
        model, history = res.model, res.history
    if out is not None:
        save_checkpoint(out / "model.npz", model, mcfg.fingerprint(), len(history), history=history)
        write_history(out / "history.csv", history)
    return model, history


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _claim_out_dir(out: Path, cfg: dict, force: bool) -> None:
    """Refuse to mix runs: an out dir belongs to one resolved config."""
    out.mkdir(parents=True, exist_ok=True)
    stamp = out / "resolved_config.json"
    fp = run_fingerprint(cfg)
    if stamp.exists():
        old = json.loads(stamp.read_text())
        if old.get("fingerprint") != fp and not force:
            raise ConfigError(f"{out} holds a run with a different config; use --force to overwrite")
        if old.get("fingerprint") != fp:
            for child in out.iterdir():
                if child.is_dir():
                    shutil.rmtree(child)
                else:
                    child.unlink()
    _write_json(stamp, {"fingerprint": fp, "config": cfg})


def _select(data: Dataset, ids: Sequence[str]) -> list[SkeletonSequence]:
    lookup = data.by_id()
    return [lookup[i] for i in ids]


def run_train(cfg: dict, manifest, out_dir, force: bool = False) -> dict:
    data = load_dataset(manifest)
    out = Path(out_dir)
    _claim_out_dir(out, cfg, force)
    seqs = data.seqs
    if cfg["protocol"] != "kfold" or cfg["fold"] is not None:
        splits, _ = splits_for(data, cfg)
        fold = int(cfg["fold"] or 0)
        if not 0 <= fold < len(splits):
            raise ConfigError(f"fold {fold} outside 0..{len(splits) - 1}")
        seqs = _select(data, splits[fold].train)
    samples = build_samples(seqs, cfg)
    _, history = train_model(samples, cfg, len(data.classes), out, resume=True)
    return {"epochs": len(history), "final": history[-1] if history else None}


def _predict(models: Sequence[IrnModel], samples: Sequence[InteractionSample], batch: int = 64) -> np.ndarray:
    """Class probabilities; with two models the scores are averaged."""
    out = []
    for i in range(0, len(samples), batch):
        chunk = samples[i:i + batch]
        if len(models) == 1:
            out.append(models[0].predict_proba(chunk))
        else:
            out.append(score_average(models[0].logits(chunk).data, models[1].logits(chunk).data))
    return np.concatenate(out)


def _bundle(name: str, classes, fold_results, meta) -> ReportBundle:
    C = len(classes)
    conf = np.zeros((C, C), dtype=np.int64)
    accs, sizes = [], []
    for labels, preds in fold_results:
        conf += confusion_matrix(labels, preds, C)
        accs.append(float((np.asarray(labels) == np.asarray(preds)).mean()))
        sizes.append(len(labels))
    bundle = ReportBundle(name, list(classes), accs, conf, meta, sizes)
    counts = np.bincount(np.concatenate([np.asarray(l) for l, _ in fold_results]), minlength=C)
    bundle.check(counts)
    return bundle


def run_eval(checkpoint, manifest, out_dir, cfg: dict | None = None) -> ReportBundle:
    ck = load_checkpoint(checkpoint)
    if cfg is None:
        for cand in (Path(checkpoint).parent, Path(checkpoint).parent.parent):
            stamp = cand / "resolved_config.json"
            if stamp.exists():
                cfg = json.loads(stamp.read_text())["config"]
                break
    cfg = resolve_config(cfg or {"T": ck.model.config.T, "lstm": ck.model.config.lstm})
    data = load_dataset(manifest)
    seqs = data.seqs
    if cfg["protocol"] != "kfold" or cfg["fold"] is not None:
        splits, _ = splits_for(data, cfg)
        seqs = _select(data, splits[int(cfg["fold"] or 0)].test)
    samples = build_samples(seqs, cfg)
    if ck.model.config.n_classes != len(data.classes):
        raise ConfigError(f"checkpoint has {ck.model.config.n_classes} classes, data has {len(data.classes)}")
    probs = _predict([ck.model], samples)
    labels = np.array([s.label for s in samples])
    meta = {"fingerprint": ck.fingerprint, "seed": cfg["seed"], "checkpoint": str(checkpoint),
            "dataset": data.name, "n_samples": len(samples)}
    bundle = _bundle("eval", data.classes, [(labels, np.argmax(probs, axis=1))], meta)
    bundle.write(out_dir)
    return bundle


def run_crossval(cfg: dict, manifest, out_dir, force: bool = False) -> ReportBundle:
    data = load_dataset(manifest)
    out = Path(out_dir)
    _claim_out_dir(out, cfg, force)
    splits, note = splits_for(data, cfg)
    t0 = time.perf_counter()
    timing, results = {}, []
    for split in splits:
        t = time.perf_counter()
        train_s = build_samples(_select(data, split.train), cfg)
        test_s = build_samples(_select(data, split.test), cfg)
        model, _ = train_model(train_s, cfg, len(data.classes), out / f"fold{split.fold}", resume=True)
        preds = np.argmax(_predict([model], test_s), axis=1)
        results.append((np.array([s.label for s in test_s]), preds))
        timing[f"fold{split.fold}"] = time.perf_counter() - t
        log.info("fold %d: accuracy %.3f", split.fold, float((results[-1][0] == preds).mean()))
    meta = {"fingerprint": run_fingerprint(cfg), "seed": cfg["seed"], "protocol": cfg["protocol"],
            "fold_source": note, "n_folds": len(splits), "dataset": data.name, "config": cfg}
    bundle = _bundle(f"crossval {cfg['variant']}", data.classes, results, meta)
    bundle.write(out)
    timing["total"] = time.perf_counter() - t0
    _write_json(out / "timing.json", timing)
    return bundle


# ablation matrix

ABLATION_ROWS = {
    "inter": ("$IRN_{inter}$ (Baseline)", {"variant": "inter", "use_h": False}, ()),
    "inter_h": ("$IRN^{'}_{inter}$ (Self-Augmented Input)", {"variant": "inter"}, ()),
    "lstm_inter_h": ("LSTM-$IRN^{'}_{inter}$", {"variant": "inter", "lstm": True}, ()),
    "intra": ("$IRN_{intra}$ (Baseline)", {"variant": "intra", "use_h": False}, ()),
    "intra_h": ("$IRN^{'}_{intra}$ (Self-Augmented Input)", {"variant": "intra"}, ()),
    "lstm_intra_h": ("LSTM-$IRN^{'}_{intra}$", {"variant": "intra", "lstm": True}, ()),
    "naive_h": ("Naive-$IRN^{'}_{inter+intra}$", {"variant": "naive"}, ()),
    "avg_scores": ("Averaging scores", None, ("inter_h", "intra_h")),
    "random_fused_h": ("Random-$IRN^{'}_{inter+intra}$", {"variant": "fused", "random_init": True}, ()),
    "fused_h": ("$IRN^{'}_{inter+intra}$", {"variant": "fused"}, ("inter_h", "intra_h")),
    "fc1_h": ("$IRN^{'fc1}_{inter+intra}$", {"variant": "fc1_fused", "fusion_layer": 1}, ("inter_h", "intra_h")),
    "fc2_h": ("$IRN^{'fc2}_{inter+intra}$", {"variant": "fc1_fused", "fusion_layer": 2}, ("inter_h", "intra_h")),
    "fc3_h": ("$IRN^{'fc3}_{inter+intra}$", {"variant": "fc1_fused", "fusion_layer": 3}, ("inter_h", "intra_h")),
    "lstm_fc1_h": ("LSTM-$IRN^{'fc1}_{inter+intra}$", {"variant": "fc1_fused", "fusion_layer": 1, "lstm": True},
                   ("lstm_inter_h", "lstm_intra_h")),
}

# keys an ablation row sets itself; everything else comes from the base config
_ROW_KEYS = ("variant", "use_h", "lstm", "fusion_layer", "random_init", "pretrain",
             "pretrained_inter", "pretrained_intra")


def _row_config(base: dict, row: str) -> dict:
    _, spec, _ = ABLATION_ROWS[row]
    cfg = {**base, "use_h": True, "lstm": False, "fusion_layer": 1, "random_init": False, "pretrain": False,
           "pretrained_inter": None, "pretrained_intra": None}
    cfg.update(spec or {})
    return cfg


def run_ablation(base_cfg: dict, manifest, out_dir, rows: Sequence[str] | None = None,
                 force: bool = False) -> list[dict]:
    """Train and score the requested ablation rows on the configured folds.

    Specialised models are trained once per fold and reused by the rows that
    depend on them. A failing row is recorded and the others carry on.
    """
    rows = list(rows or base_cfg.get("ablation_rows") or ABLATION_ROWS)
    unknown = [r for r in rows if r not in ABLATION_ROWS]
    if unknown:
        raise ConfigError(f"unknown ablation rows {unknown}; known: {list(ABLATION_ROWS)}")
    data = load_dataset(manifest)
    out = Path(out_dir)
    _claim_out_dir(out, {**base_cfg, "ablation_rows": rows}, force)
    splits, note = splits_for(data, base_cfg)
    C = len(data.classes)
    results: dict[str, list] = {r: [] for r in rows}
    errors: dict[str, str] = {}
    timing: dict[str, float] = {}

    for split in splits:
        fold_dir = out / f"fold{split.fold}"
        tr_seqs, te_seqs = _select(data, split.train), _select(data, split.test)
        sample_cache: dict[tuple, tuple] = {}
        models: dict[str, list[IrnModel]] = {}
        failed: dict[str, str] = {}

        def samples_for(cfg):
            key = (cfg["T"], cfg["dilation"], cfg["lstm"])
            if key not in sample_cache:
                sample_cache[key] = (build_samples(tr_seqs, cfg), build_samples(te_seqs, cfg))
            return sample_cache[key]

        def get(row: str) -> list[IrnModel]:
            if row in failed:
                raise IrnError(failed[row])
            if row in models:
                return models[row]
            _, spec, deps = ABLATION_ROWS[row]
            try:
                dep_models = [get(d)[0] for d in deps]
                cfg = _row_config(base_cfg, row) if spec is not None else _row_config(base_cfg, deps[0])
                t = time.perf_counter()
                if spec is None:
                    models[row] = dep_models
                else:
                    pre = {"inter": dep_models[0], "intra": dep_models[1]} if deps else None
                    train_s, _ = samples_for(cfg)
                    model, _ = train_model(train_s, cfg, C, fold_dir / row, resume=True, pretrained=pre)
                    models[row] = [model]
                timing[f"fold{split.fold}/{row}"] = time.perf_counter() - t
            except Exception as e:  # a broken row must not stop the table
                failed[row] = f"{row}: {type(e).__name__}: {e}"
                raise IrnError(failed[row]) from None
            return models[row]

        for row in rows:
            try:
                ms = get(row)
                cfg = _row_config(base_cfg, row if ABLATION_ROWS[row][1] else ABLATION_ROWS[row][2][0])
                _, test_s = samples_for(cfg)
                preds = np.argmax(_predict(ms, test_s), axis=1)
                results[row].append((np.array([s.label for s in test_s]), preds))
            except Exception as e:
                errors[row] = str(e)
                log.warning("ablation row %s failed on fold %d: %s", row, split.fold, e)

    table = []
    for row in rows:
        label = ABLATION_ROWS[row][0]
        if row in errors or len(results[row]) != len(splits):
            table.append({"row": row, "label": label, "accuracy": None, "fold_accuracies": [],
                          "error": errors.get(row, "incomplete")})
            continue
        meta = {"fingerprint": run_fingerprint(_row_config(base_cfg, row)), "seed": base_cfg["seed"],
                "protocol": base_cfg["protocol"], "fold_source": note, "n_folds": len(splits), "row": row}
        bundle = _bundle(label, data.classes, results[row], meta)
        bundle.write(out / "rows" / row)
        table.append({"row": row, "label": label, "accuracy": bundle.mean_accuracy,
                      "fold_accuracies": bundle.fold_accuracies, "error": None})
    write_table(table, out / "ablation.csv", out / "ablation.json")
    (out / "ablation.txt").write_text(format_table(table))
    _write_json(out / "timing.json", timing)
    return table


# synthetic end-to-end run

def run_synthetic(out_dir=None, n: int = 1000, n_test: int = 200, seed: int = 7, variant: str = "inter",
                  lstm: bool = False, epochs: int = 50, overrides: dict | None = None) -> dict:
    """Generate the toy corpus, train on the first ``n - n_test`` samples, test on the rest.

    The best epoch is picked on a validation split of the training portion.
    """
    cfg = resolve_config({"preset": "desk", "variant": variant, "lstm": lstm, "epochs": epochs, "seed": seed,
                          "pretrain": variant in ("fused", "fc1_fused"), **(overrides or {})})
    seqs = synthesize_corpus(n, seed=seed)
    samples = build_samples(seqs, cfg)
    train_s, test_s = samples[: n - n_test], samples[n - n_test:]
    t0 = time.perf_counter()
    model, history = train_model(train_s, cfg, len(ARCHETYPES), out_dir)
    train_acc = evaluate(model, train_s).accuracy
    test_res = evaluate(model, test_s)
    seconds = time.perf_counter() - t0
    result = {"train_acc": train_acc, "test_acc": test_res.accuracy, "epochs": len(history),
              "seconds": seconds, "history": history, "config": cfg}
    if out_dir is not None:
        out = Path(out_dir)
        meta = {"fingerprint": run_fingerprint(cfg), "seed": seed, "protocol": "holdout",
                "n_train": len(train_s), "train_acc": train_acc}
        _bundle(f"synthetic {variant}{' lstm' if lstm else ''}", list(ARCHETYPES),
                [(test_res.labels, test_res.preds)], meta).write(out)
        _write_json(out / "timing.json", {"total": seconds})
    return result


def env_path(value, var: str) -> Path | None:
    """Resolve a relative path against the directory named by ``var`` if set."""
    if value is None:
        return None
    p = Path(value)
    root = os.environ.get(var)
    if root and not p.is_absolute():
        return Path(root) / p
    return p
