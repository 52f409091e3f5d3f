"""Repeated-experiment protocol and artifact emission.

One experiment = optional contrastive pretraining followed by `repeats`
finetuning runs, each with its own derived seed (so the stratified split
reshuffles per repeat), aggregated as mean and population standard
deviation per metric. Every artifact is a pure function of (config, seed):
regenerating a report from its recorded seeds reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..augment import AugmentConfig, NoiseSpec
from ..data import Dataset, stratified_split
from ..metrics import roc_points, write_roc_csv, write_roc_svg
from ..numcore import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, fingerprint, resolved_text
from .finetune import FinetuneResult, finetune
from .pretrain import PipelineError, PretrainResult, pretrain

__all__ = ["ExperimentReport", "run_experiment", "write_report",
           "save_encoder_checkpoint", "load_encoder_checkpoint",
           "ablation_grid", "write_ablation_csv",
           "ABLATION_NODE_RANGES", "ABLATION_NOISES",
           "FULL_SCALE_REFERENCE"]

METRIC_NAMES = ("accuracy", "auroc", "sensitivity", "specificity")

# Published full-scale results on the 1,009-sample ABIDE corpus; recorded in
# every report for context, never asserted at desk scale.
FULL_SCALE_REFERENCE = {
    "dataset": "ABIDE (1009 samples, 200 nodes)",
    "accuracy": {"mean": 74.4, "std": 2.4},
    "auroc": {"mean": 82.6, "std": 1.8},
    "sensitivity": {"mean": 66.9, "std": 8.3},
    "specificity": {"mean": 81.7, "std": 3.6},
}


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[dict, ...]  # one dict per repeat
    mean: dict[str, float]
    std: dict[str, float]
    seeds: tuple[int, ...]
    config_fingerprint: str
    reference: dict = None

    def __post_init__(self):
        if self.reference is None:
            object.__setattr__(self, "reference", FULL_SCALE_REFERENCE)


def _aggregate(rows: list[dict]) -> tuple[dict, dict]:
    mean, std = {}, {}
    for name in METRIC_NAMES:
        values = np.array([row[name] for row in rows])
        mean[name] = float(values.mean())
        std[name] = float(values.std())  # population std; zero for one repeat
    return mean, std


def run_experiment(ds: Dataset, cfg: ExperimentConfig,
                   encoder_ckpt: dict[str, np.ndarray] | None = None,
                   ) -> tuple[ExperimentReport, list[FinetuneResult], PretrainResult | None]:
    """The full protocol; returns the report plus per-repeat artifacts.

    With ``encoder_ckpt`` given, that checkpoint seeds every repeat and no
    pretraining runs; otherwise pretraining follows ``cfg.pretrain_scope``.
    Pretraining consumes every sample, labeled or not; finetuning sees only
    the labeled ones.
    """
    labeled = ds.labeled()
    shared_pretrain: PretrainResult | None = None
    if encoder_ckpt is None and cfg.pretrain_scope == "all" and cfg.pretrain.epochs > 0:
        shared_pretrain = pretrain(ds, cfg.encoder, cfg.pretrain, cfg.augment)

    rows: list[dict] = []
    results: list[FinetuneResult] = []
    seeds: list[int] = []
    for repeat in range(cfg.finetune.repeats):
        seed = cfg.finetune.seed + repeat
        seeds.append(seed)
        fcfg = replace(cfg.finetune, seed=seed,
                       split=replace(cfg.finetune.split, seed=seed))
        if encoder_ckpt is not None:
            ckpt = encoder_ckpt
        elif cfg.pretrain_scope == "train_only" and cfg.pretrain.epochs > 0:
            train_fold, _, _ = stratified_split(labeled, fcfg.split)
            pcfg = replace(cfg.pretrain, seed=cfg.pretrain.seed + repeat)
            ckpt = pretrain(train_fold, cfg.encoder, pcfg, cfg.augment).encoder_params
        else:
            ckpt = shared_pretrain.encoder_params if shared_pretrain else None
        result = finetune(labeled, ckpt, cfg.encoder, fcfg)
        results.append(result)
        rows.append({"repeat": repeat, "seed": seed,
                     "best_epoch": result.best_epoch, **result.test_metrics})

    mean, std = _aggregate(rows)
    report = ExperimentReport(rows=tuple(rows), mean=mean, std=std,
                              seeds=tuple(seeds), config_fingerprint=fingerprint(cfg))
    return report, results, shared_pretrain


# ---------------------------------------------------------------------------
# checkpoint files (encoder weights + the config scalars needed to rebuild)


def save_encoder_checkpoint(path, arrays: dict[str, np.ndarray], cfg) -> None:
    payload = {f"param.{name}": arr for name, arr in arrays.items()}
    payload["meta.n_nodes"] = np.array(float(cfg.n_nodes))
    payload["meta.layers"] = np.array(float(cfg.layers))
    payload["meta.heads"] = np.array(float(cfg.heads))
    payload["meta.d_model"] = np.array(float(cfg.width))
    payload["meta.ffn_dim"] = np.array(float(cfg.ffn_width))
    payload["meta.n_clusters"] = np.array(float(cfg.n_clusters))
    payload["meta.cluster_dim"] = np.array(float(cfg.cluster_dim))
    payload["meta.proj_dim"] = np.array(float(cfg.proj_dim))
    save_checkpoint(path, payload)


def load_encoder_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, int]]:
    raw = load_checkpoint(path)
    arrays = {name[len("param."):]: arr for name, arr in raw.items()
              if name.startswith("param.")}
    meta = {name[len("meta."):]: int(arr) for name, arr in raw.items()
            if name.startswith("meta.")}
    if not arrays or "n_nodes" not in meta:
        raise PipelineError(f"{path}: not an encoder checkpoint")
    return arrays, meta


# ---------------------------------------------------------------------------
# artifact writing


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report(out_dir, report: ExperimentReport, results: list[FinetuneResult],
                 cfg: ExperimentConfig, pretrain_result: PretrainResult | None) -> None:
    """config.resolved, report.csv/json, logs, per-repeat scores and models."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(resolved_text(cfg))

    with (out / "report.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repeat", "accuracy", "auroc", "sensitivity", "specificity"])
        for row in report.rows:
            writer.writerow([row["repeat"]] + [_fmt(row[m]) for m in METRIC_NAMES])
        writer.writerow(["mean"] + [_fmt(report.mean[m]) for m in METRIC_NAMES])
        writer.writerow(["std"] + [_fmt(report.std[m]) for m in METRIC_NAMES])

    (out / "report.json").write_text(json.dumps({
        "config_fingerprint": report.config_fingerprint,
        "rng": "numpy PCG64",
        "seeds": list(report.seeds),
        "rows": list(report.rows),
        "mean": report.mean,
        "std": report.std,
        "reference": report.reference,
    }, indent=2, sort_keys=True) + "\n")

    if pretrain_result is not None:
        with (out / "pretrain_log.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss_mean", "queue_len", "lr"])
            for epoch, loss_mean, queue_len, lr in pretrain_result.epoch_log:
                writer.writerow([epoch, _fmt(loss_mean), queue_len, _fmt(lr)])
        save_encoder_checkpoint(out / "pretrained.bnck",
                                pretrain_result.encoder_params, cfg.encoder)

    curves = {}
    for i, result in enumerate(results):
        with (out / f"finetune_log_repeat{i}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_auroc"])
            for epoch, loss, val in result.epoch_log:
                writer.writerow([epoch, _fmt(loss), _fmt(val)])
        with (out / f"scores_repeat{i}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["score", "label"])
            for score, label in zip(result.test_scores.scores, result.test_scores.labels):
                writer.writerow([_fmt(float(score)), int(label)])
        save_encoder_checkpoint(out / f"model_repeat{i}.bnck", result.params, cfg.encoder)
        curves[f"repeat{i}"] = roc_points(result.test_scores)

    if curves:
        first = next(iter(curves.values()))
        write_roc_csv(out / "roc.csv", first)
        write_roc_svg(out / "roc.svg", curves)


# ---------------------------------------------------------------------------
# ablation grid

ABLATION_NODE_RANGES = ((0, 0), (5, 20), (5, 200))
ABLATION_NOISES = ("none", "uniform(-0.1,0.1)", "N(0,0.1)", "N(0,0.01)")


def ablation_grid(ds: Dataset, cfg: ExperimentConfig):
    """Run every (node range x noise) cell of the published knob grid.

    Node counts are clamped to the dataset's V so the full-range cell stays
    runnable at desk scale; each emitted row records both the nominal and
    the clamped range. Yields (cell_info, report) pairs.
    """
    n_nodes = ds.n_nodes
    for k_min, k_max in ABLATION_NODE_RANGES:
        used_min, used_max = min(k_min, n_nodes), min(k_max, n_nodes)
        for noise_text in ABLATION_NOISES:
            augment = AugmentConfig(k_min=used_min, k_max=used_max,
                                    delta_max=cfg.augment.delta_max,
                                    noise=NoiseSpec.parse(noise_text))
            cell_cfg = replace(cfg, augment=augment)
            report, _, _ = run_experiment(ds, cell_cfg)
            yield ({"nodes_nominal": f"{k_min}~{k_max}",
                    "nodes_used": f"{used_min}~{used_max}",
                    "noise": noise_text}, report)


def write_ablation_csv(path, cells: list[tuple[dict, ExperimentReport]]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["nodes_nominal", "nodes_used", "noise"]
        for m in METRIC_NAMES:
            header += [f"{m}_mean", f"{m}_std"]
        writer.writerow(header)
        for info, report in cells:
            row = [info["nodes_nominal"], info["nodes_used"], info["noise"]]
            for m in METRIC_NAMES:
                row += [_fmt(report.mean[m]), _fmt(report.std[m])]
            writer.writerow(row)
