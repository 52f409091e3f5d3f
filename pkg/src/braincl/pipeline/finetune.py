"""Supervised finetuning with best-validation-epoch selection.

The encoder starts from pretrained weights (or a fresh init for the
from-scratch baseline), a new classification head is attached, and the
whole model trains under cross-entropy. After every epoch the validation
AUROC is computed; the snapshot with the highest value (earliest epoch on
ties) is evaluated exactly once on the held-out test fold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset, stratified_split
from ..metrics import ScoredSet, auroc, confusion_metrics
from ..model import (
    EncoderConfig,
    as_tensors,
    classify,
    cross_entropy,
    features,
    gram_schmidt,
    init_classifier_params,
    init_encoder_params,
)
from ..numcore import NonFiniteError, Tensor, adam, backward, opt_step, stack
from .config import FinetuneConfig
from .pretrain import PipelineError, batched_indices

__all__ = ["FinetuneResult", "finetune", "score_dataset", "summarize_scores"]


@dataclass(frozen=True)
class FinetuneResult:
    params: dict[str, np.ndarray]  # best-validation snapshot (encoder + head)
    best_epoch: int
    epoch_log: tuple[tuple[int, float, float], ...]  # epoch, train_loss, val_auroc
    test_scores: ScoredSet
    test_metrics: dict[str, float]
    split_ids: tuple[frozenset[str], frozenset[str], frozenset[str]]


def score_dataset(ds: Dataset, arrays: dict[str, np.ndarray],
                  cfg: EncoderConfig) -> ScoredSet:
    """Class-1 probabilities for every (labeled) sample."""
    params = {k: Tensor(v, requires_grad=False) for k, v in arrays.items()}
    centers = gram_schmidt(params["readout.centers"])
    scores, labels = [], []
    for sample in ds:
        logits = classify(features(sample.connectome, params, cfg, centers=centers),
                          params)
        scores.append(float(logits.softmax().data[1]))
        labels.append(sample.label)
    return ScoredSet(scores=np.array(scores), labels=np.array(labels))


def summarize_scores(scores: ScoredSet) -> dict[str, float]:
    cm = confusion_metrics(scores, threshold=0.5)
    return {
        "accuracy": cm.accuracy,
        "auroc": auroc(scores),
        "sensitivity": cm.sensitivity if cm.sensitivity is not None else float("nan"),
        "specificity": cm.specificity if cm.specificity is not None else float("nan"),
    }


def _check_compatible(ckpt: dict[str, np.ndarray], reference: dict[str, np.ndarray]) -> None:
    if set(ckpt) != set(reference):
        missing = sorted(set(reference) - set(ckpt))
        extra = sorted(set(ckpt) - set(reference))
        raise PipelineError(f"incompatible checkpoint: missing {missing[:4]}, "
                            f"unexpected {extra[:4]}")
    for name, arr in reference.items():
        if ckpt[name].shape != arr.shape:
            raise PipelineError(f"incompatible checkpoint: {name!r} has shape "
                                f"{ckpt[name].shape}, expected {arr.shape}")


def finetune(ds: Dataset, encoder_ckpt: dict[str, np.ndarray] | None,
             encoder_cfg: EncoderConfig, cfg: FinetuneConfig) -> FinetuneResult:
    labeled = ds.labeled()
    if len(labeled) != len(ds):
        raise PipelineError("finetuning requires a fully labeled dataset")

    train, val, test = stratified_split(labeled, cfg.split)
    ids = tuple(frozenset(s.subject_id for s in part) for part in (train, val, test))
    assert not (ids[0] & ids[1]) and not (ids[0] & ids[2]) and not (ids[1] & ids[2]), \
        "split produced overlapping folds"
    for name, part in zip(("train", "validation", "test"), (train, val, test)):
        if len(set(part.labels)) < 2:
            raise PipelineError(f"{name} fold ended up single-class; "
                                f"dataset too small for these fractions")

    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    init_rng = np.random.default_rng(seeds[0])
    order_rng = np.random.default_rng(seeds[1])

    params = init_encoder_params(encoder_cfg, init_rng)
    if encoder_ckpt is not None:
        _check_compatible(encoder_ckpt, params)
        params = {k: v.copy() for k, v in encoder_ckpt.items()}
    params.update(init_classifier_params(encoder_cfg, init_rng))

    optimizer = adam(lr=cfg.lr, weight_decay=cfg.weight_decay)
    best_auroc = -1.0
    best_epoch = -1
    best_params = {k: v.copy() for k, v in params.items()}
    log: list[tuple[int, float, float]] = []

    for epoch in range(1, cfg.epochs + 1):
        order = order_rng.permutation(len(train))
        loss_total = 0.0
        for batch_no, batch in enumerate(batched_indices(order, cfg.batch_size)):
            try:
                leaves = as_tensors(params)
                centers = gram_schmidt(leaves["readout.centers"])
                losses = []
                for idx in batch:
                    sample = train.samples[int(idx)]
                    logits = classify(
                        features(sample.connectome, leaves, encoder_cfg, centers=centers),
                        leaves)
                    losses.append(cross_entropy(logits, sample.label))
                batch_loss = stack(losses).mean()
                grads = backward(batch_loss, wrt=list(leaves.values()))
            except NonFiniteError as exc:
                raise PipelineError(
                    f"non-finite value during finetuning epoch {epoch} "
                    f"batch {batch_no}: {exc}") from exc

            named_grads = {name: grads[leaf].data for name, leaf in leaves.items()}
            if cfg.freeze_encoder:
                head = {k: v for k, v in params.items() if k.startswith("classifier.")}
                head_grads = {k: named_grads[k] for k in head}
                params = {**params, **opt_step(optimizer, head, head_grads)}
            else:
                params = opt_step(optimizer, params, named_grads)
            loss_total += batch_loss.item() * len(batch)

        val_auroc = auroc(score_dataset(val, params, encoder_cfg))
        log.append((epoch, loss_total / len(train), val_auroc))
        if val_auroc > best_auroc:
            best_auroc = val_auroc
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}

    test_scores = score_dataset(test, best_params, encoder_cfg)
    return FinetuneResult(
        params=best_params,
        best_epoch=best_epoch,
        epoch_log=tuple(log),
        test_scores=test_scores,
        test_metrics=summarize_scores(test_scores),
        split_ids=ids,
    )
