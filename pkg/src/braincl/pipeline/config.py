"""Run configuration: dataclasses, the key=value config file, fingerprints.

One INI-style file mirrors the config types section by section. Every run
resolves its configuration (data-derived node count, CLI seed overrides)
into a canonical text form that is written next to the run artifacts; its
SHA-256 is the config fingerprint recorded in reports.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, replace

from ..augment import AugmentConfig, NoiseSpec
from ..data import SplitSpec
from ..model import EncoderConfig

__all__ = ["PretrainConfig", "FinetuneConfig", "ExperimentConfig",
           "load_config", "resolved_text", "fingerprint"]


@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 900
    lr: float = 1e-5
    batch_size: int = 64
    queue_capacity: int = 512
    momentum: float = 0.999
    temperature: float = 0.07
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class FinetuneConfig:
    epochs: int = 200
    lr: float = 5e-5
    weight_decay: float = 5e-5
    batch_size: int = 64
    repeats: int = 5
    split: SplitSpec = field(default_factory=SplitSpec)
    freeze_encoder: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.repeats < 1:
            raise ValueError("epochs, batch_size and repeats must be positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    encoder: EncoderConfig
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)
    pretrain_scope: str = "all"  # "all" (transductive, as published) | "train_only"

    def __post_init__(self):
        if self.pretrain_scope not in ("all", "train_only"):
            raise ValueError("pretrain_scope must be 'all' or 'train_only'")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self,
                       pretrain=replace(self.pretrain, seed=seed),
                       finetune=replace(self.finetune,
                                        seed=seed,
                                        split=replace(self.finetune.split, seed=seed)))


# ---------------------------------------------------------------------------
# parsing


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    if cast is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return cast(raw)


def load_config(path=None, *, n_nodes: int, text: str | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from an optional INI file.

    ``n_nodes`` comes from the dataset; a file may pin it for validation.
    Missing sections and keys fall back to the dataclass defaults.
    """
    parser = configparser.ConfigParser()
    if text is not None:
        parser.read_string(text)
    elif path is not None:
        with open(path) as fh:
            parser.read_file(fh)

    if parser.has_option("model", "n_nodes"):
        pinned = parser.getint("model", "n_nodes")
        if pinned != n_nodes:
            raise ValueError(f"config pins n_nodes={pinned} but data has {n_nodes}")

    d_model = _get(parser, "model", "d_model", int, None)
    ffn_dim = _get(parser, "model", "ffn_dim", int, None)
    width = d_model if d_model is not None else n_nodes
    # unspecified head/cluster/node-count defaults scale down with small V;
    # explicit values still validate strictly
    default_heads = next(h for h in (4, 2, 1) if width % h == 0)
    encoder = EncoderConfig(
        n_nodes=n_nodes,
        layers=_get(parser, "model", "layers", int, 2),
        heads=_get(parser, "model", "heads", int, default_heads),
        d_model=d_model,
        ffn_dim=ffn_dim,
        n_clusters=_get(parser, "model", "n_clusters", int, min(100, width)),
        cluster_dim=_get(parser, "model", "cluster_dim", int, 8),
        proj_dim=_get(parser, "model", "proj_dim", int, 128),
    )
    default_k_max = min(20, n_nodes)
    augment = AugmentConfig(
        k_min=_get(parser, "augment", "k_min", int, min(5, default_k_max)),
        k_max=_get(parser, "augment", "k_max", int, default_k_max),
        delta_max=_get(parser, "augment", "delta_max", float, 0.5),
        noise=NoiseSpec.parse(_get(parser, "augment", "noise", str, "N(0,0.01)")),
    )
    pretrain = PretrainConfig(
        epochs=_get(parser, "pretrain", "epochs", int, 900),
        lr=_get(parser, "pretrain", "lr", float, 1e-5),
        batch_size=_get(parser, "pretrain", "batch_size", int, 64),
        queue_capacity=_get(parser, "pretrain", "queue_capacity", int, 512),
        momentum=_get(parser, "pretrain", "momentum", float, 0.999),
        temperature=_get(parser, "pretrain", "temperature", float, 0.07),
        seed=_get(parser, "pretrain", "seed", int, 0),
    )
    split = SplitSpec(
        train=_get(parser, "finetune", "train_fraction", float, 0.70),
        val=_get(parser, "finetune", "val_fraction", float, 0.10),
        test=_get(parser, "finetune", "test_fraction", float, 0.20),
        seed=_get(parser, "finetune", "seed", int, 0),
    )
    finetune = FinetuneConfig(
        epochs=_get(parser, "finetune", "epochs", int, 200),
        lr=_get(parser, "finetune", "lr", float, 5e-5),
        weight_decay=_get(parser, "finetune", "weight_decay", float, 5e-5),
        batch_size=_get(parser, "finetune", "batch_size", int, 64),
        repeats=_get(parser, "finetune", "repeats", int, 5),
        split=split,
        freeze_encoder=_get(parser, "finetune", "freeze_encoder", bool, False),
        seed=_get(parser, "finetune", "seed", int, 0),
    )
    return ExperimentConfig(
        encoder=encoder, augment=augment, pretrain=pretrain, finetune=finetune,
        pretrain_scope=_get(parser, "experiment", "pretrain_scope", str, "all"),
    )


def resolved_text(cfg: ExperimentConfig) -> str:
    """Canonical INI dump of every resolved value."""
    parser = configparser.ConfigParser()
    enc = cfg.encoder
    parser["model"] = {
        "n_nodes": str(enc.n_nodes),
        "layers": str(enc.layers),
        "heads": str(enc.heads),
        "d_model": str(enc.width),
        "ffn_dim": str(enc.ffn_width),
        "n_clusters": str(enc.n_clusters),
        "cluster_dim": str(enc.cluster_dim),
        "proj_dim": str(enc.proj_dim),
    }
    parser["augment"] = {
        "k_min": str(cfg.augment.k_min),
        "k_max": str(cfg.augment.k_max),
        "delta_max": repr(cfg.augment.delta_max),
        "noise": str(cfg.augment.noise),
    }
    parser["pretrain"] = {
        "epochs": str(cfg.pretrain.epochs),
        "lr": repr(cfg.pretrain.lr),
        "batch_size": str(cfg.pretrain.batch_size),
        "queue_capacity": str(cfg.pretrain.queue_capacity),
        "momentum": repr(cfg.pretrain.momentum),
        "temperature": repr(cfg.pretrain.temperature),
        "seed": str(cfg.pretrain.seed),
    }
    parser["finetune"] = {
        "epochs": str(cfg.finetune.epochs),
        "lr": repr(cfg.finetune.lr),
        "weight_decay": repr(cfg.finetune.weight_decay),
        "batch_size": str(cfg.finetune.batch_size),
        "repeats": str(cfg.finetune.repeats),
        "train_fraction": repr(cfg.finetune.split.train),
        "val_fraction": repr(cfg.finetune.split.val),
        "test_fraction": repr(cfg.finetune.split.test),
        "freeze_encoder": str(cfg.finetune.freeze_encoder).lower(),
        "seed": str(cfg.finetune.seed),
    }
    parser["experiment"] = {
        "pretrain_scope": cfg.pretrain_scope,
        "rng": "numpy PCG64",
    }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def fingerprint(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(resolved_text(cfg).encode("utf-8")).hexdigest()
