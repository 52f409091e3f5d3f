import filecmp
from dataclasses import replace

import numpy as np
import pytest

from braincl.augment import AugmentConfig, NoiseSpec
from braincl.data import ClassSpec, synth_dataset
from braincl.model import EncoderConfig, init_encoder_params, init_projection_params
from braincl.pipeline import (
    ExperimentConfig,
    FinetuneConfig,
    PipelineError,
    PretrainConfig,
    finetune,
    fingerprint,
    load_config,
    load_encoder_checkpoint,
    pretrain,
    resolved_text,
    run_experiment,
    save_encoder_checkpoint,
    write_report,
)

ECFG = EncoderConfig(n_nodes=10, layers=1, heads=2, n_clusters=4, proj_dim=8)
AUG = AugmentConfig(k_min=1, k_max=3, delta_max=0.2, noise=NoiseSpec(sigma=0.01))


def tiny_ds(seed=0, separation=1.0, n=24):
    return synth_dataset(n, n_nodes=10, length=12,
                         spec=ClassSpec(separation=separation, blocks=2), seed=seed)


def tiny_experiment(repeats=1, pre_epochs=1, ft_epochs=2) -> ExperimentConfig:
    return ExperimentConfig(
        encoder=ECFG,
        augment=AUG,
        pretrain=PretrainConfig(epochs=pre_epochs, lr=0.01, batch_size=8,
                                queue_capacity=32, momentum=0.9, seed=3),
        finetune=FinetuneConfig(epochs=ft_epochs, lr=1e-3, weight_decay=1e-4,
                                batch_size=8, repeats=repeats, seed=5),
    )


# ---------------------------------------------------------------------------
# pretrain


def test_pretrain_zero_epochs_returns_initialization():
    ds = tiny_ds()
    cfg = PretrainConfig(epochs=0, lr=0.01, batch_size=8, seed=7)
    result = pretrain(ds, ECFG, cfg, AUG)
    assert result.epoch_log == ()

    init_rng = np.random.default_rng(np.random.SeedSequence(7).spawn(3)[0])
    expected = init_encoder_params(ECFG, init_rng)
    expected.update(init_projection_params(ECFG, init_rng))
    for name, arr in result.encoder_params.items():
        np.testing.assert_array_equal(arr, expected[name])


def test_pretrain_deterministic_given_seed():
    ds = tiny_ds()
    cfg = PretrainConfig(epochs=2, lr=0.02, batch_size=8, queue_capacity=16,
                         momentum=0.9, seed=11)
    a = pretrain(ds, ECFG, cfg, AUG)
    b = pretrain(ds, ECFG, cfg, AUG)
    assert a.epoch_log == b.epoch_log
    for name in a.encoder_params:
        assert np.array_equal(a.encoder_params[name], b.encoder_params[name])
    c = pretrain(ds, ECFG, replace(cfg, seed=12), AUG)
    assert any(not np.array_equal(a.encoder_params[n], c.encoder_params[n])
               for n in a.encoder_params)


def test_pretrain_log_schema_and_queue_growth():
    ds = tiny_ds()
    cfg = PretrainConfig(epochs=3, lr=0.02, batch_size=8, queue_capacity=16,
                         momentum=0.9, seed=1)
    result = pretrain(ds, ECFG, cfg, AUG)
    assert len(result.epoch_log) == 3
    epochs = [row[0] for row in result.epoch_log]
    assert epochs == [0, 1, 2]
    queue_lens = [row[2] for row in result.epoch_log]
    assert queue_lens == [16, 16, 16]  # capacity reached within first epoch
    assert all(row[3] == 0.02 for row in result.epoch_log)
    assert set(result.projection_params) == {"project.w1", "project.b1",
                                             "project.w2", "project.b2"}
    assert not any(k.startswith("project.") for k in result.encoder_params)


def test_pretrain_rejects_empty_dataset():
    from braincl.data import Dataset
    with pytest.raises(PipelineError):
        pretrain(Dataset(()), ECFG, PretrainConfig(epochs=1), AUG)


# ---------------------------------------------------------------------------
# finetune


def test_finetune_single_epoch_selects_it():
    ds = tiny_ds()
    cfg = FinetuneConfig(epochs=1, lr=1e-3, batch_size=8, repeats=1, seed=2)
    result = finetune(ds, None, ECFG, cfg)
    assert result.best_epoch == 1
    assert len(result.epoch_log) == 1


def test_finetune_fold_isolation():
    ds = tiny_ds(n=40)
    cfg = FinetuneConfig(epochs=2, lr=1e-3, batch_size=8, repeats=1, seed=4)
    result = finetune(ds, None, ECFG, cfg)
    train_ids, val_ids, test_ids = result.split_ids
    assert not train_ids & val_ids
    assert not train_ids & test_ids
    assert not val_ids & test_ids
    assert train_ids | val_ids | test_ids == {s.subject_id for s in ds}


def test_finetune_requires_labels_and_compatible_checkpoint():
    from braincl.data import Dataset, Sample
    ds = tiny_ds()
    stripped = Dataset(tuple(Sample(s.subject_id, s.connectome) for s in ds))
    cfg = FinetuneConfig(epochs=1, lr=1e-3, batch_size=8, repeats=1)
    with pytest.raises(PipelineError):
        finetune(stripped, None, ECFG, cfg)

    wrong = init_encoder_params(
        EncoderConfig(n_nodes=10, layers=1, heads=2, n_clusters=3, proj_dim=8),
        np.random.default_rng(0))
    with pytest.raises(PipelineError, match="incompatible checkpoint"):
        finetune(ds, wrong, ECFG, cfg)


def test_finetune_aborts_on_non_finite_checkpoint():
    ds = tiny_ds()
    cfg = FinetuneConfig(epochs=1, lr=1e-3, batch_size=8, repeats=1)
    broken = init_encoder_params(ECFG, np.random.default_rng(1))
    broken["embed.w"] = broken["embed.w"].copy()
    broken["embed.w"][0, 0] = np.inf
    with pytest.raises(PipelineError, match="non-finite"):
        finetune(ds, broken, ECFG, cfg)


def test_freeze_encoder_leaves_encoder_untouched():
    ds = tiny_ds()
    ckpt = init_encoder_params(ECFG, np.random.default_rng(2))
    cfg = FinetuneConfig(epochs=2, lr=1e-3, batch_size=8, repeats=1,
                         freeze_encoder=True, seed=6)
    result = finetune(ds, ckpt, ECFG, cfg)
    for name, arr in ckpt.items():
        np.testing.assert_array_equal(result.params[name], arr)
    trained = finetune(ds, ckpt, ECFG, replace(cfg, freeze_encoder=False))
    assert any(not np.array_equal(trained.params[n], ckpt[n]) for n in ckpt)


# ---------------------------------------------------------------------------
# experiment protocol


def test_single_repeat_std_is_zero():
    report, results, _ = run_experiment(tiny_ds(), tiny_experiment(repeats=1))
    assert all(report.std[m] == 0.0 for m in report.std)
    assert len(results) == 1
    assert report.seeds == (5,)


def test_repeats_use_distinct_derived_seeds_and_splits():
    report, results, _ = run_experiment(tiny_ds(n=40), tiny_experiment(repeats=3))
    assert report.seeds == (5, 6, 7)
    test_folds = [frozenset(r.split_ids[2]) for r in results]
    assert len(set(test_folds)) > 1  # reshuffled per repeat


def test_experiment_regeneration_is_byte_identical(tmp_path):
    ds = tiny_ds(n=32)
    cfg = tiny_experiment(repeats=2)
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    for out in (out1, out2):
        report, results, pre = run_experiment(ds, cfg)
        write_report(out, report, results, cfg, pre)
    files = sorted(p.name for p in out1.iterdir())
    assert files == sorted(p.name for p in out2.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(out1, out2, files, shallow=False)
    assert mismatch == [] and errors == []
    assert "report.csv" in files and "report.json" in files
    assert "config.resolved" in files and "pretrained.bnck" in files


def test_report_json_carries_full_scale_reference(tmp_path):
    import json
    ds = tiny_ds()
    cfg = tiny_experiment(repeats=1)
    report, results, pre = run_experiment(ds, cfg)
    write_report(tmp_path, report, results, cfg, pre)
    payload = json.loads((tmp_path / "report.json").read_text())
    ref = payload["reference"]
    assert ref["auroc"] == {"mean": 82.6, "std": 1.8}
    assert ref["accuracy"] == {"mean": 74.4, "std": 2.4}
    assert ref["sensitivity"] == {"mean": 66.9, "std": 8.3}
    assert ref["specificity"] == {"mean": 81.7, "std": 3.6}
    assert "ABIDE" in ref["dataset"]
    assert payload["config_fingerprint"] == report.config_fingerprint
    assert payload["rng"] == "numpy PCG64"


def test_experiment_with_supplied_checkpoint_skips_pretraining():
    ds = tiny_ds()
    ckpt = init_encoder_params(ECFG, np.random.default_rng(3))
    report, results, pre = run_experiment(ds, tiny_experiment(repeats=1),
                                          encoder_ckpt=ckpt)
    assert pre is None
    assert len(results) == 1


def test_partially_labeled_data_pretrains_on_everything():
    from braincl.data import Dataset, Sample
    ds = tiny_ds(n=32)
    # strip labels from a quarter of the samples; they still feed pretraining
    samples = [Sample(s.subject_id, s.connectome) if i % 4 == 0 else s
               for i, s in enumerate(ds)]
    mixed = Dataset(tuple(samples))
    report, results, pre = run_experiment(mixed, tiny_experiment(repeats=1))
    assert pre is not None
    labeled_ids = {s.subject_id for s in mixed if s.label is not None}
    train_ids, val_ids, test_ids = results[0].split_ids
    assert train_ids | val_ids | test_ids == labeled_ids


def test_train_only_scope_runs():
    ds = tiny_ds(n=40)
    cfg = replace(tiny_experiment(repeats=1), pretrain_scope="train_only")
    report, results, pre = run_experiment(ds, cfg)
    assert pre is None  # per-repeat pretraining, no shared checkpoint
    assert len(results) == 1


# ---------------------------------------------------------------------------
# config files


def test_config_defaults_scale_to_small_data():
    cfg = load_config(None, n_nodes=10)
    assert cfg.encoder.n_clusters == 10
    assert cfg.augment.k_max == 10
    assert cfg.pretrain.epochs == 900  # full-scale default preserved
    assert cfg.finetune.epochs == 200
    assert cfg.finetune.lr == 5e-5
    assert cfg.pretrain.lr == 1e-5


def test_config_file_round_trip(tmp_path):
    text = """
[model]
layers = 1
heads = 2
n_clusters = 4
proj_dim = 8

[augment]
k_min = 1
k_max = 3
noise = uniform(-0.1,0.1)

[pretrain]
epochs = 5
lr = 0.01
batch_size = 8

[finetune]
epochs = 3
repeats = 2
seed = 9
"""
    path = tmp_path / "run.ini"
    path.write_text(text)
    cfg = load_config(path, n_nodes=10)
    assert cfg.encoder.layers == 1
    assert cfg.augment.noise.kind == "uniform"
    assert cfg.pretrain.epochs == 5
    assert cfg.finetune.repeats == 2
    assert cfg.finetune.split.seed == 9

    # resolved text parses back to an identical resolved text
    resolved = resolved_text(cfg)
    again = load_config(None, n_nodes=10, text=resolved)
    assert resolved_text(again) == resolved
    assert fingerprint(again) == fingerprint(cfg)


def test_config_rejects_mismatched_pinned_nodes(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[model]\nn_nodes = 16\n")
    with pytest.raises(ValueError, match="n_nodes"):
        load_config(path, n_nodes=10)


def test_with_seed_rewires_all_seeds():
    cfg = tiny_experiment().with_seed(42)
    assert cfg.pretrain.seed == 42
    assert cfg.finetune.seed == 42
    assert cfg.finetune.split.seed == 42


# ---------------------------------------------------------------------------
# encoder checkpoint files


def test_encoder_checkpoint_round_trip(tmp_path):
    arrays = init_encoder_params(ECFG, np.random.default_rng(4))
    path = tmp_path / "enc.bnck"
    save_encoder_checkpoint(path, arrays, ECFG)
    loaded, meta = load_encoder_checkpoint(path)
    assert meta["n_nodes"] == 10
    assert meta["n_clusters"] == 4
    for name in arrays:
        np.testing.assert_array_equal(loaded[name], arrays[name])
