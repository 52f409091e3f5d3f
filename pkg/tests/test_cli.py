import csv

import numpy as np
import pytest

from braincl.cli import main

CONFIG = """
[model]
layers = 1
heads = 2
n_clusters = 4
proj_dim = 8

[augment]
k_min = 1
k_max = 3
delta_max = 0.2
noise = N(0,0.01)

[pretrain]
epochs = 2
lr = 0.02
batch_size = 8
queue_capacity = 16
momentum = 0.9

[finetune]
epochs = 2
lr = 0.001
weight_decay = 0.0001
batch_size = 8
repeats = 1
"""


@pytest.fixture()
def workdir(tmp_path):
    data = tmp_path / "data"
    assert main(["synth", "--out", str(data), "--n", "24", "--nodes", "10",
                 "--length", "12", "--blocks", "2", "--seed", "0"]) == 0
    config = tmp_path / "run.ini"
    config.write_text(CONFIG)
    return tmp_path


def test_synth_and_ingest(workdir, capsys):
    assert main(["ingest", "--data", str(workdir / "data")]) == 0
    out = capsys.readouterr().out
    assert "samples: 24" in out
    assert "nodes per sample: 10" in out
    assert "labeled: 24" in out


def test_synth_matrices_mode(tmp_path):
    out = tmp_path / "md"
    assert main(["synth", "--out", str(out), "--n", "4", "--nodes", "6",
                 "--length", "8", "--blocks", "2", "--matrices"]) == 0
    assert len(list(out.glob("*.conn.csv"))) == 4
    assert not list(out.glob("*.ts.csv"))


def test_augment_writes_views_and_diff(tmp_path):
    data = tmp_path / "md"
    main(["synth", "--out", str(data), "--n", "2", "--nodes", "8",
          "--length", "10", "--blocks", "2", "--matrices"])
    conn = sorted(data.glob("*.conn.csv"))[0]
    out = tmp_path / "aug"
    assert main(["augment", "--input", str(conn), "--out", str(out),
                 "--k-min", "1", "--k-max", "3", "--seed", "5"]) == 0
    assert (out / "view1.conn.csv").exists()
    assert (out / "view2.conn.csv").exists()
    with (out / "diff.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [r["view"] for r in rows] == ["view1", "view2"]
    assert all(int(r["entries_changed"]) > 0 for r in rows)


def test_pretrain_finetune_evaluate_roc_round_trip(workdir, capsys):
    data = str(workdir / "data")
    config = str(workdir / "run.ini")
    pre_out = workdir / "pre"
    assert main(["pretrain", "--data", data, "--config", config,
                 "--out", str(pre_out), "--seed", "1"]) == 0
    assert (pre_out / "pretrained.bnck").exists()
    log = (pre_out / "pretrain_log.csv").read_text().splitlines()
    assert log[0] == "epoch,loss_mean,queue_len,lr"
    assert len(log) == 3  # header + 2 epochs
    assert (pre_out / "config.resolved").exists()

    ft_out = workdir / "ft"
    assert main(["finetune", "--data", data, "--config", config,
                 "--ckpt", str(pre_out / "pretrained.bnck"),
                 "--out", str(ft_out), "--seed", "2"]) == 0
    report = (ft_out / "report.csv").read_text().splitlines()
    assert report[0] == "repeat,accuracy,auroc,sensitivity,specificity"
    assert report[-2].startswith("mean,")
    assert report[-1].startswith("std,")
    assert (ft_out / "report.json").exists()
    assert (ft_out / "model_repeat0.bnck").exists()
    assert (ft_out / "roc.svg").exists()

    ev_out = workdir / "ev"
    assert main(["evaluate", "--data", data,
                 "--model", str(ft_out / "model_repeat0.bnck"),
                 "--out", str(ev_out)]) == 0
    out = capsys.readouterr().out
    assert "auroc:" in out
    assert (ev_out / "scores.csv").exists()

    roc_out = workdir / "roc"
    assert main(["roc", "--scores", str(ft_out / "scores_repeat0.csv"),
                 "--out", str(roc_out)]) == 0
    svg = (roc_out / "roc.svg").read_text()
    assert svg.count("<polyline") == 1


def test_describe_from_config_and_checkpoint(workdir, capsys):
    assert main(["describe", "--config", str(workdir / "run.ini"),
                 "--nodes", "10"]) == 0
    out = capsys.readouterr().out
    assert "classifier" in out and "total" in out

    pre_out = workdir / "pre2"
    main(["pretrain", "--data", str(workdir / "data"),
          "--config", str(workdir / "run.ini"), "--out", str(pre_out)])
    assert main(["describe", "--ckpt", str(pre_out / "pretrained.bnck")]) == 0
    out = capsys.readouterr().out
    assert "n_nodes=10" in out
    assert "readout" in out


def test_ablate_emits_full_grid(workdir):
    # micro settings keep 12 cells fast; structural check only
    config = workdir / "ablate.ini"
    config.write_text(CONFIG.replace("epochs = 2", "epochs = 1"))
    out = workdir / "ab"
    assert main(["ablate", "--data", str(workdir / "data"),
                 "--config", str(config), "--out", str(out), "--seed", "0"]) == 0
    with (out / "ablation.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert {r["noise"] for r in rows} == {"none", "uniform(-0.1,0.1)",
                                          "N(0,0.1)", "N(0,0.01)"}
    assert {r["nodes_nominal"] for r in rows} == {"0~0", "5~20", "5~200"}
    assert all(r["auroc_mean"] for r in rows)


def test_cli_error_paths(tmp_path, capsys):
    assert main(["ingest", "--data", str(tmp_path / "missing")]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["describe"]) == 2
