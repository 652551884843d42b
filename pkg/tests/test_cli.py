import json

import numpy as np
import pytest

from pdn import data as data_mod
from pdn.checkpoint import save_checkpoint
from pdn.cli import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main, wide_bandgap_target
from pdn.forward import FrequencyGrid, StructureGeometry, spectrum

from test_inverse import make_model

SMALL_GRID_ARGS = [
    "--set", "grid.start_hz=100", "--set", "grid.step_hz=450", "--set", "grid.count=3",
]


def test_generate_grid_counts(tmp_path, capsys):
    out = tmp_path / "corpus.pdn"
    code = main(
        ["generate", "--out", str(out), "--levels", "4", "--layers", "5", *SMALL_GRID_ARGS]
    )
    assert code == EXIT_OK
    assert "1024 samples" in capsys.readouterr().out
    assert data_mod.load(out).n_samples == 1024


def test_generate_eight_levels_is_paper_scale(tmp_path, capsys):
    out = tmp_path / "corpus.pdn"
    code = main(
        ["generate", "--out", str(out), "--levels", "8", "--layers", "5", *SMALL_GRID_ARGS]
    )
    assert code == EXIT_OK
    assert "32768 samples" in capsys.readouterr().out


def test_generate_rerun_bit_identical(tmp_path):
    a, b = tmp_path / "a.pdn", tmp_path / "b.pdn"
    for out in (a, b):
        assert main(
            ["generate", "--out", str(out), "--levels", "3", "--layers", "3", *SMALL_GRID_ARGS]
        ) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_generate_random_kind(tmp_path):
    out = tmp_path / "test.pdn"
    code = main(
        [
            "generate", "--out", str(out), "--kind", "random", "--count", "50",
            "--seed", "3", "--layers", "3", *SMALL_GRID_ARGS,
        ]
    )
    assert code == EXIT_OK
    loaded = data_mod.load(out)
    assert loaded.n_samples == 50
    assert loaded.kind == "random"


def test_unknown_config_key_is_usage_error(tmp_path):
    code = main(
        ["generate", "--out", str(tmp_path / "x.pdn"), "--set", "grid.wavelength=3"]
    )
    assert code == EXIT_USAGE


def test_unknown_flag_is_usage_error():
    assert main(["generate", "--nope"]) == EXIT_USAGE


def test_config_file_round_trip(tmp_path):
    config_path = tmp_path / "run.json"
    config_path.write_text(
        json.dumps({"grid": {"start_hz": 100.0, "step_hz": 450.0, "count": 3}, "threads": 2})
    )
    out = tmp_path / "c.pdn"
    code = main(
        ["generate", "--config", str(config_path), "--out", str(out), "--levels", "2",
         "--layers", "2"]
    )
    assert code == EXIT_OK
    assert data_mod.load(out).grid == FrequencyGrid(100.0, 450.0, 3)


def test_config_file_unknown_section(tmp_path):
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps({"gird": {}}))
    assert main(["selftest", "--config", str(config_path)]) == EXIT_USAGE


def test_train_writes_checkpoint_and_log(tmp_path):
    corpus_path = tmp_path / "corpus.pdn"
    grid_args = [
        "--set", "grid.start_hz=200", "--set", "grid.step_hz=300", "--set", "grid.count=16",
    ]
    assert main(
        ["generate", "--out", str(corpus_path), "--levels", "3", "--layers", "3", *grid_args]
    ) == EXIT_OK
    ckpt = tmp_path / "model.json"
    log = tmp_path / "log.csv"
    code = main(
        [
            "train", *grid_args,
            "--set", "network.hidden_layers=[16]",
            "--set", "network.components=4",
            "--data", str(corpus_path), "--out", str(ckpt),
            "--log", str(log), "--epochs", "5",
        ]
    )
    assert code == EXIT_OK
    assert json.loads(ckpt.read_text())["schema"] == "pdn-checkpoint-v1"
    lines = log.read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert len(lines) == 2 + 6


def test_design_from_structure_recovers_and_reports(tmp_path, capsys):
    truth = np.array([13.0, 3.5, 8.0, 5.0, 11.0])
    model = make_model([truth, truth[::-1]], sigma=0.03)
    ckpt = tmp_path / "model.json"
    save_checkpoint(model, ckpt)
    report = tmp_path / "report.json"
    grid_args = [
        "--set", "grid.start_hz=100", "--set", "grid.step_hz=450", "--set", "grid.count=11",
    ]
    code = main(
        [
            "design", *grid_args, "--checkpoint", str(ckpt),
            "--from-structure", "13.0,3.5,8.0,5.0,11.0", "--out", str(report),
        ]
    )
    assert code == EXIT_OK
    doc = json.loads(report.read_text())
    assert doc["schema"] == "pdn-report-v1"
    assert doc["target_source"].startswith("structure:")
    assert len(doc["candidates"]) == 2
    found = {tuple(np.round(c["radii_mm"], 5)) for c in doc["candidates"]}
    assert tuple(np.round(truth, 5)) in found
    assert tuple(np.round(truth[::-1], 5)) in found
    assert all(c["quality_factor"] > 0.99 for c in doc["candidates"])


def test_design_missing_target_file(tmp_path):
    model = make_model([[4.0, 9.0, 13.0, 6.0, 3.0]])
    ckpt = tmp_path / "model.json"
    save_checkpoint(model, ckpt)
    code = main(
        ["design", "--checkpoint", str(ckpt), "--target", str(tmp_path / "missing.csv"),
         "--out", str(tmp_path / "r.json")]
    )
    assert code == EXIT_DATA


def test_design_wrong_target_length(tmp_path, capsys):
    model = make_model([[4.0, 9.0, 13.0, 6.0, 3.0]])
    ckpt = tmp_path / "model.json"
    save_checkpoint(model, ckpt)
    bad = tmp_path / "bad.csv"
    bad.write_text("0.5\n" * 7)
    code = main(
        ["design", "--checkpoint", str(ckpt), "--target", str(bad),
         "--out", str(tmp_path / "r.json")]
    )
    assert code == EXIT_DATA
    assert "expected 11" in capsys.readouterr().err


def test_design_builtin_target_with_viz(tmp_path):
    truth = np.array([13.0, 3.5, 8.0, 5.0, 11.0])
    third = np.array([4.0, 12.0, 6.0, 9.0, 7.0])
    model = make_model([truth, truth[::-1], third], sigma=0.05)
    ckpt = tmp_path / "model.json"
    save_checkpoint(model, ckpt)
    report = tmp_path / "report.json"
    viz = tmp_path / "map"
    code = main(
        ["design", "--checkpoint", str(ckpt), "--builtin", "wide-bandgap",
         "--out", str(report), "--viz", str(viz), "--viz-resolution", "24"]
    )
    assert code == EXIT_OK
    assert (tmp_path / "map.csv").exists()
    assert "<svg" in (tmp_path / "map.svg").read_text()


def test_design_report_deterministic(tmp_path):
    truth = np.array([13.0, 3.5, 8.0, 5.0, 11.0])
    model = make_model([truth, truth[::-1]], sigma=0.03)
    ckpt = tmp_path / "model.json"
    save_checkpoint(model, ckpt)
    reports = []
    for name in ("r1.json", "r2.json"):
        path = tmp_path / name
        assert main(
            ["design", "--checkpoint", str(ckpt), "--builtin", "wide-bandgap",
             "--out", str(path)]
        ) == EXIT_OK
        reports.append(path.read_bytes())
    assert reports[0] == reports[1]


def test_evaluate_writes_annotated_csv(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    code = main(["evaluate", "--structure", "14.5,14.5,14.5,14.5,14.5", "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "frequency_hz,transmittance"
    assert len(lines) == 251
    values = np.array([float(line.split(",")[1]) for line in lines[1:]])
    assert np.max(np.abs(values - 1.0)) < 1e-12


def test_evaluate_bare_positional_csv(tmp_path):
    out = tmp_path / "spec.csv"
    code = main(
        ["evaluate", "--structure", "4.0,9.0,14.0", "--out", str(out), "--bare",
         "--set", "geometry.layers=3"]
    )
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 250
    parsed = np.array([float(v) for v in lines])
    s = StructureGeometry((4.0, 9.0, 14.0))
    assert np.array_equal(parsed, spectrum(s))


def test_evaluate_with_target_prints_quality(tmp_path, capsys):
    target_path = tmp_path / "target.csv"
    target_path.write_text("\n".join("0.0" for _ in range(250)) + "\n")
    out = tmp_path / "spec.csv"
    code = main(
        ["evaluate", "--structure", "14.5,14.5,14.5,14.5,14.5", "--out", str(out),
         "--target", str(target_path)]
    )
    assert code == EXIT_OK
    text = capsys.readouterr().out
    mse = float(text.split("mse=")[1].splitlines()[0])
    qf = float(text.split("quality_factor=")[1].splitlines()[0])
    assert abs(mse - 1.0) < 1e-12
    assert abs(qf - 0.5) < 1e-12


def test_evaluate_rejects_bad_structure():
    assert main(["evaluate", "--structure", "-3,4,5,6,7", "--out", "x.csv"]) == EXIT_USAGE


def test_selftest_passes(capsys):
    assert main(["selftest"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("[pass]") >= 5
    assert "[FAIL]" not in out


def test_wide_bandgap_target_shape():
    grid = FrequencyGrid()
    target = wide_bandgap_target(grid)
    f = grid.frequencies()
    assert target.shape == (250,)
    assert np.all((target >= 0.0) & (target <= 1.0))
    assert np.max(np.abs(target[(f >= 1500) & (f <= 3500)] - 0.05)) < 1e-12
    assert np.all(target[f <= 1100] == 1.0)
    assert np.all(target[f >= 3900] == 1.0)
