import json

import pytest

from exoqelm.cli import main, parse_values
from exoqelm.errors import ConfigError
from exoqelm.forwardmodel import read_dataset


@pytest.fixture(scope="module")
def dataset_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "ds.csv"
    assert main(["generate", "--n", "200", "--seed", "7", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, dataset_file):
    out = tmp_path_factory.mktemp("runs") / "r1"
    assert main(["run", "--dataset", str(dataset_file), "--out", str(out)]) == 0
    return out


def test_generate_writes_rows_and_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["generate", "--n", "25", "--seed", "7", "--out", str(a)]) == 0
    assert "seed=7" in capsys.readouterr().out
    main(["generate", "--n", "25", "--seed", "7", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert len(read_dataset(a)) == 25


def test_generate_4080_rows(tmp_path):
    path = tmp_path / "d.csv"
    assert main(["generate", "--n", "4080", "--seed", "7", "--out", str(path)]) == 0
    assert len(path.read_text().splitlines()) == 4080 + 2


def test_generate_zero_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--n", "0"])
    assert exc.value.code == 2


def test_generate_refuses_overwrite(dataset_file):
    assert main(["generate", "--n", "5", "--out", str(dataset_file)]) == 3


def test_generate_default_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("EXOQELM_OUTPUT_ROOT", str(tmp_path))
    assert main(["generate", "--n", "3", "--seed", "1"]) == 0
    assert (tmp_path / "dataset_n3_seed1.csv").exists()


def test_run_artifacts(run_dir):
    for name in ("manifest.json", "bank.json", "weights.json", "metrics.csv", "metrics.json", "predictions.csv"):
        assert (run_dir / name).exists()
    metrics = json.loads((run_dir / "metrics.json").read_text())
    assert len(metrics["accuracy"]) == 7
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert set(manifest["seeds"]) >= {"dataset", "split", "reservoir", "sampling", "noise"}
    assert len(manifest["config_hash"]) == 64


def test_run_refuses_overwrite(run_dir, dataset_file):
    assert main(["run", "--dataset", str(dataset_file), "--out", str(run_dir)]) == 3


def test_manifest_replay_is_identical(run_dir, tmp_path):
    out = tmp_path / "replay"
    assert main(["run", "--manifest", str(run_dir / "manifest.json"), "--out", str(out)]) == 0
    assert (out / "metrics.json").read_bytes() == (run_dir / "metrics.json").read_bytes()
    a = json.loads((run_dir / "manifest.json").read_text())["checksums"]
    b = json.loads((out / "manifest.json").read_text())["checksums"]
    assert a == b


def test_finite_shot_replay_checksums(dataset_file, tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    main(["run", "--dataset", str(dataset_file), "--out", str(first), "--set", "reservoir.shots=300"])
    main(["run", "--manifest", str(first / "manifest.json"), "--out", str(second)])
    a = json.loads((first / "manifest.json").read_text())["checksums"]
    b = json.loads((second / "manifest.json").read_text())["checksums"]
    assert a == b


def test_run_config_errors(tmp_path, dataset_file):
    assert main(["run", "--dataset", str(dataset_file), "--out", str(tmp_path / "x"), "--set", "run.mode=hst"]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("not a dataset\n")
    assert main(["run", "--dataset", str(bad), "--out", str(tmp_path / "y")]) == 3


def test_run_numerical_failure(tmp_path, dataset_file):
    code = main(["run", "--dataset", str(dataset_file), "--out", str(tmp_path / "z"), "--set", "preprocess.pca.components=11"])
    assert code == 4


def test_report(run_dir, capsys):
    assert main(["report", str(run_dir)]) == 0
    out = capsys.readouterr().out
    rows = [line for line in out.splitlines() if line.split() and line.split()[0] in ("ch4", "co2", "co", "h2o", "mass", "radius", "temp")]
    assert len(rows) == 7
    boot = (run_dir / "report" / "bootstrap.csv").read_text().splitlines()
    assert len(boot) == 1 + 70
    assert (run_dir / "report" / "tolerance.csv").exists()


def test_report_empty_dir(tmp_path):
    assert main(["report", str(tmp_path)]) == 3


def test_sweep_threshold(dataset_file, tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--dataset", str(dataset_file), "--var", "threshold", "--values", "1,5,20", "--out", str(out)]) == 0
    rows = (out / "plot.csv").read_text().splitlines()[1:]
    acc = [[float(v) for v in r.split(",")[1:]] for r in rows]
    assert all(b >= a for r1, r2 in zip(acc, acc[1:]) for a, b in zip(r1, r2))
    assert sorted(p.name for p in out.iterdir() if p.is_dir()) == ["threshold=1.0", "threshold=20.0", "threshold=5.0"]


def test_sweep_shots_three_rows(dataset_file, tmp_path, capsys):
    out = tmp_path / "shots"
    assert main(["sweep", "--dataset", str(dataset_file), "--var", "shots", "--values", "1000,20000,inf", "--out", str(out)]) == 0
    assert len((out / "plot.csv").read_text().splitlines()) == 4
    fp = json.loads((out / "fingerprint.json").read_text())["fingerprints"]
    assert len(fp) == 3 and len(set(fp)) == 1


def test_sweep_invalid_variable(dataset_file, tmp_path):
    assert main(["sweep", "--dataset", str(dataset_file), "--var", "qubits", "--values", "1", "--out", str(tmp_path / "q")]) == 2


def test_parse_values():
    assert parse_values("M", "1..10") == list(range(1, 11))
    assert parse_values("shots", "1000,20000,inf") == [1000, 20000, None]
    assert parse_values("threshold", "0.5,5") == [0.5, 5.0]
    with pytest.raises(ConfigError):
        parse_values("M", "5..1")


def test_sweep_M_ten_points(dataset_file, tmp_path):
    out = tmp_path / "m"
    assert main(["sweep", "--dataset", str(dataset_file), "--var", "M", "--values", "1..10", "--out", str(out)]) == 0
    assert len([p for p in out.iterdir() if p.is_dir()]) == 10
    assert len((out / "plot.csv").read_text().splitlines()) == 11


def test_sweep_train_size(dataset_file, tmp_path):
    out = tmp_path / "t"
    assert main(["sweep", "--dataset", str(dataset_file), "--var", "train_size", "--values", "50,150", "--out", str(out)]) == 0
    assert len((out / "sweep.csv").read_text().splitlines()) == 1 + 2 * 7
