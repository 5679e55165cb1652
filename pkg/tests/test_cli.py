import json
import shutil
import subprocess
import sys

import pytest

from emoshift.cli import main
from emoshift.corpus import EMOTION_CODES, read_manifest
from emoshift.harness import read_grid_csv, load_audit


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "corpus"
    assert main(["synth", "--out", str(out), "--clips", "3", "--duration", "0.3", "--seed", "5"]) == 0
    return out


def test_synth_counts(synth_dir):
    wavs = sorted(synth_dir.glob("*.wav"))
    assert len(wavs) == 2 * 2 * 3 * 3
    assert (synth_dir / "manifest.csv").exists()


def test_synth_default_spec_count(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--clips", "5", "--duration", "0.1"]) == 0
    assert len(list(tmp_path.glob("*.wav"))) == 60
    assert "60 clips" in capsys.readouterr().out


def test_synth_is_byte_identical(tmp_path):
    args = ["--clips", "2", "--duration", "0.2", "--seed", "9"]
    main(["synth", "--out", str(tmp_path / "a"), *args])
    main(["synth", "--out", str(tmp_path / "b"), *args])
    a = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert a == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_ingest_summary_and_equivalence(synth_dir, tmp_path, capsys):
    m1 = tmp_path / "listing.manifest"
    assert main(["ingest", str(synth_dir / "manifest.csv"), "--out", str(m1)]) == 0
    out = capsys.readouterr().out
    assert "36 clips, 4 speakers, 3 emotions" in out
    assert "per speaker:" in out
    synthetic = read_manifest(m1)

    # the same audio under corpus-style names, once as a directory and once as a listing
    letter = {v: k for k, v in EMOTION_CODES.items()}
    speaker = {"m01": "03", "m02": "10", "f01": "08", "f02": "09"}
    emo = tmp_path / "emo"
    emo.mkdir()
    rows = ["path,speaker,gender,emotion"]
    for e in synthetic.entries:
        spk = speaker[e.meta.speaker_id]
        name = f"{spk}a0{e.path.stem[-1]}{letter[e.meta.emotion]}a.wav"
        shutil.copy(e.path, emo / name)
        rows.append(f"{name},{spk},{e.meta.gender},{e.meta.emotion}")
    (emo / "list.csv").write_text("\n".join(rows) + "\n")
    a, b = tmp_path / "dir.manifest", tmp_path / "csv.manifest"
    assert main(["ingest", str(emo), "--out", str(a)]) == 0
    assert main(["ingest", str(emo / "list.csv"), "--out", str(b)]) == 0
    ma, mb = read_manifest(a), read_manifest(b)
    assert len(ma) == 36
    key = lambda m: sorted((str(e.path.resolve()), e.meta.speaker_id, e.meta.gender, e.meta.emotion)
                           for e in m.entries)
    assert key(ma) == key(mb)


def test_ingest_empty_dir_fails(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["ingest", str(tmp_path / "empty"), "--out", str(tmp_path / "x.manifest")]) != 0
    assert "empty" in capsys.readouterr().err
    assert not (tmp_path / "x.manifest").exists()


def test_run_prints_ef(synth_dir, tmp_path, capsys):
    out = tmp_path / "res"
    rc = main(["run", "--corpus", str(synth_dir / "manifest.csv"), "--out", str(out),
               "-R", "4", "-S", "1/4", "-K", "0.75"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "enlargement factor: 29" in text
    assert "test error:" in text and "train error" in text
    (rec,) = out.glob("run_*.json")
    data = json.loads(rec.read_text())
    assert data["enlargement_factor"] == 29 and len(data["folds"]) == 4
    assert 0 <= data["test_error"] <= 1


def test_run_rejects_zero_step_before_work(synth_dir, tmp_path, capsys):
    out = tmp_path / "never"
    rc = main(["run", "--corpus", str(synth_dir / "manifest.csv"), "--out", str(out), "-S", "0"])
    assert rc == 2
    assert "step" in capsys.readouterr().err
    assert not out.exists()


@pytest.mark.parametrize(
    "extra",
    [["--classifier", "linear", "--ridge", "-1"], ["--jobs", "0"], ["--filters", "10", "--coefficients", "12"],
     ["--corpus", "synth:1,x"]],
)
def test_run_config_errors(tmp_path, extra):
    args = ["run", "--corpus", "unused", "--out", str(tmp_path / "o"), *extra]
    if extra[0] == "--corpus":
        args = ["run", "--out", str(tmp_path / "o"), *extra]
    assert main(args) == 2
    assert not (tmp_path / "o").exists()


def test_config_file_and_override(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"corpus": str(synth_dir / "manifest.csv"), "policy": {"R": 1, "S": "1/2", "K": 1},
                               "out": str(tmp_path / "o")}))
    assert main(["run", "--config", str(cfg), "-R", "2"]) == 0
    assert "enlargement factor: 9" in capsys.readouterr().out
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["run", "--config", str(cfg)]) == 2


def test_sweep_csvs_and_resume(synth_dir, tmp_path, capsys):
    out = tmp_path / "sweep"
    args = ["sweep", "--corpus", str(synth_dir / "manifest.csv"), "--out", str(out),
            "--cache", str(tmp_path / "cache"), "--ranges", "0,0.5,1", "--steps", "1/2,1",
            "--classifiers", "linear"]
    assert main(args) == 0
    r, s, cells = read_grid_csv(out / "test_error_linear_K0.75.csv")
    assert r == [0, 0.5, 1] and s == [0.5, 1]
    assert all(0 <= float(v) <= 1 for row in cells for v in row)
    _, _, ef = read_grid_csv(out / "enlargement_factor_K0.75.csv")
    assert ef == [["1", "2", "4"], ["1", "1", "2"]]
    audit = out / "sweep_audit.jsonl"
    before = audit.read_text()
    assert len(load_audit(audit)) == 6

    # interrupted sweep: drop the last cell, rerun, only that cell is appended
    lines = before.splitlines()
    audit.write_text("\n".join(lines[:-1]) + "\n")
    capsys.readouterr()
    assert main(args) == 0
    after = audit.read_text().splitlines()
    assert after[:-1] == lines[:-1]
    assert json.loads(after[-1])["cell"] == json.loads(lines[-1])["cell"]
    assert json.loads(after[-1])["test_error"] == json.loads(lines[-1])["test_error"]

    # re-render tables from the audit alone
    rep = tmp_path / "rep"
    assert main(["report", str(out), "--out", str(rep)]) == 0
    assert (rep / "test_error_linear_K0.75.csv").read_text() == (out / "test_error_linear_K0.75.csv").read_text()


def test_report_missing_audit(tmp_path):
    assert main(["report", str(tmp_path)]) == 2


def test_ef_table(tmp_path, capsys):
    assert main(["ef", "--out", str(tmp_path)]) == 0
    captured = capsys.readouterr()
    lines = captured.out.splitlines()
    assert len(lines) == 8 and lines[0].startswith("S\\R,0,0.5")
    assert lines[2].split(",")[lines[0].split(",").index("4")] == "113"
    assert "18 cells" in captured.err
    r, s, cells = read_grid_csv(tmp_path / "enlargement_factor_K0.75.csv")
    assert len(cells) == 7 and all(len(row) == 10 for row in cells)


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "emoshift.cli", "ef", "--ranges", "4", "--steps", "1/4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1] == "1/4,29"
