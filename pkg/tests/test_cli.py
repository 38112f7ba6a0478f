import json
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from localbn.cli import main, parse_input

THRESHOLD_MODEL = {"synthetic": {"kind": "threshold", "input_names": ["x1", "x2"], "feature": "x1"}}

BRIDGE = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        f = json.loads(line)["features"]
        p = 1.0 if f["x1"] > 0.5 else 0.0
        print(json.dumps({"probabilities": {"neg": 1.0 - p, "pos": p}}), flush=True)
    """
)


@pytest.fixture
def files(tmp_path):
    model = tmp_path / "model.json"
    model.write_text(json.dumps(THRESHOLD_MODEL))
    rng = np.random.default_rng(0)
    lines = ["x1,x2,y"]
    for a, b in rng.uniform(0, 1, (8, 2)):
        lines.append(f"{float(a)!r},{float(b)!r},{'pos' if a > 0.45 else 'neg'}")
    dataset = tmp_path / "data.csv"
    dataset.write_text("\n".join(lines) + "\n")
    row = tmp_path / "row.csv"
    row.write_text("x2,x1\n0.3,0.52\n")
    return tmp_path, model, dataset, row


def test_parse_input_inline_and_file(files):
    _, _, _, row = files
    assert parse_input("x1=0.5, x2=0.25") == {"x1": 0.5, "x2": 0.25}
    assert parse_input(str(row)) == {"x2": 0.3, "x1": 0.52}
    with pytest.raises(ValueError):
        parse_input("x1")


def test_explain_defaults(files, capsys):
    _, model, _, row = files
    assert main(["explain", "--model", str(model), "--input", str(row)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["config"]["epsilon"] == 0.1
    assert report["config"]["n_samples"] == 300
    assert report["config"]["quartiles"] == 4
    assert report["input"]["names"] == ["x1", "x2"]


def test_explain_text_and_render(files, capsys):
    tmp, model, _, _ = files
    out = tmp / "r.json"
    assert main(["explain", "--model", str(model), "--input", "x1=0.5,x2=0.5", "--out", str(out)]) == 0
    assert main(["render", str(out), "--format", "dot"]) == 0
    assert capsys.readouterr().out.startswith("digraph")
    assert main(["render", str(out), "--format", "json"]) == 0
    assert capsys.readouterr().out == out.read_text()


def test_batch_text(files, capsys):
    _, model, dataset, _ = files
    assert main(["batch", "--model", str(model), "--dataset", str(dataset), "--label-col", "y",
                 "--samples", "50", "--format", "text"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 8
    assert all(l.split("\t")[1] in ("TP", "TN", "FP", "FN") for l in lines)


def test_sweep_is_byte_identical(files):
    tmp, model, dataset, _ = files
    args = ["sweep", "--model", str(model), "--dataset", str(dataset), "--label-col", "y",
            "--epsilons", "0.05,0.2", "--samples", "50", "--seed", "9"]
    main(args + ["--out", str(tmp / "a.json")])
    main(args + ["--out", str(tmp / "b.json")])
    assert (tmp / "a.json").read_bytes() == (tmp / "b.json").read_bytes()
    doc = json.loads((tmp / "a.json").read_text())
    assert doc["epsilons"] == [0.05, 0.2] and doc["seed"] == 9


def test_bridge_model(files, capsys):
    tmp, _, _, _ = files
    script = tmp / "bridge.py"
    script.write_text(BRIDGE)
    spec = f"cmd:{sys.executable} {script}"
    assert main(["explain", "--model", spec, "--labels", "neg,pos", "--input", "x1=0.8,x2=0.5",
                 "--samples", "40", "--format", "text"]) == 0
    text = capsys.readouterr().out
    assert "prediction: pos" in text


def test_error_exit_code(files, capsys):
    _, model, _, _ = files
    assert main(["explain", "--model", str(model), "--input", "x1=2.0,x2=0.5"]) == 2
    assert "error" in capsys.readouterr().err


def test_module_entry_point(files):
    _, model, _, _ = files
    proc = subprocess.run([sys.executable, "-m", "localbn", "explain", "--model", str(model),
                           "--input", "x1=0.9,x2=0.1", "--format", "text"],
                          capture_output=True, text=True, check=True)
    assert "verdict: R1_high_confidence" in proc.stdout
