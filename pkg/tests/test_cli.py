import csv
import json

import yaml

from swarmsim.cli import main

SMALL = {
    "name": "cli_small",
    "duration": 15.0,
    "seed": 4,
    "nodes": [
        {"id": 1, "position": [0, 0], "typologies": ["generic"], "battery": "MAINS"},
        {"id": 2, "position": [10, 0], "typologies": ["generic"], "battery": "MAINS"},
    ],
    "tasks": [
        {"id": 1, "origin": 1, "at": 2.0, "typology": "generic", "work": 0.5,
         "memory": 64, "deadline": 10.0},
    ],
}


def write_config(tmp_path, raw=SMALL, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return str(path)


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", write_config(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("OK")


def test_validate_rejects_bad_config(tmp_path, capsys):
    bad = dict(SMALL, events=[{"type": "crash", "node": 42, "at": 1.0}])
    assert main(["validate", write_config(tmp_path, bad)]) == 1
    assert "INVALID" in capsys.readouterr().out


def test_missing_file_is_an_error(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.yaml")]) == 2
    assert "error" in capsys.readouterr().err


def test_run_writes_trace_and_metrics(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", write_config(tmp_path), "--out", str(out)])
    assert code == 0
    lines = (out / "trace.jsonl").read_text().splitlines()
    assert lines and all(json.loads(l) for l in lines[:20])
    with open(out / "metrics.csv") as fh:
        rows = dict(list(csv.reader(fh))[1:])
    assert rows["tasks_submitted"] == "1"
    assert rows["tasks_done"] == "1"
    assert "tasks_done: 1" in capsys.readouterr().out


def test_run_seed_override_changes_output(tmp_path):
    raw = dict(SMALL, net={"loss_prob": 0.2})
    cfg = write_config(tmp_path, raw)
    for seed, name in ((7, "a"), (7, "b"), (8, "c")):
        main(["run", cfg, "--out", str(tmp_path / name), "--seed", str(seed)])
    a = (tmp_path / "a" / "trace.jsonl").read_text()
    b = (tmp_path / "b" / "trace.jsonl").read_text()
    c = (tmp_path / "c" / "trace.jsonl").read_text()
    assert a == b
    assert a != c


def test_compare_identical_variants_zero_difference(tmp_path, capsys):
    cfg = write_config(tmp_path)
    variants = tmp_path / "variants.yaml"
    variants.write_text(yaml.safe_dump({
        "one": {"scheduler": {"w_availability": 0.4, "w_qos": 0.4, "w_locality": 0.2}},
        "two": {"scheduler": {"w_availability": 0.4, "w_qos": 0.4, "w_locality": 0.2}},
    }))
    code = main(["compare", cfg, "--variants", str(variants),
                 "--seeds", "1,2", "--out", str(tmp_path / "cmp")])
    assert code == 0
    with open(tmp_path / "cmp" / "compare.csv") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    assert len(data) == 4  # 2 variants x 2 seeds
    by_key = {(r[0], r[1]): r[2:] for r in data}
    for seed in ("1", "2"):
        assert by_key[("one", seed)] == by_key[("two", seed)]


def test_compare_single_seed_one_row_per_variant(tmp_path, capsys):
    cfg = write_config(tmp_path)
    variants = tmp_path / "variants.yaml"
    variants.write_text(yaml.safe_dump({"base": {}}))
    assert main(["compare", cfg, "--variants", str(variants), "--seeds", "3"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 2  # header + one row
    assert out[1].startswith("base,3,")
