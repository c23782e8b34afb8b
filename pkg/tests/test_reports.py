import json
import math

import numpy as np

from mpaqkd.oracle import AttackOrder, performance_table
from mpaqkd.reports import (
    RunManifest,
    fmt,
    jsonable,
    oracle_table_rows,
    session_csv_rows,
    write_csv,
    write_json,
)


def test_fmt_float_precision():
    assert fmt(1.0 / 3.0) == "0.333333333333"
    assert fmt(0.75) == "0.75"
    assert fmt(1e-11) == "1e-11"
    assert fmt(3) == "3"
    assert fmt(np.int64(4)) == "4"
    assert fmt(np.float64(0.5)) == "0.5"
    assert fmt(True) == "true"
    assert fmt("label") == "label"


def test_write_csv_layout(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [[1, 0.5], [2, 1.0 / 7.0]])
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "a,b"
    assert lines[1] == "1,0.5"
    assert lines[2] == "2,0.142857142857"


def test_jsonable_handles_numpy():
    obj = {
        "i": np.int32(3),
        "f": np.float64(0.25),
        "arr": np.arange(3),
        "nested": [np.bool_(True), (1, 2)],
        "nan": float("nan"),
    }
    out = jsonable(obj)
    assert out == {"i": 3, "f": 0.25, "arr": [0, 1, 2], "nested": [True, [1, 2]], "nan": None}
    json.dumps(out)


def test_write_json_is_stable(tmp_path):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    payload = {"z": 1, "a": [np.float64(0.5)], "m": {"k": np.int64(2)}}
    write_json(p1, payload)
    write_json(p2, payload)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_bytes().endswith(b"\n")


def test_oracle_table_rows_schema():
    header, rows = oracle_table_rows(performance_table((AttackOrder(2, 2),)))
    assert header[:4] == ["n", "m", "eta", "S"]
    assert rows[0][0] == 2 and rows[0][2] == 0.75


def test_session_csv_rows_cover_every_pair(attack22_session):
    header, rows = session_csv_rows(attack22_session)
    assert header[0] == "thetaA"
    assert len(rows) == 9
    total = sum(r[2] + r[3] + r[4] + r[5] + r[6] + r[7] + r[8] for r in rows)
    assert total == attack22_session.trials


def test_manifest_lists_outputs(tmp_path):
    out = tmp_path / "x.csv"
    write_csv(out, ["a"], [[1]])
    manifest = RunManifest(command="demo", config={"seed": 1}, outputs=[out])
    payload = manifest.write(tmp_path / "m.json")
    assert payload["config"] == {"seed": 1}
    stored = json.loads((tmp_path / "m.json").read_text())
    assert stored["outputs"] == [str(out)]
    assert "created_utc" in stored
