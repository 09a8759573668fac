import json
import math

import pytest

from lordenkit import cli
from lordenkit.reporting import dumps_json, fmt_csv, rows_to_csv

BOUND = """\
command: bound
seed: 1
envelope:
  phi: {family: exponential, rate: 1}
  Q: {family: exponential, rate: 1}
"""

RENEWAL = """\
command: renewal-fn
distribution: {family: exponential, rate: 1}
s_max: 10
step: 0.001
"""

SIMULATE = """\
command: simulate
seed: 3
n: 2000
times: [1, 5]
policy:
  kind: min_composition
  base: {family: exponential, rate: 1}
  modulator: {alternate: [{family: zero}, {family: exponential, rate: 1}]}
  envelope:
    phi: {family: exponential, rate: 1}
    Q: {family: exponential, rate: 2}
"""


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_bound_json(tmp_path):
    cfg = _write(tmp_path, BOUND)
    out = tmp_path / "r.json"
    assert cli.main([str(cfg), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["result"]["generalized_bound"] == pytest.approx(2.0, abs=1e-9)
    assert rep["header"]["status"] == "ok"
    assert cli.verify_report(out, cfg)


def test_renewal_csv(tmp_path):
    cfg = _write(tmp_path, RENEWAL)
    out = tmp_path / "r.csv"
    assert cli.main([str(cfg), "--out", str(out)]) == 0
    lines = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
    assert lines[0] == "s,H"
    s, H = map(float, lines[-1].split(","))
    assert s == 10.0 and abs(H - 10.0) <= 0.01
    assert cli.verify_report(out, cfg)


def test_unknown_field_exit_2_and_no_report(tmp_path, capsys):
    cfg = _write(tmp_path, BOUND + "  bogus: 1\n")
    out = tmp_path / "r.json"
    assert cli.main([str(cfg), "--out", str(out)]) == 2
    assert not out.exists()
    assert "line 6: unknown field 'envelope.bogus'" in capsys.readouterr().err


@pytest.mark.parametrize("text", [
    "command: frobnicate\n",
    "command: bound\n",
    "command: [unclosed\n",
    "nonsense: 1\ncommand: bound\n",
])
def test_invalid_configs(tmp_path, text):
    out = tmp_path / "r.json"
    assert cli.main([str(_write(tmp_path, text)), "--out", str(out)]) == 2
    assert not out.exists()


def test_invalid_envelope_exit_2(tmp_path):
    bad = BOUND.replace("rate: 1}\n  Q", "rate: 5}\n  Q")
    assert cli.main([str(_write(tmp_path, bad)), "--out", str(tmp_path / "r.json")]) == 2


def test_breach_exit_3(tmp_path):
    # waiting time ~5 against an envelope bound of ~0.015
    mm = """\
command: mmpp
seed: 2
mmpp:
  horizon: 2000
  flows: [{family: constant, rate: 0.2}]
  envelopes: [{phi: {family: exponential, rate: 100}, Q: {family: exponential, rate: 200}}]
"""
    out = tmp_path / "r.json"
    assert cli.main([str(_write(tmp_path, mm)), "--out", str(out)]) == 3
    assert json.loads(out.read_text())["header"]["status"] == "breach"


def test_byte_identical_reruns_and_workers(tmp_path):
    cfg = _write(tmp_path, SIMULATE)
    outs = []
    for name, w in (("a", 1), ("b", 1), ("c", 8)):
        out = tmp_path / f"{name}.json"
        assert cli.main([str(cfg), "--workers", str(w), "--out", str(out)]) == 0
        outs.append(out.read_text())
    assert outs[0] == outs[1]
    a, c = json.loads(outs[0]), json.loads(outs[2])
    assert a["result"] == c["result"]
    assert a["header"]["workers"] == 1 and c["header"]["workers"] == 8


def test_workers_precedence(tmp_path, monkeypatch):
    cfg = _write(tmp_path, BOUND + "workers: 2\n")
    out = tmp_path / "r.json"
    monkeypatch.setenv("LORDENKIT_WORKERS", "5")
    cli.main([str(cfg), "--out", str(out)])
    assert json.loads(out.read_text())["header"]["workers"] == 5
    cli.main([str(cfg), "--out", str(out), "--workers", "3"])
    assert json.loads(out.read_text())["header"]["workers"] == 3
    monkeypatch.delenv("LORDENKIT_WORKERS")
    cli.main([str(cfg), "--out", str(out)])
    assert json.loads(out.read_text())["header"]["workers"] == 2


def test_interrupt_writes_censored(tmp_path, monkeypatch):
    def boom(*a):
        raise KeyboardInterrupt

    monkeypatch.setitem(cli.HANDLERS, "bound", boom)
    out = tmp_path / "r.json"
    assert cli.main([str(_write(tmp_path, BOUND)), "--out", str(out)]) == 130
    assert json.loads(out.read_text())["header"]["status"] == "censored"


def test_digest_mismatch(tmp_path):
    cfg = _write(tmp_path, BOUND)
    out = tmp_path / "r.json"
    cli.main([str(cfg), "--out", str(out)])
    cfg.write_text(BOUND + "# edited\n")
    assert not cli.verify_report(out, cfg)


def test_other_commands_run(tmp_path):
    couple = """\
command: couple
seed: 1
policy: {kind: iid, distribution: {family: exponential, rate: 1}}
coupling: {b1: 0, b2: 5, runs: 200}
"""
    rel = """\
command: reliability
seed: 1
model:
  horizon: 200
  failure: [{family: pareto, C: 3}, {family: pareto, C: 3}]
  repair: [{family: pareto, C: 3}, {family: pareto, C: 3}]
  envelope: {phi: {family: pareto, C: 3}, Q: {family: exponential, rate: 3}}
"""
    tv = """\
command: tv
seed: 1
n: 2000
times: [5, 10]
policy: {kind: iid, distribution: {family: exponential, rate: 1}}
coupling: {b1: 0, b2: 5, runs: 200, rate_order: 3}
"""
    for i, text in enumerate((couple, rel, tv)):
        out = tmp_path / f"{i}.csv"
        assert cli.main([str(_write(tmp_path, text, f"{i}.yaml")), "--out", str(out)]) == 0
        assert out.read_text().startswith("# tool: lordenkit")


# --- number formatting ---------------------------------------------------------

def test_json_numbers():
    text = dumps_json({"a": 0.1, "b": 2.0, "c": math.inf, "d": [1, math.nan], "e": True})
    assert '"a": 0.10000000000000001' in text
    assert '"b": 2.0' in text and "Infinity" in text and "NaN" in text
    assert json.loads(text)["a"] == 0.1


def test_csv_numbers():
    assert fmt_csv(1 / 3) == "0.333333333333"
    assert fmt_csv(True) == "true" and fmt_csv(None) == ""
    assert rows_to_csv(["x", "y"], [{"x": 1, "y": 0.5}]).splitlines() == ["x,y", "1,0.5"]
