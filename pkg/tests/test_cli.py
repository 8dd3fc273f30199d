import json
import subprocess
import sys

import pytest

from uncloneable.cli import main
from uncloneable.reports import read_csv, strip_timestamp

FAST = {
    "moments": ["--dim", "2,4", "--n", "1,2", "--samples", "2000"],
    "design-check": ["--dim", "2"],
    "qecm-check": ["--dim", "2,4", "--ensemble", "haar", "--samples", "50"],
    "attack": ["--dim", "2", "--ensemble", "bb84", "--restarts", "2", "--iters", "20"],
    "map-attack": ["--dim", "2", "--samples", "3"],
    "entropy": ["--dim", "2", "--samples", "2", "--restarts", "2"],
    "chain": ["--dim", "4", "--probes", "2"],
    "bounds": ["--dim", "16,1048576", "--lambdas", "16"],
}


def run(tmp_path, argv, name="out.csv"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    return code, out.read_text() if out.exists() else None


@pytest.mark.parametrize("cmd", sorted(FAST))
def test_commands_succeed_and_embed_provenance(cmd, tmp_path):
    code, text = run(tmp_path, [cmd] + FAST[cmd])
    assert code == 0
    meta, rows = read_csv(text)
    assert meta["command"] == cmd and meta["version"] and meta["config"]["command"] == cmd
    assert rows


def test_json_output(tmp_path):
    code, text = run(tmp_path, ["bounds", "--lambdas", "16", "--format", "json"], "b.json")
    doc = json.loads(text)
    assert code == 0 and doc["report"]["rows"][-1][:3] == ["lambda", 16.0, 0.375]


def test_attack_reports_solver_gap(tmp_path):
    _, text = run(tmp_path, ["attack"] + FAST["attack"])
    meta, _ = read_csv(text)
    assert 0 <= meta["summary"]["channel_sdp_gap"] < 1e-6


def test_invalid_configs(tmp_path, capsys):
    assert main(["bounds", "--dim", "12"]) == 2
    assert main(["qecm-check", "--dim", "6", "--ensemble", "clifford"]) == 2
    assert main(["attack", "--dim", "4", "--ensemble", "bb84"]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        main(["moments", "--dim", "two"])
    assert e.value.code == 2
    cfg = tmp_path / "c.json"
    cfg.write_text('{"nonsense": 1}')
    with pytest.raises(SystemExit):
        main(["bounds", "--config", str(cfg)])


def test_config_file_defaults_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lambdas": "8,16", "dim": [16]}))
    _, text = run(tmp_path, ["bounds", "--config", str(cfg), "--lambdas", "32"])
    meta, rows = read_csv(text)
    assert meta["config"]["lambdas"] == [32.0] and meta["config"]["dim"] == [16]
    assert [r["x"] for r in rows] == ["16", "32.0"]


def test_failed_check_exit_code(tmp_path):
    # the Pauli group is not a 2-design, so its moments disagree with the Haar values
    code, text = run(tmp_path, ["moments", "--dim", "2", "--n", "2", "--ensemble", "pauli", "--samples", "10"])
    assert code == 1 and text is not None
    assert read_csv(text)[0]["summary"]["all_agree"] is False


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "uncloneable", "bounds", "--lambdas", "16"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "0.375" in res.stdout


def test_threads_do_not_change_output(tmp_path):
    base = ["moments", "--dim", "4", "--n", "2", "--samples", "9000"]
    _, a = run(tmp_path, base + ["--threads", "1"], "a.csv")
    _, b = run(tmp_path, base + ["--threads", "4"], "b.csv")
    assert strip_timestamp(a) == strip_timestamp(b)


def test_internal_failure_keeps_partial_report(tmp_path, monkeypatch):
    from uncloneable import infotheory as it

    real = it.decoupling_check
    calls = []

    def flaky(*a, **k):
        calls.append(1)
        if len(calls) > 1:
            raise RuntimeError("boom")
        return real(*a, **k)

    monkeypatch.setattr(it, "decoupling_check", flaky)
    code, text = run(tmp_path, ["decouple", "--samples", "50"])
    assert code == 1
    meta, rows = read_csv(text)
    assert len(rows) == 1 and "boom" in meta["summary"]["error"]


@pytest.mark.parametrize("cmd", sorted(FAST))
def test_reports_carry_solver_gap(cmd, tmp_path):
    _, text = run(tmp_path, [cmd] + FAST[cmd])
    summary = read_csv(text)[0]["summary"]
    assert "max_sdp_gap" in summary
    if cmd in ("attack", "entropy", "chain"):
        assert 0 <= summary["max_sdp_gap"] < 1e-6
