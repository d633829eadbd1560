import json
import math
import os
import subprocess
import sys

import pytest
import yaml

from edgelab.cli import main
from edgelab.config import ConfigError, load_config, parse_config

TW_SMALL = {
    "kind": "tw_reference",
    "seed": 7,
    "samples": 40,
    "model": {"beta": 2.0},
    "sao": {"h": 0.1, "L": 10.0, "num_eigs": 2},
}


def _write(tmp_path, data, name="exp.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data) if not isinstance(data, str) else data)
    return str(path)


def test_empty_config_names_missing_fields():
    with pytest.raises(ConfigError) as exc:
        parse_config({})
    fields = [p for p, _ in exc.value.problems]
    assert fields == ["kind", "seed"]


def test_unknown_kind_and_fields():
    with pytest.raises(ConfigError) as exc:
        parse_config({"kind": "nope", "seed": 1, "sampels": 3, "model": {"bta": 2}})
    paths = {p for p, _ in exc.value.problems}
    assert {"kind", "sampels", "model.bta"} <= paths


@pytest.mark.parametrize(
    "raw,path",
    [
        ({"kind": "tw_reference", "seed": -1}, "seed"),
        ({"kind": "tw_reference", "seed": 1, "samples": 0}, "samples"),
        ({"kind": "tw_reference", "seed": 1, "sao": {"h": 0.07}}, "sao"),
        ({"kind": "edge_universality", "seed": 1, "mcmc": {"thin": 0}}, "mcmc"),
        ({"kind": "edge_universality", "seed": 1, "model": {"n": 1}}, "model"),
        ({"kind": "edge_universality", "seed": 1, "model": {"potential": [0, 1]}}, "model"),
    ],
)
def test_invalid_subconfigs(raw, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert path in [p for p, _ in exc.value.problems]


def test_defaults_and_derived_seeds():
    cfg = parse_config({"kind": "field_clt", "seed": 4, "model": {"beta": "inf"}})
    assert math.isinf(cfg.model.beta)
    assert cfg.sao_config().seed == 5 and cfg.mcmc_config().seed == 4
    assert cfg.digest() == parse_config({"kind": "field_clt", "seed": 4, "model": {"beta": "inf"}}).digest()
    assert cfg.digest() != parse_config({"kind": "field_clt", "seed": 5, "model": {"beta": "inf"}}).digest()


def test_shipped_configs_validate():
    root = os.path.join(os.path.dirname(__file__), "..", "configs")
    names = sorted(f for f in os.listdir(root) if f.endswith(".yaml"))
    assert names
    for name in names:
        assert main(["validate", os.path.join(root, name)]) == 0


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", _write(tmp_path, "{}")]) == 2
    err = capsys.readouterr().err
    assert "error: kind: missing" in err and "error: seed: missing" in err
    assert main(["validate", _write(tmp_path, "kind: [unclosed", "bad.yaml")]) == 2
    assert main(["validate", str(tmp_path / "missing.yaml")]) == 2
    assert main(["validate", _write(tmp_path, TW_SMALL)]) == 0


def test_run_writes_artifacts_deterministically(tmp_path, capsys):
    cfg = _write(tmp_path, TW_SMALL)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["run", cfg, "-o", str(out1)]) == 0
    assert main(["run", cfg, "-o", str(out2)]) == 0
    for name in ("data.csv", "summary.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["config_sha256"] == load_config(cfg).digest()
    assert manifest["seeds"] == {"master": 7, "mcmc": 7, "sao": 8}
    import hashlib

    assert manifest["files"]["data.csv"] == hashlib.sha256((out1 / "data.csv").read_bytes()).hexdigest()
    out = capsys.readouterr().out
    assert "PASS simple_spectrum" in out and "status: pass" in out


def test_report(tmp_path, capsys):
    cfg = _write(tmp_path, TW_SMALL)
    out = tmp_path / "run"
    main(["run", cfg, "-o", str(out)])
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "kind: tw_reference" in text and "status: pass" in text
    assert main(["report", str(tmp_path / "nowhere")]) == 2


def test_failing_check_exits_one(tmp_path):
    data = {
        "kind": "edge_universality",
        "seed": 1,
        "samples": 30,
        "model": {"beta": 2.0, "n": 50},
        "sao": {"h": 0.1, "L": 10.0},
        "checks": {"ks_max": 0.0},
    }
    assert main(["run", _write(tmp_path, data), "-o", str(tmp_path / "o")]) == 1
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["status"] == "fail"


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "edgelab.cli", "validate", _write(tmp_path, TW_SMALL)], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("ok: tw_reference")
