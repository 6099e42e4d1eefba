import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from dilative.cli import REPORT_COLUMNS, main, render
from dilative.config import build_model, load_config, parse_config, resolve_alpha
from dilative.errors import ConfigInvalid

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = {
    "command": "eval-psi",
    "seed": 3,
    "model": {"variant": "levy", "exponent": {"type": "semistable", "gamma": 0.8, "c": 2.0, "eta": 0.05}},
}


def write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_parse_base():
    cfg = parse_config(BASE)
    assert cfg.seed == 3 and cfg.n_mc == 1000
    assert resolve_alpha(cfg, None, -1.0) == pytest.approx((1 + 1) / 0.8 - 0.5)
    assert build_model(cfg).exponent.gamma == 0.8


@pytest.mark.parametrize(
    "override, path",
    [
        ({"model.exponent.gamma": 2.5}, "model.exponent.gamma"),
        ({"model.exponent.eta": 0.3}, "model.exponent.eta"),
        ({"seed": -1}, "seed"),
        ({"n_mc": 0}, "n_mc"),
        ({"params.T": [1.0, -2.0]}, "params.T"),
        ({"scheme.n_ladder": [4, 0]}, "scheme.n_ladder"),
        ({"bogus": 1}, "bogus"),
        ({"model.variant": "nope"}, "model"),
    ],
)
def test_config_errors_name_the_field(override, path):
    with pytest.raises(ConfigInvalid) as exc:
        parse_config(BASE, override)
    assert str(exc.value).startswith(path + ":")
    assert exc.value.exit_code == 2


def test_config_command_requirements():
    with pytest.raises(ConfigInvalid, match="simulate"):
        parse_config(BASE, {"command": "simulate"})
    with pytest.raises(ConfigInvalid, match="rc_ar1"):
        parse_config({**BASE, "model": {"variant": "rc_ar1", "beta": 0.0}})
    with pytest.raises(ConfigInvalid):
        parse_config([1, 2])


def test_missing_seed_is_rejected():
    data = {k: v for k, v in BASE.items() if k != "seed"}
    with pytest.raises(ConfigInvalid, match="^seed"):
        parse_config(data)


def test_digest_ignores_output_only():
    a = parse_config(BASE)
    assert a.digest() == parse_config({**BASE, "output": "x.csv"}).digest()
    assert a.digest() != parse_config({**BASE, "seed": 4}).digest()


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigInvalid, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("command: [unclosed")
    with pytest.raises(ConfigInvalid, match="YAML"):
        load_config(bad)


def test_shipped_configs_validate():
    files = sorted(CONFIGS.glob("*.yaml"))
    assert len(files) >= 4
    for f in files:
        load_config(f)


def test_eval_psi_zero_thetas(tmp_path, capsys):
    data = {**BASE, "grid": {"queries": [{"times": [1.0], "thetas": [0.0]}, {"times": [0.5, 2.0], "thetas": [0.0, 0.0]}]}}
    assert main(["eval-psi", "--config", str(write(tmp_path, data))]) == 0
    out = rows(capsys.readouterr().out)
    assert len(out) == 2
    assert all(float(r["lhs_re"]) == 0.0 and float(r["lhs_im"]) == 0.0 for r in out)


def test_verify_scaling_exit_codes(tmp_path, capsys):
    data = {**BASE, "command": "verify-scaling", "params": {"delta": -1.0, "c": 2.0, "T": [2.0]}}
    assert main(["verify-scaling", "--config", str(write(tmp_path, data))]) == 0
    out = rows(capsys.readouterr().out)
    assert max(float(r["residual"]) for r in out) <= 1e-10
    assert {r["verdict"] for r in out} == {"pass"}
    data["params"]["T"] = [1.3]
    assert main(["verify-scaling", "--config", str(write(tmp_path, data))]) == 1
    assert "fail" in {r["verdict"] for r in rows(capsys.readouterr().out)}


def test_aggregate_empty_ladder(tmp_path):
    data = {**BASE, "command": "aggregate", "scheme": {"delta": -1.0, "n_ladder": []}}
    out = tmp_path / "agg.csv"
    assert main(["aggregate", "--config", str(write(tmp_path, data)), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert [line for line in lines if not line.startswith("#")] == [",".join(REPORT_COLUMNS)]


def test_provenance_header(tmp_path, capsys):
    main(["eval-psi", "--config", str(write(tmp_path, BASE)), "--seed", "9"])
    head = [line for line in capsys.readouterr().out.splitlines() if line.startswith("#")]
    assert head[0].startswith("# config_sha256=") and len(head[0]) == len("# config_sha256=") + 64
    assert head[1] == "# seed=9"
    assert any("numpy=" in h and "scipy=" in h for h in head)


def test_error_records(tmp_path, capsys):
    bad = {**BASE, "model": {"variant": "levy", "exponent": {"type": "semistable", "gamma": 3.0, "c": 2.0}}}
    assert main(["eval-psi", "--config", str(write(tmp_path, bad))]) == 2
    rec = json.loads(capsys.readouterr().err)
    assert rec["error"] == "ConfigInvalid" and rec["message"].startswith("model.exponent.gamma")
    # the density gate is a numerical finding, not a schema violation
    invalid = {**BASE, "model": {"variant": "levy", "exponent": {"type": "semistable", "gamma": 1.5, "c": 2.0, "eta": 0.05}}}
    assert main(["eval-psi", "--config", str(write(tmp_path, invalid))]) == 3
    rec = json.loads(capsys.readouterr().err)
    assert rec["error"] == "InvalidExponent" and rec["operation"]
    budget = {**BASE, "command": "aggregate", "n_mc": 10**6, "scheme": {"delta": -1.0, "n_ladder": [100]}}
    assert main(["aggregate", "--config", str(write(tmp_path, budget))]) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "BudgetExceeded"
    assert main(["eval-psi", "--config", str(write(tmp_path, BASE)), "--threads", "0"]) == 2


def test_tol_override(tmp_path, capsys):
    data = {**BASE, "command": "verify-scaling", "params": {"delta": 0.0, "T": [1.3]}}
    assert main(["verify-scaling", "--config", str(write(tmp_path, data)), "--tol", "10"]) == 0


def test_simulate_csv(tmp_path):
    data = {**BASE, "command": "simulate", "simulate": {"times": [0.5, 1.0], "n_paths": 50}}
    out = tmp_path / "paths.csv"
    assert main(["simulate", "--config", str(write(tmp_path, data)), "--out", str(out)]) == 0
    lines = [line for line in out.read_text().splitlines() if not line.startswith("#")]
    assert lines[0] == "seed,path_id,t=0.5,t=1"
    assert len(lines) == 51


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_byte_identical_across_runs_and_threads(path):
    cfg = load_config(path)
    a, sa = render(cfg, threads=1)
    b, sb = render(cfg, threads=1)
    c, sc = render(cfg, threads=4)
    assert a == b == c
    assert sa == sb == sc == 0


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, BASE)
    res = subprocess.run([sys.executable, "-m", "dilative.cli", "eval-psi", "--config", str(cfg)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert ",".join(REPORT_COLUMNS) in res.stdout
