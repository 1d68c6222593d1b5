import json
import subprocess
import sys

import numpy as np
import pytest

from spinform.cli import ConfigError, dumps, load_config, run, threads
from spinform.compat import random_point_data
from spinform.weierstrass import PlanarGrid

SMALL = {"kind": "disk", "radius": 0.5, "resolution": 16}


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def write_cfg(path, **cfg):
    cfg.setdefault("grid", SMALL)
    path.write_text(json.dumps(cfg))
    return str(path)


def invoke(capsys, *argv):
    code = run(list(argv))
    return code, json.loads(capsys.readouterr().out)


def tabulated(Q, tau):
    return {"family": "tabulated", "tables": {"Q0_re": Q, "tau0": tau}}


def test_validate_builtin_families(tmp_path, capsys):
    for fam in ("constant", "rotational", "strip"):
        cfg = write_cfg(tmp_path / f"{fam}.json", data={"family": fam})
        code, rep = invoke(capsys, "validate", "--config", cfg)
        assert code == 0 and rep["status"] == "PASS"
        assert rep["compatibility"]["vortex_max"] < 1e-12
        assert len(rep["convergence"]["vortex"]["ratios"]) == 1
        assert rep["exit_code"] == 0 and len(rep["provenance"]["config_hash"]) == 64


def test_validate_incompatible_data(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "bad.json", data=tabulated(2.0, 4.0))
    code, rep = invoke(capsys, "validate", "--config", cfg)
    assert code == 0 and rep["status"] == "FAIL"
    code, rep = invoke(capsys, "validate", "--config", cfg, "--strict")
    assert code == 3 and rep["status"] == "REFUSED"


def test_negative_tau_is_refused_with_node(tmp_path, capsys):
    t = np.full((17, 17), 4.0)
    t[5, 7] = -1.0
    cfg = write_cfg(tmp_path / "neg.json", data=tabulated(1.0, t.tolist()))
    code, rep = invoke(capsys, "validate", "--config", cfg)
    assert code == 3 and rep["node"] == {"iy": 5, "ix": 7}


@pytest.mark.parametrize("text", ["{not json", "[1, 2]", json.dumps({"plan": "spiral"}),
                                  json.dumps({"grid": {"kind": "disk", "radius": 0.5, "resolution": 4}}),
                                  json.dumps({"data": {"family": "hexagonal"}}),
                                  json.dumps({"initial": {"phase_sign": 3}})])
def test_malformed_config_exit_2(tmp_path, capsys, text):
    p = tmp_path / "cfg.json"
    p.write_text(text)
    code, rep = invoke(capsys, "generate", "--config", str(p), "--out", str(tmp_path / "o"))
    assert code == 2 and rep["status"] == "ERROR"


def test_missing_config_file(capsys):
    code, rep = invoke(capsys, "validate", "--config", "nowhere.json")
    assert code == 2


def test_generate_outputs(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", data={"family": "constant"})
    out = tmp_path / "run"
    code, rep = invoke(capsys, "generate", "--config", cfg, "--out", str(out))
    assert code == 0 and rep["status"] == "PASS"
    assert sorted(p.name for p in out.iterdir()) == ["gauss_map.csv", "height.csv", "report.json",
                                                     "surface.csv", "surface.obj"]
    n = PlanarGrid.disk(0.5, 16).n_active
    obj = (out / "surface.obj").read_text().splitlines()
    assert sum(line.startswith("v ") for line in obj) == n == rep["active_nodes"]
    assert all(v["pass"] for v in rep["invariants"].values())
    header = (out / "height.csv").read_text().splitlines()[0]
    assert header.split(",")[:2] == ["z_re", "z_im"]


def test_generate_without_out_uses_default_dir(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json")
    code, _ = invoke(capsys, "generate", "--config", cfg)
    assert code == 0 and (tmp_path / "spinform_out" / "surface.obj").exists()


def test_generate_is_deterministic(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", data={"family": "strip", "theta": 0.3})
    for name in ("a", "b"):
        assert invoke(capsys, "generate", "--config", cfg, "--out", str(tmp_path / name))[0] == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_theta0_changes_height_not_gauss_map(tmp_path, capsys):
    outs = []
    for k, th in enumerate((0.0, 1.0)):
        cfg = write_cfg(tmp_path / f"t{k}.json", initial={"theta0_re": th})
        invoke(capsys, "generate", "--config", cfg, "--out", str(tmp_path / f"t{k}"))
        outs.append(tmp_path / f"t{k}")
    assert (outs[0] / "gauss_map.csv").read_bytes() == (outs[1] / "gauss_map.csv").read_bytes()
    assert (outs[0] / "height.csv").read_bytes() != (outs[1] / "height.csv").read_bytes()


def test_out_directory_does_not_change_hash(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json")
    _, a = invoke(capsys, "validate", "--config", cfg)
    _, b = invoke(capsys, "validate", "--config", cfg, "--out", str(tmp_path / "x"))
    assert a["provenance"]["config_hash"] == b["provenance"]["config_hash"]


def test_generate_blowup_exit_4(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", data=tabulated(1e160, 4.0))
    code, rep = invoke(capsys, "generate", "--config", cfg, "--out", str(tmp_path / "o"))
    assert code == 4 and rep["status"] == "BLOWUP" and "node" in rep
    assert not (tmp_path / "o" / "surface.obj").exists()


def test_correspond(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", data={"family": "constant"})
    out = tmp_path / "o"
    code, rep = invoke(capsys, "correspond", "--config", cfg, "--out", str(out))
    assert code == 0 and rep["status"] == "PASS"
    assert rep["checks"]["gauss_agreement"]["value"] < 1e-8
    assert rep["checks"]["round_trip"]["value"] < 1e-10
    assert (out / "minkowski.obj").exists() and (out / "surface.obj").exists()


def test_correspond_strict_refuses_before_integration(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", data=tabulated(2.0, 4.0))
    code, rep = invoke(capsys, "correspond", "--config", cfg, "--strict")
    assert code == 3
    code, rep = invoke(capsys, "correspond", "--config", cfg)
    assert code == 5 and rep["status"] == "FAIL"


def test_diagnose_generated_and_from_file(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", data={"family": "constant"}, grid={**SMALL, "resolution": 64})
    code, rep = invoke(capsys, "diagnose", "--config", cfg)
    assert code == 0 and rep["source"] == "generated"
    invoke(capsys, "generate", "--config", cfg, "--out", str(tmp_path / "g"))
    cfg2 = write_cfg(tmp_path / "d.json", data={"family": "constant"}, grid={**SMALL, "resolution": 64},
                     surface="g/surface.csv")
    code, rep = invoke(capsys, "diagnose", "--config", cfg2)
    assert code == 0 and rep["status"] == "PASS" and rep["source"] == "g/surface.csv"
    bad = write_cfg(tmp_path / "e.json", data={"family": "constant"}, surface="missing.csv")
    assert invoke(capsys, "diagnose", "--config", bad)[0] == 2


def test_diagnose_breach_exit_5(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", data=tabulated(2.0, 4.0))
    code, rep = invoke(capsys, "diagnose", "--config", cfg)
    assert code == 5 and rep["status"] == "FAIL" and rep["breach"]


def test_tabulated_and_off_centre_seed(tmp_path, capsys):
    Q, tau = 1.0, 4.0
    cfg = write_cfg(tmp_path / "c.json", data=tabulated(Q, tau), initial={"z0": [0.2, -0.1]},
                    plan="bfs")
    code, rep = invoke(capsys, "generate", "--config", cfg, "--out", str(tmp_path / "o"))
    assert code == 0 and rep["status"] == "PASS"


def test_data_file_reference(tmp_path, capsys):
    (tmp_path / "data.json").write_text(json.dumps({"family": "strip", "theta": 0.2}))
    cfg = write_cfg(tmp_path / "c.json", data={"file": "data.json"})
    code, rep = invoke(capsys, "validate", "--config", cfg)
    assert code == 0 and rep["status"] == "PASS"


def test_refine_reports_ratios(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", data={"family": "constant"})
    code, rep = invoke(capsys, "generate", "--config", cfg, "--refine", "1", "--out", str(tmp_path / "o"))
    assert code == 0 and len(rep["refinement"]["ratios"]) == 1


def test_phase_flag_overrides_config(tmp_path):
    cfg = write_cfg(tmp_path / "c.json")
    args = type("A", (), {"strict": False, "phase": -1, "refine": None, "out": None})()
    assert load_config("generate", cfg, args).phase_sign == -1
    with pytest.raises(ConfigError):
        load_config("generate", write_cfg(tmp_path / "r.json", refine=-1))


def test_compat_command(tmp_path, capsys, rng):
    good = random_point_data(rng, 2, 1).to_dict()
    rough = random_point_data(rng, 2, 1, consistent=False).to_dict()
    p = tmp_path / "batch.json"
    p.write_text(json.dumps([good, rough, {"p": 2}]))
    code, rep = invoke(capsys, "compat", "--config", str(p))
    assert code == 0 and rep["count"] == 3
    a, b, c = rep["instances"]
    assert a["gauss"] < 1e-12 and b["gauss"] > 1e-3 and not c["valid"]
    p.write_text(json.dumps({"points": [good], "clifford": True}))
    code, rep = invoke(capsys, "compat", "--config", str(p))
    assert rep["instances"][0]["clifford"]["abc_residual"] < 1e-12
    p.write_text("[]")
    code, rep = invoke(capsys, "compat", "--config", str(p))
    assert code == 0 and rep["instances"] == []


def test_report_json_format():
    text = dumps({"b": float("nan"), "a": np.float64(1.5), "c": 1 + 2j})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": 1.5, "b": None, "c": [1.0, 2.0]}


def test_threads_env(monkeypatch):
    monkeypatch.setenv("SPINFORM_THREADS", "1")
    assert threads() == 1
    monkeypatch.setenv("SPINFORM_THREADS", "junk")
    assert 1 <= threads() <= 4


def test_console_script(tmp_path):
    cfg = write_cfg(tmp_path / "c.json")
    proc = subprocess.run([sys.executable, "-m", "spinform", "validate", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["status"] == "PASS"
