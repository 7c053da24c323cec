import csv
import json

import pytest

from pshglue.cli import COMMANDS, main, run
from pshglue.report import CERTIFICATE_KEYS, VerificationReport

EUCLID = {"kind": "euclidean", "dimension": 2}
GLUE = {
    "problem": {"ambient": EUCLID, "variety": [[[0, 0], [1, 0]]],
                "target": {"kind": "sine_gaussian", "dimension": 2, "amplitude": 0.3}, "region_radius": 2.0},
    "gluing": {"epsilon": 0.25, "delta": 0.1, "c1": 0.1, "neighborhood_radius": 0.5, "sample_density": 10,
               "max_samples": 2000, "tube_samples": 300, "restriction_samples": 40},
    "seed": 7,
}
CONFIGS = {
    "levi": {"potential": EUCLID, "samples": {"count": 20}, "seed": 1,
             "expected": [[1, 0], [0, 1]]},
    "psh-check": {"potential": EUCLID, "samples": {"count": 50, "radius": 2.0}, "margin": 0.5, "seed": 1},
    "regmax-probe": {"delta": 0.5, "grid": {"resolution": 60}},
    "glue": GLUE,
    "flow": {"potential": {"kind": "hopf", "weights": [1, 2]}, "operator": {"weights": [1, 2]},
             "rays": {"count": 10}, "seed": 3},
    "project": {"potential": {"kind": "hopf", "weights": [1, 1, 3]}, "samples": {"count": 10, "inner_radius": 0.1},
                "seed": 4},
    "sasaki-check": {"samples": 4, "seed": 5},
    "reeb-deform": {"weights": [1, 1.4142135623730951], "q_max": 5},
    "orbit-check": {"weights": [1, 2], "point": [0.6, {"re": 0, "im": 0.8}], "window": [6.283185307179586, 20]},
}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def _report(out):
    return VerificationReport.from_json((out / "report.json").read_text())


@pytest.mark.parametrize("command", COMMANDS)
def test_every_command_passes(command, tmp_path, capsys):
    out = tmp_path / "out"
    code = run(command, _write(tmp_path, CONFIGS[command]), out, workers=2)
    assert code == 0, capsys.readouterr()
    rep = _report(out)
    assert rep.passed and rep.certificates
    assert rep.config == CONFIGS[command]
    assert set(rep.timing) == {"started", "seconds"}
    raw = json.loads((out / "report.json").read_text())
    for cert in raw["certificates"]:
        assert list(cert) == sorted(CERTIFICATE_KEYS)
    assert "[PASS]" in capsys.readouterr().out


def test_glue_report_contents(tmp_path):
    out = tmp_path / "g"
    assert run("glue", _write(tmp_path, GLUE), out, workers=1, csv=True) == 0
    rep = _report(out)
    assert rep.names() == ["restriction", "global_positivity", "branch_exactness"]
    assert rep.details["tube"]["tube_lower_bound"]["pass"]
    with open(out / "glue.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["branch"] for r in rows} >= {"u", "phi"}


def test_non_psh_exits_one(tmp_path):
    cfg = {"potential": {"kind": "quadratic", "matrix": [[-1, 0], [0, -1]]}, "samples": {"count": 10}, "seed": 1}
    assert run("psh-check", _write(tmp_path, cfg), tmp_path / "o") == 1
    assert not _report(tmp_path / "o").passed


def test_negative_control_exits_one(tmp_path):
    cfg = json.loads(json.dumps(GLUE))
    cfg["gluing"].update(epsilon=0.49, a_shift=-1.0)
    assert run("glue", _write(tmp_path, cfg), tmp_path / "o") == 1
    assert not _report(tmp_path / "o").certificate("branch_exactness").passed


def test_infeasible_glue_reports_stage(tmp_path):
    cfg = json.loads(json.dumps(GLUE))
    cfg["gluing"]["neighborhood_radius"] = 3.0
    assert run("glue", _write(tmp_path, cfg), tmp_path / "o") == 1
    rep = _report(tmp_path / "o")
    assert rep.names() == ["feasibility"] and "choose_A" in rep.details["infeasible"]


def test_config_errors_exit_two(tmp_path, capsys):
    assert run("levi", tmp_path / "missing.json", tmp_path) == 2
    assert "cannot read config" in capsys.readouterr().err
    assert run("levi", _write(tmp_path, {"samples": {"count": 3}, "seed": 1}), tmp_path) == 2
    assert "'potential'" in capsys.readouterr().err
    assert run("levi", _write(tmp_path, {"potential": EUCLID, "samples": {"count": 3}}), tmp_path) == 2
    assert "'seed'" in capsys.readouterr().err
    bad = json.loads(json.dumps(GLUE))
    bad["gluing"]["epsilon"] = 0.6
    assert run("glue", _write(tmp_path, bad), tmp_path) == 2
    (tmp_path / "junk.json").write_text("{not json")
    assert run("flow", tmp_path / "junk.json", tmp_path) == 2
    assert run("psh-check", _write(tmp_path, {"potential": {"kind": "nope"}}), tmp_path) == 2
    assert not (tmp_path / "report.json").exists()


def test_seed_flag_overrides_config(tmp_path):
    cfg = dict(CONFIGS["psh-check"])
    del cfg["seed"]
    assert run("psh-check", _write(tmp_path, cfg), tmp_path / "a", seed=1) == 0
    assert run("psh-check", _write(tmp_path, CONFIGS["psh-check"], "b.json"), tmp_path / "b") == 0
    a, b = _report(tmp_path / "a"), _report(tmp_path / "b")
    assert a.certificates == b.certificates


@pytest.mark.parametrize("command", ["glue", "flow", "levi", "sasaki-check"])
def test_reports_byte_identical_across_runs_and_workers(command, tmp_path):
    path = _write(tmp_path, CONFIGS[command])
    texts = []
    for i, w in enumerate([1, 1, 4]):
        run(command, path, tmp_path / str(i), workers=w)
        raw = json.loads((tmp_path / str(i) / "report.json").read_text())
        raw.pop("timing")
        texts.append(json.dumps(raw, sort_keys=True))
    assert texts[0] == texts[1] == texts[2]


def test_main_parses_arguments(tmp_path, capsys):
    path = _write(tmp_path, CONFIGS["reeb-deform"])
    assert main(["reeb-deform", "--config", str(path), "--out", str(tmp_path / "m")]) == 0
    assert _report(tmp_path / "m").details["ratios"] == ["1", "7/5"]
    with pytest.raises(SystemExit):
        main(["no-such-command", "--config", str(path)])
