import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from grwlab import cli, theorems
from grwlab.cli import ConfigError, load_config, main, parse_config, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """
[spacetime]
name = "steady_state"
m = 2

[hypersurfaces]
fixtures = false
graphs = [{ u = "0.5 + 0.2*x1 - 0.1*x2^2", name = "g" }, "0.7"]

[sampling]
mode = "random"
count = 6
seed = 5

[checks]
names = ["clap1", "clap2", "laps", "ncc"]

[theorems]
ids = ["teo1", "ste"]
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_small_run_passes_and_writes_outputs(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is True
    assert report["engine_version"]
    assert report["config"]["tolerances"]["clap1"] == 1e-6
    assert {s["name"] for s in report["surfaces"]} == {"g", "graph_1"}
    assert [s["is_slice"] for s in report["surfaces"]] == [False, True]
    assert {t["theorem"] for t in report["theorems"]} == {"teo1", "ste"}
    # laps is informational on a non-CMC graph and must not decide the run
    laps = [r for r in report["records"] if r["check"] == "laps" and r["surface"] == "g"]
    assert laps and not any(r["asserted"] for r in laps)


def test_totals_match_records(tmp_path):
    report, status = run(load_config(write(tmp_path, SMALL)))
    t = report["totals"]
    assert t["evaluations"] == 2 * 6
    assert t["evaluated"] + t["rejected"] == t["evaluations"]
    assert t["records"] == len(report["records"]) == t["evaluated"] * 4
    assert sum(a["count"] for a in report["checks"].values()) == t["records"]


def test_csv_format(tmp_path):
    out = tmp_path / "o"
    main(["run", str(write(tmp_path, SMALL)), "--out", str(out)])
    raw = (out / "points.csv").read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.reader(io.StringIO(raw.decode("utf-8"))))
    assert rows[0] == ["surface", "check", "point_coords", "lhs", "rhs", "residual", "margin", "pass"]
    first = rows[1]
    coords = [float(v) for v in first[2].split(";")]
    assert len(coords) == 2
    assert first[7] in ("true", "false")
    for v in first[3:6]:
        assert float(v) == float(repr(float(v)))


def test_determinism_bytewise(tmp_path):
    cfg = write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(a)]) == 0
    assert main(["run", str(cfg), "--out", str(b), "--jobs", "2"]) == 0
    assert (a / "points.csv").read_bytes() == (b / "points.csv").read_bytes()


def test_seed_flag_changes_sample(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["run", str(cfg), "--out", str(tmp_path / "a")])
    main(["run", str(cfg), "--out", str(tmp_path / "b"), "--seed", "6"])
    assert (tmp_path / "a" / "points.csv").read_bytes() != (tmp_path / "b" / "points.csv").read_bytes()


def test_env_seed_fallback(tmp_path, monkeypatch):
    cfg = write(tmp_path, SMALL.replace("seed = 5\n", ""))
    monkeypatch.delenv("GRWLAB_SEED", raising=False)
    assert main(["run", str(cfg), "--out", str(tmp_path / "x")]) == 2
    monkeypatch.setenv("GRWLAB_SEED", "5")
    assert main(["run", str(cfg), "--out", str(tmp_path / "env")]) == 0
    main(["run", str(write(tmp_path, SMALL, "c2.toml")), "--out", str(tmp_path / "cfg")])
    assert (tmp_path / "env" / "points.csv").read_bytes() == (tmp_path / "cfg" / "points.csv").read_bytes()


def test_unknown_check_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, SMALL.replace('"ncc"]', '"clap9"]'))
    assert main(["run", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "clap9" in err and "registry" in err and "clap1" in err
    assert main(["run", str(write(tmp_path, SMALL, "ok.toml")), "--checks", "clap9"]) == 2


@pytest.mark.parametrize(
    "mutation,field",
    [
        (lambda s: s.replace('name = "steady_state"', 'name = "nowhere"'), "spacetime"),
        (lambda s: s.replace('mode = "random"', 'mode = "sobol"'), "sampling.mode"),
        (lambda s: s.replace("count = 6", "count = 0"), "sampling.counts"),
        (lambda s: s.replace('ids = ["teo1", "ste"]', 'ids = ["teo99"]'), "theorems.ids"),
        (lambda s: s + '\n[tolerances]\nbogus = 1e-3\n', "tolerances"),
        (lambda s: s.replace("[sampling]", "[sampling]\nbox = [[-5.0, 5.0]]"), "sampling.box"),
        (lambda s: s.replace('u = "0.5 + 0.2*x1 - 0.1*x2^2"', 'u = "0.5 +"'), "hypersurfaces.graphs[0]"),
        (lambda s: s + "\nnot toml at all [[[\n", "TOML"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, mutation, field):
    assert main(["run", str(write(tmp_path, mutation(SMALL)))]) == 2
    assert field in capsys.readouterr().err


def test_missing_config_file_exit_2(tmp_path):
    assert main(["run", str(tmp_path / "absent.toml")]) == 2


def test_random_mode_needs_seed():
    cfg = parse_config({"spacetime": {"name": "minkowski"}, "sampling": {"mode": "random", "count": 3}})
    with pytest.raises(ConfigError, match="seed"):
        cli.sample_points(cfg, cli.build_spacetime(cfg.spacetime))


def test_ncc_violation_exit_1(tmp_path):
    out = tmp_path / "cosh"
    assert main(["run", str(CONFIGS / "cosh_ncc.toml"), "--out", str(out)]) == 1
    report = json.loads((out / "report.json").read_text())
    ncc = report["checks"]["ncc"]
    assert not ncc["pass"] and ncc["min_margin"] < 0
    witnessed = [r for r in report["records"] if r["check"] == "ncc" and not r["pass"]]
    assert witnessed and all("witness t=" in r["note"] for r in witnessed)
    assert report["checks"]["clap1"]["pass"]


def test_tol_override_can_fail_a_run(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["run", str(cfg), "--out", str(tmp_path / "t"), "--tol", "clap1=0", "--checks", "clap1"]) == 1
    report = json.loads((tmp_path / "t" / "report.json").read_text())
    assert report["config"]["tolerances"] == {"clap1": 0.0}
    assert main(["run", str(cfg), "--tol", "clap1"]) == 2


def test_rejected_points_are_counted(tmp_path):
    text = SMALL.replace('"0.7"', '"1.5*x1"')  # |du| = 1.5 > rho = 1: never spacelike
    text = text.replace('name = "steady_state"', 'name = "minkowski"')
    report, _ = run(load_config(write(tmp_path, text)))
    rej = [r for r in report["rejected"] if r["surface"] == "graph_1"]
    assert rej and all("DegenerateHypersurfaceError" in r["reason"] for r in rej)
    assert report["totals"]["rejected"] == len(report["rejected"])
    surf = {s["name"]: s for s in report["surfaces"]}
    assert surf["graph_1"]["rejected"] == len(rej)


def test_engine_fault_exit_3(tmp_path, monkeypatch):
    def boom(Mh, sample, tol=theorems.SLICE_TOL):
        raise theorems.EngineFault("slice criteria disagree")

    monkeypatch.setattr(theorems, "slice_classifier", boom)
    assert main(["run", str(write(tmp_path, SMALL)), "--out", str(tmp_path / "f")]) == 3


def test_steady_state_fixture_config_passes(tmp_path):
    out = tmp_path / "ss"
    assert main(["run", str(CONFIGS / "steady_state_fixtures.toml"), "--out", str(out), "--jobs", "4"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["totals"]["rejected"] == 0
    assert all(a["count"] == 800 for a in report["checks"].values())


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "grwlab", "run", str(write(tmp_path, SMALL)), "--out", str(tmp_path / "m")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "PASS overall" in proc.stdout
