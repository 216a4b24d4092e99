import json
import subprocess
import sys

import numpy as np
import pytest

from lambdalab.cli import main
from lambdalab.config import ConfigError, ExperimentConfig, bundled_configs, load_config
from lambdalab.families import families_close
from lambdalab.grid import Domain, GridField
from lambdalab.io import (ContainerError, load_family, load_field, load_solution, save_family,
                          save_field, save_solution)

S3_TOML = """
[domain]
kind = "torus"
resolution = [32, 32]

[solution]
target = "S3"
solver = "constant"
q = [1.0, 0.0]

[pipeline]
steps = {steps}

[tolerances]
twist_relation = {tol}
"""


def _write(tmp_path, steps='["twist"]', tol="1e-8", name="cfg.toml"):
    p = tmp_path / name
    p.write_text(S3_TOML.format(steps=steps, tol=tol))
    return str(p)


# --- containers ---------------------------------------------------------------

def test_field_round_trip(tmp_path):
    dom = Domain.patch((-1, 1), (0, 0.5), (16, 8))
    rng = np.random.default_rng(0)
    shape = dom.shape + (2, 2)
    f = GridField.one_form(dom, rng.normal(size=shape), 1j * rng.normal(size=shape))
    save_field(tmp_path / "f.sgf", f)
    g = load_field(tmp_path / "f.sgf")
    assert g.domain == dom and np.array_equal(g.dz, f.dz) and np.array_equal(g.dzbar, f.dzbar)


def test_family_and_solution_round_trip(tmp_path, strip_solution, strip_family):
    save_family(tmp_path / "fam.sgf", strip_family)
    save_solution(tmp_path / "sol.sgf", strip_solution)
    assert families_close(load_family(tmp_path / "fam.sgf"), strip_family) == 0
    sol = load_solution(tmp_path / "sol.sgf")
    assert np.array_equal(sol.u, strip_solution.u) and sol.target == "H3"


def test_container_corruption(tmp_path, s3_family):
    path = tmp_path / "fam.sgf"
    save_family(path, s3_family)
    data = path.read_bytes()
    (tmp_path / "bad.sgf").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(ContainerError):
        load_family(tmp_path / "bad.sgf")
    (tmp_path / "long.sgf").write_bytes(data + b"\0")
    with pytest.raises(ContainerError):
        load_family(tmp_path / "long.sgf")
    (tmp_path / "short.sgf").write_bytes(data[:-16])
    with pytest.raises(ContainerError):
        load_family(tmp_path / "short.sgf")


# --- config -------------------------------------------------------------------

def test_bundled_configs_load():
    assert {"s3_constant_twist", "h3_strip_lightcone"} <= set(bundled_configs())
    for name in bundled_configs():
        cfg = load_config(name)
        assert ExperimentConfig.from_toml(cfg.to_toml()).to_dict() == cfg.to_dict()


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: d["domain"].update(color="red"), "unknown key"),
    (lambda d: d.update(extra={}), "unknown table"),
    (lambda d: d["solution"].pop("q"), "missing key"),
    (lambda d: d["solution"].update(target="R3"), "target"),
    (lambda d: d["pipeline"].update(steps=["fly"]), "unknown pipeline step"),
    (lambda d: d.update(tolerances={"flatness": -1}), "non-negative"),
    (lambda d: d["solution"].update(solver="strip"), "patch"),
])
def test_config_validation(mutate, msg):
    d = load_config("s3_constant_twist").to_dict()
    mutate(d)
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict(d)


def test_config_parse_error():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_toml("[domain\nkind=")


# --- command line -----------------------------------------------------------

def test_twist_command(tmp_path, capsys):
    assert main(["twist", "--config", _write(tmp_path), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["schema_version"] == 1 and rep["pass"]
    tw = rep["results"]["twist"]
    assert abs(tw["before"]["energy_re"] - 1 / np.pi) < 1e-13
    assert abs(tw["after"]["energy_re"] - 2 / np.pi) < 1e-12
    assert abs(tw["deg_L"]) < 1e-12
    assert "PASS" in capsys.readouterr().out


def test_empty_pipeline(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", _write(tmp_path, steps="[]"), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["results"] == {} and rep["checks"] == [] and rep["pass"]


def test_zero_tolerance_fails(tmp_path, capsys):
    assert main(["twist", "--config", _write(tmp_path, tol="0.0"), "--out", str(tmp_path / "o")]) == 1
    assert "FAILED" in capsys.readouterr().err


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(S3_TOML.format(steps="[]", tol="1e-8") + "\n[output]\nbogus = 1\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["run", "--config", "no_such_config", "--out", str(tmp_path / "o")]) == 2
    # the lightcone step needs a hyperbolic patch
    assert main(["lightcone", "--config", _write(tmp_path), "--out", str(tmp_path / "o")]) == 2


def test_reports_deterministic(tmp_path):
    cfg = _write(tmp_path, steps='["energy", "twist", "dual", "residue"]')
    texts = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["run", "--config", cfg, "--out", str(out), "--seed", "3"]) == 0
        rep = json.loads((out / "report.json").read_text())
        rep.pop("created")
        texts.append(json.dumps(rep, sort_keys=True))
        assert (out / "energy_density.csv").exists() is False  # json only by default
    assert texts[0] == texts[1]


def test_bundled_s3_run(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", "s3_constant_twist", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert set(rep["results"]) == {"energy", "twist", "dual"}
    assert rep["results"]["energy"]["lift_gauge_spread"] < 1e-9
    assert (out / "energy_density.csv").read_text().startswith("s,t,density_re,density_im")


def test_build_command(tmp_path):
    out = tmp_path / "o"
    assert main(["build", "--config", _write(tmp_path), "--out", str(out)]) == 0
    assert load_family(out / "family.sgf").label
    assert load_solution(out / "solution.sgf").target == "S3"


def test_lightcone_command(tmp_path):
    out = tmp_path / "o"
    assert main(["lightcone", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert abs(rep["results"]["lightcone"]["metric_factor"] - 4) < 1e-4
    assert (out / "willmore.csv").exists()


def test_verify_mutation_is_caught(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["verify", "--mutate", "s3-sign", "--out", str(out)]) == 1
    rep = json.loads((out / "report.json").read_text())
    failed = {c["number"] for c in rep["criteria"] if not c["pass"]}
    assert 2 in failed
    assert (out / "timings.json").exists()


def test_subcommands_listed():
    res = subprocess.run([sys.executable, "-m", "lambdalab", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("build", "energy", "twist", "dual", "lightcone", "verify"):
        assert cmd in res.stdout
