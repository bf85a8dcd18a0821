import csv
import json
import subprocess
import sys

import pytest
from conftest import CONFIGS

from ddpsim.app import main
from ddpsim.io import checkpoint_load, read_checkpoint


def write_cfg(tmp_path, base, name="cfg.json", **changes):
    doc = json.loads((CONFIGS / f"{base}.json").read_text())
    for dotted, value in changes.items():
        node = doc
        *head, last = dotted.split(".")
        for k in head:
            node = node.setdefault(k, {})
        node[last] = value
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_validate_symmetric(capsys):
    assert main(["validate", "--config", str(CONFIGS / "symmetric.json")]) == 0
    out = capsys.readouterr().out
    assert "rho_n = 1\n" in out and "rho_p = 1\n" in out
    assert "FAIL" not in out


def test_validate_failure_exit_one(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "symmetric", **{"potentials.p.curvature": 2.0})
    assert main(["validate", "--config", cfg, "--quiet"]) == 1
    assert "H1b   FAIL" in capsys.readouterr().out


def test_simulate_gate_and_force(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "symmetric", **{"potentials.p.curvature": 2.0,
                                              "stepping.t_end": 0.0})
    assert main(["simulate", "--config", cfg, "--quiet"]) == 1
    assert "H1b" in capsys.readouterr().err
    assert main(["simulate", "--config", cfg, "--quiet", "--force"]) == 0


def test_simulate_t_end_zero_one_row(tmp_path):
    out = tmp_path / "ts.csv"
    cfg = write_cfg(tmp_path, "perturbed", **{"stepping.t_end": 0.0,
                                              "outputs.csv_path": str(out)})
    assert main(["simulate", "--config", cfg, "--quiet"]) == 0
    rows = list(csv.reader(out.open()))
    assert len(rows) == 2 and rows[0][0] == "t"


def test_simulate_csv_and_checkpoints_deterministic(tmp_path):
    paths = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        cfg = write_cfg(d, "perturbed", **{"stepping.t_end": 0.5, "stepping.sample_interval": 0.25,
                                           "outputs.csv_path": str(d / "ts.csv"),
                                           "outputs.checkpoint_path": str(d / "ck_{index}.bin"),
                                           "outputs.checkpoint_every": 1})
        assert main(["simulate", "--config", cfg, "--quiet"]) == 0
        paths.append(d)
    a, b = paths
    files = sorted(p.name for p in a.iterdir() if p.suffix in (".csv", ".bin"))
    assert files == ["ck_0.bin", "ck_1.bin", "ck_2.bin", "ts.csv"]
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = list(csv.DictReader((a / "ts.csv").open()))
    assert len(rows) == 3
    charges = [float(r["charge"]) for r in rows]
    assert max(charges) - min(charges) <= 1e-12 * abs(charges[0])
    assert checkpoint_load(a / "ck_2.bin").t == pytest.approx(0.5)


def test_steady_prints_residuals_and_checkpoint(tmp_path, capsys):
    ck = tmp_path / "steady.bin"
    cfg = write_cfg(tmp_path, "asymmetric", **{"outputs.checkpoint_path": str(ck)})
    assert main(["steady", "--config", cfg, "--quiet"]) == 0
    out = dict(line.split(" ", 1) for line in capsys.readouterr().out.splitlines())
    assert float(out["r_charge"]) <= 1e-8
    assert abs(float(out["D_n*D_p"]) - 1) <= 1e-14
    meta = read_checkpoint(ck)
    assert meta.alpha == pytest.approx(0.3)


def test_sweep_sigma_two_rows_decreasing(tmp_path):
    out = tmp_path / "sweep.csv"
    cfg = write_cfg(tmp_path, "sweep", **{"outputs.csv_path": str(out)})
    assert main(["sweep-sigma", "--config", cfg, "--quiet"]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [float(r["sigma"]) for r in rows] == [0.1, 0.01]
    d = [float(r["l1_distance"]) for r in rows]
    assert d[0] > d[1] > 0


@pytest.mark.parametrize("text,needle", [
    ('{"grid": {"L": 6, "N": 16}, "recombination": {"sigma": -0.1}}', "recombination.sigma"),
    ('{"grid": {"L": 6, "N": 16}', "syntax error"),
])
def test_config_errors_exit_two(tmp_path, capsys, text, needle):
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert main(["validate", "--config", str(path)]) == 2
    assert needle in capsys.readouterr().err


def test_missing_config_and_output_dir(tmp_path, capsys):
    assert main(["steady", "--config", str(tmp_path / "none.json")]) == 2
    cfg = write_cfg(tmp_path, "symmetric", **{"outputs.csv_path": str(tmp_path / "no" / "x.csv")})
    assert main(["simulate", "--config", cfg, "--quiet"]) == 2
    assert "does not exist" in capsys.readouterr().err


def test_console_script_usage():
    res = subprocess.run([sys.executable, "-m", "ddpsim.app"], capture_output=True, text=True)
    assert res.returncode == 2 and "usage" in res.stderr
