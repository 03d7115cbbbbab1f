import csv
import json
import math

import pytest

from qgmaryland import __version__
from qgmaryland.cli import DEFECT_COLUMNS, SIGMA_COLUMNS, SPECTRUM_COLUMNS, main
from qgmaryland.config import RunConfig
from qgmaryland.errors import InputError

BASE = """
[model]
lengths = [1.0]

[maryland]
g = 1.0
omega = [0.6180339887498949]
phi = 0.0

[compute]
window = [0.1, 9.5]
index_radius = 2
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(BASE + f'\n[output]\ndirectory = "{tmp_path / "out"}"\n')
    return path


def read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    header = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    return header, list(csv.DictReader(body))


def test_config_defaults_and_digest(config):
    cfg = RunConfig.load(config)
    assert cfg.compute.index_radius == 2
    assert cfg.defect_box == 32
    assert len(cfg.digest()) == 64
    assert cfg.digest() == RunConfig.load(config).digest()


@pytest.mark.parametrize("text", [
    "[model]\nlengths = [1.0]\n",
    BASE + "\n[compute.extra]\nx = 1\n",
    BASE.replace("omega = [0.6180339887498949]", "omega = [0.6, 0.4]"),
    BASE.replace("window = [0.1, 9.5]", "window = [3.0, 1.0]"),
    BASE + '\n[output]\nformat = "xml"\n',
    "not toml [",
])
def test_invalid_configs(tmp_path, text):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    with pytest.raises(InputError):
        RunConfig.load(path)


def test_bad_config_exit_code(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[model]\nlengths = [1.0]\n")
    assert main(["spectrum", "--config", str(path)]) == 2
    assert main(["spectrum", "--config", str(tmp_path / "missing.toml")]) == 2


def test_rational_frequency_exit_code(tmp_path):
    path = tmp_path / "rat.toml"
    path.write_text(BASE.replace("0.6180339887498949", "0.25"))
    assert main(["validate", "--config", str(path)]) == 2


def test_spectrum_csv(config, tmp_path):
    assert main(["spectrum", "--config", str(config)]) == 0
    header, rows = read_csv(tmp_path / "out" / "spectrum.csv")
    assert f"# version: {__version__}" in header
    assert any(h.startswith("# config_sha256: ") for h in header)
    assert tuple(rows[0].keys()) == SPECTRUM_COLUMNS
    lams = [float(r["lambda"]) for r in rows]
    assert lams == sorted(lams)
    ground = [r for r in rows if r["m"] == "0"][0]
    assert float(ground["lambda"]) == pytest.approx(math.pi**2 / 4, abs=1e-9)
    assert all(float(r["defect_at_lambda"]) < 1e-4 for r in rows)


def test_output_is_deterministic(config, tmp_path):
    out = tmp_path / "out" / "spectrum.csv"
    main(["spectrum", "--config", str(config)])
    first = out.read_bytes()
    main(["spectrum", "--config", str(config)])
    assert out.read_bytes() == first
    assert b"\r\n" not in first


def test_json_mirrors_csv(config, tmp_path):
    main(["sigma-curve", "--config", str(config), "--samples", "12"])
    main(["sigma-curve", "--config", str(config), "--samples", "12", "--format", "json"])
    _, rows = read_csv(tmp_path / "out" / "sigma_curve_gap0.csv")
    doc = json.loads((tmp_path / "out" / "sigma_curve_gap0.json").read_text())
    assert doc["meta"]["tool"] == "qgmaryland"
    assert tuple(doc["columns"]) == SIGMA_COLUMNS
    assert len(doc["records"]) == len(rows) == 12
    for r, j in zip(rows, doc["records"]):
        assert float(r["sigma"]) == j["sigma"]
    sig = [j["sigma"] for j in doc["records"]]
    assert all(b > a for a, b in zip(sig, sig[1:]))
    assert all(j["sigma_prime"] > 0 for j in doc["records"])


def test_eigenfunction_file(config, tmp_path):
    assert main(["eigenfunction", "--config", str(config), "--m", "1", "--samples", "5",
                 "--box", "16"]) == 0
    header, rows = read_csv(tmp_path / "out" / "eigenfunction_m1_gap0.csv")
    footer = {h.split(":")[0][2:]: h.split(": ", 1)[1] for h in header}
    assert float(footer["decay_slope"]) < 0
    verts = {r["n"]: float(r["value"]) for r in rows if r["kind"] == "vertex"}
    for r in rows:
        if r["kind"] == "edge" and float(r["t"]) == 0.0 and r["n"] in verts:
            assert float(r["value"]) == pytest.approx(verts[r["n"]], abs=1e-12)
    flux = [float(r["flux_residual"]) for r in rows if r["kind"] == "vertex"]
    assert max(flux) < 1e-6


def test_eigenfunction_wrong_index_dimension(config):
    assert main(["eigenfunction", "--config", str(config), "--m", "1", "2"]) == 2


def test_defect_scan_file(config, tmp_path):
    assert main(["defect-scan", "--config", str(config), "--grid", "30", "--N", "12"]) == 0
    header, rows = read_csv(tmp_path / "out" / "defect_scan_gap0.csv")
    assert tuple(rows[0].keys()) == DEFECT_COLUMNS
    assert all(float(r["defect"]) >= 0 for r in rows)
    assert any(h.startswith("# matched_records: ") for h in header)


def test_validate_command(config, tmp_path):
    assert main(["validate", "--config", str(config)]) == 0
    _, rows = read_csv(tmp_path / "out" / "validate.csv")
    assert [int(r["norm"]) for r in rows][:5] == [1, 2, 3, 5, 8]


def test_unknown_gap(config):
    assert main(["sigma-curve", "--config", str(config), "--gap", "3"]) == 2


def test_pole_at_origin_exit_code(tmp_path, capsys):
    path = tmp_path / "pole.toml"
    path.write_text(BASE.replace("phi = 0.0", f"phi = {math.pi / 2!r}"))
    assert main(["validate", "--config", str(path)]) == 2
    assert "m=(0,)" in capsys.readouterr().err


def test_half_frequency_message_names_index(tmp_path, capsys):
    path = tmp_path / "half.toml"
    path.write_text(BASE.replace("0.6180339887498949", "0.5"))
    assert main(["validate", "--config", str(path)]) == 2
    assert "m=(2,)" in capsys.readouterr().err
