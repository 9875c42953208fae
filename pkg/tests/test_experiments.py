import math
from pathlib import Path

import numpy as np
import pytest

from membrane_split.cli import main
from membrane_split.exceptions import ConfigError
from membrane_split.experiments import (
    EpsilonSchedule,
    ExperimentSpec,
    load_spec,
    parse_levels,
    read_config,
    read_csv,
    run_experiment,
    spec_from_mapping,
)
from membrane_split.metrics import eoc

ROOT = Path(__file__).resolve().parents[1]


def write_cfg(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_levels():
    assert parse_levels("1-3") == (1, 2, 3)
    assert parse_levels("0,2,4") == (0, 2, 4)
    assert parse_levels(" 5 ") == (5,)
    for bad in ("a", "3-1", "", "1-"):
        with pytest.raises(ConfigError):
            parse_levels(bad)


def test_read_config_errors():
    assert read_config("# c\nexperiment = probes  # trailing\n") == {"experiment": "probes"}
    with pytest.raises(ConfigError):
        read_config("experiment = probes\nexperiment = probes\n")
    with pytest.raises(ConfigError):
        read_config("no equals sign\n")


@pytest.mark.parametrize("raw", [
    {},
    {"experiment": "nonsense"},
    {"experiment": "probes", "colour": "red"},
    {"experiment": "sphere-fixed-eps", "epsilon": "-1"},
    {"experiment": "penalty-sweep", "epsilon_ratio": "2"},
    {"experiment": "flat-lagrange", "quad_degree": "9"},
    {"experiment": "flat-lagrange", "levels": "3,1"},
    {"experiment": "coupled-sweep", "coupled_c": "-2"},
    {"experiment": "sphere-fixed-eps", "mesh_family": "cube"},
    {"experiment": "sphere-fixed-eps", "penalty_weight": "0"},
    {"experiment": "flat-lagrange", "quad_degree": "four"},
])
def test_spec_validation(raw):
    with pytest.raises(ConfigError):
        spec_from_mapping(raw)


def test_defaults_and_overrides(tmp_path):
    p = write_cfg(tmp_path, "experiment = sphere-fixed-eps\n")
    spec = load_spec(p)
    assert spec.levels == (1, 2, 3, 4, 5)
    assert spec.schedule == EpsilonSchedule("fixed", 1e-8)
    spec = load_spec(p, {"levels": "1-2", "epsilon": "1e-3", "quad_degree": "6", "output": None})
    assert spec.levels == (1, 2) and spec.schedule.value == 1e-3 and spec.quad_degree == 6


def test_schedules():
    g = EpsilonSchedule("geometric", 0.2, 0.5, 5)
    assert g.sweep() == pytest.approx([0.2, 0.1, 0.05, 0.025, 0.0125])
    c = EpsilonSchedule("coupled", 0.2)
    assert c.coupled_constant(0.5) == pytest.approx(0.8)
    assert EpsilonSchedule("coupled", 0.2, C=3.0).coupled_constant(0.5) == 3.0


def check_csv(path, eoc_var):
    text = Path(path).read_bytes()
    assert b"\r" not in text and text.endswith(b"\n")
    header, rows = read_csv(path)
    assert header[0].startswith("membrane-split")
    assert any(h.startswith("lambda_exact:") for h in header)
    lines = [line for line in text.decode().splitlines() if not line.startswith("#")]
    cols = lines[0].split(",")
    first = dict(zip(cols, lines[1].split(",")))
    for c in cols:
        if c.startswith("EOC_"):
            assert first[c] == ""
    for line in lines[1:]:
        for tok in line.split(","):
            if tok and "e" in tok:
                mant = tok.split("e")[0].lstrip("-").replace(".", "")
                assert len(mant) == 6
    # EOCs recompute exactly from the printed neighbours
    for prev, cur in zip(rows, rows[1:]):
        for c in cols:
            if c.startswith("EOC_") and cur[c] is not None:
                name = c[4:]
                val = eoc(prev["E_" + name], cur["E_" + name], prev[eoc_var], cur[eoc_var])
                assert abs(val - cur[c]) <= 5e-6 * max(1.0, abs(val))
    return header, rows


def test_flat_run_writes_valid_csv(tmp_path):
    out = tmp_path / "flat.csv"
    cfg = write_cfg(tmp_path, f"experiment = flat-lagrange\nlevels = 0-2\noutput = {out}\n")
    assert main(["run", str(cfg)]) == 0
    header, rows = check_csv(out, "h")
    assert [r["level"] for r in rows] == [0, 1, 2]
    assert "lambda_order: origin,+x,-x,+y,-y" in header


def test_sphere_run_csv_and_reproducible(tmp_path):
    out = tmp_path / "s.csv"
    cfg = write_cfg(tmp_path, f"experiment = sphere-fixed-eps\nlevels = 0-2\noutput = {out}\n")
    assert main(["run", str(cfg)]) == 0
    first = out.read_bytes()
    header, rows = check_csv(out, "h")
    assert any(h.startswith("w_shift") for h in header)
    assert rows[-1]["p_bar"] == pytest.approx(math.log(2) - 1, abs=0.05)
    assert main(["run", str(cfg)]) == 0
    assert out.read_bytes() == first


def test_penalty_sweep_csv_uses_epsilon(tmp_path):
    out = tmp_path / "p.csv"
    cfg = write_cfg(
        tmp_path, f"experiment = penalty-sweep\nlevels = 2\nepsilon_count = 3\noutput = {out}\n"
    )
    assert main(["run", str(cfg)]) == 0
    header, rows = check_csv(out, "epsilon")
    assert "eoc_variable: epsilon" in header
    assert [r["epsilon"] for r in rows] == pytest.approx([0.2, 0.1, 0.05])


def test_coupled_sweep_header(tmp_path):
    out = tmp_path / "c.csv"
    cfg = write_cfg(tmp_path, f"experiment = coupled-sweep\nlevels = 1-2\noutput = {out}\n")
    assert main(["run", str(cfg)]) == 0
    header, rows = check_csv(out, "h")
    assert rows[0]["epsilon"] == pytest.approx(0.2, rel=1e-5)
    assert any(h.startswith("epsilon_schedule: coupled(C=") for h in header)


def test_cli_override_flags(tmp_path):
    out = tmp_path / "o.csv"
    cfg = write_cfg(tmp_path, "experiment = sphere-fixed-eps\nlevels = 0-4\n")
    rc = main(["run", str(cfg), "--levels", "0-1", "--epsilon", "1e-4",
               "--quad-degree", "5", "--output", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert len(rows) == 2 and rows[0]["epsilon"] == 1e-4
    assert "quad_degree: 5" in header


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    bad = write_cfg(tmp_path, "experiment = flat-lagrange\nquad_degree = 12\n")
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(bad), "--quad-degree", "4", "--levels", "x"]) == 2
    probes = write_cfg(tmp_path, "experiment = probes\n", "p.cfg")
    assert main(["run", str(probes)]) == 2
    flat = write_cfg(tmp_path, "experiment = flat-lagrange\n", "f.cfg")
    assert main(["probes", str(flat)]) == 2
    assert main(["mesh-info", "--problem", "sphere", "--level", "42"]) == 2
    # all six octahedron vertices constrained: the u-mean row is redundant
    sing = write_cfg(
        tmp_path, "experiment = sphere-fixed-eps\nconstraint_mode = lagrange\nmesh_family = octa\n"
        "levels = 0\n", "s.cfg")
    assert main(["run", str(sing)]) == 3
    err = capsys.readouterr().err
    assert "config error" in err and "numerical failure" in err


def test_mesh_info(capsys):
    assert main(["mesh-info", "--problem", "flat", "--level", "0"]) == 0
    out = capsys.readouterr().out
    assert "vertices: 61" in out and "triangles: 96" in out
    assert "constraint origin: vertex 0" in out
    assert main(["mesh-info", "--problem", "sphere", "--level", "1", "--family", "octa"]) == 0
    out = capsys.readouterr().out
    assert "vertices: 18" in out and "triangles: 32" in out


def test_shipped_configs_parse():
    for cfg in sorted((ROOT / "configs").glob("*.cfg")):
        spec = load_spec(cfg)
        assert spec.output and spec.output.startswith("results/")


def test_probe_subcommand(tmp_path, capsys):
    out = tmp_path / "probes.txt"
    cfg = write_cfg(tmp_path, f"experiment = probes\nlevels = 1-2\ncoplanar_level = 3\noutput = {out}\n")
    rc = main(["probes", str(cfg)])
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 7
    assert out.read_text().strip().splitlines() == lines
    assert rc == (0 if all(line.startswith("PASS") for line in lines) else 3)
