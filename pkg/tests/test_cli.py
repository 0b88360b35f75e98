"""Command-line behavior: artifacts, determinism, and exit codes."""
import json

import numpy as np
import pytest

from conftest import SCENARIO_DIR

import eddymodes.cli as cli
from eddymodes import (
    InconclusiveError,
    build_operator_pair,
    load_scenario,
    solve_modes,
)
from eddymodes.io import read_matrix_csv, read_traces_csv, write_traces_csv

UNIFORM = SCENARIO_DIR / "uniform_plate.json"
PHANTOM = SCENARIO_DIR / "phantom_6x6.json"
TWO_MODE = SCENARIO_DIR / "two_mode.json"


def read_json(path):
    return json.loads(path.read_text())


def test_assemble_writes_operator_matrices(tmp_path):
    assert cli.run("assemble", UNIFORM, tmp_path, quiet=True) == 0
    scenario = load_scenario(UNIFORM)
    pair = build_operator_pair(scenario.grid, scenario.resistivity)
    assert np.array_equal(read_matrix_csv(tmp_path / "resistance.csv"), pair.R)
    assert np.array_equal(read_matrix_csv(tmp_path / "inductance.csv"), pair.L)


def test_modes_writes_decreasing_constants(tmp_path):
    assert cli.run("modes", UNIFORM, tmp_path, quiet=True) == 0
    taus = np.asarray(read_json(tmp_path / "taus.json")["taus"])
    assert np.all(np.diff(taus) < 0)
    scenario = load_scenario(UNIFORM)
    direct = solve_modes(build_operator_pair(scenario.grid, scenario.resistivity))
    assert np.array_equal(taus, direct.taus)
    modes_doc = read_json(tmp_path / "modes.json")
    assert np.asarray(modes_doc["modes"]).shape == (scenario.grid.n_cells,) * 2


def test_simulate_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.run("simulate", TWO_MODE, a, quiet=True) == 0
    assert cli.run("simulate", TWO_MODE, b, quiet=True) == 0
    assert (a / "traces.csv").read_bytes() == (b / "traces.csv").read_bytes()
    times, values, ids = read_traces_csv(a / "traces.csv")
    assert times.size == 200 and ids[0] == "loop0"
    assert np.all(np.isfinite(values))


def test_extract_recovers_generating_constants(tmp_path):
    assert cli.run("extract", TWO_MODE, tmp_path, quiet=True) == 0
    doc = read_json(tmp_path / "spectrum.json")
    expected = load_scenario(TWO_MODE).metadata["generating_taus"]
    got = np.asarray(doc["taus"])
    assert got.size == len(expected)
    assert np.allclose(got, expected, rtol=1e-6)
    assert doc["retained"] == 2
    assert doc["error_bound"] > 0


def test_image_with_explicit_constants(tmp_path):
    scenario = read_json(PHANTOM)
    taus_dir = tmp_path / "modes"
    assert cli.run("modes", PHANTOM, taus_dir, quiet=True) == 0
    measured = read_json(taus_dir / "taus.json")["taus"]
    scenario["imaging"]["measured_taus"] = measured[:8]
    for key in ("source", "sensors", "simulation", "extraction"):
        scenario.pop(key, None)
    p = tmp_path / "explicit.json"
    p.write_text(json.dumps(scenario))

    assert cli.run("image", p, tmp_path, quiet=True) == 0
    report = read_json(tmp_path / "imaging_report.json")
    true_cells = set(read_json(PHANTOM)["resistivity"]["cells"])
    assert true_cells <= set(report["outer_cells"])
    occupancy = (tmp_path / "occupancy.csv").read_text().strip().splitlines()
    assert len(occupancy) == 6 and all(len(r.split(",")) == 6 for r in occupancy)


def test_image_threads_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.run("image", PHANTOM, a, threads=1, quiet=True) == 0
    assert cli.run("image", PHANTOM, b, threads=2, quiet=True) == 0
    assert (a / "imaging_report.json").read_bytes() == \
        (b / "imaging_report.json").read_bytes()
    assert (a / "occupancy.csv").read_bytes() == (b / "occupancy.csv").read_bytes()


def test_pipeline_end_to_end(tmp_path):
    out = tmp_path / "run1"
    assert cli.run("pipeline", PHANTOM, out, quiet=True) == 0
    summary = read_json(out / "pipeline.json")
    for name in summary["artifacts"]:
        assert (out / name).exists(), name

    true_cells = set(summary["true_inclusion_cells"])
    assert true_cells == {7, 8, 13, 14}
    assert true_cells <= set(summary["outer_cells"])
    assert set(summary["inner_cells"]) <= set(summary["outer_cells"])

    modal = np.asarray(summary["modal_taus"])
    extracted = np.asarray(summary["extracted_taus"])
    n = extracted.size
    assert n >= 2
    assert np.allclose(extracted, modal[:n], rtol=1e-6)

    out2 = tmp_path / "run2"
    assert cli.run("pipeline", PHANTOM, out2, quiet=True) == 0
    for name in summary["artifacts"] + ["pipeline.json"]:
        assert (out / name).read_bytes() == (out2 / name).read_bytes(), name


def test_validation_failure_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.run("modes", bad, tmp_path) == 2
    assert "validation error:" in capsys.readouterr().err

    missing = tmp_path / "missing.json"
    assert cli.run("modes", missing, tmp_path) == 2
    assert "validation error:" in capsys.readouterr().err

    assert cli.run("frobnicate", UNIFORM, tmp_path) == 2
    assert "unknown command" in capsys.readouterr().err

    assert cli.run("modes", UNIFORM, tmp_path, threads=0) == 2
    assert "--threads" in capsys.readouterr().err


def test_extraction_failure_exits_3(tmp_path, capsys):
    rng = np.random.default_rng(5)
    times = np.linspace(0.0, 1.0, 300)
    write_traces_csv(tmp_path / "noise.csv", times,
                     rng.standard_normal((1, 300)), sensor_ids=["s"])
    doc = {
        "schema_version": 1,
        "seed": 0,
        "grid": {"nx": 2, "ny": 2, "pitch": 0.01, "thickness": 0.001},
        "resistivity": {"kind": "uniform", "eta": 1.7e-8},
        "extraction": {"max_order": 4, "traces_csv": "noise.csv"},
    }
    p = tmp_path / "noisy.json"
    p.write_text(json.dumps(doc))
    assert cli.run("extract", p, tmp_path) == 3
    assert "numerical failure in extraction:" in capsys.readouterr().err


def test_inconclusive_imaging_exits_4(tmp_path, capsys, monkeypatch):
    def raise_inconclusive(*args, **kwargs):
        raise InconclusiveError("nothing to compare")

    monkeypatch.setattr(cli, "run_imaging", raise_inconclusive)
    assert cli.run("image", PHANTOM, tmp_path) == 4
    assert "inconclusive imaging:" in capsys.readouterr().err


def test_command_requires_its_scenario_sections(tmp_path, capsys):
    assert cli.run("simulate", UNIFORM, tmp_path) == 2
    assert "needs the 'sensors' section" in capsys.readouterr().err
    assert cli.run("image", UNIFORM, tmp_path) == 2
    assert "needs the 'imaging' section" in capsys.readouterr().err


def test_main_parses_arguments(tmp_path, capsys):
    rc = cli.main(["modes", "--scenario", str(UNIFORM), "--out", str(tmp_path)])
    assert rc == 0
    assert "slowest tau" in capsys.readouterr().out
    rc = cli.main(["modes", "--scenario", str(UNIFORM), "--out", str(tmp_path),
                   "--quiet"])
    assert rc == 0
    assert capsys.readouterr().out == ""
    with pytest.raises(SystemExit):
        cli.main(["warp", "--scenario", str(UNIFORM), "--out", str(tmp_path)])


def test_progress_lines_unless_quiet(tmp_path, capsys):
    assert cli.run("assemble", UNIFORM, tmp_path) == 0
    out = capsys.readouterr().out
    assert "assembled" in out and "resistance.csv" in out
    assert cli.run("assemble", UNIFORM, tmp_path, quiet=True) == 0
    assert capsys.readouterr().out == ""
