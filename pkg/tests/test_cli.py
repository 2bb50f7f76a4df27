import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dtnafem.cli import (EXIT_CONFIG, EXIT_GEOMETRY, EXIT_OK, EXIT_SOLVER, SCENARIOS, load_config,
                         main, parse_config, run)
from dtnafem.errors import ParseError, ValidationError
from dtnafem.export import CSV_HEADER, read_convergence_csv, read_vtk_point_data

SMALL = "max_dof=1500\ntolerance=1e-6\n"


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestParse:
    def test_example1_with_kappa(self):
        cfg = parse_config("scenario=example1\nkappa=1")
        assert cfg.kappa == 1 and cfg.theta == pytest.approx(math.pi / 6)
        assert cfg.profile == "flat" and cfg.period == 4

    def test_tau_out_of_range(self):
        with pytest.raises(ValidationError, match="tau"):
            parse_config("tau=1.5")

    @pytest.mark.parametrize("text", ["", "   \n# only a comment\n"])
    def test_empty(self, text):
        with pytest.raises(ParseError):
            parse_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_config(tmp_path / "absent.cfg")

    def test_unknown_key_line_number(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_config("scenario=example1\n# note\nfoo=1\n")

    def test_duplicate_and_malformed(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_config("kappa=1\nkappa=2")
        with pytest.raises(ParseError, match="line 1"):
            parse_config("kappa 1")
        with pytest.raises(ParseError):
            parse_config("kappa=__import__('os')")

    def test_expressions_and_alias(self):
        cfg = parse_config("theta=pi/5\nlambda=2\nmu=sqrt(16)")
        assert cfg.theta == pytest.approx(math.pi / 5) and cfg.lam == 2 and cfg.mu == 4

    def test_example4_defaults(self):
        cfg = parse_config("scenario=example4")
        assert (cfg.mu, cfg.lam) == (4, 2)
        assert cfg.theta == pytest.approx(math.pi / 5)
        assert cfg.period == pytest.approx(2 * math.pi)
        x = np.linspace(0, 2 * math.pi, 11)
        assert_allclose(cfg.make_profile()(x), 0.1 + 0.15 * np.sin(x) + 0.35 * np.cos(5 * x),
                        atol=1e-15)

    def test_example3_defaults(self):
        cfg = parse_config("scenario=example3")
        assert (cfg.mu, cfg.lam, cfg.period, cfg.teeth) == (3, 2, 5, 3)

    def test_custom_polyline(self):
        cfg = parse_config("scenario=custom\nprofile=polyline\npoints=0:0; 1:0.3; 4:0")
        assert cfg.make_profile().corners == (0.0, 1.0)

    def test_override_keeps_scenario(self):
        cfg = parse_config("scenario=example2\nkappa=2")
        assert cfg.kappa == 2 and cfg.profile == SCENARIOS["example2"]["profile"]


def test_run_outputs(tmp_path):
    out = tmp_path / "o"
    cfg = parse_config(SMALL + f"export_vtk=true\noutput_dir={out}\n")
    assert run(cfg) == EXIT_OK
    rows, status = read_convergence_csv(out / "convergence.csv")
    assert (out / "convergence.csv").read_text().splitlines()[0] == CSV_HEADER
    assert status == "budget_exhausted"
    assert all(r["wall_ms"] is None for r in rows)
    for r in rows:
        it = int(r["iter"])
        assert (out / f"mesh_{it}.txt").exists()
        data = read_vtk_point_data(out / f"solution_{it}.vtk")
        assert set(data) == {"Re_p", "Im_p", "Re_u1", "Im_u1", "Re_u2", "Im_u2", "region"}
    first = (out / "solution_0.vtk").read_text().splitlines()
    assert first[0] == "# vtk DataFile Version 3.0"


def test_vtk_standard_reader(tmp_path):
    meshio = pytest.importorskip("meshio")
    out = tmp_path / "o"
    assert run(parse_config("max_dof=500\nexport_vtk=1\n" + f"output_dir={out}")) == EXIT_OK
    m = meshio.read(out / "solution_0.vtk")
    own = read_vtk_point_data(out / "solution_0.vtk")
    assert m.cells[0].type == "triangle"
    assert_allclose(m.point_data["Re_p"].ravel(), own["Re_p"])
    assert set(np.unique(m.point_data["region"])) == {0, 1, 2}


def test_e_h_blank_without_exact(tmp_path):
    out = tmp_path / "o"
    assert run(parse_config("scenario=example2\nmax_dof=800\n" + f"output_dir={out}")) == EXIT_OK
    rows, _ = read_convergence_csv(out / "convergence.csv")
    assert all(r["e_h"] is None for r in rows)


def test_byte_identical_rerun(tmp_path):
    texts = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert run(parse_config(SMALL + f"output_dir={out}")) == EXIT_OK
        texts.append((out / "convergence.csv").read_bytes())
    assert texts[0] == texts[1]


def test_main_mode_both_layout(tmp_path, capsys):
    path = write_cfg(tmp_path, SMALL)
    assert main(["solve", "--config", str(path), "--mode", "both", "--out",
                 str(tmp_path / "both")]) == EXIT_OK
    for mode in ("adaptive", "uniform"):
        assert (tmp_path / "both" / mode / "convergence.csv").exists()
    printed = capsys.readouterr().out
    assert "adaptive (N=" in printed and "uniform (N=" in printed


@pytest.mark.parametrize("text,code", [
    ("tau=1.5", EXIT_CONFIG),
    ("bogus=1", EXIT_CONFIG),
    ("scenario=custom\nprofile=polyline\npoints=0:0;0.05:2;4:0", EXIT_GEOMETRY),
    ("scenario=example1\nkappa=2", EXIT_SOLVER),
])
def test_exit_codes(tmp_path, text, code):
    path = write_cfg(tmp_path, text + f"\noutput_dir={tmp_path / 'o'}\n")
    assert main(["solve", "--config", str(path)]) == code


def test_missing_config_exit_code(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG


def test_example1_adaptive_not_worse_than_uniform(tmp_path):
    out = tmp_path / "cmp"
    cfg = parse_config(f"scenario=example1\nmode=both\nmax_dof=40000\ntolerance=1e-6\n"
                       f"output_dir={out}")
    assert run(cfg) == EXIT_OK
    ad, _ = read_convergence_csv(out / "adaptive" / "convergence.csv")
    un, _ = read_convergence_csv(out / "uniform" / "convergence.csv")
    ud, ue = float(un[-1]["dof"]), float(un[-1]["eps_h"])
    dof = np.array([float(r["dof"]) for r in ad])
    eps = np.array([float(r["eps_h"]) for r in ad])
    # adaptive estimate at the uniform final DoF, interpolated log-log
    at_ud = math.exp(np.interp(math.log(ud), np.log(dof), np.log(eps)))
    assert at_ud <= ue
    assert eps[-1] <= ue
