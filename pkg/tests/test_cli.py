"""End-to-end tests for the command line interface.

Every test drives ``cournot.cli.main`` in process with small problem
sizes and checks exit codes, emitted files, and schemas. Runs are kept
deterministic so reruns of the same configuration can be compared byte
for byte.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from cournot import Grid1D, uniform_measure
from cournot.cli import main


SMALL = ["--n-points", "400", "--n-cells", "40"]


def _read_csv(path, n_cols):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    assert data.shape[1] == n_cols
    return data


def _header(path):
    return Path(path).read_text().splitlines()[0]


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def fig1_dir(work):
    out = work / "fig1_a"
    code = main(["solve-congestion", "--preset", "fig1", *SMALL,
                 "--out", str(out)])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def fig1_dir_again(work):
    out = work / "fig1_b"
    code = main(["solve-congestion", "--preset", "fig1", *SMALL,
                 "--out", str(out)])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def fig1_manifest(fig1_dir):
    with open(fig1_dir / "manifest.json") as fh:
        return json.load(fh)


class TestSolveOutputs:
    def test_expected_files_exist(self, fig1_dir):
        for name in ("density.csv", "profile.csv", "level_curves.csv",
                     "assignment.csv", "convergence.csv", "nestedness.json",
                     "manifest.json"):
            assert (fig1_dir / name).is_file(), name

    def test_density_schema_and_mass(self, fig1_dir):
        assert _header(fig1_dir / "density.csv") == "y,density"
        data = _read_csv(fig1_dir / "density.csv", 2)
        assert data.shape[0] == 40
        dy = data[1, 0] - data[0, 0]
        assert abs(data[:, 1].sum() * dy - 1.0) < 1e-9
        assert np.all(data[:, 1] >= 0)

    def test_profile_schema(self, fig1_dir):
        assert _header(fig1_dir / "profile.csv") == "y,k,v"
        data = _read_csv(fig1_dir / "profile.csv", 3)
        assert data.shape[0] == 40
        assert np.all(np.isfinite(data))

    def test_level_curves_schema(self, fig1_dir):
        assert _header(fig1_dir / "level_curves.csv") == "y_level,k,x1,x2"
        data = _read_csv(fig1_dir / "level_curves.csv", 4)
        assert len(np.unique(data[:, 0])) <= 20
        r = np.hypot(data[:, 2], data[:, 3])
        assert np.all(r <= 1.0 + 1e-9)

    def test_assignment_schema(self, fig1_dir):
        assert _header(fig1_dir / "assignment.csv") == "x1,x2,weight,assigned_y"
        data = _read_csv(fig1_dir / "assignment.csv", 4)
        assert data.shape[0] == 400
        assert abs(data[:, 2].sum() - 1.0) < 1e-12
        assert np.all(data[:, 3] >= 0.0)
        assert np.all(data[:, 3] <= np.pi / 6 + 1e-12)

    def test_convergence_schema(self, fig1_dir, fig1_manifest):
        assert _header(fig1_dir / "convergence.csv") == "iter,l1_delta,residual"
        data = _read_csv(fig1_dir / "convergence.csv", 3)
        assert data.shape[0] == fig1_manifest["iterations"]
        assert np.array_equal(data[:, 0], np.arange(1, data.shape[0] + 1))
        assert data[-1, 1] <= 1e-6

    def test_manifest_contents(self, fig1_manifest):
        m = fig1_manifest
        assert m["preset"] == "fig1"
        assert m["action"] == "solve-congestion"
        assert m["n_points"] == 400
        assert m["n_cells"] == 40
        assert m["converged"] is True
        assert 0 < m["residual"] < 0.05
        assert m["nestedness"]["is_nested"] is True
        assert m["nestedness"]["total_violations"] == 0
        assert len(m["config_hash"]) == 64
        assert int(m["config_hash"], 16) >= 0
        assert m["runtime_seconds"] > 0

    def test_nestedness_json(self, fig1_dir, fig1_manifest):
        with open(fig1_dir / "nestedness.json") as fh:
            report = json.load(fh)
        assert report == fig1_manifest["nestedness"]
        assert report["pair_stride"] == 1
        assert report["violations"] == []


class TestDeterminism:
    def test_data_files_byte_identical(self, fig1_dir, fig1_dir_again):
        for name in ("density.csv", "profile.csv", "level_curves.csv",
                     "assignment.csv", "convergence.csv", "nestedness.json"):
            a = (fig1_dir / name).read_bytes()
            b = (fig1_dir_again / name).read_bytes()
            assert a == b, name

    def test_manifests_match_up_to_runtime(self, fig1_dir, fig1_dir_again):
        with open(fig1_dir / "manifest.json") as fh:
            a = json.load(fh)
        with open(fig1_dir_again / "manifest.json") as fh:
            b = json.load(fh)
        a.pop("runtime_seconds")
        b.pop("runtime_seconds")
        assert a == b

    def test_config_hash_ignores_out_dir(self, fig1_dir, fig1_dir_again):
        with open(fig1_dir / "manifest.json") as fh:
            a = json.load(fh)
        with open(fig1_dir_again / "manifest.json") as fh:
            b = json.load(fh)
        assert a["config_hash"] == b["config_hash"]


class TestOtherSolvers:
    def test_solve_bestreply_preset(self, work):
        out = work / "fig3_small"
        code = main(["solve-bestreply", "--preset", "fig3", *SMALL,
                     "--out", str(out)])
        assert code == 0
        data = _read_csv(out / "density.csv", 2)
        dy = data[1, 0] - data[0, 0]
        assert abs(data[:, 1].sum() * dy - 1.0) < 1e-9
        with open(out / "manifest.json") as fh:
            m = json.load(fh)
        assert m["action"] == "solve-bestreply"
        assert m["converged"] is True

    def test_solve_sinkhorn_preset(self, work):
        out = work / "fig1_sinkhorn"
        code = main(["solve-sinkhorn", "--preset", "fig1", *SMALL,
                     "--eps", "0.1", "--out", str(out)])
        assert code == 0
        with open(out / "manifest.json") as fh:
            m = json.load(fh)
        assert m["action"] == "solve-sinkhorn"
        assert m["diagnostics"]["mode"] == "congestion"
        assert m["diagnostics"]["eps"] == 0.1
        assert m["diagnostics"]["row_marginal_error"] < 1e-12

    def test_check_nestedness_subcommand(self, work, capsys):
        out = work / "nest"
        code = main(["check-nestedness", "--preset", "fig1", *SMALL,
                     "--out", str(out)])
        assert code == 0
        with open(out / "nestedness.json") as fh:
            report = json.load(fh)
        assert report["is_nested"] is True
        with open(out / "manifest.json") as fh:
            m = json.load(fh)
        assert m["action"] == "check-nestedness"
        assert "nested=True" in capsys.readouterr().out

    def test_compare_solvers_via_run(self, work, capsys):
        out = work / "fig5_run"
        cfg = {"preset": "fig5", "n_points": 400, "n_cells": 40,
               "eps": 0.1, "out_dir": str(out)}
        cfg_path = work / "fig5.json"
        cfg_path.write_text(json.dumps(cfg))
        code = main(["run", "--config", str(cfg_path)])
        assert code == 0
        assert (out / "bestreply" / "density.csv").is_file()
        assert (out / "sinkhorn" / "density.csv").is_file()
        assert (out / "comparison.csv").is_file()
        names = [line.split(",")[0]
                 for line in (out / "comparison.csv").read_text().splitlines()[1:]]
        assert names == ["w1", "l1", "argmax_offset_cells", "support_cells_a",
                         "support_cells_b", "support_diff_cells"]
        with open(out / "manifest.json") as fh:
            m = json.load(fh)
        assert m["action"] == "compare-solvers"
        assert "w1," in capsys.readouterr().out


class TestRunSubcommand:
    def test_run_json_config(self, work):
        out = work / "run_out"
        cfg = {"preset": "fig1", "n_points": 400, "n_cells": 40,
               "out_dir": str(out)}
        cfg_path = work / "run_cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        code = main(["run", "--config", str(cfg_path)])
        assert code == 0
        assert (out / "density.csv").is_file()

    def test_run_out_flag_overrides_config(self, work):
        out = work / "run_flag_out"
        cfg = {"preset": "fig1", "n_points": 400, "n_cells": 40,
               "out_dir": str(work / "never_used")}
        cfg_path = work / "run_cfg2.json"
        cfg_path.write_text(json.dumps(cfg))
        code = main(["run", "--config", str(cfg_path), "--out", str(out)])
        assert code == 0
        assert (out / "density.csv").is_file()
        assert not (work / "never_used").exists()

    def test_missing_out_dir(self, work, capsys):
        cfg_path = work / "no_out.json"
        cfg_path.write_text(json.dumps({"preset": "fig1"}))
        code = main(["run", "--config", str(cfg_path)])
        assert code == 1
        assert "output directory" in capsys.readouterr().err


class TestInputErrors:
    def test_no_arguments(self, capsys):
        assert main([]) == 1
        assert "error:" in capsys.readouterr().err

    def test_malformed_json(self, work, capsys):
        bad = work / "bad.json"
        bad.write_text("{not json")
        code = main(["run", "--config", str(bad)])
        assert code == 1
        err = capsys.readouterr().err
        assert "parse error" in err
        assert "line 1" in err
        assert "column" in err

    def test_missing_config_file(self, work, capsys):
        code = main(["run", "--config", str(work / "absent.json")])
        assert code == 1
        assert "cannot read config" in capsys.readouterr().err

    def test_unknown_preset(self, work, capsys):
        code = main(["solve-congestion", "--preset", "fig99",
                     "--out", str(work / "x")])
        assert code == 1
        err = capsys.readouterr().err
        assert "unknown preset" in err
        assert "fig1" in err

    def test_unknown_config_field(self, work, capsys):
        cfg_path = work / "unknown_field.json"
        cfg_path.write_text(json.dumps({"preset": "fig1", "bogus": 3,
                                        "out_dir": str(work / "x")}))
        code = main(["run", "--config", str(cfg_path)])
        assert code == 1
        assert "unknown config field 'bogus'" in capsys.readouterr().err

    def test_unknown_action(self, work, capsys):
        cfg_path = work / "unknown_action.json"
        cfg_path.write_text(json.dumps({"action": "dance",
                                        "out_dir": str(work / "x")}))
        code = main(["run", "--config", str(cfg_path)])
        assert code == 1
        err = capsys.readouterr().err
        assert "dance" in err
        assert "solve-congestion" in err

    def test_non_convergence_exit_code(self, work):
        out = work / "one_iter"
        code = main(["solve-congestion", "--preset", "fig1", *SMALL,
                     "--max-iters", "1", "--out", str(out)])
        assert code == 2
        with open(out / "manifest.json") as fh:
            m = json.load(fh)
        assert m["converged"] is False


class TestCompareSubcommand:
    def test_identical_dirs_give_zero_metrics(self, fig1_dir, work, capsys):
        out = work / "cmp_same"
        code = main(["compare", str(fig1_dir), str(fig1_dir),
                     "--out", str(out)])
        assert code == 0
        lines = (out / "comparison.csv").read_text().splitlines()
        assert lines[0] == "metric,value"
        metrics = dict(line.split(",") for line in lines[1:])
        assert float(metrics["w1"]) == 0.0
        assert float(metrics["l1"]) == 0.0
        assert float(metrics["argmax_offset_cells"]) == 0.0
        assert float(metrics["support_diff_cells"]) == 0.0
        assert float(metrics["support_cells_a"]) > 0
        assert metrics["support_cells_a"] == metrics["support_cells_b"]
        assert "w1," in capsys.readouterr().out

    def test_compare_without_out_dir_prints_only(self, fig1_dir, capsys):
        code = main(["compare", str(fig1_dir), str(fig1_dir)])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("w1,")

    def test_mismatched_grids(self, fig1_dir, work, capsys):
        other = work / "coarse_density"
        other.mkdir()
        uniform_measure(Grid1D(0.0, np.pi / 6, 50)).to_csv(other / "density.csv")
        code = main(["compare", str(fig1_dir), str(other)])
        assert code == 1
        assert "different grids" in capsys.readouterr().err

    def test_missing_density_file(self, work, capsys):
        code = main(["compare", str(work / "ghost_a"), str(work / "ghost_b")])
        assert code == 1


class TestOracleSubcommand:
    def _write_instance(self, work, cols):
        c_path = work / "cost_mat.csv"
        np.savetxt(c_path, np.array([[0.0, 1.0], [1.0, 0.0]]), delimiter=",")
        r_path = work / "rows.csv"
        np.savetxt(r_path, np.array([0.6, 0.4]), delimiter=",")
        col_path = work / "cols.csv"
        np.savetxt(col_path, np.asarray(cols), delimiter=",")
        return c_path, r_path, col_path

    def test_oracle_outputs_and_certificates(self, work, capsys):
        c_path, r_path, col_path = self._write_instance(work, [0.4, 0.6])
        out = work / "oracle_out"
        code = main(["oracle-ot", "--cost-matrix", str(c_path),
                     "--row-weights", str(r_path),
                     "--col-weights", str(col_path), "--out", str(out)])
        assert code == 0
        coupling = np.loadtxt(out / "coupling.csv", delimiter=",", ndmin=2)
        assert coupling.shape == (2, 2)
        assert np.allclose(coupling.sum(axis=1), [0.6, 0.4], atol=1e-9)
        assert np.allclose(coupling.sum(axis=0), [0.4, 0.6], atol=1e-9)
        with open(out / "oracle.json") as fh:
            report = json.load(fh)
        assert abs(report["value"] - 0.2) < 1e-9
        assert report["dual_feasibility"] <= 1e-9
        assert report["complementary_slackness"] <= 1e-9
        assert report["duality_gap"] <= 1e-9
        assert report["row_error"] <= 1e-9
        assert report["col_error"] <= 1e-9
        assert "optimal transport cost" in capsys.readouterr().out

    def test_oracle_unbalanced_marginals(self, work, capsys):
        c_path, r_path, col_path = self._write_instance(work, [0.5, 0.6])
        code = main(["oracle-ot", "--cost-matrix", str(c_path),
                     "--row-weights", str(r_path),
                     "--col-weights", str(col_path),
                     "--out", str(work / "oracle_bad")])
        assert code == 1
        assert "total masses differ" in capsys.readouterr().err

    def test_oracle_unreadable_matrix(self, work, capsys):
        code = main(["oracle-ot", "--cost-matrix", str(work / "nope.csv"),
                     "--row-weights", str(work / "rows.csv"),
                     "--col-weights", str(work / "cols.csv"),
                     "--out", str(work / "oracle_missing")])
        assert code == 1
        assert "cannot read cost matrix" in capsys.readouterr().err

    def test_oracle_via_run_requires_paths(self, work, capsys):
        cfg_path = work / "oracle_cfg.json"
        cfg_path.write_text(json.dumps({"action": "oracle-ot",
                                        "out_dir": str(work / "x")}))
        code = main(["run", "--config", str(cfg_path)])
        assert code == 1
        assert "oracle-ot config is missing" in capsys.readouterr().err
