import json

import numpy as np
import pytest

from cpsals.cli import main
from cpsals.kruskal import load_factors, random_model, reconstruct
from cpsals.sals import MonitorViolation
from cpsals.tensors import write_coo
from cpsals.trace import read_trace


@pytest.fixture
def coo_file(tmp_path):
    truth = random_model((5, 4, 3), 2, 17)
    tensor = reconstruct(truth).to_sparse()
    path = tmp_path / "target.coo"
    write_coo(tensor, path)
    return path


def source_file(tmp_path, spec):
    path = tmp_path / "source.json"
    path.write_text(json.dumps(spec))
    return path


class TestDecompose:
    def test_end_to_end(self, tmp_path, coo_file, capsys):
        trace = tmp_path / "trace.csv"
        out = tmp_path / "factors"
        code = main([
            "decompose", "--input", str(coo_file), "--rank", "2",
            "--reg", "1e-6", "--sweeps", "60", "--tol", "1e-10", "--seed", "1",
            "--out", str(out), "--trace", str(trace), "--no-wall",
        ])
        assert code == 0
        assert "decompose:" in capsys.readouterr().out
        model = load_factors(out)
        assert model.shape == (5, 4, 3) and model.rank == 2
        rows = read_trace(trace)
        assert rows[-1].grad_norm <= 1e-10 or len(rows) == 60

    def test_missing_required_flag_is_usage_error(self, coo_file):
        assert main(["decompose", "--input", str(coo_file)]) == 1

    def test_missing_file_is_usage_error(self, tmp_path):
        assert main([
            "decompose", "--input", str(tmp_path / "nope.coo"), "--rank", "2",
        ]) == 1


class TestSals:
    def test_end_to_end(self, tmp_path, capsys):
        src = source_file(tmp_path, {
            "kind": "sparse_random", "shape": [5, 4, 3], "gamma": 0.2, "seed": 3,
        })
        trace = tmp_path / "trace.csv"
        code = main([
            "sals", "--source", str(src), "--rank", "2", "--reg", "0.01",
            "--step", "decr:1.0", "--batch", "2", "--blocks", "25",
            "--seed", "4", "--trace", str(trace), "--check-bounds", "--no-wall",
        ])
        assert code == 0
        assert "sals:" in capsys.readouterr().out
        rows = read_trace(trace)
        assert len(rows) == 25
        assert rows[-1].cumulative_samples == 50

    def test_bad_step_spec_is_usage_error(self, tmp_path):
        src = source_file(tmp_path, {
            "kind": "sparse_random", "shape": [4, 4], "gamma": 0.5, "seed": 1,
        })
        assert main([
            "sals", "--source", str(src), "--rank", "2", "--step", "exp:1.0",
        ]) == 1

    def test_monitor_violation_exit_code(self, tmp_path, monkeypatch):
        src = source_file(tmp_path, {
            "kind": "sparse_random", "shape": [4, 4], "gamma": 0.5, "seed": 1,
        })

        def boom(*args, **kwargs):
            raise MonitorViolation("synthetic")

        monkeypatch.setattr("cpsals.cli.sals_run", boom)
        assert main(["sals", "--source", str(src), "--rank", "2"]) == 2


class TestExperiment:
    def test_convergence_run(self, tmp_path, capsys):
        cfg = {
            "experiment": "convergence",
            "source": {"kind": "perturbed_cp", "shape": [5, 4, 3], "rank": 2,
                       "delta": 1.0, "seed": 3, "truth_seed": 8},
            "solver": {"lambda": 0.01, "rank": 2, "schedule": "decr:1.0",
                       "batch_sizes": [1], "max_blocks": 6, "seed": 2},
            "replicates": 1,
            "suppress_wall": True,
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        code = main([
            "experiment", "convergence", "--config", str(path),
            "--out", str(tmp_path / "results"),
        ])
        assert code == 0
        printed = capsys.readouterr().out
        assert "convergence_als.csv" in printed
        assert (tmp_path / "results" / "convergence_sals_decreasing.csv").exists()

    def test_name_mismatch_is_usage_error(self, tmp_path):
        cfg = {
            "experiment": "sparsity",
            "source": {"kind": "sparse_random", "shape": [4, 4], "gamma": 0.5, "seed": 1},
            "solver": {"lambda": 0.1, "rank": 2, "batch_sizes": [1]},
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert main([
            "experiment", "efficiency", "--config", str(path), "--out", str(tmp_path),
        ]) == 1

    def test_bad_json_is_usage_error(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        assert main([
            "experiment", "sparsity", "--config", str(path), "--out", str(tmp_path),
        ]) == 1

    def test_unknown_subcommand_is_usage_error(self):
        assert main(["calibrate"]) == 1
