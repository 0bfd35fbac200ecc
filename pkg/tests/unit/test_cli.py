"""Unit tests for qcnormal.cli.main."""

import json
import sys
from unittest.mock import patch

import numpy as np
import pytest

from qcnormal.cli.main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, build_parser, main, run
from qcnormal.core.curv import random_state
from qcnormal.core.models import Dim, ScalarKind
from qcnormal.core.scalars import format_scalar
from qcnormal.formatters.colors import Colors
from qcnormal.formatters.json import JSONFormatter


@pytest.fixture(autouse=True)
def no_colors():
    Colors.disable()
    yield
    Colors.detect()


class TestParser:
    """Test argument parsing."""

    def test_global_flags_after_subcommand(self):
        """Test global flags are accepted after the subcommand."""
        args = build_parser().parse_args(["verify", "--suite", "poly", "--n", "2", "--seed", "7"])
        assert args.suite == "poly"
        assert args.n == 2
        assert args.seed == 7

    def test_nested_subcommand(self):
        """Test poly lm-spectrum takes --m and the global flags."""
        args = build_parser().parse_args(["poly", "lm-spectrum", "--m", "3", "-vv"])
        assert args.action == "lm-spectrum"
        assert args.m == 3
        assert args.verbose == 2

    def test_geodesic_vectors(self):
        """Test comma separated vectors parse as floats."""
        args = build_parser().parse_args(["geodesic", "--X", "1,0,0,0.5", "--Y", "0,1,0"])
        assert args.X == [1.0, 0.0, 0.0, 0.5]
        assert args.Y == [0.0, 1.0, 0.0]

    def test_unknown_suite(self):
        """Test an unknown suite is a usage error."""
        with pytest.raises(SystemExit) as exc_info:
            build_parser().parse_args(["verify", "--suite", "nope"])
        assert exc_info.value.code == EXIT_USAGE

    def test_bad_vector(self):
        """Test a malformed vector is a usage error."""
        with pytest.raises(SystemExit) as exc_info:
            build_parser().parse_args(["geodesic", "--X", "1,a"])
        assert exc_info.value.code == EXIT_USAGE


class TestMain:
    """Test CLI entry point behaviour."""

    def test_no_arguments(self, capsys):
        """Test main with no arguments exits with a usage error."""
        with patch.object(sys, "argv", ["qcnormal"]):
            with pytest.raises(SystemExit) as exc_info:
                main()
            assert exc_info.value.code == EXIT_USAGE
        assert "usage:" in capsys.readouterr().err

    def test_verify_algebra(self, capsys):
        """Test the algebra suite passes and prints a tree."""
        with patch.object(sys, "argv", ["qcnormal", "verify", "--suite", "algebra"]):
            with pytest.raises(SystemExit) as exc_info:
                main()
            assert exc_info.value.code == EXIT_OK
        out = capsys.readouterr().out
        assert "QCNORMAL: verify --suite algebra" in out
        assert "Verdict: PASS" in out

    def test_invalid_n(self, capsys):
        """Test --n 0 is a configuration error."""
        assert run(["verify", "--suite", "algebra", "--n", "0"]) == EXIT_USAGE
        assert "Error: --n must be >= 1" in capsys.readouterr().err

    def test_invalid_trials(self, capsys):
        """Test --trials 0 is a configuration error."""
        assert run(["invar", "reduce", "--trials", "0"]) == EXIT_USAGE
        assert "--trials" in capsys.readouterr().err

    def test_invar_reduce_uses_tol(self, capsys):
        """Test invar reduce compares float constants with --tol."""
        argv = ["invar", "reduce", "--scalar", "f64", "--tol", "0.001", "--trials", "1"]
        assert run(argv + ["--json-out", "-"]) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert {c["tolerance"] for c in data["checks"]} == {0.001}

    def test_json_to_stdout(self, capsys):
        """Test --json-out - prints JSON instead of the tree."""
        assert run(["poly", "lm-spectrum", "--m", "2", "--json-out", "-"]) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data["command"] == "poly lm-spectrum"
        assert data["payload"]["rank"] == 10
        assert data["checks"][0]["name"] == "poly.kernel_L2"

    def test_json_file(self, tmp_path, capsys):
        """Test --json-out writes the report next to the tree output."""
        out = tmp_path / "report.json"
        assert run(["poly", "lm-spectrum", "--m", "3", "--json-out", str(out)]) == EXIT_OK
        assert "QCNORMAL" in capsys.readouterr().out
        assert json.loads(out.read_text())["passed"] is True

    def test_flat_geodesic(self, capsys):
        """Test the flat geodesic endpoint and the scaling spot-check."""
        argv = [
            "geodesic",
            "--X",
            "0.2,0,0,0",
            "--Y",
            "0,0.1,0",
            "--s",
            "0.5",
            "--check-scaling",
            "--json-out",
            "-",
        ]
        assert run(argv) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        end = data["payload"]["endpoint"]
        assert end["x"][0] == pytest.approx(0.1, abs=1e-8)
        assert end["t"][1] == pytest.approx(0.0125, abs=1e-8)
        assert data["checks"][0]["status"] == "pass"

    def test_geodesic_wrong_length(self, capsys):
        """Test an X of the wrong length is a usage error."""
        assert run(["geodesic", "--X", "1,0"]) == EXIT_USAGE
        assert "X of length 4" in capsys.readouterr().err

    def test_geodesic_trace(self, tmp_path):
        """Test --trace writes a CSV with a header and one row per sample."""
        trace = tmp_path / "trace.csv"
        code = run(["geodesic", "--X", "1,0,0,0", "--trace", str(trace), "--samples", "4"])
        assert code == EXIT_OK
        lines = trace.read_text().splitlines()
        assert lines[0].startswith("s,z0,")
        assert len(lines) == 5

    def test_missing_connection_file(self, tmp_path, capsys):
        """Test an unreadable connection file fails with exit code 1."""
        missing = tmp_path / "missing.json"
        assert run(["geodesic", str(missing), "--X", "1,0,0,0"]) == EXIT_FAILURE
        assert "cannot read" in capsys.readouterr().err

    def test_malformed_jets(self, tmp_path, capsys):
        """Test malformed jet JSON fails with a position."""
        jets = tmp_path / "jets.json"
        jets.write_text("[{")
        assert run(["normalize", "--jets", str(jets)]) == EXIT_FAILURE
        assert "malformed JSON" in capsys.readouterr().err

    def test_normalize_zero_jets(self, capsys):
        """Test normalizing the zero table leaves u = 0 and certifies the list."""
        assert run(["normalize", "--N", "4", "--json-out", "-"]) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data["payload"]["u"]["expr"] == "0"
        assert len(data["payload"]["vanishing"]) == 17

    def test_normalize_order_too_low(self):
        """Test --N 1 is a usage error."""
        assert run(["normalize", "--N", "1"]) == EXIT_USAGE

    def test_normalize_connection_out(self, tmp_path, capsys):
        """Test the written connection is read back by geodesic."""
        conn = tmp_path / "conn.json"
        argv = ["normalize", "--oracle", "flat", "--start", "random", "--N", "3"]
        assert run(argv + ["--connection-out", str(conn)]) == EXIT_OK
        data = json.loads(conn.read_text())
        assert data["dim"] == 7
        capsys.readouterr()
        assert run(["geodesic", str(conn), "--X", "0.1,0,0,0", "--json-out", "-"]) == EXIT_OK
        end = json.loads(capsys.readouterr().out)["payload"]["endpoint"]
        assert len(end["x"]) == 4
        assert len(end["t"]) == 3

    def test_connection_out_needs_flat_oracle(self, tmp_path):
        """Test --connection-out with the linearized oracle is a usage error."""
        conn = tmp_path / "conn.json"
        assert run(["normalize", "--connection-out", str(conn)]) == EXIT_USAGE
        assert not conn.exists()


class TestStateFiles:
    """Test point states read by verify --state."""

    @staticmethod
    def _write_state(path, scalar=ScalarKind.RATIONAL):
        rng = np.random.default_rng(4)
        state = random_state(Dim(1), rng, scalar, with_curvature=True, with_jets=True)
        path.write_text(json.dumps(JSONFormatter.state_to_dict(state)))
        return state

    def test_curv_suite_on_state(self, tmp_path, capsys):
        """Test the curv suite runs on the given state and echoes it."""
        path = tmp_path / "state.json"
        state = self._write_state(path)
        argv = ["verify", "--suite", "curv", "--state", str(path), "--json-out", "-"]
        assert run(argv) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert len(data["payload"]["states"]) == 1
        assert data["payload"]["states"][0]["S"] == format_scalar(state.S)
        statuses = {c["name"]: c["status"] for c in data["checks"]}
        assert statuses["curv.valid_states"] == "pass"

    def test_state_list_file(self, tmp_path, capsys):
        """Test a file holding a list of states feeds every one."""
        single = tmp_path / "one.json"
        self._write_state(single)
        many = tmp_path / "many.json"
        many.write_text("[" + single.read_text() + "," + single.read_text() + "]")
        argv = ["verify", "--suite", "curv", "--state", str(many), "--json-out", "-"]
        assert run(argv) == EXIT_OK
        assert len(json.loads(capsys.readouterr().out)["payload"]["states"]) == 2

    def test_scalar_mismatch(self, tmp_path, capsys):
        """Test a float state in a rational run is a usage error."""
        path = tmp_path / "state.json"
        self._write_state(path, ScalarKind.F64)
        assert run(["verify", "--suite", "curv", "--state", str(path)]) == EXIT_USAGE
        assert "scalar=f64" in capsys.readouterr().err

    def test_state_needs_curv_suite(self, tmp_path, capsys):
        """Test states given to another suite are a usage error."""
        path = tmp_path / "state.json"
        self._write_state(path)
        assert run(["verify", "--suite", "algebra", "--state", str(path)]) == EXIT_USAGE
        assert "curv suite" in capsys.readouterr().err
