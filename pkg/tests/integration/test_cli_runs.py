"""Integration tests running whole CLI commands."""

import csv
import json

import numpy as np
import pytest

from qcnormal.cli.main import EXIT_OK, run
from qcnormal.core.models import Dim
from qcnormal.core.suites import perturbed_connection
from qcnormal.formatters.colors import Colors
from qcnormal.formatters.json import JSONFormatter


@pytest.fixture(autouse=True)
def no_colors():
    Colors.disable()
    yield
    Colors.detect()


class TestVerify:
    """Whole verification suites through the CLI."""

    @pytest.mark.parametrize("suite", ["curv", "conf", "invar"])
    def test_exact_suites(self, suite, tmp_path, capsys):
        """Test the exact suites pass and write a JSON report."""
        out = tmp_path / f"{suite}.json"
        code = run(["verify", "--suite", suite, "--trials", "2", "--json-out", str(out)])
        data = json.loads(out.read_text())
        assert code == EXIT_OK, data["statistics"]["failed"]
        assert data["config"]["trials"] == 2
        assert all(c["name"].startswith(suite + ".") for c in data["checks"])
        assert "Verdict: PASS" in capsys.readouterr().out

    def test_geo_suite_float(self, capsys):
        """Test the float geodesic suite passes."""
        assert run(["verify", "--suite", "geo", "--trials", "2"]) == EXIT_OK

    def test_invar_reduce(self, capsys):
        """Test invar reduce lists every pattern with its target."""
        assert run(["invar", "reduce", "--trials", "2", "--json-out", "-"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)["payload"]
        labels = {row["pattern"] for row in payload["patterns"]}
        assert {"metric.abcd", "acs2.1", "acs3.1"} <= labels
        metric = next(row for row in payload["patterns"] if row["pattern"] == "metric.abcd")
        assert metric["constant"] == "1"
        assert metric["target"] == "c*|W|^2"


class TestGeodesicFiles:
    """Geodesics of connections read from disk."""

    @pytest.fixture
    def connection_file(self, tmp_path):
        conn = perturbed_connection(Dim(1), np.random.default_rng(2))
        path = tmp_path / "connection.json"
        path.write_text(json.dumps(JSONFormatter.connection_to_dict(conn)))
        return path

    def test_scaling_law_on_perturbed_connection(self, connection_file, capsys):
        """Test the dilation law holds for a non-flat connection."""
        argv = [
            str(connection_file),
            "--X",
            "0.1,0.2,0,-0.1",
            "--Y",
            "0.05,0,0",
            "--s",
            "0.7",
            "--check-scaling",
            "--json-out",
            "-",
        ]
        assert run(["geodesic"] + argv) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data["checks"][0]["name"] == "geodesic.scaling_law"
        end = data["payload"]["endpoint"]
        assert len(end["x"]) + len(end["t"]) == 7

    def test_trace_csv(self, connection_file, tmp_path):
        """Test the trace starts at the start point and has the requested samples."""
        trace = tmp_path / "trace.csv"
        argv = ["geodesic", str(connection_file), "--X", "0.1,0,0,0", "--trace", str(trace)]
        assert run(argv + ["--samples", "6"]) == EXIT_OK
        with open(trace, newline="") as handle:
            rows = list(csv.reader(handle))
        assert len(rows) == 7
        assert [float(v) for v in rows[1]] == [0.0] * 8
