"""Command-line interface for qcnormal."""

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Optional

import numpy as np

from qcnormal.core.conf import (
    FlatModelOracle,
    JetOracle,
    LinearizedOracle,
    QJetTable,
    connection_change,
    normalize,
    vanishing_report,
)
from qcnormal.core.config import RunConfig
from qcnormal.core.errors import ConfigError, FormatError, IntegrationError, QCNormalError
from qcnormal.core.curv import PointState
from qcnormal.core.geo import parabolic_geodesic, parabolic_trace
from qcnormal.core.heis import GroupPoint, flat_connection
from qcnormal.core.invar import verify_reductions
from qcnormal.core.logsetup import configure_logging
from qcnormal.core.models import CheckRecord, CheckStatus, Provenance, RunReport, ScalarKind
from qcnormal.core.poly import lm_spectrum, ring_for
from qcnormal.core.suites import SUITE_CHOICES, invar_tolerance, run_suite
from qcnormal.formatters.json import JSONFormatter, loads
from qcnormal.formatters.tree import TreeFormatter

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    """Parser with the global flags repeated on every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=1, help="quaternionic dimension (default: 1)")
    common.add_argument("--trials", type=int, default=20, help="random trials (default: 20)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument(
        "--scalar",
        choices=[k.value for k in ScalarKind],
        default=ScalarKind.RATIONAL.value,
        help="scalar backend (default: rational)",
    )
    common.add_argument("--tol", type=float, default=1e-9, help="numerical tolerance")
    common.add_argument(
        "--json-out", type=Path, default=None, help="write the JSON report here ('-' = stdout)"
    )
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v INFO, -vv DEBUG")

    parser = argparse.ArgumentParser(
        prog="qcnormal",
        description="Pseudohermitian normal coordinates on quaternionic contact manifolds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", parents=[common], help="run a verification suite")
    verify.add_argument("--suite", choices=SUITE_CHOICES, default="all")
    verify.add_argument(
        "--state",
        type=Path,
        action="append",
        default=None,
        help="point state JSON for the curv suite (repeatable)",
    )

    geodesic = sub.add_parser("geodesic", parents=[common], help="integrate a parabolic geodesic")
    geodesic.add_argument(
        "connection", nargs="?", type=Path, help="connection JSON (default: the flat model)"
    )
    geodesic.add_argument("--q", type=_floats, default=None, help="start point (default: 0)")
    geodesic.add_argument("--X", type=_floats, required=True, help="horizontal velocity")
    geodesic.add_argument("--Y", type=_floats, default=None, help="vertical acceleration")
    geodesic.add_argument("--s", type=float, default=1.0, help="curve parameter (default: 1)")
    geodesic.add_argument("--trace", type=Path, default=None, help="write (s, coords) CSV")
    geodesic.add_argument("--samples", type=int, default=11, help="trace samples (default: 11)")
    geodesic.add_argument(
        "--check-scaling", action="store_true", help="spot-check the dilation law"
    )

    norm = sub.add_parser("normalize", parents=[common], help="normalize Q-jets to order N")
    norm.add_argument("--N", type=int, default=4, help="normalization order (default: 4)")
    norm.add_argument("--oracle", choices=["linearized", "flat"], default="linearized")
    norm.add_argument("--jets", type=Path, default=None, help="jet table JSON (linearized)")
    norm.add_argument("--one-jet", type=Path, default=None, help="1-jet polynomial JSON")
    norm.add_argument(
        "--start", default=None, help="seeded start factor for the flat oracle: 'random' or JSON"
    )
    norm.add_argument(
        "--connection-out",
        type=Path,
        default=None,
        help="write the normalized connection JSON (flat oracle)",
    )

    poly = sub.add_parser("poly", help="graded operator tools")
    poly_sub = poly.add_subparsers(dest="action", required=True)
    spectrum = poly_sub.add_parser("lm-spectrum", parents=[common], help="rank and kernel of L_m")
    spectrum.add_argument("--m", type=int, default=2, help="weight (default: 2)")

    invar = sub.add_parser("invar", help="curvature invariant tools")
    invar_sub = invar.add_subparsers(dest="action", required=True)
    invar_sub.add_parser("reduce", parents=[common], help="reduce weight-4 contractions")
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        n=args.n,
        trials=args.trials,
        seed=args.seed,
        scalar=ScalarKind(args.scalar),
        tol=args.tol,
        json_out=args.json_out,
        verbosity=args.verbose,
    )


def _read_json(path: Path) -> Any:
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return loads(text)


def _load_states(paths: list[Path]) -> list[PointState]:
    states = []
    for path in paths:
        data = _read_json(path)
        for entry in data if isinstance(data, list) else [data]:
            states.append(JSONFormatter.state_from_dict(entry))
    return states


def cmd_verify(args: argparse.Namespace, config: RunConfig) -> RunReport:
    states = _load_states(args.state) if args.state else None
    report = run_suite(args.suite, config, states)
    if states:
        report.payload["states"] = [JSONFormatter.state_to_dict(s) for s in states]
    return report


def cmd_geodesic(args: argparse.Namespace, config: RunConfig) -> RunReport:
    """Endpoint of γ_{(X,Y)}(s), with an optional CSV trace and scaling spot-check."""
    if args.connection is not None:
        conn = JSONFormatter.connection_from_dict(_read_json(args.connection))
    else:
        conn = flat_connection(config.dim)
    h = conn.dim - 3
    q = np.zeros(conn.dim) if args.q is None else np.asarray(args.q, dtype=float)
    X = np.asarray(args.X, dtype=float)
    Y = np.zeros(3) if args.Y is None else np.asarray(args.Y, dtype=float)
    if q.shape != (conn.dim,) or X.shape != (h,) or Y.shape != (3,):
        raise ConfigError(f"expected q of length {conn.dim}, X of length {h}, Y of length 3")

    report = RunReport("geodesic", config.echo(), seed=config.seed)
    end = parabolic_geodesic(conn, q, X, Y, args.s, config.tol)
    report.payload["endpoint"] = JSONFormatter.point_to_dict(GroupPoint(end[:h], end[h:]))

    if args.trace is not None:
        grid, coords = parabolic_trace(conn, q, X, Y, args.s, args.samples, config.tol)
        with open(args.trace, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["s"] + [f"z{k}" for k in range(conn.dim)])
            for s, row in zip(grid, coords):
                writer.writerow([f"{s:.12g}"] + [f"{v:.12g}" for v in row])
        report.payload["trace"] = str(args.trace)

    if args.check_scaling:
        s = args.s
        scaled = parabolic_geodesic(conn, q, s * X, s * s * Y, 1.0, config.tol)
        err = float(np.max(np.abs(scaled - end)))
        report.add(
            CheckRecord(
                "geodesic.scaling_law",
                CheckStatus.PASS if err <= 1e-7 else CheckStatus.FAIL,
                err,
                1e-7,
                Provenance.KNOWN,
                None if err <= 1e-7 else {"X": X.tolist(), "Y": Y.tolist(), "s": s},
            )
        )
    return report


def _start_factor(args: argparse.Namespace, config: RunConfig) -> Any:
    ring = ring_for(config.n)
    if args.start is None:
        return None
    if args.start == "random":
        rng = np.random.default_rng(config.seed)
        return ring.random_homogeneous(rng, 2, x_only=True) + ring.random_homogeneous(
            rng, 3, density=0.5
        )
    return JSONFormatter.hpoly_from_list(ring, _read_json(Path(args.start)))


def cmd_normalize(args: argparse.Namespace, config: RunConfig) -> RunReport:
    """Solve for u_2 .. u_N and certify the vanishing list when N >= 4."""
    if args.N < 2:
        raise ConfigError(f"--N must be >= 2, got {args.N}")
    if args.connection_out is not None and args.oracle != "flat":
        raise ConfigError("--connection-out needs --oracle flat")
    dim = config.dim
    ring = ring_for(dim.n)
    oracle: JetOracle
    seeded = None
    if args.oracle == "flat":
        seeded = _start_factor(args, config)
        oracle = FlatModelOracle(dim, args.N, start=seeded)
    else:
        if args.jets is not None:
            base = JSONFormatter.jets_from_list(dim, _read_json(args.jets), args.N)
        else:
            base = QJetTable.zero(dim, args.N)
        oracle = LinearizedOracle(base)
    one_jet = None
    if args.one_jet is not None:
        one_jet = JSONFormatter.hpoly_from_list(ring, _read_json(args.one_jet))

    report = RunReport("normalize", config.echo(), seed=config.seed)
    factor = normalize(args.N, oracle, one_jet)
    final = oracle(factor)
    left = final.nonzero(args.N)
    report.add(
        CheckRecord(
            "normalize.residual_jets",
            CheckStatus.PASS if not left else CheckStatus.FAIL,
            len(left),
            0.0,
            Provenance.KNOWN,
            {"jets": JSONFormatter.jets_to_list(QJetTable(dim, args.N, left))[:5]}
            if left
            else None,
        )
    )
    report.payload["u"] = JSONFormatter.factor_to_dict(factor)
    if seeded is not None:
        report.payload["seeded"] = ring.expr(seeded)
        report.payload["recovered"] = ring.expr(-factor.total())
    if args.N >= 4 and not left:
        report.payload["vanishing"] = JSONFormatter.vanishing_to_list(vanishing_report(final))
    if args.connection_out is not None:
        total = factor.total() if seeded is None else factor.total() + seeded
        conn = connection_change(total, dim, degree=args.N)
        args.connection_out.write_text(
            json.dumps(JSONFormatter.connection_to_dict(conn), indent=2) + "\n"
        )
        report.payload["connection"] = str(args.connection_out)
    return report


def cmd_lm_spectrum(args: argparse.Namespace, config: RunConfig) -> RunReport:
    spectrum = lm_spectrum(config.dim, args.m)
    report = RunReport("poly lm-spectrum", config.echo(), seed=config.seed, payload=spectrum)
    kernel_dim = len(spectrum["kernel"])
    want = 3 if args.m == 2 else 0
    report.add(
        CheckRecord(
            f"poly.kernel_L{args.m}",
            CheckStatus.PASS if kernel_dim == want else CheckStatus.FAIL,
            kernel_dim,
            0.0,
            Provenance.KNOWN,
            None if kernel_dim == want else {"kernel": spectrum["kernel"]},
        )
    )
    return report


def cmd_invar_reduce(args: argparse.Namespace, config: RunConfig) -> RunReport:
    """Every weight-4 contraction pattern with its measured multiple of ‖W‖²."""
    tol = invar_tolerance(config)
    result = verify_reductions(config.dim, config.trials, tol, config.scalar, config.seed)
    report = RunReport("invar reduce", config.echo(), seed=config.seed)
    for r in result.results:
        ok = r.deviation <= result.threshold
        report.add(
            CheckRecord(
                f"invar.{r.pattern.label}",
                CheckStatus.PASS if ok else CheckStatus.FAIL,
                r.constant,
                tol,
                Provenance.KNOWN if r.expected is not None else Provenance.DERIVED,
                None if ok else {"constants": r.constants[:3], "expected": r.expected},
            )
        )
    report.payload["patterns"] = [
        {
            "pattern": r.pattern.label,
            "contraction": r.pattern.describe(),
            "target": r.target,
            "constant": r.constant,
        }
        for r in result.results
    ]
    report.payload["degenerate_trials"] = result.degenerate_trials
    return report


_COMMANDS = {
    "verify": cmd_verify,
    "geodesic": cmd_geodesic,
    "normalize": cmd_normalize,
    "lm-spectrum": cmd_lm_spectrum,
    "reduce": cmd_invar_reduce,
}


def emit(report: RunReport, json_out: Optional[Path]) -> None:
    """Tree on stdout; JSON to ``json_out`` (or stdout for ``-``)."""
    if json_out is not None and str(json_out) == "-":
        print(JSONFormatter.format(report))
        return
    print(TreeFormatter.format(report))
    if json_out is not None:
        json_out.write_text(JSONFormatter.format(report) + "\n")


def run(argv: Optional[list[str]] = None) -> int:
    """Parse ``argv``, run the command and return the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        config = _config(args)
        key = args.action if args.command in ("poly", "invar") else args.command
        logger.info("running %s with seed %d", key, config.seed)
        start = time.perf_counter()
        report = _COMMANDS[key](args, config)
        if not report.wall_time:
            report.wall_time = time.perf_counter() - start
    except ConfigError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        for name, value in exc.diagnostics.items():
            print(f"  {name}: {value}", file=sys.stderr)
        return EXIT_FAILURE
    except QCNormalError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    emit(report, config.json_out)
    return EXIT_OK if report.passed else EXIT_FAILURE


def main() -> None:
    """CLI entry point for qcnormal."""
    sys.exit(run())


if __name__ == "__main__":
    main()
