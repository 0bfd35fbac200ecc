"""JSON exchange formats and report output for qcnormal."""

import json
from enum import Enum
from fractions import Fraction
from typing import Any, Optional

import numpy as np
from sympy import Poly

from qcnormal.core.conf import ConformalFactor, QJetTable, VanishingItem
from qcnormal.core.curv import PointState
from qcnormal.core.errors import FormatError
from qcnormal.core.heis import GroupPoint
from qcnormal.core.models import (
    AxisKind,
    CheckRecord,
    Dim,
    PolyConnection,
    RunReport,
    ScalarKind,
)
from qcnormal.core.poly import GradedRing
from qcnormal.core.qalg import Axis, Tensor
from qcnormal.core.scalars import format_scalar, parse_scalar, to_fraction

_STATE_BLOCKS = ("tau", "mu", "T_vv", "R_hhhh", "B")


def jsonable(value: Any) -> Any:
    """Recursively convert Fractions, arrays, Enums and sympy values for ``json``."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, Fraction):
        return format_scalar(value)
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return str(value)


def loads(text: str) -> Any:
    """Parse JSON, turning decode errors into :class:`FormatError` with a position."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from exc


def _require(data: Any, key: str, where: str) -> Any:
    if not isinstance(data, dict) or key not in data:
        raise FormatError(f"{where} needs a {key!r} field")
    return data[key]


class JSONFormatter:
    """Serialize qcnormal values and reports as JSON."""

    # Reports ------------------------------------------------------------

    @staticmethod
    def format(report: RunReport, indent: int = 2) -> str:
        """Format a RunReport as JSON.

        Args:
            report: The report to format.
            indent: Number of spaces for indentation (default: 2).

        Returns:
            Formatted JSON string.
        """
        data: dict[str, Any] = {
            "command": report.command,
            "config": jsonable(report.config),
            "seed": report.seed,
            "wall_time": round(report.wall_time, 6),
            "passed": report.passed,
            "checks": [JSONFormatter._check_to_dict(c) for c in report.checks],
        }
        if report.payload:
            data["payload"] = jsonable(report.payload)

        data["statistics"] = {
            "total_checks": len(report.checks),
            "failed": [c.name for c in report.failures],
        }

        return json.dumps(data, indent=indent)

    @staticmethod
    def _check_to_dict(check: CheckRecord) -> dict[str, Any]:
        check_dict: dict[str, Any] = {
            "name": check.name,
            "status": check.status.value,
            "provenance": check.provenance.value,
            "measured": jsonable(check.measured),
            "tolerance": check.tolerance,
        }

        if check.counterexample:
            check_dict["counterexample"] = jsonable(check.counterexample)

        if check.detail:
            check_dict["detail"] = check.detail

        return check_dict

    # Tensors ------------------------------------------------------------

    @staticmethod
    def tensor_to_dict(tensor: Tensor) -> dict[str, Any]:
        """Axes, backend and row-major data; rationals as ``"p/q"`` strings."""
        return {
            "axes": [{"kind": ax.kind.value, "extent": ax.extent} for ax in tensor.axes],
            "scalar": tensor.scalar.value,
            "data": [format_scalar(v) for v in np.asarray(tensor.data).flat],
        }

    @staticmethod
    def tensor_from_dict(data: Any) -> Tensor:
        """Inverse of :meth:`tensor_to_dict`.

        Raises:
            FormatError: missing fields, unknown kinds or a data length that
                does not match the axes.
        """
        try:
            axes = tuple(
                Axis(AxisKind(ax["kind"]), int(ax["extent"]))
                for ax in _require(data, "axes", "tensor")
            )
            kind = ScalarKind(data.get("scalar", "rational"))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad tensor axes: {exc}") from exc
        flat = _require(data, "data", "tensor")
        shape = tuple(ax.extent for ax in axes)
        if len(flat) != int(np.prod(shape, dtype=int)):
            raise FormatError(f"tensor data has {len(flat)} entries for shape {shape}")
        values = [parse_scalar(v, kind) for v in flat]
        arr = np.empty(len(values), dtype=object if kind == ScalarKind.RATIONAL else float)
        arr[:] = values
        return Tensor(axes, arr.reshape(shape), kind)

    @staticmethod
    def array_to_dict(arr: np.ndarray, kind: ScalarKind) -> dict[str, Any]:
        """Tensor format for a bare array; extent 3 axes are vertical."""
        kinds = "".join("V" if extent == 3 else "H" for extent in arr.shape)
        return JSONFormatter.tensor_to_dict(Tensor.from_array(arr, kinds, kind))

    # Group points and connections --------------------------------------

    @staticmethod
    def point_to_dict(point: GroupPoint) -> dict[str, Any]:
        return {
            "x": [format_scalar(v) for v in point.x],
            "t": [format_scalar(v) for v in point.t],
        }

    @staticmethod
    def connection_to_dict(conn: PolyConnection) -> dict[str, Any]:
        return {
            "dim": conn.dim,
            "gamma": [
                {
                    "a": a,
                    "b": b,
                    "c": c,
                    "poly": [
                        {"mono": list(mono), "coeff": format_scalar(coeff)}
                        for mono, coeff in terms
                    ],
                }
                for (a, b, c), terms in sorted(conn.gamma.items())
            ],
        }

    @staticmethod
    def connection_from_dict(data: Any) -> PolyConnection:
        """Parse the connection format.

        Raises:
            FormatError: missing fields, indices out of range or monomials of
                the wrong length.
        """
        size = int(_require(data, "dim", "connection"))
        gamma: dict[tuple[int, int, int], list[tuple[tuple[int, ...], Any]]] = {}
        for entry in _require(data, "gamma", "connection"):
            try:
                key = (int(entry["a"]), int(entry["b"]), int(entry["c"]))
                terms = [
                    (tuple(int(e) for e in term["mono"]), to_fraction(term["coeff"]))
                    for term in entry["poly"]
                ]
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"bad connection entry: {exc}") from exc
            if any(not 0 <= k < size for k in key):
                raise FormatError(f"connection index {key} out of range for dim {size}")
            if any(len(mono) != size for mono, _ in terms):
                raise FormatError(f"monomials of Γ{key} need {size} exponents")
            gamma.setdefault(key, []).extend(terms)
        return PolyConnection(size, gamma)

    # Polynomials and conformal factors ---------------------------------

    @staticmethod
    def hpoly_to_list(ring: GradedRing, f: Poly) -> list[dict[str, Any]]:
        """Terms x^A t^B as ``{"A": [...], "B": [...], "coeff": "p/q"}``."""
        h = ring.dim.h
        return [
            {"A": list(mono[:h]), "B": list(mono[h:]), "coeff": format_scalar(coeff)}
            for mono, coeff in sorted(ring.terms(f).items())
        ]

    @staticmethod
    def hpoly_from_list(ring: GradedRing, data: Any) -> Poly:
        h = ring.dim.h
        terms: dict[tuple[int, ...], Fraction] = {}
        try:
            for term in data:
                a, b = [int(e) for e in term["A"]], [int(e) for e in term["B"]]
                if len(a) != h or len(b) != 3:
                    raise FormatError(f"term needs {h} x-exponents and 3 t-exponents")
                mono = tuple(a + b)
                terms[mono] = terms.get(mono, Fraction(0)) + to_fraction(term["coeff"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad polynomial term: {exc}") from exc
        return ring.from_terms(terms)

    @staticmethod
    def factor_to_dict(factor: ConformalFactor) -> dict[str, Any]:
        ring = factor.ring
        data: dict[str, Any] = {
            "n": factor.dim.n,
            "pieces": {
                str(m): JSONFormatter.hpoly_to_list(ring, piece)
                for m, piece in sorted(factor.pieces.items())
            },
            "expr": ring.expr(factor.total()),
        }
        if factor.one_jet is not None:
            data["one_jet"] = JSONFormatter.hpoly_to_list(ring, factor.one_jet)
        return data

    # Jet tables ---------------------------------------------------------

    @staticmethod
    def jets_to_list(table: QJetTable) -> list[dict[str, Any]]:
        return [
            {"a": key[0], "b": key[1], "C": list(key[2:]), "value": format_scalar(value)}
            for key, value in sorted(table.values.items())
            if value != 0
        ]

    @staticmethod
    def jets_from_list(dim: Dim, data: Any, max_order: Optional[int] = None) -> QJetTable:
        """Build a table from raw entries Q_{ab,C}; they are symmetrized on the way in.

        Raises:
            FormatError: the input is not a list of jet entries.
        """
        if not isinstance(data, list):
            raise FormatError("a jet table is a list of {a, b, C, value} entries")
        entries: dict[tuple[int, ...], Fraction] = {}
        try:
            for entry in data:
                key = (int(entry["a"]), int(entry["b"])) + tuple(int(c) for c in entry["C"])
                entries[key] = to_fraction(entry["value"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad jet entry: {exc}") from exc
        return QJetTable.from_entries(dim, entries, max_order)

    @staticmethod
    def vanishing_to_list(items: list[VanishingItem]) -> list[dict[str, Any]]:
        return [
            {
                "name": item.name,
                "order": item.order,
                "reason": item.reason,
                "certificate": jsonable(item.certificate),
            }
            for item in items
        ]

    # Point states -------------------------------------------------------

    @staticmethod
    def state_to_dict(state: PointState) -> dict[str, Any]:
        data: dict[str, Any] = {
            "n": state.dim.n,
            "scalar": state.scalar.value,
            "S": format_scalar(state.S),
        }
        for name in _STATE_BLOCKS:
            block = getattr(state, name)
            if block is not None:
                data[name] = JSONFormatter.array_to_dict(block, state.scalar)
        if state.jets:
            data["jets"] = {
                name: JSONFormatter.array_to_dict(arr, state.scalar)
                for name, arr in sorted(state.jets.items())
            }
        return data

    @staticmethod
    def state_from_dict(data: Any) -> PointState:
        if not isinstance(data, dict):
            raise FormatError("a point state is a JSON object")
        try:
            kind = ScalarKind(data.get("scalar", "rational"))
        except ValueError as exc:
            raise FormatError(f"unknown scalar backend: {exc}") from exc
        dim = Dim(int(_require(data, "n", "state")))
        blocks = {
            name: JSONFormatter.tensor_from_dict(data[name]).data
            for name in _STATE_BLOCKS
            if name in data
        }
        for name in ("tau", "mu"):
            if name not in blocks:
                raise FormatError(f"state needs a {name!r} block")
        jets = {
            name: JSONFormatter.tensor_from_dict(block).data
            for name, block in data.get("jets", {}).items()
        }
        return PointState(
            dim,
            blocks["tau"],
            blocks["mu"],
            parse_scalar(_require(data, "S", "state"), kind),
            T_vv=blocks.get("T_vv"),
            R_hhhh=blocks.get("R_hhhh"),
            B=blocks.get("B"),
            jets=jets,
            scalar=kind,
        )
