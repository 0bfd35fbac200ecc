"""Verification suites run by ``qcnormal verify``.

Each suite is a list of named checks. A check returns an :class:`Outcome`;
a :class:`QCNormalError` raised inside a check is recorded as a failure
carrying the error as its counterexample, so one broken identity never
hides the rest of the report.
"""

import itertools
import logging
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Callable, Optional

import numpy as np
import sympy

from qcnormal.core.conf import (
    FlatModelOracle,
    LinearizedOracle,
    QJetTable,
    connection_change,
    jet_order,
    normalize,
    vanishing_report,
)
from qcnormal.core.config import RunConfig
from qcnormal.core.curv import (
    A_operator,
    L_and_Q,
    PointState,
    RicciForms,
    conformal_curvature,
    divergence_matrices,
    divergence_residuals,
    exact_det,
    random_state,
    ricci_and_scalar,
    ricci_forms,
    torsion_endomorphism,
    validate,
    zero_state,
)
from qcnormal.core.errors import ConfigError, QCNormalError
from qcnormal.core.geo import (
    ConnectionEvaluator,
    ParabolicChart,
    flat_chart,
    geodesic_second_order,
    parabolic_geodesic,
    vanishing_order,
)
from qcnormal.core.heis import (
    coframe_check,
    dilate,
    identity_point,
    inverse,
    multiply,
    random_point,
    structure_check,
)
from qcnormal.core.invar import (
    count_contractions,
    enumerate_contractions,
    enumerate_table,
    verify_reductions,
    verify_second_derivative_system,
)
from qcnormal.core.models import (
    CheckRecord,
    CheckStatus,
    Dim,
    PolyConnection,
    Provenance,
    RunReport,
    ScalarKind,
)
from qcnormal.core.poly import (
    apply_Lm,
    build_Lm,
    dim_homogeneous,
    p_squared_identity,
    ring_for,
    solve_Lm,
)
from qcnormal.core.qalg import (
    casimir,
    coefficient,
    compose,
    contract,
    epsilon_tensor,
    metric,
    standard_acs,
)
from qcnormal.core.scalars import identity, is_zero, max_abs, random_array

logger = logging.getLogger(__name__)

SUITES = ("algebra", "flat", "geo", "poly", "curv", "conf", "invar")
SUITE_CHOICES = SUITES + ("all",)

GEO_TOL = 1e-7
DIFFERENTIAL_TOL = 1e-6
ROUNDTRIP_TOL = 1e-8
# each log runs Newton over the exponential map
ROUNDTRIP_TRIALS = 10


@dataclass
class Outcome:
    """Result of one check body."""

    ok: bool
    measured: Any = None
    counterexample: Optional[dict[str, Any]] = None
    detail: Optional[str] = None


CheckBody = Callable[[], Outcome]


def invar_tolerance(config: RunConfig) -> float:
    """Exact comparison for rationals, ``--tol`` for floats."""
    return 0.0 if config.scalar == ScalarKind.RATIONAL else config.tol


def _tol(kind: ScalarKind) -> float:
    return 0.0 if kind == ScalarKind.RATIONAL else 1e-10


def run_check(
    report: RunReport,
    name: str,
    body: CheckBody,
    provenance: Provenance = Provenance.DERIVED,
    tolerance: Optional[float] = None,
) -> CheckRecord:
    """Run ``body`` and append its record to ``report``."""
    try:
        outcome = body()
    except QCNormalError as exc:
        logger.debug("check %s raised %s", name, exc)
        record = CheckRecord(
            name,
            CheckStatus.FAIL,
            tolerance=tolerance,
            provenance=provenance,
            counterexample={"error": type(exc).__name__, "message": str(exc)},
        )
    else:
        record = CheckRecord(
            name,
            CheckStatus.PASS if outcome.ok else CheckStatus.FAIL,
            outcome.measured,
            tolerance,
            provenance,
            None if outcome.ok else outcome.counterexample,
            outcome.detail,
        )
    report.add(record)
    return record


# --- algebra -----------------------------------------------------------------


def _algebra(config: RunConfig, report: RunReport) -> None:
    dim, kind = config.dim, config.scalar
    tol = _tol(kind)
    acs = standard_acs(dim, kind)
    cas = casimir(acs)
    h = dim.h

    def acs_relations() -> Outcome:
        found = acs.violations()
        return Outcome(not found, len(found), {"violation": found[0]} if found else None)

    def vform_double() -> Outcome:
        eps = epsilon_tensor(kind)
        got = contract(eps, eps, [(0, 0), (1, 1)]).data
        diff = got - identity(3, kind) * 2
        return Outcome(is_zero(diff, tol), max_abs(diff), {"eps.eps": got.tolist()})

    def vform_single() -> Outcome:
        eps = epsilon_tensor(kind)
        got = contract(eps, eps, [(0, 0)]).data
        d = identity(3, kind)
        outer = np.multiply.outer(d, d)
        want = outer.transpose(0, 2, 1, 3) - outer.transpose(0, 2, 3, 1)
        diff = got - want
        return Outcome(is_zero(diff, tol), max_abs(diff))

    def casimir_quadratic() -> Outcome:
        diff = compose(cas.upsilon, cas.upsilon) - cas.upsilon * 2 - cas.identity * 3
        return Outcome(is_zero(diff, tol), max_abs(diff))

    def projector_laws() -> Outcome:
        residuals = {
            "P3^2-P3": compose(cas.p3, cas.p3) - cas.p3,
            "Pm1^2-Pm1": compose(cas.pm1, cas.pm1) - cas.pm1,
            "P3+Pm1-Id": cas.p3 + cas.pm1 - cas.identity,
            "P3*Pm1": compose(cas.p3, cas.pm1),
        }
        bad = [name for name, r in residuals.items() if not is_zero(r, tol)]
        return Outcome(not bad, max(max_abs(r) for r in residuals.values()), {"laws": bad})

    def metric_eigen() -> Outcome:
        g = metric(dim, kind)
        diff = cas.apply(g) - g * 3
        return Outcome(is_zero(diff, tol), max_abs(diff))

    def eigen_split() -> Outcome:
        rng = np.random.default_rng(config.seed)
        worst = 0.0
        for trial in range(config.trials):
            t = random_array(rng, (h, h), kind)
            p3, pm1 = cas.project(t, 3), cas.project(t, -1)
            residuals = (p3 + pm1 - t, cas.apply(p3) - p3 * 3, cas.apply(pm1) + pm1)
            worst = max([worst] + [max_abs(r) for r in residuals])
            if not all(is_zero(r, tol) for r in residuals):
                return Outcome(False, worst, {"trial": trial, "t": t.tolist()})
        return Outcome(True, worst)

    def a_minimal_polynomial() -> Outcome:
        a, a_inv = A_operator(dim, kind)
        ident = identity(3 * h, kind)
        diff = a @ a + a * 2 - ident * 8
        inv_diff = a @ a_inv - ident
        ok = is_zero(diff, tol) and is_zero(inv_diff, tol)
        return Outcome(ok, max(max_abs(diff), max_abs(inv_diff)))

    run_check(report, "algebra.acs_relations", acs_relations, Provenance.KNOWN, tol)
    run_check(report, "algebra.vform_double", vform_double, Provenance.KNOWN, tol)
    run_check(report, "algebra.vform_single", vform_single, Provenance.KNOWN, tol)
    run_check(report, "algebra.casimir_quadratic", casimir_quadratic, Provenance.KNOWN, tol)
    run_check(report, "algebra.projector_laws", projector_laws, Provenance.TRIVIAL, tol)
    run_check(report, "algebra.metric_eigenvalue", metric_eigen, Provenance.TRIVIAL, tol)
    run_check(report, "algebra.eigen_split", eigen_split, Provenance.DERIVED, tol)
    run_check(report, "algebra.A_minimal_polynomial", a_minimal_polynomial, Provenance.KNOWN, tol)


# --- flat model --------------------------------------------------------------


def _flat(config: RunConfig, report: RunReport) -> None:
    dim = config.dim
    kind = ScalarKind.RATIONAL

    def structure() -> Outcome:
        result = structure_check(dim)
        first = result.first
        counter = None
        if first is not None:
            counter = {
                "identity": first.identity,
                "indices": list(first.indices),
                "expected": str(first.expected),
                "found": str(first.found),
            }
        return Outcome(result.passed, len(result.violations), counter)

    def coframe() -> Outcome:
        result = coframe_check(dim)
        first = result.first
        counter = {"identity": first.identity, "indices": list(first.indices)} if first else None
        return Outcome(result.passed, len(result.violations), counter)

    def group_laws() -> Outcome:
        rng = np.random.default_rng(config.seed)
        e = identity_point(dim, kind)
        points = max(100, 5 * config.trials)
        for trial in range(points):
            p, q, r = (random_point(rng, dim, kind) for _ in range(3))
            s = Fraction(int(rng.integers(1, 7)), int(rng.integers(1, 7)))
            laws = {
                "associativity": multiply(multiply(p, q), r).same_as(multiply(p, multiply(q, r))),
                "identity": multiply(p, e).same_as(p) and multiply(e, p).same_as(p),
                "inverse": multiply(p, inverse(p)).same_as(e),
                "dilation": dilate(s, multiply(p, q)).same_as(
                    multiply(dilate(s, p), dilate(s, q))
                ),
            }
            broken = [name for name, ok in laws.items() if not ok]
            if broken:
                return Outcome(
                    False,
                    trial,
                    {"laws": broken, "p": [str(c) for c in p.coords()], "s": str(s)},
                )
        return Outcome(True, points)

    run_check(report, "flat.structure", structure, Provenance.KNOWN, 0.0)
    run_check(report, "flat.coframe", coframe, Provenance.KNOWN, 0.0)
    run_check(report, "flat.group_laws", group_laws, Provenance.TRIVIAL, 0.0)


# --- parabolic geodesics -----------------------------------------------------


def perturbed_connection(dim: Dim, rng: np.random.Generator, m: int = 2) -> PolyConnection:
    """Connection of e^{2u}η on the flat model for a small random u of weight m."""
    ring = ring_for(dim.n)
    u = ring.random_homogeneous(rng, m, x_only=m == 2) * sympy.Rational(1, 4)
    return connection_change(u, dim)


def _geo(config: RunConfig, report: RunReport) -> None:
    dim = config.dim
    h, size = dim.h, dim.total
    tol = min(config.tol, 1e-9)
    rng = np.random.default_rng(config.seed)
    conn = perturbed_connection(dim, rng)
    ev = ConnectionEvaluator(conn)
    origin = np.zeros(size)

    def scaling_law() -> Outcome:
        worst = 0.0
        for trial in range(config.trials):
            X = rng.uniform(-0.4, 0.4, h)
            Y = rng.uniform(-0.4, 0.4, 3)
            s = float(rng.uniform(0.2, 1.0))
            lhs = parabolic_geodesic(conn, origin, s * X, s * s * Y, 1.0, tol, evaluator=ev)
            rhs = parabolic_geodesic(conn, origin, X, Y, s, tol, evaluator=ev)
            err = float(np.max(np.abs(lhs - rhs)))
            worst = max(worst, err)
            if err > GEO_TOL:
                return Outcome(False, err, {"trial": trial, "X": X.tolist(), "Y": Y.tolist()})
        return Outcome(True, worst)

    def second_order_agreement() -> Outcome:
        worst = 0.0
        for trial in range(config.trials):
            X = rng.uniform(-0.4, 0.4, h)
            s = float(rng.uniform(0.2, 1.0))
            para = parabolic_geodesic(conn, origin, X, np.zeros(3), s, tol, evaluator=ev)
            start = np.concatenate([X, np.zeros(3)])
            classic = geodesic_second_order(conn, origin, start, s, tol, evaluator=ev)
            err = float(np.max(np.abs(para - classic)))
            worst = max(worst, err)
            if err > GEO_TOL:
                return Outcome(False, err, {"trial": trial, "X": X.tolist(), "s": s})
        return Outcome(True, worst)

    def differential() -> Outcome:
        chart = flat_chart(dim, tol=1e-11)
        step = 1e-4
        jac = np.empty((size, size))
        for k in range(size):
            e = np.zeros(size)
            e[k] = step
            plus = chart.exp(e[:h], e[h:])
            minus = chart.exp(-e[:h], -e[h:])
            jac[:, k] = (plus - minus) / (2 * step)
        in_frame = np.linalg.solve(chart.frame0, jac)
        want = np.diag([1.0] * h + [0.5] * 3)
        err = float(np.max(np.abs(in_frame - want)))
        return Outcome(err <= DIFFERENTIAL_TOL, err)

    def log_exp_roundtrip() -> Outcome:
        chart = ParabolicChart(origin, conn, np.eye(size), tol=1e-11)
        worst = 0.0
        for trial in range(min(config.trials, ROUNDTRIP_TRIALS)):
            X = rng.uniform(-0.3, 0.3, h)
            Y = rng.uniform(-0.3, 0.3, 3)
            X2, Y2 = chart.log(chart.exp(X, Y), tol=1e-12)
            err = float(max(np.max(np.abs(X2 - X)), np.max(np.abs(Y2 - Y))))
            worst = max(worst, err)
            if err > ROUNDTRIP_TOL:
                return Outcome(False, err, {"trial": trial, "X": X.tolist(), "Y": Y.tolist()})
        return Outcome(True, worst)

    def coordinate_change(m: int) -> CheckBody:
        def body() -> Outcome:
            chart = flat_chart(dim, tol=1e-12)
            changed = ParabolicChart(
                chart.center, perturbed_connection(dim, rng, m), chart.frame0, chart.tol
            )
            base = rng.normal(size=size)
            base /= np.linalg.norm(base)

            def difference(v: np.ndarray) -> np.ndarray:
                return changed.exp(v[:h], v[h:]) - chart.exp(v[:h], v[h:])

            fit = vanishing_order(difference, base, np.geomspace(0.03, 0.3, 8))
            if fit.below_noise:
                return Outcome(bool(fit.at_least and fit.at_least >= m + 0.9), fit.at_least)
            ok = fit.order >= m + 0.9 and fit.residual < 0.1
            return Outcome(ok, fit.order, {"base": base.tolist(), "residual": fit.residual})

        return body

    run_check(report, "geo.scaling_law", scaling_law, Provenance.KNOWN, GEO_TOL)
    run_check(report, "geo.second_order_agreement", second_order_agreement, tolerance=GEO_TOL)
    run_check(report, "geo.differential", differential, Provenance.KNOWN, DIFFERENTIAL_TOL)
    run_check(report, "geo.log_exp_roundtrip", log_exp_roundtrip, tolerance=ROUNDTRIP_TOL)
    for m in (2, 3):
        run_check(report, f"geo.coordinate_change_m{m}", coordinate_change(m), Provenance.KNOWN)


# --- graded operators --------------------------------------------------------


def _poly(config: RunConfig, report: RunReport) -> None:
    dim = config.dim
    ring = ring_for(dim.n)
    max_m = 6 if dim.n == 1 else 4
    rng = np.random.default_rng(config.seed)

    def kernel_l2() -> Outcome:
        op = build_Lm(dim, 2)
        kernel = op.kernel()
        stray = [
            ring.expr(k) for k in kernel if not k.as_expr().free_symbols <= set(ring.ts)
        ]
        ok = len(kernel) == 3 and not stray
        return Outcome(ok, len(kernel), {"kernel": [ring.expr(k) for k in kernel]})

    def determinants() -> Outcome:
        dets = {}
        for m in range(3, max_m + 1):
            dets[m] = build_Lm(dim, m).det()
            if dets[m] == 0:
                return Outcome(False, {str(k): str(v) for k, v in dets.items()}, {"m": m})
        return Outcome(True, {str(k): str(v) for k, v in dets.items()})

    def dimensions() -> Outcome:
        for m in range(2, max_m + 1):
            if dim_homogeneous(dim, m) != len(ring.basis(m)):
                return Outcome(False, m, {"m": m, "closed_form": dim_homogeneous(dim, m)})
        return Outcome(True, max_m)

    def solve_roundtrip() -> Outcome:
        count = 0
        for m in range(3, max_m + 1):
            for trial in range(config.trials):
                rhs = ring.random_homogeneous(rng, m, density=0.5)
                u = solve_Lm(dim, m, rhs)
                if not (apply_Lm(ring, m, u) - rhs).is_zero:
                    return Outcome(False, count, {"m": m, "trial": trial, "rhs": ring.expr(rhs)})
                count += 1
        return Outcome(True, count)

    def p_squared() -> Outcome:
        count = 0
        for trial in range(config.trials):
            m = 2 + trial % 3
            u = ring.random_homogeneous(rng, m, density=0.5)
            residual = p_squared_identity(ring, u, m)
            if not residual.is_zero:
                return Outcome(False, count, {"m": m, "u": ring.expr(u)})
            count += 1
        return Outcome(True, count)

    run_check(report, "poly.kernel_L2", kernel_l2, Provenance.KNOWN, 0.0)
    run_check(report, "poly.determinants", determinants, Provenance.KNOWN, 0.0)
    run_check(report, "poly.dimensions", dimensions, Provenance.DERIVED, 0.0)
    run_check(report, "poly.solve_roundtrip", solve_roundtrip, Provenance.DERIVED, 0.0)
    run_check(report, "poly.p_squared_identity", p_squared, Provenance.KNOWN, 0.0)


# --- curvature calculus ------------------------------------------------------


def _curv(
    config: RunConfig, report: RunReport, supplied: Optional[list[PointState]] = None
) -> None:
    dim, kind = config.dim, config.scalar
    n, h = dim.n, dim.h
    tol = _tol(kind)
    acs = standard_acs(dim, kind)
    rng = np.random.default_rng(config.seed)
    if supplied:
        for state in supplied:
            if state.dim != dim or state.scalar != kind:
                raise ConfigError(
                    f"state has n={state.dim.n}, scalar={state.scalar.value}; "
                    f"run uses n={n}, scalar={kind.value}"
                )
        states = list(supplied)
    else:
        states = [
            random_state(dim, rng, kind, with_curvature=True, with_jets=True)
            for _ in range(config.trials)
        ]

    def per_state(check: Callable[[Any], tuple[bool, float]]) -> CheckBody:
        def body() -> Outcome:
            worst = 0.0
            for trial, state in enumerate(states):
                ok, measured = check(state)
                worst = max(worst, measured)
                if not ok:
                    return Outcome(False, measured, {"trial": trial, "S": str(state.S)})
            return Outcome(True, worst)

        return body

    def valid(state: Any) -> tuple[bool, float]:
        validate(state, acs)
        return True, 0.0

    def torsion_traces(state: Any) -> tuple[bool, float]:
        th = torsion_endomorphism(state, acs)
        traces = np.array(
            [sum(th[i][a, a] for a in range(h)) for i in range(3)]
            + [sum((th[i] @ acs[i])[a, a] for a in range(h)) for i in range(3)],
            dtype=object if kind == ScalarKind.RATIONAL else float,
        )
        return is_zero(traces, tol), max_abs(traces)

    def ricci_consistency(state: Any) -> tuple[bool, float]:
        result = ricci_and_scalar(state)
        return result.residual <= tol, result.residual

    def form_traces(state: Any) -> tuple[bool, float]:
        forms = ricci_forms(state, acs)
        s = state.S
        want = (
            s * coefficient(-3, 2 * (n + 2), kind),
            s * coefficient(3, 4 * (n + 2), kind),
            s * coefficient(-3, 2 * (n + 2), kind),
        )
        candidates = [forms]
        if forms.contracted is not None:
            candidates.append(RicciForms(*forms.contracted))
        worst = 0.0
        for candidate in candidates:
            got = candidate.traces(acs)
            worst = max([worst] + [abs(float(g - w)) for g, w in zip(got, want)])
        return worst <= tol, worst

    def q_trace(state: Any) -> tuple[bool, float]:
        _, q = L_and_Q(state, acs)
        trace = sum(q[a, a] for a in range(h))
        err = abs(float(trace - state.S * coefficient(4 * n + 1, 8 * (n + 2), kind)))
        return err <= tol and is_zero(q - q.T, tol), err

    def w_equals_r() -> Outcome:
        r = random_array(rng, (h,) * 4, kind)
        r = r - r.transpose(1, 0, 2, 3)
        r = r - r.transpose(0, 1, 3, 2)
        state = replace(zero_state(dim, kind, with_jets=False), R_hhhh=r)
        w, _ = conformal_curvature(state, acs=acs)
        return Outcome(is_zero(w - r, tol), max_abs(w - r))

    def w_antisymmetry(state: Any) -> tuple[bool, float]:
        extra = random_array(rng, (h,) * 4, kind)
        extra = extra - extra.transpose(1, 0, 2, 3)
        extra = extra - extra.transpose(0, 1, 3, 2)
        if state.R_hhhh is not None:
            extra = extra + state.R_hhhh
        w, _ = conformal_curvature(replace(state, R_hhhh=extra), acs=acs)
        res = max(max_abs(w + w.transpose(1, 0, 2, 3)), max_abs(w + w.transpose(0, 1, 3, 2)))
        return res <= tol, res

    def flat_vanishing() -> Outcome:
        state = zero_state(dim, kind)
        residual = divergence_residuals(state, acs).max_residual
        _, q = L_and_Q(state, acs)
        _, norm = conformal_curvature(state, acs=acs)
        ok = residual == 0 and is_zero(q) and float(norm) == 0
        return Outcome(ok, residual)

    def determinants() -> Outcome:
        m3, m4 = divergence_matrices(n)
        det3, det4 = exact_det(m3), exact_det(m4)
        return Outcome(det3 != 0 and det4 != 0, {"det3": str(det3), "det4": str(det4)})

    run_check(report, "curv.valid_states", per_state(valid), Provenance.DERIVED, tol)
    run_check(report, "curv.torsion_traces", per_state(torsion_traces), Provenance.KNOWN, tol)
    run_check(report, "curv.ricci_consistency", per_state(ricci_consistency), tolerance=tol)
    run_check(report, "curv.ricci_form_traces", per_state(form_traces), Provenance.KNOWN, tol)
    run_check(report, "curv.q_trace", per_state(q_trace), Provenance.KNOWN, tol)
    run_check(report, "curv.w_equals_r", w_equals_r, Provenance.KNOWN, tol)
    run_check(report, "curv.w_antisymmetry", per_state(w_antisymmetry), tolerance=tol)
    run_check(report, "curv.flat_vanishing", flat_vanishing, Provenance.TRIVIAL, 0.0)
    run_check(report, "curv.system_determinants", determinants, Provenance.KNOWN, 0.0)


# --- conformal normalization -------------------------------------------------


def random_jet_table(dim: Dim, rng: np.random.Generator, max_order: int) -> QJetTable:
    """Jet table with a small random rational value on every symmetrized key."""
    ring = ring_for(dim.n)
    values: dict[tuple[int, ...], Fraction] = {}
    for length in range(2, max_order + 1):
        for key in itertools.combinations_with_replacement(range(ring.size), length):
            if jet_order(ring, key) > max_order:
                continue
            value = Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4)))
            if value:
                values[key] = value
    return QJetTable(dim, max_order, values)


def _conf(config: RunConfig, report: RunReport) -> None:
    dim = config.dim
    ring = ring_for(dim.n)
    rng = np.random.default_rng(config.seed)
    base = random_jet_table(dim, rng, 4)
    state: dict[str, QJetTable] = {}

    def linearized() -> Outcome:
        oracle = LinearizedOracle(base)
        factor = normalize(4, oracle)
        final = oracle(factor)
        state["final"] = final
        left = final.nonzero(4)
        counter = {"jets": {str(k): str(v) for k, v in list(left.items())[:5]}} if left else None
        return Outcome(not left, len(left), counter)

    def idempotent() -> Outcome:
        table = state.get("final") or LinearizedOracle(base)(normalize(4, LinearizedOracle(base)))
        again = normalize(4, LinearizedOracle(table))
        return Outcome(again.is_zero(), ring.expr(again.total()))

    def inverse_problem() -> Outcome:
        seeded = ring.random_homogeneous(rng, 2, x_only=True) + ring.random_homogeneous(
            rng, 3, density=0.5
        )
        oracle = FlatModelOracle(dim, 3, start=seeded)
        factor = normalize(3, oracle)
        left = oracle(factor).nonzero(3)
        residual = ring.truncate(factor.total() + seeded, 3)
        stray = [mono for mono in ring.terms(residual) if sum(mono[: dim.h]) > 0]
        ok = not left and not stray
        return Outcome(ok, ring.expr(residual), {"seeded": ring.expr(seeded)})

    def vanishing() -> Outcome:
        table = state.get("final") or QJetTable.zero(dim, 4)
        items = vanishing_report(table)
        return Outcome(bool(items), [item.name for item in items])

    run_check(report, "conf.normalize_linearized", linearized, Provenance.KNOWN, 0.0)
    run_check(report, "conf.idempotence", idempotent, Provenance.DERIVED, 0.0)
    run_check(report, "conf.inverse_problem", inverse_problem, Provenance.DERIVED, 0.0)
    run_check(report, "conf.vanishing_report", vanishing, Provenance.KNOWN)


# --- invariants --------------------------------------------------------------


def _invar(config: RunConfig, report: RunReport) -> None:
    dim, kind = config.dim, config.scalar
    tol = invar_tolerance(config)

    def table() -> Outcome:
        columns = enumerate_table(4)
        sizes = {w: len(terms) for w, terms in columns.items() if w >= 2}
        return Outcome(sizes == {2: 3, 3: 4, 4: 7}, sizes)

    def metric_classes() -> Outcome:
        raw = count_contractions(0)
        classes = enumerate_contractions(num_acs=0)
        ok = raw == 24 and len(classes) == 3 and not enumerate_contractions(num_acs=1)
        return Outcome(ok, {"raw": raw, "classes": len(classes)})

    def reductions() -> Outcome:
        result = verify_reductions(dim, config.trials, tol, kind, config.seed)
        measured = {r.pattern.label: str(r.constant) for r in result.results if r.pattern.name}
        counter = None
        if result.failures:
            first = result.failures[0]
            counter = {"pattern": first.pattern.label, "deviation": first.deviation}
        return Outcome(result.passed, measured, counter)

    def second_derivatives() -> Outcome:
        # the exact system is only built for n = 1
        result = verify_second_derivative_system(Dim(1), config.trials, config.seed)
        counter = None if result.passed else {"maxima": dict(result.maxima)}
        detail = f"n = 1 subspace dimension {result.subspace_dim}"
        return Outcome(result.passed, dict(result.maxima), counter, detail)

    run_check(report, "invar.weight_table", table, Provenance.KNOWN)
    run_check(report, "invar.metric_classes", metric_classes, Provenance.DERIVED)
    run_check(report, "invar.reductions", reductions, Provenance.KNOWN, tol)
    run_check(report, "invar.second_derivatives", second_derivatives, Provenance.KNOWN, 0.0)


_RUNNERS: dict[str, Callable[[RunConfig, RunReport], None]] = {
    "algebra": _algebra,
    "flat": _flat,
    "geo": _geo,
    "poly": _poly,
    "curv": _curv,
    "conf": _conf,
    "invar": _invar,
}


def run_suite(
    name: str, config: RunConfig, states: Optional[list[PointState]] = None
) -> RunReport:
    """Run one suite, or every suite for ``"all"``.

    ``states`` replace the random point states of the curv suite.

    Raises:
        ConfigError: unknown suite name, states given to a suite without
            curv, or states that do not match the run.
    """
    if name not in SUITE_CHOICES:
        raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITE_CHOICES)}")
    if states and name not in ("curv", "all"):
        raise ConfigError(f"point states feed the curv suite, not {name!r}")
    names = SUITES if name == "all" else (name,)
    report = RunReport(f"verify --suite {name}", config.echo(), seed=config.seed)
    start = time.perf_counter()
    for suite in names:
        logger.info("suite %s started (n=%d, scalar=%s)", suite, config.n, config.scalar.value)
        before = len(report.checks)
        if suite == "curv":
            _curv(config, report, states)
        else:
            _RUNNERS[suite](config, report)
        failed = sum(1 for c in report.checks[before:] if c.status == CheckStatus.FAIL)
        logger.info(
            "suite %s finished: %d checks, %d failed", suite, len(report.checks) - before, failed
        )
    report.wall_time = time.perf_counter() - start
    return report
