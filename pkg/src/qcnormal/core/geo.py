"""Parabolic geodesics, the parabolic exponential map and frame transport.

A parabolic geodesic solves D_t²γ̇ = 0. It is integrated as the first-order
system in (γ, η = γ̇, ξ = D_tγ̇)::

    γ' = η,   η' = ξ − Γ(η, η),   ξ' = −Γ(η, ξ)

with Γ(u, v)^a = Γ^a_{bc} u^b v^c.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from qcnormal.core.errors import (
    IntegrationError,
    NewtonDivergence,
    PreconditionError,
    SingularJacobian,
)
from qcnormal.core.heis import flat_connection, flat_frame
from qcnormal.core.models import Dim, PolyConnection, ScalarKind, VanishingOrder

logger = logging.getLogger(__name__)

NEWTON_MAX_ITER = 50
FD_STEP = 1e-5


class ConnectionEvaluator:
    """Float evaluator for the Christoffel polynomials of a PolyConnection.

    Coefficients are packed once into a (monomial, a·b·c) table so each
    evaluation is one power product and one matrix product.
    """

    def __init__(self, conn: PolyConnection):
        self.size = conn.dim
        index: dict[tuple[int, ...], int] = {}
        entries: list[tuple[int, int, float]] = []
        for (a, b, c), terms in conn.gamma.items():
            for mono, coeff in terms:
                if len(mono) != conn.dim:
                    raise PreconditionError(
                        f"monomial {mono} has {len(mono)} exponents, expected {conn.dim}"
                    )
                row = index.setdefault(tuple(mono), len(index))
                entries.append((row, (a * self.size + b) * self.size + c, float(coeff)))
        self.exps = np.array(list(index), dtype=np.int64).reshape(len(index), conn.dim)
        self.table = np.zeros((len(index), self.size**3))
        for row, col, coeff in entries:
            self.table[row, col] += coeff
        self._constant = not self.exps.any()

    def christoffel(self, z: np.ndarray) -> np.ndarray:
        """Γ[a, b, c] at the point z."""
        if self._constant:
            values = np.ones(len(self.exps))
        else:
            values = np.prod(np.power(z[None, :], self.exps), axis=1)
        return (values @ self.table).reshape((self.size,) * 3)


def _gamma_apply(g: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (g @ v) @ u


def _run(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    s: float,
    tol: float,
    method: str = "RK45",
    t_eval: Optional[np.ndarray] = None,
) -> Any:
    if tol <= 0:
        raise PreconditionError(f"tolerance must be positive, got {tol}")
    with np.errstate(over="ignore", invalid="ignore"):
        sol = solve_ivp(rhs, (0.0, s), y0, method=method, rtol=tol, atol=tol, t_eval=t_eval)
    diagnostics = {
        "message": sol.message,
        "s_reached": float(sol.t[-1]) if sol.t.size else 0.0,
        "nfev": int(sol.nfev),
    }
    if not sol.success:
        raise IntegrationError(f"integration failed: {sol.message}", diagnostics)
    if not np.all(np.isfinite(sol.y)):
        raise IntegrationError("solution left the finite range", diagnostics)
    logger.debug("integrated to s=%g with %d evaluations", s, sol.nfev)
    return sol


def polynomial_geodesic(
    conn: PolyConnection,
    q: Sequence[float],
    initial_derivatives: Sequence[Sequence[float]],
    s: float,
    tol: float = 1e-9,
    evaluator: Optional[ConnectionEvaluator] = None,
) -> np.ndarray:
    """Integrate D_t^k γ̇ = 0 from the initial values of γ̇, D_tγ̇, ..., D_t^{k-1}γ̇.

    k = 1 gives ordinary geodesics, k = 2 parabolic ones.

    Returns:
        The coordinates of γ(s).
    """
    ev = evaluator or ConnectionEvaluator(conn)
    size = conn.dim
    k = len(initial_derivatives)
    if k < 1:
        raise PreconditionError("at least one initial derivative is required")
    y0 = np.concatenate(
        [np.asarray(q, dtype=float)] + [np.asarray(w, dtype=float) for w in initial_derivatives]
    )

    def rhs(_s: float, y: np.ndarray) -> np.ndarray:
        z = y[:size]
        ws = y[size:].reshape(k, size)
        g = ev.christoffel(z)
        out = np.empty_like(y)
        out[:size] = ws[0]
        for j in range(k):
            nxt = ws[j + 1] if j + 1 < k else 0.0
            out[size * (j + 1) : size * (j + 2)] = nxt - _gamma_apply(g, ws[0], ws[j])
        return out

    if s == 0:
        return y0[:size].copy()
    sol = _run(rhs, y0, s, tol)
    return np.asarray(sol.y[:size, -1])


def _initial_vectors(
    size: int, X: Sequence[float], Y: Sequence[float], frame0: Optional[np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    h = size - 3
    if X.shape != (h,) or Y.shape != (3,):
        raise PreconditionError(f"expected X of length {h} and Y of length 3")
    frame = np.eye(size) if frame0 is None else np.asarray(frame0, dtype=float)
    return frame[:, :h] @ X, frame[:, h:] @ Y


def parabolic_geodesic(
    conn: PolyConnection,
    q: Sequence[float],
    X: Sequence[float],
    Y: Sequence[float],
    s: float,
    tol: float = 1e-9,
    frame0: Optional[np.ndarray] = None,
    evaluator: Optional[ConnectionEvaluator] = None,
) -> np.ndarray:
    """Endpoint γ_{(X,Y)}(s) of the parabolic geodesic with γ̇(0) = X, D_tγ̇(0) = Y.

    X and Y are frame components with respect to ``frame0`` (identity when
    omitted, so X and Y are then coordinate vectors).

    Raises:
        IntegrationError: the step size underflowed or the solution blew up.
    """
    velocity, accel = _initial_vectors(conn.dim, X, Y, frame0)
    return polynomial_geodesic(conn, q, [velocity, accel], s, tol, evaluator)


def parabolic_trace(
    conn: PolyConnection,
    q: Sequence[float],
    X: Sequence[float],
    Y: Sequence[float],
    s: float,
    samples: int = 11,
    tol: float = 1e-9,
    frame0: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sampled curve parameters and coordinates along a parabolic geodesic."""
    size = conn.dim
    velocity, accel = _initial_vectors(size, X, Y, frame0)
    ev = ConnectionEvaluator(conn)
    y0 = np.concatenate([np.asarray(q, dtype=float), velocity, accel])

    def rhs(_s: float, y: np.ndarray) -> np.ndarray:
        g = ev.christoffel(y[:size])
        eta, xi = y[size : 2 * size], y[2 * size :]
        return np.concatenate([eta, xi - _gamma_apply(g, eta, eta), -_gamma_apply(g, eta, xi)])

    grid = np.linspace(0.0, s, samples)
    sol = _run(rhs, y0, s, tol, t_eval=grid)
    return np.asarray(sol.t), np.asarray(sol.y[:size].T)


def geodesic_second_order(
    conn: PolyConnection,
    q: Sequence[float],
    v: Sequence[float],
    s: float,
    tol: float = 1e-9,
    evaluator: Optional[ConnectionEvaluator] = None,
) -> np.ndarray:
    """Classical geodesic γ'' = −Γ(γ', γ') with an independent DOP853 integrator."""
    ev = evaluator or ConnectionEvaluator(conn)
    size = conn.dim
    y0 = np.concatenate([np.asarray(q, dtype=float), np.asarray(v, dtype=float)])

    def rhs(_s: float, y: np.ndarray) -> np.ndarray:
        g = ev.christoffel(y[:size])
        return np.concatenate([y[size:], -_gamma_apply(g, y[size:], y[size:])])

    if s == 0:
        return y0[:size].copy()
    sol = _run(rhs, y0, s, tol, method="DOP853")
    return np.asarray(sol.y[:size, -1])


def transport_frame(
    conn: PolyConnection,
    q: Sequence[float],
    X: Sequence[float],
    Y: Sequence[float],
    s: float,
    frame0: np.ndarray,
    tol: float = 1e-9,
) -> tuple[np.ndarray, np.ndarray]:
    """Parallel-transport ``frame0`` along γ_{(X,Y)}.

    Solves Z' = −Γ(γ̇, Z) jointly with the parabolic geodesic.

    Returns:
        The endpoint γ(s) and the transported frame (columns are vectors).
    """
    size = conn.dim
    frame0 = np.asarray(frame0, dtype=float)
    velocity, accel = _initial_vectors(size, X, Y, frame0)
    ev = ConnectionEvaluator(conn)
    y0 = np.concatenate([np.asarray(q, dtype=float), velocity, accel, frame0.ravel()])

    def rhs(_s: float, y: np.ndarray) -> np.ndarray:
        g = ev.christoffel(y[:size])
        eta, xi = y[size : 2 * size], y[2 * size : 3 * size]
        z = y[3 * size :].reshape(size, size)
        conn_eta = np.einsum("cab,a->cb", g, eta)
        return np.concatenate(
            [
                eta,
                xi - _gamma_apply(g, eta, eta),
                -_gamma_apply(g, eta, xi),
                (-conn_eta @ z).ravel(),
            ]
        )

    if s == 0:
        return y0[:size].copy(), frame0.copy()
    sol = _run(rhs, y0, s, tol)
    end = sol.y[:, -1]
    return np.asarray(end[:size]), np.asarray(end[3 * size :].reshape(size, size))


@dataclass
class ParabolicChart:
    """Parabolic normal chart centred at ``center`` with initial frame ``frame0``."""

    center: np.ndarray
    connection: PolyConnection
    frame0: np.ndarray
    tol: float = 1e-9
    _cache: dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.connection.dim

    @property
    def h(self) -> int:
        return self.connection.dim - 3

    @cached_property
    def evaluator(self) -> ConnectionEvaluator:
        return ConnectionEvaluator(self.connection)

    def exp(self, X: Sequence[float], Y: Sequence[float]) -> np.ndarray:
        return parabolic_exp(self, X, Y)

    def log(self, p: Sequence[float], tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
        return parabolic_log(self, p, tol)

    def validity_radius(
        self,
        r_max: float = 1.0,
        directions: Optional[Sequence[np.ndarray]] = None,
        bisections: int = 20,
    ) -> float:
        """Largest radius (up to ``r_max``) on which every test direction integrates.

        The radius is halved until every direction succeeds, then refined by bisection.
        """
        if "radius" in self._cache and self._cache["radius"][0] == r_max:
            return float(self._cache["radius"][1])
        if directions is None:
            eye = np.eye(self.size)
            directions = [sign * eye[k] for k in range(self.size) for sign in (1.0, -1.0)]

        def succeeds(r: float) -> bool:
            for d in directions:
                try:
                    point = self.exp(r * d[: self.h], r * d[self.h :])
                except IntegrationError:
                    return False
                if not np.all(np.isfinite(point)):
                    return False
            return True

        r = r_max
        while not succeeds(r):
            r /= 2
            if r < 1e-12:
                raise IntegrationError("no radius found on which the chart integrates")
        if r == r_max:
            self._cache["radius"] = (r_max, r)
            return r
        lo, hi = r, 2 * r
        for _ in range(bisections):
            mid = 0.5 * (lo + hi)
            if succeeds(mid):
                lo = mid
            else:
                hi = mid
        self._cache["radius"] = (r_max, lo)
        logger.debug("chart validity radius %g", lo)
        return lo


def parabolic_exp(chart: ParabolicChart, X: Sequence[float], Y: Sequence[float]) -> np.ndarray:
    """Ψ(X, Y) = γ_{(X,Y)}(1) with X, Y in ``chart.frame0`` components."""
    return parabolic_geodesic(
        chart.connection,
        chart.center,
        X,
        Y,
        1.0,
        chart.tol,
        frame0=chart.frame0,
        evaluator=chart.evaluator,
    )


def parabolic_log(
    chart: ParabolicChart, p: Sequence[float], tol: float = 1e-10
) -> tuple[np.ndarray, np.ndarray]:
    """Invert Ψ by Newton iteration seeded with dΨ|₀ = Id ⊕ ½Id.

    The finite-difference Jacobian is refreshed only when the Broyden-updated
    one stops halving the residual.

    Raises:
        NewtonDivergence: no convergence within 50 iterations.
        SingularJacobian: the finite-difference Jacobian could not be solved.
    """
    target = np.asarray(p, dtype=float)
    h = chart.h
    frame0 = np.asarray(chart.frame0, dtype=float)
    try:
        seed = np.linalg.solve(frame0, target - np.asarray(chart.center, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise SingularJacobian("initial frame is singular") from exc
    z = np.concatenate([seed[:h], 2.0 * seed[h:]])

    def psi(v: np.ndarray) -> np.ndarray:
        try:
            return parabolic_exp(chart, v[:h], v[h:])
        except IntegrationError as exc:
            raise NewtonDivergence(f"exponential map failed during Newton: {exc}") from exc

    def jacobian(v: np.ndarray) -> np.ndarray:
        jac = np.empty((v.size, v.size))
        for k in range(v.size):
            step = FD_STEP * max(1.0, abs(v[k]))
            dv = np.zeros_like(v)
            dv[k] = step
            jac[:, k] = (psi(v + dv) - psi(v - dv)) / (2 * step)
        return jac

    jac: Optional[np.ndarray] = None
    residual = psi(z) - target
    previous = np.inf
    for iteration in range(NEWTON_MAX_ITER):
        err = float(np.max(np.abs(residual)))
        logger.debug("newton iteration %d residual %.3e", iteration, err)
        if not np.isfinite(err):
            raise NewtonDivergence("residual is not finite")
        if err < tol:
            return z[:h].copy(), z[h:].copy()
        if jac is None or err > 0.5 * previous:
            jac = jacobian(z)
        try:
            delta = -np.linalg.solve(jac, residual)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"jacobian singular at iteration {iteration}") from exc
        z = z + delta
        updated = psi(z) - target
        jac = jac + np.outer(updated - residual - jac @ delta, delta) / float(delta @ delta)
        residual, previous = updated, err
    raise NewtonDivergence(f"no convergence after {NEWTON_MAX_ITER} iterations")


def flat_chart(dim: Dim, tol: float = 1e-9) -> ParabolicChart:
    """Chart of the flat model at the origin with the left-invariant frame."""
    frame = flat_frame(dim, ScalarKind.F64)
    origin = np.zeros(dim.total)
    return ParabolicChart(
        origin, flat_connection(dim), np.asarray(frame.frame_matrix(origin), dtype=float), tol
    )


def dilate_coords(z: np.ndarray, s: float) -> np.ndarray:
    """Parabolic dilation of a coordinate vector (x, t) ↦ (s x, s² t)."""
    out = np.array(z, dtype=float)
    out[:-3] *= s
    out[-3:] *= s * s
    return out


def vanishing_order(
    f: Callable[[np.ndarray], Any],
    base: Sequence[float],
    s_grid: Sequence[float],
    chart: Optional[ParabolicChart] = None,
    noise_floor: float = 1e-13,
) -> VanishingOrder:
    """Fit the slope of log|f(δ_s base)| against log s.

    With a chart, ``base`` holds normal coordinates and f is evaluated at the
    manifold point Ψ(δ_s base); otherwise f is evaluated at δ_s base directly.
    """
    grid = np.asarray(s_grid, dtype=float)
    if grid.size < 6 or np.any(grid <= 0):
        raise PreconditionError("s_grid needs at least 6 positive samples")
    base = np.asarray(base, dtype=float)
    values = []
    for s in grid:
        z = dilate_coords(base, s)
        if chart is not None:
            z = chart.exp(z[: chart.h], z[chart.h :])
        values.append(float(np.linalg.norm(np.atleast_1d(np.asarray(f(z), dtype=float)))))
    vals = np.asarray(values)
    keep = vals > noise_floor
    if keep.sum() < 2:
        s_max = float(grid.max())
        cutoff = float(np.log(noise_floor) / np.log(s_max)) if s_max < 1 else float("inf")
        logger.warning("all samples below noise floor %g; order >= %.2f", noise_floor, cutoff)
        return VanishingOrder(order=float("nan"), residual=0.0, at_least=cutoff)
    logs, logv = np.log(grid[keep]), np.log(vals[keep])
    slope, intercept = np.polyfit(logs, logv, 1)
    residual = float(np.sqrt(np.mean((logv - (slope * logs + intercept)) ** 2)))
    return VanishingOrder(order=float(slope), residual=residual)
