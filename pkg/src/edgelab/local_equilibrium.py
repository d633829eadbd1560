"""Local equilibrium: minimizers of W(a, b) - (1 - x) log b and the edge constants."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .potential import Potential, w_partials

RESIDUAL_TOL = 1e-11


class DomainError(ValueError):
    pass


class NonConvexError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


class ConvexityLost(RuntimeError):
    """Continuation hit a point where the 2x2 Hessian is not positive definite."""

    def __init__(self, x: float, solved: list):
        super().__init__(f"Hessian of the local problem lost positive definiteness at x = {x:g}")
        self.x = x
        self.solved = solved


@dataclass(frozen=True)
class LocalMinimizer:
    x: float
    a: float
    b: float
    a_prime: float
    b_prime: float
    residual: float
    hessian_pd: bool = True

    @property
    def edge(self) -> float:
        return self.a + 2.0 * self.b

    @property
    def left(self) -> float:
        return self.a - 2.0 * self.b


@dataclass(frozen=True)
class SigmaMatrix:
    s11: float
    s12: float
    s22: float

    def array(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s12, self.s22]])

    def is_positive_definite(self) -> bool:
        return self.s11 > 0 and self.s11 * self.s22 - self.s12**2 > 0


@dataclass(frozen=True)
class ScalingConstants:
    """Edge location and scaling constants; sigma2 and m_n depend on beta and n."""

    edge: float
    tau: float
    gamma: float
    vartheta: float
    a0: float
    b0: float
    a_prime0: float
    b_prime0: float

    def sigma2(self, beta: float) -> float:
        return 4.0 / beta * self.b0 * self.tau

    def m_n(self, n: float) -> float:
        return (self.b0 * n / self.tau) ** (1.0 / 3.0)


def _local_hessian(d, x, b):
    return np.array([[d.W11, d.W12], [d.W12, d.W22 + (1.0 - x) / b**2]])


def _residual(d, x, b):
    return max(abs(d.W1), abs(b * d.W2 - (1.0 - x)))


def _objective(V, a, b, x):
    from .potential import w_value

    return w_value(V, a, b) - (1.0 - x) * math.log(b)


def solve_local_minimizer(
    V: Potential,
    x: float,
    *,
    start: tuple[float, float] | None = None,
    require_convex: bool = True,
    max_iter: int = 200,
) -> LocalMinimizer:
    """Newton's method for W_1 = 0, W_2 = (1 - x)/b with b kept positive."""
    x = float(x)
    if not x < 1.0:
        raise DomainError(f"x must be < 1, got {x}")
    if require_convex and V.convexity <= 0:
        raise NonConvexError(f"V is not uniformly convex (min V'' = {V.convexity:g})")
    a, b = (V.argmin(), 1.0 - x) if start is None else start
    if b <= 0:
        raise DomainError("starting b must be positive")
    f = _objective(V, a, b, x)
    converged = False
    for _ in range(max_iter):
        d = w_partials(V, a, b)
        g = np.array([d.W1, d.W2 - (1.0 - x) / b])
        if _residual(d, x, b) <= 1e-14 * max(1.0, abs(1.0 - x)):
            converged = True
            break
        H = _local_hessian(d, x, b)
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular local Hessian at x = {x}") from exc
        t = 1.0
        while b + t * step[1] <= 0:
            t *= 0.5
        if require_convex:
            # backtracking keeps the iteration monotone on the convex objective
            while t > 1e-12:
                fn = _objective(V, a + t * step[0], b + t * step[1], x)
                if fn <= f + 1e-4 * t * float(g @ step) or abs(fn - f) <= 1e-15 * max(1.0, abs(f)):
                    break
                t *= 0.5
            f = _objective(V, a + t * step[0], b + t * step[1], x)
        a_new, b_new = a + t * step[0], b + t * step[1]
        if abs(a_new - a) + abs(b_new - b) <= 1e-16 * (1.0 + abs(a) + abs(b)):
            a, b = a_new, b_new
            converged = True
            break
        a, b = a_new, b_new
    d = w_partials(V, a, b)
    res = _residual(d, x, b)
    if not converged and res > RESIDUAL_TOL:
        raise NumericalError(f"Newton did not converge in {max_iter} steps at x = {x} (residual {res:.3g})")
    if res > RESIDUAL_TOL * max(1.0, abs(1.0 - x)):
        raise NumericalError(f"residual {res:.3g} above tolerance at x = {x}")
    H = _local_hessian(d, x, b)
    pd = bool(H[0, 0] > 0 and np.linalg.det(H) > 0)
    # a' W11 + b' W12 = 0,  b (a' W12 + b' W22) + b' W2 = -1
    J = np.array([[d.W11, d.W12], [b * d.W12, b * d.W22 + d.W2]])
    ap, bp = np.linalg.solve(J, np.array([0.0, -1.0]))
    return LocalMinimizer(x, float(a), float(b), float(ap), float(bp), float(res), pd)


def local_curve(V: Potential, xs) -> list[LocalMinimizer]:
    """Solve along a grid, warm-starting each point from its neighbour."""
    xs = [float(x) for x in xs]
    out: dict[float, LocalMinimizer] = {}
    prev = None
    for x in sorted(set(xs)):
        start = None if prev is None else (prev.a, prev.b)
        try:
            sol = solve_local_minimizer(V, x, start=start)
        except NumericalError:
            sol = solve_local_minimizer(V, x)
        out[x] = prev = sol
    return [out[x] for x in xs]


def continuation_curve(V: Potential, xs, x_start: float = 0.99, a_start: float | None = None) -> list[LocalMinimizer]:
    """Track the local solution downward from ``x_start`` without assuming convexity.

    ``a_start`` picks the branch (default: argmin V for convex V, else 0).
    Raises ConvexityLost (carrying the points solved so far) as soon as the
    2x2 Hessian stops being positive definite.
    """
    targets = sorted((float(x) for x in xs), reverse=True)
    if targets and targets[0] >= 1.0:
        raise DomainError("grid points must be < 1")
    if a_start is None:
        a_start = V.argmin() if V.convexity > 0 else 0.0
    first = solve_local_minimizer(V, x_start, require_convex=False, start=(a_start, 0.5 * math.sqrt(1.0 - x_start)))
    if not first.hessian_pd:
        raise ConvexityLost(x_start, [])
    solved = []
    prev = first
    x_cur = x_start
    for x in targets:
        # small steps toward the target keep Newton in its basin; near a fold
        # the step shrinks until the branch end is located
        step = 0.02
        while x_cur > x:
            s = max(x, x_cur - step)
            dx = s - x_cur
            pred = (prev.a + dx * prev.a_prime, prev.b + dx * prev.b_prime)
            try:
                sol = solve_local_minimizer(
                    V, float(s), start=(pred[0], max(pred[1], 0.5 * prev.b)), require_convex=False
                )
            except NumericalError:
                sol = None
            # a solution far from the tangent prediction sits on another branch
            if sol is not None:
                drift = abs(sol.a - pred[0]) + abs(sol.b - pred[1])
                if drift > 0.1 * (abs(prev.a_prime) + abs(prev.b_prime) + 1.0) * abs(dx) + 1e-9:
                    sol = None
            if sol is None or not sol.hessian_pd:
                if sol is not None or step < 1e-7:
                    raise ConvexityLost(float(s), solved)
                step /= 2.0
                continue
            prev, x_cur = sol, s
        solved.append(prev)
    return solved


def sigma_matrix(V: Potential, x: float) -> SigmaMatrix:
    """Inverse Hessian of the local problem, as -b [[4 b', a'], [a', b']]."""
    if not 0.0 <= x < 1.0:
        raise DomainError(f"x must lie in [0, 1), got {x}")
    m = solve_local_minimizer(V, x)
    return SigmaMatrix(-m.b * 4.0 * m.b_prime, -m.b * m.a_prime, -m.b * m.b_prime)


def local_hessian(V: Potential, x: float) -> np.ndarray:
    """Hessian of W(a, b) - (1 - x) log b at the local minimizer."""
    m = solve_local_minimizer(V, x)
    return _local_hessian(w_partials(V, m.a, m.b), x, m.b)


def scaling_constants(V: Potential) -> ScalingConstants:
    m = solve_local_minimizer(V, 0.0)
    tau = -(m.a_prime + 2.0 * m.b_prime)
    if not tau > 0:
        raise NumericalError(f"edge derivative has the wrong sign (tau = {tau})")
    return ScalingConstants(
        edge=m.a + 2.0 * m.b,
        tau=tau,
        gamma=m.b ** (-1.0 / 3.0) * tau ** (-2.0 / 3.0),
        vartheta=m.b / tau,
        a0=m.a,
        b0=m.b,
        a_prime0=m.a_prime,
        b_prime0=m.b_prime,
    )


def moment_conditions_residual(
    V: Potential, x: float, L: float, R: float, nodes: int = 200, tol: float = 1e-9
) -> tuple[float, float]:
    """Moment conditions for support [L, R] of the equilibrium measure of V/(1 - x).

    Returns (first - 1, second), where with s = c + r cos(theta) averaged over
    Gauss-Chebyshev nodes,
      first  = mean(s V'(s)) / (1 - x),   second = mean(V'(s)) / (1 - x).
    Both vanish exactly when (c, r/2) solves the local optimization problem.
    """
    if not L < R:
        raise DomainError("need L < R")
    if not x < 1:
        raise DomainError("need x < 1")
    dV = V.deriv_coeffs(1)
    c, r = 0.5 * (L + R), 0.5 * (R - L)

    def quad(N):
        theta = (2.0 * np.arange(1, N + 1) - 1.0) * np.pi / (2.0 * N)
        s = c + r * np.cos(theta)
        dv = np.polynomial.polynomial.polyval(s, dV)
        vals = np.array([np.mean(s * dv), np.mean(dv)]) / (1.0 - x)
        if not np.all(np.isfinite(vals)):
            raise NumericalError("non-finite quadrature value")
        return vals

    prev = quad(nodes)
    for _ in range(12):
        nodes *= 2
        cur = quad(nodes)
        if np.max(np.abs(cur - prev)) <= tol:
            break
        prev = cur
    else:
        raise NumericalError("moment quadrature did not settle")
    return float(cur[0] - 1.0), float(cur[1])


def edge_curve(V: Potential, xs) -> list[float]:
    return [m.edge for m in local_curve(V, xs)]


def edge_exponent_probe(V: Potential, eps_lo: float = 1e-4, eps_hi: float = 1e-2, num: int = 9, continuation: bool = False):
    """Fit E(0) - E(eps) ~ c eps^p on a log grid; returns (p, c).

    For regular V, p = 1 and c = tau. For nonregular V the exponent is
    expected to be 1/(2k + 1).
    """
    eps = np.geomspace(eps_lo, eps_hi, num)
    xs = [0.0] + list(eps)
    if continuation:
        sols = continuation_curve(V, xs)
        by_x = {m.x: m for m in sols}
        edges = [by_x[x].edge for x in xs]
    else:
        edges = edge_curve(V, xs)
    drop = edges[0] - np.array(edges[1:])
    if np.any(drop <= 0):
        raise NumericalError("edge is not decreasing on the probe grid")
    p, logc = np.polyfit(np.log(eps), np.log(drop), 1)
    return float(p), float(math.exp(logc))


def nonregular_gamma(c: float, edge: float) -> float:
    """Conjectured scale gamma = c^{-2/3} (E/2)^{-1/3} for a nonregular edge."""
    return c ** (-2.0 / 3.0) * (edge / 2.0) ** (-1.0 / 3.0)


TABLE_COLUMNS = ["x", "a", "b", "a_prime", "b_prime", "edge", "left", "right", "s11", "s12", "s22"]


def equilibrium_rows(V: Potential, xs) -> list[dict]:
    rows = []
    for m in local_curve(V, xs):
        row = dict(x=m.x, a=m.a, b=m.b, a_prime=m.a_prime, b_prime=m.b_prime, edge=m.edge, left=m.left, right=m.edge)
        row.update(s11=-4.0 * m.b * m.b_prime, s12=-m.b * m.a_prime, s22=-m.b * m.b_prime)
        rows.append(row)
    return rows


def equilibrium_csv(V: Potential, xs) -> str:
    xs = [float(x) for x in xs]
    if any(not 0.0 <= x < 1.0 for x in xs):
        raise DomainError("grid must lie in [0, 1)")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in equilibrium_rows(V, xs):
        w.writerow({k: repr(float(v)) for k, v in row.items()})
    return buf.getvalue()
