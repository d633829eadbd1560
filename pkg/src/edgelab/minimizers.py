"""Global and conditional minimizers of H(a, b) = tr V(T) - sum_k alpha_k log b_k.

Newton's method with the exact banded Hessian. Hessian columns come from
forward-mode Hessian-vector products over a coloring of the sites: two sites
interact only within distance deg V / 2, so perturbing every P-th site at
once recovers P columns per product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.special

from . import banded
from .local_equilibrium import NonConvexError, NumericalError, local_curve, scaling_constants
from .potential import Potential
from .tridiag import TridiagonalSym, eigen_max, eigvalsh, log_weights

J00 = float(scipy.special.jn_zeros(0, 1)[0])


def hamiltonian_alphas(n: int, beta: float) -> np.ndarray:
    """alpha_k = 1 - k/n - 1/(n beta), k = 1..n-1; beta = inf drops the last term."""
    k = np.arange(1, n)
    alpha = 1.0 - k / n
    if math.isfinite(beta):
        alpha = alpha - 1.0 / (n * beta)
    # 1 - (n-1)/n - 1/n at beta = 1 is zero up to rounding
    return np.where(np.abs(alpha) < 1e-14, 0.0, alpha)


@dataclass
class MinimizerProblem:
    """H restricted to free coordinates; fixed coordinates keep the values in ``a``/``b``.

    ``free_a[i]`` and ``free_b[i]`` mark free coordinates. A b-coordinate with
    alpha = 0 cannot be free: the evenness of tr V(T) in each b puts its
    minimizer at 0, so it is pinned there.
    """

    V: Potential
    a: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    free_a: np.ndarray
    free_b: np.ndarray
    beta: float = math.inf

    def __post_init__(self):
        if self.V.convexity <= 0:
            raise NonConvexError("H is convex only for uniformly convex V")
        if math.isfinite(self.beta) and self.beta < 1:
            raise NonConvexError("H is convex only for beta >= 1")
        self.a = np.array(self.a, dtype=float)
        self.b = np.array(self.b, dtype=float)
        self.alpha = np.array(self.alpha, dtype=float)
        self.free_a = np.array(self.free_a, dtype=bool)
        self.free_b = np.array(self.free_b, dtype=bool)
        n = self.a.size
        if self.b.size != n - 1 or self.alpha.size != n - 1:
            raise ValueError("b and alpha need n - 1 entries")
        if self.free_a.size != n or self.free_b.size != n - 1:
            raise ValueError("free masks have the wrong size")
        if np.any(self.alpha < 0) or np.any(self.alpha > 1):
            raise ValueError("log coefficients must lie in [0, 1]")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("boundary values must be finite")
        pinned = self.free_b & (self.alpha == 0)
        self.b[pinned] = 0.0
        self.free_b = self.free_b & ~pinned
        if np.any(self.b[self.free_b] <= 0):
            raise ValueError("free b-coordinates need positive starting values")

    @property
    def n(self) -> int:
        return self.a.size

    @classmethod
    def global_problem(cls, V: Potential, n: int, beta: float = math.inf) -> "MinimizerProblem":
        if math.isfinite(beta) and beta < 1:
            raise NonConvexError("H is convex only for beta >= 1")
        alpha = hamiltonian_alphas(n, beta)
        a0, b0 = _local_guess(V, alpha)
        return cls(V, a0, b0, alpha, np.ones(n, bool), np.ones(n - 1, bool), beta)


@dataclass
class MinimizerSolution:
    a: np.ndarray
    b: np.ndarray
    grad_norm: float
    iterations: int
    problem: MinimizerProblem = field(repr=False)

    @property
    def T(self) -> TridiagonalSym:
        return TridiagonalSym(self.a, self.b)


def _local_guess(V: Potential, alpha: np.ndarray):
    """Entries of the local minimizer at x = 1 - alpha, interpolated from a coarse curve."""
    pos = alpha[alpha > 0]
    n = alpha.size + 1
    xs_hi = 1.0 - (pos.min() if pos.size else 1.0)
    grid = np.linspace(min(0.0, 1.0 - alpha.max()), max(xs_hi, 0.0), 48)
    curve = local_curve(V, grid)
    ga = np.array([m.a for m in curve])
    gg = np.array([m.b**2 / (1.0 - m.x) for m in curve])
    x = 1.0 - alpha
    b = np.sqrt(np.interp(x, grid, gg) * np.maximum(alpha, 0.0))
    a = np.empty(n)
    a[:-1] = np.interp(x, grid, ga)
    a[-1] = a[-2] if n > 1 else curve[0].a
    return a, b


def hamiltonian(V: Potential, a, b, alpha) -> float:
    tr, _, _ = banded.trace_and_dpoly(V.coeffs, np.asarray(a, float), np.asarray(b, float))
    mask = alpha > 0
    return float(tr - np.sum(alpha[mask] * np.log(b[mask])))


def gradient(V: Potential, a, b, alpha):
    """(dH/da, dH/db) for H = tr V(T) - sum alpha log b."""
    _, dd, do = banded.trace_and_dpoly(V.coeffs, np.asarray(a, float), np.asarray(b, float))
    gb = 2.0 * do
    mask = alpha > 0
    gb[mask] -= alpha[mask] / b[mask]
    return dd, gb


def hessian_entries(V: Potential, a, b, alpha):
    """Nonzero Hessian entries of H in the interleaved order z = (a_0, b_0, a_1, b_1, ...).

    Returns (rows, cols, vals) covering both triangles.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = a.size
    dcoef = V.deriv_coeffs(1)
    s = V.degree // 2 + 1
    P = 2 * s + 2
    rows, cols, vals = [], [], []
    site = np.arange(n)
    for kind in ("a", "b"):
        nsites = n if kind == "a" else n - 1
        for r in range(min(P, nsites)):
            da = np.zeros(n)
            db = np.zeros(n - 1)
            (da if kind == "a" else db)[r::P] = 1.0
            hd, ho = banded.dpoly_directional(dcoef, a, b, da, db)
            for out_kind, resp, nsite_out in (("a", hd, n), ("b", 2.0 * ho, n - 1)):
                j = site[:nsite_out]
                i = r + P * np.round((j - r) / P).astype(int)
                ok = (np.abs(i - j) <= s) & (i >= 0) & (i < nsites)
                zr = 2 * j[ok] + (0 if out_kind == "a" else 1)
                zc = 2 * i[ok] + (0 if kind == "a" else 1)
                rows.append(zr)
                cols.append(zc)
                vals.append(resp[ok])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    mask = alpha > 0
    kb = np.nonzero(mask)[0]
    rows = np.concatenate([rows, 2 * kb + 1])
    cols = np.concatenate([cols, 2 * kb + 1])
    vals = np.concatenate([vals, alpha[mask] / b[mask] ** 2])
    return rows, cols, vals


def _free_band(rows, cols, vals, zfree: np.ndarray):
    """Upper band (LAPACK 'U' layout) of the Hessian restricted to ``zfree``."""
    N = zfree.size
    pos = -np.ones(int(max(rows.max(), cols.max(), zfree.max())) + 1, dtype=int)
    pos[zfree] = np.arange(N)
    pr, pc = pos[rows], pos[cols]
    keep = (pr >= 0) & (pc >= 0) & (pr <= pc)
    pr, pc, v = pr[keep], pc[keep], vals[keep]
    u = int((pc - pr).max()) if pc.size else 0
    ab = np.zeros((u + 1, N))
    np.add.at(ab, (u + pr - pc, pc), v)
    return ab


def hessian_dense(V: Potential, a, b, alpha) -> np.ndarray:
    rows, cols, vals = hessian_entries(V, a, b, alpha)
    N = 2 * len(a) - 1
    H = np.zeros((N, N))
    np.add.at(H, (rows, cols), vals)
    return H


def _minimize(problem: MinimizerProblem, tol: float | None = None, max_iter: int = 100) -> MinimizerSolution:
    V = problem.V
    a = problem.a.copy()
    b = problem.b.copy()
    alpha = problem.alpha
    n = problem.n
    fa, fb = problem.free_a, problem.free_b
    zfree = np.sort(np.concatenate([2 * np.nonzero(fa)[0], 2 * np.nonzero(fb)[0] + 1]))
    tol = 1e-10 * n if tol is None else tol
    if zfree.size == 0:
        return MinimizerSolution(a, b, 0.0, 0, problem)

    def free_grad(a, b):
        ga, gb = gradient(V, a, b, alpha)
        z = np.empty(2 * n - 1)
        z[0::2] = ga
        z[1::2] = gb
        return z[zfree]

    f = hamiltonian(V, a, b, alpha)
    g = free_grad(a, b)
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            break
        rows, cols, vals = hessian_entries(V, a, b, alpha)
        ab = _free_band(rows, cols, vals, zfree)
        try:
            step = -scipy.linalg.solveh_banded(ab, g, lower=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("Hessian is not positive definite") from exc
        za = np.zeros(2 * n - 1)
        za[zfree] = step
        sa, sb = za[0::2], za[1::2]
        t = 1.0
        neg = sb < 0
        if np.any(neg & fb):
            t = min(1.0, 0.99 * float(np.min(-b[neg & fb] / sb[neg & fb])))
        slope = float(g @ step)
        while True:
            an, bn = a + t * sa, b + t * sb
            fn = hamiltonian(V, an, bn, alpha)
            if fn <= f + 1e-4 * t * slope or abs(fn - f) <= 1e-14 * max(1.0, abs(f)):
                break
            t *= 0.5
            if t < 1e-14:
                raise NumericalError(f"line search stalled at gradient norm {gnorm:.3g}")
        a, b, f = an, bn, fn
        g = free_grad(a, b)
    else:
        gnorm = float(np.linalg.norm(g))
        if gnorm > tol:
            raise NumericalError(f"no convergence in {max_iter} Newton steps (gradient {gnorm:.3g})")
    return MinimizerSolution(a, b, float(np.linalg.norm(g)), it, problem)


def minimize_H(problem: MinimizerProblem, tol: float | None = None) -> MinimizerSolution:
    """Unique minimizer of H over the free coordinates."""
    return _minimize(problem, tol)


def conditional_minimize(problem: MinimizerProblem, tol: float | None = None) -> MinimizerSolution:
    """Minimizer on the free set with every other coordinate held at its given value."""
    return _minimize(problem, tol)


def window_problem(
    V: Potential, ell: int, left: tuple[float, float], right: tuple[float, float], alpha: float = 1.0, pad: int | None = None
) -> MinimizerProblem:
    """Free window of ``ell`` sites with ``pad`` fixed sites on each side.

    Fixed sites hold (a, b) = ``left`` on the left and ``right`` on the right;
    the free window starts at the average of the two.
    """
    pad = V.degree if pad is None else pad
    n = ell + 2 * pad
    a = np.empty(n)
    b = np.empty(n - 1)
    a[:pad], b[:pad] = left
    a[pad + ell :], b[pad + ell - 1 :] = right
    a[pad : pad + ell] = 0.5 * (left[0] + right[0])
    b[pad : pad + ell - 1] = 0.5 * (left[1] + right[1])
    free_a = np.zeros(n, bool)
    free_a[pad : pad + ell] = True
    free_b = np.zeros(n - 1, bool)
    free_b[pad : pad + ell - 1] = True
    return MinimizerProblem(V, a, b, np.full(n - 1, alpha), free_a, free_b)


@dataclass
class DecayFit:
    slope: float
    intercept: float
    saturated: bool
    distances: np.ndarray
    differences: np.ndarray


def boundary_decay_rate(V: Potential, ell: int = 80, delta: float = 0.1) -> DecayFit:
    """Exponential rate at which a boundary perturbation fades inside a window.

    Both runs use boundary values equal to the local minimizer at x = 0; the
    second adds ``delta`` to the left boundary. The slope of log|difference|
    against distance from the left edge is fitted over the left half of the
    window. If every difference is below 1e-14 the fit is reported as
    saturated with slope -inf.
    """
    if ell < 40:
        raise ValueError("need a window of at least 40 sites")
    sc = scaling_constants(V)
    base = (sc.a0, sc.b0)
    pert = (sc.a0 + delta, sc.b0 + delta)
    p0 = window_problem(V, ell, base, base)
    p1 = window_problem(V, ell, pert, base)
    s0 = conditional_minimize(p0, tol=1e-13)
    s1 = conditional_minimize(p1, tol=1e-13)
    pad = p0.n - ell
    pad //= 2
    da = np.abs(s1.a - s0.a)[pad : pad + ell]
    db = np.abs(s1.b - s0.b)[pad : pad + ell - 1]
    diff = da[: ell - 1] + db
    dist = np.arange(1, ell)
    half = dist <= ell // 2
    use = half & (diff > 1e-14)
    if np.count_nonzero(use) < 3:
        return DecayFit(-math.inf, -math.inf, True, dist, diff)
    slope, icpt = np.polyfit(dist[use], np.log(diff[use]), 1)
    return DecayFit(float(slope), float(icpt), False, dist, diff)


def approx_J(V: Potential, m: int, n_embed: int | None = None) -> TridiagonalSym:
    """Top m x m corner of the Jacobi operator minimizing H with alpha = 1.

    The semi-infinite problem is truncated at ``n_embed`` sites, beyond which
    entries are held at the local minimizer (a(0), b(0)).
    """
    n_embed = 4 * m if n_embed is None else n_embed
    if m < 8:
        raise ValueError("m must be at least 8")
    if n_embed < 4 * m:
        raise ValueError("n_embed must be at least 4 m")
    sc = scaling_constants(V)
    pad = V.degree
    n = n_embed + pad
    a = np.full(n, sc.a0)
    b = np.full(n - 1, sc.b0)
    free_a = np.zeros(n, bool)
    free_a[:n_embed] = True
    free_b = np.zeros(n - 1, bool)
    free_b[: n_embed - 1] = True
    sol = minimize_H(MinimizerProblem(V, a, b, np.ones(n - 1), free_a, free_b), tol=1e-13)
    return TridiagonalSym(sol.a[:m], sol.b[: m - 1])


@dataclass
class QuadratureCheck:
    m: int
    lambda_max: float
    bound: float
    normalized_gap: float  # (E - lambda_max) m^2 / b(0)


def quadrature_bound_check(V: Potential, m: int, n_embed: int | None = None) -> QuadratureCheck:
    """lambda_max of J[1, m] next to a(0) + b(0)(2 - (j00/m)^2)."""
    if m < 16:
        raise ValueError("m must be at least 16")
    sc = scaling_constants(V)
    lam = eigen_max(approx_J(V, m, n_embed))
    bound = sc.a0 + sc.b0 * (2.0 - (J00 / m) ** 2)
    return QuadratureCheck(m, lam, bound, (sc.edge - lam) * m**2 / sc.b0)


def fit_quadrature_slack(checks: list[QuadratureCheck]) -> float:
    """Smallest s with lambda_max <= bound + s/m^3 on every check."""
    return max(c.m**3 * (c.lambda_max - c.bound) for c in checks)


@dataclass
class FeketeCheck:
    residual: float
    weight_deviation: float
    min_gap: float
    ill_conditioned: bool


def fekete_stationarity(T: TridiagonalSym, V: Potential) -> FeketeCheck:
    """Check n V'(lam_i) = sum_{j != i} 1/(lam_i - lam_j) and equal spectral weights."""
    n = T.n
    lam = eigvalsh(T)
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, np.inf)
    res = n * V.deriv(lam) - np.sum(1.0 / diff, axis=1)
    w = np.exp(log_weights(T, lam))
    w /= w.sum()
    gap = float(np.min(np.diff(lam))) if n > 1 else math.inf
    return FeketeCheck(float(np.max(np.abs(res)) / n), float(np.max(np.abs(w - 1.0 / n))), gap, gap < 1e-12)


def truncation_margin(T: TridiagonalSym, m: int, V: Potential, kappa: float = 0.5) -> float:
    """Smallest eigenvalue of the difference between the truncation bound and T.

    The bound is (b(0) - kappa/m^2) e_mm + T restricted to [m, n] +
    (E - kappa/m^2) on [1, m-1]; the difference is supported on the top
    m x m block. Nonnegative means the bound holds.
    """
    sc = scaling_constants(V)
    top = T.minor(0, m)
    shift = sc.edge - kappa / m**2
    d = shift - top.diag
    d[-1] = sc.b0 - kappa / m**2
    block = TridiagonalSym(d, -top.offdiag)
    return min(float(eigvalsh(block)[0]), 0.0) if T.n > m else float(eigvalsh(block)[0])
