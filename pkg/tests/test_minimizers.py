import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import HERMITE, QUARTIC, SEXTIC, random_jacobi
from edgelab.ensembles import sample_hermite_de
from edgelab.local_equilibrium import NonConvexError, scaling_constants
from edgelab.minimizers import (
    J00,
    MinimizerProblem,
    approx_J,
    boundary_decay_rate,
    conditional_minimize,
    fekete_stationarity,
    fit_quadrature_slack,
    gradient,
    hamiltonian,
    hamiltonian_alphas,
    hessian_dense,
    minimize_H,
    quadrature_bound_check,
    truncation_margin,
    window_problem,
)
from edgelab.potential import Potential
from edgelab.tridiag import TridiagonalSym, eigen_max, eigvalsh


def z_of(a, b):
    z = np.empty(a.size + b.size)
    z[0::2], z[1::2] = a, b
    return z


@pytest.mark.parametrize("V", [QUARTIC, SEXTIC])
def test_hessian_matches_finite_differences(V, rng):
    n = 11
    a, b = 0.3 * rng.normal(size=n), rng.uniform(0.5, 1.0, n - 1)
    alpha = hamiltonian_alphas(n, 2.0)
    H = hessian_dense(V, a, b, alpha)

    def g(z):
        ga, gb = gradient(V, z[0::2], z[1::2], alpha)
        return z_of(ga, gb)

    z = z_of(a, b)
    fd = np.array([(g(z + 1e-6 * e) - g(z - 1e-6 * e)) / 2e-6 for e in np.eye(z.size)]).T
    assert np.allclose(H, fd, atol=1e-6 * (1 + np.abs(H).max()))
    assert np.allclose(H, H.T)


def test_gradient_matches_finite_differences(rng):
    n = 8
    a, b = rng.normal(size=n), rng.uniform(0.5, 1.0, n - 1)
    alpha = hamiltonian_alphas(n, 3.0)
    ga, gb = gradient(SEXTIC, a, b, alpha)
    z = z_of(a, b)
    f = lambda z: hamiltonian(SEXTIC, z[0::2], z[1::2], alpha)
    fd = np.array([(f(z + 1e-6 * e) - f(z - 1e-6 * e)) / 2e-6 for e in np.eye(z.size)])
    assert np.allclose(z_of(ga, gb), fd, rtol=1e-6, atol=1e-6)


def test_alphas():
    assert np.allclose(hamiltonian_alphas(4, math.inf), [0.75, 0.5, 0.25])
    assert np.allclose(hamiltonian_alphas(4, 2.0), [0.625, 0.375, 0.125])
    assert hamiltonian_alphas(5, 1.0)[-1] == 0.0


@pytest.mark.parametrize("V", [HERMITE, QUARTIC, SEXTIC])
@pytest.mark.parametrize("n,beta", [(2, 2.0), (30, 1.0), (200, math.inf), (1000, 4.0)])
def test_global_minimizer_gradient(V, n, beta):
    sol = minimize_H(MinimizerProblem.global_problem(V, n, beta))
    assert sol.grad_norm <= 1e-10 * n
    assert np.all(sol.b[hamiltonian_alphas(n, beta) > 0] > 0)


def test_hermite_beta_inf_closed_form():
    n = 400
    sol = minimize_H(MinimizerProblem.global_problem(HERMITE, n, math.inf))
    k = np.arange(1, n)
    assert np.allclose(sol.b, np.sqrt(1 - k / n), atol=1e-12)
    assert np.allclose(sol.a, 0, atol=1e-12)


def test_quartic_profile_envelope():
    """Entries track the local curve with error O(max(k, log^2 n)/n) away from the top."""
    from edgelab.local_equilibrium import local_curve

    n = 400
    sol = minimize_H(MinimizerProblem.global_problem(QUARTIC, n, math.inf))
    ks = np.arange(20, n // 2)
    local = local_curve(QUARTIC, ks / n)
    err = np.abs(sol.b[ks - 1] - np.array([m.b for m in local]))
    envelope = np.maximum(ks, math.log(n) ** 2) / n
    c = float(np.max(err / envelope))
    assert c < 0.05


def grid_argmin(f, lo, hi, rounds=12, pts=21):
    lo, hi = np.array(lo, float), np.array(hi, float)
    best = None
    for _ in range(rounds):
        axes = [np.linspace(l, h, pts) for l, h in zip(lo, hi)]
        G = np.array(list(itertools.product(*axes)))
        vals = np.array([f(p) for p in G])
        best = G[np.argmin(vals)]
        span = (hi - lo) / (pts - 1) * 2
        lo, hi = best - span, best + span
    return best


def test_two_by_two_against_grid_search():
    V = QUARTIC
    alpha = hamiltonian_alphas(2, 2.0)
    sol = minimize_H(MinimizerProblem.global_problem(V, 2, 2.0))

    def f(p):
        a1, a2, b = p
        if b <= 0:
            return np.inf
        return hamiltonian(V, np.array([a1, a2]), np.array([b]), alpha)

    best = grid_argmin(f, [-1, -1, 0.05], [1, 1, 1.5])
    assert np.allclose([sol.a[0], sol.a[1], sol.b[0]], best, atol=1e-6)


def test_uniqueness_from_random_starts(rng):
    n = 40
    alpha = hamiltonian_alphas(n, 2.0)
    sols = []
    for _ in range(2):
        p = MinimizerProblem(SEXTIC, rng.normal(size=n), rng.uniform(0.2, 2, n - 1), alpha, np.ones(n, bool), np.ones(n - 1, bool), 2.0)
        sols.append(minimize_H(p))
    assert np.allclose(sols[0].a, sols[1].a, atol=1e-9)
    assert np.allclose(sols[0].b, sols[1].b, atol=1e-9)


def test_rejections():
    with pytest.raises(NonConvexError):
        MinimizerProblem.global_problem(Potential((0, 0, 0, 0, 1)), 10)
    with pytest.raises(NonConvexError):
        MinimizerProblem.global_problem(HERMITE, 10, 0.5)
    with pytest.raises(ValueError):
        MinimizerProblem(HERMITE, np.zeros(3), np.ones(2), [0.5, 1.5], np.ones(3, bool), np.ones(2, bool))


def test_zero_alpha_pinned():
    p = MinimizerProblem.global_problem(QUARTIC, 6, 1.0)
    assert p.alpha[-1] == 0 and p.b[-1] == 0 and not p.free_b[-1]
    sol = minimize_H(p)
    assert sol.b[-1] == 0


def test_conditional_empty_free_set():
    n = 10
    a, b = np.linspace(-1, 1, n), np.linspace(0.5, 1, n - 1)
    p = MinimizerProblem(QUARTIC, a, b, np.ones(n - 1), np.zeros(n, bool), np.zeros(n - 1, bool))
    sol = conditional_minimize(p)
    assert np.array_equal(sol.a, a) and np.array_equal(sol.b, b)


def test_conditional_full_equals_global():
    g = MinimizerProblem.global_problem(SEXTIC, 50, 2.0)
    s1 = minimize_H(g)
    s2 = conditional_minimize(g)
    assert np.allclose(s1.a, s2.a) and np.allclose(s1.b, s2.b)


def test_locality():
    V = SEXTIC
    sc = scaling_constants(V)
    p = window_problem(V, 40, (sc.a0, sc.b0), (sc.a0, sc.b0), pad=12)
    base = conditional_minimize(p, tol=1e-13)
    # the outermost fixed site is more than deg/2 away from the free window
    p.a[0] += 0.3
    p.b[0] += 0.2
    moved = conditional_minimize(p, tol=1e-13)
    assert np.max(np.abs(base.a[1:] - moved.a[1:])) == 0.0
    assert np.max(np.abs(base.b[1:] - moved.b[1:])) == 0.0


def test_boundary_decay_quartic():
    fit = boundary_decay_rate(QUARTIC, 80, 0.1)
    assert not fit.saturated and fit.slope < -0.05
    fit2 = boundary_decay_rate(QUARTIC, 80, 0.05)
    assert fit2.slope == pytest.approx(fit.slope, rel=0.2)


def test_boundary_decay_hermite_is_exact():
    # tr(T^2)/4 separates into single-coordinate terms, so the window ignores its boundary
    fit = boundary_decay_rate(HERMITE, 80, 0.1)
    assert fit.saturated and fit.slope == -math.inf
    assert np.all(fit.differences <= 1e-14)


def test_boundary_decay_zero_perturbation():
    fit = boundary_decay_rate(QUARTIC, 40, 0.0)
    assert fit.saturated and np.all(fit.differences == 0)


def test_boundary_decay_requires_long_window():
    with pytest.raises(ValueError):
        boundary_decay_rate(QUARTIC, 20)


def test_approx_J_hermite():
    J = approx_J(HERMITE, 40)
    assert np.allclose(J.diag, 0, atol=1e-12)
    assert abs(J.offdiag[20] - 1) < 1e-4


@pytest.mark.parametrize("V", [QUARTIC, SEXTIC])
def test_approx_J_stable_and_exponential(V):
    m = 24
    J1, J2 = approx_J(V, m), approx_J(V, m, 8 * m)
    assert np.allclose(J1.diag, J2.diag, atol=1e-10)
    assert np.allclose(J1.offdiag, J2.offdiag, atol=1e-10)
    sc = scaling_constants(V)
    dev = np.abs(J1.diag[:-1] - sc.a0) + np.abs(J1.offdiag - sc.b0)
    k = np.arange(1, m)
    use = dev > 1e-13
    slope = np.polyfit(k[use], np.log(dev[use]), 1)[0]
    assert slope < -0.1


def test_approx_J_even_potential_zero_diagonal():
    J = approx_J(QUARTIC, 16)
    assert np.allclose(J.diag, 0, atol=1e-12)


def test_approx_J_validation():
    with pytest.raises(ValueError):
        approx_J(HERMITE, 4)
    with pytest.raises(ValueError):
        approx_J(HERMITE, 16, 40)


def test_quadrature_bound_hermite():
    checks = [quadrature_bound_check(HERMITE, m) for m in (32, 64, 128)]
    slack = fit_quadrature_slack(checks)
    for c in checks:
        assert c.lambda_max <= c.bound + max(slack, 0) / c.m**3 + 1e-14
        assert c.normalized_gap >= 5.0
        # stronger than the free-Laplacian corner bound 2 - (pi/(2m))^2
        assert c.lambda_max < 2 - (math.pi / (2 * c.m)) ** 2
    m = 64
    assert checks[1].bound == pytest.approx(2 - (J00 / m) ** 2)
    gaps = [c.normalized_gap for c in checks]
    assert gaps == sorted(gaps) and gaps[-1] >= J00**2


def test_corner_matrix_exceeds_bessel_bound():
    """D_m + e_mm has lambda_max = 2 cos(pi/(2m + 1)) ~ 2 - pi^2/(4 m^2), above 2 - (j00/m)^2."""
    for m in (32, 64, 128):
        D = TridiagonalSym(np.zeros(m), np.ones(m - 1)).with_corner(last=1.0)
        lam = eigen_max(D)
        assert lam == pytest.approx(2 * math.cos(math.pi / (2 * m + 1)), abs=1e-13)
        assert lam > 2 - (J00 / m) ** 2


def test_interlacing_consistency():
    sol = minimize_H(MinimizerProblem.global_problem(QUARTIC, 300, math.inf))
    lams = [eigen_max(sol.T.minor(0, m)) for m in (10, 20, 40, 80, 160, 300)]
    assert np.all(np.diff(lams) >= -1e-14)
    assert lams[1] > lams[0]
    edge = scaling_constants(QUARTIC).edge
    gaps = [edge - eigen_max(minimize_H(MinimizerProblem.global_problem(QUARTIC, n, math.inf)).T) for n in (100, 300, 900)]
    assert all(g > 0 for g in gaps) and gaps[0] > gaps[1] > gaps[2]


@pytest.mark.parametrize("V", [HERMITE, QUARTIC])
def test_fekete(V):
    T = minimize_H(MinimizerProblem.global_problem(V, 60, math.inf)).T
    fk = fekete_stationarity(T, V)
    assert fk.residual <= 1e-6
    assert fk.weight_deviation <= 1e-8
    assert not fk.ill_conditioned


def test_fekete_two_points():
    # n V'(l) = 1/(l - (-l)) with V' = s/2 gives l^2 = 1/2
    T = minimize_H(MinimizerProblem.global_problem(HERMITE, 2, math.inf)).T
    assert eigvalsh(T) == pytest.approx([-math.sqrt(0.5), math.sqrt(0.5)], abs=1e-12)
    assert T.offdiag[0] == pytest.approx(math.sqrt(0.5))


def test_fekete_negative_control(rng):
    fk = fekete_stationarity(random_jacobi(rng, 30), HERMITE)
    assert fk.residual > 1e-2 and fk.weight_deviation > 1e-3


def test_truncation_margin_deterministic():
    # for the minimizer itself the bound holds comfortably
    n, m = 2000, 60
    T = minimize_H(MinimizerProblem.global_problem(HERMITE, n, math.inf)).T
    assert truncation_margin(T, m, HERMITE) >= -1e-8


def test_solution_csv_roundtrip():
    from edgelab.tridiag import parse_csv, to_csv

    T = minimize_H(MinimizerProblem.global_problem(QUARTIC, 20, 2.0)).T
    assert parse_csv(to_csv(T)) == T
