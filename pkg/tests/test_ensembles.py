import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, strategies as st

from conftest import HERMITE, QUARTIC, SEXTIC
from edgelab.ensembles import (
    ConfigurationError,
    MCMCConfig,
    ModelSpec,
    dense_gaussian_edge,
    dense_gaussian_oracle,
    dirichlet_weight_variance,
    effective_sample_size,
    grad_log_density,
    hermite_de_log_pdf,
    log_density,
    log_density_batch,
    log_density_checked,
    mcmc_chain,
    read_checkpoint,
    rng_stream,
    run_replicas,
    sample_dirichlet_weights,
    sample_hermite_de,
    sample_hermite_entries,
    write_checkpoint,
)
from edgelab.potential import Potential
from edgelab.tridiag import TridiagonalSym, eigen_max, eigvalsh, spectral_measure


def _fd_gradient(spec, a, b, h=1e-6):
    ga, gb = np.zeros_like(a), np.zeros_like(b)
    for vec, out in ((a, ga), (b, gb)):
        for i in range(vec.size):
            old = vec[i]
            vec[i] = old + h
            up = log_density(spec, (a, b))
            vec[i] = old - h
            dn = log_density(spec, (a, b))
            vec[i] = old
            out[i] = (up - dn) / (2 * h)
    return ga, gb


@pytest.mark.parametrize("V", [HERMITE, QUARTIC, SEXTIC])
@pytest.mark.parametrize("beta", [1.0, 2.0, 4.0])
def test_gradient_matches_finite_differences(V, beta, rng):
    spec = ModelSpec(V, beta, 12)
    for _ in range(5):
        a = rng.normal(0, 0.5, 12)
        b = rng.uniform(0.2, 1.0, 11)
        ga, gb = grad_log_density(spec, (a, b))
        fa, fb = _fd_gradient(spec, a.copy(), b.copy())
        g = np.concatenate([ga, gb])
        f = np.concatenate([fa, fb])
        assert np.max(np.abs(g - f)) <= 1e-6 * max(1.0, np.max(np.abs(g)))


def test_invalid_offdiagonal(rng):
    spec = ModelSpec(QUARTIC, 2.0, 6)
    a = rng.normal(size=6)
    b = np.array([0.5, 0.4, 0.0, 0.3, 0.2])
    val, valid = log_density_checked(spec, (a, b))
    assert val == -math.inf and not valid
    with pytest.raises(ValueError):
        grad_log_density(spec, (a, b))


@given(st.integers(2, 9), st.sampled_from([1.0, 2.0, 4.0, math.inf]), st.integers(0, 2**32 - 1))
def test_batch_density_matches_single(n, beta, seed):
    rng = np.random.default_rng(seed)
    spec = ModelSpec(QUARTIC, beta, n)
    a = rng.normal(size=(4, n))
    b = rng.uniform(0.1, 1.5, size=(4, n - 1))
    vals, valid, ga, gb = log_density_batch(spec, a, b, with_grad=True)
    assert valid.all()
    for i in range(4):
        assert vals[i] == pytest.approx(log_density(spec, (a[i], b[i])), rel=1e-12, abs=1e-12)
        g1 = grad_log_density(spec, (a[i], b[i]))
        assert np.allclose(ga[i], g1[0]) and np.allclose(gb[i], g1[1])


def test_de_log_pdf_is_log_density_plus_constant(rng):
    """The DE product law and exp(-n beta H) agree up to normalization."""
    for beta in (1.0, 2.0, 4.0):
        spec = ModelSpec(HERMITE, beta, 15)
        diffs = []
        for _ in range(6):
            T = sample_hermite_de(15, beta, rng)
            diffs.append(hermite_de_log_pdf(15, beta, T.diag, T.offdiag) - log_density(spec, T))
        assert np.ptp(diffs) < 1e-10


def test_de_entry_moments(rng):
    n, beta, S = 40, 2.0, 20000
    a, b = sample_hermite_entries(n, beta, rng, size=S)
    assert a.shape == (S, n) and b.shape == (S, n - 1)
    var_a = a.var(axis=0)
    assert np.allclose(var_a, 2 / (n * beta), rtol=0.06)
    k = np.arange(1, n)
    # E b_k^2 = (n - k) beta / (n beta)
    assert np.allclose((b**2).mean(axis=0), (n - k) / n, rtol=0.03)


def test_de_prefix_matches_full_law(rng):
    a, b = sample_hermite_entries(1000, 2.0, rng, size=3000, count=5)
    assert a.shape == (3000, 5) and b.shape == (3000, 4)
    assert np.allclose((b**2).mean(axis=0), (1000 - np.arange(1, 5)) / 1000, rtol=0.02)
    with pytest.raises(ValueError):
        sample_hermite_entries(10, 2.0, rng, count=11)


def test_de_edge_near_two(rng):
    # E lambda_max ~ 2 + E[TW_2] n^{-2/3} with E[TW_2] ~ -1.771
    lam = [eigen_max(sample_hermite_de(400, 2.0, rng)) for _ in range(200)]
    assert np.mean(lam) == pytest.approx(2 - 1.771 * 400 ** (-2 / 3), abs=0.004)


@pytest.mark.parametrize("beta", [1.0, 2.0, 4.0])
def test_dirichlet_weight_variance(beta, rng):
    n = 8
    q = sample_dirichlet_weights(n, beta, rng, size=40000)
    assert np.allclose(q.sum(axis=1), 1.0)
    assert q.var(axis=0).mean() == pytest.approx(dirichlet_weight_variance(n, beta), rel=0.04)


def test_dirichlet_weights_match_de_spectral_measure(rng):
    """Spectral weights of DE matrices have the Dirichlet(beta/2) variance."""
    n, beta = 6, 2.0
    w = np.array([spectral_measure(sample_hermite_de(n, beta, rng)).weights for _ in range(6000)])
    assert w.var(axis=0).mean() == pytest.approx(dirichlet_weight_variance(n, beta), rel=0.08)


@pytest.mark.parametrize("beta", [1, 2])
def test_dense_oracle_preserves_spectrum_and_first_weights(beta, rng):
    T, H = dense_gaussian_oracle(20, beta, rng, return_dense=True)
    assert np.all(T.offdiag > 0)
    lam_H, U = np.linalg.eigh(H)
    assert np.allclose(eigvalsh(T), lam_H, atol=1e-10)
    mu = spectral_measure(T)
    assert np.allclose(mu.lambdas, lam_H, atol=1e-10)
    assert np.allclose(mu.weights, np.abs(U[0]) ** 2, atol=1e-10)


def test_dense_oracle_rejects_large_n(rng):
    with pytest.raises(ValueError):
        dense_gaussian_oracle(100, 2, rng)
    with pytest.raises(ValueError):
        dense_gaussian_oracle(10, 4, rng)


def test_dense_edge_matches_tridiagonal_model():
    """GUE and the DE beta = 2 model share the eigenvalue law."""
    dense = dense_gaussian_edge(30, 2, rng_stream(3, 0), 1500)
    tri = np.array([eigen_max(sample_hermite_de(30, 2.0, rng_stream(4, i))) for i in range(1500)])
    assert scipy.stats.ks_2samp(dense, tri).pvalue > 0.001


def test_dense_edge_large_n_uses_sparse_solver():
    lam = dense_gaussian_edge(120, 1, rng_stream(5, 0), 3)
    ref = dense_gaussian_edge(120, 1, rng_stream(5, 0), 3)
    assert np.array_equal(lam, ref)
    assert np.all(np.abs(lam - 2.0) < 0.3)


def test_streams_are_reproducible_and_distinct():
    x = rng_stream(11, 0).standard_normal(5)
    assert np.array_equal(x, rng_stream(11, 0).standard_normal(5))
    assert not np.array_equal(x, rng_stream(11, 1).standard_normal(5))
    assert not np.array_equal(x, rng_stream(12, 0).standard_normal(5))


def test_ess_iid_and_ar1(rng):
    N = 20000
    x = rng.normal(size=N)
    assert effective_sample_size(x) == pytest.approx(N, rel=0.1)
    rho = 0.8
    y = np.empty(N)
    y[0] = 0
    e = rng.normal(size=N)
    for i in range(1, N):
        y[i] = rho * y[i - 1] + e[i]
    expected = N * (1 - rho) / (1 + rho)
    assert effective_sample_size(y) == pytest.approx(expected, rel=0.25)


def test_mcmc_configuration_errors():
    with pytest.raises(ConfigurationError):
        MCMCConfig(step_size=0)
    with pytest.raises(ConfigurationError):
        run_replicas(ModelSpec(QUARTIC, 0.5, 10), MCMCConfig(burn_in=1, steps=1), 1)
    with pytest.raises(ConfigurationError):
        run_replicas(ModelSpec(Potential((0, 0, -1, 0, 1)), 2.0, 10), MCMCConfig(burn_in=1, steps=1), 1)


def test_mala_targets_hermite_law():
    """MALA on V = s^2/4 reproduces the exact DE law of lambda_max."""
    n, beta = 10, 2.0
    spec = ModelSpec(HERMITE, beta, n)
    run = run_replicas(spec, MCMCConfig(burn_in=400, steps=200, thin=50, seed=1), 400)
    assert 0.4 < run.acceptance.mean() < 0.8
    exact = np.array([eigen_max(sample_hermite_de(n, beta, rng_stream(2, i))) for i in range(4000)])
    assert scipy.stats.ks_2samp(run.lam_max, exact).pvalue > 0.001
    # entrywise check: E b_k^2 = (n - k)/n
    k = np.arange(1, n)
    assert np.allclose((run.b**2).mean(axis=0), (n - k) / n, atol=0.06)


def test_mala_is_deterministic():
    spec = ModelSpec(QUARTIC, 2.0, 16)
    cfg = MCMCConfig(burn_in=50, steps=40, thin=10, seed=9)
    r1 = run_replicas(spec, cfg, 3)
    r2 = run_replicas(spec, cfg, 3)
    assert np.array_equal(r1.a, r2.a) and np.array_equal(r1.lam_trace, r2.lam_trace)
    assert r1.lam_trace.shape == (3, 4)
    # replica r of a batch equals the single chain on stream r
    states = list(mcmc_chain(spec, cfg, replica=2))
    assert np.array_equal(states[-1].T.diag, r1.a[2])


def test_mala_adapts_step_to_target_acceptance():
    spec = ModelSpec(QUARTIC, 2.0, 60)
    run = run_replicas(spec, MCMCConfig(step_size=5.0, burn_in=1500, steps=1000, thin=10, seed=3), 4)
    assert np.all(np.abs(run.acceptance - 0.574) < 0.1)


def test_mala_starts_inside_support_at_beta_one():
    spec = ModelSpec(SEXTIC, 1.0, 7)
    run = run_replicas(spec, MCMCConfig(burn_in=200, steps=200, thin=10, seed=5), 4)
    assert np.all(run.b > 0)
    assert np.all(run.acceptance > 0.3)


def test_checkpoint_roundtrip(tmp_path):
    spec = ModelSpec(SEXTIC, 1.0, 7)
    states = list(mcmc_chain(spec, MCMCConfig(burn_in=20, steps=30, thin=10, seed=4)))
    path = tmp_path / "chain.csv"
    write_checkpoint(path, states)
    back = read_checkpoint(path)
    assert [it for it, _, _ in back] == [s.iteration for s in states]
    for (it, ld, T), s in zip(back, states):
        assert ld == s.log_density
        assert np.array_equal(T.diag, s.T.diag) and np.array_equal(T.offdiag, s.T.offdiag)
