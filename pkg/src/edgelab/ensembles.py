"""Samplers for the tridiagonal beta ensembles.

The law of interest has density proportional to

    exp(-n beta [tr V(T) - sum_k (1 - k/n - 1/(n beta)) log b_k])

over diagonals a and positive off-diagonals b. For V = s^2/4 this is the
tridiagonal Hermite (DE) model and can be sampled exactly; for other uniformly
convex V we run Metropolis-adjusted Langevin chains.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from . import banded
from .minimizers import MinimizerProblem, hamiltonian_alphas, hessian_entries, minimize_H
from .potential import Potential
from .tridiag import TridiagonalSym, eigen_max

HERMITE = Potential((0.0, 0.0, 0.25))
TARGET_ACCEPTANCE = 0.574


class ConfigurationError(ValueError):
    pass


def rng_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent Philox stream for replica ``index`` under master ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


@dataclass(frozen=True)
class ModelSpec:
    V: Potential
    beta: float
    n: int

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.n < 2:
            raise ValueError("n must be at least 2")

    @property
    def alphas(self) -> np.ndarray:
        return hamiltonian_alphas(self.n, self.beta)

    @property
    def is_hermite(self) -> bool:
        return self.V.coeffs == HERMITE.coeffs


# ---------------------------------------------------------------------------
# exact samplers


def _chi(rng: np.random.Generator, dof, size=None):
    return np.sqrt(rng.chisquare(dof, size=size))


def sample_hermite_de(n: int, beta: float, rng: np.random.Generator) -> TridiagonalSym:
    """One draw of the tridiagonal Hermite (DE) matrix for V = s^2/4."""
    a, b = sample_hermite_entries(n, beta, rng)
    return TridiagonalSym(a, b)


def sample_hermite_entries(n: int, beta: float, rng: np.random.Generator, size: int | None = None, count: int | None = None):
    """Leading ``count`` diagonal and off-diagonal entries of DE matrices.

    The entries are independent, so a prefix can be drawn without the rest of
    the matrix. Returns arrays of shape (size, count) and (size, count - 1), or
    1-d arrays when ``size`` is None. ``count`` defaults to n.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    count = n if count is None else count
    if not 1 <= count <= n:
        raise ValueError("count must lie in [1, n]")
    shape = (count,) if size is None else (size, count)
    scale = 1.0 / math.sqrt(n * beta)
    a = rng.normal(0.0, math.sqrt(2.0), size=shape) * scale
    k = np.arange(1, count)
    bshape = (count - 1,) if size is None else (size, count - 1)
    b = _chi(rng, np.broadcast_to((n - k) * beta, bshape)) * scale
    return a, b


def hermite_de_log_pdf(n: int, beta: float, a, b) -> float:
    """Log density of the DE entries (normalized), the product of Gaussian and chi laws."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    s = math.sqrt(n * beta)
    var = 2.0 / (n * beta)
    out = float(np.sum(-0.5 * a**2 / var - 0.5 * math.log(2 * math.pi * var)))
    nu = (n - np.arange(1, n)) * beta
    x = b * s
    # chi_nu density: x^{nu-1} e^{-x^2/2} / (2^{nu/2-1} Gamma(nu/2)), times the Jacobian s
    logchi = (nu - 1) * np.log(x) - 0.5 * x**2 - (nu / 2 - 1) * math.log(2) - np.array([math.lgamma(v / 2) for v in nu])
    return out + float(np.sum(logchi)) + (n - 1) * math.log(s)


def sample_dirichlet_weights(n: int, beta: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Dirichlet(beta/2, ..., beta/2) weights as normalized Gamma(beta/2) draws."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    shape = (n,) if size is None else (size, n)
    g = rng.gamma(beta / 2.0, 1.0, size=shape)
    return g / g.sum(axis=-1, keepdims=True)


def dirichlet_weight_variance(n: int, beta: float) -> float:
    """Var q_i^2 for symmetric Dirichlet(beta/2) weights."""
    a0 = n * beta / 2.0
    return (1.0 / n) * (1.0 - 1.0 / n) / (a0 + 1.0)


def _dense_gaussian(n: int, beta: int, rng: np.random.Generator) -> np.ndarray:
    """GOE/GUE with eigenvalue density proportional to exp(-n beta sum lambda^2/4) |Delta|^beta."""
    if beta == 1:
        X = rng.normal(size=(n, n))
        return (X + X.T) / math.sqrt(2.0 * n)
    if beta == 2:
        X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        return (X + X.conj().T) / (2.0 * math.sqrt(n))
    raise ValueError(f"dense oracle supports beta in {{1, 2}}, got {beta}")


def dense_gaussian_oracle(n: int, beta: int, rng: np.random.Generator, return_dense: bool = False):
    """Householder tridiagonalization of a dense GOE (beta=1) or GUE (beta=2) matrix.

    Householder reflections fix e_1, so the spectral measure at e_1 survives;
    the complex phases of the GUE off-diagonal are removed by a diagonal
    unitary similarity.
    """
    if not 2 <= n <= 64:
        raise ValueError("dense oracle is meant for 2 <= n <= 64")
    H = _dense_gaussian(n, beta, rng)
    Hk = scipy.linalg.hessenberg(H)
    T = TridiagonalSym(np.real(np.diag(Hk)), np.abs(np.diag(Hk, -1)))
    return (T, H) if return_dense else T


def dense_gaussian_edge(n: int, beta: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Largest eigenvalues of ``size`` dense GOE/GUE matrices of any size n."""
    out = np.empty(size)
    for i in range(size):
        H = _dense_gaussian(n, beta, rng)
        if n <= 64:
            out[i] = np.linalg.eigvalsh(H)[-1]
        else:
            out[i] = scipy.sparse.linalg.eigsh(H, k=1, which="LA", tol=1e-10, return_eigenvectors=False, v0=np.ones(n))[0]
    return out


# ---------------------------------------------------------------------------
# target density


def _ab(T):
    if isinstance(T, TridiagonalSym):
        return np.asarray(T.diag), np.asarray(T.offdiag)
    a, b = T
    return np.asarray(a, float), np.asarray(b, float)


def log_density_batch(spec: ModelSpec, a, b, with_grad: bool = False):
    """Unnormalized log density for a batch of matrices (rows of ``a`` and ``b``).

    Returns (values, valid) or (values, valid, grad_a, grad_b). Rows with a
    nonpositive off-diagonal entry get value -inf and valid = False.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    nb = spec.n * spec.beta
    alpha = spec.alphas
    tr, dd, do = banded.trace_and_dpoly(spec.V.coeffs, a, b)
    valid = np.all(b > 0, axis=-1)
    safe_b = np.where(b > 0, b, 1.0)
    logterm = np.sum(alpha * np.log(safe_b), axis=-1)
    val = np.where(valid, -nb * (tr - logterm), -np.inf)
    if not with_grad:
        return val, valid
    ga = -nb * dd
    gb = -nb * (2.0 * do - alpha / safe_b)
    return val, valid, ga, gb


def log_density(spec: ModelSpec, T) -> float:
    """-n beta [tr V(T) - sum alpha_k log b_k]; -inf when some b_k <= 0."""
    val, _ = log_density_batch(spec, *_ab(T))
    return float(val)


def log_density_checked(spec: ModelSpec, T) -> tuple[float, bool]:
    """Log density together with the validity flag."""
    val, valid = log_density_batch(spec, *_ab(T))
    return float(val), bool(valid)


def grad_log_density(spec: ModelSpec, T):
    """(d/da, d/db) of the log density; d tr V(T) = tr(V'(T) dT)."""
    a, b = _ab(T)
    if np.any(b <= 0):
        raise ValueError("gradient needs positive off-diagonal entries")
    _, _, ga, gb = log_density_batch(spec, a, b, with_grad=True)
    return ga, gb


# ---------------------------------------------------------------------------
# MALA


@dataclass
class MCMCConfig:
    """Settings for preconditioned MALA chains.

    ``step_size`` is the initial scale; during ``burn_in`` it is adapted per
    replica toward acceptance 0.574 and then frozen.
    """

    step_size: float = 1.0
    burn_in: int = 2000
    steps: int = 4000
    thin: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0 or self.burn_in < 0 or self.steps < 1 or self.thin < 1:
            raise ConfigurationError("MCMC settings must be positive")


@dataclass
class ChainState:
    T: TridiagonalSym
    log_density: float
    acceptance_rate: float
    step_size: float
    iteration: int


@dataclass
class ReplicaRun:
    """Final states and traces from independent replicas."""

    a: np.ndarray  # (R, n) final diagonals
    b: np.ndarray  # (R, n - 1) final off-diagonals
    lam_trace: np.ndarray  # (R, K) lambda_max after burn-in, every ``thin`` steps
    acceptance: np.ndarray  # (R,) acceptance after burn-in
    step_size: np.ndarray  # (R,)
    ess: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.ess is None:
            self.ess = np.array([effective_sample_size(x) for x in self.lam_trace])

    @property
    def lam_max(self) -> np.ndarray:
        return self.lam_trace[:, -1]


def _check_mcmc_spec(spec: ModelSpec):
    if spec.beta < 1:
        raise ConfigurationError("general-V sampling needs beta >= 1")
    if spec.V.convexity <= 0:
        raise ConfigurationError("general-V sampling needs uniformly convex V")


def _start_and_scale(spec: ModelSpec):
    """Global minimizer of H and per-coordinate proposal variances 1 / diag(-Hess log pi)."""
    sol = minimize_H(MinimizerProblem.global_problem(spec.V, spec.n, spec.beta))
    rows, cols, vals = hessian_entries(spec.V, sol.a, sol.b, spec.alphas)
    diag = np.zeros(2 * spec.n - 1)
    on = rows == cols
    np.add.at(diag, rows[on], vals[on])
    diag *= spec.n * spec.beta
    ma, mb = 1.0 / diag[0::2], 1.0 / diag[1::2]
    # at beta = 1 the last log coefficient vanishes and the minimizer sits at
    # b = 0, outside the support; start one proposal scale inside
    b0 = np.where(sol.b > 0, sol.b, np.sqrt(mb))
    return sol.a, b0, ma, mb


def _log_q(y, x_mean, sd, reflect):
    """Log proposal density of y given mean and scale; folded for reflected coordinates."""
    z = (y - x_mean) / sd
    lq = -0.5 * z**2
    if reflect:
        z2 = (y + x_mean) / sd
        lq = np.logaddexp(lq, -0.5 * z2**2)
    return np.sum(lq - np.log(sd), axis=-1)


class MALABatch:
    """Independent MALA chains advanced together; each replica has its own stream."""

    def __init__(self, spec: ModelSpec, config: MCMCConfig, replicas: int, first_index: int = 0):
        _check_mcmc_spec(spec)
        self.spec = spec
        self.config = config
        a0, b0, self.ma, self.mb = _start_and_scale(spec)
        R = replicas
        self.rngs = [rng_stream(config.seed, first_index + r) for r in range(R)]
        self.a = np.tile(a0, (R, 1))
        self.b = np.tile(b0, (R, 1))
        self.eps = np.full(R, config.step_size * (2 * spec.n - 1) ** (-1.0 / 6.0))
        self.val, _, self.ga, self.gb = log_density_batch(spec, self.a, self.b, with_grad=True)
        self.iteration = 0
        self.accepted = np.zeros(R)
        self.proposed = 0

    def _noise(self):
        n = self.spec.n
        xi = np.stack([g.standard_normal(2 * n - 1) for g in self.rngs])
        u = np.array([g.random() for g in self.rngs])
        return xi[:, :n], xi[:, n:], u

    def step(self, adapt: bool = False):
        e = self.eps[:, None]
        sa, sb = e * np.sqrt(self.ma), e * np.sqrt(self.mb)
        mu_a = self.a + 0.5 * e**2 * self.ma * self.ga
        mu_b = self.b + 0.5 * e**2 * self.mb * self.gb
        xa, xb, u = self._noise()
        pa = mu_a + sa * xa
        pb = np.abs(mu_b + sb * xb)
        pval, pvalid, pga, pgb = log_density_batch(self.spec, pa, pb, with_grad=True)
        rmu_a = pa + 0.5 * e**2 * self.ma * pga
        rmu_b = pb + 0.5 * e**2 * self.mb * pgb
        with np.errstate(invalid="ignore"):
            log_fwd = _log_q(pa, mu_a, sa, False) + _log_q(pb, mu_b, sb, True)
            log_bwd = _log_q(self.a, rmu_a, sa, False) + _log_q(self.b, rmu_b, sb, True)
            log_r = pval - self.val + log_bwd - log_fwd
        log_r = np.where(pvalid & np.isfinite(log_r), log_r, -np.inf)
        acc = np.log(u) < log_r
        self.a[acc], self.b[acc] = pa[acc], pb[acc]
        self.val[acc] = pval[acc]
        self.ga[acc], self.gb[acc] = pga[acc], pgb[acc]
        self.iteration += 1
        if adapt:
            prob = np.exp(np.minimum(log_r, 0.0))
            gain = (self.iteration + 10.0) ** -0.6
            self.eps *= np.exp(gain * (prob - TARGET_ACCEPTANCE))
        else:
            self.accepted += acc
            self.proposed += 1
        return acc

    def burn_in(self):
        for _ in range(self.config.burn_in):
            self.step(adapt=True)

    @property
    def acceptance(self) -> np.ndarray:
        return self.accepted / max(self.proposed, 1)

    def lam_max(self) -> np.ndarray:
        return np.array([eigen_max(TridiagonalSym(a, b)) for a, b in zip(self.a, self.b)])


def run_replicas(spec: ModelSpec, config: MCMCConfig, replicas: int, min_acceptance: float = 0.05) -> ReplicaRun:
    """Burn in and run ``replicas`` chains; record lambda_max every ``thin`` steps."""
    chain = MALABatch(spec, config, replicas)
    chain.burn_in()
    trace = []
    for it in range(1, config.steps + 1):
        chain.step()
        if it % config.thin == 0:
            trace.append(chain.lam_max())
    acc = chain.acceptance
    if np.any(acc < min_acceptance):
        raise ConfigurationError(f"acceptance {acc.min():.3f} below {min_acceptance} after tuning")
    return ReplicaRun(chain.a.copy(), chain.b.copy(), np.array(trace).T, acc, chain.eps.copy())


def mcmc_chain(spec: ModelSpec, config: MCMCConfig, replica: int = 0) -> Iterator[ChainState]:
    """Single chain (stream ``replica`` of ``config.seed``), one state every ``thin`` steps."""
    chain = MALABatch(spec, config, 1, first_index=replica)
    chain.burn_in()
    for it in range(1, config.steps + 1):
        chain.step()
        if it % config.thin == 0:
            yield ChainState(
                TridiagonalSym(chain.a[0], chain.b[0]),
                float(chain.val[0]),
                float(chain.acceptance[0]),
                float(chain.eps[0]),
                it,
            )
    if chain.acceptance[0] < 0.05:
        raise ConfigurationError(f"acceptance {chain.acceptance[0]:.3f} below 0.05 after tuning")


def effective_sample_size(x, window_c: float = 5.0) -> float:
    """N / tau_int with the self-consistent window M >= c tau_int."""
    x = np.asarray(x, float)
    N = x.size
    if N < 4:
        return float(N)
    x = x - x.mean()
    var = float(x @ x) / N
    if var == 0:
        return float(N)
    f = np.fft.rfft(x, 2 * N)
    acf = np.fft.irfft(f * np.conj(f))[:N] / (N * var)
    tau = 1.0
    for M in range(1, N):
        tau += 2.0 * acf[M]
        if M >= window_c * tau:
            break
    return float(N / max(tau, 1e-12))


def write_checkpoint(path, states: list[ChainState]) -> None:
    """CSV rows: iteration, log_density, a_0..a_{n-1}, b_0..b_{n-2}."""
    n = states[0].T.n
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "log_density"] + [f"a{i}" for i in range(n)] + [f"b{i}" for i in range(n - 1)])
        for s in states:
            w.writerow([s.iteration, repr(s.log_density)] + [repr(float(v)) for v in s.T.diag] + [repr(float(v)) for v in s.T.offdiag])


def read_checkpoint(path) -> list[tuple[int, float, TridiagonalSym]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        n = sum(1 for h in header if h.startswith("a"))
        out = []
        for row in r:
            vals = [float(v) for v in row[2:]]
            out.append((int(row[0]), float(row[1]), TridiagonalSym(vals[:n], vals[n:])))
    return out
