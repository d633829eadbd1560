"""Finite-difference stochastic Airy operators and Tracy-Widom reference samples.

The operator -d^2/dx^2 + x^{1/(2k+1)} + (2/sqrt(beta)) x^{-k/(2k+1)} W'(x) on
[0, L] with Dirichlet walls is discretized on x_j = j h. White noise is
averaged over each grid cell, so the diagonal noise at x_j has variance
(4/beta) w_j / h with w_j the cell average of t^{-2k/(2k+1)} (w_j = 1 when
k = 0). k = 0 is the Airy operator; k >= 1 is the conjectured nonregular
family.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.integrate
import scipy.optimize
import scipy.special

from .ensembles import rng_stream
from .tridiag import TridiagonalSym, eigen_smallest, eigvals_index


@dataclass(frozen=True)
class SAOConfig:
    beta: float = 2.0
    k: int = 0
    h: float = 0.05
    L: float | None = None
    seed: int = 0
    num_eigs: int = 1

    def __post_init__(self):
        if self.k < 0 or int(self.k) != self.k:
            raise ValueError("k must be a nonnegative integer")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.L is None:
            object.__setattr__(self, "L", 12.0 if self.k == 0 else 20.0)
        if not self.L > 0:
            raise ValueError("L must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive (inf for no noise)")
        ratio = self.L / self.h
        if abs(ratio - round(ratio)) > 1e-8 * ratio or round(ratio) < 10:
            raise ValueError(f"L/h must be an integer >= 10, got {ratio}")
        if not 1 <= self.num_eigs <= round(ratio):
            raise ValueError("num_eigs out of range")

    @property
    def size(self) -> int:
        return int(round(self.L / self.h))

    def grid(self) -> np.ndarray:
        return self.h * np.arange(1, self.size + 1)


def cell_weights(config: SAOConfig) -> np.ndarray:
    """w_j = h^{-1} int_{x_{j-1}}^{x_j} t^{-2k/(2k+1)} dt, in closed form."""
    if config.k == 0:
        return np.ones(config.size)
    p = 1.0 / (2 * config.k + 1)
    x = config.h * np.arange(0, config.size + 1)
    return (2 * config.k + 1) * np.diff(x**p) / config.h


def noise_sd(config: SAOConfig) -> np.ndarray:
    if math.isinf(config.beta):
        return np.zeros(config.size)
    return np.sqrt(4.0 / config.beta * cell_weights(config) / config.h)


def discretize_sao(config: SAOConfig, rng: np.random.Generator | None = None, noise: np.ndarray | None = None) -> TridiagonalSym:
    """Tridiagonal discretization; off-diagonal 1/h^2 stored positive.

    The true off-diagonal is -1/h^2; flipping its sign is the similarity by
    diag((-1)^j), which leaves eigenvalues alone. Pass ``noise`` (standard
    normals) to reuse a path across beta values; otherwise ``rng`` is used.
    """
    x = config.grid()
    h = config.h
    diag = 2.0 / h**2 + x ** (1.0 / (2 * config.k + 1))
    if not math.isinf(config.beta):
        if noise is None:
            if rng is None:
                raise ValueError("finite beta needs rng or noise")
            noise = rng.standard_normal(config.size)
        diag = diag + noise_sd(config) * np.asarray(noise, float)
    return TridiagonalSym(diag, np.full(config.size - 1, 1.0 / h**2))


def sao_eigenvalues(config: SAOConfig, rng=None, noise=None) -> np.ndarray:
    return eigvals_index(discretize_sao(config, rng, noise), 0, config.num_eigs)


@dataclass
class EdgeSampleBatch:
    """Edge samples plus the metadata needed to reproduce them.

    ``values`` holds -Lambda_0 (or scaled matrix edges); ``extra`` optionally
    holds further columns such as -Lambda_1.
    """

    values: np.ndarray
    metadata: dict
    extra: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite sample")
        for key in ("model", "beta", "seed"):
            if key not in self.metadata:
                raise ValueError(f"metadata lacks {key!r}")

    def to_csv(self) -> str:
        lines = [f"# {k}: {v}" for k, v in sorted(self.metadata.items())]
        cols = 1 if self.extra is None else 1 + self.extra.shape[1]
        lines.append(",".join(["value"] + [f"extra{j}" for j in range(1, cols)]))
        for i, v in enumerate(self.values):
            row = [repr(float(v))]
            if self.extra is not None:
                row += [repr(float(e)) for e in self.extra[i]]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "EdgeSampleBatch":
        meta = {}
        rows = []
        header_seen = False
        for line in text.splitlines():
            if line.startswith("#"):
                k, _, v = line[1:].partition(":")
                meta[k.strip()] = _parse_meta(v.strip())
            elif not header_seen:
                header_seen = True
            elif line.strip():
                rows.append([float(t) for t in line.split(",")])
        arr = np.array(rows, float).reshape(len(rows), -1)
        extra = arr[:, 1:] if arr.shape[1] > 1 else None
        return cls(arr[:, 0], meta, extra)


def _parse_meta(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def sample_tw_beta(config: SAOConfig, N: int) -> EdgeSampleBatch:
    """N independent realizations; realization i uses stream (seed, i)."""
    if math.isinf(config.beta):
        raise ValueError("sampling needs finite beta")
    if N < 1:
        raise ValueError("N must be positive")
    out = np.empty((N, config.num_eigs))
    for i in range(N):
        out[i] = -sao_eigenvalues(config, rng_stream(config.seed, i))
    meta = dict(asdict(config), model="sao" if config.k == 0 else f"sao_nonregular_k{config.k}", N=N)
    return EdgeSampleBatch(out[:, 0], meta, out[:, 1:] if config.num_eigs > 1 else None)


def rayleigh_residual(T: TridiagonalSym, eigenpair) -> float:
    """|f^T T f - Lambda f^T f| for the stored matrix."""
    lam, f = eigenpair
    f = np.asarray(f, float)
    Tf = T.diag * f
    Tf[:-1] += T.offdiag * f[1:]
    Tf[1:] += T.offdiag * f[:-1]
    return float(abs(f @ Tf - lam * (f @ f)))


def ground_state(config: SAOConfig, rng=None, noise=None):
    """(Lambda_0, eigenvector) of the discretization, the vector normalized in discrete L^2."""
    T = discretize_sao(config, rng, noise)
    lam, v = eigen_smallest(T, 1)[0]
    # undo the sign similarity so the ground state is one-signed
    v = v * (-1.0) ** np.arange(v.size)
    v = v if v[np.argmax(np.abs(v))] > 0 else -v
    return lam, v / math.sqrt(config.h)


def shooting_eigenvalues(count: int, k: int = 0, L: float = 12.0) -> np.ndarray:
    """Lowest eigenvalues of -f'' + x^{1/(2k+1)} f on [0, L], Dirichlet, by shooting.

    Integrates f(0) = 0, f'(0) = 1 to x = L and root-finds f(L; Lambda) = 0.
    """
    p = 1.0 / (2 * k + 1)

    def endpoint(lam):
        def rhs(x, y):
            return [y[1], (x**p - lam) * y[0]]

        sol = scipy.integrate.solve_ivp(rhs, (0.0, L), [0.0, 1.0], method="DOP853", rtol=1e-12, atol=1e-14)
        y = sol.y[0, -1]
        # normalize the exponential growth so brentq sees moderate numbers
        return y / (1.0 + abs(y)) ** 0.5

    roots = []
    hi = 4.0 + 3.0 * count
    grid = np.linspace(0.05, hi, int(hi / 0.2) + 1)
    vals = [endpoint(g) for g in grid]
    for lo, hi, flo, fhi in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if flo == 0:
            roots.append(lo)
        elif flo * fhi < 0:
            roots.append(scipy.optimize.brentq(endpoint, lo, hi, xtol=1e-14, rtol=1e-15))
        if len(roots) == count:
            break
    if len(roots) < count:
        raise RuntimeError("shooting bracket too small")
    return np.array(roots)


def airy_zero_magnitudes(count: int) -> np.ndarray:
    """-a_j for the zeros a_j of Ai, from scipy."""
    return -scipy.special.ai_zeros(count)[0]


def richardson_extrapolate(hs, values) -> float:
    """Extrapolate to h = 0 assuming an expansion in powers of h^2 (Neville)."""
    x = np.asarray(hs, float) ** 2
    P = list(np.asarray(values, float))
    m = len(P)
    for level in range(1, m):
        for i in range(m - level):
            P[i] = (x[i + level] * P[i] - x[i] * P[i + 1]) / (x[i + level] - x[i])
    return float(P[0])


def deterministic_ground_energy(k: int = 0, hs=(0.04, 0.02, 0.01), L: float | None = None) -> tuple[float, list[float]]:
    """Richardson-extrapolated beta = inf Lambda_0 and the per-h values."""
    vals = []
    for h in hs:
        cfg = SAOConfig(beta=math.inf, k=k, h=h, L=L)
        vals.append(float(sao_eigenvalues(cfg)[0]))
    return richardson_extrapolate(hs, vals), vals
