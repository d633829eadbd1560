"""Symmetric tridiagonal matrices: eigensolver, spectral measures, identities.

The eigensolver is Sturm-sequence bisection for eigenvalues (Gershgorin
brackets) followed by inverse iteration for eigenvectors.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

_EPS = np.finfo(float).eps


class DegeneracyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TridiagonalSym:
    """Symmetric tridiagonal matrix with diagonal ``diag`` and off-diagonal ``offdiag``."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.array(self.diag, dtype=float).ravel()
        e = np.array(self.offdiag, dtype=float).ravel()
        if d.size < 1 or e.size != d.size - 1:
            raise ValueError(f"need n >= 1 diagonal and n - 1 off-diagonal entries, got {d.size}, {e.size}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise ValueError("non-finite entries")
        d.flags.writeable = False
        e.flags.writeable = False
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @classmethod
    def jacobi(cls, diag, offdiag) -> "TridiagonalSym":
        T = cls(diag, offdiag)
        if np.any(T.offdiag <= 0):
            raise ValueError("Jacobi matrix needs strictly positive off-diagonal")
        return T

    @property
    def n(self) -> int:
        return self.diag.size

    @property
    def is_jacobi(self) -> bool:
        return bool(np.all(self.offdiag > 0))

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def minor(self, start: int, stop: int) -> "TridiagonalSym":
        """Principal minor on 0-based rows ``start:stop``."""
        return TridiagonalSym(self.diag[start:stop], self.offdiag[start : stop - 1])

    def shifted(self, c: float) -> "TridiagonalSym":
        return TridiagonalSym(self.diag + c, self.offdiag)

    def scaled(self, c: float) -> "TridiagonalSym":
        return TridiagonalSym(c * self.diag, c * self.offdiag)

    def with_corner(self, first: float = 0.0, last: float = 0.0) -> "TridiagonalSym":
        """Add ``first`` to the (1,1) entry and ``last`` to the (n,n) entry."""
        d = self.diag.copy()
        d[0] += first
        d[-1] += last
        return TridiagonalSym(d, self.offdiag)

    def gershgorin(self) -> tuple[float, float]:
        return _gershgorin(self.diag, self.offdiag)

    def spectral_radius_bound(self) -> float:
        lo, hi = self.gershgorin()
        return max(abs(lo), abs(hi), 1e-300)

    def __eq__(self, other):
        if not isinstance(other, TridiagonalSym):
            return NotImplemented
        return np.array_equal(self.diag, other.diag) and np.array_equal(self.offdiag, other.offdiag)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    lambdas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float).ravel()
        w = np.array(self.weights, dtype=float).ravel()
        if lam.size != w.size or lam.size == 0:
            raise ValueError("atoms and weights must be nonempty and of equal length")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12 * max(1, lam.size):
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "weights", w)

    def moment(self, m: int) -> float:
        return float(np.sum(self.weights * self.lambdas**m))


# ---------------------------------------------------------------------------
# numba kernels


def _gershgorin(d, e):
    r = np.zeros_like(d)
    ae = np.abs(e)
    r[:-1] += ae
    r[1:] += ae
    return float(np.min(d - r)), float(np.max(d + r))


@numba.njit(cache=True)
def _sturm_count(d, e2, x, pivmin):
    """Number of eigenvalues strictly less than x."""
    n = d.size
    count = 0
    q = d[0] - x
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0:
        count += 1
    for i in range(1, n):
        q = d[i] - x - e2[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0:
            count += 1
    return count


@numba.njit(cache=True)
def _bisect_index(d, e2, k, lo, hi, pivmin, abstol):
    """Eigenvalue number k (0-based, ascending) inside the bracket [lo, hi]."""
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if hi - lo <= abstol + 2.0 * 2.220446049250313e-16 * max(abs(lo), abs(hi)):
            break
        if mid <= lo or mid >= hi:
            break
        if _sturm_count(d, e2, mid, pivmin) > k:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@numba.njit(cache=True)
def _eigvals_index_range(d, e2, i0, i1, lo, hi, pivmin, abstol):
    out = np.empty(i1 - i0)
    for k in range(i0, i1):
        out[k - i0] = _bisect_index(d, e2, k, lo, hi, pivmin, abstol)
    return out


@numba.njit(cache=True)
def _tridiag_lu_solve(d, e, lam, rhs, tiny):
    """Solve (T - lam I) x = rhs with partial pivoting (LAPACK gttrf/gtts2 layout)."""
    n = d.size
    dd = d - lam
    dl = e.copy()
    du = e.copy()
    du2 = np.zeros(max(n - 2, 0))
    piv = np.zeros(max(n - 1, 0), dtype=np.bool_)
    for i in range(n - 1):
        if abs(dd[i]) >= abs(dl[i]):
            if dd[i] == 0.0:
                dd[i] = tiny
            fact = dl[i] / dd[i]
            dl[i] = fact
            dd[i + 1] -= fact * du[i]
        else:
            fact = dd[i] / dl[i]
            dd[i] = dl[i]
            dl[i] = fact
            temp = du[i]
            du[i] = dd[i + 1]
            dd[i + 1] = temp - fact * dd[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            piv[i] = True
    if dd[n - 1] == 0.0:
        dd[n - 1] = tiny
    x = rhs.copy()
    for i in range(n - 1):
        if piv[i]:
            temp = x[i]
            x[i] = x[i + 1]
            x[i + 1] = temp - dl[i] * x[i]
        else:
            x[i + 1] -= dl[i] * x[i]
    x[n - 1] /= dd[n - 1]
    if n > 1:
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / dd[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / dd[i]
    return x


@numba.njit(cache=True)
def _inverse_iteration(d, e, lams, x0, cluster_tol, tiny):
    n = d.size
    k = lams.size
    V = np.zeros((k, n))
    for j in range(k):
        x = x0.copy()
        x /= np.sqrt(np.sum(x * x))
        for it in range(6):
            y = _tridiag_lu_solve(d, e, lams[j], x, tiny)
            # orthogonalize against earlier members of the same cluster
            for i in range(j - 1, -1, -1):
                if abs(lams[j] - lams[i]) > cluster_tol:
                    break
                y -= np.dot(V[i], y) * V[i]
            nrm = np.sqrt(np.sum(y * y))
            if nrm == 0.0 or not np.isfinite(nrm):
                y = x0.copy()
                nrm = np.sqrt(np.sum(y * y))
            x = y / nrm
        for i in range(j - 1, -1, -1):
            if abs(lams[j] - lams[i]) > cluster_tol:
                break
            x -= np.dot(V[i], x) * V[i]
        x /= np.sqrt(np.sum(x * x))
        # first nonzero coordinate positive
        for t in range(n):
            if abs(x[t]) > 1e-300:
                if x[t] < 0:
                    x = -x
                break
        V[j] = x
    return V


# ---------------------------------------------------------------------------
# public operations


def _prep(T: TridiagonalSym):
    d = np.ascontiguousarray(T.diag)
    e = np.ascontiguousarray(T.offdiag)
    e2 = e * e
    lo, hi = T.gershgorin()
    scale = max(abs(lo), abs(hi), 1e-300)
    pivmin = np.finfo(float).tiny * max(1.0, float(e2.max()) if e2.size else 1.0)
    lo -= 4 * _EPS * scale + pivmin
    hi += 4 * _EPS * scale + pivmin
    return d, e, e2, lo, hi, pivmin, scale


def eigvals_index(T: TridiagonalSym, i0: int, i1: int) -> np.ndarray:
    """Eigenvalues with 0-based ascending indices in [i0, i1)."""
    if not 0 <= i0 <= i1 <= T.n:
        raise ValueError(f"index range [{i0}, {i1}) outside [0, {T.n}]")
    d, e, e2, lo, hi, pivmin, scale = _prep(T)
    return _eigvals_index_range(d, e2, i0, i1, lo, hi, pivmin, 1e-14 * scale)


def eigvalsh(T: TridiagonalSym) -> np.ndarray:
    return eigvals_index(T, 0, T.n)


def _pairs(T: TridiagonalSym, lams: np.ndarray):
    d, e, _, _, _, _, scale = _prep(T)
    x0 = np.random.default_rng(12345).uniform(0.5, 1.5, T.n)
    V = _inverse_iteration(d, e, np.ascontiguousarray(lams), x0, 1e-3 * scale, _EPS * scale)
    return [(float(l), V[i]) for i, l in enumerate(lams)]


def eigen_smallest(T: TridiagonalSym, k: int):
    """The k smallest eigenpairs as a list of (eigenvalue, unit eigenvector)."""
    if not 1 <= k <= T.n:
        raise ValueError(f"k = {k} outside [1, {T.n}]")
    return _pairs(T, eigvals_index(T, 0, k))


def eigen_largest(T: TridiagonalSym, k: int):
    """The k largest eigenpairs, largest first."""
    if not 1 <= k <= T.n:
        raise ValueError(f"k = {k} outside [1, {T.n}]")
    lams = eigvals_index(T, T.n - k, T.n)[::-1].copy()
    return _pairs(T, lams)


def eigen_max(T: TridiagonalSym) -> float:
    return float(eigvals_index(T, T.n - 1, T.n)[0])


def eigh(T: TridiagonalSym):
    """All eigenvalues (ascending) and eigenvectors as rows."""
    lams = eigvalsh(T)
    pairs = _pairs(T, lams)
    return lams, np.array([v for _, v in pairs])


def spectral_measure(T: TridiagonalSym) -> SpectralMeasure:
    """Eigenvalues and squared first eigenvector components."""
    if T.n == 1:
        return SpectralMeasure([T.diag[0]], [1.0])
    lam = eigvalsh(T)
    logw = log_weights(T, lam)
    w = np.exp(logw - logw.max())
    return SpectralMeasure(lam, w / w.sum())


def log_weights(T: TridiagonalSym, lam: np.ndarray) -> np.ndarray:
    """log q_j^2 for the given eigenvalues, from a twisted factorization.

    Each eigenvector is rebuilt outward from the index where the twisted
    pivot is smallest, so exponentially small first components keep their
    relative accuracy.
    """
    d, e, _, _, _, _, scale = _prep(T)
    return _twisted_log_weights(d, e, np.ascontiguousarray(lam, dtype=float), _EPS * scale)


@numba.njit(cache=True)
def _twisted_log_weights(d, e, lams, tiny):
    n = d.size
    out = np.empty(lams.size)
    dp = np.empty(n)
    dm = np.empty(n)
    logz = np.empty(n)
    for j in range(lams.size):
        lam = lams[j]
        dp[0] = d[0] - lam
        if dp[0] == 0.0:
            dp[0] = tiny
        for k in range(1, n):
            dp[k] = d[k] - lam - e[k - 1] * e[k - 1] / dp[k - 1]
            if dp[k] == 0.0:
                dp[k] = tiny
        dm[n - 1] = d[n - 1] - lam
        if dm[n - 1] == 0.0:
            dm[n - 1] = tiny
        for k in range(n - 2, -1, -1):
            dm[k] = d[k] - lam - e[k] * e[k] / dm[k + 1]
            if dm[k] == 0.0:
                dm[k] = tiny
        r = 0
        best = np.inf
        for k in range(n):
            g = abs(dp[k] + dm[k] - (d[k] - lam))
            if g < best:
                best = g
                r = k
        logz[r] = 0.0
        for k in range(r - 1, -1, -1):
            logz[k] = logz[k + 1] + np.log(abs(e[k] / dp[k]))
        for k in range(r + 1, n):
            logz[k] = logz[k - 1] + np.log(abs(e[k - 1] / dm[k]))
        top = logz.max()
        s = 0.0
        for k in range(n):
            s += np.exp(2.0 * (logz[k] - top))
        out[j] = 2.0 * (logz[0] - top) - np.log(s)
    return out


def jacobi_from_measure(mu: SpectralMeasure) -> TridiagonalSym:
    """The Jacobi matrix whose spectral measure at e_1 is ``mu``.

    Lanczos on diag(atoms) started from sqrt(weights), with full
    reorthogonalization.
    """
    lam = mu.lambdas
    w = mu.weights
    n = lam.size
    if np.any(w <= 0):
        raise DegeneracyError("weights must be strictly positive")
    srt = np.sort(lam)
    if n > 1 and np.min(np.diff(srt)) <= 1e-14 * max(1.0, np.max(np.abs(lam))):
        raise DegeneracyError("repeated atoms")
    Q = np.zeros((n, n))
    q = np.sqrt(w)
    q /= np.linalg.norm(q)
    Q[0] = q
    a = np.zeros(n)
    b = np.zeros(n - 1)
    for k in range(n):
        z = lam * Q[k]
        a[k] = Q[k] @ z
        if k == n - 1:
            break
        z -= a[k] * Q[k]
        if k > 0:
            z -= b[k - 1] * Q[k - 1]
        for _ in range(2):
            z -= Q[: k + 1].T @ (Q[: k + 1] @ z)
        b[k] = np.linalg.norm(z)
        if b[k] <= 1e-14 * max(1.0, np.max(np.abs(lam))):
            raise DegeneracyError("Lanczos breakdown: measure has fewer distinct atoms than its size")
        Q[k + 1] = z / b[k]
    return TridiagonalSym(a, b)


def spectral_map_residual(T: TridiagonalSym) -> float:
    """|log prod b_k^{2(n-k)} - log(prod q_i^2 prod_{i<j} (lam_i - lam_j)^2)|."""
    if not T.is_jacobi:
        raise ValueError("needs a Jacobi matrix")
    n = T.n
    k = np.arange(1, n)
    lhs = float(np.sum(2 * (n - k) * np.log(T.offdiag)))
    lam = eigvalsh(T)
    logw = log_weights(T, lam)
    iu = np.triu_indices(n, 1)
    rhs = float(np.sum(logw) + 2 * np.sum(np.log(np.abs(lam[iu[0]] - lam[iu[1]]))))
    return abs(lhs - rhs)


def split_maxeig_identity(T: TridiagonalSym, m: int) -> tuple[float, float, float]:
    """Top eigenvalue of T and of its two corner-corrected blocks split after row m (1-based).

    With q = T[m, m+1] and r = phi[m+1]/phi[m] from the top eigenvector phi,
    returns (lmax(T), lmax(T[1,m] + q r e_mm), lmax(T[m+1,n] + (q/r) e_11)).
    """
    if not 1 <= m <= T.n - 1:
        raise ValueError(f"m = {m} outside [1, {T.n - 1}]")
    if not T.is_jacobi:
        raise ValueError("needs positive off-diagonal")
    lam, phi = eigen_largest(T, 1)[0]
    if phi[m - 1] == 0.0:
        raise DegeneracyError("top eigenvector vanishes at the split")
    r = phi[m] / phi[m - 1]
    q = T.offdiag[m - 1]
    top = T.minor(0, m).with_corner(last=q * r)
    bottom = T.minor(m, T.n).with_corner(first=q / r)
    return lam, eigen_max(top), eigen_max(bottom)


def split_values(T: TridiagonalSym, m: int, r: float) -> tuple[float, float]:
    """The two split top eigenvalues for an arbitrary ratio r > 0."""
    q = T.offdiag[m - 1]
    return (
        eigen_max(T.minor(0, m).with_corner(last=q * r)),
        eigen_max(T.minor(m, T.n).with_corner(first=q / r)),
    )


# ---------------------------------------------------------------------------
# CSV: two columns (diag, offdiag), off-diagonal padded with an empty last cell


def to_csv(T: TridiagonalSym) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["diag", "offdiag"])
    for i in range(T.n):
        w.writerow([repr(float(T.diag[i])), repr(float(T.offdiag[i])) if i < T.n - 1 else ""])
    return buf.getvalue()


def parse_csv(text: str) -> TridiagonalSym:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows or [c.strip() for c in rows[0]] != ["diag", "offdiag"]:
        raise ValueError("expected header 'diag,offdiag'")
    body = rows[1:]
    if not body:
        raise ValueError("no rows")
    if len(body[-1]) > 1 and body[-1][1].strip():
        raise ValueError("last off-diagonal cell must be empty")
    return TridiagonalSym([float(r[0]) for r in body], [float(r[1]) for r in body[:-1]])


def write_csv(T: TridiagonalSym, path) -> None:
    Path(path).write_text(to_csv(T))


def read_csv(path) -> TridiagonalSym:
    return parse_csv(Path(path).read_text())


def log_abs_det(T: TridiagonalSym) -> tuple[float, float]:
    """(sign, log|det T|) by the three-term determinant recursion, in log domain."""
    sign = 1.0
    logdet = 0.0
    prev_ratio = None
    # ratio r_k = det_k / det_{k-1}
    for i in range(T.n):
        r = T.diag[i] if prev_ratio is None else T.diag[i] - T.offdiag[i - 1] ** 2 / prev_ratio
        if r == 0.0:
            return 0.0, -math.inf
        sign *= math.copysign(1.0, r)
        logdet += math.log(abs(r))
        prev_ratio = r
    return sign, logdet


def moment_jacobian(mu: SpectralMeasure) -> np.ndarray:
    """Jacobian of (m_0, ..., m_{2n-1}) with respect to (weights, atoms).

    With m_k = sum_i w_i lam_i^k its determinant is, up to sign,
    prod_i w_i prod_{i<j} (lam_i - lam_j)^4 (a confluent Vandermonde matrix).
    """
    lam, w = mu.lambdas, mu.weights
    n = lam.size
    k = np.arange(2 * n)[:, None]
    dw = lam[None, :] ** k
    dlam = k * w[None, :] * np.where(k > 0, lam[None, :] ** np.maximum(k - 1, 0), 0.0)
    return np.hstack([dw, dlam])
