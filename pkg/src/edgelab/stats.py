"""Two-sample statistics used by the experiment pipelines."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

LEVELS = (0.1, 0.05, 0.01, 0.001)


def ks_coefficient(alpha: float) -> float:
    """c(alpha) = sqrt(-log(alpha/2)/2) of the asymptotic Kolmogorov law."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    n: int
    m: int
    critical: dict

    def rejects(self, alpha: float = 0.01) -> bool:
        return self.statistic > ks_critical_value(self.n, self.m, alpha)


def ks_critical_value(n: int, m: int, alpha: float) -> float:
    return ks_coefficient(alpha) * math.sqrt((n + m) / (n * m))


def ks_two_sample(A, B) -> KSResult:
    """sup |F_A - F_B| with asymptotic critical values at the usual levels."""
    A = np.asarray(A, float).ravel()
    B = np.asarray(B, float).ravel()
    if A.size == 0 or B.size == 0:
        raise ValueError("KS needs two nonempty samples")
    # only the statistic is used; the asymptotic p-value divides by zero for size-1 samples
    with np.errstate(divide="ignore"):
        stat = float(scipy.stats.ks_2samp(A, B, method="asymp").statistic)
    crit = {a: ks_critical_value(A.size, B.size, a) for a in LEVELS}
    return KSResult(stat, A.size, B.size, crit)


def moments(x) -> dict:
    x = np.sort(np.asarray(x, float))
    return {
        "n": int(x.size),
        "mean": float(x.mean()),
        "var": float(x.var(ddof=1)) if x.size > 1 else 0.0,
        "skew": float(scipy.stats.skew(x)) if x.size > 2 else 0.0,
        "sem": float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.inf,
    }


def compare_samples(A, B) -> dict:
    """KS distance and moment differences between two samples."""
    ks = ks_two_sample(A, B)
    ma, mb = moments(A), moments(B)
    return {
        "ks": ks.statistic,
        "ks_crit_01": ks.critical[0.01],
        "mean_a": ma["mean"],
        "mean_b": mb["mean"],
        "mean_diff": ma["mean"] - mb["mean"],
        "mean_diff_se": math.hypot(ma["sem"], mb["sem"]),
        "var_a": ma["var"],
        "var_b": mb["var"],
        "var_diff": ma["var"] - mb["var"],
    }
