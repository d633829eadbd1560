"""Polynomial potentials and the circulant-trace function W(a, b).

W(a, b) is the constant Laurent coefficient of V(a + b(z + 1/z)); equivalently
tr V(C)/dim C for a circulant C with diagonal a and first off-diagonals b,
as long as dim C > deg V.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

MAX_DEGREE = 40

# _KERNEL[m][j] = C(m, j) * C(j, j/2) for even j, exact integers.
_KERNEL = [
    [math.comb(m, j) * math.comb(j, j // 2) if j % 2 == 0 else 0 for j in range(m + 1)]
    for m in range(MAX_DEGREE + 1)
]


class PotentialError(ValueError):
    """Malformed coefficient list."""


@dataclass(frozen=True)
class Potential:
    """V(s) = sum_m coeffs[m] s^m, even degree, positive leading coefficient."""

    coeffs: tuple[float, ...]
    convexity: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        # trailing zeros do not change V
        while len(c) > 1 and c[-1] == 0.0:
            c = c[:-1]
        if len(c) == 0:
            raise PotentialError("empty coefficient list")
        if not all(math.isfinite(x) for x in c):
            raise PotentialError("non-finite coefficient")
        deg = len(c) - 1
        if deg < 2 or deg % 2:
            raise PotentialError(f"degree must be even and >= 2, got {deg}")
        if deg > MAX_DEGREE:
            raise PotentialError(f"degree {deg} exceeds {MAX_DEGREE}")
        if c[-1] <= 0:
            raise PotentialError("leading coefficient must be positive")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "convexity", _min_second_derivative(c))

    @classmethod
    def parse(cls, text: str) -> "Potential":
        """Parse ``"c0 c1 c2 ..."`` (ascending powers)."""
        try:
            vals = [float(tok) for tok in text.split()]
        except ValueError as exc:
            raise PotentialError(f"cannot parse potential {text!r}") from exc
        return cls(tuple(vals))

    def format(self) -> str:
        return " ".join(repr(c) for c in self.coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, s):
        return P.polyval(s, self.coeffs)

    def deriv_coeffs(self, order: int = 1) -> np.ndarray:
        return P.polyder(np.asarray(self.coeffs), order)

    def deriv(self, s, order: int = 1):
        return P.polyval(s, self.deriv_coeffs(order))

    def argmin(self) -> float:
        """Global minimizer of V (unique when V is uniformly convex)."""
        crit = _real_roots(self.deriv_coeffs(1))
        return float(min(crit, key=lambda s: self(s)))

    def shifted(self, c: float) -> "Potential":
        """The potential s -> V(s - c)."""
        out = np.zeros(len(self.coeffs))
        shift = np.array([-c, 1.0])
        poly = np.array([1.0])
        for coef in self.coeffs:
            out[: len(poly)] += coef * poly
            poly = P.polymul(poly, shift)
        return Potential(tuple(out))

    def scaled(self, factor: float) -> "Potential":
        return Potential(tuple(factor * c for c in self.coeffs))


def _real_roots(coeffs: np.ndarray, imag_tol: float = 1e-7) -> list[float]:
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if len(coeffs) <= 1:
        return []
    roots = P.polyroots(coeffs)
    dcoeffs = P.polyder(coeffs)
    cmax = float(np.max(np.abs(coeffs)))
    out = []
    for r in roots:
        if abs(r.imag) > imag_tol * (1.0 + abs(r.real)):
            continue
        x = r.real
        # Newton polish, stop once the residual is at the 1e-12 level
        for _ in range(50):
            f = P.polyval(x, coeffs)
            df = P.polyval(x, dcoeffs)
            if abs(f) <= 1e-12 * cmax * max(1.0, abs(x)) ** (len(coeffs) - 1) or df == 0:
                break
            x -= f / df
        out.append(float(x))
    return out


def _min_second_derivative(coeffs) -> float:
    c2 = P.polyder(np.asarray(coeffs, dtype=float), 2)
    if len(c2) == 1:
        return float(c2[0])
    crit = _real_roots(P.polyder(c2))
    return float(min(P.polyval(x, c2) for x in crit))


def convexity_constant(V: Potential) -> float:
    """min over the real line of V''; may be <= 0, callers decide."""
    return V.convexity


def w_value(V: Potential, a: float, b: float) -> float:
    """W(a, b) = [z^0] V(a + b(z + 1/z)), exact double-binomial sum."""
    total = 0.0
    for m, cm in enumerate(V.coeffs):
        if cm == 0.0:
            continue
        row = _KERNEL[m]
        s = 0.0
        for j in range(0, m + 1, 2):
            s += row[j] * a ** (m - j) * b**j
        total += cm * s
    return total


@dataclass(frozen=True)
class WDerivatives:
    W: float
    W1: float
    W2: float
    W11: float
    W12: float
    W22: float

    def hessian(self) -> np.ndarray:
        return np.array([[self.W11, self.W12], [self.W12, self.W22]])


def _pw(x: float, p: int) -> float:
    return x**p if p >= 0 else 0.0


def w_partials(V: Potential, a: float, b: float) -> WDerivatives:
    """W and its first and second partials in (a, b), differentiated term by term."""
    W = W1 = W2 = W11 = W12 = W22 = 0.0
    for m, cm in enumerate(V.coeffs):
        if cm == 0.0:
            continue
        row = _KERNEL[m]
        for j in range(0, m + 1, 2):
            k = cm * row[j]
            p = m - j  # power of a
            W += k * _pw(a, p) * _pw(b, j)
            if p >= 1:
                W1 += k * p * _pw(a, p - 1) * _pw(b, j)
            if j >= 1:
                W2 += k * j * _pw(a, p) * _pw(b, j - 1)
            if p >= 2:
                W11 += k * p * (p - 1) * _pw(a, p - 2) * _pw(b, j)
            if p >= 1 and j >= 1:
                W12 += k * p * j * _pw(a, p - 1) * _pw(b, j - 1)
            if j >= 2:
                W22 += k * j * (j - 1) * _pw(a, p) * _pw(b, j - 2)
    return WDerivatives(W, W1, W2, W11, W12, W22)
