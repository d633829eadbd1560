"""Banded matrix polynomials of tridiagonal matrices.

A band of half-width w over n rows is stored as an array of shape
(..., 2w + 1, n) with ``B[..., w + k, i] = M[i, i + k]`` and zeros where
``i + k`` falls outside the matrix. Leading axes are batch axes.
"""
from __future__ import annotations

import numpy as np


def from_tridiag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[-1]
    out = np.zeros(a.shape[:-1] + (3, n))
    out[..., 1, :] = a
    out[..., 0, 1:] = b
    out[..., 2, : n - 1] = b
    return out


def identity_like(band: np.ndarray) -> np.ndarray:
    out = np.zeros(band.shape[:-2] + (1, band.shape[-1]))
    out[..., 0, :] = 1.0
    return out


def width(band: np.ndarray) -> int:
    return (band.shape[-2] - 1) // 2


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    wa, wb = width(A), width(B)
    n = A.shape[-1]
    wc = wa + wb
    batch = np.broadcast_shapes(A.shape[:-2], B.shape[:-2])
    C = np.zeros(batch + (2 * wc + 1, n))
    for p in range(-wa, wa + 1):
        if abs(p) >= n:
            continue
        Ap = A[..., wa + p, :]
        for q in range(-wb, wb + 1):
            k = p + q
            Bq = B[..., wb + q, :]
            if p >= 0:
                C[..., wc + k, : n - p] += Ap[..., : n - p] * Bq[..., p:]
            else:
                C[..., wc + k, -p:] += Ap[..., -p:] * Bq[..., : n + p]
    return C


def add_scaled_identity(A: np.ndarray, c: float) -> np.ndarray:
    out = A.copy()
    out[..., width(A), :] += c
    return out


def diagonal(A: np.ndarray, k: int = 0) -> np.ndarray:
    """Entries M[i, i + k], i = 0 .. n - |k| - 1."""
    w = width(A)
    n = A.shape[-1]
    if abs(k) > w:
        return np.zeros(A.shape[:-2] + (max(n - abs(k), 0),))
    row = A[..., w + k, :]
    return row[..., : n - k] if k >= 0 else row[..., -k:]


def poly(coeffs, T: np.ndarray) -> np.ndarray:
    """sum_m coeffs[m] T^m by Horner's rule."""
    coeffs = list(coeffs)
    P = identity_like(T) * coeffs[-1]
    for c in reversed(coeffs[:-1]):
        P = add_scaled_identity(matmul(P, T), c)
    return P


def trace_and_dpoly(coeffs, a: np.ndarray, b: np.ndarray):
    """Return (tr V(T), diag of V'(T), first off-diagonal of V'(T)).

    Uses one chain of powers T^0..T^{d-1}; tr T^m = <T^{m-1}, T> elementwise.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    d = len(coeffs) - 1
    T = from_tridiag(a, b)
    pw = [identity_like(T), T]
    for _ in range(2, d):
        pw.append(matmul(pw[-1], T))
    n = T.shape[-1]
    tr = coeffs[0] * n + coeffs[1] * a.sum(axis=-1) if d >= 1 else coeffs[0] * n
    dd = np.zeros(a.shape)
    do = np.zeros(b.shape)
    for m in range(1, d + 1):
        cm = coeffs[m]
        if cm == 0.0:
            continue
        Pm1 = pw[m - 1]
        if m >= 2:
            # tr T^m = sum_i [T^{m-1} T]_{ii} = sum_i sum_k (T^{m-1})_{i,i+k} T_{i+k,i}
            tr = tr + cm * _inner_with_tridiag(Pm1, a, b)
        dd = dd + m * cm * diagonal(Pm1, 0)
        do = do + m * cm * diagonal(Pm1, 1)
    return tr, dd, do


def _inner_with_tridiag(P: np.ndarray, a: np.ndarray, b: np.ndarray):
    s = (diagonal(P, 0) * a).sum(axis=-1)
    s = s + (diagonal(P, 1) * b).sum(axis=-1) + (diagonal(P, -1) * b).sum(axis=-1)
    return s


def dpoly_directional(dcoeffs, a, b, da, db):
    """Directional derivative of U(T) along the tridiagonal direction (da, db).

    ``dcoeffs`` are the coefficients of U. Returns the diagonal and first
    off-diagonal of dU(T)[D], by forward-mode Horner.
    """
    dcoeffs = list(dcoeffs)
    T = from_tridiag(a, b)
    D = from_tridiag(da, db)
    Pm = identity_like(T) * dcoeffs[-1]
    dP = np.zeros_like(Pm)
    for c in reversed(dcoeffs[:-1]):
        dP = matmul(dP, T) + _pad(matmul(Pm, D), width(dP) + 1)
        Pm = add_scaled_identity(matmul(Pm, T), c)
    return diagonal(dP, 0), diagonal(dP, 1)


def _pad(A: np.ndarray, w: int) -> np.ndarray:
    wa = width(A)
    if wa == w:
        return A
    out = np.zeros(A.shape[:-2] + (2 * w + 1, A.shape[-1]))
    out[..., w - wa : w + wa + 1, :] = A
    return out
