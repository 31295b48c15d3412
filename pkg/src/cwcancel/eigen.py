"""Dense real eigenvalue computation via Hessenberg reduction and Francis QR.

Used for stability certification throughout the toolkit (Hurwitz tests on
Riccati closed loops, Schur tests on lifted closed loops), so it is written
defensively: non-convergence raises instead of returning garbage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lti import DimensionError, _as_matrix

__all__ = ["Spectrum", "NumericalFailure", "eigenvalues", "spectral_radius"]

QR_MAX_SWEEPS_PER_STATE = 100


class NumericalFailure(RuntimeError):
    """An iterative numerical routine failed to converge."""


@dataclass
class Spectrum:
    """Full complex spectrum of a real matrix plus its spectral radius."""

    eigenvalues: np.ndarray
    spectral_radius: float


def _householder(x: np.ndarray):
    """Householder vector v (v[0]=1) and coefficient beta annihilating x[1:]."""
    sigma = float(np.dot(x[1:], x[1:]))
    v = x.copy()
    v[0] = 1.0
    if sigma == 0.0:
        return v, 0.0
    mu = np.sqrt(x[0] * x[0] + sigma)
    if x[0] <= 0:
        v0 = x[0] - mu
    else:
        v0 = -sigma / (x[0] + mu)
    beta = 2.0 * v0 * v0 / (sigma + v0 * v0)
    v[1:] = x[1:] / v0
    v[0] = 1.0
    return v, beta


def _balance(A: np.ndarray, max_passes: int = 32) -> np.ndarray:
    """Parlett-Reinsch balancing: radix-2 diagonal similarity scaling.

    Exact (powers of two) and similarity-preserving; equalizing row and
    column norms materially improves QR convergence on matrices whose
    entries span many orders of magnitude.
    """
    B = A.copy()
    n = B.shape[0]
    radix = 2.0
    for _ in range(max_passes):
        converged = True
        for i in range(n):
            c = np.abs(B[:, i]).sum() - abs(B[i, i])
            r = np.abs(B[i, :]).sum() - abs(B[i, i])
            if c == 0.0 or r == 0.0:
                continue
            f = 1.0
            s = c + r
            while c < r / radix:
                c *= radix * radix
                f *= radix
            while c > r * radix:
                c /= radix * radix
                f /= radix
            if (c + r) / f < 0.95 * s:
                B[i, :] /= f
                B[:, i] *= f
                converged = False
        if converged:
            break
    return B


def _hessenberg(A: np.ndarray) -> np.ndarray:
    H = A.copy()
    n = H.shape[0]
    for k in range(n - 2):
        v, beta = _householder(H[k + 1:, k].copy())
        if beta == 0.0:
            continue
        H[k + 1:, k:] -= beta * np.outer(v, v @ H[k + 1:, k:])
        H[:, k + 1:] -= beta * np.outer(H[:, k + 1:] @ v, v)
    return H


def _eig2(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]], stable against cancellation."""
    tr = 0.5 * (a + d)
    det = a * d - b * c
    disc = tr * tr - det
    if disc >= 0.0:
        rt = np.sqrt(disc)
        lam1 = tr + rt if tr >= 0 else tr - rt
        lam2 = det / lam1 if lam1 != 0.0 else tr - np.copysign(rt, tr)
        return complex(lam1), complex(lam2)
    rt = np.sqrt(-disc)
    return complex(tr, rt), complex(tr, -rt)


def _shift_column(H, m, s, t):
    """First column of (H - s1)(H - s2) at row m, given s = s1+s2, t = s1*s2."""
    x = H[m, m] * H[m, m] + H[m, m + 1] * H[m + 1, m] - s * H[m, m] + t
    y = H[m + 1, m] * (H[m, m] + H[m + 1, m + 1] - s)
    z = H[m + 2, m + 1] * H[m + 1, m]
    return x, y, z


def _francis_sweep(H, p, q, exceptional):
    """One implicit double-shift bulge chase on the active block H[p:q+1].

    The chase starts at the lowest row where two consecutive subdiagonal
    products are negligible (the classic stall-breaker for defective
    eigenvalue clusters); the eps-level fill created in that column is
    discarded, as in the reference Fortran implementations.
    """
    eps = np.finfo(float).eps
    if exceptional:
        w = abs(H[q, q - 1]) + abs(H[q - 1, q - 2])
        s = 1.5 * w
        t = w * w
    else:
        s = H[q - 1, q - 1] + H[q, q]
        t = H[q - 1, q - 1] * H[q, q] - H[q - 1, q] * H[q, q - 1]
    m = p
    x = y = z = 0.0
    for mm in range(q - 2, p - 1, -1):
        x, y, z = _shift_column(H, mm, s, t)
        if mm == p:
            m = mm
            break
        u = abs(H[mm, mm - 1]) * (abs(y) + abs(z))
        v = abs(x) * (abs(H[mm - 1, mm - 1]) + abs(H[mm, mm]) + abs(H[mm + 1, mm + 1]))
        if u <= eps * v:
            m = mm
            break
    for k in range(m, q - 1):
        v, beta = _householder(np.array([x, y, z]))
        if beta != 0.0:
            r = max(p, k - 1)
            H[k:k + 3, r:q + 1] -= beta * np.outer(v, v @ H[k:k + 3, r:q + 1])
            rr = min(k + 4, q + 1)
            H[p:rr, k:k + 3] -= beta * np.outer(H[p:rr, k:k + 3] @ v, v)
        if k == m and m > p:
            # Negligible by the start criterion; keep the matrix Hessenberg.
            H[k + 1, k - 1] = 0.0
            H[k + 2, k - 1] = 0.0
        x = H[k + 1, k]
        y = H[k + 2, k]
        if k < q - 2:
            z = H[k + 3, k]
    v, beta = _householder(np.array([x, y]))
    if beta != 0.0:
        H[q - 1:q + 1, max(p, q - 2):q + 1] -= beta * np.outer(v, v @ H[q - 1:q + 1, max(p, q - 2):q + 1])
        H[p:q + 1, q - 1:q + 1] -= beta * np.outer(H[p:q + 1, q - 1:q + 1] @ v, v)


def eigenvalues(M, max_sweeps_per_state: int = QR_MAX_SWEEPS_PER_STATE) -> Spectrum:
    """Full complex spectrum of a real square matrix.

    Hessenberg reduction followed by Francis double-shift QR with deflation;
    an exceptional shift is injected every tenth stalled sweep.  Raises
    :class:`NumericalFailure` if the iteration cap (``max_sweeps_per_state``
    times n) is exhausted before full deflation.
    """
    A = _as_matrix(M, "M")
    n, m = A.shape
    if n != m:
        raise DimensionError(f"eigenvalues needs a square matrix, got {A.shape}")
    if n == 0:
        return Spectrum(np.zeros(0, dtype=complex), 0.0)
    if not np.all(np.isfinite(A)):
        raise ValueError("eigenvalues: input has non-finite entries")
    if n == 1:
        return Spectrum(A[0, 0].astype(complex).reshape(1), abs(float(A[0, 0])))

    H = _hessenberg(_balance(A))
    eps = np.finfo(float).eps
    hnorm = max(np.linalg.norm(H, 1), eps)
    eigs: list[complex] = []
    q = n - 1
    budget = max_sweeps_per_state * n
    stalled = 0
    while q >= 0:
        if budget <= 0:
            raise NumericalFailure(
                f"QR iteration did not converge within {max_sweeps_per_state * n} sweeps"
            )
        # Zero out negligible subdiagonals in the trailing block.
        for i in range(1, q + 1):
            tol = eps * (abs(H[i - 1, i - 1]) + abs(H[i, i]))
            if tol == 0.0:
                tol = eps * hnorm
            if abs(H[i, i - 1]) <= tol:
                H[i, i - 1] = 0.0
        if q == 0 or H[q, q - 1] == 0.0:
            eigs.append(complex(H[q, q]))
            q -= 1
            stalled = 0
            continue
        if q == 1 or H[q - 1, q - 2] == 0.0:
            l1, l2 = _eig2(H[q - 1, q - 1], H[q - 1, q], H[q, q - 1], H[q, q])
            eigs.extend([l1, l2])
            q -= 2
            stalled = 0
            continue
        # Find the top of the unreduced block ending at q.
        p = q - 1
        while p > 0 and H[p, p - 1] != 0.0:
            p -= 1
        stalled += 1
        _francis_sweep(H, p, q, exceptional=(stalled % 10 == 0))
        budget -= 1

    vals = np.array(eigs[::-1], dtype=complex)
    radius = float(np.max(np.abs(vals))) if vals.size else 0.0
    return Spectrum(vals, radius)


def spectral_radius(M) -> float:
    return eigenvalues(M).spectral_radius
