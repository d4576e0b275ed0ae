"""Symmetric tridiagonal matrices, linear solves and the pencil eigensolver.

P1 elements in one variable produce tridiagonal stiffness and potential
matrices, so everything here works on (diag, off) pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

DENSE_LIMIT = 200


class ConvergenceError(RuntimeError):
    """An iteration hit its limit; ``best`` carries the last estimate."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True, eq=False)
class SymTridiagonal:
    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        o = np.asarray(self.off, dtype=float)
        if o.size != max(d.size - 1, 0):
            raise ValueError("off-diagonal must have one entry fewer than the diagonal")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "off", o)

    @property
    def size(self) -> int:
        return self.diag.size

    def __matmul__(self, x):
        y = self.diag * x
        y[:-1] += self.off * x[1:]
        y[1:] += self.off * x[:-1]
        return y

    def __add__(self, other: "SymTridiagonal"):
        return SymTridiagonal(self.diag + other.diag, self.off + other.off)

    def __sub__(self, other: "SymTridiagonal"):
        return SymTridiagonal(self.diag - other.diag, self.off - other.off)

    def __mul__(self, t: float):
        return SymTridiagonal(t * self.diag, t * self.off)

    __rmul__ = __mul__

    def __neg__(self):
        return SymTridiagonal(-self.diag, -self.off)

    def interior(self) -> "SymTridiagonal":
        """Drop the first and last rows/columns (homogeneous Dirichlet)."""
        return SymTridiagonal(self.diag[1:-1], self.off[1:-1])

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def banded(self) -> np.ndarray:
        """Upper banded storage for scipy's banded Cholesky."""
        ab = np.zeros((2, self.size))
        ab[0, 1:] = self.off
        ab[1] = self.diag
        return ab

    def is_zero(self) -> bool:
        return not (np.any(self.diag) or np.any(self.off))

    def quad(self, x) -> float:
        return float(x @ (self @ x))


def cholesky(A: SymTridiagonal) -> np.ndarray:
    """Banded Cholesky factor; raises ``numpy.linalg.LinAlgError`` if A is not SPD."""
    return sla.cholesky_banded(A.banded(), lower=False, check_finite=True)


def is_positive_definite(A: SymTridiagonal) -> bool:
    try:
        cholesky(A)
    except np.linalg.LinAlgError:
        return False
    return True


def cho_solve(factor: np.ndarray, b: np.ndarray) -> np.ndarray:
    return sla.cho_solve_banded((factor, False), b, check_finite=False)


def solve_spd(A: SymTridiagonal, b: np.ndarray) -> np.ndarray:
    return cho_solve(cholesky(A), b)


def solve_dense(A: SymTridiagonal, b: np.ndarray) -> np.ndarray:
    if A.size > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to {DENSE_LIMIT} unknowns")
    return np.linalg.solve(A.to_dense(), b)


def pcg(A, b, tol=1e-10, maxiter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients. Returns (x, iterations)."""
    n = b.size
    maxiter = maxiter or 10 * n
    dinv = 1.0 / A.diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    bnorm = np.linalg.norm(b) or 1.0
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"pcg did not converge in {maxiter} iterations", best=x)


# ------------------------------------------------------------ eigen-pencil


@dataclass
class PencilResult:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    converged: bool


def _rayleigh(S, K, y):
    return S.quad(y) / K.quad(y)


def _residual(S, K, y, lam):
    Ky = K @ y
    return float(np.linalg.norm(S @ y - lam * Ky) / np.linalg.norm(Ky))


def largest_pencil_eigenvalue(
    S: SymTridiagonal,
    K: SymTridiagonal,
    tol: float = 1e-8,
    maxiter: int = 10_000,
    power_steps: int = 30,
) -> PencilResult:
    """Largest eigenvalue of S y = lam K y (K SPD).

    Starts with power iteration on K^{-1} S from the all-ones vector, which gives
    a Rayleigh quotient below the top eigenvalue.  A shift tau is then pushed up
    until tau K - S is positive definite (so tau is certified to lie above the
    spectrum) and inverse iteration with (tau K - S)^{-1} K converges to the top
    eigenvalue.  The shift is tightened toward the running Rayleigh quotient
    whenever a tighter value still passes the definiteness test.
    """
    n = K.size
    if S.is_zero():
        y = np.ones(n) / np.sqrt(K.quad(np.ones(n)))
        return PencilResult(0.0, y, 0, 0.0, True)
    if np.any(K.diag <= 0):
        raise np.linalg.LinAlgError("K is not positive definite")
    # symmetric Jacobi scaling; graded radial meshes span many orders of magnitude
    d = 1.0 / np.sqrt(K.diag)
    K = _scaled(K, d)
    S = _scaled(S, d)
    # unit-size S keeps the shifted solves clear of under- and overflow
    size = max(float(np.max(np.abs(S.diag))), float(np.max(np.abs(S.off), initial=0.0)))
    if size < 1e-290:  # indistinguishable from zero next to the unit diagonal of K
        y = d / np.sqrt(float(d @ (_scaled(K, 1.0 / d) @ d)))
        return PencilResult(0.0, y, 0, size, True)
    result = _largest(S * (1.0 / size), K, tol, maxiter, power_steps, 1.0 / size)
    result.value *= size
    result.residual *= size
    y = d * result.vector
    result.vector = y / np.sqrt(float(y @ (_scaled(K, 1.0 / d) @ y)))
    return result


def _scaled(A: SymTridiagonal, d: np.ndarray) -> SymTridiagonal:
    return SymTridiagonal(d * A.diag * d, d[:-1] * A.off * d[1:])


def _largest(S, K, tol, maxiter, power_steps, unit=1.0) -> PencilResult:
    """Core iteration; ``unit`` is the size of 1 in the caller's units of S."""
    n = K.size
    Kf = cholesky(K)

    y = np.ones(n)
    y /= np.sqrt(K.quad(y))
    its = 0
    best = _rayleigh(S, K, y)
    for _ in range(power_steps):
        z = cho_solve(Kf, S @ y)
        nz = np.sqrt(K.quad(z))
        if nz == 0:
            break
        y = z / nz
        its += 1
        best = max(best, _rayleigh(S, K, y))
    lam = _rayleigh(S, K, y)
    scale = max(abs(lam), float(np.max(np.abs(S.diag) / K.diag)), 1e-300)

    delta = 1e-3 * scale
    factor = None
    while factor is None:
        tau = best + delta
        try:
            factor = cholesky(tau * K - S)
        except np.linalg.LinAlgError:
            delta *= 4.0
            if delta > 1e12 * scale:
                raise ConvergenceError("could not bracket the top of the pencil spectrum")

    # a generic start: the power vector may be an exact eigenvector for the
    # bottom of the spectrum, from which inverse iteration cannot escape
    rng = np.random.default_rng(0)
    y = np.ones(n) + 0.5 * rng.standard_normal(n)
    y /= np.sqrt(K.quad(y))
    prev = None
    res = np.inf
    while its < maxiter:
        z = cho_solve(factor, K @ y)
        y = z / np.sqrt(K.quad(z))
        its += 1
        lam = _rayleigh(S, K, y)
        best = max(best, lam)
        res = _residual(S, K, y, lam)
        size = max(unit, abs(lam))
        if prev is not None and abs(lam - prev) <= tol * size and res <= tol * size:
            # certify: nothing of the spectrum may sit clearly above lam
            margin = max(100 * res, tol * size, 1e-12 * scale)
            if is_positive_definite((lam + margin) * K - S):
                return PencilResult(lam, y, its, res, True)
            best = lam + margin
            fresh = np.ones(n) + 0.5 * rng.standard_normal(n)
            y = fresh - (y @ (K @ fresh)) * y
            y /= np.sqrt(K.quad(y))
            prev = None
            continue
        prev = lam
        # tighten the shift when the current gap is loose relative to the residual
        gap = tau - best
        if gap > 10 * res + 1e-14 * scale and its % 5 == 0:
            trial = best + max(gap / 8, 2 * res, 1e-13 * scale)
            try:
                factor_new = cholesky(trial * K - S)
            except np.linalg.LinAlgError:
                pass
            else:
                tau, factor = trial, factor_new
    return PencilResult(lam, y, its, res, False)


def smallest_pencil_eigenvalue(S, K, **kw) -> PencilResult:
    r = largest_pencil_eigenvalue(-S, K, **kw)
    return PencilResult(-r.value, r.vector, r.iterations, r.residual, r.converged)


def dense_pencil_eigenvalues(S: SymTridiagonal, K: SymTridiagonal) -> np.ndarray:
    """All pencil eigenvalues by a dense generalized symmetric solve (test oracle)."""
    if K.size > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to {DENSE_LIMIT} unknowns")
    return sla.eigh(S.to_dense(), K.to_dense(), eigvals_only=True)
