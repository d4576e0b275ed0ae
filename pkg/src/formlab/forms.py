"""Discrete Dirichlet and potential forms, and the form-bound estimators.

The sharp constants in

    -Lambda int a h'^2 dmu  <=  <sigma, h^2>  <=  lambda int a h'^2 dmu

over P1 functions vanishing at both ends are the extreme eigenvalues of the
pencil S h = mu K h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .linalg import (
    DENSE_LIMIT,
    PencilResult,
    SymTridiagonal,
    dense_pencil_eigenvalues,
    largest_pencil_eigenvalue,
    smallest_pencil_eigenvalue,
)
from .mesh import Field, Mesh
from .potential import Divergence, Pointwise, Potential, load_vector, potential_matrix


@dataclass(frozen=True, eq=False)
class EllipticCoeff:
    """Scalar coefficient a(r) with declared bounds m <= a <= M.

    ``matrix`` optionally carries a full 3x3 matrix field for the pointwise
    three-dimensional checker; it plays no role in assembly.
    """

    a: Union[float, Callable] = 1.0
    m: float = 1.0
    M: float = 1.0
    matrix: Optional[Callable] = None

    def __post_init__(self):
        if not 0 < self.m <= self.M < math.inf:
            raise ValueError(f"need 0 < m <= M < inf, got m={self.m}, M={self.M}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if callable(self.a):
            return np.broadcast_to(np.asarray(self.a(x), dtype=float), x.shape)
        return np.full(x.shape, float(self.a))

    def at_quad(self, mesh: Mesh) -> np.ndarray:
        vals = self(mesh.quad_points)
        tol = 1e-12 * self.M
        if not np.all(np.isfinite(vals)) or vals.min() < self.m - tol or vals.max() > self.M + tol:
            raise ValueError(
                f"coefficient leaves [{self.m}, {self.M}] on the mesh "
                f"(range [{vals.min():.6g}, {vals.max():.6g}])"
            )
        return vals

    @property
    def is_constant(self) -> bool:
        return not callable(self.a)


IDENTITY = EllipticCoeff()


def stiffness(mesh: Mesh, coeff: EllipticCoeff = IDENTITY) -> SymTridiagonal:
    """Full-node stiffness int a phi_i' phi_j' dmu."""
    aw = np.sum(coeff.at_quad(mesh) * mesh.quad_weights, axis=1) / mesh.h**2
    diag = np.zeros(mesh.n_nodes)
    diag[:-1] += aw
    diag[1:] += aw
    return SymTridiagonal(diag, -aw)


@dataclass(frozen=True, eq=False)
class FormMatrices:
    mesh: Mesh
    coeff: EllipticCoeff
    sigma: Potential
    K: SymTridiagonal
    S: SymTridiagonal
    K0: SymTridiagonal
    K_full: SymTridiagonal = field(repr=False)
    S_full: SymTridiagonal = field(repr=False)

    @property
    def size(self) -> int:
        return self.K.size

    def extend(self, y: np.ndarray) -> Field:
        """Interior vector -> Field vanishing at both ends."""
        vals = np.zeros(self.mesh.n_nodes)
        vals[1:-1] = y
        return Field(self.mesh, vals)

    def load(self) -> np.ndarray:
        return load_vector(self.sigma, self.mesh)


def assemble(mesh: Mesh, coeff: EllipticCoeff, sigma: Potential) -> FormMatrices:
    """Assemble K (a-weighted), S (potential) and K0 (a = 1), Dirichlet rows removed."""
    if mesh.n_nodes < 3:
        raise ValueError("need at least 3 nodes")
    K_full = stiffness(mesh, coeff)
    K0_full = K_full if coeff.is_constant and float(coeff.a) == 1.0 else stiffness(mesh, IDENTITY)
    S_full = potential_matrix(sigma, mesh)
    for name, A in (("K", K_full), ("S", S_full)):
        if not (np.all(np.isfinite(A.diag)) and np.all(np.isfinite(A.off))):
            raise ValueError(f"non-finite entries in {name}")
    return FormMatrices(
        mesh, coeff, sigma, K_full.interior(), S_full.interior(), K0_full.interior(), K_full, S_full
    )


@dataclass
class FormBoundReport:
    lambda_upper: Optional[float]
    lambda_lower: Optional[float]
    vector: Field
    iterations: int
    residual: float
    h: float
    converged: bool = True
    method: str = "inverse-iteration"

    def to_record(self, include_vector: bool = False) -> dict:
        rec = {
            "lambda_upper": self.lambda_upper,
            "lambda_lower": self.lambda_lower,
            "iterations": self.iterations,
            "residual": self.residual,
            "h": self.h,
            "converged": self.converged,
            "method": self.method,
        }
        if include_vector:
            rec["vector"] = self.vector.values.tolist()
        return rec


def _pencil(S, K, which, tol, maxiter, method) -> PencilResult:
    if method == "dense":
        if K.size > DENSE_LIMIT:
            raise ValueError(f"dense method limited to {DENSE_LIMIT} unknowns")
        from scipy import linalg as sla

        vals, vecs = sla.eigh(S.to_dense(), K.to_dense())
        i = -1 if which == "upper" else 0
        return PencilResult(float(vals[i]), vecs[:, i], 1, 0.0, True)
    if which == "upper":
        return largest_pencil_eigenvalue(S, K, tol=tol, maxiter=maxiter)
    return smallest_pencil_eigenvalue(S, K, tol=tol, maxiter=maxiter)


def estimate_upper_form_bound(
    mats: FormMatrices, tol: float = 1e-8, maxiter: int = 10_000, method: str = "iterative"
) -> FormBoundReport:
    """Largest eigenvalue lambda of S h = lambda K h, with its extremal h.

    A run that hits ``maxiter`` still returns the best estimate with
    ``converged=False``.
    """
    r = _pencil(mats.S, mats.K, "upper", tol, maxiter, method)
    return FormBoundReport(
        r.value, None, mats.extend(r.vector), r.iterations, r.residual, mats.mesh.hmax,
        r.converged, method,
    )


def estimate_lower_form_bound(
    mats: FormMatrices, tol: float = 1e-8, maxiter: int = 10_000, method: str = "iterative"
) -> FormBoundReport:
    """Lambda = max(0, -smallest eigenvalue of S h = mu K h)."""
    r = _pencil(mats.S, mats.K, "lower", tol, maxiter, method)
    return FormBoundReport(
        None, max(0.0, -r.value), mats.extend(r.vector), r.iterations, r.residual,
        mats.mesh.hmax, r.converged, method,
    )


def form_bounds(mats: FormMatrices, **kw) -> FormBoundReport:
    up = estimate_upper_form_bound(mats, **kw)
    lo = estimate_lower_form_bound(mats, **kw)
    return FormBoundReport(
        up.lambda_upper, lo.lambda_lower, up.vector, up.iterations + lo.iterations,
        max(up.residual, lo.residual), up.h, up.converged and lo.converged, up.method,
    )


def rayleigh_quotient(mats: FormMatrices, y: np.ndarray) -> float:
    return mats.S.quad(y) / mats.K.quad(y)


def dense_form_bounds(mats: FormMatrices) -> tuple[float, float]:
    """(lambda, Lambda) from a dense generalized eigensolve (oracle for small meshes)."""
    vals = dense_pencil_eigenvalues(mats.S, mats.K)
    return float(vals[-1]), max(0.0, -float(vals[0]))


def multiplier_norm(g: Callable, mesh: Mesh, tol: float = 1e-8) -> float:
    """Squared multiplier norm C1 = sup int h^2 g^2 dmu / int h'^2 dmu."""
    sq = Pointwise(lambda r: np.asarray(g(r), dtype=float) ** 2, "multiplier")
    M = potential_matrix(sq, mesh).interior()
    K0 = stiffness(mesh).interior()
    return max(0.0, largest_pencil_eigenvalue(M, K0, tol=tol).value)


@dataclass
class CertificateReport:
    passed: bool
    min_pairing: float
    max_abs_pairing: float
    scale: float
    profile: np.ndarray = field(repr=False)

    @property
    def equality_residual(self) -> float:
        """max |<r, phi_i>| relative to the size of the terms."""
        return self.max_abs_pairing / self.scale

    def to_record(self) -> dict:
        return {
            "passed": self.passed,
            "min_pairing": self.min_pairing,
            "max_abs_pairing": self.max_abs_pairing,
            "scale": self.scale,
            "equality_residual": self.equality_residual,
        }


def check_semibound_certificate(
    sigma: Potential, g: Callable, coeff: EllipticCoeff, mesh: Mesh, rtol: float = 1e-6
) -> CertificateReport:
    """Test sigma <= div(a Gamma) - a |Gamma|^2 against every interior hat.

    Gamma = g(r) x/r.  Pairings are divided by the hat's mass, so the profile
    reads like a pointwise value of div(a Gamma) - a |Gamma|^2 - sigma.
    """
    aq = coeff.at_quad(mesh)
    gq = np.broadcast_to(np.asarray(g(mesh.quad_points), dtype=float), aq.shape)
    W = mesh.quad_weights
    left, right = mesh.basis

    div_term = np.zeros(mesh.n_nodes)
    flux = np.sum(aq * gq * W, axis=1) / mesh.h  # -int a g phi' for left/right hats
    div_term[:-1] += flux
    div_term[1:] -= flux

    sq = aq * gq * gq * W
    quad_term = np.zeros(mesh.n_nodes)
    quad_term[:-1] += sq @ left
    quad_term[1:] += sq @ right

    s = load_vector(sigma, mesh)
    mass = np.zeros(mesh.n_nodes)
    mass[:-1] += W @ left
    mass[1:] += W @ right

    pairing = (div_term - quad_term - s)[1:-1] / mass[1:-1]
    scale = float(
        np.max((np.abs(div_term) + np.abs(quad_term) + np.abs(s))[1:-1] / mass[1:-1])
    )
    scale = max(scale, 1e-300)
    lo = float(pairing.min())
    return CertificateReport(lo >= -rtol * scale, lo, float(np.abs(pairing).max()), scale, pairing)


@dataclass
class SufficiencyReport:
    C1: float
    implied_lambda: float
    measured_lambda: float
    holds: bool

    def to_record(self) -> dict:
        return dict(self.__dict__)


def verify_sufficiency_constant(g: Callable, mesh: Mesh, slack: float = 1e-3) -> SufficiencyReport:
    """C1 = multiplier_norm(g); the form bound of div Gamma must not exceed 2 sqrt(C1)."""
    C1 = multiplier_norm(g, mesh)
    implied = 2.0 * math.sqrt(C1)
    mats = assemble(mesh, IDENTITY, Divergence(g, "div Gamma"))
    lam = max(0.0, estimate_upper_form_bound(mats).lambda_upper) if C1 > 0 else 0.0
    return SufficiencyReport(C1, implied, lam, lam <= implied + slack)


def quadratic_form_3d(matrix: Callable, points: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """A(x) xi . xi at each point (xi one vector per point)."""
    A = matrix(np.asarray(points, dtype=float))
    return np.einsum("...ij,...i,...j->...", A, xi, xi)
