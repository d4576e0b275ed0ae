"""Positive solutions of -(w a u')'/w = sigma u: the mollified exhaustion, the
logarithmic (Riccati) transform in both directions, the critical sweep and
the gauge problem on the unit interval.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate as sint
from scipy.sparse.linalg import LinearOperator, gmres

from . import linalg
from .diagnostics import caccioppoli_ratio, doubling_constant, log_caccioppoli_ratio
from .forms import (
    IDENTITY,
    EllipticCoeff,
    assemble,
    estimate_lower_form_bound,
    estimate_upper_form_bound,
    multiplier_norm,
)
from .mesh import (
    FLAT,
    ExhaustionSpec,
    Field,
    Mesh,
    Weight,
    build_graded_mesh,
    build_uniform_mesh,
    enumerate_balls,
    hat,
    interval_quadrature,
)
from .potential import (
    Atomic,
    Divergence,
    MollifierSpec,
    Pointwise,
    Potential,
    SumPotential,
    load_vector,
    mollify,
)

POSITIVITY_TOL = 1e-10


class CoercivityError(ValueError):
    """The measured upper form bound is not below 1."""

    def __init__(self, msg, lam=None):
        super().__init__(msg)
        self.lam = lam


class PositivityError(ValueError):
    """A discrete solution dipped below zero (maximum-principle violation)."""


class GaugeDivergenceError(ValueError):
    """The Neumann series does not converge; ``partial_sums`` holds the trace."""

    def __init__(self, msg, partial_sums):
        super().__init__(msg)
        self.partial_sums = partial_sums


def _has_atoms(sigma: Potential) -> bool:
    if isinstance(sigma, SumPotential):
        return any(_has_atoms(p) for p in sigma.parts)
    return isinstance(sigma, Atomic)


def ball_mean_square(v: Field, ball: tuple[float, float]) -> float:
    """avg over B = B(center, radius) of v^2 (exact for P1 fields)."""
    c, r = ball
    pts, wts = interval_quadrature(v.mesh, c - r, c + r)
    return float(np.sum(v(pts) ** 2 * wts) / np.sum(wts))


def _linear_solve(A: linalg.SymTridiagonal, b: np.ndarray, method: str) -> np.ndarray:
    if method == "cholesky":
        return linalg.solve_spd(A, b)
    if method == "pcg":
        return linalg.pcg(A, b, tol=1e-10)[0]
    if method == "dense":
        return linalg.solve_dense(A, b)
    raise ValueError(f"unknown linear solver {method!r}")


@dataclass
class LevelSolution:
    u: Field
    lambda_upper: float
    min_u: float
    normalization: float  # avg_B u^2 after scaling (1 up to rounding)
    factor: float  # u = v / factor

    @property
    def v(self) -> Field:
        return self.u * self.factor


def solve_level(
    mesh: Mesh,
    coeff: EllipticCoeff,
    sigma: Potential,
    ball: tuple[float, float],
    method: str = "cholesky",
    lam: Optional[float] = None,
) -> LevelSolution:
    """Solve (K - S) w = s, set v = w + 1 and normalize u = v / (avg_B v^2)^{1/2}.

    Refuses when the measured upper form bound is >= 1; ``lam`` skips the
    measurement when the caller already knows it.
    """
    if _has_atoms(sigma):
        raise ValueError("atomic potentials must be mollified before the exhaustion solve")
    mats = assemble(mesh, coeff, sigma)
    if lam is None:
        lam = estimate_upper_form_bound(mats).lambda_upper
    if not lam < 1:
        raise CoercivityError(f"measured upper form bound {lam:.6g} >= 1; coercivity lost", lam)
    s = load_vector(sigma, mesh)
    w = np.zeros(mesh.n_nodes)
    w[1:-1] = _linear_solve(mats.K - mats.S, s[1:-1], method)
    v = Field(mesh, w + 1.0)
    lo = float(v.values.min())
    if lo < -POSITIVITY_TOL:
        raise PositivityError(
            f"solution reaches {lo:.3e} < 0; refine the mesh (maximum principle violated)"
        )
    factor = math.sqrt(ball_mean_square(v, ball))
    u = v * (1.0 / factor)
    return LevelSolution(u, float(lam), float(u.values.min()), ball_mean_square(u, ball), factor)


# ---------------------------------------------------------------- exhaustion


@dataclass
class LevelRecord:
    level: int
    interval: tuple[float, float]
    eps: float
    lambda_upper: float
    min_u: float
    normalization: float
    drift: Optional[float]
    caccioppoli: float
    log_caccioppoli: float
    doubling: float

    def to_record(self) -> dict:
        return dict(self.__dict__, interval=list(self.interval))


@dataclass
class ExhaustionSolveReport:
    levels: list[LevelRecord]
    solutions: list[Field] = field(repr=False)
    ball: tuple[float, float]
    common: tuple[float, float]
    converged: bool
    converged_level: Optional[int]
    status: str
    weak_residual: float

    @property
    def u(self) -> Field:
        return self.solutions[-1]

    @property
    def min_u(self) -> float:
        return min(r.min_u for r in self.levels)

    @property
    def drifts(self) -> list[float]:
        return [r.drift for r in self.levels if r.drift is not None]

    def to_record(self, include_fields: bool = False) -> dict:
        rec = {
            "levels": [r.to_record() for r in self.levels],
            "ball": list(self.ball),
            "common": list(self.common),
            "converged": self.converged,
            "converged_level": self.converged_level,
            "status": self.status,
            "weak_residual": self.weak_residual,
            "min_u": self.min_u,
        }
        if include_fields:
            rec["u"] = {"nodes": self.u.mesh.nodes.tolist(), "values": self.u.values.tolist()}
        return rec

    def trace_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf)
        cols = ["level", "eps", "lambda_upper", "min_u", "drift", "caccioppoli",
                "log_caccioppoli", "doubling"]
        out.writerow(cols)
        for r in self.levels:
            out.writerow([getattr(r, c) if getattr(r, c) is not None else "" for c in cols])
        return buf.getvalue()


def _l2_difference(fine: Field, coarse: Field) -> float:
    mesh = coarse.mesh
    diff = fine(mesh.quad_points) - coarse.at_quad
    return math.sqrt(float(np.sum(diff**2 * mesh.quad_weights)))


def _weak_residual(u: Field, coeff: EllipticCoeff, sigma: Potential) -> float:
    mats = assemble(u.mesh, coeff, sigma)
    r = (mats.K_full @ u.values - mats.S_full @ u.values)[1:-1]
    scale = np.max(np.abs(mats.K_full @ u.values)[1:-1]) + np.max(np.abs(mats.S_full @ u.values)[1:-1])
    return float(np.max(np.abs(r)) / scale) if scale > 0 else float(np.max(np.abs(r)))


def solve_exhaustion(
    spec: ExhaustionSpec,
    coeff: EllipticCoeff,
    sigma: Potential,
    elements: int = 1000,
    weight: Weight = FLAT,
    ball: Optional[tuple[float, float]] = None,
    mollified: bool = True,
    drift_tol: float = 1e-4,
    method: str = "cholesky",
) -> ExhaustionSolveReport:
    """Run ``solve_level`` on every level with sigma mollified at eps_j.

    Each level gets its own mesh with ``elements`` elements (log-uniform when the
    exhaustion is on a log scale).  Per level the Caccioppoli ratios for a fixed
    tent psi around the ball and the doubling constant of u_j^2 on level 1 are
    recorded, along with the L^2 drift between consecutive levels.
    """
    if _has_atoms(sigma) and not mollified:
        raise ValueError("atomic potentials must be mollified before the exhaustion solve")
    ball = ball or spec.default_ball()
    c, R = ball
    common = spec.levels[0]
    psi_support = (c - 4 * R, c + 4 * R)
    # the mollifier only needs the extent and the weight of the outer domain
    outer = Mesh(np.array([spec.outer[0], 0.5 * sum(spec.outer), spec.outer[1]]), weight)
    records: list[LevelRecord] = []
    fields: list[Field] = []
    sigmas: list[Potential] = []
    converged_level = None
    status = "max levels reached"
    for j, ((aj, bj), eps) in enumerate(zip(spec.levels, spec.eps), start=1):
        if spec.scale == "log":
            mesh = build_graded_mesh(aj, bj, elements, weight)
        else:
            mesh = build_uniform_mesh(aj, bj, elements, weight)
        sj = mollify(sigma, MollifierSpec(eps), outer, (aj, bj)) if mollified else sigma
        sol = solve_level(mesh, coeff, sj, ball, method=method)
        u = sol.u
        drift = _l2_difference(u, fields[-1]) if fields else None
        psi = hat(mesh, *psi_support)
        records.append(
            LevelRecord(
                j, (aj, bj), eps, sol.lambda_upper, sol.min_u, sol.normalization, drift,
                caccioppoli_ratio(u, psi, coeff),
                log_caccioppoli_ratio(u, psi),
                doubling_constant(u.map(np.square), mesh, common,
                                  enumerate_balls(mesh, common, 4, 16)).value,
            )
        )
        fields.append(u)
        sigmas.append(sj)
        if drift is not None and drift < drift_tol and converged_level is None:
            converged_level = j
            status = f"drift below {drift_tol:g} at level {j}"
        d = [r.drift for r in records if r.drift is not None]
        if converged_level is None and len(d) >= 3 and d[-1] >= d[-2] >= d[-3]:
            status = f"drift non-decreasing over levels {j - 2}..{j}"
    return ExhaustionSolveReport(
        records,
        fields,
        ball,
        common,
        converged_level is not None,
        converged_level,
        status,
        _weak_residual(fields[-1], coeff, sigmas[-1]),
    )


# ----------------------------------------------------------- log / Riccati


@dataclass
class LogTransform:
    v: Field
    energies: dict = field(default_factory=dict)


def log_gradient_energy(u: Field, lo: float, hi: float) -> float:
    """int_lo^hi |u'|^2 / u^2 dmu."""
    pts, wts = interval_quadrature(u.mesh, lo, hi)
    grad = u.gradient[u.mesh.element_of(pts)]
    return float(np.sum(grad**2 / u(pts) ** 2 * wts))


def log_transform(u: Field, subdomains: Sequence[tuple[float, float]] = ()) -> LogTransform:
    """v = log u nodewise, plus int_U |u'|^2/u^2 for each requested U."""
    if np.any(u.values <= 0):
        raise ValueError("log transform needs a positive field")
    v = u.map(np.log)
    return LogTransform(v, {tuple(U): log_gradient_energy(u, *U) for U in subdomains})


@dataclass
class RiccatiReport:
    max_residual: float  # max_i |R_i| / s_i
    max_abs: float
    profile: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)

    def to_record(self) -> dict:
        return {"max_residual": self.max_residual, "max_abs": self.max_abs}


def _flux_terms(v: Field, coeff: EllipticCoeff):
    mesh = v.mesh
    aw = np.sum(coeff.at_quad(mesh) * mesh.quad_weights, axis=1)  # int_e a dmu
    dv = v.gradient
    flux = aw * dv / mesh.h
    lin_left, lin_right = -flux, flux  # int a v' phi_i'
    quad = 0.5 * aw * dv**2  # midpoint value 1/2 of either hat
    return lin_left, lin_right, quad


def riccati_residual(
    v: Field, coeff: EllipticCoeff, sigma: Potential, mesh: Optional[Mesh] = None
) -> RiccatiReport:
    """Weak residual of -(a v')' = a v'^2 + sigma against every interior hat.

    R_i = int a v' phi_i' - int a v'^2 phi_i - <sigma, phi_i>, the quadratic
    term with element-midpoint hat values.  Each R_i is divided by the sum of the
    magnitudes of its three terms.
    """
    if mesh is not None and mesh is not v.mesh:
        raise ValueError("v lives on a different mesh")
    mesh = v.mesh
    lin_l, lin_r, quad = _flux_terms(v, coeff)
    lin = np.zeros(mesh.n_nodes)
    lin[:-1] += lin_l
    lin[1:] += lin_r
    lin_abs = np.zeros(mesh.n_nodes)
    lin_abs[:-1] += np.abs(lin_l)
    lin_abs[1:] += np.abs(lin_r)
    q = np.zeros(mesh.n_nodes)
    q[:-1] += quad
    q[1:] += quad
    s = load_vector(sigma, mesh)
    R = (lin - q - s)[1:-1]
    scale = (lin_abs + q + np.abs(s))[1:-1]
    rel = np.divide(np.abs(R), scale, out=np.zeros_like(R), where=scale > 0)
    return RiccatiReport(float(rel.max()), float(np.abs(R).max()), R, scale)


def riccati_potential(v: Field, coeff: EllipticCoeff) -> SumPotential:
    """sigma = -div(a v' x/r) - a v'^2 for element-constant v'."""
    mesh = v.mesh
    dv = v.gradient

    def slope(r):
        return dv[mesh.element_of(r)]

    g = Divergence(lambda r: -coeff(r) * slope(r), "-a grad v")
    p = Pointwise(lambda r: -coeff(r) * slope(r) ** 2, "-a |grad v|^2")
    return SumPotential((g, p), "riccati")


@dataclass
class RiccatiBounds:
    lambda_upper: float
    lambda_lower: float
    multiplier_C1: float
    bound: float
    passed: bool

    def to_record(self) -> dict:
        return dict(self.__dict__)


def form_bounds_from_riccati(
    v: Field, coeff: EllipticCoeff = IDENTITY, mesh: Optional[Mesh] = None, tol: float = 1e-8
) -> RiccatiBounds:
    """Form bounds of the potential a Riccati solution v defines.

    With a scalar coefficient the upper bound must not exceed 1; Lambda is
    reported together with the squared multiplier norm of a v'.
    """
    if mesh is not None and mesh is not v.mesh:
        raise ValueError("v lives on a different mesh")
    mesh = v.mesh
    if not np.any(v.gradient):
        return RiccatiBounds(0.0, 0.0, 0.0, 1.0, True)
    sigma = riccati_potential(v, coeff)
    mats = assemble(mesh, coeff, sigma)
    lam = estimate_upper_form_bound(mats).lambda_upper
    Lam = estimate_lower_form_bound(mats).lambda_lower
    dv = v.gradient
    C1 = multiplier_norm(lambda r: coeff(r) * dv[mesh.element_of(r)], mesh)
    bound = 1.0  # scalar coefficients give a symmetric problem
    return RiccatiBounds(lam, Lam, C1, bound, lam <= bound + tol and math.isfinite(Lam))


# ------------------------------------------------------------ critical sweep


def dirichlet_energy(u: Field, lo: float, hi: float, coeff: EllipticCoeff = IDENTITY) -> float:
    """int_lo^hi a |u'|^2 dmu."""
    pts, wts = interval_quadrature(u.mesh, lo, hi)
    grad = u.gradient[u.mesh.element_of(pts)]
    return float(np.sum(coeff(pts) * grad**2 * wts))


def l2_angle(u: Field, target: Callable) -> float:
    """Angle between u and target in L^2(dmu)."""
    mesh = u.mesh
    t = np.asarray(target(mesh.quad_points), dtype=float)
    W = mesh.quad_weights
    uu = np.sum(u.at_quad**2 * W)
    tt = np.sum(t**2 * W)
    ut = np.sum(u.at_quad * t * W)
    return float(math.acos(min(1.0, abs(ut) / math.sqrt(uu * tt))))


@dataclass
class SweepRow:
    lam: float
    sup_u: float
    min_u: float
    energies: list[float]
    doubling: Optional[float]
    angle: Optional[float]

    def to_record(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SweepReport:
    sigma_lambda: float
    near_critical: bool
    annuli: list[tuple[float, float]]
    rows: list[SweepRow]
    failure: Optional[str] = None

    def energy_growth(self, k: int = 0) -> float:
        """Last-row energy on annulus k divided by the first-row energy."""
        e0 = self.rows[0].energies[k]
        return self.rows[-1].energies[k] / e0 if e0 > 0 else math.inf

    def to_record(self) -> dict:
        return {
            "sigma_lambda": self.sigma_lambda,
            "near_critical": self.near_critical,
            "annuli": [list(a) for a in self.annuli],
            "rows": [r.to_record() for r in self.rows],
            "failure": self.failure,
        }


def critical_sweep(
    sigma: Potential,
    coeff: EllipticCoeff,
    mesh: Mesh,
    lambdas: Sequence[float],
    ball: tuple[float, float],
    annuli: Sequence[tuple[float, float]] = (),
    doubling_U: Optional[tuple[float, float]] = None,
    target: Optional[Callable] = None,
) -> SweepReport:
    """Solve with lambda_j sigma for lambda_j -> 1 and track the normalized solutions.

    ``near_critical`` records whether the measured form bound of sigma is within
    2% of 1 (the intended use).  A level whose lambda_j sigma is no longer
    coercive on the mesh ends the sweep with ``failure`` set.
    """
    mats = assemble(mesh, coeff, sigma)
    lam_sigma = estimate_upper_form_bound(mats).lambda_upper
    report = SweepReport(lam_sigma, abs(lam_sigma - 1) <= 0.02, [tuple(a) for a in annuli], [])
    for lj in lambdas:
        try:
            sol = solve_level(mesh, coeff, sigma.scaled(lj), ball, lam=lj * lam_sigma)
        except CoercivityError as exc:
            report.failure = f"lambda_j={lj:g}: {exc} (mesh too coarse?)"
            break
        u = sol.u
        dbl = None
        if doubling_U is not None:
            dbl = doubling_constant(u.map(np.square), mesh, doubling_U,
                                    enumerate_balls(mesh, doubling_U, 4, 16)).value
        report.rows.append(
            SweepRow(
                float(lj),
                float(u.values.max()),
                float(u.values.min()),
                [dirichlet_energy(u, lo, hi, coeff) for lo, hi in annuli],
                dbl,
                l2_angle(u, target) if target is not None else None,
            )
        )
    return report


# --------------------------------------------------------------------- gauge


def green_unit_interval(x, y):
    """Dirichlet Green kernel of -d^2/dx^2 on (0, 1)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.where(x <= y, x * (1 - y), y * (1 - x))


def _check_gauge_potential(sigma: Potential):
    parts = sigma.parts if isinstance(sigma, SumPotential) else (sigma,)
    for p in parts:
        if not isinstance(p, (Pointwise, Atomic)):
            raise TypeError("the gauge solver takes pointwise or atomic potentials")


class GreenOperator:
    """u -> int G(., y) u(y) dsigma(y) at the nodes, for nodal P1 u.

    The kernel is separable, G(x, y) = min(x, y) (1 - max(x, y)), and every node
    splits the elements cleanly, so one prefix and one suffix sum give the
    product in O(n).
    """

    def __init__(self, sigma: Potential, mesh: Mesh):
        _check_gauge_potential(sigma)
        if mesh.a != 0.0 or mesh.b != 1.0 or mesh.weight.is_radial:
            raise ValueError("the Green operator lives on the flat unit interval")
        self.mesh = mesh
        parts = sigma.parts if isinstance(sigma, SumPotential) else (sigma,)
        self.sw = np.zeros(mesh.quad_points.shape)
        self.atoms = []
        for p in parts:
            if isinstance(p, Pointwise):
                self.sw = self.sw + p.at_quad(mesh) * mesh.quad_weights
            else:
                for xk, m in p.atoms:
                    if not 0 < xk < 1:
                        raise ValueError("atoms must lie inside (0, 1)")
                    self.atoms.append((xk, m))

    @property
    def shape(self):
        n = self.mesh.n_nodes
        return n, n

    def __matmul__(self, u: np.ndarray) -> np.ndarray:
        mesh = self.mesh
        x = mesh.nodes
        left, right = mesh.basis
        y = mesh.quad_points
        f = self.sw * (u[:-1, None] * left + u[1:, None] * right)
        a = np.sum((1.0 - y) * f, axis=1)  # elements right of the node: G = x (1 - y)
        b = np.sum(y * f, axis=1)  # elements left of the node: G = y (1 - x)
        suffix = np.concatenate((np.cumsum(a[::-1])[::-1], [0.0]))
        prefix = np.concatenate(([0.0], np.cumsum(b)))
        out = x * suffix + (1.0 - x) * prefix
        for xk, m in self.atoms:
            out += m * green_unit_interval(x, xk) * np.interp(xk, x, u)
        return out


def kernel_matrix(sigma: Potential, mesh: Mesh) -> np.ndarray:
    """Dense matrix of the Green operator (small meshes)."""
    T = GreenOperator(sigma, mesh)
    n = mesh.n_nodes
    if n > 4001:
        raise ValueError("dense kernel matrix limited to 4001 nodes")
    return np.column_stack([T @ e for e in np.eye(n)])


@dataclass
class GaugeReport:
    u: Field
    method: str
    partial_sums: list[float]
    fixed_point_residual: float
    lambda_upper: float
    value_at_half: float
    min_u: float
    interior_energy: float
    method_gap: Optional[float] = None
    monotone_series: Optional[bool] = None

    def to_record(self, include_fields: bool = False) -> dict:
        rec = {
            "method": self.method,
            "value_at_half": self.value_at_half,
            "min_u": self.min_u,
            "fixed_point_residual": self.fixed_point_residual,
            "lambda_upper": self.lambda_upper,
            "interior_energy": self.interior_energy,
            "method_gap": self.method_gap,
            "monotone_series": self.monotone_series,
            "series_terms": len(self.partial_sums),
        }
        if include_fields:
            rec["u"] = self.u.values.tolist()
            rec["partial_sums"] = self.partial_sums
        return rec


def _neumann(T, nodes, tol, max_terms):
    u = np.ones(nodes.size)
    sums = [float(np.interp(0.5, nodes, u))]
    monotone = True
    for _ in range(max_terms):
        nxt = 1.0 + T @ u
        if np.any(nxt < u - 1e-13 * np.abs(u).max()):
            monotone = False
        change = float(np.max(np.abs(nxt - u)))
        u = nxt
        sums.append(float(np.interp(0.5, nodes, u)))
        if not np.all(np.isfinite(u)) or change > 1e12:
            raise GaugeDivergenceError("Neumann series diverges", sums)
        if change < tol:
            return u, sums, monotone
    raise GaugeDivergenceError(f"Neumann series not converged after {max_terms} terms", sums)


def solve_gauge(
    sigma: Potential,
    elements: int = 1000,
    method: str = "fem",
    tol: float = 1e-8,
    max_terms: int = 100_000,
    cross_check: bool = True,
) -> GaugeReport:
    """Gauge u1 with -u1'' = sigma u1 on (0, 1), u1 = 1 at both ends.

    Methods: ``fem`` solves (K - S) w = s for w = u1 - 1; ``neumann_series``
    iterates u <- 1 + G(sigma u) from u = 1 with the exact Green kernel;
    ``fixed_point`` solves (I - T) u = 1 directly.  With ``cross_check`` the
    Neumann series (or FEM, when it is the primary) is run too and the sup-norm
    gap is reported.
    """
    _check_gauge_potential(sigma)
    mesh = build_uniform_mesh(0.0, 1.0, elements)
    mats = assemble(mesh, IDENTITY, sigma)
    lam = estimate_upper_form_bound(mats).lambda_upper
    T = GreenOperator(sigma, mesh)
    if not lam < 1 and method != "neumann_series":
        raise CoercivityError(f"measured upper form bound {lam:.6g} >= 1", lam)
    sums: list[float] = []
    monotone = None
    if method == "fem":
        s = load_vector(sigma, mesh)
        vals = np.ones(mesh.n_nodes)
        vals[1:-1] += linalg.solve_spd(mats.K - mats.S, s[1:-1])
    elif method == "neumann_series":
        vals, sums, monotone = _neumann(T, mesh.nodes, tol, max_terms)
    elif method == "fixed_point":
        n = mesh.n_nodes
        op = LinearOperator((n, n), matvec=lambda u: u - T @ u, dtype=float)
        vals, info = gmres(op, np.ones(n), rtol=1e-13, atol=0.0, restart=50, maxiter=200)
        if info != 0:
            raise linalg.ConvergenceError("fixed-point solve did not converge", best=vals)
    else:
        raise ValueError(f"unknown gauge method {method!r}")
    u = Field(mesh, vals)
    gap = None
    if cross_check and lam < 1:
        if method == "fem":
            other, sums, monotone = _neumann(T, mesh.nodes, tol, max_terms)
        else:
            s = load_vector(sigma, mesh)
            other = np.ones(mesh.n_nodes)
            other[1:-1] += linalg.solve_spd(mats.K - mats.S, s[1:-1])
        gap = float(np.max(np.abs(other - vals)))
    resid = float(np.max(np.abs(vals - 1.0 - T @ vals)))
    return GaugeReport(
        u, method, sums, resid, float(lam), float(u(0.5)), float(vals.min()),
        dirichlet_energy(u, 0.25, 0.75), gap, monotone,
    )


def check_gauge_condition(
    sigma: Potential, c: float, x0: float, reading: str = "literal"
) -> float:
    """int m(x) exp(c I(x) / m(x)) dsigma(x) with m = min(1, G(., x0)) on (0, 1).

    ``reading="literal"`` uses I(x) = int m dsigma (a constant).  The grouping in
    the source display is ambiguous; ``reading="green"`` uses
    I(x) = int G(x, y) m(y) dsigma(y) instead.  Returns ``inf`` when the
    integral diverges numerically.
    """
    if reading not in ("literal", "green"):
        raise ValueError("reading must be 'literal' or 'green'")
    _check_gauge_potential(sigma)
    parts = sigma.parts if isinstance(sigma, SumPotential) else (sigma,)

    def m(x):
        return np.minimum(1.0, green_unit_interval(x, x0))

    densities = [p for p in parts if isinstance(p, Pointwise)]
    atoms = [a for p in parts if isinstance(p, Atomic) for a in p.atoms]
    for p in densities:
        xs = np.linspace(0, 1, 2001)[1:-1]
        if np.any(p(xs) < 0):
            raise ValueError("the gauge condition needs sigma >= 0")
    if any(mass < 0 for _, mass in atoms):
        raise ValueError("the gauge condition needs sigma >= 0")

    def dsigma_integral(f):
        total = sum(mass * float(f(x)) for x, mass in atoms)
        for p in densities:
            for lo, hi in ((0.0, x0), (x0, 1.0)):
                val, _ = sint.quad(lambda t: float(f(t)) * float(p(t)), lo, hi, limit=200)
                total += val
        return total

    if reading == "literal":
        I_const = dsigma_integral(m)
        inner = lambda x: I_const
    else:
        inner = lambda x: dsigma_integral(lambda y: green_unit_interval(x, y) * m(y))

    def integrand(x):
        mx = float(m(x))
        if mx <= 0:
            return 0.0 if c * inner(x) == 0 else math.inf
        arg = c * inner(x) / mx
        if arg > 700:
            return math.inf
        return mx * math.exp(arg)

    with np.errstate(all="ignore"):
        try:
            val = dsigma_integral(integrand)
        except (OverflowError, ValueError):
            return math.inf
    return float(val) if math.isfinite(val) else math.inf
