"""Estimators for the local inequality constants of positive solutions.

Balls on radial meshes are shells {x - r < |y| < x + r} carrying the radial
measure; on flat meshes they are intervals.  Averages of P1 fields are
computed by splitting elements at the ball ends; pointwise functions go
through adaptive quadrature.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate as sint

from .forms import EllipticCoeff
from .mesh import BallScan, Field, Mesh, enumerate_balls, hat, interval_quadrature, sphere_area

Weightlike = Union[Field, Callable]


# ------------------------------------------------------------ ball averages


def _measure(mesh: Mesh, lo: float, hi: float) -> float:
    if mesh.weight.is_radial:
        n = mesh.weight.n
        return sphere_area(n) * (hi**n - lo**n) / n
    return hi - lo


def ball_average(f: Weightlike, mesh: Mesh, lo: float, hi: float, power: float = 1.0) -> float:
    """Average of f^power over (lo, hi) with respect to the mesh measure."""
    if isinstance(f, Field):
        pts, wts = interval_quadrature(mesh, lo, hi)
        vals = f(pts)
        if power != 1.0:
            vals = vals**power
        return float(np.sum(vals * wts) / np.sum(wts))
    weight = mesh.weight

    def integrand(x):
        v = float(f(x))
        return (v**power if power != 1.0 else v) * float(weight(x))

    val, _ = sint.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
    return val / _measure(mesh, lo, hi)


def _values(f: Weightlike, mesh: Mesh):
    return f.values if isinstance(f, Field) else np.asarray(f(mesh.nodes), dtype=float)


def wrh_ratio(w: Weightlike, mesh: Mesh, x: float, r: float, q: float) -> float:
    """(avg_{B(x,r)} w^q)^{1/q} / avg_{B(x,2r)} w."""
    top = ball_average(w, mesh, x - r, x + r, power=q) ** (1.0 / q)
    return top / ball_average(w, mesh, x - 2 * r, x + 2 * r)


def bmo_value(f: Weightlike, mesh: Mesh, x: float, r: float) -> float:
    """Squared mean oscillation avg_B |f - avg_B f|^2."""
    lo, hi = x - r, x + r
    mean = ball_average(f, mesh, lo, hi)
    if isinstance(f, Field):
        pts, wts = interval_quadrature(mesh, lo, hi)
        return float(np.sum((f(pts) - mean) ** 2 * wts) / np.sum(wts))
    return ball_average(lambda t: (f(t) - mean) ** 2, mesh, lo, hi)


def doubling_ratio(w: Weightlike, mesh: Mesh, x: float, r: float) -> float:
    """avg_{B(x,2r)} w / avg_{B(x,r)} w."""
    return ball_average(w, mesh, x - 2 * r, x + 2 * r) / ball_average(w, mesh, x - r, x + r)


# --------------------------------------------------------------- constants


@dataclass
class ScanConstant:
    value: float
    witness: tuple[float, float, float]  # center, radius, value
    centers: np.ndarray = field(repr=False)
    radii: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def table_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf)
        out.writerow(["center", "radius", "value"])
        for row in zip(self.centers, self.radii, self.values):
            out.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def _scan_max(fn, scan: BallScan) -> ScanConstant:
    if len(scan) == 0:
        raise ValueError("empty ball scan")
    vals = np.array([fn(x, r) for x, r in scan])
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite ball statistic in scan")
    i = int(np.argmax(vals))  # first witness wins ties
    return ScanConstant(
        float(vals[i]),
        (float(scan.centers[i]), float(scan.radii[i]), float(vals[i])),
        scan.centers,
        scan.radii,
        vals,
    )


def _check_weight(w: Weightlike, mesh: Mesh, U):
    vals = _values(w, mesh)
    inside = (mesh.nodes >= U[0]) & (mesh.nodes <= U[1])
    if np.any(vals[inside] < 0):
        raise ValueError("weight must be nonnegative on U")
    if not np.any(vals[inside] > 0):
        raise ValueError("weight vanishes on U")


def wrh_constant(
    w: Weightlike, mesh: Mesh, U, q: float, scan: Optional[BallScan] = None
) -> ScanConstant:
    """B_U = max over the scan of (avg_B w^q)^{1/q} / avg_{2B} w."""
    if not q > 1:
        raise ValueError("reverse Hölder exponent must exceed 1")
    _check_weight(w, mesh, U)
    scan = scan or enumerate_balls(mesh, U, 2)
    return _scan_max(lambda x, r: wrh_ratio(w, mesh, x, r, q), scan)


def bmo_constant(f: Weightlike, mesh: Mesh, U, scan: Optional[BallScan] = None) -> ScanConstant:
    """D_U = max over the scan of the squared mean oscillation of f."""
    if not np.all(np.isfinite(_values(f, mesh))):
        raise ValueError("f must be finite")
    scan = scan or enumerate_balls(mesh, U, 2)
    return _scan_max(lambda x, r: bmo_value(f, mesh, x, r), scan)


def doubling_constant(
    w: Weightlike, mesh: Mesh, U, scan: Optional[BallScan] = None
) -> ScanConstant:
    """A_U = max over balls with B(x,4r) in U of avg_{2B} w / avg_B w."""
    _check_weight(w, mesh, U)
    scan = scan or enumerate_balls(mesh, U, 4)
    if scan.enlargement != 4:
        raise ValueError("doubling needs a scan with 4x enlargement")
    return _scan_max(lambda x, r: doubling_ratio(w, mesh, x, r), scan)


# ------------------------------------------------------------- Caccioppoli


def _same_mesh(u: Field, psi: Field):
    if u.mesh is not psi.mesh:
        raise ValueError("u and psi must live on the same mesh")
    if not np.any(psi.values):
        raise ValueError("test profile psi vanishes identically")
    if psi.values[0] != 0 or psi.values[-1] != 0:
        raise ValueError("test profile psi must vanish at the ends of the mesh")


def caccioppoli_ratio(u: Field, psi: Field, coeff: Optional[EllipticCoeff] = None) -> float:
    """int |u'|^2 psi^2 / int u^2 |psi'|^2 (numerator a-weighted when ``coeff`` is given)."""
    _same_mesh(u, psi)
    mesh = u.mesh
    W = mesh.quad_weights
    if coeff is not None:
        W = W * coeff.at_quad(mesh)
    num = float(np.sum(u.gradient[:, None] ** 2 * psi.at_quad**2 * W))
    W0 = mesh.quad_weights
    den = float(np.sum(psi.gradient[:, None] ** 2 * u.at_quad**2 * W0))
    if den == 0:
        raise ValueError("denominator vanishes")
    return num / den


def log_caccioppoli_ratio(u: Field, psi: Field) -> float:
    """int (|u'|^2/u^2) psi^2 / int |psi'|^2."""
    _same_mesh(u, psi)
    mesh = u.mesh
    support = (psi.values[:-1] != 0) | (psi.values[1:] != 0)
    if np.any(u.values[:-1][support] <= 0) or np.any(u.values[1:][support] <= 0):
        raise ValueError("u must be positive on the support of psi")
    W = mesh.quad_weights[support]
    uq = u.at_quad[support]
    num = float(np.sum(u.gradient[support, None] ** 2 / uq**2 * psi.at_quad[support] ** 2 * W))
    den = float(np.sum(psi.gradient[:, None] ** 2 * mesh.quad_weights))
    return num / den


# -------------------------------------------------------------- reporting


@dataclass
class DiagnosticsReport:
    U: tuple[float, float]
    caccioppoli_ratio: float
    log_caccioppoli_ratio: float
    q: float
    wrh: ScanConstant
    bmo: ScanConstant
    doubling: ScanConstant

    @property
    def wrh_constant(self) -> float:
        return self.wrh.value

    @property
    def bmo_constant(self) -> float:
        return self.bmo.value

    @property
    def doubling_constant(self) -> float:
        return self.doubling.value

    def to_record(self) -> dict:
        return {
            "U": list(self.U),
            "caccioppoli_ratio": self.caccioppoli_ratio,
            "log_caccioppoli_ratio": self.log_caccioppoli_ratio,
            "q": self.q,
            "wrh_constant": self.wrh.value,
            "bmo_constant": self.bmo.value,
            "doubling_constant": self.doubling.value,
            "witnesses": {
                "wrh": list(self.wrh.witness),
                "bmo": list(self.bmo.witness),
                "doubling": list(self.doubling.witness),
            },
        }


def default_exponent(mesh: Mesh) -> float:
    """q = n/(n-2) for n >= 3, q = 2 otherwise."""
    n = mesh.weight.dimension
    return n / (n - 2) if n >= 3 else 2.0


def diagnose(
    u: Field, U, q: Optional[float] = None, coeff: Optional[EllipticCoeff] = None, count: int = 32
) -> DiagnosticsReport:
    """All constants for a positive field u on U, with w = u^2 and log w for BMO."""
    mesh = u.mesh
    q = q or default_exponent(mesh)
    psi = hat(mesh, U[0], U[1])
    w = u.map(np.square)
    if np.any(u.values <= 0):
        raise ValueError("diagnostics need a positive field")
    logw = u.map(lambda v: 2.0 * np.log(v))
    scan2 = enumerate_balls(mesh, U, 2, count)
    scan4 = enumerate_balls(mesh, U, 4, count)
    return DiagnosticsReport(
        (float(U[0]), float(U[1])),
        caccioppoli_ratio(u, psi, coeff),
        log_caccioppoli_ratio(u, psi),
        q,
        wrh_constant(w, mesh, U, q, scan2),
        bmo_constant(logw, mesh, U, scan2),
        doubling_constant(w, mesh, U, scan4),
    )


@dataclass
class PipelineReport:
    wrh: float
    bmo: float
    doubling: float
    q: float

    @property
    def triple(self) -> tuple[float, float, float]:
        return self.wrh, self.bmo, self.doubling

    @property
    def finite(self) -> bool:
        return all(math.isfinite(v) for v in self.triple)

    def to_record(self) -> dict:
        return {"wrh": self.wrh, "bmo": self.bmo, "doubling": self.doubling, "q": self.q}


def wrh_bmo_implies_doubling_check(
    w: Weightlike, mesh: Mesh, U, q: float = 2.0, count: int = 32
) -> PipelineReport:
    """(B_U at q, D_U of log w, A_U) for a positive weight on U."""
    vals = _values(w, mesh)
    inside = (mesh.nodes >= U[0]) & (mesh.nodes <= U[1])
    if np.any(vals[inside] <= 0):
        raise ValueError("weight must be positive on U")
    logw = w.map(np.log) if isinstance(w, Field) else (lambda x: math.log(w(x)))
    scan2 = enumerate_balls(mesh, U, 2, count)
    scan4 = enumerate_balls(mesh, U, 4, count)
    return PipelineReport(
        wrh_constant(w, mesh, U, q, scan2).value,
        bmo_constant(logw, mesh, U, scan2).value,
        doubling_constant(w, mesh, U, scan4).value,
        q,
    )


# -------------------------------------------------- 3D pointwise residual


def pointwise_residual_3d(
    u: Callable,
    A: Callable,
    sigma: Callable,
    samples,
    step: float = 1e-3,
    region: Optional[Callable] = None,
) -> float:
    """max |-div(A grad u) - sigma u| over the samples by nested central differences.

    grad u is differenced at the six flux points x +- step e_i, the flux A grad u
    is formed there and then differenced again.  ``region`` (a predicate on
    points) guards the stencil; leaving it raises ``ValueError``.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if x.shape[-1] != 3:
        raise ValueError("samples must be points in R^3")
    h = float(step)
    eye = np.eye(3)

    def grad(p):
        g = np.empty(p.shape)
        for j in range(3):
            g[..., j] = (u(p + h * eye[j]) - u(p - h * eye[j])) / (2 * h)
        return g

    if region is not None:
        for i in range(3):
            for s in (-2, 2):
                if not np.all(region(x + s * h * eye[i])):
                    raise ValueError("finite-difference stencil leaves the evaluable region")

    div = np.zeros(x.shape[0])
    for i in range(3):
        fp = x + h * eye[i]
        fm = x - h * eye[i]
        Fp = np.einsum("...j,...j->...", A(fp)[..., i, :], grad(fp))
        Fm = np.einsum("...j,...j->...", A(fm)[..., i, :], grad(fm))
        div += (Fp - Fm) / (2 * h)
    res = -div - sigma(x) * u(x)
    if not np.all(np.isfinite(res)):
        raise ValueError("finite-difference stencil leaves the evaluable region")
    return float(np.max(np.abs(res)))
