"""Discrete geometry: 1D / radial node grids, P1 fields, quadrature, ball scans
and exhaustions.

A radially symmetric problem in R^n is carried as a weighted 1D problem on an
annulus (a, b), a > 0, with measure |S^{n-1}| r^{n-1} dr.  Every integral in the
package goes through the element-wise Gauss rule defined here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

GAUSS_ORDER = 4
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(GAUSS_ORDER)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class Weight:
    """Integration weight of a mesh: ``flat`` (dx) or ``radial`` (|S^{n-1}| r^{n-1} dr)."""

    kind: str = "flat"
    n: int | None = None

    def __post_init__(self):
        if self.kind not in ("flat", "radial"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "radial" and (self.n is None or self.n < 2):
            raise ValueError("radial weight needs dimension n >= 2")

    @property
    def is_radial(self) -> bool:
        return self.kind == "radial"

    @property
    def dimension(self) -> int:
        return self.n if self.is_radial else 1

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if not self.is_radial:
            return np.ones_like(r)
        return sphere_area(self.n) * r ** (self.n - 1)

    def to_record(self) -> dict:
        return {"kind": self.kind, "n": self.n}

    @classmethod
    def from_record(cls, rec: dict) -> "Weight":
        return cls(rec.get("kind", "flat"), rec.get("n"))


FLAT = Weight()


def radial(n: int) -> Weight:
    return Weight("radial", n)


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    weight: Weight = FLAT

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("a mesh needs at least 3 nodes")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("mesh nodes must be finite")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        if self.weight.is_radial and nodes[0] <= 0:
            raise ValueError("radial meshes must exclude the origin (a > 0)")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @cached_property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def hmax(self) -> float:
        return float(self.h.max())

    @cached_property
    def quad_ref(self) -> np.ndarray:
        """Reference Gauss abscissae in (-1, 1), shape (q,)."""
        return _GAUSS_X

    @cached_property
    def quad_points(self) -> np.ndarray:
        """Gauss points, shape (elements, q)."""
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        return mid[:, None] + 0.5 * self.h[:, None] * _GAUSS_X[None, :]

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """Gauss weights times the Jacobian and the mesh weight, shape (elements, q)."""
        return 0.5 * self.h[:, None] * _GAUSS_W[None, :] * self.weight(self.quad_points)

    @cached_property
    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Values of the left/right hat restricted to an element at the Gauss points."""
        return 0.5 * (1.0 - _GAUSS_X), 0.5 * (1.0 + _GAUSS_X)

    def element_of(self, x) -> np.ndarray:
        """Index of the element containing x (right endpoint goes to the last element)."""
        idx = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(idx, 0, self.n_elements - 1)

    def field(self, values) -> "Field":
        return Field(self, values)

    def interpolate(self, f: Callable) -> "Field":
        return Field(self, f(self.nodes))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.n_nodes))

    def to_record(self) -> dict:
        return {"nodes": self.nodes.tolist(), "weight": self.weight.to_record()}

    @classmethod
    def from_record(cls, rec: dict) -> "Mesh":
        return cls(np.asarray(rec["nodes"], dtype=float), Weight.from_record(rec["weight"]))


@dataclass(frozen=True, eq=False)
class Field:
    """Piecewise-linear nodal function on a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.mesh.n_nodes,):
            raise ValueError(
                f"field has {values.size} values for {self.mesh.n_nodes} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __call__(self, x):
        return np.interp(x, self.mesh.nodes, self.values)

    @cached_property
    def gradient(self) -> np.ndarray:
        """Element-wise constant derivative."""
        return np.diff(self.values) / self.mesh.h

    @cached_property
    def at_quad(self) -> np.ndarray:
        left, right = self.mesh.basis
        v = self.values
        return v[:-1, None] * left[None, :] + v[1:, None] * right[None, :]

    def map(self, fn: Callable) -> "Field":
        return Field(self.mesh, fn(self.values))

    def __mul__(self, other):
        if isinstance(other, Field):
            other = other.values
        return Field(self.mesh, self.values * other)

    __rmul__ = __mul__

    def _other(self, other):
        if isinstance(other, Field):
            if other.mesh is not self.mesh:
                raise ValueError("fields live on different meshes")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.mesh, self.values + self._other(other))

    def __sub__(self, other):
        return Field(self.mesh, self.values - self._other(other))

    __radd__ = __add__


Integrand = Union[Field, Callable]


def integrate(f: Integrand, mesh: Mesh) -> float:
    """Weighted integral of a field or a pointwise function over the mesh."""
    if isinstance(f, Field):
        vals = f.at_quad
    else:
        vals = np.asarray(f(mesh.quad_points), dtype=float)
        vals = np.broadcast_to(vals, mesh.quad_points.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand is not finite on the mesh")
    return float(np.sum(vals * mesh.quad_weights))


def interval_quadrature(mesh: Mesh, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss points/weights (mesh weight included) for the part of the mesh in (lo, hi).

    Elements cut by lo or hi are split at the cut, so P1 integrands are integrated
    exactly (up to the Gauss order) over the sub-interval.
    """
    lo = max(lo, mesh.a)
    hi = min(hi, mesh.b)
    if hi <= lo:
        raise ValueError(f"interval ({lo}, {hi}) does not meet the mesh")
    nodes = mesh.nodes
    i0 = int(np.searchsorted(nodes, lo, side="right"))
    i1 = int(np.searchsorted(nodes, hi, side="left"))
    breaks = np.concatenate(([lo], nodes[i0:i1], [hi]))
    breaks = breaks[np.concatenate(([True], np.diff(breaks) > 0))]
    length = np.diff(breaks)
    mid = 0.5 * (breaks[:-1] + breaks[1:])
    pts = mid[:, None] + 0.5 * length[:, None] * _GAUSS_X[None, :]
    wts = 0.5 * length[:, None] * _GAUSS_W[None, :] * mesh.weight(pts)
    return pts.ravel(), wts.ravel()


def subdomain_integral(f: Integrand, mesh: Mesh, lo: float, hi: float) -> float:
    pts, wts = interval_quadrature(mesh, lo, hi)
    return float(np.sum(np.asarray(f(pts), dtype=float) * wts))


def build_uniform_mesh(a: float, b: float, elements: int, weight: Weight = FLAT) -> Mesh:
    if not a < b:
        raise ValueError(f"need a < b, got ({a}, {b})")
    if elements < 2:
        raise ValueError("need at least 2 elements")
    if weight.is_radial and a <= 0:
        raise ValueError("radial meshes need a > 0")
    return Mesh(np.linspace(a, b, elements + 1), weight)


def build_graded_mesh(
    a: float, b: float, elements: int, weight: Weight = FLAT, ratio: float | None = None
) -> Mesh:
    """Mesh graded geometrically toward ``a``.

    With ``ratio=None`` the nodes are log-uniform (a > 0 required), which is the
    natural grading for Hardy-type problems.  Otherwise consecutive element
    lengths grow by ``ratio``.
    """
    if not a < b:
        raise ValueError(f"need a < b, got ({a}, {b})")
    if elements < 2:
        raise ValueError("need at least 2 elements")
    if ratio is None:
        if a <= 0:
            raise ValueError("log-uniform grading needs a > 0")
        nodes = np.geomspace(a, b, elements + 1)
    else:
        if ratio <= 0:
            raise ValueError("grading ratio must be positive")
        steps = ratio ** np.arange(elements)
        nodes = a + (b - a) * np.concatenate(([0.0], np.cumsum(steps))) / steps.sum()
    nodes[0], nodes[-1] = a, b
    return Mesh(nodes, weight)


def refine(mesh: Mesh) -> Mesh:
    """Split every element in two (nested refinement)."""
    mid = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])
    nodes = np.empty(2 * mesh.n_nodes - 1)
    nodes[0::2] = mesh.nodes
    nodes[1::2] = mid
    return Mesh(nodes, mesh.weight)


def hat(mesh: Mesh, lo: float, hi: float) -> Field:
    """Tent of unit height supported on (lo, hi), peak at the midpoint."""
    mid = 0.5 * (lo + hi)
    x = mesh.nodes
    vals = np.where(x <= mid, (x - lo) / (mid - lo), (hi - x) / (hi - mid))
    return Field(mesh, np.clip(vals, 0.0, None))


# ---------------------------------------------------------------- ball scans


@dataclass(frozen=True, eq=False)
class BallScan:
    U: tuple[float, float]
    enlargement: int
    centers: np.ndarray
    radii: np.ndarray

    def __len__(self):
        return self.centers.size

    def __iter__(self):
        return iter(zip(self.centers.tolist(), self.radii.tolist()))

    def contains_all(self) -> bool:
        k = self.enlargement
        return bool(
            np.all(self.centers - k * self.radii >= self.U[0])
            and np.all(self.centers + k * self.radii <= self.U[1])
        )

    def union(self, other: "BallScan") -> "BallScan":
        if other.U != self.U or other.enlargement != self.enlargement:
            raise ValueError("can only merge scans of the same subdomain and enlargement")
        return BallScan(
            self.U,
            self.enlargement,
            np.concatenate((self.centers, other.centers)),
            np.concatenate((self.radii, other.radii)),
        )


def enumerate_balls(
    mesh: Mesh, U: tuple[float, float], enlargement: int = 2, count: int = 64
) -> BallScan:
    """Deterministic lattice of balls B(x, r) whose enlargement B(x, k r) lies in U.

    Radii are dyadic, from the largest admissible one down to one element
    length; each radius gets at most ``count`` equally spaced centers.
    """
    if enlargement not in (2, 4):
        raise ValueError("enlargement must be 2 or 4")
    lo, hi = float(U[0]), float(U[1])
    if lo < mesh.a or hi > mesh.b or not lo < hi:
        raise ValueError(f"U={U} is not inside the mesh extent ({mesh.a}, {mesh.b})")
    inside = (mesh.nodes[:-1] >= lo) & (mesh.nodes[1:] <= hi)
    elems = mesh.h[inside] if inside.any() else mesh.h[mesh.element_of([lo, hi])]
    hmin_ball = float(elems.max())
    if hi - lo < 2 * hmin_ball:
        raise ValueError("U is narrower than two elements")
    k = enlargement
    r = (hi - lo) / (2 * k)
    if r < hmin_ball:
        raise ValueError("U is too small to contain an admissible ball")
    count = max(1, min(int(count), 64))
    centers, radii = [], []
    while r >= hmin_ball:
        c_lo, c_hi = lo + k * r, hi - k * r
        m = 1 if c_hi - c_lo <= 0 else count
        cs = np.linspace(c_lo, c_hi, m) if m > 1 else np.array([0.5 * (lo + hi)])
        ok = (cs - k * r >= lo) & (cs + k * r <= hi)
        centers.append(cs[ok])
        radii.append(np.full(int(ok.sum()), r))
        r *= 0.5
    centers = np.concatenate(centers)
    radii = np.concatenate(radii)
    if centers.size == 0:
        raise ValueError("U is too small to contain an admissible ball")
    return BallScan((lo, hi), k, centers, radii)


# --------------------------------------------------------------- exhaustion


@dataclass(frozen=True)
class ExhaustionSpec:
    outer: tuple[float, float]
    levels: tuple[tuple[float, float], ...]
    eps: tuple[float, ...]
    scale: str = "linear"

    def __post_init__(self):
        a, b = self.outer
        if len(self.levels) != len(self.eps) or not self.levels:
            raise ValueError("levels and eps must be nonempty and of equal length")
        prev = None
        for j, ((aj, bj), ej) in enumerate(zip(self.levels, self.eps), start=1):
            if not a < aj < bj < b:
                raise ValueError(f"level {j} is not compactly inside the outer domain")
            if prev is not None and not (aj < prev[0] and bj > prev[1]):
                raise ValueError(f"level {j} does not contain level {j - 1}")
            if ej <= 0 or ej > 2.0**-j * (1 + 1e-12):
                raise ValueError(f"eps_{j}={ej} violates eps_j <= 2^-j")
            prev = (aj, bj)
        for e0, e1 in zip(self.eps, self.eps[1:]):
            if e1 > e0 / 2 * (1 + 1e-12):
                raise ValueError("eps must at least halve from level to level")

    @property
    def J(self) -> int:
        return len(self.levels)

    def gap(self, j: int) -> float:
        """Distance from level j (1-based) to the boundary of level j+1 (outer for the last)."""
        return _gap(self.levels, self.outer, j)

    def default_ball(self) -> tuple[float, float]:
        """Ball (center, radius) with its 4x enlargement compactly inside level 1."""
        a1, b1 = self.levels[0]
        c = math.sqrt(a1 * b1) if self.scale == "log" else 0.5 * (a1 + b1)
        return c, min(c - a1, b1 - c) / 5.0


def _gap(levels, outer, j: int) -> float:
    aj, bj = levels[j - 1]
    an, bn = levels[j] if j < len(levels) else outer
    return min(aj - an, bn - bj)


def build_exhaustion(
    outer: tuple[float, float], levels: int, scale: str = "linear"
) -> ExhaustionSpec:
    """Nested levels with inset fraction 2^-(j+1) of the outer domain.

    ``scale="log"`` measures the inset in log r (for annuli).  The mollification
    radii follow eps_j = min(eps_{j-1}/2, d(level j, boundary of level j+1)/2, 2^-j),
    eps_0 = 1, with the outer domain acting as level J+1.
    """
    if levels < 1:
        raise ValueError("need at least one level")
    a, b = map(float, outer)
    if not a < b:
        raise ValueError("outer domain must have a < b")
    if scale not in ("linear", "log"):
        raise ValueError("scale must be 'linear' or 'log'")
    if scale == "log" and a <= 0:
        raise ValueError("log-scale exhaustion needs a > 0")
    lv = []
    for j in range(1, levels + 1):
        theta = 2.0 ** -(j + 1)
        if scale == "log":
            la, lb = math.log(a), math.log(b)
            lv.append((math.exp(la + theta * (lb - la)), math.exp(lb - theta * (lb - la))))
        else:
            lv.append((a + theta * (b - a), b - theta * (b - a)))
    eps, prev = [], 1.0
    for j in range(1, levels + 1):
        prev = min(prev / 2, _gap(lv, (a, b), j) / 2, 2.0**-j)
        eps.append(prev)
    return ExhaustionSpec((a, b), tuple(lv), tuple(eps), scale)
