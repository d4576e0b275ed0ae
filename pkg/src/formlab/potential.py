"""Potentials sigma: pointwise densities, divergences of radial fields, atoms.

Every variant knows how to pair with products of P1 functions, which is all
the forms and solvers need:

* ``Pointwise``   <sigma, f g> = int sigma f g dmu
* ``Divergence``  sigma = div(g(r) x/r),  <sigma, f g> = -int g (f g)' dmu
* ``Atomic``      <sigma, f g> = sum_k m_k f(x_k) g(x_k)

where dmu is the mesh measure (dx or |S^{n-1}| r^{n-1} dr).
"""
from __future__ import annotations

import math
import re
import weakref
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate as sint
from scipy import special

from .linalg import SymTridiagonal
from .mesh import FLAT, Field, Mesh, Weight, radial


class Potential:
    """Base class; concrete variants are frozen dataclasses below."""

    def scaled(self, t: float) -> "Potential":
        raise NotImplementedError

    def __add__(self, other: "Potential") -> "Potential":
        return SumPotential(_parts(self) + _parts(other))


def _parts(p):
    return p.parts if isinstance(p, SumPotential) else (p,)


@dataclass(frozen=True, eq=False)
class Pointwise(Potential):
    density: Callable
    label: str = "pointwise"
    factor: float = 1.0
    _cache: weakref.WeakKeyDictionary = field(
        default_factory=weakref.WeakKeyDictionary, repr=False
    )

    def __call__(self, x):
        return self.factor * np.asarray(self.density(np.asarray(x, dtype=float)), dtype=float)

    def at_quad(self, mesh: Mesh) -> np.ndarray:
        vals = self._cache.get(mesh)
        if vals is None:
            vals = np.broadcast_to(
                np.asarray(self.density(mesh.quad_points), dtype=float), mesh.quad_points.shape
            )
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"potential {self.label!r} is not finite on the mesh")
            self._cache[mesh] = vals
        return self.factor * vals

    def scaled(self, t):
        return Pointwise(self.density, self.label, self.factor * t, self._cache)


@dataclass(frozen=True, eq=False)
class Divergence(Potential):
    """sigma = div(g(r) x/r) in the radial case, sigma = g' in the flat case."""

    g: Callable
    label: str = "divergence"
    factor: float = 1.0

    def component(self, x):
        return self.factor * np.asarray(self.g(np.asarray(x, dtype=float)), dtype=float)

    def at_quad(self, mesh: Mesh) -> np.ndarray:
        vals = np.broadcast_to(self.component(mesh.quad_points), mesh.quad_points.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"field component of {self.label!r} is not finite on the mesh")
        return vals

    def scaled(self, t):
        return Divergence(self.g, self.label, self.factor * t)


@dataclass(frozen=True, eq=False)
class Atomic(Potential):
    atoms: tuple[tuple[float, float], ...]
    label: str = "atomic"

    def __post_init__(self):
        atoms = tuple((float(x), float(m)) for x, m in self.atoms)
        for x, m in atoms:
            if not (math.isfinite(x) and math.isfinite(m)):
                raise ValueError("atom positions and masses must be finite")
        object.__setattr__(self, "atoms", atoms)

    def scaled(self, t):
        return Atomic(tuple((x, t * m) for x, m in self.atoms), self.label)


@dataclass(frozen=True, eq=False)
class SumPotential(Potential):
    parts: tuple[Potential, ...]
    label: str = "sum"

    def scaled(self, t):
        return SumPotential(tuple(p.scaled(t) for p in self.parts), self.label)


def constant(q: float) -> Pointwise:
    return Pointwise(lambda x: np.full_like(x, q, dtype=float), f"constant({q:g})")


# ----------------------------------------------------------------- pairings


def _check_atoms(sigma: Atomic, mesh: Mesh):
    for x, _ in sigma.atoms:
        if not mesh.a < x < mesh.b:
            raise ValueError(f"atom at {x} is not inside the open domain ({mesh.a}, {mesh.b})")


def element_pairing(sigma: Potential, mesh: Mesh) -> np.ndarray:
    """Element matrices <sigma, phi_a phi_b>, shape (elements, 2, 2)."""
    E = np.zeros((mesh.n_elements, 2, 2))
    if isinstance(sigma, SumPotential):
        for p in sigma.parts:
            E += element_pairing(p, mesh)
        return E
    left, right = mesh.basis
    W = mesh.quad_weights
    if isinstance(sigma, Pointwise):
        sw = sigma.at_quad(mesh) * W
        E[:, 0, 0] = sw @ (left * left)
        E[:, 0, 1] = E[:, 1, 0] = sw @ (left * right)
        E[:, 1, 1] = sw @ (right * right)
    elif isinstance(sigma, Divergence):
        gw = sigma.at_quad(mesh) * W
        inv_h = 1.0 / mesh.h[:, None]
        # (phi_a phi_b)' with phi_left' = -1/h, phi_right' = 1/h
        E[:, 0, 0] = -np.sum(gw * (-2.0 * left) * inv_h, axis=1)
        E[:, 1, 1] = -np.sum(gw * (2.0 * right) * inv_h, axis=1)
        E[:, 0, 1] = E[:, 1, 0] = -np.sum(gw * (left - right) * inv_h, axis=1)
    elif isinstance(sigma, Atomic):
        _check_atoms(sigma, mesh)
        for x, m in sigma.atoms:
            e = int(mesh.element_of(x))
            t = (x - mesh.nodes[e]) / mesh.h[e]
            phi = np.array([1.0 - t, t])
            E[e] += m * np.outer(phi, phi)
    else:
        raise TypeError(f"cannot pair {type(sigma).__name__}")
    return E


def potential_matrix(sigma: Potential, mesh: Mesh) -> SymTridiagonal:
    """S_ij = <sigma, phi_i phi_j> over all nodes."""
    E = element_pairing(sigma, mesh)
    diag = np.zeros(mesh.n_nodes)
    diag[:-1] += E[:, 0, 0]
    diag[1:] += E[:, 1, 1]
    return SymTridiagonal(diag, E[:, 0, 1].copy())


def load_vector(sigma: Potential, mesh: Mesh) -> np.ndarray:
    """s_i = <sigma, phi_i> over all nodes."""
    s = np.zeros(mesh.n_nodes)
    if isinstance(sigma, SumPotential):
        for p in sigma.parts:
            s += load_vector(p, mesh)
        return s
    left, right = mesh.basis
    W = mesh.quad_weights
    if isinstance(sigma, Pointwise):
        sw = sigma.at_quad(mesh) * W
        s[:-1] += sw @ left
        s[1:] += sw @ right
    elif isinstance(sigma, Divergence):
        gsum = np.sum(sigma.at_quad(mesh) * W, axis=1) / mesh.h
        s[:-1] += gsum
        s[1:] -= gsum
    elif isinstance(sigma, Atomic):
        _check_atoms(sigma, mesh)
        for x, m in sigma.atoms:
            e = int(mesh.element_of(x))
            t = (x - mesh.nodes[e]) / mesh.h[e]
            s[e] += m * (1.0 - t)
            s[e + 1] += m * t
    else:
        raise TypeError(f"cannot pair {type(sigma).__name__}")
    return s


def pair_product(sigma: Potential, f: Field, g: Field) -> float:
    """<sigma, f g> for two P1 fields on the same mesh."""
    mesh = f.mesh
    if isinstance(sigma, SumPotential):
        return sum(pair_product(p, f, g) for p in sigma.parts)
    if isinstance(sigma, Pointwise):
        return float(np.sum(sigma.at_quad(mesh) * f.at_quad * g.at_quad * mesh.quad_weights))
    if isinstance(sigma, Divergence):
        d = f.gradient[:, None] * g.at_quad + f.at_quad * g.gradient[:, None]
        return float(-np.sum(sigma.at_quad(mesh) * d * mesh.quad_weights))
    if isinstance(sigma, Atomic):
        _check_atoms(sigma, mesh)
        return float(sum(m * f(x) * g(x) for x, m in sigma.atoms))
    raise TypeError(f"cannot pair {type(sigma).__name__}")


def pair_with_square(sigma: Potential, h: Field, mesh: Mesh | None = None, atol=1e-12) -> float:
    """<sigma, h^2> for a P1 field vanishing at both endpoints."""
    if mesh is not None and mesh is not h.mesh:
        raise ValueError("h lives on a different mesh")
    scale = max(1.0, float(np.max(np.abs(h.values))))
    if abs(h.values[0]) > atol * scale or abs(h.values[-1]) > atol * scale:
        raise ValueError("test field must vanish at the domain endpoints")
    return pair_product(sigma, h, h)


# ------------------------------------------------------------- mollification

_BUMP_MASS = sint.quad(lambda t: math.exp(-1.0 / (1.0 - t * t)), -1.0, 1.0, epsabs=1e-14)[0]


def bump(t):
    """Unit-mass bump c exp(-1/(1-t^2)) on (-1, 1)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2)) / _BUMP_MASS
    return out


def bump_derivative(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    ti = t[inside]
    out[inside] = bump(ti) * (-2.0 * ti / (1.0 - ti**2) ** 2)
    return out


@dataclass(frozen=True)
class MollifierSpec:
    eps: float
    points: int = 64

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("mollification radius must be positive")


@lru_cache(maxsize=None)
def _flat_rule(points: int):
    t, w = np.polynomial.legendre.leggauss(points)
    mass = bump(t) * w
    mass /= mass.sum()
    deriv = bump_derivative(t) * w
    return t, mass, deriv


@lru_cache(maxsize=None)
def _radial_rule(n: int, rho_points: int = 32, mu_points: int = 16):
    s, ws = np.polynomial.legendre.leggauss(rho_points)
    rho = 0.5 * (1.0 + s)  # in units of eps
    wr = 0.5 * ws * rho ** (n - 1)
    alpha = 0.5 * (n - 3)
    mu, wm = special.roots_jacobi(mu_points, alpha, alpha)
    mass = (bump(rho) * wr)[:, None] * wm[None, :]
    mass /= mass.sum()
    deriv = (bump_derivative(rho) * wr)[:, None] * wm[None, :]
    # normalize so that div(phi_eps * x) = n exactly
    deriv /= -np.sum(deriv * rho[:, None]) / n
    return rho, mu, mass, deriv


def _chunked(fn, x, chunk=4096):
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty_like(flat)
    for i in range(0, flat.size, chunk):
        out[i : i + chunk] = fn(flat[i : i + chunk])
    return out.reshape(x.shape)


def _mollify_flat(sigma, spec):
    t, mass, deriv = _flat_rule(spec.points)
    eps = spec.eps
    if isinstance(sigma, Pointwise):
        def dens(x):
            return (sigma(x[:, None] - eps * t[None, :]) * mass).sum(axis=1)
    elif isinstance(sigma, Divergence):
        d = deriv / (-eps * np.sum(deriv * t))
        def dens(x):
            return (sigma.component(x[:, None] - eps * t[None, :]) * d).sum(axis=1)
    elif isinstance(sigma, Atomic):
        def dens(x):
            out = np.zeros_like(x)
            for xk, m in sigma.atoms:
                out += m * bump((x - xk) / eps) / eps
            return out
    else:
        raise TypeError(f"cannot mollify {type(sigma).__name__}")
    return dens


def _mollify_radial(sigma, spec, weight: Weight):
    n = weight.n
    rho, mu, mass, deriv = _radial_rule(n)
    eps = spec.eps
    R = eps * rho[:, None]
    M = mu[None, :]
    if isinstance(sigma, Pointwise):
        def dens(x):
            r = x[:, None, None]
            s = np.sqrt(np.maximum(r * r - 2 * r * R * M + R * R, 0.0))
            return (sigma(s) * mass).sum(axis=(1, 2))
    elif isinstance(sigma, Divergence):
        d = deriv / eps
        def dens(x):
            r = x[:, None, None]
            s = np.sqrt(np.maximum(r * r - 2 * r * R * M + R * R, 0.0))
            return (sigma.component(s) * (r * M - R) / s * d).sum(axis=(1, 2))
    elif isinstance(sigma, Atomic):
        # shell atoms are smeared in r only
        def dens(x):
            out = np.zeros_like(x)
            for xk, m in sigma.atoms:
                out += m * bump((x - xk) / eps) / eps
            return out / weight(x)
    else:
        raise TypeError(f"cannot mollify {type(sigma).__name__}")
    return dens


def mollify(
    sigma: Potential,
    spec: MollifierSpec,
    mesh: Mesh,
    subdomain: tuple[float, float] | None = None,
) -> Pointwise:
    """Pointwise density of phi_eps * sigma, valid on ``subdomain``.

    ``mesh`` is where sigma lives; the subdomain must keep a distance of at least
    2 eps from its boundary.  Radial meshes use the n-dimensional convolution of
    the radial profile (divergences through div(phi_eps * Gamma)).
    """
    eps = spec.eps
    if subdomain is None:
        subdomain = (mesh.a + 2 * eps, mesh.b - 2 * eps)
    lo, hi = subdomain
    if not lo < hi:
        raise ValueError(f"eps={eps} is too large for the domain ({mesh.a}, {mesh.b})")
    if lo - mesh.a < 2 * eps * (1 - 1e-12) or mesh.b - hi < 2 * eps * (1 - 1e-12):
        raise ValueError(f"eps={eps} is too large for the subdomain ({lo}, {hi})")
    if isinstance(sigma, SumPotential):
        parts = [mollify(p, spec, mesh, subdomain) for p in sigma.parts]
        def dens(x):
            return sum(p(x) for p in parts)
    elif mesh.weight.is_radial:
        dens = _mollify_radial(sigma, spec, mesh.weight)
    else:
        dens = _mollify_flat(sigma, spec)
    label = f"mollified({getattr(sigma, 'label', 'sigma')}, eps={eps:.3g})"
    return Pointwise(lambda x: _chunked(dens, x), label)


# --------------------------------------------------------------- records


def tabulated(x, values, label="tabulated") -> Pointwise:
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    return Pointwise(lambda t: np.interp(t, x, values), label)


def potential_to_record(sigma: Potential, mesh: Mesh | None = None) -> dict:
    """JSON-ready tagged record; pointwise/divergence parts are sampled on ``mesh``."""
    if isinstance(sigma, Atomic):
        return {"kind": "atomic", "label": sigma.label, "atoms": [list(a) for a in sigma.atoms]}
    if isinstance(sigma, SumPotential):
        return {"kind": "sum", "parts": [potential_to_record(p, mesh) for p in sigma.parts]}
    if mesh is None:
        raise ValueError("sampling a pointwise or divergence potential needs a mesh")
    x = np.unique(np.concatenate((mesh.nodes, mesh.quad_points.ravel())))
    if isinstance(sigma, Pointwise):
        return {"kind": "pointwise", "label": sigma.label, "x": x.tolist(), "values": sigma(x).tolist()}
    if isinstance(sigma, Divergence):
        return {"kind": "divergence", "label": sigma.label, "x": x.tolist(), "g": sigma.component(x).tolist()}
    raise TypeError(f"cannot serialize {type(sigma).__name__}")


def potential_from_record(rec: dict) -> Potential:
    kind = rec.get("kind")
    if kind == "atomic":
        return Atomic(tuple(tuple(a) for a in rec["atoms"]), rec.get("label", "atomic"))
    if kind == "sum":
        return SumPotential(tuple(potential_from_record(p) for p in rec["parts"]))
    if kind == "pointwise":
        return tabulated(rec["x"], rec["values"], rec.get("label", "tabulated"))
    if kind == "divergence":
        x = np.asarray(rec["x"], dtype=float)
        g = np.asarray(rec["g"], dtype=float)
        return Divergence(lambda t: np.interp(t, x, g), rec.get("label", "tabulated"))
    if kind == "constant":
        return constant(float(rec["value"]))
    raise ValueError(f"unknown potential record kind {kind!r}")


# ------------------------------------------------------------------ catalog


@dataclass(frozen=True, eq=False)
class ExampleSpec:
    name: str
    dimension: int
    params: dict
    potential: Optional[Potential]
    domain: tuple[float, float]
    weight: Weight
    solution: Optional[Callable] = None
    certificate: Optional[Callable] = None
    exponents: Optional[tuple[float, float]] = None
    supercritical: bool = False
    radial: bool = True
    notes: str = ""
    # "log" when the solutions vary on a logarithmic scale (graded meshes and
    # exhaustions), "linear" otherwise
    scale: str = "linear"
    # pointwise 3D data for the non-symmetric example
    matrix_3d: Optional[Callable] = None
    solution_3d: Optional[Callable] = None
    sigma_3d: Optional[Callable] = None

    def mesh(self, elements: int, graded: Optional[bool] = None, domain=None):
        from .mesh import build_graded_mesh, build_uniform_mesh

        a, b = domain or self.domain
        if graded is None:
            graded = self.scale == "log"
        if graded:
            return build_graded_mesh(a, b, elements, self.weight)
        return build_uniform_mesh(a, b, elements, self.weight)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "params": self.params,
            "domain": list(self.domain),
            "weight": self.weight.to_record(),
            "exponents": list(self.exponents) if self.exponents else None,
            "supercritical": self.supercritical,
            "radial": self.radial,
            "scale": self.scale,
            "closed_form_solution": self.solution is not None or self.solution_3d is not None,
            "certificate": self.certificate is not None,
            "notes": self.notes,
        }


def hardy_exponents(n: int, c: float):
    """Exponents alpha with u = |x|^alpha solving -Laplace u = c u / |x|^2."""
    disc = (n - 2) ** 2 - 4 * c
    if disc < 0:
        return None
    root = 0.5 * math.sqrt(disc)
    return (2 - n) / 2 + root, (2 - n) / 2 - root


def _radial_residual(u, sigma, weight: Weight, r, scale_free=False):
    """Pointwise -u'' - (n-1) u'/r - sigma u by central differences, relative to the term sizes.

    The step follows the local length scale: r for scale-free (power) solutions,
    min(r, 1) otherwise.
    """
    if weight.is_radial:
        d = 1e-3 * (r if scale_free else np.minimum(r, 1.0))
    else:
        d = np.full_like(r, 1e-4)
    up, um, u0 = u(r + d), u(r - d), u(r)
    u2 = (up - 2 * u0 + um) / d**2
    u1 = (up - um) / (2 * d)
    drift = (weight.n - 1) * u1 / r if weight.is_radial else 0.0 * u1
    res = -u2 - drift - sigma(r) * u0
    scale = np.abs(sigma(r) * u0) + np.abs(u2) + np.abs(drift) + 1e-300
    return np.abs(res) / scale


def _self_test(spec: ExampleSpec, tol=1e-5):
    if spec.solution is None or spec.potential is None:
        return
    a, b = spec.domain
    if spec.weight.is_radial:
        r = np.geomspace(a * 1.01, b * 0.99, 200)
    else:
        r = np.linspace(a + 0.01 * (b - a), b - 0.01 * (b - a), 200)
    sigma = spec.potential
    if isinstance(sigma, Pointwise):
        res = _radial_residual(spec.solution, sigma, spec.weight, r, spec.name == "hardy")
        worst = float(res.max())
        if worst > tol:
            raise AssertionError(f"closed form for {spec.name} fails its PDE self-test ({worst:.2e})")


def _hardy(n=3, c=0.1875, domain=(1e-3, 1e3)):
    n = int(n)
    c = float(c)
    exps = hardy_exponents(n, c)
    crit = (n - 2) ** 2 / 4
    sigma = Pointwise(lambda r: c / r**2, f"hardy(n={n},c={c:g})")
    sol = None
    if exps is not None:
        ap = exps[0]
        sol = lambda r: np.asarray(r, dtype=float) ** ap
    return ExampleSpec(
        name="hardy",
        dimension=n,
        params={"n": n, "c": c},
        potential=sigma,
        domain=tuple(domain),
        weight=radial(n),
        solution=sol,
        exponents=exps,
        supercritical=c > crit,
        scale="log",
        notes="sigma = c/|x|^2; u = |x|^alpha with alpha = (2-n)/2 +- sqrt((n-2)^2 - 4c)/2; "
        f"sharp upper form bound 4c/(n-2)^2; critical c = {crit:g}",
    )


def _radial_oscillating(n=3, domain=(1e-2, 20.0)):
    n = int(n)
    sigma = Pointwise(
        lambda r: np.cos(r) + (n - 1) / r * np.sin(r) - np.sin(r) ** 2,
        f"radial_oscillating(n={n})",
    )
    return ExampleSpec(
        name="radial_oscillating",
        dimension=n,
        params={"n": n},
        potential=sigma,
        domain=tuple(domain),
        weight=radial(n),
        solution=lambda r: np.exp(np.cos(r)),
        certificate=np.sin,
        notes="sigma = cos r + (n-1) sin(r)/r - sin^2 r = div(Gamma) - |Gamma|^2 with "
        "Gamma = sin r x/r; u = exp(cos r)",
    )


def _oscillating_1d(domain=(0.0, 20.0)):
    sigma = Pointwise(lambda x: np.cos(x) - np.sin(x) ** 2, "oscillating_1d")
    return ExampleSpec(
        name="oscillating_1d",
        dimension=1,
        params={},
        potential=sigma,
        domain=tuple(domain),
        weight=FLAT,
        solution=lambda x: np.exp(np.cos(x)),
        certificate=np.sin,
        notes="sigma = cos x - sin^2 x = Gamma' - Gamma^2 with Gamma = sin x; u = exp(cos x)",
    )


def constant_solution(q: float):
    """Solution of -u'' = q u on (0, 1) with u(0) = u(1) = 1 (q < pi^2)."""
    if q >= math.pi**2:
        return None
    if q > 0:
        k = math.sqrt(q)
        return lambda x: np.cos(k * (np.asarray(x) - 0.5)) / math.cos(k / 2)
    if q < 0:
        k = math.sqrt(-q)
        return lambda x: np.cosh(k * (np.asarray(x) - 0.5)) / math.cosh(k / 2)
    return lambda x: np.ones_like(np.asarray(x, dtype=float))


def _constant(q=math.pi**2 / 4):
    q = float(q)
    return ExampleSpec(
        name="constant",
        dimension=1,
        params={"q": q},
        potential=constant(q),
        domain=(0.0, 1.0),
        weight=FLAT,
        solution=constant_solution(q),
        supercritical=q >= math.pi**2,
        notes="sigma = q on (0,1); u = cos(sqrt(q)(x-1/2))/cos(sqrt(q)/2) solves the "
        "Dirichlet-1 problem; upper form bound q/pi^2",
    )


def _nonsym_3d(C=1.0, a=None, da=None):
    C = float(C)
    a = a or (lambda t: t)
    da = da or (lambda t: np.ones_like(np.asarray(t, dtype=float)))

    def matrix(x):
        x = np.asarray(x, dtype=float)
        A = np.zeros(x.shape[:-1] + (3, 3))
        A[..., 0, 0] = A[..., 1, 1] = A[..., 2, 2] = 1.0
        b = C * a(x[..., 0])
        A[..., 0, 1] = b
        A[..., 1, 0] = -b
        return A

    def u(x):
        x = np.asarray(x, dtype=float)
        return 1.0 + np.sum(x * x, axis=-1)

    def sigma(x):
        # -div(A grad u) with (A grad u)_i = sum_j A_ij d_j u
        x = np.asarray(x, dtype=float)
        return (-6.0 - 2.0 * C * x[..., 1] * da(x[..., 0])) / u(x)

    return ExampleSpec(
        name="nonsym_3d",
        dimension=3,
        params={"C": C},
        potential=None,
        domain=(0.0, 1.0),
        weight=radial(3),
        radial=False,
        matrix_3d=matrix,
        solution_3d=u,
        sigma_3d=sigma,
        notes="A = I + B, b12 = C a(x1) = -b21; u = 1 + |x|^2; A xi . xi = |xi|^2 "
        "while the equation depends on C",
    )


_CATALOG = {
    "hardy": _hardy,
    "radial_oscillating": _radial_oscillating,
    "oscillating_1d": _oscillating_1d,
    "constant": _constant,
    "nonsym_3d": _nonsym_3d,
}

CATALOG_NAMES = tuple(_CATALOG)


def catalog(name: str, **params) -> ExampleSpec:
    """Build a cataloged example; ``name`` may also carry params, e.g. ``"hardy(n=3, c=0.16)"``."""
    if "(" in name:
        name, parsed = parse_example(name)
        parsed.update(params)
        params = parsed
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown example {name!r}; choose from {', '.join(_CATALOG)}") from None
    spec = factory(**params)
    _self_test(spec)
    return spec


_ARG = re.compile(r"\s*(\w+)\s*=\s*([^,]+)\s*")


def parse_example(text: str) -> tuple[str, dict]:
    m = re.fullmatch(r"\s*(\w+)\s*(?:\((.*)\))?\s*", text)
    if not m:
        raise ValueError(f"cannot parse example {text!r}")
    name, args = m.group(1), m.group(2)
    params = {}
    if args and args.strip():
        for part in args.split(","):
            am = _ARG.fullmatch(part)
            if not am:
                raise ValueError(f"cannot parse parameter {part!r} in {text!r}")
            key, val = am.group(1), am.group(2).strip()
            params[key] = _number(val)
    return name, params


def _number(text: str):
    text = text.replace("pi", repr(math.pi))
    try:
        return int(text)
    except ValueError:
        pass
    # allow simple arithmetic like pi**2/4
    if not re.fullmatch(r"[0-9eE+\-*/.() ]+", text):
        raise ValueError(f"not a number: {text!r}")
    return float(eval(text, {"__builtins__": {}}, {}))
