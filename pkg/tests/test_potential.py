import json
import math

import numpy as np
import pytest

from formlab.forms import IDENTITY, assemble, estimate_upper_form_bound
from formlab.mesh import build_graded_mesh, build_uniform_mesh, hat, integrate, radial
from formlab.potential import (
    Atomic,
    Divergence,
    MollifierSpec,
    Pointwise,
    bump,
    catalog,
    constant,
    hardy_exponents,
    mollify,
    pair_with_square,
    parse_example,
    potential_from_record,
    potential_to_record,
)


def test_bump_unit_mass():
    t, w = np.polynomial.legendre.leggauss(200)
    assert np.sum(bump(t) * w) == pytest.approx(1.0, abs=1e-8)
    assert bump(np.array([1.0, -1.2]))[0] == 0


def test_mollify_constant():
    m = build_uniform_mesh(0, 1, 100)
    x = np.linspace(0.2, 0.8, 31)
    np.testing.assert_allclose(mollify(constant(5.0), MollifierSpec(0.07), m)(x), 5.0)


def test_mollify_atom_mass_and_support():
    m = build_uniform_mesh(0, 1, 100)
    d = mollify(Atomic(((0.5, 1.0),)), MollifierSpec(0.1), m)
    assert integrate(d, build_uniform_mesh(0, 1, 4000)) == pytest.approx(1.0, abs=1e-8)
    assert np.all(d(np.array([0.39, 0.3999, 0.6001, 0.7])) < 1e-12)
    assert d(np.array([0.45, 0.55])).min() > 0


def test_mollify_linear_exact():
    m = build_uniform_mesh(0, 1, 100)
    x = np.linspace(0.1, 0.9, 81)
    y = mollify(Pointwise(lambda t: t), MollifierSpec(0.05), m)(x)
    assert np.max(np.abs(y - x)) < 1e-8


def test_mollify_linear_against_convolution():
    # direct convolution oracle with scipy quad
    from scipy.integrate import quad

    m = build_uniform_mesh(0, 1, 100)
    f = lambda t: np.sin(4 * t) + t**3
    eps = 0.05
    got = mollify(Pointwise(f), MollifierSpec(eps), m)(np.array([0.3]))[0]
    want = quad(lambda t: float(bump(np.array(t / eps))) / eps * f(0.3 - t), -eps, eps, epsabs=1e-13)[0]
    assert got == pytest.approx(want, abs=1e-8)


def test_mollify_rejects_large_eps():
    m = build_uniform_mesh(0, 1, 100)
    with pytest.raises(ValueError):
        mollify(constant(1.0), MollifierSpec(0.3), m)
    with pytest.raises(ValueError):
        mollify(constant(1.0), MollifierSpec(0.1), m, subdomain=(0.1, 0.9))


def test_mollified_divergence_matches_pointwise():
    m = build_uniform_mesh(0, 1, 100)
    x = np.linspace(0.15, 0.85, 29)
    a = mollify(Divergence(np.sin), MollifierSpec(0.05), m)(x)
    b = mollify(Pointwise(np.cos), MollifierSpec(0.05), m)(x)
    assert np.max(np.abs(a - b)) < 1e-10


@pytest.mark.parametrize("n", [2, 3, 4])
def test_radial_mollification(n):
    m = build_uniform_mesh(0.5, 3, 50, radial(n))
    x = np.linspace(1.0, 2.5, 16)
    np.testing.assert_allclose(mollify(constant(2.0), MollifierSpec(0.1), m)(x), 2.0, rtol=1e-13)
    # div(r x/r) = div x = n
    np.testing.assert_allclose(
        mollify(Divergence(lambda r: r), MollifierSpec(0.1), m)(x), n, rtol=1e-12
    )
    a = mollify(Divergence(np.sin), MollifierSpec(0.1), m)(x)
    b = mollify(Pointwise(lambda r: np.cos(r) + (n - 1) * np.sin(r) / r), MollifierSpec(0.1), m)(x)
    assert np.max(np.abs(a - b)) < 1e-8


@pytest.mark.parametrize("weight", [None, radial(3)])
def test_mollification_mass_conservation(weight):
    kw = {} if weight is None else {"weight": weight}
    lo, hi = (0.0, 3.0) if weight is None else (0.5, 3.0)
    m = build_uniform_mesh(lo, hi, 50, **kw)
    fine = build_uniform_mesh(lo, hi, 6000, **kw)
    dens = Pointwise(lambda r: np.where(np.abs(r - 1.75) < 0.3, np.cos((r - 1.75) / 0.3 * np.pi / 2) ** 2, 0.0))
    moll = mollify(dens, MollifierSpec(0.1), m)
    assert integrate(moll, fine) == pytest.approx(integrate(dens, fine), abs=1e-6)


@pytest.mark.parametrize(
    "name, domain, eps",
    [
        ("constant", (0.0, 1.0), 0.05),
        ("oscillating_1d", (0.0, 20.0), 0.25),
        ("hardy(n=3,c=0.16)", (1e-2, 1e2), 1e-3),
        ("radial_oscillating(n=3)", (1e-2, 20.0), 0.05),
    ],
)
def test_form_bound_stable_under_mollification(name, domain, eps):
    ex = catalog(name)
    a, b = domain
    graded = ex.scale == "log"
    build = build_graded_mesh if graded else build_uniform_mesh
    full = build(a, b, 800, ex.weight)
    lam = estimate_upper_form_bound(assemble(full, IDENTITY, ex.potential)).lambda_upper
    # compactly contained subdomain at distance >= 2 eps from the boundary
    sub = (a * 1.5 + 3 * eps, b - 3 * eps) if not graded else (a * 1.5 + 2 * eps, b / 1.5)
    inner = build(*sub, 800, ex.weight)
    sig_eps = mollify(ex.potential, MollifierSpec(eps), full, sub)
    lam_eps = estimate_upper_form_bound(assemble(inner, IDENTITY, sig_eps)).lambda_upper
    assert lam_eps <= lam + 1e-3


# ----------------------------------------------------------------- catalog


def test_hardy_exponents():
    ex = catalog("hardy", n=3, c=0.1875)
    assert ex.exponents == pytest.approx((-0.25, -0.75))
    assert not ex.supercritical


def test_hardy_harmonic_case():
    assert catalog("hardy(n=3, c=0)").exponents == pytest.approx((0.0, -1.0))


def test_hardy_supercritical_flag():
    ex = catalog("hardy", n=3, c=0.3)
    assert ex.supercritical and ex.exponents is None and ex.solution is None


@pytest.mark.parametrize("n, c", [(3, 0.1), (4, 0.5), (5, 2.25), (6, 1.0)])
def test_hardy_exponent_identity(n, c):
    for a in hardy_exponents(n, c):
        assert a * a + (n - 2) * a + c == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_radial_oscillating_identity(n):
    ex = catalog("radial_oscillating", n=n)
    r = np.linspace(0.05, 20, 400)
    g = ex.certificate
    div_gamma = np.cos(r) + (n - 1) / r * g(r)
    np.testing.assert_allclose(div_gamma - g(r) ** 2, ex.potential(r), atol=1e-14)


def test_oscillating_1d_identity():
    ex = catalog("oscillating_1d")
    x = np.linspace(0, 20, 200)
    np.testing.assert_allclose(np.cos(x) - np.sin(x) ** 2, ex.potential(x), atol=1e-15)


def test_constant_closed_form():
    ex = catalog("constant", q=math.pi**2 / 4)
    assert ex.solution(0.5) == pytest.approx(math.sqrt(2))
    assert ex.solution(0.0) == pytest.approx(1.0)


def test_unknown_example():
    with pytest.raises(ValueError):
        catalog("harmonic_oscillator")


def test_parse_example():
    assert parse_example("hardy(n=3, c=0.16)") == ("hardy", {"n": 3, "c": 0.16})
    assert parse_example("constant(q=pi**2/4)")[1]["q"] == pytest.approx(math.pi**2 / 4)
    with pytest.raises(ValueError):
        parse_example("hardy(n=__import__('os'))")


# ------------------------------------------------------------------ pairing


def test_pairing_hat_mass():
    m = build_uniform_mesh(0, 1, 100)
    h = hat(m, 0.2, 0.6)
    assert pair_with_square(constant(1.0), h) == pytest.approx(2 / 3 * 0.2)


def test_pairing_atomic():
    m = build_uniform_mesh(0, 1, 10)
    h = m.interpolate(lambda x: 12 * x * (1 - x))
    assert pair_with_square(Atomic(((0.5, 2.0),)), h) == pytest.approx(18.0)


def test_divergence_pairing_matches_pointwise():
    m = build_uniform_mesh(0, 1, 60)
    rng = np.random.default_rng(7)
    for _ in range(20):
        vals = rng.normal(size=m.n_nodes)
        vals[0] = vals[-1] = 0
        h = m.field(vals)
        a = pair_with_square(Divergence(np.sin), h)
        b = pair_with_square(Pointwise(np.cos), h)
        assert a == pytest.approx(b, abs=1e-6)


def test_pairing_needs_boundary_zero():
    m = build_uniform_mesh(0, 1, 10)
    with pytest.raises(ValueError):
        pair_with_square(constant(1.0), m.interpolate(lambda x: 1 + 0 * x))


def test_atom_outside_domain():
    m = build_uniform_mesh(0, 1, 10)
    h = hat(m, 0.2, 0.8)
    with pytest.raises(ValueError):
        pair_with_square(Atomic(((1.5, 1.0),)), h)


def test_potential_records_round_trip():
    m = build_uniform_mesh(0, 1, 20)
    h = hat(m, 0.1, 0.9)
    sig = Pointwise(np.cos) + Atomic(((0.3, 2.0),)) + Divergence(lambda x: x**2)
    rec = json.loads(json.dumps(potential_to_record(sig, m)))
    back = potential_from_record(rec)
    assert pair_with_square(back, h) == pytest.approx(pair_with_square(sig, h), rel=1e-3)
    atom = potential_from_record(potential_to_record(Atomic(((0.3, 2.0),))))
    assert atom.atoms == ((0.3, 2.0),)
