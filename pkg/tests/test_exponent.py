import math

import numpy as np
import pytest

from splitlevy.errors import SubcriticalInput
from splitlevy.exponent import LaplaceExponent, LevyQuartet, load_exponent, quartet_from_dict

QUAD = LevyQuartet(kappa=0.0, alpha=-1.0, beta=1.0)  # Psi(l) = l^2 - l
YULE = LevyQuartet(kappa=0.7, alpha=1.0, beta=0.0)  # Psi(l) = l - 0.7
CRIT = LevyQuartet(kappa=0.0, alpha=0.0, beta=1.0)  # Psi(l) = l^2


def test_psi_quadratic_spot():
    e = LaplaceExponent(QUAD)
    assert e.psi(2.0) == pytest.approx(2.0, abs=1e-14)


def test_psi_yule_at_zero_is_minus_b():
    e = LaplaceExponent(YULE)
    assert e.psi(0.0) == pytest.approx(-0.7, abs=1e-14)
    assert e.b == pytest.approx(0.7, abs=1e-10)


def test_psi_zero_at_zero_without_killing():
    e = LaplaceExponent(LevyQuartet(alpha=1.0, beta=2.0, atoms=((1.0, 0.5),)))
    assert e.psi(0.0) == 0.0


def test_largest_root_quadratic():
    e = LaplaceExponent(QUAD)
    assert abs(e.b - 1.0) <= 1e-10
    # independent check: bisection of the analytic factorisation l(l-1)
    roots = np.roots([1.0, -1.0, 0.0])
    assert abs(e.b - roots.max()) <= 1e-10
    assert e.psi(e.b) == pytest.approx(0.0, abs=1e-10)


def test_largest_root_critical_is_zero():
    e = LaplaceExponent(CRIT)
    assert e.b == 0.0
    assert not e.is_supercritical


def test_atom_and_exp_psi_matches_quadrature():
    from scipy.integrate import quad

    q = LevyQuartet(alpha=0.3, beta=0.2, atoms=((1.5, 0.4), (0.5, 2.0)),
                    exp_mass=0.8, exp_rate=1.7)
    e = LaplaceExponent(q)
    for lam in (0.3, 1.0, 4.2):
        integ = sum(c * (math.exp(-lam * x) - 1 + lam * x * (x <= 1)) for c, x in q.atoms)
        dens, _ = quad(lambda x: (math.exp(-lam * x) - 1 + lam * x * (x <= 1))
                       * q.exp_mass * q.exp_rate * math.exp(-q.exp_rate * x), 0, 60)
        expected = q.alpha * lam + q.beta * lam**2 + integ + dens
        assert e.psi(lam) == pytest.approx(expected, rel=1e-8)


def test_psi_convexity_sampled():
    rng = np.random.default_rng(0)
    e = LaplaceExponent(LevyQuartet(alpha=-0.5, beta=0.7, atoms=((1.0, 1.5),), exp_mass=0.3, exp_rate=2.0))
    for _ in range(1000):
        l1, l2, l3 = np.sort(rng.uniform(0, 100, 3))
        if l3 - l1 < 1e-9:
            continue
        w = (l2 - l1) / (l3 - l1)
        interp = (1 - w) * e.psi(l1) + w * e.psi(l3)
        assert e.psi(l2) <= interp + 1e-9 * max(1.0, abs(interp))


def test_psi_sharp():
    e = LaplaceExponent(QUAD)
    assert e.psi_sharp(1.0) == pytest.approx(2.0, abs=1e-12)
    assert e.psi_sharp(0.0) == pytest.approx(0.0, abs=1e-10)
    ey = LaplaceExponent(YULE)
    assert ey.psi_sharp(0.3) == pytest.approx(0.3, abs=1e-10)


def test_sharp_quartet_matches_shift():
    e = LaplaceExponent(LevyQuartet(alpha=-1.2, beta=0.6, atoms=((0.8, 0.5), (0.4, 2.5)),
                                    exp_mass=0.5, exp_rate=1.3))
    assert e.is_supercritical
    sharp = e.sharp()
    grid = np.array([0.0, 0.1, 1.0, 3.0, 10.0, 40.0])
    assert np.allclose(sharp.psi(grid), e.psi_sharp(grid), atol=1e-10)
    assert sharp.b == 0.0


def test_phi_quadratic():
    e = LaplaceExponent(QUAD)
    assert e.phi(3.0) == pytest.approx(6.0, abs=1e-12)
    assert e.phi_integral_form(3.0) == pytest.approx(6.0, abs=1e-12)
    assert e.phi(0.0) == pytest.approx(0.0, abs=1e-12)
    assert e.phi_forms_agree is True


def test_phi_yule_identity_form_wins():
    e = LaplaceExponent(YULE)
    assert e.phi(2.0) == pytest.approx(1.0, abs=1e-10)
    # the integral form misses kappa/b for killed exponents; flagged, not patched
    assert e.phi_integral_form(2.0) == pytest.approx(0.0, abs=1e-10)
    assert e.phi_forms_agree is False


def test_phi_cross_identity_on_grid():
    e = LaplaceExponent(LevyQuartet(alpha=-1.0, beta=0.5, atoms=((1.0, 1.0),), exp_mass=0.6, exp_rate=2.2))
    grid = np.concatenate(([0.1], np.linspace(1, 50, 30)))
    a = e.phi(grid)
    c = e.phi_integral_form(grid)
    assert np.all(np.abs(a - c) <= 1e-9 * (1 + np.abs(a)))


def test_phi_subcritical_rejected():
    e = LaplaceExponent(CRIT)
    with pytest.raises(SubcriticalInput):
        e.phi(1.0)


def test_phi_nondecreasing_sampled():
    e = LaplaceExponent(QUAD)
    grid = np.linspace(0, 20, 200)
    vals = e.phi(grid)
    assert np.all(np.diff(vals) >= -1e-12)


def test_semigroup_u_closed_forms():
    e = LaplaceExponent(CRIT)  # psi(u) = u^2
    assert e.semigroup_u(1.0, 1.0) == pytest.approx(0.5, abs=1e-8)
    assert e.semigroup_u(3.0, 0.0) == 3.0
    lin = LaplaceExponent(LevyQuartet(alpha=1.0))  # psi(u) = u
    assert lin.semigroup_u(2.0, math.log(2.0)) == pytest.approx(1.0, abs=1e-8)


def test_semigroup_u_flow_property():
    e = LaplaceExponent(QUAD)
    rng = np.random.default_rng(3)
    for _ in range(10):
        s, t = rng.uniform(0.05, 1.0, 2)
        lam = rng.uniform(0.1, 4.0)
        direct = e.semigroup_u(lam, s + t)
        nested = e.semigroup_u(e.semigroup_u(lam, t), s)
        assert direct == pytest.approx(nested, abs=1e-6)


def test_semigroup_u_monotone_in_lambda():
    e = LaplaceExponent(QUAD)
    lams = np.linspace(0.1, 5.0, 12)
    vals = e.semigroup_u(lams, 0.7)
    assert np.all(np.diff(vals) > 0)


def test_semigroup_u_quadratic_closed_form_vector():
    e = LaplaceExponent(QUAD)
    t = 1.0
    for lam in (0.5, 1.0, 2.0):
        expected = lam * math.e / (lam * math.e + 1 - lam)  # logistic flow of u' = u - u^2
        assert e.semigroup_u(lam, t) == pytest.approx(expected, abs=1e-8)


def test_greys_condition():
    assert LaplaceExponent(QUAD).greys_condition().satisfied
    fv = LaplaceExponent(LevyQuartet(alpha=1.0, atoms=((1.0, 2.0),)))
    rep = fv.greys_condition()
    assert not rep.satisfied
    assert not rep.heuristic_converged
    yule = LaplaceExponent(YULE)
    assert not yule.greys_condition().satisfied
    quad_rep = LaplaceExponent(QUAD).greys_condition()
    assert quad_rep.heuristic_converged


def test_quartet_validation():
    with pytest.raises(ValueError):
        LevyQuartet(kappa=-1.0)
    with pytest.raises(ValueError):
        LevyQuartet(atoms=((0.0, 1.0),))
    with pytest.raises(ValueError):
        LevyQuartet(exp_rate=0.0)


def test_subordinator_rejected():
    # pure upward jumps with no drift or Gaussian part: Psi stays bounded
    with pytest.raises(ValueError):
        LaplaceExponent(LevyQuartet(atoms=((1.0, 2.0),)))


def test_spec_file_roundtrip(tmp_path):
    p = tmp_path / "exp.toml"
    p.write_text('kappa = 0.0\nalpha = -1.0\nbeta = 1.0\natoms = [[0.5, 2.0]]\n'
                 '[exp_component]\nmass = 0.3\nrate = 1.5\n')
    e = load_exponent(p)
    assert e.quartet.beta == 1.0
    assert e.quartet.atoms == ((0.5, 2.0),)
    assert e.quartet.exp_mass == 0.3

    pj = tmp_path / "exp.json"
    pj.write_text('{"kappa": 0.7, "alpha": 1.0, "beta": 0.0}')
    ej = load_exponent(pj)
    assert ej.b == pytest.approx(0.7, abs=1e-10)

    with pytest.raises(ValueError):
        quartet_from_dict({"alpha": 1.0, "bogus": 2})


def test_root_residual_tolerance():
    for quartet in (QUAD, LevyQuartet(alpha=-1.2, beta=0.6, atoms=((0.8, 0.5), (0.4, 2.5)),
                                      exp_mass=0.5, exp_rate=1.3)):
        e = LaplaceExponent(quartet)
        assert abs(e.psi(e.b)) <= 1e-10 * max(1.0, abs(e.psi(e.b + 1.0)))
