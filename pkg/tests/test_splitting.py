import math

import numpy as np
import pytest

from splitlevy.errors import SubcriticalInput
from splitlevy.exponent import LaplaceExponent, LevyQuartet
from splitlevy.splitting import (
    margin_for_tail,
    simulate_eta_x,
    simulate_nu_r,
    simulate_sin_tree,
    simulate_upsilon_tree,
    simulate_yule_contour,
)
from splitlevy.trees import prolific_skeleton

QUAD = LaplaceExponent(LevyQuartet(alpha=-1.0, beta=1.0))  # b = 1
FV_SUPER = LaplaceExponent(LevyQuartet(alpha=1.0, atoms=((1.0, 2.0),)))  # b ~ 0.797
CRIT = LaplaceExponent(LevyQuartet(beta=1.0))


def test_margin():
    assert margin_for_tail(1.0, 1e-6) == pytest.approx(math.log(1e6))


def test_yule_contour_structure():
    rng = np.random.default_rng(0)
    p = simulate_yule_contour(0.7, 1.0, rng)
    assert p.v[0] == 1.0
    assert p.terminal_value == 0.0
    assert p.info["n_alive"] >= 1
    # ramps have slope -1
    lv = p.left_values()
    for k in range(p.n_breakpoints - 1):
        dt = p.t[k + 1] - p.t[k]
        if dt > 0:
            assert (lv[k + 1] - p.v[k]) / dt == pytest.approx(-1.0)
    # alive count equals the number of level-r starts
    assert p.upcrossings(1.0 - 1e-12) == p.info["n_alive"]


def test_yule_small_b_single_ramp():
    rng = np.random.default_rng(1)
    counts = [simulate_yule_contour(1e-6, 1.0, rng).info["n_alive"] for _ in range(200)]
    assert np.mean(np.array(counts) == 1) > 0.99


def test_yule_geometric_frequencies():
    b, r = math.log(2.0), 1.0  # P(N=1)=0.5, P(N=2)=0.25
    rng = np.random.default_rng(2)
    n = 4000
    counts = np.array([simulate_yule_contour(b, r, rng).info["n_alive"] for _ in range(n)])
    for k, pk in ((1, 0.5), (2, 0.25)):
        freq = (counts == k).mean()
        assert abs(freq - pk) < 3 * math.sqrt(pk * (1 - pk) / n)


def test_nu_r_requires_supercritical():
    rng = np.random.default_rng(3)
    with pytest.raises(SubcriticalInput):
        simulate_nu_r(CRIT, 1.0, rng)


def test_nu_r_fv_structure():
    rng = np.random.default_rng(4)
    for _ in range(20):
        p = simulate_nu_r(FV_SUPER, 1.0, rng)
        assert p.terminal_value == pytest.approx(0.0, abs=1e-9)
        assert p.v.max() <= 1.0 + 1e-9
        assert p.info["n_copies"] >= 1


def test_nu_r_reproducible():
    a = simulate_nu_r(FV_SUPER, 1.0, np.random.default_rng(99))
    b = simulate_nu_r(FV_SUPER, 1.0, np.random.default_rng(99))
    assert np.array_equal(a.t, b.t) and np.array_equal(a.v, b.v)


def test_sin_tree_two_stages():
    rng = np.random.default_rng(5)
    contour, tree = simulate_sin_tree(FV_SUPER, 1.0, rng)
    s1, s2 = contour.info["stage_lifetimes"]
    assert s1 >= 0 and s2 > 0
    assert contour.terminal_value == pytest.approx(0.0, abs=1e-9)
    assert contour.v.max() <= 1.0 + 1e-9
    # stage 2 starts at r
    assert contour.evaluate(min(s1 + 1e-12, contour.lifetime)) == pytest.approx(1.0, rel=1e-6)
    skel = prolific_skeleton(tree, 1.0)
    assert skel.n_lines() == 1


def test_sin_tree_quadratic_smoke():
    rng = np.random.default_rng(6)
    contour, tree = simulate_sin_tree(QUAD, 0.5, rng, h=5e-3)
    assert contour.v.max() <= 0.5 + 1e-9
    assert contour.terminal_value == pytest.approx(0.0, abs=1e-9)


def test_upsilon_tree_skeleton_and_contour():
    rng = np.random.default_rng(7)
    for _ in range(10):
        tree, contour = simulate_upsilon_tree(FV_SUPER, 1.0, rng)
        skel = prolific_skeleton(tree, 1.0)
        assert skel.n_lines() == contour.info["n_lines"]
        assert contour.v.max() <= 1.0 + 1e-9
        assert contour.terminal_value == pytest.approx(0.0, abs=1e-9)
        # all lines reach the truncation height
        for _, node in tree.nodes():
            assert node.death == pytest.approx(1.0, abs=1e-9)
            assert node.prolific


def test_upsilon_no_graft_probability():
    b = FV_SUPER.b
    r = 0.3
    rng = np.random.default_rng(8)
    n = 600
    singles = 0
    for _ in range(n):
        tree, _ = simulate_upsilon_tree(FV_SUPER, r, rng)
        singles += tree.size() == 1
    expect = math.exp(-b * r)
    assert abs(singles / n - expect) < 4 * math.sqrt(expect * (1 - expect) / n)


def test_upsilon_spacing_records():
    rng = np.random.default_rng(9)
    tree, _ = simulate_upsilon_tree(FV_SUPER, 1.0, rng)
    root = tree.root
    assert root.extras["overshoot"] > 0
    heights = sorted(c.birth for c in root.children)
    cum = np.concatenate(([0.0], np.cumsum(root.extras["spacings"])))
    assert np.allclose(sorted(cum[1:]), heights, atol=1e-12)
    assert cum[-1] + root.extras["overshoot"] >= 1.0


def test_eta_x_prolific_count_poisson():
    rng = np.random.default_rng(10)
    b = FV_SUPER.b
    x, r = 0.8, 1.5
    n = 1500
    counts = np.array([
        simulate_eta_x(FV_SUPER, x, r, rng, include_compact=False)[0].info["n_prolific_grafts"]
        for _ in range(n)])
    target = b * x
    se = math.sqrt(target / n)
    assert abs(counts.mean() - target) < 3 * se


def test_eta_x_bare_spine_measure():
    rng = np.random.default_rng(11)
    contour, forest = simulate_eta_x(FV_SUPER, 0.6, 2.0, rng, include_compact=False)
    if contour.info["n_prolific_grafts"] == 0:
        assert contour.lifetime == pytest.approx(0.6, abs=1e-12)
    assert forest.root.extras.get("spine")
    assert not forest.root.prolific


def test_eta_x_spine_clipped_at_r():
    rng = np.random.default_rng(12)
    contour, forest = simulate_eta_x(FV_SUPER, 3.0, 1.0, rng, include_compact=False)
    assert forest.root.lifespan == pytest.approx(1.0)
    assert contour.v.max() <= 1.0 + 1e-9


def test_eta_x_with_compact_truncated():
    rng = np.random.default_rng(13)
    contour, _ = simulate_eta_x(FV_SUPER, 1.0, 1.2, rng, include_compact=True)
    assert contour.v.max() <= 1.2 + 1e-9
    assert contour.terminal_value == pytest.approx(0.0, abs=1e-9)
