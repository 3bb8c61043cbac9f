"""Property tests for the path invariants and tree codings."""

import numpy as np
from hypothesis import given, settings, strategies as st

from splitlevy.paths import CadlagPath, time_change_below
from splitlevy.trees import lukasiewicz_to_tree, tree_to_lukasiewicz


@st.composite
def paths(draw):
    n = draw(st.integers(min_value=2, max_value=25))
    gaps = draw(st.lists(st.floats(0.05, 2.0), min_size=n, max_size=n))
    steps = draw(st.lists(st.floats(-1.5, 1.5), min_size=n, max_size=n))
    jumps = draw(st.lists(st.floats(0.0, 1.2), min_size=n, max_size=n))
    t = np.concatenate(([0.0], np.cumsum(gaps)))
    j = np.concatenate(([0.0], jumps))
    v = np.empty(n + 1)
    v[0] = draw(st.floats(0.0, 2.0))
    for k in range(1, n + 1):
        v[k] = v[k - 1] + steps[k - 1] + j[k]
    return CadlagPath(t, v, j)


def _kept_time_exact(p, r):
    """Closed-form Lebesgue{f <= r} summed segment by segment."""
    lv = p.left_values()
    total = 0.0
    for k in range(p.n_breakpoints - 1):
        a, b = p.v[k], lv[k + 1]
        dt = p.t[k + 1] - p.t[k]
        if a <= r and b <= r:
            total += dt
        elif a > r and b > r:
            pass
        elif b > a:
            total += dt * (r - a) / (b - a)  # increasing: kept initial part
        else:
            total += dt * (r - b) / (a - b)  # decreasing: kept final part
    return total


@given(paths(), st.floats(0.2, 3.0))
@settings(max_examples=120, deadline=None)
def test_tc_below_preserves_kept_time_exactly(p, r):
    out = time_change_below(p, r)
    assert abs(out.lifetime - _kept_time_exact(p, r)) <= 1e-9 * max(1.0, p.lifetime)
    assert out.v.max() <= r + 1e-12


@given(paths(), st.floats(0.3, 2.0), st.floats(0.05, 0.95))
@settings(max_examples=120, deadline=None)
def test_tc_below_consistent_under_nested_levels(p, r_hi, frac):
    r_lo = frac * r_hi
    if r_lo <= 0:
        return
    a = time_change_below(time_change_below(p, r_hi), r_lo)
    b = time_change_below(p, r_lo)
    assert abs(a.lifetime - b.lifetime) <= 1e-9 * max(1.0, p.lifetime)
    grid = np.linspace(0, min(a.lifetime, b.lifetime), 65)
    assert np.allclose(a.evaluate(grid), b.evaluate(grid), atol=1e-9)


@st.composite
def lukasiewicz_paths(draw):
    # build a valid skip-free excursion via random offspring counts
    counts = []
    open_slots = 1
    total = 0
    while open_slots > 0 and total < 40:
        k = draw(st.integers(min_value=0, max_value=3))
        counts.append(k)
        open_slots += k - 1
        total += 1
    while open_slots > 0:
        counts.append(0)
        open_slots -= 1
    e = [0]
    for k in counts:
        e.append(e[-1] + k - 1)
    return e


@given(lukasiewicz_paths())
@settings(max_examples=150, deadline=None)
def test_lukasiewicz_round_trip(e):
    tree = lukasiewicz_to_tree(e)
    assert tree_to_lukasiewicz(tree) == e
