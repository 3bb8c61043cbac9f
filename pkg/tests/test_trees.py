import io
import math

import numpy as np
import pytest

from splitlevy.errors import MalformedPath, NotTruncated, OutOfDomain
from splitlevy.exponent import LaplaceExponent, LevyQuartet
from splitlevy.paths import CadlagPath, StopRule, simulate_levy, trivial_path
from splitlevy.trees import (
    ChronologicalNode,
    ChronologicalTree,
    ProlificSkeleton,
    TomTreeView,
    decode_contour,
    graft_right,
    lukasiewicz_to_tree,
    prolific_skeleton,
    random_truncated_tree,
    reconstruct_from_skeleton,
    splice_coded,
    tree_to_lukasiewicz,
    truncate,
)


def tent_view():
    return TomTreeView(CadlagPath(np.array([0.0, 2.0, 4.0]), np.array([0.0, 2.0, 0.0]), np.zeros(3)))


def test_metric_tent_same_point():
    view = tent_view()
    assert view.distance(0.5, 1.5) == pytest.approx(1.0 + 1.0 - 2 * 0.5)  # wait: recompute below
    # m_f(0.5, 1.5) on the up-slope: min is at s=0.5 -> 0.5; d = 0.5 + 1.5 - 2*0.5 = 1.0
    assert view.distance(0.5, 3.5) == pytest.approx(0.0, abs=1e-12)  # same tree point
    assert view.distance(1.0, 1.0) == 0.0


def test_metric_piecewise_example():
    # (0,0),(1,1),(2,0.5),(3,1.5),(4,0): d(1,3) = 1 + 1.5 - 2*0.5 = 1.5
    p = CadlagPath(np.array([0.0, 1.0, 2.0, 3.0, 4.0]),
                   np.array([0.0, 1.0, 0.5, 1.5, 0.0]), np.zeros(5))
    view = TomTreeView(p)
    assert view.distance(1.0, 3.0) == pytest.approx(1.5, abs=1e-12)
    with pytest.raises(OutOfDomain):
        view.distance(0.0, 5.0)


def _random_excursion(rng, n=30):
    steps = rng.normal(0.3, 1.0, n)
    vals = np.maximum.accumulate(np.zeros(1))  # placeholder
    v = [0.0]
    for s in steps:
        v.append(max(v[-1] + s, 0.0))
    v.append(0.0)
    t = np.concatenate(([0.0], np.sort(rng.uniform(0.2, 9.8, n)), [10.0]))
    return CadlagPath(t, np.array(v), np.zeros(n + 2))


def test_metric_axioms_sampled():
    rng = np.random.default_rng(4)
    view = TomTreeView(_random_excursion(rng))
    m = view.total_measure
    for _ in range(300):
        s, t, u = rng.uniform(0, m, 3)
        ds_t = view.distance(s, t)
        assert ds_t >= -1e-12
        assert ds_t <= view.distance(s, u) + view.distance(u, t) + 1e-9
    for _ in range(300):
        w, x, y, z = rng.uniform(0, m, 4)
        lhs = view.distance(w, x) + view.distance(y, z)
        rhs = max(view.distance(w, y) + view.distance(x, z),
                  view.distance(w, z) + view.distance(x, y))
        assert lhs <= rhs + 1e-9


def test_order_or2_sampled():
    rng = np.random.default_rng(8)
    view = TomTreeView(_random_excursion(rng))
    m = view.total_measure
    checked = 0
    for _ in range(400):
        s, t = rng.uniform(0, m, 2)
        if view.distance(s, t) < 1e-6:
            continue
        cs, ct = view.canonical_time(s), view.canonical_time(t)
        if cs >= ct:
            s, t = t, s
            cs, ct = ct, cs
        meet = view.interval_min(s, t)
        fs = view.height(s)
        if fs - meet < 1e-6:
            continue
        for h in np.linspace(meet + 1e-7, fs, 4):
            assert view.ancestor_time(s, h) <= ct + 1e-9
        checked += 1
    assert checked > 50


def test_canonical_time_tent():
    view = tent_view()
    assert view.canonical_time(0.5) == pytest.approx(3.5)
    assert view.canonical_time(2.0) == pytest.approx(2.0)
    assert view.canonical_time(0.0) == pytest.approx(4.0)  # the root class


def test_lukasiewicz_examples():
    tree = lukasiewicz_to_tree([0, 1, 0, -1])
    labels = [lab for lab, _ in tree.nodes()]
    assert labels == [(), (1,), (2,)]
    single = lukasiewicz_to_tree([0, -1])
    assert [lab for lab, _ in single.nodes()] == [()]
    three = lukasiewicz_to_tree([0, 2, 1, 0, -1])
    assert [lab for lab, _ in three.nodes()] == [(), (1,), (2,), (3,)]
    with pytest.raises(MalformedPath):
        lukasiewicz_to_tree([0, -1, 0, -1])
    with pytest.raises(MalformedPath):
        lukasiewicz_to_tree([0, 1, -1])


def _random_plane_tree(rng, max_nodes=40):
    root = ChronologicalNode(0.0, 1.0)
    nodes = [root]
    frontier = [root]
    while frontier and len(nodes) < max_nodes:
        node = frontier.pop(0)
        for _ in range(rng.poisson(0.9)):
            child = ChronologicalNode(node.birth + 1.0, 1.0)
            node.add_child(child)
            nodes.append(child)
            frontier.append(child)
    return ChronologicalTree(root)


def test_lukasiewicz_round_trip_random():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        tree = _random_plane_tree(rng)
        e = tree_to_lukasiewicz(tree)
        back = lukasiewicz_to_tree(e)
        assert tree.same_shape(back)
        assert tree_to_lukasiewicz(back) == e


def test_graft_empty_guest():
    host = CadlagPath(np.array([0.0, 2.0]), np.array([2.0, 0.0]), np.zeros(2))
    out = graft_right(host, 1.0, trivial_path())
    assert out is host


def test_graft_segment_example():
    host = CadlagPath(np.array([0.0, 2.0]), np.array([2.0, 0.0]), np.zeros(2))  # segment [0,2]
    guest = CadlagPath(np.array([0.0, 1.0]), np.array([1.0, 0.0]), np.zeros(2))  # segment [0,1]
    site = 1.0  # the host point at height 1
    out = splice_coded(host, site, guest)
    view = TomTreeView(out)
    assert view.total_measure == pytest.approx(3.0, abs=1e-12)
    assert out.v.max() == pytest.approx(2.0)
    assert view.point_count_at(1.5) == 2
    # d(root, guest leaf): guest leaf is the top of the spliced ramp
    t_leaf = 1.0
    assert out.evaluate(t_leaf) == pytest.approx(2.0)
    assert view.distance(t_leaf, out.lifetime) == pytest.approx(2.0, abs=1e-12)


def test_graft_measure_additive_random():
    rng = np.random.default_rng(3)
    for _ in range(20):
        host = _random_excursion(rng, 12)
        guest = _random_excursion(rng, 8)
        site = rng.uniform(0, host.lifetime)
        out = splice_coded(host, site, guest)
        assert out.lifetime == pytest.approx(host.lifetime + guest.lifetime, abs=1e-9)


def test_graft_discrete_tree():
    root = ChronologicalNode(0.0, 2.0, True)
    host = ChronologicalTree(root)
    guest = ChronologicalTree(ChronologicalNode(0.0, 1.0, False))
    graft_right(host, (root, 1.0), guest)
    assert len(root.children) == 1
    assert root.children[0].birth == 1.0
    assert host.total_length() == 3.0
    with pytest.raises(Exception):
        graft_right(host, (root, 5.0), guest)


def test_truncate_dispatch():
    tent = CadlagPath(np.array([0.0, 2.0, 4.0]), np.array([0.0, 2.0, 0.0]), np.zeros(3))
    out = truncate(tent, 1.0)
    assert out.lifetime == pytest.approx(2.0)
    root = ChronologicalNode(0.0, math.inf, True)
    root.add_child(ChronologicalNode(0.4, 0.3, False))
    tree = ChronologicalTree(root)
    cut = truncate(tree, 1.0)
    assert cut.root.lifespan == pytest.approx(1.0)
    assert len(cut.root.children) == 1
    below = truncate(tree, 10.0)
    assert below.root.lifespan == 10.0  # infinite root clipped
    assert below.root.children[0].lifespan == pytest.approx(0.3)


def test_truncate_consistency():
    rng = np.random.default_rng(5)
    tree = random_truncated_tree(rng, r=1.0)
    a = tree.truncate(0.7).truncate(0.4)
    b = tree.truncate(0.4)
    assert a.same_shape(b)


def test_skeleton_single_line():
    tree = ChronologicalTree(ChronologicalNode(0.0, 1.0, True))
    skel = prolific_skeleton(tree, 1.0)
    assert skel.marks == {(): 0.0}


def test_skeleton_root_with_one_subline():
    root = ChronologicalNode(0.0, 1.0, True)
    root.add_child(ChronologicalNode(0.3, 0.7, True))
    root.add_child(ChronologicalNode(0.2, 0.1, False))  # compact decoration
    tree = ChronologicalTree(root)
    skel = prolific_skeleton(tree, 1.0)
    assert skel.marks == {(): 0.0, (1,): pytest.approx(0.3)}
    assert skel.n_lines() == 2


def test_skeleton_lineage_handoff():
    # root dies at 0.6; two surviving children: the last-born continues the
    # first line, the earlier-born becomes the sub-line
    root = ChronologicalNode(0.0, 0.6, True)
    early = ChronologicalNode(0.2, 0.8, True)
    late = ChronologicalNode(0.5, 0.5, True)
    root.add_child(early)
    root.add_child(late)
    tree = ChronologicalTree(root)
    skel = prolific_skeleton(tree, 1.0)
    assert skel.marks == {(): 0.0, (1,): pytest.approx(0.2)}


def test_skeleton_reconstruction_identity():
    rng = np.random.default_rng(42)
    for _ in range(100):
        tree = random_truncated_tree(rng, r=1.0)
        skel = prolific_skeleton(tree, 1.0, use_tags=True)
        rebuilt = reconstruct_from_skeleton(skel, 1.0)
        again = prolific_skeleton(rebuilt, 1.0, use_tags=True)
        assert skel == again


def test_skeleton_fallback_agrees_with_tags():
    rng = np.random.default_rng(43)
    for _ in range(100):
        tree = random_truncated_tree(rng, r=1.0)
        with_tags = prolific_skeleton(tree, 1.0, use_tags=True)
        untagged = prolific_skeleton(tree, 1.0, use_tags=False)
        assert with_tags == untagged


def test_skeleton_not_truncated_guard():
    root = ChronologicalNode(0.0, 2.0, True)
    with pytest.raises(NotTruncated):
        prolific_skeleton(ChronologicalTree(root), 1.0, use_tags=False)


def test_decode_contour_metrics_agree():
    # subcritical compound Poisson contour, decoded tree vs coded distances
    e = LaplaceExponent(LevyQuartet(alpha=1.0 - 0.72, atoms=((0.9, 0.8),)))
    rng = np.random.default_rng(17)
    pairs_checked = 0
    for _ in range(60):
        x0 = rng.uniform(0.3, 1.2)
        path = simulate_levy(e, x0, StopRule.hit(0.0), rng=rng)
        tree = decode_contour(path)
        tree.validate()
        nodes = {n.extras["jump_index"]: n for _, n in tree.nodes()}
        idx = sorted(nodes)
        view = TomTreeView(path)
        for _ in range(25):
            k1, k2 = rng.choice(idx, 2)
            p1 = (nodes[k1], nodes[k1].death)
            p2 = (nodes[k2], nodes[k2].death)
            d_tree = tree.point_distance(p1, p2)
            d_coded = view.distance(path.t[k1], path.t[k2])
            assert d_tree == pytest.approx(d_coded, abs=1e-9)
            pairs_checked += 1
    assert pairs_checked >= 1000


def test_decode_contour_mass_and_heights():
    e = LaplaceExponent(LevyQuartet(alpha=1.0 - 0.72, atoms=((0.9, 0.8),)))
    rng = np.random.default_rng(23)
    path = simulate_levy(e, 1.0, StopRule.hit(0.0), rng=rng)
    tree = decode_contour(path)
    assert tree.total_length() == pytest.approx(path.lifetime, abs=1e-9)
    assert tree.max_height() == pytest.approx(path.v.max(), abs=1e-9)


def test_tree_json_roundtrip():
    rng = np.random.default_rng(3)
    tree = random_truncated_tree(rng, r=1.0)
    items = tree.to_json_obj()
    back = ChronologicalTree.from_json_obj(items)
    assert tree.same_shape(back)
    root = ChronologicalNode(0.0, math.inf, True)
    t2 = ChronologicalTree(root)
    obj = t2.to_json_obj()
    assert obj[0]["lifespan"] == "inf"
    assert ChronologicalTree.from_json_obj(obj).root.lifespan == math.inf


def test_skeleton_json():
    skel = ProlificSkeleton({(): 0.0, (1,): 0.5})
    obj = skel.to_json_obj()
    assert obj == [{"label": "", "alpha": 0.0}, {"label": "1", "alpha": 0.5}]
