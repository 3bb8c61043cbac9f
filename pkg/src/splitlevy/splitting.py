"""Samplers for the random tree laws at a truncation height: the Yule
contour, nu^r contours, sin trees, recursively grafted supercritical
trees and the spine-with-grafts family."""

from __future__ import annotations

import math

import numpy as np

from .errors import NodeBudgetExceeded, SubcriticalInput
from .exponent import LaplaceExponent
from .paths import CadlagPath, StopRule, concatenate, post_minimum, simulate_levy, time_change_below
from .trees import ChronologicalNode, ChronologicalTree, splice_coded

__all__ = [
    "margin_for_tail",
    "simulate_yule_contour",
    "simulate_nu_r",
    "simulate_sin_tree",
    "simulate_upsilon_tree",
    "simulate_eta_x",
]

DEFAULT_TAIL = 1e-6
DEFAULT_MESH = 1e-3
DEFAULT_NODE_BUDGET = 1_000_000


def margin_for_tail(b, tail=DEFAULT_TAIL):
    """Margin K with residual probability e**(-b K) = tail that a path
    above the margin ever returns."""
    return -math.log(tail) / b


def _require_supercritical_unkilled(exponent):
    if not exponent.is_supercritical:
        raise SubcriticalInput("sampler requires b > 0")
    if exponent.quartet.kappa > 0:
        raise ValueError("killed exponents are not supported by the path samplers; "
                         "the Yule family has its own exact contour sampler")


def simulate_yule_contour(b, r, rng):
    """Exact truncated Yule contour: slope -1 ramps from r with iid
    exponential(b) spacings, stopping at the first spacing above r.

    Returns the contour path; info carries the alive-at-r count (the
    number of ramps), the complete spacing list and the final
    overshooting spacing.
    """
    if b <= 0 or r <= 0:
        raise ValueError("b and r must be > 0")
    spacings = []
    while True:
        s = rng.exponential(1.0 / b)
        spacings.append(s)
        if s > r:
            break
    n = len(spacings)
    t = np.empty(n + 1)
    v = np.empty(n + 1)
    j = np.zeros(n + 1)
    t[0], v[0] = 0.0, r
    cum = 0.0
    for i in range(n - 1):
        cum += spacings[i]
        t[i + 1] = cum
        v[i + 1] = r
        j[i + 1] = spacings[i]
    t[n] = cum + r
    v[n] = 0.0
    path = CadlagPath(t, v, j, "hit_zero")
    path.info.update(n_alive=n, spacings=spacings[:-1], overshoot=spacings[-1])
    return path


def _post_min_below(exponent, r, rng, h, tail):
    """X-> time-changed to remain below r, complete up to tail probability."""
    K = margin_for_tail(exponent.b, tail)
    raw = simulate_levy(exponent, 0.0, StopRule.min_settled(r + K), h=h, rng=rng)
    return time_change_below(post_minimum(raw), r)


def simulate_nu_r(exponent, r, rng, h=DEFAULT_MESH, tail=DEFAULT_TAIL):
    """Contour of the prolific restriction at truncation r: the post-minimum
    path below r followed by unconditioned copies from r below r until the
    first copy reaches zero.

    info: n_copies (the prolific count at level r), piece lifetimes.
    """
    _require_supercritical_unkilled(exponent)
    K = margin_for_tail(exponent.b, tail)
    pieces = [_post_min_below(exponent, r, rng, h, tail)]
    n_copies = 0
    while True:
        raw = simulate_levy(exponent, r, StopRule.hit(0.0, escape=r + K), h=h, rng=rng)
        pieces.append(time_change_below(raw, r))
        n_copies += 1
        if raw.terminal_kind == "hit_zero":
            break
    out = concatenate(pieces)
    out.terminal_kind = "hit_zero"
    out.info.update(n_copies=n_copies, piece_lifetimes=[p.lifetime for p in pieces])
    return out


def _sin_stages(exponent, r, rng, h, tail):
    left = _post_min_below(exponent, r, rng, h, tail)
    sharp = exponent.sharp()
    right_raw = simulate_levy(sharp, r, StopRule.hit(0.0), h=h, rng=rng)
    right = time_change_below(right_raw, r)
    return left, right


def simulate_sin_tree(exponent, r, rng, h=DEFAULT_MESH, tail=DEFAULT_TAIL):
    """Truncated sin tree contour: exactly two concatenated stages, the
    second started at r and killed at zero.  The skeleton is the single
    spine line."""
    _require_supercritical_unkilled(exponent)
    left, right = _sin_stages(exponent, r, rng, h, tail)
    contour = concatenate([left, right])
    contour.terminal_kind = "hit_zero"
    contour.info.update(stage_lifetimes=(left.lifetime, right.lifetime))
    spine = ChronologicalNode(0.0, r, prolific=True)
    return contour, ChronologicalTree(spine)


class _Budget:
    def __init__(self, n, seed=None):
        self.left = n
        self.seed = seed

    def spend(self):
        self.left -= 1
        if self.left < 0:
            raise NodeBudgetExceeded("node budget exceeded", seed=self.seed)


def simulate_upsilon_tree(exponent, r, rng, h=DEFAULT_MESH, tail=DEFAULT_TAIL,
                          node_budget=DEFAULT_NODE_BUDGET, seed=None):
    """Supercritical prolific tree truncated at r by recursive grafting:
    iid copies grafted to the right of the sin spine at exponential(b)
    heights, each truncated at the remaining height.

    Returns (skeleton tree, contour).  Skeleton nodes carry, in extras,
    the spine birth spacings and the final overshooting spacing."""
    _require_supercritical_unkilled(exponent)
    b = exponent.b
    budget = _Budget(node_budget, seed)

    def build(r_rem):
        budget.spend()
        contour, _ = simulate_sin_tree(exponent, r_rem, rng, h=h, tail=tail)
        stage1_len, _ = contour.info["stage_lifetimes"]
        heights = []
        spacings = []
        cum = 0.0
        while True:
            s = rng.exponential(1.0 / b)
            spacings.append(s)
            cum += s
            if cum >= r_rem:
                break
            heights.append(cum)
        node = ChronologicalNode(0.0, r_rem, prolific=True,
                                 extras={"spacings": spacings[:-1], "overshoot": spacings[-1]})
        if heights:
            times, found = contour.last_passage(np.asarray(heights))
            # the spine point at height s is last visited inside stage 2
            guests = []
            for height, site, ok in zip(heights, times, found):
                sub_node, sub_contour = build(r_rem - height)
                guests.append((float(site), height, sub_contour, sub_node))
            for site, height, sub_contour, sub_node in sorted(guests, key=lambda g: -g[0]):
                contour = splice_coded(contour, site, sub_contour)
                node.add_child(_shift_node(sub_node, height))
        return node, contour

    root, contour = build(float(r))
    contour.info.update(n_lines=_count(root))
    return ChronologicalTree(root), contour


def _shift_node(node, dh):
    new = ChronologicalNode(node.birth + dh, node.lifespan, node.prolific,
                            extras=dict(node.extras))
    for c in node.children:
        new.add_child(_shift_node(c, dh))
    return new


def _count(node):
    return 1 + sum(_count(c) for c in node.children)


def simulate_eta_x(exponent, x, r, rng, h=DEFAULT_MESH, tail=DEFAULT_TAIL,
                   node_budget=DEFAULT_NODE_BUDGET, include_compact=True, seed=None):
    """Spine [0, x] with grafts, truncated at r.

    The compact grafts are sampled in aggregate through the conditioned
    (tilted) path from x killed at zero, which codes the spine together
    with its subcritical decoration forest; the prolific grafts are a
    Poisson(b * min(x, r)) collection of recursively grafted trees.

    Returns (contour, forest tree) where the forest tree has the spine as
    an untagged root and the prolific graft skeletons as tagged children.
    """
    _require_supercritical_unkilled(exponent)
    if x <= 0:
        raise ValueError("x must be > 0")
    b = exponent.b
    if include_compact:
        sharp = exponent.sharp()
        base_raw = simulate_levy(sharp, x, StopRule.hit(0.0), h=h, rng=rng)
        base = time_change_below(base_raw, r) if x > r or base_raw.v.max() > r else base_raw
    else:
        top = min(x, r)
        base = CadlagPath(np.array([0.0, top]), np.array([top, 0.0]), np.zeros(2), "hit_zero")

    span = min(x, r)
    n_grafts = rng.poisson(b * span)
    heights = np.sort(rng.uniform(0.0, span, size=n_grafts))[::-1]  # descending

    spine = ChronologicalNode(0.0, span, prolific=False, extras={"spine": True})
    contour = base
    if n_grafts:
        times, found = contour.last_passage(np.sort(heights))
        site_by_height = dict(zip(np.sort(heights), times))
        guests = []
        for height in heights:
            sub_tree, sub_contour = simulate_upsilon_tree(
                exponent, r - height, rng, h=h, tail=tail,
                node_budget=node_budget, seed=seed)
            guests.append((float(site_by_height[height]), float(height), sub_contour, sub_tree))
        for site, height, sub_contour, sub_tree in sorted(guests, key=lambda g: -g[0]):
            contour = splice_coded(contour, site, sub_contour)
            spine.add_child(_shift_node(sub_tree.root, height))
    contour.info.update(n_prolific_grafts=int(n_grafts))
    return contour, ChronologicalTree(spine)
