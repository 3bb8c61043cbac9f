"""Trees: coded views with metric/order/measure queries, exact discrete
chronological trees, grafting, truncation and the prolific skeleton."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSite, MalformedPath, NotTruncated, OutOfDomain
from .paths import CadlagPath, time_change_below

__all__ = [
    "TomTreeView",
    "ChronologicalNode",
    "ChronologicalTree",
    "ProlificSkeleton",
    "lukasiewicz_to_tree",
    "tree_to_lukasiewicz",
    "decode_contour",
    "splice_coded",
    "graft_right",
    "truncate",
    "prolific_skeleton",
    "reconstruct_from_skeleton",
    "random_truncated_tree",
]

_HTOL = 1e-9


# ---------------------------------------------------------------------------
# coded-tree view
# ---------------------------------------------------------------------------


class _SparseMin:
    """O(1) range-min over an array after O(n log n) setup."""

    def __init__(self, a):
        a = np.asarray(a, dtype=float)
        n = a.size
        levels = [a]
        k = 1
        while (1 << k) <= n:
            prev = levels[-1]
            levels.append(np.minimum(prev[: n - (1 << k) + 1],
                                     prev[(1 << (k - 1)): n - (1 << k) + 1 + (1 << (k - 1))]))
            k += 1
        self.levels = levels

    def query(self, i, j):
        """min over a[i..j] inclusive; requires i <= j."""
        span = j - i + 1
        k = span.bit_length() - 1
        lev = self.levels[k]
        return min(lev[i], lev[j - (1 << k) + 1])


class TomTreeView:
    """Read-only metric/order/measure queries on the tree coded by f.

    f must satisfy f(lifetime) = 0.  Tree points are represented by
    coding times; equality of points is d_f = 0.
    """

    def __init__(self, coding: CadlagPath):
        if abs(coding.terminal_value) > 1e-6:
            raise MalformedPath("coding function must end at 0")
        self.coding = coding
        self._segmin = _SparseMin(coding.segment_minima()) if coding.n_breakpoints > 1 else None

    @property
    def total_measure(self):
        return self.coding.lifetime

    def height(self, s):
        return self.coding.evaluate(s)

    def interval_min(self, s, t):
        """inf of f over [min(s,t), max(s,t)]."""
        if s > t:
            s, t = t, s
        p = self.coding
        tol = 1e-9 * max(1.0, p.lifetime)
        if s < -tol or t > p.lifetime + tol:
            raise OutOfDomain("interval outside the coding domain")
        ks = int(np.clip(np.searchsorted(p.t, s, side="right") - 1, 0, p.n_breakpoints - 2))
        kt = int(np.clip(np.searchsorted(p.t, t, side="right") - 1, 0, p.n_breakpoints - 2))
        fs, ft = p.evaluate(s), p.evaluate(t)
        if ks == kt:
            return min(fs, ft)
        # partial segment at s: from s to the end of segment ks
        lv = p.left_values()
        m = min(fs, lv[ks + 1], p.v[kt], ft)
        if kt - 1 >= ks + 1 and self._segmin is not None:
            m = min(m, self._segmin.query(ks + 1, kt - 1))
        return m

    def distance(self, s, t):
        """d_f(s, t) = f(s) + f(t) - 2 inf_{[s,t]} f."""
        return self.height(s) + self.height(t) - 2.0 * self.interval_min(s, t)

    def same_point(self, s, t, tol=1e-12):
        return self.distance(s, t) <= tol

    def canonical_time(self, s):
        """sup of the d_f-equivalence class: the last u >= s with
        f(u) = f(s) and inf of f over [s, u] >= f(s)."""
        return self._last_time_at(s, None)

    def ancestor_time(self, s, h):
        """Canonical time of the ancestor of [s] at height h <= f(s)."""
        if h > self.height(s) + 1e-9:
            raise OutOfDomain("ancestor height above the point")
        return self._last_time_at(s, h)

    def _last_time_at(self, s, h):
        p = self.coding
        fs = p.evaluate(s) if h is None else float(h)
        lv = p.left_values()
        tol = 1e-12 * max(1.0, abs(fs))
        ks = int(np.clip(np.searchsorted(p.t, s, side="right") - 1, 0, p.n_breakpoints - 2))
        best = float(s)
        a, b = fs, float(lv[ks + 1])
        t0, t1 = float(s), float(p.t[ks + 1])
        k = ks
        while True:
            if b < fs - tol:
                if a >= fs - tol and a > b:
                    frac = (a - fs) / (a - b)
                    return t0 + frac * (t1 - t0)
                return best
            # segment stays at or above fs; record its last touch of fs
            if a <= fs + tol and b <= fs + tol:
                best = t1
            elif a <= fs + tol <= b or b <= fs + tol <= a:
                if a != b:
                    frac = (a - fs) / (a - b)
                    best = t0 + frac * (t1 - t0)
                else:
                    best = t1
            k += 1
            if k >= p.n_breakpoints - 1:
                return best
            a, b = float(p.v[k]), float(lv[k + 1])
            t0, t1 = float(p.t[k]), float(p.t[k + 1])
            if a < fs - tol:  # jump landed below the class height
                return best

    def order_leq(self, s, t):
        """Total order via sup-of-class representatives."""
        return self.canonical_time(s) <= self.canonical_time(t)

    def point_count_at(self, level):
        """Number of distinct tree points at the given height."""
        return self.coding.upcrossings(level)

    def root_time(self):
        return self.coding.lifetime


# ---------------------------------------------------------------------------
# discrete chronological trees
# ---------------------------------------------------------------------------


@dataclass
class ChronologicalNode:
    birth: float
    lifespan: float  # math.inf allowed
    prolific: bool = False
    children: list = field(default_factory=list)
    parent: "ChronologicalNode | None" = None
    extras: dict = field(default_factory=dict)

    @property
    def death(self):
        return self.birth + self.lifespan

    def add_child(self, child):
        child.parent = self
        # children kept in birth-ascending order; ties keep insertion order
        i = len(self.children)
        while i > 0 and self.children[i - 1].birth > child.birth + _HTOL:
            i -= 1
        self.children.insert(i, child)
        return child


class ChronologicalTree:
    """Plane tree with birth heights and lifespans (Ulam-Harris labelled)."""

    def __init__(self, root: ChronologicalNode):
        self.root = root

    def nodes(self):
        """Yield (label tuple, node) in depth-first preorder."""
        stack = [((), self.root)]
        while stack:
            label, node = stack.pop()
            yield label, node
            for i in range(len(node.children) - 1, -1, -1):
                stack.append((label + (i + 1,), node.children[i]))

    def size(self):
        return sum(1 for _ in self.nodes())

    def validate(self):
        for _, node in self.nodes():
            for c in node.children:
                if c.birth < node.birth - _HTOL or c.birth > node.death + _HTOL:
                    raise ValueError("child born outside the parent's life interval")
        return self

    def max_height(self):
        return max(node.death for _, node in self.nodes())

    def total_length(self):
        return sum(node.lifespan for _, node in self.nodes())

    def count_crossing(self, a):
        """Number of lifelines alive at height a (birth <= a < death)."""
        return sum(1 for _, n in self.nodes() if n.birth <= a < n.death)

    def count_crossing_prolific(self, a):
        return sum(1 for _, n in self.nodes() if n.prolific and n.birth <= a < n.death)

    def truncate(self, r):
        """Clip all lifespans at height r; drop nodes born at or above r."""

        def clip(node):
            new = ChronologicalNode(node.birth, min(node.lifespan, r - node.birth),
                                    node.prolific, extras=dict(node.extras))
            for c in node.children:
                if c.birth < r - _HTOL:
                    new.add_child(clip(c))
            return new

        if self.root.birth >= r:
            raise NotTruncated("root born above the truncation height")
        return ChronologicalTree(clip(self.root))

    def same_shape(self, other, tol=1e-9):
        a = [(lab, n.birth, n.lifespan, n.prolific) for lab, n in self.nodes()]
        b = [(lab, n.birth, n.lifespan, n.prolific) for lab, n in other.nodes()]
        if len(a) != len(b):
            return False
        for (la, ba, sa, pa), (lb, bb, sb, pb) in zip(a, b):
            if la != lb or pa != pb or abs(ba - bb) > tol:
                return False
            if math.isinf(sa) != math.isinf(sb):
                return False
            if not math.isinf(sa) and abs(sa - sb) > tol:
                return False
        return True

    # ---- point geometry (used by metric cross-checks) -----------------

    def point_distance(self, p1, p2):
        """Distance between points (node, height) on lifelines."""
        n1, h1 = p1
        n2, h2 = p2
        chain1 = self._chain(n1)
        chain2 = self._chain(n2)
        common = 0
        for a, b in zip(chain1, chain2):
            if a is not b:
                break
            common += 1
        if common == len(chain1) and common == len(chain2):
            return abs(h1 - h2)
        # departure heights on the deepest common node
        d1 = chain1[common].birth if common < len(chain1) else h1
        d2 = chain2[common].birth if common < len(chain2) else h2
        m = min(d1, d2)
        return (h1 - m) + (h2 - m)

    @staticmethod
    def _chain(node):
        out = []
        while node is not None:
            out.append(node)
            node = node.parent
        return out[::-1]

    # ---- JSON export ----------------------------------------------------

    def to_json_obj(self):
        out = []
        for label, node in self.nodes():
            item = {
                "label": ".".join(str(i) for i in label),
                "birth": node.birth,
                "lifespan": "inf" if math.isinf(node.lifespan) else node.lifespan,
                "prolific": bool(node.prolific),
            }
            if "branch_kind" in node.extras:
                item["branch_kind"] = node.extras["branch_kind"]
            out.append(item)
        return out

    def to_json(self, fileobj=None):
        s = json.dumps(self.to_json_obj(), indent=1)
        if fileobj is not None:
            fileobj.write(s)
        return s

    @staticmethod
    def from_json_obj(items):
        by_label = {}
        for it in items:
            label = tuple(int(x) for x in it["label"].split(".")) if it["label"] else ()
            span = math.inf if it["lifespan"] == "inf" else float(it["lifespan"])
            by_label[label] = ChronologicalNode(float(it["birth"]), span, bool(it["prolific"]))
        for label in sorted(by_label, key=len):
            if label:
                by_label[label[:-1]].add_child(by_label[label])
        return ChronologicalTree(by_label[()])


# ---------------------------------------------------------------------------
# Lukasiewicz coding of unit-edge plane trees
# ---------------------------------------------------------------------------


def lukasiewicz_to_tree(e) -> ChronologicalTree:
    """Decode a skip-free excursion-like integer path into a plane tree."""
    e = [int(x) for x in e]
    if len(e) < 2 or e[0] != 0 or e[-1] != -1:
        raise MalformedPath("path must start at 0 and end at -1")
    incr = [e[i + 1] - e[i] for i in range(len(e) - 1)]
    if any(d < -1 for d in incr):
        raise MalformedPath("increments must be >= -1")
    if any(x < 0 for x in e[:-1]):
        raise MalformedPath("path must stay nonnegative before the final step")
    p = len(e) - 1  # number of nodes
    root = ChronologicalNode(0.0, 1.0)
    k_root = incr[0] + 1
    stack = [(root, k_root)]
    for i in range(1, p):
        while stack and stack[-1][1] == 0:
            stack.pop()
        if not stack:
            raise MalformedPath("ran out of open nodes before the path ended")
        parent, remaining = stack.pop()
        node = ChronologicalNode(parent.birth + 1.0, 1.0)
        parent.add_child(node)
        stack.append((parent, remaining - 1))
        stack.append((node, incr[i] + 1))
    while stack and stack[-1][1] == 0:
        stack.pop()
    if stack:
        raise MalformedPath("unfilled offspring slots remain")
    return ChronologicalTree(root)


def tree_to_lukasiewicz(tree: ChronologicalTree):
    """Inverse coding: preorder, increments (#children - 1)."""
    e = [0]
    for _, node in tree.nodes():
        e.append(e[-1] + len(node.children) - 1)
    return e


# ---------------------------------------------------------------------------
# finite-variation contour decoding
# ---------------------------------------------------------------------------


def decode_contour(path: CadlagPath, tag_level=None) -> ChronologicalTree:
    """Decode a slope -1 contour with upward jumps into the chronological
    tree it codes.  Lifelines whose (clipped) death reaches tag_level are
    tagged prolific."""
    from .errors import NotFiniteVariation

    t, v, jump = path.t, path.v, path.jump
    lv = path.left_values()
    for k in range(path.n_breakpoints - 1):
        dt = t[k + 1] - t[k]
        if dt > 1e-12 and abs((lv[k + 1] - v[k]) / dt + 1.0) > 1e-6:
            raise NotFiniteVariation("contour must descend at slope -1 between jumps")
    if abs(path.terminal_value) > 1e-9:
        raise MalformedPath("contour must terminate at 0")

    def tagged(death):
        return tag_level is not None and death >= tag_level - _HTOL

    root = ChronologicalNode(0.0, float(v[0]), prolific=tagged(v[0]))
    root.extras["jump_index"] = 0
    stack = [root]
    for k in range(1, path.n_breakpoints):
        if jump[k] <= 0:
            continue
        birth = float(lv[k])
        death = float(v[k])
        while stack and stack[-1].birth > birth + _HTOL:
            stack.pop()
        if not stack:
            raise MalformedPath("jump below the root birth height")
        node = ChronologicalNode(birth, death - birth, prolific=tagged(death))
        node.extras["jump_index"] = k
        stack[-1].add_child(node)
        stack.append(node)
    return ChronologicalTree(root)


# ---------------------------------------------------------------------------
# grafting
# ---------------------------------------------------------------------------


def splice_coded(host: CadlagPath, site_time, guest: CadlagPath) -> CadlagPath:
    """Coding function of the graft of `guest` to the right of the host
    point [site_time]: host before the site, guest shifted to the site
    height, host remainder."""
    if site_time < -1e-12 or site_time > host.lifetime + 1e-12:
        raise InvalidSite("site time outside the host coding interval")
    if guest.lifetime == 0:
        return host
    if abs(guest.terminal_value) > 1e-9:
        raise MalformedPath("guest coding function must terminate at 0")
    site_time = float(np.clip(site_time, 0.0, host.lifetime))
    s = host.evaluate(site_time)
    keep = host.t < site_time - 1e-15
    t_left, v_left, j_left = host.t[keep], host.v[keep], host.jump[keep]

    g0 = guest.v[0]
    gt = guest.t + site_time
    gv = guest.v + s
    gj = guest.jump.copy()
    if g0 > 0:
        gj[0] = g0  # junction jump up to the guest's starting value
        t_mid = np.concatenate((gt,))
        v_mid = np.concatenate((gv,))
        j_mid = np.concatenate((gj,))
    else:
        t_mid = np.concatenate(([site_time], gt[1:]))
        v_mid = np.concatenate(([s], gv[1:]))
        j_mid = np.concatenate(([0.0], gj[1:]))

    after = host.t > site_time + 1e-15
    t_right = host.t[after] + guest.lifetime
    v_right = host.v[after]
    j_right = host.jump[after]
    reentry_t = np.array([site_time + guest.lifetime])
    reentry_v = np.array([s])
    reentry_j = np.array([0.0])

    t = np.concatenate((t_left, t_mid, reentry_t, t_right))
    v = np.concatenate((v_left, v_mid, reentry_v, v_right))
    j = np.concatenate((j_left, j_mid, reentry_j, j_right))
    return CadlagPath(t, v, j, host.terminal_kind, dict(host.info))


def graft_right(host, site, guest):
    """Graft `guest` to the right of `site` on `host`.

    Coded form: host and guest are CadlagPath coding functions and site
    is a coding time.  Discrete form: host and guest are
    ChronologicalTree and site is (node, height)."""
    if isinstance(host, CadlagPath):
        return splice_coded(host, site, guest)
    node, height = site
    if height < node.birth - _HTOL or height > node.death + _HTOL:
        raise InvalidSite("graft height outside the site lifeline")
    gr = guest.root
    shifted = _shift_subtree(gr, height - gr.birth)
    node.add_child(shifted)
    return host


def _shift_subtree(node, dh):
    new = ChronologicalNode(node.birth + dh, node.lifespan, node.prolific,
                            extras=dict(node.extras))
    for c in node.children:
        new.add_child(_shift_subtree(c, dh))
    return new


def truncate(obj, r):
    """Height truncation: time-change below r for coded objects, lifespan
    clipping for chronological trees."""
    if isinstance(obj, CadlagPath):
        return time_change_below(obj, r)
    if isinstance(obj, TomTreeView):
        return TomTreeView(time_change_below(obj.coding, r))
    return obj.truncate(r)


# ---------------------------------------------------------------------------
# prolific skeleton
# ---------------------------------------------------------------------------


@dataclass
class ProlificSkeleton:
    """Marked plane tree of the infinite lines of descent: label -> alpha."""

    marks: dict  # tuple label -> birth height of the line

    def labels(self):
        return sorted(self.marks, key=lambda l: (len(l), l))

    def n_lines(self):
        return len(self.marks)

    def first_line_child_heights(self):
        """Birth heights of the first line's immediate sub-lines, ascending."""
        return sorted(self.marks[lab] for lab in self.marks if len(lab) == 1)

    def to_json_obj(self):
        return [{"label": ".".join(str(i) for i in lab), "alpha": a}
                for lab, a in sorted(self.marks.items(), key=lambda kv: (len(kv[0]), kv[0]))]

    def __eq__(self, other):
        if set(self.marks) != set(other.marks):
            return False
        return all(abs(self.marks[k] - other.marks[k]) <= 1e-9 for k in self.marks)


def _is_prolific_fallback(tree, r):
    """Untagged detection: a node is on an infinite line iff its subtree
    attains the truncation height r (the nested-sphere criterion at a
    finite horizon)."""
    flags = {}

    def walk(node):
        top = node.death
        best = top
        for c in node.children:
            best = max(best, walk(c))
        flags[id(node)] = best >= r - _HTOL
        return best

    top = walk(tree.root)
    if top > r + 1e-6:
        raise NotTruncated("tree extends above the truncation height")
    return flags


def prolific_skeleton(tree: ChronologicalTree, r, use_tags=True) -> ProlificSkeleton:
    """Extract the marked plane tree (tau_I, alpha) of lines reaching r.

    With use_tags the simulator-provided prolific flags decide; otherwise
    the subtree-reaches-r fallback is used.  Lines follow lifelines and,
    when an individual dies below r, continue through its last-born
    surviving child; the remaining surviving children root the sub-lines,
    labelled by increasing birth height (ties by sibling rank)."""
    if use_tags:
        is_pro = lambda n: n.prolific
    else:
        flags = _is_prolific_fallback(tree, r)
        is_pro = lambda n: flags[id(n)]

    marks = {}
    if not is_pro(tree.root):
        return ProlificSkeleton(marks)

    def follow(entry_node, label, alpha):
        marks[label] = alpha
        components = []  # (birth, rank, node)
        current = entry_node
        while True:
            pro_children = [(c.birth, i, c) for i, c in enumerate(current.children) if is_pro(c)]
            if current.death >= r - _HTOL:
                components.extend(pro_children)
                break
            if not pro_children:
                raise NotTruncated(
                    "line dies below the truncation height with no surviving child")
            pro_children.sort(key=lambda t: (t[0], t[1]))
            cont = pro_children[-1]  # order-first continuation: last-born survivor
            components.extend(pro_children[:-1])
            current = cont[2]
        components.sort(key=lambda t: (t[0], t[1]))
        for i, (birth, _, node) in enumerate(components):
            follow(node, label + (i + 1,), birth)

    follow(tree.root, (), tree.root.birth)
    return ProlificSkeleton(marks)


def reconstruct_from_skeleton(skel: ProlificSkeleton, r) -> ChronologicalTree:
    """Rebuild the surviving set as a chronological tree: one immortal
    (clipped at r) lifeline per mark."""
    nodes = {}
    for lab in skel.labels():
        a = skel.marks[lab]
        nodes[lab] = ChronologicalNode(a, r - a, prolific=True)
    for lab in skel.labels():
        if lab:
            nodes[lab[:-1]].add_child(nodes[lab])
    return ChronologicalTree(nodes[()])


# ---------------------------------------------------------------------------
# random tagged trees (test fixtures for the skeleton algorithm)
# ---------------------------------------------------------------------------


def random_truncated_tree(rng, r=1.0, mean_lines=2.0, decoration_rate=1.5,
                          max_nodes=4000) -> ChronologicalTree:
    """Random truncated tree whose tagged lines are exactly those reaching r.

    Lifelines may die below r and hand the line to a surviving child, so
    the lineage-following logic is exercised, and untagged compact
    decorations stay strictly below r."""
    budget = [max_nodes]

    def decoration(birth):
        top_cap = birth + (r - birth) * rng.uniform(0.1, 0.9)
        node = ChronologicalNode(birth, (top_cap - birth) * rng.uniform(0.3, 1.0), False)
        if budget[0] > 0 and rng.random() < 0.4:
            budget[0] -= 1
            cb = rng.uniform(node.birth, node.death)
            node.add_child(decoration(cb))
        return node

    def line(entry, depth):
        budget[0] -= 1
        dies_early = depth < 3 and rng.random() < 0.35 and (r - entry) > 0.05
        if dies_early:
            death = entry + (r - entry) * rng.uniform(0.3, 0.9)
        else:
            death = r
        node = ChronologicalNode(entry, death - entry, True)
        n_sub = rng.poisson(mean_lines * (death - entry) / r) if budget[0] > 0 else 0
        if dies_early:
            n_sub = max(1, n_sub)  # the line must continue through a child
        for _ in range(min(n_sub, max(budget[0], 0))):
            cb = rng.uniform(entry, death)
            node.add_child(line(cb, depth + 1))
        n_dec = rng.poisson(decoration_rate * (death - entry))
        for _ in range(min(n_dec, max(budget[0], 0))):
            budget[0] -= 1
            cb = rng.uniform(entry, death)
            node.add_child(decoration(cb))
        return node

    return ChronologicalTree(line(0.0, 0))
