#!/usr/bin/env python3
"""Static figure renderer for the simulator's CSV/JSON outputs.

Reads only the documented export schemas and draws deterministic figures:
no statistics are computed here, and schema drift fails loudly.

Usage: plots/render.py --spec spec.json
where spec.json is a figure spec {"kind", "input", "output", "title"?}
or a list of them.  Kinds: contour, tree, overlay-pmf, overlay-cdf, profile.
"""

import argparse
import csv
import json
import math
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

KINDS = ("contour", "tree", "overlay-pmf", "overlay-cdf", "profile")

STYLE = {
    "empirical": dict(color="#1f77b4"),
    "theoretical": dict(color="#d62728"),
}


class MissingInput(Exception):
    pass


class SchemaMismatch(Exception):
    pass


def _read_csv(path, expected_header):
    if not os.path.exists(path):
        raise MissingInput(f"input file not found: {path}")
    with open(path) as f:
        rows = list(csv.reader(f))
    if not rows:
        raise MissingInput(f"empty input file: {path}")
    header = [h.strip() for h in rows[0]]
    if header != expected_header:
        raise SchemaMismatch(f"{path}: header {header} != expected {expected_header}")
    body = [[float(x) for x in r] for r in rows[1:] if r]
    if not body:
        raise MissingInput(f"no data rows in {path}")
    return body


def _read_tree_json(path):
    if not os.path.exists(path):
        raise MissingInput(f"input file not found: {path}")
    with open(path) as f:
        items = json.load(f)
    if not isinstance(items, list) or not items:
        raise MissingInput(f"no nodes in {path}")
    for it in items:
        if not {"label", "birth", "lifespan", "prolific"} <= set(it):
            raise SchemaMismatch(f"{path}: node keys {sorted(it)} miss the tree schema")
    return items


def _savefig(fig, output):
    os.makedirs(os.path.dirname(os.path.abspath(output)), exist_ok=True)
    fig.savefig(output, dpi=110, metadata={"Software": None})
    plt.close(fig)


def render_contour(spec):
    rows = _read_csv(spec["input"], ["t", "value", "is_jump"])
    fig, ax = plt.subplots(figsize=(7, 3.2))
    solid_t, solid_v = [], []
    n_jumps = 0
    prev = None
    for t, v, isj in rows:
        if isj == 1.0 and prev is not None:
            ax.plot([t, t], [prev[1], v], ls="--", lw=0.9, color="#777777")
            n_jumps += 1
            solid_t.append(t)
            solid_v.append(v)
        else:
            solid_t.append(t)
            solid_v.append(v)
        prev = (t, v)
    ax.plot(solid_t, solid_v, lw=1.1, color="#1f77b4")
    ax.set_xlabel("contour time")
    ax.set_ylabel("height")
    ax.set_title(spec.get("title", "contour"))
    _savefig(fig, spec["output"])
    return {"kind": "contour", "series": 1 + n_jumps, "jumps": n_jumps}


def _layout_tree(items):
    """x position per node: leaves in label order, parents centred."""
    by_label = {tuple(int(x) for x in it["label"].split(".")) if it["label"] else ():
                it for it in items}
    labels = sorted(by_label, key=lambda l: (len(l), l))
    children = {lab: [] for lab in labels}
    for lab in labels:
        if lab:
            children[lab[:-1]].append(lab)
    xpos = {}
    next_x = [0.0]

    def place(lab):
        kids = children[lab]
        if not kids:
            xpos[lab] = next_x[0]
            next_x[0] += 1.0
        else:
            for k in kids:
                place(k)
            xpos[lab] = sum(xpos[k] for k in kids) / len(kids)

    place(())
    return by_label, children, xpos


def render_tree(spec):
    items = _read_tree_json(spec["input"])
    by_label, children, xpos = _layout_tree(items)
    fig, ax = plt.subplots(figsize=(6, 4))
    tops = []
    for lab, it in by_label.items():
        birth = it["birth"]
        span = it["lifespan"]
        top = birth + (span if span != "inf" else max(birth + 1.0, 1.0))
        tops.append(top)
        color = "#d62728" if it["prolific"] else "#1f77b4"
        ax.plot([xpos[lab], xpos[lab]], [birth, top], color=color, lw=1.6)
        for k in children[lab]:
            cb = by_label[k]["birth"]
            ax.plot([xpos[lab], xpos[k]], [cb, cb], ls="--", lw=0.8, color="#999999")
    ax.set_ylabel("height")
    ax.set_xticks([])
    ax.set_title(spec.get("title", "chronological tree"))
    _savefig(fig, spec["output"])
    return {"kind": "tree", "series": len(by_label), "nodes": len(by_label)}


def render_overlay_pmf(spec):
    rows = _read_csv(spec["input"], ["k", "empirical", "theoretical"])
    ks = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    w = 0.4
    ax.bar([k - w / 2 for k in ks], [r[1] for r in rows], width=w,
           label="empirical", **STYLE["empirical"])
    ax.bar([k + w / 2 for k in ks], [r[2] for r in rows], width=w,
           label="theoretical", **STYLE["theoretical"])
    ax.set_xlabel("k")
    ax.set_ylabel("probability")
    ax.legend()
    ax.set_title(spec.get("title", "pmf overlay"))
    _savefig(fig, spec["output"])
    return {"kind": "overlay-pmf", "series": 2}


def render_overlay_cdf(spec):
    rows = _read_csv(spec["input"], ["x", "empirical", "theoretical"])
    xs = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.step(xs, [r[1] for r in rows], where="post", label="empirical",
            **STYLE["empirical"])
    ax.plot(xs, [r[2] for r in rows], label="theoretical", **STYLE["theoretical"])
    ax.set_xlabel("x")
    ax.set_ylabel("cdf")
    ax.legend()
    ax.set_title(spec.get("title", "cdf overlay"))
    _savefig(fig, spec["output"])
    return {"kind": "overlay-cdf", "series": 2}


def render_profile(spec):
    rows = _read_csv(spec["input"], ["a", "z1", "z2"])
    a = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.step(a, [r[1] for r in rows], where="post", label="Z1 (prolific count)",
            **STYLE["empirical"])
    ax2 = ax.twinx()
    ax2.plot(a, [r[2] for r in rows], label="Z2 (mass density)", **STYLE["theoretical"])
    ax.set_xlabel("level a")
    ax.set_ylabel("Z1")
    ax2.set_ylabel("Z2")
    ax.set_title(spec.get("title", "level profile"))
    _savefig(fig, spec["output"])
    return {"kind": "profile", "series": 2}


RENDERERS = {
    "contour": render_contour,
    "tree": render_tree,
    "overlay-pmf": render_overlay_pmf,
    "overlay-cdf": render_overlay_cdf,
    "profile": render_profile,
}


def render(spec):
    """Render one figure spec dict; returns a summary with series counts."""
    missing = {"kind", "input", "output"} - set(spec)
    if missing:
        raise SchemaMismatch(f"figure spec missing keys: {sorted(missing)}")
    if spec["kind"] not in RENDERERS:
        raise SchemaMismatch(f"unknown figure kind {spec['kind']!r}")
    return RENDERERS[spec["kind"]](spec)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spec", required=True, help="figure spec JSON (object or list)")
    args = ap.parse_args(argv)
    with open(args.spec) as f:
        specs = json.load(f)
    if isinstance(specs, dict):
        specs = [specs]
    for spec in specs:
        summary = render(spec)
        print(json.dumps({"output": spec["output"], **summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
