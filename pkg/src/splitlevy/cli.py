"""Command-line entry point: simulators, verification experiments and
fixture export.  Exit codes: 0 success/pass, 1 test failure, 2 usage."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .branching import simulate_cb_batch, simulate_cbi_batch, simulate_twotype_batch
from .experiments import list_experiments, run_experiment
from .exponent import load_exponent, quartet_from_dict, LaplaceExponent
from .genealogy import level_profile
from .paths import path_to_csv
from .splitting import (
    simulate_eta_x,
    simulate_nu_r,
    simulate_sin_tree,
    simulate_upsilon_tree,
    simulate_yule_contour,
)
from .trees import decode_contour, prolific_skeleton

SIM_KINDS = ("yule", "nu-r", "sin", "upsilon-tree", "eta-x", "cb", "cbi", "twotype")


def _default_out(args):
    return args.out or os.environ.get("SPLITLEVY_OUT", "out")


def _load_table(path):
    data = open(path, "rb").read()
    if str(path).endswith(".json"):
        return json.loads(data)
    try:
        import tomllib
    except ImportError:
        import tomli as tomllib
    try:
        return tomllib.loads(data.decode())
    except Exception:
        return json.loads(data)


def _write_rows(path, header, rows):
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(f"{x:.10g}" if isinstance(x, float) else str(x)
                             for x in row) + "\n")


def cmd_simulate(args):
    out = _default_out(args)
    os.makedirs(out, exist_ok=True)
    seeds = np.random.SeedSequence(args.seed).spawn(args.samples)
    kind = args.kind
    exponent = load_exponent(args.psi) if args.psi else None
    if exponent is None:
        print("error: --psi is required", file=sys.stderr)
        return 2

    batch_kinds = {"cb", "cbi", "twotype"}
    rows = []
    if kind in batch_kinds:
        rng = np.random.default_rng(np.random.SeedSequence(args.seed))
        if kind == "cb":
            z = simulate_cb_batch(exponent, args.x0, args.t, args.samples, rng, dt=args.dt)
            rows = [(float(v),) for v in z]
            header = "z"
        elif kind == "cbi":
            z = simulate_cbi_batch(exponent, args.x0, args.t, args.samples, rng,
                                   n_spines=args.n0 or 1, dt=args.dt)
            rows = [(float(v),) for v in z]
            header = "z"
        else:
            n, z = simulate_twotype_batch(exponent, args.n0 or 1, args.x0, args.t,
                                          args.samples, rng, dt=args.dt)
            rows = [(int(a), float(b)) for a, b in zip(n, z)]
            header = "n,z"
    else:
        header_map = {
            "yule": "n_alive,lifetime",
            "nu-r": "lifetime,n_copies",
            "sin": "lifetime,stage1,stage2",
            "upsilon-tree": "lifetime,n_lines",
            "eta-x": "lifetime,n_prolific_grafts",
        }
        header = header_map[kind]
        for i, ss in enumerate(seeds):
            rng = np.random.default_rng(ss)
            tree = None
            if kind == "yule":
                p = simulate_yule_contour(exponent.b, args.r, rng)
                rows.append((int(p.info["n_alive"]), float(p.lifetime)))
            elif kind == "nu-r":
                p = simulate_nu_r(exponent, args.r, rng, h=args.h)
                rows.append((float(p.lifetime), int(p.info["n_copies"])))
            elif kind == "sin":
                p, tree = simulate_sin_tree(exponent, args.r, rng, h=args.h)
                s1, s2 = p.info["stage_lifetimes"]
                rows.append((float(p.lifetime), float(s1), float(s2)))
            elif kind == "upsilon-tree":
                tree, p = simulate_upsilon_tree(exponent, args.r, rng, h=args.h,
                                                seed=int(args.seed))
                rows.append((float(p.lifetime), int(p.info["n_lines"])))
            else:
                p, tree = simulate_eta_x(exponent, args.x, args.r, rng, h=args.h,
                                         seed=int(args.seed))
                rows.append((float(p.lifetime), int(p.info["n_prolific_grafts"])))
            if i < args.keep_paths:
                with open(os.path.join(out, f"contour_{i:04d}.csv"), "w") as f:
                    path_to_csv(p, f)
                if tree is not None:
                    with open(os.path.join(out, f"tree_{i:04d}.json"), "w") as f:
                        tree.to_json(f)
                    if kind in ("upsilon-tree", "sin"):
                        skel = prolific_skeleton(tree, args.r)
                        with open(os.path.join(out, f"skeleton_{i:04d}.json"), "w") as f:
                            json.dump(skel.to_json_obj(), f, indent=1)
    _write_rows(os.path.join(out, "functionals.csv"), header, rows)
    print(f"simulate {kind}: {len(rows)} replicates -> {out}/functionals.csv")
    return 0


def cmd_verify(args):
    out = _default_out(args)
    config = _load_table(args.config) if args.config else None
    report = run_experiment(args.name, config=config, seed=args.seed, out=out,
                            jobs=args.jobs)
    status = "PASS" if report.passed else "FAIL"
    print(f"{report.name}: {status} p={report.p_value:.5g} statistic={report.statistic:.5g} "
          f"n={report.n} seed={report.seed} [{report.runtime_s:.1f}s]")
    return 0 if report.passed else 1


def cmd_list(args):
    for name in list_experiments():
        print(name)
    return 0


def cmd_export(args):
    out = _default_out(args)
    os.makedirs(out, exist_ok=True)
    if args.what == "exponent-template":
        path = os.path.join(out, "exponent.toml")
        with open(path, "w") as f:
            f.write("# spectrally positive Levy exponent specification\n"
                    "kappa = 0.0\nalpha = -1.0\nbeta = 1.0\n"
                    "atoms = []  # [[mass, size], ...]\n\n"
                    "[exp_component]\nmass = 0.0\nrate = 1.0\n")
        print(path)
        return 0
    # fixtures for the plotting component
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    yule_b, r = 0.7, 1.0
    p = simulate_yule_contour(yule_b, r, rng)
    with open(os.path.join(out, "contour.csv"), "w") as f:
        path_to_csv(p, f)
    tree = decode_contour(p, tag_level=r)
    with open(os.path.join(out, "tree.json"), "w") as f:
        tree.to_json(f)
    skel = prolific_skeleton(tree, r)
    with open(os.path.join(out, "skeleton.json"), "w") as f:
        json.dump(skel.to_json_obj(), f, indent=1)
    prof = level_profile(tree, p, 0.0, 0.05, 20, truncation=r)
    _write_rows(os.path.join(out, "profile.csv"), "a,z1,z2",
                [(float(a), int(z1), float(z2))
                 for a, z1, z2 in zip(prof.levels, prof.z1, prof.z2)])
    counts = np.array([simulate_yule_contour(yule_b, r, rng).info["n_alive"]
                       for _ in range(2000)])
    import math

    q = math.exp(-yule_b * r)
    kmax = int(counts.max())
    hist = np.bincount(counts, minlength=kmax + 1)
    _write_rows(os.path.join(out, "overlay_pmf.csv"), "k,empirical,theoretical",
                [(k, int(hist[k]) / counts.size, q * (1 - q) ** (k - 1))
                 for k in range(1, kmax + 1)])
    gaps = rng.exponential(1.0 / yule_b, size=1500)
    _write_rows(os.path.join(out, "overlay_cdf.csv"), "x,empirical,theoretical",
                [(float(x), float(i + 1) / gaps.size, 1.0 - math.exp(-yule_b * x))
                 for i, x in enumerate(np.sort(gaps))])
    print(f"fixtures -> {out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="splitlevy",
                                 description="splitting trees, Levy-tree genealogy, "
                                             "branching processes")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a tree/process simulator")
    sim.add_argument("kind", choices=SIM_KINDS)
    sim.add_argument("--psi", required=False, help="exponent spec file (TOML or JSON)")
    sim.add_argument("--r", type=float, default=1.0, help="truncation height")
    sim.add_argument("--x", type=float, default=1.0, help="spine length for eta-x")
    sim.add_argument("--x0", type=float, default=1.0, help="initial mass for cb/cbi/twotype")
    sim.add_argument("--n0", type=int, default=1, help="initial prolific count")
    sim.add_argument("--t", type=float, default=1.0, help="horizon for cb/cbi/twotype")
    sim.add_argument("--h", type=float, default=1e-3, help="Gaussian folding mesh")
    sim.add_argument("--dt", type=float, default=1e-3, help="branching mesh step")
    sim.add_argument("--samples", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--keep-paths", type=int, default=10,
                     help="export full contours for the first M replicates")
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify", help="run a named acceptance experiment")
    ver.add_argument("name")
    ver.add_argument("--config", default=None, help="TOML/JSON overrides")
    ver.add_argument("--seed", type=int, default=None)
    ver.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    ver.add_argument("--out", default=None)
    ver.set_defaults(func=cmd_verify)

    lst = sub.add_parser("list-experiments", help="enumerate registered experiments")
    lst.set_defaults(func=cmd_list)

    exp = sub.add_parser("export", help="write templates or plot fixtures")
    exp.add_argument("what", choices=("exponent-template", "fixtures"))
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--out", default=None)
    exp.set_defaults(func=cmd_export)
    return ap


def main(argv=None):
    from .errors import UnknownExperiment

    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, UnknownExperiment) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
