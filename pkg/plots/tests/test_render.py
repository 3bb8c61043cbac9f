"""Smoke tests for the figure renderer against fixtures produced by the
simulator CLI (the only interface this component consumes)."""

import json
import os
import subprocess
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from render import MissingInput, SchemaMismatch, render  # noqa: E402


@pytest.fixture(scope="module")
def fixtures(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixtures")
    subprocess.run([sys.executable, "-m", "splitlevy.cli", "export", "fixtures",
                    "--out", str(out), "--seed", "5"], check=True)
    return out


ALL_KINDS = [
    ("contour", "contour.csv"),
    ("tree", "tree.json"),
    ("overlay-pmf", "overlay_pmf.csv"),
    ("overlay-cdf", "overlay_cdf.csv"),
    ("profile", "profile.csv"),
]


@pytest.mark.parametrize("kind,fname", ALL_KINDS)
def test_every_kind_renders(fixtures, tmp_path, kind, fname):
    out = tmp_path / f"{kind}.png"
    summary = render({"kind": kind, "input": str(fixtures / fname), "output": str(out)})
    assert out.exists() and out.stat().st_size > 0
    assert summary["kind"] == kind
    if kind.startswith("overlay") or kind == "profile":
        assert summary["series"] == 2  # empirical and theoretical series


def test_render_idempotent(fixtures, tmp_path):
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    spec = {"kind": "overlay-pmf", "input": str(fixtures / "overlay_pmf.csv")}
    render({**spec, "output": str(a)})
    render({**spec, "output": str(b)})
    assert a.read_bytes() == b.read_bytes()


def test_missing_input(tmp_path):
    with pytest.raises(MissingInput):
        render({"kind": "contour", "input": str(tmp_path / "nope.csv"),
                "output": str(tmp_path / "x.png")})


def test_empty_csv_fails(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("t,value,is_jump\n")
    with pytest.raises(MissingInput):
        render({"kind": "contour", "input": str(p), "output": str(tmp_path / "x.png")})


def test_schema_drift_fails(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,val\n0,1\n")
    with pytest.raises(SchemaMismatch):
        render({"kind": "contour", "input": str(p), "output": str(tmp_path / "x.png")})


def test_bad_spec_fails(tmp_path):
    with pytest.raises(SchemaMismatch):
        render({"kind": "contour", "output": str(tmp_path / "x.png")})
    with pytest.raises(SchemaMismatch):
        render({"kind": "hexbin", "input": "x", "output": str(tmp_path / "x.png")})


def test_cli_spec_file(fixtures, tmp_path):
    spec = [{"kind": "contour", "input": str(fixtures / "contour.csv"),
             "output": str(tmp_path / "c.png")},
            {"kind": "profile", "input": str(fixtures / "profile.csv"),
             "output": str(tmp_path / "p.png")}]
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    script = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                          "render.py")
    res = subprocess.run([sys.executable, script, "--spec", str(spec_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert (tmp_path / "c.png").exists() and (tmp_path / "p.png").exists()
    lines = [json.loads(l) for l in res.stdout.strip().splitlines()]
    assert len(lines) == 2
