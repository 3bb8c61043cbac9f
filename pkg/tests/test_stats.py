import json
import math
import os

import numpy as np
import pytest

from splitlevy.errors import DegenerateBinning
from splitlevy.stats import (
    TestReport,
    chi_square_gof,
    chi_square_two_sample,
    config_hash,
    ks_two_sample,
    mean_within_se,
    write_report,
)


def geometric_pmf(q):
    return lambda k: q * (1 - q) ** (k - 1) if k >= 1 else 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gof_self_null(seed):
    rng = np.random.default_rng(seed)
    q = 0.4
    samples = rng.geometric(q, size=5000)
    stat, p, ok = chi_square_gof(samples, geometric_pmf(q), support_lo=1)
    assert ok and p > 1e-3


def test_gof_rejects_constant():
    samples = np.full(5000, 3)
    stat, p, ok = chi_square_gof(samples, geometric_pmf(0.4), support_lo=1)
    assert not ok and p < 1e-6


def test_gof_min_n():
    with pytest.raises(ValueError):
        chi_square_gof(np.ones(10, dtype=int), geometric_pmf(0.5))


def test_gof_degenerate_binning():
    samples = np.full(2000, 1)
    with pytest.raises(DegenerateBinning):
        chi_square_gof(samples, lambda k: 1.0 if k == 1 else 0.0, support_lo=1)


@pytest.mark.parametrize("seed", [3, 4, 5])
def test_ks_self_null(seed):
    rng = np.random.default_rng(seed)
    a = rng.exponential(1.0, 4000)
    b = rng.exponential(1.0, 4000)
    stat, p, ok = ks_two_sample(a, b)
    assert ok


def test_ks_identical_vectors():
    a = np.linspace(0, 1, 600)
    stat, p, ok = ks_two_sample(a, a.copy())
    assert stat == 0.0 and p == 1.0


def test_ks_separated_exponentials():
    rng = np.random.default_rng(6)
    a = rng.exponential(1.0, 10_000)
    b = rng.exponential(0.5, 10_000)
    stat, p, ok = ks_two_sample(a, b)
    assert not ok
    # analytic KS distance between Exp(1) and Exp(2) cdfs is at x = ln 2:
    # |e^{-x} - e^{-2x}| maximised = 1/4
    assert stat == pytest.approx(0.25, abs=0.02)


def test_ks_min_n():
    with pytest.raises(ValueError):
        ks_two_sample(np.ones(10), np.ones(10))


@pytest.mark.parametrize("seed", [7, 8, 9])
def test_two_sample_chi_self_null(seed):
    rng = np.random.default_rng(seed)
    a = rng.poisson(3.0, 4000)
    b = rng.poisson(3.0, 4000)
    stat, p, ok = chi_square_two_sample(a, b)
    assert ok


def test_two_sample_chi_detects_shift():
    rng = np.random.default_rng(10)
    a = rng.poisson(3.0, 4000)
    b = rng.poisson(4.0, 4000)
    stat, p, ok = chi_square_two_sample(a, b)
    assert not ok


def test_mean_within_se():
    rng = np.random.default_rng(11)
    x = rng.normal(2.0, 1.0, 10_000)
    ok, z, p = mean_within_se(x, 2.0)
    assert ok and abs(z) < 3
    ok2, z2, _ = mean_within_se(x, 2.5)
    assert not ok2


def test_config_hash_canonical():
    a = config_hash({"b": 1, "a": [1, 2]})
    b = config_hash({"a": [1, 2], "b": 1})
    assert a == b and len(a) == 16
    assert config_hash({"a": [2, 1], "b": 1}) != a


def test_write_report_schema(tmp_path):
    rep = TestReport(name="demo", n=10, statistic=1.5, p_value=0.4, passed=True,
                     seed=3, config_hash="abc", runtime_s=0.01,
                     details={"note": "x"})
    path = write_report(rep, tmp_path / "demo")
    obj = json.load(open(path))
    assert set(obj) == {"name", "n", "statistic", "p_value", "pass", "seed",
                        "config_hash", "runtime_s"}
    assert obj["pass"] is True
    assert os.path.exists(tmp_path / "demo" / "details.json")
