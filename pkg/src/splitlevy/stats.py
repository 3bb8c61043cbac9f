"""Statistical machinery: goodness-of-fit and two-sample tests with
expected-count-aware binning, reports, and deterministic config hashing."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import DegenerateBinning

__all__ = [
    "TestReport",
    "chi_square_gof",
    "ks_two_sample",
    "chi_square_two_sample",
    "mean_within_se",
    "config_hash",
    "write_report",
]

P_FLOOR = 1e-3


@dataclass
class TestReport:
    __test__ = False  # not a pytest class despite the name

    name: str
    n: int
    statistic: float
    p_value: float
    passed: bool
    seed: int
    config_hash: str
    runtime_s: float = 0.0
    details: dict = field(default_factory=dict)

    def to_json_obj(self):
        return {
            "name": self.name,
            "n": int(self.n),
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "pass": bool(self.passed),
            "seed": int(self.seed),
            "config_hash": self.config_hash,
            "runtime_s": round(float(self.runtime_s), 3),
        }


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def write_report(report: TestReport, outdir):
    """Atomic report write (temp file + rename); returns the path."""
    os.makedirs(outdir, exist_ok=True)
    target = os.path.join(outdir, "report.json")
    fd, tmp = tempfile.mkstemp(dir=outdir, suffix=".tmp")
    with os.fdopen(fd, "w") as f:
        json.dump(report.to_json_obj(), f, indent=1)
        f.write("\n")
    os.replace(tmp, target)
    if report.details:
        with open(os.path.join(outdir, "details.json"), "w") as f:
            json.dump(report.details, f, indent=1, default=str)
    return target


def _merge_bins(counts, expected, min_expected):
    """Greedy left-to-right merge until every bin's expectation reaches
    min_expected; a deficient trailing bin folds into its neighbour."""
    obs, exp = [], []
    acc_o, acc_e = 0.0, 0.0
    for o, e in zip(counts, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o, acc_e = 0.0, 0.0
    if acc_e > 0:
        if exp:
            obs[-1] += acc_o
            exp[-1] += acc_e
        else:
            obs.append(acc_o)
            exp.append(acc_e)
    return np.array(obs), np.array(exp)


def chi_square_gof(samples, pmf, min_expected=5.0, min_n=1000, floor=P_FLOOR,
                   support_lo=0):
    """Pearson chi-square of integer samples against a pmf evaluator.

    Bins run over the observed support; the pmf mass below and above it
    folds into the edge bins so expectations sum to n.  Adjacent bins are
    merged until each expects at least min_expected.
    """
    samples = np.asarray(samples)
    n = samples.size
    if n < min_n:
        raise ValueError(f"need at least {min_n} samples, got {n}")
    lo = int(min(samples.min(), support_lo))
    lo = max(lo, support_lo)
    hi = int(samples.max())
    # extend the range to cover the null's bulk, so degenerate samples are
    # still compared against the full law
    cum = sum(pmf(k) for k in range(support_lo, hi + 1))
    while cum < 1.0 - min_expected / max(n, 1) and hi - lo < 100_000:
        hi += 1
        cum += pmf(hi)
    ks = np.arange(lo, hi + 1)
    counts = np.array([(samples == k).sum() for k in ks], dtype=float)
    probs = np.array([pmf(int(k)) for k in ks], dtype=float)
    below = sum(pmf(k) for k in range(support_lo, lo))
    above = max(1.0 - probs.sum() - below, 0.0)
    probs[0] += below
    probs[-1] += above
    expected = probs * n
    obs, exp = _merge_bins(counts, expected, min_expected)
    if len(obs) < 2:
        raise DegenerateBinning("fewer than two bins after merging")
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = len(obs) - 1
    p = float(sps.chi2.sf(stat, dof))
    return stat, p, p > floor


def ks_two_sample(a, b, min_n=500, floor=P_FLOOR):
    """Two-sample Kolmogorov-Smirnov with the asymptotic p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if min(a.size, b.size) < min_n:
        raise ValueError(f"need at least {min_n} samples per arm")
    res = sps.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue), res.pvalue > floor


def chi_square_two_sample(a, b, min_expected=5.0, floor=P_FLOOR):
    """Homogeneity chi-square for two integer samples (pooled-expectation
    binning, then a contingency test)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    lo = int(min(a.min(), b.min()))
    hi = int(max(a.max(), b.max()))
    ca = np.array([(a == k).sum() for k in range(lo, hi + 1)], dtype=float)
    cb = np.array([(b == k).sum() for k in range(lo, hi + 1)], dtype=float)
    pooled = ca + cb
    # merge on the pooled expectation scaled to the smaller arm
    scale = min(a.size, b.size) / (a.size + b.size)
    keep_a, keep_b, acc_a, acc_b, acc_p = [], [], 0.0, 0.0, 0.0
    for x, y in zip(ca, cb):
        acc_a += x
        acc_b += y
        acc_p += (x + y) * scale
        if acc_p >= min_expected:
            keep_a.append(acc_a)
            keep_b.append(acc_b)
            acc_a = acc_b = acc_p = 0.0
    if acc_a + acc_b > 0 and keep_a:
        keep_a[-1] += acc_a
        keep_b[-1] += acc_b
    table = np.array([keep_a, keep_b])
    if table.shape[1] < 2:
        raise DegenerateBinning("fewer than two bins after merging")
    stat, p, _, _ = sps.chi2_contingency(table, correction=False)
    return float(stat), float(p), p > floor


def mean_within_se(samples, target, k=3.0):
    """(ok, zscore, p_two_sided): sample mean within k standard errors."""
    samples = np.asarray(samples, dtype=float)
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    z = (samples.mean() - target) / se if se > 0 else math.inf
    p = 2.0 * sps.norm.sf(abs(z))
    return abs(z) <= k, float(z), float(p)
