"""Agreement and accuracy statistics for comparing gait estimates.

Self-contained implementations (Pearson r with t-based p-value, ICC(2,1),
Bland-Altman limits, Mann-Whitney U with an exact small-sample null) so the
numbers are reproducible to the last digit without depending on version
drift in a stats library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import stdtr


def pearson_r(x, y) -> tuple[float, float]:
    """Pearson correlation and two-sided p-value from the t distribution."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if y.size != n:
        raise ValueError("x and y must have equal length")
    if n < 3:
        raise ValueError("need at least 3 paired samples")
    xm = x - x.mean()
    ym = y - y.mean()
    denom = math.sqrt(float(xm @ xm) * float(ym @ ym))
    if denom == 0.0:
        raise ValueError("constant input: correlation undefined")
    r = float(xm @ ym) / denom
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return r, p


def icc_2_1(x, y) -> float:
    """ICC(2,1): two-way random effects, absolute agreement, single rater.

    Computed from the mean squares of the two-way layout with n subjects
    (paired values) and k = 2 raters.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValueError("x and y must have equal length")
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 paired samples")
    k = 2
    data = np.stack([x, y], axis=1)
    grand = data.mean()
    subj_means = data.mean(axis=1)
    rater_means = data.mean(axis=0)
    ss_subj = k * float(((subj_means - grand) ** 2).sum())
    ss_rater = n * float(((rater_means - grand) ** 2).sum())
    ss_total = float(((data - grand) ** 2).sum())
    ss_err = ss_total - ss_subj - ss_rater
    ms_subj = ss_subj / (n - 1)
    ms_rater = ss_rater / (k - 1)
    ms_err = ss_err / ((n - 1) * (k - 1))
    denom = ms_subj + (k - 1) * ms_err + k * (ms_rater - ms_err) / n
    if denom == 0.0:
        # all values identical: perfect (if degenerate) absolute agreement
        return 1.0
    return (ms_subj - ms_err) / denom


@dataclass(frozen=True)
class BlandAltman:
    bias: float
    sd_diff: float
    loa_low: float
    loa_high: float


def bland_altman(x, y) -> BlandAltman:
    """Mean difference and 95% limits of agreement (bias +- 1.96 sd)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValueError("x and y must have equal length")
    if x.size < 2:
        raise ValueError("need at least 2 paired samples")
    d = x - y
    bias = float(d.mean())
    sd = float(d.std(ddof=1))
    return BlandAltman(bias=bias, sd_diff=sd,
                       loa_low=bias - 1.96 * sd, loa_high=bias + 1.96 * sd)


_EXACT_MW_LIMIT = 400  # na * nb above which the normal approximation is used


def _mw_exact_sf(u: float, na: int, nb: int) -> float:
    """P(U >= u) under the exact null, via the count-distribution recurrence.

    f[k] after including j elements of the second sample counts the ways to
    reach statistic k; equivalently the coefficients of the Gaussian binomial.
    """
    total = na * nb
    f = np.zeros(total + 1)
    f[0] = 1.0
    # number of partitions of k into at most nb parts each <= na
    for j in range(1, nb + 1):
        g = np.zeros(total + 1)
        for k in range(0, j * na + 1):
            g[k] = f[k]
            if k - j >= 0:
                g[k] += g[k - j]
            if k - j - na >= 0:
                g[k] -= f[k - j - na]
        f = g
    f /= math.comb(na + nb, na)
    lo = int(math.ceil(u - 1e-9))
    if lo > total:
        return 0.0
    return float(f[max(lo, 0):].sum())


def mann_whitney_u(x, y) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test.

    Exact null distribution when the samples are small (na*nb <= 400) and
    tie-free; otherwise the tie-corrected normal approximation with
    continuity correction.  Returns (U of the first sample, p-value).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    na, nb = x.size, y.size
    if na == 0 or nb == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([x, y])
    # mid-ranks for ties
    _, inv, counts = np.unique(pooled, return_inverse=True, return_counts=True)
    csum = np.cumsum(counts)
    mid = csum - (counts - 1) / 2.0
    ranks = mid[inv]
    r1 = float(ranks[:na].sum())
    u1 = r1 - na * (na + 1) / 2.0
    u2 = na * nb - u1
    has_ties = bool(np.any(counts > 1))
    if not has_ties and na * nb <= _EXACT_MW_LIMIT:
        u_big = max(u1, u2)
        p = 2.0 * _mw_exact_sf(u_big, na, nb)
        return u1, min(1.0, p)
    n = na + nb
    tie_term = float(((counts ** 3 - counts)).sum()) / (n * (n - 1))
    var = na * nb / 12.0 * (n + 1 - tie_term)
    if var <= 0:
        return u1, 1.0
    mean = na * nb / 2.0
    z = (abs(u1 - mean) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    p = math.erfc(z / math.sqrt(2.0))
    return u1, min(1.0, p)


def accuracy_percent(estimate: float, reference: float) -> float:
    """100 * (1 - |e - r| / |r|), floored at 0."""
    if reference == 0:
        raise ValueError("reference value must be nonzero")
    return max(0.0, 100.0 * (1.0 - abs(estimate - reference) / abs(reference)))


def accuracy_summary(estimates, references) -> tuple[float, float, int]:
    """Mean and sample sd of per-pair accuracy, with zero-reference tally.

    Pairs whose reference is exactly 0 are excluded (the relative error is
    undefined there); the number of exclusions is returned so callers can
    report it.
    """
    est = np.asarray(estimates, dtype=float)
    ref = np.asarray(references, dtype=float)
    if est.size != ref.size:
        raise ValueError("estimates and references must have equal length")
    keep = ref != 0
    n_excluded = int(np.count_nonzero(~keep))
    est, ref = est[keep], ref[keep]
    if est.size == 0:
        return float("nan"), float("nan"), n_excluded
    acc = np.maximum(0.0, 100.0 * (1.0 - np.abs(est - ref) / np.abs(ref)))
    sd = float(acc.std(ddof=1)) if acc.size > 1 else 0.0
    return float(acc.mean()), sd, n_excluded


def pair_nearest(est_times, ref_times, tolerance: float):
    """Greedy one-to-one pairing of event times by nearest neighbour.

    Each reference time is matched to the closest unused estimate within
    ``tolerance``.  Returns (est_idx, ref_idx) index arrays.
    """
    est = np.asarray(est_times, dtype=float)
    ref = np.asarray(ref_times, dtype=float)
    used = np.zeros(est.size, dtype=bool)
    ei, ri = [], []
    for j in np.argsort(ref):
        if est.size == 0:
            break
        d = np.abs(est - ref[j])
        d[used] = np.inf
        i = int(np.argmin(d))
        if d[i] <= tolerance:
            used[i] = True
            ei.append(i)
            ri.append(int(j))
    return np.asarray(ei, dtype=int), np.asarray(ri, dtype=int)


@dataclass
class AgreementReport:
    """Bundle of agreement statistics between two measurement series."""

    n_pairs: int
    pearson_r: float
    pearson_p: float
    icc_2_1: float
    bland_altman: BlandAltman
    mw_u: float
    mw_p: float
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_pairs(cls, x, y) -> "AgreementReport":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r, p = pearson_r(x, y)
        u, mp = mann_whitney_u(x, y)
        return cls(n_pairs=int(x.size), pearson_r=r, pearson_p=p,
                   icc_2_1=icc_2_1(x, y), bland_altman=bland_altman(x, y),
                   mw_u=u, mw_p=mp)

    def summary_lines(self) -> list[str]:
        ba = self.bland_altman
        return [
            f"n = {self.n_pairs}",
            f"Pearson r = {self.pearson_r!r} (p = {self.pearson_p!r})",
            f"ICC(2,1) = {self.icc_2_1!r}",
            f"Bland-Altman bias = {ba.bias!r}, LoA = [{ba.loa_low!r}, {ba.loa_high!r}]",
            f"Mann-Whitney U = {self.mw_u!r} (p = {self.mw_p!r})",
        ]
