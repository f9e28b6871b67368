"""Agreement statistics against hand computations, scipy, and exhaustive
enumeration."""

import itertools
import math

import numpy as np
import pytest
import scipy.stats

from radargait import (AgreementReport, accuracy_percent, accuracy_summary,
                       bland_altman, icc_2_1, mann_whitney_u, pearson_r)
from radargait.stats import pair_nearest


def _icc_bruteforce(x, y):
    """ICC(2,1) from an explicitly assembled two-way ANOVA table."""
    data = [[float(a), float(b)] for a, b in zip(x, y)]
    n = len(data)
    k = 2
    grand = sum(sum(row) for row in data) / (n * k)
    row_means = [sum(row) / k for row in data]
    col_means = [sum(data[i][j] for i in range(n)) / n for j in range(k)]
    ss_rows = k * sum((m - grand) ** 2 for m in row_means)
    ss_cols = n * sum((m - grand) ** 2 for m in col_means)
    ss_total = sum((data[i][j] - grand) ** 2
                   for i in range(n) for j in range(k))
    ms_r = ss_rows / (n - 1)
    ms_c = ss_cols / (k - 1)
    ms_e = (ss_total - ss_rows - ss_cols) / ((n - 1) * (k - 1))
    return (ms_r - ms_e) / (ms_r + (k - 1) * ms_e + k * (ms_c - ms_e) / n)


class TestPearson:
    def test_perfect_agreement(self):
        r, p = pearson_r([1, 2, 3], [1, 2, 3])
        assert r == 1.0 and p == 0.0

    def test_perfect_anticorrelation(self):
        r, _ = pearson_r([1, 2, 3], [3, 2, 1])
        assert r == -1.0

    def test_covariance_oracle(self):
        x, y = np.array([1.0, 2.0, 4.0]), np.array([2.0, 4.0, 5.0])
        num = np.sum((x - x.mean()) * (y - y.mean()))
        den = math.sqrt(np.sum((x - x.mean()) ** 2) * np.sum((y - y.mean()) ** 2))
        r, _ = pearson_r(x, y)
        assert r == pytest.approx(num / den, abs=1e-12)

    def test_symmetry_and_affine_invariance(self):
        rng = np.random.default_rng(3)
        x, y = rng.standard_normal(20), rng.standard_normal(20)
        r_xy, _ = pearson_r(x, y)
        r_yx, _ = pearson_r(y, x)
        r_aff, _ = pearson_r(3.0 * x + 7.0, 0.5 * y - 2.0)
        assert r_xy == pytest.approx(r_yx, abs=1e-14)
        assert r_aff == pytest.approx(r_xy, abs=1e-12)

    def test_matches_scipy_on_seeded_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            n = int(rng.integers(3, 40))
            x = rng.standard_normal(n)
            y = rng.standard_normal(n)
            r, p = pearson_r(x, y)
            ref = scipy.stats.pearsonr(x, y)
            assert r == pytest.approx(ref.statistic, abs=1e-9)
            assert p == pytest.approx(ref.pvalue, abs=1e-9)

    def test_constant_input_rejected(self):
        with pytest.raises(ValueError):
            pearson_r([1, 1, 1], [1, 2, 3])


class TestIcc:
    def test_identical_raters(self):
        assert icc_2_1([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)

    def test_large_offset_near_zero(self):
        # absolute agreement penalizes the constant bias
        icc = icc_2_1([1, 2, 3], [11, 12, 13])
        assert icc == pytest.approx(2.0 / 102.0, abs=1e-12)
        assert icc < 0.05

    def test_matches_anova_bruteforce(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(3, 15))
            x = rng.standard_normal(n)
            y = x + 0.3 * rng.standard_normal(n) + rng.normal(0, 0.5)
            assert icc_2_1(x, y) == pytest.approx(_icc_bruteforce(x, y), abs=1e-9)

    def test_seeded_n10_instance(self):
        rng = np.random.default_rng(77)
        x = rng.standard_normal(10)
        y = rng.standard_normal(10)
        assert icc_2_1(x, y) == pytest.approx(_icc_bruteforce(x, y), abs=1e-9)


class TestBlandAltman:
    def test_identical(self):
        ba = bland_altman([1, 2, 3], [1, 2, 3])
        assert ba.bias == 0.0 and ba.loa_low == 0.0 and ba.loa_high == 0.0

    def test_constant_offset(self):
        ba = bland_altman([2, 3, 4], [1, 2, 3])
        assert ba.bias == pytest.approx(1.0) and ba.sd_diff == pytest.approx(0.0)

    def test_hand_computed_instance(self):
        ba = bland_altman([1, 2, 3], [1.1, 1.9, 3.2])
        assert ba.bias == pytest.approx(-0.0667, abs=5e-5)
        d = np.array([-0.1, 0.1, -0.2])
        sd = float(d.std(ddof=1))
        assert ba.sd_diff == pytest.approx(sd, abs=1e-12)
        assert ba.loa_low == pytest.approx(ba.bias - 1.96 * sd, abs=1e-12)
        assert ba.loa_high == pytest.approx(ba.bias + 1.96 * sd, abs=1e-12)

    def test_matches_direct_arithmetic(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(2, 30))
            x = rng.standard_normal(n)
            y = rng.standard_normal(n)
            ba = bland_altman(x, y)
            d = x - y
            assert ba.bias == pytest.approx(float(d.mean()), abs=1e-9)
            assert ba.sd_diff == pytest.approx(float(d.std(ddof=1)), abs=1e-9)


class TestMannWhitney:
    def test_identical_samples(self):
        u, p = mann_whitney_u([1, 2, 3], [1, 2, 3])
        assert u == 4.5
        assert p > 0.9

    def test_complete_separation(self):
        u, p = mann_whitney_u([1, 2, 3], [4, 5, 6])
        assert u == 0.0
        assert p < 0.2

    def test_exhaustive_enumeration(self):
        a, b = [1.0, 3.0, 5.0], [2.0, 4.0, 6.0]
        u, p = mann_whitney_u(a, b)
        # brute force over all C(6,3) rank assignments under the null
        pooled_ranks = range(1, 7)
        na = 3
        us = []
        for combo in itertools.combinations(pooled_ranks, na):
            r1 = sum(combo)
            us.append(r1 - na * (na + 1) / 2.0)
        us = np.array(us)
        u_big = max(u, na * na - u)
        p_ref = min(1.0, 2.0 * np.mean(us >= u_big))
        assert p == pytest.approx(p_ref, abs=1e-12)
        assert u == 3.0

    def test_matches_scipy_exact(self):
        rng = np.random.default_rng(19)
        for _ in range(100):
            na = int(rng.integers(2, 9))
            nb = int(rng.integers(2, 9))
            a = rng.standard_normal(na)
            b = rng.standard_normal(nb) + rng.normal(0, 0.5)
            u, p = mann_whitney_u(a, b)
            ref = scipy.stats.mannwhitneyu(a, b, alternative="two-sided",
                                           method="exact")
            assert u == pytest.approx(ref.statistic, abs=1e-9)
            assert p == pytest.approx(ref.pvalue, abs=1e-9)

    def test_u_sum_invariant(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            a = rng.standard_normal(int(rng.integers(1, 25)))
            b = rng.standard_normal(int(rng.integers(1, 25)))
            ua, _ = mann_whitney_u(a, b)
            ub, _ = mann_whitney_u(b, a)
            assert ua + ub == pytest.approx(a.size * b.size)

    def test_large_sample_normal_path(self):
        rng = np.random.default_rng(31)
        a = rng.standard_normal(40)
        b = rng.standard_normal(40) + 0.5
        u, p = mann_whitney_u(a, b)
        ref = scipy.stats.mannwhitneyu(a, b, alternative="two-sided",
                                       method="asymptotic")
        assert u == pytest.approx(ref.statistic, abs=1e-9)
        assert p == pytest.approx(ref.pvalue, rel=1e-6)


class TestAccuracy:
    def test_exact_match(self):
        assert accuracy_percent(1.0, 1.0) == 100.0

    def test_five_percent_error(self):
        assert accuracy_percent(1.05, 1.00) == pytest.approx(95.0)

    def test_floor(self):
        assert accuracy_percent(3.0, 1.0) == 0.0

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError):
            accuracy_percent(1.0, 0.0)

    def test_summary_with_exclusions(self):
        mean, sd, n_ex = accuracy_summary([1.0, 1.05, 7.0], [1.0, 1.0, 0.0])
        assert n_ex == 1
        assert mean == pytest.approx(97.5)
        assert sd == pytest.approx(np.std([100.0, 95.0], ddof=1))

    def test_summary_all_excluded(self):
        mean, sd, n_ex = accuracy_summary([1.0], [0.0])
        assert n_ex == 1 and math.isnan(mean)


class TestPairing:
    def test_nearest_within_tolerance(self):
        ei, ri = pair_nearest([0.02, 1.1, 5.0], [0.0, 1.0, 2.0], tolerance=0.25)
        assert list(zip(ei, ri)) == [(0, 0), (1, 1)]

    def test_one_to_one(self):
        ei, ri = pair_nearest([1.0], [0.9, 1.05], tolerance=0.5)
        # greedy by reference order: the earliest reference claims the
        # estimate, and each estimate is used at most once
        assert ei.size == 1 and ri.size == 1
        assert ri[0] == 0


class TestAgreementReport:
    def test_bundle_consistency(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal(15)
        y = x + 0.1 * rng.standard_normal(15)
        rep = AgreementReport.from_pairs(x, y)
        assert rep.n_pairs == 15
        assert rep.pearson_r == pearson_r(x, y)[0]
        assert rep.icc_2_1 == icc_2_1(x, y)
        assert rep.bland_altman.loa_high == pytest.approx(
            rep.bland_altman.bias + 1.96 * rep.bland_altman.sd_diff)
        assert len(rep.summary_lines()) == 5
