import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from oracles import hand_ranks, paired_t_by_hand, spearman_formula, wilcoxon_bruteforce

from scapecap.errors import (AllZeroDifferencesError, ConstantInputError, LengthError, SampleSizeError,
                             ZeroVarianceError)
from scapecap.thumbs.stats import (
    StatResult,
    compare_paired,
    correlation_matrix,
    midranks,
    paired_t,
    shapiro_wilk,
    spearman_rho,
    stars,
    wilcoxon_signed_rank,
)

# Twenty draws kept verbatim so the Shapiro-Wilk check is reproducible anywhere.
SW_FIXTURE = np.array([
    148.0, 154.0, 158.0, 160.0, 161.0, 162.0, 166.0, 170.0, 182.0, 195.0,
    236.0, 139.5, 151.2, 155.8, 163.4, 167.9, 171.1, 176.3, 188.8, 201.5,
])

# Paired sample for the textbook paired-t example.
T_A = np.array([12.1, 14.3, 11.8, 15.2, 13.9, 12.7, 14.8, 13.1, 12.4, 15.6])
T_B = np.array([11.5, 13.1, 12.0, 14.0, 13.2, 12.9, 13.5, 12.2, 12.5, 14.1])


class TestMidranks:
    @given(st.lists(st.integers(0, 6), min_size=1, max_size=30))
    def test_matches_hand_ranking(self, values):
        np.testing.assert_allclose(midranks(values), hand_ranks(values))

    def test_example(self):
        np.testing.assert_allclose(midranks([10, 20, 20, 5]), [2, 3.5, 3.5, 1])


class TestSpearman:
    def test_square_is_monotone(self):
        x = np.arange(1.0, 12.0)
        assert spearman_rho(x, x**2)[0] == 1.0

    def test_reversed(self):
        x = np.arange(1.0, 12.0)
        assert spearman_rho(x, x[::-1])[0] == -1.0

    def test_rank_formula_n8(self, rng):
        for _ in range(20):
            x, y = rng.normal(size=8), rng.normal(size=8)
            assert spearman_rho(x, y)[0] == pytest.approx(spearman_formula(x, y), abs=1e-12)

    def test_exact_p_by_enumeration(self, rng):
        x, y = rng.normal(size=7), rng.normal(size=7)
        rho, p = spearman_rho(x, y)
        ry = np.argsort(np.argsort(y))
        rx = np.argsort(np.argsort(x))
        hits = 0
        for perm in itertools.permutations(range(7)):
            r = 1 - 6 * np.sum((rx - ry[list(perm)]) ** 2) / (7 * 48)
            hits += abs(r) >= abs(rho) - 1e-12
        assert p == pytest.approx(hits / math.factorial(7), abs=1e-12)

    def test_large_n_against_scipy(self, rng):
        x = rng.normal(size=40)
        y = x + rng.normal(size=40) * 2
        ref = sps.spearmanr(x, y)
        rho, p = spearman_rho(x, y)
        assert rho == pytest.approx(ref.statistic, abs=1e-12)
        assert p == pytest.approx(ref.pvalue, rel=1e-9)

    @given(st.lists(st.integers(-1000, 1000), min_size=3, max_size=25, unique=True),
           st.integers(0, 2**31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_bounded_and_transform_invariant(self, xs, seed):
        x = np.array(xs, dtype=float)
        y = np.random.default_rng(seed).normal(size=x.size)
        rho, p = spearman_rho(x, y)
        assert -1 <= rho <= 1 and 0 <= p <= 1
        assert spearman_rho(x**3 + 7 * x, y * 3 + 1)[0] == pytest.approx(rho, abs=1e-12)

    def test_errors(self):
        with pytest.raises(LengthError):
            spearman_rho([1, 2], [1, 2])
        with pytest.raises(LengthError):
            spearman_rho([1, 2, 3], [1, 2])
        with pytest.raises(ConstantInputError):
            spearman_rho([1, 1, 1, 1], [1, 2, 3, 4])


class TestWilcoxon:
    def test_hand_ranked_n6(self):
        a = [10.0, 12.0, 9.0, 14.0, 11.0, 13.0]
        b = [8.0, 13.0, 6.0, 10.0, 11.5, 8.0]
        # d = 2, -1, 3, 4, -0.5, 5 -> |d| ranks 3, 2, 4, 5, 1, 6 -> W+ = 3 + 4 + 5 + 6
        result = wilcoxon_signed_rank(a, b)
        assert result.statistic == 18.0
        assert result.n == 6
        # W+ <= 3 for {}, {1}, {2}, {3}, {1,2}; the two tails give 2 * 5 of 64 sign assignments
        assert result.p_value == pytest.approx(10 / 64, abs=1e-12)

    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=12))
    @settings(max_examples=80, deadline=None)
    def test_bruteforce_sign_flips(self, pairs):
        a = [p[0] for p in pairs]
        b = [p[1] for p in pairs]
        if all(x == y for x, y in pairs):
            return
        w, p = wilcoxon_bruteforce(a, b)
        result = wilcoxon_signed_rank(a, b)
        assert result.statistic == pytest.approx(w)
        assert result.p_value == pytest.approx(p, abs=1e-12)

    def test_swap_symmetry(self, rng):
        a, b = rng.normal(size=9), rng.normal(size=9)
        r1, r2 = wilcoxon_signed_rank(a, b), wilcoxon_signed_rank(b, a)
        assert r1.p_value == pytest.approx(r2.p_value, abs=1e-12)
        assert r1.statistic + r2.statistic == 9 * 10 / 2

    def test_zeros_dropped(self):
        result = wilcoxon_signed_rank([1, 2, 3, 4], [1, 1, 1, 1])
        assert result.n == 3 and result.notes["n_zero_dropped"] == 1

    def test_all_zero(self):
        with pytest.raises(AllZeroDifferencesError):
            wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])

    def test_exact_matches_scipy_without_ties(self, rng):
        a, b = rng.normal(size=15), rng.normal(size=15)
        assert wilcoxon_signed_rank(a, b).p_value == pytest.approx(
            sps.wilcoxon(a, b, method="exact").pvalue, abs=1e-12)

    def test_normal_approximation_against_scipy(self, rng):
        a = np.round(rng.normal(size=60), 1)
        b = np.round(rng.normal(0.3, 1, size=60), 1)
        result = wilcoxon_signed_rank(a, b)
        assert result.notes["method"] == "normal"
        ref = sps.wilcoxon(a, b, method="approx", correction=True)
        assert result.p_value == pytest.approx(ref.pvalue, rel=1e-9)


class TestShapiroWilk:
    def test_fixture_against_scipy(self):
        ref = sps.shapiro(SW_FIXTURE)
        result = shapiro_wilk(SW_FIXTURE)
        assert abs(result.statistic - ref.statistic) < 1e-4
        assert result.p_value == pytest.approx(ref.pvalue, abs=1e-4)

    @pytest.mark.parametrize("n", [3, 4, 5, 7, 11, 12, 25, 50, 200, 1000])
    def test_sizes_against_scipy(self, n):
        x = np.random.default_rng(n).gamma(2.0, size=n)
        ref = sps.shapiro(x)
        result = shapiro_wilk(x)
        assert abs(result.statistic - ref.statistic) < 1e-4
        assert abs(result.p_value - ref.pvalue) < 1e-4

    @given(st.floats(0.01, 100), st.floats(-1e3, 1e3))
    @settings(max_examples=30)
    def test_affine_invariance(self, scale, shift):
        w = shapiro_wilk(SW_FIXTURE).statistic
        assert shapiro_wilk(SW_FIXTURE * scale + shift).statistic == pytest.approx(w, abs=1e-10)

    def test_constant(self):
        with pytest.raises(ConstantInputError):
            shapiro_wilk(np.full(10, 3.0))

    def test_sample_size(self):
        with pytest.raises(SampleSizeError):
            shapiro_wilk([1.0, 2.0])


class TestPairedT:
    def test_textbook(self):
        result = paired_t(T_A, T_B)
        t = paired_t_by_hand(T_A, T_B)
        assert result.statistic == pytest.approx(t, abs=1e-12)
        # two-sided p from the t distribution with 9 degrees of freedom
        assert result.p_value == pytest.approx(2 * sps.t.sf(abs(t), 9), abs=1e-12)
        assert result.n == 10

    def test_identical(self):
        result = paired_t([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert result.statistic == 0.0 and result.p_value == 1.0

    def test_constant_difference(self):
        with pytest.raises(ZeroVarianceError):
            paired_t([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])

    def test_length(self):
        with pytest.raises(LengthError):
            paired_t([1.0], [2.0])


class TestGate:
    def test_normal_samples_use_t(self, rng):
        a = rng.normal(3, 0.5, size=30)
        b = a + rng.normal(0.2, 0.3, size=30)
        result = compare_paired(a, b)
        assert result.test_name == "paired_t"
        assert result.notes["normality"] == {"a": True, "b": True}

    def test_skewed_sample_uses_wilcoxon(self, rng):
        a = rng.exponential(size=30) ** 3
        b = rng.normal(size=30)
        result = compare_paired(a, b)
        assert result.test_name == "wilcoxon_signed_rank"
        assert result.notes["normality"]["a"] is False


class TestCorrelationMatrix:
    def test_identical_columns(self, rng):
        ev = rng.uniform(size=(30, 15))
        aq = ev[:, :8].copy()
        m = correlation_matrix(ev, aq, [f"e{i}" for i in range(15)], [f"a{j}" for j in range(8)])
        assert m.rho.shape == (15, 8)
        for j in range(8):
            assert m.rho[j, j] == 1.0 and m.stars[j][j] == "***"

    def test_independent_columns(self, rng):
        m = correlation_matrix(rng.normal(size=(200, 15)), rng.normal(size=(200, 8)), range(15), range(8))
        assert np.mean(np.abs(m.rho) < 0.2) >= 0.95

    def test_constant_column_undefined(self, rng):
        aq = rng.normal(size=(12, 8))
        aq[:, 2] = 4.0
        m = correlation_matrix(rng.normal(size=(12, 15)), aq, range(15), range(8))
        assert np.all(m.undefined[:, 2]) and not np.any(m.undefined[:, [0, 1, 3]])
        assert all(m.stars[i][2] == "" for i in range(15))

    def test_too_few(self):
        with pytest.raises(LengthError):
            correlation_matrix(np.ones((2, 15)), np.ones((2, 8)), range(15), range(8))


class TestStars:
    @pytest.mark.parametrize("p, mark", [(0.0005, "***"), (0.005, "**"), (0.03, "*"), (0.05, ""), (0.2, ""),
                                         (float("nan"), "")])
    def test_levels(self, p, mark):
        assert stars(p) == mark

    def test_p_clipped(self):
        assert StatResult("x", 0.0, 1.0000001, 3).p_value == 1.0
