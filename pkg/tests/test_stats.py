import json
import math
from pathlib import Path

import numpy as np
import pytest

from namegauge.errors import StatsError
from namegauge.stats import (
    chi_square_independence,
    fisher_exact_2x2,
    friedman,
    mann_whitney_u,
    rank_with_ties,
    shapiro_wilk,
    t_test_two_sample,
)

GOLDEN = Path(__file__).parent / "golden"


class TestRanks:
    def test_plain(self):
        assert rank_with_ties([30, 10, 20]).tolist() == [3, 1, 2]

    def test_ties_share_mean_rank(self):
        assert rank_with_ties([5, 7, 5, 9]).tolist() == [1.5, 3, 1.5, 4]


class TestFriedman:
    def test_identical_rankings_three_blocks(self):
        result = friedman([[1, 2, 3], [1, 2, 3], [1, 2, 3]])
        assert result.statistic == pytest.approx(6.0, abs=1e-12)
        assert result.df == 2
        assert result.p_value == pytest.approx(math.exp(-3), rel=1e-6)

    def test_all_tied_degenerate(self):
        result = friedman([[4, 4, 4], [4, 4, 4]])
        assert result.statistic == 0.0
        assert result.p_value == 1.0

    def test_df_matches_treatment_count(self):
        rng = np.random.default_rng(0)
        matrix = rng.standard_normal((20, 12))
        result = friedman(matrix)
        assert result.df == 11
        assert 0 <= result.p_value <= 1

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        matrix = rng.uniform(1, 2, size=(8, 4))
        a = friedman(matrix)
        b = friedman(np.exp(3 * matrix))  # strictly monotone in every cell
        assert a.statistic == pytest.approx(b.statistic, rel=1e-12)

    def test_rejects_missing_cells(self):
        with pytest.raises(StatsError):
            friedman([[1, np.nan, 2], [3, 4, 5]])

    def test_rejects_single_treatment(self):
        with pytest.raises(StatsError):
            friedman([[1], [2]])


class TestMannWhitney:
    def test_fully_separated_exact(self):
        result = mann_whitney_u([1, 2, 3], [4, 5, 6])
        assert result.statistic == 0.0
        assert result.method == "mann-whitney-exact"
        assert result.p_value == pytest.approx(0.1, abs=1e-12)

    def test_identical_samples_approximation(self):
        x = list(range(10))
        result = mann_whitney_u(x, x)
        assert result.statistic == pytest.approx(50.0)  # n^2 / 2
        assert result.p_value >= 0.99

    def test_bonferroni(self):
        raw = mann_whitney_u([1, 2, 3], [4, 5, 6]).p_value
        adjusted = mann_whitney_u([1, 2, 3], [4, 5, 6], correction=3.0)
        assert adjusted.p_value == pytest.approx(min(1.0, raw * 3))
        assert adjusted.p_raw == pytest.approx(raw)

    def test_two_sided_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            x = rng.standard_normal(rng.integers(2, 8)).tolist()
            y = rng.standard_normal(rng.integers(2, 8)).tolist()
            a = mann_whitney_u(x, y)
            b = mann_whitney_u(y, x)
            assert a.p_value == pytest.approx(b.p_value, rel=1e-9)

    def test_empty_sample_rejected(self):
        with pytest.raises(StatsError):
            mann_whitney_u([], [1.0])

    def test_exact_matches_permutation_monte_carlo(self):
        rng = np.random.default_rng(3)
        x = [0.3, 1.7, 2.2, 4.1]
        y = [0.9, 3.3, 5.0, 6.2, 7.7]
        result = mann_whitney_u(x, y)
        assert result.method == "mann-whitney-exact"
        pooled = np.array(x + y)
        n1 = len(x)
        base = n1 * (n1 + 1) / 2

        def u_of(sample_idx):
            ranks = rank_with_ties(pooled)
            return ranks[sample_idx].sum() - base

        observed = u_of(np.arange(n1))
        n_perm = 100_000
        hits_low = hits_high = 0
        for _ in range(n_perm):
            perm = rng.permutation(len(pooled))[:n1]
            u = u_of(perm)
            hits_low += u <= observed
            hits_high += u >= observed
        p_mc = min(1.0, 2 * min(hits_low, hits_high) / n_perm)
        se = math.sqrt(result.p_value * (1 - result.p_value) / n_perm)
        assert abs(p_mc - result.p_value) <= 3 * se + 1e-12


class TestShapiroWilk:
    def test_too_small(self):
        with pytest.raises(StatsError):
            shapiro_wilk([1.0, 2.0])

    def test_zero_variance(self):
        with pytest.raises(StatsError):
            shapiro_wilk([2.0, 2.0, 2.0])

    def test_golden_file(self):
        golden = json.loads((GOLDEN / "shapiro_golden.json").read_text())
        result = shapiro_wilk(golden["sample"])
        assert result.statistic == pytest.approx(golden["W"], abs=1e-4)
        assert result.p_value == pytest.approx(golden["p"], abs=1e-4)

    def test_golden_heavy_tailed_rejected(self):
        golden = json.loads((GOLDEN / "shapiro_heavy_tailed.json").read_text())
        result = shapiro_wilk(golden["sample"])
        assert result.statistic == pytest.approx(golden["W"], abs=1e-4)
        assert result.p_value == pytest.approx(golden["p"], abs=1e-4)
        assert result.p_value < 0.05

    def test_w_in_unit_interval(self):
        rng = np.random.default_rng(4)
        for n in (3, 5, 8, 12, 40, 300):
            for _ in range(5):
                result = shapiro_wilk(rng.uniform(size=n))
                assert 0 < result.statistic <= 1
                assert 0 <= result.p_value <= 1


class TestTTest:
    def test_hand_value(self):
        result = t_test_two_sample([1, 2, 3], [2, 3, 4])
        assert result.statistic == pytest.approx(-math.sqrt(1.5), abs=1e-4)
        assert result.statistic == pytest.approx(-1.2247, abs=1e-4)
        assert result.df == 4

    def test_identical_samples(self):
        result = t_test_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert result.statistic == 0.0
        assert result.p_value == pytest.approx(1.0)

    def test_shape_of_eighteen_patients(self):
        rng = np.random.default_rng(5)
        result = t_test_two_sample(rng.standard_normal(8), rng.standard_normal(10))
        assert result.df == 16

    def test_degenerate_variance(self):
        with pytest.raises(StatsError):
            t_test_two_sample([1.0, 1.0], [1.0, 1.0])

    def test_matches_scipy(self):
        from scipy import stats as ss

        rng = np.random.default_rng(6)
        for _ in range(50):
            x = rng.standard_normal(rng.integers(2, 20))
            y = rng.standard_normal(rng.integers(2, 20)) + rng.uniform(-1, 1)
            mine = t_test_two_sample(x, y)
            ref = ss.ttest_ind(x, y, equal_var=True)
            assert mine.statistic == pytest.approx(ref.statistic, rel=1e-10)
            assert mine.p_value == pytest.approx(ref.pvalue, rel=1e-8)


class TestFisher:
    def test_diagonal_three(self):
        result = fisher_exact_2x2([[3, 0], [0, 3]])
        assert result.p_value == pytest.approx(0.1, abs=1e-12)

    def test_balanced_table(self):
        assert fisher_exact_2x2([[5, 5], [5, 5]]).p_value == pytest.approx(1.0)

    def test_two_by_two_identity(self):
        assert fisher_exact_2x2([[1, 0], [0, 1]]).p_value == pytest.approx(1.0)

    def test_zero_margin_rejected(self):
        with pytest.raises(StatsError):
            fisher_exact_2x2([[0, 0], [1, 2]])

    def test_transpose_and_row_swap_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            table = rng.integers(0, 12, (2, 2))
            if min(table.sum(axis=0).min(), table.sum(axis=1).min()) < 1:
                continue
            p = fisher_exact_2x2(table).p_value
            assert fisher_exact_2x2(table.T).p_value == pytest.approx(p, rel=1e-9)
            assert fisher_exact_2x2(table[::-1]).p_value == pytest.approx(p, rel=1e-9)

    def test_matches_scipy(self):
        from scipy import stats as ss

        rng = np.random.default_rng(8)
        for _ in range(60):
            table = rng.integers(0, 15, (2, 2))
            if min(table.sum(axis=0).min(), table.sum(axis=1).min()) < 1:
                continue
            mine = fisher_exact_2x2(table).p_value
            ref = ss.fisher_exact(table).pvalue
            assert mine == pytest.approx(ref, rel=1e-7, abs=1e-12)

    def test_exact_matches_permutation_monte_carlo(self):
        # permute group labels over subjects; condition on the realized
        # margins matching the observed table's margins
        rng = np.random.default_rng(9)
        table = np.array([[3, 1], [1, 4]])
        result = fisher_exact_2x2(table)
        subjects = [(g, o) for g, row in enumerate(table)
                    for o, count in enumerate(row) for _ in range(count)]
        groups = np.array([g for g, _ in subjects])
        outcomes = np.array([o for _, o in subjects])
        observed = table[0, 0]

        def point_prob(a):
            return (
                math.comb(int(table[0].sum()), a)
                * math.comb(int(table[1].sum()), int(table[:, 0].sum()) - a)
            )

        p_obs = point_prob(observed)
        n_perm = 100_000
        extreme = 0
        for _ in range(n_perm):
            perm = rng.permutation(outcomes)
            a = int(((groups == 0) & (perm == 0)).sum())
            extreme += point_prob(a) <= p_obs * (1 + 1e-7)
        p_mc = extreme / n_perm
        se = math.sqrt(result.p_value * (1 - result.p_value) / n_perm)
        assert abs(p_mc - result.p_value) <= 3 * se


class TestChiSquare:
    def test_independent_table(self):
        result = chi_square_independence([[10, 10], [10, 10]])
        assert result.statistic == 0.0
        assert result.p_value == pytest.approx(1.0)

    def test_diagonal_forty(self):
        result = chi_square_independence([[20, 0], [0, 20]])
        assert result.statistic == pytest.approx(40.0, abs=1e-12)
        assert result.df == 1

    def test_two_by_three_df(self):
        result = chi_square_independence([[5, 6, 7], [8, 9, 10]])
        assert result.df == 2

    def test_zero_marginal_rejected(self):
        with pytest.raises(StatsError):
            chi_square_independence([[0, 0], [3, 4]])

    def test_matches_closed_form_2x2(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            a, b, c, d = (int(v) for v in rng.integers(1, 30, 4))
            result = chi_square_independence([[a, b], [c, d]])
            n = a + b + c + d
            closed = (
                n * (a * d - b * c) ** 2
                / ((a + b) * (c + d) * (a + c) * (b + d))
            )
            assert result.statistic == pytest.approx(closed, rel=1e-10)


def test_all_p_values_in_unit_interval():
    rng = np.random.default_rng(11)
    for _ in range(40):
        x = rng.standard_normal(rng.integers(3, 15))
        y = rng.standard_normal(rng.integers(3, 15))
        for result in (
            mann_whitney_u(x, y),
            t_test_two_sample(x, y),
            shapiro_wilk(np.concatenate([x, y])),
        ):
            assert 0.0 <= result.p_value <= 1.0
