import math

import numpy as np
import pytest

from streamrepair.localization import (
    ContingencyTable,
    TaskDistribution,
    build_contingency,
    chi_square_survival,
    chi_squared_test,
    fault_task_distribution,
    localization_report,
)
from streamrepair.oracles import FaultEvent, FaultType
from streamrepair.slicing import SliceAssignment


def chi2_pdf(x, df):
    a = df / 2.0
    return x ** (a - 1) * math.exp(-x / 2.0) / (2.0**a * math.gamma(a))


def survival_by_quadrature(x, df, n=200_000):
    """Trapezoidal integration oracle; df=1 integrates in u = sqrt(x) to avoid the singularity."""
    if x == 0:
        return 1.0
    if df == 1:
        # P(chi2 <= x) = integral over u in [0, sqrt(x)] of 2*phi(u) du
        u = np.linspace(0.0, math.sqrt(x), n)
        f = 2.0 * np.exp(-(u**2) / 2.0) / math.sqrt(2 * math.pi)
        return 1.0 - float(np.trapezoid(f, u))
    grid = np.linspace(0.0, x, n)
    f = np.array([chi2_pdf(max(g, 1e-300), df) for g in grid])
    return 1.0 - float(np.trapezoid(f, grid))


class TestChiSquareSurvival:
    def test_at_zero_is_one(self):
        for df in (1, 2, 5, 10):
            assert chi_square_survival(0.0, df) == 1.0

    def test_df2_closed_form(self):
        for x in (0.0, 1.0, 2.0, 5.0, 10.0):
            assert abs(chi_square_survival(x, 2) - math.exp(-x / 2.0)) < 1e-12

    def test_df2_e_inverse(self):
        assert abs(chi_square_survival(2.0, 2) - math.exp(-1)) < 1e-12

    def test_df1_standard_normal_relation(self):
        # Q(x, 1) = erfc(sqrt(x/2)); 3.841459 is the 5% critical value
        x = 3.841459
        assert abs(chi_square_survival(x, 1) - 0.05) < 1e-4
        for x in (0.5, 1.0, 2.5, 7.0):
            assert abs(chi_square_survival(x, 1) - math.erfc(math.sqrt(x / 2.0))) < 1e-12

    @pytest.mark.parametrize("df", [1, 2, 4, 9])
    def test_matches_quadrature_oracle(self, df):
        for x in (0.5, 1.0, 3.0, 7.5, 15.0, 30.0):
            assert abs(chi_square_survival(x, df) - survival_by_quadrature(x, df)) < 1e-6

    def test_monotone_in_x(self):
        values = [chi_square_survival(x, 4) for x in np.linspace(0, 40, 200)]
        assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            chi_square_survival(1.0, 0)
        with pytest.raises(ValueError):
            chi_square_survival(-1.0, 2)


class TestChiSquaredTest:
    def table(self, counts, labels=None):
        counts = np.asarray(counts)
        labels = labels or tuple(f"r{i}" for i in range(counts.shape[0]))
        return ContingencyTable(row_labels=tuple(labels), counts=counts)

    def test_hand_computed_example(self):
        result = chi_squared_test(self.table([[10, 20], [20, 10]]))
        assert result.testable
        assert abs(result.statistic - 20.0 / 3.0) < 1e-9
        assert result.df == 1
        # independently verified by quadrature
        assert abs(result.p_value - 0.00982) < 1e-4
        assert abs(result.p_value - survival_by_quadrature(20.0 / 3.0, 1)) < 1e-6

    def test_proportional_rows_give_zero(self):
        result = chi_squared_test(self.table([[10, 20], [20, 40]]))
        assert result.statistic == 0.0
        assert result.p_value == 1.0

    def test_degenerate_tables_untestable(self):
        assert not chi_squared_test(self.table([[5, 5]])).testable
        assert not chi_squared_test(self.table([[0, 10], [0, 20]])).testable
        assert not chi_squared_test(self.table([[0, 0], [0, 0]])).testable

    def test_zero_marginal_rows_dropped_before_df(self):
        result = chi_squared_test(self.table([[10, 20], [0, 0], [20, 10]]))
        assert result.testable
        assert result.df == 1
        assert abs(result.statistic - 20.0 / 3.0) < 1e-9

    def test_invariance_under_row_permutation_and_column_swap(self):
        rng = np.random.default_rng(0)
        counts = rng.integers(1, 50, size=(4, 2))
        base = chi_squared_test(self.table(counts)).statistic
        perm = counts[rng.permutation(4)]
        assert abs(chi_squared_test(self.table(perm)).statistic - base) < 1e-9
        swapped = counts[:, ::-1]
        assert abs(chi_squared_test(self.table(swapped)).statistic - base) < 1e-9

    def test_scaling_counts_scales_statistic(self):
        counts = np.array([[12, 7], [3, 9], [8, 8]])
        base = chi_squared_test(self.table(counts)).statistic
        for m in (2, 5, 11):
            scaled = chi_squared_test(self.table(counts * m)).statistic
            assert abs(scaled - m * base) < 1e-9


def make_assignments(labels, family="task", start=0):
    return [SliceAssignment(index=start + i, family=family, label=lab) for i, lab in enumerate(labels)]


def event(t0, t1, fault_type=FaultType.ILLEGAL_TRANSITION):
    return FaultEvent(fault_type, t0, t1, "x")


class TestBuildContingency:
    def test_no_events_all_absent(self):
        table = build_contingency([], make_assignments(["A", "B"] * 10), 20)
        assert table.counts[:, 0].sum() == 0
        assert table.counts.sum() == 20

    def test_full_coverage_all_present(self):
        table = build_contingency([event(0, 99)], make_assignments(["A"] * 100), 100)
        assert table.counts[:, 1].sum() == 0
        assert table.counts.sum() == 100

    def test_matches_brute_force_double_loop(self):
        rng = np.random.default_rng(1)
        labels = [("A", "B", "C")[int(rng.integers(3))] for _ in range(300)]
        assignments = make_assignments(labels)
        events = []
        for _ in range(25):
            s = int(rng.integers(0, 290))
            events.append(event(s, s + int(rng.integers(0, 10))))
        table = build_contingency(events, assignments, 300, row_labels=("A", "B", "C"))
        # brute force: per-index scan over all events
        expected = np.zeros((3, 2), dtype=int)
        rows = {"A": 0, "B": 1, "C": 2}
        for a in assignments:
            covered = any(e.start_index <= a.index <= e.end_index for e in events)
            expected[rows[a.label], 0 if covered else 1] += 1
        assert np.array_equal(table.counts, expected)

    def test_event_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            build_contingency([event(500, 510)], make_assignments(["A"] * 10), 10)

    def test_wrong_assignment_count_rejected(self):
        with pytest.raises(ValueError, match="cover"):
            build_contingency([], make_assignments(["A"] * 10), 11)

    def test_mixed_families_rejected(self):
        mixed = make_assignments(["A"] * 5) + make_assignments(["B"] * 5, family="other", start=5)
        with pytest.raises(ValueError, match="families"):
            build_contingency([], mixed, 10)


class TestTaskDistribution:
    def test_normalization(self):
        labels = ["A"] * 8 + ["B"] * 2
        dist = fault_task_distribution([event(0, 9)], make_assignments(labels))
        assert abs(dist.probabilities["A"] - 0.8) < 1e-12
        assert abs(dist.probabilities["B"] - 0.2) < 1e-12

    def test_floor_then_renormalize(self):
        labels = ["A"] * 5
        dist = fault_task_distribution(
            [event(0, 4)], make_assignments(labels), labels=("A", "B"), floor=0.1
        )
        assert abs(dist.probabilities["A"] - 0.9) < 1e-12
        assert abs(dist.probabilities["B"] - 0.1) < 1e-12

    def test_simplex_invariant(self):
        rng = np.random.default_rng(2)
        labels = [("A", "B", "C")[int(rng.integers(3))] for _ in range(100)]
        dist = fault_task_distribution([event(10, 60)], make_assignments(labels))
        probs = list(dist.probabilities.values())
        assert all(p >= 0 for p in probs)
        assert abs(sum(probs) - 1.0) < 1e-12

    def test_zero_coverage_rejected(self):
        with pytest.raises(ValueError, match="covered"):
            fault_task_distribution([], make_assignments(["A"] * 10))

    def test_invalid_distribution_rejected(self):
        with pytest.raises(ValueError, match="sum"):
            TaskDistribution({"A": 0.5, "B": 0.4})
        with pytest.raises(ValueError, match="non-negative"):
            TaskDistribution({"A": 1.5, "B": -0.5})


def test_localization_report_structure():
    rng = np.random.default_rng(3)
    labels = [("A", "B")[int(rng.integers(2))] for _ in range(200)]
    assignments = {"task": make_assignments(labels)}
    events = [event(5, 10), event(50, 55, FaultType.TEMPORAL_INCONSISTENCY_DISCRETE)]
    report = localization_report(
        events, assignments, 200, task_family="task", task_labels=("A", "B")
    )
    assert set(report["tables"]) == {"illegal_transition", "temporal_inconsistency_discrete"}
    entry = report["tables"]["illegal_transition"]["task"]
    assert "table" in entry and "test" in entry
    assert report["task_distribution"] is not None
    assert set(report["per_type_task_distributions"]) == set(report["tables"])
