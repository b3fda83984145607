import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdnet.discretize import (
    CascadeExhaustedError,
    ConstantColumnError,
    DiscretizationSpec,
    MethodFailure,
    apply_spec,
    discretize_column,
    kmeans_1d,
)


def exhaustive_kmeans_sse(values, k):
    """Oracle: try every split of the sorted values into k contiguous runs."""
    x = sorted(values)
    n = len(x)
    best = (float("inf"), None)
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = [0, *cuts, n]
        sse = 0.0
        for i in range(k):
            seg = x[bounds[i]:bounds[i + 1]]
            mean = sum(seg) / len(seg)
            sse += sum((v - mean) ** 2 for v in seg)
        if sse < best[0]:
            best = (sse, cuts)
    return best


def sse_of_boundaries(values, boundaries):
    x = sorted(values)
    groups = [[] for _ in range(len(boundaries) + 1)]
    for v in x:
        groups[int(np.searchsorted(boundaries, v, side="right"))].append(v)
    sse = 0.0
    for seg in groups:
        if seg:
            mean = sum(seg) / len(seg)
            sse += sum((v - mean) ** 2 for v in seg)
    return sse


class TestKmeans1d:
    def test_obvious_split(self):
        assert kmeans_1d([0, 1, 10, 11], 2) == (5.5,)

    def test_unbalanced_split(self):
        bounds = kmeans_1d([0, 0, 0, 9], 2)
        assert bounds == (4.5,)

    def test_three_well_separated_groups(self):
        values = [1, 1, 1, 1, 10, 10, 10, 100, 100, 100]
        bounds = kmeans_1d(values, 3)
        bins = np.searchsorted(bounds, values, side="right")
        assert list(bins) == [0, 0, 0, 0, 1, 1, 1, 2, 2, 2]

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(2024)
        for _ in range(10):
            values = rng.uniform(0, 100, size=20).tolist()
            bounds = kmeans_1d(values, 3)
            oracle_sse, _ = exhaustive_kmeans_sse(values, 3)
            assert sse_of_boundaries(values, bounds) == pytest.approx(oracle_sse, rel=1e-12)

    def test_order_and_seed_invariant(self):
        rng = np.random.default_rng(5)
        values = rng.normal(50, 20, size=60).tolist()
        shuffled = values[::-1]
        assert kmeans_1d(values, 3, seed=1) == kmeans_1d(shuffled, 3, seed=999)

    def test_too_few_distinct_values_signals_failure(self):
        with pytest.raises(MethodFailure):
            kmeans_1d([1.0, 1.0, 2.0], 3)


class TestDiscretizeColumn:
    def test_uniform_method_directly(self):
        values = list(range(1, 10))
        spec, labels = discretize_column(values, "x", k=3, methods=("uniform",))
        assert spec.cut_points == pytest.approx((11 / 3, 19 / 3), abs=1e-12)
        counts = [labels.count(b) for b in spec.bin_labels]
        assert counts == [3, 3, 3]

    def test_kmeans_cascade_first(self):
        values = [1, 1, 1, 1, 10, 10, 10, 100, 100, 100]
        spec, labels = discretize_column(values, "x", k=3)
        assert spec.method == "kmeans"
        assert labels[:4] == [spec.bin_labels[0]] * 4
        assert labels[4:7] == [spec.bin_labels[1]] * 3
        assert labels[7:] == [spec.bin_labels[2]] * 3

    def test_frequency_one_value_per_bin(self):
        spec, labels = discretize_column([1, 2, 3], "x", k=3, methods=("frequency",))
        assert len(set(labels)) == 3

    def test_cascade_advances_when_kmeans_fails(self):
        # two distinct values, k=2: kmeans needs 2 distinct values and works;
        # force a fall-through with k=3 impossible for kmeans but fine for none;
        # use duplicated values where kmeans lacks distinct support at k=2
        spec, _ = discretize_column([1.0, 1.0, 5.0, 5.0], "x", k=2)
        assert spec.method == "kmeans"
        spec2, _ = discretize_column([1.0, 1.0, 2.0, 3.0, 3.0, 3.0], "x", k=3)
        assert spec2.method in ("kmeans", "frequency", "quantile", "uniform")

    def test_constant_column(self):
        with pytest.raises(ConstantColumnError):
            discretize_column([2.0, 2.0, 2.0], "x", k=3)

    def test_cascade_exhausted(self):
        with pytest.raises(CascadeExhaustedError, match="x"):
            discretize_column([0.0, 0.0, 1.0], "x", k=3)

    def test_nan_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            discretize_column([1.0, float("nan"), 3.0], "x")

    def test_labels_look_like_intervals(self):
        spec, _ = discretize_column(list(range(1, 10)), "x", k=3, methods=("uniform",))
        assert spec.bin_labels[0].startswith("[")
        assert spec.bin_labels[0].endswith(")")
        assert spec.bin_labels[-1].endswith("]")

    def test_bins_cover_min_to_max(self):
        values = [3.5, 7.0, 1.25, 9.75, 5.0, 2.0]
        spec, _ = discretize_column(values, "x", k=3)
        assert spec.bin_labels[0].startswith("[1.25,")
        assert spec.bin_labels[-1].endswith("9.75]")


class TestApplySpec:
    def spec(self):
        return DiscretizationSpec("x", "uniform", (11 / 3, 19 / 3),
                                  ("[1,3.667)", "[3.667,6.333)", "[6.333,9]"))

    def test_below_first_cut(self):
        assert apply_spec(self.spec(), [2.0]) == ["[1,3.667)"]

    def test_exactly_at_cut_goes_up(self):
        assert apply_spec(self.spec(), [11 / 3]) == ["[3.667,6.333)"]

    def test_clamps_above_max(self):
        assert apply_spec(self.spec(), [1e9]) == ["[6.333,9]"]

    def test_clamps_below_min(self):
        assert apply_spec(self.spec(), [-1e9]) == ["[1,3.667)"]

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2),
           st.integers(0, 2**31 - 1))
    def test_monotone(self, pair, seed):
        rng = np.random.default_rng(seed)
        values = rng.normal(0, 1000, size=30)
        values[0], values[1] = -2000, 2000  # guarantee spread
        spec, _ = discretize_column(values, "x", k=3)
        x, y = sorted(pair)
        assert spec.bin_index(x) <= spec.bin_index(y)


class TestSpecInvariants:
    def test_cuts_must_ascend(self):
        with pytest.raises(ValueError, match="ascending"):
            DiscretizationSpec("x", "uniform", (5.0, 2.0), ("a", "b", "c"))

    def test_label_count_checked(self):
        with pytest.raises(ValueError, match="labels"):
            DiscretizationSpec("x", "uniform", (1.0, 2.0), ("a", "b"))

    def test_round_trip_dict(self):
        spec, _ = discretize_column(list(range(10)), "pop", k=3)
        assert DiscretizationSpec.from_dict(spec.to_dict()) == spec

    def test_frequency_bins_nearly_equal_on_distinct(self):
        values = list(range(100, 121))  # 21 distinct values
        spec, labels = discretize_column(values, "x", k=3, methods=("frequency",))
        counts = sorted(labels.count(b) for b in spec.bin_labels)
        assert counts[-1] - counts[0] <= 1
