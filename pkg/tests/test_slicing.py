import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamrepair.data import PredictionRecord
from streamrepair.slicing import (
    ActivityFamily,
    ClassTaskFamily,
    DirectionFamily,
    QuadrantFamily,
    assign_slices,
    assignments_from_csv,
    assignments_to_csv,
    slice_direction,
    slice_input_activity,
    slice_quadrant,
)


class TestClassTask:
    def test_identity_mapping(self):
        fam = ClassTaskFamily(("LeftFist", "RightFist", "Rest"))
        assert fam.labels_for_values(["LeftFist", "Rest"]) == ["LeftFist", "Rest"]

    def test_bijection_on_states(self):
        states = ("A", "B", "C")
        fam = ClassTaskFamily(states)
        assert sorted(fam.labels_for_values(list(states))) == sorted(states)
        assert len(set(fam.labels_for_values(list(states)))) == len(states)

    def test_unknown_class_rejected(self):
        fam = ClassTaskFamily(("A", "B"))
        with pytest.raises(ValueError, match="state set"):
            fam.labels_for_values(["Z"])


class TestDirection:
    def test_cardinal_bins(self):
        assert slice_direction((0, 0), (1, 0), 1e-9) == "E"
        assert slice_direction((0, 0), (1, 1), 1e-9) == "NE"
        assert slice_direction((0, 0), (0, 1), 1e-9) == "N"
        assert slice_direction((0, 0), (-1, 0), 1e-9) == "W"
        assert slice_direction((0, 0), (0, -1), 1e-9) == "S"

    def test_stationary_cases(self):
        assert slice_direction((0.5, 0.5), (0.5, 0.5), 1e-9) == "Stationary"
        assert slice_direction(None, (1, 1), 1e-9) == "Stationary"
        assert slice_direction((0, 0), (0.01, 0.0), 0.1) == "Stationary"

    def test_four_bin_variant(self):
        assert slice_direction((0, 0), (1, 0.9), 1e-9, bins=4) == "E"
        assert slice_direction((0, 0), (0.9, 1), 1e-9, bins=4) == "N"

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 359.999999))
    def test_bins_partition_circle(self, angle):
        fam = DirectionFamily(bins=8)
        label = fam.bin_of_angle(angle)
        assert label in fam.labels
        # half-open bins: each angle maps to exactly one label
        width = 45.0
        idx = int(np.floor(((angle + width / 2) % 360.0) / width))
        assert label == fam._compass[idx]

    def test_bin_boundaries_half_open(self):
        fam = DirectionFamily(bins=8)
        assert fam.bin_of_angle(22.5) == "NE"  # [22.5, 67.5)
        assert fam.bin_of_angle(22.499999) == "E"
        assert fam.bin_of_angle(337.5) == "E"  # wraps into [337.5, 22.5)


class TestQuadrant:
    BOUNDS = ((0.0, 1.0), (0.0, 1.0))

    def test_examples(self):
        assert slice_quadrant((0.2, 0.8), self.BOUNDS) == "NW"
        assert slice_quadrant((0.9, 0.1), self.BOUNDS) == "SE"
        assert slice_quadrant((0.5, 0.5), self.BOUNDS) == "NE"  # midpoint -> higher quadrant

    def test_out_of_bounds_points_still_map(self):
        assert slice_quadrant((4.0, -3.0), self.BOUNDS) == "SE"

    def test_totality_random(self):
        fam = QuadrantFamily(self.BOUNDS)
        rng = np.random.default_rng(0)
        labels = fam.labels_for_values(rng.normal(size=(500, 2)))
        assert all(lab in fam.labels for lab in labels)


class TestActivity:
    def test_thresholds_strict(self):
        assert slice_input_activity(np.array([0.1, 0.1]), 0.2, 5.0) == "Hypo"
        assert slice_input_activity(np.array([0.2, 0.2]), 0.2, 5.0) == "Normal"
        assert slice_input_activity(np.array([9.0, 9.0]), 0.2, 5.0) == "Hyper"

    def test_bad_thresholds_rejected(self):
        with pytest.raises(ValueError):
            ActivityFamily(2.0, 1.0)


def test_assign_slices_cardinality_and_uniqueness():
    rng = np.random.default_rng(1)
    stream = [
        PredictionRecord(index=i, input=rng.normal(size=3), output=rng.uniform(size=2))
        for i in range(100)
    ]
    families = [DirectionFamily(stationary_eps=1e-6), QuadrantFamily(((0, 1), (0, 1))), ActivityFamily(-5, 5)]
    assignments = assign_slices(stream, families)
    assert len(assignments) == 300
    keys = {(a.index, a.family) for a in assignments}
    assert len(keys) == 300  # exactly one label per (execution, family)


def test_input_families_ignore_output_changes():
    rng = np.random.default_rng(2)
    stream = [
        PredictionRecord(index=i, input=rng.normal(size=3), output=rng.uniform(size=2))
        for i in range(50)
    ]
    altered = [r.with_output(np.array([9.0, 9.0])) for r in stream]
    fam = ActivityFamily(-5, 5)
    assert assign_slices(stream, [fam]) == assign_slices(altered, [fam])


def test_constant_stream_constant_labels():
    stream = [
        PredictionRecord(index=i, input=np.zeros(2), output=np.array([0.3, 0.3]))
        for i in range(20)
    ]
    fam = QuadrantFamily(((0, 1), (0, 1)))
    labels = {a.label for a in assign_slices(stream, [fam])}
    assert labels == {"SW"}


def test_assignments_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    stream = [
        PredictionRecord(index=i, input=rng.normal(size=2), output="A" if i % 2 else "B")
        for i in range(30)
    ]
    assignments = assign_slices(stream, [ClassTaskFamily(("A", "B"))])
    path = tmp_path / "slices.csv"
    assignments_to_csv(assignments, path)
    assert assignments_from_csv(path) == assignments
