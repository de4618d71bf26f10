import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamrepair.data import PredictionRecord
from streamrepair.decoders import AuxiliaryBinaryClassifier
from streamrepair.heuristics import (
    apply_corrections,
    correct_flicker,
    correct_illegal_transition,
    correct_multimodal,
    correct_out_of_bounds,
    correct_rapid_motion,
)
from streamrepair.oracles import FaultType, OracleConfig, run_oracles

MD_LEGAL = {
    "LeftFist": ["LeftFist", "Rest"],
    "RightFist": ["RightFist", "Rest"],
    "Rest": ["Rest", "LeftFist", "RightFist"],
}


def discrete_stream(outputs, inputs=None):
    return [
        PredictionRecord(
            index=i,
            input=np.zeros(1) if inputs is None else np.asarray(inputs[i], dtype=float),
            output=o,
        )
        for i, o in enumerate(outputs)
    ]


def continuous_stream(points):
    return [
        PredictionRecord(index=i, input=np.zeros(1), output=np.asarray(p, dtype=float))
        for i, p in enumerate(points)
    ]


class TestStepHeuristics:
    def test_illegal_transition_returns_previous(self):
        assert correct_illegal_transition("LeftFist", "RightFist", MD_LEGAL) == "LeftFist"

    def test_flicker_majority(self):
        assert correct_flicker(["A", "A", "B", "A"]) == "A"

    def test_flicker_tie_breaks_to_most_recent(self):
        assert correct_flicker(["A", "B"]) == "B"
        assert correct_flicker(["B", "A"]) == "A"

    def test_flicker_constant_window(self):
        assert correct_flicker(["A", "A", "A"]) == "A"

    def test_out_of_bounds_clamps(self):
        bounds = ((0, 1), (0, 1))
        assert np.allclose(correct_out_of_bounds((1.4, 0.5), bounds), (1.0, 0.5))
        assert np.allclose(correct_out_of_bounds((-2.0, 3.0), bounds), (0.0, 1.0))

    def test_rapid_motion_shortens_step_exactly(self):
        corrected = correct_rapid_motion((0, 0), (3, 4), 2.5)
        assert np.allclose(corrected, (1.5, 2.0))
        assert abs(np.linalg.norm(corrected) - 2.5) < 1e-9

    def test_multimodal_awake_forces_wake_state(self):
        aux_map = {"StageW": "awake", "N1": "asleep", "N2": "asleep"}
        assert correct_multimodal("N2", "awake", "N1", aux_map, "StageW", "N1") == "StageW"

    def test_multimodal_asleep_keeps_consistent_previous(self):
        aux_map = {"StageW": "awake", "N1": "asleep", "N2": "asleep"}
        assert correct_multimodal("StageW", "asleep", "N2", aux_map, "StageW", "N1") == "N2"

    def test_multimodal_asleep_falls_back_to_default(self):
        aux_map = {"StageW": "awake", "N1": "asleep", "N2": "asleep"}
        assert correct_multimodal("StageW", "asleep", "StageW", aux_map, "StageW", "N1") == "N1"


DISCRETE_CONFIG = OracleConfig(legal=MD_LEGAL, window=5, flicker_changes=3)
CONTINUOUS_CONFIG = OracleConfig(
    window=4, tv_threshold=1.5, step_threshold=0.6, bounds=((0.0, 1.0), (0.0, 1.0))
)


class TestApplyCorrections:
    def test_zero_events_identity(self):
        stream = discrete_stream(["Rest", "Rest", "LeftFist"])
        corrected, records = apply_corrections(stream, [], DISCRETE_CONFIG)
        assert records == []
        assert [r.output for r in corrected] == ["Rest", "Rest", "LeftFist"]

    def test_single_out_of_bounds_event_one_record(self):
        stream = continuous_stream([(0.5, 0.5), (1.4, 0.5), (0.6, 0.5)])
        events = run_oracles(stream, CONTINUOUS_CONFIG, [FaultType.OUT_OF_BOUNDS])
        assert len(events) == 1
        corrected, records = apply_corrections(
            stream, events, CONTINUOUS_CONFIG, [FaultType.OUT_OF_BOUNDS]
        )
        assert len(records) == 1
        assert records[0].index == 1
        assert np.allclose(corrected[1].output, (1.0, 0.5))

    def test_event_outside_stream_rejected(self):
        from streamrepair.oracles import FaultEvent

        stream = discrete_stream(["Rest", "Rest"])
        bad = [FaultEvent(FaultType.ILLEGAL_TRANSITION, 5, 6, "illegal_transition")]
        with pytest.raises(ValueError, match="outside"):
            apply_corrections(stream, bad, DISCRETE_CONFIG)

    def test_chain_of_illegal_predictions_stays_at_last_legal(self):
        outputs = ["LeftFist", "RightFist", "RightFist", "RightFist"]
        stream = discrete_stream(outputs)
        enabled = [FaultType.ILLEGAL_TRANSITION]
        events = run_oracles(stream, DISCRETE_CONFIG, enabled)
        corrected, _ = apply_corrections(stream, events, DISCRETE_CONFIG, enabled)
        assert [r.output for r in corrected] == ["LeftFist"] * 4

    def test_rechecked_corrected_stream_clean_discrete(self):
        rng = np.random.default_rng(0)
        states = list(MD_LEGAL)
        outputs = [states[int(rng.integers(3))] for _ in range(400)]
        stream = discrete_stream(outputs)
        enabled = [FaultType.ILLEGAL_TRANSITION, FaultType.TEMPORAL_INCONSISTENCY_DISCRETE]
        events = run_oracles(stream, DISCRETE_CONFIG, enabled)
        corrected, _ = apply_corrections(stream, events, DISCRETE_CONFIG, enabled)
        recheck = run_oracles(corrected, DISCRETE_CONFIG, [FaultType.ILLEGAL_TRANSITION])
        assert recheck == []

    def test_rechecked_corrected_stream_clean_continuous(self):
        rng = np.random.default_rng(1)
        pts = np.cumsum(rng.normal(scale=0.4, size=(300, 2)), axis=0)
        stream = continuous_stream(pts)
        enabled = [FaultType.OUT_OF_BOUNDS, FaultType.RAPID_MOTION]
        events = run_oracles(stream, CONTINUOUS_CONFIG, enabled)
        corrected, _ = apply_corrections(stream, events, CONTINUOUS_CONFIG, enabled)
        recheck = run_oracles(corrected, CONTINUOUS_CONFIG, enabled)
        assert recheck == []

    def test_locality_non_flagged_outputs_bit_identical(self):
        rng = np.random.default_rng(2)
        pts = np.cumsum(rng.normal(scale=0.4, size=(200, 2)), axis=0)
        stream = continuous_stream(pts)
        enabled = [FaultType.OUT_OF_BOUNDS, FaultType.RAPID_MOTION]
        events = run_oracles(stream, CONTINUOUS_CONFIG, enabled)
        corrected, records = apply_corrections(stream, events, CONTINUOUS_CONFIG, enabled)
        flagged = {r.index for r in records}
        for before, after in zip(stream, corrected):
            if before.index not in flagged:
                assert after.output is before.output

    def test_pointwise_plausibility_contracts(self):
        rng = np.random.default_rng(3)
        pts = np.cumsum(rng.normal(scale=0.5, size=(300, 2)), axis=0)
        stream = continuous_stream(pts)
        enabled = [FaultType.OUT_OF_BOUNDS, FaultType.RAPID_MOTION]
        events = run_oracles(stream, CONTINUOUS_CONFIG, enabled)
        corrected, _ = apply_corrections(stream, events, CONTINUOUS_CONFIG, enabled)
        prev = None
        for rec in corrected:
            assert (rec.output >= 0.0 - 1e-12).all() and (rec.output <= 1.0 + 1e-12).all()
            if prev is not None:
                assert np.linalg.norm(rec.output - prev) <= CONTINUOUS_CONFIG.step_threshold + 1e-9
            prev = rec.output

    def test_idempotent_on_corrected_stream(self):
        rng = np.random.default_rng(4)
        pts = np.cumsum(rng.normal(scale=0.5, size=(200, 2)), axis=0)
        stream = continuous_stream(pts)
        enabled = [FaultType.OUT_OF_BOUNDS, FaultType.RAPID_MOTION]
        events = run_oracles(stream, CONTINUOUS_CONFIG, enabled)
        corrected, _ = apply_corrections(stream, events, CONTINUOUS_CONFIG, enabled)
        again, records = apply_corrections(
            corrected, run_oracles(corrected, CONTINUOUS_CONFIG, enabled), CONTINUOUS_CONFIG, enabled
        )
        assert records == []
        for a, b in zip(corrected, again):
            assert np.array_equal(a.output, b.output)

    def test_multimodal_corrections_respect_aux(self):
        aux = AuxiliaryBinaryClassifier(threshold=0.0, columns=(0,), above="awake")
        config = OracleConfig(
            legal={"W": ["W", "S"], "S": ["S", "W"]},
            aux=aux,
            aux_map={"W": "awake", "S": "asleep"},
            wake_state="W",
            sleep_state="S",
        )
        # aux input says asleep, decoder says awake at index 1
        stream = [
            PredictionRecord(index=0, input=np.array([1.0]), output="W"),
            PredictionRecord(index=1, input=np.array([-1.0]), output="W"),
            PredictionRecord(index=2, input=np.array([1.0]), output="W"),
        ]
        enabled = [FaultType.MULTIMODAL_INCONSISTENCY]
        events = run_oracles(stream, config, enabled)
        assert len(events) == 1
        corrected, records = apply_corrections(stream, events, config, enabled)
        assert [r.output for r in corrected] == ["W", "S", "W"]
        assert len(records) == 1
        recheck = run_oracles(corrected, config, enabled)
        assert recheck == []

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.sampled_from(list(MD_LEGAL)), min_size=2, max_size=80))
    def test_recheck_property_discrete(self, outputs):
        stream = discrete_stream(outputs)
        enabled = [FaultType.ILLEGAL_TRANSITION, FaultType.TEMPORAL_INCONSISTENCY_DISCRETE]
        events = run_oracles(stream, DISCRETE_CONFIG, enabled)
        corrected, _ = apply_corrections(stream, events, DISCRETE_CONFIG, enabled)
        assert run_oracles(corrected, DISCRETE_CONFIG, [FaultType.ILLEGAL_TRANSITION]) == []

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.tuples(st.floats(-1.0, 2.0), st.floats(-1.0, 2.0)), min_size=2, max_size=80
        )
    )
    def test_recheck_property_continuous(self, points):
        stream = continuous_stream(points)
        enabled = [FaultType.OUT_OF_BOUNDS, FaultType.RAPID_MOTION]
        events = run_oracles(stream, CONTINUOUS_CONFIG, enabled)
        corrected, _ = apply_corrections(stream, events, CONTINUOUS_CONFIG, enabled)
        assert run_oracles(corrected, CONTINUOUS_CONFIG, enabled) == []
