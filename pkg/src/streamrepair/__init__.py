"""Decoder-agnostic fault detection, localization, and repair for prediction streams."""

from .data import (
    DatasetSplit,
    PredictionRecord,
    Sample,
    load_dataset_csv,
    make_stream,
    save_dataset_csv,
    split_dataset,
)
from .decoders import (
    AuxiliaryBinaryClassifier,
    Decoder,
    NearestCentroidClassifier,
    SoftmaxClassifier,
    WienerCascade,
)
from .evaluation import (
    ExperimentReport,
    TrialReport,
    fault_frequency,
    heuristic_efficacy,
    oracle_precision,
    paired_t_test,
    performance,
    run_trials,
)
from .heuristics import CorrectionRecord, apply_corrections
from .localization import (
    ContingencyTable,
    IndependenceResult,
    TaskDistribution,
    build_contingency,
    chi_square_survival,
    chi_squared_test,
    fault_task_distribution,
)
from .oracles import FaultEvent, FaultType, OracleConfig, run_oracles
from .repair import AcquisitionPlan, Strategy, execute_repair, sample_by_distribution, sample_natural
from .slicing import (
    ActivityFamily,
    ClassTaskFamily,
    DirectionFamily,
    QuadrantFamily,
    SliceAssignment,
    assign_slices,
)
from .synthetic import ContinuousScenario, DiscreteScenario, gen_continuous, gen_discrete

__version__ = "0.1.0"
