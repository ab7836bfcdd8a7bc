"""Recursive projected compressive sensing with cluster-PCA subspace deletion."""
from .clustering import Clustering, cluster_eigenvalues, partition_metrics
from .datagen import (
    CoefficientSchedule,
    GeneratedSequence,
    SubspaceChangeModel,
    SupportSchedule,
    generate,
    read_sequence,
    training_block,
    write_sequence,
)
from .errors import (
    ConfigError,
    DegenerateInputError,
    RankDeficientError,
    RegimeError,
    ReprocsError,
    SequencingError,
)
from .harness import ExperimentConfig, MetricsRow, emit_csv, kappa_probe, run_experiment
from .linalg import kappa_s_exact, proj_pca, qr_decompose, ric_complement, subspace_error, sym_evd
from .presets import desk, get_preset, paper
from .sparse import ProjectorOperator, energy_threshold, estimate_support, ls_debias, solve_bpdn
from .theory import TheoryParams, check_conditions, k_of_zeta, zeta_plus_series
from .tracker import Tracker, TrackerConfig, estimate_initial_subspace

__all__ = [name for name in dir() if not name.startswith("_")]
