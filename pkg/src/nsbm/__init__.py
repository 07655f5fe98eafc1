"""Community detection and parameter estimation for directed networks
observed through edge nominations."""

from .core import (
    DataError,
    DirectedGraph,
    EstimationError,
    LabelVector,
    NominationFunctions,
    NsbmError,
    NsbmParams,
    ValidationReport,
    expected_matrix,
    expected_matrix_general,
    safe_power,
    validate_nsbm_params,
)
from .estimate import (
    MomentTable,
    NsbmEstimate,
    block_means,
    connection_strength,
    estimate_baseline,
    estimate_from_block_means,
    estimate_nsbm,
    moment_table,
    reconstruct_p,
)
from .generate import (
    SimDesign,
    make_sim_params,
    sample_directed_sbm,
    sample_from_design,
    sample_nominated,
    sample_nsbm,
    sample_nsbm_poisson,
)
from .harness import (
    ExperimentConfig,
    ResultRow,
    run_replication,
    run_sweep,
    summarize,
    write_csv,
    write_summary,
)
from .metrics import MisclusteringResult, misclustering, relative_frobenius
from .pipeline import (
    AnalysisReport,
    EdgeList,
    analyze,
    load_edge_list,
    load_labels,
    load_scores,
    preprocess,
    write_edge_list,
    write_labels,
)
from .spectral import (
    DiagnosticsReport,
    KMeansConfig,
    SvdFactors,
    baseline_cluster,
    kmeans,
    right_sc,
    right_smst,
    symmetrize,
    theory_diagnostics,
    truncated_svd,
)

__version__ = "0.1.0"
