"""Belief-network estimation, energies, and dynamics for longitudinal panels.

The pipeline: load or generate a panel of moral and social beliefs, rescale
responses onto [-1, 1], remove person and time means, fit constrained
Gaussian graphical models across waves, select a specification by BIC,
score per-person network energies, and run the belief-change statistics.
"""

from .dynamics import (
    ChainState,
    DissonanceDesign,
    InterventionEffect,
    StudyDesign,
    SyntheticStudy,
    generate_panel,
    initial_state,
    run_chain,
    sample_equilibrium,
    sweep,
    transition_probability,
)
from .energy import (
    EnergyScore,
    belief_energies,
    belief_energy,
    delta_energy,
    energy_grid,
    energy_trajectory,
    network_energy,
)
from .errors import (
    AggregationError,
    BeliefNetError,
    ConflictError,
    DimensionError,
    DomainError,
    FitError,
    ModelDomainError,
    ParseError,
    SchemaError,
)
from .ggm import (
    EIGHT_SPECS,
    CouplingMatrix,
    FittedModel,
    ModelSpec,
    Moments,
    SelectionResult,
    TemperatureEstimate,
    decompose_covariance,
    fit_from_moments,
    fit_spec,
    free_dense_param_count,
    implied_covariance,
    moments_from_residuals,
    partial_correlations,
    prune_step_up,
    sample_covariance,
    select_model,
    temperature_of,
    wald_edge_tests,
)
from .panel import (
    DissonanceIndex,
    PanelDataset,
    ResidualDataset,
    VariableSpec,
    cronbach_alpha,
    dissonance_index,
    include_safety,
    load_panel,
    load_schema,
    panel_dissonance,
    rescale_beliefs,
    residualize,
    split_by_valence,
)
from .reporting import AnalysisReport, AnalyzeOptions, build_report
from .stats import (
    BeliefChange,
    CorrelationTest,
    EffectEstimate,
    MeanChange,
    MetaResult,
    NormalityDiagnostic,
    PooledWithinComparison,
    VarianceDecomposition,
    belief_change,
    correlation_effect,
    direct_edge_to,
    direction_tally,
    fisher_z,
    inverse_fisher_z,
    mean_change_effect,
    meta_random_effects,
    multilevel_vs_pooled,
    normality_diagnostic,
    pearson,
    standardized_mean_change,
    strength_centrality,
    variance_decomposition,
)

__version__ = "0.1.0"
