"""Continuous surrogates for discontinuous cellwise coefficient fields.

Fits closed-form, mesh-independent reconstructions of piecewise-constant
data using Shepard-normalized Gaussian RBF dictionaries with Elastic Net
regression, residual-driven adaptive enrichment, and embarrassingly parallel
domain decomposition, plus a P1 Darcy solver to measure downstream impact.
"""

from .adaptive import (
    AdaptiveConfig,
    RoundReport,
    enrich,
    fit_adaptive,
    mark,
    reports_to_csv,
    residual_indicator,
    residual_indicators,
)
from .darcy import (
    DarcyProblem,
    LineMesh,
    PressureSolution,
    Triangulation,
    field_rel_error,
    line_mesh,
    pressure_rel_error,
    solve_darcy,
    triangulate,
    write_pressure_text,
)
from .elastic_net import ElasticNetConfig, FitResult, fit, fit_log_field, soft_threshold
from .errors import ConfigError, DataError, FieldfitError, NumericalError
from .fields import (
    FieldData,
    SubdomainField,
    absolute_l2_error,
    box_field_2d,
    relative_l2_error,
    smooth_field_2d,
    step_field_1d,
)
from .geometry import Box, Mesh, QuadratureRule, build_mesh, locate, locate_many, quadrature
from .io import read_field, read_spe10, write_field, write_grid_csv
from .partition import (
    DictionarySpec,
    GlobalSurrogate,
    ParallelFitReport,
    Partition,
    fit_parallel,
    load,
    make_partition,
    save,
)
from .rbf import (
    FeatureMatrix,
    LocalSurrogate,
    RbfDictionary,
    assemble_features,
    centroid_dictionary,
    gaussian_eval,
    lattice_dictionary,
    shepard_eval,
    shepard_features,
    shepard_normalize,
)
from .step_approx import (
    L1ErrorResult,
    StepInterfaceSpec,
    error_grid,
    heaviside,
    l1_error,
    logistic_profile,
    two_center_shepard,
)

__version__ = "0.1.0"
