"""Principal components regression on weighted graph Laplacian eigenmaps."""

from .graph import (
    NAMED_TRIPLES,
    NORMALIZED,
    Q_ONE,
    RANDOM_WALK,
    UNNORMALIZED,
    WeightedGraph,
    WeightedOperator,
    WeightTriple,
    assemble_operator,
    build_adjacency,
    build_graph,
    dirichlet_energy,
    weighted_inner,
)
from .kernel import KernelSpec, kde_degrees, make_kernel
from .lepski import LepskiGrid, LepskiSelection, build_grid, select
from .regress import PcrFit, TuningPlan, empirical_error, make_plan, pcr_fit, tuned_K
from .sampler import (
    DensitySpec,
    PointCloud,
    RegressionSpec,
    builtin_regression,
    sample_cloud,
    uniform_density,
)
from .spectral import EigensolverError, SpectralBasis, eigensolve, weyl_slope

__version__ = "0.1.0"
