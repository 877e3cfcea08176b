"""Kirchhoff index minimization by edge addition.

Library surface: graph ingestion, exact spectral metrics with rank-1
maintenance, randomized resistance/biharmonic sketches, approximate
extreme-point search, and the selection algorithms built on top of them.
"""

from .graph import (
    Graph,
    GraphError,
    LoadReport,
    eccentricities,
    largest_connected_component,
    load_edge_list,
    preferential_attachment_graph,
    prune_central_nodes,
)
from .linalg import (
    DenseSpectralState,
    SignProjection,
    SolverError,
    jl_matrix,
    lap_solve,
    lap_solve_block,
    laplacian_pinv,
    pseudo_inverse,
    sm_update_pinv,
    sm_update_pinv2,
)
from .kirchhoff import (
    BoundReport,
    biharmonic_sq,
    effective_resistance,
    gradient,
    kirchhoff_index,
    marginal_decrease,
    spectral_bounds,
)
from .sketch import (
    EmbeddingSketch,
    ResistanceSketch,
    build_resistance_sketch,
    embed_nodes,
    query_biharmonic,
    query_resistance,
    solver_tolerance,
    update_embedding,
)
from .hull import (
    ExtremeSubset,
    HullExhaustedError,
    PointCloud,
    approx_convex_hull,
    distance_to_hull,
    farthest_pair,
)
from .optimize import (
    ALGORITHMS,
    AlgoParams,
    SelectionResult,
    approx_greedy,
    brute_force,
    deter,
    fast_grad,
    fast_grad_plus,
    grad,
    one_conv,
)

__version__ = "0.1.0"
