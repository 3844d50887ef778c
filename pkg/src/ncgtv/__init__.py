"""Graph-signal denoising with non-convex graph total variation.

A graph Huber penalty debiases the TV term's shrinkage of large signal
jumps; a Gershgorin-disc certificate picks the largest MC parameter that
keeps the overall objective convex, and an ADMM loop with CG and proximal
inner steps minimizes it.
"""

from ._backend import backend_name
from .certify import (
    BracketResult,
    CertResult,
    RowSums,
    binary_search_bracket,
    certify,
    feasible,
    gct_lower_bound,
    penalty_matrix,
    row_root,
    subset_sums,
    threshold_list,
)
from .graph import (
    Graph,
    IncidenceMatrix,
    SparseSymmetric,
    dense_min_eig,
    glr,
    gtv,
    incidence,
    laplacian,
    laplacian_from_weights,
    load_graph,
    load_signal,
    save_graph,
    save_signal,
    spmv,
)
from .huber import (
    L1,
    QUADRATIC,
    PenaltyGraph,
    build_penalty_graph,
    graph_huber,
    moreau_oracle,
    scalar_huber,
    scalar_mc,
)
from .solver import (
    CGError,
    DenoiseResult,
    SolverConfig,
    dual_update,
    glr_denoise,
    gtv_denoise,
    ncgtv_denoise,
    objective_value,
    soft_threshold,
    x_update,
    z_update,
)

__version__ = "0.1.0"
