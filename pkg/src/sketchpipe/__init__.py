"""Single-pass data sparsification with PCA and K-means on the sketch.

Columns of a p x n matrix are preconditioned by a randomized orthonormal
system (fast transform times random signs) and exactly m of p entries per
column are kept, uniformly without replacement.  The resulting sparse sketch
supports unbiased mean/covariance estimation, PCA, and a sparsified K-means
whose assignments and centers come from a single pass over the data, along
with closed-form error bounds for every estimator.
"""

from .bounds import (
    BoundInputs,
    clamp01,
    cor4_min_m,
    cov_constants,
    cov_delta2,
    cov_t_for_delta2,
    hk_delta3,
    hk_t_for_delta3,
    jl_min_m,
    mean_delta1,
    mean_t_for_delta1,
    ros_rho,
    tau,
)
from .cluster import (
    Assignments,
    CenterSet,
    CountDiagonal,
    KMeansResult,
    clustering_accuracy,
    feature_extraction_baseline,
    feature_selection_exact_svd,
    kmeans_pp_init,
    lloyd_full,
    sparsified_assign,
    sparsified_kmeans,
    sparsified_kmeans_two_pass,
    sparsified_update_centers,
)
from .datagen import (
    gen_clusters,
    gen_mean_plus_noise,
    gen_multivariate_t,
    gen_spiked,
    load_idx_matrix,
    read_idx,
)
from .errors import DimensionError, ParameterError
from .estimators import (
    CovarianceEstimate,
    estimate_covariance,
    estimate_mean,
    explained_variance,
    principal_components,
    recovered_pc_count,
    top_eigenvectors,
)
from .io import (
    DenseFileSource,
    read_dense,
    read_sketch,
    write_dense,
    write_sketch,
)
from .sketch import (
    ArraySource,
    DataStats,
    SamplingPlan,
    SparseSketch,
    as_source,
    compute_stats,
    plan_for,
    sample_indices,
    sketch_column,
    sketch_stream,
)
from .transform import (
    DCT,
    HADAMARD,
    NONE,
    PreconditionSpec,
    dct_ortho,
    dct_ortho_inverse,
    fwht_inplace,
    next_pow2,
    precondition,
    precondition_columns,
    unprecondition,
    unprecondition_columns,
)

__version__ = "0.1.0"
