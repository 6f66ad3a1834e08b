"""Clustering of quarterly financial panels.

Panel ingestion, seven insurance ratios with within-company standardization,
LSTM-autoencoder fusion to one latent series per company, pairwise DTW
distances, DTW K-Means and complete-linkage hierarchical clustering, and
silhouette/elbow model selection. Every intermediate is exportable for
inspection and plotting.
"""

__version__ = "0.1.0"

from .panel import (
    CompanyPanel,
    METRICS,
    PanelError,
    PanelSummary,
    Quarter,
    RawRecord,
    load_panel,
    panel_from_records,
    panel_summary,
    read_panel,
    write_panel,
)
from .ratios import (
    FEATURES,
    RatioTensor,
    ScalingError,
    ScalingSpec,
    apply_scaling,
    compute_expenses,
    compute_ratios,
    fit_scaling,
    invert_scaling,
)
from .lstm import (
    AdamState,
    LatentSeries,
    LstmParams,
    LstmState,
    TrainConfig,
    TrainingDiverged,
    adam_update,
    backward_sequence,
    encode,
    encode_series,
    forward_sequence,
    init_params,
    load_params,
    loss_and_gradients,
    lstm_step,
    mse_loss,
    save_params,
    train,
)
from .dtw import (
    DistanceMatrix,
    DtwError,
    cost_matrix,
    cumulative_matrix,
    dtw_distance,
    local_cost,
    pairwise_matrix,
)
from .cluster import (
    ClusterAssignment,
    ClusterError,
    Dendrogram,
    cut_dendrogram,
    dba_barycenter,
    hierarchical_complete,
    kmeans_dtw,
    leaf_ordering,
)
from .validation import (
    SelectionReport,
    ValidationCurve,
    ValidationError,
    elbow_distortion,
    select_m,
    silhouette_mean,
    silhouette_samples,
    validation_sweep,
)
