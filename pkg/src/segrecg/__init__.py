"""Low-rank CP approximation of complete and incomplete tensors by
Riemannian conjugate gradient on products of Segre manifolds."""
from .diagnostics import (
    PredictionRule,
    corcondia,
    predict_rating,
    relative_error,
    rmse,
    secant_dim_bound,
)
from .objectives import ObjectiveSpec, objective, riemannian_gradient
from .rcg import FitReport, OptimizerConfig, minimize
from .segre import (
    ApexError,
    CPDTangent,
    SegrePoint,
    SegreTangent,
    embed_tangent,
    exp_retract,
    geodesic,
    metric_inner,
    project_to_tangent,
    random_point,
    transport,
)
from .tensor_core import (
    CPDModel,
    Rank1Term,
    SparseObservations,
    cpd_entry,
    cpd_reconstruct,
    frobenius_norm,
    masked_residual,
    contract_residual,
    outer_rank1,
)

__version__ = "0.1.0"
