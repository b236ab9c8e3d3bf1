"""Statistical shape analysis of multivariate closed planar curves."""
from .classify import build_design, cross_validate, fit_group_lasso_logistic
from .deformation import PreShape, Shape, center_and_scale, icf_align
from .errors import DataError, DomainError, NumericalError
from .fourier import MultiCurve, eval_basis, inner_product, reparametrize, rotate
from .kernels import BACKEND
from .sphere import align_dataset, estimate_pipeline, exp_map, frechet_mean, geodesic_distance, log_map

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DataError",
    "DomainError",
    "MultiCurve",
    "NumericalError",
    "PreShape",
    "Shape",
    "align_dataset",
    "build_design",
    "center_and_scale",
    "cross_validate",
    "estimate_pipeline",
    "eval_basis",
    "exp_map",
    "fit_group_lasso_logistic",
    "frechet_mean",
    "geodesic_distance",
    "icf_align",
    "inner_product",
    "log_map",
    "reparametrize",
    "rotate",
]
