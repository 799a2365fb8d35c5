"""Numerical osculating-flag geometry of Euclidean submanifolds."""

from .errors import OscflagError
from .geometry import (Box, ImmersionChart, PointGeometry, box, eval_jet,
                       point_geometry, relative_nullity, ricci, s_nullity,
                       sectional_curvature)
from .jets import (DerivativeTensor, Jet, VectorJet, jet_arith, jet_constant,
                   jet_variable, variables)
from .nonparallel import (NonparallelData, PhiTensor, classify_case,
                          nonparallel_data, phi_frame_fd, phi_pairing)
from .ruled_extension import (RuledExtension, SplittingSpec, build_extension,
                              gamma_tensor, lambda_delta, verify_extension)
from .subspaces import (BilinearForm, Subspace, complement_within, kernel_of,
                        moore_check, principal_angles, project,
                        regular_element, span_of)
from .verify import Report, RunConfig, run_verification

__version__ = "0.1.0"

__all__ = [
    "Box", "BilinearForm", "DerivativeTensor", "ImmersionChart", "Jet",
    "NonparallelData", "OscflagError", "PhiTensor", "PointGeometry",
    "Report", "RuledExtension", "RunConfig", "SplittingSpec", "Subspace",
    "VectorJet", "box", "build_extension", "classify_case",
    "complement_within", "eval_jet", "gamma_tensor", "jet_arith",
    "jet_constant", "jet_variable", "kernel_of", "lambda_delta",
    "moore_check", "nonparallel_data", "phi_frame_fd", "phi_pairing",
    "point_geometry", "principal_angles", "project", "regular_element",
    "relative_nullity", "ricci", "run_verification", "s_nullity",
    "sectional_curvature", "span_of", "variables", "verify_extension",
]
