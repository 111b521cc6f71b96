"""Search for additive structure: beta, progression fitting, inverse detection."""
from .beta import BetaResult, arak_rhs, beta_exact_r1, beta_upper
from .detect import coordinate_concentrations, inverse_detect, selection_volume
from .fit import fit_progression_1d
from .k1 import grow_signed_cube, k1_report_compound_poisson, k1_report_iid, k1_structure_report
from .report import BoundTarget, StructureConfig, StructureReport

__all__ = [
    "BetaResult",
    "BoundTarget",
    "StructureConfig",
    "StructureReport",
    "arak_rhs",
    "beta_exact_r1",
    "beta_upper",
    "coordinate_concentrations",
    "fit_progression_1d",
    "grow_signed_cube",
    "inverse_detect",
    "k1_report_compound_poisson",
    "k1_report_iid",
    "k1_structure_report",
    "selection_volume",
]
