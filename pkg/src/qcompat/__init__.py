"""Which initial states survive a unitary measurement as eigenstates?

Finite-dimensional tools for building apparatus-system unitaries, classifying
initial system states as compatible with a measurement, and auditing the
no-go results about such states by sampling.
"""
__version__ = "0.1.0"

from ._validation import DEFAULT_TOLERANCES, Tolerances
from .compat import (
    AuditReport,
    CompatibilityVerdict,
    Conclusion,
    VerdictKind,
    Witness,
    classify,
    density_corollary_check,
    eigenspace_weight,
    measure_zero_probe,
    restriction_witness,
    theorem1_audit,
    theorem2_audit,
)
from .estimator import CompatibilityClassifier
from .measure_model import (
    MeasurementSetup,
    PointerAssignment,
    controlled_flip_setup,
    haar_random_state,
    haar_random_unitary,
    product_setup,
    von_neumann_unitary,
)
from .qcore import (
    BipartiteSplit,
    DensityMatrix,
    Observable,
    Operator,
    SchmidtDecomposition,
    StateVector,
    UnitaryOperator,
    apply_unitary,
    born_measure,
    decohere,
    evolve_density,
    is_product,
    partial_trace,
    schmidt,
    spectral_decompose,
    tensor,
    tensor_op,
)

__all__ = [
    "__version__",
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "StateVector",
    "Operator",
    "UnitaryOperator",
    "Observable",
    "DensityMatrix",
    "BipartiteSplit",
    "SchmidtDecomposition",
    "tensor",
    "tensor_op",
    "apply_unitary",
    "evolve_density",
    "spectral_decompose",
    "schmidt",
    "is_product",
    "partial_trace",
    "born_measure",
    "decohere",
    "PointerAssignment",
    "MeasurementSetup",
    "von_neumann_unitary",
    "haar_random_unitary",
    "haar_random_state",
    "controlled_flip_setup",
    "product_setup",
    "VerdictKind",
    "Conclusion",
    "CompatibilityVerdict",
    "AuditReport",
    "Witness",
    "classify",
    "theorem1_audit",
    "theorem2_audit",
    "restriction_witness",
    "measure_zero_probe",
    "eigenspace_weight",
    "density_corollary_check",
    "CompatibilityClassifier",
]
