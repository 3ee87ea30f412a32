from .ulam import UlamGrid, UlamOperator, assemble_ulam, draw_from_cells
from .eigen import (
    LeadingTriple, SecondEigenvalue, EquilibriumMeasure, leading_triple, second_eigenvalue,
    equilibrium_measure, invariance_residual,
)
from .pressure import (
    SpectralPressure, Derivatives, CorrelationCurve, pressure_from_spectrum, pressure_derivatives,
    correlation, lambda_standard_error, measure_orbits,
)
