from .sampling import SamplingPlan, sample_srb
from .estimator import (
    ComplexityEstimate, PressurePoint, PressureCurve, ClassSample, HStarEstimate, SparseRecurrence,
    TStarEstimate, sample_classes, estimate_Qn, estimate_pressure, pressure_curve, estimate_h_star,
    sparse_recurrence_statistic, estimate_t_star, choose_theta, growth_diagnostics,
)
from .curves import (
    StableCurve, Evolution, evolve_stable_curve, evolution_frame, one_step_expansion_sum,
    one_step_violations, short_piece_fraction, smallest_k0,
)
