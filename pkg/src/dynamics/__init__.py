from .billiard_map import (
    PhasePoint, CollisionStep, Advance, step, step_inverse, advance, advance_inverse,
    differential, phase_distance, TOL_TANGENT,
)
from .hyperbolicity import (
    TangentVector, Orbit, orbit, stable_direction, unstable_direction, angle_factor,
    stable_jacobian, unstable_jacobian, stable_log_jacobian_batch, unstable_log_jacobian_batch,
    cone_invariance_check, expansion_along_cone, empirical_c1, fit_distortion_constant,
    trajectory_frame,
)
