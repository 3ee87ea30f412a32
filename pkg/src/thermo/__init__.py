from .sampling import (
    MeasureSample, sample_measure, birkhoff_histogram, histogram_test, phi_marginal_test,
    ULAM_CELLS, TRAJECTORY,
)
from .adaptedness import AdaptednessReport, NeighborhoodScaling, adaptedness_integral, neighborhood_scaling
from .entropy import (
    EntropyReport, BowenBall, BowenCheck, entropy_identities, bowen_ball_check, bowen_ball_hits,
    local_entropy, srb_lyapunov,
)
from .clt import CLTReport, clt_check, affine_pressure_diagnostic, observable_continuity
