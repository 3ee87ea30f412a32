from .strips import StripIndex, strip_index, strip_indices, strip_of_margin
from .itinerary import Itinerary, itinerary, itinerary_codes, itinerary_histogram
from .curves import (
    SingularCurveSet, Polyline, singularity_curves, distance_to_singularity, distances_to_singularity,
)
