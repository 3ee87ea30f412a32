from .table import (
    TableGeometry, Scatterer, BoundaryPoint, boundary_point,
    default_table, load_table_config, DEFAULT_TABLE,
)
from .validation import ValidationReport, validate_table
from .raycast import cast_rays, RayHits
