"""Distance functions to closed sets in the plane and in space.

Distance fields under Euclidean and smooth Minkowski norms, Clarke-critical
point detection, distance-sphere extraction, reach estimation, piecewise-affine
DC calculus and the cone direction example.
"""

from .norms import Norm, norm_eval, norm_gradient, parse_norm, sample_unit_sphere
from .scene import Ball, ClosedSet, NearestSet, Point, PolylineLoop, Segment, distance, nearest_points
from .field import DistanceField, GridSpec, field_gradient, interpolate, sample_field
from .kernels import HAVE_COMPILED
from . import cone, critical, dc, io, levelset, reach  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "Norm", "norm_eval", "norm_gradient", "parse_norm", "sample_unit_sphere",
    "Ball", "ClosedSet", "NearestSet", "Point", "PolylineLoop", "Segment",
    "distance", "nearest_points",
    "DistanceField", "GridSpec", "field_gradient", "interpolate", "sample_field",
    "HAVE_COMPILED",
    "cone", "critical", "dc", "io", "levelset", "reach",
]
