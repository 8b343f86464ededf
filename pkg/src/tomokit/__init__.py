"""tomokit: modular tomographic reconstruction toolkit.

Labeled data containers with geometry, a linear-operator and convex-
function calculus, first-order solvers (GD, CGLS, SIRT, FISTA, PDHG,
LADMM), analytic parallel-beam FBP, preprocessing stages, phantoms and
quality metrics, bit-exact file formats and a pipeline CLI.
"""

from .containers import BlockContainer, BlockGeometry, LabeledArray, stack
from .geometry import (AcquisitionGeometry, GeometryError, ImageGeometry,
                       cone_beam_3d, default_image_geometry, fan_beam_2d,
                       parallel_beam_2d, parallel_beam_3d)

__version__ = "0.1.0"

__all__ = [
    "LabeledArray", "BlockContainer", "BlockGeometry", "stack",
    "AcquisitionGeometry", "ImageGeometry", "GeometryError",
    "parallel_beam_2d", "parallel_beam_3d", "fan_beam_2d", "cone_beam_3d",
    "default_image_geometry",
    "__version__",
]
