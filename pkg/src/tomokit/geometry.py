"""Acquisition and image geometry descriptors.

An acquisition geometry fixes the scanner layout (beam type, source and
detector placement, rotation axis, panel, projection angles) in a single
world coordinate frame.  An image geometry fixes the voxel grid of the
reconstruction volume.  Both know the shape and axis labels of the data
arrays they describe and can allocate matching arrays.

Conventions:
  * all positions and directions are 3-vectors, also for 2D beams where
    the third component is zero (the rotation axis is then implicitly +z);
  * the voxel grid is centred on ``rotation_axis_position + center_offset``
    with sample points at cell centres;
  * angles are stored verbatim in the unit given (degrees by default),
    non-uniform and unsorted lists are allowed.
"""

from __future__ import annotations

import numpy as np

PARALLEL_2D = "parallel2D"
PARALLEL_3D = "parallel3D"
FAN = "fan"
CONE = "cone"

BEAM_TYPES = (PARALLEL_2D, PARALLEL_3D, FAN, CONE)

ANGLE_LABEL = "angle"
VERTICAL_LABEL = "vertical"
HORIZONTAL_LABEL = "horizontal"
IMAGE_LABELS_2D = ("horizontal_y", "horizontal_x")
IMAGE_LABELS_3D = ("vertical", "horizontal_y", "horizontal_x")

PANEL_ORIGINS = ("bottom-left", "top-left", "bottom-right", "top-right")

_UNIT_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid or inconsistent geometry parameters."""


def _vec3(v, name):
    a = np.asarray(v, dtype=np.float64).reshape(-1)
    if a.size == 2:
        a = np.append(a, 0.0)
    if a.size != 3:
        raise GeometryError(f"{name} must be a 2- or 3-vector, got size {a.size}")
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"{name} must be finite")
    return a


def _unit_vec3(v, name):
    a = _vec3(v, name)
    n = float(np.sqrt(np.sum(a * a)))
    if n == 0.0:
        raise GeometryError(f"{name} must be non-zero")
    if abs(n - 1.0) > _UNIT_TOL:
        raise GeometryError(f"{name} must have unit norm (got {n!r})")
    return a


class AcquisitionGeometry:
    """Scanner layout plus the projection angle list.

    Use the factory functions :func:`parallel_beam_2d`,
    :func:`parallel_beam_3d`, :func:`fan_beam_2d` and :func:`cone_beam_3d`
    rather than calling the constructor directly.
    """

    def __init__(self, beam, *, source_position, detector_position,
                 detector_direction_x, detector_direction_y,
                 rotation_axis_position, rotation_axis_direction,
                 angles, angle_unit="degree", num_pixels, pixel_size,
                 origin="bottom-left", ray_direction=None):
        if beam not in BEAM_TYPES:
            raise GeometryError(f"unknown beam type {beam!r}")
        self.beam = beam

        self.source_position = _vec3(source_position, "source_position")
        self.detector_position = _vec3(detector_position, "detector_position")
        self.detector_direction_x = _unit_vec3(detector_direction_x,
                                               "detector_direction_x")
        self.detector_direction_y = _unit_vec3(detector_direction_y,
                                               "detector_direction_y")
        self.rotation_axis_position = _vec3(rotation_axis_position,
                                            "rotation_axis_position")
        self.rotation_axis_direction = _unit_vec3(rotation_axis_direction,
                                                  "rotation_axis_direction")
        if ray_direction is not None:
            ray_direction = _unit_vec3(ray_direction, "ray_direction")
        self.ray_direction = ray_direction

        angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
        if angles.ndim != 1 or angles.size == 0:
            raise GeometryError("angles must be a non-empty 1-D sequence")
        self.angles = angles.copy()
        if angle_unit not in ("degree", "radian"):
            raise GeometryError(f"angle_unit must be 'degree' or 'radian', "
                                f"got {angle_unit!r}")
        self.angle_unit = angle_unit

        num_pixels = tuple(int(n) for n in np.atleast_1d(num_pixels))
        pixel_size = tuple(float(s) for s in np.atleast_1d(pixel_size))
        if self.dimension == 2:
            if len(num_pixels) != 1 or len(pixel_size) != 1:
                raise GeometryError("2D beams take a single horizontal pixel "
                                    "count and size")
            num_pixels = (num_pixels[0], 1)
            pixel_size = (pixel_size[0], pixel_size[0])
        else:
            if len(num_pixels) == 1:
                num_pixels = (num_pixels[0], num_pixels[0])
            if len(pixel_size) == 1:
                pixel_size = (pixel_size[0], pixel_size[0])
            if len(num_pixels) != 2 or len(pixel_size) != 2:
                raise GeometryError("3D beams take (nx, ny) pixel counts and "
                                    "(sx, sy) pixel sizes")
        if any(n < 1 for n in num_pixels):
            raise GeometryError("pixel counts must be >= 1")
        if any(s <= 0 for s in pixel_size):
            raise GeometryError("pixel sizes must be strictly positive")
        self.num_pixels = num_pixels      # (horizontal, vertical)
        self.pixel_size = pixel_size      # (horizontal, vertical)

        if origin not in PANEL_ORIGINS:
            raise GeometryError(f"panel origin must be one of {PANEL_ORIGINS}")
        self.origin = origin

        if beam in (FAN, CONE):
            if np.array_equal(self.source_position, self.detector_position):
                raise GeometryError("source and detector positions coincide")

    # -- shape / labels ----------------------------------------------------

    @property
    def dimension(self):
        return 2 if self.beam in (PARALLEL_2D, FAN) else 3

    @property
    def labels(self):
        if self.dimension == 2:
            return (ANGLE_LABEL, HORIZONTAL_LABEL)
        return (ANGLE_LABEL, VERTICAL_LABEL, HORIZONTAL_LABEL)

    @property
    def shape(self):
        if self.dimension == 2:
            return (self.angles.size, self.num_pixels[0])
        return (self.angles.size, self.num_pixels[1], self.num_pixels[0])

    def label_extents(self):
        return dict(zip(self.labels, self.shape))

    @property
    def angles_rad(self):
        if self.angle_unit == "degree":
            return np.deg2rad(self.angles)
        return self.angles.copy()

    # -- derived quantities -------------------------------------------------

    def source_to_detector_distance(self):
        if self.beam not in (FAN, CONE):
            raise GeometryError("source distances are undefined for parallel "
                                "beams")
        return float(np.linalg.norm(self.detector_position -
                                    self.source_position))

    def source_to_axis_distance(self):
        """Perpendicular distance from the source to the rotation axis."""
        if self.beam not in (FAN, CONE):
            raise GeometryError("source distances are undefined for parallel "
                                "beams")
        d = self.rotation_axis_position - self.source_position
        along = np.dot(d, self.rotation_axis_direction)
        return float(np.linalg.norm(d - along * self.rotation_axis_direction))

    def magnification(self):
        if self.beam in (FAN, CONE):
            return self.source_to_detector_distance() / \
                self.source_to_axis_distance()
        return 1.0

    def beam_direction(self):
        """Unit propagation direction of an unrotated parallel beam."""
        if self.ray_direction is not None:
            return self.ray_direction.copy()
        return np.array([0.0, 1.0, 0.0])

    # -- helpers -------------------------------------------------------------

    def pixel_offsets(self):
        """Signed in-panel offsets of every pixel centre from the panel centre.

        Returns (offsets_x, offsets_y) in length units, ordered by array
        index.  The panel ``origin`` corner decides which way each index
        runs along the stored direction vectors.
        """
        nh, nv = self.num_pixels
        sh, sv = self.pixel_size
        ox = (np.arange(nh) - (nh - 1) / 2.0) * sh
        oy = (np.arange(nv) - (nv - 1) / 2.0) * sv
        if "right" in self.origin:
            ox = -ox
        if "top" in self.origin:
            oy = -oy
        return ox, oy

    def get_slice(self, label, index):
        """Geometry of the data with ``label`` removed, or None."""
        if label == VERTICAL_LABEL and self.beam == PARALLEL_3D:
            return AcquisitionGeometry(
                PARALLEL_2D,
                source_position=self.source_position,
                detector_position=self.detector_position,
                detector_direction_x=self.detector_direction_x,
                detector_direction_y=np.array([0.0, 0.0, 1.0]),
                rotation_axis_position=self.rotation_axis_position,
                rotation_axis_direction=np.array([0.0, 0.0, 1.0]),
                angles=self.angles, angle_unit=self.angle_unit,
                num_pixels=self.num_pixels[0], pixel_size=self.pixel_size[0],
                origin=self.origin, ray_direction=self.ray_direction)
        return None

    def with_angles(self, angles):
        g = self.copy()
        g.angles = np.atleast_1d(np.asarray(angles, dtype=np.float64)).copy()
        if g.angles.size == 0:
            raise GeometryError("angles must be non-empty")
        return g

    def copy(self):
        g = AcquisitionGeometry.__new__(AcquisitionGeometry)
        g.beam = self.beam
        g.source_position = self.source_position.copy()
        g.detector_position = self.detector_position.copy()
        g.detector_direction_x = self.detector_direction_x.copy()
        g.detector_direction_y = self.detector_direction_y.copy()
        g.rotation_axis_position = self.rotation_axis_position.copy()
        g.rotation_axis_direction = self.rotation_axis_direction.copy()
        g.ray_direction = None if self.ray_direction is None \
            else self.ray_direction.copy()
        g.angles = self.angles.copy()
        g.angle_unit = self.angle_unit
        g.num_pixels = self.num_pixels
        g.pixel_size = self.pixel_size
        g.origin = self.origin
        return g

    def allocate(self, value=0.0, seed=None):
        from .containers import LabeledArray
        if value == "random":
            rng = np.random.default_rng(seed)
            values = rng.random(self.shape)
        else:
            values = np.full(self.shape, float(value))
        return LabeledArray(values, self.labels, geometry=self)

    def __eq__(self, other):
        if not isinstance(other, AcquisitionGeometry):
            return NotImplemented
        if self.beam != other.beam:
            return False
        vec_fields = ("source_position", "detector_position",
                      "detector_direction_x", "detector_direction_y",
                      "rotation_axis_position", "rotation_axis_direction")
        for f in vec_fields:
            if not np.array_equal(getattr(self, f), getattr(other, f)):
                return False
        if (self.ray_direction is None) != (other.ray_direction is None):
            return False
        if self.ray_direction is not None and \
                not np.array_equal(self.ray_direction, other.ray_direction):
            return False
        return (np.array_equal(self.angles, other.angles)
                and self.angle_unit == other.angle_unit
                and self.num_pixels == other.num_pixels
                and self.pixel_size == other.pixel_size
                and self.origin == other.origin)

    def __repr__(self):
        return (f"AcquisitionGeometry({self.beam}, {self.angles.size} angles "
                f"[{self.angle_unit}], panel {self.num_pixels} @ "
                f"{self.pixel_size})")


class ImageGeometry:
    """Voxel grid of a reconstruction volume.

    2D grids are (ny, nx) arrays labelled (horizontal_y, horizontal_x);
    3D grids add a leading vertical axis.
    """

    def __init__(self, voxel_num, voxel_size=1.0, center_offset=0.0):
        voxel_num = tuple(int(n) for n in np.atleast_1d(voxel_num))
        if len(voxel_num) not in (2, 3):
            raise GeometryError("voxel_num must have 2 or 3 entries")
        if any(n < 1 for n in voxel_num):
            raise GeometryError("voxel counts must be >= 1")
        ndim = len(voxel_num)

        voxel_size = np.atleast_1d(np.asarray(voxel_size, dtype=np.float64))
        if voxel_size.size == 1:
            voxel_size = np.full(ndim, voxel_size[0])
        if voxel_size.size != ndim or np.any(voxel_size <= 0):
            raise GeometryError("voxel sizes must be positive, one per axis")

        center_offset = np.atleast_1d(np.asarray(center_offset,
                                                 dtype=np.float64))
        if center_offset.size == 1:
            center_offset = np.full(ndim, center_offset[0])
        if center_offset.size != ndim:
            raise GeometryError("center_offset needs one entry per axis")

        self.voxel_num = voxel_num              # (nx, ny[, nz])
        self.voxel_size = tuple(float(s) for s in voxel_size)
        self.center_offset = tuple(float(c) for c in center_offset)

    @property
    def dimension(self):
        return len(self.voxel_num)

    @property
    def labels(self):
        return IMAGE_LABELS_2D if self.dimension == 2 else IMAGE_LABELS_3D

    @property
    def shape(self):
        if self.dimension == 2:
            return (self.voxel_num[1], self.voxel_num[0])
        return (self.voxel_num[2], self.voxel_num[1], self.voxel_num[0])

    def label_extents(self):
        return dict(zip(self.labels, self.shape))

    def spacing_by_label(self):
        if self.dimension == 2:
            return {"horizontal_y": self.voxel_size[1],
                    "horizontal_x": self.voxel_size[0]}
        return {"vertical": self.voxel_size[2],
                "horizontal_y": self.voxel_size[1],
                "horizontal_x": self.voxel_size[0]}

    def field_of_view(self):
        """Physical edge lengths (x, y[, z]) of the voxel grid."""
        return tuple(n * s for n, s in zip(self.voxel_num, self.voxel_size))

    def grid_origin(self, axis_position=None):
        """Lower corner of the grid in world coordinates (x, y[, z]).

        The grid is centred on the rotation axis position plus the
        per-axis ``center_offset``; pass the axis position explicitly
        when the geometry came without one.
        """
        if axis_position is None:
            axis_position = np.zeros(3)
        out = []
        for i in range(self.dimension):
            c = axis_position[i] + self.center_offset[i]
            out.append(c - 0.5 * self.voxel_num[i] * self.voxel_size[i])
        return tuple(out)

    def allocate(self, value=0.0, seed=None):
        from .containers import LabeledArray
        if value == "random":
            rng = np.random.default_rng(seed)
            values = rng.random(self.shape)
        else:
            values = np.full(self.shape, float(value))
        return LabeledArray(values, self.labels, geometry=self)

    def get_slice(self, label, index):
        if label == VERTICAL_LABEL and self.dimension == 3:
            return ImageGeometry(self.voxel_num[:2], self.voxel_size[:2],
                                 self.center_offset[:2])
        return None

    def copy(self):
        return ImageGeometry(self.voxel_num, self.voxel_size,
                             self.center_offset)

    def __eq__(self, other):
        if not isinstance(other, ImageGeometry):
            return NotImplemented
        return (self.voxel_num == other.voxel_num
                and self.voxel_size == other.voxel_size
                and self.center_offset == other.center_offset)

    def __repr__(self):
        return (f"ImageGeometry(voxel_num={self.voxel_num}, "
                f"voxel_size={self.voxel_size})")


# -- factory functions ------------------------------------------------------

def parallel_beam_2d(num_pixels, angles, *, pixel_size=1.0,
                     angle_unit="degree", rotation_axis_position=(0, 0, 0),
                     origin="bottom-left"):
    """2D parallel-beam geometry; rays travel along +y at angle zero."""
    return AcquisitionGeometry(
        PARALLEL_2D,
        source_position=(0, 0, 0),
        detector_position=(0, 0, 0),
        detector_direction_x=(1, 0, 0),
        detector_direction_y=(0, 0, 1),
        rotation_axis_position=rotation_axis_position,
        rotation_axis_direction=(0, 0, 1),
        angles=angles, angle_unit=angle_unit,
        num_pixels=num_pixels, pixel_size=pixel_size, origin=origin)


def parallel_beam_3d(num_pixels, angles, *, pixel_size=(1.0, 1.0),
                     angle_unit="degree", rotation_axis_position=(0, 0, 0),
                     rotation_axis_direction=(0, 0, 1),
                     detector_position=(0, 0, 0),
                     detector_direction_x=(1, 0, 0),
                     detector_direction_y=(0, 0, 1),
                     origin="bottom-left"):
    """3D parallel-beam geometry with an optional tilted rotation axis."""
    return AcquisitionGeometry(
        PARALLEL_3D,
        source_position=(0, 0, 0),
        detector_position=detector_position,
        detector_direction_x=detector_direction_x,
        detector_direction_y=detector_direction_y,
        rotation_axis_position=rotation_axis_position,
        rotation_axis_direction=rotation_axis_direction,
        angles=angles, angle_unit=angle_unit,
        num_pixels=num_pixels, pixel_size=pixel_size, origin=origin)


def fan_beam_2d(source_position, detector_position, num_pixels, angles, *,
                pixel_size=1.0, angle_unit="degree",
                rotation_axis_position=(0, 0, 0), origin="bottom-left"):
    """2D fan-beam geometry; source and detector rotate about +z."""
    return AcquisitionGeometry(
        FAN,
        source_position=source_position,
        detector_position=detector_position,
        detector_direction_x=(1, 0, 0),
        detector_direction_y=(0, 0, 1),
        rotation_axis_position=rotation_axis_position,
        rotation_axis_direction=(0, 0, 1),
        angles=angles, angle_unit=angle_unit,
        num_pixels=num_pixels, pixel_size=pixel_size, origin=origin)


def cone_beam_3d(source_position, detector_position, num_pixels, angles, *,
                 pixel_size=(1.0, 1.0), angle_unit="degree",
                 rotation_axis_position=(0, 0, 0),
                 rotation_axis_direction=(0, 0, 1),
                 detector_direction_x=(1, 0, 0),
                 detector_direction_y=(0, 0, 1),
                 origin="bottom-left"):
    """3D cone-beam geometry; a tilted ``rotation_axis_direction`` gives a
    laminography-style scan.  The axis direction must already be unit
    length; it is validated, never re-normalised."""
    return AcquisitionGeometry(
        CONE,
        source_position=source_position,
        detector_position=detector_position,
        detector_direction_x=detector_direction_x,
        detector_direction_y=detector_direction_y,
        rotation_axis_position=rotation_axis_position,
        rotation_axis_direction=rotation_axis_direction,
        angles=angles, angle_unit=angle_unit,
        num_pixels=num_pixels, pixel_size=pixel_size, origin=origin)


def default_image_geometry(ag):
    """Reconstruction grid matched to an acquisition geometry.

    Parallel beams: as many voxels across as detector pixels, voxel size
    equal to pixel size.  Fan/cone beams: the same counts with the pixel
    size divided by the magnification at the rotation axis.
    """
    nh, nv = ag.num_pixels
    sh, sv = ag.pixel_size
    m = ag.magnification()
    if ag.dimension == 2:
        return ImageGeometry((nh, nh), (sh / m, sh / m))
    return ImageGeometry((nh, nh, nv), (sh / m, sh / m, sv / m))
