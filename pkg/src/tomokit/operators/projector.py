"""Ray-driven tomographic projection operator.

Forward projection integrates the image along one ray per detector pixel
with exact voxel intersection lengths; back-projection splats the same
weights, making the pair an exact transpose.  Supported beams: parallel
(2D/3D), fan and cone, including tilted rotation axes for laminography.
"""

from __future__ import annotations

import numpy as np

from ..containers import LabeledArray
from ..geometry import (CONE, FAN, PARALLEL_2D, PARALLEL_3D,
                        AcquisitionGeometry, GeometryError, ImageGeometry)
from . import Operator
from . import _siddon

# per-angle ray caching is skipped above this many rays to bound memory
_RAY_CACHE_LIMIT = 5_000_000


def _rotation_matrix(axis, theta):
    ux, uy, uz = axis
    c = np.cos(theta)
    s = np.sin(theta)
    cross = np.array([[0.0, -uz, uy],
                      [uz, 0.0, -ux],
                      [-uy, ux, 0.0]])
    outer = np.outer(axis, axis)
    return c * np.eye(3) + s * cross + (1.0 - c) * outer


class ProjectionOperator(Operator):
    """Siddon forward/back-projector between an image and an acquisition
    geometry."""

    def __init__(self, image_geometry, acquisition_geometry):
        if not isinstance(image_geometry, ImageGeometry):
            raise GeometryError("domain must be an ImageGeometry")
        if not isinstance(acquisition_geometry, AcquisitionGeometry):
            raise GeometryError("range must be an AcquisitionGeometry")
        if image_geometry.dimension != acquisition_geometry.dimension:
            raise GeometryError(
                f"{image_geometry.dimension}-D image is incompatible with "
                f"{acquisition_geometry.dimension}-D acquisition")
        super().__init__(image_geometry, acquisition_geometry)
        self.ig = image_geometry
        self.ag = acquisition_geometry

        axis_pos = self.ag.rotation_axis_position
        origin = self.ig.grid_origin(axis_pos)
        self._grid_origin = origin
        self._angles = self.ag.angles_rad
        self._pixels_per_angle = int(np.prod(self.ag.shape[1:]))
        total = self._pixels_per_angle * self._angles.size
        self._cache = {} if total <= _RAY_CACHE_LIMIT else None
        self._check_sources_outside()

    # -- ray generation -------------------------------------------------------

    def _panel_positions(self):
        """Unrotated pixel-centre positions, flattened in data order."""
        ag = self.ag
        offx, offy = ag.pixel_offsets()
        if ag.dimension == 2:
            pos = (ag.detector_position[None, :]
                   + offx[:, None] * ag.detector_direction_x[None, :])
            return pos
        pos = (ag.detector_position[None, None, :]
               + offy[:, None, None] * ag.detector_direction_y[None, None, :]
               + offx[None, :, None] * ag.detector_direction_x[None, None, :])
        return pos.reshape(-1, 3)

    def _rays(self, a):
        if self._cache is not None and a in self._cache:
            return self._cache[a]
        ag = self.ag
        rot = _rotation_matrix(ag.rotation_axis_direction, self._angles[a])
        p0 = ag.rotation_axis_position
        pix = self._panel_positions()
        pix_rot = (pix - p0) @ rot.T + p0
        if ag.beam in (PARALLEL_2D, PARALLEL_3D):
            d = rot @ ag.beam_direction()
            dirs = np.broadcast_to(d, pix_rot.shape).copy()
            origins = pix_rot
        else:
            src = rot @ (ag.source_position - p0) + p0
            dirs = pix_rot - src[None, :]
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            origins = np.broadcast_to(src, pix_rot.shape).copy()
        rays = (np.ascontiguousarray(origins.T),
                np.ascontiguousarray(dirs.T))
        if self._cache is not None:
            self._cache[a] = rays
        return rays

    def _check_sources_outside(self):
        if self.ag.beam not in (FAN, CONE):
            return
        lo = np.array(self._grid_origin)
        hi = lo + np.array([n * s for n, s in zip(self.ig.voxel_num,
                                                  self.ig.voxel_size)])
        p0 = self.ag.rotation_axis_position
        for theta in self._angles:
            rot = _rotation_matrix(self.ag.rotation_axis_direction, theta)
            src = rot @ (self.ag.source_position - p0) + p0
            inside = all(lo[i] < src[i] < hi[i]
                         for i in range(self.ig.dimension))
            if inside:
                raise GeometryError("source position falls inside the "
                                    "reconstruction volume")

    # -- application -----------------------------------------------------------

    def direct(self, x, out=None):
        self._check_direct_input(x)
        ig = self.ig
        img = np.ascontiguousarray(x.values)
        sino = np.empty(self.ag.shape, dtype=np.float64)
        flat = sino.reshape(self._angles.size, -1)
        buf = np.empty(self._pixels_per_angle, dtype=np.float64)
        if ig.dimension == 2:
            (x0, y0) = self._grid_origin
            nx, ny = ig.voxel_num
            sx, sy = ig.voxel_size
            for a in range(self._angles.size):
                o, d = self._rays(a)
                _siddon.forward_2d(img, x0, y0, sx, sy, nx, ny,
                                   o[0], o[1], d[0], d[1], buf)
                flat[a, :] = buf
        else:
            (x0, y0, z0) = self._grid_origin
            nx, ny, nz = ig.voxel_num
            sx, sy, sz = ig.voxel_size
            for a in range(self._angles.size):
                o, d = self._rays(a)
                _siddon.forward_3d(img, x0, y0, z0, sx, sy, sz, nx, ny, nz,
                                   o[0], o[1], o[2], d[0], d[1], d[2], buf)
                flat[a, :] = buf
        if out is None:
            return LabeledArray(sino, self.ag.labels, self.ag, copy=False)
        out.values[...] = sino
        return out

    def adjoint(self, y, out=None):
        self._check_adjoint_input(y)
        ig = self.ig
        img = np.zeros(ig.shape, dtype=np.float64)
        flat = np.ascontiguousarray(y.values).reshape(self._angles.size, -1)
        if ig.dimension == 2:
            (x0, y0) = self._grid_origin
            nx, ny = ig.voxel_num
            sx, sy = ig.voxel_size
            for a in range(self._angles.size):
                o, d = self._rays(a)
                _siddon.adjoint_2d(img, x0, y0, sx, sy, nx, ny,
                                   o[0], o[1], d[0], d[1],
                                   np.ascontiguousarray(flat[a]))
        else:
            (x0, y0, z0) = self._grid_origin
            nx, ny, nz = ig.voxel_num
            sx, sy, sz = ig.voxel_size
            for a in range(self._angles.size):
                o, d = self._rays(a)
                _siddon.adjoint_3d(img, x0, y0, z0, sx, sy, sz, nx, ny, nz,
                                   o[0], o[1], o[2], d[0], d[1], d[2],
                                   np.ascontiguousarray(flat[a]))
        if out is None:
            return LabeledArray(img, ig.labels, ig, copy=False)
        out.values[...] = img
        return out
