"""Preprocessing stages for labelled data.

Each processor holds its parameters and is applied by calling it on a
data array; the result is a new array with a geometry recomputed to
match the transformed shape.  Processors are pure: the same spec applied
to the same data always yields the same result.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .containers import LabeledArray
from .geometry import (ANGLE_LABEL, HORIZONTAL_LABEL, PARALLEL_2D,
                       PARALLEL_3D, VERTICAL_LABEL, AcquisitionGeometry,
                       GeometryError, ImageGeometry)


def _as_values(x):
    return x.values if isinstance(x, LabeledArray) else \
        np.asarray(x, dtype=np.float64)


class Normaliser:
    """Flat/dark-field correction: (data - dark) / (flat - dark).

    Pixels with a vanishing denominator receive ``fill`` (default 1.0);
    the number of such pixels is stored on ``zero_count`` after a call.
    """

    def __init__(self, flat, dark=0.0, fill=1.0):
        self.flat = _as_values(flat)
        self.dark = _as_values(dark) if not np.isscalar(dark) else \
            np.float64(dark)
        self.fill = float(fill)
        self.zero_count = 0

    def __call__(self, data):
        denom = self.flat - self.dark
        numer = data.values - self.dark
        zero = denom == 0.0
        self.zero_count = int(np.sum(np.broadcast_to(
            zero, data.shape))) if np.any(zero) else 0
        safe = np.where(zero, 1.0, denom)
        values = numer / safe
        if self.zero_count:
            values = np.where(np.broadcast_to(zero, data.shape), self.fill,
                              values)
        return LabeledArray(values, data.labels, data.geometry)


def _normalise_roi(roi_entry, extent, what):
    entry = tuple(roi_entry)
    if len(entry) == 2:
        start, stop = entry
        third = 1
    elif len(entry) == 3:
        start, stop, third = entry
    else:
        raise ValueError(f"{what}: roi entries are (start, stop[, step])")
    start = 0 if start is None else int(start)
    stop = extent if stop is None else int(stop)
    third = 1 if third is None else int(third)
    if start < 0 or stop > extent or start >= stop:
        raise ValueError(f"{what}: range [{start}, {stop}) invalid for "
                         f"extent {extent}")
    if third < 1:
        raise ValueError(f"{what}: step/width must be >= 1")
    return start, stop, third


def _centre_shift(offsets_kept):
    return 0.5 * (offsets_kept[0] + offsets_kept[-1])


class _GeometryEditor:
    """Applies per-label extent changes to a geometry."""

    def __init__(self, geometry):
        self.g = geometry.copy()

    def subset_angles(self, idx):
        self.g.angles = self.g.angles[idx].copy()

    def panel_update(self, label, kept_offsets, new_count, size_factor):
        ag = self.g
        if label == HORIZONTAL_LABEL:
            direction = ag.detector_direction_x
            nh, nv = ag.num_pixels
            sh, sv = ag.pixel_size
            ag.num_pixels = (new_count, nv)
            ag.pixel_size = (sh * size_factor, sv)
        else:
            direction = ag.detector_direction_y
            nh, nv = ag.num_pixels
            sh, sv = ag.pixel_size
            ag.num_pixels = (nh, new_count)
            ag.pixel_size = (sh, sv * size_factor)
        ag.detector_position = (ag.detector_position
                                + _centre_shift(kept_offsets) * direction)

    def image_update(self, label, axis_index, kept_centres, new_count,
                     size_factor):
        ig = self.g
        num = list(ig.voxel_num)
        size = list(ig.voxel_size)
        off = list(ig.center_offset)
        num[axis_index] = new_count
        off[axis_index] += _centre_shift(kept_centres)
        size[axis_index] *= size_factor
        self.g = ImageGeometry(num, size, off)


def _label_to_image_axis(geometry, label):
    # image voxel tuples are ordered (x, y[, z])
    mapping = {"horizontal_x": 0, "horizontal_y": 1, "vertical": 2}
    axis = mapping.get(label)
    if axis is None or axis >= geometry.dimension:
        raise ValueError(f"unknown image axis {label!r}")
    return axis


def _axis_offsets(geometry, label):
    """Pixel/voxel centre offsets from the geometry centre along a label."""
    if isinstance(geometry, AcquisitionGeometry):
        ox, oy = geometry.pixel_offsets()
        return ox if label == HORIZONTAL_LABEL else oy
    axis = _label_to_image_axis(geometry, label)
    n = geometry.voxel_num[axis]
    s = geometry.voxel_size[axis]
    return (np.arange(n) + 0.5 - n / 2.0) * s


class Slicer:
    """Strided subset per label: roi maps label -> (start, stop[, step])."""

    def __init__(self, roi):
        self.roi = dict(roi)

    def __call__(self, data):
        values = data.values
        editor = _GeometryEditor(data.geometry) if data.geometry is not None \
            else None
        for label, entry in self.roi.items():
            ax = data.axis(label)
            start, stop, step = _normalise_roi(entry, values.shape[ax],
                                               f"slice roi[{label!r}]")
            idx = [slice(None)] * values.ndim
            idx[ax] = slice(start, stop, step)
            values = values[tuple(idx)]
            if editor is None:
                continue
            if isinstance(editor.g, AcquisitionGeometry):
                if label == ANGLE_LABEL:
                    editor.subset_angles(slice(start, stop, step))
                else:
                    kept = _axis_offsets(data.geometry, label)[
                        start:stop:step]
                    editor.panel_update(label, kept, kept.size, step)
            else:
                axis = _label_to_image_axis(editor.g, label)
                kept = _axis_offsets(data.geometry, label)[start:stop:step]
                editor.image_update(label, axis, kept, kept.size, step)
        geometry = editor.g if editor is not None else None
        return LabeledArray(np.ascontiguousarray(values), data.labels,
                            geometry)


class Binner:
    """Average non-overlapping windows: roi maps label ->
    (start, stop[, width]); any trailing remainder is discarded."""

    def __init__(self, roi):
        self.roi = dict(roi)

    def __call__(self, data):
        values = data.values
        editor = _GeometryEditor(data.geometry) if data.geometry is not None \
            else None
        for label, entry in self.roi.items():
            ax = data.axis(label)
            start, stop, width = _normalise_roi(entry, values.shape[ax],
                                                f"bin roi[{label!r}]")
            n_win = (stop - start) // width
            if n_win < 1:
                raise ValueError(f"bin roi[{label!r}]: empty result")
            idx = [slice(None)] * values.ndim
            idx[ax] = slice(start, start + n_win * width)
            window = values[tuple(idx)]
            shape = list(window.shape)
            shape[ax:ax + 1] = [n_win, width]
            values = window.reshape(shape).mean(axis=ax + 1)
            if editor is None:
                continue
            sel = slice(start, start + n_win * width)
            if isinstance(editor.g, AcquisitionGeometry):
                if label == ANGLE_LABEL:
                    angles = editor.g.angles[sel].reshape(n_win, width)
                    editor.g.angles = angles.mean(axis=1)
                else:
                    kept = _axis_offsets(data.geometry, label)[sel]
                    centres = kept.reshape(n_win, width).mean(axis=1)
                    editor.panel_update(label, centres, n_win, width)
            else:
                axis = _label_to_image_axis(editor.g, label)
                kept = _axis_offsets(data.geometry, label)[sel]
                centres = kept.reshape(n_win, width).mean(axis=1)
                editor.image_update(label, axis, centres, n_win, width)
        geometry = editor.g if editor is not None else None
        return LabeledArray(np.ascontiguousarray(values), data.labels,
                            geometry)


class Padder:
    """Extend labelled axes: widths maps label -> width or (before, after);
    mode is 'constant' (with ``value``) or 'edge'."""

    def __init__(self, widths, mode="constant", value=0.0):
        if mode not in ("constant", "edge"):
            raise ValueError("mode must be 'constant' or 'edge'")
        self.widths = dict(widths)
        self.mode = mode
        self.value = float(value)

    def __call__(self, data):
        pad = [(0, 0)] * data.ndim
        for label, w in self.widths.items():
            ax = data.axis(label)
            before, after = (w, w) if np.isscalar(w) else tuple(w)
            if before < 0 or after < 0:
                raise ValueError("pad widths must be >= 0")
            pad[ax] = (int(before), int(after))
        if self.mode == "constant":
            values = np.pad(data.values, pad, mode="constant",
                            constant_values=self.value)
        else:
            values = np.pad(data.values, pad, mode="edge")
        geometry = None
        if data.geometry is not None:
            editor = _GeometryEditor(data.geometry)
            for label, w in self.widths.items():
                before, after = (w, w) if np.isscalar(w) else tuple(w)
                if before == after == 0:
                    continue
                if isinstance(editor.g, AcquisitionGeometry):
                    if label == ANGLE_LABEL:
                        raise GeometryError("cannot pad the angle axis of "
                                            "acquisition data")
                    old = _axis_offsets(data.geometry, label)
                    spacing = old[1] - old[0] if old.size > 1 else \
                        (editor.g.pixel_size[0]
                         if label == HORIZONTAL_LABEL
                         else editor.g.pixel_size[1])
                    kept = np.concatenate([
                        old[0] - spacing * np.arange(before, 0, -1),
                        old,
                        old[-1] + spacing * np.arange(1, after + 1)])
                    editor.panel_update(label, kept, kept.size, 1.0)
                else:
                    axis = _label_to_image_axis(editor.g, label)
                    s = editor.g.voxel_size[axis]
                    old = _axis_offsets(data.geometry, label)
                    kept = np.concatenate([
                        old[0] - s * np.arange(before, 0, -1),
                        old,
                        old[-1] + s * np.arange(1, after + 1)])
                    editor.image_update(label, axis, kept, kept.size, 1.0)
            geometry = editor.g
        return LabeledArray(values, data.labels, geometry)


class MaskGenerator:
    """Binary keep-mask from a threshold window or non-finite detection."""

    def __init__(self, method="threshold", lower=None, upper=None):
        if method not in ("threshold", "non_finite"):
            raise ValueError("method must be 'threshold' or 'non_finite'")
        self.method = method
        self.lower = lower
        self.upper = upper

    def __call__(self, data):
        v = data.values
        if self.method == "non_finite":
            keep = np.isfinite(v)
        else:
            keep = np.ones(v.shape, dtype=bool)
            if self.lower is not None:
                keep &= v >= self.lower
            if self.upper is not None:
                keep &= v <= self.upper
        return LabeledArray(keep.astype(np.float64), data.labels,
                            data.geometry)


class Masker:
    """Replace masked-out entries (mask == 0) by a fill value or by the
    local mean of kept neighbours in a 3^n window."""

    def __init__(self, mask, fill="value", value=0.0):
        if fill not in ("value", "local_mean"):
            raise ValueError("fill must be 'value' or 'local_mean'")
        self.mask = mask
        self.fill = fill
        self.value = float(value)

    def __call__(self, data):
        mask = _as_values(self.mask)
        if mask.shape != data.shape:
            raise ValueError("mask shape does not match the data")
        keep = mask != 0.0
        if self.fill == "value":
            values = np.where(keep, data.values, self.value)
        else:
            clean = np.where(keep, data.values, 0.0)
            kernel = np.ones((3,) * data.ndim)
            sums = ndimage.convolve(clean, kernel, mode="constant", cval=0.0)
            counts = ndimage.convolve(keep.astype(np.float64), kernel,
                                      mode="constant", cval=0.0)
            local = np.where(counts > 0, sums / np.maximum(counts, 1.0), 0.0)
            values = np.where(keep, data.values, local)
        return LabeledArray(values, data.labels, data.geometry)


class CentreOfRotationCorrector:
    """Estimate the rotation-axis offset by cross-correlation.

    A projection is correlated with the horizontally flipped projection
    taken roughly 180 degrees away; the correlation peak (refined by a
    three-point parabolic fit) sits at twice the axis offset.  Only the
    geometry is corrected; data values are untouched.  The estimate in
    pixels is stored on ``estimated_offset`` after a call.
    """

    def __init__(self, slice_index="centre", angle_tolerance=0.1,
                 nearest_pair=False):
        self.slice_index = slice_index
        self.angle_tolerance = float(angle_tolerance)
        self.nearest_pair = nearest_pair
        self.estimated_offset = None

    def _find_pair(self, angles_deg):
        delta = np.mod(angles_deg[None, :] - angles_deg[:, None], 360.0)
        dist = np.abs(delta - 180.0)
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[i, j] > self.angle_tolerance and not self.nearest_pair \
                and not self._covers_half_turn(angles_deg):
            raise ValueError(
                f"no opposing projection within {self.angle_tolerance} "
                f"degrees (closest pair is {dist[i, j]:.3f} degrees off); "
                "pass nearest_pair=True to use it anyway")
        return int(i), int(j)

    @staticmethod
    def _covers_half_turn(angles_deg):
        # full 180-degree sets (golden angle included) may use the nearest
        # pair; judged by the largest circular gap of the angles mod 180
        phi = np.sort(np.mod(angles_deg, 180.0))
        gaps = np.diff(phi)
        wrap = phi[0] + 180.0 - phi[-1]
        max_gap = max(float(np.max(gaps)) if gaps.size else 180.0, wrap)
        return max_gap <= max(1.5 * 180.0 / phi.size, 5.0)

    def __call__(self, data):
        ag = data.geometry
        if not isinstance(ag, AcquisitionGeometry) or \
                ag.beam not in (PARALLEL_2D, PARALLEL_3D):
            raise GeometryError("centre-of-rotation correction needs "
                                "parallel-beam data with geometry")
        if ag.beam == PARALLEL_3D:
            nv = ag.num_pixels[1]
            index = nv // 2 if self.slice_index == "centre" \
                else int(self.slice_index)
            sino = data.reorder(ag.labels).get_slice(vertical=index)
            sino_values = sino.values
        else:
            sino_values = data.reorder(ag.labels).values
        angles_deg = ag.angles if ag.angle_unit == "degree" \
            else np.rad2deg(ag.angles)
        i, j = self._find_pair(angles_deg)
        # correlate horizontal derivatives: edges dominate, so the peak is
        # sharp even for smooth, nearly symmetric samples; differentiation
        # shifts both profiles identically and leaves the lag unchanged
        a = np.diff(sino_values[i])
        b = np.diff(sino_values[j][::-1])
        corr = np.correlate(a, b, mode="full")
        peak = int(np.argmax(corr))
        lag = peak - (a.size - 1)
        shift = 0.0
        if 0 < peak < corr.size - 1:
            c_m, c_0, c_p = corr[peak - 1], corr[peak], corr[peak + 1]
            denom = c_m - 2.0 * c_0 + c_p
            if denom != 0.0:
                shift = 0.5 * (c_m - c_p) / denom
        offset_pixels = (lag + shift) / 2.0
        self.estimated_offset = offset_pixels

        corrected = ag.copy()
        d = ag.detector_direction_x
        current = float(np.dot(ag.rotation_axis_position
                               - ag.detector_position, d))
        target = offset_pixels * ag.pixel_size[0]
        corrected.rotation_axis_position = (
            ag.rotation_axis_position + (target - current) * d)
        return LabeledArray(data.values, data.labels, corrected)


class RingRemover:
    """Suppress constant sinogram stripes (ring artifacts).

    Per detector column the mean over angles is computed; its deviation
    from a moving-median smoothed version (width ``width``, odd >= 3) is
    subtracted from every angle of that column.
    """

    def __init__(self, width=11):
        width = int(width)
        if width < 3 or width % 2 == 0:
            raise ValueError("width must be an odd integer >= 3")
        self.width = width

    def __call__(self, data):
        if ANGLE_LABEL not in data.labels:
            raise ValueError("ring removal needs an angle axis")
        a_ax = data.axis(ANGLE_LABEL)
        h_ax = data.axis(HORIZONTAL_LABEL)
        means = data.values.mean(axis=a_ax)
        # median over the horizontal neighbours, centre sample excluded so
        # a stripe cannot dominate its own window on sloped backgrounds
        h_in_means = h_ax - (1 if a_ax < h_ax else 0)
        footprint_1d = np.ones(self.width, dtype=bool)
        footprint_1d[self.width // 2] = False
        shape = [1] * means.ndim
        shape[h_in_means] = self.width
        footprint = footprint_1d.reshape(shape)
        smooth = ndimage.median_filter(means, footprint=footprint,
                                       mode="nearest")
        stripe = means - smooth
        values = data.values - np.expand_dims(stripe, axis=a_ax)
        return LabeledArray(values, data.labels, data.geometry)
