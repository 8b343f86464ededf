"""Bit-exact persistence: a native container format, TIFF stacks and PNG
heatmap export.

The native format is an 8-byte little-endian header length, a JSON
header (schema version, shape, labels, dtype marker, byte order, CRC32
of the payload, geometry) and the raw little-endian float64 payload in
row-major label order.  Round trips are bitwise, including geometry.

TIFF stacks store one 32-bit float grayscale image per stack index
(an explicitly lossy export); PNG export maps a 2-D array through a
fixed colour lookup.
"""

from __future__ import annotations

import glob
import json
import os
import re
import struct
import zlib

import numpy as np
from PIL import Image

from .containers import LabeledArray
from .geometry import AcquisitionGeometry, ImageGeometry

SCHEMA_VERSION = 1
_MAGIC = "tomokit-native"


class NativeFormatError(ValueError):
    """Malformed or unsupported native container file."""


def _geometry_to_dict(geometry):
    if geometry is None:
        return None
    if isinstance(geometry, AcquisitionGeometry):
        return {
            "kind": "acquisition",
            "beam": geometry.beam,
            "source_position": geometry.source_position.tolist(),
            "detector_position": geometry.detector_position.tolist(),
            "detector_direction_x": geometry.detector_direction_x.tolist(),
            "detector_direction_y": geometry.detector_direction_y.tolist(),
            "rotation_axis_position":
                geometry.rotation_axis_position.tolist(),
            "rotation_axis_direction":
                geometry.rotation_axis_direction.tolist(),
            "ray_direction": None if geometry.ray_direction is None
                else geometry.ray_direction.tolist(),
            "angles": geometry.angles.tolist(),
            "angle_unit": geometry.angle_unit,
            "num_pixels": list(geometry.num_pixels),
            "pixel_size": list(geometry.pixel_size),
            "origin": geometry.origin,
        }
    if isinstance(geometry, ImageGeometry):
        return {
            "kind": "image",
            "voxel_num": list(geometry.voxel_num),
            "voxel_size": list(geometry.voxel_size),
            "center_offset": list(geometry.center_offset),
        }
    raise NativeFormatError(f"cannot serialise geometry {type(geometry)}")


def _geometry_from_dict(d):
    if d is None:
        return None
    kind = d.get("kind")
    if kind == "image":
        return ImageGeometry(d["voxel_num"], d["voxel_size"],
                             d["center_offset"])
    if kind == "acquisition":
        num_pixels = d["num_pixels"]
        pixel_size = d["pixel_size"]
        beam = d["beam"]
        if beam in ("parallel2D", "fan"):
            num_pixels = num_pixels[0]
            pixel_size = pixel_size[0]
        return AcquisitionGeometry(
            beam,
            source_position=d["source_position"],
            detector_position=d["detector_position"],
            detector_direction_x=d["detector_direction_x"],
            detector_direction_y=d["detector_direction_y"],
            rotation_axis_position=d["rotation_axis_position"],
            rotation_axis_direction=d["rotation_axis_direction"],
            ray_direction=d.get("ray_direction"),
            angles=d["angles"], angle_unit=d["angle_unit"],
            num_pixels=num_pixels, pixel_size=pixel_size,
            origin=d["origin"])
    raise NativeFormatError(f"unknown geometry kind {kind!r}")


def write_native(a, path):
    """Write a labelled array (with geometry) to the native format."""
    payload = np.ascontiguousarray(a.values, dtype="<f8").tobytes()
    header = {
        "format": _MAGIC,
        "schema": SCHEMA_VERSION,
        "dtype": "f64",
        "byte_order": "little",
        "shape": list(a.shape),
        "labels": list(a.labels),
        "payload_crc32": zlib.crc32(payload),
        "geometry": _geometry_to_dict(a.geometry),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)
    return path


def read_native(path):
    """Read a native container; bitwise inverse of :func:`write_native`."""
    with open(path, "rb") as fh:
        prefix = fh.read(8)
        if len(prefix) != 8:
            raise NativeFormatError("truncated header length prefix")
        (header_len,) = struct.unpack("<Q", prefix)
        header_bytes = fh.read(header_len)
        if len(header_bytes) != header_len:
            raise NativeFormatError("truncated header")
        try:
            header = json.loads(header_bytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise NativeFormatError(f"unreadable header: {exc}") from exc
        if header.get("format") != _MAGIC:
            raise NativeFormatError("not a native container file")
        if header.get("schema") != SCHEMA_VERSION:
            raise NativeFormatError(
                f"unsupported schema version {header.get('schema')!r}")
        if header.get("dtype") != "f64":
            raise NativeFormatError(
                f"unsupported dtype marker {header.get('dtype')!r}")
        if header.get("byte_order") != "little":
            raise NativeFormatError(
                f"unsupported byte order {header.get('byte_order')!r}")
        shape = tuple(int(n) for n in header["shape"])
        expected = int(np.prod(shape)) * 8
        payload = fh.read(expected + 1)
        if len(payload) != expected:
            raise NativeFormatError(
                f"payload has {len(payload)} bytes, expected {expected}")
        if zlib.crc32(payload) != header["payload_crc32"]:
            raise NativeFormatError("payload checksum mismatch")
    values = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    geometry = _geometry_from_dict(header.get("geometry"))
    return LabeledArray(values, header["labels"], geometry)


# -- TIFF stacks --------------------------------------------------------------


def write_tiff_stack(a, directory, axis, prefix="slice"):
    """Write one float32 grayscale TIFF per index of the stacking axis.

    File names follow ``<prefix>_<index:04d>.tiff``.  The float64 to
    float32 conversion is the only lossy step of this export.
    """
    if a.ndim != 3:
        raise ValueError("TIFF stack export needs a 3-D array")
    ax = a.axis(axis)
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i in range(a.shape[ax]):
        frame = np.take(a.values, i, axis=ax).astype(np.float32)
        path = os.path.join(directory, f"{prefix}_{i:04d}.tiff")
        Image.fromarray(frame, mode="F").save(path)
        paths.append(path)
    return paths


_INDEX_RE = re.compile(r"(\d+)$")


def read_tiff_stack(pattern, labels):
    """Read a numerically ordered TIFF stack into a labelled array.

    ``pattern`` is a directory or a glob; ``labels`` names the stacking
    axis first, then the in-image axes.  Values are the file's float32
    samples widened to float64.
    """
    if os.path.isdir(pattern):
        files = sorted(glob.glob(os.path.join(pattern, "*.tif"))
                       + glob.glob(os.path.join(pattern, "*.tiff")))
    else:
        files = sorted(glob.glob(pattern))
    if not files:
        raise FileNotFoundError(f"no TIFF files match {pattern!r}")

    def index_of(path):
        stem = os.path.splitext(os.path.basename(path))[0]
        m = _INDEX_RE.search(stem)
        if m is None:
            raise ValueError(f"cannot order file {path!r}: no trailing "
                             "number in its name")
        return int(m.group(1))

    files.sort(key=index_of)
    frames = []
    for path in files:
        frame = np.asarray(Image.open(path), dtype=np.float64)
        if frame.ndim != 2:
            raise ValueError(f"{path!r} is not a single-channel image")
        if frames and frame.shape != frames[0].shape:
            raise ValueError(f"{path!r} has shape {frame.shape}, expected "
                             f"{frames[0].shape}")
        frames.append(frame)
    values = np.stack(frames, axis=0)
    labels = tuple(labels)
    if len(labels) != 3:
        raise ValueError("reading a stack needs exactly three labels")
    return LabeledArray(values, labels)


# -- PNG heatmaps -------------------------------------------------------------


def _lut_gray():
    ramp = np.arange(256, dtype=np.uint8)
    return np.stack([ramp, ramp, ramp], axis=1)


def _lut_hot():
    # black -> red -> yellow -> white, the classic piecewise-linear map
    t = np.arange(256) / 255.0
    r = np.clip(t / 0.4, 0.0, 1.0)
    g = np.clip((t - 0.4) / 0.4, 0.0, 1.0)
    b = np.clip((t - 0.8) / 0.2, 0.0, 1.0)
    lut = np.stack([r, g, b], axis=1)
    return np.round(lut * 255.0).astype(np.uint8)


_COLORMAPS = {"gray": _lut_gray, "hot": _lut_hot}


def export_png_heatmap(a, path, value_range, colormap="gray"):
    """8-bit PNG of a 2-D array with linear value mapping.

    Values are clamped to ``value_range`` and sent through a fixed
    256-entry lookup table, so identical inputs give identical bytes.
    """
    if a.ndim != 2:
        raise ValueError("PNG heatmap export needs a 2-D array")
    lo, hi = value_range
    if not lo < hi:
        raise ValueError("value_range must satisfy lo < hi")
    try:
        lut = _COLORMAPS[colormap]()
    except KeyError:
        raise ValueError(f"unknown colormap {colormap!r}; available: "
                         f"{sorted(_COLORMAPS)}") from None
    t = np.clip((a.values - lo) / (hi - lo), 0.0, 1.0)
    idx = np.round(t * 255.0).astype(np.uint8)
    rgb = lut[idx]
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
    return path
