"""Test phantoms, noise simulation and image-quality metrics."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .containers import LabeledArray

# Ten-ellipse head phantom, high-contrast variant:
# (half-axis a, half-axis b, centre x, centre y, rotation deg, intensity)
SHEPP_LOGAN_2D = (
    (0.6900, 0.9200, 0.00, 0.0000, 0.0, 1.00),
    (0.6624, 0.8740, 0.00, -0.0184, 0.0, -0.80),
    (0.1100, 0.3100, 0.22, 0.0000, -18.0, -0.20),
    (0.1600, 0.4100, -0.22, 0.0000, 18.0, -0.20),
    (0.2100, 0.2500, 0.00, 0.3500, 0.0, 0.10),
    (0.0460, 0.0460, 0.00, 0.1000, 0.0, 0.10),
    (0.0460, 0.0460, 0.00, -0.1000, 0.0, 0.10),
    (0.0460, 0.0230, -0.08, -0.6050, 0.0, 0.10),
    (0.0230, 0.0230, 0.00, -0.6060, 0.0, 0.10),
    (0.0230, 0.0460, 0.06, -0.6050, 0.0, 0.10),
)

# 3-D extension: (a, b, c, x, y, z, rotation about z in deg, intensity)
SHEPP_LOGAN_3D = (
    (0.6900, 0.9200, 0.810, 0.00, 0.0000, 0.000, 0.0, 1.00),
    (0.6624, 0.8740, 0.780, 0.00, -0.0184, 0.000, 0.0, -0.80),
    (0.1100, 0.3100, 0.220, 0.22, 0.0000, 0.000, -18.0, -0.20),
    (0.1600, 0.4100, 0.280, -0.22, 0.0000, 0.000, 18.0, -0.20),
    (0.2100, 0.2500, 0.410, 0.00, 0.3500, -0.150, 0.0, 0.10),
    (0.0460, 0.0460, 0.050, 0.00, 0.1000, 0.250, 0.0, 0.10),
    (0.0460, 0.0460, 0.050, 0.00, -0.1000, 0.250, 0.0, 0.10),
    (0.0460, 0.0230, 0.050, -0.08, -0.6050, 0.000, 0.0, 0.10),
    (0.0230, 0.0230, 0.020, 0.00, -0.6060, 0.000, 0.0, 0.10),
    (0.0230, 0.0460, 0.020, 0.06, -0.6050, 0.000, 0.0, 0.10),
)


def _grid_coords(ig):
    """Cell-centre coordinates relative to the grid centre, per axis."""
    coords = []
    for n, s in zip(ig.voxel_num, ig.voxel_size):
        coords.append((np.arange(n) + 0.5 - n / 2.0) * s)
    return coords  # x, y[, z]


def shepp_logan(ig):
    """Head phantom rasterised with cell-centre-in-ellipse tests.

    The canonical phantom lives on [-1, 1] per axis and is stretched to
    the grid's field of view.
    """
    coords = _grid_coords(ig)
    half = [n * s / 2.0 for n, s in zip(ig.voxel_num, ig.voxel_size)]
    if ig.dimension == 2:
        x = coords[0][None, :] / half[0]
        y = coords[1][:, None] / half[1]
        img = np.zeros(ig.shape)
        for a, b, x0, y0, phi, value in SHEPP_LOGAN_2D:
            phi_r = math.radians(phi)
            c, s = math.cos(phi_r), math.sin(phi_r)
            xr = (x - x0) * c + (y - y0) * s
            yr = -(x - x0) * s + (y - y0) * c
            img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += value
        return LabeledArray(img, ig.labels, ig)
    x = coords[0][None, None, :] / half[0]
    y = coords[1][None, :, None] / half[1]
    z = coords[2][:, None, None] / half[2]
    img = np.zeros(ig.shape)
    for a, b, c_ax, x0, y0, z0, phi, value in SHEPP_LOGAN_3D:
        phi_r = math.radians(phi)
        c, s = math.cos(phi_r), math.sin(phi_r)
        xr = (x - x0) * c + (y - y0) * s
        yr = -(x - x0) * s + (y - y0) * c
        zr = z - z0
        img[(xr / a) ** 2 + (yr / b) ** 2 + (zr / c_ax) ** 2 <= 1.0] += value
    return LabeledArray(img, ig.labels, ig)


def disk(ig, value=1.0, radius=None, center=(0.0, 0.0)):
    """Uniform disk (2-D) or cylinder (3-D), binary centre-in rasterised.

    ``radius`` defaults to 0.4 times the smaller in-plane field of view.
    """
    coords = _grid_coords(ig)
    fov = [n * s for n, s in zip(ig.voxel_num, ig.voxel_size)]
    if radius is None:
        radius = 0.4 * min(fov[0], fov[1])
    x = coords[0] - center[0]
    y = coords[1] - center[1]
    if ig.dimension == 2:
        r2 = x[None, :] ** 2 + y[:, None] ** 2
        img = np.where(r2 <= radius ** 2, float(value), 0.0)
    else:
        r2 = x[None, None, :] ** 2 + y[None, :, None] ** 2
        img = np.where(np.broadcast_to(r2, ig.shape) <= radius ** 2,
                       float(value), 0.0)
    return LabeledArray(img, ig.labels, ig)


def wire_in_cylinder(ig, cylinder_value=0.01, wire_value=0.09,
                     cylinder_radius=None, wire_radius=None,
                     wire_center=None):
    """Low-attenuation cylinder containing a small high-attenuation wire,
    mimicking a metal wire embedded in a light support."""
    fov = min(ig.voxel_num[0] * ig.voxel_size[0],
              ig.voxel_num[1] * ig.voxel_size[1])
    if cylinder_radius is None:
        cylinder_radius = 0.40 * fov
    if wire_radius is None:
        wire_radius = 0.05 * fov
    if wire_center is None:
        wire_center = (0.15 * fov, 0.1 * fov)
    body = disk(ig, cylinder_value, cylinder_radius)
    wire = disk(ig, 1.0, wire_radius, center=wire_center)
    body.values[wire.values > 0] = wire_value
    return body


_PHANTOM_BUILDERS = {
    "shepp_logan": shepp_logan,
    "shepp_logan_2d": shepp_logan,
    "shepp_logan_3d": shepp_logan,
    "disk": disk,
    "wire_in_cylinder": wire_in_cylinder,
}


def make_phantom(kind, ig, **params):
    """Deterministic phantom of the given kind on an image geometry."""
    try:
        builder = _PHANTOM_BUILDERS[kind]
    except KeyError:
        raise ValueError(f"unknown phantom kind {kind!r}; available: "
                         f"{sorted(set(_PHANTOM_BUILDERS))}") from None
    return builder(ig, **params)


def add_noise(data, model, seed=None, sigma=None, incident=None):
    """Noisy copy of the data; deterministic for a given seed.

    gaussian: adds N(0, sigma^2).  poisson: treats the data as attenuation
    line integrals, draws counts from Poisson(incident * exp(-data)) and
    returns the negative log ratio; zero counts are clipped to one (a
    warning reports how many).
    """
    rng = np.random.default_rng(seed)
    if model == "gaussian":
        if sigma is None or sigma < 0:
            raise ValueError("gaussian noise needs sigma >= 0")
        if sigma == 0:
            return data.clone()
        values = data.values + sigma * rng.standard_normal(data.shape)
    elif model == "poisson":
        if incident is None or incident <= 0:
            raise ValueError("poisson noise needs incident > 0")
        counts = rng.poisson(incident * np.exp(-data.values)).astype(
            np.float64)
        clipped = int(np.sum(counts == 0))
        if clipped:
            warnings.warn(f"{clipped} zero-count pixels clipped to 1 before "
                          "the log", RuntimeWarning)
            counts = np.maximum(counts, 1.0)
        values = -np.log(counts / incident)
    else:
        raise ValueError(f"unknown noise model {model!r}")
    return LabeledArray(values, data.labels, data.geometry)


def mse(x, ref):
    if x.shape != ref.shape:
        raise ValueError("shapes differ")
    d = x.values - ref.values
    return float(np.mean(d * d))


def psnr(x, ref, peak=None):
    """Peak signal-to-noise ratio in dB; +inf when the inputs agree."""
    err = mse(x, ref)
    if peak is None:
        peak = float(np.max(ref.values))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)
