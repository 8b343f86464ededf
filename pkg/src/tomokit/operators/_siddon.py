"""Exact-intersection-length ray traversal kernels.

Serial numba kernels tracing rays through a regular grid.  Forward and
adjoint kernels share the identical traversal code and weights, so the
adjoint is the exact transpose of the forward discretisation and results
do not depend on any threading configuration.
"""

import numpy as np
from numba import njit

_BIG = 1e300
_EPS = 1e-12


@njit(cache=True)
def forward_2d(img, x0, y0, sx, sy, nx, ny, ox, oy, dx, dy, out):
    for r in range(ox.shape[0]):
        out[r] = 0.0
        px = ox[r]
        py = oy[r]
        vx = dx[r]
        vy = dy[r]
        x1 = x0 + nx * sx
        y1 = y0 + ny * sy
        tmin = -_BIG
        tmax = _BIG
        if abs(vx) > _EPS:
            ta = (x0 - px) / vx
            tb = (x1 - px) / vx
            if ta > tb:
                ta, tb = tb, ta
            if ta > tmin:
                tmin = ta
            if tb < tmax:
                tmax = tb
        elif px <= x0 or px >= x1:
            continue
        if abs(vy) > _EPS:
            ta = (y0 - py) / vy
            tb = (y1 - py) / vy
            if ta > tb:
                ta, tb = tb, ta
            if ta > tmin:
                tmin = ta
            if tb < tmax:
                tmax = tb
        elif py <= y0 or py >= y1:
            continue
        if tmin >= tmax:
            continue
        ex = px + tmin * vx
        ey = py + tmin * vy
        ix = int(np.floor((ex - x0) / sx))
        iy = int(np.floor((ey - y0) / sy))
        if ix < 0:
            ix = 0
        elif ix > nx - 1:
            ix = nx - 1
        if iy < 0:
            iy = 0
        elif iy > ny - 1:
            iy = ny - 1
        if vx > _EPS:
            stepx = 1
            tx = (x0 + (ix + 1) * sx - px) / vx
            dtx = sx / vx
        elif vx < -_EPS:
            stepx = -1
            tx = (x0 + ix * sx - px) / vx
            dtx = -sx / vx
        else:
            stepx = 0
            tx = _BIG
            dtx = _BIG
        if vy > _EPS:
            stepy = 1
            ty = (y0 + (iy + 1) * sy - py) / vy
            dty = sy / vy
        elif vy < -_EPS:
            stepy = -1
            ty = (y0 + iy * sy - py) / vy
            dty = -sy / vy
        else:
            stepy = 0
            ty = _BIG
            dty = _BIG
        t = tmin
        acc = 0.0
        guard = nx + ny + 4
        while guard > 0:
            guard -= 1
            if tx <= ty:
                tn = tx if tx < tmax else tmax
                seg = tn - t
                if seg > 0.0:
                    acc += img[iy, ix] * seg
                t = tn
                if tx >= tmax:
                    break
                ix += stepx
                if ix < 0 or ix >= nx:
                    break
                tx += dtx
            else:
                tn = ty if ty < tmax else tmax
                seg = tn - t
                if seg > 0.0:
                    acc += img[iy, ix] * seg
                t = tn
                if ty >= tmax:
                    break
                iy += stepy
                if iy < 0 or iy >= ny:
                    break
                ty += dty
        out[r] = acc


@njit(cache=True)
def adjoint_2d(img, x0, y0, sx, sy, nx, ny, ox, oy, dx, dy, sino):
    for r in range(ox.shape[0]):
        val = sino[r]
        if val == 0.0:
            continue
        px = ox[r]
        py = oy[r]
        vx = dx[r]
        vy = dy[r]
        x1 = x0 + nx * sx
        y1 = y0 + ny * sy
        tmin = -_BIG
        tmax = _BIG
        if abs(vx) > _EPS:
            ta = (x0 - px) / vx
            tb = (x1 - px) / vx
            if ta > tb:
                ta, tb = tb, ta
            if ta > tmin:
                tmin = ta
            if tb < tmax:
                tmax = tb
        elif px <= x0 or px >= x1:
            continue
        if abs(vy) > _EPS:
            ta = (y0 - py) / vy
            tb = (y1 - py) / vy
            if ta > tb:
                ta, tb = tb, ta
            if ta > tmin:
                tmin = ta
            if tb < tmax:
                tmax = tb
        elif py <= y0 or py >= y1:
            continue
        if tmin >= tmax:
            continue
        ex = px + tmin * vx
        ey = py + tmin * vy
        ix = int(np.floor((ex - x0) / sx))
        iy = int(np.floor((ey - y0) / sy))
        if ix < 0:
            ix = 0
        elif ix > nx - 1:
            ix = nx - 1
        if iy < 0:
            iy = 0
        elif iy > ny - 1:
            iy = ny - 1
        if vx > _EPS:
            stepx = 1
            tx = (x0 + (ix + 1) * sx - px) / vx
            dtx = sx / vx
        elif vx < -_EPS:
            stepx = -1
            tx = (x0 + ix * sx - px) / vx
            dtx = -sx / vx
        else:
            stepx = 0
            tx = _BIG
            dtx = _BIG
        if vy > _EPS:
            stepy = 1
            ty = (y0 + (iy + 1) * sy - py) / vy
            dty = sy / vy
        elif vy < -_EPS:
            stepy = -1
            ty = (y0 + iy * sy - py) / vy
            dty = -sy / vy
        else:
            stepy = 0
            ty = _BIG
            dty = _BIG
        t = tmin
        guard = nx + ny + 4
        while guard > 0:
            guard -= 1
            if tx <= ty:
                tn = tx if tx < tmax else tmax
                seg = tn - t
                if seg > 0.0:
                    img[iy, ix] += val * seg
                t = tn
                if tx >= tmax:
                    break
                ix += stepx
                if ix < 0 or ix >= nx:
                    break
                tx += dtx
            else:
                tn = ty if ty < tmax else tmax
                seg = tn - t
                if seg > 0.0:
                    img[iy, ix] += val * seg
                t = tn
                if ty >= tmax:
                    break
                iy += stepy
                if iy < 0 or iy >= ny:
                    break
                ty += dty


@njit(cache=True)
def forward_3d(img, x0, y0, z0, sx, sy, sz, nx, ny, nz,
               ox, oy, oz, dx, dy, dz, out):
    for r in range(ox.shape[0]):
        out[r] = 0.0
        px = ox[r]
        py = oy[r]
        pz = oz[r]
        vx = dx[r]
        vy = dy[r]
        vz = dz[r]
        x1 = x0 + nx * sx
        y1 = y0 + ny * sy
        z1 = z0 + nz * sz
        tmin = -_BIG
        tmax = _BIG
        if abs(vx) > _EPS:
            ta = (x0 - px) / vx
            tb = (x1 - px) / vx
            if ta > tb:
                ta, tb = tb, ta
            if ta > tmin:
                tmin = ta
            if tb < tmax:
                tmax = tb
        elif px <= x0 or px >= x1:
            continue
        if abs(vy) > _EPS:
            ta = (y0 - py) / vy
            tb = (y1 - py) / vy
            if ta > tb:
                ta, tb = tb, ta
            if ta > tmin:
                tmin = ta
            if tb < tmax:
                tmax = tb
        elif py <= y0 or py >= y1:
            continue
        if abs(vz) > _EPS:
            ta = (z0 - pz) / vz
            tb = (z1 - pz) / vz
            if ta > tb:
                ta, tb = tb, ta
            if ta > tmin:
                tmin = ta
            if tb < tmax:
                tmax = tb
        elif pz <= z0 or pz >= z1:
            continue
        if tmin >= tmax:
            continue
        ex = px + tmin * vx
        ey = py + tmin * vy
        ez = pz + tmin * vz
        ix = int(np.floor((ex - x0) / sx))
        iy = int(np.floor((ey - y0) / sy))
        iz = int(np.floor((ez - z0) / sz))
        if ix < 0:
            ix = 0
        elif ix > nx - 1:
            ix = nx - 1
        if iy < 0:
            iy = 0
        elif iy > ny - 1:
            iy = ny - 1
        if iz < 0:
            iz = 0
        elif iz > nz - 1:
            iz = nz - 1
        if vx > _EPS:
            stepx = 1
            tx = (x0 + (ix + 1) * sx - px) / vx
            dtx = sx / vx
        elif vx < -_EPS:
            stepx = -1
            tx = (x0 + ix * sx - px) / vx
            dtx = -sx / vx
        else:
            stepx = 0
            tx = _BIG
            dtx = _BIG
        if vy > _EPS:
            stepy = 1
            ty = (y0 + (iy + 1) * sy - py) / vy
            dty = sy / vy
        elif vy < -_EPS:
            stepy = -1
            ty = (y0 + iy * sy - py) / vy
            dty = -sy / vy
        else:
            stepy = 0
            ty = _BIG
            dty = _BIG
        if vz > _EPS:
            stepz = 1
            tz = (z0 + (iz + 1) * sz - pz) / vz
            dtz = sz / vz
        elif vz < -_EPS:
            stepz = -1
            tz = (z0 + iz * sz - pz) / vz
            dtz = -sz / vz
        else:
            stepz = 0
            tz = _BIG
            dtz = _BIG
        t = tmin
        acc = 0.0
        guard = nx + ny + nz + 6
        while guard > 0:
            guard -= 1
            if tx <= ty and tx <= tz:
                tn = tx if tx < tmax else tmax
                seg = tn - t
                if seg > 0.0:
                    acc += img[iz, iy, ix] * seg
                t = tn
                if tx >= tmax:
                    break
                ix += stepx
                if ix < 0 or ix >= nx:
                    break
                tx += dtx
            elif ty <= tz:
                tn = ty if ty < tmax else tmax
                seg = tn - t
                if seg > 0.0:
                    acc += img[iz, iy, ix] * seg
                t = tn
                if ty >= tmax:
                    break
                iy += stepy
                if iy < 0 or iy >= ny:
                    break
                ty += dty
            else:
                tn = tz if tz < tmax else tmax
                seg = tn - t
                if seg > 0.0:
                    acc += img[iz, iy, ix] * seg
                t = tn
                if tz >= tmax:
                    break
                iz += stepz
                if iz < 0 or iz >= nz:
                    break
                tz += dtz
        out[r] = acc


@njit(cache=True)
def adjoint_3d(img, x0, y0, z0, sx, sy, sz, nx, ny, nz,
               ox, oy, oz, dx, dy, dz, sino):
    for r in range(ox.shape[0]):
        val = sino[r]
        if val == 0.0:
            continue
        px = ox[r]
        py = oy[r]
        pz = oz[r]
        vx = dx[r]
        vy = dy[r]
        vz = dz[r]
        x1 = x0 + nx * sx
        y1 = y0 + ny * sy
        z1 = z0 + nz * sz
        tmin = -_BIG
        tmax = _BIG
        if abs(vx) > _EPS:
            ta = (x0 - px) / vx
            tb = (x1 - px) / vx
            if ta > tb:
                ta, tb = tb, ta
            if ta > tmin:
                tmin = ta
            if tb < tmax:
                tmax = tb
        elif px <= x0 or px >= x1:
            continue
        if abs(vy) > _EPS:
            ta = (y0 - py) / vy
            tb = (y1 - py) / vy
            if ta > tb:
                ta, tb = tb, ta
            if ta > tmin:
                tmin = ta
            if tb < tmax:
                tmax = tb
        elif py <= y0 or py >= y1:
            continue
        if abs(vz) > _EPS:
            ta = (z0 - pz) / vz
            tb = (z1 - pz) / vz
            if ta > tb:
                ta, tb = tb, ta
            if ta > tmin:
                tmin = ta
            if tb < tmax:
                tmax = tb
        elif pz <= z0 or pz >= z1:
            continue
        if tmin >= tmax:
            continue
        ex = px + tmin * vx
        ey = py + tmin * vy
        ez = pz + tmin * vz
        ix = int(np.floor((ex - x0) / sx))
        iy = int(np.floor((ey - y0) / sy))
        iz = int(np.floor((ez - z0) / sz))
        if ix < 0:
            ix = 0
        elif ix > nx - 1:
            ix = nx - 1
        if iy < 0:
            iy = 0
        elif iy > ny - 1:
            iy = ny - 1
        if iz < 0:
            iz = 0
        elif iz > nz - 1:
            iz = nz - 1
        if vx > _EPS:
            stepx = 1
            tx = (x0 + (ix + 1) * sx - px) / vx
            dtx = sx / vx
        elif vx < -_EPS:
            stepx = -1
            tx = (x0 + ix * sx - px) / vx
            dtx = -sx / vx
        else:
            stepx = 0
            tx = _BIG
            dtx = _BIG
        if vy > _EPS:
            stepy = 1
            ty = (y0 + (iy + 1) * sy - py) / vy
            dty = sy / vy
        elif vy < -_EPS:
            stepy = -1
            ty = (y0 + iy * sy - py) / vy
            dty = -sy / vy
        else:
            stepy = 0
            ty = _BIG
            dty = _BIG
        if vz > _EPS:
            stepz = 1
            tz = (z0 + (iz + 1) * sz - pz) / vz
            dtz = sz / vz
        elif vz < -_EPS:
            stepz = -1
            tz = (z0 + iz * sz - pz) / vz
            dtz = -sz / vz
        else:
            stepz = 0
            tz = _BIG
            dtz = _BIG
        t = tmin
        guard = nx + ny + nz + 6
        while guard > 0:
            guard -= 1
            if tx <= ty and tx <= tz:
                tn = tx if tx < tmax else tmax
                seg = tn - t
                if seg > 0.0:
                    img[iz, iy, ix] += val * seg
                t = tn
                if tx >= tmax:
                    break
                ix += stepx
                if ix < 0 or ix >= nx:
                    break
                tx += dtx
            elif ty <= tz:
                tn = ty if ty < tmax else tmax
                seg = tn - t
                if seg > 0.0:
                    img[iz, iy, ix] += val * seg
                t = tn
                if ty >= tmax:
                    break
                iy += stepy
                if iy < 0 or iy >= ny:
                    break
                ty += dty
            else:
                tn = tz if tz < tmax else tmax
                seg = tn - t
                if seg > 0.0:
                    img[iz, iy, ix] += val * seg
                t = tn
                if tz >= tmax:
                    break
                iz += stepz
                if iz < 0 or iz >= nz:
                    break
                tz += dtz
