"""Finite-difference, gradient and symmetrised-gradient operators."""

from __future__ import annotations

import numpy as np

from ..containers import BlockContainer, BlockGeometry, LabeledArray
from . import Operator


def _axis_spacing(geometry, label):
    spacing = getattr(geometry, "spacing_by_label", None)
    if spacing is None:
        return 1.0
    return spacing()[label]


class FiniteDifferenceOperator(Operator):
    """Forward difference along one labelled axis, scaled by 1/spacing.

    Neumann boundary sets the last difference to zero; periodic wraps
    around.  The adjoint is the exact transpose (a negative divergence).
    """

    def __init__(self, geometry, axis, boundary="neumann"):
        if axis not in geometry.labels:
            raise ValueError(f"axis {axis!r} not in {geometry.labels}")
        if boundary not in ("neumann", "periodic"):
            raise ValueError("boundary must be 'neumann' or 'periodic'")
        super().__init__(geometry, geometry)
        self.axis_label = axis
        self.axis = geometry.labels.index(axis)
        self.boundary = boundary
        self.spacing = _axis_spacing(geometry, axis)

    def _sl(self, s):
        full = [slice(None)] * len(self.domain.shape)
        full[self.axis] = s
        return tuple(full)

    def direct(self, x, out=None):
        self._check_direct_input(x)
        v = x.values
        result = np.zeros_like(v)
        n = v.shape[self.axis]
        if self.boundary == "periodic":
            result[...] = np.roll(v, -1, axis=self.axis) - v
        elif n > 1:
            result[self._sl(slice(0, n - 1))] = (
                v[self._sl(slice(1, n))] - v[self._sl(slice(0, n - 1))])
        result /= self.spacing
        if out is None:
            return LabeledArray(result, x.labels, x.geometry, copy=False)
        out.values[...] = result
        return out

    def adjoint(self, y, out=None):
        self._check_adjoint_input(y)
        v = y.values
        result = np.zeros_like(v)
        n = v.shape[self.axis]
        if self.boundary == "periodic":
            result[...] = np.roll(v, 1, axis=self.axis) - v
        elif n > 1:
            result[self._sl(0)] = -v[self._sl(0)]
            if n > 2:
                result[self._sl(slice(1, n - 1))] = (
                    v[self._sl(slice(0, n - 2))]
                    - v[self._sl(slice(1, n - 1))])
            result[self._sl(n - 1)] = v[self._sl(n - 2)]
        result /= self.spacing
        if out is None:
            return LabeledArray(result, y.labels, y.geometry, copy=False)
        out.values[...] = result
        return out


class GradientOperator(Operator):
    """Stack of forward differences, one per axis of the image.

    The range is a block with one entry per axis in label order.  A
    one-axis image degenerates to a single finite difference.
    """

    def __init__(self, geometry, boundary="neumann"):
        self.diffs = [FiniteDifferenceOperator(geometry, label, boundary)
                      for label in geometry.labels]
        if len(self.diffs) == 1:
            range_ = geometry
        else:
            range_ = BlockGeometry([geometry] * len(self.diffs))
        super().__init__(geometry, range_)
        self.boundary = boundary

    def direct(self, x, out=None):
        if len(self.diffs) == 1:
            return self.diffs[0].direct(x, out=out)
        parts = [d.direct(x) for d in self.diffs]
        if out is None:
            return BlockContainer(parts)
        out.fill(BlockContainer(parts))
        return out

    def adjoint(self, y, out=None):
        if len(self.diffs) == 1:
            return self.diffs[0].adjoint(y, out=out)
        acc = self.diffs[0].adjoint(y[0])
        for d, yi in zip(self.diffs[1:], list(y)[1:]):
            acc += d.adjoint(yi)
        if out is None:
            return acc
        out.fill(acc)
        return out

    def norm_bound(self):
        """Analytic upper bound on ||D||^2: sum of 4/h^2 over axes."""
        return sum(4.0 / d.spacing ** 2 for d in self.diffs)


class SymmetrisedGradientOperator(Operator):
    """Symmetrised Jacobian of a vector field, E(w) = (J + J^T)/2.

    Maps a d-entry block (one component per axis) to a block holding the
    d diagonal entries followed by the d(d-1)/2 off-diagonal entries, the
    latter stored once with weight sqrt(2) so the block norm equals the
    tensor Frobenius norm.
    """

    def __init__(self, geometry, boundary="neumann"):
        d = len(geometry.labels)
        if d not in (2, 3):
            raise ValueError("symmetrised gradient needs a 2-D or 3-D image")
        self.base = geometry
        self.ndim = d
        self.diffs = [FiniteDifferenceOperator(geometry, label, boundary)
                      for label in geometry.labels]
        self.pairs = [(k, l) for k in range(d) for l in range(k + 1, d)]
        super().__init__(BlockGeometry([geometry] * d),
                         BlockGeometry([geometry] * (d + len(self.pairs))))

    def direct(self, w, out=None):
        if not isinstance(w, BlockContainer) or len(w) != self.ndim:
            raise ValueError(f"expected a {self.ndim}-entry block vector "
                             "field")
        parts = [self.diffs[k].direct(w[k]) for k in range(self.ndim)]
        inv_sqrt2 = 1.0 / np.sqrt(2.0)
        for k, l in self.pairs:
            mixed = self.diffs[l].direct(w[k])
            mixed += self.diffs[k].direct(w[l])
            mixed *= inv_sqrt2
            parts.append(mixed)
        result = BlockContainer(parts)
        if out is None:
            return result
        out.fill(result)
        return out

    def adjoint(self, t, out=None):
        inv_sqrt2 = 1.0 / np.sqrt(2.0)
        comps = []
        for k in range(self.ndim):
            acc = self.diffs[k].adjoint(t[k])
            for idx, (a, b) in enumerate(self.pairs):
                other = b if a == k else (a if b == k else None)
                if other is not None:
                    part = self.diffs[other].adjoint(t[self.ndim + idx])
                    part *= inv_sqrt2
                    acc += part
            comps.append(acc)
        result = BlockContainer(comps)
        if out is None:
            return result
        out.fill(result)
        return out
