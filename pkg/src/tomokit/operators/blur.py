"""Point-spread-function blurring operator."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..containers import LabeledArray
from . import Operator


class BlurringOperator(Operator):
    """Correlation with a small kernel under zero padding.

    The adjoint is convolution with the same kernel (equivalently,
    correlation with the flipped kernel), which is the exact transpose of
    the zero-padded discretisation.
    """

    def __init__(self, geometry, kernel):
        kernel = np.asarray(kernel, dtype=np.float64)
        if kernel.ndim != len(geometry.shape):
            raise ValueError(f"kernel must be {len(geometry.shape)}-D")
        if any(k % 2 == 0 for k in kernel.shape):
            raise ValueError("kernel dimensions must be odd")
        if any(k > n for k, n in zip(kernel.shape, geometry.shape)):
            raise ValueError("kernel larger than the image")
        super().__init__(geometry, geometry)
        self.kernel = kernel

    def direct(self, x, out=None):
        self._check_direct_input(x)
        values = ndimage.correlate(x.values, self.kernel, mode="constant",
                                   cval=0.0)
        if out is None:
            return LabeledArray(values, x.labels, x.geometry, copy=False)
        out.values[...] = values
        return out

    def adjoint(self, y, out=None):
        self._check_adjoint_input(y)
        values = ndimage.convolve(y.values, self.kernel, mode="constant",
                                  cval=0.0)
        if out is None:
            return LabeledArray(values, y.labels, y.geometry, copy=False)
        out.values[...] = values
        return out
