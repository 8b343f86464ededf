"""Labeled data arrays and block containers.

A :class:`LabeledArray` is a dense 64-bit float array whose axes carry
string labels ("angle", "vertical", ...) and, optionally, the geometry it
was measured or reconstructed on.  It supports elementwise algebra,
relational masks, exp/log/abs, reductions, slicing by label and axis
reordering.  A :class:`BlockContainer` is an ordered tree of arrays with
the same algebra applied entrywise; it is the vector type of block
operators and separable objectives.
"""

from __future__ import annotations

import numbers

import numpy as np

from .geometry import GeometryError


def _is_scalar(x):
    return isinstance(x, numbers.Number)


def _sum_dot(a, b):
    # np.sum uses deterministic pairwise summation regardless of BLAS
    # threading, which keeps results reproducible across runs.
    return float(np.sum(a * b, dtype=np.float64))


class LabeledArray:
    """n-D float64 array with ordered axis labels and optional geometry."""

    # keep numpy scalars from hijacking arithmetic (forces __rmul__ etc.)
    __array_ufunc__ = None

    def __init__(self, values, labels, geometry=None, copy=True):
        values = np.array(values, dtype=np.float64, copy=copy, order="C")
        labels = tuple(str(l) for l in np.atleast_1d(labels))
        if len(labels) != values.ndim:
            raise ValueError(f"{len(labels)} labels for a {values.ndim}-D "
                             f"array")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate axis labels in {labels}")
        self.values = values
        self.labels = labels
        self.geometry = geometry
        if geometry is not None:
            self._check_geometry()

    def _check_geometry(self):
        extents = self.geometry.label_extents()
        if set(extents) != set(self.labels):
            raise GeometryError(
                f"geometry axes {tuple(extents)} do not match array labels "
                f"{self.labels}")
        for label, n in zip(self.labels, self.values.shape):
            if extents[label] != n:
                raise GeometryError(
                    f"axis {label!r} has extent {n} but geometry declares "
                    f"{extents[label]}")

    # -- basics --------------------------------------------------------------

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def size(self):
        return self.values.size

    def as_array(self):
        return self.values

    def clone(self):
        return LabeledArray(self.values, self.labels, self.geometry)

    def fill(self, value):
        if isinstance(value, LabeledArray):
            value = value.values
        self.values[...] = value
        return self

    def axis(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"unknown axis label {label!r}; have "
                             f"{self.labels}") from None

    # -- elementwise algebra --------------------------------------------------

    def _coerce(self, other, op):
        if _is_scalar(other):
            return float(other)
        if isinstance(other, LabeledArray):
            if other.labels != self.labels or other.shape != self.shape:
                raise ValueError(
                    f"cannot {op} arrays with labels/shapes "
                    f"{self.labels}{self.shape} and "
                    f"{other.labels}{other.shape}")
            return other.values
        return NotImplemented

    def _binary(self, other, ufunc, op, out=None):
        rhs = self._coerce(other, op)
        if rhs is NotImplemented:
            return NotImplemented
        if ufunc is np.divide:
            if _is_scalar(rhs):
                if rhs == 0.0:
                    raise ZeroDivisionError("division by scalar zero")
            elif np.any(rhs == 0.0):
                raise ZeroDivisionError("division by array containing zeros")
        target = None if out is None else out.values
        values = ufunc(self.values, rhs, out=target)
        if out is None:
            return LabeledArray(values, self.labels, self.geometry, copy=False)
        return out

    def add(self, other, out=None):
        return self._binary(other, np.add, "add", out)

    def subtract(self, other, out=None):
        return self._binary(other, np.subtract, "subtract", out)

    def multiply(self, other, out=None):
        return self._binary(other, np.multiply, "multiply", out)

    def divide(self, other, out=None):
        return self._binary(other, np.divide, "divide", out)

    def __add__(self, other):
        return self._binary(other, np.add, "add")

    def __radd__(self, other):
        return self._binary(other, np.add, "add")

    def __sub__(self, other):
        return self._binary(other, np.subtract, "subtract")

    def __rsub__(self, other):
        if _is_scalar(other):
            return LabeledArray(float(other) - self.values, self.labels,
                                self.geometry, copy=False)
        return NotImplemented

    def __mul__(self, other):
        return self._binary(other, np.multiply, "multiply")

    def __rmul__(self, other):
        return self._binary(other, np.multiply, "multiply")

    def __truediv__(self, other):
        return self._binary(other, np.divide, "divide")

    def __rtruediv__(self, other):
        if _is_scalar(other):
            if np.any(self.values == 0.0):
                raise ZeroDivisionError("division by array containing zeros")
            return LabeledArray(float(other) / self.values, self.labels,
                                self.geometry, copy=False)
        return NotImplemented

    def __iadd__(self, other):
        return self._binary(other, np.add, "add", out=self)

    def __isub__(self, other):
        return self._binary(other, np.subtract, "subtract", out=self)

    def __imul__(self, other):
        return self._binary(other, np.multiply, "multiply", out=self)

    def __itruediv__(self, other):
        return self._binary(other, np.divide, "divide", out=self)

    def __neg__(self):
        return LabeledArray(-self.values, self.labels, self.geometry,
                            copy=False)

    def _relational(self, other, ufunc, op):
        rhs = self._coerce(other, op)
        if rhs is NotImplemented:
            return NotImplemented
        mask = ufunc(self.values, rhs).astype(np.float64)
        return LabeledArray(mask, self.labels, self.geometry, copy=False)

    def __gt__(self, other):
        return self._relational(other, np.greater, ">")

    def __ge__(self, other):
        return self._relational(other, np.greater_equal, ">=")

    def __lt__(self, other):
        return self._relational(other, np.less, "<")

    def __le__(self, other):
        return self._relational(other, np.less_equal, "<=")

    # -- math functions --------------------------------------------------------

    def exp(self, out=None):
        target = None if out is None else out.values
        values = np.exp(self.values, out=target)
        if out is None:
            return LabeledArray(values, self.labels, self.geometry, copy=False)
        return out

    def log(self, out=None):
        if np.any(self.values <= 0.0):
            raise ValueError("log requires strictly positive entries")
        target = None if out is None else out.values
        values = np.log(self.values, out=target)
        if out is None:
            return LabeledArray(values, self.labels, self.geometry, copy=False)
        return out

    def abs(self, out=None):
        target = None if out is None else out.values
        values = np.abs(self.values, out=target)
        if out is None:
            return LabeledArray(values, self.labels, self.geometry, copy=False)
        return out

    def power(self, exponent, out=None):
        target = None if out is None else out.values
        values = np.power(self.values, exponent, out=target)
        if out is None:
            return LabeledArray(values, self.labels, self.geometry, copy=False)
        return out

    def maximum(self, other, out=None):
        return self._binary(other, np.maximum, "maximum", out)

    def minimum(self, other, out=None):
        return self._binary(other, np.minimum, "minimum", out)

    # -- reductions -------------------------------------------------------------

    def mean(self):
        return float(np.mean(self.values))

    def sum(self):
        return float(np.sum(self.values))

    def max(self):
        return float(np.max(self.values))

    def min(self):
        return float(np.min(self.values))

    def dot(self, other):
        rhs = self._coerce(other, "dot")
        if rhs is NotImplemented:
            raise TypeError("dot requires a matching LabeledArray")
        return _sum_dot(self.values, rhs)

    def norm(self):
        return float(np.sqrt(_sum_dot(self.values, self.values)))

    def squared_norm(self):
        return _sum_dot(self.values, self.values)

    # -- structure ---------------------------------------------------------------

    def get_slice(self, **kwargs):
        """Remove one labelled axis at a fixed index: ``a.get_slice(angle=0)``.

        The geometry is carried over when a consistent lower-dimensional
        geometry exists (e.g. a vertical slice of parallel-beam data), and
        dropped otherwise.
        """
        if len(kwargs) != 1:
            raise TypeError("get_slice takes exactly one label=index pair")
        (label, index), = kwargs.items()
        ax = self.axis(label)
        index = int(index)
        n = self.shape[ax]
        if not -n <= index < n:
            raise IndexError(f"index {index} out of range for axis "
                             f"{label!r} of extent {n}")
        values = np.take(self.values, index, axis=ax)
        labels = self.labels[:ax] + self.labels[ax + 1:]
        geometry = None
        if self.geometry is not None:
            geometry = self.geometry.get_slice(label, index)
        return LabeledArray(values, labels, geometry)

    def reorder(self, order):
        """Physically transpose to a new label order."""
        order = tuple(order)
        if sorted(order) != sorted(self.labels):
            raise ValueError(f"{order} is not a permutation of {self.labels}")
        axes = tuple(self.labels.index(l) for l in order)
        values = np.ascontiguousarray(np.transpose(self.values, axes))
        return LabeledArray(values, order, self.geometry, copy=False)

    def __repr__(self):
        return (f"LabeledArray(shape={self.shape}, labels={self.labels}, "
                f"geometry={'yes' if self.geometry is not None else 'none'})")


def stack(arrays, label, position=0):
    """Stack equal-shaped arrays along a new labelled axis."""
    arrays = list(arrays)
    if not arrays:
        raise ValueError("need at least one array to stack")
    first = arrays[0]
    for a in arrays[1:]:
        if a.labels != first.labels or a.shape != first.shape:
            raise ValueError("stacked arrays must share labels and shape")
    if label in first.labels:
        raise ValueError(f"label {label!r} already present")
    values = np.stack([a.values for a in arrays], axis=position)
    labels = list(first.labels)
    labels.insert(position, label)
    return LabeledArray(values, labels)


class BlockGeometry:
    """Ordered list of geometries (possibly nested) for block data."""

    def __init__(self, entries):
        entries = list(entries)
        if not entries:
            raise ValueError("BlockGeometry must be non-empty")
        self.entries = entries

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    def allocate(self, value=0.0, seed=None):
        out = []
        for k, g in enumerate(self.entries):
            s = None if seed is None else seed + k
            out.append(g.allocate(value, seed=s))
        return BlockContainer(out)

    @property
    def shape(self):
        return tuple(g.shape for g in self.entries)

    def __eq__(self, other):
        if not isinstance(other, BlockGeometry):
            return NotImplemented
        return len(self) == len(other) and all(
            a == b for a, b in zip(self.entries, other.entries))

    def __repr__(self):
        return f"BlockGeometry({self.entries!r})"


class BlockContainer:
    """Finite ordered tree of LabeledArrays with entrywise algebra."""

    __array_ufunc__ = None

    def __init__(self, entries):
        entries = list(entries)
        if not entries:
            raise ValueError("BlockContainer must be non-empty")
        for e in entries:
            if not isinstance(e, (LabeledArray, BlockContainer)):
                raise TypeError("entries must be LabeledArray or "
                                "BlockContainer")
        self.entries = entries

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    def clone(self):
        return BlockContainer([e.clone() for e in self.entries])

    def fill(self, value):
        if isinstance(value, BlockContainer):
            self._check_tree(value, "fill")
            for e, v in zip(self.entries, value.entries):
                e.fill(v)
        else:
            for e in self.entries:
                e.fill(value)
        return self

    def _check_tree(self, other, op):
        if len(other) != len(self):
            raise ValueError(f"cannot {op} block containers with "
                             f"{len(self)} and {len(other)} entries")
        for a, b in zip(self.entries, other.entries):
            if isinstance(a, BlockContainer) != isinstance(b, BlockContainer):
                raise ValueError(f"cannot {op} block containers with "
                                 "different nesting")
            if isinstance(a, BlockContainer):
                a._check_tree(b, op)

    def _map(self, other, method, out=None):
        if isinstance(other, BlockContainer):
            self._check_tree(other, method)
            rhs = other.entries
        else:
            rhs = [other] * len(self.entries)
        targets = out.entries if out is not None else [None] * len(self)
        results = [getattr(a, method)(b, out=t)
                   for a, b, t in zip(self.entries, rhs, targets)]
        if out is None:
            return BlockContainer(results)
        return out

    def add(self, other, out=None):
        return self._map(other, "add", out)

    def subtract(self, other, out=None):
        return self._map(other, "subtract", out)

    def multiply(self, other, out=None):
        return self._map(other, "multiply", out)

    def divide(self, other, out=None):
        return self._map(other, "divide", out)

    def maximum(self, other, out=None):
        return self._map(other, "maximum", out)

    def minimum(self, other, out=None):
        return self._map(other, "minimum", out)

    def __add__(self, other):
        return self._map(other, "add")

    def __radd__(self, other):
        return self._map(other, "add")

    def __sub__(self, other):
        return self._map(other, "subtract")

    def __mul__(self, other):
        return self._map(other, "multiply")

    def __rmul__(self, other):
        return self._map(other, "multiply")

    def __truediv__(self, other):
        return self._map(other, "divide")

    def __iadd__(self, other):
        return self._map(other, "add", out=self)

    def __isub__(self, other):
        return self._map(other, "subtract", out=self)

    def __imul__(self, other):
        return self._map(other, "multiply", out=self)

    def __itruediv__(self, other):
        return self._map(other, "divide", out=self)

    def __neg__(self):
        return BlockContainer([-e for e in self.entries])

    def dot(self, other):
        if not isinstance(other, BlockContainer):
            raise TypeError("dot requires a matching BlockContainer")
        self._check_tree(other, "dot")
        return sum(a.dot(b) for a, b in zip(self.entries, other.entries))

    def norm(self):
        return float(np.sqrt(self.squared_norm()))

    def squared_norm(self):
        return sum(e.squared_norm() for e in self.entries)

    def sum(self):
        return sum(e.sum() for e in self.entries)

    @property
    def size(self):
        return sum(e.size for e in self.entries)

    @property
    def shape(self):
        return tuple(e.shape for e in self.entries)

    def __repr__(self):
        return f"BlockContainer({len(self.entries)} entries)"
