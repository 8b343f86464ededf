"""Linear operator algebra.

Every operator maps between two spaces (image, acquisition or block
geometries) through ``direct`` and ``adjoint``, where adjoint is the exact
transpose of direct's discretisation.  Operators compose through scalar
multiplication, addition, ``@`` composition and block stacking, and carry
a cached largest-singular-value estimate used for solver step sizes.
"""

from __future__ import annotations

import numbers

import numpy as np

from ..containers import BlockContainer, BlockGeometry, LabeledArray
from ..geometry import GeometryError


class ArraySpace:
    """Minimal space descriptor (shape + labels) for geometry-free data."""

    def __init__(self, shape, labels=None):
        self.shape = tuple(int(n) for n in np.atleast_1d(shape))
        if labels is None:
            labels = tuple(f"axis{i}" for i in range(len(self.shape)))
        self.labels = tuple(labels)
        if len(self.labels) != len(self.shape):
            raise ValueError("one label per axis required")

    def label_extents(self):
        return dict(zip(self.labels, self.shape))

    def allocate(self, value=0.0, seed=None):
        if value == "random":
            rng = np.random.default_rng(seed)
            values = rng.random(self.shape)
        else:
            values = np.full(self.shape, float(value))
        return LabeledArray(values, self.labels, geometry=None)

    def __eq__(self, other):
        if not isinstance(other, ArraySpace):
            return NotImplemented
        return self.shape == other.shape and self.labels == other.labels

    def __repr__(self):
        return f"ArraySpace(shape={self.shape})"


def _space_shape(space):
    return space.shape


def _check_element(x, space, what):
    if isinstance(space, BlockGeometry):
        if not isinstance(x, BlockContainer) or len(x) != len(space):
            raise GeometryError(f"{what}: expected a {len(space)}-entry "
                                "block container")
        for xi, gi in zip(x, space):
            _check_element(xi, gi, what)
        return
    if not isinstance(x, LabeledArray):
        raise GeometryError(f"{what}: expected a LabeledArray")
    if x.shape != space.shape:
        raise GeometryError(f"{what}: shape {x.shape} does not match "
                            f"{space.shape}")


class NormEstimateError(RuntimeError):
    """Power iteration failed to converge; carries the best estimate."""

    def __init__(self, best, iterations):
        super().__init__(f"operator norm estimate did not converge within "
                         f"{iterations} iterations (best estimate {best:.6g})")
        self.best_estimate = best


def estimate_norm(op, tol=1e-4, max_iter=100, seed=0):
    """Largest singular value of a linear operator by power iteration.

    Deterministic for a given seed.  Raises :class:`NormEstimateError`
    when successive estimates have not settled to relative ``tol``.
    """
    x = op.domain.allocate("random", seed=seed)
    nx = x.norm()
    if nx == 0.0:
        raise NormEstimateError(0.0, 0)
    x *= 1.0 / nx
    sigma = 0.0
    for _ in range(int(max_iter)):
        y = op.direct(x)
        z = op.adjoint(y)
        sigma_new = y.norm()
        nz = z.norm()
        if nz == 0.0:
            return 0.0
        x = z * (1.0 / nz)
        if abs(sigma_new - sigma) <= tol * max(sigma_new, 1e-300):
            return sigma_new
        sigma = sigma_new
    raise NormEstimateError(sigma, max_iter)


class Operator:
    """Linear map with ``direct`` and ``adjoint`` application."""

    linear = True

    def __init__(self, domain, range_):
        self.domain = domain
        self.range = range_
        self._norm = None

    def direct(self, x, out=None):
        raise NotImplementedError

    def adjoint(self, y, out=None):
        raise NotImplementedError

    def norm(self, tol=1e-4, max_iter=100, seed=0):
        """Cached largest-singular-value estimate."""
        if self._norm is None:
            self._norm = estimate_norm(self, tol=tol, max_iter=max_iter,
                                       seed=seed)
        return self._norm

    def __mul__(self, scalar):
        if isinstance(scalar, numbers.Number):
            return ScaledOperator(self, scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return ScaledOperator(self, -1.0)

    def __add__(self, other):
        if isinstance(other, Operator):
            return SumOperator(self, other)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            return SumOperator(self, ScaledOperator(other, -1.0))
        return NotImplemented

    def __matmul__(self, other):
        if isinstance(other, Operator):
            return CompositionOperator(self, other)
        return NotImplemented

    def _check_direct_input(self, x):
        _check_element(x, self.domain, f"{type(self).__name__}.direct")

    def _check_adjoint_input(self, y):
        _check_element(y, self.range, f"{type(self).__name__}.adjoint")


class IdentityOperator(Operator):
    def __init__(self, geometry):
        super().__init__(geometry, geometry)
        self._norm = 1.0

    def direct(self, x, out=None):
        self._check_direct_input(x)
        if out is None:
            return x.clone()
        out.fill(x)
        return out

    adjoint = direct

    def _check_adjoint_input(self, y):
        self._check_direct_input(y)


class ZeroOperator(Operator):
    def __init__(self, domain, range_=None):
        super().__init__(domain, range_ if range_ is not None else domain)
        self._norm = 0.0

    def direct(self, x, out=None):
        self._check_direct_input(x)
        if out is None:
            return self.range.allocate(0.0)
        out.fill(0.0)
        return out

    def adjoint(self, y, out=None):
        self._check_adjoint_input(y)
        if out is None:
            return self.domain.allocate(0.0)
        out.fill(0.0)
        return out


class DiagonalOperator(Operator):
    """Self-adjoint elementwise multiplication by a data array."""

    def __init__(self, diagonal, geometry=None):
        if not isinstance(diagonal, LabeledArray):
            diagonal = LabeledArray(np.asarray(diagonal, dtype=np.float64),
                                    labels=None if geometry is None
                                    else geometry.labels)
        if geometry is None:
            geometry = diagonal.geometry
        if geometry is None:
            geometry = ArraySpace(diagonal.shape, diagonal.labels)
        super().__init__(geometry, geometry)
        self.diagonal = diagonal
        self._norm = float(np.max(np.abs(diagonal.values)))

    def direct(self, x, out=None):
        self._check_direct_input(x)
        target = None if out is None else out.values
        values = np.multiply(x.values, self.diagonal.values, out=target)
        if out is None:
            return LabeledArray(values, x.labels, x.geometry, copy=False)
        return out

    adjoint = direct

    def _check_adjoint_input(self, y):
        self._check_direct_input(y)


class MaskOperator(DiagonalOperator):
    """Keep entries where the binary mask is one, zero the rest."""

    def __init__(self, mask, geometry=None):
        values = mask.values if isinstance(mask, LabeledArray) else \
            np.asarray(mask, dtype=np.float64)
        if not np.all((values == 0.0) | (values == 1.0)):
            raise ValueError("mask entries must be exactly 0 or 1")
        super().__init__(mask, geometry)


class MatrixOperator(Operator):
    """Dense matrix acting between flat vector spaces.

    Mostly useful for small test problems and oracle comparisons.
    """

    def __init__(self, matrix, domain=None, range_=None):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        m, n = matrix.shape
        if domain is None:
            domain = ArraySpace((n,))
        if range_ is None:
            range_ = ArraySpace((m,))
        if domain.shape != (n,) or range_.shape != (m,):
            raise GeometryError("domain/range sizes do not match the matrix")
        super().__init__(domain, range_)
        self.matrix = matrix

    def direct(self, x, out=None):
        self._check_direct_input(x)
        values = self.matrix @ x.values
        if out is None:
            return LabeledArray(values, self.range.labels, copy=False)
        out.values[...] = values
        return out

    def adjoint(self, y, out=None):
        self._check_adjoint_input(y)
        values = self.matrix.T @ y.values
        if out is None:
            return LabeledArray(values, self.domain.labels, copy=False)
        out.values[...] = values
        return out


class ScaledOperator(Operator):
    def __init__(self, operator, scalar):
        super().__init__(operator.domain, operator.range)
        self.operator = operator
        self.scalar = float(scalar)
        if operator._norm is not None:
            self._norm = abs(self.scalar) * operator._norm

    def norm(self, **kwargs):
        if self._norm is None:
            self._norm = abs(self.scalar) * self.operator.norm(**kwargs)
        return self._norm

    def direct(self, x, out=None):
        result = self.operator.direct(x, out=out)
        result *= self.scalar
        return result

    def adjoint(self, y, out=None):
        result = self.operator.adjoint(y, out=out)
        result *= self.scalar
        return result


class SumOperator(Operator):
    def __init__(self, a, b):
        if not (_same_space(a.domain, b.domain)
                and _same_space(a.range, b.range)):
            raise GeometryError("operator sum requires equal domains and "
                                "ranges")
        super().__init__(a.domain, a.range)
        self.a = a
        self.b = b

    def direct(self, x, out=None):
        result = self.a.direct(x)
        result += self.b.direct(x)
        if out is None:
            return result
        out.fill(result)
        return out

    def adjoint(self, y, out=None):
        result = self.a.adjoint(y)
        result += self.b.adjoint(y)
        if out is None:
            return result
        out.fill(result)
        return out


class CompositionOperator(Operator):
    """(A o B): apply B first, then A."""

    def __init__(self, a, b):
        if not _same_space(a.domain, b.range):
            raise GeometryError("composition requires the inner geometries "
                                "to agree")
        super().__init__(b.domain, a.range)
        self.a = a
        self.b = b

    def direct(self, x, out=None):
        result = self.a.direct(self.b.direct(x))
        if out is None:
            return result
        out.fill(result)
        return out

    def adjoint(self, y, out=None):
        result = self.b.adjoint(self.a.adjoint(y))
        if out is None:
            return result
        out.fill(result)
        return out


def _same_space(a, b):
    if isinstance(a, BlockGeometry) or isinstance(b, BlockGeometry):
        if not (isinstance(a, BlockGeometry) and isinstance(b, BlockGeometry)):
            return False
        return len(a) == len(b) and all(
            _same_space(x, y) for x, y in zip(a, b))
    eq = (a == b)
    if eq is NotImplemented or eq is False:
        # fall back to structural comparison so e.g. an ArraySpace matches
        # nothing but another equal ArraySpace, while differently-typed
        # geometries with the same extents stay distinct
        return a.shape == b.shape and type(a) is type(b)
    return True


class BlockOperator(Operator):
    """Rectangular grid of operators applied blockwise.

    ``BlockOperator(A, B)`` stacks operators in a column (the Tikhonov
    layout); pass ``shape=(rows, cols)`` for general grids.  Within each
    column all domains must agree, within each row all ranges must agree.
    """

    def __init__(self, *operators, shape=None):
        if len(operators) == 1 and isinstance(operators[0], (list, tuple)):
            operators = tuple(operators[0])
        if not operators:
            raise ValueError("BlockOperator needs at least one operator")
        if shape is None:
            shape = (len(operators), 1)
        rows, cols = shape
        if rows * cols != len(operators):
            raise ValueError(f"shape {shape} does not fit "
                             f"{len(operators)} operators")
        self.grid = [[operators[i * cols + j] for j in range(cols)]
                     for i in range(rows)]
        self.rows = rows
        self.cols = cols

        domains = []
        for j in range(cols):
            dom = self.grid[0][j].domain
            for i in range(1, rows):
                if not _same_space(self.grid[i][j].domain, dom):
                    raise GeometryError(f"column {j}: domains differ")
            domains.append(dom)
        ranges = []
        for i in range(rows):
            ran = self.grid[i][0].range
            for j in range(1, cols):
                if not _same_space(self.grid[i][j].range, ran):
                    raise GeometryError(f"row {i}: ranges differ")
            ranges.append(ran)

        domain = domains[0] if cols == 1 else BlockGeometry(domains)
        range_ = ranges[0] if rows == 1 else BlockGeometry(ranges)
        super().__init__(domain, range_)

    def __getitem__(self, ij):
        i, j = ij
        return self.grid[i][j]

    def _columns(self, x):
        if self.cols == 1:
            return [x]
        return list(x)

    def direct(self, x, out=None):
        self._check_direct_input(x)
        xs = self._columns(x)
        results = []
        for i in range(self.rows):
            acc = self.grid[i][0].direct(xs[0])
            for j in range(1, self.cols):
                acc += self.grid[i][j].direct(xs[j])
            results.append(acc)
        result = results[0] if self.rows == 1 else BlockContainer(results)
        if out is None:
            return result
        out.fill(result)
        return out

    def adjoint(self, y, out=None):
        self._check_adjoint_input(y)
        ys = [y] if self.rows == 1 else list(y)
        results = []
        for j in range(self.cols):
            acc = self.grid[0][j].adjoint(ys[0])
            for i in range(1, self.rows):
                acc += self.grid[i][j].adjoint(ys[i])
            results.append(acc)
        result = results[0] if self.cols == 1 else BlockContainer(results)
        if out is None:
            return result
        out.fill(result)
        return out


from .differential import (FiniteDifferenceOperator, GradientOperator,  # noqa: E402
                           SymmetrisedGradientOperator)
from .blur import BlurringOperator  # noqa: E402
from .projector import ProjectionOperator  # noqa: E402

__all__ = [
    "ArraySpace", "Operator", "IdentityOperator", "ZeroOperator",
    "DiagonalOperator", "MaskOperator", "MatrixOperator", "ScaledOperator",
    "SumOperator", "CompositionOperator", "BlockOperator",
    "FiniteDifferenceOperator", "GradientOperator",
    "SymmetrisedGradientOperator", "BlurringOperator", "ProjectionOperator",
    "estimate_norm", "NormEstimateError",
]
