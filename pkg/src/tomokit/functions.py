"""Convex function calculus.

Each function exposes whichever of {value, gradient, prox, conjugate
prox, conjugate value} it supports, plus a Lipschitz constant of the
gradient when smooth.  Functions combine through scaling, addition,
translation, composition with a linear operator and separable block
sums.

Indicator-type functions signal points outside their domain with the
:data:`INFEASIBLE` sentinel instead of a floating-point infinity, so
objective logs stay finite-valued and comparable.
"""

from __future__ import annotations

import numbers

import numpy as np

from .containers import BlockContainer, LabeledArray
from .operators import GradientOperator


class _Infeasible:
    """Singleton marker for indicator values outside their domain."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFEASIBLE"

    def __add__(self, other):
        return self

    __radd__ = __add__
    __sub__ = __add__
    __rsub__ = __add__

    def __mul__(self, other):
        return self

    __rmul__ = __mul__


INFEASIBLE = _Infeasible()


def is_infeasible(value):
    return value is INFEASIBLE


def combine(*values):
    """Sum of objective values, propagating INFEASIBLE."""
    if any(v is INFEASIBLE for v in values):
        return INFEASIBLE
    return sum(values)


class Function:
    """Base convex function; subclasses override what they support."""

    lipschitz = None

    def value(self, x):
        raise NotImplementedError(f"{type(self).__name__} has no value")

    def __call__(self, x):
        return self.value(x)

    def gradient(self, x, out=None):
        raise NotImplementedError(f"{type(self).__name__} has no gradient")

    def prox(self, x, tau, out=None):
        raise NotImplementedError(f"{type(self).__name__} has no proximal "
                                  "map")

    def conjugate_value(self, y):
        raise NotImplementedError(f"{type(self).__name__} has no conjugate "
                                  "value")

    def conjugate_prox(self, y, tau, out=None):
        # Moreau decomposition: prox of tau*f^* from the prox of f
        scaled = y * (1.0 / tau)
        p = self.prox(scaled, 1.0 / tau)
        p *= -tau
        p += y
        if out is None:
            return p
        out.fill(p)
        return out

    # -- algebra ---------------------------------------------------------------

    def __mul__(self, scalar):
        if isinstance(scalar, numbers.Number):
            return ScaledFunction(self, scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, Function):
            return SumFunction(self, other)
        if isinstance(other, numbers.Number):
            return SumFunction(self, ConstantFunction(other))
        return NotImplemented

    __radd__ = __add__


def has_gradient(f):
    flag = getattr(f, "_has_gradient", None)
    if flag is not None:
        return flag
    return type(f).gradient is not Function.gradient


def has_prox(f):
    flag = getattr(f, "_has_prox", None)
    if flag is not None:
        return flag
    return type(f).prox is not Function.prox


def has_conjugate_prox(f):
    flag = getattr(f, "_has_conjugate_prox", None)
    if flag is not None:
        return flag
    return has_prox(f) or \
        type(f).conjugate_prox is not Function.conjugate_prox


class ConstantFunction(Function):
    """f(x) = c.  The prox is the identity.

    The conjugate value is reported as -c everywhere (its value at zero);
    this loose convention keeps primal-dual gap logs finite and vanishing
    at the saddle point, where the optimality condition forces the dual
    argument to zero.
    """

    lipschitz = 0.0

    def __init__(self, constant=0.0):
        self.constant = float(constant)

    def value(self, x):
        return self.constant

    def gradient(self, x, out=None):
        if out is None:
            return x * 0.0
        out.fill(0.0)
        return out

    def prox(self, x, tau, out=None):
        if out is None:
            return x.clone()
        out.fill(x)
        return out

    def conjugate_value(self, y):
        return -self.constant

    def conjugate_prox(self, y, tau, out=None):
        if out is None:
            return y * 0.0
        out.fill(0.0)
        return out


class ZeroFunction(ConstantFunction):
    def __init__(self):
        super().__init__(0.0)


class L2NormSquared(Function):
    """f(x) = sum_i w_i (x_i - b_i)^2, weights defaulting to one.

    Works on plain arrays and on block containers; the weighted variant
    is restricted to plain arrays.
    """

    def __init__(self, b=None, weights=None):
        self.b = b
        if weights is not None:
            w = weights.values if isinstance(weights, LabeledArray) \
                else np.asarray(weights, dtype=np.float64)
            if np.any(w < 0):
                raise ValueError("weights must be non-negative")
            self.weights = w
            self.lipschitz = 2.0 * float(np.max(w))
        else:
            self.weights = None
            self.lipschitz = 2.0

    def _shifted(self, x):
        return x if self.b is None else x - self.b

    def value(self, x):
        d = self._shifted(x)
        if self.weights is None:
            return d.squared_norm()
        return float(np.sum(self.weights * d.values ** 2))

    def gradient(self, x, out=None):
        d = self._shifted(x) * 2.0
        if self.weights is not None:
            d.values *= self.weights
        if out is None:
            return d
        out.fill(d)
        return out

    def prox(self, x, tau, out=None):
        if self.weights is None:
            num = x if self.b is None else x + (2.0 * tau) * self.b
            result = num * (1.0 / (1.0 + 2.0 * tau))
            if out is None:
                return result
            out.fill(result)
            return out
        w = self.weights
        num = x.values.copy()
        if self.b is not None:
            num += 2.0 * tau * w * self.b.values
        num /= (1.0 + 2.0 * tau * w)
        if out is None:
            return LabeledArray(num, x.labels, x.geometry, copy=False)
        out.values[...] = num
        return out

    def conjugate_value(self, y):
        if self.weights is None:
            val = y.squared_norm() / 4.0
            if self.b is not None:
                val += y.dot(self.b)
            return val
        v = y.values
        w = self.weights
        if np.any((w == 0) & (v != 0)):
            return INFEASIBLE
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(w > 0, v * v / np.maximum(4.0 * w, 1e-300), 0.0)
        val = float(np.sum(q))
        if self.b is not None:
            val += float(np.sum(v * self.b.values))
        return val


class WeightedL2NormSquared(L2NormSquared):
    def __init__(self, weights, b=None):
        super().__init__(b=b, weights=weights)


class LeastSquares(Function):
    """f(u) = c * ||A u - b||_2^2, optionally weighted by w >= 0."""

    def __init__(self, operator, b, c=1.0, weights=None):
        self.operator = operator
        self.b = b
        self.c = float(c)
        if weights is not None and np.any(weights.values < 0):
            raise ValueError("weights must be non-negative")
        self.weights = weights
        self._lipschitz = None

    @property
    def lipschitz(self):
        if self._lipschitz is None:
            n = self.operator.norm()
            scale = 1.0 if self.weights is None else \
                float(np.max(self.weights.values))
            self._lipschitz = 2.0 * self.c * scale * n * n
        return self._lipschitz

    def _residual(self, u):
        r = self.operator.direct(u)
        r -= self.b
        return r

    def value(self, u):
        r = self._residual(u)
        if self.weights is None:
            return self.c * r.squared_norm()
        return self.c * float(np.sum(self.weights.values * r.values ** 2))

    def gradient(self, u, out=None):
        r = self._residual(u)
        if self.weights is not None:
            r *= self.weights
        g = self.operator.adjoint(r)
        g *= 2.0 * self.c
        if out is None:
            return g
        out.fill(g)
        return out


class L1Norm(Function):
    """f(x) = sum_i |x_i - b_i| with soft-thresholding prox."""

    def __init__(self, b=None):
        self.b = b

    def value(self, x):
        d = x.values if self.b is None else x.values - self.b.values
        return float(np.sum(np.abs(d)))

    def prox(self, x, tau, out=None):
        d = x.values if self.b is None else x.values - self.b.values
        r = np.sign(d) * np.maximum(np.abs(d) - tau, 0.0)
        if self.b is not None:
            r += self.b.values
        if out is None:
            return LabeledArray(r, x.labels, x.geometry, copy=False)
        out.values[...] = r
        return out

    def conjugate_value(self, y):
        if float(np.max(np.abs(y.values))) > 1.0 + 1e-12:
            return INFEASIBLE
        if self.b is None:
            return 0.0
        return float(np.sum(y.values * self.b.values))


def _voxel_norms(block):
    acc = None
    for e in block:
        sq = e.values ** 2
        acc = sq if acc is None else acc + sq
    return np.sqrt(acc)


class MixedL21Norm(Function):
    """Sum over voxels of the Euclidean norm across block entries."""

    def value(self, x):
        if not isinstance(x, BlockContainer):
            raise TypeError("mixed L21 norm acts on block containers")
        return float(np.sum(_voxel_norms(x)))

    def prox(self, x, tau, out=None):
        r = _voxel_norms(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(r > 0.0, np.maximum(1.0 - tau / np.maximum(r, 1e-300), 0.0), 0.0)
        parts = [LabeledArray(e.values * factor, e.labels, e.geometry,
                              copy=False) for e in x]
        result = BlockContainer(parts)
        if out is None:
            return result
        out.fill(result)
        return out

    def conjugate_value(self, y):
        if float(np.max(_voxel_norms(y))) > 1.0 + 1e-12:
            return INFEASIBLE
        return 0.0

    def conjugate_prox(self, y, tau, out=None):
        # projection onto the per-voxel unit ball; independent of tau
        r = _voxel_norms(y)
        factor = 1.0 / np.maximum(r, 1.0)
        parts = [LabeledArray(e.values * factor, e.labels, e.geometry,
                              copy=False) for e in y]
        result = BlockContainer(parts)
        if out is None:
            return result
        out.fill(result)
        return out


class SmoothMixedL21Norm(Function):
    """Smoothed L21 norm: sum over voxels of sqrt(sum_k U_k^2 + beta^2)."""

    def __init__(self, beta):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.beta = float(beta)
        self.lipschitz = 1.0 / self.beta

    def _root(self, x):
        acc = self.beta ** 2
        for e in x:
            acc = acc + e.values ** 2
        return np.sqrt(acc)

    def value(self, x):
        return float(np.sum(self._root(x)))

    def gradient(self, x, out=None):
        root = self._root(x)
        parts = [LabeledArray(e.values / root, e.labels, e.geometry,
                              copy=False) for e in x]
        result = BlockContainer(parts)
        if out is None:
            return result
        out.fill(result)
        return out


class KullbackLeibler(Function):
    """Poisson data divergence with background: f(v) = sum (v + eta) - b
    + b log(b / (v + eta)), using the 0 log 0 = 0 convention.

    The conjugate prox is evaluated in closed form (positive root of the
    per-voxel quadratic), as needed by primal-dual solvers.
    """

    def __init__(self, b, eta=None):
        if np.any(b.values < 0):
            raise ValueError("data must be non-negative")
        self.b = b
        if eta is None:
            eta = b * 0.0
        if np.any(eta.values < 0):
            raise ValueError("background must be non-negative")
        self.eta = eta

    def _total(self, v):
        return v.values + self.eta.values

    def value(self, v):
        t = self._total(v)
        b = self.b.values
        pos = b > 0
        if np.any(t[pos] <= 0) or np.any(t < 0):
            return INFEASIBLE
        val = float(np.sum(t - b))
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(pos, b * np.log(np.where(pos, b, 1.0)
                                            / np.where(t > 0, t, 1.0)), 0.0)
        return val + float(np.sum(logs))

    def gradient(self, v, out=None):
        t = self._total(v)
        if np.any(t[self.b.values > 0] <= 0):
            raise ValueError("gradient undefined: v + eta <= 0 where b > 0")
        g = 1.0 - self.b.values / np.where(t != 0, t, 1e-300)
        if out is None:
            return LabeledArray(g, v.labels, v.geometry, copy=False)
        out.values[...] = g
        return out

    def conjugate_value(self, z):
        zv = z.values
        b = self.b.values
        if np.any(zv[b > 0] >= 1.0) or np.any(zv > 1.0 + 1e-12):
            return INFEASIBLE
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(b > 0, b * np.log(np.maximum(1.0 - zv, 1e-300)),
                            0.0)
        return float(np.sum(-self.eta.values * zv - logs))

    def conjugate_prox(self, z, tau, out=None):
        q = z.values - 1.0 + tau * self.eta.values
        w = 0.5 * (-q + np.sqrt(q * q + 4.0 * tau * self.b.values))
        r = 1.0 - w
        if out is None:
            return LabeledArray(r, z.labels, z.geometry, copy=False)
        out.values[...] = r
        return out


class IndicatorBox(Function):
    """Indicator of lower/upper bound constraints; prox is the clamp."""

    def __init__(self, lower=None, upper=None):
        self.lower = None if lower is None else float(lower)
        self.upper = None if upper is None else float(upper)
        if self.lower is not None and self.upper is not None \
                and self.lower > self.upper:
            raise ValueError("lower bound exceeds upper bound")

    def value(self, x):
        v = x.values
        if self.lower is not None and np.any(v < self.lower):
            return INFEASIBLE
        if self.upper is not None and np.any(v > self.upper):
            return INFEASIBLE
        return 0.0

    def prox(self, x, tau, out=None):
        r = np.clip(x.values, self.lower, self.upper)
        if out is None:
            return LabeledArray(r, x.labels, x.geometry, copy=False)
        out.values[...] = r
        return out

    def conjugate_value(self, y):
        v = y.values
        total = 0.0
        pos = v > 0
        neg = v < 0
        if np.any(pos):
            if self.upper is None:
                return INFEASIBLE
            total += self.upper * float(np.sum(v[pos]))
        if np.any(neg):
            if self.lower is None:
                return INFEASIBLE
            total += self.lower * float(np.sum(v[neg]))
        return total


class TotalVariation(Function):
    """Isotropic total variation with a fast-gradient-projection prox.

    The value is the mixed L21 norm of the image gradient.  The prox runs
    a fixed number of inner iterations of accelerated projected ascent on
    the dual problem, optionally combined with a box constraint on the
    result.  Deterministic for a given iteration count.
    """

    def __init__(self, inner_iterations=100, lower=None, upper=None,
                 tol=None, boundary="neumann"):
        self.inner_iterations = int(inner_iterations)
        self.lower = lower
        self.upper = upper
        self.tol = tol
        self.boundary = boundary
        self._grad_cache = {}
        self._l21 = MixedL21Norm()

    def _gradient_op(self, x):
        if x.geometry is None:
            raise ValueError("total variation needs image input with "
                             "geometry")
        key = (x.geometry.voxel_num, x.geometry.voxel_size)
        if key not in self._grad_cache:
            self._grad_cache[key] = GradientOperator(x.geometry,
                                                     self.boundary)
        return self._grad_cache[key]

    def _project_box(self, values):
        if self.lower is None and self.upper is None:
            return values
        return np.clip(values, self.lower, self.upper)

    def value(self, x):
        grad = self._gradient_op(x)
        return self._l21.value(grad.direct(x))

    def prox(self, x, tau, out=None):
        grad = self._gradient_op(x)
        step = 1.0 / (tau * grad.norm_bound())
        p = grad.range.allocate(0.0)
        q = grad.range.allocate(0.0)
        p_prev = grad.range.allocate(0.0)
        t = 1.0
        for _ in range(self.inner_iterations):
            w = x - tau * grad.adjoint(q)
            w.values[...] = self._project_box(w.values)
            g = grad.direct(w)
            g *= step
            g += q
            r = _voxel_norms(g)
            factor = 1.0 / np.maximum(r, 1.0)
            for e in g:
                e.values *= factor
            p_new = g
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            q = p_new + ((t - 1.0) / t_new) * (p_new - p_prev)
            if self.tol is not None:
                delta = (p_new - p_prev).norm()
                scale = max(p_new.norm(), 1.0)
                if delta <= self.tol * scale:
                    p_prev = p_new
                    break
            p_prev = p_new
            t = t_new
        result = x - tau * grad.adjoint(p_prev)
        result.values[...] = self._project_box(result.values)
        if out is None:
            return result
        out.fill(result)
        return out


class ScaledFunction(Function):
    """alpha * f for alpha > 0."""

    def __init__(self, function, scalar):
        scalar = float(scalar)
        if scalar <= 0:
            raise ValueError("function scaling requires a positive scalar")
        self.function = function
        self.scalar = scalar
        self._has_gradient = has_gradient(function)
        self._has_prox = has_prox(function)
        self._has_conjugate_prox = has_conjugate_prox(function)

    def gradient(self, x, out=None):
        if not self._has_gradient:
            raise NotImplementedError("scaled function has no gradient")
        g = self.function.gradient(x, out=out)
        g *= self.scalar
        return g

    @property
    def lipschitz(self):
        base = self.function.lipschitz
        return None if base is None else self.scalar * base

    def value(self, x):
        v = self.function.value(x)
        return v if v is INFEASIBLE else self.scalar * v

    def prox(self, x, tau, out=None):
        if not self._has_prox:
            raise NotImplementedError("scaled function has no proximal map")
        return self.function.prox(x, tau * self.scalar, out=out)

    def conjugate_value(self, y):
        v = self.function.conjugate_value(y * (1.0 / self.scalar))
        return v if v is INFEASIBLE else self.scalar * v

    def conjugate_prox(self, y, tau, out=None):
        r = self.function.conjugate_prox(y * (1.0 / self.scalar),
                                         tau / self.scalar)
        r *= self.scalar
        if out is None:
            return r
        out.fill(r)
        return out


class SumFunction(Function):
    """f + g: values and gradients add; no prox (by design)."""

    def __init__(self, *functions):
        if len(functions) < 2:
            raise ValueError("need at least two functions")
        self.functions = functions
        self._has_gradient = all(has_gradient(f) for f in functions)
        self._has_prox = False

    @property
    def lipschitz(self):
        total = 0.0
        for f in self.functions:
            if f.lipschitz is None:
                return None
            total += f.lipschitz
        return total

    def value(self, x):
        return combine(*[f.value(x) for f in self.functions])

    def gradient(self, x, out=None):
        g = self.functions[0].gradient(x)
        for f in self.functions[1:]:
            g += f.gradient(x)
        if out is None:
            return g
        out.fill(g)
        return out

    def prox(self, x, tau, out=None):
        raise NotImplementedError("the prox of a sum of functions is not "
                                  "available; restructure the objective")


class TranslatedFunction(Function):
    """f(x - shift)."""

    def __init__(self, function, shift):
        self.function = function
        self.shift = shift
        self._has_gradient = has_gradient(function)
        self._has_prox = has_prox(function)

    @property
    def lipschitz(self):
        return self.function.lipschitz

    def value(self, x):
        return self.function.value(x - self.shift)

    def gradient(self, x, out=None):
        return self.function.gradient(x - self.shift, out=out)

    def prox(self, x, tau, out=None):
        r = self.function.prox(x - self.shift, tau)
        r += self.shift
        if out is None:
            return r
        out.fill(r)
        return out

    def conjugate_value(self, y):
        v = self.function.conjugate_value(y)
        if v is INFEASIBLE:
            return v
        return v + y.dot(self.shift)


class OperatorCompositionFunction(Function):
    """f(A x) for a smooth f and linear A."""

    def __init__(self, function, operator):
        self.function = function
        self.operator = operator
        self._lipschitz = None
        self._has_gradient = has_gradient(function)
        self._has_prox = False

    @property
    def lipschitz(self):
        if self._lipschitz is None:
            base = self.function.lipschitz
            if base is None:
                return None
            n = self.operator.norm()
            self._lipschitz = base * n * n
        return self._lipschitz

    def value(self, x):
        return self.function.value(self.operator.direct(x))

    def gradient(self, x, out=None):
        inner = self.function.gradient(self.operator.direct(x))
        g = self.operator.adjoint(inner)
        if out is None:
            return g
        out.fill(g)
        return out


class BlockFunction(Function):
    """Separable sum over the entries of a block container."""

    def __init__(self, *functions):
        if not functions:
            raise ValueError("need at least one function")
        self.functions = functions
        self._has_gradient = all(has_gradient(f) for f in functions)
        self._has_prox = all(has_prox(f) for f in functions)
        self._has_conjugate_prox = all(has_conjugate_prox(f)
                                       for f in functions)

    @property
    def lipschitz(self):
        worst = 0.0
        for f in self.functions:
            if f.lipschitz is None:
                return None
            worst = max(worst, f.lipschitz)
        return worst

    def _check(self, x):
        if not isinstance(x, BlockContainer) or len(x) != len(self.functions):
            raise ValueError(f"expected a {len(self.functions)}-entry block "
                             "container")

    def value(self, x):
        self._check(x)
        return combine(*[f.value(e) for f, e in zip(self.functions, x)])

    def gradient(self, x, out=None):
        self._check(x)
        result = BlockContainer([f.gradient(e)
                                 for f, e in zip(self.functions, x)])
        if out is None:
            return result
        out.fill(result)
        return out

    def prox(self, x, tau, out=None):
        self._check(x)
        result = BlockContainer([f.prox(e, tau)
                                 for f, e in zip(self.functions, x)])
        if out is None:
            return result
        out.fill(result)
        return out

    def conjugate_value(self, y):
        self._check(y)
        return combine(*[f.conjugate_value(e)
                         for f, e in zip(self.functions, y)])

    def conjugate_prox(self, y, tau, out=None):
        self._check(y)
        result = BlockContainer([f.conjugate_prox(e, tau)
                                 for f, e in zip(self.functions, y)])
        if out is None:
            return result
        out.fill(result)
        return out
