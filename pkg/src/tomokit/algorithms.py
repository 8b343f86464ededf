"""Resumable first-order solvers.

All solvers share one run loop: ``run(n)`` advances the iterate by at
most ``n`` updates (never past ``max_iteration``), logging the objective
on a fixed cadence tied to the absolute iteration number, so splitting a
run into pieces reproduces the single-run history and iterate bitwise.
"""

from __future__ import annotations

import csv
import warnings

import numpy as np

from .functions import (INFEASIBLE, ZeroFunction, combine, has_gradient,
                        has_conjugate_prox, has_prox)


class Algorithm:
    """Iterative solver with objective logging and resumable state."""

    history_columns = ("objective",)

    def __init__(self, max_iteration=1000, log_interval=None):
        self.max_iteration = int(max_iteration)
        if log_interval is None:
            log_interval = 1 if self.max_iteration <= 100 else 10
        self.log_interval = int(log_interval)
        self.iteration = 0
        self.history = []
        self.converged = False

    def update(self):
        raise NotImplementedError

    def update_objective(self):
        raise NotImplementedError

    @property
    def solution(self):
        return self.x

    def _log(self, verbose=0):
        values = self.update_objective()
        if not isinstance(values, tuple):
            values = (values,)
        self.history.append((self.iteration,) + values)
        if verbose:
            parts = [f"{self.iteration:>8d}"]
            for v in values:
                parts.append("infeasible" if v is INFEASIBLE
                             else f"{v:15.6e}")
            print("  ".join(parts))

    def _finalize_setup(self):
        # record the objective of the initial iterate
        self._log()

    def run(self, iterations=None, verbose=0, callback=None):
        """Advance by ``iterations`` updates (bounded by the remaining
        budget), logging every ``log_interval`` iterations."""
        remaining = self.max_iteration - self.iteration
        if iterations is None:
            iterations = remaining
        iterations = int(iterations)
        if iterations < 0:
            raise ValueError("iterations must be non-negative")
        if iterations > remaining:
            warnings.warn(
                f"requested {iterations} iterations but only {remaining} "
                f"remain before max_iteration={self.max_iteration}; "
                "truncating", RuntimeWarning)
            iterations = remaining
        if verbose and iterations > 0:
            header = ["    iter"] + [f"{c:>15s}" for c in
                                     self.history_columns]
            print("  ".join(header))
        for _ in range(iterations):
            if self.converged:
                break
            self.update()
            self.iteration += 1
            if self.iteration % self.log_interval == 0 \
                    or self.iteration == self.max_iteration:
                self._log(verbose)
            if callback is not None:
                callback(self)
        return self


def write_history_csv(algorithm, path):
    """Objective history as CSV: iteration, objective[, dual, gap]."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("iteration",) + tuple(algorithm.history_columns))
        for row in algorithm.history:
            writer.writerow(["infeasible" if v is INFEASIBLE else
                             repr(v) if isinstance(v, float) else v
                             for v in row])


class GD(Algorithm):
    """Gradient descent with a constant step or Armijo backtracking.

    ``step`` may be a positive number, ``'backtracking'`` or None (use
    1/L from the objective's Lipschitz constant).  Backtracking shrinks
    by 0.5 until the Armijo condition with c=1e-4 holds and regrows the
    accepted step by 1.1 at the next iteration.
    """

    def __init__(self, initial, objective, step=None, max_iteration=1000,
                 log_interval=None, armijo_c=1e-4, shrink=0.5, grow=1.1):
        super().__init__(max_iteration, log_interval)
        if not has_gradient(objective):
            raise ValueError("GD needs a gradient-capable objective")
        self.objective = objective
        self.x = initial.clone()
        self.backtracking = (step == "backtracking")
        if self.backtracking:
            L = objective.lipschitz
            self.step_size = 1.0 / L if L else 1.0
        else:
            if step is None:
                L = objective.lipschitz
                if not L:
                    raise ValueError("objective has no Lipschitz constant; "
                                     "pass an explicit step")
                step = 1.0 / L
            if step <= 0:
                raise ValueError("step must be positive")
            self.step_size = float(step)
        self.armijo_c = armijo_c
        self.shrink = shrink
        self.grow = grow
        self._finalize_setup()

    def update(self):
        g = self.objective.gradient(self.x)
        if not self.backtracking:
            g *= self.step_size
            self.x -= g
            return
        f0 = self.objective.value(self.x)
        gnorm2 = g.dot(g)
        step = self.step_size * self.grow
        candidate = self.x
        for _ in range(60):
            candidate = self.x - step * g
            f1 = self.objective.value(candidate)
            if f1 is not INFEASIBLE and \
                    f1 <= f0 - self.armijo_c * step * gnorm2:
                break
            step *= self.shrink
        self.step_size = step
        self.x = candidate

    def update_objective(self):
        return self.objective.value(self.x)


class CGLS(Algorithm):
    """Conjugate gradient on the normal equations of min ||Au - b||^2.

    Logs the residual norm squared.  A vanishing direction norm flags
    convergence instead of erroring; an optional ``tolerance`` stops when
    ||A^T r|| falls below tolerance times its initial value.
    """

    def __init__(self, initial, operator, data, tolerance=None,
                 max_iteration=1000, log_interval=None):
        super().__init__(max_iteration, log_interval)
        self.operator = operator
        self.x = initial.clone()
        self.r = data - operator.direct(self.x)
        self.s = operator.adjoint(self.r)
        self.p = self.s.clone()
        self.gamma = self.s.squared_norm()
        self.tolerance = tolerance
        self._s0 = np.sqrt(self.gamma)
        self._finalize_setup()

    def update(self):
        q = self.operator.direct(self.p)
        delta = q.squared_norm()
        if delta == 0.0 or self.gamma == 0.0:
            self.converged = True
            return
        alpha = self.gamma / delta
        self.x += alpha * self.p
        self.r -= alpha * q
        self.s = self.operator.adjoint(self.r)
        gamma_new = self.s.squared_norm()
        if self.tolerance is not None and \
                np.sqrt(gamma_new) <= self.tolerance * self._s0:
            self.converged = True
        beta = gamma_new / self.gamma
        self.p = self.s + beta * self.p
        self.gamma = gamma_new

    def update_objective(self):
        return self.r.squared_norm()


class SIRT(Algorithm):
    """Simultaneous iterative reconstruction with optional box bounds.

    u <- clamp(u + omega * C A^T R (b - A u)) with R and C the inverse
    row/column sums of the (non-negative) system matrix, evaluated
    matrix-free as A(1) and A^T(1).  Zero sums give zero weights, so
    empty rays and unseen voxels are skipped rather than erroring.
    """

    def __init__(self, initial, operator, data, lower=None, upper=None,
                 relaxation=1.0, max_iteration=1000, log_interval=None):
        super().__init__(max_iteration, log_interval)
        self.operator = operator
        self.data = data
        self.x = initial.clone()
        self.lower = lower
        self.upper = upper
        self.relaxation = float(relaxation)

        ones = initial.clone()
        ones.fill(1.0)
        row = operator.direct(ones)
        with np.errstate(divide="ignore"):
            row.values[...] = np.where(row.values != 0.0,
                                       1.0 / row.values, 0.0)
        self.R = row
        ones_range = row.clone()
        ones_range.fill(1.0)
        col = operator.adjoint(ones_range)
        with np.errstate(divide="ignore"):
            col.values[...] = np.where(col.values != 0.0,
                                       1.0 / col.values, 0.0)
        self.C = col
        self._clamp()
        self._finalize_setup()

    def _clamp(self):
        if self.lower is not None or self.upper is not None:
            np.clip(self.x.values, self.lower, self.upper,
                    out=self.x.values)

    def update(self):
        res = self.data - self.operator.direct(self.x)
        res *= self.R
        upd = self.operator.adjoint(res)
        upd *= self.C
        if self.relaxation != 1.0:
            upd *= self.relaxation
        self.x += upd
        self._clamp()

    def update_objective(self):
        res = self.data - self.operator.direct(self.x)
        return res.squared_norm()


class FISTA(Algorithm):
    """Accelerated proximal gradient for min f(u) + g(u).

    f must be gradient-capable with a finite Lipschitz constant (or an
    explicit ``step`` given); g must be prox-capable.  Uses the plain
    momentum sequence t1=1, t_{k+1} = (1 + sqrt(1 + 4 t_k^2))/2 with no
    restarts.
    """

    def __init__(self, initial, f, g=None, step=None, max_iteration=1000,
                 log_interval=None):
        super().__init__(max_iteration, log_interval)
        if not has_gradient(f):
            raise ValueError("FISTA needs a gradient-capable f")
        self.f = f
        self.g = g if g is not None else ZeroFunction()
        if not has_prox(self.g):
            raise ValueError("FISTA needs a prox-capable g")
        if step is None:
            L = f.lipschitz
            if not L:
                raise ValueError("f has no Lipschitz constant; pass an "
                                 "explicit step")
            step = 1.0 / L
        self.step = float(step)
        self.x = initial.clone()
        self.y = initial.clone()
        self.t = 1.0
        self._finalize_setup()

    def update(self):
        grad = self.f.gradient(self.y)
        grad *= self.step
        candidate = self.y - grad
        x_new = self.g.prox(candidate, self.step)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * self.t * self.t))
        self.y = x_new + ((self.t - 1.0) / t_new) * (x_new - self.x)
        self.x = x_new
        self.t = t_new

    def update_objective(self):
        return combine(self.f.value(self.x), self.g.value(self.x))


class PDHG(Algorithm):
    """Primal-dual hybrid gradient for min_u f(K u) + g(u).

    f needs a conjugate prox (blockwise for block operators), g a prox.
    Default steps sigma = tau = 0.99/||K||; the condition
    sigma * tau * ||K||^2 <= 1 is enforced at construction.  Logs the
    primal objective, the dual objective and the primal-dual gap.
    """

    history_columns = ("objective", "dual_objective", "gap")

    def __init__(self, f, operator, g, sigma=None, tau=None, initial=None,
                 initial_dual=None, theta=1.0, max_iteration=1000,
                 log_interval=None):
        super().__init__(max_iteration, log_interval)
        if not has_conjugate_prox(f):
            raise ValueError("PDHG needs a conjugate-prox-capable f")
        if not has_prox(g):
            raise ValueError("PDHG needs a prox-capable g")
        self.f = f
        self.g = g
        self.operator = operator
        norm_k = operator.norm()
        if sigma is None and tau is None:
            sigma = tau = 0.99 / norm_k
        elif sigma is None:
            sigma = 1.0 / (tau * norm_k * norm_k)
        elif tau is None:
            tau = 1.0 / (sigma * norm_k * norm_k)
        if sigma <= 0 or tau <= 0:
            raise ValueError("step sizes must be positive")
        if sigma * tau * norm_k * norm_k > 1.0 + 1e-9:
            raise ValueError(
                f"sigma*tau*||K||^2 = {sigma * tau * norm_k ** 2:.6f} "
                "exceeds 1; reduce the step sizes")
        self.sigma = float(sigma)
        self.tau = float(tau)
        self.theta = float(theta)
        self.x = initial.clone() if initial is not None \
            else operator.domain.allocate(0.0)
        self.y = initial_dual.clone() if initial_dual is not None \
            else operator.range.allocate(0.0)
        self.x_bar = self.x.clone()
        self._finalize_setup()

    def update(self):
        arg = self.operator.direct(self.x_bar)
        arg *= self.sigma
        arg += self.y
        self.y = self.f.conjugate_prox(arg, self.sigma)
        step = self.operator.adjoint(self.y)
        step *= self.tau
        x_new = self.g.prox(self.x - step, self.tau)
        self.x_bar = x_new + self.theta * (x_new - self.x)
        self.x = x_new

    def update_objective(self):
        primal = combine(self.f.value(self.operator.direct(self.x)),
                         self.g.value(self.x))
        ky = self.operator.adjoint(self.y)
        dual_parts = combine(self.f.conjugate_value(self.y),
                             self.g.conjugate_value(-ky))
        dual = INFEASIBLE if dual_parts is INFEASIBLE else -dual_parts
        if primal is INFEASIBLE or dual is INFEASIBLE:
            gap = INFEASIBLE
        else:
            gap = primal - dual
        return (primal, dual, gap)


class LADMM(Algorithm):
    """Linearised ADMM for min_u f(K u) + g(u) with proximable f and g.

    Steps sigma (splitting variable) and tau (primal) must satisfy
    tau <= sigma/||K||^2; defaults are sigma = 1, tau = 0.99 sigma/||K||^2.
    """

    def __init__(self, f, operator, g, sigma=None, tau=None, initial=None,
                 max_iteration=1000, log_interval=None):
        super().__init__(max_iteration, log_interval)
        if not has_prox(f):
            raise ValueError("LADMM needs a prox-capable f")
        if not has_prox(g):
            raise ValueError("LADMM needs a prox-capable g")
        self.f = f
        self.g = g
        self.operator = operator
        norm_k = operator.norm()
        if sigma is None:
            sigma = 1.0
        if tau is None:
            tau = 0.99 * sigma / (norm_k * norm_k)
        if sigma <= 0 or tau <= 0:
            raise ValueError("step sizes must be positive")
        if tau > sigma / (norm_k * norm_k) * (1.0 + 1e-9):
            raise ValueError(
                f"tau = {tau:.6g} exceeds sigma/||K||^2 = "
                f"{sigma / norm_k ** 2:.6g}")
        self.sigma = float(sigma)
        self.tau = float(tau)
        self.x = initial.clone() if initial is not None \
            else operator.domain.allocate(0.0)
        self.z = operator.range.allocate(0.0)
        self.w = operator.range.allocate(0.0)
        self._finalize_setup()

    def update(self):
        ku = self.operator.direct(self.x)
        ku -= self.z
        ku += self.w
        step = self.operator.adjoint(ku)
        step *= self.tau / self.sigma
        self.x = self.g.prox(self.x - step, self.tau)
        ku = self.operator.direct(self.x)
        self.z = self.f.prox(ku + self.w, self.sigma)
        self.w += ku - self.z

    def update_objective(self):
        return combine(self.f.value(self.operator.direct(self.x)),
                       self.g.value(self.x))
