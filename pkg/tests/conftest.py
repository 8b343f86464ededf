"""Shared test helpers: dense-matrix oracles and adjoint dot tests."""

import numpy as np
import pytest

from tomokit.containers import BlockContainer, BlockGeometry


def flatten(x):
    """Concatenate a LabeledArray or (nested) BlockContainer to a vector."""
    if isinstance(x, BlockContainer):
        return np.concatenate([flatten(e) for e in x])
    return x.values.ravel()


def unflatten_like(vec, template):
    """Inverse of flatten for a template element."""
    if isinstance(template, BlockContainer):
        parts = []
        offset = 0
        for e in template:
            n = int(np.sum([p.size for p in [e]])) if not \
                isinstance(e, BlockContainer) else flatten(e).size
            parts.append(unflatten_like(vec[offset:offset + n], e))
            offset += n
        return BlockContainer(parts)
    out = template.clone()
    out.values[...] = vec.reshape(template.shape)
    return out


def space_size(space):
    if isinstance(space, BlockGeometry):
        return sum(space_size(g) for g in space)
    return int(np.prod(space.shape))


def basis_elements(space):
    """Yield unit basis elements of a (block) geometry."""
    n = space_size(space)
    for k in range(n):
        e = space.allocate(0.0)
        _set_flat(e, k, 1.0)
        yield e


def _set_flat(x, index, value):
    if isinstance(x, BlockContainer):
        for e in x:
            n = flatten(e).size
            if index < n:
                _set_flat(e, index, value)
                return
            index -= n
        raise IndexError(index)
    else:
        x.values.ravel()[index] = value


def dense_matrix(op):
    """Assemble the operator's matrix by applying direct to basis vectors."""
    cols = []
    for e in basis_elements(op.domain):
        cols.append(flatten(op.direct(e)))
    return np.stack(cols, axis=1)


def random_element(space, seed):
    """Sign-balanced random element of a (block) geometry."""
    x = space.allocate("random", seed=seed)
    if isinstance(x, BlockContainer):
        x -= 0.5
    else:
        x -= 0.5
    return x


def dot_test(op, seeds=range(20), tol=1e-10):
    """Adjoint consistency: |<Ax,y> - <x,A*y>| against the spec bound."""
    worst = 0.0
    for seed in seeds:
        x = random_element(op.domain, seed)
        y = random_element(op.range, seed + 10_000)
        ax = op.direct(x)
        aty = op.adjoint(y)
        lhs = float(np.dot(flatten(ax), flatten(y)))
        rhs = float(np.dot(flatten(x), flatten(aty)))
        scale = (np.linalg.norm(flatten(ax)) * np.linalg.norm(flatten(y))
                 + np.linalg.norm(flatten(x))
                 * np.linalg.norm(flatten(aty)))
        if scale == 0.0:
            continue
        rel = abs(lhs - rhs) / scale
        worst = max(worst, rel)
        assert rel <= tol, f"dot test failed at seed {seed}: {rel:.3e}"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(0)
