import itertools

import numpy as np
import pytest

from segrecg.tensor_core import CPDModel


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def naive_entry(model: CPDModel, index):
    """Plain loop over terms and modes."""
    total = 0.0
    for j in range(model.rank):
        term = model.weights[j]
        for k, i in enumerate(index):
            term *= model.factors[k][i, j]
        total += term
    return total


def naive_dense(model: CPDModel):
    out = np.zeros(model.shape)
    for index in itertools.product(*(range(n) for n in model.shape)):
        out[index] = naive_entry(model, index)
    return out


def naive_contraction(dense, factors, mode):
    """Mode contraction of a dense tensor by explicit loops over every entry."""
    r = factors[0].shape[1]
    out = np.zeros((dense.shape[mode], r))
    for index in itertools.product(*(range(n) for n in dense.shape)):
        for j in range(r):
            w = dense[index]
            for k, i in enumerate(index):
                if k != mode:
                    w *= factors[k][i, j]
            out[index[mode], j] += w
    return out


def rk4_geodesic(lam, xs, dlam, dxs, t_end=1.0, h=1e-4):
    """Integrate the geodesic equations of the induced metric.

    lam'' = lam sum |x_i'|^2,  x_i'' = -2 (lam'/lam) x_i' - |x_i'|^2 x_i.
    Arrays carry a leading batch axis.
    """
    def accel(l, x, dl, dx):
        speed2 = sum((d * d).sum(axis=-1) for d in dx)
        ddl = l * speed2
        ddx = [-2 * (dl / l)[:, None] * d - (d * d).sum(axis=-1, keepdims=True) * xi
               for xi, d in zip(x, dx)]
        return ddl, ddx

    def field(state):
        l, x, dl, dx = state
        ddl, ddx = accel(l, x, dl, dx)
        return dl, dx, ddl, ddx

    def axpy(state, k, c):
        return (state[0] + c * k[0], [a + c * b for a, b in zip(state[1], k[1])],
                state[2] + c * k[2], [a + c * b for a, b in zip(state[3], k[3])])

    state = (np.array(lam, float), [np.array(x, float) for x in xs],
             np.array(dlam, float), [np.array(d, float) for d in dxs])
    n = int(round(t_end / h))
    for _ in range(n):
        k1 = field(state)
        k2 = field(axpy(state, k1, h / 2))
        k3 = field(axpy(state, k2, h / 2))
        k4 = field(axpy(state, k3, h))
        state = (
            state[0] + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            [s + h / 6 * (a + 2 * b + 2 * c + d)
             for s, a, b, c, d in zip(state[1], k1[1], k2[1], k3[1], k4[1])],
            state[2] + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
            [s + h / 6 * (a + 2 * b + 2 * c + d)
             for s, a, b, c, d in zip(state[3], k1[3], k2[3], k3[3], k4[3])],
        )
    return state[0], state[1]
