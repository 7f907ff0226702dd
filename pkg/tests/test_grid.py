import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coagscale.errors import InvalidBounds, LengthMismatch, OverflowSignal
from coagscale.grid import build_grid, convolve, integrate, interpolate, log_derivative


def test_small_grid_example():
    g = build_grid(1, 4, 2)
    np.testing.assert_allclose(g.edges, [1, 2, 4])
    np.testing.assert_allclose(g.nodes, [np.sqrt(2), 2 * np.sqrt(2)])


def test_decade_ratio():
    g = build_grid(1e-6, 1e6, 12)
    assert g.ratio == pytest.approx(10.0, rel=1e-12)
    np.testing.assert_allclose(g.edges[1:] / g.edges[:-1], 10.0, rtol=1e-12)


def test_single_cell():
    g = build_grid(1, 2, 1)
    assert g.n_cells == 1
    assert g.weights[0] == pytest.approx(1.0)
    assert g.nodes[0] == pytest.approx(np.sqrt(2))


@pytest.mark.parametrize("args", [(0, 1, 4), (2, 1, 4), (1, 1, 4), (-1, 2, 3),
                                  (1, 2, 0), (1, 2, 2.5), (1, np.inf, 3)])
def test_invalid_bounds(args):
    with pytest.raises(InvalidBounds):
        build_grid(*args)


@given(st.floats(1e-8, 1.0), st.floats(1.5, 1e8), st.integers(1, 400))
@settings(max_examples=60, deadline=None)
def test_grid_invariants(x_min, factor, n):
    g = build_grid(x_min, x_min * factor, n)
    assert g.edges[0] == x_min and g.edges[-1] == x_min * factor
    assert np.all(np.diff(g.edges) > 0)
    r = g.edges[1:] / g.edges[:-1]
    np.testing.assert_allclose(r, r[0], rtol=1e-12)
    assert np.all((g.nodes > g.edges[:-1]) & (g.nodes < g.edges[1:]))
    np.testing.assert_allclose(g.weights, np.diff(g.edges))


def test_grid_is_immutable():
    g = build_grid(1, 4, 2)
    with pytest.raises(ValueError):
        g.edges[0] = 3.0


def test_integrate_examples():
    g = build_grid(1, 4, 2)
    assert integrate(g, np.ones(2)) == pytest.approx(3.0)
    assert integrate(g, g.nodes) == pytest.approx(np.sqrt(2) + 4 * np.sqrt(2), rel=1e-12)
    g2 = build_grid(1e-4, 50, 2000)
    assert integrate(g2, np.exp(-g2.nodes)) == pytest.approx(np.exp(-1e-4), abs=1e-4)


def test_integrate_length_mismatch():
    with pytest.raises(LengthMismatch):
        integrate(build_grid(1, 4, 2), np.ones(3))


@given(st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=8),
       st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=8),
       st.floats(-10, 10), st.floats(-10, 10))
@settings(max_examples=80, deadline=None)
def test_integrate_linear(u, v, a, b):
    g = build_grid(0.1, 20, 8)
    u, v = np.array(u), np.array(v)
    lhs = integrate(g, a * u + b * v)
    rhs = a * integrate(g, u) + b * integrate(g, v)
    scale = integrate(g, np.abs(a * u)) + integrate(g, np.abs(b * v)) + 1e-300
    assert abs(lhs - rhs) <= 1e-13 * scale


def test_integrate_is_deterministic():
    g = build_grid(1e-3, 1e3, 500)
    v = np.random.default_rng(0).random(500)
    assert integrate(g, v) == integrate(g, v.copy())


def test_integrate_richardson():
    errs = []
    for n in (100, 200, 400):
        g = build_grid(1e-6, 60, n)
        errs.append(abs(integrate(g, g.nodes**2 * np.exp(-g.nodes)) - 2.0))
    assert errs[0] / errs[1] >= 3 and errs[1] / errs[2] >= 3


def test_interpolate_examples():
    g = build_grid(1, 16, 4)
    vals = np.log(g.nodes)  # linear in log x
    assert interpolate(g, vals, g.nodes[2]) == pytest.approx(vals[2])
    assert interpolate(g, vals, 20.0) == 0.0
    assert interpolate(g, vals, 0.5) == 0.0
    mid = np.sqrt(g.nodes[1] * g.nodes[2])
    assert interpolate(g, vals, mid) == pytest.approx(0.5 * (vals[1] + vals[2]))


def test_interpolate_vectorised():
    g = build_grid(1, 16, 4)
    out = interpolate(g, np.arange(4.0), g.nodes)
    np.testing.assert_allclose(out, np.arange(4.0))


def test_convolve_zero():
    g = build_grid(1e-6, 1e3, 100)
    out = convolve(g, np.zeros(100), lambda z: np.exp(-z))
    assert np.all(out == 0)


def test_convolve_exponentials():
    g = build_grid(1e-6, 1e3, 600)
    out = convolve(g, np.exp(-g.nodes), lambda z: np.exp(-z), g_limit=1.0)
    np.testing.assert_allclose(out, g.nodes * np.exp(-g.nodes), atol=1e-4)
    i = np.argmin(abs(g.nodes - 1.0))
    assert out[i] / g.nodes[i] * np.exp(g.nodes[i]) == pytest.approx(1.0, abs=1e-3)
    one = convolve(g, np.exp(-g.nodes), lambda z: np.exp(-z), g_limit=1.0, targets=[1.0])
    assert one[0] == pytest.approx(np.exp(-1.0), abs=1e-4)


def test_convolve_ones():
    g = build_grid(1e-6, 10, 300)
    out = convolve(g, np.ones(300), lambda z: np.ones_like(z), g_limit=1.0)
    np.testing.assert_allclose(out, g.nodes, atol=2e-6)


def test_convolve_symmetric():
    g = build_grid(1e-5, 100, 400)
    f = lambda z: z * np.exp(-z)
    h = lambda z: np.exp(-2 * z)
    fg = convolve(g, f(g.nodes), h, g_limit=1.0)
    gf = convolve(g, h(g.nodes), f, g_limit=0.0)
    assert np.max(np.abs(fg - gf)) <= 1e-3 * np.max(np.abs(fg))


def test_convolve_overflow():
    g = build_grid(1e-300, 1e3, 50)
    with pytest.raises(OverflowSignal):
        convolve(g, g.nodes ** -1.0, lambda z: z ** -1.0)


def test_log_derivative_power():
    g = build_grid(1e-3, 1e3, 300)
    d = log_derivative(g, g.nodes**2)
    np.testing.assert_allclose(d[1:-1], 2 * g.nodes[1:-1] ** 2, rtol=3e-3)
