import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coagscale.baseline import explicit_profile
from coagscale.errors import AlphaZero, DomainError, LengthMismatch
from coagscale.grid import build_grid
from coagscale.kernel import KernelSpec
from coagscale.profile import (
    EQUATIONS,
    Profile,
    b99_gap,
    l1_distance,
    moment,
    moment_identity_gap,
    residual,
    residual_norms,
    scale,
    transform_pair,
)

GRID = build_grid(1e-6, 1e3, 600)


def exp_profile(alpha=0.0, grid=GRID):
    return Profile(grid, np.exp(-grid.nodes), KernelSpec(alpha))


def zero_profile(alpha=0.5):
    return Profile(GRID, np.zeros(GRID.n_cells), KernelSpec(alpha))


def test_profile_validation():
    with pytest.raises(DomainError):
        Profile(GRID, -np.ones(GRID.n_cells), KernelSpec(0.0))
    with pytest.raises(LengthMismatch):
        Profile(GRID, np.ones(3), KernelSpec(0.0))
    with pytest.raises(DomainError):
        Profile(GRID, np.full(GRID.n_cells, np.nan), KernelSpec(0.0))


def test_moment_examples():
    p = exp_profile()
    # the width-weighted midpoint rule is second order in the log spacing
    assert moment(p, 1.0) == pytest.approx(1.0, rel=1e-4)
    assert moment(p, 0.0) == pytest.approx(1.0, rel=1e-4)
    assert moment(p, 2.0) == pytest.approx(2.0, rel=1e-4)
    fine = exp_profile(grid=build_grid(1e-8, 200, 20000))
    assert moment(fine, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_scale_examples():
    p = exp_profile(0.5)
    assert scale(p, 1.0) is p
    assert moment(scale(p, 2.0), 1.0) == pytest.approx(0.25 * moment(p, 1.0), rel=1e-13)


@given(st.floats(0.0, 1.5), st.floats(0.05, 20.0), st.sampled_from(["-alpha", "0", "1"]))
@settings(max_examples=60, deadline=None)
def test_scaling_law(alpha, a, which):
    p = exp_profile(alpha, build_grid(1e-4, 1e3, 200))
    m = -alpha if which == "-alpha" else float(which)
    assert moment(scale(p, a), m) == pytest.approx(a ** (-m - 2 * alpha) * moment(p, m), rel=1e-12)


@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0))
@settings(max_examples=40, deadline=None)
def test_scale_group_action(a, b):
    p = exp_profile(0.5, build_grid(1e-3, 1e2, 50))
    lhs, rhs = scale(scale(p, a), b), scale(p, a * b)
    np.testing.assert_allclose(lhs.grid.nodes, rhs.grid.nodes, rtol=1e-13)
    np.testing.assert_allclose(lhs.values, rhs.values, rtol=1e-13)


def test_scale_rejects_nonpositive():
    with pytest.raises(DomainError):
        scale(exp_profile(), 0.0)


def test_transform_pair_exponential():
    errs = []
    for n in (600, 1200):
        g = build_grid(1e-6, 1e3, n)
        tp = transform_pair(exp_profile(grid=g))
        i = np.argmin(abs(g.nodes - 1.0))
        errs.append(abs(tp.H_values[i] - np.exp(-g.nodes[i])))
        np.testing.assert_allclose(tp.h_values, np.exp(-g.nodes))
    assert errs[0] < 5e-4 and errs[0] / errs[1] >= 3


def test_transform_pair_zero():
    tp = transform_pair(zero_profile())
    assert not np.any(tp.h_values) and not np.any(tp.H_values) and tp.H_min == 0.0


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
def test_transform_pair_invariants(alpha):
    p = Profile(GRID, np.exp(-GRID.nodes - 0.01 / GRID.nodes), KernelSpec(alpha))
    tp = transform_pair(p)
    assert np.all(np.diff(tp.H_values) <= 0) and np.all(tp.H_values >= 0)
    np.testing.assert_allclose(tp.h_values * GRID.nodes**alpha, p.values, rtol=1e-14, atol=1e-300)
    assert tp.H_min == pytest.approx(moment(p, -alpha), rel=1e-3)


def test_residuals_of_zero_profile():
    for eq in EQUATIONS:
        assert not np.any(residual(zero_profile(), eq))


def test_residual_unknown_equation():
    with pytest.raises(ValueError):
        residual(exp_profile(), "C1")


def test_explicit_profile_residuals_second_order():
    coarse = residual_norms(explicit_profile(1.0, 1.0, GRID))
    fine = residual_norms(explicit_profile(1.0, 1.0, build_grid(1e-6, 1e3, 1200)))
    assert coarse["A7"] / np.max(np.exp(-GRID.nodes)) <= 1e-3
    for eq in EQUATIONS:
        assert coarse[eq] / fine[eq] >= 3, eq


def test_b00_of_exponential():
    r = residual(exp_profile(), "B00")
    assert np.max(np.abs(r / GRID.nodes**2)) <= 1e-4


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
def test_b3_equals_a7(alpha):
    # substituting phi = x**alpha h turns one equation into the other term by term
    p = Profile(GRID, np.exp(-GRID.nodes - 0.1 / GRID.nodes), KernelSpec(alpha))
    a7, b3 = residual(p, "A7"), residual(p, "B3")
    assert np.max(np.abs(b3 - a7)) <= 1e-2 * np.max(np.abs(a7))


def test_moment_identity_gap_examples():
    assert abs(moment_identity_gap(exp_profile())) <= 1e-4
    fine = exp_profile(grid=build_grid(1e-8, 200, 20000))
    assert abs(moment_identity_gap(fine)) <= 2e-6
    assert moment_identity_gap(zero_profile()) == 0.0


@given(st.floats(0.1, 2.0), st.floats(0.2, 5.0))
@settings(max_examples=30, deadline=None)
def test_moment_identity_gap_scaling(alpha, a):
    p = Profile(build_grid(1e-4, 1e3, 200), np.exp(-np.linspace(0, 5, 200)), KernelSpec(alpha))
    g = moment_identity_gap(p)
    ga = moment_identity_gap(scale(p, a))
    assert ga == pytest.approx(a ** (-2 * alpha) * g, rel=1e-9, abs=1e-13)


def test_b99_gap():
    with pytest.raises(AlphaZero):
        b99_gap(exp_profile(0.0))
    assert b99_gap(zero_profile()) == 0.0
    errs = [abs(b99_gap(exp_profile(0.5, build_grid(1e-6, 1e3, n)))) for n in (300, 600)]
    assert errs[1] < 1e-3 and errs[0] / errs[1] >= 3


def test_b99_second_form():
    # M_{alpha-1}(H) - M_{-alpha}^2 / (alpha w) differs from the gap by the
    # moment identity gap divided by alpha w
    p = Profile(GRID, np.exp(-GRID.nodes - 0.1 / GRID.nodes), KernelSpec(0.5))
    alpha, w = 0.5, 1.0
    m_h = b99_gap(p) + moment(p, 0.0) / alpha
    second = m_h - moment(p, -alpha) ** 2 / (alpha * w)
    assert second - b99_gap(p) == pytest.approx(moment_identity_gap(p) / (alpha * w), abs=1e-10)


def test_l1_distance():
    p = exp_profile()
    assert l1_distance(p, p) == 0.0
    q = scale(p, 1.0 + 1e-3)
    assert 0 < l1_distance(p, q) < 1e-2


def test_truncation_report():
    from coagscale.profile import truncation_report
    rep = truncation_report(exp_profile(0.5))
    assert 0 <= rep["lower_extension"] < 1e-3
    assert rep["first_decade_mass"] < 1e-9
    assert rep["last_decade_mass"] < 1e-30
    assert abs(rep["nested_moments"]["m1"]) < 1e-9
    zero = truncation_report(zero_profile())
    assert zero["lower_extension"] == 0.0 and zero["first_decade_mass"] == 0.0
