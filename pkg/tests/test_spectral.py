"""Spectral module tests: transforms, fractional calculus, field synthesis.

Oracles: analytic Gaussian transform pairs, quadrature convolution, the
shift theorem, closed-form derivatives, and finite-difference cross-checks.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from scaletop import (
    FieldStack,
    GridTooCoarse,
    KernelParams,
    SignalGrid,
    SmoothnessBudget,
    SmoothnessViolation,
    Spectrum,
    estimate_decay_order,
    forward_transform,
    fractional_derivative,
    geometric_ladder,
    inverse_transform,
    pde_residual,
    synth_field,
)
from scaletop.spectral import _inverse_complex

from conftest import DX, N, X0, s2_samples, s3_samples

SQRT_2PI = math.sqrt(2.0 * math.pi)


def _budget(sig: SignalGrid, p: float, k: int) -> SmoothnessBudget:
    return SmoothnessBudget.for_request(forward_transform(sig), p, k)


# ======================================================================
# Transforms
# ======================================================================

def test_zero_signal_zero_spectrum():
    sig = SignalGrid(X0, DX, np.zeros(N))
    assert np.all(forward_transform(sig).coeffs == 0)


def test_round_trip_identity(s2):
    rt = inverse_transform(forward_transform(s2))
    assert rt.x0 == s2.x0 and rt.dx == s2.dx
    assert np.max(np.abs(rt.samples - s2.samples)) <= 1e-12 * s2.scale


def test_gaussian_pair(s1, x_axis):
    spec = forward_transform(s1)
    target = SQRT_2PI * np.exp(-0.5 * spec.omega**2)
    band = np.abs(spec.omega) <= 10.0
    err = np.max(np.abs(spec.coeffs[band] - target[band]))
    assert err <= 1e-8 * SQRT_2PI


def test_shift_theorem(x_axis):
    base = np.exp(-2.0 * x_axis**2)
    shifted = np.exp(-2.0 * (x_axis - 1.5) ** 2)
    f0 = forward_transform(SignalGrid(X0, DX, base))
    f1 = forward_transform(SignalGrid(X0, DX, shifted))
    predicted = f0.coeffs * np.exp(-1j * f1.omega * 1.5)
    band = np.abs(f0.coeffs) > 1e-12 * np.max(np.abs(f0.coeffs))
    err = np.max(np.abs(f1.coeffs[band] - predicted[band]))
    assert err <= 1e-9 * np.max(np.abs(f0.coeffs))


def test_real_signal_conjugate_symmetric_inverse(s3):
    spec = forward_transform(s3)
    residue = np.max(np.abs(_inverse_complex(spec).imag))
    assert residue <= 1e-12 * s3.scale


def test_spectrum_frequency_axis(s1):
    spec = forward_transform(s1)
    assert spec.domega == pytest.approx(2 * math.pi / (N * DX))
    assert spec.omega[0] == pytest.approx(-spec.domega * (N // 2))
    assert spec.omega[N // 2] == 0.0


def test_signal_grid_validation():
    with pytest.raises(ValueError):
        SignalGrid(0.0, 0.1, np.zeros(100))  # not a power of two
    with pytest.raises(ValueError):
        SignalGrid(0.0, 0.1, np.zeros(8))  # too short
    with pytest.raises(ValueError):
        SignalGrid(0.0, -0.1, np.zeros(16))
    with pytest.raises(ValueError):
        SignalGrid(0.0, 0.1, np.full(16, np.nan))


# ======================================================================
# Decay order estimation
# ======================================================================

def test_decay_order_band_limited(s1):
    assert estimate_decay_order(forward_transform(s1)) == math.inf


def test_decay_order_kink(x_axis):
    tri = np.clip(1.0 - np.abs(x_axis) / 3.0, 0.0, None)
    m = estimate_decay_order(forward_transform(SignalGrid(X0, DX, tri)))
    # triangle spectrum decays like w^-2; envelope fit should land nearby
    assert 1.2 < m < 2.8


# ======================================================================
# Fractional derivative
# ======================================================================

def test_fractional_identity_p0(s2):
    out = fractional_derivative(s2, 0.0)
    assert np.max(np.abs(out.samples - s2.samples)) <= 1e-12 * s2.scale


def test_fractional_p1_gaussian(x_axis):
    phi = np.exp(-0.5 * x_axis**2) / SQRT_2PI
    sig = SignalGrid(X0, DX, phi)
    out = fractional_derivative(sig, 1.0)
    target = -x_axis * phi
    band = np.abs(x_axis) <= 6.0
    err = np.max(np.abs(out.samples[band] - target[band]))
    assert err <= 1e-6 * np.max(np.abs(target))


def test_fractional_semigroup(s2):
    twice = fractional_derivative(fractional_derivative(s2, 0.25), 0.25)
    once = fractional_derivative(s2, 0.5)
    err = np.max(np.abs(twice.samples - once.samples))
    assert err <= 1e-8 * np.max(np.abs(once.samples))


def test_fractional_integer_matches_finite_differences(s2):
    """Dual route: spectral derivative vs 4th-order central differences."""
    d1 = fractional_derivative(s2, 1.0).samples
    v = s2.samples
    fd1 = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * DX)
    err = np.max(np.abs(d1[2:-2] - fd1))
    assert err <= 1e-4 * np.max(np.abs(fd1))

    d2 = fractional_derivative(s2, 2.0).samples
    fd2 = (-v[4:] + 16 * v[3:-1] - 30 * v[2:-2] + 16 * v[1:-3] - v[:-4]) / (12 * DX**2)
    err2 = np.max(np.abs(d2[2:-2] - fd2))
    assert err2 <= 1e-4 * np.max(np.abs(fd2))


def test_fractional_rejects_rough_signal(x_axis):
    tri = np.clip(1.0 - np.abs(x_axis) / 3.0, 0.0, None)
    with pytest.raises(SmoothnessViolation):
        fractional_derivative(SignalGrid(X0, DX, tri), 1.5)


def test_fractional_rejects_negative_order(s1):
    with pytest.raises(ValueError):
        fractional_derivative(s1, -0.5)


# ======================================================================
# Smoothness budget
# ======================================================================

def test_budget_admits_requested_orders(s1):
    b = _budget(s1, 1.0, 4)
    assert b.admits(4) and b.admits(2, 1) and b.admits(0, 2)
    assert not b.admits(5)


def test_budget_rejects_rough_signal(x_axis):
    tri = np.clip(1.0 - np.abs(x_axis) / 3.0, 0.0, None)
    with pytest.raises(SmoothnessViolation):
        SmoothnessBudget.for_request(
            forward_transform(SignalGrid(X0, DX, tri)), 0.5, 2
        )


# ======================================================================
# Field synthesis
# ======================================================================

def test_gaussian_smoothing_matches_quadrature(s2, x_axis):
    """p=0 even field rows equal direct convolution with the Gaussian."""
    params = KernelParams(alpha=0.0, beta=1.0, p=0.0)
    ladder = np.array([0.0, 0.5, 1.0, 2.0])
    field = synth_field(s2, params, 0, ladder, _budget(s2, 0.0, 2))
    for i, sigma in enumerate(ladder[1:], start=1):
        weights = np.exp(-0.5 * ((x_axis[:, None] - x_axis[None, :]) / sigma) ** 2)
        weights /= sigma * SQRT_2PI
        oracle = np.trapezoid(weights * s2.samples[None, :], x_axis, axis=1)
        err = np.max(np.abs(field.values[i] - oracle))
        assert err <= 1e-6 * s2.scale, f"sigma={sigma}"


def test_zero_sigma_row_is_limit_field(s2):
    params = KernelParams(alpha=0.0, beta=1.0, p=0.5)
    ladder = np.array([0.0, 0.3, 1.0])
    field = synth_field(s2, params, 0, ladder, _budget(s2, 0.5, 2))
    # limit row: fractional |w|^0.5 filter with no smoothing.  The target is
    # rebuilt here with the synthesizer's own padding convention (half the
    # length zero-padded on each side) because the |w|^p filter has algebraic
    # tails whose periodization differs between the 2N and N windows at the
    # 1e-4 level, far above the comparison tolerance.
    pad = N // 2
    padded = np.concatenate([np.zeros(pad), s2.samples, np.zeros(pad)])
    x0_pad = X0 - pad * DX
    spec = forward_transform(SignalGrid(x0_pad, DX, padded))
    target = np.fft.ifft(
        np.fft.ifftshift(spec.coeffs * np.abs(spec.omega) ** 0.5)
        * np.exp(1j * 2 * math.pi * np.fft.fftfreq(2 * N, d=DX) * x0_pad)
    ).real / DX
    target = target[pad : pad + N]
    assert np.max(np.abs(field.row_at(0.0) - target)) <= 1e-9 * s2.scale


def test_field_even_in_sigma(s1):
    params = KernelParams(alpha=1.0, beta=0.0, p=1.0)
    ladder = np.array([0.0, 0.7, 1.4])
    field = synth_field(s1, params, 1, ladder, _budget(s1, 1.0, 3))
    assert np.array_equal(field.row_at(-0.7), field.row_at(0.7))
    with pytest.raises(ValueError):
        field.row_at(0.33)


def test_point_evaluation_matches_grid(s2):
    params = KernelParams(alpha=0.3, beta=1.0, p=0.8)
    ladder = np.array([0.0, 0.25, 0.9, 2.7])
    stack = FieldStack(s2, params, ladder, _budget(s2, 0.8, 4))
    grid = stack.grid(1)
    for i_s in (0, 2, 3):
        for i_x in (100, 1024, 1700):
            pv = stack.point(1, grid.x[i_x], ladder[i_s])
            assert pv == pytest.approx(grid.values[i_s, i_x], abs=1e-12 * grid.scale)


def test_sigma_derivative_identity(s2):
    """d(Psi)/d(sigma) rows equal sigma times the (k+2)-derivative rows;
    cross-checked against sigma finite differences of the synthesized rows."""
    params = KernelParams(alpha=0.0, beta=1.0, p=1.0)
    uni = np.linspace(0.0, 1.6, 33)
    stack = FieldStack(s2, params, uni, _budget(s2, 1.0, 4))
    rows = stack.grid(0).values
    identity = stack.sigma_deriv_rows(0)
    fd = (rows[2:] - rows[:-2]) / (2 * (uni[1] - uni[0]))
    err = np.max(np.abs(identity[1:-1] - fd))
    # the identity itself is exact; the error is the central-difference
    # truncation at this step (measured 3.9e-3 of scale)
    assert err <= 8e-3 * stack.grid(0).scale


def test_synthesis_deterministic_under_threads(s2, monkeypatch):
    params = KernelParams(alpha=0.0, beta=1.0, p=0.5)
    ladder = geometric_ladder(DX, 2 ** 0.125, 16)
    budget = _budget(s2, 0.5, 2)
    serial = synth_field(s2, params, 0, ladder, budget)
    monkeypatch.setenv("SCALETOP_THREADS", "4")
    threaded = synth_field(s2, params, 0, ladder, budget)
    assert np.array_equal(serial.values, threaded.values)


def test_budget_gates_derivative_order(s2):
    params = KernelParams(alpha=0.0, beta=1.0, p=0.5)
    budget = _budget(s2, 0.5, 2)  # l = 1: admits k <= 2
    ladder = np.array([0.0, 0.5])
    synth_field(s2, params, 2, ladder, budget)
    with pytest.raises(SmoothnessViolation):
        synth_field(s2, params, 3, ladder, budget)


def test_grid_too_coarse_guard():
    n = 64
    x0, dx = -20.0, 40.0 / n
    x = x0 + dx * np.arange(n)
    sig = SignalGrid(x0, dx, np.exp(-0.5 * (x / 0.3) ** 2))
    params = KernelParams(alpha=0.0, beta=1.0, p=0.0)
    budget = SmoothnessBudget(m=math.inf, l=2)
    with pytest.raises(GridTooCoarse):
        synth_field(sig, params, 0, np.array([0.0, 1e-4]), budget)


def test_sigma_grid_validation(s1):
    params = KernelParams(alpha=0.0, beta=1.0, p=0.0)
    budget = SmoothnessBudget(m=math.inf, l=1)
    with pytest.raises(ValueError):
        synth_field(s1, params, 0, np.array([0.1, 0.5]), budget)  # no 0 row
    with pytest.raises(ValueError):
        synth_field(s1, params, 0, np.array([0.0, 0.5, 0.5]), budget)


# ======================================================================
# Limit behavior (scale ladder)
# ======================================================================

@pytest.mark.parametrize("p", [0.0, 0.5, 1.0])
def test_small_sigma_rows_converge_to_limit(s2, p):
    """sup |row(sigma) - row(0)| decreases monotonically to <= 1e-4*scale."""
    params = KernelParams(alpha=0.0, beta=1.0, p=p)
    ladder = geometric_ladder(DX / 4, (20.0 / (DX / 4)) ** (1.0 / 62), 64)
    field = synth_field(s2, params, 0, ladder, _budget(s2, p, 2))
    sups = np.max(np.abs(field.values - field.values[0]), axis=1)
    scale = field.scale
    assert sups[1] <= 1e-4 * scale
    assert np.all(np.diff(sups[1:]) >= -1e-12 * scale)  # decreasing toward 0


@pytest.mark.parametrize("p", [0.5, 1.0])
def test_large_sigma_rows_vanish(s2, p):
    """Rows die off at large sigma; the endpoint follows the slowest
    surviving mode, sup ~ exp(-w_min^2 sigma^2/2) on a periodic window, so
    sigma_max is chosen by the threshold sigma_max^2 >= 2 ln(scale/eps)/w_min^2.
    The synthesizer pads the window to twice its span (here 80), which halves
    w_min to 2 pi/80 and pushes the 1e-6 crossing out to sigma ~ 67; the
    ladder therefore runs to 72 (measured endpoints: 3.4e-9 at p = 0.5,
    8.6e-10 at p = 1.0).  At p > 0 there is no DC mode and the bound is
    attainable."""
    params = KernelParams(alpha=0.0, beta=1.0, p=p)
    ladder = geometric_ladder(0.05, (72.0 / 0.05) ** (1.0 / 62), 64)
    field = synth_field(s2, params, 0, ladder, _budget(s2, p, 2))
    sups = np.max(np.abs(field.values), axis=1)
    scale = field.scale
    upper = sups[32:]
    assert np.all(np.diff(upper) <= 1e-12 * scale)
    assert sups[-1] <= 1e-6 * scale


def test_large_sigma_gaussian_case_mass_law(s1):
    """At p = 0 the smoothed field keeps the signal's mass: sup decays like
    mass/(sqrt(2 pi) sigma) plus the padded-window mean, never below it.
    This is the analytic reason a 1e-6 endpoint is unreachable at p = 0."""
    params = KernelParams(alpha=0.0, beta=1.0, p=0.0)
    ladder = geometric_ladder(0.05, (20.0 / 0.05) ** (1.0 / 62), 64)
    field = synth_field(s1, params, 0, ladder, _budget(s1, 0.0, 2))
    sups = np.max(np.abs(field.values), axis=1)
    assert np.all(np.diff(sups) <= 1e-12 * field.scale)
    mass = np.trapezoid(s1.samples, s1.x)
    continuum = mass / (SQRT_2PI * 20.0)
    assert sups[-1] == pytest.approx(continuum, rel=0.3)
    assert sups[-1] > 1e-3 * field.scale


def test_sigma_continuity_linear(s2):
    """sup |row(sigma+delta) - row(sigma)| shrinks linearly in delta."""
    params = KernelParams(alpha=0.0, beta=1.0, p=0.5)
    stack = FieldStack(s2, params, np.array([0.0, 1.0]), _budget(s2, 0.5, 2))
    x = s2.x
    base = stack.point(0, x, np.full_like(x, 1.0))
    errs = []
    for delta in (0.16, 0.08, 0.04, 0.02):
        moved = stack.point(0, x, np.full_like(x, 1.0 + delta))
        errs.append(np.max(np.abs(moved - base)))
    errs = np.asarray(errs)
    ratios = errs[:-1] / errs[1:]
    assert np.all(ratios > 1.7) and np.all(ratios < 2.3)
    assert errs[-1] <= 0.05 * s2.scale


def _wide_signal(sample_fn) -> SignalGrid:
    """Fixture signal regenerated on a doubled window [-40, 40).

    The limit row of a beta-kernel field decays like |x|^-(p+1+k), so the
    x-extent of an eps-superlevel set grows like (c/eps)^(1/(p+1+k)).  On the
    standard 40-wide window that extent runs off the edge for small p (at
    p = 0.5, eps = 1e-3 the crossing sits near |x| = 78), which would make a
    containment assertion vacuous.  These tests therefore synthesize on the
    doubled window and pick eps per p so the measured box has real margin.
    """
    n_pad = 2 * N
    x0 = X0 - (N // 2) * DX
    x = x0 + DX * np.arange(n_pad)
    return SignalGrid(x0, DX, sample_fn(x))


@pytest.mark.parametrize(
    "p,k,eps_rel,x_box,sigma_top",
    [
        # measured boxes: [-25.3, 25.6] / 22.3, [-20.1, 20.5] / 11.1,
        # [-11.2, 11.9] / 3.1; asserted with margin below
        (0.5, 0, 2e-2, 30.0, 28.0),
        (1.0, 1, 1e-3, 25.0, 15.0),
        (1.5, 2, 1e-3, 16.0, 6.0),
    ],
)
def test_localization(p, k, eps_rel, x_box, sigma_top):
    """The eps-superlevel set stays in a compact box inside the window."""
    sig = _wide_signal(s3_samples)
    params = KernelParams(alpha=0.0, beta=1.0, p=p)
    ladder = geometric_ladder(0.05, (72.0 / 0.05) ** (1.0 / 62), 64)
    field = synth_field(sig, params, k, ladder, _budget(sig, p, k + 2))
    hot = np.abs(field.values) >= eps_rel * field.scale
    assert hot.any()
    hot_cols = np.where(hot.any(axis=0))[0]
    lo, hi = field.x[hot_cols[0]], field.x[hot_cols[-1]]
    assert -x_box < lo and hi < x_box
    assert hi - lo > 10.0  # the set is genuinely two-sided, not a speck
    hot_rows = np.where(hot.any(axis=1))[0]
    assert field.sigma_grid[hot_rows[-1]] < sigma_top


def test_uniformity_across_orders():
    """One bounded box contains the superlevel sets of every p in the sweep,
    and the boxes shrink monotonically as p grows (heavier tails for smaller
    fractional order in both x and sigma)."""
    sig = _wide_signal(s2_samples)
    ladder = geometric_ladder(0.05, (72.0 / 0.05) ** (1.0 / 62), 64)
    extents, tops = [], []
    for p in (0.2, 0.5, 1.0, 1.5, 2.0):
        params = KernelParams(alpha=0.0, beta=1.0, p=p)
        field = synth_field(sig, params, 0, ladder, _budget(sig, p, 2))
        hot = np.abs(field.values) >= 2e-2 * field.scale
        cols = np.where(hot.any(axis=0))[0]
        rows = np.where(hot.any(axis=1))[0]
        assert -26.0 < field.x[cols[0]] and field.x[cols[-1]] < 26.0
        extents.append(field.x[cols[-1]] - field.x[cols[0]])
        tops.append(field.sigma_grid[rows[-1]])
    assert max(tops) < 30.0
    assert np.all(np.diff(extents) < 0)
    assert np.all(np.diff(tops) < 0)


# ======================================================================
# PDE identity
# ======================================================================

def test_pde_residual_zero_field():
    zero = SignalGrid(X0, DX, np.zeros(N))
    params = KernelParams(alpha=0.0, beta=1.0, p=0.0)
    field = synth_field(zero, params, 0, np.linspace(0.0, 1.6, 17),
                        SmoothnessBudget(m=math.inf, l=2))
    assert np.all(pde_residual(field) == 0.0)


def test_pde_residual_small_and_second_order(s1):
    params = KernelParams(alpha=0.0, beta=1.0, p=1.0)
    budget = _budget(s1, 1.0, 4)
    coarse = synth_field(s1, params, 0, np.linspace(0.0, 1.6, 65), budget)
    r_coarse = np.max(pde_residual(coarse))
    assert r_coarse <= 1e-3

    n2 = 2 * N
    dx2 = DX / 2
    x2 = X0 + dx2 * np.arange(n2)
    fine_sig = SignalGrid(X0, dx2, np.exp(-0.5 * x2**2))
    fine = synth_field(fine_sig, params, 0, np.linspace(0.0, 1.6, 129),
                       _budget(fine_sig, 1.0, 4))
    r_fine = np.max(pde_residual(fine))
    assert 3.0 <= r_coarse / r_fine <= 5.0


def test_pde_residual_needs_uniform_band(s1):
    params = KernelParams(alpha=0.0, beta=1.0, p=0.0)
    budget = SmoothnessBudget(m=math.inf, l=2)
    field = synth_field(s1, params, 0, geometric_ladder(0.1, 1.5, 8), budget)
    with pytest.raises(GridTooCoarse):
        pde_residual(field)
    short = synth_field(s1, params, 0, np.array([0.0, 0.5]), budget)
    with pytest.raises(GridTooCoarse):
        pde_residual(short)
