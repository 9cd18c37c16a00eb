import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import gamma, kv

import subfrac
from subfrac import (
    ExtensionParams,
    GridFunction,
    QuadratureSpec,
    boundary_limit,
    extension_constant,
    extension_constant_quadrature,
    extension_dt,
    extension_dtt,
    extension_multiplier_values,
    extension_solve,
    extension_solve_tau_grid,
    fractional_power,
    gaussian_bump,
    l2_wellposedness_check,
    lp_norm,
    path_agreement,
    pde_residual,
    scalar_extension_multiplier,
    scalar_ode_residual,
    subordination_integral,
)
from subfrac.errors import AccuracyError, ConfigError


def bessel_F(s, t, lam):
    """Independent closed form: F = 2^{1-s}/Gamma(s) (t sqrt(lam))^s K_s(t sqrt(lam))."""
    z = t * np.sqrt(lam)
    return 2.0 ** (1 - s) / gamma(s) * z ** s * kv(s, z)


def torus_bump(spec):
    return gaussian_bump(spec, [0.2 * spec.extent], 8 * spec.spacing)


# ---------------------------------------------------------------------------
# the constant C(s)
# ---------------------------------------------------------------------------

def test_constant_closed_form_values():
    assert extension_constant(0.5) == 1.0
    for s in (0.1, 0.3, 0.5, 0.7, 0.9):
        want = 4.0 ** (1 - s) * gamma(1 - s) / (2 * gamma(s))
        assert extension_constant(s) == pytest.approx(want, rel=0)


def test_constant_vs_direct_quadrature():
    for s in (0.1, 0.3, 0.5, 0.7, 0.9):
        closed = extension_constant(s)
        quad = extension_constant_quadrature(s)
        assert abs(closed - quad) <= 1e-10 * closed


def test_constant_domain():
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ConfigError):
            extension_constant(bad)


# ---------------------------------------------------------------------------
# scalar multiplier
# ---------------------------------------------------------------------------

def test_multiplier_at_t0_is_one():
    for s in (0.2, 0.5, 0.8):
        for lam in (0.0, 0.5, 10.0):
            assert scalar_extension_multiplier(s, 0.0, lam) == 1.0


def test_multiplier_bessel_half():
    # K_{1/2} closed form: F = e^{-t sqrt(lam)}
    got = scalar_extension_multiplier(0.5, 1.0, 1.0)
    assert got == pytest.approx(np.exp(-1.0), rel=1e-9)


def test_multiplier_lambda_zero_scalar_convention():
    # the scalar function carries the lambda^s factor: 0 at the bottom of the
    # spectrum for t > 0 (the operator path passes the kernel mode through)
    assert scalar_extension_multiplier(0.5, 1.0, 0.0) == 0.0


def test_multiplier_matches_bessel_oracle(rng):
    for _ in range(25):
        s = rng.uniform(0.05, 0.95)
        t = rng.uniform(0.01, 3.0)
        lam = rng.uniform(0.05, 50.0)
        got = scalar_extension_multiplier(s, t, lam)
        assert got == pytest.approx(bessel_F(s, t, lam), rel=1e-9, abs=1e-12)


def test_multiplier_bounds_and_monotonicity():
    lams = np.array([0.0, 0.3, 1.0, 7.0, 50.0, 400.0])
    for s in (0.1, 0.3, 0.5, 0.7, 0.9):
        prev = None
        for t in np.linspace(0.0, 10.0, 21):
            vals, _ = extension_multiplier_values(s, t, lams, 0)
            assert (vals >= 0.0).all() and (vals <= 1.0).all()
            if prev is not None:
                assert (vals <= prev + 1e-10).all()
            prev = vals


def test_derivative_multiplier_vanishes_at_kernel_mode():
    vals, _ = extension_multiplier_values(0.5, 1.0, np.array([0.0, 1.0]), 1)
    assert vals[0] == 0.0
    assert vals[1] < 0.0


@given(
    st.floats(min_value=0.05, max_value=0.95),
    st.floats(min_value=0.0, max_value=10.0),
    st.floats(min_value=0.0, max_value=500.0),
)
def test_multiplier_in_unit_interval(s, t, lam):
    v = scalar_extension_multiplier(s, t, lam)
    assert 0.0 <= v <= 1.0


@given(
    st.floats(min_value=0.05, max_value=0.95),
    st.floats(min_value=0.01, max_value=5.0),
    st.floats(min_value=0.5, max_value=3.0),
    st.floats(min_value=0.01, max_value=100.0),
)
def test_multiplier_nonincreasing_in_t(s, t, factor, lam):
    early = scalar_extension_multiplier(s, t, lam)
    late = scalar_extension_multiplier(s, t * (1.0 + factor), lam)
    assert late <= early + 1e-10


def test_subordination_integral_bessel_family():
    # G_k = 2/Gamma(s) q^{(s-k)/2} K_{s-k}(2 sqrt(q)) for k = 0, 1, 2
    for s in (0.25, 0.6):
        for q in (1e-4, 0.1, 4.0):
            for k in (0, 1, 2):
                got, _ = subordination_integral(s, np.array([q]), k)
                want = 2.0 / gamma(s) * q ** ((s - k) / 2.0) * kv(s - k, 2.0 * np.sqrt(q))
                assert got[0] == pytest.approx(want, rel=1e-9)


def test_subordination_integral_validation():
    with pytest.raises(ConfigError):
        subordination_integral(0.5, np.array([0.0]), 1)
    with pytest.raises(ConfigError):
        subordination_integral(1.2, np.array([1.0]), 0)
    with pytest.raises(AccuracyError):
        subordination_integral(0.5, np.array([1.0]), 0,
                               QuadratureSpec(initial_nodes=4, rtol=1e-12, max_doublings=0))


def test_scalar_ode_residual_random(rng):
    # the diagonalized extension equation F'' + ((1-2s)/t) F' = lam F
    for _ in range(20):
        s = rng.uniform(0.1, 0.9)
        lam = rng.uniform(0.1, 50.0)
        t = rng.uniform(0.05, 2.0)
        assert scalar_ode_residual(s, lam, t) <= 1e-8


# ---------------------------------------------------------------------------
# parameter validation
# ---------------------------------------------------------------------------

def test_extension_params_validation():
    with pytest.raises(ConfigError):
        ExtensionParams(s=0.0, t_values=(0.1,))
    with pytest.raises(ConfigError):
        ExtensionParams(s=1.0, t_values=(0.1,))
    with pytest.raises(ConfigError):
        ExtensionParams(s=0.5, t_values=(0.1, 0.2))
    with pytest.raises(ConfigError):
        ExtensionParams(s=0.5, t_values=(0.1, -0.05))
    p = ExtensionParams(s=0.5, t_values=(0.2, 0.1))
    assert p.t_values == (0.2, 0.1)


# ---------------------------------------------------------------------------
# grid-level solution
# ---------------------------------------------------------------------------

def test_initial_value_on_torus(torus64):
    op, dec = torus64
    phi = torus_bump(op.spec)
    params = ExtensionParams(s=0.5, t_values=(1e-3,))
    u = extension_solve(dec, params, phi).u[0]
    gap = lp_norm(GridFunction(op.spec, u.values - phi.values), 2)
    assert gap / lp_norm(phi, 2) <= 0.01


def test_solution_on_eigenvector_is_scalar_multiplier(torus64):
    op, dec = torus64
    k = 5
    v = GridFunction(op.spec, dec.eigenvectors[:, k])
    lam = dec.eigenvalues[k]
    params = ExtensionParams(s=0.3, t_values=(0.7,))
    u = extension_solve(dec, params, v).u[0]
    F = scalar_extension_multiplier(0.3, 0.7, lam)
    assert np.abs(u.values - F * v.values).max() <= 1e-9


def test_kernel_mode_passthrough(torus64):
    # constant phi: u(t) = phi for all t and d_t u = 0
    op, dec = torus64
    phi = GridFunction(op.spec, np.full(op.spec.n_nodes, 2.5))
    params = ExtensionParams(s=0.4, t_values=(1.0, 0.5))
    prof = extension_solve(dec, params, phi)
    for u, du in zip(prof.u, prof.du_dt):
        assert np.abs(u.values - 2.5).max() <= 1e-10
        assert np.abs(du.values).max() <= 1e-10


def test_path_a_vs_path_b_heisenberg(heis9, rng):
    op, dec = heis9
    phi = subfrac.random_bump(op.spec, rng)
    params = ExtensionParams(s=0.45, t_values=(0.8, 0.3))
    assert path_agreement(dec, params, phi) <= 1e-6


def test_path_a_vs_path_b_torus_mean_zero(torus64, rng):
    op, dec = torus64
    phi = subfrac.random_bump(op.spec, rng, zero_mean=True)
    params = ExtensionParams(s=0.3, t_values=(0.5,))
    assert path_agreement(dec, params, phi) <= 1e-6


def test_tau_grid_drops_kernel_mode(torus64):
    op, dec = torus64
    phi = GridFunction(op.spec, np.full(op.spec.n_nodes, 1.0))
    params = ExtensionParams(s=0.5, t_values=(0.5,))
    ub = extension_solve_tau_grid(dec, params, phi)[0]
    assert np.abs(ub.values).max() <= 1e-12


# ---------------------------------------------------------------------------
# t-derivatives
# ---------------------------------------------------------------------------

def test_dt_matches_finite_differences(torus64):
    op, dec = torus64
    phi = torus_bump(op.spec)
    t0, d = 0.5, 1e-4
    params = ExtensionParams(s=0.35, t_values=(t0 + d, t0, t0 - d))
    prof = extension_solve(dec, params, phi)
    fd = (prof.u[0].values - prof.u[2].values) / (2 * d)
    an = extension_dt(dec, ExtensionParams(s=0.35, t_values=(t0,)), phi)[0].values
    assert np.abs(fd - an).max() <= 1e-6 * np.abs(an).max()


def test_dtt_matches_finite_differences(torus64):
    op, dec = torus64
    phi = torus_bump(op.spec)
    t0, d = 0.5, 1e-4
    params = ExtensionParams(s=0.65, t_values=(t0 + d, t0, t0 - d))
    prof = extension_solve(dec, params, phi)
    fd = (prof.u[0].values - 2 * prof.u[1].values + prof.u[2].values) / d ** 2
    an = extension_dtt(dec, ExtensionParams(s=0.65, t_values=(t0,)), phi)[0].values
    assert np.abs(fd - an).max() <= 1e-5 * np.abs(an).max()


def test_dt_multiplier_fd_error_is_second_order():
    # scalar check: |(F(t+d) - F(t-d))/(2d) - F'(t)| shrinks by ~4x per halving
    s, lam, t = 0.35, 2.7, 0.6
    errs = []
    for d in (1e-2, 5e-3, 2.5e-3):
        hi, _ = extension_multiplier_values(s, t + d, np.array([lam]), 0)
        lo, _ = extension_multiplier_values(s, t - d, np.array([lam]), 0)
        an, _ = extension_multiplier_values(s, t, np.array([lam]), 1)
        errs.append(abs((hi[0] - lo[0]) / (2 * d) - an[0]))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_dt_negative_on_positive_modes(torus64):
    op, dec = torus64
    k = 7
    v = GridFunction(op.spec, dec.eigenvectors[:, k])
    for t in (0.1, 0.5, 2.0):
        du = extension_dt(dec, ExtensionParams(s=0.5, t_values=(t,)), v)[0]
        coeff = dec.project(du)[k]
        assert coeff < 0.0


def test_dtt_half_s_exponential():
    # s = 1/2, lam = 1: F(t) = e^{-t}, so the second derivative equals F
    v0, _ = extension_multiplier_values(0.5, 0.8, np.array([1.0]), 0)
    v2, _ = extension_multiplier_values(0.5, 0.8, np.array([1.0]), 2)
    assert v2[0] == pytest.approx(v0[0], rel=1e-9)
    assert v0[0] == pytest.approx(np.exp(-0.8), rel=1e-9)


# ---------------------------------------------------------------------------
# PDE residual
# ---------------------------------------------------------------------------

def test_pde_residual_single_mode(torus64):
    op, dec = torus64
    v = GridFunction(op.spec, dec.eigenvectors[:, 3])
    params = ExtensionParams(s=0.5, t_values=(1.0,))
    assert pde_residual(dec, params, v, 1.0) <= 1e-8


def test_pde_residual_torus(torus64, rng):
    op, dec = torus64
    phi = subfrac.random_bump(op.spec, rng)
    for s in (0.3, 0.5, 0.7):
        params = ExtensionParams(s=s, t_values=(1.0, 0.5, 0.1))
        for t in params.t_values:
            assert pde_residual(dec, params, phi, t) <= 1e-6


def test_pde_residual_heisenberg(heis15, rng):
    op, dec = heis15
    phi = subfrac.random_bump(op.spec, rng)
    for s in (0.3, 0.7):
        params = ExtensionParams(s=s, t_values=(0.5,))
        assert pde_residual(dec, params, phi, 0.5) <= 1e-5


# ---------------------------------------------------------------------------
# boundary limit
# ---------------------------------------------------------------------------

def test_boundary_limit_single_mode_scalar():
    # s = 1/2: t^{1-2s} d_t F = -sqrt(lam) e^{-t sqrt(lam)} -> -C(1/2) lam^{1/2}
    lam = 3.7
    for t in (0.2, 0.1, 0.05):
        vals, _ = extension_multiplier_values(0.5, t, np.array([lam]), 1)
        want = -np.sqrt(lam) * np.exp(-t * np.sqrt(lam))
        assert vals[0] == pytest.approx(want, rel=1e-9)
    assert extension_constant(0.5) == 1.0


def test_boundary_limit_torus(torus64):
    op, dec = torus64
    phi = torus_bump(op.spec)
    for s in (0.3, 0.5, 0.7):
        params = ExtensionParams(s=s, t_values=(0.2, 0.1, 0.05))
        res = boundary_limit(dec, params, phi)
        assert res.rel_error <= 1e-3
        assert res.monotone and not res.used_fallback


def test_boundary_limit_error_shrinks_with_sweep(torus64):
    op, dec = torus64
    phi = torus_bump(op.spec)
    errs = []
    for t0 in (0.4, 0.2, 0.1):
        params = ExtensionParams(s=0.6, t_values=(t0, t0 / 2, t0 / 4))
        errs.append(boundary_limit(dec, params, phi).rel_error)
    assert errs[2] < errs[1] < errs[0]


def test_boundary_limit_reference_is_fractional_power(torus64):
    op, dec = torus64
    phi = torus_bump(op.spec)
    params = ExtensionParams(s=0.5, t_values=(0.2, 0.1, 0.05))
    res = boundary_limit(dec, params, phi)
    want = -extension_constant(0.5) * fractional_power(dec, 0.5, phi).values
    assert np.abs(res.reference.values - want).max() <= 1e-12 * np.abs(want).max()


def test_boundary_limit_needs_three_points(torus64):
    op, dec = torus64
    phi = torus_bump(op.spec)
    with pytest.raises(ConfigError):
        boundary_limit(dec, ExtensionParams(s=0.5, t_values=(0.2, 0.1)), phi)


def test_boundary_limit_fallback_wiring(torus64, monkeypatch):
    # when the sweep does not close in on the extrapolant, the result must warn
    # and fall back to the raw smallest-t value; force that by pinning the
    # extrapolant to the largest-t sweep entry
    import subfrac.extension as ext

    op, dec = torus64
    phi = torus_bump(op.spec)
    params = ExtensionParams(s=0.5, t_values=(0.2, 0.1, 0.05))
    monkeypatch.setattr(ext, "_extrapolate_three", lambda ts, ws, s: np.array(ws[0]))
    with pytest.warns(RuntimeWarning):
        res = ext.boundary_limit(dec, params, phi)
    assert res.used_fallback and not res.monotone
    assert np.array_equal(res.extrapolated.values, res.sweep_values[-1].values)


# ---------------------------------------------------------------------------
# wellposedness
# ---------------------------------------------------------------------------

def test_wellposedness_report(torus64, rng):
    op, dec = torus64
    phi = subfrac.random_bump(op.spec, rng)
    params = ExtensionParams(s=0.5, t_values=(2.0, 1.0, 0.5, 0.1, 1e-3))
    rep = l2_wellposedness_check(dec, params, phi)
    assert rep.non_expansive
    assert rep.in_domain
    # F decreasing in t: later (smaller t) ratios are larger
    assert rep.monotone
    assert rep.norm_ratios[-1] <= 1.0 + 1e-12
    assert (rep.ju_norms <= rep.ju_bounds + 1e-9).all()
