"""Ambiguity kernels: peaks, nulls, the closed-form mean, MC convergence."""

import numpy as np
import pytest

from frac.ambiguity import (
    dirichlet,
    expected_af,
    instantaneous_af,
    mc_mean_af,
    resolutions,
)
from frac.config import reference_config
from frac.im_codec import random_selection_sequence


@pytest.fixture(scope="module")
def cfg():
    return reference_config()


def test_dirichlet_integer_points():
    np.testing.assert_allclose(dirichlet(8, [0.0, 1.0, -2.0]), 8.0)
    np.testing.assert_allclose(dirichlet(5, 3.0), 5.0)


def test_dirichlet_nulls_and_values():
    # exact nulls at multiples of 1/L, and a known interior value
    L = 8
    xs = np.arange(1, L) / L
    np.testing.assert_allclose(dirichlet(L, xs), 0.0, atol=1e-9)
    x = 0.3
    assert dirichlet(L, x) == pytest.approx(np.sin(L * np.pi * x) / np.sin(np.pi * x))


def test_dirichlet_periodicity():
    xs = np.linspace(-0.49, 0.49, 21)
    np.testing.assert_allclose(dirichlet(7, xs), dirichlet(7, xs + 1.0), atol=1e-9)


def test_instantaneous_peak_and_modulus(cfg):
    sels = random_selection_sequence(cfg, np.random.default_rng(0))
    chi0 = instantaneous_af(cfg, sels, 0.0, 0.0, 0.0)
    assert chi0 == pytest.approx(cfg.N * cfg.K * cfg.Q_r)
    # |chi| never exceeds the peak
    rng = np.random.default_rng(1)
    offs = rng.uniform(-0.5, 0.5, size=(3, 40))
    vals = np.abs(instantaneous_af(cfg, sels, *offs))
    assert vals.max() <= cfg.N * cfg.K * cfg.Q_r + 1e-9


def test_instantaneous_conjugate_symmetry(cfg):
    sels = random_selection_sequence(cfg, np.random.default_rng(2))
    offs = np.random.default_rng(3).uniform(-0.5, 0.5, size=(3, 16))
    chi_p = instantaneous_af(cfg, sels, *offs)
    chi_m = instantaneous_af(cfg, sels, *(-offs))
    np.testing.assert_allclose(chi_m, chi_p.conj(), atol=1e-9)


def test_expected_af_peak_and_nulls(cfg):
    assert expected_af(cfg, 0.0, 0.0, 0.0) == pytest.approx(cfg.N * cfg.K * cfg.Q_r)
    # first nulls along each axis at 1/M, 1/N, 1/(P*Q_r)
    assert expected_af(cfg, 1.0 / cfg.M, 0.0, 0.0) == pytest.approx(0.0, abs=1e-9)
    assert expected_af(cfg, 0.0, 1.0 / cfg.N, 0.0) == pytest.approx(0.0, abs=1e-9)
    assert expected_af(cfg, 0.0, 0.0, 1.0 / cfg.Q) == pytest.approx(0.0, abs=1e-9)


def test_expected_af_known_value(cfg):
    # separable product at a sixteenth of the range axis
    x = 1.0 / 16.0
    want = (
        (cfg.K / (cfg.M * cfg.P))
        * abs(np.sin(cfg.M * np.pi * x) / np.sin(np.pi * x))
        * cfg.N
        * cfg.Q
    )
    assert expected_af(cfg, x, 0.0, 0.0) == pytest.approx(want)
    assert want == pytest.approx(41.00666, abs=1e-4)


def test_mc_mean_matches_closed_form(cfg):
    rng = np.random.default_rng(10)
    pts = np.linspace(-0.5, 0.5, 17)
    zeros = np.zeros_like(pts)
    got = np.abs(mc_mean_af(cfg, pts, zeros, zeros, n_cpi=3000, rng=rng))
    want = expected_af(cfg, pts, zeros, zeros)
    peak = cfg.N * cfg.K * cfg.Q_r
    assert np.max(np.abs(got - want)) < 0.03 * peak


def test_mc_velocity_axis_is_exact(cfg):
    # selection randomness never enters the velocity axis, so the MC mean
    # matches the closed form to roundoff with any number of draws
    pts = np.linspace(-0.45, 0.45, 9)
    zeros = np.zeros_like(pts)
    got = np.abs(mc_mean_af(cfg, zeros, pts, zeros, n_cpi=3, rng=np.random.default_rng(0)))
    np.testing.assert_allclose(got, expected_af(cfg, zeros, pts, zeros), atol=1e-8)


def test_mc_error_shrinks_with_draws(cfg):
    # sixteen times the draws should cut the range-axis deviation well
    # below half
    pts = np.linspace(-0.45, 0.45, 9)
    zeros = np.zeros_like(pts)
    want = expected_af(cfg, pts, zeros, zeros)

    def dev(n_cpi, seed):
        got = np.abs(
            mc_mean_af(cfg, pts, zeros, zeros, n_cpi=n_cpi, rng=np.random.default_rng(seed))
        )
        return np.sqrt(np.mean((got - want) ** 2))

    coarse = np.mean([dev(250, s) for s in range(4)])
    fine = np.mean([dev(4000, s) for s in range(4)])
    assert fine < coarse / 2.0


def test_mc_chunking_covers_all_draws(cfg):
    # at zero offset every CPI contributes exactly the peak, so any chunk
    # split must average to the peak exactly; a chunk-accounting slip would
    # show up as a scale error
    peak = cfg.N * cfg.K * cfg.Q_r
    for chunk in (64, 7, 1):
        got = mc_mean_af(
            cfg, 0.0, 0.0, 0.0, n_cpi=64, rng=np.random.default_rng(5), chunk=chunk
        )
        assert got == pytest.approx(peak, abs=1e-9)


def test_mc_deterministic_for_fixed_seed(cfg):
    pts = np.linspace(-0.4, 0.4, 5)
    zeros = np.zeros_like(pts)
    a = mc_mean_af(cfg, pts, zeros, zeros, n_cpi=32, rng=np.random.default_rng(5), chunk=8)
    b = mc_mean_af(cfg, pts, zeros, zeros, n_cpi=32, rng=np.random.default_rng(5), chunk=8)
    np.testing.assert_array_equal(a, b)


def test_mean_of_instantaneous_matches_expected(cfg):
    # averaging explicit CPI draws reproduces the closed form, tying the
    # two implementations together
    rng = np.random.default_rng(8)
    pts = np.array([0.05, 0.11, 0.21])
    zeros = np.zeros_like(pts)
    acc = np.zeros(pts.size, dtype=complex)
    n_draws = 1500
    for _ in range(n_draws):
        sels = random_selection_sequence(cfg, rng)
        acc += instantaneous_af(cfg, sels, pts, zeros, zeros)
    got = np.abs(acc / n_draws)
    want = expected_af(cfg, pts, zeros, zeros)
    np.testing.assert_allclose(got, want, atol=0.05 * cfg.N * cfg.K * cfg.Q_r)


def test_resolutions_reference(cfg):
    res = resolutions(cfg)
    assert res.range_m == pytest.approx(1.5)
    assert res.velocity_mps == pytest.approx(cfg.wavelength / (2 * cfg.N * cfg.T_0))
    assert res.angle_deg == pytest.approx(14.4775, abs=1e-3)
