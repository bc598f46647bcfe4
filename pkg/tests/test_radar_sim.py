"""Echo synthesis: the two generation paths, noise bookkeeping, cube files."""

import numpy as np
import pytest

from frac.config import reference_config
from frac.im_codec import random_selection_sequence
from frac.radar_sim import (
    Target,
    cell_center,
    cell_index,
    extract_cell,
    load_cube,
    pulse_compress,
    save_cube,
    sigma_for_snr,
    simulate_cell_direct,
    simulate_fast_time,
    unit_echo_alpha,
    validate_target,
)


@pytest.fixture(scope="module")
def cfg():
    return reference_config(K=2)


@pytest.fixture(scope="module")
def selections(cfg):
    return random_selection_sequence(cfg, np.random.default_rng(42))


def _grid_scene(cfg):
    """Three scatterers at the center of cell 2, on the fine grids."""
    lam = cfg.wavelength
    dv = lam / (2.0 * cfg.N * cfg.T_0)
    dsin = lam / (cfg.Q * cfg.d_r)
    g = 2
    r0 = cell_center(g, cfg)
    return [
        Target(r=r0, v=0.0, theta=0.0, alpha=0.7 - 0.2j),
        Target(r=r0, v=3.0 * dv, theta=np.arcsin(2.0 * dsin), alpha=0.5j),
        Target(r=r0, v=-2.0 * dv, theta=np.arcsin(-dsin), alpha=1.0),
    ], g


def test_cell_index_rounding(cfg):
    w = cfg.coarse_cell_width
    assert cell_index(0.0, cfg) == 0
    assert cell_index(0.49 * w, cfg) == 0
    assert cell_index(0.51 * w, cfg) == 1
    assert cell_index(3.0 * w, cfg) == 3
    assert cell_center(3, cfg) == pytest.approx(3.0 * w)


def test_validate_target(cfg):
    with pytest.raises(ValueError):
        validate_target(Target(r=-1.0, v=0, theta=0), cfg)
    with pytest.raises(ValueError):
        validate_target(Target(r=cfg.range_max + 1, v=0, theta=0), cfg)
    v_unamb = cfg.wavelength / (4 * cfg.T_0)
    with pytest.warns(UserWarning):
        validate_target(Target(r=10.0, v=1.5 * v_unamb, theta=0), cfg)


def test_paths_agree_noiseless(cfg, selections):
    scene, g = _grid_scene(cfg)
    cube = simulate_fast_time(scene, selections, cfg, sigma_r=0.0)
    snap_a = extract_cell(pulse_compress(cube), g)
    snap_b = simulate_cell_direct(scene, selections, cfg, sigma_r=0.0, g=g)
    scale = np.abs(snap_b.data).max()
    np.testing.assert_allclose(snap_a.data, snap_b.data, atol=1e-10 * scale)


def test_off_center_range_leaks_by_dirichlet_factor(cfg, selections):
    # off the coarse center the beat tone is off-bin: the compressed cell
    # equals the idealized direct snapshot times the Dirichlet leak factor
    delta_r = 0.5 * cfg.range_resolution
    scene = [Target(r=cell_center(1, cfg) + delta_r, v=0, theta=0)]
    g = cell_index(scene[0].r, cfg)
    cube = simulate_fast_time(scene, selections, cfg, sigma_r=0.0)
    snap_a = extract_cell(pulse_compress(cube), g)
    snap_b = simulate_cell_direct(scene, selections, cfg, sigma_r=0.0, g=g)
    delta = delta_r / cfg.coarse_cell_width
    leak = np.exp(-2j * np.pi * delta * np.arange(cfg.G) / cfg.G).sum() / cfg.G
    np.testing.assert_allclose(snap_a.data, snap_b.data * leak, atol=1e-10)


def test_unit_echo_alpha(cfg, selections):
    r = cell_center(3, cfg)
    scene = [Target(r=r, v=0.0, theta=0.0, alpha=unit_echo_alpha(r, 0.3, cfg))]
    snap = simulate_cell_direct(scene, selections, cfg, sigma_r=0.0, g=3)
    # zero velocity/angle at the cell center leaves a constant snapshot
    np.testing.assert_allclose(snap.data, np.exp(0.3j), atol=1e-12)


def test_pulse_compression_gain(cfg, selections):
    scene = [Target(r=cell_center(2, cfg), v=0.0, theta=0.0)]
    cube = simulate_fast_time(scene, selections, cfg, sigma_r=0.0)
    crrp = pulse_compress(cube)
    peak = np.abs(crrp.data[0, 0, 0, :])
    assert peak[2] == pytest.approx(cfg.G * abs(scene[0].alpha), rel=1e-12)
    mask = np.ones(cfg.G, dtype=bool)
    mask[2] = False
    assert peak[mask].max() < 1e-9 * peak[2]


def test_noise_variance_cell_domain(cfg, selections):
    sigma = 2.0
    rng = np.random.default_rng(1)
    cube = simulate_fast_time([], selections, cfg, sigma_r=sigma, rng=rng)
    crrp = pulse_compress(cube)
    var = np.var(crrp.data)
    assert var == pytest.approx(sigma**2, rel=0.05)
    # sample-domain injection leaves variance sigma^2 before compression
    cube2 = simulate_fast_time(
        [], selections, cfg, sigma_r=sigma, rng=rng, noise_at="sample"
    )
    assert np.var(cube2.data) == pytest.approx(sigma**2, rel=0.05)


def test_direct_noise_variance(cfg, selections):
    sigma = 0.5
    snap = simulate_cell_direct(
        [], selections, cfg, sigma_r=sigma, rng=np.random.default_rng(2), g=0
    )
    assert np.var(snap.data) == pytest.approx(sigma**2, rel=0.1)


def test_sigma_for_snr(cfg):
    sigma = sigma_for_snr(cfg, 10.0)
    lin = cfg.N * cfg.K * cfg.Q_r / sigma**2
    assert 10 * np.log10(lin) == pytest.approx(10.0)


def test_noise_requires_rng(cfg, selections):
    with pytest.raises(ValueError):
        simulate_fast_time([], selections, cfg, sigma_r=1.0)
    with pytest.raises(ValueError):
        simulate_cell_direct([], selections, cfg, sigma_r=1.0, g=0)


def test_direct_rejects_wrong_cell(cfg, selections):
    scene = [Target(r=cell_center(2, cfg), v=0, theta=0)]
    with pytest.raises(ValueError):
        simulate_cell_direct(scene, selections, cfg, sigma_r=0.0, g=5)
    with pytest.raises(ValueError):
        simulate_cell_direct([], selections, cfg, sigma_r=0.0)


def test_selection_count_checked(cfg, selections):
    with pytest.raises(ValueError):
        simulate_fast_time([], selections[:-1], cfg, sigma_r=0.0)


def test_snapshot_flatten_order(cfg, selections):
    snap = simulate_cell_direct(
        _grid_scene(cfg)[0], selections, cfg, sigma_r=0.0, g=2
    )
    flat = snap.flatten()
    n, k, q = 5, 1, 1
    assert flat[n * cfg.K * cfg.Q_r + k * cfg.Q_r + q] == snap.data[n, k, q]


def test_cube_save_load_round_trip(cfg, selections, tmp_path):
    scene, g = _grid_scene(cfg)
    cube = simulate_fast_time(
        scene, selections, cfg, sigma_r=0.1, rng=np.random.default_rng(9)
    )
    path = tmp_path / "cube.frc"
    save_cube(path, cube)
    back = load_cube(path)
    assert type(back).__name__ == "FastTimeCube"
    np.testing.assert_array_equal(back.data, cube.data)
    assert back.cfg == cfg
    assert back.selections == cube.selections
    assert back.sigma_r == cube.sigma_r

    crrp = pulse_compress(cube)
    path2 = tmp_path / "crrp.frc"
    save_cube(path2, crrp)
    back2 = load_cube(path2)
    assert type(back2).__name__ == "CrrpCube"
    np.testing.assert_array_equal(back2.data, crrp.data)


def test_cube_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.frc"
    path.write_bytes(b"not a cube at all")
    with pytest.raises(ValueError):
        load_cube(path)
