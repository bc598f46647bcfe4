"""Radar echo synthesis for the FMCW index-modulation transmitter.

Two generation paths are provided and agree exactly for scenes whose ranges
sit at coarse-cell centers:

* :func:`simulate_fast_time` builds the de-chirped fast-time cube sample by
  sample and :func:`pulse_compress` integrates it into coarse range cells
  with an (unnormalized) inverse DFT;
* :func:`simulate_cell_direct` writes the post-compression snapshot of one
  coarse cell directly.

Fast-time samples are placed at multiples of T_p / G (the G ADC samples span
the chirp), so a scatterer at the center of cell g lands exactly on IDFT bin
g for every g; off-center ranges straddle bins and leak, which is physical.

Noise convention: ``sigma_r`` is the per-sample noise standard deviation in
the pulse-compressed (cell) domain.  ``simulate_fast_time`` therefore injects
variance sigma_r**2 / G per fast-time sample by default, since the
unnormalized IDFT scales noise variance by G; pass ``noise_at="sample"`` to
inject sigma_r**2 at the fast-time samples instead.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .im_codec import PulseSelection, selection_arrays

__all__ = [
    "Target",
    "FastTimeCube",
    "CrrpCube",
    "CellSnapshot",
    "cell_index",
    "cell_center",
    "validate_target",
    "unit_echo_alpha",
    "sigma_for_snr",
    "simulate_fast_time",
    "pulse_compress",
    "extract_cell",
    "simulate_cell_direct",
    "save_cube",
    "load_cube",
]

_CUBE_MAGIC = b"FRACCUBE"


@dataclass(frozen=True)
class Target:
    """Point scatterer: range [m], radial velocity [m/s], azimuth [rad]."""

    r: float
    v: float
    theta: float
    alpha: complex = 1.0 + 0.0j


@dataclass(frozen=True)
class FastTimeCube:
    """De-chirped samples, shape (N, K, Q_r, G)."""

    data: np.ndarray
    selections: tuple[PulseSelection, ...]
    cfg: SystemConfig
    sigma_r: float


@dataclass(frozen=True)
class CrrpCube:
    """Pulse-compressed samples, shape (N, K, Q_r, G); last axis is the coarse cell."""

    data: np.ndarray
    selections: tuple[PulseSelection, ...]
    cfg: SystemConfig
    sigma_r: float


@dataclass(frozen=True)
class CellSnapshot:
    """One coarse cell's slow-time/carrier/receiver snapshot, shape (N, K, Q_r)."""

    data: np.ndarray
    g: int
    selections: tuple[PulseSelection, ...]
    cfg: SystemConfig
    sigma_r: float

    def flatten(self) -> np.ndarray:
        """Row-major vector, index n*K*Q_r + k*Q_r + q_r."""
        return self.data.reshape(-1)


def cell_index(r: float, cfg: SystemConfig) -> int:
    """Coarse cell containing range r: nearest multiple of c/(2 delta_f)."""
    return int(np.floor(r / cfg.coarse_cell_width + 0.5))

def cell_center(g: int, cfg: SystemConfig) -> float:
    return g * cfg.coarse_cell_width

def validate_target(t: Target, cfg: SystemConfig) -> None:
    """Range must lie in [0, r_max); model-assumption strains only warn."""
    if not 0.0 <= t.r < cfg.range_max:
        raise ValueError(
            f"target range {t.r} m outside [0, {cfg.range_max:.6g}) m"
        )
    v_unamb = cfg.wavelength / (4.0 * cfg.T_0)
    if abs(t.v) > v_unamb:
        warnings.warn(
            f"velocity {t.v} m/s beyond the unambiguous span +-{v_unamb:.4g} m/s; "
            "the echo aliases in Doppler",
            stacklevel=2,
        )
    # range migration over the CPI should stay far below a coarse cell
    if abs(t.v) * cfg.N * cfg.T_0 > 0.05 * cfg.coarse_cell_width:
        warnings.warn(
            f"target moves {abs(t.v) * cfg.N * cfg.T_0:.4g} m within one CPI, "
            "straining the stationary-envelope assumption",
            stacklevel=2,
        )

def sigma_for_snr(cfg: SystemConfig, snr_db: float) -> float:
    """Cell-domain noise std for a radar SNR of N*K*Q_r / sigma**2."""
    return float(np.sqrt(cfg.N * cfg.K * cfg.Q_r / 10.0 ** (snr_db / 10.0)))

def unit_echo_alpha(r: float, phase: float, cfg: SystemConfig) -> complex:
    """Reflectivity whose post-compression amplitude is exactly exp(1j*phase).

    Pulse compression gains G and the two-way carrier phase rotates by
    -4*pi*r*f_c/c, so this pre-compensates both.
    """
    return np.exp(1j * (phase + 4.0 * np.pi * r * cfg.f_c / cfg.c)) / cfg.G


def _target_phase_terms(t: Target, cfg: SystemConfig):
    """(alpha_tilde, f_r_full, f_v, f_theta) for one scatterer.

    f_r_full = 2 r delta_f / c is the per-carrier range frequency before the
    integer cell part is stripped; f_v and f_theta are the slow-time and
    virtual-array frequencies.
    """
    alpha_tilde = t.alpha * np.exp(-4j * np.pi * t.r * cfg.f_c / cfg.c)
    f_r_full = 2.0 * t.r * cfg.delta_f / cfg.c
    f_v = 2.0 * t.v * cfg.T_0 * cfg.f_c / cfg.c
    f_theta = cfg.f_c * cfg.d_r * np.sin(t.theta) / cfg.c
    return alpha_tilde, f_r_full, f_v, f_theta


def simulate_fast_time(
    scene: list[Target],
    selections: list[PulseSelection],
    cfg: SystemConfig,
    sigma_r: float,
    rng: np.random.Generator | None = None,
    noise_at: str = "cell",
) -> FastTimeCube:
    """De-chirped fast-time cube (N, K, Q_r, G) for a scene."""
    if noise_at not in ("cell", "sample"):
        raise ValueError(f"noise_at must be 'cell' or 'sample', got {noise_at!r}")
    if len(selections) != cfg.N:
        raise ValueError(f"need {cfg.N} selections, got {len(selections)}")
    for t in scene:
        validate_target(t, cfg)
    m_idx, p_idx, _ = selection_arrays(selections)
    xi = (cfg.f_c + m_idx * cfg.delta_f) / cfg.f_c      # (N, K)
    n = np.arange(cfg.N)[:, None, None, None]
    qr = np.arange(cfg.Q_r)[None, None, :, None]
    gt = np.arange(cfg.G)[None, None, None, :]
    m_b = m_idx[:, :, None, None]
    xi_b = xi[:, :, None, None]
    virt = cfg.Q_r * p_idx[:, :, None, None] + qr       # virtual element index

    data = np.zeros((cfg.N, cfg.K, cfg.Q_r, cfg.G), dtype=np.complex128)
    for t in scene:
        alpha_tilde, f_r_full, f_v, f_theta = _target_phase_terms(t, cfg)
        # beat tone 2*kappa*r*T_fast/c = f_r_full/G, since kappa*T_p = delta_f
        phase = (
            f_r_full / cfg.G * gt
            + m_b * f_r_full
            + xi_b * (f_v * n + f_theta * virt)
        )
        data += alpha_tilde * np.exp(-2j * np.pi * phase)
    if sigma_r > 0.0:
        if rng is None:
            raise ValueError("rng is required when sigma_r > 0")
        var = sigma_r**2 / cfg.G if noise_at == "cell" else sigma_r**2
        scale = np.sqrt(var / 2.0)
        data += scale * (
            rng.standard_normal(data.shape) + 1j * rng.standard_normal(data.shape)
        )
    return FastTimeCube(data=data, selections=tuple(selections), cfg=cfg, sigma_r=sigma_r)


def pulse_compress(cube: FastTimeCube) -> CrrpCube:
    """Unnormalized IDFT over fast time: y[g] = sum_gt ytilde[gt] e^{+2j pi gt g / G}."""
    data = cube.cfg.G * np.fft.ifft(cube.data, axis=-1)
    return CrrpCube(
        data=data, selections=cube.selections, cfg=cube.cfg, sigma_r=cube.sigma_r
    )


def extract_cell(crrp: CrrpCube, g: int) -> CellSnapshot:
    if not 0 <= g < crrp.cfg.G:
        raise ValueError(f"cell {g} out of range(0, {crrp.cfg.G})")
    return CellSnapshot(
        data=np.ascontiguousarray(crrp.data[..., g]),
        g=g,
        selections=crrp.selections,
        cfg=crrp.cfg,
        sigma_r=crrp.sigma_r,
    )


def simulate_cell_direct(
    scene: list[Target],
    selections: list[PulseSelection],
    cfg: SystemConfig,
    sigma_r: float,
    rng: np.random.Generator | None = None,
    g: int | None = None,
    exact_xi: bool = True,
) -> CellSnapshot:
    """Post-compression snapshot of one coarse cell, written directly.

    Every target must fall in cell ``g`` (defaults to the cell of the first
    target).  ``exact_xi=False`` freezes the carrier ratio at 1, matching the
    narrowband dictionary variant; the default keeps the exact per-carrier
    ratio the fast-time chain produces.
    """
    if g is None:
        if not scene:
            raise ValueError("g is required for an empty scene")
        g = cell_index(scene[0].r, cfg)
    if not 0 <= g < cfg.G:
        raise ValueError(f"cell {g} out of range(0, {cfg.G})")
    if len(selections) != cfg.N:
        raise ValueError(f"need {cfg.N} selections, got {len(selections)}")
    m_idx, p_idx, _ = selection_arrays(selections)
    if exact_xi:
        xi = (cfg.f_c + m_idx * cfg.delta_f) / cfg.f_c
    else:
        xi = np.ones_like(m_idx, dtype=float)
    n = np.arange(cfg.N)[:, None, None]
    qr = np.arange(cfg.Q_r)[None, None, :]
    m_b = m_idx[:, :, None]
    xi_b = xi[:, :, None]
    virt = cfg.Q_r * p_idx[:, :, None] + qr

    data = np.zeros((cfg.N, cfg.K, cfg.Q_r), dtype=np.complex128)
    for t in scene:
        validate_target(t, cfg)
        if cell_index(t.r, cfg) != g:
            raise ValueError(
                f"target at {t.r} m falls in cell {cell_index(t.r, cfg)}, not {g}"
            )
        alpha_tilde, f_r_full, f_v, f_theta = _target_phase_terms(t, cfg)
        beta = cfg.G * alpha_tilde
        delta_r = t.r - cell_center(g, cfg)
        f_r = 2.0 * delta_r * cfg.delta_f / cfg.c
        phase = m_b * f_r + xi_b * (f_v * n + f_theta * virt)
        data += beta * np.exp(-2j * np.pi * phase)
    if sigma_r > 0.0:
        if rng is None:
            raise ValueError("rng is required when sigma_r > 0")
        scale = sigma_r / np.sqrt(2.0)
        data += scale * (
            rng.standard_normal(data.shape) + 1j * rng.standard_normal(data.shape)
        )
    return CellSnapshot(
        data=data, g=g, selections=tuple(selections), cfg=cfg, sigma_r=sigma_r
    )


# ----------------------------------------------------------------------
# cube files: 8-byte magic, uint64 header length, JSON header, then the
# samples as little-endian float64 pairs (re, im) in C order
# ----------------------------------------------------------------------

def save_cube(path, cube: FastTimeCube | CrrpCube) -> None:
    kind = "fast_time" if isinstance(cube, FastTimeCube) else "crrp"
    header = {
        "kind": kind,
        "dims": list(cube.data.shape),
        "config_hash": cube.cfg.config_hash(),
        "sigma_r": cube.sigma_r,
        "config": cube.cfg.to_dict(),
        "selections": [
            {"carriers": list(s.carriers), "antennas": list(s.antennas),
             "phases": list(s.phases)}
            for s in cube.selections
        ],
    }
    blob = json.dumps(header).encode()
    flat = np.empty(cube.data.size * 2, dtype="<f8")
    flat[0::2] = cube.data.real.reshape(-1)
    flat[1::2] = cube.data.imag.reshape(-1)
    with open(path, "wb") as fh:
        fh.write(_CUBE_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(flat.tobytes())

def load_cube(path) -> FastTimeCube | CrrpCube:
    with open(path, "rb") as fh:
        if fh.read(len(_CUBE_MAGIC)) != _CUBE_MAGIC:
            raise ValueError(f"{path} is not a cube file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen))
        payload = np.frombuffer(fh.read(), dtype="<f8")
    dims = tuple(header["dims"])
    data = (payload[0::2] + 1j * payload[1::2]).reshape(dims)
    cfg = SystemConfig.from_dict(header["config"])
    if cfg.config_hash() != header["config_hash"]:
        raise ValueError(f"{path}: config hash mismatch")
    selections = tuple(
        PulseSelection(
            carriers=tuple(s["carriers"]),
            antennas=tuple(s["antennas"]),
            phases=tuple(s["phases"]),
        )
        for s in header["selections"]
    )
    cls = FastTimeCube if header["kind"] == "fast_time" else CrrpCube
    return cls(data=data, selections=selections, cfg=cfg, sigma_r=header["sigma_r"])
