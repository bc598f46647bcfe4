"""Ambiguity function of the index-modulated CPI and derived resolutions.

The instantaneous ambiguity function of one CPI's carrier/antenna draw is

    chi(df_r, df_v, df_t) = sum_{n,k,q_r} exp(-2j pi (m_{n,k} df_r
                              + n df_v + (Q_r p_{n,k} + q_r) df_t))

over normalized frequency offsets.  Averaged over uniform selections its
magnitude factors into three Dirichlet kernels,

    |E chi| = (K / (M P)) |D_M(df_r)| |D_N(df_v)| |D_{P Q_r}(df_t)|,

whose first nulls at 1/M, 1/N and 1/(P Q_r) set the range, velocity and
angle resolutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .im_codec import PulseSelection, selection_arrays

__all__ = [
    "Resolutions",
    "dirichlet",
    "instantaneous_af",
    "expected_af",
    "mc_mean_af",
    "resolutions",
]

# treat |sin(pi x)| below this as the removable singularity of the kernel
_SING_GUARD = 1e-12


@dataclass(frozen=True)
class Resolutions:
    range_m: float
    velocity_mps: float
    angle_rad: float

    @property
    def angle_deg(self) -> float:
        return math.degrees(self.angle_rad)


def dirichlet(L: int, x) -> np.ndarray:
    """Periodic kernel sin(L pi x) / sin(pi x); equals L at integer x."""
    x = np.asarray(x, dtype=float)
    den = np.sin(np.pi * x)
    num = np.sin(L * np.pi * x)
    near = np.abs(den) < _SING_GUARD
    safe = np.where(near, 1.0, den)
    out = np.where(near, float(L), num / safe)
    return out


def instantaneous_af(
    cfg: SystemConfig,
    selections: list[PulseSelection],
    df_r,
    df_v,
    df_t,
) -> np.ndarray:
    """Complex chi of one CPI at broadcastable offset arrays."""
    df_r, df_v, df_t = np.broadcast_arrays(
        np.asarray(df_r, dtype=float),
        np.asarray(df_v, dtype=float),
        np.asarray(df_t, dtype=float),
    )
    shape = df_r.shape
    pts_r, pts_v, pts_t = df_r.reshape(-1), df_v.reshape(-1), df_t.reshape(-1)
    m_idx, p_idx, _ = selection_arrays(selections)          # (N, K)
    n = np.arange(cfg.N)[:, None]
    qr = np.arange(cfg.Q_r)
    # sum over q_r factors out of the (n, k) sum
    qr_factor = np.exp(-2j * np.pi * qr[:, None] * pts_t[None, :]).sum(axis=0)
    phase = (
        m_idx[..., None] * pts_r
        + n[..., None] * pts_v
        + (cfg.Q_r * p_idx[..., None]) * pts_t
    )
    chi = np.exp(-2j * np.pi * phase).sum(axis=(0, 1)) * qr_factor
    return chi.reshape(shape)


def expected_af(cfg: SystemConfig, df_r, df_v, df_t) -> np.ndarray:
    """|E chi| over uniform selections (closed form; peak value N K Q_r)."""
    df_r, df_v, df_t = np.broadcast_arrays(
        np.asarray(df_r, dtype=float),
        np.asarray(df_v, dtype=float),
        np.asarray(df_t, dtype=float),
    )
    val = (
        (cfg.K / (cfg.M * cfg.P))
        * np.abs(dirichlet(cfg.M, df_r))
        * np.abs(dirichlet(cfg.N, df_v))
        * np.abs(dirichlet(cfg.P * cfg.Q_r, df_t))
    )
    return val


def mc_mean_af(
    cfg: SystemConfig,
    df_r,
    df_v,
    df_t,
    n_cpi: int,
    rng: np.random.Generator,
    chunk: int | None = None,
) -> np.ndarray:
    """Complex mean of chi over ``n_cpi`` independent uniform selection draws."""
    df_r, df_v, df_t = np.broadcast_arrays(
        np.asarray(df_r, dtype=float),
        np.asarray(df_v, dtype=float),
        np.asarray(df_t, dtype=float),
    )
    shape = df_r.shape
    pts_r, pts_v, pts_t = df_r.reshape(-1), df_v.reshape(-1), df_t.reshape(-1)
    npts = pts_r.size
    if chunk is None:
        # keep the (chunk, N, K, npts) phase tensor near 256 MB at most
        chunk = max(1, (1 << 24) // max(1, cfg.N * cfg.K * npts))
    n = np.arange(cfg.N)
    qr_factor = np.exp(-2j * np.pi * np.arange(cfg.Q_r)[:, None] * pts_t[None, :]).sum(axis=0)
    n_phase = n[:, None] * pts_v[None, :]                   # (N, npts)

    acc = np.zeros(npts, dtype=np.complex128)
    done = 0
    while done < n_cpi:
        c = min(chunk, n_cpi - done)
        # uniform K-subsets via random-key sort
        m_sel = np.argsort(rng.random((c, cfg.N, cfg.M)), axis=-1)[..., : cfg.K]
        p_sel = np.argsort(rng.random((c, cfg.N, cfg.P)), axis=-1)[..., : cfg.K]
        phase = (
            m_sel[..., None] * pts_r
            + (cfg.Q_r * p_sel[..., None]) * pts_t
            + n_phase[None, :, None, :]
        )
        acc += np.exp(-2j * np.pi * phase).sum(axis=(1, 2)).sum(axis=0)
        done += c
    mean_chi = (acc / n_cpi) * qr_factor
    return mean_chi.reshape(shape)


def resolutions(cfg: SystemConfig) -> Resolutions:
    """First-null widths of the expected ambiguity function, physical units."""
    return Resolutions(
        range_m=cfg.range_resolution,
        velocity_mps=cfg.velocity_resolution,
        angle_rad=cfg.angle_resolution,
    )
