"""Batch experiment drivers behind the command-line interface.

Every run is deterministic for a given seed: trial t draws from
``np.random.default_rng([seed, tag, t])`` where the tag separates
experiments, so results do not depend on worker count or chunking.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import comm, phase_transition
from .ambiguity import expected_af, mc_mean_af
from .config import SystemConfig
from .im_codec import random_selection_sequence
from .radar_recovery import (
    NonConvergenceError,
    build_dictionary,
    bp_recover,
    default_bp_eps,
    grid_to_physical,
    omp_recover,
    physical_to_grid,
    recovered_targets,
)
from .radar_sim import (
    Target,
    cell_index,
    extract_cell,
    pulse_compress,
    sigma_for_snr,
    simulate_cell_direct,
    simulate_fast_time,
    unit_echo_alpha,
)

__all__ = [
    "HitRatePoint",
    "parse_range",
    "parse_variants",
    "reference_scene",
    "snap_to_grid",
    "run_hit_rate",
    "run_recovery_map",
    "run_ambiguity",
    "run_phase_transition_theory",
    "run_phase_transition_empirical",
    "run_comm_ber",
    "run_comm_rate",
    "resolution_report",
    "hw_report",
]

_TAG_HIT = 101
_TAG_MAP = 211


@dataclass(frozen=True)
class HitRatePoint:
    snr_db: float
    trials: int
    hits: int
    hit_rate: float
    ci_low: float
    ci_high: float


def parse_range(text: str) -> list[float]:
    """SNR grids: 'start:step:stop' (inclusive stop) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range syntax is start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ValueError(f"range step must be positive, got {step}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        if n < 1:
            raise ValueError(f"empty range {text!r}")
        return [start + i * step for i in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


def parse_variants(cfg: SystemConfig, text: str) -> list[tuple[str, SystemConfig]]:
    """Comma list of 'base' or 'FIELD=INT' entries into labeled configs."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if item == "base":
            out.append(("base", cfg))
            continue
        if "=" not in item:
            raise ValueError(f"variant must be 'base' or FIELD=VALUE, got {item!r}")
        field, val = item.split("=", 1)
        field = field.strip()
        if field not in ("N", "M", "K", "P", "Q_r", "Q_c", "J", "n_taps"):
            raise ValueError(f"variant field {field!r} is not an integer count")
        out.append((item, cfg.replace(**{field: int(val)})))
    return out


def snap_to_grid(r: float, v: float, theta: float, cfg: SystemConfig) -> tuple[float, float, float]:
    """Physical triple of the nearest recovery grid point."""
    g, n_tilde, m, q = physical_to_grid(r, v, theta, cfg)
    flat = (n_tilde * cfg.M + m) * cfg.Q + q
    return grid_to_physical(flat, g, cfg)


def reference_scene(cfg: SystemConfig) -> list[Target]:
    """Three-scatterer benchmark scene, snapped to the recovery grid.

    Two targets share range and velocity one angle-resolution cell apart; the
    third sits in the next coarse range cell.  Unit amplitudes are
    pre-compensated so recovered gains are exactly 1.
    """
    theta3 = cfg.angle_resolution
    triples = [
        (4.5, 1.0, 0.0),
        (4.5, 1.0, theta3),
        (6.0, 2.0, theta3),
    ]
    out = []
    for r, v, theta in triples:
        rs, vs, ts = snap_to_grid(r, v, theta, cfg)
        out.append(Target(r=rs, v=vs, theta=ts, alpha=unit_echo_alpha(rs, 0.0, cfg)))
    return out


def _scene_truth(scene: list[Target], cfg: SystemConfig) -> dict[int, set[int]]:
    """Flat grid indices of a scene grouped by coarse cell."""
    truth: dict[int, set[int]] = {}
    for t in scene:
        g, n_tilde, m, q = physical_to_grid(t.r, t.v, t.theta, cfg)
        truth.setdefault(g, set()).add((n_tilde * cfg.M + m) * cfg.Q + q)
    return truth


def _random_grid_scene(
    cfg: SystemConfig, n_targets: int, rng: np.random.Generator, cell: int = 1
) -> list[Target]:
    """Distinct on-grid targets in one coarse cell with random phases.

    Cell 1 keeps every fine-range offset at a positive absolute range for
    any configuration.
    """
    n_cols = cfg.N * cfg.M * cfg.Q
    flats = rng.choice(n_cols, size=n_targets, replace=False)
    out = []
    for flat in flats:
        r, v, theta = grid_to_physical(int(flat), cell, cfg)
        phase = 2.0 * np.pi * rng.random()
        out.append(Target(r=r, v=v, theta=theta, alpha=unit_echo_alpha(r, phase, cfg)))
    return out


def _hit_rate_chunk(args) -> np.ndarray:
    (cfg_dict, snr_db_list, trial_lo, trial_hi, seed, scene_mode, n_targets, solver) = args
    cfg = SystemConfig.from_dict(cfg_dict)
    fixed_scene = reference_scene(cfg) if scene_mode == "fixed" else None
    hits = np.zeros(len(snr_db_list), dtype=np.int64)
    for trial in range(trial_lo, trial_hi):
        rng = np.random.default_rng([seed, _TAG_HIT, trial])
        selections = random_selection_sequence(cfg, rng)
        scene = fixed_scene if fixed_scene is not None else _random_grid_scene(cfg, n_targets, rng)
        truth = _scene_truth(scene, cfg)
        dic = build_dictionary(selections, cfg)
        per_cell = []
        for g, flats in sorted(truth.items()):
            cell_scene = [t for t in scene if cell_index(t.r, cfg) == g]
            clean = simulate_cell_direct(cell_scene, selections, cfg, 0.0, g=g)
            noise = (
                rng.standard_normal(clean.data.shape)
                + 1j * rng.standard_normal(clean.data.shape)
            ) / math.sqrt(2.0)
            per_cell.append((g, flats, clean.data, noise, len(cell_scene)))
        for si, snr in enumerate(snr_db_list):
            sigma = sigma_for_snr(cfg, snr)
            ok = True
            for g, flats, clean, noise, count in per_cell:
                y = (clean + sigma * noise).reshape(-1)
                try:
                    if solver == "omp":
                        sol = omp_recover(y, dic, n_targets=count)
                        found = set(sol.support)
                    else:
                        sol = bp_recover(y, dic, eps=default_bp_eps(cfg, sigma))
                        top = np.argsort(-np.abs(sol.dense()))[:count]
                        found = set(int(i) for i in top)
                except NonConvergenceError:
                    found = set()
                if found != flats:
                    ok = False
                    break
            hits[si] += ok
    return hits


def _wilson(hits: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def run_hit_rate(
    cfg: SystemConfig,
    snr_db_list,
    trials: int,
    seed: int = 0,
    scene_mode: str = "fixed",
    n_targets: int = 3,
    solver: str = "omp",
    workers: int = 1,
) -> list[HitRatePoint]:
    """Exact grid-triple recovery probability per SNR.

    A trial is a hit only when every scatterer's (velocity, range, angle)
    grid triple is recovered in its coarse cell.  Selections, scene and noise
    shape are drawn once per trial and shared across the SNR grid.
    """
    if scene_mode not in ("fixed", "random"):
        raise ValueError(f"scene_mode must be 'fixed' or 'random', got {scene_mode!r}")
    if solver not in ("omp", "bp"):
        raise ValueError(f"solver must be 'omp' or 'bp', got {solver!r}")
    snr_db_list = [float(s) for s in snr_db_list]
    chunks = _chunk_args(trials, workers)
    jobs = [
        (cfg.to_dict(), snr_db_list, lo, hi, seed, scene_mode, n_targets, solver)
        for lo, hi in chunks
    ]
    if len(jobs) == 1:
        parts = [_hit_rate_chunk(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_hit_rate_chunk, jobs))
    hits = np.sum(parts, axis=0)
    out = []
    for si, snr in enumerate(snr_db_list):
        lo, hi = _wilson(int(hits[si]), trials)
        out.append(
            HitRatePoint(
                snr_db=snr,
                trials=trials,
                hits=int(hits[si]),
                hit_rate=hits[si] / trials,
                ci_low=lo,
                ci_high=hi,
            )
        )
    return out


def _chunk_args(trials: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, int(workers))
    if workers == 1 or trials <= workers:
        return [(0, trials)]
    size = (trials + workers - 1) // workers
    return [(lo, min(lo + size, trials)) for lo in range(0, trials, size)]


def run_recovery_map(
    cfg: SystemConfig,
    scene: list[Target],
    snr_db: float | None = None,
    solver: str = "omp",
    seed: int = 0,
    full_chain: bool = True,
    dump_cube_path=None,
):
    """Recover a scene once; returns (true_rows, recovered_rows) in physical units."""
    rng = np.random.default_rng([seed, _TAG_MAP])
    selections = random_selection_sequence(cfg, rng)
    sigma = 0.0 if snr_db is None else sigma_for_snr(cfg, snr_db)
    cells: dict[int, list[Target]] = {}
    for t in scene:
        cells.setdefault(cell_index(t.r, cfg), []).append(t)

    snapshots = {}
    if full_chain:
        cube = simulate_fast_time(scene, selections, cfg, sigma, rng)
        if dump_cube_path is not None:
            from .radar_sim import save_cube

            save_cube(dump_cube_path, cube)
        crrp = pulse_compress(cube)
        for g in cells:
            snapshots[g] = extract_cell(crrp, g)
    else:
        for g, cell_scene in cells.items():
            snapshots[g] = simulate_cell_direct(cell_scene, selections, cfg, sigma, rng, g=g)

    dic = build_dictionary(selections, cfg)
    recovered = []
    for g in sorted(cells):
        y = snapshots[g].flatten()
        if solver == "omp":
            sol = omp_recover(y, dic, n_targets=len(cells[g]))
        elif solver == "bp":
            sol = bp_recover(y, dic, eps=default_bp_eps(cfg, sigma))
        else:
            raise ValueError(f"solver must be 'omp' or 'bp', got {solver!r}")
        recovered.extend(recovered_targets(sol, g, dic))

    true_rows = [
        {
            "kind": "true",
            "r_m": t.r,
            "v_mps": t.v,
            "theta_deg": math.degrees(t.theta),
            "amp": abs(t.alpha),
            "phase_rad": float(np.angle(t.alpha)),
            "cell": cell_index(t.r, cfg),
            "flat_index": "",
        }
        for t in scene
    ]
    rec_rows = [
        {
            "kind": "recovered",
            "r_m": rt.r,
            "v_mps": rt.v,
            "theta_deg": math.degrees(rt.theta),
            "amp": abs(rt.beta),
            "phase_rad": float(np.angle(rt.beta)),
            "cell": rt.cell,
            "flat_index": rt.flat_index,
        }
        for rt in recovered
    ]
    return true_rows, rec_rows


def run_ambiguity(
    cfg: SystemConfig,
    axis: str = "range",
    points: int = 129,
    extent: float = 1.0,
    mc_cpis: int = 0,
    seed: int = 0,
) -> list[dict]:
    """Expected ambiguity cut (and optional Monte Carlo mean) along one axis
    or over a two-axis plane, in normalized frequency offsets."""
    axes = {"range": 0, "velocity": 1, "angle": 2}
    offs = np.linspace(-extent / 2.0, extent / 2.0, points)
    if axis in axes:
        grid = [np.zeros(points)] * 3
        grid[axes[axis]] = offs
        queries = np.stack(np.broadcast_arrays(*grid), axis=0)
    else:
        try:
            a1, a2 = axis.split("-")
            i1, i2 = axes[a1], axes[a2]
        except (ValueError, KeyError):
            raise ValueError(
                f"axis must be one of {list(axes)} or a pair like 'range-velocity', got {axis!r}"
            ) from None
        g1, g2 = np.meshgrid(offs, offs, indexing="ij")
        grid = [np.zeros_like(g1)] * 3
        grid[i1] = g1
        grid[i2] = g2
        queries = np.stack(grid, axis=0)
    af = expected_af(cfg, *queries)
    mc = None
    if mc_cpis > 0:
        rng = np.random.default_rng([seed, 307])
        mc = np.abs(mc_mean_af(cfg, *queries, n_cpi=mc_cpis, rng=rng))
    rows = []
    flat = [q.reshape(-1) for q in queries]
    af_f = af.reshape(-1)
    mc_f = mc.reshape(-1) if mc is not None else None
    for i in range(af_f.size):
        row = {
            "df_range": flat[0][i],
            "df_velocity": flat[1][i],
            "df_angle": flat[2][i],
            "af_expected": af_f[i],
        }
        if mc_f is not None:
            row["af_mc"] = mc_f[i]
        rows.append(row)
    return rows


def run_phase_transition_theory(
    cfg: SystemConfig, variants: list[tuple[str, SystemConfig]]
) -> list[dict]:
    rows = []
    for name, vcfg in variants:
        n1 = vcfg.N * vcfg.K * vcfg.Q_r
        n2 = vcfg.N * vcfg.M * vcfg.P * vcfg.Q_r
        sol = phase_transition.solve_threshold(n1, n2)
        apx = phase_transition.approx_threshold(n1, n2)
        rows.append(
            {
                "variant": name,
                "n1": n1,
                "n2": n2,
                "l_star": sol.l_star,
                "beta_star": sol.beta_star,
                "l_star_approx": apx.l_star,
            }
        )
    return rows


def _pt_chunk(args) -> int:
    cfg_dict, l_sparse, trial_lo, trial_hi, seed = args
    cfg = SystemConfig.from_dict(cfg_dict)
    ok = 0
    for trial in range(trial_lo, trial_hi):
        rng = np.random.default_rng([seed, int(l_sparse), trial])
        ok += phase_transition.recovery_trial(cfg, int(l_sparse), rng)
    return ok


def run_phase_transition_empirical(
    cfg: SystemConfig,
    l_values: list[int],
    trials: int,
    seed: int = 0,
    workers: int = 1,
) -> tuple[list[dict], float]:
    """Empirical success curve and its 0.6 crossing (matches the per-trial
    seeding of :func:`frac.phase_transition.empirical_transition`)."""
    rows = []
    succ = []
    for l_sparse in l_values:
        jobs = [
            (cfg.to_dict(), int(l_sparse), lo, hi, seed)
            for lo, hi in _chunk_args(trials, workers)
        ]
        if len(jobs) == 1:
            parts = [_pt_chunk(jobs[0])]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_pt_chunk, jobs))
        ok = int(sum(parts))
        succ.append(ok / trials)
        rows.append(
            {
                "l_sparse": int(l_sparse),
                "trials": trials,
                "successes": ok,
                "success_rate": ok / trials,
            }
        )
    curve = phase_transition.PtCurve(
        l_values=tuple(int(l) for l in l_values), success=tuple(succ), trials=trials
    )
    return rows, phase_transition.crossing(curve)


def _psk_baseline(cfg: SystemConfig, order: int) -> SystemConfig:
    """Single-waveform wideband PM baseline: one carrier spanning B, one element."""
    return cfg.replace(M=1, P=1, K=1, J=order)


def run_comm_ber(
    cfg: SystemConfig,
    snr_db_list,
    channels: int,
    draws: int,
    schemes=("frac-ml", "frac-sod", "psk64-ml"),
    seed: int = 0,
) -> list[comm.BerPoint]:
    out: list[comm.BerPoint] = []
    frac_decoders = tuple(
        s.split("-", 1)[1] for s in schemes if s.startswith("frac-")
    )
    if frac_decoders:
        out.extend(
            comm.ber_curve(
                cfg, snr_db_list, channels, draws,
                decoders=frac_decoders, seed=seed, scheme_prefix="frac",
            )
        )
    for s in schemes:
        if s.startswith("psk"):
            name, dec = s.split("-", 1)
            order = int(name[3:])
            out.extend(
                comm.ber_curve(
                    _psk_baseline(cfg, order), snr_db_list, channels, draws,
                    decoders=(dec,), seed=seed, scheme_prefix=name,
                )
            )
    return out


def run_comm_rate(
    cfg: SystemConfig,
    snr_db_list,
    channels: int,
    draws: int,
    schemes=("frac-j2", "frac-j4"),
    seed: int = 0,
) -> list[comm.RatePoint]:
    out: list[comm.RatePoint] = []
    for s in schemes:
        if s.startswith("frac-j"):
            order = int(s.split("frac-j", 1)[1])
            scfg = cfg.replace(J=order)
        elif s.startswith("psk"):
            order = int(s[3:])
            scfg = _psk_baseline(cfg, order)
        else:
            raise ValueError(f"unknown rate scheme {s!r}")
        out.extend(comm.rate_curve(scfg, snr_db_list, channels, draws, seed=seed, scheme=s))
    return out


def resolution_report(cfg: SystemConfig) -> list[dict]:
    return [
        {
            "range_resolution_m": cfg.range_resolution,
            "velocity_resolution_mps": cfg.velocity_resolution,
            "angle_resolution_deg": math.degrees(cfg.angle_resolution),
            "coarse_cell_m": cfg.coarse_cell_width,
            "max_range_m": cfg.range_max,
            "velocity_span_mps": cfg.wavelength / (2.0 * cfg.T_0),
        }
    ]


def hw_report(cfg: SystemConfig) -> tuple[list[dict], list[str]]:
    """Hardware cost versus a full-band virtual MIMO benchmark, with formulas."""
    frac_rf = cfg.K + cfg.Q_r
    bench_rf = cfg.P * cfg.Q_r
    frac_fs = cfg.f_s_radar
    bench_fs = cfg.M * cfg.f_s_radar
    frac_samp = cfg.K * cfg.Q_r * cfg.G
    bench_samp = cfg.P * cfg.Q_r * cfg.M * cfg.G
    rows = [
        {"quantity": "rf_modules", "frac": frac_rf, "benchmark": bench_rf,
         "ratio": bench_rf / frac_rf},
        {"quantity": "sampling_rate_hz", "frac": frac_fs, "benchmark": bench_fs,
         "ratio": bench_fs / frac_fs},
        {"quantity": "samples_per_pri", "frac": frac_samp, "benchmark": bench_samp,
         "ratio": bench_samp / frac_samp},
    ]
    formulas = [
        f"rf_modules: frac = K + Q_r = {cfg.K} + {cfg.Q_r} = {frac_rf}; "
        f"benchmark = P * Q_r = {cfg.P} * {cfg.Q_r} = {bench_rf}",
        f"sampling_rate: frac = F_s = {frac_fs:.6g} Hz; "
        f"benchmark = M * F_s = {cfg.M} * {frac_fs:.6g} = {bench_fs:.6g} Hz",
        f"samples_per_pri: frac = K * Q_r * G = {cfg.K} * {cfg.Q_r} * {cfg.G} = {frac_samp}; "
        f"benchmark = P * Q_r * M * G = {cfg.P} * {cfg.Q_r} * {cfg.M} * {cfg.G} = {bench_samp}",
        f"sample ratio benchmark/frac = P * M / K = {bench_samp / frac_samp:.6g}",
    ]
    return rows, formulas
