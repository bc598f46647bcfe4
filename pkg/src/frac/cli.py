"""Command line interface: batch experiments writing CSV (or JSON) results.

Exit codes: 0 on success, 2 for configuration/validation problems, 3 when an
iterative solver fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys


from . import __version__, harness
from .config import ConfigError, SystemConfig, reference_config
from .im_codec import MappingTable, decode, encode
from .radar_recovery import NonConvergenceError
from .radar_sim import Target
from .harness import parse_range

_INT_FIELDS = ("N", "M", "K", "P", "Q_r", "Q_c", "J", "n_taps")
_FLOAT_FIELDS = ("f_c", "B", "T_0", "T_p", "F_s_radar", "r_max", "d_R", "F_s_comm", "c")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    grp = parser.add_argument_group(
        "configuration",
        "base values come from the built-in reference set or --config; "
        "individual flags override either",
    )
    grp.add_argument("--config", metavar="JSON", help="JSON file with config fields")
    for name in _INT_FIELDS:
        grp.add_argument(f"--{name}", type=int, default=None, help=f"override {name}")
    for name in _FLOAT_FIELDS:
        grp.add_argument(f"--{name}", type=float, default=None, help=f"override {name}")
    grp.add_argument("--seed", type=int, default=None, help="override the RNG seed")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    parser.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    _add_config_flags(parser)


def _load_config(args: argparse.Namespace) -> SystemConfig:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = SystemConfig.from_json(fh.read())
    else:
        cfg = reference_config()
    overrides = {}
    for name in _INT_FIELDS + _FLOAT_FIELDS + ("seed",):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    if overrides:
        # overriding one of the paired fields drops the other in the same
        # replace call, otherwise the stale partner wins or validation
        # rejects the intermediate state
        if "F_s_radar" in overrides and "r_max" not in overrides:
            overrides["r_max"] = None
        if "r_max" in overrides and "F_s_radar" not in overrides:
            overrides["F_s_radar"] = None
        cfg = cfg.replace(**overrides)
    return cfg


def _write_csv(args, cfg: SystemConfig, fieldnames: list[str], rows: list[dict],
               comments: list[str] | None = None) -> None:
    buf = io.StringIO()
    buf.write(f"# frac {__version__}\n")
    buf.write(f"# config_hash: {cfg.config_hash()}\n")
    for line in comments or []:
        buf.write(f"# {line}\n")
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k, "")) for k in fieldnames})
    text = buf.getvalue()
    if getattr(args, "out", None):
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".10g")
    return v


def _emit_json(args, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def _cmd_encode(args) -> int:
    cfg = _load_config(args)
    mapping = MappingTable.load(args.mapping, cfg) if args.mapping else None
    sel = encode(args.bits, cfg, mapping)
    payload = {
        "bits": args.bits,
        "carriers": list(sel.carriers),
        "antennas": list(sel.antennas),
        "phases_rad": list(sel.phases),
        "xi": list(sel.xi(cfg)),
        "decoded": decode(sel, cfg, mapping),
        "bit_budget": {
            "im": cfg.n_im_bits, "pm": cfg.n_pm_bits, "total": cfg.n_total_bits,
        },
        "config_hash": cfg.config_hash(),
    }
    _emit_json(args, payload)
    return 0


def _cmd_ambiguity(args) -> int:
    cfg = _load_config(args)
    rows = harness.run_ambiguity(
        cfg, axis=args.axis, points=args.points, extent=args.extent,
        mc_cpis=args.mc, seed=cfg.seed,
    )
    fields = ["df_range", "df_velocity", "df_angle", "af_expected"]
    if args.mc > 0:
        fields.append("af_mc")
    _write_csv(args, cfg, fields, rows,
               comments=[f"axis: {args.axis}", f"mc_cpis: {args.mc}"])
    return 0


def _cmd_phase_transition(args) -> int:
    cfg = _load_config(args)
    variants = harness.parse_variants(cfg, args.variants)
    if args.mode == "theory":
        rows = harness.run_phase_transition_theory(cfg, variants)
        _write_csv(args, cfg, ["variant", "n1", "n2", "l_star", "beta_star",
                               "l_star_approx"], rows)
        return 0
    if args.mode in ("empirical", "both"):
        all_rows = []
        summary = {}
        for name, vcfg in variants:
            n1 = vcfg.N * vcfg.K * vcfg.Q_r
            n2 = vcfg.N * vcfg.M * vcfg.P * vcfg.Q_r
            theory = harness.phase_transition.solve_threshold(n1, n2)
            if args.l_values:
                l_values = [int(x) for x in parse_range(args.l_values)]
            else:
                hi = max(3, int(math.ceil(theory.l_star * 2.0)))
                l_values = list(range(1, hi + 1))
            rows, crossing = harness.run_phase_transition_empirical(
                vcfg, l_values, args.trials, seed=vcfg.seed, workers=args.workers
            )
            for r in rows:
                r["variant"] = name
                all_rows.append(r)
            summary[name] = {"theory_l_star": theory.l_star, "empirical_crossing": crossing}
        _write_csv(
            args, cfg, ["variant", "l_sparse", "trials", "successes", "success_rate"],
            all_rows,
            comments=[f"crossing(0.6): {json.dumps(summary, sort_keys=True)}"],
        )
        return 0
    return 0


def _cmd_hit_rate(args) -> int:
    cfg = _load_config(args)
    points = harness.run_hit_rate(
        cfg, parse_range(args.snr), trials=args.trials, seed=cfg.seed,
        scene_mode=args.scene, n_targets=args.n_targets, solver=args.solver,
        workers=args.workers,
    )
    rows = [dataclasses.asdict(p) for p in points]
    _write_csv(args, cfg, ["snr_db", "trials", "hits", "hit_rate", "ci_low", "ci_high"],
               rows, comments=[f"scene: {args.scene}", f"solver: {args.solver}"])
    return 0


def _read_scene(path, cfg: SystemConfig) -> list[Target]:
    from .radar_sim import unit_echo_alpha

    targets = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        need = {"r_m", "v_mps", "theta_deg", "amp", "phase_rad"}
        if reader.fieldnames is None or not need.issubset(reader.fieldnames):
            raise ConfigError(
                f"scene file needs columns {sorted(need)}, got {reader.fieldnames}"
            )
        for row in reader:
            r = float(row["r_m"])
            amp = float(row["amp"])
            phase = float(row["phase_rad"])
            # the file stores the post-compression gain; unit_echo_alpha
            # pre-compensates the compression gain and two-way carrier phase
            alpha = amp * unit_echo_alpha(r, phase, cfg)
            targets.append(
                Target(r=r, v=float(row["v_mps"]),
                       theta=math.radians(float(row["theta_deg"])), alpha=alpha)
            )
    return targets


def _cmd_recovery_map(args) -> int:
    cfg = _load_config(args)
    if args.scene_file:
        scene = _read_scene(args.scene_file, cfg)
    else:
        scene = harness.reference_scene(cfg)
    true_rows, rec_rows = harness.run_recovery_map(
        cfg, scene, snr_db=args.snr, solver=args.solver, seed=cfg.seed,
        full_chain=not args.direct, dump_cube_path=args.dump_cube,
    )
    fields = ["kind", "r_m", "v_mps", "theta_deg", "amp", "phase_rad", "cell", "flat_index"]
    _write_csv(args, cfg, fields, true_rows + rec_rows,
               comments=[f"solver: {args.solver}",
                         f"snr_db: {'noiseless' if args.snr is None else args.snr}"])
    return 0


def _cmd_comm_ber(args) -> int:
    cfg = _load_config(args)
    schemes = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    points = harness.run_comm_ber(
        cfg, parse_range(args.snr), channels=args.channels, draws=args.draws,
        schemes=schemes, seed=cfg.seed,
    )
    rows = [dataclasses.asdict(p) for p in points]
    _write_csv(args, cfg, ["scheme", "snr_db", "messages", "bit_errors", "ber", "stderr"],
               rows, comments=[f"channels: {args.channels}", f"draws: {args.draws}"])
    return 0


def _cmd_comm_rate(args) -> int:
    cfg = _load_config(args)
    schemes = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    points = harness.run_comm_rate(
        cfg, parse_range(args.snr), channels=args.channels, draws=args.draws,
        schemes=schemes, seed=cfg.seed,
    )
    rows = [dataclasses.asdict(p) for p in points]
    _write_csv(args, cfg, ["scheme", "snr_db", "rate_bits", "stderr"], rows,
               comments=[f"channels: {args.channels}", f"draws: {args.draws}"])
    return 0


def _cmd_resolution_report(args) -> int:
    cfg = _load_config(args)
    rows = harness.resolution_report(cfg)
    _write_csv(args, cfg, list(rows[0].keys()), rows)
    return 0


def _cmd_hw_report(args) -> int:
    cfg = _load_config(args)
    rows, formulas = harness.hw_report(cfg)
    _write_csv(args, cfg, ["quantity", "frac", "benchmark", "ratio"], rows,
               comments=formulas)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frac",
        description="FMCW index-modulation radar-communications batch experiments",
    )
    parser.add_argument("--version", action="version", version=f"frac {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="map a bit word to a transmit selection")
    p.add_argument("--bits", required=True, help="binary word of n_total_bits")
    p.add_argument("--mapping", help="JSON mapping-table file overriding the codec")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("ambiguity", help="expected ambiguity cuts and planes")
    p.add_argument("--axis", default="range",
                   help="range | velocity | angle | pair like range-velocity")
    p.add_argument("--points", type=int, default=129)
    p.add_argument("--extent", type=float, default=1.0,
                   help="width of the normalized offset window")
    p.add_argument("--mc", type=int, default=0,
                   help="CPIs for a Monte Carlo mean column (0 = closed form only)")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_ambiguity)

    p = sub.add_parser("phase-transition", help="basis-pursuit sparsity limits")
    p.add_argument("--mode", choices=("theory", "empirical", "both"), default="theory")
    p.add_argument("--variants", default="base,K=2,M=4,M=16,P=2,P=8,N=16,N=24",
                   help="comma list of 'base' or FIELD=VALUE configs")
    p.add_argument("--l-values", default=None,
                   help="sparsity grid (range syntax); default 1..2*l_star")
    p.add_argument("--trials", type=int, default=100)
    _add_common_flags(p)
    p.set_defaults(func=_cmd_phase_transition)

    p = sub.add_parser("radar-hit-rate", help="exact grid-triple recovery vs SNR")
    p.add_argument("--snr", default="0:2:20", help="SNR grid in dB (start:step:stop)")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--scene", choices=("fixed", "random"), default="fixed")
    p.add_argument("--n-targets", type=int, default=3,
                   help="targets per random scene")
    p.add_argument("--solver", choices=("omp", "bp"), default="omp")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_hit_rate)

    p = sub.add_parser("recovery-map", help="recover one scene and dump the map")
    p.add_argument("--scene-file", help="CSV with r_m,v_mps,theta_deg,amp,phase_rad")
    p.add_argument("--snr", type=float, default=None, help="radar SNR in dB (default noiseless)")
    p.add_argument("--solver", choices=("omp", "bp"), default="omp")
    p.add_argument("--direct", action="store_true",
                   help="skip the fast-time chain and write cell snapshots directly")
    p.add_argument("--dump-cube", help="write the fast-time cube to this path")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_recovery_map)

    p = sub.add_parser("comm-ber", help="bit error rate of the downlink receivers")
    p.add_argument("--snr", default="0:2:20")
    p.add_argument("--channels", type=int, default=100)
    p.add_argument("--draws", type=int, default=100, help="messages per channel")
    p.add_argument("--schemes", default="frac-ml,frac-sod,psk64-ml")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_comm_ber)

    p = sub.add_parser("comm-rate", help="achievable rate of the discrete alphabet")
    p.add_argument("--snr", default="-10:5:30")
    p.add_argument("--channels", type=int, default=100)
    p.add_argument("--draws", type=int, default=100)
    p.add_argument("--schemes", default="frac-j2,frac-j4")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_comm_rate)

    p = sub.add_parser("resolution-report", help="resolutions and spans")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_resolution_report)

    p = sub.add_parser("hw-report", help="hardware cost versus wideband MIMO")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_hw_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"frac: error: {e}", file=sys.stderr)
        return 2
    except NonConvergenceError as e:
        print(f"frac: solver did not converge: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
