"""Command-line entry point: profile, report, crossover, sweep and presets."""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace

import numpy as np

from .analysis import Region, analyze_trap
from .config import AXES, SWEEP_PARAMETERS, RunConfig, load_config
from .core import PARTICLE_PRESETS, particle_preset
from .errors import ConfigError, DomainError, NumericalError, WireTrapError
from .fieldsolver import PROFILE_COLUMNS, FieldModel, field_profile, write_rows_csv
from .geometry import TRAP_PRESETS
from .potentials import PotentialModel, SpherePairConfig, potential_profile, write_potential_csv
from .screening import crossover_distance, crossover_scan, meissner_check

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CONSTRAINT = 0, 2, 3, 4


def _finite(v):
    """JSON-safe copy: numpy to builtins, non-finite floats to null."""
    if isinstance(v, dict):
        return {k: _finite(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_finite(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.images is not None:
        cfg = replace(cfg, images=args.images == "on")
    return cfg


def _model(cfg: RunConfig) -> PotentialModel:
    return PotentialModel(cfg.layout(), cfg.bias_field(), cfg.particle, cfg.options(), cfg.images)


def _region(cfg: RunConfig):
    return Region(*cfg.region) if cfg.region else None


def run_report(cfg: RunConfig):
    model = _model(cfg)
    rep = analyze_trap(model, cfg.x_guess, _region(cfg), cfg.hold, with_constraints=False)
    rep.constraint_margins = meissner_check(model.layout, model.field.bias, region=cfg.meissner_region)
    return rep


def report_document(cfg: RunConfig, rep) -> dict:
    stab = rep.stability
    name = cfg.trap if isinstance(cfg.trap, str) else "custom"
    return _finite({
        "trap": name,
        "orientation": cfg.orientation,
        "images": cfg.images,
        "current_A": cfg.current,
        "bias_T": list(cfg.bias_field().total),
        "equilibrium_m": rep.equilibrium,
        "z0_m": rep.z0,
        "B_at_min_T": rep.B_at_min,
        "freqs_Hz": rep.freqs,
        "axes": rep.axes.T,
        "axis_freqs_Hz": rep.axis_freqs,
        "depth_J": rep.depth_J,
        "depth_eV": rep.depth_eV,
        "depth_K": rep.depth_K,
        "stable": rep.stable,
        "force_residual_N": rep.force_residual,
        "hold": ["xyz"[i] for i in rep.hold],
        "stability": {
            "positive_definite": stab.positive_definite,
            "hessian_eigenvalues_N_per_m": stab.eigenvalues,
            "gravity_balance": stab.gravity_balance,
            "fluctuation_margin": stab.fluctuation_margin,
        },
        "constraint_margins": [m.as_dict() for m in rep.constraint_margins],
        "energies_J": rep.energies,
        "dominance": rep.dominance,
    })


def cmd_report(args) -> int:
    cfg = _config(args)
    rep = run_report(cfg)
    _emit(json.dumps(report_document(cfg, rep), indent=2) + "\n", args.out)
    if args.strict and not all(m.passed for m in rep.constraint_margins):
        return EXIT_CONSTRAINT
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg = _config(args)
    spec = cfg.profile
    spec = replace(spec, **{k: v for k, v in (("axis", args.axis), ("start", args.start), ("stop", args.stop),
                                              ("points", args.points), ("quantity", args.quantity)) if v is not None})
    if spec.points < 1:
        raise ConfigError("points must be at least 1")
    line = np.linspace(spec.start, spec.stop, spec.points)
    axes = [np.array([c]) for c in spec.through]
    axes[AXES[spec.axis]] = line
    buf = io.StringIO()
    if spec.quantity == "field":
        fm = FieldModel(cfg.layout(), cfg.bias_field(), cfg.images)
        write_rows_csv(buf, PROFILE_COLUMNS, field_profile(fm, *axes))
    else:
        write_potential_csv(buf, potential_profile(_model(cfg), *axes))
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_crossover(args) -> int:
    cfg = _config(args)
    cs = cfg.crossover
    if args.pair:
        a, _, b = args.pair.partition(",")
        if not b or a == b:
            raise ConfigError("--pair needs two different kinds, e.g. GR,CP")
        cs = replace(cs, kind_a=a, kind_b=b)
    if args.factor is not None:
        cs = replace(cs, factor=args.factor)
    pair = SpherePairConfig(cfg.particle, cfg.particle, cs.r_min, cs.angles, cs.B_local)
    rs = np.geomspace(cs.r_min, cs.r_max, cs.points)
    rows = crossover_scan(cs.kind_a, cs.kind_b, pair, rs)
    root = crossover_distance(cs.kind_a, cs.kind_b, cs.factor, pair, cs.r_min, cs.r_max)
    buf = io.StringIO()
    write_rows_csv(buf, ("r", f"V_{cs.kind_a}", f"V_{cs.kind_b}"), rows)
    summary = f"crossover {cs.kind_a} = {format(cs.factor, '.12g')} x {cs.kind_b} at r = {format(root, '.12g')} m\n"
    if args.out:
        _emit(buf.getvalue(), args.out)
        sys.stdout.write(summary)
    else:
        sys.stdout.write(buf.getvalue())
        sys.stderr.write(summary)
    return EXIT_OK


SWEEP_COLUMNS = (
    "parameter", "value", "status", "x_m", "y_m", "z_m", "z0_m", "B_at_min_T",
    "f1_Hz", "f2_Hz", "f3_Hz", "fx_Hz", "fy_Hz", "fz_Hz", "depth_eV", "stable", "force_residual_N",
    "perp_margin", "par_margin", "perp_pass", "par_pass",
)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    v = float(v)
    return format(v, ".12g") if math.isfinite(v) else ""


def _sweep_row(job) -> list[str]:
    cfg, parameter, value = job
    head = [parameter, _fmt(value)]
    try:
        c = cfg.with_value(parameter, value)
        rep = run_report(c)
    except (NumericalError, DomainError) as exc:
        return head + [f"error: {type(exc).__name__}"] + [""] * (len(SWEEP_COLUMNS) - 3)
    perp, par = rep.constraint_margins
    vals = [*rep.equilibrium, rep.z0, rep.B_at_min, *rep.freqs, *rep.axis_freqs, rep.depth_eV, rep.stable,
            rep.force_residual, perp.margin, par.margin, perp.passed, par.passed]
    return head + ["ok"] + [_fmt(v) for v in vals]


def cmd_sweep(args) -> int:
    cfg = _config(args)
    parameter = args.parameter or cfg.sweep_parameter
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_PARAMETERS)}")
    values = [float(v) for v in args.values.split(",")] if args.values else list(cfg.sweep_values)
    if not values:
        raise ConfigError("no sweep values given")
    for v in values:
        if not math.isfinite(v):
            raise ConfigError("sweep values must be finite")
    cfg.with_value(parameter, values[0])  # reject bad parameter names before any work
    jobs = [(cfg, parameter, v) for v in values]
    if args.threads and args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    buf = io.StringIO()
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    for r in rows:
        buf.write(",".join(r) + "\n")
    _emit(buf.getvalue(), args.out)
    if any(r[2] != "ok" for r in rows):
        return EXIT_NUMERIC
    if args.strict and any(r[-1] != "1" or r[-2] != "1" for r in rows):
        return EXIT_CONSTRAINT
    return EXIT_OK


def cmd_presets(args) -> int:
    traps = {
        name: {"kind": spec["kind"], "L_center_m": spec["L_center"], "bias_T": spec["bias"], "L_lead_m": 5e-3,
               "width_m": 5e-6, "current_A": 12.0, "chip_half_width_m": 10e-6}
        for name, spec in TRAP_PRESETS.items()
    }
    particles = {name: asdict(particle_preset(name)) for name in PARTICLE_PRESETS}
    _emit(json.dumps(_finite({"traps": traps, "particles": particles}), indent=2) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--images", choices=("on", "off"), help="override Meissner image currents")
    common.add_argument("--strict", action="store_true", help="exit 4 if any constraint fails")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")

    ap = argparse.ArgumentParser(prog="wiretrap", description="Diamagnetic wire-trap simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", parents=[common], help="field or potential along a line (CSV)")
    p.add_argument("--quantity", choices=("field", "potential"))
    p.add_argument("--axis", choices=tuple(AXES))
    p.add_argument("--start", type=float, help="m")
    p.add_argument("--stop", type=float, help="m")
    p.add_argument("--points", type=int)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("report", parents=[common], help="equilibrium, frequencies, depth, margins (JSON)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("crossover", parents=[common], help="sphere-sphere potential scan and crossing (CSV)")
    p.add_argument("--pair", help="two kinds, e.g. GR,CP: solve |V_a| = factor |V_b|")
    p.add_argument("--factor", type=float)
    p.set_defaults(func=cmd_crossover)

    p = sub.add_parser("sweep", parents=[common], help="one report row per parameter value (CSV)")
    p.add_argument("--parameter", choices=sorted(SWEEP_PARAMETERS))
    p.add_argument("--values", help="comma-separated values in SI units")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("presets", parents=[common], help="list named traps and particles (JSON)")
    p.set_defaults(func=cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except WireTrapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
