"""Command-line batch runner.

Every subcommand writes one table. The output starts with ``#`` metadata lines
(version, command, seed, parameters, unit scales), followed by the data and
then ``# summary.<key> = <value>`` lines. Floats are written with ``repr``,
the shortest string that round-trips the double.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from . import bounds as bnd
from . import csl, gravity, grw, interferometry, measurement, qmupl
from ._toml import TOMLDecodeError, load_path, loads
from .core import (CONST, LAMBDA0_QMUPL, LAMBDA_ADLER_LOW, R_C, CollapseSimError, GaussianState, Grid,
                   GridWavefunction, make_gaussian_grid_state, make_noise_path, map_batches)

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
REQUIRED = object()


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class Key:
    default: object
    kind: type
    unit: str = ""
    choices: tuple = ()


# Parameter schemas per command; values are SI unless the unit says otherwise.
SCHEMAS: dict[str, dict[str, Key]] = {
    "qmupl": {
        "mode": Key("gaussian", str, "", ("gaussian", "grid")),
        "mass": Key(1e-3, float, "kg"),
        "lambda0": Key(LAMBDA0_QMUPL, float, "m^-2 s^-1"),
        "sigma0_over_inf": Key(1.5, float, "initial width / sigma_q(inf)"),
        "t_final_omega": Key(3.0, float, "duration in units of 1/omega"),
        "n_steps": Key(1000, int),
        "save_every": Key(100, int),
        "grid_points": Key(512, int),
        "half_width_over_inf": Key(60.0, float, "grid half width / sigma_q(inf)"),
    },
    "measure": {
        "gamma0": Key(0.0, float),
        "b": Key(10.0, float),
        "ds": Key(1e-2, float),
        "pointer_mass": Key(1e-3, float, "kg"),
        "kappa_hbar": Key(1e-2, float, "m s^-1"),
        "t_interaction": Key(1.0, float, "s"),
        "lambda0": Key(LAMBDA0_QMUPL, float, "m^-2 s^-1"),
    },
    "grw": {
        "mass": Key(1e-15, float, "kg"),
        "lambda_grw": Key(1.0, float, "s^-1"),
        "r_c": Key(R_C, float, "m"),
        "separation_over_rc": Key(2.0, float),
        "peak_width_over_rc": Key(0.15, float),
        "t_final": Key(1.0, float, "s"),
        "grid_points": Key(512, int),
        "half_width_over_rc": Key(8.0, float),
    },
    "csl": {
        "n_nucleons": Key(10000, int),
        "lambda": Key(LAMBDA_ADLER_LOW, float, "s^-1"),
        "r_c": Key(R_C, float, "m"),
        "d_min": Key(1e-10, float, "m"),
        "d_max": Key(1e-5, float, "m"),
        "points": Key(51, int),
    },
    "gravity": {
        "mass": Key(REQUIRED, float, "kg"),
        "radius": Key(REQUIRED, float, "m"),
        "density": Key(1000.0, float, "kg m^-3, used for the transition scale"),
    },
    "interferometer": {
        "grating_period": Key(1e-7, float, "m"),
        "mass_amu": Key(1e6, float, "amu"),
        "velocity": Key(1.0, float, "m s^-1"),
        "nucleon_count": Key(0, int, "0 means mass_amu"),
        "superposition_time": Key(1e-2, float, "s"),
    },
    "bounds": {
        "target": Key("table1", str, "", ("table1", "map")),
        "lambda_min": Key(1e-20, float, "s^-1"),
        "lambda_max": Key(1e2, float, "s^-1"),
        "points": Key(23, int),
    },
}

ENSEMBLE_COMMANDS = ("qmupl", "measure", "grw")


@dataclass
class RunConfig:
    command: str
    parameters: dict
    seed: int = 0
    n_trajectories: int = 1
    output_path: str | None = None
    output_format: str = "csv"
    workers: int | None = None


@dataclass
class Table:
    columns: list[str]
    rows: list[list]
    summary: dict = field(default_factory=dict)
    scales: dict = field(default_factory=dict)


def _coerce(name: str, key: Key, value):
    if key.kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if key.kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if key.kind is int and isinstance(value, float) and value.is_integer():
        return int(value)
    if key.kind is str and isinstance(value, str):
        if key.choices and value not in key.choices:
            raise ConfigError(f"parameters.{name}: {value!r} not one of {', '.join(key.choices)}")
        return value
    raise ConfigError(f"parameters.{name}: expected {key.kind.__name__}, got {value!r}")


def resolve_parameters(command: str, given: dict) -> dict:
    schema = SCHEMAS[command]
    errors = [f"parameters.{k}: unknown key for '{command}' (allowed: {', '.join(schema)})"
              for k in given if k not in schema]
    out = {}
    for name, key in schema.items():
        if name in given:
            try:
                out[name] = _coerce(name, key, given[name])
            except ConfigError as exc:
                errors.append(str(exc))
        elif key.default is REQUIRED:
            errors.append(f"parameters.{name}: required key missing ({key.unit})")
        else:
            out[name] = key.default
    if errors:
        raise ConfigError("\n".join(errors))
    return out


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"-p {text!r}: expected key=value")
    k, v = text.split("=", 1)
    try:
        value = loads(f"v = {v}")["v"]
    except TOMLDecodeError:
        value = v
    return k.strip(), value


def build_config(args: argparse.Namespace) -> RunConfig:
    doc = {}
    if args.config:
        try:
            doc = load_path(args.config)
        except OSError as exc:
            raise ConfigError(f"{args.config}: {exc.strerror}") from None
        except TOMLDecodeError as exc:
            raise ConfigError(f"{args.config}: {exc}") from None
    run = dict(doc.get("run", {}))
    params = dict(doc.get("parameters", {}))
    unknown = [k for k in doc if k not in ("run", "parameters")]
    allowed_run = ("seed", "n_trajectories", "output", "format", "workers")
    unknown += [f"run.{k}" for k in run if k not in allowed_run]
    if unknown:
        raise ConfigError("\n".join(f"{k}: unknown key" for k in unknown))
    for item in args.param or []:
        k, v = _parse_override(item)
        params[k] = v
    if args.command == "bounds" and args.target:
        params["target"] = args.target
    cfg = RunConfig(
        command=args.command,
        parameters=resolve_parameters(args.command, params),
        seed=args.seed if args.seed is not None else run.get("seed", 0),
        n_trajectories=args.n if args.n is not None else run.get("n_trajectories", 1),
        output_path=args.out if args.out is not None else run.get("output"),
        output_format=args.format or run.get("format", "csv"),
        workers=args.workers if args.workers is not None else run.get("workers"),
    )
    if not (isinstance(cfg.seed, int) and 0 <= cfg.seed < 2**64):
        raise ConfigError(f"run.seed: expected a 64-bit unsigned integer, got {cfg.seed!r}")
    if not (isinstance(cfg.n_trajectories, int) and cfg.n_trajectories >= 1):
        raise ConfigError(f"run.n_trajectories: expected a positive integer, got {cfg.n_trajectories!r}")
    if cfg.output_format not in ("csv", "json"):
        raise ConfigError(f"run.format: expected csv or json, got {cfg.output_format!r}")
    if cfg.workers is not None and not (isinstance(cfg.workers, int) and cfg.workers >= 1):
        raise ConfigError(f"run.workers: expected a positive integer, got {cfg.workers!r}")
    return cfg


# ---- commands -------------------------------------------------------------

def run_qmupl(cfg: RunConfig) -> Table:
    p = cfg.parameters
    lam = qmupl.qmupl_lambda(p["mass"], p["lambda0"])
    s_inf, p_inf = qmupl.asymptotic_spreads(p["mass"], p["lambda0"])
    om = qmupl.collapse_frequency(p["lambda0"])
    t_final = p["t_final_omega"] / om
    run_cfg = qmupl.QmuplRunConfig(p["mass"], lam, t_final, t_final / p["n_steps"])
    sigma0 = p["sigma0_over_inf"] * s_inf
    n = run_cfg.n_steps
    every = max(1, p["save_every"])
    keep = np.arange(0, n + 1, every)
    if keep[-1] != n:
        keep = np.append(keep, n)
    times = run_cfg.dt * keep

    if p["mode"] == "gaussian":
        init = GaussianState.from_sigma(sigma0)

        def batch(r: range):
            out = []
            for i in r:
                tr = qmupl.propagate_gaussian(run_cfg, init, make_noise_path(cfg.seed, run_cfg.dt, n, stream=i))
                out.append((tr.x_mean[keep], tr.sigma_q[keep]))
            return out
    else:
        grid = Grid.centered(p["half_width_over_inf"] * s_inf, p["grid_points"])
        psi0 = make_gaussian_grid_state(grid, 0.0, 0.0, sigma0)

        def batch(r: range):
            noises = [make_noise_path(cfg.seed, run_cfg.dt, n, stream=i) for i in r]
            _, qm, qv = qmupl.integrate_grid_sde_batch(run_cfg, psi0, noises)
            return [(qm[j, keep], np.sqrt(qv[j, keep])) for j in range(len(r))]

    results = [x for part in map_batches(batch, cfg.n_trajectories, batch=64, workers=cfg.workers) for x in part]
    rows = []
    for i, (qm, sq) in enumerate(results):
        rows += [[i, int(k), float(t), float(a), float(b)] for k, t, a, b in zip(keep, times, qm, sq)]
    final_sigma = np.array([sq[-1] for _, sq in results])
    return Table(["run", "step", "t", "q_mean", "sigma_q"], rows,
                 {"sigma_q_inf": s_inf, "sigma_p_inf": p_inf, "omega": om,
                  "mean_final_sigma_q": float(final_sigma.mean())},
                 run_cfg.scales(sigma0))


def run_measure(cfg: RunConfig) -> Table:
    p = cfg.parameters
    clock = measurement.PointerClock(qmupl.qmupl_lambda(p["pointer_mass"], p["lambda0"]), p["kappa_hbar"],
                                     p["t_interaction"])
    ens = measurement.simulate_hitting_ensemble(p["gamma0"], p["b"], p["ds"], cfg.n_trajectories, cfg.seed,
                                                clock=clock, workers=cfg.workers)
    rows = [[i, int(o), float(s), float(t)] for i, (o, s, t) in enumerate(zip(ens.outcomes, ens.s_col, ens.t_col))]
    p_an, _ = measurement.collapse_probability(p["gamma0"], p["b"])
    return Table(["run", "outcome", "s_col", "t_col"], rows,
                 {"p_plus": ens.p_plus, "mean_s": float(ens.s_col.mean()), "p_plus_analytic": p_an,
                  "mean_s_analytic": measurement.mean_hitting_time(p["gamma0"], p["b"])},
                 {"collapse_time_unit": "dimensionless s; t_col in seconds via the cubic time change"})


def run_grw(cfg: RunConfig) -> Table:
    p = cfg.parameters
    rc = p["r_c"]
    d = p["separation_over_rc"] * rc
    grid = Grid.centered(p["half_width_over_rc"] * rc, p["grid_points"])
    w = p["peak_width_over_rc"] * rc
    amp = (make_gaussian_grid_state(grid, -d / 2, 0.0, w).amplitudes
           + make_gaussian_grid_state(grid, d / 2, 0.0, w).amplitudes)
    psi0 = GridWavefunction(grid, amp).normalized()
    params = grw.GrwParams(p["lambda_grw"], rc, 1)
    ens = grw.evolve_grw_ensemble(psi0, params, p["mass"], p["t_final"], cfg.n_trajectories, cfg.seed,
                                  workers=cfg.workers)
    i1 = int(np.argmin(np.abs(grid.x + d / 2)))
    i2 = int(np.argmin(np.abs(grid.x - d / 2)))
    rho = ens.final_amplitudes[:, i1] * np.conj(ens.final_amplitudes[:, i2])
    rows = [[i, int(k), float(r.real), float(r.imag)] for i, (k, r) in enumerate(zip(ens.jump_counts, rho))]
    # the free flow also changes rho(x1, x2); compare against the same flow without jumps
    free = grw.free_propagate(psi0, p["mass"], p["t_final"]).amplitudes
    ref = free[i1] * np.conj(free[i2])
    ratio = abs(rho.mean()) / abs(ref)
    measured = -math.log(ratio) / p["t_final"] if ratio > 0 else math.inf
    return Table(["run", "n_jumps", "rho12_re", "rho12_im"], rows,
                 {"decay_rate": measured,
                  "decay_rate_predicted": float(grw.offdiag_decay_rate(-d / 2, d / 2, p["lambda_grw"], rc)),
                  "mean_jumps": float(ens.jump_counts.mean()), "resampled": ens.resampled},
                 {"length_unit_m": rc})


def run_csl(cfg: RunConfig) -> Table:
    p = cfg.parameters
    if p["points"] < 2 or not 0 < p["d_min"] < p["d_max"]:
        raise ConfigError("parameters: need points >= 2 and 0 < d_min < d_max")
    ds = np.logspace(math.log10(p["d_min"]), math.log10(p["d_max"]), p["points"])
    full = csl.cluster_rate(p["n_nucleons"], 1, p["lambda"])
    gam = full * -np.expm1(-ds**2 / (4.0 * p["r_c"] ** 2))
    rows = [[float(a), float(g)] for a, g in zip(ds, gam)]
    return Table(["displacement", "gamma"], rows, {"saturated_rate": full})


def run_gravity(cfg: RunConfig) -> Table:
    p = cfg.parameters
    body = gravity.BodySpec.from_mass_radius(p["mass"], p["radius"])
    cell = gravity.coherence_cell(body)
    lc = gravity.diosi_critical_length(body)
    tr = gravity.karolyhazy_transition(p["density"])
    rows = [
        ["coherence_cell", cell.value, cell.regime],
        ["reduction_time", gravity.reduction_time(body.mass, cell.value), cell.regime],
        ["diosi_critical_length", lc.value, lc.regime],
        ["diosi_critical_length_exact", gravity.diosi_critical_length_exact(body), lc.regime],
        ["diosi_damping_time_at_2R", gravity.diosi_damping_time(body, 2 * body.radius), ""],
        ["sn_ground_width", gravity.sn_ground_width(body.mass), ""],
        ["sn_coupling_at_R", gravity.sn_coupling(body.mass, body.radius), ""],
        ["transition_radius", tr.a_tr, ""],
        ["transition_time", tr.tau_tr, ""],
        ["transition_mass", tr.m_tr, ""],
    ]
    return Table(["quantity", "value", "regime"], rows, {"regime_parameter": body.regime_parameter})


def run_interferometer(cfg: RunConfig) -> Table:
    p = cfg.parameters
    m = p["mass_amu"] * CONST.amu
    lam = interferometry.de_broglie_wavelength(m, p["velocity"])
    lt = interferometry.talbot_length(p["grating_period"], lam)
    lim = interferometry.tli_gravity_limit(p["grating_period"], p["velocity"])
    n = p["nucleon_count"] or int(round(m / CONST.m_nucleon))
    rows = [
        ["de_broglie_wavelength", lam],
        ["talbot_length", lt],
        ["free_fall_speed_over_talbot_length", interferometry.free_fall_speed(lt)],
        ["gravity_limited_max_mass_amu", lim.max_mass_amu],
        ["interferometric_bound", interferometry.interferometric_bound(n, p["superposition_time"])],
    ]
    for e in interferometry.load_experiments():
        rows.append([f"catalog:{e.name}:lambda_max", e.lambda_max])
    return Table(["quantity", "value"], rows)


def run_bounds(cfg: RunConfig) -> Table:
    p = cfg.parameters
    cat = bnd.load_catalog()
    if p["target"] == "table1":
        rows = [[r.name, r.category, r.lambda_max, r.csl_distance, r.adler_distance] for r in bnd.table1(cat)]
        return Table(["name", "category", "lambda_max", "csl_distance", "adler_distance"], rows,
                     {"reference_csl": cat.reference["csl"], "reference_adler": cat.reference["adler"]})
    if p["points"] < 2 or not 0 < p["lambda_min"] < p["lambda_max"]:
        raise ConfigError("parameters: need points >= 2 and 0 < lambda_min < lambda_max")
    grid = np.logspace(math.log10(p["lambda_min"]), math.log10(p["lambda_max"]), p["points"])
    pts = bnd.exclusion_map(cat.entries, grid, cat.reference)
    rows = [[q.lam, "allowed" if q.allowed else "excluded", q.excluded_by or "", q.csl_distance,
             q.adler_distance] for q in pts]
    return Table(["lambda", "status", "excluded_by", "csl_distance", "adler_distance"], rows)


COMMANDS: dict[str, Callable[[RunConfig], Table]] = {
    "qmupl": run_qmupl,
    "measure": run_measure,
    "grw": run_grw,
    "csl": run_csl,
    "gravity": run_gravity,
    "interferometer": run_interferometer,
    "bounds": run_bounds,
}


# ---- output ---------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    return v


def metadata(cfg: RunConfig, table: Table) -> dict:
    return {
        "version": __version__,
        "command": cfg.command,
        "seed": cfg.seed,
        "n_trajectories": cfg.n_trajectories if cfg.command in ENSEMBLE_COMMANDS else None,
        "parameters": {k: _jsonable(v) for k, v in cfg.parameters.items()},
        "scales": {k: _jsonable(v) for k, v in table.scales.items()},
        "columns": table.columns,
    }


def render(cfg: RunConfig, table: Table) -> str:
    meta = metadata(cfg, table)
    if cfg.output_format == "json":
        doc = dict(meta)
        doc["rows"] = [[_jsonable(v) for v in row] for row in table.rows]
        doc["summary"] = {k: _jsonable(v) for k, v in table.summary.items()}
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {json.dumps(v)}\n")
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    for k, v in table.summary.items():
        buf.write(f"# summary.{k} = {_fmt(v)}\n")
    return buf.getvalue()


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="collapsesim", description="Run collapse-model simulations and calculators.")
    ap.add_argument("--version", action="version", version=f"collapsesim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"{name} run")
        if name == "bounds":
            sp.add_argument("target", nargs="?", choices=("table1", "map"))
        sp.add_argument("--config", help="TOML file with [run] and [parameters] tables")
        sp.add_argument("--seed", type=int)
        sp.add_argument("-n", "--n-trajectories", dest="n", type=int)
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--workers", type=int, help="threads for ensembles (default: $COLLAPSESIM_WORKERS or 1)")
        sp.add_argument("-p", "--param", action="append", metavar="KEY=VALUE", help="override a parameter")
    return ap


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        cfg = build_config(args)
        table = COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"collapsesim {args.command}: configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CollapseSimError as exc:
        print(f"collapsesim {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = render(cfg, table)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
