"""Experiment runner: each figure's data pipeline as a CLI subcommand.

Configuration is a single JSON document (units: hbar = k_B = eps_h = 1).
Every experiment writes deterministic CSV into the configured output
directory; identical configs produce byte-identical files.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import dynamics, metrics, model, spectral
from .linalg import EigensolverError

__all__ = ["ExperimentConfig", "ConfigError", "PRESETS", "run", "preset_config", "main"]

EXPERIMENTS = (
    "trace-decay",
    "compare-lg-nh",
    "compare-lindblad-nh",
    "thermo",
    "relax-to-ss",
    "ep-scan",
    "nonnormality",
)
SWEEP_EXPERIMENTS_G = ("trace-decay", "compare-lg-nh", "compare-lindblad-nh", "ep-scan", "nonnormality")
SWEEP_EXPERIMENTS_TH = ("thermo", "relax-to-ss")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    n: int

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class ExperimentConfig:
    model: model.ModelParams
    spec: model.GeneratorSpec
    experiment: str
    output_path: Path
    time_grid: Optional[tuple[float, int]] = None  # (t_max, n_steps)
    g_grid: Optional[Grid] = None
    T_h_grid: Optional[Grid] = None
    mc: Optional[tuple[int, int]] = None  # (n_traj, seed)
    thresholds: spectral.EPThresholds = field(default_factory=spectral.EPThresholds)
    target: str = "heff"

    def times(self) -> np.ndarray:
        t_max, n_steps = self.time_grid
        return np.linspace(0.0, t_max, n_steps + 1)


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}.{key}: missing required field")
    return section[key]


def _parse_grid(section: dict, where: str) -> Grid:
    lo = float(_need(section, "min", where))
    hi = float(_need(section, "max", where))
    n = int(_need(section, "n_points", where))
    if n < 1:
        raise ConfigError(f"{where}.n_points: must be >= 1, got {n}")
    if n > 1 and not hi > lo:
        raise ConfigError(f"{where}: need min < max, got [{lo}, {hi}]")
    return Grid(lo, hi, n)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")

    m = _need(raw, "model", "config")
    try:
        params = model.ModelParams(
            g=float(_need(m, "g", "model")),
            eps_h=float(m.get("eps_h", 1.0)),
            eps_c=float(m.get("eps_c", 1.0)),
            alpha_h=float(_need(m, "alpha_h", "model")),
            alpha_c=float(_need(m, "alpha_c", "model")),
            T_h=float(_need(m, "T_h", "model")),
            T_c=float(_need(m, "T_c", "model")),
            omega_c=float(m.get("omega_c", 10.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc

    s = raw.get("spec", {})
    try:
        gspec = model.GeneratorSpec(
            approach=s.get("approach", "local"), jump_policy=s.get("jump_policy", "full")
        )
    except ValueError as exc:
        raise ConfigError(f"spec: {exc}") from exc

    experiment = _need(raw, "experiment", "config")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown {experiment!r}; valid: {', '.join(EXPERIMENTS)}")

    time_grid = None
    if "time_grid" in raw:
        tg = raw["time_grid"]
        t_max = float(_need(tg, "t_max", "time_grid"))
        n_steps = int(_need(tg, "n_steps", "time_grid"))
        if t_max <= 0.0 or n_steps < 1:
            raise ConfigError(f"time_grid: need t_max > 0 and n_steps >= 1, got {t_max}, {n_steps}")
        time_grid = (t_max, n_steps)

    g_grid = _parse_grid(raw["g_grid"], "g_grid") if "g_grid" in raw else None
    th_grid = _parse_grid(raw["T_h_grid"], "T_h_grid") if "T_h_grid" in raw else None
    if g_grid is not None and th_grid is not None:
        raise ConfigError("config: exactly one sweep axis allowed, got both g_grid and T_h_grid")
    if experiment in SWEEP_EXPERIMENTS_G and g_grid is None:
        raise ConfigError(f"g_grid: required by experiment {experiment!r}")
    if experiment in ("trace-decay", "compare-lg-nh", "compare-lindblad-nh", "thermo", "relax-to-ss"):
        if time_grid is None:
            raise ConfigError(f"time_grid: required by experiment {experiment!r}")
    if experiment in SWEEP_EXPERIMENTS_G and g_grid is not None and g_grid.lo < 0.0:
        raise ConfigError(f"g_grid.min: coupling must be >= 0, got {g_grid.lo}")

    mc = None
    if "mc" in raw:
        mc = (int(_need(raw["mc"], "n_traj", "mc")), int(_need(raw["mc"], "seed", "mc")))

    th = raw.get("thresholds", {})
    thresholds = spectral.EPThresholds(
        gap_tol=float(th.get("gap_tol", 1e-6)),
        orth_tol=float(th.get("orth_tol", 1e-4)),
        kappa_min=float(th.get("kappa_min", 1e3)),
    )

    target = raw.get("target", "heff")
    if target not in ("heff", "liouvillian"):
        raise ConfigError(f"target: must be 'heff' or 'liouvillian', got {target!r}")

    if "output_path" not in raw:
        raise ConfigError("output_path: missing required field")

    return ExperimentConfig(
        model=params,
        spec=gspec,
        experiment=experiment,
        output_path=Path(raw["output_path"]),
        time_grid=time_grid,
        g_grid=g_grid,
        T_h_grid=th_grid,
        mc=mc,
        thresholds=thresholds,
        target=target,
    )


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(_fmt(x) if not isinstance(x, str) else x for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def _initial_state(p: model.ModelParams) -> np.ndarray:
    return model.thermal_state(model.build_hamiltonian(p), p.T_h)


def _run_trace_decay(cfg: ExperimentConfig) -> dict[str, tuple[list[str], list[list]]]:
    times = cfg.times()
    rows = []
    for approach in ("local", "global"):
        for g in cfg.g_grid.values():
            p = cfg.model.with_g(float(g))
            parts = model.build_liouvillian(p, model.GeneratorSpec(approach, "none"))
            traj = dynamics.propagate(parts.matrix, _initial_state(p), times)
            rows += [[t, approach, g, tr] for t, tr in zip(traj.times, traj.traces)]
    return {"trace_decay.csv": (["t", "approach", "g", "trace"], rows)}


def _run_compare_lg_nh(cfg: ExperimentConfig):
    times = cfg.times()
    rows = []
    for g in cfg.g_grid.values():
        p = cfg.model.with_g(float(g))
        rho0 = _initial_state(p)
        tl = dynamics.propagate(
            model.build_liouvillian(p, model.GeneratorSpec("local", "none")).matrix, rho0, times
        )
        tg = dynamics.propagate(
            model.build_liouvillian(p, model.GeneratorSpec("global", "none")).matrix, rho0, times
        )
        for t, a, b in zip(times, tl.states, tg.states):
            rows.append([t, "nh_local_vs_nh_global", g, metrics.normalized_output_distance(a, b)])
    return {"compare.csv": (["t", "approach_pair", "g", "trace_distance"], rows)}


def _run_compare_lindblad_nh(cfg: ExperimentConfig):
    times = cfg.times()
    rows = []
    mc_rows = []
    for approach in ("local", "global"):
        for g in cfg.g_grid.values():
            p = cfg.model.with_g(float(g))
            rho0 = _initial_state(p)
            tf = dynamics.propagate(
                model.build_liouvillian(p, model.GeneratorSpec(approach, "full")).matrix, rho0, times
            )
            tn = dynamics.normalize(
                dynamics.propagate(
                    model.build_liouvillian(p, model.GeneratorSpec(approach, "none")).matrix,
                    rho0,
                    times,
                )
            )
            for t, a, b in zip(times, tf.states, tn.states):
                rows.append([t, f"lindblad_vs_nh_{approach}", g, metrics.trace_distance(a, b)])
            if cfg.mc is not None:
                n_traj, seed = cfg.mc
                res = dynamics.mc_unraveling(
                    p, model.GeneratorSpec(approach, "full"), rho0, times, n_traj, seed
                )
                for k, t in enumerate(times):
                    mc_rows.append(
                        [
                            t,
                            approach,
                            g,
                            metrics.trace_distance(res.mean_state_per_time[k], tf.states[k]),
                            np.abs(res.nojump_state_per_time[k] - tn.states[k]).max(),
                            res.nojump_probability_per_time[k],
                        ]
                    )
    out = {"compare.csv": (["t", "approach_pair", "g", "trace_distance"], rows)}
    if cfg.mc is not None:
        out["unraveling.csv"] = (
            ["t", "approach", "g", "mean_vs_lindblad", "nojump_record_err", "nojump_probability"],
            mc_rows,
        )
    return out


def _th_values(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.T_h_grid is not None:
        return cfg.T_h_grid.values()
    return np.array([cfg.model.T_h])


def _run_thermo(cfg: ExperimentConfig):
    times = cfg.times()
    rows = []
    for th in _th_values(cfg):
        p = dataclasses.replace(cfg.model, T_h=float(th))
        H = model.build_hamiltonian(p)
        rho0 = _initial_state(p)
        for approach in ("local", "global"):
            spec_full = model.GeneratorSpec(approach, "full")
            parts_full = model.build_liouvillian(p, spec_full)
            parts_nj = model.build_liouvillian(p, model.GeneratorSpec(approach, "none"))
            dissipators = model.bath_dissipators(p, spec_full)
            traj_nj = dynamics.propagate(parts_nj.matrix, rho0, times)
            traj_full = dynamics.propagate(parts_full.matrix, rho0, times)
            for t, omega, rho_l in zip(times, traj_nj.states, traj_full.states):
                rec = metrics.thermo_record(
                    t, omega, parts_nj.gamma, rho_l, parts_full.matrix, dissipators, H, p.T_h, p.T_c
                )
                rows.append(
                    [
                        approach,
                        th,
                        rec.time,
                        rec.S_vN,
                        rec.S_nH,
                        rec.S_nH_rate_eq16,
                        rec.S_nH_rate_eq17,
                        rec.entropy_production_rate_lindblad,
                        rec.heat_rate_hot,
                        rec.heat_rate_cold,
                    ]
                )
    header = [
        "approach",
        "T_h",
        "time",
        "S_vN",
        "S_nH",
        "S_nH_rate_eq16",
        "S_nH_rate_eq17",
        "entropy_production_rate_lindblad",
        "heat_rate_hot",
        "heat_rate_cold",
    ]
    return {"thermo.csv": (header, rows)}


def _run_relax_to_ss(cfg: ExperimentConfig):
    times = cfg.times()
    rows = []
    for th in _th_values(cfg):
        p = dataclasses.replace(cfg.model, T_h=float(th))
        rho0 = _initial_state(p)
        for approach in ("local", "global"):
            parts_full = model.build_liouvillian(p, model.GeneratorSpec(approach, "full"))
            ss = dynamics.steady_state(parts_full.matrix)
            traj = dynamics.propagate(parts_full.matrix, rho0, times)
            for t, s in zip(times, traj.states):
                rows.append([t, approach, "lindblad_to_steady", th, metrics.trace_distance(s, ss)])
            parts_nj = model.build_liouvillian(p, model.GeneratorSpec(approach, "none"))
            lls = dynamics.longest_lived_state(parts_nj.heff)[0]
            traj_nj = dynamics.normalize(dynamics.propagate(parts_nj.matrix, rho0, times))
            for t, s in zip(times, traj_nj.states):
                rows.append([t, approach, "nojump_to_longest_lived", th, metrics.trace_distance(s, lls)])
    return {"relax.csv": (["t", "approach", "kind", "T_h", "trace_distance"], rows)}


def _run_ep_scan(cfg: ExperimentConfig):
    grid = cfg.g_grid.values()
    family = spectral.generator_family(cfg.model, cfg.spec, cfg.target)
    points = spectral.eigen_track(family, grid)
    n = points[0].eigenvalues.size
    header = ["g", "kappa_V", "min_gap", "min_nonorth"]
    header += [f"re_lambda_{i + 1}" for i in range(n)]
    header += [f"im_lambda_{i + 1}" for i in range(n)]
    header += [f"abs_lambda_{i + 1}" for i in range(n)]
    rows = []
    for pt in points:
        row = [pt.g, pt.kappa_v, pt.min_gap, pt.min_pair_nonorthogonality]
        row += list(pt.eigenvalues.real) + list(pt.eigenvalues.imag) + list(pt.eigenvalue_moduli)
        rows.append(row)

    reports = spectral.ep_scan(cfg.model, cfg.spec, cfg.target, grid, cfg.thresholds)
    ep_header = [
        "g_star",
        "approach",
        "jump_policy",
        "target",
        "index_i",
        "index_j",
        "kappa_at_peak",
        "gap_at_peak",
        "nonorthogonality_at_peak",
    ]
    ep_rows = [
        [
            r.g_star,
            r.approach,
            r.jump_policy,
            r.target,
            r.coalescing_indices[0],
            r.coalescing_indices[1],
            r.kappa_at_peak,
            r.gap_at_peak,
            r.nonorthogonality_at_peak,
        ]
        for r in reports
        if r.accepted
    ]
    return {"ep_scan.csv": (header, rows), "eps.csv": (ep_header, ep_rows)}


def _run_nonnormality(cfg: ExperimentConfig):
    rows = []
    for approach in ("local", "global"):
        for g in cfg.g_grid.values():
            p = cfg.model.with_g(float(g))
            diag = spectral.commutator_diagnostics(p, model.GeneratorSpec(approach, cfg.spec.jump_policy))
            rows.append([g, approach, diag.l_nonnormality, diag.dd_nonnormality, diag.hd_contribution])
    return {"nonnormality.csv": (["g", "approach", "N_L", "N_D", "HD_contribution"], rows)}


_RUNNERS = {
    "trace-decay": _run_trace_decay,
    "compare-lg-nh": _run_compare_lg_nh,
    "compare-lindblad-nh": _run_compare_lindblad_nh,
    "thermo": _run_thermo,
    "relax-to-ss": _run_relax_to_ss,
    "ep-scan": _run_ep_scan,
    "nonnormality": _run_nonnormality,
}


def run(cfg: ExperimentConfig) -> list[Path]:
    """Execute the configured experiment; returns the written file paths."""
    outputs = _RUNNERS[cfg.experiment](cfg)
    written = []
    for name, (header, rows) in outputs.items():
        path = cfg.output_path / name
        _write_csv(path, header, rows)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Presets: one per reproduced figure, parameters straight from the captions.

_MAIN = {"alpha_h": 0.05, "alpha_c": 0.2, "T_h": 1.0, "T_c": 0.1, "omega_c": 10.0}
_WEAK = {"alpha_h": 0.005, "alpha_c": 0.02, "T_h": 1.0, "T_c": 0.1, "omega_c": 10.0}

PRESETS: dict[str, dict] = {
    "fig2": {
        "model": {"g": 0.22, **_WEAK},
        "spec": {"approach": "local", "jump_policy": "none"},
        "experiment": "trace-decay",
        "time_grid": {"t_max": 10.0, "n_steps": 400},
        "g_grid": {"min": 0.22, "max": 0.62, "n_points": 2},
        "output_path": "out/fig2",
    },
    "fig2b": {
        "model": {"g": 0.22, **_WEAK},
        "spec": {"approach": "local", "jump_policy": "none"},
        "experiment": "compare-lg-nh",
        "time_grid": {"t_max": 10.0, "n_steps": 400},
        "g_grid": {"min": 0.22, "max": 0.62, "n_points": 2},
        "output_path": "out/fig2b",
    },
    "fig3": {
        "model": {"g": 0.03, **_MAIN},
        "spec": {"approach": "local", "jump_policy": "full"},
        "experiment": "compare-lindblad-nh",
        "time_grid": {"t_max": 30.0, "n_steps": 600},
        "g_grid": {"min": 0.03, "max": 0.93, "n_points": 4},
        "output_path": "out/fig3",
    },
    "fig4": {
        "model": {"g": 0.0, **_MAIN},
        "spec": {"approach": "local", "jump_policy": "full"},
        "experiment": "ep-scan",
        "target": "heff",
        "g_grid": {"min": 0.0, "max": 0.6, "n_points": 241},
        "output_path": "out/fig4",
    },
    "fig4thermo": {
        "model": {"g": 0.8, **{**_MAIN, "T_h": 0.59}},
        "spec": {"approach": "local", "jump_policy": "none"},
        "experiment": "thermo",
        "time_grid": {"t_max": 80.0, "n_steps": 400},
        "T_h_grid": {"min": 0.59, "max": 1.5, "n_points": 2},
        "output_path": "out/fig4thermo",
    },
    "fig5": {
        "model": {"g": 0.0, **_MAIN},
        "spec": {"approach": "local", "jump_policy": "full"},
        "experiment": "nonnormality",
        "g_grid": {"min": 0.0, "max": 2.2, "n_points": 221},
        "output_path": "out/fig5",
    },
    "fig6": {
        "model": {"g": 0.0, **_MAIN},
        "spec": {"approach": "local", "jump_policy": "full"},
        "experiment": "ep-scan",
        "target": "liouvillian",
        "g_grid": {"min": 0.0, "max": 2.2, "n_points": 441},
        "output_path": "out/fig6",
    },
    "fig7": {
        "model": {"g": 0.8, **{**_MAIN, "T_h": 0.15}},
        "spec": {"approach": "local", "jump_policy": "full"},
        "experiment": "relax-to-ss",
        "time_grid": {"t_max": 15.0, "n_steps": 300},
        "T_h_grid": {"min": 0.15, "max": 1.5, "n_points": 4},
        "output_path": "out/fig7",
    },
    "fig8": {
        "model": {"g": 0.0001, "alpha_h": 5e-5, "alpha_c": 2e-4, "T_h": 1.0, "T_c": 0.1, "omega_c": 20.0},
        "spec": {"approach": "local", "jump_policy": "full"},
        "experiment": "ep-scan",
        "target": "heff",
        "g_grid": {"min": 1e-5, "max": 1e-3, "n_points": 100},
        "output_path": "out/fig8",
    },
    "fig9": {
        "model": {"g": 0.0, "eps_c": 0.5, "alpha_h": 2.0, "alpha_c": 2.0, "T_h": 0.2, "T_c": 0.05, "omega_c": 10.0},
        "spec": {"approach": "local", "jump_policy": "full"},
        "experiment": "nonnormality",
        "g_grid": {"min": 0.0, "max": 2.2, "n_points": 221},
        "output_path": "out/fig9",
    },
}


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"preset: unknown {name!r}; valid: {', '.join(sorted(PRESETS))}")
    return json.loads(json.dumps(PRESETS[name]))  # deep copy


def _apply_override(raw: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override: expected key=value, got {assignment!r}")
    key, _, value = assignment.partition("=")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    node = raw
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override: {key!r} does not address an object field")
    node[parts[-1]] = parsed


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="qdimer",
        description="Two-qubit two-bath master equations: dynamics, thermodynamics, exceptional points.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config file or preset")
    run_p.add_argument("config", nargs="?", help="path to a JSON config file")
    run_p.add_argument("--preset", help="named preset to run instead of a config file")
    run_p.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config field (dotted keys, JSON values), repeatable",
    )

    presets_p = sub.add_parser("presets", help="print preset configurations as JSON")
    presets_p.add_argument("name", nargs="?", help="print just this preset's config")

    args = parser.parse_args(argv)

    try:
        if args.command == "presets":
            if args.name:
                print(json.dumps(preset_config(args.name), indent=2))
            else:
                print(json.dumps({k: PRESETS[k] for k in sorted(PRESETS)}, indent=2))
            return 0

        if (args.config is None) == (args.preset is None):
            print("error: provide exactly one of <config.json> or --preset", file=sys.stderr)
            return 2
        if args.preset is not None:
            raw = preset_config(args.preset)
        else:
            try:
                raw = json.loads(Path(args.config).read_text())
            except FileNotFoundError:
                print(f"error: config file not found: {args.config}", file=sys.stderr)
                return 2
            except json.JSONDecodeError as exc:
                print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
                return 2
        for assignment in args.override:
            _apply_override(raw, assignment)
        cfg = config_from_dict(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        written = run(cfg)
    except (
        EigensolverError,
        OverflowError,
        ValueError,
        np.linalg.LinAlgError,
        dynamics.DegenerateSteadyStateError,
    ) as exc:
        print(f"numerical failure in experiment {cfg.experiment!r}: {exc}", file=sys.stderr)
        return 3
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
