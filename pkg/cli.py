#!/usr/bin/env python3
"""
EDM Relax command line
======================

Runs the semiclassical and quantum experiments of the dissipative extended
Dicke model and writes their data as CSV and JSON.

Usage:
    python cli.py simulate --preset bare --out results
    python cli.py diagonalize --preset bare --check
    python cli.py fixed-points --preset bare
    python cli.py sweep --preset sweep --out results
    python cli.py oracle --preset oracle

Exit codes: 0 ok, 2 config, 3 numeric, 4 phase, 5 truncation.
"""

import argparse
import copy
import json
import logging
import os
import sys
from dataclasses import asdict
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from diag import (BathSpec, FlatSpectralDensity, OhmicSpectralDensity, bogoliubov_coefficients,
                  bogoliubov_matrix, diagonalize, dressed_coefficients,
                  effective_viscosities, energies_full, generic_dressed_coefficients,
                  inverse_bogoliubov_matrix)
from dynamics import (ConvergenceError, IntegrationError, SolverConfig, detect_convergence,
                      energy_series, integrate, linearized_frequencies, refine_fixed_point)
from model import (SUPERRADIANT, ModelParams, ParameterError, PhaseError, SemiclassicalState,
                   classify_phase, energy, normal_minimum, phase_summary, sr_minimum)
from oracle import FockTruncation, TruncationError, run_oracle
from semiclassical import (DissipatorKind, bare_fixed_points, damped_critical_values, make_rhs)

ROOT_DIR = Path(__file__).parent
PRESET_DIR = ROOT_DIR / "presets"
LOG_FILE = "edm_log.txt"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PHASE = 4
EXIT_TRUNCATION = 5


class ConfigError(ValueError):
    """Configuration file, preset or override could not be used."""


DEFAULT_CONFIG: Dict[str, Any] = {
    "model": {
        "omega": 1.0,
        "e_z": 0.2,
        "g": 0.46,
        "eps": -1.0,
        "s": 1.0,
        "kappa1": 0.02,
        "kappa2": 0.02,
        "n_atoms": None,
    },
    "dissipator": {
        "kind": "bare",
        "branch": 1,
        "hp_normalization": "compact",
    },
    "initial": {
        "mode": "minimum+noise",
        "sigma": 1e-3,
        "state": None,
    },
    "solver": SolverConfig(t_end=2500.0).to_dict(),
    "baths": {
        "photon": None,
        "spin": None,
    },
    "oracle": {
        "n_c": 8,
        "n_b": 8,
        "edge_threshold": 1e-4,
        "temperature": 0.0,
        "channels": "dressed",
        "method": "steady",
        "t_end": None,
        "rates": None,
    },
    "sweep": {
        "g_min": 0.05,
        "g_max": 1.0,
        "g_points": 20,
        "eps_min": -2.0,
        "eps_max": 1.0,
        "eps_points": 13,
        "workers": 1,
    },
    "output": {
        "dir": os.getenv("EDM_OUT_DIR", "results"),
        "prefix": "edm",
        "convergence_eps": 1e-4,
        "csv_config_comment": False,
    },
    "seed": 0,
}


def setup_logging(out_dir: Path, level: Optional[str] = None):
    out_dir.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, (level or os.getenv("EDM_LOG_LEVEL", "INFO")).upper(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(out_dir / LOG_FILE),
            logging.StreamHandler()
        ],
        force=True,
    )


# Configuration

def deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _read_json(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"cannot parse {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return data


def load_preset(name: str) -> Dict[str, Any]:
    path = PRESET_DIR / f"{name}.json"
    if not path.exists():
        available = sorted(p.stem for p in PRESET_DIR.glob("*.json"))
        raise ConfigError(f"unknown preset '{name}' (available: {', '.join(available)})")
    return _read_json(path)


def parse_override(item: str):
    """'section.key=value' -> (['section', 'key'], value); value is JSON when it parses."""
    if "=" not in item:
        raise ConfigError(f"override '{item}' is not of the form section.key=value")
    dotted, raw = item.split("=", 1)
    keys = [k for k in dotted.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override '{item}' has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return keys, value


def apply_override(config: Dict[str, Any], keys: List[str], value):
    node = config
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise ConfigError(f"unknown config section '{'.'.join(keys[:-1])}'")
        node = node[key]
    node[keys[-1]] = value


def validate_config(config: Dict[str, Any]):
    unknown = set(config) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for section, block in DEFAULT_CONFIG.items():
        if isinstance(block, dict) and not isinstance(config[section], dict):
            raise ConfigError(f"config section '{section}' must be an object")
    sigma = config["initial"].get("sigma", 0.0)
    if not isinstance(sigma, (int, float)) or sigma < 0:
        raise ConfigError(f"initial.sigma must be a non-negative number, got {sigma!r}")


def resolve_config(preset: Optional[str] = None, config_path: Optional[str] = None,
                   overrides: Optional[List[str]] = None, seed: Optional[int] = None,
                   out_dir: Optional[str] = None) -> Dict[str, Any]:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if preset:
        config = deep_merge(config, load_preset(preset))
    if config_path:
        config = deep_merge(config, _read_json(Path(config_path)))
    for item in overrides or []:
        keys, value = parse_override(item)
        apply_override(config, keys, value)
    if seed is not None:
        config["seed"] = seed
    if out_dir is not None:
        config["output"]["dir"] = out_dir
    validate_config(config)
    return config


def model_params(config: Dict[str, Any]) -> ModelParams:
    return ModelParams.from_dict(config["model"])


def _spectral(block: Dict[str, Any]):
    kind = str(block.get("kind", "ohmic")).lower()
    eta = float(block.get("eta", 0.0))
    if kind == "ohmic":
        return OhmicSpectralDensity(eta, float(block.get("cutoff", 10.0)))
    if kind == "flat":
        return FlatSpectralDensity(eta)
    raise ConfigError(f"unknown spectral density '{kind}' (choose from ohmic, flat)")


def build_baths(config: Dict[str, Any]):
    """(photon bath, spin bath), or None when neither is configured."""
    blocks = config["baths"]
    if not blocks.get("photon") and not blocks.get("spin"):
        return None
    baths = []
    for key, label in (("photon", "a"), ("spin", "S")):
        block = blocks.get(key) or {"kind": "flat", "eta": 0.0}
        baths.append(BathSpec(_spectral(block), float(block.get("temperature", 0.0)), label))
    return baths[0], baths[1]


def build_initial_state(config: Dict[str, Any], params: ModelParams,
                        rng: np.random.Generator) -> np.ndarray:
    block = config["initial"]
    mode = str(block.get("mode", "minimum+noise")).lower()
    if mode == "explicit":
        state = block.get("state")
        if state is None or len(state) != 5:
            raise ConfigError(f"initial.state must list 5 components, got {state!r}")
        return np.asarray(state, dtype=float)
    if mode not in ("minimum+noise", "minimum"):
        raise ConfigError(f"unknown initial mode '{mode}' (choose from minimum+noise, minimum, explicit)")
    if classify_phase(params) == SUPERRADIANT:
        start = sr_minimum(params, int(config["dissipator"].get("branch", 1))).state.as_array()
    else:
        start = normal_minimum(params)[0].as_array()
    sigma = float(block.get("sigma", 0.0)) if mode == "minimum+noise" else 0.0
    if sigma > 0:
        start = start + rng.normal(0.0, sigma, size=start.shape)
    return start


# Output

def output_dir(config: Dict[str, Any]) -> Path:
    path = Path(config["output"]["dir"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def output_path(config: Dict[str, Any], suffix: str) -> Path:
    return output_dir(config) / f"{config['output']['prefix']}_{suffix}"


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    return value


def write_json(path: Path, payload: Dict[str, Any], config: Dict[str, Any]):
    document = dict(_jsonable(payload))
    document["config"] = _jsonable(config)
    with open(path, "w") as f:
        json.dump(document, f, indent=2, sort_keys=True)
    logging.info(f"wrote {path}")


def write_csv(path: Path, frame: pd.DataFrame, config: Dict[str, Any]):
    """Plain CSV with the header on line 1; the config goes to a sidecar unless inlined."""
    inline = bool(config["output"].get("csv_config_comment", False))
    with open(path, "w", newline="") as f:
        if inline:
            f.write("# config: " + json.dumps(_jsonable(config), sort_keys=True) + "\n")
        frame.to_csv(f, index=False, float_format="%.17g")
    if not inline:
        with open(config_sidecar(path), "w") as f:
            json.dump(_jsonable(config), f, indent=2, sort_keys=True)
    logging.info(f"wrote {path} ({len(frame)} rows)")


def config_sidecar(path: Path) -> Path:
    return Path(path).with_suffix(".config.json")


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def _state_dict(values) -> Dict[str, float]:
    return asdict(SemiclassicalState.from_array(values))


# Commands

def _simulation_target(kind: DissipatorKind, params: ModelParams, branch: int,
                       final: np.ndarray):
    """Label and state the run is expected to approach."""
    if kind is DissipatorKind.BARE:
        points = bare_fixed_points(params)
        distances = [np.max(np.abs(p.as_array() - final)) for p in points]
        best = int(np.argmin(distances))
        label = "trivial fixed point" if best == 0 else "bare fixed point"
        return label, points[best].as_array()
    if classify_phase(params) == SUPERRADIANT:
        return "superradiant minimum", sr_minimum(params, branch).state.as_array()
    return "normal minimum", normal_minimum(params)[0].as_array()


def cmd_simulate(config: Dict[str, Any]) -> int:
    params = model_params(config)
    kind = DissipatorKind.parse(config["dissipator"]["kind"])
    branch = int(config["dissipator"].get("branch", 1))
    solver = SolverConfig.from_dict(config["solver"])
    rng = np.random.default_rng(config.get("seed", 0))

    diag, kappa_eff = None, None
    if kind is DissipatorKind.DRESSED:
        diag = diagonalize(params, branch)
        baths = build_baths(config)
        if baths is not None:
            kappa_eff = effective_viscosities(diag, baths[0], baths[1], params,
                                              config["dissipator"].get("hp_normalization", "compact"))
    rhs = make_rhs(kind, params, branch, diag, kappa_eff)
    y0 = build_initial_state(config, params, rng)
    traj = integrate(rhs, y0, solver, {"params": params.to_dict(), "dissipator": kind.value})

    label, target = _simulation_target(kind, params, branch, traj.final_state)
    converged_at = detect_convergence(traj, target, float(config["output"].get("convergence_eps", 1e-4)))
    energies = energy(traj.states, params)
    summary = {
        "dissipator": kind.value,
        "branch": branch,
        "initial_state": _state_dict(y0),
        "final_state": _state_dict(traj.final_state),
        "target": label,
        "target_state": _state_dict(target),
        "distance_to_target": float(np.max(np.abs(traj.final_state - target))),
        "converged_at": converged_at,
        "initial_energy": float(energies[0]),
        "final_energy": float(energies[-1]),
        "target_energy": energy(target, params),
        "kappa_eff": list(kappa_eff) if kappa_eff is not None else None,
        "metadata": traj.metadata,
    }
    if classify_phase(params) == SUPERRADIANT:
        summary["e_sr"] = sr_minimum(params, branch).energy

    write_csv(output_path(config, "trajectory.csv"), traj.to_frame(params), config)
    write_csv(output_path(config, "energy.csv"), energy_series(traj, params), config)
    write_json(output_path(config, "summary.json"), summary, config)
    status = "✅" if converged_at is not None else "⚠️"
    print(f"{status} {kind.value} run: final energy {summary['final_energy']:.10g}, "
          f"target {label}, converged at {converged_at}")
    return EXIT_OK


def diagonalization_checks(params: ModelParams, branch: int) -> Dict[str, float]:
    """Residuals of the closed-form energies, Bogoliubov algebra and the A..F table."""
    diag = diagonalize(params, branch)
    coeffs = bogoliubov_coefficients(diag)
    full = energies_full(params, diag)
    closed = (diag.eps1, diag.eps2)
    linear = linearized_frequencies(params, branch)
    round_trip = inverse_bogoliubov_matrix(coeffs) @ bogoliubov_matrix(coeffs) - np.eye(4)
    table = dressed_coefficients(diag).as_array()
    generic = generic_dressed_coefficients(diag, coeffs).as_array()
    return {
        "normalization": float(np.max(np.abs(coeffs.norms() - 1.0))),
        "closed_vs_full": float(max(abs(a - b) / b for a, b in zip(closed, full))),
        "closed_vs_linearized": float(max(abs(a - b) / b for a, b in zip(closed, linear))),
        "round_trip": float(np.max(np.abs(round_trip))),
        "table_vs_generic": float(np.max(np.abs(table - generic))),
    }


def cmd_diagonalize(config: Dict[str, Any], check: bool = False) -> int:
    params = model_params(config)
    branch = int(config["dissipator"].get("branch", 1))
    diag = diagonalize(params, branch)
    report = diag.to_dict()
    report["coefficients"] = bogoliubov_coefficients(diag).to_dict()
    report["dressed"] = dressed_coefficients(diag).to_dict()
    baths = build_baths(config)
    if baths is not None:
        report["kappa_eff"] = list(effective_viscosities(
            diag, baths[0], baths[1], params, config["dissipator"].get("hp_normalization", "compact")))
    if check:
        report["checks"] = diagonalization_checks(params, branch)
        worst = max(report["checks"].values())
        print(f"{'✅' if worst < 1e-6 else '⚠️'} largest check residual {worst:.3e}")
    write_json(output_path(config, "diag.json"), report, config)
    print(json.dumps(_jsonable(report), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_fixed_points(config: Dict[str, Any]) -> int:
    params = model_params(config)
    rhs = make_rhs(DissipatorKind.BARE, params)
    rows = []
    for index, point in enumerate(bare_fixed_points(params)):
        refined = refine_fixed_point(rhs, point)
        rows.append({
            "index": index,
            "analytic": _state_dict(point.as_array()),
            "refined": _state_dict(refined.as_array()),
            "energy": energy(point, params),
            "refined_energy": energy(refined, params),
            "residual": float(np.max(np.abs(rhs(0.0, refined.as_array())))),
        })
    report = {"fixed_points": rows, "phase": classify_phase(params)}
    try:
        g_c, eps_c = damped_critical_values(params)
        report.update({"g_c_damped": g_c, "eps_c_damped": eps_c})
    except ParameterError as e:
        logging.info(f"no damped critical values: {e}")
    if classify_phase(params) == SUPERRADIANT:
        report["sr_minima"] = [_state_dict(sr_minimum(params, b).state.as_array()) for b in (1, -1)]
    write_json(output_path(config, "fixed_points.json"), report, config)
    for row in rows:
        print(f"✅ point {row['index']}: E = {row['energy']:.12g}, |rhs| = {row['residual']:.2e}")
    return EXIT_OK


def sweep_cell(cell) -> Dict[str, Any]:
    """One (g, eps) grid cell; module level so a worker pool can pickle it."""
    model_block, g, eps = cell
    params = ModelParams.from_dict(dict(model_block, g=g, eps=eps))
    row = {"g": g, "eps": eps}
    row.update(phase_summary(params))
    try:
        row["g_c_damped"], row["eps_c_damped"] = damped_critical_values(params)
    except ParameterError:
        row["g_c_damped"], row["eps_c_damped"] = float("nan"), float("nan")
    return row


def cmd_sweep(config: Dict[str, Any]) -> int:
    block = config["sweep"]
    g_values = np.linspace(block["g_min"], block["g_max"], int(block["g_points"]))
    eps_values = np.linspace(block["eps_min"], block["eps_max"], int(block["eps_points"]))
    cells = [(config["model"], float(g), float(eps)) for eps in eps_values for g in g_values]
    workers = int(block.get("workers", 1))
    logging.info(f"sweeping {len(cells)} cells on {workers} worker(s)")
    if workers > 1:
        with Pool(workers) as pool:
            rows = pool.map(sweep_cell, cells)
    else:
        rows = [sweep_cell(cell) for cell in cells]
    frame = pd.DataFrame(rows, columns=["g", "eps", "phase", "e_normal", "e_sr", "g_c",
                                        "g_c_damped", "eps_c_damped"])
    write_csv(output_path(config, "sweep.csv"), frame, config)
    counts = frame["phase"].value_counts().to_dict()
    print(f"✅ sweep of {len(frame)} cells: {counts}")
    return EXIT_OK


def oracle_rates(config: Dict[str, Any], diag, params: ModelParams):
    block = config["oracle"]
    if block.get("rates") is not None:
        rates = block["rates"]
        return float(rates[0]), float(rates[1])
    baths = build_baths(config)
    if baths is not None and block.get("channels", "dressed") == "dressed":
        return effective_viscosities(diag, baths[0], baths[1], params,
                                     config["dissipator"].get("hp_normalization", "compact"))
    return params.kappa1, params.kappa2


def cmd_oracle(config: Dict[str, Any]) -> int:
    params = model_params(config)
    block = config["oracle"]
    diag = diagonalize(params, int(config["dissipator"].get("branch", 1)))
    trunc = FockTruncation(int(block["n_c"]), int(block["n_b"]), float(block["edge_threshold"]))
    rates = oracle_rates(config, diag, params)
    report = run_oracle(diag, trunc, float(block.get("temperature", 0.0)),
                        str(block.get("channels", "dressed")), rates,
                        method=str(block.get("method", "steady")),
                        t_end=block.get("t_end"))
    write_json(output_path(config, "oracle.json"), report, config)
    print(f"✅ oracle {report['channels']}: <H> = {report['steady_energy']:.8g}, "
          f"E0 = {report['ground_energy']:.8g}, fidelity = {report['fidelity']:.6f}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "diagonalize": cmd_diagonalize,
    "fixed-points": cmd_fixed_points,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Dissipative extended Dicke model toolkit")
    parser.add_argument("command", choices=list(COMMANDS), help="Experiment to run")
    parser.add_argument("--config", help="JSON config file merged over the preset")
    parser.add_argument("--preset", help="Preset name under presets/ (bare, adhoc, dressed, oracle, sweep)")
    parser.add_argument("--out", help="Output directory (default: $EDM_OUT_DIR or results)")
    parser.add_argument("--seed", type=int, help="Seed for the initial-state noise")
    parser.add_argument("--check", action="store_true", help="Cross-check the diagonalization")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="Override one config value")
    parser.add_argument("--log-level", help="Logging level (default: $EDM_LOG_LEVEL or INFO)")
    return parser


def run_command(command: str, config: Dict[str, Any], check: bool = False) -> int:
    """Run one command and map its failure to an exit code."""
    try:
        if command == "diagonalize":
            return cmd_diagonalize(config, check=check)
        return COMMANDS[command](config)
    except PhaseError as e:
        logging.error(f"❌ {e}")
        return EXIT_PHASE
    except (ConfigError, ParameterError, OSError) as e:
        logging.error(f"❌ {e}")
        return EXIT_CONFIG
    except (IntegrationError, ConvergenceError, ArithmeticError) as e:
        logging.error(f"❌ {e}")
        return EXIT_NUMERIC
    except TruncationError as e:
        logging.error(f"❌ {e}")
        return EXIT_TRUNCATION


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args.preset, args.config, args.overrides, args.seed, args.out)
        out_dir = output_dir(config)
    except (ConfigError, OSError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CONFIG
    setup_logging(out_dir, args.log_level)
    logging.info(f"{args.command}: preset={args.preset}, out={out_dir}")
    return run_command(args.command, config, check=args.check)


if __name__ == "__main__":
    sys.exit(main())
