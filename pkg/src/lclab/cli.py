"""Configuration-driven experiment harness.

Subcommands: scan, protocol, bounds, validate-lattice, front.  JSON configs
in, CSV/JSON artifacts out; every file carries a metadata block with the
config hash so it is reproducible from its own header.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import dynamics, protocol
from .hamiltonian import HamiltonianSpec, build_power_law_ising
from .lattice import build_lattice, estimate_gamma, validate_summation_lemma

ARTIFACT_VERSION = "lclab-0.1.0"
ENV_PREFIX = "LCLAB_"


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.field_path = path


def _require(cfg: dict, path: str, key: str, types, default=None, optional=False):
    if key not in cfg:
        if optional:
            return default
        raise ConfigError(f"{path}.{key}", "missing required field")
    val = cfg[key]
    if not isinstance(val, types):
        tnames = types.__name__ if isinstance(types, type) \
            else "/".join(t.__name__ for t in types)
        raise ConfigError(f"{path}.{key}", f"expected {tnames}, got {type(val).__name__}")
    return val


def _number_list(cfg: dict, path: str, key: str, optional=False, default=None):
    val = _require(cfg, path, key, list, optional=optional, default=default)
    if val is default and optional:
        return default
    for k, item in enumerate(val):
        if not isinstance(item, (int, float)):
            raise ConfigError(f"{path}.{key}[{k}]", "expected a number")
    return [float(v) for v in val]


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _header_lines(cfg: dict, seed: int) -> list[str]:
    return [
        f"# artifact: {ARTIFACT_VERSION}",
        f"# config_hash: {_config_hash(cfg)}",
        f"# seed: {seed}",
        f"# created: {time.strftime('%Y-%m-%dT%H:%M:%S')}",
    ]


def _write_with_header(path: Path, cfg: dict, seed: int, body: str) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(_header_lines(cfg, seed)) + "\n")
        fh.write(body)


def _model_from_config(cfg: dict, path: str) -> HamiltonianSpec:
    model = _require(cfg, path, "model", dict)
    name = _require(model, f"{path}.model", "model", str, default="power_law_ising",
                    optional=True)
    if name == "power_law_ising":
        dim = _require(model, f"{path}.model", "dim", int)
        extents = _require(model, f"{path}.model", "extents", list)
        alpha = float(_require(model, f"{path}.model", "alpha", (int, float)))
        g0 = float(_require(model, f"{path}.model", "g0", (int, float)))
        B = float(_require(model, f"{path}.model", "B", (int, float),
                           default=0.0, optional=True))
        return build_power_law_ising(build_lattice(dim, extents), alpha, g0, B)
    if name == "custom":
        return HamiltonianSpec.from_json(json.dumps(model))
    raise ConfigError(f"{path}.model.model", f"unknown model {name!r}")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_scan(cfg: dict, out: Path, seed: int, workers: int, cap: int) -> int:
    H = _model_from_config(cfg, "scan")
    source = _require(cfg, "scan", "source", int)
    t_grid = _number_list(cfg, "scan", "t_grid")
    probe = _require(cfg, "scan", "probe", dict)
    if not ("sites" in probe) ^ ("radii" in probe):
        raise ConfigError("scan.probe", "need exactly one of 'sites' or 'radii'")
    pauli = _require(cfg, "scan", "pauli", str, default="X", optional=True)
    probe_pauli = _require(cfg, "scan", "probe_pauli", str, default="X", optional=True)
    attach = _require(cfg, "scan", "attach_bounds", bool, default=True, optional=True)
    params = None
    if attach and H.in_bound_regime:
        params = bounds_mod.assemble_for_model(H)
    scan = dynamics.lightcone_scan(H, source, t_grid, probe, pauli=pauli,
                                   probe_pauli=probe_pauli, params=params,
                                   cap=cap, workers=workers)
    scan.metadata["config_hash"] = _config_hash(cfg)
    scan.metadata["seed"] = seed
    _write_with_header(out / "scan.csv", cfg, seed, scan.csv_body())
    scan.to_json(out / "scan.json")
    print(f"scan: {len(scan.rows)} rows -> {out / 'scan.csv'}")
    return 0


def _cmd_protocol(cfg: dict, out: Path, seed: int, workers: int, cap: int) -> int:
    alpha = float(_require(cfg, "protocol", "alpha", (int, float)))
    D = _require(cfg, "protocol", "D", int)
    t_grid = _number_list(cfg, "protocol", "t_grid")
    R_grid = _number_list(cfg, "protocol", "R_grid")
    c_speed = float(_require(cfg, "protocol", "c_speed", (int, float),
                             default=1.0, optional=True))
    g = float(_require(cfg, "protocol", "g", (int, float), default=1.0, optional=True))
    theta_max = float(_require(cfg, "protocol", "theta_max", (int, float),
                               default=0.1, optional=True))
    spot = _require(cfg, "protocol", "spot_checks", int, default=0, optional=True)
    scan = protocol.saturation_scan(alpha, D, t_grid, R_grid, c_speed, g,
                                    theta_max, spot)
    _write_with_header(out / "protocol.csv", cfg, seed, scan.csv_body())
    fit = {"t_slope": scan.t_slope, "r_slope": scan.r_slope,
           "contour_exponent": scan.contour_exponent,
           "expected": {"t_slope": 2 * D + 1, "r_slope": -alpha,
                        "contour_exponent": (2 * D + 1) / alpha}}
    _write_with_header(out / "protocol_fit.json", cfg, seed,
                       json.dumps(fit, indent=1) + "\n")
    print(f"protocol: t-slope {scan.t_slope:+.3f}, R-slope {scan.r_slope:+.3f}, "
          f"contour {scan.contour_exponent:.3f}")
    return 0


def _cmd_bounds(cfg: dict, out: Path, seed: int, workers: int, cap: int) -> int:
    alpha = float(_require(cfg, "bounds", "alpha", (int, float)))
    D = _require(cfg, "bounds", "D", int)
    gamma = float(_require(cfg, "bounds", "gamma", (int, float)))
    g = float(_require(cfg, "bounds", "g", (int, float), default=1.0, optional=True))
    g0 = float(_require(cfg, "bounds", "g0", (int, float), default=1.0, optional=True))
    k = _require(cfg, "bounds", "k", int, default=None, optional=True)
    params = bounds_mod.assemble(alpha, D, g0, gamma, g, k)
    report = params.report()
    report["velocity_trace_log"] = list(params.velocity.log_vs[:50])
    _write_with_header(out / "bounds.json", cfg, seed,
                       json.dumps(report, indent=1) + "\n")

    curve = cfg.get("curve")
    if curve:
        ts = _number_list(curve, "bounds.curve", "t")
        xs = _number_list(curve, "bounds.curve", "x")
        lines = ["x,t,log_bound_comm,log_bound_local"]
        for t in ts:
            for x in xs:
                bc = bounds_mod.main_bound(x, t, 1.0, 1.0, params, "commutator")
                bl = bounds_mod.main_bound(x, t, 1.0, 1.0, params, "local")
                lines.append(f"{x!r},{t!r},{bc.log!r},{bl.log!r}")
        _write_with_header(out / "bound_curves.csv", cfg, seed,
                           "\n".join(lines) + "\n")
    print(f"bounds: log v* = {params.log_v_star:.6g}, "
          f"log C_H = {params.main.log_C_H:.6g} -> {out / 'bounds.json'}")
    return 0


def _cmd_validate_lattice(cfg: dict, out: Path, seed: int, workers: int,
                          cap: int) -> int:
    dim = _require(cfg, "validate-lattice", "dim", int)
    extents = _require(cfg, "validate-lattice", "extents", list)
    xi_range = _number_list(cfg, "validate-lattice", "xi_range")
    r_range = _number_list(cfg, "validate-lattice", "r_range")
    lat = build_lattice(dim, extents)
    rep = estimate_gamma(lat, xi_range, r_range)
    result = {
        "gamma": rep.gamma,
        "ratios": {"cardinality": rep.ratio_cardinality, "ball": rep.ratio_ball,
                   "coarse": rep.ratio_coarse, "shell": rep.ratio_shell},
        "xi_range": list(rep.xi_range), "r_range": list(rep.r_range),
    }
    summ = cfg.get("summation")
    if summ:
        xi = float(_require(summ, "validate-lattice.summation", "xi", (int, float)))
        x0 = float(_require(summ, "validate-lattice.summation", "x0", (int, float)))
        alphas = _number_list(summ, "validate-lattice.summation", "alphas")
        result["summation"] = []
        for a in alphas:
            srep = validate_summation_lemma(lat, lambda z: z ** (-a), xi, x0)
            result["summation"].append({
                "alpha": a, "passed": srep.passed,
                "worst_ratio": srep.worst_ratio, "gamma": srep.gamma})
    _write_with_header(out / "lattice.json", cfg, seed,
                       json.dumps(result, indent=1) + "\n")
    print(f"validate-lattice: gamma = {rep.gamma:.4f}")
    return 0


def _cmd_front(cfg: dict, out: Path, seed: int, workers: int, cap: int) -> int:
    delta = float(_require(cfg, "front", "delta", (int, float)))
    diagnostic = _require(cfg, "front", "diagnostic", str, default=None,
                          optional=True)
    if "scan" in cfg:
        scan = dynamics.LightConeScan.from_json(
            _require(cfg, "front", "scan", str))
    elif "synthetic" in cfg:
        syn = cfg["synthetic"]
        v = float(_require(syn, "front.synthetic", "velocity", (int, float)))
        ts = _number_list(syn, "front.synthetic", "t_grid")
        rs = _number_list(syn, "front.synthetic", "r_grid")
        rows = [dynamics.ScanRow(t, r, math_exp(-(r - v * t)), None, None, None)
                for t in ts for r in rs]
        scan = dynamics.LightConeScan(rows, {"probe_kind": "radii",
                                             "synthetic_velocity": v})
    else:
        raise ConfigError("front", "need 'scan' (path) or 'synthetic'")
    fit = dynamics.front_extract(scan, delta, diagnostic=diagnostic)
    result = {"velocity": fit.velocity, "intercept": fit.intercept,
              "residual": fit.residual, "fronts": [list(f) for f in fit.fronts]}
    _write_with_header(out / "front.json", cfg, seed,
                       json.dumps(result, indent=1) + "\n")
    print(f"front: v = {fit.velocity:.6f} (residual {fit.residual:.3g})")
    return 0


def math_exp(x: float) -> float:
    return float(np.exp(min(x, 700.0)))


COMMANDS = {
    "scan": _cmd_scan,
    "protocol": _cmd_protocol,
    "bounds": _cmd_bounds,
    "validate-lattice": _cmd_validate_lattice,
    "front": _cmd_front,
}


def run(command: str, config_path: str, out_dir: str = ".",
        workers: int | None = None, seed: int = 0,
        cap_sites: int = dynamics.DEFAULT_SITE_CAP) -> int:
    """Execute one subcommand; returns the process exit status."""
    if command not in COMMANDS:
        print(f"unknown command {command!r}", file=sys.stderr)
        return 2
    try:
        with open(config_path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return 2
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if workers is None:
        workers = os.cpu_count() or 1
    try:
        return COMMANDS[command](cfg, out, seed, workers, cap_sites)
    except ConfigError as exc:
        print(f"config error at {exc.field_path}: {exc}", file=sys.stderr)
        return 2
    except dynamics.ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    except bounds_mod.OutOfRegimeError as exc:
        print(f"out of regime: {exc}", file=sys.stderr)
        return 4


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lclab",
        description="light-cone laboratory for long-range interacting spin systems")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True,
                        default=os.environ.get(ENV_PREFIX + "CONFIG"))
    parser.add_argument("--out", default=os.environ.get(ENV_PREFIX + "OUT", "."))
    parser.add_argument("--workers", type=int,
                        default=int(os.environ.get(ENV_PREFIX + "WORKERS", "0")) or None)
    parser.add_argument("--seed", type=int,
                        default=int(os.environ.get(ENV_PREFIX + "SEED", "0")))
    parser.add_argument("--cap-sites", type=int,
                        default=int(os.environ.get(ENV_PREFIX + "CAP_SITES",
                                                   str(dynamics.DEFAULT_SITE_CAP))))
    args = parser.parse_args(argv)
    return run(args.command, args.config, args.out, args.workers, args.seed,
               args.cap_sites)


if __name__ == "__main__":
    sys.exit(main())
