"""Command-line entry point.

One subcommand per experiment driver or analytic computation; this module
only parses configuration, seeds the drivers, and writes files.  Exit codes:
0 success, 1 validation/usage error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys
import time

import numpy as np

from . import __version__
from .correlations import InvalidInputError
from .experiments import (
    ExperimentConfig,
    critical_experiment,
    gamma_sweep,
    haar_average,
    two_time_experiment,
    validate_covariance,
    wick_check,
)
from .gaussian_theory import (
    build_covariance_blocks,
    entropy_from_full_covariance,
    outcome_covariance,
    purification_rate,
    renyi_entropy,
    s2_rate,
    symplectic_eigenvalues,
    von_neumann_entropy,
)
from .io import (
    correlation_data_from_dict,
    correlation_data_to_dict,
    read_json,
    spectral_functions_from_dict,
    write_json,
    write_json_atomic,
    write_table_csv,
    write_trajectories_csv,
)
from .spin_chain import (
    NumericError,
    ResourceError,
    build_hamiltonian,
    ground_state,
    magnetization_observable,
    two_point_functions,
)

SUBCOMMANDS = ["ground-state", "correlations", "monitor", "sweep-gamma", "haar",
               "critical", "validate-cov", "wick", "theory", "entropy", "rates"]

DEFAULTS: dict[str, dict] = {
    "ground-state": {"L": 10, "J": 2 / 3, "state_seed": 1},
    "correlations": {"L": 10, "J": 2 / 3, "alpha": 0.5, "initial": "ground",
                     "times": [0.0, 0.5, 1.0], "gammas": [1.0, 1.0, 1.0],
                     "state_seed": 1},
    "monitor": {"L": 12, "J": 2 / 3, "alpha": 0.5, "initial": "ground",
                "times": [0.0, 1.0], "gammas": [1.0, 1.0], "shots": 4000,
                "seed": 0, "state_seed": 1, "workers": 1, "bin_width": None},
    "sweep-gamma": {"J": 2 / 3, "alpha": 0.5, "initial": "ground",
                    "times": [0.0, 1.0], "sweep_gammas": [0.4, 0.6, 0.8, 1.0],
                    "Ls": [8, 12], "shots": 20000, "seed": 0, "state_seed": 1,
                    "workers": 1},
    "haar": {"J": 2 / 3, "alpha": 0.5, "times": [0.0, 1.0],
             "gammas": [1.0, 1.0], "Ls": [8, 10, 12], "n_states": 32,
             "shots": 4000, "seed": 0, "state_seed": 1, "workers": 1},
    "critical": {"L": 16, "J": 1.0, "alpha": 15 / 16, "initial": "ground",
                 "times": [0.0, 1.0], "gammas": [2.0, 2.0], "shots": 8000,
                 "seed": 0, "state_seed": 1, "workers": 1, "bin_width": None},
    "validate-cov": {"L": 10, "J": 2 / 3, "alpha": 0.5, "initial": "ground",
                     "times": [0.0, 0.5, 1.0], "gammas": [0.8, 0.8, 0.8],
                     "shots": 20000, "seed": 0, "state_seed": 1, "workers": 1},
    "wick": {"J": 2 / 3, "alpha": 0.5, "Ls": [6, 8, 10, 12], "state_seed": 1},
    "theory": {"input": None, "m": [2, 3]},
    "entropy": {"input": None, "m": [2, 3]},
    "rates": {"input": None, "beta": None},
}


class CliUsageError(Exception):
    """Bad flags or malformed configuration (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliUsageError(message)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError as exc:
        raise CliUsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v != ""]
    except ValueError as exc:
        raise CliUsageError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> _Parser:
    parser = _Parser(prog="qmonitor",
                     description="Monitored macroscopic fluctuations in the "
                                 "quantum Ising chain: simulators and Gaussian theory.")
    parser.add_argument("--version", action="version", version=f"qmonitor {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override its entries")
        p.add_argument("--output-dir", default=None)
        p.add_argument("--dump-config", action="store_true",
                       help="print the resolved configuration and exit")
        defaults = DEFAULTS[name]
        for key, value in defaults.items():
            flag = "--" + key.replace("_", "-")
            if key in ("times", "gammas", "sweep_gammas"):
                p.add_argument(flag, type=_float_list, default=None)
            elif key == "Ls":
                p.add_argument(flag, type=_int_list, default=None)
            elif key == "m":
                p.add_argument(flag, type=_int_list, default=None)
            elif key in ("initial", "input"):
                p.add_argument(flag, type=str, default=None)
            elif isinstance(value, int) and not isinstance(value, bool):
                p.add_argument(flag, type=int, default=None)
            else:
                p.add_argument(flag, type=float, default=None)
    return parser


def resolve_config(name: str, args: argparse.Namespace) -> dict:
    """Defaults <- config file <- explicit flags, in increasing precedence."""
    config = dict(DEFAULTS[name])
    if args.config:
        loaded = read_json(args.config)
        unknown = set(loaded) - set(config)
        if unknown:
            raise CliUsageError(f"unknown config keys for {name}: {sorted(unknown)}")
        config.update(loaded)
    for key in DEFAULTS[name]:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    return config


def _experiment_config(config: dict, **overrides) -> ExperimentConfig:
    merged = {**config, **overrides}
    return ExperimentConfig(
        L=int(merged["L"]), J=float(merged["J"]), alpha=float(merged["alpha"]),
        initial=merged.get("initial", "ground"), times=merged["times"],
        gammas=merged["gammas"], shots=int(merged["shots"]),
        seed=int(merged["seed"]), state_seed=int(merged["state_seed"]),
        bin_width=merged.get("bin_width"), workers=int(merged.get("workers", 1)))


def _write_summary(path: str, times, stats) -> None:
    columns = ["event_index", "time", "gamma", "mean_m", "mean_se_m",
               "variance_m", "variance_x", "variance_se_x"]
    rows = [[k, float(times[k]), float(stats.gammas[k]), float(stats.means_m[k]),
             float(stats.mean_se_m[k]), float(stats.variances_m[k]),
             float(stats.variances_x[k]), float(stats.variance_se_x[k])]
            for k in range(len(times))]
    write_table_csv(path, columns, rows)


def _run_monitor(config: dict, outdir: str, critical: bool = False) -> list[str]:
    cfg = _experiment_config(config)
    runner = critical_experiment if critical else two_time_experiment
    res = runner(cfg)
    times = np.asarray(config["times"], dtype=float)
    gammas = np.asarray(config["gammas"], dtype=float)
    paths = [os.path.join(outdir, "trajectories.csv"),
             os.path.join(outdir, "summary.csv"),
             os.path.join(outdir, "results.json")]
    write_trajectories_csv(paths[0], res.outcomes, times, gammas)
    _write_summary(paths[1], times, res.stats)
    if critical:
        results = {"ks_statistic": res.ks_statistic, "ks_pvalue": res.ks_pvalue,
                   "bimodality": res.bimodality,
                   "histogram_edges": res.stats.edges,
                   "marginals": res.stats.marginals}
    else:
        results = {"delta_x": res.delta_x, "delta_se": res.delta_se,
                   "delta_predicted": res.delta_predicted,
                   "prediction": res.prediction,
                   "keldysh": res.keldysh, "response": res.response}
    write_json(paths[2], results)
    return paths


def run_subcommand(name: str, config: dict, outdir: str) -> list[str]:
    """Execute one subcommand; returns the list of files written."""
    if name == "ground-state":
        h = build_hamiltonian(int(config["L"]), float(config["J"]))
        gs = ground_state(h, seed=int(config["state_seed"]))
        path = os.path.join(outdir, "results.json")
        write_json(path, {"L": config["L"], "J": config["J"],
                          "energy": gs.energy, "gap": gs.gap})
        return [path]

    if name == "correlations":
        h = build_hamiltonian(int(config["L"]), float(config["J"]))
        if config["initial"] == "ground":
            psi0 = ground_state(h, seed=int(config["state_seed"])).state
        else:
            from .spin_chain import haar_random_state
            psi0 = haar_random_state(int(config["L"]), int(config["state_seed"]))
        obs = magnetization_observable(int(config["L"]), float(config["alpha"]), psi0)
        corr = two_point_functions(psi0, h, obs, np.asarray(config["times"], dtype=float),
                                   np.asarray(config["gammas"], dtype=float))
        path = os.path.join(outdir, "correlations.json")
        write_json(path, correlation_data_to_dict(corr))
        return [path]

    if name == "monitor":
        return _run_monitor(config, outdir, critical=False)

    if name == "critical":
        return _run_monitor(config, outdir, critical=True)

    if name == "sweep-gamma":
        cfg = _experiment_config(config, L=config["Ls"][0], gammas=[1.0, 1.0])
        res = gamma_sweep(cfg, config["sweep_gammas"], config["Ls"])
        paths = [os.path.join(outdir, "sweep.csv"), os.path.join(outdir, "results.json")]
        write_table_csv(paths[0],
                        ["L", "gamma", "delta", "delta_se", "delta_predicted", "chi"],
                        [[r.L, r.gamma, r.delta, r.delta_se, r.delta_predicted, r.chi]
                         for r in res.rows])
        write_json(paths[1], {
            "slopes": {str(L): v for L, v in res.slopes.items()},
            "slope_ses": {str(L): v for L, v in res.slope_ses.items()},
            "prefactors": {str(L): list(v) for L, v in res.prefactors.items()},
            "gamma_star": {str(L): (None if np.isinf(v) else v)
                           for L, v in res.gamma_star.items()}})
        return paths

    if name == "haar":
        cfg = _experiment_config(config, L=config["Ls"][0])
        rows = haar_average(cfg, config["Ls"], int(config["n_states"]))
        paths = [os.path.join(outdir, "haar.csv"), os.path.join(outdir, "results.json")]
        write_table_csv(paths[0], ["L", "mean_abs_delta", "se"],
                        [[r.L, r.mean_abs_delta, r.se] for r in rows])
        write_json(paths[1], {"deltas": {str(r.L): r.deltas for r in rows}})
        return paths

    if name == "validate-cov":
        cfg = _experiment_config(config)
        res = validate_covariance(cfg)
        path = os.path.join(outdir, "results.json")
        write_json(path, {"empirical": res.empirical, "predicted": res.predicted,
                          "standard_errors": res.se,
                          "max_deviation_se": res.max_deviation_se,
                          "means_m": res.means_m, "mean_se_m": res.mean_se_m})
        return [path]

    if name == "wick":
        rows = wick_check(float(config["J"]), config["Ls"], float(config["alpha"]),
                          int(config["state_seed"]))
        path = os.path.join(outdir, "wick.csv")
        write_table_csv(path, ["L", "q2", "q4", "ratio"],
                        [[r.L, r.q2, r.q4, r.ratio] for r in rows])
        return [path]

    if name == "theory":
        if not config.get("input"):
            raise CliUsageError("theory requires --input CORRELATIONS_JSON")
        corr = correlation_data_from_dict(read_json(config["input"]))
        blocks = build_covariance_blocks(corr)
        c_scaled = corr.scaled_keldysh()
        entropies = {f"renyi{m}": renyi_entropy(c_scaled, m) for m in config["m"]}
        entropies["von_neumann"] = von_neumann_entropy(c_scaled)
        path = os.path.join(outdir, "results.json")
        write_json(path, {"gxx": blocks.gxx, "gxp": blocks.gxp, "gpp": blocks.gpp,
                          "outcome_covariance": outcome_covariance(corr),
                          "symplectic_eigenvalues": symplectic_eigenvalues(blocks.assemble()),
                          "entropies": entropies,
                          "renyi2_from_full_covariance":
                              entropy_from_full_covariance(blocks, 2)})
        return [path]

    if name == "entropy":
        if not config.get("input"):
            raise CliUsageError("entropy requires --input CORRELATIONS_JSON")
        corr = correlation_data_from_dict(read_json(config["input"]))
        c_scaled = corr.scaled_keldysh()
        payload = {f"renyi{m}": renyi_entropy(c_scaled, m) for m in config["m"]}
        payload["von_neumann"] = von_neumann_entropy(c_scaled)
        path = os.path.join(outdir, "results.json")
        write_json(path, payload)
        return [path]

    if name == "rates":
        if not config.get("input"):
            raise CliUsageError("rates requires --input SPECTRUM_JSON")
        payload = read_json(config["input"])
        if config.get("beta") is not None:
            payload["beta"] = float(config["beta"])
        spec = spectral_functions_from_dict(payload)
        path = os.path.join(outdir, "results.json")
        write_json(path, {"beta": spec.beta, "s2_rate": s2_rate(spec),
                          "purification_rate_vn": purification_rate(spec, "vn"),
                          "purification_rate_renyi2": purification_rate(spec, "renyi2")})
        return [path]

    raise CliUsageError(f"unknown subcommand {name!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand is None:
            parser.print_help(sys.stderr)
            return 1
        config = resolve_config(args.subcommand, args)
        if args.dump_config:
            import json as _json
            print(_json.dumps(config, indent=2, sort_keys=True))
            return 0
        outdir = args.output_dir or os.path.join("runs", args.subcommand)
        os.makedirs(outdir, exist_ok=True)
        started = datetime.datetime.now(datetime.timezone.utc).isoformat()
        t0 = time.monotonic()
        outputs = run_subcommand(args.subcommand, config, outdir)
        manifest_path = os.path.join(outdir, "manifest.json")
        write_json_atomic(manifest_path, {
            "subcommand": args.subcommand,
            "config": config,
            "master_seed": config.get("seed"),
            "seed_derivation": "numpy SeedSequence(master_seed).spawn(shots); "
                               "one child stream per trajectory",
            "version": __version__,
            "started": started,
            "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "wall_time_s": time.monotonic() - t0,
            "outputs": [os.path.basename(p) for p in outputs],
        })
        return 0
    except (CliUsageError, InvalidInputError, ResourceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
