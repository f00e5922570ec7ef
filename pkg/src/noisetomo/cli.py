"""Command-line front end.

::

    noisetomo --mode simulate    --config run.json --data out.csv --out sim.json
    noisetomo --mode reconstruct --config run.json --data out.csv --out rec.json
    noisetomo --mode calibrate   --config run.json --data out.csv --out cal.json
    noisetomo --mode diagnose    --config run.json --data out.csv --out diag.json

Command-line flags override the configuration file. Exit codes: 0 success,
2 configuration error, 3 data error, 4 solver error, 5 internal consistency
failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import drift_series, probe_mean_from_blocked
from .errors import ConfigError, NoiseTomoError
from .fock import PhotonDistribution, SchemeParams
from .io import content_hash, read_measurements, to_jsonable, write_curves, write_measurements, write_report
from .povm import PovmModel, ProbeSetting, conditioning_report, design_matrix
from .reconstruction import ReconstructionOptions, build_problem, reconstruct
from .simulator import ExperimentPlan, drift_multipliers, model_probabilities, probe_schedule, simulate_clicks

log = logging.getLogger("noisetomo")

MODES = ("reconstruct", "simulate", "calibrate", "diagnose")
EXIT_CODES = {"config": 2, "data": 3, "solver": 4, "consistency": 5}

# top-level config keys each mode makes use of
_RELEVANT = {
    "reconstruct": {"scheme", "model", "seed", "bootstrap", "weighting", "normalization",
                    "drift_correction", "data", "out", "simulation"},
    "simulate": {"scheme", "model", "seed", "data", "out", "simulation"},
    "calibrate": {"scheme", "model", "drift_correction", "data", "out"},
    "diagnose": {"scheme", "model", "data", "out"},
}


@dataclass
class RunConfig:
    mode: str
    scheme: SchemeParams
    model: PovmModel = PovmModel.OVERLAP
    seed: int = 0
    bootstrap: int = 0
    weighting: str = "binomial"
    normalization: str = "constrained"
    drift_correct: bool = False
    reference_state: PhotonDistribution | None = None
    drift_window: int = 5
    data: Path | None = None
    out: Path | None = None
    simulation: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _distribution(values, what):
    try:
        return PhotonDistribution.from_probs(values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: {exc}") from None


def load_config(args) -> RunConfig:
    raw = {}
    base = Path.cwd()
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        base = path.parent
    mode = args.mode or raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {mode!r}")
    for key in raw:
        if key != "mode" and key not in _RELEVANT[mode]:
            log.warning("config key %r is ignored in %s mode", key, mode)

    try:
        scheme = SchemeParams(**raw.get("scheme", {}))
    except TypeError as exc:
        raise ConfigError(f"scheme: {exc}") from None

    drift = raw.get("drift_correction", {})
    if isinstance(drift, bool):
        drift = {"enabled": drift}
    ref = drift.get("reference_state")

    def resolve(p):
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else base / p

    cfg = RunConfig(
        mode=mode,
        scheme=scheme,
        model=PovmModel.parse(args.model or raw.get("model", "overlap")),
        seed=int(args.seed if args.seed is not None else raw.get("seed", 0)),
        bootstrap=int(args.bootstrap if args.bootstrap is not None else raw.get("bootstrap", 0)),
        weighting=raw.get("weighting", "binomial"),
        normalization=raw.get("normalization", "constrained"),
        drift_correct=bool(args.drift_correct or drift.get("enabled", False)),
        reference_state=None if ref is None else _distribution(ref, "drift_correction.reference_state"),
        drift_window=int(drift.get("window", 5)),
        data=Path(args.data) if args.data else resolve(raw.get("data")),
        out=Path(args.out) if args.out else resolve(raw.get("out")),
        simulation=raw.get("simulation", {}),
        raw=raw,
    )
    if cfg.bootstrap < 0:
        raise ConfigError("bootstrap must be >= 0")
    if mode in ("reconstruct", "calibrate", "diagnose"):
        if cfg.data is None:
            raise ConfigError(f"{mode} mode needs a measurement file (--data)")
        if not cfg.data.is_file():
            raise ConfigError(f"measurement file {cfg.data} not found")
    if mode == "simulate":
        if cfg.data is None:
            raise ConfigError("simulate mode needs --data for the generated measurement file")
        if "true_state" not in cfg.simulation:
            raise ConfigError("simulate mode needs simulation.true_state")
    if cfg.drift_correct and cfg.reference_state is None:
        raise ConfigError("drift correction needs drift_correction.reference_state")
    return cfg


def _effective_config(cfg: RunConfig) -> dict:
    return {
        "mode": cfg.mode,
        "scheme": cfg.scheme,
        "model": cfg.model,
        "seed": cfg.seed,
        "bootstrap": cfg.bootstrap,
        "weighting": cfg.weighting,
        "normalization": cfg.normalization,
        "drift_correction": {
            "enabled": cfg.drift_correct,
            "reference_state": None if cfg.reference_state is None else cfg.reference_state.probs,
            "window": cfg.drift_window,
        },
        "simulation": cfg.simulation,
    }


def _header(cfg: RunConfig, inputs) -> dict:
    effective = to_jsonable(_effective_config(cfg))
    canonical = json.dumps(effective, sort_keys=True).encode()
    return {
        "version": __version__,
        "config": effective,
        "seed": cfg.seed,
        "input_hash": content_hash(canonical, *inputs),
    }


def _simulation_settings(cfg: RunConfig):
    sim = cfg.simulation
    if "probe_means" in sim:
        return [ProbeSetting(i, float(m)) for i, m in enumerate(sim["probe_means"])]
    sched = sim.get("settings", {})
    return probe_schedule(cfg.scheme, int(sched.get("count", 150)), float(sched.get("max_mean", 200.0)),
                          kind=sched.get("kind", "response"), model=cfg.model)


def run_simulate(cfg: RunConfig) -> dict:
    sim = cfg.simulation
    truth = _distribution(sim["true_state"], "simulation.true_state")
    ref = sim.get("reference_state")
    settings = _simulation_settings(cfg)
    mult = None
    if "drift" in sim:
        mult = drift_multipliers(sim["drift"].get("profile", "linear"),
                                 float(sim["drift"].get("magnitude", 0.0)), len(settings))
    plan = ExperimentPlan(
        params=cfg.scheme,
        true_state=truth,
        settings=settings,
        pulses_per_setting=int(sim.get("pulses", 10**6)),
        model=cfg.model,
        eta_multipliers=mult,
        seed=cfg.seed,
        reference_state=None if ref is None else _distribution(ref, "simulation.reference_state"),
    )
    records = simulate_clicks(plan)
    calibration = sim.get("calibration", "probe_mean")
    write_measurements(cfg.data, records, settings, calibration=calibration)
    report = _header(cfg, [])
    report.update({
        "measurement_file": str(cfg.data),
        "true_state": truth.probs,
        "probe_means": [s.mean for s in settings],
        "efficiencies": plan.etas,
        "model_probabilities": model_probabilities(plan),
    })
    return report


def _load(cfg):
    records, settings = read_measurements(cfg.data)
    return records, settings


def run_reconstruct(cfg: RunConfig) -> dict:
    records, settings = _load(cfg)
    options = ReconstructionOptions(
        weighting=cfg.weighting,
        normalization=cfg.normalization,
        drift_correction=cfg.drift_correct,
        reference_state=cfg.reference_state,
        drift_window=cfg.drift_window,
    )
    problem = build_problem(records, cfg.scheme, cfg.model, settings, options)
    result = reconstruct(records, cfg.scheme, cfg.model, problem=problem,
                         bootstrap_replicates=cfg.bootstrap, seed=cfg.seed)
    d = result.diagnostics
    report = _header(cfg, [cfg.data])
    report["estimate"] = result.estimate.probs
    report["fitted_mean_photon_number"] = result.estimate.mean()
    report["residual_norm"] = result.residual_norm
    report["weighted"] = result.weighted
    report["fit"] = {k: d[k] for k in ("pre_normalization_total", "kkt_violation", "iterations",
                                       "normalization", "model", "degenerate_settings")}
    report["conditioning"] = {
        "condition_number": result.condition_number,
        "singular_values": d["singular_values"],
        "effective_rank": d["effective_rank"],
        "messages": d["conditioning_messages"],
    }
    if result.bootstrap_mean is not None:
        report["bootstrap"] = {
            "replicates": cfg.bootstrap,
            "failures": d.get("bootstrap_failures", 0),
            "mean": result.bootstrap_mean,
            "std": result.bootstrap_std,
        }
    if result.per_setting_eta_used is not None:
        report["drift"] = {"eta": result.per_setting_eta_used, "raw": d["drift_raw"],
                           "low_confidence": d["drift_low_confidence"], "window": cfg.drift_window}
    report["residuals"] = {
        "setting_id": d["setting_ids"],
        "probe_mean": d["probe_means"],
        "p_hat": d["p_hat"],
        "p_model": d["p_model"],
        "standardized": d["standardized_residuals"],
    }
    if "true_state" in cfg.simulation:
        truth = _distribution(cfg.simulation["true_state"], "simulation.true_state")
        size = max(truth.cutoff, result.estimate.cutoff) + 1
        report["truth_vs_estimate"] = {
            "truth": truth.padded(size - 1),
            "estimate": result.estimate.padded(size - 1),
            "total_variation": result.estimate.total_variation(truth),
            "max_abs_error": float(np.abs(truth.padded(size - 1) - result.estimate.padded(size - 1)).max()),
        }
    if cfg.out is not None:
        write_curves(_curves_path(cfg.out), d["setting_ids"], d["probe_means"], d["p_hat"], d["p_model"])
    return report


def _curves_path(out: Path) -> Path:
    return out.with_name(out.stem + ".curves.csv")


def run_calibrate(cfg: RunConfig) -> dict:
    records, settings = _load(cfg)
    report = _header(cfg, [cfg.data])
    drift = None
    if cfg.drift_correct:
        drift = drift_series(cfg.scheme, cfg.reference_state, records, cfg.drift_window)
        report["drift"] = {"setting_id": drift.setting_ids, "eta": drift.eta, "raw": drift.raw,
                           "low_confidence": drift.low_confidence, "window": cfg.drift_window}
    if settings is None:
        etas = drift.eta if drift is not None else np.full(len(records), cfg.scheme.eta)
        means = [probe_mean_from_blocked(cfg.scheme, r.blocked_no_clicks, r.pulses, eta=e, model=cfg.model)
                 for r, e in zip(records, etas)]
        report["probe_means"] = {"setting_id": [r.setting_id for r in records], "mean": means}
    else:
        report["probe_means"] = {"setting_id": [s.id for s in settings], "mean": [s.mean for s in settings],
                                 "source": "measurement file"}
    return report


def run_diagnose(cfg: RunConfig) -> dict:
    records, settings = _load(cfg)
    problem = build_problem(records, cfg.scheme, cfg.model, settings,
                            ReconstructionOptions(drift_correction=cfg.drift_correct,
                                                  reference_state=cfg.reference_state,
                                                  drift_window=cfg.drift_window))
    rep = problem.conditioning
    report = _header(cfg, [cfg.data])
    report["conditioning"] = {
        "condition_number": rep.condition_number,
        "singular_values": rep.singular_values,
        "effective_rank": rep.effective_rank,
        "n_settings": rep.n_settings,
        "n_unknowns": rep.n_unknowns,
        "duplicate_settings": rep.duplicate_settings,
        "underdetermined": rep.underdetermined,
        "messages": rep.messages,
    }
    return report


_RUNNERS = {
    "simulate": run_simulate,
    "reconstruct": run_reconstruct,
    "calibrate": run_calibrate,
    "diagnose": run_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisetomo",
        description="Photon-number reconstruction from on/off detector counts with thermal probes.",
    )
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--data", help="measurement file (read, or written in simulate mode)")
    parser.add_argument("--out", help="report file (JSON); stdout when omitted")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--bootstrap", type=int, metavar="B", help="bootstrap replicates")
    parser.add_argument("--drift-correct", action="store_true", help="correct efficiency drift")
    parser.add_argument("--model", choices=[m.value for m in PovmModel])
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(cfg: RunConfig) -> dict:
    report = _RUNNERS[cfg.mode](cfg)
    if cfg.out is not None:
        write_report(cfg.out, report)
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    logging.captureWarnings(True)
    try:
        cfg = load_config(args)
        report = run(cfg)
    except NoiseTomoError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    if cfg.out is None:
        from .io import dump_report
        sys.stdout.write(dump_report(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
