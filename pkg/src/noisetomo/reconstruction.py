"""Photon-number reconstruction from dark counts, with parametric bootstrap."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calibration import ClickRecord, DriftSeries, drift_series, probe_mean_from_blocked
from .errors import ConfigError, DataError, NoiseTomoError, SolverError
from .fock import PhotonDistribution, SchemeParams
from .nnls import nnls_solve
from .povm import ConditioningReport, PovmMatrix, PovmModel, ProbeSetting, conditioning_report, design_matrix

__all__ = [
    "ReconstructionOptions",
    "ReconstructionResult",
    "BootstrapResult",
    "Problem",
    "build_problem",
    "reconstruct",
    "bootstrap",
]

log = logging.getLogger(__name__)

P_CLIP = 1e-9


@dataclass(frozen=True)
class ReconstructionOptions:
    """Knobs of :func:`reconstruct`.

    Attributes
    ----------
    weighting : {"binomial", "uniform"}
        ``binomial`` weights each setting by ``M / (p (1 - p))``.
    normalization : {"constrained", "post"}
        ``constrained`` fits on the probability simplex; ``post`` fits with
        nonnegativity only and rescales the result to unit sum afterwards.
    drift_correction : bool
        Re-estimate the detector efficiency per setting from signal-only
        counts of ``reference_state``.
    reference_state : PhotonDistribution, optional
        Known signal used for the signal-only counts.
    drift_window : int
        Moving-average window for the efficiency series.
    """

    weighting: str = "binomial"
    normalization: str = "constrained"
    drift_correction: bool = False
    reference_state: PhotonDistribution | None = None
    drift_window: int = 5
    max_iter: int | None = None

    def __post_init__(self):
        if self.weighting not in ("binomial", "uniform"):
            raise ConfigError(f"unknown weighting {self.weighting!r}")
        if self.normalization not in ("constrained", "post"):
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if self.drift_correction and self.reference_state is None:
            raise ConfigError("drift correction needs a reference state")
        if self.drift_window < 1:
            raise ConfigError("drift_window must be >= 1")


@dataclass(frozen=True)
class Problem:
    """Design matrix and counts ready for repeated solving."""

    povm: PovmMatrix
    records: tuple
    pulses: np.ndarray
    no_clicks: np.ndarray
    options: ReconstructionOptions
    drift: DriftSeries | None = None
    conditioning: ConditioningReport | None = None


@dataclass(frozen=True)
class ReconstructionResult:
    estimate: PhotonDistribution
    residual_norm: float
    weighted: bool
    condition_number: float
    bootstrap_mean: np.ndarray | None = None
    bootstrap_std: np.ndarray | None = None
    per_setting_eta_used: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BootstrapResult:
    mean: np.ndarray
    std: np.ndarray
    replicates: np.ndarray
    failures: int
    requested: int


def _resolve_settings(records, settings, params, model, etas):
    if settings is not None:
        by_id = {s.id: s for s in settings}
        missing = [r.setting_id for r in records if r.setting_id not in by_id]
        if missing:
            raise DataError(f"no probe mean for settings {missing[:5]}")
        return [by_id[r.setting_id] for r in records]
    out = []
    for i, r in enumerate(records):
        if r.blocked_no_clicks is None:
            raise DataError(f"setting {r.setting_id}: neither a probe mean nor blocked counts")
        eta = params.eta if etas is None else etas[i]
        mean = probe_mean_from_blocked(params, r.blocked_no_clicks, r.pulses, eta=eta, model=model)
        out.append(ProbeSetting(r.setting_id, mean))
    return out


def build_problem(records, params: SchemeParams, model="overlap", settings=None,
                  options: ReconstructionOptions | None = None) -> Problem:
    """Calibrate and assemble the design matrix once for many solves."""
    options = options or ReconstructionOptions()
    model = PovmModel.parse(model)
    records = tuple(records)
    if not records:
        raise DataError("no settings")
    ids = [r.setting_id for r in records]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate setting ids in records")
    for r in records:
        if not isinstance(r, ClickRecord):
            raise DataError(f"expected ClickRecord, got {type(r).__name__}")

    drift = None
    etas = None
    if options.drift_correction:
        drift = drift_series(params, options.reference_state, records, options.drift_window)
        etas = drift.eta
    resolved = _resolve_settings(records, settings, params, model, etas)
    povm = design_matrix(model, params, resolved, per_setting_eta=etas)
    if povm.shape[0] < povm.shape[1]:
        log.warning("%d settings for %d unknowns", povm.shape[0], povm.shape[1])
    report = conditioning_report(povm)
    pulses = np.array([r.pulses for r in records], dtype=float)
    no_clicks = np.array([r.no_clicks for r in records], dtype=float)
    return Problem(povm, records, pulses, no_clicks, options, drift, report)


def _weights(pulses, no_clicks, weighting):
    degenerate = (no_clicks == 0) | (no_clicks == pulses)
    if weighting == "uniform":
        return np.ones_like(pulses), degenerate
    p = np.clip(no_clicks / pulses, P_CLIP, 1.0 - P_CLIP)
    w = pulses / (p * (1.0 - p))
    if degenerate.any():
        # the clipped variance would inflate these rows; give them the
        # smallest weight seen among informative rows instead
        floor = w[~degenerate].min() if (~degenerate).any() else 4.0 * pulses.min()
        w[degenerate] = floor
    return w, degenerate


def _solve(problem: Problem, no_clicks):
    opts = problem.options
    a = problem.povm.elements
    b = no_clicks / problem.pulses
    w, degenerate = _weights(problem.pulses, no_clicks, opts.weighting)
    sum_to = 1.0 if opts.normalization == "constrained" else None
    sol = nnls_solve(a, b, w, sum_to=sum_to, max_iter=opts.max_iter)
    total = float(sol.x.sum())
    if total <= 0:
        raise SolverError("fit returned the zero vector; no distribution to normalize", sol.x)
    return sol, total, w, degenerate


def reconstruct(records, params: SchemeParams, model="overlap", settings=None,
                options: ReconstructionOptions | None = None, problem: Problem | None = None,
                bootstrap_replicates=0, seed=None) -> ReconstructionResult:
    """Infer the photon-number distribution from dark counts.

    Parameters
    ----------
    records : sequence of ClickRecord
    params : SchemeParams
    model : PovmModel or str
    settings : sequence of ProbeSetting, optional
        Probe means by setting id. When omitted, they are derived from the
        records' blocked-signal counts.
    options : ReconstructionOptions, optional
    problem : Problem, optional
        Prebuilt problem (skips calibration and design assembly).
    bootstrap_replicates : int
        If positive, attach bootstrap mean and standard deviation.
    seed : int, optional
        Seed of the bootstrap resampling.
    """
    if problem is None:
        problem = build_problem(records, params, model, settings, options)
    sol, total, w, degenerate = _solve(problem, problem.no_clicks)
    estimate = PhotonDistribution.from_probs(sol.x)
    p_hat = problem.no_clicks / problem.pulses
    p_model = problem.povm.elements @ estimate.probs
    sigma = np.sqrt(np.clip(p_model * (1 - p_model), 1e-300, None) / problem.pulses)
    ids = [r.setting_id for r in problem.records]
    diagnostics = {
        "pre_normalization_total": total,
        "kkt_violation": sol.kkt_violation,
        "iterations": sol.iterations,
        "normalization": problem.options.normalization,
        "model": problem.povm.model.value,
        "singular_values": problem.conditioning.singular_values,
        "effective_rank": problem.conditioning.effective_rank,
        "conditioning_messages": list(problem.conditioning.messages),
        "degenerate_settings": [i for i, d in zip(ids, degenerate) if d],
        "setting_ids": ids,
        "probe_means": problem.povm.means,
        "p_hat": p_hat,
        "p_model": p_model,
        "standardized_residuals": (p_hat - p_model) / sigma,
    }
    if problem.drift is not None:
        diagnostics["drift_raw"] = problem.drift.raw
        diagnostics["drift_low_confidence"] = [i for i, f in zip(ids, problem.drift.low_confidence) if f]

    boot_mean = boot_std = None
    if bootstrap_replicates:
        boot = bootstrap(None, params, model, problem=problem, B=bootstrap_replicates, seed=seed)
        boot_mean, boot_std = boot.mean, boot.std
        diagnostics["bootstrap_failures"] = boot.failures

    return ReconstructionResult(
        estimate=estimate,
        residual_norm=sol.residual_norm,
        weighted=problem.options.weighting == "binomial",
        condition_number=problem.conditioning.condition_number,
        bootstrap_mean=boot_mean,
        bootstrap_std=boot_std,
        per_setting_eta_used=None if problem.drift is None else problem.drift.eta,
        diagnostics=diagnostics,
    )


def bootstrap(records, params: SchemeParams, model="overlap", options=None, B=200, seed=None,
              settings=None, problem: Problem | None = None, workers=1) -> BootstrapResult:
    """Parametric bootstrap of the reconstruction.

    Each replicate redraws every setting's dark count from
    ``Binomial(M_j, c_j / M_j)`` and refits. Settings are designed rather than
    exchangeable, so they are not resampled. Replicates that fail to solve
    are skipped and counted; more than 10% failures is an error.

    The standard deviation uses the ``B - 1`` denominator.
    """
    if B < 2:
        raise ConfigError("bootstrap needs at least two replicates")
    if problem is None:
        problem = build_problem(records, params, model, settings, options)
    p_hat = problem.no_clicks / problem.pulses
    pulses = problem.pulses.astype(np.int64)
    streams = np.random.SeedSequence(seed).spawn(B)

    def replicate(ss):
        rng = np.random.Generator(np.random.Philox(ss))
        counts = rng.binomial(pulses, p_hat).astype(float)
        try:
            sol, total, _, _ = _solve(problem, counts)
        except NoiseTomoError:
            return None
        return sol.x / total

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(replicate, streams))
    else:
        results = [replicate(ss) for ss in streams]
    good = [r for r in results if r is not None]
    failures = B - len(good)
    if failures > 0.1 * B:
        raise SolverError(f"{failures} of {B} bootstrap replicates failed")
    reps = np.array(good)
    return BootstrapResult(reps.mean(axis=0), reps.std(axis=0, ddof=1), reps, failures, B)
