"""Synthetic experiments: binomial dark counts for any POVM model, thermal
intensity samples and controlled efficiency drift."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .calibration import ClickRecord
from .errors import ConsistencyError, DomainError
from .fock import PhotonDistribution, SchemeParams
from .povm import (
    PovmModel,
    ProbeSetting,
    blocked_prob,
    povm_bs_overlap,
    povm_bs_perfect,
    povm_simple,
    signal_only_prob,
)

__all__ = [
    "ExperimentPlan",
    "simulate_clicks",
    "model_probabilities",
    "simulate_thermal_intensities",
    "g2_estimate",
    "inject_drift",
    "drift_multipliers",
    "probe_schedule",
    "setting_generators",
]

_BUILDERS = {
    PovmModel.SIMPLE: povm_simple,
    PovmModel.PERFECT: povm_bs_perfect,
    PovmModel.OVERLAP: povm_bs_overlap,
}


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to generate one synthetic data set.

    ``eta_multipliers`` scales the detector efficiency setting by setting.
    ``reference_state`` is the signal used for the signal-only counts; it
    defaults to ``true_state`` but can be a separately prepared, known state
    as in a drift calibration run.
    """

    params: SchemeParams
    true_state: PhotonDistribution
    settings: tuple
    pulses_per_setting: int
    model: PovmModel = PovmModel.OVERLAP
    eta_multipliers: np.ndarray | None = None
    seed: int = 0
    reference_state: PhotonDistribution | None = None

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(self.settings))
        object.__setattr__(self, "model", PovmModel.parse(self.model))
        if self.pulses_per_setting <= 0:
            raise DomainError("pulses_per_setting must be positive")
        if not self.settings:
            raise DomainError("a plan needs at least one probe setting")
        if self.eta_multipliers is not None:
            mult = np.asarray(self.eta_multipliers, dtype=float)
            if mult.shape != (len(self.settings),):
                raise DomainError("eta_multipliers must have one entry per setting")
            upper = 1.0 / self.params.eta if self.params.eta > 0 else np.inf
            if np.any(mult <= 0) or np.any(mult > upper):
                raise DomainError("eta multipliers must keep the efficiency in (0, 1]")
            mult = mult.copy()
            mult.setflags(write=False)
            object.__setattr__(self, "eta_multipliers", mult)

    @property
    def etas(self) -> np.ndarray:
        base = np.full(len(self.settings), self.params.eta)
        return base if self.eta_multipliers is None else base * self.eta_multipliers

    def replace(self, **changes) -> "ExperimentPlan":
        return dataclasses.replace(self, **changes)


def setting_generators(seed, count):
    """Independent counter-based generators, one per setting."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def model_probabilities(plan: ExperimentPlan) -> np.ndarray:
    """Exact dark probabilities ``p_j`` for the plan, drift included."""
    cutoff = max(plan.true_state.cutoff, 0)
    params = plan.params.replace(signal_cutoff=cutoff)
    etas = None if plan.eta_multipliers is None else plan.etas
    povm = _BUILDERS[plan.model](params, plan.settings, etas)
    p = povm.elements @ plan.true_state.probs
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
        raise ConsistencyError(f"model probabilities leave [0, 1]: min {p.min()}, max {p.max()}")
    return np.clip(p, 0.0, 1.0)


def simulate_clicks(plan: ExperimentPlan) -> list:
    """Draw binomial dark counts for every setting of ``plan``.

    For each setting the generator draws, in this order, the dark count of
    signal plus probe, the dark count with the signal blocked, and the dark
    count of the reference signal alone, each from ``pulses_per_setting``
    pulses.
    """
    p = model_probabilities(plan)
    etas = plan.etas
    means = np.array([s.mean for s in plan.settings])
    p_blocked = np.atleast_1d(blocked_prob(plan.params, means, etas, plan.model))
    reference = plan.reference_state or plan.true_state
    p_signal = np.array([signal_only_prob(plan.params, reference, eta=e) for e in etas])
    for name, arr in (("blocked", p_blocked), ("signal-only", p_signal)):
        if np.any(arr < -1e-12) or np.any(arr > 1 + 1e-12):
            raise ConsistencyError(f"{name} probabilities leave [0, 1]")
    p_signal = np.clip(p_signal, 0.0, 1.0)

    pulses = int(plan.pulses_per_setting)
    records = []
    for s, rng, pj, pb, ps in zip(plan.settings, setting_generators(plan.seed, len(plan.settings)),
                                  p, p_blocked, p_signal):
        records.append(ClickRecord(
            setting_id=s.id,
            pulses=pulses,
            no_clicks=int(rng.binomial(pulses, pj)),
            blocked_no_clicks=int(rng.binomial(pulses, pb)),
            signal_only_no_clicks=int(rng.binomial(pulses, ps)),
            signal_only_pulses=pulses,
        ))
    return records


def g2_estimate(intensities) -> float:
    """Second-order correlation ``<I**2> / <I>**2`` of an intensity sample."""
    i = np.asarray(intensities, dtype=float)
    return float(np.mean(i ** 2) / np.mean(i) ** 2)


def simulate_thermal_intensities(mean, samples, seed=None, thermal=True):
    """Intensity samples of pseudo-thermal light behind a rotating diffuser.

    Fully developed speckle has exponentially distributed intensity, so
    ``g2 -> 2``. With ``thermal=False`` every sample equals ``mean``
    (coherent light, ``g2 = 1``).

    Returns
    -------
    intensities : ndarray
    g2 : float
    """
    if mean <= 0:
        raise DomainError("mean intensity must be positive")
    if samples < 2:
        raise DomainError("need at least two samples")
    if thermal:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        intensities = rng.exponential(mean, size=int(samples))
    else:
        intensities = np.full(int(samples), float(mean))
    return intensities, g2_estimate(intensities)


def drift_multipliers(profile, magnitude, count) -> np.ndarray:
    """Efficiency multipliers in ``[1 - magnitude, 1]`` following ``profile``.

    ``linear`` falls steadily from 1 to ``1 - magnitude``; ``sinusoidal``
    dips to ``1 - magnitude`` mid-run and recovers; ``step`` drops by
    ``magnitude`` at the midpoint.
    """
    if not 0.0 <= magnitude <= 0.5:
        raise DomainError(f"drift magnitude must lie in [0, 0.5], got {magnitude}")
    x = np.linspace(0.0, 1.0, count) if count > 1 else np.zeros(count)
    if profile == "linear":
        shape = x
    elif profile == "sinusoidal":
        shape = 0.5 * (1.0 - np.cos(2.0 * np.pi * x))
    elif profile == "step":
        shape = (np.arange(count) >= count // 2).astype(float)
    else:
        raise DomainError(f"unknown drift profile {profile!r}")
    return 1.0 - magnitude * shape


def inject_drift(plan: ExperimentPlan, profile="linear", magnitude=0.15) -> ExperimentPlan:
    if magnitude == 0:
        return plan
    return plan.replace(eta_multipliers=drift_multipliers(profile, magnitude, len(plan.settings)))


def probe_schedule(params: SchemeParams, count, max_mean, kind="linear",
                   model=PovmModel.OVERLAP, start_id=0) -> list:
    """Probe settings ramping from a dark probe to ``max_mean``.

    ``linear`` spaces the probe means evenly. ``response`` spaces them so
    that the interference variable ``y = 1 / (1 + g nbar)`` of the no-click
    POVM (``g`` the probe gain at the detector, ``nbar`` the interfering
    probe mean) is evenly spaced, which spreads the rows of the design matrix
    more evenly.
    """
    if count < 1 or max_mean < 0:
        raise DomainError("need count >= 1 and max_mean >= 0")
    model = PovmModel.parse(model)
    if kind == "linear":
        means = np.linspace(0.0, max_mean, count)
    elif kind == "response":
        eta, T, mu = params.eta, params.transmissivity, params.overlap
        if model is PovmModel.SIMPLE:
            gain, mu, leak = eta, 1.0, 0.0
        else:
            gain = (1.0 - T) * eta
            mu = 1.0 if model is PovmModel.PERFECT else mu
            leak = (1.0 - mu) * gain
        if gain <= 0 or mu <= 0:
            raise DomainError("response schedule needs a probe that reaches the detector and overlaps")
        nbar_max = mu * max_mean / (1.0 + leak * max_mean)
        y = np.linspace(1.0, 1.0 / (1.0 + gain * nbar_max), count)
        nbar = (1.0 / y - 1.0) / gain
        means = nbar / (mu - leak * nbar)
        means[0] = 0.0
        means[-1] = max_mean
    else:
        raise DomainError(f"unknown schedule kind {kind!r}")
    return [ProbeSetting(start_id + i, float(m)) for i, m in enumerate(means)]
