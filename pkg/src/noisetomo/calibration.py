"""Calibration from auxiliary counts.

Two inversions are provided: probe intensities from counts taken with the
signal blocked, and detector efficiencies from counts of a known reference
signal taken without the probe. The latter tracks efficiency drift over a
long run.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, CalibrationWarning, DataError, DomainError
from .fock import PhotonDistribution, SchemeParams
from .povm import PovmModel, signal_only_prob

__all__ = [
    "ClickRecord",
    "DriftSeries",
    "probe_mean_from_blocked",
    "efficiency_from_reference",
    "drift_series",
    "moving_average",
]

log = logging.getLogger(__name__)

LOW_CONFIDENCE_PULSES = 1000


@dataclass(frozen=True)
class ClickRecord:
    """Counts collected at one probe setting.

    ``blocked_no_clicks`` counts dark pulses with the signal blocked, out of
    ``pulses``. The signal-only pair counts dark pulses of the signal without
    probe light and feeds the efficiency-drift correction.
    """

    setting_id: int
    pulses: int
    no_clicks: int
    blocked_no_clicks: int | None = None
    signal_only_no_clicks: int | None = None
    signal_only_pulses: int | None = None

    def __post_init__(self):
        sid = self.setting_id
        if self.pulses <= 0:
            raise DataError(f"setting {sid}: pulses must be positive, got {self.pulses}")
        if not 0 <= self.no_clicks <= self.pulses:
            raise DataError(f"setting {sid}: no_clicks {self.no_clicks} outside [0, {self.pulses}]")
        if self.blocked_no_clicks is not None and not 0 <= self.blocked_no_clicks <= self.pulses:
            raise DataError(
                f"setting {sid}: blocked_no_clicks {self.blocked_no_clicks} outside [0, {self.pulses}]"
            )
        if (self.signal_only_no_clicks is None) != (self.signal_only_pulses is None):
            raise DataError(f"setting {sid}: signal-only counts need both pulses and no-clicks")
        if self.signal_only_pulses is not None:
            if self.signal_only_pulses <= 0:
                raise DataError(f"setting {sid}: signal_only_pulses must be positive")
            if not 0 <= self.signal_only_no_clicks <= self.signal_only_pulses:
                raise DataError(
                    f"setting {sid}: signal_only_no_clicks {self.signal_only_no_clicks}"
                    f" outside [0, {self.signal_only_pulses}]"
                )

    @property
    def no_click_fraction(self) -> float:
        return self.no_clicks / self.pulses

    @property
    def has_signal_only(self) -> bool:
        return self.signal_only_pulses is not None


def probe_mean_from_blocked(params: SchemeParams, blocked_no_clicks, pulses,
                            eta=None, model=PovmModel.OVERLAP) -> float:
    """Probe mean photon number from its dark-count fraction.

    Inverts ``p = 1 / (1 + (1 - T) eta n)`` (for the ``simple`` model the
    probe is not attenuated by the splitter and the gain is ``eta``).

    Parameters
    ----------
    params : SchemeParams
    blocked_no_clicks : int
        Dark pulses with the signal blocked.
    pulses : int
        Pulses fired at this setting.
    eta : float, optional
        Efficiency to use instead of ``params.eta`` (drift-corrected value).
    model : PovmModel or str
        Measurement model, which decides where the probe is attenuated.

    Returns
    -------
    float
        Estimated mean photon number ``n_j``.

    Raises
    ------
    CalibrationError
        If no dark pulse was seen (the probe is too bright to estimate).
    DomainError
        If the counts are inconsistent or the probe gain is zero.
    """
    eta = params.eta if eta is None else eta
    model = PovmModel.parse(model)
    gain = eta if model is PovmModel.SIMPLE else (1.0 - params.transmissivity) * eta
    if gain <= 0:
        raise DomainError("probe calibration needs (1 - T) * eta > 0")
    if pulses <= 0 or not 0 <= blocked_no_clicks <= pulses:
        raise DomainError(f"blocked counts {blocked_no_clicks}/{pulses} are not a valid fraction")
    if blocked_no_clicks == 0:
        raise CalibrationError("probe too bright: no dark pulses with the signal blocked")
    if blocked_no_clicks == pulses:
        return 0.0
    return (pulses / blocked_no_clicks - 1.0) / gain


def efficiency_from_reference(params: SchemeParams, rho_ref, p_signal_hat,
                              tol=1e-12, max_iter=200) -> float:
    """Detector efficiency reproducing the dark fraction of a known signal.

    Solves ``sum_k (1 - T eta)**k rho_kk = p_signal_hat`` for ``eta`` by
    bisection on ``[0, 1/T]``; the left side decreases strictly in ``eta``
    whenever the reference has weight above vacuum. Roots above one are
    clamped to one with a :class:`CalibrationWarning`.
    """
    rho = rho_ref if isinstance(rho_ref, PhotonDistribution) else PhotonDistribution.from_probs(rho_ref)
    if rho.probs[0] >= 1.0 - 1e-15:
        raise CalibrationError("reference state is vacuum: its dark fraction does not depend on eta")
    if not np.isfinite(p_signal_hat) or p_signal_hat > 1.0 or p_signal_hat <= 0.0:
        raise CalibrationError(f"signal-only dark fraction {p_signal_hat} outside (0, 1]")
    T = params.transmissivity
    eta_max = 1.0 / T
    floor = signal_only_prob(params, rho, eta=eta_max)
    if p_signal_hat < floor:
        raise CalibrationError(
            f"signal-only dark fraction {p_signal_hat:.6g} below {floor:.6g}, the value at eta = 1/T"
        )

    lo, hi = 0.0, eta_max
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if signal_only_prob(params, rho, eta=mid) > p_signal_hat:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    eta = 0.5 * (lo + hi)
    if eta > 1.0 + 2 * tol:
        warnings.warn(f"efficiency estimate {eta:.6g} exceeds 1; clamped", CalibrationWarning, stacklevel=2)
    eta = min(eta, 1.0)
    return eta


def moving_average(values, window) -> np.ndarray:
    """Centered moving average with uniform weights; shrinks at the ends."""
    values = np.asarray(values, dtype=float)
    if window < 1:
        raise DomainError("smoothing window must be >= 1")
    if window == 1 or values.size == 0:
        return values.copy()
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(values.size)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + (window - half), values.size)
    return (csum[hi] - csum[lo]) / (hi - lo)


@dataclass(frozen=True)
class DriftSeries:
    setting_ids: np.ndarray
    raw: np.ndarray
    eta: np.ndarray
    low_confidence: np.ndarray
    window: int


def drift_series(params: SchemeParams, rho_ref, records, window=5) -> DriftSeries:
    """Per-setting detector efficiency from signal-only counts.

    Each record's signal-only dark fraction is inverted with
    :func:`efficiency_from_reference`; the series is then smoothed with a
    centered moving average of ``window`` settings (``window=1`` keeps the
    raw estimates). Records with fewer than 1000 signal-only pulses are
    flagged low-confidence.
    """
    records = list(records)
    if not records:
        raise DataError("no records for drift estimation")
    raw = np.empty(len(records))
    low = np.zeros(len(records), dtype=bool)
    for i, rec in enumerate(records):
        if not rec.has_signal_only:
            raise CalibrationError("record has no signal-only counts", rec.setting_id)
        try:
            raw[i] = efficiency_from_reference(
                params, rho_ref, rec.signal_only_no_clicks / rec.signal_only_pulses
            )
        except CalibrationError as exc:
            raise CalibrationError(str(exc), rec.setting_id) from exc
        low[i] = rec.signal_only_pulses < LOW_CONFIDENCE_PULSES
    if low.any():
        log.warning("%d settings have fewer than %d signal-only pulses", low.sum(), LOW_CONFIDENCE_PULSES)
    ids = np.array([r.setting_id for r in records])
    return DriftSeries(ids, raw, moving_average(raw, window), low, int(window))
