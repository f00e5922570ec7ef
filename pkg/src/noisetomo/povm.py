"""No-click POVM matrices for a signal probed with thermal light.

Rows are probe settings ``j``, columns signal photon numbers ``m``; entry
``Pi[j, m]`` is the probability that the on/off detector stays dark when the
signal is the Fock state ``|m>``. Three measurement models are provided:

``simple``
    the probe lands on the detector together with the signal, perfectly
    overlapped, without a beam splitter;
``perfect``
    signal and probe are mixed on a beam splitter of transmissivity ``T``
    and overlap perfectly;
``overlap``
    as ``perfect`` but only a fraction ``mu`` of the probe mode matches the
    signal mode.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConsistencyError, DomainError, TruncationWarning, UnderdeterminedWarning
from .fock import PhotonDistribution, SchemeParams, _amplitudes, probe_cutoff_for

__all__ = [
    "PovmModel",
    "ProbeSetting",
    "PovmMatrix",
    "ConditioningReport",
    "povm_simple",
    "povm_bs_perfect",
    "povm_bs_overlap",
    "signal_only_prob",
    "blocked_prob",
    "effective_probe_mean",
    "design_matrix",
    "conditioning_report",
]

MAX_PROBE_CUTOFF = 200_000
MAX_ROUNDING_ERROR = 1e-8


class PovmModel(str, enum.Enum):
    SIMPLE = "simple"
    PERFECT = "perfect"
    OVERLAP = "overlap"

    @classmethod
    def parse(cls, value) -> "PovmModel":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown POVM model {value!r}; expected one of {choices}") from None


@dataclass(frozen=True)
class ProbeSetting:
    id: int
    mean: float

    def __post_init__(self):
        if not np.isfinite(self.mean) or self.mean < 0:
            raise DomainError(f"probe setting {self.id}: mean must be finite and >= 0, got {self.mean}")


@dataclass(frozen=True)
class PovmMatrix:
    elements: np.ndarray
    settings: tuple
    params: SchemeParams
    model: PovmModel
    per_setting_eta: np.ndarray | None = None
    probe_cutoffs: np.ndarray | None = field(default=None, repr=False)
    tail_mass: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.elements.shape

    @property
    def means(self) -> np.ndarray:
        return np.array([s.mean for s in self.settings], dtype=float)

    @property
    def etas(self) -> np.ndarray:
        if self.per_setting_eta is not None:
            return self.per_setting_eta
        return np.full(len(self.settings), self.params.eta)

    def probabilities(self, rho) -> np.ndarray:
        """Forward model ``p_j = sum_m Pi[j, m] rho_mm``."""
        if isinstance(rho, PhotonDistribution):
            rho = rho.padded(self.elements.shape[1] - 1)
        return self.elements @ np.asarray(rho, dtype=float)


@dataclass(frozen=True)
class ConditioningReport:
    singular_values: np.ndarray
    condition_number: float
    effective_rank: int
    n_settings: int
    n_unknowns: int
    duplicate_settings: list
    underdetermined: bool
    messages: list


def _check_settings(settings):
    settings = tuple(settings)
    if not settings:
        raise DomainError("at least one probe setting is required")
    for s in settings:
        if not isinstance(s, ProbeSetting):
            raise DomainError(f"expected ProbeSetting, got {type(s).__name__}")
    ids = [s.id for s in settings]
    if len(set(ids)) != len(ids):
        raise DomainError("probe setting ids must be unique")
    return settings


def _row_etas(params, n_rows, etas):
    if etas is None:
        return np.full(n_rows, params.eta)
    etas = np.asarray(etas, dtype=float)
    if etas.shape != (n_rows,):
        raise ConfigError(f"per-setting eta has length {etas.size}, expected {n_rows}")
    if np.any(etas < 0) or np.any(etas > 1):
        raise ConfigError("per-setting eta values must lie in [0, 1]")
    return etas


def signal_only_prob(params: SchemeParams, rho, eta=None) -> float:
    """No-click probability of the signal alone: ``sum_k (1 - T eta)**k rho_kk``."""
    eta = params.eta if eta is None else eta
    p = rho.probs if isinstance(rho, PhotonDistribution) else np.asarray(rho, dtype=float)
    return float(np.polynomial.polynomial.polyval(1.0 - params.transmissivity * eta, p))


def blocked_prob(params: SchemeParams, mean, eta=None, model=PovmModel.OVERLAP):
    """No-click probability of the probe alone (signal port blocked)."""
    eta = params.eta if eta is None else eta
    model = PovmModel.parse(model)
    gain = eta if model is PovmModel.SIMPLE else (1.0 - params.transmissivity) * eta
    return 1.0 / (1.0 + gain * np.asarray(mean, dtype=float))


def effective_probe_mean(params: SchemeParams, setting, eta=None):
    """Probe photon number that interferes with the signal.

    ``mu n / (1 + (1 - mu)(1 - T) eta n)``; saturates at
    ``mu / ((1 - mu)(1 - T) eta)`` for a bright probe when ``mu < 1``.
    """
    n = setting.mean if isinstance(setting, ProbeSetting) else np.asarray(setting, dtype=float)
    eta = params.eta if eta is None else np.asarray(eta, dtype=float)
    mu = params.overlap
    leak = (1.0 - mu) * (1.0 - params.transmissivity) * eta
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.where(np.isinf(n), mu / np.where(leak > 0, leak, np.nan), mu * n / (1.0 + leak * n))
    return float(out) if np.ndim(out) == 0 else out


def _probe_cutoffs(params, means):
    if params.probe_cutoff is not None:
        cutoffs = np.full(means.size, int(params.probe_cutoff))
    else:
        cutoffs = np.array([probe_cutoff_for(n, params.tail_tol) for n in means], dtype=int)
    with np.errstate(divide="ignore"):
        ratio = np.where(means > 0, means / (1.0 + means), 0.0)
    tails = ratio ** (cutoffs + 1)
    bad = tails > params.tail_tol
    if np.any(bad):
        warnings.warn(
            f"{int(bad.sum())} probe settings truncated with tail mass up to {tails.max():.3g}"
            f" > tail_tol {params.tail_tol:.3g}",
            TruncationWarning,
            stacklevel=3,
        )
    return cutoffs, tails


def _detected_window(n, m, transmissivity):
    """Range of detected photon numbers carrying the amplitude for ``|m, n>``.

    Probe photons reach the detector binomially with probability ``1 - T``;
    the window spans 12 standard deviations around that mean plus the ``m``
    signal photons.
    """
    spread = 12.0 * np.sqrt(n * transmissivity * (1.0 - transmissivity)) + 12.0
    centre = n * (1.0 - transmissivity)
    lo = np.maximum(0, np.floor(centre - spread)).astype(int)
    hi = np.minimum(m + n, np.ceil(centre + spread) + m).astype(int)
    return lo, hi


def _no_click_sums(transmissivity, n_sig, max_probe, weights, which, unique_etas):
    """Contract ``sigma_n (1 - eta)**k |U^{kl}_{mn}|**2`` over ``n`` and ``k``.

    ``weights[j, n]`` are the probe diagonals per row, ``which[j]`` indexes
    the row efficiency in ``unique_etas``. Works through ``n`` in chunks so
    memory stays linear in the probe cutoff.
    """
    t = np.sqrt(transmissivity)
    r = np.sqrt(1.0 - transmissivity)
    survive_base = 1.0 - unique_etas
    out = np.zeros((weights.shape[0], n_sig + 1))
    # unitarity defect of each (m, n) amplitude column, weighted by sigma_n,
    # bounds the rounding error of the corresponding POVM entry
    error_bound = np.zeros((weights.shape[0], n_sig + 1))
    chunk = 128
    for m in range(n_sig + 1):
        for start in range(0, max_probe + 1, chunk):
            n = np.arange(start, min(start + chunk, max_probe + 1))
            lo, hi = _detected_window(n, m, transmissivity)
            width = int((hi - lo).max()) + 1
            k = lo[:, None] + np.arange(width)[None, :]
            inside = k <= hi[:, None]
            amp = _amplitudes(np.minimum(k, (m + n)[:, None]), m, (m + n)[:, None], t, r)
            prob = np.where(inside, amp ** 2, 0.0)
            defect = np.abs(1.0 - prob.sum(axis=1))
            # (1 - eta)**k = (1 - eta)**lo * (1 - eta)**i
            ladder = survive_base[None, :] ** np.arange(width)[:, None]
            offset = survive_base[None, :] ** lo[:, None]
            no_click = (prob @ ladder) * offset          # (chunk, n_eta)
            out[:, m] += np.einsum("jn,nj->j", weights[:, n], no_click[:, which])
            error_bound[:, m] += weights[:, n] @ defect
    worst = float(error_bound.max())
    if worst > MAX_ROUNDING_ERROR:
        raise ConsistencyError(
            f"POVM entries carry rounding error up to {worst:.3g}; the probe is too bright"
            " for the Fock-basis sum at this signal cutoff"
        )
    return out


def _beam_splitter_rows(params, means, etas):
    """Sum over probe photons ``n`` and detected photons ``k`` of
    ``(1 - eta)**k sigma_n |U^{kl}_{mn}|**2`` for each row.

    Rows with a vacuum probe use ``(1 - T eta)**m`` directly.
    """
    n_sig = params.signal_cutoff
    m = np.arange(n_sig + 1)
    rows = np.empty((means.size, n_sig + 1))
    cutoffs, tails = _probe_cutoffs(params, means)
    dark = means == 0
    rows[dark] = (1.0 - params.transmissivity * etas[dark, None]) ** m[None, :]
    cutoffs[dark] = 0
    tails[dark] = 0.0
    lit = np.flatnonzero(~dark)
    if lit.size == 0:
        return rows, cutoffs, tails
    max_probe = int(cutoffs[lit].max())
    if max_probe > MAX_PROBE_CUTOFF:
        raise DomainError(
            f"probe cutoff {max_probe} exceeds {MAX_PROBE_CUTOFF}; the probe is too bright"
            " for the Fock-basis sum (raise tail_tol or dim the probe)"
        )
    n = np.arange(max_probe + 1)
    nbar = means[lit]
    sigma = (nbar / (1.0 + nbar))[:, None] ** n[None, :] / (1.0 + nbar)[:, None]
    sigma[n[None, :] > cutoffs[lit][:, None]] = 0.0
    unique_etas, which = np.unique(etas[lit], return_inverse=True)
    rows[lit] = _no_click_sums(params.transmissivity, n_sig, max_probe, sigma, which, unique_etas)
    return rows, cutoffs, tails


def povm_simple(params: SchemeParams, settings, per_setting_eta=None) -> PovmMatrix:
    """``Pi[j, m] = y_j (1 - y_j eta)**m`` with ``y_j = 1 / (1 + eta n_j)``.

    Transmissivity and overlap play no role in this model.
    """
    settings = _check_settings(settings)
    means = np.array([s.mean for s in settings])
    etas = _row_etas(params, means.size, per_setting_eta)
    y = 1.0 / (1.0 + etas * means)
    m = np.arange(params.signal_cutoff + 1)
    elements = y[:, None] * (1.0 - (y * etas)[:, None]) ** m[None, :]
    return PovmMatrix(elements, settings, params, PovmModel.SIMPLE,
                      None if per_setting_eta is None else etas)


def povm_bs_perfect(params: SchemeParams, settings, per_setting_eta=None) -> PovmMatrix:
    """Beam-splitter POVM for perfectly overlapping signal and probe.

    The overlap stored in ``params`` is ignored (treated as one).
    """
    settings = _check_settings(settings)
    means = np.array([s.mean for s in settings])
    etas = _row_etas(params, means.size, per_setting_eta)
    rows, cutoffs, tails = _beam_splitter_rows(params, means, etas)
    return PovmMatrix(rows, settings, params, PovmModel.PERFECT,
                      None if per_setting_eta is None else etas, cutoffs, tails)


def povm_bs_overlap(params: SchemeParams, settings, per_setting_eta=None) -> PovmMatrix:
    """Beam-splitter POVM with partial mode overlap ``mu``.

    The interfering part of the probe is a thermal state of mean
    ``nbar_j = effective_probe_mean(...)``; the non-interfering remainder
    contributes the factor ``nbar_j / (mu n_j) = 1 / (1 + (1-mu)(1-T) eta n_j)``,
    evaluated in that closed form so that ``mu n_j = 0`` needs no limit.
    """
    settings = _check_settings(settings)
    means = np.array([s.mean for s in settings])
    etas = _row_etas(params, means.size, per_setting_eta)
    leak = (1.0 - params.overlap) * (1.0 - params.transmissivity) * etas
    prefactor = 1.0 / (1.0 + leak * means)
    nbar = params.overlap * means * prefactor
    rows, cutoffs, tails = _beam_splitter_rows(params, nbar, etas)
    return PovmMatrix(prefactor[:, None] * rows, settings, params, PovmModel.OVERLAP,
                      None if per_setting_eta is None else etas, cutoffs, tails)


_BUILDERS = {
    PovmModel.SIMPLE: povm_simple,
    PovmModel.PERFECT: povm_bs_perfect,
    PovmModel.OVERLAP: povm_bs_overlap,
}


def design_matrix(model, params: SchemeParams, settings, per_setting_eta=None) -> PovmMatrix:
    """Build the design matrix of the linear inverse problem for ``model``.

    ``per_setting_eta`` replaces the detector efficiency row by row, e.g. with
    drift-corrected values; each entry must lie in (0, 1].
    """
    model = PovmModel.parse(model)
    if not isinstance(params, SchemeParams):
        raise ConfigError("params must be a SchemeParams instance")
    if per_setting_eta is not None:
        etas = np.asarray(per_setting_eta, dtype=float)
        n_settings = len(tuple(settings))
        if etas.shape != (n_settings,):
            raise ConfigError(f"per-setting eta has length {etas.size}, expected {n_settings}")
        if np.any(etas <= 0) or np.any(etas > 1) or not np.all(np.isfinite(etas)):
            raise ConfigError("per-setting eta values must lie in (0, 1]")
    return _BUILDERS[model](params, settings, per_setting_eta)


def conditioning_report(povm: PovmMatrix) -> ConditioningReport:
    a = np.asarray(povm.elements, dtype=float)
    n_rows, n_cols = a.shape
    sv = np.linalg.svd(a, compute_uv=False)
    tol = sv.max(initial=0.0) * max(a.shape) * np.finfo(float).eps
    rank = int(np.sum(sv > tol))
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else float("inf")

    groups = {}
    for s in povm.settings:
        groups.setdefault(float(s.mean), []).append(s.id)
    duplicates = [ids for ids in groups.values() if len(ids) > 1]

    messages = []
    underdetermined = n_rows < n_cols
    if underdetermined:
        msg = f"{n_rows} settings for {n_cols} unknowns: the system is underdetermined"
        messages.append(msg)
        warnings.warn(msg, UnderdeterminedWarning, stacklevel=2)
    if duplicates:
        messages.append(f"{len(duplicates)} groups of settings share a probe mean")
    if rank < n_cols:
        messages.append(f"design matrix is rank deficient ({rank} < {n_cols})")
    return ConditioningReport(sv, cond, rank, n_rows, n_cols, duplicates, underdetermined, messages)
