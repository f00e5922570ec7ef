"""Fock-space primitives: photon-number distributions, thermal diagonals and
the two-mode beam-splitter unitary in the number basis.

Index convention for the beam splitter: ``U[k, l, m, n]`` is the amplitude
``<k, l| U |m, n>`` where ``m`` is the signal photon number entering the
splitter, ``n`` the probe photon number, ``k`` the photon number leaving
towards the detector and ``l`` the photon number in the unused port. Signal
photons reach the detector with probability ``T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln, xlogy

from .errors import DomainError

__all__ = [
    "PhotonDistribution",
    "ThermalDiagonal",
    "BsUnitary",
    "SchemeParams",
    "thermal_diagonal",
    "probe_cutoff_for",
    "bs_unitary",
    "bs_unitary_oracle",
    "transfer_probabilities",
]

DENSE_CUTOFF_LIMIT = 30
_NORM_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PhotonDistribution:
    """Photon-number distribution ``rho_mm`` for ``m = 0..cutoff``.

    Entries must be nonnegative and sum to one within 1e-9. Use
    :meth:`from_probs` to normalize raw weights.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if p.size == 0:
            raise DomainError("a photon distribution needs at least one entry")
        if not np.all(np.isfinite(p)):
            raise DomainError("photon distribution has non-finite entries")
        if np.any(p < -1e-12):
            raise DomainError(f"negative probability {p.min():.3g}")
        p = np.clip(p, 0.0, None)
        if abs(p.sum() - 1.0) > _NORM_TOL:
            raise DomainError(f"probabilities sum to {p.sum():.12g}, not 1")
        object.__setattr__(self, "probs", _frozen(p))

    @classmethod
    def from_probs(cls, values, normalize=True) -> "PhotonDistribution":
        p = np.asarray(values, dtype=float).ravel()
        if np.any(p < -1e-12):
            raise DomainError(f"negative probability {p.min():.3g}")
        p = np.clip(p, 0.0, None)
        if normalize:
            total = p.sum()
            if total <= 0:
                raise DomainError("cannot normalize an all-zero vector")
            p = p / total
        return cls(p)

    @classmethod
    def vacuum(cls, cutoff=0) -> "PhotonDistribution":
        return cls.fock(0, cutoff)

    @classmethod
    def fock(cls, m, cutoff=None) -> "PhotonDistribution":
        cutoff = m if cutoff is None else cutoff
        if not 0 <= m <= cutoff:
            raise DomainError(f"Fock index {m} outside 0..{cutoff}")
        p = np.zeros(cutoff + 1)
        p[m] = 1.0
        return cls(p)

    @classmethod
    def thermal(cls, mean, cutoff) -> "PhotonDistribution":
        """Thermal distribution truncated at ``cutoff`` and renormalized."""
        return cls.from_probs(thermal_diagonal(mean, cutoff).probs)

    @property
    def cutoff(self) -> int:
        return self.probs.size - 1

    def __len__(self):
        return self.probs.size

    def mean(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)

    def padded(self, cutoff) -> np.ndarray:
        """Return the probabilities as an array of length ``cutoff + 1``.

        Raises if truncation would discard nonzero mass.
        """
        if cutoff >= self.cutoff:
            out = np.zeros(cutoff + 1)
            out[: self.probs.size] = self.probs
            return out
        if np.any(self.probs[cutoff + 1:] > 0):
            raise DomainError(f"distribution has mass above cutoff {cutoff}")
        return self.probs[: cutoff + 1].copy()

    def total_variation(self, other) -> float:
        q = other.probs if isinstance(other, PhotonDistribution) else np.asarray(other, float)
        size = max(self.probs.size, q.size)
        a = np.zeros(size)
        b = np.zeros(size)
        a[: self.probs.size] = self.probs
        b[: q.size] = q
        return 0.5 * float(np.abs(a - b).sum())


@dataclass(frozen=True)
class ThermalDiagonal:
    mean: float
    probs: np.ndarray

    @property
    def cutoff(self) -> int:
        return self.probs.size - 1

    @property
    def tail_mass(self) -> float:
        """Probability above the cutoff, ``(mean/(1+mean))**(cutoff+1)``."""
        if self.mean == 0:
            return 0.0
        return float((self.mean / (1.0 + self.mean)) ** (self.cutoff + 1))


@dataclass(frozen=True)
class SchemeParams:
    """Calibration inputs of the probing scheme.

    Attributes
    ----------
    eta : float
        Detector efficiency, in [0, 1]. Zero is allowed (a blind detector)
        but calibration routines that divide by it will refuse it.
    transmissivity : float
        Beam-splitter transmission of the signal towards the detector.
    overlap : float
        Mode overlap between signal and probe, in [0, 1].
    signal_cutoff : int
        Largest signal photon number resolved by the reconstruction. A
        working rule is the largest plausible photon number plus two.
    probe_cutoff : int or None
        Fixed probe truncation; ``None`` picks it per setting from
        ``tail_tol``.
    tail_tol : float
        Largest thermal tail mass tolerated when truncating probes.
    """

    eta: float = 0.15
    transmissivity: float = 0.9
    overlap: float = 1.0
    signal_cutoff: int = 3
    probe_cutoff: int | None = None
    tail_tol: float = 1e-9

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 < self.transmissivity <= 1.0:
            raise DomainError(f"transmissivity must lie in (0, 1], got {self.transmissivity}")
        if not 0.0 <= self.overlap <= 1.0:
            raise DomainError(f"overlap must lie in [0, 1], got {self.overlap}")
        if int(self.signal_cutoff) != self.signal_cutoff or self.signal_cutoff < 0:
            raise DomainError(f"signal_cutoff must be a nonnegative integer, got {self.signal_cutoff}")
        if self.probe_cutoff is not None and self.probe_cutoff < 0:
            raise DomainError("probe_cutoff must be nonnegative")
        if not 0.0 < self.tail_tol <= 1e-3:
            raise DomainError(f"tail_tol must lie in (0, 1e-3], got {self.tail_tol}")

    def replace(self, **changes) -> "SchemeParams":
        fields = {**self.__dict__, **changes}
        return SchemeParams(**fields)


def thermal_diagonal(mean, cutoff) -> ThermalDiagonal:
    """Thermal photon-number probabilities ``mean**n / (1+mean)**(n+1)``.

    The vector is not renormalized; the discarded mass is available as
    ``ThermalDiagonal.tail_mass``.

    Examples
    --------
    >>> thermal_diagonal(1.0, 2).probs
    array([0.5  , 0.25 , 0.125])
    """
    if mean < 0 or not np.isfinite(mean):
        raise DomainError(f"thermal mean must be finite and >= 0, got {mean}")
    if cutoff < 0:
        raise DomainError(f"cutoff must be >= 0, got {cutoff}")
    n = np.arange(int(cutoff) + 1)
    if mean == 0:
        probs = (n == 0).astype(float)
    else:
        ratio = mean / (1.0 + mean)
        probs = ratio ** n / (1.0 + mean)
    return ThermalDiagonal(float(mean), _frozen(probs))


def probe_cutoff_for(mean, tail_tol) -> int:
    """Smallest cutoff whose thermal tail mass is at most ``tail_tol``."""
    if mean < 0:
        raise DomainError(f"thermal mean must be >= 0, got {mean}")
    if not 0.0 < tail_tol < 1.0:
        raise DomainError(f"tail_tol must lie in (0, 1), got {tail_tol}")
    if mean == 0:
        return 0
    log_ratio = math.log(mean) - math.log1p(mean)
    cutoff = max(0, math.ceil(math.log(tail_tol) / log_ratio) - 1)
    # guard the float rounding of the logarithms on both sides
    while cutoff > 0 and (cutoff) * log_ratio <= math.log(tail_tol):
        cutoff -= 1
    while (cutoff + 1) * log_ratio > math.log(tail_tol):
        cutoff += 1
    return cutoff


@lru_cache(maxsize=4)
def _log_factorials(size) -> np.ndarray:
    return gammaln(np.arange(size) + 1.0)


def _amplitudes(k, m, total, t, r):
    """Beam-splitter amplitudes ``<k, total-k| U |m, total-m>``.

    ``k`` and ``m`` broadcast against each other; ``total`` broadcasts too.
    The sum runs over the transmitted signal photons ``g``; the transmitted
    probe photon count ``h`` is fixed by photon-number conservation.
    """
    k, m, total = np.broadcast_arrays(np.asarray(k), np.asarray(m), np.asarray(total))
    l = total - k
    n = total - m
    gmax = int(min(k.max(initial=0), m.max(initial=0)))
    g = np.arange(gmax + 1).reshape((1,) * k.ndim + (-1,))
    k, l, m, n = (a[..., None] for a in (k, l, m, n))
    h = l + g - m
    valid = (g <= k) & (h >= 0) & (h <= l) & (l >= 0) & (n >= 0)
    lf = _log_factorials(int(total.max(initial=0)) + 1)

    def fact(a):
        return lf[np.clip(a, 0, lf.size - 1)]

    with np.errstate(invalid="ignore"):
        log_mag = (
            0.5 * (fact(k) + fact(l) + fact(m) + fact(n))
            - fact(g) - fact(h) - fact(k - g) - fact(l - h)
            + xlogy(g + h, t) + xlogy(k + l - g - h, r)
        )
        terms = np.where(valid, np.exp(np.where(valid, log_mag, -np.inf)), 0.0)
    sign = np.where((k - g) % 2 == 0, 1.0, -1.0)
    return (sign * terms).sum(axis=-1)


def _check_bs_args(transmissivity, cutoff):
    if not 0.0 <= transmissivity <= 1.0:
        raise DomainError(f"transmissivity must lie in [0, 1], got {transmissivity}")
    if int(cutoff) != cutoff or cutoff < 0:
        raise DomainError(f"cutoff must be a nonnegative integer, got {cutoff}")


@dataclass(frozen=True)
class BsUnitary:
    """Beam-splitter unitary on the two-mode space with at most ``cutoff``
    photons in total.

    ``blocks[s][k, m]`` holds ``<k, s-k| U |m, s-m>``. The rank-4 view
    :attr:`elements` is available up to cutoff 30; entries whose total photon
    number exceeds the cutoff lie outside the truncated space and are zero.
    """

    transmissivity: float
    cutoff: int
    blocks: tuple = field(repr=False)

    def block(self, total) -> np.ndarray:
        return self.blocks[total]

    def amplitude(self, k, l, m, n) -> float:
        if k + l != m + n:
            return 0.0
        s = k + l
        if s > self.cutoff:
            raise DomainError(f"total photon number {s} exceeds cutoff {self.cutoff}")
        return float(self.blocks[s][k, m])

    @property
    def elements(self) -> np.ndarray:
        if self.cutoff > DENSE_CUTOFF_LIMIT:
            raise DomainError(
                f"dense storage limited to cutoff {DENSE_CUTOFF_LIMIT}; use block()"
            )
        d = self.cutoff + 1
        out = np.zeros((d, d, d, d))
        for s, b in enumerate(self.blocks):
            idx = np.arange(s + 1)
            out[idx[:, None], s - idx[:, None], idx[None, :], s - idx[None, :]] = b
        return out


def bs_unitary(transmissivity, cutoff) -> BsUnitary:
    """Beam-splitter unitary from the closed combinatorial sum.

    Uses real ``t = sqrt(T)``, ``r = sqrt(1 - T)``. In the denominator the
    factor for the reflected probe photons is ``(l - h)!``; the variant with
    ``(h - l)!`` cannot be evaluated for ``h < l`` and is not unitary.

    The sum alternates in sign. Whole blocks are unitary to 1e-10 up to a
    total of about 30 photons at ``T = 0.5`` (further for ``T`` near 0 or 1);
    beyond that, columns with few signal photons stay accurate while the
    middle of the block loses digits. The no-click sums only need the former.

    Examples
    --------
    >>> u = bs_unitary(0.9, 2)
    >>> round(u.amplitude(1, 0, 1, 0) ** 2, 12)
    0.9
    """
    _check_bs_args(transmissivity, cutoff)
    t = math.sqrt(transmissivity)
    r = math.sqrt(1.0 - transmissivity)
    blocks = []
    for s in range(int(cutoff) + 1):
        idx = np.arange(s + 1)
        b = _amplitudes(idx[:, None], idx[None, :], s, t, r)
        b.setflags(write=False)
        blocks.append(b)
    return BsUnitary(float(transmissivity), int(cutoff), tuple(blocks))


def bs_unitary_oracle(transmissivity, cutoff) -> BsUnitary:
    """Same unitary by exponentiating ``theta (a^dag b - a b^dag)`` per block.

    ``theta = arccos(sqrt(T))``. Independent of the combinatorial formula; it
    agrees with :func:`bs_unitary` on squared moduli.
    """
    _check_bs_args(transmissivity, cutoff)
    theta = math.acos(math.sqrt(transmissivity))
    blocks = []
    for s in range(int(cutoff) + 1):
        k = np.arange(s)
        # a^dag b |k, s-k> = sqrt((k+1)(s-k)) |k+1, s-k-1>
        raise_a = np.zeros((s + 1, s + 1))
        raise_a[k + 1, k] = np.sqrt((k + 1.0) * (s - k))
        b = expm(theta * (raise_a - raise_a.T))
        b.setflags(write=False)
        blocks.append(b)
    return BsUnitary(float(transmissivity), int(cutoff), tuple(blocks))


@lru_cache(maxsize=8)
def _transfer_cached(transmissivity, max_signal, max_probe):
    t = math.sqrt(transmissivity)
    r = math.sqrt(1.0 - transmissivity)
    width = max_signal + max_probe + 1
    out = np.zeros((max_signal + 1, max_probe + 1, width))
    chunk = 256
    for m in range(max_signal + 1):
        for start in range(0, max_probe + 1, chunk):
            n = np.arange(start, min(start + chunk, max_probe + 1))
            k = np.arange(m + n[-1] + 1)
            amp = _amplitudes(k[None, :], m, m + n[:, None], t, r)
            out[m, n[0]: n[-1] + 1, : k.size] = amp ** 2
    out.setflags(write=False)
    return out


def transfer_probabilities(transmissivity, max_signal, max_probe) -> np.ndarray:
    """Squared amplitudes ``Q[m, n, k] = |<k, m+n-k| U |m, n>|**2``.

    Only the signal columns ``m <= max_signal`` are formed, which is all the
    no-click sums need; cost grows as ``max_probe**2 * max_signal**2``.
    """
    _check_bs_args(transmissivity, max_signal)
    if max_probe < 0:
        raise DomainError("max_probe must be >= 0")
    return _transfer_cached(float(transmissivity), int(max_signal), int(max_probe))
