# odometry/gnss/observations.py
"""Measurement containers shared by the ingest, simulator and estimator."""
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import L1_WAVELENGTH
from .exceptions import FactorError, RinexFormatError, TruthFileError


@dataclass(frozen=True)
class SatelliteObservation:
    """One satellite's L1 observables at one epoch."""

    sat_id: str
    phase: float = math.nan        # cycles
    pseudorange: float = math.nan  # m
    doppler: float = math.nan      # Hz
    snr: float = math.nan          # dB-Hz
    lock_lost: bool = False

    @property
    def phase_range(self):
        """Carrier phase scaled to metres."""
        return self.phase * L1_WAVELENGTH

    @property
    def has_phase(self):
        return math.isfinite(self.phase)

    @property
    def has_pseudorange(self):
        return math.isfinite(self.pseudorange)

    @property
    def has_doppler(self):
        return math.isfinite(self.doppler)


@dataclass(frozen=True)
class ObservationEpoch:
    t: object
    records: tuple = ()

    def __post_init__(self):
        records = tuple(self.records)
        ids = [r.sat_id for r in records]
        if len(set(ids)) != len(ids):
            raise RinexFormatError("duplicate satellite within an epoch", time=str(self.t))
        for r in records:
            if not r.lock_lost and not r.has_phase:
                raise RinexFormatError("non-finite phase on a locked record", sat_id=r.sat_id)
        object.__setattr__(self, "records", records)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def sat_ids(self):
        return [r.sat_id for r in self.records]

    def get(self, sat_id):
        for r in self.records:
            if r.sat_id == sat_id:
                return r
        return None

    def with_pseudoranges(self):
        return [r for r in self.records if r.has_pseudorange]


@dataclass(frozen=True)
class GroundTruthSample:
    t: object
    position: np.ndarray  # ENU, m
    flag: int = 1


def check_truth_monotone(samples):
    for earlier, later in zip(samples, samples[1:]):
        if not later.t > earlier.t:
            raise TruthFileError("ground-truth timestamps must be strictly increasing",
                                 time=str(later.t))
    return samples


@dataclass(frozen=True, eq=False)
class RelPoseMeasurement:
    """Relative vehicle motion T_ab between two epochs, with its 6x6 covariance."""

    t_a: object
    t_b: object
    T_ab: object
    covariance: np.ndarray = field(default_factory=lambda: np.eye(6))

    def __post_init__(self):
        if not self.t_b > self.t_a:
            raise FactorError("relative pose must satisfy t_b > t_a", t_a=str(self.t_a))
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (6, 6) or not np.allclose(cov, cov.T, atol=1e-12):
            raise FactorError("relative pose covariance must be a symmetric 6x6 matrix")
        if np.any(np.linalg.eigvalsh(cov) <= 0.0):
            raise FactorError("relative pose covariance is not positive definite")
        object.__setattr__(self, "covariance", cov)
