#
#  This file is part of MINLab.
#
#  MINLab is a protocol workbench for the Multi-Identifier Network (MIN).
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.
#

"""Closed-form APoV performance model.

Two families of formulas live here:

- the structural transmission times, built from message sizes, node
  counts and bandwidth;
- the fits measured on the 3..8 node prototype: per-step computation
  times, the round time cubic and the transmission cubic, plus the
  throughput limit derived from them for a computing-power multiple 'a'.

The fitted cubics are expressed in megabytes (10**6 bytes) over a
bandwidth in MB/s; the prototype ran at 125 MB/s.

"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from MINLab import config
from MINLab.apov import MessageSizes


logger = logging.getLogger(__name__)

MEGABYTE = 10**6
PROTOTYPE_BAND = config.DEFAULT_BAND

# Measured on the prototype: n -> (S1, S2, S3, S4, round time, throughput)
PROTOTYPE_MEASUREMENTS = {
    3: (0.0311, 0.0642, 0.0255, 0.0217, 0.132, 223706),
    4: (0.0326, 0.0750, 0.0323, 0.0268, 0.150, 263583),
    5: (0.0377, 0.0861, 0.0295, 0.0319, 0.163, 302719),
    6: (0.0416, 0.0986, 0.0367, 0.0377, 0.189, 315861),
    7: (0.0470, 0.113, 0.0392, 0.0419, 0.217, 322992),
    8: (0.0505, 0.130, 0.0552, 0.0477, 0.252, 314743),
}

# Per-step computation fits (seconds), coefficients lowest degree first
STEP_FITS = (
    Polynomial([0.0174, 0.0041]),
    Polynomial([0.0229, 0.0130]),
    Polynomial([0.0415, -0.0082, 0.0012]),
    Polynomial([0.0062, 0.0052]),
)

# Round time numerator (MB at the prototype's 125 MB/s)
CONSENSUS_FIT = Polynomial([11.2500, 2.0714, -0.1920, 0.0312])
# Transmission numerator (MB)
TRANSMISSION_FIT = Polynomial([-0.3214, 0.3213, 0.0008, 0.0001])
# Computation numerator: the round time fit minus the transmission fit
COMPUTATION_FIT = CONSENSUS_FIT - TRANSMISSION_FIT
PROTOTYPE_BAND_MB = PROTOTYPE_BAND / MEGABYTE

# Computing-power scaling factor of the computation time
SCALING_NUMERATOR = Polynomial([0.0880, 0.0606, 0.0235])
SCALING_DENOMINATOR = Polynomial([0.0, 0.0465, 0.0223])

SWEEP_HEADER = ('n', 'a', 'band', 't_tran', 't_comp', 't_cons', 'throughput')


class ModelError(Exception):
    pass


@dataclass(frozen=True)
class ModelParams:
    n: int
    n_b: int
    n_c: int
    n_bc: int
    sizes: MessageSizes = field(default_factory=MessageSizes)
    K: int = config.DEFAULT_K
    band: float = PROTOTYPE_BAND
    a: float = 1.0

    def __post_init__(self):
        if min(self.n, self.n_b, self.n_c, self.K) < 1:
            raise ModelError('Node counts and K must be positive')
        if not 0 <= self.n_bc <= min(self.n_b, self.n_c):
            raise ModelError('n_bc must lie in 0..min(n_b, n_c)')
        if self.band <= 0 or self.a <= 0:
            raise ModelError('band and a must be positive')

    @classmethod
    def prototype(cls, n, a=1.0, band=PROTOTYPE_BAND, sizes=None, K=config.DEFAULT_K):
        """Every node keeps books and votes; the round leader does not
        vote: n_b = n, n_c = n_bc = n - 1."""
        if n < 2:
            raise ModelError('The prototype role assignment needs n >= 2')
        return cls(n, n, n - 1, n - 1, sizes or MessageSizes(), K, band, a)

    @property
    def fanout(self):
        """Recipients of a message broadcast by one node."""
        return self.n_b + self.n_c - self.n_bc - 1


@dataclass(frozen=True)
class TimingBreakdown:
    n: int
    a: float
    band: float
    t_tran1: float
    t_tran2: float
    t_tran3: float
    t_tran: float
    t_tran_fit: float
    t_comp1: float
    t_comp2: float
    t_comp3: float
    t_comp4: float
    t_comp: float
    t_cons: float
    t_comp_scaled: float
    t_cons_prime: float
    throughput: float

    def as_dict(self):
        return asdict(self)


def _band_mb(band):
    return band / MEGABYTE


def transmission_times(p: ModelParams):
    """Structural transmission times of S1, S2 and S3 and their sum."""
    s = p.sizes
    t1 = p.fanout * (s.M + s.H + s.T * p.K) / p.band
    t2 = p.n_c * (s.M + s.H_v + p.n_b * s.V_b) / p.band
    t3 = p.fanout * (s.M + s.H_r + p.n_b * s.R_b + p.n_c * (s.H_v + p.n_b * s.V_b)) / p.band
    return t1, t2, t3, t1 + t2 + t3


def computation_times(n):
    """Per-step computation fits (S1..S4), in seconds."""
    return tuple(float(fit(n)) for fit in STEP_FITS)


def consensus_time_fit(n):
    """Fitted round time on the prototype, in seconds."""
    return float(CONSENSUS_FIT(n)) / PROTOTYPE_BAND_MB


def transmission_fit(n, band=PROTOTYPE_BAND):
    """Fitted transmission time, in seconds, at a bandwidth in bytes/s."""
    return float(TRANSMISSION_FIT(n)) / _band_mb(band)


def computation_fit(n):
    """Fitted computation time: round time fit minus transmission fit."""
    return float(COMPUTATION_FIT(n)) / PROTOTYPE_BAND_MB


def scaled_computation(n, a=1.0):
    """Minimum computation time with 'a' times the prototype computing
    power."""
    return computation_fit(n) / a * float(SCALING_NUMERATOR(n)) / float(SCALING_DENOMINATOR(n))


def throughput_limit(n, a=1.0, band=PROTOTYPE_BAND, K=config.DEFAULT_K):
    """Upper limit of throughput in transactions per second."""
    if n < 1 or a <= 0 or band <= 0:
        raise ModelError('n >= 1, a > 0 and band > 0 are required')
    return K * n / (scaled_computation(n, a) + transmission_fit(n, band))


def breakdown(p: ModelParams) -> TimingBreakdown:
    """Evaluates every component of the model for one parameter set."""
    t1, t2, t3, t_tran = transmission_times(p)
    c1, c2, c3, c4 = computation_times(p.n)
    t_tran_fit = transmission_fit(p.n, p.band)
    t_comp = computation_fit(p.n)
    t_comp_scaled = scaled_computation(p.n, p.a)
    t_cons_prime = t_comp_scaled + t_tran_fit
    return TimingBreakdown(
        n=p.n, a=p.a, band=p.band,
        t_tran1=t1, t_tran2=t2, t_tran3=t3, t_tran=t_tran,
        t_tran_fit=t_tran_fit,
        t_comp1=c1, t_comp2=c2, t_comp3=c3, t_comp4=c4,
        t_comp=t_comp,
        t_cons=t_comp + t_tran_fit,
        t_comp_scaled=t_comp_scaled,
        t_cons_prime=t_cons_prime,
        throughput=p.K * p.n / t_cons_prime,
    )


def structural_polynomial(sizes: MessageSizes = None, K=config.DEFAULT_K) -> Polynomial:
    """Structural transmission volume under the prototype role
    assignment, as a polynomial in n, in megabytes.

    Dividing by the bandwidth in MB/s gives seconds.

    """
    s = sizes or MessageSizes()
    n = Polynomial([0.0, 1.0])
    n_b, n_c, fanout = n, n - 1, n - 1
    volume = (fanout * (s.M + s.H + s.T * K)
              + n_c * (s.M + s.H_v + n_b * s.V_b)
              + fanout * (s.M + s.H_r + n_b * s.R_b + n_c * (s.H_v + n_b * s.V_b)))
    return volume / MEGABYTE


def fit_discrepancy(sizes: MessageSizes = None, K=config.DEFAULT_K) -> Dict[str, object]:
    """Compares the structural transmission polynomial with the printed
    transmission fit, coefficient by coefficient."""
    structural = structural_polynomial(sizes, K)
    coef = np.zeros(4)
    coef[:len(structural.coef)] = structural.coef
    fitted = TRANSMISSION_FIT.coef
    report = {
        'structural': [round(float(c), 6) for c in coef],
        'fitted': [float(c) for c in fitted],
        'difference': [round(float(c), 6) for c in coef - fitted],
        'linear_structural': round(float(coef[1]), 6),
        'linear_fitted': float(fitted[1]),
    }
    report['linear_ratio'] = report['linear_structural'] / report['linear_fitted']
    if abs(report['linear_ratio'] - 1.0) > 0.05:
        logger.warning('Structural transmission linear coefficient %.4f MB differs from '
                       'the fitted %.4f MB', report['linear_structural'], report['linear_fitted'])
    return report


def sweep_grid(ns: Sequence[int], as_: Sequence[float], bands: Sequence[float],
               K=config.DEFAULT_K) -> List[tuple]:
    """Evaluates the throughput limit over the grid n x a x band.

    Rows follow SWEEP_HEADER; band is in bytes/s.

    """
    if not len(ns) or not len(as_) or not len(bands):
        raise ModelError('Sweep ranges must not be empty')
    n, a, band = np.meshgrid(np.asarray(ns, dtype=float), np.asarray(as_, dtype=float),
                             np.asarray(bands, dtype=float), indexing='ij')
    if (n < 1).any() or (a <= 0).any() or (band <= 0).any():
        raise ModelError('n >= 1, a > 0 and band > 0 are required')
    t_tran = TRANSMISSION_FIT(n) / (band / MEGABYTE)
    t_comp = (COMPUTATION_FIT(n) / PROTOTYPE_BAND_MB / a
              * SCALING_NUMERATOR(n) / SCALING_DENOMINATOR(n))
    t_cons = t_comp + t_tran
    throughput = K * n / t_cons
    rows = []
    for idx in np.ndindex(n.shape):
        rows.append((int(n[idx]), float(a[idx]), float(band[idx]), float(t_tran[idx]),
                     float(t_comp[idx]), float(t_cons[idx]), float(throughput[idx])))
    logger.debug('Evaluated %d sweep points', len(rows))
    return rows
