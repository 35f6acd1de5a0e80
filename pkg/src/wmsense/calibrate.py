"""Training phase: averaged noise profile, whitening by subtraction,
alternate-singular-value test statistics and threshold tables.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .core_dsp import AutocorrMatrix, SampleBuffer, estimate_autocorr
from .exceptions import CalibrationError, PreconditionError

__all__ = [
    "NoiseProfile",
    "TestStatisticVector",
    "ThresholdTable",
    "build_noise_profile",
    "whiten",
    "compute_test_statistics",
    "statistics_from_singular_values",
    "calibrate_thresholds",
    "table_one",
]

log = logging.getLogger(__name__)

NUM_STATISTICS = 5
MIN_NOISE_TRIALS = 100
DENOMINATOR_FLOOR = 1e-12
DEFAULT_SNR_GRID = tuple(float(s) for s in range(-30, -14))


@dataclass(frozen=True)
class NoiseProfile:
    """Averaged noise lag sequence used to whiten received matrices."""

    avg_lags: np.ndarray
    num_training_sets: int
    sample_rate_hz: float

    def __post_init__(self):
        r = np.array(self.avg_lags, dtype=np.float64, copy=True).ravel()
        if r.size < 2 or not np.all(np.isfinite(r)) or not r[0] > 0:
            raise PreconditionError("noise profile needs finite lags with avg_lags[0] > 0")
        r.setflags(write=False)
        object.__setattr__(self, "avg_lags", r)

    @property
    def order_L(self) -> int:
        return self.avg_lags.size

    def as_matrix(self) -> AutocorrMatrix:
        return AutocorrMatrix(self.avg_lags)

    def scaled(self, factor: float) -> "NoiseProfile":
        return NoiseProfile(self.avg_lags * factor, self.num_training_sets, self.sample_rate_hz)

    def to_dict(self) -> dict:
        return {
            "order_L": self.order_L,
            "num_training_sets": self.num_training_sets,
            "sample_rate_hz": self.sample_rate_hz,
            "avg_lags": self.avg_lags.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseProfile":
        try:
            prof = cls(d["avg_lags"], int(d["num_training_sets"]), float(d["sample_rate_hz"]))
        except KeyError as e:
            raise PreconditionError(f"noise profile missing field {e}") from None
        if "order_L" in d and int(d["order_L"]) != prof.order_L:
            raise PreconditionError(f"order_L {d['order_L']} disagrees with {prof.order_L} lags")
        return prof

    @classmethod
    def from_json(cls, text: str) -> "NoiseProfile":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TestStatisticVector:
    """Ratios r_x = lambda_{2x-1} / lambda_{2x+1}, x = 1..K."""

    __test__ = False  # keep pytest from collecting this as a test class

    ratios: np.ndarray
    leading_singular_values: np.ndarray

    @property
    def K(self) -> int:
        return self.ratios.size


@dataclass(frozen=True)
class ThresholdTable:
    """Per-SNR rows of five test-statistic thresholds.

    JSON form: ``{"target_pfa": p, "rows": [{"snr_db": s, "thresholds": [...]}]}``
    with rows kept in ascending SNR order.
    """

    rows: Mapping[float, tuple]
    target_pfa: float

    def __post_init__(self):
        if not 0 < self.target_pfa < 1:
            raise PreconditionError(f"target_pfa must be in (0, 1), got {self.target_pfa}")
        rows = {}
        for snr in sorted(self.rows):
            t = tuple(float(v) for v in self.rows[snr])
            if len(t) != NUM_STATISTICS:
                raise PreconditionError(f"row {snr} dB has {len(t)} thresholds, expected {NUM_STATISTICS}")
            if not all(v > 1 for v in t):
                raise PreconditionError(f"row {snr} dB has a threshold <= 1")
            rows[float(snr)] = t
        if not rows:
            raise PreconditionError("threshold table needs at least one row")
        object.__setattr__(self, "rows", rows)

    @property
    def snr_grid(self) -> list:
        return list(self.rows)

    def select(self, snr_db: float | None = None) -> tuple:
        """Thresholds for ``snr_db`` (nearest row), or the most conservative
        row (largest threshold sum) when the SNR is unknown."""
        if snr_db is None:
            return max(self.rows.values(), key=sum)
        nearest = min(self.rows, key=lambda s: (abs(s - snr_db), -sum(self.rows[s])))
        return self.rows[nearest]

    def to_dict(self) -> dict:
        return {
            "target_pfa": self.target_pfa,
            "rows": [{"snr_db": s, "thresholds": list(t)} for s, t in self.rows.items()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdTable":
        try:
            rows = {float(r["snr_db"]): tuple(r["thresholds"]) for r in d["rows"]}
            return cls(rows, float(d["target_pfa"]))
        except (KeyError, TypeError) as e:
            raise PreconditionError(f"malformed threshold table: {e}") from None

    @classmethod
    def from_json(cls, text: str) -> "ThresholdTable":
        return cls.from_dict(json.loads(text))


def table_one() -> ThresholdTable:
    """The published simulation thresholds (merged -19..-15 dB row expanded
    to one row per dB)."""
    text = resources.files("wmsense").joinpath("data/table1.json").read_text()
    return ThresholdTable.from_json(text)


def build_noise_profile(noise_sets: Sequence[SampleBuffer], L: int) -> NoiseProfile:
    if not noise_sets:
        raise PreconditionError("need at least one noise set")
    fs = noise_sets[0].sample_rate_hz
    if any(b.sample_rate_hz != fs for b in noise_sets):
        raise PreconditionError("noise sets have different sample rates")
    lags = np.mean([estimate_autocorr(b, L).lags for b in noise_sets], axis=0)
    return NoiseProfile(lags, len(noise_sets), fs)


def whiten(R_x: AutocorrMatrix, profile: NoiseProfile) -> AutocorrMatrix:
    """Subtract the averaged noise lags. The result may be indefinite."""
    if R_x.order_L != profile.order_L:
        raise PreconditionError(f"order mismatch: matrix L={R_x.order_L}, profile L={profile.order_L}")
    return AutocorrMatrix(R_x.lags - profile.avg_lags)


def statistics_from_singular_values(s: np.ndarray, K: int = NUM_STATISTICS) -> TestStatisticVector:
    """Alternate ratios from nonincreasing singular values.

    Singular values below ``1e-12 * lambda_1`` are raised to that floor
    before dividing. This keeps denominators nonzero, and it also makes
    rounding-level tails of a low-rank matrix give ratios of exactly 1
    instead of arbitrary quotients of noise. An all-zero spectrum yields
    ratios of 1.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.size < 2 * K + 1:
        raise PreconditionError(f"need at least {2 * K + 1} singular values, got {s.size}")
    lead = s[: 2 * K + 1].copy()
    if lead[0] == 0:
        return TestStatisticVector(np.ones(K), lead)
    floored = np.maximum(lead, DENOMINATOR_FLOOR * lead[0])
    return TestStatisticVector(floored[0:2 * K:2] / floored[2:2 * K + 1:2], lead)


def compute_test_statistics(R: AutocorrMatrix, K: int = NUM_STATISTICS) -> TestStatisticVector:
    if R.order_L < 2 * K + 1:
        raise PreconditionError(f"need L >= {2 * K + 1}, got {R.order_L}")
    w = scipy.linalg.eigvalsh(R.matrix(), driver="evd")
    s = np.sort(np.abs(w))[::-1]
    return statistics_from_singular_values(s, K)


def _any_detected(R: np.ndarray, thresholds: np.ndarray, rule: str) -> np.ndarray:
    """Per row of ratios, whether the counting rule reports at least one signal."""
    if rule == "prefix":
        return R[:, 0] > thresholds[0]
    if rule == "last":
        return np.any(R > thresholds, axis=1)
    raise PreconditionError(f"unknown counting rule {rule!r}")


def _false_alarm_rate(R0: np.ndarray, thresholds: np.ndarray, rule: str) -> float:
    return float(np.mean(_any_detected(R0, thresholds, rule)))


def calibrate_thresholds(
    noise_trials: Sequence[TestStatisticVector],
    signal_trials: Mapping[float, Sequence[TestStatisticVector]] | None = None,
    target_pfa: float = 0.1,
    *,
    rule: str = "last",
    step: float = 0.01,
    max_iter: int = 200,
    snr_grid: Sequence[float] | None = None,
) -> ThresholdTable:
    """Thresholds from the noise-only statistic distribution.

    Each threshold starts at the (1 - target_pfa) empirical quantile of its
    statistic (never below ``1 + step``); the whole vector is then scaled up
    by ``1 + step`` until the end-to-end false-alarm rate on ``noise_trials``
    (any signal counted) is at most ``target_pfa``.

    Rows are emitted for every SNR key of ``signal_trials`` (or ``snr_grid``,
    or the default -30..-15 dB grid). The signal trials do not move the
    thresholds; their count-detection rate is logged per row.
    """
    n = len(noise_trials)
    if n < MIN_NOISE_TRIALS:
        raise CalibrationError(f"need at least {MIN_NOISE_TRIALS} noise trials, got {n}")
    if not 0 < target_pfa < 0.5:
        raise CalibrationError(f"target_pfa must be in (0, 0.5), got {target_pfa}")
    R0 = np.array([t.ratios[:NUM_STATISTICS] for t in noise_trials])
    if R0.shape[1] < NUM_STATISTICS:
        raise CalibrationError(f"noise trials carry fewer than {NUM_STATISTICS} ratios")

    thresholds = np.maximum(np.quantile(R0, 1.0 - target_pfa, axis=0), 1.0 + step)
    pfa = _false_alarm_rate(R0, thresholds, rule)
    it = 0
    while pfa > target_pfa:
        if it == max_iter:
            raise CalibrationError(f"false-alarm rate {pfa:.3f} still above {target_pfa} after {max_iter} steps")
        thresholds = thresholds * (1.0 + step)
        pfa = _false_alarm_rate(R0, thresholds, rule)
        it += 1
    log.info("calibrated thresholds %s (pfa %.3f after %d steps)", np.round(thresholds, 4), pfa, it)

    if signal_trials:
        grid = sorted(signal_trials)
        for snr in grid:
            R1 = np.array([t.ratios[:NUM_STATISTICS] for t in signal_trials[snr]]).reshape(-1, NUM_STATISTICS)
            rate = float(np.mean(_any_detected(R1, thresholds, rule))) if len(R1) else float("nan")
            log.info("snr %+.1f dB: count-detection rate %.3f", snr, rate)
    else:
        grid = sorted(snr_grid) if snr_grid is not None else list(DEFAULT_SNR_GRID)
    row = tuple(float(v) for v in thresholds)
    return ThresholdTable({float(s): row for s in grid}, float(target_pfa))
