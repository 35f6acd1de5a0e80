"""Detection phase: whiten, count signals from the test statistics,
rebuild the signal autocorrelation from the leading subspace and pick
carrier frequencies off its PSD.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.signal

from .calibrate import (NUM_STATISTICS, NoiseProfile, TestStatisticVector, ThresholdTable,
                        compute_test_statistics, whiten)
from .core_dsp import (DEFAULT_NFFT, PsdEstimate, SampleBuffer, SvdDecomposition,
                       estimate_autocorr, psd_from_autocorr, svd)
from .exceptions import PreconditionError

__all__ = [
    "DetectionReport",
    "PeakSelection",
    "count_signals",
    "reconstruct_signal_autocorr",
    "locate_peaks",
    "detect",
]

MAX_SIGNALS = NUM_STATISTICS
DEFAULT_MIN_SEPARATION_HZ = 400e3
DEFAULT_PEAK_FLOOR_DB = -6.0


def count_signals(ratios, thresholds: Sequence[float], rule: str = "last") -> int:
    """Number of signals implied by comparing ratios with thresholds.

    ``rule="last"`` returns the largest x with r_x > t_x. With several
    signals of similar power the leading ratios sit near 1 (their singular
    value pairs are comparable) and only the ratio straddling the
    signal/noise boundary is large, so the last exceedance is what marks
    the count.

    ``rule="prefix"`` returns the length of the leading run of exceedances.
    """
    r = np.asarray(getattr(ratios, "ratios", ratios), dtype=np.float64)[:MAX_SIGNALS]
    t = np.asarray(thresholds, dtype=np.float64)[:MAX_SIGNALS]
    if r.size < MAX_SIGNALS or t.size < MAX_SIGNALS:
        raise PreconditionError(f"need {MAX_SIGNALS} ratios and thresholds")
    above = r > t
    if rule == "last":
        idx = np.flatnonzero(above)
        return int(idx[-1]) + 1 if idx.size else 0
    if rule == "prefix":
        return int(np.argmin(above)) if not above.all() else MAX_SIGNALS
    raise PreconditionError(f"unknown counting rule {rule!r}")


def reconstruct_signal_autocorr(dec: SvdDecomposition, n_signals: int) -> np.ndarray:
    """First row of U_s S_s V_s^T built from the leading 2 * n_signals triplets."""
    L = dec.singular_values.size
    if n_signals < 1:
        raise PreconditionError("nothing to reconstruct for n_signals < 1")
    if 2 * n_signals > L:
        raise PreconditionError(f"2 * n_signals = {2 * n_signals} exceeds L = {L}")
    k = 2 * n_signals
    U = dec.left_vectors[:, :k]
    V = dec.right_vectors[:, :k]
    return (U[0] * dec.singular_values[:k]) @ V.T


class PeakSelection(NamedTuple):
    freqs_hz: list
    shortfall: bool


def _parabolic_offset(y0: float, y1: float, y2: float) -> float:
    den = y0 - 2.0 * y1 + y2
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (y0 - y2) / den, -0.5, 0.5))


def locate_peaks(psd: PsdEstimate, n_signals: int,
                 min_separation_hz: float = DEFAULT_MIN_SEPARATION_HZ,
                 floor_db: float | None = DEFAULT_PEAK_FLOOR_DB) -> PeakSelection:
    """Greedy pick of the ``n_signals`` strongest local maxima.

    Candidates are visited strongest first and kept when they are at least
    ``min_separation_hz`` from every kept peak. With ``floor_db`` set,
    maxima more than ``-floor_db`` dB below the strongest one are not
    considered (these are sidelobes of the rebuilt subspace, not carriers).
    Each kept bin is refined with a 3-point parabola. ``shortfall`` is set
    when fewer than ``n_signals`` peaks qualify.
    """
    if n_signals < 1:
        raise PreconditionError("n_signals must be >= 1")
    p, f = psd.power, psd.freqs_hz
    # interior maxima only, so carriers stay inside (0, fs/2)
    peaks, _ = scipy.signal.find_peaks(p)
    if peaks.size == 0:
        return PeakSelection([], True)
    peaks = peaks[np.argsort(-p[peaks], kind="stable")]
    top = p[peaks[0]]
    if top <= 0:
        return PeakSelection([], True)
    level = top * 10.0 ** (floor_db / 10.0) if floor_db is not None else -np.inf
    df = psd.bin_width_hz
    kept = []
    for i in peaks:
        if p[i] < level or p[i] <= 0:
            break
        fi = f[i] + _parabolic_offset(p[i - 1], p[i], p[i + 1]) * df
        if all(abs(fi - q) >= min_separation_hz for q in kept):
            kept.append(float(fi))
            if len(kept) == n_signals:
                break
    return PeakSelection(sorted(kept), len(kept) < n_signals)


@dataclass(frozen=True)
class DetectionReport:
    """Outcome of one detection.

    ``num_signals`` is the number of located carriers. ``counted`` is the
    raw count from the test statistics; the two differ when the PSD of the
    rebuilt subspace offers fewer separable peaks than were counted
    (``shortfall``).
    """

    num_signals: int
    carriers_hz: list
    statistics: TestStatisticVector
    thresholds_used: tuple
    counted: int = 0
    shortfall: bool = False
    psd: PsdEstimate | None = None
    psd_csv_path: str | None = field(default=None)

    def to_dict(self) -> dict:
        d = {
            "num_signals": self.num_signals,
            "carriers_hz": list(self.carriers_hz),
            "ratios": self.statistics.ratios.tolist(),
            "leading_singular_values": self.statistics.leading_singular_values.tolist(),
            "thresholds_used": list(self.thresholds_used),
        }
        if self.psd_csv_path is not None:
            d["psd_csv_path"] = self.psd_csv_path
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _resolve_thresholds(thresholds, snr_db) -> tuple:
    if isinstance(thresholds, ThresholdTable):
        return thresholds.select(snr_db)
    t = tuple(float(v) for v in thresholds)
    if len(t) != NUM_STATISTICS:
        raise PreconditionError(f"expected {NUM_STATISTICS} thresholds, got {len(t)}")
    return t


def detect(buf: SampleBuffer, profile: NoiseProfile, thresholds, L: int | None = None, *,
           snr_db: float | None = None, rule: str = "last", nfft: int = DEFAULT_NFFT,
           min_separation_hz: float = DEFAULT_MIN_SEPARATION_HZ,
           floor_db: float | None = DEFAULT_PEAK_FLOOR_DB) -> DetectionReport:
    """Run the full detection pipeline on one buffer.

    ``thresholds`` is either five numbers or a ThresholdTable; for a table
    the row nearest ``snr_db`` is used, or the most conservative row when
    ``snr_db`` is None.
    """
    L = profile.order_L if L is None else L
    if L != profile.order_L:
        raise PreconditionError(f"L={L} does not match the profile order {profile.order_L}")
    fs = buf.sample_rate_hz
    if abs(fs - profile.sample_rate_hz) > 1e-9 * fs:
        raise PreconditionError(f"buffer rate {fs} Hz differs from profile rate {profile.sample_rate_hz} Hz")
    t = _resolve_thresholds(thresholds, snr_db)

    Rs = whiten(estimate_autocorr(buf, L), profile)
    stats = compute_test_statistics(Rs)
    counted = count_signals(stats.ratios, t, rule=rule)
    if counted == 0:
        return DetectionReport(0, [], stats, t)

    dec = svd(Rs)
    row = reconstruct_signal_autocorr(dec, counted)
    psd = psd_from_autocorr(row, fs, nfft)
    pick = locate_peaks(psd, counted, min_separation_hz, floor_db)
    return DetectionReport(len(pick.freqs_hz), pick.freqs_hz, stats, t, counted, pick.shortfall, psd)
