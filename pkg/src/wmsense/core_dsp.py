"""Numeric kernels: lag autocorrelation, Toeplitz SVD, PSD, band-pass FIR
design and noise diagnostics.

Everything here works on real passband samples. Matrices that are
symmetric Toeplitz are stored by their first row (the lag sequence) and
expanded on demand.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.signal

from .exceptions import PreconditionError

__all__ = [
    "Origin",
    "SampleBuffer",
    "AutocorrMatrix",
    "SvdDecomposition",
    "PsdEstimate",
    "FilterSpec",
    "DiagnosticsReport",
    "biased_lags",
    "estimate_autocorr",
    "svd",
    "psd_from_autocorr",
    "design_bandpass",
    "apply_filter",
    "lag_decay_index",
    "noise_diagnostics",
]

DEFAULT_NFFT = 8192


class Origin(str, enum.Enum):
    SYNTHETIC = "synthetic"
    FILE = "file"


@dataclass(frozen=True)
class SampleBuffer:
    """Real-valued passband samples plus their sample rate."""

    samples: np.ndarray
    sample_rate_hz: float
    origin: Origin = Origin.SYNTHETIC

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, copy=True).ravel()
        if x.size < 1:
            raise PreconditionError("sample buffer must hold at least one sample")
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.isfinite(x))[0])
            raise PreconditionError(f"non-finite sample at index {bad}")
        if not self.sample_rate_hz > 0:
            raise PreconditionError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "origin", Origin(self.origin))

    def __len__(self):
        return self.samples.size

    def power(self) -> float:
        """Mean-square value of the samples."""
        return float(np.mean(self.samples ** 2))

    def scaled(self, factor: float) -> "SampleBuffer":
        return SampleBuffer(self.samples * factor, self.sample_rate_hz, self.origin)


@dataclass(frozen=True)
class AutocorrMatrix:
    """Symmetric Toeplitz autocorrelation matrix held as its lag sequence.

    ``lags[k]`` is r(k) for k = 0..L-1. Whitened matrices are allowed to
    break r(0) >= |r(k)|, so only finiteness is enforced here.
    """

    lags: np.ndarray

    def __post_init__(self):
        r = np.array(self.lags, dtype=np.float64, copy=True).ravel()
        if r.size < 1:
            raise PreconditionError("autocorrelation needs at least one lag")
        if not np.all(np.isfinite(r)):
            raise PreconditionError("autocorrelation lags must be finite")
        r.setflags(write=False)
        object.__setattr__(self, "lags", r)

    @property
    def order_L(self) -> int:
        return self.lags.size

    def matrix(self) -> np.ndarray:
        return scipy.linalg.toeplitz(self.lags)

    def scaled(self, factor: float) -> "AutocorrMatrix":
        return AutocorrMatrix(self.lags * factor)

    def __add__(self, other: "AutocorrMatrix") -> "AutocorrMatrix":
        if other.order_L != self.order_L:
            raise PreconditionError(f"order mismatch: {self.order_L} vs {other.order_L}")
        return AutocorrMatrix(self.lags + other.lags)

    def __sub__(self, other: "AutocorrMatrix") -> "AutocorrMatrix":
        if other.order_L != self.order_L:
            raise PreconditionError(f"order mismatch: {self.order_L} vs {other.order_L}")
        return AutocorrMatrix(self.lags - other.lags)


@dataclass(frozen=True)
class SvdDecomposition:
    """U, S, V with ``R = U @ diag(S) @ V.T`` and S nonincreasing."""

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self, rank: int | None = None) -> np.ndarray:
        k = self.singular_values.size if rank is None else rank
        U = self.left_vectors[:, :k]
        V = self.right_vectors[:, :k]
        return (U * self.singular_values[:k]) @ V.T


@dataclass(frozen=True)
class PsdEstimate:
    freqs_hz: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs_hz, dtype=np.float64)
        p = np.asarray(self.power, dtype=np.float64)
        if f.shape != p.shape or f.ndim != 1 or f.size == 0:
            raise PreconditionError("freqs_hz and power must be equal-length, nonempty 1-D arrays")
        if np.any(np.diff(f) <= 0):
            raise PreconditionError("freqs_hz must be strictly increasing")
        if np.any(p < 0):
            raise PreconditionError("power must be nonnegative")
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "power", p)

    @property
    def bin_width_hz(self) -> float:
        return float(self.freqs_hz[1] - self.freqs_hz[0]) if self.freqs_hz.size > 1 else 0.0

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.freqs_hz, self.power]), delimiter=",",
                   header="freq_hz,power", comments="", fmt="%.17g")


@dataclass(frozen=True)
class FilterSpec:
    """Linear-phase FIR band-pass filter."""

    taps: np.ndarray
    sample_rate_hz: float
    f_low_hz: float
    f_high_hz: float

    @property
    def numtaps(self) -> int:
        return self.taps.size

    @property
    def group_delay(self) -> int:
        return (self.taps.size - 1) // 2


def biased_lags(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased lag estimates r(k) = (1/N) sum_n x(n) x(n+k), k < max_lag.

    Computed with a zero-padded FFT long enough that circular wrap-around
    never touches the requested lags.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if not 1 <= max_lag <= n:
        raise PreconditionError(f"max_lag must be in [1, {n}], got {max_lag}")
    nfft = scipy.fft.next_fast_len(n + max_lag - 1, real=True)
    X = scipy.fft.rfft(x, nfft)
    r = scipy.fft.irfft(X.real ** 2 + X.imag ** 2, nfft)[:max_lag]
    return r / n


def estimate_autocorr(buf: SampleBuffer, L: int) -> AutocorrMatrix:
    """L x L biased autocorrelation matrix of ``buf``.

    Requires ``2 <= L <= len(buf) / 2``.
    """
    n = len(buf)
    if L < 2 or 2 * L > n:
        raise PreconditionError(f"need 2 <= L <= N/2; got L={L}, N={n}")
    return AutocorrMatrix(biased_lags(buf.samples, L))


def svd(R: AutocorrMatrix | np.ndarray) -> SvdDecomposition:
    """SVD of a symmetric autocorrelation matrix.

    Obtained from the symmetric eigendecomposition: singular values are
    |w|, U holds the eigenvectors and V = U * sign(w), so U S V^T = R
    even when R is indefinite (as whitened matrices are).
    """
    M = R.matrix() if isinstance(R, AutocorrMatrix) else np.asarray(R, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        raise PreconditionError("matrix has non-finite entries")
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise PreconditionError(f"expected a square matrix, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(np.abs(M).max(), 1e-300)):
        U, s, Vt = np.linalg.svd(M)
        return SvdDecomposition(s, U, Vt.T)
    w, U = scipy.linalg.eigh(M, driver="evd")
    order = np.argsort(-np.abs(w), kind="stable")
    w = w[order]
    U = U[:, order]
    sign = np.where(w < 0, -1.0, 1.0)
    return SvdDecomposition(np.abs(w), U, U * sign)


def _symmetric_spectrum(lags: np.ndarray, nfft: int) -> np.ndarray:
    L = lags.size
    ext = np.zeros(nfft)
    ext[:L] = lags
    ext[nfft - L + 1:] = lags[:0:-1]
    return scipy.fft.rfft(ext).real


def psd_from_autocorr(lags, fs: float, nfft: int = DEFAULT_NFFT, rectify: bool = True) -> PsdEstimate:
    """PSD as the DFT of the symmetrically extended lag sequence.

    The grid is the ``nfft // 2 + 1`` one-sided bins covering [0, fs/2].
    With ``rectify`` (the default) negative values are clamped to zero; with
    ``rectify=False`` the magnitude of the raw DFT is returned instead,
    which is what noise-floor comparisons want.
    """
    lags = np.asarray(lags, dtype=np.float64).ravel()
    L = lags.size
    if nfft < 2 * L:
        raise PreconditionError(f"nfft must be >= 2*L = {2 * L}, got {nfft}")
    if nfft & (nfft - 1):
        raise PreconditionError(f"nfft must be a power of two, got {nfft}")
    spec = _symmetric_spectrum(lags, nfft)
    power = np.clip(spec, 0.0, None) if rectify else np.abs(spec)
    freqs = np.arange(nfft // 2 + 1) * (fs / nfft)
    return PsdEstimate(freqs, power)


def design_bandpass(fs: float, f_low: float, f_high: float, transition_hz: float = 0.5e6,
                    stop_atten_db: float = 50.0) -> FilterSpec:
    """Kaiser-windowed FIR band-pass filter.

    The -6 dB cutoffs sit ``transition_hz / 2`` outside the band edges so
    the band [f_low, f_high] is flat and the response is at least 40 dB
    down ``transition_hz`` outside each edge (designed with
    ``stop_atten_db`` for margin).
    """
    if not 0 < f_low < f_high < fs / 2:
        raise PreconditionError(f"need 0 < f_low < f_high < fs/2; got {f_low}, {f_high}, fs={fs}")
    lo = f_low - transition_hz / 2
    hi = f_high + transition_hz / 2
    if lo <= 0 or hi >= fs / 2:
        raise PreconditionError("band edges too close to DC or Nyquist for the transition width")
    numtaps, beta = scipy.signal.kaiserord(stop_atten_db, transition_hz / (fs / 2))
    numtaps |= 1  # odd length: type I linear phase, fine at Nyquist
    taps = scipy.signal.firwin(numtaps, [lo, hi], window=("kaiser", beta), pass_zero=False, fs=fs)
    taps.setflags(write=False)
    return FilterSpec(taps, float(fs), float(f_low), float(f_high))


def apply_filter(spec: FilterSpec, buf: SampleBuffer, trim: bool = False) -> SampleBuffer:
    """Filter ``buf`` with ``spec``.

    With ``trim`` the first ``numtaps - 1`` output samples (the start-up
    transient) are dropped, so the result is shorter than the input.
    """
    if abs(buf.sample_rate_hz - spec.sample_rate_hz) > 1e-9 * spec.sample_rate_hz:
        raise PreconditionError("filter and buffer sample rates differ")
    y = scipy.signal.lfilter(spec.taps, 1.0, buf.samples)
    if trim:
        if buf.samples.size <= spec.numtaps - 1:
            raise PreconditionError("buffer shorter than the filter transient")
        y = y[spec.numtaps - 1:]
    return SampleBuffer(y, buf.sample_rate_hz, buf.origin)


def lag_decay_index(lags: np.ndarray, level: float = 0.05) -> int | None:
    """Smallest k such that |r(j)| / r(0) < level for every j >= k.

    Band-pass noise oscillates at the band center, so the first crossing
    of ``level`` says little; the tail definition tracks the envelope.
    Returns None when the tail never drops below ``level`` or r(0) == 0.
    """
    lags = np.asarray(lags, dtype=np.float64)
    if lags[0] <= 0:
        return None
    above = np.flatnonzero(np.abs(lags) / lags[0] >= level)
    k = int(above[-1]) + 1
    return k if k < lags.size else None


@dataclass(frozen=True)
class DiagnosticsReport:
    window: int
    window_means: np.ndarray
    window_variances: np.ndarray
    hist_counts: np.ndarray
    hist_edges: np.ndarray
    lags: np.ndarray
    lag_decay_index: int | None
    excess_kurtosis: float

    @property
    def variance_ratio(self) -> float:
        """max/min windowed variance (inf if some window is flat, nan if all are)."""
        lo, hi = self.window_variances.min(), self.window_variances.max()
        if hi == 0:
            return float("nan")
        return float(hi / lo) if lo > 0 else float("inf")

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "window_means": self.window_means.tolist(),
            "window_variances": self.window_variances.tolist(),
            "hist_counts": self.hist_counts.tolist(),
            "hist_edges": self.hist_edges.tolist(),
            "lag_decay_index": self.lag_decay_index,
            "variance_ratio": self.variance_ratio,
            "excess_kurtosis": self.excess_kurtosis,
        }


def noise_diagnostics(buf: SampleBuffer, window: int, max_lag: int = 200, bins: int = 64) -> DiagnosticsReport:
    """Stationarity and correlation checks for a noise capture.

    Returns mean and variance over consecutive non-overlapping windows, a
    histogram of all samples, the lag sequence up to ``max_lag`` and its
    decay index.
    """
    x = buf.samples
    if window < 1 or x.size < 4 * window:
        raise PreconditionError(f"need len(buf) >= 4*window; got {x.size} < {4 * window}")
    nwin = x.size // window
    blocks = x[: nwin * window].reshape(nwin, window)
    means = blocks.mean(axis=1)
    variances = blocks.var(axis=1)
    counts, edges = np.histogram(x, bins=bins)
    lags = biased_lags(x, min(max_lag, x.size // 2))
    var = x.var()
    kurt = float(np.mean((x - x.mean()) ** 4) / var ** 2 - 3.0) if var > 0 else float("nan")
    return DiagnosticsReport(window, means, variances, counts, edges, lags,
                             lag_decay_index(lags), kurt)
