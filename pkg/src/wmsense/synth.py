"""Synthetic test inputs: FM wireless-microphone carriers, band-limited
noise and their mixtures at a controlled per-signal SNR.

SNR convention: each signal's mean-square power divided by the total
power of the band-limited noise buffer.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_dsp import FilterSpec, Origin, SampleBuffer, design_bandpass
from .exceptions import ConfigError, PreconditionError

__all__ = [
    "WmMode",
    "LOUD",
    "SOFT",
    "SILENT",
    "MODES",
    "SynthConfig",
    "gen_wm_signal",
    "gen_colored_noise",
    "mix_at_snr",
    "synthesize",
    "noise_filter",
]

FS_DEFAULT = 33.33e6
NOISE_BAND_HZ = (5e6, 11e6)
CARRIER_GUARD_HZ = 200e3
MIN_CARRIER_SPACING_HZ = 400e3
MAX_DEVIATION_HZ = 100e3
DEFAULT_CARRIERS_HZ = (6e6, 7e6, 8e6, 9e6, 10e6)


@dataclass(frozen=True)
class WmMode:
    """Single-tone FM parameters of one microphone operating mode."""

    name: str
    fm_tone_hz: float
    fm_deviation_hz: float

    def __post_init__(self):
        if not self.fm_tone_hz > 0 or not self.fm_deviation_hz > 0:
            raise PreconditionError("fm_tone_hz and fm_deviation_hz must be positive")
        if self.fm_deviation_hz > MAX_DEVIATION_HZ:
            raise PreconditionError(
                f"fm_deviation_hz {self.fm_deviation_hz} exceeds {MAX_DEVIATION_HZ} Hz")

    @property
    def modulation_index(self) -> float:
        return self.fm_deviation_hz / self.fm_tone_hz

    @classmethod
    def from_json(cls, obj) -> "WmMode":
        if isinstance(obj, str):
            try:
                return MODES[obj]
            except KeyError:
                raise ConfigError(f"unknown mode {obj!r}; expected one of {sorted(MODES)}") from None
        if isinstance(obj, dict):
            try:
                return cls(str(obj["name"]), float(obj["fm_tone_hz"]), float(obj["fm_deviation_hz"]))
            except KeyError as e:
                raise ConfigError(f"mode object missing field {e}") from None
        raise ConfigError(f"mode must be a name or an object, got {type(obj).__name__}")

    def to_json(self):
        if MODES.get(self.name) == self:
            return self.name
        return {"name": self.name, "fm_tone_hz": self.fm_tone_hz, "fm_deviation_hz": self.fm_deviation_hz}


LOUD = WmMode("loud", 13.4e3, 32.6e3)
SOFT = WmMode("soft", 3.9e3, 15e3)
SILENT = WmMode("silent", 32e3, 5e3)
MODES = {m.name: m for m in (LOUD, SOFT, SILENT)}


@dataclass(frozen=True)
class SynthConfig:
    carriers_hz: tuple = DEFAULT_CARRIERS_HZ[:1]
    snr_db: float = -20.0
    mode: WmMode = LOUD
    seed: int = 0
    sample_rate_hz: float = FS_DEFAULT
    num_samples: int = 20000

    def __post_init__(self):
        carriers = tuple(float(c) for c in self.carriers_hz)
        object.__setattr__(self, "carriers_hz", carriers)
        if not isinstance(self.mode, WmMode):
            object.__setattr__(self, "mode", WmMode.from_json(self.mode))
        if not 1 <= len(carriers) <= 5:
            raise ConfigError(f"need 1 to 5 carriers, got {len(carriers)}")
        lo, hi = NOISE_BAND_HZ[0] + CARRIER_GUARD_HZ, NOISE_BAND_HZ[1] - CARRIER_GUARD_HZ
        for c in carriers:
            if not lo < c < hi:
                raise ConfigError(f"carrier {c} Hz outside ({lo}, {hi})")
        srt = sorted(carriers)
        if any(b - a < MIN_CARRIER_SPACING_HZ for a, b in zip(srt, srt[1:])):
            raise ConfigError(f"carriers closer than {MIN_CARRIER_SPACING_HZ} Hz")
        if self.num_samples < 1 or self.sample_rate_hz <= 0:
            raise ConfigError("num_samples and sample_rate_hz must be positive")

    def to_dict(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "num_samples": self.num_samples,
            "carriers_hz": list(self.carriers_hz),
            "snr_db": self.snr_db,
            "mode": self.mode.to_json(),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {"sample_rate_hz", "num_samples", "carriers_hz", "snr_db", "mode", "seed"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown SynthConfig fields: {sorted(unknown)}")
        kw = dict(d)
        if "num_samples" in kw:
            kw["num_samples"] = int(kw["num_samples"])
        if "seed" in kw:
            kw["seed"] = int(kw["seed"])
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "SynthConfig":
        return cls.from_dict(json.loads(text))


def gen_wm_signal(mode: WmMode, fc: float, fs: float, n: int, seed=None) -> SampleBuffer:
    """Unit-RMS single-tone FM carrier.

    s(k) = cos(2 pi fc k / fs + phi + beta sin(2 pi fm k / fs + theta)),
    beta = deviation / tone, with phi and theta drawn from ``seed``.
    """
    reach = mode.fm_deviation_hz + mode.fm_tone_hz
    if fc + reach >= fs / 2 or fc - reach <= 0:
        raise PreconditionError(f"carrier {fc} Hz with occupied reach {reach} Hz does not fit in (0, fs/2)")
    rng = np.random.default_rng(seed)
    phi, theta = rng.uniform(0.0, 2 * np.pi, size=2)
    k = np.arange(n)
    phase = 2 * np.pi * fc / fs * k + phi + mode.modulation_index * np.sin(2 * np.pi * mode.fm_tone_hz / fs * k + theta)
    s = np.cos(phase)
    s /= np.sqrt(np.mean(s ** 2))
    return SampleBuffer(s, fs, Origin.SYNTHETIC)


@functools.lru_cache(maxsize=16)
def noise_filter(fs: float, f_low: float = NOISE_BAND_HZ[0], f_high: float = NOISE_BAND_HZ[1]) -> FilterSpec:
    return design_bandpass(fs, f_low, f_high)


def gen_colored_noise(fs: float, n: int, seed=None, band=NOISE_BAND_HZ) -> SampleBuffer:
    """Unit-variance Gaussian noise band-limited to ``band``.

    White noise is filtered with the band-pass FIR; the start-up transient
    is generated and discarded so every returned sample is steady-state.
    """
    spec = noise_filter(float(fs), float(band[0]), float(band[1]))
    if n < 4 * spec.numtaps:
        raise PreconditionError(f"n must be >= {4 * spec.numtaps} (4x filter length), got {n}")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(n + spec.numtaps - 1)
    y = np.convolve(w, spec.taps, mode="valid")
    y /= np.sqrt(np.mean(y ** 2))
    return SampleBuffer(y, fs, Origin.SYNTHETIC)


def _check_compatible(bufs: Sequence[SampleBuffer]):
    n, fs = len(bufs[0]), bufs[0].sample_rate_hz
    for b in bufs[1:]:
        if len(b) != n:
            raise PreconditionError(f"length mismatch: {len(b)} vs {n}")
        if b.sample_rate_hz != fs:
            raise PreconditionError(f"sample rate mismatch: {b.sample_rate_hz} vs {fs}")


def mix_at_snr(signals: Sequence[SampleBuffer], noise: SampleBuffer, snr_db: float) -> SampleBuffer:
    """Noise plus every signal rescaled to ``snr_db`` relative to the noise power."""
    _check_compatible([noise, *signals])
    pn = noise.power()
    target = pn * 10.0 ** (snr_db / 10.0)
    out = noise.samples.copy()
    for s in signals:
        ps = s.power()
        if ps == 0:
            raise PreconditionError("cannot scale an all-zero signal to a target SNR")
        out += np.sqrt(target / ps) * s.samples
    return SampleBuffer(out, noise.sample_rate_hz, noise.origin)


def synthesize(cfg: SynthConfig, noise_only: bool = False) -> SampleBuffer:
    """Generate one received buffer described by ``cfg``.

    Noise and each carrier draw from independent children of ``cfg.seed``,
    so the noise realization does not depend on how many carriers exist.
    """
    ss = np.random.SeedSequence(cfg.seed)
    noise_seed, *sig_seeds = ss.spawn(1 + len(DEFAULT_CARRIERS_HZ))
    noise = gen_colored_noise(cfg.sample_rate_hz, cfg.num_samples, noise_seed)
    if noise_only:
        return noise
    sigs = [gen_wm_signal(cfg.mode, fc, cfg.sample_rate_hz, cfg.num_samples, s)
            for fc, s in zip(cfg.carriers_hz, sig_seeds)]
    return mix_at_snr(sigs, noise, cfg.snr_db)
