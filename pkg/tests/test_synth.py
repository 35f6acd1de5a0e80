import json

import numpy as np
import pytest
import scipy.signal
from hypothesis import given, settings, strategies as st

from wmsense.core_dsp import SampleBuffer
from wmsense.exceptions import ConfigError, PreconditionError
from wmsense.synth import (FS_DEFAULT, LOUD, SILENT, SOFT, SynthConfig, WmMode, gen_colored_noise,
                           gen_wm_signal, mix_at_snr, synthesize)


def band_fraction(x, fs, fc, half_width):
    f, p = scipy.signal.periodogram(x, fs=fs, window="blackmanharris")
    return p[np.abs(f - fc) <= half_width].sum() / p.sum()


def test_mode_presets():
    assert LOUD.fm_tone_hz == 13.4e3 and LOUD.fm_deviation_hz == 32.6e3
    assert SOFT.fm_tone_hz == 3.9e3 and SOFT.fm_deviation_hz == 15e3
    assert SILENT.fm_tone_hz == 32e3 and SILENT.fm_deviation_hz == 5e3
    assert LOUD.modulation_index == pytest.approx(32.6 / 13.4)


def test_mode_rejects_wide_deviation():
    with pytest.raises(PreconditionError):
        WmMode("wide", 10e3, 150e3)
    with pytest.raises(PreconditionError):
        WmMode("bad", 0.0, 10e3)


@pytest.mark.parametrize("mode", [LOUD, SOFT, SILENT])
def test_spectral_containment(mode):
    s = gen_wm_signal(mode, 8e6, FS_DEFAULT, 1 << 20, seed=3)
    assert band_fraction(s.samples, FS_DEFAULT, 8e6, 100e3) >= 0.99
    assert 1 - band_fraction(s.samples, FS_DEFAULT, 8e6, 200e3) < 0.01


def test_loud_psd_peaks_at_carrier():
    s = gen_wm_signal(LOUD, 8e6, FS_DEFAULT, 1 << 18, seed=1)
    f, p = scipy.signal.welch(s.samples, fs=FS_DEFAULT, nperseg=8192)
    assert abs(f[np.argmax(p)] - 8e6) <= 100e3


def test_signal_unit_rms_and_determinism():
    a = gen_wm_signal(LOUD, 7e6, FS_DEFAULT, 20000, seed=11)
    b = gen_wm_signal(LOUD, 7e6, FS_DEFAULT, 20000, seed=11)
    c = gen_wm_signal(LOUD, 7e6, FS_DEFAULT, 20000, seed=12)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    assert a.power() == pytest.approx(1.0)


def test_zero_deviation_limit_is_a_tone():
    s = gen_wm_signal(WmMode("cw", 10e3, 1e-3), 8e6, FS_DEFAULT, 1 << 16, seed=0)
    f, p = scipy.signal.periodogram(s.samples, fs=FS_DEFAULT, window="hann")
    k = np.argmax(p)
    assert abs(f[k] - 8e6) <= f[1]
    assert p[k - 2:k + 3].sum() / p.sum() > 0.99


def test_signal_near_nyquist_rejected():
    with pytest.raises(PreconditionError):
        gen_wm_signal(LOUD, FS_DEFAULT / 2 - 20e3, FS_DEFAULT, 1000)
    with pytest.raises(PreconditionError):
        gen_wm_signal(LOUD, 10e3, FS_DEFAULT, 1000)


def test_colored_noise_properties():
    x = gen_colored_noise(FS_DEFAULT, 1_000_000, seed=5).samples
    assert np.mean(x ** 2) == pytest.approx(1.0)
    k = np.mean((x - x.mean()) ** 4) / x.var() ** 2 - 3
    assert abs(k) < 0.2
    f, p = scipy.signal.welch(x, fs=FS_DEFAULT, nperseg=4096)
    inband = np.mean(p[(f > 5.5e6) & (f < 10.5e6)])
    outband = np.mean(p[(f < 4e6) | (f > 12e6)])
    assert 10 * np.log10(inband / outband) > 40


def test_colored_noise_determinism_and_length():
    a = gen_colored_noise(FS_DEFAULT, 20000, seed=9)
    assert len(a) == 20000
    assert np.array_equal(a.samples, gen_colored_noise(FS_DEFAULT, 20000, seed=9).samples)
    with pytest.raises(PreconditionError):
        gen_colored_noise(FS_DEFAULT, 100, seed=0)


def test_mix_unit_scale_at_zero_db():
    noise = SampleBuffer(np.array([1.0, -1.0, 1.0, -1.0]), 1.0)
    sig = SampleBuffer(np.array([1.0, 1.0, -1.0, -1.0]), 1.0)
    out = mix_at_snr([sig], noise, 0.0)
    np.testing.assert_allclose(out.samples, noise.samples + sig.samples)


@settings(max_examples=20, deadline=None)
@given(st.floats(-30, 0), st.integers(0, 2**31))
def test_mix_realized_snr(snr, seed):
    noise = gen_colored_noise(FS_DEFAULT, 20000, seed=seed)
    sig = gen_wm_signal(LOUD, 8e6, FS_DEFAULT, 20000, seed=seed + 1)
    out = mix_at_snr([sig], noise, snr)
    scaled = out.samples - noise.samples
    got = 10 * np.log10(np.mean(scaled ** 2) / noise.power())
    assert abs(got - snr) <= 0.1


def test_mix_five_signal_additivity():
    noise = gen_colored_noise(FS_DEFAULT, 20000, seed=2)
    sigs = [gen_wm_signal(LOUD, fc, FS_DEFAULT, 20000, seed=i) for i, fc in enumerate([6e6, 7e6, 8e6, 9e6, 10e6])]
    out = mix_at_snr(sigs, noise, -25.0)
    total = np.mean((out.samples - noise.samples) ** 2)
    assert total == pytest.approx(5 * 10 ** -2.5 * noise.power(), rel=0.02)


def test_mix_mismatch_errors():
    a = SampleBuffer(np.ones(10), 1.0)
    with pytest.raises(PreconditionError):
        mix_at_snr([SampleBuffer(np.ones(11), 1.0)], a, 0)
    with pytest.raises(PreconditionError):
        mix_at_snr([SampleBuffer(np.ones(10), 2.0)], a, 0)
    with pytest.raises(PreconditionError):
        mix_at_snr([SampleBuffer(np.zeros(10), 1.0)], a, 0)


def test_synth_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(carriers_hz=())
    with pytest.raises(ConfigError):
        SynthConfig(carriers_hz=(6e6,) * 6)
    with pytest.raises(ConfigError):
        SynthConfig(carriers_hz=(5.1e6,))
    with pytest.raises(ConfigError):
        SynthConfig(carriers_hz=(6e6, 6.3e6))
    with pytest.raises(ConfigError):
        SynthConfig.from_dict({"carriers": [6e6]})


def test_synth_config_json_roundtrip():
    cfg = SynthConfig(carriers_hz=(6e6, 8e6), snr_db=-22.5, mode=SOFT, seed=2**63 - 1)
    d = json.loads(cfg.to_json())
    assert set(d) == {"sample_rate_hz", "num_samples", "carriers_hz", "snr_db", "mode", "seed"}
    assert SynthConfig.from_json(cfg.to_json()) == cfg
    custom = SynthConfig(mode=WmMode("custom", 5e3, 20e3))
    assert SynthConfig.from_json(custom.to_json()) == custom


def test_synthesize_deterministic():
    cfg = SynthConfig(carriers_hz=(6e6, 9e6), snr_db=-18, seed=4)
    a, b = synthesize(cfg), synthesize(cfg)
    assert a.samples.tobytes() == b.samples.tobytes()
    noise = synthesize(cfg, noise_only=True)
    assert len(noise) == cfg.num_samples
    assert not np.array_equal(noise.samples, a.samples)
