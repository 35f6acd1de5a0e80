"""
Band-limited background noise
=============================

The detector is trained on noise only, so it is worth looking at what that
noise is: Gaussian samples pushed through a 5-11 MHz band-pass filter at
33.33 MHz. We check stationarity, the histogram and how fast the
correlation dies out.
"""
import numpy as np

from wmsense import gen_colored_noise, noise_diagnostics, psd_from_autocorr
from wmsense.core_dsp import biased_lags
from wmsense.synth import FS_DEFAULT, noise_filter

x = gen_colored_noise(FS_DEFAULT, 200_000, seed=1)
rep = noise_diagnostics(x, window=10_000)

print(f"filter length          : {noise_filter(FS_DEFAULT).numtaps} taps")
print(f"windowed variance ratio: {rep.variance_ratio:.3f}  (max/min over {rep.window_variances.size} windows)")
print(f"excess kurtosis        : {rep.excess_kurtosis:+.4f}")
print(f"lag-decay index        : {rep.lag_decay_index} samples (|r(k)|/r(0) < 0.05 from here on)")

# The first lags show the oscillation at the 8 MHz band centre.
r = rep.lags / rep.lags[0]
print("r(k)/r(0), k = 0..20:")
print(np.array2string(r[:21], precision=3, suppress_small=True))

# Spectrum from 500 lags: flat in band, far down outside. The unrectified
# magnitude is used so the out-of-band level is visible instead of clamped.
psd = psd_from_autocorr(biased_lags(x.samples, 500), FS_DEFAULT, rectify=False)
f, p = psd.freqs_hz, psd.power
for lo, hi in [(1e6, 4e6), (5.5e6, 10.5e6), (12e6, 16e6)]:
    band = p[(f >= lo) & (f <= hi)]
    print(f"median PSD {lo / 1e6:4.1f}-{hi / 1e6:4.1f} MHz: {10 * np.log10(np.median(band)):7.1f} dB")
