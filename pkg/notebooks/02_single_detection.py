"""
One detection, step by step
===========================

Train on three noise sets, then push a buffer with three loud-mode
microphones at -14 dB through the pipeline and look at each stage.
"""
import numpy as np

from wmsense import (BenchConfig, LOUD, SynthConfig, compute_test_statistics, detect, estimate_autocorr,
                     synthesize, train_synthetic, whiten)

L = 500
profile, table = train_synthetic(BenchConfig(l_grid=(L,), master_seed=3), L)
thresholds = table.select()
print("thresholds:", np.round(thresholds, 3))

cfg = SynthConfig(carriers_hz=(6e6, 7.5e6, 9.2e6), snr_db=-14, mode=LOUD, seed=21)
buf = synthesize(cfg)

# Whitening removes the averaged noise correlation; what is left is the
# signal part plus a residual that is no longer positive definite.
Rs = whiten(estimate_autocorr(buf, L), profile)
stats = compute_test_statistics(Rs)
print("leading singular values:", np.round(stats.leading_singular_values, 2))
print("alternate ratios       :", np.round(stats.ratios, 2))

rep = detect(buf, profile, table)
print(f"counted {rep.counted}, located {rep.num_signals}:",
      [f"{c / 1e6:.3f} MHz" for c in rep.carriers_hz])
print("true carriers          :", [f"{c / 1e6:.3f} MHz" for c in cfg.carriers_hz])

# The same buffer without the microphones should report nothing.
empty = detect(synthesize(cfg, noise_only=True), profile, table)
print("noise only ->", empty.num_signals, "signals")
