"""Turn one subcarrier's amplitude readings into bits with dual thresholds.

The band half-width alpha*sigma trades bit yield against mismatches: a wide
band drops ambiguous mid-range samples on either side, so the bits that
survive agree; a narrow band keeps more samples but lets measurement noise
flip the ones near the mean.
"""

import numpy as np

from skece import channel, experiments, quantizer

scenario = experiments.load_scenario("C").with_seed(7)
traces = channel.simulate(scenario.config)
samples_a = traces.alice.amplitude_db[0]
samples_b = traces.bob.amplitude_db[0]

th_a, drop_a = quantizer.quantize_stream(samples_a, alpha=0.4)
th_b, drop_b = quantizer.quantize_stream(samples_b, alpha=0.4)
print(f"alice thresholds: mu={th_a.mu:.2f} dB, sigma={th_a.sigma:.2f} dB, "
      f"band [{th_a.q_minus:.2f}, {th_a.q_plus:.2f}]")
print(f"alice drops {len(drop_a)} samples, bob drops {len(drop_b)}")

kept = quantizer.merge_kept(drop_a, drop_b, traces.n)
bits_a = quantizer.extract_bits(samples_a, th_a, kept, party="alice", stream=0)
bits_b = quantizer.extract_bits(samples_b, th_b, kept, party="bob", stream=0)
agree = int(np.count_nonzero(bits_a.bits == bits_b.bits))
print(f"jointly kept {len(kept)} samples -> {len(bits_a)} bits, "
      f"{agree}/{len(bits_a)} agree")
print("alice bits:", bits_a.to01()[:64], "...")

print("\nalpha sweep (mean per stream over 20 seeded runs)")
rows = experiments.alpha_sweep(scenario, [0.0, 0.2, 0.4, 0.7, 1.0], trials=20, base_seed=7)
print(f"{'alpha':>6} {'ignored':>9} {'mismatched':>11} {'matched':>9}")
for row in rows:
    print(f"{row['alpha']:>6.1f} {row['ignored']:>9.1f} "
          f"{row['mismatched']:>11.3f} {row['matched']:>9.1f}")
print("\na wider band costs matched bits but removes mismatches entirely")
