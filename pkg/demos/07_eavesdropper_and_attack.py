"""What the adversary gets: passive key guessing and the predictable-channel attack.

A passive Eve replays the public drop lists against her own channel
measurements; spatial decorrelation leaves her per-stream guesses
uncorrelated with the real key. An active Eve blocking the line of sight
imprints a periodic pattern on a coarse single-stream power measurement,
but per-subcarrier readings keep enough independent variation that the key
bits stay balanced.
"""

import numpy as np

from skece import experiments

scenario = experiments.load_scenario("C")
cors = experiments.eve_independence(scenario, seed=7, bits_per_stream=10_000)
print("passive eavesdropper, 30 subcarriers, 10^4-bit streams")
print(f"  per-stream key correlation: min {np.min(cors):+.4f}, "
      f"max {np.max(cors):+.4f}")
print("  everything inside [-0.15, +0.15]:", bool(np.all(np.abs(cors) <= 0.15)))

print("\npredictable channel attack (line of sight blocked every 2 s)")
results = experiments.attack_experiment(seed=7)
for mode in ("rss", "csi"):
    r = results[mode]
    label = "single-stream power emulation" if mode == "rss" else "30-subcarrier CSI"
    print(f"  {label}:")
    print(f"    bit periodicity z-score at the attack period: "
          f"{r['max_periodicity_z']:.1f} (white-noise null ~ 1, flag at 5)")
    print(f"    frequency-test p-value of the key bits: {r['frequency_p']:.3f}")
print("\nthe coarse measurement hands the attacker a predictable pattern;"
      "\nthe multi-subcarrier key stays balanced despite the periodic channel")
