"""Statistical quality of generated keys across the six bundled scenarios.

Keys of at least 10^4 bits are generated per scenario and pushed through the
four-test battery (frequency, longest run of ones, spectral, approximate
entropy). A test passes when its p-value exceeds 0.01.
"""

from skece import analysis, experiments

print(f"{'scenario':>8} {'bits':>7} {'frequency':>10} {'longestrun':>11} "
      f"{'fft':>8} {'apen':>8}  verdict")
for name in experiments.PRESET_NAMES:
    scenario = experiments.load_scenario(name)
    bits = experiments.key_material(scenario, seed=6, min_bits=10_000)
    reports = analysis.run_all_tests(bits)
    ps = {rep.name: rep.p_value for rep in reports}
    verdict = "pass" if all(rep.passed for rep in reports) else "FAIL"
    print(f"{name:>8} {len(bits):>7} {ps['frequency']:>10.3f} "
          f"{ps['longest_run']:>11.3f} {ps['fft']:>8.3f} "
          f"{ps['approx_entropy']:>8.3f}  {verdict}")

print("\nsecret-bit rate for one scenario-C session")
from skece.channel import simulate
from skece.protocol import ProtocolParams, run_key_agreement

scenario = experiments.load_scenario("C").with_seed(66)
traces = simulate(scenario.config)
result, _ = run_key_agreement(traces, ProtocolParams(alpha=scenario.alpha,
                                                     key_length=150, rng_seed=66))
rate = analysis.secret_bit_rate(result, duration=traces.alice.duration,
                                streams=traces.m)
print(f"matched bits {rate.total_bits} over {rate.duration:.0f} s: "
      f"{rate.aggregate_rate:.1f} b/s aggregate "
      f"= {rate.streams} x {rate.mean_stream_rate:.2f} b/s per stream")
