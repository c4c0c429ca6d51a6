"""Desk-scale experiment drivers shared by the CLI, demos and test suite.

Each driver is deterministic in its base seed: trial t derives its own seed,
so re-running a command reproduces its output files bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis, cascade, channel, protocol, quantizer
from .errors import ConfigError, InsufficientBitsError
from .quantizer import BitStream

PRESET_NAMES = ("A", "B", "C", "D", "E", "F")


@dataclass(frozen=True)
class Scenario:
    """A named simulator configuration plus its quantizer default."""

    name: str
    description: str
    alpha: float
    config: channel.ScenarioConfig

    def with_seed(self, rng_seed: int) -> "Scenario":
        from dataclasses import replace

        return Scenario(
            name=self.name,
            description=self.description,
            alpha=self.alpha,
            config=replace(self.config, rng_seed=rng_seed),
        )


def _scenario_from_dict(data: dict, fallback_name: str) -> Scenario:
    try:
        cfg = channel.ScenarioConfig(**data["config"])
        return Scenario(
            name=data.get("name", fallback_name),
            description=data.get("description", ""),
            alpha=float(data.get("alpha", 0.4)),
            config=cfg,
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed scenario definition: {exc}") from exc


def load_scenario(name_or_path: str) -> Scenario:
    """Resolve a bundled preset letter or a JSON config file path."""
    key = str(name_or_path)
    if key.upper() in PRESET_NAMES or key.lower() in ("attack",):
        ref = resources.files("skece.presets") / f"{key.upper() if len(key) == 1 else key.lower()}.json"
        data = json.loads(ref.read_text(encoding="utf-8"))
        return _scenario_from_dict(data, key)
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(
            f"scenario {name_or_path!r} is neither a bundled preset "
            f"({', '.join(PRESET_NAMES)}, attack) nor an existing file"
        )
    data = json.loads(path.read_text(encoding="utf-8"))
    return _scenario_from_dict(data, path.stem)


def keep_rate_estimate(alpha: float) -> float:
    """Fraction of samples outside a +/- alpha*sigma band under normality."""
    from scipy.special import erfc

    return float(erfc(alpha / math.sqrt(2.0)))


def probes_for_bits(alpha: float, m: int, target_bits: int, margin: float = 1.35) -> int:
    """Probe count that yields at least ``target_bits`` kept bits overall."""
    rate = max(keep_rate_estimate(alpha), 1e-6)
    return max(2, math.ceil(target_bits * margin / (m * rate)))


def extract_party_streams(traces: channel.PairedTraceSet, alpha: float):
    """Both parties' per-stream bits after the drop-list exchange."""
    out = {}
    th = {}
    drops = {}
    for name, trace in (("alice", traces.alice), ("bob", traces.bob)):
        pairs = [
            quantizer.quantize_stream(trace.amplitude_db[i], alpha)
            for i in range(trace.m)
        ]
        th[name] = [p[0] for p in pairs]
        drops[name] = [p[1] for p in pairs]
    for name, trace in (("alice", traces.alice), ("bob", traces.bob)):
        streams = []
        for i in range(trace.m):
            kept = quantizer.merge_kept(drops["alice"][i], drops["bob"][i], trace.n)
            streams.append(
                quantizer.extract_bits(
                    trace.amplitude_db[i], th[name][i], kept, party=name, stream=i
                )
            )
        out[name] = streams
    return out["alice"], out["bob"]


def stream_counts(traces: channel.PairedTraceSet, alpha: float) -> dict:
    """Mean ignored/mismatched/matched bit counts per subcarrier stream."""
    streams_a, streams_b = extract_party_streams(traces, alpha)
    n = traces.n
    ignored = [n - len(sa) for sa in streams_a]
    mismatched = [
        int(np.count_nonzero(sa.bits != sb.bits))
        for sa, sb in zip(streams_a, streams_b)
    ]
    matched = [n - i - d for i, d in zip(ignored, mismatched)]
    return {
        "ignored": float(np.mean(ignored)),
        "mismatched": float(np.mean(mismatched)),
        "matched": float(np.mean(matched)),
    }


def alpha_sweep(
    scenario: Scenario, alphas, trials: int, base_seed: int = 0
) -> list[dict]:
    """Mean per-stream bit category counts for each alpha over seeded trials."""
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    rows = []
    for alpha in alphas:
        totals = {"ignored": 0.0, "mismatched": 0.0, "matched": 0.0}
        for t in range(trials):
            traces = channel.simulate(
                scenario.with_seed(base_seed + t).config
            )
            counts = stream_counts(traces, alpha)
            for k in totals:
                totals[k] += counts[k]
        rows.append(
            {
                "alpha": float(alpha),
                **{k: v / trials for k, v in totals.items()},
                "trials": trials,
            }
        )
    return rows


def _random_bit_matrix(rng: np.random.Generator, m: int, length: int) -> np.ndarray:
    return rng.integers(0, 2, size=(m, length), dtype=np.uint8)


def overhead_comparison(
    trials: int,
    base_seed: int = 0,
    m: int = 30,
    stream_length: int = 300,
    error_range: tuple[int, int] = (1, 3),
    max_rounds: int = 50,
    cascade_block: int = 16,
    cascade_rounds: int = 4,
    gamma: float = 0.98,
    theta: int = 5,
) -> list[dict]:
    """Message counts for both reconciliation styles on matched inputs.

    Per trial both schemes face the same error count e drawn uniformly from
    ``error_range``: the multi-stream scheme gets e mismatches at uniform
    positions over its m*length bit grid, the single-stream baseline gets e
    mismatches over its own length bits.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    rows = []
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([base_seed, t]))
        e = int(rng.integers(error_range[0], error_range[1] + 1))

        grid = _random_bit_matrix(rng, m, stream_length)
        flipped = grid.copy()
        flat = rng.choice(m * stream_length, size=e, replace=False)
        flipped[np.unravel_index(flat, grid.shape)] ^= 1
        streams_a = [BitStream(grid[i], party="alice", stream=i) for i in range(m)]
        streams_b = [BitStream(flipped[i], party="bob", stream=i) for i in range(m)]
        params = protocol.ProtocolParams(
            gamma=gamma,
            theta=theta,
            key_length=stream_length,
            max_rounds=max_rounds,
            rng_seed=int(rng.integers(0, 2**63)),
        )
        outcome = protocol.reconcile_bit_streams(streams_a, streams_b, params)

        base = rng.integers(0, 2, size=stream_length, dtype=np.uint8)
        noisy = base.copy()
        noisy[rng.choice(stream_length, size=e, replace=False)] ^= 1
        cas = cascade.cascade_reconcile(
            BitStream(base, party="alice"),
            BitStream(noisy, party="bob"),
            cascade.CascadeConfig(
                initial_block_size=cascade_block,
                rounds=cascade_rounds,
                rng_seed=int(rng.integers(0, 2**63)),
            ),
        )
        rows.append(
            {
                "trial": t,
                "errors": e,
                "skece_messages": outcome.counters.total_messages,
                "skece_succeeded": outcome.succeeded,
                "cascade_messages": cas.messages_sent,
                "cascade_equal": bool(np.array_equal(cas.corrected.bits, base)),
            }
        )
    return rows


def empirical_cdf(values) -> list[tuple[float, float]]:
    values = np.sort(np.asarray(values, dtype=np.float64))
    n = values.size
    return [(float(v), float((i + 1) / n)) for i, v in enumerate(values)]


def key_material(scenario: Scenario, seed: int, min_bits: int = 10_000) -> BitStream:
    """Concatenated bits of every stream that validated between the parties.

    Sizes the probe count from the quantizer keep rate, simulates one
    session, and joins the matched streams' bits (both parties hold the
    identical material).
    """
    from dataclasses import replace

    n = probes_for_bits(scenario.alpha, scenario.config.m, min_bits)
    cfg = replace(scenario.config, probe_count=n, rng_seed=seed)
    traces = channel.simulate(cfg)
    streams_a, streams_b = extract_party_streams(traces, scenario.alpha)
    chunks = [
        sa.bits
        for sa, sb in zip(streams_a, streams_b)
        if len(sa) and np.array_equal(sa.bits, sb.bits)
    ]
    if not chunks:
        raise InsufficientBitsError("no stream validated; cannot build key material")
    bits = np.concatenate(chunks)
    if bits.size < min_bits:
        raise InsufficientBitsError(
            f"matched streams supply {bits.size} bits, below the requested {min_bits}"
        )
    return BitStream(bits, party="alice", stream=None)


def randomness_battery(
    scenario_names,
    runs: int,
    base_seed: int = 0,
    min_bits: int = 10_000,
) -> list[dict]:
    """The four-test battery on freshly generated keys, per scenario and run."""
    if runs < 1:
        raise ConfigError(f"runs must be >= 1, got {runs}")
    rows = []
    for name in scenario_names:
        scenario = load_scenario(name) if isinstance(name, str) else name
        for run in range(runs):
            bits = key_material(scenario, seed=base_seed + run, min_bits=min_bits)
            reports = analysis.run_all_tests(bits)
            rows.append(
                {
                    "scenario": scenario.name,
                    "run": run,
                    "bits": len(bits),
                    **{rep.name: rep.p_value for rep in reports},
                    "all_pass": all(rep.passed for rep in reports),
                }
            )
    return rows


def _bit_wave_sequence(stream: BitStream, kept: np.ndarray, n: int) -> np.ndarray:
    """Bits mapped back onto probe indices: +1/-1 where kept, 0 where dropped."""
    seq = np.zeros(n, dtype=np.float64)
    seq[kept] = 2.0 * stream.bits.astype(np.float64) - 1.0
    return seq


def attack_experiment(seed: int = 0, probes: int = 2048) -> dict:
    """Periodic line-of-sight blocking, CSI mode versus RSS emulation.

    Returns per-mode periodicity z-scores of the extracted bits at the
    attack period, plus a frequency-test report of the CSI-mode key.
    """
    scenario = load_scenario("attack")
    from dataclasses import replace

    results = {}
    for mode in ("csi", "rss"):
        cfg = replace(scenario.config, probe_count=probes, rng_seed=seed)
        if mode == "rss":
            cfg = channel.rss_emulation(cfg)
        traces = channel.simulate(cfg)
        streams_a, _ = extract_party_streams(traces, scenario.alpha)
        lag = max(1, round(cfg.attack_period / cfg.probe_interval))
        scores = []
        waves = []
        # rebuild the kept map per stream for the sample-indexed wave
        pairs_a = [
            quantizer.quantize_stream(traces.alice.amplitude_db[i], scenario.alpha)
            for i in range(traces.m)
        ]
        pairs_b = [
            quantizer.quantize_stream(traces.bob.amplitude_db[i], scenario.alpha)
            for i in range(traces.m)
        ]
        for i, stream in enumerate(streams_a):
            kept = quantizer.merge_kept(pairs_a[i][1], pairs_b[i][1], traces.n)
            wave = _bit_wave_sequence(stream, kept, traces.n)
            waves.append(wave)
            scores.append(analysis.periodicity_score(wave, lag))
        key_bits = np.concatenate([s.bits for s in streams_a])
        results[mode] = {
            "scenario": scenario.name,
            "mode": mode,
            "lag": lag,
            "periodicity_z": [float(z) for z in scores],
            "max_periodicity_z": float(np.max(scores)),
            "frequency_p": analysis.nist_frequency(key_bits).p_value
            if key_bits.size >= 100
            else None,
            "key_bits": int(key_bits.size),
            "traces": traces,
            "bit_waves": waves,
        }
    return results


def eve_independence(
    scenario: Scenario, seed: int, bits_per_stream: int = 10_000
) -> np.ndarray:
    """Per-stream Pearson correlation between Eve's guesses and Alice's bits."""
    from dataclasses import replace

    rate = keep_rate_estimate(scenario.alpha)
    n = math.ceil(bits_per_stream * 1.3 / rate)
    cfg = replace(scenario.config, probe_count=n, rng_seed=seed)
    traces = channel.simulate(cfg)
    params = protocol.ProtocolParams(
        alpha=scenario.alpha, key_length=bits_per_stream, max_rounds=0, rng_seed=seed
    )
    result, eve_view = protocol.run_key_agreement(traces, params)
    streams_a, _ = extract_party_streams(traces, scenario.alpha)
    reference = [
        BitStream(s.bits[:bits_per_stream], party="alice", stream=s.stream)
        for s in streams_a
    ]
    attempt = protocol.eve_attempt(eve_view, reference_streams=reference)
    del result
    return attempt.correlations
