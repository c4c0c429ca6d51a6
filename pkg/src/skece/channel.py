"""Fading-channel simulation and CSI trace file ingestion.

The simulator produces paired (Alice, Bob) and eavesdropper (Eve) amplitude
traces for ``m`` OFDM subcarriers. Each subcarrier follows an independent
AR(1) process in the dB domain, stepped once per probe exchange and held
constant within one exchange, plus a shared slow drift. The channel is
reciprocal: Alice and Bob observe the same latent value at their own
timestamps (Bob's skewed by the half-duplex offset) through independent
Gaussian measurement noise. Eve observes her own AR(1) process, mixed with
the link process by the configured correlation coefficient; at the default
coefficient 0 her channel is fully independent, reflecting the rapid spatial
decorrelation of multipath fading.

An optional square-wave attenuation models an attacker periodically blocking
the line of sight; whether it dominates the quantizer depends on its depth
relative to the channel's own variation (small for the single-stream RSS
emulation, large for per-subcarrier CSI).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, TraceFormatError

TRACE_HEADER = ["time", "subcarrier", "amplitude_db", "phase_rad"]

MOBILITY_PROCESS_STD = {"static": 2.0, "mobile": 5.0}
# kept small relative to the per-subcarrier variation so the shared drift
# does not imprint serial structure on the quantized bits
MOBILITY_DRIFT_STD = {"static": 0.1, "mobile": 0.25}


@dataclass(frozen=True)
class ChannelSample:
    """One CSI reading: a (time, subcarrier) cell of a trace."""

    time: float
    subcarrier: int
    amplitude_db: float
    phase_rad: float

    def __post_init__(self):
        if not math.isfinite(self.amplitude_db):
            raise ConfigError("amplitude must be finite")
        if self.subcarrier < 0:
            raise ConfigError("subcarrier index must be non-negative")


@dataclass(frozen=True)
class CsiTrace:
    """Amplitude/phase sequences for one party, one row per subcarrier.

    All subcarriers share the strictly increasing timestamp vector; the
    quantizer consumes amplitudes only and the phase rows are carried so
    trace files mirror real CSI records.
    """

    party: str
    times: np.ndarray
    amplitude_db: np.ndarray
    phase_rad: np.ndarray

    def __post_init__(self):
        if self.party not in ("alice", "bob", "eve"):
            raise ConfigError(f"unknown party {self.party!r}")
        times = np.asarray(self.times, dtype=np.float64)
        amp = np.asarray(self.amplitude_db, dtype=np.float64)
        ph = np.asarray(self.phase_rad, dtype=np.float64)
        if times.ndim != 1:
            raise ConfigError("times must be one-dimensional")
        if amp.ndim != 2 or ph.shape != amp.shape:
            raise ConfigError("amplitude and phase must be equal (m, n) matrices")
        if amp.shape[1] != times.size:
            raise ConfigError(
                f"{amp.shape[1]} samples per subcarrier but {times.size} timestamps"
            )
        if amp.shape[0] < 1:
            raise ConfigError("need at least one subcarrier")
        if times.size >= 2 and np.any(np.diff(times) <= 0):
            raise ConfigError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(amp)):
            raise ConfigError("amplitudes contain non-finite values")
        for arr in (times, amp, ph):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "amplitude_db", amp)
        object.__setattr__(self, "phase_rad", ph)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CsiTrace):
            return NotImplemented
        return (
            self.party == other.party
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.amplitude_db, other.amplitude_db)
            and np.array_equal(self.phase_rad, other.phase_rad)
        )

    def __hash__(self):
        return hash((self.party, self.times.tobytes(), self.amplitude_db.tobytes()))

    @property
    def m(self) -> int:
        return int(self.amplitude_db.shape[0])

    @property
    def n(self) -> int:
        return int(self.amplitude_db.shape[1])

    @property
    def duration(self) -> float:
        """Probing span in seconds (zero for a single probe)."""
        return float(self.times[-1] - self.times[0]) if self.n else 0.0

    def sample(self, subcarrier: int, k: int) -> ChannelSample:
        return ChannelSample(
            time=float(self.times[k]),
            subcarrier=subcarrier,
            amplitude_db=float(self.amplitude_db[subcarrier, k]),
            phase_rad=float(self.phase_rad[subcarrier, k]),
        )

    def subcarrier_amplitudes(self, subcarrier: int) -> np.ndarray:
        return self.amplitude_db[subcarrier]


@dataclass(frozen=True)
class ScenarioConfig:
    """Simulator parameters; presets A-F are bundled instances of this.

    ``mobility`` selects the default AR(1) innovation scale per probe step;
    ``process_std``, ``process_corr`` and the drift fields override it for
    tuning. ``eve_correlation`` mixes Eve's otherwise independent process
    with the link process. ``attack_period`` enables the periodic
    line-of-sight blocking wave. ``rss_mode`` marks a single-stream,
    low-variation, higher-noise emulation of an RSS measurement chain used
    for relative comparisons.
    """

    preset: str = "custom"
    m: int = 30
    probe_count: int = 300
    probe_interval: float = 0.1
    half_duplex_offset: float = 0.003
    mobility: str = "mobile"
    noise_std: float = 0.3
    eve_correlation: float = 0.0
    attack_period: float | None = None
    rng_seed: int = 0
    process_std: float | None = None
    process_corr: float = 0.0
    drift_std: float | None = None
    drift_corr: float = 0.99
    attack_depth: float = 4.0
    base_amplitude_db: float = 20.0
    rss_mode: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.probe_count < 1:
            raise ConfigError(f"probe_count must be >= 1, got {self.probe_count}")
        if self.probe_interval <= 0:
            raise ConfigError("probe_interval must be positive")
        if self.half_duplex_offset < 0:
            raise ConfigError("half_duplex_offset must be >= 0")
        if self.mobility not in MOBILITY_PROCESS_STD:
            raise ConfigError(f"mobility must be static or mobile, got {self.mobility!r}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if abs(self.eve_correlation) > 1:
            raise ConfigError("eve_correlation must lie in [-1, 1]")
        if self.attack_period is not None and self.attack_period <= 0:
            raise ConfigError("attack_period must be positive when set")
        if not 0 <= self.rng_seed < 2**64:
            raise ConfigError("rng_seed must be an unsigned 64-bit integer")
        if self.process_std is not None and self.process_std < 0:
            raise ConfigError("process_std must be >= 0")
        if not 0 <= self.process_corr < 1:
            raise ConfigError("process_corr must lie in [0, 1)")
        if self.drift_std is not None and self.drift_std < 0:
            raise ConfigError("drift_std must be >= 0")
        if not 0 <= self.drift_corr < 1:
            raise ConfigError("drift_corr must lie in [0, 1)")

    @property
    def effective_process_std(self) -> float:
        if self.process_std is not None:
            return self.process_std
        return MOBILITY_PROCESS_STD[self.mobility]

    @property
    def effective_drift_std(self) -> float:
        if self.drift_std is not None:
            return self.drift_std
        return MOBILITY_DRIFT_STD[self.mobility]


@dataclass(frozen=True)
class PairedTraceSet:
    """Alice, Bob and Eve traces from one simulated probing session."""

    alice: CsiTrace
    bob: CsiTrace
    eve: CsiTrace
    config: ScenarioConfig

    def __post_init__(self):
        shapes = {t.amplitude_db.shape for t in (self.alice, self.bob, self.eve)}
        if len(shapes) != 1:
            raise ConfigError(f"traces disagree on (m, n): {sorted(shapes)}")
        expected = self.alice.times + self.config.half_duplex_offset
        if not np.array_equal(self.bob.times, expected):
            raise ConfigError(
                "Bob's timestamps must equal Alice's plus the half-duplex offset"
            )

    @property
    def m(self) -> int:
        return self.alice.m

    @property
    def n(self) -> int:
        return self.alice.n


def _ar1(rng: np.random.Generator, shape, std: float, corr: float) -> np.ndarray:
    """Stationary AR(1) noise over the last axis; corr=0 is the iid fast path."""
    z = rng.standard_normal(shape)
    if std == 0.0:
        return np.zeros(shape)
    if corr == 0.0:
        return std * z
    out = np.empty(shape)
    out[..., 0] = std * z[..., 0]
    innov = std * math.sqrt(1.0 - corr * corr)
    for k in range(1, shape[-1]):
        out[..., k] = corr * out[..., k - 1] + innov * z[..., k]
    return out


def _phase_walk(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform start per subcarrier, then a smoothed random walk, wrapped."""
    start = rng.uniform(-math.pi, math.pi, size=(shape[0], 1))
    steps = rng.normal(0.0, 0.1, size=shape)
    steps[:, 0] = 0.0
    walk = start + np.cumsum(steps, axis=1)
    return np.mod(walk + math.pi, 2.0 * math.pi) - math.pi


def _attack_wave(times: np.ndarray, period: float, depth: float) -> np.ndarray:
    """Square-wave attenuation: blocked during the first half of each period."""
    blocked = np.mod(times, period) < period / 2.0
    return np.where(blocked, -depth, 0.0)


def simulate(config: ScenarioConfig) -> PairedTraceSet:
    """Generate one paired probing session, deterministic in the seed.

    The latent per-subcarrier process is stepped once per probe exchange, so
    both directions of one exchange observe the same channel state; the
    half-duplex offset shifts Bob's timestamps and, when it reaches a whole
    probe interval, the step he samples.
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed))
    m, n = config.m, config.probe_count
    shift = int(config.half_duplex_offset // config.probe_interval)
    steps = n + shift

    drift_link = _ar1(rng, (steps,), config.effective_drift_std, config.drift_corr)
    drift_eve_own = _ar1(rng, (steps,), config.effective_drift_std, config.drift_corr)
    proc_link = _ar1(rng, (m, steps), config.effective_process_std, config.process_corr)
    proc_eve_own = _ar1(rng, (m, steps), config.effective_process_std, config.process_corr)
    noise_alice = rng.normal(0.0, config.noise_std, size=(m, n)) if config.noise_std else np.zeros((m, n))
    noise_bob = rng.normal(0.0, config.noise_std, size=(m, n)) if config.noise_std else np.zeros((m, n))
    noise_eve = rng.normal(0.0, config.noise_std, size=(m, n)) if config.noise_std else np.zeros((m, n))
    phase_link = _phase_walk(rng, (m, steps))
    phase_eve = _phase_walk(rng, (m, steps))

    rho = config.eve_correlation
    mix = math.sqrt(max(0.0, 1.0 - rho * rho))
    proc_eve = rho * proc_link + mix * proc_eve_own
    drift_eve = rho * drift_link + mix * drift_eve_own

    times_alice = np.arange(n, dtype=np.float64) * config.probe_interval
    times_bob = times_alice + config.half_duplex_offset

    latent_alice = config.base_amplitude_db + drift_link[:n] + proc_link[:, :n]
    latent_bob = (
        config.base_amplitude_db
        + drift_link[shift : shift + n]
        + proc_link[:, shift : shift + n]
    )
    latent_eve = config.base_amplitude_db + drift_eve[:n] + proc_eve[:, :n]

    if config.attack_period is not None:
        latent_alice = latent_alice + _attack_wave(
            times_alice, config.attack_period, config.attack_depth
        )
        latent_bob = latent_bob + _attack_wave(
            times_bob, config.attack_period, config.attack_depth
        )

    alice = CsiTrace("alice", times_alice, latent_alice + noise_alice, phase_link[:, :n])
    bob = CsiTrace(
        "bob", times_bob, latent_bob + noise_bob, phase_link[:, shift : shift + n]
    )
    eve = CsiTrace("eve", times_alice, latent_eve + noise_eve, phase_eve[:, :n])
    return PairedTraceSet(alice=alice, bob=bob, eve=eve, config=config)


def rss_emulation(config: ScenarioConfig) -> ScenarioConfig:
    """Single-stream, low-variation, noisier variant of a scenario.

    An RSS chain reports one coarse power value per probe: aggregating the
    subcarriers washes out the fine-grained frequency-selective variation,
    and the reading is noisier relative to what remains.
    """
    return replace(
        config,
        m=1,
        rss_mode=True,
        process_std=0.5,
        drift_std=0.1,
        noise_std=max(config.noise_std, 0.4),
    )


def save_trace(trace: CsiTrace, path) -> None:
    """Write one party's trace in the CSV trace format.

    Header ``time,subcarrier,amplitude_db,phase_rad``; one row per
    (time, subcarrier) cell, sorted by time then subcarrier; floats use
    repr so a round-trip reproduces the trace exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for k in range(trace.n):
            t = repr(float(trace.times[k]))
            for i in range(trace.m):
                writer.writerow(
                    [
                        t,
                        i,
                        repr(float(trace.amplitude_db[i, k])),
                        repr(float(trace.phase_rad[i, k])),
                    ]
                )


def load_trace(path, format: str = "csv", party: str = "alice") -> CsiTrace:
    """Parse a CSV trace file, enforcing the trace invariants.

    Rows must be grouped by probe time with every subcarrier 0..m-1 present
    exactly once per group, and times strictly increasing between groups.
    Errors name the offending 1-based line number.
    """
    if format != "csv":
        raise ConfigError(f"unsupported trace format {format!r}")
    times: list[float] = []
    amp_rows: list[list[float]] = []
    ph_rows: list[list[float]] = []
    m = None

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError("empty trace file", line=1) from None
        if [h.strip() for h in header] != TRACE_HEADER:
            raise TraceFormatError(
                f"expected header {','.join(TRACE_HEADER)}, got {','.join(header)}",
                line=1,
            )

        group_time = None
        group_amp: dict[int, float] = {}
        group_ph: dict[int, float] = {}
        group_line = 2

        def close_group(line_no):
            nonlocal m
            if not group_amp:
                return
            if m is None:
                m = len(group_amp)
            if sorted(group_amp) != list(range(m)):
                raise TraceFormatError(
                    f"probe at t={group_time} has subcarriers {sorted(group_amp)}, "
                    f"expected 0..{m - 1}",
                    line=line_no,
                )
            times.append(group_time)
            amp_rows.append([group_amp[i] for i in range(m)])
            ph_rows.append([group_ph[i] for i in range(m)])

        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise TraceFormatError(
                    f"expected 4 columns, got {len(row)}", line=line_no
                )
            try:
                t = float(row[0])
                sub = int(row[1])
                amp = float(row[2])
                ph = float(row[3])
            except ValueError as exc:
                raise TraceFormatError(f"malformed row: {exc}", line=line_no) from None
            if not math.isfinite(t):
                raise TraceFormatError("time is not finite", line=line_no)
            if not math.isfinite(amp):
                raise TraceFormatError("amplitude is not finite", line=line_no)
            if sub < 0:
                raise TraceFormatError("negative subcarrier index", line=line_no)
            if group_time is None or t != group_time:
                close_group(line_no)
                if times and t <= times[-1]:
                    raise TraceFormatError(
                        f"time {t} does not increase past {times[-1]}", line=line_no
                    )
                group_time = t
                group_amp, group_ph = {}, {}
                group_line = line_no
            if sub in group_amp:
                raise TraceFormatError(
                    f"duplicate subcarrier {sub} at t={t}", line=line_no
                )
            group_amp[sub] = amp
            group_ph[sub] = ph
        close_group(group_line)

    if not times:
        raise TraceFormatError("trace file contains no data rows", line=2)
    return CsiTrace(
        party=party,
        times=np.array(times),
        amplitude_db=np.array(amp_rows).T,
        phase_rad=np.array(ph_rows).T,
    )
