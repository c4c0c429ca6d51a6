"""Two-party key-agreement session with full transcript capture.

The pipeline: both parties quantize all m subcarrier streams, exchange drop
lists, and compare truncated digests of every stream in one aggregated tag
message. If at least one stream validates, the lowest-index matched stream
(truncated to the key length) becomes the key outright. Otherwise the
parties exchange difference-degree vectors and run weighted recombination
rounds: per round Alice publishes a fresh seed, both derive the same pick
plan, and the candidate is validated by tag. Every wire message is recorded
in the transcript and mirrored into the eavesdropper's view.

Wire format: TLV frames of 1-byte type, 4-byte big-endian payload length,
payload. Payloads never carry raw key bits; only drop indices, truncated
digests, modular distances, the public reference string, seeds, parities
and verdicts travel on the wire.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import quantizer, recombine, validation
from .channel import CsiTrace, PairedTraceSet
from .errors import (
    ConfigError,
    InsufficientBitsError,
    ProtocolError,
    WireFormatError,
)
from .quantizer import BitStream, DropList

A_TO_B = "A->B"
B_TO_A = "B->A"

_FRAME = struct.Struct(">BI")
_SEED = struct.Struct(">Q")
_COUNT16 = struct.Struct(">H")
_COUNT32 = struct.Struct(">I")

VERDICT_MISMATCH = 0
VERDICT_MATCH = 1
VERDICT_STREAM_MASK = 2


class MsgType(IntEnum):
    PROBE = 1
    DROP_LIST = 2
    TAGS = 3
    DIFF_VECTOR = 4
    RECOMB_SEED = 5
    VERDICT = 6
    PARITY = 7
    BISECT = 8


@dataclass(frozen=True)
class ProtocolMessage:
    """One typed wire unit; direction is link metadata, not wire content."""

    msg_type: MsgType
    payload: bytes
    direction: str | None = None

    def __post_init__(self):
        if self.direction not in (None, A_TO_B, B_TO_A):
            raise ConfigError(f"unknown direction {self.direction!r}")

    @property
    def wire_length(self) -> int:
        return _FRAME.size + len(self.payload)


def encode(msg: ProtocolMessage) -> bytes:
    """TLV frame: 1-byte type, 4-byte big-endian payload length, payload."""
    if len(msg.payload) > 0xFFFFFFFF:
        raise WireFormatError(
            f"payload of {len(msg.payload)} bytes overflows the length field"
        )
    return _FRAME.pack(int(msg.msg_type), len(msg.payload)) + msg.payload


def decode(frame: bytes) -> ProtocolMessage:
    """Inverse of :func:`encode`; the frame must be exactly one message."""
    if len(frame) < _FRAME.size:
        raise WireFormatError(
            f"truncated frame: expected at least {_FRAME.size} bytes, got {len(frame)}"
        )
    type_byte, length = _FRAME.unpack_from(frame)
    try:
        msg_type = MsgType(type_byte)
    except ValueError:
        raise WireFormatError(f"unknown message type {type_byte}") from None
    expected = _FRAME.size + length
    if len(frame) != expected:
        raise WireFormatError(
            f"frame length mismatch: expected {expected} bytes, got {len(frame)}"
        )
    return ProtocolMessage(msg_type=msg_type, payload=frame[_FRAME.size :])


class Link:
    """In-order, lossless in-memory duplex link that records every message."""

    def __init__(self):
        self.transcript: list[ProtocolMessage] = []

    def send(self, direction: str, msg_type: MsgType, payload: bytes) -> ProtocolMessage:
        msg = ProtocolMessage(msg_type=msg_type, payload=payload, direction=direction)
        encode(msg)  # reject anything that cannot be framed
        self.transcript.append(msg)
        return msg

    def count(self, direction: str | None = None, msg_type: MsgType | None = None) -> int:
        return sum(
            1
            for m in self.transcript
            if (direction is None or m.direction == direction)
            and (msg_type is None or m.msg_type == msg_type)
        )


@dataclass(frozen=True)
class MessageCounters:
    """Per-type and per-direction message/byte accounting for one session.

    Probe traffic is simulated by the channel layer, so it is tracked as a
    separate counter and excluded from the reconciliation totals.
    """

    by_type: dict
    by_direction: dict
    bytes_by_direction: dict
    probe_messages: int = 0

    @classmethod
    def from_transcript(cls, transcript, probe_messages: int = 0):
        by_type: dict[str, int] = {}
        by_direction = {A_TO_B: 0, B_TO_A: 0}
        bytes_by_direction = {A_TO_B: 0, B_TO_A: 0}
        for msg in transcript:
            by_type[msg.msg_type.name] = by_type.get(msg.msg_type.name, 0) + 1
            by_direction[msg.direction] += 1
            bytes_by_direction[msg.direction] += msg.wire_length
        return cls(
            by_type=by_type,
            by_direction=by_direction,
            bytes_by_direction=bytes_by_direction,
            probe_messages=probe_messages,
        )

    @property
    def total_messages(self) -> int:
        return self.by_direction[A_TO_B] + self.by_direction[B_TO_A]

    @property
    def total_bytes(self) -> int:
        return self.bytes_by_direction[A_TO_B] + self.bytes_by_direction[B_TO_A]


@dataclass(frozen=True)
class ProtocolParams:
    """Knobs of one key-agreement session."""

    alpha: float = 0.4
    gamma: float = 0.98
    theta: int = 5
    key_length: int = 128
    max_rounds: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        if self.key_length < 1:
            raise ConfigError(f"key_length must be >= 1, got {self.key_length}")
        if self.max_rounds < 0:
            raise ConfigError(f"max_rounds must be >= 0, got {self.max_rounds}")
        if self.theta < 2:
            raise ConfigError(f"theta must be >= 2, got {self.theta}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")


@dataclass(frozen=True)
class KeyAgreementResult:
    """Outcome of one session: key (if any), transcript and accounting.

    ``peer_key`` is Bob's copy of the agreed key. It exists so tests can
    verify by full digest that both parties hold identical bits; it is never
    sent on the wire.
    """

    key: BitStream | None
    peer_key: BitStream | None
    matched_via: str | None
    rounds_used: int
    messages: list
    counters: MessageCounters
    matched_stream_bits: dict

    @property
    def succeeded(self) -> bool:
        return self.key is not None


@dataclass(frozen=True)
class EveView:
    """Everything the adversary holds: wire traffic plus her own channel."""

    transcript: list
    trace: CsiTrace | None
    alpha: float
    gamma: float
    theta: int
    key_length: int


@dataclass(frozen=True)
class EveAttempt:
    """Eve's best-effort per-stream bit guesses and their correlation report."""

    bit_streams: list
    correlations: np.ndarray | None


def encode_drop_lists(drop_lists) -> bytes:
    parts = [_COUNT16.pack(len(drop_lists))]
    for dl in drop_lists:
        idx = dl.indices
        parts.append(_COUNT32.pack(idx.size))
        parts.append(idx.astype(">u4").tobytes())
    return b"".join(parts)


def decode_drop_lists(payload: bytes) -> list[DropList]:
    if len(payload) < _COUNT16.size:
        raise WireFormatError("drop-list payload lacks the stream count")
    (m,) = _COUNT16.unpack_from(payload)
    off = _COUNT16.size
    out = []
    for _ in range(m):
        if len(payload) < off + _COUNT32.size:
            raise WireFormatError("drop-list payload truncated at a count")
        (k,) = _COUNT32.unpack_from(payload, off)
        off += _COUNT32.size
        if len(payload) < off + 4 * k:
            raise WireFormatError("drop-list payload truncated inside an index block")
        idx = np.frombuffer(payload, dtype=">u4", count=k, offset=off).astype(np.int64)
        off += 4 * k
        out.append(DropList(idx))
    if off != len(payload):
        raise WireFormatError(f"{len(payload) - off} trailing bytes in drop-list payload")
    return out


def encode_tags(tags, r: int) -> bytes:
    body = bytearray(struct.pack(">BH", r, len(tags)))
    for tag in tags:
        if tag.r != r:
            raise ProtocolError("aggregated tags must share one checking length")
        body += tag.tag
    return bytes(body)


def decode_tags(payload: bytes) -> list[validation.ValidationTag]:
    if len(payload) < 3:
        raise WireFormatError("tags payload lacks its header")
    r, count = struct.unpack_from(">BH", payload)
    nbytes = (r + 7) // 8
    expected = 3 + count * nbytes
    if len(payload) != expected:
        raise WireFormatError(
            f"tags payload for r={r}, count={count} must be {expected} bytes, "
            f"got {len(payload)}"
        )
    return [
        validation.ValidationTag(
            r=r, tag=payload[3 + i * nbytes : 3 + (i + 1) * nbytes], stream_index=i
        )
        for i in range(count)
    ]


def encode_verdict_mask(mask) -> bytes:
    mask = np.asarray(mask, dtype=np.uint8)
    return (
        bytes([VERDICT_STREAM_MASK])
        + _COUNT16.pack(mask.size)
        + np.packbits(mask).tobytes()
    )


def decode_verdict(payload: bytes):
    """Returns VERDICT_MATCH/VERDICT_MISMATCH or a per-stream boolean mask."""
    if not payload:
        raise WireFormatError("empty verdict payload")
    kind = payload[0]
    if kind in (VERDICT_MATCH, VERDICT_MISMATCH):
        if len(payload) != 1:
            raise WireFormatError("scalar verdict must be a single byte")
        return kind
    if kind == VERDICT_STREAM_MASK:
        if len(payload) < 1 + _COUNT16.size:
            raise WireFormatError("stream-mask verdict lacks its count")
        (m,) = _COUNT16.unpack_from(payload, 1)
        nbytes = (m + 7) // 8
        if len(payload) != 1 + _COUNT16.size + nbytes:
            raise WireFormatError("stream-mask verdict has the wrong mask size")
        bits = np.unpackbits(
            np.frombuffer(payload, dtype=np.uint8, offset=1 + _COUNT16.size)
        )[:m]
        return bits.astype(bool)
    raise WireFormatError(f"unknown verdict kind {kind}")


def _quantize_party(trace: CsiTrace, alpha: float):
    pairs = [
        quantizer.quantize_stream(trace.amplitude_db[i], alpha) for i in range(trace.m)
    ]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _extract_streams(trace, thresholds, drops_a, drops_b, key_length):
    streams = []
    for i in range(trace.m):
        kept = quantizer.merge_kept(drops_a[i], drops_b[i], trace.n)
        bits = quantizer.extract_bits(
            trace.amplitude_db[i], thresholds[i], kept, party=trace.party, stream=i
        )
        if len(bits) > key_length:
            bits = BitStream(bits.bits[:key_length], party=trace.party, stream=i)
        streams.append(bits)
    return streams


def reconcile_bit_streams(
    streams_a,
    streams_b,
    params: ProtocolParams,
    link: Link | None = None,
    probe_messages: int = 0,
) -> KeyAgreementResult:
    """Reconciliation stage shared by full sessions and stream-level harnesses.

    Takes both parties' extracted (and already length-capped) streams and
    runs tag validation plus, when needed, recombination rounds over the
    given link.
    """
    if len(streams_a) != len(streams_b):
        raise ProtocolError("parties disagree on the stream count")
    m = len(streams_a)
    if m == 0:
        raise ConfigError("need at least one stream")
    for i, (sa, sb) in enumerate(zip(streams_a, streams_b)):
        if len(sa) != len(sb):
            raise ProtocolError(
                f"stream {i} lengths differ between parties: {len(sa)} vs {len(sb)}"
            )
    link = link if link is not None else Link()
    rng = np.random.default_rng(np.random.SeedSequence([params.rng_seed, 0x5EC]))
    L = params.key_length
    r = validation.checking_length(params.gamma)

    def result(key, peer, via, rounds, matched_bits):
        return KeyAgreementResult(
            key=key,
            peer_key=peer,
            matched_via=via,
            rounds_used=rounds,
            messages=list(link.transcript),
            counters=MessageCounters.from_transcript(link.transcript, probe_messages),
            matched_stream_bits=matched_bits,
        )

    # aggregated per-stream tags, one message, then one mask verdict back
    tags_a = [validation.make_tag(s, r, stream_index=i) for i, s in enumerate(streams_a)]
    link.send(A_TO_B, MsgType.TAGS, encode_tags(tags_a, r))
    mask = np.array(
        [validation.validate(tags_a[i], streams_b[i], r) for i in range(m)],
        dtype=bool,
    )
    link.send(B_TO_A, MsgType.VERDICT, encode_verdict_mask(mask))

    matched = [i for i in range(m) if mask[i]]
    eligible = [i for i in matched if len(streams_a[i]) == L]
    if eligible:
        pick = eligible[0]
        key = BitStream(streams_a[pick].bits, party=streams_a[pick].party, stream=pick)
        peer = BitStream(streams_b[pick].bits, party=streams_b[pick].party, stream=pick)
        return result(
            key,
            peer,
            f"stream:{pick}",
            0,
            {i: len(streams_a[i]) for i in matched},
        )

    # difference-degree exchange: Alice publishes X and her residues,
    # Bob answers with his residues; both sides derive the same weights
    x = rng.integers(0, 2, size=L, dtype=np.uint8)
    d_a = recombine.edit_distances_to_reference(streams_a, x)
    d_b = recombine.edit_distances_to_reference(streams_b, x)
    link.send(
        A_TO_B,
        MsgType.DIFF_VECTOR,
        recombine.encode_diff_vector(params.theta, d_a % params.theta, x),
    )
    link.send(
        B_TO_A,
        MsgType.DIFF_VECTOR,
        recombine.encode_diff_vector(
            params.theta, d_b % params.theta, np.zeros(0, dtype=np.uint8)
        ),
    )
    degrees = recombine.difference_degree(d_a, d_b, params.theta)
    w = recombine.weights(degrees)
    lengths = np.array([len(s) for s in streams_a], dtype=np.int64)
    allocation = recombine.allocate(w, L, stream_lengths=lengths)

    for round_no in range(1, params.max_rounds + 1):
        seed = int(rng.integers(0, 2**64, dtype=np.uint64))
        link.send(A_TO_B, MsgType.RECOMB_SEED, _SEED.pack(seed))
        rec_plan = recombine.plan(seed, allocation, lengths)
        cand_a = recombine.recombine(streams_a, rec_plan)
        cand_b = recombine.recombine(streams_b, rec_plan)
        tag = validation.make_tag(cand_a, r)
        link.send(A_TO_B, MsgType.TAGS, encode_tags([tag], r))
        ok = validation.validate(tag, cand_b, r)
        link.send(
            B_TO_A,
            MsgType.VERDICT,
            bytes([VERDICT_MATCH if ok else VERDICT_MISMATCH]),
        )
        if ok:
            picked = {
                int(i): int(k)
                for i, k in enumerate(allocation.picks)
                if k > 0
            }
            return result(cand_a, cand_b, "recombination", round_no, picked)

    return result(None, None, None, params.max_rounds, {})


def run_key_agreement(
    traces: PairedTraceSet, params: ProtocolParams
) -> tuple[KeyAgreementResult, EveView]:
    """Full pipeline from CSI traces: quantize, exchange, validate, recombine.

    Probing itself is embodied in the traces (two messages per probe), so
    probe traffic enters the counters but not the transcript.
    """
    link = Link()
    th_a, drops_a = _quantize_party(traces.alice, params.alpha)
    th_b, drops_b = _quantize_party(traces.bob, params.alpha)

    link.send(A_TO_B, MsgType.DROP_LIST, encode_drop_lists(drops_a))
    link.send(B_TO_A, MsgType.DROP_LIST, encode_drop_lists(drops_b))

    streams_a = _extract_streams(traces.alice, th_a, drops_a, drops_b, params.key_length)
    streams_b = _extract_streams(traces.bob, th_b, drops_a, drops_b, params.key_length)
    if sum(len(s) for s in streams_a) < params.key_length:
        raise InsufficientBitsError(
            f"streams hold {sum(len(s) for s in streams_a)} bits, "
            f"need {params.key_length}; increase probe_count"
        )

    outcome = reconcile_bit_streams(
        streams_a,
        streams_b,
        params,
        link=link,
        probe_messages=2 * traces.n,
    )
    eve_view = EveView(
        transcript=list(link.transcript),
        trace=traces.eve,
        alpha=params.alpha,
        gamma=params.gamma,
        theta=params.theta,
        key_length=params.key_length,
    )
    return outcome, eve_view


def eve_attempt(eve_view: EveView, reference_streams=None) -> EveAttempt:
    """Eve quantizes her own trace with the public drop lists and parameters.

    Kept indices that fall strictly inside her band default to a comparison
    against her mean. When the caller supplies the true per-stream key
    material, the report carries the Pearson correlation of Eve's guesses
    against it (an evaluation artifact: Eve herself never sees the truth).
    """
    if eve_view.trace is None:
        raise ProtocolError("eavesdropper view carries no channel trace")
    drops = [m for m in eve_view.transcript if m.msg_type == MsgType.DROP_LIST]
    if len(drops) < 2:
        raise ProtocolError("transcript lacks the two drop-list messages")
    drops_a = decode_drop_lists(drops[0].payload)
    drops_b = decode_drop_lists(drops[1].payload)
    trace = eve_view.trace
    guesses = []
    for i in range(trace.m):
        kept = quantizer.merge_kept(drops_a[i], drops_b[i], trace.n)
        samples = trace.amplitude_db[i]
        th = quantizer.compute_thresholds(samples, eve_view.alpha)
        values = samples[kept]
        bits = np.where(
            values >= th.q_plus,
            1,
            np.where(values <= th.q_minus, 0, (values >= th.mu).astype(int)),
        ).astype(np.uint8)
        if bits.size > eve_view.key_length:
            bits = bits[: eve_view.key_length]
        guesses.append(BitStream(bits, party="eve", stream=i))

    correlations = None
    if reference_streams is not None:
        from .analysis import pearson

        correlations = np.full(len(guesses), np.nan)
        for i, (g, ref) in enumerate(zip(guesses, reference_streams)):
            ref_bits = ref.bits if isinstance(ref, BitStream) else np.asarray(ref)
            k = min(len(g), ref_bits.size)
            if k >= 2:
                ga = g.bits[:k].astype(float)
                rb = ref_bits[:k].astype(float)
                if ga.std() > 0 and rb.std() > 0:
                    correlations[i] = pearson(ga, rb)
    return EveAttempt(bit_streams=guesses, correlations=correlations)


def transcript_to_jsonl(transcript) -> str:
    """One JSON object per line: type, direction, length, hex payload."""
    lines = [
        json.dumps(
            {
                "type": msg.msg_type.name,
                "direction": msg.direction,
                "length": len(msg.payload),
                "payload_hex": msg.payload.hex(),
            }
        )
        for msg in transcript
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def save_transcript(transcript, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(transcript_to_jsonl(transcript))


def scan_transcript_for_key(transcript, key_bits, window: int = 32) -> int:
    """Count key-substring sightings of ``window`` bits in wire payloads.

    Slides a window over every payload's bit sequence and counts hits in the
    set of the key's windows. For random payloads the expected count is
    about (payload windows) * (key windows) / 2**window, i.e. effectively
    zero; anything consistently above that betrays key leakage.
    """
    key = key_bits.bits if isinstance(key_bits, BitStream) else np.asarray(key_bits)
    key = key.astype(np.uint8)
    if key.size < window:
        return 0
    powers = (1 << np.arange(window - 1, -1, -1)).astype(np.uint64)
    key_windows = np.unique(
        np.lib.stride_tricks.sliding_window_view(key, window).astype(np.uint64) @ powers
    )
    hits = 0
    for msg in transcript:
        if not msg.payload:
            continue
        bits = np.unpackbits(np.frombuffer(msg.payload, dtype=np.uint8))
        if bits.size < window:
            continue
        vals = (
            np.lib.stride_tricks.sliding_window_view(bits, window).astype(np.uint64)
            @ powers
        )
        hits += int(np.isin(vals, key_windows).sum())
    return hits
