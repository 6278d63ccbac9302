"""PCM16 mono WAV I/O, sample-exact cutting and 8 kHz to 16 kHz upsampling."""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass

import numpy as np

SUPPORTED_RATES = (8000, 16000)
_PCM = 1
_EXTENSIBLE = 0xFFFE


class WavError(ValueError):
    pass


class UnsupportedCodec(WavError):
    pass


class UnsupportedChannels(WavError):
    pass


class UnsupportedRate(WavError):
    pass


class TruncatedData(WavError):
    pass


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise UnsupportedChannels("only mono buffers are supported")
        object.__setattr__(self, "samples", samples.astype(np.int16, copy=False))
        if self.sample_rate not in SUPPORTED_RATES:
            raise UnsupportedRate(f"sample rate {self.sample_rate} not in {SUPPORTED_RATES}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def time_to_index(t: float, rate: int) -> int:
    return _round_half_away(t * rate)


def _check_fmt(data: bytes, body: int, size: int) -> int:
    if size < 16 or body + 16 > len(data):
        raise WavError("fmt chunk too short")
    codec, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", data, body)
    if codec == _EXTENSIBLE and size >= 40 and body + 26 <= len(data):
        codec = struct.unpack_from("<H", data, body + 24)[0]
    if codec != _PCM or bits != 16:
        raise UnsupportedCodec(f"codec {codec} with {bits} bits; expected PCM16")
    if channels != 1:
        raise UnsupportedChannels(f"{channels} channels; expected mono")
    if rate not in SUPPORTED_RATES:
        raise UnsupportedRate(f"sample rate {rate} not in {SUPPORTED_RATES}")
    return rate


def _chunks(data: bytes):
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavError("not a RIFF/WAVE file")
    pos = 12
    while pos + 8 <= len(data):
        chunk_id, size = struct.unpack_from("<4sI", data, pos)
        yield chunk_id, pos + 8, size
        pos += 8 + size + (size & 1)


def parse_wav_bytes(data: bytes) -> AudioBuffer:
    rate = None
    for chunk_id, body, size in _chunks(data):
        if chunk_id == b"fmt ":
            rate = _check_fmt(data, body, size)
        elif chunk_id == b"data":
            if rate is None:
                raise WavError("data chunk precedes fmt chunk")
            if body + size > len(data) or size % 2:
                raise TruncatedData(f"data chunk declares {size} bytes, {len(data) - body} present")
            samples = np.frombuffer(data, dtype="<i2", count=size // 2, offset=body)
            return AudioBuffer(samples.astype(np.int16), rate)
    if rate is None:
        raise WavError("missing fmt chunk")
    raise TruncatedData("missing data chunk")


def read_wav(path) -> AudioBuffer:
    with open(path, "rb") as fh:
        return parse_wav_bytes(fh.read())


def wav_bytes(buffer: AudioBuffer) -> bytes:
    payload = buffer.samples.astype("<i2").tobytes()
    rate = buffer.sample_rate
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, _PCM, 1, rate, rate * 2, 2, 16,
        b"data", len(payload),
    )
    return header + payload


def write_wav(buffer: AudioBuffer, path) -> None:
    tmp = f"{path}.part"
    with open(tmp, "wb") as fh:
        fh.write(wav_bytes(buffer))
    os.replace(tmp, path)


def cut(buffer: AudioBuffer, start: float, end: float) -> AudioBuffer:
    """Samples ``[round(start*rate), round(end*rate))``, rounding half away from zero."""
    if not 0 <= start < end:
        raise ValueError(f"invalid cut bounds [{start}, {end})")
    lo = time_to_index(start, buffer.sample_rate)
    hi = time_to_index(end, buffer.sample_rate)
    if hi > len(buffer.samples):
        raise ValueError(f"cut end {end}s beyond buffer duration {buffer.duration}s")
    return AudioBuffer(buffer.samples[lo:hi].copy(), buffer.sample_rate)


def upsample_8k_to_16k(buffer: AudioBuffer) -> AudioBuffer:
    """Linear interpolation doubling the rate; the last input sample is repeated."""
    if buffer.sample_rate != 8000:
        raise UnsupportedRate(f"expected 8000 Hz input, got {buffer.sample_rate}")
    x = buffer.samples.astype(np.int32)
    out = np.empty(2 * len(x), dtype=np.int32)
    if len(x):
        out[0::2] = x
        nxt = np.append(x[1:], x[-1])
        s = x + nxt
        out[1::2] = np.sign(s) * ((np.abs(s) + 1) // 2)
    return AudioBuffer(out.astype(np.int16), 16000)


def read_wav_info(path):
    """``(sample_rate, n_samples)`` from the header, without loading the samples."""
    with open(path, "rb") as fh:
        head = fh.read(4096)
        size = os.fstat(fh.fileno()).st_size
    rate = None
    for chunk_id, body, chunk_size in _chunks(head):
        if chunk_id == b"fmt ":
            rate = _check_fmt(head, body, chunk_size)
        elif chunk_id == b"data":
            if rate is None:
                raise WavError("data chunk precedes fmt chunk")
            if body + chunk_size > size or chunk_size % 2:
                raise TruncatedData(f"data chunk declares {chunk_size} bytes, {size - body} present")
            return rate, chunk_size // 2
    buf = read_wav(path)  # header larger than the probe window
    return buf.sample_rate, len(buf)
