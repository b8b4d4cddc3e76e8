"""Mono waveform I/O and sample-rate conversion.

WAV support covers RIFF/WAVE with PCM (format code 1, 8/16/24-bit) and
IEEE float (format code 3, 32-bit) payloads.  Decoding never emits
non-finite samples; malformed byte streams raise ``WavError`` naming the
failing offset.  Multi-channel input is down-mixed by a plain channel
mean.  Output is always 16-bit PCM mono.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class WavError(ValueError):
    pass


@dataclass
class Waveform:
    samples: np.ndarray
    rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 1:
            raise ValueError("waveform must be 1-D")
        if self.samples.size < 1:
            raise ValueError("waveform must hold at least one sample")
        if self.rate <= 0:
            raise ValueError("sample rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate


def read_wav(path) -> Waveform:
    """Decode a WAV file to a mono waveform scaled to [-1, 1]."""
    blob = Path(path).read_bytes()
    if len(blob) < 12:
        raise WavError(f"{path}: file too short for a RIFF header ({len(blob)} bytes)")
    if blob[0:4] != b"RIFF":
        raise WavError(f"{path}: missing RIFF tag at offset 0")
    if blob[8:12] != b"WAVE":
        raise WavError(f"{path}: missing WAVE tag at offset 8")

    fmt = None
    data = None
    off = 12
    while off + 8 <= len(blob):
        cid = blob[off:off + 4]
        (size,) = struct.unpack("<I", blob[off + 4:off + 8])
        body = blob[off + 8:off + 8 + size]
        if len(body) < size:
            raise WavError(f"{path}: truncated {cid!r} chunk at offset {off}")
        if cid == b"fmt ":
            if size < 16:
                raise WavError(f"{path}: fmt chunk too short at offset {off}")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            data = (body, off + 8)
        off += 8 + size + (size & 1)   # chunks are word-aligned

    if fmt is None:
        raise WavError(f"{path}: no fmt chunk")
    if data is None:
        raise WavError(f"{path}: no data chunk")
    code, n_ch, rate, _, _, bits = fmt
    body, data_off = data
    if n_ch < 1:
        raise WavError(f"{path}: zero channels in fmt chunk")
    if rate <= 0:
        raise WavError(f"{path}: non-positive sample rate in fmt chunk")

    if code == 1:
        if bits == 8:
            x = (blob_to(body, np.uint8).astype(np.float64) - 128.0) / 128.0
        elif bits == 16:
            x = blob_to(body, "<i2").astype(np.float64) / 32768.0
        elif bits == 24:
            raw = blob_to(body, np.uint8)
            raw = raw[:(raw.size // 3) * 3].reshape(-1, 3).astype(np.int64)
            v = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
            v = np.where(v >= 1 << 23, v - (1 << 24), v)
            x = v.astype(np.float64) / 8388608.0
        else:
            raise WavError(f"{path}: unsupported PCM bit depth {bits}")
    elif code == 3:
        if bits != 32:
            raise WavError(f"{path}: unsupported float bit depth {bits}")
        x = blob_to(body, "<f4").astype(np.float64)
        if not np.all(np.isfinite(x)):
            raise WavError(f"{path}: non-finite sample in data chunk at offset {data_off}")
    else:
        raise WavError(f"{path}: unsupported format code {code}")

    frames = x.size // n_ch
    if frames < 1:
        raise WavError(f"{path}: data chunk holds no complete frame")
    x = x[:frames * n_ch]
    if n_ch > 1:
        x = x.reshape(frames, n_ch).mean(axis=1)
    return Waveform(x, rate)


def blob_to(body: bytes, dtype) -> np.ndarray:
    return np.frombuffer(body, dtype=dtype)


def quantize16(x: np.ndarray) -> np.ndarray:
    """Clamp to [-1, 1] and round half away from zero to int16 codes."""
    x = np.clip(x, -1.0, 1.0) * 32768.0
    q = np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5))
    return np.clip(q, -32768, 32767).astype(np.int16)


def write_wav(path, wf: Waveform, bit_depth: int = 16):
    """Encode a waveform as mono 16-bit PCM."""
    if bit_depth != 16:
        raise ValueError(f"unsupported output bit depth {bit_depth}")
    q = quantize16(np.asarray(wf.samples, dtype=np.float64))
    payload = q.astype("<i2").tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, wf.rate, wf.rate * 2, 2, 16)
    hdr += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(hdr + payload)


# -- sample-rate conversion ------------------------------------------

_ZC = 64           # sinc zero crossings per side at full bandwidth
_KAISER_BETA = 8.0
_TABLE_N = 8192

_kaiser_table = None


def _window(t: np.ndarray) -> np.ndarray:
    """Kaiser window on normalized |t| in [0, 1], zero outside."""
    global _kaiser_table
    if _kaiser_table is None:
        g = np.linspace(0.0, 1.0, _TABLE_N + 1)
        _kaiser_table = np.i0(_KAISER_BETA * np.sqrt(1.0 - g * g)) / np.i0(_KAISER_BETA)
    return np.interp(t, np.linspace(0.0, 1.0, _TABLE_N + 1), _kaiser_table,
                     left=_kaiser_table[0], right=0.0)


def sinc_interp(x: np.ndarray, step: float, out_len: int, bandwidth: float) -> np.ndarray:
    """Evaluate a Kaiser-windowed sinc reconstruction at positions m*step.

    ``bandwidth`` in (0, 1] scales the sinc cutoff (1 = input Nyquist);
    the kernel keeps 64 zero crossings per side regardless of cutoff.
    """
    x = np.asarray(x, dtype=np.float64)
    half = int(np.ceil(_ZC / bandwidth))
    xp = np.pad(x, (half + 1, half + 2))
    out = np.empty(out_len, dtype=np.float64)
    offsets = np.arange(-half, half + 2)
    chunk = max(1, 4_000_000 // offsets.size)
    for lo in range(0, out_len, chunk):
        hi = min(lo + chunk, out_len)
        t = np.arange(lo, hi, dtype=np.float64) * step
        base = np.floor(t).astype(np.int64)
        u = t[:, None] - (base[:, None] + offsets[None, :])
        k = bandwidth * np.sinc(bandwidth * u) * _window(np.abs(u) * bandwidth / _ZC)
        rows = xp[(base[:, None] + offsets[None, :]) + half + 1]
        out[lo:hi] = (rows * k).sum(axis=1)
    return out


def resample(wf: Waveform, target_rate: int) -> Waveform:
    """Polyphase-quality windowed-sinc resampling to target_rate.

    Output length is round(len * target / source); equal rates return the
    samples verbatim.
    """
    if target_rate <= 0:
        raise ValueError("target rate must be positive")
    if target_rate == wf.rate:
        return Waveform(np.array(wf.samples, copy=True), wf.rate)
    src = np.asarray(wf.samples, dtype=np.float64)
    out_len = int(np.floor(src.size * target_rate / wf.rate + 0.5))
    step = wf.rate / target_rate
    bw = min(1.0, target_rate / wf.rate)
    return Waveform(sinc_interp(src, step, max(out_len, 1), bw), target_rate)


def peak_normalize(x: np.ndarray, peak: float = 1.0) -> np.ndarray:
    """Scale so max |sample| equals peak (silence passes through)."""
    m = np.abs(x).max()
    if m == 0:
        return np.array(x, copy=True)
    return x * (peak / m)
