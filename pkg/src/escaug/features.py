"""Log-mel spectrogram features and fixed-size patch selection.

The pipeline is: Hann-windowed power STFT over non-overlapping frames,
projection through an area-normalized triangular mel filterbank, natural
log with an absolute floor, then a square patch cut (or wrap-tiled) from
the frame axis.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 44100
    frame_len: int = 1024
    hop: int = 1024
    n_mels: int = 128
    fmin: float = 0.0
    fmax: float = 22050.0
    floor: float = 1e-6
    patch_frames: int = 128


def hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft_power(x: np.ndarray, frame_len: int = 1024, hop: int = 1024) -> np.ndarray:
    """Power spectrogram (frames, frame_len//2 + 1) of a 1-D signal."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < frame_len:
        raise FeatureError(f"signal of {x.size} samples is shorter than one {frame_len}-sample frame")
    n_frames = (x.size - frame_len) // hop + 1
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * hann_periodic(frame_len)[None, :]
    spec = np.fft.rfft(frames, axis=1)
    return (spec.real ** 2 + spec.imag ** 2)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_bins: int, sample_rate: int,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular filterbank (n_mels, n_bins) over rfft bins.

    Triangles are linear on the mel scale between corner frequencies
    equally spaced in mel, and each is scaled by 2/(f_hi - f_lo) so flat
    input power yields flat band energies.  Each weight is the average of
    the triangle over the bin's frequency cell, so every filter keeps
    support even when triangles are narrower than the bin spacing.
    """
    nyquist = sample_rate / 2.0
    if fmax is None:
        fmax = nyquist
    if n_mels < 1:
        raise FeatureError("n_mels must be at least 1")
    if not (0.0 <= fmin < fmax <= nyquist):
        raise FeatureError(f"bad band edges fmin={fmin} fmax={fmax} nyquist={nyquist}")
    if n_mels > n_bins:
        raise FeatureError(f"{n_mels} mel filters cannot be supported by {n_bins} FFT bins")

    corners_mel = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    corners_hz = mel_to_hz(corners_mel)

    # 8 midpoint sub-samples per bin cell, cells clipped to [0, nyquist]
    sub = 8
    delta = nyquist / (n_bins - 1)
    lo = np.clip((np.arange(n_bins) - 0.5) * delta, 0.0, nyquist)
    hi = np.clip((np.arange(n_bins) + 0.5) * delta, 0.0, nyquist)
    pos = lo[:, None] + (hi - lo)[:, None] * ((np.arange(sub) + 0.5) / sub)[None, :]
    pos_mel = hz_to_mel(pos.reshape(-1))                         # (n_bins*sub,)

    m0 = corners_mel[:-2, None]
    m1 = corners_mel[1:-1, None]
    m2 = corners_mel[2:, None]
    rise = (pos_mel[None, :] - m0) / np.maximum(m1 - m0, 1e-12)
    fall = (m2 - pos_mel[None, :]) / np.maximum(m2 - m1, 1e-12)
    tri = np.maximum(0.0, np.minimum(rise, fall))                # (n_mels, n_bins*sub)
    weights = tri.reshape(n_mels, n_bins, sub).mean(axis=2)

    scale = 2.0 / (corners_hz[2:] - corners_hz[:-2])
    fb = weights * scale[:, None]
    if np.any(fb.sum(axis=1) == 0.0):
        empty = int(np.flatnonzero(fb.sum(axis=1) == 0.0)[0])
        raise FeatureError(f"mel filter {empty} is empty: n_mels too large for {n_bins} bins")
    return fb


def log_mel(power_spec: np.ndarray, fb: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Natural-log mel energies (frames, n_mels), floored at ``floor``."""
    if power_spec.shape[1] != fb.shape[1]:
        raise FeatureError(f"spectrogram has {power_spec.shape[1]} bins, filterbank expects {fb.shape[1]}")
    e = power_spec @ fb.T
    return np.log(np.maximum(e, floor))


def select_patch(lm: np.ndarray, frames: int, rng: np.random.Generator) -> np.ndarray:
    """Cut a (frames, n_mels, 1) float32 patch from a log-mel matrix.

    With enough frames the start offset is uniform random; shorter input
    is wrap-tiled (row i of the patch is input row i mod T).
    """
    t = lm.shape[0]
    if t >= frames:
        start = int(rng.integers(0, t - frames + 1))
        patch = lm[start:start + frames]
    else:
        patch = lm[np.arange(frames) % t]
    return patch[:, :, None].astype(np.float32)


def waveform_patch(samples: np.ndarray, cfg: FeatureConfig, fb: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """Full pipeline: waveform to one (patch_frames, n_mels, 1) patch."""
    lm = log_mel(stft_power(samples, cfg.frame_len, cfg.hop), fb, cfg.floor)
    return select_patch(lm, cfg.patch_frames, rng)


# -- patch container --------------------------------------------------

LMEL_MAGIC = b"LMEL"
LMEL_VERSION = 1


def save_patches(path, patches: np.ndarray):
    """Write (n, rows, cols) or (n, rows, cols, 1) patches as LE float32."""
    arr = np.asarray(patches)
    if arr.ndim == 4 and arr.shape[3] == 1:
        arr = arr[:, :, :, 0]
    if arr.ndim != 3:
        raise FeatureError(f"patches must be rank 3, got shape {arr.shape}")
    n, rows, cols = arr.shape
    hdr = LMEL_MAGIC + struct.pack("<IIII", LMEL_VERSION, n, rows, cols)
    Path(path).write_bytes(hdr + np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_patches(path) -> np.ndarray:
    """Read an LMEL container back as (n, rows, cols, 1) float32."""
    blob = Path(path).read_bytes()
    if len(blob) < 20:
        raise FeatureError(f"{path}: too short for an LMEL header")
    if blob[:4] != LMEL_MAGIC:
        raise FeatureError(f"{path}: bad magic at offset 0")
    version, n, rows, cols = struct.unpack("<IIII", blob[4:20])
    if version != LMEL_VERSION:
        raise FeatureError(f"{path}: unsupported LMEL version {version}")
    want = 20 + 4 * n * rows * cols
    if len(blob) != want:
        raise FeatureError(f"{path}: payload size {len(blob) - 20}, expected {want - 20}")
    arr = np.frombuffer(blob[20:], dtype="<f4").reshape(n, rows, cols).copy()
    return arr[:, :, :, None]
