"""Classical waveform augmentations.

Four families: phase-vocoder time stretching, pitch shifting (stretch
plus windowed-sinc rate change, length preserved), feed-forward dynamic
range compression, and weighted background mixing.  Each shipped scheme
emits exactly four variants per source clip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import Waveform, sinc_interp


class AugmentError(ValueError):
    pass


# -- time stretch ------------------------------------------------------

PV_FRAME = 2048
PV_HOP = 256


def _stft(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    n_frames = (x.size - frame) // hop + 1
    idx = np.arange(frame)[None, :] + hop * np.arange(n_frames)[:, None]
    win = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(frame) / frame)
    return np.fft.rfft(x[idx] * win[None, :], axis=1)


def time_stretch(w: Waveform, rate: float) -> Waveform:
    """Change duration by 1/rate without moving pitch (rate > 1 shortens).

    Standard phase vocoder: magnitudes are linearly interpolated between
    analysis frames sampled at fractional stride ``rate`` on a 256-sample
    frame grid, phases advance by the accumulated per-bin deviation from
    the nominal hop rotation, and frames are overlap-added back on the
    same grid with squared-window normalization.
    """
    if rate <= 0:
        raise AugmentError(f"stretch rate must be positive, got {rate}")
    x = np.asarray(w.samples, dtype=np.float64)
    out_len = max(1, int(np.floor(x.size / rate + 0.5)))
    if rate == 1.0:
        return Waveform(x.copy(), w.rate)

    frame, hop = PV_FRAME, PV_HOP
    pad = frame // 2
    xp = np.pad(x, (pad, pad + frame))
    spec = _stft(xp, frame, hop)
    n_a = spec.shape[0]

    steps = np.arange(0.0, n_a - 1, rate)
    mag_all = np.abs(spec)
    phase_all = np.angle(spec)
    omega = 2.0 * np.pi * np.arange(frame // 2 + 1) * hop / frame

    i = np.floor(steps).astype(np.int64)
    frac = (steps - i)[:, None]
    mags = (1.0 - frac) * mag_all[i] + frac * mag_all[i + 1]
    dphi = phase_all[i + 1] - phase_all[i] - omega[None, :]
    dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
    advance = omega[None, :] + dphi
    phases = np.concatenate([phase_all[:1], phase_all[0] + np.cumsum(advance[:-1], axis=0)])

    frames_t = np.fft.irfft(mags * np.exp(1j * phases), n=frame, axis=1)
    win = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(frame) / frame)
    n_s = frames_t.shape[0]
    ola_len = (n_s - 1) * hop + frame
    y = np.zeros(ola_len)
    norm = np.zeros(ola_len)
    w2 = win * win
    for k in range(n_s):
        y[k * hop:k * hop + frame] += frames_t[k] * win
        norm[k * hop:k * hop + frame] += w2
    y = y / np.maximum(norm, 1e-12)

    y = y[pad:pad + out_len]
    if y.size < out_len:
        y = np.pad(y, (0, out_len - y.size))
    return Waveform(y, w.rate)


# -- pitch shift -------------------------------------------------------

def pitch_shift(w: Waveform, semitones: float) -> Waveform:
    """Move pitch by a (possibly fractional) semitone count, keeping the
    exact input length: stretch to len*factor, then read back at rate
    ``factor`` with the windowed-sinc interpolator."""
    factor = 2.0 ** (semitones / 12.0)
    if factor == 1.0:
        return Waveform(np.asarray(w.samples, dtype=np.float64).copy(), w.rate)
    stretched = time_stretch(w, 1.0 / factor)
    out = sinc_interp(stretched.samples, step=factor, out_len=w.samples.size,
                      bandwidth=min(1.0, 1.0 / factor))
    return Waveform(out, w.rate)


# -- dynamic range compression ------------------------------------------

@dataclass(frozen=True)
class DrcProfile:
    """Feed-forward compressor settings (dB values are dBFS / dB gain)."""
    name: str
    threshold_db: float
    ratio: float
    knee_db: float
    attack_ms: float
    release_ms: float
    makeup_db: float


DRC_PROFILES = {
    "speech": DrcProfile("speech", -20.0, 4.0, 6.0, 5.0, 100.0, 6.0),
    "podcast": DrcProfile("podcast", -24.0, 3.0, 6.0, 10.0, 150.0, 8.0),
    "music": DrcProfile("music", -16.0, 2.5, 9.0, 15.0, 250.0, 4.0),
    "voice_radio": DrcProfile("voice_radio", -18.0, 6.0, 3.0, 3.0, 80.0, 9.0),
}


def drc_static_gain(level_db: np.ndarray, p: DrcProfile) -> np.ndarray:
    """Gain curve in dB: unity below threshold, a quadratic knee spanning
    [T, T + knee], then constant-ratio slope (curve is C1 throughout)."""
    over = level_db - p.threshold_db
    inv = 1.0 / p.ratio
    knee = p.knee_db
    gain = np.zeros_like(level_db)
    if knee > 0:
        in_knee = (over > 0) & (over < knee)
        gain = np.where(in_knee, (inv - 1.0) * over * over / (2.0 * knee), gain)
        gain = np.where(over >= knee, (inv - 1.0) * (over - knee / 2.0), gain)
    else:
        gain = np.where(over > 0, (inv - 1.0) * over, gain)
    return gain


def compress_dynamic_range(w: Waveform, profile: DrcProfile) -> Waveform:
    """RMS-detected compressor with attack/release gain smoothing."""
    x = np.asarray(w.samples, dtype=np.float64)
    win = max(1, int(round(0.010 * w.rate)))
    sq = np.concatenate([np.zeros(win), np.cumsum(x * x)])
    ms = (sq[win:] - sq[:-win]) / win          # causal 10 ms mean square
    level_db = 10.0 * np.log10(np.maximum(ms, 1e-20))

    target = drc_static_gain(level_db, profile)
    a_att = np.exp(-1.0 / max(1e-9, profile.attack_ms * w.rate / 1000.0))
    a_rel = np.exp(-1.0 / max(1e-9, profile.release_ms * w.rate / 1000.0))
    smoothed = np.empty_like(target)
    g = 0.0
    for n in range(target.size):
        a = a_att if target[n] < g else a_rel
        g = a * g + (1.0 - a) * target[n]
        smoothed[n] = g

    out = x * 10.0 ** ((smoothed + profile.makeup_db) / 20.0)
    return Waveform(out, w.rate)


# -- background mixing ---------------------------------------------------

def mix_background(x: Waveform, scene: Waveform, weight: float) -> Waveform:
    """z = x + weight*scene with the scene looped/trimmed to len(x).
    The sum is peak-normalized only when it actually clips."""
    if not 0.0 <= weight <= 1.0:
        raise AugmentError(f"mix weight {weight} out of [0, 1]")
    if x.rate != scene.rate:
        raise AugmentError(f"rate mismatch: clip {x.rate}, scene {scene.rate}")
    xs = np.asarray(x.samples, dtype=np.float64)
    ys = np.asarray(scene.samples, dtype=np.float64)
    if ys.size < xs.size:
        reps = -(-xs.size // ys.size)
        ys = np.tile(ys, reps)
    z = xs + weight * ys[:xs.size]
    peak = np.abs(z).max()
    if peak > 1.0:
        z = z / peak
    return Waveform(z, x.rate)


# -- scheme registry ------------------------------------------------------

STRETCH_RATES = (0.85, 0.95, 1.05, 1.15)
PITCH_SEMITONES_INT = (-2.0, -1.0, 1.0, 2.0)
PITCH_SEMITONES_FRAC = (-1.5, -0.5, 0.5, 1.5)
BACKGROUND_W_RANGE = (0.1, 0.5)
DEFAULT_SCENES = ("background_noise", "football_crowd", "elaborate_thunder", "creepy_background")

SCHEME_NAMES = ("time_stretch", "pitch_shift_int", "pitch_shift_frac",
                "dynamic_range", "background_mix")


def synth_scene(name: str, seconds: float, rate: int, rng: np.random.Generator) -> Waveform:
    """Deterministic stand-in ambience texture for mixing experiments.

    Each named scene gets a distinct spectral/temporal shape; callers who
    have real scene recordings should load those instead.
    """
    n = int(round(seconds * rate))
    if n < 1:
        raise AugmentError("scene length must be at least one sample")
    t = np.arange(n) / rate
    white = rng.normal(0.0, 1.0, n)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, 1.0 / rate)
    if name == "background_noise":
        shape = 1.0 / np.maximum(f, 20.0)                     # pink-ish hiss
    elif name == "football_crowd":
        shape = np.exp(-0.5 * ((f - 1200.0) / 900.0) ** 2)    # mid-band roar
    elif name == "elaborate_thunder":
        shape = 1.0 / np.maximum(f, 8.0) ** 1.5               # deep rumble
    elif name == "creepy_background":
        shape = np.exp(-0.5 * ((f - 120.0) / 80.0) ** 2)      # low drone
    else:
        raise AugmentError(f"unknown scene {name!r}; known: {', '.join(DEFAULT_SCENES)}")
    x = np.fft.irfft(spec * shape, n)
    if name == "football_crowd":
        x *= 0.6 + 0.4 * np.sin(2 * np.pi * 0.35 * t + rng.uniform(0, 2 * np.pi))
    elif name == "elaborate_thunder":
        env = np.zeros(n)
        for _ in range(max(1, int(seconds / 2))):
            start = rng.integers(0, max(1, n - rate // 2))
            dur = int(rate * rng.uniform(0.4, 1.5))
            seg = min(dur, n - start)
            env[start:start + seg] += np.exp(-3.0 * np.arange(seg) / max(1, seg))
        x *= 0.2 + env
    peak = np.abs(x).max()
    if peak > 0:
        x = 0.3 * x / peak
    return Waveform(x, rate)


@dataclass
class AugmentRecord:
    source_id: str
    scheme: str
    factor: str
    weight: float | None = None


def scheme_factors(scheme: str, scenes: dict[str, Waveform] | None = None,
                   profiles: dict[str, DrcProfile] | None = None) -> list:
    if scheme == "time_stretch":
        return list(STRETCH_RATES)
    if scheme == "pitch_shift_int":
        return list(PITCH_SEMITONES_INT)
    if scheme == "pitch_shift_frac":
        return list(PITCH_SEMITONES_FRAC)
    if scheme == "dynamic_range":
        return list(profiles or DRC_PROFILES)
    if scheme == "background_mix":
        if not scenes:
            raise AugmentError("background_mix needs scene waveforms")
        return sorted(scenes)
    raise AugmentError(f"unknown scheme {scheme!r}; known: {', '.join(SCHEME_NAMES)}")


def apply_scheme(w: Waveform, scheme: str, factor, rng: np.random.Generator,
                 scenes: dict[str, Waveform] | None = None,
                 w_range: tuple[float, float] = BACKGROUND_W_RANGE,
                 profiles: dict[str, DrcProfile] | None = None,
                 ) -> tuple[Waveform, float | None]:
    """One augmented variant; returns (waveform, mix weight or None)."""
    if scheme == "time_stretch":
        return time_stretch(w, float(factor)), None
    if scheme in ("pitch_shift_int", "pitch_shift_frac"):
        return pitch_shift(w, float(factor)), None
    if scheme == "dynamic_range":
        return compress_dynamic_range(w, (profiles or DRC_PROFILES)[str(factor)]), None
    if scheme == "background_mix":
        weight = float(rng.uniform(*w_range))
        return mix_background(w, scenes[str(factor)], weight), weight
    raise AugmentError(f"unknown scheme {scheme!r}")


def build_augmented_set(clips: list[tuple[str, Waveform]], scheme: str,
                        rng: np.random.Generator,
                        scenes: dict[str, Waveform] | None = None,
                        w_range: tuple[float, float] = BACKGROUND_W_RANGE,
                        profiles: dict[str, DrcProfile] | None = None,
                        factors: list | None = None,
                        ) -> list[tuple[AugmentRecord, Waveform]]:
    """Expand every (id, waveform) into the scheme's four variants."""
    out = []
    if factors is None:
        factors = scheme_factors(scheme, scenes, profiles)
    for source_id, w in clips:
        for factor in factors:
            aug, weight = apply_scheme(w, scheme, factor, rng, scenes, w_range, profiles)
            out.append((AugmentRecord(source_id, scheme, str(factor), weight), aug))
    return out
