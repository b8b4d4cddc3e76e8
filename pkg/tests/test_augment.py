"""Classical augmentation transforms and the scheme registry."""

import numpy as np
import pytest

from escaug.audio_io import Waveform
from escaug.augment import (
    AugmentError, time_stretch, pitch_shift, DrcProfile, DRC_PROFILES,
    drc_static_gain, compress_dynamic_range, mix_background, synth_scene,
    scheme_factors, apply_scheme, build_augmented_set,
    STRETCH_RATES, PITCH_SEMITONES_INT, PITCH_SEMITONES_FRAC, SCHEME_NAMES,
)
from tests.conftest import tone, fft_peak_hz


def test_time_stretch_exact_lengths():
    w = Waveform(np.zeros(44100), 44100)
    assert len(time_stretch(w, 1.05).samples) == 42000
    assert len(time_stretch(w, 0.85).samples) == 51882
    assert len(time_stretch(w, 1.0).samples) == 44100


def test_time_stretch_preserves_pitch():
    rate = 22050
    w = Waveform(tone(1000.0, 2.0, rate), rate)
    for r in (0.85, 1.15):
        out = time_stretch(w, r)
        assert out.rate == rate
        assert abs(fft_peak_hz(out.samples, rate) - 1000.0) < 10.0  # within 1%


def test_pitch_shift_length_and_frequency():
    rate = 22050
    w = Waveform(tone(440.0, 2.0, rate), rate)
    up = pitch_shift(w, 12.0)
    assert len(up.samples) == len(w.samples)      # duration preserved
    assert abs(fft_peak_hz(up.samples, rate) - 880.0) < 8.8
    down = pitch_shift(w, -12.0)
    assert abs(fft_peak_hz(down.samples, rate) - 220.0) < 4.0


def test_drc_static_gain_curve():
    p = DRC_PROFILES["speech"]                     # T=-20, ratio 4, knee 6
    lev = np.array([-40.0, -20.0, -17.0, -8.0, 0.0])
    g = drc_static_gain(lev, p)
    assert g[0] == 0.0 and g[1] == 0.0             # at/below threshold
    assert abs(g[2] - (-0.5625)) < 1e-12           # knee: -0.75*3^2/12
    assert abs(g[3] - (-6.75)) < 1e-12             # slope: -0.75*(12-3)
    assert abs(g[4] - (-12.75)) < 1e-12
    # C1 join at knee end: quadratic and line agree
    eps = 1e-9
    a, b = drc_static_gain(np.array([-14.0 - eps, -14.0 + eps]), p)
    assert abs(a - b) < 1e-6


def test_drc_compresses_loud_keeps_quiet():
    rate = 22050
    loud = Waveform(tone(500.0, 1.0, rate, amp=0.9), rate)
    quiet = Waveform(tone(500.0, 1.0, rate, amp=0.01), rate)
    p = DRC_PROFILES["speech"]
    out_loud = compress_dynamic_range(loud, p)
    out_quiet = compress_dynamic_range(quiet, p)
    # loud material is driven down (beyond makeup), quiet only gets makeup
    gain_loud = np.abs(out_loud.samples[rate // 2:]).max() / 0.9
    gain_quiet = np.abs(out_quiet.samples[rate // 2:]).max() / 0.01
    assert gain_loud < gain_quiet
    assert abs(20 * np.log10(gain_quiet) - p.makeup_db) < 0.5


def test_drc_silence_passthrough():
    out = compress_dynamic_range(Waveform(np.zeros(1000), 8000), DRC_PROFILES["music"])
    assert np.array_equal(out.samples, np.zeros(1000))


def test_mix_background_weights(rng):
    x = Waveform(rng.uniform(-0.5, 0.5, 800), 8000)
    scene = Waveform(rng.uniform(-0.5, 0.5, 1600), 8000)
    out = mix_background(x, scene, 0.25)
    assert len(out.samples) == 800
    assert np.allclose(out.samples, x.samples + 0.25 * scene.samples[:800])
    zero = mix_background(x, scene, 0.0)
    assert np.array_equal(zero.samples, x.samples)      # w=0 is bit-exact
    # clipping sums are pulled back to peak 1
    hot = mix_background(Waveform(np.full(100, 0.9), 8000),
                         Waveform(np.full(100, 0.9), 8000), 0.5)
    assert abs(np.abs(hot.samples).max() - 1.0) < 1e-12


def test_mix_background_short_scene_tiles(rng):
    x = Waveform(np.zeros(1000), 8000)
    scene = Waveform(np.arange(300, dtype=np.float64), 8000)
    out = mix_background(x, scene, 1.0)
    assert np.array_equal(out.samples[:300], out.samples[300:600])


def test_synth_scene_names_and_determinism():
    for name in ("background_noise", "football_crowd", "elaborate_thunder",
                 "creepy_background"):
        a = synth_scene(name, 0.5, 8000, np.random.default_rng(5))
        b = synth_scene(name, 0.5, 8000, np.random.default_rng(5))
        assert a.rate == 8000 and len(a.samples) == 4000
        assert np.array_equal(a.samples, b.samples)
        assert abs(np.abs(a.samples).max() - 0.3) < 1e-9
    with pytest.raises(AugmentError):
        synth_scene("unknown_scene", 1.0, 8000, np.random.default_rng(0))


def test_scheme_registry_four_factors_each(rng):
    scenes = {n: synth_scene(n, 0.25, 8000, rng)
              for n in ("background_noise", "football_crowd",
                        "elaborate_thunder", "creepy_background")}
    assert SCHEME_NAMES == ("time_stretch", "pitch_shift_int",
                            "pitch_shift_frac", "dynamic_range",
                            "background_mix")
    for scheme in SCHEME_NAMES:
        assert len(scheme_factors(scheme, scenes=scenes)) == 4
    assert scheme_factors("time_stretch") == list(STRETCH_RATES)
    assert scheme_factors("pitch_shift_int") == list(PITCH_SEMITONES_INT)
    assert scheme_factors("pitch_shift_frac") == list(PITCH_SEMITONES_FRAC)
    with pytest.raises(AugmentError):
        scheme_factors("nope")
    with pytest.raises(AugmentError):
        scheme_factors("background_mix")        # scenes required


def test_build_augmented_set_expansion(rng):
    clips = [("a", Waveform(tone(300.0, 0.3, 8000), 8000)),
             ("b", Waveform(tone(700.0, 0.3, 8000), 8000))]
    out = build_augmented_set(clips, "time_stretch", rng)
    assert len(out) == 8
    recs = [r for r, _ in out]
    assert [r.source_id for r in recs] == ["a"] * 4 + ["b"] * 4
    assert {r.factor for r in recs} == {"0.85", "0.95", "1.05", "1.15"}
    assert all(r.weight is None for r in recs)


def test_background_mix_weight_range(rng):
    scenes = {"background_noise": synth_scene("background_noise", 0.5, 8000, rng)}
    clips = [("a", Waveform(tone(300.0, 0.3, 8000), 8000))]
    out = build_augmented_set(clips, "background_mix", rng, scenes=scenes,
                              factors=["background_noise"] * 8)
    ws = [r.weight for r, _ in out]
    assert all(0.1 <= w <= 0.5 for w in ws)
    assert len(set(ws)) > 1                    # drawn fresh per variant
