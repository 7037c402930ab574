import numpy as np
import pytest
from scipy import signal

from roomprint.audio import AudioBuffer
from roomprint.dsp import (
    RASTA_WARMUP,
    FrameConfig,
    FrameSet,
    SpectraMatrix,
    analysis_features,
    frame_and_window,
    log_power_spectra,
    mean_normalize_rows,
    mfcc_rasta,
)
from roomprint.errors import InsufficientFramesError, SignalTooShortError
from roomprint.synth import synth_speech

FS = 16000


def _frameset(rows):
    return FrameSet(frames=np.atleast_2d(rows), hop_samples=1024, window="hann", sample_rate_hz=FS)


def test_frame_geometry_production_config():
    audio = AudioBuffer(np.random.default_rng(0).standard_normal(FS), FS)
    frames = frame_and_window(audio, 128.0, 0.5)
    assert frames.frames.shape[1] == 2048
    assert frames.hop_samples == 1024


def test_frame_count_formula():
    audio = AudioBuffer(np.ones(3072), FS)
    frames = frame_and_window(audio, 128.0, 0.5)
    assert frames.frames.shape[0] == 2


def test_zero_signal_gives_zero_frames():
    audio = AudioBuffer(np.zeros(4096), FS)
    frames = frame_and_window(audio, 128.0, 0.5)
    assert np.all(frames.frames == 0.0)


def test_too_short_signal():
    with pytest.raises(SignalTooShortError):
        frame_and_window(AudioBuffer(np.ones(100), FS), 128.0, 0.5)


def test_overlap_add_reconstruction():
    signal_in = np.random.default_rng(7).standard_normal(FS)
    frames = frame_and_window(AudioBuffer(signal_in, FS), 128.0, 0.5)
    n_frame, hop = frames.frames.shape[1], frames.hop_samples
    out = np.zeros(signal_in.size)
    for l in range(frames.frames.shape[0]):
        out[l * hop : l * hop + n_frame] += frames.frames[l]
    interior = slice(n_frame, (frames.frames.shape[0] - 1) * hop)
    np.testing.assert_allclose(out[interior], signal_in[interior], rtol=1e-6, atol=1e-9)


def test_impulse_frame_flat_spectrum():
    frame = np.zeros(2048)
    frame[0] = 1.0
    spectra = log_power_spectra(_frameset(frame), 2048)
    assert np.ptp(spectra.values[0]) < 1e-9


def test_sinusoid_peaks_at_its_bin():
    k0 = 100
    t = np.arange(2048)
    frame = np.sin(2 * np.pi * k0 * t / 2048)
    spectra = log_power_spectra(_frameset(frame), 2048)
    assert np.argmax(spectra.values[0]) == k0


def test_zero_frame_floor_is_finite():
    spectra = log_power_spectra(_frameset(np.zeros(2048)), 2048)
    row = spectra.values[0]
    assert np.all(np.isfinite(row))
    assert np.ptp(row) == 0.0


def test_parseval():
    audio = AudioBuffer(np.random.default_rng(3).standard_normal(8000), FS)
    frames = frame_and_window(audio, 128.0, 0.5)
    full = np.fft.fft(frames.frames, n=2048, axis=1)
    lhs = np.sum(np.abs(full) ** 2, axis=1)
    rhs = 2048 * np.sum(frames.frames**2, axis=1)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-6)


def test_mean_normalize_examples():
    spectra = SpectraMatrix(np.array([[3.0, 3.0, 3.0], [0.0, 2.0, 1.0]]), bin_hz=1.0)
    normed = mean_normalize_rows(spectra)
    np.testing.assert_allclose(normed.values[0], 0.0)
    np.testing.assert_allclose(normed.values[1], [-1.0, 1.0, 0.0])
    assert normed.mean_normalized
    twice = mean_normalize_rows(normed)
    np.testing.assert_allclose(twice.values, normed.values, atol=1e-15)


def test_mean_normalize_row_sums():
    rng = np.random.default_rng(11)
    spectra = SpectraMatrix(rng.standard_normal((20, 1025)) * 30, bin_hz=1.0)
    normed = mean_normalize_rows(spectra)
    assert np.all(np.abs(normed.values.sum(axis=1)) < 1e-9 * 1025)


def test_mfcc_column_count():
    audio = synth_speech(2.0, seed=5)
    frames = frame_and_window(audio, 128.0, 0.5)
    cepstra = mfcc_rasta(frames, 12)
    assert cepstra.values.shape[1] == 12
    assert cepstra.values.shape[0] == frames.frames.shape[0] - RASTA_WARMUP
    assert np.all(np.isfinite(cepstra.values))


def test_mfcc_needs_warmup_frames():
    audio = AudioBuffer(np.random.default_rng(0).standard_normal(2048 + 3 * 1024), FS)
    frames = frame_and_window(audio, 128.0, 0.5)
    assert frames.frames.shape[0] == RASTA_WARMUP
    with pytest.raises(InsufficientFramesError):
        mfcc_rasta(frames, 12)


def test_rasta_kills_stationary_tracks():
    # hop-synchronous steady tone: every frame is identical, so cepstral
    # tracks are constant in time and the band-pass output decays to ~0
    # (single 0.98 pole: ~3 s e-folding over 64 ms hops)
    t = np.arange(30 * FS) / FS
    audio = AudioBuffer(0.5 * np.sin(2 * np.pi * 437.5 * t), FS)
    frames = frame_and_window(audio, 128.0, 0.5)
    cepstra = mfcc_rasta(frames, 12)
    tail = np.abs(cepstra.values[-20:]).mean()
    head = np.abs(cepstra.values[:3]).mean()
    assert tail < 0.02 * head


def _am_tone_mix(duration_s):
    # tones at multiples of 15.625 Hz are bin-centered and hop-synchronous;
    # one tone per mel region keeps the channel offset constant per track
    t = np.arange(int(duration_s * FS)) / FS
    mix = np.zeros(t.size)
    for freq, rate, phase in (
        (250.0, 1.3, 0.0),
        (625.0, 2.1, 1.0),
        (1562.5, 3.4, 2.0),
        (3125.0, 4.2, 3.0),
        (6250.0, 5.1, 4.0),
    ):
        mix += (1.0 + 0.7 * np.sin(2 * np.pi * rate * t + phase)) * np.sin(
            2 * np.pi * freq * t
        )
    return AudioBuffer(0.15 * mix, FS)


def test_rasta_channel_invariance():
    # a fixed LTI coloration shifts each cepstral track by a constant, which
    # the band-pass removes once its 0.98-pole transient has decayed
    clean = _am_tone_mix(25.0)
    colored = AudioBuffer(signal.lfilter([0.3], [1.0, -0.7], clean.samples), FS)
    cep_clean = mfcc_rasta(frame_and_window(clean, 128.0, 0.5), 12).values
    cep_colored = mfcc_rasta(frame_and_window(colored, 128.0, 0.5), 12).values
    settle = 120
    diff = cep_colored[settle:] - cep_clean[settle:]
    rms_ratio = np.sqrt(np.mean(diff**2)) / np.sqrt(np.mean(cep_clean[settle:] ** 2))
    assert rms_ratio < 0.05


def test_analysis_features_aligned(frame_config):
    audio = synth_speech(3.0, seed=9)
    cepstra, spectra = analysis_features(audio, frame_config)
    assert cepstra.values.shape[0] == spectra.values.shape[0]
    assert spectra.mean_normalized
    assert spectra.values.shape[1] == frame_config.n_fft // 2 + 1
