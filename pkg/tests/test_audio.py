import numpy as np
import pytest
from scipy.io import wavfile

from roomprint.audio import AudioBuffer, convolve_rir, read_wav, resample, write_wav
from roomprint.errors import ConfigMismatchError, CorruptFileError, UnsupportedFormatError


def _tone(freq, duration, fs, amp=1.0):
    t = np.arange(int(duration * fs)) / fs
    return amp * np.sin(2 * np.pi * freq * t)


def test_audio_buffer_validation():
    with pytest.raises(ValueError):
        AudioBuffer(np.array([]), 16000)
    with pytest.raises(ValueError):
        AudioBuffer(np.array([np.nan]), 16000)
    with pytest.raises(ValueError):
        AudioBuffer(np.array([0.0]), 0)


def test_read_pcm16_full_scale(tmp_path):
    path = tmp_path / "full.wav"
    wavfile.write(path, 16000, np.array([32767, -32768], dtype=np.int16))
    audio = read_wav(path)
    assert audio.samples[0] == pytest.approx(32767 / 32768)
    assert audio.samples[1] == pytest.approx(-1.0)


def test_read_stereo_cancellation(tmp_path):
    path = tmp_path / "stereo.wav"
    x = (_tone(440, 0.1, 16000) * 0.5).astype(np.float32)
    wavfile.write(path, 16000, np.stack([x, -x], axis=1))
    audio = read_wav(path)
    assert np.max(np.abs(audio.samples)) == 0.0


def test_read_preserves_rate(tmp_path):
    path = tmp_path / "hi.wav"
    wavfile.write(path, 48000, _tone(1000, 0.05, 48000).astype(np.float32))
    assert read_wav(path).sample_rate_hz == 48000


def test_read_rejects_garbage(tmp_path):
    path = tmp_path / "noise.bin"
    path.write_bytes(b"definitely not a wav file" * 10)
    with pytest.raises((UnsupportedFormatError, CorruptFileError)):
        read_wav(path)


def test_read_rejects_truncated(tmp_path):
    path = tmp_path / "ok.wav"
    wavfile.write(path, 16000, _tone(440, 0.2, 16000).astype(np.float32))
    blob = path.read_bytes()
    bad = tmp_path / "cut.wav"
    bad.write_bytes(blob[: len(blob) // 3])
    with pytest.raises((CorruptFileError, UnsupportedFormatError)):
        read_wav(bad)


def test_write_read_roundtrip(tmp_path):
    path = tmp_path / "rt.wav"
    original = AudioBuffer(_tone(500, 0.1, 16000, amp=0.25), 16000)
    write_wav(path, original)
    back = read_wav(path)
    assert back.sample_rate_hz == 16000
    np.testing.assert_allclose(back.samples, original.samples, atol=1e-6)


def test_resample_identity():
    audio = AudioBuffer(_tone(440, 0.1, 16000), 16000)
    assert resample(audio, 16000) is audio


def _tone_amplitude(samples, fs, freq):
    spectrum = np.fft.rfft(samples * np.hanning(samples.size))
    freqs = np.fft.rfftfreq(samples.size, 1 / fs)
    return np.abs(spectrum[np.argmin(np.abs(freqs - freq))])


def test_resample_preserves_tone_level():
    fs_in, fs_out = 48000, 16000
    audio = AudioBuffer(_tone(1000, 1.0, fs_in, amp=0.5), fs_in)
    out = resample(audio, fs_out)
    assert out.sample_rate_hz == fs_out
    # compare steady-state RMS, trimming filter edges
    trim_in = audio.samples[fs_in // 10 : -fs_in // 10]
    trim_out = out.samples[fs_out // 10 : -fs_out // 10]
    ratio_db = 20 * np.log10(np.std(trim_out) / np.std(trim_in))
    assert abs(ratio_db) < 0.1


def test_resample_edge_tone_and_aliasing():
    fs_in, fs_out = 48000, 16000
    audio = AudioBuffer(_tone(7900, 1.0, fs_in, amp=0.5), fs_in)
    out = resample(audio, fs_out)
    spectrum = np.abs(np.fft.rfft(out.samples * np.hanning(out.samples.size)))
    freqs = np.fft.rfftfreq(out.samples.size, 1 / fs_out)
    peak = spectrum[np.argmin(np.abs(freqs - 7900))]
    ref = _tone_amplitude(audio.samples, fs_in, 7900) / 3.0  # rate change scales bins
    assert 20 * np.log10(peak / ref) > -6.0
    below_7k = spectrum[freqs < 7000]
    assert np.all(20 * np.log10(below_7k / peak + 1e-15) < -60.0)


def test_convolve_identity_kernel():
    fs = 16000
    speech = AudioBuffer(_tone(300, 0.05, fs, 0.5), fs)
    delta = AudioBuffer(np.array([1.0]), fs)
    out = convolve_rir(speech, delta)
    np.testing.assert_allclose(
        out.samples, speech.samples * (0.9 / np.max(np.abs(speech.samples))), atol=1e-12
    )


def test_convolve_shift_kernel():
    fs = 16000
    speech = AudioBuffer(_tone(300, 0.02, fs, 0.5), fs)
    delayed = np.zeros(11)
    delayed[10] = 1.0
    out = convolve_rir(speech, AudioBuffer(delayed, fs))
    assert out.samples.size == speech.samples.size + 10
    np.testing.assert_allclose(out.samples[:10], 0.0, atol=1e-15)
    scale = 0.9 / np.max(np.abs(speech.samples))
    np.testing.assert_allclose(out.samples[10:], speech.samples * scale, atol=1e-12)


def test_convolve_commutes():
    fs = 16000
    rng = np.random.default_rng(1)
    a = AudioBuffer(rng.standard_normal(400), fs)
    b = AudioBuffer(rng.standard_normal(90), fs)
    np.testing.assert_allclose(
        convolve_rir(a, b).samples, convolve_rir(b, a).samples, atol=1e-9
    )


def test_convolve_rate_mismatch():
    a = AudioBuffer(np.ones(10), 16000)
    b = AudioBuffer(np.ones(10), 8000)
    with pytest.raises(ConfigMismatchError):
        convolve_rir(a, b)
