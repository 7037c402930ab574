"""Audio buffers, WAV I/O, polyphase resampling and RIR convolution."""

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile
from scipy.io.wavfile import WavFileWarning

from .errors import ConfigMismatchError, CorruptFileError, UnsupportedFormatError

# Taps per polyphase branch of the resampling filter.
RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_KAISER_BETA = 7.0

_PCM_SCALE = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio: float samples (nominal range [-1, 1]) plus sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def read_wav(path) -> AudioBuffer:
    """Read a PCM or float WAV file; stereo is downmixed by averaging."""
    path = Path(path)
    if not path.exists():
        raise CorruptFileError(f"corrupt file: {path} does not exist")
    try:
        with warnings.catch_warnings():
            # a premature EOF is a truncation, not a best-effort read
            warnings.simplefilter("error", WavFileWarning)
            rate, data = wavfile.read(str(path))
    except WavFileWarning as exc:
        raise CorruptFileError(f"corrupt file: {path}: {exc}") from exc
    except ValueError as exc:
        raise UnsupportedFormatError(f"unsupported format: {path}: {exc}") from exc
    except Exception as exc:  # struct errors etc. from truncated headers
        raise CorruptFileError(f"corrupt file: {path}: {exc}") from exc
    if data.size == 0:
        raise CorruptFileError(f"corrupt file: {path}: no samples")
    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in _PCM_SCALE:
        samples = data.astype(np.float64) / _PCM_SCALE[data.dtype]
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise UnsupportedFormatError(f"unsupported format: {path}: dtype {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioBuffer(samples, int(rate))


def write_wav(path, audio: AudioBuffer) -> None:
    """Write a mono float32 WAV file."""
    wavfile.write(str(path), audio.sample_rate_hz, audio.samples.astype(np.float32))


def resample(audio: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Polyphase sinc resampling with a Kaiser-windowed FIR anti-alias filter."""
    if target_hz < 8000:
        raise ValueError("target rate must be at least 8 kHz")
    if target_hz == audio.sample_rate_hz:
        return audio
    g = np.gcd(audio.sample_rate_hz, target_hz)
    up = target_hz // g
    down = audio.sample_rate_hz // g
    n_taps = RESAMPLE_TAPS_PER_PHASE * max(up, down) + 1
    cutoff = 1.0 / max(up, down)  # in Nyquist units of the upsampled rate
    taps = signal.firwin(n_taps, cutoff, window=("kaiser", RESAMPLE_KAISER_BETA))
    # upfirdn inserts zeros before filtering, so restore unity passband gain.
    out = signal.resample_poly(audio.samples, up, down, window=taps * up)
    return AudioBuffer(out, target_hz)


def convolve_rir(speech: AudioBuffer, rir: AudioBuffer) -> AudioBuffer:
    """Full overlap-add convolution of speech with an RIR, peak-normalized to 0.9."""
    if speech.sample_rate_hz != rir.sample_rate_hz:
        raise ConfigMismatchError(
            "config mismatch: speech at "
            f"{speech.sample_rate_hz} Hz, rir at {rir.sample_rate_hz} Hz"
        )
    out = signal.oaconvolve(speech.samples, rir.samples, mode="full")
    peak = np.max(np.abs(out))
    if peak > 0:
        out = out * (0.9 / peak)
    return AudioBuffer(out, speech.sample_rate_hz)
