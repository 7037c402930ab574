"""Framing, log-power spectra and RASTA-filtered MFCCs.

Shared front-end for speech-model training and blind channel estimation.
All spectra are natural-log power; dB conversion happens only at reporting
boundaries.
"""

from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.fft import dct

from .audio import AudioBuffer
from .errors import InsufficientFramesError, SignalTooShortError

# Relative spectral floor, applied per frame against its peak power.
SPECTRAL_FLOOR_REL = 1e-12
# Absolute fallback floor for frames with zero energy.
SPECTRAL_FLOOR_ABS = 1e-12

N_MEL_BANDS = 26

# Classic RASTA band-pass: 5-tap FIR ramp over a single 0.98 pole, applied
# along time per cepstral track. The first RASTA_WARMUP output frames are
# transient and get dropped.
RASTA_NUMER = 0.1 * np.array([2.0, 1.0, 0.0, -1.0, -2.0])
RASTA_DENOM = np.array([1.0, -0.98])
RASTA_WARMUP = 4


@dataclass(frozen=True)
class FrameConfig:
    """Analysis configuration shared by the feature extraction stages."""

    sample_rate_hz: int = 16000
    frame_ms: float = 128.0
    overlap: float = 0.5
    n_mfcc: int = 12

    @property
    def frame_samples(self) -> int:
        return int(round(self.frame_ms * self.sample_rate_hz / 1000.0))

    @property
    def hop_samples(self) -> int:
        return max(1, int(round(self.frame_samples * (1.0 - self.overlap))))

    @property
    def n_fft(self) -> int:
        # No zero-padding when the frame length is already a power of two.
        n = 1
        while n < self.frame_samples:
            n *= 2
        return n

    def to_dict(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "frame_ms": self.frame_ms,
            "overlap": self.overlap,
            "n_mfcc": self.n_mfcc,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrameConfig":
        return cls(
            sample_rate_hz=int(d["sample_rate_hz"]),
            frame_ms=float(d["frame_ms"]),
            overlap=float(d["overlap"]),
            n_mfcc=int(d["n_mfcc"]),
        )


@dataclass(frozen=True)
class FrameSet:
    """Windowed analysis frames: L x N_frame matrix plus hop and window name."""

    frames: np.ndarray
    hop_samples: int
    window: str
    sample_rate_hz: int


@dataclass(frozen=True)
class SpectraMatrix:
    """L x N_bins natural-log power values on a uniform frequency grid."""

    values: np.ndarray
    bin_hz: float
    mean_normalized: bool = False

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CepstraMatrix:
    """L x n_mfcc RASTA-filtered MFCCs."""

    values: np.ndarray

    @property
    def n_mfcc(self) -> int:
        return self.values.shape[1]


def frame_and_window(audio: AudioBuffer, frame_ms: float, overlap_fraction: float) -> FrameSet:
    """Slice audio into Hann-windowed frames with the given overlap."""
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError("overlap_fraction must be in [0, 1)")
    n_frame = int(round(frame_ms * audio.sample_rate_hz / 1000.0))
    if n_frame < 1:
        raise ValueError("frame_ms too small for the sample rate")
    if len(audio) < n_frame:
        raise SignalTooShortError(
            f"signal too short: {len(audio)} samples < one {n_frame}-sample frame"
        )
    hop = max(1, int(round(n_frame * (1.0 - overlap_fraction))))
    n_frames = (len(audio) - n_frame) // hop + 1
    idx = np.arange(n_frame)[None, :] + hop * np.arange(n_frames)[:, None]
    window = signal.windows.hann(n_frame, sym=False)  # periodic: COLA at 50%
    return FrameSet(
        frames=audio.samples[idx] * window,
        hop_samples=hop,
        window="hann",
        sample_rate_hz=audio.sample_rate_hz,
    )


def _floor_per_row(power: np.ndarray) -> np.ndarray:
    peak = power.max(axis=1, keepdims=True)
    floor = SPECTRAL_FLOOR_REL * peak
    floor[peak <= 0.0] = SPECTRAL_FLOOR_ABS
    return floor


def log_power_spectra(frames: FrameSet, n_fft: int) -> SpectraMatrix:
    """Natural-log power spectrum per frame over bins 0..n_fft/2."""
    n_frame = frames.frames.shape[1]
    if n_fft < n_frame:
        raise ValueError("n_fft must be >= frame length")
    if n_fft & (n_fft - 1):
        raise ValueError("n_fft must be a power of two")
    spectrum = np.fft.rfft(frames.frames, n=n_fft, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    values = np.log(power + _floor_per_row(power))
    return SpectraMatrix(values=values, bin_hz=frames.sample_rate_hz / n_fft)


def mean_normalize_rows(spectra: SpectraMatrix) -> SpectraMatrix:
    """Subtract each row's own mean; idempotent."""
    values = spectra.values - spectra.values.mean(axis=1, keepdims=True)
    return SpectraMatrix(values=values, bin_hz=spectra.bin_hz, mean_normalized=True)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_bands: int, n_fft: int, sample_rate_hz: int) -> np.ndarray:
    """Triangular mel filterbank matrix (n_bands x n_fft/2+1), 0 Hz to Nyquist."""
    mel_points = np.linspace(_hz_to_mel(0.0), _hz_to_mel(sample_rate_hz / 2.0), n_bands + 2)
    hz_points = _mel_to_hz(mel_points)
    bin_freqs = np.floor((n_fft + 1) * hz_points / sample_rate_hz).astype(int)
    bank = np.zeros((n_bands, n_fft // 2 + 1))
    for i in range(1, n_bands + 1):
        left, center, right = bin_freqs[i - 1], bin_freqs[i], bin_freqs[i + 1]
        for k in range(left, center):
            bank[i - 1, k] = (k - left) / max(center - left, 1)
        for k in range(center, right):
            bank[i - 1, k] = (right - k) / max(right - center, 1)
    return bank


def mfcc_rasta(frames: FrameSet, n_mfcc: int) -> CepstraMatrix:
    """RASTA-filtered MFCCs, one row per frame after the warm-up drop.

    Mel energies -> natural log -> DCT-II; the band-pass RASTA filter then
    runs along time over each cepstral track and the first RASTA_WARMUP
    transient frames are discarded. The DCT c0 term is excluded: it carries
    only overall gain, which the pipeline must be invariant to.
    """
    if n_mfcc < 1:
        raise ValueError("n_mfcc must be >= 1")
    n_frames = frames.frames.shape[0]
    if n_frames <= RASTA_WARMUP:
        raise InsufficientFramesError(
            f"insufficient frames: RASTA needs more than {RASTA_WARMUP}, got {n_frames}"
        )
    n_fft = frames.frames.shape[1]
    spectrum = np.fft.rfft(frames.frames, n=n_fft, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    bank = mel_filterbank(N_MEL_BANDS, n_fft, frames.sample_rate_hz)
    energies = power @ bank.T
    log_mels = np.log(energies + _floor_per_row(energies))
    cepstra = dct(log_mels, type=2, norm="ortho", axis=1)[:, 1 : n_mfcc + 1]
    filtered = signal.lfilter(RASTA_NUMER, RASTA_DENOM, cepstra, axis=0)
    return CepstraMatrix(values=filtered[RASTA_WARMUP:])


def analysis_features(audio: AudioBuffer, config: FrameConfig) -> tuple[CepstraMatrix, SpectraMatrix]:
    """Aligned (cepstra, mean-normalized spectra) pairs for one recording.

    Both outputs have one row per post-warm-up frame, so cepstra row l and
    spectra row l describe the same frame.
    """
    frames = frame_and_window(audio, config.frame_ms, config.overlap)
    spectra = mean_normalize_rows(log_power_spectra(frames, config.n_fft))
    cepstra = mfcc_rasta(frames, config.n_mfcc)
    aligned = SpectraMatrix(
        values=spectra.values[RASTA_WARMUP:],
        bin_hz=spectra.bin_hz,
        mean_normalized=True,
    )
    return cepstra, aligned
