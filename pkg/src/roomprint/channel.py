"""Blind estimation of the channel log-magnitude from reverberant speech."""

import csv
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .dsp import analysis_features
from .errors import ConfigMismatchError, SignalTooShortError
from .gmm import SpeechModel, mixture_posteriors


@dataclass(frozen=True)
class ChannelEstimate:
    """Mean-normalized natural-log channel magnitude on a uniform grid."""

    log_magnitude: np.ndarray
    bin_hz: float
    n_frames_used: int

    @property
    def n_bins(self) -> int:
        return self.log_magnitude.size

    @property
    def freqs_hz(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_hz


def estimate_channel(recording: AudioBuffer, model: SpeechModel) -> ChannelEstimate:
    """Average difference between recording frames and the ideal-speech estimate.

    Recording frames are reduced to mean-normalized log-power spectra; the
    speech model predicts the dry-speech spectrum of each frame from its
    RASTA-MFCCs; the averaged residual is halved to convert log power into
    log magnitude. Requires at least one second of audio at the model's
    sample rate.
    """
    cfg = model.frame_config
    if recording.sample_rate_hz != cfg.sample_rate_hz:
        raise ConfigMismatchError(
            f"config mismatch: recording at {recording.sample_rate_hz} Hz, "
            f"model expects {cfg.sample_rate_hz} Hz"
        )
    if len(recording) < recording.sample_rate_hz:
        raise SignalTooShortError(
            f"signal too short: {recording.duration_s:.3f} s < 1 s minimum"
        )
    cepstra, spectra = analysis_features(recording, cfg)
    n_used = cepstra.values.shape[0]
    if n_used < 1:
        raise SignalTooShortError("signal too short: no frames left after warm-up")
    posteriors = mixture_posteriors(model, cepstra)
    ideal = posteriors.values @ model.avg_spectrum
    log_power = (spectra.values - ideal).mean(axis=0)
    return ChannelEstimate(
        log_magnitude=0.5 * log_power,
        bin_hz=spectra.bin_hz,
        n_frames_used=n_used,
    )


def smoothed(estimate: ChannelEstimate, width: int = 3) -> np.ndarray:
    """Moving-average view of the log magnitude, for display only."""
    kernel = np.ones(width) / width
    return np.convolve(estimate.log_magnitude, kernel, mode="same")


def write_csv(path, estimate: ChannelEstimate) -> None:
    """Dump (freq_hz, log_magnitude) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq_hz", "log_magnitude"])
        for f, v in zip(estimate.freqs_hz, estimate.log_magnitude):
            writer.writerow([f"{f:.6f}", f"{v:.12e}"])


def save_estimate(path, estimate: ChannelEstimate) -> None:
    """Lossless npz for pipeline intermediates."""
    np.savez(
        path,
        log_magnitude=estimate.log_magnitude,
        bin_hz=np.float64(estimate.bin_hz),
        n_frames_used=np.int64(estimate.n_frames_used),
    )


def load_estimate(path) -> ChannelEstimate:
    with np.load(path) as data:
        return ChannelEstimate(
            log_magnitude=data["log_magnitude"],
            bin_hz=float(data["bin_hz"]),
            n_frames_used=int(data["n_frames_used"]),
        )
