"""Fractional-octave filterbank, Schroeder decay analysis and RT60 roomprints."""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .audio import AudioBuffer
from .errors import (
    BandUnresolvableError,
    InsufficientDecayError,
    NoBandsInRangeError,
    ZeroEnergyError,
)

REFERENCE_HZ = 1000.0
BUTTER_ORDER = 4
# Upper filter corner is clipped below Nyquist so the top band stays designable.
NYQUIST_CLIP = 0.99
# Decay fits start below the direct sound, ISO style.
FIT_START_DB = -5.0

DB_PER_NEPER = 20.0 / math.log(10.0)  # ~8.6859; EDC slope of exp(-t/tau) is -2/tau nepers


@dataclass(frozen=True)
class Band:
    index: int
    f_l: float
    f_m: float
    f_u: float


@dataclass(frozen=True)
class Filterbank:
    """Ordered base-two fractional-octave bands for one sample rate."""

    fraction: int  # the B of 1/B octave
    bands: tuple
    sample_rate_hz: int

    def __len__(self) -> int:
        return len(self.bands)

    @property
    def midbands_hz(self) -> np.ndarray:
        return np.array([band.f_m for band in self.bands])


@dataclass(frozen=True)
class DecayCurve:
    """Energy decay curve in dB, starting at 0 and non-increasing."""

    times: np.ndarray
    edc_db: np.ndarray


@dataclass(frozen=True)
class Roomprint:
    """Per-band RT60 vector plus the filterbank and interpolation metadata."""

    rt60_s: np.ndarray
    band_midbands_hz: np.ndarray
    fraction: int
    alpha: float
    log_transformed: bool = False
    fallback_bands: tuple = ()
    failed_bands: tuple = ()

    @property
    def valid(self) -> bool:
        return not self.failed_bands and bool(np.all(np.isfinite(self.rt60_s)))

    def feature_vector(self) -> np.ndarray:
        if self.log_transformed:
            return np.log(self.rt60_s)
        return np.array(self.rt60_s, dtype=np.float64)


def _midband(b: int, fraction: int) -> float:
    if fraction % 2:
        return 2.0 ** ((2 * b - 60) / (2 * fraction)) * REFERENCE_HZ
    return 2.0 ** ((2 * b - 59) / (2 * fraction)) * REFERENCE_HZ


def _edges(b: int, fraction: int) -> tuple[float, float]:
    # Shared-exponent forms make f_u(b) and f_l(b+1) bit-identical.
    if fraction % 2:
        lo = 2.0 ** ((2 * b - 61) / (2 * fraction)) * REFERENCE_HZ
        hi = 2.0 ** ((2 * b - 59) / (2 * fraction)) * REFERENCE_HZ
    else:
        lo = 2.0 ** ((2 * b - 60) / (2 * fraction)) * REFERENCE_HZ
        hi = 2.0 ** ((2 * b - 58) / (2 * fraction)) * REFERENCE_HZ
    return lo, hi


def design_filterbank(
    fraction: int, f_min: float, f_max: float, sample_rate_hz: int
) -> Filterbank:
    """All 1/B-octave bands overlapping [f_min, f_max] and below Nyquist."""
    if fraction < 1:
        raise ValueError("octave fraction must be >= 1")
    nyquist = sample_rate_hz / 2.0
    if not 0.0 < f_min < f_max <= nyquist:
        raise ValueError("need 0 < f_min < f_max <= Nyquist")
    # Bracket the candidate band indices from the midband formula.
    lo_guess = int(math.floor(fraction * math.log2(f_min / REFERENCE_HZ))) + 30 - 3
    hi_guess = int(math.ceil(fraction * math.log2(f_max / REFERENCE_HZ))) + 30 + 3
    bands = []
    for b in range(lo_guess, hi_guess + 1):
        f_l, f_u = _edges(b, fraction)
        if f_u > f_min and f_l < f_max and f_u <= nyquist * (1.0 + 1e-12):
            bands.append(Band(index=b, f_l=f_l, f_m=_midband(b, fraction), f_u=f_u))
    if not bands:
        raise NoBandsInRangeError(
            f"no bands in range: 1/{fraction} octave over [{f_min}, {f_max}] Hz"
        )
    return Filterbank(fraction=fraction, bands=tuple(bands), sample_rate_hz=sample_rate_hz)


def apply_bandpass(audio: AudioBuffer, band: tuple[float, float]) -> AudioBuffer:
    """Zero-phase 4th-order Butterworth bandpass over (f_l, f_u)."""
    f_l, f_u = band[0], band[1]
    nyquist = audio.sample_rate_hz / 2.0
    if f_u - f_l < 2.0 * audio.sample_rate_hz / len(audio):
        raise BandUnresolvableError(
            f"band unresolvable: [{f_l:.1f}, {f_u:.1f}] Hz too narrow for "
            f"{len(audio)} samples at {audio.sample_rate_hz} Hz"
        )
    hi = min(f_u, NYQUIST_CLIP * nyquist)
    sos = signal.butter(BUTTER_ORDER, [f_l / nyquist, hi / nyquist], btype="bandpass", output="sos")
    return AudioBuffer(signal.sosfiltfilt(sos, audio.samples), audio.sample_rate_hz)


def schroeder_decay(band_signal: AudioBuffer) -> DecayCurve:
    """Reverse-integrated energy decay, normalized to 0 dB at t = 0."""
    energy = band_signal.samples**2
    total = energy.sum()
    if total <= 0.0:
        raise ZeroEnergyError("zero energy: decay analysis undefined")
    remaining = np.cumsum(energy[::-1])[::-1]
    n_valid = int(np.count_nonzero(remaining > 0.0))  # prefix: remaining is non-increasing
    edc_db = 10.0 * np.log10(remaining[:n_valid] / total)
    times = np.arange(n_valid) / band_signal.sample_rate_hz
    return DecayCurve(times=times, edc_db=edc_db)


def estimate_rt60(curve: DecayCurve, alpha: float) -> float:
    """RT60 from a line fit over the [-5 dB, -(5 + 60/alpha) dB] window."""
    if alpha < 1.0:
        raise ValueError("alpha must be >= 1")
    depth = FIT_START_DB - 60.0 / alpha
    mask = (curve.edc_db <= FIT_START_DB) & (curve.edc_db >= depth)
    if curve.edc_db.min() > depth or np.count_nonzero(mask) < 2:
        raise InsufficientDecayError(
            f"insufficient decay range: curve bottoms out at "
            f"{curve.edc_db.min():.1f} dB, fit needs {depth:.1f} dB"
        )
    slope, _ = np.polyfit(curve.times[mask], curve.edc_db[mask], 1)
    if slope >= 0.0:
        raise InsufficientDecayError("insufficient decay range: non-decreasing fit window")
    return -60.0 / slope


def _degraded_rt60(curve: DecayCurve) -> float:
    """Last-resort fit from -5 dB down to whatever depth the curve reaches."""
    mask = curve.edc_db <= FIT_START_DB
    if np.count_nonzero(mask) < 2:
        return float("nan")
    slope, _ = np.polyfit(curve.times[mask], curve.edc_db[mask], 1)
    if slope >= 0.0:
        return float("nan")
    return -60.0 / slope


def compute_roomprint(
    rir_estimate: AudioBuffer,
    bank: Filterbank,
    alpha: float,
    log_transform: bool = False,
) -> Roomprint:
    """Per-band RT60 vector over the filterbank, with an alpha fallback ladder.

    A band whose decay curve is too shallow for the requested alpha retries
    at alpha 2 then 3; a band that exhausts the ladder falls back to a
    degraded whole-curve fit and is reported in failed_bands, marking the
    roomprint invalid.
    """
    ladder = [alpha] + [a for a in (2.0, 3.0) if a > alpha]
    values = np.empty(len(bank))
    fallback, failed = [], []
    for i, band in enumerate(bank.bands):
        filtered = apply_bandpass(rir_estimate, (band.f_l, band.f_u))
        try:
            curve = schroeder_decay(filtered)
        except ZeroEnergyError:
            values[i] = float("nan")
            failed.append(band.index)
            continue
        for step, a in enumerate(ladder):
            try:
                values[i] = estimate_rt60(curve, a)
                if step > 0:
                    fallback.append(band.index)
                break
            except InsufficientDecayError:
                continue
        else:
            values[i] = _degraded_rt60(curve)
            failed.append(band.index)
    return Roomprint(
        rt60_s=values,
        band_midbands_hz=bank.midbands_hz,
        fraction=bank.fraction,
        alpha=alpha,
        log_transformed=log_transform,
        fallback_bands=tuple(fallback),
        failed_bands=tuple(failed),
    )


def write_roomprint_csv(path, print_: Roomprint) -> None:
    """Header of midband frequencies, one data row of RT60 seconds."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{f:.4f}" for f in print_.band_midbands_hz])
        writer.writerow([f"{v:.9f}" for v in print_.rt60_s])


def roomprint_to_dict(print_: Roomprint) -> dict:
    return {
        "rt60_s": list(print_.rt60_s),
        "band_midbands_hz": list(print_.band_midbands_hz),
        "fraction": print_.fraction,
        "alpha": print_.alpha,
        "log_transformed": print_.log_transformed,
        "fallback_bands": list(print_.fallback_bands),
        "failed_bands": list(print_.failed_bands),
    }


def roomprint_from_dict(d: dict) -> Roomprint:
    return Roomprint(
        rt60_s=np.array(d["rt60_s"], dtype=np.float64),
        band_midbands_hz=np.array(d["band_midbands_hz"], dtype=np.float64),
        fraction=int(d["fraction"]),
        alpha=float(d["alpha"]),
        log_transformed=bool(d["log_transformed"]),
        fallback_bands=tuple(d.get("fallback_bands", ())),
        failed_bands=tuple(d.get("failed_bands", ())),
    )


def write_roomprint_json(path, print_: Roomprint, extra: dict | None = None) -> None:
    payload = roomprint_to_dict(print_)
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def read_roomprint_json(path) -> tuple[Roomprint, dict]:
    with open(path) as fh:
        payload = json.load(fh)
    return roomprint_from_dict(payload), payload
