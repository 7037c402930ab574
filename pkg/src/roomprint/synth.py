"""Synthetic dry speech and room impulse responses.

Self-contained generators used for desk-scale evaluation and tests: a
formant-style pseudo-speech source and RIRs built from band-filtered noise
with frequency-dependent exponential decay. RIR specs can also appear
inline in dataset manifests ("synth:key=value,..." strings).
"""

import math

import numpy as np
from scipy import signal

from .audio import AudioBuffer
from .errors import ManifestInvalidError

RT60_PER_TAU = 60.0 * math.log(10.0) / 20.0  # ~6.9078: RT60 of an exp(-t/tau) envelope


def _resonator_sos(freq_hz: float, bandwidth_hz: float, sample_rate_hz: int) -> np.ndarray:
    r = math.exp(-math.pi * bandwidth_hz / sample_rate_hz)
    theta = 2.0 * math.pi * freq_hz / sample_rate_hz
    return np.array([[1.0 - r, 0.0, 0.0, 1.0, -2.0 * r * math.cos(theta), r * r]])


def _voiced_segment(n: int, fs: int, rng: np.random.Generator) -> np.ndarray:
    f0 = rng.uniform(85.0, 280.0)
    period = max(2, int(round(fs / f0)))
    excitation = np.zeros(n)
    excitation[::period] = 1.0
    # Glottal tilt plus four formant resonators.
    out = signal.lfilter([1.0], [1.0, -0.9], excitation)
    formant_ranges = [(250, 900), (900, 2300), (2300, 3400), (3300, 4800)]
    for lo, hi in formant_ranges:
        sos = _resonator_sos(rng.uniform(lo, hi), rng.uniform(60.0, 220.0), fs)
        out = signal.sosfilt(sos, out)
    # High-band breathiness keeps energy above the formants.
    noise = rng.standard_normal(n)
    sos = _resonator_sos(rng.uniform(4500.0, 7000.0), rng.uniform(800.0, 1800.0), fs)
    out = out / (np.std(out) + 1e-12) + 0.05 * signal.sosfilt(sos, noise)
    return out


def _unvoiced_segment(n: int, fs: int, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(n)
    sos = _resonator_sos(rng.uniform(1500.0, 6500.0), rng.uniform(400.0, 2000.0), fs)
    out = signal.sosfilt(sos, noise)
    return out / (np.std(out) + 1e-12)


def synth_speech(duration_s: float, sample_rate_hz: int = 16000, seed: int = 0) -> AudioBuffer:
    """Pseudo-speech: random voiced/unvoiced segments with smooth envelopes."""
    rng = np.random.default_rng(seed)
    total = int(round(duration_s * sample_rate_hz))
    fade = int(0.010 * sample_rate_hz)
    out = np.zeros(total + sample_rate_hz)
    pos = 0
    while pos < total:
        n = int(rng.uniform(0.080, 0.350) * sample_rate_hz)
        if rng.random() < 0.7:
            seg = _voiced_segment(n, sample_rate_hz, rng)
        else:
            seg = _unvoiced_segment(n, sample_rate_hz, rng)
        seg *= 10.0 ** (rng.uniform(-18.0, 0.0) / 20.0)
        env = np.ones(n)
        env[:fade] = np.linspace(0.0, 1.0, fade)
        env[-fade:] = np.linspace(1.0, 0.0, fade)
        out[pos : pos + n] += seg * env
        pos += n - fade  # crossfade into the next segment
    out = out[:total]
    peak = np.max(np.abs(out))
    if peak > 0:
        out = out * (0.5 / peak)
    return AudioBuffer(out, sample_rate_hz)


def synth_rir(
    sample_rate_hz: int,
    duration_s: float,
    rt60_1khz_s: float,
    shape_exp: float = 0.2,
    seed: int = 0,
    direct_level: float = 0.3,
) -> AudioBuffer:
    """RIR from band-filtered noise with per-band exponential decay.

    Band b decays with RT60(f) = rt60_1khz_s * (f / 1 kHz) ** -shape_exp,
    evaluated at the band center; a small direct-path impulse leads the tail.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    nyquist = sample_rate_hz / 2.0
    edges = [88.0]
    while edges[-1] * 2.0 < 0.98 * nyquist:
        edges.append(edges[-1] * 2.0)
    edges.append(0.98 * nyquist)
    tail = np.zeros(n)
    for lo, hi in zip(edges[:-1], edges[1:]):
        center = math.sqrt(lo * hi)
        rt60 = rt60_1khz_s * (center / 1000.0) ** (-shape_exp)
        tau = rt60 / RT60_PER_TAU
        sos = signal.butter(4, [lo / nyquist, hi / nyquist], btype="bandpass", output="sos")
        band_noise = signal.sosfilt(sos, rng.standard_normal(n))
        tail += band_noise * np.exp(-t / tau)
    tail /= np.max(np.abs(tail)) + 1e-12
    tail[0] += direct_level
    return AudioBuffer(tail / np.max(np.abs(tail)), sample_rate_hz)


def desk_room_profiles(n_rooms: int = 5) -> list:
    """Synthetic room parameter sets with >= 25% per-band RT60 separation."""
    profiles = []
    rt60 = 0.25
    for i in range(n_rooms):
        profiles.append(
            {"name": f"room{i + 1}", "rt60_1khz_s": round(rt60, 4), "shape_exp": 0.2}
        )
        rt60 *= 1.35
    return profiles


def rir_spec_string(rt60_1khz_s: float, shape_exp: float, seed: int, duration_s: float = 1.25) -> str:
    return (
        f"synth:rt60={rt60_1khz_s},shape={shape_exp},seed={seed},dur={duration_s}"
    )


def parse_rir_spec(spec: str, sample_rate_hz: int) -> AudioBuffer:
    """Materialize a "synth:..." RIR spec from a manifest."""
    if not spec.startswith("synth:"):
        raise ManifestInvalidError(f"manifest invalid: not a synthetic RIR spec: {spec}")
    params = {}
    try:
        for pair in spec[len("synth:") :].split(","):
            key, value = pair.split("=")
            params[key.strip()] = float(value)
    except ValueError as exc:
        raise ManifestInvalidError(f"manifest invalid: bad RIR spec {spec!r}") from exc
    missing = {"rt60", "seed"} - params.keys()
    if missing:
        raise ManifestInvalidError(f"manifest invalid: RIR spec missing {sorted(missing)}")
    return synth_rir(
        sample_rate_hz=sample_rate_hz,
        duration_s=params.get("dur", 1.25),
        rt60_1khz_s=params["rt60"],
        shape_exp=params.get("shape", 0.2),
        seed=int(params["seed"]),
    )
