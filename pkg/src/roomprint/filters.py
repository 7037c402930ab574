"""Minimum-phase rational filter recovery from a channel log-magnitude.

The estimated log magnitude only pins down |H(f)|; the phase of the
minimum-phase completion comes from the real cepstrum, and a rational
filter is then fitted to the complex response so a time-domain impulse
response can be synthesized.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .audio import AudioBuffer
from .channel import ChannelEstimate
from .errors import DegenerateTargetError

# Zero-padding factor for the cepstral Hilbert computation, limiting
# cepstral aliasing.
HILBERT_PAD_FACTOR = 8

# Stability margin: pole/zero radii are kept strictly below 1 - REFLECT_MARGIN.
REFLECT_MARGIN = 1e-8

# Pilot-driven pipeline default. Low orders (tens) only capture the spectral
# envelope and the synthesized response decays within milliseconds in every
# band; recovering room-dependent decay needs enough poles to track the
# estimate's fine structure.
DEFAULT_ORDER = 384
DEFAULT_TARGET_REFINE = 2


@dataclass(frozen=True)
class ComplexResponse:
    """Complex frequency response samples on the one-sided uniform grid."""

    values: np.ndarray
    bin_hz: float

    @property
    def n_bins(self) -> int:
        return self.values.size

    @property
    def omegas(self) -> np.ndarray:
        """Angular frequencies of the one-sided grid, 0..pi inclusive."""
        return np.linspace(0.0, np.pi, self.n_bins)

    def full_grid(self) -> np.ndarray:
        """Two-sided spectrum with conjugate symmetry, length 2*(n_bins-1)."""
        return np.concatenate([self.values, np.conj(self.values[-2:0:-1])])


@dataclass(frozen=True)
class DigitalFilter:
    """Rational filter: b numerator, a denominator with the leading 1 implicit."""

    b: np.ndarray
    a: np.ndarray
    poles_reflected: bool = False
    zeros_reflected: bool = False

    @property
    def denominator(self) -> np.ndarray:
        """Full denominator polynomial [1, a_1, ..., a_na]."""
        return np.concatenate([[1.0], self.a])

    def poles(self) -> np.ndarray:
        return np.roots(self.denominator) if self.a.size else np.empty(0, complex)

    def zeros(self) -> np.ndarray:
        b = np.trim_zeros(self.b, "f")
        return np.roots(b) if b.size > 1 else np.empty(0, complex)

    def response(self, omegas: np.ndarray) -> np.ndarray:
        _, h = signal.freqz(self.b, self.denominator, worN=omegas)
        return h


def minimum_phase_target(estimate: ChannelEstimate, refine: int = 1) -> ComplexResponse:
    """Complex minimum-phase response whose log magnitude matches the estimate.

    The phase is recovered by folding the real cepstrum of the log magnitude
    onto the causal side, on a grid zero-padded by HILBERT_PAD_FACTOR; the
    magnitude is the exact exponential of the input. refine > 1 emits the
    response on a grid that many times denser (the original bins are an exact
    subset), which admits higher-order fits downstream.
    """
    log_mag = np.asarray(estimate.log_magnitude, dtype=np.float64)
    n_bins = log_mag.size
    n_full = 2 * (n_bins - 1)
    n_big = HILBERT_PAD_FACTOR * n_full
    if refine < 1 or HILBERT_PAD_FACTOR % refine:
        raise ValueError(f"refine must divide {HILBERT_PAD_FACTOR}")

    grid = np.linspace(0.0, np.pi, n_bins)
    grid_big = np.linspace(0.0, np.pi, n_big // 2 + 1)
    log_mag_big = np.interp(grid_big, grid, log_mag)

    cepstrum = np.fft.irfft(log_mag_big, n=n_big)
    folded = np.zeros(n_big)
    folded[0] = cepstrum[0]
    folded[1 : n_big // 2] = 2.0 * cepstrum[1 : n_big // 2]
    folded[n_big // 2] = cepstrum[n_big // 2]
    log_min_phase = np.fft.rfft(folded)
    # The big grid is an exact refinement, so output bin k sits at index
    # k * (n_big / (n_full * refine)).
    step = n_big // (n_full * refine)
    phase = np.imag(log_min_phase)[::step]
    out_log_mag = log_mag if refine == 1 else log_mag_big[::step]
    return ComplexResponse(
        values=np.exp(out_log_mag) * np.exp(1j * phase),
        bin_hz=estimate.bin_hz / refine,
    )


def _equation_error_solve(
    h: np.ndarray, omegas: np.ndarray, n_b: int, n_a: int, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted linear least squares on A(w)H(w) - B(w)."""
    exps = np.exp(-1j * np.outer(omegas, np.arange(max(n_b, n_a) + 1)))
    cols_b = -exps[:, : n_b + 1]
    cols_a = h[:, None] * exps[:, 1 : n_a + 1]
    m = np.hstack([cols_b, cols_a]) * weights[:, None]
    rhs = -h * weights
    design = np.vstack([m.real, m.imag])
    target = np.concatenate([rhs.real, rhs.imag])
    theta, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if not np.all(np.isfinite(theta)):
        raise DegenerateTargetError("degenerate target: singular normal equations")
    return theta[: n_b + 1], theta[n_b + 1 :]


def _reflect_inside(roots: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """Project roots inside the unit circle; returns gain compensation."""
    limit = 1.0 - REFLECT_MARGIN
    out = roots.copy()
    gain = 1.0
    touched = False
    for i, r in enumerate(roots):
        mag = abs(r)
        if mag < limit:
            continue
        touched = True
        if mag > 1.0:
            reflected = 1.0 / np.conj(r)
            gain /= mag  # keeps |B/A| unchanged at every frequency
            mag = abs(reflected)
            out[i] = reflected
        if mag >= limit:
            out[i] = out[i] * (1.0 - 2.0 * REFLECT_MARGIN) / mag
    return out, gain, touched


def fit_minimum_phase_filter(
    target: ComplexResponse, n_b: int, n_a: int
) -> DigitalFilter:
    """Least-squares rational fit of the target response, stabilized.

    First pass: equation-error linearization (unit weights). Second pass:
    one Steiglitz-McBride style refinement reweighting by 1/|A(w)| from the
    first pass, which de-biases the equation error toward the true l2
    response error. Poles (and zeros) landing on or outside the unit circle
    are reflected inside with magnitude compensation.
    """
    if n_b < 1 or n_a < 1:
        raise ValueError("filter orders must be >= 1")
    h = np.asarray(target.values, dtype=np.complex128)
    omegas = target.omegas
    if omegas.size < 2 * (n_b + n_a + 1):
        raise ValueError("frequency grid too small for the requested orders")

    weights = np.ones(omegas.size)
    b, a = _equation_error_solve(h, omegas, n_b, n_a, weights)
    exps = np.exp(-1j * np.outer(omegas, np.arange(n_a + 1)))
    a_mag = np.abs(exps @ np.concatenate([[1.0], a]))
    weights = 1.0 / np.maximum(a_mag, 1e-8)
    b, a = _equation_error_solve(h, omegas, n_b, n_a, weights)

    poles_reflected = False
    denom = np.concatenate([[1.0], a])
    poles = np.roots(denom)
    if poles.size and np.max(np.abs(poles)) >= 1.0 - REFLECT_MARGIN:
        poles, gain, poles_reflected = _reflect_inside(poles)
        denom = np.real(np.poly(poles))
        b = b * gain
        a = denom[1:]

    zeros_reflected = False
    lead = np.argmax(np.abs(b) > 0) if np.any(np.abs(b) > 0) else 0
    core = b[lead:]
    if core.size > 1:
        zeros = np.roots(core)
        if zeros.size and np.max(np.abs(zeros)) >= 1.0 - REFLECT_MARGIN:
            zeros, gain, zeros_reflected = _reflect_inside(zeros)
            rebuilt = np.real(np.poly(zeros)) * core[0] / gain
            b = np.concatenate([b[:lead], rebuilt])

    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(a))):
        raise DegenerateTargetError("degenerate target: non-finite coefficients")
    return DigitalFilter(
        b=b, a=a, poles_reflected=poles_reflected, zeros_reflected=zeros_reflected
    )


def impulse_response(
    filt: DigitalFilter, length_samples: int, sample_rate_hz: int = 16000
) -> AudioBuffer:
    """Filter a unit impulse through the direct-form recursion."""
    if length_samples < 1:
        raise ValueError("length must be >= 1")
    delta = np.zeros(length_samples)
    delta[0] = 1.0
    out = signal.lfilter(filt.b, filt.denominator, delta)
    return AudioBuffer(out, sample_rate_hz)


def recommended_length(filt: DigitalFilter, sample_rate_hz: int, max_seconds: float = 8.0) -> int:
    """Synthesis length covering a 2 s floor and the pole-decay bound.

    The decay bound is the time for the slowest pole to fall below 1e-9 of
    peak; reflected poles can sit arbitrarily close to the unit circle, so
    the bound is capped at max_seconds.
    """
    floor = 2 * sample_rate_hz
    poles = filt.poles()
    if poles.size == 0:
        return max(floor, filt.b.size)
    top = float(np.max(np.abs(poles)))
    if top <= 0.0:
        return max(floor, filt.b.size)
    bound = int(np.ceil(np.log(1e-9) / np.log(min(top, 1.0 - 1e-12))))
    return max(floor, min(bound, int(max_seconds * sample_rate_hz)))


def write_coefficients_csv(path, filt: DigitalFilter) -> None:
    """Dump (index, b, a) coefficient rows; a includes the implicit unit lead."""
    denom = filt.denominator
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "b", "a"])
        for i in range(max(filt.b.size, denom.size)):
            bi = filt.b[i] if i < filt.b.size else ""
            ai = denom[i] if i < denom.size else ""
            writer.writerow([i, bi, ai])
