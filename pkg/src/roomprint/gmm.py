"""GMM speech model over RASTA-MFCCs plus per-mixture average log-spectra.

The model pairs a diagonal-covariance GMM on cepstral features with a matrix
of mixture-conditional average mean-normalized log-power spectra. Together
they let the channel estimator predict what a frame of dry speech should
have looked like.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus

from .audio import AudioBuffer
from .container import read_container, write_container
from .dsp import CepstraMatrix, FrameConfig, SpectraMatrix, analysis_features
from .errors import ConfigMismatchError, InsufficientTrainingDataError

MODEL_MAGIC = b"RPLGMM1"

VARIANCE_FLOOR = 1e-6
EM_TOL_PER_FRAME = 1e-4
EM_MAX_ITER = 200


@dataclass
class SpeechModel:
    """Trained GMM (priors, means, diagonal variances) plus avg-spectrum matrix."""

    priors: np.ndarray            # (M,)
    means: np.ndarray             # (M, n_mfcc)
    variances: np.ndarray         # (M, n_mfcc), diagonal covariances
    avg_spectrum: np.ndarray      # (M, N_bins), mean-normalized log power
    frame_config: FrameConfig
    variance_clamped: bool = False
    log_likelihood_history: list = field(default_factory=list)

    @property
    def n_mixtures(self) -> int:
        return self.priors.size

    @property
    def n_bins(self) -> int:
        return self.avg_spectrum.shape[1]

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for arr in (self.priors, self.means, self.variances, self.avg_spectrum):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class ProbMatrix:
    """L x M relative mixture probabilities; rows sum to 1."""

    values: np.ndarray
    underflow_frames: int = 0


def _log_gaussians(x: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """Log N(x_l; mu_i, diag sigma_i^2) for all (l, i) pairs."""
    inv = 1.0 / variances
    quad = (x**2) @ inv.T - 2.0 * (x @ (means * inv).T) + np.sum(means**2 * inv, axis=1)
    log_det = np.sum(np.log(variances), axis=1)
    d = x.shape[1]
    return -0.5 * (d * np.log(2.0 * np.pi) + log_det + quad)


def _posterior_rows(
    priors: np.ndarray, means: np.ndarray, variances: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray, int]:
    """Responsibilities, per-frame log-likelihoods and underflow count."""
    log_joint = _log_gaussians(x, means, variances) + np.log(priors)
    log_norm = logsumexp(log_joint, axis=1, keepdims=True)
    resp = np.exp(log_joint - log_norm)
    dead = ~np.isfinite(log_norm[:, 0])
    n_dead = int(dead.sum())
    if n_dead:
        resp[dead] = 1.0 / priors.size
    return resp, log_norm[:, 0], n_dead


def train_speech_model(
    corpus_cepstra: CepstraMatrix,
    corpus_spectra: SpectraMatrix,
    n_mixtures: int,
    seed: int,
    frame_config: FrameConfig | None = None,
    normalize_avg_spectrum: bool = True,
) -> SpeechModel:
    """Fit the GMM by EM and derive the per-mixture average spectrum matrix.

    EM uses k-means++ initial means (seeded), diagonal covariances, and stops
    once the per-frame log-likelihood gain drops below EM_TOL_PER_FRAME or
    after EM_MAX_ITER iterations. The average-spectrum matrix is the
    responsibility-weighted mean of the corpus log-spectra per mixture; set
    normalize_avg_spectrum=False for the raw responsibility-sum variant.

    frame_config records how the corpus features were extracted; it defaults
    to the standard 16 kHz / 128 ms / 50% configuration.
    """
    x = corpus_cepstra.values
    spectra = corpus_spectra.values
    if x.shape[0] != spectra.shape[0]:
        raise ConfigMismatchError(
            f"config mismatch: {x.shape[0]} cepstra rows vs {spectra.shape[0]} spectra rows"
        )
    if not corpus_spectra.mean_normalized:
        raise ConfigMismatchError("config mismatch: corpus spectra must be mean-normalized")
    n = x.shape[0]
    if n < 10 * n_mixtures:
        raise InsufficientTrainingDataError(
            f"insufficient training data: {n} frames < 10 x {n_mixtures} mixtures"
        )

    means, _ = kmeans_plusplus(x, n_clusters=n_mixtures, random_state=seed)
    variances = np.tile(np.maximum(x.var(axis=0), VARIANCE_FLOOR), (n_mixtures, 1))
    priors = np.full(n_mixtures, 1.0 / n_mixtures)

    clamped = False
    history = []
    prev_ll = -np.inf
    for _ in range(EM_MAX_ITER):
        resp, frame_ll, _ = _posterior_rows(priors, means, variances, x)
        ll = float(np.mean(frame_ll))
        history.append(ll)
        if ll - prev_ll < EM_TOL_PER_FRAME and np.isfinite(prev_ll):
            break
        prev_ll = ll

        mass = resp.sum(axis=0)
        safe_mass = np.maximum(mass, 1e-12)
        priors = mass / n
        means = (resp.T @ x) / safe_mass[:, None]
        second = (resp.T @ (x**2)) / safe_mass[:, None]
        variances = second - means**2
        if np.any(variances < VARIANCE_FLOOR):
            clamped = True
            variances = np.maximum(variances, VARIANCE_FLOOR)

    resp, _, _ = _posterior_rows(priors, means, variances, x)
    mass = resp.sum(axis=0)
    avg_spectrum = resp.T @ spectra
    if normalize_avg_spectrum:
        avg_spectrum /= np.maximum(mass, 1e-12)[:, None]

    if frame_config is None:
        frame_config = FrameConfig(n_mfcc=corpus_cepstra.n_mfcc)
    return SpeechModel(
        priors=priors,
        means=means,
        variances=variances,
        avg_spectrum=avg_spectrum,
        frame_config=frame_config,
        variance_clamped=clamped,
        log_likelihood_history=history,
    )


def mixture_posteriors(model: SpeechModel, cepstra: CepstraMatrix) -> ProbMatrix:
    """Relative mixture probability of each frame, computed in log space."""
    if cepstra.n_mfcc != model.means.shape[1]:
        raise ConfigMismatchError(
            f"config mismatch: cepstra have {cepstra.n_mfcc} coefficients, "
            f"model expects {model.means.shape[1]}"
        )
    resp, _, n_dead = _posterior_rows(model.priors, model.means, model.variances, cepstra.values)
    return ProbMatrix(values=resp, underflow_frames=n_dead)


def estimate_ideal_speech(model: SpeechModel, cepstra: CepstraMatrix) -> SpectraMatrix:
    """Posterior-weighted mixture of average spectra, one row per frame."""
    posteriors = mixture_posteriors(model, cepstra)
    values = posteriors.values @ model.avg_spectrum
    bin_hz = model.frame_config.sample_rate_hz / model.frame_config.n_fft
    return SpectraMatrix(values=values, bin_hz=bin_hz, mean_normalized=True)


def extract_training_features(
    buffers, config: FrameConfig
) -> tuple[CepstraMatrix, SpectraMatrix]:
    """Concatenate aligned (cepstra, spectra) over a corpus of recordings."""
    ceps, specs = [], []
    bin_hz = config.sample_rate_hz / config.n_fft
    for audio in buffers:
        if audio.sample_rate_hz != config.sample_rate_hz:
            raise ConfigMismatchError(
                f"config mismatch: recording at {audio.sample_rate_hz} Hz, "
                f"config expects {config.sample_rate_hz} Hz"
            )
        c, s = analysis_features(audio, config)
        ceps.append(c.values)
        specs.append(s.values)
    if not ceps:
        raise InsufficientTrainingDataError("insufficient training data: empty corpus")
    return (
        CepstraMatrix(values=np.vstack(ceps)),
        SpectraMatrix(values=np.vstack(specs), bin_hz=bin_hz, mean_normalized=True),
    )


def save_model(path, model: SpeechModel) -> None:
    """Persist the model in the RPLGMM1 container format."""
    write_container(
        path,
        MODEL_MAGIC,
        arrays={
            "priors": model.priors,
            "means": model.means,
            "variances": model.variances,
            "avg_spectrum": model.avg_spectrum,
        },
        meta={
            "frame_config": model.frame_config.to_dict(),
            "variance_clamped": model.variance_clamped,
        },
    )


def load_model(path) -> SpeechModel:
    """Load a model written by save_model."""
    arrays, meta = read_container(path, MODEL_MAGIC)
    return SpeechModel(
        priors=arrays["priors"],
        means=arrays["means"],
        variances=arrays["variances"],
        avg_spectrum=arrays["avg_spectrum"],
        frame_config=FrameConfig.from_dict(meta["frame_config"]),
        variance_clamped=bool(meta.get("variance_clamped", False)),
    )
