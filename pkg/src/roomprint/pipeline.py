"""End-to-end orchestration: recording -> channel -> filter -> roomprint -> label."""

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, read_wav
from .bands import Filterbank, Roomprint, compute_roomprint, design_filterbank
from .channel import ChannelEstimate, estimate_channel
from .classify import Metrics, SvmModel, evaluate, train_classifier
from .dataset import DatasetManifest, recording_path
from .errors import RoomprintError
from .filters import (
    DEFAULT_ORDER,
    DEFAULT_TARGET_REFINE,
    fit_minimum_phase_filter,
    impulse_response,
    minimum_phase_target,
    recommended_length,
)
from .gmm import SpeechModel

# A file whose roomprint degrades in more bands than this is excluded from
# the experiment rather than imputed.
MAX_FAILED_BANDS = 2

DEFAULT_BAND_RANGE = (100.0, 8000.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Swept parameters of one classification experiment."""

    octave_fraction: int = 4
    alpha: float = 1.5
    n_b: int = DEFAULT_ORDER
    n_a: int = DEFAULT_ORDER
    target_refine: int = DEFAULT_TARGET_REFINE
    grid_c: tuple = tuple(10.0**k for k in range(-4, 4))
    grid_gamma: tuple = tuple(10.0**k for k in range(-4, 4))
    folds: int = 5
    seed: int = 0
    train_condition: str = "near"   # near | far | mixed
    test_condition: str = "near"
    log_transform: bool = False
    band_range_hz: tuple = DEFAULT_BAND_RANGE

    def conditions(self, which: str) -> tuple:
        value = self.train_condition if which == "train" else self.test_condition
        return ("near", "far") if value == "mixed" else (value,)


@dataclass
class ExperimentResult:
    metrics: Metrics
    classifier: SvmModel
    skipped: list = field(default_factory=list)
    n_train: int = 0
    n_test: int = 0


def default_filterbank(config: ExperimentConfig, sample_rate_hz: int) -> Filterbank:
    return design_filterbank(
        config.octave_fraction,
        config.band_range_hz[0],
        config.band_range_hz[1],
        sample_rate_hz,
    )


def rir_estimate_from_channel(
    estimate: ChannelEstimate,
    sample_rate_hz: int,
    n_b: int = DEFAULT_ORDER,
    n_a: int = DEFAULT_ORDER,
    target_refine: int = DEFAULT_TARGET_REFINE,
) -> AudioBuffer:
    """Minimum-phase filter fit and impulse-response synthesis."""
    target = minimum_phase_target(estimate, refine=target_refine)
    filt = fit_minimum_phase_filter(target, n_b, n_a)
    length = recommended_length(filt, sample_rate_hz)
    return impulse_response(filt, length, sample_rate_hz)


def roomprint_from_recording(
    recording: AudioBuffer,
    model: SpeechModel,
    bank: Filterbank,
    alpha: float,
    n_b: int = DEFAULT_ORDER,
    n_a: int = DEFAULT_ORDER,
    target_refine: int = DEFAULT_TARGET_REFINE,
    log_transform: bool = False,
    cache: "Cache | None" = None,
) -> Roomprint:
    """Full single-recording pipeline."""
    estimate = None
    if cache is not None:
        estimate = cache.get_channel(recording, model)
    if estimate is None:
        estimate = estimate_channel(recording, model)
        if cache is not None:
            cache.put_channel(recording, model, estimate)
    rir = rir_estimate_from_channel(
        estimate, recording.sample_rate_hz, n_b, n_a, target_refine
    )
    return compute_roomprint(rir, bank, alpha, log_transform)


class Cache:
    """Content-hash cache for channel estimates, reused across sweeps."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _channel_key(self, recording: AudioBuffer, model: SpeechModel) -> Path:
        h = hashlib.sha256()
        h.update(recording.samples.tobytes())
        h.update(str(recording.sample_rate_hz).encode())
        h.update(model.fingerprint().encode())
        return self.root / f"chan_{h.hexdigest()[:32]}.npz"

    def get_channel(self, recording, model):
        path = self._channel_key(recording, model)
        if not path.exists():
            return None
        from .channel import load_estimate

        return load_estimate(path)

    def put_channel(self, recording, model, estimate) -> None:
        from .channel import save_estimate

        save_estimate(self._channel_key(recording, model), estimate)


def run_experiment(
    config: ExperimentConfig,
    manifest: DatasetManifest,
    recordings_dir,
    model: SpeechModel,
    cache_dir=None,
) -> ExperimentResult:
    """Train and evaluate one classification experiment over a synthesized dataset.

    Per-file pipeline failures and over-degraded roomprints are collected in
    the skipped report instead of aborting the run; aggregation follows the
    manifest order, so results are deterministic for fixed inputs and seed.
    """
    manifest.validate()
    bank = default_filterbank(config, manifest.sample_rate_hz)
    cache = Cache(cache_dir) if cache_dir is not None else None

    prints = {"train": [], "test": []}
    labels = {"train": [], "test": []}
    skipped = []
    for split in ("train", "test"):
        for entry in manifest.select(split, config.conditions(split)):
            path = recording_path(recordings_dir, entry)
            try:
                recording = read_wav(path)
                rp = roomprint_from_recording(
                    recording,
                    model,
                    bank,
                    config.alpha,
                    n_b=config.n_b,
                    n_a=config.n_a,
                    target_refine=config.target_refine,
                    log_transform=config.log_transform,
                    cache=cache,
                )
            except RoomprintError as exc:
                skipped.append({"path": str(path), "reason": str(exc)})
                continue
            if len(rp.failed_bands) > MAX_FAILED_BANDS or not np.all(np.isfinite(rp.rt60_s)):
                skipped.append(
                    {"path": str(path), "reason": f"{len(rp.failed_bands)} bands failed RT fit"}
                )
                continue
            prints[split].append(rp)
            labels[split].append(entry.room)

    classifier = train_classifier(
        prints["train"],
        labels["train"],
        grid_c=config.grid_c,
        grid_gamma=config.grid_gamma,
        folds=config.folds,
        seed=config.seed,
    )
    metrics = evaluate(classifier, prints["test"], labels["test"])
    return ExperimentResult(
        metrics=metrics,
        classifier=classifier,
        skipped=skipped,
        n_train=len(prints["train"]),
        n_test=len(prints["test"]),
    )
