"""Blind multi-band RT60 roomprint estimation and environment classification.

Pipeline: reverberant speech -> GMM-based blind channel magnitude estimate
-> minimum-phase filter recovery -> fractional-octave Schroeder RT60
analysis -> RBF-SVM room classification.
"""

from .audio import AudioBuffer, convolve_rir, read_wav, resample, write_wav
from .bands import (
    DecayCurve,
    Filterbank,
    Roomprint,
    apply_bandpass,
    compute_roomprint,
    design_filterbank,
    estimate_rt60,
    schroeder_decay,
)
from .channel import ChannelEstimate, estimate_channel
from .classify import (
    Metrics,
    SvmModel,
    evaluate,
    load_classifier,
    predict,
    save_classifier,
    train_classifier,
)
from .dataset import DatasetManifest, ManifestEntry, load_manifest, save_manifest, synth_dataset
from .dsp import (
    CepstraMatrix,
    FrameConfig,
    FrameSet,
    SpectraMatrix,
    analysis_features,
    frame_and_window,
    log_power_spectra,
    mean_normalize_rows,
    mfcc_rasta,
)
from .errors import RoomprintError
from .filters import (
    ComplexResponse,
    DigitalFilter,
    fit_minimum_phase_filter,
    impulse_response,
    minimum_phase_target,
)
from .gmm import (
    ProbMatrix,
    SpeechModel,
    estimate_ideal_speech,
    extract_training_features,
    load_model,
    mixture_posteriors,
    save_model,
    train_speech_model,
)
from .pipeline import ExperimentConfig, roomprint_from_recording, run_experiment

__version__ = "0.1.0"
