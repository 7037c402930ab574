"""RBF-kernel SVM over roomprint features: grid search, voting, metrics."""

import json
from dataclasses import dataclass

import numpy as np
from sklearn.model_selection import StratifiedKFold
from sklearn.svm import SVC

from .bands import Roomprint
from .container import read_container, write_container
from .errors import FeatureMismatchError, InsufficientClassSupportError

SVM_MAGIC = b"RPLSVM1"

# One point per decade across the published endpoints.
DEFAULT_GRID = tuple(10.0**k for k in range(-4, 4))
DEFAULT_FOLDS = 5
SVC_TOL = 1e-4


@dataclass
class SvmModel:
    """One-vs-one RBF SVM plus the z-score scaler fitted at train time."""

    classes: list
    n_support: np.ndarray        # per class, in classes order
    support_vectors: np.ndarray  # grouped by class
    dual_coef: np.ndarray        # (K-1, n_SV), libsvm layout
    intercepts: np.ndarray       # per class pair (i<j)
    gamma: float
    c: float
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    feature_meta: dict
    cv_accuracy: float = float("nan")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]


@dataclass(frozen=True)
class Metrics:
    """Macro precision/recall, overall accuracy (percent) and confusion counts."""

    precision: float
    recall: float
    accuracy: float
    confusion: np.ndarray
    classes: list

    def to_dict(self) -> dict:
        return {
            "precision": round(self.precision, 1),
            "recall": round(self.recall, 1),
            "accuracy": round(self.accuracy, 1),
            "classes": list(self.classes),
            "confusion": self.confusion.astype(int).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        return (
            "Precision  Recall  Accuracy\n"
            f"{self.precision:9.1f}  {self.recall:6.1f}  {self.accuracy:8.1f}"
        )


def _feature_matrix(features: list) -> np.ndarray:
    first = features[0]
    for rp in features[1:]:
        if (
            len(rp.rt60_s) != len(first.rt60_s)
            or rp.alpha != first.alpha
            or rp.fraction != first.fraction
            or rp.log_transformed != first.log_transformed
        ):
            raise FeatureMismatchError(
                "feature mismatch: roomprints differ in band count, alpha, "
                "octave fraction or log transform"
            )
    return np.vstack([rp.feature_vector() for rp in features])


def _roomprint_meta(rp: Roomprint) -> dict:
    return {
        "n_bands": int(len(rp.rt60_s)),
        "alpha": float(rp.alpha),
        "fraction": int(rp.fraction),
        "log_transformed": bool(rp.log_transformed),
    }


def _fit_svc(x: np.ndarray, y: np.ndarray, c: float, gamma: float) -> SVC:
    svc = SVC(C=c, kernel="rbf", gamma=gamma, tol=SVC_TOL, cache_size=256)
    svc.fit(x, y)
    return svc


def train_classifier(
    features: list,
    labels: list,
    grid_c=DEFAULT_GRID,
    grid_gamma=DEFAULT_GRID,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
) -> SvmModel:
    """Grid-searched RBF SVM with stratified k-fold model selection.

    Features are z-scored with statistics of the full training set. Every
    (c, gamma) cell is scored with the same fold assignment; the best cell
    (ties to smaller c, then smaller gamma) is refit on all data.
    """
    if len(features) != len(labels):
        raise ValueError("features and labels must have equal length")
    if not features:
        raise InsufficientClassSupportError("insufficient class support: empty training set")
    x_raw = _feature_matrix(features)
    y = np.asarray(labels)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise InsufficientClassSupportError("insufficient class support: need >= 2 classes")
    if counts.min() < folds:
        worst = classes[np.argmin(counts)]
        raise InsufficientClassSupportError(
            f"insufficient class support: class {worst!r} has {counts.min()} samples, "
            f"{folds}-fold CV needs at least {folds}"
        )

    mean = x_raw.mean(axis=0)
    std = np.maximum(x_raw.std(axis=0), 1e-12)
    x = (x_raw - mean) / std

    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    fold_sets = list(splitter.split(x, y))

    best = None
    for c in sorted(grid_c):
        for gamma in sorted(grid_gamma):
            hits = 0
            for train_idx, val_idx in fold_sets:
                svc = _fit_svc(x[train_idx], y[train_idx], c, gamma)
                hits += int(np.sum(svc.predict(x[val_idx]) == y[val_idx]))
            accuracy = hits / len(y)
            if best is None or accuracy > best[0]:
                best = (accuracy, c, gamma)
    cv_accuracy, c_best, gamma_best = best

    svc = _fit_svc(x, y, c_best, gamma_best)
    return SvmModel(
        classes=list(svc.classes_),
        n_support=svc.n_support_.copy(),
        support_vectors=svc.support_vectors_.copy(),
        dual_coef=svc.dual_coef_.copy(),
        intercepts=svc.intercept_.copy(),
        gamma=float(svc._gamma),
        c=float(c_best),
        scaler_mean=mean,
        scaler_std=std,
        feature_meta=_roomprint_meta(features[0]),
        cv_accuracy=float(cv_accuracy),
    )


def _rbf_kernel(x: np.ndarray, sv: np.ndarray, gamma: float) -> np.ndarray:
    d2 = np.sum(x**2, axis=1)[:, None] - 2.0 * x @ sv.T + np.sum(sv**2, axis=1)
    return np.exp(-gamma * np.maximum(d2, 0.0))


def decision_values(model: SvmModel, x_scaled: np.ndarray) -> np.ndarray:
    """One-vs-one decision values, pair order (0,1), (0,2), ..., (K-2, K-1)."""
    k = model.n_classes
    starts = np.concatenate([[0], np.cumsum(model.n_support)])
    kernel = _rbf_kernel(x_scaled, model.support_vectors, model.gamma)
    out = np.empty((x_scaled.shape[0], k * (k - 1) // 2))
    p = 0
    for i in range(k):
        for j in range(i + 1, k):
            block_i = slice(starts[i], starts[i + 1])
            block_j = slice(starts[j], starts[j + 1])
            out[:, p] = (
                kernel[:, block_i] @ model.dual_coef[j - 1, block_i]
                + kernel[:, block_j] @ model.dual_coef[i, block_j]
                + model.intercepts[p]
            )
            p += 1
    return out


def _scale(model: SvmModel, x: np.ndarray) -> np.ndarray:
    return (x - model.scaler_mean) / model.scaler_std


def predict(model: SvmModel, feature: Roomprint):
    """Most pairwise votes; ties broken by aggregate signed margin."""
    vec = feature.feature_vector()
    if vec.size != model.n_features:
        raise FeatureMismatchError(
            f"feature mismatch: {vec.size} bands, model expects {model.n_features}"
        )
    return predict_matrix(model, vec[None, :])[0]


def predict_matrix(model: SvmModel, x_raw: np.ndarray) -> np.ndarray:
    """Vectorized predict over raw (unscaled) feature rows."""
    if x_raw.shape[1] != model.n_features:
        raise FeatureMismatchError(
            f"feature mismatch: {x_raw.shape[1]} features, model expects {model.n_features}"
        )
    k = model.n_classes
    dec = decision_values(model, _scale(model, x_raw))
    votes = np.zeros((x_raw.shape[0], k))
    margins = np.zeros((x_raw.shape[0], k))
    p = 0
    for i in range(k):
        for j in range(i + 1, k):
            toward_i = dec[:, p] > 0
            votes[toward_i, i] += 1
            votes[~toward_i, j] += 1
            margins[:, i] += dec[:, p]
            margins[:, j] -= dec[:, p]
            p += 1
    out = np.empty(x_raw.shape[0], dtype=object)
    for row in range(x_raw.shape[0]):
        top = votes[row].max()
        tied = np.flatnonzero(votes[row] == top)
        winner = tied[np.argmax(margins[row, tied])] if tied.size > 1 else tied[0]
        out[row] = model.classes[winner]
    return out


def metrics_from_predictions(y_true, y_pred, classes) -> Metrics:
    """Confusion counts plus macro precision/recall and overall accuracy."""
    classes = list(classes)
    index = {label: i for i, label in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[index[t], index[p]] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class_precision = np.where(
            confusion.sum(axis=0) > 0, np.diag(confusion) / confusion.sum(axis=0), 0.0
        )
        per_class_recall = np.where(
            confusion.sum(axis=1) > 0, np.diag(confusion) / confusion.sum(axis=1), 0.0
        )
    return Metrics(
        precision=100.0 * float(per_class_precision.mean()),
        recall=100.0 * float(per_class_recall.mean()),
        accuracy=100.0 * float(np.diag(confusion).sum() / max(confusion.sum(), 1)),
        confusion=confusion,
        classes=classes,
    )


def evaluate(model: SvmModel, features: list, labels: list) -> Metrics:
    """Confusion matrix and summary metrics on a labeled test set.

    Precision and recall are macro-averaged; on a balanced test set the
    micro average coincides with the accuracy column.
    """
    if not features:
        raise ValueError("test set must be nonempty")
    x = _feature_matrix(features)
    y_pred = predict_matrix(model, x)
    return metrics_from_predictions(list(labels), list(y_pred), model.classes)


def kkt_max_violation(model: SvmModel, features_raw: np.ndarray, labels) -> float:
    """Max KKT residual over all one-vs-one subproblems of a trained model.

    For each pair: points with alpha = 0 need y*f >= 1, interior alphas need
    y*f = 1, bound alphas (|alpha| = C) need y*f <= 1. Requires the original
    training data.
    """
    x = _scale(model, np.asarray(features_raw, dtype=np.float64))
    y = np.asarray(labels)
    k = model.n_classes
    starts = np.concatenate([[0], np.cumsum(model.n_support)])
    owners = _match_support_rows(model, x)
    worst = 0.0
    p = 0
    for i in range(k):
        for j in range(i + 1, k):
            sel = np.flatnonzero((y == model.classes[i]) | (y == model.classes[j]))
            local = {g: l for l, g in enumerate(sel)}
            signs = np.where(y[sel] == model.classes[i], 1.0, -1.0)
            dec = decision_values(model, x[sel])[:, p]
            alphas = np.zeros(sel.size)
            for cls, row in ((i, j - 1), (j, i)):
                for sv_idx in range(starts[cls], starts[cls + 1]):
                    g = owners[sv_idx]
                    if g in local:
                        alphas[local[g]] = abs(model.dual_coef[row, sv_idx])
            yf = signs * dec
            at_zero = alphas <= 1e-12
            at_bound = alphas >= model.c - 1e-9
            interior = ~at_zero & ~at_bound
            if np.any(at_zero):
                worst = max(worst, float(np.max(1.0 - yf[at_zero], initial=0.0)))
            if np.any(at_bound):
                worst = max(worst, float(np.max(yf[at_bound] - 1.0, initial=0.0)))
            if np.any(interior):
                worst = max(worst, float(np.max(np.abs(yf[interior] - 1.0))))
            p += 1
    return worst


def _match_support_rows(model: SvmModel, x_scaled: np.ndarray) -> np.ndarray:
    """Index of the training row each support vector came from (-1 if absent)."""
    owners = np.full(model.support_vectors.shape[0], -1, dtype=np.int64)
    for sv_idx, sv in enumerate(model.support_vectors):
        hits = np.flatnonzero(np.all(np.isclose(x_scaled, sv, atol=1e-12), axis=1))
        if hits.size:
            owners[sv_idx] = hits[0]
    return owners


def save_classifier(path, model: SvmModel) -> None:
    """Persist in the RPLSVM1 container format."""
    write_container(
        path,
        SVM_MAGIC,
        arrays={
            "n_support": model.n_support.astype(np.float64),
            "support_vectors": model.support_vectors,
            "dual_coef": model.dual_coef,
            "intercepts": model.intercepts,
            "scaler_mean": model.scaler_mean,
            "scaler_std": model.scaler_std,
        },
        meta={
            "classes": [str(c) for c in model.classes],
            "gamma": model.gamma,
            "c": model.c,
            "feature_meta": model.feature_meta,
            "cv_accuracy": model.cv_accuracy,
        },
    )


def load_classifier(path) -> SvmModel:
    arrays, meta = read_container(path, SVM_MAGIC)
    return SvmModel(
        classes=list(meta["classes"]),
        n_support=arrays["n_support"].astype(np.int64),
        support_vectors=arrays["support_vectors"],
        dual_coef=arrays["dual_coef"],
        intercepts=arrays["intercepts"],
        gamma=float(meta["gamma"]),
        c=float(meta["c"]),
        scaler_mean=arrays["scaler_mean"],
        scaler_std=arrays["scaler_std"],
        feature_meta=dict(meta["feature_meta"]),
        cv_accuracy=float(meta.get("cv_accuracy", float("nan"))),
    )
