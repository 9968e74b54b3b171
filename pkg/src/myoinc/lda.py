"""Linear discriminant analysis with class-incremental extension.

The shared covariance is the plain sum of per-class covariances. Adding a
class adds its covariance to that sum and refreshes the cached Cholesky
factor; statistics of classes already in the model are never touched.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

from myoinc.errors import DataError, DimensionError, ModelError, SingularModelError
from myoinc.labels import MotionLabel

log = logging.getLogger(__name__)

RIDGE_FACTOR = 1e-6
RIDGE_MAX_FACTOR = 1e-2
POOLING_MODES = ("sum", "weighted")


@dataclass(frozen=True, eq=False)
class ClassModel:
    label: MotionLabel
    mean: np.ndarray
    cov: np.ndarray
    count: int

    @property
    def dim(self) -> int:
        return len(self.mean)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def fit_class(samples, label: MotionLabel) -> ClassModel:
    """Sample mean and unbiased covariance of one class.

    ``samples`` is a sequence of :class:`~myoinc.features.FeatureVector` or
    an ``(n, d)`` array.
    """
    rows = [getattr(s, "values", s) for s in samples]
    if len(rows) < 2:
        raise DataError(f"class {label.name!r} needs at least 2 samples, got {len(rows)}")
    dims = {np.shape(r) for r in rows}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise DimensionError(f"class {label.name!r}: mixed sample dimensions {sorted(dims)}")
    x = np.asarray(rows, dtype=np.float64)
    n = x.shape[0]
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return ClassModel(label, _freeze(mean), _freeze(cov), n)


@dataclass(frozen=True, eq=False)
class PooledModel:
    """Deployable classifier. Immutable; :func:`add_class` returns a new one."""

    classes: tuple[ClassModel, ...]
    pooled_cov: np.ndarray
    ridge: float
    pooling: str = "sum"
    # derived caches
    priors: np.ndarray = field(init=False, repr=False)
    _coef: np.ndarray = field(init=False, repr=False)  # rows: solve(xi, mu_k)
    _intercept: np.ndarray = field(init=False, repr=False)
    _chol: tuple = field(init=False, repr=False)

    def __post_init__(self):
        counts = np.array([c.count for c in self.classes], dtype=np.float64)
        priors = counts / counts.sum()
        d = self.dim
        try:
            chol = linalg.cho_factor(self.pooled_cov + self.ridge * np.eye(d), lower=True)
        except linalg.LinAlgError as exc:
            raise SingularModelError(f"pooled covariance not positive definite: {exc}") from exc
        means = np.array([c.mean for c in self.classes])
        coef = linalg.cho_solve(chol, means.T).T
        intercept = -0.5 * np.einsum("kd,kd->k", coef, means) + np.log(priors)
        for name, val in (("priors", priors), ("_coef", coef),
                          ("_intercept", intercept), ("_chol", chol)):
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.pooled_cov.shape[0]

    @property
    def labels(self) -> tuple[MotionLabel, ...]:
        return tuple(c.label for c in self.classes)

    def class_model(self, label: MotionLabel) -> ClassModel:
        for c in self.classes:
            if c.label == label:
                return c
        raise KeyError(label)

    def discriminants(self, x) -> np.ndarray:
        return discriminants(self, x)

    def predict(self, x):
        return predict(self, x)


def _check_classes(classes: Sequence[ClassModel]) -> int:
    if not classes:
        raise ModelError("no classes")
    d = classes[0].dim
    for c in classes:
        if c.dim != d or c.cov.shape != (d, d):
            raise DimensionError(f"class {c.label.name!r} has dimension {c.dim}, expected {d}")
    ids = [c.label.id for c in classes]
    if len(set(ids)) != len(ids):
        raise ModelError(f"duplicate class ids in {ids}")
    return d


def _pool(classes: Sequence[ClassModel], pooling: str) -> np.ndarray:
    d = classes[0].dim
    if pooling == "sum":
        # left-to-right accumulation from zero so incremental adds reproduce it bit-for-bit
        total = np.zeros((d, d))
        for c in classes:
            total = total + c.cov
        return total
    if pooling == "weighted":
        scatter = np.zeros((d, d))
        for c in classes:
            scatter = scatter + (c.count - 1) * c.cov
        dof = sum(c.count for c in classes) - len(classes)
        return scatter / dof
    raise ModelError(f"unknown pooling mode {pooling!r}; use one of {POOLING_MODES}")


def _factorize(classes, pooled: np.ndarray, pooling: str) -> PooledModel:
    d = pooled.shape[0]
    scale = float(np.trace(pooled)) / d
    if not scale > 0:
        # all classes have zero spread: fall back to an absolute unit scale
        scale = 1.0
    ridge = RIDGE_FACTOR * scale
    while True:
        try:
            return PooledModel(tuple(classes), _freeze(pooled), ridge, pooling)
        except SingularModelError:
            ridge *= 10
            if ridge > RIDGE_MAX_FACTOR * scale * (1 + 1e-9):
                raise
            log.warning("pooled covariance ill-conditioned; ridge raised to %g", ridge)


def build_pooled(class_models: Iterable[ClassModel], pooling: str = "sum") -> PooledModel:
    classes = list(class_models)
    _check_classes(classes)
    if len(classes) < 2:
        raise ModelError("a pooled model needs at least 2 classes")
    return _factorize(classes, _pool(classes, pooling), pooling)


def add_class(model: PooledModel, new_class: ClassModel) -> PooledModel:
    """Fold one new class into the pooled covariance; existing classes are reused as-is."""
    if new_class.dim != model.dim:
        raise DimensionError(f"new class has dimension {new_class.dim}, model has {model.dim}")
    if any(c.label.id == new_class.label.id for c in model.classes):
        raise ModelError(f"class id {new_class.label.id} already in model")
    classes = model.classes + (new_class,)
    if model.pooling == "sum":
        pooled = model.pooled_cov + new_class.cov
    else:
        old_dof = sum(c.count for c in model.classes) - len(model.classes)
        scatter = model.pooled_cov * old_dof + (new_class.count - 1) * new_class.cov
        pooled = scatter / (old_dof + new_class.count - 1)
    return _factorize(classes, pooled, model.pooling)


def _as_matrix(model: PooledModel, x) -> tuple[np.ndarray, bool]:
    v = np.asarray(getattr(x, "values", x), dtype=np.float64)
    single = v.ndim == 1
    v = np.atleast_2d(v)
    if v.shape[-1] != model.dim:
        raise DimensionError(f"input dimension {v.shape[-1]}, model expects {model.dim}")
    return v, single


def discriminants(model: PooledModel, x) -> np.ndarray:
    """Linear scores ``mu_k' S^-1 x - mu_k' S^-1 mu_k / 2 + ln pi_k`` per class.

    Accepts one vector (returns shape ``(K,)``) or a batch ``(n, d)``
    (returns ``(n, K)``).
    """
    v, single = _as_matrix(model, x)
    scores = v @ model._coef.T + model._intercept
    return scores[0] if single else scores


def predict_index(model: PooledModel, x) -> np.ndarray:
    scores = np.atleast_2d(discriminants(model, x))
    # argmax returns the first maximum; order classes by id so ties go to the lowest id
    order = np.argsort([c.label.id for c in model.classes], kind="stable")
    return order[np.argmax(scores[:, order], axis=1)]


def predict(model: PooledModel, x):
    """Label of the largest discriminant; a batch returns a list of labels."""
    v, single = _as_matrix(model, x)
    idx = predict_index(model, v)
    labels = [model.classes[i].label for i in idx]
    return labels[0] if single else labels


_TABLE = {
    "lda": lambda W, Q, S: (W, W, 0, 0),
    "qda": lambda W, Q, S: (W + W, W + W, W, 0),
    "svm-linear": lambda W, Q, S: ((W + 1) * Q - 1, (W + 2) * Q, 0, 0),
    "svm-quadratic": lambda W, Q, S: ((W + 2) * Q - 1, (W + 2) * Q, Q, 0),
    "knn": lambda W, Q, S: (2 * S * (W + 1) - 6, 0, S * W, S),
}
_ALIASES = {
    "svm(l)": "svm-linear", "svm_l": "svm-linear", "svml": "svm-linear",
    "svm(q)": "svm-quadratic", "svm_q": "svm-quadratic", "svmq": "svm-quadratic",
    "k-nn": "knn", "k_nn": "knn",
}
CLASSIFIER_KINDS = tuple(_TABLE)


def complexity_report(classifier_kind: str, W: int, Q: int | None = None,
                      S: int | None = None) -> dict[str, int]:
    """Per-decision operation counts (adds, muls, squares, roots) for a
    W-dimensional feature vector, Q support vectors or S stored samples."""
    kind = classifier_kind.lower()
    kind = _ALIASES.get(kind, kind)
    if kind not in _TABLE:
        raise ValueError(f"unknown classifier {classifier_kind!r}; choose from {CLASSIFIER_KINDS}")
    if W < 1:
        raise ValueError("W must be >= 1")
    if kind.startswith("svm") and Q is None:
        raise ValueError(f"{kind} needs the support-vector count Q")
    if kind == "knn" and S is None:
        raise ValueError("knn needs the training-sample count S")
    adds, muls, squares, roots = _TABLE[kind](W, Q, S)
    return {"adds": adds, "muls": muls, "squares": squares, "roots": roots}
