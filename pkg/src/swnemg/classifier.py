"""Multinomial logistic regression without penalty, balanced class weights.

The weighted mean cross-entropy is minimised with full-batch Newton steps
and a backtracking line search. The first present class in ``class_order``
is the reference and keeps a zero score, which removes the softmax
over-parameterisation and makes the Hessian non-singular for
non-separable data. Weights start at zero, so a fit is a deterministic
function of the data.

Columns are centred and scaled before optimisation purely for numerical
conditioning. The objective is unpenalised, so its minimiser is invariant
to that affine change of variables and the returned weights are mapped
back to the original feature units.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import TrainingError
from .kinematics import CLASS_ORDER, Label

MAX_ITER = 6000
GRAD_TOL = 1e-6
#: Bias given to classes absent from the training data; keeps weights finite.
ABSENT_BIAS = -1e9


@dataclass
class LogisticModel:
    """``weights[k] = [w_k1 .. w_kD, bias_k]`` for class ``class_order[k]``."""

    weights: np.ndarray
    class_order: tuple = CLASS_ORDER
    n_iter: int = 0
    grad_norm: float = 0.0
    converged: bool = True
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.class_order = tuple(Label.parse(c) for c in self.class_order)
        if len(set(self.class_order)) != len(self.class_order):
            raise ValueError("class_order labels must be distinct")
        if self.weights.shape[0] != len(self.class_order):
            raise ValueError("one weight row per class expected")

    @property
    def dimension(self) -> int:
        return self.weights.shape[1] - 1

    def decision_function(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.dimension:
            raise ValueError(f"model expects {self.dimension} features, got {x.shape[1]}")
        return x @ self.weights[:, :-1].T + self.weights[:, -1]

    def predict_proba(self, features) -> np.ndarray:
        return softmax(self.decision_function(features), axis=1)

    def to_dict(self) -> dict:
        return {
            "class_order": [c.name.lower() for c in self.class_order],
            "dimension": self.dimension,
            "weights": self.weights.ravel().tolist(),
            "training_meta": {"n_iter": self.n_iter, "grad_norm": self.grad_norm,
                              "converged": self.converged, **self.extra},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LogisticModel":
        order = tuple(Label.parse(c) for c in data["class_order"])
        w = np.asarray(data["weights"], dtype=float).reshape(len(order), data["dimension"] + 1)
        meta = dict(data.get("training_meta", {}))
        return cls(w, order, n_iter=meta.pop("n_iter", 0), grad_norm=meta.pop("grad_norm", 0.0),
                   converged=meta.pop("converged", True), extra=meta)


def balanced_weights(y: np.ndarray, classes) -> np.ndarray:
    """Per-sample weights ``n / (K_present * n_c)``."""
    counts = {c: int(np.sum(y == c)) for c in classes}
    present = [c for c in classes if counts[c] > 0]
    per_class = {c: len(y) / (len(present) * counts[c]) for c in present}
    return np.array([per_class[v] for v in y.tolist()])


def _objective(theta, xs, onehot, sw, n_free):
    d1 = xs.shape[1]
    scores = np.zeros((xs.shape[0], n_free + 1))
    scores[:, 1:] = xs @ theta.reshape(n_free, d1).T
    lse = logsumexp(scores, axis=1)
    loss = -np.sum(sw * (np.sum(scores * onehot, axis=1) - lse))
    return loss, np.exp(scores - lse[:, None])


def fit(features, targets, max_iter: int = MAX_ITER, class_weight: str | None = "balanced",
        class_order=CLASS_ORDER, tol: float = GRAD_TOL) -> LogisticModel:
    """Fit the softmax model by Newton's method.

    Parameters
    ----------
    features : array (n, D)
    targets : array (n,) of labels (``Label`` or their integer values)
    max_iter : int
        Hard cap on Newton iterations.
    class_weight : {"balanced", None}
    tol : float
        Stop once the infinity norm of the gradient falls below this.

    Raises
    ------
    TrainingError
        If fewer than two classes are present.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray([int(v) for v in np.asarray(targets).ravel()], dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != len(y):
        raise ValueError(f"features {x.shape} and {len(y)} targets do not line up")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    order = tuple(Label.parse(c) for c in class_order)
    present = [c for c in order if np.any(y == int(c))]
    if len(present) < 2:
        raise TrainingError(f"need at least two classes to train, found {len(present)}")
    if class_weight == "balanced":
        sw = balanced_weights(y, [int(c) for c in order])
    elif class_weight is None:
        sw = np.ones(len(y))
    else:
        raise ValueError(f"class_weight must be 'balanced' or None, got {class_weight!r}")
    sw = sw / sw.sum()

    n, d = x.shape
    center = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    xs = np.hstack([(x - center) / scale, np.ones((n, 1))])
    onehot = np.stack([(y == int(c)).astype(float) for c in present], axis=1)
    n_free = len(present) - 1
    d1 = d + 1
    theta = np.zeros(n_free * d1)

    loss, prob = _objective(theta, xs, onehot, sw, n_free)
    it = 0
    converged = False
    while True:
        resid = (prob - onehot)[:, 1:] * sw[:, None]
        grad = (resid.T @ xs).ravel()
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < tol:
            converged = True
            break
        if it >= max_iter:
            break
        hess = np.empty((n_free * d1, n_free * d1))
        p = prob[:, 1:]
        for k in range(n_free):
            for j in range(k, n_free):
                coef = sw * p[:, k] * ((k == j) - p[:, j])
                block = (xs * coef[:, None]).T @ xs
                hess[k * d1:(k + 1) * d1, j * d1:(j + 1) * d1] = block
                hess[j * d1:(j + 1) * d1, k * d1:(k + 1) * d1] = block.T
        try:
            step = np.linalg.solve(hess, grad)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        decrease = float(grad @ step)
        if decrease <= 0:  # not a descent direction; fall back to the gradient
            step, decrease = grad, float(grad @ grad)
        while True:
            cand = theta - t * step
            new_loss, new_prob = _objective(cand, xs, onehot, sw, n_free)
            if new_loss <= loss - 1e-4 * t * decrease or t < 1e-10:
                break
            t *= 0.5
        it += 1
        if new_loss > loss:  # line search stalled
            break
        theta, loss, prob = cand, new_loss, new_prob

    # back to original feature units
    ws = theta.reshape(n_free, d1)
    coef = ws[:, :d] / scale
    bias = ws[:, d] - coef @ center
    weights = np.zeros((len(order), d1))
    free_rows = [order.index(c) for c in present[1:]]
    weights[free_rows, :d] = coef
    weights[free_rows, d] = bias
    for c in order:
        if c not in present:
            weights[order.index(c), d] = ABSENT_BIAS
    return LogisticModel(weights, order, n_iter=it, grad_norm=gnorm, converged=converged)


def predict(model: LogisticModel, features) -> np.ndarray:
    """Arg-max class per row; ties go to the earlier entry of ``class_order``."""
    scores = model.decision_function(features)
    codes = np.array([int(c) for c in model.class_order])
    return codes[np.argmax(scores, axis=1)]


def accuracy(predicted, actual) -> float:
    """Fraction of correct predictions."""
    p = np.asarray(predicted).ravel()
    a = np.asarray(actual).ravel()
    if p.size == 0 or p.size != a.size:
        raise ValueError(f"need equal non-empty label arrays, got {p.size} and {a.size}")
    return float(np.mean(p == a))
