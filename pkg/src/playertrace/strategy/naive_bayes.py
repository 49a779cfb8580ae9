"""Gaussian naive Bayes with Laplace-smoothed class priors."""

from __future__ import annotations

import numpy as np

VAR_SMOOTHING = 1e-9


def fit(X: np.ndarray, y: np.ndarray, n_classes: int, var_smoothing: float = VAR_SMOOTHING) -> dict:
    """Per-class feature means and variances.

    Every class variance is inflated by ``var_smoothing * max(1, largest
    column variance)`` so constant features do not produce zero variances.
    Priors are ``(n_c + 1) / (n + K)`` over the K classes seen in training;
    unseen classes get no likelihood and predict with probability 0.
    """
    d = X.shape[1]
    present = np.array([np.any(y == c) for c in range(n_classes)])
    eps = var_smoothing * max(1.0, float(X.var(axis=0).max()) if len(X) else 1.0)
    mean = np.zeros((n_classes, d))
    var = np.ones((n_classes, d))
    counts = np.bincount(y, minlength=n_classes).astype(float)
    for c in np.flatnonzero(present):
        Xc = X[y == c]
        mean[c] = Xc.mean(axis=0)
        var[c] = Xc.var(axis=0) + eps
    k = int(present.sum())
    prior = np.where(present, (counts + 1.0) / (len(y) + k), 0.0)
    return {"present": present, "log_prior": np.log(np.where(present, prior, 1.0)),
            "mean": mean, "var": var}


def predict_proba(params: dict, X: np.ndarray) -> np.ndarray:
    mean, var = params["mean"], params["var"]
    present = np.asarray(params["present"], dtype=bool)
    X = np.atleast_2d(X)
    ll = -0.5 * (np.log(2 * np.pi * var)[None, :, :]
                 + (X[:, None, :] - mean[None, :, :]) ** 2 / var[None, :, :]).sum(axis=2)
    joint = ll + params["log_prior"][None, :]
    joint[:, ~present] = -np.inf
    joint -= joint.max(axis=1, keepdims=True)
    p = np.exp(joint)
    return p / p.sum(axis=1, keepdims=True)
