"""Multinomial logistic regression trained by full-batch gradient descent."""

from __future__ import annotations

import numpy as np

L2 = 1e-4
STEP = 0.1
EPOCHS = 500


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, Y: np.ndarray,
                  l2: float = L2) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradient.

    ``Y`` is one-hot (n x K); the bias is not penalised.
    """
    n = X.shape[0]
    Z = X @ W + b
    Z = Z - Z.max(axis=1, keepdims=True)
    logp = Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))
    loss = -(Y * logp).sum() / n + 0.5 * l2 * float((W * W).sum())
    R = np.exp(logp) - Y
    return loss, X.T @ R / n + l2 * W, R.mean(axis=0)


def standardize_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return mu, sd


def fit(X: np.ndarray, y: np.ndarray, n_classes: int, l2: float = L2, step: float = STEP,
        epochs: int = EPOCHS, trace: list | None = None) -> dict:
    mu, sd = standardize_stats(X)
    Xs = (X - mu) / sd
    Y = np.eye(n_classes)[y]
    W = np.zeros((X.shape[1], n_classes))
    b = np.zeros(n_classes)
    for _ in range(epochs):
        loss, gW, gb = loss_and_grad(W, b, Xs, Y, l2)
        if trace is not None:
            trace.append(loss)
        W -= step * gW
        b -= step * gb
    return {"mu": mu, "sd": sd, "W": W, "b": b}


def predict_proba(params: dict, X: np.ndarray) -> np.ndarray:
    Xs = (np.atleast_2d(X) - params["mu"]) / params["sd"]
    return softmax(Xs @ params["W"] + params["b"])
