"""Multinomial logistic models used as stand-ins for the deep predictors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_softmax, softmax


def _standardize(X: np.ndarray):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std < 1e-12] = 1.0
    return mean, std


@dataclass
class TabularPredictor:
    """Softmax regression with an L2 penalty, fit by L-BFGS.

    ``fit`` with integer labels maximizes the likelihood; ``fit_costs``
    minimizes the expected cost ``sum_k sum_c pi(c | x_k) cost[k, c]``.
    """

    n_classes: int
    l2: float = 1e-2
    max_iter: int = 500
    weights: Optional[np.ndarray] = None  # (d + 1, n_classes), last row is the bias
    mean: Optional[np.ndarray] = field(default=None, repr=False)
    std: Optional[np.ndarray] = field(default=None, repr=False)

    def _design(self, X):
        X = (np.asarray(X, dtype=float) - self.mean) / self.std
        return np.hstack([X, np.ones((X.shape[0], 1))])

    def _optimize(self, Z, objective):
        d = Z.shape[1]
        x0 = np.zeros(d * self.n_classes)
        res = minimize(objective, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": self.max_iter})
        self.weights = res.x.reshape(d, self.n_classes)
        return self

    def _penalty(self, W):
        Wp = W.copy()
        Wp[-1] = 0.0  # bias is not penalized
        return 0.5 * self.l2 * np.sum(Wp ** 2), self.l2 * Wp

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        self.mean, self.std = _standardize(X)
        Z = self._design(X)
        n = Z.shape[0]
        onehot = np.zeros((n, self.n_classes))
        onehot[np.arange(n), y] = 1.0

        def objective(w):
            W = w.reshape(Z.shape[1], self.n_classes)
            logp = log_softmax(Z @ W, axis=1)
            pen, gpen = self._penalty(W)
            loss = -np.sum(onehot * logp) / n + pen
            grad = Z.T @ (np.exp(logp) - onehot) / n + gpen
            return loss, grad.ravel()

        return self._optimize(Z, objective)

    def fit_costs(self, X, costs):
        X = np.asarray(X, dtype=float)
        costs = np.asarray(costs, dtype=float)
        self.mean, self.std = _standardize(X)
        Z = self._design(X)
        n = Z.shape[0]

        def objective(w):
            W = w.reshape(Z.shape[1], self.n_classes)
            P = softmax(Z @ W, axis=1)
            expected = np.sum(P * costs, axis=1, keepdims=True)
            pen, gpen = self._penalty(W)
            loss = float(np.mean(expected)) + pen
            grad = Z.T @ (P * (costs - expected)) / n + gpen
            return loss, grad.ravel()

        return self._optimize(Z, objective)

    def predict_proba(self, X) -> np.ndarray:
        if self.weights is None:
            raise RuntimeError("predictor is not fitted")
        return softmax(self._design(X) @ self.weights, axis=1)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)
