"""L2-regularized logistic regression fit by damped Newton iterations.

The loss/gradient pair is exposed as a pure function so it can be
checked against finite differences.  Features are expected standardized;
the intercept is not penalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

MAX_NEWTON_ITER = 100
GRAD_TOL = 1e-6


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_grad(
    params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> Tuple[float, np.ndarray]:
    """Mean logistic loss and its gradient.

    ``params`` is [w_1..w_d, intercept]; y is 0/1; the penalty
    (l2/2)*||w||^2 excludes the intercept.
    """
    n, d = X.shape
    w = params[:d]
    b = params[d]
    z = X @ w + b
    # log(1 + exp(-m)) with m = (2y-1) * z, computed stably
    m = np.where(y == 1, z, -z)
    loss = float(np.logaddexp(0.0, -m).mean()) + 0.5 * l2 * float(w @ w)
    p = _sigmoid(z)
    resid = p - y
    grad = np.empty(d + 1)
    grad[:d] = X.T @ resid / n + l2 * w
    grad[d] = resid.mean()
    return loss, grad


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    l2: float = 0.1,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_NEWTON_ITER,
) -> Tuple[np.ndarray, Dict[str, float]]:
    """Minimize the regularized logistic loss to gradient norm < tol.

    Returns (params, info); info["converged"] is False when the best
    iterate is returned after max_iter without reaching tol.
    """
    n, d = X.shape
    params = np.zeros(d + 1)
    Xb = np.hstack([X, np.ones((n, 1))])
    reg = np.full(d + 1, l2)
    reg[d] = 0.0
    loss, grad = logistic_loss_grad(params, X, y, l2)
    for iteration in range(max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            return params, {"converged": True, "iterations": iteration, "grad_norm": gnorm, "loss": loss}
        p = _sigmoid(Xb @ params)
        w_diag = np.maximum(p * (1.0 - p), 1e-10)
        H = (Xb * w_diag[:, None]).T @ Xb / n + np.diag(reg)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            H = H + np.eye(d + 1) * 1e-8
            step = np.linalg.solve(H, grad)
        # backtracking keeps the Newton step monotone on this convex loss
        t = 1.0
        for _ in range(40):
            new_params = params - t * step
            new_loss, new_grad = logistic_loss_grad(new_params, X, y, l2)
            if new_loss <= loss - 1e-14:
                break
            t *= 0.5
        else:
            return params, {"converged": False, "iterations": iteration, "grad_norm": gnorm, "loss": loss}
        params, loss, grad = new_params, new_loss, new_grad
    gnorm = float(np.linalg.norm(grad))
    return params, {
        "converged": bool(gnorm < tol),
        "iterations": max_iter,
        "grad_norm": gnorm,
        "loss": loss,
    }


@dataclass
class LogisticModel:
    weights: np.ndarray
    intercept: float
    l2: float
    fit_info: Dict[str, float] = field(default_factory=dict)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(X @ self.weights + self.intercept)

    def to_json(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "l2": self.l2,
            "fit_info": {k: float(v) for k, v in self.fit_info.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LogisticModel":
        return cls(
            weights=np.array(obj["weights"], dtype=np.float64),
            intercept=float(obj["intercept"]),
            l2=float(obj["l2"]),
            fit_info=obj.get("fit_info", {}),
        )


def train_logistic(X: np.ndarray, y: np.ndarray, l2: float) -> LogisticModel:
    params, info = fit_logistic(X, y, l2)
    d = X.shape[1]
    return LogisticModel(weights=params[:d].copy(), intercept=float(params[d]), l2=l2, fit_info=info)
