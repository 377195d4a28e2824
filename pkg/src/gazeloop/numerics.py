"""Dense numeric kernels: softmax, cross-entropy, Adam, finite-difference oracle.

Vectors and matrices are plain float64 numpy arrays throughout the package;
every public operation here keeps entries finite and runs at 64-bit
precision so the finite-difference gradient checks have headroom.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Probability floor inside cross_entropy; keeps the loss finite when a
# predicted probability collapses to zero.
PROB_FLOOR = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def as_vector(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    return v


def assert_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")


def softmax(logits) -> np.ndarray:
    """Stable softmax of a single logit vector (max-subtraction)."""
    x = as_vector(logits)
    if x.size == 0:
        raise ValueError("softmax of an empty vector is undefined")
    shifted = x - x.max()
    e = np.exp(shifted)
    return e / e.sum()


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax for an (n, C) matrix; n may be zero."""
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {x.shape}")
    if x.shape[0] == 0:
        return x.copy()
    if x.shape[1] == 0:
        raise ValueError("softmax rows need at least one column")
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, target_class: int) -> float:
    """-log p[target], with p clamped to PROB_FLOOR so the loss stays finite."""
    p = as_vector(probs)
    if not 0 <= target_class < p.size:
        raise ValueError(f"target class {target_class} out of range for {p.size} classes")
    return float(-np.log(max(p[target_class], PROB_FLOOR)))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp.
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class AdamState:
    """Adam optimizer accumulators for a named set of parameter arrays."""

    lr: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, lr: float, beta1: float = ADAM_BETA1,
                   beta2: float = ADAM_BETA2, eps: float = ADAM_EPS) -> "AdamState":
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
        return state


def adam_step(params: dict, grads: dict, state: AdamState) -> tuple[dict, AdamState]:
    """One Adam update with bias correction. Mutates params/state in place."""
    if set(params) != set(grads):
        raise ValueError("parameter and gradient names differ")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f at x, one coordinate at a time.

    f must be pure and deterministic; x is not modified.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    work = x.copy()
    for idx in np.ndindex(x.shape):
        orig = work[idx]
        work[idx] = orig + h
        up = f(work)
        work[idx] = orig - h
        down = f(work)
        work[idx] = orig
        grad[idx] = (up - down) / (2.0 * h)
    return grad


def finite_diff_grad_params(f, params: dict, h: float = 1e-5) -> dict:
    """finite_diff_grad over a dict of named arrays; f takes the whole dict."""
    grads = {}
    for name in params:
        def f_one(arr, _name=name):
            stash = params[_name]
            params[_name] = arr
            try:
                return f(params)
            finally:
                params[_name] = stash
        grads[name] = finite_diff_grad(f_one, params[name], h)
    return grads


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-6) -> float:
    """max |a-n| / max(|a|, |n|, floor), the gradcheck discrepancy measure."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / denom))
