"""Minimal dense-layer toolkit: explicit forward/backward passes and Adam.

Parameters live in a flat ``dict[str, np.ndarray]`` keyed by dotted names so
the whole parameter set serializes and regularizes uniformly. Everything is
float64; gradients are validated against central finite differences in the
test suite, which is the reason this stays hand-rolled instead of pulling in
an autograd framework.
"""

from __future__ import annotations

import numpy as np

Params = dict[str, np.ndarray]


def he_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))


def add_linear(params: Params, rng: np.random.Generator, prefix: str,
               fan_in: int, fan_out: int) -> None:
    params[f"{prefix}.W"] = he_init(rng, fan_in, fan_out)
    params[f"{prefix}.b"] = np.zeros(fan_out)


def linear_forward(x: np.ndarray, params: Params, prefix: str) -> np.ndarray:
    return x @ params[f"{prefix}.W"] + params[f"{prefix}.b"]


def linear_backward(dout: np.ndarray, x: np.ndarray, params: Params,
                    grads: Params, prefix: str) -> np.ndarray:
    grads[f"{prefix}.W"] += x.T @ dout
    grads[f"{prefix}.b"] += dout.sum(axis=0)
    return dout @ params[f"{prefix}.W"].T


def add_mlp(params: Params, rng: np.random.Generator, prefix: str,
            fan_in: int, hidden: int, fan_out: int) -> None:
    """One-hidden-layer perceptron: Linear -> ReLU -> Linear."""
    add_linear(params, rng, f"{prefix}.l1", fan_in, hidden)
    add_linear(params, rng, f"{prefix}.l2", hidden, fan_out)


def mlp_forward(x: np.ndarray, params: Params, prefix: str) -> tuple[np.ndarray, dict]:
    pre = linear_forward(x, params, f"{prefix}.l1")
    hidden = np.maximum(pre, 0.0)
    out = linear_forward(hidden, params, f"{prefix}.l2")
    return out, {"x": x, "pre": pre, "hidden": hidden}


def mlp_backward(dout: np.ndarray, cache: dict, params: Params, grads: Params,
                 prefix: str) -> np.ndarray:
    dhidden = linear_backward(dout, cache["hidden"], params, grads, f"{prefix}.l2")
    dpre = dhidden * (cache["pre"] > 0.0)
    return linear_backward(dpre, cache["x"], params, grads, f"{prefix}.l1")


def zero_grads(params: Params) -> Params:
    return {k: np.zeros_like(v) for k, v in params.items()}


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, y: np.ndarray, clamp: float = 1e-6,
                  ) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits.

    The clamp guards the log against zero probabilities; the gradient is the
    plain softmax one (bounded on its own), so confidently-wrong rows keep
    pushing back instead of stalling at the clamp boundary.
    """
    probs = softmax(logits)
    n = logits.shape[0]
    p_true = probs[np.arange(n), y]
    clipped = np.clip(p_true, clamp, 1.0 - clamp)
    loss = float(-np.log(clipped).mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    return loss, dlogits


def l2_norm(params: Params) -> float:
    total = 0.0
    for v in params.values():
        total += float(np.sum(v * v))
    return float(np.sqrt(total))


def l2_norm_backward(params: Params, grads: Params, scale: float) -> None:
    """Add scale * d||theta||_2 / dtheta, i.e. scale * theta / ||theta||."""
    norm = l2_norm(params)
    if norm == 0.0:
        return
    for k, v in params.items():
        grads[k] += scale * v / norm


class Adam:
    def __init__(self, params: Params, lr: float = 0.01, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: Params) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for key, param in self.params.items():
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            param -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
