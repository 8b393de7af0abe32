"""MLP embedding network with explicit backpropagation.

The network maps raw proposal vectors to unit-norm embeddings: a stack of
rectified dense layers, a linear projection, then row-wise L2 normalization.
Gradients are propagated by hand, including the normalization layer, so the
loss modules can treat embeddings as free vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NoCacheError, ShapeMismatchError, ZeroVectorError

_ZERO_NORM_FLOOR = 1e-30

# The projection layer starts an order of magnitude below He scale. With a
# normalized output, parameter steps rotate the unit embedding at a rate
# ~ lr/||pre_norm||^2, so a small initial pre-norm magnitude is what makes
# the small-lr SGD budget move the embedding at all.
_PROJECTION_INIT_SCALE = 0.1


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit Euclidean norm, preserving direction."""
    norm = float(np.linalg.norm(v))
    if norm < _ZERO_NORM_FLOOR:
        raise ZeroVectorError(f"cannot normalize vector with norm {norm!r}")
    return v / norm

def l2_normalize_backward(v: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Chain-rule through u = v/||v||: keeps the component of grad_out
    orthogonal to u, scaled by 1/||v||."""
    norm = float(np.linalg.norm(v))
    if norm < _ZERO_NORM_FLOOR:
        raise ZeroVectorError(f"cannot normalize vector with norm {norm!r}")
    u = v / norm
    return (grad_out - np.dot(u, grad_out) * u) / norm

def normalize_rows(mat: np.ndarray) -> np.ndarray:
    """Row-wise l2_normalize."""
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms < _ZERO_NORM_FLOOR):
        raise ZeroVectorError("matrix contains a row with near-zero norm")
    return mat / norms[:, None]


@dataclass(frozen=True)
class EmbeddingConfig:
    """Layer plan: rectified hidden layers, then a linear projection.

    The desk default has no hidden layer; the task's optimal embedding is
    linear and a deeper net only slows convergence under the fixed
    learning-rate budget. Hidden layers are fully supported.
    """

    input_dim: int = 64
    hidden_dims: tuple[int, ...] = ()
    embed_dim: int = 32

    def validate(self) -> None:
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ConfigError("embedding: all layer dims must be >= 1")
        if self.embed_dim < 2:
            raise ConfigError("embedding.embed_dim: must be >= 2")

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim, *self.hidden_dims, self.embed_dim]


@dataclass
class ParameterGradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


class EmbeddingNetwork:
    """Dense rectifier network with a unit-norm output layer.

    One instance is shared by both streams of a scene pair: a single
    forward over the stacked proposals realizes the weight sharing.
    The activation cache written by forward() is consumed by the next
    backward(); read-only inference goes through embed().
    """

    def __init__(self, config: EmbeddingConfig, rng: np.random.Generator):
        config.validate()
        self.config = config
        dims = config.layer_dims
        # He-scaled init through the rectifiers, small final projection.
        self.weights = [
            rng.normal(0.0, np.sqrt(2.0 / dims[i]), size=(dims[i], dims[i + 1]))
            for i in range(len(dims) - 1)
        ]
        self.weights[-1] = self.weights[-1] * _PROJECTION_INIT_SCALE
        self.biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
        self._cache: dict | None = None

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def forward(self, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Run the network, caching activations for one backward pass.

        Returns (pre_norm, normalized); normalized rows are unit vectors.
        """
        inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if inputs.shape[1] != self.config.input_dim:
            raise ShapeMismatchError(
                f"expected {self.config.input_dim} input columns, got {inputs.shape[1]}"
            )
        activations = [inputs]
        relu_masks = []
        a = inputs
        last = self.num_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            if i < last:
                mask = z > 0.0
                relu_masks.append(mask)
                a = np.where(mask, z, 0.0)
                activations.append(a)
            else:
                a = z
        pre_norm = a
        norms = np.linalg.norm(pre_norm, axis=1)
        if np.any(norms < _ZERO_NORM_FLOOR):
            raise ZeroVectorError("degenerate embedding: a pre-norm row has zero norm")
        normalized = pre_norm / norms[:, None]
        self._cache = {
            "activations": activations,
            "relu_masks": relu_masks,
            "pre_norm": pre_norm,
            "norms": norms,
            "normalized": normalized,
        }
        return pre_norm, normalized

    def embed(self, inputs: np.ndarray) -> np.ndarray:
        """Inference-only forward; no cache is written, safe to share."""
        inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if inputs.shape[1] != self.config.input_dim:
            raise ShapeMismatchError(
                f"expected {self.config.input_dim} input columns, got {inputs.shape[1]}"
            )
        a = inputs
        last = self.num_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            a = np.maximum(z, 0.0) if i < last else z
        return normalize_rows(a)

    def backward(self, grad_wrt_normalized: np.ndarray) -> ParameterGradients:
        """Backpropagate a gradient on the normalized outputs; consumes the cache."""
        if self._cache is None:
            raise NoCacheError("backward() requires a preceding forward()")
        cache = self._cache
        self._cache = None

        grad = np.atleast_2d(np.asarray(grad_wrt_normalized, dtype=np.float64))
        pre_norm = cache["pre_norm"]
        if grad.shape != pre_norm.shape:
            raise ShapeMismatchError(
                f"upstream gradient shape {grad.shape} != output shape {pre_norm.shape}"
            )
        norms = cache["norms"]
        u = cache["normalized"]
        # Row-wise normalization backward: remove the radial component.
        radial = np.sum(u * grad, axis=1, keepdims=True)
        d = (grad - radial * u) / norms[:, None]

        weight_grads: list[np.ndarray] = [np.empty(0)] * self.num_layers
        bias_grads: list[np.ndarray] = [np.empty(0)] * self.num_layers
        activations = cache["activations"]
        relu_masks = cache["relu_masks"]
        for i in range(self.num_layers - 1, -1, -1):
            weight_grads[i] = activations[i].T @ d
            bias_grads[i] = d.sum(axis=0)
            if i > 0:
                d = d @ self.weights[i].T
                d = np.where(relu_masks[i - 1], d, 0.0)
        return ParameterGradients(weights=weight_grads, biases=bias_grads)

    def gradient_list(self, grads: ParameterGradients) -> list[np.ndarray]:
        out = []
        for w, b in zip(grads.weights, grads.biases):
            out.extend((w, b))
        return out
