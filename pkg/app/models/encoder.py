"""
Encoder f, projection to unit-norm embeddings, and learnable class prototypes
"""

from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple
import numpy as np

from app.core import autograd as ag
from app.core.autograd import GradientTape, Tensor
from app.core.exceptions import ConfigError, ShapeError


Activation = Literal["relu", "tanh"]

_ACTIVATIONS = {"relu": ag.relu, "tanh": ag.tanh}

# hidden bias and projection bias scale at init
HIDDEN_BIAS = 0.01
PROJECTION_BIAS_STD = 0.1


@dataclass
class EncoderParams:
    """
    MLP weights: hidden layers followed by a linear projection.

    weights[i] has shape (in, out), biases[i] has shape (1, out); the last
    pair is the projection to the embedding space.
    """

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: Activation = "relu"

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation '{self.activation}'")
        if not self.weights or len(self.weights) != len(self.biases):
            raise ConfigError("encoder needs one bias per weight matrix and at least a projection")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (1, w.shape[1]):
                raise ShapeError(f"layer {i}: weight {w.shape} and bias {b.shape} do not match")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ShapeError(f"layer {i}: input width {w.shape[0]} != previous output {self.weights[i - 1].shape[1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ShapeError(f"layer {i}: non-finite parameters")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def embed_dim(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def widths(self) -> List[int]:
        """Input width followed by hidden widths"""
        return [w.shape[0] for w in self.weights]

    def arrays(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def names(self) -> List[str]:
        out = []
        for i in range(len(self.weights)):
            out.extend([f"encoder.W{i}", f"encoder.b{i}"])
        return out

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
        )


@dataclass
class Prototypes:
    """One unit-norm embedding per class; row k carries label k"""

    vectors: np.ndarray

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 2:
            raise ShapeError(f"prototypes must be (K >= 2) x embed_dim, got {self.vectors.shape}")

    @property
    def class_count(self) -> int:
        return self.vectors.shape[0]

    @property
    def labels(self) -> np.ndarray:
        return np.arange(self.class_count)

    def renormalize(self) -> None:
        """Rescale rows to unit norm in place"""
        self.vectors /= np.linalg.norm(self.vectors, axis=1, keepdims=True)

    def copy(self) -> "Prototypes":
        return Prototypes(self.vectors.copy())


def init_model(
    seed: int,
    widths: Sequence[int],
    embed_dim: int,
    class_count: int,
    activation: Activation = "relu",
) -> Tuple[EncoderParams, Prototypes]:
    """
    He-scaled random encoder and maximally spread prototypes.

    Hidden biases start slightly positive and the projection bias is drawn
    at random, so a zero row or a row with no active hidden unit still maps
    to a nonzero pre-normalization output.

    widths is the input width followed by the hidden widths; an input-only
    list gives a linear encoder.
    """

    widths = list(widths)
    if not widths or any(w < 1 for w in widths) or embed_dim < 1:
        raise ConfigError(f"invalid encoder dimensions widths={widths} embed_dim={embed_dim}")
    if class_count < 2:
        raise ConfigError(f"need at least 2 classes, got {class_count}")

    rng = np.random.default_rng(seed)
    dims = widths + [embed_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.full((1, fan_out), HIDDEN_BIAS))

    raw = rng.normal(size=(class_count, embed_dim))
    if class_count <= embed_dim:
        # orthonormal rows via Gram-Schmidt (QR)
        q, _ = np.linalg.qr(raw.T)
        vectors = q.T.copy()
    else:
        vectors = raw
    prototypes = Prototypes(vectors)
    prototypes.renormalize()
    biases[-1] = rng.normal(0.0, PROJECTION_BIAS_STD, size=(1, embed_dim))

    return EncoderParams(weights, biases, activation), prototypes


def _fallback_direction(dim: int) -> np.ndarray:
    """First basis vector, the embedding of a row whose projection vanishes"""
    direction = np.zeros(dim)
    direction[0] = 1.0
    return direction


def _parameter(array: np.ndarray, tape: Optional[GradientTape], name: str) -> Tensor:
    return tape.watch(array, name=name) if tape is not None else Tensor(array, name=name)


def forward(
    params: EncoderParams,
    batch: np.ndarray,
    tape: Optional[GradientTape] = None,
) -> Tuple[Tensor, Tensor]:
    """Penultimate representation and unit-norm embedding of each row"""

    hidden = penultimate(params, batch, tape)
    names = params.names()
    W = _parameter(params.weights[-1], tape, names[-2])
    B = _parameter(params.biases[-1], tape, names[-1])
    embedding = ag.l2_normalize(hidden @ W + B, fallback=_fallback_direction(params.embed_dim))
    return hidden, embedding


def embed(params: EncoderParams, batch: np.ndarray, tape: Optional[GradientTape] = None) -> Tensor:
    """Z = f(batch), rows l2-normalized"""
    return forward(params, batch, tape)[1]


def penultimate(params: EncoderParams, batch: np.ndarray, tape: Optional[GradientTape] = None) -> Tensor:
    """Last hidden layer output (input itself for a linear encoder), not normalized"""

    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != params.input_dim:
        raise ShapeError(f"encoder expects (rows, {params.input_dim}) input, got {batch.shape}")

    act = _ACTIVATIONS[params.activation]
    names = params.names()
    hidden = Tensor(batch)
    for i, (w, b) in enumerate(zip(params.weights[:-1], params.biases[:-1])):
        W = _parameter(w, tape, names[2 * i])
        B = _parameter(b, tape, names[2 * i + 1])
        hidden = act(hidden @ W + B)
    return hidden


def prototype_matrix(prototypes: Prototypes, tape: Optional[GradientTape] = None) -> Tensor:
    """Z_c on the tape, normalized in-graph so perturbed rows stay on the sphere"""
    return ag.l2_normalize(_parameter(prototypes.vectors, tape, "prototypes"))
