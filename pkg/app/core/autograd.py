"""
Numeric core - reverse-mode differentiation over float64 arrays

A Tensor wraps an immutable float64 numpy array. Operations whose inputs
descend from a watched parameter are recorded, in evaluation order, on that
parameter's GradientTape; replaying the tape backward yields exact gradients
of a scalar output with respect to the watched parameters.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union
import numpy as np

from app.core.exceptions import (
    DegenerateVectorError,
    DomainError,
    EngineError,
    NonFiniteError,
    ShapeError,
    UnreachableParameterError,
)


EPS_NORM = 1e-12

Backward = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """Immutable float64 value, optionally recorded on a GradientTape"""

    __slots__ = ("value", "tape", "name")

    # numpy defers binary operators to Tensor's reflected methods
    __array_ufunc__ = None

    def __init__(self, value, tape: Optional["GradientTape"] = None, name: Optional[str] = None):
        if isinstance(value, Tensor):
            value = value.value
        array = np.array(value, dtype=np.float64)
        self._init(array, tape, name)

    def _init(self, array: np.ndarray, tape, name) -> None:
        if not np.all(np.isfinite(array)):
            raise NonFiniteError(f"non-finite entries in {name or 'tensor'} of shape {array.shape}")
        array.flags.writeable = False
        self.value = array
        self.tape = tape
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray, tape=None, name=None) -> "Tensor":
        out = cls.__new__(cls)
        out._init(np.asarray(array, dtype=np.float64), tape, name)
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.value.reshape(()))

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return divide(self, other)

    def __rtruediv__(self, other):
        return divide(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, taped={self.tape is not None})"


class _Record:
    __slots__ = ("op", "output", "inputs", "backward")

    def __init__(self, op: str, output: Tensor, inputs: Tuple[Tensor, ...], backward: Backward):
        self.op = op
        self.output = output
        self.inputs = inputs
        self.backward = backward


class GradientTape:
    """
    Ordered record of primitive operations.

    Parameters enter through watch(); watching the same array twice returns
    the same leaf, so several forward passes in one step share gradients.
    """

    def __init__(self):
        self._records: List[_Record] = []
        self._watched: Dict[int, Tuple[np.ndarray, Tensor]] = {}
        self._leaf_ids: set = set()

    def __len__(self) -> int:
        return len(self._records)

    @property
    def ops(self) -> List[str]:
        return [record.op for record in self._records]

    def watch(self, array: np.ndarray, name: Optional[str] = None) -> Tensor:
        """Register a parameter array and return its leaf tensor"""
        if not isinstance(array, np.ndarray):
            raise TypeError(f"watch() expects a numpy array, got {type(array).__name__}")
        hit = self._watched.get(id(array))
        if hit is not None:
            return hit[1]
        leaf = Tensor(array, name=name)
        leaf.tape = self
        self._watched[id(array)] = (array, leaf)
        self._leaf_ids.add(id(leaf))
        return leaf

    def leaf(self, parameter: Union[Tensor, np.ndarray]) -> Tensor:
        """Resolve a parameter (array or leaf tensor) to its leaf on this tape"""
        if isinstance(parameter, Tensor):
            if id(parameter) in self._leaf_ids and parameter.tape is self:
                return parameter
            raise UnreachableParameterError(f"{parameter!r} is not a watched leaf of this tape")
        hit = self._watched.get(id(parameter))
        if hit is None or hit[0] is not parameter:
            shape = getattr(parameter, "shape", None)
            raise UnreachableParameterError(f"parameter of shape {shape} was never watched by this tape")
        return hit[1]

    def _record(self, op: str, output: Tensor, inputs: Tuple[Tensor, ...], backward: Backward) -> None:
        output.tape = self
        self._records.append(_Record(op, output, inputs, backward))

    def gradient(
        self,
        output: Tensor,
        parameters: Sequence[Union[Tensor, np.ndarray]],
    ) -> List[np.ndarray]:
        """Exact gradients of a scalar output, one array per parameter, shape-matched"""

        leaves = [self.leaf(p) for p in parameters]

        if output.size != 1:
            raise ShapeError(f"gradient needs a scalar output, got shape {output.shape}")
        if output.tape is None:
            # constant output
            return [np.zeros_like(leaf.value) for leaf in leaves]
        if output.tape is not self:
            raise UnreachableParameterError("output was recorded on a different tape")

        grads: Dict[int, np.ndarray] = {id(output): np.ones_like(output.value)}
        for record in reversed(self._records):
            upstream = grads.pop(id(record.output), None)
            if upstream is None:
                continue
            for tensor, local in zip(record.inputs, record.backward(upstream)):
                if local is None or tensor.tape is not self:
                    continue
                key = id(tensor)
                grads[key] = grads[key] + local if key in grads else local

        return [
            np.array(grads[id(leaf)], dtype=np.float64).reshape(leaf.shape)
            if id(leaf) in grads else np.zeros_like(leaf.value)
            for leaf in leaves
        ]


def grad(output: Tensor, parameters: Sequence[Union[Tensor, np.ndarray]]) -> List[np.ndarray]:
    """Gradients of a scalar output w.r.t. parameters watched on its tape"""
    tape = output.tape
    if tape is None:
        tapes = {id(p.tape): p.tape for p in parameters if isinstance(p, Tensor) and p.tape is not None}
        if len(tapes) != 1:
            raise UnreachableParameterError("output is a constant and no parameter tape can be resolved")
        tape = next(iter(tapes.values()))
    return tape.gradient(output, parameters)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validated 2-D float64 copy of values"""
    array = np.array(values, dtype=np.float64)
    if array.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        rows = np.flatnonzero(~np.all(np.isfinite(array), axis=1))
        raise NonFiniteError(f"{name} has non-finite entries in rows {rows.tolist()}")
    return array


def _common_tape(tensors: Sequence[Tensor]) -> Optional[GradientTape]:
    tape = None
    for tensor in tensors:
        if tensor.tape is None:
            continue
        if tape is None:
            tape = tensor.tape
        elif tensor.tape is not tape:
            raise EngineError("cannot combine tensors recorded on different tapes")
    return tape


def _emit(op: str, value: np.ndarray, inputs: Tuple[Tensor, ...], backward: Backward) -> Tensor:
    out = Tensor._wrap(value, name=op)
    tape = _common_tape(inputs)
    if tape is not None:
        tape._record(op, out, inputs, backward)
    return out


def _unbroadcast(grad_value: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad_value.ndim > len(shape):
        grad_value = grad_value.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad_value.shape[axis] != 1:
            grad_value = grad_value.sum(axis=axis, keepdims=True)
    return grad_value


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _emit(
        "add", a.value + b.value, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _emit(
        "sub", a.value - b.value, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _emit(
        "mul", a.value * b.value, (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
    )


def divide(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if np.any(b.value == 0):
        raise DomainError("division by zero")
    quotient = a.value / b.value
    return _emit(
        "divide", quotient, (a, b),
        lambda g: (_unbroadcast(g / b.value, a.shape), _unbroadcast(-g * quotient / b.value, b.shape)),
    )


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.value)
    return _emit("exp", y, (a,), lambda g: (g * y,))


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.value <= 0):
        raise DomainError("log of a non-positive value")
    return _emit("log", np.log(a.value), (a,), lambda g: (g / a.value,))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _emit("square", a.value * a.value, (a,), lambda g: (2.0 * g * a.value,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.value)
    return _emit("tanh", y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    active = a.value > 0
    return _emit("relu", np.where(active, a.value, 0.0), (a,), lambda g: (g * active,))


# ---------------------------------------------------------------------------
# structural
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """Matrix product of two 2-D tensors"""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _emit(
        "matmul", a.value @ b.value, (a, b),
        lambda g: (g @ b.value.T, a.value.T @ g),
    )


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _emit("transpose", a.value.T, (a,), lambda g: (g.T,))


def sum(a, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _emit("sum", np.sum(a.value, axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if a.size == 0:
        raise DomainError("mean of an empty tensor")
    count = a.size if axis is None else a.shape[axis]
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def take_rows(a, index) -> Tensor:
    """Rows of a 2-D tensor selected by integer index (with repeats)"""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        out = np.zeros_like(a.value)
        np.add.at(out, index, g)
        return (out,)

    return _emit("take_rows", a.value[index], (a,), backward)


def concat_rows(tensors: Sequence) -> Tensor:
    """Stack 2-D tensors along the row axis"""
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat_rows needs at least one tensor")
    widths = {p.shape[1] for p in parts if p.ndim == 2}
    if any(p.ndim != 2 for p in parts) or len(widths) != 1:
        raise ShapeError(f"concat_rows: incompatible shapes {[p.shape for p in parts]}")
    bounds = np.cumsum([p.shape[0] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=0))

    return _emit("concat_rows", np.concatenate([p.value for p in parts], axis=0), tuple(parts), backward)


# ---------------------------------------------------------------------------
# reductions used by the losses
# ---------------------------------------------------------------------------

def softmax(a, axis: int = -1) -> Tensor:
    """Max-shifted softmax along an axis"""
    a = as_tensor(a)
    if a.size == 0 or a.shape[axis] == 0:
        raise DomainError("softmax of an empty vector")
    shifted = a.value - np.max(a.value, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)
    return _emit(
        "softmax", y, (a,),
        lambda g: (y * (g - np.sum(g * y, axis=axis, keepdims=True)),),
    )


def l2_normalize(a, axis: int = -1, eps: float = EPS_NORM, fallback: Optional[np.ndarray] = None) -> Tensor:
    """
    Unit-norm rescaling along an axis.

    Slices with norm <= eps raise, unless a unit fallback direction is given;
    those slices then take the fallback and pass no gradient.
    """
    a = as_tensor(a)
    norms = np.sqrt(np.sum(a.value * a.value, axis=axis, keepdims=True))
    degenerate = norms <= eps
    if np.any(degenerate) and fallback is None:
        raise DegenerateVectorError(f"cannot normalize a vector with norm <= {eps:g}")
    safe = np.where(degenerate, 1.0, norms)
    y = a.value / safe
    if np.any(degenerate):
        y = np.where(degenerate, np.asarray(fallback, dtype=np.float64), y)
    return _emit(
        "l2_normalize", y, (a,),
        lambda g: (np.where(degenerate, 0.0, (g - y * np.sum(g * y, axis=axis, keepdims=True)) / safe),),
    )


def logsumexp(a, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Stabilized log-sum-exp over the last axis, keeping that axis (size 1).

    Entries where mask is False are left out of the sum.
    """
    a = as_tensor(a)
    x = a.value
    admissible = np.ones(x.shape, dtype=bool) if mask is None else np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    if x.shape[-1] == 0 or not np.all(np.any(admissible, axis=-1)):
        raise DomainError("logsumexp over an empty set of entries")
    masked = np.where(admissible, x, -np.inf)
    peak = np.max(masked, axis=-1, keepdims=True)
    e = np.where(admissible, np.exp(masked - peak), 0.0)
    total = np.sum(e, axis=-1, keepdims=True)
    weights = e / total
    return _emit("logsumexp", peak + np.log(total), (a,), lambda g: (g * weights,))


def pairwise_sq_dists(a, b) -> Tensor:
    """Squared Euclidean distance between every row of a and every row of b"""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"pairwise_sq_dists: incompatible shapes {a.shape} and {b.shape}")
    diff = a.value[:, None, :] - b.value[None, :, :]

    def backward(g):
        weighted = g[:, :, None] * diff
        return 2.0 * weighted.sum(axis=1), -2.0 * weighted.sum(axis=0)

    return _emit("pairwise_sq_dists", np.sum(diff * diff, axis=-1), (a, b), backward)


# ---------------------------------------------------------------------------
# plain numpy (no gradients)
# ---------------------------------------------------------------------------

def entropy(p) -> float:
    """Shannon entropy in nats with 0 ln 0 := 0"""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DomainError(f"entropy needs a non-empty vector, got shape {p.shape}")
    return float(row_entropies(p[None, :])[0])


def row_entropies(probs) -> np.ndarray:
    """Entropy of each row of a matrix of probability vectors"""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] == 0:
        raise DomainError(f"row_entropies needs a 2-D matrix, got shape {probs.shape}")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0) or np.any(probs > 1):
        raise DomainError("probabilities must lie in [0, 1]")
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-9):
        raise DomainError("probabilities must sum to 1")
    safe = np.where(probs > 0, probs, 1.0)
    return -np.sum(probs * np.log(safe), axis=1)
