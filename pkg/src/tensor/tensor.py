"""
Tensor and tape - the reverse-mode autodiff core.

Tensors are immutable wrappers around numpy arrays. Operations executed while
a ``Tape`` is active append one ``Node`` per call to that tape; executing an
operation outside any tape records nothing (inference mode). ``backward``
walks one tape in reverse and returns a ``GradientMap``.
"""

from contextvars import ContextVar
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..interfaces.errors import ContractError
from ..interfaces.operation import Operation

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]

_active_tape: ContextVar[Optional["Tape"]] = ContextVar("camb_active_tape", default=None)


class Tensor:
    """
    Dense N-dimensional array of reals with gradient tracking flag.

    Layout is channel-last (H, W, C) with an optional leading batch axis.
    The wrapped array is read-only; every operation produces a new Tensor.
    """

    __slots__ = ("data", "requires_grad", "name")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[np.dtype] = None,
    ):
        array = np.array(data, dtype=dtype, copy=True)
        if dtype is None and not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        array.setflags(write=False)
        self.data = array
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def wrap(cls, array: np.ndarray, requires_grad: bool = False) -> "Tensor":
        """Adopt a freshly computed array without copying it."""
        tensor = cls.__new__(cls)
        array.setflags(write=False)
        tensor.data = array
        tensor.requires_grad = requires_grad
        tensor.name = None
        return tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}", "tensor")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Writable copy of the data."""
        return np.array(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, name=self.name)

    def __add__(self, other: "Tensor") -> "Tensor":
        from .ops import add

        return add(self, _as_tensor(other))

    def __sub__(self, other: "Tensor") -> "Tensor":
        from .ops import sub

        return sub(self, _as_tensor(other))

    def __mul__(self, other: "Tensor") -> "Tensor":
        from .ops import broadcast_mul

        return broadcast_mul(self, _as_tensor(other))

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"


def _as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass(frozen=True)
class Node:
    """One recorded operation: the rule, its inputs and the produced tensor."""

    op: Operation
    inputs: Tuple[Tensor, ...]
    output: Tensor


class Tape:
    """
    Ordered record of the operations of one forward pass.

    Single-writer: a tape belongs to one forward/backward pass. Nodes are
    appended in execution order, so every node's inputs precede it.

    Usage:
        with Tape() as tape:
            loss = model_forward(...)
        grads = backward(loss, tape)
    """

    def __init__(self) -> None:
        self.nodes: List[Node] = []
        self._produced: Dict[int, int] = {}
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[Node]:
        return iter(self.nodes)

    def record(self, op: Operation, inputs: Tuple[Tensor, ...], output: Tensor) -> None:
        self._produced[id(output)] = len(self.nodes)
        self.nodes.append(Node(op, inputs, output))

    def produced(self, tensor: Tensor) -> bool:
        return id(tensor) in self._produced


def active_tape() -> Optional[Tape]:
    return _active_tape.get()


class GradientMap:
    """
    Gradients keyed by tensor identity.

    Holds a reference to every keyed tensor so identities stay valid for the
    lifetime of the map.
    """

    def __init__(self) -> None:
        self._grads: Dict[int, np.ndarray] = {}
        self._tensors: Dict[int, Tensor] = {}

    def accumulate(self, tensor: Tensor, grad: np.ndarray) -> None:
        key = id(tensor)
        if key in self._grads:
            self._grads[key] = self._grads[key] + grad
        else:
            self._grads[key] = grad
            self._tensors[key] = tensor

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._grads

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        try:
            return self._grads[id(tensor)]
        except KeyError:
            raise ContractError(f"no gradient recorded for {tensor!r}", "tape") from None

    def get(self, tensor: Tensor) -> np.ndarray:
        """Gradient of ``tensor``, zeros when it never influenced the output."""
        grad = self._grads.get(id(tensor))
        return np.zeros_like(tensor.data) if grad is None else grad

    def pop(self, tensor: Tensor) -> Optional[np.ndarray]:
        self._tensors.pop(id(tensor), None)
        return self._grads.pop(id(tensor), None)

    def __len__(self) -> int:
        return len(self._grads)


def backward(output: Tensor, tape: Tape) -> GradientMap:
    """
    Reverse-mode sweep over ``tape`` seeded with d(output)/d(output) = 1.

    Returns gradients for every tensor that requires grad and influenced
    ``output``. Contributions of a tensor consumed several times are summed.

    Raises:
        ContractError: output is not a scalar or was not produced on the tape
    """
    if output.size != 1:
        raise ContractError(f"backward needs a scalar output, got shape {output.shape}", "tape")
    if not output.requires_grad:
        return GradientMap()
    if not tape.produced(output):
        raise ContractError("output tensor was not produced on this tape", "tape")

    pending = GradientMap()
    result = GradientMap()
    pending.accumulate(output, np.ones_like(output.data))

    for node in reversed(tape.nodes):
        grad = pending.pop(node.output)
        if grad is None:
            continue
        input_grads = node.op.backward(grad)
        for tensor, input_grad in zip(node.inputs, input_grads):
            if input_grad is None or not tensor.requires_grad:
                continue
            if tape.produced(tensor):
                pending.accumulate(tensor, input_grad)
            else:
                result.accumulate(tensor, input_grad)

    return result
