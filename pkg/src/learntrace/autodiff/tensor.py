"""Reverse-mode automatic differentiation over dense NumPy arrays.

A ``Graph`` is a tape: operations executed while a graph is active append one
node each, so the node list is topologically ordered by construction.
``backward`` walks the tape in reverse and returns gradients for the requested
leaf tensors.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..errors import GraphError, NumericError

__all__ = ["Tensor", "Graph", "Node", "backward", "config", "apply_op"]


class _Config:
    """Global numeric policy.

    ``check_finite`` guards every recorded forward output and every backward
    gradient; it is cheap relative to the kernels it protects and is left on
    by default. Speed-critical 32-bit training runs may disable it.
    """

    check_finite: bool = True


config = _Config()


class Tensor:
    """A dense floating-point array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=self.requires_grad, name=self.name)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"


class Node:
    """One recorded primitive application.

    ``grad_fn`` maps the gradients of ``outputs`` to a tuple of gradients
    aligned with ``inputs`` (``None`` for inputs that do not need one).
    """

    __slots__ = ("outputs", "inputs", "grad_fn", "name")

    def __init__(
        self,
        outputs: Sequence[Tensor],
        inputs: Sequence[Tensor],
        grad_fn: Callable,
        name: str,
    ):
        self.outputs = tuple(outputs)
        self.inputs = tuple(inputs)
        self.grad_fn = grad_fn
        self.name = name


_ACTIVE: list["Graph"] = []


class Graph:
    """A tape of nodes in execution (hence topological) order."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Graph":
        _ACTIVE.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _ACTIVE.pop()

    def __len__(self) -> int:
        return len(self.nodes)


def active_graph() -> Optional[Graph]:
    return _ACTIVE[-1] if _ACTIVE else None


def apply_op(
    name: str,
    outputs: Sequence[Tensor],
    inputs: Sequence[Tensor],
    grad_fn: Callable,
) -> None:
    """Record a primitive application on the active graph, if any.

    Recording is skipped when no input requires a gradient, so constant
    subgraphs (one-hot blocks, frozen features) cost nothing at backward time.
    """
    graph = active_graph()
    if graph is None:
        return
    if not any(t.requires_grad for t in inputs):
        return
    for out in outputs:
        out.requires_grad = True
        if config.check_finite and not np.all(np.isfinite(out.data)):
            raise NumericError(f"non-finite forward value at node '{name}'")
    graph.nodes.append(Node(outputs, inputs, grad_fn, name))


def backward(
    graph: Graph,
    output: Tensor,
    params: Optional[Iterable[Tensor]] = None,
) -> dict:
    """Differentiate ``output`` with respect to every leaf it depends on.

    Returns a mapping from parameter :class:`Tensor` to gradient array. When
    ``params`` is given, parameters the output does not depend on are mapped
    to zero gradients of matching shape.
    """
    if output.data.ndim != 0:
        raise GraphError(f"backward requires a scalar output, got shape {output.data.shape}")

    grads: dict[int, np.ndarray] = {id(output): np.ones((), dtype=output.data.dtype)}
    produced = {id(out) for node in graph.nodes for out in node.outputs}

    for node in reversed(graph.nodes):
        gouts = [grads.pop(id(out), None) for out in node.outputs]
        if all(g is None for g in gouts):
            continue
        gouts = [
            np.zeros(out.data.shape, dtype=out.data.dtype) if g is None else g
            for g, out in zip(gouts, node.outputs)
        ]
        gins = node.grad_fn(*gouts)
        for inp, g in zip(node.inputs, gins):
            if g is None or not inp.requires_grad:
                continue
            if config.check_finite and not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient at node '{node.name}'")
            acc = grads.get(id(inp))
            grads[id(inp)] = g if acc is None else acc + g

    result: dict[Tensor, np.ndarray] = {}
    if params is not None:
        for p in params:
            g = grads.get(id(p))
            if g is None or id(p) in produced:
                g = np.zeros_like(p.data)
            result[p] = np.asarray(g, dtype=p.data.dtype)
    else:
        by_id = {id(t): t for node in graph.nodes for t in node.inputs}
        for tid, g in grads.items():
            t = by_id.get(tid)
            if t is not None and id(t) not in produced:
                result[t] = g
    return result
