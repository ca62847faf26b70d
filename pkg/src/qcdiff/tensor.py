"""Reverse-mode autodiff over dense float64 arrays.

A :class:`Tensor` wraps a numpy array plus an optional gradient buffer. Ops in
:mod:`qcdiff.ops` record a dynamic tape: each result keeps references to its
parent tensors and a backward rule. :func:`backward` replays the tape in
reverse topological order and accumulates d(loss)/d(leaf) into ``.grad``.

Gradients accumulate additively across ``backward`` calls until zeroed, so a
second backward on the same loss exactly doubles every leaf gradient.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError

# Toggled by no_grad(); when False, new ops record no tape nodes.
_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables tape recording (sampling, metrics)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """Dense n-d float64 value, optionally carrying a gradient accumulator.

    ``data`` is always a C-contiguous float64 ndarray. ``grad`` is either None
    or an ndarray of the same shape. Tensors produced by ops are immutable by
    convention; training code mutates only leaf ``data`` (optimizer updates).
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]] = None
        self._op = ""

    # -- tape construction -------------------------------------------------

    @staticmethod
    def from_op(data: np.ndarray, parents: tuple["Tensor", ...], op: str,
                backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> "Tensor":
        """Wrap an op result; records the tape node only while grads are on."""
        out = Tensor(data)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
            out._op = op
        return out

    # -- gradient plumbing -------------------------------------------------

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    # -- conveniences --------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self._op or 'leaf'!r}, requires_grad={self.requires_grad})"


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every reachable requires_grad tensor.

    ``loss`` must be scalar (a single element). Gradients are accumulated into
    existing ``.grad`` buffers; call ``zero_grad`` between steps to reset.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.data.shape}")

    # Reverse topological order over the tape (iterative; graphs can be deep).
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    # Pass-local gradient table keeps propagation independent of any stale
    # .grad contents, then the results are added into persistent buffers.
    local: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = local.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in local:
                local[key] = local[key] + pg
            else:
                local[key] = pg
