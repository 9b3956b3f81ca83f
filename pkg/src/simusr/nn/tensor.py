"""Minimal reverse-mode autodiff over numpy arrays.

Graphs are built define-by-run by the ops in simusr.nn.ops; calling
backward() on a scalar loss accumulates gradients into every tensor that
requires them. Module-level counters track forward passes of the full
model and backward passes of the graph, which lets callers assert that
plain inference never touches the backward machinery.
"""

from __future__ import annotations

import numpy as np

counters = {"forward": 0, "backward": 0}


def reset_counters() -> None:
    counters["forward"] = 0
    counters["backward"] = 0


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward_fn=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward_fn = backward_fn

    @property
    def shape(self):
        return self.data.shape

    def backward(self) -> None:
        """Backpropagate from a scalar; accumulates into .grad fields."""
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar loss tensor")
        counters["backward"] += 1

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is None or node.grad is None:
                continue
            for parent, grad in zip(node._parents, node._backward_fn(node.grad)):
                if grad is None or not parent.requires_grad:
                    continue
                parent.grad = grad if parent.grad is None else parent.grad + grad

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value))
