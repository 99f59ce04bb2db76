"""Stochastic gradient descent with classical momentum.

Update rule per parameter: v <- momentum * v + g, then w <- w - lr * v.
"""

from __future__ import annotations

import torch


def sgd_step(param, grad, velocity, lr: float, momentum: float):
    """One momentum-SGD update on a single parameter array.

    Returns (new_param, new_velocity); works on numpy arrays, torch tensors,
    and plain scalars alike.
    """
    v = momentum * velocity + grad
    return param - lr * v, v


class MomentumSGD:
    """In-place momentum SGD over a model's parameters."""

    def __init__(self, parameters, lr: float, momentum: float):
        self.params = list(parameters)
        self.lr = lr
        self.momentum = momentum
        self.velocities = [torch.zeros_like(p) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            if p.grad is not None:
                p.grad.detach_()
                p.grad.zero_()

    @torch.no_grad()
    def step(self) -> None:
        for p, v in zip(self.params, self.velocities):
            if p.grad is None:
                continue
            v.mul_(self.momentum).add_(p.grad)
            p.add_(v, alpha=-self.lr)
