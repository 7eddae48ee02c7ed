#!/usr/bin/env python3
# Tour of the numeric core: tensors, primitives, reverse-mode gradients,
# and the finite-difference checker.

import numpy as np

from prosynth import tensor as T
from prosynth.gradcheck import check_gradients
from prosynth.layers import Linear
from prosynth.tensor import Tensor

rng = np.random.default_rng(0)

print("== forward primitives ==")
x = Tensor(rng.normal(size=(3, 4)))
print("softmax rows sum to:", T.softmax(x).data.sum(axis=-1))
print("layer_norm of [5,5,5]:", T.layer_norm(Tensor([5.0, 5.0, 5.0])).data)

ramp = Tensor(np.arange(5.0).reshape(5, 1))
kernel = Tensor(np.array([1.0, 2.0, 3.0]).reshape(3, 1, 1))
print("conv1d of a ramp with [1,2,3]:", T.conv1d(ramp, kernel).data.ravel())

print("\n== reverse mode ==")
w = Tensor(np.array([0.5, -0.25, 2.0]), requires_grad=True)
data = Tensor(np.array([1.0, 2.0, 3.0]))
loss = (w * data).sum()
loss.backward()
print("d/dw of sum(w * x) is x:", w.grad)

print("\n== gradient checking a layer ==")
layer = Linear(6, 4, rng)
inp = Tensor(rng.normal(size=(5, 6)))

def loss_fn():
    return T.tanh(layer(inp)).mean()

report = check_gradients(loss_fn, layer.parameters(), step=1e-5, tolerance=1e-6)
print(report.summary())
