"""
Gradients on a tape
===================

Every model computation is recorded on a tape and differentiated in
reverse. This walk-through builds a tiny logistic model by hand and checks
the tape's gradient against central differences.
"""

import numpy as np

from grouptkg.tensor import Tape, Tensor, backward, bce, matmul, no_grad, sigmoid

rng = np.random.default_rng(0)
X = Tensor(rng.normal(size=(5, 3)))
y = (rng.random((5, 2)) < 0.5).astype(float)
W = Tensor(rng.normal(size=(3, 2)), requires_grad=True)


def loss_fn():
    return bce(sigmoid(matmul(X, W)), y)


# anything computed inside the context is recorded
with Tape() as tape:
    loss = loss_fn()
(grad,) = backward(tape, loss, [W])
print("loss", float(loss.data))
print("dL/dW\n", grad)

# central differences, one weight at a time
eps = 1e-6
numeric = np.zeros_like(W.data)
for idx in np.ndindex(W.shape):
    old = W.data[idx]
    W.data[idx] = old + eps
    with no_grad():
        hi = float(loss_fn().data)
    W.data[idx] = old - eps
    with no_grad():
        lo = float(loss_fn().data)
    W.data[idx] = old
    numeric[idx] = (hi - lo) / (2 * eps)

print("max abs difference", np.abs(grad - numeric).max())

# operations check their inputs: a NaN or a shape clash names the operation
try:
    matmul(X, X)
except ValueError as exc:
    print("rejected:", exc)
