"""A tour of the reverse-mode tape that powers everything else.

Every model quantity in this package is a Tensor holding a float64 numpy
array. Building an expression records its parents; calling backward() on a
scalar walks the tape once and accumulates gradients. This demo builds a
small expression by hand and checks one gradient against finite
differences, which is the same discipline the test suite applies to the
whole model.
"""

import numpy as np

from mcseg import tensor as T

rng = np.random.default_rng(0)

w = T.Tensor(rng.normal(size=(3, 2)), requires_grad=True)
x = T.Tensor(rng.normal(size=(4, 3)), requires_grad=True)
b = T.Tensor(np.zeros(2), requires_grad=True)

h = T.relu(T.matmul(x, w) + b)
loss = T.tmean(h * h)
loss.backward()

print("loss         :", f"{loss.item():.6f}")
print("dloss/dw     :\n", w.grad)

def forward() -> float:
    with T.no_grad():
        h = T.relu(T.matmul(x, w) + b)
        return T.tmean(h * h).item()


# central differences on one entry of w
eps = 1e-6
w.data[1, 0] += eps
up = forward()
w.data[1, 0] -= 2 * eps
down = forward()
w.data[1, 0] += eps

fd = (up - down) / (2 * eps)
print(f"w[1,0] analytic {w.grad[1, 0]:+.8f}  finite-diff {fd:+.8f}")

# gradients accumulate until cleared, like any tape
loss2 = T.tsum(w)
loss2.backward()
print("after a second backward, w.grad[1,0] grew to",
      f"{w.grad[1, 0]:+.8f}")
w.zero_grad()
print("zero_grad resets it:", w.grad)
