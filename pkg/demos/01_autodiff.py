"""
Reverse-mode differentiation and Adam
=====================================

Every loss in the package is written against the small tensor module in
``relgc.tensor``. This script records a computation, pulls gradients back
through it, compares them with central differences and then fits a linear
model with Adam.
"""
import numpy as np

from relgc import tensor as T

rng = np.random.default_rng(0)

# A two-layer expression: tanh(X W1) W2, scored by its squared norm.
x = rng.normal(size=(5, 3))
w1 = T.parameter(rng.normal(size=(3, 4)))
w2 = T.parameter(rng.normal(size=(4, 2)))


def loss():
    h = T.tanh(T.matmul(x, w1))
    return T.sum_all(T.square(T.matmul(h, w2)))


grads = T.backward(loss(), [w1, w2])

# Central differences on one entry of w1.
h = 1e-6
w1.data[0, 0] += h
up = loss().item()
w1.data[0, 0] -= 2 * h
down = loss().item()
w1.data[0, 0] += h
print("analytic  d/dw1[0,0]:", grads[w1][0, 0])
print("numerical d/dw1[0,0]:", (up - down) / (2 * h))

# Adam on a least-squares problem with a known answer.
true_w = np.array([[2.0], [-1.0], [0.5]])
a = rng.normal(size=(200, 3))
b = a @ true_w
w = T.parameter(np.zeros((3, 1)))
state = T.AdamState(lr=0.05)
for step in range(500):
    err = T.sub(T.matmul(a, w), b)
    g = T.backward(T.mean_all(T.square(err)), [w])
    T.adam_step({"w": w}, {"w": g[w]}, state)
print("recovered weights:", np.round(w.data.ravel(), 4), "after", state.step, "steps")
