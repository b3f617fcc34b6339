"""A tour of the reverse-mode autodiff core.

Builds the label attention computation by hand from tensor primitives,
backpropagates a scalar loss, and cross-checks one gradient against a
central finite difference.
"""

import numpy as np

from labelattn import tensor as tc

rng = np.random.default_rng(0)

t, d_e, d_a, m = 5, 4, 3, 2
E = tc.Tensor(rng.normal(0, 1, size=(t, d_e)), requires_grad=True)
U = tc.Tensor(rng.normal(0, 0.5, size=(d_e, d_a)), requires_grad=True)
D = tc.Tensor(rng.normal(0, 0.5, size=(m, d_a)), requires_grad=True)

print("scores = E @ U @ D^T, then a softmax over the token axis:")
scores = tc.matmul(tc.matmul(E, U), tc.transpose(D))
A = tc.column_softmax(scores)
print(f"  A has shape {A.shape}, column sums {A.data.sum(axis=0)}")

print("\npooling token embeddings per label: C = E^T @ A")
C = tc.matmul(tc.transpose(E), A)
loss = tc.sum_all(tc.mul(C, C))
print(f"  scalar loss {loss.item():.6f}")

loss.backward()
print(f"  dLoss/dU has shape {U.grad.shape}")

# finite-difference check on one entry of U
h = 1e-6
analytic = U.grad[1, 2]


def loss_at(value):
    U2 = tc.Tensor(U.data.copy())
    U2.data[1, 2] = value
    A2 = tc.column_softmax(tc.matmul(tc.matmul(tc.Tensor(E.data), U2),
                                     tc.transpose(tc.Tensor(D.data))))
    C2 = tc.matmul(tc.transpose(tc.Tensor(E.data)), A2)
    return tc.sum_all(tc.mul(C2, C2)).item()


fd = (loss_at(U.data[1, 2] + h) - loss_at(U.data[1, 2] - h)) / (2 * h)
print(f"\nfinite difference check on U[1,2]: analytic {analytic:.8f}, "
      f"numeric {fd:.8f}, gap {abs(analytic - fd):.2e}")

print("\nthe graph is freed after backward; reusing it raises GraphError:")
try:
    loss.backward()
except tc.GraphError as err:
    print(f"  GraphError: {err}")
