"""
Checking the critic's hand-written backpropagation
==================================================

The critic is a small ReLU network trained without an autodiff library, so
its gradients are compared against central finite differences: first the
parameter gradient of the squared TD error, then dQ/du, which is what
drives the gain updates.
"""

import numpy as np

from pidrl.critic import Mlp, grad_wrt_action, mlp_init, q_backward, q_values

rng = np.random.default_rng(0)
net = mlp_init([8, 8], rng)
S = rng.normal(size=(8, 4))  # feature rows (e_y, I_y, D, I_u)
U = rng.normal(size=8)
targets = rng.normal(size=8)

grad, loss = q_backward(net, S, U, targets)
h = 1e-6
fd = np.empty(net.n_params)
for i in range(net.n_params):
    up, down = net.theta.copy(), net.theta.copy()
    up[i] += h
    down[i] -= h
    fd[i] = (q_backward(Mlp(net.sizes, up), S, U, targets)[1] - q_backward(Mlp(net.sizes, down), S, U, targets)[1]) / (2 * h)
print(f"{net.n_params} parameters, loss {loss:.4f}, max |backprop - FD| = {np.max(np.abs(grad.theta - fd)):.2e}")

dq = grad_wrt_action(net, S, U)
dq_fd = (q_values(net, S, U + h) - q_values(net, S, U - h)) / (2 * h)
print("dQ/du backprop:", np.round(dq, 5))
print("dQ/du FD:      ", np.round(dq_fd, 5))
