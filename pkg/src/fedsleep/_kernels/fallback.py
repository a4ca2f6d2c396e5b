"""Pure-NumPy reference implementation of the Q-network kernels.

Both backends implement the same contract on C-contiguous float64 arrays:
``mlp_forward`` evaluates a ReLU MLP on a 2-d batch, ``td_sgd_step``
performs one SGD step on half the mean squared temporal-difference error
(so the single-sample case reduces to the classical tabular update) and
mutates the online weights in place.
"""

import numpy as np


def mlp_forward(w1, b1, w2, b2, w3, b3, x):
    """Evaluate the three-layer ReLU network on a (batch, in_dim) array."""
    h1 = np.maximum(x @ w1.T + b1, 0.0)
    h2 = np.maximum(h1 @ w2.T + b2, 0.0)
    return h2 @ w3.T + b3


def td_sgd_step(w1, b1, w2, b2, w3, b3,
                tw1, tb1, tw2, tb2, tw3, tb3,
                obs, act, rew, nxt, gamma, lr):
    """One SGD step on 0.5 * mean((Q(s,a) - y)^2), y = r + gamma * max Q_target(s').

    Online weights w*/b* are updated in place; the target copy t* is read-only.
    Returns the scalar loss before the update.
    """
    batch = obs.shape[0]
    rows = np.arange(batch)

    th1 = np.maximum(nxt @ tw1.T + tb1, 0.0)
    th2 = np.maximum(th1 @ tw2.T + tb2, 0.0)
    tq = th2 @ tw3.T + tb3
    y = rew + gamma * tq.max(axis=1)

    z1 = obs @ w1.T + b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ w2.T + b2
    h2 = np.maximum(z2, 0.0)
    q = h2 @ w3.T + b3

    delta = q[rows, act] - y
    loss = 0.5 * float(np.mean(delta * delta))

    dq = np.zeros_like(q)
    dq[rows, act] = delta / batch
    dw3 = dq.T @ h2
    db3 = dq.sum(axis=0)
    dh2 = (dq @ w3) * (z2 > 0.0)
    dw2 = dh2.T @ h1
    db2 = dh2.sum(axis=0)
    dh1 = (dh2 @ w2) * (z1 > 0.0)
    dw1 = dh1.T @ obs
    db1 = dh1.sum(axis=0)

    w1 -= lr * dw1
    b1 -= lr * db1
    w2 -= lr * dw2
    b2 -= lr * db2
    w3 -= lr * dw3
    b3 -= lr * db3
    return loss
