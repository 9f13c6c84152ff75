"""Pure-numpy kernels for the two-layer Q-network. Same signatures as ``_fast``.

Hidden weights are input-major: shape (input_dim, hidden).
"""

import numpy as np


def softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(W1t, b1, W2, b2, X, softmax):
    """Return (hidden, output) for a (batch, input_dim) matrix ``X``."""
    H = X @ W1t + b1
    Z = H @ W2.T + b2
    return H, (softmax_rows(Z) if softmax else Z)


def gradients(W1t, b1, W2, b2, X, actions, targets, softmax, gW1t, gb1, gW2, gb2):
    """Fill the gradient buffers of the selected-action squared error; return the loss."""
    B = X.shape[0]
    H, Y = forward(W1t, b1, W2, b2, X, softmax)
    rows = np.arange(B)
    pred = Y[rows, actions]
    err = pred - targets
    loss = float(np.mean(err * err))
    g = 2.0 * err / B
    if softmax:
        # d s_a / d z_k = s_a (delta_ak - s_k)
        dZ = -(g * pred)[:, None] * Y
        dZ[rows, actions] += g * pred
    else:
        dZ = np.zeros_like(Y)
        dZ[rows, actions] = g
    np.dot(dZ.T, H, out=gW2)
    gb2[:] = dZ.sum(axis=0)
    dH = dZ @ W2
    np.dot(X.T, dH, out=gW1t)
    gb1[:] = dH.sum(axis=0)
    return loss


def rmsprop(param, grad, v, lr, rho, eps):
    """In-place RMSprop step on arrays of identical shape."""
    v *= rho
    v += (1.0 - rho) * grad * grad
    param -= lr * grad / (np.sqrt(v) + eps)


def all_finite(*arrays):
    return all(bool(np.isfinite(a).all()) for a in arrays)


def train(W1t, b1, W2, b2, vW1t, vb1, vW2, vb2, X, actions, targets, softmax,
          lr, rho, eps, gW1t, gb1, gW2, gb2):
    """Gradient step with RMSprop, in place. Returns (loss, finite)."""
    grads = (gW1t, gb1, gW2, gb2)
    with np.errstate(over="ignore", invalid="ignore"):
        loss = gradients(W1t, b1, W2, b2, X, actions, targets, softmax, *grads)
    if not (np.isfinite(loss) and all_finite(*grads)):
        return loss, False
    for p, g, v in zip((W1t, b1, W2, b2), grads, (vW1t, vb1, vW2, vb2)):
        rmsprop(p, g, v, lr, rho, eps)
    return loss, True
