# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the two-layer Q-network.

Hidden weights are stored input-major, shape (input_dim, hidden). Observations
are mostly-zero 0/1 maps, so the input layer only touches rows of nonzero
inputs, each as a contiguous axpy reused across the batch. ``train`` fuses gradients, the finiteness check and RMSprop;
rows whose input is zero across the whole batch have zero gradient and only get
their accumulator decayed, which equals the full update bit for bit.
"""

import numpy as np
from libc.math cimport exp, sqrt, isfinite

ctypedef double f8


cdef inline void _axpy(f8* y, const f8* x, f8 alpha, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        y[i] += alpha * x[i]


cdef inline f8 _dot(const f8* x, const f8* y, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef f8 s = 0.0
    for i in range(n):
        s += x[i] * y[i]
    return s


cdef void _forward_into(const f8[:, ::1] W1t, const f8[::1] b1, const f8[:, ::1] W2,
                        const f8[::1] b2, const f8[:, ::1] X, bint softmax,
                        f8[:, ::1] H, f8[:, ::1] Y) noexcept nogil:
    cdef Py_ssize_t B = X.shape[0], NH = W1t.shape[1], NA = W2.shape[0]
    cdef Py_ssize_t b, i, j, a
    cdef f8 m, tot
    cdef f8* hb
    cdef const f8* w
    for b in range(B):
        hb = &H[b, 0]
        for i in range(NH):
            hb[i] = b1[i]
    # column-outer so each weight row is loaded once for the whole batch
    for j in range(X.shape[1]):
        w = &W1t[j, 0]
        for b in range(B):
            if X[b, j] != 0.0:
                _axpy(&H[b, 0], w, X[b, j], NH)
    for b in range(B):
        hb = &H[b, 0]
        for a in range(NA):
            Y[b, a] = b2[a] + _dot(&W2[a, 0], hb, NH)
        if softmax:
            m = Y[b, 0]
            for a in range(1, NA):
                if Y[b, a] > m:
                    m = Y[b, a]
            tot = 0.0
            for a in range(NA):
                Y[b, a] = exp(Y[b, a] - m)
                tot += Y[b, a]
            for a in range(NA):
                Y[b, a] /= tot


def forward(const f8[:, ::1] W1t, const f8[::1] b1, const f8[:, ::1] W2, const f8[::1] b2,
            const f8[:, ::1] X, bint softmax):
    """Return (hidden, output) for a (batch, input_dim) matrix ``X``."""
    H = np.empty((X.shape[0], W1t.shape[1]))
    Y = np.empty((X.shape[0], W2.shape[0]))
    cdef f8[:, ::1] Hv = H, Yv = Y
    with nogil:
        _forward_into(W1t, b1, W2, b2, X, softmax, Hv, Yv)
    return H, Y


cdef f8 _grads_into(const f8[:, ::1] W1t, const f8[::1] b1, const f8[:, ::1] W2, const f8[::1] b2,
                    const f8[:, ::1] X, const Py_ssize_t[::1] actions, const f8[::1] targets,
                    bint softmax, f8[:, ::1] gW1t, f8[::1] gb1, f8[:, ::1] gW2, f8[::1] gb2,
                    f8[:, ::1] H, f8[:, ::1] Y, f8[:, ::1] dZ, f8[:, ::1] dH,
                    unsigned char[::1] active, bint zero_all) noexcept nogil:
    """Gradients of the selected-action squared error. Rows of gW1t outside ``active``
    are zeroed only when ``zero_all``; otherwise they are left untouched."""
    cdef Py_ssize_t B = X.shape[0], NH = W1t.shape[1], NA = W2.shape[0], D = X.shape[1]
    cdef Py_ssize_t b, i, j, a, act
    cdef f8 err, g, pred, loss = 0.0, c

    _forward_into(W1t, b1, W2, b2, X, softmax, H, Y)
    for b in range(B):
        act = actions[b]
        pred = Y[b, act]
        err = pred - targets[b]
        loss += err * err
        g = 2.0 * err / B
        for a in range(NA):
            dZ[b, a] = 0.0
        if softmax:
            for a in range(NA):
                dZ[b, a] = -g * pred * Y[b, a]
            dZ[b, act] += g * pred
        else:
            dZ[b, act] = g
    loss /= B

    for a in range(NA):
        gb2[a] = 0.0
        for i in range(NH):
            gW2[a, i] = 0.0
    for b in range(B):
        for a in range(NA):
            c = dZ[b, a]
            if c == 0.0:
                continue
            gb2[a] += c
            _axpy(&gW2[a, 0], &H[b, 0], c, NH)

    for i in range(NH):
        gb1[i] = 0.0
    for b in range(B):
        for i in range(NH):
            dH[b, i] = 0.0
        for a in range(NA):
            c = dZ[b, a]
            if c == 0.0:
                continue
            _axpy(&dH[b, 0], &W2[a, 0], c, NH)
        for i in range(NH):
            gb1[i] += dH[b, i]

    for j in range(D):
        active[j] = 0
        for b in range(B):
            if X[b, j] != 0.0:
                if not active[j]:
                    active[j] = 1
                    for i in range(NH):
                        gW1t[j, i] = 0.0
                _axpy(&gW1t[j, 0], &dH[b, 0], X[b, j], NH)
        if zero_all and not active[j]:
            for i in range(NH):
                gW1t[j, i] = 0.0
    return loss


def gradients(const f8[:, ::1] W1t, const f8[::1] b1, const f8[:, ::1] W2, const f8[::1] b2,
              const f8[:, ::1] X, const Py_ssize_t[::1] actions, const f8[::1] targets,
              bint softmax, f8[:, ::1] gW1t, f8[::1] gb1, f8[:, ::1] gW2, f8[::1] gb2):
    """Fill the gradient buffers of the selected-action squared error; return the loss."""
    cdef Py_ssize_t B = X.shape[0], NH = W1t.shape[1], NA = W2.shape[0], D = X.shape[1]
    cdef f8[:, ::1] H = np.empty((B, NH)), Y = np.empty((B, NA))
    cdef f8[:, ::1] dZ = np.empty((B, NA)), dH = np.empty((B, NH))
    cdef unsigned char[::1] active = np.empty(D, dtype=np.uint8)
    cdef f8 loss
    with nogil:
        loss = _grads_into(W1t, b1, W2, b2, X, actions, targets, softmax, gW1t, gb1, gW2, gb2,
                           H, Y, dZ, dH, active, True)
    return loss


cdef inline void _rms(f8* p, const f8* g, f8* v, Py_ssize_t n, f8 lr, f8 rho, f8 eps) noexcept nogil:
    cdef Py_ssize_t i
    cdef f8 gi, vi
    for i in range(n):
        gi = g[i]
        vi = rho * v[i] + (1.0 - rho) * gi * gi
        v[i] = vi
        p[i] -= lr * gi / (sqrt(vi) + eps)


cdef bint _finite(const f8* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        if not isfinite(a[i]):
            return False
    return True


def train(f8[:, ::1] W1t, f8[::1] b1, f8[:, ::1] W2, f8[::1] b2,
          f8[:, ::1] vW1t, f8[::1] vb1, f8[:, ::1] vW2, f8[::1] vb2,
          const f8[:, ::1] X, const Py_ssize_t[::1] actions, const f8[::1] targets, bint softmax,
          double lr, double rho, double eps,
          f8[:, ::1] gW1t, f8[::1] gb1, f8[:, ::1] gW2, f8[::1] gb2):
    """Gradient step with RMSprop, in place. Returns (loss, finite); nothing is
    updated when the loss or a gradient is not finite. g* are scratch buffers."""
    cdef Py_ssize_t B = X.shape[0], NH = W1t.shape[1], NA = W2.shape[0], D = X.shape[1]
    cdef f8[:, ::1] H = np.empty((B, NH)), Y = np.empty((B, NA))
    cdef f8[:, ::1] dZ = np.empty((B, NA)), dH = np.empty((B, NH))
    cdef unsigned char[::1] active = np.empty(D, dtype=np.uint8)
    cdef Py_ssize_t j, i
    cdef f8 loss
    cdef bint ok
    with nogil:
        loss = _grads_into(W1t, b1, W2, b2, X, actions, targets, softmax, gW1t, gb1, gW2, gb2,
                           H, Y, dZ, dH, active, False)
        ok = isfinite(loss) and _finite(&gb1[0], NH) and _finite(&gW2[0, 0], NA * NH) \
            and _finite(&gb2[0], NA)
        if ok:
            for j in range(D):
                if active[j] and not _finite(&gW1t[j, 0], NH):
                    ok = False
                    break
        if ok:
            for j in range(D):
                if active[j]:
                    _rms(&W1t[j, 0], &gW1t[j, 0], &vW1t[j, 0], NH, lr, rho, eps)
                else:
                    for i in range(NH):
                        vW1t[j, i] = rho * vW1t[j, i]
            _rms(&b1[0], &gb1[0], &vb1[0], NH, lr, rho, eps)
            _rms(&W2[0, 0], &gW2[0, 0], &vW2[0, 0], NA * NH, lr, rho, eps)
            _rms(&b2[0], &gb2[0], &vb2[0], NA, lr, rho, eps)
    return loss, ok


def rmsprop(param, grad, v, double lr, double rho, double eps):
    """In-place RMSprop step on C-contiguous arrays of identical size."""
    cdef f8[::1] p = param.reshape(-1)
    cdef const f8[::1] gr = grad.reshape(-1)
    cdef f8[::1] vv = v.reshape(-1)
    cdef Py_ssize_t n = p.shape[0]
    if gr.shape[0] != n or vv.shape[0] != n:
        raise ValueError("param, grad and v must have the same size")
    if n:
        with nogil:
            _rms(&p[0], &gr[0], &vv[0], n, lr, rho, eps)


def all_finite(*arrays):
    cdef const f8[::1] a
    for arr in arrays:
        a = arr.reshape(-1)
        if a.shape[0] and not _finite(&a[0], a.shape[0]):
            return False
    return True
