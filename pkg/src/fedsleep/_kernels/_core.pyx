# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Q-network kernels.

Same contract as ``fallback.py``: float64 C-contiguous arrays, online
weights mutated in place, loss is half the mean squared TD error. The
inner loops run on raw row pointers so the C compiler can vectorize the
dot products and rank-1 updates; ReLU zeros are skipped in the backward
pass.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef void _dense_relu(const double* x, Py_ssize_t n, Py_ssize_t d_in,
                      const double* w, const double* b, Py_ssize_t d_out,
                      double* z, double* h) noexcept nogil:
    # z = x @ w.T + b ; h = relu(z). z and h may be the same buffer.
    cdef Py_ssize_t i, j, k
    cdef const double* xrow
    cdef const double* wrow
    cdef double acc
    for i in range(n):
        xrow = x + i * d_in
        for j in range(d_out):
            wrow = w + j * d_in
            acc = b[j]
            for k in range(d_in):
                acc += xrow[k] * wrow[k]
            z[i * d_out + j] = acc
            h[i * d_out + j] = acc if acc > 0.0 else 0.0


def mlp_forward(double[:, ::1] w1, double[::1] b1,
                double[:, ::1] w2, double[::1] b2,
                double[:, ::1] w3, double[::1] b3,
                double[:, ::1] x):
    """Evaluate the three-layer ReLU network on a (batch, in_dim) array."""
    cdef Py_ssize_t n = x.shape[0], d_in = x.shape[1]
    cdef Py_ssize_t n_h1 = w1.shape[0], n_h2 = w2.shape[0], n_out = w3.shape[0]
    h1_arr = np.empty((n, n_h1))
    h2_arr = np.empty((n, n_h2))
    q_arr = np.empty((n, n_out))
    cdef double[:, ::1] h1v = h1_arr, h2v = h2_arr, qv = q_arr
    cdef double* h1 = &h1v[0, 0]
    cdef double* h2 = &h2v[0, 0]
    cdef double* q = &qv[0, 0]
    cdef const double* xp = &x[0, 0]
    cdef Py_ssize_t i, j, k
    cdef const double* hrow
    cdef const double* wrow
    cdef double acc
    with nogil:
        _dense_relu(xp, n, d_in, &w1[0, 0], &b1[0], n_h1, h1, h1)
        _dense_relu(h1, n, n_h1, &w2[0, 0], &b2[0], n_h2, h2, h2)
        for i in range(n):
            hrow = h2 + i * n_h2
            for j in range(n_out):
                wrow = &w3[0, 0] + j * n_h2
                acc = b3[j]
                for k in range(n_h2):
                    acc += hrow[k] * wrow[k]
                q[i * n_out + j] = acc
    return q_arr


def td_sgd_step(double[:, ::1] w1, double[::1] b1,
                double[:, ::1] w2, double[::1] b2,
                double[:, ::1] w3, double[::1] b3,
                double[:, ::1] tw1, double[::1] tb1,
                double[:, ::1] tw2, double[::1] tb2,
                double[:, ::1] tw3, double[::1] tb3,
                double[:, ::1] obs, long[::1] act, double[::1] rew,
                double[:, ::1] nxt, double gamma, double lr):
    """One SGD step on 0.5 * mean((Q(s,a) - y)^2), y = r + gamma * max Q_target(s').

    Online weights w*/b* are updated in place; the target copy t* is read-only.
    Returns the scalar loss before the update.
    """
    cdef Py_ssize_t batch = obs.shape[0]
    cdef Py_ssize_t n_h1 = w1.shape[0], n_h2 = w2.shape[0], n_out = w3.shape[0]
    cdef Py_ssize_t d_in = w1.shape[1]
    cdef Py_ssize_t i, j, k, a

    z1_arr = np.empty((batch, n_h1))
    h1_arr = np.empty((batch, n_h1))
    z2_arr = np.empty((batch, n_h2))
    h2_arr = np.empty((batch, n_h2))
    t1_arr = np.empty((batch, n_h1))
    t2_arr = np.empty((batch, n_h2))
    dh2_arr = np.empty((batch, n_h2))
    dh1_arr = np.zeros((batch, n_h1))
    gw3_arr = np.zeros((n_out, n_h2))
    gb3_arr = np.zeros(n_out)

    cdef double[:, ::1] z1v = z1_arr, h1v = h1_arr, z2v = z2_arr, h2v = h2_arr
    cdef double[:, ::1] t1v = t1_arr, t2v = t2_arr, dh2v = dh2_arr, dh1v = dh1_arr
    cdef double[:, ::1] gw3v = gw3_arr
    cdef double[::1] gb3v = gb3_arr

    cdef double* z1 = &z1v[0, 0]
    cdef double* h1 = &h1v[0, 0]
    cdef double* z2 = &z2v[0, 0]
    cdef double* h2 = &h2v[0, 0]
    cdef double* t1 = &t1v[0, 0]
    cdef double* t2 = &t2v[0, 0]
    cdef double* dh2 = &dh2v[0, 0]
    cdef double* dh1 = &dh1v[0, 0]
    cdef double* gw3 = &gw3v[0, 0]
    cdef double* gb3 = &gb3v[0]
    cdef const double* obsp = &obs[0, 0]
    cdef const double* nxtp = &nxt[0, 0]
    cdef double* w1p = &w1[0, 0]
    cdef double* b1p = &b1[0]
    cdef double* w2p = &w2[0, 0]
    cdef double* b2p = &b2[0]
    cdef double* w3p = &w3[0, 0]
    cdef double* b3p = &b3[0]

    cdef const double* row
    cdef const double* wrow
    cdef double* out_row
    cdef double acc, best, y, g, scale, delta_i, loss = 0.0

    delta_arr = np.empty(batch)
    cdef double[::1] deltav = delta_arr
    cdef double* delta = &deltav[0]

    with nogil:
        # Target values from the frozen copy; only the max output is needed.
        _dense_relu(nxtp, batch, d_in, &tw1[0, 0], &tb1[0], n_h1, t1, t1)
        _dense_relu(t1, batch, n_h1, &tw2[0, 0], &tb2[0], n_h2, t2, t2)

        # Online forward pass, keeping pre-activations for the backward pass.
        _dense_relu(obsp, batch, d_in, w1p, b1p, n_h1, z1, h1)
        _dense_relu(h1, batch, n_h1, w2p, b2p, n_h2, z2, h2)

        for i in range(batch):
            row = t2 + i * n_h2
            best = -1e300
            for j in range(n_out):
                wrow = &tw3[0, 0] + j * n_h2
                acc = tb3[j]
                for k in range(n_h2):
                    acc += row[k] * wrow[k]
                if acc > best:
                    best = acc
            y = rew[i] + gamma * best
            a = act[i]
            row = h2 + i * n_h2
            wrow = w3p + a * n_h2
            acc = b3p[a]
            for k in range(n_h2):
                acc += row[k] * wrow[k]
            delta[i] = acc - y
            loss += delta[i] * delta[i]
        loss = 0.5 * loss / batch

        # Backward pass. dq is nonzero only at the taken action; layer-3
        # gradients are fully accumulated before w3 is touched so dh2 sees
        # the old weights.
        for i in range(batch):
            a = act[i]
            g = delta[i] / batch
            gb3[a] += g
            row = h2 + i * n_h2
            wrow = w3p + a * n_h2
            out_row = dh2 + i * n_h2
            for k in range(n_h2):
                gw3[a * n_h2 + k] += g * row[k]
                out_row[k] = (g * wrow[k]) if z2[i * n_h2 + k] > 0.0 else 0.0

        # dh1 = dz2 @ w2 with the zero entries of dz2 skipped; w2 rows are
        # contiguous in this orientation.
        for i in range(batch):
            row = dh2 + i * n_h2
            out_row = dh1 + i * n_h1
            for k in range(n_h2):
                g = row[k]
                if g != 0.0:
                    wrow = w2p + k * n_h1
                    for j in range(n_h1):
                        out_row[j] += g * wrow[j]
            for j in range(n_h1):
                if z1[i * n_h1 + j] <= 0.0:
                    out_row[j] = 0.0

        for j in range(n_out):
            b3p[j] -= lr * gb3[j]
            for k in range(n_h2):
                w3p[j * n_h2 + k] -= lr * gw3[j * n_h2 + k]

        # Layer 2: rank-1 updates per sample; dh1 already captured the old w2.
        for i in range(batch):
            row = h1 + i * n_h1
            for j in range(n_h2):
                g = dh2[i * n_h2 + j]
                if g != 0.0:
                    scale = lr * g
                    b2p[j] -= scale
                    out_row = w2p + j * n_h1
                    for k in range(n_h1):
                        out_row[k] -= scale * row[k]

        # Layer 1.
        for i in range(batch):
            row = obsp + i * d_in
            for j in range(n_h1):
                g = dh1[i * n_h1 + j]
                if g != 0.0:
                    scale = lr * g
                    b1p[j] -= scale
                    out_row = w1p + j * d_in
                    for k in range(d_in):
                        out_row[k] -= scale * row[k]

    return loss
