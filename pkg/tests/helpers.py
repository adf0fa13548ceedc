"""Independent reference implementations used as test oracles.

These deliberately avoid the library's code paths: the Kalman reference
inverts matrices by adjugate/cofactor expansion instead of linear solves,
and the convolution reference is a direct triple loop over channels and
taps.
"""

import numpy as np


def adjugate_inverse(m):
    """Inverse of a 1x1, 2x2 or 3x3 matrix via the adjugate formula."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if n == 1:
        return np.array([[1.0 / m[0, 0]]])
    if n == 2:
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
    if n == 3:
        c = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                minor = np.delete(np.delete(m, i, axis=0), j, axis=1)
                c[i, j] = (-1.0) ** (i + j) * (
                    minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0]
                )
        det = sum(m[0, j] * c[0, j] for j in range(3))
        return c.T / det
    raise ValueError("adjugate_inverse supports n <= 3 only")


def kf_step_reference(x, P, A, B, C, Q, R, u, y):
    """Literal transcription of the predict/update recursion."""
    x_pred = A @ x + B @ u
    P_pred = A @ P @ A.T + Q
    K = P_pred @ C.T @ adjugate_inverse(C @ P_pred @ C.T + R)
    x_new = x_pred + K @ (y - C @ x_pred)
    P_new = (np.eye(len(x)) - K @ C) @ P_pred
    return x_new, P_new


def conv1d_reference(x, w, bias, padding, dilation):
    """Naive cross-correlation: explicit loops over out/in channels and taps."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    in_ch, length = x.shape
    out_ch, _, k = w.shape
    out_len = length + 2 * padding - dilation * (k - 1)
    y = np.zeros((out_ch, out_len))
    for o in range(out_ch):
        for t in range(out_len):
            acc = 0.0 if bias is None else float(np.asarray(bias)[o])
            for i in range(in_ch):
                for j in range(k):
                    src = t + j * dilation - padding
                    if 0 <= src < length:
                        acc += w[o, i, j] * x[i, src]
            y[o, t] = acc
    return y


def conv1d_transposed_reference(x, w, bias, padding, dilation):
    """Naive scatter form of the transposed convolution, weights (in, out, k)."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    in_ch, length = x.shape
    _, out_ch, k = w.shape
    out_len = length - 2 * padding + dilation * (k - 1)
    y = np.zeros((out_ch, out_len))
    for a in range(in_ch):
        for t in range(length):
            for c in range(out_ch):
                for j in range(k):
                    dst = t - padding + j * dilation
                    if 0 <= dst < out_len:
                        y[c, dst] += w[a, c, j] * x[a, t]
    if bias is not None:
        y += np.asarray(bias)[:, None]
    return y


def random_spd(rng, n, scale=1.0):
    """A well-conditioned symmetric positive definite matrix."""
    m = rng.normal(size=(n, n))
    return scale * (m @ m.T + n * np.eye(n))


def relative_error(a, b):
    denom = max(abs(a), abs(b), 1e-8)
    return abs(a - b) / denom
