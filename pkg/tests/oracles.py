"""Brute-force reference solutions used by the tests."""
import numpy as np


def rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def shift_A(A, delta):
    """``A P_delta`` for one ``(2, M)`` block, ``delta`` of shape ``(N,)``.

    Built directly from the 2x2 rotation blocks ``[[c, -s], [s, c]]`` at
    angles ``2 pi l delta`` acting on the (sin, cos) column pairs.
    """
    M = A.shape[1]
    out = np.empty((len(delta), 2, M))
    for l in range(1, M // 2 + 1):
        ang = 2 * np.pi * l * delta
        c, s = np.cos(ang)[:, None], np.sin(ang)[:, None]
        a_sin, a_cos = A[:, 2 * l - 2], A[:, 2 * l - 1]
        # [a_sin a_cos] @ [[c, -s], [s, c]]
        out[:, :, 2 * l - 2] = a_sin * c + a_cos * s
        out[:, :, 2 * l - 1] = -a_sin * s + a_cos * c
    return out


def shifted_coef(coef, delta):
    out = np.array(coef, dtype=float)
    for j, d in enumerate(np.atleast_1d(delta)):
        out[j, :, 1:] = shift_A(coef[j, :, 1:], np.array([d]))[0]
    return out


def grid_rotation(template_coef, target_coef, delta, n=100_000):
    """Angle minimising ``||O_theta shifted(template) - target||^2`` on a grid."""
    G = shifted_coef(template_coef, delta).transpose(1, 0, 2).reshape(2, -1)
    C = target_coef.transpose(1, 0, 2).reshape(2, -1)
    theta = 2 * np.pi * np.arange(n) / n
    best, best_val = None, np.inf
    for chunk in np.array_split(np.arange(n), 50):
        R = rot(theta[chunk])
        val = np.sum((R @ G - C) ** 2, axis=(1, 2))
        k = int(np.argmin(val))
        if val[k] < best_val:
            best, best_val = theta[chunk][k], val[k]
    return float(best), float(best_val)


def grid_shift(A_star, A_bar, theta, n=100_000):
    """Start point minimising ``||O_theta A_bar P_delta - A_star||_F^2`` on a grid."""
    RA = rot(theta) @ A_bar
    delta = np.arange(n) / n
    best, best_val = None, np.inf
    for chunk in np.array_split(np.arange(n), 20):
        val = np.sum((shift_A(RA, delta[chunk]) - A_star) ** 2, axis=(1, 2))
        k = int(np.argmin(val))
        if val[k] < best_val:
            best, best_val = delta[chunk][k], val[k]
    return float(best), float(best_val)


def cyclic_gap(a, b, period):
    d = np.mod(np.asarray(a) - np.asarray(b), period)
    return np.minimum(d, period - d)


def newton_logistic(X, y, tol=1e-13, max_iter=100):
    """Unpenalized logistic regression with intercept by Newton-Raphson."""
    Z = np.hstack([np.ones((X.shape[0], 1)), X])
    b = np.zeros(Z.shape[1])
    for _ in range(max_iter):
        p = 1.0 / (1.0 + np.exp(-Z @ b))
        grad = Z.T @ (p - y)
        H = (Z.T * (p * (1 - p))) @ Z
        step = np.linalg.solve(H, grad)
        b -= step
        if np.max(np.abs(step)) < tol:
            return b[0], b[1:], True
    return b[0], b[1:], False
