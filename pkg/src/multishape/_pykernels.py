"""Pure-numpy implementation of the alignment kernels.

Reference semantics for :mod:`multishape._ckernels`; selected automatically
when the compiled module is unavailable. Both modules expose the same
functions with identical signatures and return values.

Conventions (shared with the Cython code):

* coefficient arrays have shape ``(p, 2, M + 1)``, column 0 is the constant;
* for one component, ``trace[l-1]`` and ``skew[l-1]`` summarise the 2x2
  diagonal block ``S`` of ``(O_theta Abar)^T A*`` at frequency ``l``:
  ``trace = S00 + S11``, ``skew = S10 - S01``;
* the shift objective, up to a constant, is
  ``h(d) = -2 sum_l [trace_l cos(2 pi l d) + skew_l sin(2 pi l d)]``
  and its scaled derivative is
  ``g(d) = sum_l 2l [trace_l sin(2 pi l d) - skew_l cos(2 pi l d)]``.
"""
import math

import numpy as np

TWO_PI = 2.0 * math.pi
ROT_EPS = 1e-14
TIE_EPS = 1e-14


def _g(delta, trace, skew):
    l = np.arange(1, trace.shape[0] + 1)
    ang = TWO_PI * np.multiply.outer(delta, l)
    return (np.sin(ang) * trace - np.cos(ang) * skew) @ (2.0 * l)


def _h(delta, trace, skew):
    l = np.arange(1, trace.shape[0] + 1)
    ang = TWO_PI * np.multiply.outer(delta, l)
    return -2.0 * (np.cos(ang) @ trace + np.sin(ang) @ skew)


def best_shift(trace, skew, n_scan, xtol):
    """Global minimiser of the shift objective over ``[0, 1)``.

    Brackets every downward-to-upward sign change of ``g`` on a uniform grid
    of ``n_scan`` subintervals, bisects each bracket to width ``xtol`` and
    returns the bracketed stationary point with the smallest ``h``. Only
    minima are refined: a local maximum can never be the global minimiser.

    Returns ``(delta, h(delta), n_minima)``; ``n_minima == 0`` signals a
    degenerate objective (``g`` identically zero) and ``delta = 0``.
    """
    trace = np.asarray(trace, dtype=float)
    skew = np.asarray(skew, dtype=float)
    nodes = np.arange(n_scan + 1) / n_scan
    gv = _g(nodes, trace, skew)
    gv[-1] = gv[0]
    idx = np.nonzero((gv[:-1] < 0.0) & (gv[1:] >= 0.0))[0]
    if idx.size == 0:
        return 0.0, float(_h(np.array([0.0]), trace, skew)[0]), 0
    lo = nodes[idx].copy()
    hi = nodes[idx + 1].copy()
    while np.max(hi - lo) > xtol:
        mid = 0.5 * (lo + hi)
        neg = _g(mid, trace, skew) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    roots = np.mod(0.5 * (lo + hi), 1.0)
    vals = _h(roots, trace, skew)
    best = int(np.argmin(vals))
    # ties: keep the smallest delta among equal objective values
    tied = np.nonzero(vals <= vals[best] + TIE_EPS)[0]
    best = int(tied[np.argmin(roots[tied])])
    return float(roots[best]), float(vals[best]), int(idx.size)


def shift_template(template, delta):
    """Template coefficients composed with ``gamma_{delta_j}`` per component."""
    out = np.array(template, dtype=float)
    A = out[:, :, 1:]
    L = A.shape[-1] // 2
    ang = TWO_PI * np.asarray(delta, dtype=float)[:, None] * np.arange(1, L + 1)
    c = np.cos(ang)[:, None, :]
    s = np.sin(ang)[:, None, :]
    a_sin = A[:, :, 0::2].copy()
    a_cos = A[:, :, 1::2].copy()
    A[:, :, 0::2] = a_sin * c + a_cos * s
    A[:, :, 1::2] = -a_sin * s + a_cos * c
    return out


def _objective(shifted, target, theta):
    c, s = math.cos(theta), math.sin(theta)
    R = np.array([[c, -s], [s, c]])
    diff = np.einsum("ab,jbm->jam", R, shifted) - target
    return float(np.sum(diff * diff))


def best_rotation(template, target, delta):
    """Procrustes rotation of the shifted template onto ``target``.

    Returns ``(theta, objective, degenerate)`` where ``theta`` is the better of
    the two roots ``theta_1``, ``theta_1 + pi`` of ``tan(theta) = num / den``.
    """
    shifted = shift_template(template, delta)
    H = np.einsum("jam,jbm->ab", shifted, target)
    num = H[0, 1] - H[1, 0]
    den = H[0, 0] + H[1, 1]
    if abs(num) < ROT_EPS and abs(den) < ROT_EPS:
        return 0.0, _objective(shifted, target, 0.0), True
    t1 = math.atan(num / den) if den != 0.0 else 0.5 * math.pi
    t1 = t1 % TWO_PI
    t2 = (t1 + math.pi) % TWO_PI
    f1 = _objective(shifted, target, t1)
    f2 = _objective(shifted, target, t2)
    if abs(f1 - f2) <= TIE_EPS:
        return min(t1, t2), min(f1, f2), False
    return (t1, f1, False) if f1 < f2 else (t2, f2, False)


def shift_stats(template, target, theta):
    """Per-component ``(trace, skew)`` arrays, each of shape ``(p, M/2)``."""
    c, s = math.cos(theta), math.sin(theta)
    R = np.array([[c, -s], [s, c]])
    Abar = np.einsum("ab,jbm->jam", R, np.asarray(template, dtype=float)[:, :, 1:])
    Astar = np.asarray(target, dtype=float)[:, :, 1:]
    bs, bc = Abar[:, :, 0::2], Abar[:, :, 1::2]
    ts, tc = Astar[:, :, 0::2], Astar[:, :, 1::2]
    s00 = np.sum(bs * ts, axis=1)
    s01 = np.sum(bs * tc, axis=1)
    s10 = np.sum(bc * ts, axis=1)
    s11 = np.sum(bc * tc, axis=1)
    return s00 + s11, s10 - s01


def icf_run(template, target, delta0, tol, max_iter, n_scan, xtol):
    """One ICF descent from the starting shifts ``delta0``.

    Alternates the rotation step and the ``p`` shift steps until the
    objective decreases by less than ``tol`` or ``max_iter`` iterations ran.

    Returns ``(theta, delta, objective, n_iter, history, flags)`` where
    ``history[k]`` is the objective after iteration ``k`` (``history[0]``
    after the initial rotation step) and ``flags`` is a bit mask:
    1 = rotation was indeterminate at some step, 2 = a shift objective was
    degenerate at some step.
    """
    template = np.asarray(template, dtype=float)
    target = np.asarray(target, dtype=float)
    p = template.shape[0]
    delta = np.mod(np.array(delta0, dtype=float), 1.0)
    flags = 0
    theta, obj, degen = best_rotation(template, target, delta)
    flags |= int(degen)
    history = [obj]
    n_iter = 0
    for it in range(max_iter):
        n_iter = it + 1
        trace, skew = shift_stats(template, target, theta)
        for j in range(p):
            d, _, nmin = best_shift(trace[j], skew[j], n_scan, xtol)
            delta[j] = d
            if nmin == 0:
                flags |= 2
        theta, new_obj, degen = best_rotation(template, target, delta)
        flags |= int(degen)
        history.append(new_obj)
        decrease = obj - new_obj
        obj = new_obj
        if decrease < tol:
            break
    return theta, delta, obj, n_iter, np.array(history), flags
