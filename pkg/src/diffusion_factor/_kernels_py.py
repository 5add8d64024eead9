"""Pure numpy implementations of the hot kernels.

Mirrors ``_kernels.pyx`` function for function.  The Jacobi solver here
uses a round-robin (parallel) cyclic ordering so that each round of
disjoint rotations is a handful of vectorized numpy operations; the
compiled kernel uses the row-cyclic ordering.  Both converge to the same
spectrum; eigenvector signs are fixed afterwards by the caller.
"""

import numpy as np

BACKEND = "python"

_BISECT_ITERS = 200


def _round_robin(n):
    """Pairings for one sweep: ``n - 1`` rounds (``n`` even) of disjoint pairs."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_norm(a):
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigh(a, tol, max_sweeps):
    """Cyclic Jacobi eigensolver.

    Returns ``(values, vectors, sweeps, off_norm)``; values unsorted.
    Iterates until the off-diagonal Frobenius norm is ``<= tol``.
    """
    a = np.array(a, dtype=np.float64, order="C", copy=True)
    n = a.shape[0]
    v = np.eye(n)
    if n < 2:
        return np.diag(a).copy(), v, 0, 0.0
    rounds = _round_robin(n)
    off = _off_norm(a)
    sweeps = 0
    while off > tol and sweeps < max_sweeps:
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            app = a[p, p] - t * apq
            aqq = a[q, q] + t * apq
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * cp - s * cq
            a[:, q] = s * cp + c * cq
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            a[p, p] = app
            a[q, q] = aqq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        sweeps += 1
        off = _off_norm(a)
    return np.diag(a).copy(), v, sweeps, off


def _shift_root(v, f, half_width):
    """Solve ``sum(f(v - tau)) = 1`` for the nonincreasing piecewise-linear
    ``f`` with kinks at ``+-half_width``; exact, via the sorted breakpoints."""
    bp = np.sort(np.concatenate([v - half_width, v + half_width]))
    s = f(v[None, :] - bp[:, None]).sum(axis=1)
    above = np.nonzero(s >= 1.0)[0]
    if above.size == 0:
        return bp[0] - (1.0 - s[0]) / v.size
    k = above[-1]
    if k == bp.size - 1 or s[k] == s[k + 1]:
        return bp[k]
    return bp[k] + (s[k] - 1.0) * (bp[k + 1] - bp[k]) / (s[k] - s[k + 1])


def project_box_hyperplane(v, bound):
    """Euclidean projection onto ``{w : sum(w) = 1, |w_i| <= bound}``."""
    v = np.asarray(v, dtype=np.float64)
    tau = _shift_root(v, lambda x: np.clip(x, -bound, bound), bound)
    return np.clip(v - tau, -bound, bound)


def _soft(x, lam):
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def _soft_tau(v, lam):
    return _shift_root(v, lambda x: _soft(x, lam), lam)


def project_l1_hyperplane(v, bound):
    """Euclidean projection onto ``{w : sum(w) = 1, sum|w_i| <= bound}``."""
    v = np.asarray(v, dtype=np.float64)
    w = v - (v.sum() - 1.0) / v.size
    if np.abs(w).sum() <= bound:
        return w
    lo, hi = 0.0, float(v.max() - v.min()) + 1.0
    for _ in range(_BISECT_ITERS):
        lam = 0.5 * (lo + hi)
        w = _soft(v - _soft_tau(v, lam), lam)
        if np.abs(w).sum() > bound:
            lo = lam
        else:
            hi = lam
        if hi - lo <= 1e-16 * max(1.0, lam):
            break
    lam = 0.5 * (lo + hi)
    tau = _soft_tau(v, lam)
    x = v - tau
    free = np.abs(x) > lam
    s = np.sign(x[free])
    nf = float(free.sum())
    ss = float(s.sum())
    det = nf * nf - ss * ss
    if nf > 0 and abs(det) > 1e-12 * nf * nf:
        # sign pattern fixed: budget and l1 equations are linear in (tau, lam)
        r1 = v[free].sum() - 1.0
        r2 = (s * v[free]).sum() - bound
        tau_x = (nf * r1 - ss * r2) / det
        lam_x = (nf * r2 - ss * r1) / det
        if lam_x >= 0 and np.array_equal(np.abs(v - tau_x) > lam_x, free):
            return _soft(v - tau_x, lam_x)
    return _soft(v - tau, lam)


def pgd_qp(mu, sigma, eta, step, kind, bound, w0, tol, max_iter):
    """Projected gradient ascent on ``w.mu - eta/2 w.Sigma.w``.

    ``kind``: 0 = budget only, 1 = box, 2 = l1.  Returns ``(w, iters)``.
    """
    w = np.array(w0, dtype=np.float64, copy=True)
    d = w.size
    it = 0
    for it in range(1, max_iter + 1):
        x = w + step * (mu - eta * (sigma @ w))
        if kind == 0:
            x = x - (x.sum() - 1.0) / d
        elif kind == 1:
            x = project_box_hyperplane(x, bound)
        else:
            x = project_l1_hyperplane(x, bound)
        move = np.sqrt(np.sum((x - w) ** 2))
        w = x
        if move < tol:
            break
    return w, it
