"""Hot numeric kernels.

Every kernel exists twice: a numba ``@njit`` loop (``*_jit``) and a numpy
implementation (``*_np``).  The public name dispatches on
``maxlim._accel.USE_JIT`` at call time, so both paths stay importable and
testable side by side.
"""
import numpy as np
from scipy.signal import lfilter, lfiltic

from maxlim import _accel
from maxlim._accel import njit

# ---------------------------------------------------------------------------
# J1 lattice: minimax monotone path over (f-jump count, g-jump count) states
# ---------------------------------------------------------------------------


@njit
def _vertical_cost(i, j, s, t, p):
    """Cost of the g-jump ``j`` (1-based) occurring while f sits in interval ``i``.

    Returns ``inf`` when no admissible position exists.
    """
    tj = t[j - 1]
    lo = 0.0 if i == 0 else s[i - 1]
    hi = 1.0 if i == p else s[i]
    if tj == 1.0:
        # a jump at 1 must stay at 1 (the time change fixes the endpoint)
        if i == p and lo < 1.0:
            return 0.0
        return np.inf
    if i == p and lo == 1.0:
        return np.inf
    if tj < lo:
        return lo - tj
    if tj > hi:
        return tj - hi
    return 0.0


@njit
def j1_lattice_jit(F, G, s, t):
    p = s.shape[0]
    q = t.shape[0]
    D = np.full((p + 1, q + 1), np.inf)
    for i in range(p + 1):
        for j in range(q + 1):
            node = abs(F[i] - G[j])
            if i == 0 and j == 0:
                D[0, 0] = node
                continue
            best = np.inf
            if i > 0:
                best = min(best, D[i - 1, j])
            if j > 0:
                vc = _vertical_cost(i, j, s, t, p)
                if vc < np.inf:
                    best = min(best, max(D[i, j - 1], vc))
            if i > 0 and j > 0:
                if (s[i - 1] == 1.0) == (t[j - 1] == 1.0):
                    best = min(best, max(D[i - 1, j - 1], abs(s[i - 1] - t[j - 1])))
            D[i, j] = max(best, node)
    return D[p, q]


def _vertical_costs_np(s, t):
    """Matrix of vertical step costs, shape (p + 1, q)."""
    p = len(s)
    lo = np.concatenate(([0.0], s))
    hi = np.concatenate((s, [1.0]))
    lo_m = lo[:, None]
    hi_m = hi[:, None]
    tt = t[None, :]
    cost = np.maximum(np.maximum(lo_m - tt, tt - hi_m), 0.0)
    at_one = tt == 1.0
    last_row = np.arange(p + 1)[:, None] == p
    ok_at_one = last_row & (lo_m < 1.0)
    cost = np.where(at_one, np.where(ok_at_one, 0.0, np.inf), cost)
    dead = last_row & (lo_m == 1.0) & ~at_one
    return np.where(dead, np.inf, cost)


def j1_lattice_np(F, G, s, t):
    p, q = len(s), len(t)
    node = np.abs(F[:, None] - G[None, :])
    vert = _vertical_costs_np(s, t)
    diag = np.abs(s[:, None] - t[None, :])
    diag = np.where((s[:, None] == 1.0) == (t[None, :] == 1.0), diag, np.inf)
    D = np.full((p + 1, q + 1), np.inf)
    for i in range(p + 1):
        # contributions from the previous row vectorise; the in-row scan does not
        from_prev = np.full(q + 1, np.inf)
        if i > 0:
            from_prev = D[i - 1].copy()
            from_prev[1:] = np.minimum(from_prev[1:], np.maximum(D[i - 1, :-1], diag[i - 1]))
        row = np.empty(q + 1)
        row[0] = max(from_prev[0], node[i, 0]) if i > 0 else node[0, 0]
        for j in range(1, q + 1):
            best = min(from_prev[j], max(row[j - 1], vert[i, j - 1]))
            row[j] = max(best, node[i, j])
        D[i] = row
    return float(D[p, q])


def j1_lattice(F, G, s, t):
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (F, G, s, t)]
    if _accel.USE_JIT:
        return float(j1_lattice_jit(*args))
    return j1_lattice_np(*args)


# ---------------------------------------------------------------------------
# Discrete Frechet distance under the sup-norm on R^2
# ---------------------------------------------------------------------------


@njit
def frechet_linf_jit(P, Q):
    n = P.shape[0]
    m = Q.shape[0]
    prev = np.empty(m)
    cur = np.empty(m)
    for i in range(n):
        for j in range(m):
            d = max(abs(P[i, 0] - Q[j, 0]), abs(P[i, 1] - Q[j, 1]))
            if i == 0 and j == 0:
                cur[j] = d
            elif i == 0:
                cur[j] = max(d, cur[j - 1])
            elif j == 0:
                cur[j] = max(d, prev[0])
            else:
                cur[j] = max(d, min(prev[j], cur[j - 1], prev[j - 1]))
        prev, cur = cur, prev
    return prev[m - 1]


def frechet_linf_np(P, Q):
    # sweep anti-diagonals i + j = d; each depends only on the two before it
    n, m = len(P), len(Q)
    prev2 = np.full(n, np.inf)
    prev1 = np.full(n, np.inf)
    for d in range(n + m - 1):
        i_lo, i_hi = max(0, d - m + 1), min(d, n - 1)
        i = np.arange(i_lo, i_hi + 1)
        j = d - i
        c = np.maximum(np.abs(P[i, 0] - Q[j, 0]), np.abs(P[i, 1] - Q[j, 1]))
        cur = np.full(n, np.inf)
        if d == 0:
            cur[0] = c[0]
        else:
            up = np.where(i > 0, prev1[np.maximum(i - 1, 0)], np.inf)
            left = np.where(j > 0, prev1[i], np.inf)
            dg = np.where((i > 0) & (j > 0), prev2[np.maximum(i - 1, 0)], np.inf)
            cur[i] = np.maximum(c, np.minimum(np.minimum(up, left), dg))
        prev2, prev1 = prev1, cur
    return float(prev1[n - 1])


def frechet_linf(P, Q):
    P = np.ascontiguousarray(P, dtype=np.float64)
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    if _accel.USE_JIT:
        return float(frechet_linf_jit(P, Q))
    return frechet_linf_np(P, Q)


# ---------------------------------------------------------------------------
# J1 oscillation of a step function
# ---------------------------------------------------------------------------


@njit
def oscillation_jit(levels, times, delta):
    # interval a = [times[a-1], times[a]) with times[-1] := 0; levels[a] on it
    k = times.shape[0]
    best = 0.0
    for a in range(k - 1):
        for c in range(a + 2, k + 1):
            if times[c - 1] - times[a] >= delta:
                break
            for b in range(a + 1, c):
                v = min(abs(levels[b] - levels[a]), abs(levels[c] - levels[b]))
                if v > best:
                    best = v
    return best


def oscillation_np(levels, times, delta):
    k = len(times)
    best = 0.0
    for a in range(k - 1):
        c = np.arange(a + 2, k + 1)
        c = c[times[c - 1] - times[a] < delta]
        if c.size == 0:
            continue
        b = np.arange(a + 1, c.max())
        left = np.abs(levels[b] - levels[a])[:, None]
        right = np.abs(levels[c][None, :] - levels[b][:, None])
        val = np.minimum(left, right)
        val = np.where(b[:, None] < c[None, :], val, 0.0)
        best = max(best, float(val.max()))
    return best


def oscillation(levels, times, delta):
    levels = np.ascontiguousarray(levels, dtype=np.float64)
    times = np.ascontiguousarray(times, dtype=np.float64)
    if _accel.USE_JIT:
        return float(oscillation_jit(levels, times, float(delta)))
    return oscillation_np(levels, times, float(delta))


# ---------------------------------------------------------------------------
# Autoregressive recursion h[t] = sum_j phi[j] h[t-1-j] + innov[t]
# ---------------------------------------------------------------------------


@njit
def ar_filter_jit(phi, h_init, innov):
    p = phi.shape[0]
    n = innov.shape[0]
    h = np.empty(n)
    for t in range(min(p, n)):
        h[t] = h_init[t]
    for t in range(p, n):
        acc = innov[t]
        for j in range(p):
            acc += phi[j] * h[t - 1 - j]
        h[t] = acc
    return h


def ar_filter_np(phi, h_init, innov):
    p, n = len(phi), len(innov)
    if n <= p:
        return np.array(h_init[:n], dtype=np.float64)
    a = np.concatenate(([1.0], -phi))
    zi = lfiltic([1.0], a, y=h_init[::-1])
    tail, _ = lfilter([1.0], a, innov[p:], zi=zi)
    return np.concatenate((h_init, tail))


def ar_filter(phi, h_init, innov):
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    h_init = np.ascontiguousarray(h_init, dtype=np.float64)
    innov = np.ascontiguousarray(innov, dtype=np.float64)
    if _accel.USE_JIT:
        return ar_filter_jit(phi, h_init, innov)
    return ar_filter_np(phi, h_init, innov)
