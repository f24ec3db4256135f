"""Independent brute-force metric implementations (explicit loops, no shared code)."""

import math


def nrmse_loop(true, est):
    lo, hi = min(true), max(true)
    total = 0.0
    for t, e in zip(true, est):
        total += (t - e) ** 2 / (hi - lo)
    return math.sqrt(total)


def r2_loop(true, est):
    mean = sum(true) / len(true)
    sse = sum((t - e) ** 2 for t, e in zip(true, est))
    sst = sum((t - mean) ** 2 for t in true)
    return 1.0 - sse / sst


def _inv_and_logdet(m):
    # Gauss-Jordan elimination with partial pivoting on a list-of-lists copy
    n = len(m)
    a = [list(map(float, row)) + [1.0 if i == j else 0.0 for j in range(n)] for i, row in enumerate(m)]
    logdet = 0.0
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(a[r][c]))
        if p != c:
            a[c], a[p] = a[p], a[c]
        piv = a[c][c]
        logdet += math.log(abs(piv))
        a[c] = [v / piv for v in a[c]]
        for r in range(n):
            if r != c and a[r][c] != 0.0:
                f = a[r][c]
                a[r] = [vr - f * vc for vr, vc in zip(a[r], a[c])]
    return [row[n:] for row in a], logdet


def kl_full_loop(mp, cp, mq, cq):
    d = len(mp)
    iq, ldq = _inv_and_logdet(cq)
    _, ldp = _inv_and_logdet(cp)
    trace = sum(iq[i][k] * cp[k][i] for i in range(d) for k in range(d))
    diff = [mp[i] - mq[i] for i in range(d)]
    quad = sum(diff[i] * iq[i][k] * diff[k] for i in range(d) for k in range(d))
    return 0.5 * (ldq - ldp + trace - d + quad)


def kl_diag_loop(mp, sp, mq, sq):
    total = 0.0
    for a, b, c, e in zip(mp, sp, mq, sq):
        total += math.log(e / b) + (b * b + (c - a) ** 2) / (2 * e * e) - 0.5
    return total


def mmd_loop(a, b):
    pooled = list(a) + list(b)

    def dist(x, y):
        return math.sqrt(sum((u - v) ** 2 for u, v in zip(x, y)))

    ds = sorted(dist(pooled[i], pooled[j]) for i in range(len(pooled)) for j in range(i + 1, len(pooled)))
    n = len(ds)
    h = ds[n // 2] if n % 2 else 0.5 * (ds[n // 2 - 1] + ds[n // 2])
    h = h if h > 0 else 1.0

    def k(x, y):
        return math.exp(-sum((u - v) ** 2 for u, v in zip(x, y)) / (2 * h * h))

    def mean_k(xs, ys):
        return sum(k(x, y) for x in xs for y in ys) / (len(xs) * len(ys))

    return mean_k(a, a) + mean_k(b, b) - 2 * mean_k(a, b)
