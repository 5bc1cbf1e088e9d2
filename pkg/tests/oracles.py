"""Independent reference implementations used by the tests.

Everything here is written as plain loops or dense textbook formulas so it
shares no code path with the package.
"""
import math

import numpy as np


def gram_loop(x, kind="linear", gamma=None):
    n = x.shape[0]
    k = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if kind == "linear":
                k[i, j] = sum(a * b for a, b in zip(x[i], x[j]))
            else:
                k[i, j] = math.exp(-gamma * sum((a - b) ** 2 for a, b in zip(x[i], x[j])))
    return k


def centering(n):
    return np.eye(n) - np.ones((n, n)) / n


def frob(a, b):
    return float(sum(a[i, j] * b[i, j] for i in range(a.shape[0]) for j in range(a.shape[1])))


def ka_loop(k1, k2):
    return frob(k1, k2) / math.sqrt(frob(k1, k1) * frob(k2, k2))


def hsic_dense(k1, k2):
    n = k1.shape[0]
    h = centering(n)
    return float(np.trace(k1 @ h @ k2 @ h)) / (n - 1) ** 2


def hsic_unbiased_loop(k1, k2):
    """Unbiased HSIC from its index-tuple definition, summed term by term."""
    n = k1.shape[0]
    idx = range(n)
    t1 = t2 = t3 = 0.0
    for i in idx:
        for j in idx:
            if i == j:
                continue
            t1 += k1[i, j] * k2[i, j]
    for i in idx:
        for j in idx:
            for q in idx:
                if len({i, j, q}) == 3:
                    t3 += k1[i, j] * k2[i, q]
    s1 = sum(k1[i, j] for i in idx for j in idx if i != j)
    s2 = sum(k2[i, j] for i in idx for j in idx if i != j)
    # E over distinct 4-tuples of k1[i,j] k2[q,r] computed from pair sums
    pairs1 = s1
    pairs2 = s2
    # subtract overlaps to get sum over distinct (i,j,q,r)
    overlap = 0.0
    for i in idx:
        for j in idx:
            if i == j:
                continue
            # (q, r) distinct pair sharing an index with (i, j)
            for q in idx:
                for r in idx:
                    if q == r:
                        continue
                    if len({i, j, q, r}) < 4:
                        overlap += k1[i, j] * k2[q, r]
    t2 = pairs1 * pairs2 - overlap
    n2 = n * (n - 1)
    n3 = n * (n - 1) * (n - 2)
    n4 = n * (n - 1) * (n - 2) * (n - 3)
    return t1 / n2 + t2 / n4 - 2 * t3 / n3


def mmd2_loop(a, b, kernel):
    m, n = len(a), len(b)
    kaa = sum(kernel(a[i], a[j]) for i in range(m) for j in range(m)) / m**2
    kbb = sum(kernel(b[i], b[j]) for i in range(n) for j in range(n)) / n**2
    kab = sum(kernel(a[i], b[j]) for i in range(m) for j in range(n)) / (m * n)
    return kaa + kbb - 2 * kab


def distance_alignment_loop(x1, x2):
    n = x1.shape[0]
    tot = 0.0
    for i in range(n):
        for j in range(n):
            d1 = sum((a - b) ** 2 for a, b in zip(x1[i], x1[j]))
            d2 = sum((a - b) ** 2 for a, b in zip(x2[i], x2[j]))
            tot += (d1 - d2) ** 2
    return tot / n**2


def kare_dense(k, y, lam):
    n = k.shape[0]
    y = y.reshape(n, -1)
    a = np.linalg.inv(k / n + lam * np.eye(n))
    num = np.trace(y.T @ a @ a @ y) / n
    den = (np.trace(a) / n) ** 2
    return float(num / den)


def parzen_loo_loop(k, y):
    """(risk with sqrt(E K^2) normalisation, risk with E K^2), off-diagonal expectations."""
    n = k.shape[0]
    ek2 = sum(k[i, j] ** 2 for i in range(n) for j in range(n) if i != j) / (n * (n - 1))
    r_root = r_plain = 0.0
    for i in range(n):
        m = sum(k[i, j] * y[j] for j in range(n) if j != i) / (n - 1)
        r_root += (m / math.sqrt(ek2) - y[i]) ** 2
        r_plain += (m / ek2 - y[i]) ** 2
    return r_root / n, r_plain / n


def canonical_correlations_dense(x, y):
    """Singular values of inv(chol(Sxx)) Sxy inv(chol(Syy))^T with 1/n covariances."""
    x = x - x.mean(axis=0)
    y = y - y.mean(axis=0)
    n = x.shape[0]
    sxx, syy, sxy = x.T @ x / n, y.T @ y / n, x.T @ y / n
    lx = np.linalg.cholesky(sxx)
    ly = np.linalg.cholesky(syy)
    w = np.linalg.solve(lx, sxy) @ np.linalg.inv(ly).T
    return np.linalg.svd(w, compute_uv=False)


def gaussian_mi_logdet(x, y):
    """0.5 log(|S11| |S22| / |S|) from the joint 1/n covariance."""
    z = np.hstack([x, y])
    z = z - z.mean(axis=0)
    s = z.T @ z / z.shape[0]
    d1 = x.shape[1]
    _, a = np.linalg.slogdet(s[:d1, :d1])
    _, b = np.linalg.slogdet(s[d1:, d1:])
    _, c = np.linalg.slogdet(s)
    return 0.5 * (a + b - c)


def ols_loop_risk(S, W, x1, y):
    n = x1.shape[0]
    tot = 0.0
    for i in range(n):
        pred = W @ (S @ x1[i])
        tot += float(np.sum((pred - y[i]) ** 2))
    return tot / n


def lstsq_residual(x, y):
    """min_B mean |B x_i - y_i|^2 via the normal equations on full-rank x."""
    b = np.linalg.solve(x.T @ x, x.T @ y)
    r = x @ b - y
    return float(np.sum(r**2) / x.shape[0]), b.T
