"""Slow reference implementations written straight from the formulas.

Nothing here imports from threshnet; plain Python loops and lists only,
so these stay independent of the vectorized code they check.
"""

import math


def normalize(raw_rows):
    out = []
    for row in raw_rows:
        t = len(row)
        mean = sum(row) / t
        var = sum((x - mean) ** 2 for x in row) / t
        sd = math.sqrt(var)
        out.append([(x - mean) / sd for x in row])
    return out


def q_static(r):
    n, t = len(r), len(r[0])
    total = 0.0
    for d in range(t):
        for i in range(n):
            for j in range(i + 1, n):
                total += r[i][d] * r[j][d]
    return 2.0 * total / (n * (n - 1) * t)


def q_dynamic(r):
    n, t = len(r), len(r[0])
    out = []
    for d in range(t):
        s = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                s += r[i][d] * r[j][d]
        out.append(2.0 * s / (n * (n - 1)))
    return out


def edges(r, d, zeta):
    n = len(r)
    return {(i, j) for i in range(n) for j in range(i + 1, n) if r[i][d] * r[j][d] > zeta}


def frame_edges(values, zeta):
    n = len(values)
    return {(i, j) for i in range(n) for j in range(i + 1, n) if values[i][j] > zeta}


def neighbours(n, edge_set):
    nb = [set() for _ in range(n)]
    for i, j in edge_set:
        nb[i].add(j)
        nb[j].add(i)
    return nb


def clustering(n, edge_set):
    nb = neighbours(n, edge_set)
    cs = []
    for i in range(n):
        k = len(nb[i])
        if k < 2:
            cs.append(0.0)
            continue
        tri = 0
        for a in nb[i]:
            for b in nb[i]:
                if a < b and b in nb[a]:
                    tri += 1
        cs.append(tri / (k * (k - 1) / 2))
    return cs


def assortativity(n, edge_set):
    nb = neighbours(n, edge_set)
    m = len(edge_set)
    if m == 0:
        return None
    jk = sum(len(nb[i]) * len(nb[j]) for i, j in edge_set) / m
    half = sum(0.5 * (len(nb[i]) + len(nb[j])) for i, j in edge_set) / m
    sq = sum(0.5 * (len(nb[i]) ** 2 + len(nb[j]) ** 2) for i, j in edge_set) / m
    den = sq - half ** 2
    if abs(den) < 1e-12:
        return None
    return (jk - half ** 2) / den


def topology(r, zetas):
    """Per-day (C, K, r, degrees) lists for thresholds ``zetas[d]``."""
    n, t = len(r), len(r[0])
    cs, ks, rs, degs = [], [], [], []
    for d in range(t):
        e = edges(r, d, zetas[d])
        nb = neighbours(n, e)
        cs.append(sum(clustering(n, e)) / n)
        ks.append(sum(len(x) for x in nb) / n)
        rs.append(assortativity(n, e))
        degs.append([len(x) for x in nb])
    return cs, ks, rs, degs


def degree_corr_matrix(degrees_by_day):
    """Eq for F_ij from per-day degree lists; constant series skipped."""
    t = len(degrees_by_day)
    n = len(degrees_by_day[0])
    series = [[degrees_by_day[d][i] for d in range(t)] for i in range(n)]
    keep = [i for i in range(n) if max(series[i]) != min(series[i])]
    z = normalize([series[i] for i in keep])
    f = [[sum(z[a][d] * z[b][d] for d in range(t)) / t for b in range(len(keep))]
         for a in range(len(keep))]
    return keep, f


def dfa_fluctuation(series, scale):
    t = len(series)
    mean = sum(series) / t
    prof, acc = [], 0.0
    for x in series:
        acc += x - mean
        prof.append(acc)
    n_win = t // scale
    total = 0.0
    for w in range(n_win):
        ys = prof[w * scale:(w + 1) * scale]
        xs = list(range(scale))
        # normal equations for y = a + b x
        sx, sy = sum(xs), sum(ys)
        sxx = sum(x * x for x in xs)
        sxy = sum(x * y for x, y in zip(xs, ys))
        b = (scale * sxy - sx * sy) / (scale * sxx - sx * sx)
        a = (sy - b * sx) / scale
        total += sum((y - a - b * x) ** 2 for x, y in zip(xs, ys))
    return math.sqrt(total / (n_win * scale))


def jacobi_eigen(a, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi rotations on a symmetric list-of-lists matrix.

    Returns (eigenvalues, eigenvectors as columns), unsorted.
    """
    n = len(a)
    a = [row[:] for row in a]
    v = [[float(i == j) for j in range(n)] for i in range(n)]
    for _ in range(max_sweeps):
        off = sum(a[i][j] ** 2 for i in range(n) for j in range(n) if i != j)
        if off <= tol * tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p][q] == 0.0:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q])
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
                for k in range(n):
                    vkp, vkq = v[k][p], v[k][q]
                    v[k][p] = c * vkp - s * vkq
                    v[k][q] = s * vkp + c * vkq
    return [a[i][i] for i in range(n)], v
