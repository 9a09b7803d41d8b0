"""Rank-based comparison of several classifiers over several datasets.

Friedman test on average ranks, followed by Holm's step-down procedure
against a control algorithm. The chi-square tail probability is evaluated
through the regularized upper incomplete gamma function implemented here.
"""

import math

import numpy as np
from scipy.special import betainc

TIE_DECIMALS = 4


def _gamma_series(a, x, eps=1e-15, itmax=10_000):
    # lower regularized P(a, x) by its power series; converges fast for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(itmax):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * eps:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a, x, eps=1e-15, itmax=10_000):
    # upper regularized Q(a, x) by modified Lentz on its continued fraction
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, itmax):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammaincc(a, x):
    """Regularized upper incomplete gamma ``Q(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return _gamma_cfrac(a, x)


def chi2_sf(x, df):
    """Upper tail ``P(X >= x)`` of a chi-square variable with ``df`` degrees of freedom."""
    if x <= 0:
        return 1.0
    return gammaincc(df / 2.0, x / 2.0)


def normal_sf(z):
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def rank_rows(matrix, decimals=TIE_DECIMALS):
    """Per-row ranks, 1 for the highest value, tied values sharing their mean rank."""
    A = np.round(np.asarray(matrix, dtype=np.float64), decimals)
    ranks = np.empty_like(A)
    for r, row in enumerate(A):
        order = np.argsort(-row, kind="stable")
        sorted_vals = row[order]
        i = 0
        while i < row.size:
            j = i
            while j + 1 < row.size and sorted_vals[j + 1] == sorted_vals[i]:
                j += 1
            ranks[r, order[i : j + 1]] = (i + j) / 2.0 + 1.0
            i = j + 1
    return ranks


def friedman_test(matrix):
    """Friedman test over an ``N datasets x k algorithms`` score matrix.

    Returns a dict with ``avg_ranks``, ``statistic`` (chi-square form),
    ``pvalue`` and the Iman-Davenport refinement (``iman_davenport``,
    ``iman_davenport_pvalue``) for reference.
    """
    A = np.asarray(matrix, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 2 or A.shape[1] < 2:
        raise ValueError(f"need at least 2 datasets and 2 algorithms, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ValueError("score matrix has missing or non-finite cells")
    N, k = A.shape
    R = rank_rows(A).mean(axis=0)
    stat = 12.0 * N / (k * (k + 1)) * (float(np.sum(R**2)) - k * (k + 1) ** 2 / 4.0)
    stat = max(stat, 0.0)
    denom = N * (k - 1) - stat
    if denom > 0:
        ff = (N - 1) * stat / denom
        d1, d2 = k - 1, (k - 1) * (N - 1)
        ff_p = float(betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * ff)))
    else:
        ff, ff_p = math.inf, 0.0
    return {
        "avg_ranks": R,
        "statistic": stat,
        "pvalue": chi2_sf(stat, k - 1),
        "iman_davenport": ff,
        "iman_davenport_pvalue": ff_p,
    }


def holm_adjust(pvalues):
    """Holm step-down adjusted p-values, returned in the input order."""
    p = np.asarray(pvalues, dtype=np.float64)
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for pos, idx in enumerate(order):
        running = max(running, min(1.0, (m - pos) * p[idx]))
        adjusted[idx] = running
    return adjusted


def holm_posthoc(avg_ranks, n_datasets, control=None, alpha=0.05):
    """Compare every algorithm with ``control`` (default: best average rank).

    Returns ``(control_index, rows)`` where each row is a dict with
    ``index``, ``z``, ``raw_p``, ``adjusted_p`` and ``reject``.
    """
    R = np.asarray(avg_ranks, dtype=np.float64)
    k = R.size
    if control is None:
        control = int(np.argmin(R))
    se = math.sqrt(k * (k + 1) / (6.0 * n_datasets))
    others = [j for j in range(k) if j != control]
    z = [(R[j] - R[control]) / se for j in others]
    raw = [min(1.0, 2.0 * normal_sf(abs(v))) for v in z]
    adj = holm_adjust(raw)
    rows = [
        {"index": j, "z": zj, "raw_p": pj, "adjusted_p": float(aj), "reject": bool(aj < alpha)}
        for j, zj, pj, aj in zip(others, z, raw, adj)
    ]
    return control, rows


def win_tie_loss(matrix, control, decimals=TIE_DECIMALS):
    """``(win, tie, loss)`` of ``control`` against every column, per dataset."""
    A = np.round(np.asarray(matrix, dtype=np.float64), decimals)
    c = A[:, control][:, None]
    return [
        (int(w), int(t), int(l))
        for w, t, l in zip((c > A).sum(axis=0), (c == A).sum(axis=0), (c < A).sum(axis=0))
    ]
