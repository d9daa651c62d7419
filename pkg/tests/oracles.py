"""Independent reference implementations used to pin expected values.

Each oracle deliberately avoids the code paths it checks: the ridge solution
comes from plain gradient descent, spectra from direct O(n^2) summation, and
the signed-rank null distribution from explicit sign enumeration.
"""

import itertools

import numpy as np


def ridge_gd(H, Y, c_reg, tol=1e-9, max_iter=500_000):
    """Gradient-descent minimizer of (C/2)||H b - Y||^2 + (1/2)||b||^2."""
    H = np.asarray(H, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    lip = c_reg * float(np.linalg.eigvalsh(H.T @ H)[-1]) + 1.0
    step = 1.0 / lip
    beta = np.zeros((H.shape[1], Y.shape[1]))
    for _ in range(max_iter):
        grad = c_reg * (H.T @ (H @ beta - Y)) + beta
        if np.abs(grad).max() < tol:
            break
        beta = beta - step * grad
    return beta


def dft_magnitude(x):
    """One-sided |DFT| by direct summation."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    bins = n // 2 + 1
    out = np.empty(bins)
    t = np.arange(n)
    for k in range(bins):
        out[k] = np.abs(np.sum(x * np.exp(-2j * np.pi * k * t / n)))
    return out


def wilcoxon_exact_bruteforce(diff):
    """Two-sided exact signed-rank p-value by enumerating all sign patterns.

    Uses average ranks on tied absolute differences; p = min(1, 2 * P(W+ <= T))
    with T = min(W+, W-) under the enumerated null.
    """
    diff = np.asarray(diff, dtype=np.float64)
    diff = diff[diff != 0.0]
    n = diff.size
    ranks = _average_ranks(np.abs(diff))
    w_plus = ranks[diff > 0].sum()
    w_minus = ranks.sum() - w_plus
    t_obs = min(w_plus, w_minus)
    count = 0
    for signs in itertools.product((0.0, 1.0), repeat=n):
        if np.dot(ranks, signs) <= t_obs + 1e-12:
            count += 1
    p = min(1.0, 2.0 * count / 2.0 ** n)
    return t_obs, p


def _average_ranks(values):
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks
