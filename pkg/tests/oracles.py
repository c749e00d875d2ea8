"""Brute-force pair-enumeration oracles shared by the test modules.

Every Omega estimator is a sum over observation pairs (i,t),(j,s) of a pair
weight times s_it s_js', scaled by (NT)^-2. The weight functions below encode
which pairs each estimator treats as dependent.
"""

import itertools
import math

import numpy as np


def pair_weight_ehw(i, t, j, s):
    return float(i == j and t == s)


def pair_weight_cr_unit(i, t, j, s):
    return float(i == j)


def pair_weight_cr_time(i, t, j, s):
    return float(t == s)


def pair_weight_cgm(i, t, j, s):
    return float(i == j or t == s)


def pair_weight_thompson(M):
    def w(i, t, j, s):
        return float(i == j or abs(t - s) <= M)
    return w


def pair_weight_chs(M, kind):
    def w(i, t, j, s):
        if i == j or t == s:
            return 1.0
        lag = abs(t - s)
        if lag > math.floor(M):
            return 0.0
        return 1.0 if kind == "uniform" else 1.0 - lag / (M + 1.0)
    return w


def oracle(s, weight):
    N, T, k = s.shape
    out = np.zeros((k, k))
    for i, t, j, u in itertools.product(range(N), range(T), range(N), range(T)):
        w = weight(i, t, j, u)
        if w:
            out += w * np.outer(s[i, t], s[j, u])
    return out / (N * T) ** 2


def rel_err(a, b):
    scale = max(np.linalg.norm(b), 1e-300)
    return np.linalg.norm(a - b) / scale
