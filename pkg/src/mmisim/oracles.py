"""Slow reference computations used to cross-check the fast paths."""
from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np


def multinomial_expansion(S: np.ndarray, occupations: tuple[int, ...]) -> dict[tuple[int, ...], complex]:
    """Output amplitudes of the Fock input ``occupations`` by expanding
    prod_i (sum_j S[j, i] b_j^dag)^{n_i} / sqrt(n_i!) monomial by monomial."""
    S = np.asarray(S, dtype=complex)
    m = S.shape[0]
    poly: dict[tuple[int, ...], complex] = {(0,) * m: 1.0 + 0j}
    for i, n in enumerate(occupations):
        for _ in range(n):
            nxt: dict[tuple[int, ...], complex] = defaultdict(complex)
            for mono, c in poly.items():
                for j in range(m):
                    if S[j, i] == 0:
                        continue
                    key = list(mono)
                    key[j] += 1
                    nxt[tuple(key)] += c * S[j, i]
            poly = dict(nxt)
        poly = {k: v / math.sqrt(math.factorial(n)) for k, v in poly.items()}
    # (b^dag)^k |0> = sqrt(k!) |k>
    return {k: v * math.sqrt(math.prod(math.factorial(x) for x in k)) for k, v in poly.items()}


def permanent(M: np.ndarray) -> complex:
    """Permanent by Ryser's formula."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if n == 0:
        return 1.0 + 0j
    total = 0j
    for r in range(1, n + 1):
        for cols in itertools.combinations(range(n), r):
            total += (-1) ** r * np.prod(M[:, cols].sum(axis=1))
    return (-1) ** n * total


def permanent_amplitude(S: np.ndarray, inp: tuple[int, ...], out: tuple[int, ...]) -> complex:
    """<out| U(S) |inp> = perm(S[out rows, inp cols]) / sqrt(prod n! prod m!)."""
    if sum(inp) != sum(out):
        return 0j
    rows = [j for j, k in enumerate(out) for _ in range(k)]
    cols = [i for i, k in enumerate(inp) for _ in range(k)]
    norm = math.sqrt(math.prod(math.factorial(x) for x in inp)
                     * math.prod(math.factorial(x) for x in out))
    return permanent(np.asarray(S)[np.ix_(rows, cols)]) / norm


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
