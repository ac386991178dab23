"""Reduced-kernel Volterra baseline for K=3 Wiener-Hammerstein channels.

A K=3 W-H channel with filters of ``L1`` and ``L2`` taps is exactly a
Volterra series whose cubic terms are products ``x(n-a) x(n-b) x(n-c)``
with ``a = i+m, b = j+m, c = l+m``. Kernels that multiply the same product
are summed, so each distinct sorted lag multiset gets one coefficient.
"""

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from . import lsq
from .channel import as_taps
from .errors import ParameterError


def enumerate_reduced_indices(L1, L2, K=3):
    """Canonical reduced index set as ``(k, lags)`` tuples.

    Order is ``k`` ascending, then lags lexicographically. Linear terms cover
    every lag in ``[0, L1+L2-2]``; order-``k`` terms cover every sorted
    multiset ``(i1+m, ..., ik+m)`` with ``i* < L1`` and ``m < L2``.
    """
    L1, L2 = int(L1), int(L2)
    if L1 < 1 or L2 < 1:
        raise ParameterError("L1 and L2 must be >= 1")
    indices = []
    for k in lsq.odd_orders(K):
        found = set()
        for base in itertools.combinations_with_replacement(range(L1), k):
            for m in range(L2):
                found.add(tuple(b + m for b in base))
        indices.extend((k, lags) for lags in sorted(found))
    return indices


def volterra_design(x, indices):
    """One column per index: the product of the lagged inputs (zero prefix)."""
    x = np.asarray(x, dtype=float)
    if not indices:
        raise ParameterError("empty index set")
    max_lag = max(max(lags) for _, lags in indices)
    padded = np.concatenate([np.zeros(max_lag), x])
    lagged = {}

    def lag(a):
        if a not in lagged:
            lagged[a] = padded[max_lag - a: max_lag - a + x.size]
        return lagged[a]

    X = np.empty((x.size, len(indices)))
    for col, (_, lags) in enumerate(indices):
        column = lag(lags[0]).copy()
        for a in lags[1:]:
            column *= lag(a)
        X[:, col] = column
    return X


@dataclass
class VolterraModel:
    indices: list
    kernels: np.ndarray

    def __post_init__(self):
        self.indices = [(int(k), tuple(int(a) for a in lags)) for k, lags in self.indices]
        self.kernels = np.asarray(self.kernels, dtype=float)
        if self.kernels.shape != (len(self.indices),):
            raise ParameterError("one kernel value per index is required")
        if len(set(self.indices)) != len(self.indices):
            raise ParameterError("duplicate kernel index")
        for k, lags in self.indices:
            if len(lags) != k or list(lags) != sorted(lags) or min(lags) < 0:
                raise ParameterError(f"malformed index {(k, lags)}")

    def predict(self, x):
        return volterra_design(x, self.indices) @ self.kernels

    def save_csv(self, path):
        with open(path, "w", newline="") as f:
            out = csv.writer(f)
            out.writerow(["k", "a", "b", "c", "value"])
            for (k, lags), v in zip(self.indices, self.kernels):
                padded = list(lags) + [""] * (3 - len(lags))
                out.writerow([k, *padded, repr(float(v))])

    @classmethod
    def load_csv(cls, path):
        indices, values = [], []
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                k = int(row["k"])
                lags = tuple(int(row[c]) for c in "abc" if row[c] != "")
                indices.append((k, lags))
                values.append(float(row["value"]))
        return cls(indices, np.array(values))


def _gamma(amp):
    coeffs = amp if isinstance(amp, dict) else amp.coeffs
    coeffs = {int(k): float(v) for k, v in coeffs.items()}
    if set(coeffs) - {1, 3}:
        raise ParameterError("only orders 1 and 3 are supported")
    return coeffs.get(1, 0.0), coeffs.get(3, 0.0)


def wh_to_kernels(h, amp, g):
    """Reduced kernels of the K=3 W-H channel ``g * c(h * x)``.

    ``amp`` is a polynomial amplifier or a ``{order: gamma}`` dict.
    """
    h, g = as_taps(h), as_taps(g)
    g1, g3 = _gamma(amp)
    L1, L2 = h.size, g.size
    indices = enumerate_reduced_indices(L1, L2)
    position = {idx: n for n, idx in enumerate(indices)}
    kernels = np.zeros(len(indices))
    for i in range(L1):
        for m in range(L2):
            kernels[position[(1, (i + m,))]] += g1 * g[m] * h[i]
    # Sum over ordered triples via the multiset multiplicity.
    for base in itertools.combinations_with_replacement(range(L1), 3):
        mult = len(set(itertools.permutations(base)))
        prod = h[base[0]] * h[base[1]] * h[base[2]] * mult
        for m in range(L2):
            kernels[position[(3, tuple(b + m for b in base))]] += g3 * g[m] * prod
    return VolterraModel(indices, kernels)


def estimate_volterra(x, w, L1, L2, ridge=None):
    """Least-squares reduced-kernel estimate from input ``x`` and output ``w``.

    Raises :class:`ConditioningError` when the design has fewer rows than
    kernels (unless ``ridge`` is given).
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise ParameterError("x and w must have the same length")
    indices = enumerate_reduced_indices(L1, L2)
    res = lsq.solve(volterra_design(x, indices), w, ridge=ridge)
    return VolterraModel(indices, res.coef)


def pilot_length_ratio(volterra_count, wh_count, ibo):
    """Pilot length ratio ``N_V / N_P ~ (L_V / L_P) / IBO`` (``ibo`` linear)."""
    if not (volterra_count > 0 and wh_count > 0 and ibo > 0):
        raise ParameterError("all arguments must be positive")
    return (volterra_count / wh_count) / ibo
