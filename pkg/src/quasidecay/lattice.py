"""Exact LLL reduction and Fincke-Pohst shortest-vector enumeration.

Bases are lists of row vectors with ``Fraction`` (or int) entries.  Every
comparison that decides the answer is done in exact arithmetic; floats only
seed the enumeration bounds, which are then corrected exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .exact import dot, to_fraction

MAX_DIM = 8


class EnumerationBudgetError(RuntimeError):
    def __init__(self, nodes: int, best_sq):
        super().__init__(f"enumeration stopped after {nodes} nodes; best length^2 so far {best_sq}")
        self.nodes = nodes
        self.best_sq = best_sq


def _gram_schmidt(b):
    n = len(b)
    bstar, mu, norms = [], [[Fraction(0)] * n for _ in range(n)], []
    for i in range(n):
        v = list(b[i])
        for j in range(i):
            mu[i][j] = dot(b[i], bstar[j]) / norms[j] if norms[j] else Fraction(0)
            v = [x - mu[i][j] * y for x, y in zip(v, bstar[j])]
        bstar.append(v)
        norms.append(dot(v, v))
    return bstar, mu, norms


def lll_reduce(rows: Sequence[Sequence], delta=Fraction(3, 4), with_transform: bool = False):
    """LLL-reduce the row basis exactly; optionally return ``U`` with ``U @ rows = reduced``."""
    b = [[to_fraction(x) for x in r] for r in rows]
    n = len(b)
    u = [[int(i == j) for j in range(n)] for i in range(n)]
    if n <= 1:
        return (b, u) if with_transform else b
    bstar, mu, norms = _gram_schmidt(b)
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q:
                b[k] = [x - q * y for x, y in zip(b[k], b[j])]
                u[k] = [x - q * y for x, y in zip(u[k], u[j])]
                for i in range(j + 1):
                    mu[k][i] -= q * (mu[j][i] if i < j else 1)
        if norms[k] >= (delta - mu[k][k - 1] ** 2) * norms[k - 1]:
            k += 1
        else:
            b[k], b[k - 1] = b[k - 1], b[k]
            u[k], u[k - 1] = u[k - 1], u[k]
            bstar, mu, norms = _gram_schmidt(b)
            k = max(k - 1, 1)
    return (b, u) if with_transform else b


@dataclass(frozen=True)
class ShortestVector:
    vector: tuple
    coefficients: tuple
    length_sq: Fraction
    nodes: int


def shortest_vector_rows(rows: Sequence[Sequence], node_budget: int = 2_000_000) -> ShortestVector:
    """Shortest nonzero vector of the lattice spanned by the independent rows."""
    n = len(rows)
    if n == 0:
        raise ValueError("empty basis")
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds the enumeration limit {MAX_DIM}")
    reduced, u = lll_reduce(rows, with_transform=True)
    bstar, mu, norms = _gram_schmidt(reduced)
    if any(x == 0 for x in norms):
        raise ValueError("basis vectors are linearly dependent")
    best_i = min(range(n), key=lambda i: dot(reduced[i], reduced[i]))
    best_sq = dot(reduced[best_i], reduced[best_i])
    best_x = [int(i == best_i) for i in range(n)]
    x = [0] * n
    nodes = 0

    def centre(i):
        return -sum((mu[j][i] * x[j] for j in range(i + 1, n)), Fraction(0))

    # depth-first search from the last coordinate down, partial sums exact
    def search(i, partial):
        nonlocal best_sq, best_x, nodes
        c = centre(i)
        room = best_sq - partial
        if room < 0:
            return
        span = math.sqrt(float(room / norms[i])) if room else 0.0
        lo, hi = math.floor(float(c) - span) - 1, math.ceil(float(c) + span) + 1
        for xi in sorted(range(lo, hi + 1), key=lambda v: abs(v - c)):
            nodes += 1
            if nodes > node_budget:
                raise EnumerationBudgetError(nodes, best_sq)
            term = norms[i] * (xi - c) ** 2
            total = partial + term
            if total > best_sq:
                continue
            x[i] = xi
            if i == 0:
                if total and (total < best_sq):
                    best_sq = total
                    best_x = list(x)
            else:
                search(i - 1, total)
            x[i] = 0

    search(n - 1, Fraction(0))
    vec = tuple(sum((best_x[i] * reduced[i][k] for i in range(n)), Fraction(0)) for k in range(len(rows[0])))
    coeffs = tuple(sum(best_x[i] * u[i][j] for i in range(n)) for j in range(n))
    return ShortestVector(vec, coeffs, best_sq, nodes)


def shortest_vector(basis_columns: Sequence[Sequence], node_budget: int = 2_000_000) -> ShortestVector:
    """Columns of ``basis_columns`` generate the lattice; coefficients refer to them."""
    rows = [list(col) for col in zip(*basis_columns)]
    return shortest_vector_rows(rows, node_budget)


def brute_force_shortest(rows: Sequence[Sequence], box: int = 10) -> Fraction:
    """Minimum length^2 over coefficient vectors with entries in ``[-box, box]``."""
    import itertools

    b = [[to_fraction(x) for x in r] for r in rows]
    n = len(b)
    best = None
    for c in itertools.product(range(-box, box + 1), repeat=n):
        if not any(c):
            continue
        v = [sum(ci * b[i][k] for i, ci in enumerate(c)) for k in range(len(b[0]))]
        s = dot(v, v)
        if best is None or s < best:
            best = s
    return best
