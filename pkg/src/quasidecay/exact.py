"""Exact rational and integer linear algebra used across the package.

Matrices are plain lists of rows.  Entries are ``Fraction`` or ``int``;
nothing in here touches floating point except :func:`log_rational` and the
float views of :class:`Surd`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence


def to_fraction(value) -> Fraction:
    """Convert ints, Fractions, floats and exact decimal strings to Fraction.

    Strings may be decimals (``"0.25"``), scientific (``"1e-3"``) or ratios
    (``"1/3"``).  Floats convert to the binary rational they store.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot read {type(value).__name__} as an exact number")


def fraction_to_str(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def decimal_precision(text: str) -> Fraction:
    """Half a unit in the last printed place of a decimal string.

    ``"0.6180339887"`` gives ``5e-11``.  Ratio strings are exact and give 0.
    """
    s = text.strip().lower()
    if "/" in s:
        return Fraction(0)
    mantissa, _, exp = s.partition("e")
    exponent = int(exp) if exp else 0
    digits = len(mantissa.split(".")[1]) if "." in mantissa else 0
    return Fraction(1, 2) * Fraction(10) ** (exponent - digits)


def log_rational(q: Fraction) -> float:
    """Natural log of a positive rational without float overflow."""
    q = Fraction(q)
    if q <= 0:
        raise ValueError("log of a non-positive number")
    return _log_int(q.numerator) - _log_int(q.denominator)


def _log_int(n: int) -> float:
    bits = n.bit_length()
    if bits < 1000:
        return math.log(n)
    shift = bits - 64
    return math.log(n >> shift) + shift * math.log(2)


def exact_sqrt(q: Fraction) -> Fraction | None:
    """Rational square root when it exists, else ``None``."""
    q = Fraction(q)
    if q < 0:
        return None
    a, b = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if a * a == q.numerator and b * b == q.denominator:
        return Fraction(a, b)
    return None


def integer_root(n: int, k: int) -> int:
    """Largest integer ``m >= 0`` with ``m**k <= n``."""
    if n < 0:
        raise ValueError("negative radicand")
    if n < 2 or k == 1:
        return n
    m = int(round(n ** (1.0 / k))) if n.bit_length() < 1000 else 1 << (n.bit_length() // k)
    while m ** k > n:
        m -= 1
    while (m + 1) ** k <= n:
        m += 1
    return m


def floor_rational_root(q: Fraction, k: int) -> int:
    """Largest integer ``m >= 0`` with ``m**k <= q`` for rational ``q >= 0``."""
    q = Fraction(q)
    if q < 0:
        raise ValueError("negative radicand")
    m = integer_root(q.numerator // q.denominator, k)
    while Fraction(m + 1) ** k <= q:
        m += 1
    return m


def ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


# --- rational matrices -------------------------------------------------------

def as_fraction_matrix(rows: Iterable[Iterable]) -> list[list[Fraction]]:
    return [[to_fraction(x) for x in row] for row in rows]


def identity(n: int) -> list[list[Fraction]]:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def transpose(a: Sequence[Sequence]) -> list[list]:
    return [list(col) for col in zip(*a)] if a else []


def mat_mul(a: Sequence[Sequence], b: Sequence[Sequence]) -> list[list]:
    bt = transpose(b)
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt] for row in a]


def mat_vec(a: Sequence[Sequence], v: Sequence) -> list:
    return [sum((x * y for x, y in zip(row, v)), Fraction(0)) for row in a]


def dot(u: Sequence, v: Sequence):
    return sum((x * y for x, y in zip(u, v)), Fraction(0))


def rref(a: Sequence[Sequence]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and pivot columns."""
    m = [[Fraction(x) for x in row] for row in a]
    if not m:
        return m, []
    rows, cols = len(m), len(m[0])
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, pivots


def rank(a: Sequence[Sequence]) -> int:
    return len(rref(a)[1]) if a else 0


def nullspace(a: Sequence[Sequence], ncols: int | None = None) -> list[list[Fraction]]:
    """Basis of ``{x : a x = 0}`` over the rationals."""
    if not a:
        n = ncols or 0
        return [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    r, pivots = rref(a)
    n = len(a[0])
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for row, p in zip(r, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def det(a: Sequence[Sequence]) -> Fraction:
    """Determinant by Gaussian elimination over the rationals."""
    m = [[Fraction(x) for x in row] for row in a]
    n = len(m)
    result = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if m[i][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            m[c], m[p] = m[p], m[c]
            result = -result
        result *= m[c][c]
        inv = 1 / m[c][c]
        for i in range(c + 1, n):
            if m[i][c] != 0:
                f = m[i][c] * inv
                m[i] = [x - f * y for x, y in zip(m[i], m[c])]
    return result


def gram_det(vectors: Sequence[Sequence]) -> Fraction:
    """det(G^T G) for the matrix with the given vectors as columns."""
    if not vectors:
        return Fraction(1)
    gram = [[dot(u, v) for v in vectors] for u in vectors]
    return det(gram)


def solve(a: Sequence[Sequence], b: Sequence) -> list[Fraction]:
    """Solve a square nonsingular system exactly."""
    n = len(a)
    aug = [[Fraction(x) for x in row] + [Fraction(bi)] for row, bi in zip(a, b)]
    r, pivots = rref(aug)
    if pivots != list(range(n)):
        raise ValueError("singular system")
    return [r[i][n] for i in range(n)]


# --- integer lattices --------------------------------------------------------

def primitive(v: Sequence[int]) -> tuple[int, ...]:
    """Divide by the gcd and make the first nonzero entry positive."""
    g = 0
    for x in v:
        g = math.gcd(g, int(x))
    if g == 0:
        raise ValueError("zero vector has no primitive form")
    w = [int(x) // g for x in v]
    lead = next(x for x in w if x != 0)
    return tuple(-x for x in w) if lead < 0 else tuple(w)


def clear_denominators(v: Sequence) -> list[int]:
    fr = [to_fraction(x) for x in v]
    lcm = 1
    for x in fr:
        lcm = lcm * x.denominator // math.gcd(lcm, x.denominator)
    return [int(x * lcm) for x in fr]


def hnf_rows(rows: Sequence[Sequence[int]]) -> list[list[int]]:
    """Row-style Hermite normal form of an integer matrix, zero rows dropped.

    Pivots are positive and entries above each pivot lie in ``[0, pivot)``.
    The result is unique for the lattice spanned by the rows.
    """
    m = [[int(x) for x in row] for row in rows]
    if not m:
        return []
    ncols = len(m[0])
    r = 0
    for c in range(ncols):
        # gcd-combine everything below r in column c into row r
        for i in range(r + 1, len(m)):
            while m[i][c] != 0:
                if m[r][c] == 0 or abs(m[i][c]) < abs(m[r][c]):
                    m[r], m[i] = m[i], m[r]
                    continue
                q = m[i][c] // m[r][c]
                m[i] = [x - q * y for x, y in zip(m[i], m[r])]
        if r < len(m) and m[r][c] != 0:
            if m[r][c] < 0:
                m[r] = [-x for x in m[r]]
            for i in range(r):
                q = m[i][c] // m[r][c]
                if q:
                    m[i] = [x - q * y for x, y in zip(m[i], m[r])]
            r += 1
            if r == len(m):
                break
    return [row for row in m if any(row)]


def integer_kernel(rows: Sequence[Sequence[int]], ncols: int) -> list[list[int]]:
    """Basis of the integer solutions of ``rows @ x = 0``.

    Column operations on ``[rows; I]`` bring ``rows`` to echelon form; the
    identity block then carries a unimodular transform whose trailing
    columns span the (saturated) kernel lattice.
    """
    a = [[int(x) for x in row] for row in rows]
    k = len(a)
    cols = [[a[i][j] for i in range(k)] + [int(i == j) for i in range(ncols)] for j in range(ncols)]
    piv_col = 0
    for r in range(k):
        for j in range(piv_col + 1, ncols):
            while cols[j][r] != 0:
                if cols[piv_col][r] == 0 or abs(cols[j][r]) < abs(cols[piv_col][r]):
                    cols[piv_col], cols[j] = cols[j], cols[piv_col]
                    continue
                q = cols[j][r] // cols[piv_col][r]
                cols[j] = [x - q * y for x, y in zip(cols[j], cols[piv_col])]
        if cols[piv_col][r] != 0:
            piv_col += 1
            if piv_col == ncols:
                break
    return [c[k:] for c in cols[piv_col:]]


def saturate(vectors: Sequence[Sequence[int]], n: int) -> list[list[int]]:
    """Integer basis of ``span(vectors) ∩ Z^n`` in row Hermite normal form."""
    vecs = [list(map(int, v)) for v in vectors if any(v)]
    if not vecs:
        return []
    perp = integer_kernel(vecs, n)
    if not perp:
        return [[int(i == j) for j in range(n)] for i in range(n)]
    return hnf_rows(integer_kernel(perp, n))


# --- exact positive surds ------------------------------------------------------

@dataclass(frozen=True)
class Surd:
    """The positive real ``base ** (1/root)``."""

    base: Fraction
    root: int = 1

    def __post_init__(self):
        b = to_fraction(self.base)
        if b <= 0 or self.root < 1:
            raise ValueError("surds must be positive with a positive root")
        object.__setattr__(self, "base", b)

    @classmethod
    def sqrt(cls, x) -> "Surd":
        return cls(to_fraction(x), 2)

    def _raised(self, common: int) -> Fraction:
        return self.base ** (common // self.root)

    def __mul__(self, other):
        if not isinstance(other, Surd):
            other = Surd(to_fraction(other))
        common = math.lcm(self.root, other.root)
        return Surd(self._raised(common) * other._raised(common), common)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Surd):
            other = Surd(to_fraction(other))
        return self * Surd(1 / other.base, other.root)

    def power(self, k: int) -> "Surd":
        return Surd(self.base ** k, self.root) if k >= 0 else Surd(1 / self.base ** (-k), self.root)

    def _cmp(self, other) -> int:
        if not isinstance(other, Surd):
            other = Surd(to_fraction(other))
        common = math.lcm(self.root, other.root)
        a, b = self._raised(common), other._raised(common)
        return (a > b) - (a < b)

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __eq__(self, other):
        if not isinstance(other, (Surd, int, Fraction)):
            return NotImplemented
        return self._cmp(other) == 0

    def __hash__(self):
        return hash(float(self))

    def log(self) -> float:
        return log_rational(self.base) / self.root

    def __float__(self):
        return math.exp(self.log())

    def to_json(self) -> dict:
        return {"base": str(self.base), "root": self.root, "approx": float(self)}
