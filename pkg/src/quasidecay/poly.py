"""Sparse multivariate polynomials with rational coefficients."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .exact import fraction_to_str, to_fraction


@dataclass(frozen=True)
class Polynomial:
    """``terms`` maps exponent tuples to nonzero ``Fraction`` coefficients."""

    nvars: int
    terms: tuple

    @classmethod
    def from_dict(cls, nvars: int, terms: Mapping[tuple, object]) -> "Polynomial":
        clean = {}
        for powers, coef in terms.items():
            powers = tuple(int(p) for p in powers)
            if len(powers) != nvars or min(powers, default=0) < 0:
                raise ValueError(f"bad exponent tuple {powers} for {nvars} variables")
            c = to_fraction(coef)
            if c != 0:
                clean[powers] = clean.get(powers, Fraction(0)) + c
        return cls(nvars, tuple(sorted((k, v) for k, v in clean.items() if v != 0)))

    @classmethod
    def constant(cls, nvars: int, value) -> "Polynomial":
        return cls.from_dict(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Polynomial":
        return cls.from_dict(nvars, {tuple(int(i == index) for i in range(nvars)): 1})

    @classmethod
    def monomial_power(cls, nvars: int, index: int, power: int) -> "Polynomial":
        return cls.from_dict(nvars, {tuple(power * int(i == index) for i in range(nvars)): 1})

    def as_dict(self) -> dict:
        return dict(self.terms)

    @property
    def degree(self) -> int:
        return max((sum(p) for p, _ in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "Polynomial") -> "Polynomial":
        d = self.as_dict()
        for k, v in other.terms:
            d[k] = d.get(k, Fraction(0)) + v
        return Polynomial.from_dict(self.nvars, d)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.nvars, tuple((k, -v) for k, v in self.terms))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            c = to_fraction(other)
            return Polynomial.from_dict(self.nvars, {k: v * c for k, v in self.terms})
        d: dict = {}
        for k1, v1 in self.terms:
            for k2, v2 in other.terms:
                k = tuple(a + b for a, b in zip(k1, k2))
                d[k] = d.get(k, Fraction(0)) + v1 * v2
        return Polynomial.from_dict(self.nvars, d)

    __rmul__ = __mul__

    def derivative(self, index: int) -> "Polynomial":
        d = {}
        for powers, coef in self.terms:
            if powers[index]:
                lowered = list(powers)
                lowered[index] -= 1
                d[tuple(lowered)] = coef * powers[index]
        return Polynomial.from_dict(self.nvars, d)

    def gradient(self) -> list["Polynomial"]:
        return [self.derivative(i) for i in range(self.nvars)]

    def __call__(self, point):
        """Evaluate at a sequence of scalars; exact when the inputs are exact."""
        total = 0
        for powers, coef in self.terms:
            term = coef
            for x, p in zip(point, powers):
                if p:
                    term = term * x ** p
            total = total + term
        return total

    def evaluate_array(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, float).reshape(-1, self.nvars)
        out = np.zeros(len(pts))
        for powers, coef in self.terms:
            term = np.full(len(pts), float(coef))
            for i, p in enumerate(powers):
                if p:
                    term = term * pts[:, i] ** p
            out += term
        return out

    def to_json(self) -> list:
        return [{"coef": fraction_to_str(c), "powers": list(p)} for p, c in self.terms]

    @classmethod
    def from_json(cls, nvars: int, data: list) -> "Polynomial":
        return cls.from_dict(nvars, {tuple(t["powers"]): t["coef"] for t in data})


def moment_curve(degree: int) -> list[Polynomial]:
    """Components of ``x -> (x, x^2, ..., x^degree)``."""
    return [Polynomial.monomial_power(1, 0, k) for k in range(1, degree + 1)]
