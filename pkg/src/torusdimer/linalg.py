"""Exact and floating-point linear algebra on small dense matrices.

Rational mode keeps Fraction entries end to end.  Determinants go through
fraction-free Bareiss elimination on an integer-rescaled copy, solves use
plain Gauss-Jordan over Fractions.  Float mode delegates to numpy (LU with
partial pivoting).
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def is_exact_scalar(x) -> bool:
    return isinstance(x, (int, Fraction))


def _bareiss_det_int(m: list[list[int]]) -> int:
    """Determinant of an integer matrix by fraction-free elimination."""
    n = len(m)
    if n == 0:
        return 1
    m = [row[:] for row in m]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
            m[i][k] = 0
        prev = m[k][k]
    return sign * m[-1][-1]


def det_exact(rows) -> Fraction:
    """Exact determinant of a matrix with int/Fraction entries."""
    n = len(rows)
    if n == 0:
        return Fraction(1)
    scaled = []
    factor = Fraction(1)
    for row in rows:
        fr = [Fraction(x) for x in row]
        l = 1
        for x in fr:
            l = l * x.denominator // math.gcd(l, x.denominator)
        scaled.append([int(x * l) for x in fr])
        factor /= l
    return Fraction(_bareiss_det_int(scaled)) * factor


def det_float(rows) -> complex:
    a = np.asarray(rows, dtype=complex)
    if a.size == 0:
        return 1.0 + 0j
    return complex(np.linalg.det(a))


def det_any(rows, exact: bool):
    if exact:
        return det_exact(rows)
    return det_float([[complex(x) for x in row] for row in rows])


def solve_exact(a, b):
    """Solve a @ x = b exactly; a is n x n, b is n x m.  Raises on singular a."""
    n = len(a)
    m = len(b[0]) if n else 0
    aug = [[Fraction(x) for x in a[i]] + [Fraction(x) for x in b[i]] for i in range(n)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if aug[r][col] != 0:
                piv = r
                break
        if piv is None:
            raise ZeroDivisionError("singular matrix in exact solve")
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:n + m] for row in aug]


def inv_exact(a):
    n = len(a)
    eye = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    return solve_exact(a, eye)


def matmul(a, b):
    """Plain exact matrix product for small Fraction matrices."""
    n, k = len(a), len(b)
    m = len(b[0]) if k else 0
    out = [[sum((a[i][t] * b[t][j] for t in range(k)), Fraction(0)) for j in range(m)]
           for i in range(n)]
    return out


def zeros(n, m):
    return [[Fraction(0)] * m for _ in range(n)]
