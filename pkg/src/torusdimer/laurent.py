"""Laurent polynomials in two variables and their Newton polygons."""

from __future__ import annotations

import json
from fractions import Fraction

from .linalg import is_exact_scalar


class LaurentPoly:
    """Finite-support map from integer exponent pairs (i, j) to coefficients.

    Represents sum c_ij z^i w^j.  Coefficients may be Fractions (exact mode)
    or floats/complex.  Zero coefficients are dropped on construction.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs=None):
        self.c = {}
        if coeffs:
            for k, v in coeffs.items():
                if v != 0:
                    self.c[(int(k[0]), int(k[1]))] = v

    def support(self):
        return sorted(self.c)

    def is_zero(self):
        return not self.c

    def __call__(self, z, w):
        total = 0
        for (i, j), v in self.c.items():
            total = total + v * z ** i * w ** j
        return total

    def __eq__(self, other):
        return isinstance(other, LaurentPoly) and self.c == other.c

    def __neg__(self):
        return LaurentPoly({k: -v for k, v in self.c.items()})

    def __add__(self, other):
        out = dict(self.c)
        for k, v in other.c.items():
            out[k] = out.get(k, 0) + v
        return LaurentPoly(out)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, LaurentPoly):
            out = {}
            for (i1, j1), v1 in self.c.items():
                for (i2, j2), v2 in other.c.items():
                    k = (i1 + i2, j1 + j2)
                    out[k] = out.get(k, 0) + v1 * v2
            return LaurentPoly(out)
        return LaurentPoly({k: v * other for k, v in self.c.items()})

    __rmul__ = __mul__

    def monomial_shift(self, a, b, scalar=1):
        """Multiply by scalar * z^a * w^b."""
        return LaurentPoly({(i + a, j + b): scalar * v for (i, j), v in self.c.items()})

    def approx_eq(self, other, tol=1e-9):
        keys = set(self.c) | set(other.c)
        scale = max((abs(complex(v)) for v in list(self.c.values()) + list(other.c.values())),
                    default=1.0)
        for k in keys:
            a = complex(self.c.get(k, 0))
            b = complex(other.c.get(k, 0))
            if abs(a - b) > tol * max(scale, 1.0):
                return False
        return True

    def is_exact(self):
        return all(is_exact_scalar(v) for v in self.c.values())

    def __repr__(self):
        if not self.c:
            return "LaurentPoly(0)"
        terms = []
        for (i, j) in self.support():
            terms.append(f"{self.c[(i, j)]}*z^{i}*w^{j}")
        return "LaurentPoly(" + " + ".join(terms) + ")"

    def to_obj(self):
        """JSON-ready list of {i, j, c}, sorted by (i, j)."""
        out = []
        for (i, j) in self.support():
            v = self.c[(i, j)]
            if isinstance(v, Fraction):
                cv = str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
            elif isinstance(v, complex):
                cv = [v.real, v.imag]
            else:
                cv = v
            out.append({"i": i, "j": j, "c": cv})
        return out

    def dumps(self):
        return json.dumps(self.to_obj())

    @staticmethod
    def from_obj(obj):
        coeffs = {}
        for t in obj:
            c = t["c"]
            if isinstance(c, str):
                c = Fraction(c)
            elif isinstance(c, list):
                c = complex(c[0], c[1])
            coeffs[(t["i"], t["j"])] = c
        return LaurentPoly(coeffs)


def find_monomial_gauge(p: LaurentPoly, q: LaurentPoly, tol=None):
    """Find (eps, a, b) with p == eps * z^a w^b * q, or None.

    eps is a scalar ratio; for honest gauges it comes out as +1 or -1 (or a
    positive weight ratio).  Exact comparison when both polys are exact and
    tol is None, otherwise coefficient-wise within tol.
    """
    if p.is_zero() or q.is_zero():
        return (1, 0, 0) if p.is_zero() and q.is_zero() else None
    kp = min(p.support())
    kq = min(q.support())
    a, b = kp[0] - kq[0], kp[1] - kq[1]
    eps = p.c[kp] / q.c[kq] if not isinstance(p.c[kp], complex) else p.c[kp] / q.c[kq]
    shifted = q.monomial_shift(a, b, eps)
    if tol is None and p.is_exact() and q.is_exact():
        if shifted == p:
            return (eps, a, b)
        return None
    if shifted.approx_eq(p, tol if tol is not None else 1e-9):
        return (eps, a, b)
    return None


def _hull(points):
    """Convex hull of integer points, counterclockwise (monotone chain)."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def newton_polygon(p: LaurentPoly):
    """Convex hull of the exponent support with its lattice point census.

    Returns a dict with hull 'vertices' (CCW), 'boundary' and 'interior'
    lattice points, all as integer pairs.
    """
    if p.is_zero():
        raise ValueError("newton polygon of the zero polynomial")
    pts = p.support()
    verts = _hull(pts)
    if len(verts) == 1:
        return {"vertices": verts, "boundary": list(verts), "interior": []}
    xs = [v[0] for v in verts]
    ys = [v[1] for v in verts]
    boundary, interior = [], []

    def on_segment(a, b, q):
        cr = (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])
        if cr != 0:
            return False
        return min(a[0], b[0]) <= q[0] <= max(a[0], b[0]) and \
            min(a[1], b[1]) <= q[1] <= max(a[1], b[1])

    def inside(q):
        # strict interior via winding over CCW hull edges
        n = len(verts)
        for t in range(n):
            a, b = verts[t], verts[(t + 1) % n]
            cr = (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])
            if cr <= 0:
                return False
        return True

    if len(verts) == 2:
        a, b = verts
        for x in range(min(xs), max(xs) + 1):
            for y in range(min(ys), max(ys) + 1):
                if on_segment(a, b, (x, y)):
                    boundary.append((x, y))
        return {"vertices": verts, "boundary": boundary, "interior": []}

    for x in range(min(xs), max(xs) + 1):
        for y in range(min(ys), max(ys) + 1):
            q = (x, y)
            if inside(q):
                interior.append(q)
            elif any(on_segment(verts[t], verts[(t + 1) % len(verts)], q)
                     for t in range(len(verts))):
                boundary.append(q)
    return {"vertices": verts, "boundary": boundary, "interior": interior}
