"""Slope estimation, amoeba membership, root order, and field-plane scans.

A field point B = (Bx, By) is classified by where (e^Bx, e^By) sits relative
to the amoeba of the size-1 characteristic polynomial: inside = liquid,
outside in a bounded complement component = gaseous, outside unbounded =
frozen.  The finite-size slope proxy is the exhaustive expected height
change per period under the field-weighted measure.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import GraphSpecError, PeriodicGraph, build_double, build_quotient
from .laurent import LaurentPoly, newton_polygon
from .kasteleyn import char_poly
from .sampler import _pair_data, field_weight


@dataclass
class PhasePoint:
    B: tuple
    phase: str                # liquid | gaseous | frozen
    slope: tuple
    min_absP: float
    component: int            # -1 for liquid


def slope_estimate(g: PeriodicGraph, B=(0.0, 0.0), N_list=(1, 2), cap=10 ** 7):
    """Expected height change per period, exhaustively, for each N.

    Returns {"per_N": {N: (sx, sy)}, "estimate": largest-N value,
    "error_proxy": max coordinate gap between successive N}.  Exact
    Fractions at B = 0 on exact graphs, floats otherwise.
    """
    per_n = {}
    for n in N_list:
        t = build_quotient(g, n)
        _, data = _pair_data(t, cap=cap)
        zero_field = (B[0] == 0 and B[1] == 0)
        exact = zero_field and g.exact
        tw = Fraction(0) if exact else 0.0
        sx = sy = tw
        for (p, hd, hx, hy) in data:
            wgt = p.weight if exact else float(p.weight) * field_weight(hx, hy, n, B)
            tw = tw + wgt
            sx = sx + wgt * hx
            sy = sy + wgt * hy
        per_n[n] = (sx / tw / n, sy / tw / n)
    ns = sorted(per_n)
    err = 0.0
    for a, b in zip(ns, ns[1:]):
        err = max(err,
                  abs(float(per_n[b][0]) - float(per_n[a][0])),
                  abs(float(per_n[b][1]) - float(per_n[a][1])))
    return {"per_N": per_n, "estimate": per_n[ns[-1]], "error_proxy": err}


def root_order_at_11(p: LaurentPoly, tol=1e-9):
    """1 when the gradient at (1, 1) is nonzero, else 2.

    Requires P(1, 1) = 0, which holds whenever the dual carries unit weights.
    """
    exact = p.is_exact()
    val = p(Fraction(1), Fraction(1)) if exact else p(1.0, 1.0)
    scale = max((abs(complex(c)) for c in p.c.values()), default=1.0)
    if (exact and val != 0) or (not exact and abs(val) > tol * scale):
        raise GraphSpecError(f"P(1,1) = {val} is not zero; unexpected input family")
    gx = sum(i * c for (i, j), c in p.c.items())
    gy = sum(j * c for (i, j), c in p.c.items())
    if exact:
        return 2 if (gx == 0 and gy == 0) else 1
    return 2 if (abs(complex(gx)) <= tol * scale and abs(complex(gy)) <= tol * scale) else 1


def _torus_values(p: LaurentPoly, x, y, grid):
    """|P| and winding data on the torus of radii (e^x, e^y)."""
    keys = list(p.c.keys())
    coef = np.array([complex(p.c[k]) for k in keys])
    ii = np.array([k[0] for k in keys])
    jj = np.array([k[1] for k in keys])
    rad = np.exp(x * ii + y * jj)
    th = 2 * np.pi * np.arange(grid) / grid
    ph = 2 * np.pi * np.arange(grid) / grid
    ez = np.exp(1j * np.outer(th, ii))          # grid x terms
    ew = np.exp(1j * np.outer(ph, jj))
    vals = np.einsum("t,at,bt->ab", coef * rad, ez, ew)
    return vals


def _windings(vals):
    """Winding numbers of each row and column of a torus sample grid."""
    out = []
    for axis in (0, 1):
        ang = np.angle(np.moveaxis(vals, axis, 0))
        d = np.diff(np.concatenate([ang, ang[:1]], axis=0), axis=0)
        d = (d + np.pi) % (2 * np.pi) - np.pi
        out.append(np.round(d.sum(axis=0) / (2 * np.pi)).astype(int))
    return out


def amoeba_membership(p: LaurentPoly, x, y, grid=256, tol=1e-7):
    """"inside" or "outside" for the point (x, y) of log-radius space.

    Inside means the torus at radii (e^x, e^y) carries a zero of P: detected
    by a small sampled minimum of |P| or by a winding number that varies
    across slices (a root crosses the torus).  Points on the boundary count
    as inside.
    """
    vals = _torus_values(p, x, y, grid)
    scale = float(np.max(np.abs(vals))) or 1.0
    minabs = float(np.min(np.abs(vals)))
    if minabs <= tol * scale:
        return "inside", minabs
    wz, ww = _windings(vals)
    if wz.max() != wz.min() or ww.max() != ww.min():
        return "inside", minabs
    return "outside", minabs


def _scan_membership(p, bxs, bys, grid):
    inside = np.zeros((len(bxs), len(bys)), dtype=bool)
    minabs = np.zeros((len(bxs), len(bys)))
    for i, bx in enumerate(bxs):
        for j, by in enumerate(bys):
            side, ma = amoeba_membership(p, bx, by, grid)
            inside[i, j] = side == "inside"
            minabs[i, j] = ma
    return inside, minabs


def _components(outside):
    """4-neighbor flood fill of outside cells; returns labels and touch set."""
    nx, ny = outside.shape
    labels = -np.ones((nx, ny), dtype=int)
    touch = set()
    cur = 0
    for i in range(nx):
        for j in range(ny):
            if not outside[i, j] or labels[i, j] >= 0:
                continue
            stack = [(i, j)]
            labels[i, j] = cur
            while stack:
                (a, b) = stack.pop()
                if a in (0, nx - 1) or b in (0, ny - 1):
                    touch.add(cur)
                for (a2, b2) in ((a + 1, b), (a - 1, b), (a, b + 1), (a, b - 1)):
                    if 0 <= a2 < nx and 0 <= b2 < ny and outside[a2, b2] \
                            and labels[a2, b2] < 0:
                        labels[a2, b2] = cur
                        stack.append((a2, b2))
            cur += 1
    return labels, touch, cur


def phase_scan(g: PeriodicGraph, b_range=(-3.0, 3.0), grid=64, torus_grid=48,
               N_list=(1, 2), cap=10 ** 7):
    """Classify a grid of field points and estimate slopes.

    Returns a dict with the grid, per-point classification, slopes, bounded
    (gaseous) components, and CSV/polyline renderings.  Boundedness of a
    complement component is confirmed on a window twice as large at the same
    resolution.
    """
    t1 = build_quotient(g, 1)
    db1 = build_double(t1)
    cp = char_poly(db1, cap=cap)
    p = cp.poly
    lo, hi = b_range
    bxs = [lo + (hi - lo) * i / (grid - 1) for i in range(grid)]
    bys = [lo + (hi - lo) * j / (grid - 1) for j in range(grid)]
    inside, minabs = _scan_membership(p, bxs, bys, torus_grid)
    labels, touch, ncomp = _components(~inside)

    # double-window confirmation of boundedness
    big_bxs = [2 * lo + (2 * hi - 2 * lo) * i / (2 * grid - 1) for i in range(2 * grid)]
    big_inside, _ = _scan_membership(p, big_bxs, big_bxs, torus_grid)
    big_labels, big_touch, _ = _components(~big_inside)

    def nearest_big(bx, by):
        i = min(range(len(big_bxs)), key=lambda a: abs(big_bxs[a] - bx))
        return i

    bounded = set()
    for comp in range(ncomp):
        if comp in touch:
            continue
        cells = np.argwhere(labels == comp)
        (ci, cj) = cells[len(cells) // 2]
        bi, bj = nearest_big(bxs[ci], 0), nearest_big(bys[cj], 0)
        blab = big_labels[bi, bj]
        if blab >= 0 and blab not in big_touch:
            bounded.add(comp)

    # slope data from cached enumerations
    pair_data = {}
    for n in N_list:
        t = build_quotient(g, n)
        _, data = _pair_data(t, cap=cap)
        pair_data[n] = [(float(pp.weight), hx, hy) for (pp, _, hx, hy) in data]
    nmax = max(N_list)

    def slope_at(bx, by):
        w = np.array([wg * field_weight(hx, hy, nmax, (bx, by))
                      for (wg, hx, hy) in pair_data[nmax]])
        tot = w.sum()
        sx = sum(wi * hx for wi, (_, hx, hy) in zip(w, pair_data[nmax])) / tot / nmax
        sy = sum(wi * hy for wi, (_, hx, hy) in zip(w, pair_data[nmax])) / tot / nmax
        return sx, sy

    points = []
    for i, bx in enumerate(bxs):
        for j, by in enumerate(bys):
            if inside[i, j]:
                phase, comp = "liquid", -1
            else:
                comp = int(labels[i, j])
                phase = "gaseous" if comp in bounded else "frozen"
            sx, sy = slope_at(bx, by)
            points.append(PhasePoint((bx, by), phase, (sx, sy), minabs[i, j], comp))

    csv = _scan_csv(points)
    polylines = _boundary_polylines(inside, bxs, bys)
    return {
        "poly": p, "points": points, "csv": csv,
        "bounded_components": sorted(bounded),
        "n_components": ncomp,
        "labels": labels, "inside": inside,
        "bxs": bxs, "bys": bys,
        "polylines": polylines,
        "newton": newton_polygon(p),
    }


def _scan_csv(points):
    buf = io.StringIO()
    buf.write("Bx,By,phase,slope_x,slope_y,min_absP,component_id\n")
    for pt in sorted(points, key=lambda q: (q.B[0], q.B[1])):
        buf.write(f"{pt.B[0]!r},{pt.B[1]!r},{pt.phase},{pt.slope[0]!r},"
                  f"{pt.slope[1]!r},{pt.min_absP!r},{pt.component}\n")
    return buf.getvalue()


def _boundary_polylines(inside, bxs, bys):
    """Chain the inside/outside cell interfaces into polylines."""
    segs = []
    nx, ny = inside.shape
    for i in range(nx):
        for j in range(ny):
            if not inside[i, j]:
                continue
            if i + 1 < nx and not inside[i + 1, j]:
                x = (bxs[i] + bxs[i + 1]) / 2
                y0 = bys[j] - (bys[1] - bys[0]) / 2
                y1 = bys[j] + (bys[1] - bys[0]) / 2
                segs.append(((x, y0), (x, y1)))
            if i - 1 >= 0 and not inside[i - 1, j]:
                x = (bxs[i] + bxs[i - 1]) / 2
                y0 = bys[j] - (bys[1] - bys[0]) / 2
                y1 = bys[j] + (bys[1] - bys[0]) / 2
                segs.append(((x, y0), (x, y1)))
            if j + 1 < ny and not inside[i, j + 1]:
                y = (bys[j] + bys[j + 1]) / 2
                x0 = bxs[i] - (bxs[1] - bxs[0]) / 2
                x1 = bxs[i] + (bxs[1] - bxs[0]) / 2
                segs.append(((x0, y), (x1, y)))
            if j - 1 >= 0 and not inside[i, j - 1]:
                y = (bys[j] + bys[j - 1]) / 2
                x0 = bxs[i] - (bxs[1] - bxs[0]) / 2
                x1 = bxs[i] + (bxs[1] - bxs[0]) / 2
                segs.append(((x0, y), (x1, y)))
    # greedy chaining by shared endpoints
    def key(pt):
        return (round(pt[0], 9), round(pt[1], 9))

    unused = list(segs)
    polylines = []
    index = {}
    for s in unused:
        index.setdefault(key(s[0]), []).append(s)
        index.setdefault(key(s[1]), []).append(s)
    seen = set()
    for s in unused:
        if id(s) in seen:
            continue
        seen.add(id(s))
        line = [s[0], s[1]]
        grown = True
        while grown:
            grown = False
            for cand in index.get(key(line[-1]), []):
                if id(cand) in seen:
                    continue
                seen.add(id(cand))
                nxt = cand[1] if key(cand[0]) == key(line[-1]) else cand[0]
                line.append(nxt)
                grown = True
                break
        polylines.append([[float(a), float(b)] for (a, b) in line])
    return polylines


def polylines_json(scan):
    return json.dumps({"polylines": scan["polylines"]})
