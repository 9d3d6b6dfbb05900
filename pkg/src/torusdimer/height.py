"""Height functions of dimer configurations and their homology bookkeeping.

Heights live on the quadrilateral faces of an embedded double graph.  Each
face is identified with its diagonal (the segment joining its two black
corners).  Crossing an unmatched edge rotates the diagonal about the shared
black corner, sweeping through the crossed edge; the signed swept angle
(counterclockwise positive) is the height increment.  Matched edges are
cuts and cannot be crossed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .lattice import DoubleGraph, GraphSpecError
from .temperley import (
    DimerConfig, OcrsfPair, enumerate_dimers, dimer_to_forest, forest_cycles,
)

TWO_PI = 2.0 * math.pi


def _ang(u, v):
    """Signed angle from u to v in (-pi, pi]."""
    return math.atan2(u[0] * v[1] - u[1] * v[0], u[0] * v[0] + u[1] * v[1])


@dataclass
class Quad:
    qid: object
    corners: list           # [(vertex key, lift), ...] cyclic, side i joins i, i+1
    sides: list             # edge-instance keys
    black_at: tuple         # indices of the two black corners


@dataclass
class HeightFunction:
    base: object
    heights: dict           # quad id -> radians
    hx: object = None       # integer height change per period, torus only
    hy: object = None


class PropagationError(GraphSpecError):
    pass


def _quad_from_double_face(db: DoubleGraph, face, copy):
    """Instantiate a quadrilateral face of a torus double graph at a window copy."""
    N = db.g.N
    off = (N * copy[0], N * copy[1])
    corners, sides = [], []
    blacks = []
    for i, d in enumerate(face.darts):
        vid, lift = face.corners[i]
        corners.append((vid, (lift[0] + off[0], lift[1] + off[1])))
        if vid[0] != "w":
            blacks.append(i)
        eidx, end = d
        s = face.shifts[i]
        if end == 0:
            key = (eidx, (s[0] + copy[0], s[1] + copy[1]))
        else:
            w = db.g.edges[eidx].wrap
            key = (eidx, (s[0] - w[0] + copy[0], s[1] - w[1] + copy[1]))
        sides.append(key)
    return Quad((face.idx, copy), corners, sides, tuple(blacks))


def torus_quad_patch(db: DoubleGraph, window=3):
    """All quad instances of the lifted double graph over a window of copies."""
    quads = {}
    for f in db.g.faces:
        for i in range(window):
            for j in range(window):
                q = _quad_from_double_face(db, f, (i, j))
                quads[q.qid] = q
    return quads


def wired_quad_patch(wd):
    """Quad instances of a wired double; edge keys are bw-edge indices."""
    quads = {}
    for (qid, corners, sides) in wd.quads:
        blacks = tuple(i for i, (vid, _) in enumerate(corners) if vid[0] != "w")
        quads[qid] = Quad(qid, [(vid, pos) for (vid, pos) in corners], list(sides), blacks)
    return quads


def _side_black(quad, i):
    """(black corner index, white corner index) of side i."""
    a, b = i, (i + 1) % 4
    if quad.corners[a][0][0] != "w":
        return a, b
    return b, a


def _increment(q1, i1, q2, i2):
    b1, w1 = _side_black(q1, i1)
    b2, w2 = _side_black(q2, i2)
    pb = q1.corners[b1][1]
    pw = q1.corners[w1][1]
    if not (_close(pb, q2.corners[b2][1]) and _close(pw, q2.corners[w2][1])):
        raise PropagationError("shared side geometry disagrees between quads")
    a1 = q1.corners[(b1 + 2) % 4][1]
    a2 = q2.corners[(b2 + 2) % 4][1]
    u1 = (a1[0] - pb[0], a1[1] - pb[1])
    u2 = (a2[0] - pb[0], a2[1] - pb[1])
    m = (pw[0] - pb[0], pw[1] - pb[1])
    return _ang(u1, m) + _ang(m, u2)


def _close(a, b, tol=1e-6):
    return abs(a[0] - b[0]) <= tol and abs(a[1] - b[1]) <= tol


def propagate_heights(quads, matched, base_qid, tol=1e-9):
    """Breadth-first height propagation across unmatched sides.

    matched(key) says whether an edge instance is a dimer.  Returns the
    height dict; raises PropagationError when two routes disagree.
    """
    side_index = {}
    for q in quads.values():
        for i, key in enumerate(q.sides):
            side_index.setdefault(key, []).append((q.qid, i))
    heights = {base_qid: 0.0}
    queue = [base_qid]
    while queue:
        qid = queue.pop(0)
        q = quads[qid]
        for i, key in enumerate(q.sides):
            if matched(key):
                continue
            for (qid2, i2) in side_index[key]:
                if qid2 == qid:
                    continue
                q2 = quads[qid2]
                h2 = heights[qid] + _increment(q, i, q2, i2)
                if qid2 in heights:
                    if abs(heights[qid2] - h2) > 1e-6:
                        raise PropagationError(
                            f"height propagation inconsistent at {qid2}: "
                            f"{heights[qid2]} vs {h2}")
                else:
                    heights[qid2] = h2
                    queue.append(qid2)
    return heights


def height_function(db, matching, base=None, window=3) -> HeightFunction:
    """Height function of a matching; torus doubles are lifted to a window.

    For a DoubleGraph the quad ids are (face idx, (i, j)) over window^2
    copies and the result carries the integer height change per period.
    For a WiredDouble the quad ids are the wired quad ids.
    """
    medges = matching.edges if isinstance(matching, DimerConfig) else frozenset(matching)
    if isinstance(db, DoubleGraph):
        quads = torus_quad_patch(db, window)
        matched = lambda key: key[0] in medges
        if base is None:
            mid = window // 2
            base = (0, (mid, mid))
        heights = propagate_heights(quads, matched, base)
        hx, hy = _periodic_change(db, quads, heights, window)
        return HeightFunction(base, heights, hx, hy)
    quads = wired_quad_patch(db)
    matched = lambda key: key in medges
    if base is None:
        base = min(quads)
    heights = propagate_heights(quads, matched, base)
    return HeightFunction(base, heights)


def _periodic_change(db, quads, heights, window):
    diffs_x, diffs_y = [], []
    for (fid, (i, j)), h in heights.items():
        q2 = (fid, (i + 1, j))
        if q2 in heights:
            diffs_x.append(heights[q2] - h)
        q2 = (fid, (i, j + 1))
        if q2 in heights:
            diffs_y.append(heights[q2] - h)
    out = []
    for diffs, axis in ((diffs_x, "x"), (diffs_y, "y")):
        if not diffs:
            raise PropagationError(f"no period pair reachable along {axis}")
        lo, hi = min(diffs), max(diffs)
        if hi - lo > 1e-6:
            raise PropagationError(f"height change not constant along {axis}")
        val = sum(diffs) / len(diffs) / TWO_PI
        rounded = round(val)
        if abs(val - rounded) > 1e-6:
            raise PropagationError(f"height change along {axis} is not an integer: {val}")
        out.append(int(rounded))
    return out[0], out[1]


def height_change(db: DoubleGraph, matching, window=3):
    hf = height_function(db, matching, window=window)
    return hf.hx, hf.hy


# ---------------------------------------------------------------------------
# homology data of forest pairs


@dataclass(frozen=True)
class HomologyData:
    m: int
    n: int
    k: int
    k1: int
    k2: int


def _normalize_class(cls):
    m, n = cls
    if m > 0 or (m == 0 and n > 0):
        return (m, n), 1
    return (-m, -n), -1


def homology_data(t, dual, pair: OcrsfPair) -> HomologyData:
    """Common cycle class and the signed component counts of a forest pair."""
    pcyc = forest_cycles(t, pair.primal_map())
    dcyc = forest_cycles(dual, pair.dual_map())
    classes = [cls for (_, cls) in pcyc] + [cls for (_, cls) in dcyc]
    if not classes:
        raise GraphSpecError("forest pair has no cycles")
    base, _ = _normalize_class(classes[0])
    if math.gcd(abs(base[0]), abs(base[1])) != 1:
        raise GraphSpecError(f"cycle class {base} is not primitive")
    for cls in classes:
        norm, _ = _normalize_class(cls)
        if norm != base:
            raise GraphSpecError(f"cycle classes {base} and {norm} are not parallel")
    k = len(pcyc)
    if len(dcyc) != k:
        raise GraphSpecError("primal and dual component counts differ")
    k1 = sum(1 for (_, cls) in pcyc if cls == base)
    k2 = sum(1 for (_, cls) in dcyc if cls == base)
    return HomologyData(base[0], base[1], k, k1, k2)


def predicted_height_change(h: HomologyData):
    """Height change predicted from homology: the signed cycle-count identity."""
    a = h.k - h.k1 - h.k2
    return (-h.n * a, h.m * a)


def check_prop21(t, dual=None, db=None, cap=10 ** 6):
    """Exhaustive check that height changes match the homology identity."""
    from .lattice import build_dual, build_double
    from .temperley import enumerate_ocrsf_pairs
    if dual is None:
        dual = build_dual(t)
    if db is None:
        db = build_double(t, dual)
    from .temperley import forest_to_dimer
    report = {"total": 0, "passed": 0, "failures": []}
    for pair in enumerate_ocrsf_pairs(t, dual, cap):
        m = forest_to_dimer(db, pair)
        got = height_change(db, m)
        hd = homology_data(t, dual, pair)
        want = predicted_height_change(hd)
        report["total"] += 1
        if got == want:
            report["passed"] += 1
        else:
            report["failures"].append({
                "config": sorted(m.edges), "expected": list(want), "got": list(got),
                "homology": [hd.m, hd.n, hd.k, hd.k1, hd.k2]})
    return report


# ---------------------------------------------------------------------------
# winding of paths


@dataclass
class BranchWinding:
    points: list
    angle: float


def branch_winding(points) -> BranchWinding:
    """Total signed turning (left minus right) along an embedded path."""
    if len(points) < 2:
        return BranchWinding(list(points), 0.0)
    total = 0.0
    for i in range(1, len(points) - 1):
        u = (points[i][0] - points[i - 1][0], points[i][1] - points[i - 1][1])
        v = (points[i + 1][0] - points[i][0], points[i + 1][1] - points[i][1])
        if (u[0] == 0 and u[1] == 0) or (v[0] == 0 and v[1] == 0):
            raise GraphSpecError("degenerate step in path")
        total += _ang(u, v)
    return BranchWinding(list(points), total)
