"""Periodic planar graphs, torus quotients, duals, double graphs, wired pieces.

Everything downstream works on small embedded quotient graphs.  Vertices
carry canonical positions inside the fundamental torus [0, N)^2, edges carry
an integer lift displacement ("wrap") so that cycles have well defined
homology classes, and faces come from the counterclockwise rotation system
induced by the straight-line embedding.

Vertex positions are always floats; edge weights are Fractions in exact mode
and floats otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction


class GraphSpecError(ValueError):
    """Invalid graph description or unsupported embedded structure."""


TOL = 1e-9


def _v_add(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _v_sub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def _v_scale(a, s):
    return (a[0] * s, a[1] * s)


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1]


def _close(a, b, tol=1e-6):
    return abs(a[0] - b[0]) <= tol and abs(a[1] - b[1]) <= tol


# ---------------------------------------------------------------------------
# periodic graph and its textual spec


@dataclass(frozen=True)
class BaseEdge:
    eid: int
    tail: str
    head: str
    offset: tuple
    w_fwd: object
    w_bwd: object


class PeriodicGraph:
    """Fundamental domain of a Z^2-periodic weighted directed planar graph."""

    def __init__(self, name, vertex_ids, pos, edges, exact):
        self.name = name
        self.vertex_ids = list(vertex_ids)
        self.pos = dict(pos)
        self.edges = list(edges)
        self.exact = exact
        self._cache = {}
        self._validate()

    def evec(self, e: BaseEdge):
        p, q = self.pos[e.tail], self.pos[e.head]
        return (q[0] + e.offset[0] - p[0], q[1] + e.offset[1] - p[1])

    # -- validation -----------------------------------------------------

    def _validate(self):
        if not self.vertex_ids:
            raise GraphSpecError("graph has no vertices")
        if len(set(self.vertex_ids)) != len(self.vertex_ids):
            raise GraphSpecError("duplicate vertex ids")
        for v in self.vertex_ids:
            x, y = self.pos[v]
            if not (0 <= x < 1 and 0 <= y < 1):
                raise GraphSpecError(
                    f"vertex {v!r}: position must lie in the fundamental domain [0,1)^2")
        for e in self.edges:
            if e.tail not in self.pos or e.head not in self.pos:
                raise GraphSpecError(f"edge {e.eid}: unknown endpoint")
            if e.w_fwd < 0 or e.w_bwd < 0:
                raise GraphSpecError(f"edge {e.eid}: negative weight")
            if _close(self.evec(e), (0.0, 0.0)):
                raise GraphSpecError(f"edge {e.eid}: zero-length embedding")
        self._check_planarity()
        self._check_connectivity()

    def _check_planarity(self):
        """No two embedded edges (over all translates) cross except at shared endpoints."""
        segs = []
        for e in self.edges:
            p = self.pos[e.tail]
            q = _v_add(p, self.evec(e))
            segs.append((e, p, q))

        def endpoints_shared(p1, q1, p2, q2, pt):
            for a in (p1, q1):
                for b in (p2, q2):
                    if _close(a, b, 1e-9) and _close(a, pt, 1e-9):
                        return True
            return False

        for i, (e1, p1, q1) in enumerate(segs):
            for j, (e2, p2, q2) in enumerate(segs):
                if j < i:
                    continue
                lo_x = math.floor(min(p1[0], q1[0]) - max(p2[0], q2[0])) - 1
                hi_x = math.ceil(max(p1[0], q1[0]) - min(p2[0], q2[0])) + 1
                lo_y = math.floor(min(p1[1], q1[1]) - max(p2[1], q2[1])) - 1
                hi_y = math.ceil(max(p1[1], q1[1]) - min(p2[1], q2[1])) + 1
                for tx in range(lo_x, hi_x + 1):
                    for ty in range(lo_y, hi_y + 1):
                        if i == j and tx == 0 and ty == 0:
                            continue
                        a, b = _v_add(p2, (tx, ty)), _v_add(q2, (tx, ty))
                        bad = _segments_conflict(p1, q1, a, b)
                        if bad is not None:
                            if endpoints_shared(p1, q1, a, b, bad):
                                continue
                            raise GraphSpecError(
                                f"edges {e1.eid} and {e2.eid} (translate {(tx, ty)}) "
                                f"cross near {bad}")

    def _check_connectivity(self):
        parent = {v: v for v in self.vertex_ids}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.edges:
            parent[find(e.tail)] = find(e.head)
        roots = {find(v) for v in self.vertex_ids}
        if len(roots) != 1:
            raise GraphSpecError("fundamental domain is disconnected")

        # lift each vertex along a spanning tree; leftover edge defects must
        # generate all of Z^2 or the infinite graph splits into sublattices
        lift = {self.vertex_ids[0]: (0, 0)}
        adj = {v: [] for v in self.vertex_ids}
        for e in self.edges:
            adj[e.tail].append((e.head, e.offset))
            adj[e.head].append((e.tail, (-e.offset[0], -e.offset[1])))
        queue = [self.vertex_ids[0]]
        while queue:
            v = queue.pop()
            for u, off in adj[v]:
                if u not in lift:
                    lift[u] = _v_add(lift[v], off)
                    queue.append(u)
        defects = []
        for e in self.edges:
            d = _v_sub(_v_add(lift[e.tail], e.offset), lift[e.head])
            d = (int(round(d[0])), int(round(d[1])))
            if d != (0, 0):
                defects.append(d)
        if _lattice_index(defects) != 1:
            raise GraphSpecError("infinite graph is disconnected (offsets span a sublattice)")


def _lattice_index(vecs):
    """Index in Z^2 of the sublattice generated by vecs (0 if not full rank)."""
    g = 0
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            g = math.gcd(g, abs(vecs[i][0] * vecs[j][1] - vecs[i][1] * vecs[j][0]))
    return g


def _segments_conflict(p1, q1, p2, q2):
    """Return a witness point if two closed segments intersect improperly, else None.

    Touching at a common endpoint is allowed by the caller; anything else
    (proper crossing, endpoint in the interior of the other segment, or a
    collinear overlap) is a conflict.
    """
    eps = 1e-9
    d1 = _v_sub(q1, p1)
    d2 = _v_sub(q2, p2)
    denom = _cross(d1, d2)
    r = _v_sub(p2, p1)
    if abs(denom) > eps:
        t = _cross(r, d2) / denom
        s = _cross(r, d1) / denom
        if -eps < t < 1 + eps and -eps < s < 1 + eps:
            return _v_add(p1, _v_scale(d1, t))
        return None
    # parallel
    if abs(_cross(r, d1)) > eps * (1 + abs(d1[0]) + abs(d1[1])):
        return None
    # collinear: check 1-d overlap
    L = math.hypot(*d1)
    u = _v_scale(d1, 1.0 / L)
    a0, a1 = 0.0, L
    b0 = _dot(_v_sub(p2, p1), u)
    b1 = _dot(_v_sub(q2, p1), u)
    lo, hi = max(a0, min(b0, b1)), min(a1, max(b0, b1))
    if hi - lo > eps:
        return _v_add(p1, _v_scale(u, (lo + hi) / 2))
    if hi - lo > -eps:
        return _v_add(p1, _v_scale(u, lo))
    return None


def _parse_weight(x, where):
    if isinstance(x, str):
        try:
            return Fraction(x), True
        except (ValueError, ZeroDivisionError):
            raise GraphSpecError(f"{where}: bad rational string {x!r}")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise GraphSpecError(f"{where}: weight must be a number or 'p/q' string")
    if isinstance(x, int):
        return Fraction(x), True
    return float(x), False


def parse_graph_spec(text: str) -> PeriodicGraph:
    """Parse and validate the JSON graph-spec document.

    Schema: {"name": str, "vertices": [{"id", "pos": [x, y]}],
    "edges": [{"tail", "head", "offset": [i, j], "w_fwd", "w_bwd"}]}.
    Rational strings "p/q" (or bare ints) put the whole graph in exact mode.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphSpecError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise GraphSpecError("top level must be an object")
    name = doc.get("name", "unnamed")
    verts = doc.get("vertices")
    edges = doc.get("edges")
    if not isinstance(verts, list) or not isinstance(edges, list):
        raise GraphSpecError("'vertices' and 'edges' must be arrays")
    ids, pos = [], {}
    for k, v in enumerate(verts):
        if not isinstance(v, dict) or "id" not in v or "pos" not in v:
            raise GraphSpecError(f"vertex #{k}: needs 'id' and 'pos'")
        vid = v["id"]
        p = v["pos"]
        if not (isinstance(p, list) and len(p) == 2):
            raise GraphSpecError(f"vertex {vid!r}: 'pos' must be [x, y]")
        ids.append(vid)
        pos[vid] = (float(p[0]), float(p[1]))
    parsed = []
    all_exact = True
    for k, e in enumerate(edges):
        if not isinstance(e, dict):
            raise GraphSpecError(f"edge #{k}: must be an object")
        for fld in ("tail", "head", "offset", "w_fwd", "w_bwd"):
            if fld not in e:
                raise GraphSpecError(f"edge #{k}: missing field {fld!r}")
        off = e["offset"]
        if not (isinstance(off, list) and len(off) == 2
                and all(isinstance(t, int) for t in off)):
            raise GraphSpecError(f"edge #{k}: 'offset' must be [int, int]")
        wf, exf = _parse_weight(e["w_fwd"], f"edge #{k} w_fwd")
        wb, exb = _parse_weight(e["w_bwd"], f"edge #{k} w_bwd")
        all_exact = all_exact and exf and exb
        parsed.append((e["tail"], e["head"], (off[0], off[1]), wf, wb))
    out = []
    for k, (t, h, off, wf, wb) in enumerate(parsed):
        if not all_exact:
            wf, wb = float(wf), float(wb)
        out.append(BaseEdge(k, t, h, off, wf, wb))
    return PeriodicGraph(name, ids, pos, out, all_exact)


# ---------------------------------------------------------------------------
# quotient graphs with rotation systems and faces


@dataclass(frozen=True)
class QEdge:
    """Edge of a quotient (or planar) graph with its canonical lift data.

    The drawn segment runs from pos[tail] to pos[tail] + vec; the head's
    canonical copy sits at pos[head], displaced from the drawn endpoint by
    N * wrap.
    """
    idx: int
    tail: object
    head: object
    wrap: tuple
    vec: tuple
    w_fwd: object
    w_bwd: object
    base: object = None


@dataclass
class Face:
    idx: int
    darts: tuple          # (edge idx, end) in ccw traversal order
    corners: tuple        # (vertex id, lift) per dart
    shifts: tuple         # integer lift shift of each corner vs canonical pos
    area: float


class TorusGraph:
    """Embedded graph on the torus [0, N)^2 (or in the plane when planar=True)."""

    def __init__(self, N, vertex_ids, pos, edges, rotation, planar=False, check_euler=True):
        self.N = N
        self.planar = planar
        self.vertex_ids = list(vertex_ids)
        self.pos = dict(pos)
        self.edges = list(edges)
        self.rotation = {v: list(r) for v, r in rotation.items()}
        self._rotindex = {}
        for v, rot in self.rotation.items():
            for i, d in enumerate(rot):
                self._rotindex[d] = (v, i)
        for e in self.edges:
            for end in (0, 1):
                if (e.idx, end) not in self._rotindex:
                    raise GraphSpecError(f"rotation system misses dart {(e.idx, end)}")
        self.faces = []
        self.faceof = {}
        self._trace_faces()
        if check_euler:
            v, ed, f = len(self.vertex_ids), len(self.edges), len(self.faces)
            want = 2 if planar else 0
            if v - ed + f != want:
                raise GraphSpecError(
                    f"Euler check failed: V-E+F = {v}-{ed}+{f} != {want}")
        self.outer_face = None
        if planar:
            neg = [f.idx for f in self.faces if f.area < 0]
            if len(neg) != 1:
                raise GraphSpecError("planar patch must have exactly one outer face")
            self.outer_face = neg[0]

    # -- darts ----------------------------------------------------------

    def dart_vertex(self, d):
        e = self.edges[d[0]]
        return e.tail if d[1] == 0 else e.head

    def dart_vec(self, d):
        e = self.edges[d[0]]
        return e.vec if d[1] == 0 else (-e.vec[0], -e.vec[1])

    def dart_weight_out(self, d):
        """Weight of the directed edge leaving the dart's vertex."""
        e = self.edges[d[0]]
        return e.w_fwd if d[1] == 0 else e.w_bwd

    def _trace_faces(self):
        scale = max(1.0, float(self.N or 1))
        for e in self.edges:
            for end in (0, 1):
                start = (e.idx, end)
                if start in self.faceof:
                    continue
                darts, lifts = [], []
                d = start
                lift = self.pos[self.dart_vertex(start)]
                while True:
                    self.faceof[d] = (len(self.faces), len(darts))
                    darts.append(d)
                    lifts.append(lift)
                    nlift = _v_add(lift, self.dart_vec(d))
                    rd = (d[0], 1 - d[1])
                    v2, k = self._rotindex[rd]
                    rot = self.rotation[v2]
                    nd = rot[k - 1]
                    if nd == start:
                        if not _close(nlift, lifts[0], 1e-6 * scale):
                            raise GraphSpecError(
                                "face traversal does not close up (non-disc face); "
                                "graph unsupported")
                        break
                    if nd in self.faceof:
                        raise GraphSpecError("inconsistent rotation system")
                    d = nd
                    lift = nlift
                corners = tuple((self.dart_vertex(dd), ll) for dd, ll in zip(darts, lifts))
                shifts = []
                for (vid, ll) in corners:
                    if self.N:
                        s = _v_scale(_v_sub(ll, self.pos[vid]), 1.0 / self.N)
                    else:
                        s = (0.0, 0.0)
                    si = (int(round(s[0])), int(round(s[1])))
                    if not _close(s, si, 1e-6):
                        raise GraphSpecError("corner lift is not an integer translate")
                    shifts.append(si)
                area = 0.0
                for i in range(len(lifts)):
                    a, b = lifts[i], lifts[(i + 1) % len(lifts)]
                    area += _cross(a, b) / 2.0
                self.faces.append(Face(len(self.faces), tuple(darts), corners,
                                       tuple(shifts), area))

    def face_barycenter(self, fid):
        f = self.faces[fid]
        xs = [c[1] for c in f.corners]
        return (sum(p[0] for p in xs) / len(xs), sum(p[1] for p in xs) / len(xs))

    def out_darts(self, vid):
        return list(self.rotation[vid])


def _canon(p, N):
    t = (math.floor(p[0] / N), math.floor(p[1] / N))
    return (p[0] - N * t[0], p[1] - N * t[1]), t


def build_quotient(g: PeriodicGraph, n: int) -> TorusGraph:
    """Quotient of the periodic graph by (n Z)^2; a multigraph when n == 1."""
    if not isinstance(n, int) or n < 1:
        raise GraphSpecError("quotient size n must be a positive integer")
    vids = [(v, i, j) for v in g.vertex_ids for i in range(n) for j in range(n)]
    pos = {(v, i, j): (g.pos[v][0] + i, g.pos[v][1] + j)
           for v in g.vertex_ids for i in range(n) for j in range(n)}
    edges = []
    eindex = {}
    for be in g.edges:
        vec = g.evec(be)
        for i in range(n):
            for j in range(n):
                ti, tj = i + be.offset[0], j + be.offset[1]
                wrap = (ti // n, tj // n)
                head = (be.head, ti % n, tj % n)
                idx = len(edges)
                eindex[(be.eid, i, j)] = idx
                edges.append(QEdge(idx, (be.tail, i, j), head, wrap, vec,
                                   be.w_fwd, be.w_bwd, base=be.eid))

    # rotation per base vertex, shared by every copy
    base_rot = {}
    for v in g.vertex_ids:
        types = []
        for be in g.edges:
            vec = g.evec(be)
            if be.tail == v:
                types.append((math.atan2(vec[1], vec[0]), be.eid, 0))
            if be.head == v:
                types.append((math.atan2(-vec[1], -vec[0]), be.eid, 1))
        types.sort()
        for a in range(1, len(types)):
            if abs(types[a][0] - types[a - 1][0]) < 1e-9:
                raise GraphSpecError(
                    f"vertex {v!r}: coincident edge directions break the rotation system")
        if not types:
            raise GraphSpecError(f"vertex {v!r} is isolated")
        base_rot[v] = [(eid, end) for (_, eid, end) in types]

    rotation = {}
    for (v, i, j) in vids:
        rot = []
        for (eid, end) in base_rot[v]:
            be = g.edges[eid]
            if end == 0:
                rot.append((eindex[(eid, i, j)], 0))
            else:
                ii = (i - be.offset[0]) % n
                jj = (j - be.offset[1]) % n
                rot.append((eindex[(eid, ii, jj)], 1))
        rotation[(v, i, j)] = rot

    t = TorusGraph(n, vids, pos, edges, rotation)
    t.base = g
    return t


# ---------------------------------------------------------------------------
# dual graph


class DualGraph(TorusGraph):
    """Dual of an embedded torus graph: one vertex per face, one edge per edge.

    Dual edge k corresponds to host edge k, oriented from the face left of
    the host edge to the face on its right.  All dual weights are 1.
    """

    def __init__(self, host: TorusGraph):
        self.host = host
        N = host.N
        bary = {}
        tshift = {}
        dpos = {}
        for f in host.faces:
            b = host.face_barycenter(f.idx)
            pc, t = _canon(b, N)
            bary[f.idx] = b
            tshift[f.idx] = t
            dpos[f.idx] = pc
        edges = []
        for e in host.edges:
            fl, il = host.faceof[(e.idx, 0)]
            fr, ir = host.faceof[(e.idx, 1)]
            s_l = tuple(-c for c in host.faces[fl].shifts[il])
            s_r = tuple(e.wrap[k] - host.faces[fr].shifts[ir][k] for k in (0, 1))
            wrap = (tshift[fr][0] + s_r[0] - tshift[fl][0] - s_l[0],
                    tshift[fr][1] + s_r[1] - tshift[fl][1] - s_l[1])
            vec = (dpos[fr][0] + N * wrap[0] - dpos[fl][0],
                   dpos[fr][1] + N * wrap[1] - dpos[fl][1])
            one = Fraction(1) if _graph_exact(host) else 1.0
            edges.append(QEdge(e.idx, fl, fr, wrap, vec, one, one, base=e.idx))
        rotation = {}
        for f in host.faces:
            rot = []
            for d in f.darts:
                rot.append((d[0], 0) if d[1] == 0 else (d[0], 1))
            rotation[f.idx] = rot
        super().__init__(N, [f.idx for f in host.faces], dpos, edges, rotation)
        self.left_shift = {}
        self.right_shift = {}
        for e in host.edges:
            fl, il = host.faceof[(e.idx, 0)]
            fr, ir = host.faceof[(e.idx, 1)]
            self.left_shift[e.idx] = tuple(
                tshift[fl][k] - host.faces[fl].shifts[il][k] for k in (0, 1))
            self.right_shift[e.idx] = tuple(
                tshift[fr][k] + e.wrap[k] - host.faces[fr].shifts[ir][k] for k in (0, 1))


def _graph_exact(t: TorusGraph):
    return all(isinstance(e.w_fwd, (int, Fraction)) and isinstance(e.w_bwd, (int, Fraction))
               for e in t.edges)


def build_dual(t: TorusGraph) -> DualGraph:
    return DualGraph(t)


# ---------------------------------------------------------------------------
# double graph


KIND_PT, KIND_PH, KIND_DL, KIND_DR = "pt", "ph", "dl", "dr"
KINDS = (KIND_PT, KIND_PH, KIND_DL, KIND_DR)


@dataclass(frozen=True)
class DEdge:
    """Edge of a double graph, always written black -> white.

    kind says which corner of the host edge it represents: primal tail (pt),
    primal head (ph), dual vertex left of the host edge (dl) or right (dr).
    bw_unflipped is the reference direction: True when the edge points black
    to white under the stored orientation of the host edge.
    """
    idx: int
    black: object
    white: object
    weight: object
    kind: str
    host_edge: int
    bw_unflipped: bool


class DoubleGraph:
    """Bipartite double of a torus graph together with its embedding.

    Black vertices are ('v', vid) and ('f', fid); whites are ('w', host edge
    idx).  self.g is the underlying embedded TorusGraph whose faces are the
    quadrilaterals of the double.
    """

    def __init__(self, host: TorusGraph, dual: DualGraph = None):
        self.host = host
        self.dual = dual if dual is not None else build_dual(host)
        N = host.N
        vids, pos = [], {}
        for v in host.vertex_ids:
            vids.append(("v", v))
            pos[("v", v)] = host.pos[v]
        for f in self.dual.vertex_ids:
            vids.append(("f", f))
            pos[("f", f)] = self.dual.pos[f]
        self.whites = []
        tw = {}
        for e in host.edges:
            w = ("w", e.idx)
            mid = _v_add(host.pos[e.tail], _v_scale(e.vec, 0.5))
            pc, t = _canon(mid, N) if N else (mid, (0, 0))
            vids.append(w)
            pos[w] = pc
            tw[e.idx] = t
            self.whites.append(w)

        qedges = []
        dedges = []
        self.side = {}
        for e in host.edges:
            w = ("w", e.idx)
            fl = self.dual.edges[e.idx].tail
            fr = self.dual.edges[e.idx].head
            ls = self.dual.left_shift[e.idx]
            rs = self.dual.right_shift[e.idx]
            entries = [
                (("v", e.tail), tw[e.idx], _v_scale(e.vec, 0.5),
                 e.w_fwd, KIND_PT, True),
                (("v", e.head), _v_sub(tw[e.idx], e.wrap), _v_scale(e.vec, -0.5),
                 e.w_bwd, KIND_PH, False),
                (("f", fl), _v_sub(tw[e.idx], ls),
                 _v_sub(_v_add(pos[w], _v_scale(_v_sub(tw[e.idx], ls), N or 0)),
                        self.dual.pos[fl]) if N else _v_sub(pos[w], self.dual.pos[fl]),
                 _one_like(e), KIND_DL, True),
                (("f", fr), _v_sub(tw[e.idx], rs),
                 _v_sub(_v_add(pos[w], _v_scale(_v_sub(tw[e.idx], rs), N or 0)),
                        self.dual.pos[fr]) if N else _v_sub(pos[w], self.dual.pos[fr]),
                 _one_like(e), KIND_DR, False),
            ]
            self.side[e.idx] = {}
            for (black, wrap, vec, wt, kind, bw) in entries:
                idx = len(qedges)
                wrap = (int(round(wrap[0])), int(round(wrap[1])))
                qedges.append(QEdge(idx, black, w, wrap, vec, wt, wt, base=(e.idx, kind)))
                dedges.append(DEdge(idx, black, w, wt, kind, e.idx, bw))
                self.side[e.idx][kind] = idx

        rotation = {}
        for e in host.edges:
            s = self.side[e.idx]
            rotation[("w", e.idx)] = [(s[KIND_PH], 1), (s[KIND_DL], 1),
                                      (s[KIND_PT], 1), (s[KIND_DR], 1)]
        for v in host.vertex_ids:
            rot = []
            for (eidx, end) in host.rotation[v]:
                kind = KIND_PT if end == 0 else KIND_PH
                rot.append((self.side[eidx][kind], 0))
            rotation[("v", v)] = rot
        for f in host.faces:
            rot = []
            for (eidx, end) in f.darts:
                kind = KIND_DL if end == 0 else KIND_DR
                rot.append((self.side[eidx][kind], 0))
            rotation[("f", f.idx)] = rot

        self.g = TorusGraph(N, vids, pos, qedges, rotation, planar=host.planar)
        self.bw_edges = dedges
        for f in self.g.faces:
            if host.planar and f.idx == self.g.outer_face:
                continue
            if len(f.darts) != 4:
                raise GraphSpecError("double graph face is not a quadrilateral")
            colors = [self.g.dart_vertex(d)[0] for d in f.darts]
            if sorted(colors[0::2]) == ["w", "w"]:
                ok = colors[1][0] in "vf" and colors[3][0] in "vf"
            else:
                ok = colors[0] in "vf" and colors[2] in "vf" and \
                    colors[1] == "w" and colors[3] == "w"
            if not ok:
                raise GraphSpecError("double graph face colors do not alternate")

    @property
    def blacks(self):
        return [v for v in self.g.vertex_ids if v[0] != "w"]

    def weight_of_matching(self, edge_ids):
        total = Fraction(1) if _graph_exact(self.host) else 1.0
        for i in edge_ids:
            total = total * self.bw_edges[i].weight
        return total


def _one_like(e: QEdge):
    return Fraction(1) if isinstance(e.w_fwd, (int, Fraction)) else 1.0


def build_double(t: TorusGraph, dual: DualGraph = None) -> DoubleGraph:
    return DoubleGraph(t, dual)


# ---------------------------------------------------------------------------
# reference dual paths (seams)


@dataclass
class DualPaths:
    """Two transversal reference curves on the torus, seam form.

    gamma_x winds horizontally and lives on the horizontal line y = y0 (mod
    N); gamma_y winds vertically on x = x0.  An edge's crossing exponents
    are integers: ez counts net upward crossings of gamma_x, ew net rightward
    crossings of gamma_y.  Both are computed from canonical endpoint
    positions plus the wrap, so they form an exact cocycle.
    """
    N: int
    y0: float
    x0: float
    gamma_x_faces: list = field(default_factory=list)
    gamma_y_faces: list = field(default_factory=list)
    crossed_x: dict = field(default_factory=dict)
    crossed_y: dict = field(default_factory=dict)

    def _sig_y(self, p):
        return math.floor((p[1] - self.y0) / self.N)

    def _sig_x(self, p):
        return math.floor((p[0] - self.x0) / self.N)

    def exps(self, tail_pos, head_pos, wrap):
        """(ez, ew) for an edge drawn from tail_pos to head canonical + wrap."""
        ez = wrap[1] + self._sig_y(head_pos) - self._sig_y(tail_pos)
        ew = wrap[0] + self._sig_x(head_pos) - self._sig_x(tail_pos)
        return (ez, ew)

    def edge_exps(self, graph: TorusGraph, e: QEdge):
        return self.exps(graph.pos[e.tail], graph.pos[e.head], e.wrap)


def choose_dual_paths(t: TorusGraph, dual: DualGraph = None,
                      y0: float = None, x0: float = None) -> DualPaths:
    """Canonical reference curves for a torus graph.

    By default the seams sit just below (left of) every vertex, face
    barycenter and edge midpoint, so only wrapping edges cross them.  Passing
    y0/x0 moves a seam inside the domain; all downstream exponents stay
    consistent.
    """
    if dual is None:
        dual = build_dual(t)
    N = t.N
    ys, xs = [], []
    for p in t.pos.values():
        xs.append(p[0]); ys.append(p[1])
    for f in t.faces:
        pc, _ = _canon(t.face_barycenter(f.idx), N)
        xs.append(pc[0]); ys.append(pc[1])
    for e in t.edges:
        mid = _v_add(t.pos[e.tail], _v_scale(e.vec, 0.5))
        pc, _ = _canon(mid, N)
        xs.append(pc[0]); ys.append(pc[1])
    if y0 is None:
        y0 = min(ys) - (N - (max(ys) - min(ys))) / 2.0
    if x0 is None:
        x0 = min(xs) - (N - (max(xs) - min(xs))) / 2.0
    paths = DualPaths(N, y0, x0)

    for axis in ("x", "y"):
        level = y0 if axis == "x" else x0
        crossings = []
        for e in t.edges:
            p1 = t.pos[e.tail]
            p2 = _v_add(p1, e.vec)
            c1 = p1[1] if axis == "x" else p1[0]
            c2 = p2[1] if axis == "x" else p2[0]
            if abs(c2 - c1) < TOL:
                continue
            kmin = math.ceil((min(c1, c2) - level) / N + TOL)
            kmax = math.floor((max(c1, c2) - level) / N - TOL)
            for k in range(kmin, kmax + 1):
                tt = (level + k * N - c1) / (c2 - c1)
                if tt < -TOL or tt > 1 + TOL:
                    continue
                other = (p1[0] + tt * e.vec[0]) if axis == "x" else (p1[1] + tt * e.vec[1])
                sgn = 1 if c2 > c1 else -1
                crossings.append((other % N, e.idx, sgn))
        crossings.sort()
        for a in range(1, len(crossings)):
            if abs(crossings[a][0] - crossings[a - 1][0]) < 1e-9:
                raise GraphSpecError("seam passes through a vertex of the graph; "
                                     "provide an explicit seam level")
        crossed = {}
        for (_, eidx, sgn) in crossings:
            crossed[eidx] = crossed.get(eidx, 0) + sgn
        faces_seq = []
        for (_, eidx, sgn) in crossings:
            if axis == "x":
                d = (eidx, 1) if sgn > 0 else (eidx, 0)
            else:
                d = (eidx, 0) if sgn > 0 else (eidx, 1)
            faces_seq.append(t.faceof[d][0])
        if len(set(faces_seq)) != len(faces_seq):
            raise GraphSpecError("reference path revisits a face; choose another seam level")
        if axis == "x":
            paths.crossed_x = crossed
            paths.gamma_x_faces = faces_seq
        else:
            paths.crossed_y = crossed
            paths.gamma_y_faces = faces_seq

    # consistency: seam exponents must reproduce the geometric crossing counts
    for e in t.edges:
        ez, ew = paths.edge_exps(t, e)
        if paths.crossed_x.get(e.idx, 0) != ez or paths.crossed_y.get(e.idx, 0) != ew:
            raise GraphSpecError("seam crossing bookkeeping is inconsistent")
    return paths


# ---------------------------------------------------------------------------
# wired pieces


@dataclass(frozen=True)
class WEdge:
    idx: int
    patch_eidx: int
    tail: object          # interior patch vid or 'r'
    head: object
    w_fwd: object
    w_bwd: object


class WiredGraph:
    """An n x n piece of the periodic graph with the boundary glued to a root.

    Edges between two boundary vertices are dropped (they are loops at the
    root and never enter a spanning tree).  The planar face structure is the
    patch's, with faces merged across dropped border edges; the face class
    absorbing the outer region is the default dual root r*.
    """

    def __init__(self, base: PeriodicGraph, n: int, root_face=None):
        if n < 2:
            raise GraphSpecError("wired piece needs n >= 2")
        self.base = base
        self.n = n
        self.patch = _build_patch(base, n)
        outer = self.patch.outer_face
        boundary = set()
        for (vid, _lift) in self.patch.faces[outer].corners:
            boundary.add(vid)
        self.boundary = boundary
        self.interior = sorted(v for v in self.patch.vertex_ids if v not in boundary)
        if not self.interior:
            raise GraphSpecError(f"no interior vertices at n={n}; enlarge the piece")

        # Gluing the boundary to one root contracts a spanning forest of the
        # border subgraph (faces untouched); every remaining border edge
        # becomes a redundant loop and is deleted, merging its two faces.
        parent = {f.idx: f.idx for f in self.patch.faces}
        vpar = {v: v for v in boundary}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def vfind(x):
            while vpar[x] != x:
                vpar[x] = vpar[vpar[x]]
                x = vpar[x]
            return x

        self.edges = []
        for e in self.patch.edges:
            t_in = e.tail not in boundary
            h_in = e.head not in boundary
            if not t_in and not h_in:
                a, b = vfind(e.tail), vfind(e.head)
                if a != b:
                    vpar[a] = b
                else:
                    fl = self.patch.faceof[(e.idx, 0)][0]
                    fr = self.patch.faceof[(e.idx, 1)][0]
                    parent[find(fl)] = find(fr)
                continue
            self.edges.append(WEdge(len(self.edges), e.idx,
                                    e.tail if t_in else "r",
                                    e.head if h_in else "r",
                                    e.w_fwd, e.w_bwd))
        self.face_class = {f.idx: find(f.idx) for f in self.patch.faces}
        self.classes = sorted(set(self.face_class.values()))
        outer_class = self.face_class[outer]
        if root_face is None:
            self.root_class = outer_class
        else:
            cand = self.face_class[root_face]
            if not self._class_touches_root(cand):
                raise GraphSpecError("chosen r* face is not incident to the root")
            self.root_class = cand
        self.double = WiredDouble(self)

    def _class_touches_root(self, cls):
        for e in self.edges:
            if e.tail == "r" or e.head == "r":
                pe = self.patch.edges[e.patch_eidx]
                fl = self.face_class[self.patch.faceof[(pe.idx, 0)][0]]
                fr = self.face_class[self.patch.faceof[(pe.idx, 1)][0]]
                if cls in (fl, fr):
                    return True
        return False

    def out_edges(self, v):
        """Directed transitions (edge idx, target, weight) out of interior v."""
        out = []
        for e in self.edges:
            if e.tail == v:
                out.append((e.idx, e.head, e.w_fwd))
            if e.head == v:
                out.append((e.idx, e.tail, e.w_bwd))
        return out

    def class_pos(self, cls):
        members = sorted(f for f, c in self.face_class.items() if c == cls
                         and f != self.patch.outer_face)
        if not members:
            members = [self.patch.outer_face]
        return self.patch.face_barycenter(members[0])


def _build_patch(base: PeriodicGraph, n: int) -> TorusGraph:
    vids = [(v, i, j) for v in base.vertex_ids for i in range(n) for j in range(n)]
    vset = set(vids)
    pos = {(v, i, j): (base.pos[v][0] + i, base.pos[v][1] + j) for (v, i, j) in vids}
    edges = []
    for be in base.edges:
        vec = base.evec(be)
        for i in range(n):
            for j in range(n):
                head = (be.head, i + be.offset[0], j + be.offset[1])
                if head not in vset:
                    continue
                edges.append(QEdge(len(edges), (be.tail, i, j), head, (0, 0), vec,
                                   be.w_fwd, be.w_bwd, base=be.eid))
    incident = {v: [] for v in vids}
    for e in edges:
        vec = e.vec
        incident[e.tail].append((math.atan2(vec[1], vec[0]), e.idx, 0))
        incident[e.head].append((math.atan2(-vec[1], -vec[0]), e.idx, 1))
    rotation = {}
    used = []
    for v in vids:
        if not incident[v]:
            continue
        inc = sorted(incident[v])
        rotation[v] = [(eidx, end) for (_, eidx, end) in inc]
        used.append(v)
    pos = {v: pos[v] for v in used}
    return TorusGraph(None, used, pos, edges, rotation, planar=True)


class WiredDouble:
    """Double graph of a wired piece with the root pair already removed.

    Black vertices: ('v', interior vid) and ('f', face class != r*); whites:
    ('w', wired edge idx).  Quads carry the embedded geometry needed by
    height propagation; quads whose dual corner is r* do not exist (that
    region is the puncture).
    """

    def __init__(self, w: WiredGraph):
        self.wired = w
        self.blacks = [("v", v) for v in w.interior] + \
                      [("f", c) for c in w.classes if c != w.root_class]
        self.whites = [("w", e.idx) for e in w.edges]
        self.pos = {}
        for v in w.interior:
            self.pos[("v", v)] = w.patch.pos[v]
        for c in w.classes:
            if c != w.root_class:
                self.pos[("f", c)] = w.class_pos(c)
        self.bw_edges = []
        self.side = {}
        patch = w.patch
        for e in w.edges:
            pe = patch.edges[e.patch_eidx]
            white = ("w", e.idx)
            self.pos[white] = _v_add(patch.pos[pe.tail], _v_scale(pe.vec, 0.5))
            self.side[e.idx] = {}
            fl = w.face_class[patch.faceof[(pe.idx, 0)][0]]
            fr = w.face_class[patch.faceof[(pe.idx, 1)][0]]
            entries = []
            if e.tail != "r":
                entries.append((("v", e.tail), e.w_fwd, KIND_PT, True))
            if e.head != "r":
                entries.append((("v", e.head), e.w_bwd, KIND_PH, False))
            one = Fraction(1) if isinstance(e.w_fwd, (int, Fraction)) else 1.0
            if fl != w.root_class:
                entries.append((("f", fl), one, KIND_DL, True))
            if fr != w.root_class:
                entries.append((("f", fr), one, KIND_DR, False))
            for (black, wt, kind, bw) in entries:
                idx = len(self.bw_edges)
                self.bw_edges.append(DEdge(idx, black, white, wt, kind, e.idx, bw))
                self.side[e.idx][kind] = idx
        if len(self.blacks) != len(self.whites):
            raise GraphSpecError("wired double is color unbalanced")
        self.quads = self._build_quads()

    def _build_quads(self):
        w = self.wired
        patch = w.patch
        wired_of_patch = {e.patch_eidx: e.idx for e in w.edges}
        quads = []
        for v in w.interior:
            rot = patch.rotation[v]
            m = len(rot)
            for i in range(m):
                d1 = rot[i]
                d2 = rot[(i + 1) % m]
                fid = patch.faceof[d1][0]
                if patch.faceof[(d2[0], 1 - d2[1])][0] != fid:
                    raise GraphSpecError("corner face bookkeeping is inconsistent")
                cls = w.face_class[fid]
                if cls == w.root_class:
                    continue
                e1 = wired_of_patch[d1[0]]
                e2 = wired_of_patch[d2[0]]
                k1 = KIND_DL if d1[1] == 0 else KIND_DR
                k2 = KIND_DR if d2[1] == 0 else KIND_DL
                bary = patch.face_barycenter(fid)
                corners = [(("v", v), patch.pos[v]),
                           (("w", e1), self.pos[("w", e1)]),
                           (("f", cls), bary),
                           (("w", e2), self.pos[("w", e2)])]
                sides = [self.side[e1][KIND_PT if patch.edges[d1[0]].tail == v else KIND_PH],
                         self.side[e1][k1],
                         self.side[e2][k2],
                         self.side[e2][KIND_PT if patch.edges[d2[0]].tail == v else KIND_PH]]
                quads.append((len(quads), corners, sides))
        return quads

    def weight_of_matching(self, edge_ids):
        total = Fraction(1) if isinstance(self.bw_edges[0].weight, (int, Fraction)) else 1.0
        for i in edge_ids:
            total = total * self.bw_edges[i].weight
        return total


def build_wired(g: PeriodicGraph, n: int, root_face=None) -> WiredGraph:
    return WiredGraph(g, n, root_face=root_face)
