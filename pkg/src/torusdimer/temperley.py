"""Matchings of double graphs, oriented spanning structures, and the
weight-preserving bijection between them.

Oriented forests are dicts mapping each vertex to its outgoing directed edge
(eidx, dir) with dir 0 along the stored edge and 1 against it.  On the torus
a valid forest has no null-homologous cycle; on a wired piece a valid tree
reaches the root from everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .lattice import (
    DoubleGraph, GraphSpecError, TorusGraph, WiredGraph,
    KIND_PT, KIND_PH, KIND_DL, KIND_DR,
)


class EnumerationCapExceeded(RuntimeError):
    pass


DEFAULT_CAP = 10 ** 7


# ---------------------------------------------------------------------------
# directed edge helpers


def edge_tail(t: TorusGraph, eidx, dr):
    e = t.edges[eidx]
    return e.tail if dr == 0 else e.head


def edge_head(t: TorusGraph, eidx, dr):
    e = t.edges[eidx]
    return e.head if dr == 0 else e.tail


def edge_weight(t: TorusGraph, eidx, dr):
    e = t.edges[eidx]
    return e.w_fwd if dr == 0 else e.w_bwd


def edge_wrap(t: TorusGraph, eidx, dr):
    w = t.edges[eidx].wrap
    return w if dr == 0 else (-w[0], -w[1])


def forest_cycles(t: TorusGraph, forest):
    """Cycles of the functional out-edge map.

    Returns a list of (cycle edges [(eidx, dir)...], homology class (m, n)).
    """
    color = {}
    cycles = []
    for v0 in t.vertex_ids:
        if v0 in color:
            continue
        path, where = [], {}
        v = v0
        while True:
            if v in color:
                break
            if v in where:
                i = where[v]
                cyc = [forest[u] for u in path[i:]]
                m = sum(edge_wrap(t, e, d)[0] for (e, d) in cyc)
                n = sum(edge_wrap(t, e, d)[1] for (e, d) in cyc)
                cycles.append((cyc, (m, n)))
                break
            where[v] = len(path)
            path.append(v)
            e, d = forest[v]
            v = edge_head(t, e, d)
        for u in path:
            color[u] = True
    return cycles


def forest_weight(t: TorusGraph, forest):
    total = Fraction(1) if _exact(t) else 1.0
    for (e, d) in forest.values():
        total = total * edge_weight(t, e, d)
    return total


def _exact(t: TorusGraph):
    return all(isinstance(e.w_fwd, (int, Fraction)) for e in t.edges)


# ---------------------------------------------------------------------------
# dimer configurations


@dataclass(frozen=True)
class DimerConfig:
    edges: frozenset          # indices into double.bw_edges
    weight: object

    def key(self):
        return tuple(sorted(self.edges))


def _bw_incidence(db):
    by_white, by_black = {}, {}
    for e in db.bw_edges:
        by_white.setdefault(e.white, []).append(e)
        by_black.setdefault(e.black, []).append(e)
    return by_white, by_black


def enumerate_dimers(db, cap=DEFAULT_CAP):
    """All perfect matchings of a double graph, in canonical order.

    db is a DoubleGraph or a WiredDouble; whites are matched by backtracking
    in index order.  Raises EnumerationCapExceeded beyond cap configurations.
    """
    whites = list(db.whites)
    blacks = getattr(db, "blacks", None)
    if blacks is None:
        blacks = [v for v in db.g.vertex_ids if v[0] != "w"]
    by_white, _ = _bw_incidence(db)
    if len(whites) != len(blacks):
        raise GraphSpecError("unbalanced double graph cannot have matchings")
    out = []
    used_black = set()
    chosen = []

    def rec(i):
        if len(out) > cap:
            raise EnumerationCapExceeded(f"more than {cap} matchings")
        if i == len(whites):
            ids = frozenset(chosen)
            out.append(DimerConfig(ids, db.weight_of_matching(ids)))
            return
        for e in by_white.get(whites[i], ()):
            if e.black in used_black:
                continue
            used_black.add(e.black)
            chosen.append(e.idx)
            rec(i + 1)
            chosen.pop()
            used_black.remove(e.black)

    rec(0)
    out.sort(key=lambda c: c.key())
    return out


# ---------------------------------------------------------------------------
# toroidal forests and pairs


@dataclass(frozen=True)
class OcrsfPair:
    primal: tuple             # sorted ((vertex, (eidx, dir)), ...)
    dual: tuple
    weight: object

    def primal_map(self):
        return dict(self.primal)

    def dual_map(self):
        return dict(self.dual)


def enumerate_ocrsf(t: TorusGraph, cap=DEFAULT_CAP):
    """All oriented cycle rooted spanning forests of a torus graph."""
    outs = {v: [] for v in t.vertex_ids}
    for e in t.edges:
        outs[e.tail].append((e.idx, 0))
        outs[e.head].append((e.idx, 1))
    order = list(t.vertex_ids)
    results = []
    forest = {}

    def rec(i):
        if len(results) > cap:
            raise EnumerationCapExceeded(f"more than {cap} forests")
        if i == len(order):
            cycles = forest_cycles(t, forest)
            if any(cls == (0, 0) for (_, cls) in cycles):
                return
            results.append(dict(forest))
            return
        v = order[i]
        for ch in outs[v]:
            forest[v] = ch
            rec(i + 1)
        del forest[v]

    rec(0)
    return results


def duals_of(t: TorusGraph, dual: TorusGraph, forest):
    """The 2^k dual forests of a toroidal forest (k = component count).

    The dual edges not blocked by the forest must be used in full; peeling
    leaves fixes all branch orientations and every leftover cycle can be
    oriented two ways.
    """
    support = {e for (e, _) in forest.values()}
    avail = [e.idx for e in dual.edges if e.idx not in support]
    darts = {}
    for i in avail:
        e = dual.edges[i]
        darts.setdefault(e.tail, []).append((i, 0))
        darts.setdefault(e.head, []).append((i, 1))
    if set(darts) != set(dual.vertex_ids):
        raise GraphSpecError("complement does not cover all dual vertices")
    deg = {v: len(ds) for v, ds in darts.items()}

    removed = set()
    fixed = {}
    queue = [v for v, d in deg.items() if d == 1]
    while queue:
        v = queue.pop()
        if deg[v] != 1:
            continue
        eidx, end = next(p for p in darts[v] if p[0] not in removed)
        fixed[v] = (eidx, 0 if end == 0 else 1)
        removed.add(eidx)
        e = dual.edges[eidx]
        other = e.head if end == 0 else e.tail
        deg[v] -= 1
        deg[other] -= 1
        if deg[other] == 1:
            queue.append(other)

    cycles = []
    cycle_edges = set()
    for v0 in dual.vertex_ids:
        for d0 in darts.get(v0, ()):
            if d0[0] in removed or d0[0] in cycle_edges:
                continue
            walk = []
            v, d = v0, d0
            while True:
                walk.append((v, d))
                cycle_edges.add(d[0])
                eidx, end = d
                e = dual.edges[eidx]
                v2 = e.head if end == 0 else e.tail
                cands = [p for p in darts[v2]
                         if p[0] not in removed and p != (eidx, 1 - end)]
                if len(cands) != 1:
                    raise GraphSpecError("dual complement is not a cycle cover")
                v, d = v2, cands[0]
                if (v, d) == (v0, d0):
                    break
            cycles.append(walk)

    out = []
    for mask in range(1 << len(cycles)):
        f = dict(fixed)
        for ci, walk in enumerate(cycles):
            if not (mask >> ci) & 1:
                for (v, (eidx, end)) in walk:
                    f[v] = (eidx, 0 if end == 0 else 1)
            else:
                for i, (v, _) in enumerate(walk):
                    eidx, end = walk[i - 1][1]
                    f[v] = (eidx, 1 if end == 0 else 0)
        out.append(f)
    return out


def enumerate_ocrsf_pairs(t: TorusGraph, dual: TorusGraph, cap=DEFAULT_CAP):
    pairs = []
    for forest in enumerate_ocrsf(t, cap):
        wf = forest_weight(t, forest)
        for df in duals_of(t, dual, forest):
            wd = forest_weight(dual, df)
            pairs.append(OcrsfPair(tuple(sorted(forest.items())),
                                   tuple(sorted(df.items())), wf * wd))
            if len(pairs) > cap:
                raise EnumerationCapExceeded(f"more than {cap} pairs")
    return pairs


# ---------------------------------------------------------------------------
# the bijection, toroidal case


def forest_to_dimer(db: DoubleGraph, pair: OcrsfPair) -> DimerConfig:
    """Map a non-crossing forest pair to the perfect matching of the double."""
    ids = []
    for v, (eidx, dr) in pair.primal:
        ids.append(db.side[eidx][KIND_PT if dr == 0 else KIND_PH])
    for f, (eidx, dr) in pair.dual:
        ids.append(db.side[eidx][KIND_DL if dr == 0 else KIND_DR])
    ids = frozenset(ids)
    _check_perfect(db, ids)
    return DimerConfig(ids, db.weight_of_matching(ids))


def dimer_to_forest(db: DoubleGraph, m: DimerConfig) -> OcrsfPair:
    primal, dualf = {}, {}
    for i in m.edges:
        e = db.bw_edges[i]
        if e.kind == KIND_PT:
            primal[e.black[1]] = (e.host_edge, 0)
        elif e.kind == KIND_PH:
            primal[e.black[1]] = (e.host_edge, 1)
        elif e.kind == KIND_DL:
            dualf[e.black[1]] = (e.host_edge, 0)
        else:
            dualf[e.black[1]] = (e.host_edge, 1)
    if set(primal) != set(db.host.vertex_ids) or set(dualf) != set(db.dual.vertex_ids):
        raise GraphSpecError("matching does not induce out-edges everywhere")
    for (g, f) in ((db.host, primal), (db.dual, dualf)):
        for (_, cls) in forest_cycles(g, f):
            if cls == (0, 0):
                raise GraphSpecError("matching induced a null-homologous cycle")
    wf = forest_weight(db.host, primal)
    return OcrsfPair(tuple(sorted(primal.items())), tuple(sorted(dualf.items())),
                     wf * forest_weight(db.dual, dualf))


def _check_perfect(db, ids):
    cov = {}
    for i in ids:
        e = db.bw_edges[i]
        for v in (e.black, e.white):
            if v in cov:
                raise GraphSpecError(f"vertex {v} covered twice; pair must be non-crossing")
            cov[v] = True
    whites = list(db.whites)
    blacks = getattr(db, "blacks", None)
    if blacks is None:
        blacks = [v for v in db.g.vertex_ids if v[0] != "w"]
    if len(cov) != len(whites) + len(blacks):
        raise GraphSpecError("not a perfect matching")


# ---------------------------------------------------------------------------
# wired (planar) case


def enumerate_trees(w: WiredGraph, cap=DEFAULT_CAP):
    """All spanning trees of the wired piece, oriented toward the root."""
    order = list(w.interior)
    outs = {v: w.out_edges(v) for v in order}
    trees = []
    tree = {}

    def reaches_root(assign):
        for v0 in order:
            seen = set()
            v = v0
            while v != "r":
                if v in seen:
                    return False
                seen.add(v)
                v = assign[v][1]
        return True

    def rec(i):
        if len(trees) > cap:
            raise EnumerationCapExceeded(f"more than {cap} trees")
        if i == len(order):
            if reaches_root(tree):
                trees.append({v: (e, tgt) for v, (e, tgt) in tree.items()})
            return
        v = order[i]
        for (eidx, tgt, _wt) in outs[v]:
            tree[v] = (eidx, tgt)
            rec(i + 1)
        del tree[v]

    rec(0)
    out = []
    for tr in trees:
        out.append({v: _wired_dir(w, v, eidx) for v, (eidx, _) in tr.items()})
    return out


def _wired_dir(w: WiredGraph, v, eidx):
    e = w.edges[eidx]
    return (eidx, 0 if e.tail == v else 1)


def tree_weight(w: WiredGraph, tree):
    total = Fraction(1) if isinstance(w.edges[0].w_fwd, (int, Fraction)) else 1.0
    for (eidx, dr) in tree.values():
        e = w.edges[eidx]
        total = total * (e.w_fwd if dr == 0 else e.w_bwd)
    return total


def derive_dual_tree(w: WiredGraph, tree):
    """The unique dual spanning tree, oriented toward the dual root class."""
    used = {e for (e, _) in tree.values()}
    comp = [e for e in w.edges if e.idx not in used]
    patch = w.patch
    adj = {}
    for e in comp:
        pe = patch.edges[e.patch_eidx]
        fl = w.face_class[patch.faceof[(pe.idx, 0)][0]]
        fr = w.face_class[patch.faceof[(pe.idx, 1)][0]]
        adj.setdefault(fl, []).append((e.idx, 0, fr))
        adj.setdefault(fr, []).append((e.idx, 1, fl))
    parent = {w.root_class: None}
    queue = [w.root_class]
    while queue:
        c = queue.pop(0)
        for (eidx, dr, other) in adj.get(c, ()):
            if other not in parent:
                # orientation out of `other` toward c
                parent[other] = (eidx, 1 - dr)
                queue.append(other)
    classes = set(w.classes)
    if set(parent) != classes:
        raise GraphSpecError("complement of tree is not a dual spanning tree")
    return {c: p for c, p in parent.items() if p is not None}


def tree_to_dimer(w: WiredGraph, tree, dual_tree=None) -> DimerConfig:
    if dual_tree is None:
        dual_tree = derive_dual_tree(w, tree)
    wd = w.double
    ids = []
    for v, (eidx, dr) in tree.items():
        ids.append(wd.side[eidx][KIND_PT if dr == 0 else KIND_PH])
    for c, (eidx, dr) in dual_tree.items():
        ids.append(wd.side[eidx][KIND_DL if dr == 0 else KIND_DR])
    ids = frozenset(ids)
    _check_perfect(wd, ids)
    return DimerConfig(ids, wd.weight_of_matching(ids))


def dimer_to_tree(w: WiredGraph, m: DimerConfig):
    """Inverse map; returns (tree, dual tree) and checks the tree reaches r."""
    wd = w.double
    tree, dualt = {}, {}
    for i in m.edges:
        e = wd.bw_edges[i]
        if e.kind == KIND_PT:
            tree[e.black[1]] = (e.host_edge, 0)
        elif e.kind == KIND_PH:
            tree[e.black[1]] = (e.host_edge, 1)
        elif e.kind == KIND_DL:
            dualt[e.black[1]] = (e.host_edge, 0)
        else:
            dualt[e.black[1]] = (e.host_edge, 1)
    if set(tree) != set(w.interior):
        raise GraphSpecError("matching does not give every interior vertex an out-edge")
    for v0 in w.interior:
        seen = set()
        v = v0
        while v != "r":
            if v in seen:
                raise GraphSpecError("matching induced a cycle; not a wired tree")
            seen.add(v)
            eidx, dr = tree[v]
            e = w.edges[eidx]
            v = e.head if dr == 0 else e.tail
    return tree, dualt
