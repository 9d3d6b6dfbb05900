"""Connections, Laplacians, incidence operators, block identities,
determinantal edge kernels, and Green matrices.

Transport convention: an edge whose seam-crossing exponents are (ez, ew)
carries forward parallel transport z^ez * w^-ew from tail to head.  With
this choice the Laplacian determinant coincides with the height-graded
matching sum, and the backward monodromy of a positively oriented class
(m, n) cycle is z^-n w^m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import (
    DoubleGraph, DualPaths, GraphSpecError, TorusGraph, WiredGraph,
    build_dual, build_double, build_wired, choose_dual_paths,
    KIND_PT, KIND_PH, KIND_DL, KIND_DR,
)
from .laurent import LaurentPoly, find_monomial_gauge
from .linalg import det_exact, det_float, inv_exact, matmul, solve_exact
from .kasteleyn import (
    KasteleynOrientation, default_orientation, kasteleyn_matrix, orient,
    char_poly, _weights_exact, _orientation_key, laurent_from_evals,
)
from .temperley import (
    enumerate_dimers, enumerate_ocrsf, enumerate_ocrsf_pairs, forest_cycles,
    forest_weight, forest_to_dimer, edge_wrap,
)


@dataclass
class Connection:
    """Parallel transport per directed edge, generated by seam crossings.

    paths=None (or z=w=1) is the trivial connection.
    """
    paths: DualPaths = None
    z: object = 1
    w: object = 1

    def forward(self, graph: TorusGraph, e):
        if self.paths is None:
            return _one(self.z)
        ez, ew = self.paths.edge_exps(graph, e)
        return (self.z ** ez) * (self.w ** (-ew))

    def backward(self, graph, e):
        if self.paths is None:
            return _one(self.z)
        ez, ew = self.paths.edge_exps(graph, e)
        return (self.z ** (-ez)) * (self.w ** ew)

    def along(self, graph, eidx, dr):
        e = graph.edges[eidx]
        return self.forward(graph, e) if dr == 0 else self.backward(graph, e)


def _one(sample):
    return Fraction(1) if isinstance(sample, (int, Fraction)) else 1.0


def connection_from(paths: DualPaths, z, w) -> Connection:
    if z == 0 or w == 0:
        raise GraphSpecError("connection parameters must be nonzero")
    return Connection(paths, z, w)


def cycle_monodromy(graph, conn: Connection, cycle, reverse=False):
    """Product of transports along a directed cycle [(eidx, dir), ...]."""
    total = _one(conn.z)
    for (eidx, dr) in cycle:
        total = total * conn.along(graph, eidx, dr if not reverse else 1 - dr)
    return total


def laplacian_matrix(graph, conn: Connection = None, interior=None):
    """(order, rows) with rows[v][u] = sum c_vu (1_{u=v} - transport(u -> v)).

    For a WiredGraph pass graph directly; rows and columns then run over
    interior vertices and the root column is dropped (killed walk).
    """
    if conn is None:
        conn = Connection()
    if isinstance(graph, WiredGraph):
        order = list(graph.interior)
        oi = {v: i for i, v in enumerate(order)}
        zero = Fraction(0) if isinstance(graph.edges[0].w_fwd, (int, Fraction)) else 0.0
        rows = [[zero] * len(order) for _ in order]
        for e in graph.edges:
            if e.tail != "r":
                i = oi[e.tail]
                rows[i][i] += e.w_fwd
                if e.head != "r":
                    rows[i][oi[e.head]] -= e.w_fwd
            if e.head != "r":
                i = oi[e.head]
                rows[i][i] += e.w_bwd
                if e.tail != "r":
                    rows[i][oi[e.tail]] -= e.w_bwd
        return order, rows
    order = list(graph.vertex_ids)
    oi = {v: i for i, v in enumerate(order)}
    exact = all(isinstance(e.w_fwd, (int, Fraction)) for e in graph.edges) and \
        isinstance(conn.z, (int, Fraction)) and isinstance(conn.w, (int, Fraction))
    zero = Fraction(0) if exact else 0.0
    rows = [[zero] * len(order) for _ in order]
    for e in graph.edges:
        ti, hi = oi[e.tail], oi[e.head]
        fw = conn.forward(graph, e)
        rows[ti][ti] += e.w_fwd
        rows[ti][hi] -= e.w_fwd * (1 / fw if isinstance(fw, Fraction) else fw ** -1)
        rows[hi][hi] += e.w_bwd
        rows[hi][ti] -= e.w_bwd * fw
    return order, rows


# ---------------------------------------------------------------------------
# incidence operators and the block identity


def incidence_ops(db, orientation: KasteleynOrientation = None, paths=None, z=1, w=1):
    """d and d_dual of a double graph, rows ordered like the whites of K.

    Entry convention: +transport(vertex -> edge space) at the oriented head,
    minus at the tail, so the stacked adjoints reproduce the Kasteleyn
    matrix and d* d is the connection Laplacian.
    """
    if orientation is None:
        orientation = default_orientation(db)
    torus = isinstance(db, DoubleGraph)
    if torus:
        host_edges = db.host.edges
        pverts = list(db.host.vertex_ids)
        dverts = list(db.dual.vertex_ids)
    else:
        host_edges = db.wired.edges
        pverts = list(db.wired.interior)
        dverts = [c for c in db.wired.classes if c != db.wired.root_class]
    pi = {v: i for i, v in enumerate(pverts)}
    di = {v: i for i, v in enumerate(dverts)}
    exact = _weights_exact(db) and isinstance(z, (int, Fraction)) and \
        isinstance(w, (int, Fraction))
    zero = Fraction(0) if exact else 0.0
    d = [[zero] * len(pverts) for _ in host_edges]
    dd = [[zero] * len(dverts) for _ in host_edges]

    def phi_into_edge(kind, host_eidx):
        # transport from the black endpoint into the white, z^ez w^-ew
        didx = db.side[host_eidx][kind] if kind in db.side[host_eidx] else None
        if didx is None:
            return None
        if not torus or paths is None:
            return _one(z)
        q = db.g.edges[didx]
        ez, ew = paths.edge_exps(db.g, q)
        return (z ** ez) * (w ** (-ew))

    for e in host_edges:
        flip = orientation.flipped(_orientation_key(db, e.idx))
        # primal block
        tkind, hkind = (KIND_PT, KIND_PH) if not flip else (KIND_PH, KIND_PT)
        tv = e.tail if not flip else e.head
        hv = e.head if not flip else e.tail
        pt = phi_into_edge(tkind, e.idx)
        ph = phi_into_edge(hkind, e.idx)
        if ph is not None and hv in pi:
            d[e.idx][pi[hv]] += ph
        if pt is not None and tv in pi:
            d[e.idx][pi[tv]] -= pt
        # dual block: oriented from left of the oriented edge to its right
        if torus:
            fl = db.dual.edges[e.idx].tail
            fr = db.dual.edges[e.idx].head
        else:
            patch = db.wired.patch
            pe = patch.edges[e.patch_eidx]
            fl = db.wired.face_class[patch.faceof[(pe.idx, 0)][0]]
            fr = db.wired.face_class[patch.faceof[(pe.idx, 1)][0]]
        lkind, rkind = (KIND_DL, KIND_DR) if not flip else (KIND_DR, KIND_DL)
        lv, rv = (fl, fr) if not flip else (fr, fl)
        pl = phi_into_edge(lkind, e.idx)
        pr = phi_into_edge(rkind, e.idx)
        if pr is not None and rv in di:
            dd[e.idx][di[rv]] += pr
        if pl is not None and lv in di:
            dd[e.idx][di[lv]] -= pl
    return pverts, dverts, d, dd


def verify_block_identity(db, orientation=None, paths=None, z=1, w=1):
    """Check K M = [[L, *], [0, L_dual]] and the inverse identity.

    Works for torus doubles (markers at z, w) and wired doubles (trivial
    connection).  Returns a JSON-ready report; raises nothing on expected
    singularities (torus at z = w = 1) but flags them.
    """
    if orientation is None:
        orientation = orient(db)
    torus = isinstance(db, DoubleGraph)
    if torus and paths is None:
        paths = choose_dual_paths(db.host, db.dual)
    blacks, whites, K = kasteleyn_matrix(db, orientation, paths, z, w)
    pverts, dverts, d, dd = incidence_ops(db, orientation, paths, z, w)
    exact = _weights_exact(db) and isinstance(z, (int, Fraction)) and \
        isinstance(w, (int, Fraction))
    nb = len(blacks)
    npv, ndv = len(pverts), len(dverts)
    M = [[d[r][c] for c in range(npv)] + [dd[r][c] for c in range(ndv)]
         for r in range(len(whites))]
    KM = matmul(K, M) if exact else _np_mat(K) @ _np_mat(M)
    conn = Connection(paths, z, w) if torus else Connection()
    if torus:
        _, lap = laplacian_matrix(db.host, conn)
        _, lap_dual = laplacian_matrix(db.dual, conn)
    else:
        _, lap = laplacian_matrix(db.wired, conn)
        lap_dual = _wired_dual_laplacian(db.wired)
    report = {"zero_block_max": 0, "primal_block_max": 0, "dual_block_max": 0,
              "passed": True}

    def get(MM, r, c):
        return MM[r][c] if exact else MM[r, c]

    def track(key, val):
        mag = abs(val) if not isinstance(val, complex) else abs(val)
        report[key] = max(report[key], float(mag))
        if mag > (0 if exact else 1e-9):
            report["passed"] = False

    for r in range(npv):
        for c in range(npv):
            track("primal_block_max", get(KM, r, c) - lap[r][c])
    for r in range(ndv):
        for c in range(npv):
            track("zero_block_max", get(KM, npv + r, c))
    for r in range(ndv):
        for c in range(ndv):
            track("dual_block_max", get(KM, npv + r, npv + c) - lap_dual[r][c])

    detK = det_exact(K) if exact else det_float(K)
    report["det_K"] = str(detK)
    report["singular"] = (detK == 0) if exact else abs(detK) < 1e-9
    report["singular_expected"] = bool(torus and z == 1 and w == 1)
    if not report["singular"]:
        if exact:
            Kinv = inv_exact(K)
            KV = [[Kinv[r][blacks.index(("v", v))] for v in pverts]
                  for r in range(len(whites))]
            resid = matmul(KV, lap)
            worst = 0
            for r in range(len(whites)):
                for c in range(npv):
                    worst = max(worst, abs(resid[r][c] - d[r][c]))
            report["inverse_identity_max"] = float(worst)
            if worst != 0:
                report["passed"] = False
        else:
            Kinv = np.linalg.inv(_np_mat(K))
            cols = [blacks.index(("v", v)) for v in pverts]
            KV = Kinv[:, cols]
            resid = KV @ _np_mat(lap) - _np_mat(d)
            worst = float(np.max(np.abs(resid)))
            report["inverse_identity_max"] = worst
            if worst > 1e-8:
                report["passed"] = False
    return report


def _wired_dual_laplacian(w: WiredGraph):
    """Laplacian of the dual classes with the root class removed, weights 1."""
    dverts = [c for c in w.classes if c != w.root_class]
    di = {v: i for i, v in enumerate(dverts)}
    exact = isinstance(w.edges[0].w_fwd, (int, Fraction))
    one = Fraction(1) if exact else 1.0
    rows = [[one * 0] * len(dverts) for _ in dverts]
    patch = w.patch
    for e in w.edges:
        pe = patch.edges[e.patch_eidx]
        fl = w.face_class[patch.faceof[(pe.idx, 0)][0]]
        fr = w.face_class[patch.faceof[(pe.idx, 1)][0]]
        for (a, b) in ((fl, fr), (fr, fl)):
            if a in di:
                rows[di[a]][di[a]] += one
                if b in di:
                    rows[di[a]][di[b]] -= one
    return rows


def _np_mat(rows):
    return np.array([[complex(x) for x in r] for r in rows])


# ---------------------------------------------------------------------------
# identity checks against enumeration


def verify_forman(t: TorusGraph, paths=None, z=Fraction(2), w=Fraction(3), cap=10 ** 7):
    """det of the connection Laplacian against the cycle-weighted forest sum."""
    if paths is None:
        paths = choose_dual_paths(t)
    conn = Connection(paths, z, w)
    _, lap = laplacian_matrix(t, conn)
    exact = all(isinstance(e.w_fwd, (int, Fraction)) for e in t.edges) and \
        isinstance(z, (int, Fraction))
    lhs = det_exact(lap) if exact else det_float(lap)
    rhs = Fraction(0) if exact else 0.0
    for forest in enumerate_ocrsf(t, cap):
        term = forest_weight(t, forest)
        for (cyc, _cls) in forest_cycles(t, forest):
            term = term * (1 - cycle_monodromy(t, conn, cyc, reverse=True))
        rhs = rhs + term
    ok = (lhs == rhs) if exact else abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))
    return {"passed": bool(ok), "lhs": str(lhs), "rhs": str(rhs),
            "z": str(z), "w": str(w)}


def laplacian_char_poly(t: TorusGraph, paths=None, exact=None) -> LaurentPoly:
    """det of the connection Laplacian as a Laurent polynomial in (z, w)."""
    if paths is None:
        paths = choose_dual_paths(t)
    if exact is None:
        exact = all(isinstance(e.w_fwd, (int, Fraction)) for e in t.edges)
    incident = {v: [] for v in t.vertex_ids}
    for e in t.edges:
        ez, ew = paths.edge_exps(t, e)
        incident[e.tail].append((abs(ez), abs(ew)))
        incident[e.head].append((abs(ez), abs(ew)))
    dx = sum(max((p[0] for p in incident[v]), default=0) for v in t.vertex_ids)
    dy = sum(max((p[1] for p in incident[v]), default=0) for v in t.vertex_ids)

    def evaluate(zz, ww):
        _, lap = laplacian_matrix(t, Connection(paths, zz, ww))
        return det_exact(lap) if exact else det_float(lap)

    return laurent_from_evals(evaluate, max(dx, 1), max(dy, 1), exact)


def verify_prop31(t: TorusGraph, dual=None, db=None, paths=None, cap=10 ** 7,
                  sample_points=((Fraction(2), Fraction(3)), (Fraction(1, 2), Fraction(5)))):
    """Characteristic polynomial of the double vs the Laplacian determinant.

    Also checks the grouped cycle-class form of the forest sum and the
    per-configuration sign identity.
    """
    from .height import height_change, homology_data
    if dual is None:
        dual = build_dual(t)
    if db is None:
        db = build_double(t, dual)
    if paths is None:
        paths = choose_dual_paths(t, dual)
    cp = char_poly(db, paths=paths, cap=cap)
    lap_poly = laplacian_char_poly(t, paths)
    gauge = find_monomial_gauge(cp.poly, lap_poly,
                                None if cp.poly.is_exact() and lap_poly.is_exact() else 1e-7)
    report = {"gauge": None, "passed": False, "grouped_ok": False, "sign_ok": False}
    if gauge is not None:
        report["gauge"] = [str(gauge[0]), gauge[1], gauge[2]]
        report["passed"] = True
    # grouped form at sample points
    grouped_ok = True
    for (zz, ww) in sample_points:
        conn = Connection(paths, zz, ww)
        _, lap = laplacian_matrix(t, conn)
        lhs = det_exact(lap)
        rhs = Fraction(0)
        for forest in enumerate_ocrsf(t, cap):
            term = forest_weight(t, forest)
            cycles = forest_cycles(t, forest)
            k = len(cycles)
            base = None
            k1 = 0
            for (_, cls) in cycles:
                norm = cls if (cls[0] > 0 or (cls[0] == 0 and cls[1] > 0)) else \
                    (-cls[0], -cls[1])
                base = norm if base is None else base
                if cls == base:
                    k1 += 1
            m, n = base
            term = term * (1 - zz ** (-n) * ww ** m) ** k1 \
                * (1 - zz ** n * ww ** (-m)) ** (k - k1)
            rhs += term
        if lhs != rhs:
            grouped_ok = False
    report["grouped_ok"] = grouped_ok
    # sign identity per configuration
    sign_ok = True
    for pair in enumerate_ocrsf_pairs(t, dual, cap):
        m = forest_to_dimer(db, pair)
        hx, hy = height_change(db, m)
        hd = homology_data(t, dual, pair)
        a = hd.k - hd.k1 - hd.k2
        if (-1) ** (hx * hy + hx + hy) != (-1) ** a:
            sign_ok = False
            break
    report["sign_ok"] = sign_ok
    report["passed"] = report["passed"] and grouped_ok and sign_ok
    return report


# ---------------------------------------------------------------------------
# determinantal edge kernels


def _wired_K(w: WiredGraph, orientation=None):
    wd = w.double
    if orientation is None:
        orientation = orient(wd)
    blacks, whites, K = kasteleyn_matrix(wd, orientation)
    return wd, orientation, blacks, whites, K


def edge_kernel_probability(source, edges, directed=True, orientation=None):
    """Probability that the given edges belong to the random forest or tree.

    source is a WiredGraph (tree measure) or a torus DoubleGraph (forest
    measure via the calibrated parity combination).  Directed edges are
    (edge idx, dir) pairs; dir 0 means along the stored edge.  Pairs sharing
    an undirected edge or a starting vertex have probability 0.
    """
    if isinstance(source, WiredGraph):
        return _wired_edge_probability(source, edges, directed, orientation)
    return _torus_edge_probability(source, edges, directed, orientation)


def _wired_edge_probability(w: WiredGraph, edges, directed, orientation):
    wd, orientation, blacks, whites, K = _wired_K(w, orientation)
    bi = {b: i for i, b in enumerate(blacks)}
    wi = {wv: i for i, wv in enumerate(whites)}
    exact = _weights_exact(wd)
    Kinv = inv_exact(K) if exact else np.linalg.inv(_np_mat(K))

    def kentry(r, c):
        return K[r][c]

    def kinv(r, c):
        return Kinv[r][c] if exact else Kinv[r, c]

    if directed:
        starts, undirected = [], set()
        for (eidx, dr) in edges:
            e = w.edges[eidx]
            v = e.tail if dr == 0 else e.head
            if v == "r":
                raise GraphSpecError("directed edge must start at an interior vertex")
            if eidx in undirected or v in starts:
                return Fraction(0) if exact else 0.0
            undirected.add(eidx)
            starts.append(v)
        rows = []
        for a, (ei, dri) in enumerate(edges):
            row = []
            for b, (ej, drj) in enumerate(edges):
                row.append(kinv(wi[("w", ei)], bi[("v", starts[b])]))
            rows.append(row)
        det = det_exact(rows) if exact else det_float(rows)
        prob = det
        for a, (ei, dri) in enumerate(edges):
            prob = prob * kentry(bi[("v", starts[a])], wi[("w", ei)])
        return prob
    # undirected variant: two-term kernel entries
    if len(set(edges)) != len(edges):
        return Fraction(0) if exact else 0.0
    kern = []
    for ei in edges:
        row = []
        for ej in edges:
            entry = Fraction(0) if exact else 0.0
            e = w.edges[ej]
            for dr in (0, 1):
                v = e.tail if dr == 0 else e.head
                if v == "r":
                    continue
                entry += kentry(bi[("v", v)], wi[("w", ej)]) * \
                    kinv(wi[("w", ei)], bi[("v", v)])
            row.append(entry)
        kern.append(row)
    return det_exact(kern) if exact else det_float(kern)


def _pinned_parity_sum(db, pin_didx, orientation, paths):
    """Signed parity combination of determinants pinned on specific edges.

    pin_didx are bw-edge indices forced into the matching; pinning replaces
    the full (black, white) entry by that single edge's contribution, which
    matters on multigraph quotients where parallel edges share an entry.
    """
    from .kasteleyn import calibrate_partition_signs, edge_is_bw, _exps
    exact = _weights_exact(db)
    base = getattr(db.host, "base", None)
    pattern = None
    if base is not None:
        pattern = base._cache.get("partition_signs")
    if pattern is None:
        pattern = calibrate_partition_signs(db, orientation, paths)
        if base is not None:
            base._cache["partition_signs"] = pattern
    g, signs = pattern
    total = Fraction(0) if exact else 0.0
    blacks, whites, _ = kasteleyn_matrix(db, orientation, paths, 1, 1)
    bi = {b: i for i, b in enumerate(blacks)}
    wi = {wv: i for i, wv in enumerate(whites)}
    idx = 0
    for theta in (0, 1):
        for tau in (0, 1):
            zz = Fraction(1 if theta == 0 else -1) if exact else (1 if theta == 0 else -1)
            ww = Fraction(1 if tau == 0 else -1) if exact else (1 if tau == 0 else -1)
            _, _, K = kasteleyn_matrix(db, orientation, paths, zz, ww)
            pins = []
            for didx in pin_didx:
                de = db.bw_edges[didx]
                ez, ew = _exps(db, de, paths)
                sgn = -1 if edge_is_bw(db, de, orientation) else 1
                entry = sgn * de.weight * (zz ** (-ez)) * (ww ** ew)
                pins.append((bi[de.black], wi[de.white], entry))
            val = _pinned_det(K, pins, exact)
            total += g * signs[idx] * val / 2
            idx += 1
    return total


def _pinned_det(rows, pins, exact):
    """Determinant restricted to permutations through given entries.

    pins are (row, col, entry value) with the value substituted for the
    matrix entry (a single parallel edge rather than their sum).
    """
    n = len(rows)
    live_r = list(range(n))
    live_c = list(range(n))
    sign = 1
    factor = Fraction(1) if exact else 1.0
    for (ri, ci, entry) in pins:
        r = live_r.index(ri)
        c = live_c.index(ci)
        factor = factor * entry
        sign *= (-1) ** (r + c)
        live_r.pop(r)
        live_c.pop(c)
    sub = [[rows[r][c] for c in live_c] for r in live_r]
    det = det_exact(sub) if exact else det_float(sub)
    return sign * factor * det


def _torus_edge_probability(db: DoubleGraph, edges, directed, orientation):
    if not directed:
        raise GraphSpecError("undirected torus kernel not implemented; use directed edges")
    if orientation is None:
        orientation = orient(db)
    paths = choose_dual_paths(db.host, db.dual)
    exact = _weights_exact(db)
    pin_didx = []
    starts, undirected = set(), set()
    for (eidx, dr) in edges:
        e = db.host.edges[eidx]
        v = e.tail if dr == 0 else e.head
        if eidx in undirected or v in starts:
            return Fraction(0) if exact else 0.0
        undirected.add(eidx)
        starts.add(v)
        pin_didx.append(db.side[eidx][KIND_PT if dr == 0 else KIND_PH])
    num = _pinned_parity_sum(db, pin_didx, orientation, paths)
    Z = sum(m.weight for m in enumerate_dimers(db))
    return num / Z


# ---------------------------------------------------------------------------
# Green matrices for wired pieces


def green_matrix(w: WiredGraph, orientation=None, exact=None):
    """(edge order, vertex order, B) with B = d Lap^-1 D, exact when weights are.

    Row e, column v: expected visits to v of the killed walk started at the
    oriented head of e minus the one started at its tail.  Also equal to
    (K^-1)^V D, which `green_identity_report` checks.
    """
    order, lap = laplacian_matrix(w)
    if exact is None:
        exact = isinstance(w.edges[0].w_fwd, (int, Fraction))
    oi = {v: i for i, v in enumerate(order)}
    if orientation is None:
        orientation = orient(w.double)
    nD = [[Fraction(0) if exact else 0.0] * len(order) for _ in order]
    for i, v in enumerate(order):
        total = sum(wt for (_, _, wt) in w.out_edges(v))
        nD[i][i] = total
    d = []
    for e in w.edges:
        flip = orientation.flipped(e.idx)
        tv, hv = (e.tail, e.head) if not flip else (e.head, e.tail)
        row = [Fraction(0) if exact else 0.0] * len(order)
        if hv != "r":
            row[oi[hv]] += 1
        if tv != "r":
            row[oi[tv]] -= 1
        d.append(row)
    if exact:
        lap_inv = inv_exact(lap)
        B = matmul(matmul(d, lap_inv), nD)
    else:
        B = (_np_mat(d) @ np.linalg.inv(_np_mat(lap)) @ _np_mat(nD)).real.tolist()
    return [e.idx for e in w.edges], order, B


def green_identity_report(w: WiredGraph):
    """Exact check that B equals the primal block of K^-1 scaled by D."""
    orientation = orient(w.double)
    eorder, vorder, B = green_matrix(w, orientation)
    wd = w.double
    blacks, whites, K = kasteleyn_matrix(wd, orientation)
    exact = _weights_exact(wd)
    if not exact:
        raise GraphSpecError("green identity check expects exact weights")
    Kinv = inv_exact(K)
    bi = {b: i for i, b in enumerate(blacks)}
    wi = {wv: i for i, wv in enumerate(whites)}
    oi = {v: i for i, v in enumerate(vorder)}
    worst = Fraction(0)
    for eidx in eorder:
        for v in vorder:
            total = sum(wt for (_, _, wt) in w.out_edges(v))
            lhs = B[eidx][oi[v]]
            rhs = Kinv[wi[("w", eidx)]][bi[("v", v)]] * total
            worst = max(worst, abs(lhs - rhs))
    return {"passed": worst == 0, "max_residual": str(worst)}


def killed_walk_visits(w: WiredGraph, start, targets, n_walks, seed, max_steps=10 ** 6):
    """Monte-Carlo visit counts of the killed walk; returns per-target arrays."""
    if start == "r":
        return {v: np.zeros(n_walks) for v in targets}
    order = {v: i for i, v in enumerate(sorted(targets))}
    outs = {}
    for v in w.interior:
        lst = w.out_edges(v)
        weights = np.array([float(wt) for (_, _, wt) in lst])
        cum = np.cumsum(weights / weights.sum())
        outs[v] = (lst, cum)
    counts = {v: np.zeros(n_walks) for v in targets}
    rng = np.random.Generator(np.random.Philox(key=(seed & (2 ** 63 - 1), 0)))
    for k in range(n_walks):
        v = start
        steps = 0
        while v != "r":
            if v in counts:
                counts[v][k] += 1
            lst, cum = outs[v]
            u = rng.random()
            j = int(np.searchsorted(cum, u, side="right"))
            j = min(j, len(lst) - 1)
            v = lst[j][1]
            steps += 1
            if steps > max_steps:
                raise RuntimeError("killed walk exceeded the step budget")
    return counts


def green_monte_carlo_report(w: WiredGraph, n_walks=10 ** 5, seed=12345, n_entries=6):
    """Compare a few B entries against killed-walk visit differences."""
    orientation = orient(w.double)
    eorder, vorder, B = green_matrix(w, orientation)
    oi = {v: i for i, v in enumerate(vorder)}
    checks = []
    picked = []
    for eidx in eorder:
        e = w.edges[eidx]
        flip = orientation.flipped(e.idx)
        tv, hv = (e.tail, e.head) if not flip else (e.head, e.tail)
        for v in vorder:
            picked.append((eidx, tv, hv, v))
    step = max(1, len(picked) // n_entries)
    picked = picked[::step][:n_entries]
    passed = True
    for (eidx, tv, hv, v) in picked:
        c_h = killed_walk_visits(w, hv, [v], n_walks, seed + 2 * eidx)[v]
        c_t = killed_walk_visits(w, tv, [v], n_walks, seed + 2 * eidx + 1)[v]
        diff = c_h - c_t
        mean = float(np.mean(diff))
        se = float(np.std(diff, ddof=1) / math.sqrt(n_walks))
        want = float(B[eidx][oi[v]])
        ok = abs(mean - want) <= 3 * max(se, 1e-12)
        passed = passed and ok
        checks.append({"edge": eidx, "vertex": str(v), "exact": want,
                       "mc": mean, "se": se, "passed": ok})
    return {"passed": passed, "checks": checks, "n_walks": n_walks, "seed": seed}


def star_condition_probe(g, sizes=(8, 12, 16), radius=8):
    """Decay and convergence table for the Green matrix entries.

    Emits (N, distance, max_abs_entry) rows plus a verdict: the largest-N
    entries at distance 2r must fall below half of those at distance r
    (r = radius // 2), and successive common-window differences must shrink.
    """
    rows = []
    mats = {}
    for N in sizes:
        w = build_wired(g, N)
        eorder, vorder, B = green_matrix(w, orient(w.double), exact=False)
        vi = {v: i for i, v in enumerate(vorder)}
        bins = {}
        entries = {}
        center = (N / 2.0, N / 2.0)
        for eidx in eorder:
            e = w.edges[eidx]
            pe = w.patch.edges[e.patch_eidx]
            mid = (w.patch.pos[pe.tail][0] + pe.vec[0] / 2,
                   w.patch.pos[pe.tail][1] + pe.vec[1] / 2)
            central = math.hypot(mid[0] - center[0], mid[1] - center[1]) <= 1.5
            base_eid = pe.base
            tcoord = pe.tail
            for v in vorder:
                pv = w.patch.pos[v]
                val = float(B[eidx][vi[v]])
                if central:
                    # decay is probed from a bulk edge outward, away from the
                    # wired boundary's own influence
                    b = int(round(math.hypot(mid[0] - pv[0], mid[1] - pv[1])))
                    if 1 <= b <= radius:
                        bins[b] = max(bins.get(b, 0.0), abs(val))
                key = ((base_eid, tcoord[1] - N // 2, tcoord[2] - N // 2),
                       (v[0], v[1] - N // 2, v[2] - N // 2))
                entries[key] = val
        mats[N] = entries
        for b in sorted(bins):
            rows.append({"N": N, "distance": b, "max_abs_entry": bins[b]})
    r = max(1, radius // 2)
    big = sizes[-1]
    near = max((row["max_abs_entry"] for row in rows
                if row["N"] == big and row["distance"] == r), default=None)
    far = max((row["max_abs_entry"] for row in rows
               if row["N"] == big and row["distance"] == 2 * r), default=None)
    decay_ok = near is not None and far is not None and far < near / 2
    conv_ok = True
    if len(sizes) >= 3:
        # fixed central window, clear of the smallest patch's boundary
        half = min(sizes) // 2 - 2
        window = None
        for N in sizes:
            keys = {k for k in mats[N]
                    if max(abs(k[0][1]), abs(k[0][2]), abs(k[1][1]), abs(k[1][2])) <= half}
            window = keys if window is None else (window & keys)
        gaps = []
        for a, b in zip(sizes, sizes[1:]):
            gaps.append(max(abs(mats[a][k] - mats[b][k]) for k in window))
        conv_ok = all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))
        rows.append({"N": -1, "distance": -1,
                     "max_abs_entry": gaps[-1], "note": "last central-window gap"})
    verdict = "pass" if (decay_ok and conv_ok) else "fail"
    return {"rows": rows, "verdict": verdict, "decay_ok": decay_ok,
            "convergence_ok": conv_ok, "near": near, "far": far}
