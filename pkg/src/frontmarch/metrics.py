"""Error norms, front reconstruction, Hausdorff distance and order fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from .frames import FrameError, frame_from_normal


def point_error(points, field) -> np.ndarray:
    """|phi| at each spacetime point; a distance only for signed-distance fields."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return np.abs(field.phi(p[:, 0], p[:, 1], p[:, 2]))


def valid_mask(points, field) -> np.ndarray:
    """Points whose time lies inside the exact solution's validity window."""
    t = np.atleast_2d(np.asarray(points, dtype=float))[:, 2]
    return t <= field.t_valid + 1e-12


def norms(errors, h: float, dim: int = 2):
    """(L1, L2, Linf) with the h^dim quadrature weight."""
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0:
        raise ValueError("no errors to summarize")
    w = h ** dim
    return float(w * e.sum()), float(np.sqrt(w * np.sum(e * e))), float(e.max())


def fit_order(h, values, with_intercept: bool = False):
    """Least-squares slope of log(values) against log(h)."""
    h = np.asarray(h, dtype=float)
    v = np.asarray(values, dtype=float)
    if h.size < 3 or h.size != v.size:
        raise ValueError("need at least 3 (h, value) pairs")
    if np.any(v <= 0) or np.any(h <= 0):
        raise ValueError("h and values must be positive")
    slope, intercept = np.polyfit(np.log(h), np.log(v), 1)
    return (float(slope), float(intercept)) if with_intercept else float(slope)


# reconstruction ---------------------------------------------------------------

def _tangent_basis(normal):
    try:
        fr = frame_from_normal(normal)
        return fr.u, fr.v
    except FrameError:
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])


def local_triangles(points, normals, h: float, L: int = 10, max_edge: float = 4.0) -> np.ndarray:
    """Triangles from local Delaunay triangulations in each point's tangent plane.

    For every point, its L nearest neighbours are projected on the tangent
    plane of its normal and triangulated; only triangles incident to the
    point with all edges below ``max_edge * h`` are kept. Duplicates are
    merged by vertex triple.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if n < 3:
        return np.empty((0, 3), dtype=int)
    k = min(L + 1, n)
    _, nbr = cKDTree(points).query(points, k=k)
    tris = set()
    limit = max_edge * h
    for i in range(n):
        ids = nbr[i]
        e1, e2 = _tangent_basis(normals[i])
        rel = points[ids] - points[i]
        uv = np.column_stack([rel @ e1, rel @ e2])
        try:
            tri = Delaunay(uv)
        except QhullError:
            continue
        for s in tri.simplices:
            if 0 not in s:
                continue
            v = ids[s]
            pv = points[v]
            edges = np.linalg.norm(pv - np.roll(pv, 1, axis=0), axis=1)
            if edges.max() <= limit:
                tris.add(tuple(sorted(int(x) for x in v)))
    return np.array(sorted(tris), dtype=int).reshape(-1, 3)


@dataclass
class Slice:
    """Cross-section of the triangulated graph at one time."""
    t: float
    points: np.ndarray        # (P, 2) crossing points
    segments: np.ndarray      # (S, 2) indices into points

    def components(self, link: float = 0.0, min_size: int = 1) -> int:
        """Connected components; points closer than ``link`` count as joined."""
        parent = list(range(len(self.points)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        pairs = [tuple(s) for s in self.segments]
        if link > 0 and len(self.points):
            pairs += list(cKDTree(self.points).query_pairs(link))
        for a, b in pairs:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = [find(i) for i in range(len(self.points))]
        if not roots:
            return 0
        _, counts = np.unique(roots, return_counts=True)
        return int(np.count_nonzero(counts >= min_size))


def slice_triangles(points, triangles, t_star: float) -> Slice:
    """Intersect a triangle set with the plane t = t_star by linear interpolation."""
    points = np.asarray(points, dtype=float)
    t = points[:, 2]
    below = t <= t_star
    keys: dict = {}
    coords = []
    segs = set()

    def crossing(j, k):
        if below[k] and not below[j]:
            j, k = k, j
        # j is below, k above
        if t[j] == t_star:
            key = ("v", j)
            xy = points[j, :2]
        else:
            key = ("e", min(j, k), max(j, k))
            lam = (t_star - t[j]) / (t[k] - t[j])
            xy = points[j, :2] + lam * (points[k, :2] - points[j, :2])
        if key not in keys:
            keys[key] = len(coords)
            coords.append(xy)
        return keys[key]

    for tri in triangles:
        b = below[tri]
        if b.all() or not b.any():
            continue
        hits = []
        for j, k in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            if below[j] != below[k]:
                hits.append(crossing(j, k))
        if len(hits) == 2 and hits[0] != hits[1]:
            segs.add((min(hits), max(hits)))
    pts = np.array(coords, dtype=float).reshape(-1, 2)
    return Slice(t_star, pts, np.array(sorted(segs), dtype=int).reshape(-1, 2))


def reconstruct_front(graph, t_star: float, L: int = 10, method: str = "band",
                      triangles=None) -> Slice:
    """Front at time ``t_star`` recovered by slicing a spacetime triangulation.

    ``method="band"`` slices the triangles swept by the band during the
    march (they follow the band topology exactly, including merges);
    ``method="delaunay"`` slices local Delaunay triangulations of the
    accepted points built in each point's tangent plane.
    """
    t = graph.points[:, 2]
    if t_star < t.min() or t_star > t.max():
        raise ValueError(f"t = {t_star} is outside the run's range [{t.min()}, {t.max()}]")
    if method == "band":
        if graph.swept is None:
            raise ValueError("graph carries no swept triangles")
        pts = graph.all_points
        tris = graph.swept if triangles is None else triangles
    elif method == "delaunay":
        pts = graph.points
        tris = local_triangles(pts, graph.normals, graph.h, L) if triangles is None else triangles
    else:
        raise ValueError(f"unknown reconstruction method {method!r}")
    return slice_triangles(pts, tris, t_star)


def count_components(graph, t_star: float, link_factor: float = 0.0, method: str = "band",
                     triangles=None) -> int:
    """Number of front components at ``t_star``; points within link_factor*h are joined."""
    sl = reconstruct_front(graph, t_star, method=method, triangles=triangles)
    return sl.components(link=link_factor * graph.h)


# Hausdorff distance -------------------------------------------------------------

def point_segment_distance(q, a, b) -> np.ndarray:
    ab = b - a
    den = np.einsum("ij,ij->i", ab, ab)
    lam = np.where(den > 0, np.einsum("ij,ij->i", q - a, ab) / np.where(den > 0, den, 1.0), 0.0)
    lam = np.clip(lam, 0.0, 1.0)
    foot = a + lam[:, None] * ab
    return np.linalg.norm(q - foot, axis=1)


def distance_to_polyline(queries, points, segments, k: int = 8) -> np.ndarray:
    """Distance from each query to the nearest segment (or isolated point)."""
    queries = np.atleast_2d(queries)
    if len(segments) == 0:
        return cKDTree(points).query(queries)[0]
    a = points[segments[:, 0]]
    b = points[segments[:, 1]]
    mid = 0.5 * (a + b)
    k = min(k, len(segments))
    _, idx = cKDTree(mid).query(queries, k=k)
    idx = np.atleast_2d(idx).reshape(len(queries), k)
    best = np.full(len(queries), np.inf)
    for c in range(k):
        s = idx[:, c]
        best = np.minimum(best, point_segment_distance(queries, a[s], b[s]))
    # a segment-free point cloud fallback keeps isolated points in play
    best = np.minimum(best, cKDTree(points).query(queries)[0])
    return best


def hausdorff_clouds(A, B) -> float:
    """Symmetric Hausdorff distance between two finite point sets."""
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    return float(max(cKDTree(B).query(A)[0].max(), cKDTree(A).query(B)[0].max()))


def hausdorff(graph, field, t_H: float, m_exact: int | None = None, slice_=None) -> float:
    """Hausdorff distance between the reconstructed and exact fronts at t_H."""
    rec = slice_ if slice_ is not None else reconstruct_front(graph, t_H)
    if len(rec.points) == 0:
        raise ValueError(f"nothing reconstructed at t = {t_H}")
    m_exact = max(10 * graph.m, 4000) if m_exact is None else m_exact
    exact = field.contour(t_H, m_exact)
    if getattr(field, "signed_distance", True):
        d_rec = np.abs(field.phi(rec.points[:, 0], rec.points[:, 1], t_H))
    else:
        d_rec = cKDTree(exact).query(rec.points)[0]
    d_ex = distance_to_polyline(exact, rec.points, rec.segments)
    return float(max(d_rec.max(), d_ex.max()))


# reports -------------------------------------------------------------------------

@dataclass
class ErrorReport:
    h: float
    n_points: int
    L1: float
    L2: float
    Linf: float
    L_H: float | None = None
    t_H: float | None = None


def error_report(graph, field, t_H: float | None = None) -> ErrorReport:
    """Norms over the points inside the validity window, plus L_H at t_H."""
    e = point_error(graph.points[valid_mask(graph.points, field)], field)
    L1, L2, Linf = norms(e, graph.h)
    LH = hausdorff(graph, field, t_H) if t_H is not None else None
    return ErrorReport(graph.h, len(graph), L1, L2, Linf, LH, t_H)


def child_parent_distances(graph) -> np.ndarray:
    """(K, 2) spacetime distances, in units of h, from each child to parents a and b."""
    kids = graph.children
    par = graph.parents[kids]
    d = np.linalg.norm(graph.points[kids][:, None, :] - graph.points[par], axis=2)
    return d / graph.h


def evenness_histogram(graph, binwidth: float = 0.2):
    """Histograms of child-to-parent distances (units of h) per parent slot."""
    d = child_parent_distances(graph)
    top = max(float(d.max()) if d.size else 1.0, 1.0)
    edges = np.arange(0.0, top + binwidth + 1e-12, binwidth)
    counts_a, _ = np.histogram(d[:, 0], bins=edges)
    counts_b, _ = np.histogram(d[:, 1], bins=edges)
    return {"edges": edges, "parent_a": counts_a, "parent_b": counts_b}
