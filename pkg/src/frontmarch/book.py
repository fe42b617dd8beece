"""Topology of the narrow band: undirected segments joining band points.

The band is kept as a disjoint union of simple closed polylines in the xy
projection. Violations are repaired locally: extra segments are trimmed,
duplicate segments and degenerate cycles removed, crossing pairs
reconnected, and sharp spikes cut off. Hanging nodes (degree one) are
always stitched to their nearest hanging partner.

Operations mutate the Book in place and return the ids of band points
they removed.
"""
from __future__ import annotations

import math
from collections import Counter

import numpy as np

SPIKE_ANGLE = 0.2 * math.pi
COLLINEAR_TOL = 1e-14


class TopologyError(RuntimeError):
    pass


class Book:
    def __init__(self):
        self.adj: dict[int, list[int]] = {}
        self.touched: set[int] = set()
        # spacetime triangles swept by relabelling and dropping, if recorded
        self.swept: list[tuple[int, int, int]] | None = None

    def __contains__(self, node) -> bool:
        return node in self.adj

    def __len__(self) -> int:
        return len(self.adj)

    @property
    def nodes(self):
        return self.adj.keys()

    def add_node(self, node: int) -> None:
        if node in self.adj:
            raise KeyError(f"node {node} already in the book")
        self.adj[node] = []
        self.touched.add(node)

    def degree(self, node: int) -> int:
        return len(self.adj[node])

    def neighbors(self, node: int) -> list[int]:
        return list(self.adj[node])

    def add_segment(self, a: int, b: int) -> None:
        self.adj[a].append(b)
        self.adj[b].append(a)
        self.touched.update((a, b))

    def remove_segment(self, a: int, b: int) -> None:
        self.adj[a].remove(b)
        self.adj[b].remove(a)
        self.touched.update((a, b))

    def remove_node(self, node: int) -> list[int]:
        """Delete a node and its segments; returns its former neighbours."""
        nbrs = [n for n in self.adj.pop(node) if n != node]
        for n in nbrs:
            self.adj[n].remove(node)
        self.touched.update(nbrs)
        self.touched.discard(node)
        return nbrs

    def segments(self) -> list[tuple[int, int]]:
        """Each segment once as (a, b) with a <= b, repeated per multiplicity."""
        out = []
        for a, nbrs in self.adj.items():
            for b, k in Counter(nbrs).items():
                if a < b:
                    out.extend([(a, b)] * k)
                elif a == b:
                    out.extend([(a, a)] * (k // 2))
        return out

    def cycles(self) -> list[list[int]]:
        """Node sequences of the cycles; valid only on a clean book."""
        seen, out = set(), []
        for start in sorted(self.adj):
            if start in seen:
                continue
            cyc, prev, cur = [start], None, start
            seen.add(start)
            while True:
                nxt = [n for n in self.adj[cur] if n != prev]
                if not nxt:
                    break
                prev, cur = cur, nxt[0]
                if cur == start or cur in seen:
                    break
                seen.add(cur)
                cyc.append(cur)
            out.append(cyc)
        return out

    def take_touched(self) -> set[int]:
        t = {n for n in self.touched if n in self.adj}
        self.touched = set()
        return t

    def copy(self) -> "Book":
        b = Book()
        b.adj = {k: list(v) for k, v in self.adj.items()}
        b.touched = set(self.touched)
        return b

    @classmethod
    def from_cycles(cls, cycles) -> "Book":
        book = cls()
        for cyc in cycles:
            for n in cyc:
                book.add_node(n)
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                book.add_segment(a, b)
        book.touched = set()
        return book


def _xy(positions, node):
    p = positions[node]
    return float(p[0]), float(p[1])


def _dist(positions, a, b):
    ax, ay = _xy(positions, a)
    bx, by = _xy(positions, b)
    return math.hypot(ax - bx, ay - by)


# Elementary updates --------------------------------------------------------

def replace_node(book: Book, old: int, new: int) -> list[int]:
    """Relabel ``old`` as ``new`` (a child taking its parent's band slot)."""
    if old not in book:
        raise KeyError(f"node {old} is not in the book")
    if book.degree(old) != 2:
        raise TopologyError(f"node {old} has degree {book.degree(old)}, expected 2")
    nbrs = book.remove_node(old)
    if book.swept is not None:
        book.swept.extend((n, old, new) for n in nbrs)
    book.add_node(new)
    for n in nbrs:
        book.add_segment(new, n)
    return []


def stitch_hanging_nodes(book: Book, positions, candidates=None) -> list[tuple[int, int]]:
    """Join hanging nodes pairwise, closest xy pair first."""
    pool = book.nodes if candidates is None else [n for n in candidates if n in book]
    hanging = sorted(n for n in pool if book.degree(n) == 1)
    if candidates is not None:
        # a stray hanging node elsewhere would break the pairing
        hanging = sorted(n for n in book.nodes if book.degree(n) == 1)
    if len(hanging) % 2:
        raise TopologyError(f"odd number of hanging nodes: {hanging}")
    added = []
    while hanging:
        best = None
        for i, a in enumerate(hanging):
            for b in hanging[i + 1:]:
                d = _dist(positions, a, b)
                if best is None or d < best[0]:
                    best = (d, a, b)
        _, a, b = best
        book.add_segment(a, b)
        hanging.remove(a)
        hanging.remove(b)
        added.append((a, b))
    return added


def drop_node(book: Book, node: int, positions) -> list[int]:
    """Remove a band point and stitch the gap it leaves."""
    if node not in book:
        raise KeyError(f"node {node} is not in the book")
    nbrs = book.remove_node(node)
    if book.swept is not None and len(set(nbrs)) == 2:
        book.swept.append((nbrs[0], node, nbrs[1]))
    stitch_hanging_nodes(book, positions)
    return [node]


# Constraint checks ----------------------------------------------------------

def check_multiplicity(book: Book, positions, nodes=None) -> list[int]:
    """Every band point must sit on exactly two segments."""
    removed = []
    nodes = list(book.nodes) if nodes is None else [n for n in nodes if n in book]
    for n in sorted(nodes):
        if n not in book:
            continue
        nbrs = [b for b in book.adj[n] if b != n]
        if len(nbrs) > 2:
            nbrs.sort(key=lambda b: (_dist(positions, n, b), b))
            for b in nbrs[2:]:
                book.remove_segment(n, b)
    for n in sorted(nodes):
        if n in book and book.degree(n) == 0:
            book.remove_node(n)
            removed.append(n)
    stitch_hanging_nodes(book, positions)
    return removed


def check_loops(book: Book, positions, nodes=None) -> list[int]:
    """No self-loops, no repeated segments, no cycles shorter than three."""
    removed = []
    nodes = list(book.nodes) if nodes is None else [n for n in nodes if n in book]
    changed = False
    for n in sorted(nodes):
        if n not in book:
            continue
        while n in book.adj[n]:
            book.remove_segment(n, n)
            changed = True
    for n in sorted(nodes):
        if n not in book:
            continue
        for b, k in list(Counter(book.adj[n]).items()):
            if k < 2 or b not in book:
                continue
            if book.degree(n) == k and book.degree(b) == k:
                # an isolated two-point cycle: nothing left to stitch
                book.remove_node(n)
                book.remove_node(b)
                removed.extend([n, b])
                break
            for _ in range(k - 1):
                book.remove_segment(n, b)
            changed = True
    if changed or removed:
        for n in sorted(n for n in book.nodes if book.degree(n) == 0):
            book.remove_node(n)
            removed.append(n)
        stitch_hanging_nodes(book, positions)
    return removed


def _orient(ax, ay, bx, by, cx, cy):
    """Sine of the turn a->b->c, scaled by |b-a| |c-a|; sign only is used."""
    ux, uy = bx - ax, by - ay
    vx, vy = cx - ax, cy - ay
    cross = ux * vy - uy * vx
    scale = np.hypot(ux, uy) * np.hypot(vx, vy)
    return np.where(np.abs(cross) <= COLLINEAR_TOL * scale, 0.0, np.sign(cross))


def _between(a, b, c):
    return (np.minimum(a, b) <= c) & (c <= np.maximum(a, b))


def segments_cross(p1, q1, p2, q2):
    """Vectorized xy intersection test for segments p1q1 and p2q2.

    Inputs are (..., 2) arrays. Touching and collinear overlap count;
    callers exclude pairs that share an endpoint.
    """
    p1, q1, p2, q2 = (np.asarray(a, dtype=float) for a in (p1, q1, p2, q2))
    o1 = _orient(p1[..., 0], p1[..., 1], q1[..., 0], q1[..., 1], p2[..., 0], p2[..., 1])
    o2 = _orient(p1[..., 0], p1[..., 1], q1[..., 0], q1[..., 1], q2[..., 0], q2[..., 1])
    o3 = _orient(p2[..., 0], p2[..., 1], q2[..., 0], q2[..., 1], p1[..., 0], p1[..., 1])
    o4 = _orient(p2[..., 0], p2[..., 1], q2[..., 0], q2[..., 1], q1[..., 0], q1[..., 1])
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)

    def on(p, q, r, o):
        return (o == 0) & _between(p[..., 0], q[..., 0], r[..., 0]) & _between(p[..., 1], q[..., 1], r[..., 1])

    touch = on(p1, q1, p2, o1) | on(p1, q1, q2, o2) | on(p2, q2, p1, o3) | on(p2, q2, q1, o4)
    return proper | touch


def _segment_arrays(book: Book, positions):
    segs = [s for s in book.segments() if s[0] != s[1]]
    if not segs:
        return segs, np.empty((0, 2)), np.empty((0, 2))
    idx = np.array(segs)
    P = np.array([_xy(positions, a) for a in idx[:, 0]])
    Q = np.array([_xy(positions, b) for b in idx[:, 1]])
    return segs, P, Q


def find_crossings(book: Book, positions, nodes=None) -> list[tuple]:
    """Crossing segment pairs; restricted to segments touching ``nodes`` if given."""
    segs, P, Q = _segment_arrays(book, positions)
    if not segs:
        return []
    ids = np.array(segs)
    if nodes is None:
        probe = range(len(segs))
    else:
        nodes = set(nodes)
        probe = [k for k, (a, b) in enumerate(segs) if a in nodes or b in nodes]
    out, seen = [], set()
    for k in probe:
        a, b = segs[k]
        hit = segments_cross(P[k], Q[k], P, Q)
        shared = (ids[:, 0] == a) | (ids[:, 0] == b) | (ids[:, 1] == a) | (ids[:, 1] == b)
        for j in np.flatnonzero(hit & ~shared):
            key = (min(k, j), max(k, j))
            if key not in seen:
                seen.add(key)
                out.append((segs[key[0]], segs[key[1]]))
    return out


def _count_new_crossings(book: Book, positions, new_segs) -> int:
    segs, P, Q = _segment_arrays(book, positions)
    ids = np.array(segs) if segs else np.empty((0, 2), dtype=int)
    total = 0
    for a, b in new_segs:
        pa, pb = _xy(positions, a), _xy(positions, b)
        if len(segs):
            hit = segments_cross(pa, pb, P, Q)
            shared = (ids[:, 0] == a) | (ids[:, 0] == b) | (ids[:, 1] == a) | (ids[:, 1] == b)
            total += int(np.count_nonzero(hit & ~shared))
    (a, b), (c, d) = new_segs
    if len({a, b, c, d}) == 4 and segments_cross(
            _xy(positions, a), _xy(positions, b), _xy(positions, c), _xy(positions, d)):
        total += 1
    return total


def _reconnect(book: Book, positions, s1, s2) -> None:
    """Replace a crossing pair by the better of the two other pairings."""
    (a, b), (c, d) = s1, s2
    book.remove_segment(a, b)
    book.remove_segment(c, d)
    best = None
    for option in (((a, c), (b, d)), ((a, d), (b, c))):
        crossings = _count_new_crossings(book, positions, option)
        dup = sum(y in book.adj[x] for x, y in option)
        length = sum(_dist(positions, x, y) for x, y in option)
        key = (crossings, dup, length)
        if best is None or key < best[0]:
            best = (key, option)
    for x, y in best[1]:
        book.add_segment(x, y)


def check_intersections(book: Book, positions, nodes=None, max_rounds=None) -> list[int]:
    """Reconnect crossing pairs; as a last resort drop their endpoints."""
    removed = []
    probe = None if nodes is None else set(nodes)
    limit = max_rounds if max_rounds is not None else 4 * max(len(book), 1)
    rounds = 0
    while True:
        crossings = find_crossings(book, positions, probe)
        if not crossings:
            return removed
        rounds += 1
        if rounds > limit:
            victims = sorted({n for pair in crossings for s in pair for n in s})
            for n in victims:
                if n in book:
                    book.remove_node(n)
                    removed.append(n)
            for n in sorted(n for n in book.nodes if book.degree(n) == 0):
                book.remove_node(n)
                removed.append(n)
            stitch_hanging_nodes(book, positions)
            return removed
        s1, s2 = crossings[0]
        _reconnect(book, positions, s1, s2)
        touched = {*s1, *s2}
        probe = touched if probe is None else (probe | touched)
        probe = {n for n in probe if n in book}


def spike_angle(positions, apex, a, b) -> float:
    ox, oy = _xy(positions, apex)
    ax, ay = _xy(positions, a)
    bx, by = _xy(positions, b)
    ux, uy, vx, vy = ax - ox, ay - oy, bx - ox, by - oy
    return abs(math.atan2(ux * vy - uy * vx, ux * vx + uy * vy))


def check_spikes(book: Book, positions, nodes=None, threshold=SPIKE_ANGLE) -> list[int]:
    """Remove apexes whose two segments meet at an angle below ``threshold``."""
    removed = []
    queue = sorted(book.nodes if nodes is None else [n for n in nodes if n in book])
    while queue:
        n = queue.pop(0)
        if n not in book or book.degree(n) != 2:
            continue
        a, b = book.adj[n]
        if a == b or a == n or b == n:
            continue
        if spike_angle(positions, n, a, b) < threshold:
            drop_node(book, n, positions)
            removed.append(n)
            queue.extend(x for x in (a, b) if x not in queue)
    return removed


def clean(book: Book, positions, nodes=None) -> list[int]:
    """Multiplicity, loops and intersections repeated until nothing changes."""
    removed = []
    probe = None if nodes is None else set(nodes)
    for _ in range(10 * max(len(book), 1) + 10):
        book.touched = set()
        r = check_multiplicity(book, positions, probe)
        r += check_loops(book, positions, probe)
        r += check_intersections(book, positions, probe)
        removed += r
        touched = book.take_touched()
        if not r and not touched:
            return removed
        probe = None if probe is None else {n for n in probe | touched if n in book}
    raise TopologyError("book cleaning did not reach a fixed point")


def violations(book: Book, positions, threshold=SPIKE_ANGLE) -> dict:
    """Brute-force scan of all four invariants; empty lists mean clean."""
    bad_degree = sorted(n for n in book.nodes if book.degree(n) != 2)
    segs = book.segments()
    loops = [s for s in segs if s[0] == s[1]]
    dups = sorted(s for s, k in Counter(segs).items() if k > 1)
    crossings = []
    proper = [s for s in segs if s[0] != s[1]]
    if len(proper) > 1:
        ids = np.array(proper)
        P = np.array([_xy(positions, a) for a in ids[:, 0]])
        Q = np.array([_xy(positions, b) for b in ids[:, 1]])
        hit = segments_cross(P[:, None, :], Q[:, None, :], P[None, :, :], Q[None, :, :])
        share = ((ids[:, None, 0] == ids[None, :, 0]) | (ids[:, None, 0] == ids[None, :, 1])
                 | (ids[:, None, 1] == ids[None, :, 0]) | (ids[:, None, 1] == ids[None, :, 1]))
        i, j = np.nonzero(np.triu(hit & ~share, k=1))
        crossings = [(proper[a], proper[b]) for a, b in zip(i, j)]
    spikes = []
    for n in book.nodes:
        nb = book.adj[n]
        if len(nb) == 2 and nb[0] != nb[1] and n not in nb:
            if spike_angle(positions, n, nb[0], nb[1]) < threshold:
                spikes.append(n)
    return {"degree": bad_degree, "loops": loops, "duplicates": dups,
            "crossings": crossings, "spikes": sorted(spikes)}
