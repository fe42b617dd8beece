"""The marching loop: extract the earliest band point, place its child,
and keep the band topology clean.

Each band point spawns at most one child, built from the point itself and
one nearby accepted point on its counter-clockwise side. The child takes
its parent's place in the band; when no child can be placed the parent is
dropped and its band neighbours are stitched together.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import book as bk
from .frames import FrameError, frame_from_normal
from .local_solver import (
    IterativeConfig,
    SolverError,
    StencilError,
    build_stencil,
    child_normal,
    iterative_solve,
)
from .sampler import CONSTRAINT_TOL, PlacementProblem, check_e, check_v2, grid_search


class InvariantViolation(AssertionError):
    pass


@dataclass
class MarchConfig:
    final_time: float
    L: int = 10
    grid_s: int = 10
    refinements: int = 5
    iterative: bool = True
    check_invariants: bool = False
    snapshot_times: tuple = ()


@dataclass
class Child:
    point: np.ndarray
    normal: np.ndarray
    parents: tuple
    iterations: int


@dataclass
class FrontGraph:
    """Accepted points in acceptance order with their parent links.

    ``parents[k]`` holds the indices of the two parents of point k, or
    (-1, -1) for seed points.
    """
    points: np.ndarray
    normals: np.ndarray
    parents: np.ndarray
    h: float
    m: int
    final_time: float
    max_band: int
    discarded: int
    iterations: int
    wall_time: float
    stats: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)
    # every computed point (accepted or discarded) and the band-swept mesh
    all_points: np.ndarray | None = None
    accepted_ids: np.ndarray | None = None
    swept: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def children(self) -> np.ndarray:
        return np.flatnonzero(self.parents[:, 0] >= 0)


class MarchState:
    def __init__(self, points, normals, cycles, config: MarchConfig):
        points = np.asarray(points, dtype=float)
        normals = np.asarray(normals, dtype=float)
        k = len(points)
        cap = max(1024, 4 * k)
        self.pts = np.zeros((cap, 3))
        self.nrm = np.zeros((cap, 3))
        self.pts[:k] = points
        self.nrm[:k] = normals
        self.count = k
        self.parents: list[tuple] = [(-1, -1)] * k
        self.config = config
        self.m = k
        self.h = min_pairwise_distance(points) / 2.0 if k >= 2 else 0.0
        # accepted set, in acceptance order (hence in time order)
        self.acc_ids: list[int] = list(range(k))
        self.acc_pts = np.zeros((cap, 3))
        self.acc_pts[:k] = points
        self.in_acc = np.zeros(cap, dtype=bool)
        self.in_acc[:k] = True
        self.band: set[int] = set(range(k))
        self.heap = [(float(points[i, 2]), i) for i in range(k)]
        heapq.heapify(self.heap)
        self.book = bk.Book.from_cycles(cycles) if k else bk.Book()
        self.book.swept = []
        self.max_band = len(self.band)
        self.discarded = 0
        self.iterations = 0
        self.snapshots: list[tuple[float, list]] = []
        self.stats = {"no_child": 0, "pb_retries": 0, "iter_fallback": 0,
                      "solver_iterations": []}

    # storage --------------------------------------------------------------

    def _grow(self):
        cap = 2 * len(self.pts)
        for name in ("pts", "nrm", "acc_pts"):
            old = getattr(self, name)
            new = np.zeros((cap, 3))
            new[: len(old)] = old
            setattr(self, name, new)
        flags = np.zeros(cap, dtype=bool)
        flags[: len(self.in_acc)] = self.in_acc
        self.in_acc = flags

    def add_point(self, p, n, parents) -> int:
        if self.count == len(self.pts):
            self._grow()
        i = self.count
        self.pts[i] = p
        self.nrm[i] = n
        self.parents.append(tuple(parents))
        self.count += 1
        return i

    def accept(self, i: int) -> None:
        if self.in_acc[i]:
            return
        k = len(self.acc_ids)
        self.acc_ids.append(i)
        self.acc_pts[k] = self.pts[i]
        self.in_acc[i] = True

    # queries --------------------------------------------------------------

    def nearest_accepted(self, p, L: int) -> np.ndarray:
        """Exact L nearest accepted points (spacetime distance) to ``p``.

        Accepted points are stored in time order and ``p`` is no earlier
        than any of them, so the backward scan can stop once the time gap
        alone exceeds the L-th best distance.
        """
        n = len(self.acc_ids)
        ids = np.asarray(self.acc_ids)
        chunk = max(8 * L, 256)
        best_d = np.empty(0)
        best_k = np.empty(0, dtype=int)
        hi = n
        while hi > 0:
            lo = max(0, hi - chunk)
            d = np.linalg.norm(self.acc_pts[lo:hi] - p, axis=1)
            best_d = np.concatenate([best_d, d])
            best_k = np.concatenate([best_k, np.arange(lo, hi)])
            order = np.lexsort((ids[best_k], best_d))[:L]
            best_d, best_k = best_d[order], best_k[order]
            hi = lo
            if len(best_d) == L and hi > 0 and p[2] - self.acc_pts[hi - 1, 2] > best_d[-1]:
                break
        return ids[best_k]


def min_pairwise_distance(points) -> float:
    from scipy.spatial import cKDTree

    points = np.asarray(points, dtype=float)
    d, _ = cKDTree(points).query(points, k=2)
    return float(d[:, 1].min())


def initialize(points, normals, cycles, final_time: float, **kwargs) -> MarchState:
    """Seed the accepted set and the band with the sampled initial front."""
    points = np.asarray(points, dtype=float)
    normals = np.asarray(normals, dtype=float)
    if len(points) < 3:
        raise ValueError("need at least 3 initial samples")
    if points.shape != normals.shape or points.shape[1] != 3:
        raise ValueError("points and normals must both be (K, 3)")
    if not np.allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-10):
        raise ValueError("initial normals must be unit vectors")
    if min_pairwise_distance(points) == 0.0:
        raise ValueError("duplicate initial samples (h would be 0)")
    return MarchState(points, normals, cycles, MarchConfig(final_time=final_time, **kwargs))


def initialize_field(speed_field, m: int, final_time: float | None = None, **kwargs) -> MarchState:
    from .speeds import sample_initial_front

    pts, nrm, cycles = sample_initial_front(speed_field, m)
    ft = speed_field.final_time if final_time is None else final_time
    return initialize(pts, nrm, cycles, ft, **kwargs)


# local representation -----------------------------------------------------

def choose_reference_normal(nu_a, neighbor_normals, distances):
    """Reference normal with positive dot product against every neighbour.

    Tries the parent's own normal; on failure prunes the farthest neighbour
    and retries, down to two neighbours. Returns (normal, kept count) or
    (None, 0).
    """
    order = np.argsort(distances, kind="stable")
    keep = len(order)
    while keep >= 2:
        sel = order[:keep]
        if np.all(neighbor_normals[sel] @ nu_a > 0.0):
            return nu_a, keep
        keep -= 1
    return None, 0


def local_representation(state: MarchState, a: int):
    """Neighbours, frame and candidate second parents for band point ``a``.

    Returns ``(neighbors, frame, local, candidates)`` where ``local`` holds
    frame coordinates of the neighbours relative to p_a and ``candidates``
    lists neighbour ids with u - u_a > h/2, closest first. Returns None when
    no reference normal exists.
    """
    cfg = state.config
    pa = state.pts[a]
    nbrs = state.nearest_accepted(pa, cfg.L)
    dist = np.linalg.norm(state.pts[nbrs] - pa, axis=1)
    nbar, keep = choose_reference_normal(state.nrm[a], state.nrm[nbrs], dist)
    if nbar is None:
        return None
    order = np.argsort(dist, kind="stable")[:keep]
    nbrs, dist = nbrs[order], dist[order]
    try:
        frame = frame_from_normal(nbar)
    except FrameError:
        return None
    local = (state.pts[nbrs] - pa) @ frame.matrix.T
    side = local[:, 0] > 0.5 * state.h
    candidates = [int(j) for j in nbrs[side]]
    return nbrs, frame, local, candidates


def compute_new_point(state: MarchState, a: int, b: int, frame, nbrs, speed) -> Child | None:
    """Place the child of the pair (a, b); None when the placement is infeasible."""
    cfg = state.config
    h = state.h
    pa = state.pts[a]
    lb = (state.pts[b] - pa) @ frame.matrix.T
    la = np.zeros(3)
    G_a = float(speed(pa[0], pa[1], pa[2]))
    neighbors = state.pts[nbrs]
    prob = PlacementProblem(la, lb, pa[2], state.pts[b, 2], G_a, h, frame, pa, neighbors,
                            s=cfg.grid_s, refinements=cfg.refinements)
    res = grid_search(prob)
    if res is None:
        return None
    w, iterations = res.w, 0
    try:
        st = build_stencil(la, lb, res.ud)
    except StencilError:
        return None
    if cfg.iterative:
        try:
            it = iterative_solve(st, speed, frame, res.w, IterativeConfig(h=h), origin=pa)
            cand = pa + np.array([res.ud[0], res.ud[1], it.w]) @ frame.matrix
            if (check_v2(cand[2], prob.t_a, prob.t_i, prob.dt)
                    and check_e(cand, neighbors, h)[0]):
                w, iterations = it.w, it.iterations
            else:
                state.stats["iter_fallback"] += 1
        except SolverError:
            state.stats["iter_fallback"] += 1
    p_d = pa + np.array([res.ud[0], res.ud[1], w]) @ frame.matrix
    n_d = child_normal(st, w) @ frame.matrix
    n_d /= np.linalg.norm(n_d)
    return Child(p_d, n_d, (a, b), iterations)


def spawn(state: MarchState, a: int, speed) -> Child | None:
    rep = local_representation(state, a)
    if rep is None:
        return None
    nbrs, frame, _, candidates = rep
    for k, b in enumerate(candidates):
        if k:
            state.stats["pb_retries"] += 1
        child = compute_new_point(state, a, b, frame, nbrs, speed)
        if child is not None:
            return child
    return None


# book keeping ---------------------------------------------------------------

def update_book(state: MarchState, a: int, child_id: int | None) -> list[int]:
    """Impose the band topology constraints after ``a`` left the band."""
    book, pos = state.book, state.pts
    removed = []
    if a not in book:
        return removed
    book.touched = set()
    if child_id is not None and book.degree(a) == 2:
        bk.replace_node(book, a, child_id)
        dirty = book.take_touched() | {child_id}
    else:
        if child_id is not None:
            # a must then be isolated: the child cannot take a band slot
            removed.append(child_id)
        bk.drop_node(book, a, pos)
        dirty = book.take_touched()
        removed += bk.clean(book, pos, dirty)
        dirty |= book.take_touched()
    dirty = {n for n in dirty if n in book}
    r = bk.check_intersections(book, pos, dirty)
    dirty |= book.take_touched()
    if r:
        r += bk.clean(book, pos, {n for n in dirty if n in book})
        dirty |= book.take_touched()
    removed += r
    # a removed spike can expose a new one next to it; repeat until stable
    while True:
        r = bk.check_spikes(book, pos, {n for n in dirty if n in book})
        if not r:
            break
        dirty |= book.take_touched()
        r += bk.clean(book, pos, {n for n in dirty if n in book})
        dirty |= book.take_touched()
        removed += r
    return removed


# main loop -------------------------------------------------------------------

def run(state: MarchState, speed, on_iteration=None) -> FrontGraph:
    """March until the band is empty and return the accepted graph."""
    cfg = state.config
    start = time.perf_counter()
    pending = sorted(cfg.snapshot_times)
    while state.heap:
        t_a, a = heapq.heappop(state.heap)
        if a not in state.band:
            continue
        while pending and t_a >= pending[0]:
            state.snapshots.append((pending.pop(0), state.book.segments()))
        state.iterations += 1
        state.band.discard(a)
        state.accept(a)
        child = spawn(state, a, speed) if t_a < cfg.final_time else None
        child_id = None
        if child is None:
            state.stats["no_child"] += 1
        else:
            child_id = state.add_point(child.point, child.normal, child.parents)
            state.band.add(child_id)
            heapq.heappush(state.heap, (float(child.point[2]), child_id))
            state.stats["solver_iterations"].append(child.iterations)
        removed = update_book(state, a, child_id)
        for r in removed:
            if r in state.band:
                state.band.discard(r)
                state.discarded += 1
        # band points the book no longer tracks are dropped too
        if len(state.band) != len(state.book):
            for r in sorted(state.band - set(state.book.nodes)):
                state.band.discard(r)
                state.discarded += 1
        state.max_band = max(state.max_band, len(state.band))
        if cfg.check_invariants:
            verify_state(state)
        if on_iteration is not None:
            on_iteration(state, a, child_id)
    wall = time.perf_counter() - start
    return build_graph(state, wall)


def build_graph(state: MarchState, wall_time: float) -> FrontGraph:
    ids = np.asarray(state.acc_ids, dtype=int)
    index = {int(i): k for k, i in enumerate(ids)}
    parents = np.array([[index[p] if p >= 0 else -1 for p in state.parents[i]] for i in ids],
                       dtype=int).reshape(-1, 2)
    return FrontGraph(
        points=state.pts[ids].copy(), normals=state.nrm[ids].copy(), parents=parents,
        h=state.h, m=state.m, final_time=state.config.final_time,
        max_band=state.max_band, discarded=state.discarded,
        iterations=state.iterations, wall_time=wall_time, stats=dict(state.stats),
        all_points=state.pts[: state.count].copy(), accepted_ids=ids,
        swept=np.array(state.book.swept, dtype=int).reshape(-1, 3),
        snapshots=list(state.snapshots),
    )


def verify_state(state: MarchState) -> None:
    """Brute-force invariant scan, used in test mode after each iteration."""
    if len(state.band) > state.m:
        raise InvariantViolation(f"band size {len(state.band)} exceeds m = {state.m}")
    n = len(state.acc_ids)
    t = state.acc_pts[:n, 2]
    if n > 1 and t[-1] < t[-2]:
        raise InvariantViolation("acceptance times decreased")
    last = state.acc_ids[-1]
    for p in state.parents[last]:
        if p >= 0:
            d = np.linalg.norm(state.pts[last] - state.pts[p])
            if d < state.h - CONSTRAINT_TOL:
                raise InvariantViolation(f"child {last} is {d / state.h:.6f} h from parent {p}")
            if not state.in_acc[p]:
                raise InvariantViolation(f"parent {p} of {last} was never accepted")
    if set(state.book.nodes) != state.band:
        raise InvariantViolation("book nodes differ from the band")
    bad = bk.violations(state.book, state.pts)
    if any(bad.values()):
        raise InvariantViolation(f"book invariants violated: { {k: v for k, v in bad.items() if v} }")


def march(speed_field, m: int, final_time: float | None = None, **kwargs) -> FrontGraph:
    """Convenience wrapper: sample the initial front of a field and march."""
    state = initialize_field(speed_field, m, final_time, **kwargs)
    return run(state, speed_field.speed)
