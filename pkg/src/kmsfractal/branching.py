"""Branch values, branch points, branch indices, inverse images and orbits.

Exact systems decide coincidences with exact arithmetic. Float systems treat
two points as equal when they are closer than ``1e-9 * diam(box)``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import exact as ex
from .errors import BudgetError, DegenerateSystemError, NotAnImageError
from .ifs_core import IfsSystem, Point, Word, as_point


class PointIndex:
    """Deduplicating index: exact keys for exact points, tolerance buckets for floats."""

    def __init__(self, tol: float = 0.0):
        self.tol = tol
        self._exact: dict = {}
        self._buckets: dict = {}
        self._points: list = []

    def _cell(self, p):
        return tuple(int(np.floor(float(c) / self.tol)) for c in p)

    def find(self, p: Sequence) -> int | None:
        if ex.is_exact_point(p) or self.tol == 0.0:
            return self._exact.get(tuple(p))
        cell = self._cell(p)
        fp = np.array(ex.float_point(p))
        for off in itertools.product((-1, 0, 1), repeat=len(cell)):
            for k in self._buckets.get(tuple(c + o for c, o in zip(cell, off)), ()):
                if np.linalg.norm(fp - np.array(ex.float_point(self._points[k]))) < self.tol:
                    return k
        return None

    def add(self, p: Sequence) -> tuple[int, bool]:
        k = self.find(p)
        if k is not None:
            return k, False
        k = len(self._points)
        self._points.append(tuple(p))
        if ex.is_exact_point(p) or self.tol == 0.0:
            self._exact[tuple(p)] = k
        else:
            self._buckets.setdefault(self._cell(p), []).append(k)
        return k, True

    def __getitem__(self, k: int) -> Point:
        return self._points[k]

    def __len__(self):
        return len(self._points)


def same_point(ifs: IfsSystem, p: Sequence, q: Sequence) -> bool:
    if ex.is_exact_point(p) and ex.is_exact_point(q):
        return tuple(p) == tuple(q)
    return float(np.linalg.norm(np.subtract(ex.float_point(p), ex.float_point(q)))) < ifs.tolerance


def _sort_key(p):
    return ex.float_point(p)


def _tol(ifs: IfsSystem) -> float:
    return 0.0 if ifs.exact else ifs.tolerance


@dataclass(frozen=True)
class BranchPair:
    """``g_j(y) = x`` for every ``j`` in ``J`` (1-based), with ``|J| >= 2``."""

    y: Point
    x: Point
    J: tuple[int, ...]

    @property
    def e(self) -> int:
        return len(self.J)


@dataclass(frozen=True)
class BranchReport:
    branch_values: tuple[Point, ...]
    branch_points: tuple[Point, ...]
    c_tilde: tuple[Point, ...]
    pairs: tuple[BranchPair, ...]
    finite_branch: bool = True
    exact: bool = True
    heuristic: bool = False

    def pairs_at(self, y: Sequence) -> tuple[BranchPair, ...]:
        return tuple(p for p in self.pairs if _eq(p.y, y, self.exact))

    def e(self, x: Sequence, y: Sequence) -> int:
        for p in self.pairs:
            if _eq(p.y, y, self.exact) and _eq(p.x, x, self.exact):
                return p.e
        return 1

    def to_json(self) -> dict:
        return {
            "branch_values": [ex.render_point(p) for p in self.branch_values],
            "branch_points": [ex.render_point(p) for p in self.branch_points],
            "c_tilde": [ex.render_point(p) for p in self.c_tilde],
            "pairs": [{"y": ex.render_point(p.y), "x": ex.render_point(p.x), "J": list(p.J), "e": p.e}
                      for p in self.pairs],
            "finite_branch": self.finite_branch,
            "exact": self.exact,
            "heuristic": self.heuristic,
        }


def _eq(p, q, exact_mode: bool, tol: float = 1e-9) -> bool:
    if exact_mode and ex.is_exact_point(p) and ex.is_exact_point(q):
        return tuple(p) == tuple(q)
    return float(np.linalg.norm(np.subtract(ex.float_point(p), ex.float_point(q)))) < tol


def _identical(g, h) -> bool:
    if g.affine and h.affine:
        if g.exact and h.exact:
            return g.matrix == h.matrix and g.translation == h.translation
        return bool(np.allclose(g.A, h.A, rtol=0, atol=1e-15) and np.allclose(g.t, h.t, rtol=0, atol=1e-15))
    return g is h


def _pair_solutions(ifs: IfsSystem, j: int, jj: int):
    """Solutions of ``g_j(y) = g_jj(y)``; returns (points, finite)."""
    g, h = ifs.maps[j], ifs.maps[jj]
    if g.exact and h.exact:
        m = [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(g.matrix, h.matrix)]
        rhs = [b - a for a, b in zip(g.translation, h.translation)]
        y, rank = ex.solve(m, rhs)
        if y is None:
            return [], True
        if rank < ifs.dim:
            return [], False
        return [y], True
    m = g.A - h.A
    rhs = h.t - g.t
    s = np.linalg.svd(m, compute_uv=False)
    if s.min() <= 1e-12 * max(s.max(), 1.0):
        y, *_ = np.linalg.lstsq(m, rhs, rcond=None)
        if np.linalg.norm(m @ y - rhs) < ifs.tolerance:
            return [], False
        return [], True
    return [tuple(float(v) for v in np.linalg.solve(m, rhs))], True


def _heuristic_solutions(ifs: IfsSystem, j: int, jj: int):
    cloud = ifs.reference_cloud().points
    g, h = ifs.maps[j], ifs.maps[jj]
    dist = np.linalg.norm(g.apply_array(cloud) - h.apply_array(cloud), axis=1)
    out = []
    for i in np.argsort(dist)[:5]:
        res = minimize(lambda p: float(np.linalg.norm(g.apply_array(p) - h.apply_array(p))),
                       cloud[i], method="Nelder-Mead", options={"xatol": 1e-14, "fatol": 1e-15})
        if res.fun < ifs.tolerance:
            out.append(tuple(float(v) for v in res.x))
    return out


def branch_values(ifs: IfsSystem) -> BranchReport:
    """Compute C(g), B(g), C~(g) and the coincidence index sets."""
    heuristic = not ifs.affine
    finite = True
    index = PointIndex(_tol(ifs))
    for j, jj in itertools.combinations(range(ifs.N), 2):
        if _identical(ifs.maps[j], ifs.maps[jj]):
            raise DegenerateSystemError(f"maps {j + 1} and {jj + 1} are identical")
        if heuristic:
            sols, ok = _heuristic_solutions(ifs, j, jj), True
        else:
            sols, ok = _pair_solutions(ifs, j, jj)
        finite = finite and ok
        for y in sols:
            if ifs.contains(y):
                index.add(y)
    pairs = []
    for k in range(len(index)):
        y = index[k]
        images = PointIndex(_tol(ifs))
        groups: dict[int, list[int]] = {}
        for j, g in enumerate(ifs.maps, start=1):
            key, _ = images.add(g(y))
            groups.setdefault(key, []).append(j)
        for key, J in groups.items():
            if len(J) >= 2:
                pairs.append(BranchPair(y, images[key], tuple(J)))
    pairs.sort(key=lambda p: (_sort_key(p.y), _sort_key(p.x)))
    values = _unique(ifs, [p.y for p in pairs])
    points = _unique(ifs, [p.x for p in pairs])
    tilde = []
    for x in points:
        tilde.extend(y for _, y in inverse_images(ifs, x))
    return BranchReport(values, points, _unique(ifs, tilde), tuple(pairs), finite,
                        exact=ifs.exact, heuristic=heuristic)


def _unique(ifs: IfsSystem, pts: Iterable[Point]) -> tuple[Point, ...]:
    idx = PointIndex(_tol(ifs))
    for p in pts:
        idx.add(p)
    return tuple(sorted((idx[k] for k in range(len(idx))), key=_sort_key))


def branch_index(ifs: IfsSystem, x: Any, y: Any) -> int:
    """``e(x, y) = #{j : g_j(y) = x}``."""
    x, y = as_point(x, ifs.dim), as_point(y, ifs.dim)
    e = sum(1 for g in ifs.maps if same_point(ifs, g(y), x))
    if e == 0:
        raise NotAnImageError(f"{x} is not an image of {y}")
    return e


def inverse_images(ifs: IfsSystem, x: Any) -> tuple[tuple[int, Point], ...]:
    """All ``(j, y)`` with ``g_j(y) = x`` and ``y`` in K; ``I(x)`` is the set of ``j``."""
    x = as_point(x, ifs.dim)
    out = []
    for j, g in enumerate(ifs.maps, start=1):
        y = g.inverse(x)
        if ifs.contains(y):
            out.append((j, y))
    return tuple(out)


@dataclass
class OrbitTree:
    """Words of length <= depth applied to ``root``, grouped by level.

    ``distinct`` maps each distinct point to ``[count, first word]``;
    ``collisions`` lists ``(earlier word, later word)`` pairs that land on
    the same point.
    """

    root: Point
    depth: int
    levels: list[list[tuple[Word, Point]]]
    distinct: dict = field(default_factory=dict)
    collisions: list[tuple[Word, Word]] = field(default_factory=list)

    @property
    def nodes(self) -> dict[Word, Point]:
        return {w: p for level in self.levels for w, p in level}

    def points(self) -> list[Point]:
        return [v[2] for v in self.distinct.values()]

    def __len__(self):
        return sum(len(level) for level in self.levels)

    def to_json(self) -> dict:
        return {
            "root": ex.render_point(self.root),
            "depth": self.depth,
            "nodes": [{"word": list(w), "point": ex.render_point(p)} for level in self.levels for w, p in level],
            "collisions": [[list(a), list(b)] for a, b in self.collisions],
        }

    def write_csv(self, path: str | Path) -> None:
        from .io import atomic_writer

        with atomic_writer(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["word"] + [f"x{i + 1}" for i in range(len(self.root))])
            for level in self.levels:
                for word, p in level:
                    w.writerow([".".join(map(str, word))] + [ex.text(c) for c in p])


def orbit_size(n_maps: int, depth: int) -> int:
    return sum(n_maps ** n for n in range(depth + 1))


def orbit(ifs: IfsSystem, y: Any, depth: int, budget: int | None = None) -> OrbitTree:
    """Enumerate ``g_{j1}...g_{jn}(y)`` for all words with ``n <= depth``.

    New letters are prepended: the node for ``(j,) + w`` is ``g_j`` applied to
    the node for ``w``. Levels are in lexicographic word order.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    budget = ifs.budget if budget is None else budget
    if orbit_size(ifs.N, depth) > budget:
        raise BudgetError(f"orbit of depth {depth} has {orbit_size(ifs.N, depth)} nodes, budget {budget}")
    y = as_point(y, ifs.dim)
    index = PointIndex(_tol(ifs))
    tree = OrbitTree(y, depth, [[((), y)]])
    k, _ = index.add(y)
    tree.distinct[k] = [1, (), y]
    for _ in range(depth):
        nxt = []
        for j, g in enumerate(ifs.maps, start=1):
            for w, p in tree.levels[-1]:
                nxt.append(((j,) + w, g(p)))
        for w, p in nxt:
            k, new = index.add(p)
            if new:
                tree.distinct[k] = [1, w, p]
            else:
                tree.distinct[k][0] += 1
                tree.collisions.append((tree.distinct[k][1], w))
        tree.levels.append(nxt)
    return tree


@dataclass(frozen=True)
class OrbitLemmaVerdict:
    passed: bool
    depth: int
    hits_branch_values: tuple = ()
    overlaps: tuple = ()
    collisions: tuple = ()


def check_orbit_lemmas(ifs: IfsSystem, report: BranchReport, depth: int,
                       max_witnesses: int = 10) -> OrbitLemmaVerdict:
    """Orbits of branch points avoid C(g), are pairwise disjoint and injective in the word."""
    tol = _tol(ifs)
    values = PointIndex(tol)
    for c in report.branch_values:
        values.add(c)
    owners = PointIndex(tol)
    owner_of: dict[int, tuple[int, Word]] = {}
    hits, overlaps, collisions = [], [], []
    for r, b in enumerate(report.branch_points):
        tree = orbit(ifs, b, depth)
        for a, w in tree.collisions[:max_witnesses]:
            collisions.append((b, a, w))
        for level in tree.levels:
            for w, p in level:
                if values.find(p) is not None and len(hits) < max_witnesses:
                    hits.append((b, w, p))
                k, new = owners.add(p)
                if new:
                    owner_of[k] = (r, w)
                elif owner_of[k][0] != r and len(overlaps) < max_witnesses:
                    r0, w0 = owner_of[k]
                    overlaps.append((report.branch_points[r0], w0, b, w, p))
    ok = not (hits or overlaps or collisions)
    return OrbitLemmaVerdict(ok, depth, tuple(hits), tuple(overlaps), tuple(collisions))
