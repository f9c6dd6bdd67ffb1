"""Exact constructors for the tent, doubling and Sierpinski gasket systems."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .branching import BranchPair, BranchReport, branch_values, inverse_images
from .errors import ConfigurationError, PresetIntegrityError
from .exact import QSqrt3, is_exact_point
from .ifs_core import ContractionMap, IfsSystem, OpenSet, open_interval

F = Fraction
HALF = F(1, 2)


@dataclass(frozen=True)
class Preset:
    ifs: IfsSystem
    expected: BranchReport
    known_facts: tuple[tuple[str, object], ...]
    open_set: OpenSet

    @property
    def name(self) -> str:
        return self.ifs.name

    def fact(self, key: str):
        return dict(self.known_facts)[key]


def _interval_membership(lo, hi) -> Callable:
    def contains(p):
        if is_exact_point(p):
            return lo <= p[0] <= hi
        return float(lo) - 1e-12 <= float(p[0]) <= float(hi) + 1e-12
    return contains


@lru_cache(maxsize=None)
def tent() -> Preset:
    """``g1(y) = y/2``, ``g2(y) = 1 - y/2`` on [0, 1]."""
    maps = [ContractionMap([[HALF]], [F(0)]), ContractionMap([[-HALF]], [F(1)])]
    ifs = IfsSystem(maps, (F(0),), (F(1),), name="tent", membership=_interval_membership(F(0), F(1)))
    expected = BranchReport(((F(1),),), ((HALF,),), ((F(1),),), (BranchPair((F(1),), (HALF,), (1, 2)),))
    facts = (("C", ((F(1),),)), ("B", ((HALF,),)), ("e", 2), ("N", 2))
    return Preset(ifs, expected, facts, open_interval(0.0, 1.0))


@lru_cache(maxsize=None)
def doubling() -> Preset:
    """``g1(y) = y/2``, ``g2(y) = (y + 1)/2`` on [0, 1]."""
    maps = [ContractionMap([[HALF]], [F(0)]), ContractionMap([[HALF]], [HALF])]
    ifs = IfsSystem(maps, (F(0),), (F(1),), name="doubling", membership=_interval_membership(F(0), F(1)))
    expected = BranchReport((), (), (), ())
    facts = (("C", ()), ("B", ()), ("N", 2))
    return Preset(ifs, expected, facts, open_interval(0.0, 1.0))


# Gasket geometry. Coordinates live in Q(sqrt 3).
R3 = QSqrt3(0, 1)
C1 = (QSqrt3(HALF), QSqrt3(0, HALF))
C2 = (QSqrt3(0), QSqrt3(0))
C3 = (QSqrt3(1), QSqrt3(0))
B1 = (QSqrt3(F(1, 4)), QSqrt3(0, F(1, 4)))
B2 = (QSqrt3(F(3, 4)), QSqrt3(0, F(1, 4)))
B3 = (QSqrt3(HALF), QSqrt3(0))
VERTICES = (C1, C2, C3)


def _in_triangle(p, tol: float = 0.0) -> bool:
    x, y = p
    if is_exact_point(p):
        return y >= 0 and R3 * x - y >= 0 and R3 * (1 - x) - y >= 0
    x, y = float(x), float(y)
    s = 3 ** 0.5
    return y >= -tol and s * x - y >= -tol and s * (1 - x) - y >= -tol


def _gasket_member(maps, p, depth: int, tol: float) -> bool:
    if not _in_triangle(p, tol):
        return False
    if is_exact_point(p):
        if p in VERTICES:
            return True
    elif min(abs(float(p[0]) - float(v[0])) + abs(float(p[1]) - float(v[1])) for v in VERTICES) <= tol:
        return True
    if depth == 0:
        return True
    for g in maps:
        q = g.inverse(p)
        if _in_triangle(q, tol) and _gasket_member(maps, q, depth - 1, tol):
            return True
    return False


def _in_triangle_array(pts: np.ndarray, tol: float) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    s = 3 ** 0.5
    return (y >= -tol) & (s * x - y >= -tol) & (s * (1 - x) - y >= -tol)


def _gasket_member_array(maps, pts: np.ndarray, depth: int, tol: float) -> np.ndarray:
    """Vectorised address descent: pull each point back through a map whose preimage stays in the triangle.

    Each pull-back doubles the float error, so the tolerance grows by the same factor per level.
    """
    verts = np.array([[float(c) for c in v] for v in VERTICES])
    cur = np.array(pts, float)
    alive = _in_triangle_array(cur, tol)
    done = np.zeros(len(cur), dtype=bool)
    for k in range(depth):
        tol_k = tol + 2.0 ** k * 1e-15
        done |= np.min(np.abs(cur[:, None, :] - verts[None]).sum(axis=2), axis=1) <= tol_k
        nxt, found = cur.copy(), done.copy()
        for g in maps:
            q = g.inverse_array(cur)
            ok = _in_triangle_array(q, tol_k) & ~found
            nxt[ok] = q[ok]
            found |= ok
        alive &= found
        cur = nxt
    return alive


def _gasket_maps():
    q = F(1, 4)
    g1 = ContractionMap([[HALF, 0], [0, HALF]], [QSqrt3(q), QSqrt3(0, q)])
    # (1/2) R(-120 deg) and (1/2) R(+120 deg); translations fixed by the vertex correspondences
    g2 = ContractionMap([[QSqrt3(-q), QSqrt3(0, q)], [QSqrt3(0, -q), QSqrt3(-q)]], [QSqrt3(q), QSqrt3(0, q)])
    g3 = ContractionMap([[QSqrt3(-q), QSqrt3(0, -q)], [QSqrt3(0, q), QSqrt3(-q)]], [QSqrt3(1), QSqrt3(0)])
    return [g1, g2, g3]


def gasket_open_set(ifs: IfsSystem, depth: int = 30) -> OpenSet:
    """``V = S minus {c1, c2, c3}``, sampled from a chaos-game orbit."""
    tol = 1e-9
    verts = np.array([[float(c) for c in v] for v in VERTICES])

    def contains(pts):
        pts = np.asarray(pts, float).reshape(-1, 2)
        far = np.min(np.abs(pts[:, None, :] - verts[None]).sum(axis=2), axis=1) > 10 * tol
        return far & _gasket_member_array(ifs.maps, pts, depth, tol)

    def sample(rng, n):
        choice = rng.integers(0, 3, size=n + 50)
        p = np.array([0.5, 0.3])
        out = []
        for k, j in enumerate(choice):
            p = ifs.maps[int(j)].apply_array(p)[0]
            if k >= 50:
                out.append(p)
        pts = np.array(out)
        keep = np.min(np.abs(pts[:, None, :] - verts[None]).sum(axis=2), axis=1) > 10 * tol
        return pts[keep]

    return OpenSet(contains, sample, "S minus vertices")


def _verify_gasket(ifs: IfsSystem) -> None:
    g1, g2, g3 = ifs.maps
    facts = [
        ("g1(c2) = b1", g1(C2) == B1), ("g2(c2) = b1", g2(C2) == B1),
        ("g1(c3) = b2", g1(C3) == B2), ("g3(c3) = b2", g3(C3) == B2),
        ("g2(c1) = b3", g2(C1) == B3), ("g3(c1) = b3", g3(C1) == B3),
        ("g^-1(c1) = {c1}", {y for _, y in inverse_images(ifs, C1)} == {C1}),
        ("g^-1(c2) = {c3}", {y for _, y in inverse_images(ifs, C2)} == {C3}),
        ("g^-1(c3) = {c2}", {y for _, y in inverse_images(ifs, C3)} == {C2}),
    ]
    bad = [name for name, ok in facts if not ok]
    if bad:
        raise PresetIntegrityError(f"gasket maps violate: {', '.join(bad)}")


@lru_cache(maxsize=None)
def sierpinski() -> Preset:
    """Gasket maps: the scaled identity towards the top, and two half-scale rotations by -+120 degrees."""
    maps = _gasket_maps()
    box_hi = (QSqrt3(1), QSqrt3(0, HALF))
    holder: list[IfsSystem] = []

    def membership(p):
        exact_mode = is_exact_point(p)
        return _gasket_member(holder[0].maps, p, 40, 0.0 if exact_mode else 1e-9)

    ifs = IfsSystem(maps, (QSqrt3(0), QSqrt3(0)), box_hi, name="sierpinski", membership=membership)
    holder.append(ifs)
    _verify_gasket(ifs)
    pairs = (BranchPair(C2, B1, (1, 2)), BranchPair(C3, B2, (1, 3)), BranchPair(C1, B3, (2, 3)))
    key = lambda p: (float(p[0]), float(p[1]))  # noqa: E731
    pairs = tuple(sorted(pairs, key=lambda p: (key(p.y), key(p.x))))
    expected = BranchReport(tuple(sorted(VERTICES, key=key)), tuple(sorted((B1, B2, B3), key=key)),
                            tuple(sorted(VERTICES, key=key)), pairs)
    facts = (("C", VERTICES), ("B", (B1, B2, B3)), ("N", 3), ("b1", B1), ("b2", B2), ("b3", B3),
             ("c1", C1), ("c2", C2), ("c3", C3))
    return Preset(ifs, expected, facts, gasket_open_set(ifs))


PRESETS = {"tent": tent, "doubling": doubling, "sierpinski": sierpinski, "gasket": sierpinski}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def verify_expected(preset: Preset) -> bool:
    """The computed branch report equals the stored one exactly."""
    return branch_values(preset.ifs) == preset.expected
