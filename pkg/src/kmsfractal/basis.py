"""The ramp functions, n-branch bases and the patched basis of X.

Near a branch value ``c`` where ``n`` maps coincide the module is spanned by
``u_1 = 1/sqrt(n)`` and the elements ``(1/sqrt n) w^{l p} v_i(d(y, c))``
with ``w = exp(2 pi i / n)``, where ``p`` is the position of the map inside
the coinciding group. A radial piecewise-linear partition of unity glues
these local bases together with constant bases on the complement.

The ramp is ``r_i(x) = 0`` for ``x <= P/(2i)``, ``(2i/P) x - 1`` in between
and ``1`` for ``x >= P/i``. Exact (rational) arguments give exact values.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import exact as ex
from .bimodule import BimoduleElement, TildeFunction, standard_grid
from .branching import BranchReport
from .errors import ConfigurationError, DomainError, GeometryError
from .functions import Function, Lambda
from .ifs_core import IfsSystem
from .io import atomic_writer


def _sq_dist(p, q):
    return sum(((a - b) * (a - b) for a, b in zip(p, q)), 0)


def _exact_dist(p, q):
    """Exact distance when it is representable (1-D, or coincident points), else ``None``."""
    if not (ex.is_exact_point(p) and ex.is_exact_point(q)):
        return None
    if len(p) == 1:
        return abs(p[0] - q[0])
    if tuple(p) == tuple(q):
        return Fraction(0)
    return None


def _dist_array(pts: np.ndarray, c) -> np.ndarray:
    return np.linalg.norm(np.asarray(pts, float) - np.asarray(ex.float_point(c)), axis=1)


@dataclass(frozen=True)
class RampFamily:
    """Ramps ``r_i`` and square-root increments ``v_i`` with scale ``P``."""

    P: Any

    def __post_init__(self):
        if float(self.P) <= 0:
            raise DomainError("P must be positive")

    def r(self, i: int, x):
        if i < 0:
            raise DomainError("ramp index must be >= 0")
        if isinstance(x, np.ndarray):
            if np.any(x < 0):
                raise DomainError("ramp argument must be >= 0")
            if i == 0:
                return np.zeros_like(x, dtype=float)
            return np.clip(2 * i * x / float(self.P) - 1.0, 0.0, 1.0)
        if x < 0:
            raise DomainError("ramp argument must be >= 0")
        if i == 0:
            return Fraction(0) if ex.is_exact(x) else 0.0
        if ex.is_exact(x) and ex.is_exact(self.P):
            return min(max(2 * i * x / self.P - 1, Fraction(0)), Fraction(1))
        return min(max(2 * i * float(x) / float(self.P) - 1.0, 0.0), 1.0)

    def v2(self, i: int, x):
        """``v_i(x)^2 = r_i(x) - r_{i-1}(x)``."""
        if i < 1:
            raise DomainError("v is indexed from 1")
        return self.r(i, x) - self.r(i - 1, x)

    def v(self, i: int, x):
        d = self.v2(i, x)
        if isinstance(d, np.ndarray):
            return np.sqrt(np.maximum(d, 0.0))
        return math.sqrt(max(float(d), 0.0))

    def i_delta(self, delta: float) -> int:
        """Smallest ``i`` with ``r_i(x) = 1`` for every ``x >= delta``."""
        return math.ceil(float(self.P) / float(delta))


def ramp(family: RampFamily, i: int, x):
    return family.r(i, x)


def roots_of_unity_sum(n: int, p: int) -> complex:
    """``sum_{j=1}^n w^{p j}`` with ``w = exp(2 pi i/n)``; ``n`` if ``n | p`` else 0."""
    return complex(sum(cmath.exp(2j * math.pi * p * j / n) for j in range(1, n + 1)))


@dataclass(frozen=True)
class NBranchBasis:
    """Local basis around a branch value ``c`` shared by ``n`` maps (listed in ``J``)."""

    n: int
    c: tuple
    P: Any
    J: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("branch index n must be >= 1")
        if self.J and len(self.J) != self.n:
            raise ConfigurationError("J must list exactly n maps")

    @property
    def ramps(self) -> RampFamily:
        return RampFamily(self.P)

    @property
    def size(self) -> int | None:
        """Number of elements; ``None`` for the infinite family (n >= 2)."""
        return 1 if self.n == 1 else None

    def index(self, k: int) -> tuple[int, int]:
        """``k -> (i, l)``; ``(0, 0)`` for ``u_1``."""
        if k < 1 or (self.n == 1 and k > 1):
            raise IndexError(k)
        if k == 1:
            return 0, 0
        m = k - 2
        return m // (self.n - 1) + 1, m % (self.n - 1) + 1

    def phase(self, k: int, p: int) -> complex:
        """``w^{l p}`` for the position ``p`` (1-based) inside the group."""
        _, l = self.index(k)
        if l == 0:
            return 1.0
        if self.n == 2:
            return float((-1) ** ((l * p) % 2))
        return cmath.exp(2j * math.pi * l * p / self.n)

    def radial(self, k: int, d):
        """The factor ``v_i(d)`` (1 for ``u_1``)."""
        i, _ = self.index(k)
        if i == 0:
            return np.ones_like(d, dtype=float) if isinstance(d, np.ndarray) else 1.0
        return self.ramps.v(i, d)

    def value(self, k: int, p: int, d):
        """``u_k`` on the ``p``-th map of the group at distance ``d`` from ``c``."""
        return self.phase(k, p) * self.radial(k, d) / math.sqrt(self.n)

    def sq(self, k: int, d):
        """``|u_k|^2`` at distance ``d``; exact for exact ``d``."""
        i, _ = self.index(k)
        if i == 0:
            return Fraction(1, self.n) if ex.is_exact(d) or d is None else 1.0 / self.n
        return self.ramps.v2(i, d) / self.n


def build_n_branch_basis(n: int, c: Sequence, P) -> NBranchBasis:
    return NBranchBasis(n, tuple(c), ex.exact(P) if not isinstance(P, float) else P, tuple(range(1, n + 1)))


class Bump:
    """Radial partition-of-unity bump: 1 within ``rho/2`` of ``c``, 0 beyond ``rho``, linear between."""

    def __init__(self, c, rho):
        self.c, self.rho = tuple(c), rho

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        d = _dist_array(pts, self.c)
        rho = float(self.rho)
        return np.clip(2.0 - 2.0 * d / rho, 0.0, 1.0)

    def at(self, y):
        if ex.is_exact_point(y) and ex.is_exact(self.rho):
            d2 = _sq_dist(y, self.c)
            if d2 >= self.rho * self.rho:
                return Fraction(0)
            if 4 * d2 <= self.rho * self.rho:
                return Fraction(1)
            d = _exact_dist(y, self.c)
            if d is not None:
                return 2 - 2 * d / self.rho
        return float(self(np.asarray([ex.float_point(y)]))[0])


@dataclass
class Stream:
    """One sub-module ``C_{i,s}``: the maps ``J`` share the image ``b`` of ``c`` inside patch ``i``."""

    patch: int
    s: int
    J: tuple[int, ...]
    local: NBranchBasis | None
    c: tuple | None = None
    b: tuple | None = None

    @property
    def size(self) -> int | None:
        return 1 if self.local is None else self.local.size


@dataclass(frozen=True)
class BasisElement:
    stream: Stream
    k: int

    @property
    def label(self) -> str:
        return f"u[{self.stream.patch},{self.stream.s},{self.k}]"


@dataclass
class PatchedBasis:
    ifs: IfsSystem
    report: BranchReport
    radii: tuple
    P: tuple
    streams: list[Stream]
    bumps: list[Bump] = field(default_factory=list)

    # partition of unity
    def psi(self, patch: int, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, float).reshape(-1, self.ifs.dim)
        m = len(self.bumps)
        if patch <= m:
            return self.bumps[patch - 1](pts)
        return 1.0 - sum((b(pts) for b in self.bumps), np.zeros(len(pts)))

    def psi_at(self, patch: int, y):
        m = len(self.bumps)
        if patch <= m:
            return self.bumps[patch - 1].at(y)
        return 1 - sum((b.at(y) for b in self.bumps), 0)

    def partition_defect(self, pts: np.ndarray) -> float:
        total = sum(self.psi(i, pts) for i in range(1, len(self.bumps) + 2))
        return float(np.max(np.abs(total - 1.0)))

    # enumeration
    def elements(self, M: int, order: str = "forward") -> list[BasisElement]:
        """First ``M`` elements: round-robin over sub-modules, level by level."""
        if order not in ("forward", "reversed"):
            raise ConfigurationError(f"unknown enumeration order {order!r}")
        out: list[BasisElement] = []
        level = 0
        while len(out) < M:
            live = [s for s in self.streams if s.size is None or level < s.size]
            if not live:
                break
            if order == "reversed":
                live = live[::-1]
            for s in live:
                out.append(BasisElement(s, level + 1))
                if len(out) == M:
                    break
            level += 1
        return out

    def level_end(self, M: int) -> int:
        """Largest ``M' <= M`` at which a whole enumeration level is complete."""
        count, level, best = 0, 0, 0
        while True:
            live = [s for s in self.streams if s.size is None or level < s.size]
            if not live or count + len(live) > M:
                return best
            count += len(live)
            best = count
            level += 1

    @property
    def saturation_start(self) -> int:
        """Number of elements in the first level; after it only ramp elements are added."""
        return len(self.streams)

    @property
    def finite(self) -> bool:
        return all(s.size is not None for s in self.streams)

    @property
    def total_size(self) -> int | None:
        return sum(s.size for s in self.streams) if self.finite else None

    # evaluation
    def values(self, el: BasisElement, pts: np.ndarray) -> np.ndarray:
        """``(N, M)`` values of ``u~ = u * psi^{1/2}`` on float points."""
        pts = np.asarray(pts, float).reshape(-1, self.ifs.dim)
        s = el.stream
        root = np.sqrt(np.maximum(self.psi(s.patch, pts), 0.0))
        cplx = s.local is not None and s.local.n > 2
        out = np.zeros((self.ifs.N, len(pts)), dtype=complex if cplx else float)
        if s.local is None:
            out[s.J[0] - 1] = root
            return out
        d = _dist_array(pts, s.c)
        for p, j in enumerate(s.J, start=1):
            out[j - 1] = s.local.value(el.k, p, d) * root
        return out

    def sq_at(self, el: BasisElement, j: int, y):
        """``|u~_j(y)|^2``, exact whenever the distance to the branch value is."""
        s = el.stream
        if j not in s.J:
            return Fraction(0)
        psi = self.psi_at(s.patch, y)
        if s.local is None:
            return psi
        if ex.is_exact(psi) and psi == 0:
            return Fraction(0)
        d = _exact_dist(y, s.c)
        if d is None:
            d = float(np.linalg.norm(np.subtract(ex.float_point(y), ex.float_point(s.c))))
        w = s.local.sq(el.k, d)
        if ex.is_exact(w) and ex.is_exact(psi):
            return w * psi
        return float(w) * float(psi)

    def element(self, el: BasisElement) -> BimoduleElement:
        comps = [Lambda(lambda pts, j=j: self.values(el, pts)[j]) for j in range(self.ifs.N)]
        cplx = el.stream.local is not None and el.stream.local.n > 2
        return BimoduleElement(comps, self.ifs, self.report, complex_valued=cplx, name=el.label, check=False)

    def weight(self, j: int, K: int, order: str = "forward") -> Function:
        """``y -> sum_{k <= K} |u~_{k,j}(y)|^2``."""
        els = [e for e in self.elements(K, order) if j in e.stream.J]

        def fn(pts):
            pts = np.asarray(pts, float).reshape(-1, self.ifs.dim)
            return sum((np.abs(self.values(e, pts)[j - 1]) ** 2 for e in els), np.zeros(len(pts)))

        def exact_fn(y):
            return sum((self.sq_at(e, j, y) for e in els), Fraction(0))

        return Lambda(fn, exact_fn, name=f"W{j}")

    def to_json(self) -> dict:
        return {
            "radii": [ex.render(r) for r in self.radii],
            "P": [ex.render(p) for p in self.P],
            "streams": [{"patch": s.patch, "s": s.s, "J": list(s.J),
                         "n": 1 if s.local is None else s.local.n,
                         "c": None if s.c is None else ex.render_point(s.c),
                         "b": None if s.b is None else ex.render_point(s.b)} for s in self.streams],
        }


def default_radius(ifs: IfsSystem, report: BranchReport):
    """Largest ``2^-k`` below a quarter of the shortest box side and 0.4 of the closest branch-value gap."""
    bound = min(float(h - l) for l, h in zip(ifs.box_lo, ifs.box_hi)) / 4
    cs = report.branch_values
    for a in range(len(cs)):
        for b in range(a + 1, len(cs)):
            bound = min(bound, 0.4 * math.sqrt(float(_sq_dist(cs[a], cs[b]))))
    rho = Fraction(1)
    while rho > bound:
        rho /= 2
    return rho


def build_patched_basis(ifs: IfsSystem, report: BranchReport, radii: Sequence | None = None,
                        P: Sequence | None = None) -> PatchedBasis:
    """Patched basis; ``P`` defaults to ``rho_i / 2`` per patch."""
    cs = report.branch_values
    if not report.finite_branch:
        raise GeometryError("the finite branch condition fails; no patched basis exists")
    if radii is None:
        rho = default_radius(ifs, report)
        radii = [rho] * len(cs)
    radii = tuple(ex.exact(r) if not isinstance(r, float) else r for r in radii)
    if len(radii) != len(cs):
        raise ConfigurationError(f"need {len(cs)} radii, got {len(radii)}")
    if any(float(r) <= 0 for r in radii):
        raise GeometryError("radii must be positive")
    for a in range(len(cs)):
        for b in range(a + 1, len(cs)):
            gap2 = _sq_dist(cs[a], cs[b])
            reach = radii[a] + radii[b]
            if ex.is_exact(reach) and ex.is_exact_point(cs[a]) and ex.is_exact_point(cs[b]):
                bad = reach * reach >= gap2
            else:
                bad = float(reach) ** 2 >= float(gap2)
            if bad:
                raise GeometryError(f"neighbourhoods of branch values {a + 1} and {b + 1} intersect "
                                    f"(radii {radii[a]}, {radii[b]})")
    if P is None:
        P = tuple(r / 2 for r in radii)
    P = tuple(P)
    streams: list[Stream] = []
    bumps = []
    for i, (c, rho, p) in enumerate(zip(cs, radii, P), start=1):
        bumps.append(Bump(c, rho))
        groups: list[tuple[tuple, list[int]]] = []
        for j, g in enumerate(ifs.maps, start=1):
            x = g(c)
            for b, js in groups:
                if (tuple(b) == tuple(x)) if ex.is_exact_point(x) else np.allclose(
                        ex.float_point(b), ex.float_point(x), atol=ifs.tolerance):
                    js.append(j)
                    break
            else:
                groups.append((x, [j]))
        for s, (b, js) in enumerate(groups, start=1):
            local = NBranchBasis(len(js), tuple(c), p, tuple(js))
            streams.append(Stream(i, s, tuple(js), local, tuple(c), tuple(b)))
    rest = len(cs) + 1
    for j in range(1, ifs.N + 1):
        streams.append(Stream(rest, j, (j,), None))
    return PatchedBasis(ifs, report, radii, P, streams, bumps)


@dataclass(frozen=True)
class ReconstructionResult:
    error: float
    profile: tuple[tuple[int, float], ...]
    terms: int
    saturation_start: int

    @property
    def monotone_after_saturation(self) -> bool:
        errs = [e for m, e in self.profile if m >= self.saturation_start]
        return all(b <= a + 1e-14 for a, b in zip(errs, errs[1:]))


def _partial_sums(basis: PatchedBasis, F: np.ndarray, pts: np.ndarray, els: list[BasisElement]):
    acc = np.zeros_like(F, dtype=complex)
    for el in els:
        U = basis.values(el, pts)
        coeff = np.sum(np.conj(U) * F, axis=0)
        acc += U * coeff
        yield acc


def verify_reconstruction(basis: PatchedBasis, f: BimoduleElement, M: int, grid: np.ndarray | None = None,
                          order: str = "forward") -> ReconstructionResult:
    """Sup-error of ``sum_{k <= M} u_k (u_k|f)_A`` against ``f`` on the grid, with the profile in ``M``."""
    if grid is None:
        grid, _ = standard_grid(basis.ifs)
    grid = np.asarray(grid, float).reshape(-1, basis.ifs.dim)
    F = f.values(grid)
    els = basis.elements(M, order)
    profile = []
    err = float(np.max(np.abs(F))) if F.size else 0.0
    for m, acc in enumerate(_partial_sums(basis, F, grid, els), start=1):
        err = float(np.max(np.abs(acc - F)))
        profile.append((m, err))
    return ReconstructionResult(err, tuple(profile), len(els), basis.saturation_start)


def reconstruct(basis: PatchedBasis, f: BimoduleElement, M: int, grid: np.ndarray,
                order: str = "forward") -> np.ndarray:
    grid = np.asarray(grid, float).reshape(-1, basis.ifs.dim)
    F = f.values(grid)
    acc = np.zeros_like(F, dtype=complex)
    for acc in _partial_sums(basis, F, grid, basis.elements(M, order)):
        pass
    return acc


def order_independence(basis: PatchedBasis, f: BimoduleElement, M: int, grid: np.ndarray | None = None) -> float:
    """Max difference of the partial sums under the forward and reversed enumerations (full levels only)."""
    if grid is None:
        grid, _ = standard_grid(basis.ifs)
    M = basis.level_end(M)
    a = reconstruct(basis, f, M, grid, "forward")
    b = reconstruct(basis, f, M, grid, "reversed")
    return float(np.max(np.abs(a - b))) if a.size else 0.0


@dataclass(frozen=True)
class SumIdentityResult:
    """``max_residual`` covers the whole grid; a~ jumps at C(g), so convergence there is only pointwise
    and ``saturated_residual`` restricts to grid points whose ramps have saturated (or that sit on C(g))."""

    max_residual: float
    saturated_residual: float
    exact_residuals: tuple[tuple[tuple, Any], ...]
    terms: int

    @property
    def exact_zero(self) -> bool:
        return all(ex.is_exact(r) and r == 0 for _, r in self.exact_residuals)


def verify_sum_identity(basis: PatchedBasis, a: Function, K_trunc: int, grid: np.ndarray | None = None,
                        exact_points: Sequence | None = None) -> SumIdentityResult:
    """``sum_{k <= K} (u_k | a u_k)_A(y)`` against ``a~(y)``.

    The float residual is taken over the grid; at ``exact_points`` (by
    default the branch values) both sides are evaluated exactly.
    """
    ifs = basis.ifs
    if grid is None:
        grid, _ = standard_grid(ifs)
    grid = np.asarray(grid, float).reshape(-1, ifs.dim)
    at = TildeFunction(a, ifs, basis.report)
    els = basis.elements(K_trunc)
    total = np.zeros(len(grid))
    pulled = [a(g.apply_array(grid)) for g in ifs.maps]
    for el in els:
        U = basis.values(el, grid)
        total = total + sum(pulled[j] * np.abs(U[j]) ** 2 for j in range(ifs.N))
    diff = np.abs(total - at(grid))
    resid = float(np.max(diff)) if len(grid) else 0.0
    saturated = np.ones(len(grid), dtype=bool)
    for st in basis.streams:
        if st.size is not None:
            continue
        count = sum(1 for e in els if e.stream is st)
        level = (count - 1) // (st.local.n - 1) if count else 0
        d = _dist_array(grid, st.c)
        inside = (d < float(basis.radii[st.patch - 1])) & (d > ifs.tolerance)
        saturated &= ~inside if level == 0 else ~(inside & (d < float(st.local.P) / level))
    sat_resid = float(np.max(diff[saturated])) if saturated.any() else 0.0
    if exact_points is None:
        exact_points = basis.report.branch_values
    exact_res = []
    for y in exact_points:
        lhs = 0
        for el in els:
            for j in el.stream.J:
                w = basis.sq_at(el, j, y)
                if w != 0:
                    lhs = lhs + a.at(ifs.maps[j - 1](y)) * w
        rhs = at.at(y)
        exact_res.append((tuple(y), lhs - rhs))
    return SumIdentityResult(resid, sat_resid, tuple(exact_res), len(els))


def write_profile_csv(path: str | Path, rows: Sequence[dict]) -> None:
    """Rows of ``{"function", "order", "M", "error"}``."""
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function", "order", "M", "error"])
        for r in rows:
            w.writerow([r["function"], r["order"], r["M"], format(float(r["error"]), ".17g")])


def standard_elements(ifs: IfsSystem, report: BranchReport) -> list[BimoduleElement]:
    """Elements of X used for reconstruction checks; all are functions of ``(x, y)`` and so compatible."""
    def first(p):
        return p[:, 0]

    def last(p):
        return p[:, -1]

    specs = [
        ("one", lambda x, y: np.ones(len(y))),
        ("x", lambda x, y: first(x)),
        ("xy", lambda x, y: first(x) * last(y) + last(x) * first(y)),
        ("wave", lambda x, y: np.sin(3 * first(x)) * np.cos(2 * last(y)) + first(y) ** 2),
    ]
    return [BimoduleElement.from_xy(fn, ifs, report, name=name) for name, fn in specs]


def standard_algebra(ifs: IfsSystem) -> list[Function]:
    """Polynomials of A used for the sum identity; exact at rational and Q(sqrt 3) points."""
    from .functions import Constant, Polynomial

    d = ifs.dim
    e = [tuple(1 if i == k else 0 for i in range(d)) for k in range(d)]
    x2 = tuple(2 if i == 0 else 0 for i in range(d))
    return [Constant(1, name="one"),
            Polynomial({e[0]: 1}, d, name="x1"),
            Polynomial({x2: 1, e[-1]: Fraction(1, 3)}, d, name="x1^2+x_d/3")]
