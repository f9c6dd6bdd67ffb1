"""Discrete measures: pushforwards, the Hutchinson iteration, chaos game, orbit measures, W1.

Every measure carries a certified ``defect``: mass that the atom list does
not represent (a truncated series tail), plus a spatial ``resolution`` for
merged atoms. Orbit measures keep exact weights and exact atoms; on an
interval with exact affine maps their integrals against piecewise
polynomials are evaluated through the transfer operator, so the series can
be taken far deeper than the atom count would allow.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.stats import wasserstein_distance

from . import exact as ex
from .bimodule import TildeFunction
from .branching import BranchReport, PointIndex, _tol, inverse_images, orbit_size
from .errors import BudgetError, ConfigurationError, NormalizationError, UnboundedSeriesError
from .functions import Function, as_piecewise, transfer
from .ifs_core import ContractionMap, IfsSystem, as_point
from .io import atomic_writer

SLICE_DIRECTIONS = 64
DEFAULT_TARGET_DEFECT = 1e-9
ORBIT_NODE_CAP = 2 ** 14


@dataclass(frozen=True)
class IntegralEstimate:
    """``value`` with error bar ``error = defect * sup|a|`` (exact ``value`` when available)."""

    value: Any
    error: float

    def __float__(self):
        return float(self.value)


class Measure:
    dim: int
    defect: Any
    resolution: float = 0.0

    @property
    def total(self):
        raise NotImplementedError

    @property
    def exact(self) -> bool:
        return False

    def integrate(self, a: Function, exact: bool | None = None) -> IntegralEstimate:
        raise NotImplementedError

    def point_mass(self, x, radius: float | None = None):
        raise NotImplementedError

    def atoms(self) -> "DiscreteMeasure":
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class DiscreteMeasure(Measure):
    """Finite weighted atom list. ``exact_atoms`` (parallel to ``points``) holds exact coordinates and weights."""

    points: np.ndarray
    weights: np.ndarray
    defect: Any = 0.0
    resolution: float = 0.0
    exact_atoms: tuple | None = None
    kind: str = "discrete"
    certificate: tuple = ()

    def __post_init__(self):
        pts = np.asarray(self.points, float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", np.asarray(self.weights, float).reshape(-1))
        if len(self.weights) != len(pts):
            raise ConfigurationError("points and weights differ in length")
        if np.any(self.weights < 0):
            raise ConfigurationError("weights must be nonnegative")

    @classmethod
    def from_exact(cls, atoms: Sequence[tuple], defect=Fraction(0), kind: str = "discrete") -> "DiscreteMeasure":
        atoms = tuple((tuple(p), w) for p, w in atoms)
        pts = np.array([ex.float_point(p) for p, _ in atoms], float)
        if not len(atoms):
            pts = np.zeros((0, 1))
        return cls(pts, np.array([float(w) for _, w in atoms]), defect, 0.0, atoms, kind)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def exact(self) -> bool:
        return self.exact_atoms is not None

    @property
    def total(self):
        if self.exact:
            return sum((w for _, w in self.exact_atoms), Fraction(0))
        return math.fsum(self.weights)

    def __len__(self):
        return len(self.weights)

    def atoms(self) -> "DiscreteMeasure":
        return self

    def as_dict(self) -> dict:
        if not self.exact:
            raise ConfigurationError("exact atoms required")
        out: dict = {}
        for p, w in self.exact_atoms:
            out[p] = out.get(p, 0) + w
        return out

    def integrate(self, a: Function, exact: bool | None = None) -> IntegralEstimate:
        if exact is None:
            exact = self.exact and a.exact_capable
        if exact and self.exact and a.exact_capable:
            value = sum((w * a.at(p) for p, w in self.exact_atoms if w), Fraction(0))
        else:
            # float integrals are memoized per function object; the strong reference keeps ids unique
            memo = self.__dict__.setdefault("_float_integrals", {})
            hit = memo.get(id(a))
            if hit is not None and hit[0] is a:
                return hit[1]
            value = float(self.weights @ np.real(a(self.points))) if len(self) else 0.0
            est = IntegralEstimate(value, float(self.defect) * _sup(a, self.points))
            memo[id(a)] = (a, est)
            return est
        return IntegralEstimate(value, float(self.defect) * _sup(a, self.points))

    def point_mass(self, x, radius: float | None = None):
        if self.exact and ex.is_exact_point(x) and radius is None:
            x = tuple(x)
            return sum((w for p, w in self.exact_atoms if p == x), Fraction(0))
        r = radius if radius is not None else max(self.resolution, 1e-12)
        d = np.linalg.norm(self.points - np.asarray(ex.float_point(x)), axis=1)
        return float(self.weights[d <= r].sum())

    def max_atom(self) -> float:
        return float(self.weights.max()) if len(self) else 0.0

    def normalized(self) -> "DiscreteMeasure":
        t = self.total
        if self.exact:
            return DiscreteMeasure.from_exact([(p, w / t) for p, w in self.exact_atoms], self.defect, self.kind)
        return DiscreteMeasure(self.points, self.weights / float(t), self.defect, self.resolution, None, self.kind,
                               self.certificate)


def _sup(a: Function, pts: np.ndarray) -> float:
    if a.sup is not None:
        return float(a.sup)
    if len(pts) == 0:
        return 0.0
    return float(np.max(np.abs(a(pts))))


def point_mass_measure(x, weight=Fraction(1)) -> DiscreteMeasure:
    x = as_point(x)
    if ex.is_exact_point(x):
        return DiscreteMeasure.from_exact([(x, ex.exact(weight))], Fraction(0), "dirac")
    return DiscreteMeasure(np.array([x], float), np.array([float(weight)]), 0.0, kind="dirac")


def integrate(m: Measure, a: Function, exact: bool | None = None) -> IntegralEstimate:
    return m.integrate(a, exact)


def point_mass(m: Measure, x, radius: float | None = None):
    return m.point_mass(x, radius)


def pushforward(m: DiscreteMeasure, g: ContractionMap) -> DiscreteMeasure:
    """``g # m``: atoms moved by ``g``, weights and defect unchanged."""
    if m.exact and g.exact:
        return DiscreteMeasure.from_exact([(g(p), w) for p, w in m.exact_atoms], m.defect, m.kind)
    return DiscreteMeasure(g.apply_array(m.points), m.weights.copy(), m.defect, m.resolution, None, m.kind)


def _merge(points: np.ndarray, weights: np.ndarray, res: float) -> tuple[np.ndarray, np.ndarray]:
    keys = np.round(points / res).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    w = np.bincount(inverse, weights=weights, minlength=len(uniq))
    pts = np.empty((len(uniq), points.shape[1]))
    for d in range(points.shape[1]):
        pts[:, d] = np.bincount(inverse, weights=weights * points[:, d], minlength=len(uniq)) / w
    return pts, w


def barycenter(ifs: IfsSystem):
    """Mean of the Hutchinson measure: the fixed point of ``p -> (1/N) sum_j g_j(p)`` (affine maps)."""
    if not ifs.affine:
        return ifs.center
    d, N = ifs.dim, ifs.N
    if ifs.exact:
        A = [[(1 if r == c else 0) - sum((g.matrix[r][c] for g in ifs.maps), 0) / N for c in range(d)]
             for r in range(d)]
        t = [sum((g.translation[r] for g in ifs.maps), 0) / N for r in range(d)]
        y, rank = ex.solve(A, t)
        if y is not None and rank == d:
            return tuple(y)
    A = np.eye(d) - sum(np.array(g.matrix, float) for g in ifs.maps) / N
    t = sum(np.array([float(v) for v in g.translation]) for g in ifs.maps) / N
    return tuple(float(v) for v in np.linalg.solve(A, t))


def hutchinson_iterate(ifs: IfsSystem, init: DiscreteMeasure | None = None, steps: int = 14,
                       merge_resolution: float | None = None, budget: int | None = None) -> DiscreteMeasure:
    """Iterate ``m <- (1/N) sum_j g_j # m`` with atom merging.

    The default start is a point mass at the barycentre of the limit measure.
    ``certificate`` holds the W1 distances between consecutive iterates.
    """
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    if init is None:
        init = point_mass_measure(tuple(float(v) for v in barycenter(ifs)))
    res = ifs.diam * 2.0 ** -20 if merge_resolution is None else merge_resolution
    budget = ifs.budget if budget is None else budget
    pts, w = init.points.copy(), init.weights.copy()
    if abs(w.sum() - 1.0) > 1e-12 + float(init.defect):
        raise NormalizationError("the initial measure must be a probability measure")
    cert = []
    prev = DiscreteMeasure(pts, w)
    for _ in range(steps):
        if ifs.N * len(w) > budget:
            raise BudgetError(f"{ifs.N * len(w)} atoms before merging exceeds budget {budget}; use chaos_game")
        pts = np.concatenate([g.apply_array(pts) for g in ifs.maps])
        w = np.tile(w, ifs.N) / ifs.N
        if res > 0:
            pts, w = _merge(pts, w, res)
        cur = DiscreteMeasure(pts, w)
        cert.append(float(w1_distance(prev, cur)))
        prev = cur
    return DiscreteMeasure(pts, w, float(init.defect), res, None, "hutchinson", tuple(cert))


def chaos_game(ifs: IfsSystem, steps: int, burn_in: int = 1000, seed: int = 0, start=None) -> DiscreteMeasure:
    """Empirical measure of ``x_k = g_{j_k}(x_{k-1})`` for ``k = burn_in+1..steps``, uniform ``j_k``.

    All points are computed at once: ``x_k`` only depends on the last
    ``W`` choices up to ``c2^W * diam``, which is below double precision for
    the window used, so ``x_k`` is evaluated as the window composition
    applied to the start point (exactly sequential for ``k < W``).
    """
    if not steps > burn_in >= 0:
        raise ConfigurationError("need steps > burn_in >= 0")
    rng = np.random.default_rng(seed)
    choice = rng.integers(0, ifs.N, size=steps)
    x0 = np.asarray(ex.float_point(start if start is not None else ifs.center), float)
    window = int(math.ceil(math.log(1e-17) / math.log(max(ifs.c2_max, 1e-3)))) + 1
    ks = np.arange(burn_in + 1, steps + 1)
    X = np.tile(x0, (len(ks), 1))
    if ifs.affine:
        A = np.array([np.array(g.matrix, float) for g in ifs.maps])
        T = np.array([[float(v) for v in g.translation] for g in ifs.maps])
    for t in range(window - 1, -1, -1):
        idx = ks - t
        live = idx >= 1
        c = choice[np.maximum(idx, 1) - 1]
        if ifs.affine:
            Y = np.einsum("kij,kj->ki", A[c], X) + T[c]
            X = np.where(live[:, None], Y, X)
            continue
        for j, g in enumerate(ifs.maps):
            sel = live & (c == j)
            if sel.any():
                X[sel] = g.apply_array(X[sel])
    n = len(ks)
    return DiscreteMeasure(X, np.full(n, 1.0 / n), 0.0, 0.0, None, "chaos_game")


class Lebesgue(Measure):
    """Normalised Lebesgue measure on ``[lo, hi]``."""

    dim = 1
    defect = 0.0

    def __init__(self, lo=0.0, hi=1.0):
        self.lo, self.hi = float(lo), float(hi)

    @property
    def total(self):
        return 1.0

    def integrate(self, a: Function, exact: bool | None = None) -> IntegralEstimate:
        pp = as_piecewise(a, ex.exact(self.lo), ex.exact(self.hi))
        if pp is not None:
            total = Fraction(0)
            for (x0, x1), c in zip(zip(pp.breaks, pp.breaks[1:]), pp.polys):
                total += sum(v * (x1 ** (k + 1) - x0 ** (k + 1)) / (k + 1) for k, v in enumerate(c))
            return IntegralEstimate(total / (ex.exact(self.hi) - ex.exact(self.lo)), 0.0)
        x = np.linspace(self.lo, self.hi, 2 ** 16 + 1)
        return IntegralEstimate(float(np.trapezoid(a(x.reshape(-1, 1)), x)) / (self.hi - self.lo), 0.0)


def _abs_linear_integral(c: float, g0: float, g1: float, length: float) -> float:
    """``int_0^L |c - g(t)| dt`` for ``g`` linear from ``g0`` to ``g1``."""
    a, b = c - g0, c - g1
    if a * b >= 0:
        return 0.5 * length * (abs(a) + abs(b))
    return 0.5 * length * (a * a + b * b) / (abs(a) + abs(b))


def w1_to_uniform(m: DiscreteMeasure, lo: float = 0.0, hi: float = 1.0) -> float:
    """Exact W1 between a 1-D atomic probability measure and the uniform law on ``[lo, hi]``."""
    m = m.normalized()
    order = np.argsort(m.points[:, 0])
    xs = np.clip(m.points[order, 0], lo, hi)
    cdf = np.cumsum(m.weights[order])
    knots = np.concatenate([[lo], xs, [hi]])
    levels = np.concatenate([[0.0], cdf])
    total = 0.0
    L = hi - lo
    for k in range(len(levels)):
        x0, x1 = knots[k], knots[k + 1]
        if x1 > x0:
            total += _abs_linear_integral(levels[k], (x0 - lo) / L, (x1 - lo) / L, x1 - x0)
    return float(total)


@dataclass(frozen=True)
class W1Estimate:
    value: float
    spread: float = 0.0
    method: str = "exact-cdf"

    def __float__(self):
        return self.value


def _directions(n: int = SLICE_DIRECTIONS) -> np.ndarray:
    th = np.pi * np.arange(n) / n
    return np.stack([np.cos(th), np.sin(th)], axis=1)


def w1_distance(m1: Measure, m2: Measure) -> W1Estimate:
    """Exact W1 in dimension 1, sliced W1 over 64 fixed directions in dimension 2."""
    if isinstance(m1, Lebesgue) and isinstance(m2, Lebesgue):
        return W1Estimate(abs((m1.lo + m1.hi) - (m2.lo + m2.hi)) / 2)
    if isinstance(m2, Lebesgue):
        m1, m2 = m2, m1
    if isinstance(m1, Lebesgue):
        m2 = m2.atoms()
        if abs(float(m2.total) - 1.0) > float(m2.defect) + 1e-12:
            raise NormalizationError("measures have different total mass")
        return W1Estimate(float(w1_to_uniform(m2, m1.lo, m1.hi)))
    a, b = m1.atoms(), m2.atoms()
    if a.dim != b.dim:
        raise ConfigurationError("measures live in different dimensions")
    if abs(float(a.total) - float(b.total)) > float(a.defect) + float(b.defect) + 1e-12:
        raise NormalizationError("measures have different total mass")
    wa, wb = a.weights / a.weights.sum(), b.weights / b.weights.sum()
    if a.dim == 1:
        return W1Estimate(float(wasserstein_distance(a.points[:, 0], b.points[:, 0], wa, wb)))
    dirs = _directions()
    if a.dim != 2:
        rng = np.random.default_rng(0)
        dirs = rng.normal(size=(SLICE_DIRECTIONS, a.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    vals = np.array([wasserstein_distance(a.points @ u, b.points @ u, wa, wb) for u in dirs])
    return W1Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals))), "sliced")


def parse_lambda(lam) -> Any:
    """Exact ``lam`` where possible: ints, rationals and floats within 1e-12 of a small-denominator rational."""
    if ex.is_exact(lam):
        return ex.exact(lam)
    if isinstance(lam, str):
        return ex.exact(lam)
    lam = float(lam)
    q = Fraction(lam).limit_denominator(1000)
    return q if abs(float(q) - lam) <= 1e-12 * max(1.0, abs(lam)) else lam


def default_orbit_depth(N: int, lam, target: float = DEFAULT_TARGET_DEFECT, node_cap: int | None = None) -> int:
    """``ceil(log(target)/log(N/lam)) - 1``, optionally capped so the orbit has at most ``node_cap`` nodes."""
    depth = max(0, math.ceil(math.log(target) / math.log(N / float(lam))) - 1)
    if node_cap is not None:
        while depth > 0 and orbit_size(N, depth) > node_cap:
            depth -= 1
    return depth


class OrbitMeasure(Measure):
    """``mu_{y,lam} = ((lam - N)/lam) sum_n lam^-n sum_{|w| = n} delta_{w(y)}``, truncated at ``depth``.

    Mass plus defect is exactly 1 with ``defect = (N/lam)^(depth+1)``.
    """

    def __init__(self, ifs: IfsSystem, y, lam, depth: int | None = None, report: BranchReport | None = None,
                 target_defect: float = DEFAULT_TARGET_DEFECT):
        lam = parse_lambda(lam)
        N = ifs.N
        if lam <= N:
            raise UnboundedSeriesError(
                f"lambda = {lam} <= N = {N}: the orbit series diverges, N < lambda is necessary for a bounded measure")
        self.ifs, self.lam, self.report = ifs, lam, report
        self.y = as_point(y, ifs.dim)
        self.depth = default_orbit_depth(N, lam, target_defect) if depth is None else int(depth)
        if self.depth < 0:
            raise ConfigurationError("depth must be >= 0")
        self.coeff = (lam - N) / lam
        self.defect = (Fraction(N) / lam) ** (self.depth + 1) if ex.is_exact(lam) else (N / lam) ** (self.depth + 1)
        self.in_branch_points = None
        if report is not None:
            self.in_branch_points = any(_same_point(ifs, self.y, b) for b in report.branch_points)
            if not self.in_branch_points:
                warnings.warn(f"{ex.render_point(self.y)} is not a branch point; the measure is not KMS", stacklevel=2)
        self._atoms = None

    dim = property(lambda self: self.ifs.dim)

    @property
    def exact(self) -> bool:
        return self.ifs.exact and ex.is_exact(self.lam) and ex.is_exact_point(self.y)

    @property
    def total(self):
        return 1 - self.defect

    @property
    def label(self) -> str:
        return f"mu[{','.join(ex.text(c) for c in self.y)};{ex.text(self.lam)}]"

    def atoms(self) -> DiscreteMeasure:
        if self._atoms is None:
            ifs = self.ifs
            # orbits are deterministic in (y, lam, depth), so share them across instances on one system
            cache = ifs.__dict__.setdefault("_orbit_atoms", {})
            key = (self.y, self.lam, self.depth)
            if key in cache:
                self._atoms = cache[key]
                return self._atoms
            if orbit_size(ifs.N, self.depth) > ifs.budget:
                raise BudgetError(f"orbit of depth {self.depth} exceeds the atom budget; integrate via the series")
            index = PointIndex(_tol(ifs))
            weights: list = []
            level = [self.y]
            scale = self.coeff
            for n in range(self.depth + 1):
                for p in level:
                    k, new = index.add(p)
                    if new:
                        weights.append(scale)
                    else:
                        weights[k] = weights[k] + scale
                if n < self.depth:
                    level = [g(p) for g in ifs.maps for p in level]
                    scale = scale / self.lam
            atoms = [(tuple(index[k]), w) for k, w in enumerate(weights)]
            if self.exact:
                self._atoms = DiscreteMeasure.from_exact(atoms, self.defect, "orbit")
            else:
                self._atoms = DiscreteMeasure(np.array([ex.float_point(p) for p, _ in atoms]),
                                              np.array([float(w) for _, w in atoms]), float(self.defect),
                                              0.0, None, "orbit")
            cache[key] = self._atoms
        return self._atoms

    def _series_ok(self, a: Function) -> bool:
        return self.exact and self.ifs.dim == 1 and self.ifs.affine

    def _iterates(self, pp, count: int) -> list:
        """``[pp, L pp, L^2 pp, ...]`` (``count`` entries), cached per system since they do not depend on lam."""
        cache = self.ifs.__dict__.setdefault("_transfer_iterates", {})
        seq = cache.setdefault((pp.breaks, pp.polys), [pp])
        while len(seq) < count:
            seq.append(transfer(seq[-1], self.ifs.maps).simplify())
        return seq

    def _series(self, pp, shift: int = 0) -> Any:
        """``coeff * sum_n lam^-n (L^(n + shift) pp)(y)`` for ``n = 0..depth``."""
        seq = self._iterates(pp, self.depth + 1 + shift)
        total = Fraction(0)
        scale = self.coeff
        for n in range(self.depth + 1):
            total += scale * seq[n + shift].at(self.y)
            scale = scale / self.lam
        return total

    def integrate(self, a: Function, exact: bool | None = None) -> IntegralEstimate:
        lo, hi = self.ifs.lo[0], self.ifs.hi[0]
        if exact is not False and self._series_ok(a):
            if isinstance(a, TildeFunction):
                pp = as_piecewise(a.base, lo, hi)
                if pp is not None:
                    value = self._series(pp, shift=1)
                    for c in a.report.branch_values:
                        mass = self.point_mass(c)
                        if mass:
                            value -= mass * a.jump(c)
                    return IntegralEstimate(value, float(self.defect) * (a.sup or 0.0))
            else:
                pp = as_piecewise(a, lo, hi)
                if pp is not None:
                    return IntegralEstimate(self._series(pp), float(self.defect) * (a.sup or 0.0))
        return self.atoms().integrate(a, exact)

    def level_counts(self, x) -> list[int]:
        """``#{w : |w| = n, w(y) = x}`` for ``n = 0..depth`` by backward search through inverse images."""
        ifs = self.ifs
        x = as_point(x, ifs.dim)
        counts = []
        frontier = {tuple(x): 1}
        for n in range(self.depth + 1):
            counts.append(sum(c for p, c in frontier.items() if _same_point(ifs, p, self.y)))
            if n == self.depth or not frontier:
                counts.extend([0] * (self.depth - n))
                break
            nxt: dict = {}
            for p, c in frontier.items():
                for _, z in inverse_images(ifs, p):
                    z = tuple(z)
                    nxt[z] = nxt.get(z, 0) + c
            if len(nxt) > ifs.budget:
                raise BudgetError("inverse-image search exceeds the atom budget")
            frontier = nxt
        return counts

    def point_mass(self, x, radius: float | None = None):
        if self.exact and ex.is_exact_point(as_point(x, self.ifs.dim)) and radius is None:
            total = Fraction(0)
            scale = self.coeff
            for c in self.level_counts(x):
                if c:
                    total += c * scale
                scale = scale / self.lam
            return total
        return self.atoms().point_mass(x, radius)


def _same_point(ifs: IfsSystem, p, q) -> bool:
    if ex.is_exact_point(p) and ex.is_exact_point(q):
        return tuple(p) == tuple(q)
    return float(np.linalg.norm(np.subtract(ex.float_point(p), ex.float_point(q)))) <= ifs.tolerance


def orbit_measure(ifs: IfsSystem, y, lam, depth: int | None = None, report: BranchReport | None = None,
                  target_defect: float = DEFAULT_TARGET_DEFECT) -> "KmsCandidate":
    m = OrbitMeasure(ifs, y, lam, depth, report, target_defect)
    return KmsCandidate(m.lam, "orbit", m, y=m.y)


class Mixture(Measure):
    """Convex combination of measures (weights sum to 1 within 1e-12)."""

    def __init__(self, weights: Sequence, measures: Sequence[Measure]):
        if len(weights) != len(measures) or not measures:
            raise ConfigurationError("need one weight per measure")
        if any(float(w) < 0 for w in weights):
            raise ConfigurationError("mixture weights must be nonnegative")
        if abs(float(sum(weights, 0)) - 1.0) > 1e-12:
            raise NormalizationError("mixture weights must sum to 1")
        self.weights, self.measures = tuple(weights), tuple(measures)
        self.defect = sum((w * m.defect for w, m in zip(self.weights, self.measures)), 0)
        self._atoms = None

    dim = property(lambda self: self.measures[0].dim)

    @property
    def exact(self) -> bool:
        return all(m.exact for m in self.measures) and all(ex.is_exact(w) for w in self.weights)

    @property
    def total(self):
        return sum((w * m.total for w, m in zip(self.weights, self.measures)), 0)

    def integrate(self, a: Function, exact: bool | None = None) -> IntegralEstimate:
        parts = [m.integrate(a, exact) for m in self.measures]
        vals = [p.value for p in parts]
        if all(ex.is_exact(v) for v in vals) and all(ex.is_exact(w) for w in self.weights):
            value = sum((w * v for w, v in zip(self.weights, vals)), 0)
        else:
            value = sum(float(w) * float(v) for w, v in zip(self.weights, vals))
        return IntegralEstimate(value, sum(float(w) * p.error for w, p in zip(self.weights, parts)))

    def point_mass(self, x, radius: float | None = None):
        vals = [m.point_mass(x, radius) for m in self.measures]
        if all(ex.is_exact(v) for v in vals) and all(ex.is_exact(w) for w in self.weights):
            return sum((w * v for w, v in zip(self.weights, vals)), 0)
        return sum(float(w) * float(v) for w, v in zip(self.weights, vals))

    def atoms(self) -> DiscreteMeasure:
        if self._atoms is None:
            parts = [m.atoms() for m in self.measures]
            if self.exact:
                acc: dict = {}
                for w, p in zip(self.weights, parts):
                    if not w:
                        continue
                    for x, v in p.exact_atoms:
                        acc[x] = acc.get(x, 0) + w * v
                self._atoms = DiscreteMeasure.from_exact(list(acc.items()), self.defect, "mixture")
            else:
                self._atoms = DiscreteMeasure(np.concatenate([p.points for p in parts]),
                                              np.concatenate([float(w) * p.weights
                                                              for w, p in zip(self.weights, parts)]),
                                              float(self.defect), max(p.resolution for p in parts), None, "mixture")
        return self._atoms


def mixture(weights: Sequence, measures: Sequence[Measure]) -> Mixture:
    return Mixture(weights, measures)


@dataclass
class KmsCandidate:
    """A candidate eigenmeasure with its ``lambda``; ``beta = log(lambda)``."""

    lam: Any
    kind: str
    measure: Measure
    y: tuple | None = None
    weights: tuple | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if float(self.lam) <= 0:
            raise ConfigurationError("lambda must be positive")
        if self.kind == "orbit" and float(self.lam) <= self.measure.ifs.N:
            raise UnboundedSeriesError("orbit measures need lambda > N")
        if self.weights is not None:
            if any(float(w) < 0 for w in self.weights) or abs(float(sum(self.weights, 0)) - 1.0) > 1e-12:
                raise NormalizationError("mixture weights must be nonnegative and sum to 1")

    @property
    def beta(self) -> float:
        return math.log(float(self.lam))


def measure_json(m: Measure, **meta) -> dict:
    doc = {"kind": getattr(m, "kind", type(m).__name__.lower()), "defect": ex.render(m.defect)
           if ex.is_exact(m.defect) else float(m.defect), "exact": bool(m.exact),
           "resolution": float(getattr(m, "resolution", 0.0))}
    if isinstance(m, OrbitMeasure):
        doc.update({"kind": "orbit", "lambda": ex.render(m.lam) if ex.is_exact(m.lam) else float(m.lam),
                    "root": ex.render_point(m.y), "depth": m.depth})
    doc.update(meta)
    return doc


def write_measure_csv(path: str | Path, m: Measure) -> None:
    """One atom per row: coordinates then weight (exact ``p/q`` text in exact mode)."""
    d = m.atoms()
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(d.dim)] + ["weight"])
        if d.exact:
            rows = sorted(d.exact_atoms, key=lambda a: tuple(float(c) for c in a[0]))
            for p, wt in rows:
                w.writerow([ex.text(c) for c in p] + [ex.text(wt)])
        else:
            order = np.lexsort(d.points.T[::-1])
            for k in order:
                w.writerow([format(v, ".17g") for v in d.points[k]] + [format(d.weights[k], ".17g")])
