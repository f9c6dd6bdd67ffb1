"""Proper contractions, IFS systems, attractor clouds, self-similarity and OSC checks.

Points are tuples. Exact systems (rational or Q(sqrt 3) entries) keep exact
tuples all the way through :func:`apply_word`; clouds are always float
``(M, d)`` arrays.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import exact as ex
from .errors import (
    BudgetError,
    ConfigurationError,
    NotAProperContractionError,
)

ATOM_BUDGET = 2 ** 22
NEAR_UNIT_RATIO = 0.95

Point = tuple
Word = tuple


def as_point(y: Any, dim: int | None = None) -> Point:
    """Normalise a scalar or sequence to a point tuple; ints become Fractions."""
    if isinstance(y, np.ndarray):
        y = tuple(y.tolist())
    if not isinstance(y, (tuple, list)):
        y = (y,)
    out = tuple(ex.exact(c) if isinstance(c, int) and not isinstance(c, bool) else c for c in y)
    if dim is not None and len(out) != dim:
        raise ConfigurationError(f"point {y!r} has dimension {len(out)}, expected {dim}")
    return out


@dataclass(frozen=True)
class RatioBounds:
    """Two-sided Lipschitz bounds ``c1 * d(y, y') <= d(g y, g y') <= c2 * d(y, y')``."""

    c1: float
    c2: float
    estimated: bool = False

    @property
    def passed(self) -> bool:
        return 0.0 < self.c1 <= self.c2 < 1.0

    @property
    def near_unit(self) -> bool:
        return self.c2 >= NEAR_UNIT_RATIO

    def __iter__(self):
        return iter((self.c1, self.c2))


class ContractionMap:
    """An affine map ``y -> A y + t`` or a user callable on float arrays.

    Affine maps with exact entries (ints, Fractions, :class:`QSqrt3`) act
    exactly on exact points and in float on everything else.
    """

    def __init__(self, matrix=None, translation=None, *, func: Callable | None = None,
                 inverse: Callable | None = None, dim: int | None = None,
                 ratios: RatioBounds | None = None, label: int = 1, validate: bool = True):
        self.label = label
        self.func = func
        self._inverse_func = inverse
        if func is None:
            if matrix is None or translation is None:
                raise ConfigurationError("affine map needs matrix and translation")
            rows = [list(r) if isinstance(r, (list, tuple)) else [r] for r in matrix] \
                if isinstance(matrix, (list, tuple)) else [[matrix]]
            trans = list(translation) if isinstance(translation, (list, tuple)) else [translation]
            d = len(trans)
            if len(rows) != d or any(len(r) != d for r in rows):
                raise ConfigurationError("matrix must be square and match the translation length")
            self.dim = d
            self.exact = all(ex.is_exact(v) for r in rows for v in r) and all(ex.is_exact(v) for v in trans)
            if self.exact:
                self.matrix = tuple(tuple(ex.exact(v) for v in r) for r in rows)
                self.translation = tuple(ex.exact(v) for v in trans)
            else:
                self.matrix = tuple(tuple(float(v) for v in r) for r in rows)
                self.translation = tuple(float(v) for v in trans)
            self.A = np.array([[float(v) for v in r] for r in self.matrix])
            self.t = np.array([float(v) for v in self.translation])
            self._exact_inverse = None
            self.ratios = contraction_ratios(self)
        else:
            if dim is None:
                raise ConfigurationError("callable maps need an explicit dimension")
            self.dim = dim
            self.exact = False
            self.matrix = self.translation = None
            self.A = self.t = None
            self.ratios = ratios
        if validate and self.ratios is not None and not self.ratios.passed:
            raise NotAProperContractionError(
                f"map {label}: ratio bounds ({self.ratios.c1:.6g}, {self.ratios.c2:.6g}) not inside (0, 1)")

    @property
    def affine(self) -> bool:
        return self.func is None

    def __call__(self, p: Sequence) -> Point:
        if self.exact and ex.is_exact_point(p):
            m, t = self.matrix, self.translation
            if self.dim == 1:
                return (m[0][0] * p[0] + t[0],)
            if self.dim == 2:
                x, y = p
                return (m[0][0] * x + m[0][1] * y + t[0], m[1][0] * x + m[1][1] * y + t[1])
            return tuple(sum((m[r][c] * p[c] for c in range(self.dim)), t[r]) for r in range(self.dim))
        out = self.apply_array(np.asarray([ex.float_point(p)]))[0]
        return tuple(float(v) for v in out)

    def apply_array(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        if self.func is not None:
            return np.asarray(self.func(pts), dtype=float).reshape(-1, self.dim)
        return pts @ self.A.T + self.t

    def inverse_array(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        if self.func is not None:
            if self._inverse_func is None:
                raise ConfigurationError(f"map {self.label} has no inverse")
            return np.asarray(self._inverse_func(pts), dtype=float).reshape(-1, self.dim)
        return np.linalg.solve(self.A, (pts - self.t).T).T

    def inverse(self, p: Sequence) -> Point:
        """Preimage of ``p`` under this (injective) map."""
        if self.exact and ex.is_exact_point(p):
            if self._exact_inverse is None:
                self._exact_inverse = ex.inverse(self.matrix)
            inv = self._exact_inverse
            q = [p[i] - self.translation[i] for i in range(self.dim)]
            return tuple(sum((inv[r][c] * q[c] for c in range(self.dim)), ex.Fraction(0))
                         for r in range(self.dim))
        return tuple(float(v) for v in self.inverse_array(np.asarray([ex.float_point(p)]))[0])

    def to_json(self) -> dict:
        if not self.affine:
            raise ConfigurationError("callable maps cannot be serialised")
        if self.exact:
            return {"matrix": [[ex.render(v) for v in r] for r in self.matrix],
                    "translation": [ex.render(v) for v in self.translation]}
        return {"matrix": self.A.tolist(), "translation": self.t.tolist()}

    def __repr__(self):
        if self.affine:
            return f"ContractionMap({self.matrix!r}, {self.translation!r}, label={self.label})"
        return f"ContractionMap(func={self.func!r}, label={self.label})"


def contraction_ratios(g: ContractionMap, box: tuple | None = None, samples: int = 2000,
                       seed: int = 0) -> RatioBounds:
    """Singular-value bounds of an affine map; sampled difference quotients for callables."""
    if g.func is None:
        s = np.linalg.svd(g.A, compute_uv=False)
        c1, c2 = float(s.min()), float(s.max())
        if c1 <= 1e-15 * max(c2, 1.0):
            raise NotAProperContractionError(f"map {g.label} is singular")
        return RatioBounds(c1, c2)
    if box is None:
        raise ConfigurationError("ratio estimation for a callable map needs the ambient box")
    lo, hi = (np.asarray([float(v) for v in b]) for b in box)
    rng = np.random.default_rng(seed)
    p = lo + (hi - lo) * rng.random((samples, g.dim))
    q = lo + (hi - lo) * rng.random((samples, g.dim))
    num = np.linalg.norm(g.apply_array(p) - g.apply_array(q), axis=1)
    den = np.linalg.norm(p - q, axis=1)
    keep = den > 1e-12
    ratio = num[keep] / den[keep]
    return RatioBounds(float(ratio.min()), float(ratio.max()), estimated=True)


class IfsSystem:
    """The tuple of maps together with the ambient box and a membership test for K.

    ``membership`` decides ``y in K``. Presets supply an exact predicate; for
    other systems membership falls back to distance from a reference cloud.
    """

    def __init__(self, maps: Sequence[ContractionMap], lo: Sequence, hi: Sequence, *,
                 name: str | None = None, membership: Callable[[Point], bool] | None = None,
                 budget: int = ATOM_BUDGET):
        maps = list(maps)
        if len(maps) < 2:
            raise ConfigurationError("an IFS needs at least two maps")
        self.lo = as_point(lo)
        self.hi = as_point(hi)
        d = len(self.lo)
        if len(self.hi) != d or any(m.dim != d for m in maps):
            raise ConfigurationError("maps and box disagree on the dimension")
        self.box_lo = np.array([float(v) for v in self.lo])
        self.box_hi = np.array([float(v) for v in self.hi])
        if np.any(self.box_hi <= self.box_lo):
            raise ConfigurationError("empty ambient box")
        for j, m in enumerate(maps, start=1):
            m.label = j
            if m.ratios is None:
                m.ratios = contraction_ratios(m, box=(self.lo, self.hi))
                if not m.ratios.passed:
                    raise NotAProperContractionError(f"map {j} is not a proper contraction")
        self.maps = tuple(maps)
        self.name = name
        self.budget = budget
        self._membership = membership
        self._reference = None

    @property
    def N(self) -> int:
        return len(self.maps)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def exact(self) -> bool:
        return all(m.exact for m in self.maps) and ex.is_exact_point(self.lo) and ex.is_exact_point(self.hi)

    @property
    def affine(self) -> bool:
        return all(m.affine for m in self.maps)

    @property
    def diam(self) -> float:
        return float(np.linalg.norm(self.box_hi - self.box_lo))

    @property
    def c2_max(self) -> float:
        return max(m.ratios.c2 for m in self.maps)

    @property
    def c1_min(self) -> float:
        return min(m.ratios.c1 for m in self.maps)

    @property
    def center(self) -> Point:
        if ex.is_exact_point(self.lo) and ex.is_exact_point(self.hi):
            return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))
        return tuple(float(v) for v in (self.box_lo + self.box_hi) / 2)

    @property
    def tolerance(self) -> float:
        """Float-mode collision tolerance."""
        return 1e-9 * self.diam

    @property
    def membership_exact(self) -> bool:
        return self._membership is not None

    def reference_cloud(self) -> "Cloud":
        if self._reference is None:
            depth = max(1, int(math.log(2 ** 16) / math.log(self.N)))
            self._reference = attractor_approx(self, depth)
            self._tree = cKDTree(self._reference.points)
        return self._reference

    def contains(self, p: Sequence) -> bool:
        """``p in K``; exact for presets, cloud-tolerance otherwise."""
        if self._membership is not None:
            return bool(self._membership(p))
        fp = np.array(ex.float_point(p))
        if np.any(fp < self.box_lo - self.tolerance) or np.any(fp > self.box_hi + self.tolerance):
            return False
        cloud = self.reference_cloud()
        dist, _ = self._tree.query(fp)
        return bool(dist <= 2 * cloud.resolution + self.tolerance)

    def to_json(self) -> dict:
        doc = {"dimension": self.dim, "maps": [m.to_json() for m in self.maps],
               "box": {"lo": ex.render_point(self.lo), "hi": ex.render_point(self.hi)},
               "rational": self.exact}
        if self.name:
            doc["name"] = self.name
        return doc

    def __repr__(self):
        return f"IfsSystem(name={self.name!r}, N={self.N}, dim={self.dim}, exact={self.exact})"


def load_ifs(source: str | Path | dict) -> IfsSystem:
    """Build an :class:`IfsSystem` from the JSON schema (a path, JSON text or a parsed dict)."""
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        try:
            doc = json.loads(Path(text).read_text()) if not text.lstrip().startswith("{") else json.loads(text)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read IFS description: {exc}") from exc
    try:
        dim = int(doc["dimension"])
        rational = bool(doc.get("rational", False))
        conv = ex.exact if rational else float
        maps = []
        for k, m in enumerate(doc["maps"], start=1):
            mat = [[conv(v) for v in row] for row in m["matrix"]]
            tr = [conv(v) for v in m["translation"]]
            if len(tr) != dim:
                raise ConfigurationError(f"map {k}: translation has wrong dimension")
            maps.append(ContractionMap(mat, tr, label=k))
        lo = [conv(v) for v in doc["box"]["lo"]]
        hi = [conv(v) for v in doc["box"]["hi"]]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"malformed IFS description: {exc}") from exc
    if len(lo) != dim or len(hi) != dim:
        raise ConfigurationError("box dimension mismatch")
    return IfsSystem(maps, lo, hi, name=doc.get("name"))


def apply_word(ifs: IfsSystem, w: Iterable[int], y: Any) -> Point:
    """``g_{j1} o ... o g_{jn}(y)``; letters are 1-based and the last letter acts first."""
    w = tuple(w)
    p = as_point(y, ifs.dim)
    for j in reversed(w):
        if not 1 <= j <= ifs.N:
            raise IndexError(f"letter {j} outside 1..{ifs.N}")
        p = ifs.maps[j - 1](p)
    return p


def word_at(index: int, depth: int, n_maps: int) -> Word:
    """Lexicographic position ``index`` among the words of length ``depth``."""
    letters = []
    for _ in range(depth):
        index, r = divmod(index, n_maps)
        letters.append(r + 1)
    return tuple(reversed(letters))


@dataclass
class Cloud:
    """Float point cloud; row ``i`` is generated by ``word_at(i, depth, n_maps)``."""

    points: np.ndarray
    resolution: float = 0.0
    depth: int | None = None
    n_maps: int | None = None

    def __len__(self):
        return len(self.points)

    def word(self, i: int) -> Word:
        if self.depth is None:
            return ()
        return word_at(i, self.depth, self.n_maps)


def attractor_approx(ifs: IfsSystem, depth: int, seed: Any = None, budget: int | None = None) -> Cloud:
    """All depth-``depth`` images of ``seed``, ordered lexicographically by word."""
    if depth < 1:
        raise ConfigurationError("depth must be >= 1")
    budget = ifs.budget if budget is None else budget
    if ifs.N ** depth > budget:
        raise BudgetError(f"{ifs.N}^{depth} points exceed the budget {budget}; use chaos_game sampling")
    seed = ifs.center if seed is None else as_point(seed, ifs.dim)
    pts = np.asarray([ex.float_point(seed)])
    for _ in range(depth):
        pts = np.concatenate([m.apply_array(pts) for m in ifs.maps])
    return Cloud(pts, ifs.diam * ifs.c2_max ** depth, depth, ifs.N)


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, float).reshape(len(a), -1)
    b = np.asarray(b, float).reshape(len(b), -1)
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


@dataclass(frozen=True)
class SelfSimilarity:
    passed: bool
    defect: float
    resolution: float
    eps: float


def check_self_similar(ifs: IfsSystem, cloud: Cloud | np.ndarray, eps: float) -> SelfSimilarity:
    """Hausdorff defect between a cloud and the union of its images."""
    if not isinstance(cloud, Cloud):
        cloud = Cloud(np.asarray(cloud, float).reshape(-1, ifs.dim))
    if len(cloud) == 0:
        raise ConfigurationError("empty cloud")
    images = np.concatenate([m.apply_array(cloud.points) for m in ifs.maps])
    defect = hausdorff(cloud.points, images)
    return SelfSimilarity(defect <= eps + cloud.resolution, defect, cloud.resolution, eps)


@dataclass(frozen=True)
class OpenSet:
    """Open set given by a vectorised membership predicate and a sampler."""

    contains: Callable[[np.ndarray], np.ndarray]
    sample: Callable[[np.random.Generator, int], np.ndarray]
    name: str = "V"


def open_interval(lo: float, hi: float, margin: float = 0.0) -> OpenSet:
    lo, hi = float(lo), float(hi)

    def contains(p):
        x = np.asarray(p, float)[:, 0]
        return (x > lo + margin) & (x < hi - margin)

    def sample(rng, n):
        x = lo + (hi - lo) * rng.random(n)
        x = x[(x > lo) & (x < hi)]
        return x.reshape(-1, 1)

    return OpenSet(contains, sample, f"({lo:g}, {hi:g})")


@dataclass(frozen=True)
class OscVerdict:
    passed: bool
    samples: int
    containment_witness: tuple | None = None
    overlap_witness: tuple | None = None


def check_open_set_condition(ifs: IfsSystem, V: OpenSet, samples: int, seed: int = 0) -> OscVerdict:
    """Sampled search for a violation of the open set condition.

    Sound for FAIL: every reported witness is a sampled point. A PASS only
    means no witness was found among ``samples`` points.
    """
    rng = np.random.default_rng(seed)
    try:
        pts = np.asarray(V.sample(rng, samples), float).reshape(-1, ifs.dim)
    except Exception as exc:  # noqa: BLE001 - any sampler failure is a configuration problem
        raise ConfigurationError(f"sampler for {V.name} failed: {exc}") from exc
    if len(pts) == 0 or not np.all(V.contains(pts)):
        raise ConfigurationError(f"sampler for {V.name} produced points outside the set")
    images = [m.apply_array(pts) for m in ifs.maps]
    for j, img in enumerate(images, start=1):
        bad = ~V.contains(img)
        if bad.any():
            i = int(np.argmax(bad))
            return OscVerdict(False, len(pts), containment_witness=(j, tuple(pts[i]), tuple(img[i])))
    for j, img in enumerate(images, start=1):
        for jj, other in enumerate(ifs.maps, start=1):
            if jj == j:
                continue
            pre = other.inverse_array(img)
            hit = V.contains(pre)
            if hit.any():
                i = int(np.argmax(hit))
                return OscVerdict(False, len(pts), overlap_witness=(j, jj, tuple(img[i])))
    return OscVerdict(True, len(pts))


def write_cloud_csv(path: str | Path, cloud: Cloud) -> None:
    from .io import atomic_writer

    d = cloud.points.shape[1]
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(d)] + ["word"])
        for i, p in enumerate(cloud.points):
            w.writerow([format(float(v), ".17g") for v in p] + [".".join(map(str, cloud.word(i)))])


__all__ = [
    "ATOM_BUDGET", "Cloud", "ContractionMap", "IfsSystem", "OpenSet", "OscVerdict", "RatioBounds",
    "SelfSimilarity", "apply_word", "as_point", "attractor_approx", "check_open_set_condition",
    "check_self_similar", "contraction_ratios", "hausdorff", "load_ifs", "open_interval",
    "word_at", "write_cloud_csv",
]
