"""Elements of X = C(C_g), the A-valued inner product, the module actions and ``a~``.

An element ``f`` of X is stored as N functions of ``y``: component ``j`` is
``y -> f(g_j(y), y)``. Two components must agree at a branch value ``y``
whenever the corresponding maps send ``y`` to the same point, otherwise the
list is not a function on the graph C_g.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import exact as ex
from .branching import BranchReport
from .errors import BranchCompatibilityError, ConfigurationError
from .functions import Composed, Function, Lambda, Product
from .ifs_core import IfsSystem
from .io import atomic_writer

DEFAULT_GRID = 4097


def _close(u, v) -> bool:
    if ex.is_exact(u) and ex.is_exact(v):
        return u == v
    return abs(complex(u) - complex(v)) <= 1e-12 * max(1.0, abs(complex(u)))


class BimoduleElement:
    """``f`` in X as its N components ``f_j(y) = f(g_j(y), y)``.

    Branch compatibility is checked at construction against ``report``.
    """

    def __init__(self, components: Sequence[Function], ifs: IfsSystem, report: BranchReport | None = None,
                 *, complex_valued: bool = False, name: str = "f", check: bool = True):
        if len(components) != ifs.N:
            raise ConfigurationError(f"expected {ifs.N} components, got {len(components)}")
        self.components = tuple(components)
        self.ifs, self.report = ifs, report
        self.complex_valued = complex_valued
        self.name = name
        if check and report is not None:
            self.check_compatible()

    @classmethod
    def from_xy(cls, fn: Callable, ifs: IfsSystem, report: BranchReport | None = None, *,
                exact_fn: Callable | None = None, name: str = "f", **kw) -> "BimoduleElement":
        """Element given as a function ``fn(x, y)`` on (float arrays of) pairs; compatible by construction."""
        comps = []
        for g in ifs.maps:
            comps.append(Lambda(lambda pts, g=g: fn(g.apply_array(pts), pts),
                                None if exact_fn is None else (lambda p, g=g: exact_fn(g(p), p)),
                                name=f"{name}_{g.label}"))
        return cls(comps, ifs, report, name=name, **kw)

    @classmethod
    def constant(cls, value, ifs: IfsSystem, report: BranchReport | None = None) -> "BimoduleElement":
        from .functions import Constant

        return cls([Constant(value) for _ in ifs.maps], ifs, report, name=f"const({value})")

    def check_compatible(self) -> None:
        for pair in self.report.pairs:
            vals = [self.components[j - 1].at(pair.y) for j in pair.J]
            for j, v in zip(pair.J[1:], vals[1:]):
                if not _close(vals[0], v):
                    raise BranchCompatibilityError(
                        f"{self.name}: components {pair.J[0]} and {j} differ at branch value "
                        f"{ex.render_point(pair.y)} ({vals[0]} != {v})")

    @property
    def N(self) -> int:
        return len(self.components)

    def values(self, pts: np.ndarray) -> np.ndarray:
        """``(N, M)`` array of component values on float points."""
        pts = np.asarray(pts, float).reshape(-1, self.ifs.dim)
        rows = [np.asarray(c(pts)) for c in self.components]
        dtype = complex if self.complex_valued or any(np.iscomplexobj(r) for r in rows) else float
        return np.array(rows, dtype=dtype)

    def at(self, j: int, y) -> object:
        return self.components[j - 1].at(y)


def _inner(f: BimoduleElement, g: BimoduleElement) -> tuple[Callable, Callable | None]:
    if f.N != g.N:
        raise ConfigurationError("elements have different numbers of components")

    def fn(pts):
        return np.sum(np.conj(f.values(pts)) * g.values(pts), axis=0)

    exact_ok = all(c.exact_capable for c in f.components + g.components)

    def exact_fn(p):
        total = 0
        for a, b in zip(f.components, g.components):
            total = total + a.at(p) * b.at(p)
        return total

    return fn, exact_fn if exact_ok and not (f.complex_valued or g.complex_valued) else None


def inner_product(f: BimoduleElement, g: BimoduleElement) -> Function:
    """``(f|g)_A(y) = sum_j conj(f_j(y)) g_j(y)``."""
    fn, exact_fn = _inner(f, g)
    return Lambda(fn, exact_fn, name=f"({f.name}|{g.name})")


def left_act(a: Function, f: BimoduleElement) -> BimoduleElement:
    """``(a.f)_j(y) = a(g_j(y)) f_j(y)``."""
    comps = [Product(Composed(a, g), c) for g, c in zip(f.ifs.maps, f.components)]
    return BimoduleElement(comps, f.ifs, f.report, complex_valued=f.complex_valued, name=f"{a.name}.{f.name}")


def right_act(f: BimoduleElement, a: Function) -> BimoduleElement:
    """``(f.a)_j(y) = f_j(y) a(y)``."""
    comps = [Product(c, a) for c in f.components]
    return BimoduleElement(comps, f.ifs, f.report, complex_valued=f.complex_valued, name=f"{f.name}.{a.name}")


@dataclass(frozen=True)
class NormEstimate:
    """``value`` is the grid maximum (a lower bound); ``upper`` adds ``lip * resolution`` when known."""

    value: float
    argmax: tuple
    resolution: float
    upper: float | None


def standard_grid(ifs: IfsSystem, n: int = DEFAULT_GRID) -> tuple[np.ndarray, float]:
    """Uniform grid on the interval, or the reference cloud in higher dimension; returns (points, resolution)."""
    if ifs.dim == 1:
        pts = np.linspace(ifs.box_lo[0], ifs.box_hi[0], n).reshape(-1, 1)
        return pts, float(ifs.box_hi[0] - ifs.box_lo[0]) / (2 * (n - 1))
    cloud = ifs.reference_cloud()
    return cloud.points, cloud.resolution


def exact_grid(ifs: IfsSystem, n: int = DEFAULT_GRID) -> list:
    """Rational grid points ``lo + k (hi - lo)/(n - 1)`` on an interval."""
    if ifs.dim != 1:
        raise ConfigurationError("exact grids are only defined on intervals")
    lo, hi = ifs.lo[0], ifs.hi[0]
    return [(lo + (hi - lo) * k / (n - 1),) for k in range(n)]


def norm2(f: BimoduleElement, grid: np.ndarray | None = None, lip: float | None = None,
          resolution: float | None = None) -> NormEstimate:
    """``max_y sqrt(sum_j |f_j(y)|^2)`` over the grid."""
    if grid is None:
        grid, resolution = standard_grid(f.ifs)
    grid = np.asarray(grid, float).reshape(-1, f.ifs.dim)
    if resolution is None:
        resolution = 0.0
    vals = np.sqrt(np.sum(np.abs(f.values(grid)) ** 2, axis=0))
    k = int(np.argmax(vals))
    value = float(vals[k])
    return NormEstimate(value, tuple(grid[k]), resolution, None if lip is None else value + lip * resolution)


class TildeFunction(Function):
    """``a~(y) = sum over distinct x in g(y) of a(x)``.

    Off the branch values this is ``sum_j a(g_j(y))``; at a branch value the
    coinciding images are counted once.
    """

    def __init__(self, a: Function, ifs: IfsSystem, report: BranchReport):
        self.base, self.ifs, self.report = a, ifs, report
        self.exact_capable = a.exact_capable and ifs.exact
        self.sup = None if a.sup is None else ifs.N * a.sup
        self.lip = None
        self.name = f"{a.name}~"
        self._values = tuple(report.branch_values)

    def images(self, y) -> list:
        """Distinct points of ``g(y)``."""
        out = []
        for g in self.ifs.maps:
            x = g(y)
            if not any(_same(self.ifs, x, z) for z in out):
                out.append(x)
        return out

    def __call__(self, pts):
        pts = np.asarray(pts, float).reshape(-1, self.ifs.dim)
        total = sum(self.base(g.apply_array(pts)) for g in self.ifs.maps)
        for c in self._values:
            fc = np.array(ex.float_point(c))
            hit = np.linalg.norm(pts - fc, axis=1) <= self.ifs.tolerance
            if hit.any():
                collapsed = sum(float(np.real(self.base(np.array([ex.float_point(x)]))[0]))
                                for x in self.images(c))
                total = np.where(hit, collapsed, total)
        return total

    def at(self, p):
        if self.exact_capable and ex.is_exact_point(p):
            if any(p == c for c in self._values):
                return sum((self.base.at(x) for x in self.images(p)), 0)
            return sum((self.base.at(g(p)) for g in self.ifs.maps), 0)
        return float(self(np.asarray([ex.float_point(p)]))[0])

    def jump(self, c) -> object:
        """``sum_j a(g_j(c)) - a~(c)``: the gap between the continuous sum and ``a~`` at ``c``."""
        full = sum((self.base.at(g(c)) for g in self.ifs.maps), 0)
        return full - self.at(c)


def _same(ifs: IfsSystem, p, q) -> bool:
    if ex.is_exact_point(p) and ex.is_exact_point(q):
        return tuple(p) == tuple(q)
    return float(np.linalg.norm(np.subtract(ex.float_point(p), ex.float_point(q)))) <= ifs.tolerance


def tilde(a: Function, report: BranchReport, ifs: IfsSystem) -> TildeFunction:
    return TildeFunction(a, ifs, report)


def write_element_csv(path: str | Path, f: BimoduleElement, grid: np.ndarray | None = None) -> None:
    if grid is None:
        grid, _ = standard_grid(f.ifs)
    grid = np.asarray(grid, float).reshape(-1, f.ifs.dim)
    vals = f.values(grid)
    cplx = np.iscomplexobj(vals)
    header = [f"y{i + 1}" for i in range(f.ifs.dim)]
    for j in range(f.N):
        header += [f"f{j + 1}_re", f"f{j + 1}_im"] if cplx else [f"f{j + 1}"]
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, y in enumerate(grid):
            row = [format(v, ".17g") for v in y]
            for j in range(f.N):
                v = vals[j, k]
                row += [format(v.real, ".17g"), format(v.imag, ".17g")] if cplx else [format(v, ".17g")]
            w.writerow(row)


def read_element_csv(path: str | Path, ifs: IfsSystem, report: BranchReport | None = None,
                     check: bool = False) -> BimoduleElement:
    """Sampled element: linear interpolation on intervals, nearest grid point otherwise."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
    d = ifs.dim
    grid = data[:, :d]
    cplx = any(h.endswith("_im") for h in header)
    cols = []
    for j in range(ifs.N):
        if cplx:
            cols.append(data[:, d + 2 * j] + 1j * data[:, d + 2 * j + 1])
        else:
            cols.append(data[:, d + j])
    comps = []
    if d == 1:
        order = np.argsort(grid[:, 0])
        xs = grid[order, 0]
        for col in cols:
            col = col[order]
            comps.append(Lambda(lambda p, col=col: (np.interp(p[:, 0], xs, col.real)
                                                    + (1j * np.interp(p[:, 0], xs, col.imag) if cplx else 0))))
    else:
        tree = cKDTree(grid)
        for col in cols:
            comps.append(Lambda(lambda p, col=col: col[tree.query(p)[1]]))
    return BimoduleElement(comps, ifs, report, complex_valued=cplx, check=check, name=Path(path).stem)
