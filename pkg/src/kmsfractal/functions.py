"""Scalar functions on the ambient box (elements of A = C(K) and test functions).

Every function evaluates vectorised on float ``(M, d)`` arrays via
``__call__``. Polynomials and 1-D piecewise polynomials also evaluate
exactly at exact points via :meth:`Function.at`, and piecewise polynomials
are closed under composition with 1-D affine maps, which is what lets the
transfer operator act on them without enumerating orbits.
"""

from __future__ import annotations

import bisect
import math
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from . import exact as ex


class Function:
    """Base class. ``sup``/``lip`` are known bounds on |f| and its Lipschitz constant."""

    exact_capable = False
    sup: float | None = None
    lip: float | None = None
    name: str = "f"

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def at(self, p: Sequence) -> Any:
        return self(np.asarray([ex.float_point(p)], float))[0]

    def __mul__(self, other):
        if isinstance(other, Function):
            return Product(self, other)
        return Scaled(self, other)

    __rmul__ = __mul__

    def __add__(self, other):
        return Sum(self, other)

    def __neg__(self):
        return Scaled(self, -1)

    def __sub__(self, other):
        return Sum(self, Scaled(other, -1))


def _as_array(pts, dim=None) -> np.ndarray:
    pts = np.asarray(pts, float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if dim in (None, 1) else pts.reshape(-1, dim)
    return pts


class Lambda(Function):
    """Wrap a vectorised callable; ``exact_fn`` optionally handles exact points."""

    def __init__(self, fn: Callable, exact_fn: Callable | None = None, sup=None, lip=None, name="f"):
        self.fn, self.exact_fn, self.sup, self.lip, self.name = fn, exact_fn, sup, lip, name
        self.exact_capable = exact_fn is not None

    def __call__(self, pts):
        pts = _as_array(pts)
        return np.broadcast_to(np.asarray(self.fn(pts)), (len(pts),)).copy()

    def at(self, p):
        if self.exact_fn is not None and ex.is_exact_point(p):
            return self.exact_fn(tuple(p))
        return super().at(p)


class Constant(Function):
    exact_capable = True

    def __init__(self, value=1, name=None):
        self.value = value
        self.sup, self.lip = abs(float(value)), 0.0
        self.name = name or f"const({value})"

    def __call__(self, pts):
        return np.full(len(_as_array(pts)), float(self.value) if not isinstance(self.value, complex) else self.value)

    def at(self, p):
        return self.value if ex.is_exact_point(p) else float(self.value)


class Scaled(Function):
    def __init__(self, f: Function, c):
        self.f, self.c = f, c
        self.exact_capable = f.exact_capable and ex.is_exact(c)
        self.sup = None if f.sup is None else abs(float(c)) * f.sup
        self.lip = None if f.lip is None else abs(float(c)) * f.lip
        self.name = f"{c}*{f.name}"

    def __call__(self, pts):
        return float(self.c) * self.f(pts) if ex.is_exact(self.c) else self.c * self.f(pts)

    def at(self, p):
        v = self.f.at(p)
        return self.c * v if ex.is_exact(v) and ex.is_exact(self.c) else float(self.c) * float(v)


class Sum(Function):
    def __init__(self, f: Function, g: Function):
        self.f, self.g = f, g
        self.exact_capable = f.exact_capable and g.exact_capable
        self.sup = None if f.sup is None or g.sup is None else f.sup + g.sup
        self.lip = None if f.lip is None or g.lip is None else f.lip + g.lip
        self.name = f"({f.name}+{g.name})"

    def __call__(self, pts):
        return self.f(pts) + self.g(pts)

    def at(self, p):
        a, b = self.f.at(p), self.g.at(p)
        return a + b if ex.is_exact(a) and ex.is_exact(b) else float(a) + float(b)


class Product(Function):
    def __init__(self, f: Function, g: Function):
        self.f, self.g = f, g
        self.exact_capable = f.exact_capable and g.exact_capable
        if f.sup is not None and g.sup is not None:
            self.sup = f.sup * g.sup
            if f.lip is not None and g.lip is not None:
                self.lip = f.sup * g.lip + g.sup * f.lip
        self.name = f"{f.name}*{g.name}"

    def __call__(self, pts):
        return self.f(pts) * self.g(pts)

    def at(self, p):
        a, b = self.f.at(p), self.g.at(p)
        return a * b if ex.is_exact(a) and ex.is_exact(b) else float(a) * float(b)


class Composed(Function):
    """``y -> f(g(y))`` for a contraction ``g``; this is the pull-back ``g^* f``."""

    def __init__(self, f: Function, g):
        self.f, self.g = f, g
        self.exact_capable = f.exact_capable and getattr(g, "exact", False)
        self.sup = f.sup
        self.lip = None if f.lip is None or g.ratios is None else f.lip * g.ratios.c2
        self.name = f"{f.name}o g{getattr(g, 'label', '')}"

    def __call__(self, pts):
        return self.f(self.g.apply_array(_as_array(pts, self.g.dim)))

    def at(self, p):
        if ex.is_exact_point(p) and getattr(self.g, "exact", False):
            return self.f.at(self.g(p))
        return self.f(self.g.apply_array(np.asarray([ex.float_point(p)], float)))[0]


class Polynomial(Function):
    """``sum c_e * prod x_i**e_i`` with exact coefficients keyed by exponent tuples."""

    exact_capable = True

    def __init__(self, coeffs: dict[tuple[int, ...], Any], dim: int | None = None, sup=None, lip=None,
                 name="poly"):
        coeffs = {tuple(k): ex.exact(v) for k, v in coeffs.items() if v != 0}
        self.dim = dim if dim is not None else (len(next(iter(coeffs))) if coeffs else 1)
        self.coeffs = coeffs
        self.sup, self.lip, self.name = sup, lip, name
        self._exps = np.array(list(coeffs) or [(0,) * self.dim], dtype=int).reshape(-1, self.dim)
        self._c = np.array([float(v) for v in coeffs.values()] or [0.0])

    @classmethod
    def univariate(cls, coeffs: Sequence, **kw) -> "Polynomial":
        return cls({(k,): c for k, c in enumerate(coeffs)}, dim=1, **kw)

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.coeffs), default=0)

    def __call__(self, pts):
        pts = _as_array(pts, self.dim)
        top = int(self._exps.max()) if self._exps.size else 0
        mon = np.ones((len(pts), len(self._exps)))
        for d in range(self.dim):
            powers = pts[:, d:d + 1] ** np.arange(top + 1)
            mon *= powers[:, self._exps[:, d]]
        return mon @ self._c

    def at(self, p):
        if not ex.is_exact_point(p):
            return float(self(np.asarray([ex.float_point(p)]))[0])
        total = Fraction(0)
        for e, c in self.coeffs.items():
            term = c
            for xi, k in zip(p, e):
                if k:
                    term = term * xi ** k
            total = total + term
        return total

    def to_piecewise(self, lo, hi) -> "PiecewisePolynomial":
        if self.dim != 1:
            raise ValueError("only univariate polynomials convert to piecewise form")
        deg = self.degree
        c = tuple(self.coeffs.get((k,), Fraction(0)) for k in range(deg + 1))
        return PiecewisePolynomial((ex.exact(lo), ex.exact(hi)), (c,), sup=self.sup, lip=self.lip, name=self.name)


def _trim(c: Sequence) -> tuple:
    c = list(c)
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return tuple(c)


def _poly_add(a: Sequence, b: Sequence) -> tuple:
    n = max(len(a), len(b))
    z = Fraction(0)
    return _trim([(a[k] if k < len(a) else z) + (b[k] if k < len(b) else z) for k in range(n)])


def _poly_mul(a: Sequence, b: Sequence) -> tuple:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for k, y in enumerate(b):
                out[i + k] += x * y
    return _trim(out)


def _poly_compose_affine(c: Sequence, s, t) -> tuple:
    """Coefficients of ``p(s*x + t)``."""
    out = [Fraction(0)] * len(c)
    for k, ck in enumerate(c):
        if not ck:
            continue
        for i in range(k + 1):
            out[i] += ck * math.comb(k, i) * s ** i * t ** (k - i)
    return _trim(out)


def _horner(c: Sequence, x):
    acc = c[-1]
    for v in reversed(c[:-1]):
        acc = acc * x + v
    return acc


class PiecewisePolynomial(Function):
    """Univariate function equal to ``polys[k]`` (ascending powers of x) on ``[breaks[k], breaks[k+1]]``.

    Breakpoints and coefficients are exact. At an interior breakpoint the
    right-hand piece is used; for continuous functions both agree.
    """

    exact_capable = True

    def __init__(self, breaks: Sequence, polys: Sequence[Sequence], sup=None, lip=None, name="pp"):
        breaks = tuple(ex.exact(b) for b in breaks)
        polys = tuple(_trim([ex.exact(v) for v in c]) for c in polys)
        if len(polys) != len(breaks) - 1 or any(b >= a for a, b in zip(breaks[1:], breaks[:-1])):
            raise ValueError("breakpoints must be increasing with one polynomial per interval")
        self.breaks, self.polys = breaks, polys
        self.sup, self.lip, self.name = sup, lip, name
        self._fb = np.array([float(b) for b in breaks])
        deg = max(len(c) for c in polys)
        self._cf = np.zeros((len(polys), deg))
        for k, c in enumerate(polys):
            self._cf[k, :len(c)] = [float(v) for v in c]

    @property
    def lo(self):
        return self.breaks[0]

    @property
    def hi(self):
        return self.breaks[-1]

    def _piece(self, x) -> int:
        k = bisect.bisect_right(self.breaks, x) - 1
        return min(max(k, 0), len(self.polys) - 1)

    def __call__(self, pts):
        x = _as_array(pts)[:, 0]
        k = np.clip(np.searchsorted(self._fb, x, side="right") - 1, 0, len(self.polys) - 1)
        cf = self._cf[k]
        acc = cf[:, -1].copy()
        for j in range(cf.shape[1] - 2, -1, -1):
            acc = acc * x + cf[:, j]
        return acc

    def at(self, p):
        x = p[0] if isinstance(p, (tuple, list)) else p
        if not ex.is_exact(x):
            return float(self(np.asarray([[float(x)]]))[0])
        return _horner(self.polys[self._piece(x)], x)

    def simplify(self) -> "PiecewisePolynomial":
        breaks, polys = [self.breaks[0]], []
        for k, c in enumerate(self.polys):
            if polys and polys[-1] == c:
                breaks[-1] = self.breaks[k + 1]
            else:
                polys.append(c)
                breaks.append(self.breaks[k + 1])
        return PiecewisePolynomial(breaks, polys, self.sup, self.lip, self.name)

    def _on_breaks(self, breaks: Sequence, fn) -> "PiecewisePolynomial":
        polys = [fn((a + b) / 2) for a, b in zip(breaks[:-1], breaks[1:])]
        return PiecewisePolynomial(breaks, polys, name=self.name).simplify()

    def _merged_breaks(self, other: "PiecewisePolynomial") -> list:
        if (self.lo, self.hi) != (other.lo, other.hi):
            raise ValueError("piecewise polynomials live on different intervals")
        return sorted(set(self.breaks) | set(other.breaks))

    def __add__(self, other):
        if not isinstance(other, PiecewisePolynomial):
            return super().__add__(other)
        br = self._merged_breaks(other)
        return self._on_breaks(br, lambda m: _poly_add(self.polys[self._piece(m)], other.polys[other._piece(m)]))

    def __mul__(self, other):
        if isinstance(other, PiecewisePolynomial):
            br = self._merged_breaks(other)
            out = self._on_breaks(
                br, lambda m: _poly_mul(self.polys[self._piece(m)], other.polys[other._piece(m)]))
            out.sup = None if self.sup is None or other.sup is None else self.sup * other.sup
            out.name = f"{self.name}*{other.name}"
            return out
        if ex.is_exact(other):
            return PiecewisePolynomial(self.breaks, [tuple(other * v for v in c) for c in self.polys],
                                       None if self.sup is None else abs(float(other)) * self.sup,
                                       None if self.lip is None else abs(float(other)) * self.lip,
                                       self.name)
        return super().__mul__(other)

    __rmul__ = __mul__

    def compose_affine(self, s, t) -> "PiecewisePolynomial":
        """``x -> self(s*x + t)`` on the same interval, assuming ``s*x + t`` stays inside it."""
        lo, hi = self.lo, self.hi
        br = {lo, hi}
        for b in self.breaks[1:-1]:
            x = (b - t) / s
            if lo < x < hi:
                br.add(x)
        br = sorted(br)
        return self._on_breaks(br, lambda m: _poly_compose_affine(self.polys[self._piece(s * m + t)], s, t))


def hat(center, half_width, lo=0, hi=1, height=1) -> PiecewisePolynomial:
    """Piecewise-linear bump of the given height, clipped to ``[lo, hi]``."""
    c, w, lo, hi, h = (ex.exact(v) for v in (center, half_width, lo, hi, height))
    pts = sorted({lo, hi} | {v for v in (c - w, c, c + w) if lo < v < hi})

    def value(x):
        return max(Fraction(0), h * (1 - abs(x - c) / w))

    return linear_interpolant(pts, [value(x) for x in pts], sup=float(h), lip=float(h / w), name=f"hat({c},{w})")


def linear_interpolant(xs: Sequence, ys: Sequence, sup=None, lip=None, name="pl") -> PiecewisePolynomial:
    xs = [ex.exact(v) for v in xs]
    ys = [ex.exact(v) for v in ys]
    polys = []
    for (x0, y0), (x1, y1) in zip(zip(xs, ys), zip(xs[1:], ys[1:])):
        slope = (y1 - y0) / (x1 - x0)
        polys.append((y0 - slope * x0, slope))
    if sup is None:
        sup = max(abs(float(v)) for v in ys)
    if lip is None:
        lip = max((abs(float(p[1])) for p in polys), default=0.0)
    return PiecewisePolynomial(xs, polys, sup=sup, lip=lip, name=name)


def distance_to_points(points: Sequence, lo, hi) -> PiecewisePolynomial:
    """``x -> min_b |x - b|`` on ``[lo, hi]`` (1-D, exact)."""
    lo, hi = ex.exact(lo), ex.exact(hi)
    bs = sorted(ex.exact(p[0] if isinstance(p, (tuple, list)) else p) for p in points)
    knots = {lo, hi} | {b for b in bs if lo < b < hi}
    knots |= {(a + b) / 2 for a, b in zip(bs, bs[1:])}
    xs = sorted(knots)
    ys = [min(abs(x - b) for b in bs) for x in xs]
    return linear_interpolant(xs, ys, lip=1.0, name="dist_B")


class Cone(Function):
    """``max(0, 1 - |p - q| / r)``; float-only."""

    def __init__(self, center: Sequence, radius: float, height: float = 1.0):
        self.q = np.asarray([float(c) for c in center])
        self.r, self.h = float(radius), float(height)
        self.sup, self.lip = abs(self.h), abs(self.h) / self.r
        self.name = f"cone({', '.join(f'{v:.3g}' for v in self.q)};{self.r:.3g})"

    def __call__(self, pts):
        pts = _as_array(pts, len(self.q))
        diff = pts - self.q
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return self.h * np.maximum(0.0, 1.0 - d / self.r)


def squared_distance_product(points: Sequence, dim: int) -> Polynomial:
    """``prod_b |p - b|^2`` as an exact polynomial (vanishes exactly on ``points``)."""
    poly = {(0,) * dim: Fraction(1)}
    for b in points:
        factor: dict = {}
        for i in range(dim):
            e2 = tuple(2 if k == i else 0 for k in range(dim))
            e1 = tuple(1 if k == i else 0 for k in range(dim))
            factor[e2] = factor.get(e2, 0) + 1
            factor[e1] = factor.get(e1, 0) - 2 * b[i]
            factor[(0,) * dim] = factor.get((0,) * dim, 0) + b[i] * b[i]
        nxt: dict = {}
        for e, c in poly.items():
            for f, d in factor.items():
                k = tuple(x + y for x, y in zip(e, f))
                nxt[k] = nxt.get(k, 0) + c * d
        poly = nxt
    return Polynomial(poly, dim=dim, name="dist2_B")


def transfer(a: PiecewisePolynomial, maps: Sequence) -> PiecewisePolynomial:
    """``L a = sum_j a o g_j`` for exact 1-D affine maps."""
    out = None
    for g in maps:
        term = a.compose_affine(g.matrix[0][0], g.translation[0])
        out = term if out is None else out + term
    return out


def as_piecewise(a: Function, lo, hi) -> PiecewisePolynomial | None:
    """Exact piecewise form of ``a`` on ``[lo, hi]`` when one exists, else ``None``."""
    if isinstance(a, PiecewisePolynomial):
        return a
    if isinstance(a, Polynomial) and a.dim == 1:
        return a.to_piecewise(lo, hi)
    if isinstance(a, Constant) and ex.is_exact(a.value):
        return PiecewisePolynomial((lo, hi), ((a.value,),), sup=a.sup, lip=0.0, name=a.name)
    if isinstance(a, Scaled) and ex.is_exact(a.c):
        inner = as_piecewise(a.f, lo, hi)
        return None if inner is None else inner * a.c
    if isinstance(a, (Sum, Product)):
        f, g = as_piecewise(a.f, lo, hi), as_piecewise(a.g, lo, hi)
        if f is None or g is None:
            return None
        return f + g if isinstance(a, Sum) else f * g
    return None


AlgebraElement = Function
