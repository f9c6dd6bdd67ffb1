"""Exact scalars: rationals and the quadratic field Q(sqrt 3).

Branch coincidences are equality constraints, so anything that decides
whether two points are the same runs here rather than in floating point.
Rationals are plain :class:`fractions.Fraction`; the gasket needs
``a + b*sqrt(3)`` with rational ``a, b``, provided by :class:`QSqrt3`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Any, Sequence

SQRT3 = math.sqrt(3.0)


class QSqrt3:
    """Element ``a + b*sqrt(3)`` of Q(sqrt 3) with rational ``a`` and ``b``."""

    __slots__ = ("a", "b", "_hash")

    def __init__(self, a: Any = 0, b: Any = 0):
        self.a = a if type(a) is Fraction else Fraction(a)
        self.b = b if type(b) is Fraction else Fraction(b)
        self._hash = None

    @staticmethod
    def _coerce(other):
        if type(other) is QSqrt3:
            return other
        if isinstance(other, (int, Fraction)):
            return QSqrt3(other, 0)
        return None

    def __add__(self, other):
        o = QSqrt3._coerce(other)
        if o is None:
            return NotImplemented
        return QSqrt3(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __sub__(self, other):
        o = QSqrt3._coerce(other)
        if o is None:
            return NotImplemented
        return QSqrt3(self.a - o.a, self.b - o.b)

    def __rsub__(self, other):
        o = QSqrt3._coerce(other)
        if o is None:
            return NotImplemented
        return QSqrt3(o.a - self.a, o.b - self.b)

    def __mul__(self, other):
        o = QSqrt3._coerce(other)
        if o is None:
            return NotImplemented
        a, b, c, d = self.a, self.b, o.a, o.b
        # zero-aware: most gasket matrix entries are purely rational or purely irrational
        if not b:
            return QSqrt3(a * c, a * d) if d else QSqrt3(a * c, 0)
        if not d:
            return QSqrt3(a * c, b * c)
        return QSqrt3(a * c + 3 * b * d, a * d + b * c)

    __rmul__ = __mul__

    def conjugate(self) -> "QSqrt3":
        return QSqrt3(self.a, -self.b)

    def norm(self) -> Fraction:
        return self.a * self.a - 3 * self.b * self.b

    def __truediv__(self, other):
        o = QSqrt3._coerce(other)
        if o is None:
            return NotImplemented
        n = o.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt 3)")
        num = self * o.conjugate()
        return QSqrt3(num.a / n, num.b / n)

    def __rtruediv__(self, other):
        o = QSqrt3._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return QSqrt3(-self.a, -self.b)

    def __pos__(self):
        return self

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def sign(self) -> int:
        a, b = self.a, self.b
        sa = (a > 0) - (a < 0)
        sb = (b > 0) - (b < 0)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        return sa if a * a > 3 * b * b else sb

    def __eq__(self, other):
        o = QSqrt3._coerce(other)
        if o is None:
            return NotImplemented
        return self.a == o.a and self.b == o.b

    def __hash__(self):
        # values are immutable and hashed heavily as point keys, so cache the hash
        if self._hash is None:
            self._hash = hash(self.a) if not self.b else hash((self.a, self.b))
        return self._hash

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    def __float__(self):
        return float(self.a) + float(self.b) * SQRT3

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        out, base = QSqrt3(1), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __repr__(self):
        if not self.b:
            return f"QSqrt3({self.a})"
        return f"QSqrt3({self.a}, {self.b})"


Scalar = Any  # Fraction | QSqrt3 | float


def is_exact(x: Any) -> bool:
    return isinstance(x, (Rational, QSqrt3)) and not isinstance(x, bool)


def is_exact_point(p: Sequence[Any]) -> bool:
    return all(is_exact(c) for c in p)


def exact(x: Any) -> Scalar:
    """Convert ints, rational strings and ``{"rat", "sqrt3_coeff"}`` dicts to exact scalars.

    Floats are converted through their decimal repr, so ``0.1`` becomes 1/10.
    """
    if isinstance(x, QSqrt3):
        return x
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a scalar")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, dict):
        a = Fraction(*x.get("rat", [0, 1]))
        b = Fraction(*x.get("sqrt3_coeff", [0, 1]))
        return QSqrt3(a, b) if b else a
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return Fraction(int(x[0]), int(x[1]))
    raise TypeError(f"cannot interpret {x!r} as an exact scalar")


def to_float(x: Any) -> float:
    return float(x)


def float_point(p: Sequence[Any]) -> tuple[float, ...]:
    return tuple(float(c) for c in p)


def render(x: Any) -> Any:
    """JSON rendering of a scalar: ``"p/q"`` for rationals, a dict for Q(sqrt 3)."""
    if isinstance(x, QSqrt3):
        if not x.b:
            return render(x.a)
        return {"rat": [x.a.numerator, x.a.denominator],
                "sqrt3_coeff": [x.b.numerator, x.b.denominator]}
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, int) and not isinstance(x, bool):
        return str(x)
    return float(x)


def render_point(p: Sequence[Any]) -> list:
    return [render(c) for c in p]


def text(x: Any) -> str:
    """Compact single-token rendering used in CSV cells."""
    if isinstance(x, QSqrt3):
        if not x.b:
            return text(x.a)
        return f"{text(x.a)}+{text(x.b)}*sqrt3"
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return format(float(x), ".17g")


def solve(matrix: Sequence[Sequence[Any]], rhs: Sequence[Any]):
    """Solve ``matrix @ y = rhs`` over an exact field by Gauss-Jordan elimination.

    Returns ``(solution, rank)``. ``solution`` is ``None`` when the system is
    inconsistent; when it is consistent but rank deficient the returned
    solution is one particular solution and ``rank < n`` signals a continuum.
    """
    n = len(matrix)
    m = [list(row) + [rhs[i]] for i, row in enumerate(matrix)]
    pivots = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, n) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c] if not isinstance(m[r][c], int) else Fraction(1, m[r][c])
        m[r] = [v * inv for v in m[r]]
        for i in range(n):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [vi - f * vr for vi, vr in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    for i in range(r, n):
        if m[i][n] != 0:
            return None, r
    y = [Fraction(0)] * n
    for i, c in enumerate(pivots):
        y[c] = m[i][n]
    return tuple(y), r


def inverse(matrix: Sequence[Sequence[Any]]):
    """Exact inverse; raises ``ZeroDivisionError`` for singular input."""
    n = len(matrix)
    cols = []
    for k in range(n):
        e = [Fraction(int(i == k)) for i in range(n)]
        y, rank = solve(matrix, e)
        if y is None or rank < n:
            raise ZeroDivisionError("singular matrix")
        cols.append(y)
    return tuple(tuple(cols[c][r] for c in range(n)) for r in range(n))
