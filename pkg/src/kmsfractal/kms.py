"""Measure-level KMS checks, classification of the simplex and decomposition into orbit measures.

With ``tau(a) = int a dmu`` the conditions checked are

(3) ``sum_j tau(a o g_j) = lam tau(a)`` for ``a`` vanishing on B(g),
(4) ``tau(a~) <= lam tau(a)`` for ``a >= 0``,

over a finite test family, so a PASS means "consistent with KMS at the stated
tolerance", never a proof. For orbit measures the sharper identity
``lam tau(a) = tau(a~) + (lam - N) a(y)`` is checked as well.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from . import exact as ex
from .basis import PatchedBasis
from .bimodule import TildeFunction, standard_grid
from .branching import BranchReport, inverse_images
from .errors import ConfigurationError, DomainError
from .functions import (Cone, Function, Lambda, Polynomial, Product, as_piecewise,
                        distance_to_points, hat, linear_interpolant, squared_distance_product, transfer)
from .ifs_core import IfsSystem
from .measures import (ORBIT_NODE_CAP, KmsCandidate, Measure, Mixture, OrbitMeasure, default_orbit_depth,
                       hutchinson_iterate, parse_lambda)

FLOAT_TOL = 1e-7
HUTCHINSON_TOL = {1: 1e-4, 2: 1e-3}
HUTCHINSON_ATOMS = 60000


# --------------------------------------------------------------------------- test functions

@dataclass(frozen=True)
class Member:
    fn: Function
    vanishes_on_B: bool
    positive: bool
    tag: str
    sup: float


@dataclass(frozen=True)
class TestFunctionFamily:
    __test__ = False  # not a pytest class

    members: tuple[Member, ...]
    provenance: str

    def __len__(self):
        return len(self.members)

    def vanishing(self) -> tuple[Member, ...]:
        return tuple(m for m in self.members if m.vanishes_on_B)

    def positive(self) -> tuple[Member, ...]:
        return tuple(m for m in self.members if m.positive)


def _vanishes(fn: Function, points: Sequence) -> bool:
    for b in points:
        v = fn.at(b)
        if ex.is_exact(v):
            if v != 0:
                return False
        elif abs(v) > 1e-12:
            return False
    return True


def _family_1d(ifs: IfsSystem, report: BranchReport, rng) -> list[tuple[str, Function, bool]]:
    lo, hi = ifs.lo[0], ifs.hi[0]
    span = hi - lo
    mono = [Polynomial.univariate([0] * k + [1]).to_piecewise(lo, hi) for k in range(7)]
    nonneg_box = lo >= 0
    hats = [hat(lo + span * k / 16, span / 8, lo, hi) for k in range(17)]
    if report.branch_points:
        damp = distance_to_points(report.branch_points, lo, hi)
    else:
        damp = linear_interpolant([lo, (lo + hi) / 2, hi], [0, span / 2, 0], name="tent_box")
    out = [(f"y^{k}", m, nonneg_box) for k, m in enumerate(mono)]
    out += [(f"hat[{k}/16]", h, True) for k, h in enumerate(hats)]
    out += [(f"d_B*y^{k}", damp * m, nonneg_box) for k, m in enumerate(mono)]
    out += [(f"d_B*hat[{k}/16]", damp * h, True) for k, h in enumerate(hats)]
    knots = [lo + span * k / 8 for k in range(9)]
    for r in range(10):
        signed = r >= 5
        vals = [Fraction(int(v), 64) for v in rng.integers(-64 if signed else 0, 65, size=9)]
        f = linear_interpolant(knots, vals, name=f"lip[{r}]")
        out.append((f"lip[{r}]", f, all(v >= 0 for v in vals)))
        out.append((f"d_B*lip[{r}]", damp * f, all(v >= 0 for v in vals)))
    return out


def _family_nd(ifs: IfsSystem, report: BranchReport, rng) -> list[tuple[str, Function, bool]]:
    d = ifs.dim
    nonneg_box = bool(np.all(ifs.box_lo >= 0))
    exps = [e for deg in range(4) for e in itertools.product(range(deg + 1), repeat=d) if sum(e) == deg]
    exps = [e for e in exps if sum(e) <= 3][:10]
    monos = [Polynomial({e: 1}, dim=d, name="x^" + "".join(map(str, e))) for e in exps]
    per_axis = 4
    grids = [np.linspace(l + (h - l) / 8, h - (h - l) / 8, per_axis) for l, h in zip(ifs.box_lo, ifs.box_hi)]
    radius = float(min(ifs.box_hi - ifs.box_lo)) / 4
    cones = [Cone(c, radius) for c in itertools.product(*grids)][:16]
    if report.branch_points:
        damp = squared_distance_product(report.branch_points, d)
    else:
        damp = Polynomial({tuple(2 if i == k else 0 for i in range(d)): 1 for k in range(d)}, dim=d, name="|y|^2")
    out = [(m.name, m, nonneg_box) for m in monos]
    out += [(c.name, c, True) for c in cones]
    out += [(f"d2_B*{m.name}", Product(damp, m), nonneg_box) for m in monos[:6]]
    out += [(f"d2_B*{c.name}", Product(damp, c), True) for c in cones]
    for r in range(10):
        signed = r >= 5
        w = rng.uniform(-1 if signed else 0, 1, size=len(cones))
        f = _cone_combination(cones, w, f"lip[{r}]")
        out.append((f"lip[{r}]", f, not signed))
        out.append((f"d2_B*lip[{r}]", Product(damp, f), not signed))
    return out


def _cone_combination(cones: Sequence[Cone], w: np.ndarray, name: str) -> Function:
    def fn(pts):
        return sum(float(c_w) * c(pts) for c_w, c in zip(w, cones))

    total = float(np.sum(np.abs(w)))
    return Lambda(fn, sup=total, lip=total / cones[0].r, name=name)


def standard_family(ifs: IfsSystem, report: BranchReport, seed: int = 0) -> TestFunctionFamily:
    """At least 60 members: polynomials, bumps, products with a function vanishing on B(g), seeded
    random Lipschitz functions. Exact piecewise polynomials on intervals, floats otherwise."""
    rng = np.random.default_rng(seed)
    one_d = ifs.dim == 1 and ifs.exact
    raw = _family_1d(ifs, report, rng) if one_d else _family_nd(ifs, report, rng)
    grid, _ = standard_grid(ifs)
    members = []
    for tag, fn, positive in raw:
        vals = np.real(fn(grid))
        if positive and np.min(vals) < -1e-12:
            raise ConfigurationError(f"family member {tag} is tagged positive but takes negative values")
        grid_max = float(np.max(np.abs(vals)))
        sup = float(fn.sup) if fn.sup is not None and fn.sup >= grid_max else grid_max * 1.01 + 1e-12
        fn.sup = sup
        fn.name = tag
        members.append(Member(fn, _vanishes(fn, report.branch_points), positive, tag, sup))
    kind = "exact piecewise polynomials" if one_d else "float polynomials and cones"
    return TestFunctionFamily(tuple(members), f"standard family ({kind}), seed {seed}")


# --------------------------------------------------------------------------- integration helpers

def _pullback_sum(a: Function, ifs: IfsSystem) -> Function:
    """``sum_j a o g_j``; exact piecewise polynomial on intervals when possible."""
    if ifs.dim == 1 and ifs.exact and ifs.affine:
        pp = as_piecewise(a, ifs.lo[0], ifs.hi[0])
        if pp is not None:
            out = transfer(pp, ifs.maps).simplify()
            out.sup = None if a.sup is None else ifs.N * a.sup
            return out

    def fn(pts):
        return sum(a(g.apply_array(pts)) for g in ifs.maps)

    def exact_fn(p):
        return sum((a.at(g(p)) for g in ifs.maps), 0)

    return Lambda(fn, exact_fn if a.exact_capable and ifs.exact else None,
                  sup=None if a.sup is None else ifs.N * a.sup, name=f"L{a.name}")


def _derived(kind: str, a: Function, ifs: IfsSystem, report: BranchReport | None = None) -> Function:
    """``sum_j a o g_j`` or ``a~``, memoized on ``a`` so repeated checks reuse integrals."""
    memo = a.__dict__.setdefault("_derived", {})
    key = (kind, id(ifs), id(report))
    hit = memo.get(key)
    if hit is not None and hit[0] is ifs and hit[1] is report:
        return hit[2]
    fn = _pullback_sum(a, ifs) if kind == "pullback" else TildeFunction(a, ifs, report)
    memo[key] = (ifs, report, fn)
    return fn


def _tau(mu: Measure, a: Function):
    """Integral, exact only where it is cheap (series on intervals)."""
    exact = None if mu.dim == 1 else False
    return mu.integrate(a, exact).value


def _sub(x, y):
    if ex.is_exact(x) and ex.is_exact(y):
        return x - y
    return float(x) - float(y)


def _defect_term(mu: Measure, lam, sup: float) -> float:
    return float(lam) * float(mu.defect) * sup


def _default_tol(mu: Measure) -> float:
    return 0.0 if mu.exact and mu.dim == 1 else FLOAT_TOL


@dataclass(frozen=True)
class CheckReport:
    """Worst-case summary of one check over a family; ``rows`` are ``(tag, value, allowed)``."""

    name: str
    value: float
    worst: str
    passed: bool
    tolerance: float
    rows: tuple = ()

    def to_json(self) -> dict:
        return {"name": self.name, "value": self.value, "worst": self.worst, "passed": self.passed,
                "tolerance": self.tolerance}


def check_condition3(mu: Measure, lam, family: TestFunctionFamily, ifs: IfsSystem, *,
                     restrict: bool = True, tol: float | None = None) -> CheckReport:
    """``max |sum_j tau(a o g_j) - lam tau(a)|`` over members vanishing on B (all members if not ``restrict``)."""
    members = family.vanishing() if restrict else family.members
    if not members:
        raise ConfigurationError("condition (3) needs a nonempty test family")
    lam = parse_lambda(lam)
    tol = _default_tol(mu) if tol is None else tol
    rows, worst, worst_excess, value, ok = [], "", -math.inf, 0.0, True
    for m in members:
        r = _sub(_tau(mu, _derived("pullback", m.fn, ifs)), lam * _tau(mu, m.fn) if ex.is_exact(lam) else
                 float(lam) * float(_tau(mu, m.fn)))
        allowed = tol + _defect_term(mu, lam, m.sup)
        r = abs(float(r))
        rows.append((m.tag, r, allowed))
        ok &= r <= allowed
        if r - allowed > worst_excess:
            worst_excess, worst = r - allowed, m.tag
        value = max(value, r)
    return CheckReport("condition3", value, worst, ok, tol, tuple(rows))


def check_condition4(mu: Measure, lam, family: TestFunctionFamily, ifs: IfsSystem, report: BranchReport, *,
                     tol: float | None = None) -> CheckReport:
    """``min (lam tau(a) - tau(a~))`` over positive members; FAIL if below ``-(tol + defect term)``."""
    members = family.positive()
    if not members:
        raise ConfigurationError("condition (4) needs positive test functions")
    lam = parse_lambda(lam)
    tol = _default_tol(mu) if tol is None else tol
    rows, worst, margin, ok = [], "", math.inf, True
    for m in members:
        ta = _tau(mu, m.fn)
        tt = _tau(mu, _derived("tilde", m.fn, ifs, report))
        lhs = lam * ta if ex.is_exact(lam) and ex.is_exact(ta) else float(lam) * float(ta)
        g = float(_sub(lhs, tt))
        allowed = tol + _defect_term(mu, lam, m.sup) * ifs.N
        rows.append((m.tag, g, -allowed))
        ok &= g >= -allowed
        if g < margin:
            margin, worst = g, m.tag
    return CheckReport("condition4", margin, worst, ok, tol, tuple(rows))


def check_orbit_identity(candidate: KmsCandidate | OrbitMeasure, family: TestFunctionFamily,
                         report: BranchReport, *, tol: float | None = None) -> CheckReport:
    """``lam tau(a) - tau(a~) - (lam - N) a(y)`` per member; bounded by ``lam * defect * sup|a|``."""
    mu = candidate.measure if isinstance(candidate, KmsCandidate) else candidate
    if not isinstance(mu, OrbitMeasure):
        raise ConfigurationError("the orbit identity applies to orbit measures only")
    ifs, lam, N = mu.ifs, mu.lam, mu.ifs.N
    tol = _default_tol(mu) if tol is None else tol
    rows, worst, worst_excess, value, ok = [], "", -math.inf, 0.0, True
    for m in family.members:
        ta = _tau(mu, m.fn)
        tt = _tau(mu, _derived("tilde", m.fn, ifs, report))
        ay = m.fn.at(mu.y) if mu.dim == 1 else float(m.fn(np.array([ex.float_point(mu.y)]))[0])
        if all(ex.is_exact(v) for v in (ta, tt, ay, lam)):
            r = lam * ta - tt - (lam - N) * ay
        else:
            r = float(lam) * float(ta) - float(tt) - (float(lam) - N) * float(ay)
        r = abs(float(r))
        allowed = tol + _defect_term(mu, lam, m.sup)
        rows.append((m.tag, r, allowed))
        ok &= r <= allowed
        if r - allowed > worst_excess:
            worst_excess, worst = r - allowed, m.tag
        value = max(value, r)
    return CheckReport("orbit_identity", value, worst, ok, tol, tuple(rows))


@dataclass(frozen=True)
class BasisConditionReport:
    equality: CheckReport
    inequality: CheckReport
    cross_delta: float
    unit_partial_sums: tuple[float, ...]

    @property
    def passed(self) -> bool:
        return self.equality.passed and self.inequality.passed

    @property
    def monotone(self) -> bool:
        s = self.unit_partial_sums
        return all(b >= a - 1e-12 for a, b in zip(s, s[1:]))


def _basis_integrand(basis: PatchedBasis, a: Function, K: int) -> Function:
    els = basis.elements(K)
    ifs = basis.ifs

    def fn(pts):
        pts = np.asarray(pts, float).reshape(-1, ifs.dim)
        pulled = [a(g.apply_array(pts)) for g in ifs.maps]
        total = np.zeros(len(pts))
        for el in els:
            U = basis.values(el, pts)
            total = total + sum(pulled[j - 1] * np.abs(U[j - 1]) ** 2 for j in el.stream.J)
        return total

    return Lambda(fn, name=f"S{K}[{a.name}]")


def check_basis_conditions(mu: Measure, lam, basis: PatchedBasis, family: TestFunctionFamily, K_trunc: int,
                           *, tol: float | None = None, report: BranchReport | None = None,
                           checkpoints: Sequence[int] | None = None) -> BasisConditionReport:
    """``sum_{k <= K} tau((u_k|a u_k)_A)`` against ``lam tau(a)``: equality on members vanishing on B,
    ``<=`` on positive members; ``cross_delta`` compares the sums with ``tau(a~)``."""
    ifs = basis.ifs
    report = report or basis.report
    lam = parse_lambda(lam)
    tol = FLOAT_TOL if tol is None else tol
    atoms = mu.atoms()
    eq_rows, ineq_rows, cross = [], [], 0.0
    eq_val, eq_ok, worst_eq = 0.0, True, ""
    margin, ineq_ok, worst_in = math.inf, True, ""
    for m in family.members:
        s = float(atoms.integrate(_basis_integrand(basis, m.fn, K_trunc), exact=False).value)
        ta = float(atoms.integrate(m.fn, exact=False).value)
        tt = float(atoms.integrate(TildeFunction(m.fn, ifs, report), exact=False).value)
        cross = max(cross, abs(s - tt))
        allowed = tol + _defect_term(mu, lam, m.sup) * ifs.N
        if m.vanishes_on_B:
            r = abs(s - float(lam) * ta)
            eq_rows.append((m.tag, r, allowed))
            if r > eq_val:
                eq_val, worst_eq = r, m.tag
            eq_ok &= r <= allowed
        if m.positive:
            g = float(lam) * ta - s
            ineq_rows.append((m.tag, g, -allowed))
            if g < margin:
                margin, worst_in = g, m.tag
            ineq_ok &= g >= -allowed
    one = Polynomial({(0,) * ifs.dim: 1}, dim=ifs.dim)
    if checkpoints is None:
        checkpoints = sorted({1, basis.saturation_start, K_trunc} | set(range(0, K_trunc + 1, max(1, K_trunc // 8))) - {0})
    sums = tuple(float(atoms.integrate(_basis_integrand(basis, one, k), exact=False).value) for k in checkpoints)
    return BasisConditionReport(CheckReport("basis_equality", eq_val, worst_eq, eq_ok, tol, tuple(eq_rows)),
                                CheckReport("basis_inequality", margin, worst_in, ineq_ok, tol, tuple(ineq_rows)),
                                cross, sums)


def point_mass_law(mu: OrbitMeasure, report: BranchReport) -> tuple[int, list]:
    """``sum_{z in g^-1(x)} c(z) = lam c(x)`` for every atom ``x`` outside B(g); returns (checked, violations)."""
    atoms = mu.atoms()
    masses = atoms.as_dict() if atoms.exact else None
    if masses is None:
        raise ConfigurationError("the point-mass law is checked in exact arithmetic only")
    branch = {tuple(b) for b in report.branch_points}
    bad, checked = [], 0
    for x, cx in masses.items():
        if x in branch:
            continue
        pre = {tuple(z) for _, z in inverse_images(mu.ifs, x)}
        lhs = sum((masses.get(z, Fraction(0)) for z in pre), Fraction(0))
        checked += 1
        if lhs != mu.lam * cx:
            bad.append((x, lhs, mu.lam * cx))
    return checked, bad


# --------------------------------------------------------------------------- classification

_LOG_RE = re.compile(r"^\s*(ln|log)\s*\(?\s*([0-9./]+)\s*\)?\s*$", re.IGNORECASE)


def parse_beta(beta) -> tuple[float, Any]:
    """``(beta, lam)``; ``"ln4"``/``"log(4)"`` give an exact ``lam``, floats are snapped by :func:`parse_lambda`."""
    if isinstance(beta, str):
        m = _LOG_RE.match(beta)
        if m:
            lam = ex.exact(m.group(2))
            if lam <= 0:
                raise DomainError("the argument of the logarithm must be positive")
            b = math.log(float(lam))
            if b <= 0:
                raise DomainError(f"beta = {b} must be positive")
            return b, lam
        try:
            beta = float(beta)
        except ValueError:
            raise ConfigurationError(f"cannot parse beta {beta!r}") from None
    beta = float(beta)
    if not beta > 0:
        raise DomainError(f"beta = {beta} must be positive")
    return beta, parse_lambda(math.exp(beta))


def _compare(lam, N: int) -> int:
    if ex.is_exact(lam):
        return (lam > N) - (lam < N)
    if abs(float(lam) - N) <= 1e-12 * N:
        return 0
    return 1 if lam > N else -1


@dataclass
class Vertex:
    label: str
    candidate: KmsCandidate
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())


@dataclass
class Classification:
    beta: float
    lam: Any
    N: int
    regime: str
    reason: str
    vertices: list[Vertex] = field(default_factory=list)
    status: str = "VERIFIED"

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.vertices)

    @property
    def dimension(self) -> int:
        return len(self.vertices) - 1

    def to_json(self) -> dict:
        return {
            "beta": self.beta,
            "lambda": ex.render(self.lam) if ex.is_exact(self.lam) else float(self.lam),
            "N": self.N,
            "regime": self.regime,
            "reason": self.reason,
            "status": self.status,
            "simplex_dimension": self.dimension,
            "passed": self.passed,
            "simplex": [{"vertex": v.label, "kind": v.candidate.kind,
                         "root": None if v.candidate.y is None else ex.render_point(v.candidate.y),
                         "depth": getattr(v.candidate.measure, "depth", None),
                         "defect": _render_defect(v.candidate.measure.defect),
                         "checks": {k: c.to_json() for k, c in v.checks.items()}} for v in self.vertices],
        }


def _render_defect(d):
    return ex.render(d) if ex.is_exact(d) else float(d)


def _vertex_labels(ifs: IfsSystem, report: BranchReport) -> list[str]:
    from .presets import PRESETS

    names = {}
    if ifs.name in PRESETS:
        preset = PRESETS[ifs.name]()
        if preset.ifs is ifs:
            names = {tuple(v): k for k, v in preset.known_facts if k.startswith("b") and isinstance(v, tuple)}
    labels = []
    for k, b in enumerate(report.branch_points, start=1):
        lab = names.get(tuple(b))
        labels.append(lab.replace("b", "b_") if lab else f"b_{k}")
    return labels


def is_preset_class(ifs: IfsSystem) -> bool:
    from .presets import PRESETS

    return ifs.name in PRESETS and PRESETS[ifs.name]().ifs is ifs


def hutchinson_steps(N: int) -> int:
    return min(14, int(math.log(HUTCHINSON_ATOMS) / math.log(N)))


def classify(ifs: IfsSystem, report: BranchReport, beta, *, family: TestFunctionFamily | None = None,
             seed: int = 0, depth: int | None = None, steps: int | None = None,
             node_cap: int = ORBIT_NODE_CAP, tol: float | None = None) -> Classification:
    """The beta-KMS simplex: empty for ``lam < N``, the Hutchinson measure at ``lam = N``, and the orbit
    measures of the branch points for ``lam > N``; every emitted vertex is checked."""
    beta, lam = parse_beta(beta)
    N = ifs.N
    status = "VERIFIED" if is_preset_class(ifs) else "UNVERIFIED"
    cmp = _compare(lam, N)
    if cmp < 0:
        return Classification(beta, lam, N, "empty",
                              f"lambda = e^beta = {float(lam):.6g} < N = {N}; KMS states exist only if "
                              f"lambda = e^beta >= N", status=status)
    family = family or standard_family(ifs, report, seed)
    if cmp == 0:
        steps = hutchinson_steps(N) if steps is None else steps
        mu = hutchinson_iterate(ifs, steps=steps)
        cand = KmsCandidate(N, "hutchinson", mu, label="hutchinson", meta={"steps": steps})
        t = HUTCHINSON_TOL.get(ifs.dim, 1e-3) if tol is None else tol
        checks = {"condition3": check_condition3(mu, N, family, ifs, restrict=False, tol=t),
                  "condition4": check_condition4(mu, N, family, ifs, report, tol=t)}
        return Classification(beta, Fraction(N), N, "hutchinson",
                              "lambda = N: the Hutchinson measure is the unique eigenmeasure",
                              [Vertex("hutchinson", cand, checks)], status)
    if not report.branch_points:
        return Classification(beta, lam, N, "empty",
                              "lambda > N but B(g) is empty: no orbit-measure vertices exist", status=status)
    if depth is None:
        depth = default_orbit_depth(N, lam, node_cap=node_cap)
    vertices = []
    for label, b in sorted(zip(_vertex_labels(ifs, report), report.branch_points), key=lambda t: t[0]):
        m = OrbitMeasure(ifs, b, lam, depth, report)
        cand = KmsCandidate(m.lam, "orbit", m, y=m.y, label=label)
        checks = {"condition3": check_condition3(m, lam, family, ifs, tol=tol),
                  "condition4": check_condition4(m, lam, family, ifs, report, tol=tol),
                  "orbit_identity": check_orbit_identity(m, family, report, tol=tol)}
        vertices.append(Vertex(label, cand, checks))
    return Classification(beta, lam, N, "simplex",
                          f"lambda > N: convex combinations of {len(vertices)} orbit measure(s)", vertices, status)


# --------------------------------------------------------------------------- decomposition

@dataclass(frozen=True)
class Decomposition:
    weights: tuple
    point_masses: tuple
    mass_check: float
    residual: float
    allowed: float
    passed: bool
    reason: str = ""
    roots: tuple = ()

    def weight_at(self, y):
        """Recovered weight of the orbit measure rooted at ``y``."""
        for b, w in zip(self.roots, self.weights):
            if tuple(b) == tuple(y):
                return w
        raise ConfigurationError(f"{ex.render_point(y)} is not a branch point")

    def to_json(self) -> dict:
        r = lambda v: ex.render(v) if ex.is_exact(v) else float(v)  # noqa: E731
        return {"weights": [r(w) for w in self.weights], "point_masses": [r(c) for c in self.point_masses],
                "roots": [ex.render_point(b) for b in self.roots],
                "mass_check": self.mass_check, "residual": self.residual, "allowed": self.allowed,
                "passed": self.passed, "reason": self.reason}


def _depth_of(mu: Measure) -> int | None:
    if isinstance(mu, OrbitMeasure):
        return mu.depth
    if isinstance(mu, Mixture):
        depths = {_depth_of(m) for m in mu.measures}
        return depths.pop() if len(depths) == 1 else None
    return None


def decompose(mu: Measure, lam, report: BranchReport, ifs: IfsSystem, *, family: TestFunctionFamily | None = None,
              tol: float = 1e-9, check_preconditions: bool = True, seed: int = 0) -> Decomposition:
    """Weights ``w_y = lam/(lam - N) * c_mu(y)`` over B(g) and the total-variation mass of
    ``mu - sum_y w_y mu_{y,lam}``."""
    lam = parse_lambda(lam)
    N = ifs.N
    if _compare(lam, N) <= 0:
        raise DomainError(f"decomposition needs lambda > N = {N}")
    if check_preconditions:
        family = family or standard_family(ifs, report, seed)
        c3 = check_condition3(mu, lam, family, ifs)
        c4 = check_condition4(mu, lam, family, ifs, report)
        if not (c3.passed and c4.passed):
            failing = "condition (3)" if not c3.passed else "condition (4)"
            return Decomposition((), (), math.inf, math.inf, tol, False,
                                 f"precondition failed: {failing} (worst member {c3.worst or c4.worst}, "
                                 f"residual {c3.value:.3g})")
    masses = tuple(mu.point_mass(b) for b in report.branch_points)
    exact = all(ex.is_exact(c) for c in masses) and ex.is_exact(lam)
    scale = lam / (lam - N) if exact else float(lam) / (float(lam) - N)
    weights = tuple(scale * c if exact else scale * float(c) for c in masses)
    expected = (lam - N) / lam if exact else (float(lam) - N) / float(lam)
    mass_check = abs(float(sum(masses, 0) - expected)) if exact else abs(sum(map(float, masses)) - expected)
    depth = _depth_of(mu)
    parts = [OrbitMeasure(ifs, b, lam, depth, report) for b in report.branch_points]
    atoms = mu.atoms()
    defect = float(mu.defect)
    if exact and atoms.exact:
        acc = atoms.as_dict()
        for w, p in zip(weights, parts):
            if w:
                for x, v in p.atoms().exact_atoms:
                    acc[x] = acc.get(x, 0) - w * v
        residual = float(sum((abs(v) for v in acc.values()), Fraction(0)))
        defect = max(defect, max((float(p.defect) for p in parts), default=0.0))
    else:
        pts = [atoms.points] + [p.atoms().points for p in parts]
        wts = [atoms.weights] + [-float(w) * p.atoms().weights for w, p in zip(weights, parts)]
        P, W = np.concatenate(pts), np.concatenate(wts)
        keys = np.round(P / max(ifs.tolerance, 1e-15)).astype(np.int64)
        _, inv = np.unique(keys, axis=0, return_inverse=True)
        residual = float(np.abs(np.bincount(inv.reshape(-1), weights=W)).sum())
    allowed = tol + 3 * defect
    ok = residual <= allowed and mass_check <= tol + defect
    reason = "" if ok else "residual mass exceeds the allowed defect"
    return Decomposition(weights, masses, mass_check, residual, allowed, ok, reason, tuple(report.branch_points))


# --------------------------------------------------------------------------- entropy

@dataclass(frozen=True)
class MinBeta:
    value: float
    N: int
    interpretation: str

    def __float__(self):
        return self.value


def min_beta(ifs: IfsSystem) -> MinBeta:
    """``log N``: the smallest inverse temperature, equal to the entropy of the inverse branches."""
    N = ifs.N
    return MinBeta(math.log(N), N, f"the entropy h(g^-1) of the {N}-to-1 inverse map is log {N}")


def random_weights(n: int, seed: int, denominator: int = 1000) -> tuple[Fraction, ...]:
    """Seeded strictly positive rational weights summing to exactly 1."""
    if n < 1:
        raise ConfigurationError("need at least one weight")
    raw = np.random.default_rng(seed).integers(1, denominator, n)
    total = int(raw.sum())
    return tuple(Fraction(int(r), total) for r in raw)
