"""Exit criteria for the build. Each test prints one ``criterion N: PASS|FAIL`` line.

Tolerances are pinned as module constants. A failing criterion stays failing.
"""

import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

from kmsfractal.basis import (RampFamily, build_patched_basis, order_independence, roots_of_unity_sum,
                              standard_algebra, standard_elements, verify_reconstruction, verify_sum_identity)
from kmsfractal.bimodule import TildeFunction
from kmsfractal.branching import branch_index, branch_values, inverse_images
from kmsfractal.cli import main
from kmsfractal.functions import Constant
from kmsfractal.kms import (check_condition3, check_orbit_identity, classify, decompose, min_beta,
                            point_mass_law, random_weights, standard_family)
from kmsfractal.measures import Lebesgue, Mixture, OrbitMeasure, default_orbit_depth, hutchinson_iterate, w1_distance
from kmsfractal.presets import B1, B2, B3, C1, C2, C3

pytestmark = pytest.mark.acceptance

HALF = (F(1, 2),)

# pinned tolerances and budgets
C1_SECONDS = 1.0
C2_RESIDUAL_1D, C2_W1, C2_SECONDS_1D = 1e-4, 2e-4, 10.0
C2_RESIDUAL_2D, C2_SECONDS_2D, C2_STEPS_2D = 1e-3, 60.0, 10
C3_LAMBDAS, C3_DEPTH, C3_SECONDS = (3, 4, 10), 30, 10.0
C5_LAMBDA, C5_VECTORS, C5_WEIGHT_TOL, C5_SECONDS = 5, 10, 1e-9, 30.0
C6_ULPS, C6_RAMP_MAX_I, C6_ROOTS_TOL, C6_ROOTS_MAX_N = 4, 64, 1e-12, 12
C6_TERMS, C6_RECON_TOL, C6_ORDER_TOL = 200, 1e-2, 1e-9
C7_LAMBDA, C7_DEPTH, C7_MAX_ATOM = 4, 13, 2.0 ** -14
C8_TOL = 1e-15


@pytest.fixture
def record(request):
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def emit(n: int, ok: bool, detail: str):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return emit


def test_criterion_1_branch_structure(record, tent, doubling, gasket):
    t0 = time.perf_counter()
    rt, rd, rg = branch_values(tent.ifs), branch_values(doubling.ifs), branch_values(gasket.ifs)
    checks = {
        "tent C": rt.branch_values == ((F(1),),),
        "tent B": rt.branch_points == (HALF,),
        "tent e": branch_index(tent.ifs, HALF, (F(1),)) == 2,
        "doubling empty": rd.branch_values == () and rd.branch_points == (),
        "gasket C": set(rg.branch_values) == {C1, C2, C3},
        "gasket B": set(rg.branch_points) == {B1, B2, B3},
        "gasket e": all(p.e == 2 for p in rg.pairs) and len(rg.pairs) == 3,
        "g^-1(c1)": {y for _, y in inverse_images(gasket.ifs, C1)} == {C1},
        "g^-1(c2)": {y for _, y in inverse_images(gasket.ifs, C2)} == {C3},
        "g^-1(c3)": {y for _, y in inverse_images(gasket.ifs, C3)} == {C2},
    }
    elapsed = time.perf_counter() - t0
    bad = [k for k, v in checks.items() if not v]
    ok = not bad and elapsed < C1_SECONDS
    record(1, ok, f"{len(checks) - len(bad)}/{len(checks)} exact facts, {elapsed:.2f}s (< {C1_SECONDS}s)"
           + (f"; failing: {bad}" if bad else ""))
    assert ok


def test_criterion_2_hutchinson(record, tent, doubling, gasket):
    parts, ok = [], True
    for p in (tent, doubling):
        t0 = time.perf_counter()
        rep = branch_values(p.ifs)
        mu = hutchinson_iterate(p.ifs, steps=14)
        fam = standard_family(p.ifs, rep)
        c3 = check_condition3(mu, 2, fam, p.ifs, restrict=False, tol=C2_RESIDUAL_1D)
        w1 = float(w1_distance(mu, Lebesgue()))
        dt = time.perf_counter() - t0
        good = c3.passed and w1 <= C2_W1 and dt < C2_SECONDS_1D and len(fam) >= 60
        ok &= good
        parts.append(f"{p.name}: {len(mu)} atoms, residual {c3.value:.2e} over {len(fam)} members, "
                     f"W1 {w1:.2e}, {dt:.1f}s")
    t0 = time.perf_counter()
    rep = branch_values(gasket.ifs)
    mu = hutchinson_iterate(gasket.ifs, steps=C2_STEPS_2D)
    fam = standard_family(gasket.ifs, rep)
    c3 = check_condition3(mu, 3, fam, gasket.ifs, restrict=False, tol=C2_RESIDUAL_2D)
    dt = time.perf_counter() - t0
    ok &= c3.passed and dt < C2_SECONDS_2D
    parts.append(f"gasket: residual {c3.value:.2e} (<= {C2_RESIDUAL_2D}), {dt:.1f}s")
    record(2, ok, "; ".join(parts))
    assert ok


def test_criterion_3_orbit_identity(record, tent):
    """Checks the identity with the coefficient as stated, (lam - N)/lam, and with lam - N.

    Only the stated form is gated. It is incompatible with the point mass (lam - 2)/lam
    required in the same criterion (take a = 1), so this criterion is expected to fail.
    """
    t0 = time.perf_counter()
    rep = branch_values(tent.ifs)
    fam = standard_family(tent.ifs, rep)
    N = 2
    ok_mass, ok_atom, ok_stated, ok_corrected = True, True, True, True
    worst_stated, worst_corrected = 0.0, 0.0
    for lam in C3_LAMBDAS:
        mu = OrbitMeasure(tent.ifs, HALF, lam, C3_DEPTH, rep)
        bound = lam * (F(2, lam)) ** (C3_DEPTH + 1)
        ok_mass &= mu.integrate(Constant(F(1))).value == 1 - F(2, lam) ** (C3_DEPTH + 1)
        ok_atom &= mu.point_mass(HALF) == F(lam - 2, lam)
        for m in fam.members:
            ta = mu.integrate(m.fn).value
            tt = mu.integrate(TildeFunction(m.fn, tent.ifs, rep)).value
            ay = m.fn.at(HALF)
            stated = abs(lam * ta - tt - F(lam - N, lam) * ay)
            worst_stated = max(worst_stated, float(stated))
            ok_stated &= stated <= bound
        corrected = check_orbit_identity(mu, fam, rep, tol=0.0)
        worst_corrected = max(worst_corrected, corrected.value)
        ok_corrected &= all(r <= float(bound) for _, r, _ in corrected.rows)
    dt = time.perf_counter() - t0
    ok = ok_mass and ok_atom and ok_stated and dt < C3_SECONDS
    record(3, ok, f"mass exact {ok_mass}, point mass (lam-2)/lam exact {ok_atom}; stated coefficient "
                  f"(lam-N)/lam worst residual {worst_stated:.3g} ({'within' if ok_stated else 'exceeds'} "
                  f"lam(2/lam)^31); coefficient lam-N worst residual {worst_corrected:.3g} "
                  f"({'within' if ok_corrected else 'exceeds'} bound); {dt:.1f}s")
    assert ok_corrected and ok_mass and ok_atom
    assert ok_stated, "stated identity (lam-N)/lam a(1/2) does not hold; see the decision ledger"


def test_criterion_4_classification(record, tent, doubling, gasket):
    parts, ok = [], True
    rt = branch_values(tent.ifs)
    below = classify(tent.ifs, rt, math.log(2) - 0.05)
    hut = classify(tent.ifs, rt, "ln2")
    above = classify(tent.ifs, rt, "ln4")
    leb = float(w1_distance(hut.vertices[0].candidate.measure, Lebesgue()))
    good = (below.regime == "empty" and hut.regime == "hutchinson" and hut.passed and leb <= C2_W1
            and above.regime == "simplex" and len(above.vertices) == 1 and above.passed
            and above.vertices[0].candidate.y == HALF)
    ok &= good
    parts.append(f"tent {below.regime}/{hut.regime}(W1 {leb:.1e})/{len(above.vertices)} vertex")
    rg = branch_values(gasket.ifs)
    g_below = classify(gasket.ifs, rg, math.log(3) - 0.05)
    g_hut = classify(gasket.ifs, rg, "ln3")
    g_above = classify(gasket.ifs, rg, "ln5")
    roots = {v.candidate.y for v in g_above.vertices}
    good = (g_below.regime == "empty" and g_hut.regime == "hutchinson" and g_hut.passed
            and g_above.regime == "simplex" and roots == {B1, B2, B3} and g_above.dimension == 2
            and g_above.passed)
    ok &= good
    parts.append(f"gasket {g_below.regime}/{g_hut.regime}/{g_above.dimension}-simplex")
    rd = branch_values(doubling.ifs)
    d_above = classify(doubling.ifs, rd, "ln3")
    ok &= d_above.regime == "empty" and not d_above.vertices
    parts.append(f"doubling above log 2: {d_above.regime}")
    record(4, ok, "; ".join(parts))
    assert ok


def test_criterion_5_decomposition(record, gasket):
    t0 = time.perf_counter()
    rep = branch_values(gasket.ifs)
    fam = standard_family(gasket.ifs, rep)
    depth = default_orbit_depth(3, C5_LAMBDA, node_cap=2 ** 14)
    parts = {b: OrbitMeasure(gasket.ifs, b, C5_LAMBDA, depth, rep) for b in rep.branch_points}
    defect = max(float(m.defect) for m in parts.values())
    worst_w, worst_r, ok = 0.0, 0.0, True
    for seed in range(C5_VECTORS):
        w = random_weights(3, seed)
        mix = Mixture(w, [parts[b] for b in rep.branch_points])
        dec = decompose(mix, C5_LAMBDA, rep, gasket.ifs, family=fam)
        err = max(abs(float(dec.weight_at(b) - wi)) for b, wi in zip(rep.branch_points, w))
        worst_w, worst_r = max(worst_w, err), max(worst_r, dec.residual)
        ok &= dec.passed and err <= C5_WEIGHT_TOL and dec.residual <= 3 * defect
    dt = time.perf_counter() - t0
    ok &= dt < C5_SECONDS
    record(5, ok, f"{C5_VECTORS} mixtures at lambda={C5_LAMBDA}, depth {depth}: weight error {worst_w:.1e}, "
                  f"residual TV {worst_r:.1e} (<= 3*defect = {3 * defect:.2e}), {dt:.1f}s")
    assert ok


def test_criterion_6_basis(record, tent):
    xs = np.linspace(0, 0.2, 2001)
    fam = RampFamily(1 / 8)
    ramp_ok = True
    for i in range(1, C6_RAMP_MAX_I + 1):
        tel = sum(fam.v(k, xs) ** 2 for k in range(1, i + 1))
        r = fam.r(i, xs)
        ramp_ok &= bool(np.all(np.abs(tel - r) <= C6_ULPS * np.spacing(np.maximum(r, 1.0))))
    roots = max(abs(roots_of_unity_sum(n, p) - (n if p % n == 0 else 0))
                for n in range(1, C6_ROOTS_MAX_N + 1) for p in range(0, 2 * n + 1))
    rep = branch_values(tent.ifs)
    basis = build_patched_basis(tent.ifs, rep)
    recon, mono, order = 0.0, True, 0.0
    for f in standard_elements(tent.ifs, rep):
        res = verify_reconstruction(basis, f, C6_TERMS)
        recon, mono = max(recon, res.error), mono and res.monotone_after_saturation
        order = max(order, order_independence(basis, f, C6_TERMS))
    empty = np.zeros((0, 1))
    sum_zero = all(verify_sum_identity(basis, a, K, grid=empty).exact_zero
                   for a in standard_algebra(tent.ifs) for K in range(1, C6_TERMS + 1))
    ok = ramp_ok and roots <= C6_ROOTS_TOL and recon < C6_RECON_TOL and mono and sum_zero and order < C6_ORDER_TOL
    record(6, ok, f"ramp telescoping within {C6_ULPS} ulp {ramp_ok}; roots of unity {roots:.1e}; "
                  f"reconstruction {recon:.2e} at {C6_TERMS} terms, monotone {mono}; sum identity at C exact 0 "
                  f"for K=1..{C6_TERMS} {sum_zero}; order delta {order:.1e}")
    assert ok


def test_criterion_7_point_masses(record, tent):
    rep = branch_values(tent.ifs)
    mu = OrbitMeasure(tent.ifs, HALF, C7_LAMBDA, C7_DEPTH, rep)
    checked, bad = point_mass_law(mu, rep)
    deep = OrbitMeasure(tent.ifs, HALF, C7_LAMBDA, C3_DEPTH, rep)
    ends = deep.point_mass((F(0),)) == 0 and deep.point_mass((F(1),)) == 0
    h = hutchinson_iterate(tent.ifs, steps=14)
    ok = not bad and checked > 0 and ends and h.max_atom() <= C7_MAX_ATOM
    record(7, ok, f"point-mass law on {checked} atoms, {len(bad)} violations; c(0)=c(1)=0 {ends}; "
                  f"Hutchinson max atom {h.max_atom():.3g} (<= 2^-14)")
    assert ok


def test_criterion_8_entropy(record, tent, doubling, gasket):
    vals = {p.name: min_beta(p.ifs).value for p in (tent, doubling, gasket)}
    want = {"tent": math.log(2), "doubling": math.log(2), "sierpinski": math.log(3)}
    ok = all(abs(vals[k] - want[k]) <= C8_TOL for k in want)
    record(8, ok, ", ".join(f"{k} {v:.15f}" for k, v in vals.items()))
    assert ok


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_criterion_9_determinism(record, tmp_path, capsys):
    runs = [["attractor", "--preset", "tent", "--depth", "10"],
            ["attractor", "--preset", "sierpinski", "--depth", "6"],
            ["kms", "--preset", "tent", "--beta", "ln4", "--seed", "7"],
            ["kms", "--preset", "doubling", "--beta", "ln2", "--seed", "3"],
            ["basis", "--preset", "tent", "--terms", "60"]]
    same, compared = True, 0
    for k, argv in enumerate(runs):
        outs = []
        for r in ("a", "b"):
            d = tmp_path / f"{k}{r}"
            main(argv + ["--out", str(d), "--format", "json,csv"])
            outs.append(_files(d))
        compared += len(outs[0])
        same &= outs[0] == outs[1] and bool(outs[0])
    capsys.readouterr()
    record(9, same, f"{compared} CSV/JSON files byte-identical across two runs of {len(runs)} commands")
    assert same


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
