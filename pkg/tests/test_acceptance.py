"""Acceptance criteria 1-10, one test each.

Every test records a ``criterion N: PASS|FAIL`` line that is printed in the
pytest terminal summary.  Run this file alone with
``pytest tests/test_acceptance.py``.
"""

import json
import math
import time

import mpmath
import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import j0 as scipy_j0

from dtn_lab import (
    AdmissibleDiskClass,
    CylinderClass,
    b_series,
    b_series_derivative,
    compute_zeros,
    cylinder_spectrum,
    disk_spectrum,
    lipschitz_sweep,
    oracle_cylinder_multiplier,
    oracle_disk_spectrum,
    reconstruct,
    reconstruct_cylinder,
    recover_cyl_two_mode,
)
from dtn_lab.cli import main
from dtn_lab.cylinder_inverse import LIMIT_BASED, TWO_MODE
from dtn_lab.disk import b_series_excess, series_sums

DISK_CLASS = AdmissibleDiskClass(a=0.5, eps0=0.1, M=10.0, N=5.0)
CYLINDER_CLASS = CylinderClass(h=0.3, M=3.0)


def philox(seed):
    return np.random.Generator(np.random.Philox(seed))


def draw(rng, cls, margin=0.0):
    lo, hi = np.array(cls.bounds()).T
    span = hi - lo
    return cls.make(lo + margin * span + (1.0 - 2.0 * margin) * span * rng.random(lo.size))


def draw_distinct_cylinder(rng):
    while True:
        g = draw(rng, CYLINDER_CLASS)
        if abs(g.alpha1 - g.alpha2) > 1e-3:
            return g


def test_criterion_1_disk_oracle(acceptance):
    rng = philox(1)
    modes = np.arange(1, 33)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        g = draw(rng, DISK_CLASS)
        closed = disk_spectrum(g, 32).multipliers
        oracle = oracle_disk_spectrum(modes, g)
        worst = max(worst, float(np.max(np.abs(closed - oracle) / closed)))
    elapsed = time.perf_counter() - start
    assert acceptance(1, [
        (f"max rel error {worst:.2e} <= 1e-6", worst <= 1e-6),
        (f"runtime {elapsed:.1f}s < 60s", elapsed < 60.0),
    ])


def test_criterion_2_cylinder_oracle(acceptance):
    rng = philox(2)
    zeros = compute_zeros(16)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        g = draw(rng, CYLINDER_CLASS)
        closed = cylinder_spectrum(g, 16, zeros).multipliers
        oracle = np.array([oracle_cylinder_multiplier(n, g, zeros, rtol=1e-9) for n in range(1, 17)])
        worst = max(worst, float(np.max(np.abs(closed - oracle) / closed)))
    elapsed = time.perf_counter() - start
    assert acceptance(2, [
        (f"max rel error {worst:.2e} <= 1e-8", worst <= 1e-8),
        (f"runtime {elapsed:.1f}s < 30s", elapsed < 30.0),
    ])


def test_criterion_3_series_factor(acceptance):
    rng = philox(3)
    b0, d0, A = DISK_CLASS.b0, DISK_CLASS.d0, DISK_CLASS.derivative_constant
    n = rng.integers(1, 10**4 + 1, size=1000)
    b = b0 * rng.random(1000)
    values = np.array([b_series(int(k), x) for k, x in zip(n, b)])
    bounds_ok = bool(np.all((values >= 1.0) & (values <= d0)))

    big = 10**4
    limit_err = max(abs((2 * big + 1) * b_series_excess(big, x) - x / (1 - x)) for x in (0.1, 0.3, 0.5))

    k = 2 * n + 1
    deriv = np.array([b_series_derivative(int(m), x) for m, x in zip(n, b)])
    sandwich_ok = bool(np.all(((1 - b0) / k <= deriv) & (deriv <= A / k)))

    fd_err = 0.0
    for m, x in zip(n[:200], b[:200]):
        step = 1e-4 * max(x, 0.01)
        fd = (b_series(int(m), x + step) - b_series(int(m), x - step)) / (2 * step)
        fd_err = max(fd_err, abs(fd / b_series_derivative(int(m), x) - 1))
    assert acceptance(3, [
        ("1 <= B_n <= d0 on 1000 draws", bounds_ok),
        (f"scaled excess limit error {limit_err:.1e} <= 1e-2", limit_err <= 1e-2),
        ("derivative sandwich", sandwich_ok),
        (f"derivative vs finite differences {fd_err:.1e} <= 1e-5", fd_err <= 1e-5),
    ])


def test_criterion_4_series_limits(acceptance):
    n = 10**4
    worst = 0.0
    for b in (0.1, 0.3, 0.5, 0.7):
        t0, t1, _ = series_sums(np.array([n]), b)
        worst = max(
            worst,
            abs(t1[0] - 1 - ((1 - b) ** -1.5 - 1)),
            abs(t0[0] - 1 - (2 / (1 - b + math.sqrt(1 - b)) - 1)),
        )
    assert acceptance(4, [(f"max limit error {worst:.1e} <= 1e-3 at n = 1e4", worst <= 1e-3)])


def test_criterion_5_disk_reconstruction(acceptance):
    rng = philox(5)
    start = time.perf_counter()
    worst = np.zeros(4)
    for _ in range(20):
        cls = AdmissibleDiskClass(rng.uniform(0.2, 0.7), 0.1, 10.0, 5.0)
        g = draw(rng, cls, margin=0.05)
        r = reconstruct(disk_spectrum(g, 512)).gamma
        err = np.abs([r.alpha0 - g.alpha0, r.a - g.a, r.alpha1 - g.alpha1, r.alpha2 - g.alpha2])
        worst = np.maximum(worst, err)
    elapsed = time.perf_counter() - start
    tol = np.array([1e-6, 1e-4, 1e-3, 5e-2])
    names = ("alpha0", "a", "alpha1", "alpha2")
    checks = [(f"{k} error {e:.1e} <= {t:g}", e <= t) for k, e, t in zip(names, worst, tol)]
    checks.append((f"runtime {elapsed:.1f}s < 120s", elapsed < 120.0))
    assert acceptance(5, checks)


def test_criterion_6_cylinder_reconstruction(acceptance):
    rng = philox(6)
    zeros = compute_zeros(32)
    two_mode = 0.0
    for _ in range(200):
        g = draw_distinct_cylinder(rng)
        assert zeros[2] * g.h <= 300
        c = cylinder_spectrum(g, 2, zeros).multipliers
        got = recover_cyl_two_mode(c[0], c[1], zeros, g.alpha2)
        two_mode = max(two_mode, abs(got.alpha1 - g.alpha1), abs(got.h - g.h))
    paths = 0.0
    for _ in range(20):
        spec = cylinder_spectrum(draw_distinct_cylinder(rng), 32, zeros)
        a = reconstruct_cylinder(spec, zeros, method=LIMIT_BASED).gamma
        b = reconstruct_cylinder(spec, zeros, method=TWO_MODE).gamma
        paths = max(paths, abs(a.alpha1 - b.alpha1), abs(a.alpha2 - b.alpha2), abs(a.h - b.h))
    assert acceptance(6, [
        (f"two-mode round trip {two_mode:.1e} <= 1e-10", two_mode <= 1e-10),
        (f"limit vs two-mode {paths:.1e} <= 1e-6", paths <= 1e-6),
    ])


def seed_spread(cls, vary=None):
    mins = [lipschitz_sweep(cls, 1000, seed, vary=vary).min_ratio for seed in range(42, 48)]
    return mins[0], max(abs(m / mins[0] - 1) for m in mins[1:])


def test_criterion_7_disk_stability(acceptance):
    base, spread = seed_spread(DISK_CLASS)
    c = DISK_CLASS.alpha0_slice_constant
    sl = lipschitz_sweep(DISK_CLASS, 1000, 42, vary=0)
    assert acceptance(7, [
        (f"min ratio {base:.4g} > 0", base > 0),
        (f"seeds 43-47 within {100 * spread:.0f}% (need 5%)", spread <= 0.05),
        (f"alpha0 slice min {sl.min_ratio:.3g} >= {c:.3g}", sl.min_ratio >= c),
    ])


def test_criterion_8_cylinder_stability(acceptance):
    cls = CYLINDER_CLASS
    base, spread = seed_spread(cls)
    s2 = lipschitz_sweep(cls, 1000, 42, vary=1).min_ratio
    s1 = lipschitz_sweep(cls, 1000, 42, vary=0).min_ratio
    c2, c1 = cls.alpha2_slice_constant, cls.alpha1_slice_constant()
    assert acceptance(8, [
        (f"min ratio {base:.4g} > 0", base > 0),
        (f"seeds 43-47 within {100 * spread:.0f}% (need 5%)", spread <= 0.05),
        (f"alpha2 slice min {s2:.3g} >= {c2:.3g}", s2 >= c2),
        (f"alpha1 slice min {s1:.3g} >= {c1:.3g}", s1 >= c1),
    ])


def test_criterion_9_bessel_zeros(acceptance):
    table = compute_zeros(100)
    z = np.asarray(table.zeros)
    worst = 0.0
    for n in range(1, 101):
        guess = (n - 0.25) * math.pi
        ref = brentq(scipy_j0, guess - 0.5, guess + 0.5, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        worst = max(worst, abs(z[n - 1] - ref))
    mp = abs(z[99] - float(mpmath.besseljzero(0, 100)))
    gaps = np.diff(z)
    spacing = bool(np.all(gaps > 0) and np.all(np.abs(gaps - math.pi) < 0.1))
    j1_zeros = np.array([float(mpmath.besseljzero(1, k)) for k in range(1, 100)])
    interlace = bool(np.all((z[:-1] < j1_zeros) & (j1_zeros < z[1:])))
    assert acceptance(9, [
        (f"max deviation from bisection {worst:.1e} <= 1e-12", worst <= 1e-12 and mp <= 1e-12),
        ("spacing", spacing),
        ("interlacing with J1 zeros", interlace),
    ])


def test_criterion_10_cli(acceptance, tmp_path):
    def write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    sweep = write("class.json", {"schema": "dtn-lab/1", "geometry": "disk",
                                 "class": {"a": 0.5, "eps0": 0.1, "M": 10, "N": 5}})
    csv_a, csv_b = tmp_path / "a.csv", tmp_path / "b.csv"
    codes = {}
    codes["stability"] = [main(["stability", "--config", sweep, "--seed", "42", "--samples", "200",
                                "--out", str(p)]) for p in (csv_a, csv_b)]
    identical = csv_a.read_bytes() == csv_b.read_bytes()

    disk = {"alpha0": 1.0, "alpha1": 2.0, "alpha2": 0.5, "a": 0.5}
    good = write("good.json", {"schema": "dtn-lab/1", "geometry": "disk", "conductivity": disk})
    bad = write("bad.json", {"schema": "dtn-lab/1", "geometry": "disk", "conductivity": dict(disk, a=1.2)})
    short = tmp_path / "short.json"
    main(["forward", "--config", good, "--modes", "3", "--out", str(short)])
    tight = write("tight.json", {"schema": "dtn-lab/1", "geometry": "disk", "conductivity": disk,
                                 "tolerances": {"oracle_rtol": 1e-18}})
    expected = {
        0: ["forward", "--config", good, "--modes", "8", "--out", str(tmp_path / "f.json")],
        1: ["oracle-check", "--config", good, "--modes", "4", "--grid-points", "32",
            "--out", str(tmp_path / "o.csv")],
        2: ["stability", "--config", sweep, "--samples", "0"],
        3: ["oracle-check", "--config", tight, "--modes", "1", "--out", str(tmp_path / "t.csv")],
        4: ["invert", str(short)],
    }
    got = {code: main(argv) for code, argv in expected.items()}
    got_bad = main(["forward", "--config", bad])
    checks = [
        ("byte-identical CSV for seed 42", identical and codes["stability"] == [0, 0]),
    ]
    checks += [(f"exit code {code}", got[code] == code) for code in expected]
    checks.append(("a = 1.2 rejected with exit 2", got_bad == 2))
    assert acceptance(10, checks)
