import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from equitrace.config.run import (
    build_system,
    period_window,
    seed_spec,
    validate_run_config,
)
from equitrace.exceptions import DegenerateOrbit, TruncationWarning, ValidationError
from equitrace.geometry.cutoff import BumpWindow
from equitrace.oracle.catmap import catmap_fixed_points
from equitrace.orbits.search import find_orbits
from equitrace.trace.comb import assemble, pair, scalar_factorization
from equitrace.trace.testfn import (
    Bump,
    Combination,
    Gaussian,
    PolyBump,
    parse_test_function,
)

ROTATION_DET = (1 - math.exp(-math.pi)) * (1 - math.exp(-math.pi / 2))


def setup(model, g=None):
    config = validate_run_config({"model": model})
    system = build_system(config)
    x = system.group.parse(g if g is not None else config.trace.g)
    return config, system, x


@lru_cache(maxsize=None)
def comb_for(model, g=None):
    config, system, x = setup(model, g)
    return assemble(
        system, x, period_window(config), config.trace.radius, seed_spec(config)
    )


@pytest.mark.parametrize("g,l", [("0.7", 0.7), ("-1.3", -1.3)])
def test_translation_line_atom(g, l):
    comb = comb_for("translation-line", g)
    assert len(comb.atoms) == 1
    atom = comb.atoms[0]
    assert atom.l == pytest.approx(l, abs=1e-10)
    assert atom.weight == pytest.approx(1.0, abs=1e-10)
    assert comb.diagnostics["truncated"] is False


@pytest.mark.parametrize(
    "spec",
    [
        "gaussian:center=0.7,width=0.05",
        "gaussian:center=0.75,width=0.1",
        "gaussian:center=0.6,width=0.08",
    ],
)
def test_translation_line_pairing_samples_psi(spec):
    psi = parse_test_function(spec)
    assert pair(comb_for("translation-line", "0.7"), psi) == pytest.approx(
        float(psi(0.7)), abs=1e-10
    )


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-5, 5, allow_nan=False),
    b=st.floats(-5, 5, allow_nan=False),
    c1=st.floats(0.5, 1.5),
    c2=st.floats(0.6, 1.5),
)
def test_pairing_is_linear(a, b, c1, c2):
    comb = comb_for("translation-line", "0.7")
    psi1, psi2 = Gaussian(c1, 0.05), Gaussian(c2, 0.07)
    combined = Combination(((a, psi1), (b, psi2)))
    expected = a * pair(comb, psi1) + b * pair(comb, psi2)
    assert pair(comb, combined) == pytest.approx(expected, abs=1e-12)


def test_pairing_warns_outside_window():
    comb = comb_for("translation-line", "0.7")
    with pytest.warns(TruncationWarning, match="leaves the window"):
        pair(comb, Gaussian(2.0, 0.1))


def test_finite_rotation_weight():
    comb = comb_for("finite-rotation")
    assert len(comb.atoms) == 1
    assert comb.atoms[0].l == pytest.approx(math.pi / 2, abs=1e-8)
    assert comb.weight_at(math.pi / 2, tol=1e-6) == pytest.approx(
        (math.pi / 2) / ROTATION_DET, rel=1e-6
    )
    assert comb.diagnostics["coset_representatives"] == ["0"]


def test_conjugate_elements_share_comb():
    config, system, g = setup("dihedral-rotation")
    group = system.group
    assert not group.is_abelian
    assert group.size == 16
    reps = group.coset_representatives(g)
    assert len(reps) == 2
    conjugate = group.conjugate(reps[1], g)
    assert conjugate != g

    window, seeds = period_window(config), seed_spec(config)
    periods = [
        sorted(o.l for o in find_orbits(system, x, window, seeds)) for x in (g, conjugate)
    ]
    assert len(periods[0]) == 1
    assert_allclose(periods[1], periods[0], atol=1e-8)

    combs = [assemble(system, x, window, seeds=seeds) for x in (g, conjugate)]
    assert_allclose(
        [a.l for a in combs[1].atoms], [a.l for a in combs[0].atoms], atol=1e-8
    )
    assert_allclose(
        [a.weight for a in combs[1].atoms], [a.weight for a in combs[0].atoms], rtol=1e-8
    )
    assert {c.h for c in combs[0].contributions} == set(reps)
    det = ROTATION_DET * (1 + math.exp(-math.pi))
    for c in combs[0].contributions:
        assert c.orbit.l == pytest.approx(math.pi / 2, abs=1e-8)
        assert c.orbit.poincare.det_one_minus_p == pytest.approx(det, rel=1e-6)


def test_cutoff_independence():
    config, system, x = setup("finite-rotation")
    windowed = system.with_window(BumpWindow((1.0, 0.0, 0.0), 0.5, 0.01))
    window, seeds = period_window(config), seed_spec(config)
    plain = assemble(system, x, window, seeds=seeds)
    bumped = assemble(windowed, x, window, seeds=seeds)
    assert_allclose(
        [a.weight for a in bumped.atoms], [a.weight for a in plain.atoms], rtol=1e-7
    )


@pytest.mark.parametrize(
    "model,window",
    [
        ("circle", BumpWindow((0.1,), 0.6)),
        ("suspension", BumpWindow((0.3, 0.2), 0.9)),
    ],
)
def test_cutoff_independence_on_quotients(model, window):
    config, system, x = setup(model)
    plain = comb_for(model)
    moved = assemble(
        system.with_window(window),
        x,
        period_window(config),
        config.trace.radius,
        seed_spec(config),
    )
    assert len(moved.atoms) == len(plain.atoms) > 0
    assert_allclose([a.l for a in moved.atoms], [a.l for a in plain.atoms], atol=1e-9)
    assert_allclose(
        [a.weight for a in moved.atoms], [a.weight for a in plain.atoms], rtol=1e-7
    )


def test_catmap_comb_matches_census():
    comb = comb_for("catmap")
    assert_allclose([a.l for a in comb.atoms], [1.0, 2.0, 3.0], atol=1e-9)
    for n in (1, 2, 3):
        census = catmap_fixed_points(n)
        assert comb.weight_at(float(n)) == pytest.approx(
            census.predicted_weight, rel=1e-8
        )
        contributors = comb.atoms[n - 1].contributors
        assert len(contributors) == len(census.orbits)


@settings(max_examples=25, deadline=None)
@given(
    center=st.floats(1.2, 2.8),
    radius=st.floats(0.2, 0.7),
    tilt=st.floats(-4, 4, allow_nan=False),
)
def test_pairing_is_bounded_by_total_variation(center, radius, tilt):
    comb = comb_for("catmap")
    psi = PolyBump(center, radius, (1.0, tilt))
    grid = np.linspace(*psi.support, 4001)
    sup = max(
        float(np.max(np.abs(psi(grid)))),
        max(abs(float(psi(a.l))) for a in comb.atoms),
    )
    assert abs(pair(comb, psi)) <= comb.total_variation * sup + 1e-12
    assert comb.diagnostics["total_variation"] == comb.total_variation


def test_rank_two_bundle_fiber_trace():
    comb = comb_for("rank2-bundle")
    assert len(comb.contributions) == 1
    l = comb.contributions[0].orbit.l
    phase = math.pi / 2 - 0.3 * l
    expected = math.exp(l / 2) * (4 * math.cos(phase) - math.sin(phase))
    assert comb.contributions[0].fiber_trace == pytest.approx(expected, rel=1e-6)


def test_rank_two_bundle_factorizes():
    config, system, _ = setup("rank2-bundle")
    comb = comb_for("rank2-bundle")
    assert scalar_factorization(system, comb, seeds=seed_spec(config)) <= 1e-8


def test_degenerate_orbit_is_rejected():
    config, system, x = setup("degenerate-shear")
    with pytest.raises(DegenerateOrbit, match="det"):
        assemble(system, x, period_window(config), seeds=seed_spec(config))


def test_comb_record():
    record = comb_for("translation-line", "0.7").to_dict()
    assert record["g"] == "0.7"
    assert record["window"] == [[-2.0, -0.1], [0.1, 2.0]]
    assert [a["l"] for a in record["atoms"]] == pytest.approx([0.7])


@pytest.mark.parametrize(
    "spec,expected",
    [
        ("gaussian:center=0.7,width=0.05", Gaussian(0.7, 0.05)),
        ("bump:center=2,radius=1.4", Bump(2.0, 1.4)),
        (" bump: center = -1 , radius = 0.5 ", Bump(-1.0, 0.5)),
        (
            "polybump:center=1,radius=0.5,coeffs=1;0;-1",
            PolyBump(1.0, 0.5, (1.0, 0.0, -1.0)),
        ),
        pytest.param(
            "gaussian:center=0.1,width=0.05",
            None,
            marks=pytest.mark.xfail(raises=ValidationError, match="center"),
        ),
        pytest.param(
            "bump:center=0.5,radius=1",
            None,
            marks=pytest.mark.xfail(raises=ValidationError, match="vanish near"),
        ),
        pytest.param(
            "cosine:center=1",
            None,
            marks=pytest.mark.xfail(
                raises=ValidationError, match="unknown test function"
            ),
        ),
        pytest.param(
            "bump:center=1",
            None,
            marks=pytest.mark.xfail(raises=ValidationError, match="needs"),
        ),
        pytest.param(
            "bump:center=1,radius=x",
            None,
            marks=pytest.mark.xfail(raises=ValidationError, match="non-numeric"),
        ),
        pytest.param(
            "bump:center=1,radius=0.5,width=2",
            None,
            marks=pytest.mark.xfail(raises=ValidationError, match="unknown bump"),
        ),
        pytest.param(
            "bump:center=1,radius",
            None,
            marks=pytest.mark.xfail(raises=ValidationError, match="key=value"),
        ),
    ],
)
def test_parse_test_function(spec, expected):
    assert parse_test_function(spec) == expected


@pytest.mark.parametrize(
    "psi,peak",
    [
        (Gaussian(0.7, 0.05), 0.7),
        (Bump(2.0, 1.4), 2.0),
        (PolyBump(1.0, 0.5, (3.0, 1.0)), 1.0),
    ],
)
def test_test_function_shapes(psi, peak):
    lo, hi = psi.support
    assert lo < peak < hi
    assert float(psi(hi + 1.0)) == pytest.approx(0.0, abs=1e-7)
    assert parse_test_function(psi.spec) == psi


def test_polybump_values():
    psi = PolyBump(1.0, 0.5, (3.0, 1.0))
    assert float(psi(1.0)) == pytest.approx(3.0)
    assert float(psi(1.25)) == pytest.approx(3.5 * math.exp(1 - 1 / 0.75))
    assert float(psi(1.5)) == 0.0


@pytest.mark.parametrize(
    "psi",
    [
        Gaussian(math.pi / 4, 1 / 9),
        Bump(math.sqrt(2), 1 / 3),
        PolyBump(4 / 3, 0.3, (1 / 7, 2.0)),
    ],
)
def test_spec_is_exact(psi):
    assert parse_test_function(psi.spec) == psi


def test_spec_text():
    assert Gaussian(0.7, 0.05).spec == "gaussian:center=0.7,width=0.05"
    assert Bump(1.0, 0.4).spec == "bump:center=1,radius=0.4"
    combo = Combination(((0.1, Bump(2.0, 1.0)), (-2.0, Gaussian(0.7, 0.05))))
    assert combo.spec == (
        "0.1*(bump:center=2,radius=1) + -2*(gaussian:center=0.7,width=0.05)"
    )


def test_combination_support():
    psi = Combination(((1.0, Bump(2.0, 1.0)), (-2.0, Gaussian(0.7, 0.05))))
    assert psi.support == pytest.approx((0.4, 3.0))
    assert_allclose(psi(np.array([2.0, 0.7])), [1.0, -2.0], atol=1e-12)
