import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from equitrace.exceptions import CoverageFailure, ValidationError
from equitrace.geometry.chart import CoverChart
from equitrace.geometry.cutoff import (
    BumpWindow,
    ConstantCutoff,
    LineCutoff,
    QuotientCutoff,
    build_cutoff,
)
from equitrace.geometry.group import (
    FiniteGroup,
    FreeAbelianGroup,
    GroupElt,
    TranslationLine,
    TrivialGroup,
)
from equitrace.geometry.maps import AffineMap, CircleLiftMap
from equitrace.geometry.quotient import LatticeQuotient, MappingTorusQuotient

QUARTER_TURN = [[0, -1, 0], [1, 0, 0], [0, 0, 1]]
TRANSPOSITION = [[0, 1, 0], [1, 0, 0], [0, 0, 1]]
THREE_CYCLE = [[0, 0, 1], [1, 0, 0], [0, 1, 0]]

LATTICE = FreeAbelianGroup(
    [AffineMap.translation([1.0, 0.0]), AffineMap.translation([0.0, 1.0])]
)
S3 = FiniteGroup([AffineMap(TRANSPOSITION), AffineMap(THREE_CYCLE)])
Z4 = FiniteGroup([AffineMap(QUARTER_TURN)])

lattice_elements = st.tuples(st.integers(-4, 4), st.integers(-4, 4)).map(GroupElt)
s3_elements = st.integers(0, 5).map(lambda i: GroupElt((i,)))


@pytest.mark.parametrize(
    "payload,expected",
    [
        ((), "e"),
        ((1, -2), "1,-2"),
        ((0.7,), "0.7"),
    ],
)
def test_group_element_str(payload, expected):
    assert str(GroupElt(payload)) == expected


@settings(max_examples=50, deadline=None)
@given(a=lattice_elements, b=lattice_elements, c=lattice_elements)
def test_free_abelian_axioms(a, b, c):
    g = LATTICE
    assert g.compose(g.compose(a, b), c) == g.compose(a, g.compose(b, c))
    assert g.compose(a, g.identity()) == a
    assert g.compose(a, g.inverse(a)) == g.identity()
    m = np.array([0.3, -0.2])
    assert_allclose(g.act(g.compose(a, b), m), g.act(a, g.act(b, m)), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(a=s3_elements, b=s3_elements, c=s3_elements)
def test_finite_group_axioms(a, b, c):
    g = S3
    assert g.compose(g.compose(a, b), c) == g.compose(a, g.compose(b, c))
    assert g.compose(g.inverse(a), a) == g.identity()
    m = np.array([0.1, 0.2, 0.3])
    assert_allclose(g.act(g.compose(a, b), m), g.act(a, g.act(b, m)), atol=1e-12)


@pytest.mark.parametrize(
    "group,size,abelian",
    [
        (Z4, 4, True),
        (S3, 6, False),
    ],
)
def test_finite_group_closure(group, size, abelian):
    assert group.size == size
    assert group.is_abelian is abelian
    assert group.ball() == [GroupElt((i,)) for i in range(size)]


def test_finite_group_orders():
    assert Z4.order(GroupElt((1,))) == 4
    assert Z4.order(Z4.compose(GroupElt((1,)), GroupElt((1,)))) == 2
    assert S3.order(GroupElt((1,))) == 2
    assert S3.order(GroupElt((2,))) == 3


@pytest.mark.parametrize(
    "index,count",
    [
        (0, 1),
        (1, 3),
        (2, 2),
    ],
)
def test_coset_representatives(index, count):
    g = GroupElt((index,))
    reps = S3.coset_representatives(g)
    assert len(reps) == count
    conjugates = {S3.conjugate(h, g) for h in reps}
    assert len(conjugates) == count


def test_coset_representatives_abelian():
    assert Z4.coset_representatives(GroupElt((1,))) == [GroupElt((0,))]
    assert LATTICE.coset_representatives(GroupElt((1, 0)), radius=3) == [GroupElt((0, 0))]


def test_act_jacobian():
    m = np.array([0.3, -0.2, 0.5])
    assert_allclose(Z4.act_jacobian(GroupElt((2,)), m), np.diag([-1.0, -1.0, 1.0]))
    assert_allclose(
        LATTICE.act_jacobian(GroupElt((3, -1)), m[:2]), np.eye(2), atol=1e-15
    )

    lifted = FreeAbelianGroup([CircleLiftMap(0.1)])
    g, x, h = GroupElt((1,)), np.array([0.3]), 1e-6
    fd = (lifted.act(g, x + h) - lifted.act(g, x - h)) / (2 * h)
    assert_allclose(lifted.act_jacobian(g, x), [fd], atol=1e-8)
    assert_allclose(
        lifted.act_jacobian(g, x), [[1 + 0.2 * np.pi * np.cos(0.6 * np.pi)]], atol=1e-12
    )


@pytest.mark.parametrize(
    "angle",
    [
        pytest.param(
            1.0,
            marks=pytest.mark.xfail(raises=ValidationError, match="do not close"),
        ),
    ],
)
def test_finite_group_rejects_infinite_generator(angle):
    c, s = np.cos(angle), np.sin(angle)
    FiniteGroup([AffineMap([[c, -s], [s, c]])], max_order=50)


@pytest.mark.parametrize(
    "group,text,expected",
    [
        (TrivialGroup(1), "e", GroupElt(())),
        (LATTICE, "1, -2", GroupElt((1, -2))),
        (Z4, "3", GroupElt((3,))),
        (TranslationLine([1.0]), "-1.3", GroupElt((-1.3,))),
        pytest.param(
            LATTICE,
            "1",
            None,
            marks=pytest.mark.xfail(raises=ValidationError, match="expected 2 integers"),
        ),
        pytest.param(
            Z4,
            "4",
            None,
            marks=pytest.mark.xfail(raises=ValidationError, match="element index"),
        ),
        pytest.param(
            TrivialGroup(1),
            "1",
            None,
            marks=pytest.mark.xfail(raises=ValidationError, match="only 'e'"),
        ),
    ],
)
def test_parse_element(group, text, expected):
    assert group.parse(text) == expected


def test_lattice_ball_and_word_length():
    ball = LATTICE.ball(1)
    assert ball == sorted(ball)
    assert len(ball) == 5
    assert LATTICE.word_length(GroupElt((2, -1))) == 3


def test_translation_line_action():
    line = TranslationLine([1.0, 0.0])
    a = line.parse("0.7")
    assert_allclose(line.act(a, np.array([0.1, 0.2])), [0.8, 0.2])
    z, dist = line.locate(np.array([1.5, 0.2]), np.array([0.1, 0.2]))
    assert z.payload[0] == pytest.approx(1.4)
    assert dist == pytest.approx(0.0, abs=1e-12)


def test_affine_map_inverse_and_power():
    f = AffineMap([[2.0, 1.0], [1.0, 1.0]], [0.5, -0.25])
    m = np.array([[0.1, 0.2], [0.3, -0.4]])
    assert_allclose(f.inverse()(f(m)), m, atol=1e-12)
    assert_allclose(f.power(3)(m), f(f(f(m))), atol=1e-12)
    assert_allclose(f.power(-2)(f.power(2)(m)), m, atol=1e-12)


@pytest.mark.parametrize(
    "matrix",
    [
        pytest.param(
            [[1.0, 2.0], [2.0, 4.0]],
            marks=pytest.mark.xfail(raises=ValueError, match="singular"),
        ),
    ],
)
def test_affine_map_rejects_singular(matrix):
    AffineMap(matrix)


def test_circle_lift_map():
    f = CircleLiftMap(0.1, power=1, axis=0, dim=2, shift=[0.0, 1.0])
    m = np.array([[0.1, 0.0], [0.35, 0.5], [0.8, -1.0]])
    assert_allclose(f.inverse()(f(m)), m, atol=1e-10)
    assert_allclose(f.power(2)(m), f(f(m)), atol=1e-12)
    # lift of a degree one map
    assert_allclose(f(m + [1.0, 0.0])[:, 0], f(m)[:, 0] + 1.0, atol=1e-12)

    h = 1e-6
    jac = f.jacobian(m[1])
    fd = (f(m[1] + [h, 0.0]) - f(m[1] - [h, 0.0])) / (2 * h)
    assert_allclose(jac[:, 0], fd, atol=1e-8)


def test_circle_lift_inverse_far_from_origin():
    f = CircleLiftMap(0.1)
    y = np.array([5583.6, -812.25, 0.0, 1e6 + 0.3])
    assert_allclose(f.lift(f.lift_inverse(y)), y, rtol=0, atol=1e-9)
    assert float(f.lift(f.lift_inverse(5583.6))) == pytest.approx(5583.6, abs=1e-9)
    m = np.array([[5583.6, 0.0]])
    g = CircleLiftMap(0.1, power=-3, dim=2, shift=[0.0, -3.0])
    assert_allclose(g.inverse()(g(m)), m, atol=1e-8)


@pytest.mark.parametrize(
    "amplitude",
    [
        pytest.param(
            0.2,
            marks=pytest.mark.xfail(raises=ValueError, match="not a diffeomorphism"),
        ),
    ],
)
def test_circle_lift_rejects_folding(amplitude):
    CircleLiftMap(amplitude)


def test_lattice_quotient():
    q = LatticeQuotient([1.0])
    assert_allclose(q.displacement(np.array([2.3]), np.array([0.1])), [0.2], atol=1e-12)
    deck, payload = q.reduce(np.array([2.3]), np.array([0.1]))
    assert payload == (2,)
    assert_allclose(deck(np.array([0.1])), [2.1])


def test_mapping_torus_quotient():
    q = MappingTorusQuotient([[2, 1], [1, 1]])
    point = np.array([0.2, 0.3, 0.4])
    for payload in [(1, 1, 0), (-1, 0, 2), (2, -1, 1)]:
        image = q.deck_map(payload)(point)
        assert_allclose(q.displacement(image, point), np.zeros(3), atol=1e-12)
        _, found = q.reduce(image, point)
        assert found == payload
    assert q.generators() == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]


@pytest.mark.parametrize(
    "matrix",
    [
        pytest.param(
            [[2, 0], [0, 1]],
            marks=pytest.mark.xfail(raises=ValueError, match="unimodular"),
        ),
    ],
)
def test_mapping_torus_rejects_non_unimodular(matrix):
    MappingTorusQuotient(matrix)


def test_chart_defaults():
    chart = CoverChart(dim=2)
    assert chart.coordinates == ["x1", "x2"]
    assert chart.sample_box == [(0.0, 1.0), (0.0, 1.0)]
    grid = chart.sample_grid(100)
    assert grid.shape == (100, 2)
    assert np.all((grid > 0) & (grid < 1))
    points = chart.random_points(np.random.default_rng(3), 7)
    assert points.shape == (7, 2)


@pytest.mark.parametrize(
    "kwargs",
    [
        pytest.param(
            {"dim": 2, "sample_box": [(0.0, 1.0)]},
            marks=pytest.mark.xfail(raises=ValidationError, match="expected 2 intervals"),
        ),
        pytest.param(
            {"dim": 1, "coordinates": ["x", "y"]},
            marks=pytest.mark.xfail(raises=ValidationError, match="expected 1 labels"),
        ),
    ],
)
def test_chart_validation(kwargs):
    CoverChart(**kwargs)


def test_cutoff_trivial_and_finite():
    trivial = build_cutoff(None, TrivialGroup(1), CoverChart(dim=1))
    assert isinstance(trivial, ConstantCutoff)
    assert trivial(np.array([0.3])) == 1.0

    chart = CoverChart(dim=3, sample_box=[(-1.6, 1.6), (-1.6, 1.6), (-0.6, 0.6)])
    finite = build_cutoff(None, Z4, chart)
    assert finite(np.array([1.0, 0.0, 0.0])) == pytest.approx(0.25)
    assert finite.partition_residual(chart.sample_grid(200)) == pytest.approx(0.0)


def test_cutoff_free_abelian_partition_of_unity():
    group = FreeAbelianGroup([AffineMap.translation([1.0])])
    chart = CoverChart(dim=1)
    cutoff = build_cutoff(BumpWindow((0.5,), 0.75), group, chart)
    assert isinstance(cutoff, QuotientCutoff)
    assert cutoff.partition_residual(chart.sample_grid(1000)) <= 1e-10
    assert cutoff(np.array([1.3])) == pytest.approx(0.0)


def test_cutoff_finite_group_with_window():
    chart = CoverChart(dim=3, sample_box=[(-1.6, 1.6), (-1.6, 1.6), (-0.6, 0.6)])
    window = BumpWindow((1.0, 0.0, 0.0), 1.5, floor=0.01)
    cutoff = build_cutoff(window, Z4, chart)
    assert cutoff.partition_residual(chart.sample_grid(500)) <= 1e-10


def test_cutoff_translation_line():
    line = TranslationLine([1.0])
    cutoff = build_cutoff(BumpWindow((0.0,), 0.5), line, CoverChart(dim=1))
    assert isinstance(cutoff, LineCutoff)
    assert cutoff.partition_residual(np.array([[0.1], [-0.3]])) <= 1e-10


def test_line_cutoff_batch_matches_pointwise():
    line = TranslationLine([1.0, 0.0])
    cutoff = LineCutoff(BumpWindow((0.0, 0.0), 0.5), line)
    points = np.array([[0.1, 0.2], [0.3, 0.2], [-0.2, -0.1], [0.0, 0.6]])
    batch = cutoff(points)
    single = [cutoff(p) for p in points]
    assert_allclose(batch, single, rtol=1e-12, atol=1e-14)
    assert batch[-1] == 0.0


@pytest.mark.parametrize(
    "radius,search_radius",
    [
        pytest.param(
            0.3,
            3,
            marks=pytest.mark.xfail(raises=CoverageFailure, match="do not cover"),
        ),
        pytest.param(
            0.75,
            0,
            marks=pytest.mark.xfail(raises=CoverageFailure, match="too small"),
        ),
    ],
)
def test_cutoff_failures(radius, search_radius):
    group = FreeAbelianGroup([AffineMap.translation([1.0])])
    build_cutoff(BumpWindow((0.5,), radius), group, CoverChart(dim=1), search_radius)


@pytest.mark.parametrize(
    "radius",
    [
        pytest.param(
            0.0,
            marks=pytest.mark.xfail(raises=ValidationError, match="must be positive"),
        ),
    ],
)
def test_window_validation(radius):
    BumpWindow((0.0,), radius)
