from pathlib import Path

import pytest

from equitrace.config.run import (
    apply_overrides,
    build_system,
    curve_centers,
    dump_config,
    load_run_config,
    oracle_test_function,
    pairing_functions,
    parse_config,
    period_window,
    validate_run_config,
)
from equitrace.exceptions import ParseError, ValidationError
from equitrace.geometry.group import TranslationLine
from equitrace.models.gallery import gallery_config, gallery_quotient, model_names
from equitrace.trace.testfn import Gaussian

CONFIG_DIR = Path(__file__).parents[2] / "configs"

MINIMAL = {
    "chart": {"dim": 1},
    "flow": {"u": ["1"]},
    "orbits": {"l_window": [0.5, 1.5]},
}


def test_load_translation_line_config():
    config = load_run_config(CONFIG_DIR / "translation-line.yml")
    assert config.model is None
    assert config.trace.g == "0.7"
    assert len(config.trace.psi) == 3
    assert config.oracle.mode == "mollified"
    assert period_window(config).to_list() == [[-2.0, -0.1], [0.1, 2.0]]
    centers = curve_centers(config)
    assert len(centers) == 56
    assert centers[0] == pytest.approx(0.45)
    assert centers[-1] == pytest.approx(1.0)
    assert isinstance(build_system(config).group, TranslationLine)


def test_pairing_functions():
    config = load_run_config(CONFIG_DIR / "translation-line.yml")
    pairs = pairing_functions(config)
    assert [spec for spec, _ in pairs] == config.trace.psi
    assert [psi for _, psi in pairs] == [
        Gaussian(0.7, 0.05),
        Gaussian(0.75, 0.1),
        Gaussian(0.6, 0.08),
    ]


@pytest.mark.parametrize(
    "path", sorted(CONFIG_DIR.glob("*.yml")), ids=lambda p: p.stem
)
def test_shipped_configs_build(path):
    config = load_run_config(path)
    system = build_system(config)
    assert system.chart.dim == config.chart.dim


@pytest.mark.parametrize("name", model_names())
def test_gallery_models_build(name):
    config = validate_run_config({"model": name})
    assert config.model == name
    system = build_system(config)
    assert system.name == name
    assert system.group.parse(config.trace.g) is not None


def test_gallery_lookup():
    assert gallery_quotient("circle") is not None
    assert gallery_quotient("catmap") is None
    assert gallery_quotient(None) is None
    first = gallery_config("circle")
    first["flow"]["u"] = ["2"]
    assert gallery_config("circle")["flow"]["u"] == ["1"]


@pytest.mark.parametrize(
    "raw,match",
    [
        ({"model": "torus"}, "unknown model"),
        ({"model": "circle", "group": {"winddow": {}}}, "group.winddow: unknown key"),
        ({"model": "circle", "orbits": {"l_window": [-1.0, 1.0]}}, "avoid 0"),
        ({"model": "circle", "orbits": {"l_window": [2.0, 1.0]}}, "below l_max"),
        ({"model": "circle", "oracle": {"catmap_max_n": 13}}, "oracle.catmap_max_n"),
        (
            {"model": "circle", "oracle": {"epsilons": [0.02, 0.04]}},
            "strictly decreasing",
        ),
        (
            {"model": "circle", "trace": {"psi": ["cosine:center=1"]}},
            "unknown test function",
        ),
        (
            {
                "model": "circle",
                "trace": {"psi": ["bump:center=2,radius=1", "cosine:center=1"]},
            },
            "trace.psi.1",
        ),
        ({"model": "circle", "oracle": {"psi": "cosine:center=1"}}, "oracle.psi"),
        (
            {
                "model": "circle",
                "trace": {"curve": {"template": "x", "start": 1, "stop": 2}},
            },
            "placeholder",
        ),
        (
            {"chart": {"dim": 0}, "flow": {"u": []}, "orbits": {"l_window": [1, 2]}},
            "chart.dim",
        ),
        ({"flow": {"u": ["1"]}, "orbits": {"l_window": [1, 2]}}, "chart"),
    ],
)
def test_validation_errors(raw, match):
    with pytest.raises(ValidationError, match=match):
        validate_run_config(raw)


@pytest.mark.parametrize(
    "sections,match",
    [
        ({"group": {"kind": "translation-line"}}, "need a direction"),
        (
            {"group": {"kind": "finite", "generators": [{"map": "circle-lift"}]}},
            "affine generators",
        ),
        (
            {
                "group": {
                    "kind": "free-abelian",
                    "generators": [{"shift": [1.0]}],
                    "window": {"center": [0.5, 0.5], "radius": 0.75},
                }
            },
            "expected 1 coordinates",
        ),
        (
            {"chart": {"dim": 1, "quotient": {"kind": "lattice"}}},
            "lattice needs periods",
        ),
        (
            {"chart": {"dim": 1, "quotient": {"kind": "mapping-torus"}}},
            "needs a matrix",
        ),
        (
            {"group": {"kind": "free-abelian", "generators": [{"matrix": [[0.0]]}]}},
            "group.generators.0",
        ),
    ],
)
def test_build_errors(sections, match):
    config = validate_run_config({**MINIMAL, **sections})
    with pytest.raises(ValidationError, match=match):
        build_system(config)


def test_yaml_error_carries_line():
    with pytest.raises(ParseError, match="invalid YAML") as info:
        parse_config("model: circle\nflow:\n  u: [1, 2\n")
    assert info.value.line is not None
    assert info.value.formatted_message.startswith("ERROR: line")


def test_document_must_be_mapping():
    with pytest.raises(ParseError, match="mapping of sections"):
        parse_config("- circle\n- catmap\n")


def test_missing_file(tmp_path):
    with pytest.raises(ValidationError, match="does not exist"):
        load_run_config(tmp_path / "absent.yml")


def test_dump_round_trip():
    config = load_run_config(CONFIG_DIR / "translation-line.yml")
    again = parse_config(dump_config(config))
    assert again == config


def test_overrides():
    config = validate_run_config({"model": "translation-line"})
    changed = apply_overrides(
        config, g="-1.3", psi=("bump:center=-1.3,radius=0.5",), mode="covering"
    )
    assert changed.model == "translation-line"
    assert changed.trace.g == "-1.3"
    assert changed.trace.psi == ["bump:center=-1.3,radius=0.5"]
    assert changed.oracle.mode == "covering"
    assert config.trace.g == "0.7"
    assert apply_overrides(config) is config


def test_override_is_validated():
    config = validate_run_config({"model": "translation-line"})
    with pytest.raises(ValidationError, match="trace.psi.0"):
        apply_overrides(config, psi=("bump:center=0.1,radius=0.5",))


def test_oracle_test_function_fallback():
    config = validate_run_config({"model": "degenerate-shear"})
    assert oracle_test_function(config).spec == "bump:center=1,radius=0.4"
    bare = validate_run_config({"model": "degenerate-shear", "trace": {"psi": []}})
    with pytest.raises(ValidationError, match="oracle.psi"):
        oracle_test_function(bare)
