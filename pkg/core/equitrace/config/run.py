import logging
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (
    AfterValidator,
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    field_validator,
)
from pydantic import ValidationError as PydanticValidationError
from ruamel.yaml.error import MarkedYAMLError, YAMLError

from equitrace.exceptions import ParseError, ValidationError
from equitrace.flow.bundle import BundleCocycle
from equitrace.flow.field import FlowField
from equitrace.flow.system import CoverSystem
from equitrace.geometry.chart import CoverChart
from equitrace.geometry.cutoff import BumpWindow
from equitrace.geometry.group import (
    FiniteGroup,
    FreeAbelianGroup,
    GroupModel,
    TranslationLine,
    TrivialGroup,
)
from equitrace.geometry.maps import AffineMap, ChartMap, CircleLiftMap
from equitrace.geometry.quotient import LatticeQuotient, MappingTorusQuotient
from equitrace.oracle.mollified import MollifierSpec
from equitrace.orbits.orbit import PeriodWindow
from equitrace.orbits.search import SeedSpec
from equitrace.trace.testfn import TestFunction, parse_test_function
from equitrace.util.filesystem import path_exists
from equitrace.util.yaml_parser import dump_yaml, load_yaml

log = logging.getLogger(__name__)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class QuotientConfig(StrictModel):
    kind: Literal["lattice", "mapping-torus"]
    periods: Optional[List[PositiveFloat]] = None
    matrix: Optional[List[List[int]]] = None


class ChartConfig(StrictModel):
    dim: int = Field(ge=1)
    coordinates: Optional[List[str]] = None
    sample_box: Optional[List[Tuple[float, float]]] = None
    quotient: Optional[QuotientConfig] = None


class MapConfig(StrictModel):
    map: Literal["affine", "circle-lift"] = "affine"
    matrix: Optional[List[List[float]]] = None
    shift: Optional[List[float]] = None
    amplitude: float = 0.0
    power: int = 1
    axis: int = 0


class WindowConfig(StrictModel):
    center: List[float]
    radius: PositiveFloat
    floor: float = Field(default=0.0, ge=0.0)


class GroupConfig(StrictModel):
    kind: Literal["trivial", "free-abelian", "finite", "translation-line"] = "trivial"
    generators: List[MapConfig] = []
    direction: Optional[List[float]] = None
    window: Optional[WindowConfig] = None
    search_radius: int = Field(default=3, ge=0)
    max_order: int = Field(default=1024, ge=1)


class FlowConfig(StrictModel):
    u: List[str]
    rtol: PositiveFloat = 1e-10
    atol: PositiveFloat = 1e-12
    t_max: PositiveFloat = 64.0


class BundleConfig(StrictModel):
    rank: int = Field(default=1, ge=1)
    generator: Optional[List[List[str]]] = None
    endomorphism: Optional[List[List[str]]] = None
    fiber_action: Optional[List[List[List[str]]]] = None
    line_action: Optional[List[List[str]]] = None


class OrbitsConfig(StrictModel):
    allow_both_signs: bool = False
    l_eps: PositiveFloat = 0.1
    l_window: Tuple[float, float]
    seed_points: int = Field(default=64, ge=1)
    seed_periods: int = Field(default=24, ge=2)
    seed_tolerance: PositiveFloat = 0.5
    det_threshold: PositiveFloat = 1e-8
    check_refinement: bool = False

    @field_validator("l_window")
    @classmethod
    def periods_avoid_zero(cls, value, info):
        lo, hi = value
        if not lo < hi:
            raise ValueError("l_min must be below l_max")
        if lo <= 0 <= hi and not info.data.get("allow_both_signs", False):
            raise ValueError("periods must avoid 0")
        return value


class CurveConfig(StrictModel):
    template: str
    start: float
    stop: float
    num: int = Field(default=41, ge=2)

    @field_validator("template")
    @classmethod
    def has_placeholder(cls, value):
        if "{c}" not in value:
            raise ValueError("template needs a {c} placeholder for the centre")
        return value


def _check_psi(spec: str) -> str:
    try:
        parse_test_function(spec)
    except ValidationError as exc:
        raise ValueError(exc.reason)
    return spec


PsiSpec = Annotated[str, AfterValidator(_check_psi)]


class TraceConfig(StrictModel):
    g: str = "e"
    radius: int = Field(default=0, ge=0)
    psi: List[PsiSpec] = []
    curve: Optional[CurveConfig] = None


class OracleConfig(StrictModel):
    mode: Literal["mollified", "covering", "catmap", "scalar"] = "mollified"
    psi: Optional[PsiSpec] = None
    epsilons: List[PositiveFloat] = [0.08, 0.04, 0.02]
    kappa: PositiveFloat = 4.5
    max_nodes: int = Field(default=20_000_000, ge=1)
    covering_radius: int = Field(default=4, ge=0)
    catmap_max_n: int = Field(default=3, ge=1, le=12)
    tolerance: Optional[PositiveFloat] = None

    @field_validator("epsilons")
    @classmethod
    def strictly_decreasing(cls, value):
        if not value:
            raise ValueError("at least one width is needed")
        if any(a <= b for a, b in zip(value, value[1:])):
            raise ValueError("widths must be strictly decreasing")
        return value


class RunConfig(StrictModel):
    model: Optional[str] = None
    seed: int = 0
    chart: ChartConfig
    group: GroupConfig = GroupConfig()
    flow: FlowConfig
    bundle: BundleConfig = BundleConfig()
    orbits: OrbitsConfig
    trace: TraceConfig = TraceConfig()
    oracle: OracleConfig = OracleConfig()

    def summary(self) -> str:
        return (
            f"model={self.model or 'custom'} dim={self.chart.dim} group={self.group.kind}"
            f" rank={self.bundle.rank} l_window={list(self.orbits.l_window)}"
            f" g={self.trace.g} psi={len(self.trace.psi)} oracle={self.oracle.mode}"
        )


def overlay(base: Dict, override: Dict) -> Dict:
    """Recursive merge; mappings merge key by key, anything else in override wins."""
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = overlay(out[key], value)
        else:
            out[key] = value
    return out


def _yaml_line(exc: YAMLError) -> Optional[int]:
    if isinstance(exc, MarkedYAMLError):
        mark = exc.problem_mark or exc.context_mark
        if mark is not None:
            return mark.line + 1
    return None


def validate_run_config(raw: Dict) -> RunConfig:
    if raw.get("model"):
        from equitrace.models.gallery import gallery_config

        raw = overlay(gallery_config(raw["model"]), raw)
    try:
        return RunConfig.model_validate(raw)
    except PydanticValidationError as exc:
        err = exc.errors()[0]
        key = ".".join(str(part) for part in err["loc"]) or "config"
        reason = "unknown key" if err["type"] == "extra_forbidden" else err["msg"]
        raise ValidationError(key, reason)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration, filling defaults."""
    try:
        raw = load_yaml(text)
    except YAMLError as exc:
        problem = getattr(exc, "problem", None) or str(exc)
        raise ParseError(f"invalid YAML: {problem}", line=_yaml_line(exc))
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ParseError("the configuration must be a mapping of sections", line=1)
    config = validate_run_config(raw)
    log.info(f"Configuration: {config.summary()}")
    return config


def load_run_config(uri: Union[str, Path]) -> RunConfig:
    log.debug(f"Attempting to load run config from {uri}")
    if not path_exists(uri):
        raise ValidationError("config", f"file {uri} does not exist")
    config = parse_config(Path(uri).read_text(encoding="utf-8"))
    log.debug(f"Run config is successfully loaded from {uri}")
    return config


def dump_config(config: RunConfig) -> str:
    return dump_yaml(config.model_dump(mode="json"))


def _build_map(conf: MapConfig, dim: int, key: str) -> ChartMap:
    try:
        if conf.map == "circle-lift":
            return CircleLiftMap(conf.amplitude, conf.power, conf.axis, dim, conf.shift)
        matrix = np.eye(dim) if conf.matrix is None else conf.matrix
        return AffineMap(matrix, conf.shift)
    except (ValueError, IndexError) as exc:
        raise ValidationError(key, str(exc))


def build_group(config: RunConfig) -> GroupModel:
    conf, dim = config.group, config.chart.dim
    maps = [
        _build_map(g, dim, f"group.generators.{i}") for i, g in enumerate(conf.generators)
    ]
    if conf.kind == "trivial":
        return TrivialGroup(dim)
    if conf.kind == "free-abelian":
        return FreeAbelianGroup(maps)
    if conf.kind == "finite":
        if not all(isinstance(f, AffineMap) for f in maps):
            raise ValidationError(
                "group.generators", "finite groups need affine generators"
            )
        return FiniteGroup(maps, max_order=conf.max_order)
    if conf.direction is None:
        raise ValidationError("group.direction", "translation lines need a direction")
    return TranslationLine(conf.direction)


def build_chart(config: RunConfig) -> CoverChart:
    conf = config.chart
    quotient = None
    if conf.quotient is not None:
        q = conf.quotient
        try:
            if q.kind == "lattice":
                if q.periods is None:
                    raise ValidationError(
                        "chart.quotient.periods", "lattice needs periods"
                    )
                quotient = LatticeQuotient(q.periods)
            else:
                if q.matrix is None:
                    raise ValidationError(
                        "chart.quotient.matrix", "mapping torus needs a matrix"
                    )
                quotient = MappingTorusQuotient(q.matrix)
        except ValueError as exc:
            raise ValidationError("chart.quotient", str(exc))
        if quotient.dim != conf.dim:
            raise ValidationError(
                "chart.quotient", f"quotient acts on dimension {quotient.dim}"
            )
    return CoverChart(
        dim=conf.dim,
        coordinates=list(conf.coordinates or []),
        sample_box=[tuple(b) for b in conf.sample_box] if conf.sample_box else None,
        quotient=quotient,
    )


def build_system(config: RunConfig) -> CoverSystem:
    chart = build_chart(config)
    group = build_group(config)
    field = FlowField(
        config.flow.u,
        chart.coordinates,
        rtol=config.flow.rtol,
        atol=config.flow.atol,
        t_max=config.flow.t_max,
    )
    b = config.bundle
    bundle = BundleCocycle.from_strings(
        field,
        group,
        rank=b.rank,
        generator=b.generator,
        endomorphism=b.endomorphism,
        fiber_action=b.fiber_action,
        line_action=b.line_action,
    )
    window = None
    if config.group.window is not None:
        w = config.group.window
        if len(w.center) != chart.dim:
            raise ValidationError(
                "group.window.center", f"expected {chart.dim} coordinates"
            )
        window = BumpWindow(tuple(w.center), w.radius, w.floor)
    system = CoverSystem(
        name=config.model or "custom",
        chart=chart,
        group=group,
        field=field,
        bundle=bundle,
        window=window,
        search_radius=config.group.search_radius,
    )
    log.debug(f"Built system {system.describe()}")
    return system


def period_window(config: RunConfig) -> PeriodWindow:
    lo, hi = config.orbits.l_window
    return PeriodWindow(lo, hi, config.orbits.allow_both_signs, config.orbits.l_eps)


def seed_spec(config: RunConfig) -> SeedSpec:
    o = config.orbits
    return SeedSpec(
        points=o.seed_points, periods=o.seed_periods, tolerance=o.seed_tolerance
    )


def mollifier_spec(config: RunConfig) -> MollifierSpec:
    o = config.oracle
    return MollifierSpec(epsilons=tuple(o.epsilons), kappa=o.kappa, max_nodes=o.max_nodes)


def pairing_functions(config: RunConfig) -> List[Tuple[str, TestFunction]]:
    return [(spec, parse_test_function(spec)) for spec in config.trace.psi]


def oracle_test_function(config: RunConfig) -> TestFunction:
    spec = config.oracle.psi or (config.trace.psi[0] if config.trace.psi else None)
    if spec is None:
        raise ValidationError("oracle.psi", "no test function configured for the oracle")
    return parse_test_function(spec)


def curve_centers(config: RunConfig) -> List[float]:
    curve = config.trace.curve
    if curve is None:
        return []
    return np.linspace(curve.start, curve.stop, curve.num).tolist()


def apply_overrides(
    config: RunConfig,
    g: Optional[str] = None,
    psi: Tuple[str, ...] = (),
    mode: Optional[str] = None,
) -> RunConfig:
    """Re-validate the configuration with command-line values in place of its own."""
    update: Dict = {}
    if g is not None:
        update.setdefault("trace", {})["g"] = g
    if psi:
        update.setdefault("trace", {})["psi"] = list(psi)
    if mode is not None:
        update.setdefault("oracle", {})["mode"] = mode
    if not update:
        return config
    raw = overlay(config.model_dump(mode="json", exclude={"model"}), update)
    return validate_run_config(raw).model_copy(update={"model": config.model})
