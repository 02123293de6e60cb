"""
Experiment configuration files.

An experiment is an INI file with the sections [experiment], [problem],
[perturbation], [solver] and [output]. Values are validated by pydantic
models that reject unknown keys; command-line flags override file values
through dotted "section.key" overrides.
"""
import configparser
import os
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from config import Config
from services.curve import CurveSupport, circle, ellipse, polyline
from services.krein import PointPerturbation
from services.multicenter import CenterSet
from services.renorm import RenormalizedPerturbation
from services.spectral_core import BaseProblem, Units, make_problem
from utils.constants import CATALOG_LABELS, CATALOG_PARAMETERS, CURVE_SHAPES, PERTURBATION_KINDS, SUBCOMMANDS
from utils.exceptions import ConfigError
from utils.logger import get_logger

logger = get_logger(__name__)

SECTIONS = ("experiment", "problem", "perturbation", "solver", "output")

Point = Union[float, List[float]]


def parse_point(value: Any) -> Optional[Point]:
    """'1.5' -> 1.5, '0.3, 0.2' -> [0.3, 0.2]."""
    if value is None or isinstance(value, (int, float)):
        return value
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value] if len(value) > 1 else float(value[0])
    parts = [p for p in str(value).replace(",", " ").split() if p]
    if not parts:
        return None
    return float(parts[0]) if len(parts) == 1 else [float(p) for p in parts]


def parse_points(value: Any) -> Optional[List[Point]]:
    """'-1; 1' -> [-1.0, 1.0], '0, 0; 1, 0' -> [[0, 0], [1, 0]]."""
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [parse_point(v) for v in value]
    return [parse_point(chunk) for chunk in str(value).split(";") if chunk.strip()]


def parse_floats(value: Any) -> Optional[List[float]]:
    """'1e-3, 3e-3 1e-2' -> [0.001, 0.003, 0.01]."""
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    if isinstance(value, (int, float)):
        return [float(value)]
    return [float(p) for p in str(value).replace(",", " ").split() if p]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExperimentSpec(_Section):
    command: Literal["spectrum", "green", "perturb", "scatter", "renorm", "multicenter", "curve", "secular"]
    name: str = "experiment"


class ProblemSpec(_Section):
    label: str
    kappa: Optional[float] = None
    omega: Optional[float] = None
    L1: Optional[float] = None
    L2: Optional[float] = None
    hbar: Optional[float] = None
    mass: Optional[float] = None

    @field_validator("label")
    @classmethod
    def known_label(cls, value: str) -> str:
        if value not in CATALOG_LABELS:
            raise ValueError(f"unknown problem '{value}', expected one of {CATALOG_LABELS}")
        return value

    @model_validator(mode="after")
    def catalog_parameters(self):
        missing = [name for name in CATALOG_PARAMETERS[self.label]["parameters"] if getattr(self, name) is None]
        if missing:
            raise ValueError(f"problem '{self.label}' needs {', '.join(missing)}")
        return self

    @property
    def dimension(self) -> int:
        return CATALOG_PARAMETERS[self.label]["dimension"]

    def parameters(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in CATALOG_PARAMETERS[self.label]["parameters"]}


class PerturbationSpec(_Section):
    kind: str = "point"
    alpha: Optional[float] = None
    support: Optional[Point] = None
    inv_alpha_r: float = 0.0
    mu2: Optional[float] = None
    mu2_to: Optional[float] = None
    points: Optional[List[Point]] = None
    alphas: Optional[List[float]] = None
    shape: Optional[str] = None
    center: Optional[Point] = None
    radius: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    vertices: Optional[List[Point]] = None
    closed: bool = True
    order: Optional[int] = None

    @field_validator("support", "center", mode="before")
    @classmethod
    def split_point(cls, value):
        return parse_point(value)

    @field_validator("points", "vertices", mode="before")
    @classmethod
    def split_points(cls, value):
        return parse_points(value)

    @field_validator("alphas", mode="before")
    @classmethod
    def split_alphas(cls, value):
        return parse_floats(value)

    @model_validator(mode="after")
    def required_fields(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(f"unknown perturbation kind '{self.kind}', expected one of {PERTURBATION_KINDS}")
        if self.kind in ("point", "curve") and self.alpha is None:
            raise ValueError(f"{self.kind} perturbations need alpha")
        if self.kind == "renormalized" and self.mu2 is None:
            raise ValueError("renormalized perturbations need mu2")
        if self.kind == "centers":
            if not self.points or not self.alphas or len(self.points) != len(self.alphas):
                raise ValueError("centers need matching points and alphas lists")
        if self.kind == "curve":
            if self.shape not in CURVE_SHAPES:
                raise ValueError(f"curve shape must be one of {CURVE_SHAPES}")
            if self.shape == "circle" and self.radius is None:
                raise ValueError("circle curves need radius")
            if self.shape == "ellipse" and (self.a is None or self.b is None):
                raise ValueError("ellipse curves need a and b")
            if self.shape == "polyline" and not self.vertices:
                raise ValueError("polyline curves need vertices")
        return self


class SolverSpec(_Section):
    emin: Optional[float] = None
    emax: Optional[float] = None
    tol: Optional[float] = None
    depth: Optional[int] = None
    level: int = 0
    energy: Optional[float] = None
    probe_level: Optional[float] = None
    epsilon: float = 1e-6
    x: Optional[Point] = None
    y: Optional[Point] = None
    method: Optional[str] = None
    exponents: List[float] = [2, 3, 4, 5, 6]
    k_values: Optional[List[float]] = None
    scan_alphas: Optional[List[float]] = None
    x_min: float = -10.0
    x_max: float = 10.0
    x_count: int = 201
    samples: int = 400
    refine: bool = False
    norm_check: bool = False

    @field_validator("emin", "emax", mode="before")
    @classmethod
    def window_end(cls, value):
        # float() accepts "-inf" and "inf"
        return None if value in (None, "") else float(value)

    @field_validator("x", "y", mode="before")
    @classmethod
    def split_point(cls, value):
        return parse_point(value)

    @field_validator("exponents", "k_values", "scan_alphas", mode="before")
    @classmethod
    def split_floats(cls, value):
        return parse_floats(value)

    @property
    def window(self):
        if self.emin is None and self.emax is None:
            return None
        return (self.emin if self.emin is not None else float("-inf"), self.emax)

    @property
    def tolerance(self) -> float:
        return self.tol or Config.DEFAULT_TOL


class OutputSpec(_Section):
    directory: Optional[str] = None
    name: Optional[str] = None
    csv: bool = True
    profile: bool = False


class ExperimentConfig(_Section):
    experiment: ExperimentSpec
    problem: ProblemSpec
    perturbation: Optional[PerturbationSpec] = None
    solver: SolverSpec = SolverSpec()
    output: OutputSpec = OutputSpec()

    @property
    def stem(self) -> str:
        return self.output.name or self.experiment.name

    def echo(self) -> Dict[str, Any]:
        """Plain-data copy of the validated configuration for result documents."""
        return self.model_dump(mode="json", exclude_none=True)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def _apply_overrides(raw: Dict[str, Dict[str, Any]], overrides: Optional[Dict[str, Any]]):
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        if section not in SECTIONS or not key:
            raise ConfigError("override must look like section.key", {"override": dotted})
        raw.setdefault(section, {})[key] = value


def validate_experiment(raw: Dict[str, Dict[str, Any]], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Validate a section -> key -> value mapping.

    Raises:
        ConfigError: unknown sections or keys, missing values, bad values
    """
    raw = {section: dict(values) for section, values in raw.items()}
    _apply_overrides(raw, overrides)
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ConfigError("unknown config sections", {"sections": unknown, "allowed": list(SECTIONS)})
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        problems = [{"field": ".".join(str(p) for p in err["loc"]), "message": err["msg"]} for err in e.errors()]
        raise ConfigError("invalid experiment configuration", {"problems": problems})
    logger.debug("experiment_config_validated", command=config.experiment.command, problem=config.problem.label)
    return config


def load_experiment(path: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Read and validate an experiment file.

    Args:
        path: INI file path
        overrides: {"section.key": value} applied on top of the file

    Returns:
        Validated ExperimentConfig
    """
    if not os.path.isfile(path):
        raise ConfigError("config file not found", {"path": path})
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError("config file is not valid INI", {"path": path, "reason": str(e)})
    raw = {section: dict(parser.items(section)) for section in parser.sections()}
    raw.setdefault("experiment", {}).setdefault("name", os.path.splitext(os.path.basename(path))[0])
    logger.info("experiment_config_loaded", path=path, sections=parser.sections())
    return validate_experiment(raw, overrides)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_problem(spec: ProblemSpec) -> BaseProblem:
    units = Units(hbar=spec.hbar or Config.HBAR, mass=spec.mass or Config.MASS)
    return make_problem(spec.label, units=units, **spec.parameters())


def _origin(problem: BaseProblem) -> Point:
    return 0.0 if problem.dimension == 1 else [0.0, 0.0]


def build_perturbation(spec: PerturbationSpec, problem: BaseProblem):
    """
    Solver object for a perturbation section.

    Returns:
        PointPerturbation, RenormalizedPerturbation, CenterSet or (CurveSupport, alpha)
    """
    support = spec.support if spec.support is not None else _origin(problem)
    if spec.kind == "point":
        return PointPerturbation(problem.point(support), spec.alpha)
    if spec.kind == "renormalized":
        return RenormalizedPerturbation(problem.point(support), spec.inv_alpha_r, spec.mu2)
    if spec.kind == "centers":
        return CenterSet(tuple(problem.point(p) for p in spec.points), tuple(spec.alphas))
    return build_curve(spec), float(spec.alpha)


def build_curve(spec: PerturbationSpec) -> CurveSupport:
    center = spec.center if spec.center is not None else [0.0, 0.0]
    order = spec.order or Config.CURVE_ORDER
    if spec.shape == "circle":
        return circle(center, spec.radius, order=order)
    if spec.shape == "ellipse":
        return ellipse(center, spec.a, spec.b, order=order)
    return polyline(spec.vertices, closed=spec.closed, order=order)


def subcommand_names() -> List[str]:
    return [name for name in SUBCOMMANDS if name != "run"]
