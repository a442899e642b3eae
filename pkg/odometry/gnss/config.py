# odometry/gnss/config.py
"""
Configuration objects for the simulator, the estimator and experiment suites.

Scenario and suite files are YAML documents validated by marshmallow schemas;
estimator defaults come from ``settings.ODOMETRY`` so that they can be set per
deployment through ``ODOMETRY_*`` environment variables.
"""
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml
from marshmallow import Schema, ValidationError, fields, post_load, validate

from .exceptions import ConfigurationError
from .frames import Extrinsics, GpsTime

logger = logging.getLogger('odometry')


# ==============================================================================
# SIMULATION
# ==============================================================================

@dataclass(frozen=True)
class ErrorBudget:
    """Error sources injected by the simulator. Systematic terms dominate white noise by default."""

    phase_noise_sigma: float = 0.002          # m
    pseudorange_noise_sigma: float = 0.5      # m
    doppler_noise_sigma: float = 0.05         # m/s
    receiver_clock_bias: float = 5e-4         # s, initial
    receiver_clock_drift: float = 2e-8        # s/s
    receiver_clock_rw: float = 1e-9           # s/sqrt(s)
    ambiguities: bool = True
    ambiguity_range: int = 1_000_000          # cycles
    cycle_slip_rate: float = 0.05             # events / satellite / minute
    apply_multipath: bool = True
    multipath_code_sigma: float = 0.5         # m
    multipath_phase_sigma: float = 0.005      # m
    multipath_tau: float = 10.0               # s
    apply_iono: bool = True
    apply_tropo: bool = True
    apply_eph_error: bool = True
    eph_error_sigma: float = 1.0              # m
    iono_scale: float = 1.5
    tropo_scale: float = 1.1
    relpose_drift: float = 0.02               # fractional translation scale error
    relpose_translation_sigma: float = 0.005  # m per step
    relpose_rotation_sigma: float = 0.001     # rad per step

    def __post_init__(self):
        for name in ("phase_noise_sigma", "pseudorange_noise_sigma", "doppler_noise_sigma",
                     "receiver_clock_rw", "cycle_slip_rate", "multipath_code_sigma",
                     "multipath_phase_sigma", "eph_error_sigma", "relpose_translation_sigma",
                     "relpose_rotation_sigma"):
            if getattr(self, name) < 0.0:
                raise ConfigurationError("error-budget sigmas must be non-negative", key=name)
        if self.multipath_tau <= 0.0:
            raise ConfigurationError("multipath time constant must be positive")

    @classmethod
    def zero(cls):
        """Every error source off. Integer ambiguities stay; they cancel in time differences."""
        return cls(
            phase_noise_sigma=0.0, pseudorange_noise_sigma=0.0, doppler_noise_sigma=0.0,
            receiver_clock_bias=0.0, receiver_clock_drift=0.0, receiver_clock_rw=0.0,
            cycle_slip_rate=0.0, apply_multipath=False, apply_iono=False, apply_tropo=False,
            apply_eph_error=False, iono_scale=1.0, tropo_scale=1.0,
            relpose_drift=0.0, relpose_translation_sigma=0.0, relpose_rotation_sigma=0.0,
        )


@dataclass(frozen=True)
class DropoutWindow:
    start: float                 # s after scenario start
    duration: float              # s
    surviving_sat_count: int = 0

    def covers(self, elapsed):
        return self.start <= elapsed < self.start + self.duration


@dataclass(frozen=True)
class PhaseOutlier:
    time: float                  # s after scenario start
    sat_id: str
    magnitude_m: float


@dataclass(frozen=True)
class Obstruction:
    """
    A vertical wall standing on the segment ``start``-``end`` (ENU east, north),
    its top ``height`` metres above the ENU origin. A satellite is hidden while
    the horizontal ray towards it crosses the segment below the top.
    """

    start: tuple
    end: tuple
    height: float

    def __post_init__(self):
        if math.dist(self.start, self.end) <= 0.0:
            raise ConfigurationError("an obstruction needs two distinct end points", start=self.start)
        if self.height <= 0.0:
            raise ConfigurationError("obstruction height must be positive", height=self.height)

    def blocks(self, receiver_enu, azimuth, elevation):
        p = np.asarray(receiver_enu, dtype=float)
        a, b = np.asarray(self.start, dtype=float), np.asarray(self.end, dtype=float)
        ray = np.array([math.sin(azimuth), math.cos(azimuth)])
        wall = b - a
        det = wall[0] * ray[1] - wall[1] * ray[0]
        if abs(det) < 1e-12:
            return False
        offset = a - p[:2]
        reach = (wall[0] * offset[1] - wall[1] * offset[0]) / det     # along the ray
        along = (ray[0] * offset[1] - ray[1] * offset[0]) / det       # fraction of the wall
        if reach <= 0.0 or not 0.0 <= along <= 1.0:
            return False
        return p[2] + reach * math.tan(elevation) < self.height


# A ten-storey block west-north-west of the default loop. It hides the low
# western satellite over most of the lap and, from the far side, a second one.
DEFAULT_OBSTRUCTIONS = (
    Obstruction(start=(5.72, 169.90), end=(-144.28, -89.90), height=33.0),
)


@dataclass(frozen=True)
class PathConfig:
    """A parametric loop (constant turn rate) or a waypoint polyline with filleted corners."""

    kind: str = "loop"
    radius: float = 39.79                  # loop radius, m
    clockwise: bool = False
    start_heading_deg: float = 0.0         # ENU yaw, degrees counter-clockwise from east
    waypoints: tuple = ()                  # ((east, north), ...)
    fillet_radius: float = 5.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    path: PathConfig = field(default_factory=PathConfig)
    speed: float = 1.0                     # m/s
    epoch_rate: float = 1.0                # Hz
    truth_rate: float = 4.0                # Hz
    duration: float = 250.0                # s
    start: GpsTime = field(default_factory=lambda: GpsTime.from_calendar(2024, 6, 1, 15, 0, 0.0))
    origin_lat_deg: float = 43.782
    origin_lon_deg: float = -79.466
    origin_height: float = 150.0
    constellation: str = "synthetic"
    nav_file: str = None
    sky_plot: tuple = None
    mask_angle: float = math.radians(10.0)  # rad
    obstructions: tuple = DEFAULT_OBSTRUCTIONS
    dropout_windows: tuple = ()
    phase_outliers: tuple = ()
    extrinsics: Extrinsics = field(default_factory=Extrinsics)
    seed: int = 0

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ConfigurationError("scenario duration must be positive", duration=self.duration)
        if self.epoch_rate <= 0.0 or self.truth_rate <= 0.0:
            raise ConfigurationError("epoch and truth rates must be positive")
        if any(w.surviving_sat_count < 0 for w in self.dropout_windows):
            raise ConfigurationError("surviving_sat_count must be non-negative")

    @property
    def origin_geodetic(self):
        return (math.radians(self.origin_lat_deg), math.radians(self.origin_lon_deg),
                self.origin_height)

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


# ==============================================================================
# ESTIMATION
# ==============================================================================

class Topology(enum.Enum):
    CONSECUTIVE = "consecutive"
    DENSE = "dense"


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 20
    cost_rel_tol: float = 1e-6
    trust_radius_init: float = 1.0
    trust_radius_max: float = 100.0

    def __post_init__(self):
        if self.max_iter < 1 or self.trust_radius_init <= 0.0 or self.trust_radius_max < self.trust_radius_init:
            raise ConfigurationError("invalid solver settings", max_iter=self.max_iter)


@dataclass(frozen=True)
class GraphConfig:
    tdcp_topology: Topology = Topology.CONSECUTIVE
    window_length: float = 10.0
    use_rel_pose_factors: bool = False
    use_iono: bool = False
    use_tropo: bool = True
    phase_dd_sigma: float = 0.01
    elevation_weighting: bool = False
    dcs_phi: float = 4.0
    nonholonomic_sigma: tuple = (0.05, 0.05)
    qc_diag: tuple = (0.1, 0.01, 0.01, 0.001, 0.001, 0.01)
    position_prior_sigma: float = 2.0
    attitude_prior_sigma: tuple = (0.02, 0.02, 1.0)   # roll, pitch, yaw [rad]
    elevation_mask_deg: float = 10.0
    lever_arm: tuple = (0.5, 0.0, 1.0)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not isinstance(self.tdcp_topology, Topology):
            try:
                object.__setattr__(self, "tdcp_topology", Topology(str(self.tdcp_topology).lower()))
            except ValueError as exc:
                raise ConfigurationError("unknown TDCP topology", topology=self.tdcp_topology) from exc
        if self.window_length < 2.0:
            raise ConfigurationError("window_length must be at least 2 s", window_length=self.window_length)
        if self.phase_dd_sigma <= 0.0 or self.dcs_phi <= 0.0 or self.position_prior_sigma <= 0.0:
            raise ConfigurationError("sigmas and the DCS parameter must be positive")
        if len(self.qc_diag) != 6 or min(self.qc_diag) <= 0.0:
            raise ConfigurationError("qc_diag must hold six positive values")
        Extrinsics(np.asarray(self.lever_arm, dtype=float))

    def matched_to(self, budget):
        """This configuration without corrections for delays that ``budget`` never simulated."""
        return replace(self, use_iono=self.use_iono and budget.apply_iono,
                       use_tropo=self.use_tropo and budget.apply_tropo)

    @property
    def qc(self):
        return np.diag(np.asarray(self.qc_diag, dtype=float))

    @property
    def elevation_mask(self):
        return math.radians(self.elevation_mask_deg)

    @classmethod
    def from_settings(cls, **overrides):
        """Build from ``settings.ODOMETRY``; keyword overrides win, ``None`` values are ignored."""
        from django.conf import settings

        conf = getattr(settings, "ODOMETRY", {})
        solver = SolverConfig(
            max_iter=int(overrides.pop("max_iter", None) or conf.get("MAX_ITER", 20)),
            cost_rel_tol=float(conf.get("COST_REL_TOL", 1e-6)),
            trust_radius_init=float(conf.get("TRUST_RADIUS_INIT", 1.0)),
            trust_radius_max=float(conf.get("TRUST_RADIUS_MAX", 100.0)),
        )
        values = dict(
            tdcp_topology=conf.get("TOPOLOGY", "consecutive"),
            window_length=float(conf.get("WINDOW_LENGTH", 10.0)),
            use_iono=bool(conf.get("USE_IONO", False)),
            use_tropo=bool(conf.get("USE_TROPO", True)),
            phase_dd_sigma=float(conf.get("PHASE_DD_SIGMA", 0.01)),
            elevation_weighting=bool(conf.get("ELEVATION_WEIGHTING", False)),
            dcs_phi=float(conf.get("DCS_PHI", 4.0)),
            nonholonomic_sigma=(float(conf.get("NONHOLONOMIC_SIGMA", 0.05)),) * 2,
            qc_diag=tuple(float(v) for v in conf.get("QC_DIAG", cls.qc_diag)),
            position_prior_sigma=float(conf.get("POSITION_PRIOR_SIGMA", 2.0)),
            elevation_mask_deg=float(conf.get("ELEVATION_MASK_DEG", 10.0)),
            lever_arm=tuple(float(v) for v in conf.get("LEVER_ARM", cls.lever_arm)),
            solver=solver,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


# ==============================================================================
# YAML SCHEMAS
# ==============================================================================

_non_negative = validate.Range(min=0.0)
_positive = validate.Range(min=0.0, min_inclusive=False)


class ErrorBudgetSchema(Schema):
    phase_noise_sigma = fields.Float(validate=_non_negative)
    pseudorange_noise_sigma = fields.Float(validate=_non_negative)
    doppler_noise_sigma = fields.Float(validate=_non_negative)
    receiver_clock_bias = fields.Float()
    receiver_clock_drift = fields.Float()
    receiver_clock_rw = fields.Float(validate=_non_negative)
    ambiguities = fields.Boolean()
    ambiguity_range = fields.Integer(validate=validate.Range(min=0, max=10_000_000))
    cycle_slip_rate = fields.Float(validate=_non_negative)
    apply_multipath = fields.Boolean()
    multipath_code_sigma = fields.Float(validate=_non_negative)
    multipath_phase_sigma = fields.Float(validate=_non_negative)
    multipath_tau = fields.Float(validate=_positive)
    apply_iono = fields.Boolean()
    apply_tropo = fields.Boolean()
    apply_eph_error = fields.Boolean()
    eph_error_sigma = fields.Float(validate=_non_negative)
    iono_scale = fields.Float(validate=_non_negative)
    tropo_scale = fields.Float(validate=_non_negative)
    relpose_drift = fields.Float()
    relpose_translation_sigma = fields.Float(validate=_non_negative)
    relpose_rotation_sigma = fields.Float(validate=_non_negative)
    zero = fields.Boolean(load_default=False)

    @post_load
    def make_budget(self, data, **kwargs):
        base = ErrorBudget.zero() if data.pop("zero") else ErrorBudget()
        return replace(base, **data)


class PathSchema(Schema):
    kind = fields.String(validate=validate.OneOf(["loop", "waypoints", "static"]))
    radius = fields.Float(validate=_positive)
    clockwise = fields.Boolean()
    start_heading_deg = fields.Float()
    waypoints = fields.List(fields.Tuple((fields.Float(), fields.Float())))
    fillet_radius = fields.Float(validate=_positive)

    @post_load
    def make_path(self, data, **kwargs):
        if "waypoints" in data:
            data["waypoints"] = tuple(tuple(p) for p in data["waypoints"])
        return PathConfig(**data)


class StartSchema(Schema):
    year = fields.Integer(required=True, validate=validate.Range(min=1980, max=2100))
    month = fields.Integer(required=True, validate=validate.Range(min=1, max=12))
    day = fields.Integer(required=True, validate=validate.Range(min=1, max=31))
    hour = fields.Integer(load_default=0, validate=validate.Range(min=0, max=23))
    minute = fields.Integer(load_default=0, validate=validate.Range(min=0, max=59))
    second = fields.Float(load_default=0.0, validate=validate.Range(min=0.0, max=60.0, max_inclusive=False))

    @post_load
    def make_time(self, data, **kwargs):
        return GpsTime.from_calendar(**data)


class DropoutSchema(Schema):
    start = fields.Float(required=True, validate=_non_negative)
    duration = fields.Float(required=True, validate=_positive)
    surviving_sat_count = fields.Integer(load_default=0, validate=validate.Range(min=0))

    @post_load
    def make_window(self, data, **kwargs):
        return DropoutWindow(**data)


class PhaseOutlierSchema(Schema):
    time = fields.Float(required=True, validate=_non_negative)
    sat_id = fields.String(required=True, validate=validate.Regexp(r"^G\d{2}$"))
    magnitude_m = fields.Float(required=True)

    @post_load
    def make_outlier(self, data, **kwargs):
        return PhaseOutlier(**data)


class ObstructionSchema(Schema):
    start = fields.Tuple((fields.Float(), fields.Float()), required=True)
    end = fields.Tuple((fields.Float(), fields.Float()), required=True)
    height = fields.Float(required=True, validate=_positive)

    @post_load
    def make_obstruction(self, data, **kwargs):
        return Obstruction(**data)


class OriginSchema(Schema):
    lat_deg = fields.Float(validate=validate.Range(min=-90.0, max=90.0))
    lon_deg = fields.Float(validate=validate.Range(min=-180.0, max=180.0))
    height = fields.Float()


class ConstellationSchema(Schema):
    kind = fields.String(load_default="synthetic", validate=validate.OneOf(["synthetic", "nav_file"]))
    nav_file = fields.String(load_default=None, allow_none=True)
    sky_plot = fields.List(fields.Tuple((fields.Float(), fields.Float())), load_default=None)


class ScenarioSchema(Schema):
    name = fields.String()
    seed = fields.Integer(validate=validate.Range(min=0))
    duration = fields.Float(validate=_positive)
    speed = fields.Float(validate=_non_negative)
    epoch_rate = fields.Float(validate=_positive)
    truth_rate = fields.Float(validate=_positive)
    start = fields.Nested(StartSchema)
    origin = fields.Nested(OriginSchema)
    path = fields.Nested(PathSchema)
    mask_angle_deg = fields.Float(validate=validate.Range(min=0.0, max=90.0))
    lever_arm = fields.List(fields.Float(), validate=validate.Length(equal=3))
    constellation = fields.Nested(ConstellationSchema)
    dropout_windows = fields.List(fields.Nested(DropoutSchema))
    phase_outliers = fields.List(fields.Nested(PhaseOutlierSchema))
    obstructions = fields.List(fields.Nested(ObstructionSchema))
    error_budget = fields.Nested(ErrorBudgetSchema)

    @post_load
    def make_scenario(self, data, **kwargs):
        budget = data.pop("error_budget", ErrorBudget())
        origin = data.pop("origin", {})
        constellation = data.pop("constellation", None)
        if "mask_angle_deg" in data:
            data["mask_angle"] = math.radians(data.pop("mask_angle_deg"))
        if "lever_arm" in data:
            data["extrinsics"] = Extrinsics(np.asarray(data.pop("lever_arm"), dtype=float))
        if constellation:
            data["constellation"] = constellation["kind"]
            data["nav_file"] = constellation["nav_file"]
            if constellation["sky_plot"]:
                data["sky_plot"] = tuple(tuple(p) for p in constellation["sky_plot"])
        for key in ("dropout_windows", "phase_outliers", "obstructions"):
            if key in data:
                data[key] = tuple(data[key])
        data.update({f"origin_{k}": v for k, v in origin.items()})
        return ScenarioConfig(**data), budget


ALGORITHMS = ("tdcp", "tdcp_dense", "tdcp_relpose", "pseudorange", "doppler", "relpose")


class EvaluationSchema(Schema):
    sections = fields.Integer(load_default=15, validate=validate.Range(min=1))
    section_length = fields.Float(load_default=50.0, validate=_positive)
    align_span = fields.Float(load_default=10.0, validate=_positive)


class SuiteSchema(Schema):
    name = fields.String(required=True)
    seeds = fields.List(fields.Integer(validate=validate.Range(min=0)), load_default=[0])
    algorithms = fields.List(fields.String(validate=validate.OneOf(ALGORITHMS)),
                             load_default=["tdcp", "tdcp_relpose", "pseudorange", "doppler"])
    base_scenario = fields.Dict(load_default=dict)
    scenarios = fields.List(fields.Dict(), required=True, validate=validate.Length(min=1))
    graph = fields.Dict(load_default=dict)
    evaluation = fields.Nested(EvaluationSchema, load_default=lambda: EvaluationSchema().load({}))


@dataclass(frozen=True)
class SuiteConfig:
    name: str
    seeds: tuple
    algorithms: tuple
    scenarios: tuple          # ((ScenarioConfig, ErrorBudget), ...)
    graph_overrides: dict
    sections: int = 15
    section_length: float = 50.0
    align_span: float = 10.0


# ==============================================================================
# LOADERS
# ==============================================================================

def _load_yaml(source):
    """Accept a path, a YAML string, or an already-parsed mapping."""
    if isinstance(source, dict):
        return source
    text = str(source)
    if isinstance(source, Path) or (len(text) < 4096 and "\n" not in text
                                    and text.endswith((".yaml", ".yml", ".json"))):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigurationError("cannot read configuration file", path=str(source)) from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError("configuration is not valid YAML", reason=str(exc)) from exc
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a key-value mapping")
    return data


def _validate(schema, data):
    try:
        return schema.load(data)
    except ValidationError as exc:
        raise ConfigurationError("invalid configuration", errors=exc.messages) from exc


def load_scenario(source):
    """Return ``(ScenarioConfig, ErrorBudget)`` from a YAML file, string or mapping."""
    return _validate(ScenarioSchema(), _load_yaml(source))


def _merge(base, override):
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_suite(source):
    data = _validate(SuiteSchema(), _load_yaml(source))
    scenarios = tuple(load_scenario(_merge(data["base_scenario"], entry)) for entry in data["scenarios"])
    names = [s.name for s, _ in scenarios]
    if len(set(names)) != len(names):
        raise ConfigurationError("scenario names within a suite must be unique", names=names)
    evaluation = data["evaluation"]
    suite = SuiteConfig(
        name=data["name"],
        seeds=tuple(data["seeds"]),
        algorithms=tuple(data["algorithms"]),
        scenarios=scenarios,
        graph_overrides=dict(data["graph"]),
        sections=evaluation["sections"],
        section_length=evaluation["section_length"],
        align_span=evaluation["align_span"],
    )
    logger.info(f"Loaded suite '{suite.name}': {len(scenarios)} scenario(s), "
                f"{len(suite.seeds)} seed(s), algorithms {', '.join(suite.algorithms)}.")
    return suite
