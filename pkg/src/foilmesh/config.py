"""Run configuration: one flat record covering every tunable, parsed from and
dumped to line-oriented ``key = value`` text."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .constraints import SnapConfig
from .errors import ConfigError, FoilError
from .forces import DEFAULT_CONTRACTION, MaterialParams
from .integrator import SimConfig
from .seed import DEFAULT_MARGIN, SphereSpec

_NONE_WORDS = ("none", "auto", "")


@dataclass
class RunConfig:
    """Everything a run needs.

    Paths left as ``None`` are simply not written. With no ``input_path`` the
    fixed points come from ``scenario``. ``dt = None`` (``auto`` in a config
    file) chooses 0.9 of the CFL limit of the initial mesh. ``pressure_p =
    None`` sets the pressure to ``pressure_ratio`` times the fold pressure
    of the seed mesh, the point past which the foil inflates without bound.
    """

    # inputs and outputs
    input_path: str | None = None
    input_format: str | None = None
    scenario: str = "box"
    box_side: float = 2.0
    box_inset: float = 0.85
    box_top_bottom: bool = False
    output_path: str | None = None
    output_format: str | None = None
    diagnostics_path: str | None = None
    snapshot_dir: str | None = None
    # seed
    point_count: int = SphereSpec.point_count
    margin_factor: float = DEFAULT_MARGIN
    init_refine_levels: int = 0
    contraction_scale: float = DEFAULT_CONTRACTION
    # material
    k_base: float = MaterialParams.k_base
    damping_c: float = MaterialParams.damping_c
    pressure_p: float | None = None
    pressure_ratio: float = 0.4
    mass_m: float = MaterialParams.mass_m
    distance_factor_strength: float = MaterialParams.distance_factor_strength
    # snapping
    snapping_tolerance: float = SnapConfig.snapping_tolerance
    relaxation_lambda: float = SnapConfig.relaxation_lambda
    relaxation_rounds: int = SnapConfig.relaxation_rounds
    # loop
    dt: float | None = SimConfig.dt
    epsilon: float = SimConfig.epsilon
    max_iterations: int = SimConfig.max_iterations
    smooth_every: int = SimConfig.smooth_every
    smooth_lambda: float = SimConfig.smooth_lambda
    smooth_rounds: int = SimConfig.smooth_rounds
    smooth_threshold: float = SimConfig.smooth_threshold
    snap_every: int = SimConfig.snap_every
    refine_every: int = SimConfig.refine_every
    snapshot_every: int = SimConfig.snapshot_every
    cfl_mode: str = SimConfig.cfl_mode
    deflate_factor: float = SimConfig.deflate_factor
    deflate_threshold: float = SimConfig.deflate_threshold
    deflate_wait: int = SimConfig.deflate_wait
    workers: int = 1

    def _pick(self, cls):
        return cls(**{f.name: getattr(self, f.name) for f in fields(cls)})

    def material(self, pressure: float | None = None) -> MaterialParams:
        """Material constants; ``pressure`` stands in for an automatic ``pressure_p``."""
        params = {f.name: getattr(self, f.name) for f in fields(MaterialParams)}
        if params["pressure_p"] is None:
            params["pressure_p"] = MaterialParams.pressure_p if pressure is None else pressure
        return MaterialParams(**params)

    def snap(self) -> SnapConfig:
        return self._pick(SnapConfig)

    def sim(self) -> SimConfig:
        return self._pick(SimConfig)

    def validate(self) -> "RunConfig":
        """Check every constituent invariant; raises before any work starts."""
        self.material()
        self.snap()
        self.sim()
        if not 0 < self.pressure_ratio < 1:
            raise ConfigError("pressure_ratio must lie in (0, 1)")
        if int(self.point_count) < 4:
            raise ConfigError("point_count must be >= 4")
        if not self.margin_factor >= 1:
            raise ConfigError("margin_factor must be >= 1")
        if not 0 < self.contraction_scale <= 1:
            raise ConfigError("contraction_scale must lie in (0, 1]")
        if int(self.init_refine_levels) < 0:
            raise ConfigError("init_refine_levels must be >= 0")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        if self.input_path is None and self.scenario != "box":
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        return self

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        values = {}
        for no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {no}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in FIELD_KINDS:
                raise ConfigError(f"line {no}: unknown key {key!r}")
            try:
                values[key] = parse_value(key, value)
            except ValueError as exc:
                raise ConfigError(f"line {no}: {exc}") from None
        return (base or cls()).replace(**values)

    @classmethod
    def from_file(cls, path, base: "RunConfig | None" = None) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text, base)


FIELD_KINDS = {f.name: str(f.type) for f in fields(RunConfig)}


def _format(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def parse_value(key: str, text: str):
    """Convert ``text`` to the type of field ``key``; raises ValueError."""
    kind = FIELD_KINDS[key]
    optional = kind.endswith("| None")
    base = kind.split("|")[0].strip()
    if optional and text.lower() in _NONE_WORDS:
        return None
    if base == "bool":
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {text!r}")
    if base == "int":
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"{key}: expected an integer, got {text!r}") from None
    if base == "float":
        try:
            return float(text)
        except ValueError:
            raise ValueError(f"{key}: expected a number, got {text!r}") from None
    return text


def load_config(path=None, overrides=None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides``; validated."""
    cfg = RunConfig.from_file(path) if path else RunConfig()
    if overrides:
        unknown = sorted(set(overrides) - set(FIELD_KINDS))
        if unknown:
            raise ConfigError(f"unknown keys {unknown}")
        cfg = cfg.replace(**overrides)
    try:
        return cfg.validate()
    except FoilError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
