"""Scenario configuration: YAML text validated against a strict schema.

Lengths are SI metres unless the ``rod.length_unit`` tag says ``cm`` or
``mm``; forces are N, moduli Pa, densities kg/m^3, times s. Unknown keys
are rejected with the offending field path.
"""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .actuation import GRAVITY_DOWN_Z, CableLayout, Loads
from .rod import Material, Partition, RadiusProfile, Rod

_UNITS = {"m": 1.0, "cm": 1e-2, "mm": 1e-3}
BUNDLED = files("plsrod") / "data"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RodConfig(_Strict):
    length_unit: Literal["m", "cm", "mm"] = "m"
    base_radius: float = Field(gt=0)
    tip_radius: float = Field(gt=0)
    sections: list[float] = Field(min_length=1)  # section lengths, base to tip
    segments: Optional[Union[int, list[int]]] = None  # per section; default ~1 mm spacing
    quad_points: int = Field(4, ge=1, le=16)
    sampling: Literal["left", "midpoint"] = "left"

    @field_validator("sections")
    @classmethod
    def _positive(cls, v):
        if any(x <= 0 for x in v):
            raise ValueError("section lengths must be positive")
        return v

    @property
    def scale(self):
        return _UNITS[self.length_unit]


class MaterialConfig(_Strict):
    young_modulus: float = Field(gt=0)
    shear_modulus: Optional[float] = Field(None, gt=0)
    poisson_ratio: Optional[float] = Field(None, gt=-1.0, lt=0.5)
    density: float = Field(gt=0)
    viscosity: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _one_shear(self):
        if (self.shear_modulus is None) == (self.poisson_ratio is None):
            raise ValueError("give exactly one of shear_modulus or poisson_ratio")
        return self


class CableConfig(_Strict):
    angles_deg: list[float] = Field(default_factory=lambda: [0.0, 90.0, 180.0, 270.0], min_length=1)
    base_offset: Optional[float] = Field(None, gt=0)  # rod length unit; default: surface
    tip_offset: Optional[float] = Field(None, gt=0)


class EnvironmentConfig(_Strict):
    gravity: list[float] = Field(default_factory=lambda: GRAVITY_DOWN_Z.tolist(), min_length=6, max_length=6)
    base_pose: Optional[list[list[float]]] = None


class SweepConfig(_Strict):
    tip_forces: Optional[list[Union[float, list[float]]]] = None
    tensions: Optional[list[list[float]]] = None
    samples: int = Field(21, ge=2)

    @model_validator(mode="after")
    def _one_schedule(self):
        if (self.tip_forces is None) == (self.tensions is None):
            raise ValueError("give exactly one of tip_forces or tensions")
        return self


class DynamicConfig(_Strict):
    t_end: float = Field(gt=0)
    dt: float = Field(1e-3, gt=0)
    sample_every: int = Field(10, ge=1)
    input: Literal["constant", "step", "ramp"] = "step"
    t_on: float = Field(0.0, ge=0)
    ramp_time: float = Field(0.1, gt=0)
    initial: Literal["rest", "static"] = "rest"
    blowup: float = Field(1e8, gt=0)


class ReferenceRow(_Strict):
    name: str = "reference"
    tip_cm: list[float] = Field(min_length=3, max_length=3)


class CompareConfig(_Strict):
    rows: list[str] = Field(
        default_factory=lambda: ["pls", "pcs", "euler_bernoulli", "extensible_kirchhoff", "timoshenko"]
    )
    reference: Optional[ReferenceRow] = None


class IdentifyConfig(_Strict):
    experiments: str
    theta_init: Optional[list[float]] = Field(None, min_length=3, max_length=3)
    bounds: Optional[list[list[float]]] = None
    n_starts: int = Field(1, ge=1)
    spread: float = Field(0.3, gt=0)
    max_nfev: int = Field(40, ge=1)


class ValidateConfig(_Strict):
    experiments: str
    theta: Optional[list[float]] = Field(None, min_length=3, max_length=3)


class RunConfig(_Strict):
    tensions: Optional[list[float]] = None
    tip: Optional[Union[float, list[float]]] = None
    mode: str = "full"
    model: Literal["pls", "pcs"] = "pls"
    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(50, ge=1)
    samples: int = Field(21, ge=2)
    sweep: Optional[SweepConfig] = None
    dynamic: Optional[DynamicConfig] = None
    compare: Optional[CompareConfig] = None
    identify: Optional[IdentifyConfig] = None
    validate_: Optional[ValidateConfig] = Field(None, alias="validate")


class ScenarioConfig(_Strict):
    rod: RodConfig
    material: MaterialConfig
    cables: Optional[CableConfig] = None
    environment: EnvironmentConfig = Field(default_factory=EnvironmentConfig)
    run: RunConfig = Field(default_factory=RunConfig)

    @model_validator(mode="after")
    def _tensions_match_cables(self):
        n = 0 if self.cables is None else len(self.cables.angles_deg)
        schedules = [self.run.tensions] if self.run.tensions is not None else []
        if self.run.sweep is not None and self.run.sweep.tensions is not None:
            schedules += self.run.sweep.tensions
        for t in schedules:
            if n == 0 and any(t):
                raise ValueError("run.tensions given but no cables are configured")
            if n and len(t) != n:
                raise ValueError(f"expected {n} tensions, one per cable, got {len(t)}")
        return self

    # ------------------------------------------------------------ builders

    def build_rod(self, segments=None, quad_points=None) -> Rod:
        r = self.rod
        s = r.scale
        lengths = [x * s for x in r.sections]
        L = sum(lengths)
        profile = RadiusProfile(r.base_radius * s, r.tip_radius * s, L)
        m = self.material
        if m.shear_modulus is not None:
            mat = Material(m.young_modulus, m.shear_modulus, m.density, m.viscosity)
        else:
            mat = Material.from_poisson(m.young_modulus, m.poisson_ratio, m.density, m.viscosity)
        seg = r.segments if segments is None else segments
        pose = np.eye(4) if self.environment.base_pose is None else np.array(self.environment.base_pose, float)
        return Rod(
            profile, mat, Partition.from_lengths(lengths, seg), pose,
            r.quad_points if quad_points is None else quad_points, r.sampling,
        )

    def build_layout(self, rod: Rod):
        if self.cables is None:
            return None
        c = self.cables
        s = self.rod.scale
        base = rod.profile.base_radius if c.base_offset is None else c.base_offset * s
        tip = rod.profile.tip_radius if c.tip_offset is None else c.tip_offset * s
        return CableLayout(tuple(np.deg2rad(a) for a in c.angles_deg), base, tip, rod.length)

    def build_loads(self, rod: Rod, tensions=None, tip=None) -> Loads:
        layout = self.build_layout(rod)
        t = self.run.tensions if tensions is None else tensions
        if layout is None and t is not None and np.any(np.asarray(t) != 0):
            raise ValueError("run.tensions given but no cables are configured")
        return Loads(
            layout,
            None if layout is None else t,
            np.array(self.environment.gravity, dtype=float),
            self.run.tip if tip is None else tip,
        )


def resolve_path(name, base_dir=None) -> Path:
    """A file next to the config, else a bundled data file of the same name."""
    p = Path(name)
    if not p.is_absolute() and base_dir is not None and (Path(base_dir) / p).exists():
        return Path(base_dir) / p
    if p.exists():
        return p
    bundled = BUNDLED / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"no such file: {name}")


def load_config(path) -> tuple[ScenarioConfig, Path]:
    p = resolve_path(path)
    with open(p) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config must be a mapping")
    return ScenarioConfig.model_validate(raw), p.parent
