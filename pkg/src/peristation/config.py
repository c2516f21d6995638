"""Configuration loading.

One nested YAML file; every section is optional and every omitted value
falls back to a default, so an empty file (or no file at all) runs the
nominal five-module scenario.  The exception is the geometry section:
because the packing constraint couples all seven fields, a geometry
section must state all of them or none.

Two failure channels, matching the CLI exit codes:
  - structural problems (unknown keys, wrong types, missing geometry
    fields) raise ConfigError at load time;
  - semantic problems (rule violations, invalid parameter combinations)
    are collected into RunConfig.problems so `validate` can report them
    all at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import yaml

from .control import ControlConfig, DetectionConfig
from .geometry import RingGeometry, SurrogateMaterial, calibrate_kappa, validate_geometry
from .plant import (
    COMPRESSION,
    LONGITUDINAL,
    MODULE_KINDS,
    ModuleSpec,
    ObjectSpec,
    PlantParams,
    StationLayout,
    station_violations,
)


class ConfigError(ValueError):
    """Configuration failed to parse or type-check."""


DEFAULT_GEOMETRY = {
    "outer_radius_R": 40.0,  # mm
    "inner_radius_r": 25.0,  # mm
    "step_height_m": 1.5,  # mm
    "chamber_spacing_l": 12.0,  # mm
    "wall_thickness_t": 2.0,  # mm
    "chamber_length_s": 28.8,  # mm
    "chamber_count_N": 5,
}

DEFAULT_MATERIAL = {
    "youngs_modulus_E": 100.0,  # kPa
    "poisson_ratio_nu": 0.45,
    # normalized full-pressure inflation d_c/r the surrogate is pinned to
    "calibration_target": 0.69,
}

DEFAULT_STATION = {
    "module_count": 5,
    "compression_height": 20.0,  # mm
    "longitudinal_height": 20.0,  # mm
    "modules": None,  # explicit [{kind, height}, ...] overrides the three above
}

DEFAULT_OBJECT = {
    "present": True,
    "radius_r_o": 17.5,  # mm
    "length_L_o": 75.0,  # mm
    "initial_z": 0.0,  # mm
}

DEFAULT_PLANT = {
    "P_max": 15.0,  # kPa
    "k_free": 4.33,  # kPa/s
    "k_contact_at_0p7": 8.48,  # kPa/s
    "k_vent": 12.0,  # kPa/s
    "dt": 0.001,  # s
    "noise_sigma": 0.0,  # kPa
    "rng_seed": 0,
}

DEFAULT_DETECTION = {
    "window_start": 1.5,  # s after inflation onset
    "window_len": 1.0,  # s
    "threshold_ratio_theta": 1.5,
    "consecutive_required": 2,
    "min_window_samples": 8,
    "saturation_fraction": 0.98,
}

DEFAULT_CONTROL = {
    "phase_timeout_s": 10.0,
    "inflated_fraction": 0.95,
    "deflated_threshold_kPa": 0.5,
    "max_cycles": 0,  # 0 = unlimited
    "max_cycles_per_level": 20,
}

DEFAULT_CALIBRATION = {"object_present": False}

DEFAULT_RUN = {"duration_s": 120.0, "output_path": None}

_SECTIONS = (
    "geometry", "material", "station", "object",
    "plant", "detection", "control", "calibration", "run",
)


@dataclass
class RunConfig:
    geometry: RingGeometry
    material: Optional[SurrogateMaterial]
    layout: Optional[StationLayout]
    object_spec: Optional[ObjectSpec]
    initial_z: float
    params: Optional[PlantParams]
    detection: Optional[DetectionConfig]
    control: Optional[ControlConfig]
    calibration_with_object: bool
    duration_s: float
    output_path: Optional[str]
    problems: list


def _mapping(raw, where: str) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(raw).__name__}")
    return raw


def _merge(section: str, raw: dict, defaults: dict, require_all: bool = False) -> dict:
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"{section}: unknown field(s): {', '.join(unknown)}")
    if require_all and raw:
        missing = sorted(set(defaults) - set(raw))
        if missing:
            raise ConfigError(f"{section}: missing required field {missing[0]}")
    out = dict(defaults)
    out.update(raw)
    return out


def _num(section: str, key: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {v!r}")
    return float(v)


def _int(section: str, key: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{section}.{key}: expected an integer, got {v!r}")
    return v


def _bool(section: str, key: str, v) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{section}.{key}: expected true/false, got {v!r}")
    return v


def _build_modules(station: dict, geometry: RingGeometry) -> list[ModuleSpec]:
    raw_list = station["modules"]
    specs = []
    z = 0.0
    if raw_list is not None:
        if not isinstance(raw_list, list):
            raise ConfigError("station.modules: expected a list")
        for i, item in enumerate(raw_list, start=1):
            item = _mapping(item, f"station.modules[{i}]")
            extra = sorted(set(item) - {"kind", "height"})
            if extra:
                raise ConfigError(f"station.modules[{i}]: unknown field(s): {', '.join(extra)}")
            kind = item.get("kind")
            if kind not in MODULE_KINDS:
                raise ConfigError(
                    f"station.modules[{i}].kind: expected one of {MODULE_KINDS}, got {kind!r}"
                )
            h = _num(f"station.modules[{i}]", "height", item.get("height", 20.0))
            specs.append(ModuleSpec(i, kind, geometry, h, z))
            z += h
        return specs
    count = _int("station", "module_count", station["module_count"])
    hc = _num("station", "compression_height", station["compression_height"])
    hl = _num("station", "longitudinal_height", station["longitudinal_height"])
    for i in range(1, max(count, 0) + 1):
        kind = COMPRESSION if i % 2 == 1 else LONGITUDINAL
        h = hc if kind == COMPRESSION else hl
        specs.append(ModuleSpec(i, kind, geometry, h, z))
        z += h
    return specs


def load_config(path: Optional[str] = None) -> RunConfig:
    """Read a YAML config file (or None for all defaults) into a RunConfig.

    Raises:
        ConfigError: unreadable YAML, unknown sections/keys, wrong types,
            or an incomplete geometry section.
    """
    data = {}
    if path is not None:
        with open(path, "r") as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigError(f"not valid YAML: {e}") from None
        if data is None:
            data = {}
    data = _mapping(data, "config root")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")

    geo_raw = _merge("geometry", _mapping(data.get("geometry"), "geometry"),
                     DEFAULT_GEOMETRY, require_all=True)
    mat_raw = _merge("material", _mapping(data.get("material"), "material"), DEFAULT_MATERIAL)
    sta_raw = _merge("station", _mapping(data.get("station"), "station"), DEFAULT_STATION)
    obj_raw = _merge("object", _mapping(data.get("object"), "object"), DEFAULT_OBJECT)
    plant_raw = _merge("plant", _mapping(data.get("plant"), "plant"), DEFAULT_PLANT)
    det_raw = _merge("detection", _mapping(data.get("detection"), "detection"), DEFAULT_DETECTION)
    ctl_raw = _merge("control", _mapping(data.get("control"), "control"), DEFAULT_CONTROL)
    cal_raw = _merge("calibration", _mapping(data.get("calibration"), "calibration"),
                     DEFAULT_CALIBRATION)
    run_raw = _merge("run", _mapping(data.get("run"), "run"), DEFAULT_RUN)

    problems: list[str] = []

    geometry = RingGeometry(
        outer_radius_R=_num("geometry", "outer_radius_R", geo_raw["outer_radius_R"]),
        inner_radius_r=_num("geometry", "inner_radius_r", geo_raw["inner_radius_r"]),
        step_height_m=_num("geometry", "step_height_m", geo_raw["step_height_m"]),
        chamber_spacing_l=_num("geometry", "chamber_spacing_l", geo_raw["chamber_spacing_l"]),
        wall_thickness_t=_num("geometry", "wall_thickness_t", geo_raw["wall_thickness_t"]),
        chamber_length_s=_num("geometry", "chamber_length_s", geo_raw["chamber_length_s"]),
        chamber_count_N=_int("geometry", "chamber_count_N", geo_raw["chamber_count_N"]),
    )
    try:
        report = validate_geometry(geometry)
        problems.extend(f"geometry: {v}" for v in report.violations)
    except ValueError as e:
        problems.append(f"geometry: {e}")

    params = None
    try:
        params = PlantParams(
            P_max=_num("plant", "P_max", plant_raw["P_max"]),
            k_free=_num("plant", "k_free", plant_raw["k_free"]),
            k_contact_at_0p7=_num("plant", "k_contact_at_0p7", plant_raw["k_contact_at_0p7"]),
            k_vent=_num("plant", "k_vent", plant_raw["k_vent"]),
            dt=_num("plant", "dt", plant_raw["dt"]),
            noise_sigma=_num("plant", "noise_sigma", plant_raw["noise_sigma"]),
            rng_seed=_int("plant", "rng_seed", plant_raw["rng_seed"]),
        )
    except ConfigError:
        raise  # type errors are structural, not rule violations
    except ValueError as e:
        problems.append(f"plant: {e}")

    material = None
    E = _num("material", "youngs_modulus_E", mat_raw["youngs_modulus_E"])
    nu = _num("material", "poisson_ratio_nu", mat_raw["poisson_ratio_nu"])
    target = _num("material", "calibration_target", mat_raw["calibration_target"])
    geometry_ok = not any(p.startswith("geometry:") for p in problems)
    if geometry_ok and params is not None:
        try:
            kappa = calibrate_kappa(geometry, E, target, params.P_max)
            material = SurrogateMaterial(E, nu, kappa)
        except ValueError as e:
            problems.append(f"material: {e}")

    layout = None
    specs = _build_modules(sta_raw, geometry)
    violations = station_violations(specs)
    if violations:
        problems.extend(f"station: {v}" for v in violations)
    else:
        layout = StationLayout(tuple(specs))

    object_spec = None
    initial_z = _num("object", "initial_z", obj_raw["initial_z"])
    if _bool("object", "present", obj_raw["present"]):
        r_o = _num("object", "radius_r_o", obj_raw["radius_r_o"])
        L_o = _num("object", "length_L_o", obj_raw["length_L_o"])
        if not 0 < r_o < geometry.inner_radius_r:
            problems.append(
                f"object: radius_r_o must be in (0, inner_radius_r={geometry.inner_radius_r}), "
                f"got {r_o}"
            )
        if L_o <= 0:
            problems.append(f"object: length_L_o must be > 0, got {L_o}")
        if initial_z < 0:
            problems.append(f"object: initial_z must be >= 0, got {initial_z}")
        object_spec = ObjectSpec(r_o, L_o)

    detection = None
    try:
        detection = DetectionConfig(
            window_start=_num("detection", "window_start", det_raw["window_start"]),
            window_len=_num("detection", "window_len", det_raw["window_len"]),
            threshold_ratio_theta=_num("detection", "threshold_ratio_theta",
                                       det_raw["threshold_ratio_theta"]),
            consecutive_required=_int("detection", "consecutive_required",
                                      det_raw["consecutive_required"]),
            min_window_samples=_int("detection", "min_window_samples",
                                    det_raw["min_window_samples"]),
            saturation_fraction=_num("detection", "saturation_fraction",
                                     det_raw["saturation_fraction"]),
        )
    except ConfigError:
        raise
    except ValueError as e:
        problems.append(f"detection: {e}")

    control = None
    try:
        control = ControlConfig(
            phase_timeout_s=_num("control", "phase_timeout_s", ctl_raw["phase_timeout_s"]),
            inflated_fraction=_num("control", "inflated_fraction", ctl_raw["inflated_fraction"]),
            deflated_threshold_kPa=_num("control", "deflated_threshold_kPa",
                                        ctl_raw["deflated_threshold_kPa"]),
            max_cycles=_int("control", "max_cycles", ctl_raw["max_cycles"]),
            max_cycles_per_level=_int("control", "max_cycles_per_level",
                                      ctl_raw["max_cycles_per_level"]),
        )
    except ConfigError:
        raise
    except ValueError as e:
        problems.append(f"control: {e}")

    duration_s = _num("run", "duration_s", run_raw["duration_s"])
    if duration_s <= 0:
        problems.append(f"run: duration_s must be > 0, got {duration_s}")
    output_path = run_raw["output_path"]
    if output_path is not None and not isinstance(output_path, str):
        raise ConfigError(f"run.output_path: expected a path string, got {output_path!r}")

    return RunConfig(
        geometry=geometry,
        material=material,
        layout=layout,
        object_spec=object_spec,
        initial_z=initial_z,
        params=params,
        detection=detection,
        control=control,
        calibration_with_object=_bool("calibration", "object_present",
                                      cal_raw["object_present"]),
        duration_s=duration_s,
        output_path=output_path,
        problems=problems,
    )


BASELINES_HEADER = "module_id,rate_kPa_per_s"


def load_baselines(path: str) -> dict[int, float]:
    """Read a calibration CSV into {module_id: rate}."""
    out: dict[int, float] = {}
    with open(path, "r") as f:
        header = f.readline().strip()
        if header != BASELINES_HEADER:
            raise ConfigError(f"unrecognized baselines header: {header!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ConfigError(f"baselines line {lineno}: expected 2 columns")
            try:
                out[int(parts[0])] = float(parts[1])
            except ValueError:
                raise ConfigError(f"baselines line {lineno}: malformed row {line!r}") from None
    return out


def write_baselines(path: str, rates: dict[int, float]) -> None:
    with open(path, "w", newline="") as f:
        f.write(BASELINES_HEADER + "\n")
        for mid in sorted(rates):
            f.write(f"{mid},{rates[mid]:.6f}\n")
