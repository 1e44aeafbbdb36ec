"""Flat ``key = value`` study configuration.

One assignment per line, ``#`` starts a comment, blank lines are ignored.
Lists are comma separated. Unknown keys are rejected so typos surface early.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


STUDIES = ("convergence", "plasticity_strip", "finite_strain_block", "single_solve")
MESH_FAMILIES = ("square", "triangle", "trapezoid", "hex_structured", "chevron", "voronoi", "strip", "file")
LAWS = ("linear_elastic", "hencky", "benchmark", "neo_hookean", "j2")


@dataclass
class StudyConfig:
    study: str = "convergence"
    mesh: str = "square"
    refinements: list[int] = field(default_factory=lambda: [8, 16, 32])
    mesh_file: str | None = None
    seed: int = 0

    case: str = "benchmark_sine"
    law: str | None = None
    lam: float | None = None
    mu: float | None = None
    E: float = 70.0
    nu: float = 0.2
    sigma_y0: float = 0.8
    H_iso: float = 10.0
    H_kin: float = 10.0
    variant: str = "sign_fixed"
    variants: list[str] = field(default_factory=list)

    steps: int = 10
    tol_rel: float = 1e-10
    tol_abs: float = 1e-12
    max_iter: int = 25

    alpha_mode: str = "updated"
    alpha_value: float | None = None
    alpha_norm: str = "max"
    compare_fixed: bool = False
    e0_scale: str = "absolute"

    # plasticity strip
    strip_kind: str = "brick"
    width: float = 100.0
    height: float = 180.0
    radius: float = 50.0
    delta: float = 10.0
    reference_kind: str = "tri"
    reference_refinement: int = 0

    # finite strain block and single solves
    body_force: list[float] = field(default_factory=list)
    clamp: list[str] = field(default_factory=list)
    probe: list[float] = field(default_factory=lambda: [1.0, 1.0])

    out: str = "out"
    write_meshes: bool = True

    def validate(self) -> StudyConfig:
        if self.study not in STUDIES:
            raise ConfigError(f"study must be one of {STUDIES}, got {self.study!r}")
        if self.mesh not in MESH_FAMILIES:
            raise ConfigError(f"mesh must be one of {MESH_FAMILIES}, got {self.mesh!r}")
        if self.mesh == "file":
            if not self.mesh_file:
                raise ConfigError("mesh = file needs mesh_file")
            if not os.path.isfile(self.mesh_file):
                raise ConfigError(f"mesh file {self.mesh_file!r} does not exist")
        elif not self.refinements:
            raise ConfigError("refinement list is empty")
        if any(b <= a for a, b in zip(self.refinements, self.refinements[1:])):
            raise ConfigError(f"refinements must be strictly increasing, got {self.refinements}")
        if any(n < 1 for n in self.refinements):
            raise ConfigError("refinements must be positive")
        if self.law is not None and self.law not in LAWS:
            raise ConfigError(f"law must be one of {LAWS}, got {self.law!r}")
        if self.alpha_mode not in ("updated", "fixed"):
            raise ConfigError("alpha_mode must be 'updated' or 'fixed'")
        if self.alpha_norm not in ("max", "frobenius"):
            raise ConfigError("alpha_norm must be 'max' or 'frobenius'")
        if self.e0_scale not in ("absolute", "relative"):
            raise ConfigError("e0_scale must be 'absolute' or 'relative'")
        if self.steps < 1 or self.max_iter < 1:
            raise ConfigError("steps and max_iter must be positive")
        if self.body_force and len(self.body_force) != 2:
            raise ConfigError("body_force takes two components")
        return self


def _as_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(name: str, ftype, text: str):
    ftype = str(ftype)
    text = text.strip()
    if "None" in ftype and text.lower() in ("", "none"):
        return None
    if ftype.startswith("list"):
        items = [t.strip() for t in text.split(",") if t.strip()]
        if "int" in ftype:
            return [int(t) for t in items]
        if "float" in ftype:
            return [float(t) for t in items]
        return items
    if "bool" in ftype:
        return _as_bool(text)
    if "int" in ftype:
        return int(text)
    if "float" in ftype:
        return float(text)
    return text


_FIELDS = {f.name: f for f in dataclasses.fields(StudyConfig)}


def apply_overrides(cfg: StudyConfig, pairs: dict[str, str], source: str = "override") -> StudyConfig:
    for key, value in pairs.items():
        if key not in _FIELDS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        try:
            setattr(cfg, key, _convert(key, _FIELDS[key].type, value))
        except ValueError as exc:
            raise ConfigError(f"{source}: bad value for {key!r}: {exc}") from exc
    return cfg


def parse_config(text: str, base: StudyConfig | None = None) -> StudyConfig:
    cfg = base if base is not None else StudyConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        apply_overrides(cfg, {key: value}, source=f"line {lineno}")
    return cfg


def load_config(path: str, base: StudyConfig | None = None) -> StudyConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)


def defaults_for(study: str) -> StudyConfig:
    """Starting values for each study kind before the user's config is applied."""
    if study == "plasticity_strip":
        return StudyConfig(study=study, mesh="strip", refinements=[32, 64, 128], law="j2", steps=100)
    if study == "finite_strain_block":
        return StudyConfig(
            study=study,
            mesh="square",
            refinements=[6, 13, 27, 54],
            law="neo_hookean",
            lam=5.1086e4,
            mu=2.6316e4,
            body_force=[1.05e5, 0.0],
            clamp=["left"],
        )
    if study == "single_solve":
        return StudyConfig(study=study, mesh="square", refinements=[8], law="linear_elastic", steps=1, clamp=["left"])
    return StudyConfig(study=study)
