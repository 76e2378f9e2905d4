"""Line-oriented run configuration.

Each non-blank line is ``section.key = value``; ``#`` starts a comment.
Lists are comma separated. Unknown sections or keys are rejected so typos
cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import BOUNDARY_CONDITIONS, SpatialGrid, build_grid, constant_field, sine_field
from .models import MODEL_NAMES, build_model
from .reaction import ReactionSystem
from .solver import SCHEMES, SolveConfig, normalize_scheme

EXPERIMENTS = ("simulate", "compare", "compare-shifted", "check-conditions", "regularize",
               "maxprinciple", "linf", "eig")
INITIAL_KINDS = ("constant", "sine", "file")

KEYS = {
    "grid": {"lengths", "n_cells", "bc"},
    "time": {"tau", "T", "dt", "scheme", "record_stride"},
    "initial": {"kind", "values", "values2", "file", "file2"},
    "experiment": {"kind", "beta", "ks", "A", "R0", "epsilon", "n", "k", "gamma_bar", "seed"},
    "output": {"dir", "emit_plots"},
}
MODEL_SECTIONS = ("model", "model2")

REQUIRED = {
    "simulate": ("grid", "time", "model", "initial"),
    "compare": ("grid", "time", "model", "model2", "initial"),
    "compare-shifted": ("grid", "time", "model", "model2", "initial"),
    "check-conditions": ("model",),
    "regularize": ("model",),
    "maxprinciple": ("grid", "time", "model", "initial"),
    "linf": ("grid", "time", "model", "model2", "initial"),
    "eig": ("grid",),
}


def _parse_value(raw: str):
    text = raw.strip()
    if not text:
        raise ConfigError("empty value")
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if "," in text:
        return [_parse_value(part) for part in text.split(",")]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


@dataclass
class RunConfig:
    sections: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)
    source: str = "<string>"

    def has(self, section: str) -> bool:
        return section in self.sections

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        if key not in self.sections.get(section, {}):
            raise ConfigError(f"{self.source}: missing key {section}.{key}")
        return self.sections[section][key]

    @property
    def kind(self) -> str | None:
        return self.get("experiment", "kind")

    def validate_for(self, kind: str) -> "RunConfig":
        if kind not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {kind!r}; expected one of {', '.join(EXPERIMENTS)}")
        declared = self.kind
        if declared is not None and declared != kind:
            raise ConfigError(f"{self.source}: experiment.kind={declared} but {kind} was requested")
        for section in REQUIRED[kind]:
            if section not in self.sections:
                raise ConfigError(f"{section} required for experiment={kind}")
        if "grid" in REQUIRED[kind]:
            self.grid()
        if "time" in REQUIRED[kind]:
            self.solve_config()
        for section in MODEL_SECTIONS:
            if section in self.sections:
                self.model(section)
        if "initial" in REQUIRED[kind]:
            self._initial_kind()
        return self

    def grid(self) -> SpatialGrid:
        lengths = np.atleast_1d(self.require("grid", "lengths"))
        n_cells = np.atleast_1d(self.require("grid", "n_cells"))
        bc = str(self.get("grid", "bc", "dirichlet"))
        try:
            return build_grid(lengths.astype(float), n_cells.astype(int), bc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.source}: {exc}") from exc

    def solve_config(self) -> SolveConfig:
        try:
            return SolveConfig(
                tau=float(self.get("time", "tau", 0.0)),
                T=float(self.require("time", "T")),
                dt=float(self.require("time", "dt")),
                scheme=normalize_scheme(self.get("time", "scheme", "backward_euler")),
                record_stride=int(self.get("time", "record_stride", 1)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.source}: {exc}") from exc

    def model(self, section: str = "model") -> ReactionSystem:
        params = dict(self.sections.get(section, {}))
        if "name" not in params:
            raise ConfigError(f"{self.source}: missing key {section}.name")
        name = str(params.pop("name"))
        if name not in MODEL_NAMES:
            raise ConfigError(f"unknown model name {name!r}; expected one of {', '.join(MODEL_NAMES)}")
        try:
            return build_model(name, params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.source}: {section}: {exc}") from exc

    def _initial_kind(self):
        kind = str(self.get("initial", "kind", "constant"))
        if kind not in INITIAL_KINDS:
            raise ConfigError(f"initial.kind must be one of {', '.join(INITIAL_KINDS)}, got {kind!r}")
        if kind == "file":
            self.require("initial", "file")
        else:
            self.require("initial", "values")
        return kind

    def initial(self, grid: SpatialGrid, d: int, second: bool = False) -> np.ndarray:
        kind = self._initial_kind()
        suffix = "2" if second else ""
        if kind == "file":
            key = "file" + suffix
            path = self.base_dir / str(self.get("initial", key) or self.require("initial", "file"))
            values = np.loadtxt(path, delimiter=",", ndmin=2)
            if values.shape != (d, grid.n_nodes):
                raise ConfigError(f"{path}: expected a {d}x{grid.n_nodes} table, got {values.shape}")
            return values
        values = self.get("initial", "values" + suffix) if second else None
        if values is None:
            values = self.require("initial", "values")
        amps = np.broadcast_to(np.atleast_1d(np.asarray(values, dtype=float)), (d,))
        return constant_field(grid, amps) if kind == "constant" else sine_field(grid, amps)

    @property
    def seed(self) -> int:
        return int(self.get("experiment", "seed", 20240601))

    @property
    def output_dir(self) -> Path:
        return self.base_dir / str(self.get("output", "dir", "out"))

    @property
    def emit_plots(self) -> bool:
        return bool(self.get("output", "emit_plots", False))


def parse_config_text(text: str, base_dir: Path | None = None, source: str = "<string>") -> RunConfig:
    sections: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        lhs, rhs = (part.strip() for part in body.split("=", 1))
        if "." not in lhs:
            raise ConfigError(f"{source}:{lineno}: key {lhs!r} lacks a section prefix")
        section, key = lhs.split(".", 1)
        if section in MODEL_SECTIONS:
            pass
        elif section not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown section {section!r}")
        elif key not in KEYS[section]:
            raise ConfigError(f"{source}:{lineno}: unknown key {section}.{key}")
        if key in sections.get(section, {}):
            raise ConfigError(f"{source}:{lineno}: duplicate key {section}.{key}")
        try:
            value = _parse_value(rhs)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
        sections.setdefault(section, {})[key] = value
    cfg = RunConfig(sections, base_dir or Path.cwd(), source)
    bc = cfg.get("grid", "bc")
    if bc is not None and str(bc).lower() not in BOUNDARY_CONDITIONS:
        raise ConfigError(f"{source}: unsupported grid.bc {bc!r}; supported values: "
                          f"{', '.join(BOUNDARY_CONDITIONS)}")
    scheme = cfg.get("time", "scheme")
    if scheme is not None:
        try:
            normalize_scheme(scheme)
        except ValueError:
            raise ConfigError(f"{source}: unknown time.scheme {scheme!r}; supported values: "
                              f"{', '.join(SCHEMES)}") from None
    kind = cfg.kind
    if kind is not None:
        cfg.validate_for(kind)
    if cfg.get("initial", "kind") == "file":
        for key in ("file", "file2"):
            name = cfg.get("initial", key)
            if name is not None and not (cfg.base_dir / str(name)).exists():
                raise ConfigError(f"{source}: initial.{key} {name!r} does not exist")
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, path.parent, str(path))
