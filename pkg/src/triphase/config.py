"""Run-configuration files: schema, validation, conversion to ExperimentSpec.

Configs are YAML documents with a mandatory ``schema_version``.  Unknown
keys are rejected (with the line they appear on) rather than ignored, so
a reproduction manifest can never silently drift from what actually ran.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .bounds import ZZSettings
from .experiments import TRUTH_MODES, ExperimentSpec
from .interferometer import InterferometerSpec, dft_tritter, load_unitary
from .particle_filter import ResampleParams
from .priors import GaussianPrior, Prior, RectPrior, gamma_from

SCHEMA_VERSION = 1


class ConfigError(Exception):
    """Invalid run configuration; carries file/line context when available."""

    def __init__(self, message: str, source: str = "", line: int | None = None):
        prefix = source or "config"
        if line is not None:
            prefix += f":{line}"
        super().__init__(f"{prefix}: {message}")


class _Section:
    """A mapping node plus enough context to raise precise errors."""

    def __init__(self, node: yaml.MappingNode | None, loader, source: str, path: str):
        self.loader = loader
        self.source = source
        self.path = path
        self.entries: dict[str, tuple[yaml.Node, yaml.Node]] = {}
        if node is None:
            return
        if not isinstance(node, yaml.MappingNode):
            raise ConfigError(f"'{path}' must be a mapping", source, node.start_mark.line + 1)
        for key_node, value_node in node.value:
            key = str(key_node.value)
            if key in self.entries:
                raise ConfigError(f"duplicate key '{self._qual(key)}'", source,
                                  key_node.start_mark.line + 1)
            self.entries[key] = (key_node, value_node)

    def _qual(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def reject_unknown(self, allowed: set[str]) -> None:
        for key, (key_node, _) in self.entries.items():
            if key not in allowed:
                raise ConfigError(f"unknown key '{self._qual(key)}'", self.source,
                                  key_node.start_mark.line + 1)

    def has(self, key: str) -> bool:
        return key in self.entries

    def raw(self, key: str):
        key_node, value_node = self.entries[key]
        return self.loader.construct_object(value_node, deep=True)

    def line(self, key: str) -> int:
        return self.entries[key][0].start_mark.line + 1

    def error(self, key: str, message: str) -> ConfigError:
        line = self.line(key) if key in self.entries else None
        return ConfigError(message, self.source, line)

    def require(self, key: str):
        if key not in self.entries:
            raise ConfigError(f"missing required key '{self._qual(key)}'", self.source)
        return self.raw(key)

    def section(self, key: str, required: bool = False) -> "_Section":
        if key not in self.entries:
            if required:
                raise ConfigError(f"missing required key '{self._qual(key)}'", self.source)
            return _Section(None, self.loader, self.source, self._qual(key))
        return _Section(self.entries[key][1], self.loader, self.source, self._qual(key))

    def scalar(self, key: str, kind, default=None, required: bool = False):
        if key not in self.entries:
            if required:
                raise ConfigError(f"missing required key '{self._qual(key)}'", self.source)
            return default
        value = self.raw(key)
        try:
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind is int and isinstance(value, bool):
                raise TypeError
            if kind is int and isinstance(value, float) and value != int(value):
                raise TypeError
            return kind(value)
        except (TypeError, ValueError):
            raise self.error(key, f"'{self._qual(key)}' must be {kind.__name__}, got {value!r}")


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated configuration: an experiment plus presentation choices."""

    spec: ExperimentSpec
    label: str = "default"
    source: str = "config"


def load_config(path: str | Path, *, seed_override: int | None = None) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path))
    return parse_config(text, source=str(path), seed_override=seed_override)


def parse_config(text: str, source: str = "config",
                 seed_override: int | None = None) -> RunConfig:
    loader = yaml.SafeLoader(text)
    try:
        node = loader.get_single_node()
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {exc}", source,
                          mark.line + 1 if mark else None)
    if node is None:
        raise ConfigError("empty configuration", source)

    root = _Section(node, loader, source, "")
    root.reject_unknown({"schema_version", "label", "interferometer", "prior",
                         "run", "particles", "bounds"})

    version = root.scalar("schema_version", int, required=True)
    if version != SCHEMA_VERSION:
        raise root.error("schema_version",
                         f"unsupported schema_version {version}; this build reads {SCHEMA_VERSION}")
    label = root.scalar("label", str, default="default")

    interferometer = _parse_interferometer(root.section("interferometer"))
    prior = _parse_prior(root.section("prior", required=True))
    run = root.section("run", required=True)
    run.reject_unknown({"n_schedule", "repetitions", "master_seed", "truth_mode"})
    schedule = run.require("n_schedule")
    if not isinstance(schedule, list) or not schedule:
        raise run.error("n_schedule", "'run.n_schedule' must be a non-empty list of integers")
    try:
        schedule = tuple(int(n) for n in schedule)
    except (TypeError, ValueError):
        raise run.error("n_schedule", "'run.n_schedule' must contain integers")
    k = run.scalar("repetitions", int, default=300)
    if k < 1:
        raise run.error("repetitions", f"'run.repetitions' must be >= 1, got {k}")
    master_seed = run.scalar("master_seed", int, default=0)
    if seed_override is not None:
        master_seed = int(seed_override)
    truth_mode = run.scalar("truth_mode", str, default="draw-from-prior")
    if truth_mode not in TRUTH_MODES:
        raise run.error("truth_mode",
                        f"'run.truth_mode' must be one of {list(TRUTH_MODES)}, got {truth_mode!r}")

    particles = root.section("particles")
    particles.reject_unknown({"count", "shrinkage", "resample_threshold"})
    m_particles = particles.scalar("count", int, default=1600)
    a = particles.scalar("shrinkage", float, default=0.98)
    threshold = particles.scalar("resample_threshold", float, default=0.5)

    bounds = root.section("bounds")
    bounds.reject_unknown({"crb", "van_trees", "ziv_zakai", "ziv_zakai_settings"})
    crb = bounds.scalar("crb", bool, default=True)
    vt = bounds.scalar("van_trees", bool, default=True)
    zz = bounds.scalar("ziv_zakai", bool, default=True)
    zz_settings = _parse_zz_settings(bounds.section("ziv_zakai_settings"))

    if vt and isinstance(prior, RectPrior):
        # Deliberately allowed at parse time: the bounds/simulate commands
        # surface this as a computation error (exit 2), not a config error.
        pass

    try:
        resample = ResampleParams(a=a, threshold_fraction=threshold)
        spec = ExperimentSpec(
            prior=prior, n_schedule=schedule, interferometer=interferometer,
            k=k, master_seed=master_seed, truth_mode=truth_mode,
            m_particles=m_particles, resample=resample,
            compute_crb=crb, compute_vt=vt, compute_zz=zz,
            zz_settings=zz_settings, config_id=label,
        )
    except ValueError as exc:
        raise ConfigError(str(exc), source)
    return RunConfig(spec=spec, label=label, source=source)


def _parse_interferometer(sec: _Section) -> InterferometerSpec:
    sec.reject_unknown({"u_a", "u_b", "input_port"})

    def unitary(key: str) -> np.ndarray:
        if not sec.has(key):
            return dft_tritter()
        value = sec.raw(key)
        if value == "dft":
            return dft_tritter()
        if isinstance(value, dict) and set(value) == {"file"}:
            try:
                return load_unitary(value["file"])
            except (OSError, ValueError) as exc:
                raise sec.error(key, f"cannot load unitary: {exc}")
        raise sec.error(key, f"'{sec._qual(key)}' must be 'dft' or {{file: PATH}}")

    u_a = unitary("u_a")
    u_b = unitary("u_b")
    port = sec.scalar("input_port", int, default=0)
    try:
        return InterferometerSpec(u_a=u_a, u_b=u_b, input_port=port)
    except ValueError as exc:
        raise ConfigError(str(exc), sec.source)


def _parse_prior(sec: _Section) -> Prior:
    sec.reject_unknown({"family", "mu", "sigma", "rho", "delta"})
    family = sec.scalar("family", str, required=True)
    mu = sec.require("mu")
    if not isinstance(mu, list) or len(mu) != 2:
        raise sec.error("mu", "'prior.mu' must be a list of two numbers")
    mu = np.asarray([float(x) for x in mu])
    if family == "gaussian":
        if sec.has("delta"):
            raise sec.error("delta", "'prior.delta' only applies to the rect family")
        sigma = sec.scalar("sigma", float, required=True)
        rho = sec.scalar("rho", float, default=0.0)
        if sigma <= 0:
            raise sec.error("sigma", f"'prior.sigma' must be positive, got {sigma}")
        if not -1.0 < rho < 1.0:
            raise sec.error("rho", f"'prior.rho' must lie in (-1, 1), got {rho}")
        return GaussianPrior(mu, gamma_from(sigma, rho))
    if family == "rect":
        for bad in ("sigma", "rho"):
            if sec.has(bad):
                raise sec.error(bad, f"'prior.{bad}' only applies to the gaussian family")
        delta = sec.scalar("delta", float, required=True)
        if delta <= 0:
            raise sec.error("delta", f"'prior.delta' must be positive, got {delta}")
        return RectPrior(mu, delta)
    raise sec.error("family", f"'prior.family' must be 'gaussian' or 'rect', got {family!r}")


def _parse_zz_settings(sec: _Section) -> ZZSettings:
    sec.reject_unknown({"tau_points", "t_range", "t_tolerance", "quad_grid",
                        "support_radius", "pe_form"})
    kwargs = {}
    for key, kind in (("tau_points", int), ("t_range", float), ("t_tolerance", float),
                      ("quad_grid", int), ("support_radius", float), ("pe_form", str)):
        if sec.has(key):
            kwargs[key] = sec.scalar(key, kind)
    try:
        return ZZSettings(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), sec.source)
