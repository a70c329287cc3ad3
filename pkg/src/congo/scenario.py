"""Experiment spec files: sectioned key/value text into runnable specs.

A spec file declares an environment (random sparse quadratics or a queueing
network), the optimizers to race on it, and the round/seed budget. The same
format also carries an optional parameter sweep. Files are standard INI as
read by configparser; see the README for the field reference.
"""

from __future__ import annotations

import configparser
import os
from importlib import resources
from pathlib import Path

import numpy as np

from .core import ConfigurationError, SmoothnessProfile
from .env_jackson import (
    FixedWorkload,
    JacksonEnvironment,
    SimConfig,
    Topology,
    VariableMixWorkload,
    VariableRateWorkload,
)
from .env_quadratic import QuadraticAdversary, QuadraticAdversaryConfig, smoothness_bounds
from .harness import ExperimentSpec, SweepPlan
from .optimizers import (
    ALL_OPTIMIZERS,
    ConstantRate,
    InverseDecayRate,
    OptimizerConfig,
    StepDecayRate,
)
from .sensing import prescribe_m

PRESET_ENV_VAR = "CONGO_PRESET_DIR"

# optimizer keys a [sweep] section may rewrite
SWEEPABLE = ("m", "sparsity", "k", "delta")

_OPTIMIZER_KEYS = {
    "learning_rate",
    "delta",
    "sparsity",
    "m",
    "k",
    "lipschitz",
    "smoothness",
    "normalize_gradient",
    "distribution",
    "recovery_tolerance",
    "recovery_max_iterations",
}


def parse_seed_list(text: str) -> tuple[int, ...]:
    """Seeds as integers and inclusive ranges: '0-4', '0 1 2', '3,7,10-12'."""
    seeds: list[int] = []
    for token in text.replace(",", " ").split():
        lo, sep, hi = token.partition("-")
        try:
            if sep and lo:  # plain negatives are not seeds, so '-' means a range
                first, last = int(lo), int(hi)
                if last < first:
                    raise ValueError
                seeds.extend(range(first, last + 1))
            else:
                seeds.append(int(token))
        except ValueError:
            raise ConfigurationError(f"bad seed token {token!r} (want int or first-last)")
    if not seeds:
        raise ConfigurationError("seed list is empty")
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError("seed list has duplicates")
    return tuple(seeds)


def parse_learning_rate(text: str):
    """'0.1' | 'step:eta0:period:factor' | 'inv:eta0:decay'."""
    parts = text.split(":")
    try:
        if parts[0] == "step" and len(parts) == 4:
            return StepDecayRate(float(parts[1]), int(parts[2]), float(parts[3]))
        if parts[0] == "inv" and len(parts) == 3:
            return InverseDecayRate(float(parts[1]), float(parts[2]))
        if len(parts) == 1:
            return ConstantRate(float(parts[0]))
    except ValueError:
        pass
    raise ConfigurationError(
        f"bad learning_rate {text!r} (want a number, step:eta0:period:factor, or inv:eta0:decay)"
    )


def _parse_mix(section: str, text: str) -> dict[str, float]:
    mix: dict[str, float] = {}
    for token in text.replace(",", " ").split():
        name, sep, prob = token.partition(":")
        if not sep or not name:
            raise ConfigurationError(f"[{section}] mix token {token!r} is not name:probability")
        try:
            mix[name] = float(prob)
        except ValueError:
            raise ConfigurationError(f"[{section}] mix probability {prob!r} is not a number")
    if not mix:
        raise ConfigurationError(f"[{section}] mix is empty")
    return mix


def _parse_segments(text: str) -> tuple[tuple[int, int, float], ...]:
    segments = []
    for token in text.replace(",", " ").split():
        span, sep, rate = token.rpartition(":")
        first, dash, last = span.partition("-")
        try:
            segments.append((int(first), int(last), float(rate)))
        except ValueError:
            raise ConfigurationError(
                f"[workload] segment {token!r} is not first-last:rate"
            )
    return tuple(segments)


class _Section:
    """Typed accessors over one configparser section with field-naming errors."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self._data = dict(parser[name]) if parser.has_section(name) else {}

    def __contains__(self, key: str) -> bool:
        return key in self._data

    def keys(self):
        return self._data.keys()

    def raw(self, key: str, default: str | None = None) -> str | None:
        value = self._data.get(key, default)
        return value.strip() if isinstance(value, str) else value

    def require(self, key: str) -> str:
        if key not in self._data:
            raise ConfigurationError(f"[{self.name}] {key}: missing required key")
        return self._data[key].strip()

    def text(self, key: str, default: str) -> str:
        return self._data.get(key, default).strip()

    def floating(self, key: str, default: float | None = None) -> float:
        raw = self.raw(key)
        if raw is None or raw == "":
            if default is None:
                raise ConfigurationError(f"[{self.name}] {key}: missing required key")
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigurationError(f"[{self.name}] {key}: {raw!r} is not a number")

    def integer(self, key: str, default: int | None = None) -> int:
        raw = self.raw(key)
        if raw is None or raw == "":
            if default is None:
                raise ConfigurationError(f"[{self.name}] {key}: missing required key")
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigurationError(f"[{self.name}] {key}: {raw!r} is not an integer")

    def boolean(self, key: str, default: bool) -> bool:
        raw = self.raw(key)
        if raw is None or raw == "":
            return default
        lowered = raw.lower()
        states = configparser.ConfigParser.BOOLEAN_STATES
        if lowered not in states:
            raise ConfigurationError(f"[{self.name}] {key}: {raw!r} is not a boolean")
        return states[lowered]


def _read_file(path: Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError:
        raise
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: not a valid spec file ({exc})")
    return parser


def load_spec(path: str | Path, overrides: dict[str, object] | None = None) -> ExperimentSpec:
    """Parse one spec file into an ExperimentSpec ready for the harness.

    overrides maps sweepable optimizer keys to replacement values; they apply
    to every optimizer except the exact-gradient baseline, and auto-derived
    fields (m, smoothness bounds) recompute against the new values.
    """
    path = Path(path)
    parser = _read_file(path)
    if not parser.has_section("experiment"):
        raise ConfigurationError(f"{path}: missing [experiment] section")
    exp = _Section(parser, "experiment")
    kind = exp.require("kind")
    if kind not in ("quadratic", "jackson"):
        raise ConfigurationError(f"[experiment] kind: {kind!r} is not quadratic or jackson")
    name = exp.text("name", path.stem)
    horizon = exp.integer("rounds")
    seeds = parse_seed_list(exp.require("seeds"))
    opt_names = exp.require("optimizers").replace(",", " ").split()
    if len(set(opt_names)) != len(opt_names):
        raise ConfigurationError("[experiment] optimizers: duplicate optimizer name")
    for opt in opt_names:
        if opt not in ALL_OPTIMIZERS:
            raise ConfigurationError(
                f"[experiment] optimizers: unknown optimizer {opt!r}"
                f" (known: {', '.join(ALL_OPTIMIZERS)})"
            )

    if kind == "quadratic":
        make_env, dim, radius = _build_quadratic(parser)
    else:
        make_env, dim, radius = _build_jackson(parser)

    known = {"experiment", "quadratic", "topology", "workload", "simulation", "sweep"}
    for section in parser.sections():
        if section in known or section == "optimizer.defaults":
            continue
        if section.startswith("optimizer."):
            target = section[len("optimizer."):]
            if target not in opt_names:
                raise ConfigurationError(
                    f"[{section}] configures {target!r}, which is not in [experiment] optimizers"
                )
        else:
            raise ConfigurationError(f"unknown section [{section}]")

    optimizers = [
        _build_optimizer(parser, opt, kind, dim, radius, overrides or {}) for opt in opt_names
    ]
    sweep = _read_sweep(parser) if parser.has_section("sweep") else None
    return ExperimentSpec(
        name=name,
        kind=kind,
        make_environment=make_env,
        optimizers=optimizers,
        horizon=horizon,
        seeds=seeds,
        sweep=sweep,
    )


def _build_quadratic(parser):
    sec = _Section(parser, "quadratic")
    if not parser.has_section("quadratic"):
        raise ConfigurationError("missing [quadratic] section")
    raw_constant = sec.raw("fixed_constant")
    cfg = QuadraticAdversaryConfig(
        dimension=sec.integer("dimension"),
        sparsity=sec.integer("sparsity"),
        radius=sec.floating("radius"),
        noise_sigma=sec.floating("noise_sigma", 0.0),
        fixed_constant=None if raw_constant in (None, "") else sec.floating("fixed_constant"),
        approx_scale=sec.floating("approx_scale", 0.0),
        fixed_support=sec.boolean("fixed_support", False),
        start_fraction=sec.floating("start_fraction", 0.9),
    )
    return (lambda: QuadraticAdversary(cfg)), cfg.dimension, cfg.radius


def _build_jackson(parser):
    if not parser.has_section("topology"):
        raise ConfigurationError("missing [topology] section")
    topo_sec = _Section(parser, "topology")
    num_queues = topo_sec.integer("queues")
    routes = {}
    for key in topo_sec.keys():
        if not key.startswith("route."):
            if key != "queues":
                raise ConfigurationError(f"[topology] {key}: unknown key")
            continue
        job = key[len("route."):]
        tokens = topo_sec.require(key).split()
        try:
            routes[job] = tuple(int(q) for q in tokens)
        except ValueError:
            raise ConfigurationError(f"[topology] {key}: route must be queue indices")
    topology = Topology(num_queues=num_queues, routes=routes)

    if not parser.has_section("workload"):
        raise ConfigurationError("missing [workload] section")
    work = _Section(parser, "workload")
    wkind = work.text("kind", "fixed")
    if wkind == "fixed":
        schedule = FixedWorkload(
            rate=work.floating("rate"), mix=_parse_mix("workload", work.require("mix"))
        )
    elif wkind == "variable-rate":
        schedule = VariableRateWorkload(
            segments=_parse_segments(work.require("segments")),
            mix=_parse_mix("workload", work.require("mix")),
        )
    elif wkind == "variable-mix":
        schedule = VariableMixWorkload(
            rate=work.floating("rate"),
            initial_mix=_parse_mix("workload", work.require("initial_mix")),
            final_mix=_parse_mix("workload", work.require("final_mix")),
            start_round=work.integer("start_round"),
            end_round=work.integer("end_round"),
        )
    else:
        raise ConfigurationError(
            f"[workload] kind: {wkind!r} is not fixed, variable-rate, or variable-mix"
        )

    sim = _Section(parser, "simulation")
    sim_cfg = SimConfig(
        warmup_seconds=sim.floating("warmup_seconds", 30.0),
        measure_seconds=sim.floating("measure_seconds", 10.0),
        resource_weight=sim.floating("resource_weight", 1.0),
        correction_factor=sim.floating("correction_factor", 1.0),
        lower_bound=sim.floating("lower_bound", 1.0),
        upper_bound=sim.floating("upper_bound", 60.0),
    )
    base = sim.floating("initial_allocation")
    entry_alloc = sim.floating("initial_entry_allocation", base)
    initial = np.full(num_queues, base)
    initial[topology.entry] = entry_alloc

    def make_env():
        return JacksonEnvironment(topology, schedule, sim_cfg, initial)

    return make_env, num_queues, None


def _build_optimizer(parser, opt_name, kind, dim, radius, overrides) -> OptimizerConfig:
    merged: dict[str, str] = {}
    for section in ("optimizer.defaults", f"optimizer.{opt_name}"):
        if parser.has_section(section):
            for key, value in parser[section].items():
                if key not in _OPTIMIZER_KEYS:
                    raise ConfigurationError(f"[{section}] {key}: unknown key")
                merged[key] = value.strip()
    sec_name = f"optimizer.{opt_name}"
    for key, value in overrides.items():
        if key not in SWEEPABLE:
            raise ConfigurationError(f"sweep parameter {key!r} is not one of {SWEEPABLE}")
        if opt_name != "gd":  # the exact-gradient baseline has nothing to sweep
            merged[key] = str(value)

    def floating(key, default=None):
        raw = merged.get(key, "")
        if raw == "":
            if default is None:
                raise ConfigurationError(f"[{sec_name}] {key}: missing required key")
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigurationError(f"[{sec_name}] {key}: {raw!r} is not a number")

    def integer(key, default):
        raw = merged.get(key, "")
        if raw == "":
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigurationError(f"[{sec_name}] {key}: {raw!r} is not an integer")

    sparsity = integer("sparsity", 1)
    raw_m = merged.get("m", "")
    if raw_m == "auto":
        m = prescribe_m(sparsity, dim)
    else:
        m = integer("m", 1)

    for bound in ("lipschitz", "smoothness"):
        if merged.get(bound, "") == "auto":
            if kind != "quadratic":
                raise ConfigurationError(
                    f"[{sec_name}] {bound}: auto bounds exist only for the quadratic adversary"
                )
            merged[bound] = ""
    if kind == "quadratic" and ("lipschitz" not in merged or merged["lipschitz"] == ""):
        profile = smoothness_bounds(radius, sparsity)
    else:
        profile = SmoothnessProfile(
            lipschitz=floating("lipschitz", 0.0), smoothness=floating("smoothness", 0.0)
        )

    raw_k = merged.get("k", "")
    k = None if raw_k in ("", "auto") else integer("k", 1)
    distribution = merged.get("distribution") or None

    if "learning_rate" not in merged:
        raise ConfigurationError(f"[{sec_name}] learning_rate: missing required key")
    return OptimizerConfig(
        name=opt_name,
        schedule=parse_learning_rate(merged["learning_rate"]),
        delta=floating("delta"),
        sparsity=sparsity,
        m=m,
        k=k,
        smoothness=profile,
        normalize_gradient=_as_bool(sec_name, "normalize_gradient", merged),
        recovery_tolerance=floating("recovery_tolerance", 0.005),
        recovery_max_iterations=integer("recovery_max_iterations", 50),
        distribution=distribution,
    )


def _as_bool(section, key, merged) -> bool:
    raw = merged.get(key, "")
    if raw == "":
        return False
    states = configparser.ConfigParser.BOOLEAN_STATES
    if raw.lower() not in states:
        raise ConfigurationError(f"[{section}] {key}: {raw!r} is not a boolean")
    return states[raw.lower()]


def _read_sweep(parser) -> tuple[str, tuple[float, ...]]:
    sec = _Section(parser, "sweep")
    parameter = sec.require("parameter")
    if parameter not in SWEEPABLE:
        raise ConfigurationError(f"[sweep] parameter: {parameter!r} is not one of {SWEEPABLE}")
    values: list[float] = []
    for token in sec.require("values").replace(",", " ").split():
        lo, sep, hi = token.partition("-")
        if sep and lo and parameter != "delta":
            try:
                first, last = int(lo), int(hi)
            except ValueError:
                raise ConfigurationError(f"[sweep] values: bad token {token!r}")
            values.extend(range(first, last + 1))
            continue
        try:
            values.append(int(token) if parameter != "delta" else float(token))
        except ValueError:
            raise ConfigurationError(f"[sweep] values: bad token {token!r}")
    if not values:
        raise ConfigurationError("[sweep] values: empty")
    return parameter, tuple(values)


def load_sweep(path: str | Path) -> SweepPlan:
    """Expand a spec's [sweep] section into one ExperimentSpec per value."""
    path = Path(path)
    base = load_spec(path)
    if base.sweep is None:
        raise ConfigurationError(f"{path}: no [sweep] section to expand")
    parameter, values = base.sweep
    specs = [load_spec(path, overrides={parameter: value}) for value in values]
    for value, spec in zip(values, specs):
        spec.name = f"{base.name}-{parameter}-{value}"
    return SweepPlan(name=base.name, parameter=parameter, values=values, specs=specs)


def packaged_preset_dir() -> Path:
    return Path(resources.files("congo") / "presets")


def preset_search_dirs() -> list[Path]:
    """User preset dir (env var) first, then the presets shipped in the package."""
    dirs = []
    env_dir = os.environ.get(PRESET_ENV_VAR)
    if env_dir:
        dirs.append(Path(env_dir))
    dirs.append(packaged_preset_dir())
    return dirs


def find_preset(name: str) -> Path:
    """Resolve a spec argument: an existing path wins, then the preset dirs."""
    direct = Path(name)
    if direct.is_file():
        return direct
    tried = []
    for directory in preset_search_dirs():
        for candidate in (directory / name, directory / f"{name}.cfg"):
            if candidate.is_file():
                return candidate
            tried.append(str(candidate))
    raise ConfigurationError(f"no spec file or preset named {name!r} (tried: {', '.join(tried)})")


def list_presets() -> list[tuple[str, str, Path]]:
    """(name, kind, path) for every preset visible in the search dirs."""
    seen: dict[str, tuple[str, str, Path]] = {}
    for directory in preset_search_dirs():
        if not directory.is_dir():
            continue
        for path in sorted(directory.glob("*.cfg")):
            if path.stem in seen:  # user dir shadows the packaged preset
                continue
            try:
                spec_kind = _peek_kind(path)
            except (ConfigurationError, OSError):
                spec_kind = "unreadable"
            seen[path.stem] = (path.stem, spec_kind, path)
    return sorted(seen.values())


def _peek_kind(path: Path) -> str:
    parser = _read_file(path)
    if not parser.has_section("experiment"):
        return "invalid"
    return parser["experiment"].get("kind", "invalid").strip()
