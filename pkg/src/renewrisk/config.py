"""Scenario files.

A scenario file is YAML with flat sections::

    claims:      dependence (independent | fgm | gaussian | comonotone |
                 rotational_simplex), marginals: [{kind, ...}], theta, rho,
                 radial, dimension
    arrivals:    kind (exponential | shifted_exponential | deterministic |
                 uniform_shifted) plus its parameters
    target:      kind (halfspace_sum | orthant_union | direction_list |
                 any_line_negative | sum_negative) plus its parameters
    run:         r, premiums, premium_bounds, capital_weights, horizons, x,
                 level, scale, n, seed, method, chunk_size, tail_mode,
                 kappa, defensive
    renewal:     t_max, t                       (optional)
    classcheck:  tail, x, a, v, v_grid          (optional)

Horizons accept ``inf``.  Every error names the line it refers to.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import yaml

from .claimvec import model_from_dict
from .geometry import RuinSet, rare_set_from_dict
from .marginals import marginal_from_dict
from .mc import DEFAULT_CHUNK, DEFENSIVE, KAPPA, Scenario
from .renewal import interarrival_from_dict

__all__ = ["ConfigError", "RunSettings", "LoadedConfig", "load_config", "parse_config", "resolved_yaml"]

SECTIONS = ("claims", "arrivals", "target", "run", "renewal", "classcheck")
REQUIRED = ("claims", "arrivals", "target", "run")
RUN_KEYS = {
    "r": 0.0, "premiums": None, "premium_bounds": None, "capital_weights": None,
    "horizons": None, "x": None, "level": None, "scale": 1.0, "n": 100_000, "seed": 0,
    "method": "crude", "chunk_size": DEFAULT_CHUNK, "tail_mode": "exact_quadrature",
    "kappa": KAPPA, "defensive": DEFENSIVE,
}
RENEWAL_KEYS = {"t_max": None, "t": None}
CLASSCHECK_KEYS = {"tail": None, "x": None, "a": 1.0, "v": 2.0, "v_grid": [1.5, 2.0, 3.0, 4.0]}


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class _Map(dict):
    """Mapping that remembers where it and each of its values start."""

    line: int | None = None

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.lines = {}

    def at(self, key):
        return self.lines.get(key, self.line)


class _Loader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    loader.flatten_mapping(node)
    out = _Map()
    out.line = node.start_mark.line + 1
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", key_node.start_mark.line + 1)
        out[key] = loader.construct_object(value_node, deep=True)
        out.lines[key] = key_node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)


def _num(value, name, line, *, integer=False):
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a number, got {value!r}", line)
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}", line) from None
    if math.isnan(out):
        raise ConfigError(f"{name} must not be NaN", line)
    if integer:
        if not out.is_integer():
            raise ConfigError(f"{name} must be an integer, got {value!r}", line)
        return int(out)
    return out


def _num_list(value, name, line):
    if value is None:
        return None
    if not isinstance(value, list):
        value = [value]
    return [_num(v, name, line) for v in value]


def _numeric_tree(value, line):
    """Coerce numeric-looking strings (YAML reads ``1e-3`` as text) inside a section."""
    if isinstance(value, _Map):
        out = _Map({k: _numeric_tree(v, value.at(k)) for k, v in value.items()})
        out.line, out.lines = value.line, value.lines
        return out
    if isinstance(value, list):
        return [_numeric_tree(v, line) for v in value]
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _section(raw, name, line):
    sec = raw.get(name)
    if not isinstance(sec, _Map):
        raise ConfigError(f"section {name!r} must be a mapping", raw.at(name) if name in raw else line)
    sec.line = raw.at(name)  # report section-level problems at the header
    return sec


def _check_keys(sec, allowed, name):
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in section {name!r}; allowed: {sorted(allowed)}", sec.at(key))


def _build(fn, sec, name):
    try:
        return fn(dict(sec))
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"section {name!r}: missing key {exc.args[0]!r}", sec.line) from None
    except (TypeError, ValueError) as exc:
        bad = re.search(r"unexpected keyword argument '(\w+)'", str(exc))
        if bad:
            raise ConfigError(f"section {name!r}: unknown key {bad.group(1)!r}", sec.at(bad.group(1))) from None
        raise ConfigError(f"section {name!r}: {exc}", sec.line) from None


def _target(sec):
    if "kind" not in sec:
        raise ConfigError("section 'target': missing key 'kind'", sec.line)
    kinds = {m.value: m for m in RuinSet}
    if sec["kind"] in kinds:
        _check_keys(sec, {"kind"}, "target")
        return kinds[sec["kind"]]
    return _build(rare_set_from_dict, sec, "target")


@dataclass(frozen=True)
class RunSettings:
    n: int = 100_000
    seed: int = 0
    method: str = "crude"
    chunk_size: int = DEFAULT_CHUNK
    level: float | None = None
    scale: float = 1.0
    kappa: float = KAPPA
    defensive: float = DEFENSIVE
    renewal_t_max: float | None = None
    renewal_t: tuple = ()
    classcheck: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LoadedConfig:
    scenario: Scenario
    settings: RunSettings
    resolved: dict

    @property
    def classcheck_tail(self):
        spec = self.settings.classcheck.get("tail")
        if spec is None:
            return self.scenario.tail_functional()
        return marginal_from_dict(spec)


def parse_config(text: str, *, seed=None) -> LoadedConfig:
    try:
        raw = yaml.load(text, Loader=_Loader)
    except ConfigError:
        raise
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None) from None
    if not isinstance(raw, _Map):
        raise ConfigError("top level must be a mapping of sections", 1)
    raw = _numeric_tree(raw, 1)
    for key in raw:
        if key not in SECTIONS:
            raise ConfigError(f"unknown section {key!r}; expected {list(SECTIONS)}", raw.at(key))
    for name in REQUIRED:
        if name not in raw:
            raise ConfigError(f"missing section {name!r}", 1)

    claims_sec = _section(raw, "claims", 1)
    claims = _build(model_from_dict, claims_sec, "claims")
    arr_sec = _section(raw, "arrivals", 1)
    if "kind" not in arr_sec:
        raise ConfigError("section 'arrivals': missing key 'kind'", arr_sec.line)
    arrivals = _build(interarrival_from_dict, arr_sec, "arrivals")
    target = _target(_section(raw, "target", 1))

    run = _section(raw, "run", 1)
    _check_keys(run, RUN_KEYS, "run")

    def get(key, **kw):
        value = run.get(key, RUN_KEYS[key])
        return None if value is None else _num(value, key, run.at(key), **kw)

    horizons = _num_list(run.get("horizons"), "horizons", run.at("horizons"))
    if not horizons:
        raise ConfigError("run.horizons must list at least one horizon", run.at("horizons"))
    xs = _num_list(run.get("x"), "x", run.at("x")) or []
    level = get("level")
    if not xs and level is None:
        raise ConfigError("run needs x values or a level", run.line)
    method = run.get("method", "crude")
    if method not in ("crude", "importance"):
        raise ConfigError(f"run.method must be 'crude' or 'importance', got {method!r}", run.at("method"))
    seed_value = get("seed", integer=True) if seed is None else int(seed)
    try:
        scn = Scenario(
            claims=claims, arrivals=arrivals, target=target, r=get("r"),
            premiums=tuple(_num_list(run.get("premiums"), "premiums", run.at("premiums")) or ()),
            premium_bounds=tuple(_num_list(run.get("premium_bounds"), "premium_bounds", run.at("premium_bounds")) or ()),
            weights=tuple(_num_list(run.get("capital_weights"), "capital_weights", run.at("capital_weights")) or ()),
            horizons=tuple(horizons), x_values=tuple(xs), tail_mode=run.get("tail_mode", "exact_quadrature"),
        )
        scn.tail_functional()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section 'run': {exc}", run.line) from None

    ren = raw.get("renewal") or _Map()
    if ren:
        ren = _section(raw, "renewal", 1)
        _check_keys(ren, RENEWAL_KEYS, "renewal")
    cc = raw.get("classcheck") or _Map()
    if cc:
        cc = _section(raw, "classcheck", 1)
        _check_keys(cc, CLASSCHECK_KEYS, "classcheck")
        if cc.get("tail") is not None:
            _build(marginal_from_dict, cc["tail"] if isinstance(cc["tail"], _Map) else _Map(), "classcheck.tail")
    cc_resolved = {k: cc.get(k, v) for k, v in CLASSCHECK_KEYS.items()}
    for key in ("x", "v_grid"):
        cc_resolved[key] = _num_list(cc_resolved[key], key, cc.at(key) if cc else None)
    for key in ("a", "v"):
        cc_resolved[key] = _num(cc_resolved[key], key, cc.at(key) if cc else None)
    if cc_resolved["tail"] is not None:
        cc_resolved["tail"] = dict(cc_resolved["tail"])

    n = get("n", integer=True)
    if n < 1000:
        raise ConfigError("run.n must be at least 1000", run.at("n"))
    settings = RunSettings(
        n=n, seed=seed_value, method=method, chunk_size=get("chunk_size", integer=True),
        level=level, scale=get("scale"), kappa=get("kappa"), defensive=get("defensive"),
        renewal_t_max=_num(ren["t_max"], "t_max", ren.at("t_max")) if ren.get("t_max") is not None else None,
        renewal_t=tuple(_num_list(ren.get("t"), "t", ren.at("t")) or ()),
        classcheck=cc_resolved,
    )
    if settings.chunk_size < 1:
        raise ConfigError("run.chunk_size must be positive", run.at("chunk_size"))
    return LoadedConfig(scn, settings, _resolve(scn, settings))


def load_config(path, *, seed=None) -> LoadedConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, seed=seed)


def _target_dict(target):
    return {"kind": target.value} if isinstance(target, RuinSet) else target.to_dict()


def _resolve(scn: Scenario, s: RunSettings) -> dict:
    run = {
        "r": scn.r, "premiums": list(scn.premiums), "premium_bounds": list(scn.premium_bounds),
        "capital_weights": list(scn.weights), "horizons": list(scn.horizons), "x": list(scn.x_values),
        "level": s.level, "scale": s.scale, "n": s.n, "seed": s.seed, "method": s.method,
        "chunk_size": s.chunk_size, "tail_mode": scn.tail_mode, "kappa": s.kappa, "defensive": s.defensive,
    }
    out = {
        "claims": scn.claims.to_dict(),
        "arrivals": scn.arrivals.to_dict(),
        "target": _target_dict(scn.target),
        "run": run,
        "classcheck": dict(s.classcheck),
    }
    if s.renewal_t_max is not None or s.renewal_t:
        out["renewal"] = {"t_max": s.renewal_t_max, "t": list(s.renewal_t)}
    return out


def _represent_float(dumper, value):
    if math.isinf(value):
        return dumper.represent_scalar("tag:yaml.org,2002:float", ".inf" if value > 0 else "-.inf")
    return dumper.represent_scalar("tag:yaml.org,2002:float", repr(value))


class _Dumper(yaml.SafeDumper):
    pass


_Dumper.add_representer(float, _represent_float)


def resolved_yaml(cfg: LoadedConfig) -> str:
    return yaml.dump(cfg.resolved, Dumper=_Dumper, sort_keys=False, default_flow_style=None)
