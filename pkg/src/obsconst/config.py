"""Run configuration: YAML grammar, presets and diagnostics.

Grammar (every key optional; omitted keys take the preset value, or the
default listed here when no preset is named)::

    preset: circle-halfarc          # circle-full | circle-halfarc | sphere-hemisphere | torus-triangles
    manifold:
      kind: circle                  # circle | torus | sphere
      periods: [1.0, 1.0]           # torus only; default (1, 1)
    region:
      topology: interior            # interior | closure
      primitives:                   # default: the whole manifold
        - {type: arc, start: 0, end: pi}
        - {type: triangle, vertices: [[0, 0], [0.5, 0], [0, 0.5]]}
        - {type: rectangle, corners: [x0, y0, x1, y1]}
        - {type: polygon, vertices: [[x, y], ...]}
        - {type: cap, theta: pi/2, axis: [0, 0, 1]}
        - {type: band, theta_min: 0.3, theta_max: 1.2}
    spectral:
      cutoff: 8                     # frequency cutoff; whole eigenspaces are kept
      quadrature: null              # sphere only: [n_theta, n_phi]
    time:
      T: [25, 50, 100]              # at least 3 increasing values
    search:
      preset: default               # default | coarse; other keys override fields
      seed: 0
    output:
      dir: obsconst-report
      cache_dir: null               # null: $OBSCONST_CACHE_DIR, else <dir>/.cache
      formats: [csv, text, plot]

Numbers may be written as expressions in ``pi``, ``sqrt`` and ``+ - * / **``.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from .geometry import (
    CIRCLE,
    CLOSURE,
    INTERIOR,
    SPHERE,
    TORUS,
    GeometryError,
    ManifoldSpec,
    Region,
    full_region,
    primitive_from_dict,
)
from .raytrace import SearchConfig

FORMATS = ("csv", "text", "plot")


class ConfigError(ValueError):
    """Invalid configuration; carries the offending field path and source line when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.message = message
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


PRESETS: dict[str, dict] = {
    "circle-full": {
        "manifold": {"kind": "circle"},
        "region": {"topology": "interior", "primitives": [{"type": "arc", "start": 0.0, "length": "2*pi"}]},
        "spectral": {"cutoff": 8},
        "time": {"T": [25, 50, 100]},
    },
    "circle-halfarc": {
        "manifold": {"kind": "circle"},
        "region": {"topology": "interior", "primitives": [{"type": "arc", "start": 0.0, "end": "pi"}]},
        "spectral": {"cutoff": 8},
        "time": {"T": [25, 50, 100]},
    },
    "sphere-hemisphere": {
        "manifold": {"kind": "sphere"},
        "region": {"topology": "interior", "primitives": [{"type": "cap", "theta": "pi/2"}]},
        "spectral": {"cutoff": "sqrt(72)"},
        "time": {"T": ["2*pi", "4*pi", "8*pi", "16*pi"]},
    },
    "torus-triangles": {
        "manifold": {"kind": "torus", "periods": [1.0, 1.0]},
        "region": {
            "topology": "interior",
            "primitives": [
                {"type": "triangle", "vertices": [[0, 0], [0.5, 0], [0, 0.5]]},
                {"type": "triangle", "vertices": [[1, 0], [1, 0.5], [0.5, 0]]},
                {"type": "triangle", "vertices": [[1, 1], [0.5, 1], [1, 0.5]]},
                {"type": "triangle", "vertices": [[0, 1], [0, 0.5], [0.5, 1]]},
            ],
        },
        "spectral": {"cutoff": "6*pi"},
        "time": {"T": [25, 50, 100]},
        "search": {"preset": "coarse"},
    },
}

_BLOCKS = ("manifold", "region", "spectral", "time", "search", "output")


@dataclass(frozen=True)
class RunConfig:
    manifold: ManifoldSpec = field(default_factory=ManifoldSpec.circle)
    region: Region | None = None
    cutoff: float = 8.0
    quadrature: tuple | None = None
    times: tuple = (25.0, 50.0, 100.0)
    search: SearchConfig = field(default_factory=SearchConfig)
    seed: int = 0
    output_dir: str = "obsconst-report"
    cache_dir: str | None = None
    formats: tuple = FORMATS
    preset: str | None = None

    def __post_init__(self):
        if self.region is None:
            object.__setattr__(self, "region", full_region(self.manifold))

    def to_dict(self) -> dict:
        d = {}
        if self.preset:
            d["preset"] = self.preset
        m = {"kind": self.manifold.kind}
        if self.manifold.kind == TORUS:
            m["periods"] = list(self.manifold.periods)
        d["manifold"] = m
        d["region"] = self.region.to_dict()
        d["spectral"] = {
            "cutoff": self.cutoff,
            "quadrature": list(self.quadrature) if self.quadrature else None,
        }
        d["time"] = {"T": list(self.times)}
        d["search"] = {**asdict(self.search), "seed": self.seed}
        d["output"] = {"dir": self.output_dir, "cache_dir": self.cache_dir, "formats": list(self.formats)}
        return d

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)


# ---------------------------------------------------------------------------
# numeric expressions

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "tau": 2 * math.pi}
_FUNCS = {"sqrt": math.sqrt}


def _eval(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
        return _FUNCS[node.func.id](_eval(node.args[0]))
    raise ValueError("unsupported expression")


def number(value, path: str = "") -> float:
    """Parse a YAML scalar as a float, accepting ``pi``/``sqrt`` expressions."""
    if isinstance(value, bool):
        raise ConfigError("expected a number, got a boolean", path)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(_eval(ast.parse(value.strip(), mode="eval").body))
        except (SyntaxError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot evaluate {value!r}: {exc}", path) from None
    raise ConfigError(f"expected a number, got {type(value).__name__}", path)


def _resolve_numbers(obj, path):
    if isinstance(obj, dict):
        return {k: (v if k in ("type", "topology") else _resolve_numbers(v, f"{path}.{k}")) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_resolve_numbers(v, f"{path}[{i}]") for i, v in enumerate(obj)]
    if isinstance(obj, str):
        return number(obj, path)
    return obj


# ---------------------------------------------------------------------------
# source lines for diagnostics


def _line_index(text: str) -> dict:
    """Map dotted field paths to 1-based source lines."""
    out = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node, path):
        out[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = f"{path}.{k.value}" if path else str(k.value)
                out[key] = k.start_mark.line + 1
                walk(v, key)
                out[key] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, f"{path}[{i}]")

    if root is not None:
        walk(root, "")
    return out


def _locate(lines: dict, path: str | None):
    while path:
        if path in lines:
            return lines[path]
        cut = max(path.rfind("."), path.rfind("["))
        path = path[:cut] if cut > 0 else ""
    return None


# ---------------------------------------------------------------------------
# parsing


def _mapping(obj, path) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError("expected a mapping", path)
    return obj


def _check_keys(block: dict, allowed, path):
    for k in block:
        if k not in allowed:
            raise ConfigError(f"unknown key {k!r}", f"{path}.{k}" if path else str(k))


def _merge(base: dict, over: dict) -> dict:
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in base.items()}
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def from_dict(raw) -> RunConfig:
    raw = _mapping(raw, "")
    _check_keys(raw, ("preset",) + _BLOCKS, "")
    preset = raw.get("preset")
    data = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}", "preset")
        data = PRESETS[preset]
        # a manifold override invalidates the preset's region
        if "manifold" in raw and _mapping(raw["manifold"], "manifold").get("kind", data["manifold"]["kind"]) != data["manifold"]["kind"]:
            data = {k: v for k, v in data.items() if k not in ("region", "spectral")}
    for b in _BLOCKS:
        _mapping(raw.get(b), b)
    data = _merge(data, {k: v for k, v in raw.items() if k in _BLOCKS})

    m = _mapping(data.get("manifold"), "manifold")
    _check_keys(m, ("kind", "periods"), "manifold")
    kind = m.get("kind", CIRCLE)
    if kind not in (CIRCLE, TORUS, SPHERE):
        raise ConfigError(f"unknown manifold kind {kind!r}", "manifold.kind")
    periods = m.get("periods")
    if periods is not None and kind != TORUS:
        raise ConfigError("only the torus takes periods", "manifold.periods")
    try:
        if kind == TORUS:
            per = periods if periods is not None else [1.0, 1.0]
            if not isinstance(per, list) or len(per) != 2:
                raise ConfigError("expected two periods", "manifold.periods")
            manifold = ManifoldSpec(TORUS, tuple(number(p, f"manifold.periods[{i}]") for i, p in enumerate(per)))
        else:
            manifold = ManifoldSpec(kind)
    except GeometryError as exc:
        raise ConfigError(str(exc), "manifold") from None

    r = _mapping(data.get("region"), "region")
    _check_keys(r, ("topology", "primitives"), "region")
    topology = r.get("topology", INTERIOR)
    if topology not in (INTERIOR, CLOSURE):
        raise ConfigError(f"topology must be {INTERIOR} or {CLOSURE}", "region.topology")
    if "primitives" in r:
        prims = r["primitives"]
        if not isinstance(prims, list) or not prims:
            raise ConfigError("expected a nonempty list of primitives", "region.primitives")
        parsed = []
        for i, p in enumerate(prims):
            path = f"region.primitives[{i}]"
            if not isinstance(p, dict) or "type" not in p:
                raise ConfigError("primitive needs a 'type'", path)
            try:
                parsed.append(primitive_from_dict(_resolve_numbers(p, path)))
            except KeyError as exc:
                raise ConfigError(f"missing key {exc.args[0]!r}", path) from None
            except (GeometryError, TypeError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(str(exc), path) from None
        try:
            region = Region(manifold, parsed, topology)
        except GeometryError as exc:
            raise ConfigError(str(exc), "region.primitives") from None
    else:
        region = full_region(manifold, topology)

    s = _mapping(data.get("spectral"), "spectral")
    _check_keys(s, ("cutoff", "quadrature"), "spectral")
    cutoff = number(s.get("cutoff", 8), "spectral.cutoff")
    if cutoff <= 0:
        raise ConfigError("cutoff must be positive", "spectral.cutoff")
    quad = s.get("quadrature")
    if quad is not None:
        if kind != SPHERE:
            raise ConfigError("quadrature order applies to the sphere only", "spectral.quadrature")
        if not isinstance(quad, list) or len(quad) != 2 or not all(isinstance(q, int) and q > 0 for q in quad):
            raise ConfigError("expected [n_theta, n_phi] positive integers", "spectral.quadrature")
        quad = tuple(quad)

    t = _mapping(data.get("time"), "time")
    _check_keys(t, ("T",), "time")
    ts = t.get("T", [25, 50, 100])
    if not isinstance(ts, list):
        raise ConfigError("expected a list of times", "time.T")
    times = tuple(number(v, f"time.T[{i}]") for i, v in enumerate(ts))
    if len(times) < 3:
        raise ConfigError("at least 3 observation times are needed", "time.T")
    if any(v <= 0 for v in times) or any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError("times must be positive and strictly increasing", "time.T")

    sr = dict(_mapping(data.get("search"), "search"))
    names = [f.name for f in fields(SearchConfig)]
    _check_keys(sr, ["preset", "seed"] + names, "search")
    sp = sr.pop("preset", "default")
    if sp not in ("default", "coarse"):
        raise ConfigError("search preset must be default or coarse", "search.preset")
    seed = sr.pop("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer", "search.seed")
    search = SearchConfig.coarse() if sp == "coarse" else SearchConfig()
    for k, v in sr.items():
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            raise ConfigError("expected a positive integer", f"search.{k}")
    search = replace(search, **sr)

    o = _mapping(data.get("output"), "output")
    _check_keys(o, ("dir", "cache_dir", "formats"), "output")
    out_dir = o.get("dir", "obsconst-report")
    cache_dir = o.get("cache_dir")
    if not isinstance(out_dir, str) or (cache_dir is not None and not isinstance(cache_dir, str)):
        raise ConfigError("paths must be strings", "output")
    formats = o.get("formats", list(FORMATS))
    if not isinstance(formats, list) or any(f not in FORMATS for f in formats):
        raise ConfigError(f"formats must be a subset of {list(FORMATS)}", "output.formats")

    return RunConfig(
        manifold=manifold,
        region=region,
        cutoff=cutoff,
        quadrature=quad,
        times=times,
        search=search,
        seed=seed,
        output_dir=out_dir,
        cache_dir=cache_dir,
        formats=tuple(formats),
        preset=preset,
    )


def loads(text: str) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", line=mark.line + 1 if mark else None) from None
    try:
        return from_dict(raw)
    except ConfigError as exc:
        if exc.line is None:
            raise ConfigError(exc.message, exc.field, _locate(_line_index(text), exc.field)) from None
        raise


def load(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def preset(name: str) -> RunConfig:
    return from_dict({"preset": name})


__all__ = ["RunConfig", "ConfigError", "PRESETS", "FORMATS", "from_dict", "loads", "load", "preset", "number"]
