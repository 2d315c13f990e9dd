"""File formats: pattern JSON, rule configs, cocycle specs, CSV dumps, SVG.

All emitters are deterministic (sorted keys, fixed float formatting, no
timestamps) so reports are byte-identical across runs with equal inputs.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .apcomplex import ApGraph, Cochain1, CollaredTileClass
from .exactnum import ExactScalar, ExactVector, format_scalar, parse_scalar, vec1, vec2
from .generators import BUILTIN_RULES, RuleError, SubstitutionRule
from .patterns import PatternSample, Window


class ConfigError(ValueError):
    """Malformed configuration or data file."""


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_canonical(obj))


# -- patterns -----------------------------------------------------------------


def pattern_to_dict(sample: PatternSample) -> dict:
    pts = []
    for p in sample.points:
        if sample.dim == 1:
            pts.append(format_scalar(p.coords[0]))
        else:
            pts.append([format_scalar(c) for c in p.coords])
    return {
        "d": sample.d,
        "dim": sample.dim,
        "window": [
            [format_scalar(a), format_scalar(b)]
            for a, b in zip(sample.window.lo, sample.window.hi)
        ],
        "points": pts,
        "labels": list(sample.labels) if sample.labels is not None else None,
    }


def pattern_from_dict(data: dict) -> PatternSample:
    try:
        d = int(data["d"])
        dim = int(data["dim"])
        window = Window(
            tuple(parse_scalar(w[0], d) for w in data["window"]),
            tuple(parse_scalar(w[1], d) for w in data["window"]),
        )
        pts = []
        for entry in data["points"]:
            if dim == 1:
                pts.append(vec1(parse_scalar(entry, d)))
            else:
                pts.append(vec2(*(parse_scalar(c, d) for c in entry)))
        labels = data.get("labels")
        return PatternSample(pts, window, labels)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad pattern file: {exc}") from exc


def write_pattern(path, sample: PatternSample) -> None:
    write_json(path, pattern_to_dict(sample))


def read_pattern(path) -> PatternSample:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read pattern file {path}: {exc}") from exc
    return pattern_from_dict(data)


# -- substitution rules --------------------------------------------------------


def rule_from_dict(data: dict) -> SubstitutionRule:
    try:
        if "builtin" in data:
            name = data["builtin"]
            if name not in BUILTIN_RULES:
                raise ConfigError(f"unknown builtin rule {name!r}")
            return BUILTIN_RULES[name]()
        alphabet = tuple(data["alphabet"])
        images = dict(data["images"])
        d = data.get("d")
        lengths = data.get("lengths")
        if lengths is None:
            return SubstitutionRule.with_natural_lengths(alphabet, images, d)
        if d is None:
            raise ConfigError("explicit lengths require the field tag d")
        parsed = {ch: parse_scalar(text, int(d)) for ch, text in lengths.items()}
        return SubstitutionRule(alphabet, images, parsed, int(d))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, RuleError) as exc:
        raise ConfigError(f"bad rule config: {exc}") from exc


def read_rule(spec: str) -> SubstitutionRule:
    """A builtin name ('fibonacci') or a path to a rule JSON file."""
    if spec in BUILTIN_RULES:
        return BUILTIN_RULES[spec]()
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"rule {spec!r} is neither builtin nor a file")
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse rule file {spec}: {exc}") from exc
    return rule_from_dict(data)


def rule_to_dict(rule: SubstitutionRule) -> dict:
    return {
        "alphabet": list(rule.alphabet),
        "images": dict(rule.images),
        "d": rule.d,
        "lengths": {ch: format_scalar(rule.lengths[ch]) for ch in rule.alphabet},
    }


# -- cocycle specs ---------------------------------------------------------------


def cochain_from_spec(graph: ApGraph, data: dict, rng=None) -> Cochain1:
    """Cocycle spec: {"cocycle": {class-or-letter: scalar-string}} or
    {"random": {"max_rel": x, "denom": n}} (needs a seeded rng)."""
    d = graph.sample.d
    if "random" in data:
        if rng is None:
            raise ConfigError("random cocycle spec requires a seed")
        from .deform import perturbed_length_cocycle

        cfg = data["random"]
        return perturbed_length_cocycle(
            graph, rng, float(cfg["max_rel"]), int(cfg.get("denom", 10**6))
        )
    try:
        table = data["cocycle"]
    except KeyError as exc:
        raise ConfigError("cocycle spec needs 'cocycle' or 'random'") from exc
    values = []
    for c in graph.edges:
        text = None
        if c.text() in table:
            text = table[c.text()]
        elif c.letter in table:
            text = table[c.letter]
        if text is None:
            raise ConfigError(f"no cocycle value for class {c.text()!r}")
        values.append(vec1(parse_scalar(str(text), d)))
    return Cochain1(graph, tuple(values))


def read_cocycle_spec(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read cocycle spec {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("cocycle spec must be a JSON object")
    return data


# -- graph / cochain dumps ----------------------------------------------------------


def graph_to_dict(graph: ApGraph) -> dict:
    return {
        "level": graph.level,
        "vertices": graph.n_vertices,
        "edges": [
            {
                "class": c.text(),
                "source": s,
                "target": t,
                "length": format_scalar(length),
            }
            for c, s, t, length in zip(
                graph.edges, graph.edge_source, graph.edge_target, graph.edge_lengths
            )
        ],
    }


def cochain_csv(cochain: Cochain1) -> str:
    lines = ["class,value"]
    for c, v in zip(cochain.graph.edges, cochain.values):
        lines.append(f"{c.text()},{format_scalar(v.coords[0])}")
    return "\n".join(lines) + "\n"


def site_function_csv(f) -> str:
    lines = ["point,value"]
    for p in sorted(f.domain(), key=lambda p: p.floats()):
        coord = format_scalar(p.coords[0]) if p.dim == 1 else ";".join(
            format_scalar(c) for c in p.coords
        )
        val = ";".join(format_scalar(c) for c in f(p).coords)
        lines.append(f"{coord},{val}")
    return "\n".join(lines) + "\n"


def field_csv(field) -> str:
    lines = ["x,value"]
    xs = field.grid_floats()
    for i in range(field.size):
        vals = ";".join(f"{v:.12g}" for v in field.values[i])
        lines.append(f"{xs[i]:.12g},{vals}")
    return "\n".join(lines) + "\n"


def profile_csv(profile: list[tuple[float, float]]) -> str:
    """Decay profile rows (r, sup |value|, ratio to previous sup)."""
    lines = ["r,sup_value,ratio"]
    prev = None
    for r, v in profile:
        ratio = "" if prev in (None, 0.0) else f"{v / prev:.9g}"
        lines.append(f"{r:.9g},{v:.9g},{ratio}")
        prev = v
    return "\n".join(lines) + "\n"


# -- SVG ---------------------------------------------------------------------------


def svg_point_rows(rows, path=None, width: int = 900, row_height: int = 48) -> str:
    """Rows of 1D point sets as a strip plot: [(label, [x floats]), ...]."""
    all_x = [x for _, xs in rows for x in xs]
    if not all_x:
        raise ValueError("nothing to plot")
    lo, hi = min(all_x), max(all_x)
    span = (hi - lo) or 1.0
    pad = 12
    height = row_height * len(rows) + pad
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    ]
    for i, (label, xs) in enumerate(rows):
        y = pad + row_height * i + row_height // 2
        parts.append(
            f'<text x="4" y="{y - 14}" font-size="11" '
            f'font-family="monospace">{label}</text>'
        )
        parts.append(
            f'<line x1="{pad}" y1="{y}" x2="{width - pad}" y2="{y}" '
            f'stroke="#ccc" stroke-width="1"/>'
        )
        for x in xs:
            cx = pad + (x - lo) / span * (width - 2 * pad)
            parts.append(f'<circle cx="{cx:.2f}" cy="{y}" r="2.2" fill="#1a4f8a"/>')
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def svg_points_2d(points, path=None, width: int = 600) -> str:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    lo_x, hi_x = min(xs), max(xs)
    lo_y, hi_y = min(ys), max(ys)
    span_x = (hi_x - lo_x) or 1.0
    span_y = (hi_y - lo_y) or 1.0
    pad = 12
    height = int(width * span_y / span_x) + 2 * pad if span_x else width
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    ]
    for x, y in points:
        cx = pad + (x - lo_x) / span_x * (width - 2 * pad)
        cy = pad + (hi_y - y) / span_y * (height - 2 * pad)
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2" fill="#1a4f8a"/>')
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def sample_svg(sample: PatternSample, path=None) -> str:
    if sample.dim == 1:
        xs = [float(p.coords[0]) for p in sample.points]
        return svg_point_rows([("pattern", xs)], path)
    return svg_points_2d([p.floats() for p in sample.points], path)
