"""Structured text config files.

Grammar: INI-like sections.  `[charge.point]` and `[charge.layer]` may
repeat, one block per charge piece; every other section holds scalar
`key = value` pairs and may appear once.  `#` starts a comment.  The
writer is canonical: charge blocks sorted, floats at 17 significant
digits, so write -> parse round-trips bit-exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .charges import (LAYER_KINDS, ChargeDistribution, PointCharge,
                      RadialLayer, sorted_canonical)
from .errors import ConfigError

CHARGE_SECTIONS = ("charge.point", "charge.layer")


def format_float(v: float) -> str:
    return f"{float(v):.17g}"


def _parse_scalar(raw: str):
    """int if it looks like one, else float, else the bare string."""
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def _parse_value(raw: str):
    raw = raw.strip()
    parts = raw.replace(",", " ").split()
    if len(parts) > 1:
        return tuple(_parse_scalar(p) for p in parts)
    return _parse_scalar(raw)


@dataclass
class ConfigDoc:
    """Parsed config: scalar sections plus an optional charge distribution."""

    sections: dict[str, dict[str, object]] = field(default_factory=dict)
    point_blocks: list[dict[str, object]] = field(default_factory=list)
    layer_blocks: list[dict[str, object]] = field(default_factory=list)

    def charge(self) -> ChargeDistribution:
        if not self.point_blocks and not self.layer_blocks:
            raise ConfigError("config declares no charge blocks")
        points = []
        for blk in self.point_blocks:
            pos = blk.get("position")
            theta = blk.get("theta")
            if pos is None or theta is None:
                raise ConfigError("[charge.point] needs position and theta")
            if not isinstance(pos, tuple) or len(pos) != 3:
                raise ConfigError(f"position must be three reals, got {pos!r}")
            points.append(PointCharge(tuple(float(c) for c in pos), float(theta)))
        layers = []
        for blk in self.layer_blocks:
            kind = blk.get("kind")
            theta = blk.get("theta")
            if kind is None or theta is None:
                raise ConfigError("[charge.layer] needs kind and theta")
            if kind not in LAYER_KINDS:
                raise ConfigError(f"unknown layer kind {kind!r}")
            radius = float(blk.get("radius", 0.0))
            layers.append(RadialLayer(str(kind), radius, float(theta)))
        return ChargeDistribution(points=tuple(points), layers=tuple(layers))

    def has_charge(self) -> bool:
        return bool(self.point_blocks or self.layer_blocks)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigError(f"missing required key {key!r} in [{section}]") from None


def parse_config(text: str) -> ConfigDoc:
    doc = ConfigDoc()
    current: dict[str, object] | None = None
    current_name = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header {raw!r}")
            name = line[1:-1].strip()
            if not name:
                raise ConfigError(f"line {lineno}: empty section name")
            current_name = name
            current = {}
            if name == "charge.point":
                doc.point_blocks.append(current)
            elif name == "charge.layer":
                doc.layer_blocks.append(current)
            else:
                if name in doc.sections:
                    raise ConfigError(f"line {lineno}: duplicate section [{name}]")
                doc.sections[name] = current
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in current:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{current_name}]")
        current[key] = _parse_value(val)
    return doc


def load_config(path) -> ConfigDoc:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return " ".join(_format_value(c) for c in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def emit_charge(mu: ChargeDistribution) -> str:
    """Canonical charge blocks: sorted, 17 significant digits."""
    mu = sorted_canonical(mu)
    out = []
    for p in mu.points:
        out.append("[charge.point]")
        out.append("position = " + " ".join(format_float(c) for c in p.position))
        out.append("theta = " + format_float(p.strength))
        out.append("")
    for l in mu.layers:
        out.append("[charge.layer]")
        out.append(f"kind = {l.kind}")
        out.append("radius = " + format_float(l.radius))
        out.append("theta = " + format_float(l.strength))
        out.append("")
    return "\n".join(out)


def emit_config(doc: ConfigDoc) -> str:
    """Canonical text for a whole document: charge first, sections sorted."""
    parts = []
    if doc.has_charge():
        parts.append(emit_charge(doc.charge()))
    for name in sorted(doc.sections):
        body = doc.sections[name]
        parts.append(f"[{name}]")
        for key in sorted(body):
            parts.append(f"{key} = {_format_value(body[key])}")
        parts.append("")
    return "\n".join(parts)


def charge_descriptor(mu: ChargeDistribution) -> str:
    """Compact one-line geometry descriptor used in report rows."""
    mu = sorted_canonical(mu)
    bits = []
    for p in mu.points:
        x, y, z = p.position
        bits.append(f"pt({format_float(p.strength)}@"
                    f"{format_float(x)},{format_float(y)},{format_float(z)})")
    for l in mu.layers:
        bits.append(f"{l.kind}({format_float(l.strength)},r={format_float(l.radius)})")
    return "+".join(bits)


def doc_from_charge(mu: ChargeDistribution, sections=None) -> ConfigDoc:
    doc = parse_config(emit_charge(mu))
    if sections:
        for name, body in sections.items():
            doc.sections[name] = dict(body)
    return doc
