"""Scenario files: ``dotted.key = value`` lines with ``#`` comments.

Values are numbers, ``true``/``false``, quoted or bare strings, or
``[a, b, ...]`` lists of those. A ``preset = "name"`` line starts from a
shipped preset; without it every link key must be given explicitly.
"""

import dataclasses
import math
import os
import re
from dataclasses import dataclass, field
from importlib import resources

from .channel import LinkConfig, flat_keys, set_flat
from .errors import ConfigError
from .waveform import PulseSpec

PRESETS = ("paper-3g",)
ANALYSES = ("eye", "mask", "ber", "latency")
SOURCES = ("prbs15", "prbs7")

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$")
_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _strip_comment(text):
    quote = None
    for i, ch in enumerate(text):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            return text[:i]
    return text


def _scalar(tok, line):
    tok = tok.strip()
    if not tok:
        raise ConfigError("empty value", line=line)
    if tok[0] in "\"'":
        if len(tok) < 2 or tok[-1] != tok[0]:
            raise ConfigError(f"unterminated string {tok!r}", line=line)
        return tok[1:-1]
    low = tok.lower()
    if low in ("true", "false"):
        return low == "true"
    if _NUMBER.match(tok):
        if re.fullmatch(r"[+-]?\d+", tok):
            return int(tok)
        return float(tok)
    return tok


def parse_value(text, line=None):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError("unterminated list", line=line)
        body = text[1:-1].strip()
        return [_scalar(t, line) for t in body.split(",")] if body else []
    return _scalar(text, line)


def parse_text(text):
    """Parse config text into ``{key: (value, line_number)}``."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        body = _strip_comment(raw).strip()
        if not body:
            continue
        key, eq, value = body.partition("=")
        key = key.strip()
        if not eq:
            raise ConfigError(f"expected 'key = value', got {body!r}", line=n)
        if not _KEY.match(key):
            raise ConfigError(f"malformed key {key!r}", key=key, line=n)
        if key in out:
            raise ConfigError(f"duplicate key {key!r} (first on line {out[key][1]})",
                              key=key, line=n)
        out[key] = (parse_value(value, n), n)
    return out


def preset_text(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}",
                          key="preset")
    return resources.files("owlink.presets").joinpath(f"{name}.cfg").read_text()


def _coerce(key, value, default, line):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false", key=key, line=line)
        return value
    if key == "ceq.slicer_threshold_v":
        if value == "auto":
            return value
        default = 0.0
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer", key=key, line=line)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number", key=key, line=line)
        if not math.isfinite(value):
            raise ConfigError(f"{key} must be finite", key=key, line=line)
        return float(value)
    return value


@dataclass
class Scenario:
    name: str = "scenario"
    link: LinkConfig = field(default_factory=LinkConfig)
    pulse: PulseSpec = None
    source: str = "prbs15"
    n_bits: int = 100_000
    bit_rate: float = 2.97e9
    analyses: tuple = ANALYSES
    output_dir: str = "out"
    write_waveforms: bool = False
    max_lag_s: float = 50e-9

    @property
    def seed(self):
        return self.link.seed

    def __post_init__(self):
        if self.pulse is None:
            self.pulse = PulseSpec.nominal(self.bit_rate)


SCENARIO_KEYS = {
    "scenario.name": "scenario",
    "scenario.source": "prbs15",
    "scenario.n_bits": 100_000,
    "scenario.bit_rate": 2.97e9,
    "scenario.analyses": list(ANALYSES),
    "scenario.output_dir": "out",
    "scenario.write_waveforms": False,
    "scenario.max_lag_s": 50e-9,
}

PULSE_KEYS = ("pulse.vpp", "pulse.dc_offset", "pulse.t_rise", "pulse.t_fall",
              "pulse.overshoot_frac")


def all_keys():
    """Every accepted key with its default value."""
    keys = dict(flat_keys())
    keys.update(SCENARIO_KEYS)
    nominal = PulseSpec.nominal(2.97e9)
    for k in PULSE_KEYS:
        keys[k] = getattr(nominal, k.split(".", 1)[1])
    return keys


def build_scenario(entries, overrides=None, env=None):
    """Scenario from parsed ``entries`` (see :func:`parse_text`).

    ``overrides`` maps dotted keys to values and wins over the file;
    ``OWL_SEED`` in ``env`` wins over both for ``seed``.
    """
    entries = dict(entries)
    for key, value in (overrides or {}).items():
        entries[key] = (value, None)
    env = os.environ if env is None else env
    if env.get("OWL_SEED"):
        try:
            entries["seed"] = (int(env["OWL_SEED"]), None)
        except ValueError:
            raise ConfigError("OWL_SEED must be an integer", key="seed") from None

    known = all_keys()
    link_keys = flat_keys()
    preset = entries.pop("preset", (None, None))
    if preset[0] is not None:
        base = parse_text(preset_text(str(preset[0])))
        for key, item in base.items():
            entries.setdefault(key, item)
    for key, (_, line) in entries.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", key=key, line=line)
    missing = [k for k in link_keys if k not in entries]
    if missing:
        raise ConfigError(f"missing required key {missing[0]!r}"
                          + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""),
                          key=missing[0])

    link = LinkConfig()
    for key, default in link_keys.items():
        value, line = entries[key]
        set_flat(link, key, _coerce(key, value, default, line))

    values = {}
    for key, default in SCENARIO_KEYS.items():
        value, line = entries.get(key, (default, None))
        if key == "scenario.analyses":
            value = [value] if isinstance(value, str) else value
            if not isinstance(value, list) or any(a not in ANALYSES for a in value):
                raise ConfigError(f"{key} must be a list drawn from {ANALYSES}", key=key, line=line)
            value = tuple(a for a in ANALYSES if a in value)
        elif key in ("scenario.name", "scenario.source", "scenario.output_dir"):
            value = str(value)
        else:
            value = _coerce(key, value, default, line)
        values[key.split(".", 1)[1]] = value
    if values["n_bits"] < 1 or values["bit_rate"] <= 0:
        raise ConfigError("scenario.n_bits and scenario.bit_rate must be positive")
    if "eye" in values["analyses"] and values["n_bits"] < 10_000:
        raise ConfigError("eye analysis needs scenario.n_bits >= 10000", key="scenario.n_bits")

    pulse = PulseSpec.nominal(values["bit_rate"])
    pulse_kw = {}
    for key in PULSE_KEYS:
        if key in entries:
            value, line = entries[key]
            pulse_kw[key.split(".", 1)[1]] = _coerce(key, value, 0.0, line)
    if pulse_kw:
        pulse = dataclasses.replace(pulse, **pulse_kw)

    try:
        link.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return Scenario(link=link, pulse=pulse, **values)


def load_scenario(path, overrides=None, env=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return build_scenario(parse_text(text), overrides, env)
    except ConfigError as exc:
        exc.path = str(path)
        raise


def load_link_config(path):
    return load_scenario(path, env={}).link


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    return repr(value)


def dump_link_config(cfg):
    """Config text that reloads to ``cfg`` (without needing a preset)."""
    return "".join(f"{k} = {format_value(v)}\n" for k, v in cfg.to_flat().items())
