"""Scenario configuration: flat ``key = value`` files with ``[section]`` headers.

Every key lives in a section and is addressed as ``section.key`` on the
command line (``--set params.eps=2e-3``). Unknown sections or keys are
errors reported with their line number.
"""
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .coefficients import (ConstantField, ConstantProfile, DiagonalField, LayeredField,
                           SinProfile, TabulatedField, constant, sin1d)
from .errors import ConfigError, InvalidArgument

MODES = ("eps", "stefan", "compare", "sweep", "cell")


def _float_list(text):
    return [float(s) for s in text.replace(",", " ").split()]


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_float(text):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


# section -> key -> (converter, default)
SCHEMA = {
    "mesh": {
        "dim": (int, 1),
        "n": (int, 4096),
    },
    "coefficients": {
        "A": (str, "constant(2)"),
        "B": (str, "constant(2)"),
    },
    "params": {
        "eps": (float, 1e-3),
        "delta": (_optional_float, None),
        "alpha": (float, 1.1),
        "lam": (float, 1.0),
        "r": (float, 0.0),
        "tau": (float, 1e-3),
        "t_end": (float, 0.6),
        "mass_lumping": (_bool, True),
        "cg_tol": (float, 1e-10),
        "preconditioner": (str, "factorized"),
        "w_update": (str, "updated"),
    },
    "run": {
        "mode": (str, "eps"),
        "init": (str, "step-1d(0.5)"),
        "record_interval": (float, 0.1),
        "output": (str, "output"),
        "eps_list": (_float_list, None),
        "write_snapshots": (_bool, True),
    },
    "cell": {
        "n": (int, 128),
        "n_quad": (int, 1024),
    },
    "stefan": {
        "sigma_reg": (float, 1e-3),
    },
}


@dataclass
class ScenarioConfig:
    """Parsed scenario; ``values[section][key]`` holds converted values."""

    values: dict
    source: str = "<defaults>"
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, dotted):
        sec, key = dotted.split(".", 1)
        return self.values[sec][key]

    @property
    def mode(self):
        return self.values["run"]["mode"]

    @property
    def dim(self):
        return self.values["mesh"]["dim"]

    def sim_params_kwargs(self):
        return dict(self.values["params"])

    def copy(self):
        return ScenarioConfig({s: dict(v) for s, v in self.values.items()},
                              self.source, self.base_dir)

    def set(self, dotted, raw, lineno=None):
        _assign(self.values, dotted, raw, lineno)


def _defaults():
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


def _assign(values, dotted, raw, lineno=None):
    if "." not in dotted:
        raise ConfigError(f"key {dotted!r} must be written as section.key", lineno)
    sec, key = dotted.split(".", 1)
    if sec not in SCHEMA:
        raise ConfigError(f"unknown section [{sec}]", lineno)
    if key not in SCHEMA[sec]:
        raise ConfigError(f"unknown key {key!r} in [{sec}]", lineno)
    conv = SCHEMA[sec][key][0]
    try:
        values[sec][key] = conv(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {dotted}: {exc}", lineno) from None


def parse_config(text, source="<string>", base_dir=None):
    values = _defaults()
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, raw = line.split("=", 1)
        _assign(values, f"{section}.{key.strip()}", raw, lineno)
    cfg = ScenarioConfig(values, source, Path(base_dir) if base_dir else Path.cwd())
    validate(cfg)
    return cfg


def bundled_names():
    root = resources.files("comphomog") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_config(name_or_path, overrides=()):
    """Read a config file, or a bundled config by name, then apply overrides."""
    path = Path(name_or_path)
    if path.is_file():
        text, base = path.read_text(encoding="utf-8"), path.parent
    else:
        res = resources.files("comphomog") / "configs" / f"{name_or_path}.cfg"
        if not res.is_file():
            raise ConfigError(
                f"no config file or bundled config named {name_or_path!r} "
                f"(bundled: {', '.join(bundled_names())})"
            )
        text, base = res.read_text(encoding="utf-8"), Path.cwd()
    cfg = parse_config(text, str(name_or_path), base)
    apply_overrides(cfg, overrides)
    return cfg


def apply_overrides(cfg, overrides):
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        cfg.set(key.strip(), raw)
    validate(cfg)
    return cfg


def validate(cfg):
    v = cfg.values
    if v["mesh"]["dim"] not in (1, 2):
        raise ConfigError(f"mesh.dim must be 1 or 2, got {v['mesh']['dim']}")
    if v["mesh"]["n"] < 2:
        raise ConfigError(f"mesh.n must be >= 2, got {v['mesh']['n']}")
    if v["run"]["mode"] not in MODES:
        raise ConfigError(f"run.mode must be one of {MODES}, got {v['run']['mode']!r}")
    eps_list = v["run"]["eps_list"]
    if eps_list is not None:
        if not eps_list:
            raise ConfigError("run.eps_list is empty")
        if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
            raise ConfigError("run.eps_list must be strictly descending")


# --- coefficient expressions ------------------------------------------------

_TOKEN = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(.))")


def _tokenize(text):
    out = []
    for name, num, other in _TOKEN.findall(text):
        if name:
            out.append(("name", name))
        elif num:
            out.append(("num", float(num)))
        elif other.strip():
            out.append(("sym", other))
    return out


def _parse_expr(tokens, pos, raw):
    """expr := number | name | name '(' [expr {',' expr}] ')'"""
    if pos >= len(tokens):
        raise InvalidArgument(f"unexpected end of coefficient {raw!r}")
    kind, val = tokens[pos]
    if kind == "num":
        return val, pos + 1
    if kind != "name":
        raise InvalidArgument(f"unexpected {val!r} in coefficient {raw!r}")
    pos += 1
    if pos < len(tokens) and tokens[pos] == ("sym", "("):
        args, pos = [], pos + 1
        if tokens[pos:pos + 1] == [("sym", ")")]:
            return (val, args), pos + 1
        while True:
            arg, pos = _parse_expr(tokens, pos, raw)
            args.append(arg)
            if pos >= len(tokens):
                raise InvalidArgument(f"missing ')' in coefficient {raw!r}")
            if tokens[pos] == ("sym", ","):
                pos += 1
            elif tokens[pos] == ("sym", ")"):
                return (val, args), pos + 1
            else:
                raise InvalidArgument(f"unexpected {tokens[pos][1]!r} in coefficient {raw!r}")
    return (val, []), pos


def _profile(node, raw):
    if isinstance(node, float):
        return ConstantProfile(node)
    name, args = node
    if name in ("sin", "sin1d") and len(args) == 2 and all(isinstance(a, float) for a in args):
        return SinProfile(*args)
    if name in ("const", "constant") and len(args) == 1:
        return ConstantProfile(args[0])
    raise InvalidArgument(f"bad profile {name}{tuple(args)} in {raw!r}")


def parse_coefficient(text, dim, base_dir=None):
    """Build a :class:`CoefficientField` from its textual description.

    ``constant(c)``, ``sin1d(mean, amp)``, ``diag(p1[, p2])``,
    ``layered(p11, p12, p21, p22)``, ``matrix(a11, a12, a21, a22)`` and
    ``tabulated(path)``; profiles are numbers or ``sin(mean, amp)``.
    """
    raw = text.strip()
    tab = re.fullmatch(r"tabulated\((.+)\)", raw)
    if tab:
        path = Path(tab.group(1).strip().strip("'\""))
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        if not path.is_file():
            raise InvalidArgument(f"tabulated coefficient file {path} does not exist")
        field_ = TabulatedField.from_file(path)
        if field_.dim != dim:
            raise InvalidArgument(f"{path} holds a {field_.dim}D field, mesh is {dim}D")
        return field_
    tokens = _tokenize(raw)
    node, pos = _parse_expr(tokens, 0, raw)
    if pos != len(tokens):
        raise InvalidArgument(f"trailing input in coefficient {raw!r}")
    if isinstance(node, float):
        return constant(node, dim)
    name, args = node
    if name == "constant" and len(args) == 1:
        return constant(args[0], dim)
    if name == "sin1d" and len(args) == 2:
        return sin1d(args[0], args[1], dim)
    if name == "diag" and len(args) == dim:
        return DiagonalField([_profile(a, raw) for a in args])
    if name == "layered" and len(args) == 4 and dim == 2:
        return LayeredField(*(_profile(a, raw) for a in args))
    if name == "matrix" and len(args) == dim * dim:
        return ConstantField(np.reshape(args, (dim, dim)))
    raise InvalidArgument(f"cannot build a {dim}D coefficient from {raw!r}")
