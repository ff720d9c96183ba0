"""Experiment configuration: an INI-style ``key = value`` file.

::

    [pool]
    path = standard.pool

    [run]
    n = 1500
    seeds = 20

    [grid]
    c = 0.05, 0.5, 1, 2, 50

Unknown sections or keys, unparsable values and missing required keys are
rejected with the key named.  ``metadata_header`` writes the full config,
defaults included, as a ``#`` comment block that ``parse_metadata`` reads back.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

__version__ = "0.1.0"
TOOL = "artifact"

REQUIRED = ("run.n", "run.seeds")


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _opt_str(text: str):
    return text.strip() or None


# (section, key) -> (attribute, parser, formatter)
_SCHEMA = {
    ("pool", "path"): ("pool_path", _opt_str, lambda v: v or ""),
    ("run", "n"): ("n", int, str),
    ("run", "seeds"): ("seeds", int, str),
    ("run", "base_seed"): ("base_seed", int, str),
    ("run", "workers"): ("workers", int, str),
    ("run", "replacement"): ("replacement", _bool, lambda v: str(v).lower()),
    ("run", "record_runtime"): ("record_runtime", _bool, lambda v: str(v).lower()),
    ("run", "method"): ("method", str, str),
    ("grid", "c"): ("c_grid", _floats, lambda v: ", ".join(repr(x) for x in v)),
    ("tolerances", "eps_feas"): ("eps_feas", float, repr),
    ("tolerances", "tol"): ("tol", float, repr),
    ("tolerances", "c_max"): ("c_max", float, repr),
    ("params", "c1"): ("c1", float, repr),
    ("params", "c2"): ("c2", float, repr),
    ("params", "c"): ("c", float, repr),
    ("params", "n_list"): ("n_list", _ints, lambda v: ", ".join(str(x) for x in v)),
    ("params", "d"): ("d", int, str),
    ("params", "samples"): ("samples", int, str),
    ("params", "b"): ("b", int, str),
}


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    seeds: int
    pool_path: Optional[str] = None
    base_seed: int = 0
    workers: int = 1
    replacement: bool = True
    record_runtime: bool = False
    method: str = "highs"
    c_grid: tuple = ()
    eps_feas: float = 0.01
    tol: float = 0.01
    c_max: float = 50.0
    c1: float = 0.5
    c2: float = 1.0
    c: float = 1.0
    n_list: tuple = ()
    d: int = 1
    samples: int = 1000
    b: int = 1

    def __post_init__(self):
        for name, bad in (("run.n", self.n < 1), ("run.seeds", self.seeds < 1),
                          ("run.workers", self.workers < 1), ("params.d", self.d < 1),
                          ("params.b", self.b < 1), ("tolerances.eps_feas", self.eps_feas <= 0),
                          ("tolerances.tol", self.tol <= 0)):
            if bad:
                raise ConfigError(f"{name}: value out of range")
        if self.method not in ("highs", "simplex"):
            raise ConfigError(f"run.method: unknown solver {self.method!r}")

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def to_text(self) -> str:
        out, section = [], None
        for (sec, key), (attr, _, fmt) in _SCHEMA.items():
            if sec != section:
                if section is not None:
                    out.append("")
                out.append(f"[{sec}]")
                section = sec
            out.append(f"{key} = {fmt(getattr(self, attr))}".rstrip())
        return "\n".join(out) + "\n"

    def require_pool(self) -> str:
        if not self.pool_path:
            raise ConfigError("missing required key: pool.path")
        return self.pool_path


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    sections = {s for s, _ in _SCHEMA}
    values = {}
    for sec in cp.sections():
        if sec not in sections:
            raise ConfigError(f"unknown section: [{sec}]")
        for key, raw in cp.items(sec):
            if (sec, key) not in _SCHEMA:
                raise ConfigError(f"unknown key: {sec}.{key}")
            attr, parse, _ = _SCHEMA[(sec, key)]
            try:
                values[attr] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"{sec}.{key}: type mismatch ({raw!r})") from exc
    missing = [k for k in REQUIRED if _SCHEMA[tuple(k.split("."))][0] not in values]
    if missing:
        raise ConfigError("missing required key(s): " + ", ".join(missing))
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())


def metadata_header(cfg: Optional[ExperimentConfig] = None, **extra) -> str:
    """``#`` comment block: tool version, every config value, then extras."""
    lines = [f"{TOOL} {__version__}"]
    for k, v in extra.items():
        lines.append(f"@{k}: {v}")
    if cfg is not None:
        lines.extend(cfg.to_text().splitlines())
    return "".join(f"# {ln}\n" if ln else "#\n" for ln in lines)


def parse_metadata(text: str) -> ExperimentConfig:
    """Recover the config from the leading comment block of an output file."""
    body = []
    for ln in text.splitlines():
        if not ln.startswith("#"):
            break
        ln = ln[1:].removeprefix(" ")
        if ln.startswith(TOOL + " ") or ln.startswith("@"):
            continue
        body.append(ln)
    return parse_config("\n".join(body))


def config_fields() -> list:
    return [f.name for f in fields(ExperimentConfig)]
