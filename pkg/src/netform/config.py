"""Run configuration: an INI file (sections, ``key = value``) plus flag overrides.

Lists are comma separated; matrix rows are separated by ``;``. See the
README for the full schema.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .errors import ConfigError
from .motifs import Motif, MotifModel

MODEL_KINDS = ("motifs", "typed", "trade", "table")
_KNOWN_SECTIONS = ("model", "run", "sweep", "transient", "output")
# keys that never change results and are left out of the config hash
_UNHASHED = {("run", "workers"), ("output", "path"), ("output", "series"), ("output", "dir")}


def read_ini(path: str) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"config file {path!r} does not exist")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    raw = {}
    for sec in cp.sections():
        if sec not in _KNOWN_SECTIONS and not sec.startswith("motif."):
            raise ConfigError(f"unknown config section [{sec}]")
        raw[sec] = dict(cp[sec])
    return raw


def parse_list(text: str, cast=float) -> list:
    text = str(text).strip()
    if not text:
        return []
    try:
        return [cast(x.strip()) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def parse_matrix(text: str) -> np.ndarray:
    rows = [parse_list(r) for r in str(text).split(";") if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"ragged or empty matrix {text!r}")
    return np.array(rows, dtype=float)


@dataclass
class RunConfig:
    subcommand: str
    raw: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})

    def get(self, sec: str, key: str, default=None, cast=None):
        val = self.section(sec).get(key, default)
        if val is None or cast is None:
            return val
        try:
            return cast(val)
        except (TypeError, ValueError):
            raise ConfigError(f"[{sec}] {key} = {val!r} is not a valid {cast.__name__}") from None

    def require(self, sec: str, key: str, cast=str):
        if key not in self.section(sec):
            raise ConfigError(f"missing [{sec}] {key}")
        return self.get(sec, key, cast=cast)

    @property
    def kind(self) -> Optional[str]:
        return self.section("model").get("kind")

    def digest(self) -> str:
        """SHA-256 of the result-relevant configuration."""
        canon = {}
        for sec, vals in sorted(self.raw.items()):
            kept = {k: str(v) for k, v in sorted(vals.items()) if (sec, k) not in _UNHASHED}
            if kept:
                canon[sec] = kept
        blob = json.dumps({"subcommand": self.subcommand, "config": canon}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def header(self) -> str:
        return f"# netform {__version__} config={self.digest()}"

    # -- model builders --------------------------------------------------------

    def validate(self) -> "RunConfig":
        if "model" not in self.raw:
            raise ConfigError("a [model] section is required")
        kind = self.kind
        if kind not in MODEL_KINDS:
            raise ConfigError(f"[model] kind must be one of {MODEL_KINDS}, got {kind!r}")
        motif_secs = self.motif_sections()
        if kind in ("trade", "table") and motif_secs:
            raise ConfigError(f"kind={kind} takes no [motif.*] sections")
        if kind == "motifs" and not motif_secs and not self.get("sweep", "chain_lengths"):
            raise ConfigError("kind=motifs needs at least one [motif.<name>] section")
        if kind == "table":
            path = self.require("model", "utilities")
            if not os.path.isfile(path):
                raise ConfigError(f"utility table {path!r} does not exist")
        return self

    def motif_sections(self) -> list[str]:
        return [s for s in self.raw if s.startswith("motif.")]

    def motifs(self) -> tuple[list[Motif], list[float], list[str]]:
        motifs, values, names = [], [], []
        for sec in self.motif_sections():
            name = sec.split(".", 1)[1]
            body = self.require(sec, "edges")
            nodes = self.get(sec, "nodes")
            text = f"nodes={nodes}; edges={body}" if nodes else body
            try:
                motifs.append(Motif.parse(text, name))
            except ValueError as exc:
                raise ConfigError(f"[{sec}]: {exc}") from None
            values.append(self.get(sec, "value", 0.0, float))
            names.append(name)
        return motifs, values, names

    def sigma(self) -> float:
        return self.require("model", "sigma", float)

    def motif_model(self) -> MotifModel:
        motifs, values, _ = self.motifs()
        try:
            return MotifModel(tuple(motifs), tuple(values), self.sigma())
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def typed_model(self):
        from .meanfield import TypedModel

        m = self.section("model")
        weights = parse_list(self.require("model", "weights"))
        L = len(weights)
        c = parse_matrix(m["c"]) if "c" in m else np.zeros((L, L))
        alpha = parse_matrix(m["alpha"]) if "alpha" in m else None
        motif_model = self.motif_model() if self.motif_sections() else None
        try:
            return TypedModel(np.array(weights), motif_model, c=c, sigma=self.sigma(), alpha=alpha,
                              r=self.get("model", "r", 1.0, float))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def trade_model(self):
        from .trade import DEFAULT_SIGMA, TradeModel

        try:
            return TradeModel(
                self.require("model", "L", int),
                self.require("model", "gamma", float),
                self.get("model", "v", 1.0, float),
                self.get("model", "sigma", DEFAULT_SIGMA, float),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def types(self, n: int, L: int) -> list[int]:
        if "types" in self.section("model"):
            t = parse_list(self.section("model")["types"], int)
            if len(t) != n:
                raise ConfigError(f"[model] types has {len(t)} entries for n_nodes={n}")
            return t
        return [i % L for i in range(n)]
