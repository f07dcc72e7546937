"""Scenario file parsing.

A scenario is a JSON object describing one design instance (or sweep).
Parsing is strict: unknown keys, malformed matrices and invalid
distributions all raise ``ScenarioError`` whose message names the offending
field path, e.g. ``leakage[1]: row has 3 entries, expected 2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import Chi2MechError, ScenarioError, ValidationError
from .probability import ChannelMatrix, ProbVector

KINDS = ("base", "adversary", "provider")
BUDGETS = ("eps2", "half-eps2")
SWEEP_SCALES = ("linear", "log")

_TOP_KEYS = {
    "schema_version", "kind", "description", "budget", "epsilon", "sweep",
    "alpha_sweep", "oracle", "leakage", "p_y", "channel",
    "p_y_given_x", "p_z_given_x", "p_x",
}


@dataclass(frozen=True)
class EpsilonSweep:
    start: float
    stop: float
    steps: int
    scale: str = "linear"

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.steps)
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class AlphaSweep:
    start: float
    stop: float
    steps: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class OracleSettings:
    resolution: int = 2000
    samples: int = 20000
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    kind: str
    budget: str = "eps2"
    epsilon: float | None = None
    sweep: EpsilonSweep | None = None
    alpha_sweep: AlphaSweep | None = None
    oracle: OracleSettings = OracleSettings()
    leakage: ChannelMatrix | None = None
    p_y: ProbVector | None = None
    channel: ChannelMatrix | None = None
    p_y_given_x: ChannelMatrix | None = None
    p_z_given_x: ChannelMatrix | None = None
    p_x: ProbVector | None = None
    description: str = ""

    def effective_epsilon(self, eps: float) -> float:
        """Map a scenario epsilon to the per-letter budget convention in force.

        Under "eps2" the per-letter chi-square bound is eps^2; under
        "half-eps2" it is eps^2 / 2, obtained by scaling eps by 1/sqrt(2).
        """
        return eps if self.budget == "eps2" else eps / np.sqrt(2.0)


def bsc_matrix(alpha: float) -> ChannelMatrix:
    """Binary symmetric channel with crossover ``alpha`` as a leakage matrix."""
    return ChannelMatrix([[1.0 - alpha, alpha], [alpha, 1.0 - alpha]])


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ScenarioError(f"{path}{key}: required field is missing")
    return obj[key]


def _number(value, path: str, *, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{path}: expected a number, got {type(value).__name__}")
    out = float(value)
    if positive and out <= 0:
        raise ScenarioError(f"{path}: must be positive, got {out!r}")
    return out


def _integer(value, path: str, *, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{path}: expected an integer, got {type(value).__name__}")
    if value < minimum:
        raise ScenarioError(f"{path}: must be >= {minimum}, got {value}")
    return value


def _vector(value, path: str) -> ProbVector:
    if not isinstance(value, list) or not value:
        raise ScenarioError(f"{path}: expected a non-empty array of numbers")
    for i, entry in enumerate(value):
        if isinstance(entry, bool) or not isinstance(entry, (int, float)):
            raise ScenarioError(f"{path}[{i}]: expected a number")
    try:
        return ProbVector([float(v) for v in value])
    except ValidationError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _matrix(value, path: str) -> ChannelMatrix:
    if not isinstance(value, list) or not value:
        raise ScenarioError(f"{path}: expected a non-empty array of rows")
    width = None
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list) or not row:
            raise ScenarioError(f"{path}[{i}]: expected a non-empty row of numbers")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ScenarioError(
                f"{path}[{i}]: row has {len(row)} entries, expected {width}"
            )
        for j, entry in enumerate(row):
            if isinstance(entry, bool) or not isinstance(entry, (int, float)):
                raise ScenarioError(f"{path}[{i}][{j}]: expected a number")
        rows.append([float(v) for v in row])
    try:
        return ChannelMatrix(rows)
    except ValidationError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioError(f"{path}{unknown[0]}: unknown field")


def _parse_sweep(obj, path: str) -> EpsilonSweep:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object")
    _check_keys(obj, {"start", "stop", "steps", "scale"}, f"{path}.")
    start = _number(_require(obj, "start", f"{path}."), f"{path}.start", positive=True)
    stop = _number(_require(obj, "stop", f"{path}."), f"{path}.stop", positive=True)
    steps = _integer(_require(obj, "steps", f"{path}."), f"{path}.steps", minimum=1)
    scale = obj.get("scale", "linear")
    if scale not in SWEEP_SCALES:
        raise ScenarioError(f"{path}.scale: must be one of {SWEEP_SCALES}, got {scale!r}")
    if stop < start:
        raise ScenarioError(f"{path}: stop {stop!r} is below start {start!r}")
    return EpsilonSweep(start, stop, steps, scale)


def _parse_alpha_sweep(obj, path: str) -> AlphaSweep:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object")
    _check_keys(obj, {"start", "stop", "steps"}, f"{path}.")
    start = _number(_require(obj, "start", f"{path}."), f"{path}.start")
    stop = _number(_require(obj, "stop", f"{path}."), f"{path}.stop")
    steps = _integer(_require(obj, "steps", f"{path}."), f"{path}.steps", minimum=1)
    if not (0.0 <= start <= 1.0 and 0.0 <= stop <= 1.0):
        raise ScenarioError(f"{path}: alpha values must lie in [0, 1]")
    if stop < start:
        raise ScenarioError(f"{path}: stop {stop!r} is below start {start!r}")
    return AlphaSweep(start, stop, steps)


def _parse_oracle(obj, path: str) -> OracleSettings:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object")
    _check_keys(obj, {"resolution", "samples", "seed"}, f"{path}.")
    return OracleSettings(
        resolution=_integer(obj.get("resolution", 2000), f"{path}.resolution", minimum=100),
        samples=_integer(obj.get("samples", 20000), f"{path}.samples", minimum=1),
        seed=_integer(obj.get("seed", 0), f"{path}.seed", minimum=0),
    )


def parse_scenario(obj: dict) -> Scenario:
    """Validate a decoded JSON object into a ``Scenario``."""
    if not isinstance(obj, dict):
        raise ScenarioError("top level: expected a JSON object")
    _check_keys(obj, _TOP_KEYS, "")
    version = _integer(_require(obj, "schema_version", ""), "schema_version", minimum=1)
    if version != 1:
        raise ScenarioError(f"schema_version: unsupported version {version}")
    kind = _require(obj, "kind", "")
    if kind not in KINDS:
        raise ScenarioError(f"kind: must be one of {KINDS}, got {kind!r}")
    budget = obj.get("budget", "eps2")
    if budget not in BUDGETS:
        raise ScenarioError(f"budget: must be one of {BUDGETS}, got {budget!r}")

    epsilon = None
    if "epsilon" in obj:
        epsilon = _number(obj["epsilon"], "epsilon", positive=True)
    sweep = _parse_sweep(obj["sweep"], "sweep") if "sweep" in obj else None
    alpha_sweep = (
        _parse_alpha_sweep(obj["alpha_sweep"], "alpha_sweep")
        if "alpha_sweep" in obj
        else None
    )
    oracle = _parse_oracle(obj["oracle"], "oracle") if "oracle" in obj else OracleSettings()
    description = obj.get("description", "")
    if not isinstance(description, str):
        raise ScenarioError("description: expected a string")

    fields: dict = dict(
        kind=kind, budget=budget, epsilon=epsilon, sweep=sweep,
        alpha_sweep=alpha_sweep, oracle=oracle, description=description,
    )

    if kind in ("base", "adversary"):
        if alpha_sweep is not None:
            if "leakage" in obj:
                raise ScenarioError(
                    "leakage: must be omitted when alpha_sweep is present "
                    "(the channel is built per alpha)"
                )
            if kind != "base":
                raise ScenarioError("alpha_sweep: only supported for kind 'base'")
        else:
            fields["leakage"] = _matrix(_require(obj, "leakage", ""), "leakage")
        fields["p_y"] = _vector(_require(obj, "p_y", ""), "p_y")
        if fields.get("leakage") is not None:
            if fields["leakage"].n_inputs != fields["p_y"].dimension:
                raise ScenarioError(
                    f"p_y: dimension {fields['p_y'].dimension} does not match the "
                    f"leakage matrix ({fields['leakage'].n_inputs} columns)"
                )
        if kind == "adversary":
            channel = _matrix(_require(obj, "channel", ""), "channel")
            if channel.n_outputs != 2 or channel.n_inputs != 2:
                raise ScenarioError(
                    f"channel: must be 2x2, got {channel.n_outputs}x{channel.n_inputs}"
                )
            fields["channel"] = channel
        elif "channel" in obj:
            raise ScenarioError("channel: only valid for kind 'adversary'")
    else:  # provider
        for key in ("leakage", "p_y", "channel", "alpha_sweep"):
            if key in obj:
                raise ScenarioError(f"{key}: not valid for kind 'provider'")
        fields["p_y_given_x"] = _matrix(_require(obj, "p_y_given_x", ""), "p_y_given_x")
        fields["p_z_given_x"] = _matrix(_require(obj, "p_z_given_x", ""), "p_z_given_x")
        fields["p_x"] = _vector(_require(obj, "p_x", ""), "p_x")

    if kind != "provider":
        for key in ("p_y_given_x", "p_z_given_x", "p_x"):
            if key in obj:
                raise ScenarioError(f"{key}: only valid for kind 'provider'")

    return Scenario(**fields)


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario JSON file."""
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    try:
        return parse_scenario(obj)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    except Chi2MechError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
