"""Experiment configuration: flat key-value files plus CLI flag overrides."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .mechanisms import (
    BERNOULLI_SUBSET,
    D_SUBSET,
    DJW,
    KRR,
    MechanismParams,
    default_subset_size,
)
from .sgd import NON_PRIVATE

_KNOWN_MECHANISMS = (BERNOULLI_SUBSET, D_SUBSET, KRR, DJW, NON_PRIVATE)

_LIST_KEYS = {"mechanism", "epsilon", "k", "n"}
_SCALAR_KEYS = {"trials", "master_seed", "c_gamma", "out", "d_override"}


@dataclass(frozen=True)
class ExperimentConfig:
    mechanisms: tuple[str, ...] = (BERNOULLI_SUBSET, D_SUBSET, KRR)
    epsilons: tuple[float, ...] = (1.0,)
    ks: tuple[int, ...] = (4, 16, 64)
    ns: tuple[int, ...] = (100_000,)
    trials: int = 50
    master_seed: int = 1
    c_gamma: float = 0.25
    out: str | None = None
    d_override: int | None = None

    def __post_init__(self):
        if not self.mechanisms or not self.epsilons or not self.ks or not self.ns:
            raise ParameterError("mechanism, epsilon, k and n lists must be nonempty")
        for mech in self.mechanisms:
            if mech not in _KNOWN_MECHANISMS:
                raise ParameterError(f"unknown mechanism {mech!r}")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if not (0 <= self.master_seed < 2**64):
            raise ParameterError("master_seed must fit in 64 bits")
        if not (self.c_gamma >= 0 and math.isfinite(self.c_gamma)):
            raise ParameterError("c_gamma must be finite and nonnegative")
        for eps in self.epsilons:
            if not (eps > 0 and math.isfinite(eps)):
                raise ParameterError(f"epsilon {eps} must be positive and finite")
        for k in self.ks:
            if k < 2:
                raise ParameterError(f"k {k} must be >= 2")
        for n in self.ns:
            if n < 1:
                raise ParameterError(f"n {n} must be >= 1")
        if D_SUBSET in self.mechanisms:
            for k in self.ks:
                for eps in self.epsilons:
                    d = self.subset_size_for(k, eps)
                    MechanismParams(epsilon=eps, num_labels=k, subset_size=d)

    def subset_size_for(self, k: int, epsilon: float) -> int:
        if self.d_override is not None:
            return self.d_override
        return default_subset_size(k, epsilon)


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "mechanism":
        return tuple(part.strip() for part in raw.split(",") if part.strip())
    if key == "epsilon":
        return tuple(float(part) for part in raw.split(",") if part.strip())
    if key in ("k", "n"):
        return tuple(int(part) for part in raw.split(",") if part.strip())
    if key in ("trials", "master_seed", "d_override"):
        return int(raw)
    if key == "c_gamma":
        return float(raw)
    if key == "out":
        return raw
    raise ParameterError(f"unknown config key {key!r}")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, lists use commas."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in _LIST_KEYS | _SCALAR_KEYS:
            raise ParameterError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ParameterError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ParameterError(f"{source}:{lineno}: {exc}") from exc
    return values


_FIELD_BY_KEY = {
    "mechanism": "mechanisms",
    "epsilon": "epsilons",
    "k": "ks",
    "n": "ns",
    "trials": "trials",
    "master_seed": "master_seed",
    "c_gamma": "c_gamma",
    "out": "out",
    "d_override": "d_override",
}


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then config file values, then CLI overrides, in that order."""
    kwargs: dict = {}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            kwargs[_FIELD_BY_KEY[key]] = value
    return ExperimentConfig(**kwargs)


def load_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    file_values = None
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            file_values = parse_config_text(fh.read(), source=path)
    return build_config(file_values, overrides)
