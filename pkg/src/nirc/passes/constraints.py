"""Platform profiles and compatibility checking."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from nirc import primitives as P
from nirc.graph import Graph, fan_in, fan_out
from nirc.passes.rewrite import RULES


@dataclass(frozen=True)
class PlatformProfile:
    """Declarative hardware budget. ``None`` limits are unbounded."""

    name: str
    supported_kinds: frozenset
    max_neurons: Optional[int] = None
    max_fan_in: Optional[int] = None
    max_fan_out: Optional[int] = None
    weight_bits: int = 8
    state_bits: int = 16
    reset_modes: frozenset = frozenset({"hard", "subtractive"})
    dialect: Optional[str] = None
    notes: str = ""

    def __post_init__(self):
        object.__setattr__(self, "supported_kinds", frozenset(self.supported_kinds))
        object.__setattr__(self, "reset_modes", frozenset(self.reset_modes))
        if not self.supported_kinds:
            raise ValueError("profile must support at least one primitive kind")
        if self.weight_bits < 1 or self.state_bits < 1:
            raise ValueError("bit widths must be >= 1")

    @classmethod
    def from_json(cls, doc: dict) -> "PlatformProfile":
        doc = {k: v for k, v in doc.items() if not k.startswith("_")}
        return cls(**doc)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "supported_kinds": sorted(self.supported_kinds),
            "max_neurons": self.max_neurons,
            "max_fan_in": self.max_fan_in,
            "max_fan_out": self.max_fan_out,
            "weight_bits": self.weight_bits,
            "state_bits": self.state_bits,
            "reset_modes": sorted(self.reset_modes),
            "dialect": self.dialect,
            "notes": self.notes,
        }


BUILTIN_PROFILES = ("loihi2", "speck", "spinnaker2", "xylo")


def load_profile(name_or_path) -> PlatformProfile:
    """Load a built-in profile by name, or any profile JSON file by path."""
    path = Path(str(name_or_path))
    if path.suffix == ".json" or path.exists():
        return PlatformProfile.from_json(json.loads(path.read_text()))
    if name_or_path not in BUILTIN_PROFILES:
        raise ValueError(f"unknown profile {name_or_path!r}; built-ins: {', '.join(BUILTIN_PROFILES)}")
    text = resources.files("nirc").joinpath("profiles", f"{name_or_path}.json").read_text()
    return PlatformProfile.from_json(json.loads(text))


@dataclass(frozen=True)
class Violation:
    constraint: str
    nodes: tuple
    message: str

    def __str__(self):
        return f"{self.constraint}: {self.message} ({', '.join(self.nodes)})"


@dataclass(frozen=True)
class CompatReport:
    verdict: str  # "compatible" | "incompatible"
    violations: tuple = ()
    rewrites: tuple = ()
    graph: Optional[Graph] = field(default=None, compare=False)

    @property
    def compatible(self) -> bool:
        return self.verdict == "compatible"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "violations": [
                {"constraint": v.constraint, "nodes": list(v.nodes), "message": v.message}
                for v in self.violations
            ],
            "rewrites": list(self.rewrites),
        }


def neuron_count(graph: Graph) -> int:
    """Elements of stateful leaf nodes; a 1000-element LIF node is 1000 neurons."""
    return sum(int(np.prod(p.shape)) for p in graph.nodes.values() if p.stateful)


def violations(graph: Graph, profile: PlatformProfile, reset: Optional[str] = None) -> list:
    found = []
    unsupported = [n for n, p in graph.nodes.items() if p.kind not in profile.supported_kinds]
    if unsupported:
        kinds = sorted({graph.nodes[n].kind for n in unsupported})
        found.append(Violation("unsupported-kind", tuple(unsupported),
                               f"kinds {', '.join(kinds)} not supported by {profile.name}"))
    neurons = [n for n, p in graph.nodes.items() if p.stateful]
    count = neuron_count(graph)
    if profile.max_neurons is not None and count > profile.max_neurons:
        found.append(Violation("neuron-budget", tuple(neurons),
                               f"{count} neurons exceed the budget of {profile.max_neurons}"))
    for limit, fn, label in ((profile.max_fan_in, fan_in, "fan-in"),
                             (profile.max_fan_out, fan_out, "fan-out")):
        if limit is None:
            continue
        for n in neurons:
            k = fn(graph, n)
            if k > limit:
                found.append(Violation(label, (n,), f"{label} {k} exceeds {limit}"))
    if reset is not None and str(getattr(reset, "value", reset)) not in profile.reset_modes:
        found.append(Violation("reset-mode", (),
                               f"reset mode {getattr(reset, 'value', reset)} not supported"))
    return found


def _score(vs) -> int:
    return sum(max(1, len(v.nodes)) for v in vs)


def check_constraints(graph: Graph, profile: PlatformProfile, try_rewrites: bool = False,
                      reset: Optional[str] = None) -> CompatReport:
    """Check ``graph`` against ``profile``.

    With ``try_rewrites`` the built-in rewrites are applied greedily, each
    only when it strictly reduces the violations, until none helps.
    """
    current = graph
    found = violations(current, profile, reset)
    applied = []
    while found and try_rewrites:
        for rule in RULES:
            candidate = rule(current)
            if candidate == current:
                continue
            after = violations(candidate, profile, reset)
            if _score(after) < _score(found):
                current, found = candidate, after
                applied.append(rule.name)
                break
        else:
            break
    verdict = "incompatible" if found else "compatible"
    return CompatReport(verdict, tuple(found), tuple(applied), current)
